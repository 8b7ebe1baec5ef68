//! Monomial bases on the reference triangle and shifted Legendre
//! polynomials on `[0, 1]`.

/// Number of monomials `x^a y^b` with `a + b <= degree`.
pub fn monomial_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Exponents `(a, b)` ordered by total degree, then by increasing `b`.
pub fn monomial_exponents(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(monomial_count(degree));
    for t in 0..=degree {
        for b in 0..=t {
            out.push((t - b, b));
        }
    }
    out
}

/// Index of `x^a y^b` in [`monomial_exponents`] ordering.
pub fn monomial_index(a: usize, b: usize) -> usize {
    let t = a + b;
    t * (t + 1) / 2 + b
}

/// Values and first derivatives of all monomials of `degree` at `p`.
/// Output layout: `vals[m]`, `dx[m]`, `dy[m]`.
pub fn eval_monomials(degree: usize, p: [f64; 2], vals: &mut [f64], dx: &mut [f64], dy: &mut [f64]) {
    let mut xp = [1.0; 16];
    let mut yp = [1.0; 16];
    for k in 1..=degree {
        xp[k] = xp[k - 1] * p[0];
        yp[k] = yp[k - 1] * p[1];
    }
    for (m, (a, b)) in monomial_exponents(degree).into_iter().enumerate() {
        vals[m] = xp[a] * yp[b];
        dx[m] = if a > 0 { a as f64 * xp[a - 1] * yp[b] } else { 0.0 };
        dy[m] = if b > 0 { b as f64 * xp[a] * yp[b - 1] } else { 0.0 };
    }
}

/// Shifted Legendre polynomial `P_k(2t - 1)`.
pub fn shifted_legendre(k: usize, t: f64) -> f64 {
    let z = 2.0 * t - 1.0;
    let mut p0 = 1.0;
    if k == 0 {
        return p0;
    }
    let mut p1 = z;
    for n in 2..=k {
        let p2 = ((2 * n - 1) as f64 * z * p1 - (n - 1) as f64 * p0) / n as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        for (m, (a, b)) in monomial_exponents(5).into_iter().enumerate() {
            assert_eq!(monomial_index(a, b), m);
        }
        assert_eq!(monomial_exponents(3).len(), monomial_count(3));
    }

    #[test]
    fn legendre_orthogonal_on_unit_interval() {
        let rule = crate::quadrature::edge_rule(10).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let v: f64 = rule
                    .iter()
                    .map(|(t, w)| w * shifted_legendre(i, t) * shifted_legendre(j, t))
                    .sum();
                let expect = if i == j { 1.0 / (2 * i + 1) as f64 } else { 0.0 };
                assert!((v - expect).abs() < 1e-14);
            }
        }
        // odd polynomials flip under t -> 1 - t
        assert!((shifted_legendre(1, 0.2) + shifted_legendre(1, 0.8)).abs() < 1e-15);
    }
}
