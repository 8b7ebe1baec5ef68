//! Quadrature on the reference triangle `{(x, y) : x, y ≥ 0, x + y ≤ 1}` and
//! the reference edge `[0, 1]`.
//!
//! Low degrees use the classical symmetric rules; from degree 6 upwards the
//! triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre
//! rules, which are exact to any requested degree.

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 12;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 2], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// One-dimensional rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule on `[0, 1]` exact for polynomials of `degree`.
pub fn edge_rule(degree: usize) -> Result<EdgeRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadratureDegree(degree, MAX_DEGREE));
    }
    let m = degree / 2 + 1;
    let (x, w) = gauss_legendre(m);
    Ok(EdgeRule {
        points: x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        degree,
    })
}

/// Triangle rule exact for bivariate polynomials of total `degree`.
pub fn triangle_rule(degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadratureDegree(degree, MAX_DEGREE));
    }
    let rule = match degree {
        0 | 1 => symmetric(&[(1.0 / 3.0, 1.0 / 3.0, 1.0)]),
        2 => symmetric(&[(1.0 / 6.0, 2.0 / 3.0, 1.0 / 3.0)]),
        3 | 4 => symmetric(&[
            (0.445_948_490_915_965, 0.108_103_018_168_070, 0.223_381_589_678_011),
            (0.091_576_213_509_771, 0.816_847_572_980_459, 0.109_951_743_655_322),
        ]),
        5 => symmetric(&[
            (1.0 / 3.0, 1.0 / 3.0, 0.225),
            (0.470_142_064_105_115, 0.059_715_871_789_770, 0.132_394_152_788_506),
            (0.101_286_507_323_456, 0.797_426_985_353_087, 0.125_939_180_544_827),
        ]),
        _ => collapsed(degree),
    };
    Ok(QuadratureRule { degree, ..rule })
}

/// Orbits `(a, b, w)`: barycentric `(a, a, b)` with relative weight `w`
/// (weights relative to the triangle area).
fn symmetric(orbits: &[(f64, f64, f64)]) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for &(a, b, w) in orbits {
        if (a - b).abs() < 1e-15 {
            points.push([a, a]);
            weights.push(0.5 * w);
        } else {
            // barycentric permutations of (a, a, b), reference coords (λ1, λ2)
            for p in [[a, a], [a, b], [b, a]] {
                points.push(p);
                weights.push(0.5 * w);
            }
        }
    }
    // tabulated digits: renormalise so the weights sum to exactly 1/2
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w *= 0.5 / total;
    }
    QuadratureRule {
        points,
        weights,
        degree: 0,
    }
}

fn collapsed(degree: usize) -> QuadratureRule {
    let m = (degree + 2).div_ceil(2);
    let (x, w) = gauss_legendre(m);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for i in 0..m {
        let u = 0.5 * (x[i] + 1.0);
        for j in 0..m {
            let v = 0.5 * (x[j] + 1.0);
            points.push([u, (1.0 - u) * v]);
            weights.push(0.25 * w[i] * w[j] * (1.0 - u));
        }
    }
    QuadratureRule {
        points,
        weights,
        degree,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn midpoint_rule() {
        let r = triangle_rule(0).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);
        let e = edge_rule(1).unwrap();
        assert_eq!(e.len(), 1);
        assert!((e.points[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn monomial_examples() {
        let r = triangle_rule(2).unwrap();
        let v: f64 = r.iter().map(|(p, w)| w * p[0] * p[1]).sum();
        assert!((v - 1.0 / 24.0).abs() < 1e-14);
        let r = triangle_rule(5).unwrap();
        let v: f64 = r.iter().map(|(p, w)| w * p[0].powi(2) * p[1].powi(3)).sum();
        assert!((v - 1.0 / 420.0).abs() < 1e-14);
        let e = edge_rule(3).unwrap();
        assert_eq!(e.len(), 2);
        let v: f64 = e.iter().map(|(t, w)| w * t.powi(3)).sum();
        assert!((v - 0.25).abs() < 1e-15);
        let e = edge_rule(7).unwrap();
        assert_eq!(e.len(), 4);
        let v: f64 = e.iter().map(|(t, w)| w * t.powi(7)).sum();
        assert!((v - 0.125).abs() < 1e-15);
    }

    #[test]
    fn exactness_sweep() {
        for degree in 0..=MAX_DEGREE {
            let r = triangle_rule(degree).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
            for p in &r.points {
                assert!(p[0] >= -1e-15 && p[1] >= -1e-15 && p[0] + p[1] <= 1.0 + 1e-15);
            }
            for a in 0..=degree {
                for b in 0..=(degree - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let got: f64 = r
                        .iter()
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    assert!((got - exact).abs() < 1e-13, "deg {degree} x^{a} y^{b}");
                }
            }
            let e = edge_rule(degree).unwrap();
            assert!((e.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for k in 0..=degree {
                let got: f64 = e.iter().map(|(t, w)| w * t.powi(k as i32)).sum();
                assert!((got - 1.0 / (k + 1) as f64).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_high_degree() {
        assert!(triangle_rule(13).is_err());
        assert!(edge_rule(13).is_err());
    }
}
