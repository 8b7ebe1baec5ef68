use std::path::Path;

use crate::diagnostics::TimeSeries;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 5] = ["t", "energy", "enstrophy", "div_norm", "newton_iters"];

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// One row per sample, reals with 17 significant digits.
pub fn write_csv(series: &TimeSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for i in 0..series.len() {
        w.write_record([
            format!("{:.16e}", series.times[i]),
            format!("{:.16e}", series.energy[i]),
            format!("{:.16e}", series.enstrophy[i]),
            format!("{:.16e}", series.div_norm[i]),
            series.newton_iters[i].to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<TimeSeries> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Io(format!("unexpected header {header:?}")));
    }
    let mut series = TimeSeries::default();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let real = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|_| Error::Io(format!("row {}: bad number {:?}", line + 1, &rec[k])))
        };
        let iters = rec[4]
            .parse()
            .map_err(|_| Error::Io(format!("row {}: bad iteration count {:?}", line + 1, &rec[4])))?;
        series.push(real(0)?, real(1)?, real(2)?, real(3)?, iters)?;
    }
    Ok(series)
}
