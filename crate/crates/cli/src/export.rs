use std::io::{Read, Write};

use thiserror::Error;

use crate::experiment::AGGREGATE_HEADER;

/// Columns of the plot file: the `(method, d, l)` key, both abscissas, then
/// the remaining aggregate columns.
pub const PLOT_HEADER: [&str; 13] = [
    "method", "function", "d", "l", "F_l", "M_l", "N_l", "E_l", "V_l", "R_l", "inv_alpha", "inv_beta", "trials_ok",
];

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("aggregate schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Reshapes an aggregate CSV into one plot row per `(method, d, l)`.
/// Fields are copied verbatim. Returns the number of data rows written.
pub fn export_plotdata<R: Read, W: Write>(aggregate: R, out: W) -> Result<usize, ExportError> {
    let mut reader = csv::Reader::from_reader(aggregate);
    let header = reader.headers()?.clone();
    if let Some(unknown) = header.iter().find(|h| !AGGREGATE_HEADER.contains(h)) {
        return Err(ExportError::SchemaMismatch(format!("unknown column {unknown:?}")));
    }
    let positions = PLOT_HEADER
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| ExportError::SchemaMismatch(format!("missing column {name:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(PLOT_HEADER)?;
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        writer.write_record(positions.iter().map(|&p| &record[p]))?;
        rows += 1;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_aggregate_gives_header_only() {
        let input = AGGREGATE_HEADER.join(",") + "\n";
        let mut out = Vec::new();
        assert_eq!(export_plotdata(input.as_bytes(), &mut out).unwrap(), 0);
        assert_eq!(String::from_utf8(out).unwrap(), PLOT_HEADER.join(",") + "\n");
    }

    #[test]
    fn unknown_column_is_rejected() {
        let input = AGGREGATE_HEADER.join(",") + ",extra\n";
        assert!(matches!(
            export_plotdata(input.as_bytes(), Vec::new()),
            Err(ExportError::SchemaMismatch(_))
        ));
        let short = "method,d,l\n";
        assert!(matches!(
            export_plotdata(short.as_bytes(), Vec::new()),
            Err(ExportError::SchemaMismatch(_))
        ));
    }
}
