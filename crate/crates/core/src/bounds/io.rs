//! Bound-table files: CSV `r,beta_abs,chi,chi_normalized` and a JSON sidecar holding
//! the full table including achieving states.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{BoundRow, BoundTable};
use crate::error::{Error, Result};
use crate::states::Term;

#[derive(Serialize, Deserialize)]
struct CsvRow {
    r: usize,
    beta_abs: f64,
    chi: f64,
    chi_normalized: f64,
}

/// `chi_{r}.csv`
pub fn table_file_name(r: usize) -> String {
    format!("chi_{r}.csv")
}

pub fn write_table_csv<W: Write>(table: &BoundTable, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for row in &table.rows {
        wr.serialize(CsvRow { r: table.r, beta_abs: row.beta_abs, chi: row.chi, chi_normalized: row.normalized_chi })?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a table written by [`write_table_csv`]. Achieving states are not stored in
/// the CSV, so rows come back with empty `terms` and `converged = true`.
pub fn read_table_csv<R: Read>(r: R) -> Result<BoundTable> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    let mut rank = None;
    for rec in rd.deserialize() {
        let rec: CsvRow = rec?;
        if *rank.get_or_insert(rec.r) != rec.r {
            return Err(Error::InvalidInput("bound table mixes several r".into()));
        }
        if !(rec.chi.is_finite() && rec.chi > 0.0 && rec.beta_abs >= 0.0) {
            return Err(Error::InvalidInput(format!("bad bound-table row at beta = {}", rec.beta_abs)));
        }
        rows.push(BoundRow {
            beta_abs: rec.beta_abs,
            chi: rec.chi,
            normalized_chi: rec.chi_normalized,
            converged: true,
            terms: Vec::<Term>::new(),
        });
    }
    let r = rank.ok_or_else(|| Error::InvalidInput("empty bound table".into()))?;
    if rows.windows(2).any(|w| w[1].beta_abs <= w[0].beta_abs) {
        return Err(Error::InvalidInput("bound-table grid must be strictly increasing".into()));
    }
    Ok(BoundTable { r, seed: 0, restarts: 0, rows })
}

pub fn write_table_json<W: Write>(table: &BoundTable, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, table)?;
    Ok(())
}

pub fn read_table_json<R: Read>(r: R) -> Result<BoundTable> {
    Ok(serde_json::from_reader(r)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn table() -> BoundTable {
        BoundTable {
            r: 2,
            seed: 4,
            restarts: 16,
            rows: vec![
                BoundRow::trivial(0.0),
                BoundRow {
                    beta_abs: 0.05,
                    chi: 1.000697,
                    normalized_chi: 1.000697 * (-0.00125f64).exp(),
                    converged: true,
                    terms: vec![
                        Term::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
                        Term::new(Complex64::new(-0.3, 0.1), Complex64::new(1.6, 0.0)),
                    ],
                },
            ],
        }
    }

    #[test]
    fn csv_roundtrip() {
        let mut buf = Vec::new();
        write_table_csv(&table(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("r,beta_abs,chi,chi_normalized\n"));
        let back = read_table_csv(&buf[..]).unwrap();
        assert_eq!(back.r, 2);
        assert_eq!(back.rows[1].chi, 1.000697);
    }

    #[test]
    fn json_roundtrip() {
        let mut buf = Vec::new();
        write_table_json(&table(), &mut buf).unwrap();
        assert_eq!(read_table_json(&buf[..]).unwrap(), table());
    }

    #[test]
    fn rejects_unsorted_grid() {
        let text = "r,beta_abs,chi,chi_normalized\n2,0.1,1.0,1.0\n2,0.05,1.0,1.0\n";
        assert!(read_table_csv(text.as_bytes()).is_err());
    }
}
