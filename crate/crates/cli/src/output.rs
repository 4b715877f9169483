//! CSV tables and gnuplot scripts, written by a single writer.

use std::path::Path;

use crate::error::CliError;

/// Fixed 17-significant-digit scientific notation.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Gnuplot commands after the CSV preamble, emitted on request.
    pub plot: Option<String>,
    /// Rows may have differing lengths.
    pub ragged: bool,
}

impl Table {
    pub fn new(name: &str, header: Vec<&'static str>) -> Self {
        Self { name: name.to_string(), header, rows: Vec::new(), plot: None, ragged: false }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert!(self.ragged || row.len() == self.header.len());
        self.rows.push(row);
    }

    pub fn with_plot(mut self, body: impl Into<String>) -> Self {
        self.plot = Some(body.into());
        self
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }
}

pub fn write_tables(dir: &Path, tables: &[Table], emit_plots: bool) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for t in tables {
        let path = dir.join(t.file_name());
        let mut w = csv::WriterBuilder::new().flexible(t.ragged).from_path(&path).map_err(|e| CliError::io(&path, e))?;
        w.write_record(&t.header).map_err(|e| CliError::io(&path, e))?;
        for row in &t.rows {
            w.write_record(row).map_err(|e| CliError::io(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        log::info!("wrote {} ({} rows)", path.display(), t.rows.len());
        if let (true, Some(body)) = (emit_plots, &t.plot) {
            let gp = dir.join(format!("{}.gp", t.name));
            let script = format!(
                "set datafile separator ','\nset key outside\nset terminal pngcairo size 900,600\nset output '{}.png'\nfile = '{}'\n{}\n",
                t.name,
                t.file_name(),
                body
            );
            std::fs::write(&gp, script).map_err(|e| CliError::io(&gp, e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(float(0.0625), "6.2500000000000000e-2");
    }
}
