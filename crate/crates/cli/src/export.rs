//! Result containers and file writers.
//!
//! Every artifact starts with `#`-prefixed provenance lines (experiment,
//! config hash, seed, tool version) so a stray CSV can always be traced
//! back to the exact run that produced it. All numbers are printed with a
//! fixed `{:.12e}` format: re-running the same (config, seed) reproduces
//! every output byte for byte.
//!
//! Formats:
//! * sweep tables — CSV, one header row naming columns with units;
//! * field maps — matrix CSV, and/or a 16-bit binary portable graymap
//!   (P5) with a sidecar text file giving the code→tesla scale;
//! * waveforms — two-column signed-integer text with `sample_rate` /
//!   `full_scale_rabi` header lines, plus a little-endian interleaved
//!   16-bit binary twin when an image format is requested;
//! * fit reports — `key = value` text.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nvsim_core::field::FieldMap;
use nvsim_core::pulse::WaveformIQ;

use crate::error::{CliError, Result};

/// Identity of one run; embedded in every artifact header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub experiment: String,
    pub config_hash: u64,
    pub seed: u64,
    pub version: &'static str,
}

impl Provenance {
    fn header(&self) -> String {
        format!(
            "# experiment = {}\n# config_hash = {:016x}\n# seed = {}\n# version = {}\n",
            self.experiment, self.config_hash, self.seed, self.version
        )
    }
}

/// A column-oriented numeric table (sweep curves, rate summaries).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem, e.g. "xy8_sweep".
    pub name: String,
    /// Column labels including units, e.g. "tau_s".
    pub columns: Vec<String>,
    /// Row-major data; every row has `columns.len()` entries.
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// Two-column convenience constructor.
    pub fn xy(name: &str, x_label: &str, y_label: &str, x: &[f64], y: &[f64]) -> Self {
        Self {
            name: name.into(),
            columns: vec![x_label.into(), y_label.into()],
            rows: x.iter().zip(y).map(|(&a, &b)| vec![a, b]).collect(),
        }
    }
}

/// Everything a scenario run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub provenance: Provenance,
    pub tables: Vec<Table>,
    /// Named field maps, values in tesla.
    pub maps: Vec<(String, FieldMap)>,
    /// Named IQ waveforms.
    pub waveforms: Vec<(String, WaveformIQ)>,
    /// Fit-report lines in insertion order.
    pub report: Vec<(String, String)>,
}

impl RunResult {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            provenance,
            tables: Vec::new(),
            maps: Vec::new(),
            waveforms: Vec::new(),
            report: Vec::new(),
        }
    }

    /// Append a `key = value` report line.
    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.report.push((key.into(), value.to_string()));
    }

    /// Look up a report value (test convenience).
    pub fn get(&self, key: &str) -> Option<&str> {
        self.report
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Parse a numeric report value.
    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }
}

/// Which artifact families to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    /// Tables and matrix CSVs only.
    Csv,
    /// Graymaps (and binary waveforms) only.
    Pgm,
    /// Everything.
    Both,
}

impl OutputFormat {
    fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
    fn wants_image(self) -> bool {
        matches!(self, OutputFormat::Pgm | OutputFormat::Both)
    }
}

/// Write all artifacts of `result` under `out_dir`, returning the paths
/// written. The report is always written; tables and maps follow `format`.
pub fn export(result: &RunResult, out_dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut written = Vec::new();
    let head = result.provenance.header();

    if format.wants_csv() {
        for t in &result.tables {
            let path = out_dir.join(format!("{}.csv", t.name));
            let mut text = head.clone();
            text.push_str(&t.columns.join(","));
            text.push('\n');
            for row in &t.rows {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            write_file(&path, text.as_bytes())?;
            written.push(path);
        }
        for (name, map) in &result.maps {
            let path = out_dir.join(format!("{name}.csv"));
            let mut text = head.clone();
            let _ = writeln!(
                text,
                "# matrix: {} rows (y) x {} columns (x), values in T",
                map.grid.ny, map.grid.nx
            );
            for j in 0..map.grid.ny {
                let cells: Vec<String> =
                    (0..map.grid.nx).map(|i| format!("{:.12e}", map.at(i, j))).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            write_file(&path, text.as_bytes())?;
            written.push(path);
        }
    }

    if format.wants_image() {
        for (name, map) in &result.maps {
            let pgm = out_dir.join(format!("{name}.pgm"));
            write_file(&pgm, &pgm_bytes(map))?;
            written.push(pgm);
            let scale = out_dir.join(format!("{name}.scale.txt"));
            let (lo, hi) = (map.min(), map.max());
            let text = format!(
                "{head}# linear graymap scale: value_T = min_T + code/65535 * (max_T - min_T)\n\
                 min_T = {lo:.12e}\nmax_T = {hi:.12e}\n"
            );
            write_file(&scale, text.as_bytes())?;
            written.push(scale);
        }
    }

    for (name, wf) in &result.waveforms {
        let txt = out_dir.join(format!("{name}.txt"));
        let mut text = head.clone();
        let _ = writeln!(text, "# sample_rate = {:.12e}", wf.sample_rate);
        let _ = writeln!(text, "# full_scale_rabi = {:.12e}", wf.full_scale_rabi);
        for (i, q) in wf.i.iter().zip(&wf.q) {
            let _ = writeln!(text, "{i} {q}");
        }
        write_file(&txt, text.as_bytes())?;
        written.push(txt);
        if format.wants_image() {
            // Binary twin: interleaved little-endian i16 pairs.
            let bin = out_dir.join(format!("{name}.bin"));
            let mut bytes = Vec::with_capacity(4 * wf.len());
            for (i, q) in wf.i.iter().zip(&wf.q) {
                bytes.extend_from_slice(&i.to_le_bytes());
                bytes.extend_from_slice(&q.to_le_bytes());
            }
            write_file(&bin, &bytes)?;
            written.push(bin);
        }
    }

    if !result.report.is_empty() {
        let path = out_dir.join(format!("{}_report.txt", result.provenance.experiment));
        let mut text = head;
        for (k, v) in &result.report {
            let _ = writeln!(text, "{k} = {v}");
        }
        write_file(&path, text.as_bytes())?;
        written.push(path);
    }

    Ok(written)
}

/// 16-bit binary PGM (P5), brightest code at the map maximum. The scale
/// sidecar written alongside holds the linear code→tesla map. A flat map
/// degenerates to all-zero codes.
fn pgm_bytes(map: &FieldMap) -> Vec<u8> {
    let (lo, hi) = (map.min(), map.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut bytes = format!("P5\n{} {}\n65535\n", map.grid.nx, map.grid.ny).into_bytes();
    for j in 0..map.grid.ny {
        for i in 0..map.grid.nx {
            let code = ((map.at(i, j) - lo) / span * 65535.0).round() as u16;
            // PGM multi-byte samples are big-endian.
            bytes.extend_from_slice(&code.to_be_bytes());
        }
    }
    bytes
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nvsim_core::field::MapGrid;

    fn dummy() -> Provenance {
        Provenance {
            experiment: "test".into(),
            config_hash: 0xabc,
            seed: 9,
            version: "0.0.0",
        }
    }

    fn tiny_map() -> FieldMap {
        FieldMap {
            grid: MapGrid::centered(3, 2, 1e-6),
            values: vec![-1e-6, 0.0, 1e-6, -0.5e-6, 0.25e-6, 0.75e-6],
        }
    }

    #[test]
    fn csv_bytes_are_deterministic_and_carry_provenance() {
        let mut r = RunResult::new(dummy());
        r.tables.push(Table::xy("curve", "x_s", "y_t", &[1.0, 2.0], &[3.0, 4.5]));
        let dir = std::env::temp_dir().join("nvsim_export_test_csv");
        let _ = fs::remove_dir_all(&dir);
        let a = export(&r, &dir, OutputFormat::Csv).unwrap();
        let first = fs::read(&a[0]).unwrap();
        let b = export(&r, &dir, OutputFormat::Csv).unwrap();
        assert_eq!(first, fs::read(&b[0]).unwrap());
        let text = String::from_utf8(first).unwrap();
        assert!(text.starts_with("# experiment = test\n"));
        assert!(text.contains("# config_hash = 0000000000000abc"));
        assert!(text.contains("x_s,y_t"));
        assert!(text.contains("1.000000000000e0,3.000000000000e0"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn pgm_has_p5_header_and_full_code_range() {
        let bytes = pgm_bytes(&tiny_map());
        assert!(bytes.starts_with(b"P5\n3 2\n65535\n"));
        let data = &bytes[b"P5\n3 2\n65535\n".len()..];
        assert_eq!(data.len(), 12);
        let codes: Vec<u16> = data
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        assert_eq!(codes.iter().min(), Some(&0));
        assert_eq!(codes.iter().max(), Some(&65535));
    }

    #[test]
    fn formats_select_artifact_families() {
        let mut r = RunResult::new(dummy());
        r.maps.push(("m".into(), tiny_map()));
        r.note("k", 1);
        let dir = std::env::temp_dir().join("nvsim_export_test_fmt");
        let _ = fs::remove_dir_all(&dir);
        let csv_only = export(&r, &dir, OutputFormat::Csv).unwrap();
        assert!(csv_only.iter().any(|p| p.extension().unwrap() == "csv"));
        assert!(!csv_only.iter().any(|p| p.extension().unwrap() == "pgm"));
        let both = export(&r, &dir, OutputFormat::Both).unwrap();
        for ext in ["csv", "pgm", "txt"] {
            assert!(both.iter().any(|p| p.extension().unwrap() == ext), "missing {ext}");
        }
        // Scale sidecar rides with the graymap.
        assert!(both.iter().any(|p| p.to_string_lossy().ends_with("m.scale.txt")));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn io_failure_names_the_path() {
        let mut r = RunResult::new(dummy());
        r.note("k", "v");
        let file = std::env::temp_dir().join("nvsim_export_blocker");
        fs::write(&file, b"not a directory").unwrap();
        let err = export(&r, &file.join("sub"), OutputFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("nvsim_export_blocker"));
        assert_eq!(err.exit_code(), 3);
        fs::remove_file(&file).unwrap();
    }
}
