//! Result serialization. Every CSV starts with `# manifest=<file>` so a result
//! can always be traced back to the run that produced it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::RunManifest;
use crate::error::Result;
use crate::harness::{SpectrumCheck, SweepResult};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `rows` as CSV preceded by the manifest reference and any extra
/// `# key=value` comment lines.
pub fn write_csv<S: Serialize>(path: &Path, comments: &[String], rows: &[S]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# manifest={MANIFEST_FILE}")?;
    for c in comments {
        writeln!(file, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a CSV with an explicit header, for rows that are plain tuples.
pub fn write_csv_rows(path: &Path, comments: &[String], header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# manifest={MANIFEST_FILE}")?;
    for c in comments {
        writeln!(file, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    writeln!(file)?;
    file.flush()?;
    Ok(())
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    write_json(&dir.join(MANIFEST_FILE), manifest)
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    manifest: &'a str,
    cells: &'a [crate::harness::CellRecord],
}

/// `cells.csv`, `trials.csv` and `result.json`; returns the file names.
pub fn write_sweep(dir: &Path, result: &SweepResult) -> Result<Vec<String>> {
    write_csv(&dir.join("cells.csv"), &[], &result.cells)?;
    write_csv(&dir.join("trials.csv"), &[], &result.trials)?;
    write_json(
        &dir.join("result.json"),
        &SweepSummary {
            manifest: MANIFEST_FILE,
            cells: &result.cells,
        },
    )?;
    Ok(vec!["cells.csv".into(), "trials.csv".into(), "result.json".into()])
}

#[derive(Serialize)]
struct SpectrumSummary<'a> {
    manifest: &'a str,
    n: usize,
    k: usize,
    l: usize,
    seed: u64,
    law: &'a crate::freeprob::SpectralLaw,
    zero_fraction: f64,
    one_count: usize,
    expected_one_count: usize,
    bulk_l1: f64,
    edge_violations: usize,
}

/// `histogram.csv`, `eigenvalues.csv` and `result.json`; returns the file names.
pub fn write_spectrum(dir: &Path, check: &SpectrumCheck) -> Result<Vec<String>> {
    write_csv(&dir.join("histogram.csv"), &[], &check.histogram)?;
    let eig: Vec<Vec<f64>> = check.eigenvalues.iter().map(|&v| vec![v]).collect();
    write_csv_rows(&dir.join("eigenvalues.csv"), &[], &["eigenvalue"], &eig)?;
    write_json(
        &dir.join("result.json"),
        &SpectrumSummary {
            manifest: MANIFEST_FILE,
            n: check.n,
            k: check.k,
            l: check.l,
            seed: check.seed,
            law: &check.law,
            zero_fraction: check.zero_fraction,
            one_count: check.one_count,
            expected_one_count: check.expected_one_count,
            bulk_l1: check.bulk_l1,
            edge_violations: check.edge_violations,
        },
    )?;
    Ok(vec!["histogram.csv".into(), "eigenvalues.csv".into(), "result.json".into()])
}
