//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::{self, RunManifest, RunOutcome, RunSpec};
use crate::equivalence;
use crate::error::{Error, Result};
use crate::freeprob::SpectralLaw;
use crate::harness::{SpectrumCheck, SweepResult};
use crate::linalg;
use crate::output;
use crate::plot::{Chart, Series};
use crate::rmse;

#[derive(Debug, Parser)]
#[command(name = "blockmc", version, about = "Block-missing nuclear-norm completion: theory, solver and experiments")]
pub struct Cli {
    /// Worker threads for experiment trials (defaults to the number of CPUs).
    #[arg(long, global = true, env = "BLOCKMC_THREADS")]
    pub threads: Option<usize>,

    /// Skip SVG plot files.
    #[arg(long, global = true)]
    pub no_plots: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Worst-case phase-transition curve β_wc(η).
    PtCurve(PtCurveArgs),
    /// Closed-form worst-case scaled RMSE ξ(β, η, σ_ε).
    RmseTheory(RmseTheoryArgs),
    /// Run an experiment from a TOML config or replay a manifest.json.
    Run(RunArgs),
    /// Singular-value spectrum of a matrix stored as headerless CSV.
    Inspect(InspectArgs),
    /// Tabulate the limiting spectral law of the projector product.
    SpectrumTheory(SpectrumTheoryArgs),
}

#[derive(Debug, Args)]
pub struct PtCurveArgs {
    #[arg(long, default_value_t = 0.0)]
    pub eta_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta_max: f64,
    #[arg(long, default_value_t = 101)]
    pub steps: usize,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RmseTheoryArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_eps: f64,
    /// Also write the JSON record to this file.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub matrix_csv: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpectrumTheoryArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub eta: f64,
    #[arg(long, default_value_t = 400)]
    pub grid_points: usize,
    #[arg(short, long)]
    pub out: PathBuf,
}

pub fn execute(cli: Cli) -> Result<()> {
    let plots = !cli.no_plots;
    match cli.command {
        Command::PtCurve(a) => cmd_pt_curve(&a, plots),
        Command::RmseTheory(a) => cmd_rmse_theory(&a),
        Command::Run(a) => {
            let threads = cli.threads;
            if threads == Some(0) {
                return Err(Error::InvalidArgument("--threads must be at least 1".into()));
            }
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(t) = threads {
                builder = builder.num_threads(t);
            }
            let pool = builder
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(|| cmd_run(&a, plots))
        }
        Command::Inspect(a) => cmd_inspect(&a, plots),
        Command::SpectrumTheory(a) => cmd_spectrum_theory(&a, plots),
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_svg(dir: &Path, name: &str, chart: &Chart, outputs: &mut Vec<String>) -> Result<()> {
    std::fs::write(dir.join(name), chart.to_svg())?;
    outputs.push(name.into());
    Ok(())
}

fn finish(dir: &Path, command: &str, config: serde_json::Value, seed: Option<u64>, outputs: Vec<String>) -> Result<()> {
    let manifest = RunManifest::new(command, config, seed, outputs);
    output::write_manifest(dir, &manifest)?;
    for f in &manifest.outputs {
        println!("wrote {}", dir.join(f).display());
    }
    Ok(())
}

/// η grid for the phase-transition curve; a single step yields `eta_min`.
pub fn pt_grid(eta_min: f64, eta_max: f64, steps: usize) -> Result<Vec<f64>> {
    let mut errs = Vec::new();
    if !(0.0..=1.0).contains(&eta_min) || !(0.0..=1.0).contains(&eta_max) {
        errs.push(format!("eta range [{eta_min}, {eta_max}] must lie within [0, 1]"));
    }
    if steps == 0 {
        errs.push("steps must be at least 1".into());
    } else if steps == 1 && eta_min > eta_max {
        errs.push(format!("empty eta range: eta_min={eta_min} > eta_max={eta_max}"));
    } else if steps > 1 && eta_min >= eta_max {
        errs.push(format!("empty eta range: need eta_min < eta_max, got [{eta_min}, {eta_max}]"));
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    if steps == 1 {
        return Ok(vec![eta_min]);
    }
    Ok((0..steps)
        .map(|i| {
            if i + 1 == steps {
                eta_max
            } else {
                eta_min + (eta_max - eta_min) * i as f64 / (steps - 1) as f64
            }
        })
        .collect())
}

pub fn cmd_pt_curve(a: &PtCurveArgs, plots: bool) -> Result<()> {
    let grid = pt_grid(a.eta_min, a.eta_max, a.steps)?;
    prepare_dir(&a.out)?;
    let rows: Vec<Vec<f64>> = grid.iter().map(|&e| vec![e, equivalence::pt_boundary(e)]).collect();
    output::write_csv_rows(&a.out.join("pt_curve.csv"), &[], &["eta", "beta_wc"], &rows)?;
    let mut outputs = vec!["pt_curve.csv".to_string()];
    if plots {
        let chart = Chart::new("Worst-case phase transition", "eta", "beta_wc")
            .with(Series::line("beta_wc(eta)", rows.iter().map(|r| (r[0], r[1])).collect()));
        write_svg(&a.out, "pt_curve.svg", &chart, &mut outputs)?;
    }
    let cfg = json!({"eta_min": a.eta_min, "eta_max": a.eta_max, "steps": a.steps});
    finish(&a.out, "pt-curve", cfg, None, outputs)
}

#[derive(Debug, Serialize)]
struct TheoryRecord {
    beta: f64,
    eta: f64,
    sigma_eps: f64,
    xi: f64,
    beta_wc: f64,
}

pub fn cmd_rmse_theory(a: &RmseTheoryArgs) -> Result<()> {
    let xi = rmse::theoretical_xi(a.beta, a.eta, a.sigma_eps)?;
    let record = TheoryRecord {
        beta: a.beta,
        eta: a.eta,
        sigma_eps: a.sigma_eps,
        xi,
        beta_wc: equivalence::pt_boundary(a.eta),
    };
    println!("xi = {xi:.3}");
    println!("{}", serde_json::to_string(&record)?);
    if let Some(path) = &a.out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            prepare_dir(parent)?;
        }
        output::write_json(path, &record)?;
    }
    Ok(())
}

fn sweep_chart(spec: &RunSpec, result: &SweepResult) -> Chart {
    match spec {
        RunSpec::MagnitudeSweep { .. } => {
            let pts = result.cells.iter().map(|c| (c.sigma_ratio, c.mean_scaled_rmse)).collect();
            let se = result.cells.iter().map(|c| 2.0 * c.std_error).collect();
            let mut chart = Chart::new("Scaled RMSE vs magnitude ratio", "sigma_mag / sigma_eps", "scaled RMSE")
                .with(Series::markers("mean +- 2 SE", pts, Some(se)));
            if let Some(xi) = result.cells.first().and_then(|c| c.theory_xi) {
                let lo = result.cells.iter().map(|c| c.sigma_ratio).fold(f64::INFINITY, f64::min);
                let hi = result.cells.iter().map(|c| c.sigma_ratio).fold(f64::NEG_INFINITY, f64::max);
                chart = chart.with(Series::line("theory (infinite ratio)", vec![(lo, xi), (hi, xi)]));
            }
            chart
        }
        RunSpec::PtSweep { eta_grid, .. } => {
            let mut chart = Chart::new("Exact-recovery rate", "beta", "success rate");
            for (i, &eta) in eta_grid.iter().enumerate() {
                let pts = result
                    .cells
                    .iter()
                    .skip(i)
                    .step_by(eta_grid.len())
                    .map(|c| (c.beta, c.success_rate.unwrap_or(f64::NAN)))
                    .collect();
                chart = chart.with(Series::line(&format!("eta = {eta}"), pts));
            }
            chart
        }
        _ => {
            let pts = result.cells.iter().map(|c| (c.beta, c.mean_scaled_rmse)).collect();
            let se = result.cells.iter().map(|c| 2.0 * c.std_error).collect();
            let theory: Vec<(f64, f64)> = result
                .cells
                .iter()
                .filter_map(|c| c.theory_xi.map(|x| (c.beta, x)))
                .collect();
            let mut chart = Chart::new("Scaled RMSE vs beta", "beta", "scaled RMSE").with(Series::markers("mean +- 2 SE", pts, Some(se)));
            if !theory.is_empty() {
                chart = chart.with(Series::line("theory xi", theory));
            }
            chart
        }
    }
}

fn spectrum_chart(check: &SpectrumCheck) -> Chart {
    let law = &check.law;
    let width = check.histogram.first().map(|b| b.hi - b.lo).unwrap_or(0.0);
    let bars = check
        .histogram
        .iter()
        .map(|b| (0.5 * (b.lo + b.hi), if width > 0.0 { b.empirical_mass / width } else { 0.0 }))
        .collect();
    let curve = (1..400)
        .map(|i| {
            let x = law.x_l + (law.x_u - law.x_l) * i as f64 / 400.0;
            (x, law.density(x))
        })
        .collect();
    Chart::new(
        &format!("Bulk spectrum, beta={:.3}, eta={:.3}, n={}", law.beta, law.eta, check.n),
        "x",
        "density",
    )
    .with(Series::bars("empirical", bars, width))
    .with(Series::line("limiting law", curve))
}

pub fn cmd_run(a: &RunArgs, plots: bool) -> Result<()> {
    let mut spec = config::load_run_spec(&a.config)?;
    if let Some(seed) = a.seed {
        spec.set_seed(seed);
    }
    if let Some(trials) = a.trials {
        spec.set_trials(trials)?;
    }
    spec.validate()?;
    log::info!("running {} with master seed {}", spec.kind(), spec.master_seed());
    let outcome = config::run(&spec)?;
    prepare_dir(&a.out)?;
    let mut outputs = match &outcome {
        RunOutcome::Sweep(r) => output::write_sweep(&a.out, r)?,
        RunOutcome::Spectrum(c) => output::write_spectrum(&a.out, c)?,
    };
    if plots {
        match &outcome {
            RunOutcome::Sweep(r) => write_svg(&a.out, "summary.svg", &sweep_chart(&spec, r), &mut outputs)?,
            RunOutcome::Spectrum(c) => write_svg(&a.out, "spectrum.svg", &spectrum_chart(c), &mut outputs)?,
        }
    }
    let seed = spec.master_seed();
    finish(&a.out, "run", serde_json::to_value(&spec)?, Some(seed), outputs)
}

/// Parses a headerless, comma-separated numeric matrix.
pub fn read_matrix_csv(path: &Path) -> Result<faer::Mat<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Input(format!("row {}, column {}: '{cell}' is not a number", i + 1, j + 1)))?;
            if !v.is_finite() {
                return Err(Error::Input(format!("row {}, column {}: non-finite value", i + 1, j + 1)));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Input(format!(
                    "ragged rows: row {} has {} values, row 1 has {}",
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input(format!("{} contains no data", path.display())));
    }
    let (m, n) = (rows.len(), rows[0].len());
    Ok(faer::Mat::from_fn(m, n, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Serialize)]
pub struct InspectSummary {
    pub rows: usize,
    pub cols: usize,
    pub largest: f64,
    pub second: Option<f64>,
    pub count_above_10pct: usize,
    pub dominance_ratio: Option<f64>,
}

pub fn spectrum_summary(m: usize, n: usize, sv: &[f64]) -> InspectSummary {
    let largest = sv.first().copied().unwrap_or(0.0);
    let second = sv.get(1).copied();
    InspectSummary {
        rows: m,
        cols: n,
        largest,
        second,
        count_above_10pct: sv.iter().filter(|&&s| s > 0.1 * largest).count(),
        dominance_ratio: second.filter(|&s| s > 0.0).map(|s| largest / s),
    }
}

pub fn cmd_inspect(a: &InspectArgs, plots: bool) -> Result<()> {
    let x = read_matrix_csv(&a.matrix_csv)?;
    let sv = linalg::singular_values(x.as_ref())?;
    let summary = spectrum_summary(x.nrows(), x.ncols(), &sv);
    prepare_dir(&a.out)?;
    let rows: Vec<Vec<f64>> = sv.iter().enumerate().map(|(i, &s)| vec![(i + 1) as f64, s]).collect();
    output::write_csv_rows(&a.out.join("singular_values.csv"), &[], &["index", "singular_value"], &rows)?;
    output::write_json(&a.out.join("summary.json"), &summary)?;
    let mut outputs = vec!["singular_values.csv".to_string(), "summary.json".to_string()];
    if plots {
        let mut chart = Chart::new("Singular values", "index", "singular value")
            .with(Series::markers("sigma_i", rows.iter().map(|r| (r[0], r[1])).collect(), None));
        chart.log_y = true;
        write_svg(&a.out, "spectrum.svg", &chart, &mut outputs)?;
    }
    println!(
        "{}x{} matrix: largest singular value {:.6}, {} value(s) above 10% of it",
        summary.rows, summary.cols, summary.largest, summary.count_above_10pct
    );
    if let Some(r) = summary.dominance_ratio {
        println!("largest / second = {r:.3}");
    }
    let cfg = json!({"matrix_csv": a.matrix_csv.display().to_string()});
    finish(&a.out, "inspect", cfg, None, outputs)
}

/// Midpoint grid over the open bulk support with density values.
pub fn density_table(law: &SpectralLaw, points: usize) -> Vec<(f64, f64)> {
    if !law.has_bulk() || points == 0 {
        return Vec::new();
    }
    let h = (law.x_u - law.x_l) / points as f64;
    (0..points)
        .map(|i| {
            let x = law.x_l + h * (i as f64 + 0.5);
            (x, law.density(x))
        })
        .collect()
}

pub fn cmd_spectrum_theory(a: &SpectrumTheoryArgs, plots: bool) -> Result<()> {
    if a.grid_points < 2 {
        return Err(Error::InvalidArgument(format!("grid_points must be at least 2, got {}", a.grid_points)));
    }
    let law = SpectralLaw::new(a.beta, a.eta)?;
    let table = density_table(&law, a.grid_points);
    prepare_dir(&a.out)?;
    let comments = vec![
        format!("beta={}", law.beta),
        format!("eta={}", law.eta),
        format!("f0={}", law.f0),
        format!("f1={}", law.f1),
        format!("x_l={}", law.x_l),
        format!("x_u={}", law.x_u),
    ];
    let rows: Vec<Vec<f64>> = table.iter().map(|&(x, d)| vec![x, d]).collect();
    output::write_csv_rows(&a.out.join("density.csv"), &comments, &["x", "density"], &rows)?;
    let mut outputs = vec!["density.csv".to_string()];
    if plots {
        let chart = Chart::new(
            &format!("Limiting bulk density, beta={}, eta={} (f0={:.3}, f1={:.3})", law.beta, law.eta, law.f0, law.f1),
            "x",
            "density",
        )
        .with(Series::line("bulk", table));
        write_svg(&a.out, "density.svg", &chart, &mut outputs)?;
    }
    println!("f0 = {}, f1 = {}, support = [{}, {}]", law.f0, law.f1, law.x_l, law.x_u);
    let cfg = json!({"beta": a.beta, "eta": a.eta, "grid_points": a.grid_points});
    finish(&a.out, "spectrum-theory", cfg, None, outputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pt_grid_examples() {
        assert_eq!(pt_grid(0.0, 1.0, 3).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(pt_grid(0.9, 0.9, 1).unwrap(), vec![0.9]);
        assert!(pt_grid(0.5, 0.5, 3).is_err());
        assert!(pt_grid(0.7, 0.2, 3).is_err());
        assert!(pt_grid(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn density_table_integrates_to_bulk_mass() {
        let law = SpectralLaw::new(0.1, 0.8).unwrap();
        let t = density_table(&law, 400);
        let trap: f64 = t.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
        assert!((trap - (1.0 - law.f0 - law.f1)).abs() < 1e-3, "{trap}");
    }

    #[test]
    fn summary_counts_dominant_values() {
        let s = spectrum_summary(3, 3, &[4000.0, 300.0, 10.0]);
        assert_eq!(s.count_above_10pct, 1);
        assert!((s.dominance_ratio.unwrap() - 4000.0 / 300.0).abs() < 1e-12);
    }
}
