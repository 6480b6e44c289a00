//! `nmq` — command-line driver for the non-Markovianity toolkit.
//!
//! Subcommands: `evolve`, `measure`, `witness`, `classical`, `repro`.
//! Exit codes: 0 ok, 1 config error, 2 singular map under the exact inverse
//! strategy, 3 internal numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nmq_core::channels::InverseStrategy;
use nmq_core::classical::{is_divisible, TransitionFamily};
use nmq_core::dynamics::{
    dephasing_family, propagate, GkslGenerator, ModelSpec, PropagatorFamily, RateFunction,
};
use nmq_core::measures::{
    blp_measure, decay_rate_measure, g_function, helstrom_measure, k_divisibility_degree,
    rhp_degree, rhp_measure, GRoute, GSource, MeasureReport, OptimizerOptions,
};
use nmq_core::states::DensityMatrix;
use nmq_core::witnesses::{
    bloch_volume_witness, capacity_witness, discord_witness, entanglement_witness,
    fidelity_witness, mutual_info_witness, qfi_flow_witness, relative_entropy_witness,
    trace_distance_witness, WitnessSeries,
};

#[derive(Parser)]
#[command(name = "nmq", version, about = "Non-Markovianity measures and witnesses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Inverse {
    Exact,
    Regularized,
    Pseudo,
}

impl From<Inverse> for InverseStrategy {
    fn from(v: Inverse) -> Self {
        match v {
            Inverse::Exact => InverseStrategy::Exact,
            Inverse::Regularized => InverseStrategy::Regularized,
            Inverse::Pseudo => InverseStrategy::Pseudo,
        }
    }
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
    /// Overrides the inverse strategy from the config.
    #[arg(long, value_enum)]
    inverse: Option<Inverse>,
    /// Overrides the optimizer budget from the config.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReproCase {
    /// Pure dephasing with γ(t) = sin t.
    Sin,
    /// Pure dephasing with γ(t) = tan t.
    Tan,
    /// Qubit with constant damping plus sinusoidal dephasing.
    Damped,
    /// Pure dephasing with a constant rate (Markovian null).
    Constant,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the model and dump the propagator family with diagnostics.
    Evolve(CommonArgs),
    /// Run the selected non-Markovianity measures.
    Measure(CommonArgs),
    /// Run the selected monotonicity witnesses.
    Witness(CommonArgs),
    /// Check divisibility of a classical transition family from CSV.
    Classical(CommonArgs),
    /// One-shot reproduction of the anchored reference numbers.
    Repro {
        case: ReproCase,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn default_grid() -> usize {
    129
}
fn default_budget() -> usize {
    2000
}
fn default_inverse() -> String {
    "exact".into()
}
fn default_k() -> usize {
    1
}
fn default_tol() -> f64 {
    1e-10
}

/// Single JSON document driving evolve/measure/witness/classical runs.
#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    #[serde(default)]
    model: Option<ModelSpec>,
    #[serde(default)]
    model_path: Option<PathBuf>,
    #[serde(default)]
    interval: Option<[f64; 2]>,
    #[serde(default = "default_grid")]
    grid: usize,
    #[serde(default)]
    measures: Vec<String>,
    #[serde(default)]
    witnesses: Vec<String>,
    #[serde(default = "default_budget")]
    budget: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_inverse")]
    inverse: String,
    /// Ancilla dimension for the k-divisibility degree.
    #[serde(default = "default_k")]
    k: usize,
    /// Transition-family CSV for the `classical` subcommand.
    #[serde(default)]
    csv_path: Option<PathBuf>,
    #[serde(default = "default_tol")]
    positivity_tol: f64,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Singular(String),
    Numeric(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Singular(m) => write!(f, "singular map: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Singular(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

/// Errors bubbling out of the numeric layers; singular-map conditions get
/// their dedicated exit code.
fn numeric_err<E: std::fmt::Display>(e: E) -> CliError {
    let msg = e.to_string();
    if msg.contains("singular") || msg.contains("pole") {
        CliError::Singular(msg)
    } else {
        CliError::Numeric(msg)
    }
}

fn main() -> ExitCode {
    if let Ok(n) = std::env::var("NMQ_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evolve(args) => cmd_evolve(&args),
        Command::Measure(args) => cmd_measure(&args),
        Command::Witness(args) => cmd_witness(&args),
        Command::Classical(args) => cmd_classical(&args),
        Command::Repro { case, out } => cmd_repro(case, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nmq: {e}");
            ExitCode::from(e.code())
        }
    }
}

struct Run {
    config: RunConfig,
    hash: String,
    out: PathBuf,
    format: Format,
    strategy: InverseStrategy,
}

fn load_run(args: &CommonArgs) -> Result<Run, CliError> {
    let raw = std::fs::read_to_string(&args.config).map_err(config_err)?;
    let mut config: RunConfig = serde_json::from_str(&raw).map_err(config_err)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(budget) = args.budget {
        config.budget = budget;
    }
    if let Some(inv) = args.inverse {
        config.inverse = match inv {
            Inverse::Exact => "exact".into(),
            Inverse::Regularized => "regularized".into(),
            Inverse::Pseudo => "pseudo".into(),
        };
    }
    if let Some([a, b]) = config.interval {
        if a >= b {
            return Err(CliError::Config(format!("interval [{a}, {b}] must be increasing")));
        }
    }
    if config.grid < 16 {
        return Err(CliError::Config(format!("grid size {} < 16", config.grid)));
    }
    let strategy = match config.inverse.as_str() {
        "exact" => InverseStrategy::Exact,
        "regularized" => InverseStrategy::Regularized,
        "pseudo" => InverseStrategy::Pseudo,
        other => return Err(CliError::Config(format!("unknown inverse strategy {other:?}"))),
    };
    if let Some(path) = &config.model_path {
        let raw = std::fs::read_to_string(path).map_err(config_err)?;
        config.model = Some(serde_json::from_str(&raw).map_err(config_err)?);
        config.model_path = None;
    }
    // the hash covers the effective config, with overrides applied
    let canonical = serde_json::to_vec(&config).map_err(config_err)?;
    let hash = hex(&Sha256::digest(&canonical));
    std::fs::create_dir_all(&args.out).map_err(config_err)?;
    Ok(Run { config, hash, out: args.out.clone(), format: args.format, strategy })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// 17 significant digits, locale-independent.
fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

impl Run {
    fn model(&self) -> Result<GkslGenerator<f64>, CliError> {
        let spec = self
            .config
            .model
            .as_ref()
            .ok_or_else(|| CliError::Config("config needs `model` or `model_path`".into()))?;
        spec.build::<f64>().map_err(config_err)
    }

    fn interval(&self) -> Result<(f64, f64), CliError> {
        let [a, b] = self
            .config
            .interval
            .ok_or_else(|| CliError::Config("config needs `interval`".into()))?;
        Ok((a, b))
    }

    fn grid(&self) -> Result<Vec<f64>, CliError> {
        let (a, b) = self.interval()?;
        let n = self.config.grid;
        Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
    }

    fn family(&self) -> Result<PropagatorFamily<f64>, CliError> {
        let gen = self.model()?;
        propagate(&gen, &self.grid()?).map_err(numeric_err)
    }

    fn opts(&self) -> OptimizerOptions {
        OptimizerOptions {
            seed: self.config.seed,
            budget: self.config.budget,
            ..Default::default()
        }
    }

    fn write_json<T: Serialize>(&self, name: &str, payload: &T) -> Result<(), CliError> {
        if self.format == Format::Csv {
            return Ok(());
        }
        let doc = serde_json::json!({ "config_hash": self.hash, "report": payload });
        let mut bytes = serde_json::to_vec_pretty(&doc).map_err(numeric_err)?;
        bytes.push(b'\n');
        std::fs::write(self.out.join(name), bytes).map_err(config_err)?;
        Ok(())
    }

    fn write_csv(&self, name: &str, header: &str, rows: &[String]) -> Result<(), CliError> {
        if self.format == Format::Json {
            return Ok(());
        }
        let mut doc = format!("# config_hash={}\n{header}\n", self.hash);
        for row in rows {
            doc.push_str(row);
            doc.push('\n');
        }
        std::fs::write(self.out.join(name), doc).map_err(config_err)?;
        Ok(())
    }
}

fn cmd_evolve(args: &CommonArgs) -> Result<(), CliError> {
    let run = load_run(args)?;
    let fam = run.family()?;
    run.write_json("family.json", &fam.to_dump())?;
    let rows = fam
        .times
        .iter()
        .zip(&fam.maps)
        .map(|(t, e)| {
            let tp = e.tp_defect();
            let cp = e.choi().map_err(numeric_err)?.cp_defect().map_err(numeric_err)?;
            Ok(format!("{},{},{}", num(*t), num(tp), num(cp)))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    run.write_csv("diagnostics.csv", "t,tp_defect,cp_defect", &rows)?;
    println!("evolved {} maps (dim {})", fam.len(), fam.dim);
    Ok(())
}

fn measure_csv(run: &Run, name: &str, report: &MeasureReport) -> Result<(), CliError> {
    let header = format!("t,{}", report.trace_labels.join(","));
    let rows = report
        .trace
        .iter()
        .map(|s| {
            let mut row = num(s.t);
            for v in &s.values {
                row.push(',');
                row.push_str(&num(*v));
            }
            row
        })
        .collect::<Vec<_>>();
    run.write_csv(&format!("measure_{name}_trace.csv"), &header, &rows)
}

fn cmd_measure(args: &CommonArgs) -> Result<(), CliError> {
    let run = load_run(args)?;
    let gen = run.model()?;
    let (a, b) = run.interval()?;
    let selected = if run.config.measures.is_empty() {
        vec!["rhp".to_string(), "rhp_degree".into(), "decay_rate".into()]
    } else {
        run.config.measures.clone()
    };
    let mut any_singular = false;
    for name in &selected {
        let source = GSource::Generator(&gen);
        let report = match name.as_str() {
            "rhp" => rhp_measure(&source, GRoute::Map, a, b).map_err(numeric_err)?,
            "rhp_degree" => rhp_degree(&source, GRoute::Map, a, b).map_err(numeric_err)?,
            "decay_rate" => {
                let full = decay_rate_measure(&gen, a, b).map_err(numeric_err)?;
                run.write_json("measure_decay_rate.json", &full)?;
                measure_csv(&run, "decay_rate", &full.report)?;
                any_singular |= full.report.singular;
                println!(
                    "decay_rate: N = {:.6e}, index = {}",
                    full.report.value, full.index
                );
                continue;
            }
            "blp" => blp_measure(&run.family()?, &run.opts()).map_err(numeric_err)?,
            "helstrom" => {
                helstrom_measure(&run.family()?, None, &run.opts()).map_err(numeric_err)?
            }
            "kdiv" => k_divisibility_degree(&run.family()?, run.config.k, &run.opts())
                .map_err(numeric_err)?,
            other => return Err(CliError::Config(format!("unknown measure {other:?}"))),
        };
        any_singular |= report.singular;
        println!("{}: value = {:.6e}", report.kind, report.value);
        run.write_json(&format!("measure_{name}.json"), &report)?;
        measure_csv(&run, name, &report)?;
    }
    if any_singular && run.strategy == InverseStrategy::Exact {
        return Err(CliError::Singular(
            "singular intermediate map encountered under the exact strategy".into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct WitnessSummary {
    kind: String,
    violation_count: usize,
    max_violation: f64,
    flags: Vec<String>,
}

fn witness_outputs(run: &Run, series: &WitnessSeries) -> Result<WitnessSummary, CliError> {
    let mut rows = Vec::with_capacity(series.times.len());
    for (k, &t) in series.times.iter().enumerate() {
        let violated = series.violations.iter().any(|&(vt, _)| vt == t);
        rows.push(format!("{},{},{}", num(t), num(series.values[k]), u8::from(violated)));
    }
    run.write_csv(&format!("witness_{}.csv", series.kind), "t,value,violation", &rows)?;
    run.write_json(&format!("witness_{}.json", series.kind), series)?;
    Ok(WitnessSummary {
        kind: series.kind.clone(),
        violation_count: series.violations.len(),
        max_violation: series
            .violations
            .iter()
            .map(|&(_, m)| m)
            .fold(0.0, f64::max),
        flags: series.config.flags.clone(),
    })
}

fn default_pair(d: usize) -> (DensityMatrix<f64>, DensityMatrix<f64>) {
    if d == 2 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = |re: f64| num_complex::Complex::new(re, 0.0);
        (
            DensityMatrix::pure(&nalgebra::dvector![c(h), c(h)]),
            DensityMatrix::pure(&nalgebra::dvector![c(h), c(-h)]),
        )
    } else {
        let mut e0 = nmq_core::linalg::CVector::<f64>::zeros(d);
        let mut e1 = e0.clone();
        e0[0] = num_complex::Complex::new(1.0, 0.0);
        e1[1] = num_complex::Complex::new(1.0, 0.0);
        (DensityMatrix::pure(&e0), DensityMatrix::pure(&e1))
    }
}

fn cmd_witness(args: &CommonArgs) -> Result<(), CliError> {
    let run = load_run(args)?;
    let fam = run.family()?;
    let (rho1, rho2) = default_pair(fam.dim);
    let selected = if run.config.witnesses.is_empty() {
        vec![
            "trace_distance".to_string(),
            "fidelity".into(),
            "bloch_volume".into(),
            "entanglement".into(),
            "mutual_info".into(),
        ]
    } else {
        run.config.witnesses.clone()
    };
    let mut summaries = Vec::new();
    for name in &selected {
        let series = match name.as_str() {
            "trace_distance" => trace_distance_witness(&fam, &rho1, &rho2),
            "fidelity" => fidelity_witness(&fam, &rho1, &rho2),
            "relative_entropy" => relative_entropy_witness(&fam, &rho1, &rho2),
            "qfi" => {
                if fam.dim != 2 {
                    return Err(CliError::Config("qfi witness needs a qubit model".into()));
                }
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let family = |theta: f64| {
                    Ok(DensityMatrix::pure(&nalgebra::dvector![
                        num_complex::Complex::new(h, 0.0),
                        num_complex::Complex::new(h * theta.cos(), h * theta.sin())
                    ]))
                };
                qfi_flow_witness(&fam, &family, 0.0).map(|(s, _flow)| s)
            }
            "capacity" => {
                let (cea, q) =
                    capacity_witness(&fam, run.config.seed, run.config.budget).map_err(numeric_err)?;
                summaries.push(witness_outputs(&run, &q)?);
                Ok(cea)
            }
            "bloch_volume" => bloch_volume_witness(&fam),
            "entanglement" => entanglement_witness(&fam).map(|(s, _)| s),
            "mutual_info" => mutual_info_witness(&fam),
            "discord" => discord_witness(&fam),
            other => return Err(CliError::Config(format!("unknown witness {other:?}"))),
        }
        .map_err(numeric_err)?;
        summaries.push(witness_outputs(&run, &series)?);
        println!("{}: {} violations", series.kind, series.violations.len());
    }
    run.write_json("witness_summary.json", &summaries)?;
    Ok(())
}

fn read_transition_csv(path: &Path) -> Result<TransitionFamily<f64>, CliError> {
    let raw = std::fs::read_to_string(path).map_err(config_err)?;
    let mut times = Vec::new();
    let mut matrices = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        let n2 = fields.len() - 1;
        let n = (n2 as f64).sqrt() as usize;
        if n * n != n2 {
            return Err(CliError::Config(format!(
                "{}:{}: expected t plus a square matrix, got {n2} entries",
                path.display(),
                lineno + 1
            )));
        }
        times.push(fields[0]);
        matrices.push(nalgebra::DMatrix::from_row_slice(n, n, &fields[1..]));
    }
    TransitionFamily::new(times, matrices).map_err(config_err)
}

fn cmd_classical(args: &CommonArgs) -> Result<(), CliError> {
    let run = load_run(args)?;
    let path = run
        .config
        .csv_path
        .clone()
        .ok_or_else(|| CliError::Config("classical needs `csv_path`".into()))?;
    let fam = read_transition_csv(&path)?;
    let report = is_divisible(&fam, run.config.positivity_tol).map_err(numeric_err)?;
    run.write_json("classical_divisibility.json", &report)?;
    println!(
        "divisible = {}, violations = {}",
        report.divisible,
        report.violations.len()
    );
    Ok(())
}

struct ReproCheck {
    label: String,
    pass: bool,
    detail: String,
}

fn repro_degree(rate: &RateFunction<f64>, expect: f64) -> Result<ReproCheck, CliError> {
    let source = GSource::Dephasing(rate);
    let report =
        rhp_degree(&source, GRoute::Map, 0.0, 2.0 * std::f64::consts::PI).map_err(numeric_err)?;
    Ok(ReproCheck {
        label: "degree".into(),
        pass: (report.value - expect).abs() <= 0.01,
        detail: format!("{:.6} vs {expect} +- 0.01", report.value),
    })
}

fn cmd_repro(case: ReproCase, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(config_err)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut checks = Vec::new();
    match case {
        ReproCase::Sin => checks.push(repro_degree(&RateFunction::Sine, 0.758)?),
        ReproCase::Tan => checks.push(repro_degree(&RateFunction::tangent(), 0.803)?),
        ReproCase::Damped => {
            let gen = GkslGenerator::new(
                nmq_core::CMatrix64::zeros(2, 2),
                vec![
                    (RateFunction::Constant(0.5), nmq_core::operators::sigma_minus::<f64>()),
                    (RateFunction::Sine, nmq_core::operators::pauli_z::<f64>()),
                ],
            )
            .map_err(numeric_err)?;
            let source = GSource::Generator(&gen);
            let mut max_gap = 0.0f64;
            for k in 0..=64 {
                let t = two_pi * k as f64 / 64.0;
                let gm = g_function(&source, t, GRoute::Map).map_err(numeric_err)?.g;
                let gg = g_function(&source, t, GRoute::Generator).map_err(numeric_err)?.g;
                max_gap = max_gap.max((gm - gg).abs());
            }
            checks.push(ReproCheck {
                label: "route agreement".into(),
                pass: max_gap <= 1e-4,
                detail: format!("max |g_map - g_gen| = {max_gap:.3e} <= 1e-4"),
            });
            let rhp = rhp_measure(&source, GRoute::Map, 0.0, two_pi).map_err(numeric_err)?;
            let decay = decay_rate_measure(&gen, 0.0, two_pi).map_err(numeric_err)?;
            let rel = (decay.rhp_cross_check - rhp.value).abs() / rhp.value.max(1e-300);
            checks.push(ReproCheck {
                label: "proportionality".into(),
                pass: rel <= 1e-6,
                detail: format!("(2/d) N_gamma vs N_RHP relative gap {rel:.3e} <= 1e-6"),
            });
        }
        ReproCase::Constant => {
            let rate = RateFunction::Constant(1.0);
            let source = GSource::Dephasing(&rate);
            let rhp = rhp_measure(&source, GRoute::Map, 0.0, two_pi).map_err(numeric_err)?;
            checks.push(ReproCheck {
                label: "rhp null".into(),
                pass: rhp.value <= 1e-6,
                detail: format!("N_RHP = {:.3e} <= 1e-6", rhp.value),
            });
            let grid: Vec<f64> = (0..129).map(|k| two_pi * k as f64 / 128.0).collect();
            let fam = dephasing_family(&rate, &grid).map_err(numeric_err)?;
            let (rho1, rho2) = default_pair(2);
            let monotone = [
                trace_distance_witness(&fam, &rho1, &rho2).map_err(numeric_err)?,
                fidelity_witness(&fam, &rho1, &rho2).map_err(numeric_err)?,
                bloch_volume_witness(&fam).map_err(numeric_err)?,
                mutual_info_witness(&fam).map_err(numeric_err)?,
            ];
            for w in monotone {
                checks.push(ReproCheck {
                    label: format!("{} monotone", w.kind),
                    pass: w.is_monotone(),
                    detail: format!("{} violations", w.violations.len()),
                });
            }
        }
    }
    let mut all_pass = true;
    let mut lines = Vec::new();
    for c in &checks {
        let verdict = if c.pass { "pass" } else { "FAIL" };
        let line = format!("{verdict}: {} ({})", c.label, c.detail);
        println!("{line}");
        lines.push(line);
        all_pass &= c.pass;
    }
    std::fs::write(out.join("repro.txt"), lines.join("\n") + "\n").map_err(config_err)?;
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Numeric("reproduction check failed".into()))
    }
}
