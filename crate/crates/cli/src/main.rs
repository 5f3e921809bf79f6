//! `voltvar`: generate cases, solve them centrally or with the distributed
//! algorithms, and compare the resulting traces.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use voltvar_core::admm::InitScheme;
use voltvar_core::cases::{case_meta, generate_case_with, CaseId, PvPlacement};
use voltvar_core::distflow::{self, normalized_min_max_voltage, solve_distflow};
use voltvar_core::exec::ExecMode;
use voltvar_core::io::CaseFile;
use voltvar_core::lindistflow::{check_feasibility, control_loss, LinFlowState};
use voltvar_core::metrics::{compare_traces, rho_sweep};
use voltvar_core::oracle::{solve_centralized, DEFAULT_TOL};
use voltvar_core::simulator::{run, Algorithm, RunConfig, RunTrace, TraceRow, DEFAULT_MAX_ITERS, DEFAULT_STOP_TOL};
use voltvar_core::{ControlVector, Feeder};

#[derive(Parser)]
#[command(name = "voltvar", version, about = "Reactive-power control on radial feeders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one of the seven benchmark feeders as a case file.
    GenCase {
        #[arg(long = "case")]
        case_id: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "even")]
        pv_placement: PvPlacement,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the centralized problem.
    Oracle {
        #[arg(long = "case")]
        case_file: PathBuf,
        /// Drop the voltage limits.
        #[arg(long)]
        no_voltage: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one control algorithm and write its trace and result.
    Run(RunArgs),
    /// Check a control against the limits and the exact power flow.
    Validate {
        #[arg(long = "case")]
        case_file: PathBuf,
        /// Any JSON file with a `q_g_var` array (run result or oracle output).
        #[arg(long)]
        control: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Allowed violation in kVAr and in units of 1e5 V^2.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Align deviation traces from several runs on iteration number.
    Compare {
        #[arg(long, value_delimiter = ',', required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        #[arg(long, default_value_t = 1e-2)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat an ADMM run with `rho = factor / V0^2` for each factor.
    SweepRho {
        #[arg(long = "case")]
        case_file: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1,10,100")]
        factors: Vec<f64>,
        #[arg(long, default_value = "admm")]
        algo: Algorithm,
        #[arg(long, default_value = "local")]
        init: InitScheme,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-3)]
        threshold: f64,
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long = "case")]
    case_file: PathBuf,
    #[arg(long)]
    algo: Algorithm,
    #[arg(long, default_value = "zero")]
    init: InitScheme,
    /// Flow-only rounds before the switch when `--init hybrid`.
    #[arg(long)]
    warmup: Option<usize>,
    /// Flow penalty in internal units (default 1/V0^2, V0 in kV).
    #[arg(long)]
    rho: Option<f64>,
    /// Voltage penalty in internal units.
    #[arg(long)]
    rho_u: Option<f64>,
    /// Dual-ascent step in internal units (default 0.05/V0^2).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_STOP_TOL)]
    tol: f64,
    #[arg(long)]
    trace_every: Option<usize>,
    #[arg(long)]
    oracle: Option<PathBuf>,
    #[arg(long, default_value = "parallel")]
    exec: ExecArg,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ExecArg {
    Sequential,
    Parallel,
}

impl From<ExecArg> for ExecMode {
    fn from(e: ExecArg) -> Self {
        match e {
            ExecArg::Sequential => ExecMode::Sequential,
            ExecArg::Parallel => ExecMode::Parallel,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct OracleOutput {
    q_g_var: Vec<f64>,
    objective_w: f64,
    kkt_residual: f64,
}

#[derive(Serialize, Deserialize)]
struct RunResult {
    q_g_var: Vec<f64>,
    converged: bool,
    iterations: usize,
    loss_w: f64,
    messages: usize,
}

#[derive(Deserialize)]
struct ControlFile {
    q_g_var: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TraceRecord {
    iter: usize,
    d_k: Option<f64>,
    consensus_residual: f64,
    loss_w: f64,
    cap_viol: f64,
    volt_viol: f64,
}

#[derive(Serialize)]
struct ValidationReport {
    feasible: bool,
    capacity_violation_kvar: f64,
    voltage_violation: f64,
    loss_lin_w: f64,
    loss_df_w: f64,
    loss_ratio_lin: f64,
    loss_ratio_df: f64,
    v_min_lin: f64,
    v_max_lin: f64,
    v_min_df: f64,
    v_max_df: f64,
    delta_v_max: f64,
    distflow_sweeps: usize,
}

#[derive(Serialize)]
struct SweepRecord {
    factor: f64,
    rho: f64,
    iterations_to_threshold: Option<usize>,
    iterations: usize,
    converged: bool,
    final_deviation: Option<f64>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::GenCase { case_id, seed, pv_placement, out } => {
            let id = CaseId::new(case_id)?;
            let feeder = generate_case_with(id, seed, pv_placement);
            let file = CaseFile::from_feeder(&feeder, Some(case_meta(id, seed, pv_placement)));
            write(&out, &file.to_json())?;
        }
        Command::Oracle { case_file, no_voltage, out } => {
            let feeder = read_case(&case_file)?;
            let sol = solve_centralized(&feeder, !no_voltage, DEFAULT_TOL)?;
            let o = OracleOutput { q_g_var: sol.control.q_g, objective_w: sol.objective, kkt_residual: sol.kkt_residual };
            write_json(&out, &o)?;
        }
        Command::Run(args) => run_command(args)?,
        Command::Validate { case_file, control, out, tol } => {
            let feeder = read_case(&case_file)?;
            let report = validate(&feeder, &read_control(&control)?, tol)?;
            write_json(&out, &report)?;
            if !report.feasible {
                eprintln!(
                    "constraint violation: capacity {:.3e} kVAr, voltage {:.3e}",
                    report.capacity_violation_kvar, report.voltage_violation
                );
                return Ok(ExitCode::from(2));
            }
        }
        Command::Compare { traces, labels, threshold, out } => {
            let labels = if labels.is_empty() {
                traces.iter().map(|p| p.file_stem().unwrap_or_default().to_string_lossy().into_owned()).collect()
            } else {
                labels
            };
            if labels.len() != traces.len() {
                bail!("{} labels for {} traces", labels.len(), traces.len());
            }
            let loaded = traces.iter().map(|p| read_trace(p)).collect::<Result<Vec<_>>>()?;
            let pairs: Vec<(&str, &RunTrace)> = labels.iter().map(String::as_str).zip(&loaded).collect();
            let cmp = compare_traces(&pairs, threshold);
            write(&out, &cmp.to_csv())?;
            for (label, k) in cmp.labels.iter().zip(&cmp.iterations_to_threshold) {
                match k {
                    Some(k) => println!("{label}: D <= {threshold:e} at iteration {k}"),
                    None => println!("{label}: D <= {threshold:e} not reached"),
                }
            }
        }
        Command::SweepRho { case_file, factors, algo, init, max_iters, threshold, oracle, out } => {
            let feeder = read_case(&case_file)?;
            let oracle = match oracle {
                Some(p) => read_control(&p)?,
                None => solve_centralized(&feeder, algo != Algorithm::AdmmNov, DEFAULT_TOL)?.control,
            };
            let mut cfg = RunConfig::new(algo).with_init(init);
            cfg.max_iters = max_iters;
            cfg.target_deviation = Some(threshold);
            let rows = rho_sweep(&feeder, &factors, &cfg, Some(&oracle), threshold, ExecMode::Parallel)?;
            let mut w = csv::Writer::from_path(&out).with_context(|| format!("writing {}", out.display()))?;
            for r in rows {
                w.serialize(SweepRecord {
                    factor: r.factor,
                    rho: r.rho,
                    iterations_to_threshold: r.iterations_to_threshold,
                    iterations: r.iterations,
                    converged: r.converged,
                    final_deviation: r.final_deviation,
                })?;
            }
            w.flush()?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_command(args: RunArgs) -> Result<()> {
    let feeder = read_case(&args.case_file)?;
    let oracle = args.oracle.as_deref().map(read_control).transpose()?;
    let mut cfg = RunConfig::new(args.algo).with_init(args.init);
    cfg.rho = args.rho;
    cfg.rho_u = args.rho_u;
    cfg.alpha = args.alpha;
    cfg.max_iters = args.max_iters;
    cfg.stop_tol = args.tol;
    cfg.trace_every = args.trace_every;
    cfg.exec = args.exec.into();
    if let Some(w) = args.warmup {
        cfg.warmup = w;
    }
    let out = run(&feeder, &cfg, oracle.as_ref())?;

    let mut w = csv::Writer::from_path(&args.trace).with_context(|| format!("writing {}", args.trace.display()))?;
    for r in &out.trace.rows {
        w.serialize(TraceRecord {
            iter: r.k,
            d_k: r.d_k,
            consensus_residual: r.consensus_residual,
            loss_w: r.loss_w,
            cap_viol: r.cap_viol,
            volt_viol: r.volt_viol,
        })?;
    }
    w.flush()?;

    let result = RunResult {
        loss_w: control_loss(&feeder, &out.control)?,
        q_g_var: out.control.q_g,
        converged: out.converged,
        iterations: out.iterations,
        messages: out.messages,
    };
    write_json(&args.out, &result)
}

fn validate(feeder: &Feeder, control: &ControlVector, tol: f64) -> Result<ValidationReport> {
    let v0 = feeder.params().v0;
    let feas = check_feasibility(feeder, control)?;
    let lin_v = LinFlowState::solve(feeder, control)?.normalized_voltages(v0);
    let df = solve_distflow(feeder, control, distflow::DEFAULT_TOL, distflow::DEFAULT_MAX_SWEEPS)?;
    let df_v = df.normalized_voltages(v0);
    let (v_min_df, v_max_df) = normalized_min_max_voltage(&df, v0);
    let none = ControlVector::zeros(feeder.len());
    let none_df = solve_distflow(feeder, &none, distflow::DEFAULT_TOL, distflow::DEFAULT_MAX_SWEEPS)?;
    let loss_lin = control_loss(feeder, control)?;
    Ok(ValidationReport {
        feasible: feas.is_feasible(tol),
        capacity_violation_kvar: feas.capacity_violation,
        voltage_violation: feas.voltage_violation,
        loss_lin_w: loss_lin,
        loss_df_w: df.loss,
        loss_ratio_lin: loss_lin / control_loss(feeder, &none)?,
        loss_ratio_df: df.loss / none_df.loss,
        v_min_lin: lin_v.iter().copied().fold(f64::INFINITY, f64::min),
        v_max_lin: lin_v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        v_min_df,
        v_max_df,
        delta_v_max: lin_v.iter().zip(&df_v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        distflow_sweeps: df.iterations,
    })
}

fn read_case(path: &Path) -> Result<Feeder> {
    Ok(CaseFile::read(path)?.to_feeder()?)
}

fn read_control(path: &Path) -> Result<ControlVector> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let c: ControlFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(ControlVector::new(c.q_g_var))
}

fn read_trace(path: &Path) -> Result<RunTrace> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let rows = r
        .deserialize::<TraceRecord>()
        .map(|rec| {
            let rec = rec.with_context(|| format!("parsing {}", path.display()))?;
            Ok(TraceRow {
                k: rec.iter,
                d_k: rec.d_k,
                consensus_residual: rec.consensus_residual,
                loss_w: rec.loss_w,
                cap_viol: rec.cap_viol,
                volt_viol: rec.volt_viol,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunTrace { rows })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, &serde_json::to_string_pretty(value)?)
}
