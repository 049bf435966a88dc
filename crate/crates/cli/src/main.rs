use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};
use netdecouple::decouple::{self, DecouplingSolution};
use netdecouple::oscillator::{sync_condition_check, DescriptorSystem, DEFAULT_GAMMA};
use netdecouple::powergrid::{GridCase, GridModel};
use netdecouple::sim::{self, Controller, Scenario, Step};
use netdecouple::{Error, NodeSet};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "netdecouple",
    version,
    about = "Minimal actuator placement and output-feedback disturbance decoupling for power grids"
)]
struct Cli {
    /// Print human-readable tables to stderr and log progress.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum actuator placement and sensor set.
    Place(Problem),
    /// Full synthesis with verification, written as solution.json.
    Synthesize(Problem),
    /// Time-domain simulation in open and/or closed loop.
    Simulate(SimulateArgs),
    /// Re-run every verification on a stored solution.
    Check(CheckArgs),
    /// Summary of a grid case.
    CaseInfo(CaseArgs),
}

#[derive(Args, Clone)]
struct CaseArgs {
    /// Grid case JSON, or a linear system {e, a, admissible}; the bundled
    /// New England 39-bus case if omitted.
    #[arg(long)]
    case: Option<PathBuf>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct Problem {
    #[command(flatten)]
    case: CaseArgs,

    /// Disturbance nodes, e.g. 22,44.
    #[arg(long, value_delimiter = ',', required = true)]
    disturb: Vec<usize>,

    /// Target nodes, e.g. 40,41.
    #[arg(long, value_delimiter = ',', required = true)]
    target: Vec<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    case: CaseArgs,

    /// Stored solution; otherwise synthesized from --disturb and --target.
    #[arg(long)]
    solution: Option<PathBuf>,

    #[arg(long, value_delimiter = ',')]
    disturb: Vec<usize>,

    #[arg(long, value_delimiter = ',')]
    target: Vec<usize>,

    /// Scenario JSON; overrides --steps, --horizon and --dt.
    #[arg(long)]
    scenario: Option<PathBuf>,

    /// Steps as node:amplitude@start, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "44:1.0@0,22:0.5@20")]
    steps: Vec<StepArg>,

    #[arg(long, default_value_t = 60.0)]
    horizon: f64,

    #[arg(long, default_value_t = sim::DEFAULT_DT)]
    dt: f64,

    /// Run without feedback.
    #[arg(long)]
    open_loop: bool,

    /// Run with the ideal static feedback.
    #[arg(long)]
    ideal: bool,

    /// Run with low-pass filtered feedback; repeatable.
    #[arg(long)]
    tau: Vec<f64>,

    /// Write every n-th sample to CSV.
    #[arg(long, default_value_t = 10)]
    stride: usize,

    /// CSV channels to plot as SVG, e.g. freq_34,u_16.
    #[arg(long, value_delimiter = ',')]
    svg: Vec<String>,

    /// Steady-state window in seconds.
    #[arg(long, default_value_t = sim::DEFAULT_WINDOW)]
    window: f64,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    case: CaseArgs,

    #[arg(long)]
    solution: PathBuf,
}

#[derive(Clone, Copy, Debug)]
struct StepArg(Step);

impl FromStr for StepArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let err = || format!("step '{s}' is not node:amplitude@start");
        let (node, rest) = s.split_once(':').ok_or_else(err)?;
        let (amplitude, start) = rest.split_once('@').ok_or_else(err)?;
        Ok(StepArg(Step {
            node: node.trim().parse().map_err(|_| err())?,
            amplitude: amplitude.trim().parse().map_err(|_| err())?,
            start: start.trim().parse().map_err(|_| err())?,
        }))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Place(p) => cmd_place(p, cli.verbose),
        Command::Synthesize(p) => cmd_synthesize(p, cli.verbose),
        Command::Simulate(a) => cmd_simulate(a, cli.verbose),
        Command::Check(a) => cmd_check(a, cli.verbose),
        Command::CaseInfo(a) => cmd_case_info(a, cli.verbose),
    }
}

/// Bare linear system `E ẋ = A x + B u`; `B` selects the admissible nodes.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearCase {
    e: Vec<f64>,
    a: Vec<Vec<f64>>,
    /// 1-based; every node if omitted.
    admissible: Option<Vec<usize>>,
}

impl LinearCase {
    fn into_system(self) -> Result<DescriptorSystem> {
        let n = self.e.len();
        if self.a.len() != n || self.a.iter().any(|row| row.len() != n) {
            bail!("linear case: a must be {n}x{n}");
        }
        let adm = self.admissible.unwrap_or_else(|| (1..=n).collect());
        if let Some(&bad) = adm.iter().find(|&&v| v == 0 || v > n) {
            bail!("linear case: admissible node {bad} out of range 1..={n}");
        }
        let adm = node_set(&adm);
        let mut b = DMatrix::zeros(n, adm.len());
        for (j, v) in adm.iter().enumerate() {
            b[(v - 1, j)] = 1.0;
        }
        let a = DMatrix::from_fn(n, n, |i, j| self.a[i][j]);
        Ok(DescriptorSystem::from_parts(
            DVector::from_vec(self.e),
            a,
            b,
        )?)
    }
}

enum Model {
    Grid(Box<GridModel>),
    Linear(DescriptorSystem),
}

impl Model {
    fn system(&self) -> &DescriptorSystem {
        match self {
            Model::Grid(m) => &m.system,
            Model::Linear(sys) => sys,
        }
    }

    fn nominal_hz(&self) -> f64 {
        match self {
            Model::Grid(m) => m.case.nominal_hz,
            Model::Linear(_) => 1.0,
        }
    }
}

fn load_model(args: &CaseArgs) -> Result<Model> {
    let Some(path) = &args.case else {
        return Ok(Model::Grid(Box::new(GridModel::new(
            GridCase::new_england_39(),
        )?)));
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("buses").is_some() {
        let case = GridCase::from_json(&text)
            .with_context(|| format!("loading case {}", path.display()))?;
        Ok(Model::Grid(Box::new(GridModel::new(case)?)))
    } else {
        let lin: LinearCase = serde_json::from_value(value)
            .with_context(|| format!("loading linear case {}", path.display()))?;
        Ok(Model::Linear(lin.into_system()?))
    }
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<String> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    let path = dir.join(name);
    fs::write(&path, &json).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(json)
}

fn node_set(nodes: &[usize]) -> NodeSet {
    nodes.iter().copied().collect()
}

#[derive(Serialize)]
struct PlacementReport {
    feasible: bool,
    #[serde(rename = "B")]
    actuators: NodeSet,
    #[serde(rename = "C")]
    sensors: NodeSet,
    #[serde(rename = "Z")]
    core: NodeSet,
    #[serde(rename = "W")]
    working: NodeSet,
    /// Disturbance-to-target path without an admissible cut node.
    #[serde(skip_serializing_if = "Option::is_none")]
    blocking_path: Option<Vec<usize>>,
}

fn cmd_place(p: &Problem, verbose: bool) -> Result<u8> {
    let model = load_model(&p.case)?;
    let g = model.system().extended_graph();
    let (d, t) = (node_set(&p.disturb), node_set(&p.target));
    match g.min_actuator_placement(&d, &t) {
        Ok(pl) => {
            let working = decouple::build_working_set(&g, &pl.core, &d, &t)?;
            let sensors = if pl.actuators.is_empty() {
                NodeSet::new()
            } else {
                decouple::sensor_set(&g, &working)?
            };
            if verbose {
                eprintln!("actuators  {}", pl.actuators);
                eprintln!("sensors    {sensors}");
                eprintln!("core       {}", pl.core);
                eprintln!("working    {working}");
            }
            let report = PlacementReport {
                feasible: true,
                actuators: pl.actuators,
                sensors,
                core: pl.core,
                working,
                blocking_path: None,
            };
            print!("{}", write_json(&p.case.out, "placement.json", &report)?);
            Ok(0)
        }
        Err(Error::Infeasible { path }) => {
            eprintln!("INFEASIBLE: path {path:?} has no admissible node to cut");
            let report = PlacementReport {
                feasible: false,
                actuators: NodeSet::new(),
                sensors: NodeSet::new(),
                core: NodeSet::new(),
                working: NodeSet::new(),
                blocking_path: Some(path),
            };
            write_json(&p.case.out, "placement.json", &report)?;
            Ok(EXIT_INFEASIBLE)
        }
        Err(e) => Err(e.into()),
    }
}

/// `Err(path)` carries the uncuttable path of an infeasible instance.
fn synthesize(
    sys: &DescriptorSystem,
    d: &NodeSet,
    t: &NodeSet,
) -> Result<std::result::Result<DecouplingSolution, Vec<usize>>> {
    match decouple::solve_ddp_system(sys, d, t) {
        Ok(sol) => Ok(Ok(sol)),
        Err(Error::Infeasible { path }) => Ok(Err(path)),
        Err(e) => Err(e.into()),
    }
}

fn print_verification(sol: &DecouplingSolution) {
    let v = &sol.verification;
    eprintln!("actuators       {}", sol.actuators);
    eprintln!("sensors         {}", sol.sensors);
    eprintln!("gain            {:?}", sol.gain);
    eprintln!("structural      {}", v.structural);
    eprintln!("zero pattern    {}", v.zero_pattern);
    eprintln!(
        "numeric         {:e} ({})",
        v.numeric.relative, v.numeric.pass
    );
    eprintln!(
        "spectrum        max Re {:e}, stable {}, near-zero modes {}",
        v.closed_loop_spectrum.max_real,
        v.closed_loop_spectrum.stable,
        v.closed_loop_spectrum.near_zero
    );
}

fn cmd_synthesize(p: &Problem, verbose: bool) -> Result<u8> {
    let model = load_model(&p.case)?;
    let (d, t) = (node_set(&p.disturb), node_set(&p.target));
    let sol = match synthesize(model.system(), &d, &t)? {
        Ok(found) => found,
        Err(path) => {
            eprintln!("INFEASIBLE: path {path:?} has no admissible node to cut");
            return Ok(EXIT_INFEASIBLE);
        }
    };
    if verbose {
        print_verification(&sol);
    }
    print!("{}", write_json(&p.case.out, "solution.json", &sol)?);
    if sol.verification.passed() {
        Ok(0)
    } else {
        eprintln!("verification failed");
        Ok(EXIT_VERIFICATION)
    }
}

#[derive(Serialize)]
struct CheckReport {
    structural: bool,
    zero_pattern: bool,
    numeric_residual: f64,
    numeric: bool,
    stable: bool,
    max_real: f64,
    near_zero_modes: usize,
    passed: bool,
}

fn cmd_check(a: &CheckArgs, verbose: bool) -> Result<u8> {
    let model = load_model(&a.case)?;
    let text = fs::read_to_string(&a.solution)
        .with_context(|| format!("reading {}", a.solution.display()))?;
    let stored = DecouplingSolution::from_json(&text).context("parsing solution")?;
    let gain = stored.gain_matrix()?;
    let (v, _) = decouple::verify(
        model.system(),
        &stored.disturbance,
        &stored.target,
        &stored.actuators,
        &stored.sensors,
        &gain,
    )?;
    let report = CheckReport {
        structural: v.structural,
        zero_pattern: v.zero_pattern,
        numeric_residual: v.numeric.relative,
        numeric: v.numeric.pass,
        stable: v.closed_loop_spectrum.stable,
        max_real: v.closed_loop_spectrum.max_real,
        near_zero_modes: v.closed_loop_spectrum.near_zero,
        passed: v.passed(),
    };
    if verbose {
        print_verification(&DecouplingSolution {
            verification: v.clone(),
            ..stored.clone()
        });
    }
    print!("{}", write_json(&a.case.out, "check.json", &report)?);
    Ok(if report.passed { 0 } else { EXIT_VERIFICATION })
}

#[derive(Serialize)]
struct RunSummary {
    controller: String,
    csv: String,
    /// Mean control input over the steady-state window, p.u.
    u_ss: Vec<f64>,
    mean_drift_slope: f64,
    drift_slope_spread: f64,
    /// Peak frequency deviation of the decoupled generators, Hz.
    peak_decoupled_hz: Option<f64>,
    /// Same peak restricted to each disturbance step window.
    peak_decoupled_per_step_hz: Vec<(f64, f64)>,
    /// Spectrum of the static loop; the filter state is not included.
    spectrum_max_real: f64,
    stable: bool,
    near_zero_modes: usize,
}

#[derive(Serialize)]
struct SimulationSummary {
    actuators: NodeSet,
    sensors: NodeSet,
    decoupled_generators: NodeSet,
    scenario: Scenario,
    runs: Vec<RunSummary>,
}

fn cmd_simulate(a: &SimulateArgs, verbose: bool) -> Result<u8> {
    let model = load_model(&a.case)?;
    let sys = model.system();
    let sol = match &a.solution {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            DecouplingSolution::from_json(&text).context("parsing solution")?
        }
        None => {
            if a.disturb.is_empty() || a.target.is_empty() {
                bail!("either --solution or both --disturb and --target are required");
            }
            match synthesize(sys, &node_set(&a.disturb), &node_set(&a.target))? {
                Ok(found) => found,
                Err(path) => {
                    eprintln!("INFEASIBLE: path {path:?} has no admissible node to cut");
                    return Ok(EXIT_INFEASIBLE);
                }
            }
        }
    };
    let feedback = sol.feedback()?;
    let a_cl = feedback.closed_loop(sys)?;

    let mut base = match &a.scenario {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<Scenario>(&text).context("parsing scenario")?
        }
        None => {
            let mut s = Scenario::new(a.steps.iter().map(|s| s.0).collect(), a.horizon);
            s.dt = a.dt;
            s.freq_scale = model.nominal_hz();
            s
        }
    };
    base.controller = Controller::None;

    let mut controllers = Vec::new();
    if a.open_loop {
        controllers.push(Controller::None);
    }
    if a.ideal {
        controllers.push(Controller::Ideal);
    }
    controllers.extend(a.tau.iter().map(|&tau| Controller::Filtered { tau }));
    if controllers.is_empty() {
        controllers = vec![Controller::None, Controller::Ideal];
    }

    let decoupled: NodeSet = decouple::decoupled_nodes(sys, &a_cl, &sol.disturbance)?
        .iter()
        .filter(|&v| sys.is_frequency_node(v))
        .collect();
    let mut starts: Vec<f64> = base.steps.iter().map(|s| s.start).collect();
    starts.sort_by(f64::total_cmp);
    starts.dedup();

    fs::create_dir_all(&a.case.out)
        .with_context(|| format!("creating {}", a.case.out.display()))?;
    let mut runs = Vec::new();
    for controller in controllers {
        let (label, a_eff) = match controller {
            Controller::None => ("open_loop".to_string(), &sys.a),
            Controller::Ideal => ("ideal".to_string(), &a_cl),
            Controller::Filtered { tau } => (format!("tau_{tau}"), &a_cl),
        };
        info!("simulating {label}");
        let scenario = base.clone().with_controller(controller);
        let ts = sim::simulate(sys, &scenario, Some(&feedback))?;
        let csv = format!("timeseries_{label}.csv");
        ts.write_csv(a.case.out.join(&csv), a.stride)?;
        if !a.svg.is_empty() {
            fs::write(
                a.case.out.join(format!("timeseries_{label}.svg")),
                ts.to_svg(&a.svg)?,
            )?;
        }
        let window = a.window.min(scenario.horizon);
        let ss = if window > 0.0 {
            Some(sim::steady_state_report(&ts, window)?)
        } else {
            None
        };
        let spectrum = sim::spectrum(sys, a_eff)?;
        let peak = if decoupled.is_empty() {
            None
        } else {
            Some(sim::peak_report(&ts, &decoupled, 0.0, scenario.horizon)?)
        };
        let mut per_step = Vec::new();
        if !decoupled.is_empty() {
            for (i, &t0) in starts.iter().enumerate() {
                let t1 = starts.get(i + 1).copied().unwrap_or(scenario.horizon);
                per_step.push((t0, sim::peak_report(&ts, &decoupled, t0, t1)?));
            }
        }
        let summary = RunSummary {
            controller: label,
            csv,
            u_ss: ss.as_ref().map(|s| s.u_ss.clone()).unwrap_or_default(),
            mean_drift_slope: ss.as_ref().map_or(0.0, |s| s.mean_slope()),
            drift_slope_spread: ss.as_ref().map_or(0.0, |s| s.slope_spread()),
            peak_decoupled_hz: peak,
            peak_decoupled_per_step_hz: per_step,
            spectrum_max_real: spectrum.max_real,
            stable: spectrum.stable,
            near_zero_modes: spectrum.near_zero,
        };
        if verbose {
            eprintln!(
                "{:<12} u_ss {:?}  slope {:.6e}  peak {:?} Hz  max Re {:.3e}",
                summary.controller,
                summary.u_ss,
                summary.mean_drift_slope,
                summary.peak_decoupled_hz,
                summary.spectrum_max_real
            );
        }
        runs.push(summary);
    }
    let summary = SimulationSummary {
        actuators: sol.actuators.clone(),
        sensors: sol.sensors.clone(),
        decoupled_generators: decoupled,
        scenario: base,
        runs,
    };
    print!("{}", write_json(&a.case.out, "summary.json", &summary)?);
    Ok(0)
}

#[derive(Serialize)]
struct GridInfo {
    buses: usize,
    lines: usize,
    generators: usize,
    base_mva: f64,
    nominal_hz: f64,
    sync_condition_lhs: f64,
    sync_condition_holds: bool,
    equilibrium_residual: f64,
    max_phase_gap: f64,
    total_damping: f64,
}

#[derive(Serialize)]
struct CaseInfo {
    states: usize,
    admissible: NodeSet,
    edges: usize,
    labels: Vec<(usize, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridInfo>,
}

fn cmd_case_info(a: &CaseArgs, verbose: bool) -> Result<u8> {
    let model = load_model(a)?;
    let sys = model.system();
    let grid = match &model {
        Model::Grid(m) => {
            let cond = sync_condition_check(&m.network, DEFAULT_GAMMA)?;
            Some(GridInfo {
                buses: m.case.buses.len(),
                lines: m.case.lines.len(),
                generators: m.case.generators.len(),
                base_mva: m.case.base_mva,
                nominal_hz: m.case.nominal_hz,
                sync_condition_lhs: cond.lhs,
                sync_condition_holds: cond.holds,
                equilibrium_residual: m.equilibrium.residual,
                max_phase_gap: m.equilibrium.cohesive_margin,
                total_damping: m.total_damping(),
            })
        }
        Model::Linear(_) => None,
    };
    let info = CaseInfo {
        states: sys.n_states(),
        admissible: sys.admissible(),
        edges: sys.extended_graph().edges().len(),
        labels: (1..=sys.n_states())
            .map(|v| (v, sys.node_name(v).to_string()))
            .collect(),
        grid,
    };
    if verbose {
        for (v, label) in &info.labels {
            eprintln!("{v:>4}  {label}");
        }
    }
    print!("{}", write_json(&a.out, "case_info.json", &info)?);
    Ok(0)
}
