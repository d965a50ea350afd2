//! Command-line front end: `run`, `converge` and `fit`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::diagnostics::{fit_exponential, ExpFit};
use crate::error::{Error, Result};
use crate::output::{
    read_e_series, write_atomic, write_convergence, write_diagnostics, write_fits, write_snapshot,
    OutputBundle,
};
use crate::poisson::PoissonFlavor;
use crate::scenarios::{convergence_study, make_scenario, shu_condition, Scenario, ScenarioParams};
use crate::timestep::{default_cfl, Integrator, Simulation, SimulationConfig};
use crate::vlasov::FluxVariant;

#[derive(Debug, Parser)]
#[command(name = "vlasov-dg", version, about = "DG solver for the 1D1V Vlasov-Poisson system")]
pub struct Cli {
    /// Worker threads for the cell loop (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write diagnostics, snapshots and fits.
    Run(RunArgs),
    /// Manufactured-solution convergence study.
    Converge(ConvergeArgs),
    /// Fit exponential rates to the field norm of an existing run.
    Fit(FitArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// forced | weak-landau | strong-landau | two-stream-1 | two-stream-2 | diode
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub nv: Option<usize>,
    #[arg(long)]
    pub degree: Option<usize>,
    /// a1 | a2 | aa00
    #[arg(long)]
    pub flux: Option<String>,
    /// rt | ldg | ldgv
    #[arg(long)]
    pub poisson: Option<String>,
    /// rk4 | rk2tvd
    #[arg(long)]
    pub integrator: Option<String>,
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long)]
    pub cfl: Option<f64>,
    #[arg(long = "fixed-dt")]
    pub fixed_dt: Option<f64>,
    /// External diode voltage.
    #[arg(long)]
    pub lambda0: Option<f64>,
    /// Perturbation amplitude.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Record diagnostics every N steps.
    #[arg(long = "diag-stride")]
    pub diag_stride: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// key=value file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated times at which to write snapshots.
    #[arg(long = "snapshot-times", value_delimiter = ',')]
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    pub degrees: Vec<usize>,
    /// Cells per direction of each mesh.
    #[arg(long, value_delimiter = ',', default_value = "20,40,80")]
    pub meshes: Vec<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// diagnostics.csv of a previous run.
    #[arg(long)]
    pub input: PathBuf,
    /// Windows as `start:end`, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub windows: Vec<String>,
    /// Output directory (default: the directory of the input).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `key=value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("config line {}: expected key=value", n + 1)))?;
        map.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("invalid value '{v}' for '{key}'")))
}

impl CommonArgs {
    /// Fills unset fields from the `--config` file.
    pub fn merged(&self) -> Result<(CommonArgs, Vec<f64>)> {
        let mut out = self.clone();
        let mut snapshots = Vec::new();
        let Some(path) = &self.config else {
            return Ok((out, snapshots));
        };
        let text = std::fs::read_to_string(path)?;
        for (key, v) in parse_config_text(&text)? {
            let k = key.as_str();
            match k {
                "scenario" => out.scenario = out.scenario.or(Some(v)),
                "nx" => out.nx = out.nx.or(Some(parse_value(k, &v)?)),
                "nv" => out.nv = out.nv.or(Some(parse_value(k, &v)?)),
                "degree" => out.degree = out.degree.or(Some(parse_value(k, &v)?)),
                "flux" => out.flux = out.flux.or(Some(v)),
                "poisson" => out.poisson = out.poisson.or(Some(v)),
                "integrator" => out.integrator = out.integrator.or(Some(v)),
                "tf" => out.tf = out.tf.or(Some(parse_value(k, &v)?)),
                "cfl" => out.cfl = out.cfl.or(Some(parse_value(k, &v)?)),
                "fixed_dt" => out.fixed_dt = out.fixed_dt.or(Some(parse_value(k, &v)?)),
                "lambda0" => out.lambda0 = out.lambda0.or(Some(parse_value(k, &v)?)),
                "alpha" => out.alpha = out.alpha.or(Some(parse_value(k, &v)?)),
                "diag_stride" => out.diag_stride = out.diag_stride.or(Some(parse_value(k, &v)?)),
                "out" => out.out = out.out.or(Some(PathBuf::from(v))),
                "snapshot_times" => {
                    snapshots = v
                        .split(',')
                        .map(|s| parse_value(k, s.trim()))
                        .collect::<Result<_>>()?
                }
                // Consumed by the caller before argument resolution.
                "threads" => {}
                _ => return Err(Error::config(format!("unknown config key '{key}'"))),
            }
        }
        Ok((out, snapshots))
    }

    /// Builds the scenario and configuration, starting from the scenario
    /// defaults.
    pub fn resolve(&self) -> Result<(Scenario, SimulationConfig)> {
        let name = self
            .scenario
            .as_deref()
            .ok_or_else(|| Error::config("--scenario is required"))?;
        let params = ScenarioParams {
            alpha: self.alpha,
            lambda0: self.lambda0,
            ..Default::default()
        };
        let scenario = make_scenario(name, &params)?;
        if self.lambda0.is_some() && !scenario.is_diode() {
            return Err(Error::config("--lambda0 applies to the diode scenario only"));
        }
        let mut cfg = SimulationConfig::from_scenario(&scenario);
        if let Some(v) = self.nx {
            cfg.nx = v;
        }
        if let Some(v) = self.nv {
            cfg.nv = v;
        }
        if let Some(v) = self.degree {
            cfg.degree = v;
            cfg.time.cfl = default_cfl(v);
        }
        if let Some(v) = &self.flux {
            cfg.flux = v.parse::<FluxVariant>()?;
        }
        if let Some(v) = &self.poisson {
            cfg.poisson = v.parse::<PoissonFlavor>()?;
        }
        if let Some(v) = &self.integrator {
            cfg.time.integrator = v.parse::<Integrator>()?;
        }
        if let Some(v) = self.tf {
            cfg.time.t_final = v;
        }
        if let Some(v) = self.cfl {
            cfg.time.cfl = v;
        }
        cfg.time.fixed_dt = self.fixed_dt;
        if let Some(v) = self.diag_stride {
            cfg.diag_stride = v;
        }
        cfg.time.validate()?;
        Ok((scenario, cfg))
    }
}

/// Reads `threads` from the config file when the flag is absent.
fn configured_threads(cli: &Cli) -> Result<Option<usize>> {
    if cli.threads.is_some() {
        return Ok(cli.threads);
    }
    let path = match &cli.command {
        Command::Run(a) => a.common.config.as_ref(),
        Command::Converge(a) => a.common.config.as_ref(),
        Command::Fit(_) => None,
    };
    let Some(path) = path else { return Ok(None) };
    let map = parse_config_text(&std::fs::read_to_string(path)?)?;
    map.get("threads").map(|v| parse_value("threads", v)).transpose()
}

fn output_dir(common: &CommonArgs, scenario: &Scenario) -> PathBuf {
    common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("out-{}", scenario.name)))
}

fn fit_windows(series: &[(f64, f64)], windows: &[(f64, f64)]) -> Vec<ExpFit> {
    windows
        .iter()
        .filter_map(|&w| match fit_exponential(series, w) {
            Ok(fit) => Some(fit),
            Err(e) => {
                log::warn!("fit on [{}, {}] skipped: {e}", w.0, w.1);
                None
            }
        })
        .collect()
}

pub fn cmd_run(args: &RunArgs) -> Result<PathBuf> {
    let (common, file_snapshots) = args.common.merged()?;
    let (scenario, cfg) = common.resolve()?;
    let bundle = OutputBundle::new(output_dir(&common, &scenario));
    let mut snapshots = if args.snapshot_times.is_empty() {
        file_snapshots
    } else {
        args.snapshot_times.clone()
    };
    if snapshots.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::config("snapshot times must be nonnegative"));
    }
    snapshots.retain(|&t| t <= cfg.time.t_final);
    snapshots.sort_by(f64::total_cmp);
    snapshots.dedup();

    let start = Instant::now();
    let mut sim = Simulation::new(&scenario, &cfg)?;
    for &ts in &snapshots {
        sim.advance_to(ts)?;
        write_snapshot(&bundle.snapshot(ts), sim.distribution(), sim.basis(), sim.mesh())?;
    }
    sim.advance_to(cfg.time.t_final)?;
    let wall = start.elapsed().as_secs_f64();

    write_diagnostics(&bundle.diagnostics(), sim.diagnostics())?;
    let fits = fit_windows(&sim.diagnostics().e_series(), &scenario.fit_windows);
    if !fits.is_empty() {
        write_fits(&bundle.fit(), &fits)?;
    }
    write_atomic(&bundle.report(), run_report(&sim, &fits, wall).as_bytes())?;
    Ok(bundle.dir)
}

fn run_report(sim: &Simulation, fits: &[ExpFit], wall: f64) -> String {
    let cfg = sim.config();
    let s = sim.scenario();
    let dts = sim.dt_history();
    let mut r = String::new();
    let _ = writeln!(r, "scenario: {}", s.name);
    let _ = writeln!(r, "mesh: {} x {}", cfg.nx, cfg.nv);
    let _ = writeln!(r, "domain: [{}, {}] x [{}, {}]", s.x_lo, s.x_hi, -s.l, s.l);
    let _ = writeln!(r, "degree: {}", cfg.degree);
    let _ = writeln!(r, "flux: {:?}", cfg.flux);
    let _ = writeln!(r, "poisson: {:?}", cfg.poisson);
    let _ = writeln!(r, "integrator: {}", cfg.time.integrator);
    match cfg.time.fixed_dt {
        Some(dt) => {
            let _ = writeln!(r, "dt: fixed {dt:.6e}");
        }
        None => {
            let _ = writeln!(r, "cfl: {}", cfg.time.cfl);
        }
    }
    let _ = writeln!(r, "background: {:.16e}", sim.background());
    if let Ok((threshold, satisfied)) = shu_condition(s) {
        let _ = writeln!(r, "lambda0: {}", s.lambda(0.0));
        let _ = writeln!(r, "singularity threshold: {threshold:.16e} (exceeded: {satisfied})");
    }
    let _ = writeln!(r, "t_final: {}", sim.t());
    let _ = writeln!(r, "steps: {}", sim.steps());
    if !dts.is_empty() {
        let min = dts.iter().copied().fold(f64::INFINITY, f64::min);
        let max = dts.iter().copied().fold(0.0, f64::max);
        let mean = dts.iter().sum::<f64>() / dts.len() as f64;
        let _ = writeln!(r, "dt min/mean/max: {min:.6e} {mean:.6e} {max:.6e}");
    }
    let worst = sim.diagnostics().max_deviations(f64::INFINITY);
    let _ = writeln!(r, "max |mass_dev|: {:.6e}", worst.mass);
    let _ = writeln!(r, "max |l1_dev|: {:.6e}", worst.l1);
    let _ = writeln!(r, "max |l2_dev|: {:.6e}", worst.l2);
    let _ = writeln!(r, "max energy_dev: {:.6e}", worst.energy);
    if let Some(err) = sim.l2_error() {
        let _ = writeln!(r, "L2 error: {err:.16e}");
    }
    if let Some(err) = sim.e_error() {
        let _ = writeln!(r, "E L2 error: {err:.16e}");
    }
    for f in fits {
        let _ = writeln!(
            r,
            "fit [{}, {}]: c = {:.6e}, gamma = {:.6e} ({} maxima)",
            f.window.0,
            f.window.1,
            f.c,
            f.gamma,
            f.maxima.len()
        );
    }
    let _ = writeln!(r, "wall time: {wall:.3} s");
    if !dts.is_empty() {
        let _ = writeln!(r, "dt history:");
        for dt in dts {
            let _ = writeln!(r, "{dt:.16e}");
        }
    }
    r
}

pub fn cmd_converge(args: &ConvergeArgs) -> Result<PathBuf> {
    let (mut common, _) = args.common.merged()?;
    if common.scenario.is_none() {
        common.scenario = Some("forced".into());
    }
    let (scenario, cfg) = common.resolve()?;
    let bundle = OutputBundle::new(output_dir(&common, &scenario));
    let report = convergence_study(&scenario, &args.degrees, &args.meshes, &cfg)?;
    write_convergence(&bundle.convergence(), &report)?;
    Ok(bundle.dir)
}

fn parse_window(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::config(format!("window '{s}' must be start:end")))?;
    let w = (parse_value("window", a.trim())?, parse_value("window", b.trim())?);
    if !(w.1 > w.0) {
        return Err(Error::config(format!("empty window '{s}'")));
    }
    Ok(w)
}

pub fn cmd_fit(args: &FitArgs) -> Result<PathBuf> {
    let windows = args
        .windows
        .iter()
        .map(|w| parse_window(w))
        .collect::<Result<Vec<_>>>()?;
    let series = read_e_series(&args.input)?;
    let fits = windows
        .iter()
        .map(|&w| fit_exponential(&series, w))
        .collect::<Result<Vec<_>>>()?;
    let dir = args.out.clone().unwrap_or_else(|| {
        args.input
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    write_fits(&OutputBundle::new(&dir).fit(), &fits)?;
    Ok(dir)
}

/// Runs the parsed command; returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let threads = match configured_threads(&cli) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Fit(a) => cmd_fit(a),
    };
    match result {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text() {
        let m = parse_config_text("scenario=strong-landau\n# note\nnx = 100 # cells\nfixed-dt=1e-3\n")
            .unwrap();
        assert_eq!(m["scenario"], "strong-landau");
        assert_eq!(m["nx"], "100");
        assert_eq!(m["fixed_dt"], "1e-3");
        assert!(parse_config_text("novalue").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        std::fs::write(&path, "scenario=weak-landau\nnx=10\nnv=12\ndegree=2\n").unwrap();
        let args = CommonArgs {
            nx: Some(8),
            config: Some(path),
            ..Default::default()
        };
        let (merged, _) = args.merged().unwrap();
        let (s, cfg) = merged.resolve().unwrap();
        assert_eq!(s.name.as_str(), "weak-landau");
        assert_eq!((cfg.nx, cfg.nv, cfg.degree), (8, 12, 2));
    }

    #[test]
    fn windows() {
        assert_eq!(parse_window("0:10").unwrap(), (0.0, 10.0));
        assert!(parse_window("10:0").is_err());
        assert!(parse_window("5").is_err());
    }
}
