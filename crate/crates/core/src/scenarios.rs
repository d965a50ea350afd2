//! Benchmark definitions: initial data, exact solutions, forcing, boundary
//! data, and the manufactured-solution convergence driver.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::basis::gauss_quadrature;
use crate::error::{Error, Result};
use crate::poisson::PoissonFlavor;
use crate::timestep::{run_simulation, SimulationConfig};
use crate::vlasov::FluxVariant;

pub type PhaseFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type PhaseTimeFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioName {
    Forced,
    WeakLandau,
    StrongLandau,
    TwoStream1,
    TwoStream2,
    Diode,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 6] = [
        ScenarioName::Forced,
        ScenarioName::WeakLandau,
        ScenarioName::StrongLandau,
        ScenarioName::TwoStream1,
        ScenarioName::TwoStream2,
        ScenarioName::Diode,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::Forced => "forced",
            ScenarioName::WeakLandau => "weak-landau",
            ScenarioName::StrongLandau => "strong-landau",
            ScenarioName::TwoStream1 => "two-stream-1",
            ScenarioName::TwoStream2 => "two-stream-2",
            ScenarioName::Diode => "diode",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown scenario '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    Periodic,
    /// Bounded x-interval with constant external voltage `λ0`.
    Diode { lambda0: f64 },
}

/// Optional overrides of the scenario constants.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScenarioParams {
    /// Perturbation amplitude (Landau `α`, two-stream II amplitude).
    pub alpha: Option<f64>,
    /// Perturbation wave number `K`.
    pub wave_number: Option<f64>,
    pub v_thermal: Option<f64>,
    pub drift: Option<f64>,
    /// Diode density slope `γ`.
    pub density_slope: Option<f64>,
    pub lambda0: Option<f64>,
    /// Velocity half-width `L`.
    pub v_max: Option<f64>,
}

/// Default run settings attached to a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioDefaults {
    pub nx: usize,
    pub nv: usize,
    pub degree: usize,
    pub t_final: f64,
    pub flux: FluxVariant,
    pub poisson: PoissonFlavor,
}

#[derive(Clone)]
pub struct Scenario {
    pub name: ScenarioName,
    pub x_lo: f64,
    pub x_hi: f64,
    /// Velocity half-width.
    pub l: f64,
    pub initial: PhaseFn,
    pub exact_f: Option<PhaseTimeFn>,
    pub exact_e: Option<PhaseFn>,
    pub forcing: Option<PhaseTimeFn>,
    /// Nominal neutralizing background; 0 for the diode.
    pub background: f64,
    pub boundary: BoundaryKind,
    /// Distribution entering at `x_lo` with `v > 0`, as `g(v, t)`.
    pub inflow: Option<PhaseFn>,
    pub defaults: ScenarioDefaults,
    /// Windows used when fitting exponential rates to `‖E‖`.
    pub fit_windows: Vec<(f64, f64)>,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("x", &(self.x_lo, self.x_hi))
            .field("l", &self.l)
            .field("background", &self.background)
            .field("boundary", &self.boundary)
            .field("defaults", &self.defaults)
            .finish_non_exhaustive()
    }
}

impl Scenario {
    pub fn is_diode(&self) -> bool {
        matches!(self.boundary, BoundaryKind::Diode { .. })
    }

    pub fn lambda(&self, _t: f64) -> f64 {
        match self.boundary {
            BoundaryKind::Diode { lambda0 } => lambda0,
            BoundaryKind::Periodic => 0.0,
        }
    }
}

fn maxwellian(v: f64) -> f64 {
    (-0.5 * v * v).exp() / (2.0 * PI).sqrt()
}

fn defaults(nx: usize, nv: usize, degree: usize, t_final: f64) -> ScenarioDefaults {
    ScenarioDefaults {
        nx,
        nv,
        degree,
        t_final,
        flux: FluxVariant::WeightedAverage,
        poisson: PoissonFlavor::LdgV,
    }
}

pub fn make_scenario(name: &str, params: &ScenarioParams) -> Result<Scenario> {
    let name: ScenarioName = name.parse()?;
    let mut s = match name {
        ScenarioName::Forced => forced(),
        ScenarioName::WeakLandau => landau(name, params.alpha.unwrap_or(0.01), params),
        ScenarioName::StrongLandau => landau(name, params.alpha.unwrap_or(0.5), params),
        ScenarioName::TwoStream1 => two_stream_1(params),
        ScenarioName::TwoStream2 => two_stream_2(params),
        ScenarioName::Diode => diode(params)?,
    };
    if let Some(l) = params.v_max {
        if !(l > 0.0) {
            return Err(Error::config(format!("velocity half-width {l} must be positive")));
        }
        s.l = l;
    }
    Ok(s)
}

fn forced() -> Scenario {
    let sp = PI.sqrt();
    let profile = |v: f64| (-0.25 * (4.0 * v - 1.0).powi(2)).exp();
    let exact_f: PhaseTimeFn =
        Arc::new(move |x, v, t| (2.0 - (2.0 * x - 2.0 * PI * t).cos()) * profile(v));
    let initial_f = exact_f.clone();
    let forcing: PhaseTimeFn = Arc::new(move |x, v, t| {
        let phase = 2.0 * x - 2.0 * PI * t;
        profile(v)
            * (((4.0 * sp + 2.0) * v - (2.0 * PI + sp)) * phase.sin()
                + sp * (0.25 - v) * (2.0 * phase).sin())
    });
    Scenario {
        name: ScenarioName::Forced,
        x_lo: -PI,
        x_hi: PI,
        l: 4.0,
        initial: Arc::new(move |x, v| initial_f(x, v, 0.0)),
        exact_f: Some(exact_f),
        exact_e: Some(Arc::new(move |x, t| 0.25 * sp * (2.0 * x - 2.0 * PI * t).sin())),
        forcing: Some(forcing),
        background: sp,
        boundary: BoundaryKind::Periodic,
        inflow: None,
        defaults: defaults(40, 40, 3, 1.0),
        fit_windows: Vec::new(),
    }
}

fn landau(name: ScenarioName, alpha: f64, params: &ScenarioParams) -> Scenario {
    let k = params.wave_number.unwrap_or(0.5);
    let (defaults, windows) = if name == ScenarioName::WeakLandau {
        (ScenarioDefaults { ..defaults(60, 60, 4, 40.0) }, vec![(0.0, 40.0)])
    } else {
        (defaults(50, 80, 3, 40.0), vec![(0.0, 10.0), (20.0, 40.0)])
    };
    Scenario {
        name,
        x_lo: 0.0,
        x_hi: 4.0 * PI,
        l: 10.0,
        initial: Arc::new(move |x, v| (1.0 + alpha * (k * x).cos()) * maxwellian(v)),
        exact_f: None,
        exact_e: None,
        forcing: None,
        background: 1.0,
        boundary: BoundaryKind::Periodic,
        inflow: None,
        defaults,
        fit_windows: windows,
    }
}

fn two_stream_1(params: &ScenarioParams) -> Scenario {
    let k = params.wave_number.unwrap_or(0.5);
    Scenario {
        name: ScenarioName::TwoStream1,
        x_lo: 0.0,
        x_hi: 4.0 * PI,
        l: 10.0,
        initial: Arc::new(move |x, v| {
            v * v / (8.0 * PI).sqrt() * (2.0 - (k * (x - 2.0 * PI)).cos()) * (-0.5 * v * v).exp()
        }),
        exact_f: None,
        exact_e: None,
        forcing: None,
        background: 1.0,
        boundary: BoundaryKind::Periodic,
        inflow: None,
        defaults: defaults(40, 40, 3, 60.0),
        fit_windows: Vec::new(),
    }
}

fn two_stream_2(params: &ScenarioParams) -> Scenario {
    let k = params.wave_number.unwrap_or(2.0 / 13.0);
    let vth = params.v_thermal.unwrap_or(0.3);
    let w = params.drift.unwrap_or(0.99);
    let amp = params.alpha.unwrap_or(0.05);
    Scenario {
        name: ScenarioName::TwoStream2,
        x_lo: 0.0,
        x_hi: 13.0 * PI,
        l: 8.0,
        initial: Arc::new(move |x, v| {
            let g = |c: f64| (-(v - c) * (v - c) / (2.0 * vth * vth)).exp();
            (1.0 + amp * (k * x).cos()) / (2.0 * vth * (2.0 * PI).sqrt()) * (g(w) + g(-w))
        }),
        exact_f: None,
        exact_e: None,
        forcing: None,
        background: 1.0,
        boundary: BoundaryKind::Periodic,
        inflow: None,
        defaults: defaults(128, 50, 3, 70.0),
        fit_windows: Vec::new(),
    }
}

fn diode(params: &ScenarioParams) -> Result<Scenario> {
    let lambda0 = params.lambda0.unwrap_or(0.0);
    if !(lambda0 >= 0.0) {
        return Err(Error::config(format!(
            "external voltage {lambda0} must be nonnegative"
        )));
    }
    let gamma = params.density_slope.unwrap_or(0.0);
    let n0 = move |x: f64| {
        if (0.0..=0.5).contains(&x) {
            (1.0 + gamma * x) * (1.0 - 4.0 * x * x).powi(4)
        } else {
            0.0
        }
    };
    let g = |v: f64| v * v * maxwellian(v);
    Ok(Scenario {
        name: ScenarioName::Diode,
        x_lo: 0.0,
        x_hi: 1.0,
        l: 10.0,
        initial: Arc::new(move |x, v| n0(x) * g(v)),
        exact_f: None,
        exact_e: None,
        forcing: None,
        background: 0.0,
        boundary: BoundaryKind::Diode { lambda0 },
        inflow: Some(Arc::new(move |v, _t| g(v))),
        defaults: defaults(40, 40, 3, 0.3),
        fit_windows: Vec::new(),
    })
}

/// `(threshold, λ(0) > threshold)` where the threshold is
/// `∫₀¹ ∫ (1 - x) f₀ dv dx`; above it the diode solution loses continuity.
pub fn shu_condition(scenario: &Scenario) -> Result<(f64, bool)> {
    let BoundaryKind::Diode { lambda0 } = scenario.boundary else {
        return Err(Error::config("shu_condition applies to the diode scenario only"));
    };
    let threshold = integrate_box(
        |x, v| (1.0 - x) * (scenario.initial)(x, v),
        (scenario.x_lo, scenario.x_hi),
        (-scenario.l, scenario.l),
        64,
        128,
    );
    Ok((threshold, lambda0 > threshold))
}

/// Composite Gauss rule on a box with `cells_x x cells_v` panels.
pub fn integrate_box(
    g: impl Fn(f64, f64) -> f64,
    x: (f64, f64),
    v: (f64, f64),
    cells_x: usize,
    cells_v: usize,
) -> f64 {
    let q = gauss_quadrature(10).expect("valid quadrature order");
    let hx = (x.1 - x.0) / cells_x as f64;
    let hv = (v.1 - v.0) / cells_v as f64;
    let mut total = 0.0;
    for i in 0..cells_x {
        for (&rx, &wx) in q.points.iter().zip(&q.weights) {
            let xx = x.0 + hx * (i as f64 + rx);
            let mut inner = 0.0;
            for j in 0..cells_v {
                for (&rv, &wv) in q.points.iter().zip(&q.weights) {
                    inner += wv * g(xx, v.0 + hv * (j as f64 + rv));
                }
            }
            total += wx * inner * hv;
        }
    }
    total * hx
}

/// One `(degree, mesh)` entry of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub degree: usize,
    pub cells: usize,
    /// `‖f(t_f) - f_h(t_f)‖_{L²}`; `None` when the run failed.
    pub f_error: Option<f64>,
    pub e_error: Option<f64>,
    /// `log₂(err_coarse / err_fine)` against the previous row of the same degree.
    pub order: Option<f64>,
    pub e_order: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn errors(&self, degree: usize) -> Vec<Option<f64>> {
        self.rows.iter().filter(|r| r.degree == degree).map(|r| r.f_error).collect()
    }

    pub fn orders(&self, degree: usize) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .filter(|r| r.degree == degree)
            .skip(1)
            .map(|r| r.order)
            .collect()
    }
}

fn order(coarse: Option<f64>, fine: Option<f64>, ratio: f64) -> Option<f64> {
    match (coarse, fine) {
        (Some(c), Some(f)) if c > 0.0 && f > 0.0 => Some((c / f).ln() / ratio.ln()),
        _ => None,
    }
}

/// Runs the manufactured problem for every `(degree, N)` with an `N x N` mesh
/// and tabulates errors at `t_final`. `base` supplies flux, Poisson flavor,
/// integrator and time step; mesh and degree are overwritten per row.
pub fn convergence_study(
    scenario: &Scenario,
    degrees: &[usize],
    meshes: &[usize],
    base: &SimulationConfig,
) -> Result<ConvergenceReport> {
    if scenario.exact_f.is_none() {
        return Err(Error::config(format!(
            "scenario '{}' has no exact solution",
            scenario.name
        )));
    }
    if degrees.is_empty() || meshes.is_empty() {
        return Err(Error::config("convergence study needs degrees and meshes"));
    }
    let mut report = ConvergenceReport::default();
    for &k in degrees {
        let mut prev: Option<(usize, Option<f64>, Option<f64>)> = None;
        for &n in meshes {
            let mut cfg = base.clone();
            cfg.nx = n;
            cfg.nv = n;
            cfg.degree = k;
            let (f_error, e_error) = match run_simulation(scenario, &cfg, &mut |_| {}) {
                Ok(sim) => (sim.l2_error(), sim.e_error()),
                Err(err) => {
                    log::warn!("convergence run k={k} N={n} failed: {err}");
                    (None, None)
                }
            };
            let (ord, e_ord) = match prev {
                Some((pn, pf, pe)) => {
                    let ratio = n as f64 / pn as f64;
                    (order(pf, f_error, ratio), order(pe, e_error, ratio))
                }
                None => (None, None),
            };
            report.rows.push(ConvergenceRow {
                degree: k,
                cells: n,
                f_error,
                e_error,
                order: ord,
                e_order: e_ord,
            });
            prev = Some((n, f_error, e_error));
        }
    }
    Ok(report)
}
