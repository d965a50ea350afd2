//! Explicit Runge–Kutta marching with a Poisson solve before every stage.

use std::fmt;
use std::str::FromStr;

use crate::basis::{build_nodal_basis, NodalBasis1D};
use crate::diagnostics::{
    discrete_total_energy, e_l2_norm, field_l2_error, l2_error, lp_norm, total_mass, DiagRecord,
    RunDiagnostics,
};
use crate::error::{Error, Result};
use crate::mesh::{build_diode_mesh, build_phase_mesh, PhaseMesh};
use crate::poisson::{
    compute_density, Field, FieldPair, PoissonBoundary, PoissonFlavor, PoissonSolver,
};
use crate::scenarios::{BoundaryKind, Scenario};
use crate::vlasov::{
    project_initial, Distribution, FieldTable, FluxVariant, Sources, VlasovForm, VlasovOperator,
};

/// Upper bound of the default CFL number.
pub const DEFAULT_CFL: f64 = 0.3;

/// Default CFL number for degree `k`. The x-Courant number of the adaptive
/// rule is `cfl / 2`, and RK4 with upwind DG of degree `k` loses stability
/// near a Courant number of `1 / (2k + 1)`; this keeps a 25% margin.
pub fn default_cfl(k: usize) -> f64 {
    (1.5 / (2 * k + 1) as f64).min(DEFAULT_CFL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Rk4,
    TvdRk2,
}

impl FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Integrator::Rk4),
            "rk2tvd" => Ok(Integrator::TvdRk2),
            _ => Err(Error::config(format!(
                "unknown integrator '{s}' (expected rk4 or rk2tvd)"
            ))),
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::Rk4 => "rk4",
            Integrator::TvdRk2 => "rk2tvd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    pub t_final: f64,
    pub cfl: f64,
    pub integrator: Integrator,
    pub fixed_dt: Option<f64>,
}

impl TimeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::config(format!("invalid final time {}", self.t_final)));
        }
        match self.fixed_dt {
            Some(dt) if !(dt > 0.0) || !dt.is_finite() => {
                Err(Error::config(format!("fixed time step {dt} must be positive")))
            }
            Some(_) => Ok(()),
            None if !(self.cfl > 0.0 && self.cfl <= 1.0) => {
                Err(Error::config(format!("cfl {} must lie in (0, 1]", self.cfl)))
            }
            None => Ok(()),
        }
    }
}

/// `cfl · min h / max(‖E‖∞, 2L)`.
pub fn compute_dt(min_h: f64, e_sup: f64, l: f64, cfl: f64) -> f64 {
    cfl * min_h / e_sup.max(2.0 * l)
}

/// `‖E_h‖_{L∞}` sampled at nodes, Gauss points and cell ends.
pub fn e_sup_norm(pair: &FieldPair, field_basis: &NodalBasis1D) -> f64 {
    let m = pair.nodes_per_cell();
    let pts = field_basis.sample_points();
    let table = field_basis.value_table(&pts);
    let nx = pair.e.len() / m;
    let mut sup: f64 = 0.0;
    for i in 0..nx {
        let e = pair.e_cell(i);
        sup = e.iter().fold(sup, |s, v| s.max(v.abs()));
        for p in 0..pts.len() {
            let val: f64 = (0..m).map(|a| table[p * m + a] * e[a]).sum();
            sup = sup.max(val.abs());
        }
    }
    sup
}

/// Right-hand side `df/dt = F(f, t)` driven by an explicit integrator.
pub trait StageOperator {
    fn eval(&mut self, state: &[f64], t: f64, out: &mut [f64]) -> Result<()>;
}

/// Stage slopes `k₁..k₄` (stored without the `Δt` factor) and a stage state.
#[derive(Debug, Clone)]
pub struct StageWorkspace {
    pub k: [Vec<f64>; 4],
    pub stage: Vec<f64>,
}

impl StageWorkspace {
    pub fn new(len: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; len]),
            stage: vec![0.0; len],
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        if self.stage.len() != len {
            return Err(Error::LengthMismatch {
                expected: self.stage.len(),
                found: len,
            });
        }
        Ok(())
    }
}

fn axpy_into(out: &mut [f64], x: &[f64], a: f64, y: &[f64]) {
    for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

/// Classic four-stage Runge–Kutta step, in place.
pub fn rk4_step<O: StageOperator + ?Sized>(
    op: &mut O,
    f: &mut [f64],
    t: f64,
    dt: f64,
    ws: &mut StageWorkspace,
) -> Result<()> {
    ws.check(f.len())?;
    let StageWorkspace { k, stage } = ws;
    let [k1, k2, k3, k4] = k;
    op.eval(f, t, k1)?;
    axpy_into(stage, f, 0.5 * dt, k1);
    op.eval(stage, t + 0.5 * dt, k2)?;
    axpy_into(stage, f, 0.5 * dt, k2);
    op.eval(stage, t + 0.5 * dt, k3)?;
    axpy_into(stage, f, dt, k3);
    op.eval(stage, t + dt, k4)?;
    let c = dt / 6.0;
    for i in 0..f.len() {
        f[i] += c * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    }
    Ok(())
}

/// Two-stage TVD Runge–Kutta (Heun) step, in place.
pub fn rk2_tvd_step<O: StageOperator + ?Sized>(
    op: &mut O,
    f: &mut [f64],
    t: f64,
    dt: f64,
    ws: &mut StageWorkspace,
) -> Result<()> {
    ws.check(f.len())?;
    let StageWorkspace { k, stage } = ws;
    let [k1, k2, ..] = k;
    op.eval(f, t, k1)?;
    axpy_into(stage, f, dt, k1);
    op.eval(stage, t + dt, k2)?;
    for i in 0..f.len() {
        f[i] = 0.5 * f[i] + 0.5 * (stage[i] + dt * k2[i]);
    }
    Ok(())
}

/// Everything needed to run one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub nx: usize,
    pub nv: usize,
    pub degree: usize,
    pub flux: FluxVariant,
    pub poisson: PoissonFlavor,
    pub time: TimeConfig,
    /// Record diagnostics every `diag_stride` steps (the final state is always
    /// recorded).
    pub diag_stride: usize,
    /// Reuse the step-start field for every stage instead of re-solving.
    pub freeze_field: bool,
}

impl SimulationConfig {
    pub fn from_scenario(s: &Scenario) -> Self {
        let d = &s.defaults;
        Self {
            nx: d.nx,
            nv: d.nv,
            degree: d.degree,
            flux: d.flux,
            poisson: d.poisson,
            time: TimeConfig {
                t_final: d.t_final,
                cfl: default_cfl(d.degree),
                integrator: Integrator::Rk4,
                fixed_dt: None,
            },
            diag_stride: 1,
            freeze_field: false,
        }
    }
}

/// Stage right-hand side of the coupled Vlasov–Poisson system.
struct VpStages<'a> {
    op: &'a VlasovOperator,
    solver: &'a PoissonSolver,
    basis: &'a NodalBasis1D,
    mesh: &'a PhaseMesh,
    scenario: &'a Scenario,
    background: f64,
    /// Field of the step-start state, used by the first stage.
    initial: &'a FieldTable,
    freeze: bool,
    calls: usize,
    scratch: Distribution,
}

impl StageOperator for VpStages<'_> {
    fn eval(&mut self, state: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        self.scratch.coeffs.copy_from_slice(state);
        let solved;
        let table = if self.calls == 0 || self.freeze {
            self.initial
        } else {
            let rho = compute_density(&self.scratch, self.basis, self.mesh);
            let field = self
                .solver
                .solve(&rho, self.background, self.scenario.lambda(t))?;
            solved = self.op.field_table(&field);
            &solved
        };
        self.calls += 1;
        let sources = Sources {
            forcing: self.scenario.forcing.as_deref().map(|g| g as _),
            inflow: self.scenario.inflow.as_deref().map(|g| g as _),
        };
        self.op.rhs_into(&self.scratch, table, t, sources, out);
        Ok(())
    }
}

/// A running simulation: state, field, clock and diagnostics.
pub struct Simulation {
    scenario: Scenario,
    config: SimulationConfig,
    mesh: PhaseMesh,
    basis: NodalBasis1D,
    op: VlasovOperator,
    solver: PoissonSolver,
    background: f64,
    f: Distribution,
    field: Field,
    t: f64,
    steps: usize,
    dt_history: Vec<f64>,
    diagnostics: RunDiagnostics,
    workspace: StageWorkspace,
}

impl fmt::Debug for Simulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulation")
            .field("scenario", &self.scenario.name)
            .field("config", &self.config)
            .field("t", &self.t)
            .field("steps", &self.steps)
            .finish_non_exhaustive()
    }
}

impl Simulation {
    pub fn new(scenario: &Scenario, config: &SimulationConfig) -> Result<Self> {
        config.time.validate()?;
        if config.diag_stride == 0 {
            return Err(Error::config("diagnostics stride must be at least 1"));
        }
        let (mesh, form, boundary) = match scenario.boundary {
            BoundaryKind::Periodic => (
                build_phase_mesh(config.nx, config.nv, scenario.x_lo, scenario.x_hi, scenario.l)?,
                VlasovForm::Periodic,
                PoissonBoundary::Periodic,
            ),
            BoundaryKind::Diode { .. } => (
                build_diode_mesh(config.nx, config.nv, scenario.x_lo, scenario.x_hi, scenario.l)?,
                VlasovForm::Diode,
                PoissonBoundary::Dirichlet,
            ),
        };
        let basis = build_nodal_basis(config.degree)?;
        let op = VlasovOperator::new(&mesh, &basis, form, config.flux)?;
        let solver = PoissonSolver::new(&mesh, config.degree, config.poisson, boundary)?;
        let f = project_initial(|x, v| (scenario.initial)(x, v), &mesh, &basis);
        // The projected mass differs from the continuous one by the quadrature
        // and velocity-truncation error, so the background is matched to it.
        let background = if scenario.is_diode() {
            0.0
        } else {
            let discrete = total_mass(&f, &basis, &mesh) / mesh.x_length();
            if scenario.background != 0.0
                && ((discrete - scenario.background) / scenario.background).abs() > 1e-6
            {
                log::warn!(
                    "discrete density {discrete} differs from the nominal background {}",
                    scenario.background
                );
            }
            discrete
        };
        let rho = compute_density(&f, &basis, &mesh);
        let field = solver.solve(&rho, background, scenario.lambda(0.0))?;
        let workspace = StageWorkspace::new(f.coeffs.len());
        let mut sim = Self {
            scenario: scenario.clone(),
            config: config.clone(),
            mesh,
            basis,
            op,
            solver,
            background,
            f,
            field,
            t: 0.0,
            steps: 0,
            dt_history: Vec::new(),
            diagnostics: RunDiagnostics::default(),
            workspace,
        };
        sim.record()?;
        Ok(sim)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn mesh(&self) -> &PhaseMesh {
        &self.mesh
    }

    pub fn basis(&self) -> &NodalBasis1D {
        &self.basis
    }

    pub fn field_basis(&self) -> &NodalBasis1D {
        self.solver.field_basis()
    }

    pub fn distribution(&self) -> &Distribution {
        &self.f
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn background(&self) -> f64 {
        self.background
    }

    pub fn diagnostics(&self) -> &RunDiagnostics {
        &self.diagnostics
    }

    pub fn dt_history(&self) -> &[f64] {
        &self.dt_history
    }

    /// Time step the adaptive rule would pick for the current state.
    pub fn suggested_dt(&self) -> f64 {
        if let Some(dt) = self.config.time.fixed_dt {
            return dt;
        }
        let fb = self.solver.field_basis();
        let sup = e_sup_norm(self.field.plus(), fb).max(e_sup_norm(self.field.minus(), fb));
        compute_dt(self.mesh.min_width(), sup, self.mesh.l, self.config.time.cfl)
    }

    /// Advances by at most `max_dt`; returns the step taken.
    pub fn step_bounded(&mut self, max_dt: f64) -> Result<f64> {
        let dt = self.suggested_dt().min(max_dt);
        if !(dt > 0.0) {
            return Err(Error::config(format!("non-positive time step {dt}")));
        }
        let table = self.op.field_table(&self.field);
        let mut stages = VpStages {
            op: &self.op,
            solver: &self.solver,
            basis: &self.basis,
            mesh: &self.mesh,
            scenario: &self.scenario,
            background: self.background,
            initial: &table,
            freeze: self.config.freeze_field,
            calls: 0,
            scratch: Distribution::zeros(&self.mesh, self.basis.degree),
        };
        let t = self.t;
        // The scheme conserves mass to round-off, so a neutrality failure
        // mid-run means the state has lost all accuracy.
        let blown = |e: Error, at: f64| match e {
            Error::ChargeNeutrality { .. } => Error::BlowUp { t: at },
            e => e,
        };
        match self.config.time.integrator {
            Integrator::Rk4 => rk4_step(&mut stages, &mut self.f.coeffs, t, dt, &mut self.workspace),
            Integrator::TvdRk2 => {
                rk2_tvd_step(&mut stages, &mut self.f.coeffs, t, dt, &mut self.workspace)
            }
        }
        .map_err(|e| blown(e, t))?;
        self.t = t + dt;
        self.steps += 1;
        self.dt_history.push(dt);
        if !self.f.is_finite() {
            return Err(Error::BlowUp { t: self.t });
        }
        let rho = compute_density(&self.f, &self.basis, &self.mesh);
        self.field = self
            .solver
            .solve(&rho, self.background, self.scenario.lambda(self.t))
            .map_err(|e| blown(e, self.t))?;
        if self.steps.is_multiple_of(self.config.diag_stride) {
            self.record()?;
        }
        Ok(dt)
    }

    /// One step of the configured size, truncated at the final time.
    pub fn step(&mut self) -> Result<f64> {
        let remaining = self.config.time.t_final - self.t;
        self.step_bounded(remaining.max(0.0))
    }

    /// Marches to `t_end`, landing on it exactly.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            let remaining = t_end - self.t;
            // Avoid a sliver step from round-off.
            if remaining <= 1e-13 * t_end.abs().max(1.0) {
                self.t = t_end;
                break;
            }
            self.step_bounded(remaining)?;
            if t_end - self.t <= 1e-13 * t_end.abs().max(1.0) {
                self.t = t_end;
            }
        }
        if self.diagnostics.records.last().map(|r| r.t) != Some(self.t) {
            self.record()?;
        }
        Ok(())
    }

    /// Appends a diagnostics record for the current state.
    pub fn record(&mut self) -> Result<()> {
        let rec = self.current_record()?;
        self.diagnostics.push(rec);
        Ok(())
    }

    pub fn current_record(&self) -> Result<DiagRecord> {
        let fb = self.solver.field_basis();
        Ok(DiagRecord {
            t: self.t,
            mass: total_mass(&self.f, &self.basis, &self.mesh),
            l1: lp_norm(&self.f, &self.basis, &self.mesh, 1)?,
            l2: lp_norm(&self.f, &self.basis, &self.mesh, 2)?,
            energy: discrete_total_energy(&self.f, &self.field, &self.basis, fb, &self.mesh),
            e_l2norm: e_l2_norm(&self.field, fb),
        })
    }

    /// `‖f(t) - f_h(t)‖_{L²}` when the scenario has an exact solution.
    pub fn l2_error(&self) -> Option<f64> {
        let exact = self.scenario.exact_f.as_ref()?;
        let t = self.t;
        Some(l2_error(&self.f, &self.basis, &self.mesh, |x, v| exact(x, v, t)))
    }

    /// `‖E(t) - E_h(t)‖_{L²}`, using the branch average for split fields.
    pub fn e_error(&self) -> Option<f64> {
        let exact = self.scenario.exact_e.as_ref()?;
        let t = self.t;
        let avg = FieldPair {
            e: self.field.e_average(),
            ..self.field.plus().clone()
        };
        Some(field_l2_error(&avg, self.solver.field_basis(), &self.mesh, |x| exact(x, t)))
    }
}

/// Runs a scenario to its final time. `sink` sees the state after every step.
pub fn run_simulation(
    scenario: &Scenario,
    config: &SimulationConfig,
    sink: &mut dyn FnMut(&Simulation),
) -> Result<Simulation> {
    let mut sim = Simulation::new(scenario, config)?;
    sink(&sim);
    let t_final = config.time.t_final;
    while sim.t() < t_final {
        sim.step_bounded(t_final - sim.t())?;
        if t_final - sim.t() <= 1e-13 * t_final.max(1.0) {
            sim.t = t_final;
        }
        sink(&sim);
    }
    if sim.diagnostics.records.last().map(|r| r.t) != Some(sim.t) {
        sim.record()?;
    }
    Ok(sim)
}
