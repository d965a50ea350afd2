//! C ABI over the solver.
//!
//! Simulations are opaque handles created by [`vdg_simulation_new`] and
//! released with [`vdg_simulation_free`]. Every fallible call returns a
//! [`VdgStatus`]; the message of the last failure on the calling thread is
//! available through [`vdg_last_error_message`]. Panics never cross the
//! boundary: they are reported as [`VdgStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vlasov_dg::poisson::PoissonFlavor;
use vlasov_dg::scenarios::{make_scenario, ScenarioParams};
use vlasov_dg::timestep::{Integrator, Simulation, SimulationConfig};
use vlasov_dg::vlasov::FluxVariant;
use vlasov_dg::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VdgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    ChargeNeutrality = 4,
    BlowUp = 5,
    InsufficientExtrema = 6,
    LengthMismatch = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VdgFlux {
    A1 = 0,
    A2 = 1,
    Aa00 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VdgPoisson {
    Rt = 0,
    Ldg = 1,
    LdgV = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VdgIntegrator {
    Rk4 = 0,
    TvdRk2 = 1,
}

/// Run settings. Fill with [`vdg_config_default`] and adjust.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VdgConfig {
    pub nx: usize,
    pub nv: usize,
    pub degree: usize,
    pub flux: VdgFlux,
    pub poisson: VdgPoisson,
    pub integrator: VdgIntegrator,
    pub t_final: f64,
    pub cfl: f64,
    /// Fixed time step; `0` selects the adaptive rule.
    pub fixed_dt: f64,
    /// Diode voltage; NaN keeps the scenario default.
    pub lambda0: f64,
    /// Perturbation amplitude; NaN keeps the scenario default.
    pub alpha: f64,
    pub diag_stride: usize,
}

/// Latest diagnostics record.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VdgDiagnostics {
    pub t: f64,
    pub mass: f64,
    pub l1: f64,
    pub l2: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub penalty: f64,
    pub e_l2norm: f64,
    pub mass_dev: f64,
    pub energy_dev: f64,
}

/// Opaque simulation handle.
pub struct VdgSimulation {
    inner: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut buf = e.borrow_mut();
        buf.clear();
        buf.extend_from_slice(msg.as_bytes());
    });
}

fn status_of(err: &Error) -> VdgStatus {
    match err {
        Error::Config(_) => VdgStatus::Config,
        Error::ChargeNeutrality { .. } => VdgStatus::ChargeNeutrality,
        Error::BlowUp { .. } => VdgStatus::BlowUp,
        Error::InsufficientExtrema { .. } => VdgStatus::InsufficientExtrema,
        Error::LengthMismatch { .. } => VdgStatus::LengthMismatch,
        Error::Io(_) => VdgStatus::Io,
    }
}

/// Runs `body`, recording failures and converting panics.
fn guard(body: impl FnOnce() -> Result<(), (VdgStatus, String)>) -> VdgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => VdgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside the solver");
            VdgStatus::Panic
        }
    }
}

fn solver_err(e: Error) -> (VdgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (VdgStatus, String) {
    (VdgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn scenario_name<'a>(name: *const c_char) -> Result<&'a str, (VdgStatus, String)> {
    if name.is_null() {
        return Err(null("scenario name"));
    }
    CStr::from_ptr(name)
        .to_str()
        .map_err(|_| (VdgStatus::InvalidArgument, "scenario name is not UTF-8".into()))
}

fn to_config(c: &VdgConfig, base: &SimulationConfig) -> SimulationConfig {
    let mut cfg = base.clone();
    cfg.nx = c.nx;
    cfg.nv = c.nv;
    cfg.degree = c.degree;
    cfg.flux = match c.flux {
        VdgFlux::A1 => FluxVariant::CellAverageSign,
        VdgFlux::A2 => FluxVariant::WeightedAverage,
        VdgFlux::Aa00 => FluxVariant::ProjectedNonConsistent,
    };
    cfg.poisson = match c.poisson {
        VdgPoisson::Rt => PoissonFlavor::Rt,
        VdgPoisson::Ldg => PoissonFlavor::Ldg,
        VdgPoisson::LdgV => PoissonFlavor::LdgV,
    };
    cfg.time.integrator = match c.integrator {
        VdgIntegrator::Rk4 => Integrator::Rk4,
        VdgIntegrator::TvdRk2 => Integrator::TvdRk2,
    };
    cfg.time.t_final = c.t_final;
    cfg.time.cfl = c.cfl;
    cfg.time.fixed_dt = (c.fixed_dt != 0.0).then_some(c.fixed_dt);
    cfg.diag_stride = c.diag_stride;
    cfg
}

fn params_of(c: &VdgConfig) -> ScenarioParams {
    ScenarioParams {
        alpha: (!c.alpha.is_nan()).then_some(c.alpha),
        lambda0: (!c.lambda0.is_nan()).then_some(c.lambda0),
        ..Default::default()
    }
}

/// Writes the defaults of scenario `name` into `*out`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vdg_config_default(name: *const c_char, out: *mut VdgConfig) -> VdgStatus {
    guard(|| {
        let name = scenario_name(name)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = make_scenario(name, &ScenarioParams::default()).map_err(solver_err)?;
        let cfg = SimulationConfig::from_scenario(&s);
        let flux = match cfg.flux {
            FluxVariant::CellAverageSign => VdgFlux::A1,
            FluxVariant::WeightedAverage => VdgFlux::A2,
            FluxVariant::ProjectedNonConsistent => VdgFlux::Aa00,
        };
        let poisson = match cfg.poisson {
            PoissonFlavor::Rt => VdgPoisson::Rt,
            PoissonFlavor::Ldg => VdgPoisson::Ldg,
            PoissonFlavor::LdgV => VdgPoisson::LdgV,
        };
        *out = VdgConfig {
            nx: cfg.nx,
            nv: cfg.nv,
            degree: cfg.degree,
            flux,
            poisson,
            integrator: VdgIntegrator::Rk4,
            t_final: cfg.time.t_final,
            cfl: cfg.time.cfl,
            fixed_dt: 0.0,
            lambda0: f64::NAN,
            alpha: f64::NAN,
            diag_stride: cfg.diag_stride,
        };
        Ok(())
    })
}

/// Creates a simulation of scenario `name` at `t = 0`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `config` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn vdg_simulation_new(
    name: *const c_char,
    config: *const VdgConfig,
    out: *mut *mut VdgSimulation,
) -> VdgStatus {
    guard(|| {
        let name = scenario_name(name)?;
        if config.is_null() {
            return Err(null("config"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let c = &*config;
        let scenario = make_scenario(name, &params_of(c)).map_err(solver_err)?;
        let cfg = to_config(c, &SimulationConfig::from_scenario(&scenario));
        let inner = Simulation::new(&scenario, &cfg).map_err(solver_err)?;
        *out = Box::into_raw(Box::new(VdgSimulation { inner }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `sim` must come from [`vdg_simulation_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vdg_simulation_free(sim: *mut VdgSimulation) {
    if !sim.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(sim))));
    }
}

unsafe fn handle<'a>(sim: *mut VdgSimulation) -> Result<&'a mut Simulation, (VdgStatus, String)> {
    sim.as_mut().map(|s| &mut s.inner).ok_or_else(|| null("simulation"))
}

/// Takes one step (truncated at the final time); writes the step size.
///
/// # Safety
/// `sim` must be a live handle; `dt` may be null.
#[no_mangle]
pub unsafe extern "C" fn vdg_simulation_step(sim: *mut VdgSimulation, dt: *mut f64) -> VdgStatus {
    guard(|| {
        let s = handle(sim)?;
        let taken = s.step().map_err(solver_err)?;
        if !dt.is_null() {
            *dt = taken;
        }
        Ok(())
    })
}

/// Marches to `t_end`, landing on it exactly.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vdg_simulation_advance_to(sim: *mut VdgSimulation, t_end: f64) -> VdgStatus {
    guard(|| {
        let s = handle(sim)?;
        if !t_end.is_finite() {
            return Err((VdgStatus::InvalidArgument, "t_end is not finite".into()));
        }
        s.advance_to(t_end).map_err(solver_err)
    })
}

/// Current simulation time.
///
/// # Safety
/// `sim` must be a live handle and `t` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vdg_simulation_time(sim: *const VdgSimulation, t: *mut f64) -> VdgStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("simulation"))?;
        if t.is_null() {
            return Err(null("t"));
        }
        *t = s.inner.t();
        Ok(())
    })
}

/// Diagnostics of the current state.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vdg_simulation_diagnostics(
    sim: *const VdgSimulation,
    out: *mut VdgDiagnostics,
) -> VdgStatus {
    guard(|| {
        let s = &sim.as_ref().ok_or_else(|| null("simulation"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let rec = s.current_record().map_err(solver_err)?;
        let dev = s.diagnostics().deviations(&rec);
        *out = VdgDiagnostics {
            t: rec.t,
            mass: rec.mass,
            l1: rec.l1,
            l2: rec.l2,
            energy: rec.energy.total,
            kinetic: rec.energy.kinetic,
            potential: rec.energy.potential,
            penalty: rec.energy.penalty,
            e_l2norm: rec.e_l2norm,
            mass_dev: dev.mass,
            energy_dev: dev.energy,
        };
        Ok(())
    })
}

/// Number of nodal coefficients of the distribution.
///
/// # Safety
/// `sim` must be a live handle and `len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vdg_simulation_num_coeffs(sim: *const VdgSimulation, len: *mut usize) -> VdgStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("simulation"))?;
        if len.is_null() {
            return Err(null("len"));
        }
        *len = s.inner.distribution().coeffs.len();
        Ok(())
    })
}

/// Copies the nodal coefficients into `buf`, which must hold exactly
/// [`vdg_simulation_num_coeffs`] values.
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn vdg_simulation_copy_coeffs(
    sim: *const VdgSimulation,
    buf: *mut f64,
    len: usize,
) -> VdgStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("simulation"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let coeffs = &s.inner.distribution().coeffs;
        if coeffs.len() != len {
            return Err(solver_err(Error::LengthMismatch {
                expected: coeffs.len(),
                found: len,
            }));
        }
        ptr::copy_nonoverlapping(coeffs.as_ptr(), buf, len);
        Ok(())
    })
}

/// Evaluates `f_h(x, v)`.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vdg_simulation_evaluate(
    sim: *const VdgSimulation,
    x: f64,
    v: f64,
    out: *mut f64,
) -> VdgStatus {
    guard(|| {
        let s = &sim.as_ref().ok_or_else(|| null("simulation"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = s.mesh();
        if !(x >= m.x_lo && x <= m.x_hi && v >= -m.l && v <= m.l) {
            return Err((VdgStatus::InvalidArgument, format!("({x}, {v}) lies outside the domain")));
        }
        *out = s.distribution().evaluate(s.basis(), m, x, v);
        Ok(())
    })
}

/// `‖f - f_h‖_{L²}` for scenarios with an exact solution.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vdg_simulation_l2_error(sim: *const VdgSimulation, out: *mut f64) -> VdgStatus {
    guard(|| {
        let s = &sim.as_ref().ok_or_else(|| null("simulation"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s
            .l2_error()
            .ok_or_else(|| (VdgStatus::Config, "scenario has no exact solution".to_string()))?;
        Ok(())
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be valid for `len` writes, or null to query the length.
#[no_mangle]
pub unsafe extern "C" fn vdg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vdg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
