//! Conserved quantities, deviations, field norms and damping-rate fits.

use crate::basis::{gauss_quadrature, NodalBasis1D};
use crate::error::{Error, Result};
use crate::mesh::PhaseMesh;
use crate::poisson::{l2_squared, Field, FieldPair};
use crate::vlasov::{projection_points, Distribution};

/// `∬ f_h`, exact.
pub fn total_mass(f: &Distribution, basis: &NodalBasis1D, mesh: &PhaseMesh) -> f64 {
    let n = f.degree + 1;
    let w = &basis.integrals;
    let mut total = 0.0;
    for i in 0..mesh.nx {
        for j in 0..mesh.nv {
            let block = f.block(i, j);
            let mut s = 0.0;
            for a in 0..n {
                let row: f64 = (0..n).map(|b| block[a * n + b] * w[b]).sum();
                s += w[a] * row;
            }
            total += mesh.hx_cells[i] * mesh.hv_cells[j] * s;
        }
    }
    total
}

/// Integrates `g(x, v, f_h(x, v))` with `nq` Gauss points per direction.
fn integrate_with(
    f: &Distribution,
    basis: &NodalBasis1D,
    mesh: &PhaseMesh,
    nq: usize,
    mut g: impl FnMut(f64, f64, f64) -> f64,
) -> f64 {
    let n = f.degree + 1;
    let q = gauss_quadrature(nq).expect("valid quadrature order");
    let table = basis.value_table(&q.points);
    let mut tmp = vec![0.0; nq * n];
    let mut total = 0.0;
    for i in 0..mesh.nx {
        let (x0, hx) = (mesh.x_edges[i], mesh.hx_cells[i]);
        for j in 0..mesh.nv {
            let (v0, hv) = (mesh.v_edges[j], mesh.hv_cells[j]);
            let block = f.block(i, j);
            for p in 0..nq {
                for b in 0..n {
                    tmp[p * n + b] = (0..n).map(|a| table[p * n + a] * block[a * n + b]).sum();
                }
            }
            let mut s = 0.0;
            for p in 0..nq {
                let x = x0 + hx * q.points[p];
                for r in 0..nq {
                    let val: f64 = (0..n).map(|b| tmp[p * n + b] * table[r * n + b]).sum();
                    let v = v0 + hv * q.points[r];
                    s += q.weights[p] * q.weights[r] * g(x, v, val);
                }
            }
            total += hx * hv * s;
        }
    }
    total
}

/// `‖f_h‖_{L^p}` for `p ∈ {1, 2}`; `|f_h|` is integrated with `k + 2` Gauss
/// points per direction, so the L1 norm is approximate where `f_h` changes sign.
pub fn lp_norm(f: &Distribution, basis: &NodalBasis1D, mesh: &PhaseMesh, p: u32) -> Result<f64> {
    let nq = f.degree + 2;
    match p {
        1 => Ok(integrate_with(f, basis, mesh, nq, |_, _, u| u.abs())),
        2 => Ok(integrate_with(f, basis, mesh, nq, |_, _, u| u * u).sqrt()),
        _ => Err(Error::config(format!("unsupported norm exponent {p}"))),
    }
}

/// `∬ (v²/2) f_h`, exact.
pub fn kinetic_energy(f: &Distribution, basis: &NodalBasis1D, mesh: &PhaseMesh) -> f64 {
    integrate_with(f, basis, mesh, f.degree + 2, |_, v, u| 0.5 * v * v * u)
}

/// `‖f - f_h‖_{L²}` against a pointwise reference, over-integrated.
pub fn l2_error(
    f: &Distribution,
    basis: &NodalBasis1D,
    mesh: &PhaseMesh,
    exact: impl Fn(f64, f64) -> f64,
) -> f64 {
    let nq = projection_points(f.degree);
    integrate_with(f, basis, mesh, nq, |x, v, u| {
        let d = exact(x, v) - u;
        d * d
    })
    .sqrt()
}

/// `‖E - E_h‖_{L²}` against a pointwise reference.
pub fn field_l2_error(pair: &FieldPair, field_basis: &NodalBasis1D, mesh: &PhaseMesh, exact: impl Fn(f64) -> f64) -> f64 {
    let q = gauss_quadrature(projection_points(pair.degree)).expect("valid quadrature order");
    let m = pair.nodes_per_cell();
    let table = field_basis.value_table(&q.points);
    let mut total = 0.0;
    for i in 0..mesh.nx {
        let e = pair.e_cell(i);
        let (x0, h) = (mesh.x_edges[i], mesh.hx_cells[i]);
        for (p, (&r, &w)) in q.points.iter().zip(&q.weights).enumerate() {
            let val: f64 = (0..m).map(|a| table[p * m + a] * e[a]).sum();
            let d = exact(x0 + h * r) - val;
            total += h * w * d * d;
        }
    }
    total.sqrt()
}

/// Components of the discrete total energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub total: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub penalty: f64,
}

/// Kinetic energy, `½∫E²`, and the `(k+1)²/h_x Σ⟦Φ⟧²` jump penalty.
///
/// For velocity-split fields the potential and penalty are averaged over the
/// two branches: the average is what the split scheme exchanges with the
/// kinetic energy.
pub fn discrete_total_energy(
    f: &Distribution,
    field: &Field,
    basis: &NodalBasis1D,
    field_basis: &NodalBasis1D,
    mesh: &PhaseMesh,
) -> EnergyParts {
    let kinetic = kinetic_energy(f, basis, mesh);
    let pair_parts = |p: &FieldPair| (0.5 * p.e_l2_squared(field_basis), p.penalty());
    let (potential, penalty) = match field {
        Field::Single(p) => pair_parts(p),
        Field::Split { plus, minus } => {
            let (a, b) = pair_parts(plus);
            let (c, d) = pair_parts(minus);
            (0.5 * (a + c), 0.5 * (b + d))
        }
    };
    EnergyParts {
        total: kinetic + potential + penalty,
        kinetic,
        potential,
        penalty,
    }
}

/// `‖E_h‖_{L²}` of the field seen by the scheme (branch average when split).
pub fn e_l2_norm(field: &Field, field_basis: &NodalBasis1D) -> f64 {
    let hx = &field.plus().hx_cells;
    match field {
        Field::Single(p) => l2_squared(&p.e, hx, field_basis).sqrt(),
        Field::Split { .. } => l2_squared(&field.e_average(), hx, field_basis).sqrt(),
    }
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagRecord {
    pub t: f64,
    pub mass: f64,
    pub l1: f64,
    pub l2: f64,
    pub energy: EnergyParts,
    pub e_l2norm: f64,
}

/// Deviations of one record from the reference record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviations {
    pub mass: f64,
    pub l1: f64,
    pub l2: f64,
    /// `|E(t) - E(0)| / E(0)`.
    pub energy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunDiagnostics {
    pub records: Vec<DiagRecord>,
}

fn relative(now: f64, reference: f64) -> f64 {
    if reference != 0.0 {
        (now - reference) / reference
    } else {
        now - reference
    }
}

impl RunDiagnostics {
    pub fn push(&mut self, record: DiagRecord) {
        self.records.push(record);
    }

    pub fn reference(&self) -> Option<&DiagRecord> {
        self.records.first()
    }

    pub fn deviations(&self, record: &DiagRecord) -> Deviations {
        let r = self.reference().unwrap_or(record);
        Deviations {
            mass: relative(record.mass, r.mass),
            l1: relative(record.l1, r.l1),
            l2: relative(record.l2, r.l2),
            energy: relative(record.energy.total, r.energy.total).abs(),
        }
    }

    /// Largest absolute deviations over records with `t <= t_max`.
    pub fn max_deviations(&self, t_max: f64) -> Deviations {
        let mut out = Deviations {
            mass: 0.0,
            l1: 0.0,
            l2: 0.0,
            energy: 0.0,
        };
        for rec in self.records.iter().filter(|r| r.t <= t_max) {
            let d = self.deviations(rec);
            out.mass = out.mass.max(d.mass.abs());
            out.l1 = out.l1.max(d.l1.abs());
            out.l2 = out.l2.max(d.l2.abs());
            out.energy = out.energy.max(d.energy);
        }
        out
    }

    /// `(t, ‖E_h‖_{L²})` pairs.
    pub fn e_series(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, r.e_l2norm)).collect()
    }
}

/// Least-squares fit `y ≈ c e^{γ t}` through the local maxima of a series.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpFit {
    pub c: f64,
    pub gamma: f64,
    pub window: (f64, f64),
    pub maxima: Vec<(f64, f64)>,
}

/// Indices of strict local maxima whose times fall in `window`. A plateau
/// counts once, at its first sample, when it is followed by a decrease.
pub fn local_maxima(series: &[(f64, f64)], window: (f64, f64)) -> Vec<usize> {
    let mut out = Vec::new();
    let len = series.len();
    for n in 1..len.saturating_sub(1) {
        let (t, y) = series[n];
        if t < window.0 || t > window.1 || y <= series[n - 1].1 {
            continue;
        }
        let next = series[n + 1..].iter().find(|s| s.1 != y);
        if matches!(next, Some(s) if s.1 < y) {
            out.push(n);
        }
    }
    out
}

pub fn fit_exponential(series: &[(f64, f64)], window: (f64, f64)) -> Result<ExpFit> {
    let inside: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    // A flat signal has no maxima but an unambiguous rate.
    if let Some(&(_, y0)) = inside.first() {
        if inside.len() >= 3 && y0 > 0.0 && inside.iter().all(|&(_, y)| y == y0) {
            return Ok(ExpFit {
                c: y0,
                gamma: 0.0,
                window,
                maxima: Vec::new(),
            });
        }
    }
    let idx = local_maxima(series, window);
    if idx.len() < 3 {
        return Err(Error::InsufficientExtrema { found: idx.len() });
    }
    let maxima: Vec<(f64, f64)> = idx.iter().map(|&n| series[n]).collect();
    if let Some(&(t, y)) = maxima.iter().find(|m| m.1 <= 0.0) {
        return Err(Error::config(format!("non-positive maximum {y} at t = {t}")));
    }
    let m = maxima.len() as f64;
    let (st, sy) = maxima.iter().fold((0.0, 0.0), |(a, b), &(t, y)| (a + t, b + y.ln()));
    let (tm, ym) = (st / m, sy / m);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(t, y) in &maxima {
        sxx += (t - tm) * (t - tm);
        sxy += (t - tm) * (y.ln() - ym);
    }
    let gamma = sxy / sxx;
    let c = (ym - gamma * tm).exp();
    Ok(ExpFit {
        c,
        gamma,
        window,
        maxima,
    })
}

/// `(‖∇f_h‖_{L²}, ‖∇f_h‖_{L∞}, ‖f_h‖_{L∞})` with the element-wise gradient.
pub fn grad_norms(f: &Distribution, basis: &NodalBasis1D, mesh: &PhaseMesh) -> (f64, f64, f64) {
    let n = f.degree + 1;
    let q = gauss_quadrature(f.degree + 2).expect("valid quadrature order");
    let mut pts = q.points.clone();
    let nq = pts.len();
    pts.extend_from_slice(&basis.nodes);
    let val = basis.value_table(&pts);
    let der = basis.derivative_table(&pts);
    let np = pts.len();
    let mut l2 = 0.0;
    let mut grad_inf: f64 = 0.0;
    let mut f_inf: f64 = 0.0;
    for i in 0..mesh.nx {
        let hx = mesh.hx_cells[i];
        for j in 0..mesh.nv {
            let hv = mesh.hv_cells[j];
            let block = f.block(i, j);
            for p in 0..np {
                for r in 0..np {
                    let (mut u, mut ux, mut uv) = (0.0, 0.0, 0.0);
                    for a in 0..n {
                        for b in 0..n {
                            let c = block[a * n + b];
                            u += val[p * n + a] * val[r * n + b] * c;
                            ux += der[p * n + a] * val[r * n + b] * c;
                            uv += val[p * n + a] * der[r * n + b] * c;
                        }
                    }
                    let (gx, gv) = (ux / hx, uv / hv);
                    let g2 = gx * gx + gv * gv;
                    grad_inf = grad_inf.max(g2.sqrt());
                    f_inf = f_inf.max(u.abs());
                    if p < nq && r < nq {
                        l2 += hx * hv * q.weights[p] * q.weights[r] * g2;
                    }
                }
            }
        }
    }
    (l2.sqrt(), grad_inf, f_inf)
}
