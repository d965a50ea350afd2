//! Semi-discrete DG operator for the Vlasov equation.
//!
//! The periodic form discretizes `f_t + v f_x - E f_v = 0`; the diode form
//! discretizes `f_t + v f_x + E f_v = 0` on a bounded x-interval with inflow
//! data at `x_lo`. Both produce `M⁻¹ L(f, E, t)` cell by cell using sum
//! factorization over tensor Gauss rules.

use rayon::prelude::*;

use crate::basis::{classify_bernstein, gauss_quadrature, NodalBasis1D, SignTag};
use crate::error::{Error, Result};
use crate::mesh::PhaseMesh;
use crate::poisson::{Field, FieldPair};

/// Per-cell blocks of `(k+1)^2` nodal coefficients.
///
/// Cell `(i, j)` occupies `[(i·Nv + j)·(k+1)^2, ...)`; inside a block the
/// coefficient of x-node `a` and v-node `b` sits at `a·(k+1) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub degree: usize,
    pub nx: usize,
    pub nv: usize,
    pub coeffs: Vec<f64>,
}

impl Distribution {
    pub fn zeros(mesh: &PhaseMesh, degree: usize) -> Self {
        let n = degree + 1;
        Self {
            degree,
            nx: mesh.nx,
            nv: mesh.nv,
            coeffs: vec![0.0; mesh.num_cells() * n * n],
        }
    }

    pub fn block_len(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    pub fn block(&self, i: usize, j: usize) -> &[f64] {
        let len = self.block_len();
        let start = (i * self.nv + j) * len;
        &self.coeffs[start..start + len]
    }

    pub fn block_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let len = self.block_len();
        let start = (i * self.nv + j) * len;
        &mut self.coeffs[start..start + len]
    }

    /// Point evaluation; points on a shared edge take the value of the cell
    /// with the larger index.
    pub fn evaluate(&self, basis: &NodalBasis1D, mesh: &PhaseMesh, x: f64, v: f64) -> f64 {
        let i = mesh.locate_x(x);
        let j = mesh.locate_v(v);
        let rx = (x - mesh.x_edges[i]) / mesh.hx_cells[i];
        let rv = (v - mesh.v_edges[j]) / mesh.hv_cells[j];
        self.evaluate_local(basis, i, j, rx, rv)
    }

    /// Evaluation at reference coordinates inside cell `(i, j)`.
    pub fn evaluate_local(&self, basis: &NodalBasis1D, i: usize, j: usize, rx: f64, rv: f64) -> f64 {
        let lx = basis.values(rx);
        let lv = basis.values(rv);
        let n = self.degree + 1;
        let block = self.block(i, j);
        let mut s = 0.0;
        for a in 0..n {
            let row: f64 = (0..n).map(|b| block[a * n + b] * lv[b]).sum();
            s += lx[a] * row;
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

/// Points per direction used by [`project_initial`] and error norms.
pub(crate) fn projection_points(k: usize) -> usize {
    (k + 5).min(crate::basis::MAX_QUADRATURE_POINTS)
}

/// Per-cell L² projection of `f0` onto tensor polynomials of degree `k`.
pub fn project_initial(
    f0: impl Fn(f64, f64) -> f64 + Sync,
    mesh: &PhaseMesh,
    basis: &NodalBasis1D,
) -> Distribution {
    let k = basis.degree;
    let n = k + 1;
    let q = gauss_quadrature(projection_points(k)).expect("valid quadrature order");
    let table = basis.value_table(&q.points);
    let nq = q.order();
    let mut f = Distribution::zeros(mesh, k);
    let block_len = n * n;
    f.coeffs
        .par_chunks_mut(block_len)
        .enumerate()
        .for_each(|(cell, out)| {
            let (i, j) = (cell / mesh.nv, cell % mesh.nv);
            let (x0, hx) = (mesh.x_edges[i], mesh.hx_cells[i]);
            let (v0, hv) = (mesh.v_edges[j], mesh.hv_cells[j]);
            // Moments ∫∫ f0 l_a l_b on the reference square.
            let mut mom = vec![0.0; block_len];
            for p in 0..nq {
                let x = x0 + hx * q.points[p];
                let lx = &table[p * n..(p + 1) * n];
                for s in 0..nq {
                    let v = v0 + hv * q.points[s];
                    let w = q.weights[p] * q.weights[s] * f0(x, v);
                    let lv = &table[s * n..(s + 1) * n];
                    for a in 0..n {
                        let wa = w * lx[a];
                        for b in 0..n {
                            mom[a * n + b] += wa * lv[b];
                        }
                    }
                }
            }
            apply_mass_inverse(&basis.mass_inverse, &mom, out, n, 1.0);
        });
    f
}

/// `out = scale · M⁻¹ R M⁻¹` for `n x n` blocks.
fn apply_mass_inverse(minv: &nalgebra::DMatrix<f64>, r: &[f64], out: &mut [f64], n: usize, scale: f64) {
    let mut tmp = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            tmp[a * n + b] = (0..n).map(|c| minv[(a, c)] * r[c * n + b]).sum();
        }
    }
    for a in 0..n {
        for b in 0..n {
            out[a * n + b] = scale * (0..n).map(|d| tmp[a * n + d] * minv[(d, b)]).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxVariant {
    /// Upwind by the sign of the cell average of `E`.
    CellAverageSign,
    /// Classical upwind where `E` has a certified sign, weighted average elsewhere.
    WeightedAverage,
    /// Classical upwind where `E` has a certified sign, cell average of `E`
    /// times the upwind trace elsewhere. Not consistent.
    ProjectedNonConsistent,
}

impl std::str::FromStr for FluxVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a1" => Ok(Self::CellAverageSign),
            "a2" => Ok(Self::WeightedAverage),
            "aa00" => Ok(Self::ProjectedNonConsistent),
            other => Err(Error::config(format!("unknown flux variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VlasovForm {
    Periodic,
    Diode,
}

/// Upwind flux `v̂f` on a face normal to x.
pub fn upwind_v_flux(v: f64, f_minus: f64, f_plus: f64) -> f64 {
    if v >= 0.0 {
        v * f_minus
    } else {
        v * f_plus
    }
}

/// Per-cell description of `E` needed by the E-flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellFieldInfo {
    /// Cell average of `E`.
    pub p0: f64,
    pub sign: SignTag,
    pub omega_plus: f64,
    pub omega_minus: f64,
}

impl CellFieldInfo {
    pub fn from_coeffs(field_basis: &NodalBasis1D, e: &[f64]) -> Self {
        let p0: f64 = e.iter().zip(&field_basis.integrals).map(|(a, b)| a * b).sum();
        let beta = field_basis
            .bernstein_coefficients(e)
            .expect("field coefficients sized by the field basis");
        let sign = classify_bernstein(&beta).tag;
        let (omega_plus, omega_minus) = if sign == SignTag::Indeterminate {
            let ext = field_basis
                .cell_extrema_estimate(e)
                .expect("field coefficients sized by the field basis");
            weights(ext.sampled_max, ext.sampled_min)
        } else {
            (0.5, 0.5)
        };
        Self {
            p0,
            sign,
            omega_plus,
            omega_minus,
        }
    }

    /// Coefficients `(A, B)` with `Êf = A f⁺ + B f⁻` at a point where the
    /// field equals `e`.
    fn split(&self, e: f64, variant: FluxVariant, form: VlasovForm) -> (f64, f64) {
        let (toward, away) = match variant {
            FluxVariant::CellAverageSign => {
                if self.p0 >= 0.0 {
                    (e, 0.0)
                } else {
                    (0.0, e)
                }
            }
            FluxVariant::WeightedAverage => match self.sign {
                SignTag::Positive => (e, 0.0),
                SignTag::Negative => (0.0, e),
                SignTag::Indeterminate => (self.omega_plus * e, self.omega_minus * e),
            },
            FluxVariant::ProjectedNonConsistent => match self.sign {
                SignTag::Positive => (e, 0.0),
                SignTag::Negative => (0.0, e),
                SignTag::Indeterminate if self.p0 > 0.0 => (self.p0, 0.0),
                SignTag::Indeterminate if self.p0 < 0.0 => (0.0, self.p0),
                SignTag::Indeterminate => (0.0, 0.0),
            },
        };
        match form {
            // Characteristics move toward -v where E > 0: upwind is f⁺.
            VlasovForm::Periodic => (toward, away),
            // The diode field accelerates toward +v: upwind is f⁻.
            VlasovForm::Diode => (away, toward),
        }
    }
}

/// Weights from the extrema of `E`; the central average when both vanish.
pub fn weights(max: f64, min: f64) -> (f64, f64) {
    let denom = max.abs() + min.abs();
    if denom > 0.0 {
        (max.abs() / denom, min.abs() / denom)
    } else {
        (0.5, 0.5)
    }
}

/// E-flux at one point of a face normal to v, for the periodic form.
pub fn e_flux(
    e: f64,
    info: &CellFieldInfo,
    f_minus: f64,
    f_plus: f64,
    variant: FluxVariant,
) -> f64 {
    let (a, b) = info.split(e, variant, VlasovForm::Periodic);
    a * f_plus + b * f_minus
}

/// E-flux for the diode form.
pub fn e_flux_diode(
    e: f64,
    info: &CellFieldInfo,
    f_minus: f64,
    f_plus: f64,
    variant: FluxVariant,
) -> f64 {
    let (a, b) = info.split(e, variant, VlasovForm::Diode);
    a * f_plus + b * f_minus
}

/// Field data for one x-cell, sampled at the x Gauss points.
#[derive(Debug, Clone)]
struct CellField {
    e: Vec<f64>,
    up: Vec<f64>,
    down: Vec<f64>,
}

/// Field data for all x-cells and the three roles a field plays.
#[derive(Debug, Clone)]
pub struct FieldTable {
    tables: Vec<Vec<CellField>>,
    /// Table index for cells with `v > 0`, `v < 0`, and the face at `v = 0`.
    plus: usize,
    minus: usize,
    zero: usize,
}

/// Inflow data and forcing evaluated by the operator.
#[derive(Default, Clone, Copy)]
pub struct Sources<'a> {
    pub forcing: Option<&'a (dyn Fn(f64, f64, f64) -> f64 + Sync)>,
    /// Distribution entering at `x_lo` for `v > 0` (diode only).
    pub inflow: Option<&'a (dyn Fn(f64, f64) -> f64 + Sync)>,
}

/// Precomputed DG operator on one mesh.
#[derive(Debug, Clone)]
pub struct VlasovOperator {
    k: usize,
    n: usize,
    form: VlasovForm,
    variant: FluxVariant,
    mesh: PhaseMesh,
    basis: NodalBasis1D,
    field_basis: NodalBasis1D,
    wx: Vec<f64>,
    wv: Vec<f64>,
    bx: Vec<f64>,
    dx: Vec<f64>,
    bv: Vec<f64>,
    dv: Vec<f64>,
    /// Field nodal values to x Gauss points, `nqx x (k+2)`.
    ex: Vec<f64>,
    minv: nalgebra::DMatrix<f64>,
    /// Physical v at the v Gauss points of each v-cell.
    v_points: Vec<Vec<f64>>,
    /// Over-integration rule for the (non-polynomial) forcing.
    src_points: Vec<f64>,
    src_weights: Vec<f64>,
    src_table: Vec<f64>,
}

/// Gauss points in x: enough to integrate `E f φ` exactly with `E` of degree
/// `k + 1`.
pub fn x_quadrature_points(k: usize) -> usize {
    (k + 2).max((3 * k + 3) / 2)
}

impl VlasovOperator {
    pub fn new(mesh: &PhaseMesh, basis: &NodalBasis1D, form: VlasovForm, variant: FluxVariant) -> Result<Self> {
        match (form, mesh.periodic_x) {
            (VlasovForm::Periodic, false) => {
                return Err(Error::config("periodic Vlasov form needs a periodic mesh"))
            }
            (VlasovForm::Diode, true) => {
                return Err(Error::config("diode Vlasov form needs a bounded mesh"))
            }
            _ => {}
        }
        let k = basis.degree;
        let qx = gauss_quadrature(x_quadrature_points(k))?;
        let qv = gauss_quadrature(k + 2)?;
        let field_basis = NodalBasis1D::with_degree(k + 1)?;
        let qs = gauss_quadrature(projection_points(k))?;
        let v_points = (0..mesh.nv)
            .map(|j| qv.points.iter().map(|r| mesh.v_edges[j] + r * mesh.hv_cells[j]).collect())
            .collect();
        Ok(Self {
            k,
            n: k + 1,
            form,
            variant,
            mesh: mesh.clone(),
            basis: basis.clone(),
            bx: basis.value_table(&qx.points),
            dx: basis.derivative_table(&qx.points),
            bv: basis.value_table(&qv.points),
            dv: basis.derivative_table(&qv.points),
            ex: field_basis.value_table(&qx.points),
            field_basis,
            wx: qx.weights,
            wv: qv.weights,
            minv: basis.mass_inverse.clone(),
            v_points,
            src_table: basis.value_table(&qs.points),
            src_points: qs.points,
            src_weights: qs.weights,
        })
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn form(&self) -> VlasovForm {
        self.form
    }

    pub fn variant(&self) -> FluxVariant {
        self.variant
    }

    pub fn mesh(&self) -> &PhaseMesh {
        &self.mesh
    }

    pub fn basis(&self) -> &NodalBasis1D {
        &self.basis
    }

    fn cell_fields(&self, e: &[f64]) -> Vec<CellField> {
        let m = self.k + 2;
        let nqx = self.wx.len();
        (0..self.mesh.nx)
            .map(|i| {
                let coeffs = &e[i * m..(i + 1) * m];
                let info = CellFieldInfo::from_coeffs(&self.field_basis, coeffs);
                let mut cf = CellField {
                    e: vec![0.0; nqx],
                    up: vec![0.0; nqx],
                    down: vec![0.0; nqx],
                };
                for p in 0..nqx {
                    let ep: f64 = (0..m).map(|a| self.ex[p * m + a] * coeffs[a]).sum();
                    let (up, down) = info.split(ep, self.variant, self.form);
                    cf.e[p] = ep;
                    cf.up[p] = up;
                    cf.down[p] = down;
                }
                cf
            })
            .collect()
    }

    /// Samples a field for use by [`Self::rhs_into`].
    pub fn field_table(&self, field: &Field) -> FieldTable {
        match field {
            Field::Single(p) => FieldTable {
                tables: vec![self.cell_fields(&p.e)],
                plus: 0,
                minus: 0,
                zero: 0,
            },
            Field::Split { plus, minus } => FieldTable {
                tables: vec![
                    self.cell_fields(&plus.e),
                    self.cell_fields(&minus.e),
                    self.cell_fields(&field.e_average()),
                ],
                plus: 0,
                minus: 1,
                zero: 2,
            },
        }
    }

    /// Field table for a single field pair.
    pub fn field_table_single(&self, pair: &FieldPair) -> FieldTable {
        self.field_table(&Field::Single(pair.clone()))
    }

    /// `out = M⁻¹ L(f, E, t)`.
    pub fn rhs_into(&self, f: &Distribution, table: &FieldTable, t: f64, sources: Sources<'_>, out: &mut [f64]) {
        self.assemble(f, table, t, sources, out, true);
    }

    /// `out = L(f, E, t)` without the mass inverse: the residual tested against
    /// each nodal basis function.
    pub fn residual_into(&self, f: &Distribution, table: &FieldTable, t: f64, sources: Sources<'_>, out: &mut [f64]) {
        self.assemble(f, table, t, sources, out, false);
    }

    fn assemble(
        &self,
        f: &Distribution,
        table: &FieldTable,
        t: f64,
        sources: Sources<'_>,
        out: &mut [f64],
        invert: bool,
    ) {
        assert_eq!(f.degree, self.k, "distribution degree does not match operator");
        assert_eq!(f.coeffs.len(), out.len(), "output length mismatch");
        let column = self.mesh.nv * self.n * self.n;
        out.par_chunks_mut(column)
            .enumerate()
            .for_each_init(
                || Scratch::new(self.n, self.wx.len(), self.wv.len(), self.src_weights.len()),
                |scratch, (i, col)| {
                    for j in 0..self.mesh.nv {
                        let len = self.n * self.n;
                        let dst = &mut col[j * len..(j + 1) * len];
                        self.cell(f, table, t, sources, i, j, scratch, dst, invert);
                    }
                },
            );
    }

    #[allow(clippy::too_many_arguments)]
    fn cell(
        &self,
        f: &Distribution,
        table: &FieldTable,
        t: f64,
        sources: Sources<'_>,
        i: usize,
        j: usize,
        s: &mut Scratch,
        dst: &mut [f64],
        invert: bool,
    ) {
        let n = self.n;
        let nqx = self.wx.len();
        let nqv = self.wv.len();
        let mesh = &self.mesh;
        let (hx, hv) = (mesh.hx_cells[i], mesh.hv_cells[j]);
        let positive = mesh.v_positive(j);
        let diode = self.form == VlasovForm::Diode;
        let own = f.block(i, j);
        let field = &table.tables[if positive { table.plus } else { table.minus }][i];
        let vq = &self.v_points[j];

        // Values at the tensor Gauss points.
        for p in 0..nqx {
            for b in 0..n {
                let mut acc = 0.0;
                for a in 0..n {
                    acc += self.bx[p * n + a] * own[a * n + b];
                }
                s.tmp[p * n + b] = acc;
            }
        }
        for p in 0..nqx {
            let ep = field.e[p];
            let wxp = self.wx[p];
            for q in 0..nqv {
                let mut fpq = 0.0;
                for b in 0..n {
                    fpq += s.tmp[p * n + b] * self.bv[q * n + b];
                }
                let w = wxp * self.wv[q];
                s.g[p * nqv + q] = hv * w * vq[q] * fpq;
                let e_term = hx * w * ep * fpq;
                s.h[p * nqv + q] = if diode { e_term } else { -e_term };
            }
        }
        // R = Dxᵀ (G Bv) + Bxᵀ (H Dv + Q Bv)
        for p in 0..nqx {
            for d in 0..n {
                let mut u = 0.0;
                let mut w = 0.0;
                for q in 0..nqv {
                    u += s.g[p * nqv + q] * self.bv[q * n + d];
                    w += s.h[p * nqv + q] * self.dv[q * n + d];
                }
                s.u[p * n + d] = u;
                s.w[p * n + d] = w;
            }
        }
        for c in 0..n {
            for d in 0..n {
                let mut acc = 0.0;
                for p in 0..nqx {
                    acc += self.dx[p * n + c] * s.u[p * n + d] + self.bx[p * n + c] * s.w[p * n + d];
                }
                s.r[c * n + d] = acc;
            }
        }

        if let Some(psi) = sources.forcing {
            self.add_source(psi, i, j, t, s);
        }
        self.x_faces(f, i, j, positive, t, sources, s);
        self.v_faces(f, table, i, j, s);

        if invert {
            apply_mass_inverse(&self.minv, &s.r, dst, n, 1.0 / (hx * hv));
        } else {
            dst.copy_from_slice(&s.r);
        }
    }

    /// Contributions of the faces at `x_{i-1/2}` and `x_{i+1/2}`.
    #[allow(clippy::too_many_arguments)]
    fn x_faces(&self, f: &Distribution, i: usize, j: usize, positive: bool, t: f64, sources: Sources<'_>, s: &mut Scratch) {
        let n = self.n;
        let nqv = self.wv.len();
        let mesh = &self.mesh;
        let hv = mesh.hv_cells[j];
        let vq = &self.v_points[j];
        let nx = mesh.nx;
        let last = n - 1;

        // Traces at the v Gauss points: flux_right(q), flux_left(q).
        let trace = |block: &[f64], a: usize, q: usize| -> f64 {
            (0..n).map(|b| block[a * n + b] * self.bv[q * n + b]).sum()
        };
        let own = f.block(i, j);
        for q in 0..nqv {
            let v = vq[q];
            let (right, left) = if positive {
                let right = v * trace(own, last, q);
                let left = if i > 0 {
                    v * trace(f.block(i - 1, j), last, q)
                } else if mesh.periodic_x {
                    v * trace(f.block(nx - 1, j), last, q)
                } else {
                    sources.inflow.map_or(0.0, |g| v * g(v, t))
                };
                (right, left)
            } else {
                let right = if i + 1 < nx {
                    v * trace(f.block(i + 1, j), 0, q)
                } else if mesh.periodic_x {
                    v * trace(f.block(0, j), 0, q)
                } else {
                    0.0
                };
                (right, v * trace(own, 0, q))
            };
            s.face_r[q] = hv * self.wv[q] * right;
            s.face_l[q] = hv * self.wv[q] * left;
        }
        for d in 0..n {
            let mut r = 0.0;
            let mut l = 0.0;
            for q in 0..nqv {
                r += s.face_r[q] * self.bv[q * n + d];
                l += s.face_l[q] * self.bv[q * n + d];
            }
            s.r[last * n + d] -= r;
            s.r[d] += l;
        }
    }

    /// Contributions of the faces at `v_{j-1/2}` and `v_{j+1/2}`.
    fn v_faces(&self, f: &Distribution, table: &FieldTable, i: usize, j: usize, s: &mut Scratch) {
        let n = self.n;
        let nqx = self.wx.len();
        let mesh = &self.mesh;
        let hx = mesh.hx_cells[i];
        let last = n - 1;
        let zero = mesh.zero_edge();
        let sign = if self.form == VlasovForm::Diode { -1.0 } else { 1.0 };
        // Field role for the face at v-edge `edge`.
        let face_field = |edge: usize| -> &CellField {
            let idx = if edge == zero {
                table.zero
            } else if edge > zero {
                table.plus
            } else {
                table.minus
            };
            &table.tables[idx][i]
        };
        let trace = |block: &[f64], b: usize, p: usize| -> f64 {
            (0..n).map(|a| self.bx[p * n + a] * block[a * n + b]).sum()
        };
        let own = f.block(i, j);

        if j + 1 < mesh.nv {
            let above = f.block(i, j + 1);
            let cf = face_field(j + 1);
            for p in 0..nqx {
                let flux = cf.up[p] * trace(above, 0, p) + cf.down[p] * trace(own, last, p);
                s.face_r[p] = sign * hx * self.wx[p] * flux;
            }
            for c in 0..n {
                let acc: f64 = (0..nqx).map(|p| s.face_r[p] * self.bx[p * n + c]).sum();
                s.r[c * n + last] += acc;
            }
        }
        if j > 0 {
            let below = f.block(i, j - 1);
            let cf = face_field(j);
            for p in 0..nqx {
                let flux = cf.up[p] * trace(own, 0, p) + cf.down[p] * trace(below, last, p);
                s.face_l[p] = sign * hx * self.wx[p] * flux;
            }
            for c in 0..n {
                let acc: f64 = (0..nqx).map(|p| s.face_l[p] * self.bx[p * n + c]).sum();
                s.r[c * n] -= acc;
            }
        }
    }
}

impl VlasovOperator {
    /// `R += ∬ ψ φ_a φ_b` with the over-integration rule.
    fn add_source(&self, psi: &(dyn Fn(f64, f64, f64) -> f64 + Sync), i: usize, j: usize, t: f64, s: &mut Scratch) {
        let n = self.n;
        let nq = self.src_weights.len();
        let mesh = &self.mesh;
        let (x0, hx) = (mesh.x_edges[i], mesh.hx_cells[i]);
        let (v0, hv) = (mesh.v_edges[j], mesh.hv_cells[j]);
        for p in 0..nq {
            let x = x0 + hx * self.src_points[p];
            for b in 0..n {
                s.src[p * n + b] = 0.0;
            }
            for q in 0..nq {
                let w = hx * hv * self.src_weights[p] * self.src_weights[q] * psi(x, v0 + hv * self.src_points[q], t);
                for b in 0..n {
                    s.src[p * n + b] += w * self.src_table[q * n + b];
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                s.r[a * n + b] += (0..nq).map(|p| self.src_table[p * n + a] * s.src[p * n + b]).sum::<f64>();
            }
        }
    }
}

struct Scratch {
    tmp: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
    src: Vec<f64>,
    u: Vec<f64>,
    w: Vec<f64>,
    r: Vec<f64>,
    face_r: Vec<f64>,
    face_l: Vec<f64>,
}

impl Scratch {
    fn new(n: usize, nqx: usize, nqv: usize, nqs: usize) -> Self {
        let nq = nqx.max(nqv);
        Self {
            tmp: vec![0.0; nqx * n],
            g: vec![0.0; nqx * nqv],
            h: vec![0.0; nqx * nqv],
            src: vec![0.0; nqs * n],
            u: vec![0.0; nqx * n],
            w: vec![0.0; nqx * n],
            r: vec![0.0; n * n],
            face_r: vec![0.0; nq],
            face_l: vec![0.0; nq],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_nodal_basis;
    use crate::mesh::build_phase_mesh;

    #[test]
    fn upwind_examples() {
        assert_eq!(upwind_v_flux(2.0, 3.0, 7.0), 6.0);
        assert_eq!(upwind_v_flux(-2.0, 3.0, 7.0), -14.0);
        assert_eq!(upwind_v_flux(0.5, 2.0, 2.0), 1.0);
    }

    #[test]
    fn upwind_matches_average_form() {
        for &(v, fm, fp) in &[(0.3, 1.2, -0.7), (-1.5, 0.4, 2.2), (2.0, -3.0, 5.0)] {
            // ⟦f⟧ = f⁺ - f⁻
            let alt = 0.5 * (v * fm + v * fp) - 0.5 * f64::abs(v) * (fp - fm);
            assert!((upwind_v_flux(v, fm, fp) - alt).abs() < 1e-14);
        }
    }

    #[test]
    fn positive_field_takes_upper_trace() {
        let fb = NodalBasis1D::with_degree(3).unwrap();
        let info = CellFieldInfo::from_coeffs(&fb, &[4.0; 4]);
        assert_eq!(info.sign, SignTag::Positive);
        for variant in [
            FluxVariant::CellAverageSign,
            FluxVariant::WeightedAverage,
            FluxVariant::ProjectedNonConsistent,
        ] {
            assert_eq!(e_flux(4.0, &info, 1.0, 2.5, variant), 10.0);
            assert_eq!(e_flux_diode(4.0, &info, 1.0, 2.5, variant), 4.0);
        }
    }

    #[test]
    fn weighted_average_of_indeterminate_cell() {
        let fb = NodalBasis1D::with_degree(2).unwrap();
        let p = |r: f64| 5.0 * r * r - 4.0 * r + 0.81;
        let coeffs: Vec<f64> = fb.nodes.iter().map(|&r| p(r)).collect();
        let info = CellFieldInfo::from_coeffs(&fb, &coeffs);
        assert_eq!(info.sign, SignTag::Indeterminate);
        let ext = fb.cell_extrema_estimate(&coeffs).unwrap();
        let (wp, wm) = weights(ext.sampled_max, ext.sampled_min);
        assert!((info.omega_plus - wp).abs() < 1e-15);
        assert!((wp + wm - 1.0).abs() < 1e-15);
        assert!((ext.sampled_max - 1.81).abs() < 1e-12);
        let got = e_flux(2.0, &info, 1.0, 3.0, FluxVariant::WeightedAverage);
        assert!((got - (wp * 2.0 * 3.0 + wm * 2.0 * 1.0)).abs() < 1e-14);
    }

    #[test]
    fn degenerate_weights_fall_back_to_average() {
        assert_eq!(weights(0.0, 0.0), (0.5, 0.5));
    }

    #[test]
    fn projection_reproduces_constants() {
        let mesh = build_phase_mesh(3, 4, 0.0, 1.0, 1.0).unwrap();
        let basis = build_nodal_basis(2).unwrap();
        let f = project_initial(|_, _| 1.0, &mesh, &basis);
        assert!(f.coeffs.iter().all(|c| (c - 1.0).abs() < 1e-13));
    }

    #[test]
    fn projection_reproduces_bilinear() {
        let mesh = build_phase_mesh(3, 4, 0.0, 1.0, 1.0).unwrap();
        let basis = build_nodal_basis(1).unwrap();
        let f = project_initial(|x, v| x * v, &mesh, &basis);
        for &(x, v) in &[(0.1, 0.3), (0.5, -0.9), (0.95, 0.77)] {
            assert!((f.evaluate(&basis, &mesh, x, v) - x * v).abs() < 1e-13);
        }
    }

    #[test]
    fn x_rule_size() {
        assert_eq!(x_quadrature_points(1), 3);
        assert_eq!(x_quadrature_points(2), 4);
        assert_eq!(x_quadrature_points(3), 6);
        assert_eq!(x_quadrature_points(4), 7);
    }
}
