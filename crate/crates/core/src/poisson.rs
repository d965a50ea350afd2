//! Discretizations of the first-order Poisson system `E = Φ_x`.
//!
//! Periodic problems solve `-E_x = ρ - background` with the gauge `Φ(x_lo) = 0`;
//! the diode solves `E_x = ρ` with `Φ(x_lo) = 0`, `Φ(x_hi) = λ`. Every flavor
//! assembles one small dense system per branch and factors it once.
//!
//! Fields are stored as degree `k + 1` nodal values on the Gauss-Lobatto nodes
//! of each x-cell, whatever the flavor.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::basis::NodalBasis1D;
use crate::error::{Error, Result};
use crate::mesh::PhaseMesh;
use crate::vlasov::Distribution;

/// Multiplier `c` in the jump penalty `c11 = c (k+1)^2 / h_x`.
///
/// With `c = 2` the conserved quantity `½∫E² + ½c11 Σ⟦Φ⟧²` carries exactly the
/// `(k+1)^2 / h_x` weight used by the energy diagnostic.
pub const PENALTY_CONSTANT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoissonFlavor {
    /// Continuous field, discontinuous degree-`k` potential.
    Rt,
    /// Local DG with a fixed `c12 = 1/2`.
    Ldg,
    /// Local DG with velocity-dependent fluxes, one solve per sign of `v`.
    LdgV,
}

impl std::str::FromStr for PoissonFlavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rt" => Ok(Self::Rt),
            "ldg" => Ok(Self::Ldg),
            "ldgv" | "ldg-v" | "ldg(v)" => Ok(Self::LdgV),
            other => Err(Error::config(format!("unknown Poisson flavor '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Rt,
    Ldg,
    LdgVPlus,
    LdgVMinus,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoissonBoundary {
    Periodic,
    /// `Φ(x_lo) = 0` and `Φ(x_hi) = λ`, no background charge.
    Dirichlet,
}

/// Charge density on the x-mesh, degree `k` nodal per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub degree: usize,
    pub nx: usize,
    pub coeffs: Vec<f64>,
    pub t: f64,
}

impl DensityField {
    pub fn cell(&self, i: usize) -> &[f64] {
        let n = self.degree + 1;
        &self.coeffs[i * n..(i + 1) * n]
    }

    /// `∫ ρ dx`, exact for the piecewise polynomial.
    pub fn integral(&self, basis: &NodalBasis1D, mesh: &PhaseMesh) -> f64 {
        (0..self.nx)
            .map(|i| {
                let cell: f64 = self
                    .cell(i)
                    .iter()
                    .zip(&basis.integrals)
                    .map(|(r, w)| r * w)
                    .sum();
                cell * mesh.hx_cells[i]
            })
            .sum()
    }
}

/// `ρ_h(x) = ∫ f_h(x, v) dv`, integrated exactly cell by cell.
pub fn compute_density(f: &Distribution, basis: &NodalBasis1D, mesh: &PhaseMesh) -> DensityField {
    let n = f.degree + 1;
    let mut coeffs = vec![0.0; mesh.nx * n];
    for i in 0..mesh.nx {
        let out = &mut coeffs[i * n..(i + 1) * n];
        for j in 0..mesh.nv {
            let hv = mesh.hv_cells[j];
            let block = f.block(i, j);
            for a in 0..n {
                let row = &block[a * n..(a + 1) * n];
                let s: f64 = row.iter().zip(&basis.integrals).map(|(c, w)| c * w).sum();
                out[a] += hv * s;
            }
        }
    }
    DensityField {
        degree: f.degree,
        nx: mesh.nx,
        coeffs,
        t: 0.0,
    }
}

/// Electric field and potential on the x-mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub kind: FieldKind,
    /// Storage degree of both `E` and `Φ`; `k + 1`.
    pub degree: usize,
    /// `E` nodal values, `degree + 1` per cell.
    pub e: Vec<f64>,
    /// `Φ` nodal values, `degree + 1` per cell.
    pub phi: Vec<f64>,
    /// `⟦Φ⟧ = Φ⁺ - Φ⁻` at every interface carrying a penalty: `Nx` periodic
    /// interfaces, or `Nx + 1` for the Dirichlet problem (boundaries included).
    pub jumps: Vec<f64>,
    pub c11: f64,
    /// Cell widths of the x-mesh.
    pub hx_cells: Vec<f64>,
}

impl FieldPair {
    pub fn nodes_per_cell(&self) -> usize {
        self.degree + 1
    }

    pub fn e_cell(&self, i: usize) -> &[f64] {
        let m = self.nodes_per_cell();
        &self.e[i * m..(i + 1) * m]
    }

    pub fn phi_cell(&self, i: usize) -> &[f64] {
        let m = self.nodes_per_cell();
        &self.phi[i * m..(i + 1) * m]
    }

    /// `∫ E dx`.
    pub fn e_integral(&self, field_basis: &NodalBasis1D) -> f64 {
        (0..self.hx_cells.len())
            .map(|i| {
                let s: f64 = self
                    .e_cell(i)
                    .iter()
                    .zip(&field_basis.integrals)
                    .map(|(e, w)| e * w)
                    .sum();
                s * self.hx_cells[i]
            })
            .sum()
    }

    /// `∫ E² dx`.
    pub fn e_l2_squared(&self, field_basis: &NodalBasis1D) -> f64 {
        l2_squared(&self.e, &self.hx_cells, field_basis)
    }

    /// `((k+1)^2 / h_x) Σ ⟦Φ⟧²` with `k` the distribution degree.
    pub fn penalty(&self) -> f64 {
        let k1 = self.degree as f64; // (k + 1)
        let hx = self.hx_cells.iter().copied().fold(0.0, f64::max);
        k1 * k1 / hx * self.jumps.iter().map(|j| j * j).sum::<f64>()
    }
}

pub(crate) fn l2_squared(values: &[f64], hx_cells: &[f64], basis: &NodalBasis1D) -> f64 {
    let m = basis.len();
    let mut total = 0.0;
    for (i, &h) in hx_cells.iter().enumerate() {
        let u = &values[i * m..(i + 1) * m];
        let mut s = 0.0;
        for a in 0..m {
            for c in 0..m {
                s += u[a] * basis.mass[(a, c)] * u[c];
            }
        }
        total += h * s;
    }
    total
}

/// Output of a Poisson solve.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Single(FieldPair),
    /// Velocity-split fields: `plus` drives cells with `v > 0`, `minus` cells
    /// with `v < 0`.
    Split { plus: FieldPair, minus: FieldPair },
}

impl Field {
    pub fn plus(&self) -> &FieldPair {
        match self {
            Field::Single(p) => p,
            Field::Split { plus, .. } => plus,
        }
    }

    pub fn minus(&self) -> &FieldPair {
        match self {
            Field::Single(p) => p,
            Field::Split { minus, .. } => minus,
        }
    }

    pub fn is_split(&self) -> bool {
        matches!(self, Field::Split { .. })
    }

    /// Nodal values of the field seen at `v = 0`: the branch average.
    pub fn e_average(&self) -> Vec<f64> {
        match self {
            Field::Single(p) => p.e.clone(),
            Field::Split { plus, minus } => plus
                .e
                .iter()
                .zip(&minus.e)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        }
    }
}

struct Branch {
    kind: FieldKind,
    /// `Φ̂ = (½ + c12) Φ⁻ + (½ - c12) Φ⁺`; unused by the RT flavor.
    c12: f64,
    lu: LU<f64, Dyn, Dyn>,
}

/// Factorized Poisson discretization bound to one mesh and degree.
pub struct PoissonSolver {
    flavor: PoissonFlavor,
    boundary: PoissonBoundary,
    k: usize,
    nx: usize,
    hx_cells: Vec<f64>,
    c11: f64,
    field_basis: NodalBasis1D,
    rho_basis: NodalBasis1D,
    /// `∫ l^k_b l^{k+1}_c` on `[0, 1]`.
    mixed_mass: DMatrix<f64>,
    /// `∫ l_a l_c'` for the field basis.
    stiffness: DMatrix<f64>,
    branches: Vec<Branch>,
}

impl std::fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSolver")
            .field("flavor", &self.flavor)
            .field("boundary", &self.boundary)
            .field("k", &self.k)
            .field("nx", &self.nx)
            .field("c11", &self.c11)
            .finish()
    }
}

/// `c12` of the LDG(v) branch that drives `v > 0`. Energy conservation needs
/// `Φ̂ = Φ⁺` and `Ê = E⁻ + c11⟦Φ⟧` there, the dual of the upwind current.
const C12_V_POSITIVE: f64 = -0.5;
/// `c12` of the classic LDG solver.
const C12_CLASSIC: f64 = 0.5;

impl PoissonSolver {
    pub fn new(
        mesh: &PhaseMesh,
        k: usize,
        flavor: PoissonFlavor,
        boundary: PoissonBoundary,
    ) -> Result<Self> {
        let periodic = boundary == PoissonBoundary::Periodic;
        if periodic != mesh.periodic_x {
            return Err(Error::config(
                "Poisson boundary kind does not match the mesh topology",
            ));
        }
        if flavor == PoissonFlavor::Rt && !periodic {
            return Err(Error::config(
                "the RT Poisson flavor supports periodic problems only",
            ));
        }
        let rho_basis = crate::basis::build_nodal_basis(k)?;
        let field_basis = NodalBasis1D::with_degree(k + 1)?;
        let hx = mesh.hx;
        let c11 = PENALTY_CONSTANT * ((k + 1) * (k + 1)) as f64 / hx;

        let m = k + 2;
        let mut mixed_mass = DMatrix::zeros(k + 1, m);
        let mut stiffness = DMatrix::zeros(m, m);
        let fq = &field_basis.quad;
        for (&r, &w) in fq.points.iter().zip(&fq.weights) {
            let lk = rho_basis.values(r);
            let l = field_basis.values(r);
            let dl = field_basis.derivatives(r);
            for b in 0..=k {
                for c in 0..m {
                    mixed_mass[(b, c)] += w * lk[b] * l[c];
                }
            }
            for a in 0..m {
                for c in 0..m {
                    stiffness[(a, c)] += w * l[a] * dl[c];
                }
            }
        }

        let mut solver = Self {
            flavor,
            boundary,
            k,
            nx: mesh.nx,
            hx_cells: mesh.hx_cells.clone(),
            c11,
            field_basis,
            rho_basis,
            mixed_mass,
            stiffness,
            branches: Vec::new(),
        };
        let specs: Vec<(FieldKind, f64)> = match (flavor, boundary) {
            (PoissonFlavor::Rt, _) => vec![(FieldKind::Rt, 0.0)],
            (PoissonFlavor::Ldg, PoissonBoundary::Periodic) => vec![(FieldKind::Ldg, C12_CLASSIC)],
            (PoissonFlavor::Ldg, PoissonBoundary::Dirichlet) => {
                vec![(FieldKind::Dirichlet, C12_CLASSIC)]
            }
            (PoissonFlavor::LdgV, PoissonBoundary::Periodic) => vec![
                (FieldKind::LdgVPlus, C12_V_POSITIVE),
                (FieldKind::LdgVMinus, -C12_V_POSITIVE),
            ],
            (PoissonFlavor::LdgV, PoissonBoundary::Dirichlet) => vec![
                (FieldKind::Dirichlet, C12_V_POSITIVE),
                (FieldKind::Dirichlet, -C12_V_POSITIVE),
            ],
        };
        for (kind, c12) in specs {
            let matrix = match flavor {
                PoissonFlavor::Rt => solver.assemble_rt(),
                _ => solver.assemble_ldg(c12),
            };
            let lu = matrix.lu();
            if !lu.is_invertible() {
                return Err(Error::config("singular Poisson system"));
            }
            solver.branches.push(Branch { kind, c12, lu });
        }
        Ok(solver)
    }

    pub fn flavor(&self) -> PoissonFlavor {
        self.flavor
    }

    pub fn boundary(&self) -> PoissonBoundary {
        self.boundary
    }

    pub fn c11(&self) -> f64 {
        self.c11
    }

    /// Degree `k + 1` basis in which fields are stored.
    pub fn field_basis(&self) -> &NodalBasis1D {
        &self.field_basis
    }

    fn m(&self) -> usize {
        self.k + 2
    }

    fn ldg_size(&self) -> usize {
        let n = self.nx * 2 * self.m();
        match self.boundary {
            PoissonBoundary::Periodic => n + 1,
            PoissonBoundary::Dirichlet => n,
        }
    }

    fn e_idx(&self, i: usize, a: usize) -> usize {
        i * 2 * self.m() + a
    }

    fn phi_idx(&self, i: usize, a: usize) -> usize {
        i * 2 * self.m() + self.m() + a
    }

    /// Unknowns per cell `[E_0..E_{m-1}, Φ_0..Φ_{m-1}]`; rows per cell are the
    /// `z = l_c` equations followed by the `p = l_c` equations.
    fn assemble_ldg(&self, c12: f64) -> DMatrix<f64> {
        let m = self.m();
        let nx = self.nx;
        let size = self.ldg_size();
        let mut a = DMatrix::zeros(size, size);
        let mass = &self.field_basis.mass;
        let s = &self.stiffness;
        for i in 0..nx {
            let h = self.hx_cells[i];
            for c in 0..m {
                let row_a = self.e_idx(i, c);
                let row_b = self.phi_idx(i, c);
                for b in 0..m {
                    a[(row_a, self.e_idx(i, b))] += h * mass[(b, c)];
                    a[(row_a, self.phi_idx(i, b))] += s[(b, c)];
                    a[(row_b, self.e_idx(i, b))] += s[(b, c)];
                }
            }
        }
        let (w_minus, w_plus) = (0.5 + c12, 0.5 - c12);
        let interfaces = match self.boundary {
            PoissonBoundary::Periodic => nx,
            PoissonBoundary::Dirichlet => nx - 1,
        };
        for left in 0..interfaces {
            let right = (left + 1) % nx;
            let last = m - 1;
            let (pm, pp) = (self.phi_idx(left, last), self.phi_idx(right, 0));
            let (em, ep) = (self.e_idx(left, last), self.e_idx(right, 0));
            // Φ̂ enters the z-equations of both neighbors.
            let row_l = self.e_idx(left, last);
            let row_r = self.e_idx(right, 0);
            a[(row_l, pm)] -= w_minus;
            a[(row_l, pp)] -= w_plus;
            a[(row_r, pm)] += w_minus;
            a[(row_r, pp)] += w_plus;
            // Ê = w_plus E⁻ + w_minus E⁺ + c11 (Φ⁺ - Φ⁻).
            let row_l = self.phi_idx(left, last);
            let row_r = self.phi_idx(right, 0);
            for (row, sign) in [(row_l, -1.0), (row_r, 1.0)] {
                a[(row, em)] += sign * w_plus;
                a[(row, ep)] += sign * w_minus;
                a[(row, pp)] += sign * self.c11;
                a[(row, pm)] -= sign * self.c11;
            }
        }
        match self.boundary {
            PoissonBoundary::Periodic => self.border(&mut a),
            PoissonBoundary::Dirichlet => {
                // x_lo: Φ̂ = 0, Ê = E⁺ + c11 Φ⁺.
                let row = self.phi_idx(0, 0);
                a[(row, self.e_idx(0, 0))] += 1.0;
                a[(row, self.phi_idx(0, 0))] += self.c11;
                // x_hi: Φ̂ = λ, Ê = E⁻ + c11 (λ - Φ⁻); λ terms live in the rhs.
                let last = m - 1;
                let row = self.phi_idx(nx - 1, last);
                a[(row, self.e_idx(nx - 1, last))] -= 1.0;
                a[(row, self.phi_idx(nx - 1, last))] += self.c11;
            }
        }
        a
    }

    /// Appends the gauge row and the left-null-vector column that make the
    /// singular periodic system invertible.
    fn border(&self, a: &mut DMatrix<f64>) {
        let n = a.nrows() - 1;
        let gauge_col = match self.flavor {
            PoissonFlavor::Rt => self.rt_e_dofs(),
            _ => self.phi_idx(0, 0),
        };
        a[(n, gauge_col)] = 1.0;
        for row in self.charge_rows() {
            a[(row, n)] = 1.0;
        }
    }

    /// Rows whose sum is the total charge balance.
    fn charge_rows(&self) -> Vec<usize> {
        match self.flavor {
            PoissonFlavor::Rt => {
                let ne = self.rt_e_dofs();
                (ne..2 * ne).collect()
            }
            _ => (0..self.nx)
                .flat_map(|i| (0..self.m()).map(move |c| (i, c)))
                .map(|(i, c)| self.phi_idx(i, c))
                .collect(),
        }
    }

    fn rt_e_dofs(&self) -> usize {
        self.nx * (self.k + 1)
    }

    fn rt_e_idx(&self, i: usize, a: usize) -> usize {
        (i * (self.k + 1) + a) % self.rt_e_dofs()
    }

    fn rt_phi_idx(&self, i: usize, b: usize) -> usize {
        self.rt_e_dofs() + i * (self.k + 1) + b
    }

    fn assemble_rt(&self) -> DMatrix<f64> {
        let m = self.m();
        let k1 = self.k + 1;
        let n = 2 * self.rt_e_dofs() + 1;
        let mut a = DMatrix::zeros(n, n);
        let mass = &self.field_basis.mass;
        // coupling[(b, c)] = ∫ l^k_b (l^{k+1}_c)'
        let mut coupling = DMatrix::<f64>::zeros(k1, m);
        let fq = &self.field_basis.quad;
        for (&r, &w) in fq.points.iter().zip(&fq.weights) {
            let lk = self.rho_basis.values(r);
            let dl = self.field_basis.derivatives(r);
            for b in 0..k1 {
                for c in 0..m {
                    coupling[(b, c)] += w * lk[b] * dl[c];
                }
            }
        }
        for i in 0..self.nx {
            let h = self.hx_cells[i];
            for c in 0..m {
                let row = self.rt_e_idx(i, c);
                for b in 0..m {
                    a[(row, self.rt_e_idx(i, b))] += h * mass[(b, c)];
                }
                for b in 0..k1 {
                    a[(row, self.rt_phi_idx(i, b))] += coupling[(b, c)];
                }
            }
            for c in 0..k1 {
                let row = self.rt_phi_idx(i, c);
                for b in 0..m {
                    a[(row, self.rt_e_idx(i, b))] -= coupling[(c, b)];
                }
            }
        }
        self.border(&mut a);
        a
    }

    fn check_density(&self, rho: &DensityField) -> Result<()> {
        if rho.degree != self.k || rho.nx != self.nx {
            return Err(Error::config(format!(
                "density of degree {} on {} cells does not match solver (degree {}, {} cells)",
                rho.degree, rho.nx, self.k, self.nx
            )));
        }
        Ok(())
    }

    /// Fails unless `∫ (ρ - background) dx` vanishes to `1e-10` relative.
    pub fn check_neutrality(&self, rho: &DensityField, background: f64) -> Result<()> {
        let length: f64 = self.hx_cells.iter().sum();
        let total = self.rho_integral(rho);
        let net = total - background * length;
        let tol = 1e-10 * total.abs().max((background * length).abs()).max(f64::MIN_POSITIVE);
        if net.abs() > tol {
            return Err(Error::ChargeNeutrality { net, tol });
        }
        Ok(())
    }

    fn rho_integral(&self, rho: &DensityField) -> f64 {
        (0..self.nx)
            .map(|i| {
                let s: f64 = rho
                    .cell(i)
                    .iter()
                    .zip(&self.rho_basis.integrals)
                    .map(|(r, w)| r * w)
                    .sum();
                s * self.hx_cells[i]
            })
            .sum()
    }

    /// Solves the configured problem. `background` is ignored for Dirichlet
    /// problems and `lambda` for periodic ones.
    pub fn solve(&self, rho: &DensityField, background: f64, lambda: f64) -> Result<Field> {
        self.check_density(rho)?;
        if self.boundary == PoissonBoundary::Periodic {
            self.check_neutrality(rho, background)?;
        }
        let mut pairs: Vec<FieldPair> = self
            .branches
            .iter()
            .map(|b| self.solve_branch(b, rho, background, lambda))
            .collect();
        if pairs.len() == 1 {
            Ok(Field::Single(pairs.pop().expect("one branch")))
        } else {
            let minus = pairs.pop().expect("two branches");
            let plus = pairs.pop().expect("two branches");
            Ok(Field::Split { plus, minus })
        }
    }

    /// Periodic RT or classic LDG solve.
    pub fn solve_periodic(&self, rho: &DensityField, background: f64) -> Result<FieldPair> {
        if self.boundary != PoissonBoundary::Periodic || self.flavor == PoissonFlavor::LdgV {
            return Err(Error::config(
                "solve_periodic needs a periodic RT or LDG solver",
            ));
        }
        match self.solve(rho, background, 0.0)? {
            Field::Single(p) => Ok(p),
            Field::Split { .. } => unreachable!("single-branch flavor"),
        }
    }

    /// Periodic LDG(v) solve: `(field for v > 0, field for v < 0)`.
    pub fn solve_ldg_v(&self, rho: &DensityField, background: f64) -> Result<(FieldPair, FieldPair)> {
        if self.boundary != PoissonBoundary::Periodic || self.flavor != PoissonFlavor::LdgV {
            return Err(Error::config("solve_ldg_v needs a periodic LDG(v) solver"));
        }
        match self.solve(rho, background, 0.0)? {
            Field::Split { plus, minus } => Ok((plus, minus)),
            Field::Single(_) => unreachable!("split flavor"),
        }
    }

    /// Dirichlet solve with the first configured branch.
    pub fn solve_dirichlet(&self, rho: &DensityField, lambda: f64) -> Result<FieldPair> {
        if self.boundary != PoissonBoundary::Dirichlet {
            return Err(Error::config("solve_dirichlet needs a Dirichlet solver"));
        }
        self.check_density(rho)?;
        Ok(self.solve_branch(&self.branches[0], rho, 0.0, lambda))
    }

    fn load(&self, rho: &DensityField, background: f64) -> Vec<Vec<f64>> {
        // h ∫ (ρ - bg) l_c for every field test function l_c.
        let m = self.m();
        (0..self.nx)
            .map(|i| {
                let h = self.hx_cells[i];
                let r = rho.cell(i);
                (0..m)
                    .map(|c| {
                        let s: f64 = (0..=self.k).map(|b| r[b] * self.mixed_mass[(b, c)]).sum();
                        h * (s - background * self.field_basis.integrals[c])
                    })
                    .collect()
            })
            .collect()
    }

    fn solve_branch(&self, branch: &Branch, rho: &DensityField, background: f64, lambda: f64) -> FieldPair {
        match self.flavor {
            PoissonFlavor::Rt => self.solve_rt(branch, rho, background),
            _ => self.solve_ldg(branch, rho, background, lambda),
        }
    }

    fn solve_ldg(&self, branch: &Branch, rho: &DensityField, background: f64, lambda: f64) -> FieldPair {
        let m = self.m();
        let nx = self.nx;
        let mut rhs = DVector::zeros(self.ldg_size());
        let dirichlet = self.boundary == PoissonBoundary::Dirichlet;
        let load = self.load(rho, if dirichlet { 0.0 } else { background });
        for (i, cell) in load.iter().enumerate() {
            for (c, &val) in cell.iter().enumerate() {
                // -E_x = ρ - bg periodic; E_x = ρ for the diode.
                rhs[self.phi_idx(i, c)] = if dirichlet { -val } else { val };
            }
        }
        if dirichlet {
            rhs[self.e_idx(nx - 1, m - 1)] += lambda;
            rhs[self.phi_idx(nx - 1, m - 1)] += self.c11 * lambda;
        }
        let sol = branch.lu.solve(&rhs).expect("factorization checked at construction");
        let mut e = vec![0.0; nx * m];
        let mut phi = vec![0.0; nx * m];
        for i in 0..nx {
            for a in 0..m {
                e[i * m + a] = sol[self.e_idx(i, a)];
                phi[i * m + a] = sol[self.phi_idx(i, a)];
            }
        }
        let jumps = self.jumps(&phi, dirichlet.then_some(lambda));
        FieldPair {
            kind: branch.kind,
            degree: self.k + 1,
            e,
            phi,
            jumps,
            c11: self.c11,
            hx_cells: self.hx_cells.clone(),
        }
    }

    fn solve_rt(&self, branch: &Branch, rho: &DensityField, background: f64) -> FieldPair {
        let m = self.m();
        let k1 = self.k + 1;
        let nx = self.nx;
        let ne = self.rt_e_dofs();
        let mut rhs = DVector::zeros(2 * ne + 1);
        for i in 0..nx {
            let h = self.hx_cells[i];
            let r = rho.cell(i);
            for c in 0..k1 {
                let s: f64 = (0..k1).map(|b| r[b] * self.rho_basis.mass[(b, c)]).sum();
                rhs[self.rt_phi_idx(i, c)] = h * (s - background * self.rho_basis.integrals[c]);
            }
        }
        let sol = branch.lu.solve(&rhs).expect("factorization checked at construction");
        let mut e = vec![0.0; nx * m];
        let mut phi = vec![0.0; nx * m];
        // Degree-k potential re-expressed on the degree k+1 nodes.
        let interp: Vec<Vec<f64>> = self
            .field_basis
            .nodes
            .iter()
            .map(|&r| self.rho_basis.values(r))
            .collect();
        for i in 0..nx {
            for a in 0..m {
                e[i * m + a] = sol[self.rt_e_idx(i, a)];
                phi[i * m + a] = (0..k1)
                    .map(|b| interp[a][b] * sol[self.rt_phi_idx(i, b)])
                    .sum();
            }
        }
        let jumps = self.jumps(&phi, None);
        FieldPair {
            kind: branch.kind,
            degree: self.k + 1,
            e,
            phi,
            jumps,
            c11: self.c11,
            hx_cells: self.hx_cells.clone(),
        }
    }

    fn jumps(&self, phi: &[f64], lambda: Option<f64>) -> Vec<f64> {
        let m = self.m();
        let nx = self.nx;
        let first = |i: usize| phi[i * m];
        let last = |i: usize| phi[i * m + m - 1];
        match lambda {
            None => (0..nx).map(|i| first((i + 1) % nx) - last(i)).collect(),
            Some(lambda) => {
                let mut j = Vec::with_capacity(nx + 1);
                j.push(first(0));
                j.extend((0..nx - 1).map(|i| first(i + 1) - last(i)));
                j.push(lambda - last(nx - 1));
                j
            }
        }
    }

    /// `c12` of each branch, in branch order.
    pub fn branch_c12(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.c12).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_diode_mesh, build_phase_mesh};

    fn density(k: usize, mesh: &PhaseMesh, rho: impl Fn(f64) -> f64) -> DensityField {
        // Interpolation at the nodes; exact for polynomials of degree <= k.
        let b = crate::basis::build_nodal_basis(k).unwrap();
        let mut coeffs = Vec::new();
        for i in 0..mesh.nx {
            for &r in &b.nodes {
                coeffs.push(rho(mesh.x_edges[i] + r * mesh.hx_cells[i]));
            }
        }
        DensityField {
            degree: k,
            nx: mesh.nx,
            coeffs,
            t: 0.0,
        }
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn uniform_density_gives_zero_field() {
        let mesh = build_phase_mesh(6, 2, 0.0, 1.0, 1.0).unwrap();
        for flavor in [PoissonFlavor::Rt, PoissonFlavor::Ldg, PoissonFlavor::LdgV] {
            let s = PoissonSolver::new(&mesh, 2, flavor, PoissonBoundary::Periodic).unwrap();
            let rho = density(2, &mesh, |_| 1.0);
            let field = s.solve(&rho, 1.0, 0.0).unwrap();
            for pair in [field.plus(), field.minus()] {
                assert!(max_abs(&pair.e) < 1e-13, "{flavor:?}");
                assert!(max_abs(&pair.phi) < 1e-13, "{flavor:?}");
            }
        }
    }

    #[test]
    fn non_neutral_density_is_rejected() {
        let mesh = build_phase_mesh(4, 2, 0.0, 1.0, 1.0).unwrap();
        let s = PoissonSolver::new(&mesh, 1, PoissonFlavor::Ldg, PoissonBoundary::Periodic).unwrap();
        let rho = density(1, &mesh, |_| 1.1);
        assert!(matches!(
            s.solve(&rho, 1.0, 0.0),
            Err(Error::ChargeNeutrality { .. })
        ));
    }

    #[test]
    fn dirichlet_zero_and_constant() {
        let mesh = build_diode_mesh(5, 2, 0.0, 1.0, 1.0).unwrap();
        let s = PoissonSolver::new(&mesh, 2, PoissonFlavor::Ldg, PoissonBoundary::Dirichlet).unwrap();
        let zero = density(2, &mesh, |_| 0.0);
        let p = s.solve_dirichlet(&zero, 0.0).unwrap();
        assert!(max_abs(&p.e) < 1e-14 && max_abs(&p.phi) < 1e-14);

        let p = s.solve_dirichlet(&zero, 1.7).unwrap();
        let fb = s.field_basis();
        for i in 0..mesh.nx {
            for (a, &r) in fb.nodes.iter().enumerate() {
                let x = mesh.x_edges[i] + r * mesh.hx_cells[i];
                assert!((p.e_cell(i)[a] - 1.7).abs() < 1e-12);
                assert!((p.phi_cell(i)[a] - 1.7 * x).abs() < 1e-12);
            }
        }
        assert!(max_abs(&p.jumps) < 1e-12);
    }

    #[test]
    fn rt_field_is_continuous() {
        let mesh = build_phase_mesh(7, 2, 0.0, 1.0, 1.0).unwrap();
        let s = PoissonSolver::new(&mesh, 2, PoissonFlavor::Rt, PoissonBoundary::Periodic).unwrap();
        let rho = density(2, &mesh, |x| 1.0 + (2.0 * std::f64::consts::PI * x).cos());
        let bg = rho.integral(&crate::basis::build_nodal_basis(2).unwrap(), &mesh);
        let p = s.solve_periodic(&rho, bg).unwrap();
        let m = p.nodes_per_cell();
        for i in 0..mesh.nx {
            let next = (i + 1) % mesh.nx;
            assert!((p.e[i * m + m - 1] - p.e[next * m]).abs() < 1e-12);
        }
        assert!(p.phi[0].abs() < 1e-14);
    }

    #[test]
    fn c12_pairing() {
        let mesh = build_phase_mesh(4, 2, 0.0, 1.0, 1.0).unwrap();
        let s = PoissonSolver::new(&mesh, 2, PoissonFlavor::LdgV, PoissonBoundary::Periodic).unwrap();
        assert_eq!(s.branch_c12(), vec![-0.5, 0.5]);
    }
}
