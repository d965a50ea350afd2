//! Reference-interval polynomial machinery.
//!
//! Everything here lives on `[0, 1]`: Gauss-Legendre quadrature, the
//! Gauss-Lobatto nodal Lagrange basis with its local mass and differentiation
//! operators, and the Lagrange-to-Bernstein change of basis used to certify
//! the sign of a polynomial on a cell without locating its roots.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest polynomial degree accepted for the distribution function.
pub const MAX_DEGREE: usize = 12;
/// Largest number of Gauss points.
pub const MAX_QUADRATURE_POINTS: usize = 20;

/// Gauss-Legendre rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// Integrates `g` over `[0, 1]`.
    pub fn integrate(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| w * g(r))
            .sum()
    }
}

/// Evaluates the Legendre polynomials `P_n(x)` and `P_{n-1}(x)` on `[-1, 1]`.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut prev, mut cur) = (1.0, x);
    for m in 2..=n {
        let m = m as f64;
        let next = ((2.0 * m - 1.0) * x * cur - (m - 1.0) * prev) / m;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Gauss-Legendre rule with `n` points, exact for polynomials of degree `2n - 1`.
pub fn gauss_quadrature(n: usize) -> Result<Quadrature> {
    if !(1..=MAX_QUADRATURE_POINTS).contains(&n) {
        return Err(Error::config(format!(
            "quadrature order {n} outside 1..={MAX_QUADRATURE_POINTS}"
        )));
    }
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n {
        // Roots come out in decreasing order; store them increasing.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, pm1) = legendre_pair(n, x);
            dp = nf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, pm1) = legendre_pair(n, x);
        dp = if (x * x - 1.0).abs() > 0.0 {
            nf * (x * p - pm1) / (x * x - 1.0)
        } else {
            dp
        };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    Ok(Quadrature { points, weights })
}

/// Gauss-Lobatto points of a degree-`k` basis, mapped to `[0, 1]`.
fn gauss_lobatto_nodes(k: usize) -> Vec<f64> {
    let mut nodes = vec![0.0; k + 1];
    let kf = k as f64;
    for (i, node) in nodes.iter_mut().enumerate() {
        let mut x = -(std::f64::consts::PI * i as f64 / kf).cos();
        for _ in 0..100 {
            let (p, pm1) = legendre_pair(k, x);
            let dx = (x * p - pm1) / ((kf + 1.0) * p);
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        *node = 0.5 * (x + 1.0);
    }
    nodes[0] = 0.0;
    nodes[k] = 1.0;
    nodes
}

/// Evaluates all degree-`k` Bernstein polynomials at `r` with the
/// `B_n^k = (1 - r) B_n^{k-1} + r B_{n-1}^{k-1}` recurrence.
pub fn bernstein_values(k: usize, r: f64) -> Vec<f64> {
    let mut b = vec![0.0; k + 1];
    b[0] = 1.0;
    for d in 1..=k {
        for n in (0..=d).rev() {
            let left = if n > 0 { b[n - 1] } else { 0.0 };
            b[n] = (1.0 - r) * b[n] + r * left;
        }
    }
    b
}

/// Sign certificate for a polynomial on the reference interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignTag {
    Positive,
    Negative,
    Indeterminate,
}

/// Outcome of [`NodalBasis1D::classify_cell_sign`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignClass {
    pub tag: SignTag,
    /// Smallest Bernstein coefficient; a lower bound on the polynomial.
    pub hull_min: f64,
    /// Largest Bernstein coefficient; an upper bound on the polynomial.
    pub hull_max: f64,
}

impl SignClass {
    pub fn is_definite(&self) -> bool {
        self.tag != SignTag::Indeterminate
    }
}

/// Range information for a polynomial on the reference interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremaEstimate {
    pub hull_min: f64,
    pub hull_max: f64,
    /// Minimum over the Gauss points and both endpoints.
    pub sampled_min: f64,
    /// Maximum over the Gauss points and both endpoints.
    pub sampled_max: f64,
}

/// Degree-`k` Lagrange basis on Gauss-Lobatto nodes of `[0, 1]`, with the
/// local operators needed by the DG discretization.
#[derive(Debug, Clone)]
pub struct NodalBasis1D {
    pub degree: usize,
    pub nodes: Vec<f64>,
    /// `mass[(a, c)] = ∫ l_a l_c` on `[0, 1]`.
    pub mass: DMatrix<f64>,
    pub mass_inverse: DMatrix<f64>,
    /// `diff[(n, m)] = l_m'(r_n)`.
    pub diff: DMatrix<f64>,
    /// Maps Lagrange coefficients to Bernstein coefficients.
    pub lag_to_bern: DMatrix<f64>,
    /// `∫ l_n` on `[0, 1]`.
    pub integrals: Vec<f64>,
    /// `k + 2` point Gauss rule.
    pub quad: Quadrature,
    bary: Vec<f64>,
}

/// Builds the degree-`k` nodal basis, `1 <= k <= 12`.
pub fn build_nodal_basis(k: usize) -> Result<NodalBasis1D> {
    if !(1..=MAX_DEGREE).contains(&k) {
        return Err(Error::config(format!(
            "polynomial degree {k} outside 1..={MAX_DEGREE}"
        )));
    }
    NodalBasis1D::with_degree(k)
}

impl NodalBasis1D {
    /// Unrestricted constructor; the field space uses degree `k + 1`.
    pub(crate) fn with_degree(k: usize) -> Result<Self> {
        if k == 0 || k > MAX_DEGREE + 1 {
            return Err(Error::config(format!("basis degree {k} not supported")));
        }
        let nodes = gauss_lobatto_nodes(k);
        let n = k + 1;
        let bary: Vec<f64> = (0..n)
            .map(|j| {
                let prod: f64 = (0..n)
                    .filter(|&m| m != j)
                    .map(|m| nodes[j] - nodes[m])
                    .product();
                1.0 / prod
            })
            .collect();

        let quad = gauss_quadrature(k + 2)?;
        let mut mass = DMatrix::zeros(n, n);
        let mut integrals = vec![0.0; n];
        for (&r, &w) in quad.points.iter().zip(&quad.weights) {
            let l = lagrange_values(&nodes, &bary, r);
            for a in 0..n {
                integrals[a] += w * l[a];
                for c in 0..n {
                    mass[(a, c)] += w * l[a] * l[c];
                }
            }
        }
        let mass_inverse = mass
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::config("singular reference mass matrix"))?;

        let mut diff = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let d = (bary[j] / bary[i]) / (nodes[i] - nodes[j]);
                    diff[(i, j)] = d;
                    diag -= d;
                }
            }
            diff[(i, i)] = diag;
        }

        let mut vandermonde = DMatrix::zeros(n, n);
        for (row, &r) in nodes.iter().enumerate() {
            for (col, b) in bernstein_values(k, r).into_iter().enumerate() {
                vandermonde[(row, col)] = b;
            }
        }
        let lag_to_bern = vandermonde
            .try_inverse()
            .ok_or_else(|| Error::config("singular Bernstein Vandermonde matrix"))?;

        Ok(Self {
            degree: k,
            nodes,
            mass,
            mass_inverse,
            diff,
            lag_to_bern,
            integrals,
            quad,
            bary,
        })
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All basis functions evaluated at `r`.
    pub fn values(&self, r: f64) -> Vec<f64> {
        lagrange_values(&self.nodes, &self.bary, r)
    }

    /// All basis derivatives evaluated at `r`.
    pub fn derivatives(&self, r: f64) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for (m, o) in out.iter_mut().enumerate() {
            let mut sum = 0.0;
            for j in 0..n {
                if j == m {
                    continue;
                }
                let mut prod = 1.0 / (self.nodes[m] - self.nodes[j]);
                for i in 0..n {
                    if i != m && i != j {
                        prod *= (r - self.nodes[i]) / (self.nodes[m] - self.nodes[i]);
                    }
                }
                sum += prod;
            }
            *o = sum;
        }
        out
    }

    /// Evaluates the polynomial with Lagrange coefficients `coeffs` at `r`.
    pub fn evaluate(&self, coeffs: &[f64], r: f64) -> f64 {
        self.values(r)
            .iter()
            .zip(coeffs)
            .map(|(l, c)| l * c)
            .sum()
    }

    /// Row-major `points.len() x (k+1)` table of basis values.
    pub fn value_table(&self, points: &[f64]) -> Vec<f64> {
        points.iter().flat_map(|&r| self.values(r)).collect()
    }

    /// Row-major `points.len() x (k+1)` table of basis derivatives.
    pub fn derivative_table(&self, points: &[f64]) -> Vec<f64> {
        points.iter().flat_map(|&r| self.derivatives(r)).collect()
    }

    fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: coeffs.len(),
            });
        }
        Ok(())
    }

    pub fn bernstein_coefficients(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs)?;
        let n = self.len();
        Ok((0..n)
            .map(|m| (0..n).map(|a| self.lag_to_bern[(m, a)] * coeffs[a]).sum())
            .collect())
    }

    /// Conservative sign classification from the Bernstein coefficients.
    ///
    /// `Positive` and `Negative` are certificates; `Indeterminate` only means
    /// the coefficients do not settle the question.
    pub fn classify_cell_sign(&self, coeffs: &[f64]) -> Result<SignClass> {
        let beta = self.bernstein_coefficients(coeffs)?;
        Ok(classify_bernstein(&beta))
    }

    pub fn cell_extrema_estimate(&self, coeffs: &[f64]) -> Result<ExtremaEstimate> {
        let beta = self.bernstein_coefficients(coeffs)?;
        let (hull_min, hull_max) = min_max(&beta);
        let mut sampled_min = f64::INFINITY;
        let mut sampled_max = f64::NEG_INFINITY;
        for &r in self.sample_points().iter() {
            let val = self.evaluate(coeffs, r);
            sampled_min = sampled_min.min(val);
            sampled_max = sampled_max.max(val);
        }
        Ok(ExtremaEstimate {
            hull_min,
            hull_max,
            sampled_min,
            sampled_max,
        })
    }

    /// Gauss points followed by both endpoints.
    pub fn sample_points(&self) -> Vec<f64> {
        let mut pts = self.quad.points.clone();
        pts.push(0.0);
        pts.push(1.0);
        pts
    }
}

/// Relative tolerance below which a Bernstein coefficient counts as zero.
pub const SIGN_TOLERANCE: f64 = 1e-12;

pub(crate) fn classify_bernstein(beta: &[f64]) -> SignClass {
    let (hull_min, hull_max) = min_max(beta);
    let scale = beta.iter().fold(0.0_f64, |m, b| m.max(b.abs()));
    let tol = SIGN_TOLERANCE * scale;
    let tag = if scale > 0.0 && hull_min >= -tol && hull_max > tol {
        SignTag::Positive
    } else if scale > 0.0 && hull_max <= tol && hull_min < -tol {
        SignTag::Negative
    } else {
        SignTag::Indeterminate
    };
    SignClass {
        tag,
        hull_min,
        hull_max,
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| {
            (lo.min(b), hi.max(b))
        })
}

fn lagrange_values(nodes: &[f64], bary: &[f64], r: f64) -> Vec<f64> {
    let n = nodes.len();
    let mut out = vec![0.0; n];
    if let Some(hit) = nodes.iter().position(|&x| x == r) {
        out[hit] = 1.0;
        return out;
    }
    // First barycentric form: l_j(r) = w_j / (r - r_j) * prod_m (r - r_m).
    let ell: f64 = nodes.iter().map(|&x| r - x).product();
    for j in 0..n {
        out[j] = ell * bary[j] / (r - nodes[j]);
    }
    out
}
