use proptest::prelude::*;

use vlasov_dg::basis::{build_nodal_basis, gauss_quadrature, NodalBasis1D};
use vlasov_dg::mesh::{build_phase_mesh, PhaseMesh};
use vlasov_dg::poisson::{FieldKind, FieldPair, PoissonBoundary, PoissonFlavor, PoissonSolver};
use vlasov_dg::vlasov::{
    e_flux, upwind_v_flux, CellFieldInfo, Distribution, FluxVariant, Sources, VlasovForm, VlasovOperator,
};

const VARIANTS: [FluxVariant; 3] = [
    FluxVariant::CellAverageSign,
    FluxVariant::WeightedAverage,
    FluxVariant::ProjectedNonConsistent,
];

fn small_mesh() -> PhaseMesh {
    build_phase_mesh(3, 4, 0.0, 2.0, 1.5).unwrap()
}

fn distribution(mesh: &PhaseMesh, k: usize, values: &[f64]) -> Distribution {
    let mut f = Distribution::zeros(mesh, k);
    for (c, v) in f.coeffs.iter_mut().zip(values.iter().cycle()) {
        *c = *v;
    }
    f
}

fn field(mesh: &PhaseMesh, k: usize, values: &[f64]) -> FieldPair {
    let m = k + 2;
    FieldPair {
        kind: FieldKind::Ldg,
        degree: k + 1,
        e: values.iter().cycle().take(mesh.nx * m).copied().collect(),
        phi: vec![0.0; mesh.nx * m],
        jumps: vec![0.0; mesh.nx],
        c11: 1.0,
        hx_cells: mesh.hx_cells.clone(),
    }
}

fn rhs(op: &VlasovOperator, f: &Distribution, e: &FieldPair, invert: bool) -> Vec<f64> {
    let table = op.field_table_single(e);
    let mut out = vec![0.0; f.coeffs.len()];
    if invert {
        op.rhs_into(f, &table, 0.0, Sources::default(), &mut out);
    } else {
        op.residual_into(f, &table, 0.0, Sources::default(), &mut out);
    }
    out
}

/// `Σ ∬ g` for a state stored like a distribution.
fn integral(g: &[f64], mesh: &PhaseMesh, basis: &NodalBasis1D) -> f64 {
    let n = basis.degree + 1;
    let mut total = 0.0;
    for i in 0..mesh.nx {
        for j in 0..mesh.nv {
            let block = &g[(i * mesh.nv + j) * n * n..][..n * n];
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += basis.integrals[a] * basis.integrals[b] * block[a * n + b];
                }
            }
            total += mesh.hx_cells[i] * mesh.hv_cells[j] * s;
        }
    }
    total
}

/// Residual of one cell assembled straight from the weak form with a
/// `2(k+2)` point Gauss rule and point evaluations of `f_h` and `E_h`.
fn brute_force_residual(
    f: &Distribution,
    e: &FieldPair,
    basis: &NodalBasis1D,
    field_basis: &NodalBasis1D,
    mesh: &PhaseMesh,
    variant: FluxVariant,
    i: usize,
    j: usize,
) -> Vec<f64> {
    let k = basis.degree;
    let n = k + 1;
    let q = gauss_quadrature(2 * (k + 2)).unwrap();
    let (hx, hv) = (mesh.hx_cells[i], mesh.hv_cells[j]);
    let v0 = mesh.v_edges[j];
    let m = k + 2;
    let e_at = |cell: usize, r: f64| field_basis.evaluate(&e.e[cell * m..(cell + 1) * m], r);
    let info = CellFieldInfo::from_coeffs(field_basis, &e.e[i * m..(i + 1) * m]);
    let fv = |ii: usize, jj: usize, rx: f64, rv: f64| f.evaluate_local(basis, ii, jj, rx, rv);
    let left = (i + mesh.nx - 1) % mesh.nx;
    let right = (i + 1) % mesh.nx;
    let mut r = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let mut unit = vec![0.0; n];
            unit[a] = 1.0;
            let phi_x = |s: f64| basis.evaluate(&unit, s);
            let dphi_x = |s: f64| -> f64 { basis.derivatives(s)[a] };
            let phi_v = |s: f64| basis.values(s)[b];
            let dphi_v = |s: f64| -> f64 { basis.derivatives(s)[b] };
            let mut acc = 0.0;
            // Volume: ∬ v f φ_x - ∬ E f φ_v.
            for (&rx, &wx) in q.points.iter().zip(&q.weights) {
                for (&rv, &wv) in q.points.iter().zip(&q.weights) {
                    let v = v0 + hv * rv;
                    let fh = fv(i, j, rx, rv);
                    acc += wx * wv * hv * v * fh * dphi_x(rx) * phi_v(rv);
                    acc -= wx * wv * hx * e_at(i, rx) * fh * phi_x(rx) * dphi_v(rv);
                }
            }
            // Faces normal to x.
            for (&rv, &wv) in q.points.iter().zip(&q.weights) {
                let v = v0 + hv * rv;
                let out_r = upwind_v_flux(v, fv(i, j, 1.0, rv), fv(right, j, 0.0, rv));
                let in_l = upwind_v_flux(v, fv(left, j, 1.0, rv), fv(i, j, 0.0, rv));
                acc -= wv * hv * out_r * phi_x(1.0) * phi_v(rv);
                acc += wv * hv * in_l * phi_x(0.0) * phi_v(rv);
            }
            // Faces normal to v; zero flux through the velocity boundary.
            for (&rx, &wx) in q.points.iter().zip(&q.weights) {
                let ex = e_at(i, rx);
                if j + 1 < mesh.nv {
                    let flux = e_flux(ex, &info, fv(i, j, rx, 1.0), fv(i, j + 1, rx, 0.0), variant);
                    acc += wx * hx * flux * phi_x(rx) * phi_v(1.0);
                }
                if j > 0 {
                    let flux = e_flux(ex, &info, fv(i, j - 1, rx, 1.0), fv(i, j, rx, 0.0), variant);
                    acc -= wx * hx * flux * phi_x(rx) * phi_v(0.0);
                }
            }
            r[a * n + b] = acc;
        }
    }
    r
}

fn coeffs(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn assembled_residual_matches_brute_force(
        k in 1usize..=3,
        fvals in coeffs(61),
        evals in coeffs(7),
        vi in 0usize..3,
    ) {
        let mesh = small_mesh();
        let basis = build_nodal_basis(k).unwrap();
        let solver = PoissonSolver::new(&mesh, k, PoissonFlavor::Ldg, PoissonBoundary::Periodic).unwrap();
        let variant = VARIANTS[vi];
        let op = VlasovOperator::new(&mesh, &basis, VlasovForm::Periodic, variant).unwrap();
        let f = distribution(&mesh, k, &fvals);
        let e = field(&mesh, k, &evals);
        let residual = rhs(&op, &f, &e, false);
        let n2 = (k + 1) * (k + 1);
        let scale = residual.iter().fold(0.0f64, |m, r| m.max(r.abs())).max(1.0);
        for i in 0..mesh.nx {
            for j in 0..mesh.nv {
                let oracle = brute_force_residual(&f, &e, &basis, solver.field_basis(), &mesh, variant, i, j);
                let got = &residual[(i * mesh.nv + j) * n2..][..n2];
                for (g, o) in got.iter().zip(&oracle) {
                    prop_assert!((g - o).abs() <= 1e-11 * scale, "cell ({i},{j}): {g} vs {o}");
                }
            }
        }
    }

    #[test]
    fn mass_functional_vanishes(
        k in 1usize..=4,
        fvals in coeffs(53),
        evals in coeffs(11),
        vi in 0usize..3,
    ) {
        let mesh = small_mesh();
        let basis = build_nodal_basis(k).unwrap();
        let op = VlasovOperator::new(&mesh, &basis, VlasovForm::Periodic, VARIANTS[vi]).unwrap();
        let f = distribution(&mesh, k, &fvals);
        let out = rhs(&op, &f, &field(&mesh, k, &evals), true);
        let norm = f.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!(integral(&out, &mesh, &basis).abs() <= 1e-12 * norm.max(1.0));
    }

    #[test]
    fn rhs_is_linear_for_frozen_field(
        k in 1usize..=3,
        a in coeffs(37),
        b in coeffs(41),
        evals in coeffs(5),
        alpha in -2.0..2.0f64,
        vi in 0usize..3,
    ) {
        let mesh = small_mesh();
        let basis = build_nodal_basis(k).unwrap();
        let op = VlasovOperator::new(&mesh, &basis, VlasovForm::Periodic, VARIANTS[vi]).unwrap();
        let e = field(&mesh, k, &evals);
        let fa = distribution(&mesh, k, &a);
        let fb = distribution(&mesh, k, &b);
        let mut fc = fa.clone();
        for (c, y) in fc.coeffs.iter_mut().zip(&fb.coeffs) {
            *c = alpha * *c + y;
        }
        let (ra, rb, rc) = (rhs(&op, &fa, &e, true), rhs(&op, &fb, &e, true), rhs(&op, &fc, &e, true));
        let scale = rc.iter().chain(&ra).chain(&rb).fold(0.0f64, |m, r| m.max(r.abs())).max(1.0);
        for q in 0..rc.len() {
            prop_assert!((rc[q] - (alpha * ra[q] + rb[q])).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn piecewise_constant_state_is_steady_without_field() {
    let mesh = build_phase_mesh(4, 6, 0.0, 1.0, 3.0).unwrap();
    let basis = build_nodal_basis(2).unwrap();
    for variant in VARIANTS {
        let op = VlasovOperator::new(&mesh, &basis, VlasovForm::Periodic, variant).unwrap();
        let f = distribution(&mesh, 2, &[0.7]);
        let out = rhs(&op, &f, &field(&mesh, 2, &[0.0]), true);
        assert!(out.iter().all(|r| r.abs() < 1e-13));
    }
}

#[test]
fn sign_definite_field_makes_variants_agree() {
    let mesh = small_mesh();
    let basis = build_nodal_basis(2).unwrap();
    let f = distribution(&mesh, 2, &[0.3, -0.1, 0.9, 0.4, -0.6, 0.2, 0.05]);
    // A different positive constant per cell: every cell is certified positive.
    let levels: Vec<f64> = [1.0, 1.7, 0.4].iter().flat_map(|&c| [c; 4]).collect();
    let e = field(&mesh, 2, &levels);
    let outs: Vec<Vec<f64>> = VARIANTS
        .iter()
        .map(|&v| rhs(&VlasovOperator::new(&mesh, &basis, VlasovForm::Periodic, v).unwrap(), &f, &e, true))
        .collect();
    for out in &outs[1..] {
        for (a, b) in outs[0].iter().zip(out) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn diode_operator_vanishes_on_empty_state() {
    let mesh = vlasov_dg::mesh::build_diode_mesh(4, 4, 0.0, 1.0, 10.0).unwrap();
    let basis = build_nodal_basis(3).unwrap();
    let op = VlasovOperator::new(&mesh, &basis, VlasovForm::Diode, FluxVariant::WeightedAverage).unwrap();
    let f = Distribution::zeros(&mesh, 3);
    let out = rhs(&op, &f, &field(&mesh, 3, &[2.1]), true);
    assert!(out.iter().all(|r| *r == 0.0));
}

#[test]
fn operator_rejects_wrong_topology() {
    let basis = build_nodal_basis(1).unwrap();
    let periodic = small_mesh();
    let bounded = vlasov_dg::mesh::build_diode_mesh(2, 2, 0.0, 1.0, 1.0).unwrap();
    assert!(VlasovOperator::new(&periodic, &basis, VlasovForm::Diode, FluxVariant::CellAverageSign).is_err());
    assert!(VlasovOperator::new(&bounded, &basis, VlasovForm::Periodic, FluxVariant::CellAverageSign).is_err());
}
