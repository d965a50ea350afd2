//! Tensor mesh of the phase space `[x_lo, x_hi] x [-L, L]`.

use crate::error::{Error, Result};

/// Width ratio beyond which the mesh is reported as poorly shaped.
const SHAPE_RATIO_WARN: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Result of an x-neighbor query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Cell(usize),
    Boundary,
}

/// Zero-based cell index `(i, j)`: `i` along x, `j` along v.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellIndex {
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMesh {
    pub nx: usize,
    pub nv: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    /// Velocity half-width.
    pub l: f64,
    pub x_edges: Vec<f64>,
    pub v_edges: Vec<f64>,
    pub hx_cells: Vec<f64>,
    pub hv_cells: Vec<f64>,
    /// Largest x width.
    pub hx: f64,
    /// Largest v width.
    pub hv: f64,
    pub periodic_x: bool,
}

/// Uniform periodic-in-x mesh.
pub fn build_phase_mesh(nx: usize, nv: usize, x_lo: f64, x_hi: f64, l: f64) -> Result<PhaseMesh> {
    PhaseMesh::uniform(nx, nv, x_lo, x_hi, l, true)
}

/// Uniform mesh with boundary markers at both x ends.
pub fn build_diode_mesh(nx: usize, nv: usize, x_lo: f64, x_hi: f64, l: f64) -> Result<PhaseMesh> {
    PhaseMesh::uniform(nx, nv, x_lo, x_hi, l, false)
}

fn uniform_edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    let mut edges: Vec<f64> = (0..=n).map(|i| lo + h * i as f64).collect();
    edges[n] = hi;
    edges
}

impl PhaseMesh {
    pub fn uniform(
        nx: usize,
        nv: usize,
        x_lo: f64,
        x_hi: f64,
        l: f64,
        periodic_x: bool,
    ) -> Result<Self> {
        if nx < 2 || nv < 2 {
            return Err(Error::config(format!(
                "mesh needs at least 2 cells per direction, got {nx} x {nv}"
            )));
        }
        if !nv.is_multiple_of(2) {
            return Err(Error::config(format!(
                "Nv = {nv} is odd, so v = 0 would not be a cell edge"
            )));
        }
        if !(x_hi > x_lo) || !x_lo.is_finite() || !x_hi.is_finite() {
            return Err(Error::config(format!("invalid x range [{x_lo}, {x_hi}]")));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::config(format!("invalid velocity half-width {l}")));
        }
        let x_edges = uniform_edges(x_lo, x_hi, nx);
        let mut v_edges = uniform_edges(-l, l, nv);
        // Pin the middle edge so sign(v) is exact per v-cell.
        v_edges[nv / 2] = 0.0;
        let hx_cells: Vec<f64> = x_edges.windows(2).map(|w| w[1] - w[0]).collect();
        let hv_cells: Vec<f64> = v_edges.windows(2).map(|w| w[1] - w[0]).collect();
        let hx = hx_cells.iter().copied().fold(0.0, f64::max);
        let hv = hv_cells.iter().copied().fold(0.0, f64::max);
        let ratio = (hx / hv).max(hv / hx);
        if ratio > SHAPE_RATIO_WARN {
            log::warn!("mesh aspect ratio {ratio:.1} exceeds {SHAPE_RATIO_WARN}");
        }
        Ok(Self {
            nx,
            nv,
            x_lo,
            x_hi,
            l,
            x_edges,
            v_edges,
            hx_cells,
            hv_cells,
            hx,
            hv,
            periodic_x,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.nv
    }

    pub fn x_length(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    /// Index of the v-edge at v = 0.
    pub fn zero_edge(&self) -> usize {
        self.nv / 2
    }

    pub fn min_width(&self) -> f64 {
        self.hx_cells
            .iter()
            .chain(&self.hv_cells)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether v-cell `j` lies in `v > 0`.
    pub fn v_positive(&self, j: usize) -> bool {
        j >= self.zero_edge()
    }

    pub fn x_neighbor(&self, i: usize, side: Side) -> Neighbor {
        match side {
            Side::Left if i == 0 => {
                if self.periodic_x {
                    Neighbor::Cell(self.nx - 1)
                } else {
                    Neighbor::Boundary
                }
            }
            Side::Left => Neighbor::Cell(i - 1),
            Side::Right if i + 1 == self.nx => {
                if self.periodic_x {
                    Neighbor::Cell(0)
                } else {
                    Neighbor::Boundary
                }
            }
            Side::Right => Neighbor::Cell(i + 1),
        }
    }

    /// Cell containing `x` (clamped to the domain).
    pub fn locate_x(&self, x: f64) -> usize {
        locate(&self.x_edges, x)
    }

    pub fn locate_v(&self, v: f64) -> usize {
        locate(&self.v_edges, v)
    }
}

fn locate(edges: &[f64], x: f64) -> usize {
    let n = edges.len() - 1;
    match edges.partition_point(|&e| e <= x) {
        0 => 0,
        p => (p - 1).min(n - 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let m = build_phase_mesh(2, 2, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(m.x_edges, vec![0.0, 0.5, 1.0]);
        assert_eq!(m.v_edges, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn weak_landau_mesh() {
        let m = build_phase_mesh(60, 60, 0.0, 4.0 * std::f64::consts::PI, 10.0).unwrap();
        assert!((m.hx - 4.0 * std::f64::consts::PI / 60.0).abs() < 1e-14);
        assert!((m.hv - 1.0 / 3.0).abs() < 1e-13);
        // Edge 31 in one-based numbering.
        assert_eq!(m.zero_edge(), 30);
        assert_eq!(m.v_edges[30], 0.0);
    }

    #[test]
    fn odd_nv_rejected() {
        assert!(matches!(
            build_phase_mesh(3, 3, 0.0, 1.0, 1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn periodic_wrap() {
        let m = build_phase_mesh(4, 2, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(m.x_neighbor(0, Side::Left), Neighbor::Cell(3));
        assert_eq!(m.x_neighbor(3, Side::Right), Neighbor::Cell(0));
        assert_eq!(m.x_neighbor(1, Side::Right), Neighbor::Cell(2));
    }

    #[test]
    fn diode_boundaries() {
        let m = build_diode_mesh(4, 2, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(m.x_neighbor(0, Side::Left), Neighbor::Boundary);
        assert_eq!(m.x_neighbor(3, Side::Right), Neighbor::Boundary);
        assert_eq!(m.x_neighbor(2, Side::Left), Neighbor::Cell(1));
    }

    #[test]
    fn locate_cells() {
        let m = build_phase_mesh(4, 4, 0.0, 1.0, 2.0).unwrap();
        assert_eq!(m.locate_x(0.0), 0);
        assert_eq!(m.locate_x(0.3), 1);
        assert_eq!(m.locate_x(1.0), 3);
        assert_eq!(m.locate_v(-0.5), 1);
        assert_eq!(m.locate_v(0.0), 2);
    }
}
