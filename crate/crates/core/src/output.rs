//! CSV and text outputs. Every file is written to a temporary sibling first
//! and renamed into place, so readers never see a partial file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::basis::NodalBasis1D;
use crate::diagnostics::{ExpFit, RunDiagnostics};
use crate::error::{Error, Result};
use crate::mesh::PhaseMesh;
use crate::scenarios::ConvergenceReport;
use crate::vlasov::Distribution;

pub const DIAGNOSTICS_HEADER: [&str; 9] = [
    "t",
    "mass_dev",
    "l1_dev",
    "l2_dev",
    "energy_dev",
    "e_l2norm",
    "kinetic",
    "potential",
    "penalty",
];

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::config(format!("CSV error: {other:?}")),
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn num_opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::config(format!("invalid output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::config(format!("CSV error: {e}")))
}

pub fn write_diagnostics(path: &Path, diag: &RunDiagnostics) -> Result<()> {
    let rows = diag.records.iter().map(|r| {
        let d = diag.deviations(r);
        vec![
            num(r.t),
            num(d.mass),
            num(d.l1),
            num(d.l2),
            num(d.energy),
            num(r.e_l2norm),
            num(r.energy.kinetic),
            num(r.energy.potential),
            num(r.energy.penalty),
        ]
    });
    write_atomic(path, &csv_bytes(&DIAGNOSTICS_HEADER, rows)?)
}

/// `(t, ‖E_h‖)` pairs from a diagnostics file.
pub fn read_e_series(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::config(format!("{} has no '{name}' column", path.display())))
    };
    let (ct, ce) = (col("t")?, col("e_l2norm")?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::config(format!("malformed row in {}", path.display())))
        };
        out.push((parse(ct)?, parse(ce)?));
    }
    Ok(out)
}

pub fn write_fits(path: &Path, fits: &[ExpFit]) -> Result<()> {
    let rows = fits.iter().map(|f| {
        vec![
            num(f.window.0),
            num(f.window.1),
            num(f.c),
            num(f.gamma),
            f.maxima.len().to_string(),
        ]
    });
    write_atomic(
        path,
        &csv_bytes(&["window_start", "window_end", "c", "gamma", "maxima"], rows)?,
    )
}

pub fn write_convergence(path: &Path, report: &ConvergenceReport) -> Result<()> {
    let rows = report.rows.iter().map(|r| {
        vec![
            r.degree.to_string(),
            r.cells.to_string(),
            num_opt(r.f_error),
            num_opt(r.order),
            num_opt(r.e_error),
            num_opt(r.e_order),
        ]
    });
    write_atomic(
        path,
        &csv_bytes(&["degree", "cells", "l2_error", "order", "e_error", "e_order"], rows)?,
    )
}

/// Snapshot file name for time `t`.
pub fn snapshot_name(t: f64) -> String {
    format!("f_t{t:011.4}.csv")
}

/// Samples `f_h` on a grid of `4(k + 1)` equispaced interior points per cell
/// and direction.
pub fn write_snapshot(path: &Path, f: &Distribution, basis: &NodalBasis1D, mesh: &PhaseMesh) -> Result<()> {
    let per = 4 * (f.degree + 1);
    let offsets: Vec<f64> = (0..per).map(|s| (s as f64 + 0.5) / per as f64).collect();
    let mut rows = Vec::with_capacity(mesh.num_cells() * per * per);
    for i in 0..mesh.nx {
        for &rx in &offsets {
            let x = mesh.x_edges[i] + rx * mesh.hx_cells[i];
            for j in 0..mesh.nv {
                for &rv in &offsets {
                    let v = mesh.v_edges[j] + rv * mesh.hv_cells[j];
                    rows.push(vec![num(x), num(v), num(f.evaluate_local(basis, i, j, rx, rv))]);
                }
            }
        }
    }
    write_atomic(path, &csv_bytes(&["x", "v", "f"], rows)?)
}

/// Paths of the standard output bundle rooted at one directory.
#[derive(Debug, Clone)]
pub struct OutputBundle {
    pub dir: PathBuf,
}

impl OutputBundle {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn diagnostics(&self) -> PathBuf {
        self.dir.join("diagnostics.csv")
    }

    pub fn fit(&self) -> PathBuf {
        self.dir.join("fit.csv")
    }

    pub fn report(&self) -> PathBuf {
        self.dir.join("report.txt")
    }

    pub fn convergence(&self) -> PathBuf {
        self.dir.join("convergence.csv")
    }

    pub fn snapshot(&self, t: f64) -> PathBuf {
        self.dir.join("snapshots").join(snapshot_name(t))
    }
}
