//! File formats: legacy VTK fields, CSV histories, polylines, measurements
//! with a JSON sidecar, and interface kernels.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{BoundaryMask, Coefficients, Measurement, SourceSpec};
use crate::geometry::{ParametricCurve, Polyline, Vec2};
use crate::gradients::{DeformationField, InterfaceKernel};
use crate::mesh::{InterfaceNormals, Mesh};
use crate::optimizer::IterationRecord;

pub const HISTORY_HEADER: [&str; 8] = ["iter", "J", "R_tikhonov", "perimeter", "J_total", "mu_in", "rho", "step"];

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse { line, message: format!("{kind:?}") },
    }
}

fn write_rows<W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    for row in rows {
        out.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a numeric CSV with the given header. Rows are returned in order.
fn read_rows(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let found = rdr.headers().map_err(csv_err)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse { line, message: format!("not a number: {f:?}") })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Legacy ASCII VTK unstructured grid with nodal scalars and the region tag.
pub fn write_vtk<W: Write>(mut w: W, mesh: &Mesh, fields: &[(&str, &[f64])]) -> Result<()> {
    for (name, values) in fields {
        if values.len() != mesh.num_nodes() {
            return Err(Error::Invalid(format!(
                "field {name} has {} values for {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Invalid(format!("invalid VTK field name {name:?}")));
        }
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "dotshape field")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_nodes())?;
    for p in mesh.nodes() {
        writeln!(w, "{:e} {:e} 0", p.x, p.y)?;
    }
    let nt = mesh.num_triangles();
    writeln!(w, "CELLS {nt} {}", 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "CELL_DATA {nt}")?;
    writeln!(w, "SCALARS region int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for r in mesh.regions() {
        writeln!(w, "{}", r.tag())?;
    }
    if !fields.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.num_nodes())?;
        for (name, values) in fields {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(w, "{v:e}")?;
            }
        }
    }
    Ok(())
}

pub fn write_history<W: Write>(w: W, records: &[IterationRecord]) -> Result<()> {
    write_rows(
        w,
        &HISTORY_HEADER,
        records.iter().map(|r| {
            vec![
                r.iter as f64,
                r.cost.misfit,
                r.cost.tikhonov,
                r.cost.perimeter,
                r.cost.total,
                r.mu_in,
                r.rho,
                r.step,
            ]
        }),
    )
}

/// One row per history entry, columns as in [`HISTORY_HEADER`].
pub fn read_history(text: &str) -> Result<Vec<[f64; 8]>> {
    read_rows(text, &HISTORY_HEADER)?
        .into_iter()
        .map(|r| r.try_into().map_err(|_| Error::Parse { line: 0, message: "bad history row".into() }))
        .collect()
}

pub fn write_polyline<W: Write>(w: W, poly: &Polyline) -> Result<()> {
    write_rows(w, &["x", "y"], poly.points().iter().map(|p| vec![p.x, p.y]))
}

pub fn read_polyline(text: &str) -> Result<Polyline> {
    let pts = read_rows(text, &["x", "y"])?.into_iter().map(|r| Vec2::new(r[0], r[1])).collect();
    Polyline::new(pts)
}

/// Per-interface-node kernel and normal velocity.
pub fn write_kernel<W: Write>(
    w: W,
    mesh: &Mesh,
    normals: &InterfaceNormals,
    kernel: &InterfaceKernel,
    v: &DeformationField,
) -> Result<()> {
    if kernel.values.len() != normals.len() {
        return Err(Error::Invalid("kernel and interface normals differ in length".into()));
    }
    let vn = v.normal_component(normals);
    write_rows(
        w,
        &["x", "y", "G", "Vn"],
        normals.nodes.iter().enumerate().map(|(k, &i)| {
            let p = mesh.nodes()[i];
            vec![p.x, p.y, kernel.values[k], vn[k]]
        }),
    )
}

/// Provenance of a synthetic measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSidecar {
    pub curve: ParametricCurve,
    pub coefficients: Coefficients,
    pub source: SourceSpec,
    pub h_fine: f64,
    pub gamma: f64,
    pub seed: u64,
    pub domain_radius: f64,
    /// Boundary length the arc-length positions refer to.
    pub perimeter: f64,
    pub mask: Option<BoundaryMask>,
}

pub fn write_measurement<W: Write>(w: W, h: &Measurement) -> Result<()> {
    write_rows(w, &["s", "value"], h.s.iter().zip(&h.values).map(|(s, v)| vec![*s, *v]))
}

pub fn read_measurement(text: &str, perimeter: f64, mask: Option<BoundaryMask>) -> Result<Measurement> {
    let rows = read_rows(text, &["s", "value"])?;
    let (s, v) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
    Measurement::new(s, v, perimeter, mask)
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn save_measurement(dir: &Path, stem: &str, h: &Measurement, sidecar: &MeasurementSidecar) -> Result<()> {
    let mut csv = Vec::new();
    write_measurement(&mut csv, h)?;
    fs::write(dir.join(format!("{stem}.csv")), csv)?;
    let json = serde_json::to_string_pretty(sidecar).map_err(|e| Error::Invalid(e.to_string()))?;
    fs::write(dir.join(format!("{stem}.json")), json)?;
    Ok(())
}

/// Loads a measurement CSV; the sidecar next to it (same stem, `.json`)
/// supplies the perimeter and mask.
pub fn load_measurement(csv_path: &Path) -> Result<(Measurement, MeasurementSidecar)> {
    let text = fs::read_to_string(csv_path)?;
    let side_text = fs::read_to_string(csv_path.with_extension("json"))?;
    let sidecar: MeasurementSidecar = serde_json::from_str(&side_text)
        .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    let h = read_measurement(&text, sidecar.perimeter, sidecar.mask.clone())?;
    Ok((h, sidecar))
}
