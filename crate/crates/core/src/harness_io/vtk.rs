use std::io::Write;
use std::path::Path;

use crate::elements::REFERENCE_VERTICES;
use crate::error::{Error, Result};
use crate::spaces::Field;

/// Legacy ASCII VTK unstructured grid with every cell carrying its own three
/// points, so discontinuous fields are sampled without averaging. Scalar
/// fields (DG/CG) become `SCALARS`, vector fields `VECTORS`.
pub fn write_vtk_to<W: Write>(out: &mut W, title: &str, fields: &[(&str, &Field)]) -> Result<()> {
    let Some((_, first)) = fields.first() else {
        return Err(Error::Config("vtk output needs at least one field".into()));
    };
    let mesh = first.space().mesh().clone();
    for (name, f) in fields {
        if !std::sync::Arc::ptr_eq(f.space().mesh(), &mesh) {
            return Err(Error::SpaceMismatch(format!("field {name} lives on another mesh")));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Config(format!("invalid vtk field name {name:?}")));
        }
    }
    let nc = mesh.num_cells();
    writeln!(out, "# vtk DataFile Version 2.0")?;
    writeln!(out, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", 3 * nc)?;
    for cell in 0..nc {
        for p in mesh.cell_coords(cell) {
            writeln!(out, "{} {} 0", p[0], p[1])?;
        }
    }
    writeln!(out, "CELLS {} {}", nc, 4 * nc)?;
    for cell in 0..nc {
        writeln!(out, "3 {} {} {}", 3 * cell, 3 * cell + 1, 3 * cell + 2)?;
    }
    writeln!(out, "CELL_TYPES {nc}")?;
    for _ in 0..nc {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", 3 * nc)?;
    for (name, f) in fields {
        let space = f.space();
        let tab = space.element().tabulate(&REFERENCE_VERTICES);
        if space.is_vector() {
            writeln!(out, "VECTORS {name} double")?;
            for cell in 0..nc {
                for (v, _) in f.eval_cell(cell, &tab) {
                    writeln!(out, "{} {} 0", v[0], v[1])?;
                }
            }
        } else {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for cell in 0..nc {
                for (v, _) in f.eval_cell(cell, &tab) {
                    writeln!(out, "{}", v[0])?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_vtk(path: &Path, title: &str, fields: &[(&str, &Field)]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_vtk_to(&mut w, title, fields)?;
    w.flush()?;
    Ok(())
}
