//! MPS and LP-format writers.
//!
//! Names can exceed the 8-character fields of strict fixed MPS, so columns are
//! whitespace-separated (readable by any free-format MPS reader). The
//! objective sense is always written explicitly.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::{MilpModel, Sense};
use crate::error::{Error, Result};

const OBJ_ROW: &str = "obj";
const LP_LINE: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Mps,
    Lp,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mps" => Ok(ExportFormat::Mps),
            "lp" => Ok(ExportFormat::Lp),
            other => Err(Error::validation("export", "format", format!("unknown format {other:?}"))),
        }
    }
}

pub fn export(model: &MilpModel, format: ExportFormat, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        ExportFormat::Mps => write_mps(model, &mut w),
        ExportFormat::Lp => write_lp(model, &mut w),
    }
    .and_then(|_| w.flush())
    .map_err(|e| Error::io(path, e))
}

pub fn write_mps(model: &MilpModel, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "NAME          BESSPLAN")?;
    writeln!(w, "OBJSENSE")?;
    writeln!(w, "    MAX")?;
    writeln!(w, "ROWS")?;
    writeln!(w, " N  {OBJ_ROW}")?;
    for c in &model.constraints {
        let tag = match c.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        writeln!(w, " {tag}  {}", c.name)?;
    }

    // column-major view of the matrix
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.variables.len()];
    for (i, c) in model.constraints.iter().enumerate() {
        for &(j, a) in &c.terms {
            columns[j].push((i, a));
        }
    }

    writeln!(w, "COLUMNS")?;
    let mut in_int = false;
    let mut marker = 0;
    for (j, v) in model.variables.iter().enumerate() {
        if v.is_binary() != in_int {
            let kind = if in_int { "INTEND" } else { "INTORG" };
            writeln!(w, "    MARKER{marker}  'MARKER'  '{kind}'")?;
            marker += 1;
            in_int = !in_int;
        }
        let name = v.kind.name();
        let c = model.objective[j];
        if c != 0.0 || columns[j].is_empty() {
            writeln!(w, "    {name}  {OBJ_ROW}  {c}")?;
        }
        for &(i, a) in &columns[j] {
            writeln!(w, "    {name}  {}  {a}", model.constraints[i].name)?;
        }
    }
    if in_int {
        writeln!(w, "    MARKER{marker}  'MARKER'  'INTEND'")?;
    }

    writeln!(w, "RHS")?;
    for c in &model.constraints {
        if c.rhs != 0.0 {
            writeln!(w, "    RHS  {}  {}", c.name, c.rhs)?;
        }
    }

    writeln!(w, "BOUNDS")?;
    for v in &model.variables {
        let name = v.kind.name();
        if v.is_binary() && v.lower == 0.0 && v.upper == 1.0 {
            writeln!(w, " BV BND  {name}")?;
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => writeln!(w, " FR BND  {name}")?,
            (false, true) => {
                writeln!(w, " MI BND  {name}")?;
                writeln!(w, " UP BND  {name}  {}", v.upper)?;
            }
            (true, up) => {
                if v.lower != 0.0 || v.is_binary() {
                    writeln!(w, " LO BND  {name}  {}", v.lower)?;
                }
                if up {
                    writeln!(w, " UP BND  {name}  {}", v.upper)?;
                }
            }
        }
    }
    writeln!(w, "ENDATA")
}

/// Writes `terms` as `+ a x - b y ...`, wrapping long lines.
fn write_terms(w: &mut impl Write, terms: impl Iterator<Item = (f64, String)>) -> io::Result<()> {
    let mut width = 0;
    let mut any = false;
    for (a, name) in terms {
        let piece = if a < 0.0 {
            format!(" - {} {name}", -a)
        } else {
            format!(" + {a} {name}")
        };
        if width + piece.len() > LP_LINE {
            writeln!(w)?;
            write!(w, "   ")?;
            width = 0;
        }
        width += piece.len();
        w.write_all(piece.as_bytes())?;
        any = true;
    }
    if !any {
        write!(w, " 0")?;
    }
    Ok(())
}

pub fn write_lp(model: &MilpModel, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "\\ bessplan bidding model")?;
    writeln!(w, "Maximize")?;
    write!(w, " {OBJ_ROW}:")?;
    let obj = model
        .objective
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(j, &c)| (c, model.variables[j].kind.name()));
    write_terms(w, obj)?;
    writeln!(w)?;

    writeln!(w, "Subject To")?;
    for c in &model.constraints {
        write!(w, " {}:", c.name)?;
        write_terms(w, c.terms.iter().map(|&(j, a)| (a, model.variables[j].kind.name())))?;
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        writeln!(w, " {op} {}", c.rhs)?;
    }

    writeln!(w, "Bounds")?;
    for v in &model.variables {
        let name = v.kind.name();
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => writeln!(w, " {name} free")?,
            (false, true) => writeln!(w, " -inf <= {name} <= {}", v.upper)?,
            (true, true) if !(v.is_binary() && v.lower == 0.0 && v.upper == 1.0) => {
                writeln!(w, " {} <= {name} <= {}", v.lower, v.upper)?
            }
            (true, false) if v.lower != 0.0 => writeln!(w, " {name} >= {}", v.lower)?,
            _ => {}
        }
    }

    writeln!(w, "Binaries")?;
    for v in model.variables.iter().filter(|v| v.is_binary()) {
        writeln!(w, " {}", v.kind.name())?;
    }
    writeln!(w, "End")
}
