//! Net files: a `# radius=..,field=..,dim=..` comment line, a header row
//! `x0,x1,...` and one embedded center per row.

use std::io::Write;
use std::path::Path;

use bilinear_dyson::{DVector, EpsNet};

use crate::problem::{CliError, FieldKind};

pub fn write_net(path: &Path, net: &EpsNet, field: FieldKind, dim: usize) -> Result<(), CliError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let field = match field {
        FieldKind::Real => "real",
        FieldKind::Complex => "complex",
    };
    writeln!(file, "# radius={},field={field},dim={dim}", net.radius)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record((0..dim).map(|i| format!("x{i}")))?;
    for c in &net.centers {
        w.write_record(c.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_net(path: &Path) -> Result<EpsNet, CliError> {
    let bad = |msg: String| CliError::Input(format!("{}: {msg}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let (meta, body) = text
        .split_once('\n')
        .ok_or_else(|| bad("empty net file".into()))?;
    let meta = meta
        .strip_prefix('#')
        .ok_or_else(|| bad("missing '# radius=...' line".into()))?;

    let mut radius = None;
    let mut dim = None;
    for pair in meta.trim().split(',') {
        match pair.split_once('=') {
            Some(("radius", v)) => radius = v.parse::<f64>().ok(),
            Some(("dim", v)) => dim = v.parse::<usize>().ok(),
            Some(("field", "real" | "complex")) => {}
            _ => return Err(bad(format!("unrecognised metadata '{pair}'"))),
        }
    }
    let radius = radius
        .filter(|r| *r > 0.0 && r.is_finite())
        .ok_or_else(|| bad("radius must be a positive number".into()))?;
    let dim = dim
        .filter(|d| *d > 0)
        .ok_or_else(|| bad("dim must be a positive integer".into()))?;

    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header_len = reader.headers().map_err(|e| bad(e.to_string()))?.len();
    if header_len != dim {
        return Err(bad(format!(
            "header has {header_len} columns, dim is {dim}"
        )));
    }
    let mut centers = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let values = record
            .iter()
            .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad(format!("row {row}: not a finite number")))?;
        centers.push(DVector::from_vec(values));
    }
    if centers.is_empty() {
        return Err(bad("net has no centers".into()));
    }
    Ok(EpsNet {
        source_count: centers.len(),
        centers,
        radius,
    })
}
