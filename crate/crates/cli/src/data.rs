//! CSV ingestion.

use std::fs::File;
use std::path::Path;

use otsg::measures::{EmpiricalMeasure1D, EmpiricalMeasureD, Sample, SourceDistribution};
use otsg::rng::substream;

use crate::CliError;

/// Which column a 1D sample is read from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl From<&str> for Column {
    fn from(s: &str) -> Self {
        match s.parse() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        }
    }
}

/// Reads one point per row. The first row is a header when none of its
/// cells is numeric. Without `dims` a single column is read (the first one
/// unless `column` says otherwise); with `dims = d`, `d` consecutive columns
/// starting at `column` form each point.
pub fn load_samples(path: &Path, column: Option<&Column>, dims: Option<usize>) -> Result<Sample, CliError> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(file);
    let mut records = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: row {}: {e}", path.display(), row + 1)))?;
        records.push(rec);
    }
    let header = records
        .first()
        .filter(|r| r.iter().all(|cell| cell.parse::<f64>().is_err()))
        .map(|r| r.iter().map(str::to_string).collect::<Vec<_>>());
    let skip = usize::from(header.is_some());
    let start = match column {
        None => 0,
        Some(Column::Index(i)) => *i,
        Some(Column::Name(name)) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| CliError::Data(format!("{}: no column named '{name}'", path.display())))?,
    };
    let width = dims.unwrap_or(1);
    if width == 0 {
        return Err(CliError::Usage("--dims must be at least 1".into()));
    }
    let mut data = Vec::with_capacity((records.len() - skip) * width);
    for (row, rec) in records.iter().enumerate().skip(skip) {
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        for col in start..start + width {
            let cell = rec.get(col).ok_or_else(|| {
                CliError::Data(format!("{}: row {}: missing column {}", path.display(), row + 1, col + 1))
            })?;
            let value: f64 = cell.parse().map_err(|_| {
                CliError::Data(format!("{}: row {}, column {}: non-numeric cell '{cell}'", path.display(), row + 1, col + 1))
            })?;
            data.push(value);
        }
    }
    if data.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    Ok(match dims {
        Some(d) if d > 1 => Sample::Cloud(EmpiricalMeasureD::new(d, data)?),
        _ => Sample::Line(EmpiricalMeasure1D::new(data)?),
    })
}

/// A CSV file path, or a distribution to draw `n` points from.
pub fn resolve_source(
    spec: &str,
    column: Option<&Column>,
    dims: Option<usize>,
    n: Option<usize>,
    seed: u64,
    stream: u64,
) -> Result<EmpiricalMeasureD, CliError> {
    let path = Path::new(spec);
    if path.exists() {
        return Ok(load_samples(path, column, dims)?.into_cloud());
    }
    let dist: SourceDistribution = spec
        .parse()
        .map_err(|e| CliError::Usage(format!("'{spec}' is neither a readable file nor a distribution ({e})")))?;
    let n = n.ok_or_else(|| CliError::Usage(format!("sampling from '{spec}' needs --n")))?;
    let mut rng = substream(seed, stream);
    let dim = dist.validate()?;
    match dims {
        Some(d) if d > 1 && dim == 1 => {
            let draws = dist.sample_with(n * d, &mut rng)?.into_cloud();
            Ok(EmpiricalMeasureD::new(d, draws.as_flat().to_vec())?)
        }
        _ => Ok(dist.sample_with(n, &mut rng)?.into_cloud()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn header_detected_only_when_fully_non_numeric() {
        let f = csv("1,x\n2,y\n");
        let err = load_samples(f.path(), Some(&Column::Index(1)), None).unwrap_err();
        assert!(err.to_string().contains("row 1, column 2"), "{err}");
        let f = csv("a,b\n1,2\n3,4\n");
        let line = load_samples(f.path(), Some(&Column::from("b")), None).unwrap().into_line().unwrap();
        assert_eq!(line.values(), &[2.0, 4.0]);
    }

    #[test]
    fn dims_reads_consecutive_columns() {
        let f = csv("0,1,2\n3,4,5\n");
        let cloud = load_samples(f.path(), Some(&Column::Index(1)), Some(2)).unwrap().into_cloud();
        assert_eq!(cloud.as_flat(), &[1.0, 2.0, 4.0, 5.0]);
    }

    #[test]
    fn distribution_spec_needs_n() {
        assert!(matches!(resolve_source("unif(0,1)", None, None, None, 0, 0), Err(CliError::Usage(_))));
        assert_eq!(resolve_source("unif(0,1)", None, Some(2), Some(5), 0, 0).unwrap().len(), 5);
    }
}
