use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ColumnSchema, TabularDataset, VariableKind};
use crate::{Error, Result};

/// Fixed 17-significant-digit formatting so floats round-trip bit-exactly
/// and output bytes are stable across runs.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn is_missing_token(token: &str) -> bool {
    token.is_empty() || token.eq_ignore_ascii_case("na") || token.eq_ignore_ascii_case("nan")
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Vec<ColumnSchema>> {
    let schema: Vec<ColumnSchema> = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    super::validate_schema(&schema)?;
    Ok(schema)
}

pub fn save_schema(schema: &[ColumnSchema], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, schema)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>, schema: &[ColumnSchema]) -> Result<TabularDataset> {
    let path = path.as_ref();
    read_csv(File::open(path)?, schema, path)
}

/// Parses CSV text against a schema. `source` only labels error messages.
pub fn read_csv<R: Read>(reader: R, schema: &[ColumnSchema], source: &Path) -> Result<TabularDataset> {
    super::validate_schema(schema)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let expected: Vec<&str> = schema.iter().map(|c| c.name.as_str()).collect();
    if header != expected {
        return Err(Error::Schema(format!(
            "{}: header {header:?} does not match schema {expected:?}",
            source.display()
        )));
    }

    let parse_err = |row: usize, col: usize, message: String| Error::Parse {
        path: source.to_path_buf(),
        row,
        column: schema[col.min(schema.len() - 1)].name.clone(),
        message,
    };

    let mut values = Vec::new();
    let mut missing = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based data row numbering, header excluded
        let row = i + 1;
        if record.len() != schema.len() {
            return Err(parse_err(
                row,
                record.len().min(schema.len()),
                format!("expected {} fields, found {}", schema.len(), record.len()),
            ));
        }
        for (col, (token, spec)) in record.iter().zip(schema).enumerate() {
            if is_missing_token(token) {
                values.push(0.0);
                missing.push(true);
                continue;
            }
            let v = match spec.kind {
                VariableKind::Continuous => token
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(row, col, format!("'{token}' is not a finite number")))?,
                VariableKind::Binary => match token {
                    "0" => 0.0,
                    "1" => 1.0,
                    _ => return Err(parse_err(row, col, format!("binary value must be 0 or 1, got '{token}'"))),
                },
                VariableKind::Categorical => spec
                    .labels
                    .iter()
                    .position(|l| l == token)
                    .ok_or_else(|| parse_err(row, col, format!("unknown category '{token}'")))?
                    as f64,
            };
            values.push(v);
            missing.push(false);
        }
    }
    TabularDataset::new(schema.to_vec(), values, missing)
}

pub fn write_csv(ds: &TabularDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv_to(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_csv_to<W: Write>(ds: &TabularDataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(ds.schema().iter().map(|c| c.name.as_str()))?;
    let mut record = Vec::with_capacity(ds.n_columns());
    for r in 0..ds.n_samples() {
        record.clear();
        for (c, spec) in ds.schema().iter().enumerate() {
            record.push(match ds.get(r, c) {
                None => "NA".to_string(),
                Some(v) => match spec.kind {
                    VariableKind::Continuous => format_float(v),
                    VariableKind::Binary => format!("{}", v as u8),
                    VariableKind::Categorical => spec.labels[v as usize].clone(),
                },
            });
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::test_support::mixed_schema;
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<TabularDataset> {
        read_csv(text.as_bytes(), &mixed_schema(), Path::new("test.csv"))
    }

    #[test]
    fn empty_field_is_missing() {
        let ds = parse("temp,rain,bridge\n1.5,0,a\n,1,b\n2.5,1,c\n").unwrap();
        assert_eq!(ds.n_samples(), 3);
        assert_eq!(ds.missing_count(), 1);
        assert!(ds.is_missing(1, 0));
        assert_eq!(ds.get(2, 2), Some(2.0));
    }

    #[test]
    fn na_tokens_case_insensitive() {
        let ds = parse("temp,rain,bridge\nna,NA,NaN\n1,0,a\n").unwrap();
        assert_eq!(ds.missing_count(), 3);
    }

    #[test]
    fn errors_carry_location() {
        let err = parse("temp,rain,bridge\n1,0,a\n1,2,a\n").unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("'rain'"), "{err}");

        let err = parse("temp,rain,bridge\n1,0,z\n").unwrap_err().to_string();
        assert!(err.contains("unknown category") && err.contains("'bridge'"), "{err}");

        let err = parse("temp,rain,bridge\nabc,0,a\n").unwrap_err().to_string();
        assert!(err.contains("row 1") && err.contains("'temp'"), "{err}");

        let err = parse("temp,rain,bridge\n1,0\n").unwrap_err().to_string();
        assert!(err.contains("expected 3 fields"), "{err}");

        assert!(matches!(parse("temp,bridge,rain\n1,a,0\n"), Err(Error::Schema(_))));
    }

    proptest! {
        #[test]
        fn write_then_read_is_identity(
            cells in prop::collection::vec((-1e6f64..1e6, 0u8..2, 0usize..3, any::<[bool; 3]>()), 1..30)
        ) {
            let mut values = Vec::new();
            let mut missing = Vec::new();
            for (x, b, c, m) in &cells {
                values.extend([*x, f64::from(*b), *c as f64]);
                missing.extend(m);
            }
            let ds = TabularDataset::new(mixed_schema(), values, missing).unwrap();
            let mut buf = Vec::new();
            write_csv_to(&ds, &mut buf).unwrap();
            let back = read_csv(buf.as_slice(), &mixed_schema(), Path::new("mem")).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
