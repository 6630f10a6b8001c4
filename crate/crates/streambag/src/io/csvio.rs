//! CSV reader with an externally supplied schema: CSV carries no types, so
//! the schema arrives as a JSON sidecar (or programmatically). Nominal
//! columns may hold either the declared string value or its index.

use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use crate::data::{AttributeKind, Instance, Schema};
use crate::error::{Error, Result};

/// Single-pass iterator over CSV records typed by the schema.
pub struct CsvInstances {
    schema: Arc<Schema>,
    reader: csv::Reader<File>,
    /// 1-indexed line of the next record (after any header).
    line_no: usize,
}

impl Iterator for CsvInstances {
    type Item = Result<Instance>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut record = csv::StringRecord::new();
        match self.reader.read_record(&mut record) {
            Ok(false) => None,
            Ok(true) => {
                self.line_no += 1;
                Some(self.parse_record(&record))
            }
            Err(e) => {
                self.line_no += 1;
                Some(Err(Error::parse(self.line_no, e.to_string())))
            }
        }
    }
}

impl CsvInstances {
    fn parse_record(&self, record: &csv::StringRecord) -> Result<Instance> {
        let line_no = self.line_no;
        let want = self.schema.n_attributes() + 1;
        if record.len() != want {
            return Err(Error::parse(
                line_no,
                format!("expected {want} fields, found {}", record.len()),
            ));
        }
        let mut values = Vec::with_capacity(self.schema.n_attributes());
        for (col, field) in record.iter().take(record.len() - 1).enumerate() {
            let field = field.trim();
            let v = match &self.schema.attribute(col).kind {
                AttributeKind::Numeric => field.parse::<f64>().map_err(|_| {
                    Error::parse(line_no, format!("column {col}: {field:?} is not numeric"))
                })?,
                AttributeKind::Nominal { values } => {
                    match values.iter().position(|v| v == field) {
                        Some(i) => i as f64,
                        None => field.parse::<f64>().ok().filter(|v| {
                            v.fract() == 0.0 && *v >= 0.0 && (*v as usize) < values.len()
                        }).ok_or_else(|| {
                            Error::parse(
                                line_no,
                                format!("column {col}: unknown nominal value {field:?}"),
                            )
                        })?,
                    }
                }
            };
            values.push(v);
        }
        let class_field = record.get(record.len() - 1).expect("arity checked").trim();
        let label = match self.schema.class_values().iter().position(|v| v == class_field) {
            Some(i) => i as u32,
            None => class_field
                .parse::<u32>()
                .ok()
                .filter(|&i| (i as usize) < self.schema.n_classes())
                .ok_or_else(|| {
                    Error::parse(line_no, format!("unknown class value {class_field:?}"))
                })?,
        };
        Instance::new(&self.schema, values, label)
    }
}

/// Opens a CSV stream typed by `schema`. With `has_header`, the first line is
/// skipped (its content is not validated against the schema).
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: Arc<Schema>,
    has_header: bool,
) -> Result<CsvInstances> {
    let file = File::open(path.as_ref())?;
    let reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    Ok(CsvInstances { schema, reader, line_no: has_header as usize })
}

/// Reads a schema sidecar (the JSON serialization of [`Schema`]).
pub fn read_schema_json(path: impl AsRef<Path>) -> Result<Arc<Schema>> {
    let file = File::open(path.as_ref())?;
    let schema: Schema = serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| Error::schema(format!("invalid schema sidecar: {e}")))?;
    // revalidate: serde bypasses Schema::new
    let schema = Schema::new(schema.attributes().to_vec(), schema.class_values().to_vec())?;
    Ok(Arc::new(schema))
}

/// Writes the JSON sidecar for a schema.
pub fn write_schema_json(path: impl AsRef<Path>, schema: &Schema) -> Result<()> {
    let file = File::create(path.as_ref())?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), schema)
        .map_err(|e| Error::schema(format!("cannot serialize schema: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Attribute;
    use std::io::Write;

    fn toy_schema() -> Arc<Schema> {
        Arc::new(
            Schema::new(
                vec![
                    Attribute::numeric("x"),
                    Attribute::nominal("color", vec!["red".into(), "blue".into()]),
                ],
                vec!["no".into(), "yes".into()],
            )
            .unwrap(),
        )
    }

    fn write_fixture(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn typed_rows_load_with_and_without_header() {
        let with = write_fixture("x,color,class\n1.5,red,no\n2.5,blue,yes\n");
        let rows: Vec<Instance> =
            load_csv(with.path(), toy_schema(), true).unwrap().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].values(), [1.5, 0.0]);
        assert_eq!(rows[1].values(), [2.5, 1.0]);
        assert_eq!(rows[1].label(), 1);

        let without = write_fixture("1.5,red,no\n");
        let rows: Vec<Instance> =
            load_csv(without.path(), toy_schema(), false).unwrap().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 1);
    }

    #[test]
    fn nominal_and_class_columns_accept_declared_indices() {
        let f = write_fixture("2.0,1,0\n");
        let rows: Vec<Instance> =
            load_csv(f.path(), toy_schema(), false).unwrap().map(|r| r.unwrap()).collect();
        assert_eq!(rows[0].values(), [2.0, 1.0]);
        assert_eq!(rows[0].label(), 0);
    }

    #[test]
    fn unknown_nominal_value_is_named_in_the_error() {
        let f = write_fixture("1.0,green,no\n");
        let err = load_csv(f.path(), toy_schema(), false)
            .unwrap()
            .next()
            .unwrap()
            .unwrap_err()
            .to_string();
        assert!(err.contains("\"green\""), "{err}");
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn arity_mismatch_is_a_parse_error_with_line() {
        let f = write_fixture("1.0,red,no\n1.0,no\n");
        let results: Vec<_> = load_csv(f.path(), toy_schema(), false).unwrap().collect();
        assert!(results[0].is_ok());
        let err = results[1].as_ref().unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn schema_sidecar_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("schema.json");
        let schema = toy_schema();
        write_schema_json(&path, &schema).unwrap();
        let loaded = read_schema_json(&path).unwrap();
        assert_eq!(*loaded, *schema);
    }

    #[test]
    fn sidecar_with_duplicate_names_is_rejected_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("schema.json");
        std::fs::write(
            &path,
            r#"{"attributes":[{"name":"x","kind":"numeric"},{"name":"x","kind":"numeric"}],"class_values":["a","b"]}"#,
        )
        .unwrap();
        assert!(read_schema_json(&path).is_err());
    }

    #[test]
    fn hundred_thousand_rows_stream_lazily() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        {
            let mut w = std::io::BufWriter::new(&mut f);
            for i in 0..100_000 {
                writeln!(w, "{}.0,red,{}", i % 7, if i % 2 == 0 { "no" } else { "yes" }).unwrap();
            }
        }
        let mut count = 0u64;
        let mut label_sum = 0u64;
        for row in load_csv(f.path(), toy_schema(), false).unwrap() {
            let row = row.unwrap();
            count += 1;
            label_sum += row.label() as u64;
        }
        assert_eq!(count, 100_000);
        assert_eq!(label_sum, 50_000);
    }
}
