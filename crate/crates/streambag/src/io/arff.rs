//! Minimal ARFF reader: `@relation`, `@attribute` (numeric or nominal),
//! `@data`, dense comma-separated rows. The last attribute is the class and
//! must be nominal. Missing values (`?`) are rejected — incremental learners
//! here have no imputation path — and every parse error carries the
//! 1-indexed line number.

use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::Path;
use std::sync::Arc;

use crate::data::{Attribute, Instance, Schema};
use crate::error::{Error, Result};

/// Strips an optional matching pair of single or double quotes.
fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['\'', '"'] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

fn is_comment_or_blank(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('%')
}

struct HeaderAttr {
    name: String,
    nominal: Option<Vec<String>>,
}

fn parse_attribute(line: &str, line_no: usize) -> Result<HeaderAttr> {
    // syntax: @attribute <name> <numeric|real|integer|{v1,v2,...}>
    let rest = line.trim()[("@attribute".len())..].trim_start();
    if rest.is_empty() {
        return Err(Error::parse(line_no, "@attribute needs a name and a type"));
    }
    let (raw_name, raw_type) = if let Some(stripped) = rest.strip_prefix(['\'', '"']) {
        let quote = rest.chars().next().unwrap();
        match stripped.find(quote) {
            Some(end) => (&stripped[..end], stripped[end + 1..].trim_start()),
            None => return Err(Error::parse(line_no, "unterminated quoted attribute name")),
        }
    } else {
        match rest.split_once(char::is_whitespace) {
            Some((name, ty)) => (name, ty.trim_start()),
            None => return Err(Error::parse(line_no, "@attribute needs a name and a type")),
        }
    };
    if raw_type.is_empty() {
        return Err(Error::parse(line_no, format!("attribute {raw_name:?} is missing its type")));
    }
    let nominal = if raw_type.starts_with('{') {
        let inner = raw_type
            .strip_prefix('{')
            .and_then(|t| t.trim_end().strip_suffix('}'))
            .ok_or_else(|| Error::parse(line_no, "nominal value list must close with '}'"))?;
        let values: Vec<String> =
            inner.split(',').map(|v| unquote(v).to_string()).collect();
        if values.iter().any(String::is_empty) {
            return Err(Error::parse(line_no, "empty nominal value in list"));
        }
        Some(values)
    } else {
        match raw_type.to_ascii_lowercase().as_str() {
            "numeric" | "real" | "integer" => None,
            other => {
                return Err(Error::parse(
                    line_no,
                    format!("unsupported attribute type {other:?} (numeric, real, integer, or a nominal list)"),
                ))
            }
        }
    };
    Ok(HeaderAttr { name: unquote(raw_name).to_string(), nominal })
}

/// Single-pass iterator over the data section of an ARFF file.
pub struct ArffInstances {
    schema: Arc<Schema>,
    /// Nominal value tables per feature column (None = numeric).
    feature_values: Vec<Option<Vec<String>>>,
    lines: Lines<BufReader<File>>,
    line_no: usize,
}

impl Iterator for ArffInstances {
    type Item = Result<Instance>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if is_comment_or_blank(&line) {
                continue;
            }
            return Some(self.parse_row(line.trim()));
        }
    }
}

impl ArffInstances {
    fn parse_row(&self, row: &str) -> Result<Instance> {
        let line_no = self.line_no;
        if row.starts_with('{') {
            return Err(Error::parse(line_no, "sparse ARFF rows are not supported"));
        }
        let fields: Vec<&str> = row.split(',').map(unquote).collect();
        let want = self.schema.n_attributes() + 1;
        if fields.len() != want {
            return Err(Error::parse(
                line_no,
                format!("expected {want} fields, found {}", fields.len()),
            ));
        }
        let mut values = Vec::with_capacity(self.schema.n_attributes());
        for (col, field) in fields[..fields.len() - 1].iter().enumerate() {
            if *field == "?" {
                return Err(Error::parse(line_no, format!("missing value in column {col}")));
            }
            let v = match &self.feature_values[col] {
                None => field.parse::<f64>().map_err(|_| {
                    Error::parse(line_no, format!("column {col}: {field:?} is not numeric"))
                })?,
                Some(values) => values
                    .iter()
                    .position(|v| v == field)
                    .ok_or_else(|| {
                        Error::parse(
                            line_no,
                            format!("column {col}: unknown nominal value {field:?}"),
                        )
                    })? as f64,
            };
            values.push(v);
        }
        let class_field = fields[fields.len() - 1];
        if class_field == "?" {
            return Err(Error::parse(line_no, "missing class value"));
        }
        let label = self
            .schema
            .class_values()
            .iter()
            .position(|v| v == class_field)
            .ok_or_else(|| {
                Error::parse(line_no, format!("unknown class value {class_field:?}"))
            })? as u32;
        Instance::new(&self.schema, values, label)
    }
}

/// Parses the header and hands back the schema plus a lazy row iterator.
pub fn load_arff(path: impl AsRef<Path>) -> Result<(Arc<Schema>, ArffInstances)> {
    let file = File::open(path.as_ref())?;
    let mut lines = BufReader::new(file).lines();
    let mut line_no = 0usize;
    let mut attrs: Vec<HeaderAttr> = Vec::new();
    let mut saw_relation = false;

    loop {
        let line = match lines.next() {
            Some(line) => line?,
            None => return Err(Error::parse(line_no, "file ended before @data")),
        };
        line_no += 1;
        if is_comment_or_blank(&line) {
            continue;
        }
        let lower = line.trim().to_ascii_lowercase();
        if lower.starts_with("@relation") {
            saw_relation = true;
        } else if lower.starts_with("@attribute") {
            attrs.push(parse_attribute(&line, line_no)?);
        } else if lower == "@data" || lower.starts_with("@data") {
            break;
        } else {
            return Err(Error::parse(line_no, format!("unexpected header line {:?}", line.trim())));
        }
    }
    if !saw_relation {
        return Err(Error::parse(line_no, "header has no @relation declaration"));
    }
    if attrs.len() < 2 {
        return Err(Error::parse(line_no, "need at least one feature and a class attribute"));
    }
    let class = attrs.pop().expect("length checked above");
    let class_values = class.nominal.ok_or_else(|| {
        Error::parse(line_no, "the last attribute is the class and must be nominal")
    })?;

    let mut feature_values = Vec::with_capacity(attrs.len());
    let mut schema_attrs = Vec::with_capacity(attrs.len());
    for a in attrs {
        match a.nominal {
            None => {
                schema_attrs.push(Attribute::numeric(a.name));
                feature_values.push(None);
            }
            Some(values) => {
                schema_attrs.push(Attribute::nominal(a.name, values.clone()));
                feature_values.push(Some(values));
            }
        }
    }
    let schema = Arc::new(Schema::new(schema_attrs, class_values)?);
    Ok((Arc::clone(&schema), ArffInstances { schema, feature_values, lines, line_no }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_fixture(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const MINIMAL: &str = "\
% toy fixture
@relation toy

@attribute x1 numeric
@attribute color {red,green,blue}
@attribute class {no,yes}
@data
0.5,red,no
1.25,blue,yes
";

    #[test]
    fn minimal_two_row_file_round_trips() {
        let f = write_fixture(MINIMAL);
        let (schema, rows) = load_arff(f.path()).unwrap();
        assert_eq!(schema.n_attributes(), 2);
        assert_eq!(schema.n_classes(), 2);
        assert_eq!(schema.class_values(), ["no", "yes"]);
        let rows: Vec<Instance> = rows.map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].values(), [0.5, 0.0]);
        assert_eq!(rows[0].label(), 0);
        assert_eq!(rows[1].values(), [1.25, 2.0]);
        assert_eq!(rows[1].label(), 1);
    }

    #[test]
    fn quoted_names_and_case_insensitive_keywords_parse() {
        let f = write_fixture(
            "@RELATION 'toy set'\n@ATTRIBUTE 'the x' REAL\n@attribute class {a,b}\n@DATA\n3,b\n",
        );
        let (schema, rows) = load_arff(f.path()).unwrap();
        assert_eq!(schema.attribute(0).name, "the x");
        let rows: Vec<Instance> = rows.map(|r| r.unwrap()).collect();
        assert_eq!(rows[0].label(), 1);
    }

    #[test]
    fn missing_values_are_rejected_with_the_line_number() {
        let f = write_fixture(
            "@relation t\n@attribute x numeric\n@attribute class {a,b}\n@data\n1,a\n?,b\n",
        );
        let (_, mut rows) = load_arff(f.path()).unwrap();
        assert!(rows.next().unwrap().is_ok());
        let err = rows.next().unwrap().unwrap_err().to_string();
        assert!(err.contains("line 6"), "{err}");
        assert!(err.contains("missing value"), "{err}");
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let f = write_fixture(
            "@relation t\n@attribute x numeric\n@attribute class {a,b}\n@data\n1,a\n1,2,a\n",
        );
        let (_, rows) = load_arff(f.path()).unwrap();
        let results: Vec<_> = rows.collect();
        assert!(results[0].is_ok());
        let err = results[1].as_ref().unwrap_err().to_string();
        assert!(err.contains("line 6") && err.contains("expected 2 fields"), "{err}");
    }

    #[test]
    fn header_errors_are_specific() {
        for (content, needle) in [
            ("@relation t\n@attribute x numeric\n@data\n", "at least one feature"),
            ("@relation t\n@attribute x numeric\n@attribute y numeric\n@data\n", "must be nominal"),
            ("@attribute x numeric\n@attribute c {a,b}\n@data\n", "no @relation"),
            ("@relation t\n@attribute x suspicious\n@attribute c {a,b}\n@data\n", "unsupported attribute type"),
            ("@relation t\n@attribute x numeric\n@attribute c {a,b}\n", "before @data"),
            ("@relation t\nbogus line\n@data\n", "unexpected header line"),
        ] {
            let f = write_fixture(content);
            let err = match load_arff(f.path()) {
                Err(e) => e.to_string(),
                Ok(_) => panic!("fixture should fail: {content:?}"),
            };
            assert!(err.contains(needle), "wanted {needle:?} in {err}");
        }
    }

    #[test]
    fn unknown_nominal_and_class_values_fail() {
        let f = write_fixture(
            "@relation t\n@attribute c {x,y}\n@attribute class {a,b}\n@data\nz,a\nx,q\n",
        );
        let (_, rows) = load_arff(f.path()).unwrap();
        let results: Vec<_> = rows.collect();
        let e0 = results[0].as_ref().unwrap_err().to_string();
        assert!(e0.contains("unknown nominal value \"z\""), "{e0}");
        let e1 = results[1].as_ref().unwrap_err().to_string();
        assert!(e1.contains("unknown class value \"q\""), "{e1}");
    }

    #[test]
    fn comments_and_blanks_are_ignored_in_data() {
        let f = write_fixture(
            "@relation t\n@attribute x numeric\n@attribute class {a,b}\n@data\n% c\n\n1,a\n\n2,b\n",
        );
        let (_, rows) = load_arff(f.path()).unwrap();
        let rows: Vec<Instance> = rows.map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].values(), [2.0]);
    }

    #[test]
    fn sparse_rows_are_rejected() {
        let f = write_fixture(
            "@relation t\n@attribute x numeric\n@attribute class {a,b}\n@data\n{0 1, 1 a}\n",
        );
        let (_, mut rows) = load_arff(f.path()).unwrap();
        let err = rows.next().unwrap().unwrap_err().to_string();
        assert!(err.contains("sparse"), "{err}");
    }
}
