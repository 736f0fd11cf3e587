//! Result tables as CSV or JSON.
//!
//! CSV files open with a `# schema` comment line; JSON files wrap the rows
//! in an object carrying the same schema tag.

use std::io::Write;

use serde::Serialize;

use crate::experiment::SCHEMA_VERSION;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Serialize)]
struct Document<'a, T> {
    schema: String,
    rows: &'a [T],
}

/// `batch-auction/<table>/v<version>`.
pub fn schema_tag(table: &str) -> String {
    format!("batch-auction/{table}/v{SCHEMA_VERSION}")
}

/// Renders `rows` of `table` in `format`.
pub fn render<T: Serialize>(table: &str, rows: &[T], format: Format) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    match format {
        Format::Csv => {
            writeln!(out, "# schema: {}", schema_tag(table))?;
            let mut writer = csv::Writer::from_writer(&mut out);
            for row in rows {
                writer.serialize(row)?;
            }
            writer.flush()?;
        }
        Format::Json => {
            let doc = Document {
                schema: schema_tag(table),
                rows,
            };
            serde_json::to_writer_pretty(&mut out, &doc)?;
            out.push(b'\n');
        }
    }
    Ok(out)
}
