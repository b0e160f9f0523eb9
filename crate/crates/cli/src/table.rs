use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde_json::{Map, Value};

use crate::config::Format;
use crate::CliError;

/// Rows with fixed headers, written as CSV or as a JSON array of objects.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Table { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    fn cell(v: &Value) -> String {
        match v {
            Value::Null => String::new(),
            Value::String(s) => s.clone(),
            other => other.to_string(),
        }
    }

    pub fn write<W: Write>(&self, w: W, format: Format) -> io::Result<()> {
        match format {
            Format::Csv => {
                let mut wr = csv::Writer::from_writer(w);
                wr.write_record(&self.headers)?;
                for row in &self.rows {
                    wr.write_record(row.iter().map(Self::cell))?;
                }
                wr.flush()
            }
            Format::Json => {
                let objs: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| Value::Object(self.headers.iter().cloned().zip(row.iter().cloned()).collect::<Map<_, _>>()))
                    .collect();
                let mut w = w;
                serde_json::to_writer_pretty(&mut w, &objs)?;
                writeln!(w)
            }
        }
    }

    /// Whitespace-separated columns with a `#` header line, for gnuplot.
    pub fn write_plot_data<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# {}", self.headers.join(" "))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| if v.is_null() { "nan".into() } else { Self::cell(v) }).collect();
            writeln!(w, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Writes `table` to `<out>/<stem>.<ext>`, or to stdout without an output directory.
pub fn emit(table: &Table, out: Option<&Path>, stem: &str, format: Format) -> Result<(), CliError> {
    let io_err = |e: io::Error| CliError::Config(format!("writing {stem}: {e}"));
    match out {
        None => table.write(io::stdout().lock(), format).map_err(io_err),
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err)?;
            let ext = match format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            let file = fs::File::create(dir.join(format!("{stem}.{ext}"))).map_err(io_err)?;
            table.write(io::BufWriter::new(file), format).map_err(io_err)
        }
    }
}

pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn text(s: impl Into<String>) -> Value {
    Value::String(s.into())
}
