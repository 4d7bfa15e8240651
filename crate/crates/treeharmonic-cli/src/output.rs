//! Row-oriented report writing: csv, tsv or json-lines, always terminated by
//! a `# meta` line pinning the version, the invocation and the seed that
//! produced the file. Free-form notes ride along as `# `-prefixed lines so
//! the tabular part stays machine-readable.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Tsv,
    JsonLines,
}

impl Format {
    fn delim(self) -> char {
        match self {
            Format::Tsv => '\t',
            _ => ',',
        }
    }
}

/// One table cell; `Empty` renders as nothing (csv/tsv) or null (json-lines).
#[derive(Clone, Debug)]
pub enum Cell {
    Uint(u64),
    Num(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    pub fn opt_num(v: Option<f64>) -> Cell {
        v.map_or(Cell::Empty, Cell::Num)
    }

    fn plain(&self, delim: char) -> String {
        match self {
            Cell::Uint(v) => v.to_string(),
            Cell::Num(v) => v.to_string(),
            Cell::Text(s) => {
                if s.contains(delim) || s.contains('"') || s.contains('\n') {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Uint(v) => v.to_string(),
            Cell::Num(v) if v.is_finite() => v.to_string(),
            Cell::Num(_) => "null".to_string(),
            Cell::Text(s) => serde_json::to_string(s).expect("plain string serializes"),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => "null".to_string(),
        }
    }
}

/// A report: fixed header, rows, notes, and the final meta line.
pub struct Report {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
    notes: Vec<String>,
}

impl Report {
    pub fn new(header: &[&'static str]) -> Self {
        Report { header: header.to_vec(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn write(&self, w: &mut dyn Write, format: Format, meta: &str) -> io::Result<()> {
        match format {
            Format::Csv | Format::Tsv => {
                let d = format.delim().to_string();
                writeln!(w, "{}", self.header.join(&d))?;
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|c| c.plain(format.delim())).collect();
                    writeln!(w, "{}", cells.join(&d))?;
                }
            }
            Format::JsonLines => {
                for row in &self.rows {
                    let mut line = String::from("{");
                    for (i, (key, cell)) in self.header.iter().zip(row).enumerate() {
                        if i > 0 {
                            line.push(',');
                        }
                        let _ = write!(
                            line,
                            "{}:{}",
                            serde_json::to_string(key).expect("plain key serializes"),
                            cell.json()
                        );
                    }
                    line.push('}');
                    writeln!(w, "{line}")?;
                }
            }
        }
        for n in &self.notes {
            writeln!(w, "# {n}")?;
        }
        writeln!(w, "{meta}")?;
        Ok(())
    }
}

/// Plain-text report: lines, then the meta line.
pub fn write_text(w: &mut dyn Write, lines: &[String], meta: &str) -> io::Result<()> {
    for l in lines {
        writeln!(w, "{l}")?;
    }
    writeln!(w, "{meta}")?;
    Ok(())
}

pub fn open_sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// The trailing line every report carries; identical invocations produce
/// identical metas, so whole outputs can be byte-compared.
pub fn meta_line(seed: Option<u64>) -> String {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let mut s = format!("# meta version={} config=\"{}\"", env!("CARGO_PKG_VERSION"), argv.join(" "));
    if let Some(seed) = seed {
        let _ = write!(s, " seed={seed}");
    }
    s
}
