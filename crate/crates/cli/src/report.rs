use std::fs;
use std::io::Write;
use std::path::Path;

use crate::args::Format;
use crate::CliError;

pub type Pairs = Vec<(String, String)>;

/// A command's output: zero or more uniform records followed by summary
/// fields. Text puts each record on one line and each summary field on its
/// own line; CSV repeats the summary columns on every record row.
#[derive(Debug, Default)]
pub struct Report {
    pub records: Vec<Pairs>,
    pub summary: Pairs,
}

impl Report {
    pub fn summary(summary: Pairs) -> Self {
        Report { records: Vec::new(), summary }
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Text => Ok(self.text().into_bytes()),
            Format::Csv => self.csv(),
        }
    }

    fn text(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let line: Vec<String> = r.iter().map(|(k, v)| format!("{k}={v}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        for (k, v) in &self.summary {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    fn csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let rows: Vec<Pairs> = if self.records.is_empty() {
            vec![self.summary.clone()]
        } else {
            self.records
                .iter()
                .map(|r| r.iter().chain(&self.summary).cloned().collect())
                .collect()
        };
        if let Some(first) = rows.first() {
            w.write_record(first.iter().map(|(k, _)| k))?;
        }
        for r in &rows {
            w.write_record(r.iter().map(|(_, v)| v))?;
        }
        w.into_inner().map_err(|e| CliError::Input(format!("csv buffer: {e}")))
    }
}

pub fn pair(key: &str, value: impl ToString) -> (String, String) {
    (key.to_string(), value.to_string())
}

pub fn emit(bytes: &[u8], out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| CliError::Input(format!("cannot write output {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Input(format!("cannot write to standard output: {e}")))
        }
    }
}
