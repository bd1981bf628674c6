//! JSON Lines logits files: one [`LogitRecord`] per line.
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! write/read cycle preserves every decode decision.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::decode::LogitRecord;
use crate::error::{Error, Result};

/// Streams validated records from JSON Lines input. Blank lines are skipped.
pub struct LogitReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> LogitReader<R> {
    pub fn new(reader: R) -> Self {
        LogitReader {
            lines: reader.lines(),
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for LogitReader<R> {
    type Item = Result<LogitRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line_no = self.line_no;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::LogitsLine { line: line_no, message: e.to_string() })),
            };
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<LogitRecord>(&line)
                .map_err(|e| Error::LogitsLine {
                    line: line_no,
                    message: e.to_string(),
                })
                .and_then(|r| {
                    r.validate().map_err(|e| Error::LogitsLine {
                        line: line_no,
                        message: e.to_string(),
                    })?;
                    Ok(r)
                });
            return Some(parsed);
        }
    }
}

pub fn read_logit_records(path: impl AsRef<Path>) -> Result<LogitReader<BufReader<File>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(LogitReader::new(BufReader::new(file)))
}

/// Writes records as JSON Lines. Records are validated first.
pub fn write_logit_lines<'a, W: Write>(
    mut writer: W,
    records: impl IntoIterator<Item = &'a LogitRecord>,
) -> Result<()> {
    for r in records {
        r.validate()?;
        serde_json::to_writer(&mut writer, r)?;
        writer
            .write_all(b"\n")
            .map_err(|e| Error::io("<logits output>", e))?;
    }
    writer.flush().map_err(|e| Error::io("<logits output>", e))
}

pub fn write_logit_records<'a>(
    records: impl IntoIterator<Item = &'a LogitRecord>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_logit_lines(BufWriter::new(file), records)
}
