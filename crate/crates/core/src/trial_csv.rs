//! Trial files: CSV with header `trial,a,b,A,B`, settings `1`/`2`, outcomes
//! `1` (click) or `0` (undetected), LF line endings.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{Outcome, Setting, TrialRecord};

pub const HEADER: [&str; 5] = ["trial", "a", "b", "A", "B"];

pub struct TrialWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TrialWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        inner.write_record(HEADER)?;
        Ok(TrialWriter { inner })
    }

    pub fn write(&mut self, t: &TrialRecord) -> Result<()> {
        let flag = |o: Outcome| if o.is_plus() { "1" } else { "0" };
        let label = |s: Setting| if s == Setting::First { "1" } else { "2" };
        self.inner.write_record([
            t.index.to_string().as_str(),
            label(t.a),
            label(t.b),
            flag(t.alice),
            flag(t.bob),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(|e| Error::io("<trial output>", e))?;
        self.inner
            .into_inner()
            .map_err(|e| Error::io("<trial output>", e.into_error()))
    }
}

/// Writes all trials to `path`, returning how many were written.
pub fn write_trials_file(path: &Path, trials: impl IntoIterator<Item = TrialRecord>) -> Result<u64> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = TrialWriter::new(BufWriter::new(file))?;
    let mut n = 0;
    for t in trials {
        w.write(&t)?;
        n += 1;
    }
    w.finish()?.flush().map_err(|e| Error::io(path, e))?;
    Ok(n)
}

/// Streaming reader; each item is one parsed trial.
pub struct TrialReader<R: Read> {
    records: csv::ByteRecordsIntoIter<R>,
    name: String,
}

impl<R: Read> TrialReader<R> {
    pub fn new(reader: R, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.byte_headers()?.clone();
        let matches =
            header.len() == HEADER.len() && header.iter().zip(HEADER.iter()).all(|(h, want)| h == want.as_bytes());
        if !matches {
            return Err(Error::Parse {
                path: name,
                line: 1,
                msg: format!("expected header `{}`", HEADER.join(",")),
            });
        }
        Ok(TrialReader {
            records: rdr.into_byte_records(),
            name,
        })
    }

    fn parse(&self, rec: &csv::ByteRecord) -> Result<TrialRecord> {
        let line = rec.position().map_or(0, |p| p.line());
        let err = |msg: String| Error::Parse {
            path: self.name.clone(),
            line,
            msg,
        };
        if rec.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", rec.len())));
        }
        let index = std::str::from_utf8(&rec[0])
            .ok()
            .and_then(|s| s.trim().parse::<u64>().ok())
            .filter(|&i| i >= 1)
            .ok_or_else(|| err("trial index must be a positive integer".into()))?;
        let setting = |f: &[u8], name: &str| match f {
            b"1" => Ok(Setting::First),
            b"2" => Ok(Setting::Second),
            _ => Err(err(format!("{name} must be 1 or 2"))),
        };
        let outcome = |f: &[u8], name: &str| match f {
            b"1" => Ok(Outcome::Plus),
            b"0" => Ok(Outcome::Undetected),
            _ => Err(err(format!("{name} must be 1 or 0"))),
        };
        Ok(TrialRecord {
            index,
            a: setting(&rec[1], "a")?,
            b: setting(&rec[2], "b")?,
            alice: outcome(&rec[3], "A")?,
            bob: outcome(&rec[4], "B")?,
        })
    }
}

impl<R: Read> Iterator for TrialReader<R> {
    type Item = Result<TrialRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let rec = self.records.next()?;
        Some(rec.map_err(Error::from).and_then(|r| self.parse(&r)))
    }
}

pub fn open_trials_file(path: &Path) -> Result<TrialReader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    TrialReader::new(BufReader::new(file), path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<TrialRecord> {
        vec![
            TrialRecord {
                index: 1,
                a: Setting::First,
                b: Setting::Second,
                alice: Outcome::Plus,
                bob: Outcome::Undetected,
            },
            TrialRecord {
                index: 12345678901,
                a: Setting::Second,
                b: Setting::Second,
                alice: Outcome::Undetected,
                bob: Outcome::Plus,
            },
        ]
    }

    #[test]
    fn exact_bytes() {
        let mut w = TrialWriter::new(Vec::new()).unwrap();
        for t in sample() {
            w.write(&t).unwrap();
        }
        let bytes = w.finish().unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "trial,a,b,A,B\n1,1,2,1,0\n12345678901,2,2,0,1\n"
        );
    }

    #[test]
    fn reads_back() {
        let text = "trial,a,b,A,B\n1,1,2,1,0\n12345678901,2,2,0,1\n";
        let got: Vec<_> = TrialReader::new(text.as_bytes(), "mem")
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(got, sample());
    }

    #[test]
    fn rejects_bad_header_and_fields() {
        assert!(TrialReader::new("n,a,b,A,B\n".as_bytes(), "mem").is_err());
        let bad = "trial,a,b,A,B\n1,3,1,1,0\n";
        let r: Vec<_> = TrialReader::new(bad.as_bytes(), "mem").unwrap().collect();
        match &r[0] {
            Err(Error::Parse { line, .. }) => assert_eq!(*line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let bad = "trial,a,b,A,B\n0,1,1,1,0\n";
        assert!(TrialReader::new(bad.as_bytes(), "mem")
            .unwrap()
            .next()
            .unwrap()
            .is_err());
    }
}
