//! Session ingestion: JSONL (one object per line) and CSV with a header row.
//!
//! CSV columns are `account_id, device_id, ip_address, t, y, tau` plus one
//! `x<j>` column per feature; an empty `tau` cell means never adjudicated.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::session::{Session, NEVER};

/// Per-record invariants, reported against the 1-based source line. The
/// feature dimension is fixed by the first record.
fn check_record(s: &Session, line: usize, out: &[Session]) -> Result<()> {
    let dim = out.first().map_or(s.x.len(), |f| f.x.len());
    s.validate(line, dim).map_err(|e| Error::Parse {
        line,
        msg: match e {
            Error::InvalidSession { reason, .. } => reason,
            Error::FeatureDim { expected, found, .. } => format!("{found} features, expected {expected}"),
            other => other.to_string(),
        },
    })
}

pub fn parse_jsonl(text: &str) -> Result<Vec<Session>> {
    read_jsonl(text.as_bytes())
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<Session>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Session = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        check_record(&s, i + 1, &out)?;
        out.push(s);
    }
    if out.is_empty() {
        return Err(Error::Empty);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut w: W, sessions: &[Session]) -> Result<()> {
    for s in sessions {
        serde_json::to_writer(&mut w, s).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

const CSV_FIXED: [&str; 6] = ["account_id", "device_id", "ip_address", "t", "y", "tau"];

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<Session>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .clone();

    let mut fixed = [usize::MAX; 6];
    let mut features: Vec<(usize, usize)> = Vec::new();
    for (col, name) in header.iter().enumerate() {
        let name = name.trim();
        if let Some(k) = CSV_FIXED.iter().position(|f| *f == name) {
            fixed[k] = col;
        } else if let Some(j) = name.strip_prefix('x').and_then(|r| r.parse::<usize>().ok()) {
            features.push((j, col));
        } else {
            return Err(Error::Parse { line: 1, msg: format!("unknown column `{name}`") });
        }
    }
    if let Some(k) = fixed.iter().position(|&c| c == usize::MAX) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("missing column `{}`", CSV_FIXED[k]),
        });
    }
    features.sort_unstable();
    if features.iter().enumerate().any(|(i, &(j, _))| i != j) {
        return Err(Error::Parse {
            line: 1,
            msg: "feature columns must be x0..x<d-1> without gaps".into(),
        });
    }

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(i + 2, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(i + 2, |p| p.line() as usize);
        let field = |k: usize| rec.get(fixed[k]).unwrap_or("").trim();
        let int = |k: usize| -> Result<i64> {
            field(k).parse::<i64>().map_err(|e| Error::Parse {
                line,
                msg: format!("column `{}`: {e}", CSV_FIXED[k]),
            })
        };
        let tau = if field(5).is_empty() { NEVER } else { int(5)? };
        let y = field(4).parse::<u8>().map_err(|e| Error::Parse {
            line,
            msg: format!("column `y`: {e}"),
        })?;
        let x = features
            .iter()
            .map(|&(j, col)| {
                rec.get(col).unwrap_or("").trim().parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    msg: format!("column `x{j}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let s = Session {
            account_id: field(0).to_owned(),
            device_id: field(1).to_owned(),
            ip_address: field(2).to_owned(),
            t: int(3)?,
            x,
            y,
            tau,
        };
        check_record(&s, line, &out)?;
        out.push(s);
    }
    if out.is_empty() {
        return Err(Error::Empty);
    }
    Ok(out)
}

pub fn write_csv<W: Write>(w: W, sessions: &[Session]) -> Result<()> {
    let dim = sessions.first().map_or(0, |s| s.x.len());
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = CSV_FIXED.iter().map(|s| s.to_string()).collect();
    header.extend((0..dim).map(|j| format!("x{j}")));
    wtr.write_record(&header).map_err(csv_io)?;
    for s in sessions {
        let mut rec = vec![
            s.account_id.clone(),
            s.device_id.clone(),
            s.ip_address.clone(),
            s.t.to_string(),
            s.y.to_string(),
            if s.tau == NEVER { String::new() } else { s.tau.to_string() },
        ];
        rec.extend(s.x.iter().map(|v| v.to_string()));
        wtr.write_record(&rec).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads sessions from `.csv` or JSONL (any other extension).
pub fn load_sessions(path: impl AsRef<Path>) -> Result<Vec<Session>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    if is_csv(path) {
        read_csv(BufReader::new(file))
    } else {
        read_jsonl(BufReader::new(file))
    }
}

pub fn save_sessions(path: impl AsRef<Path>, sessions: &[Session]) -> Result<()> {
    let path = path.as_ref();
    let file = BufWriter::new(File::create(path)?);
    if is_csv(path) {
        write_csv(file, sessions)
    } else {
        write_jsonl(file, sessions)
    }
}
