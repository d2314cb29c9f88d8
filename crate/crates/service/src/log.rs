//! Append-only JSONL event log.
//!
//! Each event is one line written with a single `write_all` and flushed
//! before the append returns. A crash can leave at most one partial line at
//! the tail; opening the log drops it. Damage anywhere else is refused.

use std::fs::{File, OpenOptions};
use std::io::{self, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::event::{Event, EventPayload};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("event log i/o: {0}")]
    Io(#[from] io::Error),
    #[error("event log corrupt at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

/// What opening a log had to discard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Recovery {
    pub events: usize,
    pub truncated_bytes: u64,
}

/// Parses a log image. A trailing line that is unterminated or unparseable
/// counts as a torn write; any other bad line or a sequence gap is corruption.
pub fn parse_log(bytes: &[u8]) -> Result<(Vec<Event>, u64), LogError> {
    let mut events: Vec<Event> = Vec::new();
    let mut good_len = 0u64;
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        line_no += 1;
        let rest = &bytes[offset..];
        let (line, terminated) = match rest.iter().position(|b| *b == b'\n') {
            Some(i) => (&rest[..i], true),
            None => (rest, false),
        };
        let next = offset + line.len() + usize::from(terminated);
        let is_last = next >= bytes.len();
        let parsed = std::str::from_utf8(line)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str::<Event>(s).map_err(|e| e.to_string()));
        match parsed {
            Ok(ev) if terminated => {
                let expected = events.len() as u64 + 1;
                if ev.seq != expected {
                    return Err(LogError::Corrupt {
                        line: line_no,
                        reason: format!("sequence {} where {expected} was expected", ev.seq),
                    });
                }
                events.push(ev);
                good_len = next as u64;
            }
            _ if is_last => break,
            Ok(_) => unreachable!("only the last line can be unterminated"),
            Err(reason) => return Err(LogError::Corrupt { line: line_no, reason }),
        }
        offset = next;
    }
    Ok((events, good_len))
}

pub fn read_log(path: &Path) -> Result<Vec<Event>, LogError> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(parse_log(&bytes)?.0),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    next_seq: u64,
    fsync: bool,
}

impl EventLog {
    /// Opens or creates the log, truncating a torn tail. Returns the intact
    /// events so the caller can rebuild its views.
    pub fn open(path: &Path, fsync: bool) -> Result<(EventLog, Vec<Event>, Recovery), LogError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut bytes = Vec::new();
        io::Read::read_to_end(&mut file, &mut bytes)?;
        let (events, good_len) = parse_log(&bytes)?;
        let truncated_bytes = bytes.len() as u64 - good_len;
        if truncated_bytes > 0 {
            file.set_len(good_len)?;
            file.seek(SeekFrom::End(0))?;
            file.sync_data()?;
        }
        let log = EventLog {
            path: path.to_path_buf(),
            file,
            next_seq: events.len() as u64 + 1,
            fsync,
        };
        let recovery = Recovery {
            events: events.len(),
            truncated_bytes,
        };
        Ok((log, events, recovery))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Sequence number the next append will get.
    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Writes and flushes one event; the sequence number is assigned here.
    pub fn append(&mut self, payload: EventPayload, recorded_at: DateTime<Utc>) -> Result<Event, LogError> {
        let ev = Event {
            seq: self.next_seq,
            recorded_at,
            payload,
        };
        let mut line = ev.to_line();
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        if self.fsync {
            self.file.sync_data()?;
        }
        self.next_seq += 1;
        Ok(ev)
    }
}
