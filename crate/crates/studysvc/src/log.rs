//! Append-only study record log: one JSON entry per line, fsynced after
//! every append. A trailing line without its newline is a torn write and
//! is dropped (and truncated away) on replay.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, StudyError};
use crate::session::{ResponseRecord, SessionHeader};
use crate::stimuli::PairingPool;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "snake_case")]
pub enum LogEntry {
    Pool(PairingPool),
    Session(Box<SessionHeader>),
    Response(ResponseRecord),
}

#[derive(Debug)]
pub struct StudyLog {
    path: PathBuf,
    file: File,
}

impl StudyLog {
    /// Opens or creates the log and returns every complete entry in order.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<LogEntry>)> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if complete < bytes.len() {
            log::warn!(
                "{}: dropping {} bytes of torn trailing entry",
                path.display(),
                bytes.len() - complete
            );
            file.set_len(complete as u64)?;
            file.seek(SeekFrom::End(0))?;
        }
        let text = std::str::from_utf8(&bytes[..complete]).map_err(|e| StudyError::CorruptLog {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            entries.push(
                serde_json::from_str(line).map_err(|e| StudyError::CorruptLog {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })?,
            );
        }
        Ok((Self { path, file }, entries))
    }

    pub fn append(&mut self, entry: &LogEntry) -> Result<()> {
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
