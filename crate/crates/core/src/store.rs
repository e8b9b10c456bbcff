//! Line-oriented learner-state snapshots.
//!
//! A snapshot is a JSONL file: one header line, then one line per learner in
//! id order. Floats are written in shortest round-trip form, so a load gives
//! back bit-identical values.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;
use thiserror::Error;

use crate::models::{LearnerState, SkillBelief};

pub const SNAPSHOT_FORMAT: &str = "truelearn-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("snapshot i/o: {0}")]
    Io(#[from] io::Error),
    #[error("snapshot version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt snapshot at line {line}: {reason}")]
    CorruptSnapshot { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    pub version: u32,
    pub params_hash: String,
    pub learners: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    pub params_hash: String,
    pub states: BTreeMap<String, LearnerState>,
}

/// (kc_id, mean, variance, observations)
type SkillRow = (String, f64, f64, u64);

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LearnerLine {
    learner_id: String,
    engaged_count: u64,
    event_count: u64,
    last_label: Option<bool>,
    skills: Vec<SkillRow>,
    kt_skills: Vec<(String, f64)>,
}

impl LearnerLine {
    fn from_state(id: &str, state: &LearnerState) -> Self {
        Self {
            learner_id: id.to_owned(),
            engaged_count: state.engaged_count,
            event_count: state.event_count,
            last_label: state.last_label,
            skills: state
                .skills
                .iter()
                .map(|(k, b)| (k.clone(), b.mean, b.variance, b.observations))
                .collect(),
            kt_skills: state.kt_skills.iter().map(|(k, p)| (k.clone(), *p)).collect(),
        }
    }

    fn into_state(self) -> (String, LearnerState) {
        let skills = self
            .skills
            .into_iter()
            .map(|(k, mean, variance, observations)| {
                (
                    k,
                    SkillBelief {
                        mean,
                        variance,
                        observations,
                    },
                )
            })
            .collect();
        let state = LearnerState {
            skills,
            engaged_count: self.engaged_count,
            event_count: self.event_count,
            last_label: self.last_label,
            kt_skills: self.kt_skills.into_iter().collect(),
        };
        (self.learner_id, state)
    }
}

pub fn save_snapshot(
    states: &BTreeMap<String, LearnerState>,
    params_hash: &str,
    path: &Path,
) -> Result<(), StoreError> {
    save_with_hook(states, params_hash, path, |_| Ok(()))
}

/// Writes to a temp file next to `path`, then renames it into place.
/// `before_rename` runs on the fully written temp file.
pub(crate) fn save_with_hook(
    states: &BTreeMap<String, LearnerState>,
    params_hash: &str,
    path: &Path,
    before_rename: impl FnOnce(&Path) -> io::Result<()>,
) -> Result<(), StoreError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    {
        let mut out = io::BufWriter::new(tmp.as_file_mut());
        let header = SnapshotHeader {
            format: SNAPSHOT_FORMAT.to_owned(),
            version: SNAPSHOT_VERSION,
            params_hash: params_hash.to_owned(),
            learners: states.len(),
        };
        write_line(&mut out, &header)?;
        for (id, state) in states {
            write_line(&mut out, &LearnerLine::from_state(id, state))?;
        }
        out.flush()?;
    }
    tmp.as_file().sync_all()?;
    before_rename(tmp.path())?;
    tmp.persist(path).map_err(|e| StoreError::Io(e.error))?;
    Ok(())
}

fn write_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")
}

pub fn load_snapshot(path: &Path) -> Result<Snapshot, StoreError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let corrupt = |line: usize, reason: String| StoreError::CorruptSnapshot { line, reason };

    let first = lines
        .next()
        .transpose()?
        .ok_or_else(|| corrupt(1, "missing header".into()))?;
    let header: SnapshotHeader =
        serde_json::from_str(&first).map_err(|e| corrupt(1, format!("bad header: {e}")))?;
    if header.format != SNAPSHOT_FORMAT {
        return Err(corrupt(1, format!("unknown format {:?}", header.format)));
    }
    if header.version != SNAPSHOT_VERSION {
        return Err(StoreError::VersionMismatch {
            found: header.version,
            expected: SNAPSHOT_VERSION,
        });
    }

    let mut states = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let parsed: LearnerLine =
            serde_json::from_str(&line).map_err(|e| corrupt(line_no, e.to_string()))?;
        let (id, state) = parsed.into_state();
        if states.insert(id.clone(), state).is_some() {
            return Err(corrupt(line_no, format!("duplicate learner {id:?}")));
        }
    }
    if states.len() != header.learners {
        return Err(corrupt(
            states.len() + 2,
            format!("header promises {} learners, found {}", header.learners, states.len()),
        ));
    }
    Ok(Snapshot {
        params_hash: header.params_hash,
        states,
    })
}
