//! Append-only record log.
//!
//! The log is newline-delimited JSON with two event kinds:
//!
//! ```text
//! {"event":"roll", ...RollRecord fields...}
//! {"event":"label","roll_id":17,"manual":70,"labeled_at":1700000000000}
//! ```
//!
//! Records are never rewritten; a label is a later line. Opening a store
//! replays the log and rebuilds the statistics. A torn final line (a crash
//! mid-write) is dropped and truncated away; damage anywhere else is an
//! error.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use grammage_core::GrammageClass;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::record::{RollRecord, SessionStats};
use crate::PredictorError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Roll(RollRecord),
    Label {
        roll_id: u64,
        manual: GrammageClass,
        labeled_at: u64,
    },
}

#[derive(Debug)]
pub struct Store {
    log: Option<(PathBuf, File)>,
    records: Vec<RollRecord>,
    index: HashMap<u64, usize>,
    stats: SessionStats,
}

impl Default for Store {
    fn default() -> Self {
        Store::in_memory()
    }
}

impl Store {
    /// A store without a backing file.
    pub fn in_memory() -> Self {
        Store {
            log: None,
            records: Vec::new(),
            index: HashMap::new(),
            stats: SessionStats::default(),
        }
    }

    /// Opens (or creates) a log file and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, PredictorError> {
        let path = path.as_ref().to_path_buf();
        let io = |e| PredictorError::Store(format!("{}: {e}", path.display()));
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io)?;
        let mut store = Store::in_memory();
        let mut good_len = 0u64;
        let mut reader = BufReader::new(&mut file);
        let mut line = String::new();
        let mut lineno = 0;
        loop {
            line.clear();
            let n = reader.read_line(&mut line).map_err(io)?;
            if n == 0 {
                break;
            }
            lineno += 1;
            if !line.ends_with('\n') {
                warn!(line = lineno, "dropping torn final log line");
                break;
            }
            if line.trim().is_empty() {
                good_len += n as u64;
                continue;
            }
            let ev: Event = serde_json::from_str(&line)
                .map_err(|e| PredictorError::Store(format!("{} line {lineno}: {e}", path.display())))?;
            store
                .apply(ev)
                .map_err(|e| PredictorError::Store(format!("{} line {lineno}: {e}", path.display())))?;
            good_len += n as u64;
        }
        drop(reader);
        if file.metadata().map_err(io)?.len() != good_len {
            file.set_len(good_len).map_err(io)?;
        }
        file.seek(SeekFrom::End(0)).map_err(io)?;
        store.log = Some((path, file));
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.log.as_ref().map(|(p, _)| p.as_path())
    }

    fn apply(&mut self, ev: Event) -> Result<(), PredictorError> {
        match ev {
            Event::Roll(r) => self.insert(r),
            Event::Label {
                roll_id,
                manual,
                labeled_at,
            } => self.attach(roll_id, manual, labeled_at),
        }
    }

    fn insert(&mut self, r: RollRecord) -> Result<(), PredictorError> {
        if self.index.contains_key(&r.roll_id) {
            return Err(PredictorError::DuplicateRoll(r.roll_id));
        }
        if let Some(m) = r.manual {
            check_label(m)?;
        }
        self.stats.observe_roll(&r);
        self.index.insert(r.roll_id, self.records.len());
        self.records.push(r);
        Ok(())
    }

    fn attach(&mut self, roll_id: u64, manual: GrammageClass, at: u64) -> Result<(), PredictorError> {
        check_label(manual)?;
        let &i = self.index.get(&roll_id).ok_or(PredictorError::UnknownRoll(roll_id))?;
        let r = &mut self.records[i];
        if r.manual.is_some() {
            return Err(PredictorError::AlreadyLabeled(roll_id));
        }
        r.manual = Some(manual);
        r.labeled_at = Some(at);
        self.stats.observe_label(&self.records[i]);
        Ok(())
    }

    fn write(&mut self, ev: &Event) -> Result<(), PredictorError> {
        if let Some((path, file)) = &mut self.log {
            let mut line = serde_json::to_vec(ev).map_err(|e| PredictorError::Store(e.to_string()))?;
            line.push(b'\n');
            file.write_all(&line)
                .and_then(|_| file.flush())
                .map_err(|e| PredictorError::Store(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }

    /// Appends a new roll. Fails without side effects on a duplicate id.
    pub fn append(&mut self, r: RollRecord) -> Result<&RollRecord, PredictorError> {
        if self.index.contains_key(&r.roll_id) {
            return Err(PredictorError::DuplicateRoll(r.roll_id));
        }
        if let Some(m) = r.manual {
            check_label(m)?;
        }
        let ev = Event::Roll(r);
        self.write(&ev)?;
        let Event::Roll(r) = ev else { unreachable!() };
        self.insert(r)?;
        Ok(self.records.last().expect("just pushed"))
    }

    /// Attaches an operator label. Fails without side effects on an unknown
    /// roll, a second label or a nonstandard class.
    pub fn label(&mut self, roll_id: u64, manual: GrammageClass, at: u64) -> Result<&RollRecord, PredictorError> {
        check_label(manual)?;
        let r = self.get(roll_id).ok_or(PredictorError::UnknownRoll(roll_id))?;
        if r.manual.is_some() {
            return Err(PredictorError::AlreadyLabeled(roll_id));
        }
        self.write(&Event::Label {
            roll_id,
            manual,
            labeled_at: at,
        })?;
        self.attach(roll_id, manual, at)?;
        Ok(self.get(roll_id).expect("present"))
    }

    pub fn get(&self, roll_id: u64) -> Option<&RollRecord> {
        self.index.get(&roll_id).map(|&i| &self.records[i])
    }

    pub fn latest(&self) -> Option<&RollRecord> {
        self.records.last()
    }

    /// Up to `limit` most recent records, newest first.
    pub fn recent(&self, limit: usize) -> Vec<RollRecord> {
        self.records.iter().rev().take(limit).cloned().collect()
    }

    pub fn records(&self) -> &[RollRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn stats(&self) -> &SessionStats {
        &self.stats
    }
}

fn check_label(c: GrammageClass) -> Result<(), PredictorError> {
    if c.is_standard() {
        Ok(())
    } else {
        Err(PredictorError::NonstandardLabel(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use grammage_core::Measurement;
    use grammage_plcsim::Quality;

    fn rec(id: u64, predicted: u16) -> RollRecord {
        RollRecord {
            roll_id: id,
            counter: id as u16,
            measurement: Measurement::from_features([1000.0, 820.0, 564.0]),
            predicted: Some(GrammageClass(predicted)),
            confidence: Some(0.8),
            manual: None,
            quality: [Quality::Good; 3],
            fault: false,
            received_at: 10 * id,
            labeled_at: None,
        }
    }

    #[test]
    fn label_updates_stats() {
        let mut s = Store::in_memory();
        s.append(rec(1, 70)).unwrap();
        s.append(rec(2, 70)).unwrap();
        s.label(1, GrammageClass(70), 5).unwrap();
        assert_eq!(s.stats().agreement_count, 1);
        s.label(2, GrammageClass(68), 6).unwrap();
        assert_eq!(s.stats().agreement_count, 1);
        assert_eq!(s.stats().rolls_labeled, 2);
        let cm = &s.stats().confusion;
        let i68 = cm.classes.iter().position(|c| c.0 == 68).unwrap();
        let i70 = cm.classes.iter().position(|c| c.0 == 70).unwrap();
        assert_eq!((cm.counts[i70][i70], cm.counts[i68][i70]), (1, 1));
    }

    #[test]
    fn rejected_labels_change_nothing() {
        let mut s = Store::in_memory();
        s.append(rec(1, 70)).unwrap();
        s.label(1, GrammageClass(70), 5).unwrap();
        let before = s.stats().clone();
        assert!(matches!(s.label(1, GrammageClass(68), 6), Err(PredictorError::AlreadyLabeled(1))));
        assert!(matches!(s.label(9, GrammageClass(68), 6), Err(PredictorError::UnknownRoll(9))));
        s.append(rec(2, 70)).unwrap();
        let before2 = s.stats().clone();
        assert!(matches!(s.label(2, GrammageClass(54), 6), Err(PredictorError::NonstandardLabel(_))));
        assert_eq!(s.stats(), &before2);
        assert_eq!(before.agreement_count, before2.agreement_count);
        assert!(matches!(s.append(rec(2, 50)), Err(PredictorError::DuplicateRoll(2))));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn recent_is_newest_first() {
        let mut s = Store::in_memory();
        for i in 1..=5 {
            s.append(rec(i, 70)).unwrap();
        }
        let ids: Vec<u64> = s.recent(3).iter().map(|r| r.roll_id).collect();
        assert_eq!(ids, [5, 4, 3]);
        assert_eq!(s.latest().unwrap().roll_id, 5);
    }
}
