//! One read-predict-store cycle against the tag server.

use grammage_core::{Classifier, GrammageClass, Measurement, Model};
use grammage_plcsim::{ClientError, Quality, TagAddress, TagClient};
use tracing::{debug, warn};

use crate::record::{RollRecord, SessionStats};
use crate::store::Store;
use crate::PredictorError;

/// Last roll the poller has stored: the raw counter and its 64-bit id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Cursor {
    pub counter: u16,
    pub roll_id: u64,
}

impl Cursor {
    /// Resumes after the newest stored record; a fresh store starts at
    /// counter 0, which the simulator shows before its first roll.
    pub fn from_store(store: &Store) -> Self {
        store.latest().map_or_else(Cursor::default, |r| Cursor {
            counter: r.counter,
            roll_id: r.roll_id,
        })
    }

    /// Id for a roll read under `counter`, counting any rolls missed since.
    pub fn next_id(&self, counter: u16) -> u64 {
        self.roll_id + u64::from(counter.wrapping_sub(self.counter))
    }
}

/// Tag values of one roll, read consistently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RollSnapshot {
    pub counter: u16,
    pub values: [u16; 3],
    pub quality: [Quality; 3],
    pub manual: u16,
}

/// Reads the current roll if the counter moved past `cursor`. The counter is
/// read again at the end; if a roll arrived meanwhile the reads may mix two
/// rolls, so the cycle yields nothing and the next one picks up the new roll.
pub async fn read_roll(client: &mut TagClient, cursor: &Cursor) -> Result<Option<RollSnapshot>, ClientError> {
    let counter = client.read_tag(TagAddress::COUNTER).await?.value;
    if counter == cursor.counter {
        return Ok(None);
    }
    let mut values = [0; 3];
    let mut quality = [Quality::Good; 3];
    for (i, addr) in TagAddress::MEASUREMENTS.iter().enumerate() {
        let r = client.read_tag(*addr).await?;
        values[i] = r.value;
        quality[i] = r.quality;
    }
    let manual = client.read_tag(TagAddress::MANUAL).await?.value;
    let again = client.read_tag(TagAddress::COUNTER).await?.value;
    if again != counter {
        debug!(counter, again, "roll changed while reading; retrying next cycle");
        return Ok(None);
    }
    Ok(Some(RollSnapshot {
        counter,
        values,
        quality,
        manual,
    }))
}

/// Classifies a snapshot. BAD channels suppress the prediction.
pub fn build_record(model: &Model, cursor: &Cursor, snap: &RollSnapshot, now: u64) -> RollRecord {
    let measurement = Measurement::from_features(snap.values.map(f64::from));
    let fault = snap.quality.iter().any(|q| !q.is_good());
    let (predicted, confidence) = if fault {
        (None, None)
    } else {
        let p = model.predict_proba(&measurement);
        let class = model.classes()[p.argmax()];
        (Some(class), Some(p.max().clamp(0.0, 1.0)))
    };
    let manual = match snap.manual {
        0 => None,
        g if GrammageClass(g).is_standard() => Some(GrammageClass(g)),
        g => {
            warn!(grammage = g, "ignoring nonstandard manual grammage on the tag");
            None
        }
    };
    RollRecord {
        roll_id: cursor.next_id(snap.counter),
        counter: snap.counter,
        measurement,
        predicted,
        confidence,
        manual,
        quality: snap.quality,
        fault,
        received_at: now,
        labeled_at: manual.map(|_| now),
    }
}

/// Reads, classifies and stores the next roll. `None` when the counter has
/// not moved (the store is untouched).
pub async fn poll_cycle(
    client: &mut TagClient,
    model: &Model,
    store: &mut Store,
    cursor: &mut Cursor,
    now: u64,
) -> Result<Option<RollRecord>, PredictorError> {
    let Some(snap) = read_roll(client, cursor).await? else {
        return Ok(None);
    };
    let record = build_record(model, cursor, &snap, now);
    let stored = store.append(record)?.clone();
    *cursor = Cursor {
        counter: stored.counter,
        roll_id: stored.roll_id,
    };
    Ok(Some(stored))
}

/// Attaches an operator label and, when it belongs to the roll currently on
/// the tags, writes it back to the manual grammage tag. A failed write-back
/// is returned as an error but the stored label stands.
pub async fn record_manual(
    store: &mut Store,
    client: Option<&mut TagClient>,
    roll_id: u64,
    grammage: u16,
    now: u64,
) -> Result<SessionStats, PredictorError> {
    let current = store.latest().map(|r| r.roll_id) == Some(roll_id);
    store.label(roll_id, GrammageClass(grammage), now)?;
    if let (true, Some(c)) = (current, client) {
        c.write_tag(TagAddress::MANUAL, grammage).await?;
    }
    Ok(store.stats().clone())
}
