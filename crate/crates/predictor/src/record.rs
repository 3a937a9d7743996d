//! Stored rolls and the session statistics derived from them.

use grammage_core::eval::ConfusionMatrix;
use grammage_core::{GrammageClass, Measurement, CANONICAL_CLASSES};
use grammage_plcsim::Quality;
use serde::{Deserialize, Serialize};

/// One roll as seen by the service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollRecord {
    /// 64-bit roll id, the counter tag extended across wrap-arounds.
    pub roll_id: u64,
    /// Raw counter tag value the roll was read under.
    pub counter: u16,
    pub measurement: Measurement,
    /// `None` when any measurement channel was BAD.
    pub predicted: Option<GrammageClass>,
    /// Largest class probability of the prediction, in `[0, 1]`.
    pub confidence: Option<f64>,
    pub manual: Option<GrammageClass>,
    /// Diameter, width, weight.
    pub quality: [Quality; 3],
    pub fault: bool,
    pub received_at: u64,
    pub labeled_at: Option<u64>,
}

impl RollRecord {
    pub fn mismatch(&self) -> bool {
        matches!((self.predicted, self.manual), (Some(p), Some(m)) if p != m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub rolls_seen: u64,
    pub rolls_faulted: u64,
    /// Labeled rolls that carry a prediction; equals `confusion.total()`.
    pub rolls_labeled: u64,
    /// Labeled rolls without a prediction (sensor fault).
    pub faulted_labeled: u64,
    /// Equals `confusion.trace()`.
    pub agreement_count: u64,
    /// Rows are manual labels, columns predictions.
    pub confusion: ConfusionMatrix,
}

impl Default for SessionStats {
    fn default() -> Self {
        SessionStats {
            rolls_seen: 0,
            rolls_faulted: 0,
            rolls_labeled: 0,
            faulted_labeled: 0,
            agreement_count: 0,
            confusion: ConfusionMatrix::zeros(CANONICAL_CLASSES.to_vec()),
        }
    }
}

impl SessionStats {
    /// Agreement over labeled rolls; `None` before the first label.
    pub fn agreement_rate(&self) -> Option<f64> {
        (self.rolls_labeled > 0).then(|| self.agreement_count as f64 / self.rolls_labeled as f64)
    }

    pub(crate) fn observe_roll(&mut self, r: &RollRecord) {
        self.rolls_seen += 1;
        if r.fault {
            self.rolls_faulted += 1;
        }
        if r.manual.is_some() {
            self.observe_label(r);
        }
    }

    /// Counts a label newly attached to `r`.
    pub(crate) fn observe_label(&mut self, r: &RollRecord) {
        let (Some(manual), Some(predicted)) = (r.manual, r.predicted) else {
            self.faulted_labeled += u64::from(r.manual.is_some());
            return;
        };
        self.rolls_labeled += 1;
        if manual == predicted {
            self.agreement_count += 1;
        }
        for c in [manual, predicted] {
            if let Err(at) = self.confusion.classes.binary_search(&c) {
                grow(&mut self.confusion, at, c);
            }
        }
        self.confusion.record(manual, predicted).expect("classes present");
    }

    /// Statistics from scratch over a record list.
    pub fn recompute<'a>(records: impl IntoIterator<Item = &'a RollRecord>) -> Self {
        let mut s = SessionStats::default();
        for r in records {
            s.observe_roll(r);
        }
        s
    }
}

/// Inserts an empty row and column for a class outside the canonical set.
fn grow(cm: &mut ConfusionMatrix, at: usize, class: GrammageClass) {
    cm.classes.insert(at, class);
    for row in &mut cm.counts {
        row.insert(at, 0);
    }
    cm.counts.insert(at, vec![0; cm.classes.len()]);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: u64, predicted: Option<u16>, manual: Option<u16>) -> RollRecord {
        RollRecord {
            roll_id: id,
            counter: id as u16,
            measurement: Measurement::from_features([1000.0, 820.0, 564.0]),
            predicted: predicted.map(GrammageClass),
            confidence: predicted.map(|_| 0.9),
            manual: manual.map(GrammageClass),
            quality: [Quality::Good; 3],
            fault: predicted.is_none(),
            received_at: 0,
            labeled_at: manual.map(|_| 1),
        }
    }

    #[test]
    fn empty_is_zero() {
        let s = SessionStats::default();
        assert_eq!((s.rolls_seen, s.rolls_labeled, s.agreement_count), (0, 0, 0));
        assert_eq!(s.confusion.total(), 0);
        assert_eq!(s.agreement_rate(), None);
    }

    #[test]
    fn nine_of_ten() {
        let mut rs: Vec<_> = (0..9).map(|i| rec(i, Some(70), Some(70))).collect();
        rs.push(rec(9, Some(70), Some(68)));
        let s = SessionStats::recompute(&rs);
        assert_eq!(s.agreement_rate(), Some(0.9));
        assert_eq!(s.confusion.trace(), 9);
        assert_eq!(s.confusion.total(), 10);
    }

    #[test]
    fn faulted_labels_stay_out_of_the_matrix() {
        let s = SessionStats::recompute(&[rec(0, None, Some(70)), rec(1, Some(58), Some(58))]);
        assert_eq!((s.rolls_seen, s.rolls_faulted, s.rolls_labeled, s.faulted_labeled), (2, 1, 1, 1));
        assert_eq!(s.confusion.total(), s.rolls_labeled);
    }

    #[test]
    fn nonstandard_prediction_grows_the_matrix() {
        let s = SessionStats::recompute(&[rec(0, Some(54), Some(50))]);
        assert_eq!(s.confusion.k(), 7);
        assert!(s.confusion.classes.windows(2).all(|w| w[0] < w[1]));
        let i50 = s.confusion.classes.iter().position(|c| c.0 == 50).unwrap();
        let i54 = s.confusion.classes.iter().position(|c| c.0 == 54).unwrap();
        assert_eq!(s.confusion.counts[i50][i54], 1);
    }

    #[test]
    fn mismatch_flag() {
        assert!(!rec(0, Some(70), Some(70)).mismatch());
        assert!(rec(0, Some(70), Some(68)).mismatch());
        assert!(!rec(0, Some(70), None).mismatch());
        assert!(!rec(0, None, Some(70)).mismatch());
    }
}
