use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<u32>,
    pub test: Vec<u32>,
}

/// Splits motor units (never individual samples) within each muscle label.
/// Every label with at least two units contributes to both sides.
pub fn split(d: &Dataset, train_frac: f64, seed: u64) -> Result<Split> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Config(format!("train fraction must lie in (0, 1), got {train_frac}")));
    }
    let ids = d.mu_ids();
    if ids.len() < 2 {
        return Err(Error::InvalidInput(format!("splitting needs at least 2 motor units, got {}", ids.len())));
    }
    let mut groups: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for id in ids {
        let label = d.records.iter().find(|r| r.mu_id == id).map(|r| r.muscle_label).unwrap_or(0);
        groups.entry(label).or_default().push(id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut members) in groups {
        members.sort_unstable();
        members.shuffle(&mut rng);
        let n = members.len();
        let k = if n >= 2 { ((train_frac * n as f64).round() as usize).clamp(1, n - 1) } else { n };
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    if test.is_empty() {
        return Err(Error::InvalidInput("split leaves the test set empty; add motor units per muscle label".into()));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ConditionVector, Record};
    use crate::teacher::ConditionRanges;

    fn units(labels: &[u32]) -> Dataset {
        let records = labels
            .iter()
            .enumerate()
            .flat_map(|(i, &l)| {
                (0..3).map(move |_| Record {
                    mu_id: i as u32 * 10,
                    muscle_label: l,
                    conditions: ConditionVector([0.75; 6]),
                    data: vec![0.0; 1],
                })
            })
            .collect();
        Dataset { rows: 1, cols: 1, samples: 1, mu_count: labels.len(), ranges: ConditionRanges::default(), records }
    }

    #[test]
    fn eight_units_split_six_two() {
        let s = split(&units(&[0; 8]), 0.75, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (6, 2));
        assert!(s.train.iter().all(|id| !s.test.contains(id)));
        assert_eq!(s, split(&units(&[0; 8]), 0.75, 1).unwrap());
    }

    #[test]
    fn labels_are_stratified() {
        let d = units(&[0, 0, 0, 0, 1, 1, 1, 1]);
        let s = split(&d, 0.75, 3).unwrap();
        let label = |id: u32| d.records.iter().find(|r| r.mu_id == id).unwrap().muscle_label;
        assert_eq!(s.test.iter().filter(|&&id| label(id) == 0).count(), 1);
        assert_eq!(s.test.iter().filter(|&&id| label(id) == 1).count(), 1);
    }

    #[test]
    fn too_few_units_is_an_error() {
        assert!(split(&units(&[0]), 0.75, 0).is_err());
        assert!(split(&units(&[0, 1]), 0.75, 0).is_err());
    }
}
