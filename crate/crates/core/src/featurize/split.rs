//! Leakage-free stratified dataset splits.
//!
//! Takes are partitioned 80/10/10 by take id, never by chunk. Per-class
//! split sizes are rounded by a seeded systematic rule (each class gets
//! the floor or ceiling of its exact quota), then distributed over
//! (class, scenario) cells by largest remainder, so the split is
//! stratified while per-class totals stay within one take of each other.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Split membership of one take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// What the splitter needs to know about a take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TakeKey {
    pub take_id: u32,
    pub class_id: u16,
    pub scenario_id: u8,
}

/// Disjoint train/val/test take-id sets.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitAssignment {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
    pub fractions: (f64, f64, f64),
}

impl SplitAssignment {
    pub fn split_of(&self, take_id: u32) -> Option<Split> {
        if self.train.contains(&take_id) {
            Some(Split::Train)
        } else if self.val.contains(&take_id) {
            Some(Split::Val)
        } else if self.test.contains(&take_id) {
            Some(Split::Test)
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

const MIN_TAKES_PER_CLASS: usize = 10;

/// Stratified-by-(class, scenario) 80/10/10 partition of take ids.
pub fn make_splits(takes: &[TakeKey], seed: u64) -> Result<SplitAssignment> {
    // class -> scenario -> sorted take ids
    let mut classes: std::collections::BTreeMap<
        u16,
        std::collections::BTreeMap<u8, Vec<u32>>,
    > = std::collections::BTreeMap::new();
    for t in takes {
        classes
            .entry(t.class_id)
            .or_default()
            .entry(t.scenario_id)
            .or_default()
            .push(t.take_id);
    }
    for (class, cells) in &classes {
        let n: usize = cells.values().map(Vec::len).sum();
        if n < MIN_TAKES_PER_CLASS {
            return Err(Error::Featurize(format!(
                "class {class} has only {n} takes, need at least {MIN_TAKES_PER_CLASS}"
            )));
        }
    }

    let mut assignment = SplitAssignment {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        fractions: (0.8, 0.1, 0.1),
    };

    for (class, cells) in &mut classes {
        let n: usize = cells.values().map(Vec::len).sum();
        // systematic rounding: per-class counts are the floor or ceiling
        // of the exact quotas, selected by one uniform draw
        let u: f64 = rng::stream(seed, "split-class", *class as u64).gen();
        let (q1, q2) = (0.8 * n as f64, 0.9 * n as f64);
        let (mut n_train, mut n_val) = (0usize, 0usize);
        for i in 0..n {
            let x = i as f64 + u;
            if x < q1 {
                n_train += 1;
            } else if x < q2 {
                n_val += 1;
            }
        }

        let sizes: Vec<usize> = cells.values().map(Vec::len).collect();
        let train_per_cell = apportion(n_train, &sizes, &sizes);
        let spare: Vec<usize> =
            sizes.iter().zip(&train_per_cell).map(|(m, t)| m - t).collect();
        let val_per_cell = apportion(n_val, &sizes, &spare);

        for (ci, (scenario, ids)) in cells.iter_mut().enumerate() {
            ids.sort_unstable();
            super::records::seeded_shuffle(
                ids,
                seed,
                "split-cell",
                ((*class as u64) << 8) | *scenario as u64,
            );
            let t = train_per_cell[ci];
            let v = val_per_cell[ci];
            assignment.train.extend_from_slice(&ids[..t]);
            assignment.val.extend_from_slice(&ids[t..t + v]);
            assignment.test.extend_from_slice(&ids[t + v..]);
        }
    }
    assignment.train.sort_unstable();
    assignment.val.sort_unstable();
    assignment.test.sort_unstable();
    Ok(assignment)
}

/// Largest-remainder apportionment of `total` over cells proportional to
/// `weights`, never exceeding `capacity`. Ties go to earlier cells.
fn apportion(total: usize, weights: &[usize], capacity: &[usize]) -> Vec<usize> {
    let wsum: usize = weights.iter().sum();
    let mut out: Vec<usize> = Vec::with_capacity(weights.len());
    let mut fracs: Vec<(usize, f64)> = Vec::with_capacity(weights.len());
    let mut assigned = 0usize;
    for (i, (&w, &cap)) in weights.iter().zip(capacity).enumerate() {
        let ideal = total as f64 * w as f64 / wsum as f64;
        let base = (ideal.floor() as usize).min(cap);
        out.push(base);
        assigned += base;
        fracs.push((i, ideal - base as f64));
    }
    fracs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut left = total - assigned;
    while left > 0 {
        let mut progressed = false;
        for &(i, _) in &fracs {
            if left == 0 {
                break;
            }
            if out[i] < capacity[i] {
                out[i] += 1;
                left -= 1;
                progressed = true;
            }
        }
        assert!(progressed, "apportionment capacity exhausted");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn grid(classes: u16, scenarios: u8, per_cell: u32) -> Vec<TakeKey> {
        let mut takes = Vec::new();
        let mut id = 0;
        for class_id in 0..classes {
            for scenario_id in 1..=scenarios {
                for _ in 0..per_cell {
                    takes.push(TakeKey { take_id: id, class_id, scenario_id });
                    id += 1;
                }
            }
        }
        takes
    }

    // 378 takes (14 classes x 3 scenarios x 9 subjects) split 302/39/37.
    #[test]
    fn paper_scale_split_sizes() {
        let takes = grid(14, 3, 9);
        let s = make_splits(&takes, 11).unwrap();
        assert_eq!(
            (s.train.len(), s.val.len(), s.test.len()),
            (302, 39, 37),
            "seed-dependent systematic rounding drifted"
        );
    }

    #[test]
    fn splits_partition_the_takes() {
        let takes = grid(6, 3, 6);
        let s = make_splits(&takes, 9).unwrap();
        let mut all: BTreeSet<u32> = BTreeSet::new();
        for id in s.train.iter().chain(&s.val).chain(&s.test) {
            assert!(all.insert(*id), "take {id} appears twice");
        }
        assert_eq!(all.len(), takes.len());
    }

    // Counting oracle on a 270-take set: per-class train fraction is 0.8.
    #[test]
    fn per_class_train_fraction_in_band() {
        let takes = grid(6, 3, 15); // 45 per class
        let s = make_splits(&takes, 123).unwrap();
        for class in 0..6u16 {
            let ids: BTreeSet<u32> = takes
                .iter()
                .filter(|t| t.class_id == class)
                .map(|t| t.take_id)
                .collect();
            let in_train = s.train.iter().filter(|id| ids.contains(id)).count();
            let frac = in_train as f64 / ids.len() as f64;
            assert!((0.78..=0.82).contains(&frac), "class {class}: {frac}");
        }
    }

    #[test]
    fn per_class_balance_within_one_take() {
        let takes = grid(6, 3, 6);
        for seed in [0u64, 7, 42] {
            let s = make_splits(&takes, seed).unwrap();
            for part in [&s.train, &s.val, &s.test] {
                let counts: Vec<usize> = (0..6u16)
                    .map(|c| {
                        part.iter()
                            .filter(|id| takes[**id as usize].class_id == c)
                            .count()
                    })
                    .collect();
                let (lo, hi) =
                    (counts.iter().min().unwrap(), counts.iter().max().unwrap());
                assert!(hi - lo <= 1, "seed {seed}: {counts:?}");
            }
        }
    }

    #[test]
    fn deficient_class_is_named() {
        let takes = grid(3, 3, 3); // 9 per class
        let err = make_splits(&takes, 0).unwrap_err().to_string();
        assert!(err.contains("class 0"), "{err}");
    }

    #[test]
    fn split_is_deterministic() {
        let takes = grid(5, 3, 4);
        assert_eq!(make_splits(&takes, 3).unwrap(), make_splits(&takes, 3).unwrap());
    }
}
