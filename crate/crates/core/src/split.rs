//! Chronological per-user train/validation/test splitting.
//!
//! Each user's history is split on its own timeline: the oldest ceil(train
//! fraction) interactions train the tables, the next ceil(validation
//! fraction) are held out for tuning, and the most recent remainder is the
//! test set. The split is per-user rather than global-time because the
//! recency signal is built from each user's own training history.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kg::{EntityIdx, Interaction, InteractionLog};

/// Split fractions; must be positive and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.7,
            validation: 0.1,
            test: 0.2,
        }
    }
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let spec = SplitSpec {
            train,
            validation,
            test,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("train", self.train),
            ("validation", self.validation),
            ("test", self.test),
        ] {
            if value.is_nan() || value <= 0.0 || value >= 1.0 {
                return Err(Error::Config(format!(
                    "{name} fraction must lie in (0, 1), got {value}"
                )));
            }
        }
        let sum = self.train + self.validation + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// The three disjoint logs plus a count of users too short to split.
#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: InteractionLog,
    pub validation: InteractionLog,
    pub test: InteractionLog,
    /// Users with fewer than three interactions; their whole history went
    /// to train.
    pub short_history_users: usize,
}

/// Ceiling of `fraction * n` with a tolerance against values that land an
/// ulp above an exact integer.
fn ceil_share(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Split every user's history chronologically according to `spec`.
///
/// Boundaries apply ceilings in order: train first, then validation from
/// the remainder, and whatever is left is test. Users with fewer than three
/// interactions keep everything in train and are counted as warnings.
pub fn chronological_split(log: &InteractionLog, spec: &SplitSpec) -> Result<SplitResult> {
    spec.validate()?;
    let mut train: BTreeMap<EntityIdx, Vec<Interaction>> = BTreeMap::new();
    let mut validation: BTreeMap<EntityIdx, Vec<Interaction>> = BTreeMap::new();
    let mut test: BTreeMap<EntityIdx, Vec<Interaction>> = BTreeMap::new();
    let mut short_history_users = 0;

    for user in log.users() {
        let history = log.interactions(user);
        let n = history.len();
        if n == 0 {
            continue;
        }
        if n < 3 {
            short_history_users += 1;
            train.insert(user, history.to_vec());
            continue;
        }
        let n_train = ceil_share(spec.train, n).min(n);
        let n_valid = ceil_share(spec.validation, n).min(n - n_train);
        train.insert(user, history[..n_train].to_vec());
        if n_valid > 0 {
            validation.insert(user, history[n_train..n_train + n_valid].to_vec());
        }
        if n_train + n_valid < n {
            test.insert(user, history[n_train + n_valid..].to_vec());
        }
    }

    Ok(SplitResult {
        train: InteractionLog::from_sorted_parts(train),
        validation: InteractionLog::from_sorted_parts(validation),
        test: InteractionLog::from_sorted_parts(test),
        short_history_users,
    })
}
