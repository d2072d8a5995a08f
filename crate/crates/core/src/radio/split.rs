use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Trajectory ids used for training and for testing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: BTreeSet<u32>,
    pub test: BTreeSet<u32>,
    /// Non-fatal problems, e.g. an empty test set.
    pub warnings: Vec<String>,
}

/// Odd ids train, even ids test.
pub fn build_split(ids: &[u32]) -> Result<DatasetSplit> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(*id) {
            return Err(Error::Input(format!("duplicate trajectory id {id}")));
        }
    }
    let (train, test): (BTreeSet<u32>, BTreeSet<u32>) = seen.into_iter().partition(|id| id % 2 == 1);
    if train.is_empty() {
        return Err(Error::Input(format!(
            "no odd trajectory ids among {ids:?}; the training set would be empty"
        )));
    }
    let mut warnings = vec![];
    if test.is_empty() {
        warnings.push("no even trajectory ids; the test set is empty".to_string());
    }
    Ok(DatasetSplit { train, test, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_train_even_test() {
        let s = build_split(&[1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(s.train.into_iter().collect::<Vec<_>>(), vec![1, 3, 5]);
        assert_eq!(s.test.into_iter().collect::<Vec<_>>(), vec![2, 4, 6]);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn single_trajectory_warns() {
        let s = build_split(&[1]).unwrap();
        assert!(s.test.is_empty());
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn guards() {
        assert!(matches!(build_split(&[2, 4]), Err(Error::Input(_))));
        assert!(matches!(build_split(&[1, 2, 1]), Err(Error::Input(_))));
    }
}
