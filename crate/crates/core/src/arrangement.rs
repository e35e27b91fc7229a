//! Presentation orders for answer options.
//!
//! An [`Arrangement`] is the order in which the catalog's options are shown
//! to a model: either a permutation of `[0, N)`, or a `2N`-long sequence in
//! which every option appears exactly twice (used by the strategy that
//! presents the list forward then reversed).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrangementKind {
    Permutation,
    Duplicated,
}

/// An ordered sequence of catalog option indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arrangement {
    kind: ArrangementKind,
    order: Vec<usize>,
}

impl Arrangement {
    /// A permutation arrangement over a catalog of `n` options. Fails unless
    /// `order` is a bijection on `[0, n)`.
    pub fn permutation(order: Vec<usize>, n: usize) -> Result<Self, ArrangementError> {
        if order.len() != n {
            return Err(ArrangementError::WrongLength {
                expected: n,
                actual: order.len(),
            });
        }
        let mut seen = vec![false; n];
        for &index in &order {
            if index >= n {
                return Err(ArrangementError::IndexOutOfRange { index, options: n });
            }
            if seen[index] {
                return Err(ArrangementError::RepeatedIndex { index });
            }
            seen[index] = true;
        }
        Ok(Arrangement {
            kind: ArrangementKind::Permutation,
            order,
        })
    }

    /// A duplicated arrangement: length `2n`, every index exactly twice.
    pub fn duplicated(order: Vec<usize>, n: usize) -> Result<Self, ArrangementError> {
        if order.len() != 2 * n {
            return Err(ArrangementError::WrongLength {
                expected: 2 * n,
                actual: order.len(),
            });
        }
        let mut counts = vec![0usize; n];
        for &index in &order {
            if index >= n {
                return Err(ArrangementError::IndexOutOfRange { index, options: n });
            }
            counts[index] += 1;
        }
        if let Some(index) = counts.iter().position(|&c| c != 2) {
            return Err(ArrangementError::NotExactlyTwice {
                index,
                count: counts[index],
            });
        }
        Ok(Arrangement {
            kind: ArrangementKind::Duplicated,
            order,
        })
    }

    /// The identity permutation `[0, 1, .., n-1]`.
    pub fn identity(n: usize) -> Self {
        Arrangement {
            kind: ArrangementKind::Permutation,
            order: (0..n).collect(),
        }
    }

    pub fn kind(&self) -> ArrangementKind {
        self.kind
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Position of the first occurrence of `option` in this arrangement.
    pub fn position_of(&self, option: usize) -> Option<usize> {
        self.order.iter().position(|&i| i == option)
    }

    /// True when every referenced index is valid for a catalog of `n` options
    /// and the kind invariant holds.
    pub fn is_valid_for(&self, n: usize) -> bool {
        match self.kind {
            ArrangementKind::Permutation => {
                Arrangement::permutation(self.order.clone(), n).is_ok()
            }
            ArrangementKind::Duplicated => {
                Arrangement::duplicated(self.order.clone(), n).is_ok()
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ArrangementError {
    #[error("arrangement has length {actual}, expected {expected}")]
    WrongLength { expected: usize, actual: usize },
    #[error("option index {index} out of range for {options} options")]
    IndexOutOfRange { index: usize, options: usize },
    #[error("option index {index} appears more than once in a permutation")]
    RepeatedIndex { index: usize },
    #[error("option index {index} appears {count} times, expected exactly 2")]
    NotExactlyTwice { index: usize, count: usize },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_sorts_to_identity() {
        let a = Arrangement::permutation(vec![2, 0, 1], 3).unwrap();
        let mut sorted = a.order().to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn permutation_rejects_repeats_and_out_of_range() {
        assert!(matches!(
            Arrangement::permutation(vec![0, 0, 1], 3),
            Err(ArrangementError::RepeatedIndex { index: 0 })
        ));
        assert!(matches!(
            Arrangement::permutation(vec![0, 1, 3], 3),
            Err(ArrangementError::IndexOutOfRange { index: 3, .. })
        ));
        assert!(matches!(
            Arrangement::permutation(vec![0, 1], 3),
            Err(ArrangementError::WrongLength { .. })
        ));
    }

    #[test]
    fn duplicated_requires_every_index_twice() {
        assert!(Arrangement::duplicated(vec![1, 0, 0, 1], 2).is_ok());
        assert!(matches!(
            Arrangement::duplicated(vec![0, 0, 0, 1], 2),
            Err(ArrangementError::NotExactlyTwice { .. })
        ));
    }

    #[test]
    fn first_occurrence_position() {
        let a = Arrangement::duplicated(vec![1, 0, 0, 1], 2).unwrap();
        assert_eq!(a.position_of(0), Some(1));
        assert_eq!(a.position_of(1), Some(0));
        assert_eq!(a.position_of(9), None);
    }
}
