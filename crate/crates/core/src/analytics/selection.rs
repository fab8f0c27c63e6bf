//! Choosing the traffic pattern a tag should harvest from.

use serde::Serialize;

/// Outcome of an argmax over patterns. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub index: usize,
    /// Every index attaining the maximum, in increasing order. More than one
    /// entry means the smallest was chosen by the tie rule.
    pub tied: Vec<usize>,
}

impl Selection {
    pub fn is_tie(&self) -> bool {
        self.tied.len() > 1
    }
}

/// Argmax with ties broken towards the smallest index. NaN entries never win.
/// Returns `None` for an empty slice.
pub fn argmax(values: &[f64]) -> Option<Selection> {
    let best = values
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == best)
        .map(|(i, _)| i)
        .collect();
    Some(Selection {
        index: *tied.first()?,
        tied,
    })
}

/// Selection by the largest figure of merit `a_mu^k`.
pub fn select_traffic_claim(a_mu: &[f64]) -> Option<Selection> {
    argmax(a_mu)
}

/// Selection by the largest analytic coverage.
pub fn select_traffic_exhaustive(coverage: &[f64]) -> Option<Selection> {
    argmax(coverage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_pattern() {
        assert_eq!(select_traffic_claim(&[4.2]).unwrap().index, 0);
        assert_eq!(select_traffic_exhaustive(&[0.0]).unwrap().index, 0);
    }

    #[test]
    fn picks_largest() {
        let s = select_traffic_claim(&[1e-5, 3e-5, 2e-5]).unwrap();
        assert_eq!(s.index, 1);
        assert!(!s.is_tie());
    }

    #[test]
    fn ties_go_to_first() {
        let s = select_traffic_exhaustive(&[0.3, 0.3]).unwrap();
        assert_eq!(s.index, 0);
        assert_eq!(s.tied, vec![0, 1]);
    }

    #[test]
    fn empty_has_no_selection() {
        assert!(argmax(&[]).is_none());
        assert!(argmax(&[f64::NAN]).is_none());
    }

    proptest! {
        #[test]
        fn invariant_under_common_rescaling(
            values in prop::collection::vec(1e-9f64..1.0, 1..8),
            scale in 1e-6f64..1e6,
        ) {
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let a = select_traffic_claim(&values).unwrap();
            let b = select_traffic_claim(&scaled).unwrap();
            // Rescaling can merge values that differ only in the last bit.
            prop_assert!(b.index == a.index || (values[b.index] - values[a.index]).abs() <= 4.0 * f64::EPSILON * values[a.index]);
        }
    }
}
