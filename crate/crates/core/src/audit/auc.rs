use serde::{Deserialize, Serialize};

/// Which direction of the score points at the target-present world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Smaller scores indicate presence (the KNN feature: a memorized target
    /// has close synthetic neighbours).
    #[default]
    SmallerMeansPresent,
    LargerMeansPresent,
}

/// Probability that a random present-world score ranks as more "present"
/// than a random absent-world score, ties counting one half. Both lists must
/// be non-empty; otherwise the result is `NaN`.
pub fn auc_roc(absent: &[f64], present: &[f64], orientation: Orientation) -> f64 {
    let mut credit = 0.0;
    for &a in absent {
        for &p in present {
            let (hi, lo) = match orientation {
                Orientation::SmallerMeansPresent => (a, p),
                Orientation::LargerMeansPresent => (p, a),
            };
            credit += if hi > lo {
                1.0
            } else if hi == lo {
                0.5
            } else {
                0.0
            };
        }
    }
    credit / (absent.len() * present.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_lists() {
        assert_eq!(auc_roc(&[0.1, 0.2], &[0.8, 0.9], Orientation::LargerMeansPresent), 1.0);
        assert_eq!(auc_roc(&[0.1, 0.2], &[0.8, 0.9], Orientation::SmallerMeansPresent), 0.0);
        assert_eq!(auc_roc(&[0.3, 0.7], &[0.3, 0.7], Orientation::SmallerMeansPresent), 0.5);
        assert_eq!(auc_roc(&[0.1, 0.9], &[0.2, 0.8], Orientation::LargerMeansPresent), 0.5);
    }
}
