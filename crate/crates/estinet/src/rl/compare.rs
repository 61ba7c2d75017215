//! Learning-efficiency comparison: gradient updates versus digit accuracy
//! for two training runs, aligned on the accuracy-threshold crossing.

use serde::{Deserialize, Serialize};

use super::a2c::A2cRunLog;

/// (gradient updates, accuracy) log of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearningCurve {
    pub label: String,
    pub points: Vec<(usize, f64)>,
}

impl LearningCurve {
    pub fn from_a2c(log: &A2cRunLog, label: &str) -> Self {
        LearningCurve {
            label: label.to_string(),
            points: log.points.iter().map(|p| (p.updates, p.policy_accuracy)).collect(),
        }
    }

    /// First logged update count at or above the threshold; `None` when the
    /// run never reached it.
    pub fn updates_to_threshold(&self, threshold: f64) -> Option<usize> {
        self.points.iter().find(|(_, acc)| *acc >= threshold).map(|(u, _)| *u)
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.points
            .iter()
            .copied()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub threshold: f64,
    pub first_label: String,
    pub first_updates_to_threshold: Option<usize>,
    pub first_best: Option<(usize, f64)>,
    pub second_label: String,
    pub second_updates_to_threshold: Option<usize>,
    pub second_best: Option<(usize, f64)>,
    /// True when the first run reaches the threshold strictly earlier than
    /// the second (a run that never reaches it counts as infinitely late).
    pub first_dominates: bool,
}

/// Align two curves at an accuracy threshold. The first curve "dominates"
/// when it crosses strictly earlier (or crosses at all while the second
/// never does).
pub fn compare_learning_efficiency(
    first: &LearningCurve,
    second: &LearningCurve,
    threshold: f64,
) -> EfficiencyReport {
    let fu = first.updates_to_threshold(threshold);
    let su = second.updates_to_threshold(threshold);
    let first_dominates = match (fu, su) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    };
    EfficiencyReport {
        threshold,
        first_label: first.label.clone(),
        first_updates_to_threshold: fu,
        first_best: first.best(),
        second_label: second.label.clone(),
        second_updates_to_threshold: su,
        second_best: second.best(),
        first_dominates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(label: &str, pts: &[(usize, f64)]) -> LearningCurve {
        LearningCurve { label: label.into(), points: pts.to_vec() }
    }

    #[test]
    fn threshold_crossing_and_sentinel() {
        let a = curve("a", &[(100, 0.5), (200, 0.92), (300, 0.95)]);
        let b = curve("b", &[(100, 0.2), (200, 0.4), (300, 0.6)]);
        assert_eq!(a.updates_to_threshold(0.9), Some(200));
        assert_eq!(b.updates_to_threshold(0.9), None);
        // Threshold above both curves: both sentinels, no dominance.
        let high = compare_learning_efficiency(&a, &b, 0.99);
        assert_eq!(high.first_updates_to_threshold, None);
        assert_eq!(high.second_updates_to_threshold, None);
        assert!(!high.first_dominates);
    }

    #[test]
    fn dominance_cases() {
        let fast = curve("fast", &[(100, 0.95)]);
        let slow = curve("slow", &[(100, 0.3), (500, 0.95)]);
        assert!(compare_learning_efficiency(&fast, &slow, 0.9).first_dominates);
        assert!(!compare_learning_efficiency(&slow, &fast, 0.9).first_dominates);
        let never = curve("never", &[(100, 0.1)]);
        assert!(compare_learning_efficiency(&fast, &never, 0.9).first_dominates);
    }

    #[test]
    fn report_is_reproducible_from_persisted_logs() {
        let a = curve("a", &[(100, 0.5), (200, 0.92)]);
        let b = curve("b", &[(100, 0.2)]);
        let report = compare_learning_efficiency(&a, &b, 0.9);
        let a_json = serde_json::to_string(&a).unwrap();
        let b_json = serde_json::to_string(&b).unwrap();
        let a2: LearningCurve = serde_json::from_str(&a_json).unwrap();
        let b2: LearningCurve = serde_json::from_str(&b_json).unwrap();
        let report2 = compare_learning_efficiency(&a2, &b2, 0.9);
        assert_eq!(
            serde_json::to_string(&report).unwrap(),
            serde_json::to_string(&report2).unwrap()
        );
    }
}
