//! Detection metrics over a stream of access decisions.
//!
//! A decision on a request presented by an attacker device is an attack
//! attempt: denial counts as a detection (true positive), a grant as a false
//! negative. A decision on a legitimate requester is a true negative when
//! granted and a false positive when denied.

use serde::{Deserialize, Serialize};

use crate::authn::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Legitimate,
    Attacker,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounters {
    pub true_positive: u64,
    pub false_negative: u64,
    pub true_negative: u64,
    pub false_positive: u64,
}

impl ConfusionCounters {
    pub fn record(&mut self, kind: DeviceKind, verdict: Verdict) {
        match (kind, verdict) {
            (DeviceKind::Attacker, Verdict::Deny) => self.true_positive += 1,
            (DeviceKind::Attacker, Verdict::Grant) => self.false_negative += 1,
            (DeviceKind::Legitimate, Verdict::Grant) => self.true_negative += 1,
            (DeviceKind::Legitimate, Verdict::Deny) => self.false_positive += 1,
        }
    }

    pub fn from_decisions(decisions: impl IntoIterator<Item = (DeviceKind, Verdict)>) -> Self {
        let mut c = ConfusionCounters::default();
        for (kind, verdict) in decisions {
            c.record(kind, verdict);
        }
        c
    }

    /// Attack attempts.
    pub fn attack_attempts(&self) -> u64 {
        self.true_positive + self.false_negative
    }

    /// All requests.
    pub fn requests(&self) -> u64 {
        self.true_positive + self.false_negative + self.true_negative + self.false_positive
    }

    /// Percentage of attack attempts that were denied.
    pub fn detection_rate(&self) -> Option<f64> {
        percent(self.true_positive, self.attack_attempts())
    }

    /// Fraction of all requests decided correctly, in [0, 1].
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.true_positive + self.true_negative, self.requests())
    }

    /// Percentage of attack attempts that were granted.
    pub fn false_negative_rate(&self) -> Option<f64> {
        percent(
            self.false_negative,
            self.false_negative + self.true_positive,
        )
    }

    /// Percentage of legitimate requests that were denied.
    pub fn false_positive_rate(&self) -> Option<f64> {
        percent(
            self.false_positive,
            self.false_positive + self.true_negative,
        )
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn percent(num: u64, den: u64) -> Option<f64> {
    ratio(num, den).map(|r| r * 100.0)
}

/// Renders an optional metric, `N/A` when undefined.
pub fn format_metric(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "N/A".to_string(),
    }
}

/// Empirical cumulative distribution: sorted sample values paired with the
/// fraction of samples at or below each. Ties collapse to one point.
pub fn empirical_cdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = samples.iter().copied().filter(|v| !v.is_nan()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (k, v) in sorted.iter().enumerate() {
        let frac = (k + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => out.push((*v, frac)),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrustSplit {
    /// Trust between nodes already inside the network.
    Internal,
    /// Trust in outside requesters at decision time.
    External,
}

impl TrustSplit {
    pub fn name(self) -> &'static str {
        match self {
            TrustSplit::Internal => "internal",
            TrustSplit::External => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counters: ConfusionCounters,
    pub detection_rate: Option<f64>,
    pub accuracy: Option<f64>,
    pub false_negative_rate: Option<f64>,
    pub false_positive_rate: Option<f64>,
    pub internal_cdf: Vec<(f64, f64)>,
    pub external_cdf: Vec<(f64, f64)>,
}

impl MetricsReport {
    pub fn new(counters: ConfusionCounters, internal: &[f64], external: &[f64]) -> Self {
        MetricsReport {
            counters,
            detection_rate: counters.detection_rate(),
            accuracy: counters.accuracy(),
            false_negative_rate: counters.false_negative_rate(),
            false_positive_rate: counters.false_positive_rate(),
            internal_cdf: empirical_cdf(internal),
            external_cdf: empirical_cdf(external),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counters(tp: u64, fneg: u64, tn: u64, fp: u64) -> ConfusionCounters {
        ConfusionCounters {
            true_positive: tp,
            false_negative: fneg,
            true_negative: tn,
            false_positive: fp,
        }
    }

    #[test]
    fn worked_example() {
        let c = counters(7, 3, 85, 5);
        assert_eq!(c.requests(), 100);
        assert!((c.detection_rate().unwrap() - 70.0).abs() < 1e-12);
        assert!((c.accuracy().unwrap() - 0.92).abs() < 1e-12);
        assert!((c.false_negative_rate().unwrap() - 30.0).abs() < 1e-12);
        assert!((c.false_positive_rate().unwrap() - 5.0 / 90.0 * 100.0).abs() < 1e-12);
    }

    #[test]
    fn undefined_rates() {
        let c = counters(0, 0, 4, 0);
        assert_eq!(c.detection_rate(), None);
        assert_eq!(c.false_negative_rate(), None);
        assert_eq!(c.false_positive_rate(), Some(0.0));
        assert_eq!(format_metric(c.detection_rate()), "N/A");
        assert_eq!(ConfusionCounters::default().accuracy(), None);
    }

    #[test]
    fn record_routes_outcomes() {
        let c = ConfusionCounters::from_decisions([
            (DeviceKind::Attacker, Verdict::Deny),
            (DeviceKind::Attacker, Verdict::Grant),
            (DeviceKind::Legitimate, Verdict::Grant),
            (DeviceKind::Legitimate, Verdict::Deny),
            (DeviceKind::Legitimate, Verdict::Grant),
        ]);
        assert_eq!(c, counters(1, 1, 2, 1));
    }

    #[test]
    fn cdf_shape() {
        let cdf = empirical_cdf(&[0.5, 0.1, 0.5, 0.9]);
        assert_eq!(cdf, vec![(0.1, 0.25), (0.5, 0.75), (0.9, 1.0)]);
        assert!(empirical_cdf(&[]).is_empty());
    }

    proptest! {
        #[test]
        fn detection_and_false_negatives_complement(tp in 0u64..1000, fneg in 0u64..1000) {
            prop_assume!(tp + fneg > 0);
            let c = counters(tp, fneg, 0, 0);
            let sum = c.detection_rate().unwrap() + c.false_negative_rate().unwrap();
            prop_assert!((sum - 100.0).abs() < 1e-9);
        }

        #[test]
        fn cdf_is_monotone(samples in proptest::collection::vec(0.0f64..1.0, 1..200)) {
            let cdf = empirical_cdf(&samples);
            for w in cdf.windows(2) {
                prop_assert!(w[0].0 < w[1].0);
                prop_assert!(w[0].1 < w[1].1);
            }
            prop_assert!((cdf.last().unwrap().1 - 1.0).abs() < 1e-12);
        }
    }
}
