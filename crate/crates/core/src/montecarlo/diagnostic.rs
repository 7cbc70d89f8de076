//! Chi-squared association between the setting stream and hidden or lagged
//! outcome features. A confounded run shows up as a statistic that grows
//! with the number of trials.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::TrialRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    /// What the settings were tested against.
    pub feature: String,
    pub trials: usize,
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Tests the context of each trial against the logged hidden summary when a
/// trace is given, and otherwise against the previous trial's outcome pair.
/// Returns `None` when there is nothing to test.
pub fn independence_diagnostic(records: &[TrialRecord], hidden_trace: Option<&[usize]>) -> Option<IndependenceReport> {
    if records.len() < 2 {
        return None;
    }
    let (feature, pairs): (&str, Vec<(usize, usize)>) = match hidden_trace {
        Some(trace) => (
            "hidden source atom",
            records.iter().zip(trace).map(|(r, &h)| (r.context().index(), h)).collect(),
        ),
        None => (
            "previous outcome pair",
            records
                .windows(2)
                .map(|w| {
                    let prev = usize::from(w[0].x > 0) * 2 + usize::from(w[0].y > 0);
                    (w[1].context().index(), prev)
                })
                .collect(),
        ),
    };
    let cols = pairs.iter().map(|&(_, h)| h).max().unwrap_or(0) + 1;
    let mut table = vec![vec![0u64; cols]; 4];
    for &(c, h) in &pairs {
        table[c][h] += 1;
    }
    let (statistic, degrees_of_freedom) = chi_squared(&table);
    let p_value = if degrees_of_freedom == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(degrees_of_freedom as f64).expect("positive degrees of freedom");
        1.0 - dist.cdf(statistic)
    };
    Some(IndependenceReport {
        feature: feature.into(),
        trials: records.len(),
        statistic,
        degrees_of_freedom,
        p_value,
    })
}

/// Pearson statistic over the non-empty rows and columns.
fn chi_squared(table: &[Vec<u64>]) -> (f64, usize) {
    let row_sums: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols = table.first().map_or(0, Vec::len);
    let col_sums: Vec<u64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let total: u64 = row_sums.iter().sum();
    if total == 0 {
        return (0.0, 0);
    }
    let mut stat = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = row_sums[i] as f64 * col_sums[j] as f64 / total as f64;
            if expected > 0.0 {
                stat += (obs as f64 - expected).powi(2) / expected;
            }
        }
    }
    let r = row_sums.iter().filter(|&&s| s > 0).count();
    let c = col_sums.iter().filter(|&&s| s > 0).count();
    (stat, r.saturating_sub(1) * c.saturating_sub(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_model, OutcomeKind};
    use crate::montecarlo::{from_contextual, simulate, SettingSource, SimulationOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chi_squared_of_independent_table_is_zero() {
        let (stat, dof) = chi_squared(&[vec![10, 20], vec![5, 10]]);
        assert!(stat.abs() < 1e-12);
        assert_eq!(dof, 1);
    }

    #[test]
    fn too_few_trials_give_no_report() {
        assert!(independence_diagnostic(&[], None).is_none());
    }

    #[test]
    fn confounding_is_detected_and_grows() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let model = loop {
            let m = random_model(&mut rng, 4, 2, OutcomeKind::Binary);
            if m.source.len() >= 3 {
                break m;
            }
        };
        let dag = from_contextual(&model, SettingSource::default()).unwrap();
        let confound = SimulationOptions { confound: true, ..Default::default() };
        let mut last = 0.0;
        for n in [2_000u64, 20_000] {
            let clean = simulate(&dag, n, 1, &SimulationOptions::default()).unwrap();
            let report = independence_diagnostic(&clean.records, Some(&clean.hidden_trace)).unwrap();
            assert!(report.p_value > 1e-4, "{report:?}");
            let bad = simulate(&dag, n, 1, &confound).unwrap();
            let report = independence_diagnostic(&bad.records, Some(&bad.hidden_trace)).unwrap();
            assert!(report.p_value < 1e-6, "{report:?}");
            assert!(report.statistic > last);
            last = report.statistic;
        }
    }
}
