use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metrics::MetricRecord;

/// Mean and 95% confidence half-width of the ratios of one (cutoff, node
/// count) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub cutoff: f64,
    pub n_nodes: usize,
    /// Records in the cell, including those with an undefined ratio.
    pub n_runs: usize,
    pub rpe_ratio_mean: f64,
    pub rpe_ratio_ci95: f64,
    pub ssim_ratio_mean: f64,
    pub ssim_ratio_ci95: f64,
}

/// `(mean, 1.96 * sd / sqrt(n))` with the sample standard deviation over the
/// finite values; the half-width is 0 for a single value and the mean NaN
/// when there is none.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let values: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

/// Groups records by (cutoff, node count), sorted by node count then cutoff.
pub fn aggregate(records: &[MetricRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(usize, u64), Vec<&MetricRecord>> = BTreeMap::new();
    for r in records {
        // cutoffs are positive, so their bit patterns sort like the values
        groups.entry((r.n_nodes, r.cutoff.to_bits())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((n_nodes, bits), rs)| {
            let cutoff = f64::from_bits(bits);
            if rs.len() == 1 {
                log::warn!("cell f_c={cutoff}, n_nodes={n_nodes} has a single run; its confidence interval is 0");
            }
            let rpe: Vec<f64> = rs.iter().map(|r| r.rpe_ratio).collect();
            let ssim: Vec<f64> = rs.iter().map(|r| r.ssim_ratio).collect();
            let (rpe_ratio_mean, rpe_ratio_ci95) = mean_ci95(&rpe);
            let (ssim_ratio_mean, ssim_ratio_ci95) = mean_ci95(&ssim);
            AggregateRow {
                cutoff,
                n_nodes,
                n_runs: rs.len(),
                rpe_ratio_mean,
                rpe_ratio_ci95,
                ssim_ratio_mean,
                ssim_ratio_ci95,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64, cutoff: f64, n_nodes: usize, rpe_ratio: f64) -> MetricRecord {
        MetricRecord {
            scan_seed: seed,
            cutoff,
            n_nodes,
            rpe_before_mm: 1.0,
            rpe_after_mm: rpe_ratio,
            rpe_before_raw_mm: 1.0,
            rpe_after_raw_mm: rpe_ratio,
            ssim_before: 0.5,
            ssim_after: 0.6,
            rpe_ratio,
            rpe_ratio_raw: rpe_ratio,
            ssim_ratio: 1.2,
        }
    }

    #[test]
    fn two_value_interval() {
        let (m, h) = mean_ci95(&[0.4, 0.6]);
        assert!((m - 0.5).abs() < 1e-12);
        let sd = 0.02_f64.sqrt();
        assert!((h - 1.96 * sd / 2f64.sqrt()).abs() < 1e-12);
        assert!((h - 0.196).abs() < 1e-3);
    }

    #[test]
    fn undefined_ratios_are_skipped() {
        assert_eq!(mean_ci95(&[0.4, f64::NAN, 0.6]), mean_ci95(&[0.4, 0.6]));
        assert!(mean_ci95(&[f64::NAN]).0.is_nan());
    }

    #[test]
    fn identical_values_have_zero_width() {
        assert_eq!(mean_ci95(&[0.7; 4]).1, 0.0);
        assert_eq!(mean_ci95(&[0.7]), (0.7, 0.0));
    }

    #[test]
    fn grouping_preserves_counts() {
        let recs = vec![
            record(0, 0.01, 10, 0.4),
            record(1, 0.01, 10, 0.6),
            record(0, 0.1, 10, 0.9),
            record(0, 0.01, 30, 0.5),
            record(1, 0.01, 30, 0.5),
        ];
        let rows = aggregate(&recs);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows.iter().map(|r| r.n_runs).sum::<usize>(), recs.len());
        assert_eq!((rows[0].cutoff, rows[0].n_nodes), (0.01, 10));
        assert!((rows[0].rpe_ratio_mean - 0.5).abs() < 1e-12);
        assert_eq!(rows[1].rpe_ratio_ci95, 0.0);
        assert_eq!(rows[2].rpe_ratio_ci95, 0.0);
    }
}
