//! Pooling drop records into CDFs and summary values.

use super::pipeline::{DropStats, EntityKind};

/// Linear-interpolated quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

/// Mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n == 0 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((mean, (var / n as f64).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub class: EntityKind,
    /// Ascending SINR samples in dB.
    pub sinr_db: Vec<f64>,
}

impl ClassStats {
    /// `(x_k, k/n)` for the k-th smallest sample.
    pub fn cdf(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.sinr_db.len() as f64;
        self.sinr_db.iter().enumerate().map(move |(k, &x)| (x, (k + 1) as f64 / n))
    }

    pub fn median_db(&self) -> Option<f64> {
        quantile(&self.sinr_db, 0.5)
    }

    pub fn p10_db(&self) -> Option<f64> {
        quantile(&self.sinr_db, 0.1)
    }

    /// Fraction of samples strictly below 0 dB.
    pub fn frac_below_0db(&self) -> Option<f64> {
        if self.sinr_db.is_empty() {
            return None;
        }
        let below = self.sinr_db.partition_point(|&x| x < 0.0);
        Some(below as f64 / self.sinr_db.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    /// One entry per [`EntityKind`], in [`EntityKind::ALL`] order.
    pub classes: Vec<ClassStats>,
    /// Mean end-to-end rate over all records, bit/s.
    pub mean_throughput_bps: Option<f64>,
    /// Standard error of the per-drop mean rate, bit/s.
    pub throughput_se_bps: Option<f64>,
    /// Mean over drops of the per-drop total UE transmit power, W.
    pub mean_total_power_w: Option<f64>,
    pub total_power_se_w: Option<f64>,
    pub drops: usize,
    pub failed_drops: usize,
    pub records: usize,
}

impl AggregateStats {
    pub fn class(&self, kind: EntityKind) -> &ClassStats {
        self.classes.iter().find(|c| c.class == kind).expect("every class is present")
    }

    pub fn failure_rate(&self) -> f64 {
        let total = self.drops + self.failed_drops;
        if total == 0 {
            0.0
        } else {
            self.failed_drops as f64 / total as f64
        }
    }

    /// P(SINR < 0 dB) over D2D candidates.
    pub fn p_sinr_below_0db(&self) -> Option<f64> {
        self.class(EntityKind::D2dCandidate).frac_below_0db()
    }

    pub fn mean_throughput_mbps(&self) -> Option<f64> {
        self.mean_throughput_bps.map(|b| b / 1e6)
    }
}

/// Pools the records of completed drops. `failed_drops` is only carried
/// into the result.
pub fn aggregate(drops: &[DropStats], failed_drops: usize) -> AggregateStats {
    let classes = EntityKind::ALL
        .iter()
        .map(|&class| {
            let mut sinr_db: Vec<f64> =
                drops.iter().flat_map(|d| &d.records).filter(|r| r.kind == class).map(|r| r.sinr_db).collect();
            sinr_db.sort_by(f64::total_cmp);
            ClassStats { class, sinr_db }
        })
        .collect();

    let records = drops.iter().map(|d| d.records.len()).sum::<usize>();
    let mean_throughput_bps =
        (records > 0).then(|| drops.iter().flat_map(|d| &d.records).map(|r| r.rate_bps).sum::<f64>() / records as f64);
    let per_drop_rate: Vec<f64> = drops
        .iter()
        .filter(|d| !d.records.is_empty())
        .map(|d| d.records.iter().map(|r| r.rate_bps).sum::<f64>() / d.records.len() as f64)
        .collect();
    let per_drop_power: Vec<f64> = drops.iter().map(|d| d.total_power_w).collect();
    let power = mean_and_se(&per_drop_power);

    AggregateStats {
        classes,
        mean_throughput_bps,
        throughput_se_bps: mean_and_se(&per_drop_rate).map(|(_, se)| se),
        mean_total_power_w: power.map(|(m, _)| m),
        total_power_se_w: power.map(|(_, se)| se),
        drops: drops.len(),
        failed_drops,
        records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modeselect::ModeDecision;
    use crate::sim::pipeline::EntityRecord;

    fn rec(kind: EntityKind, sinr_db: f64, rate: f64) -> EntityRecord {
        EntityRecord { kind, mode: ModeDecision::D2dSingleHop, sinr_db, hop_power_dbm: vec![0.0], rate_bps: rate }
    }

    fn drop_of(index: usize, records: Vec<EntityRecord>, power: f64) -> DropStats {
        DropStats { drop_index: index, records, total_power_w: power }
    }

    #[test]
    fn single_record() {
        let s = aggregate(&[drop_of(0, vec![rec(EntityKind::D2dCandidate, 5.0, 1e6)], 0.1)], 0);
        let d2d = s.class(EntityKind::D2dCandidate);
        assert_eq!(d2d.cdf().collect::<Vec<_>>(), vec![(5.0, 1.0)]);
        assert_eq!(s.p_sinr_below_0db(), Some(0.0));
        assert_eq!(d2d.median_db(), Some(5.0));
        assert_eq!(s.mean_throughput_mbps(), Some(1.0));
        assert!(s.class(EntityKind::CellularUe).sinr_db.is_empty());
    }

    #[test]
    fn half_below_zero() {
        let s = aggregate(
            &[drop_of(0, vec![rec(EntityKind::D2dCandidate, 5.0, 1.0), rec(EntityKind::D2dCandidate, -5.0, 1.0)], 0.0)],
            0,
        );
        assert_eq!(s.p_sinr_below_0db(), Some(0.5));
        assert_eq!(s.class(EntityKind::D2dCandidate).cdf().collect::<Vec<_>>(), vec![(-5.0, 0.5), (5.0, 1.0)]);
        assert_eq!(s.class(EntityKind::D2dCandidate).median_db(), Some(0.0));
    }

    #[test]
    fn pooling_is_concatenation() {
        let a = drop_of(0, vec![rec(EntityKind::D2dCandidate, 1.0, 2.0), rec(EntityKind::CellularUe, 3.0, 4.0)], 0.5);
        let b = drop_of(1, vec![rec(EntityKind::D2dCandidate, -2.0, 6.0), rec(EntityKind::CellularUe, 7.0, 8.0)], 1.5);
        let two = aggregate(&[a.clone(), b.clone()], 0);
        let mut joined = a.clone();
        joined.records.extend(b.records.clone());
        let one = aggregate(&[joined], 0);
        assert_eq!(two.classes, one.classes);
        assert_eq!(two.mean_throughput_bps, one.mean_throughput_bps);
        assert_eq!(two.records, 4);
        assert_eq!(two.mean_total_power_w, Some(1.0));
        assert!((two.total_power_se_w.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_has_no_metrics() {
        let s = aggregate(&[], 2);
        assert_eq!(s.mean_throughput_bps, None);
        assert_eq!(s.p_sinr_below_0db(), None);
        assert_eq!(s.failure_rate(), 1.0);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&v, 1.0), Some(4.0));
        assert!((quantile(&v, 0.1).unwrap() - 1.3).abs() < 1e-12);
        assert_eq!(quantile(&[], 0.5), None);
    }
}
