//! Consecutive non-overlapping blocks, their raw empirical moments, and the
//! local statistics `W_j = sqrt(l) * g(moments of block j)`.
//!
//! Block `j` (1-based) covers observations `(j-1)*l + 1 ..= j*l`; the
//! `n - b*l` trailing observations that do not fill a block are dropped and
//! reported through [`BlockScheme::dropped`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfuncs::GSpec;
use crate::numeric::CompensatedSum;

/// A finite, non-empty sequence of observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Series(Vec<f64>);

impl Series {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index, value });
        }
        Ok(Series(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Series {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Series::new(values)
    }
}

impl From<Series> for Vec<f64> {
    fn from(s: Series) -> Self {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockScheme {
    pub block_length: usize,
    pub block_count: usize,
    /// Observations after the last full block, which are ignored.
    pub dropped: usize,
}

impl BlockScheme {
    /// Zero-based half-open index range of block `j` (zero-based).
    pub fn range(&self, j: usize) -> std::ops::Range<usize> {
        let start = j * self.block_length;
        start..start + self.block_length
    }

    pub fn covered(&self) -> usize {
        self.block_count * self.block_length
    }
}

pub fn partition(series: &Series, block_length: usize) -> Result<BlockScheme> {
    let n = series.len();
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    if block_length == 0 {
        return Err(Error::InvalidBlockLength(block_length));
    }
    if block_length > n {
        return Err(Error::BlockTooLong { block_length, n });
    }
    let block_count = n / block_length;
    Ok(BlockScheme {
        block_length,
        block_count,
        dropped: n - block_count * block_length,
    })
}

/// Row-major `b_n x m` matrix of raw block moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMoments {
    order: usize,
    block_length: usize,
    data: Vec<f64>,
}

impl LocalMoments {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.order
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.order..(j + 1) * self.order]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.order)
    }
}

/// Raw moments `(1/l) * sum x^k`, `k = 1..=order`, of one block using
/// compensated summation.
pub fn block_moments(block: &[f64], order: usize) -> Vec<f64> {
    let mut sums = vec![CompensatedSum::new(); order];
    for &x in block {
        let mut p = 1.0;
        for acc in sums.iter_mut() {
            p *= x;
            acc.add(p);
        }
    }
    let l = block.len() as f64;
    sums.iter().map(|s| s.value() / l).collect()
}

pub fn local_moments(series: &Series, scheme: &BlockScheme, order: usize) -> Result<LocalMoments> {
    if order == 0 {
        return Err(Error::InvalidParameter("moment order must be at least 1".into()));
    }
    if scheme.covered() > series.len() || scheme.block_length == 0 {
        return Err(Error::InvalidParameter(format!(
            "block scheme covers {} observations but the series has {}",
            scheme.covered(),
            series.len()
        )));
    }
    let values = series.values();
    let data: Vec<f64> = (0..scheme.block_count)
        .into_par_iter()
        .map(|j| block_moments(&values[scheme.range(j)], order))
        .collect::<Vec<_>>()
        .concat();
    Ok(LocalMoments {
        order,
        block_length: scheme.block_length,
        data,
    })
}

/// `W_j = sqrt(l) * g(row j)`, or `sqrt(l) * (g * eta)(row j)` when
/// `truncated` is set.
pub fn local_statistics(moments: &LocalMoments, g: &GSpec, truncated: bool) -> Result<Vec<f64>> {
    if g.order() != moments.order() {
        return Err(Error::MomentOrderMismatch {
            expected: g.order(),
            actual: moments.order(),
        });
    }
    let scale = (moments.block_length() as f64).sqrt();
    moments
        .iter_rows()
        .enumerate()
        .map(|(block, row)| {
            let value = if truncated {
                g.truncated_value(row)
            } else {
                g.value(row)
            };
            value.map(|v| scale * v).ok_or_else(|| Error::DomainViolation {
                block,
                detail: format!("moments {row:?}"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfuncs::{GPreset, GSpec};
    use proptest::prelude::*;

    fn series(v: &[f64]) -> Series {
        Series::new(v.to_vec()).unwrap()
    }

    #[test]
    fn partition_drops_tail() {
        let s = series(&[0.0; 10]);
        let scheme = partition(&s, 3).unwrap();
        assert_eq!(scheme.block_count, 3);
        assert_eq!(scheme.dropped, 1);
        assert_eq!(scheme.range(0), 0..3);
        assert_eq!(scheme.range(1), 3..6);
        assert_eq!(scheme.range(2), 6..9);
    }

    #[test]
    fn partition_single_block() {
        let scheme = partition(&series(&[1.0; 6]), 6).unwrap();
        assert_eq!((scheme.block_count, scheme.dropped), (1, 0));
    }

    #[test]
    fn partition_errors() {
        assert_eq!(
            partition(&series(&[1.0; 5]), 7),
            Err(Error::BlockTooLong { block_length: 7, n: 5 })
        );
        assert_eq!(partition(&series(&[1.0; 5]), 0), Err(Error::InvalidBlockLength(0)));
        assert_eq!(Series::new(vec![]), Err(Error::EmptySeries));
        assert!(matches!(
            Series::new(vec![1.0, f64::NAN]),
            Err(Error::NonFiniteValue { index: 1, .. })
        ));
    }

    #[test]
    fn moments_constant_series() {
        let c = 1.7;
        let s = series(&[c; 12]);
        let scheme = partition(&s, 4).unwrap();
        let m = local_moments(&s, &scheme, 3).unwrap();
        for row in m.iter_rows() {
            assert!((row[0] - c).abs() < 1e-15);
            assert!((row[1] - c * c).abs() < 1e-15);
            assert!((row[2] - c * c * c).abs() < 1e-14);
        }
    }

    #[test]
    fn moments_hand_enumerated() {
        let s = series(&[1.0, 2.0, 3.0, 4.0]);
        let m = local_moments(&s, &partition(&s, 2).unwrap(), 2).unwrap();
        assert_eq!(m.row(0), &[1.5, 2.5]);
        assert_eq!(m.row(1), &[3.5, 12.5]);
    }

    #[test]
    fn moments_zero_series() {
        let s = series(&[0.0; 8]);
        let m = local_moments(&s, &partition(&s, 2).unwrap(), 4).unwrap();
        assert!(m.iter_rows().all(|r| r.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn log_variance_at_unit_moments_is_zero() {
        let g = GSpec::preset(GPreset::LogVariance, vec![0.0, 1.0], None).unwrap();
        let m = LocalMoments {
            order: 2,
            block_length: 100,
            data: vec![0.0, 1.0],
        };
        let w = local_statistics(&m, &g, false).unwrap();
        assert_eq!(w, vec![0.0]);
    }

    #[test]
    fn constant_block_is_a_domain_violation() {
        let g = GSpec::preset(GPreset::LogVariance, vec![0.0, 1.0], None).unwrap();
        let s = series(&[0.3, -1.0, 2.0, 2.0]);
        let m = local_moments(&s, &partition(&s, 2).unwrap(), 2).unwrap();
        match local_statistics(&m, &g, false) {
            Err(Error::DomainViolation { block, .. }) => assert_eq!(block, 1),
            other => panic!("expected domain violation, got {other:?}"),
        }
    }

    #[test]
    fn truncated_statistic_vanishes_far_from_v0() {
        let g = GSpec::preset(GPreset::LogVariance, vec![0.0, 1.0], Some(0.1)).unwrap();
        let m = LocalMoments {
            order: 2,
            block_length: 100,
            data: vec![0.0, 1.25],
        };
        assert_eq!(local_statistics(&m, &g, true).unwrap(), vec![0.0]);
    }

    #[test]
    fn order_mismatch_is_rejected() {
        let g = GSpec::preset(GPreset::LogVariance, vec![0.0, 1.0], None).unwrap();
        let s = series(&[1.0, 2.0, 3.0]);
        let m = local_moments(&s, &partition(&s, 1).unwrap(), 3).unwrap();
        assert!(matches!(
            local_statistics(&m, &g, false),
            Err(Error::MomentOrderMismatch { expected: 2, actual: 3 })
        ));
    }

    #[test]
    fn doubling_block_length_scales_by_sqrt2() {
        let g = GSpec::preset(GPreset::LogVariance, vec![0.0, 1.0], None).unwrap();
        let row = vec![0.1, 1.4];
        let make = |l| LocalMoments {
            order: 2,
            block_length: l,
            data: row.clone(),
        };
        let w1 = local_statistics(&make(50), &g, false).unwrap()[0];
        let w2 = local_statistics(&make(100), &g, false).unwrap()[0];
        assert!((w2 / w1 - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn blocks_reproduce_prefix(values in prop::collection::vec(-1e3f64..1e3, 1..200), l in 1usize..50) {
            let s = Series::new(values.clone()).unwrap();
            prop_assume!(l <= s.len());
            let scheme = partition(&s, l).unwrap();
            let joined: Vec<f64> = (0..scheme.block_count)
                .flat_map(|j| values[scheme.range(j)].to_vec())
                .collect();
            prop_assert_eq!(&joined[..], &values[..scheme.covered()]);
            prop_assert_eq!(scheme.covered() + scheme.dropped, values.len());
        }

        #[test]
        fn moments_permutation_invariant(mut block in prop::collection::vec(-10f64..10.0, 2..40), seed in any::<u64>()) {
            let before = block_moments(&block, 4);
            // deterministic shuffle
            let mut state = seed | 1;
            for i in (1..block.len()).rev() {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                block.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let after = block_moments(&block, 4);
            for (a, b) in before.iter().zip(&after) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
            prop_assert!(before[1] - before[0] * before[0] >= -1e-12 * before[1].abs().max(1.0));
        }

        #[test]
        fn truncation_inactive_inside_radius(dx in -1.0f64..1.0, dy in -1.0f64..1.0) {
            let a = 0.2;
            let g = GSpec::preset(GPreset::LogVariance, vec![0.0, 1.0], Some(a)).unwrap();
            let norm = (dx * dx + dy * dy).sqrt().max(1e-300);
            let r = a * (dx * dx + dy * dy).sqrt().min(0.999);
            let row = [r * dx / norm, 1.0 + r * dy / norm];
            prop_assert_eq!(g.value(&row), g.truncated_value(&row));
        }
    }
}
