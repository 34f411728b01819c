//! Plug-in block entropies of quantized paths.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::quantizer::QuantizedPath;

/// A length-`k` tuple of codes.
pub type Block = SmallVec<[i64; 4]>;

/// Sliding-window counts of length-`k` blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockCounts {
    pub k: usize,
    pub counts: HashMap<Block, u64>,
    pub total: u64,
}

impl BlockCounts {
    pub fn support(&self) -> usize {
        self.counts.len()
    }

    /// Count values in ascending order. Sums over this order are
    /// independent of hash-map iteration order.
    pub fn sorted_counts(&self) -> Vec<u64> {
        let mut c: Vec<u64> = self.counts.values().copied().collect();
        c.sort_unstable();
        c
    }

    pub fn get(&self, block: &[i64]) -> u64 {
        self.counts.get(block).copied().unwrap_or(0)
    }

    /// Folds in counts from another shard of the same path.
    pub fn merge(&mut self, other: &BlockCounts) -> Result<()> {
        if other.k != self.k {
            return Err(Error::arg(
                "k",
                format!("cannot merge k={} into k={}", other.k, self.k),
            ));
        }
        for (block, &c) in &other.counts {
            *self.counts.entry(block.clone()).or_insert(0) += c;
        }
        self.total += other.total;
        Ok(())
    }

    /// Too many distinct blocks for the plug-in estimate to be trusted.
    pub fn is_undersampled(&self) -> bool {
        self.support() as u64 * 10 > self.total
    }
}

pub fn count_blocks(qpath: &QuantizedPath, k: usize) -> Result<BlockCounts> {
    count_code_blocks(&qpath.codes, k)
}

pub fn count_code_blocks(codes: &[i64], k: usize) -> Result<BlockCounts> {
    if k == 0 {
        return Err(Error::arg("k", "block length must be at least 1"));
    }
    if k > codes.len() {
        return Err(Error::BlockTooLong { k, n: codes.len() });
    }
    let mut counts: HashMap<Block, u64> = HashMap::new();
    for w in codes.windows(k) {
        *counts.entry(Block::from_slice(w)).or_insert(0) += 1;
    }
    let total = (codes.len() - k + 1) as u64;
    Ok(BlockCounts { k, counts, total })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Plugin,
    MillerMadow,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Plugin => "plugin",
            Estimator::MillerMadow => "miller_madow",
        })
    }
}

/// An entropy in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub estimator: Estimator,
    pub support_seen: usize,
    pub total: u64,
}

pub fn entropy_plugin(counts: &BlockCounts) -> Result<EntropyEstimate> {
    if counts.total == 0 || counts.counts.is_empty() {
        return Err(Error::EmptyCounts);
    }
    let total = counts.total as f64;
    let h: f64 = counts
        .sorted_counts()
        .into_iter()
        .map(|c| {
            let q = c as f64 / total;
            -q * q.log2()
        })
        .sum();
    Ok(EntropyEstimate {
        value: h.max(0.0),
        estimator: Estimator::Plugin,
        support_seen: counts.support(),
        total: counts.total,
    })
}

/// Adds the Miller–Madow bias term `(K-1) / (2 N ln 2)` bits.
pub fn miller_madow_correct(est: &EntropyEstimate, counts: &BlockCounts) -> EntropyEstimate {
    if est.estimator == Estimator::MillerMadow {
        return *est;
    }
    let support = counts.support();
    let bias = if support > 1 && counts.total > 0 {
        (support - 1) as f64 / (2.0 * counts.total as f64 * std::f64::consts::LN_2)
    } else {
        0.0
    };
    EntropyEstimate {
        value: est.value + bias,
        estimator: Estimator::MillerMadow,
        support_seen: support,
        total: counts.total,
    }
}

pub fn block_entropy(
    codes: &[i64],
    k: usize,
    estimator: Estimator,
) -> Result<(EntropyEstimate, BlockCounts)> {
    let counts = count_code_blocks(codes, k)?;
    let plugin = entropy_plugin(&counts)?;
    let est = match estimator {
        Estimator::Plugin => plugin,
        Estimator::MillerMadow => miller_madow_correct(&plugin, &counts),
    };
    Ok((est, counts))
}

/// `H(k+1 blocks) - H(k blocks)`, the entropy of the next code given the
/// previous `k`. Support and total refer to the `k+1` blocks.
pub fn conditional_entropy(qpath: &QuantizedPath, k: usize, estimator: Estimator) -> Result<EntropyEstimate> {
    conditional_entropy_of_codes(&qpath.codes, k, estimator)
}

pub fn conditional_entropy_of_codes(
    codes: &[i64],
    k: usize,
    estimator: Estimator,
) -> Result<EntropyEstimate> {
    if codes.len() < k + 1 {
        return Err(Error::BlockTooLong {
            k: k + 1,
            n: codes.len(),
        });
    }
    let (joint, _) = block_entropy(codes, k + 1, estimator)?;
    let past = if k == 0 {
        0.0
    } else {
        block_entropy(codes, k, estimator)?.0.value
    };
    Ok(EntropyEstimate {
        value: joint.value - past,
        ..joint
    })
}

/// Row of an entropy sweep export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub k: usize,
    pub b: u32,
    pub scheme: crate::quantizer::SchemeKind,
    pub h_conditional_bits: f64,
    pub support_seen: usize,
    pub total: u64,
    pub estimator: Estimator,
}

pub fn write_entropy_csv<W: Write>(rows: &[EntropyRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,b,scheme,H_conditional_bits,support_seen,total,estimator")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k, r.b, r.scheme, r.h_conditional_bits, r.support_seen, r.total, r.estimator
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts_of(pairs: &[(i64, u64)]) -> BlockCounts {
        let counts: HashMap<Block, u64> = pairs.iter().map(|&(s, c)| (Block::from_slice(&[s]), c)).collect();
        let total = pairs.iter().map(|&(_, c)| c).sum();
        BlockCounts { k: 1, counts, total }
    }

    #[test]
    fn constant_pairs() {
        let c = count_code_blocks(&[1, 1, 1, 1], 2).unwrap();
        assert_eq!(c.total, 3);
        assert_eq!(c.support(), 1);
        assert_eq!(c.get(&[1, 1]), 3);
    }

    #[test]
    fn alternating_singles() {
        let c = count_code_blocks(&[0, 1, 0, 1], 1).unwrap();
        assert_eq!(c.get(&[0]), 2);
        assert_eq!(c.get(&[1]), 2);
    }

    #[test]
    fn alternating_pairs_match_enumeration() {
        for n in 2..40usize {
            let codes: Vec<i64> = (0..n as i64).map(|i| i % 2).collect();
            let c = count_code_blocks(&codes, 2).unwrap();
            // Windows starting at even indices read (0,1), odd ones (1,0).
            let starts = n - 1;
            assert_eq!(c.get(&[0, 1]), starts.div_ceil(2) as u64);
            assert_eq!(c.get(&[1, 0]), (starts / 2) as u64);
            assert_eq!(c.total, starts as u64);
        }
    }

    #[test]
    fn too_long_block() {
        assert!(matches!(
            count_code_blocks(&[1, 2], 3),
            Err(Error::BlockTooLong { k: 3, n: 2 })
        ));
    }

    #[test]
    fn fair_coin_is_one_bit() {
        let h = entropy_plugin(&counts_of(&[(0, 500), (1, 500)])).unwrap();
        assert_eq!(h.value, 1.0);
        assert_eq!(h.support_seen, 2);
    }

    #[test]
    fn deterministic_symbol_is_zero() {
        assert_eq!(entropy_plugin(&counts_of(&[(7, 1000)])).unwrap().value, 0.0);
    }

    #[test]
    fn skewed_binary() {
        // H(0.2) from the closed form.
        let closed = -(0.2f64 * 0.2f64.log2() + 0.8 * 0.8f64.log2());
        let h = entropy_plugin(&counts_of(&[(0, 800), (1, 200)])).unwrap();
        assert!((h.value - closed).abs() < 1e-12);
        assert!((h.value - 0.7219).abs() < 1e-4);
    }

    #[test]
    fn empty_counts_error() {
        let c = BlockCounts {
            k: 1,
            counts: HashMap::new(),
            total: 0,
        };
        assert!(matches!(entropy_plugin(&c), Err(Error::EmptyCounts)));
    }

    #[test]
    fn miller_madow_term() {
        let c = counts_of(&[(0, 500), (1, 500)]);
        let plug = entropy_plugin(&c).unwrap();
        let mm = miller_madow_correct(&plug, &c);
        let expected = 1.0 / (2000.0 * std::f64::consts::LN_2);
        assert!((mm.value - plug.value - expected).abs() < 1e-15);
        assert!((expected - 0.00072).abs() < 1e-5);
        let single = counts_of(&[(3, 10)]);
        let plug = entropy_plugin(&single).unwrap();
        assert_eq!(miller_madow_correct(&plug, &single).value, plug.value);
    }

    #[test]
    fn conditional_on_constant_path_is_zero() {
        let codes = vec![5i64; 100];
        for k in 0..4 {
            let h = conditional_entropy_of_codes(&codes, k, Estimator::Plugin).unwrap();
            assert_eq!(h.value, 0.0);
        }
    }

    #[test]
    fn conditional_needs_k_plus_one_samples() {
        assert!(conditional_entropy_of_codes(&[1, 2], 2, Estimator::Plugin).is_err());
    }

    #[test]
    fn merge_is_shard_sum() {
        let codes: Vec<i64> = (0..200).map(|i| (i * 7 % 5) as i64).collect();
        let whole = count_code_blocks(&codes, 2).unwrap();
        // Overlap by k-1 so every window is counted once.
        let mut left = count_code_blocks(&codes[..101], 2).unwrap();
        let right = count_code_blocks(&codes[100..], 2).unwrap();
        left.merge(&right).unwrap();
        assert_eq!(left, whole);
        let other = count_code_blocks(&codes, 3).unwrap();
        assert!(left.merge(&other).is_err());
    }

    #[test]
    fn undersampling_gate() {
        let codes: Vec<i64> = (0..100).collect();
        assert!(count_code_blocks(&codes, 1).unwrap().is_undersampled());
        assert!(!count_code_blocks(&[0; 100], 1).unwrap().is_undersampled());
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        write_entropy_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "k,b,scheme,H_conditional_bits,support_seen,total,estimator\n"
        );
    }
}
