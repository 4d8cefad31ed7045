//! Plaintext reference implementations of the binary consistency measure,
//! greedy CWC elimination and mutual information. These are the test oracles
//! for the oblivious algorithms.
//!
//! Feature indices are 0-based throughout.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::dataset::Dataset;
use crate::exec::Execution;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("elimination order must be a permutation of 0..{k}")]
    NotAPermutation { k: usize },
    #[error("exhaustive search supports at most {max} features, got {k}")]
    TooManyFeatures { k: usize, max: usize },
}

pub const BRUTEFORCE_MAX_FEATURES: usize = 15;

/// Subset of a dataset's features as a keep-mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSubset {
    mask: Vec<bool>,
}

impl FeatureSubset {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        FeatureSubset { mask }
    }

    pub fn all(k: usize) -> Self {
        FeatureSubset {
            mask: vec![true; k],
        }
    }

    pub fn none(k: usize) -> Self {
        FeatureSubset {
            mask: vec![false; k],
        }
    }

    pub fn from_indices(k: usize, idx: &[usize]) -> Self {
        let mut mask = vec![false; k];
        for &j in idx {
            mask[j] = true;
        }
        FeatureSubset { mask }
    }

    fn from_bits(k: usize, bits: u32) -> Self {
        FeatureSubset {
            mask: (0..k).map(|j| bits >> j & 1 == 1).collect(),
        }
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn k(&self) -> usize {
        self.mask.len()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.mask[j]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.k()).filter(|&j| self.mask[j]).collect()
    }

    pub fn without(&self, j: usize) -> Self {
        let mut mask = self.mask.clone();
        mask[j] = false;
        FeatureSubset { mask }
    }

    pub fn is_subset_of(&self, other: &FeatureSubset) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self
            .indices()
            .iter()
            .map(|j| format!("f{}", j + 1))
            .collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// True iff no two rows agree on every selected feature yet differ in class
/// (binary consistency measure is 0).
///
/// # Panics
/// If the subset's length differs from the dataset's feature count.
pub fn is_consistent(ds: &Dataset, s: &FeatureSubset) -> bool {
    assert_eq!(s.k(), ds.k(), "subset length must equal feature count");
    let cols = s.indices();
    let mut seen: HashMap<Vec<bool>, bool> = HashMap::with_capacity(ds.n());
    for i in 0..ds.n() {
        let key: Vec<bool> = cols.iter().map(|&j| ds.feature(i, j)).collect();
        let c = ds.class(i);
        if *seen.entry(key).or_insert(c) != c {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CwcOutcome {
    pub subset: FeatureSubset,
    /// The full feature set was already inconsistent, so nothing could be
    /// removed.
    pub inconsistent_input: bool,
}

/// Greedy backward elimination: visiting features in `order`, drop each one
/// whose removal keeps the current set consistent.
pub fn cwc_select(ds: &Dataset, order: &[usize]) -> Result<CwcOutcome, OracleError> {
    let k = ds.k();
    let mut seen = vec![false; k];
    if order.len() != k
        || !order
            .iter()
            .all(|&j| j < k && !std::mem::replace(&mut seen[j], true))
    {
        return Err(OracleError::NotAPermutation { k });
    }
    let mut current = FeatureSubset::all(k);
    let inconsistent_input = !is_consistent(ds, &current);
    for &j in order {
        let candidate = current.without(j);
        if is_consistent(ds, &candidate) {
            current = candidate;
        }
    }
    Ok(CwcOutcome {
        subset: current,
        inconsistent_input,
    })
}

/// `(k-1, k-2, …, 0)`: the order the oblivious algorithms visit features in.
pub fn reverse_order(k: usize) -> Vec<usize> {
    (0..k).rev().collect()
}

/// Empirical `I(f_j; C)` in bits.
pub fn mutual_information(ds: &Dataset, j: usize) -> f64 {
    let n = ds.n() as f64;
    let mut joint = [[0usize; 2]; 2];
    for i in 0..ds.n() {
        joint[ds.feature(i, j) as usize][ds.class(i) as usize] += 1;
    }
    let pf = |f: usize| (joint[f][0] + joint[f][1]) as f64 / n;
    let pc = |c: usize| (joint[0][c] + joint[1][c]) as f64 / n;
    let mut mi = 0.0;
    for (f, row) in joint.iter().enumerate() {
        for (c, &count) in row.iter().enumerate() {
            let p = count as f64 / n;
            if p > 0.0 {
                mi += p * (p / (pf(f) * pc(c))).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Every consistent subset from which no single feature can be removed
/// without losing consistency. Empty when the full set is inconsistent.
pub fn minimal_consistent_bruteforce(ds: &Dataset) -> Result<Vec<FeatureSubset>, OracleError> {
    minimal_consistent_bruteforce_with(ds, Execution::default())
}

pub fn minimal_consistent_bruteforce_with(
    ds: &Dataset,
    exec: Execution,
) -> Result<Vec<FeatureSubset>, OracleError> {
    let k = ds.k();
    if k > BRUTEFORCE_MAX_FEATURES {
        return Err(OracleError::TooManyFeatures {
            k,
            max: BRUTEFORCE_MAX_FEATURES,
        });
    }
    let masks: Vec<u32> = (0..1u32 << k).collect();
    let consistent = exec.map(&masks, |&m| {
        is_consistent(ds, &FeatureSubset::from_bits(k, m))
    });
    Ok(masks
        .iter()
        .filter(|&&m| {
            consistent[m as usize]
                && (0..k).all(|j| m >> j & 1 == 0 || !consistent[(m & !(1 << j)) as usize])
        })
        .map(|&m| FeatureSubset::from_bits(k, m))
        .collect())
}
