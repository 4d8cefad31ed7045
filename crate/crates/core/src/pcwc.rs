//! Oblivious consistency-based feature selection.
//!
//! Both algorithms visit features from last to first and produce one
//! encrypted keep-bit per feature; they are built only from circuit gates and
//! sorting networks, so the executed circuit depends on `(n_pad, k)` alone.
//!
//! * [`naive_select`] re-sorts the whole dataset by `F \ {f_t}` for every
//!   feature.
//! * [`improved_select`] sorts once by the full feature vector, keeps prefix
//!   labels `L`, and per feature only re-sorts short label/index records:
//!   suffix labels `PostL`, the position map `MapL` and its inverse.
//!
//! Grouping sorts put the negated validity bit on top of the key, so padding
//! rows collect after all real rows and never split a group of real rows.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::dataset::{pad, Dataset};
use crate::obool::{Bit, Circuit, CircuitError, Engine, GateCounts, SimEngine, TraceLevel, Word};
use crate::sortnet::{
    generate_network, inverse_permutation, oblivious_sort, with_stability_suffix, KeyedRecordSet,
    Record, SortError, SortingNetwork,
};

#[derive(Debug, Error)]
pub enum PcwcError {
    #[error("invalid encrypted state: {0}")]
    Shape(String),
    #[error(transparent)]
    Sort(#[from] SortError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

impl PcwcError {
    /// The circuit aborted because it hit its gate budget.
    pub fn is_budget_exceeded(&self) -> bool {
        matches!(
            self,
            PcwcError::Circuit(CircuitError::BudgetExceeded(_))
                | PcwcError::Sort(SortError::Circuit(CircuitError::BudgetExceeded(_)))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Naive,
    Improved,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Naive => "naive",
            Algorithm::Improved => "improved",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Algorithm::Naive),
            "improved" => Ok(Algorithm::Improved),
            other => Err(format!(
                "unknown algorithm `{other}` (expected naive or improved)"
            )),
        }
    }
}

/// Encrypted, padded dataset: `k` feature columns, class and validity, each
/// of length `n_pad` in the current physical row order.
#[derive(Debug, Clone)]
pub struct EncryptedDatasetState {
    features: Vec<Vec<Bit>>,
    classes: Vec<Bit>,
    validity: Vec<Bit>,
}

impl EncryptedDatasetState {
    pub fn from_columns(
        features: Vec<Vec<Bit>>,
        classes: Vec<Bit>,
        validity: Vec<Bit>,
    ) -> Result<Self, PcwcError> {
        let n = classes.len();
        if !n.is_power_of_two() {
            return Err(PcwcError::Shape(format!(
                "column length {n} is not a power of two"
            )));
        }
        if features.is_empty() {
            return Err(PcwcError::Shape("no feature columns".into()));
        }
        if validity.len() != n || features.iter().any(|c| c.len() != n) {
            return Err(PcwcError::Shape("columns have different lengths".into()));
        }
        Ok(EncryptedDatasetState {
            features,
            classes,
            validity,
        })
    }

    /// Encrypts a padded copy of `ds` column by column (owner side).
    pub fn encrypt<E: Engine>(circ: &mut Circuit<E>, ds: &Dataset) -> Result<Self, PcwcError> {
        let p = pad(ds);
        let n = p.n_pad();
        let mut features = Vec::with_capacity(p.k());
        for j in 0..p.k() {
            features.push(
                (0..n)
                    .map(|i| circ.encrypt(p.feature(i, j)))
                    .collect::<Result<_, _>>()?,
            );
        }
        let classes = (0..n)
            .map(|i| circ.encrypt(p.class(i)))
            .collect::<Result<_, _>>()?;
        let validity = p
            .validity()
            .iter()
            .map(|&v| circ.encrypt(v))
            .collect::<Result<_, _>>()?;
        Self::from_columns(features, classes, validity)
    }

    pub fn n_pad(&self) -> usize {
        self.classes.len()
    }

    pub fn k(&self) -> usize {
        self.features.len()
    }

    /// Width of labels, positions and stability suffixes.
    pub fn label_width(&self) -> usize {
        self.n_pad().trailing_zeros() as usize
    }

    pub fn features(&self) -> &[Vec<Bit>] {
        &self.features
    }

    pub fn classes(&self) -> &[Bit] {
        &self.classes
    }

    pub fn validity(&self) -> &[Bit] {
        &self.validity
    }
}

/// Label arrays of the improved algorithm.
#[derive(Debug, Clone)]
pub struct LabelState {
    /// `prefix[t][i]`: group of sorted row `i` by features `0..t`; `prefix[0]` is all zero.
    pub prefix: Vec<Vec<Word>>,
    /// Group of each row by the already-processed suffix features.
    pub post: Vec<Word>,
    /// Prefix-order position of the row at each suffix-order position.
    pub map: Vec<Word>,
    /// Inverse of `map`.
    pub map_inv: Vec<Word>,
}

/// Encrypted keep-mask; bit `t` is 1 when feature `t` is selected.
#[derive(Debug, Clone)]
pub struct SelectionMaskCipher {
    bits: Vec<Bit>,
}

impl SelectionMaskCipher {
    pub fn from_bits(bits: Vec<Bit>) -> Self {
        SelectionMaskCipher { bits }
    }

    pub fn bits(&self) -> &[Bit] {
        &self.bits
    }

    pub fn decrypt<E: Engine>(&self, circ: &mut Circuit<E>) -> Result<Vec<bool>, CircuitError> {
        self.bits.iter().map(|&b| circ.decrypt(b)).collect()
    }
}

/// Labels from adjacent-equality bits: `label[0] = 0`,
/// `label[i] = label[i-1] + ¬same[i-1]`.
fn labels_from_adjacency<E: Engine>(
    circ: &mut Circuit<E>,
    same: &[Bit],
    width: usize,
) -> Result<Vec<Word>, PcwcError> {
    let mut labels = Vec::with_capacity(same.len() + 1);
    labels.push(circ.constant_word(0, width)?);
    for &s in same {
        let step = circ.not(s)?;
        let next = circ.add_bit(labels.last().expect("nonempty"), step)?;
        labels.push(next);
    }
    Ok(labels)
}

/// Prefix labels over `columns` (rows already sorted lexicographically by
/// them): entry `t` groups rows by columns `0..t`. The adjacency bit for
/// prefix `t` reuses the one for `t-1`.
fn prefix_labels<E: Engine>(
    circ: &mut Circuit<E>,
    columns: &[&[Bit]],
    n: usize,
    width: usize,
) -> Result<Vec<Vec<Word>>, PcwcError> {
    let zero = (0..n)
        .map(|_| circ.constant_word(0, width))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = vec![zero];
    let mut same: Vec<Bit> = Vec::new();
    for (t, col) in columns.iter().enumerate() {
        let mut next = Vec::with_capacity(n.saturating_sub(1));
        for i in 1..n {
            let d = circ.xor(col[i - 1], col[i])?;
            let e = circ.not(d)?;
            next.push(if t == 0 { e } else { circ.and(same[i - 1], e)? });
        }
        same = next;
        out.push(labels_from_adjacency(circ, &same, width)?);
    }
    Ok(out)
}

/// Prefix labels `L[0..=k]` of a state sorted by its full feature vector.
pub fn compute_prefix_labels<E: Engine>(
    circ: &mut Circuit<E>,
    sorted: &EncryptedDatasetState,
) -> Result<Vec<Vec<Word>>, PcwcError> {
    let cols: Vec<&[Bit]> = sorted.features.iter().map(Vec::as_slice).collect();
    prefix_labels(circ, &cols, sorted.n_pad(), sorted.label_width())
}

/// Encrypted keep-bit: OR over adjacent pairs of
/// `valid[i-1] · valid[i] · eq(group[i-1], group[i]) · (class[i-1] ⊕ class[i])`,
/// where a row's group is the pair `(group_a, group_b)`.
///
/// Rows of the same group must be adjacent. The result is 1 iff some real
/// group holds both classes, i.e. the feature under test cannot be dropped.
pub fn consistency_bit<E: Engine>(
    circ: &mut Circuit<E>,
    group_a: &[Word],
    group_b: &[Word],
    classes: &[Bit],
    validity: &[Bit],
) -> Result<Bit, PcwcError> {
    let n = classes.len();
    if group_a.len() != n || group_b.len() != n || validity.len() != n {
        return Err(PcwcError::Shape(
            "consistency inputs differ in length".into(),
        ));
    }
    let mut keep = circ.constant(false)?;
    for i in 1..n {
        let prev = Word::concat_msb_first([&group_a[i - 1], &group_b[i - 1]]);
        let cur = Word::concat_msb_first([&group_a[i], &group_b[i]]);
        let same = circ.eq(&prev, &cur)?;
        let differ = circ.xor(classes[i - 1], classes[i])?;
        let real = circ.and(validity[i - 1], validity[i])?;
        let clash = circ.and(same, differ)?;
        let violation = circ.and(clash, real)?;
        keep = circ.or(keep, violation)?;
    }
    Ok(keep)
}

fn sort_records<E: Engine>(
    circ: &mut Circuit<E>,
    records: Vec<Record>,
    net: &SortingNetwork,
    stable: bool,
) -> Result<Vec<Record>, PcwcError> {
    let mut rs = KeyedRecordSet::new(records)?;
    if stable {
        rs = with_stability_suffix(circ, rs)?;
    }
    oblivious_sort(circ, &mut rs, net)?;
    Ok(rs.into_records())
}

/// Sorts rows by `(¬validity, f_1, …, f_k)` with a stability suffix; optional
/// per-row tag words travel along.
fn sort_by_features_tagged<E: Engine>(
    circ: &mut Circuit<E>,
    state: &EncryptedDatasetState,
    tags: Option<&[Word]>,
    net: &SortingNetwork,
) -> Result<(EncryptedDatasetState, Option<Vec<Word>>), PcwcError> {
    let (n, k, w) = (state.n_pad(), state.k(), state.label_width());
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let mut key_bits = Vec::with_capacity(k + 1);
        for j in (0..k).rev() {
            key_bits.push(state.features[j][i]);
        }
        key_bits.push(circ.not(state.validity[i])?);
        let mut payload = vec![state.classes[i].into(), state.validity[i].into()];
        if let Some(t) = tags {
            payload.push(t[i].clone());
        }
        records.push(Record {
            key: Word::from_bits(key_bits),
            payload,
        });
    }
    let sorted = sort_records(circ, records, net, true)?;
    let mut features = vec![Vec::with_capacity(n); k];
    let mut classes = Vec::with_capacity(n);
    let mut validity = Vec::with_capacity(n);
    let mut out_tags = tags.map(|_| Vec::with_capacity(n));
    for r in sorted {
        for (j, col) in features.iter_mut().enumerate() {
            col.push(r.key.bit(w + (k - 1 - j)));
        }
        classes.push(r.payload[0].bit(0));
        validity.push(r.payload[1].bit(0));
        if let Some(t) = out_tags.as_mut() {
            t.push(r.payload[2].clone());
        }
    }
    Ok((
        EncryptedDatasetState {
            features,
            classes,
            validity,
        },
        out_tags,
    ))
}

/// Stable oblivious sort of the whole state by its feature vector, real rows
/// first.
pub fn sort_by_features<E: Engine>(
    circ: &mut Circuit<E>,
    state: &EncryptedDatasetState,
) -> Result<EncryptedDatasetState, PcwcError> {
    let net = generate_network(state.n_pad())?;
    Ok(sort_by_features_tagged(circ, state, None, &net)?.0)
}

/// [`sort_by_features`] carrying one tag word per row; returns the sorted
/// state and the tags in sorted order.
pub fn sort_by_features_with_tags<E: Engine>(
    circ: &mut Circuit<E>,
    state: &EncryptedDatasetState,
    tags: &[Word],
) -> Result<(EncryptedDatasetState, Vec<Word>), PcwcError> {
    if tags.len() != state.n_pad() {
        return Err(PcwcError::Shape("one tag per padded row required".into()));
    }
    let net = generate_network(state.n_pad())?;
    let (sorted, tags) = sort_by_features_tagged(circ, state, Some(tags), &net)?;
    Ok((sorted, tags.expect("tags requested")))
}

/// Re-sorts the full dataset by `F \ {f_t}` for each `t = k-1, …, 0`.
pub fn naive_select<E: Engine>(
    circ: &mut Circuit<E>,
    enc: &EncryptedDatasetState,
) -> Result<SelectionMaskCipher, PcwcError> {
    let (n, k, w) = (enc.n_pad(), enc.k(), enc.label_width());
    let net = generate_network(n)?;
    let mut features = enc.features.clone();
    let mut classes = enc.classes.clone();
    let mut validity = enc.validity.clone();
    let mut keep = vec![None; k];

    for t in (0..k).rev() {
        let others: Vec<usize> = (0..k).filter(|&j| j != t).collect();
        let mut records = Vec::with_capacity(n);
        for i in 0..n {
            let mut key_bits: Vec<Bit> = others.iter().rev().map(|&j| features[j][i]).collect();
            key_bits.push(circ.not(validity[i])?);
            records.push(Record {
                key: Word::from_bits(key_bits),
                payload: vec![features[t][i].into(), classes[i].into(), validity[i].into()],
            });
        }
        let sorted = sort_records(circ, records, &net, true)?;
        for (i, r) in sorted.iter().enumerate() {
            for (pos, &j) in others.iter().enumerate() {
                features[j][i] = r.key.bit(w + (others.len() - 1 - pos));
            }
            features[t][i] = r.payload[0].bit(0);
            classes[i] = r.payload[1].bit(0);
            validity[i] = r.payload[2].bit(0);
        }

        let cols: Vec<&[Bit]> = others.iter().map(|&j| features[j].as_slice()).collect();
        let labels = prefix_labels(circ, &cols, n, w)?;
        let finest = labels.last().expect("label 0 always present");
        let none = vec![Word::empty(); n];
        let b = consistency_bit(circ, finest, &none, &classes, &validity)?;
        for x in features[t].iter_mut() {
            *x = circ.and(*x, b)?;
        }
        keep[t] = Some(b);
    }
    Ok(SelectionMaskCipher {
        bits: keep
            .into_iter()
            .map(|b| b.expect("every feature visited"))
            .collect(),
    })
}

/// Row tags observed right after the prefix side was aligned to the suffix
/// side in one iteration of [`improved_select_probed`].
#[derive(Debug, Clone)]
pub struct AlignmentProbe {
    pub feature: usize,
    pub suffix_tags: Vec<Word>,
    pub prefix_tags: Vec<Word>,
}

/// Sort-once selection driven by prefix labels, suffix labels and the
/// prefix/suffix position map.
pub fn improved_select<E: Engine>(
    circ: &mut Circuit<E>,
    enc: &EncryptedDatasetState,
) -> Result<SelectionMaskCipher, PcwcError> {
    Ok(improved_inner(circ, enc, None)?.0)
}

/// [`improved_select`] with per-row tag words carried on both sides; the
/// returned probes let a test check that aligned positions hold the same row.
/// The circuit differs from the untagged one only by the extra payload.
pub fn improved_select_probed<E: Engine>(
    circ: &mut Circuit<E>,
    enc: &EncryptedDatasetState,
    tags: &[Word],
) -> Result<(SelectionMaskCipher, LabelState, Vec<AlignmentProbe>), PcwcError> {
    if tags.len() != enc.n_pad() {
        return Err(PcwcError::Shape("one tag per padded row required".into()));
    }
    improved_inner(circ, enc, Some(tags))
}

fn improved_inner<E: Engine>(
    circ: &mut Circuit<E>,
    enc: &EncryptedDatasetState,
    tags: Option<&[Word]>,
) -> Result<(SelectionMaskCipher, LabelState, Vec<AlignmentProbe>), PcwcError> {
    let (n, k, w) = (enc.n_pad(), enc.k(), enc.label_width());
    let net = generate_network(n)?;

    // Phase 1: one full sort, all prefix labels, trivial suffix state.
    let (sorted, prefix_tags) = sort_by_features_tagged(circ, enc, tags, &net)?;
    let prefix = compute_prefix_labels(circ, &sorted)?;
    let mut post = (0..n)
        .map(|_| circ.constant_word(0, w))
        .collect::<Result<Vec<_>, _>>()?;
    let mut map = (0..n)
        .map(|i| circ.constant_word(i as u64, w))
        .collect::<Result<Vec<_>, _>>()?;
    let mut map_inv = Vec::new();
    let mut s_class = sorted.classes.clone();
    let mut s_valid = sorted.validity.clone();
    let mut s_tags = prefix_tags.clone();
    // f_{t+1} aligned with the suffix order, already multiplied by its keep-bit.
    let mut carried: Option<Vec<Bit>> = None;
    let mut keep = vec![None; k];
    let mut probes = Vec::new();

    for t in (0..k).rev() {
        // Phase 2a: extend the suffix grouping by the feature decided last.
        if let Some(f_next) = carried.take() {
            let mut records = Vec::with_capacity(n);
            for i in 0..n {
                let mut payload = vec![s_class[i].into(), s_valid[i].into(), map[i].clone()];
                if let Some(st) = &s_tags {
                    payload.push(st[i].clone());
                }
                records.push(Record {
                    key: Word::concat_msb_first([&Word::from(f_next[i]), &post[i]]),
                    payload,
                });
            }
            let sorted = sort_records(circ, records, &net, true)?;
            let groups: Vec<Word> = sorted.iter().map(|r| r.key.slice(w, w + 1)).collect();
            let same = (1..n)
                .map(|i| circ.eq(&groups[i - 1], &groups[i]))
                .collect::<Result<Vec<_>, _>>()?;
            post = labels_from_adjacency(circ, &same, w)?;
            for (i, r) in sorted.into_iter().enumerate() {
                let mut p = r.payload.into_iter();
                s_class[i] = p.next().expect("class").bit(0);
                s_valid[i] = p.next().expect("validity").bit(0);
                map[i] = p.next().expect("map");
                if let Some(st) = s_tags.as_mut() {
                    st[i] = p.next().expect("tag");
                }
            }
        }

        // Phase 2b: bring f_t and L[t] (features 0..t) into suffix order.
        map_inv = inverse_permutation(circ, &map)?;
        let mut records = Vec::with_capacity(n);
        for p in 0..n {
            let mut payload = vec![sorted.features[t][p].into(), prefix[t][p].clone()];
            if let Some(pt) = &prefix_tags {
                payload.push(pt[p].clone());
            }
            records.push(Record {
                key: map_inv[p].clone(),
                payload,
            });
        }
        let aligned = sort_records(circ, records, &net, false)?;
        let mut f_aligned = Vec::with_capacity(n);
        let mut l_aligned = Vec::with_capacity(n);
        let mut tag_aligned = Vec::new();
        for r in aligned {
            let mut p = r.payload.into_iter();
            f_aligned.push(p.next().expect("feature").bit(0));
            l_aligned.push(p.next().expect("label"));
            if prefix_tags.is_some() {
                tag_aligned.push(p.next().expect("tag"));
            }
        }
        if let Some(st) = &s_tags {
            probes.push(AlignmentProbe {
                feature: t,
                suffix_tags: st.clone(),
                prefix_tags: tag_aligned,
            });
        }

        // Phase 3: make (L, PostL) groups adjacent, decide, update f_t.
        let mut records = Vec::with_capacity(n);
        for i in 0..n {
            let invalid = Word::from(circ.not(s_valid[i])?);
            records.push(Record {
                key: Word::concat_msb_first([&invalid, &l_aligned[i], &post[i]]),
                payload: vec![s_class[i].into(), s_valid[i].into()],
            });
        }
        let grouped = sort_records(circ, records, &net, true)?;
        let ga: Vec<Word> = grouped.iter().map(|r| r.key.slice(2 * w, w)).collect();
        let gb: Vec<Word> = grouped.iter().map(|r| r.key.slice(w, w)).collect();
        let gc: Vec<Bit> = grouped.iter().map(|r| r.payload[0].bit(0)).collect();
        let gv: Vec<Bit> = grouped.iter().map(|r| r.payload[1].bit(0)).collect();
        let b = consistency_bit(circ, &ga, &gb, &gc, &gv)?;

        let updated = f_aligned
            .iter()
            .map(|&f| circ.and(f, b))
            .collect::<Result<Vec<_>, _>>()?;
        carried = Some(updated);
        keep[t] = Some(b);
    }

    let labels = LabelState {
        prefix,
        post,
        map,
        map_inv,
    };
    Ok((
        SelectionMaskCipher {
            bits: keep
                .into_iter()
                .map(|b| b.expect("every feature visited"))
                .collect(),
        },
        labels,
        probes,
    ))
}

pub fn select<E: Engine>(
    circ: &mut Circuit<E>,
    enc: &EncryptedDatasetState,
    algorithm: Algorithm,
) -> Result<SelectionMaskCipher, PcwcError> {
    match algorithm {
        Algorithm::Naive => naive_select(circ, enc),
        Algorithm::Improved => improved_select(circ, enc),
    }
}

/// Result of an end-to-end run on the simulation engine.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub mask: Vec<bool>,
    /// Gates issued by the selection itself (encryption is not counted).
    pub counts: GateCounts,
    pub digest: Option<String>,
    pub elapsed: Duration,
}

/// Encrypts `ds` on a fresh simulation circuit, runs `algorithm` and
/// decrypts the mask.
pub fn run_sim(
    ds: &Dataset,
    algorithm: Algorithm,
    level: TraceLevel,
    gate_limit: Option<u64>,
) -> Result<SimRun, PcwcError> {
    let mut circ = Circuit::with_trace(SimEngine::owner(), level);
    let enc = EncryptedDatasetState::encrypt(&mut circ, ds)?;
    circ.set_gate_limit(gate_limit);
    let start = Instant::now();
    let mask = select(&mut circ, &enc, algorithm)?;
    let elapsed = start.elapsed();
    let counts = circ.counts();
    let digest = circ.transcript().digest();
    Ok(SimRun {
        mask: mask.decrypt(&mut circ)?,
        counts,
        digest,
        elapsed,
    })
}
