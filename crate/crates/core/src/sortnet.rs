//! Batcher odd-even mergesort networks and their oblivious execution over
//! encrypted records.

use thiserror::Error;

use crate::dataset::suffix_bits;
use crate::obool::{Circuit, CircuitError, Engine, Word};

#[derive(Debug, Error)]
pub enum SortError {
    #[error("sorting network size must be a power of two, got {0}")]
    NotPowerOfTwo(usize),
    #[error("network sorts {network} elements but {records} records were given")]
    SizeMismatch { network: usize, records: usize },
    #[error("record {index} does not match the layout of record 0")]
    Layout { index: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Fixed comparator network for `size` elements.
///
/// `comparators` is the execution order; `layers` groups comparator indices
/// whose wires are disjoint (earliest-possible scheduling).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortingNetwork {
    size: usize,
    comparators: Vec<(usize, usize)>,
    layers: Vec<Vec<usize>>,
}

impl SortingNetwork {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn comparators(&self) -> &[(usize, usize)] {
        &self.comparators
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    /// Runs the network on plaintext values (ascending).
    pub fn sort_plain<T: Ord>(&self, values: &mut [T]) {
        assert_eq!(values.len(), self.size);
        for &(i, j) in &self.comparators {
            if values[i] > values[j] {
                values.swap(i, j);
            }
        }
    }
}

pub fn generate_network(m: usize) -> Result<SortingNetwork, SortError> {
    if !m.is_power_of_two() {
        return Err(SortError::NotPowerOfTwo(m));
    }
    let mut comparators = Vec::new();
    sort_range(0, m, &mut comparators);

    let mut depth = vec![0usize; m];
    let mut layers: Vec<Vec<usize>> = Vec::new();
    for (c, &(i, j)) in comparators.iter().enumerate() {
        let d = depth[i].max(depth[j]);
        if layers.len() <= d {
            layers.push(Vec::new());
        }
        layers[d].push(c);
        depth[i] = d + 1;
        depth[j] = d + 1;
    }
    Ok(SortingNetwork {
        size: m,
        comparators,
        layers,
    })
}

fn sort_range(lo: usize, n: usize, out: &mut Vec<(usize, usize)>) {
    if n > 1 {
        let half = n / 2;
        sort_range(lo, half, out);
        sort_range(lo + half, half, out);
        merge(lo, n, 1, out);
    }
}

// Merges the two sorted halves of [lo, lo+n) looking at elements `r` apart.
fn merge(lo: usize, n: usize, r: usize, out: &mut Vec<(usize, usize)>) {
    let step = r * 2;
    if step < n {
        merge(lo, n, step, out);
        merge(lo + r, n, step, out);
        let mut i = lo + r;
        while i + r < lo + n {
            out.push((i, i + r));
            i += step;
        }
    } else {
        out.push((lo, lo + r));
    }
}

/// One sortable record: an unsigned composite key and payload words that
/// travel with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub key: Word,
    pub payload: Vec<Word>,
}

/// Records sharing one key width and payload layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyedRecordSet {
    records: Vec<Record>,
}

impl KeyedRecordSet {
    pub fn new(records: Vec<Record>) -> Result<Self, SortError> {
        if let Some(first) = records.first() {
            let layout: Vec<usize> = first.payload.iter().map(Word::width).collect();
            for (index, r) in records.iter().enumerate() {
                let same = r.key.width() == first.key.width()
                    && r.payload.len() == layout.len()
                    && r.payload.iter().map(Word::width).eq(layout.iter().copied());
                if !same {
                    return Err(SortError::Layout { index });
                }
            }
        }
        Ok(KeyedRecordSet { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }

    pub fn key_width(&self) -> usize {
        self.records.first().map_or(0, |r| r.key.width())
    }

    pub fn payload_widths(&self) -> Vec<usize> {
        self.records
            .first()
            .map_or_else(Vec::new, |r| r.payload.iter().map(Word::width).collect())
    }
}

/// Widens every key by `⌈log₂ m⌉` low-order constant bits holding the
/// record's current position, making all composite keys distinct.
pub fn with_stability_suffix<E: Engine>(
    circ: &mut Circuit<E>,
    rs: KeyedRecordSet,
) -> Result<KeyedRecordSet, SortError> {
    let m = rs.len();
    let width = if m <= 1 {
        0
    } else {
        suffix_bits(m.next_power_of_two())
    };
    let mut records = rs.records;
    for (pos, r) in records.iter_mut().enumerate() {
        let suffix = circ.constant_word(pos as u64, width)?;
        r.key = Word::concat_msb_first([&r.key, &suffix]);
    }
    Ok(KeyedRecordSet { records })
}

/// Sorts records ascending by key. Each comparator is an encrypted `>` on the
/// keys followed by a conditional swap of key and payload.
pub fn oblivious_sort<E: Engine>(
    circ: &mut Circuit<E>,
    rs: &mut KeyedRecordSet,
    net: &SortingNetwork,
) -> Result<(), SortError> {
    if rs.len() != net.size() {
        return Err(SortError::SizeMismatch {
            network: net.size(),
            records: rs.len(),
        });
    }
    for &(i, j) in net.comparators() {
        let (left, right) = rs.records.split_at_mut(j);
        let (a, b) = (&mut left[i], &mut right[0]);
        let swap = circ.cmp_gt(&a.key, &b.key)?;
        circ.cswap(swap, &mut a.key, &mut b.key)?;
        for (pa, pb) in a.payload.iter_mut().zip(b.payload.iter_mut()) {
            circ.cswap(swap, pa, pb)?;
        }
    }
    Ok(())
}

/// Inverse of an encrypted permutation of `0..m`, computed by one oblivious
/// sort keyed by `perm` carrying the identity sequence as payload:
/// the result `r` satisfies `r[perm[i]] = i`.
///
/// The result is unspecified if `perm` does not decrypt to a permutation.
pub fn inverse_permutation<E: Engine>(
    circ: &mut Circuit<E>,
    perm: &[Word],
) -> Result<Vec<Word>, SortError> {
    let m = perm.len();
    let net = generate_network(m)?;
    let width = perm.first().map_or(0, Word::width);
    let mut records = Vec::with_capacity(m);
    for (i, p) in perm.iter().enumerate() {
        records.push(Record {
            key: p.clone(),
            payload: vec![circ.constant_word(i as u64, width)?],
        });
    }
    let mut rs = KeyedRecordSet::new(records)?;
    oblivious_sort(circ, &mut rs, &net)?;
    Ok(rs
        .into_records()
        .into_iter()
        .map(|mut r| r.payload.pop().expect("identity payload"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obool::{SimEngine, TraceLevel};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circuit() -> Circuit<SimEngine> {
        Circuit::with_trace(SimEngine::owner(), TraceLevel::Digest)
    }

    // Independent count from the odd-even merge recurrences.
    fn merge_count(m: usize) -> usize {
        if m == 2 {
            1
        } else {
            2 * merge_count(m / 2) + m / 2 - 1
        }
    }

    fn sort_count(m: usize) -> usize {
        match m {
            1 => 0,
            2 => 1,
            _ => 2 * sort_count(m / 2) + merge_count(m),
        }
    }

    fn records_from(
        c: &mut Circuit<SimEngine>,
        keys: &[u64],
        kw: usize,
        payload: &[u64],
        pw: usize,
    ) -> KeyedRecordSet {
        let records = keys
            .iter()
            .zip(payload)
            .map(|(&k, &p)| Record {
                key: c.encrypt_word(k, kw).unwrap(),
                payload: vec![c.encrypt_word(p, pw).unwrap()],
            })
            .collect();
        KeyedRecordSet::new(records).unwrap()
    }

    fn decrypt_all(c: &mut Circuit<SimEngine>, rs: &KeyedRecordSet) -> Vec<(u64, u64)> {
        rs.records()
            .iter()
            .map(|r| {
                (
                    c.decrypt_word(&r.key).unwrap(),
                    c.decrypt_word(&r.payload[0]).unwrap(),
                )
            })
            .collect()
    }

    #[test]
    fn small_networks() {
        assert_eq!(generate_network(1).unwrap().comparators(), &[]);
        assert_eq!(generate_network(2).unwrap().comparators(), &[(0, 1)]);
        assert_eq!(generate_network(4).unwrap().comparators().len(), 5);
        assert_eq!(generate_network(8).unwrap().comparators().len(), 19);
        assert!(matches!(
            generate_network(6),
            Err(SortError::NotPowerOfTwo(6))
        ));
        assert!(matches!(
            generate_network(0),
            Err(SortError::NotPowerOfTwo(0))
        ));
    }

    #[test]
    fn comparator_counts_follow_recurrence() {
        for t in 0..=10 {
            let m = 1 << t;
            assert_eq!(
                generate_network(m).unwrap().comparators().len(),
                sort_count(m)
            );
        }
    }

    #[test]
    fn zero_one_principle() {
        for m in [2usize, 4, 8, 16] {
            let net = generate_network(m).unwrap();
            for v in 0u32..(1 << m) {
                let mut bits: Vec<u8> = (0..m).map(|i| (v >> i & 1) as u8).collect();
                net.sort_plain(&mut bits);
                assert!(bits.windows(2).all(|w| w[0] <= w[1]), "m={m} v={v:b}");
            }
        }
    }

    #[test]
    fn layers_partition_comparators_with_disjoint_wires() {
        let net = generate_network(16).unwrap();
        let mut seen: Vec<usize> = net.layers().iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..net.comparators().len()).collect::<Vec<_>>());
        for layer in net.layers() {
            let mut wires: Vec<usize> = layer
                .iter()
                .flat_map(|&c| [net.comparators()[c].0, net.comparators()[c].1])
                .collect();
            let before = wires.len();
            wires.sort_unstable();
            wires.dedup();
            assert_eq!(wires.len(), before);
        }
        // Odd-even mergesort depth is t(t+1)/2 for m = 2^t.
        assert_eq!(net.layers().len(), 10);
    }

    #[test]
    fn sorts_encrypted_keys() {
        let mut c = circuit();
        let mut rs = records_from(&mut c, &[3, 1, 2, 0], 2, &[0, 0, 0, 0], 0);
        oblivious_sort(&mut c, &mut rs, &generate_network(4).unwrap()).unwrap();
        let keys: Vec<u64> = decrypt_all(&mut c, &rs)
            .into_iter()
            .map(|(k, _)| k)
            .collect();
        assert_eq!(keys, [0, 1, 2, 3]);
    }

    #[test]
    fn duplicate_keys_keep_payload_order_with_suffix() {
        let mut c = circuit();
        // payloads a, b, c, d = 0, 1, 2, 3
        let rs = records_from(&mut c, &[1, 1, 0, 0], 1, &[0, 1, 2, 3], 2);
        let mut rs = with_stability_suffix(&mut c, rs).unwrap();
        let keys: Vec<u64> = rs
            .records()
            .iter()
            .map(|r| c.decrypt_word(&r.key).unwrap())
            .collect();
        assert_eq!(keys, [0b1_00, 0b1_01, 0b0_10, 0b0_11]);
        oblivious_sort(&mut c, &mut rs, &generate_network(4).unwrap()).unwrap();
        let payload: Vec<u64> = decrypt_all(&mut c, &rs)
            .into_iter()
            .map(|(_, p)| p)
            .collect();
        assert_eq!(payload, [2, 3, 0, 1]);
    }

    #[test]
    fn suffix_on_single_record_is_empty() {
        let mut c = circuit();
        let rs = records_from(&mut c, &[1], 1, &[0], 1);
        let rs = with_stability_suffix(&mut c, rs).unwrap();
        assert_eq!(rs.key_width(), 1);
    }

    #[test]
    fn size_mismatch() {
        let mut c = circuit();
        let mut rs = records_from(&mut c, &[1, 0], 1, &[0, 0], 1);
        let net = generate_network(4).unwrap();
        assert!(matches!(
            oblivious_sort(&mut c, &mut rs, &net),
            Err(SortError::SizeMismatch {
                network: 4,
                records: 2
            })
        ));
    }

    #[test]
    fn layout_must_match() {
        let mut c = circuit();
        let a = Record {
            key: c.encrypt_word(0, 2).unwrap(),
            payload: vec![],
        };
        let b = Record {
            key: c.encrypt_word(0, 3).unwrap(),
            payload: vec![],
        };
        assert!(matches!(
            KeyedRecordSet::new(vec![a, b]),
            Err(SortError::Layout { index: 1 })
        ));
    }

    #[test]
    fn inverse_examples() {
        let mut c = circuit();
        for (perm, want) in [
            (vec![2u64, 0, 1, 3], vec![1u64, 2, 0, 3]),
            (vec![0, 1, 2, 3], vec![0, 1, 2, 3]),
        ] {
            let enc: Vec<Word> = perm
                .iter()
                .map(|&p| c.encrypt_word(p, 2).unwrap())
                .collect();
            let inv = inverse_permutation(&mut c, &enc).unwrap();
            let got: Vec<u64> = inv.iter().map(|w| c.decrypt_word(w).unwrap()).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn inverse_undoes_random_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut c = circuit();
        for _ in 0..10 {
            let mut perm: Vec<usize> = (0..8).collect();
            perm.shuffle(&mut rng);
            let data: Vec<u32> = (0..8).map(|_| rng.gen()).collect();
            // apply: out[perm[i]] = data[i]
            let mut applied = [0u32; 8];
            for i in 0..8 {
                applied[perm[i]] = data[i];
            }
            let enc: Vec<Word> = perm
                .iter()
                .map(|&p| c.encrypt_word(p as u64, 3).unwrap())
                .collect();
            let inv: Vec<usize> = inverse_permutation(&mut c, &enc)
                .unwrap()
                .iter()
                .map(|w| c.decrypt_word(w).unwrap() as usize)
                .collect();
            // applying the inverse restores the original order
            let mut restored = vec![0u32; 8];
            for j in 0..8 {
                restored[inv[j]] = applied[j];
            }
            assert_eq!(restored, data);
        }
    }

    #[test]
    fn gate_count_is_comparators_times_comparator_cost() {
        for (m, kw, pw) in [(4usize, 3usize, 2usize), (8, 5, 1), (16, 4, 6)] {
            let mut c = circuit();
            let keys = vec![0; m];
            let mut rs = records_from(&mut c, &keys, kw, &keys, pw);
            let net = generate_network(m).unwrap();
            let before = c.counts();
            oblivious_sort(&mut c, &mut rs, &net).unwrap();
            let got = c.counts() - before;
            let (k, p) = (kw as u64, pw as u64);
            // cmp_gt: 3k+2 XOR, k AND, k+1 NOT, 3 CONST; cswap: 3 XOR + 1 AND per bit
            let per = (3 * k + 2 + 3 * (k + p), k + (k + p), k + 1, 3);
            let cmp = net.comparators().len() as u64;
            assert_eq!(
                (got.xor, got.and, got.not, got.constant),
                (cmp * per.0, cmp * per.1, cmp * per.2, cmp * per.3)
            );
        }
    }

    #[test]
    fn digest_independent_of_keys() {
        let net = generate_network(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let digests: Vec<String> = (0..5)
            .map(|_| {
                let mut c = circuit();
                let keys: Vec<u64> = (0..8).map(|_| rng.gen_range(0..16)).collect();
                let mut rs = records_from(&mut c, &keys, 4, &keys, 4);
                oblivious_sort(&mut c, &mut rs, &net).unwrap();
                c.transcript().digest().unwrap()
            })
            .collect();
        assert!(digests.windows(2).all(|w| w[0] == w[1]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn sort_is_a_permutation_of_inputs(keys in proptest::collection::vec(0u64..32, 8)) {
            let mut c = circuit();
            let tags: Vec<u64> = (0..8).collect();
            let mut rs = records_from(&mut c, &keys, 5, &tags, 3);
            oblivious_sort(&mut c, &mut rs, &generate_network(8).unwrap()).unwrap();
            let out = decrypt_all(&mut c, &rs);
            prop_assert!(out.windows(2).all(|w| w[0].0 <= w[1].0));
            let mut got: Vec<(u64, u64)> = out.clone();
            got.sort_unstable();
            let mut want: Vec<(u64, u64)> = keys.iter().copied().zip(tags).collect();
            want.sort_unstable();
            prop_assert_eq!(got, want);
        }

        #[test]
        fn suffixed_sort_is_stable(keys in proptest::collection::vec(0u64..4, 16)) {
            let mut c = circuit();
            let tags: Vec<u64> = (0..16).collect();
            let rs = records_from(&mut c, &keys, 2, &tags, 4);
            let mut rs = with_stability_suffix(&mut c, rs).unwrap();
            oblivious_sort(&mut c, &mut rs, &generate_network(16).unwrap()).unwrap();
            let got: Vec<u64> = decrypt_all(&mut c, &rs).into_iter().map(|(_, t)| t).collect();
            let mut want: Vec<u64> = tags.clone();
            want.sort_by_key(|&t| keys[t as usize]);
            prop_assert_eq!(got, want);
        }
    }
}
