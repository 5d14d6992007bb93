//! Baire-space names: lazy memoized symbol streams and the codings that
//! flatten words, finite sets, and tuples of streams into them.
//!
//! A name is an infinite sequence of naturals demanded one position at a
//! time.  All structure placed on top of names (tupling, padded
//! enumerations, word codes) is deterministic, so two evaluations of the
//! same name agree wherever both succeed.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num::bigint::BigUint;
use num::Zero;

use crate::fuel::{Fuel, RunError, RunResult};

// ---------------------------------------------------------------------------
// Pairing.

/// Cantor pairing `pair(i, j) = (i+j)(i+j+1)/2 + j`.
///
/// Enumerates the diagonals: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
/// Panics if the result does not fit in a `u64`; stream positions and small
/// codes stay far below that, large codes go through [`pair_big`].
pub fn pair(i: u64, j: u64) -> u64 {
    let s = i as u128 + j as u128;
    let v = s * (s + 1) / 2 + j as u128;
    u64::try_from(v).expect("pairing overflow: use pair_big for symbol-sized codes")
}

/// Inverse of [`pair`].
pub fn unpair(n: u64) -> (u64, u64) {
    let m = n as u128;
    let s = ((8 * m + 1).isqrt() - 1) / 2;
    let j = m - s * (s + 1) / 2;
    ((s - j) as u64, j as u64)
}

/// Cantor pairing on arbitrary-size naturals.
pub fn pair_big(i: &BigUint, j: &BigUint) -> BigUint {
    let s = i + j;
    (&s * (&s + 1u32)) / 2u32 + j
}

/// Inverse of [`pair_big`].
pub fn unpair_big(n: &BigUint) -> (BigUint, BigUint) {
    let s = ((n * 8u32 + 1u32).sqrt() - 1u32) / 2u32;
    let j = n - (&s * (&s + 1u32)) / 2u32;
    (&s - &j, j)
}

// ---------------------------------------------------------------------------
// Word codes.
//
// Words (finite sequences of naturals) are flattened to a single natural by
// a length prefix and a balanced tree of pairings.  The balanced shape keeps
// the code linear in the total bit size of the word; a right fold would be
// exponential in its length.  The map is a bijection between words and
// naturals, with the empty word at 0.

/// Code of the empty word.
pub fn empty_word_code() -> BigUint {
    BigUint::zero()
}

fn tree_encode(w: &[BigUint]) -> BigUint {
    if w.len() == 1 {
        w[0].clone()
    } else {
        let mid = w.len().div_ceil(2);
        pair_big(&tree_encode(&w[..mid]), &tree_encode(&w[mid..]))
    }
}

fn tree_decode(c: &BigUint, len: usize, out: &mut Vec<BigUint>) {
    if len == 1 {
        out.push(c.clone());
    } else {
        let mid = len.div_ceil(2);
        let (l, r) = unpair_big(c);
        tree_decode(&l, mid, out);
        tree_decode(&r, len - mid, out);
    }
}

/// Flatten a word to its code.
pub fn encode_word(w: &[BigUint]) -> BigUint {
    if w.is_empty() {
        BigUint::zero()
    } else {
        pair_big(&BigUint::from(w.len() - 1), &tree_encode(w)) + 1u32
    }
}

/// Recover the word behind a code.
pub fn decode_word(code: &BigUint) -> Vec<BigUint> {
    if code.is_zero() {
        return Vec::new();
    }
    let (len1, tree) = unpair_big(&(code - 1u32));
    let len = usize::try_from(u64::try_from(&len1).expect("word length overflow")).unwrap() + 1;
    let mut out = Vec::with_capacity(len);
    tree_decode(&tree, len, &mut out);
    out
}

/// Convenience: encode a word of small entries.
pub fn encode_word_u64(w: &[u64]) -> BigUint {
    let big: Vec<BigUint> = w.iter().map(|&x| BigUint::from(x)).collect();
    encode_word(&big)
}

/// Convenience: decode a word whose entries are known to be small.
pub fn decode_word_u64(code: &BigUint) -> Vec<u64> {
    decode_word(code)
        .iter()
        .map(|x| u64::try_from(x).expect("word entry overflow"))
        .collect()
}

// ---------------------------------------------------------------------------
// Finite-set codes.
//
// A finite set of naturals is coded by the natural whose binary expansion
// has a 1 exactly at the members; decoding reads the bit positions.

/// Members of the finite set behind `code`, in increasing order.
pub fn finite_set_members(code: &BigUint) -> Vec<u64> {
    let mut out = Vec::new();
    for i in 0..code.bits() {
        if code.bit(i) {
            out.push(i);
        }
    }
    out
}

/// Code of the finite set with the given members.
pub fn finite_set_code(members: &[u64]) -> BigUint {
    let mut code = BigUint::zero();
    for &m in members {
        code.set_bit(m, true);
    }
    code
}

// ---------------------------------------------------------------------------
// Names.

type GenFn = dyn Fn(u64, &mut Fuel) -> RunResult<BigUint> + Send + Sync;

/// A lazy, memoized infinite sequence of naturals.
///
/// Symbols are produced on demand by a deterministic generator and cached;
/// concurrent demands of the same position return the same symbol.  The
/// generator is charged against the `Fuel` of the demand that reaches it, so
/// repeated reads of an already-computed prefix cost one step per symbol.
#[derive(Clone)]
pub struct Name {
    inner: Arc<Inner>,
}

struct Inner {
    gen: Box<GenFn>,
    cache: Mutex<HashMap<u64, BigUint>>,
}

impl std::fmt::Debug for Name {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let cached = self.inner.cache.lock().unwrap().len();
        write!(f, "Name({cached} symbols cached)")
    }
}

impl Name {
    pub fn from_fn(
        gen: impl Fn(u64, &mut Fuel) -> RunResult<BigUint> + Send + Sync + 'static,
    ) -> Name {
        Name {
            inner: Arc::new(Inner {
                gen: Box::new(gen),
                cache: Mutex::new(HashMap::new()),
            }),
        }
    }

    /// The constant stream `v v v ...`.
    pub fn constant(v: u64) -> Name {
        Name::from_fn(move |_, _| Ok(BigUint::from(v)))
    }

    /// The stream `w · 0^ω`.
    pub fn from_prefix(prefix: Vec<BigUint>) -> Name {
        Name::from_fn(move |i, _| {
            Ok(prefix
                .get(usize::try_from(i).unwrap_or(usize::MAX))
                .cloned()
                .unwrap_or_else(BigUint::zero))
        })
    }

    pub fn from_prefix_u64(prefix: &[u64]) -> Name {
        Name::from_prefix(prefix.iter().map(|&x| BigUint::from(x)).collect())
    }

    /// Demand the symbol at position `i`.
    pub fn at(&self, i: u64, fuel: &mut Fuel) -> RunResult<BigUint> {
        fuel.tick()?;
        if let Some(v) = self.inner.cache.lock().unwrap().get(&i) {
            return Ok(v.clone());
        }
        // Compute outside the lock: generators may demand this same name at
        // other positions.  First insert wins; generators are deterministic,
        // so a racing insert carries the same value.
        let v = (self.inner.gen)(i, fuel)?;
        let mut cache = self.inner.cache.lock().unwrap();
        let entry = cache.entry(i).or_insert(v);
        Ok(entry.clone())
    }

    /// Demand a symbol expected to be small.
    pub fn at_u64(&self, i: u64, fuel: &mut Fuel) -> RunResult<u64> {
        let v = self.at(i, fuel)?;
        u64::try_from(&v).map_err(|_| {
            RunError::Violation(format!("symbol at position {i} does not fit in u64"))
        })
    }

    /// Demand positions `0..len` in order.
    pub fn prefix(&self, len: u64, fuel: &mut Fuel) -> RunResult<Vec<BigUint>> {
        (0..len).map(|i| self.at(i, fuel)).collect()
    }

    // -- Tupling ------------------------------------------------------------

    /// Binary tupling: `⟨p, q⟩(2i + z)` is `p_i` for `z = 0`, `q_i` for `z = 1`.
    pub fn tuple2(p: &Name, q: &Name) -> Name {
        let (p, q) = (p.clone(), q.clone());
        Name::from_fn(move |n, fuel| {
            let (i, z) = (n / 2, n % 2);
            if z == 0 {
                p.at(i, fuel)
            } else {
                q.at(i, fuel)
            }
        })
    }

    /// Left component of a binary tuple.
    pub fn project2(&self, z: u64) -> Name {
        assert!(z < 2);
        let p = self.clone();
        Name::from_fn(move |i, fuel| p.at(2 * i + z, fuel))
    }

    /// Countable tupling: `⟨p⁰, p¹, ...⟩(pair(i, j))` is `pⁱ_j`.
    ///
    /// The family generator is consulted at most once per component.
    pub fn tuple_countable(family: impl Fn(u64) -> Name + Send + Sync + 'static) -> Name {
        let components: Mutex<HashMap<u64, Name>> = Mutex::new(HashMap::new());
        Name::from_fn(move |n, fuel| {
            let (i, j) = unpair(n);
            let comp = components
                .lock()
                .unwrap()
                .entry(i)
                .or_insert_with(|| family(i))
                .clone();
            comp.at(j, fuel)
        })
    }

    /// Component `i` of a countable tuple.
    pub fn project_countable(&self, i: u64) -> Name {
        let p = self.clone();
        Name::from_fn(move |j, fuel| p.at(pair(i, j), fuel))
    }
}

// ---------------------------------------------------------------------------
// Padded enumerations.
//
// Open sets, covers and enumerated relations are all emitted through the
// same convention: symbol 0 is padding, symbol v+1 announces the value v.
// Emission order is fixed by the canonical dovetail schedule: in round t,
// jobs 0..=t each run one step (job j runs its (t−j)-th step), and the p-th
// step of the whole schedule owns stream position p.

/// A deterministic job family for a padded enumeration.
pub trait PaddedSource: Send + Sync {
    /// Run step `step` of job `job`; return the value it emits now, if any.
    ///
    /// Must be deterministic in `(job, step)`.
    fn emit_at(&self, job: u64, step: u64, fuel: &mut Fuel) -> RunResult<Option<BigUint>>;
}

/// The stream position owned by step `step` of job `job`.
pub fn dovetail_position(job: u64, step: u64) -> u64 {
    let t = job + step;
    t * (t + 1) / 2 + job
}

/// Inverse of [`dovetail_position`].
pub fn dovetail_job_step(pos: u64) -> (u64, u64) {
    let m = pos as u128;
    let t = ((8 * m + 1).isqrt() - 1) / 2;
    let job = m - t * (t + 1) / 2;
    (job as u64, (t - job) as u64)
}

/// Wrap a job family into a padded enumeration name.
pub fn padded_enumeration(source: Arc<dyn PaddedSource>) -> Name {
    Name::from_fn(move |pos, fuel| {
        let (job, step) = dovetail_job_step(pos);
        match source.emit_at(job, step, fuel)? {
            Some(v) => Ok(v + 1u32),
            None => Ok(BigUint::zero()),
        }
    })
}

/// Collect the announced values of a padded stream over positions `0..upto`.
pub fn padded_values(name: &Name, upto: u64, fuel: &mut Fuel) -> RunResult<Vec<BigUint>> {
    let mut out = Vec::new();
    for pos in 0..upto {
        let s = name.at(pos, fuel)?;
        if !s.is_zero() {
            out.push(s - 1u32);
        }
    }
    Ok(out)
}

/// A padded stream that announces a fixed list of values, one per job.
pub fn padded_from_list(values: Vec<BigUint>) -> Name {
    struct ListSource(Vec<BigUint>);
    impl PaddedSource for ListSource {
        fn emit_at(&self, job: u64, step: u64, _fuel: &mut Fuel) -> RunResult<Option<BigUint>> {
            if step == 0 {
                Ok(self.0.get(usize::try_from(job).unwrap_or(usize::MAX)).cloned())
            } else {
                Ok(None)
            }
        }
    }
    padded_enumeration(Arc::new(ListSource(values)))
}

// ---------------------------------------------------------------------------
// Finite sets against element listings.
//
// A finite subset of the naturals can be handed over either as its set code
// or as a terminated listing of its members: the listing name carries each
// member once as m+1 in increasing order, then the terminator 0.  The two
// directions below translate between the conventions.

/// From a finite-set code to the terminated member listing `w · 0^ω`.
pub fn fs_code_to_listing(code: &BigUint) -> Name {
    let listing: Vec<u64> = finite_set_members(code).iter().map(|&m| m + 1).collect();
    Name::from_prefix_u64(&listing)
}

/// Read a terminated member listing back into a finite-set code.
///
/// Scans until the terminator; every prior symbol m+1 contributes member m.
pub fn listing_to_fs_code(listing: &Name, fuel: &mut Fuel) -> RunResult<BigUint> {
    let mut code = BigUint::zero();
    for i in 0.. {
        let s = listing.at(i, fuel)?;
        if s.is_zero() {
            return Ok(code);
        }
        let m = u64::try_from(&(&s - 1u32))
            .map_err(|_| RunError::Violation("listed member does not fit in u64".into()))?;
        code.set_bit(m, true);
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn pairing_walks_the_diagonals() {
        let expected = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];
        for (n, &(i, j)) in expected.iter().enumerate() {
            assert_eq!(pair(i, j), n as u64);
            assert_eq!(unpair(n as u64), (i, j));
        }
    }

    #[test]
    fn pairing_round_trips() {
        for n in 0..5000u64 {
            let (i, j) = unpair(n);
            assert_eq!(pair(i, j), n);
        }
        for n in 0..2000u32 {
            let nb = BigUint::from(n) * 97u32 + 13u32;
            let (i, j) = unpair_big(&nb);
            assert_eq!(pair_big(&i, &j), nb);
        }
    }

    #[test]
    fn word_codes_round_trip() {
        // Exhaustive over short words with small entries, plus a few heavy ones.
        for len in 0..=4usize {
            let mut w = vec![0u64; len];
            loop {
                let word: Vec<BigUint> = w.iter().map(|&x| big(x)).collect();
                assert_eq!(decode_word(&encode_word(&word)), word);
                let mut k = 0;
                loop {
                    if k == len {
                        break;
                    }
                    if w[k] < 3 {
                        w[k] += 1;
                        break;
                    }
                    w[k] = 0;
                    k += 1;
                }
                if k == len {
                    break;
                }
            }
        }
        let heavy: Vec<BigUint> = (0..40u64).map(|i| big(i) * big(1_000_000_007)).collect();
        assert_eq!(decode_word(&encode_word(&heavy)), heavy);
        assert_eq!(decode_word_u64(&encode_word_u64(&[9, 9, 9, 9, 9, 9])), vec![9; 6]);
    }

    #[test]
    fn word_codes_are_a_bijection_near_zero() {
        for c in 0..200u64 {
            let code = big(c);
            assert_eq!(encode_word(&decode_word(&code)), code);
        }
    }

    #[test]
    fn finite_set_code_reads_binary_expansion() {
        assert_eq!(finite_set_members(&big(5)), vec![0, 2]);
        assert_eq!(finite_set_code(&[0, 2]), big(5));
        assert_eq!(finite_set_members(&big(0)), Vec::<u64>::new());
        for c in 0..300u64 {
            assert_eq!(finite_set_code(&finite_set_members(&big(c))), big(c));
        }
    }

    #[test]
    fn fs_translation_round_trips() {
        // Set {0, 2}: listing announces 1, 3, then terminates.
        let listing = fs_code_to_listing(&big(5));
        let mut fuel = Fuel::new(1000);
        assert_eq!(listing.prefix(4, &mut fuel).unwrap(),
                   vec![big(1), big(3), big(0), big(0)]);
        assert_eq!(listing_to_fs_code(&listing, &mut fuel).unwrap(), big(5));
        for code in [0u64, 1, 6, 37, 1024] {
            let name = fs_code_to_listing(&big(code));
            assert_eq!(listing_to_fs_code(&name, &mut fuel).unwrap(), big(code));
        }
    }

    #[test]
    fn names_memoize_and_stay_deterministic() {
        let costly = Name::from_fn(|i, fuel| {
            fuel.spend(50)?;
            Ok(big(i * i))
        });
        let mut small = Fuel::new(10);
        assert_eq!(costly.at(3, &mut small), Err(RunError::OutOfFuel));
        let mut ample = Fuel::new(1000);
        assert_eq!(costly.at(3, &mut ample).unwrap(), big(9));
        // Cached now: a once-too-small budget suffices.
        let mut tiny = Fuel::new(1);
        assert_eq!(costly.at(3, &mut tiny).unwrap(), big(9));
    }

    #[test]
    fn tupling_follows_the_position_conventions() {
        let p = Name::from_fn(|i, _| Ok(big(10 + i)));
        let q = Name::from_fn(|i, _| Ok(big(20 + i)));
        let t = Name::tuple2(&p, &q);
        let mut fuel = Fuel::new(10_000);
        for i in 0..5 {
            assert_eq!(t.at(2 * i, &mut fuel).unwrap(), big(10 + i));
            assert_eq!(t.at(2 * i + 1, &mut fuel).unwrap(), big(20 + i));
        }
        assert_eq!(t.project2(0).at(4, &mut fuel).unwrap(), big(14));
        assert_eq!(t.project2(1).at(4, &mut fuel).unwrap(), big(24));

        let fam = Name::tuple_countable(|i| Name::from_fn(move |j, _| Ok(big(100 * i + j))));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(fam.at(pair(i, j), &mut fuel).unwrap(), big(100 * i + j));
                assert_eq!(fam.project_countable(i).at(j, &mut fuel).unwrap(), big(100 * i + j));
            }
        }
    }

    #[test]
    fn padded_enumeration_announces_with_shift() {
        // Semidecide membership in {3}, landing immediately.
        struct Singleton;
        impl PaddedSource for Singleton {
            fn emit_at(&self, job: u64, step: u64, _: &mut Fuel) -> RunResult<Option<BigUint>> {
                Ok((job == 3 && step == 0).then(|| big(3)))
            }
        }
        let name = padded_enumeration(Arc::new(Singleton));
        let mut fuel = Fuel::new(10_000);
        let values = padded_values(&name, 64, &mut fuel).unwrap();
        assert_eq!(values, vec![big(3)]);
        // Job 3 runs its step 0 in round 3, at schedule position 9.
        assert_eq!(dovetail_position(3, 0), 9);
        assert_eq!(name.at(9, &mut fuel).unwrap(), big(4));
        assert_eq!(name.at(8, &mut fuel).unwrap(), big(0));
        for pos in 0..200 {
            let (j, s) = dovetail_job_step(pos);
            assert_eq!(dovetail_position(j, s), pos);
        }
    }
}
