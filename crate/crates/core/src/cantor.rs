//! Packed binary words and exact clopen-set algebra on Cantor space.
//!
//! Points are infinite binary sequences under the metric `d(x, y) = 2^{-μ}`
//! with `μ` the first differing index.  A finite word `w` doubles as the
//! cylinder `[w]` (all extensions of `w`) and as the ideal point `w·0^ω`.
//! Every clopen set is a finite union of cylinders; [`CylSet`] keeps such
//! unions in a canonical normal form so that equality, inclusion, distance
//! and diameter are all exact.

use num::bigint::BigUint;
use num::rational::BigRational;
use num::{One, Zero};

use crate::names::{decode_word_u64, encode_word_u64};

/// `2^{-k}` as an exact rational.
pub fn pow2_neg(k: u32) -> BigRational {
    BigRational::new(num::BigInt::one(), num::BigInt::from(1u8) << k)
}

/// `2^{k}` as an exact rational.
pub fn pow2(k: u32) -> BigRational {
    BigRational::from_integer(num::BigInt::from(1u8) << k)
}

/// A binary word of length at most 60, packed into a `u64`.
///
/// Bit `i` of `bits` holds symbol `i`; bits at and beyond `len` are zero.
/// Ordering is lexicographic on digits with prefixes first, so sorted word
/// lists read naturally and enumeration order is stable.
#[derive(Copy, Clone, PartialEq, Eq, Hash)]
pub struct CWord {
    len: u8,
    bits: u64,
}

impl Ord for CWord {
    fn cmp(&self, other: &CWord) -> std::cmp::Ordering {
        let n = self.len.min(other.len);
        for i in 0..n {
            match (self.bit(i) as u8).cmp(&(other.bit(i) as u8)) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.len.cmp(&other.len)
    }
}

impl PartialOrd for CWord {
    fn partial_cmp(&self, other: &CWord) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl CWord {
    pub const MAX_LEN: u8 = 60;

    pub fn root() -> CWord {
        CWord { len: 0, bits: 0 }
    }

    pub fn new(bits: u64, len: u8) -> CWord {
        assert!(len <= Self::MAX_LEN, "word too long");
        let mask = if len == 64 { !0 } else { (1u64 << len) - 1 };
        CWord { len, bits: bits & mask }
    }

    pub fn from_digits(digits: &[u8]) -> CWord {
        let mut w = CWord::root();
        for &d in digits {
            w = w.child(d != 0);
        }
        w
    }

    /// Parse `"0110"`; the empty cylinder spelling is `"e"`.
    pub fn parse(s: &str) -> Option<CWord> {
        if s == "e" {
            return Some(CWord::root());
        }
        let mut w = CWord::root();
        for c in s.chars() {
            match c {
                '0' => w = w.child(false),
                '1' => w = w.child(true),
                _ => return None,
            }
        }
        Some(w)
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Symbol at index `i`, reading the canonical zero extension past the end.
    pub fn bit(&self, i: u8) -> bool {
        i < self.len && (self.bits >> i) & 1 == 1
    }

    pub fn child(&self, b: bool) -> CWord {
        assert!(self.len < Self::MAX_LEN, "word too long");
        CWord {
            len: self.len + 1,
            bits: self.bits | ((b as u64) << self.len),
        }
    }

    pub fn truncated(&self, len: u8) -> CWord {
        assert!(len <= self.len);
        CWord::new(self.bits, len)
    }

    pub fn sibling(&self) -> CWord {
        assert!(self.len > 0);
        CWord {
            len: self.len,
            bits: self.bits ^ (1 << (self.len - 1)),
        }
    }

    /// Concatenation `self · other`.
    pub fn concat(&self, other: &CWord) -> CWord {
        assert!(self.len + other.len <= Self::MAX_LEN);
        CWord {
            len: self.len + other.len,
            bits: self.bits | (other.bits << self.len),
        }
    }

    /// Is `self` a prefix of `other` (as words)?
    pub fn is_prefix_of(&self, other: &CWord) -> bool {
        self.len <= other.len && other.bits & low_mask(self.len) == self.bits
    }

    /// First index where the points `self·0^ω` and `other·0^ω` differ.
    pub fn point_diff_index(&self, other: &CWord) -> Option<u8> {
        let diff = self.bits ^ other.bits;
        if diff == 0 {
            None
        } else {
            Some(diff.trailing_zeros() as u8)
        }
    }

    /// Exact distance between the points `self·0^ω` and `other·0^ω`.
    pub fn point_distance(&self, other: &CWord) -> BigRational {
        match self.point_diff_index(other) {
            None => BigRational::zero(),
            Some(i) => pow2_neg(i as u32),
        }
    }

    /// Does the point `self·0^ω` lie in the cylinder `[v]`?
    pub fn point_in_cylinder(&self, v: &CWord) -> bool {
        let ext = self.bits & low_mask(v.len);
        ext == v.bits
    }

    /// Strip trailing zeros: the canonical shortest word with the same point.
    pub fn point_normal(&self) -> CWord {
        let mut w = *self;
        while w.len > 0 && !w.bit(w.len - 1) {
            w.len -= 1;
        }
        w
    }

    /// The word-code of this word (entries are the binary digits).
    pub fn ideal_code(&self) -> BigUint {
        let digits: Vec<u64> = (0..self.len).map(|i| self.bit(i) as u64).collect();
        encode_word_u64(&digits)
    }

    /// Decode a word-code whose entries must all be binary.
    pub fn from_ideal_code(code: &BigUint) -> Option<CWord> {
        let digits = decode_word_u64(code);
        if digits.len() > Self::MAX_LEN as usize || digits.iter().any(|&d| d > 1) {
            return None;
        }
        let mut w = CWord::root();
        for d in digits {
            w = w.child(d == 1);
        }
        Some(w)
    }

    pub fn digits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.bit(i) as u8).collect()
    }

    /// All extensions of this word to length `len` (the word itself if
    /// longer), in lexicographic order.
    pub fn extensions(&self, len: u8) -> Vec<CWord> {
        if self.len >= len {
            return vec![*self];
        }
        let extra = len - self.len;
        let mut out: Vec<CWord> = (0..(1u64 << extra))
            .map(|tail| CWord {
                len,
                bits: self.bits | (tail << self.len),
            })
            .collect();
        out.sort();
        out
    }
}

fn low_mask(len: u8) -> u64 {
    if len >= 64 {
        !0
    } else {
        (1u64 << len) - 1
    }
}

impl std::fmt::Display for CWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.len == 0 {
            return write!(f, "e");
        }
        for i in 0..self.len {
            write!(f, "{}", self.bit(i) as u8)?;
        }
        Ok(())
    }
}

impl std::fmt::Debug for CWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Display::fmt(self, f)
    }
}

/// A clopen subset of Cantor space as a normalized finite union of cylinders.
///
/// Normal form: no listed cylinder contains another, and no two listed
/// cylinders are siblings.  This makes the representation unique per set, so
/// `==` is set equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CylSet {
    /// Sorted, normalized.
    cyls: Vec<CWord>,
}

impl CylSet {
    pub fn empty() -> CylSet {
        CylSet { cyls: Vec::new() }
    }

    pub fn full() -> CylSet {
        CylSet { cyls: vec![CWord::root()] }
    }

    pub fn cylinder(w: CWord) -> CylSet {
        CylSet { cyls: vec![w] }
    }

    pub fn from_cylinders(cyls: impl IntoIterator<Item = CWord>) -> CylSet {
        let mut v: Vec<CWord> = cyls.into_iter().collect();
        normalize(&mut v);
        CylSet { cyls: v }
    }

    pub fn cylinders(&self) -> &[CWord] {
        &self.cyls
    }

    pub fn is_empty(&self) -> bool {
        self.cyls.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.cyls.len() == 1 && self.cyls[0].len() == 0
    }

    pub fn contains_point(&self, p: &CWord) -> bool {
        self.cyls.iter().any(|c| p.point_in_cylinder(c))
    }

    pub fn contains_cylinder(&self, w: &CWord) -> bool {
        // [w] ⊆ self iff some listed cylinder is a prefix of w, or recursively
        // both children are covered.  Depth is bounded by the deepest cylinder.
        if self.cyls.iter().any(|c| prefix_of(c, w)) {
            return true;
        }
        let max = self.cyls.iter().map(|c| c.len()).max().unwrap_or(0);
        if w.len() >= max {
            return false;
        }
        self.contains_cylinder(&w.child(false)) && self.contains_cylinder(&w.child(true))
    }

    pub fn contains_set(&self, other: &CylSet) -> bool {
        other.cyls.iter().all(|c| self.contains_cylinder(c))
    }

    pub fn union(&self, other: &CylSet) -> CylSet {
        CylSet::from_cylinders(self.cyls.iter().chain(other.cyls.iter()).copied())
    }

    pub fn intersect(&self, other: &CylSet) -> CylSet {
        let mut out = Vec::new();
        for a in &self.cyls {
            for b in &other.cyls {
                if prefix_of(a, b) {
                    out.push(*b);
                } else if prefix_of(b, a) {
                    out.push(*a);
                }
            }
        }
        CylSet::from_cylinders(out)
    }

    pub fn complement(&self) -> CylSet {
        let mut out = CylSet::full();
        for c in &self.cyls {
            out = out.intersect(&cylinder_complement(c));
        }
        out
    }

    pub fn difference(&self, other: &CylSet) -> CylSet {
        self.intersect(&other.complement())
    }

    pub fn subset_of(&self, other: &CylSet) -> bool {
        self.cyls.iter().all(|c| other.contains_cylinder(c))
    }

    pub fn disjoint_from(&self, other: &CylSet) -> bool {
        self.intersect(other).is_empty()
    }

    /// Exact diameter: `2^{-t}` with `t` the longest prefix shared by the
    /// whole set, `0` for the empty set.
    pub fn diameter(&self) -> BigRational {
        match self.cyls.len() {
            0 => BigRational::zero(),
            1 => pow2_neg(self.cyls[0].len() as u32),
            _ => {
                let mut t = self.cyls[0];
                for c in &self.cyls[1..] {
                    let d = t
                        .point_diff_index(c)
                        .map(|i| i.min(c.len()).min(t.len()))
                        .unwrap_or_else(|| t.len().min(c.len()));
                    t = t.truncated(d.min(t.len()));
                }
                // All cylinders share the prefix t; two of them split right
                // after it (normal form forbids a common longer prefix).
                pow2_neg(t.len() as u32)
            }
        }
    }

    /// Exact distance from the point `p·0^ω` to the set (`+∞` never arises:
    /// returns `None` for the empty set).
    pub fn point_distance(&self, p: &CWord) -> Option<BigRational> {
        self.cyls
            .iter()
            .map(|c| cylinder_point_distance(c, p))
            .min()
    }

    /// Exact distance between two nonempty sets; `None` if either is empty.
    pub fn distance(&self, other: &CylSet) -> Option<BigRational> {
        if self.is_empty() || other.is_empty() {
            return None;
        }
        let mut best: Option<BigRational> = None;
        for a in &self.cyls {
            for b in &other.cyls {
                let d = cylinder_distance(a, b);
                best = Some(match best {
                    None => d,
                    Some(cur) => cur.min(d),
                });
            }
        }
        best
    }

    /// All length-`len` words whose cylinders meet the set.
    pub fn words_meeting(&self, len: u8) -> Vec<CWord> {
        let mut out = Vec::new();
        for w in CWord::root().extensions(len) {
            if self.cyls.iter().any(|c| prefix_of(c, &w) || prefix_of(&w, c)) {
                out.push(w);
            }
        }
        out
    }

    /// All length-`len` words whose cylinders lie inside the set.
    pub fn words_inside(&self, len: u8) -> Vec<CWord> {
        CWord::root()
            .extensions(len)
            .into_iter()
            .filter(|w| self.contains_cylinder(w))
            .collect()
    }

    /// Canonical finite net: one point per cylinder extension at `depth`.
    ///
    /// Every point of the set agrees with some net point to depth `depth`,
    /// and net points lie in the set, so the Hausdorff distance to the set
    /// is at most `2^{-depth}`.
    pub fn point_net(&self, depth: u8) -> Vec<CWord> {
        let mut pts: Vec<CWord> = self
            .cyls
            .iter()
            .flat_map(|c| c.extensions(depth.max(c.len())))
            .collect();
        pts.sort();
        pts.dedup();
        pts
    }
}

impl std::fmt::Debug for CylSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_empty() {
            return write!(f, "{{}}");
        }
        let parts: Vec<String> = self.cyls.iter().map(|c| format!("[{c}]")).collect();
        write!(f, "{}", parts.join("|"))
    }
}

fn prefix_of(a: &CWord, b: &CWord) -> bool {
    a.len() <= b.len() && b.bits & low_mask(a.len) == a.bits
}

fn cylinder_complement(w: &CWord) -> CylSet {
    // Union of the sibling branches along the path to w.
    let mut out = Vec::new();
    for i in 1..=w.len() {
        out.push(w.truncated(i).sibling());
    }
    CylSet::from_cylinders(out)
}

fn cylinder_point_distance(c: &CWord, p: &CWord) -> BigRational {
    if p.point_in_cylinder(c) {
        return BigRational::zero();
    }
    // First index below |c| where c disagrees with the zero extension of p.
    for i in 0..c.len() {
        if c.bit(i) != p.bit(i) {
            return pow2_neg(i as u32);
        }
    }
    unreachable!("point either lies in the cylinder or disagrees below its length")
}

fn cylinder_distance(a: &CWord, b: &CWord) -> BigRational {
    if prefix_of(a, b) || prefix_of(b, a) {
        return BigRational::zero();
    }
    let i = (a.bits ^ b.bits).trailing_zeros() as u8;
    debug_assert!(i < a.len().min(b.len()));
    pow2_neg(i as u32)
}

fn normalize(cyls: &mut Vec<CWord>) {
    use std::collections::HashSet;
    let mut set: HashSet<CWord> = cyls.drain(..).collect();
    // Drop cylinders dominated by a listed prefix.
    let dominated: Vec<CWord> = set
        .iter()
        .filter(|w| (0..w.len()).any(|l| set.contains(&w.truncated(l))))
        .copied()
        .collect();
    for w in dominated {
        set.remove(&w);
    }
    // Merge sibling pairs to their parent until stable (a merge may create a
    // new pair or a new domination, so loop).
    loop {
        let mut merged = None;
        for w in set.iter() {
            if w.len() > 0 {
                let sib = w.sibling();
                if *w < sib && set.contains(&sib) {
                    merged = Some(*w);
                    break;
                }
            }
        }
        match merged {
            None => break,
            Some(w) => {
                set.remove(&w);
                set.remove(&w.sibling());
                let parent = w.truncated(w.len() - 1);
                if !(0..parent.len()).any(|l| set.contains(&parent.truncated(l))) {
                    let dominated: Vec<CWord> = set
                        .iter()
                        .filter(|v| prefix_of(&parent, v))
                        .copied()
                        .collect();
                    for v in dominated {
                        set.remove(&v);
                    }
                    set.insert(parent);
                }
            }
        }
    }
    cyls.extend(set);
    cyls.sort();
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs(parts: &[&str]) -> CylSet {
        CylSet::from_cylinders(parts.iter().map(|p| CWord::parse(p).unwrap()))
    }

    #[test]
    fn sibling_cylinders_merge_to_parent() {
        assert_eq!(cs(&["00", "01"]), cs(&["0"]));
        assert_eq!(cs(&["0", "1"]), CylSet::full());
        assert_eq!(cs(&["00", "01", "10", "11"]), CylSet::full());
        assert_eq!(cs(&["0", "01"]), cs(&["0"]));
        // Cascade: merging creates a new sibling pair.
        assert_eq!(cs(&["00", "010", "011", "1"]), CylSet::full());
    }

    #[test]
    fn complement_and_intersection_are_exact() {
        let a = cs(&["0"]);
        assert_eq!(a.complement(), cs(&["1"]));
        let b = cs(&["110"]);
        assert_eq!(b.complement(), cs(&["0", "10", "111"]));
        assert_eq!(a.intersect(&b), CylSet::empty());
        assert_eq!(a.union(&a.complement()), CylSet::full());
        let u = cs(&["01", "10"]);
        assert_eq!(u.intersect(&cs(&["0"])), cs(&["01"]));
        assert!(u.subset_of(&CylSet::full()));
        assert!(!CylSet::full().subset_of(&u));
        // Inclusion that needs a split: [e] ⊆ [0] ∪ [1].
        assert!(CylSet::full().subset_of(&cs(&["0", "1"])));
    }

    #[test]
    fn metric_quantities_match_hand_computation() {
        let zero = CWord::parse("").unwrap_or(CWord::root());
        let p011 = CWord::parse("011").unwrap();
        assert_eq!(CWord::root().point_distance(&p011), pow2_neg(1));
        assert_eq!(p011.point_distance(&p011), BigRational::zero());

        assert_eq!(cs(&["1"]).point_distance(&zero).unwrap(), BigRational::one());
        assert_eq!(cs(&["01"]).point_distance(&zero).unwrap(), pow2_neg(1));
        assert_eq!(cs(&["0"]).point_distance(&zero).unwrap(), BigRational::zero());

        assert_eq!(cs(&["0"]).diameter(), pow2_neg(1));
        assert_eq!(CylSet::full().diameter(), BigRational::one());
        assert_eq!(cs(&["01", "10"]).diameter(), BigRational::one());
        assert_eq!(cs(&["000", "001"]).diameter(), pow2_neg(2));

        assert_eq!(cs(&["00"]).distance(&cs(&["1"])).unwrap(), BigRational::one());
        assert_eq!(cs(&["010"]).distance(&cs(&["011"])).unwrap(), pow2_neg(2));
        assert_eq!(cs(&["0"]).distance(&cs(&["01"])).unwrap(), BigRational::zero());
    }

    #[test]
    fn nets_and_resolution_views_agree() {
        let u = cs(&["01", "10"]);
        let words = u.words_inside(2);
        assert_eq!(words, vec![CWord::parse("01").unwrap(), CWord::parse("10").unwrap()]);
        assert_eq!(u.words_meeting(1).len(), 2);
        let net = u.point_net(3);
        assert_eq!(net.len(), 4);
        assert!(net.iter().all(|p| u.contains_point(p)));

        let singleton_like = cs(&["110"]);
        assert_eq!(singleton_like.point_net(2), vec![CWord::parse("110").unwrap()]);
    }

    #[test]
    fn ideal_codes_round_trip() {
        for s in ["", "0", "1", "0110", "111000111"] {
            let w = CWord::parse(s).unwrap_or(CWord::root());
            assert_eq!(CWord::from_ideal_code(&w.ideal_code()), Some(w));
        }
        // Entries outside the binary alphabet are rejected.
        let bad = encode_word_u64(&[0, 2]);
        assert_eq!(CWord::from_ideal_code(&bad), None);
    }
}
