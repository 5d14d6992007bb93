//! Zero-dimensionality as an operator calculus: clopen separation of
//! disjoint closed sets, clopen neighborhood bases with refined inclusion,
//! disjoint refinement of covers, and bounded-order shrinking.
//!
//! Everything here is a realizer-to-realizer transformer.  The concrete
//! instances at the bottom (the separator-backed N, the canonical cylinder
//! basis) exist so the transformers have something to run on.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num::rational::BigRational;
use num::{BigUint, Zero};

use crate::cantor::{pow2_neg, CWord, CylSet};
use crate::covers::{strict_sublevel, strict_suplevel, urysohn, UrysohnFn};
use crate::fuel::{Fuel, RunResult};
use crate::hyper::{opens_union, ClopenName, ClosedName, OpenName};
use crate::names::{pair, unpair, Name};
use crate::space::{ball_member_probe, cantor_ball_word, CauchyName, IdealBall, SpaceDescriptor};

/// A clopen subset relative to an ambient set: two opens whose union
/// covers the ambient set and whose traces on it are disjoint.  When the
/// pair came from a separator the function rides along so claims about the
/// two sides can be certified on words.
#[derive(Clone)]
pub struct RelClopen {
    pub side: OpenName,
    pub coside: OpenName,
    pub via: Option<Arc<UrysohnFn>>,
}

/// Separation operator on closed arguments relative to an ambient set:
/// (A, B, Y) with disjoint closed A, B yields a relative clopen whose side
/// traps A ∩ Y and whose coside traps B ∩ Y.
pub type NOp = Arc<dyn Fn(&ClosedName, &ClosedName, &ClosedName) -> RelClopen + Send + Sync>;

/// Neighborhood operator: (x, U, Y) with x ∈ U yields a relative clopen
/// whose side contains x and sits inside U.
pub type MOp = Arc<dyn Fn(&CauchyName, &OpenName, &ClosedName) -> RelClopen + Send + Sync>;

/// Space-level variants with the ambient set fixed to the whole space.
pub type SpaceNOp = Arc<dyn Fn(&ClosedName, &ClosedName) -> RelClopen + Send + Sync>;
pub type SpaceMOp = Arc<dyn Fn(&CauchyName, &OpenName) -> RelClopen + Send + Sync>;

/// Disjoint-refinement operator: a finite open cover goes to a pairwise
/// disjoint open cover refining it member by member.
pub type PartitionOp = Arc<dyn Fn(&[OpenName]) -> Vec<OpenName> + Send + Sync>;

/// Partition operator relative to an ambient closed set; the construction
/// ignores the ambient argument and all claims hold on its trace.
pub type SOp = Arc<dyn Fn(&[OpenName], &ClosedName) -> Vec<OpenName> + Send + Sync>;

/// A countable family of relative clopens together with a refined
/// inclusion: incl(a, code) promises that the side of member a is
/// contained in the ideal ball with that code.
#[derive(Clone)]
pub struct BasisWithInclusion {
    pub space: SpaceDescriptor,
    pub member: Arc<dyn Fn(u64) -> RelClopen + Send + Sync>,
    pub incl: Arc<dyn Fn(u64, &BigUint) -> bool + Send + Sync>,
    /// Set when member m is exactly the m-th canonical cylinder with its
    /// exact complement; unlocks the eager partition path.
    pub canonical_cylinders: bool,
}

/// Arity bound for the order-controlled operators: families of order at
/// most n + 1 are the target.
#[derive(Clone, Copy, Debug)]
pub struct DimensionBudget {
    pub n: u64,
}

// ---------------------------------------------------------------------------
// Singleton complements.

const SINGLETON_PROBE_SLACK: u32 = 2;

/// The closed singleton of a point, named through its complement: a sweep
/// announces every canonical ball certified to miss the point.
pub fn singleton_closed(x: &CauchyName) -> ClosedName {
    let space = x.space().clone();
    let sp = space.clone();
    let xc = x.clone();
    let cache: Arc<Mutex<HashMap<(u64, u32), bool>>> = Arc::new(Mutex::new(HashMap::new()));
    let cert = move |c: u64, g: u32, fuel: &mut Fuel| -> RunResult<bool> {
        if let Some(v) = cache.lock().unwrap().get(&(c, g)) {
            return Ok(*v);
        }
        let out = match crate::hyper::sweep_candidate_ball(&sp, c) {
            None => false,
            Some(ball) => {
                matches!(ball_member_probe(&xc, &ball, g + SINGLETON_PROBE_SLACK, fuel)?, Some(false))
            }
        };
        cache.lock().unwrap().insert((c, g), out);
        Ok(out)
    };
    let announce_space = space.clone();
    let name = Name::from_fn(move |pos, fuel| {
        let (c, s) = unpair(pos);
        let g = u32::try_from(s).unwrap_or(u32::MAX).min(60);
        for gp in 0..g {
            if cert(c, gp, fuel)? {
                return Ok(BigUint::zero());
            }
        }
        if !cert(c, g, fuel)? {
            return Ok(BigUint::zero());
        }
        match crate::hyper::sweep_candidate_ball(&announce_space, c) {
            Some(ball) => Ok(ball.code() + 1u32),
            None => Ok(BigUint::zero()),
        }
    });
    ClosedName::complement_of(OpenName::from_name(space, name))
}

// ---------------------------------------------------------------------------
// The subset-operator conversions.

/// Neighborhoods from separation: the clopen neighborhood of x inside U is
/// the separation of the singleton from the complement of U.
pub fn n_to_m(n: NOp) -> MOp {
    Arc::new(move |x: &CauchyName, u: &OpenName, y: &ClosedName| {
        let a = singleton_closed(x);
        let b = ClosedName::complement_of(u.clone());
        n(&a, &b, y)
    })
}

/// The countable clopen basis induced by a neighborhood operator: member
/// ⟨i,j⟩ is the neighborhood of the i-th dense point inside the radius
/// 2^{-j} ball around it, and inclusion is the formal-ball test
/// d(p_i, center) + 2^{-j} < radius.
pub fn m_to_b(m: MOp, y: &ClosedName) -> BasisWithInclusion {
    let space = y.space().clone();
    let ambient = y.clone();
    let msp = space.clone();
    let cache: Arc<Mutex<HashMap<u64, RelClopen>>> = Arc::new(Mutex::new(HashMap::new()));
    let member = move |idx: u64| -> RelClopen {
        if let Some(v) = cache.lock().unwrap().get(&idx) {
            return v.clone();
        }
        let (i, j) = unpair(idx);
        let j = u32::try_from(j).unwrap_or(u32::MAX).min(1 << 20);
        let p = msp.ideal_point(i);
        let x = CauchyName::from_ideal(msp.clone(), &p);
        let ball = OpenName::from_balls(
            msp.clone(),
            vec![IdealBall::new(p, &pow2_neg(j))],
        );
        let out = m(&x, &ball, &ambient);
        cache.lock().unwrap().insert(idx, out.clone());
        out
    };
    let isp = space.clone();
    let incl = move |idx: u64, code: &BigUint| -> bool {
        let (i, j) = unpair(idx);
        let j = u32::try_from(j).unwrap_or(u32::MAX).min(1 << 20);
        let ball = IdealBall::from_code(code);
        if !isp.ideal_in_domain(&ball.center) {
            return false;
        }
        match isp.ideal_distance(&isp.ideal_point(i), &ball.center) {
            Ok(d) => d + pow2_neg(j) < ball.radius(),
            Err(_) => false,
        }
    };
    BasisWithInclusion {
        space,
        member: Arc::new(member),
        incl: Arc::new(incl),
        canonical_cylinders: false,
    }
}

// ---------------------------------------------------------------------------
// The disjoint-refinement construction.

/// One assignment of a basis member to the input set whose listed ball
/// formally includes it.
#[derive(Clone, Copy)]
struct Discovery {
    member: u64,
    target: usize,
}

/// Shared dovetail over (member, (target, ball position)) triples; first
/// witness wins, so the discovery order is canonical.
struct DiscoveryTable {
    basis: BasisWithInclusion,
    inputs: Vec<OpenName>,
    state: Mutex<DiscoveryState>,
}

struct DiscoveryState {
    next_pos: u64,
    found: Vec<Discovery>,
    assigned: HashMap<u64, usize>,
    contributions: HashMap<usize, OpenName>,
}

impl DiscoveryTable {
    fn new(basis: BasisWithInclusion, inputs: Vec<OpenName>) -> DiscoveryTable {
        DiscoveryTable {
            basis,
            inputs,
            state: Mutex::new(DiscoveryState {
                next_pos: 0,
                found: Vec::new(),
                assigned: HashMap::new(),
                contributions: HashMap::new(),
            }),
        }
    }

    /// Run the dovetail up to the given position count.
    fn ensure(&self, upto: u64, fuel: &mut Fuel) -> RunResult<()> {
        loop {
            let pos = {
                let st = self.state.lock().unwrap();
                if st.next_pos >= upto {
                    return Ok(());
                }
                st.next_pos
            };
            fuel.tick()?;
            let (m, rest) = unpair(pos);
            let (t, q) = unpair(rest);
            let mut hit = false;
            if (t as usize) < self.inputs.len()
                && !self.state.lock().unwrap().assigned.contains_key(&m)
            {
                if let Some(ball) = self.inputs[t as usize].ball_at(q, fuel)? {
                    hit = (self.basis.incl)(m, &ball.code());
                }
            }
            let mut st = self.state.lock().unwrap();
            if st.next_pos == pos {
                if hit && !st.assigned.contains_key(&m) {
                    st.assigned.insert(m, t as usize);
                    st.found.push(Discovery { member: m, target: t as usize });
                }
                st.next_pos = pos + 1;
            }
        }
    }

    /// The open contributed by the n-th discovery: its member's side cut
    /// down by every earlier coside.
    fn contribution(&self, n: usize) -> Option<(usize, OpenName)> {
        let st = self.state.lock().unwrap();
        let d = *st.found.get(n)?;
        if let Some(c) = st.contributions.get(&n) {
            return Some((d.target, c.clone()));
        }
        drop(st);
        let mut members = vec![(self.basis.member)(d.member).side];
        let st = self.state.lock().unwrap();
        let earlier: Vec<u64> = st.found[..n].iter().map(|e| e.member).collect();
        drop(st);
        for m in earlier {
            members.push((self.basis.member)(m).coside);
        }
        let open = crate::hyper::opens_intersection(&self.basis.space, members);
        let mut st = self.state.lock().unwrap();
        st.contributions.insert(n, open.clone());
        Some((d.target, open))
    }
}

fn discovery_horizon(pos: u64) -> u64 {
    (pos + 1).saturating_mul(pos + 1).min(1 << 20)
}

/// The disjoint refinement of a finite cover through a basis: basis
/// members are assigned to the first input whose listed ball formally
/// includes them, and each contribution subtracts everything discovered
/// before it, so the outputs are pairwise disjoint and keep the union.
fn kuratowski_partition(basis: &BasisWithInclusion, v: &[OpenName]) -> Vec<OpenName> {
    if v.is_empty() {
        return Vec::new();
    }
    let space = basis.space.clone();
    if basis.canonical_cylinders
        && space.is_cantor()
        && v.iter().all(|o| o.exact().is_some())
    {
        return exact_partition(v);
    }
    let table = Arc::new(DiscoveryTable::new(basis.clone(), v.to_vec()));
    (0..v.len())
        .map(|t| {
            let table = table.clone();
            let name = Name::from_fn(move |pos, fuel| {
                let (n, inner) = unpair(pos);
                table.ensure(discovery_horizon(pos), fuel)?;
                match table.contribution(n as usize) {
                    Some((target, open)) if target == t => open.name().at(inner, fuel),
                    _ => Ok(BigUint::zero()),
                }
            });
            OpenName::from_name(space.clone(), name)
        })
        .collect()
}

/// Exact route: with cylinder-exact inputs the discovery dovetail is run
/// until the discovered sides cover the space, and every output is a
/// finite cylinder set.
fn exact_partition(v: &[OpenName]) -> Vec<OpenName> {
    let sets: Vec<CylSet> = v.iter().map(|o| o.exact().unwrap().clone()).collect();
    let announced: Vec<Vec<CWord>> = sets.iter().map(|s| s.cylinders().to_vec()).collect();
    let mut outs = vec![CylSet::empty(); v.len()];
    let mut seen = CylSet::empty();
    let mut assigned: HashMap<u64, usize> = HashMap::new();
    // Safety cap well past the bound where every word at generator depth
    // has met its witness.
    let max_depth = announced
        .iter()
        .flatten()
        .map(|w| w.len())
        .max()
        .unwrap_or(0);
    let member_bound = 1u64 << (max_depth as u32 + 2).min(24);
    let ball_bound = announced.iter().map(|a| a.len() as u64).max().unwrap_or(0) + 1;
    let t_span = member_bound + pair(v.len() as u64, ball_bound) + 2;
    let cap = t_span.saturating_mul(t_span).saturating_mul(2);
    for pos in 0..cap {
        if seen.is_full() {
            break;
        }
        let (m, rest) = unpair(pos);
        let (t, q) = unpair(rest);
        if (t as usize) >= v.len() || assigned.contains_key(&m) {
            continue;
        }
        let Some(gen) = announced[t as usize].get(q as usize) else { continue };
        let Some(w) = canonical_word(m) else { continue };
        if !gen.is_prefix_of(&w) {
            continue;
        }
        assigned.insert(m, t as usize);
        let fresh = CylSet::cylinder(w).intersect(&seen.complement());
        outs[t as usize] = outs[t as usize].union(&fresh);
        seen = seen.union(&CylSet::cylinder(w));
    }
    outs.iter().map(OpenName::from_cylset).collect()
}

/// The m-th word of the canonical dense enumeration.
fn canonical_word(m: u64) -> Option<CWord> {
    let code = SpaceDescriptor::cantor().ideal_point(m);
    CWord::from_ideal_code(&code)
}

/// Partition operator from a basis, ambient-relative form.
pub fn b_to_s(basis: &BasisWithInclusion) -> SOp {
    let basis = basis.clone();
    Arc::new(move |v: &[OpenName], _y: &ClosedName| kuratowski_partition(&basis, v))
}

/// Disjoint shrinking-refinement of a finite open cover of the space.
pub fn partition_refine_countable(basis: &BasisWithInclusion, u: &[OpenName]) -> Vec<OpenName> {
    kuratowski_partition(basis, u)
}

// ---------------------------------------------------------------------------
// The stream rearrangement for disjoint covers.

/// Re-layout of an interleaved disjoint-cover name into clopen components:
/// output position ⟨i, 2⟨k,j⟩+z⟩ repeats input position ⟨i,j⟩ on the even
/// diagonal slots and input position ⟨k,j⟩, k ≠ i, on the odd off-slots,
/// which enumerates the complement of component i through the others.
pub fn r_realizer(p: &Name) -> Name {
    let p = p.clone();
    Name::from_fn(move |pos, fuel| {
        let (i, y) = unpair(pos);
        let z = y % 2;
        let (k, j) = unpair(y / 2);
        if z == 0 {
            if k == i {
                p.at(pair(i, j), fuel)
            } else {
                Ok(BigUint::zero())
            }
        } else if k != i {
            p.at(pair(k, j), fuel)
        } else {
            Ok(BigUint::zero())
        }
    })
}

/// Component i of the rearranged name as a clopen: the even slots list the
/// set itself, the odd slots list its complement.
pub fn r_component(space: &SpaceDescriptor, p: &Name, i: u64) -> ClopenName {
    let out = r_realizer(p);
    let even = {
        let out = out.clone();
        Name::from_fn(move |m, fuel| out.at(pair(i, 2 * m), fuel))
    };
    let odd = Name::from_fn(move |m, fuel| {
        out.at(pair(i, 2u64.saturating_mul(m).saturating_add(1)), fuel)
    });
    ClopenName::new(
        OpenName::from_name(space.clone(), even),
        ClosedName::complement_of(OpenName::from_name(space.clone(), odd)),
    )
}

// ---------------------------------------------------------------------------
// Space-level conversions.

/// Clopen separation from a partition operator: refine the two-element
/// cover by the complements; the member avoiding A plays the coside.
pub fn clopen_separate(c: PartitionOp) -> SpaceNOp {
    Arc::new(move |a: &ClosedName, b: &ClosedName| {
        let parts = c(&[a.complement_name().clone(), b.complement_name().clone()]);
        RelClopen { side: parts[1].clone(), coside: parts[0].clone(), via: None }
    })
}

/// Clopen neighborhoods from space-level separation.
pub fn clopen_neighborhood(n: SpaceNOp) -> SpaceMOp {
    Arc::new(move |x: &CauchyName, u: &OpenName| {
        let a = singleton_closed(x);
        let b = ClosedName::complement_of(u.clone());
        n(&a, &b)
    })
}

// ---------------------------------------------------------------------------
// Bounded-order shrinking.

/// Fixed-arity separation on a zero-dimensional space: disjoint
/// refinement makes every pairwise intersection empty, which is stronger
/// than the required empty total intersection at any arity.
pub fn fixed_arity_separate(u: &[OpenName]) -> Vec<OpenName> {
    partition_refine_countable(&cantor_canonical_basis(), u)
}

/// Dual of fixed-arity separation on closed families with empty total
/// intersection: complement, separate, complement back.
pub fn dual_d(b: &[ClosedName]) -> Vec<ClosedName> {
    let opens: Vec<OpenName> = b.iter().map(|c| c.complement_name().clone()).collect();
    fixed_arity_separate(&opens)
        .into_iter()
        .map(ClosedName::complement_of)
        .collect()
}

/// All size-`size` index subsets of 0..m in lexicographic order.
fn index_subsets(m: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, size, &mut Vec::new(), &mut out);
    out
}

/// Order reduction of an arbitrary finite cover through a fixed-arity
/// separator: one round per (N+1)-subset of indices, applying the
/// separator to those members plus the union of the rest, then cutting
/// the rest down by the last output.  After all rounds every (N+2)-fold
/// intersection is empty and each member still shrinks its original.
pub fn cstar_from_fixed(
    c: &dyn Fn(&[OpenName]) -> Vec<OpenName>,
    u: &[OpenName],
    budget: &DimensionBudget,
) -> Vec<OpenName> {
    let m = u.len();
    let arity = usize::try_from(budget.n).unwrap_or(usize::MAX).saturating_add(2);
    if m < arity {
        return u.to_vec();
    }
    if m == arity {
        return c(u);
    }
    let space = u[0].space().clone();
    let mut fam: Vec<OpenName> = u.to_vec();
    for subset in index_subsets(m, arity - 1) {
        let outside: Vec<usize> = (0..m).filter(|i| !subset.contains(i)).collect();
        let mut args: Vec<OpenName> = subset.iter().map(|&i| fam[i].clone()).collect();
        args.push(opens_union(
            &space,
            outside.iter().map(|&i| fam[i].clone()).collect(),
        ));
        let w = c(&args);
        for (slot, &i) in subset.iter().enumerate() {
            fam[i] = w[slot].clone();
        }
        let rest = w[arity - 1].clone();
        for &i in &outside {
            fam[i] = crate::hyper::opens_intersection(&space, vec![rest.clone(), fam[i].clone()]);
        }
    }
    fam
}

/// Open shrinking of bounded order for any finite cover.
pub fn order_shrink_open(u: &[OpenName], budget: &DimensionBudget) -> Vec<OpenName> {
    cstar_from_fixed(&fixed_arity_separate, u, budget)
}

/// Closed shrinking of bounded order, with the separators exposed.
pub struct OrderShrinkClosed {
    pub closeds: Vec<ClosedName>,
    pub functions: Vec<Arc<UrysohnFn>>,
}

pub fn order_shrink_closed(u: &[OpenName], budget: &DimensionBudget) -> OrderShrinkClosed {
    let open = order_shrink_open(u, budget);
    let shrunk = crate::covers::shrink_closed(&open);
    OrderShrinkClosed { closeds: shrunk.closeds, functions: shrunk.functions }
}

/// Merge a tagged family back onto the original index set: output i is the
/// union of the members tagged i.  Order is preserved since each output
/// point keeps a witness among its tags.
pub fn index_normalize(tagged: &[(OpenName, u64)], m: u64, space: &SpaceDescriptor) -> Vec<OpenName> {
    (0..m)
        .map(|i| {
            opens_union(
                space,
                tagged
                    .iter()
                    .filter(|(_, r)| *r == i)
                    .map(|(o, _)| o.clone())
                    .collect(),
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Concrete instances.

/// Separation through the separator function: side and coside are the
/// strict half-level sets, and the function rides along for certification.
pub fn urysohn_n_op() -> NOp {
    Arc::new(|a: &ClosedName, b: &ClosedName, _y: &ClosedName| {
        let f = urysohn(a, b);
        let h = BigRational::new(1.into(), 2.into());
        RelClopen {
            side: strict_sublevel(&f, &h),
            coside: strict_suplevel(&f, &h),
            via: Some(f),
        }
    })
}

/// The canonical cylinder basis: member m is the m-th word's cylinder with
/// its exact complement, and inclusion is exact containment in the decoded
/// ball.
pub fn cantor_canonical_basis() -> BasisWithInclusion {
    let space = SpaceDescriptor::cantor();
    let member = |m: u64| -> RelClopen {
        let set = match canonical_word(m) {
            Some(w) => CylSet::cylinder(w),
            None => CylSet::empty(),
        };
        RelClopen {
            side: OpenName::from_cylset(&set),
            coside: OpenName::from_cylset(&set.complement()),
            via: None,
        }
    };
    let incl = |m: u64, code: &BigUint| -> bool {
        let Some(w) = canonical_word(m) else { return false };
        let ball = IdealBall::from_code(code);
        match cantor_ball_word(&ball, false) {
            Ok(v) => v.is_prefix_of(&w),
            Err(_) => false,
        }
    };
    BasisWithInclusion {
        space,
        member: Arc::new(member),
        incl: Arc::new(incl),
        canonical_cylinders: true,
    }
}

/// The canonical partition operator for Cantor space.
pub fn cantor_partition_op() -> PartitionOp {
    let basis = cantor_canonical_basis();
    Arc::new(move |u: &[OpenName]| partition_refine_countable(&basis, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuel::Fuel;

    fn w(s: &str) -> CWord {
        CWord::parse(s).expect("test word")
    }

    fn cyl_open(words: &[&str]) -> OpenName {
        OpenName::from_cylset(&CylSet::from_cylinders(words.iter().map(|s| w(s))))
    }

    fn big_fuel() -> Fuel {
        Fuel::new(2_000_000_000)
    }

    fn half() -> BigRational {
        BigRational::new(1.into(), 2.into())
    }

    /// Collect an open's announced balls into a cylinder set.
    fn collect(o: &OpenName, upto: u64, fuel: &mut Fuel) -> CylSet {
        let mut acc = CylSet::empty();
        for b in o.balls_upto(upto, fuel).unwrap() {
            acc = acc.union(&CylSet::cylinder(cantor_ball_word(&b, false).unwrap()));
        }
        acc
    }

    #[test]
    fn singleton_complement_announces_only_avoiding_balls() {
        let mut fuel = big_fuel();
        let space = SpaceDescriptor::cantor();
        let x = CauchyName::from_ideal(space.clone(), &w("0").ideal_code());
        let s = singleton_closed(&x);
        let balls = s.complement_name().balls_upto(3000, &mut fuel).unwrap();
        assert!(!balls.is_empty());
        let mut seen = CylSet::empty();
        for b in &balls {
            let word = cantor_ball_word(b, false).unwrap();
            // The point is 0^ω, so a sound announcement carries a one bit.
            assert!(
                (0..word.len()).any(|i| word.bit(i)),
                "announced [{word}] contains the point"
            );
            seen = seen.union(&CylSet::cylinder(word));
        }
        // Far-away cylinders surface quickly.
        assert!(seen.contains_set(&CylSet::cylinder(w("1"))), "missing [1]");
        assert!(seen.contains_set(&CylSet::cylinder(w("01"))), "missing [01]");
    }

    #[test]
    fn neighborhood_from_separation_pins_the_point_inside() {
        let mut fuel = big_fuel();
        let space = SpaceDescriptor::cantor();
        let m = n_to_m(urysohn_n_op());
        let x = CauchyName::from_ideal(space.clone(), &w("e").ideal_code());
        let u = cyl_open(&["0"]);
        let full = ClosedName::from_cylset(&CylSet::full());
        let out = m(&x, &u, &full);
        let f = out.via.as_ref().expect("separator instance");
        // Every resolution-8 word certifies into exactly one side; words in
        // the complement of U land in the coside.
        for word in CWord::root().extensions(8) {
            let below = f.certify_below(&word, &half(), 0, 2048, &mut fuel).unwrap();
            let above = f.certify_above(&word, &half(), 0, 2048, &mut fuel).unwrap();
            assert!(below || above, "[{word}] stuck on the fence");
            assert!(!(below && above));
            if w("1").is_prefix_of(&word) {
                assert!(above, "[{word}] outside U must fall to the coside");
            }
            if word == w("00000000") {
                assert!(below, "the word at the point must fall to the side");
            }
        }
    }

    #[test]
    fn induced_basis_lists_included_pairs() {
        let mut fuel = big_fuel();
        let space = SpaceDescriptor::cantor();
        let full = ClosedName::from_cylset(&CylSet::full());
        let basis = m_to_b(n_to_m(urysohn_n_op()), &full);
        // incl agrees with the formal ball test and implies containment of
        // the emitted side at resolution 4.
        let idx = pair(0, 3);
        let target = IdealBall::new(space.ideal_point(0), &BigRational::new(1.into(), 4.into()));
        assert!((basis.incl)(idx, &target.code()));
        let member = (basis.member)(idx);
        let f = member.via.as_ref().unwrap();
        let host = cantor_ball_word(&target, false).unwrap();
        for word in CWord::root().extensions(4) {
            if f.certify_below(&word, &half(), 0, 1024, &mut fuel).unwrap() {
                assert!(
                    host.is_prefix_of(&word),
                    "side reaches [{word}] outside the including ball"
                );
            }
        }
        // A ball that does not formally include the member is rejected.
        let narrow = IdealBall::new(space.ideal_point(1), &BigRational::new(1.into(), 16.into()));
        assert!(!(basis.incl)(idx, &narrow.code()));
    }

    #[test]
    fn exact_partition_refines_disjointly_and_covers() {
        let basis = cantor_canonical_basis();
        let u = [cyl_open(&["0", "1"]), cyl_open(&["1"])];
        let parts = partition_refine_countable(&basis, &u);
        assert_eq!(parts.len(), 2);
        let s0 = parts[0].exact().unwrap();
        let s1 = parts[1].exact().unwrap();
        assert!(s0.intersect(s1).is_empty(), "partition overlaps");
        assert!(s0.union(s1).is_full(), "partition fails to cover");
        assert!(u[0].exact().unwrap().contains_set(s0));
        assert!(u[1].exact().unwrap().contains_set(s1));
    }

    #[test]
    fn exact_partition_of_random_style_cover_stays_exact() {
        let u = [
            cyl_open(&["00", "01"]),
            cyl_open(&["0", "10"]),
            cyl_open(&["1"]),
            cyl_open(&["11010"]),
        ];
        let parts = partition_refine_countable(&cantor_canonical_basis(), &u);
        let sets: Vec<&CylSet> = parts.iter().map(|p| p.exact().unwrap()).collect();
        let mut total = CylSet::empty();
        for (i, s) in sets.iter().enumerate() {
            assert!(u[i].exact().unwrap().contains_set(s), "member {i} escapes");
            for t in sets.iter().skip(i + 1) {
                assert!(s.intersect(t).is_empty(), "members overlap");
            }
            total = total.union(s);
        }
        assert!(total.is_full(), "cover lost");
    }

    #[test]
    fn lazy_partition_window_is_disjoint_and_grounded() {
        let mut fuel = big_fuel();
        // Strip exactness to force the dovetailed stream path.
        let u: Vec<OpenName> = [cyl_open(&["0", "1"]), cyl_open(&["1"])]
            .iter()
            .map(|o| OpenName::from_name(o.space().clone(), o.name().clone()))
            .collect();
        let parts = partition_refine_countable(&cantor_canonical_basis(), &u);
        let a = collect(&parts[0], 1500, &mut fuel);
        let b = collect(&parts[1], 1500, &mut fuel);
        assert!(a.intersect(&b).is_empty(), "streamed parts overlap");
        assert!(!a.is_empty(), "nothing surfaced for member 0");
        // Member 1 only keeps what member 0's discoveries left over.
        assert!(u[1].exact().is_none());
        assert!(CylSet::cylinder(w("1")).contains_set(&b));
    }

    #[test]
    fn rearranged_streams_follow_the_formula() {
        let mut fuel = big_fuel();
        // Input: component 0 lists [0], component 1 lists [1], rest empty.
        let v0 = cyl_open(&["0"]);
        let v1 = cyl_open(&["1"]);
        let n0 = v0.name().clone();
        let n1 = v1.name().clone();
        let p = Name::from_fn(move |pos, fuel| {
            let (i, j) = unpair(pos);
            match i {
                0 => n0.at(j, fuel),
                1 => n1.at(j, fuel),
                _ => Ok(BigUint::zero()),
            }
        });
        let out = r_realizer(&p);
        // The quoted slot identity: output ⟨1, 2⟨0,5⟩+1⟩ = input ⟨0,5⟩.
        let slot = pair(1, 2 * pair(0, 5) + 1);
        assert_eq!(
            out.at(slot, &mut fuel).unwrap(),
            p.at(pair(0, 5), &mut fuel).unwrap()
        );
        // Projection recovers the sigma streams verbatim.
        for i in 0..3u64 {
            for j in 0..40u64 {
                assert_eq!(
                    out.at(pair(i, 2 * pair(i, j)), &mut fuel).unwrap(),
                    p.at(pair(i, j), &mut fuel).unwrap(),
                    "sigma slot ({i},{j})"
                );
            }
        }
        // Component 0 complement side enumerates exactly the other lists.
        let space = SpaceDescriptor::cantor();
        let c0 = r_component(&space, &p, 0);
        let pi = collect(c0.closed().complement_name(), 4000, &mut fuel);
        assert_eq!(pi, CylSet::cylinder(w("1")));
        let sigma = collect(c0.open(), 4000, &mut fuel);
        assert_eq!(sigma, CylSet::cylinder(w("0")));
    }

    #[test]
    fn clopen_separation_splits_cylinders_exactly() {
        let c = cantor_partition_op();
        let n = clopen_separate(c);
        let a = ClosedName::from_cylset(&CylSet::cylinder(w("0")));
        let b = ClosedName::from_cylset(&CylSet::cylinder(w("1")));
        let out = n(&a, &b);
        let side = out.side.exact().unwrap();
        let coside = out.coside.exact().unwrap();
        assert!(side.contains_set(&CylSet::cylinder(w("0"))), "side misses A");
        assert!(coside.contains_set(&CylSet::cylinder(w("1"))), "coside misses B");
        assert!(side.intersect(coside).is_empty());
        assert!(side.union(coside).is_full());
    }

    #[test]
    fn fixed_arity_and_order_shrink_control_intersections() {
        let u = [
            cyl_open(&["0", "10"]),
            cyl_open(&["1", "01"]),
        ];
        let parts = fixed_arity_separate(&u);
        let s0 = parts[0].exact().unwrap();
        let s1 = parts[1].exact().unwrap();
        assert!(s0.intersect(s1).is_empty());
        assert!(s0.union(s1).is_full());

        // Four members, budget 0: every pair of outputs disjoint.
        let u4 = [
            cyl_open(&["00", "01"]),
            cyl_open(&["0", "10"]),
            cyl_open(&["1"]),
            cyl_open(&["110"]),
        ];
        let shrunk = order_shrink_open(&u4, &DimensionBudget { n: 0 });
        assert_eq!(shrunk.len(), 4);
        let sets: Vec<&CylSet> = shrunk.iter().map(|p| p.exact().unwrap()).collect();
        let mut total = CylSet::empty();
        for (i, s) in sets.iter().enumerate() {
            assert!(u4[i].exact().unwrap().contains_set(s), "not a shrinking at {i}");
            for t in sets.iter().skip(i + 1) {
                assert!(s.intersect(t).is_empty(), "outputs {i} overlap");
            }
            total = total.union(s);
        }
        assert!(total.is_full());
    }

    #[test]
    fn small_families_pass_through_unchanged() {
        let u = [cyl_open(&["0", "1"])];
        let out = cstar_from_fixed(&fixed_arity_separate, &u, &DimensionBudget { n: 0 });
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].exact().unwrap(), u[0].exact().unwrap());
    }

    #[test]
    fn dual_swelling_empties_total_intersection() {
        let b = [
            ClosedName::from_cylset(&CylSet::cylinder(w("0"))),
            ClosedName::from_cylset(&CylSet::cylinder(w("1"))),
        ];
        let f = dual_d(&b);
        let f0 = f[0].complement_name().exact().unwrap().complement();
        let f1 = f[1].complement_name().exact().unwrap().complement();
        assert!(f0.contains_set(&CylSet::cylinder(w("0"))), "no swelling at 0");
        assert!(f1.contains_set(&CylSet::cylinder(w("1"))), "no swelling at 1");
        assert!(f0.intersect(&f1).is_empty(), "total intersection inhabited");
        assert!(f0.union(&f1).is_full(), "swollen family must cover");
    }

    #[test]
    fn index_normalize_merges_by_tag() {
        let space = SpaceDescriptor::cantor();
        let tagged = [
            (cyl_open(&["00"]), 1u64),
            (cyl_open(&["01"]), 0u64),
            (cyl_open(&["1"]), 1u64),
        ];
        let merged = index_normalize(&tagged, 2, &space);
        assert_eq!(merged.len(), 2);
        assert_eq!(
            merged[0].exact().unwrap(),
            &CylSet::cylinder(w("01"))
        );
        assert_eq!(
            merged[1].exact().unwrap(),
            &CylSet::from_cylinders([w("00"), w("1")])
        );
    }

    #[test]
    fn order_shrink_closed_keeps_order_at_resolution_eight() {
        let mut fuel = Fuel::new(4_000_000_000);
        let u = [
            cyl_open(&["0", "10"]),
            cyl_open(&["1"]),
        ];
        let res = order_shrink_closed(&u, &DimensionBudget { n: 0 });
        assert_eq!(res.closeds.len(), 2);
        // Pairwise empty: on every word some separator certifies below 1/2,
        // pushing that word out of the corresponding closed.
        for word in CWord::root().extensions(8) {
            let f0 = res.functions[0]
                .certify_below(&word, &half(), 0, 2048, &mut fuel)
                .unwrap();
            let f1 = res.functions[1]
                .certify_below(&word, &half(), 0, 2048, &mut fuel)
                .unwrap();
            assert!(f0 || f1, "[{word}] sits in both closed outputs");
        }
    }
}
