//! The cover calculus: dense-sequence unions, the Urysohn separator, and
//! the swelling and shrinking operators for finite families.
//!
//! The separator is one explicit formula: f = s_A / (s_A + s_B), where s_A
//! weighs the balls listed in the complement name of A by 2^{-i}·min(2^{-i},
//! r_i − d(x, c_i)) clamped at zero, indexed by announcement order.  Every
//! value in this module is reached through outward rational intervals on
//! that formula, so each certificate is a strict rational comparison.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num::rational::BigRational;
use num::{BigUint, One, Zero};

use crate::cantor::{pow2_neg, CWord};
use crate::fuel::{Fuel, RunError, RunResult};
use crate::hyper::{
    closeds_intersection, opens_intersection, opens_union, BallListing, ClosedName, OpenName,
    preimage_open,
};
use crate::names::Name;
use crate::realfn::RealFn;
use crate::space::{cantor_ball_word, CauchyName, IdealBall, SpaceDescriptor};

/// A finite or countable family of open names.  Star families know their
/// length; omega families are demanded one index at a time.
#[derive(Clone)]
pub enum IndexedOpenFamily {
    Star(Vec<OpenName>),
    Omega(Arc<dyn Fn(u64) -> OpenName + Send + Sync>),
}

impl IndexedOpenFamily {
    pub fn star_len(&self) -> Option<u64> {
        match self {
            IndexedOpenFamily::Star(v) => Some(v.len() as u64),
            IndexedOpenFamily::Omega(_) => None,
        }
    }

    pub fn get(&self, i: u64) -> Option<OpenName> {
        match self {
            IndexedOpenFamily::Star(v) => v.get(usize::try_from(i).ok()?).cloned(),
            IndexedOpenFamily::Omega(f) => Some(f(i)),
        }
    }

    pub fn star_members(&self) -> &[OpenName] {
        match self {
            IndexedOpenFamily::Star(v) => v,
            IndexedOpenFamily::Omega(_) => panic!("finite family required"),
        }
    }
}

// ---------------------------------------------------------------------------
// Dense-sequence unions.

/// Apply a point-to-open realizer along the canonical dense sequence and
/// take the union; the union name interleaves the member streams, so it
/// equals the union over the whole space for continuous realizers.
pub fn lindelof(
    u: Arc<dyn Fn(&CauchyName) -> OpenName + Send + Sync>,
    z: &SpaceDescriptor,
) -> (IndexedOpenFamily, OpenName) {
    let space = z.clone();
    let cache: Arc<Mutex<HashMap<u64, OpenName>>> = Arc::new(Mutex::new(HashMap::new()));
    let member = {
        let space = space.clone();
        let cache = cache.clone();
        move |i: u64| -> OpenName {
            if let Some(v) = cache.lock().unwrap().get(&i) {
                return v.clone();
            }
            let zi = CauchyName::from_ideal(space.clone(), &space.ideal_point(i));
            let v = u(&zi);
            cache.lock().unwrap().insert(i, v.clone());
            v
        }
    };
    let member2 = member.clone();
    let union_name = Name::tuple_countable(move |i| member2(i).name().clone());
    let union = OpenName::from_name(space.clone(), union_name);
    (IndexedOpenFamily::Omega(Arc::new(member)), union)
}

// ---------------------------------------------------------------------------
// The separator.

/// The weighted-ball sum over one complement listing, as outward intervals.
struct SideSum {
    listing: Arc<BallListing>,
}

/// An exact interval for the distance from a region to an ideal point.
enum DistRange {
    Exact(BigRational),
    Interval(BigRational, BigRational),
}

impl SideSum {
    /// Interval for the position-weighted sum after reading `scan` stream
    /// positions.  Padding positions contribute exactly zero, so the
    /// unread tail is at most Σ_{p≥scan} 4^{-p} < 2·4^{-scan} and shrinks
    /// as the scan deepens.
    fn sum_interval(
        &self,
        scan: u64,
        dist: &mut dyn FnMut(&IdealBall, &mut Fuel) -> RunResult<DistRange>,
        fuel: &mut Fuel,
    ) -> RunResult<(BigRational, BigRational)> {
        let scan = scan.min(1 << 20);
        let entries = self.listing.positioned_upto(scan, fuel)?;
        let mut lo = BigRational::zero();
        let mut hi = BigRational::zero();
        for (p, b) in &entries {
            fuel.tick()?;
            let w = pow2_neg(*p as u32);
            let r = b.radius();
            let term = |d: &BigRational| -> BigRational {
                let margin = (&r - d).max(BigRational::zero()).min(w.clone());
                &w * margin
            };
            match dist(b, fuel)? {
                DistRange::Exact(d) => {
                    let t = term(&d);
                    lo += &t;
                    hi += t;
                }
                DistRange::Interval(dlo, dhi) => {
                    lo += term(&dhi);
                    hi += term(&dlo);
                }
            }
        }
        let tail = pow2_neg(2 * (scan as u32)) * BigRational::from_integer(2.into());
        Ok((lo, hi + tail))
    }
}

/// The separating function of two disjoint closed sets.
///
/// Zero exactly on the first set, one exactly on the second, with values in
/// the unit interval; all access is by outward interval bounds.
pub struct UrysohnFn {
    space: SpaceDescriptor,
    a_side: SideSum,
    b_side: SideSum,
}

fn quotient_interval(
    a: &(BigRational, BigRational),
    b: &(BigRational, BigRational),
) -> (BigRational, BigRational) {
    let zero = BigRational::zero();
    let one = BigRational::one();
    let den_lo = &a.0 + &b.1;
    let lo = if den_lo.is_zero() { zero.clone() } else { &a.0 / den_lo };
    let den_hi = &a.1 + &b.0;
    let hi = if den_hi.is_zero() { one.clone() } else { &a.1 / den_hi };
    (lo.max(zero), hi.min(one))
}

impl UrysohnFn {
    pub fn new(a: &ClosedName, b: &ClosedName) -> Arc<UrysohnFn> {
        assert!(a.space() == b.space(), "separator across different spaces");
        Arc::new(UrysohnFn {
            space: a.space().clone(),
            a_side: SideSum { listing: Arc::new(BallListing::new(a.complement_name().name().clone())) },
            b_side: SideSum { listing: Arc::new(BallListing::new(b.complement_name().name().clone())) },
        })
    }

    /// Both sums at an ideal point, with exact per-term distances.
    fn sums_at_point(
        &self,
        code: &BigUint,
        scan: u64,
        fuel: &mut Fuel,
    ) -> RunResult<((BigRational, BigRational), (BigRational, BigRational))> {
        let space = self.space.clone();
        let mut dist = |b: &IdealBall, _fuel: &mut Fuel| -> RunResult<DistRange> {
            Ok(DistRange::Exact(space.ideal_distance(code, &b.center)?))
        };
        let a = self.a_side.sum_interval(scan, &mut dist, fuel)?;
        let b = self.b_side.sum_interval(scan, &mut dist, fuel)?;
        Ok((a, b))
    }

    /// Value bounds on a whole cylinder, subdividing `refine` digits deeper
    /// and joining the pieces.
    pub fn bounds_word(
        &self,
        w: &CWord,
        refine: u32,
        scan: u64,
        fuel: &mut Fuel,
    ) -> RunResult<(BigRational, BigRational)> {
        assert!(self.space.is_cantor(), "cylinder bounds need Cantor space");
        let target = (w.len() as u32 + refine).min(CWord::MAX_LEN as u32) as u8;
        let mut joined: Option<(BigRational, BigRational)> = None;
        for sub in w.extensions(target) {
            fuel.tick()?;
            let mut dist = |b: &IdealBall, _fuel: &mut Fuel| -> RunResult<DistRange> {
                let c = CWord::from_ideal_code(&b.center)
                    .ok_or_else(|| RunError::Violation("listed center off Cantor space".into()))?;
                if c.point_in_cylinder(&sub) {
                    Ok(DistRange::Interval(BigRational::zero(), pow2_neg(sub.len() as u32)))
                } else {
                    Ok(DistRange::Exact(c.point_distance(&sub)))
                }
            };
            let a = self.a_side.sum_interval(scan, &mut dist, fuel)?;
            let b = self.b_side.sum_interval(scan, &mut dist, fuel)?;
            let q = quotient_interval(&a, &b);
            joined = Some(match joined {
                None => q,
                Some((lo, hi)) => (lo.min(q.0), hi.max(q.1)),
            });
        }
        Ok(joined.expect("a cylinder has extensions"))
    }

    /// Certify that the value stays strictly below `theta` on the cylinder.
    pub fn certify_below(
        &self,
        w: &CWord,
        theta: &BigRational,
        refine: u32,
        scan: u64,
        fuel: &mut Fuel,
    ) -> RunResult<bool> {
        let (_, hi) = self.bounds_word(w, refine, scan, fuel)?;
        Ok(&hi < theta)
    }

    /// Certify that the value stays strictly above `theta` on the cylinder.
    pub fn certify_above(
        &self,
        w: &CWord,
        theta: &BigRational,
        refine: u32,
        scan: u64,
        fuel: &mut Fuel,
    ) -> RunResult<bool> {
        let (lo, _) = self.bounds_word(w, refine, scan, fuel)?;
        Ok(&lo > theta)
    }
}

impl RealFn for UrysohnFn {
    fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    fn lipschitz(&self) -> Option<BigRational> {
        // The quotient has no useful syntactic bound.
        None
    }

    fn approx_ideal(
        &self,
        code: &BigUint,
        k: u32,
        fuel: &mut Fuel,
    ) -> RunResult<(BigRational, BigRational)> {
        let goal = pow2_neg(k);
        let mut scan = 32u64;
        loop {
            let (a, b) = self.sums_at_point(code, scan, fuel)?;
            let (lo, hi) = quotient_interval(&a, &b);
            if &hi - &lo <= goal {
                return Ok((lo, hi));
            }
            if scan >= (1 << 16) {
                // Width is pinned by an announcement the scan never met.
                return Err(RunError::OutOfFuel);
            }
            scan *= 4;
        }
    }

    fn bounds_ball(
        &self,
        ball: &IdealBall,
        k: u32,
        fuel: &mut Fuel,
    ) -> RunResult<(BigRational, BigRational)> {
        // Wider scans only help by meeting later announcements; the width on
        // a fat ball is geometry-bound, so two passes are enough and the
        // result is outward either way.
        let goal = pow2_neg(k);
        for scan in [256u64, 2048] {
            let cur = if self.space.is_cantor() {
                let w = cantor_ball_word(ball, false)?;
                self.bounds_word(&w, k.min(6), scan, fuel)?
            } else {
                let space = self.space.clone();
                let center = ball.center.clone();
                let radius = ball.radius();
                let mut dist = |b: &IdealBall, _fuel: &mut Fuel| -> RunResult<DistRange> {
                    let d = space.ideal_distance(&center, &b.center)?;
                    let lo = (&d - &radius).max(BigRational::zero());
                    Ok(DistRange::Interval(lo, d + &radius))
                };
                let a = self.a_side.sum_interval(scan, &mut dist, fuel)?;
                let b = self.b_side.sum_interval(scan, &mut dist, fuel)?;
                quotient_interval(&a, &b)
            };
            if &cur.1 - &cur.0 <= goal || scan == 2048 {
                return Ok(cur);
            }
        }
        unreachable!("the final pass returns")
    }
}

/// The separating function for disjoint closed A, B: zero on A, one on B.
pub fn urysohn(a: &ClosedName, b: &ClosedName) -> Arc<UrysohnFn> {
    UrysohnFn::new(a, b)
}

// ---------------------------------------------------------------------------
// Level sets of a separator.

/// One rational open interval of the line as an open name.
pub fn open_real_interval(lo: &BigRational, hi: &BigRational) -> OpenName {
    assert!(lo < hi, "empty interval");
    let two = BigRational::from_integer(2.into());
    let center = (lo + hi) / &two;
    let radius = (hi - lo) / &two;
    OpenName::from_balls(
        SpaceDescriptor::reals(),
        vec![IdealBall::new(crate::space::nu_q_bar(&center), &radius)],
    )
}

fn minus_one() -> BigRational {
    -BigRational::one()
}

fn two() -> BigRational {
    BigRational::from_integer(2.into())
}

/// The open set where the separator is strictly below `theta`.
pub fn strict_sublevel(f: &Arc<UrysohnFn>, theta: &BigRational) -> OpenName {
    preimage_open(f.clone(), &open_real_interval(&minus_one(), theta))
}

/// The open set where the separator is strictly above `theta`.
pub fn strict_suplevel(f: &Arc<UrysohnFn>, theta: &BigRational) -> OpenName {
    preimage_open(f.clone(), &open_real_interval(theta, &two()))
}

/// The closed set where the separator is at most `theta`.
pub fn closed_sublevel(f: &Arc<UrysohnFn>, theta: &BigRational) -> ClosedName {
    ClosedName::complement_of(strict_suplevel(f, theta))
}

fn half() -> BigRational {
    BigRational::new(1.into(), 2.into())
}

// ---------------------------------------------------------------------------
// Swelling.

/// All size-`size` subsets of the pool, in lexicographic order.
fn subsets_of_size(pool: &[usize], size: usize) -> Vec<Vec<usize>> {
    if size == 0 {
        return vec![Vec::new()];
    }
    if pool.len() < size {
        return Vec::new();
    }
    let mut out = Vec::new();
    let head = pool[0];
    for mut rest in subsets_of_size(&pool[1..], size - 1) {
        rest.insert(0, head);
        out.push(rest);
    }
    out.extend(subsets_of_size(&pool[1..], size));
    out
}

/// Open swellings with their separators and closed intermediates exposed,
/// so order and containment claims can be certified word by word.
pub struct SwellResult {
    pub opens: Vec<OpenName>,
    pub functions: Vec<Arc<UrysohnFn>>,
    pub swellings: Vec<ClosedName>,
}

/// Swell a closed family of order at most N+1 into an open family of the
/// same order.
///
/// Set n is separated from the union of all (N+1)-fold intersections of
/// the already-swollen sets and the still-closed later sets; the swelling
/// is the closed 1/2-sublevel and the output open is the strict one.
pub fn swell(f: &[ClosedName], n_budget: u64) -> SwellResult {
    if f.is_empty() {
        return SwellResult { opens: Vec::new(), functions: Vec::new(), swellings: Vec::new() };
    }
    let space = f[0].space().clone();
    let want = usize::try_from(n_budget).unwrap_or(usize::MAX).saturating_add(1);
    let mut opens = Vec::new();
    let mut functions = Vec::new();
    let mut swellings: Vec<ClosedName> = Vec::new();
    for n in 0..f.len() {
        let others: Vec<usize> = (0..f.len()).filter(|j| *j != n).collect();
        let current = |j: usize| -> OpenName {
            // The complement of the mixed-family member at index j.
            if j < n {
                swellings[j].complement_name().clone()
            } else {
                f[j].complement_name().clone()
            }
        };
        let groups: Vec<OpenName> = subsets_of_size(&others, want)
            .into_iter()
            .map(|js| opens_union(&space, js.into_iter().map(current).collect()))
            .collect();
        let bad_complement = opens_intersection(&space, groups);
        let bad = ClosedName::complement_of(bad_complement);
        let fun = UrysohnFn::new(&f[n], &bad);
        opens.push(strict_sublevel(&fun, &half()));
        swellings.push(closed_sublevel(&fun, &half()));
        functions.push(fun);
    }
    SwellResult { opens, functions, swellings }
}

// ---------------------------------------------------------------------------
// Shrinking.

/// Open neighborhoods with empty total intersection, with separators.
pub struct SeparateResult {
    pub opens: Vec<OpenName>,
    pub functions: Vec<Arc<UrysohnFn>>,
}

/// For closed sets with empty total intersection, find open supersets that
/// still intersect to nothing.
///
/// Set n is separated from the intersection of everything else (swollen
/// sets before it, raw sets after); the outputs are the strict 1/2
/// sublevels, whose intersection sits inside the empty intersection of the
/// closed sublevels.
pub fn separate_t(b: &[ClosedName]) -> SeparateResult {
    if b.is_empty() {
        return SeparateResult { opens: Vec::new(), functions: Vec::new() };
    }
    let space = b[0].space().clone();
    let mut opens = Vec::new();
    let mut functions = Vec::new();
    let mut swellings: Vec<ClosedName> = Vec::new();
    for n in 0..b.len() {
        let mut rest = Vec::new();
        for (j, s) in swellings.iter().enumerate() {
            if j != n {
                rest.push(s.clone());
            }
        }
        for j in n + 1..b.len() {
            rest.push(b[j].clone());
        }
        let bad = closeds_intersection(&space, rest);
        let fun = UrysohnFn::new(&b[n], &bad);
        opens.push(strict_sublevel(&fun, &half()));
        swellings.push(closed_sublevel(&fun, &half()));
        functions.push(fun);
    }
    SeparateResult { opens, functions }
}

/// A closed shrinking of a finite open cover, by duality through the
/// empty-intersection separator on the complements.
pub struct ShrinkResult {
    pub closeds: Vec<ClosedName>,
    pub functions: Vec<Arc<UrysohnFn>>,
}

pub fn shrink_closed(u: &[OpenName]) -> ShrinkResult {
    let complements: Vec<ClosedName> =
        u.iter().map(|o| ClosedName::complement_of(o.clone())).collect();
    let sep = separate_t(&complements);
    let closeds = sep.opens.into_iter().map(ClosedName::complement_of).collect();
    ShrinkResult { closeds, functions: sep.functions }
}

/// Certify that the closed 1/2-suplevels of the given separators jointly
/// cover the cylinder, subdividing where no single one is certified.
pub fn closed_cover_certified(
    fs: &[Arc<UrysohnFn>],
    w: &CWord,
    depth_cap: u32,
    scan: u64,
    fuel: &mut Fuel,
) -> RunResult<bool> {
    let h = half();
    for f in fs {
        if f.certify_above(w, &h, 0, scan, fuel)? {
            return Ok(true);
        }
    }
    if depth_cap == 0 || w.len() >= CWord::MAX_LEN {
        return Ok(false);
    }
    Ok(closed_cover_certified(fs, &w.child(false), depth_cap - 1, scan, fuel)?
        && closed_cover_certified(fs, &w.child(true), depth_cap - 1, scan, fuel)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::CylSet;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn w(s: &str) -> CWord {
        CWord::parse(s).expect("test word")
    }

    fn closed_cyl(s: &str) -> ClosedName {
        ClosedName::from_cylset(&CylSet::cylinder(w(s)))
    }

    fn big_fuel() -> Fuel {
        Fuel::new(200_000_000)
    }

    #[test]
    fn separator_hits_the_endpoints() {
        let mut fuel = big_fuel();
        let f = urysohn(&closed_cyl("0"), &closed_cyl("1"));
        let (lo, hi) = f.approx_ideal(&w("00").ideal_code(), 10, &mut fuel).unwrap();
        assert!(lo >= rat(-1, 1024) && hi <= rat(1, 1024), "not pinned to 0");
        let (lo, hi) = f.approx_ideal(&w("1").ideal_code(), 10, &mut fuel).unwrap();
        assert!(lo >= rat(1023, 1024) && hi <= rat(1025, 1024), "not pinned to 1");
    }

    #[test]
    fn separator_stays_strictly_between_off_both_sets() {
        let mut fuel = big_fuel();
        let f = urysohn(&closed_cyl("00"), &closed_cyl("11"));
        let (lo, hi) = f.approx_ideal(&w("01").ideal_code(), 12, &mut fuel).unwrap();
        assert!(lo > BigRational::zero(), "value not strictly positive");
        assert!(hi < BigRational::one(), "value not strictly below one");
    }

    #[test]
    fn degenerate_separators_collapse() {
        let mut fuel = big_fuel();
        // A = X, B = ∅: identically zero.
        let a = ClosedName::from_cylset(&CylSet::full());
        let b = ClosedName::from_cylset(&CylSet::empty());
        let f = urysohn(&a, &b);
        let (_, hi) = f.approx_ideal(&w("e").ideal_code(), 12, &mut fuel).unwrap();
        assert!(hi <= rat(1, 4096));
        // A = ∅, B = X: identically one.
        let g = urysohn(&b, &a);
        let (lo, _) = g.approx_ideal(&w("10").ideal_code(), 12, &mut fuel).unwrap();
        assert!(lo >= rat(4095, 4096));
    }

    #[test]
    fn word_bounds_certify_the_two_halves() {
        let mut fuel = big_fuel();
        let f = urysohn(&closed_cyl("0"), &closed_cyl("1"));
        let h = half();
        assert!(f.certify_below(&w("0"), &h, 2, 64, &mut fuel).unwrap());
        assert!(f.certify_above(&w("1"), &h, 2, 64, &mut fuel).unwrap());
        assert!(!f.certify_above(&w("0"), &h, 2, 64, &mut fuel).unwrap());
    }

    #[test]
    fn level_set_streams_list_sound_balls() {
        let mut fuel = big_fuel();
        let f = urysohn(&closed_cyl("0"), &closed_cyl("1"));
        let above = strict_suplevel(&f, &half());
        let mut hits = Vec::new();
        for pos in 0..600u64 {
            if let Some(ball) = above.ball_at(pos, &mut fuel).unwrap() {
                hits.push(cantor_ball_word(&ball, false).unwrap());
            }
        }
        assert!(!hits.is_empty(), "no suplevel balls surfaced");
        for cw in &hits {
            assert!(w("1").is_prefix_of(cw), "suplevel ball [{cw}] on the zero side");
        }
    }

    #[test]
    fn lindelof_takes_unions_along_the_dense_sequence() {
        let mut fuel = big_fuel();
        let space = SpaceDescriptor::cantor();
        // Constant realizer: the union is the constant value.
        let v = OpenName::from_cylset(&CylSet::cylinder(w("01")));
        let vc = v.clone();
        let (fam, union) =
            lindelof(Arc::new(move |_x: &CauchyName| vc.clone()), &space);
        let balls = union.balls_upto(64, &mut fuel).unwrap();
        assert!(!balls.is_empty());
        for b in &balls {
            assert_eq!(cantor_ball_word(&b, false).unwrap(), w("01"));
        }
        assert!(fam.get(3).is_some());

        // Prefix realizer with cylinder-sized balls: the union is everything.
        let sp = space.clone();
        let (_, union2) = lindelof(
            Arc::new(move |x: &CauchyName| {
                let mut f = Fuel::new(1_000_000);
                let code = x.point_code_at(2, &mut f).expect("dense points are ideal");
                let word = CWord::from_ideal_code(&code).unwrap();
                let first = if word.is_empty() { false } else { word.bit(0) };
                let cyl = CWord::new(if first { 1 } else { 0 }, 1);
                OpenName::from_balls(
                    sp.clone(),
                    vec![IdealBall::new(cyl.ideal_code(), &rat(3, 4))],
                )
            }),
            &space,
        );
        let mut seen = CylSet::empty();
        for b in union2.balls_upto(64, &mut fuel).unwrap() {
            seen = seen.union(&CylSet::cylinder(cantor_ball_word(&b, false).unwrap()));
        }
        assert!(seen.is_full(), "prefix balls failed to cover");

        // The same construction with radius 1/2 pins two digits instead:
        // the union is [00] ∪ [10], not everything.
        let sp2 = space.clone();
        let (_, union3) = lindelof(
            Arc::new(move |x: &CauchyName| {
                let mut f = Fuel::new(1_000_000);
                let code = x.point_code_at(2, &mut f).expect("dense points are ideal");
                let word = CWord::from_ideal_code(&code).unwrap();
                let first = if word.is_empty() { false } else { word.bit(0) };
                let cyl = CWord::new(if first { 1 } else { 0 }, 1);
                OpenName::from_balls(
                    sp2.clone(),
                    vec![IdealBall::new(cyl.ideal_code(), &rat(1, 2))],
                )
            }),
            &space,
        );
        let mut seen3 = CylSet::empty();
        for b in union3.balls_upto(64, &mut fuel).unwrap() {
            seen3 = seen3.union(&CylSet::cylinder(cantor_ball_word(&b, false).unwrap()));
        }
        assert_eq!(seen3, CylSet::from_cylinders([w("00"), w("10")]));
    }

    #[test]
    fn swell_keeps_disjoint_pairs_disjoint() {
        let mut fuel = Fuel::new(2_000_000_000);
        let res = swell(&[closed_cyl("0"), closed_cyl("1")], 0);
        assert_eq!(res.functions.len(), 2);
        let h = half();
        let mut certified = [0usize; 2];
        for word in CWord::root().extensions(4) {
            let in0 = res.functions[0].certify_below(&word, &h, 2, 512, &mut fuel).unwrap();
            let in1 = res.functions[1].certify_below(&word, &h, 2, 512, &mut fuel).unwrap();
            assert!(!(in0 && in1), "swollen opens overlap on [{word}]");
            if in0 {
                certified[0] += 1;
            }
            if in1 {
                certified[1] += 1;
            }
        }
        // Each swelling still contains its closed set: the original halves
        // certify on their own side.
        assert!(certified[0] >= 8, "left swelling lost its set");
        assert!(certified[1] >= 8, "right swelling lost its set");
    }

    #[test]
    fn separate_t_empties_the_intersection() {
        let mut fuel = Fuel::new(2_000_000_000);
        let res = separate_t(&[closed_cyl("0"), closed_cyl("1")]);
        let h = half();
        for word in CWord::root().extensions(4) {
            let in0 = res.functions[0].certify_below(&word, &h, 2, 512, &mut fuel).unwrap();
            let in1 = res.functions[1].certify_below(&word, &h, 2, 512, &mut fuel).unwrap();
            assert!(!(in0 && in1), "separated opens meet on [{word}]");
        }
        // B_i lands inside U_i: the defining sets certify immediately.
        for word in w("0").extensions(4) {
            assert!(res.functions[0].certify_below(&word, &h, 2, 512, &mut fuel).unwrap());
        }
        for word in w("1").extensions(4) {
            assert!(res.functions[1].certify_below(&word, &h, 2, 512, &mut fuel).unwrap());
        }
    }

    #[test]
    fn shrink_closed_covers_and_refines() {
        let mut fuel = Fuel::new(2_000_000_000);
        let u0 = OpenName::from_cylset(&CylSet::from_cylinders([w("0"), w("10")]));
        let u1 = OpenName::from_cylset(&CylSet::cylinder(w("1")));
        let res = shrink_closed(&[u0, u1]);
        // Covering: every length-3 word is certified into some F_i after
        // limited subdivision.
        for word in CWord::root().extensions(3) {
            assert!(
                closed_cover_certified(&res.functions, &word, 6, 512, &mut fuel).unwrap(),
                "shrinking leaves [{word}] uncovered"
            );
        }
        // Refinement: F_1 = {f_1 ≥ 1/2} avoids cylinders disjoint from U_1;
        // [00] is disjoint from U_1, so f_1 must stay below 1/2 there.
        assert!(res.functions[1]
            .certify_below(&w("00"), &half(), 2, 512, &mut fuel)
            .unwrap());
    }

    #[test]
    fn singleton_empty_family_separates_to_nothing() {
        let mut fuel = big_fuel();
        let res = separate_t(&[ClosedName::from_cylset(&CylSet::empty())]);
        // The lone separator is identically one, so no word certifies into
        // the open neighborhood of the empty set.
        for word in CWord::root().extensions(2) {
            assert!(!res.functions[0]
                .certify_below(&word, &half(), 2, 256, &mut fuel)
                .unwrap());
        }
        let (lo, _) = res.functions[0]
            .approx_ideal(&w("e").ideal_code(), 8, &mut fuel)
            .unwrap();
        assert!(lo >= rat(255, 256));
    }
}
