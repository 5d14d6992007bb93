//! Hyperspace names: open, closed, clopen, located and compact sets.
//!
//! Set names are padded streams over ideal-ball codes or cover codes.  The
//! compact representations (cover, min-cover, range′, Hausdorff) all expose
//! the same finite-stage view of their set, so the translations between
//! them are written once against that view.  Streams enumerate candidates
//! in increasing code order, dovetailed against certification grades;
//! completeness of the listings is fuel-relative, soundness is not.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num::rational::BigRational;
use num::{BigUint, Zero};

use crate::cantor::{pow2_neg, CWord, CylSet};
use crate::fuel::{Fuel, RunError, RunResult};
use crate::names::{
    decode_word, encode_word, finite_set_code, finite_set_members,
    unpair, Name,
};
use crate::realfn::RealFn;
use crate::space::{
    cantor_ball_word, formally_inside, nu_q, CauchyName, IdealBall, LowerRealName,
    SpaceDescriptor,
};

/// Certification grades are capped so that a single stream demand never
/// forces an absurdly fine stage; covers needing tighter slack than 2^{-13}
/// are out of desk range.
const SWEEP_GRADE_CAP: u32 = 12;

fn sweep_grade(s: u64) -> u32 {
    s.min(SWEEP_GRADE_CAP as u64) as u32
}

/// Listing horizons grow quadratically along the dovetail so that certable
/// candidates sit at reachable positions.
fn sweep_horizon(s: u64) -> u64 {
    s.saturating_mul(s).min(1 << 20)
}

// ---------------------------------------------------------------------------
// Finite-stage views of compact sets.

/// A compact set seen through finite point stages.
///
/// `stage(k)` is a finite list of ideal points within two-sided Hausdorff
/// distance 2^{-k-1} of the set: every member of the set is near a stage
/// point and every stage point is near a member.  Stage points need not lie
/// in the set unless `points_in_set` says so.
pub trait CompactData: Send + Sync {
    fn space(&self) -> &SpaceDescriptor;

    fn is_empty(&self, fuel: &mut Fuel) -> RunResult<bool>;

    fn stage(&self, k: u32, fuel: &mut Fuel) -> RunResult<Vec<BigUint>>;

    fn points_in_set(&self) -> bool {
        false
    }

    /// The exact clopen value, for accelerating exact pipelines.
    fn exact_cylset(&self) -> Option<CylSet> {
        None
    }
}

/// A clopen subset of Cantor space as a compact set.
pub struct CylCompact {
    space: SpaceDescriptor,
    set: CylSet,
}

impl CylCompact {
    pub fn new(set: CylSet) -> CylCompact {
        CylCompact { space: SpaceDescriptor::cantor(), set }
    }

    pub fn set(&self) -> &CylSet {
        &self.set
    }
}

impl CompactData for CylCompact {
    fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    fn is_empty(&self, _fuel: &mut Fuel) -> RunResult<bool> {
        Ok(self.set.is_empty())
    }

    fn stage(&self, k: u32, fuel: &mut Fuel) -> RunResult<Vec<BigUint>> {
        let depth = k + 1;
        if depth > CWord::MAX_LEN as u32 {
            return Err(RunError::OutOfFuel);
        }
        let net = self.set.point_net(depth as u8);
        fuel.spend(net.len() as u64)?;
        Ok(net.iter().map(|w| w.ideal_code()).collect())
    }

    fn points_in_set(&self) -> bool {
        true
    }

    fn exact_cylset(&self) -> Option<CylSet> {
        Some(self.set.clone())
    }
}

/// A finite set of ideal points as a compact set; stages are exact.
pub struct FinitePointsCompact {
    space: SpaceDescriptor,
    codes: Vec<BigUint>,
}

impl FinitePointsCompact {
    pub fn new(space: SpaceDescriptor, codes: Vec<BigUint>) -> FinitePointsCompact {
        for c in &codes {
            assert!(space.ideal_in_domain(c), "ideal code outside the domain");
        }
        FinitePointsCompact { space, codes }
    }
}

impl CompactData for FinitePointsCompact {
    fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    fn is_empty(&self, _fuel: &mut Fuel) -> RunResult<bool> {
        Ok(self.codes.is_empty())
    }

    fn stage(&self, _k: u32, fuel: &mut Fuel) -> RunResult<Vec<BigUint>> {
        fuel.spend(self.codes.len() as u64 + 1)?;
        Ok(self.codes.clone())
    }

    fn points_in_set(&self) -> bool {
        true
    }

    fn exact_cylset(&self) -> Option<CylSet> {
        None
    }
}

// ---------------------------------------------------------------------------
// Cover certificates against stages.

/// Decode a cover word into balls; `None` when some entry is not a ball
/// over the space's ideal points.
pub fn decode_cover_candidate(space: &SpaceDescriptor, code: &BigUint) -> Option<Vec<IdealBall>> {
    let entries = decode_word(code);
    let mut balls = Vec::with_capacity(entries.len());
    for e in &entries {
        let b = IdealBall::from_code(e);
        if !space.ideal_in_domain(&b.center) {
            return None;
        }
        balls.push(b);
    }
    Some(balls)
}

/// Decode a cover word from a trusted stream, rejecting bad codes loudly.
pub fn decode_cover(space: &SpaceDescriptor, code: &BigUint) -> RunResult<Vec<IdealBall>> {
    decode_cover_candidate(space, code)
        .ok_or_else(|| RunError::Violation("listed cover contains a malformed ball".into()))
}

pub fn encode_cover(balls: &[IdealBall]) -> BigUint {
    let entries: Vec<BigUint> = balls.iter().map(|b| b.code()).collect();
    encode_word(&entries)
}

/// Certificate that the balls cover the set, judged against stage `g`:
/// every stage point sits in some ball with slack 2^{-g-1} to spare.
pub fn cert_covers(
    space: &SpaceDescriptor,
    stage: &[BigUint],
    g: u32,
    balls: &[IdealBall],
    fuel: &mut Fuel,
) -> RunResult<bool> {
    let slack = pow2_neg(g + 1);
    for p in stage {
        fuel.tick()?;
        let mut hit = false;
        for b in balls {
            let d = space.ideal_distance(p, &b.center)?;
            if d + &slack < b.radius() {
                hit = true;
                break;
            }
        }
        if !hit {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Certificate that the ball meets the set, judged against stage `g`.
pub fn cert_ball_meets(
    space: &SpaceDescriptor,
    stage: &[BigUint],
    g: u32,
    ball: &IdealBall,
    fuel: &mut Fuel,
) -> RunResult<bool> {
    let slack = pow2_neg(g + 1);
    for p in stage {
        fuel.tick()?;
        let d = space.ideal_distance(p, &ball.center)?;
        if d + &slack < ball.radius() {
            return Ok(true);
        }
    }
    Ok(false)
}

// ---------------------------------------------------------------------------
// Padded ball listings with a shared read cache.
//
// Re-reading a stream position costs fuel every time even when memoized; a
// listing cache pays for each position once and hands out snapshots.

pub(crate) struct BallListing {
    name: Name,
    seen: Mutex<Vec<Option<IdealBall>>>,
}

impl BallListing {
    pub(crate) fn new(name: Name) -> BallListing {
        BallListing { name, seen: Mutex::new(Vec::new()) }
    }

    /// All balls announced at positions < `upto`.
    pub(crate) fn upto(&self, upto: u64, fuel: &mut Fuel) -> RunResult<Vec<IdealBall>> {
        let mut seen = self.seen.lock().unwrap();
        while (seen.len() as u64) < upto {
            let pos = seen.len() as u64;
            let s = self.name.at(pos, fuel)?;
            if s.is_zero() {
                seen.push(None);
            } else {
                seen.push(Some(IdealBall::from_code(&(s - 1u32))));
            }
        }
        Ok(seen
            .iter()
            .take(usize::try_from(upto).unwrap_or(usize::MAX))
            .filter_map(|b| b.clone())
            .collect())
    }

    /// Announced balls together with their stream positions, below `upto`.
    pub(crate) fn positioned_upto(
        &self,
        upto: u64,
        fuel: &mut Fuel,
    ) -> RunResult<Vec<(u64, IdealBall)>> {
        let mut seen = self.seen.lock().unwrap();
        while (seen.len() as u64) < upto {
            let pos = seen.len() as u64;
            let s = self.name.at(pos, fuel)?;
            if s.is_zero() {
                seen.push(None);
            } else {
                seen.push(Some(IdealBall::from_code(&(s - 1u32))));
            }
        }
        Ok(seen
            .iter()
            .take(usize::try_from(upto).unwrap_or(usize::MAX))
            .enumerate()
            .filter_map(|(p, b)| b.clone().map(|b| (p as u64, b)))
            .collect())
    }
}

struct CoverListing {
    space: SpaceDescriptor,
    name: Name,
    seen: Mutex<Vec<Option<Vec<IdealBall>>>>,
}

impl CoverListing {
    fn new(space: SpaceDescriptor, name: Name) -> CoverListing {
        CoverListing { space, name, seen: Mutex::new(Vec::new()) }
    }

    fn upto(&self, upto: u64, fuel: &mut Fuel) -> RunResult<Vec<Vec<IdealBall>>> {
        let mut seen = self.seen.lock().unwrap();
        while (seen.len() as u64) < upto {
            let pos = seen.len() as u64;
            let s = self.name.at(pos, fuel)?;
            if s.is_zero() {
                seen.push(None);
            } else {
                seen.push(Some(decode_cover(&self.space, &(s - 1u32))?));
            }
        }
        Ok(seen
            .iter()
            .take(usize::try_from(upto).unwrap_or(usize::MAX))
            .filter_map(|c| c.clone())
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Open, closed and clopen names.

/// An open set as a padded enumeration of ideal balls.
#[derive(Clone)]
pub struct OpenName {
    space: SpaceDescriptor,
    name: Name,
    exact: Option<CylSet>,
}

impl OpenName {
    pub fn from_name(space: SpaceDescriptor, name: Name) -> OpenName {
        OpenName { space, name, exact: None }
    }

    pub fn empty(space: SpaceDescriptor) -> OpenName {
        let exact = space.is_cantor().then(CylSet::empty);
        OpenName { space, name: Name::constant(0), exact }
    }

    /// A finite union of balls; on Cantor space the exact clopen value is
    /// computed alongside the stream.
    pub fn from_balls(space: SpaceDescriptor, balls: Vec<IdealBall>) -> OpenName {
        let exact = if space.is_cantor() {
            let mut cs = Vec::new();
            let mut ok = true;
            for b in &balls {
                match cantor_ball_word(b, false) {
                    Ok(w) => cs.push(w),
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            ok.then(|| CylSet::from_cylinders(cs))
        } else {
            None
        };
        let codes: Vec<BigUint> = balls.iter().map(|b| b.code()).collect();
        OpenName { space, name: crate::names::padded_from_list(codes), exact }
    }

    /// The canonical open name of a clopen set: one ball per cylinder, with
    /// radius 3·2^{-|w|-1} so the ball is exactly the cylinder.
    pub fn from_cylset(set: &CylSet) -> OpenName {
        let space = SpaceDescriptor::cantor();
        let three_half = BigRational::new(3.into(), 2.into());
        let balls: Vec<IdealBall> = set
            .cylinders()
            .iter()
            .map(|w| IdealBall::new(w.ideal_code(), &(&three_half * pow2_neg(w.len() as u32))))
            .collect();
        let codes: Vec<BigUint> = balls.iter().map(|b| b.code()).collect();
        OpenName {
            space,
            name: crate::names::padded_from_list(codes),
            exact: Some(set.clone()),
        }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn name(&self) -> &Name {
        &self.name
    }

    pub fn exact(&self) -> Option<&CylSet> {
        self.exact.as_ref()
    }

    /// The ball announced at a stream position, if any.
    pub fn ball_at(&self, pos: u64, fuel: &mut Fuel) -> RunResult<Option<IdealBall>> {
        let s = self.name.at(pos, fuel)?;
        if s.is_zero() {
            return Ok(None);
        }
        let b = IdealBall::from_code(&(s - 1u32));
        if !self.space.ideal_in_domain(&b.center) {
            return Err(RunError::Violation("listed ball has a bad center".into()));
        }
        Ok(Some(b))
    }

    /// All balls announced at positions < `upto`.
    pub fn balls_upto(&self, upto: u64, fuel: &mut Fuel) -> RunResult<Vec<IdealBall>> {
        let mut out = Vec::new();
        for pos in 0..upto {
            if let Some(b) = self.ball_at(pos, fuel)? {
                out.push(b);
            }
        }
        Ok(out)
    }

    pub fn union(&self, other: &OpenName) -> OpenName {
        assert!(self.space == other.space, "union across different spaces");
        let exact = match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => Some(a.union(b)),
            _ => None,
        };
        OpenName {
            space: self.space.clone(),
            name: Name::tuple2(&self.name, &other.name),
            exact,
        }
    }

    /// Balls formally inside a listed ball of each side, swept lazily.
    pub fn intersection(&self, other: &OpenName) -> OpenName {
        opens_intersection(&self.space, vec![self.clone(), other.clone()])
    }

    /// Semi-decide membership: scan announced balls against the point,
    /// dovetailing listing depth and probe precision.
    pub fn contains_point(&self, x: &CauchyName, fuel: &mut Fuel) -> RunResult<bool> {
        for t in 0.. {
            let (pos, j) = unpair(t);
            if let Some(ball) = self.ball_at(pos, fuel)? {
                if let Some(v) =
                    crate::space::ball_member_probe(x, &ball, j.min(60) as u32, fuel)?
                {
                    if v {
                        return Ok(true);
                    }
                }
            }
        }
        unreachable!()
    }

    pub fn complement(self) -> ClosedName {
        ClosedName { complement: self }
    }

    /// The whole space: exact on Cantor, expanding balls around the first
    /// ideal point elsewhere.
    pub fn full(space: SpaceDescriptor) -> OpenName {
        if space.is_cantor() {
            return OpenName::from_cylset(&CylSet::full());
        }
        let sp = space.clone();
        let name = Name::from_fn(move |pos, _fuel| {
            let r = BigRational::from_integer((pos + 1).into());
            Ok(IdealBall::new(sp.ideal_point(0), &r).code() + 1u32)
        });
        OpenName { space, name, exact: None }
    }
}

/// The ball a sweep stream examines at candidate index `c`.
///
/// On Cantor space candidates walk the canonical cylinder balls in dense
/// enumeration order, so fine balls sit at small indexes; elsewhere the
/// index is read as a raw ball code.
pub(crate) fn sweep_candidate_ball(space: &SpaceDescriptor, c: u64) -> Option<IdealBall> {
    if space.is_cantor() {
        let w = CWord::from_ideal_code(&space.ideal_point(c))?;
        let three_half = BigRational::new(3.into(), 2.into());
        Some(IdealBall::new(w.ideal_code(), &(&three_half * pow2_neg(w.len() as u32))))
    } else {
        let b = IdealBall::from_code(&BigUint::from(c));
        space.ideal_in_domain(&b.center).then_some(b)
    }
}

/// Finite union of open names by interleaving their streams.
pub fn opens_union(space: &SpaceDescriptor, members: Vec<OpenName>) -> OpenName {
    if members.is_empty() {
        return OpenName::empty(space.clone());
    }
    if members.len() == 1 {
        return members.into_iter().next().unwrap();
    }
    let exact = members.iter().try_fold(CylSet::empty(), |acc, m| {
        m.exact().map(|s| acc.union(s))
    });
    let n = members.len() as u64;
    let streams: Vec<Name> = members.iter().map(|m| m.name.clone()).collect();
    let name = Name::from_fn(move |pos, fuel| {
        let (i, j) = unpair(pos);
        if i < n {
            streams[i as usize].at(j, fuel)
        } else {
            Ok(BigUint::zero())
        }
    });
    OpenName { space: space.clone(), name, exact }
}

/// Finite intersection of open names.
///
/// With exact values the cylinder arithmetic is used directly.  Otherwise a
/// candidate ball is listed once it is certified formally inside one listed
/// ball of every member; balls that only fit inside a union of a member's
/// listed balls are missed, but every point of the intersection is
/// eventually covered by certified balls.
pub fn opens_intersection(space: &SpaceDescriptor, members: Vec<OpenName>) -> OpenName {
    if members.iter().all(|m| m.exact().is_some()) && space.is_cantor() {
        let set = members
            .iter()
            .fold(CylSet::full(), |acc, m| acc.intersect(m.exact().unwrap()));
        return OpenName::from_cylset(&set);
    }
    if members.is_empty() {
        return OpenName::full(space.clone());
    }
    if members.len() == 1 {
        return members.into_iter().next().unwrap();
    }
    let listings: Vec<Arc<BallListing>> = members
        .iter()
        .map(|m| Arc::new(BallListing::new(m.name.clone())))
        .collect();
    let sp = space.clone();
    let cert = move |ball: &IdealBall, s: u64, fuel: &mut Fuel| -> RunResult<bool> {
        let h = sweep_horizon(s);
        for listing in &listings {
            let listed = listing.upto(h, fuel)?;
            let mut inside = false;
            for u in &listed {
                fuel.tick()?;
                if formally_inside(&sp, ball, u)? {
                    inside = true;
                    break;
                }
            }
            if !inside {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let cache: Mutex<HashMap<(u64, u64), bool>> = Mutex::new(HashMap::new());
    let space2 = space.clone();
    let name = Name::from_fn(move |pos, fuel| {
        let (c, s) = unpair(pos);
        let ball = match sweep_candidate_ball(&space2, c) {
            Some(b) => b,
            None => return Ok(BigUint::zero()),
        };
        let check = |s: u64, fuel: &mut Fuel| -> RunResult<bool> {
            let key = (c, sweep_horizon(s));
            if let Some(&v) = cache.lock().unwrap().get(&key) {
                return Ok(v);
            }
            let v = cert(&ball, s, fuel)?;
            cache.lock().unwrap().insert(key, v);
            Ok(v)
        };
        for sp_ in 0..s {
            if check(sp_, fuel)? {
                return Ok(BigUint::zero());
            }
        }
        if check(s, fuel)? {
            Ok(ball.code() + 1u32)
        } else {
            Ok(BigUint::zero())
        }
    });
    OpenName { space: space.clone(), name, exact: None }
}

/// A closed set, named by an open name of its complement.
#[derive(Clone)]
pub struct ClosedName {
    complement: OpenName,
}

impl ClosedName {
    pub fn complement_of(open: OpenName) -> ClosedName {
        ClosedName { complement: open }
    }

    pub fn from_cylset(set: &CylSet) -> ClosedName {
        ClosedName { complement: OpenName::from_cylset(&set.complement()) }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        self.complement.space()
    }

    /// The open name of the complement (the underlying stream).
    pub fn complement_name(&self) -> &OpenName {
        &self.complement
    }

    pub fn complement(self) -> OpenName {
        self.complement
    }

    pub fn exact(&self) -> Option<CylSet> {
        self.complement.exact().map(|s| s.complement())
    }

    /// The complement ball announced at position `i`, for constructions
    /// whose terms are indexed by enumeration positions.
    pub fn complement_ball_at(&self, i: u64, fuel: &mut Fuel) -> RunResult<Option<IdealBall>> {
        self.complement.ball_at(i, fuel)
    }

    /// Semi-decide exclusion (the point lies in the complement).
    pub fn excludes_point(&self, x: &CauchyName, fuel: &mut Fuel) -> RunResult<bool> {
        self.complement.contains_point(x, fuel)
    }

    pub fn intersection(&self, other: &ClosedName) -> ClosedName {
        ClosedName { complement: self.complement.union(&other.complement) }
    }

    pub fn union(&self, other: &ClosedName) -> ClosedName {
        ClosedName { complement: self.complement.intersection(&other.complement) }
    }
}

/// Finite intersection of closed names: cheap, the complements interleave.
pub fn closeds_intersection(space: &SpaceDescriptor, members: Vec<ClosedName>) -> ClosedName {
    let compls = members.into_iter().map(|c| c.complement).collect();
    ClosedName { complement: opens_union(space, compls) }
}

/// Finite union of closed names: the complements are swept for their
/// certified intersection.
pub fn closeds_union(space: &SpaceDescriptor, members: Vec<ClosedName>) -> ClosedName {
    let compls = members.into_iter().map(|c| c.complement).collect();
    ClosedName { complement: opens_intersection(space, compls) }
}

/// A clopen set: a Σ-side name of the set and a Π-side name of the same set.
#[derive(Clone)]
pub struct ClopenName {
    open: OpenName,
    closed: ClosedName,
}

impl ClopenName {
    pub fn new(open: OpenName, closed: ClosedName) -> ClopenName {
        ClopenName { open, closed }
    }

    pub fn from_cylset(set: &CylSet) -> ClopenName {
        ClopenName { open: OpenName::from_cylset(set), closed: ClosedName::from_cylset(set) }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        self.open.space()
    }

    pub fn open(&self) -> &OpenName {
        &self.open
    }

    pub fn closed(&self) -> &ClosedName {
        &self.closed
    }

    pub fn exact(&self) -> Option<&CylSet> {
        self.open.exact()
    }

    /// Complementation swaps the two sides; no stream work at all.
    pub fn complement(self) -> ClopenName {
        let ClopenName { open, closed } = self;
        ClopenName { open: closed.complement, closed: ClosedName { complement: open } }
    }

    /// Decide membership by racing the two sides.
    pub fn decide_point(&self, x: &CauchyName, fuel: &mut Fuel) -> RunResult<bool> {
        for t in 0.. {
            let (pos, j) = unpair(t);
            let j = j.min(60) as u32;
            if let Some(ball) = self.open.ball_at(pos, fuel)? {
                if crate::space::ball_member_probe(x, &ball, j, fuel)? == Some(true) {
                    return Ok(true);
                }
            }
            if let Some(ball) = self.closed.complement.ball_at(pos, fuel)? {
                if crate::space::ball_member_probe(x, &ball, j, fuel)? == Some(true) {
                    return Ok(false);
                }
            }
        }
        unreachable!()
    }
}

// ---------------------------------------------------------------------------
// Located closed sets.

/// A closed set as the closure of a listed point sequence, with the
/// all-zero convention for the empty set.  Component streams announce the
/// Cauchy positions shifted by one.
#[derive(Clone)]
pub struct RangeName {
    space: SpaceDescriptor,
    name: Name,
}

impl RangeName {
    pub fn from_name(space: SpaceDescriptor, name: Name) -> RangeName {
        RangeName { space, name }
    }

    pub fn empty(space: SpaceDescriptor) -> RangeName {
        RangeName { space, name: Name::constant(0) }
    }

    pub fn from_points(space: SpaceDescriptor, points: Vec<CauchyName>) -> RangeName {
        let pts = Arc::new(points);
        let name = Name::tuple_countable(move |i| {
            let pts = pts.clone();
            match pts.get(usize::try_from(i).unwrap_or(usize::MAX)) {
                None => Name::constant(0),
                Some(p) => {
                    let p = p.clone();
                    Name::from_fn(move |j, fuel| Ok(p.point_code_at(j, fuel)? + 1u32))
                }
            }
        });
        RangeName { space, name }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn name(&self) -> &Name {
        &self.name
    }

    /// The listed point at a component index, when the component is used.
    pub fn point(&self, i: u64, fuel: &mut Fuel) -> RunResult<Option<CauchyName>> {
        let comp = self.name.project_countable(i);
        if comp.at(0, fuel)?.is_zero() {
            return Ok(None);
        }
        let space = self.space.clone();
        Ok(Some(CauchyName::from_name(
            space,
            Name::from_fn(move |j, fuel| {
                let s = comp.at(j, fuel)?;
                if s.is_zero() {
                    return Err(RunError::Violation(
                        "used range component fell back to padding".into(),
                    ));
                }
                Ok(s - 1u32)
            }),
        )))
    }

    /// Prepend a point to the listing (the shift map on components).
    pub fn prepend(&self, x: &CauchyName) -> RangeName {
        let inner = self.name.clone();
        let x = x.clone();
        let name = Name::tuple_countable(move |i| {
            if i == 0 {
                let x = x.clone();
                Name::from_fn(move |j, fuel| Ok(x.point_code_at(j, fuel)? + 1u32))
            } else {
                inner.project_countable(i - 1)
            }
        });
        RangeName { space: self.space.clone(), name }
    }
}

/// A located closed set through its distance function, realized from below.
#[derive(Clone)]
pub struct DistName {
    space: SpaceDescriptor,
    realizer: Arc<dyn Fn(&CauchyName) -> LowerRealName + Send + Sync>,
}

impl DistName {
    pub fn new(
        space: SpaceDescriptor,
        realizer: impl Fn(&CauchyName) -> LowerRealName + Send + Sync + 'static,
    ) -> DistName {
        DistName { space, realizer: Arc::new(realizer) }
    }

    /// Exact distances to a clopen subset of Cantor space.
    pub fn from_cylset(set: &CylSet) -> DistName {
        let set = set.clone();
        DistName::new(SpaceDescriptor::cantor(), move |x| {
            let set = set.clone();
            let x = x.clone();
            LowerRealName::from_increasing(move |step, fuel| {
                let j = step.min(60) as u32;
                let code = x.point_code_at(j as u64, fuel)?;
                let w = CWord::from_ideal_code(&code)
                    .ok_or_else(|| RunError::Violation("point code off Cantor space".into()))?;
                match set.point_distance(&w.point_normal()) {
                    // Empty target: every rational is a lower bound.
                    None => Ok(BigRational::from_integer(step.into())),
                    Some(d) => Ok(d - pow2_neg(j)),
                }
            })
        })
    }

    /// Distances to a compact set, bounded from below through its stages.
    pub fn from_compact(cd: Arc<dyn CompactData>) -> DistName {
        let space = cd.space().clone();
        DistName::new(space.clone(), move |x| {
            let cd = cd.clone();
            let space = space.clone();
            let x = x.clone();
            LowerRealName::from_increasing(move |step, fuel| {
                if cd.is_empty(fuel)? {
                    return Ok(BigRational::from_integer(step.into()));
                }
                let g = step.min(40) as u32;
                let stage = cd.stage(g, fuel)?;
                let code = x.point_code_at(g as u64, fuel)?;
                let mut best: Option<BigRational> = None;
                for p in &stage {
                    fuel.tick()?;
                    let d = space.ideal_distance(&code, p)?;
                    best = Some(match best {
                        None => d,
                        Some(b) => b.min(d),
                    });
                }
                Ok(best.unwrap() - pow2_neg(g + 1) - pow2_neg(g))
            })
        })
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn eval(&self, x: &CauchyName) -> LowerRealName {
        (self.realizer)(x)
    }
}

// ---------------------------------------------------------------------------
// Compact sets: cover and min-cover names.

struct CoverSweep {
    cd: Arc<dyn CompactData>,
    require_meets: bool,
    cache: Mutex<HashMap<(u64, u32), bool>>,
}

impl CoverSweep {
    fn cert(&self, code: u64, g: u32, fuel: &mut Fuel) -> RunResult<bool> {
        if let Some(&v) = self.cache.lock().unwrap().get(&(code, g)) {
            return Ok(v);
        }
        let v = self.cert_uncached(code, g, fuel)?;
        self.cache.lock().unwrap().insert((code, g), v);
        Ok(v)
    }

    fn cert_uncached(&self, code: u64, g: u32, fuel: &mut Fuel) -> RunResult<bool> {
        let space = self.cd.space();
        let balls = match decode_cover_candidate(space, &BigUint::from(code)) {
            Some(b) => b,
            None => return Ok(false),
        };
        // Cheap necessary test against the coarsest stage: a point of the
        // set lies within 1/2 of each stage-0 point, so a cover must bring
        // every stage-0 point within radius + 1/2 of some ball center.
        let coarse = self.cd.stage(0, fuel)?;
        let half = pow2_neg(1);
        for p in &coarse {
            fuel.tick()?;
            let mut near = balls.is_empty() && coarse.is_empty();
            for b in &balls {
                let d = space.ideal_distance(p, &b.center)?;
                if d < b.radius() + &half {
                    near = true;
                    break;
                }
            }
            if !near {
                return Ok(false);
            }
        }
        let stage = self.cd.stage(g, fuel)?;
        if !cert_covers(space, &stage, g, &balls, fuel)? {
            return Ok(false);
        }
        if self.require_meets {
            for b in &balls {
                if !cert_ball_meets(space, &stage, g, b, fuel)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

fn cover_sweep_name(sweep: Arc<CoverSweep>) -> Name {
    Name::from_fn(move |pos, fuel| {
        let (c, s) = unpair(pos);
        let g = sweep_grade(s);
        for gp in 0..g {
            if sweep.cert(c, gp, fuel)? {
                return Ok(BigUint::zero());
            }
        }
        if s > SWEEP_GRADE_CAP as u64 {
            // Grades repeat beyond the cap; only the first such step emits.
            return Ok(BigUint::zero());
        }
        if sweep.cert(c, g, fuel)? {
            Ok(BigUint::from(c) + 1u32)
        } else {
            Ok(BigUint::zero())
        }
    })
}

/// A compact set by a listing of its ideal covers.
#[derive(Clone)]
pub struct CoverName {
    space: SpaceDescriptor,
    name: Name,
    backing: Option<Arc<dyn CompactData>>,
}

/// A compact set by a listing of the covers all of whose balls meet it.
#[derive(Clone)]
pub struct MinCoverName {
    space: SpaceDescriptor,
    name: Name,
    backing: Option<Arc<dyn CompactData>>,
}

impl CoverName {
    pub fn from_name(space: SpaceDescriptor, name: Name) -> CoverName {
        CoverName { space, name, backing: None }
    }

    pub fn from_compact(cd: Arc<dyn CompactData>) -> CoverName {
        let space = cd.space().clone();
        let sweep =
            Arc::new(CoverSweep { cd: cd.clone(), require_meets: false, cache: Mutex::new(HashMap::new()) });
        CoverName { space, name: cover_sweep_name(sweep), backing: Some(cd) }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn name(&self) -> &Name {
        &self.name
    }

    pub fn backing(&self) -> Option<&Arc<dyn CompactData>> {
        self.backing.as_ref()
    }

    /// Covers announced at positions < `upto`.
    pub fn covers_upto(&self, upto: u64, fuel: &mut Fuel) -> RunResult<Vec<Vec<IdealBall>>> {
        let mut out = Vec::new();
        for pos in 0..upto {
            let s = self.name.at(pos, fuel)?;
            if !s.is_zero() {
                out.push(decode_cover(&self.space, &(s - 1u32))?);
            }
        }
        Ok(out)
    }
}

impl MinCoverName {
    pub fn from_name(space: SpaceDescriptor, name: Name) -> MinCoverName {
        MinCoverName { space, name, backing: None }
    }

    pub fn from_compact(cd: Arc<dyn CompactData>) -> MinCoverName {
        let space = cd.space().clone();
        let sweep =
            Arc::new(CoverSweep { cd: cd.clone(), require_meets: true, cache: Mutex::new(HashMap::new()) });
        MinCoverName { space, name: cover_sweep_name(sweep), backing: Some(cd) }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn name(&self) -> &Name {
        &self.name
    }

    pub fn backing(&self) -> Option<&Arc<dyn CompactData>> {
        self.backing.as_ref()
    }

    pub fn covers_upto(&self, upto: u64, fuel: &mut Fuel) -> RunResult<Vec<Vec<IdealBall>>> {
        let mut out = Vec::new();
        for pos in 0..upto {
            let s = self.name.at(pos, fuel)?;
            if !s.is_zero() {
                out.push(decode_cover(&self.space, &(s - 1u32))?);
            }
        }
        Ok(out)
    }

    /// Emptiness is decidable here: the empty cover is listed exactly for
    /// the empty set, and some cover is listed for every set.
    pub fn decide_empty(&self, fuel: &mut Fuel) -> RunResult<bool> {
        if let Some(cd) = &self.backing {
            return cd.is_empty(fuel);
        }
        for pos in 0.. {
            let s = self.name.at(pos, fuel)?;
            if !s.is_zero() {
                return Ok((s - 1u32).is_zero());
            }
        }
        unreachable!()
    }

    /// The compact set behind this name as a stage provider.
    pub fn compact_data(&self) -> Arc<dyn CompactData> {
        match &self.backing {
            Some(cd) => cd.clone(),
            None => Arc::new(StagesFromMinCover {
                space: self.space.clone(),
                name: self.name.clone(),
            }),
        }
    }

    /// The canonical min-cover name of the empty set: the padded listing
    /// announcing only the empty cover.
    pub fn empty(space: SpaceDescriptor) -> MinCoverName {
        let cd: Arc<dyn CompactData> = Arc::new(FinitePointsCompact::new(space.clone(), Vec::new()));
        MinCoverName::from_compact(cd)
    }
}

/// Stage provider for a raw min-cover stream: stage k scans the listing
/// for a cover with all radii below 2^{-k-1} and takes its centers.
struct StagesFromMinCover {
    space: SpaceDescriptor,
    name: Name,
}

impl CompactData for StagesFromMinCover {
    fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    fn is_empty(&self, fuel: &mut Fuel) -> RunResult<bool> {
        for pos in 0.. {
            let s = self.name.at(pos, fuel)?;
            if !s.is_zero() {
                return Ok((s - 1u32).is_zero());
            }
        }
        unreachable!()
    }

    fn stage(&self, k: u32, fuel: &mut Fuel) -> RunResult<Vec<BigUint>> {
        let bound = pow2_neg(k + 1);
        for pos in 0.. {
            let s = self.name.at(pos, fuel)?;
            if s.is_zero() {
                continue;
            }
            let cover = decode_cover(&self.space, &(s - 1u32))?;
            if cover.iter().all(|b| b.radius() < bound) {
                return Ok(cover.into_iter().map(|b| b.center).collect());
            }
        }
        unreachable!()
    }
}

// ---------------------------------------------------------------------------
// Compact sets: Hausdorff names.

/// A compact set as a fast-converging stream of finite ideal-point sets:
/// position i carries a finite-set code, and demanded positions satisfy
/// d_H(F_i, F_j) < 2^{-min(i,j)} exactly.
#[derive(Clone)]
pub struct HausdorffName {
    space: SpaceDescriptor,
    name: Name,
    backing: Option<Arc<dyn CompactData>>,
    checked: Arc<Mutex<Vec<(u64, Vec<u64>)>>>,
}

/// Exact Hausdorff distance between finite ideal sets; `None` when exactly
/// one side is empty.
pub fn finite_hausdorff(
    space: &SpaceDescriptor,
    a: &[u64],
    b: &[u64],
) -> RunResult<Option<BigRational>> {
    if a.is_empty() && b.is_empty() {
        return Ok(Some(BigRational::zero()));
    }
    if a.is_empty() || b.is_empty() {
        return Ok(None);
    }
    let mut worst = BigRational::zero();
    let one_sided = |xs: &[u64], ys: &[u64], worst: &mut BigRational| -> RunResult<()> {
        for x in xs {
            let xc = BigUint::from(*x);
            let mut best: Option<BigRational> = None;
            for y in ys {
                let d = space.ideal_distance(&xc, &BigUint::from(*y))?;
                best = Some(match best.take() {
                    None => d,
                    Some(b) => b.min(d),
                });
            }
            let best = best.unwrap();
            if best > *worst {
                *worst = best;
            }
        }
        Ok(())
    };
    one_sided(a, b, &mut worst)?;
    one_sided(b, a, &mut worst)?;
    Ok(Some(worst))
}

impl HausdorffName {
    pub fn from_name(space: SpaceDescriptor, name: Name) -> HausdorffName {
        HausdorffName { space, name, backing: None, checked: Arc::new(Mutex::new(Vec::new())) }
    }

    pub fn from_compact(cd: Arc<dyn CompactData>) -> HausdorffName {
        let space = cd.space().clone();
        let cdc = cd.clone();
        let name = Name::from_fn(move |pos, fuel| {
            let k = u32::try_from(pos).map_err(|_| RunError::OutOfFuel)?;
            let stage = cdc.stage(k + 1, fuel)?;
            let mut members = Vec::with_capacity(stage.len());
            for c in &stage {
                members.push(u64::try_from(c).map_err(|_| {
                    RunError::Violation("stage point code does not fit a set code".into())
                })?);
            }
            Ok(finite_set_code(&members))
        });
        HausdorffName { space, name, backing: Some(cd), checked: Arc::new(Mutex::new(Vec::new())) }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn name(&self) -> &Name {
        &self.name
    }

    pub fn backing(&self) -> Option<&Arc<dyn CompactData>> {
        self.backing.as_ref()
    }

    /// The finite stage at a position, validated against every stage
    /// demanded so far.
    pub fn stage_set(&self, k: u64, fuel: &mut Fuel) -> RunResult<Vec<u64>> {
        let code = self.name.at(k, fuel)?;
        let members = finite_set_members(&code);
        let mut checked = self.checked.lock().unwrap();
        for (j, other) in checked.iter() {
            if *j == k {
                continue;
            }
            let bound = pow2_neg((*j).min(k).min(u64::from(u32::MAX)) as u32);
            match finite_hausdorff(&self.space, &members, other)? {
                Some(d) if d < bound => {}
                _ => {
                    return Err(RunError::Violation(
                        "finite stages drift beyond the promised modulus".into(),
                    ));
                }
            }
        }
        if !checked.iter().any(|(j, _)| *j == k) {
            checked.push((k, members.clone()));
        }
        Ok(members)
    }

    pub fn compact_data(&self) -> Arc<dyn CompactData> {
        match &self.backing {
            Some(cd) => cd.clone(),
            None => Arc::new(StagesFromHausdorff { inner: self.clone() }),
        }
    }
}

struct StagesFromHausdorff {
    inner: HausdorffName,
}

impl CompactData for StagesFromHausdorff {
    fn space(&self) -> &SpaceDescriptor {
        self.inner.space()
    }

    fn is_empty(&self, fuel: &mut Fuel) -> RunResult<bool> {
        // An empty stage anywhere forces the set empty, and conversely.
        Ok(self.inner.stage_set(0, fuel)?.is_empty())
    }

    fn stage(&self, k: u32, fuel: &mut Fuel) -> RunResult<Vec<BigUint>> {
        let members = self.inner.stage_set(k as u64 + 1, fuel)?;
        Ok(members.into_iter().map(BigUint::from).collect())
    }
}

// ---------------------------------------------------------------------------
// Compact sets: range-prime names.

/// A nonempty compact set as a dense point listing with net counters:
/// `⟨q, p⁰, p¹, …⟩` where the points indexed up to `q_i` form a 2^{-i}-net.
#[derive(Clone)]
pub struct RangePrimeName {
    space: SpaceDescriptor,
    q: Name,
    points: Name,
    backing: Option<Arc<dyn CompactData>>,
}

/// Chains through the stages of a compact set: every component starts at a
/// stage point and follows nearby points of finer and finer stages, so its
/// positions form a valid Cauchy name of a member of the set.
struct ChainTable {
    cd: Arc<dyn CompactData>,
    stages: Mutex<Vec<Vec<BigUint>>>,
    chains: Mutex<HashMap<u64, Vec<BigUint>>>,
}

impl ChainTable {
    fn new(cd: Arc<dyn CompactData>) -> ChainTable {
        ChainTable { cd, stages: Mutex::new(Vec::new()), chains: Mutex::new(HashMap::new()) }
    }

    fn stage_vec(&self, t: u32, fuel: &mut Fuel) -> RunResult<Vec<BigUint>> {
        {
            let stages = self.stages.lock().unwrap();
            if let Some(v) = stages.get(t as usize) {
                return Ok(v.clone());
            }
        }
        let mut next = self.stages.lock().unwrap().len() as u32;
        while next <= t {
            let v = self.cd.stage(next, fuel)?;
            let mut stages = self.stages.lock().unwrap();
            if stages.len() as u32 == next {
                stages.push(v);
            }
            next = stages.len() as u32;
        }
        Ok(self.stages.lock().unwrap()[t as usize].clone())
    }

    /// Which stage a component starts in, and at which member.
    fn locate(&self, comp: u64, fuel: &mut Fuel) -> RunResult<(u32, usize)> {
        if self.cd.is_empty(fuel)? {
            return Err(RunError::Violation("range name of the empty set".into()));
        }
        let mut cum: u64 = 0;
        for t in 0..=60u32 {
            let n = self.stage_vec(t, fuel)?.len() as u64;
            if comp < cum + n {
                return Ok((t, (comp - cum) as usize));
            }
            cum += n;
        }
        Err(RunError::OutOfFuel)
    }

    /// Total components through stage `t`, as the q stream reports them.
    fn cum_through(&self, t: u32, fuel: &mut Fuel) -> RunResult<u64> {
        if self.cd.is_empty(fuel)? {
            return Err(RunError::Violation("range name of the empty set".into()));
        }
        let mut cum: u64 = 0;
        for s in 0..=t {
            cum += self.stage_vec(s, fuel)?.len() as u64;
        }
        Ok(cum)
    }

    /// The chain value of a component at stage depth `t` (clamped to the
    /// component's start).
    fn chain_value(&self, comp: u64, t: u32, fuel: &mut Fuel) -> RunResult<BigUint> {
        let (k, m) = self.locate(comp, fuel)?;
        let start = self.stage_vec(k, fuel)?[m].clone();
        if t <= k {
            return Ok(start);
        }
        let space = self.cd.space().clone();
        let three = BigRational::from_integer(3.into());
        loop {
            let have = {
                let chains = self.chains.lock().unwrap();
                chains.get(&comp).map(|v| v.len()).unwrap_or(1)
            };
            if have > (t - k) as usize {
                let chains = self.chains.lock().unwrap();
                return Ok(chains[&comp][(t - k) as usize].clone());
            }
            // Extend by one step: from the value at stage k+have-1, find a
            // stage-(k+have) point within 3·2^{-(k+have-1)-2}.
            let cur = {
                let chains = self.chains.lock().unwrap();
                match chains.get(&comp) {
                    Some(v) => v.last().unwrap().clone(),
                    None => start.clone(),
                }
            };
            let s_cur = k + have as u32 - 1;
            let next_stage = self.stage_vec(s_cur + 1, fuel)?;
            let bound = &three * pow2_neg(s_cur + 2);
            let mut found: Option<BigUint> = None;
            for z in &next_stage {
                fuel.tick()?;
                if space.ideal_distance(&cur, z)? <= bound {
                    found = Some(z.clone());
                    break;
                }
            }
            let z = found.ok_or_else(|| {
                RunError::Violation("stages too far apart to chain through".into())
            })?;
            let mut chains = self.chains.lock().unwrap();
            let entry = chains.entry(comp).or_insert_with(|| vec![start.clone()]);
            if entry.len() == have {
                entry.push(z);
            }
        }
    }
}

impl RangePrimeName {
    pub fn from_parts(space: SpaceDescriptor, q: Name, points: Name) -> RangePrimeName {
        RangePrimeName { space, q, points, backing: None }
    }

    /// Build the chain-based name of a nonempty compact set.  Component i
    /// follows the chain started at the i-th stage point (stages taken in
    /// order); its Cauchy position j carries the chain value at depth j+2.
    pub fn from_compact(cd: Arc<dyn CompactData>) -> RangePrimeName {
        let space = cd.space().clone();
        let table = Arc::new(ChainTable::new(cd.clone()));
        let tq = table.clone();
        let q = Name::from_fn(move |pos, fuel| {
            let k = u32::try_from(pos).map_err(|_| RunError::OutOfFuel)?;
            let cum = tq.cum_through(k + 3, fuel)?;
            Ok(BigUint::from(cum - 1))
        });
        let tp = table.clone();
        let points = Name::tuple_countable(move |i| {
            let t = tp.clone();
            Name::from_fn(move |j, fuel| {
                let depth = u32::try_from(j).map_err(|_| RunError::OutOfFuel)?.saturating_add(2);
                t.chain_value(i, depth, fuel)
            })
        });
        RangePrimeName { space, q, points, backing: Some(cd) }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn q_name(&self) -> &Name {
        &self.q
    }

    pub fn points_name(&self) -> &Name {
        &self.points
    }

    pub fn backing(&self) -> Option<&Arc<dyn CompactData>> {
        self.backing.as_ref()
    }

    /// The whole name as one stream: the counter paired with the points.
    pub fn as_name(&self) -> Name {
        Name::tuple2(&self.q, &self.points)
    }

    /// Index of the last point of the 2^{-k}-net.
    pub fn net_index(&self, k: u64, fuel: &mut Fuel) -> RunResult<u64> {
        let v = self.q.at(k, fuel)?;
        u64::try_from(&v).map_err(|_| RunError::Violation("net counter overflows".into()))
    }

    /// The listed point at a component index.
    pub fn point(&self, i: u64) -> CauchyName {
        CauchyName::from_name(self.space.clone(), self.points.project_countable(i))
    }

    pub fn compact_data(&self) -> Arc<dyn CompactData> {
        match &self.backing {
            Some(cd) => cd.clone(),
            None => Arc::new(StagesFromRangePrime { inner: self.clone() }),
        }
    }
}

struct StagesFromRangePrime {
    inner: RangePrimeName,
}

impl CompactData for StagesFromRangePrime {
    fn space(&self) -> &SpaceDescriptor {
        self.inner.space()
    }

    fn is_empty(&self, _fuel: &mut Fuel) -> RunResult<bool> {
        // Range-prime names denote nonempty sets by convention.
        Ok(false)
    }

    fn stage(&self, k: u32, fuel: &mut Fuel) -> RunResult<Vec<BigUint>> {
        // The 2^{-k-2}-net approximated at Cauchy depth k+3 is two-sided
        // within 2^{-k-2} + 2^{-k-3} < 2^{-k-1}.
        let n = self.inner.net_index(k as u64 + 2, fuel)?;
        let mut out = Vec::new();
        for i in 0..=n {
            let p = self.inner.point(i);
            out.push(p.point_code_at(k as u64 + 3, fuel)?);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// The translation triangle.

pub fn hausdorff_to_rangeprime(h: &HausdorffName) -> RangePrimeName {
    RangePrimeName::from_compact(h.compact_data())
}

pub fn rangeprime_to_mincover(r: &RangePrimeName) -> MinCoverName {
    MinCoverName::from_compact(r.compact_data())
}

pub fn mincover_to_hausdorff(m: &MinCoverName) -> HausdorffName {
    HausdorffName::from_compact(m.compact_data())
}

// ---------------------------------------------------------------------------
// Intersection with a closed set, on the cover side.

/// Covers of `A ∩ K` from a closed name of A and a cover name of K.
///
/// A cover v is listed when some listed cover u of K refines into it ball
/// by ball: each ball of u sits formally inside a listed complement ball of
/// A or formally inside some ball of v.
pub fn pi_cap_compact(a: &ClosedName, k: &CoverName) -> CoverName {
    let space = k.space().clone();
    let exact = match (a.exact(), k.backing().and_then(|cd| cd.exact_cylset())) {
        (Some(aset), Some(kset)) => Some(aset.intersect(&kset)),
        _ => None,
    };
    let covers = Arc::new(CoverListing::new(space.clone(), k.name().clone()));
    let compl = Arc::new(BallListing::new(a.complement_name().name().clone()));
    let sp = space.clone();
    let cert = move |v: &[IdealBall], s: u64, fuel: &mut Fuel| -> RunResult<bool> {
        let h = sweep_horizon(s);
        let us = covers.upto(h, fuel)?;
        let cs = compl.upto(h, fuel)?;
        'us: for u in &us {
            fuel.tick()?;
            for b in u {
                let mut absorbed = false;
                for c in &cs {
                    fuel.tick()?;
                    if formally_inside(&sp, b, c)? {
                        absorbed = true;
                        break;
                    }
                }
                if !absorbed {
                    for vb in v {
                        fuel.tick()?;
                        if formally_inside(&sp, b, vb)? {
                            absorbed = true;
                            break;
                        }
                    }
                }
                if !absorbed {
                    continue 'us;
                }
            }
            return Ok(true);
        }
        Ok(false)
    };
    let cache: Mutex<HashMap<(u64, u64), bool>> = Mutex::new(HashMap::new());
    let space2 = space.clone();
    let name = Name::from_fn(move |pos, fuel| {
        let (vc, s) = unpair(pos);
        let v = match decode_cover_candidate(&space2, &BigUint::from(vc)) {
            Some(v) => v,
            None => return Ok(BigUint::zero()),
        };
        let check = |s: u64, fuel: &mut Fuel| -> RunResult<bool> {
            let key = (vc, sweep_horizon(s));
            if let Some(&r) = cache.lock().unwrap().get(&key) {
                return Ok(r);
            }
            let r = cert(&v, s, fuel)?;
            cache.lock().unwrap().insert(key, r);
            Ok(r)
        };
        for sp_ in 0..s {
            if check(sp_, fuel)? {
                return Ok(BigUint::zero());
            }
        }
        if check(s, fuel)? {
            Ok(BigUint::from(vc) + 1u32)
        } else {
            Ok(BigUint::zero())
        }
    });
    let mut out = CoverName::from_name(space, name);
    if let Some(set) = exact {
        out.backing = Some(Arc::new(CylCompact::new(set)));
    }
    out
}

// ---------------------------------------------------------------------------
// Preimages under real-valued functions.

/// The open preimage f⁻¹(V) for V ⊆ ℝ open.
///
/// A ball b is listed when interval evaluation of f over b certifies the
/// value range inside a listed rational interval of V.
pub fn preimage_open(f: Arc<dyn RealFn>, v: &OpenName) -> OpenName {
    // Interval evaluation past this grade rarely narrows a verdict but
    // always costs exponentially more subdivisions.
    const PREC_CAP: u32 = 8;
    let space = f.space().clone();
    let listing = Arc::new(BallListing::new(v.name().clone()));
    let cache: Mutex<HashMap<(u64, u32, u64), bool>> = Mutex::new(HashMap::new());
    let bounds_cache: Mutex<HashMap<(u64, u32), (BigRational, BigRational)>> =
        Mutex::new(HashMap::new());
    let space2 = space.clone();
    let name = Name::from_fn(move |pos, fuel| {
        let (bc, s) = unpair(pos);
        let ball = match sweep_candidate_ball(&space2, bc) {
            Some(b) => b,
            None => return Ok(BigUint::zero()),
        };
        let check = |s: u64, fuel: &mut Fuel| -> RunResult<bool> {
            let prec = sweep_grade(s).min(PREC_CAP);
            let h = sweep_horizon(s);
            let key = (bc, prec, h);
            if let Some(&r) = cache.lock().unwrap().get(&key) {
                return Ok(r);
            }
            let intervals = listing.upto(h, fuel)?;
            let r = if intervals.is_empty() {
                false
            } else {
                let (lo, hi) = {
                    let hit = bounds_cache.lock().unwrap().get(&(bc, prec)).cloned();
                    match hit {
                        Some(b) => b,
                        None => {
                            let b = f.bounds_ball(&ball, prec, fuel)?;
                            bounds_cache.lock().unwrap().insert((bc, prec), b.clone());
                            b
                        }
                    }
                };
                let mut hit = false;
                for iv in &intervals {
                    fuel.tick()?;
                    let c = nu_q(&iv.center);
                    let r_ = iv.radius();
                    if &c - &r_ < lo && hi < &c + &r_ {
                        hit = true;
                        break;
                    }
                }
                hit
            };
            cache.lock().unwrap().insert(key, r);
            Ok(r)
        };
        for sp_ in 0..s {
            if check(sp_, fuel)? {
                return Ok(BigUint::zero());
            }
        }
        if check(s, fuel)? {
            Ok(ball.code() + 1u32)
        } else {
            Ok(BigUint::zero())
        }
    });
    OpenName { space, name, exact: None }
}

/// The closed preimage f⁻¹(V) for V ⊆ ℝ closed, via the complement.
pub fn preimage_closed(f: Arc<dyn RealFn>, v_complement: &OpenName) -> ClosedName {
    preimage_open(f, v_complement).complement()
}

// ---------------------------------------------------------------------------
// Finite tuples of names.

/// A length-prefixed tuple of names: the count, then the interleaving of
/// the components.  Count zero is the empty word of names.
#[derive(Clone)]
pub struct StarName {
    count: u64,
    parts: Vec<Name>,
}

impl StarName {
    pub fn new(parts: Vec<Name>) -> StarName {
        StarName { count: parts.len() as u64, parts }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn part(&self, i: u64) -> Option<&Name> {
        self.parts.get(usize::try_from(i).ok()?)
    }

    /// Serialize: position 0 is the count, position 1+m the countable
    /// tupling of the parts (ignored components constant zero).
    pub fn as_name(&self) -> Name {
        let count = self.count;
        let parts = self.parts.clone();
        let inner = Name::tuple_countable(move |i| {
            parts
                .get(usize::try_from(i).unwrap_or(usize::MAX))
                .cloned()
                .unwrap_or_else(|| Name::constant(0))
        });
        Name::from_fn(move |pos, fuel| {
            if pos == 0 {
                Ok(BigUint::from(count))
            } else {
                inner.at(pos - 1, fuel)
            }
        })
    }

    /// Deserialize a star layout back into count and component views.
    pub fn from_name(name: &Name, fuel: &mut Fuel) -> RunResult<StarName> {
        let count = u64::try_from(&name.at(0, fuel)?)
            .map_err(|_| RunError::Violation("tuple count overflows".into()))?;
        let body = {
            let name = name.clone();
            Name::from_fn(move |pos, fuel| name.at(pos + 1, fuel))
        };
        let parts = (0..count).map(|i| body.project_countable(i)).collect();
        Ok(StarName { count, parts })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::names::{empty_word_code, pair};
    use num::One;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn w(s: &str) -> CWord {
        CWord::parse(s).expect("test word")
    }

    fn big_fuel() -> Fuel {
        Fuel::new(50_000_000)
    }

    #[test]
    fn complement_retags_streams_and_tracks_exact_values() {
        let mut fuel = big_fuel();
        // The empty open name's complement is everything.
        let e = OpenName::empty(SpaceDescriptor::cantor());
        let c = e.complement();
        assert!(c.exact().unwrap().is_full());

        // The open ball about 0^ω of radius 1/2 pins two digits: it is the
        // [00] cylinder, and its complement splits into [01] and [1].
        let ball = IdealBall::new(CWord::root().ideal_code(), &rat(1, 2));
        let u = OpenName::from_balls(SpaceDescriptor::cantor(), vec![ball.clone()]);
        assert_eq!(u.exact().unwrap(), &CylSet::cylinder(w("00")));
        let compl = u.clone().complement().exact().unwrap();
        assert_eq!(compl, CylSet::from_cylinders([w("01"), w("1")]));

        // The closed ball of the same radius is the [0] cylinder, whose
        // complement is the [1] cylinder.
        let cw = cantor_ball_word(&ball, true).unwrap();
        assert_eq!(cw, w("0"));
        let closed = ClosedName::from_cylset(&CylSet::cylinder(cw));
        assert_eq!(
            closed.complement_name().exact().unwrap(),
            &CylSet::cylinder(w("1"))
        );

        // Double complement is the identity on the underlying stream.
        let back = u.clone().complement().complement();
        for pos in 0..16 {
            assert_eq!(
                back.name().at(pos, &mut fuel).unwrap(),
                u.name().at(pos, &mut fuel).unwrap()
            );
        }
    }

    #[test]
    fn cylset_round_trips_through_ball_streams() {
        let mut fuel = big_fuel();
        let set = CylSet::from_cylinders([w("01"), w("11")]);
        let u = OpenName::from_cylset(&set);
        let balls = u.balls_upto(40, &mut fuel).unwrap();
        let mut rebuilt = CylSet::empty();
        for b in &balls {
            rebuilt = rebuilt.union(&CylSet::cylinder(cantor_ball_word(b, false).unwrap()));
        }
        assert_eq!(rebuilt, set);
    }

    #[test]
    fn clopen_membership_is_decided_both_ways() {
        let mut fuel = big_fuel();
        let a = ClopenName::from_cylset(&CylSet::cylinder(w("0")));
        let inside = CauchyName::from_ideal(SpaceDescriptor::cantor(), &w("001").ideal_code());
        let outside = CauchyName::from_ideal(SpaceDescriptor::cantor(), &w("11").ideal_code());
        assert!(a.decide_point(&inside, &mut fuel).unwrap());
        assert!(!a.decide_point(&outside, &mut fuel).unwrap());
        let b = a.clone().complement();
        assert!(!b.decide_point(&inside, &mut fuel).unwrap());
        assert!(b.decide_point(&outside, &mut fuel).unwrap());
    }

    #[test]
    fn open_intersection_prefers_exact_values() {
        let a = OpenName::from_cylset(&CylSet::from_cylinders([w("0"), w("10")]));
        let b = OpenName::from_cylset(&CylSet::from_cylinders([w("00"), w("1")]));
        let i = a.intersection(&b);
        assert_eq!(
            i.exact().unwrap(),
            &CylSet::from_cylinders([w("00"), w("10")])
        );
    }

    #[test]
    fn raw_open_intersection_emits_certified_balls() {
        let mut fuel = big_fuel();
        // Strip exactness to force the sweeping path.
        let a = OpenName::from_name(
            SpaceDescriptor::cantor(),
            OpenName::from_cylset(&CylSet::cylinder(w("0"))).name().clone(),
        );
        let b = OpenName::from_name(
            SpaceDescriptor::cantor(),
            OpenName::from_cylset(&CylSet::full()).name().clone(),
        );
        let i = a.intersection(&b);
        let mut found = Vec::new();
        for pos in 0..40_000u64 {
            if let Some(ball) = i.ball_at(pos, &mut fuel).unwrap() {
                found.push(cantor_ball_word(&ball, false).unwrap());
            }
        }
        assert!(!found.is_empty(), "no certified balls in the scan window");
        for cw in &found {
            assert!(w("0").is_prefix_of(cw), "ball [{cw}] escapes the intersection");
        }
    }

    #[test]
    fn cover_sweep_lists_valid_covers_and_only_those() {
        let mut fuel = big_fuel();
        let cd: Arc<dyn CompactData> = Arc::new(CylCompact::new(CylSet::full()));
        let mc = MinCoverName::from_compact(cd);
        let covers = mc.covers_upto(6_000, &mut fuel).unwrap();
        assert!(!covers.is_empty(), "no covers surfaced in the scan window");
        for cover in &covers {
            assert!(!cover.is_empty());
            let mut union = CylSet::empty();
            for b in cover {
                union = union.union(&CylSet::cylinder(cantor_ball_word(b, false).unwrap()));
            }
            assert!(union.is_full(), "listed cover misses part of the space");
        }
        assert!(!mc.decide_empty(&mut fuel).unwrap());
    }

    #[test]
    fn empty_set_lists_exactly_the_empty_cover_first() {
        let mut fuel = big_fuel();
        let mc = MinCoverName::empty(SpaceDescriptor::cantor());
        assert!(mc.decide_empty(&mut fuel).unwrap());
        let covers = mc.covers_upto(300, &mut fuel).unwrap();
        assert!(covers.iter().all(|c| c.is_empty()));
        assert!(!covers.is_empty());
        // Position pair(0,0) = 0 announces the empty cover immediately.
        assert_eq!(mc.name().at(0, &mut fuel).unwrap(), BigUint::one());
        assert_eq!(empty_word_code(), BigUint::zero());
    }

    #[test]
    fn two_point_set_never_gets_a_small_single_ball_cover() {
        let mut fuel = big_fuel();
        let cd: Arc<dyn CompactData> = Arc::new(FinitePointsCompact::new(
            SpaceDescriptor::cantor(),
            vec![CWord::root().ideal_code(), w("1").ideal_code()],
        ));
        let mc = MinCoverName::from_compact(cd);
        let covers = mc.covers_upto(6_000, &mut fuel).unwrap();
        assert!(!covers.is_empty());
        for cover in &covers {
            if cover.len() == 1 {
                assert!(
                    cover[0].radius() >= rat(1, 2),
                    "a single small ball cannot hold both points"
                );
            }
        }
    }

    #[test]
    fn hausdorff_names_validate_their_modulus() {
        let mut fuel = big_fuel();
        // Constant singleton stages: the code of {⟨ε⟩} is 2^0 = 1.
        let cd: Arc<dyn CompactData> = Arc::new(FinitePointsCompact::new(
            SpaceDescriptor::cantor(),
            vec![CWord::root().ideal_code()],
        ));
        let h = HausdorffName::from_compact(cd);
        assert_eq!(h.name().at(0, &mut fuel).unwrap(), BigUint::one());
        assert_eq!(h.stage_set(3, &mut fuel).unwrap(), vec![0]);

        // A stream whose stages jump apart violates the modulus.
        let jumping = HausdorffName::from_name(
            SpaceDescriptor::cantor(),
            Name::from_fn(|pos, _| {
                let code = if pos % 2 == 0 { CWord::root() } else { w("1") };
                Ok(finite_set_code(&[u64::try_from(&code.ideal_code()).unwrap()]))
            }),
        );
        jumping.stage_set(2, &mut fuel).unwrap();
        assert!(matches!(
            jumping.stage_set(3, &mut fuel),
            Err(RunError::Violation(_))
        ));
    }

    #[test]
    fn triangle_singleton_covers_all_contain_the_point() {
        let mut fuel = big_fuel();
        let cd: Arc<dyn CompactData> = Arc::new(FinitePointsCompact::new(
            SpaceDescriptor::cantor(),
            vec![CWord::root().ideal_code()],
        ));
        let h = HausdorffName::from_compact(cd);
        let r = hausdorff_to_rangeprime(&h);
        let mc = rangeprime_to_mincover(&r);
        let covers = mc.covers_upto(4_000, &mut fuel).unwrap();
        assert!(!covers.is_empty());
        let origin = CWord::root().ideal_code();
        for cover in &covers {
            for b in cover {
                let d = SpaceDescriptor::cantor().ideal_distance(&b.center, &origin).unwrap();
                assert!(d < b.radius(), "listed ball avoids the named point");
            }
        }
        // Closing the triangle lands near the singleton again.
        let h2 = mincover_to_hausdorff(&mc);
        let stage = h2.stage_set(3, &mut fuel).unwrap();
        assert!(!stage.is_empty());
        for m in &stage {
            let d = SpaceDescriptor::cantor()
                .ideal_distance(&BigUint::from(*m), &origin)
                .unwrap();
            assert!(d <= rat(1, 16));
        }
    }

    #[test]
    fn triangle_whole_space_stages_stay_dense() {
        let mut fuel = big_fuel();
        let cd: Arc<dyn CompactData> = Arc::new(CylCompact::new(CylSet::full()));
        let h = HausdorffName::from_compact(cd);
        let r = hausdorff_to_rangeprime(&h);
        // Strip the backing so the stage really goes through the chain
        // streams rather than the accelerator behind them.
        let raw = RangePrimeName::from_parts(
            SpaceDescriptor::cantor(),
            r.q_name().clone(),
            r.points_name().clone(),
        );
        let stage = raw.compact_data().stage(0, &mut fuel).unwrap();
        assert!(!stage.is_empty());
        for prefix in [w("0"), w("1")] {
            let hit = stage.iter().any(|c| {
                let cw = CWord::from_ideal_code(c).unwrap();
                prefix.is_prefix_of(&cw) || cw.point_in_cylinder(&prefix)
            });
            assert!(hit, "stage misses the [{prefix}] half");
        }
        // And each listed point is a valid Cauchy name.
        let p0 = r.point(0);
        p0.point_code_at(4, &mut fuel).unwrap();
    }

    #[test]
    fn raw_mincover_streams_yield_stages_when_fine_covers_are_listed() {
        let mut fuel = big_fuel();
        let space = SpaceDescriptor::cantor();
        // A hand-built listing of single-ball covers of {0^ω} with radius
        // 3·2^{-t-1} at position t: fine covers appear early, so the raw
        // stage scan succeeds without a backing accelerator.
        let three = BigRational::from_integer(3.into());
        let covers: Vec<BigUint> = (0..12u32)
            .map(|t| {
                let r = &three * pow2_neg(t + 1);
                encode_cover(&[IdealBall::new(CWord::root().ideal_code(), &r)])
            })
            .collect();
        let mc = MinCoverName::from_name(space, crate::names::padded_from_list(covers));
        assert!(!mc.decide_empty(&mut fuel).unwrap());
        let h = mincover_to_hausdorff(&mc);
        let stage = h.stage_set(1, &mut fuel).unwrap();
        assert_eq!(stage, vec![u64::try_from(&CWord::root().ideal_code()).unwrap()]);
    }

    #[test]
    fn pi_cap_restricts_covers_to_the_intersection() {
        let mut fuel = big_fuel();
        let a = ClosedName::from_cylset(&CylSet::cylinder(w("0")));
        let kcd: Arc<dyn CompactData> = Arc::new(CylCompact::new(CylSet::full()));
        let k = CoverName::from_compact(kcd);
        let out = pi_cap_compact(&a, &k);
        assert_eq!(
            out.backing().unwrap().exact_cylset().unwrap(),
            CylSet::cylinder(w("0"))
        );
        let covers = out.covers_upto(6_000, &mut fuel).unwrap();
        assert!(!covers.is_empty(), "no covers of the intersection surfaced");
        for cover in &covers {
            let mut union = CylSet::empty();
            for b in cover {
                union = union.union(&CylSet::cylinder(cantor_ball_word(b, false).unwrap()));
            }
            assert!(
                CylSet::cylinder(w("0")).subset_of(&union),
                "listed cover misses part of A ∩ K"
            );
        }
    }

    #[test]
    fn pi_cap_of_the_empty_compact_lists_the_empty_cover() {
        let mut fuel = big_fuel();
        let a = ClosedName::from_cylset(&CylSet::full());
        let kcd: Arc<dyn CompactData> =
            Arc::new(FinitePointsCompact::new(SpaceDescriptor::cantor(), Vec::new()));
        let k = CoverName::from_compact(kcd);
        let out = pi_cap_compact(&a, &k);
        let covers = out.covers_upto(50, &mut fuel).unwrap();
        assert!(covers.iter().any(|c| c.is_empty()), "ε cover not listed");
    }

    #[test]
    fn preimage_of_a_distance_function_is_the_far_cylinder() {
        let mut fuel = Fuel::new(200_000_000);
        let f: Arc<dyn RealFn> = Arc::new(crate::realfn::ExprFn::new(
            SpaceDescriptor::cantor(),
            crate::realfn::Expr::dist_to_word(&CWord::root()),
        ));
        // V = (1/2, 3/2) as a single rational interval ball.
        let center = crate::space::nu_q_bar(&rat(1, 1));
        let v = OpenName::from_balls(
            SpaceDescriptor::reals(),
            vec![IdealBall::new(center, &rat(1, 2))],
        );
        let pre = preimage_open(f, &v);
        let mut found = Vec::new();
        for pos in 0..40_000u64 {
            if let Some(ball) = pre.ball_at(pos, &mut fuel).unwrap() {
                found.push(cantor_ball_word(&ball, false).unwrap());
            }
        }
        assert!(!found.is_empty(), "no preimage balls in the scan window");
        for cw in &found {
            assert!(
                w("1").is_prefix_of(cw),
                "preimage ball [{cw}] leaks out of the distant cylinder"
            );
        }
    }

    #[test]
    fn dist_names_bound_distances_from_below() {
        let mut fuel = big_fuel();
        let d = DistName::from_cylset(&CylSet::cylinder(w("1")));
        let x = CauchyName::from_ideal(SpaceDescriptor::cantor(), &CWord::root().ideal_code());
        let lr = d.eval(&x);
        assert!(lr.exceeds(&rat(3, 4), &mut fuel).unwrap());

        let cd: Arc<dyn CompactData> = Arc::new(FinitePointsCompact::new(
            SpaceDescriptor::cantor(),
            vec![CWord::root().ideal_code()],
        ));
        let d2 = DistName::from_compact(cd);
        let y = CauchyName::from_ideal(SpaceDescriptor::cantor(), &w("1").ideal_code());
        let lr2 = d2.eval(&y);
        assert!(lr2.exceeds(&rat(1, 2), &mut fuel).unwrap());
    }

    #[test]
    fn range_names_list_points_and_shift() {
        let mut fuel = big_fuel();
        let space = SpaceDescriptor::cantor();
        let a = CauchyName::from_ideal(space.clone(), &w("0").ideal_code());
        let r = RangeName::from_points(space.clone(), vec![a]);
        assert!(r.point(0, &mut fuel).unwrap().is_some());
        assert!(r.point(1, &mut fuel).unwrap().is_none());
        let b = CauchyName::from_ideal(space.clone(), &w("1").ideal_code());
        let r2 = r.prepend(&b);
        let p0 = r2.point(0, &mut fuel).unwrap().unwrap();
        assert_eq!(p0.point_code_at(2, &mut fuel).unwrap(), w("1").ideal_code());
        let p1 = r2.point(1, &mut fuel).unwrap().unwrap();
        assert_eq!(p1.point_code_at(2, &mut fuel).unwrap(), w("0").ideal_code());
        let e = RangeName::empty(space);
        assert!(e.point(0, &mut fuel).unwrap().is_none());
    }

    #[test]
    fn star_names_round_trip() {
        let mut fuel = big_fuel();
        let s = StarName::new(vec![Name::constant(7), Name::constant(9)]);
        let n = s.as_name();
        let back = StarName::from_name(&n, &mut fuel).unwrap();
        assert_eq!(back.count(), 2);
        assert_eq!(back.part(0).unwrap().at_u64(5, &mut fuel).unwrap(), 7);
        assert_eq!(back.part(1).unwrap().at_u64(3, &mut fuel).unwrap(), 9);
        let empty = StarName::new(Vec::new());
        assert_eq!(StarName::from_name(&empty.as_name(), &mut fuel).unwrap().count(), 0);
        // Sanity: the layout puts the count first, components after.
        assert_eq!(n.at_u64(0, &mut fuel).unwrap(), 2);
        assert_eq!(n.at_u64(1 + pair(0, 0), &mut fuel).unwrap(), 7);
    }
}
