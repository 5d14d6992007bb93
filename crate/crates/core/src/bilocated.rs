//! Splitting compact sets at well-separated levels.
//!
//! `decompose` breaks a compact set into finitely many pieces of small
//! diameter, each named through a growing tower of finite approximations.
//! `avoid_values` threads a real through an interval while keeping a
//! certified rational margin to every member of an enumerated family.
//! `bilocate` combines the two: a level picked away from the extrema of a
//! function on every piece splits the set into two compact level sets
//! with decidable emptiness.  `baire_dense` produces points dense in the
//! part of the space missed by countably many closed obstacles, and
//! `clopen_ball_neighborhood` squeezes a clopen neighborhood of a point
//! between two balls whose radii are certified inside dyadic-free
//! windows.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num::rational::BigRational;
use num::{BigInt, BigUint, One, Signed, Zero};

use crate::cantor::{pow2_neg, CWord, CylSet};
use crate::compactzd::LocatedName;
use crate::fuel::{Fuel, RunError, RunResult};
use crate::hyper::{
    ClopenName, ClosedName, CompactData, CylCompact, DistName, MinCoverName, OpenName,
};
use crate::names::unpair;
use crate::realfn::{EndoFn, RealFn};
use crate::space::{CauchyName, IdealBall, LowerRealName, RealName, SpaceDescriptor, SpaceKind};

fn pow3(e: u32) -> BigUint {
    BigUint::from(3u32).pow(e)
}

/// `3^{-e} 2^{-l}` as an exact rational.
fn third_scale(e: u32, l: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(pow3(e) << (l as usize)))
}

/// Least `m` with `3^m >= 2^e`.
fn stage_for_grade(e: u32) -> u32 {
    let target = BigUint::one() << (e as usize);
    let mut m = 0u32;
    let mut p = BigUint::one();
    while p < target {
        p *= 3u32;
        m += 1;
    }
    m
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact distance from a point to a finite set of ideal points.
fn min_ideal_distance(
    space: &SpaceDescriptor,
    from: &BigUint,
    among: &[BigUint],
    fuel: &mut Fuel,
) -> RunResult<Option<BigRational>> {
    let mut best: Option<BigRational> = None;
    for y in among {
        fuel.tick()?;
        let d = space.ideal_distance(from, y)?;
        if best.as_ref().map_or(true, |b| &d < b) {
            best = Some(d);
        }
    }
    Ok(best)
}

/// Key whose unsigned order is the lexicographic order of the points
/// `w 0^ω`; equal keys mean equal points.
fn cantor_key(w: &CWord) -> u64 {
    let mut key = 0u64;
    for i in 0..w.len() {
        if w.bit(i) {
            key |= 1u64 << (63 - i);
        }
    }
    key
}

// ---------------------------------------------------------------------------
// Piece systems: finitely many growing sets refining a compact set.

/// One absorption during the growth of a piece system.
#[derive(Clone, Debug)]
pub struct GrowthEntry {
    /// The stage the point joined at.
    pub stage: u32,
    /// Which piece absorbed it.
    pub piece: usize,
    /// The absorbed ideal point.
    pub point: BigUint,
    /// Exact distance to the piece before joining; always below
    /// `3^{-stage} 2^{-level}`.
    pub distance: BigRational,
}

struct SystemState {
    stages: Vec<Vec<Vec<BigUint>>>,
    log: Vec<GrowthEntry>,
}

/// A finite family of growing point sets covering a compact set.
///
/// Pieces start from single seed points and only ever absorb points
/// certified within `3^{-i} 2^{-l}` at stage `i`, so each piece stays
/// within `2^{-l-1}` of its seed and its stage-`m` set approximates the
/// piece closure to within `3^{-m} 2^{-l-1}`.  Every refinement point of
/// the underlying set lands in some piece, so the piece closures jointly
/// cover it.
pub struct PieceSystem {
    space: SpaceDescriptor,
    source: Arc<dyn CompactData>,
    level: u32,
    members: bool,
    state: Mutex<SystemState>,
}

impl PieceSystem {
    /// Seed one piece per point of the source's stage-`(l+4)` listing.
    ///
    /// That listing sits within `2^{-l-5}` of the set, well inside the
    /// `3^{-2} 2^{-l}` slack the first absorption round tolerates.
    pub fn new(source: Arc<dyn CompactData>, level: u32, fuel: &mut Fuel) -> RunResult<PieceSystem> {
        let space = source.space().clone();
        let mut seeds = source.stage(level + 4, fuel)?;
        seeds.sort();
        seeds.dedup();
        if seeds.is_empty() {
            return Err(RunError::Violation("cannot split an empty set into pieces".into()));
        }
        let stage0: Vec<Vec<BigUint>> = seeds.into_iter().map(|s| vec![s]).collect();
        Ok(PieceSystem {
            space,
            members: source.points_in_set(),
            source,
            level,
            state: Mutex::new(SystemState { stages: vec![stage0], log: Vec::new() }),
        })
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    /// The scale parameter `l`; piece diameters stay at or below `2^{-l}`.
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Number of pieces; constant across stages.
    pub fn piece_count(&self) -> usize {
        self.state.lock().unwrap().stages[0].len()
    }

    /// Whether listed points are certified members of the source set.
    pub fn lists_members(&self) -> bool {
        self.members
    }

    /// The finite set standing for piece `j` at stage `i`.
    pub fn piece_at(&self, i: u32, j: usize, fuel: &mut Fuel) -> RunResult<Vec<BigUint>> {
        self.ensure_stage(i, fuel)?;
        let st = self.state.lock().unwrap();
        Ok(st.stages[i as usize][j].clone())
    }

    /// Every absorption so far, in the order it was decided.
    pub fn growth_log(&self) -> Vec<GrowthEntry> {
        self.state.lock().unwrap().log.clone()
    }

    /// Grow the stage tower up to index `upto`.
    ///
    /// Stage `i+1` classifies the points of a refinement of the set finer
    /// than `3^{-i-3} 2^{-l}`: a point joins every piece it provably sits
    /// within `3^{-i-1} 2^{-l}` of, and a point absorbed nowhere would
    /// contradict the refinement contract of the source.  Absorbing into
    /// all passing pieces, not just the first, is what keeps points that
    /// are already `3^{-i-2} 2^{-l}`-close to a piece trapped by it one
    /// scale tighter at the next stage.
    fn ensure_stage(&self, upto: u32, fuel: &mut Fuel) -> RunResult<()> {
        loop {
            let (built, frontier) = {
                let st = self.state.lock().unwrap();
                (st.stages.len() as u32, st.stages.last().unwrap().clone())
            };
            if built > upto {
                return Ok(());
            }
            let i = built - 1;
            let grade = self.level + pow3(i + 3).bits() as u32;
            let mut refinement = self.source.stage(grade, fuel)?;
            refinement.sort();
            refinement.dedup();
            let theta = third_scale(i + 1, self.level);
            let mut next = frontier.clone();
            let mut entries = Vec::new();
            if self.space.is_cantor() {
                self.absorb_cantor(i, &frontier, &refinement, &mut next, &mut entries, fuel)?;
            } else {
                self.absorb_generic(i, &theta, &frontier, &refinement, &mut next, &mut entries, fuel)?;
            }
            let mut st = self.state.lock().unwrap();
            if st.stages.len() as u32 == built {
                st.stages.push(next);
                st.log.extend(entries);
            }
        }
    }

    fn absorb_generic(
        &self,
        i: u32,
        theta: &BigRational,
        frontier: &[Vec<BigUint>],
        refinement: &[BigUint],
        next: &mut [Vec<BigUint>],
        entries: &mut Vec<GrowthEntry>,
        fuel: &mut Fuel,
    ) -> RunResult<()> {
        for p in refinement {
            fuel.tick()?;
            let mut landed = false;
            for (j, piece) in frontier.iter().enumerate() {
                let d = min_ideal_distance(&self.space, p, piece, fuel)?
                    .expect("pieces are never empty");
                if &d < theta {
                    landed = true;
                    if !d.is_zero() {
                        next[j].push(p.clone());
                        entries.push(GrowthEntry {
                            stage: i + 1,
                            piece: j,
                            point: p.clone(),
                            distance: d,
                        });
                    }
                }
            }
            if !landed {
                return Err(RunError::Violation(
                    "refinement point certified near no piece".into(),
                ));
            }
        }
        Ok(())
    }

    /// Cantor absorption through one sorted pass: a point is within
    /// `theta` of a piece exactly when they share a prefix of length
    /// `L = bits(3^{i+1} 2^l)`, so the candidates form one contiguous key
    /// range and all distances are powers of two read off shared-prefix
    /// lengths.
    fn absorb_cantor(
        &self,
        i: u32,
        frontier: &[Vec<BigUint>],
        refinement: &[BigUint],
        next: &mut [Vec<BigUint>],
        entries: &mut Vec<GrowthEntry>,
        fuel: &mut Fuel,
    ) -> RunResult<()> {
        let word_of = |code: &BigUint| {
            CWord::from_ideal_code(code)
                .ok_or_else(|| RunError::Violation("point code off Cantor space".into()))
        };
        let mut flat: Vec<(u64, u32)> = Vec::new();
        for (j, piece) in frontier.iter().enumerate() {
            for code in piece {
                flat.push((cantor_key(&word_of(code)?), j as u32));
            }
        }
        flat.sort_unstable();
        let lcp_min = pow3(i + 1).bits() as u32 + self.level;
        let mask = if lcp_min >= 64 { u64::MAX } else { u64::MAX << (64 - lcp_min) };
        let mut best: HashMap<u32, u32> = HashMap::new();
        for code in refinement {
            let key = cantor_key(&word_of(code)?);
            let lo = flat.partition_point(|(k, _)| *k < key & mask);
            let hi = flat.partition_point(|(k, _)| *k <= key | !mask);
            fuel.spend((hi - lo) as u64 + 1)?;
            best.clear();
            for (k, j) in &flat[lo..hi] {
                let lcp = (key ^ k).leading_zeros();
                best.entry(*j).and_modify(|b| *b = (*b).max(lcp)).or_insert(lcp);
            }
            if best.is_empty() {
                return Err(RunError::Violation(
                    "refinement point certified near no piece".into(),
                ));
            }
            for (&j, &lcp) in best.iter() {
                if lcp >= 64 {
                    continue;
                }
                next[j as usize].push(code.clone());
                entries.push(GrowthEntry {
                    stage: i + 1,
                    piece: j as usize,
                    point: code.clone(),
                    distance: pow2_neg(lcp),
                });
            }
        }
        // The decision order above follows hash iteration; fix the log
        // order so reruns agree.
        entries.sort_by(|a, b| (a.stage, &a.point, a.piece).cmp(&(b.stage, &b.point, b.piece)));
        Ok(())
    }
}

/// Stage view of one piece of a system.
pub struct PieceCompact {
    system: Arc<PieceSystem>,
    piece: usize,
}

impl PieceCompact {
    pub fn new(system: Arc<PieceSystem>, piece: usize) -> PieceCompact {
        assert!(piece < system.piece_count(), "no such piece");
        PieceCompact { system, piece }
    }
}

impl CompactData for PieceCompact {
    fn space(&self) -> &SpaceDescriptor {
        self.system.space()
    }

    fn is_empty(&self, _fuel: &mut Fuel) -> RunResult<bool> {
        Ok(false)
    }

    fn stage(&self, k: u32, fuel: &mut Fuel) -> RunResult<Vec<BigUint>> {
        // Stage m of the tower sits within 3^{-m} 2^{-l-1} of the piece
        // closure, so the least m with 3^m >= 2^{k-l} meets the dyadic
        // stage contract.
        let l = self.system.level();
        let m = if k <= l { 0 } else { stage_for_grade(k - l) };
        self.system.piece_at(m, self.piece, fuel)
    }

    fn points_in_set(&self) -> bool {
        self.system.lists_members()
    }
}

/// Split a compact set into pieces of diameter at most `2^{-level}`.
///
/// The empty set splits into a single copy of the canonical empty name.
/// Otherwise every piece is nonempty, lists members whenever the input
/// does, and the piece closures jointly cover the set.
pub fn decompose(
    set: &MinCoverName,
    level: u32,
    fuel: &mut Fuel,
) -> RunResult<Vec<MinCoverName>> {
    if set.decide_empty(fuel)? {
        return Ok(vec![MinCoverName::empty(set.space().clone())]);
    }
    let system = Arc::new(PieceSystem::new(set.compact_data(), level, fuel)?);
    Ok((0..system.piece_count())
        .map(|j| {
            let cd: Arc<dyn CompactData> = Arc::new(PieceCompact::new(system.clone(), j));
            MinCoverName::from_compact(cd)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Extrema of a function on a compact set.

struct FourBounds {
    min_lo: BigRational,
    min_hi: BigRational,
    max_lo: BigRational,
    max_hi: BigRational,
}

/// Bounds on the extrema of `f` over a set listed to within `slack`.
///
/// Each listed point is padded to a ball of radius `slack`; those balls
/// cover the set and each meets it, so the minimum over the set lies
/// between the smallest ball floor and the smallest ball ceiling, and
/// dually for the maximum.  With a Lipschitz bound the ball values come
/// from point evaluations alone.
fn bounds_at_points(
    f: &dyn RealFn,
    pts: &[BigUint],
    slack: &BigRational,
    p: u32,
    fuel: &mut Fuel,
) -> RunResult<FourBounds> {
    let lip = f.lipschitz();
    let mut out: Option<FourBounds> = None;
    for pt in pts {
        fuel.tick()?;
        let (lo, hi) = match &lip {
            Some(l) => {
                let (a, b) = f.approx_ideal(pt, p, fuel)?;
                let pad = l * slack;
                (a - &pad, b + &pad)
            }
            None => f.bounds_ball(&IdealBall::new(pt.clone(), slack), p, fuel)?,
        };
        out = Some(match out {
            None => FourBounds {
                min_lo: lo.clone(),
                min_hi: hi.clone(),
                max_lo: lo,
                max_hi: hi,
            },
            Some(b) => FourBounds {
                min_lo: b.min_lo.min(lo.clone()),
                min_hi: b.min_hi.min(hi.clone()),
                max_lo: b.max_lo.max(lo),
                max_hi: b.max_hi.max(hi),
            },
        });
    }
    out.ok_or_else(|| RunError::Violation("extrema of an empty listing".into()))
}

/// An extremum as a real, refined through a tower of listings.
///
/// `stage_at(t)` returns a listing and the slack it carries; widths must
/// shrink with `t` for the approximator to converge, fuel permitting.
fn extremum_from_stages(
    f: Arc<dyn RealFn>,
    stage_at: impl Fn(u32, &mut Fuel) -> RunResult<(Vec<BigUint>, BigRational)> + Send + Sync + 'static,
    take_max: bool,
) -> RealName {
    RealName::from_approximator(move |k, fuel| {
        let goal = &pow2_neg(k) + &pow2_neg(k);
        let mut t = 0u32;
        loop {
            fuel.tick()?;
            let (pts, slack) = stage_at(t, fuel)?;
            let b = bounds_at_points(&*f, &pts, &slack, k + 2 + t.min(24), fuel)?;
            let (lo, hi) = if take_max { (b.max_lo, b.max_hi) } else { (b.min_lo, b.min_hi) };
            let width = &hi - &lo;
            if width <= goal {
                return Ok((lo + hi) / ratio(2, 1));
            }
            // Widths shrink threefold per stage, so jump straight to the
            // stage expected to reach the goal instead of probing each.
            let mut excess = width / &goal;
            let mut adv = 0u32;
            while excess > BigRational::one() && adv < 24 {
                excess = excess / ratio(3, 1);
                adv += 1;
            }
            t += adv.max(1);
        }
    })
}

fn compact_extremum(f: Arc<dyn RealFn>, cd: Arc<dyn CompactData>, take_max: bool) -> RealName {
    extremum_from_stages(
        f,
        move |t, fuel| Ok((cd.stage(t, fuel)?, pow2_neg(t + 1))),
        take_max,
    )
}

/// The minimum and maximum of `f` on a nonempty compact set.
pub fn piece_extrema(
    f: Arc<dyn RealFn>,
    piece: &MinCoverName,
    fuel: &mut Fuel,
) -> RunResult<(RealName, RealName)> {
    if piece.decide_empty(fuel)? {
        return Err(RunError::Violation("extrema of an empty piece".into()));
    }
    let cd = piece.compact_data();
    Ok((
        compact_extremum(f.clone(), cd.clone(), false),
        compact_extremum(f, cd, true),
    ))
}

/// Order two reals that are promised to differ.
///
/// Refines both sides together; equal inputs exhaust the budget instead
/// of answering.
fn distinct_order(a: &RealName, b: &RealName, fuel: &mut Fuel) -> RunResult<Ordering> {
    let mut k = 0u32;
    loop {
        fuel.tick()?;
        let x = a.approx(k, fuel)?;
        let y = b.approx(k, fuel)?;
        let eps = pow2_neg(k);
        if &x + &eps < &y - &eps {
            return Ok(Ordering::Less);
        }
        if &x - &eps > &y + &eps {
            return Ok(Ordering::Greater);
        }
        k += 1;
    }
}

// ---------------------------------------------------------------------------
// Threading a real through an interval away from an enumerated family.

/// A countable family of reals to steer clear of.  Gaps in the family
/// are allowed; an absent entry constrains nothing.
#[derive(Clone)]
pub struct ForbiddenReals {
    entry: Arc<dyn Fn(u64, &mut Fuel) -> RunResult<Option<RealName>> + Send + Sync>,
}

impl ForbiddenReals {
    pub fn none() -> ForbiddenReals {
        ForbiddenReals::from_fn(|_, _| Ok(None))
    }

    pub fn from_fn(
        f: impl Fn(u64, &mut Fuel) -> RunResult<Option<RealName>> + Send + Sync + 'static,
    ) -> ForbiddenReals {
        ForbiddenReals { entry: Arc::new(f) }
    }

    pub fn from_reals(vals: Vec<RealName>) -> ForbiddenReals {
        let vals = Arc::new(vals);
        ForbiddenReals::from_fn(move |m, _| {
            Ok(usize::try_from(m).ok().and_then(|i| vals.get(i).cloned()))
        })
    }

    pub fn entry(&self, m: u64, fuel: &mut Fuel) -> RunResult<Option<RealName>> {
        (self.entry)(m, fuel)
    }
}

struct AvoidState {
    lo: BigRational,
    hi: BigRational,
    margins: Vec<Option<BigRational>>,
}

/// A real pinned inside an interval away from every family member, with
/// a positive rational margin recorded per avoided index.
#[derive(Clone)]
pub struct AvoidedValue {
    state: Arc<Mutex<AvoidState>>,
    family: ForbiddenReals,
    real: RealName,
}

/// Run trisection rounds until `rounds` family members are dispatched.
///
/// Round `t` shrinks the pin interval to one third of its width.  With no
/// entry the middle third survives.  Otherwise the entry is approximated
/// just precisely enough: as soon as one of the two outer thirds clears
/// the value's blob by a twelfth of the width it is kept, and by blob
/// width `w/12` one outer third is always clear by at least `w/8`, so
/// the recorded margins stay positive and the precision demanded from
/// far-away values stays coarse.
fn avoid_rounds(
    state: &Arc<Mutex<AvoidState>>,
    family: &ForbiddenReals,
    rounds: u64,
    fuel: &mut Fuel,
) -> RunResult<()> {
    loop {
        let (done, lo, hi) = {
            let st = state.lock().unwrap();
            (st.margins.len() as u64, st.lo.clone(), st.hi.clone())
        };
        if done >= rounds {
            return Ok(());
        }
        let w = &hi - &lo;
        let third = &w / ratio(3, 1);
        let floor = &w / ratio(12, 1);
        let (nlo, nhi, margin) = match family.entry(done, fuel)? {
            None => (&lo + &third, &hi - &third, None),
            Some(c) => {
                let mut q = 2u32;
                loop {
                    fuel.tick()?;
                    let v = c.approx(q, fuel)?;
                    let eps = pow2_neg(q);
                    let gap_low = (&v - &eps) - (&lo + &third);
                    let gap_high = (&hi - &third) - (&v + &eps);
                    let (gap, low_side) =
                        if gap_low >= gap_high { (gap_low, true) } else { (gap_high, false) };
                    let forced = &eps + &eps <= floor;
                    if gap >= floor || forced {
                        break if low_side {
                            (lo.clone(), &lo + &third, Some(gap))
                        } else {
                            (&hi - &third, hi.clone(), Some(gap))
                        };
                    }
                    q += 1;
                }
            }
        };
        let mut st = state.lock().unwrap();
        if st.margins.len() as u64 == done {
            st.lo = nlo;
            st.hi = nhi;
            st.margins.push(margin);
        }
    }
}

/// Thread a real through the open interval `(a, b)` while avoiding every
/// member of the family.
///
/// The pin interval starts a quarter of the width inside the window, so
/// members outside `(a, b)` are cleared from the outset, and an empty
/// family leaves the midpoint.
pub fn avoid_values(a: &BigRational, b: &BigRational, family: ForbiddenReals) -> AvoidedValue {
    assert!(a < b, "level window is empty");
    let quarter = (b - a) / ratio(4, 1);
    let state = Arc::new(Mutex::new(AvoidState {
        lo: a + &quarter,
        hi: b - &quarter,
        margins: Vec::new(),
    }));
    let st = state.clone();
    let fam = family.clone();
    let real = RealName::from_approximator(move |k, fuel| {
        // Shrink until the pin interval fits in 2^{-k+1}; its midpoint
        // then approximates the limit to 2^{-k}.
        let goal = &pow2_neg(k) + &pow2_neg(k);
        loop {
            let (lo, hi, rounds) = {
                let s = st.lock().unwrap();
                (s.lo.clone(), s.hi.clone(), s.margins.len() as u64)
            };
            if &hi - &lo <= goal {
                return Ok((lo + hi) / ratio(2, 1));
            }
            avoid_rounds(&st, &fam, rounds + 1, fuel)?;
        }
    });
    AvoidedValue { state, family, real }
}

impl AvoidedValue {
    pub fn real(&self) -> &RealName {
        &self.real
    }

    /// The certified margin to family member `m`, or `None` where the
    /// family has no entry.  Margins are always strictly positive.
    pub fn separation(&self, m: u64, fuel: &mut Fuel) -> RunResult<Option<BigRational>> {
        avoid_rounds(&self.state, &self.family, m + 1, fuel)?;
        Ok(self.state.lock().unwrap().margins[m as usize].clone())
    }
}

// ---------------------------------------------------------------------------
// Bilocated splitting of a compact set at an avoided level.

struct BilocCore {
    space: SpaceDescriptor,
    source: Arc<dyn CompactData>,
    f: Arc<dyn RealFn>,
    systems: Mutex<HashMap<u32, Arc<PieceSystem>>>,
    extrema: Mutex<HashMap<(u32, usize, bool), RealName>>,
}

impl BilocCore {
    /// The scale-`k` decomposition, with pieces of diameter at most
    /// `2^{-k-2}`.
    fn system(&self, scale: u32, fuel: &mut Fuel) -> RunResult<Arc<PieceSystem>> {
        if let Some(s) = self.systems.lock().unwrap().get(&scale) {
            return Ok(s.clone());
        }
        let sys = Arc::new(PieceSystem::new(self.source.clone(), scale + 2, fuel)?);
        let mut map = self.systems.lock().unwrap();
        Ok(map.entry(scale).or_insert(sys).clone())
    }

    /// Extremum of the function on one piece, memoized so level choice
    /// and side decisions share refinements.
    fn extremum(
        &self,
        scale: u32,
        j: usize,
        take_max: bool,
        fuel: &mut Fuel,
    ) -> RunResult<RealName> {
        if let Some(r) = self.extrema.lock().unwrap().get(&(scale, j, take_max)) {
            return Ok(r.clone());
        }
        let sys = self.system(scale, fuel)?;
        let name = extremum_from_stages(
            self.f.clone(),
            move |t, fuel| {
                Ok((sys.piece_at(t, j, fuel)?, third_scale(t, sys.level() + 1)))
            },
            take_max,
        );
        let mut map = self.extrema.lock().unwrap();
        Ok(map.entry((scale, j, take_max)).or_insert(name).clone())
    }

    /// The family the level must avoid: minima and maxima of every piece
    /// at every scale, scale-major with the two extrema of a piece
    /// adjacent, so coarse queries touch only coarse decompositions.
    fn forbidden(core: &Arc<BilocCore>) -> ForbiddenReals {
        let core = core.clone();
        ForbiddenReals::from_fn(move |m, fuel| {
            let mut acc = 0u64;
            let mut scale = 0u32;
            loop {
                fuel.tick()?;
                let sys = core.system(scale, fuel)?;
                let n = sys.piece_count() as u64;
                if m < acc + 2 * n {
                    let idx = m - acc;
                    return Ok(Some(core.extremum(
                        scale,
                        (idx / 2) as usize,
                        idx % 2 == 1,
                        fuel,
                    )?));
                }
                acc += 2 * n;
                scale += 1;
            }
        })
    }
}

/// Stage data for one side of a bilocated split.
struct BilocSide {
    core: Arc<BilocCore>,
    alpha: RealName,
    upper: bool,
    stages: Mutex<HashMap<u32, Vec<BigUint>>>,
}

impl BilocSide {
    /// Pieces of the scale-`scale` decomposition certified on this side:
    /// minima below the level flag the sublevel side, maxima above it
    /// the superlevel side.  The level avoids every extremum, so each
    /// order resolves.
    fn flagged(&self, scale: u32, fuel: &mut Fuel) -> RunResult<Vec<usize>> {
        let sys = self.core.system(scale, fuel)?;
        let want = if self.upper { Ordering::Greater } else { Ordering::Less };
        let mut out = Vec::new();
        for j in 0..sys.piece_count() {
            let c = self.core.extremum(scale, j, self.upper, fuel)?;
            if distinct_order(&c, &self.alpha, fuel)? == want {
                out.push(j);
            }
        }
        Ok(out)
    }

    /// A point of the piece whose value is certified on this side.  One
    /// exists in some stage set as soon as the piece's extremum clears
    /// the level, so the deepening scan below terminates.
    fn witness(&self, scale: u32, j: usize, fuel: &mut Fuel) -> RunResult<BigUint> {
        let sys = self.core.system(scale, fuel)?;
        // Precision outruns stage depth: a coarse stage point usually
        // certifies its side long before deep stages are affordable.
        let mut round = 0u32;
        loop {
            fuel.tick()?;
            let pts = sys.piece_at(round / 4, j, fuel)?;
            let p = round + 3;
            let av = self.alpha.approx(p, fuel)?;
            let eps = pow2_neg(p);
            for pt in &pts {
                fuel.tick()?;
                let (lo, hi) = self.core.f.approx_ideal(pt, p, fuel)?;
                let clear = if self.upper { lo > &av + &eps } else { hi < &av - &eps };
                if clear {
                    return Ok(pt.clone());
                }
            }
            round += 1;
        }
    }
}

impl CompactData for BilocSide {
    fn space(&self) -> &SpaceDescriptor {
        &self.core.space
    }

    fn is_empty(&self, fuel: &mut Fuel) -> RunResult<bool> {
        // Emptiness at the coarsest scale settles every scale: a point
        // on this side keeps its piece flagged at all of them.
        Ok(self.flagged(0, fuel)?.is_empty())
    }

    fn stage(&self, k: u32, fuel: &mut Fuel) -> RunResult<Vec<BigUint>> {
        if let Some(s) = self.stages.lock().unwrap().get(&k) {
            return Ok(s.clone());
        }
        // One certified witness per flagged piece; pieces at scale k
        // have diameter at most 2^{-k-2}, within the stage contract.
        let mut out = Vec::new();
        for j in self.flagged(k, fuel)? {
            out.push(self.witness(k, j, fuel)?);
        }
        out.sort();
        out.dedup();
        let mut map = self.stages.lock().unwrap();
        Ok(map.entry(k).or_insert(out).clone())
    }

    fn points_in_set(&self) -> bool {
        self.core.source.points_in_set()
    }
}

/// Split a compact set at a level inside `(a, b)` chosen away from every
/// piece extremum, so both level sets are compact with decidable
/// emptiness.
///
/// Returns the level together with the sublevel and superlevel parts;
/// an empty part comes back as the canonical empty name.  An empty
/// input splits trivially around the midpoint.
pub fn bilocate(
    set: &MinCoverName,
    a: &BigRational,
    b: &BigRational,
    f: Arc<dyn RealFn>,
    fuel: &mut Fuel,
) -> RunResult<(RealName, MinCoverName, MinCoverName)> {
    assert!(a < b, "level window is empty");
    let space = set.space().clone();
    if set.decide_empty(fuel)? {
        let mid = (a + b) / ratio(2, 1);
        return Ok((
            RealName::from_rational(&mid),
            MinCoverName::empty(space.clone()),
            MinCoverName::empty(space),
        ));
    }
    let core = Arc::new(BilocCore {
        space: space.clone(),
        source: set.compact_data(),
        f,
        systems: Mutex::new(HashMap::new()),
        extrema: Mutex::new(HashMap::new()),
    });
    let alpha = avoid_values(a, b, BilocCore::forbidden(&core));
    let mut sides = Vec::new();
    for upper in [false, true] {
        let side = BilocSide {
            core: core.clone(),
            alpha: alpha.real().clone(),
            upper,
            stages: Mutex::new(HashMap::new()),
        };
        sides.push(if side.is_empty(fuel)? {
            MinCoverName::empty(space.clone())
        } else {
            let cd: Arc<dyn CompactData> = Arc::new(side);
            MinCoverName::from_compact(cd)
        });
    }
    let plus = sides.pop().unwrap();
    let minus = sides.pop().unwrap();
    Ok((alpha.real().clone(), minus, plus))
}

// ---------------------------------------------------------------------------
// Dense sequences through countably many closed obstacles.

struct ChainLink {
    center: BigUint,
    radius: BigRational,
    witness: Option<IdealBall>,
}

/// Points dense in the part of the space missed by every listed closed
/// obstacle.
///
/// Point `m` starts from the seed ball read off `m` as a pair of center
/// index and dyadic radius, then repeatedly shrinks: the link after
/// clearing obstacle `t` is formally inside its predecessor and inside
/// an enumerated ball of the obstacle's complement.  The limit point
/// therefore stays in the seed ball and off every obstacle, and with no
/// obstacles it is the seed center itself.
#[derive(Clone)]
pub struct BaireSequence {
    space: SpaceDescriptor,
    obstacles: Arc<dyn Fn(u64) -> Option<ClosedName> + Send + Sync>,
    chains: Arc<Mutex<HashMap<u64, Vec<ChainLink>>>>,
}

pub fn baire_dense(space: SpaceDescriptor, obstacles: Vec<ClosedName>) -> BaireSequence {
    let obs = Arc::new(obstacles);
    baire_dense_fn(space, move |i| {
        usize::try_from(i).ok().and_then(|i| obs.get(i).cloned())
    })
}

pub fn baire_dense_fn(
    space: SpaceDescriptor,
    obstacles: impl Fn(u64) -> Option<ClosedName> + Send + Sync + 'static,
) -> BaireSequence {
    BaireSequence {
        space,
        obstacles: Arc::new(obstacles),
        chains: Arc::new(Mutex::new(HashMap::new())),
    }
}

impl BaireSequence {
    /// One shrink: a ball formally inside the current one, of radius at
    /// most `bound`, and formally inside an enumerated complement ball
    /// of the obstacle when there is one.  The dovetailed search over
    /// centers, radii and complement positions terminates whenever the
    /// obstacle is nowhere dense inside the current ball.
    fn step(
        &self,
        center: &BigUint,
        rho: &BigRational,
        t: u64,
        fuel: &mut Fuel,
    ) -> RunResult<ChainLink> {
        let mut bound = rho / ratio(2, 1);
        let dyadic = pow2_neg(u32::try_from(t + 1).unwrap_or(60).min(60));
        if dyadic < bound {
            bound = dyadic;
        }
        let Some(obstacle) = (self.obstacles)(t) else {
            return Ok(ChainLink { center: center.clone(), radius: bound, witness: None });
        };
        // Grow a pool of enumerated complement balls and a pool of
        // candidate centers in lockstep; every pair is probed exactly
        // once, over the full range of dyadic radii.
        let probe = |cand: &BigUint, d_cur: &BigRational, b: &IdealBall, fuel: &mut Fuel| {
            fuel.tick()?;
            let room_cur = rho - d_cur;
            let d_wit = self.space.ideal_distance(cand, &b.center)?;
            let room_wit = &b.radius() - &d_wit;
            if room_cur <= BigRational::zero() || room_wit <= BigRational::zero() {
                return Ok(None);
            }
            for g in 0..=60u32 {
                let r = pow2_neg(g);
                if r <= bound && r < room_cur && r < room_wit {
                    return Ok(Some(r));
                }
            }
            Ok(None)
        };
        let mut balls: Vec<IdealBall> = Vec::new();
        let mut cands: Vec<(BigUint, BigRational)> = Vec::new();
        let mut h = 0u64;
        loop {
            fuel.tick()?;
            if let Some(b) = obstacle.complement_ball_at(h, fuel)? {
                for (cand, d_cur) in &cands {
                    if let Some(r) = probe(cand, d_cur, &b, fuel)? {
                        return Ok(ChainLink { center: cand.clone(), radius: r, witness: Some(b) });
                    }
                }
                balls.push(b);
            }
            let cand = self.space.ideal_point(h);
            let d_cur = self.space.ideal_distance(&cand, center)?;
            for b in &balls {
                if let Some(r) = probe(&cand, &d_cur, b, fuel)? {
                    return Ok(ChainLink { center: cand, radius: r, witness: Some(b.clone()) });
                }
            }
            cands.push((cand, d_cur));
            h += 1;
        }
    }

    fn ensure_chain(&self, m: u64, links: usize, fuel: &mut Fuel) -> RunResult<()> {
        loop {
            let state = {
                let ch = self.chains.lock().unwrap();
                ch.get(&m).map(|v| {
                    let last = v.last().unwrap();
                    (v.len(), last.center.clone(), last.radius.clone())
                })
            };
            match state {
                None => {
                    let (a, r) = unpair(m);
                    let seed = ChainLink {
                        center: self.space.ideal_point(a),
                        radius: pow2_neg(u32::try_from(r).unwrap_or(60).min(60)),
                        witness: None,
                    };
                    let mut ch = self.chains.lock().unwrap();
                    ch.entry(m).or_insert_with(|| vec![seed]);
                }
                Some((len, _, _)) if len >= links => return Ok(()),
                Some((len, center, rho)) => {
                    let link = self.step(&center, &rho, len as u64 - 1, fuel)?;
                    let mut ch = self.chains.lock().unwrap();
                    let v = ch.get_mut(&m).unwrap();
                    if v.len() == len {
                        v.push(link);
                    }
                }
            }
        }
    }

    /// The m-th point: the limit of its chain of shrinking balls.
    pub fn point(&self, m: u64) -> CauchyName {
        let this = self.clone();
        CauchyName::from_approximator(self.space.clone(), move |k, fuel| {
            // Link i has radius at most 2^{-i} and contains the limit.
            let links = k as usize + 1;
            this.ensure_chain(m, links, fuel)?;
            let ch = this.chains.lock().unwrap();
            Ok(ch.get(&m).unwrap()[links - 1].center.clone())
        })
    }

    /// The inclusion certificate recorded when point `m` cleared
    /// obstacle `i`: the chain ball and the complement ball it formally
    /// sits inside.  `None` where the family has no obstacle.
    pub fn certificate(
        &self,
        m: u64,
        i: u64,
        fuel: &mut Fuel,
    ) -> RunResult<Option<(IdealBall, IdealBall)>> {
        let links = usize::try_from(i).unwrap_or(usize::MAX - 2) + 2;
        self.ensure_chain(m, links, fuel)?;
        let ch = self.chains.lock().unwrap();
        let link = &ch.get(&m).unwrap()[links - 1];
        Ok(link
            .witness
            .clone()
            .map(|w| (IdealBall::new(link.center.clone(), &link.radius), w)))
    }
}

// ---------------------------------------------------------------------------
// Clopen neighborhoods from retractions between certified radii.

/// Synthesizes a retraction of the ambient space onto a located subset.
pub type RetractionSynth = Arc<dyn Fn(&LocatedName) -> Arc<dyn EndoFn> + Send + Sync>;

/// Distance to a fixed named point as an evaluable function.
struct DistToPoint {
    space: SpaceDescriptor,
    x: CauchyName,
}

impl RealFn for DistToPoint {
    fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    fn lipschitz(&self) -> Option<BigRational> {
        Some(BigRational::one())
    }

    fn approx_ideal(
        &self,
        code: &BigUint,
        k: u32,
        fuel: &mut Fuel,
    ) -> RunResult<(BigRational, BigRational)> {
        let j = k + 2;
        let xj = self.x.approx_code(j, fuel)?;
        let d = self.space.ideal_distance(&xj, code)?;
        let e = pow2_neg(j);
        let lo = &d - &e;
        Ok((if lo.is_negative() { BigRational::zero() } else { lo }, d + e))
    }

    fn bounds_ball(
        &self,
        ball: &IdealBall,
        k: u32,
        fuel: &mut Fuel,
    ) -> RunResult<(BigRational, BigRational)> {
        let j = k + 2;
        let xj = self.x.approx_code(j, fuel)?;
        let d = self.space.ideal_distance(&xj, &ball.center)?;
        let pad = ball.radius() + pow2_neg(j);
        let lo = &d - &pad;
        Ok((if lo.is_negative() { BigRational::zero() } else { lo }, d + pad))
    }
}

/// Locate `set ∪ {x}` on Cantor space, listing the point first so a
/// synthesized retraction prefers it as a target.
fn locate_with_point(set: &CylSet, x: &CauchyName) -> LocatedName {
    let range = LocatedName::from_cylset(set).range().prepend(x);
    let aset = set.clone();
    let xc = x.clone();
    let dist = DistName::new(SpaceDescriptor::cantor(), move |y| {
        let aset = aset.clone();
        let xc = xc.clone();
        let y = y.clone();
        LowerRealName::from_increasing(move |step, fuel| {
            let j = step.min(58) as u32;
            let yc = y.point_code_at(j as u64, fuel)?;
            let yw = CWord::from_ideal_code(&yc)
                .ok_or_else(|| RunError::Violation("point code off Cantor space".into()))?;
            let da = aset
                .point_distance(&yw.point_normal())
                .expect("the located cylinder set is nonempty")
                - pow2_neg(j);
            let dx = SpaceDescriptor::cantor().ideal_distance(&xc.approx_code(j, fuel)?, &yc)?
                - pow2_neg(j)
                - pow2_neg(j);
            Ok(da.min(dx))
        })
    });
    LocatedName::new(range, dist)
}

/// Certify that a real lies strictly inside an open rational interval.
fn certify_inside(
    r: &RealName,
    lo: &BigRational,
    hi: &BigRational,
    fuel: &mut Fuel,
) -> RunResult<()> {
    let mut p = 2u32;
    loop {
        fuel.tick()?;
        let v = r.approx(p, fuel)?;
        let eps = pow2_neg(p);
        if &(&v - &eps) > lo && &(&v + &eps) < hi {
            return Ok(());
        }
        p += 1;
    }
}

/// A clopen neighborhood of `x` of diameter at most `2^{-k}`, squeezed
/// between balls whose radii are certified inside dyadic-free windows.
///
/// On a discrete space the singleton answers directly.  On Cantor space
/// two bilocated splits of the distance to `x` pin levels inside
/// `(2^{-k-3}, 2^{-k-2})` and `(2^{-k-2}, 2^{-k-1})`; between certified
/// levels the annulus collapses to the cylinder of points first leaving
/// `x` at index `k+2`, and the neighborhood is read off the synthesized
/// retraction onto that annulus plus `x`: the windows of the inner ball
/// whose image balls land provably back inside it.
pub fn clopen_ball_neighborhood(
    x: &CauchyName,
    k: u32,
    synth: &RetractionSynth,
    fuel: &mut Fuel,
) -> RunResult<ClopenName> {
    let space = x.space().clone();
    if matches!(space.kind, SpaceKind::Nat) {
        // A quarter-precision code pins the point exactly.
        let code = x.approx_code(2, fuel)?;
        let open = OpenName::from_balls(space.clone(), vec![IdealBall::new(code.clone(), &ratio(1, 2))]);
        let closed = crate::zerodim::singleton_closed(&CauchyName::from_ideal(space, &code));
        return Ok(ClopenName::new(open, closed));
    }
    assert!(space.is_cantor(), "clopen neighborhoods live on Cantor space or a discrete space");
    if k > 50 {
        return Err(RunError::OutOfFuel);
    }
    let depth = (k + 3) as u8;
    let xw = CWord::from_ideal_code(&x.approx_code(k + 5, fuel)?)
        .ok_or_else(|| RunError::Violation("point code off Cantor space".into()))?;
    let mut prefix = CWord::root();
    for i in 0..depth {
        prefix = prefix.child(xw.bit(i));
    }
    let dist_fn: Arc<dyn RealFn> = Arc::new(DistToPoint { space: space.clone(), x: x.clone() });
    let full = MinCoverName::from_compact(Arc::new(CylCompact::new(CylSet::full())));
    let w_lo = pow2_neg(k + 3);
    let w_mid = pow2_neg(k + 2);
    let w_hi = pow2_neg(k + 1);
    let (alpha0, _, _) = bilocate(&full, &w_lo, &w_mid, dist_fn.clone(), fuel)?;
    let (alpha1, _, _) = bilocate(&full, &w_mid, &w_hi, dist_fn, fuel)?;
    certify_inside(&alpha0, &w_lo, &w_mid, fuel)?;
    certify_inside(&alpha1, &w_mid, &w_hi, fuel)?;
    // Distances to x are powers of two, so between the certified levels
    // the annulus is exactly the length-(k+3) cylinder that follows x
    // through index k+1 and departs at k+2, and the open inner ball is
    // the cylinder [prefix].
    let mut stem = CWord::root();
    for i in 0..depth - 1 {
        stem = stem.child(xw.bit(i));
    }
    let annulus = CylSet::cylinder(stem.child(!xw.bit(depth - 1)));
    let retract = synth(&locate_with_point(&annulus, x));
    let windows = prefix.extensions(depth + 4);
    let mut keep = CylSet::empty();
    for w in windows {
        let wd = w.len() as u32;
        let mut decided = false;
        for bump in 0..6u32 {
            fuel.tick()?;
            let img = retract.image_ball(&IdealBall::new(w.ideal_code(), &pow2_neg(wd)), wd + bump, fuel)?;
            let xj = x.approx_code(wd + bump + 2, fuel)?;
            let dc = space.ideal_distance(&img.center, &xj)?;
            let slop = &img.radius() + &pow2_neg(wd + bump + 2);
            if &dc + &slop <= w_lo {
                keep = keep.union(&CylSet::cylinder(w));
                decided = true;
                break;
            }
            if &dc - &slop >= w_mid {
                decided = true;
                break;
            }
        }
        if !decided {
            return Err(RunError::OutOfFuel);
        }
    }
    if !keep.contains_point(&prefix.point_normal()) {
        return Err(RunError::Violation("neighborhood lost its own center".into()));
    }
    Ok(ClopenName::from_cylset(&keep))
}
