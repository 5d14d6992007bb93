//! Zero-dimensionality against a compact ambient space.
//!
//! Finite ideal covers double as formal objects: exact rational predicates
//! decide their separation and bound their diameter, tuple names split
//! Cantor space into formally separated clopen components, and a numbering
//! of compact-open basis elements carries, for each element, a listing of
//! every covering word.  On top of that sit scale-blocked decompositions
//! of open sets, certified lower bounds on the distance from a located set
//! to a compact one, cover refinement along a dense listing, and the
//! synthesis of a retraction onto a located closed set.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num::rational::BigRational;
use num::{BigInt, BigUint, Zero};

use crate::cantor::{pow2_neg, CWord, CylSet};
use crate::fuel::{Fuel, RunError, RunResult};
use crate::hyper::{
    cert_covers, decode_cover, decode_cover_candidate, encode_cover, sweep_candidate_ball,
    ClopenName, ClosedName, CompactData, CoverName, CylCompact, DistName, OpenName, RangeName,
};
use crate::names::{decode_word, encode_word, unpair, Name};
use crate::realfn::EndoFn;
use crate::space::{cantor_ball_word, CauchyName, IdealBall, LowerRealName, SpaceDescriptor};

// ---------------------------------------------------------------------------
// Formal predicates on ideal covers.

/// Whether every cross pair of listed balls keeps its centers strictly
/// farther apart than the two radii combined.  Decided in exact rational
/// arithmetic; an empty side passes vacuously.
pub fn formal_disjoint(
    space: &SpaceDescriptor,
    u: &BigUint,
    v: &BigUint,
    fuel: &mut Fuel,
) -> RunResult<bool> {
    let a = decode_cover(space, u)?;
    let b = decode_cover(space, v)?;
    for x in &a {
        for y in &b {
            fuel.tick()?;
            let d = space.ideal_distance(&x.center, &y.center)?;
            if d <= x.radius() + y.radius() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Largest center distance plus both radii over pairs of listed balls,
/// the pair of a ball with itself included.  The empty listing gets zero.
pub fn formal_diameter(
    space: &SpaceDescriptor,
    u: &BigUint,
    fuel: &mut Fuel,
) -> RunResult<BigRational> {
    let balls = decode_cover(space, u)?;
    let mut best = BigRational::zero();
    for (i, x) in balls.iter().enumerate() {
        for y in &balls[i..] {
            fuel.tick()?;
            let d = space.ideal_distance(&x.center, &y.center)? + x.radius() + y.radius();
            if d > best {
                best = d;
            }
        }
    }
    Ok(best)
}

/// A tuple of ideal covers that passed the pairwise separation check.
#[derive(Clone)]
pub struct FormalCoverTuple {
    space: SpaceDescriptor,
    components: Vec<BigUint>,
}

impl FormalCoverTuple {
    /// Validate and wrap: every pair of distinct components must be
    /// formally separated.
    pub fn new(
        space: &SpaceDescriptor,
        components: Vec<BigUint>,
        fuel: &mut Fuel,
    ) -> RunResult<FormalCoverTuple> {
        for (i, u) in components.iter().enumerate() {
            for v in &components[i + 1..] {
                if !formal_disjoint(space, u, v, fuel)? {
                    return Err(RunError::Violation(
                        "cover tuple components are not formally separated".into(),
                    ));
                }
            }
        }
        Ok(FormalCoverTuple { space: space.clone(), components })
    }

    /// Unpack a word of cover words and validate it.
    pub fn decode(
        space: &SpaceDescriptor,
        code: &BigUint,
        fuel: &mut Fuel,
    ) -> RunResult<FormalCoverTuple> {
        FormalCoverTuple::new(space, decode_word(code), fuel)
    }

    pub fn code(&self) -> BigUint {
        encode_word(&self.components)
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn components(&self) -> &[BigUint] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component_balls(&self, k: usize) -> RunResult<Vec<IdealBall>> {
        decode_cover(&self.space, &self.components[k])
    }
}

// ---------------------------------------------------------------------------
// Splitting tuples for Cantor space.

fn words_at_depth(d: u8) -> Vec<CWord> {
    CWord::root().extensions(d)
}

/// The four balls pinning the grandchild cylinders of a word, each equal
/// as a set to its grandchild.
fn grandchild_cover(w: &CWord) -> Vec<IdealBall> {
    let r = pow2_neg(w.len() as u32 + 1);
    let mut balls = Vec::with_capacity(4);
    for lo in [false, true] {
        for hi in [false, true] {
            let v = w.child(lo).child(hi);
            balls.push(IdealBall::new(v.ideal_code(), &r));
        }
    }
    balls
}

/// Splitting tuples for Cantor space, one per scale.  Entry n cuts the
/// space along the length-n cylinders and covers each by the four balls
/// around its grandchild words at radius 2^{-n-1}.  Distinct length-n
/// cylinders keep those centers at least 2^{-n+1} apart, which strictly
/// beats the combined radii 2^{-n}, so the components are pairwise
/// formally separated while jointly covering everything at diameter
/// shrinking with n.
pub fn ddc_name_cantor() -> Name {
    Name::from_fn(|pos, fuel| {
        let n = u32::try_from(pos).map_err(|_| RunError::OutOfFuel)?;
        if n + 2 > CWord::MAX_LEN as u32 {
            return Err(RunError::OutOfFuel);
        }
        fuel.spend(4u64.checked_shl(n).ok_or(RunError::OutOfFuel)?)?;
        let comps: Vec<BigUint> = words_at_depth(n as u8)
            .iter()
            .map(|w| encode_cover(&grandchild_cover(w)))
            .collect();
        Ok(encode_word(&comps) + 1u32)
    })
}

// ---------------------------------------------------------------------------
// Compact-open basis elements.

fn same_cylset(a: &CylSet, b: &CylSet) -> bool {
    a.contains_set(b) && b.contains_set(a)
}

/// A compact clopen set carried three ways: a two-sided membership name,
/// a listing of every covering word in code order, and the finite ball
/// cover it was assembled from.  Exact by construction.
#[derive(Clone)]
pub struct CompactOpenName {
    clopen: ClopenName,
    cover: CoverName,
    cover_code: BigUint,
    exact: CylSet,
}

impl CompactOpenName {
    /// Assemble from the member balls and the sibling balls whose union
    /// must be exactly the complement.
    fn from_split(own: Vec<IdealBall>, others: Vec<IdealBall>) -> RunResult<CompactOpenName> {
        let space = SpaceDescriptor::cantor();
        let open = OpenName::from_balls(space.clone(), own.clone());
        let set = open
            .exact()
            .cloned()
            .ok_or_else(|| RunError::Violation("member balls fail to resolve to cylinders".into()))?;
        let sibling = OpenName::from_balls(space.clone(), others);
        let sib_set = sibling
            .exact()
            .cloned()
            .ok_or_else(|| RunError::Violation("sibling balls fail to resolve to cylinders".into()))?;
        if !same_cylset(&sib_set, &set.complement()) {
            return Err(RunError::Violation("sibling balls do not fill the complement".into()));
        }
        let clopen = ClopenName::new(open, ClosedName::complement_of(sibling));
        let cover = CoverName::from_name(space, covering_words_name(set.clone()));
        Ok(CompactOpenName { clopen, cover, cover_code: encode_cover(&own), exact: set })
    }

    /// The empty element: no member balls, one space-filling sibling ball,
    /// every well-formed cover word listed.
    pub fn empty() -> CompactOpenName {
        let space = SpaceDescriptor::cantor();
        let wide = BigRational::from_integer(2.into());
        let all = IdealBall::new(space.ideal_point(0), &wide);
        CompactOpenName::from_split(Vec::new(), vec![all]).expect("the empty split is well formed")
    }

    pub fn space(&self) -> &SpaceDescriptor {
        self.clopen.space()
    }

    pub fn clopen(&self) -> &ClopenName {
        &self.clopen
    }

    /// Listing of every word whose balls' union contains the set.
    pub fn cover(&self) -> &CoverName {
        &self.cover
    }

    pub fn cover_code(&self) -> &BigUint {
        &self.cover_code
    }

    pub fn exact(&self) -> &CylSet {
        &self.exact
    }
}

/// Every word code whose balls' union contains the set, announced at its
/// own code position.  Covering is decided exactly on cylinders, so the
/// listing is complete rather than fuel-relative.
fn covering_words_name(set: CylSet) -> Name {
    Name::from_fn(move |pos, fuel| {
        fuel.tick()?;
        let space = SpaceDescriptor::cantor();
        let code = BigUint::from(pos);
        let balls = match decode_cover_candidate(&space, &code) {
            Some(b) => b,
            None => return Ok(BigUint::zero()),
        };
        let mut union = CylSet::empty();
        for b in &balls {
            fuel.tick()?;
            match cantor_ball_word(b, false) {
                Ok(w) => union = union.union(&CylSet::cylinder(w)),
                Err(_) => return Ok(BigUint::zero()),
            }
        }
        Ok(if union.contains_set(&set) { code + 1u32 } else { BigUint::zero() })
    })
}

/// Total numbering of compact-open basis elements.
pub type CompactBasis = Arc<dyn Fn(u64, &mut Fuel) -> RunResult<CompactOpenName> + Send + Sync>;

/// Basis numbering from a splitting-tuple name: index ⟨n,k⟩ takes
/// component k of listed tuple n, with its own balls on the membership
/// side and the sibling components jointly on the complement side.
/// Indices past a tuple's width name the empty element, keeping the
/// numbering total.
pub fn basis_from_ddc(p: &Name) -> CompactBasis {
    let p = p.clone();
    let cache: Arc<Mutex<HashMap<u64, CompactOpenName>>> = Arc::new(Mutex::new(HashMap::new()));
    Arc::new(move |m, fuel| {
        if let Some(hit) = cache.lock().unwrap().get(&m) {
            return Ok(hit.clone());
        }
        let (n, k) = unpair(m);
        let s = p.at(n, fuel)?;
        let elem = if s.is_zero() {
            CompactOpenName::empty()
        } else {
            let comps = decode_word(&(s - 1u32));
            match comps.get(usize::try_from(k).unwrap_or(usize::MAX)) {
                None => CompactOpenName::empty(),
                Some(own_code) => {
                    let space = SpaceDescriptor::cantor();
                    let own = decode_cover(&space, own_code)?;
                    let mut others = Vec::new();
                    for (i, c) in comps.iter().enumerate() {
                        if i as u64 != k {
                            others.extend(decode_cover(&space, c)?);
                        }
                    }
                    fuel.spend((own.len() + others.len()) as u64)?;
                    CompactOpenName::from_split(own, others)?
                }
            }
        };
        cache.lock().unwrap().insert(m, elem.clone());
        Ok(elem)
    })
}

// ---------------------------------------------------------------------------
// Refined inclusion.

/// Affirmation-by-listing of strict inclusion into one ball: some listed
/// cover of the left element must put every ball formally inside the
/// right one.  The empty element affirms instantly through its empty
/// cover word.
pub struct RefinedInclusion {
    basis: CompactBasis,
}

pub fn refined_inclusion_from_compact_basis(basis: CompactBasis) -> RefinedInclusion {
    RefinedInclusion { basis }
}

impl RefinedInclusion {
    /// Scan the left element's cover listing through `effort` positions
    /// for a word witnessing the inclusion.  `false` means not yet.
    pub fn affirmed_within(
        &self,
        c: u64,
        d: &BigUint,
        effort: u64,
        fuel: &mut Fuel,
    ) -> RunResult<bool> {
        let elem = (self.basis)(c, fuel)?;
        let space = elem.space().clone();
        let target = IdealBall::from_code(d);
        if !space.ideal_in_domain(&target.center) {
            return Err(RunError::Violation("inclusion target has a bad center".into()));
        }
        for pos in 0..effort {
            let s = elem.cover().name().at(pos, fuel)?;
            if s.is_zero() {
                continue;
            }
            let balls = decode_cover(&space, &(s - 1u32))?;
            let mut inside = true;
            for b in &balls {
                fuel.tick()?;
                let d = space.ideal_distance(&b.center, &target.center)?;
                if d + b.radius() >= target.radius() {
                    inside = false;
                    break;
                }
            }
            if inside {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

// ---------------------------------------------------------------------------
// Scale-blocked decomposition of an open set.

/// One decomposition piece: its clopen value, a ball cover pinning its
/// formal diameter, and the nonemptiness flag.
#[derive(Clone)]
pub struct DhatPiece {
    clopen: ClopenName,
    cover_code: BigUint,
    flag: bool,
    word: Option<CWord>,
}

impl DhatPiece {
    fn from_word(w: CWord) -> DhatPiece {
        DhatPiece {
            clopen: ClopenName::from_cylset(&CylSet::cylinder(w)),
            cover_code: encode_cover(&grandchild_cover(&w)),
            flag: true,
            word: Some(w),
        }
    }

    /// The flagged-empty filler keeping a block nonempty.
    fn filler() -> DhatPiece {
        DhatPiece {
            clopen: ClopenName::from_cylset(&CylSet::empty()),
            cover_code: encode_word(&[]),
            flag: false,
            word: None,
        }
    }

    pub fn clopen(&self) -> &ClopenName {
        &self.clopen
    }

    /// Word of a ball cover of the piece, of formal diameter below the
    /// reciprocal of the block index plus one.
    pub fn cover_code(&self) -> &BigUint {
        &self.cover_code
    }

    pub fn flag(&self) -> bool {
        self.flag
    }

    pub fn set(&self) -> CylSet {
        match &self.word {
            Some(w) => CylSet::cylinder(*w),
            None => CylSet::empty(),
        }
    }

    pub(crate) fn word(&self) -> Option<&CWord> {
        self.word.as_ref()
    }
}

/// Cylinder depth mined by block n: deep enough that a four-ball
/// grandchild cover has formal diameter strictly below (n+1)^{-1}.
fn block_depth(n: u64) -> u32 {
    (n + 1).ilog2() + 2
}

/// Stream prefix scanned before block n closes: grows polynomially so
/// every announced ball is eventually claimed, capped to keep one block
/// affordable.
fn block_horizon(n: u64) -> u64 {
    let m = n + 1;
    m.saturating_mul(m).saturating_mul(m).saturating_mul(m).clamp(64, 1 << 20)
}

struct DhatState {
    scanned: u64,
    visible: CylSet,
    claimed: CylSet,
    blocks: Vec<Vec<DhatPiece>>,
}

struct DhatInner {
    u: OpenName,
    state: Mutex<DhatState>,
}

impl DhatInner {
    fn ensure_blocks(&self, n: u64, fuel: &mut Fuel) -> RunResult<()> {
        loop {
            let mut st = self.state.lock().unwrap();
            if st.blocks.len() as u64 > n {
                return Ok(());
            }
            let b = st.blocks.len() as u64;
            let depth = block_depth(b);
            if let Some(set) = self.u.exact() {
                st.visible = set.clone();
            } else {
                let horizon = block_horizon(b);
                while st.scanned < horizon {
                    let pos = st.scanned;
                    if let Some(ball) = self.u.ball_at(pos, fuel)? {
                        if let Ok(w) = cantor_ball_word(&ball, false) {
                            st.visible = st.visible.union(&CylSet::cylinder(w));
                        }
                    }
                    st.scanned = pos + 1;
                }
            }
            // Earlier blocks mine coarser or equal depths, so a fresh
            // cylinder is either whole in the claimed region or disjoint
            // from it.  Nothing fresh to claim means the block is a bare
            // filler, skipping the word scan.
            let mut pieces = Vec::new();
            if !st.claimed.contains_set(&st.visible) {
                if depth + 2 > CWord::MAX_LEN as u32 {
                    return Err(RunError::OutOfFuel);
                }
                for w in words_at_depth(depth as u8) {
                    fuel.tick()?;
                    let cyl = CylSet::cylinder(w);
                    if st.claimed.contains_set(&cyl) {
                        continue;
                    }
                    if st.visible.contains_set(&cyl) {
                        st.claimed = st.claimed.union(&cyl);
                        pieces.push(DhatPiece::from_word(w));
                    }
                }
            }
            if pieces.is_empty() {
                pieces.push(DhatPiece::filler());
            }
            st.blocks.push(pieces);
        }
    }
}

/// An open set split into pairwise disjoint clopen cylinders grouped in
/// blocks of shrinking formal diameter.  Block n claims the cylinders at
/// depth `block_depth(n)` found inside the set so far and not claimed at
/// a coarser scale; a flagged-empty filler keeps every block nonempty, so
/// block lengths are always positive.  Completeness is fuel-relative: a
/// region of the set announced at stream position p is claimed once both
/// the block depth and the scan horizon pass it.
#[derive(Clone)]
pub struct DhatOutput {
    inner: Arc<DhatInner>,
}

/// Decompose an open subset of a compact ambient space into blocks of
/// small clopen pieces.
pub fn dhat(u: &OpenName, k: &CoverName) -> DhatOutput {
    assert!(u.space().is_cantor(), "decomposition mines cylinders of Cantor space");
    assert!(u.space() == k.space(), "open set and ambient compact set disagree");
    DhatOutput {
        inner: Arc::new(DhatInner {
            u: u.clone(),
            state: Mutex::new(DhatState {
                scanned: 0,
                visible: CylSet::empty(),
                claimed: CylSet::empty(),
                blocks: Vec::new(),
            }),
        }),
    }
}

impl DhatOutput {
    /// Length of block n, always at least one.
    pub fn xi(&self, n: u64, fuel: &mut Fuel) -> RunResult<u64> {
        self.inner.ensure_blocks(n, fuel)?;
        Ok(self.inner.state.lock().unwrap().blocks[n as usize].len() as u64)
    }

    pub fn block(&self, n: u64, fuel: &mut Fuel) -> RunResult<Vec<DhatPiece>> {
        self.inner.ensure_blocks(n, fuel)?;
        Ok(self.inner.state.lock().unwrap().blocks[n as usize].clone())
    }

    /// Piece at a flat index, blocks concatenated in order.
    pub fn piece(&self, i: u64, fuel: &mut Fuel) -> RunResult<DhatPiece> {
        let mut seen = 0u64;
        for n in 0.. {
            let blk = self.block(n, fuel)?;
            if i < seen + blk.len() as u64 {
                return Ok(blk[(i - seen) as usize].clone());
            }
            seen += blk.len() as u64;
        }
        unreachable!("blocks never run out")
    }

    pub fn flag(&self, i: u64, fuel: &mut Fuel) -> RunResult<bool> {
        Ok(self.piece(i, fuel)?.flag)
    }

    /// Union of the pieces of blocks up to and including n.
    pub fn claimed_through(&self, n: u64, fuel: &mut Fuel) -> RunResult<CylSet> {
        self.inner.ensure_blocks(n, fuel)?;
        let st = self.inner.state.lock().unwrap();
        let mut out = CylSet::empty();
        for blk in &st.blocks[..=(n as usize)] {
            for p in blk {
                if let Some(w) = &p.word {
                    out = out.union(&CylSet::cylinder(*w));
                }
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Located sets and distance infima.

/// A nonempty closed set located two ways: a dense point listing and a
/// distance function realized from below, with the exact clopen value
/// kept when there is one.
#[derive(Clone)]
pub struct LocatedName {
    space: SpaceDescriptor,
    range: RangeName,
    dist: DistName,
    exact: Option<CylSet>,
}

impl LocatedName {
    pub fn new(range: RangeName, dist: DistName) -> LocatedName {
        assert!(range.space() == dist.space(), "listing and distance live on different spaces");
        LocatedName { space: range.space().clone(), range, dist, exact: None }
    }

    /// Locate a nonempty clopen subset of Cantor space.  The listing
    /// walks the ideal points inside the set in code order.
    pub fn from_cylset(set: &CylSet) -> LocatedName {
        assert!(!set.is_empty(), "an empty set cannot be located");
        let space = SpaceDescriptor::cantor();
        let found: Arc<Mutex<(u64, Vec<BigUint>)>> = Arc::new(Mutex::new((0, Vec::new())));
        let inner = set.clone();
        let name = Name::tuple_countable(move |i| {
            let found = found.clone();
            let set = inner.clone();
            Name::from_fn(move |_, fuel| {
                let mut st = found.lock().unwrap();
                while (st.1.len() as u64) <= i {
                    fuel.tick()?;
                    let code = BigUint::from(st.0);
                    st.0 += 1;
                    if let Some(w) = CWord::from_ideal_code(&code) {
                        if set.contains_point(&w.point_normal()) {
                            st.1.push(code);
                        }
                    }
                }
                Ok(&st.1[i as usize] + 1u32)
            })
        });
        LocatedName {
            space: space.clone(),
            range: RangeName::from_name(space, name),
            dist: DistName::from_cylset(set),
            exact: Some(set.clone()),
        }
    }

    /// Locate a single point.
    pub fn from_point(x: &CauchyName) -> LocatedName {
        let space = x.space().clone();
        let range = RangeName::from_points(space.clone(), vec![x.clone()]);
        let probe = x.clone();
        let dspace = space.clone();
        let dist = DistName::new(space.clone(), move |y| {
            let x = probe.clone();
            let y = y.clone();
            let space = dspace.clone();
            LowerRealName::from_increasing(move |step, fuel| {
                let j = (step + 1).min(60);
                let a = x.point_code_at(j, fuel)?;
                let b = y.point_code_at(j, fuel)?;
                let slack = pow2_neg(j as u32) * BigRational::from_integer(2.into());
                Ok(space.ideal_distance(&a, &b)? - slack)
            })
        });
        LocatedName { space, range, dist, exact: None }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn range(&self) -> &RangeName {
        &self.range
    }

    pub fn dist(&self) -> &DistName {
        &self.dist
    }

    pub fn exact(&self) -> Option<&CylSet> {
        self.exact.as_ref()
    }
}

/// Largest certified dyadic lower bound on a lower real within a bounded
/// probe budget, floored at zero.  Meant for distances, which never go
/// negative.
fn dyadic_lower(lr: &LowerRealName, effort: u64, fuel: &mut Fuel) -> RunResult<BigRational> {
    let level = effort.min(12) as u32;
    let steps = 2 * effort + 8;
    let mut lo: u64 = 0;
    let mut hi: u64 = 4u64 << level;
    while lo + 1 < hi {
        let mid = (lo + hi) / 2;
        let q = BigRational::from_integer(mid.into()) * pow2_neg(level);
        if lr.exceeds_within(&q, steps, fuel)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BigRational::from_integer(lo.into()) * pow2_neg(level))
}

/// Certified lower bound on the distance from a located set to an ideal
/// point: exact on clopen values, a bounded dyadic ladder otherwise.
fn center_dist_lower(
    a: &LocatedName,
    center: &BigUint,
    effort: u64,
    fuel: &mut Fuel,
) -> RunResult<BigRational> {
    if let Some(set) = a.exact() {
        if let Some(w) = CWord::from_ideal_code(center) {
            fuel.tick()?;
            return Ok(set
                .point_distance(&w.point_normal())
                .expect("located sets are nonempty"));
        }
    }
    let lr = a.dist().eval(&CauchyName::from_ideal(a.space().clone(), center));
    dyadic_lower(&lr, effort, fuel)
}

/// Distance bound readable off one listed cover: the least over its balls
/// of certified center distance minus radius.  An empty cover bounds the
/// distance by every rational at once, represented by the caller's cap.
fn cover_distance_bound(
    a: &LocatedName,
    cover: &[IdealBall],
    effort: u64,
    unbounded: &BigRational,
    fuel: &mut Fuel,
) -> RunResult<BigRational> {
    let mut bound: Option<BigRational> = None;
    for b in cover {
        let lb = center_dist_lower(a, &b.center, effort, fuel)? - b.radius();
        bound = Some(match bound {
            None => lb,
            Some(cur) => cur.min(lb),
        });
    }
    Ok(bound.unwrap_or_else(|| unbounded.clone()))
}

/// Ball covers a backed compact set announces at canonical stage codes:
/// stage-g points at radius 2^{-g+1} or 2^{-g}.  Each variant is kept
/// only when the listing actually announces its code near the certifying
/// grade, and only while the code stays inside the position range of the
/// desk; covers whose codes or positions leave it are simply not probed,
/// so the bounds below saturate at the listable resolution.
fn listed_stage_covers(
    k: &CoverName,
    cd: &Arc<dyn CompactData>,
    g: u32,
    fuel: &mut Fuel,
) -> RunResult<Vec<Vec<IdealBall>>> {
    let stage = cd.stage(g, fuel)?;
    if stage.is_empty() || stage.len() > 4 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for r in [pow2_neg(g - 1), pow2_neg(g)] {
        let balls: Vec<IdealBall> =
            stage.iter().map(|p| IdealBall::new(p.clone(), &r)).collect();
        let code = encode_cover(&balls);
        let Ok(c) = u64::try_from(&code) else { continue };
        for gp in g.saturating_sub(2)..=g + 3 {
            let s = c as u128 + gp as u128;
            let pos = s * (s + 1) / 2 + gp as u128;
            let Ok(pos) = u64::try_from(pos) else { continue };
            if !k.name().at(pos, fuel)?.is_zero() {
                out.push(balls);
                break;
            }
        }
    }
    Ok(out)
}

/// Lower bounds on the distance from a located closed set to a listed
/// compact set, tightening cover by cover: each listed cover bounds the
/// distance by the least over its balls of certified center distance
/// minus radius, and a listed empty cover bounds it by every rational at
/// once.  Bounds only improve through covers the listing announces within
/// the probed effort, so precision is fuel-relative.
pub fn inf_dist(a: &LocatedName, k: &CoverName) -> LowerRealName {
    assert!(a.space() == k.space(), "located set and compact set live on different spaces");
    let a = a.clone();
    let k = k.clone();
    LowerRealName::from_increasing(move |step, fuel| {
        let mut best = -pow2_neg(step.min(60) as u32);
        let unbounded = BigRational::from_integer(BigInt::from(step + 1));
        for cover in k.covers_upto((step + 1).min(4096), fuel)? {
            let b = cover_distance_bound(&a, &cover, step, &unbounded, fuel)?;
            if b > best {
                best = b;
            }
        }
        if let Some(cd) = k.backing() {
            if !cd.is_empty(fuel)? {
                for g in 1..=(step.min(10) as u32) {
                    for cover in listed_stage_covers(&k, cd, g, fuel)? {
                        let b = cover_distance_bound(&a, &cover, step, &unbounded, fuel)?;
                        if b > best {
                            best = b;
                        }
                    }
                }
            }
        }
        Ok(best)
    })
}

// ---------------------------------------------------------------------------
// Cover refinement along a dense listing.

/// A cover of the compact set each of whose balls formally fits within
/// `eps` of some listed point: returns the cover word and one witness
/// index per ball.  Candidates come from the listing prefix and, for
/// backed sets, the canonical stage covers verified to cover the set
/// against a finer stage.
pub fn formally_refining_cover(
    k: &CoverName,
    s: &RangeName,
    eps: &BigRational,
    fuel: &mut Fuel,
) -> RunResult<(BigUint, Vec<u64>)> {
    assert!(k.space() == s.space(), "compact set and listing live on different spaces");
    let space = k.space().clone();
    for round in 0u32..40 {
        let mut candidates = k.covers_upto((64u64 << round.min(10)).min(65536), fuel)?;
        if let Some(cd) = k.backing() {
            if !cd.is_empty(fuel)? {
                for g in 1..=round.min(12) {
                    let stage = cd.stage(g, fuel)?;
                    if stage.is_empty() {
                        continue;
                    }
                    let r = pow2_neg(g - 1);
                    let balls: Vec<IdealBall> =
                        stage.iter().map(|p| IdealBall::new(p.clone(), &r)).collect();
                    let finer = cd.stage(g + 2, fuel)?;
                    if cert_covers(&space, &finer, g + 2, &balls, fuel)? {
                        candidates.push(balls);
                    }
                }
            }
        }
        for cover in candidates {
            if let Some(wit) = refine_witnesses(&space, &cover, s, eps, round, fuel)? {
                return Ok((encode_cover(&cover), wit));
            }
        }
    }
    Err(RunError::OutOfFuel)
}

fn refine_witnesses(
    space: &SpaceDescriptor,
    cover: &[IdealBall],
    s: &RangeName,
    eps: &BigRational,
    round: u32,
    fuel: &mut Fuel,
) -> RunResult<Option<Vec<u64>>> {
    let depth = (round as u64 + 4).min(60);
    let slack = pow2_neg(depth as u32);
    let mut wit = Vec::with_capacity(cover.len());
    'balls: for b in cover {
        for j in 0..(8u64 << round.min(10)) {
            fuel.tick()?;
            let Some(p) = s.point(j, fuel)? else { break };
            let code = p.point_code_at(depth, fuel)?;
            if space.ideal_distance(&b.center, &code)? + &slack + b.radius() < *eps {
                wit.push(j);
                continue 'balls;
            }
        }
        return Ok(None);
    }
    Ok(Some(wit))
}

// ---------------------------------------------------------------------------
// Retraction onto a located closed set.

/// The open complement of a located set, from the exact value when kept
/// and otherwise by sweeping candidate balls against certified distance
/// lower bounds: a ball joins the complement once the distance from the
/// set to its center certifiably exceeds its radius.
fn complement_open(a: &LocatedName) -> OpenName {
    if let Some(set) = a.exact() {
        return OpenName::from_cylset(&set.complement());
    }
    let space = a.space().clone();
    let sp = space.clone();
    let dist = a.dist().clone();
    let cache: Arc<Mutex<HashMap<(u64, u32), bool>>> = Arc::new(Mutex::new(HashMap::new()));
    let cert = move |c: u64, g: u32, fuel: &mut Fuel| -> RunResult<bool> {
        if let Some(v) = cache.lock().unwrap().get(&(c, g)) {
            return Ok(*v);
        }
        let out = match sweep_candidate_ball(&sp, c) {
            None => false,
            Some(ball) => {
                let center = CauchyName::from_ideal(sp.clone(), &ball.center);
                dist.eval(&center).exceeds_within(&ball.radius(), 2 * g as u64 + 12, fuel)?
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
        match sweep_candidate_ball(&announce_space, c) {
            Some(ball) => Ok(ball.code() + 1u32),
            None => Ok(BigUint::zero()),
        }
    });
    OpenName::from_name(space, name)
}

struct Retraction {
    space: SpaceDescriptor,
    target_set: LocatedName,
    pieces: DhatOutput,
    targets: Mutex<HashMap<u64, CauchyName>>,
}

impl Retraction {
    /// The chosen image point of a piece, memoized by flat index: the
    /// first listed point of the set certified closer to the piece's
    /// anchor than the certified set-to-anchor distance plus the index
    /// slack.  The anchor sits inside the piece, and every point of the
    /// piece is equidistant from any point outside it by ultrametricity,
    /// so the distance from the set to the anchor is exactly the distance
    /// to the piece and the acceptance is always satisfiable.
    fn target(&self, flat: u64, piece: &DhatPiece, fuel: &mut Fuel) -> RunResult<CauchyName> {
        if let Some(t) = self.targets.lock().unwrap().get(&flat) {
            return Ok(t.clone());
        }
        let w = *piece.word().expect("only real pieces get targets");
        let anchor = w.ideal_code();
        let slack = BigRational::new(BigInt::from(1), BigInt::from(flat + 1));
        for round in 1u64..=40 {
            let lower = center_dist_lower(&self.target_set, &anchor, round * 2, fuel)?;
            let depth = (round + 2).min(60);
            for j in 0..(4u64 << round.min(12)) {
                fuel.tick()?;
                let Some(p) = self.target_set.range().point(j, fuel)? else { break };
                let code = p.point_code_at(depth, fuel)?;
                let upper = self.space.ideal_distance(&anchor, &code)? + pow2_neg(depth as u32);
                if upper < &lower + &slack {
                    self.targets.lock().unwrap().insert(flat, p.clone());
                    return Ok(p);
                }
            }
        }
        Err(RunError::OutOfFuel)
    }

    /// A member point of the target set certified inside the window, as
    /// an ideal code: the exact intersection when available, otherwise a
    /// bounded scan of the listing at window depth.
    fn member_in(&self, w: &CWord, cyl: &CylSet, fuel: &mut Fuel) -> RunResult<Option<BigUint>> {
        if let Some(set) = self.target_set.exact() {
            fuel.tick()?;
            let meet = set.intersect(cyl);
            return Ok(meet.cylinders().first().map(|v| v.ideal_code()));
        }
        let depth = (w.len() as u64 + 2).min(60);
        for j in 0..256 {
            fuel.tick()?;
            let Some(p) = self.target_set.range().point(j, fuel)? else { break };
            let code = p.point_code_at(depth, fuel)?;
            if let Some(u) = CWord::from_ideal_code(&code) {
                // The approximation sits strictly closer than the window
                // mesh, so its depth-|w| prefix is the point's.
                if cyl.contains_point(&u) {
                    return Ok(Some(code));
                }
            }
        }
        Ok(None)
    }
}

impl EndoFn for Retraction {
    fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    /// Route the input window: a window meeting the set hugs a member
    /// point, with the radius paying for the targets of pieces inside the
    /// window; a window swallowed whole by a piece maps near the piece's
    /// target point; a window resolved by neither keeps the whole space
    /// as its bound, which is always sound.
    fn image_ball(&self, ball: &IdealBall, k: u32, fuel: &mut Fuel) -> RunResult<IdealBall> {
        let w = cantor_ball_word(ball, false)?;
        let cyl = CylSet::cylinder(w);
        let wide = BigRational::from_integer(2.into());
        if let Some(found) = self.member_in(&w, &cyl, fuel)? {
            // Points of the window inside the set stay put; points in
            // pieces within the window move at most the window width plus
            // the piece-index slack, and pieces that deep lie in blocks
            // past 2^{|w|-2}, keeping the slack below four window widths.
            let r = if w.len() >= 4 { pow2_neg(w.len() as u32 - 3) } else { wide.clone() };
            return Ok(IdealBall::new(found, &r));
        }
        // A window missing the set lies inside the open complement, so
        // some prefix cylinder of it gets claimed as a piece once the
        // blocks reach its depth and its stream position.
        let budget = 1u64 << ((w.len() as u32).clamp(8, 12) - 2);
        let mut flat = 0u64;
        for n in 0..budget {
            for p in self.pieces.block(n, fuel)? {
                if p.flag() && p.set().contains_set(&cyl) {
                    let t = self.target(flat, &p, fuel)?;
                    let code = t.point_code_at(k as u64 + 2, fuel)?;
                    return Ok(IdealBall::new(code, &pow2_neg(k + 1)));
                }
                flat += 1;
            }
        }
        Ok(IdealBall::new(self.space.ideal_point(0), &wide))
    }
}

/// The self-map collapsing the complement of a located closed set piece
/// by piece: each decomposition piece goes to a listed point of the set
/// chosen against the piece's certified distance, and points of the set
/// stay put.
pub fn retraction_e(a: &LocatedName) -> Arc<dyn EndoFn> {
    assert!(a.space().is_cantor(), "retraction synthesis mines cylinders of Cantor space");
    let u = complement_open(a);
    let ambient = CoverName::from_compact(Arc::new(CylCompact::new(CylSet::full())));
    let pieces = dhat(&u, &ambient);
    Arc::new(Retraction {
        space: a.space().clone(),
        target_set: a.clone(),
        pieces,
        targets: Mutex::new(HashMap::new()),
    })
}
