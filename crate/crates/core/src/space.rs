//! Computable metric spaces at desk scale: built-in space descriptors with
//! exact rational distances on ideal points, ideal balls with coded radii,
//! formal inclusion, and the point-level name types (Cauchy names, real
//! names, lower real names).

use std::sync::{Arc, Mutex};

use num::bigint::{BigInt, BigUint};
use num::rational::BigRational;
use num::{One, Signed, Zero};

use crate::cantor::{pow2_neg, CWord};
use crate::fuel::{Fuel, RunError, RunResult};
use crate::names::{pair_big, unpair_big, Name, PaddedSource};

// ---------------------------------------------------------------------------
// Rational codings.

fn zigzag_decode(u: &BigUint) -> BigInt {
    let two = BigUint::from(2u8);
    if (u % &two).is_zero() {
        BigInt::from(u / &two)
    } else {
        -BigInt::from((u + 1u32) / &two)
    }
}

fn zigzag_encode(z: &BigInt) -> BigUint {
    if z.is_negative() {
        ((-z).to_biguint().unwrap() * 2u32) - 1u32
    } else {
        z.to_biguint().unwrap() * 2u32
    }
}

/// Total coding of the rationals: `code = pair(zigzag(p), d−1)` for `p/d`.
pub fn nu_q(code: &BigUint) -> BigRational {
    let (u, v) = unpair_big(code);
    BigRational::new(zigzag_decode(&u), BigInt::from(v + 1u32))
}

/// Least code of a rational.
///
/// Preimages of `p/d` (reduced) are `pair(zigzag(kp), kd−1)`; both pairing
/// arguments grow strictly with `k`, so `k = 1` gives the least code.
pub fn nu_q_bar(q: &BigRational) -> BigUint {
    let u = zigzag_encode(q.numer());
    let v = q.denom().to_biguint().expect("reduced denominator is positive") - 1u32;
    pair_big(&u, &v)
}

/// Total coding of the strictly positive rationals: `pair(a, b) ↦ (a+1)/(b+1)`.
pub fn nu_qplus(code: &BigUint) -> BigRational {
    let (a, b) = unpair_big(code);
    BigRational::new(BigInt::from(a + 1u32), BigInt::from(b + 1u32))
}

/// Least code of a positive rational (same diagonal argument as [`nu_q_bar`]).
pub fn nu_qplus_bar(q: &BigRational) -> BigUint {
    assert!(q.is_positive(), "radius codes are for strictly positive rationals");
    let a = q.numer().to_biguint().unwrap() - 1u32;
    let b = q.denom().to_biguint().unwrap() - 1u32;
    pair_big(&a, &b)
}

// ---------------------------------------------------------------------------
// Spaces.

/// The built-in computable metric spaces.
///
/// All of them have exact rational distances between ideal points, which is
/// what makes the formal predicates below decidable rather than merely
/// semidecidable.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SpaceKind {
    /// Binary sequences, `d = 2^{-first difference}`; ideal points are the
    /// eventually-zero sequences coded by their finite prefix words.
    Cantor,
    /// Naturals with the discrete metric.
    Nat,
    /// Reals with `d = |x−y|`; ideal points are the rationals.
    Reals,
    /// Binary product under the max metric; ideal codes are pairs.
    Product(Box<SpaceDescriptor>, Box<SpaceDescriptor>),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SpaceDescriptor {
    pub kind: SpaceKind,
}

impl SpaceDescriptor {
    pub fn cantor() -> SpaceDescriptor {
        SpaceDescriptor { kind: SpaceKind::Cantor }
    }

    pub fn nat() -> SpaceDescriptor {
        SpaceDescriptor { kind: SpaceKind::Nat }
    }

    pub fn reals() -> SpaceDescriptor {
        SpaceDescriptor { kind: SpaceKind::Reals }
    }

    pub fn product(a: SpaceDescriptor, b: SpaceDescriptor) -> SpaceDescriptor {
        SpaceDescriptor { kind: SpaceKind::Product(Box::new(a), Box::new(b)) }
    }

    pub fn is_cantor(&self) -> bool {
        matches!(self.kind, SpaceKind::Cantor)
    }

    pub fn is_compact(&self) -> bool {
        match &self.kind {
            SpaceKind::Cantor => true,
            SpaceKind::Nat | SpaceKind::Reals => false,
            SpaceKind::Product(a, b) => a.is_compact() && b.is_compact(),
        }
    }

    /// An upper bound on the diameter, when one exists.
    pub fn diameter_bound(&self) -> Option<BigRational> {
        match &self.kind {
            SpaceKind::Cantor | SpaceKind::Nat => Some(BigRational::one()),
            SpaceKind::Reals => None,
            SpaceKind::Product(a, b) => {
                let (da, db) = (a.diameter_bound()?, b.diameter_bound()?);
                Some(da.max(db))
            }
        }
    }

    /// Is `code` the code of an ideal point?
    pub fn ideal_in_domain(&self, code: &BigUint) -> bool {
        match &self.kind {
            SpaceKind::Cantor => CWord::from_ideal_code(code).is_some(),
            SpaceKind::Nat | SpaceKind::Reals => true,
            SpaceKind::Product(a, b) => {
                let (ca, cb) = unpair_big(code);
                a.ideal_in_domain(&ca) && b.ideal_in_domain(&cb)
            }
        }
    }

    /// Exact distance between two ideal points.
    pub fn ideal_distance(&self, a: &BigUint, b: &BigUint) -> RunResult<BigRational> {
        match &self.kind {
            SpaceKind::Cantor => {
                let wa = CWord::from_ideal_code(a)
                    .ok_or_else(|| RunError::Violation("not a binary word code".into()))?;
                let wb = CWord::from_ideal_code(b)
                    .ok_or_else(|| RunError::Violation("not a binary word code".into()))?;
                Ok(wa.point_distance(&wb))
            }
            SpaceKind::Nat => Ok(if a == b { BigRational::zero() } else { BigRational::one() }),
            SpaceKind::Reals => Ok((nu_q(a) - nu_q(b)).abs()),
            SpaceKind::Product(sa, sb) => {
                let (a0, a1) = unpair_big(a);
                let (b0, b1) = unpair_big(b);
                let d0 = sa.ideal_distance(&a0, &b0)?;
                let d1 = sb.ideal_distance(&a1, &b1)?;
                Ok(d0.max(d1))
            }
        }
    }

    /// The canonical dense enumeration of ideal points.
    pub fn ideal_point(&self, i: u64) -> BigUint {
        match &self.kind {
            SpaceKind::Cantor => {
                // Bijection with binary words in length-then-lex order:
                // i+1 written in binary, leading 1 dropped, read MSB first.
                let n = i + 1;
                let len = 63 - n.leading_zeros() as u8;
                let mut w = CWord::root();
                for j in (0..len).rev() {
                    w = w.child((n >> j) & 1 == 1);
                }
                w.ideal_code()
            }
            SpaceKind::Nat | SpaceKind::Reals => BigUint::from(i),
            SpaceKind::Product(a, b) => {
                let (ia, ib) = crate::names::unpair(i);
                pair_big(&a.ideal_point(ia), &b.ideal_point(ib))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Ideal balls and formal inclusion.

/// An open ball about an ideal point, with a coded positive rational radius.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct IdealBall {
    pub center: BigUint,
    pub radius_code: BigUint,
}

impl IdealBall {
    pub fn new(center: BigUint, radius: &BigRational) -> IdealBall {
        IdealBall { center, radius_code: nu_qplus_bar(radius) }
    }

    pub fn code(&self) -> BigUint {
        pair_big(&self.center, &self.radius_code)
    }

    pub fn from_code(code: &BigUint) -> IdealBall {
        let (center, radius_code) = unpair_big(code);
        IdealBall { center, radius_code }
    }

    pub fn radius(&self) -> BigRational {
        nu_qplus(&self.radius_code)
    }
}

/// Formal inclusion `⟨a,r⟩ ⊏ ⟨b,q⟩  :⟺  d(ν(a), ν(b)) + r < q`.
///
/// Implies that the closed ball of the left side sits inside the open ball
/// of the right side.  Decidable on the built-ins because ideal distances
/// are exact.
pub fn formally_inside(space: &SpaceDescriptor, inner: &IdealBall, outer: &IdealBall) -> RunResult<bool> {
    let d = space.ideal_distance(&inner.center, &outer.center)?;
    Ok(d + inner.radius() < outer.radius())
}

/// Formal disjointness of two balls: `d(centers) > r + q`.
///
/// Implies the closed balls are disjoint.
pub fn formally_disjoint_balls(
    space: &SpaceDescriptor,
    a: &IdealBall,
    b: &IdealBall,
) -> RunResult<bool> {
    let d = space.ideal_distance(&a.center, &b.center)?;
    Ok(d > a.radius() + b.radius())
}

/// The cylinder a Cantor-space ball is equal to as a set.
///
/// Distances take only the values 2^{-i}, so the ball about `c·0^ω` of
/// radius r pins exactly the first t digits of the center, with t the least
/// index whose scale fits under the radius (strictly for an open ball).
/// Radii below the word-length cap are refused as out of desk resolution.
pub fn cantor_ball_word(ball: &IdealBall, closed: bool) -> RunResult<crate::cantor::CWord> {
    use crate::cantor::CWord;
    let center = CWord::from_ideal_code(&ball.center)
        .ok_or_else(|| RunError::Violation("ball center is not a Cantor ideal code".into()))?;
    let r = ball.radius();
    let mut t: u8 = 0;
    loop {
        let scale = crate::cantor::pow2_neg(t as u32);
        let fits = if closed { scale <= r } else { scale < r };
        if fits {
            break;
        }
        if t >= CWord::MAX_LEN {
            return Err(RunError::OutOfFuel);
        }
        t += 1;
    }
    let mut w = CWord::root();
    for i in 0..t {
        w = w.child(center.bit(i));
    }
    Ok(w)
}

// ---------------------------------------------------------------------------
// Cauchy names.

type ApproxFn = dyn Fn(u32, &mut Fuel) -> RunResult<BigUint> + Send + Sync;

/// A point given by a fast-converging sequence of ideal points:
/// `d(ν(p_i), ν(p_j)) < 2^{-min(i,j)}`.
///
/// The modulus is checked lazily across all demanded positions; a violation
/// is a representation error, not a wrong answer.
#[derive(Clone)]
pub struct CauchyName {
    space: SpaceDescriptor,
    name: Name,
    checked: Arc<Mutex<Vec<(u64, BigUint)>>>,
}

impl CauchyName {
    pub fn from_name(space: SpaceDescriptor, name: Name) -> CauchyName {
        CauchyName { space, name, checked: Arc::new(Mutex::new(Vec::new())) }
    }

    /// The constant name of an ideal point.
    pub fn from_ideal(space: SpaceDescriptor, code: &BigUint) -> CauchyName {
        assert!(space.ideal_in_domain(code), "ideal code outside the domain");
        let c = code.clone();
        CauchyName::from_name(space, Name::from_fn(move |_, _| Ok(c.clone())))
    }

    /// Build from an approximator with `d(x, ν(f(k))) ≤ 2^{-k}`.
    pub fn from_approximator(
        space: SpaceDescriptor,
        f: impl Fn(u32, &mut Fuel) -> RunResult<BigUint> + Send + Sync + 'static,
    ) -> CauchyName {
        // Position i carries f(i+2), so demanded pairs satisfy the strict
        // modulus: 2^{-i-2} + 2^{-j-2} < 2^{-min(i,j)}.
        let f: Arc<ApproxFn> = Arc::new(f);
        CauchyName::from_name(
            space,
            Name::from_fn(move |i, fuel| f(u32::try_from(i).unwrap_or(u32::MAX).saturating_add(2), fuel)),
        )
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn name(&self) -> &Name {
        &self.name
    }

    /// Demand the ideal-point code at position `i`, with the modulus check
    /// against every previously demanded position.
    pub fn point_code_at(&self, i: u64, fuel: &mut Fuel) -> RunResult<BigUint> {
        let code = self.name.at(i, fuel)?;
        if !self.space.ideal_in_domain(&code) {
            return Err(RunError::Violation(format!(
                "Cauchy name position {i} is not an ideal point code"
            )));
        }
        let mut checked = self.checked.lock().unwrap();
        if !checked.iter().any(|(j, _)| *j == i) {
            for (j, prior) in checked.iter() {
                let d = self.space.ideal_distance(&code, prior)?;
                let bound = pow2_neg(u32::try_from(i.min(*j)).unwrap_or(u32::MAX));
                if d >= bound {
                    return Err(RunError::Violation(format!(
                        "Cauchy modulus violated between positions {i} and {j}"
                    )));
                }
            }
            checked.push((i, code.clone()));
        }
        Ok(code)
    }

    /// An ideal point within `2^{-k}` of the point (position `k` suffices:
    /// the tail of the modulus gives `d(x, ν(p_k)) ≤ 2^{-k}`).
    pub fn approx_code(&self, k: u32, fuel: &mut Fuel) -> RunResult<BigUint> {
        self.point_code_at(k as u64, fuel)
    }
}

/// Semidecide membership of a point in an ideal ball, with definite
/// rejection when the point is formally outside the closed ball.
///
/// Scans precisions: at stage `j` the point is within `2^{-j}` of `ν(p_j)`,
/// so `d(ν(p_j), c) + 2^{-j} < r` certifies membership and
/// `d(ν(p_j), c) − 2^{-j} > r` certifies exclusion.  Boundary points
/// exhaust the fuel instead of answering.
pub fn ball_member(x: &CauchyName, ball: &IdealBall, fuel: &mut Fuel) -> RunResult<bool> {
    for j in 0.. {
        if let Some(v) = ball_member_probe(x, ball, j, fuel)? {
            return Ok(v);
        }
    }
    unreachable!()
}

/// One precision level of the membership scan: `Some(answer)` when the
/// approximation at level `j` separates the point from the ball boundary,
/// `None` when it does not.  Never blocks, so it can be dovetailed.
pub fn ball_member_probe(
    x: &CauchyName,
    ball: &IdealBall,
    j: u32,
    fuel: &mut Fuel,
) -> RunResult<Option<bool>> {
    fuel.tick()?;
    let r = ball.radius();
    let code = x.approx_code(j, fuel)?;
    let d = x.space().ideal_distance(&code, &ball.center)?;
    let slack = pow2_neg(j);
    if &d + &slack < r {
        return Ok(Some(true));
    }
    if &d - &slack > r {
        return Ok(Some(false));
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Real names.

/// A real given by a fast-converging sequence of rationals
/// (a Cauchy name over the real line).
#[derive(Clone)]
pub struct RealName {
    inner: CauchyName,
}

impl RealName {
    pub fn from_cauchy(inner: CauchyName) -> RealName {
        assert!(matches!(inner.space().kind, SpaceKind::Reals));
        RealName { inner }
    }

    pub fn from_rational(q: &BigRational) -> RealName {
        RealName {
            inner: CauchyName::from_ideal(SpaceDescriptor::reals(), &nu_q_bar(q)),
        }
    }

    /// Build from an approximator with `|x − f(k)| ≤ 2^{-k}`.
    pub fn from_approximator(
        f: impl Fn(u32, &mut Fuel) -> RunResult<BigRational> + Send + Sync + 'static,
    ) -> RealName {
        RealName {
            inner: CauchyName::from_approximator(SpaceDescriptor::reals(), move |k, fuel| {
                Ok(nu_q_bar(&f(k, fuel)?))
            }),
        }
    }

    pub fn cauchy(&self) -> &CauchyName {
        &self.inner
    }

    /// A rational within `2^{-k}` of the real.
    pub fn approx(&self, k: u32, fuel: &mut Fuel) -> RunResult<BigRational> {
        Ok(nu_q(&self.inner.approx_code(k, fuel)?))
    }

    /// Decide the order against a rational, given they differ.
    ///
    /// Exhausts fuel if the real equals `q`.
    pub fn compare_rational(&self, q: &BigRational, fuel: &mut Fuel) -> RunResult<std::cmp::Ordering> {
        for k in 0.. {
            fuel.tick()?;
            let a = self.approx(k, fuel)?;
            let eps = pow2_neg(k);
            if &a + &eps < *q {
                return Ok(std::cmp::Ordering::Less);
            }
            if &a - &eps > *q {
                return Ok(std::cmp::Ordering::Greater);
            }
        }
        unreachable!()
    }
}

// ---------------------------------------------------------------------------
// Lower real names.

/// A lower real: a padded enumeration of (codes of) all rationals strictly
/// below the value.  `+∞` is the enumeration of every rational.
#[derive(Clone)]
pub struct LowerRealName {
    name: Name,
}

impl LowerRealName {
    pub fn from_name(name: Name) -> LowerRealName {
        LowerRealName { name }
    }

    /// Enumerate below a known rational.
    pub fn from_rational(q: &BigRational) -> LowerRealName {
        let q = q.clone();
        LowerRealName::from_increasing(move |_, _| Ok(q.clone()))
    }

    /// Enumerate below `+∞`.
    pub fn infinite() -> LowerRealName {
        LowerRealName::from_increasing(|s, _| Ok(BigRational::from_integer(BigInt::from(s))))
    }

    /// Build from a nondecreasing sequence of lower bounds with supremum the
    /// value: job `m` announces code `m` once a bound exceeds `ν_Q(m)`.
    pub fn from_increasing(
        bounds: impl Fn(u64, &mut Fuel) -> RunResult<BigRational> + Send + Sync + 'static,
    ) -> LowerRealName {
        struct Source<F>(F);
        impl<F: Fn(u64, &mut Fuel) -> RunResult<BigRational> + Send + Sync> PaddedSource for Source<F> {
            fn emit_at(&self, job: u64, step: u64, fuel: &mut Fuel) -> RunResult<Option<BigUint>> {
                let q = nu_q(&BigUint::from(job));
                let now = (self.0)(step, fuel)?;
                if q >= now {
                    return Ok(None);
                }
                // Announce exactly once: at the first step whose bound clears q.
                if step > 0 {
                    let before = (self.0)(step - 1, fuel)?;
                    if q < before {
                        return Ok(None);
                    }
                }
                Ok(Some(BigUint::from(job)))
            }
        }
        LowerRealName { name: crate::names::padded_enumeration(Arc::new(Source(bounds))) }
    }

    pub fn name(&self) -> &Name {
        &self.name
    }

    /// Best enumerated lower bound over stream positions `0..upto`.
    pub fn best_lower_bound(&self, upto: u64, fuel: &mut Fuel) -> RunResult<Option<BigRational>> {
        let mut best: Option<BigRational> = None;
        for v in crate::names::padded_values(&self.name, upto, fuel)? {
            let q = nu_q(&v);
            best = Some(match best {
                None => q,
                Some(cur) => cur.max(q),
            });
        }
        Ok(best)
    }

    /// Bounded probe for `value > q`: read the first `steps` slots of the
    /// enumeration job owned by `q`'s least code.  Sound for any padded
    /// stream (an announced code certifies whatever it decodes to); finding
    /// the announcement within the budget is only promised for names laid
    /// out by [`LowerRealName::from_increasing`].  `false` means not yet.
    pub fn exceeds_within(&self, q: &BigRational, steps: u64, fuel: &mut Fuel) -> RunResult<bool> {
        let job = match u64::try_from(&nu_q_bar(q)) {
            // Keep the dovetail positions inside the desk's index range.
            Ok(j) if j < (1 << 31) => j,
            _ => return Ok(false),
        };
        for s in 0..steps {
            fuel.tick()?;
            let v = self.name.at(crate::names::dovetail_position(job, s), fuel)?;
            if !v.is_zero() && nu_q(&(&v - 1u32)) >= *q {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Semidecide `value > q` by scanning for an enumerated rational above `q`.
    pub fn exceeds(&self, q: &BigRational, fuel: &mut Fuel) -> RunResult<bool> {
        for pos in 0.. {
            fuel.tick()?;
            let s = self.name.at(pos, fuel)?;
            if !s.is_zero() && nu_q(&(&s - 1u32)) > *q {
                return Ok(true);
            }
        }
        unreachable!()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn rational_codings_are_total_sections() {
        for n in 0..400u32 {
            let code = BigUint::from(n);
            assert_eq!(nu_q_bar(&nu_q(&code)) <= code, true);
            assert_eq!(nu_q(&nu_q_bar(&nu_q(&code))), nu_q(&code));
            let qp = nu_qplus(&code);
            assert!(qp.is_positive());
            assert_eq!(nu_qplus(&nu_qplus_bar(&qp)), qp);
        }
        // Least-preimage property, checked by scan on small codes.
        for n in 0..200u32 {
            let q = nu_q(&BigUint::from(n));
            let bar = nu_q_bar(&q);
            for m in 0..u32::try_from(&bar).unwrap() {
                assert_ne!(nu_q(&BigUint::from(m)), q, "code {m} precedes bar {bar}");
            }
        }
        assert_eq!(nu_qplus(&pair_big(&BigUint::zero(), &BigUint::one())), rat(1, 2));
    }

    #[test]
    fn ideal_enumerations_are_dense_and_well_formed() {
        let c = SpaceDescriptor::cantor();
        let mut seen = std::collections::HashSet::new();
        for i in 0..31 {
            let code = c.ideal_point(i);
            assert!(c.ideal_in_domain(&code));
            let w = CWord::from_ideal_code(&code).unwrap();
            assert!(w.len() <= 4);
            seen.insert(w);
        }
        assert_eq!(seen.len(), 31); // all words of length ≤ 4

        let prod = SpaceDescriptor::product(SpaceDescriptor::cantor(), SpaceDescriptor::nat());
        for i in 0..20 {
            assert!(prod.ideal_in_domain(&prod.ideal_point(i)));
        }
    }

    #[test]
    fn distances_are_exact() {
        let c = SpaceDescriptor::cantor();
        let a = CWord::parse("0").unwrap().ideal_code();
        let b = CWord::parse("011").unwrap().ideal_code();
        assert_eq!(c.ideal_distance(&a, &b).unwrap(), rat(1, 2));
        let n = SpaceDescriptor::nat();
        assert_eq!(n.ideal_distance(&BigUint::from(3u8), &BigUint::from(3u8)).unwrap(), rat(0, 1));
        assert_eq!(n.ideal_distance(&BigUint::from(3u8), &BigUint::from(4u8)).unwrap(), rat(1, 1));
        let r = SpaceDescriptor::reals();
        assert_eq!(
            r.ideal_distance(&nu_q_bar(&rat(1, 3)), &nu_q_bar(&rat(-1, 6))).unwrap(),
            rat(1, 2)
        );
        let p = SpaceDescriptor::product(SpaceDescriptor::cantor(), SpaceDescriptor::reals());
        let pa = pair_big(&a, &nu_q_bar(&rat(0, 1)));
        let pb = pair_big(&b, &nu_q_bar(&rat(1, 4)));
        assert_eq!(p.ideal_distance(&pa, &pb).unwrap(), rat(1, 2));
    }

    #[test]
    fn formal_inclusion_is_strict_and_sound() {
        let c = SpaceDescriptor::cantor();
        let w0 = CWord::parse("0").unwrap();
        let inner = IdealBall::new(w0.child(false).ideal_code(), &rat(1, 8));
        let outer = IdealBall::new(w0.ideal_code(), &rat(1, 2));
        assert!(formally_inside(&c, &inner, &outer).unwrap()); // 0 + 1/8 < 1/2
        // Equality on the nose is rejected: d + r = q fails the strict test.
        let tight = IdealBall::new(w0.ideal_code(), &rat(1, 8));
        let exact = IdealBall::new(w0.ideal_code(), &rat(1, 8));
        assert!(!formally_inside(&c, &tight, &exact).unwrap());
        let far = IdealBall::new(CWord::parse("1").unwrap().ideal_code(), &rat(1, 4));
        assert!(formally_disjoint_balls(&c, &inner, &far).unwrap()); // 1 > 1/8 + 1/4
    }

    #[test]
    fn cauchy_names_validate_their_modulus() {
        let c = SpaceDescriptor::cantor();
        let good = CauchyName::from_ideal(c.clone(), &CWord::parse("01").unwrap().ideal_code());
        let mut fuel = Fuel::new(10_000);
        assert!(good.point_code_at(0, &mut fuel).is_ok());
        assert!(good.point_code_at(5, &mut fuel).is_ok());

        // Jumps by a whole unit between positions 0 and 1: violation.
        let bad = CauchyName::from_name(
            c,
            Name::from_fn(|i, _| {
                let w = if i % 2 == 0 { CWord::root() } else { CWord::parse("1").unwrap() };
                Ok(w.ideal_code())
            }),
        );
        assert!(bad.point_code_at(0, &mut fuel).is_ok());
        assert!(matches!(bad.point_code_at(1, &mut fuel), Err(RunError::Violation(_))));
    }

    #[test]
    fn ball_membership_certifies_both_sides() {
        let c = SpaceDescriptor::cantor();
        let x = CauchyName::from_ideal(c.clone(), &CWord::parse("00").unwrap().ideal_code());
        let inside = IdealBall::new(CWord::root().ideal_code(), &rat(1, 2));
        let mut fuel = Fuel::new(10_000);
        assert_eq!(ball_member(&x, &inside, &mut fuel).unwrap(), true);
        let away = IdealBall::new(CWord::parse("1").unwrap().ideal_code(), &rat(1, 2));
        assert_eq!(ball_member(&x, &away, &mut fuel).unwrap(), false);
        // Boundary: d = 1/4 equals the radius; only fuel exhaustion remains.
        let boundary = IdealBall::new(CWord::parse("001").unwrap().ideal_code(), &rat(1, 4));
        let mut small = Fuel::new(200);
        assert_eq!(ball_member(&x, &boundary, &mut small), Err(RunError::OutOfFuel));
    }

    #[test]
    fn real_names_approximate_and_compare() {
        let third = RealName::from_approximator(|k, _| {
            // Binary truncation of 1/3 at precision k.
            let scale = BigInt::from(1u8) << k;
            Ok(BigRational::new(&scale / BigInt::from(3u8), scale))
        });
        let mut fuel = Fuel::new(100_000);
        let a = third.approx(10, &mut fuel).unwrap();
        assert!((a - rat(1, 3)).abs() <= pow2_neg(10));
        assert_eq!(third.compare_rational(&rat(1, 2), &mut fuel).unwrap(), std::cmp::Ordering::Less);
        assert_eq!(third.compare_rational(&rat(1, 4), &mut fuel).unwrap(), std::cmp::Ordering::Greater);
    }

    #[test]
    fn lower_reals_enumerate_below_the_value() {
        let mut fuel = Fuel::new(200_000);
        let l = LowerRealName::from_rational(&rat(3, 4));
        let best = l.best_lower_bound(600, &mut fuel).unwrap().unwrap();
        assert!(best < rat(3, 4));
        assert!(best >= rat(1, 2));
        assert!(l.exceeds(&rat(5, 8), &mut fuel).unwrap());
        // Unbounded value: rationals above any small threshold get enumerated
        // (large thresholds need codes far out in the schedule, so stay small).
        let inf = LowerRealName::infinite();
        assert!(inf.exceeds(&rat(3, 1), &mut fuel).unwrap());
    }
}
