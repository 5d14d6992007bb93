//! Brute-force resolution oracle on Cantor space.
//!
//! The oracle answers "which length-L cylinders meet / lie inside this set"
//! by evaluating a set description word by word with direct rational
//! arithmetic.  It deliberately shares no machinery with the stream-side
//! implementation it is used to judge: sets are described syntactically and
//! every decision is recomputed from the metric definition, subdividing
//! cylinders until a definite answer appears.  A description that cannot be
//! decided within the depth cap is reported as an error, never guessed.

use std::collections::BTreeSet;

use num::rational::BigRational;
use num::{Signed, Zero};

use crate::cantor::{pow2_neg, CWord};

/// Exact status of a cylinder against a set.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum Tri {
    /// The cylinder lies inside the set.
    Inside,
    /// The cylinder misses the set.
    Outside,
    /// The cylinder meets both the set and its complement.
    Split,
}

impl Tri {
    fn flip(self) -> Tri {
        match self {
            Tri::Inside => Tri::Outside,
            Tri::Outside => Tri::Inside,
            Tri::Split => Tri::Split,
        }
    }

    fn join_children(a: Tri, b: Tri) -> Tri {
        match (a, b) {
            (Tri::Inside, Tri::Inside) => Tri::Inside,
            (Tri::Outside, Tri::Outside) => Tri::Outside,
            _ => Tri::Split,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

/// Expressions evaluated by the oracle with its own interval logic.
#[derive(Clone, Debug)]
pub enum OracleExpr {
    Const(BigRational),
    /// Distance to the ideal point `w·0^ω`.
    Dist(CWord),
    Add(Box<OracleExpr>, Box<OracleExpr>),
    Sub(Box<OracleExpr>, Box<OracleExpr>),
    Mul(Box<OracleExpr>, Box<OracleExpr>),
    Min(Box<OracleExpr>, Box<OracleExpr>),
    Max(Box<OracleExpr>, Box<OracleExpr>),
    Scale(BigRational, Box<OracleExpr>),
}

impl OracleExpr {
    /// Exact value at the ideal point `p·0^ω`.
    pub fn eval_point(&self, p: &CWord) -> BigRational {
        match self {
            OracleExpr::Const(q) => q.clone(),
            OracleExpr::Dist(a) => a.point_distance(p),
            OracleExpr::Add(x, y) => x.eval_point(p) + y.eval_point(p),
            OracleExpr::Sub(x, y) => x.eval_point(p) - y.eval_point(p),
            OracleExpr::Mul(x, y) => x.eval_point(p) * y.eval_point(p),
            OracleExpr::Min(x, y) => x.eval_point(p).min(y.eval_point(p)),
            OracleExpr::Max(x, y) => x.eval_point(p).max(y.eval_point(p)),
            OracleExpr::Scale(q, x) => q * x.eval_point(p),
        }
    }

    /// Outward rational bounds for the range over the cylinder `[w]`.
    pub fn hull(&self, w: &CWord) -> (BigRational, BigRational) {
        match self {
            OracleExpr::Const(q) => (q.clone(), q.clone()),
            OracleExpr::Dist(a) => match divergence(a, w) {
                Some(i) => {
                    let d = pow2_neg(i as u32);
                    (d.clone(), d)
                }
                None => (BigRational::zero(), pow2_neg(w.len() as u32)),
            },
            OracleExpr::Add(x, y) => {
                let (xl, xh) = x.hull(w);
                let (yl, yh) = y.hull(w);
                (xl + yl, xh + yh)
            }
            OracleExpr::Sub(x, y) => {
                let (xl, xh) = x.hull(w);
                let (yl, yh) = y.hull(w);
                (xl - yh, xh - yl)
            }
            OracleExpr::Mul(x, y) => {
                let (xl, xh) = x.hull(w);
                let (yl, yh) = y.hull(w);
                let products = [&xl * &yl, &xl * &yh, &xh * &yl, &xh * &yh];
                let lo = products.iter().min().unwrap().clone();
                let hi = products.iter().max().unwrap().clone();
                (lo, hi)
            }
            OracleExpr::Min(x, y) => {
                let (xl, xh) = x.hull(w);
                let (yl, yh) = y.hull(w);
                (xl.min(yl), xh.min(yh))
            }
            OracleExpr::Max(x, y) => {
                let (xl, xh) = x.hull(w);
                let (yl, yh) = y.hull(w);
                (xl.max(yl), xh.max(yh))
            }
            OracleExpr::Scale(q, x) => {
                let (xl, xh) = x.hull(w);
                if q.is_negative() {
                    (q * xh, q * xl)
                } else {
                    (q * xl, q * xh)
                }
            }
        }
    }
}

/// First index where the anchor's zero extension is pinned against `[w]`,
/// or `None` when the anchor point lies in the cylinder.
fn divergence(anchor: &CWord, w: &CWord) -> Option<u8> {
    for i in 0..w.len() {
        if anchor.bit(i) != w.bit(i) {
            return Some(i);
        }
    }
    None
}

/// A set description the oracle can evaluate.
#[derive(Clone, Debug)]
pub enum SetDesc {
    /// Finite union of cylinders.
    Cylinders(Vec<CWord>),
    /// Finite set of ideal points.
    Points(Vec<CWord>),
    /// Open metric ball about an ideal point.
    Ball { center: CWord, radius: BigRational },
    /// Closed metric ball about an ideal point.
    ClosedBall { center: CWord, radius: BigRational },
    Complement(Box<SetDesc>),
    Union(Vec<SetDesc>),
    Intersection(Vec<SetDesc>),
    /// Level set `{x : f(x) cmp t}`.
    ExprCmp { expr: OracleExpr, cmp: Cmp, threshold: BigRational },
}

/// Cylinders are exactly the balls of Cantor space: an open ball about an
/// ideal point is the cylinder pinning the first `t` digits of its center,
/// with `t` least such that `2^{-t} < r`; `None` when the radius is absurd
/// (nonpositive: empty, handled by the caller).
pub fn ball_as_cylinder(center: &CWord, radius: &BigRational, closed: bool) -> Option<CWord> {
    if !radius.is_positive() {
        return None;
    }
    let mut t: u8 = 0;
    loop {
        let d = pow2_neg(t as u32);
        let inside = if closed { &d <= radius } else { &d < radius };
        if inside {
            break;
        }
        t += 1;
        assert!(t <= CWord::MAX_LEN, "radius too small for the oracle");
    }
    let mut w = CWord::root();
    for i in 0..t {
        w = w.child(center.bit(i));
    }
    Some(w)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Undecided {
    pub at: CWord,
}

impl std::fmt::Display for Undecided {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "oracle undecided at cylinder [{}] within the depth cap", self.at)
    }
}

impl std::error::Error for Undecided {}

fn decide_cmp(lo: &BigRational, hi: &BigRational, cmp: Cmp, t: &BigRational) -> Option<Tri> {
    let inside = match cmp {
        Cmp::Lt => hi < t,
        Cmp::Le => hi <= t,
        Cmp::Gt => lo > t,
        Cmp::Ge => lo >= t,
    };
    if inside {
        return Some(Tri::Inside);
    }
    let outside = match cmp {
        Cmp::Lt => lo >= t,
        Cmp::Le => lo > t,
        Cmp::Gt => hi <= t,
        Cmp::Ge => hi < t,
    };
    if outside {
        return Some(Tri::Outside);
    }
    None
}

/// Exact status of `[w]` against the description, subdividing as needed up
/// to `depth_cap` total word length.
pub fn tri(desc: &SetDesc, w: CWord, depth_cap: u8) -> Result<Tri, Undecided> {
    match desc {
        SetDesc::Cylinders(cs) => {
            if cs.iter().any(|c| c.is_prefix_of(&w)) {
                return Ok(Tri::Inside);
            }
            let compatible: Vec<&CWord> = cs.iter().filter(|c| w.is_prefix_of(c)).collect();
            if compatible.is_empty() {
                return Ok(Tri::Outside);
            }
            subdivide(desc, w, depth_cap)
        }
        SetDesc::Points(ps) => {
            if ps.iter().any(|p| p.point_in_cylinder(&w)) {
                // A cylinder is infinite, a point list is not: never Inside.
                Ok(Tri::Split)
            } else {
                Ok(Tri::Outside)
            }
        }
        SetDesc::Ball { center, radius } => match ball_as_cylinder(center, radius, false) {
            None => Ok(Tri::Outside),
            Some(c) => tri(&SetDesc::Cylinders(vec![c]), w, depth_cap),
        },
        SetDesc::ClosedBall { center, radius } => match ball_as_cylinder(center, radius, true) {
            None => Ok(Tri::Outside),
            Some(c) => tri(&SetDesc::Cylinders(vec![c]), w, depth_cap),
        },
        SetDesc::Complement(inner) => Ok(tri(inner, w, depth_cap)?.flip()),
        SetDesc::Union(branches) => {
            let mut states = Vec::with_capacity(branches.len());
            for b in branches {
                states.push(tri(b, w, depth_cap)?);
            }
            if states.iter().any(|s| *s == Tri::Inside) {
                Ok(Tri::Inside)
            } else if states.iter().all(|s| *s == Tri::Outside) {
                Ok(Tri::Outside)
            } else {
                // Splits may still union up to the whole cylinder.
                subdivide(desc, w, depth_cap)
            }
        }
        SetDesc::Intersection(branches) => {
            let mut states = Vec::with_capacity(branches.len());
            for b in branches {
                states.push(tri(b, w, depth_cap)?);
            }
            if states.iter().any(|s| *s == Tri::Outside) {
                // One branch missing the cylinder does not settle Split vs
                // Outside for the intersection unless all others are Inside.
                if states.iter().all(|s| *s != Tri::Split) {
                    return Ok(Tri::Outside);
                }
                return subdivide(desc, w, depth_cap);
            }
            if states.iter().all(|s| *s == Tri::Inside) {
                Ok(Tri::Inside)
            } else {
                subdivide(desc, w, depth_cap)
            }
        }
        SetDesc::ExprCmp { expr, cmp, threshold } => {
            let (lo, hi) = expr.hull(&w);
            match decide_cmp(&lo, &hi, *cmp, threshold) {
                Some(t) => Ok(t),
                None => subdivide(desc, w, depth_cap),
            }
        }
    }
}

fn subdivide(desc: &SetDesc, w: CWord, depth_cap: u8) -> Result<Tri, Undecided> {
    if w.len() >= depth_cap {
        return Err(Undecided { at: w });
    }
    let a = tri(desc, w.child(false), depth_cap)?;
    let b = tri(desc, w.child(true), depth_cap)?;
    Ok(Tri::join_children(a, b))
}

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum OracleMode {
    /// Words whose cylinders meet the set.
    Meets,
    /// Words whose cylinders lie inside the set.
    Contained,
}

/// All length-`resolution` words selected by the mode.
///
/// The depth cap for subdivision defaults to `resolution + 48`, plenty for
/// descriptions whose thresholds are desk-scale rationals.
pub fn words(
    desc: &SetDesc,
    resolution: u8,
    mode: OracleMode,
) -> Result<BTreeSet<CWord>, Undecided> {
    assert!(resolution <= 16, "oracle resolution capped at 16");
    let cap = resolution.saturating_add(48).min(CWord::MAX_LEN);
    let mut out = BTreeSet::new();
    for w in CWord::root().extensions(resolution) {
        let t = tri(desc, w, cap)?;
        let keep = match mode {
            OracleMode::Meets => t != Tri::Outside,
            OracleMode::Contained => t == Tri::Inside,
        };
        if keep {
            out.insert(w);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn w(s: &str) -> CWord {
        CWord::parse(s).expect("test word")
    }

    fn names(set: &BTreeSet<CWord>) -> Vec<String> {
        set.iter().map(|c| c.to_string()).collect()
    }

    #[test]
    fn balls_are_cylinders() {
        // d < 1/4 pins digits up to the first power of two strictly below 1/4.
        assert_eq!(ball_as_cylinder(&w("01"), &rat(1, 4), false), Some(w("010")));
        assert_eq!(ball_as_cylinder(&w("01"), &rat(1, 4), true), Some(w("01")));
        assert_eq!(ball_as_cylinder(&w("1"), &rat(3, 8), false), Some(w("10")));
        assert_eq!(ball_as_cylinder(&w("1"), &rat(2, 1), false), Some(CWord::root()));
        assert_eq!(ball_as_cylinder(&w("1"), &rat(1, 1), false), Some(w("1")));
        assert_eq!(ball_as_cylinder(&w("1"), &rat(0, 1), false), None);
    }

    #[test]
    fn cylinder_unions_resolve_exactly() {
        let s = SetDesc::Cylinders(vec![w("0"), w("110")]);
        let meets = words(&s, 3, OracleMode::Meets).unwrap();
        assert_eq!(names(&meets), ["000", "001", "010", "011", "110"]);
        let inside = words(&s, 3, OracleMode::Contained).unwrap();
        assert_eq!(names(&inside), ["000", "001", "010", "011", "110"]);
        // At resolution 2 the cylinder [110] splits its parent.
        let meets2 = words(&s, 2, OracleMode::Meets).unwrap();
        assert_eq!(names(&meets2), ["00", "01", "11"]);
        let inside2 = words(&s, 2, OracleMode::Contained).unwrap();
        assert_eq!(names(&inside2), ["00", "01"]);
    }

    #[test]
    fn boolean_combinations_subdivide_when_needed() {
        // [0] ∪ [1] is everything even though neither branch decides alone.
        let all = SetDesc::Union(vec![
            SetDesc::Cylinders(vec![w("0")]),
            SetDesc::Cylinders(vec![w("1")]),
        ]);
        let inside = words(&all, 1, OracleMode::Contained).unwrap();
        assert_eq!(inside.len(), 2);

        let compl = SetDesc::Complement(Box::new(SetDesc::Cylinders(vec![w("110")])));
        let inside = words(&compl, 2, OracleMode::Contained).unwrap();
        assert_eq!(names(&inside), ["00", "01", "10"]);
        let meets = words(&compl, 2, OracleMode::Meets).unwrap();
        assert_eq!(meets.len(), 4);

        let inter = SetDesc::Intersection(vec![
            SetDesc::Cylinders(vec![w("0")]),
            SetDesc::Complement(Box::new(SetDesc::Cylinders(vec![w("01")]))),
        ]);
        assert_eq!(names(&words(&inter, 2, OracleMode::Meets).unwrap()), ["00"]);
    }

    #[test]
    fn distance_level_sets_match_hand_computation() {
        // {x : d(0^ω, x) ≤ 1/4} is the pair of cylinders 000, 001 at depth 3.
        let le = SetDesc::ExprCmp {
            expr: OracleExpr::Dist(CWord::root()),
            cmp: Cmp::Le,
            threshold: rat(1, 4),
        };
        assert_eq!(names(&words(&le, 3, OracleMode::Contained).unwrap()), ["000", "001"]);
        assert_eq!(names(&words(&le, 3, OracleMode::Meets).unwrap()), ["000", "001"]);

        // Strict window (1/4, 1/2): exactly the shell with first one at index 1.
        let window = SetDesc::Intersection(vec![
            SetDesc::ExprCmp {
                expr: OracleExpr::Dist(CWord::root()),
                cmp: Cmp::Gt,
                threshold: rat(1, 4),
            },
            SetDesc::ExprCmp {
                expr: OracleExpr::Dist(CWord::root()),
                cmp: Cmp::Lt,
                threshold: rat(3, 4),
            },
        ]);
        assert_eq!(names(&words(&window, 2, OracleMode::Contained).unwrap()), ["01"]);
    }

    #[test]
    fn expression_algebra_supports_min_max_scale() {
        // f = min(d(0^ω,·), 3·d(1^...,·)) with threshold comparisons.
        let f = OracleExpr::Min(
            Box::new(OracleExpr::Dist(CWord::root())),
            Box::new(OracleExpr::Scale(rat(3, 1), Box::new(OracleExpr::Dist(w("1"))))),
        );
        let s = SetDesc::ExprCmp { expr: f, cmp: Cmp::Lt, threshold: rat(1, 2) };
        // Points near 0^ω: d small; points near 10^ω: scaled distance small.
        let inside = words(&s, 3, OracleMode::Contained).unwrap();
        assert!(inside.contains(&w("000")));
        assert!(inside.contains(&w("100")));
        assert!(!inside.contains(&w("011")));
        let v = OracleExpr::Max(
            Box::new(OracleExpr::Const(rat(1, 2))),
            Box::new(OracleExpr::Dist(CWord::root())),
        );
        assert_eq!(v.eval_point(&w("001")), rat(1, 2));
        assert_eq!(v.eval_point(&w("1")), rat(1, 1));
    }

    #[test]
    fn degenerate_questions_are_refused_not_guessed() {
        // {x : d(0^ω, x) > 0} splits the zero spine at every depth.
        let s = SetDesc::ExprCmp {
            expr: OracleExpr::Dist(CWord::root()),
            cmp: Cmp::Gt,
            threshold: rat(0, 1),
        };
        assert!(words(&s, 2, OracleMode::Contained).is_err());
    }

    #[test]
    fn finite_point_sets_meet_but_never_fill() {
        let s = SetDesc::Points(vec![CWord::root(), w("11")]);
        assert_eq!(names(&words(&s, 2, OracleMode::Meets).unwrap()), ["00", "11"]);
        assert!(words(&s, 2, OracleMode::Contained).unwrap().is_empty());
    }
}
