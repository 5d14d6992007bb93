//! Continuous functions as interval machines.
//!
//! A real-valued function is anything that can bound its values on ideal
//! points and on ideal balls, outward and ever tighter.  Point evaluation,
//! level sets and preimages are derived from those two abilities, so a
//! function object never needs to "finish" an infinite computation: callers
//! pay fuel for the precision they demand.

use std::sync::Arc;

use num::rational::BigRational;
use num::{BigUint, Signed, Zero};

use crate::cantor::{pow2_neg, CWord};
use crate::fuel::{Fuel, RunError, RunResult};
use crate::space::{cantor_ball_word, CauchyName, IdealBall, SpaceDescriptor};

/// How many extra digits a Cantor ball is subdivided by when bounding an
/// expression on it.  2^12 subcylinders is the largest join worth paying for
/// at desk scale.
const CANTOR_REFINE_CAP: u32 = 12;

/// A continuous map into the reals, seen through rational bounds.
pub trait RealFn: Send + Sync {
    fn space(&self) -> &SpaceDescriptor;

    /// A global Lipschitz bound, when one is known syntactically.
    fn lipschitz(&self) -> Option<BigRational>;

    /// Bounds containing the value at an ideal point, with width at most
    /// 2^{-k}.
    fn approx_ideal(
        &self,
        code: &BigUint,
        k: u32,
        fuel: &mut Fuel,
    ) -> RunResult<(BigRational, BigRational)>;

    /// Outward bounds for the values on the closed hull of a ball.
    ///
    /// Soundness is unconditional; the width must shrink as the ball
    /// shrinks and `k` grows, so that point evaluation below converges.
    fn bounds_ball(
        &self,
        ball: &IdealBall,
        k: u32,
        fuel: &mut Fuel,
    ) -> RunResult<(BigRational, BigRational)>;

    /// Evaluate at a named point to within 2^{-k}.
    ///
    /// Walks down the point's enclosing balls until the bounds are tight;
    /// runs out of fuel rather than answer loosely.
    fn eval_at(&self, x: &CauchyName, k: u32, fuel: &mut Fuel) -> RunResult<BigRational> {
        let two = BigRational::from_integer(2.into());
        for j in (k + 1)..(k + 66) {
            let p = x.point_code_at(j as u64, fuel)?;
            let ball = IdealBall::new(p, &(pow2_neg(j) * &two));
            let (lo, hi) = self.bounds_ball(&ball, j, fuel)?;
            if &hi - &lo <= pow2_neg(k) {
                return Ok((lo + hi) / two);
            }
        }
        Err(RunError::OutOfFuel)
    }
}

// ---------------------------------------------------------------------------
// The distance expression language.

/// Syntax for continuous functions built from distances to ideal points,
/// rational constants, lattice operations and arithmetic.
#[derive(Clone, Debug)]
pub enum Expr {
    Const(BigRational),
    /// Distance to the ideal point with this code.
    Dist(BigUint),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Scale(BigRational, Box<Expr>),
}

impl Expr {
    pub fn dist_to_word(w: &CWord) -> Expr {
        Expr::Dist(w.ideal_code())
    }

    /// Exact value at an ideal point.
    pub fn exact_ideal(&self, space: &SpaceDescriptor, code: &BigUint) -> RunResult<BigRational> {
        match self {
            Expr::Const(q) => Ok(q.clone()),
            Expr::Dist(a) => space.ideal_distance(a, code),
            Expr::Add(x, y) => Ok(x.exact_ideal(space, code)? + y.exact_ideal(space, code)?),
            Expr::Sub(x, y) => Ok(x.exact_ideal(space, code)? - y.exact_ideal(space, code)?),
            Expr::Mul(x, y) => Ok(x.exact_ideal(space, code)? * y.exact_ideal(space, code)?),
            Expr::Min(x, y) => Ok(x.exact_ideal(space, code)?.min(y.exact_ideal(space, code)?)),
            Expr::Max(x, y) => Ok(x.exact_ideal(space, code)?.max(y.exact_ideal(space, code)?)),
            Expr::Scale(q, x) => Ok(q * x.exact_ideal(space, code)?),
        }
    }

    /// Syntactic value range, when the space bounds distances.
    pub fn range(&self, space: &SpaceDescriptor) -> Option<(BigRational, BigRational)> {
        match self {
            Expr::Const(q) => Some((q.clone(), q.clone())),
            Expr::Dist(_) => space.diameter_bound().map(|d| (BigRational::zero(), d)),
            Expr::Add(x, y) => {
                let (xl, xh) = x.range(space)?;
                let (yl, yh) = y.range(space)?;
                Some((xl + yl, xh + yh))
            }
            Expr::Sub(x, y) => {
                let (xl, xh) = x.range(space)?;
                let (yl, yh) = y.range(space)?;
                Some((xl - yh, xh - yl))
            }
            Expr::Mul(x, y) => {
                let (xl, xh) = x.range(space)?;
                let (yl, yh) = y.range(space)?;
                let ps = [&xl * &yl, &xl * &yh, &xh * &yl, &xh * &yh];
                Some((ps.iter().min().unwrap().clone(), ps.iter().max().unwrap().clone()))
            }
            Expr::Min(x, y) => {
                let (xl, xh) = x.range(space)?;
                let (yl, yh) = y.range(space)?;
                Some((xl.min(yl), xh.min(yh)))
            }
            Expr::Max(x, y) => {
                let (xl, xh) = x.range(space)?;
                let (yl, yh) = y.range(space)?;
                Some((xl.max(yl), xh.max(yh)))
            }
            Expr::Scale(q, x) => {
                let (xl, xh) = x.range(space)?;
                if q.is_negative() {
                    Some((q * xh, q * xl))
                } else {
                    Some((q * xl, q * xh))
                }
            }
        }
    }

    /// Syntactic Lipschitz bound; products need bounded factor ranges.
    pub fn lipschitz(&self, space: &SpaceDescriptor) -> Option<BigRational> {
        match self {
            Expr::Const(_) => Some(BigRational::zero()),
            Expr::Dist(_) => Some(BigRational::from_integer(1.into())),
            Expr::Add(x, y) | Expr::Sub(x, y) => {
                Some(x.lipschitz(space)? + y.lipschitz(space)?)
            }
            Expr::Mul(x, y) => {
                let lx = x.lipschitz(space)?;
                let ly = y.lipschitz(space)?;
                let (xl, xh) = x.range(space)?;
                let (yl, yh) = y.range(space)?;
                let sup_x = xl.abs().max(xh.abs());
                let sup_y = yl.abs().max(yh.abs());
                Some(lx * sup_y + ly * sup_x)
            }
            Expr::Min(x, y) | Expr::Max(x, y) => {
                Some(x.lipschitz(space)?.max(y.lipschitz(space)?))
            }
            Expr::Scale(q, x) => Some(q.abs() * x.lipschitz(space)?),
        }
    }

    /// Outward bounds on a Cantor cylinder, exact up to the anchored tails.
    pub fn interval_on_cylinder(&self, w: &CWord) -> RunResult<(BigRational, BigRational)> {
        match self {
            Expr::Const(q) => Ok((q.clone(), q.clone())),
            Expr::Dist(a) => {
                let anchor = CWord::from_ideal_code(a).ok_or_else(|| {
                    RunError::Violation("distance anchor is not a Cantor ideal code".into())
                })?;
                for i in 0..w.len() {
                    if anchor.bit(i) != w.bit(i) {
                        let d = pow2_neg(i as u32);
                        return Ok((d.clone(), d));
                    }
                }
                Ok((BigRational::zero(), pow2_neg(w.len() as u32)))
            }
            Expr::Add(x, y) => {
                let (xl, xh) = x.interval_on_cylinder(w)?;
                let (yl, yh) = y.interval_on_cylinder(w)?;
                Ok((xl + yl, xh + yh))
            }
            Expr::Sub(x, y) => {
                let (xl, xh) = x.interval_on_cylinder(w)?;
                let (yl, yh) = y.interval_on_cylinder(w)?;
                Ok((xl - yh, xh - yl))
            }
            Expr::Mul(x, y) => {
                let (xl, xh) = x.interval_on_cylinder(w)?;
                let (yl, yh) = y.interval_on_cylinder(w)?;
                let ps = [&xl * &yl, &xl * &yh, &xh * &yl, &xh * &yh];
                Ok((ps.iter().min().unwrap().clone(), ps.iter().max().unwrap().clone()))
            }
            Expr::Min(x, y) => {
                let (xl, xh) = x.interval_on_cylinder(w)?;
                let (yl, yh) = y.interval_on_cylinder(w)?;
                Ok((xl.min(yl), xh.min(yh)))
            }
            Expr::Max(x, y) => {
                let (xl, xh) = x.interval_on_cylinder(w)?;
                let (yl, yh) = y.interval_on_cylinder(w)?;
                Ok((xl.max(yl), xh.max(yh)))
            }
            Expr::Scale(q, x) => {
                let (xl, xh) = x.interval_on_cylinder(w)?;
                if q.is_negative() {
                    Ok((q * xh, q * xl))
                } else {
                    Ok((q * xl, q * xh))
                }
            }
        }
    }

    /// Outward bounds on a metric ball in any built-in space.
    fn interval_on_ball(
        &self,
        space: &SpaceDescriptor,
        ball: &IdealBall,
    ) -> RunResult<(BigRational, BigRational)> {
        match self {
            Expr::Const(q) => Ok((q.clone(), q.clone())),
            Expr::Dist(a) => {
                let d = space.ideal_distance(a, &ball.center)?;
                let r = ball.radius();
                let lo = (&d - &r).max(BigRational::zero());
                Ok((lo, d + r))
            }
            Expr::Add(x, y) => {
                let (xl, xh) = x.interval_on_ball(space, ball)?;
                let (yl, yh) = y.interval_on_ball(space, ball)?;
                Ok((xl + yl, xh + yh))
            }
            Expr::Sub(x, y) => {
                let (xl, xh) = x.interval_on_ball(space, ball)?;
                let (yl, yh) = y.interval_on_ball(space, ball)?;
                Ok((xl - yh, xh - yl))
            }
            Expr::Mul(x, y) => {
                let (xl, xh) = x.interval_on_ball(space, ball)?;
                let (yl, yh) = y.interval_on_ball(space, ball)?;
                let ps = [&xl * &yl, &xl * &yh, &xh * &yl, &xh * &yh];
                Ok((ps.iter().min().unwrap().clone(), ps.iter().max().unwrap().clone()))
            }
            Expr::Min(x, y) => {
                let (xl, xh) = x.interval_on_ball(space, ball)?;
                let (yl, yh) = y.interval_on_ball(space, ball)?;
                Ok((xl.min(yl), xh.min(yh)))
            }
            Expr::Max(x, y) => {
                let (xl, xh) = x.interval_on_ball(space, ball)?;
                let (yl, yh) = y.interval_on_ball(space, ball)?;
                Ok((xl.max(yl), xh.max(yh)))
            }
            Expr::Scale(q, x) => {
                let (xl, xh) = x.interval_on_ball(space, ball)?;
                if q.is_negative() {
                    Ok((q * xh, q * xl))
                } else {
                    Ok((q * xl, q * xh))
                }
            }
        }
    }
}

/// An expression bound to a space, usable wherever a [`RealFn`] is wanted.
#[derive(Clone, Debug)]
pub struct ExprFn {
    space: SpaceDescriptor,
    expr: Expr,
}

impl ExprFn {
    pub fn new(space: SpaceDescriptor, expr: Expr) -> ExprFn {
        ExprFn { space, expr }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

impl RealFn for ExprFn {
    fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    fn lipschitz(&self) -> Option<BigRational> {
        self.expr.lipschitz(&self.space)
    }

    fn approx_ideal(
        &self,
        code: &BigUint,
        _k: u32,
        _fuel: &mut Fuel,
    ) -> RunResult<(BigRational, BigRational)> {
        let v = self.expr.exact_ideal(&self.space, code)?;
        Ok((v.clone(), v))
    }

    fn bounds_ball(
        &self,
        ball: &IdealBall,
        k: u32,
        fuel: &mut Fuel,
    ) -> RunResult<(BigRational, BigRational)> {
        if self.space.is_cantor() {
            // Balls are clopen here, so the ball's own cylinder already is
            // its closed hull; subdividing it makes the distance intervals
            // collapse to exact values except on anchored tails.
            let w = cantor_ball_word(ball, false)?;
            let extra = k.min(CANTOR_REFINE_CAP) as u8;
            let target = w.len().saturating_add(extra).min(CWord::MAX_LEN);
            let mut lo: Option<BigRational> = None;
            let mut hi: Option<BigRational> = None;
            for u in w.extensions(target) {
                fuel.tick()?;
                let (l, h) = self.expr.interval_on_cylinder(&u)?;
                lo = Some(match lo {
                    None => l,
                    Some(cur) => cur.min(l),
                });
                hi = Some(match hi {
                    None => h,
                    Some(cur) => cur.max(h),
                });
            }
            Ok((lo.unwrap(), hi.unwrap()))
        } else {
            fuel.tick()?;
            self.expr.interval_on_ball(&self.space, ball)
        }
    }
}

// ---------------------------------------------------------------------------
// Self-maps of a space.

/// A continuous map from the space to itself, seen through image balls.
pub trait EndoFn: Send + Sync {
    fn space(&self) -> &SpaceDescriptor;

    /// A ball containing the image of the given ball.
    ///
    /// The radius must shrink as the input ball shrinks and `k` grows,
    /// fuel permitting.
    fn image_ball(&self, ball: &IdealBall, k: u32, fuel: &mut Fuel) -> RunResult<IdealBall>;

}

/// Push a named point through a self-map.
///
/// The output approximator hunts for an input ball around `x` whose image
/// ball is small enough for the demanded precision.
pub fn endo_apply(f: Arc<dyn EndoFn>, x: &CauchyName) -> CauchyName {
    let space = f.space().clone();
    let x = x.clone();
    CauchyName::from_approximator(space, move |k, fuel| {
        let two = BigRational::from_integer(2.into());
        for j in k..(k + 66) {
            let p = x.point_code_at(j as u64, fuel)?;
            let ball = IdealBall::new(p, &(pow2_neg(j) * &two));
            let img = f.image_ball(&ball, j, fuel)?;
            if img.radius() <= pow2_neg(k) {
                return Ok(img.center.clone());
            }
        }
        Err(RunError::OutOfFuel)
    })
}

/// The identity self-map.
pub struct IdentityEndo {
    space: SpaceDescriptor,
}

impl IdentityEndo {
    pub fn new(space: SpaceDescriptor) -> IdentityEndo {
        IdentityEndo { space }
    }
}

impl EndoFn for IdentityEndo {
    fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    fn image_ball(&self, ball: &IdealBall, _k: u32, fuel: &mut Fuel) -> RunResult<IdealBall> {
        fuel.tick()?;
        Ok(ball.clone())
    }
}
