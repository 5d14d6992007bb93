//! Effective zero-dimensionality at desk scale.
//!
//! A library for working with represented spaces in the style of type-two
//! computability: points, sets and functions are handled through explicit
//! names (lazy streams of naturals) with per-demand step budgets, and every
//! numeric comparison bottoms out in exact rational arithmetic.
//!
//! The layers, bottom up:
//!
//! * [`names`]: memoized lazy streams, pairing, word and finite-set codes,
//!   tupling conventions, padded enumerations.
//! * [`space`]: built-in computable metric spaces, ideal balls, formal
//!   inclusion, Cauchy and (lower) real names.
//! * [`cantor`]: exact clopen-set algebra on Cantor space.
//! * [`realfn`]: interval-evaluable continuous functions into the reals or
//!   into the space itself, and the expression language over distances.
//! * [`hyper`]: representations of open, closed, compact and located sets,
//!   and the translations between them.
//! * [`covers`]: Lindelöf refinements, Urysohn functions, swelling and
//!   shrinking of finite families.
//! * [`zerodim`]: separation and partition operators, order-bounded
//!   shrinkings, and the finite-arity reduction loop.
//! * [`compactzd`]: formal disjointness and diameter, decompositions of
//!   compact-ambient opens, infima of distances, and retractions.
//! * [`bilocated`]: decompositions of compact sets into small pieces, dense
//!   sequences through countably many obstacles, level picking, and
//!   bilocated splittings.
//! * [`oracle`]: the brute-force cylinder oracle used to cross-check the
//!   stream machinery at a fixed resolution.

pub mod bilocated;
pub mod cantor;
pub mod compactzd;
pub mod fuel;
pub mod covers;
pub mod hyper;
pub mod zerodim;
pub mod names;
pub mod oracle;
pub mod realfn;
pub mod space;

pub use fuel::{Fuel, RunError, RunResult};
