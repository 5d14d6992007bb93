//! Step budgets for demand-driven evaluation.

use std::fmt;

/// Errors surfaced while driving a demand-driven computation.
///
/// Exhaustion is an ordinary, expected outcome at finite scale and is kept
/// separate from genuine contract violations: a computation that runs out of
/// budget never returns a wrong symbol, it returns `OutOfFuel`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunError {
    /// The step budget ran out before the demanded symbol was produced.
    OutOfFuel,
    /// An input stream violated the representation it was declared under.
    Violation(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::OutOfFuel => write!(f, "insufficient fuel"),
            RunError::Violation(msg) => write!(f, "representation violation: {msg}"),
        }
    }
}

impl std::error::Error for RunError {}

pub type RunResult<T> = Result<T, RunError>;

/// A mutable step budget threaded through every demand.
///
/// One unit is charged per primitive step: a symbol demand, a candidate
/// tested in a search, one round of a dovetailed scan.  The budget is shared
/// down the whole call chain of a demand, so the cost of answering a demand
/// is bounded no matter how many upstream names it consults.
#[derive(Debug, Clone)]
pub struct Fuel {
    remaining: u64,
}

impl Fuel {
    pub fn new(budget: u64) -> Fuel {
        Fuel { remaining: budget }
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    /// Charge one step.
    pub fn tick(&mut self) -> RunResult<()> {
        self.spend(1)
    }

    /// Charge `n` steps at once.
    pub fn spend(&mut self, n: u64) -> RunResult<()> {
        if self.remaining >= n {
            self.remaining -= n;
            Ok(())
        } else {
            self.remaining = 0;
            Err(RunError::OutOfFuel)
        }
    }
}
