//! Validation findings shared by the tensor, system and construction checks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::simplex::IndexSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    /// P_{ij,k} != P_{ji,k}
    Asymmetric {
        i: usize,
        j: usize,
        k: usize,
        forward: f64,
        backward: f64,
    },
    Negative {
        i: usize,
        j: usize,
        k: usize,
        value: f64,
    },
    /// Row sum outside `[1 - tail_budget, 1]` (with tolerance).
    NotStochastic {
        i: usize,
        j: usize,
        sum: f64,
        tail_budget: f64,
    },
    TargetOutOfWindow {
        i: usize,
        j: usize,
        k: usize,
    },
    /// Two system members share support.
    Overlap {
        a: usize,
        b: usize,
        shared: IndexSet,
    },
    /// P_{ii,k} differs from the member coordinate f_{π(i),k}.
    DiagonalMismatch {
        i: usize,
        k: usize,
        expected: f64,
        found: f64,
    },
    /// Positive coefficient on a member-support coordinate outside supp F_π(i) ∪ supp F_π(j).
    OutsideSupport {
        i: usize,
        j: usize,
        k: usize,
        value: f64,
    },
    /// Positive diagonal coefficient on a complement coordinate.
    ComplementDiagonal {
        i: usize,
        c: usize,
        value: f64,
    },
    /// Two rows with disjoint index pairs both feed complement coordinate `c`.
    DisjointComplementRows {
        c: usize,
        first: (usize, usize),
        second: (usize, usize),
    },
    /// Tensor rows at a complement coordinate disagree with the declared rule.
    StrategyMismatch {
        c: usize,
        detail: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Asymmetric {
                i,
                j,
                k,
                forward,
                backward,
            } => {
                write!(f, "asymmetric at ({i},{j},{k}): {forward} vs {backward}")
            }
            Violation::Negative { i, j, k, value } => write!(f, "negative P[{i}{j},{k}] = {value}"),
            Violation::NotStochastic { i, j, sum, tail_budget } => {
                write!(f, "row ({i},{j}) sums to {sum} (tail budget {tail_budget})")
            }
            Violation::TargetOutOfWindow { i, j, k } => write!(f, "row ({i},{j}) targets {k} outside window"),
            Violation::Overlap { a, b, shared } => write!(f, "members {a} and {b} share {shared}"),
            Violation::DiagonalMismatch { i, k, expected, found } => {
                write!(f, "P[{i}{i},{k}] = {found}, expected {expected}")
            }
            Violation::OutsideSupport { i, j, k, value } => {
                write!(f, "P[{i}{j},{k}] = {value} outside member supports")
            }
            Violation::ComplementDiagonal { i, c, value } => {
                write!(f, "P[{i}{i},{c}] = {value} on complement coordinate")
            }
            Violation::DisjointComplementRows { c, first, second } => write!(
                f,
                "complement {c} fed by disjoint rows ({},{}) and ({},{})",
                first.0, first.1, second.0, second.1
            ),
            Violation::StrategyMismatch { c, detail } => write!(f, "complement {c}: {detail}"),
        }
    }
}

/// Empty report means the checked object is valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            valid: violations.is_empty(),
            violations,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}
