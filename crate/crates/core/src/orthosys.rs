//! Orthogonal systems {F_k}: validation, profiles and generators.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qso::IndexMap;
use crate::report::{ValidationReport, Violation};
use crate::simplex::{make_vector, IndexSet, SimplexVector};

/// Ordered family F_1, ..., F_m on a common window. Orthogonality is not
/// enforced here; see [`validate_system`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemLiteral", into = "SystemLiteral")]
pub struct OrthogonalSystem {
    window: usize,
    members: Vec<SimplexVector>,
}

/// `{"window": N, "members": [<vector literal>, ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemLiteral {
    pub window: usize,
    pub members: Vec<SimplexVector>,
}

impl TryFrom<SystemLiteral> for OrthogonalSystem {
    type Error = Error;

    fn try_from(lit: SystemLiteral) -> Result<Self> {
        OrthogonalSystem::new(lit.window, lit.members)
    }
}

impl From<OrthogonalSystem> for SystemLiteral {
    fn from(s: OrthogonalSystem) -> Self {
        SystemLiteral {
            window: s.window,
            members: s.members,
        }
    }
}

impl OrthogonalSystem {
    pub fn new(window: usize, members: Vec<SimplexVector>) -> Result<Self> {
        if window == 0 {
            return Err(Error::EmptyWindow);
        }
        if let Some(bad) = members.iter().find(|m| m.window() != window) {
            return Err(Error::WindowMismatch {
                left: window,
                right: bad.window(),
            });
        }
        Ok(OrthogonalSystem { window, members })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[SimplexVector] {
        &self.members
    }

    /// F_k, 1-based.
    pub fn member(&self, k: usize) -> Option<&SimplexVector> {
        k.checked_sub(1).and_then(|p| self.members.get(p))
    }

    /// The system {F_π(k)}.
    pub fn reindexed(&self, pi: &IndexMap) -> Result<Self> {
        let members = pi
            .images()
            .iter()
            .map(|&k| {
                self.member(k).cloned().ok_or(Error::IndexOutOfWindow {
                    index: k,
                    window: self.len(),
                })
            })
            .collect::<Result<_>>()?;
        Self::new(self.window, members)
    }
}

/// Reports every pair of members whose supports meet, with the shared indices.
pub fn validate_system(s: &OrthogonalSystem) -> ValidationReport {
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); s.window() + 1];
    for (n, m) in s.members().iter().enumerate() {
        for (i, _) in m.iter() {
            owners[i].push(n + 1);
        }
    }
    let mut shared: BTreeMap<(usize, usize), IndexSet> = BTreeMap::new();
    for (i, list) in owners.iter().enumerate() {
        for (p, &a) in list.iter().enumerate() {
            for &b in &list[p + 1..] {
                shared.entry((a, b)).or_default().insert(i);
            }
        }
    }
    ValidationReport::from_violations(
        shared
            .into_iter()
            .map(|((a, b), shared)| Violation::Overlap { a, b, shared })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemProfile {
    /// Members equal to a basis vector.
    pub beta: IndexSet,
    /// Window indices no member touches.
    pub complement: IndexSet,
    /// Every member is a basis vector and together they cover the window.
    pub total: bool,
    pub union_support: IndexSet,
}

pub fn profile(s: &OrthogonalSystem) -> SystemProfile {
    let beta: IndexSet = s
        .members()
        .iter()
        .enumerate()
        .filter(|(_, m)| m.basis_index().is_some())
        .map(|(n, _)| n + 1)
        .collect();
    let union_support: IndexSet = s.members().iter().flat_map(|m| m.support().to_vec()).collect();
    let complement = IndexSet::range(s.window()).difference(&union_support);
    let total = beta.len() == s.len() && complement.is_empty();
    SystemProfile {
        beta,
        complement,
        total,
        union_support,
    }
}

/// {e_π(k)}, or the standard basis when `pi` is `None`.
pub fn gen_standard(window: usize, pi: Option<&IndexMap>) -> Result<OrthogonalSystem> {
    let images: Vec<usize> = match pi {
        None => (1..=window).collect(),
        Some(p) => {
            if p.window_out() > window {
                return Err(Error::WindowMismatch {
                    left: window,
                    right: p.window_out(),
                });
            }
            p.images().to_vec()
        }
    };
    let members = images
        .into_iter()
        .map(|k| SimplexVector::basis(k, window))
        .collect::<Result<_>>()?;
    OrthogonalSystem::new(window, members)
}

/// {e_2, e_3, ..., e_W}: orthogonal but missing index 1.
pub fn gen_shifted_standard(window: usize) -> Result<OrthogonalSystem> {
    if window < 2 {
        return Err(Error::WindowTooSmall { window, min: 2 });
    }
    gen_standard(window, Some(&IndexMap::new((2..=window).collect(), window)?))
}

fn half_pair(a: usize, window: usize) -> Result<SimplexVector> {
    make_vector(&[(a, 0.5), (a + 1, 0.5)], window, false)
}

/// F_k = ½ e_{2k-1} + ½ e_{2k}, k = 1..W/2.
pub fn gen_half_half(window: usize) -> Result<OrthogonalSystem> {
    if window == 0 {
        return Err(Error::EmptyWindow);
    }
    if window % 2 == 1 {
        return Err(Error::OddWindow(window));
    }
    let members = (1..=window / 2)
        .map(|k| half_pair(2 * k - 1, window))
        .collect::<Result<_>>()?;
    OrthogonalSystem::new(window, members)
}

/// Geometric system on A_j = {j·2^n}: member k lives on j = 2k-1 with
/// f_{j·2^n} = ((j-1)/j)(1/j)^n, and j = 1 uses f_{2^n} = (1/2)^{n+1}.
/// Every member is a truncation and carries the tail flag.
pub fn gen_dyadic(window: usize) -> Result<OrthogonalSystem> {
    if window < 2 {
        return Err(Error::WindowTooSmall { window, min: 2 });
    }
    let members = (1..=window)
        .step_by(2)
        .map(|j| {
            let (lead, ratio) = if j == 1 {
                (0.5, 0.5)
            } else {
                let jf = j as f64;
                ((jf - 1.0) / jf, 1.0 / jf)
            };
            let mut entries = Vec::new();
            let (mut m, mut value) = (j, lead);
            while m <= window {
                entries.push((m, value));
                m *= 2;
                value *= ratio;
            }
            SimplexVector::from_sorted_parts(window, entries, true)
        })
        .collect();
    OrthogonalSystem::new(window, members)
}

/// F_1 = ½e_1 + ½e_2, then the given basis members, then half pairs on
/// {2n-1, 2n} for n >= 5 that fit in the window.
fn example_system(window: usize, singles: [usize; 3]) -> Result<OrthogonalSystem> {
    let min = singles[2].max(5);
    if window < min {
        return Err(Error::WindowTooSmall { window, min });
    }
    let mut members = vec![half_pair(1, window)?];
    for k in singles {
        members.push(SimplexVector::basis(k, window)?);
    }
    let mut n = 5;
    while 2 * n <= window {
        members.push(half_pair(2 * n - 1, window)?);
        n += 1;
    }
    OrthogonalSystem::new(window, members)
}

/// F_2 = e_3, F_3 = e_4, F_4 = e_5; β = {2,3,4}.
pub fn gen_example4_1(window: usize) -> Result<OrthogonalSystem> {
    example_system(window, [3, 4, 5])
}

/// F_2 = e_6, F_3 = e_7, F_4 = e_8; β = {2,3,4}, complement contains {3,4,5}.
pub fn gen_example4_2(window: usize) -> Result<OrthogonalSystem> {
    example_system(window, [6, 7, 8])
}

/// F_1 = e_1, F_2 = e_2, F_n = ½e_{2n-3} + ½e_{2n-2} for n >= 3.
pub fn gen_example4_fixed(window: usize) -> Result<OrthogonalSystem> {
    if window < 2 {
        return Err(Error::WindowTooSmall { window, min: 2 });
    }
    let mut members = vec![SimplexVector::basis(1, window)?, SimplexVector::basis(2, window)?];
    let mut n = 3;
    while 2 * n - 2 <= window {
        members.push(half_pair(2 * n - 3, window)?);
        n += 1;
    }
    OrthogonalSystem::new(window, members)
}
