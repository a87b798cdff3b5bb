//! Trajectories, fixed-point search and face audits.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::ConstructedOp;
use crate::error::{Error, Result};
use crate::heredity::HeredityTensor;
use crate::qso::evaluate;
use crate::rng;
use crate::simplex::{l1_distance, sample_interior_with, Face, IndexSet, SimplexVector};

/// Residual floor for boundary audits.
pub const AUDIT_FLOOR: f64 = 1e-6;
pub const DEFAULT_MAX_FACE_SIZE: usize = 4;
pub const MAX_FACES: usize = 5000;
/// Failures kept verbatim in an audit report.
pub const MAX_REPORTED_FAILURES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<SimplexVector>,
    /// ℓ¹ distance between consecutive iterates.
    pub residuals: Vec<f64>,
    pub in_window_mass: Vec<f64>,
    pub supports: Vec<IndexSet>,
}

pub fn iterate(t: &HeredityTensor, x0: &SimplexVector, steps: usize) -> Result<Trajectory> {
    let mut traj = Trajectory {
        steps: vec![x0.clone()],
        residuals: Vec::with_capacity(steps),
        in_window_mass: vec![x0.mass()],
        supports: vec![x0.support()],
    };
    let mut x = x0.clone();
    for _ in 0..steps {
        let next = evaluate(t, &x)?;
        traj.residuals.push(l1_distance(&next, &x)?);
        traj.in_window_mass.push(next.mass());
        traj.supports.push(next.support());
        traj.steps.push(next.clone());
        x = next;
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Averaging weight λ in x ← (1-λ)x + λV(x); λ = 1 is plain Picard.
    pub relaxation: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: 1e-10,
            max_iter: 10_000,
            relaxation: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum FixedPointResult {
    /// ℓ¹(V(point) - point) = `residual` <= tol.
    Converged {
        point: SimplexVector,
        residual: f64,
        iterations: usize,
    },
    NoConvergence {
        residual: f64,
        iterations: usize,
    },
    /// Mass reached the top index or left the window at this step.
    LeftWindow {
        step: usize,
    },
}

impl FixedPointResult {
    pub fn is_converged(&self) -> bool {
        matches!(self, FixedPointResult::Converged { .. })
    }
}

/// Averaged iteration with default options apart from `tol` and `max_iter`.
pub fn fixed_point_search(
    t: &HeredityTensor,
    x0: &SimplexVector,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointResult> {
    fixed_point_search_with(
        |x| evaluate(t, x),
        x0,
        &FixedPointOptions {
            tol,
            max_iter,
            ..FixedPointOptions::default()
        },
    )
}

/// Iterate `map` with relaxation until the residual at the current point is
/// within `tol`.
///
/// LeftWindow fires when mass above `tol` appears at the top index (and the
/// start had none there) or when in-window mass drops by more than `tol`.
pub fn fixed_point_search_with<F>(map: F, x0: &SimplexVector, opts: &FixedPointOptions) -> Result<FixedPointResult>
where
    F: Fn(&SimplexVector) -> Result<SimplexVector>,
{
    if !(opts.tol > 0.0) {
        return Err(Error::Schema(format!("tolerance {} must be positive", opts.tol)));
    }
    if !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
        return Err(Error::Schema(format!(
            "relaxation {} must lie in (0, 1]",
            opts.relaxation
        )));
    }
    let top = x0.window();
    let start_mass = x0.mass();
    let top_occupied = x0.get(top) > opts.tol;
    let mut x = x0.clone();
    let mut iterations = 0;
    loop {
        let vx = map(&x)?;
        let residual = l1_distance(&vx, &x)?;
        if residual <= opts.tol {
            return Ok(FixedPointResult::Converged {
                point: x,
                residual,
                iterations,
            });
        }
        if iterations == opts.max_iter {
            return Ok(FixedPointResult::NoConvergence { residual, iterations });
        }
        x = x.mix(opts.relaxation, &vx)?;
        iterations += 1;
        if (!top_occupied && x.get(top) > opts.tol) || x.mass() < start_mass - opts.tol {
            return Ok(FixedPointResult::LeftWindow { step: iterations });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditKind {
    Face,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFailure {
    pub alpha: IndexSet,
    pub point: SimplexVector,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub kind: AuditKind,
    pub passed: bool,
    pub faces_checked: usize,
    pub samples_checked: usize,
    /// True when face enumeration stopped at [`MAX_FACES`].
    pub truncated: bool,
    pub failure_count: usize,
    /// First failures in face order, at most [`MAX_REPORTED_FAILURES`].
    pub failures: Vec<AuditFailure>,
}

fn assemble(
    kind: AuditKind,
    faces: usize,
    samples: usize,
    truncated: bool,
    failures: Vec<AuditFailure>,
) -> AuditReport {
    let failure_count = failures.len();
    let mut failures = failures;
    failures.truncate(MAX_REPORTED_FAILURES);
    AuditReport {
        kind,
        passed: failure_count == 0,
        faces_checked: faces,
        samples_checked: samples,
        truncated,
        failure_count,
        failures,
    }
}

/// α′: supports of the members hit from α, plus complement coordinates whose
/// rule uses a row with both indices in α.
pub fn image_face(op: &ConstructedOp, alpha: &IndexSet) -> IndexSet {
    let mut out: IndexSet = alpha
        .iter()
        .filter_map(|l| op.member_image(l))
        .flat_map(|f| f.support().to_vec())
        .collect();
    for (c, rule) in op.strategy.iter() {
        if rule
            .rows()
            .iter()
            .any(|&((i, j), w)| w > 0.0 && alpha.contains(i) && alpha.contains(j))
        {
            out.insert(c);
        }
    }
    out
}

/// Interior points of Γ_α must map onto exactly α′; points on the relative
/// boundary of Γ_α must map into α′.
pub fn face_map_audit(op: &ConstructedOp, alpha: &IndexSet, samples: usize, seed: u64) -> Result<AuditReport> {
    let n = op.window();
    let face = Face::new(alpha.clone(), n)?;
    let target = image_face(op, face.alpha());
    let failures: Vec<AuditFailure> = (0..samples)
        .into_par_iter()
        .map(|s| -> Result<Vec<AuditFailure>> {
            let mut r = rng::seeded(rng::derive_seed(seed, s as u64));
            let mut found = Vec::new();
            let x = sample_interior_with(face.alpha(), n, &mut r)?;
            let got = evaluate(&op.tensor, &x)?.support();
            if got != target {
                found.push(AuditFailure {
                    alpha: face.alpha().clone(),
                    point: x,
                    detail: format!("interior image support {got}, expected {target}"),
                });
            }
            if face.alpha().len() >= 2 {
                let size = r.random_range(1..face.alpha().len());
                let members = face.alpha().to_vec();
                let sub: IndexSet = rng::distinct_indices(&mut r, members.len(), size)
                    .into_iter()
                    .map(|p| members[p - 1])
                    .collect();
                let y = sample_interior_with(&sub, n, &mut r)?;
                let got = evaluate(&op.tensor, &y)?.support();
                if !got.is_subset(&target) {
                    found.push(AuditFailure {
                        alpha: face.alpha().clone(),
                        point: y,
                        detail: format!("boundary image support {got} not inside {target}"),
                    });
                }
            }
            Ok(found)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(assemble(AuditKind::Face, 1, samples, false, failures))
}

/// [`face_map_audit`] over every proper face with at most `max_face_size`
/// indices, merged in face order.
pub fn face_map_audit_all(op: &ConstructedOp, max_face_size: usize, samples: usize, seed: u64) -> Result<AuditReport> {
    let (faces, truncated) = enumerate_faces(op.window(), max_face_size, MAX_FACES);
    let reports: Vec<AuditReport> = faces
        .par_iter()
        .enumerate()
        .map(|(f, alpha)| face_map_audit(op, alpha, samples, rng::derive_seed(seed, f as u64)))
        .collect::<Result<_>>()?;
    let mut failures = Vec::new();
    let mut failure_count = 0;
    for r in reports {
        failure_count += r.failure_count;
        failures.extend(r.failures);
    }
    failures.truncate(MAX_REPORTED_FAILURES);
    Ok(AuditReport {
        kind: AuditKind::Face,
        passed: failure_count == 0,
        faces_checked: faces.len(),
        samples_checked: faces.len() * samples,
        truncated,
        failure_count,
        failures,
    })
}

/// Proper faces of 1..=n with at most `max_size` indices, by size then
/// lexicographically, stopping at `cap`. Returns the faces and whether the cap
/// cut the enumeration short.
pub fn enumerate_faces(n: usize, max_size: usize, cap: usize) -> (Vec<IndexSet>, bool) {
    let mut faces = Vec::new();
    for size in 1..=max_size.min(n.saturating_sub(1)) {
        let mut comb: Vec<usize> = (1..=size).collect();
        loop {
            if faces.len() == cap {
                return (faces, true);
            }
            faces.push(comb.iter().copied().collect());
            // next combination in lexicographic order
            let mut p = size;
            while p > 0 && comb[p - 1] == n - size + p {
                p -= 1;
            }
            if p == 0 {
                break;
            }
            comb[p - 1] += 1;
            for q in p..size {
                comb[q] = comb[q - 1] + 1;
            }
        }
    }
    (faces, false)
}

/// Sampled check that no proper face of size <= `max_face_size` carries a fixed
/// point: every sample must have ℓ¹(V(x) - x) > [`AUDIT_FLOOR`].
///
/// Requires that no set α satisfies {V(e_k)}_{k∈α} = {e_k}_{k∈α}; such a set
/// would hold a fixed point of its own.
pub fn boundary_fixed_point_audit(
    op: &ConstructedOp,
    samples_per_face: usize,
    max_face_size: usize,
    seed: u64,
) -> Result<AuditReport> {
    if let Some(alpha) = op.basis_cycles().first() {
        return Err(Error::HypothesisNotMet(format!(
            "basis vectors indexed by {alpha} are permuted among themselves"
        )));
    }
    let n = op.window();
    let (faces, truncated) = enumerate_faces(n, max_face_size, MAX_FACES);
    let per_face: Vec<Vec<AuditFailure>> = faces
        .par_iter()
        .enumerate()
        .map(|(f, alpha)| -> Result<Vec<AuditFailure>> {
            let mut r = rng::seeded(rng::derive_seed(seed, f as u64));
            let mut found = Vec::new();
            for _ in 0..samples_per_face {
                let x = sample_interior_with(alpha, n, &mut r)?;
                let residual = l1_distance(&evaluate(&op.tensor, &x)?, &x)?;
                if !(residual > AUDIT_FLOOR) {
                    found.push(AuditFailure {
                        alpha: alpha.clone(),
                        point: x,
                        detail: format!("residual {residual} at or below {AUDIT_FLOOR}"),
                    });
                }
            }
            Ok(found)
        })
        .collect::<Result<_>>()?;
    let failures = per_face.into_iter().flatten().collect();
    Ok(assemble(
        AuditKind::Boundary,
        faces.len(),
        faces.len() * samples_per_face,
        truncated,
        failures,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ProbeReport {
    NoQualifyingFace,
    /// `residual` is measured with the full operator.
    Found {
        alpha: IndexSet,
        point: SimplexVector,
        residual: f64,
    },
    NotFound {
        alpha: IndexSet,
        result: FixedPointResult,
    },
}

/// On Γ_α with α a cycle of k ↦ ρ(k) (V(e_k) = e_ρ(k)):
/// V(x)_ρ(i) = x_i (1 + Σ_{ℓ∈α, ℓ≠i} (2 P_{ℓi,ρ(i)} - 1) x_ℓ).
fn restricted_map(op: &ConstructedOp, alpha: &IndexSet, x: &SimplexVector) -> Result<SimplexVector> {
    let n = op.window();
    let mut out = vec![0.0; n + 1];
    for i in alpha.iter() {
        let target = op
            .basis_image(i)
            .ok_or_else(|| Error::HypothesisNotMet(format!("V(e_{i}) is not a basis vector")))?;
        let mut s = 1.0;
        for l in alpha.iter().filter(|&l| l != i) {
            s += (2.0 * op.tensor.coeff(l, i, target) - 1.0) * x.get(l);
        }
        out[target] = x.get(i) * s;
    }
    Ok(SimplexVector::from_dense(n, &out, x.is_tail()))
}

/// Look for a fixed point on the smallest face Γ_α whose basis vectors V
/// permutes, starting from its barycenter.
pub fn existence_probe(op: &ConstructedOp, opts: &FixedPointOptions) -> Result<ProbeReport> {
    let Some(alpha) = op.basis_cycles().into_iter().next() else {
        return Ok(ProbeReport::NoQualifyingFace);
    };
    let x0 = SimplexVector::barycenter(&alpha, op.window())?;
    let result = fixed_point_search_with(|x| restricted_map(op, &alpha, x), &x0, opts)?;
    Ok(match result {
        FixedPointResult::Converged { point, .. } => {
            let residual = l1_distance(&evaluate(&op.tensor, &point)?, &point)?;
            ProbeReport::Found { alpha, point, residual }
        }
        other => ProbeReport::NotFound { alpha, result: other },
    })
}
