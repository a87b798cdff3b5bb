//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{constructed_ops, dense, dense_evaluate, random_point, random_strategy, RULE_KINDS};
use opqso::construct::{build_op, canonical_evaluate, verify_constraints, ComplementStrategy, ConstructedOp};
use opqso::dynamics::{
    boundary_fixed_point_audit, existence_probe, face_map_audit_all, fixed_point_search, FixedPointOptions,
    FixedPointResult, ProbeReport,
};
use opqso::heredity::{lso_embed, lso_is_op, random_tensor, validate_tensor, HeredityTensor, StochasticMatrix};
use opqso::io::builtin;
use opqso::opcheck::{characterize, diag_check, randomized_op_test};
use opqso::orthosys::{gen_dyadic, gen_half_half, gen_shifted_standard, gen_standard, profile, OrthogonalSystem};
use opqso::qso::{evaluate, is_volterra, pi_volterra_from, shift_tensor, IndexMap, SkewMatrix};
use opqso::rng::{derive_seed, dirichlet_uniform, distinct_indices, seeded};
use opqso::simplex::{make_vector, sample_interior_with, IndexSet, SimplexVector};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const SEED: u64 = 20240101;

fn image_dot(t: &HeredityTensor, x: &SimplexVector, y: &SimplexVector) -> f64 {
    let vx = dense_evaluate(t, &dense(x));
    let vy = dense_evaluate(t, &dense(y));
    vx.iter().zip(&vy).map(|(a, b)| a * b).sum()
}

fn op_constructions(window: usize, count: u64) -> Vec<HeredityTensor> {
    let mut out = vec![shift_tensor(window).unwrap()];
    let systems: Vec<OrthogonalSystem> = vec![
        gen_standard(window, None).unwrap(),
        gen_half_half(window).unwrap(),
        gen_dyadic(window).unwrap(),
    ];
    for s in 0..count - 1 {
        let mut rng = seeded(derive_seed(SEED ^ 1, s));
        if s % 2 == 0 {
            let a = SkewMatrix::random(window, &mut rng);
            let pi = IndexMap::random_permutation(window, &mut rng);
            out.push(pi_volterra_from(&a, &pi).unwrap());
        } else {
            let system = &systems[(s as usize / 2) % systems.len()];
            let pi = IndexMap::random_injection(window, window + window / 4 + 1, &mut rng).unwrap();
            let complement = build_op(system, &pi, &ComplementStrategy::new()).unwrap().complement();
            let kind = RULE_KINDS[(s as usize / 2) % RULE_KINDS.len()];
            let strategy = random_strategy(&complement, window, kind, s).unwrap_or_default();
            out.push(build_op(system, &pi, &strategy).unwrap().tensor);
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let n = 8;
    let mut tensors = op_constructions(n, 100);
    for s in 0..100 {
        tensors.push(random_tensor(n, 1 + (s as usize % 3), derive_seed(SEED ^ 2, s)));
    }
    let (mut ops, mut not_ops) = (0, 0);
    for (idx, t) in tensors.iter().enumerate() {
        let exact = characterize(t);
        let sampled = randomized_op_test(t, 1000, derive_seed(SEED, idx as u64));
        ensure!(
            !(exact.is_op() && !sampled.is_op()),
            "tensor {idx}: randomized refutes an OP verdict"
        );
        if exact.is_op() {
            ops += 1;
        } else {
            not_ops += 1;
            let w = exact
                .witness
                .as_ref()
                .ok_or(format!("tensor {idx}: NotOP without witness"))?;
            let d = image_dot(t, &w.x, &w.y);
            let disjoint = w.x.support().is_disjoint(&w.y.support());
            ensure!(disjoint && d > 1e-12, "tensor {idx}: witness fails (dot {d})");
        }
    }
    ensure!(ops >= 100, "only {ops} OP verdicts among the OP constructions");
    Ok(format!(
        "{} tensors, {ops} OP, {not_ops} NotOP with verified witnesses",
        tensors.len()
    ))
}

fn criterion_2() -> Outcome {
    let mut volterra = 0;
    for n in 2..=4 {
        for s in 0..100 {
            let mut rng = seeded(derive_seed(SEED ^ n as u64, s));
            let a = SkewMatrix::random(n, &mut rng);
            let pi = IndexMap::random_permutation(n, &mut rng);
            let r = characterize(&pi_volterra_from(&a, &pi).unwrap());
            ensure!(
                r.is_op() && r.violations.is_empty(),
                "π-Volterra at window {n}, seed {s} not OP"
            );
            volterra += 1;
        }
    }
    let (mut found, mut tried) = (0, 0u64);
    while found < 100 {
        ensure!(
            tried < 100_000,
            "only {found} non-Volterra tensors with diagonal violations"
        );
        let t = random_tensor(3, 1 + (tried as usize % 3), derive_seed(SEED ^ 3, tried));
        tried += 1;
        if is_volterra(&t) || diag_check(&t).is_op() {
            continue;
        }
        ensure!(
            !characterize(&t).is_op(),
            "diagonal violation but characterize says OP (draw {tried})"
        );
        found += 1;
    }
    Ok(format!(
        "{volterra} π-Volterra OP; {found} diagonal-violating tensors NotOP"
    ))
}

fn criterion_3_ops() -> Vec<(String, ConstructedOp)> {
    constructed_ops(32, SEED)
}

fn criterion_3() -> Outcome {
    let ops = criterion_3_ops();
    let mut strategies = BTreeSet::new();
    for (name, op) in &ops {
        ensure!(validate_tensor(&op.tensor).is_valid(), "{name}: invalid tensor");
        ensure!(verify_constraints(op).is_valid(), "{name}: constraint violation");
        ensure!(characterize(&op.tensor).is_op(), "{name}: not OP");
        strategies.insert(name.rsplit('/').next().unwrap().to_string());
    }
    ensure!(strategies.len() == 4, "strategies exercised: {strategies:?}");
    Ok(format!(
        "{} ops over 3 systems, 2 maps, strategies {strategies:?}",
        ops.len()
    ))
}

fn criterion_4() -> Outcome {
    let ops = criterion_3_ops();
    let mut worst: f64 = 0.0;
    for (o, (name, op)) in ops.iter().enumerate() {
        let mut rng = seeded(derive_seed(SEED ^ 4, o as u64));
        for _ in 0..500 {
            let x = random_point(&mut rng, 32);
            let a = evaluate(&op.tensor, &x).map_err(|e| e.to_string())?;
            let b = canonical_evaluate(op, &x).map_err(|e| e.to_string())?;
            for k in 1..=32 {
                worst = worst.max((a.get(k) - b.get(k)).abs());
            }
            ensure!(worst <= 1e-12, "{name}: paths differ by {worst}");
        }
    }
    Ok(format!("{} ops x 500 inputs, max difference {worst:e}", ops.len()))
}

fn criterion_5() -> Outcome {
    let n = 16;
    let shift = shift_tensor(n).unwrap();
    for i in 1..n {
        let v = evaluate(&shift, &SimplexVector::basis(i, n).unwrap()).unwrap();
        ensure!(v.entries() == [(i + 1, 1.0)], "V(e_{i}) = {:?}", v.entries());
    }
    let half = make_vector(&[(1, 0.5), (2, 0.5)], n, false).unwrap();
    let v = evaluate(&shift, &half).unwrap();
    ensure!(v.entries() == [(2, 0.25), (3, 0.75)], "V(1/2,1/2) = {:?}", v.entries());

    let fixed = builtin("example4-fixed", None).unwrap().op.tensor;
    ensure!(
        fixed.coeff(1, 2, 1) == 0.5 && fixed.coeff(2, 1, 2) == 0.5,
        "two-coordinate example has P12,1 = {}, P21,2 = {}",
        fixed.coeff(1, 2, 1),
        fixed.coeff(2, 1, 2)
    );
    let x0 = make_vector(&[(1, 0.3), (2, 0.7)], n, false).unwrap();
    match fixed_point_search(&fixed, &x0, 1e-10, 10_000).unwrap() {
        FixedPointResult::Converged { point, residual, .. } => {
            ensure!(residual < 1e-10, "residual {residual}");
            let target = make_vector(&[(1, 0.5), (2, 0.5)], n, false).unwrap();
            let gap = opqso::simplex::l1_distance(&point, &target).unwrap();
            ensure!(gap < 1e-10, "converged to {:?}", point.entries());
        }
        other => return Err(format!("two-coordinate example: {other:?}")),
    }

    let lso = lso_embed(&StochasticMatrix::shift(n).unwrap());
    let mut rng = seeded(SEED ^ 5);
    let mut statuses = BTreeSet::new();
    for s in 0..20 {
        let x0 = random_point(&mut rng, n);
        let r = fixed_point_search(&lso, &x0, 1e-10, 10_000).unwrap();
        ensure!(!r.is_converged(), "LSO shift converged from start {s}");
        statuses.insert(match r {
            FixedPointResult::LeftWindow { .. } => "left-window",
            _ => "no-convergence",
        });
    }
    Ok(format!(
        "shift images exact; midpoint found; LSO shift statuses {statuses:?}"
    ))
}

fn random_stochastic(n: usize, seed: u64) -> StochasticMatrix {
    let mut rng = seeded(seed);
    let rows = if seed.is_multiple_of(2) {
        // disjoint row supports from a random partition; leftover rows escape
        let mut coords: Vec<usize> = (1..=n).collect();
        coords.shuffle(&mut rng);
        let mut rows = Vec::new();
        let mut rest = coords.as_slice();
        for _ in 0..n {
            if rest.is_empty() {
                rows.push(SimplexVector::escaped(n));
                continue;
            }
            let take = rng.random_range(1..=rest.len().min(3));
            let w = dirichlet_uniform(&mut rng, take);
            let entries: Vec<(usize, f64)> = rest[..take].iter().copied().zip(w).collect();
            rows.push(make_vector(&entries, n, true).unwrap());
            rest = &rest[take..];
        }
        rows.shuffle(&mut rng);
        rows
    } else {
        (0..n)
            .map(|_| {
                let take = rng.random_range(1..=3);
                let idx = distinct_indices(&mut rng, n, take);
                let w = dirichlet_uniform(&mut rng, take);
                make_vector(&idx.into_iter().zip(w).collect::<Vec<_>>(), n, true).unwrap()
            })
            .collect()
    };
    StochasticMatrix::new(rows).unwrap()
}

fn criterion_6() -> Outcome {
    let n = 16;
    let (mut ops, mut worst) = (0, 0.0f64);
    for s in 0..100u64 {
        let m = random_stochastic(n, derive_seed(SEED ^ 6, s));
        let t = lso_embed(&m);
        let mut rng = seeded(s);
        for _ in 0..20 {
            let x = random_point(&mut rng, n);
            let v = evaluate(&t, &x).unwrap();
            // row vector times matrix
            let mut xt = vec![0.0; n + 1];
            for (i, xi) in x.iter() {
                for (k, tik) in m.row(i).iter() {
                    xt[k] += xi * tik;
                }
            }
            for (k, expected) in xt.iter().enumerate().skip(1) {
                worst = worst.max((v.get(k) - expected).abs());
            }
        }
        ensure!(worst <= 1e-12, "matrix {s}: LSO evaluation off by {worst}");
        let exact = characterize(&t).is_op();
        ensure!(
            lso_is_op(&m) == exact,
            "matrix {s}: lso_is_op disagrees with characterize"
        );
        let disjoint_rows = (1..=n).all(|i| (i + 1..=n).all(|j| m.row(i).support().is_disjoint(&m.row(j).support())));
        ensure!(
            disjoint_rows == exact,
            "matrix {s}: row disjointness {disjoint_rows}, OP {exact}"
        );
        ops += exact as usize;
    }
    Ok(format!("100 matrices, {ops} OP, max difference {worst:e}"))
}

fn criterion_7() -> Outcome {
    let n = 16;
    let perm = IndexMap::random_permutation(n, &mut seeded(SEED ^ 7));
    let cases = [
        ("standard", gen_standard(n, None).unwrap(), true),
        ("permuted standard", gen_standard(n, Some(&perm)).unwrap(), true),
        ("half-half", gen_half_half(n).unwrap(), false),
        ("dyadic", gen_dyadic(n).unwrap(), false),
        ("e_k, k >= 2", gen_shifted_standard(n).unwrap(), false),
    ];
    for (name, system, total) in &cases {
        let p = profile(system);
        ensure!(p.total == *total, "{name}: total = {}", p.total);
    }
    let p = profile(&cases[4].1);
    ensure!(
        p.complement.to_vec() == vec![1],
        "e_k, k >= 2: complement {}",
        p.complement
    );
    Ok("totality exactly for the standard bases; {e_k}_{k>=2} misses {1}".into())
}

fn criterion_8() -> Outcome {
    let one = profile(builtin("example4-1", None).unwrap().system.as_ref().unwrap());
    ensure!(one.beta.to_vec() == vec![2, 3, 4], "example4-1 beta {}", one.beta);
    let two = profile(builtin("example4-2", None).unwrap().system.as_ref().unwrap());
    let need = IndexSet::within([3, 4, 5], 16).unwrap();
    ensure!(
        need.is_subset(&two.complement),
        "example4-2 complement {}",
        two.complement
    );
    ensure!(two.beta.to_vec() == vec![2, 3, 4], "example4-2 beta {}", two.beta);
    Ok(format!(
        "beta {} / {}, complement {}",
        one.beta, two.beta, two.complement
    ))
}

/// All subsets of 1..=n with size 1..=max, in lexicographic order.
fn small_faces(n: usize, max: usize) -> Vec<Vec<usize>> {
    fn grow(n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let start = cur.last().map_or(1, |&l| l + 1);
        for k in start..=n {
            cur.push(k);
            out.push(cur.clone());
            if cur.len() < max {
                grow(n, max, cur, out);
            }
            cur.pop();
        }
    }
    let mut out = Vec::new();
    grow(n, max, &mut Vec::new(), &mut out);
    out
}

fn criterion_9() -> Outcome {
    let n = 16;
    let op = build_op(
        &gen_half_half(n).unwrap(),
        &IndexMap::identity(n),
        &ComplementStrategy::new(),
    )
    .unwrap();
    let lib = face_map_audit_all(&op, 3, 50, SEED).map_err(|e| e.to_string())?;
    ensure!(
        lib.passed && lib.failure_count == 0,
        "library audit: {:?}",
        lib.failures.first()
    );
    // independent check: member ℓ <= 8 is supported on {2ℓ-1, 2ℓ}, later ones escape
    let faces = small_faces(n, 3);
    let mut rng = seeded(SEED ^ 9);
    for face in &faces {
        let expected: BTreeSet<usize> = face
            .iter()
            .filter(|&&l| l <= n / 2)
            .flat_map(|&l| [2 * l - 1, 2 * l])
            .collect();
        let alpha = IndexSet::within(face.iter().copied(), n).unwrap();
        for _ in 0..50 {
            let x = sample_interior_with(&alpha, n, &mut rng).unwrap();
            let v = dense_evaluate(&op.tensor, &dense(&x));
            let got: BTreeSet<usize> = (1..=n).filter(|&k| v[k - 1] > 0.0).collect();
            ensure!(got == expected, "face {face:?}: support {got:?}, expected {expected:?}");
        }
    }
    Ok(format!("{} faces x 50 samples, zero failures", faces.len()))
}

fn criterion_10() -> Outcome {
    let n = 16;
    let faces = small_faces(n, 4);
    let mut checked = 0;
    for name in ["half-half", "example4-1"] {
        let op = builtin(name, Some(n)).unwrap().op.constructed.unwrap();
        let lib = boundary_fixed_point_audit(&op, 20, 4, SEED).map_err(|e| format!("{name}: {e}"))?;
        ensure!(
            lib.passed && !lib.truncated,
            "{name}: library audit {:?}",
            lib.failures.first()
        );
        ensure!(
            lib.faces_checked == faces.len(),
            "{name}: {} faces audited",
            lib.faces_checked
        );
        let mut rng = seeded(SEED ^ 10);
        for face in &faces {
            let alpha = IndexSet::within(face.iter().copied(), n).unwrap();
            for _ in 0..20 {
                let x = sample_interior_with(&alpha, n, &mut rng).unwrap();
                let xd = dense(&x);
                let v = dense_evaluate(&op.tensor, &xd);
                let l1: f64 = v.iter().zip(&xd).map(|(a, b)| (a - b).abs()).sum();
                ensure!(l1 > 1e-6, "{name}: face {face:?} has residual {l1}");
                checked += 1;
            }
        }
    }
    let op = builtin("example4-fixed", None).unwrap().op.constructed.unwrap();
    match existence_probe(&op, &FixedPointOptions::default()).map_err(|e| e.to_string())? {
        ProbeReport::Found { alpha, point, residual } => {
            ensure!(alpha.to_vec() == vec![1, 2], "probe face {alpha}");
            let target = make_vector(&[(1, 0.5), (2, 0.5)], op.window(), false).unwrap();
            let gap = opqso::simplex::l1_distance(&point, &target).unwrap();
            ensure!(gap < 1e-10 && residual < 1e-10, "probe point {:?}", point.entries());
        }
        other => return Err(format!("existence probe: {other:?}")),
    }
    Ok(format!(
        "{checked} boundary samples with residual > 1e-6; probe found (1/2, 1/2)"
    ))
}

fn criterion_11() -> Outcome {
    let n = 1024;
    let system = gen_dyadic(n).unwrap();
    let mut owner = vec![0usize; n + 1];
    for (k, member) in system.members().iter().enumerate() {
        for (i, _) in member.iter() {
            ensure!(
                owner[i] == 0,
                "coordinate {i} shared by members {} and {}",
                owner[i],
                k + 1
            );
            owner[i] = k + 1;
        }
    }
    let mut checked = 0;
    for member in system.members() {
        let j = member.support().first().ok_or("empty dyadic member")?;
        if j < 3 {
            continue;
        }
        let levels = (n / j).ilog2() as i32;
        let bound = 1.0 - (1.0 / j as f64).powi(levels + 1);
        ensure!(
            member.mass() >= bound - 1e-12,
            "member on {j}: mass {} < {bound}",
            member.mass()
        );
        checked += 1;
    }
    Ok(format!("{} members disjoint; {checked} mass bounds hold", system.len()))
}

fn run_cli(args: &[String]) -> (Option<i32>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_opqso"))
        .args(args)
        .env_remove("OPQSO_SEED")
        .output()
        .expect("binary runs");
    (out.status.code(), out.stdout)
}

fn criterion_12() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let x0 = root.join("x0.json");
    std::fs::write(&x0, r#"{"window": 16, "entries": [[1, 0.3], [2, 0.7]]}"#).map_err(|e| e.to_string())?;
    let x0 = x0.to_string_lossy().into_owned();
    let runs: Vec<(&str, Vec<&str>, &str)> = vec![
        ("validate", vec!["validate", "--builtin", "example4-2"], "json"),
        ("construct", vec!["construct", "--builtin", "example4-2"], "json"),
        (
            "check-op",
            vec!["check-op", "--builtin", "half-half:16", "--trials", "500"],
            "json",
        ),
        (
            "check-op-example",
            vec!["check-op", "--builtin", "example4-1", "--trials", "300"],
            "json",
        ),
        (
            "simulate-csv",
            vec!["simulate", "--builtin", "dyadic:64", "--steps", "20", "--format", "csv"],
            "csv",
        ),
        (
            "simulate-json",
            vec!["simulate", "--builtin", "shift:32", "--steps", "10"],
            "json",
        ),
        (
            "fixed-point",
            vec!["fixed-point", "--builtin", "example4-fixed", "--x0", &x0],
            "json",
        ),
        (
            "audit-face",
            vec![
                "audit",
                "--builtin",
                "half-half:16",
                "--kind",
                "face",
                "--max-face-size",
                "2",
            ],
            "json",
        ),
        (
            "audit-boundary",
            vec![
                "audit",
                "--builtin",
                "example4-1",
                "--kind",
                "boundary",
                "--max-face-size",
                "2",
            ],
            "json",
        ),
        (
            "audit-existence",
            vec!["audit", "--builtin", "example4-fixed", "--kind", "existence"],
            "json",
        ),
        (
            "analyze-system",
            vec!["analyze-system", "--builtin", "dyadic:64"],
            "json",
        ),
    ];
    let mut files = 0;
    for (name, args, ext) in &runs {
        let mut outputs = Vec::new();
        for (run, threads) in [(0, "1"), (1, "4")] {
            let path = root.join(format!("{name}-{run}.{ext}"));
            let mut full: Vec<String> = args.iter().map(|s| s.to_string()).collect();
            full.extend(["--seed", "7", "--threads", threads, "--out"].map(String::from));
            full.push(path.to_string_lossy().into_owned());
            let (code, stdout) = run_cli(&full);
            ensure!(matches!(code, Some(0) | Some(3)), "{name}: exit code {code:?}");
            let mut bytes = std::fs::read(&path).map_err(|e| format!("{name}: {e}"))?;
            bytes.extend(stdout);
            let sidecar = path.with_file_name(format!("{name}-{run}.sidecar.json"));
            if Path::new(&sidecar).exists() {
                bytes.extend(std::fs::read(&sidecar).map_err(|e| e.to_string())?);
            }
            outputs.push(bytes);
        }
        ensure!(!outputs[0].is_empty(), "{name}: empty output");
        ensure!(outputs[0] == outputs[1], "{name}: outputs differ between runs");
        files += 1;
    }
    Ok(format!(
        "{files} invocations byte-identical across repeated runs (1 and 4 threads)"
    ))
}

fn main() {
    let criteria: [Criterion; 12] = [
        (
            1,
            "characterization soundness against randomized search",
            Duration::from_secs(30),
            criterion_1,
        ),
        (
            2,
            "pi-Volterra equivalence on finite windows",
            Duration::from_secs(10),
            criterion_2,
        ),
        (
            3,
            "constructed operators are valid OP QSOs",
            Duration::from_secs(60),
            criterion_3,
        ),
        (
            4,
            "canonical and tensor evaluation agree",
            Duration::from_secs(120),
            criterion_4,
        ),
        (
            5,
            "shift, two-coordinate and LSO shift examples",
            Duration::from_secs(60),
            criterion_5,
        ),
        (
            6,
            "LSO embedding matches matrix action",
            Duration::from_secs(60),
            criterion_6,
        ),
        (7, "totality of generator systems", Duration::from_secs(10), criterion_7),
        (8, "example system profiles", Duration::from_secs(10), criterion_8),
        (
            9,
            "face mapping on the half-half operator",
            Duration::from_secs(20),
            criterion_9,
        ),
        (
            10,
            "no fixed points on small faces; existence probe",
            Duration::from_secs(120),
            criterion_10,
        ),
        (
            11,
            "dyadic system at window 1024",
            Duration::from_secs(10),
            criterion_11,
        ),
        (12, "CLI reproducibility", Duration::from_secs(120), criterion_12),
    ];
    let mut failed = 0;
    for (id, title, budget, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.1?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {id}: {title} ({detail}) [{elapsed:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id}: {title}: {why} [{elapsed:.2?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 12 criteria failed");
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}
