//! JSON operator specs, built-in examples and deterministic output.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::construct::{build_op, ComplementStrategy, ConstructedOp};
use crate::error::{Error, Result};
use crate::heredity::{
    lso_embed, ExplicitTensor, HeredityTensor, RowLiteral, StochasticMatrix, TensorKind, TensorLiteral,
};
use crate::orthosys::{
    gen_dyadic, gen_example4_1, gen_example4_2, gen_example4_fixed, gen_half_half, gen_shifted_standard, gen_standard,
    OrthogonalSystem,
};
use crate::qso::{pi_volterra_from, shift_tensor_with, volterra_from_skew, IndexMap, ShiftBoundary, SkewMatrix};
use crate::simplex::make_vector;

/// `{"kind": ..., "window": N, "params": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QsoSpec {
    pub kind: TensorKind,
    pub window: usize,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShiftParams {
    #[serde(default)]
    boundary: ShiftBoundary,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VolterraParams {
    #[serde(default)]
    skew: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PiVolterraParams {
    #[serde(default)]
    skew: Vec<(usize, usize, f64)>,
    pi: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LsoParams {
    rows: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitParams {
    rows: Vec<RowLiteral>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstructedParams {
    system: OrthogonalSystem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pi: Option<Vec<usize>>,
    #[serde(default)]
    strategy: ComplementStrategy,
    /// Stored coefficients; when present they are used as-is instead of
    /// rebuilding from system, π and strategy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<Vec<RowLiteral>>,
}

/// A loaded operator, with its generating data when it was constructed.
#[derive(Debug, Clone)]
pub struct LoadedOp {
    pub tensor: HeredityTensor,
    pub constructed: Option<ConstructedOp>,
}

impl LoadedOp {
    fn plain(tensor: HeredityTensor) -> Self {
        LoadedOp {
            tensor,
            constructed: None,
        }
    }

    fn from_constructed(op: ConstructedOp) -> Self {
        LoadedOp {
            tensor: op.tensor.clone(),
            constructed: Some(op),
        }
    }
}

fn params<T: DeserializeOwned>(kind: TensorKind, v: &serde_json::Value) -> Result<T> {
    let v = if v.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        v.clone()
    };
    serde_json::from_value(v).map_err(|e| Error::Schema(format!("params for {kind:?}: {e}")))
}

/// Map given as images of 1..=len; indices beyond `members` are allowed and
/// denote members outside the window.
pub fn index_map_from(images: Vec<usize>, members: usize) -> Result<IndexMap> {
    let out = images.iter().copied().max().unwrap_or(0).max(members);
    IndexMap::new(images, out)
}

pub fn load_spec(spec: &QsoSpec) -> Result<LoadedOp> {
    let n = spec.window;
    if n == 0 {
        return Err(Error::EmptyWindow);
    }
    let kind = spec.kind;
    Ok(match kind {
        TensorKind::Shift => {
            let p: ShiftParams = params(kind, &spec.params)?;
            LoadedOp::plain(shift_tensor_with(n, p.boundary)?)
        }
        TensorKind::Volterra => {
            let p: VolterraParams = params(kind, &spec.params)?;
            LoadedOp::plain(volterra_from_skew(&SkewMatrix::new(n, &p.skew)?))
        }
        TensorKind::PiVolterra => {
            let p: PiVolterraParams = params(kind, &spec.params)?;
            let pi = IndexMap::new(p.pi, n)?;
            LoadedOp::plain(pi_volterra_from(&SkewMatrix::new(n, &p.skew)?, &pi)?)
        }
        TensorKind::Lso => {
            let p: LsoParams = params(kind, &spec.params)?;
            let rows = p
                .rows
                .iter()
                .map(|r| make_vector(r, n, true))
                .collect::<Result<Vec<_>>>()?;
            if rows.len() != n {
                return Err(Error::Schema(format!("lso needs {n} rows, got {}", rows.len())));
            }
            LoadedOp::plain(lso_embed(&StochasticMatrix::new(rows)?))
        }
        TensorKind::Explicit => {
            let p: ExplicitParams = params(kind, &spec.params)?;
            let lit = TensorLiteral {
                window: n,
                rows: p.rows,
            };
            LoadedOp::plain(ExplicitTensor::from_literal(&lit)?.into_tensor(TensorKind::Explicit))
        }
        TensorKind::Constructed => {
            let p: ConstructedParams = params(kind, &spec.params)?;
            if p.system.window() != n {
                return Err(Error::WindowMismatch {
                    left: n,
                    right: p.system.window(),
                });
            }
            let pi = match p.pi {
                Some(images) => index_map_from(images, p.system.len())?,
                None => IndexMap::identity(n),
            };
            match p.rows {
                Some(rows) => {
                    let tensor = ExplicitTensor::from_literal(&TensorLiteral { window: n, rows })?;
                    LoadedOp::from_constructed(ConstructedOp {
                        tensor: tensor.into_tensor(TensorKind::Constructed),
                        system: p.system,
                        pi,
                        strategy: p.strategy,
                    })
                }
                None => LoadedOp::from_constructed(build_op(&p.system, &pi, &p.strategy)?),
            }
        }
    })
}

/// Self-contained spec for a constructed operator, including its rows.
pub fn constructed_spec(op: &ConstructedOp) -> QsoSpec {
    let params = ConstructedParams {
        system: op.system.clone(),
        pi: Some(op.pi.images().to_vec()),
        strategy: op.strategy.clone(),
        rows: Some(op.tensor.materialize().to_literal().rows),
    };
    QsoSpec {
        kind: TensorKind::Constructed,
        window: op.window(),
        params: serde_json::to_value(params).expect("constructed params serialize"),
    }
}

/// Explicit spec listing every row of `t`.
pub fn explicit_spec(t: &HeredityTensor) -> QsoSpec {
    let lit = t.materialize().to_literal();
    QsoSpec {
        kind: TensorKind::Explicit,
        window: lit.window,
        params: serde_json::json!({ "rows": lit.rows }),
    }
}

/// Default window for built-ins given without one.
pub const DEFAULT_BUILTIN_WINDOW: usize = 16;

/// A named example: an operator and, where it has one, its orthogonal system.
#[derive(Debug, Clone)]
pub struct Builtin {
    pub op: LoadedOp,
    pub system: Option<OrthogonalSystem>,
}

fn constructed_builtin(system: OrthogonalSystem, pi: IndexMap) -> Result<Builtin> {
    let op = build_op(&system, &pi, &ComplementStrategy::new())?;
    Ok(Builtin {
        op: LoadedOp::from_constructed(op),
        system: Some(system),
    })
}

/// Resolve `name[:window]`. `window_override` wins over the inline window.
pub fn builtin(name: &str, window_override: Option<usize>) -> Result<Builtin> {
    let (base, inline) = match name.split_once(':') {
        Some((b, w)) => (
            b,
            Some(
                w.parse::<usize>()
                    .map_err(|_| Error::Schema(format!("bad window in builtin '{name}'")))?,
            ),
        ),
        None => (name, None),
    };
    let n = window_override.or(inline).unwrap_or(DEFAULT_BUILTIN_WINDOW);
    let id = || IndexMap::identity(n);
    match base {
        "shift" => Ok(Builtin {
            op: LoadedOp::plain(shift_tensor_with(n, ShiftBoundary::Leaky)?),
            system: None,
        }),
        "lso-shift" => Ok(Builtin {
            op: LoadedOp::plain(lso_embed(&StochasticMatrix::shift(n)?)),
            system: None,
        }),
        "standard" => constructed_builtin(gen_standard(n, None)?, id()),
        "shifted-standard" => {
            let s = gen_shifted_standard(n)?;
            // e_k -> e_{k+1}; the last basis vector escapes
            let pi = index_map_from((1..=n).collect(), s.len())?;
            constructed_builtin(s, pi)
        }
        "half-half" => constructed_builtin(gen_half_half(n)?, id()),
        "dyadic" => constructed_builtin(gen_dyadic(n)?, id()),
        "example4-1" => constructed_builtin(gen_example4_1(n)?, id()),
        "example4-2" => constructed_builtin(gen_example4_2(n)?, id()),
        "example4-fixed" => constructed_builtin(gen_example4_fixed(n)?, IndexMap::transposition(n, 1, 2)?),
        _ => Err(Error::Schema(format!(
            "unknown builtin '{base}' (expected shift, lso-shift, standard, shifted-standard, half-half, dyadic, example4-1, example4-2, example4-fixed)"
        ))),
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Schema(format!(
            "{}: line {} column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

/// Pretty JSON with object keys sorted and floats in shortest round-trip form.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's Value map is ordered by key
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}
