//! JSON encodings of cq states, channels and side-information setups.
//!
//! Matrices are row-major lists of rows, each entry a `[re, im]` pair.
//! A state's `pmf` is nested with one array level per classical register,
//! and `conditionals` maps comma-separated symbol tuples (`"0,1"`) to matrices.
//! Tuples of zero probability may be omitted.

use std::collections::BTreeMap;
use std::path::Path;

use gpwlab_core::cq::{CQState, QuantumChannel, Roles, SideInfoSetup};
use gpwlab_core::qmat::{c, CMatrix, RegisterLayout};
use serde::Deserialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalRegister {
    pub name: String,
    pub size: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumRegister {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub classical: Vec<ClassicalRegister>,
    pub pmf: Value,
    pub quantum: Vec<QuantumRegister>,
    pub conditionals: BTreeMap<String, MatrixSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub input: Vec<QuantumRegister>,
    pub output: Vec<QuantumRegister>,
    pub kraus: Vec<MatrixSpec>,
}

/// Either an encoder state with a channel (and side-information registers),
/// or, without `channel`, a state already over (U, V; B, E, S).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupFile {
    pub state: StateSpec,
    #[serde(default)]
    pub channel: Option<ChannelSpec>,
    #[serde(default)]
    pub side_info: Option<Vec<String>>,
    #[serde(default)]
    pub roles: Option<Roles>,
}

pub fn matrix(spec: &MatrixSpec, what: &str) -> CliResult<CMatrix> {
    let n = spec.len();
    if spec.iter().any(|row| row.len() != n) {
        return Err(CliError::schema(format!("{what}: matrix must be square")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| c(spec[i][j][0], spec[i][j][1])))
}

fn quantum_layout(regs: &[QuantumRegister], what: &str) -> CliResult<RegisterLayout> {
    RegisterLayout::new(regs.iter().map(|r| (r.name.clone(), r.dim)))
        .map_err(|source| CliError::Input { context: what.into(), source })
}

fn flatten_pmf(v: &Value, shape: &[usize], out: &mut Vec<f64>) -> CliResult<()> {
    match (v, shape.split_first()) {
        (Value::Number(x), None) => {
            out.push(x.as_f64().ok_or_else(|| CliError::schema("pmf entry is not a number"))?);
            Ok(())
        }
        (Value::Array(items), Some((&n, rest))) if items.len() == n => {
            items.iter().try_for_each(|item| flatten_pmf(item, rest, out))
        }
        // a state without classical registers may give its weight as [1.0]
        (Value::Array(items), None) if items.len() == 1 => flatten_pmf(&items[0], &[], out),
        _ => Err(CliError::schema(format!("pmf does not have shape {shape:?}"))),
    }
}

fn tuple_key(cls: &RegisterLayout, k: usize) -> String {
    cls.unflatten(k).iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

pub fn build_state(spec: &StateSpec) -> CliResult<CQState> {
    let classical = RegisterLayout::new(spec.classical.iter().map(|r| (r.name.clone(), r.size)))
        .map_err(|source| CliError::Input { context: "classical registers".into(), source })?;
    let quantum = quantum_layout(&spec.quantum, "quantum registers")?;
    let shape: Vec<usize> = spec.classical.iter().map(|r| r.size).collect();
    let mut pmf = Vec::new();
    flatten_pmf(&spec.pmf, &shape, &mut pmf)?;
    let n = classical.total_dim();
    let mut conds: Vec<Option<CMatrix>> = vec![None; n];
    let keys: BTreeMap<String, usize> = (0..n).map(|k| (tuple_key(&classical, k), k)).collect();
    for (key, m) in &spec.conditionals {
        let compact: String = key.chars().filter(|ch| !ch.is_whitespace()).collect();
        let k = *keys.get(&compact).ok_or_else(|| CliError::schema(format!("conditional key `{key}` is not a classical tuple")))?;
        let mat = matrix(m, &format!("conditional {key}"))?;
        if mat.nrows() != quantum.total_dim() {
            return Err(CliError::schema(format!("conditional {key} has dimension {}, expected {}", mat.nrows(), quantum.total_dim())));
        }
        conds[k] = Some(mat);
    }
    for (k, cond) in conds.iter().enumerate() {
        if cond.is_none() && pmf.get(k).copied().unwrap_or(0.0) > 0.0 {
            return Err(CliError::schema(format!("missing conditional for tuple `{}`", tuple_key(&classical, k))));
        }
    }
    CQState::new(classical, pmf, conds, quantum).map_err(|source| CliError::Input { context: "state".into(), source })
}

pub fn build_channel(spec: &ChannelSpec) -> CliResult<QuantumChannel> {
    let kraus = spec.kraus.iter().enumerate().map(|(i, k)| matrix(k, &format!("Kraus operator {i}"))).collect::<CliResult<Vec<_>>>()?;
    let input = quantum_layout(&spec.input, "channel input")?;
    let output = quantum_layout(&spec.output, "channel output")?;
    QuantumChannel::new(kraus, input, output).map_err(|source| CliError::Input { context: "channel".into(), source })
}

/// A loaded input: the state over (U, V; B, E, S) used by every rate and
/// bound, plus the roles naming its registers.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub state: CQState,
    pub setup: Option<SideInfoSetup>,
    pub roles: Roles,
}

pub fn load_setup(path: &Path, roles_override: Option<&Roles>) -> CliResult<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::schema(format!("cannot read input {}: {e}", path.display())))?;
    let file: SetupFile = serde_json::from_str(&text).map_err(|e| CliError::schema(format!("input {}: {e}", path.display())))?;
    from_setup_file(&file, roles_override)
}

pub fn from_setup_file(file: &SetupFile, roles_override: Option<&Roles>) -> CliResult<Loaded> {
    let state = build_state(&file.state)?;
    let (state, setup) = match &file.channel {
        Some(ch) => {
            let side = file.side_info.clone().unwrap_or_default();
            let setup = SideInfoSetup::new(state, build_channel(ch)?, side).map_err(|source| CliError::Input { context: "setup".into(), source })?;
            let rate = setup.rate_state().map_err(|source| CliError::Input { context: "setup".into(), source })?;
            (rate, Some(setup))
        }
        None => {
            if file.side_info.is_some() {
                return Err(CliError::schema("`side_info` needs a `channel`"));
            }
            (state, None)
        }
    };
    let roles = roles_override.or(file.roles.as_ref()).cloned().unwrap_or_default();
    check_roles(&state, &roles)?;
    Ok(Loaded { state, setup, roles })
}

fn check_roles(s: &CQState, roles: &Roles) -> CliResult<()> {
    let check = |names: &[String], layout: &RegisterLayout, part: &str| -> CliResult<()> {
        for n in names {
            if !layout.contains(n) {
                return Err(CliError::schema(format!("role {part} names `{n}`, which is not a register of the state")));
            }
        }
        Ok(())
    };
    check(&roles.u, s.classical(), "u")?;
    check(&roles.v, s.classical(), "v")?;
    check(&roles.b, s.quantum(), "b")?;
    check(&roles.e, s.quantum(), "e")?;
    check(&roles.s, s.quantum(), "s")
}
