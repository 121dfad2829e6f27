//! Classical-quantum states, Kraus channels and the structural constructions
//! built from them (marginals, Markov states, erasure extension).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{
    block_diag, c, identity, kron, partial_trace_op, shannon_entropy, validate_state,
    von_neumann_entropy, CMatrix, DensityMatrix, RegisterLayout,
};

const PMF_TOL: f64 = 1e-12;
const KRAUS_TOL: f64 = 1e-10;

/// Which registers play the parts of U, V (classical) and B, E, S (quantum).
/// An empty list marks the register as trivial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roles {
    pub u: Vec<String>,
    pub v: Vec<String>,
    pub b: Vec<String>,
    pub e: Vec<String>,
    pub s: Vec<String>,
}

impl Default for Roles {
    fn default() -> Self {
        let one = |x: &str| vec![x.to_string()];
        Self { u: one("U"), v: one("V"), b: one("B"), e: one("E"), s: one("S") }
    }
}

pub(crate) fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

pub(crate) fn join<'a>(a: &[&'a str], b: &[&'a str]) -> Vec<&'a str> {
    a.iter().chain(b).copied().collect()
}

/// Joint pmf over classical registers with one conditional density operator
/// per classical tuple. Tuples are flattened row-major over `classical`.
#[derive(Debug, Clone, PartialEq)]
pub struct CQState {
    classical: RegisterLayout,
    pmf: Vec<f64>,
    conditionals: Vec<CMatrix>,
    quantum: RegisterLayout,
}

impl CQState {
    /// Validates the pmf and every conditional of positive weight. Missing
    /// conditionals (allowed only at zero weight) become maximally mixed.
    pub fn new(
        classical: RegisterLayout,
        pmf: Vec<f64>,
        conditionals: Vec<Option<CMatrix>>,
        quantum: RegisterLayout,
    ) -> Result<Self> {
        let n = classical.total_dim();
        if pmf.len() != n {
            return Err(Error::BadPmf(format!("{} entries for {n} classical tuples", pmf.len())));
        }
        if conditionals.len() != n {
            return Err(Error::BadConditional(format!(
                "{} conditionals for {n} classical tuples",
                conditionals.len()
            )));
        }
        if let Some(p) = pmf.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::BadPmf(format!("entry {p} is negative or not finite")));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > PMF_TOL {
            return Err(Error::BadPmf(format!("entries sum to {total}")));
        }
        for name in quantum.names() {
            if classical.contains(name) {
                return Err(Error::BadLayout(format!("`{name}` is both classical and quantum")));
            }
        }
        let d = quantum.total_dim();
        let mut conds = Vec::with_capacity(n);
        for (k, (cond, &p)) in conditionals.into_iter().zip(&pmf).enumerate() {
            match cond {
                Some(m) => {
                    if m.nrows() != d || m.ncols() != d {
                        return Err(Error::BadConditional(format!(
                            "tuple {:?}: {}x{} matrix, expected {d}x{d}",
                            classical.unflatten(k),
                            m.nrows(),
                            m.ncols()
                        )));
                    }
                    if p > 0.0 {
                        validate_state(&m).map_err(|e| {
                            Error::BadConditional(format!("tuple {:?}: {e}", classical.unflatten(k)))
                        })?;
                    }
                    conds.push(crate::qmat::hermitian_part(&m));
                }
                None if p > 0.0 => {
                    return Err(Error::BadConditional(format!(
                        "tuple {:?} has positive weight but no state",
                        classical.unflatten(k)
                    )))
                }
                None => conds.push(maximally_mixed(d)),
            }
        }
        Ok(Self { classical, pmf, conditionals: conds, quantum })
    }

    pub(crate) fn from_parts(
        classical: RegisterLayout,
        pmf: Vec<f64>,
        conditionals: Vec<CMatrix>,
        quantum: RegisterLayout,
    ) -> Self {
        debug_assert_eq!(pmf.len(), classical.total_dim());
        debug_assert_eq!(conditionals.len(), pmf.len());
        Self { classical, pmf, conditionals, quantum }
    }

    /// Purely quantum state (no classical registers).
    pub fn from_density(rho: &DensityMatrix) -> Self {
        Self::from_parts(
            RegisterLayout::empty(),
            vec![1.0],
            vec![rho.matrix().clone()],
            rho.layout().clone(),
        )
    }

    pub fn classical(&self) -> &RegisterLayout {
        &self.classical
    }

    pub fn quantum(&self) -> &RegisterLayout {
        &self.quantum
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn conditionals(&self) -> &[CMatrix] {
        &self.conditionals
    }

    pub fn conditional(&self, tuple: usize) -> &CMatrix {
        &self.conditionals[tuple]
    }

    pub fn num_tuples(&self) -> usize {
        self.pmf.len()
    }

    fn split_names<'a>(&self, names: &[&'a str]) -> Result<(Vec<&'a str>, Vec<&'a str>)> {
        let mut cl = Vec::new();
        let mut qu = Vec::new();
        for &n in names {
            if cl.contains(&n) || qu.contains(&n) {
                return Err(Error::InvalidArgument(format!("register `{n}` listed twice")));
            }
            if self.classical.contains(n) {
                cl.push(n);
            } else if self.quantum.contains(n) {
                qu.push(n);
            } else {
                return Err(Error::UnknownRegister(n.to_string()));
            }
        }
        Ok((cl, qu))
    }

    /// For every full classical tuple, its index in the sub-alphabet of `names`
    /// (flattened in the order given).
    pub fn tuple_map(&self, names: &[&str]) -> Result<(RegisterLayout, Vec<usize>)> {
        let pos: Vec<usize> = names.iter().map(|n| self.classical.index_of(n)).collect::<Result<_>>()?;
        let sub = RegisterLayout::new(pos.iter().map(|&i| {
            let r = &self.classical.registers()[i];
            (r.name.clone(), r.dim)
        }))?;
        let map = (0..self.num_tuples())
            .map(|k| {
                let d = self.classical.unflatten(k);
                sub.flatten(&pos.iter().map(|&i| d[i]).collect::<Vec<_>>())
            })
            .collect();
        Ok((sub, map))
    }

    /// Marginal on the given classical registers (in the given order) and
    /// quantum registers (in layout order). Zero-weight conditionals are
    /// maximally mixed.
    pub fn marginal(&self, classical: &[&str], quantum: &[&str]) -> Result<CQState> {
        for n in classical {
            if !self.classical.contains(n) {
                return Err(Error::UnknownRegister(n.to_string()));
            }
        }
        let (sub, map) = self.tuple_map(classical)?;
        let q = self.quantum.restrict(quantum)?;
        let d = q.total_dim();
        let mut weights = vec![0.0; sub.total_dim()];
        let mut acc = vec![CMatrix::zeros(d, d); sub.total_dim()];
        for k in 0..self.num_tuples() {
            let p = self.pmf[k];
            if p == 0.0 {
                continue;
            }
            let (m, _) = partial_trace_op(&self.conditionals[k], &self.quantum, quantum)?;
            weights[map[k]] += p;
            acc[map[k]] += m * c(p, 0.0);
        }
        let conds = acc
            .into_iter()
            .zip(&weights)
            .map(|(m, &w)| if w > 0.0 { m / c(w, 0.0) } else { maximally_mixed(d) })
            .collect();
        Ok(CQState::from_parts(sub, weights, conds, q))
    }

    /// Marginal over a mixed list of classical and quantum register names.
    pub fn marginal_of(&self, names: &[&str]) -> Result<CQState> {
        let (cl, qu) = self.split_names(names)?;
        self.marginal(&cl, &qu)
    }

    /// Average quantum state Σ p(x) ρ_x.
    pub fn average_state(&self) -> CMatrix {
        let d = self.quantum.total_dim();
        let mut acc = CMatrix::zeros(d, d);
        for (p, m) in self.pmf.iter().zip(&self.conditionals) {
            if *p > 0.0 {
                acc += m * c(*p, 0.0);
            }
        }
        acc
    }

    /// Entropy in bits of the named registers: H(C) + Σ p(c) S(ρ_{Q|c}).
    pub fn entropy(&self, names: &[&str]) -> Result<f64> {
        let m = self.marginal_of(names)?;
        let mut h = shannon_entropy(&m.pmf);
        if !m.quantum.is_empty() {
            for (p, rho) in m.pmf.iter().zip(&m.conditionals) {
                if *p > 0.0 {
                    h += p * von_neumann_entropy(rho)?;
                }
            }
        }
        Ok(h)
    }

    /// I[A;B|C] = H(AC) + H(BC) − H(ABC) − H(C), in bits.
    pub fn mutual_information(&self, a: &[&str], b: &[&str], given: &[&str]) -> Result<f64> {
        for x in a {
            if b.contains(x) || given.contains(x) {
                return Err(Error::InvalidArgument(format!("register `{x}` appears in two groups")));
            }
        }
        for x in b {
            if given.contains(x) {
                return Err(Error::InvalidArgument(format!("register `{x}` appears in two groups")));
            }
        }
        if a.is_empty() || b.is_empty() {
            return Ok(0.0);
        }
        let ac = join(a, given);
        let bc = join(b, given);
        let abc = join(&ac, b);
        let h_c = if given.is_empty() { 0.0 } else { self.entropy(given)? };
        Ok(self.entropy(&ac)? + self.entropy(&bc)? - self.entropy(&abc)? - h_c)
    }

    /// Block-diagonal embedding |x⟩⟨x| ⊗ p(x) ρ_x, classical registers first.
    pub fn densify(&self) -> DensityMatrix {
        let blocks: Vec<CMatrix> = self
            .pmf
            .iter()
            .zip(&self.conditionals)
            .map(|(p, m)| m * c(*p, 0.0))
            .collect();
        let layout = self
            .classical
            .concat(&self.quantum)
            .expect("classical and quantum names are disjoint");
        DensityMatrix::new_unchecked(layout, block_diag(&blocks))
    }

    /// Tensor product; all register names must be distinct.
    pub fn tensor(&self, other: &CQState) -> Result<CQState> {
        let classical = self.classical.concat(&other.classical)?;
        let quantum = self.quantum.concat(&other.quantum)?;
        for n in quantum.names() {
            if classical.contains(n) {
                return Err(Error::BadLayout(format!("`{n}` is both classical and quantum")));
            }
        }
        let mut pmf = Vec::with_capacity(self.num_tuples() * other.num_tuples());
        let mut conds = Vec::with_capacity(pmf.capacity());
        for (p, a) in self.pmf.iter().zip(&self.conditionals) {
            for (q, b) in other.pmf.iter().zip(&other.conditionals) {
                pmf.push(p * q);
                conds.push(kron(a, b));
            }
        }
        Ok(CQState::from_parts(classical, pmf, conds, quantum))
    }

    /// Same state with every register renamed to `{name}{suffix}`.
    pub fn with_suffix(&self, suffix: &str) -> CQState {
        CQState::from_parts(
            self.classical.with_suffix(suffix),
            self.pmf.clone(),
            self.conditionals.clone(),
            self.quantum.with_suffix(suffix),
        )
    }

    /// Applies `f` to every conditional; `quantum` is the layout of the results.
    pub fn map_conditionals(
        &self,
        quantum: RegisterLayout,
        f: impl Fn(&CMatrix) -> Result<CMatrix>,
    ) -> Result<CQState> {
        let conds = self.conditionals.iter().map(f).collect::<Result<Vec<_>>>()?;
        let d = quantum.total_dim();
        if conds.iter().any(|m| m.nrows() != d) {
            return Err(Error::LayoutMismatch("mapped conditional has wrong dimension".into()));
        }
        Ok(CQState::from_parts(self.classical.clone(), self.pmf.clone(), conds, quantum))
    }

    /// Σ_u p(u) |u⟩⟨u| ⊗ ρ_{V|u} ⊗ ρ_{X|u} as a cq state with classical
    /// registers (u..., v...) and quantum registers `x`.
    pub fn markov_cq(&self, v: &[&str], u: &[&str], x: &[&str]) -> Result<CQState> {
        let uv = join(u, v);
        let joint = self.marginal(&uv, &[])?;
        let given_u = self.marginal(u, x)?;
        let nv: usize = joint.classical.total_dim() / given_u.classical.total_dim().max(1);
        let conds = (0..joint.num_tuples()).map(|k| given_u.conditionals[k / nv].clone()).collect();
        Ok(CQState::from_parts(joint.classical, joint.pmf, conds, given_u.quantum))
    }

    /// Dense form of [`CQState::markov_cq`]; layout (u..., v..., x...).
    pub fn markov_state(&self, v: &[&str], u: &[&str], x: &[&str]) -> Result<DensityMatrix> {
        Ok(self.markov_cq(v, u, x)?.densify())
    }

    /// Replaces classical register `u` by U' = (U, Ṽ), where Ṽ is `v` passed
    /// through an erasure channel with erasure probability `eps`. The erasure
    /// symbol is index |V|; U' is flattened as u·(|V|+1) + ṽ.
    pub fn erasure_extend(&self, u: &str, v: &str, eps: f64) -> Result<CQState> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidArgument(format!("erasure probability {eps} outside [0,1]")));
        }
        let iu = self.classical.index_of(u)?;
        let iv = self.classical.index_of(v)?;
        if iu == iv {
            return Err(Error::InvalidArgument("U and V must differ".into()));
        }
        let nv = self.classical.registers()[iv].dim;
        let ext = nv + 1;
        let new_layout = RegisterLayout::new(self.classical.registers().iter().enumerate().map(|(i, r)| {
            if i == iu {
                (r.name.clone(), r.dim * ext)
            } else {
                (r.name.clone(), r.dim)
            }
        }))?;
        let n = new_layout.total_dim();
        let mut pmf = vec![0.0; n];
        let mut conds = vec![CMatrix::zeros(0, 0); n];
        for k in 0..self.num_tuples() {
            let mut digits = self.classical.unflatten(k);
            let (du, dv) = (digits[iu], digits[iv]);
            for vt in 0..ext {
                let w = if vt == nv {
                    eps
                } else if vt == dv {
                    1.0 - eps
                } else {
                    0.0
                };
                digits[iu] = du * ext + vt;
                let idx = new_layout.flatten(&digits);
                pmf[idx] = self.pmf[k] * w;
                conds[idx] = self.conditionals[k].clone();
            }
        }
        Ok(CQState::from_parts(new_layout, pmf, conds, self.quantum.clone()))
    }
}

/// Alias for [`CQState::new`].
pub fn build_cq_state(
    classical: RegisterLayout,
    pmf: Vec<f64>,
    conditionals: Vec<Option<CMatrix>>,
    quantum: RegisterLayout,
) -> Result<CQState> {
    CQState::new(classical, pmf, conditionals, quantum)
}

pub(crate) fn maximally_mixed(d: usize) -> CMatrix {
    identity(d) * c(1.0 / d as f64, 0.0)
}

/// Closed-form erasure probability making I[U';B] − I[U';S] vanish, where
/// U' = (U, Ṽ). The result is re-verified on the extended state.
pub fn solve_erasure_epsilon(s: &CQState, roles: &Roles) -> Result<f64> {
    if roles.u.len() != 1 || roles.v.len() != 1 {
        return Err(Error::InvalidArgument("erasure extension needs single U and V registers".into()));
    }
    let u = refs(&roles.u);
    let v = refs(&roles.v);
    let b = refs(&roles.b);
    let sr = refs(&roles.s);
    let uv = join(&u, &v);
    let num = s.mutual_information(&u, &b, &[])? - s.mutual_information(&u, &sr, &[])?;
    let whole = s.mutual_information(&uv, &b, &[])? - s.mutual_information(&uv, &sr, &[])?;
    if num > 1e-12 || whole <= 0.0 {
        return Err(Error::NoRootInUnitInterval(format!(
            "I[U;B]-I[U;S] = {num:.6e}, I[UV;B]-I[UV;S] = {whole:.6e}"
        )));
    }
    let den = s.mutual_information(&v, &b, &u)? - s.mutual_information(&v, &sr, &u)?;
    if den.abs() <= 1e-9 {
        return Err(Error::DegenerateDenominator(den));
    }
    let eps = (1.0 + num.min(0.0) / den).clamp(0.0, 1.0);
    let ext = s.erasure_extend(u[0], v[0], eps)?;
    let check = ext.mutual_information(&u, &b, &[])? - ext.mutual_information(&u, &sr, &[])?;
    if check.abs() > 1e-8 {
        return Err(Error::Numerical(format!("extension leaves I[U';B]-I[U';S] = {check:.3e}")));
    }
    Ok(eps)
}

/// CPTP map in Kraus form.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumChannel {
    kraus: Vec<CMatrix>,
    input: RegisterLayout,
    output: RegisterLayout,
}

impl QuantumChannel {
    pub fn new(kraus: Vec<CMatrix>, input: RegisterLayout, output: RegisterLayout) -> Result<Self> {
        let (di, do_) = (input.total_dim(), output.total_dim());
        if kraus.is_empty() {
            return Err(Error::BadChannel("no Kraus operators".into()));
        }
        let mut sum = CMatrix::zeros(di, di);
        for (k, op) in kraus.iter().enumerate() {
            if op.nrows() != do_ || op.ncols() != di {
                return Err(Error::BadChannel(format!(
                    "Kraus operator {k} is {}x{}, expected {do_}x{di}",
                    op.nrows(),
                    op.ncols()
                )));
            }
            sum += op.adjoint() * op;
        }
        let dev = (sum - identity(di)).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if dev > KRAUS_TOL {
            return Err(Error::BadChannel(format!("sum of K†K deviates from identity by {dev:.3e}")));
        }
        Ok(Self { kraus, input, output })
    }

    pub fn identity(layout: RegisterLayout, output: RegisterLayout) -> Result<Self> {
        let d = layout.total_dim();
        Self::new(vec![identity(d)], layout, output)
    }

    /// Classical channel W(y|x) as Kraus operators sqrt(W(y|x)) |y⟩⟨x|.
    pub fn classical(w: &[Vec<f64>], input: RegisterLayout, output: RegisterLayout) -> Result<Self> {
        let (di, do_) = (input.total_dim(), output.total_dim());
        if w.len() != di || w.iter().any(|row| row.len() != do_) {
            return Err(Error::BadChannel("transition table has wrong shape".into()));
        }
        let mut kraus = Vec::new();
        for (x, row) in w.iter().enumerate() {
            for (y, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    let mut k = CMatrix::zeros(do_, di);
                    k[(y, x)] = c(p.sqrt(), 0.0);
                    kraus.push(k);
                }
            }
        }
        Self::new(kraus, input, output)
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn input(&self) -> &RegisterLayout {
        &self.input
    }

    pub fn output(&self) -> &RegisterLayout {
        &self.output
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let d = self.output.total_dim();
        let mut out = CMatrix::zeros(d, d);
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        crate::qmat::hermitian_part(&out)
    }

    pub fn apply_state(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.layout() != &self.input {
            return Err(Error::LayoutMismatch(format!(
                "channel input {:?}, state {:?}",
                self.input.names(),
                rho.layout().names()
            )));
        }
        Ok(DensityMatrix::new_unchecked(self.output.clone(), self.apply(rho.matrix())))
    }

    pub fn tensor(&self, other: &QuantumChannel) -> Result<QuantumChannel> {
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(kron(a, b));
            }
        }
        Ok(QuantumChannel {
            kraus,
            input: self.input.concat(&other.input)?,
            output: self.output.concat(&other.output)?,
        })
    }

    pub fn with_suffix(&self, suffix: &str) -> QuantumChannel {
        QuantumChannel {
            kraus: self.kraus.clone(),
            input: self.input.with_suffix(suffix),
            output: self.output.with_suffix(suffix),
        }
    }

    /// k-fold tensor power; for k > 1 the copies are renamed `{name}_{i}`.
    pub fn tensor_power(&self, k: usize) -> Result<QuantumChannel> {
        if k == 0 {
            return Err(Error::InvalidArgument("tensor power needs k >= 1".into()));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let mut acc = self.with_suffix("_1");
        for i in 2..=k {
            acc = acc.tensor(&self.with_suffix(&format!("_{i}")))?;
        }
        Ok(acc)
    }
}

/// Names `{base}_{i}` for i = 1..k, or `base` itself when k = 1.
pub fn power_names(base: &[String], k: usize) -> Vec<String> {
    if k == 1 {
        return base.to_vec();
    }
    (1..=k)
        .flat_map(|i| base.iter().map(move |b| format!("{b}_{i}")))
        .collect()
}

/// Channel N_{AS→BE} together with the encoder state ρ_{UVAS}.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfoSetup {
    pub state: CQState,
    pub channel: QuantumChannel,
    /// Input registers carrying the channel state S.
    pub side_info: Vec<String>,
}

impl SideInfoSetup {
    pub fn new(state: CQState, channel: QuantumChannel, side_info: Vec<String>) -> Result<Self> {
        if state.quantum() != channel.input() {
            return Err(Error::LayoutMismatch(format!(
                "state quantum registers {:?}, channel input {:?}",
                state.quantum().names(),
                channel.input().names()
            )));
        }
        for s in &side_info {
            channel.input().index_of(s)?;
            if channel.output().contains(s) {
                return Err(Error::BadLayout(format!("side-information register `{s}` is also a channel output")));
            }
        }
        Ok(Self { state, channel, side_info })
    }

    /// ρ_{UVBE}: the channel applied to every conditional.
    pub fn output_state(&self) -> Result<CQState> {
        let ch = &self.channel;
        self.state.map_conditionals(ch.output().clone(), |m| Ok(ch.apply(m)))
    }

    /// ρ_S, the defining marginal of the channel state.
    pub fn side_info_marginal(&self) -> Result<CMatrix> {
        Ok(self.state.marginal(&[], &refs(&self.side_info))?.average_state())
    }

    /// Checks Tr_{S'} φ_{S'S} = ρ_S for a supplied reference state whose
    /// registers other than `s_prime` coincide with the side-information layout.
    pub fn check_reference(&self, phi: &DensityMatrix, s_prime: &[&str]) -> Result<()> {
        let keep: Vec<&str> = phi.layout().names().into_iter().filter(|n| !s_prime.contains(n)).collect();
        let (m, l) = partial_trace_op(phi.matrix(), phi.layout(), &keep)?;
        let own = self.state.quantum().restrict(&refs(&self.side_info))?;
        if l.dims() != own.dims() {
            return Err(Error::LayoutMismatch("reference marginal has wrong shape".into()));
        }
        let dev = (m - self.side_info_marginal()?).norm();
        if dev > 1e-9 {
            return Err(Error::BadConditional(format!("encoder marginal differs from reference by {dev:.3e}")));
        }
        Ok(())
    }

    /// State over (U,V; B,E,S) whose one- and two-party marginals are the ones
    /// the rate formulas need: conditionals N(ρ_{AS|uv}) ⊗ ρ_{S|uv}.
    pub fn rate_state(&self) -> Result<CQState> {
        let ch = &self.channel;
        let s = refs(&self.side_info);
        let s_layout = self.state.quantum().restrict(&s)?;
        let quantum = ch.output().concat(&s_layout)?;
        let qin = self.state.quantum().clone();
        self.state.map_conditionals(quantum, |m| {
            let (ms, _) = partial_trace_op(m, &qin, &s)?;
            Ok(kron(&ch.apply(m), &ms))
        })
    }
}

pub fn apply_channel(setup: &SideInfoSetup) -> Result<CQState> {
    setup.output_state()
}
