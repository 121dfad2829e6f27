use gpwlab_core::codebook::{
    conditional_resolvability_experiment, decode_experiment, expurgation_check, resolvability_experiment, secrecy_experiment, DecodeContext, TrialResult,
};
use gpwlab_core::cq::Roles;
use gpwlab_core::exponents::{exponents_from, optimize_alpha, single_shot_bounds, Objective, BETA};
use gpwlab_core::hyptest::test_bounds_check;
use gpwlab_core::rates::{allocate_rates, region_equivalence, rate_point, BinaryGpWiretap};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Command, LoadedConfig, ResolveMode};
use crate::error::{CliError, CliResult};
use crate::input::{load_setup, Loaded};
use crate::output::{to_value, Cell, Table};

/// What a command produces: the `result` object of the JSON summary and the CSV table.
#[derive(Debug, Clone)]
pub struct Report {
    pub result: Value,
    pub table: Table,
}

const DEFAULT_ALPHAS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const DEFAULT_TRIALS: usize = 200;
const DEFAULT_STEP: f64 = 0.02;

pub fn execute(cmd: Command, cfg: &LoadedConfig, seed: u64) -> CliResult<Report> {
    cfg.config.validate(cmd)?;
    match cmd {
        Command::Rate => rate(cfg),
        Command::Exponent => exponent(cfg),
        Command::Hyptest => hyptest(cfg),
        Command::Resolve => resolve(cfg, seed),
        Command::Decode => decode(cfg, seed),
        Command::Secrecy => secrecy(cfg, seed),
        Command::LemmaLa => equivalence(cfg),
    }
}

fn load(cfg: &LoadedConfig) -> CliResult<Loaded> {
    load_setup(&cfg.input_path()?, cfg.config.roles.as_ref())
}

fn names(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn rate(cfg: &LoadedConfig) -> CliResult<Report> {
    let l = load(cfg)?;
    let rp = rate_point(&l.state, &l.roles)?;
    let alloc = match cfg.config.epsilons {
        Some([a, b, c]) => Some(allocate_rates(&rp.table, a, b, c)?),
        None => None,
    };
    let mut t = Table::new(&["quantity", "value"]);
    t.push(vec!["R_a".into(), rp.r_a.into()]);
    t.push(vec!["R_alt".into(), rp.r_alt.into()]);
    t.push(vec!["I[V;B|U]-I[V;E|U]".into(), rp.components[0].into()]);
    t.push(vec!["I[UV;B]-I[UV;S]".into(), rp.components[1].into()]);
    t.push(vec!["I[UV;B]-I[U;S]-I[V;E|U]".into(), rp.components[2].into()]);
    if let Value::Object(m) = to_value(&rp.table)? {
        for (k, v) in m {
            t.push(vec![Cell::Text(k), v.as_f64().unwrap_or(f64::NAN).into()]);
        }
    }
    t.push(vec!["s2_member".into(), rp.s2_member.into()]);
    Ok(Report { result: json!({ "rate_point": to_value(&rp)?, "allocation": to_value(&alloc)? }), table: t })
}

fn exponent(cfg: &LoadedConfig) -> CliResult<Report> {
    let l = load(cfg)?;
    let alloc = cfg.config.rates.unwrap().allocation()?;
    let tol = cfg.config.cluster_tol();
    let alphas = cfg.config.alpha_list(&DEFAULT_ALPHAS);
    let rows = alphas
        .par_iter()
        .map(|&a| {
            let rep = single_shot_bounds(&l.state, &l.roles, &alloc, a, tol)?;
            let asym = exponents_from(&rep.quantities, &alloc);
            Ok((rep, asym))
        })
        .collect::<gpwlab_core::Result<Vec<_>>>()?;
    let best_error = optimize_alpha(&l.state, &l.roles, &alloc, Objective::Error)?;
    let best_secrecy = optimize_alpha(&l.state, &l.roles, &alloc, Objective::Secrecy)?;
    let mut t = Table::new(&[
        "alpha",
        "error_bound",
        "secrecy_bound_sq",
        "average_error_bound",
        "average_secrecy_bound_sq",
        "error_exponent",
        "secrecy_exponent",
        "order_below_half",
    ]);
    let mut records = Vec::new();
    for (rep, asym) in &rows {
        t.push(vec![
            rep.alpha.into(),
            rep.error_bound.into(),
            rep.secrecy_bound_sq.into(),
            rep.average_error_bound.into(),
            rep.average_secrecy_bound_sq.into(),
            asym.error_exp.into(),
            asym.secrecy_exp.into(),
            asym.order_below_half.into(),
        ]);
        records.push(json!({ "single_shot": to_value(rep)?, "asymptotic": to_value(asym)? }));
    }
    Ok(Report {
        result: json!({
            "rates": to_value(&alloc)?,
            "records": records,
            "best_error_exponent": to_value(&best_error)?,
            "best_secrecy_exponent": to_value(&best_secrecy)?,
            "expurgation_beta": BETA,
        }),
        table: t,
    })
}

fn hyptest(cfg: &LoadedConfig) -> CliResult<Report> {
    let l = load(cfg)?;
    let c = &cfg.config;
    let (m1, m2) = match (c.m1, c.m2, c.rates) {
        (Some(a), Some(b), _) => (a, b),
        (_, _, Some(r)) => ((r.big_r + r.r1 + r.r).exp2(), (r.big_r + r.r1).exp2()),
        _ => unreachable!("checked by validate"),
    };
    let r = &l.roles;
    let rep = test_bounds_check(&l.state, &names(&r.u), &names(&r.v), &names(&r.b), m1, m2, &c.alpha_list(&DEFAULT_ALPHAS), c.cluster_tol())?;
    let mut t = Table::new(&[
        "alpha", "d_product", "i_conditional", "i_fixed_point", "fixed_point_converged", "rhs_1", "rhs_2", "rhs_3", "rhs_4", "slack_1", "slack_2", "slack_3",
        "slack_4", "holds",
    ]);
    for row in &rep.rows {
        let mut cells: Vec<Cell> = vec![row.alpha.into(), row.d_product.into(), row.i_conditional.into(), row.i_fixed_point.into(), row.fixed_point_converged.into()];
        cells.extend(row.rhs.iter().map(|&x| Cell::from(x)));
        cells.extend(row.slack.iter().map(|&x| Cell::from(x)));
        cells.push(row.holds.into());
        t.push(cells);
    }
    Ok(Report { result: json!({ "report": to_value(&rep)? }), table: t })
}

fn summary(r: &TrialResult) -> Value {
    json!({
        "quantity": r.quantity,
        "trials": r.trials,
        "empirical_mean": r.empirical_mean,
        "std_error": r.std_error,
        "half_width": r.half_width,
        "analytic_bound": r.analytic_bound,
        "pass": r.pass,
    })
}

fn trial_table(r: &TrialResult) -> Table {
    let mut headers = vec!["trial".to_string(), r.quantity.clone()];
    headers.extend(r.extra_columns.iter().map(|(n, _)| n.clone()));
    let mut t = Table { headers, rows: Vec::new() };
    for (i, v) in r.per_trial.iter().enumerate() {
        let mut row = vec![Cell::from(i), Cell::from(*v)];
        row.extend(r.extra_columns.iter().map(|(_, col)| Cell::from(col[i])));
        t.push(row);
    }
    t
}

fn resolve(cfg: &LoadedConfig, seed: u64) -> CliResult<Report> {
    let l = load(cfg)?;
    let c = &cfg.config;
    let rates = c.rates.unwrap().code_rates()?;
    let mode = c.mode.unwrap_or_default();
    let alpha = c.alpha.unwrap_or(0.5);
    let trials = c.trials.unwrap_or(DEFAULT_TRIALS);
    let r = &l.roles;
    let target = c.target.clone().unwrap_or_else(|| match mode {
        ResolveMode::Bivariate => r.s.clone(),
        ResolveMode::Conditional => r.e.clone(),
    });
    if target.iter().any(|n| !l.state.quantum().contains(n)) {
        return Err(CliError::schema(format!("target {target:?} is not a set of quantum registers of the state")));
    }
    let (u, v, x) = (names(&r.u), names(&r.v), names(&target));
    let res = match mode {
        ResolveMode::Bivariate => resolvability_experiment(&l.state, &u, &v, &x, rates.r, rates.big_r, alpha, trials, seed, c.cluster_tol())?,
        ResolveMode::Conditional => conditional_resolvability_experiment(&l.state, &u, &v, &x, rates.r1, alpha, trials, seed, c.cluster_tol())?,
    };
    let mode_name = match mode {
        ResolveMode::Bivariate => "bivariate",
        ResolveMode::Conditional => "conditional",
    };
    Ok(Report {
        result: json!({ "summary": summary(&res), "mode": mode_name, "alpha": alpha, "rates": to_value(&rates)?, "target": target }),
        table: trial_table(&res),
    })
}

fn context(cfg: &LoadedConfig) -> CliResult<DecodeContext> {
    let l = load(cfg)?;
    let rates = cfg.config.rates.unwrap().code_rates()?;
    Ok(DecodeContext::from_rate_state(l.state, &l.roles, rates, cfg.config.cluster_tol())?)
}

fn decode(cfg: &LoadedConfig, seed: u64) -> CliResult<Report> {
    let ctx = context(cfg)?;
    let trials = cfg.config.trials.unwrap_or(DEFAULT_TRIALS);
    let batch = decode_experiment(&ctx, trials, seed, cfg.config.cluster_tol())?;
    let mut t = trial_table(&batch.result);
    t.headers.push("povm_valid".into());
    for (row, o) in t.rows.iter_mut().zip(&batch.outcomes) {
        row.push(o.povm_valid.into());
    }
    let m1: f64 = batch.outcomes.iter().map(|o| o.total_m1).sum::<f64>() / batch.outcomes.len() as f64;
    Ok(Report {
        result: json!({
            "summary": summary(&batch.result),
            "bound_alpha": batch.bound_alpha,
            "all_povms_valid": batch.all_povms_valid,
            "mean_total_first_message": m1,
            "rates": to_value(&ctx.rates)?,
            "test_defect": ctx.tests.defect()?,
        }),
        table: t,
    })
}

fn secrecy(cfg: &LoadedConfig, seed: u64) -> CliResult<Report> {
    let ctx = context(cfg)?;
    let c = &cfg.config;
    let trials = c.trials.unwrap_or(DEFAULT_TRIALS);
    let sec = secrecy_experiment(&ctx, trials, seed, c.cluster_tol())?;
    // the same seed gives the same codebooks, so the pairs line up
    let dec = decode_experiment(&ctx, trials, seed, c.cluster_tol())?;
    let totals: Vec<f64> = dec.outcomes.iter().map(|o| o.total).collect();
    let exp = expurgation_check(&totals, &sec.distances, c.beta.unwrap_or(BETA))?;
    let mut t = trial_table(&sec.result);
    t.headers.push("decode_total".into());
    for (row, e) in t.rows.iter_mut().zip(&totals) {
        row.push((*e).into());
    }
    Ok(Report {
        result: json!({
            "summary": summary(&sec.result),
            "bound_alpha": sec.bound_alpha,
            "expurgation": to_value(&exp)?,
            "rates": to_value(&ctx.rates)?,
        }),
        table: t,
    })
}

fn equivalence(cfg: &LoadedConfig) -> CliResult<Report> {
    let c = &cfg.config;
    let f = c.family.unwrap();
    let fam = BinaryGpWiretap { p_s: f.p_s, noise_b: f.noise_b, noise_e: f.noise_e };
    let step = c.step.unwrap_or(DEFAULT_STEP);
    let samples = fam.grid(step)?;
    let roles = Roles::default();
    let report = region_equivalence(&samples, &roles)?;
    let points = samples.par_iter().map(|s| rate_point(&s.state, &roles)).collect::<gpwlab_core::Result<Vec<_>>>()?;
    let mut t = Table::new(&["a", "b", "R_a", "R_alt", "s2_member"]);
    for (s, p) in samples.iter().zip(&points) {
        t.push(vec![s.params[0].into(), s.params[1].into(), p.r_a.into(), p.r_alt.into(), p.s2_member.into()]);
    }
    Ok(Report {
        result: json!({
            "report": to_value(&report)?,
            "family": {"p_s": f.p_s, "noise_b": f.noise_b, "noise_e": f.noise_e},
            "step": step,
        }),
        table: t,
    })
}
