//! End-to-end acceptance checks. Each check prints one PASS/FAIL line;
//! the test fails if any check fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use gpwlab_core::cq::{CQState, QuantumChannel, Roles};
use gpwlab_core::divergence::{cmi_objective, product_of_marginals, renyi_cond_mutual_info, sandwiched_renyi_op};
use gpwlab_core::hyptest::{test_bounds_check, single_system_comparison};
use gpwlab_core::pinching::{PinchingMap, DEFAULT_CLUSTER_TOL};
use gpwlab_core::qmat::{c, diag, identity, kron, min_eigenvalue, CMatrix, RegisterLayout};
use gpwlab_core::random::{random_density, random_diagonal_density, random_kraus, random_probability};
use gpwlab_core::rates::{special_case_rate, Reduction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn layout(regs: &[(&str, usize)]) -> RegisterLayout {
    RegisterLayout::new(regs.iter().map(|(n, d)| (n.to_string(), *d))).unwrap()
}

fn random_cq(rng: &mut ChaCha8Rng) -> CQState {
    let conds = (0..4).map(|_| Some(random_density(rng, 2, 2))).collect();
    CQState::new(layout(&[("U", 2), ("V", 2)]), random_probability(rng, 4), conds, layout(&[("B", 2)])).unwrap()
}

/// Runs the binary on a shipped config; returns (exit code, summary, csv bytes, elapsed).
fn run_cli(cmd: &str, config: &str, out: &Path, threads: usize) -> (i32, Value, Vec<u8>, Duration) {
    let t0 = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_gpwlab"))
        .args([cmd, "--config"])
        .arg(fixtures().join(config))
        .arg("--out")
        .arg(out)
        .args(["--threads", &threads.to_string()])
        .env_remove("GPWLAB_THREADS")
        .output()
        .expect("binary runs");
    let elapsed = t0.elapsed();
    let code = status.status.code().unwrap_or(-1);
    if code != 0 {
        return (code, Value::Null, Vec::new(), elapsed);
    }
    let json = std::fs::read_to_string(out.join(format!("{cmd}.json"))).unwrap();
    let csv = std::fs::read(out.join(format!("{cmd}.csv"))).unwrap();
    (code, serde_json::from_str(&json).unwrap(), csv, elapsed)
}

fn classical_renyi(p: &[f64], q: &[f64], t: f64) -> f64 {
    let s: f64 = p.iter().zip(q).map(|(a, b)| a.powf(t) * b.powf(1.0 - t)).sum();
    s.log2() / (t - 1.0)
}

fn c01_classical_divergence() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for t in [0.5, 0.75, 1.5, 2.0] {
        for _ in 0..200 {
            let r = random_diagonal_density(&mut rng, 4);
            let s = random_diagonal_density(&mut rng, 4);
            let p: Vec<f64> = (0..4).map(|i| r[(i, i)].re).collect();
            let q: Vec<f64> = (0..4).map(|i| s[(i, i)].re).collect();
            let d = sandwiched_renyi_op(&r, &s, t).unwrap();
            worst = worst.max((d - classical_renyi(&p, &q, t)).abs());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(worst <= 1e-10 && secs < 10.0, format!("max |err| {worst:.2e}, {secs:.2} s"))
}

fn c02_data_processing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = f64::INFINITY;
    for _ in 0..500 {
        let r = random_density(&mut rng, 2, 2);
        let s = random_density(&mut rng, 2, 2);
        let kraus = random_kraus(&mut rng, 2, 2, 2);
        let ch = QuantumChannel::new(kraus, layout(&[("A", 2)]), layout(&[("B", 2)])).unwrap();
        let (nr, ns) = (ch.apply(&r), ch.apply(&s));
        for t in [0.6, 2.0] {
            let slack = sandwiched_renyi_op(&r, &s, t).unwrap() - sandwiched_renyi_op(&nr, &ns, t).unwrap();
            worst = worst.min(slack);
        }
    }
    outcome(worst >= -1e-8, format!("min slack {worst:.2e}"))
}

fn c03_pinching_inequality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = f64::INFINITY;
    for _ in 0..500 {
        let r = random_density(&mut rng, 3, 3);
        let s = random_density(&mut rng, 3, 3);
        let e = PinchingMap::from_operator(&s, DEFAULT_CLUSTER_TOL).unwrap();
        let v = e.len() as f64;
        let gap = e.apply(&r) * c(v, 0.0) - &r;
        worst = worst.min(min_eigenvalue(&gap).unwrap());
    }
    outcome(worst >= -1e-9, format!("min eigenvalue {worst:.2e}"))
}

fn c04_fixed_point() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let orders = [0.6, 0.75, 1.5, 2.0];
    let (mut worst, mut converged) = (f64::INFINITY, 0);
    for k in 0..100 {
        let s = random_cq(&mut rng);
        let t = orders[k % orders.len()];
        let res = renyi_cond_mutual_info(&s, &["V"], &["B"], &["U"], t).unwrap();
        converged += res.converged as usize;
        for _ in 0..100 {
            let sigma: Vec<CMatrix> = (0..2).map(|_| random_density(&mut rng, 2, 2)).collect();
            let other = cmi_objective(&s, &["V"], &["B"], &["U"], &sigma, t).unwrap();
            worst = worst.min(other - res.value);
        }
    }
    outcome(worst >= -1e-9 && converged >= 99, format!("min margin {worst:.2e}, converged {converged}/100"))
}

fn c05_additivity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let s = random_cq(&mut rng);
        let s2 = s.with_suffix("1").tensor(&s.with_suffix("2")).unwrap();
        for t in [0.75, 1.5] {
            let one = renyi_cond_mutual_info(&s, &["V"], &["B"], &["U"], t).unwrap().value;
            let two = renyi_cond_mutual_info(&s2, &["V1", "V2"], &["B1", "B2"], &["U1", "U2"], t).unwrap().value;
            worst = worst.max((two - 2.0 * one).abs());
        }
    }
    outcome(worst <= 1e-7, format!("max |I(ρ⊗ρ) − 2I(ρ)| {worst:.2e}"))
}

fn c06_hypothesis_tests() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let alphas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let (mut min_slack, mut failures, mut petz_failures) = (f64::INFINITY, 0, 0);
    for _ in 0..200 {
        let s = random_cq(&mut rng);
        let m1 = (rng.random::<f64>() * 4.0 - 1.0).exp2();
        let m2 = (rng.random::<f64>() * 4.0 - 1.0).exp2();
        let rep = test_bounds_check(&s, &["U"], &["V"], &["B"], m1, m2, &alphas, DEFAULT_CLUSTER_TOL).unwrap();
        failures += (!rep.all_hold) as usize;
        for row in &rep.rows {
            min_slack = row.slack.iter().fold(min_slack, |a, &b| a.min(b));
        }
        let rho = s.densify().into_matrix();
        let sigma = product_of_marginals(&s, &["U", "V"], &["B"]).unwrap().densify().into_matrix();
        let a = alphas[rng.random_range(0..alphas.len())];
        let cmp = single_system_comparison(&rho, &sigma, m1, a, DEFAULT_CLUSTER_TOL).unwrap();
        petz_failures += (!cmp.petz_dominates) as usize;
    }
    outcome(failures == 0 && petz_failures == 0, format!("min slack {min_slack:.2e}, instances failing {failures}, Petz-order failures {petz_failures}"))
}

fn c07_resolvability(out: &Path) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, cfg) in [("bivariate", "resolve.json"), ("conditional", "resolve-conditional.json")] {
        let dir = out.join(name);
        let (code, v, _, t) = run_cli("resolve", cfg, &dir, 4);
        if code != 0 {
            return outcome(false, format!("{name}: exit {code}"));
        }
        let s = &v["result"]["summary"];
        let ok = s["pass"] == true && s["trials"].as_u64().unwrap() >= 200 && t.as_secs() < 120;
        pass &= ok;
        parts.push(format!(
            "{name}: mean {:.5} ± {:.1e} vs bound {:.5} ({:.1} s)",
            s["empirical_mean"].as_f64().unwrap(),
            s["half_width"].as_f64().unwrap(),
            s["analytic_bound"].as_f64().unwrap(),
            t.as_secs_f64()
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c08_decoder(out: &Path) -> Outcome {
    let (code, v, _, _) = run_cli("decode", "decode.json", &out.join("decode"), 4);
    if code != 0 {
        return outcome(false, format!("exit {code}"));
    }
    let r = &v["result"];
    let s = &r["summary"];
    let pass = s["pass"] == true && r["all_povms_valid"] == true && s["trials"].as_u64().unwrap() >= 100;
    outcome(
        pass,
        format!(
            "mean {:.5} ± {:.1e} vs bound {:.3}, POVMs valid: {}",
            s["empirical_mean"].as_f64().unwrap(),
            s["half_width"].as_f64().unwrap(),
            s["analytic_bound"].as_f64().unwrap(),
            r["all_povms_valid"]
        ),
    )
}

fn c09_expurgation(out: &Path) -> Outcome {
    let (code, v, _, _) = run_cli("secrecy", "secrecy.json", &out.join("secrecy"), 4);
    if code != 0 {
        return outcome(false, format!("exit {code}"));
    }
    let e = &v["result"]["expurgation"];
    let pass = e["pass"] == true && (e["threshold"].as_f64().unwrap() - 1.0 / 21.0).abs() < 1e-15;
    outcome(pass, format!("fraction {} ({} of {}) vs 1/21", e["fraction"], e["good"], e["total"]))
}

fn c10_equivalence(out: &Path) -> Outcome {
    let (code, v, _, t) = run_cli("lemma-la", "lemma-la.json", &out.join("lemma-la"), 4);
    if code != 0 {
        return outcome(false, format!("exit {code}"));
    }
    let r = &v["result"]["report"];
    let gap = r["gap"].as_f64().unwrap();
    let checks = r["erasure_checks"].as_array().unwrap().len();
    let pass = v["result"]["step"].as_f64() == Some(0.02) && gap.abs() <= 1e-3 && r["checks_hold"] == true && t.as_secs() < 300;
    outcome(pass, format!("gap {gap:.2e}, {checks} erasure checks hold: {}, {:.1} s", r["checks_hold"], t.as_secs_f64()))
}

fn ensemble(states: Vec<CMatrix>, pmf: Vec<f64>) -> CQState {
    let d = states[0].nrows();
    CQState::new(layout(&[("X", states.len())]), pmf, states.into_iter().map(Some).collect(), layout(&[("A", d)])).unwrap()
}

fn h2(p: f64) -> f64 {
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

fn c11_reductions() -> Outcome {
    let roles = Roles { u: vec![], v: vec!["X".into()], b: vec!["B".into()], e: vec!["E".into()], s: vec![] };
    let basis = || vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])];

    let id = QuantumChannel::identity(layout(&[("A", 2)]), layout(&[("B", 2)])).unwrap();
    let bit = special_case_rate(Reduction::PointToPoint, &id, &[ensemble(basis(), vec![0.5, 0.5])], &roles, &[], 1).unwrap().value;

    // B and E both receive the same noisy copy
    let w: Vec<Vec<f64>> = (0..2).map(|x| (0..4).map(|y| if y == x * 3 { 0.9 } else if y == (1 - x) * 3 { 0.1 } else { 0.0 }).collect()).collect();
    let copy = QuantumChannel::classical(&w, layout(&[("A", 2)]), layout(&[("B", 2), ("E", 2)])).unwrap();
    let fam: Vec<CQState> = [0.2, 0.5, 0.7].iter().map(|&p| ensemble(basis(), vec![p, 1.0 - p])).collect();
    let wiretap = special_case_rate(Reduction::Wiretap, &copy, &fam, &roles, &[], 1).unwrap().value;

    let p: f64 = 0.15;
    let deph = QuantumChannel::new(vec![identity(2) * c((1.0 - p).sqrt(), 0.0), diag(&[1.0, -1.0]) * c(p.sqrt(), 0.0)], layout(&[("A", 2)]), layout(&[("B", 2)])).unwrap();
    let plus = CMatrix::from_element(2, 2, c(0.5, 0.0));
    let minus = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(-0.5, 0.0), c(-0.5, 0.0), c(0.5, 0.0)]);
    let chi = special_case_rate(Reduction::PointToPoint, &deph, &[ensemble(vec![plus, minus], vec![0.5, 0.5])], &roles, &[], 1).unwrap().value;
    let oracle = 1.0 - h2(p);

    let pass = bit == 1.0 && wiretap.abs() <= 1e-10 && (chi - oracle).abs() <= 1e-9;
    outcome(pass, format!("noiseless bit {bit}, degraded wiretap {wiretap:.1e}, dephasing |χ − (1 − h(p))| {:.1e}", (chi - oracle).abs()))
}

fn c12_component_counts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(112);
    let mut worst = (0usize, 0usize);
    let mut pass = true;
    for _ in 0..20 {
        let rho = random_density(&mut rng, 2, 2);
        let mut power = rho.clone();
        for n in 1..=3u32 {
            if n > 1 {
                power = kron(&power, &rho);
            }
            let v1 = PinchingMap::from_operator(&power, DEFAULT_CLUSTER_TOL).unwrap().len();
            let bound = (n as usize + 1).pow(2 - 1);
            pass &= v1 <= bound;
            if n == 3 {
                worst = worst.max((v1, bound));
            }
        }
    }
    outcome(pass, format!("n = 3: v1 = {} ≤ {}", worst.0, worst.1))
}

fn c13_determinism(out: &Path) -> Outcome {
    let runs = [
        ("rate", "rate.json"),
        ("exponent", "exponent.json"),
        ("hyptest", "hyptest.json"),
        ("resolve", "resolve.json"),
        ("decode", "decode.json"),
        ("secrecy", "secrecy.json"),
        ("lemma-la", "lemma-la.json"),
    ];
    let mut differing = Vec::new();
    for (cmd, cfg) in runs {
        let (c1, _, a, _) = run_cli(cmd, cfg, &out.join(format!("det-{cmd}-1")), 1);
        let (c3, _, b, _) = run_cli(cmd, cfg, &out.join(format!("det-{cmd}-3")), 3);
        if c1 != 0 || c3 != 0 || a != b || a.is_empty() {
            differing.push(cmd);
        }
    }
    outcome(differing.is_empty(), if differing.is_empty() { "7 commands byte-identical at 1 and 3 threads".to_string() } else { format!("differs: {differing:?}") })
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let checks: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("classical Rényi agreement", Box::new(c01_classical_divergence)),
        ("data processing", Box::new(c02_data_processing)),
        ("pinching inequality", Box::new(c03_pinching_inequality)),
        ("fixed-point minimizer", Box::new(c04_fixed_point)),
        ("two-copy additivity", Box::new(c05_additivity)),
        ("pinched test bounds", Box::new(c06_hypothesis_tests)),
        ("resolvability Monte Carlo", Box::new(|| c07_resolvability(out))),
        ("square-root decoder", Box::new(|| c08_decoder(out))),
        ("expurgation", Box::new(|| c09_expurgation(out))),
        ("rate-region equivalence", Box::new(|| c10_equivalence(out))),
        ("special-case reductions", Box::new(c11_reductions)),
        ("i.i.d. component counts", Box::new(c12_component_counts)),
        ("seeded determinism", Box::new(|| c13_determinism(out))),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in checks.iter().enumerate() {
        let o = check();
        println!("criterion {:>2} {:<28} {}  {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
