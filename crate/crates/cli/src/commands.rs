use std::path::Path;

use anyhow::Result;
use ncorlicz::algebra::{apply_function, ElementKind};
use ncorlicz::dsops::{averages, kadison_check, verify_ds};
use ncorlicz::maximal::{buem_witness, convergence_report, measure_nbhd_member, truncation_sequence, uem_witness, yeadon_search};
use ncorlicz::orlicz::{luxemburg_norm, luxemburg_norm_sf, modular, OrliczKind};
use ncorlicz::symfunc::{boyd_estimate, default_boyd_grid, majorizes, singular_value_function};
use ncorlicz::{Check, Error};
use serde_json::json;

use crate::report::{element_json, num, opt, write_csv, write_json, ScenarioReport};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Verify,
    Ergodic,
    Maximal,
    Boyd,
    Norms,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Verify => "verify",
            CommandKind::Ergodic => "ergodic",
            CommandKind::Maximal => "maximal",
            CommandKind::Boyd => "boyd",
            CommandKind::Norms => "norms",
        }
    }
}

pub fn run(cmd: CommandKind, s: &Scenario, out: &Path) -> Result<ScenarioReport> {
    let mut r = ScenarioReport::new(&s.name, s.seed);
    r.report("orlicz", s.phi.label());
    r.report("algebra", s.algebra.dims().iter().zip(s.algebra.weights()).collect::<Vec<_>>());
    if cmd == CommandKind::Boyd {
        boyd(s, out, &mut r)?;
        return Ok(r.finish());
    }
    if cmd == CommandKind::Norms {
        norms(s, out, &mut r)?;
        return Ok(r.finish());
    }
    if let Some(reason) = &s.rejected {
        r.check(Check::flag("operator.construction", false));
        r.report("operator_rejected", reason);
        if cmd != CommandKind::Verify {
            return Ok(r.finish());
        }
    }
    match cmd {
        CommandKind::Verify => verify(s, &mut r)?,
        CommandKind::Ergodic => ergodic(s, out, &mut r)?,
        CommandKind::Maximal => maximal(s, out, &mut r)?,
        CommandKind::Boyd | CommandKind::Norms => unreachable!(),
    }
    Ok(r.finish())
}

fn scaled(v: f64) -> f64 {
    v.abs().max(1.0)
}

fn verify(s: &Scenario, r: &mut ScenarioReport) -> Result<()> {
    let a = &s.algebra;
    let t = &s.operator;
    let phi = &s.phi;
    let cert = verify_ds(t);
    r.report("positivity_notion", &cert.positivity_notion);
    r.prefixed("dsops", cert.checks().into_iter().cloned());
    if !cert.passed() {
        return Ok(());
    }

    let (mut calculus, mut reconstruct, mut mu_identity, mut trace_integral) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut dual_path, mut modular_slack, mut contraction) = (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut kadison, mut avg_growth) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut not_majorized = 0;
    for i in 0..s.samples {
        let x = s.sample(ElementKind::General, i);
        let h = s.sample(ElementKind::Hermitian, s.samples + i);
        let p = s.sample(ElementKind::Positive, 2 * s.samples + i);

        let f = apply_function(a, |u| u + 1.0, &p)?;
        let g = apply_function(a, |u| u * u, &p)?;
        let fg = apply_function(a, |u| (u + 1.0) * u * u, &p)?;
        calculus = calculus.max((&(&f * &g) - &fg).uniform_norm() / scaled(fg.uniform_norm()));
        let sd = a.spectral_decompose(&h)?;
        reconstruct = reconstruct.max((&sd.reconstruct(a) - &h).uniform_norm() / scaled(h.uniform_norm()));

        let mu = singular_value_function(a, &x)?;
        let fx = apply_function(a, |u| phi.eval(u), &x.abs())?;
        let lhs = singular_value_function(a, &fx)?;
        let rhs = mu.map(|v| phi.eval(v));
        mu_identity = mu_identity.max(lhs.sup_distance(&rhs) / scaled(rhs.sup()));
        let tr = a.trace_re(&fx)?;
        trace_integral = trace_integral.max((tr - mu.integrate_composed(|v| phi.eval(v))).abs() / scaled(tr));

        let nx = luxemburg_norm(a, &x, phi)?.value;
        dual_path = dual_path.max((nx - luxemburg_norm_sf(&mu, phi)?.value).abs() / scaled(nx));
        let y = x.scale(0.7 / nx);
        modular_slack = modular_slack.max(modular(a, &y, phi)? - luxemburg_norm(a, &y, phi)?.value);

        let tx = t.apply(&x)?;
        contraction = contraction.max((luxemburg_norm(a, &tx, phi)?.value - nx) / scaled(nx));
        if !majorizes(&mu, &singular_value_function(a, &tx)?) {
            not_majorized += 1;
        }
        kadison = kadison.min(kadison_check(t, &h)? / scaled(h.uniform_norm().powi(2)));
        for (_, avg) in averages(t, &x)?.take(s.horizon.min(64)) {
            avg_growth = avg_growth.max(avg.uniform_norm() - x.uniform_norm() * (1.0 + 1e-12));
        }
    }
    r.check(Check::at_most("algebra.functional_calculus", calculus, 1e-9));
    r.check(Check::at_most("algebra.spectral_reconstruction", reconstruct, 1e-9));
    r.check(Check::at_most("symfunc.mu_phi_identity", mu_identity, 1e-9));
    r.check(Check::at_most("symfunc.trace_integral", trace_integral, 1e-9));
    r.check(Check::at_most("symfunc.majorization_failures", not_majorized as f64, 0.0));
    r.check(Check::flag(
        "orlicz.invariants",
        phi.sampled_invariants(&ncorlicz::orlicz::default_grid()).passed(),
    ));
    r.check(Check::at_most("orlicz.dual_path", dual_path, 1e-8));
    r.check(Check::at_most("orlicz.modular_bound", modular_slack, 1e-9));
    r.check(Check::at_most("dsops.orlicz_contraction", contraction, 1e-8));
    r.check(Check::at_least("dsops.kadison", kadison, -1e-9));
    r.check(Check::at_most("dsops.average_uniform_bound", avg_growth, 0.0));

    let x = s.positive_element();
    let nu = level(s, &x);
    let y = yeadon_search(t, &x, nu, s.horizon)?;
    r.prefixed("maximal.yeadon", y.checks.clone());
    if let Some(ratio) = y.details.get("trace_ratio") {
        r.report("yeadon_trace_ratio", ratio);
    }
    let mu_eps = a.total_trace() / 3.0;
    let mut membership_errors = 0;
    for i in 0..s.samples {
        let z = s.sample(ElementKind::General, 3 * s.samples + i);
        match measure_nbhd_member(a, &z, mu_eps, 0.5 * z.uniform_norm()) {
            Ok(_) => {}
            Err(Error::Consistency(_)) => membership_errors += 1,
            Err(e) => return Err(e.into()),
        }
    }
    r.check(Check::at_most("maximal.membership_witness_failures", membership_errors as f64, 0.0));
    let truncation = truncation_sequence(a, &x, phi, &[1, 2, 4, 8, 16, 64, 256, 1024])?;
    let increases = truncation.windows(2).filter(|w| w[1].1 > w[0].1 * (1.0 + 1e-9) + 1e-12).count();
    r.check(Check::at_most("maximal.truncation_increases", increases as f64, 0.0));
    Ok(())
}

fn level(s: &Scenario, x: &ncorlicz::AlgElement) -> f64 {
    s.params.nu.unwrap_or_else(|| {
        let n = x.uniform_norm();
        if n > 0.0 {
            0.5 * n
        } else {
            1.0
        }
    })
}

fn ergodic(s: &Scenario, out: &Path, r: &mut ScenarioReport) -> Result<()> {
    let rep = match convergence_report(&s.operator, &s.element, &s.phi, s.params.epsilon, s.horizon) {
        Ok(rep) => rep,
        Err(Error::Domain(msg)) => {
            r.check(Check::flag("ergodic.preconditions", false));
            r.report("error", msg);
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    r.prefixed("ergodic", rep.checks.clone());
    let csv_name = format!("ergodic_{}.csv", s.name);
    write_csv(
        &out.join(&csv_name),
        &["n", "sup_norm", "orlicz_norm", "dist_to_limit", "sandwiched_dist"],
        rep.trace.records.iter().map(|rec| {
            vec![
                rec.n.to_string(),
                num(rec.sup_norm),
                opt(rec.orlicz_norm),
                opt(rec.dist_to_limit),
                opt(rec.sandwiched_dist),
            ]
        }),
    )?;
    let json_name = format!("ergodic_{}.json", s.name);
    write_json(
        &out.join(&json_name),
        &json!({
            "scenario": s.name,
            "seed": s.seed,
            "horizon": s.horizon,
            "epsilon": s.params.epsilon,
            "spectral_gap": finite(rep.spectral_gap),
            "rate_fit": rep.rate_fit(),
            "limit": element_json(&rep.limit),
            "trace_complement": rep.trace_complement,
            "sandwiched_tail": rep.sandwiched_tail,
            "one_sided_tail": rep.one_sided_tail,
            "tail_threshold": rep.tail_threshold,
            "two_convex": rep.two_convex,
            "checks": rep.checks,
            "flags": rep.flags,
        }),
    )?;
    if let Some(fit) = rep.rate_fit() {
        r.report("rate_exponent", fit.exponent);
    }
    r.report("flags", &rep.flags);
    r.artifacts.extend([csv_name, json_name]);
    Ok(())
}

/// JSON has no infinity; an absent gap is written as null.
fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn maximal(s: &Scenario, out: &Path, r: &mut ScenarioReport) -> Result<()> {
    let x = s.positive_element();
    let nu = level(s, &x);
    let (eps, delta) = (s.params.epsilon, s.params.delta);
    let y = yeadon_search(&s.operator, &x, nu, s.horizon)?;
    r.prefixed("yeadon", y.checks.clone());
    if let Some(ratio) = y.details.get("trace_ratio") {
        r.report("trace_ratio", ratio);
    }
    let mut doc = json!({
        "scenario": s.name,
        "seed": s.seed,
        "horizon": s.horizon,
        "yeadon": y,
    });
    for (key, result) in [
        ("buem", buem_witness(&s.operator, &s.phi, eps, delta, &x, s.horizon)),
        ("uem", uem_witness(&s.operator, &s.phi, eps, delta, &x, s.horizon)),
    ] {
        match result {
            Ok(w) => {
                r.prefixed(key, w.checks.clone());
                doc[key] = serde_json::to_value(&w)?;
            }
            Err(Error::Domain(msg)) => {
                r.report(&format!("{key}_skipped"), &msg);
                doc[key] = json!({ "skipped": msg });
            }
            Err(e) => return Err(e.into()),
        }
    }
    let name = format!("maximal_{}.json", s.name);
    write_json(&out.join(&name), &doc)?;
    r.artifacts.push(name);
    Ok(())
}

fn boyd(s: &Scenario, out: &Path, r: &mut ScenarioReport) -> Result<()> {
    let b = match boyd_estimate(&s.phi, &default_boyd_grid()) {
        Ok(b) => b,
        Err(Error::Domain(msg)) => {
            r.check(Check::flag("boyd.estimate", false));
            r.report("error", msg);
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    r.check(Check::flag(
        "orlicz.invariants",
        s.phi.sampled_invariants(&ncorlicz::orlicz::default_grid()).passed(),
    ));
    r.report("p_hat", b.p_hat);
    r.report("q_hat", b.q_hat);
    let csv_name = format!("boyd_{}.csv", s.name);
    write_csv(
        &out.join(&csv_name),
        &["s", "dilation_norm_lower", "local_index"],
        b.s_grid
            .iter()
            .zip(&b.dilation_norm_lower)
            .zip(&b.local_index)
            .map(|((&sv, &d), &l)| vec![num(sv), num(d), opt(l)]),
    )?;
    let json_name = format!("boyd_{}.json", s.name);
    write_json(
        &out.join(&json_name),
        &json!({ "scenario": s.name, "orlicz": s.phi, "estimate": b }),
    )?;
    r.artifacts.extend([csv_name, json_name]);
    Ok(())
}

fn norms(s: &Scenario, out: &Path, r: &mut ScenarioReport) -> Result<()> {
    let a = &s.algebra;
    let power = match s.phi.kind() {
        OrliczKind::Power { p } => Some(*p),
        _ => None,
    };
    let mut rows = Vec::with_capacity(s.samples + 1);
    let (mut worst, mut worst_lp) = (0.0f64, 0.0f64);
    let elements = std::iter::once(s.element.clone()).chain((0..s.samples).map(|i| s.sample(s.element_kind, i)));
    for (i, x) in elements.enumerate() {
        let m = luxemburg_norm(a, &x, &s.phi)?.value;
        let f = luxemburg_norm_sf(&singular_value_function(a, &x)?, &s.phi)?.value;
        let disc = (m - f).abs();
        worst = worst.max(disc / scaled(m));
        let lp = power.map(|p| a.lp_norm(&x, p)).transpose()?;
        if let Some(l) = lp {
            worst_lp = worst_lp.max((l - m).abs() / scaled(l));
        }
        rows.push(vec![i.to_string(), num(m), num(f), num(disc), opt(lp)]);
    }
    r.check(Check::at_most("norms.dual_path", worst, 1e-8));
    if power.is_some() {
        r.check(Check::at_most("norms.lp_agreement", worst_lp, 1e-8));
    }
    let name = format!("norms_{}.csv", s.name);
    write_csv(&out.join(&name), &["sample", "matrix_norm", "sf_norm", "discrepancy", "lp_norm"], rows)?;
    r.artifacts.push(name);
    Ok(())
}
