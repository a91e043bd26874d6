use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use dispersive_core::evolve::{
    dichotomy_experiment_with, evolve, evolve_time_dependent, fmt17, stability_bound, Dynamics, EvolutionConfig,
    GrowthOptions, NormHistory,
};
use dispersive_core::frame::{
    corrected_system, frame_coefficients, frame_identities, frame_wellposedness_time_dependent, holonomy_correct,
    third_order_comparison, FrameState,
};
use dispersive_core::periodic::{MatrixCoefficient, PeriodicScalar};
use dispersive_core::symbols::{Symbol, TruncatedField};
use dispersive_core::transforms::{diagonalize, real_gauge, verify_diagonalization, verify_energy_estimate};
use dispersive_core::wellposed::{
    check_complex, check_real, check_real_time_dependent, check_single, complex_image, ComplexSystem, RealSystem,
    SingleEquation, Sign, Verdict,
};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Config, Experiment, MethodName, Snapshot, SystemSpec};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_ILL_POSED: u8 = 2;

/// Everything a command produced. The exit code is derived from `json` only.
#[derive(Debug, Clone)]
pub struct Report {
    pub text: String,
    pub json: Value,
    /// Tabular output for `evolve` and `growth`.
    pub csv: Option<String>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn exit_code(&self) -> u8 {
        match self.json.get("well_posed").and_then(Value::as_bool) {
            Some(false) => EXIT_ILL_POSED,
            _ => EXIT_OK,
        }
    }
}

fn envelope(command: &str, cfg: &Config, body: Value) -> Value {
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "kind": cfg.kind.name(),
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut v, body) {
        dst.extend(src);
    }
    v
}

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report values serialize")
}

/// `[[k, re, im], ...]`, pasteable back into a config.
pub fn scalar_grammar(f: &PeriodicScalar) -> String {
    let parts: Vec<String> = f
        .modes()
        .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
        .map(|(k, c)| format!("[{k}, {:?}, {:?}]", c.re + 0.0, c.im + 0.0))
        .collect();
    format!("[{}]", parts.join(", "))
}

fn write_matrix(out: &mut String, name: &str, m: &MatrixCoefficient) {
    writeln!(out, "[{name}]").unwrap();
    for (i, j, key) in [(0, 0, "m11"), (0, 1, "m12"), (1, 0, "m21"), (1, 1, "m22")] {
        writeln!(out, "{key} = {}", scalar_grammar(m.get(i, j))).unwrap();
    }
}

fn write_verdict(out: &mut String, v: &Verdict) {
    writeln!(out, "{:<16} {:>24} {:>24}  result", "condition", "re", "im").unwrap();
    for r in &v.residuals {
        let pass = if r.value.norm() <= v.tolerance { "pass" } else { "FAIL" };
        writeln!(out, "{:<16} {:>24} {:>24}  {pass}", r.name, fmt17(r.value.re), fmt17(r.value.im)).unwrap();
    }
    writeln!(out, "verdict: {}", verdict_word(v)).unwrap();
}

fn verdict_word(v: &Verdict) -> &'static str {
    if v.well_posed {
        "well-posed"
    } else {
        "ill-posed"
    }
}

/// A single equation as one row of a diagonal system; the other row is the
/// free equation of opposite sign, which satisfies every condition.
pub fn embed_single(eq: &SingleEquation) -> ComplexSystem {
    let z = PeriodicScalar::zero();
    let diag = |f: &PeriodicScalar| match eq.sign {
        Sign::Plus => MatrixCoefficient::diagonal(f.clone(), z.clone()),
        Sign::Minus => MatrixCoefficient::diagonal(z.clone(), f.clone()),
    };
    ComplexSystem { a: diag(&eq.a), b: diag(&eq.b), c: diag(&eq.c), d: diag(&eq.d) }
}

fn frame_system(state: &FrameState) -> RealSystem {
    let fc = frame_coefficients(state);
    corrected_system(&holonomy_correct(&fc, state.theta, state.a), state.a)
}

fn dynamics(spec: &SystemSpec, command: &str) -> Result<Dynamics> {
    Ok(match spec {
        SystemSpec::Complex(s) => Dynamics::Complex(s.clone()),
        SystemSpec::Real(s) => Dynamics::Real(s.clone()),
        SystemSpec::Single(eq) => Dynamics::Complex(embed_single(eq)),
        SystemSpec::Frame(st) => Dynamics::Real(frame_system(st)),
        SystemSpec::RealTimeDependent(_) => bail!("`{command}` needs time-independent coefficients"),
        SystemSpec::Dichotomy(_) => bail!("`{command}` runs on a single system; use `growth` for dichotomy configs"),
    })
}

fn verdict_of(spec: &SystemSpec, tol: f64) -> Result<Verdict> {
    let v = match spec {
        SystemSpec::Complex(s) => check_complex(s),
        SystemSpec::Real(s) => check_real(s)?,
        SystemSpec::Single(eq) => check_single(eq),
        SystemSpec::Frame(st) => frame_wellposedness_time_dependent(st)?,
        SystemSpec::RealTimeDependent(snaps) => {
            let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
            check_real_time_dependent(|t| interpolate(snaps, t), &times)?
        }
        SystemSpec::Dichotomy(_) => unreachable!("handled per series"),
    };
    Ok(v.with_tolerance(tol))
}

pub fn check(cfg: &Config) -> Result<Report> {
    let tol = cfg.experiment.tolerance;
    let mut text = String::new();
    let body = match &cfg.system {
        SystemSpec::Dichotomy(series) => {
            let mut all = true;
            let mut rows = Vec::new();
            for (label, spec) in series {
                let v = verdict_of(spec, tol)?;
                writeln!(text, "series {label}").unwrap();
                write_verdict(&mut text, &v);
                all &= v.well_posed;
                rows.push(json!({ "label": label, "verdict": to_json(&v) }));
            }
            json!({ "well_posed": all, "series": rows })
        }
        spec => {
            let v = verdict_of(spec, tol)?;
            write_verdict(&mut text, &v);
            json!({ "well_posed": v.well_posed, "verdict": to_json(&v) })
        }
    };
    Ok(Report { text, json: envelope("check", cfg, body), csv: None, warnings: vec![] })
}

fn single_json(eq: &SingleEquation) -> Value {
    to_json(eq)
}

fn write_single(out: &mut String, name: &str, eq: &SingleEquation) {
    writeln!(out, "[{name}]").unwrap();
    writeln!(out, "sign = \"{:?}\"", eq.sign).unwrap();
    for (key, f) in [("a", &eq.a), ("b", &eq.b), ("c", &eq.c), ("d", &eq.d)] {
        writeln!(out, "{key} = {}", scalar_grammar(f)).unwrap();
    }
}

pub fn diagonalize_cmd(cfg: &Config) -> Result<Report> {
    let sys = match &cfg.system {
        SystemSpec::Complex(s) => s.clone(),
        SystemSpec::Real(s) => complex_image(s),
        SystemSpec::Single(eq) => embed_single(eq),
        _ => bail!("`diagonalize` needs kind complex, real or single, got {}", cfg.kind.name()),
    };
    let ex = &cfg.experiment;
    let res = diagonalize(&sys, ex.r)?;
    let n = ex.modes.max(4);
    let chk = verify_diagonalization(&sys, &res, n)?;
    let identity = res.lambda1.is_zero() && res.lambda2.is_zero() && res.lambda3.is_zero();
    let v1 = check_single(&res.row1).with_tolerance(ex.tolerance);
    let v2 = check_single(&res.row2).with_tolerance(ex.tolerance);

    let mut text = String::new();
    writeln!(text, "r = {}", res.r).unwrap();
    writeln!(text, "identity transform: {}", if identity { "yes" } else { "no" }).unwrap();
    write_matrix(&mut text, "b1", &res.b1);
    write_matrix(&mut text, "c1", &res.c1);
    write_matrix(&mut text, "c2", &res.c2);
    write_single(&mut text, "row1", &res.row1);
    write_single(&mut text, "row2", &res.row2);
    writeln!(
        text,
        "coupling residual at N = {}: {} (N/2: {}, ratio {})",
        chk.n,
        fmt17(chk.coupling_norm),
        fmt17(chk.coupling_norm_half),
        fmt17(chk.coupling_ratio)
    )
    .unwrap();
    writeln!(text, "row1 {}; row2 {}", verdict_word(&v1), verdict_word(&v2)).unwrap();

    let body = json!({
        "r": res.r,
        "identity": identity,
        "b1": to_json(&res.b1),
        "c1": to_json(&res.c1),
        "c2": to_json(&res.c2),
        "row1": single_json(&res.row1),
        "row2": single_json(&res.row2),
        "row_verdicts": [to_json(&v1), to_json(&v2)],
        "verification": to_json(&chk),
    });
    Ok(Report { text, json: envelope("diagonalize", cfg, body), csv: None, warnings: vec![] })
}

fn energy_ns(modes: usize) -> Vec<usize> {
    let mut ns: Vec<usize> = [modes / 4, modes / 2, modes].into_iter().filter(|&n| n >= 2).collect();
    ns.dedup();
    ns
}

pub fn gauge(cfg: &Config) -> Result<Report> {
    let sys = match &cfg.system {
        SystemSpec::Real(s) => s.clone(),
        SystemSpec::Frame(st) => frame_system(st),
        _ => bail!("`gauge` needs kind real or frame, got {}", cfg.kind.name()),
    };
    let ex = &cfg.experiment;
    let g = real_gauge(&sys, ex.r)?;
    let ns = energy_ns(ex.modes);
    let estimates: Vec<f64> = ns.iter().map(|&n| verify_energy_estimate(&g, n)).collect();

    let mut text = String::new();
    writeln!(text, "r = {}", g.r).unwrap();
    writeln!(text, "psi4 = {}", scalar_grammar(&g.psi4)).unwrap();
    writeln!(text, "psi6 = {}", scalar_grammar(&g.psi6)).unwrap();
    writeln!(text, "mu = {}", scalar_grammar(&g.mu)).unwrap();
    write_matrix(&mut text, "beta4", &g.beta4);
    write_matrix(&mut text, "gamma4", &g.gamma4);
    write_matrix(&mut text, "gamma5", &g.gamma5);
    write_matrix(&mut text, "gamma5_sym", &g.gamma5_sym);
    writeln!(text, "energy estimate").unwrap();
    for (n, e) in ns.iter().zip(&estimates) {
        writeln!(text, "  N = {n:>4}: {}", fmt17(*e)).unwrap();
    }

    let body = json!({
        "r": g.r,
        "psi4": to_json(&g.psi4),
        "psi6": to_json(&g.psi6),
        "mu": to_json(&g.mu),
        "beta4": to_json(&g.beta4),
        "gamma4": to_json(&g.gamma4),
        "gamma5": to_json(&g.gamma5),
        "gamma5_sym": to_json(&g.gamma5_sym),
        "energy_estimate": ns.iter().zip(&estimates).map(|(n, e)| json!({ "n": n, "value": e })).collect::<Vec<_>>(),
    });
    Ok(Report { text, json: envelope("gauge", cfg, body), csv: None, warnings: vec![] })
}

/// Linear interpolation between snapshots, constant outside their range.
pub fn interpolate(snaps: &[Snapshot], t: f64) -> RealSystem {
    let first = &snaps[0];
    if t <= first.t || snaps.len() == 1 {
        return first.system.clone();
    }
    for w in snaps.windows(2) {
        let (s0, s1) = (&w[0], &w[1]);
        if t <= s1.t {
            let u = (t - s0.t) / (s1.t - s0.t);
            let blend = |a: &MatrixCoefficient, b: &MatrixCoefficient| &a.scale_re(1.0 - u) + &b.scale_re(u);
            return RealSystem {
                beta: blend(&s0.system.beta, &s1.system.beta),
                gamma: blend(&s0.system.gamma, &s1.system.gamma),
                principal_scale: s0.system.principal_scale * (1.0 - u) + s1.system.principal_scale * u,
            };
        }
    }
    snaps[snaps.len() - 1].system.clone()
}

fn symbol_of(d: &Dynamics) -> Symbol {
    match d {
        Dynamics::Complex(s) => s.symbol(),
        Dynamics::Real(s) => s.operator_symbol(),
        Dynamics::Operator(q) => q.clone(),
    }
}

fn step_config(ex: &Experiment, bound: f64) -> EvolutionConfig {
    let dt = ex.dt.unwrap_or(0.5 * bound).min(ex.t_final.max(f64::MIN_POSITIVE));
    EvolutionConfig { samples: ex.samples, ..EvolutionConfig::step(ex.modes, ex.t_final, dt) }
}

fn history_csv(h: &NormHistory) -> String {
    let mut out = String::from("t,norm\n");
    for (t, v) in h.times.iter().zip(&h.norms) {
        writeln!(out, "{},{}", fmt17(*t), fmt17(*v)).unwrap();
    }
    out
}

pub fn evolve_cmd(cfg: &Config) -> Result<Report> {
    let ex = &cfg.experiment;
    let u0 = TruncatedField::from_components(ex.modes, &cfg.initial.u1, &cfg.initial.u2);
    let hist = match &cfg.system {
        SystemSpec::RealTimeDependent(snaps) => {
            if ex.method == MethodName::Expm {
                bail!("time-dependent coefficients need --method step");
            }
            let bound = snaps
                .iter()
                .map(|s| stability_bound(&s.system.operator_symbol(), ex.modes))
                .fold(f64::INFINITY, f64::min);
            evolve_time_dependent(|t| interpolate(snaps, t), &u0, &step_config(ex, bound))?
        }
        spec => {
            let d = dynamics(spec, "evolve")?;
            let ec = match ex.method {
                MethodName::Expm => EvolutionConfig { samples: ex.samples, ..EvolutionConfig::expm(ex.modes, ex.t_final) },
                MethodName::Step => step_config(ex, stability_bound(&symbol_of(&d), ex.modes)),
            };
            evolve(&d, &u0, &ec)?
        }
    };
    let csv = history_csv(&hist);
    let n0 = hist.norms[0];
    let peak = hist.norms.iter().cloned().fold(0.0, f64::max);
    let last = *hist.norms.last().unwrap();
    let mut text = csv.clone();
    writeln!(text, "initial norm {}, final {}, peak ratio {}", fmt17(n0), fmt17(last), fmt17(peak / n0)).unwrap();
    let body = json!({
        "modes": ex.modes,
        "t_final": ex.t_final,
        "method": ex.method,
        "times": hist.times,
        "norms": hist.norms,
    });
    Ok(Report { text, json: envelope("evolve", cfg, body), csv: Some(csv), warnings: vec![] })
}

pub fn growth(cfg: &Config) -> Result<Report> {
    let ex = &cfg.experiment;
    let ns = &ex.ladder;
    let opts = GrowthOptions::default();
    let labeled: Vec<(String, Dynamics)> = match &cfg.system {
        SystemSpec::Dichotomy(series) => series
            .iter()
            .map(|(l, s)| Ok((l.clone(), dynamics(s, "growth")?)))
            .collect::<Result<_>>()?,
        spec => vec![(cfg.kind.name().to_string(), dynamics(spec, "growth")?)],
    };
    let refs: Vec<(&str, &Dynamics)> = labeled.iter().map(|(l, d)| (l.as_str(), d)).collect();
    let report = dichotomy_experiment_with(&refs, ns, ex.t_final, opts)?;

    let csv = report.to_csv();
    let mut text = csv.clone();
    let mut warnings = Vec::new();
    let mut series = Vec::new();
    for s in &report.series {
        if let Some(m) = s.study.overflow_message() {
            warnings.push(format!("{}: {m}", s.label));
        }
        let verdict = s.verdict.as_ref().map(|v| v.clone().with_tolerance(ex.tolerance));
        writeln!(
            text,
            "# {}: {}, conditions {}",
            s.label,
            s.study.model.label(),
            verdict.as_ref().map_or("n/a", verdict_word)
        )
        .unwrap();
        series.push(json!({
            "label": s.label,
            "study": to_json(&s.study),
            "verdict": verdict.as_ref().map(to_json),
            "consistent": s.consistent,
        }));
    }
    writeln!(text, "{}", report.consistency_line()).unwrap();
    let body = json!({ "consistent": report.consistent, "series": series, "warnings": warnings });
    Ok(Report { text, json: envelope("growth", cfg, body), csv: Some(csv), warnings })
}

pub fn frame(cfg: &Config) -> Result<Report> {
    let SystemSpec::Frame(state) = &cfg.system else {
        bail!("`frame` needs kind frame, got {}", cfg.kind.name());
    };
    let ex = &cfg.experiment;
    let fc = frame_coefficients(state);
    let hc = holonomy_correct(&fc, state.theta, state.a);
    let ids = frame_identities(state, &fc, &hc);
    let v = frame_wellposedness_time_dependent(state).context("frame conditions")?.with_tolerance(ex.tolerance);
    let (with, without) = third_order_comparison(&hc, state.a, ex.modes, ex.t_final);

    let mut text = String::new();
    write_matrix(&mut text, "beta_hat", &fc.beta_hat);
    write_matrix(&mut text, "gamma_hat", &fc.gamma_hat);
    writeln!(text, "theta = {}", hc.theta).unwrap();
    writeln!(text, "rotation exact: {}", if hc.exact { "yes" } else { "no" }).unwrap();
    write_matrix(&mut text, "beta_hat1", &hc.beta_hat1);
    write_matrix(&mut text, "gamma_hat1", &hc.gamma_hat1);
    writeln!(text, "third_order_coeff = {}", hc.third_order_coeff + 0.0).unwrap();
    writeln!(text, "identities").unwrap();
    writeln!(text, "  tr beta_hat              {}", fmt17(ids.trace_beta)).unwrap();
    writeln!(text, "  divergence identity      {}", fmt17(ids.divergence_identity)).unwrap();
    writeln!(text, "  skew integral            {}", fmt17(ids.skew_integral)).unwrap();
    writeln!(text, "  -(a/2) int K'(xi^2+eta^2) {}", fmt17(ids.skew_integral_expected)).unwrap();
    writeln!(text, "  holonomy tr beta         {}", fmt17(ids.holonomy_trace_beta)).unwrap();
    writeln!(text, "  holonomy tr J gamma      {}", fmt17(ids.holonomy_trace_j_gamma)).unwrap();
    writeln!(
        text,
        "propagator norm at N = {}, t = {}: with third-order term {}, without {}",
        ex.modes,
        ex.t_final,
        fmt17(with),
        fmt17(without)
    )
    .unwrap();
    write_verdict(&mut text, &v);

    let body = json!({
        "well_posed": v.well_posed,
        "beta_hat": to_json(&fc.beta_hat),
        "gamma_hat": to_json(&fc.gamma_hat),
        "holonomy": to_json(&hc),
        "third_order_coeff": hc.third_order_coeff + 0.0,
        "identities": to_json(&ids),
        "third_order_norms": { "modes": ex.modes, "t": ex.t_final, "with": with, "without": without },
        "verdict": to_json(&v),
    });
    Ok(Report { text, json: envelope("frame", cfg, body), csv: None, warnings: vec![] })
}
