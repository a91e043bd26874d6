//! Fourier–Galerkin evolution and truncated-propagator growth.
//!
//! Well-posed systems have `‖exp(t G_N)‖` bounded in `N`; ill-posed ones grow
//! like `exp(c N^p t)` with `p` the order of the offending term.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symbols::{complex_product, galerkin_matrix, spectral_norm, GalerkinMatrix, Symbol, TruncatedField};
use crate::wellposed::{check_complex, check_real, ComplexSystem, RealSystem, Verdict, WellposedError, TWO_PI};

/// Largest dense dimension exponentiated without an explicit override (`N = 64`).
pub const DENSE_DIM_CAP: usize = 258;
/// Minimum number of samples in a norm history.
pub const MIN_SAMPLES: usize = 32;
/// Largest predicted `log ‖exp(tG)‖` before `t` is shrunk.
pub const OVERFLOW_EXPONENT: f64 = 40.0;
pub const DEFAULT_LADDER: [usize; 4] = [8, 16, 32, 48];
const RK4_MARGIN: f64 = 2.6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolveError {
    #[error("time step {dt} exceeds the RK4 stability bound {bound} at N = {n}")]
    StabilityViolation { dt: f64, bound: f64, n: usize },
    #[error("dense dimension {dim} exceeds the cap {cap}; raise the cap explicitly")]
    DimensionCap { dim: usize, cap: usize },
    #[error("time-dependent coefficients need the step method")]
    NeedsStepping,
    #[error("invalid evolution parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Wellposed(#[from] WellposedError),
}

/// A time-independent system together with the sign convention of its generator.
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    /// `∂_t + iP`; generator `-iP`.
    Complex(ComplexSystem),
    /// `∂_t + aJ∂^4 + β∂^2 + γ∂`; generator `-(aJ∂^4 + β∂^2 + γ∂)`.
    Real(RealSystem),
    /// `∂_t + Q` for an arbitrary symbol `Q`; generator `-Q`.
    Operator(Symbol),
}

impl Dynamics {
    /// Symbol `q` with generator `g · Op(q)`.
    fn symbol_and_factor(&self) -> (Symbol, Complex64) {
        match self {
            Dynamics::Complex(s) => (s.symbol(), Complex64::new(0.0, -1.0)),
            Dynamics::Real(s) => (s.operator_symbol(), Complex64::new(-1.0, 0.0)),
            Dynamics::Operator(q) => (q.clone(), Complex64::new(-1.0, 0.0)),
        }
    }

    pub fn generator(&self, n: usize) -> GalerkinMatrix {
        let (q, f) = self.symbol_and_factor();
        galerkin_matrix(&q, n).scale(f)
    }

    /// Verdict of the integral conditions, where they apply.
    pub fn verdict(&self) -> Result<Option<Verdict>, WellposedError> {
        Ok(match self {
            Dynamics::Complex(s) => Some(check_complex(s)),
            Dynamics::Real(s) => Some(check_real(s)?),
            Dynamics::Operator(_) => None,
        })
    }

    /// Largest mode growth rate `|c| N^p` suggested by the condition residuals
    /// at cutoff `n`. Zero for operators without conditions.
    pub fn predicted_rate(&self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Dynamics::Complex(s) => {
                let v = check_complex(s);
                let pw = [3, 3, 2, 2, 1, 1];
                v.residuals.iter().zip(pw).map(|(r, p)| r.value.norm() / TWO_PI * n.powi(p)).fold(0.0, f64::max)
            }
            // through the complex image, where each trace integral shows up halved
            Dynamics::Real(s) => match check_real(s) {
                Ok(v) => {
                    let r0 = v.residuals[0].value.norm() / (2.0 * TWO_PI) * n * n;
                    let r1 = v.residuals[1].value.norm() / (2.0 * TWO_PI) * n;
                    r0.max(r1)
                }
                Err(_) => 0.0,
            },
            Dynamics::Operator(_) => 0.0,
        }
    }
}

/// `-iP` or `-(J∂^4 + β∂^2 + γ∂)` on modes `|k| <= n`.
pub fn generator_matrix(sys: &Dynamics, n: usize) -> GalerkinMatrix {
    sys.generator(n)
}

/// RK4 bound `2.6 / (p N^4 + Σ_{j<4} |q_j| N^j)` with `p`, `q_j` sup bounds
/// of the symbol's coefficients.
pub fn stability_bound(q: &Symbol, n: usize) -> f64 {
    let nf = (n.max(1)) as f64;
    let mut total = 0.0;
    for t in q.terms() {
        let order = t.xi.order().max(0);
        total += t.coef.sup_bound() * nf.powi(order);
    }
    if total == 0.0 {
        f64::INFINITY
    } else {
        RK4_MARGIN / total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Dense exponential by scaling and squaring.
    Expm,
    /// Classical fourth-order Runge–Kutta with step `dt`.
    Step { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub n: usize,
    pub t_final: f64,
    pub method: Method,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    MIN_SAMPLES
}

impl EvolutionConfig {
    pub fn expm(n: usize, t_final: f64) -> Self {
        Self { n, t_final, method: Method::Expm, samples: MIN_SAMPLES }
    }

    pub fn step(n: usize, t_final: f64, dt: f64) -> Self {
        Self { n, t_final, method: Method::Step { dt }, samples: MIN_SAMPLES }
    }

    fn intervals(&self) -> usize {
        self.samples.max(MIN_SAMPLES) - 1
    }

    fn check(&self) -> Result<(), EvolveError> {
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(EvolveError::InvalidParameter(format!("t_final = {}", self.t_final)));
        }
        if let Method::Step { dt } = self.method {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(EvolveError::InvalidParameter(format!("dt = {dt}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormHistory {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    #[serde(skip)]
    pub final_state: Option<TruncatedField>,
}

fn check_dim(n: usize, cap: usize) -> Result<(), EvolveError> {
    let dim = GalerkinMatrix::dim_for(n);
    if dim > cap {
        return Err(EvolveError::DimensionCap { dim, cap });
    }
    Ok(())
}

type Rhs<'a> = dyn Fn(f64, &DVector<Complex64>) -> DVector<Complex64> + 'a;

fn rk4_step(f: &Rhs<'_>, t: f64, u: &DVector<Complex64>, h: f64) -> DVector<Complex64> {
    let k1 = f(t, u);
    let k2 = f(t + h / 2.0, &(u + &k1 * Complex64::from(h / 2.0)));
    let k3 = f(t + h / 2.0, &(u + &k2 * Complex64::from(h / 2.0)));
    let k4 = f(t + h, &(u + &k3 * Complex64::from(h)));
    u + (k1 + (k2 + k3) * Complex64::from(2.0) + k4) * Complex64::from(h / 6.0)
}

fn stepped(
    f: &Rhs<'_>,
    u0: &TruncatedField,
    cfg: &EvolutionConfig,
    dt: f64,
    bound: f64,
) -> Result<NormHistory, EvolveError> {
    if dt > bound {
        return Err(EvolveError::StabilityViolation { dt, bound, n: cfg.n });
    }
    let m = cfg.intervals();
    let span = cfg.t_final / m as f64;
    let per = if span == 0.0 { 0 } else { (span / dt).ceil() as usize };
    let h = if per == 0 { 0.0 } else { span / per as f64 };
    let mut u = u0.resized(cfg.n).vector().clone();
    let mut times = vec![0.0];
    let mut norms = vec![u0.resized(cfg.n).norm()];
    let mut t = 0.0;
    for s in 1..=m {
        for _ in 0..per {
            u = rk4_step(f, t, &u, h);
            t += h;
        }
        t = span * s as f64;
        times.push(t);
        norms.push(TruncatedField::from_vector(cfg.n, u.clone()).norm());
    }
    Ok(NormHistory { times, norms, final_state: Some(TruncatedField::from_vector(cfg.n, u)) })
}

/// Evolves `u0` (resized to `cfg.n` modes) and samples the `L^2` norm at
/// `cfg.samples >= 32` equispaced times.
pub fn evolve(sys: &Dynamics, u0: &TruncatedField, cfg: &EvolutionConfig) -> Result<NormHistory, EvolveError> {
    evolve_with_cap(sys, u0, cfg, DENSE_DIM_CAP)
}

pub fn evolve_with_cap(
    sys: &Dynamics,
    u0: &TruncatedField,
    cfg: &EvolutionConfig,
    cap: usize,
) -> Result<NormHistory, EvolveError> {
    cfg.check()?;
    let g = sys.generator(cfg.n);
    match cfg.method {
        Method::Expm => {
            check_dim(cfg.n, cap)?;
            let m = cfg.intervals();
            let span = cfg.t_final / m as f64;
            let step = expm(&(g.matrix() * Complex64::from(span)));
            let mut u = u0.resized(cfg.n).vector().clone();
            let mut times = vec![0.0];
            let mut norms = vec![u0.resized(cfg.n).norm()];
            for s in 1..=m {
                u = &step * u;
                times.push(span * s as f64);
                norms.push(TruncatedField::from_vector(cfg.n, u.clone()).norm());
            }
            Ok(NormHistory { times, norms, final_state: Some(TruncatedField::from_vector(cfg.n, u)) })
        }
        Method::Step { dt } => {
            let (q, _) = sys.symbol_and_factor();
            let bound = stability_bound(&q, cfg.n);
            let mat = g.into_matrix();
            let f = |_t: f64, v: &DVector<Complex64>| &mat * v;
            stepped(&f, u0, cfg, dt, bound)
        }
    }
}

/// RK4 evolution for coefficients depending on time. The stability bound
/// is the smallest over the sample times.
pub fn evolve_time_dependent<F>(sys_of_t: F, u0: &TruncatedField, cfg: &EvolutionConfig) -> Result<NormHistory, EvolveError>
where
    F: Fn(f64) -> RealSystem,
{
    cfg.check()?;
    let Method::Step { dt } = cfg.method else {
        return Err(EvolveError::NeedsStepping);
    };
    let m = cfg.intervals();
    let bound = (0..=m)
        .map(|s| stability_bound(&sys_of_t(cfg.t_final * s as f64 / m as f64).operator_symbol(), cfg.n))
        .fold(f64::INFINITY, f64::min);
    let n = cfg.n;
    let f = |t: f64, v: &DVector<Complex64>| {
        let g = Dynamics::Real(sys_of_t(t)).generator(n);
        g.matrix() * v
    };
    stepped(&f, u0, cfg, dt, bound)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &DMatrix<Complex64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by degree-13 Padé approximation with scaling and squaring.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm = one_norm(a);
    if n == 0 || norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a * Complex64::from(0.5f64.powi(s));
    let b = |i: usize| Complex64::from(PADE13[i]);
    let id = DMatrix::<Complex64>::identity(n, n);
    let a2 = complex_product(&a, &a);
    let a4 = complex_product(&a2, &a2);
    let a6 = complex_product(&a4, &a2);
    let u_in = complex_product(&a6, &(&a6 * b(13) + &a4 * b(11) + &a2 * b(9)))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = complex_product(&a, &u_in);
    let v = complex_product(&a6, &(&a6 * b(12) + &a4 * b(10) + &a2 * b(8)))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);
    let mut r = (&v - &u).lu().solve(&(&v + &u)).expect("Padé denominator is nonsingular after scaling");
    for _ in 0..s {
        r = complex_product(&r, &r);
    }
    r
}

/// `exp(t G)` as a dense matrix.
pub fn propagator(g: &GalerkinMatrix, t: f64) -> GalerkinMatrix {
    GalerkinMatrix::from_matrix(g.modes(), expm(&(g.matrix() * Complex64::from(t))))
}

/// `‖exp(t G_N)‖_2`.
pub fn propagator_norm(sys: &Dynamics, n: usize, t: f64) -> f64 {
    spectral_norm(propagator(&sys.generator(n), t).matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum GrowthModel {
    Bounded,
    /// `log ‖·‖` linear in `N^3`.
    CubicExponential,
    /// `log ‖·‖ ~ N^exponent`.
    Polynomial { exponent: f64 },
}

impl GrowthModel {
    pub fn is_bounded(&self) -> bool {
        matches!(self, GrowthModel::Bounded)
    }

    pub fn label(&self) -> String {
        match self {
            GrowthModel::Bounded => "bounded".into(),
            GrowthModel::CubicExponential => "cubic-exponential".into(),
            GrowthModel::Polynomial { exponent } => format!("polynomial(log-norm ~ N^{exponent:.2})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    /// `R^2` of `log ‖·‖` against `N`.
    pub r2_linear: f64,
    /// `R^2` of `log ‖·‖` against `N^3`.
    pub r2_cubic: f64,
    /// Slope of `log log ‖·‖` against `log N`, over the points with `‖·‖ > 1`.
    pub exponent: Option<f64>,
    pub max_over_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthStudy {
    pub ns: Vec<usize>,
    /// Time actually used (after any overflow shrink).
    pub t: f64,
    pub requested_t: f64,
    /// Set when `t` was shrunk; the predicted exponent at the requested time.
    pub predicted_exponent: Option<f64>,
    pub propagator_norms: Vec<f64>,
    pub fit: GrowthFit,
    pub model: GrowthModel,
}

impl GrowthStudy {
    pub fn overflow_message(&self) -> Option<String> {
        self.predicted_exponent.map(|p| {
            format!(
                "overflow guard: predicted exponent {p:.3} at t = {} exceeds {OVERFLOW_EXPONENT}; using t = {}",
                self.requested_t, self.t
            )
        })
    }
}

fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 1.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if syy == 0.0 || sxx == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Classifies a norm ladder: bounded if `max/min <= 1.5`; cubic-exponential
/// if `log ‖·‖` fits `N^3` with `R^2 >= 0.99` and exponent `>= 2.5`.
pub fn classify(ns: &[usize], norms: &[f64]) -> (GrowthFit, GrowthModel) {
    let hi = norms.iter().cloned().fold(f64::MIN, f64::max);
    let lo = norms.iter().cloned().fold(f64::MAX, f64::min);
    let max_over_min = hi / lo;
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let x3: Vec<f64> = x.iter().map(|v| v.powi(3)).collect();
    let r2_linear = r_squared(&x, &y);
    let r2_cubic = r_squared(&x3, &y);
    let pts: Vec<(f64, f64)> = x.iter().zip(&y).filter(|(_, &l)| l > 0.0).map(|(&a, &l)| (a.ln(), l.ln())).collect();
    let exponent = (pts.len() >= 2).then(|| {
        let (lx, ly): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        slope(&lx, &ly)
    });
    let fit = GrowthFit { r2_linear, r2_cubic, exponent, max_over_min };
    let model = if max_over_min <= 1.5 {
        GrowthModel::Bounded
    } else {
        match exponent {
            Some(p) if r2_cubic >= 0.99 && p >= 2.5 => GrowthModel::CubicExponential,
            Some(p) => GrowthModel::Polynomial { exponent: p },
            None => GrowthModel::Polynomial { exponent: 0.0 },
        }
    };
    (fit, model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthOptions {
    pub dense_cap: usize,
    pub overflow_guard: bool,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        Self { dense_cap: DENSE_DIM_CAP, overflow_guard: true }
    }
}

/// `‖exp(t G_N)‖_2` over the ladder, computed in parallel and merged in ladder order.
pub fn growth_study(sys: &Dynamics, ns: &[usize], t: f64) -> Result<GrowthStudy, EvolveError> {
    growth_study_with(sys, ns, t, GrowthOptions::default())
}

pub fn growth_study_with(sys: &Dynamics, ns: &[usize], t: f64, opts: GrowthOptions) -> Result<GrowthStudy, EvolveError> {
    if ns.is_empty() {
        return Err(EvolveError::InvalidParameter("empty N ladder".into()));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(EvolveError::InvalidParameter(format!("t = {t}")));
    }
    for &n in ns {
        check_dim(n, opts.dense_cap)?;
    }
    let nmax = *ns.iter().max().unwrap();
    let predicted = t * sys.predicted_rate(nmax);
    let (t_used, shrunk) = if opts.overflow_guard && predicted > OVERFLOW_EXPONENT {
        (t * OVERFLOW_EXPONENT / predicted, Some(predicted))
    } else {
        (t, None)
    };
    let mut study = ladder(|n| sys.generator(n), ns, t_used);
    study.requested_t = t;
    study.predicted_exponent = shrunk;
    Ok(study)
}

/// Growth study for generators given per cutoff, e.g. conjugated ones. No overflow guard.
pub fn growth_study_matrices<F>(gen: F, ns: &[usize], t: f64, opts: GrowthOptions) -> Result<GrowthStudy, EvolveError>
where
    F: Fn(usize) -> GalerkinMatrix + Sync,
{
    if ns.is_empty() {
        return Err(EvolveError::InvalidParameter("empty N ladder".into()));
    }
    for &n in ns {
        check_dim(n, opts.dense_cap)?;
    }
    Ok(ladder(gen, ns, t))
}

fn ladder<F: Fn(usize) -> GalerkinMatrix + Sync>(gen: F, ns: &[usize], t: f64) -> GrowthStudy {
    let norms: Vec<f64> = ns.par_iter().map(|&n| spectral_norm(propagator(&gen(n), t).matrix())).collect();
    let (fit, model) = classify(ns, &norms);
    GrowthStudy { ns: ns.to_vec(), t, requested_t: t, predicted_exponent: None, propagator_norms: norms, fit, model }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    pub label: String,
    pub study: GrowthStudy,
    /// Verdict of the integral conditions; `None` for bare operators.
    pub verdict: Option<Verdict>,
    /// Bounded norms exactly when the conditions pass.
    pub consistent: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyReport {
    pub series: Vec<SeriesReport>,
    pub consistent: bool,
}

impl DichotomyReport {
    /// Columns `series,N,t,propagator_norm`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,N,t,propagator_norm\n");
        for s in &self.series {
            for (n, v) in s.study.ns.iter().zip(&s.study.propagator_norms) {
                writeln!(out, "{},{},{},{}", s.label, n, fmt17(s.study.t), fmt17(*v)).unwrap();
            }
        }
        out
    }

    pub fn consistency_line(&self) -> String {
        format!("verdicts consistent: {}", if self.consistent { "yes" } else { "no" })
    }
}

/// `x` with 17 significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    // + 0.0 turns -0 into 0
    format!("{:.16e}", x + 0.0)
}

fn series(label: &str, sys: &Dynamics, ns: &[usize], t: f64, opts: GrowthOptions) -> Result<SeriesReport, EvolveError> {
    let study = growth_study_with(sys, ns, t, opts)?;
    let verdict = sys.verdict()?;
    // a single N cannot show growth; compare only when there is a ladder
    let consistent = verdict.as_ref().filter(|_| ns.len() > 1).map(|v| v.well_posed == study.model.is_bounded());
    Ok(SeriesReport { label: label.into(), study, verdict, consistent })
}

/// Growth studies of a compliant and a violating system side by side.
pub fn dichotomy_experiment(
    compliant: &Dynamics,
    violating: &Dynamics,
    ns: &[usize],
    t: f64,
) -> Result<DichotomyReport, EvolveError> {
    dichotomy_experiment_with(&[("compliant", compliant), ("violating", violating)], ns, t, GrowthOptions::default())
}

/// Any number of labeled series; consistent when no series contradicts its verdict.
pub fn dichotomy_experiment_with(
    systems: &[(&str, &Dynamics)],
    ns: &[usize],
    t: f64,
    opts: GrowthOptions,
) -> Result<DichotomyReport, EvolveError> {
    let series = systems.iter().map(|(l, s)| series(l, s, ns, t, opts)).collect::<Result<Vec<_>, _>>()?;
    let consistent = series.iter().all(|s| s.consistent != Some(false));
    Ok(DichotomyReport { series, consistent })
}

/// Relative deviation of each mode's measured growth from `exp(Re λ t)`,
/// `λ` the eigenvalues of the constant generator block at that mode.
pub fn constant_mode_growth(g: &GalerkinMatrix, t: f64) -> Vec<(i64, f64, f64)> {
    let n = g.modes() as i64;
    let p = propagator(g, t);
    (-n..=n)
        .map(|k| {
            let b = g.block(k, k);
            let m = DMatrix::from_row_slice(2, 2, &[b[0][0], b[0][1], b[1][0], b[1][1]]);
            let e = expm(&(m * Complex64::from(t)));
            let pb = p.block(k, k);
            let measured = DMatrix::from_row_slice(2, 2, &[pb[0][0], pb[0][1], pb[1][0], pb[1][1]]);
            (k, spectral_norm(&measured), spectral_norm(&e))
        })
        .collect()
}
