//! Frame coefficients of the fourth-order geometric flow on a Riemann surface.
//!
//! `u_x = ξ e + η J̃e` in a parallel frame along the closed curve; the
//! components `V`, `W` of the `l`-th covariant derivative satisfy
//! `{I∂_t - aJ∂^4 + β̂∂^2 + γ̂∂}[V; W] = OK`. Rotating by `P(θx)` restores
//! periodicity at the cost of an isotropic `-aθ I ∂^3` term.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolve::{propagator_norm, Dynamics};
use crate::periodic::{MatrixCoefficient, PeriodicScalar, DEFAULT_TOL};
use crate::symbols::{Symbol, SymbolTerm, XiFactor};
use crate::wellposed::{check_real, check_real_time_dependent, trace_j, RealSystem, Verdict, WellposedError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("the flow constant a must be nonzero")]
    DegenerateA,
    #[error("derivative order l = {0} is below 4")]
    OrderTooSmall(u32),
    #[error("{field} is not real-valued (defect {defect:e})")]
    NonReal { field: &'static str, defect: f64 },
    #[error(transparent)]
    Wellposed(#[from] WellposedError),
}

/// Sectional curvature along the curve: a number or a real series in `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Curvature {
    Constant(f64),
    Varying(PeriodicScalar),
}

impl Curvature {
    pub fn series(&self) -> PeriodicScalar {
        match self {
            Curvature::Constant(k) => PeriodicScalar::real_constant(*k),
            Curvature::Varying(s) => s.clone(),
        }
    }
}

impl Default for Curvature {
    fn default() -> Self {
        Curvature::Constant(0.0)
    }
}

/// `ξ`, `η` at one time, with the holonomy angle there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSample {
    pub t: f64,
    pub xi: PeriodicScalar,
    pub eta: PeriodicScalar,
    #[serde(default)]
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameState {
    pub xi: PeriodicScalar,
    pub eta: PeriodicScalar,
    #[serde(rename = "K", alias = "k", default)]
    pub k: Curvature,
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    pub l: u32,
    #[serde(default)]
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<FrameSample>,
}

impl FrameState {
    pub fn new(xi: PeriodicScalar, eta: PeriodicScalar, k: Curvature, a: f64, b: f64, c: f64, l: u32) -> Self {
        Self { xi, eta, k, a, b, c, l, theta: 0.0, samples: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        if self.l < 4 {
            return Err(FrameError::OrderTooSmall(self.l));
        }
        let k = self.k.series();
        for (field, s) in [("xi", &self.xi), ("eta", &self.eta), ("K", &k)] {
            let defect = s.reality_defect();
            if defect > DEFAULT_TOL {
                return Err(FrameError::NonReal { field, defect });
            }
        }
        Ok(())
    }

    fn at_sample(&self, s: &FrameSample) -> FrameState {
        FrameState { xi: s.xi.clone(), eta: s.eta.clone(), theta: s.theta, samples: Vec::new(), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameCoefficients {
    pub beta_hat: MatrixCoefficient,
    pub gamma_hat: MatrixCoefficient,
}

/// `β̂` and `γ̂` entry by entry. The `ξ^2` weight in `γ̂_12` (and the `η^2`
/// weight in `γ̂_21`) is `b(l+1) + c/2`, which makes the divergence part of
/// `γ̂_12 - γ̂_21` equal `∂{H (ξ^2+η^2)}` with `H = (a/2)(2l-1)K + b(2l+3) + (c/2)(2l+5)`.
pub fn frame_coefficients(state: &FrameState) -> FrameCoefficients {
    let (xi, eta) = (&state.xi, &state.eta);
    let (a, b, c) = (state.a, state.b, state.c);
    let l = state.l as f64;
    let k = state.k.series();
    let one = PeriodicScalar::real_constant(1.0);
    let cst = PeriodicScalar::real_constant;

    let xe = xi * eta;
    let xi2 = xi * xi;
    let eta2 = eta * eta;
    let ak_c = &k.scale_re(a) + &cst(c);
    let ak_bc = &k.scale_re(a) + &cst(b + c);

    let b11 = &ak_c * &xe;
    let b12 = &(&one + &xi2.scale_re(b)) + &(&ak_bc * &eta2);
    let b21 = &(-&(&one + &(&ak_bc * &xi2))) - &eta2.scale_re(b);
    let b22 = -&b11;

    let w1 = &k.scale_re(a * (l - 1.0)) + &cst(c * (l + 2.0));
    let w2 = &k.scale_re(a) + &cst(2.0 * b - c);
    let small = cst(b * (l + 1.0) + c / 2.0);
    let large = &k.scale_re(a / 2.0 * (2.0 * l - 1.0)) + &cst((b + c) * (l + 2.0));
    let dk = k.derivative().scale_re(a / 2.0);

    let g11 = &(&w1 * &xe).derivative() + &(&w2 * &(xi * &eta.derivative()));
    let g12 = &(&(&small * &xi2) + &(&large * &eta2)).derivative() - &(&dk * &eta2);
    let g21 = &(-&(&(&large * &xi2) + &(&small * &eta2)).derivative()) + &(&dk * &xi2);
    let g22 = &(-&(&w1 * &xe).derivative()) - &(&w2 * &(&xi.derivative() * eta));

    FrameCoefficients {
        beta_hat: MatrixCoefficient::new(b11, b12, b21, b22),
        gamma_hat: MatrixCoefficient::new(g11, g12, g21, g22),
    }
}

/// `H = (a/2)(2l-1)K + b(2l+3) + (c/2)(2l+5)`.
pub fn h_weight(state: &FrameState) -> PeriodicScalar {
    let l = state.l as f64;
    &state.k.series().scale_re(state.a / 2.0 * (2.0 * l - 1.0))
        + &PeriodicScalar::real_constant(state.b * (2.0 * l + 3.0) + state.c / 2.0 * (2.0 * l + 5.0))
}

/// `γ̂_12 - γ̂_21 - ∂{H(ξ^2+η^2)} + (a/2)K'(ξ^2+η^2)`, zero mode by mode.
pub fn divergence_identity_defect(state: &FrameState, fc: &FrameCoefficients) -> PeriodicScalar {
    let g = &(&state.xi * &state.xi) + &(&state.eta * &state.eta);
    let div = (&h_weight(state) * &g).derivative();
    let curv = &state.k.series().derivative().scale_re(state.a / 2.0) * &g;
    &(&trace_j(&fc.gamma_hat) - &div) + &curv
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolonomyCorrection {
    pub theta: f64,
    pub beta_hat1: MatrixCoefficient,
    pub gamma_hat1: MatrixCoefficient,
    /// Coefficient `-aθ` of `I∂^3`.
    pub third_order_coeff: f64,
    /// Whether `P(θx)` conjugation was done as exact series algebra (`2θ` an integer).
    pub exact: bool,
}

/// `P(θx) X ᵗP(θx)`. The `I` and `J` parts of `X` are invariant; the
/// symmetric trace-free part turns by `2θx`. That factor is a series when
/// `2θ` is an integer; otherwise it is sampled and projected.
pub fn rotate(x: &MatrixCoefficient, theta: f64) -> (MatrixCoefficient, bool) {
    if theta == 0.0 {
        return (x.clone(), true);
    }
    let [[x11, x12], [x21, x22]] = &x.entries;
    let s = (x11 + x22).scale_re(0.5);
    let w = (x21 - x12).scale_re(0.5);
    let p = (x11 - x22).scale_re(0.5);
    let q = (x12 + x21).scale_re(0.5);
    let m = 2.0 * theta;
    let exact = (m - m.round()).abs() < 1e-12;
    let (p1, q1) = if exact {
        let m = m.round() as i64;
        let (cs, sn) = (PeriodicScalar::cos(m), PeriodicScalar::sin(m));
        (&(&p * &cs) - &(&q * &sn), &(&p * &sn) + &(&q * &cs))
    } else {
        let bw = p.bandwidth().max(q.bandwidth()) + m.abs().ceil() as usize + 16;
        let count = 8 * (2 * bw + 1);
        let grid: Vec<f64> = (0..count).map(|j| 2.0 * PI * j as f64 / count as f64).collect();
        let sp: Vec<Complex64> = grid.iter().map(|&x| p.evaluate(x) * (m * x).cos() - q.evaluate(x) * (m * x).sin()).collect();
        let sq: Vec<Complex64> = grid.iter().map(|&x| p.evaluate(x) * (m * x).sin() + q.evaluate(x) * (m * x).cos()).collect();
        (PeriodicScalar::trapezoid(&sp, bw), PeriodicScalar::trapezoid(&sq, bw))
    };
    let out = MatrixCoefficient::new(&s + &p1, &q1 - &w, &q1 + &w, &s - &p1);
    (out, exact)
}

/// `β̂_1 = Pβ̂ᵗP + 6aθ^2 J`, `γ̂_1 = Pγ̂ᵗP + 4aθ^3 I - 2θ Pβ̂ᵗP J`, third-order coefficient `-aθ`.
pub fn holonomy_correct(fc: &FrameCoefficients, theta: f64, a: f64) -> HolonomyCorrection {
    let j = MatrixCoefficient::j();
    let (rb, e1) = rotate(&fc.beta_hat, theta);
    let (rg, e2) = rotate(&fc.gamma_hat, theta);
    let beta_hat1 = &rb + &j.scale_re(6.0 * a * theta * theta);
    let gamma_hat1 =
        &(&rg + &MatrixCoefficient::identity().scale_re(4.0 * a * theta.powi(3))) - &rb.matmul(&j).scale_re(2.0 * theta);
    HolonomyCorrection { theta, beta_hat1, gamma_hat1, third_order_coeff: -a * theta, exact: e1 && e2 }
}

/// The corrected system `∂_t - aJ∂^4 + β̂_1∂^2 + γ̂_1∂` without the third-order term.
pub fn corrected_system(hc: &HolonomyCorrection, a: f64) -> RealSystem {
    RealSystem { beta: hc.beta_hat1.clone(), gamma: hc.gamma_hat1.clone(), principal_scale: -a }
}

/// Symbol of `-aJ∂^4 - aθI∂^3 + β̂_1∂^2 + γ̂_1∂`, optionally without the `∂^3` term.
pub fn corrected_symbol(hc: &HolonomyCorrection, a: f64, third_order: bool) -> Symbol {
    let mut q = corrected_system(hc, a).operator_symbol();
    if third_order {
        // ∂^3 has symbol -iξ^3
        let coef = MatrixCoefficient::identity().scale(Complex64::new(0.0, -hc.third_order_coeff));
        q = q.add(&Symbol::from_terms(vec![SymbolTerm { coef, xi: XiFactor::poly(3) }]));
    }
    q
}

/// Condition check for the corrected system at the state's holonomy angle.
/// The isotropic third-order term is left out: with constant coefficient it
/// adds `i·const·k^3` per mode and changes no energy.
pub fn frame_wellposedness(state: &FrameState, theta: f64) -> Result<Verdict, FrameError> {
    if state.a == 0.0 {
        return Err(FrameError::DegenerateA);
    }
    state.validate()?;
    let fc = frame_coefficients(state);
    let hc = holonomy_correct(&fc, theta, state.a);
    Ok(check_real(&corrected_system(&hc, state.a))?)
}

/// Runs the check at every time sample (each with its own `θ`); the worst
/// residual per condition is reported. Without samples this is the static check.
pub fn frame_wellposedness_time_dependent(state: &FrameState) -> Result<Verdict, FrameError> {
    if state.samples.is_empty() {
        return frame_wellposedness(state, state.theta);
    }
    if state.a == 0.0 {
        return Err(FrameError::DegenerateA);
    }
    let systems = state
        .samples
        .iter()
        .map(|s| {
            let st = state.at_sample(s);
            st.validate()?;
            let hc = holonomy_correct(&frame_coefficients(&st), s.theta, st.a);
            Ok(corrected_system(&hc, st.a))
        })
        .collect::<Result<Vec<_>, FrameError>>()?;
    let times: Vec<f64> = (0..systems.len()).map(|i| i as f64).collect();
    Ok(check_real_time_dependent(|t| systems[t as usize].clone(), &times)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameIdentities {
    /// Largest mode of `tr β̂`.
    pub trace_beta: f64,
    /// Largest mode of the divergence-identity defect.
    pub divergence_identity: f64,
    /// `∫(γ̂_12 - γ̂_21)` and `-(a/2)∫K'(ξ^2+η^2)`.
    pub skew_integral: f64,
    pub skew_integral_expected: f64,
    /// Largest mode of `tr β̂_1 - tr β̂` and of `tr Jγ̂_1 - tr Jγ̂`.
    pub holonomy_trace_beta: f64,
    pub holonomy_trace_j_gamma: f64,
}

pub fn frame_identities(state: &FrameState, fc: &FrameCoefficients, hc: &HolonomyCorrection) -> FrameIdentities {
    let g = &(&state.xi * &state.xi) + &(&state.eta * &state.eta);
    let expected = (&state.k.series().derivative() * &g).mean_integral().re * (-state.a / 2.0);
    FrameIdentities {
        trace_beta: fc.beta_hat.trace().max_abs_coeff(),
        divergence_identity: divergence_identity_defect(state, fc).max_abs_coeff(),
        skew_integral: trace_j(&fc.gamma_hat).mean_integral().re,
        skew_integral_expected: expected,
        holonomy_trace_beta: hc.beta_hat1.trace().max_coeff_diff(&fc.beta_hat.trace()),
        holonomy_trace_j_gamma: trace_j(&hc.gamma_hat1).max_coeff_diff(&trace_j(&fc.gamma_hat)),
    }
}

/// `‖exp(tG_N)‖` of the corrected system with and without the `-aθI∂^3` term.
pub fn third_order_comparison(hc: &HolonomyCorrection, a: f64, n: usize, t: f64) -> (f64, f64) {
    let with = propagator_norm(&Dynamics::Operator(corrected_symbol(hc, a, true)), n, t);
    let without = propagator_norm(&Dynamics::Operator(corrected_symbol(hc, a, false)), n, t);
    (with, without)
}
