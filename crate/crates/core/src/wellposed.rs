//! Necessary and sufficient integral conditions for L²-well-posedness.
//!
//! Every condition is an integral over the period, so it reduces to an exact
//! read of a Fourier mean `2π c_0`; the residuals are exact up to roundoff.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::periodic::{MatrixCoefficient, PeriodicScalar, DEFAULT_TOL};
use crate::symbols::{Symbol, SymbolTerm, XiFactor};

/// Default absolute tolerance on residual magnitudes.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WellposedError {
    #[error("coefficient block `{block}` is not real-valued (defect {defect:e})")]
    NonRealCoefficients { block: String, defect: f64 },
    #[error("principal scale must be finite and nonzero, got {0}")]
    InvalidPrincipalScale(f64),
    #[error("no sample times given")]
    NoSamples,
}

/// `L = ∂_t + iP`, `P = E D^4 + A D^3 + B D^2 + C D + D_0` with `D = -i∂_x`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexSystem {
    pub a: MatrixCoefficient,
    pub b: MatrixCoefficient,
    pub c: MatrixCoefficient,
    #[serde(default)]
    pub d: MatrixCoefficient,
}

impl ComplexSystem {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn translate(&self, x0: f64) -> Self {
        Self { a: self.a.translate(x0), b: self.b.translate(x0), c: self.c.translate(x0), d: self.d.translate(x0) }
    }

    pub fn bandwidth(&self) -> usize {
        [&self.a, &self.b, &self.c, &self.d].iter().map(|m| m.bandwidth()).max().unwrap_or(0)
    }

    /// Symbol of `P`: `E ξ^4 + A ξ^3 + B ξ^2 + C ξ + D`.
    pub fn symbol(&self) -> Symbol {
        Symbol::polynomial(&[
            (4, MatrixCoefficient::e()),
            (3, self.a.clone()),
            (2, self.b.clone()),
            (1, self.c.clone()),
            (0, self.d.clone()),
        ])
    }
}

/// `∂_t + a J ∂^4 + β ∂^2 + γ ∂` with real `β`, `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealSystem {
    pub beta: MatrixCoefficient,
    pub gamma: MatrixCoefficient,
    #[serde(default = "one")]
    pub principal_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for RealSystem {
    fn default() -> Self {
        Self { beta: MatrixCoefficient::zero(), gamma: MatrixCoefficient::zero(), principal_scale: 1.0 }
    }
}

impl RealSystem {
    pub fn new(beta: MatrixCoefficient, gamma: MatrixCoefficient) -> Self {
        Self { beta, gamma, principal_scale: 1.0 }
    }

    /// Rejects complex coefficients and a vanishing principal scale.
    pub fn validate(&self) -> Result<(), WellposedError> {
        if !self.principal_scale.is_finite() || self.principal_scale == 0.0 {
            return Err(WellposedError::InvalidPrincipalScale(self.principal_scale));
        }
        for (name, m) in [("beta", &self.beta), ("gamma", &self.gamma)] {
            let defect = m.reality_defect();
            if defect > DEFAULT_TOL {
                return Err(WellposedError::NonRealCoefficients { block: name.into(), defect });
            }
        }
        Ok(())
    }

    /// The same operator divided by `a`, so that the principal part is `J ∂^4`.
    pub fn normalized(&self) -> Self {
        let s = 1.0 / self.principal_scale;
        Self { beta: self.beta.scale_re(s), gamma: self.gamma.scale_re(s), principal_scale: 1.0 }
    }

    pub fn translate(&self, x0: f64) -> Self {
        Self { beta: self.beta.translate(x0), gamma: self.gamma.translate(x0), principal_scale: self.principal_scale }
    }

    /// Symbol of `a J ∂^4 + β ∂^2 + γ ∂`, i.e. `a J ξ^4 - β ξ^2 + i γ ξ`.
    pub fn operator_symbol(&self) -> Symbol {
        Symbol::from_terms(vec![
            SymbolTerm { coef: MatrixCoefficient::j().scale_re(self.principal_scale), xi: XiFactor::poly(4) },
            SymbolTerm { coef: self.beta.scale_re(-1.0), xi: XiFactor::poly(2) },
            SymbolTerm { coef: self.gamma.scale(I), xi: XiFactor::poly(1) },
        ])
    }

    pub fn bandwidth(&self) -> usize {
        self.beta.bandwidth().max(self.gamma.bandwidth())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `∂_t v ± i D^4 v + i a D^3 v + i b D^2 v + i c D v + i d v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleEquation {
    pub sign: Sign,
    pub a: PeriodicScalar,
    pub b: PeriodicScalar,
    pub c: PeriodicScalar,
    #[serde(default)]
    pub d: PeriodicScalar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub name: String,
    pub value: Complex64,
}

/// A decision together with every residual it was based on.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub well_posed: bool,
    pub residuals: Vec<Residual>,
    pub tolerance: f64,
}

impl Verdict {
    pub fn from_residuals(residuals: Vec<Residual>, tolerance: f64) -> Self {
        let well_posed = residuals.iter().all(|r| r.value.norm() <= tolerance);
        Self { well_posed, residuals, tolerance }
    }

    /// Re-decides with another tolerance.
    pub fn with_tolerance(self, tolerance: f64) -> Self {
        Self::from_residuals(self.residuals, tolerance)
    }

    pub fn residual(&self, name: &str) -> Option<Complex64> {
        self.residuals.iter().find(|r| r.name == name).map(|r| r.value)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.value.norm()).fold(0.0, f64::max)
    }
}

#[derive(Serialize)]
struct ResidualRecord<'a> {
    name: &'a str,
    re: f64,
    im: f64,
    pass: bool,
}

#[derive(Serialize)]
struct VerdictRecord<'a> {
    well_posed: bool,
    tolerance: f64,
    residuals: Vec<ResidualRecord<'a>>,
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        VerdictRecord {
            well_posed: self.well_posed,
            tolerance: self.tolerance,
            residuals: self
                .residuals
                .iter()
                .map(|r| ResidualRecord {
                    name: &r.name,
                    re: r.value.re,
                    im: r.value.im,
                    pass: r.value.norm() <= self.tolerance,
                })
                .collect(),
        }
        .serialize(s)
    }
}

fn im_integral(name: &str, f: &PeriodicScalar) -> Residual {
    Residual { name: name.into(), value: Complex64::new(f.mean_integral().im, 0.0) }
}

fn re_integral(name: &str, f: &PeriodicScalar) -> Residual {
    Residual { name: name.into(), value: Complex64::new(f.mean_integral().re, 0.0) }
}

/// The three conditions for a single equation; the double sign follows `eq.sign`.
pub fn check_single(eq: &SingleEquation) -> Verdict {
    let s = eq.sign.value();
    let (a, b, c) = (&eq.a, &eq.b, &eq.c);
    let a2 = a * a;
    let cond2 = b - &a2.scale_re(s * 3.0 / 8.0);
    let cond3 = &(c - &(a * b).scale_re(s * 0.5)) - &(&a2 * a).scale_re(s / 8.0);
    Verdict::from_residuals(
        vec![im_integral("im_int_a", a), im_integral("im_int_b", &cond2), im_integral("im_int_c", &cond3)],
        DEFAULT_TOLERANCE,
    )
}

/// The six conditions for the complex system. `D` enters none of them.
pub fn check_complex(sys: &ComplexSystem) -> Verdict {
    let [[a11, a12], [a21, a22]] = &sys.a.entries;
    let [[b11, b12], [b21, b22]] = &sys.b.entries;
    let (c11, c22) = (sys.c.get(0, 0), sys.c.get(1, 1));
    let p = a12 * a21;

    let cond3 = b11 - &(&(a11 * a11).scale_re(3.0) - &p.scale_re(4.0)).scale_re(1.0 / 8.0);
    let cond4 = b22 + &(&(a22 * a22).scale_re(3.0) - &p.scale_re(4.0)).scale_re(1.0 / 8.0);

    let mixed = &(a12 * b21) + &(a21 * b12);
    let cond5 = {
        let t1 = (&a12.derivative() * a21).scale(I * 0.5);
        let t2 = (&(a11 * b11) - &mixed).scale_re(0.5);
        let t3 = (&(&(&(a11 * a11) * a11) + &(&p * a11).scale_re(4.0)) - &(&p * a22).scale_re(2.0)).scale_re(1.0 / 8.0);
        &(&(c11 + &t1) - &t2) - &t3
    };
    let cond6 = {
        let t1 = (a12 * &a21.derivative()).scale(I * 0.5);
        let t2 = (&(a22 * b22) - &mixed).scale_re(0.5);
        let t3 = (&(&(&(a22 * a22) * a22) - &(&p * a22).scale_re(4.0)) + &(&p * a11).scale_re(2.0)).scale_re(1.0 / 8.0);
        &(&(c22 - &t1) + &t2) + &t3
    };
    Verdict::from_residuals(
        vec![
            im_integral("im_int_a11", a11),
            im_integral("im_int_a22", a22),
            im_integral("im_int_b_row1", &cond3),
            im_integral("im_int_b_row2", &cond4),
            im_integral("im_int_c_row1", &cond5),
            im_integral("im_int_c_row2", &cond6),
        ],
        DEFAULT_TOLERANCE,
    )
}

/// `tr(Jγ) = γ_12 - γ_21`.
pub fn trace_j(m: &MatrixCoefficient) -> PeriodicScalar {
    m.get(0, 1) - m.get(1, 0)
}

/// The two trace conditions `∫ tr β = 0` and `∫ tr(Jγ) = 0`.
///
/// They do not depend on the principal scale: `t -> |a| t`, plus time
/// reversal when `a < 0`, maps the system to scale one and leaves zero
/// integrals zero.
pub fn check_real(sys: &RealSystem) -> Result<Verdict, WellposedError> {
    sys.validate()?;
    Ok(Verdict::from_residuals(
        vec![re_integral("int_tr_beta", &sys.beta.trace()), re_integral("int_tr_j_gamma", &trace_j(&sys.gamma))],
        DEFAULT_TOLERANCE,
    ))
}

/// The complex form `M L M^{-1}` of a real system, from the entry formulas
/// for `b̃_jk` and `c̃_jk` (coefficients divided by the principal scale first).
pub fn complex_image(sys: &RealSystem) -> ComplexSystem {
    let n = sys.normalized();
    let (b, g) = (&n.beta, &n.gamma);
    let (b11, b12, b21, b22) = (b.get(0, 0), b.get(0, 1), b.get(1, 0), b.get(1, 1));
    let (g11, g12, g21, g22) = (g.get(0, 0), g.get(0, 1), g.get(1, 0), g.get(1, 1));
    let ri = |re: PeriodicScalar, im: PeriodicScalar| &re + &im.scale(I);
    let bt = MatrixCoefficient::new(
        ri(b12 - b21, b11 + b22),
        ri(-&(b12 + b21), b11 - b22),
        ri(b12 + b21, b11 - b22),
        ri(-&(b12 - b21), b11 + b22),
    );
    let ct = MatrixCoefficient::new(
        ri(g11 + g22, -&(g12 - g21)),
        ri(g11 - g22, g12 + g21),
        ri(g11 - g22, -&(g12 + g21)),
        ri(g11 + g22, g12 - g21),
    );
    ComplexSystem { a: MatrixCoefficient::zero(), b: bt.scale_re(0.5), c: ct.scale_re(0.5), d: MatrixCoefficient::zero() }
}

/// The complex form computed by direct matrix conjugation:
/// `B̃ = i M β M^{-1}`, `C̃ = M γ M^{-1}`.
pub fn complex_image_by_conjugation(sys: &RealSystem) -> ComplexSystem {
    let n = sys.normalized();
    let (m, mi) = (MatrixCoefficient::m(), MatrixCoefficient::m_inv());
    ComplexSystem {
        a: MatrixCoefficient::zero(),
        b: m.matmul(&n.beta).matmul(&mi).scale(I),
        c: m.matmul(&n.gamma).matmul(&mi),
        d: MatrixCoefficient::zero(),
    }
}

/// Decides a real system through its complex image.
pub fn check_real_via_complex(sys: &RealSystem) -> Result<Verdict, WellposedError> {
    sys.validate()?;
    Ok(check_complex(&complex_image(sys)))
}

/// Checks every sample time; the reported residual per condition is the
/// sample of largest magnitude.
pub fn check_real_time_dependent<F: Fn(f64) -> RealSystem>(
    sys_of_t: F,
    times: &[f64],
) -> Result<Verdict, WellposedError> {
    let mut worst: Option<Vec<Residual>> = None;
    for &t in times {
        let v = check_real(&sys_of_t(t))?;
        worst = Some(match worst {
            None => v.residuals,
            Some(w) => w
                .into_iter()
                .zip(v.residuals)
                .map(|(a, b)| if b.value.norm() > a.value.norm() { b } else { a })
                .collect(),
        });
    }
    let residuals = worst.ok_or(WellposedError::NoSamples)?;
    Ok(Verdict::from_residuals(residuals, DEFAULT_TOLERANCE))
}

/// `2π`, handy for residual closed forms.
pub const TWO_PI: f64 = 2.0 * PI;
