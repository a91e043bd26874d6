//! Diagonalization of the complex system and the real gauge transform.
//!
//! Both are conjugations `L -> Λ L Λ^{-1}` by operators `Λ = I + Λ̃` with
//! `Λ̃` of negative order. The symbols are built exactly; conjugation on a
//! truncated Fourier space is used only to verify the result.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::periodic::{MatrixCoefficient, PeriodicError, PeriodicScalar, DEFAULT_TOL};
use crate::symbols::{self, complex_product, galerkin_matrix, GalerkinMatrix, Symbol, SymbolError, SymbolTerm, XiFactor, RADIUS_CAP};
use crate::wellposed::{trace_j, ComplexSystem, RealSystem, Sign, SingleEquation, WellposedError};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error(transparent)]
    Wellposed(#[from] WellposedError),
    #[error("condition {condition} ({name}) is violated: {source}")]
    ConditionsViolated {
        condition: usize,
        name: &'static str,
        #[source]
        source: PeriodicError,
    },
    #[error("the composed transform is singular at N = {0}")]
    Singular(usize),
}

fn e() -> MatrixCoefficient {
    MatrixCoefficient::e()
}

/// `B_1 = B + 2i ∂A^off + ½ A^off E A^off - ½ A E A^off - ½ A^off E A`.
pub fn compute_b1(a: &MatrixCoefficient, b: &MatrixCoefficient) -> MatrixCoefficient {
    let ao = a.off();
    let e = e();
    let terms = [
        b.clone(),
        ao.derivative().scale(I * 2.0),
        ao.matmul(&e).matmul(&ao).scale_re(0.5),
        a.matmul(&e).matmul(&ao).scale_re(-0.5),
        ao.matmul(&e).matmul(a).scale_re(-0.5),
    ];
    sum(&terms)
}

/// The first-order coefficient after the first two conjugations, term by term.
pub fn compute_c1(a: &MatrixCoefficient, b: &MatrixCoefficient, c: &MatrixCoefficient) -> MatrixCoefficient {
    c1_terms(a, b, c).iter().fold(MatrixCoefficient::zero(), |acc, t| &acc + t)
}

/// Each summand of `C_1` in display order; kept separate so tests can pin them.
pub fn c1_terms(a: &MatrixCoefficient, b: &MatrixCoefficient, c: &MatrixCoefficient) -> Vec<MatrixCoefficient> {
    let ao = a.off();
    let e = e();
    let dao = ao.derivative();
    let da = a.derivative();
    let ae = a.matmul(&e);
    let aoe = ao.matmul(&e);
    vec![
        c.clone(),
        ao.derivative_n(2).scale_re(3.0),
        ae.matmul(&dao).scale(I * 1.5),
        aoe.matmul(&da).scale(I * -0.5),
        aoe.matmul(&dao).scale(I * -1.5),
        dao.matmul(&e).matmul(&ao).scale(-I),
        ae.matmul(&ao).matmul(&e).matmul(&ao).scale_re(0.25),
        aoe.matmul(a).matmul(&e).matmul(&ao).scale_re(0.25),
        aoe.matmul(&ao).matmul(&e).matmul(&ao).scale_re(-0.25),
        b.matmul(&e).matmul(&ao).scale_re(-0.5),
        aoe.matmul(b).scale_re(-0.5),
    ]
}

/// `C_2 = C_1 + 2i ∂B_1^off - ½ A^diag E B_1^off - ½ B_1^off E A^diag`.
pub fn compute_c2(a: &MatrixCoefficient, b1: &MatrixCoefficient, c1: &MatrixCoefficient) -> MatrixCoefficient {
    let bo = b1.off();
    let ad = a.diag();
    let e = e();
    sum(&[
        c1.clone(),
        bo.derivative().scale(I * 2.0),
        ad.matmul(&e).matmul(&bo).scale_re(-0.5),
        bo.matmul(&e).matmul(&ad).scale_re(-0.5),
    ])
}

fn sum(terms: &[MatrixCoefficient]) -> MatrixCoefficient {
    terms.iter().fold(MatrixCoefficient::zero(), |acc, t| &acc + t)
}

/// Outcome of the three diagonalizing conjugations. `lambda_j` holds the
/// perturbation `Λ̃_j`; the transform itself is `Λ_j = I + Λ̃_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalizationResult {
    pub lambda1: Symbol,
    pub lambda2: Symbol,
    pub lambda3: Symbol,
    pub b1: MatrixCoefficient,
    pub c1: MatrixCoefficient,
    pub c2: MatrixCoefficient,
    pub row1: SingleEquation,
    pub row2: SingleEquation,
    pub r: f64,
}

impl DiagonalizationResult {
    /// Symbol of the decoupled operator `E D^4 + A^diag D^3 + B_1^diag D^2 + C_2^diag D`.
    pub fn p3_symbol(&self, sys: &ComplexSystem) -> Symbol {
        Symbol::polynomial(&[(4, e()), (3, sys.a.diag()), (2, self.b1.diag()), (1, self.c2.diag())])
    }

    /// Galerkin matrix of `Λ_3 Λ_2 Λ_1`.
    pub fn transform_matrix(&self, n: usize) -> GalerkinMatrix {
        let id = GalerkinMatrix::identity(n);
        let l = |s: &Symbol| id.add(&galerkin_matrix(s, n));
        l(&self.lambda3).matmul(&l(&self.lambda2)).matmul(&l(&self.lambda1))
    }
}

fn perturbation(coef: MatrixCoefficient, r: f64, l: u32) -> Symbol {
    Symbol::term(e().matmul(&coef.off()).scale_re(0.5), XiFactor::cutoff_over(r, l))
}

fn certify(symbols: &[Symbol], r: f64) -> Result<(), SymbolError> {
    for s in symbols {
        let norm = symbols::norm_certificate(s, 2 * r as usize);
        if norm >= 0.5 {
            return Err(SymbolError::NotDiagonallyDominant { norm });
        }
    }
    Ok(())
}

/// Diagonalizes with the default radius cap.
pub fn diagonalize(sys: &ComplexSystem, r: Option<f64>) -> Result<DiagonalizationResult, TransformError> {
    diagonalize_with_cap(sys, r, RADIUS_CAP)
}

/// Builds `Λ̃_1 = ½ E A^off φ_r/ξ`, `Λ̃_2 = ½ E B_1^off φ_r/ξ^2`,
/// `Λ̃_3 = ½ E C_2^off φ_r/ξ^3` and the two decoupled rows.
///
/// Without an explicit `r`, the radius search starts at
/// `max(8, 4s)` with `s = max(|½A^off|, |½B_1^off|^{1/2}, |½C_2^off|^{1/3})`.
pub fn diagonalize_with_cap(
    sys: &ComplexSystem,
    r: Option<f64>,
    cap: f64,
) -> Result<DiagonalizationResult, TransformError> {
    let a = &sys.a;
    let b1 = compute_b1(a, &sys.b);
    let c1 = compute_c1(a, &sys.b, &sys.c);
    let c2 = compute_c2(a, &b1, &c1);
    let build = |r: f64| {
        vec![perturbation(a.clone(), r, 1), perturbation(b1.clone(), r, 2), perturbation(c2.clone(), r, 3)]
    };
    let r = match r {
        Some(r) => {
            certify(&build(r), r)?;
            r
        }
        None => {
            let scale = (0.5 * a.off().sup_bound())
                .max((0.5 * b1.off().sup_bound()).sqrt())
                .max((0.5 * c2.off().sup_bound()).cbrt());
            symbols::default_radius(scale, cap, build)?
        }
    };
    let [lambda1, lambda2, lambda3]: [Symbol; 3] = build(r).try_into().expect("three perturbations");
    let row = |sign, i: usize| SingleEquation {
        sign,
        a: a.get(i, i).clone(),
        b: b1.get(i, i).clone(),
        c: c2.get(i, i).clone(),
        d: PeriodicScalar::zero(),
    };
    let (row1, row2) = (row(Sign::Plus, 0), row(Sign::Minus, 1));
    Ok(DiagonalizationResult { lambda1, lambda2, lambda3, b1, c1, c2, row1, row2, r })
}

/// Residual of a conjugation, restricted to inner modes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugationCheck {
    pub n: usize,
    /// Spectral norm of the component-coupling part on `|k| <= N/2`.
    pub coupling_norm: f64,
    /// The same at truncation `N/2` (inner modes `|k| <= N/4`).
    pub coupling_norm_half: f64,
    pub coupling_ratio: f64,
    /// Spectral norm of the same-component part of the residual.
    pub diagonal_norm: f64,
    pub diagonal_norm_half: f64,
    pub diagonal_ratio: f64,
}

// rows and columns |k| <= m of L G L^{-1}
fn conjugated_inner(l: &GalerkinMatrix, g: &GalerkinMatrix, linv: &GalerkinMatrix, m: usize) -> GalerkinMatrix {
    let n = l.modes();
    let off = 2 * (n - m);
    let d = GalerkinMatrix::dim_for(m);
    let x = complex_product(&l.matrix().rows(off, d).into_owned(), g.matrix());
    let y = complex_product(&x, &linv.matrix().columns(off, d).into_owned());
    GalerkinMatrix::from_matrix(m, y)
}

fn residual_parts(
    sys: &ComplexSystem,
    result: &DiagonalizationResult,
    n: usize,
    conjugate: bool,
) -> Result<(f64, f64), TransformError> {
    let p = galerkin_matrix(&sys.symbol(), n);
    let p3 = galerkin_matrix(&result.p3_symbol(sys), n).inner(n / 2);
    let g = if conjugate {
        let l = result.transform_matrix(n);
        let linv = l.try_inverse().ok_or(TransformError::Singular(n))?;
        conjugated_inner(&l, &p, &linv, n / 2)
    } else {
        p.inner(n / 2)
    };
    let res = g.sub(&p3);
    let coupling = res.component_coupling();
    let same = res.sub(&coupling);
    Ok((coupling.norm2(), same.norm2()))
}

fn check_report(
    sys: &ComplexSystem,
    result: &DiagonalizationResult,
    n: usize,
    conjugate: bool,
) -> Result<ConjugationCheck, TransformError> {
    let (cn, dn) = residual_parts(sys, result, n, conjugate)?;
    let (ch, dh) = residual_parts(sys, result, n / 2, conjugate)?;
    Ok(ConjugationCheck {
        n,
        coupling_norm: cn,
        coupling_norm_half: ch,
        coupling_ratio: ratio(cn, ch),
        diagonal_norm: dn,
        diagonal_norm_half: dh,
        diagonal_ratio: ratio(dn, dh),
    })
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        1.0
    } else {
        a / b
    }
}

/// Compares `Λ P Λ^{-1}` with the decoupled model on `|k| <= N/2`, at `N` and `N/2`.
pub fn verify_diagonalization(
    sys: &ComplexSystem,
    result: &DiagonalizationResult,
    n: usize,
) -> Result<ConjugationCheck, TransformError> {
    check_report(sys, result, n, true)
}

/// The same measurement for the unconjugated `P`.
pub fn raw_coupling_check(
    sys: &ComplexSystem,
    result: &DiagonalizationResult,
    n: usize,
) -> Result<ConjugationCheck, TransformError> {
    check_report(sys, result, n, false)
}

/// Intermediates of the real gauge `Λ_6 Λ_5 Λ_4` for a system normalized
/// to principal scale one. `Λ_4 = I - lambda4`, `Λ_5 = I + lambda5`,
/// `Λ_6 = I + lambda6`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealGaugeResult {
    pub system: RealSystem,
    pub psi4: PeriodicScalar,
    pub psi6: PeriodicScalar,
    pub beta4: MatrixCoefficient,
    pub gamma4: MatrixCoefficient,
    pub gamma5: MatrixCoefficient,
    pub gamma5_sym: MatrixCoefficient,
    pub mu: PeriodicScalar,
    pub lambda4: Symbol,
    pub lambda5: Symbol,
    pub lambda6: Symbol,
    pub r: f64,
}

/// `γ_4` term by term:
/// `γ - ¾ Ψ_4'' I - (1/32)(Ψ_4^2)' J + ⅛ Ψ_4 (βJ - Jβ)`.
pub fn gamma4_terms(beta: &MatrixCoefficient, gamma: &MatrixCoefficient, psi4: &PeriodicScalar) -> Vec<MatrixCoefficient> {
    let j = MatrixCoefficient::j();
    vec![
        gamma.clone(),
        MatrixCoefficient::scalar(psi4.derivative_n(2).scale_re(-0.75)),
        j.scale_fn(&psi4.product(psi4).derivative().scale_re(-1.0 / 32.0)),
        (&beta.matmul(&j) - &j.matmul(beta)).scale_fn(&psi4.scale_re(0.125)),
    ]
}

/// `γ_5` term by term: `γ_4 - 2 ∂(ᵗβ_4) + ½ (tr Jβ)' J`.
pub fn gamma5_terms(gamma4: &MatrixCoefficient, beta4: &MatrixCoefficient, beta: &MatrixCoefficient) -> Vec<MatrixCoefficient> {
    vec![
        gamma4.clone(),
        beta4.transpose().derivative().scale_re(-2.0),
        MatrixCoefficient::j().scale_fn(&trace_j(beta).derivative().scale_re(0.5)),
    ]
}

/// Gauges with the default radius cap.
pub fn real_gauge(sys: &RealSystem, r: Option<f64>) -> Result<RealGaugeResult, TransformError> {
    real_gauge_with_cap(sys, r, RADIUS_CAP)
}

/// Builds the three gauge symbols. Requires both trace conditions; otherwise
/// `Ψ_4` or `Ψ_6` is not periodic.
pub fn real_gauge_with_cap(sys: &RealSystem, r: Option<f64>, cap: f64) -> Result<RealGaugeResult, TransformError> {
    sys.validate()?;
    let sys = sys.normalized();
    let (beta, gamma) = (&sys.beta, &sys.gamma);
    let j = MatrixCoefficient::j();

    let tr_beta = beta.trace().re();
    let psi4 = tr_beta
        .primitive(DEFAULT_TOL)
        .map_err(|source| TransformError::ConditionsViolated { condition: 1, name: "int_tr_beta", source })?;
    let beta4 = beta - &MatrixCoefficient::scalar(psi4.derivative().scale_re(0.5));
    let gamma4 = sum(&gamma4_terms(beta, gamma, &psi4));
    let gamma5 = sum(&gamma5_terms(&gamma4, &beta4, beta));
    let gamma5_sym = (&gamma5 + &gamma5.transpose()).scale_re(0.5);
    let mu = trace_j(&gamma5).scale_re(-0.5);

    let half_tr_jbeta = trace_j(beta).scale_re(0.5);
    let psi6_head = trace_j(gamma)
        .re()
        .primitive(DEFAULT_TOL)
        .map_err(|source| TransformError::ConditionsViolated { condition: 2, name: "int_tr_j_gamma", source })?;
    let psi6 = &(&psi6_head.scale_re(-0.5) - &half_tr_jbeta) - &psi4.product(&psi4).scale_re(1.0 / 32.0);
    // Ψ_6(0) = 0 is not required; only Ψ_6' = μ matters

    let build = |r: f64| {
        vec![
            Symbol::term(j.scale_fn(&psi4.scale_re(0.125)), XiFactor::cutoff_over_i(r, 1)),
            Symbol::term(beta4.matmul(&j).scale_re(0.5), XiFactor::cutoff_over_i(r, 2)),
            Symbol::term(MatrixCoefficient::scalar(psi6.scale_re(0.25)), XiFactor::cutoff_over_i(r, 2)),
        ]
    };
    let r = match r {
        Some(r) => {
            certify(&build(r), r)?;
            r
        }
        None => {
            let scale = (0.125 * psi4.sup_bound())
                .max((0.5 * beta4.sup_bound()).sqrt())
                .max((0.25 * psi6.sup_bound()).sqrt());
            symbols::default_radius(scale, cap, build)?
        }
    };
    let [lambda4, lambda5, lambda6]: [Symbol; 3] = build(r).try_into().expect("three gauge symbols");
    Ok(RealGaugeResult {
        system: sys,
        psi4,
        psi6,
        beta4,
        gamma4,
        gamma5,
        gamma5_sym,
        mu,
        lambda4,
        lambda5,
        lambda6,
        r,
    })
}

impl RealGaugeResult {
    /// The closed form `μ = -tr(Jγ)/2 - (tr(Jβ)/2 + Ψ_4^2/32)'`.
    pub fn mu_closed_form(&self) -> PeriodicScalar {
        let s = &self.system;
        let inner = &trace_j(&s.beta).scale_re(0.5) + &self.psi4.product(&self.psi4).scale_re(1.0 / 32.0);
        &trace_j(&s.gamma).scale_re(-0.5) - &inner.derivative()
    }

    /// Galerkin matrices of `Λ_4`, `Λ_5`, `Λ_6`.
    pub fn factor_matrices(&self, n: usize) -> [GalerkinMatrix; 3] {
        let id = GalerkinMatrix::identity(n);
        [
            id.sub(&galerkin_matrix(&self.lambda4, n)),
            id.add(&galerkin_matrix(&self.lambda5, n)),
            id.add(&galerkin_matrix(&self.lambda6, n)),
        ]
    }

    /// Galerkin matrix of `Λ_6 Λ_5 Λ_4`.
    pub fn transform_matrix(&self, n: usize) -> GalerkinMatrix {
        let [l4, l5, l6] = self.factor_matrices(n);
        l6.matmul(&l5).matmul(&l4)
    }

    /// Symbol of the gauged model operator
    /// `J ∂^4 - ∂ (tr(Jβ)/2) J ∂ + γ_5^sym ∂`.
    pub fn model_symbol(&self) -> Symbol {
        let j = MatrixCoefficient::j();
        let f = trace_j(&self.system.beta).scale_re(0.5);
        Symbol::from_terms(vec![
            SymbolTerm { coef: j.clone(), xi: XiFactor::poly(4) },
            SymbolTerm { coef: j.scale_fn(&f), xi: XiFactor::poly(2) },
            SymbolTerm { coef: j.scale_fn(&f.derivative()).scale(-I), xi: XiFactor::poly(1) },
            SymbolTerm { coef: self.gamma5_sym.scale(I), xi: XiFactor::poly(1) },
        ])
    }

    /// Generator `-(model operator)` on modes `|k| <= n`.
    pub fn model_generator(&self, n: usize) -> GalerkinMatrix {
        galerkin_matrix(&self.model_symbol(), n).scale(Complex64::new(-1.0, 0.0))
    }
}

/// Truncation used to evaluate an `n`-mode inner block without boundary pollution.
fn padded(n: usize, bandwidth: usize) -> usize {
    n + (n / 2).max(8 * bandwidth.max(1))
}

/// `λ_max` of the Hermitian part of the (optionally gauged) generator
/// `-(J ∂^4 + β ∂^2 + γ ∂)` on inner modes `|k| <= n`.
pub fn energy_estimate(sys: &RealSystem, gauge: Option<&RealGaugeResult>, n: usize) -> f64 {
    let norm = sys.normalized();
    let bw = norm.bandwidth().max(gauge.map_or(0, |g| g.psi6.bandwidth()));
    let m = padded(n, bw);
    let g = galerkin_matrix(&norm.operator_symbol(), m).scale(Complex64::new(-1.0, 0.0));
    let inner = match gauge {
        None => g.inner(n),
        Some(res) => {
            let l = res.transform_matrix(m);
            match l.try_inverse() {
                Some(linv) => conjugated_inner(&l, &g, &linv, n),
                None => return f64::INFINITY,
            }
        }
    };
    inner.hermitian_part_max_eigenvalue()
}

/// Energy estimate of the gauged generator of `result.system`.
pub fn verify_energy_estimate(result: &RealGaugeResult, n: usize) -> f64 {
    energy_estimate(&result.system, Some(result), n)
}

/// `Λ G Λ^{-1}` for the gauged real generator at truncation `n`.
pub fn gauged_generator(result: &RealGaugeResult, n: usize) -> Result<GalerkinMatrix, TransformError> {
    let g = galerkin_matrix(&result.system.operator_symbol(), n).scale(Complex64::new(-1.0, 0.0));
    let l = result.transform_matrix(n);
    let linv = l.try_inverse().ok_or(TransformError::Singular(n))?;
    Ok(l.matmul(&g).matmul(&linv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{apply, TruncatedField};
    use crate::wellposed::{check_complex, check_single};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn z() -> PeriodicScalar {
        PeriodicScalar::zero()
    }

    fn swap() -> MatrixCoefficient {
        MatrixCoefficient::from_real_constant([[0.0, 1.0], [1.0, 0.0]])
    }

    // constant 2x2 oracle on plain arrays
    type M2 = [[Complex64; 2]; 2];
    fn mm(a: M2, b: M2) -> M2 {
        let mut o = [[c(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                o[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        o
    }
    fn lin(terms: &[(Complex64, M2)]) -> M2 {
        let mut o = [[c(0.0, 0.0); 2]; 2];
        for (w, m) in terms {
            for i in 0..2 {
                for j in 0..2 {
                    o[i][j] += w * m[i][j];
                }
            }
        }
        o
    }
    fn off(a: M2) -> M2 {
        [[c(0.0, 0.0), a[0][1]], [a[1][0], c(0.0, 0.0)]]
    }
    fn diag(a: M2) -> M2 {
        [[a[0][0], c(0.0, 0.0)], [c(0.0, 0.0), a[1][1]]]
    }
    const EM: M2 = [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(-1.0, 0.0)]];

    fn assert_const(m: &MatrixCoefficient, expect: M2, tol: f64) {
        let v = m.evaluate(0.4);
        for i in 0..2 {
            for j in 0..2 {
                assert!((v[i][j] - expect[i][j]).norm() < tol, "({i},{j}): {} vs {}", v[i][j], expect[i][j]);
            }
        }
        assert_eq!(m.bandwidth(), 0);
    }

    #[test]
    fn b1_examples() {
        let b = MatrixCoefficient::new(PeriodicScalar::cos(1), z(), PeriodicScalar::sin(2), z());
        assert_eq!(compute_b1(&MatrixCoefficient::zero(), &b), b);

        let b1 = compute_b1(&swap(), &MatrixCoefficient::zero());
        assert_const(&b1, [[c(0.5, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-0.5, 0.0)]], 1e-15);

        let a = MatrixCoefficient::new(z(), PeriodicScalar::mode(1, c(1.0, 0.0)), z(), z());
        let b1 = compute_b1(&a, &MatrixCoefficient::zero());
        // A E A^off and A^off E A vanish since a21 = 0; 2i·∂(e^{ix}) = -2 e^{ix}
        assert!(b1.get(0, 1).max_coeff_diff(&PeriodicScalar::mode(1, c(-2.0, 0.0))) < 1e-15);
        assert!(b1.get(0, 0).is_zero() && b1.get(1, 1).is_zero() && b1.get(1, 0).is_zero());
    }

    #[test]
    fn c1_c2_examples() {
        let cc = MatrixCoefficient::new(PeriodicScalar::cos(1), PeriodicScalar::sin(1), z(), z());
        let b = MatrixCoefficient::new(z(), PeriodicScalar::mode(2, c(0.0, 1.0)), PeriodicScalar::cos(3), z());
        let zero = MatrixCoefficient::zero();
        assert_eq!(compute_c1(&zero, &b, &cc), cc);
        let b1 = compute_b1(&zero, &b);
        let expect = &cc + &b1.off().derivative().scale(I * 2.0);
        assert!(compute_c2(&zero, &b1, &cc).max_coeff_diff(&expect) < 1e-15);
        assert!(compute_c2(&zero, &zero, &compute_c1(&zero, &zero, &zero)).is_zero());
    }

    #[test]
    fn constant_matrices_against_oracle() {
        let am: M2 = [[c(0.3, 0.1), c(0.7, -0.2)], [c(-0.4, 0.5), c(0.2, 0.0)]];
        let bm: M2 = [[c(0.1, 0.9), c(-0.6, 0.3)], [c(0.25, -0.1), c(0.0, 0.4)]];
        let cm: M2 = [[c(1.0, 0.0), c(0.0, 0.5)], [c(0.2, 0.2), c(-0.3, 0.1)]];
        let (a, b, cc) = (MatrixCoefficient::from_constant(am), MatrixCoefficient::from_constant(bm), MatrixCoefficient::from_constant(cm));
        let ao = off(am);
        let h = c(0.5, 0.0);
        let q = c(0.25, 0.0);
        let b1 = lin(&[
            (c(1.0, 0.0), bm),
            (h, mm(mm(ao, EM), ao)),
            (-h, mm(mm(am, EM), ao)),
            (-h, mm(mm(ao, EM), am)),
        ]);
        let c1 = lin(&[
            (c(1.0, 0.0), cm),
            (q, mm(mm(mm(mm(am, EM), ao), EM), ao)),
            (q, mm(mm(mm(mm(ao, EM), am), EM), ao)),
            (-q, mm(mm(mm(mm(ao, EM), ao), EM), ao)),
            (-h, mm(mm(bm, EM), ao)),
            (-h, mm(mm(ao, EM), bm)),
        ]);
        let c2 = lin(&[(c(1.0, 0.0), c1), (-h, mm(mm(diag(am), EM), off(b1))), (-h, mm(mm(off(b1), EM), diag(am)))]);
        let b1s = compute_b1(&a, &b);
        assert_const(&b1s, b1, 1e-14);
        let c1s = compute_c1(&a, &b, &cc);
        assert_const(&c1s, c1, 1e-14);
        assert_const(&compute_c2(&a, &b1s, &c1s), c2, 1e-14);
    }

    #[test]
    fn zero_system_diagonalizes_trivially() {
        let res = diagonalize(&ComplexSystem::zero(), None).unwrap();
        assert!(res.lambda1.is_zero() && res.lambda2.is_zero() && res.lambda3.is_zero());
        for row in [&res.row1, &res.row2] {
            assert!(row.a.is_zero() && row.b.is_zero() && row.c.is_zero());
        }
        assert_eq!(res.row1.sign, Sign::Plus);
        assert_eq!(res.row2.sign, Sign::Minus);
        let chk = verify_diagonalization(&ComplexSystem::zero(), &res, 16).unwrap();
        assert_eq!(chk.coupling_norm, 0.0);
        assert_eq!(chk.diagonal_norm, 0.0);
    }

    #[test]
    fn constant_off_diagonal_rows() {
        let sys = ComplexSystem { a: swap(), ..ComplexSystem::zero() };
        let res = diagonalize(&sys, None).unwrap();
        assert!(res.row1.b.max_coeff_diff(&PeriodicScalar::real_constant(0.5)) < 1e-15);
        assert!(res.row2.b.max_coeff_diff(&PeriodicScalar::real_constant(-0.5)) < 1e-15);
        assert!(res.row1.c.max_abs_coeff() < 1e-15);
        assert!(res.row2.c.max_abs_coeff() < 1e-15);
    }

    fn off_diagonal_example() -> ComplexSystem {
        ComplexSystem {
            a: MatrixCoefficient::new(z(), PeriodicScalar::mode(1, c(1.0, 0.0)), PeriodicScalar::mode(-1, c(0.0, 1.0)), z()),
            b: MatrixCoefficient::diagonal(PeriodicScalar::constant(c(0.0, -0.5)), PeriodicScalar::constant(c(0.0, 0.5))),
            ..ComplexSystem::zero()
        }
    }

    #[test]
    fn rows_reproduce_residuals() {
        let sys = off_diagonal_example();
        let res = diagonalize(&sys, None).unwrap();
        let r1 = check_single(&res.row1);
        let r2 = check_single(&res.row2);
        let full = check_complex(&sys);
        assert!((r1.residuals[2].value.re + std::f64::consts::PI).abs() < 1e-12);
        assert!((r2.residuals[2].value.re + std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(full.well_posed, r1.well_posed && r2.well_posed);
    }

    fn row_formulas(sys: &ComplexSystem) -> [PeriodicScalar; 4] {
        let [[a11, a12], [a21, a22]] = &sys.a.entries;
        let (b12, b21) = (sys.b.get(0, 1), sys.b.get(1, 0));
        let p = a12 * a21;
        let dp = p.derivative();
        let mixed = &(a12 * b21) + &(a21 * b12);
        let spread = &p * &(a11 - a22);
        let b111 = sys.b.get(0, 0) + &p.scale_re(0.5);
        let b122 = sys.b.get(1, 1) - &p.scale_re(0.5);
        let c211 = sum_s(&[
            sys.c.get(0, 0).clone(),
            dp.scale(I * 0.5),
            (&a12.derivative() * a21).scale(I * 0.5),
            spread.scale_re(-0.25),
            mixed.scale_re(0.5),
        ]);
        // the a12·a21' term carries a minus sign here, matching the sixth condition
        let c222 = sum_s(&[
            sys.c.get(1, 1).clone(),
            dp.scale(I * -0.5),
            (a12 * &a21.derivative()).scale(I * -0.5),
            spread.scale_re(0.25),
            mixed.scale_re(-0.5),
        ]);
        [b111, b122, c211, c222]
    }

    fn sum_s(t: &[PeriodicScalar]) -> PeriodicScalar {
        t.iter().fold(PeriodicScalar::zero(), |a, b| &a + b)
    }

    fn arb_series(bw: usize, amp: f64) -> impl Strategy<Value = PeriodicScalar> {
        proptest::collection::vec((-amp..amp, -amp..amp), 2 * bw + 1)
            .prop_map(|v| PeriodicScalar::from_dense(v.into_iter().map(|(a, b)| c(a, b)).collect()))
    }

    fn arb_matrix(bw: usize, amp: f64) -> impl Strategy<Value = MatrixCoefficient> {
        (arb_series(bw, amp), arb_series(bw, amp), arb_series(bw, amp), arb_series(bw, amp))
            .prop_map(|(a, b, c, d)| MatrixCoefficient::new(a, b, c, d))
    }

    fn arb_complex(bw: usize, amp: f64) -> impl Strategy<Value = ComplexSystem> {
        (arb_matrix(bw, amp), arb_matrix(bw, amp), arb_matrix(bw, amp))
            .prop_map(|(a, b, c)| ComplexSystem { a, b, c, d: MatrixCoefficient::zero() })
    }

    fn arb_real(bw: usize, amp: f64) -> impl Strategy<Value = RealSystem> {
        (arb_matrix(bw, amp), arb_matrix(bw, amp)).prop_map(|(b, g)| {
            let mut beta = b.re();
            let mut gamma = g.re();
            // zero the means that the two conditions read
            let tb = beta.trace().mean().re;
            beta.entries[0][0] = beta.get(0, 0) - &PeriodicScalar::real_constant(tb);
            let tg = trace_j(&gamma).mean().re;
            gamma.entries[0][1] = gamma.get(0, 1) - &PeriodicScalar::real_constant(tg);
            RealSystem::new(beta, gamma)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn rows_match_closed_forms(sys in arb_complex(2, 0.5)) {
            let res = diagonalize(&sys, Some(8.0)).unwrap();
            let [b111, b122, c211, c222] = row_formulas(&sys);
            prop_assert!(res.row1.b.max_coeff_diff(&b111) < 1e-13);
            prop_assert!(res.row2.b.max_coeff_diff(&b122) < 1e-13);
            prop_assert!(res.row1.c.max_coeff_diff(&c211) < 1e-12);
            prop_assert!(res.row2.c.max_coeff_diff(&c222) < 1e-12);
        }

        #[test]
        fn rows_carry_the_six_residuals(sys in arb_complex(2, 0.5)) {
            let res = diagonalize(&sys, Some(8.0)).unwrap();
            let full = check_complex(&sys);
            let (r1, r2) = (check_single(&res.row1), check_single(&res.row2));
            for (i, &(a, b)) in [(0, 0), (2, 1), (4, 2)].iter().enumerate() {
                prop_assert!((full.residuals[a].value - r1.residuals[b].value).norm() < 1e-12, "row1 {}", i);
                prop_assert!((full.residuals[a + 1].value - r2.residuals[b].value).norm() < 1e-12, "row2 {}", i);
            }
        }

        #[test]
        fn gauge_identities(sys in arb_real(2, 0.3)) {
            let g = real_gauge(&sys, None).unwrap();
            prop_assert!(g.psi4.derivative().max_coeff_diff(&sys.beta.trace()) < 1e-13);
            prop_assert!(g.psi6.derivative().max_coeff_diff(&g.mu) < 1e-12);
            prop_assert!(g.mu.max_coeff_diff(&g.mu_closed_form()) < 1e-12);
            prop_assert!(g.gamma5_sym.max_coeff_diff(&g.gamma5_sym.transpose()) == 0.0);
            let skew = &g.gamma5 - &g.gamma5_sym;
            prop_assert!(skew.max_coeff_diff(&MatrixCoefficient::j().scale_fn(&g.mu)) < 1e-13);
            let b4 = &g.beta4 - &g.beta4.transpose();
            let rhs = MatrixCoefficient::j().scale_fn(&trace_j(&sys.beta).scale_re(-1.0));
            prop_assert!(b4.max_coeff_diff(&rhs) < 1e-14);
            prop_assert!(g.beta4.trace().max_abs_coeff() < 1e-14);
            prop_assert!(g.psi4.is_real_valued(1e-13) && g.psi6.is_real_valued(1e-12));
        }
    }

    #[test]
    fn conjugation_decouples_at_high_modes() {
        let sys = ComplexSystem {
            a: MatrixCoefficient::new(
                PeriodicScalar::cos(1).scale(c(0.0, 0.2)),
                PeriodicScalar::mode(1, c(0.3, 0.1)),
                PeriodicScalar::from_modes([(0, c(0.2, 0.0)), (-1, c(0.0, 0.2))]),
                PeriodicScalar::sin(1).scale_re(0.3),
            ),
            b: MatrixCoefficient::new(PeriodicScalar::cos(2).scale_re(0.2), PeriodicScalar::sin(1).scale_re(0.3), PeriodicScalar::real_constant(0.1), z()),
            c: MatrixCoefficient::new(z(), PeriodicScalar::cos(1).scale_re(0.2), PeriodicScalar::mode(2, c(0.1, 0.1)), z()),
            d: MatrixCoefficient::identity().scale_re(0.3),
        };
        let res = diagonalize(&sys, None).unwrap();
        let chk = verify_diagonalization(&sys, &res, 64).unwrap();
        let raw = raw_coupling_check(&sys, &res, 64).unwrap();
        assert!(chk.coupling_ratio <= 1.5, "{chk:?}");
        assert!(chk.diagonal_ratio <= 1.5, "{chk:?}");
        assert!(raw.coupling_ratio >= 6.0, "{raw:?}");
    }

    #[test]
    fn real_gauge_examples() {
        let g = real_gauge(&RealSystem::default(), None).unwrap();
        assert!(g.psi4.is_zero() && g.psi6.is_zero() && g.gamma5.is_zero());
        assert!(g.lambda4.is_zero() && g.lambda5.is_zero() && g.lambda6.is_zero());
        assert!(verify_energy_estimate(&g, 8).abs() < 1e-9);

        let sys = RealSystem::new(swap(), MatrixCoefficient::zero());
        let g = real_gauge(&sys, None).unwrap();
        assert!(g.psi4.is_zero());
        assert_eq!(g.beta4, swap());
        assert!(g.gamma4.is_zero());

        let sys = RealSystem::new(MatrixCoefficient::zero(), MatrixCoefficient::j());
        match real_gauge(&sys, None) {
            Err(TransformError::ConditionsViolated { condition, .. }) => assert_eq!(condition, 2),
            other => panic!("{other:?}"),
        }
        let sys = RealSystem::new(MatrixCoefficient::identity(), MatrixCoefficient::zero());
        assert!(matches!(real_gauge(&sys, None), Err(TransformError::ConditionsViolated { condition: 1, .. })));
    }

    #[test]
    fn gamma_terms_are_pinned() {
        // β = [[cos x, sin x], [0, -cos x]] + ..., γ = 0: each displayed term checked separately
        let beta = MatrixCoefficient::new(
            PeriodicScalar::cos(1),
            PeriodicScalar::sin(1),
            PeriodicScalar::real_constant(0.5),
            PeriodicScalar::sin(2),
        );
        let psi4 = beta.trace().primitive(DEFAULT_TOL).unwrap();
        let t = gamma4_terms(&beta, &MatrixCoefficient::zero(), &psi4);
        // Ψ_4 = sin x + (1 - cos 2x)/2, Ψ_4'' = -sin x + 2 cos 2x
        let psi4_expect = &(&PeriodicScalar::sin(1) + &PeriodicScalar::real_constant(0.5)) - &PeriodicScalar::cos(2).scale_re(0.5);
        assert!(psi4.max_coeff_diff(&psi4_expect) < 1e-15);
        let second = &PeriodicScalar::sin(1).scale_re(0.75) - &PeriodicScalar::cos(2).scale_re(1.5);
        assert!(t[1].max_coeff_diff(&MatrixCoefficient::scalar(second)) < 1e-15);
        let sq = psi4_expect.product(&psi4_expect).derivative().scale_re(-1.0 / 32.0);
        assert!(t[2].max_coeff_diff(&MatrixCoefficient::j().scale_fn(&sq)) < 1e-15);
        // βJ - Jβ = [[β12+β21, -β11+β22], [-β11+β22, -β12-β21]]
        let (b11, b12, b21, b22) = (beta.get(0, 0), beta.get(0, 1), beta.get(1, 0), beta.get(1, 1));
        let comm = MatrixCoefficient::new(b12 + b21, b22 - b11, b22 - b11, -&(b12 + b21));
        assert!(t[3].max_coeff_diff(&comm.scale_fn(&psi4.scale_re(0.125))) < 1e-15);

        let beta4 = &beta - &MatrixCoefficient::scalar(beta.trace().scale_re(0.5));
        let g4 = sum(&t);
        let t5 = gamma5_terms(&g4, &beta4, &beta);
        assert_eq!(t5[0], g4);
        assert!(t5[1].max_coeff_diff(&beta4.transpose().derivative().scale_re(-2.0)) < 1e-15);
        let tj = b12 - b21;
        assert!(t5[2].max_coeff_diff(&MatrixCoefficient::j().scale_fn(&tj.derivative().scale_re(0.5))) < 1e-15);
    }

    #[test]
    fn gauge_factors_preserve_reality() {
        let sys = RealSystem::new(
            MatrixCoefficient::new(PeriodicScalar::cos(1), PeriodicScalar::sin(2), PeriodicScalar::cos(2).scale_re(0.3), PeriodicScalar::sin(1)),
            MatrixCoefficient::new(PeriodicScalar::sin(1), PeriodicScalar::cos(1), PeriodicScalar::real_constant(0.0), PeriodicScalar::cos(2)),
        );
        let g = real_gauge(&sys, Some(4.0)).unwrap();
        let v = TruncatedField::from_components(24, &(&PeriodicScalar::cos(7) + &PeriodicScalar::sin(3)), &PeriodicScalar::cos(11));
        for s in [&g.lambda4, &g.lambda5, &g.lambda6] {
            let out = apply(s, &v);
            assert!(out.imag_part_bound() < 1e-12);
            assert!(out.vector().norm() > 0.0);
        }
    }

    #[test]
    fn energy_estimate_bounded_after_gauge() {
        let sys = RealSystem::new(
            MatrixCoefficient::new(
                PeriodicScalar::cos(1).scale_re(0.4),
                PeriodicScalar::sin(2).scale_re(0.3),
                PeriodicScalar::cos(1).scale_re(-0.2),
                PeriodicScalar::sin(1).scale_re(0.3),
            ),
            MatrixCoefficient::new(
                PeriodicScalar::sin(1).scale_re(0.2),
                PeriodicScalar::cos(2).scale_re(0.3),
                PeriodicScalar::cos(1).scale_re(0.1),
                PeriodicScalar::real_constant(0.2),
            ),
        );
        let g = real_gauge(&sys, None).unwrap();
        let vals: Vec<f64> = [16, 32, 64].iter().map(|&n| verify_energy_estimate(&g, n)).collect();
        let ungauged: Vec<f64> = [16, 32, 64].iter().map(|&n| energy_estimate(&sys, None, n)).collect();
        let (lo, hi) = (vals.iter().cloned().fold(f64::MAX, f64::min), vals.iter().cloned().fold(f64::MIN, f64::max));
        assert!(hi <= 1.2 * lo, "{vals:?} (ungauged {ungauged:?})");
        assert!(ungauged[2] > 4.0 * ungauged[0], "{ungauged:?}");
    }

    #[test]
    fn violating_energy_grows() {
        let sys = RealSystem::new(MatrixCoefficient::identity(), MatrixCoefficient::zero());
        let a = energy_estimate(&sys, None, 16);
        let b = energy_estimate(&sys, None, 64);
        assert!((a - 256.0).abs() < 1e-8 && (b - 4096.0).abs() < 1e-7, "{a} {b}");
    }

    #[test]
    fn model_generator_has_bounded_symmetric_part() {
        let sys = RealSystem::new(
            MatrixCoefficient::new(PeriodicScalar::cos(1), PeriodicScalar::sin(2), PeriodicScalar::cos(2).scale_re(0.3), PeriodicScalar::sin(1)),
            MatrixCoefficient::new(PeriodicScalar::sin(1), PeriodicScalar::cos(1), PeriodicScalar::real_constant(0.0), PeriodicScalar::cos(2)),
        );
        let g = real_gauge(&sys, None).unwrap();
        let e16 = g.model_generator(16).hermitian_part_max_eigenvalue();
        let e64 = g.model_generator(64).hermitian_part_max_eigenvalue();
        assert!(e64 <= 1.05 * e16 + 1e-12, "{e16} {e64}");
    }
}
