//! Periodic pseudodifferential symbols `q(x, ξ) = sum_j f_j(x) g_j(ξ)` with
//! 2x2 matrix coefficients, their composition expansion, and their action on
//! Fourier-truncated fields.
//!
//! Quantization is on the left: `(Qu)(x) = sum_k e^{ikx} q(x, k) û_k`. A
//! truncated field stores the amplitudes for `|k| <= N` interleaved by
//! component, so mode `k`, component `c` sits at index `2(k + N) + c`.

use std::cmp::Ordering;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::periodic::{MatrixCoefficient, PeriodicScalar};

/// Expansion terms kept by [`compose`]: `k = 0..=MAX_EXPANSION`.
pub const MAX_EXPANSION: u32 = 4;
/// Largest cutoff radius tried by [`default_radius`].
pub const RADIUS_CAP: f64 = 16384.0;
/// Beyond this truncation the norm certificate switches from an SVD to a
/// Schur-type upper bound.
const DENSE_CERTIFICATE_MAX_N: usize = 256;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymbolError {
    #[error("perturbation norm {norm:.4} is not below 1/2; increase the cutoff radius")]
    NotDiagonallyDominant { norm: f64 },
    #[error("no admissible cutoff radius up to {cap}")]
    RadiusCapExceeded { cap: f64 },
    #[error("input field is not real-valued (conjugate-symmetry defect {defect:e})")]
    NonRealInput { defect: f64 },
}

/// `i^p` for `p` taken mod 4.
pub fn i_pow(p: i32) -> Complex64 {
    match p.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => I,
        2 => Complex64::new(-1.0, 0.0),
        _ => -I,
    }
}

// ---------------------------------------------------------------- cutoff

// Truncated Taylor arithmetic: a jet holds f(s0 + δ) = sum_n c_n δ^n, n <= D.
fn jet_exp(u: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; u.len()];
    y[0] = u[0].exp();
    for n in 1..u.len() {
        let s: f64 = (1..=n).map(|k| k as f64 * u[k] * y[n - k]).sum();
        y[n] = s / n as f64;
    }
    y
}

fn jet_div(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; a.len()];
    for n in 0..a.len() {
        let s: f64 = (1..=n).map(|k| b[k] * q[n - k]).sum();
        q[n] = (a[n] - s) / b[0];
    }
    q
}

/// Derivatives `ψ^{(0)}(s), ..., ψ^{(d)}(s)` of the smooth step
/// `ψ(s) = h(s) / (h(s) + h(1 - s))`, `h(s) = e^{-1/s}` for `s > 0`.
pub fn smooth_step_derivatives(s: f64, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d + 1];
    if s <= 0.0 {
        return out;
    }
    if s >= 1.0 {
        out[0] = 1.0;
        return out;
    }
    let t = 1.0 - s;
    // -1/(s + δ) and -1/(t - δ)
    let u: Vec<f64> = (0..=d).map(|n| -(-1.0f64).powi(n as i32) / s.powi(n as i32 + 1)).collect();
    let w: Vec<f64> = (0..=d).map(|n| -1.0 / t.powi(n as i32 + 1)).collect();
    let hu = jet_exp(&u);
    let hw = jet_exp(&w);
    let den: Vec<f64> = hu.iter().zip(&hw).map(|(a, b)| a + b).collect();
    let q = jet_div(&hu, &den);
    let mut fact = 1.0;
    for n in 0..=d {
        if n > 0 {
            fact *= n as f64;
        }
        out[n] = q[n] * fact;
    }
    out
}

/// `∂_ξ^d φ_r(ξ)` where `φ_r(ξ) = ψ(|ξ| - r)`: zero for `|ξ| <= r`, one for
/// `|ξ| >= r + 1`, even in `ξ`.
pub fn cutoff(r: f64, xi: f64, d: u32) -> f64 {
    let s = xi.abs() - r;
    let v = smooth_step_derivatives(s, d as usize)[d as usize];
    if xi < 0.0 && d % 2 == 1 {
        -v
    } else {
        v
    }
}

// ---------------------------------------------------------------- ξ-factors

/// `i^{i_power} ξ^{power} prod_j ∂_ξ^{d_j} φ_{r_j}(ξ)`, the normal form of
/// cutoff-regularized negative powers and their derivatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffPower {
    pub power: i32,
    /// `(r, d)` pairs, sorted; never empty.
    pub factors: Vec<(f64, u32)>,
    pub i_power: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum XiFactor {
    /// `ξ^m`.
    Poly { m: u32 },
    Cutoff(CutoffPower),
}

fn sort_factors(f: &mut [(f64, u32)]) {
    f.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
}

impl XiFactor {
    pub fn one() -> Self {
        XiFactor::Poly { m: 0 }
    }

    pub fn poly(m: u32) -> Self {
        XiFactor::Poly { m }
    }

    /// `φ_r(ξ) / ξ^l`.
    pub fn cutoff_over(r: f64, l: u32) -> Self {
        XiFactor::Cutoff(CutoffPower { power: -(l as i32), factors: vec![(r, 0)], i_power: 0 })
    }

    /// `φ_r(ξ) / (iξ)^l`.
    pub fn cutoff_over_i(r: f64, l: u32) -> Self {
        XiFactor::Cutoff(CutoffPower {
            power: -(l as i32),
            factors: vec![(r, 0)],
            i_power: (-(l as i32)).rem_euclid(4) as u8,
        })
    }

    /// Symbol order: `m` for `ξ^m`, `power - sum d` for cutoff factors.
    pub fn order(&self) -> i32 {
        match self {
            XiFactor::Poly { m } => *m as i32,
            XiFactor::Cutoff(c) => c.power - c.factors.iter().map(|f| f.1 as i32).sum::<i32>(),
        }
    }

    pub fn evaluate(&self, xi: f64) -> Complex64 {
        match self {
            XiFactor::Poly { m } => Complex64::new(xi.powi(*m as i32), 0.0),
            XiFactor::Cutoff(c) => {
                let mut v = 1.0;
                for &(r, d) in &c.factors {
                    v *= cutoff(r, xi, d);
                    if v == 0.0 {
                        return ZERO;
                    }
                }
                i_pow(c.i_power as i32) * (v * xi.powi(c.power))
            }
        }
    }

    /// True when `g(-ξ) = conj(g(ξ))`, i.e. the multiplier maps real
    /// functions to real functions.
    pub fn is_reality_preserving(&self) -> bool {
        match self {
            XiFactor::Poly { m } => m % 2 == 0,
            XiFactor::Cutoff(c) => {
                let parity = (c.power + c.factors.iter().map(|f| f.1 as i32).sum::<i32>()).rem_euclid(2);
                // ξ-part has parity `parity`; i^p conjugates to i^{-p}
                (parity == 0 && c.i_power % 2 == 0) || (parity == 1 && c.i_power % 2 == 1)
            }
        }
    }

    pub fn product(&self, o: &Self) -> Self {
        match (self, o) {
            (XiFactor::Poly { m }, XiFactor::Poly { m: n }) => XiFactor::Poly { m: m + n },
            (XiFactor::Poly { m }, XiFactor::Cutoff(c)) | (XiFactor::Cutoff(c), XiFactor::Poly { m }) => {
                XiFactor::Cutoff(CutoffPower { power: c.power + *m as i32, ..c.clone() })
            }
            (XiFactor::Cutoff(a), XiFactor::Cutoff(b)) => {
                let mut factors = a.factors.clone();
                factors.extend_from_slice(&b.factors);
                sort_factors(&mut factors);
                XiFactor::Cutoff(CutoffPower {
                    power: a.power + b.power,
                    factors,
                    i_power: (a.i_power + b.i_power) % 4,
                })
            }
        }
    }

    /// `∂_ξ` as a list of `(weight, factor)` monomials.
    pub fn derivative(&self) -> Vec<(f64, XiFactor)> {
        let mut out: Vec<(f64, XiFactor)> = Vec::new();
        let mut push = |w: f64, f: XiFactor| {
            if let Some(e) = out.iter_mut().find(|e| e.1 == f) {
                e.0 += w;
            } else {
                out.push((w, f));
            }
        };
        match self {
            XiFactor::Poly { m } => {
                if *m > 0 {
                    push(*m as f64, XiFactor::Poly { m: m - 1 });
                }
            }
            XiFactor::Cutoff(c) => {
                if c.power != 0 {
                    push(c.power as f64, XiFactor::Cutoff(CutoffPower { power: c.power - 1, ..c.clone() }));
                }
                for i in 0..c.factors.len() {
                    let mut factors = c.factors.clone();
                    factors[i].1 += 1;
                    sort_factors(&mut factors);
                    push(1.0, XiFactor::Cutoff(CutoffPower { factors, ..c.clone() }));
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------- symbols

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolTerm {
    pub coef: MatrixCoefficient,
    pub xi: XiFactor,
}

/// A finite sum of separable terms `coef(x) · xi(ξ)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Symbol {
    terms: Vec<SymbolTerm>,
    /// Order of the discarded tail, when the symbol came from a truncated expansion.
    remainder_order: Option<i32>,
}

impl Symbol {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn term(coef: MatrixCoefficient, xi: XiFactor) -> Self {
        Self::from_terms(vec![SymbolTerm { coef, xi }])
    }

    /// `sum_m coef_m ξ^m`.
    pub fn polynomial(coefs: &[(u32, MatrixCoefficient)]) -> Self {
        Self::from_terms(coefs.iter().map(|(m, c)| SymbolTerm { coef: c.clone(), xi: XiFactor::poly(*m) }).collect())
    }

    pub fn from_terms(terms: Vec<SymbolTerm>) -> Self {
        Self { terms, remainder_order: None }.simplified()
    }

    pub fn terms(&self) -> &[SymbolTerm] {
        &self.terms
    }

    pub fn remainder_order(&self) -> Option<i32> {
        self.remainder_order
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest term order; `None` for the zero symbol.
    pub fn order(&self) -> Option<i32> {
        self.terms.iter().map(|t| t.xi.order()).max()
    }

    /// Merges terms with equal ξ-factors and drops zero coefficients.
    fn simplified(self) -> Self {
        let mut merged: Vec<SymbolTerm> = Vec::new();
        for t in self.terms {
            if let Some(e) = merged.iter_mut().find(|e| e.xi == t.xi) {
                e.coef = &e.coef + &t.coef;
            } else {
                merged.push(t);
            }
        }
        merged.retain(|t| !t.coef.is_zero());
        Self { terms: merged, remainder_order: self.remainder_order }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&o.terms);
        let remainder_order = match (self.remainder_order, o.remainder_order) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        Self { terms, remainder_order }.simplified()
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            terms: self.terms.iter().map(|t| SymbolTerm { coef: t.coef.scale(s), xi: t.xi.clone() }).collect(),
            remainder_order: self.remainder_order,
        }
        .simplified()
    }

    /// Left multiplication of every coefficient by a matrix function.
    pub fn left_mul(&self, m: &MatrixCoefficient) -> Self {
        Self {
            terms: self.terms.iter().map(|t| SymbolTerm { coef: m.matmul(&t.coef), xi: t.xi.clone() }).collect(),
            remainder_order: self.remainder_order,
        }
        .simplified()
    }

    pub fn derivative_x(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|t| SymbolTerm { coef: t.coef.derivative(), xi: t.xi.clone() }).collect(),
            remainder_order: self.remainder_order,
        }
        .simplified()
    }

    /// Keeps only terms whose ξ-factor satisfies `keep`.
    pub fn filter_terms(&self, keep: impl Fn(&XiFactor) -> bool) -> Self {
        Self { terms: self.terms.iter().filter(|t| keep(&t.xi)).cloned().collect(), remainder_order: self.remainder_order }
    }

    /// Maps every coefficient.
    pub fn map_coefs(&self, f: impl Fn(&MatrixCoefficient) -> MatrixCoefficient) -> Self {
        Self {
            terms: self.terms.iter().map(|t| SymbolTerm { coef: f(&t.coef), xi: t.xi.clone() }).collect(),
            remainder_order: self.remainder_order,
        }
        .simplified()
    }

    pub fn evaluate(&self, x: f64, xi: f64) -> [[Complex64; 2]; 2] {
        let mut out = [[ZERO; 2]; 2];
        for t in &self.terms {
            let g = t.xi.evaluate(xi);
            if g == ZERO {
                continue;
            }
            let c = t.coef.evaluate(x);
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] += c[i][j] * g;
                }
            }
        }
        out
    }

    pub fn coefficient_bandwidth(&self) -> usize {
        self.terms.iter().map(|t| t.coef.bandwidth()).max().unwrap_or(0)
    }
}

/// The expansion `sum_{k <= 4} (-i)^k/k! ∂_ξ^k p ∂_x^k q`, keeping terms of
/// order at least `order_cut`.
pub fn compose(p: &Symbol, q: &Symbol, order_cut: i32) -> Symbol {
    let mut terms = Vec::new();
    let mut discarded: Option<i32> = None;
    let mut note = |o: i32| discarded = Some(discarded.map_or(o, |d: i32| d.max(o)));
    for tp in &p.terms {
        for tq in &q.terms {
            let mut dxi: Vec<(f64, XiFactor)> = vec![(1.0, tp.xi.clone())];
            let mut dq = tq.coef.clone();
            let mut fact = 1.0;
            for k in 0..=MAX_EXPANSION + 1 {
                if k > 0 {
                    let mut next: Vec<(f64, XiFactor)> = Vec::new();
                    for (w, f) in &dxi {
                        for (w2, f2) in f.derivative() {
                            if let Some(e) = next.iter_mut().find(|e| e.1 == f2) {
                                e.0 += w * w2;
                            } else {
                                next.push((w * w2, f2));
                            }
                        }
                    }
                    next.retain(|e| e.0 != 0.0);
                    dxi = next;
                    dq = dq.derivative();
                    fact *= k as f64;
                }
                if dxi.is_empty() || dq.is_zero() {
                    break;
                }
                if k > MAX_EXPANSION {
                    for (_, f) in &dxi {
                        note(f.product(&tq.xi).order());
                    }
                    break;
                }
                let weight = i_pow(-(k as i32)) / fact;
                let base = tp.coef.matmul(&dq);
                for (w, f) in &dxi {
                    let xi = f.product(&tq.xi);
                    if xi.order() < order_cut {
                        continue;
                    }
                    terms.push(SymbolTerm { coef: base.scale(weight * *w), xi });
                }
            }
        }
    }
    // terms beyond the expansion cap may sit above the cut
    let mut rem = discarded.map_or(order_cut - 1, |d| d.max(order_cut - 1));
    // an input tail propagates through the other factor
    if let (Some(r), Some(o)) = (p.remainder_order, q.order()) {
        rem = rem.max(r + o);
    }
    if let (Some(o), Some(r)) = (p.order(), q.remainder_order) {
        rem = rem.max(o + r);
    }
    Symbol { terms, remainder_order: Some(rem) }.simplified()
}

// ---------------------------------------------------------------- truncated space

/// Fourier amplitudes of a `C^2`-valued function on modes `|k| <= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedField {
    n: usize,
    data: DVector<Complex64>,
}

impl TruncatedField {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: DVector::zeros(2 * (2 * n + 1)) }
    }

    pub fn basis(n: usize, k: i64, component: usize) -> Self {
        let mut f = Self::zeros(n);
        f.set(k, component, Complex64::new(1.0, 0.0));
        f
    }

    /// Projects two scalar series onto modes `|k| <= n`.
    pub fn from_components(n: usize, u1: &PeriodicScalar, u2: &PeriodicScalar) -> Self {
        let mut f = Self::zeros(n);
        for k in -(n as i64)..=n as i64 {
            f.set(k, 0, u1.coeff(k));
            f.set(k, 1, u2.coeff(k));
        }
        f
    }

    pub fn from_vector(n: usize, data: DVector<Complex64>) -> Self {
        assert_eq!(data.len(), 2 * (2 * n + 1));
        Self { n, data }
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn index(n: usize, k: i64, component: usize) -> usize {
        2 * (k + n as i64) as usize + component
    }

    pub fn get(&self, k: i64, component: usize) -> Complex64 {
        if k.unsigned_abs() as usize > self.n {
            ZERO
        } else {
            self.data[Self::index(self.n, k, component)]
        }
    }

    pub fn set(&mut self, k: i64, component: usize, v: Complex64) {
        let i = Self::index(self.n, k, component);
        self.data[i] = v;
    }

    pub fn vector(&self) -> &DVector<Complex64> {
        &self.data
    }

    pub fn component(&self, c: usize) -> PeriodicScalar {
        PeriodicScalar::from_modes((-(self.n as i64)..=self.n as i64).map(|k| (k, self.get(k, c))))
    }

    /// Zero-pads or truncates to modes `|k| <= m`.
    pub fn resized(&self, m: usize) -> Self {
        let mut f = Self::zeros(m);
        let top = m.min(self.n) as i64;
        for k in -top..=top {
            for c in 0..2 {
                f.set(k, c, self.get(k, c));
            }
        }
        f
    }

    /// Parseval norm `sqrt(2π sum |û_k|^2)`.
    pub fn norm(&self) -> f64 {
        (2.0 * std::f64::consts::PI).sqrt() * self.data.norm()
    }

    /// Upper bound for `sup_x |Im u(x)|` over both components.
    pub fn imag_part_bound(&self) -> f64 {
        (0..2)
            .map(|c| {
                (-(self.n as i64)..=self.n as i64)
                    .map(|k| (self.get(k, c) - self.get(-k, c).conj()).norm() / 2.0)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Largest violation of `û_{-k} = conj(û_k)`.
    pub fn reality_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for c in 0..2 {
            for k in -(self.n as i64)..=self.n as i64 {
                d = d.max((self.get(k, c) - self.get(-k, c).conj()).norm());
            }
        }
        d
    }
}

/// Dense matrix of an operator on the truncated space, in the interleaved
/// `2(k + N) + c` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinMatrix {
    n: usize,
    data: DMatrix<Complex64>,
}

impl GalerkinMatrix {
    pub fn dim_for(n: usize) -> usize {
        2 * (2 * n + 1)
    }

    pub fn zeros(n: usize) -> Self {
        let d = Self::dim_for(n);
        Self { n, data: DMatrix::zeros(d, d) }
    }

    pub fn identity(n: usize) -> Self {
        let d = Self::dim_for(n);
        Self { n, data: DMatrix::identity(d, d) }
    }

    pub fn from_matrix(n: usize, data: DMatrix<Complex64>) -> Self {
        assert_eq!(data.nrows(), Self::dim_for(n));
        assert!(data.is_square());
        Self { n, data }
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.data
    }

    /// 2x2 block for output mode `j`, input mode `k`.
    pub fn block(&self, j: i64, k: i64) -> [[Complex64; 2]; 2] {
        let (r, c) = (TruncatedField::index(self.n, j, 0), TruncatedField::index(self.n, k, 0));
        [[self.data[(r, c)], self.data[(r, c + 1)]], [self.data[(r + 1, c)], self.data[(r + 1, c + 1)]]]
    }

    pub fn matmul(&self, o: &Self) -> Self {
        assert_eq!(self.n, o.n);
        Self { n: self.n, data: complex_product(&self.data, &o.data) }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { n: self.n, data: &self.data + &o.data }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { n: self.n, data: &self.data - &o.data }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { n: self.n, data: &self.data * s }
    }

    pub fn apply(&self, u: &TruncatedField) -> TruncatedField {
        assert_eq!(self.n, u.modes());
        TruncatedField::from_vector(self.n, &self.data * u.vector())
    }

    pub fn try_inverse(&self) -> Option<Self> {
        self.data.clone().try_inverse().map(|data| Self { n: self.n, data })
    }

    /// Largest singular value.
    pub fn norm2(&self) -> f64 {
        spectral_norm(&self.data)
    }

    /// Restriction to the inner modes `|k| <= m`.
    pub fn inner(&self, m: usize) -> Self {
        assert!(m <= self.n);
        let off = 2 * (self.n - m);
        let d = Self::dim_for(m);
        Self { n: m, data: self.data.view((off, off), (d, d)).into_owned() }
    }

    /// Entries coupling the two components (row component ≠ column component).
    pub fn component_coupling(&self) -> Self {
        let mut data = self.data.clone();
        for ((r, c), v) in data.iter_mut().enumerate().map(|(i, v)| ((i % self.data.nrows(), i / self.data.nrows()), v)) {
            if r % 2 == c % 2 {
                *v = ZERO;
            }
        }
        Self { n: self.n, data }
    }

    /// Largest eigenvalue of the Hermitian part `(G + G^*)/2`.
    pub fn hermitian_part_max_eigenvalue(&self) -> f64 {
        hermitian_max_eigenvalue(&self.data)
    }

    /// Textual dump: a header line
    /// `# galerkin N=<N> dim=<d> layout=row-major index=2*(k+N)+component`
    /// then one line per row of space-separated `re im` pairs.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.data.nrows();
        writeln!(w, "# galerkin N={} dim={} layout=row-major index=2*(k+N)+component", self.n, d)?;
        for r in 0..d {
            let row: Vec<String> =
                (0..d).map(|c| format!("{:.17e} {:.17e}", self.data[(r, c)].re, self.data[(r, c)].im)).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// `a * b` through four real products, which go through the optimized
/// real kernel instead of the generic complex loop.
pub fn complex_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    re.zip_map(&im, Complex64::new)
}

pub(crate) fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    // the unbounded iteration can stall on matrices spanning ~17 decades
    let tol = f64::EPSILON * 4.0;
    match m.clone().try_svd(false, false, tol, 100_000) {
        Some(svd) => svd.singular_values.max(),
        None => {
            let gram = complex_product(&m.adjoint(), m);
            gram.symmetric_eigenvalues().max().max(0.0).sqrt()
        }
    }
}

pub(crate) fn hermitian_max_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

// dense per-term data for fast assembly
struct TermTable {
    bw: i64,
    // coef[m + bw] = 2x2 amplitude of mode m
    coef: Vec<[[Complex64; 2]; 2]>,
}

fn term_table(c: &MatrixCoefficient) -> TermTable {
    let bw = c.bandwidth() as i64;
    let coef = (-bw..=bw)
        .map(|m| {
            let e = &c.entries;
            [[e[0][0].coeff(m), e[0][1].coeff(m)], [e[1][0].coeff(m), e[1][1].coeff(m)]]
        })
        .collect();
    TermTable { bw, coef }
}

/// Block `(j, k)` is `sum_terms f̂_{j-k} g(k)`.
pub fn galerkin_matrix(q: &Symbol, n: usize) -> GalerkinMatrix {
    let mut g = GalerkinMatrix::zeros(n);
    let ni = n as i64;
    for t in &q.terms {
        let table = term_table(&t.coef);
        for k in -ni..=ni {
            let gk = t.xi.evaluate(k as f64);
            if gk == ZERO {
                continue;
            }
            let col = TruncatedField::index(n, k, 0);
            for m in -table.bw..=table.bw {
                let j = k + m;
                if j.abs() > ni {
                    continue;
                }
                let row = TruncatedField::index(n, j, 0);
                let f = &table.coef[(m + table.bw) as usize];
                for (a, fa) in f.iter().enumerate() {
                    for (b, &fab) in fa.iter().enumerate() {
                        if fab != ZERO {
                            g.data[(row + a, col + b)] += fab * gk;
                        }
                    }
                }
            }
        }
    }
    g
}

/// `(Qu)(x) = sum_k e^{ikx} q(x, k) û_k`, projected back to `|k| <= N`.
pub fn apply(q: &Symbol, u: &TruncatedField) -> TruncatedField {
    let n = u.modes();
    let ni = n as i64;
    let mut out = TruncatedField::zeros(n);
    for t in &q.terms {
        let table = term_table(&t.coef);
        for k in -ni..=ni {
            let gk = t.xi.evaluate(k as f64);
            if gk == ZERO {
                continue;
            }
            let v = [u.get(k, 0) * gk, u.get(k, 1) * gk];
            for m in -table.bw..=table.bw {
                let j = k + m;
                if j.abs() > ni {
                    continue;
                }
                let f = &table.coef[(m + table.bw) as usize];
                for (a, fa) in f.iter().enumerate() {
                    let add = fa[0] * v[0] + fa[1] * v[1];
                    let i = TruncatedField::index(n, j, a);
                    out.data[i] += add;
                }
            }
        }
    }
    out
}

/// Largest singular value of the Galerkin matrix of `q` at truncation `n`.
pub fn operator_norm_estimate(q: &Symbol, n: usize) -> f64 {
    galerkin_matrix(q, n).norm2()
}

/// Rigorous upper bound for the Galerkin operator norm:
/// `sum_terms sum_m |f̂_m|_2 · max_{|k| <= N} |g(k)|`.
pub fn operator_norm_bound(q: &Symbol, n: usize) -> f64 {
    let ni = n as i64;
    q.terms
        .iter()
        .map(|t| {
            let table = term_table(&t.coef);
            let fsum: f64 = table.coef.iter().map(|b| spectral_norm(&DMatrix::from_fn(2, 2, |i, j| b[i][j]))).sum();
            let gmax = (0..=ni).map(|k| t.xi.evaluate(k as f64).norm().max(t.xi.evaluate(-k as f64).norm())).fold(0.0, f64::max);
            fsum * gmax
        })
        .sum()
}

/// The certificate used to admit a cutoff radius: the SVD norm for moderate
/// truncations, the Schur-type bound beyond that.
pub fn norm_certificate(q: &Symbol, n: usize) -> f64 {
    if n <= DENSE_CERTIFICATE_MAX_N {
        operator_norm_estimate(q, n)
    } else {
        operator_norm_bound(q, n)
    }
}

/// `(I + Λ̃)^{-1}` on the truncated space, given the perturbation `Λ̃`.
/// Refuses when `‖Λ̃‖ >= 1/2`.
pub fn neumann_inverse(perturbation: &GalerkinMatrix) -> Result<GalerkinMatrix, SymbolError> {
    let norm = perturbation.norm2();
    if norm >= 0.5 {
        return Err(SymbolError::NotDiagonallyDominant { norm });
    }
    let full = GalerkinMatrix::identity(perturbation.n).add(perturbation);
    full.try_inverse().ok_or(SymbolError::NotDiagonallyDominant { norm })
}

/// Applies the scalar multiplier `φ_r(D)/(iD)^l` to both components of a
/// real field.
pub fn p_multiplier(l: u32, r: f64, v: &TruncatedField, tol: f64) -> Result<TruncatedField, SymbolError> {
    let defect = v.reality_defect();
    if defect > tol {
        return Err(SymbolError::NonRealInput { defect });
    }
    let q = Symbol::term(MatrixCoefficient::identity(), XiFactor::cutoff_over_i(r, l));
    Ok(apply(&q, v))
}

/// Smallest integer radius `r >= max(8, ceil(4 * scale))` for which every
/// perturbation built by `build(r)` has norm certificate below 1/2 at
/// truncation `2r`.
pub fn default_radius<F: Fn(f64) -> Vec<Symbol>>(scale: f64, cap: f64, build: F) -> Result<f64, SymbolError> {
    let mut r = (4.0 * scale).ceil().max(8.0);
    let mut steps = 0;
    while r <= cap {
        let ok = build(r).iter().all(|s| norm_certificate(s, 2 * r as usize) < 0.5);
        if ok {
            return Ok(r);
        }
        steps += 1;
        // linear search first, then geometric so huge coefficients stay affordable
        r = if steps < 32 { r + 1.0 } else { (r * 1.25).ceil() };
    }
    Err(SymbolError::RadiusCapExceeded { cap })
}
