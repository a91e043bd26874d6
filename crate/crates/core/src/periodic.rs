//! Finite Fourier series on the circle and 2x2 matrices of them.
//!
//! A [`PeriodicScalar`] stores the amplitudes `c_k` for `|k| <= K`, so that
//! `f(x) = sum_k c_k e^{ikx}`. Every operation is exact in the series
//! representation; products grow the bandwidth and nothing is truncated.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Default absolute tolerance for mean-zero and real-valuedness checks.
pub const DEFAULT_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PeriodicError {
    #[error("mean value {mean} is not zero (tolerance {tol:e}); the primitive is not periodic")]
    MeanNonzero { mean: Complex64, tol: f64 },
    #[error("expected {expected} samples, got {got}")]
    SampleCount { expected: usize, got: usize },
}

/// A smooth 2π-periodic complex function given by finitely many Fourier modes.
#[derive(Clone, PartialEq)]
pub struct PeriodicScalar {
    // coeffs[k + K] = c_k, length 2K + 1
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for PeriodicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for (k, c) in self.modes() {
            if c != ZERO {
                list.entry(&(k, c.re, c.im));
            }
        }
        list.finish()
    }
}

impl Default for PeriodicScalar {
    fn default() -> Self {
        Self::zero()
    }
}

impl PeriodicScalar {
    pub fn zero() -> Self {
        Self { coeffs: vec![ZERO] }
    }

    pub fn constant(c: Complex64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn real_constant(c: f64) -> Self {
        Self::constant(Complex64::new(c, 0.0))
    }

    /// `c * e^{ikx}`.
    pub fn mode(k: i64, c: Complex64) -> Self {
        Self::from_modes([(k, c)])
    }

    pub fn cos(n: i64) -> Self {
        Self::from_modes([(n, Complex64::new(0.5, 0.0)), (-n, Complex64::new(0.5, 0.0))])
    }

    pub fn sin(n: i64) -> Self {
        Self::from_modes([(n, Complex64::new(0.0, -0.5)), (-n, Complex64::new(0.0, 0.5))])
    }

    /// Builds a series from `(k, c_k)` pairs. Repeated modes are summed.
    pub fn from_modes<It: IntoIterator<Item = (i64, Complex64)>>(modes: It) -> Self {
        let modes: Vec<(i64, Complex64)> = modes.into_iter().collect();
        let bw = modes.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = vec![ZERO; 2 * bw + 1];
        for (k, c) in modes {
            coeffs[(k + bw as i64) as usize] += c;
        }
        Self { coeffs }.normalized()
    }

    /// Builds a series from a dense coefficient vector indexed `k + K`.
    pub fn from_dense(coeffs: Vec<Complex64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "dense coefficient vector must have odd length");
        Self { coeffs }.normalized()
    }

    /// Discrete Fourier analysis of `2*bandwidth + 1` equispaced samples
    /// `f(2πj/n)`. Approximate unless the sampled function is itself a
    /// trigonometric polynomial of degree at most `bandwidth`.
    pub fn from_samples(samples: &[Complex64], bandwidth: usize) -> Result<Self, PeriodicError> {
        let n = 2 * bandwidth + 1;
        if samples.len() != n {
            return Err(PeriodicError::SampleCount { expected: n, got: samples.len() });
        }
        Ok(Self::trapezoid(samples, bandwidth))
    }

    /// Samples `f` at `2*bandwidth + 1` points and analyses the result.
    pub fn from_fn<F: Fn(f64) -> Complex64>(f: F, bandwidth: usize) -> Self {
        let n = 2 * bandwidth + 1;
        let samples: Vec<Complex64> = (0..n).map(|j| f(2.0 * PI * j as f64 / n as f64)).collect();
        Self::trapezoid(&samples, bandwidth)
    }

    /// Trapezoidal projection of `samples` (any count) onto modes `|k| <= bandwidth`.
    pub fn trapezoid(samples: &[Complex64], bandwidth: usize) -> Self {
        let n = samples.len();
        let coeffs = (-(bandwidth as i64)..=bandwidth as i64)
            .map(|k| {
                let mut acc = ZERO;
                for (j, s) in samples.iter().enumerate() {
                    let phase = -2.0 * PI * ((k * j as i64).rem_euclid(n as i64)) as f64 / n as f64;
                    acc += s * Complex64::from_polar(1.0, phase);
                }
                acc / n as f64
            })
            .collect();
        Self { coeffs }.normalized()
    }

    fn normalized(mut self) -> Self {
        // strip exactly-zero outer modes so bandwidth reflects the support
        while self.coeffs.len() > 1 && self.coeffs[0] == ZERO && *self.coeffs.last().unwrap() == ZERO {
            self.coeffs.pop();
            self.coeffs.remove(0);
        }
        self
    }

    /// `K_max`, the largest stored `|k|`.
    pub fn bandwidth(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        let bw = self.bandwidth() as i64;
        if k.abs() > bw {
            ZERO
        } else {
            self.coeffs[(k + bw) as usize]
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let bw = self.bandwidth() as i64;
        self.coeffs.iter().enumerate().map(move |(i, c)| (i as i64 - bw, *c))
    }

    pub fn dense(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    pub fn evaluate(&self, x: f64) -> Complex64 {
        self.modes().map(|(k, c)| c * Complex64::from_polar(1.0, k as f64 * x)).sum()
    }

    /// Values at `x_j = 2πj/n`, `j = 0..n`.
    pub fn sample(&self, n: usize) -> Vec<Complex64> {
        (0..n).map(|j| self.evaluate(2.0 * PI * j as f64 / n as f64)).collect()
    }

    pub fn derivative(&self) -> Self {
        Self { coeffs: self.modes().map(|(k, c)| c * I * k as f64).collect() }.normalized()
    }

    pub fn derivative_n(&self, n: u32) -> Self {
        (0..n).fold(self.clone(), |f, _| f.derivative())
    }

    /// The mean `c_0`.
    pub fn mean(&self) -> Complex64 {
        self.coeff(0)
    }

    /// `∫_0^{2π} f dx = 2π c_0`.
    pub fn mean_integral(&self) -> Complex64 {
        self.coeff(0) * (2.0 * PI)
    }

    /// The periodic primitive `F` with `F' = f` and `F(0) = 0`.
    pub fn primitive(&self, tol: f64) -> Result<Self, PeriodicError> {
        let mean = self.mean();
        if mean.norm() > tol {
            return Err(PeriodicError::MeanNonzero { mean, tol });
        }
        let mut coeffs: Vec<Complex64> =
            self.modes().map(|(k, c)| if k == 0 { ZERO } else { c / (I * k as f64) }).collect();
        let at_zero: Complex64 = coeffs.iter().sum();
        let bw = self.bandwidth();
        coeffs[bw] -= at_zero;
        Ok(Self { coeffs }.normalized())
    }

    /// Fourier convolution; bandwidth `K_f + K_g`.
    pub fn product(&self, other: &Self) -> Self {
        let (n, m) = (self.coeffs.len(), other.coeffs.len());
        let mut out = vec![ZERO; n + m - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self { coeffs: out }.normalized()
    }

    pub fn powi(&self, n: u32) -> Self {
        (0..n).fold(Self::real_constant(1.0), |acc, _| acc.product(self))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * s).collect() }.normalized()
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Pointwise complex conjugate: `c_k -> conj(c_{-k})`.
    pub fn conj(&self) -> Self {
        Self { coeffs: self.coeffs.iter().rev().map(|c| c.conj()).collect() }
    }

    /// Pointwise real part.
    pub fn re(&self) -> Self {
        (self + &self.conj()).scale_re(0.5)
    }

    /// Pointwise imaginary part.
    pub fn im(&self) -> Self {
        (self - &self.conj()).scale(Complex64::new(0.0, -0.5))
    }

    /// Largest violation of `c_{-k} = conj(c_k)`.
    pub fn reality_defect(&self) -> f64 {
        self.modes().map(|(k, c)| (self.coeff(-k) - c.conj()).norm()).fold(0.0, f64::max)
    }

    pub fn is_real_valued(&self, tol: f64) -> bool {
        self.reality_defect() <= tol
    }

    /// `f(x) e^{inx}`.
    pub fn shift_modes(&self, n: i64) -> Self {
        Self::from_modes(self.modes().map(|(k, c)| (k + n, c)))
    }

    /// `x -> f(x + x0)`.
    pub fn translate(&self, x0: f64) -> Self {
        Self { coeffs: self.modes().map(|(k, c)| c * Complex64::from_polar(1.0, k as f64 * x0)).collect() }
    }

    /// Drops modes with `|c_k| <= tol` and shrinks the bandwidth accordingly.
    pub fn trimmed(&self, tol: f64) -> Self {
        Self::from_modes(self.modes().filter(|(_, c)| c.norm() > tol))
    }

    /// `sum_k |c_k|`, an upper bound for the sup-norm.
    pub fn sup_bound(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Largest mode-wise difference `max_k |c_k - d_k|`.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let bw = self.bandwidth().max(other.bandwidth()) as i64;
        (-bw..=bw).map(|k| (self.coeff(k) - other.coeff(k)).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let bw = self.bandwidth().max(other.bandwidth()) as i64;
        Self { coeffs: (-bw..=bw).map(|k| op(self.coeff(k), other.coeff(k))).collect() }.normalized()
    }
}

impl Add for &PeriodicScalar {
    type Output = PeriodicScalar;
    fn add(self, rhs: Self) -> PeriodicScalar {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &PeriodicScalar {
    type Output = PeriodicScalar;
    fn sub(self, rhs: Self) -> PeriodicScalar {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &PeriodicScalar {
    type Output = PeriodicScalar;
    fn mul(self, rhs: Self) -> PeriodicScalar {
        self.product(rhs)
    }
}

impl Neg for &PeriodicScalar {
    type Output = PeriodicScalar;
    fn neg(self) -> PeriodicScalar {
        PeriodicScalar { coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
}

impl AddAssign<&PeriodicScalar> for PeriodicScalar {
    fn add_assign(&mut self, rhs: &PeriodicScalar) {
        *self = &*self + rhs;
    }
}

impl From<Complex64> for PeriodicScalar {
    fn from(c: Complex64) -> Self {
        Self::constant(c)
    }
}

impl From<f64> for PeriodicScalar {
    fn from(c: f64) -> Self {
        Self::real_constant(c)
    }
}

/// On-disk form: a list of `(k, re, im)` triples.
impl Serialize for PeriodicScalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let triples: Vec<(i64, f64, f64)> =
            self.modes().filter(|(_, c)| *c != ZERO).map(|(k, c)| (k, c.re, c.im)).collect();
        triples.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PeriodicScalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let triples = Vec::<(i64, f64, f64)>::deserialize(d)?;
        Ok(Self::from_modes(triples.into_iter().map(|(k, re, im)| (k, Complex64::new(re, im)))))
    }
}

/// A 2x2 matrix whose entries are periodic scalars.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MatrixCoefficient {
    pub entries: [[PeriodicScalar; 2]; 2],
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    #[serde(default)]
    m11: PeriodicScalar,
    #[serde(default)]
    m12: PeriodicScalar,
    #[serde(default)]
    m21: PeriodicScalar,
    #[serde(default)]
    m22: PeriodicScalar,
}

/// On-disk form: four named entry lists `m11`, `m12`, `m21`, `m22`; missing entries are zero.
impl Serialize for MatrixCoefficient {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let [[m11, m12], [m21, m22]] = self.entries.clone();
        MatrixRepr { m11, m12, m21, m22 }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MatrixCoefficient {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = MatrixRepr::deserialize(d)?;
        Ok(Self::new(r.m11, r.m12, r.m21, r.m22))
    }
}

impl MatrixCoefficient {
    pub fn new(m11: PeriodicScalar, m12: PeriodicScalar, m21: PeriodicScalar, m22: PeriodicScalar) -> Self {
        Self { entries: [[m11, m12], [m21, m22]] }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_constant(m: [[Complex64; 2]; 2]) -> Self {
        Self::new(m[0][0].into(), m[0][1].into(), m[1][0].into(), m[1][1].into())
    }

    pub fn from_real_constant(m: [[f64; 2]; 2]) -> Self {
        Self::new(m[0][0].into(), m[0][1].into(), m[1][0].into(), m[1][1].into())
    }

    pub fn identity() -> Self {
        Self::from_real_constant([[1.0, 0.0], [0.0, 1.0]])
    }

    /// `diag(1, -1)`.
    pub fn e() -> Self {
        Self::from_real_constant([[1.0, 0.0], [0.0, -1.0]])
    }

    /// `[[0, -1], [1, 0]]`.
    pub fn j() -> Self {
        Self::from_real_constant([[0.0, -1.0], [1.0, 0.0]])
    }

    /// `[[1, i], [1, -i]]`, which carries `J` to `iE`.
    pub fn m() -> Self {
        Self::from_constant([[ONE, I], [ONE, -I]])
    }

    /// `M^{-1} = 1/2 [[1, 1], [-i, i]]`.
    pub fn m_inv() -> Self {
        let h = Complex64::new(0.5, 0.0);
        Self::from_constant([[h, h], [-I * 0.5, I * 0.5]])
    }

    /// `f * I`.
    pub fn scalar(f: PeriodicScalar) -> Self {
        Self::new(f.clone(), PeriodicScalar::zero(), PeriodicScalar::zero(), f)
    }

    pub fn diagonal(d1: PeriodicScalar, d2: PeriodicScalar) -> Self {
        Self::new(d1, PeriodicScalar::zero(), PeriodicScalar::zero(), d2)
    }

    pub fn get(&self, i: usize, j: usize) -> &PeriodicScalar {
        &self.entries[i][j]
    }

    fn map(&self, f: impl Fn(&PeriodicScalar) -> PeriodicScalar) -> Self {
        let e = &self.entries;
        Self::new(f(&e[0][0]), f(&e[0][1]), f(&e[1][0]), f(&e[1][1]))
    }

    fn zip(&self, o: &Self, f: impl Fn(&PeriodicScalar, &PeriodicScalar) -> PeriodicScalar) -> Self {
        let (a, b) = (&self.entries, &o.entries);
        Self::new(f(&a[0][0], &b[0][0]), f(&a[0][1], &b[0][1]), f(&a[1][0], &b[1][0]), f(&a[1][1], &b[1][1]))
    }

    pub fn diag(&self) -> Self {
        Self::diagonal(self.entries[0][0].clone(), self.entries[1][1].clone())
    }

    pub fn off(&self) -> Self {
        let z = PeriodicScalar::zero();
        Self::new(z.clone(), self.entries[0][1].clone(), self.entries[1][0].clone(), z)
    }

    pub fn transpose(&self) -> Self {
        let e = &self.entries;
        Self::new(e[0][0].clone(), e[1][0].clone(), e[0][1].clone(), e[1][1].clone())
    }

    pub fn trace(&self) -> PeriodicScalar {
        &self.entries[0][0] + &self.entries[1][1]
    }

    pub fn matmul(&self, o: &Self) -> Self {
        let (a, b) = (&self.entries, &o.entries);
        let entry = |i: usize, j: usize| &(&a[i][0] * &b[0][j]) + &(&a[i][1] * &b[1][j]);
        Self::new(entry(0, 0), entry(0, 1), entry(1, 0), entry(1, 1))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|f| f.scale(s))
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.map(|f| f.scale_re(s))
    }

    /// Entry-wise multiplication by a scalar function.
    pub fn scale_fn(&self, g: &PeriodicScalar) -> Self {
        self.map(|f| f * g)
    }

    /// `M C - C M` for a second (typically constant) matrix `C`.
    pub fn commutator(&self, c: &Self) -> Self {
        &self.matmul(c) - &c.matmul(self)
    }

    pub fn derivative(&self) -> Self {
        self.map(PeriodicScalar::derivative)
    }

    pub fn derivative_n(&self, n: u32) -> Self {
        self.map(|f| f.derivative_n(n))
    }

    pub fn translate(&self, x0: f64) -> Self {
        self.map(|f| f.translate(x0))
    }

    pub fn conj(&self) -> Self {
        self.map(PeriodicScalar::conj)
    }

    /// Entry-wise pointwise real part.
    pub fn re(&self) -> Self {
        self.map(PeriodicScalar::re)
    }

    pub fn evaluate(&self, x: f64) -> [[Complex64; 2]; 2] {
        let e = &self.entries;
        [[e[0][0].evaluate(x), e[0][1].evaluate(x)], [e[1][0].evaluate(x), e[1][1].evaluate(x)]]
    }

    pub fn bandwidth(&self) -> usize {
        self.entries.iter().flatten().map(PeriodicScalar::bandwidth).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(PeriodicScalar::is_zero)
    }

    pub fn reality_defect(&self) -> f64 {
        self.entries.iter().flatten().map(PeriodicScalar::reality_defect).fold(0.0, f64::max)
    }

    pub fn is_real_valued(&self, tol: f64) -> bool {
        self.reality_defect() <= tol
    }

    /// Largest sup-norm bound among the entries.
    pub fn sup_bound(&self) -> f64 {
        self.entries.iter().flatten().map(PeriodicScalar::sup_bound).fold(0.0, f64::max)
    }

    pub fn max_coeff_diff(&self, o: &Self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .zip(o.entries.iter().flatten())
            .map(|(a, b)| a.max_coeff_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn trimmed(&self, tol: f64) -> Self {
        self.map(|f| f.trimmed(tol))
    }
}

impl Add for &MatrixCoefficient {
    type Output = MatrixCoefficient;
    fn add(self, rhs: Self) -> MatrixCoefficient {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub for &MatrixCoefficient {
    type Output = MatrixCoefficient;
    fn sub(self, rhs: Self) -> MatrixCoefficient {
        self.zip(rhs, |a, b| a - b)
    }
}

impl Mul for &MatrixCoefficient {
    type Output = MatrixCoefficient;
    fn mul(self, rhs: Self) -> MatrixCoefficient {
        self.matmul(rhs)
    }
}

impl Neg for &MatrixCoefficient {
    type Output = MatrixCoefficient;
    fn neg(self) -> MatrixCoefficient {
        self.map(|f| -f)
    }
}
