//! Theta series, Dedekind eta and related q-series at arbitrary precision.
//!
//! Every series is truncated with an explicit tail bound below `ctx.tail_eps`.
//! Points of the upper half plane lying in Q(√-3) can be given exactly as
//! [`KPoint`]; phases are then reduced in exact arithmetic, which keeps the
//! result accurate even when the real part is huge.

use std::f64::consts::{LN_2, PI};

use rug::float::Constant;
use rug::ops::{DivRounding, RemRounding};
use rug::{Complex, Float, Integer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Working precision and truncation budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionContext {
    pub bits: u32,
    /// log2 of the absolute truncation budget per series.
    pub tail_eps_log2: i64,
    pub max_terms: usize,
    /// Identity tolerance `2^-tol_exp` instead of the precision-derived default.
    #[serde(default)]
    pub tol_exp: Option<u32>,
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self::new(256)
    }
}

impl PrecisionContext {
    pub fn new(bits: u32) -> Self {
        let bits = bits.max(64);
        PrecisionContext {
            bits,
            tail_eps_log2: -(bits as i64) - 10,
            max_terms: 50_000_000,
            tol_exp: None,
        }
    }

    pub fn with_tol_exp(mut self, tol_exp: u32) -> Self {
        self.tol_exp = Some(tol_exp);
        self
    }

    pub fn with_max_terms(mut self, max_terms: usize) -> Self {
        self.max_terms = max_terms;
        self
    }

    /// Internal precision: the requested bits plus guard bits.
    pub fn work_bits(&self) -> u32 {
        self.bits + 32
    }

    /// log2 of the identity tolerance, by default `2^(-(bits/2) + 16)`.
    pub fn tol_log2(&self) -> i64 {
        match self.tol_exp {
            Some(e) => -(e as i64),
            None => -((self.bits / 2) as i64) + 16,
        }
    }

    pub fn tol(&self) -> Float {
        Float::with_val(64, Float::i_exp(1, self.tol_log2() as i32))
    }

    /// Recognition tolerance `2^(-(bits/2))`.
    pub fn recognition_tol(&self) -> Float {
        Float::with_val(64, Float::i_exp(1, -((self.bits / 2) as i32)))
    }

    pub fn tail_eps(&self) -> Float {
        Float::with_val(64, Float::i_exp(1, self.tail_eps_log2 as i32))
    }

    fn tail_ln(&self) -> f64 {
        self.tail_eps_log2 as f64 * LN_2
    }

    pub fn doubled(&self) -> Self {
        PrecisionContext {
            tol_exp: self.tol_exp,
            ..Self::new(self.bits * 2).with_max_terms(self.max_terms)
        }
    }
}

pub fn pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi)
}

pub fn sqrt3(prec: u32) -> Float {
    Float::with_val(prec, 3).sqrt()
}

/// `e^{2πi num/den}` with the fraction reduced modulo 1 exactly.
pub fn exp_2pi_i_rational(num: &Integer, den: &Integer, prec: u32) -> Complex {
    let r = Integer::from(num.rem_euc(den));
    let angle = pi(prec) * 2u32 * Float::with_val(prec, &r) / Float::with_val(prec, den);
    Complex::with_val(prec, (Float::new(prec), angle)).exp()
}

/// `e^{πi num/den}`.
pub fn exp_pi_i_rational(num: &Integer, den: &Integer, prec: u32) -> Complex {
    exp_2pi_i_rational(num, &Integer::from(den * 2u32), prec)
}

/// Smallest `X` with `Σ_{|t|≥X, t ∈ c+Z} e^{-a t²} ≤ e^{eps_ln}` for every shift `c`.
fn gauss_cutoff(a: f64, eps_ln: f64) -> f64 {
    let mut x = ((-eps_ln) / a).sqrt().max(1.0);
    loop {
        let tail = LN_2 - a * x * x - (1.0 - (-2.0 * a * x).exp()).ln();
        if tail <= eps_ln {
            return x;
        }
        x += 0.25 + x * 1e-3;
    }
}

fn im_f64(z: &Complex) -> f64 {
    z.imag().to_f64()
}

fn check_upper(y: f64) -> Result<()> {
    if y > 0.0 && y.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("Im z = {y} is not positive")))
    }
}

/// A point `(u + v√-3)/w` of the upper half plane in Q(√-3).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KPoint {
    pub u: Integer,
    pub v: Integer,
    pub w: Integer,
}

impl KPoint {
    pub fn new(u: impl Into<Integer>, v: impl Into<Integer>, w: impl Into<Integer>) -> Result<Self> {
        let (u, v, w) = (u.into(), v.into(), w.into());
        if v <= 0 || w <= 0 {
            return Err(Error::InvalidInput("K-point must satisfy v > 0, w > 0".into()));
        }
        Ok(Self::normalized(u, v, w))
    }

    fn normalized(u: Integer, v: Integer, w: Integer) -> Self {
        let g = Integer::from(u.gcd_ref(&v)).gcd(&w);
        if g == 1 {
            KPoint { u, v, w }
        } else {
            KPoint {
                u: u.div_exact(&g),
                v: v.div_exact(&g),
                w: w.div_exact(&g),
            }
        }
    }

    /// The CM point `(-b + √-3)/(2a)`.
    pub fn cm(a: &Integer, b: &Integer) -> Self {
        Self::normalized(Integer::from(-b), Integer::from(1), Integer::from(a * 2u32))
    }

    pub fn omega() -> Self {
        Self::cm(&Integer::from(1), &Integer::from(1))
    }

    /// `z · num/den` for `num, den > 0`.
    pub fn scale(&self, num: &Integer, den: &Integer) -> Self {
        Self::normalized(
            Integer::from(&self.u * num),
            Integer::from(&self.v * num),
            Integer::from(&self.w * den),
        )
    }

    pub fn translate(&self, k: &Integer) -> Self {
        Self::normalized(
            &self.u + Integer::from(k * &self.w),
            self.v.clone(),
            self.w.clone(),
        )
    }

    pub fn im_f64(&self) -> f64 {
        3f64.sqrt() * (Float::with_val(64, &self.v) / Float::with_val(64, &self.w)).to_f64()
    }

    pub fn to_complex(&self, prec: u32) -> Complex {
        let w = Float::with_val(prec, &self.w);
        let re = Float::with_val(prec, &self.u) / &w;
        let im = Float::with_val(prec, &self.v) * sqrt3(prec) / &w;
        Complex::with_val(prec, (re, im))
    }
}

/// `(p + q√-3)/r`, used for exact automorphy factors.
#[derive(Clone, Debug)]
struct KNumber {
    p: Integer,
    q: Integer,
    r: Integer,
}

impl KNumber {
    fn one() -> Self {
        KNumber {
            p: Integer::from(1),
            q: Integer::from(0),
            r: Integer::from(1),
        }
    }

    fn mul(&self, o: &Self) -> Self {
        let p = Integer::from(&self.p * &o.p) - Integer::from(&self.q * &o.q) * 3u32;
        let q = Integer::from(&self.p * &o.q) + Integer::from(&self.q * &o.p);
        let r = Integer::from(&self.r * &o.r);
        let g = Integer::from(p.gcd_ref(&q)).gcd(&r);
        KNumber {
            p: p.div_exact(&g),
            q: q.div_exact(&g),
            r: r.div_exact(&g),
        }
    }

    fn to_complex(&self, prec: u32) -> Complex {
        let r = Float::with_val(prec, &self.r);
        let re = Float::with_val(prec, &self.p) / &r;
        let im = Float::with_val(prec, &self.q) * sqrt3(prec) / &r;
        Complex::with_val(prec, (re, im))
    }
}

/// Number of `(m, n)` with `m² - mn + n² = Q`, for `Q ≤ qmax`, by enumeration.
pub fn lattice_counts(qmax: usize) -> Vec<u64> {
    let mut counts = vec![0u64; qmax + 1];
    let q = qmax as i64;
    let mbound = ((4.0 * q as f64 / 3.0).sqrt()).floor() as i64 + 1;
    for m in -mbound..=mbound {
        // n² - mn + m² - Q ≤ 0
        let disc = 4 * q - 3 * m * m;
        if disc < 0 {
            continue;
        }
        let s = (disc as f64).sqrt();
        let lo = ((m as f64 - s) / 2.0).floor() as i64 - 1;
        let hi = ((m as f64 + s) / 2.0).ceil() as i64 + 1;
        for n in lo..=hi {
            let v = m * m - m * n + n * n;
            if v <= q {
                counts[v as usize] += 1;
            }
        }
    }
    counts
}

fn theta_k_qmax(y: f64, ctx: &PrecisionContext) -> Result<usize> {
    // Σ_{Q>M} 6Q e^{-cQ} ≤ 6(M+1)e^{-c(M+1)}/(1-e^{-c})², using count(Q) ≤ 6Q
    let c = 2.0 * PI * y;
    let eps = ctx.tail_ln();
    let lead = -2.0 * (1.0 - (-c).exp()).ln() + 6f64.ln();
    let mut m = ((-eps) / c).ceil().max(1.0);
    while lead + (m + 1.0).ln() - c * (m + 1.0) > eps {
        m += (m * 0.01).max(1.0);
    }
    let m = m as usize;
    if m > ctx.max_terms {
        return Err(Error::PrecisionBudgetExceeded(m));
    }
    Ok(m)
}

/// `Θ_K(z) = Σ_{m,n} e^{2πi z (m² - mn + n²)}` by direct summation (reference path).
pub fn theta_k_direct(z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    let y = im_f64(z);
    check_upper(y)?;
    let qmax = theta_k_qmax(y, ctx)?;
    let counts = lattice_counts(qmax);
    let prec = ctx.work_bits();
    let q = Complex::with_val(prec, z * Complex::with_val(prec, (0, 2)) * pi(prec)).exp();
    let mut s = Complex::new(prec);
    for &c in counts.iter().rev() {
        s *= &q;
        if c != 0 {
            s += c;
        }
    }
    Ok(s)
}

const MAX_REDUCTIONS: usize = 100_000;

/// `Θ_K(z)` after moving `z` towards the fundamental domain of Γ₀(3)⁺ numerically.
pub fn theta_k(z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    check_upper(im_f64(z))?;
    let prec = ctx.work_bits();
    let mut z = Complex::with_val(prec, z);
    let mut mult = Complex::with_val(prec, 1);
    let factor = Complex::with_val(prec, (Float::new(prec), -sqrt3(prec)));
    for _ in 0..MAX_REDUCTIONS {
        let n = Float::with_val(prec, z.real().round_ref());
        z -= n;
        let r2 = Float::with_val(prec, z.norm_ref());
        if r2 * 3u32 >= 1u32 {
            return Ok(mult * theta_k_direct(&z, ctx)?);
        }
        // Θ(z) = Θ(-1/(3z)) / (-√-3 z)
        mult /= Complex::with_val(prec, &factor * &z);
        z = Complex::with_val(prec, -1) / (z * 3u32);
    }
    Err(Error::PrecisionBudgetExceeded(MAX_REDUCTIONS))
}

/// `Θ_K` at an exact point of Q(√-3), reduced in exact arithmetic.
pub fn theta_k_at(z: &KPoint, ctx: &PrecisionContext) -> Result<Complex> {
    let (mut u, mut v, mut w) = (z.u.clone(), z.v.clone(), z.w.clone());
    let mut mult = KNumber::one();
    for _ in 0..MAX_REDUCTIONS {
        let two_w = Integer::from(&w * 2u32);
        let n = (Integer::from(&u * 2u32) + &w).div_floor(&two_w);
        u -= n * &w;
        let q3 = Integer::from(u.square_ref()) + Integer::from(v.square_ref()) * 3u32;
        if Integer::from(&q3 * 3u32) >= Integer::from(w.square_ref()) {
            let zc = KPoint::normalized(u, v, w).to_complex(ctx.work_bits());
            return Ok(mult.to_complex(ctx.work_bits()) * theta_k_direct(&zc, ctx)?);
        }
        // 1/(-√-3 z) = w (3v + u√-3) / (9v² + 3u²)
        let step = KNumber {
            p: Integer::from(&w * &v) * 3u32,
            q: Integer::from(&w * &u),
            r: Integer::from(&q3 * 3u32),
        };
        mult = mult.mul(&step);
        let nu = Integer::from(-&w) * &u;
        let nv = Integer::from(&w * &v);
        let nw = q3 * 3u32;
        let kp = KPoint::normalized(nu, nv, nw);
        (u, v, w) = (kp.u, kp.v, kp.w);
    }
    Err(Error::PrecisionBudgetExceeded(MAX_REDUCTIONS))
}

/// The two shifts used by the weight-½ thetas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mu {
    #[serde(rename = "1/6")]
    Sixth,
    #[serde(rename = "1/2")]
    Half,
}

impl Mu {
    /// `6μ`.
    pub fn six_mu(self) -> i64 {
        match self {
            Mu::Sixth => 1,
            Mu::Half => 3,
        }
    }
}

impl std::fmt::Display for Mu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mu::Sixth => "1/6",
            Mu::Half => "1/2",
        })
    }
}

/// Index range `n` with `|scale·n + shift| ≤ x`.
fn index_range(scale: f64, shift: f64, x: f64, ctx: &PrecisionContext) -> Result<(i64, i64)> {
    let lo = ((-x - shift) / scale).floor() as i64 - 1;
    let hi = ((x - shift) / scale).ceil() as i64 + 1;
    let len = (hi - lo) as usize;
    if len > ctx.max_terms {
        return Err(Error::PrecisionBudgetExceeded(len));
    }
    Ok((lo, hi))
}

/// `Σ_n sign(n) e^{πi (N_n/den)² z}` with `N_n = step·n + offset`.
fn gaussian_sum_complex(
    step: i64,
    offset: i64,
    den: i64,
    z: &Complex,
    ctx: &PrecisionContext,
    phase: impl Fn(i64, u32) -> Complex,
) -> Result<Complex> {
    let y = im_f64(z);
    check_upper(y)?;
    let prec = ctx.work_bits();
    let x = gauss_cutoff(PI * y, ctx.tail_ln());
    let (lo, hi) = index_range(step as f64 / den as f64, offset as f64 / den as f64, x, ctx)?;
    let base = Complex::with_val(prec, z * Complex::with_val(prec, (0, 1))) * pi(prec)
        / Float::with_val(prec, Integer::from(den).square());
    let mut s = Complex::new(prec);
    for n in lo..=hi {
        let big_n = Integer::from(step) * n + offset;
        let e = Complex::with_val(prec, &base * Float::with_val(prec, big_n.square())).exp();
        s += e * phase(n, prec);
    }
    Ok(s)
}

/// Same sum at an exact point; phases reduced modulo 2 exactly.
fn gaussian_sum_exact(
    step: i64,
    offset: i64,
    den: i64,
    z: &KPoint,
    ctx: &PrecisionContext,
    phase: impl Fn(i64, u32) -> Complex,
) -> Result<Complex> {
    let y = z.im_f64();
    check_upper(y)?;
    let prec = ctx.work_bits();
    let x = gauss_cutoff(PI * y, ctx.tail_ln());
    let (lo, hi) = index_range(step as f64 / den as f64, offset as f64 / den as f64, x, ctx)?;
    // (N/den)² z = N²(u + v√-3)/(den² w)
    let dw = Integer::from(den).square() * &z.w;
    let decay = -pi(prec) * sqrt3(prec) * Float::with_val(prec, &z.v) / Float::with_val(prec, &dw);
    let mut s = Complex::new(prec);
    for n in lo..=hi {
        let n2 = (Integer::from(step) * n + offset).square();
        let mag = Float::with_val(prec, &decay * Float::with_val(prec, &n2)).exp();
        let rot = exp_pi_i_rational(&Integer::from(&n2 * &z.u), &dw, prec);
        s += rot * mag * phase(n, prec);
    }
    Ok(s)
}

fn sign_phase(n: i64, prec: u32) -> Complex {
    Complex::with_val(prec, if n.rem_euclid(2) == 0 { 1 } else { -1 })
}

/// `θ_{r,μ}(z) = Σ_n (-1)ⁿ e^{πi (n + r/D - μ)² z}`.
pub fn theta_half(r: i64, d: u64, mu: Mu, z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    let d = d as i64;
    gaussian_sum_complex(6 * d, 6 * r - d * mu.six_mu(), 6 * d, z, ctx, sign_phase)
}

/// `θ_{r,μ}` at an exact point.
pub fn theta_half_at(r: i64, d: u64, mu: Mu, z: &KPoint, ctx: &PrecisionContext) -> Result<Complex> {
    let d = d as i64;
    gaussian_sum_exact(6 * d, 6 * r - d * mu.six_mu(), 6 * d, z, ctx, sign_phase)
}

/// `θ^{(r),μ}(z) = Σ_n (-1)ⁿ e^{2πinr/D} e^{πi (n - Dμ)² z}`.
pub fn theta_shifted(r: i64, d: u64, mu: Mu, z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    let di = d as i64;
    let phase = |n: i64, prec: u32| {
        // (-1)ⁿ e^{2πinr/D} = e^{2πi n(2r + D)/(2D)}
        exp_2pi_i_rational(&(Integer::from(n) * (2 * r + di)), &Integer::from(2 * di), prec)
    };
    gaussian_sum_complex(6, -di * mu.six_mu(), 6, z, ctx, phase)
}

/// Dedekind η by the pentagonal series `Σ (-1)ⁿ e^{πi (6n-1)² z/12}`.
pub fn eta(z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    // (6n-1)²/12 = ((6n-1)/√12)²: use den 6 with z scaled by 3
    let z3 = Complex::with_val(ctx.work_bits(), z * 3u32);
    gaussian_sum_complex(6, -1, 6, &z3, ctx, sign_phase)
}

/// η at an exact point, after an exact integer translation.
pub fn eta_at(z: &KPoint, ctx: &PrecisionContext) -> Result<Complex> {
    let k = Integer::from((&z.u).div_floor(&z.w));
    let shifted = z.translate(&Integer::from(-&k));
    let prec = ctx.work_bits();
    let phase = exp_pi_i_rational(&k, &Integer::from(12), prec);
    Ok(phase * eta(&shifted.to_complex(prec), ctx)?)
}

/// η as `q^{1/24} ∏ (1 - qⁿ)` (reference path).
pub fn eta_product(z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    let y = im_f64(z);
    check_upper(y)?;
    let prec = ctx.work_bits();
    let two_pi_i = Complex::with_val(prec, (0, 2)) * pi(prec);
    let q = Complex::with_val(prec, z * &two_pi_i).exp();
    // |∏_{n>N}(1 - qⁿ) - 1| ≤ 2|q|^{N+1}/(1-|q|) once that is below 1
    let lq = -2.0 * PI * y;
    let lead = LN_2 - (1.0 - lq.exp()).ln();
    let eps = ctx.tail_ln();
    let nmax = ((eps - lead) / lq).ceil().max(1.0) as usize;
    if nmax > ctx.max_terms {
        return Err(Error::PrecisionBudgetExceeded(nmax));
    }
    let mut prod = Complex::with_val(prec, 1);
    let mut qn = Complex::with_val(prec, 1);
    for _ in 0..nmax {
        qn *= &q;
        prod *= Complex::with_val(prec, 1 - &qn);
    }
    let pref = (Complex::with_val(prec, z * &two_pi_i) / 24u32).exp();
    Ok(pref * prod)
}

/// `Θ_μ(z)`: `(3/2)Θ_K(z) - (1/2)Θ_K(z/3)` for μ = 1/6, `Θ_K(z/3)` for μ = 1/2.
pub fn theta_mu(mu: Mu, z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    let prec = ctx.work_bits();
    let third = theta_k(&Complex::with_val(prec, z / 3u32), ctx)?;
    Ok(match mu {
        Mu::Half => third,
        Mu::Sixth => theta_k(z, ctx)? * 3u32 / 2u32 - third / 2u32,
    })
}

pub fn theta_mu_at(mu: Mu, z: &KPoint, ctx: &PrecisionContext) -> Result<Complex> {
    let third = theta_k_at(&z.scale(&Integer::from(1), &Integer::from(3)), ctx)?;
    Ok(match mu {
        Mu::Half => third,
        Mu::Sixth => theta_k_at(z, ctx)? * 3u32 / 2u32 - third / 2u32,
    })
}

/// The character `ε(m) = (m | 3)`.
pub fn epsilon(m: u64) -> i64 {
    match m % 3 {
        0 => 0,
        1 => 1,
        _ => -1,
    }
}

/// `r(n) = Σ_{m|n} ε(m)` for `0 ≤ n ≤ nmax` (entry 0 is 0).
pub fn ideal_count_coefficients(nmax: usize) -> Vec<i64> {
    let mut r = vec![0i64; nmax + 1];
    for m in 1..=nmax {
        let e = epsilon(m as u64);
        if e != 0 {
            for k in (m..=nmax).step_by(m) {
                r[k] += e;
            }
        }
    }
    r
}
