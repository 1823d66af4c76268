//! `S_D` through the weight-one theta trace and `T_D` through the weight-½ trace,
//! with exact recognition of both and the resulting verdict.

use std::fmt;

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Complex, Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::arith;
use crate::curve::{self, l_value_oracle, point_search, RationalPoint};
use crate::eisenstein::{chi_d, chi_pi_rational, factor_primary, CubeRootOfUnity, Factorization, PrimaryElement};
use crate::error::{Error, Result};
use crate::ideals::{enumerate_class_reps_with, pi_dividing_tau, split_product_parts, sqrt_minus3_mod, RepScan};
use crate::modular::{sqrt3, theta_half, theta_half_at, theta_k_at, KPoint, Mu, PrecisionContext};

/// Largest precision reached by the escalation ladder.
pub const MAX_BITS: u32 = 1024;
/// `|S_D|` below this counts as numerically zero.
pub const ZERO_THRESHOLD: f64 = 1e-20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    NoRationalSolutions,
    #[serde(rename = "ExpectSolutions(BSD)")]
    ExpectSolutions,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::NoRationalSolutions => "NoRationalSolutions",
            Verdict::ExpectSolutions => "ExpectSolutions(BSD)",
            Verdict::Unknown => "Unknown",
        })
    }
}

/// Whether `T_D` is a rational integer or an integer multiple of `√-3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TUnit {
    One,
    SqrtMinus3,
}

/// `T_D = coefficient · unit`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TExact {
    #[serde(with = "integer_string")]
    pub coefficient: Integer,
    pub unit: TUnit,
}

impl TExact {
    pub fn square(&self) -> Integer {
        let c2 = Integer::from(self.coefficient.square_ref());
        match self.unit {
            TUnit::One => c2,
            TUnit::SqrtMinus3 => c2 * -3i32,
        }
    }
}

impl fmt::Display for TExact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.unit {
            _ if self.coefficient == 0 => f.write_str("0"),
            TUnit::One => write!(f, "{}", self.coefficient),
            TUnit::SqrtMinus3 => write!(f, "{}·√-3", self.coefficient),
        }
    }
}

/// Serialize big integers as decimal strings.
pub mod integer_string {
    use rug::Integer;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Integer, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Integer, D::Error> {
        let s = String::deserialize(d)?;
        Integer::parse(&s).map(Integer::from).map_err(D::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Real,
    Imaginary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TdReport {
    pub d: u64,
    pub d1: u64,
    pub d2: u64,
    pub b: Integer,
    pub k0: u8,
    pub t_value: Complex,
    pub t_exact: TExact,
    pub parity: Parity,
}

/// Numbers gathered along the way.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub precision_bits: u32,
    pub class_number: usize,
    pub imag_residual: f64,
    pub recognition_residual: f64,
    pub t_off_axis: Option<f64>,
    pub oracle_l_value: Option<f64>,
    pub oracle_root_number: Option<i32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdReport {
    pub d: u64,
    pub s_d: Rational,
    pub s_numeric: Complex,
    pub c3d: u64,
    pub sigma_d: u32,
    pub t_d: Option<TExact>,
    pub sha_prediction: Option<Integer>,
    pub verdict: Verdict,
    pub point: Option<RationalPoint>,
    pub residuals: Diagnostics,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SdOptions {
    /// Height for the point search run when `S_D = 0` (0 disables it).
    pub point_height: u64,
    pub use_oracle: bool,
    pub escalate: bool,
    pub with_t_d: bool,
    pub scan: RepScan,
}

impl Default for SdOptions {
    fn default() -> Self {
        SdOptions {
            point_height: 1000,
            use_oracle: true,
            escalate: true,
            with_t_d: true,
            scan: RepScan::default(),
        }
    }
}

/// Number of distinct prime factors.
pub fn sigma(d: u64) -> u32 {
    arith::factor(d).len() as u32
}

/// Whether every prime factor is `≡ 1 mod 3`.
pub fn is_split_product(d: u64) -> bool {
    d > 1 && split_product_parts(d).is_ok()
}

pub fn validate_d(d: u64) -> Result<()> {
    if d <= 1 {
        return Err(Error::InvalidInput(format!("D = {d} must be at least 2")));
    }
    if d.is_multiple_of(2) || d.is_multiple_of(3) {
        return Err(Error::InvalidInput(format!("D = {d} must be prime to 6")));
    }
    if !arith::is_cube_free(d) {
        return Err(Error::InvalidInput(format!("D = {d} is not cube-free")));
    }
    Ok(())
}

/// Nearest `p/q` with `q | denominator_bound` within the recognition tolerance.
pub fn recognize_rational(x: &Complex, denominator_bound: u64, ctx: &PrecisionContext) -> Result<Rational> {
    let tol = ctx.recognition_tol();
    let fail = || Error::RecognitionFailure {
        value: format!("{:.30e}", x.real().to_f64()),
        bound: denominator_bound.to_string(),
    };
    if Float::with_val(64, x.imag().abs_ref()) >= tol {
        return Err(fail());
    }
    let q = Integer::from(denominator_bound.max(1));
    let scaled = Float::with_val(x.prec().0, x.real() * &q);
    let lo = scaled.floor().to_integer().ok_or_else(fail)?;
    let hits: Vec<Rational> = [lo.clone(), lo + 1u32]
        .into_iter()
        .map(|p| Rational::from((p, q.clone())))
        .filter(|r| Float::with_val(x.prec().0, x.real() - r).abs() < tol)
        .collect();
    match hits.as_slice() {
        [r] => Ok(r.clone()),
        _ => Err(fail()),
    }
}

/// `c_{3D}` from Tate's algorithm, checked against `3^{1+σ}` for split products `D ≡ 1 mod 9`.
pub fn c3d(d: u64) -> Result<u64> {
    let c: u64 = curve::tamagawa_numbers(d)?.values().product();
    if is_split_product(d) && d % 9 == 1 {
        let expect = 3u64.pow(1 + sigma(d));
        if c != expect {
            return Err(Error::ConsistencyFailure(format!(
                "c_3D = {c} for D = {d}, expected {expect}"
            )));
        }
    }
    Ok(c)
}

/// `Σ_𝒜 Θ_K(D₀τ_𝒜)/Θ_K(τ_𝒜) χ_D(𝒜) · D^{1/3}`, which equals `3 c_{3D} S_D`.
pub fn theta_trace(d: u64, scan: &RepScan, ctx: &PrecisionContext) -> Result<(Complex, usize)> {
    validate_d(d)?;
    let d0 = arith::radical(d);
    let reps = enumerate_class_reps_with(d0, scan)?;
    let d0i = Integer::from(d0);
    let one = Integer::from(1);
    let terms: Vec<Complex> = reps
        .reps
        .par_iter()
        .map(|ideal| {
            let tau = ideal.cm_point().to_kpoint();
            let num = theta_k_at(&tau.scale(&d0i, &one), ctx)?;
            let den = theta_k_at(&tau, ctx)?;
            let chi = chi_d(d, ideal)?.to_complex(ctx.work_bits());
            Ok(num / den * chi)
        })
        .collect::<Result<_>>()?;
    let prec = ctx.work_bits();
    let sum = terms.into_iter().fold(Complex::new(prec), |acc, t| acc + t);
    Ok((sum * Float::with_val(prec, d).cbrt(), reps.len()))
}

fn chi_pi_split(r: i64, f1: &Factorization, f2: &Factorization) -> Option<CubeRootOfUnity> {
    Some(chi_pi_rational(r, f1)? * chi_pi_rational(r, f2)?.conj())
}

/// Residues `r ∈ [1, 6D)`, `r ≡ 1 mod 6`, prime to `D`.
pub(crate) fn lifted_units(d: u64) -> impl Iterator<Item = i64> {
    (1..6 * d as i64).step_by(6).filter(move |&r| arith::gcd(r as u64, d) == 1)
}

fn r_series_with(
    d: u64,
    pi1: &PrimaryElement,
    pi2: &PrimaryElement,
    ctx: &PrecisionContext,
    theta: impl Fn(i64, u64, Mu) -> Result<Complex> + Sync,
    mu: Mu,
) -> Result<Complex> {
    let f1 = factor_primary(pi1)?;
    let f2 = factor_primary(pi2)?;
    let prec = ctx.work_bits();
    let base = theta(0, 1, Mu::Sixth)?;
    let rs: Vec<i64> = lifted_units(d).collect();
    let terms: Vec<Complex> = rs
        .par_iter()
        .map(|&r| {
            let chi = chi_pi_split(r, &f1, &f2)
                .ok_or_else(|| Error::NotCoprime(format!("r = {r} and π")))?;
            Ok(theta(r, d, mu)? * chi.to_complex(prec))
        })
        .collect::<Result<_>>()?;
    Ok(terms.into_iter().fold(Complex::new(prec), |a, t| a + t) / base)
}

/// `R_{D,μ}(z) = Σ_r θ_{r,μ}(3z)/θ₀(3z) χ_π(r)` with `θ₀ = θ_{0,1/6}` and
/// `χ_π = χ_{π₁} conj(χ_{π₂})`.
pub fn r_series(
    d: u64,
    mu: Mu,
    z: &Complex,
    pi1: &PrimaryElement,
    pi2: &PrimaryElement,
    ctx: &PrecisionContext,
) -> Result<Complex> {
    let z3 = Complex::with_val(ctx.work_bits(), z * 3u32);
    r_series_with(d, pi1, pi2, ctx, |r, dd, m| theta_half(r, dd, m, &z3, ctx), mu)
}

/// `R_{D,μ}` at an exact point.
pub fn r_series_at(
    d: u64,
    mu: Mu,
    z: &KPoint,
    pi1: &PrimaryElement,
    pi2: &PrimaryElement,
    ctx: &PrecisionContext,
) -> Result<Complex> {
    let z3 = z.scale(&Integer::from(3), &Integer::from(1));
    r_series_with(d, pi1, pi2, ctx, |r, dd, m| theta_half_at(r, dd, m, &z3, ctx), mu)
}

/// `T_D = R_{D₀,1/6}(τ/3) · π̄₁^{-2/3} π̄₂^{-1/3} · ω^{k₀}` for a split product `D = D₁D₂²`.
pub fn compute_t_d(d: u64, ctx: &PrecisionContext) -> Result<TdReport> {
    let (d0, d1, d2) = split_product_parts(d)?;
    if d <= 1 {
        return Err(Error::InvalidInput("D = 1".into()));
    }
    let b = sqrt_minus3_mod(12 * d * d, true)?;
    let (pi1, pi2) = pi_dividing_tau(d, &b)?;
    let prec = ctx.work_bits();
    let tau_over_3 = KPoint::cm(&Integer::from(3), &b);
    let r = r_series_at(d0, Mu::Sixth, &tau_over_3, &pi1, &pi2, ctx)?;
    let third = Float::with_val(prec, 1) / 3u32;
    let p1 = pi1.value().conj().to_complex(prec).pow(Float::with_val(prec, &third * -2i32));
    let p2 = pi2.value().conj().to_complex(prec).pow(-third);
    let t = r * p1 * p2;
    let sig = sigma(d);
    let parity = if sig.is_multiple_of(2) { Parity::Real } else { Parity::Imaginary };
    let tol = ctx.recognition_tol();
    let magnitude = Float::with_val(prec, t.abs_ref());
    if magnitude < tol {
        return Ok(TdReport {
            d,
            d1,
            d2,
            b,
            k0: 0,
            t_value: t,
            t_exact: TExact {
                coefficient: Integer::new(),
                unit: if parity == Parity::Real { TUnit::One } else { TUnit::SqrtMinus3 },
            },
            parity,
        });
    }
    let scaled_tol = Float::with_val(prec, &tol * Float::with_val(prec, &magnitude).max(&Float::with_val(prec, 1)));
    let off_axis = |z: &Complex| -> Float {
        match parity {
            Parity::Real => Float::with_val(prec, z.imag().abs_ref()),
            Parity::Imaginary => Float::with_val(prec, z.real().abs_ref()),
        }
    };
    let hits: Vec<(u8, Complex)> = (0..3u8)
        .map(|k| (k, Complex::with_val(prec, &t * CubeRootOfUnity::new(k as i64).to_complex(prec))))
        .filter(|(_, z)| off_axis(z) < scaled_tol)
        .collect();
    let [(k0, tk)] = hits.as_slice() else {
        return Err(Error::NoValidCubeRoot);
    };
    let (coef_f, unit) = match parity {
        Parity::Real => (tk.real().clone(), TUnit::One),
        Parity::Imaginary => (Float::with_val(prec, tk.imag() / sqrt3(prec)), TUnit::SqrtMinus3),
    };
    let coefficient = coef_f.to_integer().ok_or(Error::NoValidCubeRoot)?;
    if Float::with_val(prec, &coef_f - &coefficient).abs() > scaled_tol {
        return Err(Error::RecognitionFailure {
            value: format!("{:.30e}", coef_f.to_f64()),
            bound: "1".into(),
        });
    }
    if unit == TUnit::One && !coefficient.is_divisible_u(3) {
        return Err(Error::ConsistencyFailure(format!("T_{d} = {coefficient} is not divisible by 3")));
    }
    Ok(TdReport {
        d,
        d1,
        d2,
        b,
        k0: *k0,
        t_value: tk.clone(),
        t_exact: TExact { coefficient, unit },
        parity,
    })
}

/// `S_D · (-3)^{2+σ} = T_D²`.
pub fn check_squareness(s: &Rational, t: &TExact, sigma_d: u32) -> Result<()> {
    let lhs = Rational::from(s * Integer::from(-3).pow(2 + sigma_d));
    if lhs != t.square() {
        return Err(Error::ConsistencyFailure(format!(
            "S_D·(-3)^(2+{sigma_d}) = {lhs} but T_D² = {}",
            t.square()
        )));
    }
    Ok(())
}

/// `S_D` at one precision, no escalation.
fn compute_s_d_once(d: u64, opts: &SdOptions, ctx: &PrecisionContext) -> Result<SdReport> {
    let c = c3d(d)?;
    let (trace, class_number) = theta_trace(d, &opts.scan, ctx)?;
    let prec = ctx.work_bits();
    let s_numeric = Complex::with_val(prec, &trace / (3 * c));
    let imag = Float::with_val(64, s_numeric.imag().abs_ref()).to_f64();
    if Float::with_val(64, s_numeric.imag().abs_ref()) >= ctx.recognition_tol() {
        return Err(Error::NonRealResidual(format!("{imag:.3e}")));
    }
    let s_d = recognize_rational(&s_numeric, 3 * c, ctx)?;
    let residual = Float::with_val(prec, s_numeric.real() - &s_d).abs().to_f64();
    let sigma_d = sigma(d);
    let mut residuals = Diagnostics {
        precision_bits: ctx.bits,
        class_number,
        imag_residual: imag,
        recognition_residual: residual,
        ..Diagnostics::default()
    };
    let mut t_d = None;
    if opts.with_t_d && is_split_product(d) {
        let t = compute_t_d(d, ctx)?;
        check_squareness(&s_d, &t.t_exact, sigma_d)?;
        let off = match t.parity {
            Parity::Real => t.t_value.imag().to_f64().abs(),
            Parity::Imaginary => t.t_value.real().to_f64().abs(),
        };
        residuals.t_off_axis = Some(off);
        t_d = Some(t.t_exact);
    }
    let point = (opts.point_height > 0 && s_d == 0)
        .then(|| point_search(d, opts.point_height))
        .flatten();
    let verdict = if s_d != 0 {
        Verdict::NoRationalSolutions
    } else {
        let numeric_zero = s_numeric.real().to_f64().abs() < ZERO_THRESHOLD;
        let oracle_zero = if opts.use_oracle {
            let l = l_value_oracle(d, ctx)?;
            residuals.oracle_l_value = Some(l.value.to_f64());
            residuals.oracle_root_number = Some(l.root_number.sign());
            l.value.to_f64().abs() < 1e-8
        } else {
            false
        };
        if numeric_zero && (point.is_some() || oracle_zero) {
            Verdict::ExpectSolutions
        } else {
            Verdict::Unknown
        }
    };
    let mut report = SdReport {
        d,
        s_d,
        s_numeric,
        c3d: c,
        sigma_d,
        t_d,
        sha_prediction: None,
        verdict,
        point,
        residuals,
    };
    report.sha_prediction = predict_sha(&report).ok().and_then(|p| p.order_integer());
    Ok(report)
}

pub fn compute_s_d(d: u64, ctx: &PrecisionContext) -> Result<SdReport> {
    compute_s_d_with(d, &SdOptions::default(), ctx)
}

/// `S_D` with the precision ladder `bits → 2·bits → …` up to [`MAX_BITS`] on recognition failures.
pub fn compute_s_d_with(d: u64, opts: &SdOptions, ctx: &PrecisionContext) -> Result<SdReport> {
    validate_d(d)?;
    let mut ctx = *ctx;
    loop {
        match compute_s_d_once(d, opts, &ctx) {
            Err(Error::RecognitionFailure { .. } | Error::NonRealResidual(_))
                if opts.escalate && ctx.bits < MAX_BITS =>
            {
                ctx = ctx.doubled();
            }
            other => return other,
        }
    }
}

/// `D` is a norm from Q(√-3) when primes `≡ 2 mod 3` occur to even powers.
pub fn is_norm_from_k(d: u64) -> bool {
    arith::factor(d).iter().all(|&(p, e)| p % 3 != 2 || e % 2 == 0)
}

/// `x = 3^{2k} m²` with `k ∈ Z`, `m ∈ Q`.
pub fn is_square_up_to_even_power_of_three(x: &Rational) -> bool {
    if *x < 0 {
        return false;
    }
    if *x == 0 {
        return true;
    }
    let strip = |n: &Integer| -> (u32, Integer) {
        let mut n = n.clone();
        let mut v = 0;
        while n.is_divisible_u(3) {
            n /= 3u32;
            v += 1;
        }
        (v, n)
    };
    let (vn, n) = strip(x.numer());
    let (vd, m) = strip(x.denom());
    (vn + vd) % 2 == 0 && n.is_perfect_square() && m.is_perfect_square()
}

/// Conjectural `#Ш = S_D`, conditional on the full BSD conjecture.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShaPrediction {
    pub order: Rational,
    pub bsd_conditional: bool,
    /// `Some` when `D` is a norm and the square test applies.
    pub square_up_to_three: Option<bool>,
}

impl ShaPrediction {
    pub fn order_integer(&self) -> Option<Integer> {
        (*self.order.denom() == 1).then(|| self.order.numer().clone())
    }
}

pub fn predict_sha(report: &SdReport) -> Result<ShaPrediction> {
    if report.s_d == 0 {
        return Err(Error::NotApplicable(format!("S_{} = 0", report.d)));
    }
    let square = is_norm_from_k(report.d).then(|| is_square_up_to_even_power_of_three(&report.s_d));
    if square == Some(false) {
        return Err(Error::ConsistencyFailure(format!(
            "S_{} = {} is not a square up to an even power of 3",
            report.d, report.s_d
        )));
    }
    Ok(ShaPrediction {
        order: report.s_d.clone(),
        bsd_conditional: true,
        square_up_to_three: square,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(x: f64, prec: u32) -> Complex {
        Complex::with_val(prec, (x, 0))
    }

    #[test]
    fn recognition_examples() {
        let ctx = PrecisionContext::new(256);
        let p = ctx.work_bits();
        let near_one = Complex::with_val(p, 1) - Float::with_val(p, Float::i_exp(1, -200));
        assert_eq!(recognize_rational(&near_one, 3, &ctx).unwrap(), 1);
        let x = Complex::with_val(p, Rational::from((7, 3)));
        assert_eq!(recognize_rational(&x, 9, &ctx).unwrap(), Rational::from((7, 3)));
        let mid = Complex::with_val(p, Rational::from((1, 6)));
        assert!(matches!(recognize_rational(&mid, 3, &ctx), Err(Error::RecognitionFailure { .. })));
        assert!(recognize_rational(&real(0.5, p), 1, &ctx).is_err());
    }

    #[test]
    fn square_tests() {
        assert!(is_square_up_to_even_power_of_three(&Rational::from(4)));
        assert!(is_square_up_to_even_power_of_three(&Rational::from((4, 9))));
        assert!(is_square_up_to_even_power_of_three(&Rational::from(36)));
        assert!(!is_square_up_to_even_power_of_three(&Rational::from(3)));
        assert!(!is_square_up_to_even_power_of_three(&Rational::from(2)));
        assert!(is_norm_from_k(7) && is_norm_from_k(25) && !is_norm_from_k(5));
    }

    #[test]
    fn s7_vanishes() {
        let ctx = PrecisionContext::default();
        let r = compute_s_d(7, &ctx).unwrap();
        assert_eq!(r.s_d, 0);
        assert_eq!(r.verdict, Verdict::ExpectSolutions);
        assert_eq!(r.t_d.as_ref().unwrap().coefficient, 0);
        assert!(predict_sha(&r).is_err());
    }

    #[test]
    fn r_half_vanishes() {
        let ctx = PrecisionContext::new(128);
        let b = sqrt_minus3_mod(12 * 49, true).unwrap();
        let (p1, p2) = pi_dividing_tau(7, &b).unwrap();
        let z = Complex::with_val(ctx.work_bits(), (0.13, 0.4));
        let r = r_series(7, Mu::Half, &z, &p1, &p2, &ctx).unwrap();
        assert!(Float::with_val(64, r.abs_ref()) < 1e-30);
    }
}
