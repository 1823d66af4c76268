//! Numerical checks of the identities behind the two trace formulas.
//!
//! Every check evaluates both sides independently and reports the residual
//! `|lhs - rhs| / max(1, |rhs|)` against `ctx.tol()`. Random parameters come
//! from a ChaCha stream seeded per check, so reports are reproducible.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::ops::{Pow, RemRounding};
use rug::{Complex, Float, Integer, Rational};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::arith;
use crate::eisenstein::{
    chi_pi_rational, factor_primary, gauss_sum_unchecked, split_prime_element, CubeRootOfUnity,
};
use crate::error::{Error, Result};
use crate::formulas::{self, lifted_units};
use crate::ideals::{
    crt_pair, enumerate_class_reps, lattice_coords, pi_dividing_tau, split_product_parts, sqrt_minus3_mod,
    PrimitiveIdeal, RepScan,
};
use crate::modular::{
    eta_at, exp_2pi_i_rational, ideal_count_coefficients, lattice_counts, pi, sqrt3, theta_half, theta_half_at,
    theta_k, theta_k_at, theta_k_direct, theta_shifted, KPoint, Mu, PrecisionContext,
};

/// A complex value printed with enough digits to be compared by eye.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: String,
    pub im: String,
}

impl From<&Complex> for ComplexValue {
    fn from(z: &Complex) -> Self {
        ComplexValue {
            re: format!("{:.40e}", z.real()),
            im: format!("{:.40e}", z.imag()),
        }
    }
}

impl ComplexValue {
    pub fn to_f64(&self) -> (f64, f64) {
        let parse = |s: &str| Float::parse(s).map(|p| Float::with_val(64, p).to_f64()).unwrap_or(f64::NAN);
        (parse(&self.re), parse(&self.im))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// Outcome of one identity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResult {
    pub identity_id: String,
    pub parameters: BTreeMap<String, Value>,
    pub lhs: ComplexValue,
    pub rhs: ComplexValue,
    /// `None` when skipped.
    pub residual: Option<f64>,
    pub tol: f64,
    pub pass: bool,
    pub status: Status,
    pub precision_bits: u32,
}

fn params(v: Value) -> BTreeMap<String, Value> {
    match v {
        Value::Object(m) => m.into_iter().collect(),
        _ => BTreeMap::new(),
    }
}

impl IdentityResult {
    /// Relative comparison `|lhs - rhs| / max(1, |rhs|) < tol`.
    pub fn compare(id: &str, parameters: Value, lhs: &Complex, rhs: &Complex, ctx: &PrecisionContext) -> Self {
        let prec = ctx.work_bits();
        let diff = Float::with_val(prec, Complex::with_val(prec, lhs - rhs).abs_ref());
        let scale = Float::with_val(prec, rhs.abs_ref()).max(&Float::with_val(prec, 1));
        let residual = Float::with_val(prec, diff / scale);
        let tol = ctx.tol();
        let pass = residual < tol;
        IdentityResult {
            identity_id: id.to_string(),
            parameters: params(parameters),
            lhs: ComplexValue::from(lhs),
            rhs: ComplexValue::from(rhs),
            residual: Some(residual.to_f64()),
            tol: tol.to_f64(),
            pass,
            status: if pass { Status::Pass } else { Status::Fail },
            precision_bits: ctx.bits,
        }
    }

    /// Checks that `value` vanishes.
    pub fn vanishes(id: &str, parameters: Value, value: &Complex, ctx: &PrecisionContext) -> Self {
        Self::compare(id, parameters, value, &Complex::new(ctx.work_bits()), ctx)
    }

    pub fn skipped(id: &str, parameters: Value, lhs: &Complex, ctx: &PrecisionContext) -> Self {
        IdentityResult {
            identity_id: id.to_string(),
            parameters: params(parameters),
            lhs: ComplexValue::from(lhs),
            rhs: ComplexValue::from(&Complex::new(ctx.work_bits())),
            residual: None,
            tol: ctx.tol().to_f64(),
            pass: false,
            status: Status::Skipped,
            precision_bits: ctx.bits,
        }
    }
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A random point with the given ranges; the coordinates are exact `f64`s.
fn random_z(rng: &mut ChaCha8Rng, x: (f64, f64), y: (f64, f64), prec: u32) -> (Complex, Value) {
    let re = rng.gen_range(x.0..x.1);
    let im = rng.gen_range(y.0..y.1);
    (Complex::with_val(prec, (re, im)), json!([re, im]))
}

fn omega(prec: u32) -> Complex {
    CubeRootOfUnity::new(1).to_complex(prec)
}

fn i_sqrt3(prec: u32) -> Complex {
    Complex::with_val(prec, (Float::new(prec), sqrt3(prec)))
}

fn tail_ln(ctx: &PrecisionContext) -> f64 {
    -(ctx.tail_eps_log2 as f64) * LN_2
}

fn rational_phase(q: &Rational, prec: u32) -> Complex {
    exp_2pi_i_rational(q.numer(), q.denom(), prec)
}

fn rat(s: &str) -> Rational {
    s.parse().expect("literal rational")
}

/// `θ[μ; ν](z) = Σ_{n ∈ Z + μ} e^{πi n² z + 2πi ν n}`.
pub fn theta_characteristic(mu: &Rational, nu: &Rational, z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    let prec = ctx.work_bits();
    let y = z.imag().to_f64();
    if y <= 0.0 {
        return Err(Error::InvalidInput(format!("Im z = {y} is not positive")));
    }
    let x = (tail_ln(ctx) / (std::f64::consts::PI * y)).sqrt() + 2.0;
    let shift = mu.to_f64();
    let lo = (-x - shift).floor() as i64;
    let hi = (x - shift).ceil() as i64;
    if (hi - lo) as usize > ctx.max_terms {
        return Err(Error::PrecisionBudgetExceeded((hi - lo) as usize));
    }
    let ipz = Complex::with_val(prec, z * Complex::with_val(prec, (0, 1))) * pi(prec);
    let mut s = Complex::new(prec);
    for k in lo..=hi {
        let n = Rational::from(mu + k);
        let n2 = Float::with_val(prec, &Rational::from(n.square_ref()));
        let e = Complex::with_val(prec, &ipz * n2).exp();
        s += e * rational_phase(&Rational::from(nu * &n), prec);
    }
    Ok(s)
}

/// `Σ_{m,n} e^{2πi(mν + nμ)} e^{π s (imn - |mz - n|²/(2y))}`.
fn lattice_sum(s: &Rational, mu: &Rational, nu: &Rational, z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    let prec = ctx.work_bits();
    let (xf, yf) = (z.real().to_f64(), z.imag().to_f64());
    let sf = s.to_f64();
    let t = tail_ln(ctx);
    let pi_f = std::f64::consts::PI;
    let mmax = (2.0 * t / (pi_f * sf * yf)).sqrt() as i64 + 2;
    let width = (2.0 * yf * t / (pi_f * sf)).sqrt() + 2.0;
    let terms = (2 * mmax + 1) as f64 * (2.0 * width + 1.0);
    if terms > ctx.max_terms as f64 {
        return Err(Error::PrecisionBudgetExceeded(terms as usize));
    }
    let x = Float::with_val(prec, z.real());
    let y = Float::with_val(prec, z.imag());
    let decay = Float::with_val(prec, -pi(prec) * Float::with_val(prec, s.numer()))
        / Float::with_val(prec, s.denom())
        / Float::with_val(prec, &y * 2u32);
    let half_s = Rational::from(s / 2u32);
    let mut acc = Complex::new(prec);
    for m in -mmax..=mmax {
        let c = m as f64 * xf;
        let lo = (c - width).floor() as i64;
        let hi = (c + width).ceil() as i64;
        let my2 = Float::with_val(prec, &y * m).square();
        for n in lo..=hi {
            let dx = Float::with_val(prec, &x * m) - n;
            let mag = Float::with_val(prec, &decay * (dx.square() + &my2)).exp();
            let turns = Rational::from(nu * m) + Rational::from(mu * n) + Rational::from(&half_s * (m * n));
            acc += rational_phase(&turns, prec) * mag;
        }
    }
    Ok(acc)
}

/// Coefficient-wise Siegel–Weil check and `L(1, ε) = π√3/9`.
pub fn check_siegel_weil(nmax: usize, ctx: &PrecisionContext) -> IdentityResult {
    let nmax = nmax.max(1);
    let r = ideal_count_coefficients(nmax);
    let counts = lattice_counts(nmax);
    let mismatches: Vec<usize> = (1..=nmax).filter(|&n| 6 * r[n] != counts[n] as i64).collect();
    let prec = ctx.work_bits();
    let lhs = Complex::with_val(prec, l_one_epsilon(prec));
    let rhs = Complex::with_val(prec, pi(prec) * sqrt3(prec) / 9u32);
    let mut res = IdentityResult::compare(
        "siegel_weil",
        json!({ "nmax": nmax, "coefficient_mismatches": mismatches.len(), "first_mismatch": mismatches.first() }),
        &lhs,
        &rhs,
        ctx,
    );
    if !mismatches.is_empty() {
        res.residual = Some(f64::INFINITY);
        res.pass = false;
        res.status = Status::Fail;
    }
    res
}

/// Bernoulli numbers `B_0 … B_n` from `Σ_{k≤m} C(m+1, k) B_k = 0`.
fn bernoulli(n: usize) -> Vec<Rational> {
    let mut b = vec![Rational::from(1)];
    for m in 1..=n {
        let mut c = Integer::from(1);
        let mut acc = Rational::new();
        for (k, bk) in b.iter().enumerate() {
            acc += Rational::from(bk * &c);
            c = c * (m + 1 - k) as u64 / (k + 1) as u64;
        }
        b.push(-acc / Integer::from(m + 1));
    }
    b
}

/// `L(1, ε) = Σ_{m≥0} (1/(3m+1) - 1/(3m+2))`: the first `M` pairs directly, the tail by
/// Euler–Maclaurin with the derivatives of `1/(3t+1) - 1/(3t+2)`.
pub fn l_one_epsilon(prec: u32) -> Float {
    let big_m = prec as u64;
    let mut head = Float::new(prec);
    for m in (0..big_m).rev() {
        head += Float::with_val(prec, 1) / (3 * m + 1) - Float::with_val(prec, 1) / (3 * m + 2);
    }
    let u = Float::with_val(prec, 3 * big_m + 1);
    let v = Float::with_val(prec, 3 * big_m + 2);
    let mut tail = Float::with_val(prec, &v / &u).ln() / 3u32;
    tail += (Float::with_val(prec, 1) / &u - Float::with_val(prec, 1) / &v) / 2u32;
    let eps = Float::with_val(64, Float::i_exp(1, -(prec as i32) - 8));
    let jmax = prec as usize;
    let b = bernoulli(2 * jmax);
    // f^{(k)}(t) = (-3)^k k! ((3t+1)^{-k-1} - (3t+2)^{-k-1})
    let mut fact = Float::with_val(prec, 1);
    let mut three_k = Float::with_val(prec, 1);
    for k in 1..2 * jmax {
        fact *= k as u64;
        three_k *= 3u32;
        if k % 2 == 0 {
            continue;
        }
        let j = k.div_ceil(2);
        let uk = Float::with_val(prec, (&u).pow(-(k as i32) - 1));
        let vk = Float::with_val(prec, (&v).pow(-(k as i32) - 1));
        // odd k: (-3)^k = -3^k
        let deriv = -Float::with_val(prec, &three_k * &fact) * (uk - vk);
        let mut two_j_fact = Float::with_val(prec, &fact);
        two_j_fact *= (2 * j) as u64;
        let term = Float::with_val(prec, &b[2 * j]) * deriv / two_j_fact;
        tail -= &term;
        if term.abs() < eps {
            break;
        }
    }
    head + tail
}

const MU_NU_CHOICES: [&str; 6] = ["0", "1/6", "-1/6", "1/2", "-1/2", "1/3"];

fn factorization_one(a: u64, mu: &Rational, nu: &Rational, z: &Complex, ctx: &PrecisionContext) -> Result<(Complex, Complex)> {
    let prec = ctx.work_bits();
    let lhs = lattice_sum(&Rational::from((1, a)), mu, nu, z, ctx)?;
    let y = Float::with_val(prec, z.imag());
    let amu = Rational::from(mu * a);
    let neg_anu = Rational::from(nu * a) * -1i32;
    let t1 = theta_characteristic(&amu, nu, &Complex::with_val(prec, z / a), ctx)?;
    let zbar = Complex::with_val(prec, z.conj_ref());
    let t2 = theta_characteristic(mu, &neg_anu, &Complex::with_val(prec, zbar * -(a as i64)), ctx)?;
    let root = Float::with_val(prec, y * (2 * a)).sqrt();
    Ok((lhs, t1 * t2 * root))
}

/// Both sides of the factorization formula at random parameters, followed by
/// its sum over `r ∈ Z/7` variant.
pub fn check_factorization(samples: usize, seed: u64, ctx: &PrecisionContext) -> Result<Vec<IdentityResult>> {
    let prec = ctx.work_bits();
    let mut rng = seeded(seed, 1);
    let mut cases: Vec<(u64, Rational, Rational, Complex, Value)> = vec![
        (1, rat("0"), rat("0"), Complex::with_val(prec, (0.0, 1.0)), json!([0.0, 1.0])),
        (2, rat("1/6"), rat("1/2"), Complex::with_val(prec, (0.3, 1.1)), json!([0.3, 1.1])),
    ];
    while cases.len() < samples.max(1) {
        let a = rng.gen_range(1..=5u64);
        let mu = rat(MU_NU_CHOICES[rng.gen_range(0..MU_NU_CHOICES.len())]);
        let nu = rat(MU_NU_CHOICES[rng.gen_range(0..MU_NU_CHOICES.len())]);
        let (z, zv) = random_z(&mut rng, (-1.0, 1.0), (0.2, 2.0), prec);
        cases.push((a, mu, nu, z, zv));
    }
    cases.truncate(samples.max(1));
    let mut out: Vec<IdentityResult> = cases
        .par_iter()
        .map(|(a, mu, nu, z, zv)| {
            let (lhs, rhs) = factorization_one(*a, mu, nu, z, ctx)?;
            Ok(IdentityResult::compare(
                "factorization",
                json!({ "a": a, "mu": mu.to_string(), "nu": nu.to_string(), "z": zv, "seed": seed }),
                &lhs,
                &rhs,
                ctx,
            ))
        })
        .collect::<Result<_>>()?;
    for _ in 0..3 {
        let a = rng.gen_range(1..=5u64);
        let mu = rat(MU_NU_CHOICES[rng.gen_range(0..MU_NU_CHOICES.len())]);
        let nu = rat(MU_NU_CHOICES[rng.gen_range(0..MU_NU_CHOICES.len())]);
        let (z, zv) = random_z(&mut rng, (-1.0, 1.0), (0.3, 1.5), prec);
        let (lhs, rhs) = factorization_sum_over_r(7, a, &mu, &nu, &z, ctx)?;
        out.push(IdentityResult::compare(
            "factorization_sum_r",
            json!({ "D": 7, "a": a, "mu": mu.to_string(), "nu": nu.to_string(), "z": zv, "seed": seed }),
            &lhs,
            &rhs,
            ctx,
        ));
    }
    Ok(out)
}

/// `Σ_r √(2ay/D) θ[aμ + ar/D; ν](Dz/a) θ[μ + r/D; -aν](-aD z̄)` against the lattice sum
/// with scale `D/a` and shift `Dμ`.
fn factorization_sum_over_r(
    d: u64,
    a: u64,
    mu: &Rational,
    nu: &Rational,
    z: &Complex,
    ctx: &PrecisionContext,
) -> Result<(Complex, Complex)> {
    let prec = ctx.work_bits();
    let y = Float::with_val(prec, z.imag());
    let root = Float::with_val(prec, y * (2 * a) / d).sqrt();
    let z1 = Complex::with_val(prec, z * d) / a;
    let z2 = Complex::with_val(prec, z.conj_ref()) * -((a * d) as i64);
    let neg_anu = Rational::from(nu * a) * -1i32;
    let mut lhs = Complex::new(prec);
    for r in 0..d {
        let shift = Rational::from((r, d));
        let m1 = Rational::from(mu + &shift) * a;
        let m2 = Rational::from(mu + &shift);
        lhs += theta_characteristic(&m1, nu, &z1, ctx)? * theta_characteristic(&m2, &neg_anu, &z2, ctx)?;
    }
    lhs *= root;
    let rhs = lattice_sum(&Rational::from((d, a)), &Rational::from(mu * d), nu, z, ctx)?;
    Ok((lhs, rhs))
}

/// p-adic fractional part of `q`, in `[0, 1)`.
pub fn frac_p(q: &Rational, p: u32) -> Rational {
    let mut pk = Integer::from(1);
    let mut v = q.denom().clone();
    while v.is_divisible_u(p) {
        v /= p;
        pk *= p;
    }
    if pk == 1 {
        return Rational::new();
    }
    let vinv = v.invert(&pk).expect("v prime to p");
    Rational::from(((q.numer() * vinv).rem_euc(&pk), pk))
}

/// `(a, b; c, d) ∈ SL₂(Z)` with `b = 3D²`, `d = a⁻¹ mod b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Matrix {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

/// The admissible matrix with top-left entry `a ≡ 1 mod 6`.
pub fn admissible_matrix(big_d: u64, a: i64) -> Result<Matrix> {
    let b = 3 * (big_d as i64).pow(2);
    if a.rem_euclid(6) != 1 || a <= 1 {
        return Err(Error::NoAdmissibleMatrix(big_d));
    }
    let d = arith::inv_mod(a as i128, b as i128).ok_or(Error::NoAdmissibleMatrix(big_d))? as i64;
    let c = (a * d - 1) / b;
    let m = Matrix { a, b, c, d };
    if m.a * m.d - m.b * m.c != 1 {
        return Err(Error::NoAdmissibleMatrix(big_d));
    }
    Ok(m)
}

/// The phase `e^{πi(a-1)/2} χ_{0,6}(a) e^{2πi Frac₂((ba - c/a)/8)} e^{2πi t_μ Frac₃((ba/2)/9)}`
/// in turns, for `a, d > 0`.
pub fn transformation_turns(m: &Matrix, mu: Mu) -> Rational {
    let a = Integer::from(m.a);
    let b = Integer::from(m.b);
    let c = Integer::from(m.c);
    let base = Rational::from((m.a - 1, 4)) + Rational::from((m.a - 1, 8));
    let ba = Integer::from(&b * &a);
    let two = frac_p(&(Rational::from((ba.clone(), 8)) - Rational::from((c, Integer::from(&a * 8u32)))), 2);
    let three = match mu {
        Mu::Sixth => frac_p(&Rational::from((ba, 18)), 3),
        Mu::Half => Rational::new(),
    };
    let t = base + two + three;
    let floor = t.clone().floor();
    t - floor
}

/// Weight-½ transformation law, Fourier law, `θ^{(r)}` expansion, functional equation,
/// `Θ(z + k/3)` and the theta vanishing identities.
pub fn check_appendix_transforms(big_d: u64, seed: u64, ctx: &PrecisionContext) -> Result<Vec<IdentityResult>> {
    let prec = ctx.work_bits();
    let mut rng = seeded(seed, 100 + big_d);
    let mut out = Vec::new();

    let mut zs = vec![(Complex::with_val(prec, (0.1, 0.9)), json!([0.1, 0.9]))];
    zs.extend((0..2).map(|_| random_z(&mut rng, (-0.5, 0.5), (0.4, 1.5), prec)));
    let factor = Complex::with_val(prec, -i_sqrt3(prec));
    for (z, zv) in &zs {
        let w = Complex::with_val(prec, -1) / Complex::with_val(prec, z * 3u32);
        let lhs = theta_k(&w, ctx)?;
        let rhs = Complex::with_val(prec, &factor * z) * theta_k(z, ctx)?;
        out.push(IdentityResult::compare("functional_equation", json!({ "z": zv }), &lhs, &rhs, ctx));
    }

    let w = omega(prec);
    for k in 1..=2u32 {
        let (z, zv) = random_z(&mut rng, (-0.5, 0.5), (0.3, 1.2), prec);
        let lhs = theta_k(&(Complex::with_val(prec, &z) + Float::with_val(prec, k) / 3u32), ctx)?;
        let wk = Complex::with_val(prec, w.clone().pow(k));
        let t3 = theta_k(&Complex::with_val(prec, &z * 3u32), ctx)?;
        let rhs = (Complex::with_val(prec, 1) - &wk) * t3 + wk * theta_k(&z, ctx)?;
        out.push(IdentityResult::compare("theta_plus_k_third", json!({ "k": k, "z": zv }), &lhs, &rhs, ctx));
    }

    let base = KPoint::new(-3, 1, 6)?;
    out.push(IdentityResult::vanishes(
        "theta_zero_at_cusp_point",
        json!({ "z": "(-3+sqrt(-3))/6" }),
        &theta_k_direct(&base.to_complex(prec), ctx)?,
        ctx,
    ));
    if !big_d.is_multiple_of(3) {
        for ideal in enumerate_class_reps(big_d)?.reps.iter().filter(|i| i.a > 1) {
            let (a, b) = (ideal.a, Integer::from(ideal.b));
            let two_a = Integer::from(2 * a);
            let b3 = (0..3u32)
                .map(|t| &b + Integer::from(&two_a * t))
                .find(|x| x.is_divisible_u(3))
                .expect("2a is prime to 3");
            let p = KPoint::cm(&Integer::from(3 * a), &b3);
            out.push(IdentityResult::vanishes(
                "theta_zero_at_third_of_cm_point",
                json!({ "a": a, "b": b3.to_string() }),
                &theta_k_direct(&p.to_complex(prec), ctx)?,
                ctx,
            ));
        }
    }

    if big_d % 6 != 1 {
        return Ok(out);
    }
    let di = big_d as i64;

    let mut matrix_a = vec![if arith::gcd(13, big_d) == 1 { 13 } else { 19 }];
    while matrix_a.len() < 3 {
        let a = 6 * rng.gen_range(1..16i64) + 1;
        if arith::gcd(a as u64, big_d) == 1 && !matrix_a.contains(&a) {
            matrix_a.push(a);
        }
    }
    for &a in &matrix_a {
        let m = admissible_matrix(big_d, a)?;
        let x0: f64 = rng.gen_range(-1.0..1.0);
        let t: f64 = rng.gen_range(0.5..1.5);
        // z = (-d + x0 + it)/c, so that cz + d = x0 + it
        let z = Complex::with_val(prec, (x0 - m.d as f64, t)) / m.c;
        let cz_d = Complex::with_val(prec, &z * m.c) + m.d;
        let mz = Complex::with_val(prec, &z * m.a) + m.b;
        let mz = mz / &cz_d;
        let root = cz_d.sqrt();
        let r_rand = rng.gen_range(0..6 * di);
        for mu in [Mu::Sixth, Mu::Half] {
            let phase = rational_phase(&transformation_turns(&m, mu), prec);
            for r in [1, r_rand] {
                let lhs = theta_half(r, big_d, mu, &mz, ctx)?;
                let rhs = theta_half(m.a * r, big_d, mu, &z, ctx)? * &phase * &root;
                out.push(IdentityResult::compare(
                    "weight_half_transformation",
                    json!({
                        "D": big_d, "matrix": [m.a, m.b, m.c, m.d], "r": r, "mu": mu.to_string(),
                        "x0": x0, "t": t, "seed": seed
                    }),
                    &lhs,
                    &rhs,
                    ctx,
                ));
            }
        }
    }

    let r_rand = rng.gen_range(0..6 * di);
    for r in [1, 2, r_rand] {
        let (z, zv) = random_z(&mut rng, (-0.5, 0.5), (0.5, 1.5), prec);
        let lhs = theta_half(r, big_d, Mu::Sixth, &Complex::with_val(prec, &z * 3u32), ctx)?;
        let big_z = Complex::with_val(prec, -3) / &z;
        let minus_iz = Complex::with_val(prec, &z * Complex::with_val(prec, (0, -1)));
        let sign = if r.rem_euclid(2) == 0 { 1 } else { -1 };
        let pre = Complex::with_val(prec, &w * sign)
            * exp_2pi_i_rational(&Integer::from(di - 1), &Integer::from(12), prec)
            / (i_sqrt3(prec) * minus_iz.sqrt());
        let w2 = Complex::with_val(prec, w.square_ref());
        let body = theta_shifted(3 * r, big_d, Mu::Sixth, &big_z, ctx)?
            - Complex::with_val(prec, &w * theta_shifted(-3 * r, big_d, Mu::Sixth, &big_z, ctx)?)
            - w2 * theta_shifted(3 * r, big_d, Mu::Half, &big_z, ctx)?;
        out.push(IdentityResult::compare(
            "fourier_transformation",
            json!({ "D": big_d, "r": r, "z": zv, "seed": seed }),
            &lhs,
            &(pre * body),
            ctx,
        ));
    }

    let r_rand = rng.gen_range(0..di);
    for mu in [Mu::Sixth, Mu::Half] {
        for r in [1, r_rand] {
            let (z, zv) = random_z(&mut rng, (-0.5, 0.5), (0.5, 1.5), prec);
            let z3 = Complex::with_val(prec, &z * 3u32);
            let lhs = theta_shifted(r, big_d, mu, &Complex::with_val(prec, &z3 / (di * di)), ctx)?;
            let mut rhs = Complex::new(prec);
            for s in (1..6 * di).step_by(6) {
                let e = exp_2pi_i_rational(&Integer::from(r * s), &Integer::from(di), prec);
                rhs -= theta_half(s, big_d, mu, &z3, ctx)? * e;
            }
            out.push(IdentityResult::compare(
                "shifted_theta_expansion",
                json!({ "D": big_d, "r": r, "mu": mu.to_string(), "z": zv, "seed": seed }),
                &lhs,
                &rhs,
                ctx,
            ));
        }
    }
    Ok(out)
}

fn squarefree_split(big_d: u64) -> Result<()> {
    if big_d == 1 {
        return Ok(());
    }
    let (_, _, d2) = split_product_parts(big_d)?;
    if d2 != 1 {
        return Err(Error::InvalidInput(format!("D = {big_d} is not squarefree")));
    }
    Ok(())
}

fn half_trace_root(big_d: u64) -> Result<Integer> {
    sqrt_minus3_mod(12 * big_d * big_d, true)
}

/// `η(τ/D²)/η(τ) = (-1)^{(D-1)/6} π̄` at `τ = (-b + √-3)/2` with `π² | τ`.
pub fn check_eta_ratio(big_d: u64, ctx: &PrecisionContext) -> Result<IdentityResult> {
    squarefree_split(big_d)?;
    let prec = ctx.work_bits();
    let b = half_trace_root(big_d)?;
    let pi_el = if big_d == 1 {
        crate::eisenstein::PrimaryElement::one()
    } else {
        pi_dividing_tau(big_d, &b)?.0
    };
    let tau = KPoint::cm(&Integer::from(1), &b);
    let lhs = eta_at(&KPoint::cm(&Integer::from(big_d * big_d), &b), ctx)? / eta_at(&tau, ctx)?;
    let sign = if ((big_d - 1) / 6).is_multiple_of(2) { 1 } else { -1 };
    let rhs = pi_el.value().conj().to_complex(prec) * sign;
    Ok(IdentityResult::compare(
        "eta_ratio",
        json!({ "D": big_d, "b": b.to_string(), "pi": pi_el.to_string() }),
        &lhs,
        &rhs,
        ctx,
    ))
}

/// `R_{D,1/2} ≡ 0`, `R_{D,1/6}(τ)/R_{D,1/6}(τ/3) ∈ μ₃`, the `θ^{(r)}` unwinding relation and
/// `T_D = (-1)^σ conj(T_D)`, for a squarefree split product `D`.
pub fn check_r_relations(big_d: u64, seed: u64, ctx: &PrecisionContext) -> Result<Vec<IdentityResult>> {
    squarefree_split(big_d)?;
    if big_d == 1 {
        return Ok(Vec::new());
    }
    let prec = ctx.work_bits();
    let mut rng = seeded(seed, 200 + big_d);
    let b = half_trace_root(big_d)?;
    let (pi1, pi2) = pi_dividing_tau(big_d, &b)?;
    let mut out = Vec::new();

    for _ in 0..20 {
        let (z, zv) = random_z(&mut rng, (-0.5, 0.5), (0.3, 1.2), prec);
        let v = formulas::r_series(big_d, Mu::Half, &z, &pi1, &pi2, ctx)?;
        out.push(IdentityResult::vanishes("r_half_vanishes", json!({ "D": big_d, "z": zv, "seed": seed }), &v, ctx));
    }

    let one = Integer::from(1);
    let tau = KPoint::cm(&one, &b);
    let tau3 = KPoint::cm(&Integer::from(3), &b);
    let r_tau = formulas::r_series_at(big_d, Mu::Sixth, &tau, &pi1, &pi2, ctx)?;
    let r_tau3 = formulas::r_series_at(big_d, Mu::Sixth, &tau3, &pi1, &pi2, ctx)?;
    let p = json!({ "D": big_d, "b": b.to_string() });
    if Float::with_val(prec, r_tau3.abs_ref()) < ctx.tol() * 10u32 {
        out.push(IdentityResult::skipped("r_third_root_of_unity", p, &r_tau3, ctx));
    } else {
        let ratio = Complex::with_val(prec, &r_tau / &r_tau3);
        let nearest = (0..3)
            .map(|k| CubeRootOfUnity::new(k).to_complex(prec))
            .min_by(|x, y| {
                let dx = Float::with_val(64, Complex::with_val(prec, &ratio - x).abs_ref());
                let dy = Float::with_val(64, Complex::with_val(prec, &ratio - y).abs_ref());
                dx.partial_cmp(&dy).expect("finite")
            })
            .expect("three roots");
        out.push(IdentityResult::compare("r_third_root_of_unity", p, &ratio, &nearest, ctx));
    }

    let pib = pi1.conj();
    let fb = factor_primary(&pib)?;
    let mut g = Complex::new(prec);
    for r in 1..big_d as i64 {
        if let Some(chi) = chi_pi_rational(r, &fb) {
            g += exp_2pi_i_rational(&Integer::from(r), &Integer::from(big_d), prec) * chi.to_complex(prec);
        }
    }
    let pib_c = pib.value().to_complex(prec);
    let sign = if big_d.div_ceil(2).is_multiple_of(2) { 1 } else { -1 };
    let small = KPoint::cm(&Integer::from(big_d * big_d), &b)
        .scale(&Integer::from(3), &one)
        .to_complex(prec);
    let theta0 = theta_half(0, 1, Mu::Sixth, &small, ctx)?;
    for mu in [Mu::Sixth, Mu::Half] {
        let mut lhs = Complex::new(prec);
        for r in lifted_units(big_d) {
            let chi = chi_pi_rational(r, &fb).ok_or_else(|| Error::NotCoprime(format!("r = {r}")))?;
            lhs += theta_shifted(r, big_d, mu, &small, ctx)? * chi.to_complex(prec);
        }
        lhs /= &theta0;
        let r_mu = formulas::r_series_at(big_d, mu, &tau, &pi1, &pi2, ctx)?;
        let rhs = Complex::with_val(prec, &g * sign) / &pib_c * r_mu;
        out.push(IdentityResult::compare(
            "shifted_trace_unwinding",
            json!({ "D": big_d, "mu": mu.to_string(), "b": b.to_string() }),
            &lhs,
            &rhs,
            ctx,
        ));
    }

    let td = formulas::compute_t_d(big_d, ctx)?;
    let sig = formulas::sigma(big_d);
    let conj = Complex::with_val(prec, td.t_value.conj_ref()) * if sig.is_multiple_of(2) { 1 } else { -1 };
    out.push(IdentityResult::compare(
        "t_conjugation",
        json!({ "D": big_d, "sigma": sig, "k0": td.k0 }),
        &td.t_value,
        &conj,
        ctx,
    ));
    Ok(out)
}

/// `G(χ_π)³ = -p π̄` for primes `p ≡ 1 mod 3`.
pub fn check_gauss_cube(primes: &[u64], ctx: &PrecisionContext) -> Result<Vec<IdentityResult>> {
    let prec = ctx.work_bits();
    primes
        .iter()
        .map(|&p| {
            let pi_el = split_prime_element(p)?;
            let g = gauss_sum_unchecked(&pi_el, ctx)?;
            let lhs = Complex::with_val(prec, g.square_ref()) * &g;
            let rhs = pi_el.value().conj().to_complex(prec) * -(p as i64);
            Ok(IdentityResult::compare("gauss_sum_cube", json!({ "p": p, "pi": pi_el.to_string() }), &lhs, &rhs, ctx))
        })
        .collect()
}

/// `Θ_K((-9 + √-3)/18) = -6Γ(1/3)³/(2π)²`.
pub fn check_special_value(ctx: &PrecisionContext) -> Result<IdentityResult> {
    let prec = ctx.work_bits();
    let lhs = theta_k_direct(&KPoint::new(-9, 1, 18)?.to_complex(prec), ctx)?;
    let gamma = Float::with_val(prec, Float::with_val(prec, 1) / 3u32).gamma();
    let two_pi = pi(prec) * 2u32;
    let rhs = Complex::with_val(prec, gamma.pow(3u32) * -6i32 / two_pi.square());
    Ok(IdentityResult::compare("theta_special_value", json!({ "z": "(-9+sqrt(-3))/18" }), &lhs, &rhs, ctx))
}

/// `f_r(z) = θ_{r,1/6}(z)/θ_{0,1/6}(z)` at level `D`.
fn f_r(r: i64, big_d: u64, z: &KPoint, ctx: &PrecisionContext) -> Result<Complex> {
    Ok(theta_half_at(r, big_d, Mu::Sixth, z, ctx)? / theta_half_at(0, 1, Mu::Sixth, z, ctx)?)
}

/// A root `b` of `-3` modulo `12D²a²`, odd, congruent to the half-trace root mod `12D²`,
/// with the generator of `ideal` dividing `τ_b`.
fn galois_b(big_d: u64, b0: &Integer, ideal: &PrimitiveIdeal) -> Integer {
    let a = Integer::from(ideal.a);
    let a2 = Integer::from(a.square_ref());
    let lifted = (0..ideal.a)
        .map(|t| Integer::from(ideal.b) + Integer::from(&a * t))
        .find(|x| (Integer::from(x.square_ref()) + 3u32).is_divisible(&a2))
        .expect("Hensel lift at an unramified prime");
    let m = Integer::from(12 * big_d * big_d);
    let b = crt_pair(&Integer::from(b0.rem_euc(&m)), &m, &Integer::from((&lifted).rem_euc(&a2)), &a2);
    if b.is_even() {
        b + m * a2
    } else {
        b
    }
}

/// Conjugation structure of the values entering the trace.
pub fn check_galois_structure(big_d: u64, ctx: &PrecisionContext) -> Result<Vec<IdentityResult>> {
    let prec = ctx.work_bits();
    let reps = enumerate_class_reps(big_d)?;
    let theta_omega = theta_k_at(&KPoint::omega(), ctx)?;
    let mut out: Vec<IdentityResult> = reps
        .reps
        .par_iter()
        .map(|ideal| {
            let lhs = theta_k_direct(&ideal.cm_point().to_kpoint().to_complex(prec), ctx)?;
            let rhs = ideal.generator.value().conj().to_complex(prec) * &theta_omega;
            Ok(IdentityResult::compare(
                "theta_at_cm_point",
                json!({ "D": big_d, "a": ideal.a, "b": ideal.b, "k": ideal.generator.to_string() }),
                &lhs,
                &rhs,
                ctx,
            ))
        })
        .collect::<Result<_>>()?;

    let trace = if big_d == 1 {
        Complex::with_val(prec, 1)
    } else {
        formulas::theta_trace(big_d, &RepScan::default(), ctx)?.0
    };
    let nearest = Float::with_val(prec, trace.real().round_ref());
    out.push(IdentityResult::compare(
        "trace_rational",
        json!({ "D": big_d, "classes": reps.len() }),
        &trace,
        &Complex::with_val(prec, nearest),
        ctx,
    ));

    let di = Integer::from(big_d);
    let one = Integer::from(1);
    let values: Vec<Complex> = reps
        .reps
        .par_iter()
        .map(|ideal| {
            let tau = ideal.cm_point().to_kpoint();
            Ok(theta_k_at(&tau.scale(&di, &one), ctx)? / theta_k_at(&tau, ctx)?)
        })
        .collect::<Result<_>>()?;
    let mut coeffs = vec![Complex::with_val(prec, 1)];
    for v in &values {
        let mut next = vec![Complex::new(prec); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] += Complex::with_val(prec, c * v);
        }
        coeffs = next;
    }
    for (k, e) in coeffs.iter().enumerate().skip(1) {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        let dk = Integer::from((&di).pow(k as u32));
        let x: Complex = Complex::with_val(prec, e * &dk) * sign;
        let nearest = Float::with_val(prec, x.real().round_ref());
        out.push(IdentityResult::compare(
            "symmetric_function_integral",
            json!({ "D": big_d, "k": k }),
            &x,
            &Complex::with_val(prec, nearest),
            ctx,
        ));
    }

    if big_d == 1 || squarefree_split(big_d).is_err() {
        return Ok(out);
    }
    let b0 = half_trace_root(big_d)?;
    let three_d = Integer::from(3 * big_d);
    let rs: Vec<i64> = lifted_units(big_d).collect();
    let orbit: Vec<IdentityResult> = reps
        .reps
        .par_iter()
        .filter(|ideal| ideal.a > 1)
        .map(|ideal| {
            let b = galois_b(big_d, &b0, ideal);
            let (n, _) = lattice_coords(&ideal.generator, ideal.a, &b).expect("generator divides τ_b");
            let mut n_lift = Integer::from((&n).rem_euc(&three_d));
            if n_lift.is_even() {
                n_lift += &three_d;
            }
            let n_lift = n_lift.to_i64().expect("below 6D");
            let tau = KPoint::cm(&one, &b);
            let tau_a = KPoint::cm(&Integer::from(ideal.a), &b);
            rs.iter()
                .map(|&r| {
                    let lhs = f_r(r, big_d, &tau_a, ctx)?;
                    let rhs = f_r(n_lift * r, big_d, &tau, ctx)?;
                    Ok(IdentityResult::compare(
                        "galois_orbit",
                        json!({ "D": big_d, "a": ideal.a, "r": r, "n_prime": n_lift, "b": b.to_string() }),
                        &lhs,
                        &rhs,
                        ctx,
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    out.extend(orbit);
    Ok(out)
}

/// Named groups of checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Suite {
    All,
    Appendix,
    SiegelWeil,
    Galois,
    Factorization,
}

impl Suite {
    pub const NAMES: [&'static str; 5] = ["all", "appendix", "siegel-weil", "galois", "factorization"];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "appendix" => Suite::Appendix,
            "siegel-weil" => Suite::SiegelWeil,
            "galois" => Suite::Galois,
            "factorization" => Suite::Factorization,
            _ => {
                return Err(Error::InvalidInput(format!(
                    "unknown suite {s:?} (expected one of {})",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = match self {
            Suite::All => 0,
            Suite::Appendix => 1,
            Suite::SiegelWeil => 2,
            Suite::Galois => 3,
            Suite::Factorization => 4,
        };
        f.write_str(Suite::NAMES[i])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteConfig {
    pub nmax: usize,
    pub d_values: Vec<u64>,
    pub samples: usize,
    pub gauss_primes: Vec<u64>,
    /// Extra `D` for the `R` relations only; the root-of-unity relation is vacuous when `S_D = 0`.
    pub r_relation_d: Vec<u64>,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            nmax: 1000,
            d_values: vec![7, 13, 19],
            samples: 100,
            gauss_primes: vec![7, 13, 19, 31, 37],
            r_relation_d: vec![73],
            seed: 20_240_601,
        }
    }
}

type Job = Box<dyn Fn(&PrecisionContext) -> Result<Vec<IdentityResult>> + Send + Sync>;

fn jobs(suite: Suite, cfg: &SuiteConfig) -> Vec<Job> {
    let mut out: Vec<Job> = Vec::new();
    let seed = cfg.seed;
    let all = suite == Suite::All;
    if all || suite == Suite::SiegelWeil {
        let nmax = cfg.nmax;
        out.push(Box::new(move |ctx| Ok(vec![check_siegel_weil(nmax, ctx)])));
    }
    if all || suite == Suite::Factorization {
        let samples = cfg.samples;
        out.push(Box::new(move |ctx| check_factorization(samples, seed, ctx)));
    }
    if all || suite == Suite::Appendix {
        for &d in &cfg.d_values {
            out.push(Box::new(move |ctx| check_appendix_transforms(d, seed, ctx)));
            if squarefree_split(d).is_ok() {
                out.push(Box::new(move |ctx| Ok(vec![check_eta_ratio(d, ctx)?])));
                out.push(Box::new(move |ctx| check_r_relations(d, seed, ctx)));
            }
        }
        for &d in cfg.r_relation_d.iter().filter(|d| !cfg.d_values.contains(d)) {
            out.push(Box::new(move |ctx| check_r_relations(d, seed, ctx)));
        }
        let primes = cfg.gauss_primes.clone();
        out.push(Box::new(move |ctx| check_gauss_cube(&primes, ctx)));
        out.push(Box::new(|ctx| Ok(vec![check_special_value(ctx)?])));
    }
    if all || suite == Suite::Galois {
        for &d in &cfg.d_values {
            out.push(Box::new(move |ctx| check_galois_structure(d, ctx)));
        }
    }
    out
}

fn run_job(job: &Job, ctx: &PrecisionContext) -> Result<Vec<IdentityResult>> {
    let first = job(ctx)?;
    if first.iter().any(|r| r.status == Status::Fail) {
        // a failure counts only if it survives doubled precision
        return job(&ctx.doubled());
    }
    Ok(first)
}

/// Runs a suite; jobs run in parallel and results keep catalog order.
pub fn run_suite(suite: Suite, cfg: &SuiteConfig, ctx: &PrecisionContext) -> Result<Vec<IdentityResult>> {
    let per_job: Vec<Vec<IdentityResult>> = jobs(suite, cfg).par_iter().map(|j| run_job(j, ctx)).collect::<Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

/// Whether every result passed or was skipped.
pub fn all_ok(results: &[IdentityResult]) -> bool {
    results.iter().all(|r| r.status != Status::Fail)
}
