//! Exact arithmetic in Z[ω], primary elements, prime splitting and cubic residue symbols.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rug::ops::{Pow, RemRounding};
use rug::{Complex, Float, Integer};

use crate::arith;
use crate::error::{Error, Result};
use crate::ideals::PrimitiveIdeal;
use crate::modular::{self, PrecisionContext};

/// The element `a + bω` of Z[ω], ω = (-1 + √-3)/2.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct EisensteinInt {
    pub a: Integer,
    pub b: Integer,
}

impl EisensteinInt {
    pub fn new(a: impl Into<Integer>, b: impl Into<Integer>) -> Self {
        EisensteinInt {
            a: a.into(),
            b: b.into(),
        }
    }

    pub fn zero() -> Self {
        Self::new(0, 0)
    }

    pub fn one() -> Self {
        Self::new(1, 0)
    }

    pub fn omega() -> Self {
        Self::new(0, 1)
    }

    /// √-3 = 1 + 2ω.
    pub fn sqrt_minus3() -> Self {
        Self::new(1, 2)
    }

    /// The six units ±1, ±ω, ±ω².
    pub fn units() -> [Self; 6] {
        [
            Self::new(1, 0),
            Self::new(-1, 0),
            Self::new(0, 1),
            Self::new(0, -1),
            Self::new(-1, -1),
            Self::new(1, 1),
        ]
    }

    pub fn conj(&self) -> Self {
        Self::new(Integer::from(&self.a - &self.b), Integer::from(-&self.b))
    }

    pub fn norm(&self) -> Integer {
        let ab = Integer::from(&self.a * &self.b);
        Integer::from(self.a.square_ref()) - ab + Integer::from(self.b.square_ref())
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    pub fn is_unit(&self) -> bool {
        self.norm() == 1
    }

    /// `a ≡ 1` and `b ≡ 0` modulo 3.
    pub fn is_primary(&self) -> bool {
        self.a.mod_u(3) == 1 && self.b.mod_u(3) == 0
    }

    /// Quotient `self / d` when it lies in Z[ω].
    pub fn div_exact(&self, d: &Self) -> Option<Self> {
        let n = d.norm();
        if n == 0 {
            return None;
        }
        let t = self * &d.conj();
        (t.a.is_divisible(&n) && t.b.is_divisible(&n))
            .then(|| Self::new(t.a.div_exact(&n), t.b.div_exact(&n)))
    }

    pub fn divides(&self, other: &Self) -> bool {
        other.div_exact(self).is_some()
    }

    /// Coordinates reduced into `[0, m)`.
    pub fn reduce_mod(&self, m: &Integer) -> Self {
        Self::new(
            Integer::from((&self.a).rem_euc(m)),
            Integer::from((&self.b).rem_euc(m)),
        )
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut r = Self::one();
        for _ in 0..e {
            r = &r * self;
        }
        r
    }

    /// `self^e` with coordinates reduced modulo the rational integer `m`.
    pub fn pow_mod(&self, e: &Integer, m: &Integer) -> Self {
        let mut result = Self::one().reduce_mod(m);
        let mut base = self.reduce_mod(m);
        let bits = e.significant_bits();
        for i in 0..bits {
            if e.get_bit(i) {
                result = (&result * &base).reduce_mod(m);
            }
            base = (&base * &base).reduce_mod(m);
        }
        result
    }

    /// Complex value `(a - b/2) + i b √3 / 2`.
    pub fn to_complex(&self, prec: u32) -> Complex {
        let half_b = Float::with_val(prec, &self.b) / 2u32;
        let re = Float::with_val(prec, &self.a) - &half_b;
        let im = half_b * modular::sqrt3(prec);
        Complex::with_val(prec, (re, im))
    }
}

impl fmt::Display for EisensteinInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b == 0 {
            return write!(f, "{}", self.a);
        }
        let bpart = match self.b.to_i32() {
            Some(1) => "ω".to_string(),
            Some(-1) => "-ω".to_string(),
            _ => format!("{}ω", self.b),
        };
        if self.a == 0 {
            write!(f, "{bpart}")
        } else if self.b > 0 {
            write!(f, "{}+{}", self.a, bpart)
        } else {
            write!(f, "{}{}", self.a, bpart)
        }
    }
}

impl<'a> Add<&'a EisensteinInt> for &'a EisensteinInt {
    type Output = EisensteinInt;
    fn add(self, o: &EisensteinInt) -> EisensteinInt {
        EisensteinInt::new(Integer::from(&self.a + &o.a), Integer::from(&self.b + &o.b))
    }
}

impl<'a> Sub<&'a EisensteinInt> for &'a EisensteinInt {
    type Output = EisensteinInt;
    fn sub(self, o: &EisensteinInt) -> EisensteinInt {
        EisensteinInt::new(Integer::from(&self.a - &o.a), Integer::from(&self.b - &o.b))
    }
}

impl<'a> Mul<&'a EisensteinInt> for &'a EisensteinInt {
    type Output = EisensteinInt;
    fn mul(self, o: &EisensteinInt) -> EisensteinInt {
        // (a + bω)(c + dω) = (ac - bd) + (ad + bc - bd)ω
        let ac = Integer::from(&self.a * &o.a);
        let bd = Integer::from(&self.b * &o.b);
        let ad = Integer::from(&self.a * &o.b);
        let bc = Integer::from(&self.b * &o.a);
        EisensteinInt::new(Integer::from(&ac - &bd), ad + bc - bd)
    }
}

impl Neg for &EisensteinInt {
    type Output = EisensteinInt;
    fn neg(self) -> EisensteinInt {
        EisensteinInt::new(Integer::from(-&self.a), Integer::from(-&self.b))
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for EisensteinInt {
            type Output = EisensteinInt;
            fn $m(self, o: EisensteinInt) -> EisensteinInt {
                (&self).$m(&o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for EisensteinInt {
    type Output = EisensteinInt;
    fn neg(self) -> EisensteinInt {
        -&self
    }
}

/// Operation selector for [`eis_arith`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EisOp {
    Add,
    Sub,
    Mul,
    Conj,
    Norm,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EisValue {
    Element(EisensteinInt),
    Integer(Integer),
}

/// Ring arithmetic dispatch; `Conj` and `Norm` ignore `y`.
pub fn eis_arith(x: &EisensteinInt, y: &EisensteinInt, op: EisOp) -> EisValue {
    match op {
        EisOp::Add => EisValue::Element(x + y),
        EisOp::Sub => EisValue::Element(x - y),
        EisOp::Mul => EisValue::Element(x * y),
        EisOp::Conj => EisValue::Element(x.conj()),
        EisOp::Norm => EisValue::Integer(x.norm()),
    }
}

/// ω^k, stored as the exponent k mod 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct CubeRootOfUnity(u8);

impl CubeRootOfUnity {
    pub const ONE: Self = CubeRootOfUnity(0);
    pub const OMEGA: Self = CubeRootOfUnity(1);
    pub const OMEGA2: Self = CubeRootOfUnity(2);

    pub fn new(exponent: i64) -> Self {
        CubeRootOfUnity(exponent.rem_euclid(3) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn conj(self) -> Self {
        Self::new(-(self.0 as i64))
    }

    pub fn pow(self, k: i64) -> Self {
        Self::new(self.0 as i64 * k)
    }

    pub fn to_eisenstein(self) -> EisensteinInt {
        match self.0 {
            0 => EisensteinInt::one(),
            1 => EisensteinInt::omega(),
            _ => EisensteinInt::new(-1, -1),
        }
    }

    pub fn to_complex(self, prec: u32) -> Complex {
        self.to_eisenstein().to_complex(prec)
    }
}

impl Mul for CubeRootOfUnity {
    type Output = Self;
    // exponents add
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, o: Self) -> Self {
        Self::new(self.0 as i64 + o.0 as i64)
    }
}

impl std::iter::Product for CubeRootOfUnity {
    fn product<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ONE, |a, b| a * b)
    }
}

impl fmt::Display for CubeRootOfUnity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ω^{}", self.0)
    }
}

/// An element ≡ 1 mod 3 with norm prime to 3.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrimaryElement(EisensteinInt);

impl PrimaryElement {
    pub fn new(x: EisensteinInt) -> Result<Self> {
        if x.norm().mod_u(3) == 0 {
            return Err(Error::NonCoprimeToThree(x.to_string()));
        }
        if !x.is_primary() {
            return Err(Error::InvalidInput(format!("{x} is not ≡ 1 mod 3")));
        }
        Ok(PrimaryElement(x))
    }

    pub fn one() -> Self {
        PrimaryElement(EisensteinInt::one())
    }

    pub fn value(&self) -> &EisensteinInt {
        &self.0
    }

    pub fn into_inner(self) -> EisensteinInt {
        self.0
    }

    pub fn norm(&self) -> Integer {
        self.0.norm()
    }

    pub fn conj(&self) -> Self {
        PrimaryElement(self.0.conj())
    }

    pub fn mul(&self, o: &Self) -> Self {
        PrimaryElement(&self.0 * &o.0)
    }
}

impl fmt::Display for PrimaryElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The unique associate `u·x ≡ 1 mod 3`, together with the unit `u`.
pub fn primary_associate(x: &EisensteinInt) -> Result<(PrimaryElement, EisensteinInt)> {
    if x.norm().mod_u(3) == 0 {
        return Err(Error::NonCoprimeToThree(x.to_string()));
    }
    EisensteinInt::units()
        .into_iter()
        .find_map(|u| {
            let y = &u * x;
            y.is_primary().then(|| (PrimaryElement(y), u))
        })
        .ok_or_else(|| Error::NonCoprimeToThree(x.to_string()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Splitting {
    Split(PrimaryElement),
    Inert,
    Ramified,
}

/// Decomposition of a rational prime in Z[ω].
pub fn split_prime(p: u64) -> Result<Splitting> {
    if !arith::is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    match p % 3 {
        0 => Ok(Splitting::Ramified),
        2 => Ok(Splitting::Inert),
        _ => {
            // 4p = (2a - b)² + 3b², smallest b first
            let bound = (2.0 * (p as f64 / 3.0).sqrt()).ceil() as u64 + 1;
            for b in 1..=bound {
                let r = 4 * p as i128 - 3 * (b as i128) * (b as i128);
                if r < 0 {
                    break;
                }
                let s = (r as f64).sqrt().round() as i128;
                let s = [s - 1, s, s + 1].into_iter().find(|t| *t >= 0 && t * t == r);
                if let Some(s) = s {
                    if (s + b as i128) % 2 == 0 {
                        let a = (s + b as i128) / 2;
                        let (pi, _) = primary_associate(&EisensteinInt::new(a, b))?;
                        return Ok(Splitting::Split(pi));
                    }
                }
            }
            unreachable!("p ≡ 1 mod 3 is a norm")
        }
    }
}

/// The primary prime of norm `p`, `p ≡ 1 mod 3`.
pub fn split_prime_element(p: u64) -> Result<PrimaryElement> {
    match split_prime(p)? {
        Splitting::Split(pi) => Ok(pi),
        _ => Err(Error::InvalidInput(format!("{p} does not split"))),
    }
}

/// A prime of Z[ω] coprime to 3, presented with the rational prime below it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EisPrime {
    Split { p: u64, pi: PrimaryElement },
    Inert { q: u64 },
}

impl EisPrime {
    pub fn norm(&self) -> u64 {
        match self {
            EisPrime::Split { p, .. } => *p,
            EisPrime::Inert { q } => q * q,
        }
    }

    pub fn generator(&self) -> EisensteinInt {
        match self {
            EisPrime::Split { pi, .. } => pi.value().clone(),
            EisPrime::Inert { q } => EisensteinInt::new(*q, 0),
        }
    }
}

pub type Factorization = Vec<(EisPrime, u32)>;

/// Prime factorization of a primary element (norm factored by trial division).
pub fn factor_primary(beta: &PrimaryElement) -> Result<Factorization> {
    let n = beta
        .norm()
        .to_u64()
        .ok_or_else(|| Error::InvalidInput(format!("norm of {beta} too large to factor")))?;
    let mut out = Vec::new();
    for (p, e) in arith::factor(n) {
        match p % 3 {
            1 => {
                let pi = split_prime_element(p)?;
                let pib = pi.conj();
                for cand in [pi, pib] {
                    let mut rest = beta.value().clone();
                    let mut k = 0;
                    while let Some(q) = rest.div_exact(cand.value()) {
                        rest = q;
                        k += 1;
                    }
                    if k > 0 {
                        out.push((EisPrime::Split { p, pi: cand }, k));
                    }
                }
            }
            2 => out.push((EisPrime::Inert { q: p }, e / 2)),
            _ => return Err(Error::NonCoprimeToThree(beta.to_string())),
        }
    }
    Ok(out)
}

/// Reduction map Z[ω] → F_p for a split prime, ω ↦ w.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResidueMap {
    pub p: u64,
    pub w: u64,
}

impl ResidueMap {
    pub fn new(pi: &PrimaryElement) -> Result<Self> {
        let p = pi
            .norm()
            .to_u64()
            .filter(|p| arith::is_prime(*p) && p % 3 == 1)
            .ok_or_else(|| Error::InvalidInput(format!("{pi} is not a split prime")))?;
        let pm = Integer::from(p);
        let a = Integer::from((&pi.value().a).rem_euc(&pm)).to_u64().unwrap();
        let b = Integer::from((&pi.value().b).rem_euc(&pm)).to_u64().unwrap();
        // a + bw ≡ 0  =>  w ≡ -a/b
        let binv = arith::inv_mod(b as i128, p as i128).unwrap() as u64;
        let w = arith::mul_mod(p - a % p, binv, p) % p;
        Ok(ResidueMap { p, w })
    }

    pub fn reduce(&self, x: &EisensteinInt) -> u64 {
        let pm = Integer::from(self.p);
        let a = Integer::from((&x.a).rem_euc(&pm)).to_u64().unwrap();
        let b = Integer::from((&x.b).rem_euc(&pm)).to_u64().unwrap();
        (a + arith::mul_mod(b, self.w, self.p)) % self.p
    }

    /// Cubic character of a residue `v ≠ 0`.
    pub fn symbol_of_residue(&self, v: u64) -> Option<CubeRootOfUnity> {
        let v = v % self.p;
        if v == 0 {
            return None;
        }
        let t = arith::pow_mod(v, (self.p - 1) / 3, self.p);
        let w2 = arith::mul_mod(self.w, self.w, self.p);
        match t {
            1 => Some(CubeRootOfUnity::ONE),
            t if t == self.w => Some(CubeRootOfUnity::OMEGA),
            t if t == w2 => Some(CubeRootOfUnity::OMEGA2),
            _ => unreachable!("Euler criterion lands in μ₃"),
        }
    }

    pub fn symbol_of_int(&self, n: i64) -> Option<CubeRootOfUnity> {
        self.symbol_of_residue(n.rem_euclid(self.p as i64) as u64)
    }
}

/// `(α/𝔭)₃` for a single prime; `None` when 𝔭 divides α.
pub fn symbol_prime(alpha: &EisensteinInt, prime: &EisPrime) -> Option<CubeRootOfUnity> {
    match prime {
        EisPrime::Split { pi, .. } => {
            let map = ResidueMap::new(pi).ok()?;
            map.symbol_of_residue(map.reduce(alpha))
        }
        EisPrime::Inert { q } => {
            let qm = Integer::from(*q);
            let x = alpha.reduce_mod(&qm);
            if x.is_zero() {
                return None;
            }
            let e = Integer::from(q * q - 1) / 3u32;
            let r = x.pow_mod(&e, &qm);
            let qm1 = Integer::from(q - 1);
            if r == EisensteinInt::one() {
                Some(CubeRootOfUnity::ONE)
            } else if r == EisensteinInt::omega() {
                Some(CubeRootOfUnity::OMEGA)
            } else if r.a == qm1 && r.b == qm1 {
                Some(CubeRootOfUnity::OMEGA2)
            } else {
                None
            }
        }
    }
}

/// Symbol against a factored modulus, multiplicative over the factors.
pub fn cubic_symbol_factored(
    alpha: &EisensteinInt,
    factors: &[(EisPrime, u32)],
) -> Result<CubeRootOfUnity> {
    factors.iter().try_fold(CubeRootOfUnity::ONE, |acc, (pr, e)| {
        symbol_prime(alpha, pr)
            .map(|s| acc * s.pow(*e as i64))
            .ok_or_else(|| Error::NotCoprime(format!("{alpha} and {}", pr.generator())))
    })
}

/// The cubic residue symbol `(α/β)₃` for primary β.
pub fn cubic_symbol(alpha: &EisensteinInt, beta: &PrimaryElement) -> Result<CubeRootOfUnity> {
    if alpha.norm().mod_u(3) == 0 {
        return Err(Error::NotCoprime(format!("{alpha} and 3")));
    }
    cubic_symbol_factored(alpha, &factor_primary(beta)?)
}

/// `χ_D(k) = conj((D/k)₃)` on a primary generator.
pub fn chi_d_of(d: u64, k: &PrimaryElement) -> Result<CubeRootOfUnity> {
    if d.is_multiple_of(3) {
        return Err(Error::NotCoprime(format!("D = {d} and 3")));
    }
    Ok(cubic_symbol(&EisensteinInt::new(d, 0), k)?.conj())
}

/// The character χ_D on a primitive ideal.
pub fn chi_d(d: u64, ideal: &PrimitiveIdeal) -> Result<CubeRootOfUnity> {
    chi_d_of(d, &ideal.generator)
}

/// `χ_π(r) = conj((r/π)₃)` for a rational `r`; `None` if π and r share a factor.
pub fn chi_pi_rational(r: i64, factors: &[(EisPrime, u32)]) -> Option<CubeRootOfUnity> {
    cubic_symbol_factored(&EisensteinInt::new(r, 0), factors)
        .ok()
        .map(CubeRootOfUnity::conj)
}

/// Exact Jacobi sum `J(χ_π, χ_π) = Σ_r χ_π(r) χ_π(1 - r)` for π of prime norm.
pub fn jacobi_sum(pi: &PrimaryElement) -> Result<EisensteinInt> {
    let map = ResidueMap::new(pi)?;
    let mut counts = [0i64; 3];
    for r in 2..map.p {
        let x = map.symbol_of_residue(r).unwrap().conj();
        let y = map.symbol_of_residue(map.p + 1 - r).unwrap().conj();
        counts[(x * y).exponent() as usize] += 1;
    }
    // c0 + c1 ω + c2 ω² = (c0 - c2) + (c1 - c2) ω
    Ok(EisensteinInt::new(counts[0] - counts[2], counts[1] - counts[2]))
}

/// Cubic Gauss sum `G(χ_π) = Σ_{r mod p} χ_π(r) e^{2πir/p}` without validation.
pub fn gauss_sum_unchecked(pi: &PrimaryElement, ctx: &PrecisionContext) -> Result<Complex> {
    let map = ResidueMap::new(pi)?;
    let prec = ctx.work_bits();
    let p = map.p;
    let roots: Vec<Complex> = (0..3)
        .map(|k| CubeRootOfUnity::new(k).to_complex(prec))
        .collect();
    let mut g = Complex::new(prec);
    for r in 1..p {
        let chi = map.symbol_of_residue(r).unwrap().conj();
        let e = modular::exp_2pi_i_rational(&Integer::from(r), &Integer::from(p), prec);
        g += e * &roots[chi.exponent() as usize];
    }
    Ok(g)
}

/// [`gauss_sum_unchecked`], validated by `|G|² = p` and `G³ = -p π̄`.
pub fn gauss_sum(pi: &PrimaryElement, ctx: &PrecisionContext) -> Result<Complex> {
    let g = gauss_sum_unchecked(pi, ctx)?;
    let prec = ctx.work_bits();
    let p = pi.norm().to_u64().expect("prime norm");
    let abs2 = Float::with_val(prec, g.norm_ref());
    let r1 = (abs2 - p).abs();
    let g3 = Complex::with_val(prec, g.square_ref()) * &g;
    let target = pi.value().conj().to_complex(prec) * Float::with_val(prec, p) * -1i32;
    let r2 = Float::with_val(prec, (g3 - target).abs_ref());
    let scale = Float::with_val(prec, p).pow(1.5f64);
    let tol = ctx.tol() * scale;
    if r1 > tol || r2 > tol {
        return Err(Error::PrecisionFailure(format!(
            "Gauss sum residuals {:.3e} / {:.3e}",
            r1.to_f64(),
            r2.to_f64()
        )));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(a: i64, b: i64) -> EisensteinInt {
        EisensteinInt::new(a, b)
    }

    #[test]
    fn norm_and_conj_examples() {
        assert_eq!(e(2, 3).norm(), 7);
        assert_eq!(e(0, 1).conj(), e(-1, -1));
        assert_eq!(&e(1, 1) * &e(1, 1), e(0, 1));
        assert_eq!(eis_arith(&e(2, 3), &e(0, 0), EisOp::Norm), EisValue::Integer(7.into()));
    }

    #[test]
    fn primary_examples() {
        let (p, u) = primary_associate(&e(2, 3)).unwrap();
        assert_eq!(p.value(), &e(-2, -3));
        assert_eq!(u, e(-1, 0));
        assert_eq!(primary_associate(&e(1, 0)).unwrap().0.value(), &e(1, 0));
        let (p, _) = primary_associate(&e(3, 1)).unwrap();
        assert_eq!(p.norm(), 7);
        assert!(primary_associate(&e(1, 2)).is_err());
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_prime(7).unwrap(), Splitting::Split(PrimaryElement(e(-2, -3))));
        assert_eq!(split_prime(5).unwrap(), Splitting::Inert);
        assert_eq!(split_prime(3).unwrap(), Splitting::Ramified);
        assert_eq!(split_prime(9), Err(Error::NotPrime(9)));
    }

    #[test]
    fn symbol_two_mod_seven() {
        let pi = split_prime_element(7).unwrap();
        assert_eq!(cubic_symbol(&e(2, 0), &pi).unwrap(), CubeRootOfUnity::OMEGA);
        assert!(cubic_symbol(&e(3, 0), &pi).is_err());
    }

    #[test]
    fn jacobi_and_gauss() {
        let ctx = PrecisionContext::new(128);
        for p in [7u64, 13, 19, 31, 37] {
            let pi = split_prime_element(p).unwrap();
            assert_eq!(jacobi_sum(&pi).unwrap(), -pi.value().conj());
            gauss_sum(&pi, &ctx).unwrap();
        }
    }
}
