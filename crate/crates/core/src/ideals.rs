//! Primitive ideals of Z[ω], CM points and ring class group representatives.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::ops::{Pow, RemRounding};
use rug::Integer;
use serde::{Deserialize, Serialize};

use crate::arith;
use crate::eisenstein::{split_prime_element, EisensteinInt, PrimaryElement, ResidueMap};
use crate::error::{Error, Result};
use crate::modular::KPoint;

fn roots_prime_power(p: u64, e: u32) -> Result<(Integer, Vec<Integer>)> {
    let m = Integer::from(p).pow(e);
    let roots: Vec<i128> = match (p, e) {
        (_, 0) => vec![0],
        (2, 1) => vec![1],
        (2, 2) => vec![1, 3],
        (3, 1) => vec![0],
        (2, _) | (3, _) => return Err(Error::NoSolution(format!("{p}^{e}"))),
        (p, e) if p % 3 == 1 => {
            // -3 = (2c + 1)² for a primitive cube root of unity c
            let c = (2..p)
                .map(|g| arith::pow_mod(g, (p - 1) / 3, p))
                .find(|&c| c != 1)
                .expect("F_p^× has order divisible by 3");
            let mut s = ((2 * c + 1) % p) as i128;
            let mut pk = p as i128;
            for _ in 1..e {
                pk *= p as i128;
                let f = (s * s + 3).rem_euclid(pk);
                let inv = arith::inv_mod(2 * s, pk).expect("2s is a unit");
                s = (s - f * inv % pk).rem_euclid(pk);
            }
            vec![s, (pk - s) % pk]
        }
        _ => return Err(Error::NoSolution(format!("prime {p} ≡ 2 mod 3"))),
    };
    Ok((m, roots.into_iter().map(Integer::from).collect()))
}

pub(crate) fn crt_pair(a: &Integer, m: &Integer, b: &Integer, n: &Integer) -> Integer {
    let inv = Integer::from(m.invert_ref(n).expect("coprime moduli"));
    let t = (Integer::from(b - a) * inv).rem_euc(n.clone());
    (a + t * m).rem_euc(Integer::from(m * n))
}

/// All residues `b mod M` (ascending) with `b² ≡ -3 mod M`, `M` given factored.
pub fn sqrt_minus3_roots_factored(factors: &[(u64, u32)]) -> Result<(Integer, Vec<Integer>)> {
    let mut modulus = Integer::from(1);
    let mut acc = vec![Integer::from(0)];
    for &(p, e) in factors {
        let (m, roots) = roots_prime_power(p, e)?;
        acc = acc
            .iter()
            .flat_map(|x| roots.iter().map(|r| crt_pair(x, &modulus, r, &m)).collect::<Vec<_>>())
            .collect();
        modulus *= m;
    }
    acc.sort();
    acc.dedup();
    Ok((modulus, acc))
}

/// All roots of `b² ≡ -3 mod M`.
pub fn sqrt_minus3_roots(m: u64) -> Result<Vec<Integer>> {
    if m == 0 {
        return Err(Error::InvalidInput("modulus 0".into()));
    }
    Ok(sqrt_minus3_roots_factored(&arith::factor(m))?.1)
}

/// Smallest positive `b` with `b² ≡ -3 mod M` (and `3 | b` when requested).
pub fn sqrt_minus3_mod(m: u64, require_div3: bool) -> Result<Integer> {
    if m == 0 {
        return Err(Error::InvalidInput("modulus 0".into()));
    }
    let mut factors = arith::factor(m);
    if require_div3 && !m.is_multiple_of(3) {
        factors.push((3, 1));
        factors.sort();
    }
    let (modulus, roots) = sqrt_minus3_roots_factored(&factors)?;
    roots
        .into_iter()
        .map(|r| if r == 0 { modulus.clone() } else { r })
        .min()
        .ok_or_else(|| Error::NoSolution(m.to_string()))
}

/// `τ_b = (-b + √-3)/2 = (1 - b)/2 + ω` for odd `b`.
pub fn tau_element(b: &Integer) -> EisensteinInt {
    EisensteinInt::new(Integer::from(1 - b) / 2u32, 1)
}

/// A primitive ideal `[a, (-b + √-3)/2]` with its primary generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimitiveIdeal {
    pub a: u64,
    pub b: u64,
    pub generator: PrimaryElement,
}

impl PrimitiveIdeal {
    pub fn unit() -> Self {
        PrimitiveIdeal {
            a: 1,
            b: 1,
            generator: PrimaryElement::one(),
        }
    }

    /// The ideal `(k)`, which must not be divisible by a rational integer > 1.
    pub fn from_generator(k: PrimaryElement) -> Result<Self> {
        let kv = k.value();
        if Integer::from(kv.a.gcd_ref(&kv.b)) != 1 {
            return Err(Error::InvalidInput(format!("({k}) is not primitive")));
        }
        let a = k
            .norm()
            .to_u64()
            .ok_or_else(|| Error::InvalidInput(format!("norm of {k} too large")))?;
        let two_a = Integer::from(2 * a);
        let am = Integer::from(a);
        let mut cands: Vec<Integer> = sqrt_minus3_roots(4 * a)?
            .into_iter()
            .map(|r| {
                let r = r.rem_euc(two_a.clone());
                if r == 0 {
                    two_a.clone()
                } else {
                    r
                }
            })
            .collect();
        cands.sort();
        cands.dedup();
        let kc = kv.conj();
        let b = cands
            .into_iter()
            .find(|b| {
                let t = &tau_element(b) * &kc;
                t.a.is_divisible(&am) && t.b.is_divisible(&am)
            })
            .ok_or_else(|| Error::InvalidInput(format!("no lattice basis for ({k})")))?;
        Ok(PrimitiveIdeal {
            a,
            b: b.to_u64().expect("b ≤ 2a"),
            generator: k,
        })
    }

    pub fn cm_point(&self) -> CMPoint {
        CMPoint {
            a: self.a,
            b: Integer::from(self.b),
        }
    }

    /// Integers `(n, m)` with `generator = n·a + m·(-b + √-3)/2`.
    pub fn lattice_coords(&self) -> (Integer, Integer) {
        lattice_coords(&self.generator, self.a, &Integer::from(self.b))
            .expect("generator lies in its lattice")
    }

    /// Checks the defining congruences.
    pub fn is_valid(&self) -> bool {
        let b = Integer::from(self.b);
        let four_a = Integer::from(4 * self.a);
        self.b % 2 == 1
            && self.b > 0
            && self.b <= 2 * self.a
            && (Integer::from(b.square_ref()) + 3u32).is_divisible(&four_a)
            && self.generator.norm() == self.a
            && lattice_coords(&self.generator, self.a, &b).is_some()
    }
}

/// Coordinates of `k` in the basis `a, (-b + √-3)/2`, if integral.
pub fn lattice_coords(k: &PrimaryElement, a: u64, b: &Integer) -> Option<(Integer, Integer)> {
    let m = k.value().b.clone();
    let x = &k.value().a - (&m * Integer::from(1 - b)) / 2u32;
    let am = Integer::from(a);
    x.is_divisible(&am).then(|| (x.div_exact(&am), m))
}

/// The CM point `τ = (-b + √-3)/(2a)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CMPoint {
    pub a: u64,
    pub b: Integer,
}

impl CMPoint {
    pub fn to_kpoint(&self) -> KPoint {
        KPoint::cm(&Integer::from(self.a), &self.b)
    }
}

/// Class of a primary `k` modulo rational residues: `k²·N(k)⁻¹ mod f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassLabel {
    pub x: u64,
    pub y: u64,
}

pub fn class_label(k: &PrimaryElement, modulus: u64) -> ClassLabel {
    let f = Integer::from(modulus);
    let n = Integer::from((&k.norm()).rem_euc(&f));
    let ninv = n.invert(&f).expect("norm coprime to the modulus");
    let sq = (k.value() * k.value()).reduce_mod(&f);
    let x = Integer::from(&sq.a * &ninv).rem_euc(f.clone());
    let y = Integer::from(&sq.b * &ninv).rem_euc(f);
    ClassLabel {
        x: x.to_u64().unwrap(),
        y: y.to_u64().unwrap(),
    }
}

/// Exact equivalence test: `k₁ conj(k₂) N(k₂)⁻¹` is a rational residue mod `f`.
pub fn same_class(k1: &PrimaryElement, k2: &PrimaryElement, modulus: u64) -> bool {
    let f = Integer::from(modulus);
    let t = (k1.value() * &k2.value().conj()).reduce_mod(&f);
    t.b == 0
}

/// Image of `k` in `(Z/D₀)^×` via `(k mod π)/(k mod π̄)` over the primes dividing a split `D₀`.
pub fn split_label(k: &PrimaryElement, d0: u64) -> Option<u64> {
    let mut acc = Integer::from(0);
    let mut modulus = Integer::from(1);
    for (p, e) in arith::factor(d0) {
        if p % 3 != 1 || e != 1 {
            return None;
        }
        let pi = split_prime_element(p).ok()?;
        let m1 = ResidueMap::new(&pi).ok()?;
        let m2 = ResidueMap::new(&pi.conj()).ok()?;
        let num = m1.reduce(k.value());
        let den = m2.reduce(k.value());
        let inv = arith::inv_mod(den as i128, p as i128)? as u64;
        let r = Integer::from(arith::mul_mod(num, inv, p));
        let pm = Integer::from(p);
        acc = crt_pair(&acc, &modulus, &r, &pm);
        modulus *= pm;
    }
    acc.to_u64()
}

/// `h(O_{3D}) = D ∏_{p|D} (1 - (-3|p)/p)`.
pub fn class_group_order(d: u64) -> u64 {
    arith::factor(d)
        .iter()
        .map(|&(p, e)| p.pow(e - 1) * (p as i64 - arith::kronecker_minus3(p)) as u64)
        .product()
}

/// One primitive ideal per class, with labels and the modulus `3D`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassGroupReps {
    pub d: u64,
    pub modulus: u64,
    pub reps: Vec<PrimitiveIdeal>,
    pub labels: Vec<ClassLabel>,
}

impl ClassGroupReps {
    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }
}

/// How the prime scan for representatives proceeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RepScan {
    /// Try π̄ before π at each split prime.
    pub conjugate_first: bool,
    /// Number of admissible primes to pass over before collecting.
    pub skip: usize,
    pub norm_bound: u64,
}

impl Default for RepScan {
    fn default() -> Self {
        RepScan {
            conjugate_first: false,
            skip: 0,
            norm_bound: 200_000_000,
        }
    }
}

impl RepScan {
    /// A scan disjoint in its choices from the default one.
    pub fn alternate() -> Self {
        RepScan {
            conjugate_first: true,
            skip: 7,
            ..Self::default()
        }
    }

    /// A scan whose choices are drawn from `seed`.
    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RepScan {
            conjugate_first: rng.gen(),
            skip: rng.gen_range(0..16),
            ..Self::default()
        }
    }
}

fn check_coprime_to_three(d: u64) -> Result<()> {
    if d == 0 || d.is_multiple_of(3) {
        return Err(Error::InvalidInput(format!("D = {d} must be positive and prime to 3")));
    }
    Ok(())
}

/// Split primes `p ≡ 1 mod 3` prime to `f`, ascending, up to `bound`.
fn admissible_primes(f: u64, bound: u64) -> impl Iterator<Item = u64> {
    (7..=bound)
        .step_by(6)
        .filter(move |&p| !f.is_multiple_of(p) && arith::is_prime(p))
}

pub fn enumerate_class_reps(d: u64) -> Result<ClassGroupReps> {
    enumerate_class_reps_with(d, &RepScan::default())
}

/// Representatives of `Cl(O_{3D})` with pairwise coprime prime norms.
pub fn enumerate_class_reps_with(d: u64, scan: &RepScan) -> Result<ClassGroupReps> {
    check_coprime_to_three(d)?;
    let f = 3 * d;
    let h = class_group_order(d) as usize;
    let unit = PrimitiveIdeal::unit();
    let mut labels = vec![class_label(&unit.generator, f)];
    let mut seen: HashSet<ClassLabel> = labels.iter().copied().collect();
    let mut reps = vec![unit];
    let mut primes = admissible_primes(f, scan.norm_bound).skip(scan.skip);
    while reps.len() < h {
        let p = primes.next().ok_or(Error::ExhaustionFailure {
            bound: scan.norm_bound,
            found: reps.len(),
            needed: h,
        })?;
        let pi = split_prime_element(p)?;
        let cands = if scan.conjugate_first {
            [pi.conj(), pi]
        } else {
            [pi.clone(), pi.conj()]
        };
        if let Some((k, label)) = cands
            .into_iter()
            .map(|k| {
                let l = class_label(&k, f);
                (k, l)
            })
            .find(|(_, l)| !seen.contains(l))
        {
            seen.insert(label);
            labels.push(label);
            reps.push(PrimitiveIdeal::from_generator(k)?);
        }
    }
    Ok(ClassGroupReps {
        d,
        modulus: f,
        reps,
        labels,
    })
}

/// `D = D₁ D₂²` with every prime ≡ 1 mod 3: returns `(D₀, D₁, D₂)`.
pub fn split_product_parts(d: u64) -> Result<(u64, u64, u64)> {
    let fac = arith::factor(d);
    if d < 1 || fac.iter().any(|&(p, e)| p % 3 != 1 || e > 2) {
        return Err(Error::InvalidInput(format!(
            "D = {d} is not a product of primes ≡ 1 mod 3 with exponents ≤ 2"
        )));
    }
    let d1 = fac.iter().filter(|f| f.1 == 1).map(|f| f.0).product();
    let d2 = fac.iter().filter(|f| f.1 == 2).map(|f| f.0).product();
    Ok((arith::radical(d), d1, d2))
}

fn check_half_trace_root(d: u64, b: &Integer) -> Result<()> {
    let m = Integer::from(12) * Integer::from(d).square();
    if !(Integer::from(b.square_ref()) + 3u32).is_divisible(&m) {
        return Err(Error::InvalidInput(format!("b = {b} is not a root of -3 mod 12D²")));
    }
    Ok(())
}

/// A common `b'` with `b' ≡ b mod 12D²` and `k | τ_{b'}`, for `k` of norm `a` prime to 6D.
pub fn common_b(d: u64, b: &Integer, ideal: &PrimitiveIdeal) -> Integer {
    let m = Integer::from(12) * Integer::from(d).square();
    let am = Integer::from(ideal.a);
    let r = crt_pair(
        &Integer::from(b.rem_euc(&m)),
        &m,
        &Integer::from(ideal.b),
        &am,
    );
    if r.is_even() {
        r + m * am
    } else {
        r
    }
}

/// Representatives `𝒜_s`, `s ∈ (Z/D₀)^×` ascending, with `N𝒜_s ≡ s mod D₀` and
/// generator `n a + m τ_b` where `n ≡ 1 mod 3D`, `m ≡ 0 mod 3`.
pub fn reps_for_half_trace(d: u64, b: &Integer) -> Result<ClassGroupReps> {
    let (d0, _, _) = split_product_parts(d)?;
    check_half_trace_root(d, b)?;
    let three_d = Integer::from(3 * d);
    let units = arith::units_mod(d0);
    let mut slots: BTreeMap<u64, PrimitiveIdeal> = BTreeMap::new();
    slots.insert(1 % d0.max(1), PrimitiveIdeal::unit());
    let scan = RepScan::default();
    let mut primes = admissible_primes(3 * d, scan.norm_bound);
    while slots.len() < units.len() {
        let p = primes.next().ok_or(Error::ExhaustionFailure {
            bound: scan.norm_bound,
            found: slots.len(),
            needed: units.len(),
        })?;
        let s = p % d0;
        if slots.contains_key(&s) {
            continue;
        }
        let pi = split_prime_element(p)?;
        for k in [pi.clone(), pi.conj()] {
            let ideal = PrimitiveIdeal::from_generator(k)?;
            let bb = common_b(d, b, &ideal);
            let (n, m) = lattice_coords(&ideal.generator, ideal.a, &bb).expect("common basis");
            if Integer::from((&n).rem_euc(&three_d)) == 1 && m.is_divisible_u(3) {
                slots.insert(s, ideal);
                break;
            }
        }
    }
    let f = 3 * d0;
    let reps: Vec<PrimitiveIdeal> = slots.into_values().collect();
    let labels = reps.iter().map(|r| class_label(&r.generator, f)).collect();
    Ok(ClassGroupReps {
        d,
        modulus: f,
        reps,
        labels,
    })
}

/// The primary primes above each `p | D₀` dividing `τ_b`, multiplied over `D₁` and `D₂`.
pub fn pi_dividing_tau(d: u64, b: &Integer) -> Result<(PrimaryElement, PrimaryElement)> {
    let (_, d1, _) = split_product_parts(d)?;
    check_half_trace_root(d, b)?;
    let tau = tau_element(b);
    let mut pi1 = PrimaryElement::one();
    let mut pi2 = PrimaryElement::one();
    for (p, e) in arith::factor(d) {
        let pi = split_prime_element(p)?;
        let hits: Vec<PrimaryElement> = [pi.clone(), pi.conj()]
            .into_iter()
            .filter(|c| c.value().pow(2 * e).divides(&tau))
            .collect();
        let [chosen] = hits.as_slice() else {
            return Err(Error::AmbiguousDivisor(p));
        };
        if d1 % p == 0 {
            pi1 = pi1.mul(chosen);
        } else {
            pi2 = pi2.mul(chosen);
        }
    }
    Ok((pi1, pi2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_examples() {
        assert_eq!(sqrt_minus3_mod(28, false).unwrap(), 5);
        assert_eq!(sqrt_minus3_mod(4, false).unwrap(), 1);
        let b = sqrt_minus3_mod(12 * 49, true).unwrap();
        let brute = (1..=588u64).find(|b| (b * b + 3) % 588 == 0 && b % 3 == 0).unwrap();
        assert_eq!(b, brute);
        assert!(sqrt_minus3_mod(4 * 5, false).is_err());
        assert!(sqrt_minus3_mod(8, false).is_err());
    }

    #[test]
    fn orders() {
        assert_eq!(class_group_order(7), 6);
        assert_eq!(class_group_order(1), 1);
        assert_eq!(class_group_order(5), 6);
        assert_eq!(class_group_order(91), 72);
    }

    #[test]
    fn d7_reps() {
        let reps = enumerate_class_reps(7).unwrap();
        assert_eq!(reps.len(), 6);
        for (i, x) in reps.reps.iter().enumerate() {
            assert!(x.is_valid());
            for y in &reps.reps[i + 1..] {
                assert!(!same_class(&x.generator, &y.generator, 21));
                assert_eq!(arith::gcd(x.a, y.a), 1);
            }
        }
        let mut labels: Vec<u64> = reps
            .reps
            .iter()
            .map(|r| split_label(&r.generator, 7).unwrap())
            .collect();
        labels.sort();
        assert_eq!(labels, vec![1, 2, 3, 4, 5, 6]);
    }
}
