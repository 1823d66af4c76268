use std::collections::BTreeMap;

use proptest::prelude::*;
use rug::ops::RemRounding;
use rug::{Complex, Float, Integer, Rational};

use ctlab::cli::{CacheRecord, ComputeOutput, ExactRational};
use ctlab::curve::{point_search, RationalPoint};
use ctlab::eisenstein::{chi_d_of, cubic_symbol, split_prime_element, CubeRootOfUnity, EisensteinInt, PrimaryElement};
use ctlab::formulas::{recognize_rational, TExact, TUnit, Verdict};
use ctlab::ideals::{class_label, same_class};
use ctlab::modular::PrecisionContext;
use ctlab::verify::{ComplexValue, IdentityResult, Status};

fn eis() -> impl Strategy<Value = EisensteinInt> {
    (-10_000i64..10_000, -10_000i64..10_000).prop_map(|(a, b)| EisensteinInt::new(a, b))
}

fn split_primes() -> Vec<u64> {
    (7..3000u64)
        .step_by(6)
        .filter(|&p| (2..p).take_while(|q| q * q <= p).all(|q| p % q != 0))
        .collect()
}

fn split_prime() -> impl Strategy<Value = u64> {
    proptest::sample::select(split_primes())
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    acc
}

fn mod_p(x: &Integer, p: u64) -> u64 {
    Integer::from(x.rem_euc(&Integer::from(p))).to_u64().unwrap()
}

/// `(α/π)₃` from Euler's criterion `α^{(p-1)/3} mod π`, with `ω ↦ -a/b mod p` for `π = a + bω`.
fn euler_symbol(alpha: &EisensteinInt, pi: &PrimaryElement) -> Option<u8> {
    let p = pi.norm().to_u64().unwrap();
    let (a, b) = (mod_p(&pi.value().a, p), mod_p(&pi.value().b, p));
    let w = (p - a) % p * pow_mod(b, p - 2, p) % p;
    let x = (mod_p(&alpha.a, p) + mod_p(&alpha.b, p) * w) % p;
    if x == 0 {
        return None;
    }
    let s = pow_mod(x, (p - 1) / 3, p);
    [1, w, w * w % p].iter().position(|&r| r == s).map(|k| k as u8)
}

proptest! {
    #[test]
    fn ring_laws(x in eis(), y in eis(), z in eis()) {
        prop_assert_eq!(&(&x * &y) * &z, &x * &(&y * &z));
        prop_assert_eq!(&x * &(&y + &z), &(&x * &y) + &(&x * &z));
        prop_assert_eq!(&x * &y, &y * &x);
        prop_assert_eq!((&x * &y).norm(), x.norm() * y.norm());
        prop_assert_eq!((&x * &y).conj(), &x.conj() * &y.conj());
        prop_assert_eq!(x.conj().conj(), x.clone());
        prop_assert_eq!(&x * &EisensteinInt::one(), x);
    }

    #[test]
    fn norm_is_product_with_conjugate(x in eis()) {
        let n = &x * &x.conj();
        prop_assert_eq!(n.b, 0);
        prop_assert_eq!(n.a, x.norm());
        prop_assert!(x.norm() >= 0);
    }

    #[test]
    fn symbol_matches_euler_criterion(p in split_prime(), x in eis()) {
        let pi = split_prime_element(p).unwrap();
        prop_assume!(x.norm().mod_u(3) != 0);
        match euler_symbol(&x, &pi) {
            None => prop_assert!(cubic_symbol(&x, &pi).is_err()),
            Some(k) => prop_assert_eq!(cubic_symbol(&x, &pi).unwrap().exponent(), k),
        }
    }

    #[test]
    fn symbol_is_multiplicative(p in split_prime(), x in eis(), y in eis()) {
        let pi = split_prime_element(p).unwrap();
        let (sx, sy) = (cubic_symbol(&x, &pi), cubic_symbol(&y, &pi));
        prop_assume!(sx.is_ok() && sy.is_ok());
        prop_assert_eq!(cubic_symbol(&(&x * &y), &pi).unwrap(), sx.unwrap() * sy.unwrap());
    }

    #[test]
    fn cubic_reciprocity(p in split_prime(), q in split_prime()) {
        prop_assume!(p != q);
        let (a, b) = (split_prime_element(p).unwrap(), split_prime_element(q).unwrap());
        prop_assert_eq!(cubic_symbol(a.value(), &b).unwrap(), cubic_symbol(b.value(), &a).unwrap());
        prop_assert_eq!(cubic_symbol(a.conj().value(), &b).unwrap(), cubic_symbol(b.value(), &a.conj()).unwrap());
    }

    #[test]
    fn chi_d_multiplicative_in_d(p in split_prime(), d1 in 1u64..500, d2 in 1u64..500) {
        prop_assume!(d1 % 3 != 0 && d2 % 3 != 0 && d1 % p != 0 && d2 % p != 0);
        let pi = split_prime_element(p).unwrap();
        let lhs = chi_d_of(d1 * d2, &pi).unwrap();
        prop_assert_eq!(lhs, chi_d_of(d1, &pi).unwrap() * chi_d_of(d2, &pi).unwrap());
        // a cube is invisible to the symbol
        prop_assert_eq!(chi_d_of(d1 * d1 * d1, &pi).unwrap(), CubeRootOfUnity::ONE);
    }

    #[test]
    fn class_label_ignores_rational_scalars(p in split_prime(), n in 1i64..300, d in 1u64..200) {
        let n = 3 * n + 1;
        let f = 3 * d;
        prop_assume!(d % 3 != 0 && p % d.max(1) != 0 && !(n as u64).is_multiple_of(p));
        prop_assume!(ctlab::arith::gcd(n as u64, f) == 1 && ctlab::arith::gcd(p, f) == 1);
        let k = split_prime_element(p).unwrap();
        let scaled = PrimaryElement::new(k.value() * &EisensteinInt::new(n, 0)).unwrap();
        prop_assert_eq!(class_label(&k, f), class_label(&scaled, f));
        prop_assert!(same_class(&k, &scaled, f));
    }

    #[test]
    fn recognition_recovers_rationals(num in -10_000i64..10_000, den_idx in 0usize..6, noise in -1.0f64..1.0) {
        let bound = 3 * 2 * 9;
        let den = [1i64, 2, 3, 6, 9, 54][den_idx];
        let ctx = PrecisionContext::new(256);
        let prec = ctx.work_bits();
        let q = Rational::from((num, den));
        let eps = Float::with_val(prec, noise) * Float::with_val(prec, Float::i_exp(1, -180));
        let z = Complex::with_val(prec, (Float::with_val(prec, &q) + eps, 0));
        prop_assert_eq!(recognize_rational(&z, bound, &ctx).unwrap(), q);
    }

    #[test]
    fn found_points_lie_on_the_curve(d in 1u64..400) {
        if let Some(p) = point_search(d, 6) {
            prop_assert!(p.satisfies(d));
        }
    }

    #[test]
    fn cache_record_json_round_trip(
        d in 5u64..100_000,
        num in any::<i64>(),
        den in 1u64..u64::MAX,
        coeff in any::<i64>(),
        imaginary in any::<bool>(),
        with_t in any::<bool>(),
        point in proptest::option::of((any::<i32>(), 1u32..1000, any::<i32>())),
        bits in 64u32..4096,
        ts in any::<u64>(),
        verdict in 0usize..3,
    ) {
        let s = Rational::from((Integer::from(num), Integer::from(den)));
        let rec = CacheRecord {
            d,
            s_d: ExactRational::from(&s),
            t_d: with_t.then(|| TExact {
                coefficient: Integer::from(coeff),
                unit: if imaginary { TUnit::SqrtMinus3 } else { TUnit::One },
            }),
            sigma_d: 2,
            c3d: 27,
            verdict: [Verdict::NoRationalSolutions, Verdict::ExpectSolutions, Verdict::Unknown][verdict],
            point: point.map(|(x, w, y)| RationalPoint {
                x: Rational::from((x, w)),
                y: Rational::from((y, w)),
            }),
            precision_bits: bits,
            tool_version: "0.1.0".into(),
            timestamp: ts,
        };
        let text = serde_json::to_string(&rec).unwrap();
        let back: CacheRecord = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &rec);
        prop_assert_eq!(back.s_d().unwrap(), s);
        let out = ComputeOutput { record: rec, sha_prediction: Some("4".into()), diagnostics: None };
        let back: ComputeOutput = serde_json::from_str(&serde_json::to_string(&out).unwrap()).unwrap();
        prop_assert_eq!(back, out);
    }

    #[test]
    fn identity_result_json_round_trip(
        residual in proptest::option::of(0.0f64..1.0),
        tol in 1e-60f64..1.0,
        status in 0usize..3,
        re in any::<f64>().prop_filter("finite", |x| x.is_finite()),
        n in any::<i64>(),
    ) {
        let status = [Status::Pass, Status::Fail, Status::Skipped][status];
        let mut parameters = BTreeMap::new();
        parameters.insert("n".to_string(), serde_json::json!(n));
        parameters.insert("z".to_string(), serde_json::json!(format!("{re}")));
        let value = ComplexValue::from(&Complex::with_val(128, (re, -re)));
        let r = IdentityResult {
            identity_id: "sample".into(),
            parameters,
            lhs: value.clone(),
            rhs: value,
            residual,
            tol,
            pass: status == Status::Pass,
            status,
            precision_bits: 256,
        };
        let back: IdentityResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }
}
