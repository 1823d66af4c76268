//! Machine-word number theory helpers: trial division, modular powers, cube roots.

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Prime factorization by trial division, ascending primes.
pub fn factor(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            let mut e = 0;
            while n.is_multiple_of(d) {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn radical(n: u64) -> u64 {
    factor(n).iter().map(|&(p, _)| p).product()
}

pub fn is_cube_free(n: u64) -> bool {
    factor(n).iter().all(|&(_, e)| e < 3)
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    base %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, base, m);
        }
        base = mul_mod(base, base, m);
        e >>= 1;
    }
    r
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: i128, m: i128) -> Option<i128> {
    let (mut r0, mut r1) = (a.rem_euclid(m), m);
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    (r0 == 1).then(|| s0.rem_euclid(m))
}

/// Units of `Z/mZ`, ascending.
pub fn units_mod(m: u64) -> Vec<u64> {
    (1..m.max(2)).filter(|&a| gcd(a, m) == 1).collect()
}

pub fn euler_phi(n: u64) -> u64 {
    factor(n)
        .iter()
        .fold(n, |acc, &(p, _)| acc / p * (p - 1))
}

/// Kronecker symbol (-3 | p) for a prime p.
pub fn kronecker_minus3(p: u64) -> i64 {
    match p % 3 {
        0 => 0,
        1 => 1,
        _ => -1,
    }
}

/// Primes below `hi` by a plain sieve.
pub fn primes_below(hi: u64) -> Vec<u64> {
    let n = hi as usize;
    if n < 3 {
        return Vec::new();
    }
    let mut sieve = vec![true; n];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i * i < n {
        if sieve[i] {
            let mut j = i * i;
            while j < n {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    sieve
        .iter()
        .enumerate()
        .filter_map(|(k, &b)| b.then_some(k as u64))
        .collect()
}

/// Exact integer cube root of `x` (sign preserving), if `x` is a perfect cube.
pub fn exact_cbrt(x: i128) -> Option<i128> {
    let neg = x < 0;
    let ax = x.unsigned_abs();
    let mut r = (ax as f64).cbrt().round() as u128;
    while r.checked_pow(3).is_none_or(|c| c > ax) {
        r -= 1;
    }
    while (r + 1).checked_pow(3).is_some_and(|c| c <= ax) {
        r += 1;
    }
    (r * r * r == ax).then(|| if neg { -(r as i128) } else { r as i128 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_roundtrip() {
        for n in 1..2000u64 {
            let prod: u64 = factor(n).iter().map(|&(p, e)| p.pow(e)).product();
            assert_eq!(prod, n);
            assert!(factor(n).iter().all(|&(p, _)| is_prime(p)));
        }
    }

    #[test]
    fn cube_roots() {
        assert_eq!(exact_cbrt(-27), Some(-3));
        assert_eq!(exact_cbrt(343), Some(7));
        assert_eq!(exact_cbrt(344), None);
        assert_eq!(exact_cbrt(0), Some(0));
        let big = 1_000_003i128.pow(3);
        assert_eq!(exact_cbrt(big), Some(1_000_003));
        assert_eq!(exact_cbrt(big + 1), None);
    }

    #[test]
    fn inverses() {
        assert_eq!(inv_mod(3, 7), Some(5));
        assert_eq!(inv_mod(6, 9), None);
        assert_eq!(euler_phi(21), 12);
    }
}
