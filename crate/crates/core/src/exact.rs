//! Exact rationals, continued fractions, approximation exponents and the
//! mod-4 denominator classes.

use crate::error::{precondition, Error, Result};
use crate::numerics::Dd;
use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::fmt;

/// Reduced fraction with positive denominator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rational {
    num: BigInt,
    den: BigInt,
}

impl Rational {
    pub fn num(&self) -> &BigInt {
        &self.num
    }

    pub fn den(&self) -> &BigInt {
        &self.den
    }

    pub fn from_i64(p: i64, q: i64) -> Result<Rational> {
        reduce(BigInt::from(p), BigInt::from(q))
    }

    /// Small parts as i64; panics if they do not fit, which callers rule out by range.
    pub fn parts_i64(&self) -> (i64, i64) {
        (
            self.num.to_i64().expect("numerator fits i64"),
            self.den.to_i64().expect("denominator fits i64"),
        )
    }

    pub fn class4(&self) -> u8 {
        self.den.mod_floor(&BigInt::from(4)).to_u8().unwrap()
    }

    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(&self.num, &self.den)
    }

    /// p/q to double-double accuracy.
    pub fn to_dd(&self) -> Dd {
        ratio_to_dd(&self.num, &self.den)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl Serialize for Rational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

pub fn reduce(num: BigInt, den: BigInt) -> Result<Rational> {
    if den.is_zero() {
        return precondition("zero denominator");
    }
    let g = num.gcd(&den);
    let (mut n, mut d) = (num / &g, den / &g);
    if d.is_negative() {
        n = -n;
        d = -d;
    }
    Ok(Rational { num: n, den: d })
}

/// Signed binary logarithm-free conversion of a big ratio to f64.
pub fn ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    ratio_to_dd(num, den).to_f64()
}

fn big_to_dd(x: &BigInt) -> (Dd, i64) {
    // x ≈ (hi + lo)·2^shift with hi + lo exact to 106 bits
    let shift = (x.bits() as i64 - 106).max(0);
    let y: BigInt = x >> shift as usize;
    let hi = y.to_f64().unwrap();
    let lo = (&y - BigInt::from_f64(hi).unwrap()).to_f64().unwrap();
    (Dd::new(hi).add(Dd::new(lo)), shift)
}

pub fn ratio_to_dd(num: &BigInt, den: &BigInt) -> Dd {
    if num.is_zero() {
        return Dd::new(0.0);
    }
    let (n, sn) = big_to_dd(num);
    let (d, sd) = big_to_dd(den);
    let q = n.div(d);
    let e = (sn - sd) as i32;
    let s = 2f64.powi(e);
    Dd {
        hi: q.hi * s,
        lo: q.lo * s,
    }
}

/// Natural logarithm of a positive big integer.
pub fn ln_big(x: &BigInt) -> f64 {
    assert!(x.is_positive());
    let bits = x.bits() as i64;
    let shift = (bits - 60).max(0);
    let y: BigInt = x >> shift as usize;
    y.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// Fixed-point decimal `mantissa / 10^digits`, carrying at least 120
/// significant digits for values of order one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtReal {
    pub mantissa: BigInt,
    pub digits: u32,
}

pub const EXT_DIGITS: u32 = 150;

impl ExtReal {
    pub fn scale(&self) -> BigInt {
        BigInt::from(10).pow(self.digits)
    }

    /// Truncation of num/den to `digits` decimals.
    pub fn from_ratio(num: &BigInt, den: &BigInt, digits: u32) -> ExtReal {
        let s = BigInt::from(10).pow(digits);
        ExtReal {
            mantissa: (num * s).div_floor(den),
            digits,
        }
    }

    /// Exact binary value of a double, truncated to 17 decimals.
    pub fn from_f64(x: f64) -> ExtReal {
        let s = 1e17;
        ExtReal {
            mantissa: BigInt::from((x * s).round() as i128),
            digits: 17,
        }
    }

    /// (√5 − 1)/2.
    pub fn golden() -> ExtReal {
        let d = EXT_DIGITS;
        let five = BigInt::from(5) * BigInt::from(10).pow(2 * d);
        ExtReal {
            mantissa: (five.sqrt() - BigInt::from(10).pow(d)) / 2,
            digits: d,
        }
    }

    pub fn to_dd(&self) -> Dd {
        ratio_to_dd(&self.mantissa, &self.scale())
    }

    pub fn to_f64(&self) -> f64 {
        self.to_dd().to_f64()
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.scale();
        let (ip, fp) = self.mantissa.abs().div_rem(&s);
        let sign = if self.mantissa.is_negative() { "-" } else { "" };
        write!(f, "{sign}{ip}.{:0>width$}", fp.to_string(), width = self.digits as usize)
    }
}

/// Quotients a_0..a_N and convergents p_n/q_n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CFExpansion {
    pub quotients: Vec<BigInt>,
    pub convergents: Vec<(BigInt, BigInt)>,
    /// True when the expansion reached an exact end (rational input).
    pub terminated: bool,
}

impl CFExpansion {
    pub fn from_quotients(quotients: Vec<BigInt>, terminated: bool) -> CFExpansion {
        let mut convergents = Vec::with_capacity(quotients.len());
        let (mut p1, mut q1) = (BigInt::one(), BigInt::zero());
        let (mut p2, mut q2) = (BigInt::zero(), BigInt::one());
        for a in &quotients {
            let p = a * &p1 + &p2;
            let q = a * &q1 + &q2;
            p2 = std::mem::replace(&mut p1, p.clone());
            q2 = std::mem::replace(&mut q1, q.clone());
            convergents.push((p, q));
        }
        CFExpansion {
            quotients,
            convergents,
            terminated,
        }
    }

    /// (p_{n-1}, q_{n-1}) with the seed (1, 0) for n = 0.
    pub fn previous(&self, n: usize) -> (BigInt, BigInt) {
        if n == 0 {
            (BigInt::one(), BigInt::zero())
        } else {
            self.convergents[n - 1].clone()
        }
    }

    /// Checks the recurrence and determinant identities exactly.
    pub fn check_invariants(&self) -> bool {
        for n in 0..self.convergents.len() {
            let (p, q) = &self.convergents[n];
            let (pp, qp) = self.previous(n);
            let sign = if n % 2 == 1 { 1 } else { -1 };
            if p * &qp - q * &pp != BigInt::from(sign) {
                return false;
            }
            if n >= 2 {
                let (_, q2) = &self.convergents[n - 2];
                if *q != &self.quotients[n] * &qp + q2 {
                    return false;
                }
                if q <= &qp {
                    return false;
                }
            }
        }
        true
    }
}

/// Exact expansion of a rational.
pub fn cf_rational(x: &Rational) -> CFExpansion {
    let (mut n, mut d) = (x.num.clone(), x.den.clone());
    let mut quotients = Vec::new();
    while !d.is_zero() {
        let (a, r) = n.div_mod_floor(&d);
        quotients.push(a);
        n = std::mem::replace(&mut d, r);
    }
    CFExpansion::from_quotients(quotients, true)
}

/// Expansion of a decimal real, stopping after `max_terms` quotients or once
/// |x − p_n/q_n| < 10^{−(digits−10)}.
pub fn cf_real(x: &ExtReal, max_terms: usize) -> Result<CFExpansion> {
    if max_terms == 0 {
        return precondition("max_terms must be positive for real input");
    }
    let scale = x.scale();
    let cutoff_exp = x.digits.saturating_sub(10);
    let cutoff = BigInt::from(10).pow(cutoff_exp);
    let (mut n, mut d) = (x.mantissa.clone(), scale.clone());
    let mut quotients = Vec::new();
    let (mut p1, mut q1) = (BigInt::one(), BigInt::zero());
    let (mut p2, mut q2) = (BigInt::zero(), BigInt::one());
    let mut terminated = false;
    while quotients.len() < max_terms {
        if d.is_zero() {
            terminated = true;
            break;
        }
        let (a, r) = n.div_mod_floor(&d);
        let p = &a * &p1 + &p2;
        let q = &a * &q1 + &q2;
        quotients.push(a);
        n = std::mem::replace(&mut d, r);
        // |x − p/q|·10^{digits−10} < 1  ⇔  |m q − p s|·cutoff < q s
        let resid = (&x.mantissa * &q - &p * &scale).abs();
        p2 = std::mem::replace(&mut p1, p);
        q2 = std::mem::replace(&mut q1, q.clone());
        if resid.is_zero() {
            terminated = true;
            break;
        }
        if resid * &cutoff < &q * &scale {
            break;
        }
    }
    Ok(CFExpansion::from_quotients(quotients, terminated))
}

/// The reduced fraction of 2p/q.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TildePair {
    pub p_tilde: i64,
    pub q_tilde: i64,
}

pub fn tilde_pair(pq: &Rational) -> Result<TildePair> {
    let (p, q) = pq.parts_i64();
    if p < 0 || p >= q {
        return precondition(format!("tilde pair needs 0 ≤ p < q, got {pq}"));
    }
    Ok(if q % 2 == 1 {
        TildePair {
            p_tilde: 2 * p,
            q_tilde: q,
        }
    } else {
        TildePair {
            p_tilde: p,
            q_tilde: q / 2,
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Class4 {
    Q013,
    Q2,
}

pub fn classify_mod4(pq: &Rational) -> Class4 {
    if pq.class4() == 2 {
        Class4::Q2
    } else {
        Class4::Q013
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaEntry {
    pub n: usize,
    pub q_mod4: u8,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaSequence {
    pub entries: Vec<GammaEntry>,
    pub gamma_limsup: f64,
}

/// γ_n = −ln|x − p_n/q_n| / ln q_n over the first `depth` convergents.
///
/// The limsup is replaced by the maximum over the last ⌈depth/2⌉ entries
/// whose q_n ≡ 0, 1, 3 (mod 4).
pub fn gamma_exponents(x: &ExtReal, depth: usize) -> Result<GammaSequence> {
    if depth < 2 {
        return precondition("gamma_exponents needs depth ≥ 2");
    }
    let cf = cf_real(x, depth)?;
    if cf.convergents.len() < depth {
        return Err(if cf.terminated {
            Error::Precondition(format!(
                "input is rational: expansion ends after {} quotients",
                cf.convergents.len()
            ))
        } else {
            Error::Precondition(format!(
                "precision of {} digits exhausted after {} quotients",
                x.digits,
                cf.convergents.len()
            ))
        });
    }
    let scale = x.scale();
    let mut entries = Vec::new();
    for (n, (p, q)) in cf.convergents.iter().enumerate() {
        let resid = (&x.mantissa * q - p * &scale).abs();
        if resid.is_zero() {
            return precondition(format!("input is rational: convergent {n} is exact"));
        }
        if q <= &BigInt::one() {
            continue;
        }
        // |x − p/q| = resid / (q·scale)
        let ln_err = ln_big(&resid) - ln_big(q) - ln_big(&scale);
        entries.push(GammaEntry {
            n,
            q_mod4: q.mod_floor(&BigInt::from(4)).to_u8().unwrap(),
            gamma: -ln_err / ln_big(q),
        });
    }
    let gamma_limsup = limsup_surrogate(&entries, depth);
    Ok(GammaSequence {
        entries,
        gamma_limsup,
    })
}

fn limsup_surrogate(entries: &[GammaEntry], depth: usize) -> f64 {
    let qualifying: Vec<f64> = entries
        .iter()
        .filter(|e| e.q_mod4 != 2)
        .map(|e| e.gamma)
        .collect();
    let keep = depth.div_ceil(2).min(qualifying.len());
    qualifying[qualifying.len() - keep..]
        .iter()
        .cloned()
        .fold(f64::NAN, f64::max)
}

/// Upper bound on denominators kept in a constructed expansion.
pub fn q_cap() -> BigInt {
    BigInt::from(10).pow(60)
}

/// Denominator beyond which the decimal value is fixed to all carried digits.
fn value_cap() -> BigInt {
    BigInt::from(10).pow(EXT_DIGITS / 2)
}

/// round(q^e) for e ≥ 0, exactly when e is an integer.
fn round_pow(q: &BigInt, e: f64) -> BigInt {
    if e == e.round() {
        return q.pow(e as u32);
    }
    let l = ln_big(q) * e;
    if l < 700.0 {
        return BigInt::from(l.exp().round() as u128);
    }
    let k = (l / std::f64::consts::LN_2).floor() as i64 - 60;
    let m = (l - k as f64 * std::f64::consts::LN_2).exp();
    BigInt::from(m.round() as u128) << k as usize
}

fn irrational_quotients(beta: f64, until: &BigInt) -> Vec<BigInt> {
    let mut quotients = vec![BigInt::zero()];
    let (mut q1, mut q2) = (BigInt::one(), BigInt::zero());
    while &q1 <= until {
        let a = round_pow(&q1, beta - 2.0).max(BigInt::one());
        let q = &a * &q1 + &q2;
        quotients.push(a);
        q2 = std::mem::replace(&mut q1, q);
    }
    quotients
}

/// Number of quotients `build_irrational(beta, ·)` can return under the cap.
pub fn max_irrational_depth(beta: f64) -> usize {
    let qs = irrational_quotients(beta, &q_cap());
    let cf = CFExpansion::from_quotients(qs, false);
    cf.convergents.iter().take_while(|(_, q)| q <= &q_cap()).count()
}

/// Irrational with partial quotients a_{n+1} = max(1, round(q_n^{β−2})).
///
/// The decimal carries the rule past the returned depth until the
/// denominators exceed 10^{75}, so its first `depth` quotients are exact.
pub fn build_irrational(beta: f64, depth: usize) -> Result<(ExtReal, CFExpansion)> {
    if !(beta >= 2.0) || !beta.is_finite() {
        return precondition(format!("beta must be ≥ 2, got {beta}"));
    }
    if depth == 0 {
        return precondition("depth must be positive");
    }
    let all = irrational_quotients(beta, &value_cap());
    let full = CFExpansion::from_quotients(all.clone(), false);
    let available = full
        .convergents
        .iter()
        .take_while(|(_, q)| q <= &q_cap())
        .count();
    if depth > available {
        return Err(Error::Guard(format!(
            "beta {beta}: depth {depth} exceeds the 1e60 denominator cap (max depth {available})"
        )));
    }
    let (p, q) = full.convergents.last().unwrap();
    let x = ExtReal::from_ratio(p, q, EXT_DIGITS);
    Ok((x, CFExpansion::from_quotients(all[..depth].to_vec(), false)))
}

/// Euler's totient by trial division.
pub fn totient(q: &BigInt) -> Result<BigInt> {
    if q.sign() != Sign::Plus {
        return precondition("totient needs q ≥ 1");
    }
    let mut n = q.clone();
    let mut result = q.clone();
    let mut f = BigInt::from(2);
    while &f * &f <= n {
        if (&n % &f).is_zero() {
            while (&n % &f).is_zero() {
                n /= &f;
            }
            result -= &result / &f;
        }
        f += 1;
    }
    if n > BigInt::one() {
        result -= &result / &n;
    }
    Ok(result)
}

/// Totients 0..=n by a sieve (index 0 holds 0).
pub fn totient_table(n: usize) -> Vec<u64> {
    let mut phi: Vec<u64> = (0..=n as u64).collect();
    for i in 2..=n {
        if phi[i] == i as u64 {
            let mut j = i;
            while j <= n {
                phi[j] -= phi[j] / i as u64;
                j += i;
            }
        }
    }
    phi
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}
