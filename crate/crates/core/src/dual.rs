//! Second evaluation route for φ near a rational point t_{p,q} = p/(2πq).
//!
//! Splitting k by residue mod q and applying Poisson summation to
//! g(x) = (e^{−ix²} − 1)/x² gives, for h > 0,
//!
//! φ(t_{p,q} + h) − φ(t_{p,q}) = −(√h/(2πq)) Σ_{ν∈Z} G(−p, ν, q)·ĝ(ν/(2πq√h)),
//!
//! and for h < 0 the same with |h| and ĝ conjugated (G is not conjugated).
//! The terms decay like ν^{−2} with spacing set by q√h, so the route is
//! cheap exactly where the direct series is slow: small h and small q.
//! φ(t_{p,q}) itself is exact through the trigamma function.

use crate::error::{Error, Result};
use crate::gauss::gauss_sum;
use crate::numerics::{cis_turns, frac_mul_dd, ghat_parts, trigamma, CSum, Dd, DEFECT_R2_BOUND};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Largest denominator [`phi_dual`] will expand around.
pub const MAX_DENOMINATOR: i64 = 2000;

/// Below this size the Gauss row is summed directly.
const BRUTE_ROW: i64 = 64;

/// φ(t_{p,q}) = ip/(2πq) + 1/12 − (1/(2π²q²)) Σ_{r=1}^{q} e^{−2πir²p/q} ψ₁(r/q).
pub fn phi_at_rational(p: i64, q: i64) -> Result<Complex64> {
    if q < 1 {
        return Err(Error::Precondition(format!("denominator must be positive, got {q}")));
    }
    let pm = p.rem_euclid(q) as i128;
    let mut acc = CSum::new(true);
    for r in 1..=q {
        let turns = ((r as i128 * r as i128 * pm) % q as i128) as f64 / q as f64;
        acc.add(cis_turns(-turns) * trigamma(r as f64 / q as f64));
    }
    let qf = q as f64;
    let s = acc.value() / (qf * qf);
    Ok(Complex64::new(1.0 / 12.0, p as f64 / (2.0 * PI * qf)) - s / (2.0 * PI * PI))
}

/// Gauss sums G(−p, ν, q) for ν = 0..q−1 and the exact value at t_{p,q}.
#[derive(Clone, Debug)]
pub struct DualRow {
    p: i64,
    q: i64,
    gauss: Vec<Complex64>,
    gmax: f64,
    base: Complex64,
}

impl DualRow {
    pub fn new(p: i64, q: i64) -> Result<DualRow> {
        if q < 1 || q > 10_000_000 {
            return Err(Error::Precondition(format!("denominator must be in [1, 1e7], got {q}")));
        }
        let gauss = if q <= BRUTE_ROW {
            (0..q).map(|nu| gauss_sum(-p, nu, q)).collect::<Vec<_>>()
        } else {
            // G(−p, ν, q) = Σ_m e^{−2πipm²/q} e^{2πiνm/q}: an unnormalized inverse DFT
            let pm = p.rem_euclid(q) as i128;
            let mut buf: Vec<Complex64> = (0..q as i128)
                .map(|m| cis_turns(-(((m * m * pm) % q as i128) as f64) / q as f64))
                .collect();
            FftPlanner::new().plan_fft_inverse(q as usize).process(&mut buf);
            buf
        };
        let gmax = gauss.iter().map(|g| g.norm()).fold(0.0, f64::max);
        Ok(DualRow {
            p,
            q,
            gauss,
            gmax,
            base: phi_at_rational(p, q)?,
        })
    }

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    /// G(−p, ν mod q, q).
    pub fn gauss(&self, nu: u64) -> Complex64 {
        self.gauss[(nu % self.q as u64) as usize]
    }

    /// φ(t_{p,q}).
    pub fn base_value(&self) -> Complex64 {
        self.base
    }

    /// Terms V such that the dropped part Σ_{ν>V} is at most `tol`.
    ///
    /// With r_ν = ν/(2q√|h|) ≥ 2.5 every dropped ĝ is bounded by
    /// 2√π·0.75/r_ν², which sums to 6·Gmax·q·|h|^{3/2}/(√π·V).
    pub fn terms_needed(&self, h: f64, tol: f64) -> f64 {
        let ah = h.abs();
        let qf = self.q as f64;
        let tail = 2.0 * self.gmax * ah.sqrt() / (2.0 * PI * qf) * 2.0 * PI.sqrt() * DEFECT_R2_BOUND * 4.0 * qf * qf * ah;
        let by_tail = tail / (0.99 * tol);
        let by_radius = 2.5 * 2.0 * qf * ah.sqrt();
        by_tail.max(by_radius).ceil() + 1.0
    }

    /// φ(t_{p,q} + h) − φ(t_{p,q}) to absolute accuracy `tol`.
    pub fn delta_phi(&self, h: f64, tol: f64, max_terms: u64) -> Result<Complex64> {
        self.delta_phi_dd(Dd::new(h), tol, max_terms)
    }

    /// As [`delta_phi`](Self::delta_phi) with h in double-double, so the
    /// phases ν²/(8πq²|h|) stay exact when they reach 10^12 turns.
    pub fn delta_phi_dd(&self, h: Dd, tol: f64, max_terms: u64) -> Result<Complex64> {
        if !(tol > 0.0) {
            return Err(Error::Precondition(format!("tol must be positive, got {tol}")));
        }
        let hf = h.to_f64();
        if !hf.is_finite() {
            return Err(Error::Precondition("h must be finite".into()));
        }
        if hf == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let needed = self.terms_needed(hf, tol);
        if needed > max_terms as f64 {
            let v = max_terms.max(1) as f64;
            return Err(Error::Budget {
                needed: needed.min(u64::MAX as f64) as u64,
                max_terms,
                achievable_tol: tol * needed / v,
            });
        }
        let terms = needed as u64;
        let ah = h.abs();
        let qf = self.q as f64;
        let root = ah.to_f64().sqrt();
        // e^{i r_ν²} with r_ν² = ν²/(4q²|h|) radians = ν²·β turns
        let beta = Dd::new(1.0).div(Dd::PI.mul(ah).mul_f64(8.0 * qf * qf));
        let r_step = 1.0 / (2.0 * qf * root);
        let negative = hf < 0.0;
        let side = |g: Complex64| if negative { g.conj() } else { g };
        let mut acc = CSum::new(true);
        acc.add(self.gauss[0] * side(ghat_parts(0.0, Complex64::new(1.0, 0.0))));
        let mut twice = CSum::new(true);
        // below r = 30 the closed form of ĝ needs erfc; above it a short series
        let slow_end = ((LARGE_R / r_step).ceil() as u64).min(terms);
        for nu in 1..=slow_end {
            let g = self.gauss(nu);
            if g.norm() == 0.0 {
                continue;
            }
            let phase = cis_turns(frac_mul_dd(beta, nu * nu));
            twice.add(g * side(ghat_parts(nu as f64 * r_step, phase)));
        }
        let y0 = 0.5 / (r_step * r_step);
        let s2p1i = Complex64::new(1.0, 1.0) * (2.0 * PI).sqrt();
        let v = cis_turns(frac_mul_dd(beta, 2));
        let mut nu = slow_end + 1;
        while nu <= terms {
            // e^{2πiβν²} by a two-level recurrence, reset from the exact phase
            let stop = (nu + RESET).min(terms + 1);
            let mut t = cis_turns(frac_mul_dd(beta, nu * nu));
            let mut u = cis_turns(frac_mul_dd(beta, 2 * nu + 1));
            let mut part = Complex64::new(0.0, 0.0);
            for k in nu..stop {
                let kf = k as f64;
                let d = defect_large(y0 / (kf * kf));
                part += self.gauss(k) * side(t * d);
                t *= u;
                u *= v;
            }
            twice.add(part * side(s2p1i));
            nu = stop;
        }
        acc.add(twice.value() * 2.0);
        Ok(-acc.value() * (root / (2.0 * PI * qf)))
    }
}

/// Radius from which ĝ uses [`defect_large`].
const LARGE_R: f64 = 30.0;

/// Terms between exact phase resets in the fast loop.
const RESET: u64 = 512;

/// D(r) = Σ_{n≥1} (2n−1)!!·(−i·y)^n with y = 1/(2r²), through n = 6.
/// For r ≥ 30 the first dropped term is below 1e−18·|D|.
#[inline]
fn defect_large(y: f64) -> Complex64 {
    let y2 = y * y;
    let re = y2 * (-3.0 + y2 * (105.0 - 10395.0 * y2));
    let im = y * (-1.0 + y2 * (15.0 - 945.0 * y2));
    Complex64::new(re, im)
}

/// Rational approximations p/q of x with q ≤ `max_q`, from its continued
/// fraction. Any rational is a valid expansion point; convergents are the
/// ones that make h small.
fn candidate_points(x: Dd, max_q: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, x.hi.floor() as i64, 1i64);
    out.push((p1, q1));
    let mut rem = x.sub(Dd::new(x.hi.floor()));
    for _ in 0..40 {
        if rem.hi.abs() < 1e-300 {
            break;
        }
        let y = Dd::new(1.0).div(rem);
        let a = y.hi.floor();
        if !(a.is_finite()) || a > 1e12 {
            break;
        }
        let ai = a as i64;
        let (p2, q2) = (ai * p1 + p0, ai * q1 + q0);
        if q2 > max_q {
            break;
        }
        out.push((p2, q2));
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        rem = y.sub(Dd::new(a));
    }
    out
}

/// φ at t = x/(2π) via the dual series around the cheapest nearby rational.
pub fn phi_dual_x(x: Dd, tol: f64, max_terms: u64) -> Result<Complex64> {
    if !x.hi.is_finite() {
        return Err(Error::Precondition("t must be finite".into()));
    }
    let mut best: Option<(f64, i64, i64, Dd)> = None;
    for (p, q) in candidate_points(x, MAX_DENOMINATOR) {
        let h = x.sub(Dd::ratio(p, q)).div(Dd::TWO_PI);
        let probe = DualRow {
            p,
            q,
            gauss: Vec::new(),
            gmax: (2.0 * q as f64).sqrt(),
            base: Complex64::new(0.0, 0.0),
        };
        let cost = q as f64 + if h.hi == 0.0 { 0.0 } else { probe.terms_needed(h.hi, tol) };
        if best.map_or(true, |b| cost < b.0) {
            best = Some((cost, p, q, h));
        }
    }
    let (_, p, q, h) = best.expect("the integer part is always a candidate");
    let row = DualRow::new(p, q)?;
    Ok(row.base_value() + row.delta_phi_dd(h, tol, max_terms)?)
}

pub fn phi_dual(t: f64, tol: f64, max_terms: u64) -> Result<Complex64> {
    phi_dual_x(Dd::TWO_PI.mul_f64(t), tol, max_terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::{phi, phi_x, EvalConfig};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Same 30-digit closed-form oracle as the direct-series tests.
    #[test]
    fn exact_values_at_rationals() {
        let oracle = [
            ((1, 2), c(0.125, 0.079_577_471_545_947_668)),
            ((1, 3), c(0.111_111_111_111_111_11, 0.117_201_677_607_256_86)),
            ((2, 5), c(0.144_721_359_549_995_79, 0.084_691_221_721_523_479)),
            ((3, 8), c(0.137_944_173_824_159_22, 0.103_877_277_483_619_97)),
            ((5, 7), c(0.092_958_329_226_272_881, 0.052_444_135_725_569_528)),
            ((1, 1), c(0.0, 0.159_154_943_091_895_34)),
            ((0, 1), c(0.0, 0.0)),
        ];
        for ((p, q), v) in oracle {
            let z = phi_at_rational(p, q).unwrap();
            assert!((z - v).norm() < 1e-15, "{p}/{q}: {z} vs {v}");
        }
    }

    #[test]
    fn fft_row_matches_direct_gauss_sums() {
        for (p, q) in [(3, 65), (7, 100), (11, 128), (5, 257)] {
            let row = DualRow::new(p, q).unwrap();
            for nu in [0u64, 1, 2, 17, (q - 1) as u64] {
                let direct = gauss_sum(-p, nu as i64, q);
                assert!((row.gauss(nu) - direct).norm() < 1e-10, "{p}/{q} ν={nu}");
            }
        }
    }

    /// Two independent routes: direct k-series versus dual ν-series.
    #[test]
    fn dual_agrees_with_direct_series() {
        let cfg = EvalConfig::default().with_tol(2e-9);
        for (p, q) in [(0, 1), (1, 2), (1, 3), (3, 8)] {
            let row = DualRow::new(p, q).unwrap();
            for h in [2e-3, 1e-3, -1e-3, -3e-3] {
                let dual = row.delta_phi(h, 1e-9, 50_000_000).unwrap();
                let x = Dd::ratio(p, q).add(Dd::TWO_PI.mul_f64(h));
                let direct = phi_x(x, &cfg).unwrap() - phi_x(Dd::ratio(p, q), &cfg).unwrap();
                assert!((dual - direct).norm() < 5e-9, "{p}/{q} h={h}: {dual} vs {direct}");
            }
        }
    }

    #[test]
    fn leading_behaviour_at_zero() {
        let row = DualRow::new(0, 1).unwrap();
        let h = 1e-10;
        let d = row.delta_phi(h, 1e-14, 50_000_000).unwrap();
        let lead = c(1.0, 1.0) * (h / (2.0 * PI)).sqrt();
        assert!(((d / lead) - 1.0).norm() < 1e-3);
    }

    #[test]
    fn short_defect_series_matches_general_path() {
        for r in [30.0, 41.3, 250.0, 1e4] {
            let phase = cis_turns(0.3);
            let y = 0.5 / (r * r);
            let fast = Complex64::new(1.0, 1.0) * (2.0 * PI).sqrt() * phase * defect_large(y);
            let slow = ghat_parts(r, phase);
            assert!((fast - slow).norm() < 1e-16, "r={r}");
        }
    }

    #[test]
    fn budget_error() {
        let row = DualRow::new(0, 1).unwrap();
        assert!(matches!(row.delta_phi(0.1, 1e-12, 1000), Err(Error::Budget { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn phi_dual_matches_phi(t in -2.0f64..2.0) {
            let cfg = EvalConfig::default();
            let a = phi(t, &cfg).unwrap();
            let b = phi_dual(t, 1e-10, 50_000_000).unwrap();
            prop_assert!((a - b).norm() < 1.1e-8, "t={} {} {}", t, a, b);
        }
    }
}
