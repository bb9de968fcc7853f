//! Direct evaluation of φ, φ_D, R, Y_n, Z_n and the exact identities
//! tying them together.
//!
//! φ(t) = Σ_{k∈Z} (e^{−4π²ik²t} − 1)/(−4π²k²) with the k = 0 summand taken
//! as its limit i·t. Writing x = 2πt and pairing ±k,
//! φ(t) = i·t + 1/12 − (1/2π²) Σ_{k≥1} e^{−2πi x k²}/k²,
//! where the non-oscillating part Σ 1/(2π²k²) = 1/12 is summed exactly
//! (the same as correcting a truncated sum by its trigamma tail).

use crate::error::{Error, Result};
use crate::numerics::{cis_turns, frac_mul_dd, inv_two_pi, CSum, Dd};
use crate::spectral::GridSum;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvalConfig {
    pub abs_tol: f64,
    pub max_terms: u64,
    pub compensated: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            abs_tol: 1e-8,
            max_terms: 50_000_000,
            compensated: true,
        }
    }
}

impl EvalConfig {
    pub fn with_tol(self, abs_tol: f64) -> Self {
        EvalConfig { abs_tol, ..self }
    }
}

/// Terms needed for a tail bound `c / K^e ≤ 0.99·tol`, checked against the
/// budget. The 1% margin absorbs rounding of the kept terms.
fn terms_for(cfg: &EvalConfig, c: f64, e: f64) -> Result<u64> {
    if !(cfg.abs_tol > 0.0) {
        return Err(Error::Precondition(format!("abs_tol must be positive, got {}", cfg.abs_tol)));
    }
    let needed = (c / (TAIL_SHARE * cfg.abs_tol)).powf(1.0 / e).ceil().max(1.0);
    if needed > cfg.max_terms as f64 {
        return Err(Error::Budget {
            needed: needed.min(u64::MAX as f64) as u64,
            max_terms: cfg.max_terms,
            achievable_tol: c / (cfg.max_terms as f64).powf(e) / TAIL_SHARE,
        });
    }
    Ok(needed as u64)
}

const TAIL_SHARE: f64 = 0.99;

const BLOCK: u64 = 1 << 16;
const RESET: u64 = 1024;

/// Σ_{j<count} e^{2πi β k²}·k^{−2·power} over k = k0 + stride·j.
///
/// The phase runs a two-level multiplicative recurrence reset from the
/// exact fractional part of β·k² every 1024 terms. Blocks of 2^16 terms are
/// reduced in a fixed order, so the result does not depend on the thread count.
pub fn quadratic_phase_sum(beta: Dd, k0: u64, stride: u64, count: u64, power: i32, compensated: bool) -> Complex64 {
    let blocks = count.div_ceil(BLOCK);
    let partial: Vec<Complex64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK;
            let end = (start + BLOCK).min(count);
            phase_block(beta, k0, stride, start, end, power, compensated)
        })
        .collect();
    let mut acc = CSum::new(compensated);
    for p in partial {
        acc.add(p);
    }
    acc.value()
}

fn phase_block(beta: Dd, k0: u64, stride: u64, start: u64, end: u64, power: i32, compensated: bool) -> Complex64 {
    let mut acc = CSum::new(compensated);
    let v = cis_turns(frac_mul_dd(beta, 2 * stride * stride));
    let mut j = start;
    while j < end {
        let k = k0 + stride * j;
        let mut t = cis_turns(frac_mul_dd(beta, k * k));
        let mut u = cis_turns(frac_mul_dd(beta, 2 * k * stride + stride * stride));
        let stop = (j + RESET).min(end);
        for jj in j..stop {
            let kk = (k0 + stride * jj) as f64;
            let w = 1.0 / (kk * kk);
            acc.add(t * w.powi(power));
            t *= u;
            u *= v;
        }
        j = stop;
    }
    acc.value()
}

/// Σ_{k≥1} e^{−2πi x k²}/k² truncated at the tolerance of φ.
fn phi_oscillatory(x: Dd, cfg: &EvalConfig) -> Result<Complex64> {
    let k = terms_for(cfg, 1.0 / (2.0 * PI * PI), 1.0)?;
    Ok(quadratic_phase_sum(x.neg(), 1, 1, k, 1, cfg.compensated))
}

pub fn phi(t: f64, cfg: &EvalConfig) -> Result<Complex64> {
    if !t.is_finite() {
        return Err(Error::Precondition("t must be finite".into()));
    }
    let s = phi_oscillatory(Dd::TWO_PI.mul_f64(t), cfg)?;
    Ok(Complex64::new(1.0 / 12.0, t) - s / (2.0 * PI * PI))
}

/// φ at t = x/(2π) for x given in double-double, e.g. an exact p/q.
pub fn phi_x(x: Dd, cfg: &EvalConfig) -> Result<Complex64> {
    let s = phi_oscillatory(x, cfg)?;
    let t = x.mul(inv_two_pi()).to_f64();
    Ok(Complex64::new(1.0 / 12.0, t) - s / (2.0 * PI * PI))
}

/// φ_D(t) = Σ_{n≥1} e^{iπn²t}/(iπn²).
pub fn phi_d(t: f64, cfg: &EvalConfig) -> Result<Complex64> {
    let k = terms_for(cfg, 1.0 / PI, 1.0)?;
    let s = quadratic_phase_sum(Dd::new(t).mul_f64(0.5), 1, 1, k, 1, cfg.compensated);
    Ok(s / Complex64::new(0.0, PI))
}

/// R(x) = Σ_{n≥1} sin(n²x)/n².
pub fn riemann_r(x: f64, cfg: &EvalConfig) -> Result<f64> {
    riemann_r_x(Dd::new(x), cfg)
}

pub fn riemann_r_x(x: Dd, cfg: &EvalConfig) -> Result<f64> {
    let k = terms_for(cfg, 1.0, 1.0)?;
    let beta = x.mul(inv_two_pi());
    Ok(quadratic_phase_sum(beta, 1, 1, k, 1, cfg.compensated).im)
}

fn check_aux(n: u32, h: f64) -> Result<()> {
    if n < 1 {
        return Err(Error::Precondition("n must be ≥ 1".into()));
    }
    if h == 0.0 || !h.is_finite() {
        return Err(Error::Precondition(format!("h must be finite and nonzero, got {h}")));
    }
    Ok(())
}

/// Y_n(h) = Σ_{k≥1} e^{ik²/(4h)}/k^{2n}.
pub fn y_n(n: u32, h: f64, cfg: &EvalConfig) -> Result<Complex64> {
    check_aux(n, h)?;
    let e = 2.0 * n as f64 - 1.0;
    let k = terms_for(cfg, 1.0 / e, e)?;
    // k²/(4h) radians = k²/(8πh) turns
    let beta = Dd::new(1.0).div(Dd::PI.mul_f64(8.0 * h));
    Ok(quadratic_phase_sum(beta, 1, 1, k, n as i32, cfg.compensated))
}

/// Z_n(h) = Σ_{k≥1, k odd} e^{ik²/(16h)}/k^{2n}.
pub fn z_n(n: u32, h: f64, cfg: &EvalConfig) -> Result<Complex64> {
    check_aux(n, h)?;
    let e = 2.0 * n as f64 - 1.0;
    // odd k > 2K contribute at most 1/(2e(2K)^e)
    let k = terms_for(cfg, 1.0 / (2.0 * e * 2f64.powf(e)), e)?;
    let beta = Dd::new(1.0).div(Dd::PI.mul_f64(32.0 * h));
    Ok(quadratic_phase_sum(beta, 1, 2, k, n as i32, cfg.compensated))
}

/// x-coordinate of t_{1,2} + h, i.e. 1/2 + 2πh.
fn half_point_x(h: f64) -> Dd {
    Dd::new(0.5).add(Dd::TWO_PI.mul_f64(h))
}

/// φ(t_{1,2} + h).
pub fn phi_half_shift(h: f64, cfg: &EvalConfig) -> Result<Complex64> {
    phi_x(half_point_x(h), cfg)
}

/// φ(t_{1,2}) = 1/8 + i/(4π).
pub fn phi_half_value() -> Complex64 {
    Complex64::new(0.125, 0.25 / PI)
}

/// |φ(h + t_{1,2}) − (1/8 + i/(4π) + φ(4h)/2 − φ(h))|.
pub fn identity_t12(h: f64, cfg: &EvalConfig) -> Result<f64> {
    let lhs = phi_half_shift(h, cfg)?;
    let rhs = phi_half_value() + phi(4.0 * h, cfg)? / 2.0 - phi(h, cfg)?;
    Ok((lhs - rhs).norm())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveTrace {
    pub ts: Vec<f64>,
    pub zs: Vec<Complex64>,
    pub config: EvalConfig,
}

/// φ on the uniform grid t_j = t0 + j(t1 − t0)/(n − 1).
///
/// Each frequency k contributes e^{−2πi x_0 k²}/k² · e^{−2πi j θ_k} with
/// θ_k = frac(Δx·k²), so the whole grid is one non-uniform Fourier sum,
/// evaluated by Gaussian gridding in O(K + n log n).
pub fn trace(t0: f64, t1: f64, n_points: usize, cfg: &EvalConfig) -> Result<CurveTrace> {
    if !(t0 < t1) || n_points < 2 {
        return Err(Error::Precondition(format!(
            "trace needs t0 < t1 and n ≥ 2, got [{t0}, {t1}] with n = {n_points}"
        )));
    }
    let k_max = terms_for(cfg, 1.0 / (2.0 * PI * PI), 1.0)?;
    let steps = (n_points - 1) as f64;
    let x0 = Dd::TWO_PI.mul_f64(t0);
    let dx = Dd::TWO_PI.mul(Dd::new(t1).sub(Dd::new(t0)).div(Dd::new(steps)));
    let mut grid = GridSum::new(n_points);
    for k in 1..=k_max {
        let k2 = k * k;
        let w = cis_turns(-frac_mul_dd(x0, k2)) / (k as f64 * k as f64);
        grid.add(frac_mul_dd(dx, k2), w);
    }
    let sums = grid.finish();
    let ts: Vec<f64> = (0..n_points)
        .map(|j| if j == n_points - 1 { t1 } else { t0 + (t1 - t0) * j as f64 / steps })
        .collect();
    let zs = ts
        .iter()
        .zip(&sums)
        .map(|(&t, s)| Complex64::new(1.0 / 12.0, t) - s / (2.0 * PI * PI))
        .collect();
    Ok(CurveTrace { ts, zs, config: *cfg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> EvalConfig {
        EvalConfig::default()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phi_examples() {
        let tol = cfg().abs_tol;
        assert!(phi(0.0, &cfg()).unwrap().norm() < tol);
        // t = 1/(2π) and 1/(4π) are not doubles; pass x = 2πt exactly
        let p = phi_x(Dd::new(1.0), &cfg()).unwrap();
        assert!((p - c(0.0, 1.0 / (2.0 * PI))).norm() < tol);
        let p = phi_x(Dd::new(0.5), &cfg()).unwrap();
        assert!((p - phi_half_value()).norm() < tol);
        let a = phi(0.137, &cfg()).unwrap();
        let b = phi(-0.137, &cfg()).unwrap();
        assert!((a - b.conj()).norm() < 2.0 * tol);
    }

    /// Values at t_{p,q} frozen from the closed form
    /// ip/(2πq) + (1/2π²)[π²/6 − q^{−2} Σ_{r=1}^{q} e^{−2πir²p/q} ψ₁(r/q)]
    /// evaluated with 30-digit arithmetic.
    #[test]
    fn phi_matches_rational_oracle() {
        let oracle = [
            ((1, 3), c(0.111_111_111_111_111_11, 0.117_201_677_607_256_86)),
            ((2, 5), c(0.144_721_359_549_995_79, 0.084_691_221_721_523_479)),
            ((3, 8), c(0.137_944_173_824_159_22, 0.103_877_277_483_619_97)),
            ((5, 7), c(0.092_958_329_226_272_881, 0.052_444_135_725_569_528)),
        ];
        for ((p, q), v) in oracle {
            let z = phi_x(Dd::ratio(p, q), &cfg()).unwrap();
            assert!((z - v).norm() < cfg().abs_tol, "{p}/{q}: {z} vs {v}");
        }
    }

    #[test]
    fn budget_error_reports_achievable_tol() {
        let tight = EvalConfig {
            abs_tol: 1e-12,
            max_terms: 1000,
            compensated: true,
        };
        match phi(0.3, &tight) {
            Err(Error::Budget { needed, max_terms, achievable_tol }) => {
                assert!(needed > 1000 && max_terms == 1000);
                assert!((achievable_tol * TAIL_SHARE - 1.0 / (2.0 * PI * PI * 1000.0)).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn phi_d_examples() {
        let tol = cfg().abs_tol;
        let d = phi_d(0.3, &cfg()).unwrap();
        // R(πt)/π has the same tail bound 1/(πK) as φ_D
        let r = riemann_r(PI * 0.3, &cfg().with_tol(PI * tol)).unwrap();
        assert!((d.re - r / PI).abs() < 2.0 * tol);
        let a = phi_d(0.41, &cfg()).unwrap();
        let b = phi_d(2.41, &cfg()).unwrap();
        assert!((a - b).norm() < 2.0 * tol);
        // relation to φ
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in (0..20).map(|_| rng.gen_range(-1.0..1.0)) {
            let lhs = phi(t, &cfg()).unwrap();
            let rhs = -c(0.0, 1.0 / (2.0 * PI)) * phi_d(-4.0 * PI * t, &cfg()).unwrap() + c(1.0 / 12.0, t);
            assert!((lhs - rhs).norm() < 2.0 * tol, "t={t}");
        }
    }

    #[test]
    fn riemann_r_examples() {
        // the default budget of 5e7 terms reaches 2e-8 for R
        assert!(matches!(riemann_r(1.0, &cfg()), Err(Error::Budget { .. })));
        let cfg = cfg().with_tol(3e-8);
        let tol = cfg.abs_tol;
        assert!(riemann_r(0.0, &cfg).unwrap().abs() < tol);
        // π is not a double, so pass it in double-double
        assert!(riemann_r_x(Dd::PI, &cfg).unwrap().abs() < tol);
        let a = riemann_r(1.1, &cfg).unwrap();
        let b = riemann_r(-1.1, &cfg).unwrap();
        assert!((a + b).abs() < tol);
    }

    #[test]
    fn auxiliary_series() {
        let tol = cfg().abs_tol;
        // Y_1 has tail bound 1/K, and φ's error is amplified by 2π² on the
        // right-hand side, so both sides need about 1e8 terms for 1e-8
        let wide = EvalConfig {
            max_terms: 200_000_000,
            ..cfg()
        };
        let h = 0.01;
        let y1 = y_n(1, h, &wide).unwrap();
        let phi_cfg = wide.with_tol(tol / (2.0 * PI * PI));
        let ss = c(PI * PI / 6.0, -1.0 / (8.0 * h)) - 2.0 * PI * PI * phi(-1.0 / (16.0 * PI * PI * h), &phi_cfg).unwrap();
        assert!((y1 - ss).norm() < 2.0 * tol, "{}", (y1 - ss).norm());
        assert!(matches!(y_n(1, h, &cfg()), Err(Error::Budget { .. })));
        let h = 0.003;
        let lhs = 4.0 * y_n(1, 4.0 * h, &wide).unwrap() - y_n(1, h, &wide).unwrap();
        let rhs = 4.0 * z_n(1, h, &wide).unwrap();
        assert!((lhs - rhs).norm() < 3.0 * 4.0 * tol);
        assert!(y_n(2, 0.02, &cfg()).unwrap().norm() <= PI.powi(4) / 90.0 + tol);
        assert!(y_n(1, 0.0, &cfg()).is_err());
        assert!(y_n(0, 0.1, &cfg()).is_err());
    }

    #[test]
    fn half_point_identity() {
        let tol = cfg().abs_tol;
        assert!(identity_t12(0.0, &cfg()).unwrap() < 3.0 * tol);
        assert!(identity_t12(0.01, &cfg()).unwrap() < 3.0 * tol);
        assert!(identity_t12(-0.02, &cfg()).unwrap() < 3.0 * tol);
    }

    #[test]
    fn trace_examples() {
        let cfg = cfg();
        let period = 1.0 / (2.0 * PI);
        let tr = trace(0.0, period, 4097, &cfg).unwrap();
        assert!(tr.zs[0].norm() < cfg.abs_tol, "{}", tr.zs[0]);
        assert!((tr.zs[4096] - c(0.0, period)).norm() < cfg.abs_tol);
        assert!(tr.ts.windows(2).all(|w| w[0] < w[1]));
        let next = trace(period, 2.0 * period, 4097, &cfg).unwrap();
        for j in (0..4097).step_by(97) {
            assert!((next.zs[j] - tr.zs[j] - c(0.0, period)).norm() < 10.0 * cfg.abs_tol, "j={j}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for j in (0..16).map(|_| rng.gen_range(1..4096usize)) {
            let direct = phi(tr.ts[j], &cfg).unwrap();
            assert!((tr.zs[j] - direct).norm() < 10.0 * cfg.abs_tol, "j={j}");
        }
        assert!(trace(0.1, 0.0, 10, &cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn conjugation_and_periodicity(t in -1.0f64..1.0) {
            let cfg = cfg();
            let a = phi(t, &cfg).unwrap();
            prop_assert!((phi(-t, &cfg).unwrap() - a.conj()).norm() < 2.0 * cfg.abs_tol);
            let b = phi(t + 1.0 / (2.0 * PI), &cfg).unwrap();
            prop_assert!((b - a - c(0.0, 1.0 / (2.0 * PI))).norm() < 2.0 * cfg.abs_tol);
        }

    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn refinement_is_consistent(t in -0.5f64..0.5) {
            let coarse = cfg();
            let fine = coarse.with_tol(coarse.abs_tol / 2.0);
            let d = (phi(t, &coarse).unwrap() - phi(t, &fine).unwrap()).norm();
            prop_assert!(d < coarse.abs_tol);
        }
    }
}
