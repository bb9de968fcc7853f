//! The periodic free Schrödinger solution ψ(s,t) = Σ_k e^{2πiks − 4π²ik²t}
//! at rational times t = p/(2πq): Gaussian-smoothed combs, their Gauss-sum
//! peak weights, the pseudoconformal identity, and polygonal-corner
//! trajectories built from φ.

use crate::error::{precondition, Error, Result};
use crate::exact::gcd_i64;
use crate::gauss::{gauss_brute, GaussSumSpec};
use crate::numerics::{cis_turns, frac_mul, CSum};
use crate::phi::{trace, CurveTrace, EvalConfig};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Largest denominator accepted for profiles.
pub const PROFILE_MAX_Q: i64 = 10_000;
/// Largest comb half-length.
pub const COMB_MAX_K: u64 = 100_000_000;
/// ln(1e14): the Gaussian weight at the cut is below e^{−this}.
const CUT_LOG: f64 = 32.236_191_301_916_64;

fn check_pq(p: i64, q: i64) -> Result<()> {
    if q < 1 || gcd_i64(p, q) != 1 {
        return precondition(format!("{p}/{q} is not a reduced fraction with q ≥ 1"));
    }
    if q > PROFILE_MAX_Q {
        return Err(Error::Guard(format!("denominator {q} exceeds {PROFILE_MAX_Q}")));
    }
    Ok(())
}

/// Smallest K with e^{−σK²} < 1e−14.
pub fn comb_terms(sigma: f64) -> Result<u64> {
    if !(sigma > 0.0) {
        return precondition(format!("sigma must be positive, got {sigma}"));
    }
    let k = (CUT_LOG / sigma).sqrt().ceil() + 1.0;
    if k > COMB_MAX_K as f64 {
        return Err(Error::Guard(format!("sigma {sigma:e} needs {k:e} comb terms")));
    }
    Ok(k as u64)
}

/// Σ_{|k|≤K} e^{2πiks − 2πik²a/c − wk²}, Re w > 0, the k² phase reduced exactly mod c.
fn comb(s: Complex64, a: i64, c: i64, w: Complex64, k_max: u64) -> Complex64 {
    let cu = c as i128;
    let a = (a as i128).rem_euclid(cu);
    let s_re = s.re - s.re.floor();
    let mut acc = CSum::new(true);
    acc.add(Complex64::new(1.0, 0.0));
    for k in 1..=k_max {
        let kk = k as i128 * k as i128;
        let quad = cis_turns(-(((a * (kk % cu)) % cu) as f64 / c as f64));
        let damp = (-w * (k as f64 * k as f64)).exp();
        let lin = frac_mul(s_re, k);
        let grow = (2.0 * PI * k as f64 * s.im).exp();
        // k and −k share the quadratic factor
        let pair = cis_turns(lin) / grow + cis_turns(-lin) * grow;
        acc.add(quad * damp * pair);
    }
    acc.value()
}

/// Σ_{|k|≤K} e^{−σk²} e^{2πi(ks − k²p/q)} with K from [`comb_terms`].
pub fn psi_smoothed(s: f64, p: i64, q: i64, sigma: f64) -> Result<Complex64> {
    if q < 1 {
        return precondition(format!("denominator must be ≥ 1, got {q}"));
    }
    let k = comb_terms(sigma)?;
    Ok(comb(Complex64::new(s, 0.0), p, q, Complex64::new(sigma, 0.0), k))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TalbotProfile {
    pub p: i64,
    pub q: i64,
    /// Peak at s = r/q for r = 0..q−1.
    pub peak_positions: Vec<f64>,
    /// G(−p,r,q)/q.
    pub peak_weights: Vec<Complex64>,
}

/// Weights of the comb ψ(·, p/(2πq)) = Σ_r (G(−p,r,q)/q) δ(· − r/q) mod 1.
pub fn talbot_profile(p: i64, q: i64) -> Result<TalbotProfile> {
    check_pq(p, q)?;
    let peak_weights = (0..q)
        .map(|r| Ok(gauss_brute(GaussSumSpec { a: -p, b: r, c: q })? / q as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(TalbotProfile {
        p,
        q,
        peak_positions: (0..q).map(|r| r as f64 / q as f64).collect(),
        peak_weights,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Peak {
    pub s: f64,
    pub magnitude: f64,
}

/// Local maxima of |ψ_σ| on the circular grid s = j/(8q), keeping those
/// above 1e−6 of the largest.
pub fn smoothed_peaks(p: i64, q: i64, sigma: f64) -> Result<Vec<Peak>> {
    check_pq(p, q)?;
    let n = 8 * q as usize;
    let vals = (0..n)
        .into_par_iter()
        .map(|j| psi_smoothed(j as f64 / n as f64, p, q, sigma).map(|z| z.norm()))
        .collect::<Result<Vec<f64>>>()?;
    let top = vals.iter().cloned().fold(0.0, f64::max);
    Ok((0..n)
        .filter(|&j| {
            let v = vals[j];
            v >= 1e-6 * top && v >= vals[(j + n - 1) % n] && v >= vals[(j + 1) % n]
        })
        .map(|j| Peak {
            s: j as f64 / n as f64,
            magnitude: vals[j],
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeakComparison {
    pub profile: TalbotProfile,
    pub peaks: Vec<Peak>,
    /// Largest |measured ratio − weight ratio| / weight ratio, ratios to the tallest.
    pub max_ratio_error: f64,
    /// Peaks sit exactly at the residues with nonzero weight.
    pub positions_match: bool,
}

/// Smoothed peak heights against |G(−p,r,q)|/q, both normalised by their maximum.
pub fn compare_peaks(p: i64, q: i64, sigma: f64) -> Result<PeakComparison> {
    let profile = talbot_profile(p, q)?;
    let peaks = smoothed_peaks(p, q, sigma)?;
    let wmax = profile.peak_weights.iter().map(|w| w.norm()).fold(0.0, f64::max);
    let support: Vec<usize> = (0..q as usize)
        .filter(|&r| profile.peak_weights[r].norm() > 1e-9 * wmax)
        .collect();
    let found: Vec<Option<usize>> = peaks
        .iter()
        .map(|pk| {
            let j = (pk.s * 8.0 * q as f64).round() as usize;
            (j % 8 == 0).then_some(j / 8)
        })
        .collect();
    let positions_match = found.len() == support.len() && found.iter().zip(&support).all(|(f, r)| *f == Some(*r));
    let pmax = peaks.iter().map(|pk| pk.magnitude).fold(0.0, f64::max);
    let max_ratio_error = if positions_match {
        support
            .iter()
            .zip(&peaks)
            .map(|(&r, pk)| {
                let want = profile.peak_weights[r].norm() / wmax;
                (pk.magnitude / pmax - want).abs() / want
            })
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(PeakComparison {
        profile,
        peaks,
        max_ratio_error,
        positions_match,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Matching {
    /// Smoothing read as the complex time t − iσ/(4π²); the identity is exact.
    ComplexTime,
    /// Real arguments on the dual side with σ' = σ/(16π²t²); exact only as σ → 0.
    LeadingOrder,
}

/// max over s of |ψ_σ(s,t) − (4πit)^{−1/2} e^{is²/4t} ψ̄_{σ'}(s/(4πt), 1/(16π²t))| at t = p/(2πq).
///
/// The dual time 1/(16π²t) equals q/(8πp), so its comb phase is k²q/(4p)
/// reduced exactly mod 4p.
pub fn pseudoconformal_residual(p: i64, q: i64, sigma: f64, s_points: &[f64], matching: Matching) -> Result<f64> {
    check_pq(p, q)?;
    let p = p.rem_euclid(q);
    if p == 0 {
        return precondition("t = 0 is the pole of the pseudoconformal map");
    }
    let k_left = comb_terms(sigma)?;
    let t = p as f64 / (2.0 * PI * q as f64);
    let i = Complex64::new(0.0, 1.0);
    let (tau, w_dual) = match matching {
        Matching::ComplexTime => {
            let tau = Complex64::new(t, -sigma / (4.0 * PI * PI));
            let t_dual = q as f64 / (8.0 * PI * p as f64);
            // ψ̄ term e^{4π²ik²t'} = e^{2πik²q/(4p)}·e^{−w k²}
            let w = -4.0 * PI * PI * i * (1.0 / (16.0 * PI * PI * tau) - t_dual);
            (tau, w)
        }
        Matching::LeadingOrder => (
            Complex64::new(t, 0.0),
            Complex64::new(sigma / (16.0 * PI * PI * t * t), 0.0),
        ),
    };
    let pref = (4.0 * PI * i * tau).sqrt().inv();
    let mut worst = 0.0f64;
    for &s in s_points {
        let left = comb(Complex64::new(s, 0.0), p, q, Complex64::new(sigma, 0.0), k_left);
        // ψ̄(s', t') = Σ e^{−2πiks' + 4π²ik²t'}
        let s_dual = -s / (4.0 * PI * tau);
        let k_dual = dual_terms(w_dual, s_dual.im)?;
        let right = pref * (i * s * s / (4.0 * tau)).exp() * comb(s_dual, -q, 4 * p, w_dual, k_dual);
        worst = worst.max((left - right).norm());
    }
    Ok(worst)
}

/// K with Re(w)K² − 2π|Im s|K above the cut.
fn dual_terms(w: Complex64, s_im: f64) -> Result<u64> {
    if !(w.re > 0.0) {
        return Err(Error::Numerical(format!("dual comb does not decay (w = {w})")));
    }
    let b = 2.0 * PI * s_im.abs();
    let k = ((b + (b * b + 4.0 * w.re * CUT_LOG).sqrt()) / (2.0 * w.re)).ceil() + 1.0;
    if k > COMB_MAX_K as f64 {
        return Err(Error::Guard(format!("dual comb needs {k:e} terms")));
    }
    Ok(k as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Periodicity {
    /// max |ψ_σ(s+1) − ψ_σ(s)| / Σ_k e^{−σk²}.
    pub spatial: f64,
    /// max |ψ_σ(s; p+q over q) − ψ_σ(s; p/q)| / Σ_k e^{−σk²}.
    pub temporal: f64,
}

/// Spatial and temporal period residuals of ψ_σ at the given points,
/// relative to the comb mass.
pub fn periodicity_residuals(p: i64, q: i64, sigma: f64, s_points: &[f64]) -> Result<Periodicity> {
    check_pq(p, q)?;
    let mass = psi_smoothed(0.0, 0, 1, sigma)?.re;
    let mut out = Periodicity {
        spatial: 0.0,
        temporal: 0.0,
    };
    for &s in s_points {
        let base = psi_smoothed(s, p, q, sigma)?;
        out.spatial = out.spatial.max((psi_smoothed(s + 1.0, p, q, sigma)? - base).norm() / mass);
        out.temporal = out.temporal.max((psi_smoothed(s, p + q, q, sigma)? - base).norm() / mass);
    }
    Ok(out)
}

/// (4π²/M²)·φ(M²t/(4π²)) on the uniform grid over [t0, t1].
pub fn corner_trajectory(m: u32, t0: f64, t1: f64, n: usize, cfg: &EvalConfig) -> Result<CurveTrace> {
    if m < 3 {
        return precondition(format!("a polygon needs M ≥ 3 sides, got {m}"));
    }
    let scale = (m as f64 * m as f64) / (4.0 * PI * PI);
    let inner = trace(scale * t0, scale * t1, n, cfg)?;
    let steps = (n - 1) as f64;
    Ok(CurveTrace {
        ts: (0..n).map(|j| t0 + (t1 - t0) * j as f64 / steps).collect(),
        zs: inner.zs.iter().map(|z| z / scale).collect(),
        config: inner.config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smoothed_comb_at_zero_is_a_gaussian_mass() {
        let sigma = 1e-4;
        let v = psi_smoothed(0.0, 0, 1, sigma).unwrap();
        assert!((v.re / (PI / sigma).sqrt() - 1.0).abs() < 1e-2);
        assert!(v.im.abs() < 1e-9);
        assert!(comb_terms(0.0).is_err());
        assert!(matches!(comb_terms(1e-20), Err(Error::Guard(_))));
    }

    #[test]
    fn profile_examples() {
        let third = talbot_profile(1, 3).unwrap();
        for w in &third.peak_weights {
            assert!((w.norm() - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        }
        let half = talbot_profile(1, 2).unwrap();
        assert!(half.peak_weights[0].norm() < 1e-12);
        assert!((half.peak_weights[1] - 1.0).norm() < 1e-12);
        let one = talbot_profile(0, 1).unwrap();
        assert_eq!(one.peak_weights, vec![Complex64::new(1.0, 0.0)]);
        assert!(talbot_profile(2, 4).is_err());
    }

    #[test]
    fn profile_mass_is_one() {
        for (p, q) in [(1, 3), (2, 5), (1, 4), (3, 8), (5, 12), (7, 10)] {
            let mass: f64 = talbot_profile(p, q).unwrap().peak_weights.iter().map(|w| w.norm_sqr()).sum();
            assert!((mass - 1.0).abs() < 1e-12, "{p}/{q}");
        }
    }

    #[test]
    fn peaks_follow_gauss_weights() {
        for (p, q) in [(1, 3), (1, 5), (2, 5), (1, 4), (1, 2), (3, 8)] {
            let c = compare_peaks(p, q, 1e-4).unwrap();
            assert!(c.positions_match, "{p}/{q}: {:?}", c.peaks);
            assert!(c.max_ratio_error < 0.02, "{p}/{q}: {}", c.max_ratio_error);
        }
        // absolute heights: √(π/σ)·|G|/q
        let sigma = 1e-4;
        let v = psi_smoothed(1.0 / 3.0, 1, 3, sigma).unwrap().norm();
        assert!((v / (PI / sigma).sqrt() - 1.0 / 3f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn pseudoconformal_identity() {
        let exact = pseudoconformal_residual(1, 3, 1e-4, &[0.0], Matching::ComplexTime).unwrap();
        assert!(exact < 1e-6, "{exact}");
        let pts = [0.0, 0.1, 1.0 / 3.0, 0.5, 0.77];
        for (p, q) in [(1, 3), (2, 5), (1, 4), (3, 7)] {
            let r = pseudoconformal_residual(p, q, 1e-4, &pts, Matching::ComplexTime).unwrap();
            assert!(r < 1e-6, "{p}/{q}: {r}");
        }
        let coarse = pseudoconformal_residual(1, 3, 1e-3, &[0.0], Matching::LeadingOrder).unwrap();
        let fine = pseudoconformal_residual(1, 3, 1e-4, &[0.0], Matching::LeadingOrder).unwrap();
        assert!(fine < coarse, "{fine} vs {coarse}");
        assert!(pseudoconformal_residual(0, 1, 1e-4, &[0.0], Matching::ComplexTime).is_err());
    }

    #[test]
    fn corner_examples() {
        let cfg = EvalConfig::default().with_tol(1e-7);
        let mut peaks = Vec::new();
        for m in [3u32, 4, 5, 8, 16] {
            let period = 2.0 * PI / (m * m) as f64;
            let tr = corner_trajectory(m, 0.0, period, 2001, &cfg).unwrap();
            assert!(tr.zs[0].norm() < 1e-6);
            let end = tr.zs[2000];
            assert!((end - Complex64::new(0.0, period)).norm() < 1e-6, "M={m}");
            peaks.push(((m as f64).ln(), tr.zs.iter().map(|z| z.norm()).fold(0.0, f64::max).ln()));
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = peaks.into_iter().unzip();
        let fit = crate::numerics::fit_line(&xs, &ys);
        assert!((fit.slope + 2.0).abs() < 0.05, "{fit:?}");
        assert!(corner_trajectory(2, 0.0, 1.0, 10, &cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn comb_is_periodic(s in 0.0f64..1.0, pq in prop::sample::select(vec![(1i64, 3i64), (1, 5), (2, 5), (1, 4), (5, 12)])) {
            let r = periodicity_residuals(pq.0, pq.1, 1e-4, &[s]).unwrap();
            prop_assert!(r.spatial < 1e-12 && r.temporal < 1e-12, "{:?}", r);
        }
    }
}
