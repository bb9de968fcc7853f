//! Expansions of φ around 0, t_{1,2} and general rationals t_{p,q}, the
//! rescaled variable b(h), and the eighth-root prefactor e_{p,q}.
//!
//! Around t_{p,q} with q ≡ 0,1,3 (mod 4) the increment behaves like
//! e·q̃^{−3/2}·φ(b(h)) ~ h^{1/2}; for q ≡ 2 (mod 4) like
//! e·q̃^{−3/2}·(φ(t_{1,2} + b(h)) − φ(t_{1,2})) ~ h^{3/2}.
//! Negative h uses the branch √−1 = −i throughout.

use crate::dual::DualRow;
use crate::error::{Error, Result};
use crate::exact::{classify_mod4, tilde_pair, Class4, Rational};
use crate::modular::{build_transform, Target};
use crate::numerics::{fit_line, half_power, logspace, snap_eighth_root, LineFit};
use crate::phi::{y_n, z_n, EvalConfig};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Cap on dual-series terms used inside the asymptotic checks.
const DUAL_TERMS: u64 = 200_000_000;

/// h ↦ b(h) = q̃²h/(1 + 4πc_±q̃h), with c_+ for h ≥ 0 and c_− for h < 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BMap {
    pub q_tilde: i64,
    pub c_plus: i64,
    pub c_minus: i64,
}

impl BMap {
    pub fn c_for(&self, h: f64) -> i64 {
        if h >= 0.0 {
            self.c_plus
        } else {
            self.c_minus
        }
    }

    /// Largest |h| on the side of `h` with 4π|c_±|q̃|h| ≤ 1.
    pub fn window(&self, h: f64) -> f64 {
        let c = self.c_for(h);
        if c == 0 {
            f64::INFINITY
        } else {
            1.0 / (4.0 * PI * c.abs() as f64 * self.q_tilde as f64)
        }
    }

    pub fn b_of_h(&self, h: f64) -> Result<f64> {
        if !h.is_finite() {
            return Err(Error::Precondition("h must be finite".into()));
        }
        let w = self.window(h);
        if h.abs() > w {
            return Err(Error::Window(format!("|h| = {:e} exceeds the validity window {:e}", h.abs(), w)));
        }
        let qt = self.q_tilde as f64;
        let den = 1.0 + 4.0 * PI * self.c_for(h) as f64 * qt * h;
        if den == 0.0 {
            return Err(Error::Window(format!("b(h) has a pole at h = {h:e}")));
        }
        Ok(qt * qt * h / den)
    }
}

/// Everything the expansions need about one rational point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointData {
    pub pq: Rational,
    pub class: Class4,
    pub target: Target,
    pub bmap: BMap,
    /// Prefactor for h ≥ 0, from the c_+ map.
    pub e_plus: Complex64,
    /// Prefactor for h < 0, from the c_− map.
    pub e_minus: Complex64,
}

impl PointData {
    pub fn e_for(&self, h: f64) -> Complex64 {
        if h >= 0.0 {
            self.e_plus
        } else {
            self.e_minus
        }
    }
}

/// 0/1 is the unshifted base case: q̃ = 1, c_± = 0, e = 1, so b(h) = h.
pub fn point_data(pq: &Rational) -> Result<PointData> {
    let (p, q) = pq.parts_i64();
    if p == 0 && q == 1 {
        return Ok(PointData {
            pq: pq.clone(),
            class: Class4::Q013,
            target: Target::Zero,
            bmap: BMap {
                q_tilde: 1,
                c_plus: 0,
                c_minus: 0,
            },
            e_plus: Complex64::new(1.0, 0.0),
            e_minus: Complex64::new(1.0, 0.0),
        });
    }
    let tr = build_transform(pq)?;
    let (plus, minus) = tr.side_roots()?;
    Ok(PointData {
        pq: pq.clone(),
        class: tr.class,
        target: tr.target,
        bmap: BMap {
            q_tilde: tr.tilde.q_tilde,
            c_plus: tr.c_plus,
            c_minus: tr.c_minus,
        },
        e_plus: plus.value,
        e_minus: minus.value,
    })
}

fn double_factorial_odd(n: u32) -> f64 {
    (1..=n).map(|j| (2 * j - 1) as f64).product()
}

/// i^{−(n−1)}.
fn inv_i_power(n: u32) -> Complex64 {
    match (n - 1) % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Σ_{n=1}^{N} coef_n·S_n(h)·h^{n+1/2}, with S_n evaluated to the accuracy
/// that makes each term good to abs_tol/N.
fn series_terms(
    h: f64,
    order: u32,
    cfg: &EvalConfig,
    coef: impl Fn(u32) -> Complex64,
    aux: impl Fn(u32, f64, &EvalConfig) -> Result<Complex64>,
) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 1..=order {
        let c = coef(n);
        let scale = c.norm() * h.abs().powf(n as f64 + 0.5) * order as f64;
        let sub = cfg.with_tol((cfg.abs_tol / scale).min(1.0));
        acc += c * aux(n, h, &sub)? * half_power(h, n as i32);
    }
    Ok(acc)
}

fn check_order(h: f64, order: u32) -> Result<()> {
    if order < 1 {
        return Err(Error::Precondition("expansion order must be ≥ 1".into()));
    }
    if h == 0.0 || !h.is_finite() {
        return Err(Error::Precondition(format!("h must be finite and nonzero, got {h}")));
    }
    Ok(())
}

/// (1+i)/√(2π)·h^{1/2} − (1−i)/√(2π)·Σ_{n≤N} 2^{n+1}(2n−1)!!/i^{n−1}·Y_n(h)·h^{n+1/2}.
pub fn expand_at_zero(h: f64, order: u32, cfg: &EvalConfig) -> Result<Complex64> {
    check_order(h, order)?;
    let s = (2.0 * PI).sqrt();
    let lead = Complex64::new(1.0, 1.0) / s * half_power(h, 0);
    let tail = series_terms(
        h,
        order,
        cfg,
        |n| Complex64::new(-1.0, 1.0) / s * 2f64.powi(n as i32 + 1) * double_factorial_odd(n) * inv_i_power(n),
        y_n,
    )?;
    Ok(lead + tail)
}

/// φ(t_{1,2} + h) − φ(t_{1,2}) ≈ −(1−i)/√(2π)·Σ_{n≤N} 2^{3n+1}(2n−1)!!/i^{n−1}·Z_n(h)·h^{n+1/2}.
pub fn expand_at_half(h: f64, order: u32, cfg: &EvalConfig) -> Result<Complex64> {
    check_order(h, order)?;
    let s = (2.0 * PI).sqrt();
    series_terms(
        h,
        order,
        cfg,
        |n| Complex64::new(-1.0, 1.0) / s * 2f64.powi(3 * n as i32 + 1) * double_factorial_odd(n) * inv_i_power(n),
        z_n,
    )
}

/// Leading expansion of φ(t_{p,q} + h) − φ(t_{p,q}).
///
/// q ≡ 0,1,3: (e/√π)((1+i)/√2)(h^{1/2}/q̃^{1/2} + 4i·Y_1(b(h))·q̃^{3/2}h^{3/2});
/// q ≡ 2: e·(−16(1−i)/√(2π))·Z_1(b(h))·q̃^{3/2}h^{3/2}.
pub fn expand_at_rational(pq: &Rational, h: f64, cfg: &EvalConfig) -> Result<Complex64> {
    let pd = point_data(pq)?;
    expand_with(&pd, h, cfg)
}

pub fn expand_with(pd: &PointData, h: f64, cfg: &EvalConfig) -> Result<Complex64> {
    if h == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let b = pd.bmap.b_of_h(h)?;
    let e = pd.e_for(h);
    let qt = pd.bmap.q_tilde as f64;
    let h32 = half_power(h, 1);
    let s = (2.0 * PI).sqrt();
    match pd.class {
        Class4::Q013 => {
            let coef = Complex64::new(1.0, 1.0) / s;
            let scale = 4.0 * coef.norm() * qt.powf(1.5) * h.abs().powf(1.5);
            let y1 = y_n(1, b, &cfg.with_tol((cfg.abs_tol / scale).min(1.0)))?;
            Ok(e * coef * (half_power(h, 0) / qt.sqrt() + Complex64::new(0.0, 4.0) * y1 * qt.powf(1.5) * h32))
        }
        Class4::Q2 => {
            let coef = Complex64::new(-16.0, 16.0) / s;
            let scale = coef.norm() * qt.powf(1.5) * h.abs().powf(1.5);
            let z1 = z_n(1, b, &cfg.with_tol((cfg.abs_tol / scale).min(1.0)))?;
            Ok(e * coef * z1 * qt.powf(1.5) * h32)
        }
    }
}

/// Tolerance for measuring an increment that shrinks like |h|^{3/2} or faster.
pub fn tight_tol(h: f64) -> f64 {
    1e-10f64.min(1e-3 * h.abs().powf(1.5))
}

/// φ(t_{p,q} + h) − φ(t_{p,q}) through the dual series.
pub fn increment(row: &DualRow, h: f64, tol: f64) -> Result<Complex64> {
    row.delta_phi(h, tol, DUAL_TERMS)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SideFit {
    pub h_values: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub fit: LineFit,
}

/// Least-squares slope of log|φ(t_{p,q}+h) − φ(t_{p,q})| against log|h| for
/// `n` log-spaced |h| in [lo, hi] ∩ window on the side given by `sign`.
pub fn increment_slope(pd: &PointData, row: &DualRow, lo: f64, hi: f64, n: usize, sign: f64) -> Result<SideFit> {
    let hi = hi.min(pd.bmap.window(sign));
    if !(lo < hi) {
        return Err(Error::Window(format!("empty h range [{lo:e}, {hi:e}] for {}", pd.pq)));
    }
    let h_values = logspace(lo, hi, n);
    let mut magnitudes = Vec::with_capacity(n);
    for &a in &h_values {
        let h = sign * a;
        magnitudes.push(increment(row, h, tight_tol(h))?.norm());
    }
    let xs: Vec<f64> = h_values.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = magnitudes.iter().map(|m| m.ln()).collect();
    Ok(SideFit {
        fit: fit_line(&xs, &ys),
        h_values,
        magnitudes,
    })
}

/// Expected increment exponent: 1/2 for q ≡ 0,1,3 and 3/2 for q ≡ 2 (mod 4).
pub fn expected_exponent(class: Class4) -> f64 {
    match class {
        Class4::Q013 => 0.5,
        Class4::Q2 => 1.5,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymReport {
    pub point: Rational,
    pub branch: Target,
    pub h_values: Vec<f64>,
    pub predicted: Vec<Complex64>,
    pub actual: Vec<Complex64>,
    /// Slope of log|actual| over the h > 0 samples.
    pub fitted_exponent: f64,
    /// Same over the h < 0 samples.
    pub fitted_exponent_minus: f64,
    pub e_pq: Complex64,
    pub e_pq_minus: Complex64,
}

/// Samples `n` log-spaced |h| in [1e−6, 1e−3] ∩ window on each side.
pub fn asym_report(pq: &Rational, n: usize, cfg: &EvalConfig) -> Result<AsymReport> {
    if n < 2 {
        return Err(Error::Precondition("need at least two samples per side".into()));
    }
    let pd = point_data(pq)?;
    let (p, q) = pq.parts_i64();
    let row = DualRow::new(p, q)?;
    let mut h_values = Vec::new();
    let mut predicted = Vec::new();
    let mut actual = Vec::new();
    let mut slopes = [0.0; 2];
    for (i, sign) in [1.0, -1.0].into_iter().enumerate() {
        let side = increment_slope(&pd, &row, 1e-6, 1e-3, n, sign)?;
        slopes[i] = side.fit.slope;
        for &a in &side.h_values {
            let h = sign * a;
            let tol = tight_tol(h);
            h_values.push(h);
            actual.push(increment(&row, h, tol)?);
            predicted.push(expand_with(&pd, h, &cfg.with_tol(tol))?);
        }
    }
    Ok(AsymReport {
        point: pq.clone(),
        branch: pd.target,
        h_values,
        predicted,
        actual,
        fitted_exponent: slopes[0],
        fitted_exponent_minus: slopes[1],
        e_pq: pd.e_plus,
        e_pq_minus: pd.e_minus,
    })
}

/// One side of the limit-ratio diagnostic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioDiagnostic {
    pub h_values: Vec<f64>,
    pub ratios: Vec<Complex64>,
    /// Linear extrapolation to h = 0 from the two smallest h.
    pub extrapolated: Complex64,
    pub snapped: Complex64,
    pub snap_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EDetermination {
    pub pq: Rational,
    /// Prefactor from the constructed map, h ≥ 0 side.
    pub e_pq: Complex64,
    /// Prefactor from the constructed map, h < 0 side.
    pub e_pq_minus: Complex64,
    pub plus: RatioDiagnostic,
    pub minus: RatioDiagnostic,
    /// Both diagnostics snap to the prefactors from the maps.
    pub consistent: bool,
}

/// Relative accuracy of the increments entering the ratio.
const RATIO_REL_TOL: f64 = 1e-5;

/// Model increment at the base point: φ(b) for q ≡ 0,1,3 and
/// φ(t_{1,2} + b) − φ(t_{1,2}) for q ≡ 2.
fn model_increment(class: Class4, b: f64, scale: f64) -> Result<Complex64> {
    let row = match class {
        Class4::Q013 => DualRow::new(0, 1)?,
        Class4::Q2 => DualRow::new(1, 2)?,
    };
    increment(&row, b, RATIO_REL_TOL * scale)
}

fn ratio_side(pd: &PointData, row: &DualRow, sign: f64) -> Result<RatioDiagnostic> {
    let h_values: Vec<f64> = [1e-5, 1e-6, 1e-7].iter().map(|a| sign * a).collect();
    let qt = pd.bmap.q_tilde as f64;
    let mut ratios = Vec::new();
    for &h in &h_values {
        let b = pd.bmap.b_of_h(h)?;
        // size of the increment, to set an absolute tolerance
        let scale = match pd.class {
            Class4::Q013 => (h.abs() / qt).sqrt() * 0.5,
            Class4::Q2 => (qt * h.abs()).powf(1.5) * 0.5,
        };
        let actual = increment(row, h, RATIO_REL_TOL * scale)?;
        let model = model_increment(pd.class, b, scale * qt.powf(1.5))?;
        if model.norm() == 0.0 {
            return Err(Error::Numerical(format!("model increment vanishes at h = {h:e}")));
        }
        ratios.push(actual * qt.powf(1.5) / model);
    }
    let (r1, r2) = (ratios[1], ratios[2]);
    let (h1, h2) = (h_values[1], h_values[2]);
    let extrapolated = (r2 * h1 - r1 * h2) / (h1 - h2);
    let (snapped, _, snap_distance) = snap_eighth_root(extrapolated);
    if snap_distance > 0.1 {
        return Err(Error::Numerical(format!(
            "limit ratio {extrapolated} at {} is not near an eighth root",
            pd.pq
        )));
    }
    Ok(RatioDiagnostic {
        h_values,
        ratios,
        extrapolated,
        snapped,
        snap_distance,
    })
}

/// e_{p,q} from the constructed maps, validated by the limit
/// Δφ(h)·q̃^{3/2}/model(b(h)) → e at h = 1e−5, 1e−6, 1e−7 on each side.
pub fn determine_e_pq(pq: &Rational) -> Result<EDetermination> {
    let pd = point_data(pq)?;
    let (p, q) = pq.parts_i64();
    let row = DualRow::new(p, q)?;
    let plus = ratio_side(&pd, &row, 1.0)?;
    let minus = ratio_side(&pd, &row, -1.0)?;
    let consistent = (plus.snapped - pd.e_plus).norm() < 1e-9 && (minus.snapped - pd.e_minus).norm() < 1e-9;
    Ok(EDetermination {
        pq: pq.clone(),
        e_pq: pd.e_plus,
        e_pq_minus: pd.e_minus,
        plus,
        minus,
        consistent,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementBound {
    pub pq: Rational,
    pub class: Class4,
    /// max |Δφ|·q^{1/2}/|h|^{1/2} (q ≡ 0,1,3) or |Δφ|/(q^{3/2}|h|^{3/2}) (q ≡ 2).
    pub max_ratio: f64,
    pub argmax_h: f64,
}

/// Sweeps `samples` log-uniform h in [10^{−6}·M/q², M/q²] on both sides.
pub fn increment_bounds(pq: &Rational, m: f64, samples: usize) -> Result<IncrementBound> {
    if !(m > 0.0) || samples < 2 {
        return Err(Error::Precondition("need M > 0 and at least two samples".into()));
    }
    let (p, q) = pq.parts_i64();
    let class = classify_mod4(pq);
    tilde_pair(pq)?;
    let row = DualRow::new(p, q)?;
    let qf = q as f64;
    let top = m / (qf * qf);
    let mut best = (0.0f64, 0.0f64);
    for a in logspace(top * 1e-6, top, samples) {
        for h in [a, -a] {
            let scale = match class {
                Class4::Q013 => (a / qf).sqrt(),
                Class4::Q2 => (qf * a).powf(1.5),
            };
            let d = increment(&row, h, 1e-4 * scale)?.norm();
            let ratio = d / scale;
            if ratio > best.0 {
                best = (ratio, h);
            }
        }
    }
    Ok(IncrementBound {
        pq: pq.clone(),
        class,
        max_ratio: best.0,
        argmax_h: best.1,
    })
}
