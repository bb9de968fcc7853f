//! Box counting for the image of φ and the graph of R, cover sums
//! Σ totient(q)/q^{3d/2}, Dirichlet approximations, and local Hölder
//! exponents of φ at constructed irrationals.

use crate::dual::phi_dual_x;
use crate::error::{Error, Result};
use crate::exact::{build_irrational, cf_real, totient_table, ExtReal};
use crate::numerics::{fit_line, logspace, Dd};
use crate::phi::{phi, EvalConfig};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive};
use rustfft::FftPlanner;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DimMethod {
    BoxImage,
    BoxGraph,
    ContentSum,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimReport {
    pub scales: Vec<f64>,
    pub counts: Vec<u64>,
    /// Slope of log N against log(1/ε).
    pub slope: f64,
    /// Half-width of a 95% interval from the fit residuals.
    pub slope_ci: f64,
    pub method: DimMethod,
}

/// Fewest samples a box count accepts.
pub const MIN_POINTS: usize = 100_000;

fn check_scales(scales: &[f64], resolution: f64, diameter: f64, n: usize) -> Result<Vec<f64>> {
    if n < MIN_POINTS {
        return Err(Error::Precondition(format!("box counting needs ≥ {MIN_POINTS} points, got {n}")));
    }
    if scales.len() < 2 {
        return Err(Error::Precondition("need at least two scales".into()));
    }
    let mut s = scales.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s.dedup();
    let smallest = *s.last().unwrap();
    if !(smallest > 0.0) || smallest < 4.0 * resolution {
        return Err(Error::Precondition(format!(
            "smallest scale {smallest:e} is below 4× the sample resolution {resolution:e}"
        )));
    }
    if s[0] > diameter / 4.0 {
        return Err(Error::Precondition(format!(
            "largest scale {:e} exceeds a quarter of the diameter {diameter:e}",
            s[0]
        )));
    }
    Ok(s)
}

fn report(scales: Vec<f64>, counts: Vec<u64>, method: DimMethod) -> DimReport {
    let xs: Vec<f64> = scales.iter().map(|e| -e.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let fit = fit_line(&xs, &ys);
    DimReport {
        scales,
        counts,
        slope: fit.slope,
        slope_ci: 2.0 * fit.slope_stderr,
        method,
    }
}

fn cell(v: f64, eps: f64) -> i64 {
    (v / eps).floor() as i64
}

/// Distinct cells of the grid εZ² (anchored at the origin) that contain a
/// sample of the curve, for each ε.
///
/// The smallest scale must be at least 4× the largest step between
/// consecutive samples, so the samples cannot skip a cell along the curve.
pub fn box_dimension_image(points: &[Complex64], scales: &[f64]) -> Result<DimReport> {
    let step = points.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max);
    let (lo, hi) = bounding_box(points);
    let diameter = (hi - lo).norm();
    let scales = check_scales(scales, step, diameter, points.len())?;
    let counts = scales
        .iter()
        .map(|&eps| {
            let mut cells: Vec<(i64, i64)> = points.iter().map(|z| (cell(z.re, eps), cell(z.im, eps))).collect();
            cells.sort_unstable();
            cells.dedup();
            cells.len() as u64
        })
        .collect();
    Ok(report(scales, counts, DimMethod::BoxImage))
}

/// Inserts midpoints (by direct evaluation) wherever consecutive samples are
/// more than `max_step` apart, so the result has every step ≤ `max_step`.
pub fn refine_curve(ts: &[f64], zs: &[Complex64], max_step: f64, cfg: &EvalConfig) -> Result<(Vec<f64>, Vec<Complex64>)> {
    if ts.len() != zs.len() || ts.is_empty() {
        return Err(Error::Precondition("ts and zs must be nonempty and equal in length".into()));
    }
    if !(max_step > 0.0) {
        return Err(Error::Precondition(format!("max_step must be positive, got {max_step}")));
    }
    let mut out_t = vec![ts[0]];
    let mut out_z = vec![zs[0]];
    for j in 1..ts.len() {
        // stack of pending right endpoints, nearest on top
        let mut stack = vec![(ts[j], zs[j])];
        while let Some(&(t1, z1)) = stack.last() {
            let (t0, z0) = (*out_t.last().unwrap(), *out_z.last().unwrap());
            if (z1 - z0).norm() <= max_step || t1 - t0 <= f64::EPSILON * t1.abs().max(1.0) {
                out_t.push(t1);
                out_z.push(z1);
                stack.pop();
            } else {
                let tm = 0.5 * (t0 + t1);
                stack.push((tm, phi(tm, cfg)?));
            }
        }
    }
    Ok((out_t, out_z))
}

fn bounding_box(points: &[Complex64]) -> (Complex64, Complex64) {
    let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
    let mut hi = -lo;
    for z in points {
        lo.re = lo.re.min(z.re);
        lo.im = lo.im.min(z.im);
        hi.re = hi.re.max(z.re);
        hi.im = hi.im.max(z.im);
    }
    (lo, hi)
}

/// Cells of εZ² met by the polygonal graph through (x_j, y_j), x increasing.
///
/// Within one column the polygon is connected, so it meets exactly the
/// cells between its lowest and highest point there; segments crossing a
/// column boundary contribute their interpolated crossing value to both sides.
pub fn box_dimension_graph(xs: &[f64], ys: &[f64], scales: &[f64]) -> Result<DimReport> {
    if xs.len() != ys.len() {
        return Err(Error::Precondition("xs and ys differ in length".into()));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("graph abscissae must increase strictly".into()));
    }
    let n = xs.len();
    let spacing = xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let diameter = if n > 0 { xs[n - 1] - xs[0] } else { 0.0 };
    let scales = check_scales(scales, spacing, diameter, n)?;
    let counts = scales.iter().map(|&eps| graph_cells(xs, ys, eps)).collect();
    Ok(report(scales, counts, DimMethod::BoxGraph))
}

fn graph_cells(xs: &[f64], ys: &[f64], eps: f64) -> u64 {
    let mut total = 0u64;
    let mut col = cell(xs[0], eps);
    let (mut lo, mut hi) = (ys[0], ys[0]);
    let flush = |lo: f64, hi: f64| (cell(hi, eps) - cell(lo, eps) + 1) as u64;
    for j in 1..xs.len() {
        let c = cell(xs[j], eps);
        if c != col {
            // boundaries crossed between samples j−1 and j
            let (x0, y0, x1, y1) = (xs[j - 1], ys[j - 1], xs[j], ys[j]);
            let mut k = col;
            while k < c {
                let xb = (k + 1) as f64 * eps;
                let yb = y0 + (y1 - y0) * ((xb - x0) / (x1 - x0)).clamp(0.0, 1.0);
                lo = lo.min(yb);
                hi = hi.max(yb);
                total += flush(lo, hi);
                lo = yb;
                hi = yb;
                k += 1;
            }
            col = c;
        }
        lo = lo.min(ys[j]);
        hi = hi.max(ys[j]);
    }
    total + flush(lo, hi)
}

/// R(x_j) = Σ_{n≤K} sin(n²x_j)/n² at x_j = 2πj/N, j = 0..N, by one FFT:
/// n²x_j ≡ 2π(n² mod N)j/N.
pub fn riemann_r_grid(n_log2: u32, cfg: &EvalConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(4..=26).contains(&n_log2) {
        return Err(Error::Precondition(format!("grid size 2^{n_log2} outside 2^4..2^26")));
    }
    let n = 1usize << n_log2;
    let k = (1.0 / (0.99 * cfg.abs_tol)).ceil();
    if k > cfg.max_terms as f64 {
        return Err(Error::Budget {
            needed: k as u64,
            max_terms: cfg.max_terms,
            achievable_tol: 1.0 / (0.99 * cfg.max_terms as f64),
        });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for m in 1..=k as u64 {
        let idx = ((m as u128 * m as u128) % n as u128) as usize;
        buf[idx] += 1.0 / (m as f64 * m as f64);
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let mut xs: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
    let mut ys: Vec<f64> = buf.iter().map(|z| z.im).collect();
    // closing point x = 2π repeats x = 0
    xs.push(2.0 * PI);
    ys.push(ys[0]);
    Ok((xs, ys))
}

/// Dyadic scales 2^{−a}, …, 2^{−b}.
pub fn dyadic_scales(a: i32, b: i32) -> Vec<f64> {
    (a..=b).map(|k| 2f64.powi(-k)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverSpec {
    pub q0: u64,
    pub qmax: u64,
    pub d: f64,
    pub partial_sum: f64,
}

/// Largest Q a cover sum will sieve to.
pub const CONTENT_QMAX: u64 = 10_000_000;

fn check_cover(q0: u64, qmax: u64, d: f64) -> Result<()> {
    if !(d > 0.0) {
        return Err(Error::Precondition(format!("d must be positive, got {d}")));
    }
    if q0 < 1 || q0 > qmax {
        return Err(Error::Precondition(format!("need 1 ≤ Q0 ≤ Qmax, got {q0}, {qmax}")));
    }
    if qmax > CONTENT_QMAX {
        return Err(Error::Guard(format!("Qmax {qmax} exceeds {CONTENT_QMAX}")));
    }
    Ok(())
}

/// Σ_{q=Q0}^{Qmax} totient(q)/q^{3d/2}.
pub fn content_sum(q0: u64, qmax: u64, d: f64) -> Result<CoverSpec> {
    check_cover(q0, qmax, d)?;
    let phi = totient_table(qmax as usize);
    let partial_sum = content_from_table(&phi, q0, qmax, d);
    Ok(CoverSpec { q0, qmax, d, partial_sum })
}

fn content_from_table(phi: &[u64], q0: u64, qmax: u64, d: f64) -> f64 {
    let e = 1.5 * d;
    // smallest terms first
    let mut acc = crate::numerics::Neumaier::default();
    for q in (q0..=qmax).rev() {
        acc.add(phi[q as usize] as f64 / (q as f64).powf(e));
    }
    acc.value()
}

/// Partial sums S(Q) = Σ_{q≤Q} totient(q)/q^{3d/2} at each Q in `at` (ascending).
pub fn content_partial_sums(d: f64, at: &[u64]) -> Result<Vec<f64>> {
    let qmax = *at.last().ok_or_else(|| Error::Precondition("no sample points".into()))?;
    check_cover(1, qmax, d)?;
    if at.windows(2).any(|w| w[1] <= w[0]) || at[0] < 1 {
        return Err(Error::Precondition("sample points must increase from 1".into()));
    }
    let phi = totient_table(qmax as usize);
    let e = 1.5 * d;
    let mut acc = crate::numerics::Neumaier::default();
    let mut out = Vec::with_capacity(at.len());
    let mut next = 0;
    for q in 1..=qmax {
        acc.add(phi[q as usize] as f64 / (q as f64).powf(e));
        if q == at[next] {
            out.push(acc.value());
            next += 1;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirichletApprox {
    #[serde(serialize_with = "as_decimal")]
    pub p: BigInt,
    #[serde(serialize_with = "as_decimal")]
    pub q: BigInt,
    /// 1/(qN).
    pub radius: f64,
    /// |x − p/q| as a double.
    pub error: f64,
}

fn as_decimal<S: serde::Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// Coprime p/q with 1 ≤ q ≤ N and |x − p/q| < 1/(qN).
///
/// The last continued-fraction convergent with q_n ≤ N works: the next
/// denominator exceeds N and |x − p_n/q_n| < 1/(q_n q_{n+1}). The inequality
/// is re-checked in integer arithmetic on the decimal value of x.
pub fn dirichlet_cover(n: u64, x: &ExtReal) -> Result<DirichletApprox> {
    if n < 1 {
        return Err(Error::Precondition("N must be ≥ 1".into()));
    }
    let cf = cf_real(x, 400)?;
    let nb = BigInt::from(n);
    let (p, q) = cf
        .convergents
        .iter()
        .take_while(|(_, q)| q <= &nb)
        .last()
        .cloned()
        .ok_or_else(|| Error::Numerical("no convergent with q ≤ N".into()))?;
    let scale = x.scale();
    // |x − p/q| < 1/(qN)  ⇔  |M·q − p·10^D|·N < 10^D
    let gap = (&x.mantissa * &q - &p * &scale).abs();
    if !(&gap * &nb < scale) {
        return Err(Error::Numerical(format!("convergent {p}/{q} misses the bound for N = {n}")));
    }
    let qf = q.to_f64().unwrap_or(f64::INFINITY);
    let error = gap.to_f64().unwrap_or(f64::INFINITY) / scale.to_f64().unwrap_or(f64::INFINITY) / qf;
    Ok(DirichletApprox {
        p,
        q,
        radius: 1.0 / (qf * n as f64),
        error,
    })
}

/// Samples per radius for the sup in [`local_exponent`].
pub const SUP_SAMPLES: usize = 64;

/// Point of the local-exponent experiment, as x = 2πt in double-double.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimePoint(pub Dd);

impl TimePoint {
    /// The point t with 2πt = x.
    pub fn from_x(x: &ExtReal) -> TimePoint {
        TimePoint(x.to_dd())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalExponent {
    pub radii: Vec<f64>,
    pub sups: Vec<f64>,
    pub exponent: f64,
    pub exponent_ci: f64,
}

/// Slope of log sup_{|h|≤r}|φ(t0+h) − φ(t0)| against log r.
///
/// The sup is a max over 64 log-spaced |h| in [r/10, r] on both sides, a
/// lower surrogate for the true sup. Each radius is evaluated with absolute
/// tolerance at most 1e−4 of the sup found there.
pub fn local_exponent(t0: TimePoint, radii: &[f64], cfg: &EvalConfig) -> Result<LocalExponent> {
    if radii.len() < 10 {
        return Err(Error::Precondition(format!("need ≥ 10 radii, got {}", radii.len())));
    }
    if radii.iter().any(|&r| !(1e-7 * (1.0 - 1e-9)..=1e-2 * (1.0 + 1e-9)).contains(&r)) {
        return Err(Error::Precondition("radii must lie in [1e-7, 1e-2]".into()));
    }
    let x0 = t0.0;
    let mut sups = Vec::with_capacity(radii.len());
    for &r in radii {
        let hs = logspace(r / 10.0, r, SUP_SAMPLES);
        let mut tol = cfg.abs_tol;
        let sup = loop {
            let base = phi_dual_x(x0, tol / 2.0, cfg.max_terms)?;
            let mut m = 0.0f64;
            for &a in &hs {
                for h in [a, -a] {
                    let x = x0.add(Dd::TWO_PI.mul_f64(h));
                    m = m.max((phi_dual_x(x, tol / 2.0, cfg.max_terms)? - base).norm());
                }
            }
            if m >= 1e4 * tol || tol < 1e-300 {
                break m;
            }
            tol = 1e-5 * m.max(1e-290);
        };
        if sup == 0.0 {
            return Err(Error::Numerical(format!("constant window at radius {r:e}")));
        }
        sups.push(sup);
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = sups.iter().map(|s| s.ln()).collect();
    let fit = fit_line(&xs, &ys);
    Ok(LocalExponent {
        radii: radii.to_vec(),
        sups,
        exponent: fit.slope,
        exponent_ci: 2.0 * fit.slope_stderr,
    })
}

/// Radii of the multifractal experiment: 12 log-spaced values in [1e−7, 1e−2].
pub fn default_radii() -> Vec<f64> {
    logspace(1e-7, 1e-2, 12)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub beta: f64,
    pub measured: f64,
    pub predicted: f64,
    pub deviation: f64,
}

/// α = 1/2 + 1/(2β) against the measured local exponent at the point
/// built by `build_irrational(β, depth)`.
pub fn spectrum_experiment(betas: &[f64], depth: usize, cfg: &EvalConfig) -> Result<Vec<SpectrumRow>> {
    let radii = default_radii();
    betas
        .iter()
        .map(|&beta| {
            if !(2.0..=8.0).contains(&beta) {
                return Err(Error::Precondition(format!("beta {beta} outside [2, 8]")));
            }
            let (x, _) = build_irrational(beta, depth)?;
            let m = local_exponent(TimePoint::from_x(&x), &radii, cfg)?;
            let predicted = 0.5 + 0.5 / beta;
            Ok(SpectrumRow {
                beta,
                measured: m.exponent,
                predicted,
                deviation: (m.exponent - predicted).abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::max_irrational_depth;
    use crate::phi::trace;
    use proptest::prelude::*;

    #[test]
    fn segment_has_dimension_one() {
        let n = 200_001;
        let pts: Vec<Complex64> = (0..n)
            .map(|j| {
                let s = j as f64 / (n - 1) as f64;
                Complex64::new(0.3 * s + 0.01, 0.4 * s + 0.02)
            })
            .collect();
        let rep = box_dimension_image(&pts, &dyadic_scales(5, 12)).unwrap();
        assert!((rep.slope - 1.0).abs() < 0.03, "{rep:?}");
        assert!(rep.counts.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn graph_of_a_line_and_of_r() {
        let xs: Vec<f64> = (0..=200_000).map(|j| j as f64 * 1e-5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x).collect();
        let rep = box_dimension_graph(&xs, &ys, &dyadic_scales(3, 10)).unwrap();
        assert!((rep.slope - 1.0).abs() < 0.03, "{rep:?}");
        let (xs, ys) = riemann_r_grid(21, &EvalConfig::default().with_tol(1e-6)).unwrap();
        let rep = box_dimension_graph(&xs, &ys, &dyadic_scales(4, 11)).unwrap();
        assert!((rep.slope - 1.25).abs() < 0.10, "{rep:?}");
        assert!(rep.counts.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn r_grid_matches_direct_series() {
        let cfg = EvalConfig::default().with_tol(1e-6);
        let (xs, ys) = riemann_r_grid(12, &cfg).unwrap();
        for j in [0usize, 1, 77, 1000, 2048, 4095] {
            let direct = crate::phi::riemann_r(xs[j], &cfg).unwrap();
            assert!((ys[j] - direct).abs() < 2e-6, "j={j}");
        }
    }

    #[test]
    fn image_scales_and_density_are_checked() {
        let few = vec![Complex64::new(0.0, 0.0); 10];
        assert!(box_dimension_image(&few, &[0.1, 0.05]).is_err());
        let tr = trace(0.0, 1.0 / (2.0 * PI), 1 << 17, &EvalConfig::default().with_tol(1e-6)).unwrap();
        // 2^17 samples step up to ~5e-4, so 2^-11 ≈ 4.9e-4 is too fine
        assert!(box_dimension_image(&tr.zs, &dyadic_scales(6, 11)).is_err());
        let eps = 2f64.powi(-11);
        let (ts, zs) = refine_curve(&tr.ts, &tr.zs, eps / 4.0, &EvalConfig::default().with_tol(1e-6)).unwrap();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert!(zs.windows(2).all(|w| (w[1] - w[0]).norm() <= eps / 4.0));
        let rep = box_dimension_image(&zs, &dyadic_scales(6, 11)).unwrap();
        assert!((1.0..=1.4).contains(&rep.slope), "{rep:?}");
    }

    #[test]
    fn content_examples() {
        assert_eq!(content_sum(1, 1, 1.0).unwrap().partial_sum, 1.0);
        let at: Vec<u64> = logspace(100.0, 1e5, 16).iter().map(|q| q.round() as u64).collect();
        let sums = content_partial_sums(4.0 / 3.0, &at).unwrap();
        let xs: Vec<f64> = at.iter().map(|&q| (q as f64).ln()).collect();
        let fit = fit_line(&xs, &sums);
        assert!((fit.slope - 6.0 / (PI * PI)).abs() < 0.02, "{fit:?}");
        let near = content_sum(1000, 10_000, 1.5).unwrap().partial_sum;
        let far = content_sum(10_000, 100_000, 1.5).unwrap().partial_sum;
        assert!(far < near);
        assert!(matches!(content_sum(1, CONTENT_QMAX + 1, 1.0), Err(Error::Guard(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn content_is_monotone(d in 0.5f64..3.0, dd in 0.01f64..1.0, q0 in 1u64..500) {
            let a = content_sum(q0, 2000, d).unwrap().partial_sum;
            let b = content_sum(q0, 2000, d + dd).unwrap().partial_sum;
            prop_assert!(b <= a);
            let c = content_sum(q0 + 1, 2000, d).unwrap().partial_sum;
            prop_assert!(c <= a);
        }

        #[test]
        fn dirichlet_bound_holds(num in 1u64..1_000_000, n in 1u64..5000) {
            let x = ExtReal::from_f64(num as f64 / 1_000_003.0);
            let r = dirichlet_cover(n, &x).unwrap();
            prop_assert!(r.q >= BigInt::from(1) && r.q <= BigInt::from(n));
            prop_assert!(r.error < r.radius);
        }
    }

    #[test]
    fn dirichlet_examples() {
        let g = dirichlet_cover(13, &ExtReal::golden()).unwrap();
        assert!(g.q <= BigInt::from(13) && g.error < g.radius);
        let half = dirichlet_cover(10, &ExtReal::from_f64(0.5)).unwrap();
        assert_eq!((half.p, half.q), (BigInt::from(1), BigInt::from(2)));
        let pi3 = dirichlet_cover(7, &ExtReal::from_f64(PI - 3.0)).unwrap();
        assert_eq!((pi3.p, pi3.q), (BigInt::from(1), BigInt::from(7)));
        assert!((pi3.error - 0.001264).abs() < 1e-6 && pi3.error < 1.0 / 49.0);
    }

    #[test]
    fn local_exponent_at_rationals() {
        let cfg = EvalConfig::default().with_tol(1e-10);
        let radii = logspace(1e-7, 1e-3, 10);
        let m = local_exponent(TimePoint(Dd::ratio(1, 3)), &radii, &cfg).unwrap();
        assert!((m.exponent - 0.5).abs() < 0.05, "{m:?}");
        let m = local_exponent(TimePoint(Dd::ratio(1, 6)), &radii, &cfg).unwrap();
        assert!((1.4..=1.6).contains(&m.exponent), "{m:?}");
        assert!(local_exponent(TimePoint(Dd::ratio(1, 3)), &radii[..5], &cfg).is_err());
    }

    #[test]
    fn golden_point_exponent() {
        let cfg = EvalConfig::default().with_tol(1e-10);
        let m = local_exponent(TimePoint::from_x(&ExtReal::golden()), &default_radii(), &cfg).unwrap();
        assert!((m.exponent - 0.75).abs() < 0.07, "{m:?}");
        assert!(max_irrational_depth(4.0) > 5);
    }
}
