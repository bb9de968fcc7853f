//! Jacobi θ on the upper half-plane, integer Möbius maps in the θ-modular
//! group, the explicit maps sending p̃/q̃ to 0 or 1, and their eighth roots.

use crate::error::{precondition, Error, Result};
use crate::exact::{cf_rational, classify_mod4, gcd_i64, tilde_pair, Class4, Rational, TildePair};
use crate::numerics::{cis_turns, eighth_root, frac_mul, snap_eighth_root};
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde::Serialize;
use std::f64::consts::PI;

/// Terms are kept while e^{−πk² Im z} ≥ THETA_CUT.
const THETA_CUT: f64 = 1e-17;
/// Exact phase recomputation interval of the θ recurrence.
const THETA_RESET: u64 = 256;

/// Real part of a θ argument: a double, or an exact ratio num/den.
#[derive(Clone, Copy, Debug)]
pub enum RealPart {
    Float(f64),
    Ratio(i128, i128),
}

impl RealPart {
    /// Fractional part of k²·Re/2, the θ phase in turns.
    fn half_turns(self, k2: u64) -> f64 {
        match self {
            RealPart::Float(x) => frac_mul(x * 0.5, k2),
            RealPart::Ratio(n, d) => {
                let m = 2 * d;
                let r = ((k2 as i128 % m) * n.rem_euclid(m)).rem_euclid(m);
                r as f64 / m as f64
            }
        }
    }

    fn to_f64(self) -> f64 {
        match self {
            RealPart::Float(x) => x,
            RealPart::Ratio(n, d) => n as f64 / d as f64,
        }
    }
}

fn theta_term(re: RealPart, y: f64, k: u64) -> Complex64 {
    let k2 = k * k;
    cis_turns(re.half_turns(k2)) * (-PI * k2 as f64 * y).exp()
}

/// θ(x + iy) = Σ_k e^{πik²z} = 1 + 2Σ_{k≥1} e^{πik²z}.
///
/// Consecutive terms come from t_{k+1} = t_k·u_k, u_{k+1} = u_k·e^{2πiz},
/// reset from the exact phase every 256 terms.
pub fn theta_parts(re: RealPart, y: f64) -> Result<Complex64> {
    if !(y > 0.0) {
        return precondition(format!("theta needs Im z > 0, got {y}"));
    }
    let kmax = ((-THETA_CUT.ln()) / (PI * y)).sqrt().ceil() as u64 + 1;
    let w2 = Complex64::from_polar((-2.0 * PI * y).exp(), 2.0 * PI * re.to_f64());
    let mut sum = Complex64::new(0.0, 0.0);
    let mut t = Complex64::new(0.0, 0.0);
    let mut u = Complex64::new(0.0, 0.0);
    for k in 1..=kmax {
        if (k - 1) % THETA_RESET == 0 {
            t = theta_term(re, y, k);
            // u_k = e^{πi(2k+1)z}
            let f = re.half_turns(2 * k + 1);
            u = cis_turns(f) * (-PI * (2 * k + 1) as f64 * y).exp();
        } else {
            t *= u;
            u *= w2;
        }
        sum += t;
    }
    Ok(sum * 2.0 + 1.0)
}

pub fn theta(z: Complex64) -> Result<Complex64> {
    theta_parts(RealPart::Float(z.re), z.im)
}

/// Unimodular integer map z ↦ (az+b)/(cz+d).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MoebiusMap {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl MoebiusMap {
    pub const IDENTITY: MoebiusMap = MoebiusMap { a: 1, b: 0, c: 0, d: 1 };

    pub fn det(&self) -> i128 {
        self.a as i128 * self.d as i128 - self.b as i128 * self.c as i128
    }

    /// a ≡ d, b ≡ c, a ≢ b (mod 2).
    pub fn theta_parity(&self) -> bool {
        let e = |x: i64| x.rem_euclid(2);
        e(self.a) == e(self.d) && e(self.b) == e(self.c) && e(self.a) != e(self.b)
    }

    pub fn is_theta_modular(&self) -> bool {
        self.det() == 1 && self.theta_parity()
    }

    pub fn inverse(&self) -> MoebiusMap {
        MoebiusMap {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// self ∘ other.
    pub fn compose(&self, o: &MoebiusMap) -> MoebiusMap {
        MoebiusMap {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    /// Image of x0 + i·y0 with integer x0, y0 > 0, as (exact real part, imaginary part).
    pub fn apply_integer_point(&self, x0: i64, y0: i64) -> (RealPart, f64) {
        let (a, b, c, d) = (self.a as i128, self.b as i128, self.c as i128, self.d as i128);
        let (x, y) = (x0 as i128, y0 as i128);
        let den = (c * x + d) * (c * x + d) + c * c * y * y;
        let num = (a * x + b) * (c * x + d) + a * c * y * y;
        let g = gcd_i128(num, den);
        (RealPart::Ratio(num / g, den / g), y0 as f64 * self.det() as f64 / den as f64)
    }
}

fn gcd_i128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

pub fn apply_map(m: &MoebiusMap, z: Complex64) -> Result<Complex64> {
    let den = z * m.c as f64 + m.d as f64;
    if den.norm() == 0.0 {
        return precondition("Möbius pole: cz + d = 0");
    }
    Ok((z * m.a as f64 + m.b as f64) / den)
}

/// √(cz+d) with the principal branch.
pub fn principal_sqrt(m: &MoebiusMap, z: Complex64) -> Result<Complex64> {
    let w = z * m.c as f64 + m.d as f64;
    if w.re <= 0.0 && w.im == 0.0 {
        return precondition("cz + d on the branch cut");
    }
    Ok(w.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Target {
    Zero,
    One,
}

/// Eighth root e with θ(γz) = e·√(cz+d)·θ(z), snapped from a probe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RootOfUnity {
    pub value: Complex64,
    /// e = e^{iπk/4}.
    pub index: u8,
    pub snap_distance: f64,
}

/// Snaps θ(γ(z₀))/(√(cz₀+d)θ(z₀)) at z₀ = x0 + i·y0.
pub fn snap_root(m: &MoebiusMap, x0: i64, y0: i64) -> Result<RootOfUnity> {
    let (re, im) = m.apply_integer_point(x0, y0);
    let lhs = theta_parts(re, im)?;
    let z0 = Complex64::new(x0 as f64, y0 as f64);
    let rhs = principal_sqrt(m, z0)? * theta(z0)?;
    let (_, index, snap_distance) = snap_eighth_root(lhs / rhs);
    Ok(RootOfUnity {
        value: eighth_root(index),
        index,
        snap_distance,
    })
}

/// Largest accepted distance between the probe ratio and the snapped root.
pub const SNAP_LIMIT: f64 = 1e-6;

fn checked_root(m: &MoebiusMap) -> Result<RootOfUnity> {
    let r = snap_root(m, 0, 2)?;
    if r.snap_distance >= SNAP_LIMIT {
        return Err(Error::Numerical(format!(
            "map {m:?}: probe ratio is {:.3e} from the nearest eighth root",
            r.snap_distance
        )));
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThetaTransform {
    pub pq: Rational,
    pub tilde: TildePair,
    pub class: Class4,
    pub map: MoebiusMap,
    pub e_gamma: RootOfUnity,
    pub target: Target,
    pub c_plus: i64,
    pub c_minus: i64,
    /// Member of the same family with c = c_plus, used for h ≥ 0.
    pub map_plus: MoebiusMap,
    /// Member with c = c_minus, used for h < 0.
    pub map_minus: MoebiusMap,
}

/// The integer part of [`build_transform`]: maps without eighth roots.
pub fn build_maps(pq: &Rational) -> Result<(TildePair, Class4, Target, MoebiusMap, MoebiusMap, MoebiusMap)> {
    let (p, q) = pq.parts_i64();
    if !(0 < p && p < q) || gcd_i64(p, q) != 1 {
        return precondition(format!("transform needs coprime 0 < p < q, got {pq}"));
    }
    let tilde = tilde_pair(pq)?;
    let (pt, qt) = (tilde.p_tilde, tilde.q_tilde);
    let cf = cf_rational(&Rational::from_i64(pt, qt)?);
    let n = cf.convergents.len() - 1;
    let (pp, qp) = cf.previous(n);
    let (pp, qp) = (pp.to_i64().unwrap(), qp.to_i64().unwrap());
    // s = (−1)^{N−1}; then (−1)^N = −s
    let s: i64 = if n % 2 == 1 { 1 } else { -1 };
    let class = classify_mod4(pq);
    let (target, family): (Target, Box<dyn Fn(i64) -> MoebiusMap>) = match class {
        Class4::Q013 => {
            let both_odd = pp % 2 != 0 && qp % 2 != 0;
            let (c0, d0) = if both_odd {
                (s * qp + qt, -s * pp - pt)
            } else {
                (s * qp, -s * pp)
            };
            (
                Target::Zero,
                Box::new(move |k| MoebiusMap {
                    a: qt,
                    b: -pt,
                    c: c0 + 2 * k * qt,
                    d: d0 - 2 * k * pt,
                }),
            )
        }
        Class4::Q2 => (
            Target::One,
            Box::new(move |k| MoebiusMap {
                a: s * qp + (2 * k + 1) * qt,
                b: -s * pp - (2 * k + 1) * pt,
                c: s * qp + 2 * k * qt,
                d: -s * pp - 2 * k * pt,
            }),
        ),
    };
    let k_minus = match class {
        Class4::Q013 if pp % 2 != 0 && qp % 2 != 0 => -2,
        _ => -1,
    };
    Ok((tilde, class, target, family(0), family(1), family(k_minus)))
}

/// Builds γ ∈ Γ_θ with γ(p̃/q̃) = 0 (q ≡ 0,1,3 mod 4) or 1 (q ≡ 2 mod 4),
/// its shifted companions with c_±, and e_γ snapped at z₀ = 2i.
pub fn build_transform(pq: &Rational) -> Result<ThetaTransform> {
    let (tilde, class, target, map, map_plus, map_minus) = build_maps(pq)?;
    let e_gamma = checked_root(&map)?;
    Ok(ThetaTransform {
        pq: pq.clone(),
        tilde,
        class,
        map,
        e_gamma,
        target,
        c_plus: map_plus.c,
        c_minus: map_minus.c,
        map_plus,
        map_minus,
    })
}

impl ThetaTransform {
    /// Eighth roots of the c_+ and c_− maps.
    pub fn side_roots(&self) -> Result<(RootOfUnity, RootOfUnity)> {
        Ok((checked_root(&self.map_plus)?, checked_root(&self.map_minus)?))
    }

    /// Exact integer checks: determinant, parity, target, c_± ranges.
    pub fn integer_checks(&self) -> std::result::Result<(), String> {
        let qt = self.tilde.q_tilde;
        let pt = self.tilde.p_tilde;
        for (name, m) in [("base", self.map), ("plus", self.map_plus), ("minus", self.map_minus)] {
            if m.det() != 1 {
                return Err(format!("{name} map determinant {}", m.det()));
            }
            if !m.theta_parity() {
                return Err(format!("{name} map fails the parity certificate"));
            }
            let num = m.a as i128 * pt as i128 + m.b as i128 * qt as i128;
            let den = m.c as i128 * pt as i128 + m.d as i128 * qt as i128;
            let ok = match self.target {
                Target::Zero => num == 0 && den != 0,
                Target::One => num == den && den != 0,
            };
            if !ok {
                return Err(format!("{name} map misses its target"));
            }
        }
        let span = match self.class {
            Class4::Q013 => 4,
            Class4::Q2 => 3,
        };
        if !(qt < self.c_plus && self.c_plus < span * qt) {
            return Err(format!("c_plus {} outside ({qt}, {})", self.c_plus, span * qt));
        }
        if !(-span * qt < self.c_minus && self.c_minus < -qt) {
            return Err(format!("c_minus {} outside ({}, {})", self.c_minus, -span * qt, -qt));
        }
        Ok(())
    }
}
