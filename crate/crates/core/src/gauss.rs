//! Generalized quadratic Gauss sums G(a,b,c) = Σ_{m=0}^{c−1} e^{2πi(am²+bm)/c},
//! their reciprocity and modularity identities, and the reduction of
//! G(p,0,q) to a denominator 1 or 2 with every multiplicative factor tracked.

use crate::error::{precondition, Error, Result};
use crate::exact::gcd_i64;
use crate::numerics::{cis_turns, CSum};
use num_complex::Complex64;
use serde::Serialize;

/// Largest modulus summed term by term.
pub const BRUTE_GUARD: i64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GaussSumSpec {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

/// Direct summation in ascending m; compensated above 10^4 terms.
pub fn gauss_brute(spec: GaussSumSpec) -> Result<Complex64> {
    let GaussSumSpec { a, b, c } = spec;
    if c < 1 {
        return precondition(format!("Gauss sum modulus must be ≥ 1, got {c}"));
    }
    if c > BRUTE_GUARD {
        return Err(Error::Guard(format!("Gauss sum modulus {c} exceeds {BRUTE_GUARD}")));
    }
    Ok(gauss_sum(a, b, c))
}

/// Unchecked core of [`gauss_brute`] for moduli already known to be in range.
pub fn gauss_sum(a: i64, b: i64, c: i64) -> Complex64 {
    let cu = c as i128;
    let a = (a as i128).rem_euclid(cu);
    let b = (b as i128).rem_euclid(cu);
    let mut acc = CSum::new(c > 10_000);
    for m in 0..cu {
        let r = (a * (m * m % cu) + b * m) % cu;
        acc.add(cis_turns(r as f64 / c as f64));
    }
    acc.value()
}

/// G(1,0,q) = √q (1+i)(1+(−i)^q)/2.
pub fn gauss_closed_q(q: i64) -> Result<Complex64> {
    if q < 1 {
        return precondition("q must be ≥ 1");
    }
    let minus_i_pow = match q % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    };
    Ok((q as f64).sqrt() * Complex64::new(1.0, 1.0) * (minus_i_pow + 1.0) * 0.5)
}

/// √(q/p)·((1+i)/4)·G(−q,0,4p), the reciprocal side of G(p,0,q).
pub fn reciprocity_rhs(p: i64, q: i64) -> Result<Complex64> {
    if p < 1 || q < 1 {
        return precondition("reciprocity needs p ≥ 1 and q ≥ 1");
    }
    let g = gauss_brute(GaussSumSpec { a: -q, b: 0, c: 4 * p })?;
    Ok((q as f64 / p as f64).sqrt() * Complex64::new(0.25, 0.25) * g)
}

/// G(a,0,c) and G(a mod c,0,c) agree to 1e−12.
pub fn modularity_check(a: i64, c: i64) -> Result<bool> {
    let lhs = gauss_brute(GaussSumSpec { a, b: 0, c })?;
    let rhs = gauss_brute(GaussSumSpec { a: a.rem_euclid(c.max(1)), b: 0, c })?;
    Ok((lhs - rhs).norm() < 1e-12)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Rule {
    R,
    M,
}

/// One rewrite G(from) = factor · G(to).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step {
    pub rule: Rule,
    pub from: (i64, i64),
    pub to: (i64, i64),
    pub factor: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReductionTrace {
    pub steps: Vec<Step>,
    pub terminal: (i64, i64),
    pub accumulated_factor: Complex64,
    /// Denominator at the start of each full branch iteration.
    pub iteration_denominators: Vec<i64>,
}

impl ReductionTrace {
    /// G at the terminal state, which has denominator 1 or 2.
    pub fn terminal_value(&self) -> Complex64 {
        match self.terminal.1 {
            1 => Complex64::new(1.0, 0.0),
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// G(p,0,q) rebuilt from the factors alone.
    pub fn replay(&self) -> Complex64 {
        self.accumulated_factor * self.terminal_value()
    }
}

struct Reducer {
    state: (i64, i64),
    steps: Vec<Step>,
}

impl Reducer {
    fn push(&mut self, rule: Rule, to: (i64, i64), factor: Complex64) {
        self.steps.push(Step {
            rule,
            from: self.state,
            to,
            factor,
        });
        self.state = to;
    }

    /// M: shift the numerator by a multiple of the denominator, factor 1.
    fn shift_to(&mut self, a: i64) {
        let (a0, c) = self.state;
        debug_assert_eq!((a - a0).rem_euclid(c), 0);
        if a != a0 {
            self.push(Rule::M, (a, c), Complex64::new(1.0, 0.0));
        }
    }

    fn normalize(&mut self) {
        let (a, c) = self.state;
        self.shift_to(a.rem_euclid(c));
    }

    /// R: G(a,0,c) = √(c/a)(1+i)/4 · G(−c,0,4a) for a > 0, and the conjugate
    /// rule G(a,0,c) = √(c/|a|)(1−i)/4 · G(c,0,4|a|) for a < 0. The result is
    /// then divided by g = gcd, using G(ga,0,gc) = g·G(a,0,c).
    fn reciprocity(&mut self) {
        let (a, c) = self.state;
        assert!(a != 0, "reciprocity needs a nonzero numerator");
        let root = (c as f64 / a.abs() as f64).sqrt();
        let (mut na, mut nc, unit) = if a > 0 {
            (-c, 4 * a, Complex64::new(0.25, 0.25))
        } else {
            (c, -4 * a, Complex64::new(0.25, -0.25))
        };
        let g = gcd_i64(na, nc);
        na /= g;
        nc /= g;
        self.push(Rule::R, (na, nc), unit * root * g as f64);
    }

    /// Representative of the numerator in (−c, 0].
    fn shift_negative(&mut self) {
        let (a, c) = self.state;
        let r = a.rem_euclid(c);
        self.shift_to(if r == 0 { 0 } else { r - c });
    }
}

/// Reduction of G(p,0,q) following the four-branch scheme: each full
/// iteration applies R and M as prescribed by the position of p in
/// (0, q/4), (q/4, q/2), (q/2, 3q/4), (3q/4, q), and strictly decreases q.
/// The decrease can be as small as 2 (p = (q+1)/2), so the iteration count
/// is linear in q in the worst case.
pub fn reduce_algorithm(p: i64, q: i64) -> Result<ReductionTrace> {
    if !(1 <= p && p < q) {
        return precondition(format!("reduction needs 1 ≤ p < q, got ({p},{q})"));
    }
    if gcd_i64(p, q) != 1 {
        return precondition(format!("({p},{q}) is not coprime"));
    }
    let mut r = Reducer {
        state: (p, q),
        steps: Vec::new(),
    };
    let mut iteration_denominators = Vec::new();
    let mut seen = std::collections::HashSet::new();
    loop {
        r.normalize();
        let (p, q) = r.state;
        if !seen.insert(r.state) {
            break;
        }
        if q == 1 {
            break;
        }
        iteration_denominators.push(q);
        if q == 2 {
            // (1,2) →R (−1,2) →M (1,2): a fixed cycle, stopped by the repeat check
            r.reciprocity();
            continue;
        }
        if q == 4 {
            r.reciprocity();
        } else if 2 * p < q {
            r.reciprocity();
            r.normalize();
            if r.state.1 >= q {
                r.reciprocity();
            }
        } else {
            r.shift_negative();
            r.reciprocity();
            if r.state.1 >= q {
                r.shift_negative();
                r.reciprocity();
            }
        }
        if r.state.1 >= q {
            return Err(Error::Numerical(format!(
                "denominator did not decrease from {q} (state {:?})",
                r.state
            )));
        }
    }
    let accumulated_factor = r
        .steps
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.factor);
    Ok(ReductionTrace {
        steps: r.steps,
        terminal: r.state,
        accumulated_factor,
        iteration_denominators,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(a: i64, b: i64, c: i64) -> Complex64 {
        gauss_brute(GaussSumSpec { a, b, c }).unwrap()
    }

    fn close(x: Complex64, y: Complex64, tol: f64) -> bool {
        (x - y).norm() < tol
    }

    #[test]
    fn brute_examples() {
        assert!(close(g(0, 0, 1), Complex64::new(1.0, 0.0), 1e-15));
        assert!(close(g(1, 0, 2), Complex64::new(0.0, 0.0), 1e-15));
        assert!(close(g(1, 0, 3), Complex64::new(0.0, 3f64.sqrt()), 1e-14));
        assert!(close(g(1, 0, 4), Complex64::new(2.0, 2.0), 1e-14));
        assert!(gauss_brute(GaussSumSpec { a: 1, b: 0, c: 0 }).is_err());
        assert!(matches!(
            gauss_brute(GaussSumSpec { a: 1, b: 0, c: BRUTE_GUARD + 1 }),
            Err(Error::Guard(_))
        ));
    }

    #[test]
    fn closed_form_examples() {
        assert!(close(gauss_closed_q(3).unwrap(), Complex64::new(0.0, 3f64.sqrt()), 1e-14));
        assert!(close(gauss_closed_q(2).unwrap(), Complex64::new(0.0, 0.0), 1e-15));
        assert!(close(gauss_closed_q(4).unwrap(), Complex64::new(2.0, 2.0), 1e-14));
        for q in 1..300 {
            assert!(close(gauss_closed_q(q).unwrap(), g(1, 0, q), 1e-10), "q={q}");
        }
    }

    #[test]
    fn reciprocity_examples() {
        assert!(close(reciprocity_rhs(1, 3).unwrap(), Complex64::new(0.0, 3f64.sqrt()), 1e-13));
        assert!(close(reciprocity_rhs(1, 1).unwrap(), Complex64::new(1.0, 0.0), 1e-14));
        assert!(close(reciprocity_rhs(2, 5).unwrap(), g(2, 0, 5), 1e-12));
    }

    #[test]
    fn modularity_examples() {
        assert!(modularity_check(7, 3).unwrap());
        assert!(modularity_check(-1, 3).unwrap());
        assert!(modularity_check(5, 5).unwrap());
        assert!(close(g(5, 0, 5), Complex64::new(5.0, 0.0), 1e-13));
    }

    #[test]
    fn reduction_examples() {
        let t = reduce_algorithm(1, 2).unwrap();
        assert_eq!(t.terminal, (1, 2));
        assert_eq!(t.steps.len(), 2);
        assert_eq!(t.steps[0].rule, Rule::R);
        assert_eq!(t.steps[1].rule, Rule::M);

        let t = reduce_algorithm(1, 3).unwrap();
        assert!(matches!(t.terminal.1, 1 | 2));
        assert!(close(t.replay(), Complex64::new(0.0, 3f64.sqrt()), 1e-12));

        let t = reduce_algorithm(3, 4).unwrap();
        assert_eq!(t.steps[0].rule, Rule::R);
        assert_eq!(t.steps[0].to, (-1, 3));
        assert_eq!(t.steps[1].to, (2, 3));
        assert!(close(t.replay(), g(3, 0, 4), 1e-12));

        assert!(reduce_algorithm(2, 4).is_err());
        assert!(reduce_algorithm(0, 4).is_err());
    }

    #[test]
    fn classical_magnitudes_and_vanishing() {
        for q in 1..=500i64 {
            for p in 0..q {
                if gcd_i64(p, q) != 1 {
                    continue;
                }
                let v = g(p, 0, q);
                if q % 2 == 1 {
                    assert!((v.norm() - (q as f64).sqrt()).abs() < 1e-9, "({p},{q})");
                }
                assert_eq!(v.norm() < 1e-9, q % 4 == 2, "({p},{q})");
            }
        }
    }

    #[test]
    fn reciprocity_and_replay_all_small() {
        for q in 2..=200i64 {
            for p in 1..q {
                if gcd_i64(p, q) != 1 {
                    continue;
                }
                let lhs = g(p, 0, q);
                let rhs = reciprocity_rhs(p, q).unwrap();
                assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(1.0), "({p},{q})");
                let t = reduce_algorithm(p, q).unwrap();
                assert!((t.replay() - lhs).norm() <= 1e-9 * lhs.norm().max(1.0), "({p},{q})");
                for w in t.iteration_denominators.windows(2) {
                    assert!(w[1] < w[0] || w[1] == 2, "({p},{q}) {:?}", t.iteration_denominators);
                }
                // p = (q+1)/2 lowers q by only 2 per iteration, so the bound is linear
                assert!(t.iteration_denominators.len() <= 1 + (q as usize).div_ceil(2), "({p},{q})");
            }
        }
    }

    proptest! {
        #[test]
        fn every_step_identity_holds(q in 2i64..400, p in 1i64..400) {
            let p = 1 + p % (q - 1);
            prop_assume!(gcd_i64(p, q) == 1);
            let t = reduce_algorithm(p, q).unwrap();
            for s in &t.steps {
                let lhs = g(s.from.0, 0, s.from.1);
                let rhs = s.factor * g(s.to.0, 0, s.to.1);
                prop_assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0), "{:?}", s);
            }
        }

        #[test]
        fn modularity_any_shift(a in -10_000i64..10_000, c in 1i64..300) {
            prop_assert!(modularity_check(a, c).unwrap());
        }
    }
}
