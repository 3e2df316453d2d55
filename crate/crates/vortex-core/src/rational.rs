//! Continued-fraction convergents of rotation-number targets.

use serde::Serialize;

use crate::error::Error;
use crate::Result;

/// Rational approximant `s/q` of an irrational target, in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Convergent {
    pub s: i64,
    pub q: i64,
}

impl Convergent {
    pub fn ratio(&self) -> f64 {
        self.s as f64 / self.q as f64
    }
}

/// Leading terms `[a0; a1, a2, ...]` of the continued fraction of `alpha`.
/// Expansion stops early when the remainder is rational to machine
/// resolution.
pub fn continued_fraction_terms(alpha: f64, max_terms: usize) -> Vec<i64> {
    let mut terms = Vec::with_capacity(max_terms);
    let mut x = alpha;
    for _ in 0..max_terms {
        let a = x.floor();
        terms.push(a as i64);
        let frac = x - a;
        if frac.abs() < 1e-12 {
            break;
        }
        x = 1.0 / frac;
    }
    terms
}

/// First `depth` nontrivial convergents of `alpha` (the integer-part
/// convergent `a0/1` is skipped, so the list starts with `(a0·a1+1)/a1`).
///
/// Fails with [`Error::RationalAlpha`] when the expansion terminates before
/// producing `depth` convergents, and with [`Error::Depth`] when a
/// denominator exceeds `q_cap`.
pub fn convergents(alpha: f64, depth: usize, q_cap: i64) -> Result<Vec<Convergent>> {
    if depth == 0 {
        return Err(Error::Invalid("convergent depth must be at least 1".into()));
    }
    let terms = continued_fraction_terms(alpha, depth + 1);
    if terms.len() < depth + 1 {
        return Err(Error::RationalAlpha { alpha });
    }
    // Standard recurrence s_k = a_k s_{k-1} + s_{k-2}, same for q.
    let (mut s_prev, mut s_curr) = (1i64, terms[0]);
    let (mut q_prev, mut q_curr) = (0i64, 1i64);
    let mut out = Vec::with_capacity(depth);
    for &a in &terms[1..=depth] {
        let s_next = a
            .checked_mul(s_curr)
            .and_then(|v| v.checked_add(s_prev))
            .ok_or(Error::Depth {
                q: i64::MAX,
                cap: q_cap,
            })?;
        let q_next = a
            .checked_mul(q_curr)
            .and_then(|v| v.checked_add(q_prev))
            .ok_or(Error::Depth {
                q: i64::MAX,
                cap: q_cap,
            })?;
        if q_next > q_cap {
            return Err(Error::Depth {
                q: q_next,
                cap: q_cap,
            });
        }
        out.push(Convergent {
            s: s_next,
            q: q_next,
        });
        s_prev = s_curr;
        s_curr = s_next;
        q_prev = q_curr;
        q_curr = q_next;
    }
    Ok(out)
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Golden mean `(1+√5)/2`.
pub fn golden_mean() -> f64 {
    (1.0 + 5.0f64.sqrt()) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_mean_convergents() {
        // All-ones continued fraction: Fibonacci ratios.
        let conv = convergents(golden_mean(), 6, 377).unwrap();
        let expected = [(2, 1), (3, 2), (5, 3), (8, 5), (13, 8), (21, 13)];
        assert_eq!(conv.len(), 6);
        for (c, &(s, q)) in conv.iter().zip(&expected) {
            assert_eq!((c.s, c.q), (s, q));
            assert_eq!(gcd(c.s, c.q), 1);
        }
        // Convergents straddle the target with shrinking error.
        let alpha = golden_mean();
        let errs: Vec<f64> = conv.iter().map(|c| (c.ratio() - alpha).abs()).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn pi_first_convergent_is_twenty_two_sevenths() {
        let conv = convergents(std::f64::consts::PI, 2, 10_000).unwrap();
        assert_eq!((conv[0].s, conv[0].q), (22, 7));
        assert_eq!((conv[1].s, conv[1].q), (333, 106));
    }

    #[test]
    fn rational_target_is_rejected() {
        assert!(matches!(
            convergents(1.5, 4, 377),
            Err(Error::RationalAlpha { .. })
        ));
        assert!(matches!(
            convergents(3.0, 2, 377),
            Err(Error::RationalAlpha { .. })
        ));
    }

    #[test]
    fn depth_cap_enforced() {
        // Fibonacci denominators reach 377 at depth 13 and 610 at depth 14.
        assert!(convergents(golden_mean(), 13, 377).is_ok());
        assert!(matches!(
            convergents(golden_mean(), 14, 377),
            Err(Error::Depth { q: 610, .. })
        ));
    }

    #[test]
    fn terms_of_golden_mean_are_all_ones() {
        let terms = continued_fraction_terms(golden_mean(), 10);
        assert!(terms.iter().all(|&a| a == 1));
    }
}
