//! Generating function `h(x, x₁)` of the time-1 map.
//!
//! By the twist property, `x₁ = θ₁(r, x)` has a unique radial solution
//! `r = R(x, x₁)` on the working strip; the generating function is the action
//! evaluated there, `h(x, x₁) = S(R(x, x₁), x)`, with partials
//!
//! ```text
//!   ∂₁h = -f(R),   ∂₂h = f(R₁),   ∂²₁₂h = -f'(R) / (∂θ₁/∂r₀) < 0,
//! ```
//!
//! where `R₁ = r₁(R, x)`.  Orbits of the map are exactly the critical
//! configurations of `Σ h(xₙ, xₙ₊₁)`.
//!
//! `h` is defined on the in-between strip `B = {2π α⁻(x) < x₁ - x < cap}`;
//! no smooth extension outside `B` is attempted.  Evaluation is on demand
//! with a thread-safe memo cache keyed by rounded `(x, x₁ - x)`; orbit
//! solvers walk 1-D families of arguments, so dense tabulation would be
//! wasted work.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::Serialize;

use crate::error::Error;
use crate::flow::{Flow, PoincareResult};
use crate::poincare::{FrequencyWindow, WorkingStrip};
use crate::weight;
use crate::Result;

/// One evaluation of the generating function with its partials.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GeneratingSample {
    pub x: f64,
    pub x1: f64,
    /// Radial preimage `R(x, x₁)`.
    pub r: f64,
    /// Image radius `R₁(x, x₁)`.
    pub r1: f64,
    pub h: f64,
    pub d1h: f64,
    pub d2h: f64,
    pub d12h: f64,
}

/// Solver options for the implicit inversion.
#[derive(Debug, Clone, Copy)]
pub struct GenOpts {
    /// Target on `|θ₁(R, x) - x₁|`.
    pub root_tol: f64,
    pub max_iter: usize,
    /// Extra padding added to the drift-based bracket half-width.
    pub pad_extra: f64,
    /// Rounding quantum of the memo key.
    pub cache_quantum: f64,
    /// Cache is cleared once it holds this many samples.
    pub cache_cap: usize,
    /// Upper cap on `R`, bounding the domain `B` from above.
    pub r_cap: f64,
    /// Strict margin over `2π α⁻(x)` for domain membership.
    pub domain_margin: f64,
}

impl Default for GenOpts {
    fn default() -> Self {
        Self {
            root_tol: 1e-11,
            max_iter: 100,
            pad_extra: 1e-3,
            cache_quantum: 1e-12,
            cache_cap: 1 << 20,
            r_cap: 1e5,
            domain_margin: 1e-9,
        }
    }
}

/// Generating-function evaluator bound to one flow and working strip.
pub struct Generating<'a> {
    flow: &'a Flow<'a>,
    strip: WorkingStrip,
    window: FrequencyWindow,
    opts: GenOpts,
    cache: Mutex<HashMap<(i64, i64), GeneratingSample>>,
}

impl<'a> Generating<'a> {
    pub fn new(flow: &'a Flow<'a>, strip: WorkingStrip, window: FrequencyWindow) -> Self {
        Self {
            flow,
            strip,
            window,
            opts: GenOpts::default(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_opts(mut self, opts: GenOpts) -> Self {
        self.opts = opts;
        self
    }

    pub fn flow(&self) -> &Flow<'a> {
        self.flow
    }

    pub fn strip(&self) -> &WorkingStrip {
        &self.strip
    }

    pub fn window(&self) -> &FrequencyWindow {
        &self.window
    }

    pub fn opts(&self) -> &GenOpts {
        &self.opts
    }

    /// Membership in the strip `B`: the advance `x₁ - x` must exceed the
    /// lower boundary frequency strictly and stay below the image of the
    /// radial cap.
    pub fn contains(&self, x: f64, x1: f64) -> bool {
        let gap = x1 - x;
        gap > std::f64::consts::TAU * self.window.alpha_minus_at(x) + self.opts.domain_margin
            && gap < 2.0 * self.opts.r_cap
    }

    /// Solve `θ₁(R, x) = x₁` with an automatic bracket.
    ///
    /// The unperturbed inverse `r = (x₁ - x)/2` is widened by the drift
    /// bound `C1 + K`, which confines the true root.
    pub fn solve_r(&self, x: f64, x1: f64) -> Result<f64> {
        self.solve_full(x, x1, None).map(|(r, _)| r)
    }

    /// Solve with an explicit bracket; both ends must straddle the target.
    pub fn solve_r_bracketed(&self, x: f64, x1: f64, bracket: (f64, f64)) -> Result<f64> {
        self.solve_full(x, x1, Some(bracket)).map(|(r, _)| r)
    }

    fn default_bracket(&self, x: f64, x1: f64) -> (f64, f64) {
        let guess = (x1 - x) / 2.0;
        let pad = self.strip.c1 + self.strip.k_hat + self.opts.pad_extra * guess.abs().max(1.0);
        let floor = self.flow.entry_floor() * (1.0 + 1e-9);
        ((guess - pad).max(floor), (guess + pad).min(self.opts.r_cap))
    }

    fn solve_full(
        &self,
        x: f64,
        x1: f64,
        bracket: Option<(f64, f64)>,
    ) -> Result<(f64, PoincareResult)> {
        let explicit = bracket.is_some();
        let (mut lo, mut hi) = bracket.unwrap_or_else(|| self.default_bracket(x, x1));
        if !(lo < hi) {
            return Err(Error::Bracket { lo, hi, target: x1 });
        }

        // Validate the straddle; widen a default bracket a few times before
        // giving up (twist monotonicity makes the check conclusive).
        let mut g_lo = self.flow.poincare(lo, x)?.theta1 - x1;
        let mut g_hi = self.flow.poincare(hi, x)?.theta1 - x1;
        if !explicit {
            let floor = self.flow.entry_floor() * (1.0 + 1e-9);
            for _ in 0..4 {
                if g_lo < 0.0 && g_hi > 0.0 {
                    break;
                }
                let width = hi - lo;
                if g_lo >= 0.0 {
                    lo = (lo - width).max(floor);
                    g_lo = self.flow.poincare(lo, x)?.theta1 - x1;
                }
                if g_hi <= 0.0 {
                    hi = (hi + width).min(self.opts.r_cap);
                    g_hi = self.flow.poincare(hi, x)?.theta1 - x1;
                }
            }
        }
        if !(g_lo < 0.0 && g_hi > 0.0) {
            if g_lo.abs() < self.opts.root_tol {
                return Ok((lo, self.flow.poincare(lo, x)?));
            }
            if g_hi.abs() < self.opts.root_tol {
                return Ok((hi, self.flow.poincare(hi, x)?));
            }
            return Err(Error::Bracket { lo, hi, target: x1 });
        }

        // Safeguarded Newton: the twist derivative from the monodromy gives
        // the slope, bisection keeps the iterate inside the bracket.
        let mut r = 0.5 * (lo + hi);
        for it in 0..self.opts.max_iter {
            let p = self.flow.poincare(r, x)?;
            let g = p.theta1 - x1;
            if g.abs() < self.opts.root_tol {
                return Ok((r, p));
            }
            if g > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let slope = p.dg_dr0();
            let newton = r - g / slope;
            r = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if it + 1 == self.opts.max_iter {
                return Err(Error::NoConvergence {
                    op: "radial inversion",
                    iterations: self.opts.max_iter,
                    residual: g.abs(),
                });
            }
        }
        unreachable!("loop returns or errors")
    }

    /// Evaluate `h` and its partials at `(x, x₁)`.
    pub fn eval(&self, x: f64, x1: f64) -> Result<GeneratingSample> {
        let key = self.key(x, x1);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(*hit);
        }
        let (r, p) = self.solve_full(x, x1, None)?;
        let sample = GeneratingSample {
            x,
            x1,
            r,
            r1: p.r1,
            h: p.action,
            d1h: -weight::f(r),
            d2h: weight::f(p.r1),
            d12h: -weight::f_prime(r) / p.dg_dr0(),
        };
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= self.opts.cache_cap {
            cache.clear();
        }
        cache.insert(key, sample);
        Ok(sample)
    }

    /// `∂²₁₁h` by central differences of `∂₁h`.
    pub fn d11h(&self, x: f64, x1: f64, step: f64) -> Result<f64> {
        Ok((self.eval(x + step, x1)?.d1h - self.eval(x - step, x1)?.d1h) / (2.0 * step))
    }

    /// `∂²₂₂h` by central differences of `∂₂h`.
    pub fn d22h(&self, x: f64, x1: f64, step: f64) -> Result<f64> {
        Ok((self.eval(x, x1 + step)?.d2h - self.eval(x, x1 - step)?.d2h) / (2.0 * step))
    }

    fn key(&self, x: f64, x1: f64) -> (i64, i64) {
        let q = self.opts.cache_quantum;
        ((x / q).round() as i64, ((x1 - x) / q).round() as i64)
    }
}
