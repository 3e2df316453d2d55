//! Radial weight of the area form `f'(r) dr ∧ dθ` preserved by the map.
//!
//! The map is exact symplectic with respect to `d f(r) ∧ dθ` with
//! `f(r) = -1/(4r)`; `f` is increasing on `(0, ∞)` with Lipschitz inverse on
//! any strip bounded away from zero.

pub fn f(r: f64) -> f64 {
    -1.0 / (4.0 * r)
}

pub fn f_prime(r: f64) -> f64 {
    1.0 / (4.0 * r * r)
}

pub fn f_inv(y: f64) -> f64 {
    -1.0 / (4.0 * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_pair() {
        for k in 1..200 {
            let r = 0.05 * k as f64;
            assert!((f_inv(f(r)) - r).abs() <= 1e-14 * r.max(1.0));
            assert!(f_prime(r) > 0.0);
        }
    }
}
