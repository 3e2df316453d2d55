//! Tridiagonal and cyclic-tridiagonal linear solves for the orbit Newton
//! step (nearest-neighbor coupling only, so the solve is O(n)).

use crate::error::Error;
use crate::Result;

/// Thomas algorithm for `A x = rhs` with `A` tridiagonal.
///
/// `sub` and `sup` have length `n-1`; `sub[i]` couples row `i+1` to column
/// `i`, `sup[i]` couples row `i` to column `i+1`.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if sub.len() + 1 != n || sup.len() + 1 != n || rhs.len() != n {
        return Err(Error::Invalid(
            "tridiagonal solve: inconsistent lengths".into(),
        ));
    }
    let mut gam = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut bet = diag[0];
    if bet == 0.0 {
        return Err(Error::Invalid("tridiagonal solve: zero pivot".into()));
    }
    x[0] = rhs[0] / bet;
    for j in 1..n {
        gam[j] = sup[j - 1] / bet;
        bet = diag[j] - sub[j - 1] * gam[j];
        if bet == 0.0 {
            return Err(Error::Invalid("tridiagonal solve: zero pivot".into()));
        }
        x[j] = (rhs[j] - sub[j - 1] * x[j - 1]) / bet;
    }
    for j in (0..n - 1).rev() {
        x[j] -= gam[j + 1] * x[j + 1];
    }
    Ok(x)
}

/// Cyclic tridiagonal solve via the Sherman-Morrison rank-one update:
/// `corner_top = A[0][n-1]`, `corner_bottom = A[n-1][0]`.  Needs `n ≥ 3`.
pub fn solve_cyclic_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    corner_top: f64,
    corner_bottom: f64,
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    if n < 3 {
        return Err(Error::Invalid("cyclic solve needs n >= 3".into()));
    }
    if sub.len() + 1 != n || sup.len() + 1 != n || rhs.len() != n {
        return Err(Error::Invalid("cyclic solve: inconsistent lengths".into()));
    }
    // Rank-one update A = A' + u vᵀ with u = (γ, 0, …, 0, corner_bottom)
    // and v = (1, 0, …, 0, corner_top/γ).
    let gamma = if diag[0] != 0.0 { -diag[0] } else { -1.0 };
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - corner_top * corner_bottom / gamma;

    let x = solve_tridiagonal(sub, &bb, sup, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = corner_bottom;
    let z = solve_tridiagonal(sub, &bb, sup, &u)?;

    let denom = 1.0 + z[0] + corner_top / gamma * z[n - 1];
    if denom == 0.0 {
        return Err(Error::Invalid("cyclic solve: singular correction".into()));
    }
    let factor = (x[0] + corner_top / gamma * x[n - 1]) / denom;
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - factor * zi).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn mul_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], ct: f64, cb: f64, x: &[f64]) -> Vec<f64> {
        let n = diag.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = diag[i] * x[i];
            if i > 0 {
                y[i] += sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                y[i] += sup[i] * x[i + 1];
            }
        }
        y[0] += ct * x[n - 1];
        y[n - 1] += cb * x[0];
        y
    }

    #[test]
    fn known_four_by_four() {
        let diag = [2.0, 2.0, 2.0, 2.0];
        let sub = [-1.0, -1.0, -1.0];
        let sup = [-1.0, -1.0, -1.0];
        let rhs = [1.0, 0.5, -0.25, 2.0];
        let x = solve_cyclic_tridiagonal(&sub, &diag, &sup, 0.5, 1.0, &rhs).unwrap();
        let back = mul_cyclic(&sub, &diag, &sup, 0.5, 1.0, &x);
        for (b, r) in back.iter().zip(&rhs) {
            assert!((b - r).abs() < 1e-12);
        }
    }

    #[test]
    fn random_systems_multiply_back() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in [3usize, 5, 17, 101] {
            let diag: Vec<f64> = (0..n).map(|_| 3.0 + rng.gen_range(0.0..1.0)).collect();
            let sub: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sup: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (ct, cb) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let x = solve_cyclic_tridiagonal(&sub, &diag, &sup, ct, cb, &rhs).unwrap();
            let back = mul_cyclic(&sub, &diag, &sup, ct, cb, &x);
            for (b, r) in back.iter().zip(&rhs) {
                assert!((b - r).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn plain_tridiagonal() {
        let x = solve_tridiagonal(
            &[1.0, 1.0],
            &[4.0, 4.0, 4.0],
            &[1.0, 1.0],
            &[6.0, 12.0, 18.0],
        )
        .unwrap();
        let y0 = 4.0 * x[0] + x[1];
        let y1 = x[0] + 4.0 * x[1] + x[2];
        let y2 = x[1] + 4.0 * x[2];
        assert!((y0 - 6.0).abs() < 1e-12 && (y1 - 12.0).abs() < 1e-12 && (y2 - 18.0).abs() < 1e-12);
    }

    #[test]
    fn small_systems_rejected() {
        assert!(
            solve_cyclic_tridiagonal(&[1.0], &[2.0, 2.0], &[1.0], 0.0, 0.0, &[1.0, 1.0]).is_err()
        );
    }
}
