//! Closed-form constants, the circumball solver and a few analytic bounds.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use libm::lgamma as ln_gamma;

use crate::error::{Error, Result};
use crate::linalg;

/// Relative singular-value threshold below which a point tuple is treated as
/// linearly dependent.
pub const RANK_TOL: f64 = 1e-10;

/// `ln κ_d`, the log-volume of the unit ball in `R^d`.
pub fn ln_unit_ball_volume(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let half = d as f64 / 2.0;
    Ok(half * std::f64::consts::PI.ln() - ln_gamma(half + 1.0))
}

/// Volume `κ_d` of the unit ball in `R^d`. Underflows to zero near `d ≈ 350`;
/// use [`ln_unit_ball_volume`] beyond that.
pub fn unit_ball_volume(d: usize) -> Result<f64> {
    ln_unit_ball_volume(d).map(f64::exp)
}

/// `k!`-volume and side length of the regular `k`-simplex inscribed in the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexConstants {
    pub k: usize,
    pub v_k: f64,
    pub ell_k: f64,
}

pub fn simplex_constants(k: usize) -> Result<SimplexConstants> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let kf = k as f64;
    // ((k+1)^{k+1} / k^k)^{1/2} evaluated in log space
    let ln_v = 0.5 * ((kf + 1.0) * (kf + 1.0).ln() - kf * kf.ln());
    Ok(SimplexConstants {
        k,
        v_k: ln_v.exp(),
        ell_k: (2.0 * (kf + 1.0) / kf).sqrt(),
    })
}

/// Chernoff rate `H(z) = z ln z - z + 1`.
pub fn chernoff_h(z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("H(z) needs z > 0, got {z}")));
    }
    Ok(z * z.ln() - z + 1.0)
}

/// Upper bound `exp(-mu H(x/mu))` on `P(Po(mu) >= x)` for `x >= mu`.
pub fn poisson_upper_tail_bound(mu: f64, x: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("mean must be positive, got {mu}")));
    }
    if x < mu {
        return Err(Error::Domain(format!("tail bound needs x >= mu ({x} < {mu})")));
    }
    Ok((-mu * chernoff_h(x / mu)?).exp())
}

/// Bracket `(lower, upper)` on the probability that a uniform direction makes
/// an angle below `alpha` with a fixed vector. Valid for `d >= 3` and
/// `0 < alpha < arccos(sqrt(2/d))`; `upper / lower == 3`.
pub fn cap_probability_bounds(d: usize, alpha: f64) -> Result<(f64, f64)> {
    if d < 3 {
        return Err(Error::Domain("cap bounds need d >= 3".into()));
    }
    let limit = (2.0 / d as f64).sqrt().acos();
    if !(alpha > 0.0 && alpha < limit) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, {limit:.6}) for d = {d}, got {alpha}"
        )));
    }
    let base = alpha.sin().powi(d as i32 - 1) / (alpha.cos() * (d as f64).sqrt());
    Ok((base / 6.0, base / 2.0))
}

/// Exact probability that a uniform direction on `S^{d-1}` lies within angle
/// `alpha` of a fixed axis: `∫_0^α sin^{d-2} / ∫_0^π sin^{d-2}`, with the
/// numerator by adaptive Simpson quadrature (absolute tolerance 1e-12).
pub fn cap_probability(d: usize, alpha: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain("cap probability needs d >= 2".into()));
    }
    if !(0.0..=std::f64::consts::PI).contains(&alpha) {
        return Err(Error::Domain(format!("alpha must lie in [0, π], got {alpha}")));
    }
    let p = d as i32 - 2;
    let f = |t: f64| t.sin().powi(p);
    let num = adaptive_simpson(&f, 0.0, alpha, 1e-12);
    // ∫_0^π sin^{n} = √π Γ((n+1)/2) / Γ(n/2 + 1)
    let n = p as f64;
    let den = (0.5 * std::f64::consts::PI.ln() + ln_gamma((n + 1.0) / 2.0) - ln_gamma(n / 2.0 + 1.0)).exp();
    Ok((num / den).clamp(0.0, 1.0))
}

pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// The smallest ball having the origin and every defining point on its boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circumball {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Solves `A x = b` with `b_i = ‖x_i‖²/2` by the minimum-norm solution
/// `x = Aᵗ(AAᵗ)⁻¹b`. The Gram matrix is factored by Cholesky.
pub fn circumball(points: &[Vec<f64>]) -> Result<Circumball> {
    let k = points.len();
    if k == 0 {
        return Err(Error::Domain("circumball needs at least one point".into()));
    }
    let d = points[0].len();
    if k > d {
        return Err(Error::Singular(format!("{k} points in R^{d} are linearly dependent")));
    }
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::Domain("points have mismatched dimensions".into()));
    }
    let gram = DMatrix::from_fn(k, k, |i, j| linalg::dot(&points[i], &points[j]));
    let eig = gram.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(0.0_f64, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    // singular values of A are square roots of the Gram eigenvalues
    if !(max > 0.0) || min <= (RANK_TOL * RANK_TOL) * max {
        return Err(Error::Singular("points are linearly dependent".into()));
    }
    // A = QR with the points as columns; the centre is Q y with R^T y = b,
    // which avoids squaring the condition number through the Gram matrix
    let a = DMatrix::from_fn(d, k, |i, j| points[j][i]);
    let qr = a.qr();
    let (q, r) = (qr.q(), qr.r());
    let solve = |rhs: &DVector<f64>| -> Result<Vec<f64>> {
        let y = r
            .tr_solve_upper_triangular(rhs)
            .ok_or_else(|| Error::Singular("triangular factor is singular".into()))?;
        Ok((&q * y).iter().copied().collect())
    };
    let b = DVector::from_fn(k, |i, _| 0.5 * linalg::norm_sq(&points[i]));
    let mut center = solve(&b)?;
    // one step of iterative refinement
    let res = DVector::from_fn(k, |i, _| b[i] - linalg::dot(&points[i], &center));
    for (c, dc) in center.iter_mut().zip(solve(&res)?) {
        *c += dc;
    }
    let radius = linalg::norm(&center);
    Ok(Circumball { center, radius })
}

/// `k`-volume of the parallelepiped spanned by `vectors`, `sqrt(det Gram)`.
/// Equals `|det|` for `k = d` and zero for dependent families.
pub fn parallelepiped_volume(vectors: &[Vec<f64>]) -> f64 {
    let k = vectors.len();
    if k == 0 {
        return 1.0;
    }
    if k > vectors[0].len() {
        return 0.0;
    }
    let gram = DMatrix::from_fn(k, k, |i, j| linalg::dot(&vectors[i], &vectors[j]));
    gram.determinant().max(0.0).sqrt()
}

/// True iff all pairwise distances among `{0, z_1, ..., z_k}` lie strictly
/// inside `(ℓ_k - eps, ℓ_k + eps)`.
pub fn near_regular_test(points: &[Vec<f64>], eps: f64) -> bool {
    let k = points.len();
    let Ok(c) = simplex_constants(k) else {
        return false;
    };
    let ok = |x: f64| x > c.ell_k - eps && x < c.ell_k + eps;
    for (i, p) in points.iter().enumerate() {
        if !ok(linalg::norm(p)) {
            return false;
        }
        for q in &points[i + 1..] {
            if !ok(linalg::dist(p, q)) {
                return false;
            }
        }
    }
    true
}
