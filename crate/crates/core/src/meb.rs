//! Minimum enclosing ball by a core-set iteration: solve the ball of a small
//! core set exactly (Welzl with move-to-front), add the farthest point, and
//! repeat until every point is inside up to the relative tolerance.

use nalgebra::{DMatrix, DVector};

use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Smallest ball with every point of `support` on its boundary and center in
/// their affine hull. `None` when the support is affinely dependent.
fn circumsphere(points: &[&[f64]]) -> Option<Ball> {
    let m = points.len();
    let d = points[0].len();
    let p0 = points[0];
    if m == 1 {
        return Some(Ball { center: p0.to_vec(), radius: 0.0 });
    }
    let q: Vec<Vec<f64>> = points[1..].iter().map(|p| linalg::sub(p, p0)).collect();
    let k = m - 1;
    let gram = DMatrix::from_fn(k, k, |i, j| linalg::dot(&q[i], &q[j]));
    let rhs = DVector::from_fn(k, |i, _| 0.5 * gram[(i, i)]);
    let scale = (0..k).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    let lu = gram.lu();
    let det = lu.determinant();
    if !(det.abs() > 1e-24 * scale.powi(k as i32)) {
        return None;
    }
    let a = lu.solve(&rhs)?;
    let mut center = p0.to_vec();
    for (ai, qi) in a.iter().zip(&q) {
        for (c, x) in center.iter_mut().zip(qi) {
            *c += ai * x;
        }
    }
    let radius = linalg::dist(&center, p0);
    debug_assert!(center.len() == d);
    Some(Ball { center, radius })
}

/// Welzl's recursion with move-to-front over a small point list.
fn welzl(points: &mut Vec<Vec<f64>>, n: usize, boundary: &mut Vec<Vec<f64>>, d: usize) -> Ball {
    let mut ball = if boundary.is_empty() {
        Ball { center: vec![0.0; d], radius: -1.0 }
    } else {
        let refs: Vec<&[f64]> = boundary.iter().map(|p| p.as_slice()).collect();
        circumsphere(&refs).unwrap_or(Ball { center: boundary[0].clone(), radius: -1.0 })
    };
    if boundary.len() == d + 1 {
        return ball;
    }
    let mut i = 0;
    while i < n {
        let inside = ball.radius >= 0.0 && linalg::dist(&points[i], &ball.center) <= ball.radius * (1.0 + 1e-12) + 1e-300;
        if !inside {
            boundary.push(points[i].clone());
            ball = welzl(points, i, boundary, d);
            boundary.pop();
            // move to front
            let p = points.remove(i);
            points.insert(0, p);
        }
        i += 1;
    }
    ball
}

/// Exact minimum enclosing ball of a small point set.
pub fn exact_small_ball(points: &[Vec<f64>]) -> Ball {
    let d = points[0].len();
    let mut pts = points.to_vec();
    let n = pts.len();
    let mut boundary = Vec::new();
    let b = welzl(&mut pts, n, &mut boundary, d);
    Ball { radius: b.radius.max(0.0), ..b }
}

/// Minimum enclosing ball of `points` to relative tolerance `rel_tol`.
pub fn min_enclosing_ball(points: &[Vec<f64>], rel_tol: f64) -> Ball {
    assert!(!points.is_empty(), "enclosing ball of an empty set");
    let farthest = |c: &[f64]| {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, linalg::dist_sq(p, c)))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a })
    };
    let (a, _) = farthest(&points[0]);
    let (b, _) = farthest(&points[a]);
    let mut core: Vec<Vec<f64>> = vec![points[a].clone()];
    if b != a {
        core.push(points[b].clone());
    }
    loop {
        let ball = exact_small_ball(&core);
        let (far, dsq) = farthest(&ball.center);
        if dsq.sqrt() <= ball.radius * (1.0 + rel_tol) || core.len() > 4 * points.len() {
            // radius covering every point exactly
            return Ball { radius: dsq.sqrt().max(ball.radius), center: ball.center };
        }
        core.push(points[far].clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{uniform_direction, RngStream};
    use rand::Rng;

    #[test]
    fn square_and_pair() {
        let sq = vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0]];
        let b = min_enclosing_ball(&sq, 1e-9);
        assert!((b.radius - 2f64.sqrt()).abs() < 1e-12);
        assert!(linalg::norm(&b.center) < 1e-12);
        let pair = vec![vec![0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]];
        let b = min_enclosing_ball(&pair, 1e-9);
        assert!((b.radius - 1.0).abs() < 1e-12);
        assert!((b.center[0] - 1.0).abs() < 1e-12);
        let single = vec![vec![3.0, 4.0]];
        assert_eq!(min_enclosing_ball(&single, 1e-9).radius, 0.0);
    }

    /// Exhaustive oracle: the best ball through each subset of size <= d+1
    /// that contains every point.
    fn oracle(points: &[Vec<f64>]) -> f64 {
        let d = points[0].len();
        let n = points.len();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) {
            if mask.count_ones() as usize > d + 1 {
                continue;
            }
            let sub: Vec<&[f64]> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| points[i].as_slice()).collect();
            if let Some(b) = circumsphere(&sub) {
                if points.iter().all(|p| linalg::dist(p, &b.center) <= b.radius * (1.0 + 1e-10) + 1e-12) {
                    best = best.min(b.radius);
                }
            }
        }
        best
    }

    #[test]
    fn matches_subset_oracle() {
        let mut s = RngStream::new(77, 0);
        for trial in 0..60 {
            let d = 2 + trial % 3;
            let n = 3 + (trial % 10);
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let mut u = uniform_direction(d, &mut s);
                    let r: f64 = s.random();
                    u.iter_mut().for_each(|x| *x *= r);
                    u
                })
                .collect();
            let b = min_enclosing_ball(&pts, 1e-9);
            let o = oracle(&pts);
            assert!((b.radius - o).abs() < 1e-7, "trial {trial}: {} vs {o}", b.radius);
            assert!(pts.iter().all(|p| linalg::dist(p, &b.center) <= b.radius * (1.0 + 1e-8)));
        }
    }
}
