//! Metric functionals of a cell: inradius, outradius, diameter, widths and
//! the Hausdorff-to-ball lower bound.

use serde::{Deserialize, Serialize};

use crate::cell::{support_walk, HalfSpace, TypicalCell};
use crate::error::{Error, Result};
use crate::hull;
use crate::linalg;
use crate::lp::{LinearProgram, Relation};
use crate::meb;
use crate::sampler::{uniform_direction, RngStream};

/// Default number of Monte Carlo directions for the mean width.
pub const DEFAULT_DIRECTIONS: usize = 4096;
/// Random directions tried by the width bracket before descent.
pub const BRACKET_RANDOM_DIRECTIONS: usize = 256;
/// Descent iterations of the width bracket.
pub const BRACKET_ITERATIONS: usize = 64;
/// Vertex count up to which the exact width is attempted in any dimension.
pub const EXACT_WIDTH_MAX_VERTICES: usize = 400;

/// Limits and constants the measurements are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalReference {
    pub inr: f64,
    pub outr: f64,
    pub diam: f64,
    pub meanw: f64,
    pub width_lower: f64,
    pub width_upper: f64,
    pub r_star: f64,
    pub width_lb_constant: f64,
    pub hausdorff_coefficient: f64,
}

impl TheoreticalReference {
    pub fn new() -> Self {
        let s5 = 5f64.sqrt();
        let r_star = 4.0 / s5;
        TheoreticalReference {
            inr: 0.5,
            outr: 1.0,
            diam: 2.0,
            meanw: 2.0,
            width_lower: 2.0 * s5 / (2.0 + s5),
            width_upper: 1.5,
            r_star,
            width_lb_constant: 4.0 / (2.0 + r_star),
            hausdorff_coefficient: 0.125,
        }
    }
}

impl Default for TheoreticalReference {
    fn default() -> Self {
        Self::new()
    }
}

/// Every functional of one cell, as a flat record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub inr: f64,
    pub incenter: Vec<f64>,
    pub outr: f64,
    pub circumcenter: Vec<f64>,
    pub diam: f64,
    pub diam_pair: (usize, usize),
    pub meanw: f64,
    pub meanw_se: f64,
    pub n_directions: usize,
    pub width_lower: f64,
    pub width_upper: f64,
    pub width_exact: Option<f64>,
    pub hausdorff_lower: f64,
    pub vnorm_min: f64,
    pub vnorm_max: f64,
    pub vnorm_mean: f64,
    pub vnorm_q05: f64,
    pub vnorm_q95: f64,
}

/// Chebyshev center: the largest ball inside `{x : a_i·x <= b_i}`.
pub fn inradius(halfspaces: &[HalfSpace]) -> Result<(f64, Vec<f64>)> {
    let d = halfspaces.first().ok_or(Error::Unbounded)?.normal.len();
    // variables (x, r), x free
    let mut lp = LinearProgram::new(d + 1);
    lp.objective[d] = 1.0;
    for f in lp.free.iter_mut().take(d) {
        *f = true;
    }
    for h in halfspaces {
        let mut row = h.normal.clone();
        row.push(linalg::norm(&h.normal));
        lp.add(row, Relation::Le, h.offset);
    }
    let sol = lp.solve()?;
    Ok((sol.x[d], sol.x[..d].to_vec()))
}

/// Number of halfspaces touching the ball `B(center, r)` within `tol`.
pub fn active_constraints(halfspaces: &[HalfSpace], r: f64, center: &[f64], tol: f64) -> usize {
    halfspaces
        .iter()
        .filter(|h| (h.slack(center) - r * linalg::norm(&h.normal)).abs() <= tol)
        .count()
}

/// Minimum enclosing ball of the vertices, checked to contain every vertex.
pub fn outradius(vertices: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    if vertices.is_empty() {
        return Err(Error::Domain("outradius of an empty set".into()));
    }
    let b = meb::min_enclosing_ball(vertices, 1e-9);
    if vertices.iter().any(|v| linalg::dist(v, &b.center) > b.radius * (1.0 + 1e-8) + 1e-300) {
        return Err(Error::Consistency("enclosing ball misses a vertex".into()));
    }
    Ok((b.radius, b.center))
}

/// Largest vertex distance and the pair realizing it.
pub fn diameter(vertices: &[Vec<f64>]) -> (f64, (usize, usize)) {
    let n = vertices.len();
    if n < 2 {
        return (0.0, (0, 0));
    }
    let d = vertices[0].len();
    // sort by norm so pairs with ‖a‖+‖b‖ <= best can be skipped
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = vertices.iter().map(|v| linalg::norm(v)).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let flat: Vec<f64> = order.iter().flat_map(|&i| vertices[i].iter().copied()).collect();
    let sorted_norms: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let mut best_sq = 0.0;
    let mut best = (order[0], order[0]);
    for i in 0..n {
        let a = &flat[i * d..(i + 1) * d];
        for j in i + 1..n {
            let bound = sorted_norms[i] + sorted_norms[j];
            if bound * bound <= best_sq {
                break;
            }
            let b = &flat[j * d..(j + 1) * d];
            let s = linalg::dist_sq(a, b);
            if s > best_sq {
                best_sq = s;
                best = (order[i], order[j]);
            }
        }
        // later pairs are bounded by the next two norms
        if i + 2 < n && (sorted_norms[i + 1] + sorted_norms[i + 2]).powi(2) <= best_sq {
            break;
        }
    }
    let (a, b) = if best.0 <= best.1 { best } else { (best.1, best.0) };
    (best_sq.sqrt(), (a, b))
}

/// `max u·v − min u·v` over the vertices.
pub fn directional_width(u: &[f64], vertices: &[Vec<f64>]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vertices {
        let t = linalg::dot(u, v);
        lo = lo.min(t);
        hi = hi.max(t);
    }
    hi - lo
}

/// Evaluates widths either by scanning or by walking the edge graph.
struct WidthOracle<'a> {
    vertices: &'a [Vec<f64>],
    adjacency: Option<&'a [Vec<usize>]>,
    hi: usize,
    lo: usize,
    neg: Vec<f64>,
}

impl<'a> WidthOracle<'a> {
    fn new(vertices: &'a [Vec<f64>], adjacency: Option<&'a [Vec<usize>]>) -> Self {
        let d = vertices[0].len();
        WidthOracle { vertices, adjacency, hi: 0, lo: 0, neg: vec![0.0; d] }
    }

    fn width(&mut self, u: &[f64]) -> f64 {
        match self.adjacency {
            None => directional_width(u, self.vertices),
            Some(adj) => {
                let (hi, a) = support_walk(self.vertices, adj, u, self.hi);
                for (n, x) in self.neg.iter_mut().zip(u) {
                    *n = -x;
                }
                let (lo, b) = support_walk(self.vertices, adj, &self.neg, self.lo);
                self.hi = hi;
                self.lo = lo;
                a + b
            }
        }
    }
}

/// Monte Carlo mean width over `n_directions` isotropic directions; returns
/// the estimate and its standard error.
pub fn mean_width_mc(vertices: &[Vec<f64>], n_directions: usize, stream: &mut RngStream) -> Result<(f64, f64)> {
    mean_width_impl(&mut WidthOracle::new(vertices, None), vertices[0].len(), n_directions, stream)
}

fn mean_width_impl(oracle: &mut WidthOracle, d: usize, n: usize, stream: &mut RngStream) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::Domain("mean width needs at least two directions".into()));
    }
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let u = uniform_direction(d, stream);
        let w = oracle.width(&u);
        sum += w;
        sum_sq += w * w;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

/// Exact width as the inradius of the difference body about the origin.
/// Returns [`Error::Unavailable`] when the vertex set is too large.
pub fn width_exact_small(vertices: &[Vec<f64>]) -> Result<f64> {
    let n = vertices.len();
    if n == 0 {
        return Err(Error::Domain("width of an empty set".into()));
    }
    let d = vertices[0].len();
    if n > EXACT_WIDTH_MAX_VERTICES && d > 4 {
        return Err(Error::Unavailable(format!("{n} vertices in dimension {d}")));
    }
    let mut diff = Vec::with_capacity(n * n);
    for a in vertices {
        for b in vertices {
            diff.push(linalg::sub(a, b));
        }
    }
    if d == 1 {
        return Ok(diff.iter().map(|p| p[0].abs()).fold(0.0, f64::max));
    }
    match hull::convex_hull(&diff, d) {
        Ok(h) => Ok(h
            .facets
            .iter()
            .map(|f| f.offset / linalg::norm(&f.normal))
            .fold(f64::INFINITY, f64::min)),
        // a lower dimensional body has zero width
        Err(Error::Degenerate(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Rotates `u` by angle `theta` towards the unit tangent `t`.
fn great_circle(u: &[f64], t: &[f64], theta: f64) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    let mut v: Vec<f64> = u.iter().zip(t).map(|(a, b)| c * a + s * b).collect();
    linalg::normalize(&mut v);
    v
}

/// Golden-section minimization of `f` on `[a, b]`.
fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Brackets the width: the upper end is the best direction found among
/// facet normals, the incenter-to-farthest-vertex direction and random
/// directions, refined by great-circle descent; the lower end is the larger
/// of `2·inradius` and the exact width when available.
pub fn width_bracket(
    vertices: &[Vec<f64>],
    adjacency: Option<&[Vec<usize>]>,
    facet_normals: &[Vec<f64>],
    incenter: &[f64],
    inr: f64,
    exact: Option<f64>,
    stream: &mut RngStream,
) -> (f64, f64) {
    let d = vertices[0].len();
    let mut oracle = WidthOracle::new(vertices, adjacency);
    let mut best_u = Vec::new();
    let mut best_w = f64::INFINITY;
    let mut consider = |u: Vec<f64>, oracle: &mut WidthOracle| {
        let w = oracle.width(&u);
        if w < best_w {
            best_w = w;
            best_u = u;
        }
    };
    for n in facet_normals {
        let mut u = n.clone();
        if linalg::normalize(&mut u) > 0.0 {
            consider(u, &mut oracle);
        }
    }
    let far = vertices
        .iter()
        .max_by(|a, b| linalg::dist_sq(a, incenter).total_cmp(&linalg::dist_sq(b, incenter)))
        .expect("nonempty vertex set");
    let mut u = linalg::sub(far, incenter);
    if linalg::normalize(&mut u) > 0.0 {
        consider(u, &mut oracle);
    }
    for _ in 0..BRACKET_RANDOM_DIRECTIONS {
        consider(uniform_direction(d, stream), &mut oracle);
    }

    let mut step = 0.25;
    for _ in 0..BRACKET_ITERATIONS {
        // random tangent at the current direction
        let mut t = uniform_direction(d, stream);
        let c = linalg::dot(&t, &best_u);
        t.iter_mut().zip(&best_u).for_each(|(x, y)| *x -= c * y);
        if linalg::normalize(&mut t) <= 1e-12 {
            continue;
        }
        let (theta, w) = golden_section(|th| oracle.width(&great_circle(&best_u, &t, th)), -step, step, 24);
        if w < best_w {
            best_w = w;
            best_u = great_circle(&best_u, &t, theta);
        } else {
            step = (step * 0.7).max(1e-6);
        }
    }

    let lower = exact.map_or(2.0 * inr, |e| e.max(2.0 * inr));
    (lower.min(best_w), best_w)
}

/// `(diam − width_upper)/4`, clamped at zero.
pub fn hausdorff_ball_lower(diameter: f64, width_upper: f64) -> f64 {
    ((diameter - width_upper) / 4.0).max(0.0)
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Measures every functional of `cell`; random directions come from `stream`.
pub fn measure(cell: &TypicalCell, n_directions: usize, stream: &mut RngStream) -> Result<FunctionalReport> {
    let facets = cell.facet_halfspaces();
    let (inr, incenter) = inradius(&facets)?;
    let (outr, circumcenter) = outradius(&cell.vertices)?;
    let (diam, diam_pair) = diameter(&cell.vertices);
    let adjacency = Some(cell.vertex_adjacency.as_slice());
    let mut oracle = WidthOracle::new(&cell.vertices, adjacency);
    let (meanw, meanw_se) = mean_width_impl(&mut oracle, cell.d, n_directions, stream)?;
    let width_exact = match width_exact_small(&cell.vertices) {
        Ok(w) => Some(w),
        Err(Error::Unavailable(_)) => None,
        Err(e) => return Err(e),
    };
    let normals: Vec<Vec<f64>> = facets.iter().map(|h| h.normal.clone()).collect();
    let (width_lower, width_upper) =
        width_bracket(&cell.vertices, adjacency, &normals, &incenter, inr, width_exact, stream);

    let mut norms: Vec<f64> = cell.vertices.iter().map(|v| linalg::norm(v)).collect();
    norms.sort_by(f64::total_cmp);
    let vnorm_mean = norms.iter().sum::<f64>() / norms.len() as f64;
    Ok(FunctionalReport {
        inr,
        incenter,
        outr,
        circumcenter,
        diam,
        diam_pair,
        meanw,
        meanw_se,
        n_directions,
        width_lower,
        width_upper,
        width_exact,
        hausdorff_lower: hausdorff_ball_lower(diam, width_upper),
        vnorm_min: norms[0],
        vnorm_max: norms[norms.len() - 1],
        vnorm_mean,
        vnorm_q05: quantile(&norms, 0.05),
        vnorm_q95: quantile(&norms, 0.95),
    })
}
