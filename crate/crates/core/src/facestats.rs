//! Face counts by co-dimension, defining points, near-regular fractions,
//! circumradius tuple counts and face norm windows.
//!
//! A face of co-dimension `k` of the cell is polar to a `(k-1)`-face of the
//! dual hull; the generators of the dual face are its defining points.

use serde::{Deserialize, Serialize};

use crate::cell::TypicalCell;
use crate::error::{Error, Result};
use crate::hull;
use crate::linalg;
use crate::mathkit::{circumball, near_regular_test};
use crate::sampler::PointSet;

/// Largest tuple size accepted by the circumradius counter.
pub const MAX_TUPLE: usize = 12;

/// Slack allowed when checking that a point lies in the cell.
const FEASIBLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceRecord {
    pub co_dimension: usize,
    /// Configuration indices of the defining points.
    pub generators: Vec<usize>,
    pub defining_points: Vec<Vec<f64>>,
    pub vertex_indices: Vec<usize>,
    pub diameter: f64,
    /// Distance from the origin to the face.
    pub min_norm: f64,
    /// False when `min_norm` fell back to the smallest vertex norm.
    pub min_norm_exact: bool,
    pub max_vertex_norm: f64,
    /// Circumradius of the defining points together with the origin.
    pub rho: f64,
    /// One flag per configured epsilon.
    pub near_regular: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodimensionSummary {
    pub k: usize,
    pub f_count: usize,
    pub f_root_d: f64,
    pub mean_diam: f64,
    pub max_diam: f64,
    /// `None` when there are no faces.
    pub nr_fraction: Vec<Option<f64>>,
    /// Ordered tuple counts, one per radius of the grid.
    pub x_r: Vec<u64>,
    pub min_norm: f64,
    pub max_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceCensus {
    pub d: usize,
    pub eps: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub summaries: Vec<CodimensionSummary>,
    pub faces: Vec<Vec<FaceRecord>>,
}

impl FaceCensus {
    pub fn summary(&self, k: usize) -> Option<&CodimensionSummary> {
        self.summaries.iter().find(|s| s.k == k)
    }
}

/// Builds the census for co-dimensions `1..=k_max`.
pub fn face_census(cell: &TypicalCell, config: &PointSet, k_max: usize, eps: &[f64], r_grid: &[f64]) -> Result<FaceCensus> {
    let d = cell.d;
    if k_max == 0 || k_max > 3 || k_max > d {
        return Err(Error::Domain(format!("k_max must lie in 1..=min(3, d), got {k_max}")));
    }
    let lattice = hull::face_lattice(&cell.dual_hull, k_max - 1)?;
    let facet_hs = cell.facet_halfspaces();
    let mut summaries = Vec::new();
    let mut faces = Vec::new();
    for k in 1..=k_max {
        let level = &lattice.levels[k - 1];
        let mut records = Vec::with_capacity(level.len());
        for (i, dual_face) in level.iter().enumerate() {
            let vertex_indices: Vec<usize> = lattice.facets_of[k - 1][i].iter().map(|&f| f as usize).collect();
            records.push(face_record(cell, &facet_hs, k, dual_face, vertex_indices, eps)?);
        }
        let f = records.len();
        let diams: Vec<f64> = records.iter().map(|r| r.diameter).collect();
        let x_r = count_circumradius_tuples_grid(config, k, r_grid)?;
        summaries.push(CodimensionSummary {
            k,
            f_count: f,
            f_root_d: (f as f64).powf(1.0 / d as f64),
            mean_diam: if f == 0 { f64::NAN } else { diams.iter().sum::<f64>() / f as f64 },
            max_diam: diams.iter().copied().fold(0.0, f64::max),
            nr_fraction: (0..eps.len()).map(|e| near_regular_fraction(&records, e)).collect(),
            x_r,
            min_norm: records.iter().map(|r| r.min_norm).fold(f64::INFINITY, f64::min),
            max_norm: records.iter().map(|r| r.max_vertex_norm).fold(0.0, f64::max),
        });
        faces.push(records);
    }
    Ok(FaceCensus { d, eps: eps.to_vec(), r_grid: r_grid.to_vec(), summaries, faces })
}

fn face_record(
    cell: &TypicalCell,
    facet_hs: &[crate::cell::HalfSpace],
    k: usize,
    dual_face: &[usize],
    vertex_indices: Vec<usize>,
    eps: &[f64],
) -> Result<FaceRecord> {
    let generators = defining_points(cell, dual_face, k)?;
    let defining: Vec<Vec<f64>> = generators.iter().map(|&g| cell.halfspaces[g].normal.clone()).collect();
    if vertex_indices.is_empty() {
        return Err(Error::Consistency("face without vertices".into()));
    }
    let d = cell.d;
    let flat: Vec<f64> = vertex_indices.iter().flat_map(|&v| cell.vertices[v].iter().copied()).collect();
    let diameter = max_pair_dist_sq(&flat, d);
    let norms: Vec<f64> = flat.chunks_exact(d).map(linalg::norm).collect();
    let min_vertex_norm = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let max_vertex_norm = norms.iter().copied().fold(0.0, f64::max);
    let ball = circumball(&defining)?;
    // the foot of the perpendicular from the origin onto the face's affine
    // hull is the circumcenter of the defining points
    let feasible = facet_hs.iter().all(|h| h.slack(&ball.center) >= -FEASIBLE_TOL * h.offset.max(1.0));
    let (min_norm, min_norm_exact) = if feasible { (ball.radius, true) } else { (min_vertex_norm, false) };
    Ok(FaceRecord {
        co_dimension: k,
        near_regular: eps.iter().map(|&e| near_regular_test(&defining, e)).collect(),
        generators,
        defining_points: defining,
        vertex_indices,
        diameter: diameter.sqrt(),
        min_norm,
        min_norm_exact,
        max_vertex_norm,
        rho: ball.radius,
    })
}

/// Largest squared distance among the points of a flattened list.
fn max_pair_dist_sq(flat: &[f64], d: usize) -> f64 {
    // fixed dimensions let the compiler unroll the inner loop
    match d {
        2 => max_pair_fixed::<2>(flat),
        3 => max_pair_fixed::<3>(flat),
        4 => max_pair_fixed::<4>(flat),
        5 => max_pair_fixed::<5>(flat),
        6 => max_pair_fixed::<6>(flat),
        7 => max_pair_fixed::<7>(flat),
        8 => max_pair_fixed::<8>(flat),
        9 => max_pair_fixed::<9>(flat),
        10 => max_pair_fixed::<10>(flat),
        _ => max_pair_dynamic(flat, d),
    }
}

fn max_pair_fixed<const D: usize>(flat: &[f64]) -> f64 {
    let mut pts: Vec<[f64; D]> = flat.chunks_exact(D).map(|c| c.try_into().expect("chunk of length D")).collect();
    let n = pts.len() as f64;
    let mut c = [0.0; D];
    for p in &pts {
        for t in 0..D {
            c[t] += p[t] / n;
        }
    }
    // ‖a − b‖ <= ‖a − c‖ + ‖b − c‖, so scanning by decreasing distance to
    // the centroid lets whole tails be skipped
    let rad = |p: &[f64; D]| (0..D).map(|t| (p[t] - c[t]) * (p[t] - c[t])).sum::<f64>().sqrt();
    pts.sort_by(|a, b| rad(b).total_cmp(&rad(a)));
    let radii: Vec<f64> = pts.iter().map(rad).collect();
    let mut best: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        if i + 1 < pts.len() && (radii[i] + radii[i + 1]).powi(2) <= best {
            break;
        }
        for (j, b) in pts.iter().enumerate().skip(i + 1) {
            if (radii[i] + radii[j]).powi(2) <= best {
                break;
            }
            let mut s = 0.0;
            for t in 0..D {
                let x = a[t] - b[t];
                s += x * x;
            }
            best = best.max(s);
        }
    }
    best
}

fn max_pair_dynamic(flat: &[f64], d: usize) -> f64 {
    let n = flat.len() / d;
    let mut best: f64 = 0.0;
    for i in 0..n {
        let a = &flat[i * d..(i + 1) * d];
        for b in flat[(i + 1) * d..].chunks_exact(d) {
            best = best.max(linalg::dist_sq(a, b));
        }
    }
    best
}

/// The configuration indices of the points whose dual images span `dual_face`.
pub fn defining_points(cell: &TypicalCell, dual_face: &[usize], k: usize) -> Result<Vec<usize>> {
    if dual_face.len() != k {
        return Err(Error::Consistency(format!(
            "face of co-dimension {k} has {} defining points",
            dual_face.len()
        )));
    }
    dual_face
        .iter()
        .map(|&i| {
            cell.dual
                .source
                .get(i)
                .copied()
                .ok_or_else(|| Error::Consistency(format!("dual point {i} has no source")))
        })
        .collect()
}

/// Fraction of faces whose defining points pass the near-regular test for
/// the `eps_index`-th epsilon; `None` without faces.
pub fn near_regular_fraction(records: &[FaceRecord], eps_index: usize) -> Option<f64> {
    if records.is_empty() {
        return None;
    }
    let m = records.iter().filter(|r| r.near_regular[eps_index]).count();
    Some(m as f64 / records.len() as f64)
}

/// Ordered `k`-tuples of distinct points whose circumball with the origin
/// has radius at most `r`.
pub fn count_circumradius_tuples(config: &PointSet, k: usize, r: f64) -> Result<u64> {
    Ok(count_circumradius_tuples_grid(config, k, &[r])?[0])
}

/// [`count_circumradius_tuples`] for every radius of `r_grid` in one pass.
pub fn count_circumradius_tuples_grid(config: &PointSet, k: usize, r_grid: &[f64]) -> Result<Vec<u64>> {
    if k == 0 || k > config.d || k > MAX_TUPLE {
        return Err(Error::Domain(format!("tuple size must lie in 1..=min(d, {MAX_TUPLE}), got {k}")));
    }
    if r_grid.is_empty() {
        return Ok(Vec::new());
    }
    let r_max = r_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // a point farther than 2r already has circumradius above r
    let pts: Vec<&Vec<f64>> = config.points.iter().filter(|z| linalg::norm(z) <= 2.0 * r_max).collect();
    let n = pts.len();
    let gram: Vec<f64> = (0..n * n).map(|ij| linalg::dot(pts[ij / n], pts[ij % n])).collect();
    let mut counts = vec![0u64; r_grid.len()];
    let mut prefix = Vec::with_capacity(k);
    let mut search = TupleSearch { gram: &gram, n, k, r_grid, r_max_sq: r_max * r_max, counts: &mut counts };
    search.extend(0, &mut prefix);
    let factorial: u64 = (1..=k as u64).product();
    Ok(counts.into_iter().map(|c| c * factorial).collect())
}

struct TupleSearch<'a> {
    gram: &'a [f64],
    n: usize,
    k: usize,
    r_grid: &'a [f64],
    r_max_sq: f64,
    counts: &'a mut [u64],
}

impl TupleSearch<'_> {
    fn extend(&mut self, start: usize, prefix: &mut Vec<usize>) {
        for i in start..self.n {
            prefix.push(i);
            // the circumradius grows along prefixes, so a failing prefix prunes
            if let Some(rho_sq) = circumradius_sq(self.gram, self.n, prefix) {
                if rho_sq <= self.r_max_sq {
                    if prefix.len() == self.k {
                        let rho = rho_sq.sqrt();
                        for (c, &r) in self.counts.iter_mut().zip(self.r_grid) {
                            if rho <= r {
                                *c += 1;
                            }
                        }
                    } else {
                        self.extend(i + 1, prefix);
                    }
                }
            }
            prefix.pop();
        }
    }
}

/// Squared circumradius of the origin and the points `idx`, from their Gram
/// matrix: the center `Σ c_i z_i` solves `G c = diag(G)/2` and its squared
/// norm is `c·diag(G)/2`. `None` when the points are linearly dependent.
fn circumradius_sq(gram: &[f64], n: usize, idx: &[usize]) -> Option<f64> {
    let m = idx.len();
    if m == 1 {
        return Some(gram[idx[0] * n + idx[0]] / 4.0);
    }
    debug_assert!(m <= MAX_TUPLE);
    const MAX: usize = MAX_TUPLE;
    let mut a = [[0.0f64; MAX + 1]; MAX];
    let mut scale: f64 = 0.0;
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            a[r][c] = gram[i * n + j];
        }
        a[r][m] = 0.5 * gram[i * n + i];
        scale = scale.max(gram[i * n + i]);
    }
    let b: Vec<f64> = (0..m).map(|r| a[r][m]).collect();
    for col in 0..m {
        let piv = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            for c in col..=m {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = [0.0f64; MAX];
    for r in (0..m).rev() {
        let mut v = a[r][m];
        for c in r + 1..m {
            v -= a[r][c] * x[c];
        }
        x[r] = v / a[r][r];
    }
    Some((0..m).map(|r| x[r] * b[r]).sum())
}

/// Mean and max face diameter at co-dimension `k`.
pub fn face_diameter_stats(census: &FaceCensus, k: usize) -> Option<(f64, f64)> {
    census.summary(k).filter(|s| s.f_count > 0).map(|s| (s.mean_diam, s.max_diam))
}

/// `(min, max)` norm over the faces of dimension `j`: `j = 0` uses the
/// vertices, `j = d - k` for `k <= 3` uses the census.
pub fn skeleton_norm_window(cell: &TypicalCell, census: &FaceCensus, j: usize) -> Option<(f64, f64)> {
    if j == 0 {
        let norms = cell.vertices.iter().map(|v| linalg::norm(v));
        let (lo, hi) = norms.fold((f64::INFINITY, 0.0_f64), |(lo, hi), n| (lo.min(n), hi.max(n)));
        return Some((lo, hi));
    }
    let k = cell.d.checked_sub(j)?;
    census.summary(k).filter(|s| s.f_count > 0).map(|s| (s.min_norm, s.max_norm))
}
