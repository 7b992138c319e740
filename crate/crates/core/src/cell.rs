//! The Voronoi cell of the origin, built through polar duality.
//!
//! Every Poisson point `z` contributes the bisector constraint
//! `z·y <= ‖z‖²/2`. Inverting the points by `x ↦ 2x/‖x‖²` turns the cell's
//! polar body into the convex hull of the inverted points: hull facets
//! `{y : c·y = 1}` are cell vertices `c`, hull vertices are cell facets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hull::{self, ConvexHull};
use crate::linalg;
use crate::lp::{LinearProgram, Relation};
use crate::meb;
use crate::sampler::PointSet;

/// Tolerance for vertex certification against the generating points.
pub const VERTEX_TOL: f64 = 1e-8;

/// The constraint `normal · y <= offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl HalfSpace {
    pub fn slack(&self, y: &[f64]) -> f64 {
        self.offset - linalg::dot(&self.normal, y)
    }

    /// Distance from the origin to the bounding hyperplane.
    pub fn plane_distance(&self) -> f64 {
        self.offset / linalg::norm(&self.normal)
    }
}

/// Bisector halfspace of the origin and `z`: the points at least as close to `0` as to `z`.
pub fn bisector_halfspace(z: &[f64]) -> Result<HalfSpace> {
    let n2 = linalg::norm_sq(z);
    if !(n2 > 0.0) {
        return Err(Error::Domain("bisector of the origin with itself".into()));
    }
    Ok(HalfSpace { normal: z.to_vec(), offset: 0.5 * n2 })
}

/// The inversion `x ↦ 2x/‖x‖²`; an involution with `‖f(x)‖·‖x‖ = 2`.
pub fn invert_point(x: &[f64]) -> Result<Vec<f64>> {
    let n2 = linalg::norm_sq(x);
    if !(n2 > 0.0) {
        return Err(Error::Domain("cannot invert the origin".into()));
    }
    Ok(linalg::scale(x, 2.0 / n2))
}

/// Inverted points with their provenance: `points[i] = f(z_{source[i]})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPointSet {
    pub points: Vec<Vec<f64>>,
    pub source: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetRecord {
    /// Index of the generating point in the configuration.
    pub generator: usize,
    pub z: Vec<f64>,
    /// Cell vertices on this facet.
    pub vertex_indices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TypicalCell {
    pub d: usize,
    pub seed: u64,
    pub stream_index: u64,
    pub truncation_radius: f64,
    pub n_points: usize,
    /// One bisector per configuration point, in configuration order.
    pub halfspaces: Vec<HalfSpace>,
    /// Cell vertex `i` corresponds to dual hull facet `i`.
    pub vertices: Vec<Vec<f64>>,
    /// One record per cell facet, i.e. per dual hull vertex, sorted by generator.
    pub facet_records: Vec<FacetRecord>,
    pub dual: DualPointSet,
    pub dual_hull: ConvexHull,
    /// Edge graph of the cell (adjacent dual facets).
    pub vertex_adjacency: Vec<Vec<usize>>,
    pub outradius: f64,
    pub truncation_certified: bool,
}

impl TypicalCell {
    /// Generators of the facet records, in record order.
    pub fn facet_generators(&self) -> Vec<Vec<f64>> {
        self.facet_records.iter().map(|r| r.z.clone()).collect()
    }

    /// Halfspaces of the facets only (the irredundant H-representation).
    pub fn facet_halfspaces(&self) -> Vec<HalfSpace> {
        self.facet_records.iter().map(|r| self.halfspaces[r.generator].clone()).collect()
    }

    /// Support function `max_{x in cell} u·x`, by a greedy walk on the edge graph.
    pub fn support(&self, u: &[f64]) -> f64 {
        support_walk(&self.vertices, &self.vertex_adjacency, u, 0).1
    }

    pub fn to_dump(&self) -> CellDump {
        CellDump {
            d: self.d,
            seed: self.seed,
            r_final: self.truncation_radius,
            n_points: self.n_points,
            vertices: self.vertices.clone(),
            facets: self
                .facet_records
                .iter()
                .map(|r| DumpFacet { z: r.z.clone(), vertex_indices: r.vertex_indices.clone() })
                .collect(),
        }
    }
}

/// Greedy ascent of `u·v` over a vertex graph starting at `start`; on the edge
/// graph of a convex polytope the local maximum is global.
pub fn support_walk(vertices: &[Vec<f64>], adjacency: &[Vec<usize>], u: &[f64], start: usize) -> (usize, f64) {
    let mut cur = start;
    let mut val = linalg::dot(&vertices[cur], u);
    loop {
        let mut next = None;
        for &nb in &adjacency[cur] {
            let v = linalg::dot(&vertices[nb], u);
            if v > val {
                val = v;
                next = Some(nb);
            }
        }
        match next {
            Some(n) => cur = n,
            None => return (cur, val),
        }
    }
}

/// Serialized cell: `{d, seed, R_final, n_points, vertices, facets: [{z, vertex_indices}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDump {
    pub d: usize,
    pub seed: u64,
    #[serde(rename = "R_final")]
    pub r_final: f64,
    pub n_points: usize,
    pub vertices: Vec<Vec<f64>>,
    pub facets: Vec<DumpFacet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpFacet {
    pub z: Vec<f64>,
    pub vertex_indices: Vec<usize>,
}

impl CellDump {
    /// Rebuilds the cell from the facet generators alone. Non-facet points do
    /// not change the cell, so the geometry matches the dumped one.
    pub fn rebuild(&self) -> Result<TypicalCell> {
        let ps = PointSet {
            d: self.d,
            truncation_radius: self.r_final,
            seed: self.seed,
            stream_index: 0,
            points: self.facets.iter().map(|f| f.z.clone()).collect(),
        };
        let mut cell = build_typical_cell(&ps)?;
        cell.n_points = self.n_points;
        Ok(cell)
    }
}

/// Builds the cell of the origin for `config`. Returns [`Error::Unbounded`]
/// when the inverted points do not surround the origin; the caller grows
/// the truncation radius and retries.
pub fn build_typical_cell(config: &PointSet) -> Result<TypicalCell> {
    build_typical_cell_bounded(config, usize::MAX)
}

/// As [`build_typical_cell`], failing with [`Error::Budget`] when the dual
/// hull needs more than `max_facets` simplicial facets.
pub fn build_typical_cell_bounded(config: &PointSet, max_facets: usize) -> Result<TypicalCell> {
    let d = config.d;
    if config.points.len() < d + 1 {
        return Err(Error::Unbounded);
    }
    let halfspaces = config.points.iter().map(|z| bisector_halfspace(z)).collect::<Result<Vec<_>>>()?;
    let dual_points = config.points.iter().map(|z| invert_point(z)).collect::<Result<Vec<_>>>()?;
    let dual = DualPointSet { source: (0..dual_points.len()).collect(), points: dual_points };
    let dual_hull = match hull::convex_hull_bounded(&dual.points, d, max_facets) {
        Ok(h) => h,
        Err(Error::Degenerate(_)) => return Err(Error::Unbounded),
        Err(e) => return Err(e),
    };
    let tol = hull::MEMBER_TOL * dual_hull.scale;
    if dual_hull.facets.iter().any(|f| f.offset <= tol) {
        return Err(Error::Unbounded);
    }

    let vertices: Vec<Vec<f64>> = dual_hull
        .facets
        .iter()
        .map(|f| polar_vertex(f, &dual, config))
        .collect();

    let vfacets = dual_hull.vertex_facets();
    let facet_records: Vec<FacetRecord> = dual_hull
        .vertices
        .iter()
        .map(|&i| FacetRecord {
            generator: dual.source[i],
            z: config.points[dual.source[i]].clone(),
            vertex_indices: vfacets[i].clone(),
        })
        .collect();

    let vertex_adjacency = dual_hull.neighbors.clone();
    let ball = meb::min_enclosing_ball(&vertices, 1e-9);
    let mut cell = TypicalCell {
        d,
        seed: config.seed,
        stream_index: config.stream_index,
        truncation_radius: config.truncation_radius,
        n_points: config.points.len(),
        halfspaces,
        vertices,
        facet_records,
        dual,
        dual_hull,
        vertex_adjacency,
        outradius: ball.radius,
        truncation_certified: false,
    };
    cell.truncation_certified = certify_truncation(&cell, config.truncation_radius);
    Ok(cell)
}

/// The cell vertex polar to a dual facet: the solution of `z_i·c = ‖z_i‖²/2`
/// over the facet's generators (equivalently `c = normal/offset`).
fn polar_vertex(f: &hull::Facet, dual: &DualPointSet, config: &PointSet) -> Vec<f64> {
    let d = config.d;
    let fallback = || linalg::scale(&f.normal, 1.0 / f.offset);
    if f.vertices.len() != d {
        return fallback();
    }
    let a = DMatrix::from_fn(d, d, |i, j| config.points[dual.source[f.vertices[i]]][j]);
    let b = DVector::from_fn(d, |i, _| 0.5 * linalg::norm_sq(&config.points[dual.source[f.vertices[i]]]));
    match a.lu().solve(&b) {
        Some(x) if x.iter().all(|v| v.is_finite()) => x.iter().copied().collect(),
        _ => fallback(),
    }
}

/// True iff no point beyond `radius` can cut the cell: `2·outr <= R - 1e-9`.
pub fn certify_truncation(cell: &TypicalCell, radius: f64) -> bool {
    2.0 * cell.outradius <= radius - 1e-9
}

/// Checks that `p` is a Voronoi vertex of the origin: at least `d` points are
/// equidistant from `0` and `p`, and no point is strictly closer to `p`.
pub fn verify_vertex(p: &[f64], config: &PointSet) -> bool {
    VertexVerifier::new(config).check(p)
}

/// [`verify_vertex`] for many vertices against one configuration.
pub struct VertexVerifier {
    d: usize,
    /// Points sorted by norm, flattened.
    flat: Vec<f64>,
    norms: Vec<f64>,
}

impl VertexVerifier {
    pub fn new(config: &PointSet) -> Self {
        let mut order: Vec<usize> = (0..config.points.len()).collect();
        let norms: Vec<f64> = config.points.iter().map(|z| linalg::norm(z)).collect();
        order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]));
        VertexVerifier {
            d: config.d,
            flat: order.iter().flat_map(|&i| config.points[i].iter().copied()).collect(),
            norms: order.iter().map(|&i| norms[i]).collect(),
        }
    }

    pub fn check(&self, p: &[f64]) -> bool {
        let d = self.d;
        let r = linalg::norm(p);
        let mut on = 0;
        for (i, &nz) in self.norms.iter().enumerate() {
            // B(p, ‖p‖) ⊂ B(0, 2‖p‖)
            if nz > 2.0 * r + VERTEX_TOL {
                break;
            }
            let z = &self.flat[i * d..(i + 1) * d];
            // ‖p − z‖² − ‖p‖²
            let s = nz * nz - 2.0 * linalg::dot(z, p);
            let gap = s / ((s + r * r).max(0.0).sqrt() + r);
            if gap < -VERTEX_TOL {
                return false;
            }
            if gap.abs() <= VERTEX_TOL {
                on += 1;
            }
        }
        on >= d
    }
}

/// Radial function `sup{λ >= 0 : λu ∈ A}` of an H-polytope containing the origin.
pub fn radial_function(u: &[f64], halfspaces: &[HalfSpace]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for h in halfspaces {
        let s = linalg::dot(&h.normal, u);
        if s > 0.0 {
            best = best.min(h.offset / s);
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Unbounded)
    }
}

/// Radial function of a hull containing the origin, read off its facets.
pub fn radial_function_hull(u: &[f64], hull: &ConvexHull) -> Result<f64> {
    let hs: Vec<HalfSpace> = hull
        .facets
        .iter()
        .map(|f| HalfSpace { normal: f.normal.clone(), offset: f.offset })
        .collect();
    radial_function(u, &hs)
}

/// Support function `max u·x` over an H-polytope, by linear programming.
pub fn support_function_lp(u: &[f64], halfspaces: &[HalfSpace]) -> Result<f64> {
    let d = u.len();
    let mut lp = LinearProgram::new(d);
    lp.objective = u.to_vec();
    lp.free = vec![true; d];
    for h in halfspaces {
        lp.add(h.normal.clone(), Relation::Le, h.offset);
    }
    Ok(lp.solve()?.objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_ball, uniform_direction, RngStream};

    fn square_config() -> PointSet {
        PointSet {
            d: 2,
            truncation_radius: 3.0,
            seed: 0,
            stream_index: 0,
            points: vec![vec![2.0, 0.0], vec![-2.0, 0.0], vec![0.0, 2.0], vec![0.0, -2.0]],
        }
    }

    #[test]
    fn bisector_and_inversion() {
        let h = bisector_halfspace(&[2.0, 0.0, 0.0]).unwrap();
        assert_eq!(h.offset, 2.0);
        assert!((h.plane_distance() - 1.0).abs() < 1e-15);
        assert!(h.slack(&[0.0, 0.0, 0.0]) > 0.0);
        assert!(h.slack(&[2.0, 0.0, 0.0]) < 0.0);
        assert!(bisector_halfspace(&[0.0, 0.0]).is_err());

        assert_eq!(invert_point(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(invert_point(&[1.0, 0.0]).unwrap(), vec![2.0, 0.0]);
        assert!(invert_point(&[0.0, 0.0]).is_err());
        let mut s = RngStream::new(1, 1);
        for _ in 0..100 {
            let x = linalg::scale(&uniform_direction(4, &mut s), 0.3 + rand::Rng::random::<f64>(&mut s));
            let y = invert_point(&x).unwrap();
            assert!((linalg::norm(&y) * linalg::norm(&x) - 2.0).abs() < 1e-10);
            let back = invert_point(&y).unwrap();
            assert!(linalg::dist(&back, &x) < 1e-10);
        }
    }

    #[test]
    fn square_cell() {
        let cell = build_typical_cell(&square_config()).unwrap();
        assert_eq!(cell.vertices.len(), 4);
        assert_eq!(cell.facet_records.len(), 4);
        for v in &cell.vertices {
            assert!((v[0].abs() - 1.0).abs() < 1e-12 && (v[1].abs() - 1.0).abs() < 1e-12);
            assert!(verify_vertex(v, &square_config()));
        }
        for r in &cell.facet_records {
            assert_eq!(r.vertex_indices.len(), 2);
        }
        assert!((cell.outradius - 2f64.sqrt()).abs() < 1e-12);
        assert!(cell.truncation_certified);
        assert!(certify_truncation(&cell, 3.0));
        assert!(!certify_truncation(&cell, 2.5));
        assert!(!verify_vertex(&[0.5, 0.5], &square_config()));
    }

    #[test]
    fn single_point_is_unbounded() {
        let ps = PointSet { d: 2, truncation_radius: 3.0, seed: 0, stream_index: 0, points: vec![vec![2.0, 0.0]] };
        assert!(matches!(build_typical_cell(&ps), Err(Error::Unbounded)));
        // three points on one side of the origin
        let ps = PointSet {
            d: 2,
            truncation_radius: 3.0,
            seed: 0,
            stream_index: 0,
            points: vec![vec![2.0, 0.1], vec![2.0, -0.5], vec![1.0, 1.0]],
        };
        assert!(matches!(build_typical_cell(&ps), Err(Error::Unbounded)));
    }

    #[test]
    fn radial_functions() {
        let cell = build_typical_cell(&square_config()).unwrap();
        assert!((radial_function(&[1.0, 0.0], &cell.halfspaces).unwrap() - 1.0).abs() < 1e-15);
        let diag = [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()];
        assert!((radial_function(&diag, &cell.halfspaces).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let half = [HalfSpace { normal: vec![1.0, 0.0], offset: 1.0 }];
        assert!(matches!(radial_function(&[-1.0, 0.0], &half), Err(Error::Unbounded)));
    }

    #[test]
    fn random_cells_are_consistent() {
        for d in 2..=4 {
            for seed in 0..10u64 {
                let ps = sample_ball(d, 3.0, &mut RngStream::new(seed, d as u64)).unwrap();
                let cell = match build_typical_cell(&ps) {
                    Ok(c) => c,
                    Err(Error::Unbounded) => continue,
                    Err(e) => panic!("{e}"),
                };
                assert_eq!(cell.facet_records.len(), cell.dual_hull.vertices.len());
                assert_eq!(cell.vertices.len(), cell.dual_hull.facets.len());
                for v in &cell.vertices {
                    assert!(verify_vertex(v, &ps));
                    for h in &cell.halfspaces {
                        assert!(h.slack(v) >= -1e-8);
                    }
                }
                for r in &cell.facet_records {
                    let h = &cell.halfspaces[r.generator];
                    assert!((h.plane_distance() - linalg::norm(&r.z) / 2.0).abs() < 1e-12);
                }
                // support by graph walk equals the scan
                let mut s = RngStream::new(seed, 99);
                for _ in 0..20 {
                    let u = uniform_direction(d, &mut s);
                    let scan = cell.vertices.iter().map(|v| linalg::dot(v, &u)).fold(f64::MIN, f64::max);
                    assert!((cell.support(&u) - scan).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dump_roundtrip_rebuilds_same_vertices() {
        let ps = sample_ball(3, 3.0, &mut RngStream::new(5, 5)).unwrap();
        let cell = build_typical_cell(&ps).unwrap();
        let dump = cell.to_dump();
        let json = serde_json::to_string(&dump).unwrap();
        assert!(json.contains("\"R_final\""));
        let back: CellDump = serde_json::from_str(&json).unwrap();
        let re = back.rebuild().unwrap();
        assert_eq!(re.vertices.len(), cell.vertices.len());
        for v in &re.vertices {
            assert!(cell.vertices.iter().any(|w| linalg::dist(v, w) < 1e-9));
        }
    }
}
