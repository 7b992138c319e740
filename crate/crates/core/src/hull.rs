//! Convex hulls in moderate dimension and their low-dimensional faces.
//!
//! Construction is incremental: an initial max-volume simplex is grown by
//! inserting, facet by facet, the farthest point of that facet's conflict
//! list. Each insertion removes the connected set of facets visible from the
//! new point and cones the horizon ridges to it. Points within the
//! orientation tolerance of a facet plane count as not visible and are kept
//! as coplanar members of that facet.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::{LinearProgram, Relation};

/// Visibility tolerance, relative to the coordinate scale of the input.
pub const ORIENT_TOL: f64 = 1e-10;
/// Tolerance for reporting a point as lying on a facet plane.
pub const MEMBER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    /// Outward unit normal.
    pub normal: Vec<f64>,
    /// `normal · x == offset` on the facet.
    pub offset: f64,
    /// Sorted indices of the input points on the facet (at least `d`).
    pub vertices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ConvexHull {
    pub d: usize,
    pub points: Vec<Vec<f64>>,
    /// Facets sorted by vertex set; coplanar simplices are merged.
    pub facets: Vec<Facet>,
    /// Sorted indices of the points that are hull vertices.
    pub vertices: Vec<usize>,
    /// Facets sharing a ridge with each facet.
    pub neighbors: Vec<Vec<usize>>,
    /// Largest absolute coordinate of the input.
    pub scale: f64,
    /// A point strictly inside the hull.
    pub interior: Vec<f64>,
    /// True when every facet has exactly `d` vertices.
    pub simplicial: bool,
}

impl ConvexHull {
    /// Signed distance of `p` above facet `f`.
    pub fn facet_distance(&self, f: usize, p: &[f64]) -> f64 {
        linalg::dot(&self.facets[f].normal, p) - self.facets[f].offset
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        (0..self.facets.len()).all(|f| self.facet_distance(f, p) <= tol)
    }

    /// For each point index, the facets it lies on.
    pub fn vertex_facets(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.points.len()];
        for (i, f) in self.facets.iter().enumerate() {
            for &v in &f.vertices {
                out[v].push(i);
            }
        }
        out
    }

    /// Ridges as `(facet, facet)` pairs of the underlying simplicial complex
    /// together with the number of facets on each `(d-1)`-subset. Only
    /// meaningful for simplicial hulls.
    pub fn ridge_multiplicities(&self) -> HashMap<Vec<usize>, usize> {
        let mut m: HashMap<Vec<usize>, usize> = HashMap::new();
        for f in &self.facets {
            for skip in 0..f.vertices.len() {
                let key: Vec<usize> = f
                    .vertices
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                *m.entry(key).or_default() += 1;
            }
        }
        m
    }
}

/// Convex hull of `points` in `R^d`.
pub fn convex_hull(points: &[Vec<f64>], d: usize) -> Result<ConvexHull> {
    convex_hull_bounded(points, d, usize::MAX)
}

/// As [`convex_hull`], failing with [`Error::Budget`] once more than
/// `max_facets` simplicial facets are alive at the same time.
pub fn convex_hull_bounded(points: &[Vec<f64>], d: usize, max_facets: usize) -> Result<ConvexHull> {
    if d < 2 {
        return Err(Error::Domain("hull needs d >= 2".into()));
    }
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::Domain("points have mismatched dimensions".into()));
    }
    if points.len() < d + 1 {
        return Err(Error::Degenerate(format!(
            "{} points cannot span R^{d}",
            points.len()
        )));
    }
    if points.len() > u32::MAX as usize {
        return Err(Error::Domain("too many points".into()));
    }
    let mut b = Builder::new(points, d);
    b.max_facets = max_facets;
    b.run()?;
    Ok(b.finish())
}

const NONE: u32 = u32::MAX;

/// Sorted ridge vertex list; inline up to 15 entries so the hot loop does not allocate.
#[derive(Clone, PartialEq, Eq)]
enum RidgeKey {
    Inline(u8, [u32; 15]),
    Heap(Vec<u32>),
}

impl std::hash::Hash for RidgeKey {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        let s = match self {
            RidgeKey::Inline(n, a) => &a[..*n as usize],
            RidgeKey::Heap(v) => v.as_slice(),
        };
        for &x in s {
            state.write_u32(x);
        }
    }
}

/// Multiplicative hash for small integer keys; ridge keys are not adversarial.
#[derive(Default)]
struct MulHasher(u64);

impl std::hash::Hasher for MulHasher {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.write_u32(b as u32);
        }
    }
    fn write_u32(&mut self, x: u32) {
        self.0 = (self.0.rotate_left(5) ^ x as u64).wrapping_mul(0x51_7c_c1_b7_27_22_0a_95);
    }
}

type RidgeMap = HashMap<RidgeKey, (u32, usize), std::hash::BuildHasherDefault<MulHasher>>;

impl RidgeKey {
    fn new(sorted: &[u32]) -> Self {
        if sorted.len() <= 15 {
            let mut a = [NONE; 15];
            a[..sorted.len()].copy_from_slice(sorted);
            RidgeKey::Inline(sorted.len() as u8, a)
        } else {
            RidgeKey::Heap(sorted.to_vec())
        }
    }
}

struct Builder<'a> {
    d: usize,
    src: &'a [Vec<f64>],
    pts: Vec<f64>,
    scale: f64,
    tol: f64,
    interior: Vec<f64>,
    verts: Vec<u32>,
    nbrs: Vec<u32>,
    normals: Vec<f64>,
    offsets: Vec<f64>,
    alive: Vec<bool>,
    outside: Vec<Vec<u32>>,
    furthest: Vec<(u32, f64)>,
    coplanar: Vec<Vec<u32>>,
    seen: Vec<u32>,
    visible: Vec<bool>,
    epoch: u32,
    free: Vec<u32>,
    rows: Vec<f64>,
    normal_buf: Vec<f64>,
    max_facets: usize,
}

impl<'a> Builder<'a> {
    fn new(src: &'a [Vec<f64>], d: usize) -> Self {
        let pts: Vec<f64> = src.iter().flatten().copied().collect();
        let scale = pts.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        Builder {
            d,
            src,
            pts,
            scale,
            tol: ORIENT_TOL * scale,
            interior: vec![0.0; d],
            verts: Vec::new(),
            nbrs: Vec::new(),
            normals: Vec::new(),
            offsets: Vec::new(),
            alive: Vec::new(),
            outside: Vec::new(),
            furthest: Vec::new(),
            coplanar: Vec::new(),
            seen: Vec::new(),
            visible: Vec::new(),
            epoch: 0,
            free: Vec::new(),
            rows: vec![0.0; d * d],
            normal_buf: Vec::new(),
            max_facets: usize::MAX,
        }
    }

    #[inline]
    fn point(&self, i: u32) -> &[f64] {
        let d = self.d;
        &self.pts[i as usize * d..(i as usize + 1) * d]
    }

    #[inline]
    fn dist(&self, f: u32, p: u32) -> f64 {
        let d = self.d;
        let n = &self.normals[f as usize * d..(f as usize + 1) * d];
        linalg::dot(n, self.point(p)) - self.offsets[f as usize]
    }

    fn initial_simplex(&self) -> Result<Vec<u32>> {
        let d = self.d;
        let n = self.src.len();
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, x) in mean.iter_mut().zip(self.point(i as u32)) {
                *m += x / n as f64;
            }
        }
        let far = |from: &[f64]| {
            (0..n as u32)
                .map(|i| (i, linalg::dist_sq(self.point(i), from)))
                .fold((0u32, -1.0), |a, b| if b.1 > a.1 { b } else { a })
        };
        let (i0, _) = far(&mean);
        let (i1, r1) = far(self.point(i0));
        if r1.sqrt() <= self.tol {
            return Err(Error::Degenerate("all points coincide".into()));
        }
        let mut chosen = vec![i0, i1];
        let origin = self.point(i0).to_vec();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut e = linalg::sub(self.point(i1), &origin);
        linalg::normalize(&mut e);
        basis.push(e);
        while chosen.len() < d + 1 {
            let mut best = (NONE, 0.0);
            let mut best_vec = Vec::new();
            for i in 0..n as u32 {
                let mut r = linalg::sub(self.point(i), &origin);
                for b in &basis {
                    let c = linalg::dot(&r, b);
                    r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
                let len = linalg::norm(&r);
                if len > best.1 {
                    best = (i, len);
                    best_vec = r;
                }
            }
            if best.0 == NONE || best.1 <= 10.0 * self.tol {
                return Err(Error::Degenerate(format!(
                    "points span only {} dimensions",
                    chosen.len() - 1
                )));
            }
            // re-orthogonalize once for stability
            for b in &basis {
                let c = linalg::dot(&best_vec, b);
                best_vec.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            linalg::normalize(&mut best_vec);
            basis.push(best_vec);
            chosen.push(best.0);
        }
        Ok(chosen)
    }

    fn alloc_facet(&mut self) -> u32 {
        let d = self.d;
        if let Some(f) = self.free.pop() {
            self.alive[f as usize] = true;
            return f;
        }
        let f = self.offsets.len() as u32;
        self.verts.extend(std::iter::repeat_n(NONE, d));
        self.nbrs.extend(std::iter::repeat_n(NONE, d));
        self.normals.extend(std::iter::repeat_n(0.0, d));
        self.offsets.push(0.0);
        self.alive.push(true);
        self.outside.push(Vec::new());
        self.furthest.push((NONE, 0.0));
        self.coplanar.push(Vec::new());
        self.seen.push(0);
        self.visible.push(false);
        f
    }

    /// Computes the plane through the facet's vertices, oriented away from
    /// the interior point.
    fn set_plane(&mut self, f: u32) -> Result<()> {
        let d = self.d;
        let fu = f as usize;
        let v0 = self.verts[fu * d];
        for r in 1..d {
            let vr = self.verts[fu * d + r];
            for c in 0..d {
                self.rows[(r - 1) * d + c] = self.pts[vr as usize * d + c] - self.pts[v0 as usize * d + c];
            }
        }
        let mut normal = std::mem::take(&mut self.normal_buf);
        normal.resize(d, 0.0);
        let ok = linalg::null_vector(&mut self.rows[..(d - 1) * d], d, 1e-14 * self.scale, &mut normal);
        if !ok {
            return Err(Error::Degenerate("flat facet during hull construction".into()));
        }
        let mut offset = 0.0;
        for r in 0..d {
            offset += linalg::dot(&normal, self.point(self.verts[fu * d + r]));
        }
        offset /= d as f64;
        if linalg::dot(&normal, &self.interior) > offset {
            normal.iter_mut().for_each(|x| *x = -*x);
            offset = -offset;
        }
        self.normals[fu * d..(fu + 1) * d].copy_from_slice(&normal);
        self.offsets[fu] = offset;
        self.normal_buf = normal;
        Ok(())
    }

    fn assign(&mut self, p: u32, candidates: &[u32]) {
        let mut on_plane = None;
        for &f in candidates {
            let dist = self.dist(f, p);
            if dist > self.tol {
                let fu = f as usize;
                self.outside[fu].push(p);
                if dist > self.furthest[fu].1 || self.furthest[fu].0 == NONE {
                    self.furthest[fu] = (p, dist);
                }
                return;
            }
            if on_plane.is_none() && dist.abs() <= MEMBER_TOL * self.scale {
                on_plane = Some(f);
            }
        }
        if let Some(f) = on_plane {
            self.coplanar[f as usize].push(p);
        }
    }

    fn run(&mut self) -> Result<()> {
        let d = self.d;
        let simplex = self.initial_simplex()?;
        for &v in &simplex {
            let p = self.point(v).to_vec();
            for (c, x) in self.interior.iter_mut().zip(p) {
                *c += x / (d + 1) as f64;
            }
        }
        // facet i omits simplex[i]
        let mut ids = Vec::with_capacity(d + 1);
        for _ in 0..=d {
            ids.push(self.alloc_facet());
        }
        for i in 0..=d {
            let f = ids[i] as usize;
            let mut slot = 0;
            for j in 0..=d {
                if j != i {
                    self.verts[f * d + slot] = simplex[j];
                    self.nbrs[f * d + slot] = ids[j];
                    slot += 1;
                }
            }
            self.set_plane(ids[i])?;
        }
        let in_simplex: std::collections::HashSet<u32> = simplex.iter().copied().collect();
        for p in 0..self.src.len() as u32 {
            if !in_simplex.contains(&p) {
                self.assign(p, &ids.clone());
            }
        }

        let mut stack: Vec<u32> = ids.iter().copied().filter(|&f| !self.outside[f as usize].is_empty()).collect();
        let mut queue: Vec<u32> = Vec::new();
        let mut vis_list: Vec<u32> = Vec::new();
        let mut horizon: Vec<(u32, usize, u32)> = Vec::new();
        let mut new_facets: Vec<u32> = Vec::new();
        let mut pending = RidgeMap::default();
        let mut key = Vec::with_capacity(d);

        while let Some(f0) = stack.pop() {
            if !self.alive[f0 as usize] || self.outside[f0 as usize].is_empty() {
                continue;
            }
            if self.offsets.len() - self.free.len() > self.max_facets {
                return Err(Error::Budget(format!("hull exceeded {} facets", self.max_facets)));
            }
            let apex = self.furthest[f0 as usize].0;

            // visible region by BFS
            self.epoch = self.epoch.wrapping_add(1);
            if self.epoch == 0 {
                self.seen.iter_mut().for_each(|s| *s = 0);
                self.epoch = 1;
            }
            let epoch = self.epoch;
            vis_list.clear();
            horizon.clear();
            queue.clear();
            self.seen[f0 as usize] = epoch;
            self.visible[f0 as usize] = true;
            queue.push(f0);
            while let Some(f) = queue.pop() {
                vis_list.push(f);
                for s in 0..d {
                    let nb = self.nbrs[f as usize * d + s];
                    if self.seen[nb as usize] != epoch {
                        self.seen[nb as usize] = epoch;
                        let v = self.dist(nb, apex) > self.tol;
                        self.visible[nb as usize] = v;
                        if v {
                            queue.push(nb);
                        }
                    }
                }
            }
            for &f in &vis_list {
                for s in 0..d {
                    let nb = self.nbrs[f as usize * d + s];
                    if !self.visible[nb as usize] {
                        horizon.push((f, s, nb));
                    }
                }
            }

            // cone the horizon to the apex
            new_facets.clear();
            pending.clear();
            for &(f, s, nb) in &horizon {
                let g = self.alloc_facet();
                let (fu, gu) = (f as usize, g as usize);
                for j in 0..d {
                    self.verts[gu * d + j] = if j == s { apex } else { self.verts[fu * d + j] };
                    self.nbrs[gu * d + j] = NONE;
                }
                self.nbrs[gu * d + s] = nb;
                let nbu = nb as usize;
                for j in 0..d {
                    if self.nbrs[nbu * d + j] == f {
                        self.nbrs[nbu * d + j] = g;
                    }
                }
                for j in 0..d {
                    if j == s {
                        continue;
                    }
                    key.clear();
                    key.extend((0..d).filter(|&t| t != j).map(|t| self.verts[gu * d + t]));
                    key.sort_unstable();
                    let k = RidgeKey::new(&key);
                    if let Some((h, hs)) = pending.remove(&k) {
                        self.nbrs[gu * d + j] = h;
                        self.nbrs[h as usize * d + hs] = g;
                    } else {
                        pending.insert(k, (g, j));
                    }
                }
                self.set_plane(g)?;
                self.seen[gu] = 0;
                self.visible[gu] = false;
                self.outside[gu].clear();
                self.coplanar[gu].clear();
                self.furthest[gu] = (NONE, 0.0);
                new_facets.push(g);
            }
            if !pending.is_empty() {
                return Err(Error::Consistency("unmatched ridge while coning horizon".into()));
            }

            // repartition conflict lists of removed facets
            for &f in &vis_list {
                let fu = f as usize;
                let out = std::mem::take(&mut self.outside[fu]);
                let cop = std::mem::take(&mut self.coplanar[fu]);
                for p in out.into_iter().chain(cop) {
                    if p != apex {
                        self.assign(p, &new_facets);
                    }
                }
                self.alive[fu] = false;
                self.visible[fu] = false;
                self.free.push(f);
            }
            for &g in &new_facets {
                if !self.outside[g as usize].is_empty() {
                    stack.push(g);
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> ConvexHull {
        let d = self.d;
        let live: Vec<u32> = (0..self.offsets.len() as u32).filter(|&f| self.alive[f as usize]).collect();
        let mut index = vec![NONE; self.offsets.len()];
        for (i, &f) in live.iter().enumerate() {
            index[f as usize] = i as u32;
        }

        // union coplanar neighbours
        let mut parent: Vec<usize> = (0..live.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let merge_tol = MEMBER_TOL * self.scale;
        for (i, &f) in live.iter().enumerate() {
            for s in 0..d {
                let g = self.nbrs[f as usize * d + s];
                let j = index[g as usize] as usize;
                if j <= i {
                    continue;
                }
                // vertex of g not shared with f
                let gv = (0..d)
                    .map(|t| self.verts[g as usize * d + t])
                    .find(|v| !self.verts[f as usize * d..(f as usize + 1) * d].contains(v))
                    .unwrap();
                let fv = self.verts[f as usize * d + s];
                if self.dist(f, gv).abs() <= merge_tol && self.dist(g, fv).abs() <= merge_tol {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for i in 0..live.len() {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }

        let mut facets: Vec<(Facet, Vec<usize>)> = Vec::with_capacity(groups.len());
        for (root, members) in groups {
            let rep = live[root] as usize;
            let mut vs: Vec<usize> = Vec::with_capacity(d);
            for &m in &members {
                let f = live[m] as usize;
                vs.extend(self.verts[f * d..(f + 1) * d].iter().map(|&v| v as usize));
                vs.extend(
                    self.coplanar[f]
                        .iter()
                        .filter(|&&p| self.dist(rep as u32, p).abs() <= merge_tol)
                        .map(|&p| p as usize),
                );
            }
            vs.sort_unstable();
            vs.dedup();
            facets.push((
                Facet {
                    normal: self.normals[rep * d..(rep + 1) * d].to_vec(),
                    offset: self.offsets[rep],
                    vertices: vs,
                },
                members,
            ));
        }
        facets.sort_by(|a, b| a.0.vertices.cmp(&b.0.vertices));

        let mut group_of = vec![0usize; live.len()];
        for (gi, (_, members)) in facets.iter().enumerate() {
            for &m in members {
                group_of[m] = gi;
            }
        }
        let mut neighbors = vec![Vec::new(); facets.len()];
        for (i, &f) in live.iter().enumerate() {
            for s in 0..d {
                let j = index[self.nbrs[f as usize * d + s] as usize] as usize;
                let (a, b) = (group_of[i], group_of[j]);
                if a != b {
                    neighbors[a].push(b);
                }
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }

        let facets: Vec<Facet> = facets.into_iter().map(|(f, _)| f).collect();
        let mut vertices: Vec<usize> = facets.iter().flat_map(|f| f.vertices.iter().copied()).collect();
        vertices.sort_unstable();
        vertices.dedup();
        let simplicial = facets.iter().all(|f| f.vertices.len() == d);
        ConvexHull {
            d,
            points: self.src.to_vec(),
            facets,
            vertices,
            neighbors,
            scale: self.scale,
            interior: self.interior,
            simplicial,
        }
    }
}

/// Vertex sets of the `j`-faces for `j = 0..=j_max`.
#[derive(Debug, Clone, Default)]
pub struct FaceLattice {
    /// `levels[j]` lists the `j`-faces, each a sorted set of point indices.
    pub levels: Vec<Vec<Vec<usize>>>,
    /// `incidence[j][i]`: the `(j+1)`-faces containing face `i` of level `j`.
    pub incidence: Vec<Vec<Vec<usize>>>,
    /// `facets_of[j][i]`: hull facets containing face `i` of level `j`.
    pub facets_of: Vec<Vec<Vec<u32>>>,
}

impl FaceLattice {
    pub fn f_vector(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.len()).collect()
    }
}

/// Affine dimension of a point subset.
pub fn affine_dimension(points: &[Vec<f64>], subset: &[usize], tol: f64) -> usize {
    if subset.is_empty() {
        return 0;
    }
    let origin = &points[subset[0]];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for &i in &subset[1..] {
        let mut r = linalg::sub(&points[i], origin);
        for _ in 0..2 {
            for b in &basis {
                let c = linalg::dot(&r, b);
                r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        if linalg::normalize(&mut r) > tol {
            basis.push(r);
        }
    }
    basis.len()
}

fn for_each_subset(items: &[usize], size: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(items: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == size {
            f(cur);
            return;
        }
        let need = size - cur.len();
        for i in start..=items.len() - need {
            cur.push(items[i]);
            rec(items, size, i + 1, cur, f);
            cur.pop();
        }
    }
    if size <= items.len() {
        rec(items, size, 0, &mut Vec::with_capacity(size), f);
    }
}

/// Enumerates the `j`-faces for `j <= j_max` (at most 3 and at most `d-1`).
///
/// Subsets of simplicial facets are faces outright. For facets with more
/// than `d` vertices each affinely independent `(j+1)`-subset is closed
/// under the intersection of the facets containing it, and the closure is
/// kept when it has dimension `j` and passes [`certify_face`].
pub fn face_lattice(hull: &ConvexHull, j_max: usize) -> Result<FaceLattice> {
    if j_max > 3 {
        return Err(Error::Domain("face lattice supports j_max <= 3".into()));
    }
    let d = hull.d;
    let top = j_max.min(d - 1);
    let vfacets = hull.vertex_facets();
    let tol = MEMBER_TOL * hull.scale.max(1.0);
    let mut lattice = FaceLattice::default();

    for j in 0..=top {
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut faces: Vec<Vec<usize>> = Vec::new();
        let mut facets_of: Vec<Vec<u32>> = Vec::new();
        for (fi, facet) in hull.facets.iter().enumerate() {
            if facet.vertices.len() == d {
                for_each_subset(&facet.vertices, j + 1, &mut |s| {
                    let id = *index.entry(s.to_vec()).or_insert_with(|| {
                        faces.push(s.to_vec());
                        facets_of.push(Vec::new());
                        faces.len() - 1
                    });
                    facets_of[id].push(fi as u32);
                });
            } else {
                let mut found: Vec<Vec<usize>> = Vec::new();
                for_each_subset(&facet.vertices, j + 1, &mut |s| {
                    if affine_dimension(&hull.points, s, tol) != j {
                        return;
                    }
                    let mut containing: Vec<usize> = vfacets[s[0]].clone();
                    for &v in &s[1..] {
                        containing.retain(|f| vfacets[v].binary_search(f).is_ok());
                    }
                    let mut closure = hull.facets[containing[0]].vertices.clone();
                    for &f in &containing[1..] {
                        closure.retain(|v| hull.facets[f].vertices.binary_search(v).is_ok());
                    }
                    if affine_dimension(&hull.points, &closure, tol) == j {
                        found.push(closure);
                    }
                });
                for closure in found {
                    if index.contains_key(&closure) {
                        continue;
                    }
                    if !certify_face(hull, &closure) {
                        continue;
                    }
                    let mut containing: Vec<u32> = vfacets[closure[0]].iter().map(|&f| f as u32).collect();
                    for &v in &closure[1..] {
                        containing.retain(|f| vfacets[v].binary_search(&(*f as usize)).is_ok());
                    }
                    index.insert(closure.clone(), faces.len());
                    faces.push(closure);
                    facets_of.push(containing);
                }
            }
        }
        // facets reached through a simplicial subset may also contain the face
        // through a merged neighbour; recompute from the vertex map when mixed
        if !hull.simplicial {
            for (face, fo) in faces.iter().zip(facets_of.iter_mut()) {
                let mut containing: Vec<u32> = vfacets[face[0]].iter().map(|&f| f as u32).collect();
                for &v in &face[1..] {
                    containing.retain(|f| vfacets[v].binary_search(&(*f as usize)).is_ok());
                }
                *fo = containing;
            }
        }
        let mut order: Vec<usize> = (0..faces.len()).collect();
        order.sort_by(|&a, &b| faces[a].cmp(&faces[b]));
        lattice.levels.push(order.iter().map(|&i| faces[i].clone()).collect());
        lattice.facets_of.push(order.iter().map(|&i| facets_of[i].clone()).collect());
    }

    for j in 0..top {
        let upper = &lattice.levels[j + 1];
        let mut by_vertex: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, f) in upper.iter().enumerate() {
            for &v in f {
                by_vertex.entry(v).or_default().push(i);
            }
        }
        let inc = lattice.levels[j]
            .iter()
            .map(|face| {
                by_vertex
                    .get(&face[0])
                    .map(|cands| {
                        cands
                            .iter()
                            .copied()
                            .filter(|&c| face.iter().all(|v| upper[c].binary_search(v).is_ok()))
                            .collect()
                    })
                    .unwrap_or_default()
            })
            .collect();
        lattice.incidence.push(inc);
    }
    lattice.incidence.push(vec![Vec::new(); lattice.levels[top].len()]);
    Ok(lattice)
}

/// Decides whether `subset` (point indices) is the vertex set of a face:
/// some direction `u` attains its maximum over the hull vertices exactly on
/// `subset`. Solved as a feasibility LP in `(u, t)`.
pub fn certify_face(hull: &ConvexHull, subset: &[usize]) -> bool {
    if subset.is_empty() {
        return false;
    }
    let d = hull.d;
    let mut lp = LinearProgram::new(d + 1);
    lp.free = vec![true; d + 1];
    let s = hull.scale.max(1e-300);
    for &v in &hull.vertices {
        let mut row: Vec<f64> = hull.points[v].iter().map(|x| x / s).collect();
        row.push(-1.0);
        if subset.contains(&v) {
            lp.add(row, Relation::Eq, 0.0);
        } else {
            lp.add(row, Relation::Le, -1.0);
        }
    }
    for &v in subset {
        if hull.vertices.binary_search(&v).is_err() {
            return false;
        }
    }
    lp.solve().is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{uniform_direction, RngStream};
    use rand::Rng;

    fn facet_sets(h: &ConvexHull) -> Vec<Vec<usize>> {
        h.facets.iter().map(|f| f.vertices.clone()).collect()
    }

    #[test]
    fn square() {
        let pts = vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0]];
        let h = convex_hull(&pts, 2).unwrap();
        assert_eq!(h.facets.len(), 4);
        for f in &h.facets {
            assert!((f.offset - 1.0).abs() < 1e-12);
            let axis = f.normal.iter().filter(|x| (x.abs() - 1.0).abs() < 1e-12).count();
            assert_eq!(axis, 1);
        }
        let l = face_lattice(&h, 3).unwrap();
        assert_eq!(l.f_vector(), vec![4, 4]);
    }

    #[test]
    fn octahedron() {
        let mut pts = Vec::new();
        for i in 0..3 {
            for s in [1.0, -1.0] {
                let mut p = vec![0.0; 3];
                p[i] = s;
                pts.push(p);
            }
        }
        let h = convex_hull(&pts, 3).unwrap();
        assert_eq!(h.facets.len(), 8);
        let l = face_lattice(&h, 3).unwrap();
        assert_eq!(l.f_vector(), vec![6, 12, 8]);
        // e1 = index 0, -e1 = index 1
        assert!(!certify_face(&h, &[0, 1]));
        assert!(certify_face(&h, &[0]));
        assert!(certify_face(&h, &[0, 2]));
    }

    #[test]
    fn cube_merges_coplanar_simplices() {
        let mut pts = Vec::new();
        for m in 0..8u32 {
            pts.push((0..3).map(|b| ((m >> b) & 1) as f64).collect::<Vec<_>>());
        }
        let h = convex_hull(&pts, 3).unwrap();
        assert_eq!(h.facets.len(), 6);
        assert!(h.facets.iter().all(|f| f.vertices.len() == 4));
        assert!(!h.simplicial);
        let l = face_lattice(&h, 3).unwrap();
        assert_eq!(l.f_vector(), vec![8, 12, 6]);
        // incidence: every edge lies on two squares
        assert!(l.incidence[1].iter().all(|p| p.len() == 2));
        assert!(l.incidence[0].iter().all(|p| p.len() == 3));
        // a square diagonal is not an edge
        assert!(!certify_face(&h, &[0, 3]));
    }

    #[test]
    fn degenerate_input() {
        let pts = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 1.0, 0.0]];
        assert!(matches!(convex_hull(&pts, 3), Err(Error::Degenerate(_))));
        assert!(convex_hull(&pts[..2], 3).is_err());
    }

    fn cloud(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut s = RngStream::new(seed, 0);
        (0..n)
            .map(|_| {
                let mut u = uniform_direction(d, &mut s);
                let r: f64 = s.random::<f64>().powf(0.5);
                u.iter_mut().for_each(|x| *x *= r);
                u
            })
            .collect()
    }

    pub(crate) fn check_invariants(h: &ConvexHull) {
        let tol = MEMBER_TOL * h.scale;
        for f in &h.facets {
            assert!((linalg::norm(&f.normal) - 1.0).abs() < 1e-12);
            for (i, p) in h.points.iter().enumerate() {
                let dist = linalg::dot(&f.normal, p) - f.offset;
                assert!(dist <= tol, "point above facet by {dist}");
                let on = dist.abs() <= tol;
                assert_eq!(on, f.vertices.binary_search(&i).is_ok(), "membership mismatch {dist}");
            }
        }
        if h.simplicial {
            assert!(h.ridge_multiplicities().values().all(|&c| c == 2));
            assert!(h.neighbors.iter().all(|n| n.len() == h.d));
        }
    }

    #[test]
    fn random_hull_invariants() {
        let mut count = 0;
        for d in 2..=8 {
            let reps = if d <= 5 { 100 } else { 40 };
            for r in 0..reps {
                let n = 2 * d + 10 + (r % 20);
                let pts = cloud(n, d, 1000 * d as u64 + r as u64);
                let h = convex_hull(&pts, d).unwrap();
                check_invariants(&h);
                // idempotence
                let vpts: Vec<Vec<f64>> = h.vertices.iter().map(|&v| pts[v].clone()).collect();
                let h2 = convex_hull(&vpts, d).unwrap();
                let mut a: Vec<Vec<usize>> = facet_sets(&h2)
                    .into_iter()
                    .map(|f| {
                        let mut m: Vec<usize> = f.iter().map(|&i| h.vertices[i]).collect();
                        m.sort_unstable();
                        m
                    })
                    .collect();
                a.sort();
                assert_eq!(a, facet_sets(&h));
                count += 1;
            }
        }
        assert!(count >= 500);
    }

    #[test]
    fn euler_relation_in_three_dimensions() {
        for seed in 0..30 {
            let h = convex_hull(&cloud(30, 3, seed), 3).unwrap();
            let f = face_lattice(&h, 3).unwrap().f_vector();
            assert_eq!(f[0] as i64 - f[1] as i64 + f[2] as i64, 2);
        }
    }

    #[test]
    fn random_faces_certify() {
        for seed in 0..5 {
            let h = convex_hull(&cloud(25, 4, 50 + seed), 4).unwrap();
            let l = face_lattice(&h, 3).unwrap();
            for level in &l.levels {
                for face in level {
                    assert!(certify_face(&h, face));
                }
            }
        }
    }
}
