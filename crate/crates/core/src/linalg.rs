//! Small dense helpers on `&[f64]` vectors.
//!
//! Points are stored as plain `Vec<f64>` throughout the crate so they
//! serialize as JSON arrays; heavier linear algebra goes through nalgebra.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Normalizes `a` in place, returning its original length.
pub fn normalize(a: &mut [f64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Nullspace direction of the `(d-1) x d` row-major matrix `rows`, via
/// Gaussian elimination with full pivoting. Writes a unit vector to `out`;
/// returns `false` when the rows are rank deficient relative to `tol`.
///
/// `rows` is overwritten.
pub fn null_vector(rows: &mut [f64], d: usize, tol: f64, out: &mut [f64]) -> bool {
    let m = d - 1;
    let mut col_perm: Vec<usize> = (0..d).collect();
    for r in 0..m {
        // full pivot over the remaining submatrix
        let mut best = 0.0;
        let (mut pr, mut pc) = (r, r);
        for i in r..m {
            for j in r..d {
                let v = rows[i * d + col_perm[j]].abs();
                if v > best {
                    best = v;
                    pr = i;
                    pc = j;
                }
            }
        }
        if best <= tol {
            return false;
        }
        if pr != r {
            for j in 0..d {
                rows.swap(r * d + j, pr * d + j);
            }
        }
        col_perm.swap(r, pc);
        let piv = rows[r * d + col_perm[r]];
        for i in (r + 1)..m {
            let f = rows[i * d + col_perm[r]] / piv;
            if f != 0.0 {
                for j in r..d {
                    let c = col_perm[j];
                    rows[i * d + c] -= f * rows[r * d + c];
                }
            }
        }
    }
    // free variable is the last permuted column
    let free = col_perm[d - 1];
    out.iter_mut().for_each(|x| *x = 0.0);
    out[free] = 1.0;
    for r in (0..m).rev() {
        let c = col_perm[r];
        let mut s = 0.0;
        for j in (r + 1)..d {
            let cj = col_perm[j];
            s += rows[r * d + cj] * out[cj];
        }
        out[c] = -s / rows[r * d + c];
    }
    normalize(out) > 0.0
}
