//! Reproducible Poisson sampling at intensity `1/κ_d`, where a ball of
//! radius `s` holds `s^d` points on average.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Largest admissible mean point count for a single sampling call.
pub const MAX_MEAN_POINTS: f64 = 1e8;

/// A counter-based random stream fully determined by `(seed, stream_index)`.
///
/// Distinct stream indices select disjoint ChaCha keystreams, so replications
/// can run in any order (or in parallel) and still reproduce bit for bit.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        RngStream { seed, stream_index, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// A sampled configuration of the Poisson process restricted to `B(0, R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub d: usize,
    #[serde(rename = "R")]
    pub truncation_radius: f64,
    pub seed: u64,
    #[serde(rename = "stream")]
    pub stream_index: u64,
    pub points: Vec<Vec<f64>>,
}

impl PointSet {
    /// Re-draws the configuration `sample_ball` produced for these parameters.
    pub fn regenerate(d: usize, radius: f64, seed: u64, stream_index: u64) -> Result<PointSet> {
        sample_ball(d, radius, &mut RngStream::new(seed, stream_index))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Superposes an independent shell sample `R < ‖z‖ < new_radius`, so the
    /// result is distributed as a ball sample of radius `new_radius`.
    pub fn grow(&mut self, new_radius: f64, stream: &mut RngStream) -> Result<()> {
        let shell = sample_shell(self.d, self.truncation_radius, new_radius, stream)?;
        self.points.extend(shell.points);
        self.truncation_radius = new_radius;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<PointSet> {
        let ps: PointSet = serde_json::from_str(s)?;
        if ps.points.iter().any(|p| p.len() != ps.d) {
            return Err(Error::Parse("point dimension does not match d".into()));
        }
        Ok(ps)
    }
}

fn check_mean(d: usize, mean: f64) -> Result<()> {
    if !(mean <= MAX_MEAN_POINTS) {
        return Err(Error::Budget(format!(
            "mean point count {mean:.3e} in dimension {d} exceeds {MAX_MEAN_POINTS:.0e}; infeasible at desk scale"
        )));
    }
    Ok(())
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<usize> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(dist.sample(rng) as usize)
}

/// Isotropic unit vector: a standard Gaussian vector, normalized.
pub fn uniform_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if linalg::normalize(&mut v) >= 1e-12 {
            return v;
        }
    }
}

/// Poisson configuration in `B(0, radius)` with mean count `radius^d`.
pub fn sample_ball(d: usize, radius: f64, stream: &mut RngStream) -> Result<PointSet> {
    if d < 2 {
        return Err(Error::Domain("sampling needs d >= 2".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {radius}")));
    }
    let mean = radius.powi(d as i32);
    check_mean(d, mean)?;
    let n = poisson_count(mean, stream)?;
    let inv_d = 1.0 / d as f64;
    let points = (0..n)
        .map(|_| {
            let mut u = uniform_direction(d, stream);
            let r = radius * stream.random::<f64>().powf(inv_d);
            u.iter_mut().for_each(|x| *x *= r);
            u
        })
        .collect();
    Ok(PointSet {
        d,
        truncation_radius: radius,
        seed: stream.seed(),
        stream_index: stream.stream_index(),
        points,
    })
}

/// Poisson configuration in the shell `inner <= ‖z‖ < outer`.
pub fn sample_shell(d: usize, inner: f64, outer: f64, stream: &mut RngStream) -> Result<PointSet> {
    if d < 2 {
        return Err(Error::Domain("sampling needs d >= 2".into()));
    }
    if !(inner > 0.0 && outer >= inner) {
        return Err(Error::Domain(format!("need 0 < inner <= outer, got {inner}, {outer}")));
    }
    let lo = inner.powi(d as i32);
    let hi = outer.powi(d as i32);
    check_mean(d, hi)?;
    let n = poisson_count(hi - lo, stream)?;
    let inv_d = 1.0 / d as f64;
    let points = (0..n)
        .map(|_| {
            let mut u = uniform_direction(d, stream);
            // inverse transform of the r^d law restricted to [inner, outer)
            let r = (lo + stream.random::<f64>() * (hi - lo)).powf(inv_d);
            u.iter_mut().for_each(|x| *x *= r);
            u
        })
        .collect();
    Ok(PointSet {
        d,
        truncation_radius: outer,
        seed: stream.seed(),
        stream_index: stream.stream_index(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathkit;

    #[test]
    fn deterministic_streams() {
        let a = sample_ball(5, 2.0, &mut RngStream::new(7, 3)).unwrap();
        let b = PointSet::regenerate(5, 2.0, 7, 3).unwrap();
        assert_eq!(a, b);
        let c = sample_ball(5, 2.0, &mut RngStream::new(7, 4)).unwrap();
        assert_ne!(a, c);
        assert!(a.points.iter().all(|p| linalg::norm(p) < 2.0));
    }

    #[test]
    fn count_mean_and_variance() {
        // d=5, R=2: mean 32
        let reps = 10_000;
        let counts: Vec<f64> = (0..reps)
            .map(|i| sample_ball(5, 2.0, &mut RngStream::new(11, i)).unwrap().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se_mean = (32.0 / reps as f64).sqrt();
        assert!((mean - 32.0).abs() < 3.0 * se_mean, "mean {mean}");
        // var of sample variance for Poisson: (mu + 2 mu^2 (n/(n-1))) / n ≈ (32 + 2048)/n
        let se_var = ((32.0 + 2.0 * 32.0 * 32.0) / reps as f64).sqrt();
        assert!((var - 32.0).abs() < 3.0 * se_var, "var {var}");
    }

    #[test]
    fn empty_ball_frequency() {
        // d=10, R=1: P(N=0) = e^{-1}
        let reps = 100_000u64;
        let mut stream = RngStream::new(5, 0);
        let zeros = (0..reps)
            .filter(|_| poisson_count(1.0, &mut stream).unwrap() == 0)
            .count() as f64;
        let p = (-1.0f64).exp();
        let sigma = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((zeros / reps as f64 - p).abs() < 3.0 * sigma);
        // and through the full sampler on a smaller run
        let zeros = (0..2000u64)
            .filter(|&i| sample_ball(10, 1.0, &mut RngStream::new(9, i)).unwrap().is_empty())
            .count() as f64;
        let sigma = (p * (1.0 - p) / 2000.0).sqrt();
        assert!((zeros / 2000.0 - p).abs() < 3.0 * sigma);
    }

    #[test]
    fn radial_law_ks() {
        let d = 4;
        let mut stream = RngStream::new(1, 0);
        let mut t: Vec<f64> = Vec::new();
        while t.len() < 100_000 {
            let ps = sample_ball(d, 3.0, &mut stream).unwrap();
            t.extend(ps.points.iter().map(|p| linalg::norm(p) / 3.0));
        }
        t.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = t.len() as f64;
        let ks = t
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = x.powi(d as i32);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // critical value at level 1e-3: sqrt(-ln(0.0005)/2)/sqrt(n)
        let crit = ((-(0.0005f64).ln()) / 2.0).sqrt() / n.sqrt();
        assert!(ks < crit, "ks {ks} crit {crit}");
    }

    #[test]
    fn shell_mean_and_degenerate_shell() {
        let mut s = RngStream::new(3, 1);
        assert!(sample_shell(4, 2.0, 2.0, &mut s).unwrap().is_empty());
        let reps = 4000u64;
        let total: usize = (0..reps)
            .map(|i| {
                let ps = sample_shell(4, 2.0, 2.5, &mut RngStream::new(3, i)).unwrap();
                assert!(ps.points.iter().all(|p| {
                    let r = linalg::norm(p);
                    (2.0..2.5).contains(&r)
                }));
                ps.len()
            })
            .sum();
        let mean = total as f64 / reps as f64;
        let mu = 2.5f64.powi(4) - 16.0;
        assert!((mu - 23.0625).abs() < 1e-12);
        assert!((mean - mu).abs() < 3.0 * (mu / reps as f64).sqrt());
    }

    #[test]
    fn two_stage_matches_one_stage() {
        // d=4: ball 2.0 then shell to 2.5 vs direct ball 2.5 (mean 39.0625)
        let reps = 10_000u64;
        let mut two = Vec::new();
        let mut one = Vec::new();
        for i in 0..reps {
            let mut s = RngStream::new(21, i);
            let mut ps = sample_ball(4, 2.0, &mut s).unwrap();
            ps.grow(2.5, &mut s).unwrap();
            assert!(ps.points.iter().all(|p| linalg::norm(p) < 2.5));
            two.push(ps.len());
            one.push(sample_ball(4, 2.5, &mut RngStream::new(22, i)).unwrap().len());
        }
        // two-sample chi-square on binned counts
        let edges = [0, 31, 35, 38, 41, 44, 48, usize::MAX];
        let bin = |v: &[usize]| {
            let mut h = vec![0f64; edges.len() - 1];
            for &x in v {
                let b = edges.windows(2).position(|w| x >= w[0] && x < w[1]).unwrap();
                h[b] += 1.0;
            }
            h
        };
        let (a, b) = (bin(&two), bin(&one));
        let stat: f64 = a
            .iter()
            .zip(&b)
            .filter(|(x, y)| **x + **y > 0.0)
            .map(|(x, y)| (x - y).powi(2) / (x + y))
            .sum();
        // 0.999 quantile of chi-square with 6 degrees of freedom
        assert_eq!(edges.len() - 2, 6);
        let crit = 22.4577;
        assert!(stat < crit, "chi2 {stat} crit {crit}");
    }

    #[test]
    fn stream_independence() {
        let n = 10_000u64;
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let a = sample_ball(3, 2.0, &mut RngStream::new(99, 2 * i)).unwrap().len() as f64;
                let b = sample_ball(3, 2.0, &mut RngStream::new(99, 2 * i + 1)).unwrap().len() as f64;
                (a, b)
            })
            .collect();
        let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
        let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let cov: f64 = pairs.iter().map(|(a, b)| (a - ma) * (b - mb)).sum();
        let va: f64 = pairs.iter().map(|(a, _)| (a - ma).powi(2)).sum();
        let vb: f64 = pairs.iter().map(|(_, b)| (b - mb).powi(2)).sum();
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() < 0.02, "corr {corr}");
    }

    #[test]
    fn directions() {
        let mut s = RngStream::new(4, 0);
        let d = 5;
        let alpha: f64 = 0.7;
        let n = 1_000_000;
        let mut mean = vec![0.0; d];
        let mut hits = 0usize;
        for _ in 0..n {
            let u = uniform_direction(d, &mut s);
            assert!((linalg::norm(&u) - 1.0).abs() < 1e-12);
            if u[0] > alpha.cos() {
                hits += 1;
            }
            for (m, x) in mean.iter_mut().zip(&u) {
                *m += x;
            }
        }
        let p = hits as f64 / n as f64;
        let (lo, hi) = mathkit::cap_probability_bounds(d, alpha).unwrap();
        assert!(lo <= p && p <= hi, "{lo} {p} {hi}");
        let exact = mathkit::cap_probability(d, alpha).unwrap();
        assert!((p - exact).abs() < 3.0 * (exact * (1.0 - exact) / n as f64).sqrt());
        let m = linalg::norm(&mean) / n as f64;
        assert!(m < 5e-3, "mean norm {m}");
    }

    #[test]
    fn budget_and_domain_errors() {
        let mut s = RngStream::new(0, 0);
        assert!(matches!(sample_ball(30, 2.0, &mut s), Err(Error::Budget(_))));
        assert!(sample_ball(1, 2.0, &mut s).is_err());
        assert!(sample_ball(3, 0.0, &mut s).is_err());
        assert!(sample_shell(3, 2.0, 1.0, &mut s).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let ps = sample_ball(3, 1.5, &mut RngStream::new(1, 2)).unwrap();
        let s = ps.to_json().unwrap();
        assert!(s.contains("\"R\":1.5") && s.contains("\"stream\":2"));
        assert_eq!(PointSet::from_json(&s).unwrap(), ps);
    }
}
