//! Experiment orchestration: configuration, the adaptive per-replication
//! pipeline, parallel sweeps, aggregation and persistence.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{build_typical_cell_bounded, TypicalCell, VertexVerifier};
use crate::error::{Error, Result};
use crate::facestats::{face_census, FaceCensus};
use crate::functionals::{measure, quantile, FunctionalReport, TheoreticalReference, DEFAULT_DIRECTIONS};
use crate::linalg;
use crate::mathkit::simplex_constants;
use crate::sampler::{sample_ball, PointSet, RngStream};

/// Schema tag written into every CSV and JSON output.
pub const SCHEMA: &str = "typicell-v1";
/// Initial truncation radius.
pub const INITIAL_RADIUS: f64 = 3.0;
/// Radius growth factor after a failed certification.
pub const GROWTH_FACTOR: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d_list: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    pub eps: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub k_max: usize,
    pub n_directions: usize,
    pub out_dir: Option<PathBuf>,
    /// Largest number of Poisson points sampled for one replication.
    pub point_budget: usize,
    /// Largest number of simplicial dual hull facets alive at once.
    pub facet_budget: usize,
    /// Wall-clock budget of a sweep in seconds; replications not started
    /// in time are reported as failed.
    pub time_budget: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            d_list: (2..=9).collect(),
            replications: 200,
            master_seed: 20240601,
            eps: vec![0.1, 0.2, 0.4],
            r_grid: vec![0.8, 0.9, 1.0],
            k_max: 3,
            n_directions: DEFAULT_DIRECTIONS,
            out_dir: None,
            point_budget: 1_000_000,
            facet_budget: 2_000_000,
            time_budget: None,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad value {s:?} for {key}"))))
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Parse(format!("bad value {v:?} for {key}")))
}

/// Parses `2-9` or `2,3,5`.
pub fn parse_d_list(v: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = v.split_once('-') {
        let (a, b): (usize, usize) = (parse_one("d", a)?, parse_one("d", b)?);
        return Ok((a..=b).collect());
    }
    parse_list("d", v)
}

impl ExperimentConfig {
    /// Applies one `key = value` setting; keys mirror the CLI flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "d" => self.d_list = parse_d_list(value)?,
            "reps" => self.replications = parse_one(key, value)?,
            "seed" => self.master_seed = parse_one(key, value)?,
            "eps" => self.eps = parse_list(key, value)?,
            "rgrid" => self.r_grid = parse_list(key, value)?,
            "kmax" => self.k_max = parse_one(key, value)?,
            "dirs" => self.n_directions = parse_one(key, value)?,
            "out" => self.out_dir = Some(PathBuf::from(value.trim())),
            "budget" => self.point_budget = parse_one(key, value)?,
            "facet_budget" => self.facet_budget = parse_one(key, value)?,
            "time_budget" => self.time_budget = Some(parse_one(key, value)?),
            _ => return Err(Error::Parse(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Reads a plain `key = value` file; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Domain("replications must be at least 1".into()));
        }
        if self.d_list.is_empty() || self.d_list.iter().any(|&d| d < 2) {
            return Err(Error::Domain("every dimension must be at least 2".into()));
        }
        if self.point_budget == 0 || self.facet_budget == 0 {
            return Err(Error::Domain("budgets must be positive".into()));
        }
        if !(1..=3).contains(&self.k_max) {
            return Err(Error::Domain("kmax must lie in 1..=3".into()));
        }
        if self.n_directions < 2 {
            return Err(Error::Domain("at least two directions are needed".into()));
        }
        Ok(())
    }
}

fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stream of the point sample of replication `rep` in dimension `d`.
pub fn stream_index(d: usize, rep: usize) -> u64 {
    mix64(((d as u64) << 32) | rep as u64) & !1
}

/// Stream of the random directions of the same replication.
pub fn direction_stream_index(d: usize, rep: usize) -> u64 {
    stream_index(d, rep) | 1
}

/// Per-codimension census values kept in a replication report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub k: usize,
    pub f_count: usize,
    pub f_root_d: f64,
    pub mean_diam: f64,
    pub max_diam: f64,
    pub nr_fraction: Vec<Option<f64>>,
    pub x_r: Vec<u64>,
    pub min_norm: f64,
    pub max_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub d: usize,
    pub rep: usize,
    pub seed: u64,
    pub stream: u64,
    pub ok: bool,
    /// Why the replication failed, if it did.
    pub reason: Option<String>,
    #[serde(rename = "R_final")]
    pub r_final: f64,
    pub growth_steps: usize,
    pub n_points: usize,
    pub n_vertices: usize,
    pub n_facets: usize,
    pub functionals: Option<FunctionalReport>,
    pub census: Vec<CensusRow>,
    /// Names of failed invariant checks; empty when everything held.
    pub invariant_failures: Vec<String>,
    /// `#{z : ‖z‖ <= 2r}` over the radius grid, as an independent count.
    pub norm_counts: Vec<u64>,
}

impl CellReport {
    fn failed(d: usize, rep: usize, seed: u64, reason: String) -> Self {
        CellReport {
            d,
            rep,
            seed,
            stream: stream_index(d, rep),
            ok: false,
            reason: Some(reason),
            r_final: f64::NAN,
            growth_steps: 0,
            n_points: 0,
            n_vertices: 0,
            n_facets: 0,
            functionals: None,
            census: Vec::new(),
            invariant_failures: Vec::new(),
            norm_counts: Vec::new(),
        }
    }

    /// True when the replication finished and every invariant held.
    pub fn passed(&self) -> bool {
        self.ok && self.invariant_failures.is_empty()
    }
}

/// Grows the truncation radius until the cell is certified. Returns the
/// cell with its configuration and the number of growth steps.
pub fn adaptive_cell(config: &ExperimentConfig, d: usize, rep: usize) -> Result<(TypicalCell, PointSet, usize)> {
    let mut stream = RngStream::new(config.master_seed, stream_index(d, rep));
    let mut radius = INITIAL_RADIUS;
    let mut ps = sample_ball(d, radius, &mut stream)?;
    let mut steps = 0;
    loop {
        if ps.len() > config.point_budget {
            return Err(Error::Budget(format!("{} points exceed the point budget", ps.len())));
        }
        match build_typical_cell_bounded(&ps, config.facet_budget) {
            Ok(cell) if cell.truncation_certified => return Ok((cell, ps, steps)),
            Ok(_) | Err(Error::Unbounded) => {}
            Err(e) => return Err(e),
        }
        radius *= GROWTH_FACTOR;
        ps.grow(radius, &mut stream)?;
        steps += 1;
    }
}

/// Runs one replication end to end. Failures are recorded in the report.
pub fn run_replication(config: &ExperimentConfig, d: usize, rep: usize) -> CellReport {
    match run_replication_inner(config, d, rep) {
        Ok(r) => r,
        Err(e) => CellReport::failed(d, rep, config.master_seed, e.to_string()),
    }
}

fn run_replication_inner(config: &ExperimentConfig, d: usize, rep: usize) -> Result<CellReport> {
    let (cell, ps, steps) = adaptive_cell(config, d, rep)?;
    let mut dirs = RngStream::new(config.master_seed, direction_stream_index(d, rep));
    let f = measure(&cell, config.n_directions, &mut dirs)?;
    let k_max = config.k_max.min(d);
    let census = face_census(&cell, &ps, k_max, &config.eps, &config.r_grid)?;
    let norm_counts: Vec<u64> = config
        .r_grid
        .iter()
        .map(|&r| ps.points.iter().filter(|z| linalg::norm(z) <= 2.0 * r).count() as u64)
        .collect();
    let invariant_failures = check_invariants(&cell, &ps, &f, &census, &norm_counts);
    Ok(CellReport {
        d,
        rep,
        seed: config.master_seed,
        stream: stream_index(d, rep),
        ok: true,
        reason: None,
        r_final: ps.truncation_radius,
        growth_steps: steps,
        n_points: ps.len(),
        n_vertices: cell.vertices.len(),
        n_facets: cell.facet_records.len(),
        functionals: Some(f),
        census: census
            .summaries
            .iter()
            .map(|s| CensusRow {
                k: s.k,
                f_count: s.f_count,
                f_root_d: s.f_root_d,
                mean_diam: s.mean_diam,
                max_diam: s.max_diam,
                nr_fraction: s.nr_fraction.clone(),
                x_r: s.x_r.clone(),
                min_norm: s.min_norm,
                max_norm: s.max_norm,
            })
            .collect(),
        invariant_failures,
        norm_counts,
    })
}

/// The per-cell invariant chain; returns the names of violated checks.
pub fn check_invariants(
    cell: &TypicalCell,
    ps: &PointSet,
    f: &FunctionalReport,
    census: &FaceCensus,
    norm_counts: &[u64],
) -> Vec<String> {
    let mut bad = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            bad.push(name.to_string());
        }
    };
    check("inr<=outr", f.inr <= f.outr);
    check("width_lower<=width_upper", f.width_lower <= f.width_upper);
    check("width_upper<=diam", f.width_upper <= f.diam + 1e-8);
    check("diam<=2outr", f.diam <= 2.0 * f.outr + 1e-8);
    check(
        "meanw_in_range",
        f.meanw >= f.width_lower - 3.0 * f.meanw_se && f.meanw <= f.diam + 3.0 * f.meanw_se,
    );
    check("hausdorff>=0", f.hausdorff_lower >= 0.0);
    let verifier = VertexVerifier::new(ps);
    check("verify_vertex", cell.vertices.iter().all(|v| verifier.check(v)));
    check(
        "facet_distance",
        cell.facet_records.iter().all(|r| {
            let h = &cell.halfspaces[r.generator];
            let half = linalg::norm(&r.z) / 2.0;
            (h.plane_distance() - half).abs() <= 1e-12 * half.max(1.0)
        }),
    );
    check("truncation_certified", cell.truncation_certified);
    if let Some(s) = census.summary(1) {
        check("f_count_matches_dual", s.f_count == cell.dual_hull.vertices.len());
        check("x_r_singletons", s.x_r.as_slice() == norm_counts);
    }
    check(
        "face_norm_bound",
        census.faces.iter().flatten().all(|r| r.min_norm >= r.rho - 1e-8),
    );
    bad
}

/// One aggregated row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d: usize,
    pub metric: String,
    pub n: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub q05: Option<f64>,
    pub q50: Option<f64>,
    pub q95: Option<f64>,
    pub reference: Option<f64>,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub schema: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, d: usize, metric: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.d == d && r.metric == metric)
    }

    pub fn mean(&self, d: usize, metric: &str) -> Option<f64> {
        self.row(d, metric).and_then(|r| r.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub table: SweepTable,
    /// Every replication, sorted by `(d, rep)`.
    pub reports: Vec<CellReport>,
}

impl SweepOutcome {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(CellReport::passed)
    }
}

fn fmt_float(x: f64) -> String {
    format!("{x}")
}

/// Metric names with their reference values, in table order.
pub fn metric_catalog(config: &ExperimentConfig) -> Vec<(String, Option<f64>)> {
    let t = TheoreticalReference::new();
    let mut m: Vec<(String, Option<f64>)> = vec![
        ("inr".into(), Some(t.inr)),
        ("outr".into(), Some(t.outr)),
        ("diam".into(), Some(t.diam)),
        ("meanw".into(), Some(t.meanw)),
        ("width_lower".into(), Some(t.width_lower)),
        ("width_upper".into(), Some(t.width_upper)),
        ("hausdorff_lower".into(), Some(t.hausdorff_coefficient)),
        ("vnorm_min".into(), Some(1.0)),
        ("vnorm_q05".into(), Some(1.0)),
        ("vnorm_q95".into(), Some(1.0)),
        ("vnorm_max".into(), Some(1.0)),
        ("n_vertices".into(), None),
        ("growth_steps".into(), None),
    ];
    for k in 1..=config.k_max {
        let v_k = simplex_constants(k).map(|c| c.v_k).ok();
        m.push((format!("f_root_d_k{k}"), v_k));
        m.push((format!("mean_diam_k{k}"), Some(0.0)));
        for e in &config.eps {
            m.push((format!("nr_fraction_k{k}_eps{}", fmt_float(*e)), Some(1.0)));
        }
        for r in &config.r_grid {
            m.push((format!("x_r_root_d_k{k}_r{}", fmt_float(*r)), v_k.map(|v| r.powi(k as i32) * v)));
        }
    }
    m
}

/// Per-replication values of each metric, keyed by metric name.
fn metric_values(report: &CellReport, config: &ExperimentConfig) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    let Some(f) = &report.functionals else { return m };
    let d = report.d as f64;
    for (name, v) in [
        ("inr", f.inr),
        ("outr", f.outr),
        ("diam", f.diam),
        ("meanw", f.meanw),
        ("width_lower", f.width_lower),
        ("width_upper", f.width_upper),
        ("hausdorff_lower", f.hausdorff_lower),
        ("vnorm_min", f.vnorm_min),
        ("vnorm_q05", f.vnorm_q05),
        ("vnorm_q95", f.vnorm_q95),
        ("vnorm_max", f.vnorm_max),
        ("n_vertices", report.n_vertices as f64),
        ("growth_steps", report.growth_steps as f64),
    ] {
        m.insert(name.to_string(), v);
    }
    for row in &report.census {
        let k = row.k;
        m.insert(format!("f_root_d_k{k}"), row.f_root_d);
        if row.f_count > 0 {
            m.insert(format!("mean_diam_k{k}"), row.mean_diam);
        }
        for (e, fr) in config.eps.iter().zip(&row.nr_fraction) {
            if let Some(fr) = fr {
                m.insert(format!("nr_fraction_k{k}_eps{}", fmt_float(*e)), *fr);
            }
        }
        for (r, x) in config.r_grid.iter().zip(&row.x_r) {
            m.insert(format!("x_r_root_d_k{k}_r{}", fmt_float(*r)), (*x as f64).powf(1.0 / d));
        }
    }
    m
}

/// Aggregates reports into the sweep table. The result depends only on the
/// multiset of reports, not on their order.
pub fn aggregate(config: &ExperimentConfig, reports: &[CellReport]) -> SweepTable {
    let mut sorted: Vec<&CellReport> = reports.iter().collect();
    sorted.sort_by_key(|r| (r.d, r.rep));
    let catalog = metric_catalog(config);
    let mut rows = Vec::new();
    for &d in &config.d_list {
        let values: Vec<BTreeMap<String, f64>> = sorted
            .iter()
            .filter(|r| r.d == d && r.ok)
            .map(|r| metric_values(r, config))
            .collect();
        for (metric, reference) in &catalog {
            let mut xs: Vec<f64> = values.iter().filter_map(|m| m.get(metric).copied()).collect();
            let n = xs.len();
            if n == 0 {
                rows.push(SweepRow {
                    d,
                    metric: metric.clone(),
                    n: 0,
                    mean: None,
                    sd: None,
                    q05: None,
                    q50: None,
                    q95: None,
                    reference: *reference,
                    gap: None,
                });
                continue;
            }
            let mean = xs.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            xs.sort_by(f64::total_cmp);
            rows.push(SweepRow {
                d,
                metric: metric.clone(),
                n,
                mean: Some(mean),
                sd: Some(sd),
                q05: Some(quantile(&xs, 0.05)),
                q50: Some(quantile(&xs, 0.5)),
                q95: Some(quantile(&xs, 0.95)),
                reference: *reference,
                gap: reference.map(|r| (mean - r).abs()),
            });
        }
    }
    SweepTable { schema: SCHEMA.to_string(), rows }
}

/// Threads for a sweep: `TYPICELL_THREADS` if set, else rayon's default.
pub fn thread_count() -> usize {
    std::env::var("TYPICELL_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Runs every replication of the grid and aggregates the results.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepOutcome> {
    sweep_with(config, |_| {})
}

/// As [`sweep`], calling `progress` after each replication.
pub fn sweep_with<F: Fn(&CellReport) + Sync>(config: &ExperimentConfig, progress: F) -> Result<SweepOutcome> {
    config.validate()?;
    let items: Vec<(usize, usize)> = config
        .d_list
        .iter()
        .flat_map(|&d| (0..config.replications).map(move |r| (d, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::Domain(e.to_string()))?;
    let start = Instant::now();
    let run = |&(d, rep): &(usize, usize)| {
        let r = match config.time_budget {
            Some(b) if start.elapsed().as_secs_f64() > b => {
                CellReport::failed(d, rep, config.master_seed, format!("time budget of {b} s exhausted"))
            }
            _ => run_replication(config, d, rep),
        };
        progress(&r);
        r
    };
    let mut reports: Vec<CellReport> = pool.install(|| items.par_iter().map(run).collect());
    reports.sort_by_key(|r| (r.d, r.rep));
    let table = aggregate(config, &reports);
    Ok(SweepOutcome { table, reports })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

/// CSV of the sweep table: a `#schema=` line, then the header
/// `d,metric,n,mean,sd,q05,q50,q95,reference,gap`. Missing values are empty.
pub fn table_csv(table: &SweepTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["d", "metric", "n", "mean", "sd", "q05", "q50", "q95", "reference", "gap"])
        .map_err(csv_err)?;
    for r in &table.rows {
        w.write_record([
            r.d.to_string(),
            r.metric.clone(),
            r.n.to_string(),
            opt(r.mean),
            opt(r.sd),
            opt(r.q05),
            opt(r.q50),
            opt(r.q95),
            opt(r.reference),
            opt(r.gap),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w, &table.schema)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn finish_csv(w: csv::Writer<Vec<u8>>, schema: &str) -> Result<String> {
    let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?)
        .map_err(|e| Error::Io(e.to_string()))?;
    Ok(format!("#schema={schema}\n{body}"))
}

/// Parses a table written by [`table_csv`].
pub fn parse_table_csv(text: &str) -> Result<SweepTable> {
    let mut lines = text.splitn(2, '\n');
    let first = lines.next().unwrap_or("");
    let schema = first
        .strip_prefix("#schema=")
        .ok_or_else(|| Error::Parse("missing #schema line".into()))?
        .trim()
        .to_string();
    if schema != SCHEMA {
        return Err(Error::Parse(format!("unsupported schema {schema:?}")));
    }
    let mut rdr = csv::Reader::from_reader(lines.next().unwrap_or("").as_bytes());
    let num = |s: &str, row: usize, col: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse().map(Some).map_err(|_| Error::Parse(format!("row {row}, column {col}: {s:?}")))
    };
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != 10 {
            return Err(Error::Parse(format!("row {}: expected 10 fields", i + 1)));
        }
        rows.push(SweepRow {
            d: rec[0].parse().map_err(|_| Error::Parse(format!("row {}, column d", i + 1)))?,
            metric: rec[1].to_string(),
            n: rec[2].parse().map_err(|_| Error::Parse(format!("row {}, column n", i + 1)))?,
            mean: num(&rec[3], i + 1, "mean")?,
            sd: num(&rec[4], i + 1, "sd")?,
            q05: num(&rec[5], i + 1, "q05")?,
            q50: num(&rec[6], i + 1, "q50")?,
            q95: num(&rec[7], i + 1, "q95")?,
            reference: num(&rec[8], i + 1, "reference")?,
            gap: num(&rec[9], i + 1, "gap")?,
        });
    }
    Ok(SweepTable { schema, rows })
}

/// Census CSV: one row per replication and co-dimension.
pub fn census_csv(config: &ExperimentConfig, reports: &[CellReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["d", "seed", "rep", "k", "f_count", "f_root_d", "mean_diam", "max_diam"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(config.eps.iter().map(|e| format!("nr_fraction_{}", fmt_float(*e))));
    header.extend(config.r_grid.iter().map(|r| format!("x_r_{}", fmt_float(*r))));
    w.write_record(&header).map_err(csv_err)?;
    for rep in reports.iter().filter(|r| r.ok) {
        for c in &rep.census {
            let mut rec = vec![
                rep.d.to_string(),
                rep.seed.to_string(),
                rep.rep.to_string(),
                c.k.to_string(),
                c.f_count.to_string(),
                format!("{}", c.f_root_d),
                if c.mean_diam.is_finite() { format!("{}", c.mean_diam) } else { String::new() },
                format!("{}", c.max_diam),
            ];
            rec.extend(c.nr_fraction.iter().map(|x| opt(*x)));
            rec.extend(c.x_r.iter().map(|x| x.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    finish_csv(w, SCHEMA)
}

/// Replication CSV: one row per replication, failures included with reasons.
pub fn replications_csv(reports: &[CellReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let cols = [
        "d", "rep", "seed", "stream", "status", "reason", "R_final", "growth_steps", "n_points", "n_vertices",
        "n_facets", "inr", "outr", "diam", "meanw", "meanw_se", "width_lower", "width_upper", "width_exact",
        "hausdorff_lower", "vnorm_min", "vnorm_q05", "vnorm_q95", "vnorm_max", "invariant_failures",
    ];
    w.write_record(cols).map_err(csv_err)?;
    for r in reports {
        let f = r.functionals.as_ref();
        let g = |h: fn(&FunctionalReport) -> f64| f.map(|f| format!("{}", h(f))).unwrap_or_default();
        let status = if r.passed() { "ok" } else if r.ok { "invariant_failure" } else { "failed" };
        w.write_record([
            r.d.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.stream.to_string(),
            status.to_string(),
            r.reason.clone().unwrap_or_default(),
            if r.r_final.is_finite() { format!("{}", r.r_final) } else { String::new() },
            r.growth_steps.to_string(),
            r.n_points.to_string(),
            r.n_vertices.to_string(),
            r.n_facets.to_string(),
            g(|f| f.inr),
            g(|f| f.outr),
            g(|f| f.diam),
            g(|f| f.meanw),
            g(|f| f.meanw_se),
            g(|f| f.width_lower),
            g(|f| f.width_upper),
            f.and_then(|f| f.width_exact).map(|x| format!("{x}")).unwrap_or_default(),
            g(|f| f.hausdorff_lower),
            g(|f| f.vnorm_min),
            g(|f| f.vnorm_q05),
            g(|f| f.vnorm_q95),
            g(|f| f.vnorm_max),
            r.invariant_failures.join(";"),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w, SCHEMA)
}

/// JSON mirror of the table, with the schema field.
pub fn table_json(table: &SweepTable) -> Result<String> {
    Ok(serde_json::to_string_pretty(table)?)
}

pub fn parse_table_json(text: &str) -> Result<SweepTable> {
    let t: SweepTable = serde_json::from_str(text)?;
    if t.schema != SCHEMA {
        return Err(Error::Parse(format!("unsupported schema {:?}", t.schema)));
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Writes the table (and, for CSV, the census and replication files) into `dir`.
/// Returns the paths written.
pub fn report(outcome: &SweepOutcome, config: &ExperimentConfig, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    if outcome.table.rows.is_empty() {
        return Err(Error::Domain("empty table".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    match format {
        Format::Csv => {
            put("results.csv", table_csv(&outcome.table)?)?;
            put("census.csv", census_csv(config, &outcome.reports)?)?;
            put("replications.csv", replications_csv(&outcome.reports)?)?;
        }
        Format::Json => put("results.json", table_json(&outcome.table)?)?,
    }
    Ok(written)
}

/// Short human readable summary of failed replications.
pub fn failure_summary(reports: &[CellReport]) -> String {
    let mut s = String::new();
    for r in reports.iter().filter(|r| !r.passed()) {
        let why = r.reason.clone().unwrap_or_else(|| r.invariant_failures.join(","));
        let _ = writeln!(s, "d={} rep={}: {why}", r.d, r.rep);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            d_list: vec![2, 3],
            replications: 4,
            master_seed: 11,
            n_directions: 256,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn config_text_roundtrip() {
        let c = ExperimentConfig::from_text(
            "# comment\nd = 2-4\nreps = 7\nseed=5\neps = 0.1, 0.3\nrgrid=1.0\nkmax=2\ndirs=128\nbudget=1000\n",
        )
        .unwrap();
        assert_eq!(c.d_list, vec![2, 3, 4]);
        assert_eq!(c.replications, 7);
        assert_eq!(c.eps, vec![0.1, 0.3]);
        assert_eq!(c.k_max, 2);
        assert!(ExperimentConfig::from_text("reps = 0").is_err());
        assert!(ExperimentConfig::from_text("colour = blue").is_err());
        assert!(ExperimentConfig::from_text("d = 1").is_err());
    }

    #[test]
    fn streams_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for d in 2..=9 {
            for r in 0..500 {
                assert!(seen.insert(stream_index(d, r)));
                assert!(seen.insert(direction_stream_index(d, r)));
            }
        }
    }

    #[test]
    fn replication_is_deterministic_and_passes() {
        let c = small();
        for rep in 0..4 {
            let a = run_replication(&c, 2, rep);
            let b = run_replication(&c, 2, rep);
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            assert!(a.passed(), "{:?} {:?}", a.reason, a.invariant_failures);
        }
    }

    #[test]
    fn budget_failure_is_reported() {
        let c = ExperimentConfig { point_budget: 3, ..small() };
        let r = run_replication(&c, 3, 0);
        assert!(!r.ok);
        assert!(r.reason.unwrap().contains("budget"));
    }

    #[test]
    fn aggregation_ignores_order_and_flags_missing() {
        let c = small();
        let out = sweep(&c).unwrap();
        let mut shuffled = out.reports.clone();
        shuffled.reverse();
        assert_eq!(aggregate(&c, &shuffled), out.table);
        assert_eq!(out.table.rows.len(), c.d_list.len() * metric_catalog(&c).len());
        // d = 2 has no co-dimension 3 faces
        assert_eq!(out.table.row(2, "f_root_d_k3").unwrap().n, 0);
        assert_eq!(out.table.row(3, "inr").unwrap().reference, Some(0.5));
        assert_eq!(out.table.row(3, "f_root_d_k1").unwrap().reference, Some(2.0));
        let csv = table_csv(&out.table).unwrap();
        assert!(csv.starts_with("#schema=typicell-v1\nd,metric,n,mean,sd,q05,q50,q95,reference,gap\n"));
        assert_eq!(parse_table_csv(&csv).unwrap(), out.table);
        assert_eq!(parse_table_json(&table_json(&out.table).unwrap()).unwrap(), out.table);
        assert!(parse_table_csv(&csv.replace("typicell-v1", "typicell-v0")).is_err());
    }
}
