//! Disorder-ensemble batch runner: seeded chain realizations, divergence
//! curves per region size, weighted slope fits, and the slope-derivative
//! transition estimate, emitted as CSV/JSON plot data.
//!
//! Determinism contract: every work item (delta index, realization index)
//! derives its own seed from the master seed, items are aggregated in
//! canonical order, and all file output uses fixed number formatting, so
//! output bytes depend only on the config — never on worker count or
//! scheduling.

use crate::entropy::{dmax_region_curve, infinite_time_average, pinched_smooth_floor};
use crate::error::{Error, Result};
use crate::lattice::{neel_variant_state, Boundary, ChainSpec, MAX_SITES, MIN_NEEL_SITES};
use crate::rng::derive_seed;
use crate::thermal::{beta_for_mean_energy, ThermalKind};
use crate::tol;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Labels used in config files, CSV columns, and JSON keys.
pub fn kind_label(kind: ThermalKind) -> &'static str {
    match kind {
        ThermalKind::ReducedHamiltonianGibbs => "reduced-hamiltonian",
        ThermalKind::ReducedGlobalGibbs => "reduced-global",
    }
}

fn parse_kind(s: &str) -> Result<ThermalKind> {
    match s {
        "reduced-hamiltonian" => Ok(ThermalKind::ReducedHamiltonianGibbs),
        "reduced-global" => Ok(ThermalKind::ReducedGlobalGibbs),
        other => Err(Error::Config(format!(
            "unknown target kind {other:?} (expected reduced-hamiltonian, reduced-global, or both)"
        ))),
    }
}

fn kind_rank(kind: ThermalKind) -> usize {
    match kind {
        ThermalKind::ReducedHamiltonianGibbs => 0,
        ThermalKind::ReducedGlobalGibbs => 1,
    }
}

/// Full description of one batch run.  Round-trips losslessly through the
/// flat `key = value` file format (floats print in shortest-roundtrip form).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sites: usize,
    /// Disorder strengths, strictly increasing.
    pub deltas: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    /// Window widths |R|, strictly increasing, each < sites.
    pub region_sizes: Vec<usize>,
    /// Thermal targets to compare against, in canonical order.
    pub targets: Vec<ThermalKind>,
    /// Smoothing/bound parameter echoed into the bath-size illustrations.
    pub epsilon: f64,
    pub out_dir: String,
    /// Worker threads; 0 means one per core.
    pub workers: usize,
    /// Largest region size admitted to slope fits; 0 admits every size.
    pub fit_max_size: usize,
}

impl ExperimentConfig {
    /// Desk-scale defaults: minutes, not hours.
    pub fn desk_default() -> Self {
        Self {
            sites: 10,
            deltas: vec![0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0],
            realizations: 20,
            seed: 7,
            region_sizes: vec![1, 2, 3, 4, 5],
            targets: vec![
                ThermalKind::ReducedHamiltonianGibbs,
                ThermalKind::ReducedGlobalGibbs,
            ],
            epsilon: 0.1,
            out_dir: "out".into(),
            workers: 0,
            fit_max_size: 0,
        }
    }

    /// Largest run the dense sector budget supports; expect hours.
    pub fn full_preset() -> Self {
        Self {
            sites: MAX_SITES,
            realizations: 100,
            ..Self::desk_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_NEEL_SITES..=MAX_SITES).contains(&self.sites) {
            return Err(Error::BadChainLength {
                l: self.sites,
                min: MIN_NEEL_SITES,
                max: MAX_SITES,
            });
        }
        if self.deltas.is_empty() {
            return Err(Error::Config("deltas grid must be non-empty".into()));
        }
        for w in self.deltas.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Config(format!(
                    "deltas must be strictly increasing (saw {} then {})",
                    w[0], w[1]
                )));
            }
        }
        if self.deltas.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::Config("deltas must be finite and >= 0".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be >= 1".into()));
        }
        if self.region_sizes.is_empty() {
            return Err(Error::Config("region_sizes must be non-empty".into()));
        }
        for w in self.region_sizes.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config(
                    "region_sizes must be strictly increasing".into(),
                ));
            }
        }
        let max_width = *self.region_sizes.last().unwrap();
        if self.region_sizes[0] == 0 || max_width >= self.sites {
            return Err(Error::BadRegion {
                anchor: 0,
                end: max_width,
                l: self.sites,
            });
        }
        if self.targets.is_empty() {
            return Err(Error::Config("at least one target kind required".into()));
        }
        let mut ranks: Vec<usize> = self.targets.iter().map(|k| kind_rank(*k)).collect();
        ranks.dedup();
        if ranks.len() != self.targets.len() || ranks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "targets must be unique and in canonical order".into(),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::BadEpsilon {
                epsilon: self.epsilon,
            });
        }
        if self.fit_max_size != 0 && self.fit_max_size < self.region_sizes[0] {
            return Err(Error::Config(
                "fit_max_size excludes every region size".into(),
            ));
        }
        Ok(())
    }

    fn targets_token(&self) -> String {
        if self.targets.len() == 2 {
            "both".into()
        } else {
            kind_label(self.targets[0]).into()
        }
    }

    /// Serialize as the flat key-value file format.
    pub fn to_file_string(&self) -> String {
        let join_f64 = |xs: &[f64]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let join_usize = |xs: &[usize]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        let _ = writeln!(s, "# disorder ensemble run configuration");
        let _ = writeln!(s, "sites = {}", self.sites);
        let _ = writeln!(s, "deltas = {}", join_f64(&self.deltas));
        let _ = writeln!(s, "realizations = {}", self.realizations);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "region_sizes = {}", join_usize(&self.region_sizes));
        let _ = writeln!(s, "targets = {}", self.targets_token());
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "out_dir = {}", self.out_dir);
        let _ = writeln!(s, "workers = {}", self.workers);
        let _ = writeln!(s, "fit_max_size = {}", self.fit_max_size);
        s
    }

    /// Parse the flat key-value format.  Unknown or repeated keys are
    /// rejected; keys absent from the file keep their desk-default values.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::desk_default();
        let mut seen: Vec<&str> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if seen.contains(&key) {
                return Err(Error::Config(format!("duplicate key {key:?}")));
            }
            let bad = |what: &str| {
                Error::Config(format!("line {}: cannot parse {what} from {value:?}", lineno + 1))
            };
            match key {
                "sites" => cfg.sites = value.parse().map_err(|_| bad("sites"))?,
                "deltas" => {
                    cfg.deltas = split_list(value)
                        .map(|v| v.parse::<f64>().map_err(|_| bad("deltas")))
                        .collect::<Result<_>>()?
                }
                "realizations" => {
                    cfg.realizations = value.parse().map_err(|_| bad("realizations"))?
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "region_sizes" => {
                    cfg.region_sizes = split_list(value)
                        .map(|v| v.parse::<usize>().map_err(|_| bad("region_sizes")))
                        .collect::<Result<_>>()?
                }
                "targets" => {
                    cfg.targets = if value == "both" {
                        vec![
                            ThermalKind::ReducedHamiltonianGibbs,
                            ThermalKind::ReducedGlobalGibbs,
                        ]
                    } else {
                        split_list(value).map(parse_kind).collect::<Result<_>>()?
                    }
                }
                "epsilon" => cfg.epsilon = value.parse().map_err(|_| bad("epsilon"))?,
                "out_dir" => cfg.out_dir = value.to_string(),
                "workers" => cfg.workers = value.parse().map_err(|_| bad("workers"))?,
                "fit_max_size" => {
                    cfg.fit_max_size = value.parse().map_err(|_| bad("fit_max_size"))?
                }
                other => return Err(Error::Config(format!("unknown key {other:?}"))),
            }
            seen.push(key);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|v| !v.is_empty())
}

/// Aggregated statistics for one (delta, region size, target) cell.
#[derive(Debug, Clone)]
pub struct CurveCell {
    pub delta: f64,
    pub width: usize,
    pub kind: ThermalKind,
    /// Mean divergence in bits over the surviving realizations.
    pub mean_bits: f64,
    /// Sample standard deviation / sqrt(count); 0 when count < 2.
    pub stderr: f64,
    pub count: usize,
}

/// Weighted-least-squares line through mean divergence vs region size.
#[derive(Debug, Clone)]
pub struct SlopeRow {
    pub delta: f64,
    pub kind: ThermalKind,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
}

/// What part of a work item a recorded failure took down.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureScope {
    /// The whole realization (disorder draw, diagonalization, beta match).
    Realization,
    /// A single curve point.
    Point { width: usize, kind: ThermalKind },
}

#[derive(Debug, Clone)]
pub struct FailureRecord {
    pub delta_index: usize,
    pub delta: f64,
    pub realization: u64,
    pub scope: FailureScope,
    pub message: String,
}

impl FailureRecord {
    fn scope_label(&self) -> String {
        match &self.scope {
            FailureScope::Realization => "realization".into(),
            FailureScope::Point { width, kind } => {
                format!("width={} kind={}", width, kind_label(*kind))
            }
        }
    }
}

/// Slope-derivative transition estimate over the delta grid.
#[derive(Debug, Clone)]
pub struct TransitionEstimate {
    /// Grid point with the steepest slope growth.
    pub delta_star: f64,
    /// Contiguous delta interval around the peak where the derivative stays
    /// at or above half its maximum.
    pub region: (f64, f64),
    /// Centered finite differences at the interior grid points.
    pub derivative: Vec<(f64, f64)>,
}

/// Ensemble mean of the smoothed divergence of the pinched smallest region
/// against its thermal target: 2^mean_bits illustrates the bath-size floor.
#[derive(Debug, Clone)]
pub struct FloorCell {
    pub delta: f64,
    pub kind: ThermalKind,
    /// Region size the floor was evaluated at (the smallest configured).
    pub width: usize,
    /// Smoothing radius 2 sqrt(epsilon) used for the evaluation.
    pub radius: f64,
    pub mean_bits: f64,
    pub count: usize,
}

/// How often the per-realization curve was non-decreasing in region size;
/// recorded as a diagnostic, never asserted per instance.
#[derive(Debug, Clone)]
pub struct MonotoneStat {
    pub delta: f64,
    pub kind: ThermalKind,
    pub monotone: usize,
    pub complete: usize,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub config: ExperimentConfig,
    /// Sorted by (delta, width, target kind) ascending.
    pub curves: Vec<CurveCell>,
    /// Sorted by (delta, target kind); deltas whose fit was impossible
    /// (fewer than two populated sizes) are absent.
    pub slopes: Vec<SlopeRow>,
    /// One entry per configured target kind; None when fewer than four
    /// deltas carry a fitted slope.
    pub transitions: Vec<(ThermalKind, Option<TransitionEstimate>)>,
    pub monotone: Vec<MonotoneStat>,
    /// Absent entirely when the smoothing radius 2 sqrt(epsilon) is >= 1.
    pub floors: Vec<FloorCell>,
    pub failures: Vec<FailureRecord>,
}

impl EnsembleResult {
    pub fn cell(&self, delta: f64, width: usize, kind: ThermalKind) -> Option<&CurveCell> {
        self.curves
            .iter()
            .find(|c| c.delta == delta && c.width == width && c.kind == kind)
    }

    pub fn slope(&self, delta: f64, kind: ThermalKind) -> Option<&SlopeRow> {
        self.slopes
            .iter()
            .find(|s| s.delta == delta && s.kind == kind)
    }

    pub fn floor(&self, delta: f64, kind: ThermalKind) -> Option<&FloorCell> {
        self.floors
            .iter()
            .find(|f| f.delta == delta && f.kind == kind)
    }

    /// Exact failure accounting: for every cell, surviving count plus the
    /// failures that touch the cell must equal the configured realizations.
    pub fn reconciles(&self) -> bool {
        self.curves.iter().all(|cell| {
            let di = self
                .config
                .deltas
                .iter()
                .position(|d| *d == cell.delta)
                .unwrap();
            let touching = self
                .failures
                .iter()
                .filter(|f| {
                    f.delta_index == di
                        && match &f.scope {
                            FailureScope::Realization => true,
                            FailureScope::Point { width, kind } => {
                                *width == cell.width && *kind == cell.kind
                            }
                        }
                })
                .count();
            cell.count + touching == self.config.realizations
        })
    }
}

/// Per-item output produced by the worker pool; failures are data here, not
/// errors, so one bad realization never aborts its siblings.
struct ItemOutcome {
    /// `values[k * widths + w]`: divergence in bits, or None when that point
    /// (or the whole realization) failed.
    values: Vec<Option<f64>>,
    /// Per target kind: smoothed divergence of the pinched smallest region,
    /// in bits.  Diagnostic only — a None here is not a failure record.
    floors: Vec<Option<f64>>,
    failures: Vec<FailureRecord>,
}

fn run_item(cfg: &ExperimentConfig, delta_index: usize, realization: u64) -> ItemOutcome {
    let delta = cfg.deltas[delta_index];
    let slots = cfg.targets.len() * cfg.region_sizes.len();
    let fail_all = |message: String| ItemOutcome {
        values: vec![None; slots],
        floors: vec![None; cfg.targets.len()],
        failures: vec![FailureRecord {
            delta_index,
            delta,
            realization,
            scope: FailureScope::Realization,
            message,
        }],
    };

    let spec = ChainSpec {
        sites: cfg.sites,
        delta,
        boundary: Boundary::Periodic,
        seed: derive_seed(cfg.seed, delta_index as u64, 0),
    };
    let chain = match spec.realize(realization) {
        Ok(c) => c,
        Err(e) => return fail_all(format!("disorder draw: {e}")),
    };
    let spectra = match chain.spectra() {
        Ok(s) => s,
        Err(e) => return fail_all(format!("sector diagonalization: {e}")),
    };
    let psi0 = match neel_variant_state(cfg.sites) {
        Ok(p) => p,
        Err(e) => return fail_all(format!("initial state: {e}")),
    };
    let eq = match infinite_time_average(&psi0, &spectra) {
        Ok(eq) => eq.with_provenance(realization, "neel-variant"),
        Err(e) => return fail_all(format!("dephasing: {e}")),
    };
    let beta = match beta_for_mean_energy(&spectra.energies(), eq.energy(), tol::BETA_TOL) {
        Ok(b) => b,
        Err(e) => return fail_all(format!("beta match: {e}")),
    };

    let mut values = vec![None; slots];
    let mut floors = vec![None; cfg.targets.len()];
    let mut failures = Vec::new();
    let radius = 2.0 * cfg.epsilon.sqrt();
    for (k, kind) in cfg.targets.iter().enumerate() {
        let curve = dmax_region_curve(&chain, &spectra, &eq, beta, &cfg.region_sizes, *kind, 0);
        for (w, (width, point)) in curve.into_iter().enumerate() {
            match point {
                Ok(d) => values[k * cfg.region_sizes.len() + w] = Some(d.value),
                Err(e) => failures.push(FailureRecord {
                    delta_index,
                    delta,
                    realization,
                    scope: FailureScope::Point { width, kind: *kind },
                    message: e.to_string(),
                }),
            }
        }
        // the smoothed op rejects radius >= 1; past that the floor is
        // undefined rather than an error
        if radius < 1.0 {
            floors[k] = pinched_smooth_floor(
                &chain,
                &spectra,
                &eq,
                beta,
                cfg.region_sizes[0],
                *kind,
                0,
                radius,
            )
            .ok();
        }
    }
    ItemOutcome { values, floors, failures }
}

fn threshold_check(failed: usize, total: usize) -> Result<()> {
    if failed * 100 > total * tol::FAILURE_LIMIT_PERCENT as usize {
        return Err(Error::FailureThreshold {
            failed,
            total,
            limit_percent: tol::FAILURE_LIMIT_PERCENT,
        });
    }
    Ok(())
}

/// Run the whole grid.  Deterministic for a fixed config: per-item seeds
/// derive from (master seed, delta index, realization index) and aggregation
/// walks items in canonical order regardless of how the pool scheduled them.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleResult> {
    cfg.validate()?;
    let items: Vec<(usize, u64)> = (0..cfg.deltas.len())
        .flat_map(|di| (0..cfg.realizations as u64).map(move |r| (di, r)))
        .collect();
    let compute = || -> Vec<ItemOutcome> {
        items
            .par_iter()
            .map(|&(di, r)| run_item(cfg, di, r))
            .collect()
    };
    let outcomes = if cfg.workers == 0 {
        compute()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(compute)
    };

    let failed_items = outcomes.iter().filter(|o| !o.failures.is_empty()).count();
    threshold_check(failed_items, outcomes.len())?;

    let widths = &cfg.region_sizes;
    let radius = 2.0 * cfg.epsilon.sqrt();
    let mut curves = Vec::new();
    let mut slopes = Vec::new();
    let mut monotone = Vec::new();
    let mut floors = Vec::new();
    let mut failures = Vec::new();
    for (di, &delta) in cfg.deltas.iter().enumerate() {
        let base = di * cfg.realizations;
        let item_range = &outcomes[base..base + cfg.realizations];
        for (k, kind) in cfg.targets.iter().enumerate() {
            let mut cells = Vec::with_capacity(widths.len());
            for (w, &width) in widths.iter().enumerate() {
                let samples: Vec<f64> = item_range
                    .iter()
                    .filter_map(|o| o.values[k * widths.len() + w])
                    .collect();
                let (mean, stderr) = mean_and_stderr(&samples);
                cells.push(CurveCell {
                    delta,
                    width,
                    kind: *kind,
                    mean_bits: mean,
                    stderr,
                    count: samples.len(),
                });
            }
            let mut complete = 0usize;
            let mut rising = 0usize;
            for o in item_range {
                let vals: Vec<f64> = (0..widths.len())
                    .filter_map(|w| o.values[k * widths.len() + w])
                    .collect();
                if vals.len() == widths.len() {
                    complete += 1;
                    if vals.windows(2).all(|p| p[1] >= p[0]) {
                        rising += 1;
                    }
                }
            }
            monotone.push(MonotoneStat {
                delta,
                kind: *kind,
                monotone: rising,
                complete,
            });

            if radius < 1.0 {
                let samples: Vec<f64> =
                    item_range.iter().filter_map(|o| o.floors[k]).collect();
                let (mean, _) = mean_and_stderr(&samples);
                floors.push(FloorCell {
                    delta,
                    kind: *kind,
                    width: widths[0],
                    radius,
                    mean_bits: mean,
                    count: samples.len(),
                });
            }

            let points: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| {
                    c.count > 0 && (cfg.fit_max_size == 0 || c.width <= cfg.fit_max_size)
                })
                .map(|c| (c.width as f64, c.mean_bits))
                .collect();
            if let Ok(fit) = fit_slope(&points, None) {
                slopes.push(SlopeRow {
                    delta,
                    kind: *kind,
                    slope: fit.slope,
                    slope_stderr: fit.slope_stderr,
                    intercept: fit.intercept,
                });
            }
            curves.extend(cells);
        }
        for o in item_range {
            failures.extend(o.failures.iter().cloned());
        }
    }
    // sort (delta, width, kind); aggregation produced (delta, kind, width)
    curves.sort_by(|a, b| {
        a.delta
            .total_cmp(&b.delta)
            .then(a.width.cmp(&b.width))
            .then(kind_rank(a.kind).cmp(&kind_rank(b.kind)))
    });

    let transitions = cfg
        .targets
        .iter()
        .map(|kind| {
            let pts: Vec<(f64, f64)> = slopes
                .iter()
                .filter(|s| s.kind == *kind && s.slope.is_finite())
                .map(|s| (s.delta, s.slope))
                .collect();
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            (*kind, transition_estimate(&xs, &ys).ok())
        })
        .collect();

    Ok(EnsembleResult {
        config: cfg.clone(),
        curves,
        slopes,
        transitions,
        monotone,
        floors,
        failures,
    })
}

fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = samples.len() as f64;
    let mut acc = crate::combinatorics::KahanSum::new();
    for s in samples {
        acc.add(*s);
    }
    let mean = acc.value() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let mut sq = crate::combinatorics::KahanSum::new();
    for s in samples {
        sq.add((s - mean) * (s - mean));
    }
    let var = sq.value() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Weighted least-squares line fit.  `weights` defaults to uniform; the
/// slope's standard error comes from the weighted residual variance (zero
/// when the fit is exact or has no spare degrees of freedom).
pub fn fit_slope(points: &[(f64, f64)], weights: Option<&[f64]>) -> Result<LineFit> {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 2 {
        return Err(Error::Config(
            "line fit needs at least two distinct abscissae".into(),
        ));
    }
    if let Some(w) = weights {
        if w.len() != points.len() {
            return Err(Error::DimensionMismatch {
                left: w.len(),
                right: points.len(),
                context: "fit weights vs points",
            });
        }
        if w.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::Config("fit weights must be finite and > 0".into()));
        }
    }
    let w_at = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &(x, y)) in points.iter().enumerate() {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Config("fit points must be finite".into()));
        }
        let w = w_at(i);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if !(det > 0.0) {
        return Err(Error::Config("degenerate fit design".into()));
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let dof = points.len() as f64 - 2.0;
    let slope_stderr = if dof > 0.0 {
        let mut chi2 = 0.0;
        for (i, &(x, y)) in points.iter().enumerate() {
            let r = y - intercept - slope * x;
            chi2 += w_at(i) * r * r;
        }
        ((chi2 / dof) * (sw / det)).max(0.0).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        slope_stderr,
        intercept,
    })
}

/// Locate where the slope grows fastest in delta: centered finite
/// differences at interior grid points, peak position, and the contiguous
/// run around the peak where the derivative stays >= half its maximum.
/// A flat derivative (linear slopes) makes the region span the whole
/// interior — the estimate is only meaningful when the slopes bend upward.
pub fn transition_estimate(deltas: &[f64], slopes: &[f64]) -> Result<TransitionEstimate> {
    if deltas.len() != slopes.len() {
        return Err(Error::DimensionMismatch {
            left: deltas.len(),
            right: slopes.len(),
            context: "delta grid vs slope series",
        });
    }
    if deltas.len() < 4 {
        return Err(Error::Config(
            "transition estimate needs at least 4 delta points".into(),
        ));
    }
    for w in deltas.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Config("deltas must be strictly increasing".into()));
        }
    }
    if slopes.iter().any(|s| !s.is_finite()) {
        return Err(Error::Config("slope series must be finite".into()));
    }
    let derivative: Vec<(f64, f64)> = (1..deltas.len() - 1)
        .map(|i| {
            (
                deltas[i],
                (slopes[i + 1] - slopes[i - 1]) / (deltas[i + 1] - deltas[i - 1]),
            )
        })
        .collect();
    let peak = derivative
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    let half = derivative[peak].1 / 2.0;
    let mut lo = peak;
    while lo > 0 && derivative[lo - 1].1 >= half {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < derivative.len() && derivative[hi + 1].1 >= half {
        hi += 1;
    }
    Ok(TransitionEstimate {
        delta_star: derivative[peak].0,
        region: (derivative[lo].0, derivative[hi].0),
        derivative,
    })
}

/// Create the output directory and prove it is writable before any
/// computation is spent.
pub fn prepare_output_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"ok").map_err(|e| Error::io(&probe, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))?;
    Ok(dir)
}

fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// `curves.csv` bytes: one row per (delta, region size, target) cell.
pub fn curves_csv(result: &EnsembleResult) -> String {
    let mut s = String::from("delta,region_size,target_kind,mean_dmax_bits,stderr,count\n");
    for c in &result.curves {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt17(c.delta),
            c.width,
            kind_label(c.kind),
            fmt17(c.mean_bits),
            fmt17(c.stderr),
            c.count
        );
    }
    s
}

/// `slopes.csv` bytes: one row per (delta, target) fitted line.
pub fn slopes_csv(result: &EnsembleResult) -> String {
    let mut s = String::from("delta,target_kind,slope,slope_stderr,intercept\n");
    for row in &result.slopes {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt17(row.delta),
            kind_label(row.kind),
            fmt17(row.slope),
            fmt17(row.slope_stderr),
            fmt17(row.intercept)
        );
    }
    s
}

fn json_f64(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

/// `summary.json` contents: config echo, transition estimates, bath-size
/// bound illustrations for the smallest region, curve-shape diagnostics, and
/// the per-realization failure log.
pub fn summary_json(result: &EnsembleResult) -> serde_json::Value {
    let cfg = &result.config;
    let transition: serde_json::Map<String, serde_json::Value> = result
        .transitions
        .iter()
        .map(|(kind, est)| {
            let value = match est {
                None => serde_json::Value::Null,
                Some(t) => serde_json::json!({
                    "delta_star": json_f64(t.delta_star),
                    "region": [json_f64(t.region.0), json_f64(t.region.1)],
                    "derivative": t
                        .derivative
                        .iter()
                        .map(|(d, v)| serde_json::json!([json_f64(*d), json_f64(*v)]))
                        .collect::<Vec<_>>(),
                }),
            };
            (kind_label(*kind).to_string(), value)
        })
        .collect();

    let smallest = cfg.region_sizes[0];
    let bounds: Vec<serde_json::Value> = result
        .curves
        .iter()
        .filter(|c| c.width == smallest && c.count > 0)
        .map(|c| {
            let upper = 2f64.powf(c.mean_bits) / (cfg.epsilon * cfg.epsilon);
            let ceil = if upper < 1e15 {
                serde_json::json!(upper.ceil() as u64)
            } else {
                serde_json::Value::Null
            };
            let floor = result.floor(c.delta, c.kind).filter(|f| f.count > 0);
            let (lower, lower_note) = match floor {
                Some(f) => (
                    json_f64(2f64.powf(f.mean_bits)),
                    "floor from the smoothed divergence of the pinched region state; \
                     pinching in the target eigenbasis fixes the target and never \
                     increases the smoothed divergence, so the floor stays valid",
                ),
                None => (
                    serde_json::Value::Null,
                    "floor undefined: the smoothing radius 2*sqrt(epsilon) reaches 1",
                ),
            };
            serde_json::json!({
                "delta": json_f64(c.delta),
                "target_kind": kind_label(c.kind),
                "region_size": c.width,
                "mean_dmax_bits": json_f64(c.mean_bits),
                "epsilon": json_f64(cfg.epsilon),
                "bath_size_upper": json_f64(upper),
                "bath_size_upper_ceil": ceil,
                "bath_size_lower": lower,
                "smoothing_radius": json_f64(2.0 * cfg.epsilon.sqrt()),
                "note": lower_note,
            })
        })
        .collect();

    let monotone: Vec<serde_json::Value> = result
        .monotone
        .iter()
        .map(|m| {
            serde_json::json!({
                "delta": json_f64(m.delta),
                "target_kind": kind_label(m.kind),
                "monotone": m.monotone,
                "complete": m.complete,
            })
        })
        .collect();

    let failures: Vec<serde_json::Value> = result
        .failures
        .iter()
        .map(|f| {
            serde_json::json!({
                "delta": json_f64(f.delta),
                "realization": f.realization,
                "scope": f.scope_label(),
                "message": f.message,
            })
        })
        .collect();

    let failed_items = {
        let mut seen: Vec<(usize, u64)> = result
            .failures
            .iter()
            .map(|f| (f.delta_index, f.realization))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    };

    serde_json::json!({
        "config": {
            "sites": cfg.sites,
            "deltas": cfg.deltas.iter().map(|d| json_f64(*d)).collect::<Vec<_>>(),
            "realizations": cfg.realizations,
            "seed": cfg.seed,
            "region_sizes": cfg.region_sizes,
            "targets": cfg.targets_token(),
            "epsilon": json_f64(cfg.epsilon),
            "out_dir": cfg.out_dir,
            "workers": cfg.workers,
            "fit_max_size": cfg.fit_max_size,
        },
        "transition": transition,
        "bath_bound_illustrations": bounds,
        "curve_monotonicity": monotone,
        "failures": failures,
        "items_total": cfg.deltas.len() * cfg.realizations,
        "items_failed": failed_items,
        "literature": {
            "infinite_chain_delta_c": 7.0,
            "note": "commonly quoted critical disorder of the infinite chain; \
                     contextual reference only, never asserted",
        },
    })
}

/// Write `curves.csv`, `slopes.csv`, and `summary.json` into the configured
/// output directory; returns the paths in that order.
pub fn emit_outputs(result: &EnsembleResult, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = prepare_output_dir(cfg)?;
    let write = |name: &str, bytes: String| -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    let summary = format!(
        "{}\n",
        serde_json::to_string_pretty(&summary_json(result))
            .map_err(|e| Error::Config(format!("summary serialization: {e}")))?
    );
    Ok(vec![
        write("curves.csv", curves_csv(result))?,
        write("slopes.csv", slopes_csv(result))?,
        write("summary.json", summary)?,
    ])
}

/// Validate, prove the output directory writable, run, then emit.
pub fn run_and_emit(cfg: &ExperimentConfig) -> Result<(EnsembleResult, Vec<PathBuf>)> {
    cfg.validate()?;
    prepare_output_dir(cfg)?;
    let result = run_ensemble(cfg)?;
    let files = emit_outputs(&result, cfg)?;
    Ok((result, files))
}
