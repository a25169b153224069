//! Replicate engine for the urn and the configuration model.
//!
//! Replicate `i` of a run with base seed `s` always draws from
//! `urnlab_core::seed::replicate_rng(s, i)`, so results do not depend on how
//! rayon schedules the work. Counts are summed as integers and real-valued
//! aggregates are reduced in replicate order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use urnlab_core::bounds::{bound_k, bound_tau, BoundInputs, BoundReport};
use urnlab_core::config::{self, SelectionPolicy};
use urnlab_core::seed::{replicate_rng, UrnRng};
use urnlab_core::stats::{log_log_fit, quantile_sorted, wilson_interval, LineFit, Z95};
use urnlab_core::urn::{n_t, predicted_x_unchecked, step, Event, EventSet, PreparedEvent, UrnParams};
use urnlab_core::Error;

use crate::error::{AppError, AppResult};

/// Upper limit on `replicates * grid points` held by [`ensemble_stats`].
pub const ENSEMBLE_CELL_CAP: u64 = 50_000_000;

/// Minimum number of usable grid points for an exponent fit.
pub const MIN_FIT_POINTS: usize = 5;

/// A binomial frequency with its 95% intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clopper_pearson: Option<(f64, f64)>,
}

impl Frequency {
    pub fn new(successes: u64, trials: u64, clopper_pearson: bool) -> Self {
        let (ci_low, ci_high) = wilson_interval(successes, trials, Z95);
        let p_hat = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        Frequency {
            successes,
            trials,
            p_hat,
            ci_low: ci_low.min(p_hat),
            ci_high: ci_high.max(p_hat),
            clopper_pearson: clopper_pearson.then(|| clopper_pearson_interval(successes, trials)),
        }
    }
}

/// Exact two-sided 95% Clopper-Pearson interval.
pub fn clopper_pearson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let (s, n) = (successes as f64, trials as f64);
    let low = if successes == 0 {
        0.0
    } else {
        Beta::new(s, n - s + 1.0).map(|b| b.inverse_cdf(0.025)).unwrap_or(0.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        Beta::new(s + 1.0, n - s).map(|b| b.inverse_cdf(0.975)).unwrap_or(1.0)
    };
    (low, high)
}

/// Result of [`estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub event: Event,
    pub params: UrnParams,
    pub replicates: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clopper_pearson: Option<(f64, f64)>,
    pub seed_base: u64,
}

impl EstimateReport {
    fn from_frequency(event: Event, params: UrnParams, f: Frequency, seed_base: u64) -> Self {
        EstimateReport {
            event,
            params,
            replicates: f.trials,
            successes: f.successes,
            p_hat: f.p_hat,
            ci_low: f.ci_low,
            ci_high: f.ci_high,
            clopper_pearson: f.clopper_pearson,
            seed_base,
        }
    }
}

/// Runs one path until every event in `set` is settled.
pub fn simulate_events(params: &UrnParams, set: &mut EventSet, rng: &mut UrnRng) -> AppResult<()> {
    set.reset();
    let mut state = params.initial_state();
    if set.observe(params, &state) {
        return Ok(());
    }
    loop {
        let (next, _) = step(&state, params, rng)?;
        state = next;
        if set.observe(params, &state) {
            return Ok(());
        }
    }
}

/// Success counts per event over `replicates` independent paths. All events
/// are judged on the same path of each replicate.
pub fn count_events(params: &UrnParams, events: &[Event], replicates: u64, seed_base: u64) -> AppResult<Vec<u64>> {
    let prepared = events
        .iter()
        .map(|e| PreparedEvent::new(*e, params))
        .collect::<Result<Vec<_>, _>>()?;
    let k = prepared.len();
    (0..replicates)
        .into_par_iter()
        .map_init(
            || EventSet::new(prepared.clone()),
            |set, i| {
                let mut rng = replicate_rng(seed_base, i);
                simulate_events(params, set, &mut rng)?;
                Ok(set.outcomes().into_iter().map(u64::from).collect::<Vec<_>>())
            },
        )
        .try_reduce(|| vec![0; k], |mut acc, v| {
            acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            Ok(acc)
        })
}

fn require_replicates(replicates: u64, min: u64) -> AppResult<()> {
    if replicates < min {
        return Err(AppError::Validation(format!("replicates must be at least {min}, got {replicates}")));
    }
    Ok(())
}

/// Estimates several event probabilities from one set of replicates.
pub fn estimate_many(
    params: &UrnParams,
    events: &[Event],
    replicates: u64,
    seed_base: u64,
    clopper_pearson: bool,
) -> AppResult<Vec<EstimateReport>> {
    require_replicates(replicates, 1)?;
    let counts = count_events(params, events, replicates, seed_base)?;
    Ok(events
        .iter()
        .zip(counts)
        .map(|(e, s)| EstimateReport::from_frequency(*e, *params, Frequency::new(s, replicates, clopper_pearson), seed_base))
        .collect())
}

pub fn estimate(params: &UrnParams, event: Event, replicates: u64, seed_base: u64) -> AppResult<EstimateReport> {
    Ok(estimate_many(params, &[event], replicates, seed_base, false)?.remove(0))
}

/// One grid point of [`sweep_t`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t: f64,
    pub n_t: i64,
    /// Frequency of the complement of the K event.
    pub k_failure: Frequency,
    /// Frequency of `tau >= n_t`.
    pub tau_tail: Frequency,
    pub bound_k: BoundReport,
    pub bound_tau: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub params: UrnParams,
    pub eps: f64,
    pub c_const: f64,
    pub replicates: u64,
    pub seed_base: u64,
    pub points: Vec<SweepPoint>,
    /// Log-log fit of K failure against `t` over domain-valid points.
    pub k_fit: Option<LineFit>,
    /// Log-log fit of the `tau` tail against `t` over domain-valid points.
    pub tau_fit: Option<LineFit>,
}

impl SweepReport {
    /// K failure never rises by more than the two neighbouring intervals allow.
    pub fn k_failure_nonincreasing(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].k_failure.p_hat <= w[0].k_failure.p_hat || w[1].k_failure.ci_low <= w[0].k_failure.ci_high)
    }
}

fn fit_points<'a>(points: impl Iterator<Item = (f64, &'a Frequency)>) -> Option<LineFit> {
    let (mut t, mut s, mut n) = (Vec::new(), Vec::new(), Vec::new());
    for (x, f) in points.filter(|(_, f)| f.successes > 0) {
        t.push(x);
        s.push(f.successes);
        n.push(f.trials);
    }
    if t.len() < MIN_FIT_POINTS {
        return None;
    }
    log_log_fit(&t, &s, &n)
}

/// Estimates K failure and the `tau >= n_t` tail at every `t` of the grid,
/// sharing each replicate path across the whole grid.
pub fn sweep_t(
    params: &UrnParams,
    eps: f64,
    t_grid: &[f64],
    replicates: u64,
    seed_base: u64,
    c_const: f64,
) -> AppResult<SweepReport> {
    require_replicates(replicates, 1)?;
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(AppError::Validation("t grid must be non-empty with positive finite values".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AppError::Validation("t grid must be strictly increasing".into()));
    }
    let thresholds = t_grid.iter().map(|t| n_t(params, *t)).collect::<Result<Vec<_>, _>>()?;
    let mut events = Vec::with_capacity(2 * t_grid.len());
    for (t, nt) in t_grid.iter().zip(&thresholds) {
        events.push(Event::K { t: *t, eps });
        events.push(Event::TauGeq { n: (*nt).max(0) as u64 });
    }
    let counts = count_events(params, &events, replicates, seed_base)?;
    let mut points = Vec::with_capacity(t_grid.len());
    for (i, (t, nt)) in t_grid.iter().zip(&thresholds).enumerate() {
        let mut inputs = BoundInputs::new(*params);
        inputs.c_const = c_const;
        inputs.t = *t;
        inputs.eps = eps;
        points.push(SweepPoint {
            t: *t,
            n_t: *nt,
            k_failure: Frequency::new(replicates - counts[2 * i], replicates, false),
            tau_tail: Frequency::new(counts[2 * i + 1], replicates, false),
            bound_k: bound_k(&inputs)?,
            bound_tau: bound_tau(&inputs)?,
        });
    }
    let k_fit = fit_points(points.iter().filter(|p| p.bound_k.domain_ok).map(|p| (p.t, &p.k_failure)));
    let tau_fit = fit_points(points.iter().filter(|p| p.bound_tau.domain_ok).map(|p| (p.t, &p.tau_tail)));
    Ok(SweepReport { params: *params, eps, c_const, replicates, seed_base, points, k_fit, tau_fit })
}

/// Smallest constants that make the sweep's estimates consistent with the
/// K and tau bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// From point estimates.
    pub c_k: f64,
    pub c_tau: f64,
    /// From the lower 95% interval ends.
    pub c_k_lower: f64,
    pub c_tau_lower: f64,
    pub worst_t_k: Option<f64>,
    pub worst_t_tau: Option<f64>,
}

/// Both bounds are linear in `C`, so the needed constant at each `t` is the
/// observed probability divided by the bound's value at `C = 1`.
pub fn calibrate(sweep: &SweepReport) -> Calibration {
    let mut cal = Calibration {
        c_k: 0.0,
        c_tau: 0.0,
        c_k_lower: 0.0,
        c_tau_lower: 0.0,
        worst_t_k: None,
        worst_t_tau: None,
    };
    for p in &sweep.points {
        let c = p.bound_k.inputs.c_const;
        let unit_k = (1.0 - p.bound_k.value) / c;
        let unit_tau = p.bound_tau.value / c;
        if unit_k > 0.0 {
            let need = p.k_failure.p_hat / unit_k;
            if need > cal.c_k {
                cal.c_k = need;
                cal.worst_t_k = Some(p.t);
            }
            cal.c_k_lower = cal.c_k_lower.max(p.k_failure.ci_low / unit_k);
        }
        if unit_tau > 0.0 {
            let need = p.tau_tail.p_hat / unit_tau;
            if need > cal.c_tau {
                cal.c_tau = need;
                cal.worst_t_tau = Some(p.t);
            }
            cal.c_tau_lower = cal.c_tau_lower.max(p.tau_tail.ci_low / unit_tau);
        }
    }
    cal
}

/// Aggregates of `K_n` and `L_n` at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub n: u64,
    pub k_mean: f64,
    pub k_quantiles: Vec<f64>,
    pub l_mean: f64,
    pub l_quantiles: Vec<f64>,
    pub x_pred: f64,
    pub y_pred: f64,
    /// Replicates where the ratio is defined.
    pub k_defined: u64,
    pub l_defined: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub params: UrnParams,
    pub replicates: u64,
    pub seed_base: u64,
    pub stride: u64,
    pub quantiles: Vec<f64>,
    pub rows: Vec<EnsembleRow>,
}

/// Counts `(x, y)` at `n = 0, stride, 2 stride, ...` while `a n <= M`,
/// frozen after the stopping time.
fn sample_path(params: &UrnParams, grid: &[u64], rng: &mut UrnRng) -> AppResult<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(grid.len());
    let mut state = params.initial_state();
    for &n in grid {
        while state.n < n && !state.is_stopped() {
            state = step(&state, params, rng)?.0;
        }
        out.push((state.x, state.y));
    }
    Ok(out)
}

fn summarize(values: &mut [f64], quantiles: &[f64]) -> (f64, Vec<f64>) {
    if values.is_empty() {
        return (f64::NAN, vec![f64::NAN; quantiles.len()]);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    (mean, quantiles.iter().map(|q| quantile_sorted(values, *q)).collect())
}

/// Per-step mean and quantiles of `K_n` and `L_n` over replicates.
pub fn ensemble_stats(
    params: &UrnParams,
    replicates: u64,
    seed_base: u64,
    quantiles: &[f64],
    stride: u64,
) -> AppResult<EnsembleReport> {
    require_replicates(replicates, 2)?;
    if stride == 0 {
        return Err(AppError::Validation("stride must be at least 1".into()));
    }
    if quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(AppError::Validation("quantiles must lie in [0, 1]".into()));
    }
    let last = (params.total() / params.a()).floor() as u64;
    let grid: Vec<u64> = (0..=last / stride).map(|i| i * stride).collect();
    let cells = replicates.saturating_mul(grid.len() as u64);
    if cells > ENSEMBLE_CELL_CAP {
        return Err(AppError::Core(Error::SizeCap(format!(
            "{replicates} replicates x {} grid points exceeds {ENSEMBLE_CELL_CAP}; raise the stride",
            grid.len()
        ))));
    }
    let paths: Vec<Vec<(f64, f64)>> = (0..replicates)
        .into_par_iter()
        .map(|i| sample_path(params, &grid, &mut replicate_rng(seed_base, i)))
        .collect::<AppResult<_>>()?;
    let rows = grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let x_pred = predicted_x_unchecked(params, n);
            let y_pred = params.remaining(n) - x_pred;
            let mut ks: Vec<f64> = if x_pred > 0.0 { paths.iter().map(|p| p[g].0 / x_pred).collect() } else { Vec::new() };
            let mut ls: Vec<f64> = if y_pred > 0.0 { paths.iter().map(|p| p[g].1 / y_pred).collect() } else { Vec::new() };
            let (k_defined, l_defined) = (ks.len() as u64, ls.len() as u64);
            let (k_mean, k_quantiles) = summarize(&mut ks, quantiles);
            let (l_mean, l_quantiles) = summarize(&mut ls, quantiles);
            EnsembleRow { n, k_mean, k_quantiles, l_mean, l_quantiles, x_pred, y_pred, k_defined, l_defined }
        })
        .collect();
    Ok(EnsembleReport { params: *params, replicates, seed_base, stride, quantiles: quantiles.to_vec(), rows })
}

/// Active half-edge count at the first step with no inactive half-edge, per replicate.
pub fn leftover_activity(
    n_vertices: u64,
    degree: u64,
    replicates: u64,
    seed_base: u64,
    policy: SelectionPolicy,
) -> AppResult<Vec<u64>> {
    require_replicates(replicates, 1)?;
    (0..replicates)
        .into_par_iter()
        .map(|i| Ok(config::active_at_exhaustion(n_vertices, degree, &mut replicate_rng(seed_base, i), policy)?))
        .collect()
}

/// Mean of `A_k / (n d)` over replicates for every `k = 0..=n d / 2`.
pub fn mean_active_fraction(
    n_vertices: u64,
    degree: u64,
    replicates: u64,
    seed_base: u64,
    policy: SelectionPolicy,
) -> AppResult<Vec<f64>> {
    require_replicates(replicates, 1)?;
    let runs: Vec<Vec<u64>> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let (_, counts) = config::generate_with(n_vertices, degree, &mut replicate_rng(seed_base, i), policy)?;
            Ok(counts.into_iter().map(|c| c.a).collect())
        })
        .collect::<AppResult<_>>()?;
    let nd = (n_vertices * degree) as f64;
    let len = runs[0].len();
    Ok((0..len)
        .map(|k| runs.iter().map(|r| r[k] as f64).sum::<f64>() / (replicates as f64 * nd))
        .collect())
}

/// Fraction of generated multigraphs that are simple.
pub fn simple_fraction(
    n_vertices: u64,
    degree: u64,
    replicates: u64,
    seed_base: u64,
    policy: SelectionPolicy,
) -> AppResult<Frequency> {
    require_replicates(replicates, 1)?;
    let simple = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let (g, _) = config::generate_with(n_vertices, degree, &mut replicate_rng(seed_base, i), policy)?;
            Ok::<_, AppError>(u64::from(g.simple))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(Frequency::new(simple, replicates, false))
}
