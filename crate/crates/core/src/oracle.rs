//! Exact law of the urn process for small totals.
//!
//! Before stopping, the state after `n` steps is fixed by the number `j` of
//! blue draws: `X = x0 - j b`, `Y = y0 + j b - n a`. A forward pass over the
//! `(n, j)` grid therefore gives the full law in `O(horizon^2)` cells. With
//! integer parameters and a short horizon the masses are exact rationals;
//! otherwise they are `f64`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::urn::{lattice_state, stop_reason, Event, PreparedEvent, UrnParams, Verdict};

/// Default cap on `ceil(M / a)`.
pub const DEFAULT_HORIZON_CAP: u64 = 10_000;
/// Longest horizon for which exact rational arithmetic is used.
pub const RATIONAL_HORIZON_LIMIT: u64 = 1_000;

/// Arithmetic used for probability masses.
pub trait Weight: Clone + Debug + PartialEq {
    fn empty() -> Self;
    fn certain() -> Self;
    /// Blue and red transition weights out of counts `(x, y)`.
    fn transition(x: f64, y: f64) -> (Self, Self);
    /// Exact ratio of two lattice values.
    fn ratio(num: f64, den: f64) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    fn is_zero(&self) -> bool;
    fn to_f64(&self) -> f64;
}

impl Weight for f64 {
    fn empty() -> Self {
        0.0
    }
    fn certain() -> Self {
        1.0
    }
    fn transition(x: f64, y: f64) -> (Self, Self) {
        (x / (x + y), y / (x + y))
    }
    fn ratio(num: f64, den: f64) -> Self {
        num / den
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

fn big(v: f64) -> BigInt {
    debug_assert!(libm::floor(v) == v);
    BigInt::from(v as i64)
}

impl Weight for BigRational {
    fn empty() -> Self {
        Zero::zero()
    }
    fn certain() -> Self {
        One::one()
    }
    fn transition(x: f64, y: f64) -> (Self, Self) {
        let total = big(x + y);
        (BigRational::new(big(x), total.clone()), BigRational::new(big(y), total))
    }
    fn ratio(num: f64, den: f64) -> Self {
        BigRational::new(big(num), big(den))
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Masses at one step: live cells and cells that stopped exactly at this step,
/// both keyed by the blue-draw count `j` in increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMass<W> {
    pub live: Vec<(u64, W)>,
    pub absorbed: Vec<(u64, W)>,
}

#[derive(Debug, Clone, PartialEq)]
enum Masses {
    Exact(Vec<StepMass<BigRational>>),
    Float(Vec<StepMass<f64>>),
}

/// Options for [`build_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    pub horizon_cap: u64,
    pub rational_limit: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { horizon_cap: DEFAULT_HORIZON_CAP, rational_limit: RATIONAL_HORIZON_LIMIT }
    }
}

/// Exact law of the process over its whole life.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    params: UrnParams,
    total_steps: u64,
    masses: Masses,
}

/// One row of the oracle dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DumpRow {
    pub n: u64,
    pub j: u64,
    pub x: f64,
    pub y: f64,
    pub prob: f64,
    pub absorbed: bool,
}

/// A probability, with its exact value when rational arithmetic was used.
#[derive(Debug, Clone, PartialEq)]
pub struct Probability {
    pub value: f64,
    pub exact: Option<BigRational>,
}

impl Probability {
    /// `p/q` form of the exact value, if any.
    pub fn exact_string(&self) -> Option<String> {
        self.exact.as_ref().map(|r| alloc::format!("{}/{}", r.numer(), r.denom()))
    }
}

/// Result of checking the martingale and supermartingale identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    /// Largest `|E[M_{n+1} | state] - M_n|` over live states.
    pub max_abs_defect: f64,
    /// Largest `E[S_{n+1} | state] - S_n` for `S_n = X_n / (M - a (n ∧ rho))`;
    /// non-positive for a supermartingale.
    pub max_super_defect: f64,
    pub states_checked: u64,
    /// Transitions where `M_{n+1}` or `S_{n+1}` has a zero denominator.
    pub states_skipped: u64,
    pub exact: bool,
}

fn forward<W: Weight>(params: &UrnParams, horizon: u64) -> Vec<StepMass<W>> {
    let mut steps = Vec::with_capacity(horizon as usize + 1);
    steps.push(StepMass { live: vec![(0, W::certain())], absorbed: vec![] });
    for n in 0..horizon {
        let current = &steps[n as usize].live;
        if current.is_empty() {
            break;
        }
        let mut live: Vec<Option<W>> = vec![None; n as usize + 2];
        let mut absorbed: Vec<Option<W>> = vec![None; n as usize + 2];
        for (j, w) in current {
            let (x, y) = lattice_state(params, n, *j);
            let (pb, pr) = W::transition(x, y);
            for (jj, pw) in [(*j + 1, pb), (*j, pr)] {
                if pw.is_zero() {
                    continue;
                }
                let (nx, ny) = lattice_state(params, n + 1, jj);
                let mass = w.mul(&pw);
                let slot = if stop_reason(params, n + 1, nx, ny).is_some() {
                    &mut absorbed[jj as usize]
                } else {
                    &mut live[jj as usize]
                };
                *slot = Some(match slot.take() {
                    Some(acc) => acc.add(&mass),
                    None => mass,
                });
            }
        }
        let collect = |v: Vec<Option<W>>| -> Vec<(u64, W)> {
            v.into_iter().enumerate().filter_map(|(j, w)| w.map(|w| (j as u64, w))).collect()
        };
        steps.push(StepMass { live: collect(live), absorbed: collect(absorbed) });
    }
    steps
}

fn event_forward<W: Weight>(params: &UrnParams, event: &PreparedEvent, horizon: u64) -> W {
    let needs = event.needs_prediction();
    let pred = |n: u64| {
        if needs {
            crate::urn::predicted_x_unchecked(params, n)
        } else {
            f64::NAN
        }
    };
    match event.check_live(0, params.x0(), params.y0(), pred(0)) {
        Verdict::Pass => return W::certain(),
        Verdict::Fail => return W::empty(),
        Verdict::Pending => {}
    }
    let mut passed = W::empty();
    let mut pending: Vec<Option<W>> = vec![Some(W::certain())];
    for n in 0..horizon {
        let mut next: Vec<Option<W>> = vec![None; n as usize + 2];
        let pred_next = pred(n + 1);
        let mut any = false;
        for (j, w) in pending.iter().enumerate() {
            let Some(w) = w else { continue };
            let j = j as u64;
            let (x, y) = lattice_state(params, n, j);
            let (pb, pr) = W::transition(x, y);
            for (jj, pw) in [(j + 1, pb), (j, pr)] {
                if pw.is_zero() {
                    continue;
                }
                let (nx, ny) = lattice_state(params, n + 1, jj);
                let mass = w.mul(&pw);
                let verdict = if stop_reason(params, n + 1, nx, ny).is_some() {
                    if event.check_stopped(n + 1, nx, ny) {
                        Verdict::Pass
                    } else {
                        Verdict::Fail
                    }
                } else {
                    event.check_live(n + 1, nx, ny, pred_next)
                };
                match verdict {
                    Verdict::Pass => passed = passed.add(&mass),
                    Verdict::Fail => {}
                    Verdict::Pending => {
                        any = true;
                        let slot = &mut next[jj as usize];
                        *slot = Some(match slot.take() {
                            Some(acc) => acc.add(&mass),
                            None => mass,
                        });
                    }
                }
            }
        }
        if !any {
            break;
        }
        pending = next;
    }
    passed
}

fn martingale<W: Weight>(params: &UrnParams, steps: &[StepMass<W>]) -> MartingaleReport {
    let (a, b, m, x0) = (params.a(), params.b(), params.total(), params.x0());
    let x0w = W::ratio(x0, 1.0);
    let mut report = MartingaleReport {
        max_abs_defect: 0.0,
        max_super_defect: f64::NEG_INFINITY,
        states_checked: 0,
        states_skipped: 0,
        exact: false,
    };
    // prod_{k<n} (1 - b/(M - a k)) as a weight
    let mut product = W::certain();
    for (n, step) in steps.iter().enumerate() {
        let n = n as u64;
        let rest = m - a * n as f64;
        let rest_next = rest - a;
        if step.live.is_empty() || rest <= 0.0 {
            break;
        }
        let next_product = product.mul(&W::ratio(rest - b, rest));
        for (j, _) in &step.live {
            let (x, y) = lattice_state(params, n, *j);
            let (pb, pr) = W::transition(x, y);
            let xw = W::ratio(x, 1.0);
            let expected_x = pb.mul(&W::ratio(x - b, 1.0)).add(&pr.mul(&xw));
            let mut skipped = false;
            if product.is_zero() || next_product.is_zero() {
                skipped = true;
            } else {
                let current = xw.div(&x0w.mul(&product));
                let next = expected_x.div(&x0w.mul(&next_product));
                let defect = libm::fabs(next.sub(&current).to_f64());
                report.max_abs_defect = report.max_abs_defect.max(defect);
            }
            if rest_next > 0.0 {
                let current = xw.div(&W::ratio(rest, 1.0));
                let next = expected_x.div(&W::ratio(rest_next, 1.0));
                report.max_super_defect = report.max_super_defect.max(next.sub(&current).to_f64());
            } else {
                skipped = true;
            }
            if skipped {
                report.states_skipped += 1;
            } else {
                report.states_checked += 1;
            }
        }
        product = next_product;
    }
    report
}

/// Builds the exact law with the default options.
pub fn build(params: &UrnParams) -> Result<ExactDistribution> {
    build_with(params, OracleOptions::default())
}

pub fn build_with(params: &UrnParams, options: OracleOptions) -> Result<ExactDistribution> {
    let horizon = params.horizon();
    if horizon > options.horizon_cap {
        return Err(Error::HorizonExceeded { steps: horizon, cap: options.horizon_cap });
    }
    let masses = if params.is_integral() && horizon <= options.rational_limit {
        Masses::Exact(forward(params, horizon))
    } else {
        Masses::Float(forward(params, horizon))
    };
    Ok(ExactDistribution { params: *params, total_steps: horizon, masses })
}

fn to_f64_step<W: Weight>(s: &StepMass<W>) -> StepMass<f64> {
    let conv = |v: &[(u64, W)]| v.iter().map(|(j, w)| (*j, w.to_f64())).collect();
    StepMass { live: conv(&s.live), absorbed: conv(&s.absorbed) }
}

impl ExactDistribution {
    pub fn params(&self) -> &UrnParams {
        &self.params
    }

    /// The horizon `ceil(M / a)`.
    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    /// Whether masses are exact rationals.
    pub fn is_exact(&self) -> bool {
        matches!(self.masses, Masses::Exact(_))
    }

    /// Number of recorded steps (one past the last step with live mass).
    pub fn len(&self) -> usize {
        match &self.masses {
            Masses::Exact(s) => s.len(),
            Masses::Float(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Masses at step `n` as `f64`.
    pub fn step(&self, n: usize) -> Option<StepMass<f64>> {
        match &self.masses {
            Masses::Exact(s) => s.get(n).map(to_f64_step),
            Masses::Float(s) => s.get(n).cloned(),
        }
    }

    /// Exact masses at step `n`, when rational arithmetic was used.
    pub fn step_exact(&self, n: usize) -> Option<&StepMass<BigRational>> {
        match &self.masses {
            Masses::Exact(s) => s.get(n),
            Masses::Float(_) => None,
        }
    }

    /// Live sub-probability law of `(X_n, Y_n)` on `{rho > n}`, exactly.
    pub fn live_law_exact(&self, n: usize) -> BTreeMap<(i64, i64), BigRational> {
        let mut law = BTreeMap::new();
        if let Some(step) = self.step_exact(n) {
            for (j, w) in &step.live {
                let (x, y) = lattice_state(&self.params, n as u64, *j);
                law.insert((x as i64, y as i64), w.clone());
            }
        }
        law
    }

    /// Law of the stopping time `rho`.
    pub fn rho_law(&self) -> BTreeMap<u64, f64> {
        let mut law = BTreeMap::new();
        for n in 0..self.len() {
            let step = self.step(n).expect("index in range");
            let total: f64 = step.absorbed.iter().map(|(_, w)| w).sum();
            if total > 0.0 {
                law.insert(n as u64, total);
            }
        }
        law
    }

    /// Live mass at step `n` plus all mass absorbed up to and including `n`.
    pub fn total_mass(&self, n: usize) -> f64 {
        (0..=n.min(self.len().saturating_sub(1)))
            .filter_map(|k| self.step(k))
            .enumerate()
            .map(|(k, s)| {
                let absorbed: f64 = s.absorbed.iter().map(|(_, w)| w).sum();
                let live: f64 = if k == n { s.live.iter().map(|(_, w)| w).sum() } else { 0.0 };
                absorbed + live
            })
            .sum()
    }

    /// Rows `n, j, x, y, prob, absorbed` for every cell carrying mass.
    pub fn dump(&self) -> Vec<DumpRow> {
        let mut rows = Vec::new();
        for n in 0..self.len() {
            let step = self.step(n).expect("index in range");
            for (cells, absorbed) in [(&step.live, false), (&step.absorbed, true)] {
                for (j, w) in cells {
                    let (x, y) = lattice_state(&self.params, n as u64, *j);
                    rows.push(DumpRow { n: n as u64, j: *j, x, y, prob: *w, absorbed });
                }
            }
        }
        rows
    }

    /// Exact probability of a path event.
    pub fn event_prob(&self, event: &Event) -> Result<Probability> {
        let prepared = PreparedEvent::new(*event, &self.params)?;
        Ok(match &self.masses {
            Masses::Exact(_) => {
                let p: BigRational = event_forward(&self.params, &prepared, self.total_steps);
                Probability { value: Weight::to_f64(&p), exact: Some(p) }
            }
            Masses::Float(_) => Probability {
                value: event_forward::<f64>(&self.params, &prepared, self.total_steps),
                exact: None,
            },
        })
    }

    /// Checks the martingale `M_n = X_{n∧rho} / (x0 prod_{k<n∧rho}(1 - b/(M - a k)))`
    /// and the supermartingale `X_n / (M - a (n∧rho))` one step ahead of every
    /// live state. `None` when `x0 = 0`, where `M_n` is undefined.
    pub fn verify_martingale(&self) -> Option<MartingaleReport> {
        if self.params.x0() <= 0.0 {
            return None;
        }
        let mut report = match &self.masses {
            Masses::Exact(s) => {
                let mut r = martingale(&self.params, s);
                r.exact = true;
                r
            }
            Masses::Float(s) => martingale(&self.params, s),
        };
        if report.max_super_defect == f64::NEG_INFINITY {
            report.max_super_defect = 0.0;
        }
        Some(report)
    }
}

/// Total-variation distance between two exact sub-probability laws.
pub fn total_variation<K: Ord + Clone>(
    p: &BTreeMap<K, BigRational>,
    q: &BTreeMap<K, BigRational>,
) -> BigRational {
    let zero = BigRational::zero();
    let mut sum = BigRational::zero();
    for key in p.keys().chain(q.keys().filter(|k| !p.contains_key(*k))) {
        let a = p.get(key).unwrap_or(&zero);
        let b = q.get(key).unwrap_or(&zero);
        sum += (a - b).abs();
    }
    sum / BigRational::from_integer(BigInt::from(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, b: f64, x0: f64, y0: f64) -> UrnParams {
        UrnParams::new(a, b, x0, y0).unwrap()
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn two_branch_tree() {
        let d = build(&params(1.0, 2.0, 2.0, 1.0)).unwrap();
        assert!(d.is_exact());
        let s1 = d.step_exact(1).unwrap();
        assert_eq!(s1.live, vec![(0, q(1, 3)), (1, q(2, 3))]);
        let rho = d.rho_law();
        assert_eq!(rho.len(), 1);
        assert_eq!(rho[&3], 1.0);
        // P(tau <= 1) = 1 - P(tau >= 2)
        let p = d.event_prob(&Event::TauGeq { n: 2 }).unwrap();
        assert_eq!(p.exact.unwrap(), q(1, 3));
        let r = d.event_prob(&Event::R).unwrap();
        assert_eq!(r.exact.unwrap(), q(1, 1));
    }

    #[test]
    fn pure_drain_single_path() {
        let d = build(&params(2.0, 4.0, 0.0, 8.0)).unwrap();
        for n in 0..d.len() {
            let s = d.step(n).unwrap();
            assert!(s.live.iter().chain(&s.absorbed).all(|(j, _)| *j == 0));
        }
        assert!(d.verify_martingale().is_none());
        assert_eq!(d.event_prob(&Event::R).unwrap().value, 1.0);
    }

    #[test]
    fn normalised_every_step() {
        for p in [params(2.0, 4.0, 8.0, 4.0), params(1.0, 3.0, 9.0, 5.0), params(0.5, 1.25, 5.0, 2.3)] {
            let d = build(&p).unwrap();
            for n in 0..d.len() {
                assert!((d.total_mass(n) - 1.0).abs() < 1e-12, "{p:?} n={n}");
            }
        }
    }

    #[test]
    fn exact_normalisation_is_exact() {
        let p = params(2.0, 4.0, 8.0, 4.0);
        let d = build(&p).unwrap();
        let mut acc = BigRational::zero();
        for n in 0..d.len() {
            let s = d.step_exact(n).unwrap();
            let live: BigRational = s.live.iter().map(|(_, w)| w.clone()).fold(BigRational::zero(), |a, b| a + b);
            for (_, w) in &s.absorbed {
                acc += w;
            }
            assert_eq!(&acc + live, BigRational::one());
        }
    }

    #[test]
    fn live_cells_conserve_and_stay_nonnegative() {
        let p = params(2.0, 3.0, 12.0, 7.0);
        let d = build(&p).unwrap();
        for row in d.dump().iter().filter(|r| !r.absorbed) {
            assert_eq!(row.x + row.y, p.remaining(row.n));
            assert!(row.x >= 0.0 && row.y >= 0.0);
        }
    }

    #[test]
    fn vacuous_and_trivial_events() {
        let d = build(&params(2.0, 4.0, 8.0, 4.0)).unwrap();
        assert_eq!(d.event_prob(&Event::TauGeq { n: 0 }).unwrap().value, 1.0);
        assert_eq!(d.event_prob(&Event::K { t: 100.0, eps: 0.1 }).unwrap().value, 1.0);
    }

    #[test]
    fn martingale_small_instances() {
        let r = build(&params(1.0, 2.0, 2.0, 1.0)).unwrap().verify_martingale().unwrap();
        assert!(r.exact);
        assert_eq!(r.max_abs_defect, 0.0);
        assert!(r.states_checked >= 1);
        let r = build(&params(2.0, 4.0, 8.0, 4.0)).unwrap().verify_martingale().unwrap();
        assert_eq!(r.max_abs_defect, 0.0);
        assert!(r.max_super_defect <= 0.0);
        let r = build(&params(0.7, 1.9, 3.8, 2.2)).unwrap().verify_martingale().unwrap();
        assert!(!r.exact);
        assert!(r.max_abs_defect < 1e-12 && r.max_super_defect < 1e-12, "{r:?}");
    }

    #[test]
    fn mean_martingale_is_one() {
        // E[M_n] = 1 with M frozen at rho; needs M - a k != b for all k
        let p = params(2.0, 4.0, 16.0, 5.0);
        let d = build(&p).unwrap();
        let (a, b, m) = (p.a(), p.b(), p.total());
        let mut prods = vec![BigRational::one()];
        for k in 0..d.len() as u64 {
            let rest = m - a * k as f64;
            prods.push(prods.last().unwrap() * <BigRational as Weight>::ratio(rest - b, rest));
        }
        let x0 = BigRational::from_integer(16.into());
        let mut frozen = BigRational::zero();
        for n in 0..d.len() {
            let s = d.step_exact(n).unwrap();
            for (j, w) in &s.absorbed {
                let (x, _) = lattice_state(&p, n as u64, *j);
                frozen += w * <BigRational as Weight>::ratio(x, 1.0) / (&x0 * &prods[n]);
            }
            let live = s.live.iter().fold(BigRational::zero(), |acc, (j, w)| {
                let (x, _) = lattice_state(&p, n as u64, *j);
                acc + w * <BigRational as Weight>::ratio(x, 1.0) / (&x0 * &prods[n])
            });
            assert_eq!(&frozen + live, BigRational::one(), "n = {n}");
        }
    }

    #[test]
    fn horizon_cap() {
        let p = params(1.0, 2.0, 20_000.0, 2.0);
        assert!(matches!(build(&p), Err(Error::HorizonExceeded { .. })));
        let small = OracleOptions { horizon_cap: 5, ..Default::default() };
        assert!(build_with(&params(1.0, 2.0, 4.0, 2.0), small).is_err());
    }

    #[test]
    fn float_mode_matches_exact_mode() {
        let p = params(2.0, 3.0, 12.0, 7.0);
        let exact = build(&p).unwrap();
        let float = build_with(&p, OracleOptions { rational_limit: 0, ..Default::default() }).unwrap();
        assert!(!float.is_exact());
        for ev in [Event::R, Event::L { eps: 0.5 }, Event::K { t: 1.0, eps: 0.3 }, Event::TauGeq { n: 5 }] {
            let a = exact.event_prob(&ev).unwrap().value;
            let b = float.event_prob(&ev).unwrap().value;
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn tv_distance() {
        let mut p = BTreeMap::new();
        let mut r = BTreeMap::new();
        p.insert(1, q(1, 2));
        p.insert(2, q(1, 2));
        r.insert(1, q(1, 2));
        r.insert(3, q(1, 2));
        assert_eq!(total_variation(&p, &r), q(1, 2));
        assert!(Zero::is_zero(&total_variation(&p, &p)));
    }
}
