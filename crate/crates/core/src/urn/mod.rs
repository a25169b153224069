//! The two-colour drain urn.
//!
//! A blue draw removes `b` blue balls and adds `b - a` red ones; a red draw
//! removes `a` red balls. Each step therefore removes exactly `a` balls, and
//! the process freezes at the first step `rho` where the red count is
//! negative, the total `M - a n` is non-positive, or the blue count is
//! negative (in that order of checking).

mod event;
mod predict;

pub use event::{
    event_k, event_l, event_r, event_sigma, DerivedStatistics, Event, EventSet, PreparedEvent,
    Verdict,
};
pub use predict::{k_stat, l_stat, n_t, predicted_x, predicted_y};

/// `x0 (1 - a n / M)^(b/a)` for any real `n`, zero once `a n >= M`.
#[inline]
pub fn predicted_x_unchecked(params: &UrnParams, n: u64) -> f64 {
    predict::predicted_x_raw(params, n as f64)
}

use alloc::format;
use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Largest magnitude for which every integer is exactly representable in `f64`.
const EXACT_INT_LIMIT: f64 = 9_007_199_254_740_992.0;

/// Relative tolerance used to snap real-valued counts onto their lattice.
const SNAP_TOL: f64 = 1e-9;

/// Parameters of the urn: removal sizes `a < b` and initial counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct UrnParams {
    a: f64,
    b: f64,
    x0: f64,
    y0: f64,
    integral: bool,
    off_lattice: bool,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    a: f64,
    b: f64,
    x0: f64,
    y0: f64,
}

impl TryFrom<RawParams> for UrnParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        UrnParams::new(raw.a, raw.b, raw.x0, raw.y0)
    }
}

impl From<UrnParams> for RawParams {
    fn from(p: UrnParams) -> Self {
        RawParams { a: p.a, b: p.b, x0: p.x0, y0: p.y0 }
    }
}

fn is_int(v: f64) -> bool {
    libm::floor(v) == v && libm::fabs(v) < EXACT_INT_LIMIT
}

impl UrnParams {
    /// Validates `0 < a < b`, non-negative counts and `M > 0`. An initial blue
    /// count that is not a multiple of `b` is accepted and flagged.
    pub fn new(a: f64, b: f64, x0: f64, y0: f64) -> Result<Self> {
        if ![a, b, x0, y0].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "non-finite value in (a={a}, b={b}, x0={x0}, y0={y0})"
            )));
        }
        if !(a > 0.0 && a < b) {
            return Err(Error::InvalidParams(format!("need 0 < a < b, got a={a}, b={b}")));
        }
        if x0 < 0.0 || y0 < 0.0 {
            return Err(Error::InvalidParams(format!(
                "initial counts must be non-negative, got x0={x0}, y0={y0}"
            )));
        }
        if x0 + y0 <= 0.0 {
            return Err(Error::InvalidParams("M = x0 + y0 must be positive".into()));
        }
        let integral = [a, b, x0, y0].iter().all(|&v| is_int(v));
        let ratio = x0 / b;
        let off_lattice = if integral {
            libm::fmod(x0, b) != 0.0
        } else {
            libm::fabs(ratio - libm::round(ratio)) > SNAP_TOL * libm::fmax(1.0, ratio)
        };
        Ok(UrnParams { a, b, x0, y0, integral, off_lattice })
    }

    /// Like [`UrnParams::new`] but rejects an initial blue count that is not a
    /// multiple of `b`.
    pub fn new_strict(a: f64, b: f64, x0: f64, y0: f64) -> Result<Self> {
        let p = Self::new(a, b, x0, y0)?;
        if p.off_lattice {
            return Err(Error::InvalidParams(format!("x0={x0} is not a multiple of b={b}")));
        }
        Ok(p)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    /// Initial total `M = x0 + y0`.
    pub fn total(&self) -> f64 {
        self.x0 + self.y0
    }

    /// Balls left after `n` pre-stopping steps, `M - a n`.
    #[inline]
    pub fn remaining(&self, n: u64) -> f64 {
        self.total() - self.a * n as f64
    }

    /// `ceil(M / a)`, an upper bound on `rho`.
    pub fn horizon(&self) -> u64 {
        libm::ceil(self.total() / self.a) as u64
    }

    /// True when `a`, `b`, `x0`, `y0` are all integers; draws are then exact.
    pub fn is_integral(&self) -> bool {
        self.integral
    }

    /// True when `x0` is not a multiple of `b`.
    pub fn off_lattice(&self) -> bool {
        self.off_lattice
    }

    pub fn initial_state(&self) -> UrnState {
        UrnState { n: 0, x: self.x0, y: self.y0, rho: None }
    }
}

/// Colour of a drawn ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Draw {
    Blue,
    Red,
}

/// Which stopping condition fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    NegativeRed,
    Exhausted,
    NegativeBlue,
}

/// Counts after `n` steps. Once `rho` is set the counts are frozen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrnState {
    pub n: u64,
    pub x: f64,
    pub y: f64,
    pub rho: Option<u64>,
}

impl UrnState {
    pub fn is_stopped(&self) -> bool {
        self.rho.is_some()
    }
}

/// Stopping test for counts `(x, y)` reached after `n` steps.
#[inline]
pub fn stop_reason(params: &UrnParams, n: u64, x: f64, y: f64) -> Option<StopReason> {
    if y < 0.0 {
        Some(StopReason::NegativeRed)
    } else if params.remaining(n) <= 0.0 {
        Some(StopReason::Exhausted)
    } else if x < 0.0 {
        Some(StopReason::NegativeBlue)
    } else {
        None
    }
}

/// Probability that the next draw is blue.
#[inline]
pub fn blue_probability(x: f64, y: f64) -> f64 {
    x / (x + y)
}

#[inline]
fn snap(v: f64, scale: f64) -> f64 {
    if libm::fabs(v) <= SNAP_TOL * scale {
        0.0
    } else {
        v
    }
}

/// Counts after `n` pre-stopping steps of which `j` were blue draws.
#[inline]
pub fn lattice_state(params: &UrnParams, n: u64, j: u64) -> (f64, f64) {
    let x = params.x0 - j as f64 * params.b;
    let y = params.y0 + j as f64 * params.b - n as f64 * params.a;
    if params.integral {
        (x, y)
    } else {
        (snap(x, params.b), snap(y, params.b))
    }
}

/// One application of the transition law.
pub fn step<R: RngCore + ?Sized>(
    state: &UrnState,
    params: &UrnParams,
    rng: &mut R,
) -> Result<(UrnState, Draw)> {
    if let Some(rho) = state.rho {
        return Err(Error::StoppedState { rho });
    }
    let (x, y) = (state.x, state.y);
    if !(x >= 0.0 && y >= 0.0 && x + y > 0.0) {
        return Err(Error::InvalidState { x, y });
    }
    let blue = if params.integral {
        seed::below(rng, (x + y) as u64) < x as u64
    } else {
        seed::unit(rng) < blue_probability(x, y)
    };
    let (draw, mut nx, mut ny) = if blue {
        (Draw::Blue, x - params.b, y + (params.b - params.a))
    } else {
        (Draw::Red, x, y - params.a)
    };
    if !params.integral {
        nx = snap(nx, params.b);
        ny = snap(ny, params.b);
    }
    let n = state.n + 1;
    let rho = stop_reason(params, n, nx, ny).map(|_| n);
    Ok((UrnState { n, x: nx, y: ny, rho }, draw))
}

/// Streaming simulation: yields each post-step state until the process stops.
pub struct Simulation<R> {
    params: UrnParams,
    state: UrnState,
    rng: R,
}

impl<R: RngCore> Simulation<R> {
    pub fn new(params: UrnParams, rng: R) -> Self {
        Simulation { state: params.initial_state(), params, rng }
    }

    pub fn params(&self) -> &UrnParams {
        &self.params
    }

    pub fn state(&self) -> &UrnState {
        &self.state
    }
}

impl<R: RngCore> Iterator for Simulation<R> {
    type Item = (Draw, UrnState);

    fn next(&mut self) -> Option<Self::Item> {
        if self.state.is_stopped() {
            return None;
        }
        // The initial state is valid by construction and every live state
        // keeps non-negative counts with a positive sum.
        let (next, draw) = step(&self.state, &self.params, &mut self.rng).ok()?;
        self.state = next;
        Some((draw, next))
    }
}

/// A complete recorded path from `n = 0` to the stopping step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnTrajectory {
    pub params: UrnParams,
    pub states: Vec<UrnState>,
    pub draws: Vec<Draw>,
    pub seed: u64,
}

impl UrnTrajectory {
    pub fn rho(&self) -> u64 {
        self.final_state().rho.unwrap_or(self.final_state().n)
    }

    pub fn final_state(&self) -> &UrnState {
        self.states.last().expect("trajectory always holds the initial state")
    }

    /// State at time `n`; counts stay frozen past `rho`.
    pub fn state_at(&self, n: u64) -> UrnState {
        match self.states.get(n as usize) {
            Some(s) => *s,
            None => UrnState { n, ..*self.final_state() },
        }
    }

    /// Number of steps taken (equals `rho`).
    pub fn steps(&self) -> usize {
        self.draws.len()
    }
}

/// Runs the process to its stopping time with the stream derived from `seed`.
pub fn run(params: &UrnParams, seed: u64) -> UrnTrajectory {
    let mut states = Vec::with_capacity(params.horizon().min(1 << 24) as usize + 1);
    let mut draws = Vec::with_capacity(states.capacity());
    states.push(params.initial_state());
    for (draw, state) in Simulation::new(*params, seed::rng_from_seed(seed)) {
        states.push(state);
        draws.push(draw);
    }
    UrnTrajectory { params: *params, states, draws, seed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn params(a: f64, b: f64, x0: f64, y0: f64) -> UrnParams {
        UrnParams::new(a, b, x0, y0).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(UrnParams::new(2.0, 2.0, 4.0, 0.0).is_err());
        assert!(UrnParams::new(0.0, 2.0, 4.0, 0.0).is_err());
        assert!(UrnParams::new(1.0, 2.0, -2.0, 3.0).is_err());
        assert!(UrnParams::new(1.0, 2.0, 0.0, 0.0).is_err());
        assert!(UrnParams::new(1.0, f64::NAN, 2.0, 1.0).is_err());
        assert!(UrnParams::new_strict(2.0, 4.0, 6.0, 1.0).is_err());
        let p = params(2.0, 4.0, 6.0, 1.0);
        assert!(p.off_lattice());
        assert!(!params(2.0, 4.0, 8.0, 1.0).off_lattice());
        assert!(!params(0.5, 1.5, 4.5, 0.25).off_lattice());
        assert!(params(0.5, 1.5, 4.0, 0.25).off_lattice());
    }

    #[test]
    fn forced_blue_when_no_red() {
        let p = params(2.0, 4.0, 4.0, 0.0);
        let mut rng = rng_from_seed(0);
        for _ in 0..20 {
            let (s, d) = step(&p.initial_state(), &p, &mut rng).unwrap();
            assert_eq!(d, Draw::Blue);
            assert_eq!((s.x, s.y), (0.0, 2.0));
        }
    }

    #[test]
    fn forced_red_when_no_blue() {
        let p = params(2.0, 4.0, 0.0, 6.0);
        let mut rng = rng_from_seed(0);
        for _ in 0..20 {
            let (s, d) = step(&p.initial_state(), &p, &mut rng).unwrap();
            assert_eq!(d, Draw::Red);
            assert_eq!((s.x, s.y), (0.0, 4.0));
        }
    }

    #[test]
    fn blue_probability_quarter() {
        assert_eq!(blue_probability(2.0, 6.0), 0.25);
        let p = params(2.0, 4.0, 2.0, 6.0);
        let mut rng = rng_from_seed(11);
        let blues = (0..40_000)
            .filter(|_| step(&p.initial_state(), &p, &mut rng).unwrap().1 == Draw::Blue)
            .count();
        let freq = blues as f64 / 40_000.0;
        // 4 standard errors of a Bernoulli(1/4) mean
        assert!((freq - 0.25).abs() < 4.0 * (0.25f64 * 0.75 / 40_000.0).sqrt(), "{freq}");
    }

    #[test]
    fn step_errors() {
        let p = params(2.0, 4.0, 4.0, 4.0);
        let mut rng = rng_from_seed(0);
        let stopped = UrnState { n: 3, x: 0.0, y: 0.0, rho: Some(3) };
        assert_eq!(step(&stopped, &p, &mut rng), Err(Error::StoppedState { rho: 3 }));
        let bad = UrnState { n: 0, x: -1.0, y: 4.0, rho: None };
        assert!(matches!(step(&bad, &p, &mut rng), Err(Error::InvalidState { .. })));
        let empty = UrnState { n: 0, x: 0.0, y: 0.0, rho: None };
        assert!(matches!(step(&empty, &p, &mut rng), Err(Error::InvalidState { .. })));
    }

    #[test]
    fn small_instance_always_stops_at_three() {
        let p = params(1.0, 2.0, 2.0, 1.0);
        for seed in 0..200 {
            let t = run(&p, seed);
            assert_eq!(t.rho(), 3);
            assert_eq!(p.remaining(t.rho()), 0.0);
            assert_eq!(t.states.len(), 4);
        }
    }

    #[test]
    fn pure_drain() {
        let p = params(2.0, 4.0, 0.0, 8.0);
        let t = run(&p, 5);
        assert_eq!(t.rho(), 4);
        assert!(t.draws.iter().all(|d| *d == Draw::Red));
        let ys: Vec<f64> = t.states.iter().map(|s| s.y).collect();
        assert_eq!(ys, [8.0, 6.0, 4.0, 2.0, 0.0]);
    }

    #[test]
    fn large_instance_length_bound() {
        let n = 10_000.0;
        let p = params(2.0, 20.0, 20.0 * (n - 1.0), 19.0);
        let t = run(&p, 1);
        assert!(t.steps() as f64 <= (p.total() / 2.0).ceil());
        assert_eq!(t.final_state().x, 0.0);
    }

    #[test]
    fn off_lattice_blue_goes_negative() {
        // x0 = 1 with b = 2: a blue draw overshoots and stops the process
        let p = params(1.0, 2.0, 1.0, 0.0);
        let t = run(&p, 0);
        assert_eq!(t.rho(), 1);
        assert_eq!(t.final_state().x, -1.0);
    }

    #[test]
    fn state_at_freezes() {
        let p = params(1.0, 2.0, 2.0, 1.0);
        let t = run(&p, 3);
        let last = *t.final_state();
        let later = t.state_at(10);
        assert_eq!((later.x, later.y, later.rho), (last.x, last.y, last.rho));
        assert_eq!(later.n, 10);
    }

    #[test]
    fn raw_params_are_validated() {
        let ok = UrnParams::try_from(RawParams { a: 1.0, b: 2.0, x0: 2.0, y0: 1.0 });
        assert_eq!(ok.unwrap(), params(1.0, 2.0, 2.0, 1.0));
        assert!(UrnParams::try_from(RawParams { a: 3.0, b: 2.0, x0: 2.0, y0: 1.0 }).is_err());
    }
}
