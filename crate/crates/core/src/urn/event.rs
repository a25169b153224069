//! Path events of the urn process.
//!
//! Every event here is decided by scanning the path forward: each live state
//! either keeps the event pending, settles it, or refutes it, and the frozen
//! state at `rho` settles whatever is still pending. That shape lets the
//! simulator, the stored-trajectory helpers and the exact oracle share a
//! single implementation of the predicates.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::predict::{n_t_raw, predicted_x_raw, predicted_y_raw};
use super::{UrnParams, UrnState, UrnTrajectory};
use crate::error::{Error, Result};

/// Events whose probabilities the bounds speak about.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// `rho > n_t` and `|K_n - 1| <= eps` for all `n <= n_t`.
    K { t: f64, eps: f64 },
    /// `|L_n - 1| <= eps` for every defined `L_n` with `n < M / a`.
    L { eps: f64 },
    /// The blue balls run out before the process stops: `M - a rho <= 0`.
    R,
    /// `rho > sigma_m` and the two-sided `eps` band holds up to `sigma_m`.
    Sigma { m: f64, eps: f64 },
    /// `tau >= n`, where `tau` is the first time the blue count is zero.
    TauGeq { n: u64 },
}

impl Event {
    pub fn label(&self) -> &'static str {
        match self {
            Event::K { .. } => "K",
            Event::L { .. } => "L",
            Event::R => "R",
            Event::Sigma { .. } => "Sigma",
            Event::TauGeq { .. } => "TauGeq",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pending,
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy)]
enum Rule {
    K { n_t: i64, eps: f64 },
    L { eps: f64 },
    R,
    Sigma { m: f64, eps: f64 },
    Tau { n0: u64 },
}

/// An event bound to urn parameters, with derived thresholds precomputed.
#[derive(Debug, Clone, Copy)]
pub struct PreparedEvent {
    event: Event,
    params: UrnParams,
    rule: Rule,
}

fn check_eps_half(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(Error::OutOfDomain(format!("eps must lie in (0, 1/2), got {eps}")))
    }
}

#[inline]
fn is_zero(params: &UrnParams, x: f64) -> bool {
    libm::fabs(x) <= 1e-9 * params.b()
}

impl PreparedEvent {
    pub fn new(event: Event, params: &UrnParams) -> Result<Self> {
        let rule = match event {
            Event::K { t, eps } => {
                check_eps_half(eps)?;
                if !(t > 0.0) {
                    return Err(Error::OutOfDomain(format!("t must be positive, got {t}")));
                }
                Rule::K { n_t: n_t_raw(params, t), eps }
            }
            Event::L { eps } => {
                if !(eps > 0.0) {
                    return Err(Error::OutOfDomain(format!("eps must be positive, got {eps}")));
                }
                Rule::L { eps }
            }
            Event::R => Rule::R,
            Event::Sigma { m, eps } => {
                check_eps_half(eps)?;
                if !(m > 0.0) {
                    return Err(Error::OutOfDomain(format!("m must be positive, got {m}")));
                }
                Rule::Sigma { m, eps }
            }
            Event::TauGeq { n } => Rule::Tau { n0: n },
        };
        Ok(PreparedEvent { event, params: *params, rule })
    }

    pub fn event(&self) -> &Event {
        &self.event
    }

    /// Whether [`PreparedEvent::check_live`] reads the predicted blue count.
    pub fn needs_prediction(&self) -> bool {
        matches!(self.rule, Rule::K { .. } | Rule::L { .. } | Rule::Sigma { .. })
    }

    /// The threshold `n_t` of a K event.
    pub fn n_t(&self) -> Option<i64> {
        match self.rule {
            Rule::K { n_t, .. } => Some(n_t),
            _ => None,
        }
    }

    /// Judges a live (not yet stopped) state at time `n`. `pred_x` must be
    /// `predicted_x(n)` when [`PreparedEvent::needs_prediction`] holds.
    #[inline]
    pub fn check_live(&self, n: u64, x: f64, y: f64, pred_x: f64) -> Verdict {
        let p = &self.params;
        match self.rule {
            Rule::K { n_t, eps } => {
                if (n as i64) > n_t || n_t < 0 {
                    Verdict::Pass
                } else if libm::fabs(x / pred_x - 1.0) > eps {
                    Verdict::Fail
                } else if n as i64 == n_t {
                    Verdict::Pass
                } else {
                    Verdict::Pending
                }
            }
            Rule::L { eps } => {
                if p.a() * n as f64 >= p.total() {
                    return Verdict::Pass;
                }
                let denom = p.remaining(n) - pred_x;
                if denom > 0.0 && libm::fabs(y / denom - 1.0) > eps {
                    Verdict::Fail
                } else {
                    Verdict::Pending
                }
            }
            Rule::R => Verdict::Pending,
            Rule::Sigma { m, eps } => {
                if x < (1.0 - eps) * pred_x || x > (1.0 + eps) * pred_x {
                    Verdict::Fail
                } else if x <= m {
                    Verdict::Pass
                } else {
                    Verdict::Pending
                }
            }
            Rule::Tau { n0 } => {
                if n >= n0 {
                    Verdict::Pass
                } else if is_zero(p, x) {
                    Verdict::Fail
                } else {
                    Verdict::Pending
                }
            }
        }
    }

    /// Settles a still-pending event given the frozen state reached at `rho`.
    pub fn check_stopped(&self, rho: u64, x: f64, y: f64) -> bool {
        let p = &self.params;
        match self.rule {
            Rule::K { n_t, .. } => n_t < 0 || rho as i64 > n_t,
            Rule::L { eps } => {
                let mut n = rho;
                while p.a() * (n as f64) < p.total() {
                    let denom = predicted_y_raw(p, n as f64);
                    if denom > 0.0 && libm::fabs(y / denom - 1.0) > eps {
                        return false;
                    }
                    n += 1;
                }
                true
            }
            Rule::R => p.remaining(rho) <= 0.0,
            Rule::Sigma { .. } => false,
            Rule::Tau { n0 } => rho >= n0 || !is_zero(p, x),
        }
    }

    /// Judges one state, live or stopped.
    #[inline]
    pub fn check_state(&self, state: &UrnState, pred_x: f64) -> Verdict {
        match state.rho {
            Some(rho) => {
                if self.check_stopped(rho, state.x, state.y) {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
            None => self.check_live(state.n, state.x, state.y, pred_x),
        }
    }

    /// Evaluates the event on a path given as consecutive states from `n = 0`
    /// ending in a stopped state.
    pub fn evaluate<I: IntoIterator<Item = UrnState>>(&self, path: I) -> bool {
        let needs = self.needs_prediction();
        for s in path {
            let pred = if needs { predicted_x_raw(&self.params, s.n as f64) } else { f64::NAN };
            match self.check_state(&s, pred) {
                Verdict::Pass => return true,
                Verdict::Fail => return false,
                Verdict::Pending => {}
            }
        }
        debug_assert!(false, "path ended before the process stopped");
        false
    }
}

/// Tracks several events along one path, stopping work once all are settled.
#[derive(Debug, Clone)]
pub struct EventSet {
    events: Vec<PreparedEvent>,
    verdicts: Vec<Verdict>,
    pending: usize,
    needs_prediction: bool,
}

impl EventSet {
    pub fn new(events: Vec<PreparedEvent>) -> Self {
        let needs_prediction = events.iter().any(PreparedEvent::needs_prediction);
        let pending = events.len();
        EventSet { verdicts: alloc::vec![Verdict::Pending; pending], events, pending, needs_prediction }
    }

    pub fn reset(&mut self) {
        self.verdicts.iter_mut().for_each(|v| *v = Verdict::Pending);
        self.pending = self.events.len();
    }

    pub fn is_settled(&self) -> bool {
        self.pending == 0
    }

    /// Feeds one state; returns true once every event is settled.
    #[inline]
    pub fn observe(&mut self, params: &UrnParams, state: &UrnState) -> bool {
        let pred = if self.needs_prediction && state.rho.is_none() {
            predicted_x_raw(params, state.n as f64)
        } else {
            f64::NAN
        };
        for (ev, verdict) in self.events.iter().zip(self.verdicts.iter_mut()) {
            if *verdict != Verdict::Pending {
                continue;
            }
            let v = ev.check_state(state, pred);
            if v != Verdict::Pending {
                *verdict = v;
                self.pending -= 1;
            }
        }
        self.pending == 0
    }

    /// Outcome per event; pending events count as failures.
    pub fn outcomes(&self) -> Vec<bool> {
        self.verdicts.iter().map(|v| *v == Verdict::Pass).collect()
    }

    pub fn events(&self) -> &[PreparedEvent] {
        &self.events
    }
}

fn eval(traj: &UrnTrajectory, event: Event) -> Result<bool> {
    let prepared = PreparedEvent::new(event, &traj.params)?;
    Ok(prepared.evaluate(traj.states.iter().copied()))
}

/// Whether the trajectory lies in the K event for `(t, eps)`.
pub fn event_k(traj: &UrnTrajectory, t: f64, eps: f64) -> Result<bool> {
    eval(traj, Event::K { t, eps })
}

/// Whether the trajectory lies in the L event for `eps`.
pub fn event_l(traj: &UrnTrajectory, eps: f64) -> Result<bool> {
    eval(traj, Event::L { eps })
}

/// Whether `M - a rho <= 0`.
pub fn event_r(traj: &UrnTrajectory) -> bool {
    traj.params.remaining(traj.rho()) <= 0.0
}

/// Whether the trajectory lies in the sigma event for `(m, eps)`.
pub fn event_sigma(traj: &UrnTrajectory, m: f64, eps: f64) -> Result<bool> {
    eval(traj, Event::Sigma { m, eps })
}

/// Per-step ratio statistics and hitting times of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedStatistics {
    /// `K_n` for every recorded `n`; `None` once the prediction is zero.
    pub k_n: Vec<Option<f64>>,
    /// `L_n` for every recorded `n`; `None` where the denominator vanishes.
    pub l_n: Vec<Option<f64>>,
    /// First `n` with `X_n = 0`.
    pub tau: Option<u64>,
    /// First `n` with `X_n <= m`, when `m` was given.
    pub sigma_m: Option<u64>,
}

impl DerivedStatistics {
    pub fn compute(traj: &UrnTrajectory, m: Option<f64>) -> Self {
        let p = &traj.params;
        let mut k_n = Vec::with_capacity(traj.states.len());
        let mut l_n = Vec::with_capacity(traj.states.len());
        for s in &traj.states {
            let n = s.n as f64;
            let in_range = p.a() * n <= p.total();
            let px = predicted_x_raw(p, n);
            k_n.push((in_range && px > 0.0).then(|| s.x / px));
            let py = predicted_y_raw(p, n);
            l_n.push((in_range && py > 0.0).then(|| s.y / py));
        }
        let tau = traj.states.iter().find(|s| is_zero(p, s.x)).map(|s| s.n);
        let sigma_m = m.and_then(|m| traj.states.iter().find(|s| s.x <= m).map(|s| s.n));
        DerivedStatistics { k_n, l_n, tau, sigma_m }
    }
}
