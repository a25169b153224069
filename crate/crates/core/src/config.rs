//! Configuration model for random `d`-regular multigraphs.
//!
//! Half-edge `h` belongs to vertex `h / d`. Pairing starts from one active
//! vertex; each step takes an active half-edge `e` chosen by the selection
//! policy and joins it to a uniformly chosen other unused half-edge `f`. When
//! `f` sits on an untouched vertex, that vertex's remaining half-edges become
//! active. The counts `(I_k, A_k - 1)` then follow the drain urn with `a = 2`
//! and `b = d` until the urn's stopping time.
//!
//! If the active set empties while untouched vertices remain, the
//! lowest-numbered untouched vertex is activated so that generation can
//! finish; the urn comparison is truncated at that point.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::urn::UrnParams;

/// Largest `n d` accepted by [`enumerate_exact`] (13!! = 135135 matchings).
pub const ENUMERATION_CAP: u64 = 14;

/// How the active half-edge `e` is picked at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    LowestIndex,
    HighestIndex,
    /// Uniform over active half-edges; consumes randomness.
    Uniform,
}

impl SelectionPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionPolicy::LowestIndex => "lowest",
            SelectionPolicy::HighestIndex => "highest",
            SelectionPolicy::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HalfEdgeStatus {
    Inactive,
    Active,
    Used,
}

#[derive(Debug, Clone)]
enum Selector {
    Lowest(BinaryHeap<Reverse<u32>>),
    Highest(BinaryHeap<u32>),
    Uniform,
}

/// Membership set with O(1) insert, remove and uniform indexing.
#[derive(Debug, Clone)]
struct IndexedSet {
    items: Vec<u32>,
    pos: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl IndexedSet {
    fn new(capacity: usize) -> Self {
        IndexedSet { items: Vec::new(), pos: vec![ABSENT; capacity] }
    }

    fn full(capacity: usize) -> Self {
        IndexedSet { items: (0..capacity as u32).collect(), pos: (0..capacity as u32).collect() }
    }

    fn insert(&mut self, h: u32) {
        debug_assert_eq!(self.pos[h as usize], ABSENT);
        self.pos[h as usize] = self.items.len() as u32;
        self.items.push(h);
    }

    fn remove(&mut self, h: u32) {
        let idx = self.pos[h as usize];
        debug_assert_ne!(idx, ABSENT);
        let last = self.items.pop().expect("non-empty");
        if last != h {
            self.items[idx as usize] = last;
            self.pos[last as usize] = idx;
        }
        self.pos[h as usize] = ABSENT;
    }

    fn len(&self) -> usize {
        self.items.len()
    }
}

/// Outcome of one pairing step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairOutcome {
    pub e: u32,
    pub f: u32,
    /// `f` was on an untouched vertex.
    pub f_was_inactive: bool,
    /// A fresh vertex had to be activated because no active half-edge remained.
    pub reactivated: bool,
}

/// Half-edge bookkeeping for one run of the configuration model.
#[derive(Debug, Clone)]
pub struct PairingState {
    n_vertices: u32,
    degree: u32,
    status: Vec<HalfEdgeStatus>,
    unused: IndexedSet,
    active: IndexedSet,
    selector: Selector,
    touched: Vec<bool>,
    next_fresh: u32,
    edges: Vec<(u32, u32)>,
    i_count: u64,
    steps: u64,
}

impl PairingState {
    /// All half-edges of `start_vertex` active, everything else inactive.
    pub fn init(n_vertices: u64, degree: u64, start_vertex: u64, policy: SelectionPolicy) -> Result<Self> {
        if n_vertices == 0 || degree == 0 {
            return Err(Error::InvalidParams(format!("need n >= 1 and d >= 1, got n = {n_vertices}, d = {degree}")));
        }
        let total = n_vertices
            .checked_mul(degree)
            .filter(|t| *t < u64::from(u32::MAX))
            .ok_or_else(|| Error::SizeCap(format!("n d = {n_vertices} * {degree} half-edges")))?;
        if start_vertex >= n_vertices {
            return Err(Error::InvalidParams(format!("start vertex {start_vertex} out of range 0..{n_vertices}")));
        }
        let total = total as usize;
        let selector = match policy {
            SelectionPolicy::LowestIndex => Selector::Lowest(BinaryHeap::new()),
            SelectionPolicy::HighestIndex => Selector::Highest(BinaryHeap::new()),
            SelectionPolicy::Uniform => Selector::Uniform,
        };
        let mut state = PairingState {
            n_vertices: n_vertices as u32,
            degree: degree as u32,
            status: vec![HalfEdgeStatus::Inactive; total],
            unused: IndexedSet::full(total),
            active: IndexedSet::new(total),
            selector,
            touched: vec![false; n_vertices as usize],
            next_fresh: 0,
            edges: Vec::with_capacity(total / 2),
            i_count: total as u64,
            steps: 0,
        };
        state.touch(start_vertex as u32, None);
        Ok(state)
    }

    pub fn n_vertices(&self) -> u64 {
        u64::from(self.n_vertices)
    }

    pub fn degree(&self) -> u64 {
        u64::from(self.degree)
    }

    /// Current number of active half-edges `A`.
    pub fn a_count(&self) -> u64 {
        self.active.len() as u64
    }

    /// Current number of inactive half-edges `I`.
    pub fn i_count(&self) -> u64 {
        self.i_count
    }

    /// Pairings performed so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn unused_count(&self) -> u64 {
        self.unused.len() as u64
    }

    pub fn status(&self) -> &[HalfEdgeStatus] {
        &self.status
    }

    /// Paired half-edges in pairing order.
    pub fn half_edge_pairs(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn is_complete(&self) -> bool {
        self.unused.len() < 2
    }

    fn set_active(&mut self, h: u32) {
        self.status[h as usize] = HalfEdgeStatus::Active;
        self.active.insert(h);
        match &mut self.selector {
            Selector::Lowest(heap) => heap.push(Reverse(h)),
            Selector::Highest(heap) => heap.push(h),
            Selector::Uniform => {}
        }
    }

    /// Moves every half-edge of an untouched vertex out of the inactive pool;
    /// all but `except` become active.
    fn touch(&mut self, v: u32, except: Option<u32>) {
        debug_assert!(!self.touched[v as usize]);
        self.touched[v as usize] = true;
        let d = self.degree;
        for h in v * d..(v + 1) * d {
            self.i_count -= 1;
            if Some(h) != except {
                self.set_active(h);
            }
        }
    }

    fn mark_used(&mut self, h: u32) {
        if self.status[h as usize] == HalfEdgeStatus::Active {
            self.active.remove(h);
        }
        self.status[h as usize] = HalfEdgeStatus::Used;
        self.unused.remove(h);
    }

    /// Picks `e` (activating a fresh vertex first if needed) and marks it used.
    fn take_e<R: RngCore + ?Sized>(&mut self, rng: Option<&mut R>) -> Result<(u32, bool)> {
        if self.unused.len() < 2 {
            return Err(Error::Exhausted);
        }
        let mut reactivated = false;
        if self.active.len() == 0 {
            while self.touched[self.next_fresh as usize] {
                self.next_fresh += 1;
            }
            self.touch(self.next_fresh, None);
            reactivated = true;
        }
        let e = match &mut self.selector {
            Selector::Lowest(heap) => loop {
                let Reverse(h) = heap.pop().expect("active half-edges are in the heap");
                if self.status[h as usize] == HalfEdgeStatus::Active {
                    break h;
                }
            },
            Selector::Highest(heap) => loop {
                let h = heap.pop().expect("active half-edges are in the heap");
                if self.status[h as usize] == HalfEdgeStatus::Active {
                    break h;
                }
            },
            Selector::Uniform => {
                let rng = rng.ok_or(Error::UnsupportedPolicy("uniform"))?;
                self.active.items[seed::below(rng, self.active.len() as u64) as usize]
            }
        };
        self.mark_used(e);
        Ok((e, reactivated))
    }

    /// Joins `e` to the unused half-edge at position `index` of the unused pool.
    fn connect(&mut self, e: u32, index: usize, reactivated: bool) -> PairOutcome {
        let f = self.unused.items[index];
        let f_was_inactive = self.status[f as usize] == HalfEdgeStatus::Inactive;
        if f_was_inactive {
            self.touch(f / self.degree, Some(f));
            self.status[f as usize] = HalfEdgeStatus::Used;
            self.unused.remove(f);
        } else {
            self.mark_used(f);
        }
        self.edges.push((e, f));
        self.steps += 1;
        PairOutcome { e, f, f_was_inactive, reactivated }
    }

    /// One pairing: `e` by policy, `f` uniform over the other unused half-edges.
    pub fn pair_step<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<PairOutcome> {
        let (e, reactivated) = self.take_e(Some(&mut *rng))?;
        let index = seed::below(rng, self.unused.len() as u64) as usize;
        Ok(self.connect(e, index, reactivated))
    }

    /// Collapses paired half-edges into vertex pairs `(min, max)`.
    pub fn graph_edges(&self) -> Vec<(u32, u32)> {
        let d = self.degree;
        self.edges
            .iter()
            .map(|&(e, f)| {
                let (u, v) = (e / d, f / d);
                (u.min(v), u.max(v))
            })
            .collect()
    }
}

/// A generated multigraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedGraph {
    pub n_vertices: u64,
    pub degree: u64,
    /// Vertex pairs `(u, v)` with `u <= v`, in pairing order.
    pub edges: Vec<(u32, u32)>,
    pub simple: bool,
}

/// No self-loops and no repeated vertex pair.
pub fn is_simple(edges: &[(u32, u32)]) -> bool {
    if edges.iter().any(|(u, v)| u == v) {
        return false;
    }
    let mut sorted = edges.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).all(|w| w[0] != w[1])
}

/// `(A_k, I_k)` after `k` pairings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingCounts {
    pub a: u64,
    pub i: u64,
}

fn check_even(n_vertices: u64, degree: u64) -> Result<()> {
    let total = n_vertices.saturating_mul(degree);
    if total % 2 == 1 {
        return Err(Error::OddHalfEdges(total));
    }
    Ok(())
}

/// Runs the full pairing from vertex 0 with the stream derived from `seed`.
pub fn generate(
    n_vertices: u64,
    degree: u64,
    seed: u64,
    policy: SelectionPolicy,
) -> Result<(GeneratedGraph, Vec<PairingCounts>)> {
    generate_with(n_vertices, degree, &mut seed::rng_from_seed(seed), policy)
}

pub fn generate_with<R: RngCore + ?Sized>(
    n_vertices: u64,
    degree: u64,
    rng: &mut R,
    policy: SelectionPolicy,
) -> Result<(GeneratedGraph, Vec<PairingCounts>)> {
    check_even(n_vertices, degree)?;
    let mut state = PairingState::init(n_vertices, degree, 0, policy)?;
    let half = n_vertices * degree / 2;
    let mut counts = Vec::with_capacity(half as usize + 1);
    counts.push(PairingCounts { a: state.a_count(), i: state.i_count() });
    for _ in 0..half {
        state.pair_step(rng)?;
        counts.push(PairingCounts { a: state.a_count(), i: state.i_count() });
    }
    let edges = state.graph_edges();
    let simple = is_simple(&edges);
    Ok((GeneratedGraph { n_vertices, degree, edges, simple }, counts))
}

/// An accepted simple graph with its pairing trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleSample {
    pub graph: GeneratedGraph,
    pub counts: Vec<PairingCounts>,
    /// Attempts used, including the accepted one.
    pub attempts: u64,
}

/// Regenerates until the graph is simple. Attempt `r` (from 0) uses the
/// stream `seed::replicate_rng(seed, r)`.
pub fn sample_simple(
    n_vertices: u64,
    degree: u64,
    seed: u64,
    max_attempts: u64,
    policy: SelectionPolicy,
) -> Result<SimpleSample> {
    check_even(n_vertices, degree)?;
    if max_attempts == 0 {
        return Err(Error::InvalidParams("max_attempts must be at least 1".into()));
    }
    for attempt in 0..max_attempts {
        let mut rng = seed::replicate_rng(seed, attempt);
        let (graph, counts) = generate_with(n_vertices, degree, &mut rng, policy)?;
        if graph.simple {
            return Ok(SimpleSample { graph, counts, attempts: attempt + 1 });
        }
    }
    Err(Error::AttemptsExhausted { attempts: max_attempts, simple_fraction: 0.0 })
}

/// Urn parameters matching the configuration model: `a = 2`, `b = d`,
/// `x0 = (n - 1) d`, `y0 = d - 1`. Needs `d >= 3`.
pub fn urn_params(n_vertices: u64, degree: u64) -> Result<UrnParams> {
    UrnParams::new_strict(2.0, degree as f64, ((n_vertices - 1) * degree) as f64, degree as f64 - 1.0)
}

/// One point of the urn view `(X_k, Y_k) = (I_k, A_k - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UrnPoint {
    pub k: u64,
    pub x: i64,
    pub y: i64,
}

/// Maps pairing counts to the urn view, keeping steps up to and including the
/// urn's stopping step: the first `k` with `A_k - 1 < 0` or `n d - 1 - 2k <= 0`.
pub fn to_urn_trajectory(counts: &[PairingCounts]) -> Vec<UrnPoint> {
    let mut out = Vec::new();
    let total = counts.first().map_or(0, |c| c.a + c.i) as i64;
    for (k, c) in counts.iter().enumerate() {
        let x = c.i as i64;
        let y = c.a as i64 - 1;
        out.push(UrnPoint { k: k as u64, x, y });
        if y < 0 || total - 1 - 2 * k as i64 <= 0 || x < 0 {
            break;
        }
    }
    out
}

/// Length of the live prefix: the urn's stopping step `rho`.
fn urn_rho(points: &[UrnPoint]) -> u64 {
    points.last().map_or(0, |p| p.k)
}

/// Number of active half-edges at the first step with no inactive half-edge.
pub fn active_at_exhaustion<R: RngCore + ?Sized>(
    n_vertices: u64,
    degree: u64,
    rng: &mut R,
    policy: SelectionPolicy,
) -> Result<u64> {
    let mut state = PairingState::init(n_vertices, degree, 0, policy)?;
    while state.i_count() > 0 {
        state.pair_step(rng)?;
    }
    Ok(state.a_count())
}

/// Predicted `A_k / (n d)`:
/// `(1 - 2k/(n d)) - ((n-1) d / (n d)) (1 - 2k/(n d - 1))^(d/2)`, with the
/// power taken as zero once its base is non-positive.
pub fn predicted_active_fraction(n_vertices: u64, degree: u64, k: u64) -> f64 {
    let nd = (n_vertices * degree) as f64;
    let k = k as f64;
    let base = 1.0 - 2.0 * k / (nd - 1.0);
    let inactive = if base > 0.0 {
        ((n_vertices - 1) * degree) as f64 / nd * libm::pow(base, degree as f64 / 2.0)
    } else {
        0.0
    };
    (1.0 - 2.0 * k / nd) - inactive
}

/// Exact per-step law of the pairing process over all perfect matchings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingLaw {
    pub n_vertices: u64,
    pub degree: u64,
    pub policy: SelectionPolicy,
    /// Number of perfect matchings, `(n d - 1)!!`.
    pub matchings: u64,
    /// Per step `k`: `(A_k, I_k)` to number of matchings.
    pub counts: Vec<BTreeMap<(u64, u64), u64>>,
    /// Per step `k`: urn view `(X_k, Y_k)` to number of matchings with `rho > k`.
    pub urn_counts: Vec<BTreeMap<(i64, i64), u64>>,
    /// Matchings that collapse to a simple graph.
    pub simple: u64,
}

impl PairingLaw {
    pub fn simple_probability(&self) -> f64 {
        self.simple as f64 / self.matchings as f64
    }

    /// Exact live urn law at step `k`.
    pub fn urn_law_exact(&self, k: usize) -> BTreeMap<(i64, i64), BigRational> {
        let total = BigInt::from(self.matchings);
        self.urn_counts
            .get(k)
            .map(|m| {
                m.iter()
                    .map(|(key, c)| (*key, BigRational::new(BigInt::from(*c), total.clone())))
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// Enumerates every perfect matching of the `n d` half-edges in the order the
/// deterministic `policy` would pair them, accumulating exact step laws.
pub fn enumerate_exact(n_vertices: u64, degree: u64, policy: SelectionPolicy) -> Result<PairingLaw> {
    check_even(n_vertices, degree)?;
    let total = n_vertices * degree;
    if total > ENUMERATION_CAP {
        return Err(Error::SizeCap(format!("n d = {total} exceeds the enumeration cap {ENUMERATION_CAP}")));
    }
    if policy == SelectionPolicy::Uniform {
        return Err(Error::UnsupportedPolicy("uniform"));
    }
    let half = (total / 2) as usize;
    let mut law = PairingLaw {
        n_vertices,
        degree,
        policy,
        matchings: 0,
        counts: vec![BTreeMap::new(); half + 1],
        urn_counts: vec![BTreeMap::new(); half + 1],
        simple: 0,
    };
    let state = PairingState::init(n_vertices, degree, 0, policy)?;
    let mut path = vec![PairingCounts { a: state.a_count(), i: state.i_count() }];
    descend(state, &mut path, &mut law);
    Ok(law)
}

fn descend(state: PairingState, path: &mut Vec<PairingCounts>, law: &mut PairingLaw) {
    if state.is_complete() {
        law.matchings += 1;
        for (k, c) in path.iter().enumerate() {
            *law.counts[k].entry((c.a, c.i)).or_insert(0) += 1;
        }
        let urn = to_urn_trajectory(path);
        let rho = urn_rho(&urn);
        for p in urn.iter().filter(|p| p.k < rho) {
            *law.urn_counts[p.k as usize].entry((p.x, p.y)).or_insert(0) += 1;
        }
        if is_simple(&state.graph_edges()) {
            law.simple += 1;
        }
        return;
    }
    let mut base = state;
    let (e, reactivated) = base.take_e::<seed::UrnRng>(None).expect("at least two unused half-edges");
    for index in 0..base.unused.len() {
        let mut next = base.clone();
        next.connect(e, index, reactivated);
        path.push(PairingCounts { a: next.a_count(), i: next.i_count() });
        descend(next, path, law);
        path.pop();
    }
}
