//! The dynamic-programming oracle against explicit enumeration of every draw
//! sequence on small integral instances.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use urnlab_core::oracle;
use urnlab_core::urn::{stop_reason, Event, PreparedEvent, UrnParams, UrnState};

struct Path {
    states: Vec<UrnState>,
    prob: BigRational,
}

fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn enumerate(params: &UrnParams) -> Vec<Path> {
    let (a, b) = (params.a() as i64, params.b() as i64);
    let mut out = Vec::new();
    let mut stack = vec![Path { states: vec![params.initial_state()], prob: BigRational::one() }];
    while let Some(path) = stack.pop() {
        let last = *path.states.last().unwrap();
        if last.rho.is_some() {
            out.push(path);
            continue;
        }
        let (x, y) = (last.x as i64, last.y as i64);
        let n = last.n + 1;
        for (blue, nx, ny) in [(true, x - b, y + b - a), (false, x, y - a)] {
            let w = if blue { x } else { y };
            if w == 0 {
                continue;
            }
            let (fx, fy) = (nx as f64, ny as f64);
            let rho = stop_reason(params, n, fx, fy).map(|_| n);
            let mut states = path.states.clone();
            states.push(UrnState { n, x: fx, y: fy, rho });
            stack.push(Path { states, prob: &path.prob * ratio(w, x + y) });
        }
    }
    out
}

fn brute_prob(params: &UrnParams, paths: &[Path], event: Event) -> BigRational {
    let prepared = PreparedEvent::new(event, params).unwrap();
    paths
        .iter()
        .filter(|p| prepared.evaluate(p.states.iter().copied()))
        .fold(BigRational::zero(), |acc, p| acc + &p.prob)
}

const INSTANCES: [(f64, f64, f64, f64); 6] =
    [(1.0, 2.0, 4.0, 3.0), (1.0, 2.0, 6.0, 1.0), (2.0, 3.0, 9.0, 4.0), (1.0, 3.0, 9.0, 2.0), (2.0, 5.0, 10.0, 7.0), (1.0, 2.0, 8.0, 0.0)];

#[test]
fn path_masses_sum_to_one() {
    for (a, b, x0, y0) in INSTANCES {
        let p = UrnParams::new(a, b, x0, y0).unwrap();
        let total = enumerate(&p).iter().fold(BigRational::zero(), |acc, q| acc + &q.prob);
        assert!(total.is_one(), "{a} {b} {x0} {y0}");
    }
}

#[test]
fn rho_law_matches_enumeration() {
    for (a, b, x0, y0) in INSTANCES {
        let p = UrnParams::new(a, b, x0, y0).unwrap();
        let dist = oracle::build(&p).unwrap();
        let mut by_rho = std::collections::BTreeMap::<u64, f64>::new();
        for path in enumerate(&p) {
            let rho = path.states.last().unwrap().rho.unwrap();
            *by_rho.entry(rho).or_default() += num_traits::ToPrimitive::to_f64(&path.prob).unwrap();
        }
        let oracle_law = dist.rho_law();
        for (rho, mass) in &by_rho {
            let got = oracle_law.get(rho).copied().unwrap_or(0.0);
            assert!((got - mass).abs() < 1e-12, "rho {rho}: {got} vs {mass}");
        }
    }
}

#[test]
fn event_probabilities_match_enumeration_exactly() {
    for (a, b, x0, y0) in INSTANCES {
        let p = UrnParams::new(a, b, x0, y0).unwrap();
        let dist = oracle::build(&p).unwrap();
        assert!(dist.is_exact());
        let paths = enumerate(&p);
        let scale = libm::pow(x0, a / b);
        let events = [
            Event::R,
            Event::L { eps: 0.45 },
            Event::L { eps: 0.25 },
            Event::K { t: 0.5 * scale, eps: 0.4 },
            Event::K { t: 0.9 * scale, eps: 0.2 },
            Event::TauGeq { n: 2 },
            Event::TauGeq { n: p.horizon() / 2 },
            Event::Sigma { m: p.total() / 2.0, eps: 0.45 },
        ];
        for ev in events {
            let expect = brute_prob(&p, &paths, ev);
            let got = dist.event_prob(&ev).unwrap();
            assert_eq!(got.exact.as_ref(), Some(&expect), "{ev:?} on ({a}, {b}, {x0}, {y0})");
        }
    }
}
