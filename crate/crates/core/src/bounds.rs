//! Closed-form estimates for the drain urn.
//!
//! The probability bounds depend on an unspecified constant `C(a, b)`, so
//! every evaluator takes it as an input. Each report carries the raw value,
//! the value clamped to `[0, 1]`, and whether the inputs satisfy the domain
//! condition under which the estimate is claimed.

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::urn::UrnParams;

/// Inputs shared by the bound evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub params: UrnParams,
    /// The constant `C`; strictly positive.
    pub c_const: f64,
    pub t: f64,
    pub eps: f64,
    pub m: f64,
    pub n: u64,
}

impl BoundInputs {
    pub fn new(params: UrnParams) -> Self {
        BoundInputs { params, c_const: 1.0, t: 1.0, eps: 0.25, m: 1.0, n: 0 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c_const > 0.0 && self.c_const.is_finite()) {
            return Err(Error::OutOfDomain(format!("C must be positive, got {}", self.c_const)));
        }
        Ok(())
    }

    /// Rejects `eps <= 0`. Values at or above 1/2 are still evaluated; the
    /// result then reports `domain_ok = false` through [`BoundInputs::eps_ok`].
    fn require_eps(&self) -> Result<()> {
        if self.eps > 0.0 && self.eps.is_finite() {
            Ok(())
        } else {
            Err(Error::OutOfDomain(format!("eps must be positive, got {}", self.eps)))
        }
    }

    fn eps_ok(&self) -> bool {
        self.eps < 0.5
    }

    fn require_t(&self) -> Result<()> {
        if self.t > 0.0 {
            Ok(())
        } else {
            Err(Error::OutOfDomain(format!("t must be positive, got {}", self.t)))
        }
    }
}

/// One evaluated estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    pub clamped_value: f64,
    /// True when `value` had to be clamped into `[0, 1]`.
    pub clamped: bool,
    pub domain_ok: bool,
    pub condition: String,
    pub inputs: BoundInputs,
}

impl BoundReport {
    fn probability(name: &str, value: f64, domain_ok: bool, condition: String, inputs: &BoundInputs) -> Self {
        let clamped_value = value.clamp(0.0, 1.0);
        BoundReport {
            name: name.into(),
            value,
            clamped_value,
            clamped: clamped_value != value,
            domain_ok,
            condition,
            inputs: *inputs,
        }
    }
}

/// Direct product `prod_{k<n} (1 - b/(M - a k))` with its exponential sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductBounds {
    pub product: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ProductBounds {
    pub fn holds(&self) -> bool {
        self.lower <= self.product && self.product <= self.upper
    }
}

/// The product `prod_{k=0}^{n-1} (1 - b/(M - a k))` and its bounds
/// `exp(-b^2/(a(M - a n))) (1 - a n/M)^(b/a)` and `exp(b/(M - a n)) (1 - a n/M)^(b/a)`,
/// valid for `n >= 1` with `M - a n >= 2b`.
pub fn lemma_product(params: &UrnParams, n: u64) -> Result<ProductBounds> {
    let (a, b, m) = (params.a(), params.b(), params.total());
    let rest = params.remaining(n);
    if n == 0 || rest < 2.0 * b {
        return Err(Error::OutOfDomain(format!(
            "need n >= 1 and M - a n >= 2b; got n = {n}, M - a n = {rest}, 2b = {}",
            2.0 * b
        )));
    }
    let product = (0..n).fold(1.0, |acc, k| acc * (1.0 - b / (m - a * k as f64)));
    let base = libm::pow(1.0 - a * n as f64 / m, b / a);
    Ok(ProductBounds {
        product,
        lower: libm::exp(-b * b / (a * rest)) * base,
        upper: libm::exp(b / rest) * base,
    })
}

/// `P(K) >= 1 - C / (t^(b/a) eps^2)`, claimed for `t >= C x0^(a/b) / (M eps)`.
pub fn bound_k(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    inputs.require_eps()?;
    inputs.require_t()?;
    let p = &inputs.params;
    let (a, b, c, t, eps) = (p.a(), p.b(), inputs.c_const, inputs.t, inputs.eps);
    let value = 1.0 - c / (libm::pow(t, b / a) * eps * eps);
    let threshold = c * libm::pow(p.x0(), a / b) / (p.total() * eps);
    Ok(BoundReport::probability(
        "bound_k",
        value,
        t >= threshold && inputs.eps_ok(),
        format!("eps < 1/2 and t >= C x0^(a/b) / (M eps) = {threshold}"),
        inputs,
    ))
}

/// `n`-form of [`bound_k`]: `1 - C / (x0 (1 - a n/M)^(b/a) eps^2)` for `M - a n >= C/eps`.
pub fn bound_k_alt(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    inputs.require_eps()?;
    let p = &inputs.params;
    let (c, eps, n) = (inputs.c_const, inputs.eps, inputs.n);
    let pred = crate::urn::predicted_x(p, n)?;
    let value = 1.0 - c / (pred * eps * eps);
    let rest = p.remaining(n);
    Ok(BoundReport::probability(
        "bound_k_alt",
        value,
        rest >= c / eps && inputs.eps_ok(),
        format!("eps < 1/2 and M - a n >= C / eps = {}", c / eps),
        inputs,
    ))
}

/// `P(tau >= n_t) <= C t^(b/(2b-a))`, claimed for `t >= b x0^(a/b) / M`.
pub fn bound_tau(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    inputs.require_t()?;
    let p = &inputs.params;
    let (a, b) = (p.a(), p.b());
    let value = inputs.c_const * libm::pow(inputs.t, b / (2.0 * b - a));
    let threshold = b * libm::pow(p.x0(), a / b) / p.total();
    Ok(BoundReport::probability(
        "bound_tau",
        value,
        inputs.t >= threshold,
        format!("t >= b x0^(a/b) / M = {threshold}"),
        inputs,
    ))
}

/// `n`-form of [`bound_tau`]: `C x0^(a/(2b-a)) (1 - a n/M)^(b/(2b-a))` for `M - a n >= b`.
pub fn bound_tau_alt(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    let p = &inputs.params;
    let (a, b, n) = (p.a(), p.b(), inputs.n);
    let rest = p.remaining(n);
    let frac = (rest / p.total()).max(0.0);
    let k = 2.0 * b - a;
    let value = inputs.c_const * libm::pow(p.x0(), a / k) * libm::pow(frac, b / k);
    Ok(BoundReport::probability(
        "bound_tau_alt",
        value,
        rest >= b,
        format!("M - a n >= b = {b}"),
        inputs,
    ))
}

/// `1 - C / (m eps^2)` for staying in the `eps` band until the blue count drops to `m`.
pub fn bound_sigma(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    inputs.require_eps()?;
    if !(inputs.m > 0.0) {
        return Err(Error::OutOfDomain(format!("m must be positive, got {}", inputs.m)));
    }
    let value = 1.0 - inputs.c_const / (inputs.m * inputs.eps * inputs.eps);
    Ok(BoundReport::probability("bound_sigma", value, inputs.eps_ok(), "eps < 1/2".into(), inputs))
}

/// `P(R) >= 1 - C x0^(a/(2b-a)) / M^(b/(2b-a))`, together with the weaker
/// `1 - C / M^((b-a)/(2b-a))` that follows from `x0 <= M`.
pub fn bound_r(inputs: &BoundInputs) -> Result<(BoundReport, BoundReport)> {
    inputs.validate()?;
    let p = &inputs.params;
    let (a, b, m, c) = (p.a(), p.b(), p.total(), inputs.c_const);
    let k = 2.0 * b - a;
    let strong = 1.0 - c * libm::pow(p.x0(), a / k) / libm::pow(m, b / k);
    let weak = 1.0 - c / libm::pow(m, (b - a) / k);
    Ok((
        BoundReport::probability("bound_r", strong, true, "always".into(), inputs),
        BoundReport::probability("bound_r_weak", weak, true, "always".into(), inputs),
    ))
}

/// Lower bound `M t x0^(-a/b)` and upper bound `2 M t x0^(-a/b)` on `M - a n_t`.
/// The upper one holds once `a <= M t x0^(-a/b)`.
pub fn n_t_gap_bounds(params: &UrnParams, t: f64) -> (f64, f64) {
    let g = params.total() * t * libm::pow(params.x0(), -params.a() / params.b());
    (g, 2.0 * g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::urn::n_t;

    fn params(a: f64, b: f64, x0: f64, y0: f64) -> UrnParams {
        UrnParams::new(a, b, x0, y0).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn lemma_small_example() {
        let p = params(2.0, 4.0, 12.0, 8.0);
        let r = lemma_product(&p, 5).unwrap();
        // (16/20)(14/18)(12/16)(10/14)(8/12) = 2/9
        assert!(close(r.product, 2.0 / 9.0, 1e-15));
        assert!(close(r.lower, (-0.8f64).exp() * 0.25, 1e-15));
        assert!(close(r.upper, 0.4f64.exp() * 0.25, 1e-15));
        assert!(close(r.lower, 0.11233, 1e-5));
        assert!(close(r.upper, 0.37296, 1e-5));
        assert!(r.holds());
    }

    #[test]
    fn lemma_single_factor_and_domain() {
        let p = params(1.0, 3.0, 30.0, 10.0);
        assert_eq!(lemma_product(&p, 1).unwrap().product, 1.0 - 3.0 / 40.0);
        assert!(lemma_product(&p, 0).is_err());
        assert!(lemma_product(&p, 35).is_err());
        assert!(lemma_product(&p, 34).is_ok());
    }

    #[test]
    fn lemma_large_instance() {
        let p = params(2.0, 20.0, 999_980.0, 20.0);
        let r = lemma_product(&p, 10_000).unwrap();
        assert!(r.holds(), "{r:?}");
    }

    fn inputs(p: UrnParams) -> BoundInputs {
        BoundInputs::new(p)
    }

    #[test]
    fn bound_k_examples() {
        let p = params(2.0, 4.0, 64.0, 36.0);
        let r = bound_k(&BoundInputs { t: 10.0, eps: 0.5, ..inputs(p) }).unwrap();
        assert!(close(r.value, 0.96, 1e-12));
        assert!(!r.domain_ok, "eps = 1/2 sits outside the claimed range");
        let r = bound_k(&BoundInputs { t: 10.0, eps: 0.4, ..inputs(p) }).unwrap();
        assert!(r.domain_ok);
        let big = bound_k(&BoundInputs { t: 1e9, eps: 0.4, ..inputs(p) }).unwrap();
        assert!(close(big.value, 1.0, 1e-12));
        let p2 = params(2.0, 4.0, 1e6, 0.0);
        let low = bound_k(&BoundInputs { t: 0.001, eps: 0.1, ..inputs(p2) }).unwrap();
        assert!(!low.domain_ok);
        assert!(low.value < 0.0 && low.clamped && low.clamped_value == 0.0);
        assert!(bound_k(&BoundInputs { eps: 0.0, ..inputs(p) }).is_err());
        assert!(bound_k(&BoundInputs { c_const: 0.0, ..inputs(p) }).is_err());
    }

    #[test]
    fn bound_k_alt_example() {
        let p = params(2.0, 4.0, 64.0, 36.0);
        let r = bound_k_alt(&BoundInputs { n: 25, eps: 0.5, ..inputs(p) }).unwrap();
        assert!(close(r.value, 0.75, 1e-12));
        assert!(!r.domain_ok);
        let r = bound_k_alt(&BoundInputs { n: 25, eps: 0.25, ..inputs(p) }).unwrap();
        assert!(r.domain_ok && close(r.value, 0.0, 1e-12));
        let p = params(2.0, 4.0, 1e8, 0.0);
        let r = bound_k_alt(&BoundInputs { n: 0, eps: 0.25, ..inputs(p) }).unwrap();
        assert!(r.value > 0.999_99);
    }

    #[test]
    fn bound_tau_examples() {
        let p = params(2.0, 4.0, 64.0, 36.0);
        let r = bound_tau(&BoundInputs { t: 0.5, ..inputs(p) }).unwrap();
        assert!(close(r.value, 0.629_960_524_947_436_6, 1e-12));
        let r = bound_tau(&BoundInputs { t: 1.0, ..inputs(p) }).unwrap();
        assert_eq!(r.value, 1.0);
        // alternative form at the last valid n: M - a n = b
        let r = bound_tau_alt(&BoundInputs { n: 48, ..inputs(p) }).unwrap();
        assert!(r.domain_ok);
        let beyond = bound_tau_alt(&BoundInputs { n: 49, ..inputs(p) }).unwrap();
        assert!(!beyond.domain_ok);
        let earlier = bound_tau_alt(&BoundInputs { n: 47, ..inputs(p) }).unwrap();
        assert!(r.value < earlier.value);
        let expected = 64f64.powf(2.0 / 6.0) * (4.0f64 / 100.0).powf(4.0 / 6.0);
        assert!(close(r.value, expected, 1e-12));
    }

    #[test]
    fn bound_sigma_and_r_examples() {
        let p = params(2.0, 4.0, 1e6, 0.0);
        let r = bound_sigma(&BoundInputs { m: 100.0, eps: 0.5, ..inputs(p) }).unwrap();
        assert!(close(r.value, 0.96, 1e-12));
        let (strong, weak) = bound_r(&inputs(p)).unwrap();
        assert!(close(strong.value, 0.99, 1e-12));
        assert!(close(strong.value, weak.value, 1e-15));
        let q = params(2.0, 4.0, 64.0, 36.0);
        let (strong, weak) = bound_r(&inputs(q)).unwrap();
        assert!(strong.value >= weak.value);
    }

    #[test]
    fn monotonicity() {
        let p = params(2.0, 4.0, 1e4, 100.0);
        let base = inputs(p);
        let mut last = f64::NEG_INFINITY;
        for t in [0.5, 1.0, 2.0, 5.0, 20.0] {
            let v = bound_k(&BoundInputs { t, eps: 0.2, ..base }).unwrap().value;
            assert!(v >= last);
            last = v;
        }
        let mut last = f64::NEG_INFINITY;
        for eps in [0.05, 0.1, 0.2, 0.3, 0.49] {
            let v = bound_k(&BoundInputs { t: 3.0, eps, ..base }).unwrap().value;
            assert!(v >= last);
            last = v;
        }
        let mut last = f64::NEG_INFINITY;
        for t in [0.01, 0.1, 0.5, 1.0] {
            let v = bound_tau(&BoundInputs { t, ..base }).unwrap().value;
            assert!(v >= last);
            last = v;
        }
        let mut last = f64::INFINITY;
        for x0 in [4.0, 40.0, 400.0, 4000.0, 9000.0] {
            let q = params(2.0, 4.0, x0, 10_000.0 - x0);
            let v = bound_r(&inputs(q)).unwrap().0.value;
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn k_forms_agree_at_n_t() {
        // with M - a n_t in [g, 2g], the n-form failure term lies in
        // [2^(-b/a), 1] times the t-form failure term
        for (a, b) in [(1.0, 2.0), (2.0, 3.0), (2.0, 4.0), (2.0, 20.0)] {
            for x0 in [1e3, 1e5, 1e7] {
                let p = params(a, b, (x0 / b).round() * b, 7.0);
                let g_min = a * libm::pow(p.x0(), a / b) / p.total();
                for t in [1.0, 2.0, 5.0, 10.0, 30.0] {
                    if t < g_min {
                        continue;
                    }
                    let nt = n_t(&p, t).unwrap();
                    if nt < 0 {
                        continue;
                    }
                    let base = BoundInputs { t, eps: 0.2, n: nt as u64, ..inputs(p) };
                    let fk = 1.0 - bound_k(&base).unwrap().value;
                    let fa = 1.0 - bound_k_alt(&base).unwrap().value;
                    let lo = libm::pow(2.0, -b / a) * fk;
                    assert!(fa <= fk * (1.0 + 1e-9) && fa >= lo * (1.0 - 1e-9), "a={a} b={b} x0={x0} t={t}");
                }
            }
        }
    }

    #[test]
    fn n_t_gap_sandwich() {
        let p = params(2.0, 4.0, 1e6, 0.0);
        for t in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let nt = n_t(&p, t).unwrap();
            let gap = p.total() - p.a() * nt as f64;
            let (lo, hi) = n_t_gap_bounds(&p, t);
            assert!(gap >= lo - 1e-6 && gap <= hi + 1e-6, "t={t} gap={gap} [{lo},{hi}]");
        }
    }
}
