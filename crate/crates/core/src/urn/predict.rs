use alloc::format;

use super::{UrnParams, UrnTrajectory};
use crate::error::{Error, Result};

/// `x0 (1 - a n / M)^(b/a)` without range checks, evaluated as
/// `exp((b/a) log(1 - a n / M))`. The log uses `log1p(-a n / M)` while
/// `a n < M / 2` and `log((M - a n) / M)` beyond, so neither end loses digits
/// to cancellation.
#[inline]
pub(crate) fn predicted_x_raw(params: &UrnParams, n: f64) -> f64 {
    let m = params.total();
    let used = params.a() * n;
    let rest = m - used;
    if rest <= 0.0 {
        return 0.0;
    }
    let log_base = if used < 0.5 * m {
        libm::log1p(-used / m)
    } else {
        libm::log(rest / m)
    };
    params.x0() * libm::exp(params.b() / params.a() * log_base)
}

/// `(M - a n) - predicted_x(n)` without range checks.
#[inline]
pub(crate) fn predicted_y_raw(params: &UrnParams, n: f64) -> f64 {
    (params.total() - params.a() * n) - predicted_x_raw(params, n)
}

fn check_range(params: &UrnParams, n: u64) -> Result<()> {
    if params.a() * n as f64 > params.total() {
        return Err(Error::OutOfDomain(format!(
            "n = {n} exceeds M / a = {}",
            params.total() / params.a()
        )));
    }
    Ok(())
}

/// Deterministic blue-ball trajectory `x0 (1 - a n / M)^(b/a)` for `0 <= n <= M/a`.
pub fn predicted_x(params: &UrnParams, n: u64) -> Result<f64> {
    check_range(params, n)?;
    Ok(predicted_x_raw(params, n as f64))
}

/// Deterministic red-ball trajectory `(M - a n) - predicted_x(n)`.
pub fn predicted_y(params: &UrnParams, n: u64) -> Result<f64> {
    check_range(params, n)?;
    Ok(predicted_y_raw(params, n as f64))
}

/// `floor(M (1 - t x0^(-a/b)) / a)`. Negative results make the
/// concentration event vacuous.
pub fn n_t(params: &UrnParams, t: f64) -> Result<i64> {
    if !(t > 0.0) {
        return Err(Error::OutOfDomain(format!("t must be positive, got {t}")));
    }
    if !(params.x0() > 0.0) {
        return Err(Error::OutOfDomain("n_t needs x0 > 0".into()));
    }
    Ok(n_t_raw(params, t))
}

pub(crate) fn n_t_raw(params: &UrnParams, t: f64) -> i64 {
    if params.x0() <= 0.0 {
        return i64::MIN;
    }
    let scale = libm::pow(params.x0(), params.a() / params.b());
    let v = params.total() * (1.0 - t / scale) / params.a();
    libm::floor(v) as i64
}

/// `K_n = X_n / predicted_x(n)`; errors where the prediction vanishes.
pub fn k_stat(trajectory: &UrnTrajectory, n: u64) -> Result<f64> {
    let pred = predicted_x(&trajectory.params, n)?;
    if !(pred > 0.0) {
        return Err(Error::OutOfDomain(format!("predicted_x({n}) = 0; K_n undefined")));
    }
    Ok(trajectory.state_at(n).x / pred)
}

/// `L_n = Y_n / predicted_y(n)`; `None` where the denominator is not positive.
pub fn l_stat(trajectory: &UrnTrajectory, n: u64) -> Option<f64> {
    let pred = predicted_y(&trajectory.params, n).ok()?;
    (pred > 0.0).then(|| trajectory.state_at(n).y / pred)
}
