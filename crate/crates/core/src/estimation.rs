//! Online estimation of the lumped term `F` in the ultra-local model
//! `dy/dt = F + alpha * u`.
//!
//! All estimators work on a short sliding window of uniformly spaced
//! samples. Window time is local: the oldest sample sits at sigma = 0 and
//! the newest at sigma = tau, which keeps the integrands free of absolute
//! time and makes the constant-signal cancellation exact.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EstimationError {
    #[error("sample window needs at least two samples, got {0}")]
    WindowTooShort(usize),
    #[error("sample spacing must be positive, got {0}")]
    BadSpacing(f64),
    #[error("samples must be finite")]
    NonFinite,
}

/// One controller-rate sample: output `y`, applied input `u`, setpoint
/// derivative, and tracking error at that instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sample {
    pub y: f64,
    pub u: f64,
    pub ystar_dot: f64,
    pub e: f64,
}

/// Uniformly spaced samples spanning `tau = (len - 1) * h` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    h_s: f64,
    samples: Vec<Sample>,
}

impl SampleWindow {
    pub fn new(h_s: f64, samples: Vec<Sample>) -> Result<Self, EstimationError> {
        if samples.len() < 2 {
            return Err(EstimationError::WindowTooShort(samples.len()));
        }
        if !(h_s > 0.0) || !h_s.is_finite() {
            return Err(EstimationError::BadSpacing(h_s));
        }
        if samples.iter().any(|s| {
            !(s.y.is_finite() && s.u.is_finite() && s.ystar_dot.is_finite() && s.e.is_finite())
        }) {
            return Err(EstimationError::NonFinite);
        }
        Ok(SampleWindow { h_s, samples })
    }

    pub fn h(&self) -> f64 {
        self.h_s
    }

    pub fn tau(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.h_s
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Composite trapezoid of `f(sigma, sample)` over the window.
    fn trapezoid(&self, mut f: impl FnMut(f64, &Sample) -> f64) -> f64 {
        let n = self.samples.len();
        let mut acc = 0.0;
        for (i, s) in self.samples.iter().enumerate() {
            let sigma = i as f64 * self.h_s;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            acc += w * f(sigma, s);
        }
        acc * self.h_s
    }
}

/// Algebraic estimator
/// `F = -(6 / tau^3) * integral of ((tau - 2 sigma) y + alpha sigma (tau - sigma) u)`.
///
/// Exact for affine `y` and constant `u`; the trapezoid quadrature adds an
/// `O(h^2)` error otherwise.
pub fn algebraic_f_estimate(window: &SampleWindow, alpha: f64) -> f64 {
    let tau = window.tau();
    let integral = window.trapezoid(|sigma, s| {
        (tau - 2.0 * sigma) * s.y + alpha * sigma * (tau - sigma) * s.u
    });
    -6.0 / tau.powi(3) * integral
}

/// Closed-loop estimator `F = (1 / tau) * integral of (ystar_dot - alpha u - k_p e)`.
///
/// Reuses only signals already present in the loop; consistent when the
/// loop tracks, i.e. when `dy/dt` stays close to `ystar_dot - k_p e`.
pub fn closed_loop_f_estimate(window: &SampleWindow, alpha: f64, k_p: f64) -> f64 {
    let integral = window.trapezoid(|_, s| s.ystar_dot - alpha * s.u - k_p * s.e);
    integral / window.tau()
}

/// One-step finite-difference estimator `F = (y_now - y_prev) / h - alpha * u_prev`.
pub fn crude_f_estimate(
    y_now: f64,
    y_prev: f64,
    h: f64,
    alpha: f64,
    u_prev: f64,
) -> Result<f64, EstimationError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(EstimationError::BadSpacing(h));
    }
    Ok((y_now - y_prev) / h - alpha * u_prev)
}
