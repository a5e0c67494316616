//! Causal denoisers for the noisy position stream.
//!
//! Two estimators are provided: a second-order Bessel low-pass filter
//! discretized with the prewarped bilinear transform, and a Kalman filter
//! whose prediction is driven by the previously executed velocity command.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Point;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("cutoff {cutoff} rad/s must lie in (0, {nyquist}) for sample rate {sample_rate} Hz")]
    CutoffOutOfRange { cutoff: f64, sample_rate: f64, nyquist: f64 },
    #[error("non-finite measurement ({0}, {1})")]
    NonFiniteMeasurement(f64, f64),
    #[error("denoiser state is {found:?} but {expected:?} was requested")]
    KindMismatch { expected: DenoiserKind, found: DenoiserKind },
    #[error("invalid kalman parameters: {0}")]
    InvalidKalman(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenoiserKind {
    #[default]
    None,
    Lpf,
    Kalman,
}

impl DenoiserKind {
    pub const ALL: [DenoiserKind; 3] = [DenoiserKind::None, DenoiserKind::Lpf, DenoiserKind::Kalman];

    pub fn as_str(self) -> &'static str {
        match self {
            DenoiserKind::None => "none",
            DenoiserKind::Lpf => "lpf",
            DenoiserKind::Kalman => "kalman",
        }
    }
}

impl std::fmt::Display for DenoiserKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DenoiserKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(DenoiserKind::None),
            "lpf" => Ok(DenoiserKind::Lpf),
            "kalman" | "kf" => Ok(DenoiserKind::Kalman),
            other => Err(format!("unknown denoiser '{other}' (expected none, lpf or kalman)")),
        }
    }
}

// ---------------------------------------------------------------------------
// Bessel low-pass

/// Normalized biquad coefficients (`a0 = 1`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpfCoefficients {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl LpfCoefficients {
    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// `|H(e^{jωT})|` at analog-equivalent frequency `omega` (rad/s).
    pub fn gain_at(&self, omega: f64, sample_rate: f64) -> f64 {
        let theta = omega / sample_rate;
        let (c1, s1) = (theta.cos(), -theta.sin());
        let (c2, s2) = ((2.0 * theta).cos(), -(2.0 * theta).sin());
        let num = (self.b0 + self.b1 * c1 + self.b2 * c2, self.b1 * s1 + self.b2 * s2);
        let den = (1.0 + self.a1 * c1 + self.a2 * c2, self.a1 * s1 + self.a2 * s2);
        num.0.hypot(num.1) / den.0.hypot(den.1)
    }
}

/// Discretize `3 / (s² + 3s + 3)`, frequency-scaled to `cutoff` rad/s, with
/// the bilinear transform prewarped at the cutoff.
pub fn lpf_design(cutoff: f64, sample_rate: f64) -> Result<LpfCoefficients, FilterError> {
    let nyquist = std::f64::consts::PI * sample_rate;
    if !(cutoff > 0.0 && cutoff < nyquist && sample_rate.is_finite()) {
        return Err(FilterError::CutoffOutOfRange { cutoff, sample_rate, nyquist });
    }
    let w = cutoff;
    let k = w / (0.5 * w / sample_rate).tan();
    let w2 = 3.0 * w * w;
    let a0 = k * k + 3.0 * w * k + w2;
    Ok(LpfCoefficients {
        b0: w2 / a0,
        b1: 2.0 * w2 / a0,
        b2: w2 / a0,
        a1: (2.0 * w2 - 2.0 * k * k) / a0,
        a2: (k * k - 3.0 * w * k + w2) / a0,
    })
}

/// Direct-form-II-transposed delay registers for one axis.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Biquad {
    z1: f64,
    z2: f64,
}

impl Biquad {
    fn step(&mut self, c: &LpfCoefficients, x: f64) -> f64 {
        let y = c.b0 * x + self.z1;
        self.z1 = c.b1 * x - c.a1 * y + self.z2;
        self.z2 = c.b2 * x - c.a2 * y;
        y
    }

    /// Registers of the steady state for constant input `x` (unity DC gain).
    fn settled(c: &LpfCoefficients, x: f64) -> Self {
        let z2 = (c.b2 - c.a2) * x;
        Self { z1: (c.b1 - c.a1) * x + z2, z2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpfState {
    pub coeffs: LpfCoefficients,
    x: Biquad,
    y: Biquad,
    warm_start_pending: bool,
}

impl LpfState {
    /// Zero delay registers.
    pub fn zeroed(coeffs: LpfCoefficients) -> Self {
        Self { coeffs, x: Biquad::default(), y: Biquad::default(), warm_start_pending: false }
    }

    /// The registers are seeded from the first measurement so that the first
    /// output equals it.
    pub fn warm_start(coeffs: LpfCoefficients) -> Self {
        Self { warm_start_pending: true, ..Self::zeroed(coeffs) }
    }

    pub fn step(&mut self, m: Point) -> Point {
        if self.warm_start_pending {
            self.x = Biquad::settled(&self.coeffs, m.x);
            self.y = Biquad::settled(&self.coeffs, m.y);
            self.warm_start_pending = false;
        }
        Point::new(self.x.step(&self.coeffs, m.x), self.y.step(&self.coeffs, m.y))
    }
}

// ---------------------------------------------------------------------------
// Kalman

/// Kalman filter over `(x, y, vx, vy)`. The prediction sets the velocity to
/// the previous command and integrates it over `dt`; only position is
/// measured.
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanState {
    pub estimate: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    /// Process-noise intensity, (m/s²)².
    pub q: f64,
    /// Measurement variance, m².
    pub r: f64,
    initial_variance: f64,
    initialized: bool,
}

impl KalmanState {
    /// Uninitialized filter; the first measurement becomes the initial
    /// estimate (with zero velocity).
    pub fn new(q: f64, r: f64, initial_variance: f64) -> Result<Self, FilterError> {
        if !(q > 0.0 && r >= 0.0 && initial_variance > 0.0 && q.is_finite() && r.is_finite()) {
            return Err(FilterError::InvalidKalman(format!(
                "need q > 0, r >= 0, p0 > 0 (got q={q}, r={r}, p0={initial_variance})"
            )));
        }
        Ok(Self {
            estimate: Vector4::zeros(),
            covariance: Matrix4::identity() * initial_variance,
            q,
            r,
            initial_variance,
            initialized: false,
        })
    }

    /// Filter already holding `estimate` as its prior.
    pub fn with_estimate(q: f64, r: f64, initial_variance: f64, estimate: Point) -> Result<Self, FilterError> {
        let mut k = Self::new(q, r, initial_variance)?;
        k.estimate = Vector4::new(estimate.x, estimate.y, 0.0, 0.0);
        k.initialized = true;
        Ok(k)
    }

    pub fn position(&self) -> Point {
        Point::new(self.estimate[0], self.estimate[1])
    }

    fn process_noise(&self, dt: f64) -> Matrix4<f64> {
        let (pp, pv, vv) = (dt.powi(4) / 4.0, dt.powi(3) / 2.0, dt * dt);
        Matrix4::new(
            pp, 0.0, pv, 0.0, //
            0.0, pp, 0.0, pv, //
            pv, 0.0, vv, 0.0, //
            0.0, pv, 0.0, vv,
        ) * self.q
    }

    pub fn predict(&mut self, command: Point, dt: f64) {
        let f = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 0.0, 0.0));
        let b = Matrix4x2::new(dt, 0.0, 0.0, dt, 1.0, 0.0, 0.0, 1.0);
        self.estimate = f * self.estimate + b * Vector2::new(command.x, command.y);
        self.covariance = f * self.covariance * f.transpose() + self.process_noise(dt);
    }

    pub fn update(&mut self, m: Point) {
        let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let r = Matrix2::identity() * self.r;
        let s = h * self.covariance * h.transpose() + r;
        let s_inv = s.try_inverse().expect("innovation covariance is positive definite");
        let gain = self.covariance * h.transpose() * s_inv;
        let innovation = Vector2::new(m.x, m.y) - h * self.estimate;
        self.estimate += gain * innovation;
        // Joseph form keeps the covariance symmetric positive-definite.
        let i_kh = Matrix4::identity() - gain * h;
        let p = i_kh * self.covariance * i_kh.transpose() + gain * r * gain.transpose();
        self.covariance = (p + p.transpose()) * 0.5;
    }

    /// One predict/update cycle; returns the posterior position.
    pub fn step(&mut self, m: Point, prev_command: Point, dt: f64) -> Result<Point, FilterError> {
        if !m.is_finite() {
            return Err(FilterError::NonFiniteMeasurement(m.x, m.y));
        }
        if !self.initialized {
            self.estimate = Vector4::new(m.x, m.y, 0.0, 0.0);
            self.covariance = Matrix4::identity() * self.initial_variance;
            self.initialized = true;
            return Ok(m);
        }
        self.predict(prev_command, dt);
        self.update(m);
        Ok(self.position())
    }
}

// ---------------------------------------------------------------------------
// Dispatch

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LpfConfig {
    pub cutoff_rad_s: f64,
}

impl Default for LpfConfig {
    fn default() -> Self {
        Self { cutoff_rad_s: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KalmanConfig {
    pub q: f64,
    /// Measurement variance; `None` uses `σ²` of the active noise (or 0.01
    /// when the noise has no spread).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub p0: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self { q: 0.05, r: None, p0: 0.1 }
    }
}

impl KalmanConfig {
    pub fn measurement_variance(&self, noise_sigma: f64) -> f64 {
        self.r.unwrap_or(if noise_sigma > 0.0 { noise_sigma * noise_sigma } else { 0.01 })
    }
}

/// `filter` config section.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub kind: DenoiserKind,
    pub lpf: LpfConfig,
    pub kalman: KalmanConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Denoiser {
    None,
    Lpf(LpfState),
    Kalman(KalmanState),
}

impl Denoiser {
    /// Fresh per-episode denoiser of `kind`.
    pub fn new(kind: DenoiserKind, config: &FilterConfig, dt: f64, noise_sigma: f64) -> Result<Self, FilterError> {
        Ok(match kind {
            DenoiserKind::None => Denoiser::None,
            DenoiserKind::Lpf => Denoiser::Lpf(LpfState::warm_start(lpf_design(config.lpf.cutoff_rad_s, 1.0 / dt)?)),
            DenoiserKind::Kalman => Denoiser::Kalman(KalmanState::new(
                config.kalman.q,
                config.kalman.measurement_variance(noise_sigma),
                config.kalman.p0,
            )?),
        })
    }

    pub fn kind(&self) -> DenoiserKind {
        match self {
            Denoiser::None => DenoiserKind::None,
            Denoiser::Lpf(_) => DenoiserKind::Lpf,
            Denoiser::Kalman(_) => DenoiserKind::Kalman,
        }
    }

    pub fn step(&mut self, m: Point, prev_command: Point, dt: f64) -> Result<Point, FilterError> {
        match self {
            Denoiser::None => Ok(m),
            Denoiser::Lpf(s) => {
                if !m.is_finite() {
                    return Err(FilterError::NonFiniteMeasurement(m.x, m.y));
                }
                Ok(s.step(m))
            }
            Denoiser::Kalman(s) => s.step(m, prev_command, dt),
        }
    }
}

/// Checked dispatch: `state` must have been built for `kind`.
pub fn denoise(
    kind: DenoiserKind,
    state: &mut Denoiser,
    measurement: Point,
    prev_command: Point,
    dt: f64,
) -> Result<Point, FilterError> {
    if state.kind() != kind {
        return Err(FilterError::KindMismatch { expected: kind, found: state.kind() });
    }
    state.step(measurement, prev_command, dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 20.0;

    #[test]
    fn unity_dc_gain() {
        for &(w, fs) in &[(2.0, 20.0), (0.5, 100.0), (10.0, 20.0), (30.0, 20.0)] {
            let c = lpf_design(w, fs).unwrap();
            assert!((c.dc_gain() - 1.0).abs() < 1e-9, "{w} {fs}");
        }
    }

    #[test]
    fn cutoff_at_nyquist_rejected() {
        let nyq = std::f64::consts::PI * FS;
        assert!(matches!(lpf_design(nyq, FS), Err(FilterError::CutoffOutOfRange { .. })));
        assert!(lpf_design(0.0, FS).is_err());
        assert!(lpf_design(nyq * 0.99, FS).is_ok());
    }

    #[test]
    fn rolls_off_above_cutoff() {
        let c = lpf_design(2.0, FS).unwrap();
        assert!(c.gain_at(20.0, FS) < c.gain_at(2.0, FS));
        assert!(c.gain_at(2.0, FS) < 1.0);
    }

    #[test]
    fn constant_input_converges() {
        let c = lpf_design(2.0, FS).unwrap();
        let mut f = LpfState::zeroed(c);
        // Ten time constants of a 2 rad/s filter are 5 s; run 20 s.
        let mut out = Point::ZERO;
        for _ in 0..400 {
            out = f.step(Point::new(3.0, -1.5));
        }
        assert!((out.x - 3.0).abs() < 1e-6 && (out.y + 1.5).abs() < 1e-6);
    }

    #[test]
    fn zero_in_zero_out() {
        let mut f = LpfState::zeroed(lpf_design(2.0, FS).unwrap());
        for _ in 0..10 {
            assert_eq!(f.step(Point::ZERO), Point::ZERO);
        }
    }

    #[test]
    fn warm_start_matches_first_measurement() {
        let mut f = LpfState::warm_start(lpf_design(2.0, FS).unwrap());
        let m = Point::new(0.2, -1.3);
        let out = f.step(m);
        assert!((out.x - m.x).abs() < 1e-12 && (out.y - m.y).abs() < 1e-12);
        let out = f.step(m);
        assert!((out.x - m.x).abs() < 1e-12);
    }

    #[test]
    fn kalman_converges_on_stationary_target() {
        let truth = Point::new(1.0, -0.5);
        let mut k = KalmanState::with_estimate(0.05, 1e-6, 0.1, Point::new(1.4, 0.2)).unwrap();
        let mut est = k.position();
        for _ in 0..50 {
            est = k.step(truth, Point::ZERO, 0.05).unwrap();
        }
        assert!(est.distance(truth) < 1e-3, "{est:?}");
    }

    #[test]
    fn kalman_first_measurement_initializes() {
        let mut k = KalmanState::new(0.05, 0.25, 0.1).unwrap();
        let m = Point::new(2.0, 1.0);
        assert_eq!(k.step(m, Point::new(0.5, 0.0), 0.05).unwrap(), m);
        assert_eq!(k.estimate[2], 0.0);
    }

    #[test]
    fn kalman_update_does_not_grow_trace() {
        let mut k = KalmanState::with_estimate(0.05, 0.04, 0.1, Point::ZERO).unwrap();
        for i in 0..100 {
            k.predict(Point::new(0.3, 0.1), 0.05);
            let before = k.covariance.trace();
            k.update(Point::new(i as f64 * 0.015, 0.0));
            assert!(k.covariance.trace() <= before + 1e-15);
        }
    }

    #[test]
    fn kalman_rejects_nan() {
        let mut k = KalmanState::new(0.05, 0.1, 0.1).unwrap();
        assert!(matches!(
            k.step(Point::new(f64::NAN, 0.0), Point::ZERO, 0.05),
            Err(FilterError::NonFiniteMeasurement(..))
        ));
    }

    #[test]
    fn dispatch() {
        let cfg = FilterConfig::default();
        let m = Point::new(1.0, 2.0);
        let cmd = Point::new(0.4, 0.0);

        let mut none = Denoiser::new(DenoiserKind::None, &cfg, 0.05, 0.3).unwrap();
        assert_eq!(denoise(DenoiserKind::None, &mut none, m, cmd, 0.05).unwrap(), m);

        let mut lpf = Denoiser::new(DenoiserKind::Lpf, &cfg, 0.05, 0.3).unwrap();
        let mut direct = LpfState::warm_start(lpf_design(2.0, 20.0).unwrap());
        for i in 0..5 {
            let mi = m + Point::new(i as f64 * 0.1, 0.0);
            assert_eq!(denoise(DenoiserKind::Lpf, &mut lpf, mi, cmd, 0.05).unwrap(), direct.step(mi));
        }

        let mut kf = Denoiser::new(DenoiserKind::Kalman, &cfg, 0.05, 0.3).unwrap();
        let mut direct = KalmanState::new(0.05, 0.09, 0.1).unwrap();
        for i in 0..5 {
            let mi = m + Point::new(i as f64 * 0.1, 0.0);
            assert_eq!(
                denoise(DenoiserKind::Kalman, &mut kf, mi, cmd, 0.05).unwrap(),
                direct.step(mi, cmd, 0.05).unwrap()
            );
        }

        assert_eq!(
            denoise(DenoiserKind::Kalman, &mut lpf, m, cmd, 0.05),
            Err(FilterError::KindMismatch { expected: DenoiserKind::Kalman, found: DenoiserKind::Lpf })
        );
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("lpf".parse::<DenoiserKind>().unwrap(), DenoiserKind::Lpf);
        assert!("median".parse::<DenoiserKind>().is_err());
    }
}
