//! Per-track motion state: a constant-velocity Kalman filter over
//! `[cx, cy, w, h]` and an exponentially smoothed observation velocity used
//! for the direction-consistency cost.

use std::f64::consts::PI;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

pub type StateVector = SVector<f64, 8>;
pub type StateMatrix = SMatrix<f64, 8, 8>;
type MeasVector = SVector<f64, 4>;
type MeasMatrix = SMatrix<f64, 4, 4>;
type ObsMatrix = SMatrix<f64, 4, 8>;

/// Smallest width/height kept in the filter state, in pixels.
pub const MIN_BOX_SIDE: f64 = 1.0;

/// Below this magnitude (px/frame) a vector carries no direction.
pub const DIRECTION_EPS: f64 = 1e-6;

/// Noise model. Standard deviations are expressed as fractions of box height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanNoise {
    pub std_weight_position: f64,
    pub std_weight_velocity: f64,
    /// Initial velocity std of a new track; velocity is unobserved at birth.
    pub init_weight_velocity: f64,
}

impl Default for KalmanNoise {
    fn default() -> Self {
        KalmanNoise {
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
            init_weight_velocity: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    /// `[cx, cy, w, h, vcx, vcy, vw, vh]`
    pub mean: StateVector,
    pub covariance: StateMatrix,
}

impl KalmanState {
    pub fn bbox(&self) -> BBox {
        let m = &self.mean;
        BBox::from_center(m[0], m[1], m[2].max(MIN_BOX_SIDE), m[3].max(MIN_BOX_SIDE))
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.mean[4], self.mean[5])
    }
}

/// Constant-velocity filter with time step of one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KalmanFilter {
    pub noise: KalmanNoise,
}

fn measurement(b: &BBox) -> MeasVector {
    let (cx, cy) = b.center();
    MeasVector::new(cx, cy, b.w, b.h)
}

fn transition() -> StateMatrix {
    let mut f = StateMatrix::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

fn observation() -> ObsMatrix {
    ObsMatrix::from_fn(|r, c| if r == c { 1.0 } else { 0.0 })
}

fn symmetrize(m: &StateMatrix) -> StateMatrix {
    (m + m.transpose()) * 0.5
}

impl KalmanFilter {
    pub fn new(noise: KalmanNoise) -> Self {
        KalmanFilter { noise }
    }

    pub fn init(&self, b: &BBox) -> KalmanState {
        let z = measurement(b);
        let mut mean = StateVector::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(&z);
        let sp = 2.0 * self.noise.std_weight_position * b.h;
        let sv = self.noise.init_weight_velocity * b.h;
        let std = StateVector::from_column_slice(&[sp, sp, sp, sp, sv, sv, sv, sv]);
        KalmanState {
            mean,
            covariance: StateMatrix::from_diagonal(&std.component_mul(&std)),
        }
    }

    fn process_noise(&self, h: f64) -> StateMatrix {
        let sp = self.noise.std_weight_position * h;
        let sv = self.noise.std_weight_velocity * h;
        let std = StateVector::from_column_slice(&[sp, sp, sp, sp, sv, sv, sv, sv]);
        StateMatrix::from_diagonal(&std.component_mul(&std))
    }

    pub fn predict(&self, s: &KalmanState) -> KalmanState {
        let f = transition();
        let q = self.process_noise(s.mean[3].max(MIN_BOX_SIDE));
        let mut mean = f * s.mean;
        mean[2] = mean[2].max(MIN_BOX_SIDE);
        mean[3] = mean[3].max(MIN_BOX_SIDE);
        KalmanState {
            mean,
            covariance: symmetrize(&(f * s.covariance * f.transpose() + q)),
        }
    }

    /// Measurement update with the detection box. A singular innovation
    /// covariance is regularized with growing diagonal jitter.
    pub fn update(&self, s: &KalmanState, b: &BBox) -> KalmanState {
        let h = observation();
        let std = self.noise.std_weight_position * s.mean[3].max(MIN_BOX_SIDE);
        let r = MeasMatrix::identity() * (std * std);
        let innovation_cov = h * s.covariance * h.transpose() + r;

        let mut jitter = 0.0;
        let chol = loop {
            let candidate = innovation_cov + MeasMatrix::identity() * jitter;
            if let Some(c) = candidate.cholesky() {
                break c;
            }
            jitter = if jitter == 0.0 { 1e-9 } else { jitter * 10.0 };
        };

        // K = P H^T S^-1
        let pht = s.covariance * h.transpose();
        let gain = chol.solve(&pht.transpose()).transpose();
        let innovation = measurement(b) - h * s.mean;
        let mut mean = s.mean + gain * innovation;
        mean[2] = mean[2].max(MIN_BOX_SIDE);
        mean[3] = mean[3].max(MIN_BOX_SIDE);

        // Joseph form keeps the posterior PSD.
        let ikh = StateMatrix::identity() - gain * h;
        let covariance = ikh * s.covariance * ikh.transpose() + gain * r * gain.transpose();
        KalmanState {
            mean,
            covariance: symmetrize(&covariance),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    /// Weight of the previous EMA velocity, `v' = a*v + (1-a)*v_ins`.
    pub ema_alpha: f64,
    /// Weight of the direction-consistency cost in stage-one matching.
    pub direction_cost_weight: f64,
    pub noise: KalmanNoise,
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig {
            ema_alpha: 0.8,
            direction_cost_weight: 0.2,
            noise: KalmanNoise::default(),
        }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ema_alpha) {
            return Err(Error::InvalidParameter(format!(
                "ema_alpha must lie in [0, 1], got {}",
                self.ema_alpha
            )));
        }
        if !(self.direction_cost_weight.is_finite() && self.direction_cost_weight >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "direction_cost_weight must be >= 0, got {}",
                self.direction_cost_weight
            )));
        }
        let n = &self.noise;
        if !(n.std_weight_position > 0.0
            && n.std_weight_velocity > 0.0
            && n.init_weight_velocity > 0.0)
        {
            return Err(Error::InvalidParameter(
                "Kalman noise weights must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EmaVelocity {
    pub vx: f64,
    pub vy: f64,
    pub initialized: bool,
}

impl EmaVelocity {
    pub fn new(vx: f64, vy: f64) -> Self {
        EmaVelocity {
            vx,
            vy,
            initialized: true,
        }
    }
}

/// One EMA step. The first observed velocity seeds an uninitialized state.
pub fn ema_update(v: &EmaVelocity, v_ins: (f64, f64), alpha: f64) -> EmaVelocity {
    if !v.initialized {
        return EmaVelocity::new(v_ins.0, v_ins.1);
    }
    EmaVelocity::new(
        alpha * v.vx + (1.0 - alpha) * v_ins.0,
        alpha * v.vy + (1.0 - alpha) * v_ins.1,
    )
}

/// Angle between the EMA direction and the displacement from the track's last
/// observed center to a candidate center, scaled to `[0, 1]` by `pi`.
pub fn direction_cost(
    track_v: &EmaVelocity,
    last_center: (f64, f64),
    det_center: (f64, f64),
) -> f64 {
    if !track_v.initialized {
        return 0.0;
    }
    let (dx, dy) = (det_center.0 - last_center.0, det_center.1 - last_center.1);
    let vn = track_v.vx.hypot(track_v.vy);
    let dn = dx.hypot(dy);
    if vn < DIRECTION_EPS || dn < DIRECTION_EPS {
        return 0.0;
    }
    let cos = ((track_v.vx * dx + track_v.vy * dy) / (vn * dn)).clamp(-1.0, 1.0);
    cos.acos() / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn det(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
        BBox::from_center(cx, cy, w, h)
    }

    fn is_psd(m: &StateMatrix) -> bool {
        m.symmetric_eigenvalues().iter().all(|&e| e > -1e-9)
    }

    #[test]
    fn init_sets_zero_velocity() {
        let kf = KalmanFilter::default();
        let s = kf.init(&det(100.0, 50.0, 10.0, 8.0));
        assert_eq!(
            s.mean.as_slice(),
            &[100.0, 50.0, 10.0, 8.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert!(is_psd(&s.covariance));
        assert_eq!(s.covariance, s.covariance.transpose());
        assert_eq!(s, kf.init(&det(100.0, 50.0, 10.0, 8.0)));
    }

    #[test]
    fn predict_applies_constant_velocity() {
        let kf = KalmanFilter::default();
        let mut s = kf.init(&det(0.0, 0.0, 10.0, 10.0));
        s.mean[4] = 3.0;
        s.mean[5] = -2.0;
        let p = kf.predict(&s);
        assert_eq!(&p.mean.as_slice()[..4], &[3.0, -2.0, 10.0, 10.0]);

        let still = kf.init(&det(7.0, 9.0, 4.0, 4.0));
        let p = kf.predict(&still);
        assert_eq!(&p.mean.as_slice()[..4], &[7.0, 9.0, 4.0, 4.0]);
    }

    #[test]
    fn predict_grows_covariance_trace() {
        // Hand-rolled F P F^T + Q with plain loops.
        let kf = KalmanFilter::default();
        let mut s = kf.init(&det(50.0, 50.0, 12.0, 9.0));
        for _ in 0..3 {
            s = kf.update(&kf.predict(&s), &det(52.0, 51.0, 12.0, 9.0));
        }
        let p = s.covariance;
        let mut f = [[0.0; 8]; 8];
        for (i, row) in f.iter_mut().enumerate() {
            row[i] = 1.0;
            if i < 4 {
                row[i + 4] = 1.0;
            }
        }
        let h = s.mean[3];
        let mut expected_trace = 0.0;
        for (i, fi) in f.iter().enumerate() {
            let mut v = 0.0;
            for k in 0..8 {
                for l in 0..8 {
                    v += fi[k] * p[(k, l)] * fi[l];
                }
            }
            let std = if i < 4 { h / 20.0 } else { h / 160.0 };
            expected_trace += v + std * std;
        }
        let predicted = kf.predict(&s);
        assert_abs_diff_eq!(predicted.covariance.trace(), expected_trace, epsilon = 1e-9);
        assert!(predicted.covariance.trace() > p.trace());
    }

    #[test]
    fn update_with_predicted_measurement_is_stationary() {
        let kf = KalmanFilter::default();
        let s = kf.predict(&kf.init(&det(20.0, 30.0, 6.0, 6.0)));
        let u = kf.update(&s, &s.bbox());
        for i in 0..4 {
            assert_abs_diff_eq!(u.mean[i], s.mean[i], epsilon = 1e-12);
        }
        assert!(u.covariance.trace() <= s.covariance.trace());
        assert!(is_psd(&u.covariance));
    }

    #[test]
    fn repeated_updates_converge() {
        let kf = KalmanFilter::default();
        let target = det(40.0, 60.0, 9.0, 7.0);
        let mut s = kf.init(&det(30.0, 55.0, 8.0, 8.0));
        for _ in 0..50 {
            s = kf.update(&kf.predict(&s), &target);
        }
        let err = (s.mean.fixed_rows::<4>(0) - measurement(&target)).norm();
        assert!(err < 1e-3, "error {err}");
    }

    #[test]
    fn tracks_constant_velocity_after_few_updates() {
        let kf = KalmanFilter::default();
        for &(vx, vy, h) in &[
            (1.0, 0.5, 10.0),
            (2.0, -1.0, 10.0),
            (0.0, 3.0, 6.0),
            (8.0, -6.0, 8.0),
        ] {
            let at = |t: usize| det(100.0 + vx * t as f64, 100.0 + vy * t as f64, h, h);
            let mut s = kf.init(&at(0));
            for t in 1..=20 {
                let p = kf.predict(&s);
                if t > 5 {
                    let err = center_err(&p.bbox(), &at(t));
                    assert!(err < 0.5, "v=({vx},{vy}) t={t} err {err}");
                }
                s = kf.update(&p, &at(t));
            }
        }
    }

    fn center_err(a: &BBox, b: &BBox) -> f64 {
        crate::geometry::center_distance(a, b)
    }

    #[test]
    fn singular_innovation_is_regularized() {
        let kf = KalmanFilter::default();
        let mut s = kf.init(&det(0.0, 0.0, 5.0, 5.0));
        s.covariance = StateMatrix::zeros();
        s.mean[3] = 0.0;
        let u = kf.update(&s, &det(1.0, 1.0, 5.0, 5.0));
        assert!(u.mean.iter().all(|v| v.is_finite()));
        assert!(u.mean[3] >= MIN_BOX_SIDE);
    }

    #[test]
    fn covariance_stays_symmetric_over_long_runs() {
        let kf = KalmanFilter::default();
        let mut s = kf.init(&det(10.0, 10.0, 6.0, 4.0));
        let mut worst: f64 = 0.0;
        for t in 0..10_000 {
            let z = det(
                10.0 + 0.3 * (t as f64).sin(),
                10.0 + 0.01 * t as f64,
                6.0,
                4.0,
            );
            s = kf.update(&kf.predict(&s), &z);
            worst = worst.max((s.covariance - s.covariance.transpose()).abs().max());
        }
        assert!(worst < 1e-8);
        assert!(is_psd(&s.covariance));
    }

    #[test]
    fn ema_examples() {
        let v = EmaVelocity::new(1.0, 0.0);
        let out = ema_update(&v, (0.0, 1.0), 0.8);
        assert_abs_diff_eq!(out.vx, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(out.vy, 0.2, epsilon = 1e-15);
        assert_eq!(ema_update(&v, (5.0, -3.0), 1.0), v);
        assert_eq!(
            ema_update(&v, (5.0, -3.0), 0.0),
            EmaVelocity::new(5.0, -3.0)
        );
        assert_eq!(
            ema_update(&EmaVelocity::default(), (2.0, 4.0), 0.8),
            EmaVelocity::new(2.0, 4.0)
        );
    }

    #[test]
    fn direction_cost_examples() {
        let v = EmaVelocity::new(1.0, 0.0);
        assert_abs_diff_eq!(direction_cost(&v, (0.0, 0.0), (2.0, 0.0)), 0.0);
        assert_abs_diff_eq!(direction_cost(&v, (0.0, 0.0), (-1.0, 0.0)), 1.0);
        assert_abs_diff_eq!(
            direction_cost(&v, (0.0, 0.0), (0.0, 3.0)),
            0.5,
            epsilon = 1e-15
        );
        assert_eq!(
            direction_cost(&EmaVelocity::default(), (0.0, 0.0), (-1.0, 0.0)),
            0.0
        );
        assert_eq!(direction_cost(&v, (3.0, 3.0), (3.0, 3.0)), 0.0);
        assert_eq!(
            direction_cost(&EmaVelocity::new(1e-9, 0.0), (0.0, 0.0), (-1.0, 0.0)),
            0.0
        );
    }

    proptest! {
        #[test]
        fn ema_is_convex(vx in -50.0..50.0f64, vy in -50.0..50.0f64,
                         ix in -50.0..50.0f64, iy in -50.0..50.0f64, a in 0.0..=1.0f64) {
            let out = ema_update(&EmaVelocity::new(vx, vy), (ix, iy), a);
            prop_assert!(out.vx >= vx.min(ix) - 1e-12 && out.vx <= vx.max(ix) + 1e-12);
            prop_assert!(out.vy >= vy.min(iy) - 1e-12 && out.vy <= vy.max(iy) + 1e-12);
        }

        #[test]
        fn direction_cost_scale_invariant(vx in -5.0..5.0f64, vy in -5.0..5.0f64,
                                          dx in -5.0..5.0f64, dy in -5.0..5.0f64,
                                          k1 in 0.1..100.0f64, k2 in 0.1..100.0f64) {
            prop_assume!(vx.hypot(vy) > 1e-3 && dx.hypot(dy) > 1e-3);
            let base = direction_cost(&EmaVelocity::new(vx, vy), (0.0, 0.0), (dx, dy));
            let scaled = direction_cost(&EmaVelocity::new(k1 * vx, k1 * vy), (1.0, 2.0), (1.0 + k2 * dx, 2.0 + k2 * dy));
            prop_assert!((base - scaled).abs() < 1e-7);
            prop_assert!((0.0..=1.0).contains(&base));
        }
    }
}
