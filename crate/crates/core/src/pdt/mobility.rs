//! Position forecasters.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_HISTORY: usize = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MobilityModel {
    #[default]
    ConstantVelocity,
    Kalman(KalmanCv),
}

impl MobilityModel {
    pub fn predict(&self, positions: &[f64], velocities: &[f64], horizon: usize, dt: f64) -> Result<Vec<f64>> {
        match self {
            MobilityModel::ConstantVelocity => constant_velocity(positions, velocities, horizon, dt),
            MobilityModel::Kalman(kf) => kf.predict(positions, velocities, horizon, dt),
        }
    }
}

fn check_history(positions: &[f64]) -> Result<()> {
    if positions.len() < MIN_HISTORY {
        return Err(Error::InsufficientHistory {
            needed: MIN_HISTORY,
            have: positions.len(),
        });
    }
    Ok(())
}

/// `p + v·h·dt` from the latest sample. Uses the last reported velocity
/// when there is one, otherwise the last finite difference.
pub fn constant_velocity(positions: &[f64], velocities: &[f64], horizon: usize, dt: f64) -> Result<Vec<f64>> {
    check_history(positions)?;
    let n = positions.len();
    let p = positions[n - 1];
    let v = velocities
        .last()
        .copied()
        .unwrap_or((positions[n - 1] - positions[n - 2]) / dt);
    Ok((1..=horizon).map(|h| p + v * h as f64 * dt).collect())
}

/// Constant-velocity Kalman filter over `[position, velocity]`, observing
/// both. The filter is re-run over the supplied history on every call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanCv {
    /// White-acceleration spectral density (m²/s³).
    pub accel_noise: f64,
    pub position_noise_m: f64,
    pub velocity_noise_mps: f64,
}

impl Default for KalmanCv {
    fn default() -> Self {
        KalmanCv {
            accel_noise: 0.5,
            position_noise_m: 1.0,
            velocity_noise_mps: 0.5,
        }
    }
}

impl KalmanCv {
    /// Filtered `[p, v]` after the last sample.
    pub fn filter(&self, positions: &[f64], velocities: &[f64], dt: f64) -> Result<(Vector2<f64>, Matrix2<f64>)> {
        check_history(positions)?;
        let f = Matrix2::new(1.0, dt, 0.0, 1.0);
        let q = self.accel_noise
            * Matrix2::new(dt.powi(3) / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt);
        let r_pos = self.position_noise_m * self.position_noise_m;
        let r_vel = self.velocity_noise_mps * self.velocity_noise_mps;
        let have_vel = velocities.len() == positions.len();

        let v0 = if have_vel {
            velocities[0]
        } else {
            (positions[1] - positions[0]) / dt
        };
        let mut x = Vector2::new(positions[0], v0);
        let mut p = Matrix2::new(r_pos, 0.0, 0.0, if have_vel { r_vel } else { 2.0 * r_pos / (dt * dt) });

        for i in 1..positions.len() {
            x = f * x;
            p = f * p * f.transpose() + q;
            if have_vel {
                let z = Vector2::new(positions[i], velocities[i]);
                let s = p + Matrix2::new(r_pos, 0.0, 0.0, r_vel);
                let Some(s_inv) = s.try_inverse() else { continue };
                let k = p * s_inv;
                x += k * (z - x);
                p = (Matrix2::identity() - k) * p;
            } else {
                let s = p[(0, 0)] + r_pos;
                let k = Vector2::new(p[(0, 0)] / s, p[(1, 0)] / s);
                let innov = positions[i] - x[0];
                x += k * innov;
                let kh = Matrix2::new(k[0], 0.0, k[1], 0.0);
                p = (Matrix2::identity() - kh) * p;
            }
        }
        Ok((x, p))
    }

    pub fn predict(&self, positions: &[f64], velocities: &[f64], horizon: usize, dt: f64) -> Result<Vec<f64>> {
        let (x, _) = self.filter(positions, velocities, dt)?;
        Ok((1..=horizon).map(|h| x[0] + x[1] * h as f64 * dt).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cv_exact_extrapolation() {
        let pos = [98.0, 100.0];
        let vel = [20.0, 20.0];
        let out = constant_velocity(&pos, &vel, 5, 0.1).unwrap();
        let want = [102.0, 104.0, 106.0, 108.0, 110.0];
        for (a, b) in out.iter().zip(want) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn cv_standing_vehicle() {
        let out = constant_velocity(&[50.0, 50.0], &[0.0, 0.0], 5, 0.1).unwrap();
        assert!(out.iter().all(|&p| p == 50.0));
    }

    #[test]
    fn short_history_errors() {
        assert!(matches!(
            constant_velocity(&[1.0], &[1.0], 3, 0.1),
            Err(Error::InsufficientHistory { needed: 2, have: 1 })
        ));
        assert!(KalmanCv::default().predict(&[], &[], 3, 0.1).is_err());
    }

    #[test]
    fn kalman_tracks_clean_line() {
        let pos: Vec<f64> = (0..30).map(|i| 10.0 + 25.0 * 0.1 * i as f64).collect();
        let vel = vec![25.0; 30];
        let out = KalmanCv::default().predict(&pos, &vel, 3, 0.1).unwrap();
        let last = pos[29];
        for (h, p) in out.iter().enumerate() {
            assert!((p - (last + 2.5 * (h + 1) as f64)).abs() < 1e-6);
        }
    }

    #[test]
    fn kalman_without_velocity_history() {
        let pos: Vec<f64> = (0..40).map(|i| 3.0 * i as f64).collect();
        let out = KalmanCv::default().predict(&pos, &[], 2, 0.1).unwrap();
        assert!((out[0] - 120.0).abs() < 1e-3);
    }
}
