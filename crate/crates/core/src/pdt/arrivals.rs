//! Task-arrival forecasters (bytes per slot, one series per task type).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalForecast {
    pub values: Vec<f64>,
    /// Set when the history was too short and the historical mean was used.
    pub low_confidence: bool,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn fallback(history: &[f64], horizon: usize) -> ArrivalForecast {
    ArrivalForecast {
        values: vec![mean(history).max(0.0); horizon],
        low_confidence: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Fit {
    pub mean: f64,
    pub phi: f64,
}

/// Least-squares AR(1) around the sample mean:
/// `x_t − μ = φ (x_{t−1} − μ) + e_t`.
pub fn fit_ar1(samples: &[f64]) -> Ar1Fit {
    let mu = mean(samples);
    let (mut num, mut den) = (0.0, 0.0);
    for w in samples.windows(2) {
        let prev = w[0] - mu;
        num += (w[1] - mu) * prev;
        den += prev * prev;
    }
    let phi = if den > 0.0 { (num / den).clamp(-0.99, 0.99) } else { 0.0 };
    Ar1Fit { mean: mu, phi }
}

impl Ar1Fit {
    pub fn forecast(&self, last: f64, horizon: usize) -> Vec<f64> {
        let mut dev = last - self.mean;
        (0..horizon)
            .map(|_| {
                dev *= self.phi;
                (self.mean + dev).max(0.0)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ArrivalModel {
    Ewma {
        alpha: f64,
        min_history: usize,
    },
    Ar1 {
        window: usize,
        refit_every: usize,
        min_history: usize,
        #[serde(skip)]
        cache: Option<(usize, Ar1Fit)>,
    },
}

impl ArrivalModel {
    pub fn ewma() -> Self {
        ArrivalModel::Ewma {
            alpha: 0.3,
            min_history: 20,
        }
    }

    pub fn ar1() -> Self {
        ArrivalModel::Ar1 {
            window: 50,
            refit_every: 10,
            min_history: 20,
            cache: None,
        }
    }

    /// Forecast `horizon` future values from the full series so far.
    /// `history_len` counts every sample ever observed (the slice may be a
    /// bounded tail of it); the AR(1) refit schedule keys off it.
    pub fn forecast(&mut self, history: &[f64], history_len: usize, horizon: usize) -> ArrivalForecast {
        match self {
            ArrivalModel::Ewma { alpha, min_history } => {
                if history.len() < *min_history {
                    return fallback(history, horizon);
                }
                let mut s = history[0];
                for &x in &history[1..] {
                    s = *alpha * x + (1.0 - *alpha) * s;
                }
                ArrivalForecast {
                    values: vec![s.max(0.0); horizon],
                    low_confidence: false,
                }
            }
            ArrivalModel::Ar1 {
                window,
                refit_every,
                min_history,
                cache,
            } => {
                if history.len() < *min_history {
                    return fallback(history, horizon);
                }
                let stale = match cache {
                    Some((at, _)) => history_len >= *at + *refit_every || history_len < *at,
                    None => true,
                };
                if stale {
                    let start = history.len().saturating_sub(*window);
                    *cache = Some((history_len, fit_ar1(&history[start..])));
                }
                let fit = cache.as_ref().map(|(_, f)| *f).expect("fitted above");
                ArrivalForecast {
                    values: fit.forecast(*history.last().expect("non-empty"), horizon),
                    low_confidence: false,
                }
            }
        }
    }
}
