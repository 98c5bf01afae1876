use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Product-moment correlation, computed from centred sums.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(MetricsError::TooFewValues {
            needed: 2,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Mean and sample (n − 1) standard deviation; `std` is `None` for a
/// single run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub runs: usize,
    pub mean: f64,
    pub std: Option<f64>,
}

impl RunStats {
    pub fn of(values: &[f64]) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::TooFewValues { needed: 1, got: 0 });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std =
            (values.len() >= 2).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Ok(RunStats {
            runs: values.len(),
            mean,
            std,
        })
    }

    /// `mean ± std` scaled by `scale`, two decimals; the `±` part is
    /// dropped for a single run.
    pub fn format(&self, scale: f64) -> String {
        match self.std {
            Some(std) => format!("{:.2} ± {:.2}", self.mean * scale, std * scale),
            None => format!("{:.2}", self.mean * scale),
        }
    }
}

/// `(mean, sample std)`; needs at least two runs.
pub fn run_stats(values: &[f64]) -> Result<(f64, f64), MetricsError> {
    if values.len() < 2 {
        return Err(MetricsError::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    let s = RunStats::of(values)?;
    Ok((s.mean, s.std.unwrap_or_default()))
}
