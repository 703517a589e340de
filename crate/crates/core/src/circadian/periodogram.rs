use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::BINS_PER_DAY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    /// `(period in hours, magnitude)` for frequencies `1..=n/2`.
    pub entries: Vec<(f64, f64)>,
    pub dominant_period_hours: f64,
}

/// Magnitude spectrum of the mean-removed series of 10-minute counts.
pub fn periodogram(series: &[f64]) -> Result<Periodogram> {
    let n = series.len();
    if n < 3 * BINS_PER_DAY {
        return Err(Error::invalid(format!(
            "periodogram needs at least 3 days of 10-minute bins, got {n} samples"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let entries: Vec<(f64, f64)> = (1..=n / 2)
        .map(|k| (n as f64 * 10.0 / 60.0 / k as f64, buf[k].norm()))
        .collect();
    // first maximum wins
    let dominant = entries
        .iter()
        .fold(None::<(f64, f64)>, |best, e| match best {
            Some(b) if b.1 >= e.1 => Some(b),
            _ => Some(*e),
        })
        .map(|e| e.0)
        .unwrap_or(f64::NAN);
    Ok(Periodogram {
        entries,
        dominant_period_hours: dominant,
    })
}

pub fn dominant_period(series: &[f64]) -> Result<f64> {
    Ok(periodogram(series)?.dominant_period_hours)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn daily_sine() {
        let n = 30 * BINS_PER_DAY;
        let v: Vec<f64> = (0..n)
            .map(|i| 100.0 + 40.0 * (2.0 * std::f64::consts::PI * i as f64 / BINS_PER_DAY as f64).sin())
            .collect();
        let p = dominant_period(&v).unwrap();
        assert!((p - 24.0).abs() < 1e-9, "{p}");
    }

    #[test]
    fn too_short() {
        assert!(periodogram(&[1.0; 100]).is_err());
    }
}
