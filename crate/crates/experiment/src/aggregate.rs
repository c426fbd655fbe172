//! Per-episode means and confidence half-widths across trials.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::config::IntervalKind;
use crate::runner::RunResult;
use crate::{ExperimentError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyCurve {
    pub label: String,
    pub mean: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl StrategyCurve {
    pub fn final_mean(&self) -> f64 {
        *self.mean.last().unwrap_or(&f64::NAN)
    }

    pub fn final_half_width(&self) -> f64 {
        *self.half_width.last().unwrap_or(&f64::NAN)
    }

    /// Mean of the curve over its last `episodes` points.
    pub fn tail_mean(&self, episodes: usize) -> f64 {
        let n = episodes.clamp(1, self.mean.len());
        self.mean[self.mean.len() - n..].iter().sum::<f64>() / n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub confidence: f64,
    pub curves: Vec<StrategyCurve>,
}

impl AggregateCurve {
    pub fn curve(&self, label: &str) -> Option<&StrategyCurve> {
        self.curves.iter().find(|c| c.label == label)
    }
}

/// Two-sided critical value: the normal quantile, or Student's t with
/// `trials − 1` degrees of freedom.
pub fn critical_value(confidence: f64, interval: IntervalKind, trials: usize) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(ExperimentError::Aggregate(format!("confidence {confidence} not in (0, 1)")));
    }
    let p = 1.0 - (1.0 - confidence) / 2.0;
    Ok(match interval {
        IntervalKind::Normal => Normal::standard().inverse_cdf(p),
        IntervalKind::StudentT => StudentsT::new(0.0, 1.0, (trials - 1) as f64)
            .map_err(|e| ExperimentError::Aggregate(e.to_string()))?
            .inverse_cdf(p),
    })
}

/// Mean and `critical · s / √n` half-width per episode, where `s` is the
/// sample standard deviation across trials. Needs at least two trials.
pub fn aggregate(result: &RunResult, confidence: f64, interval: IntervalKind) -> Result<AggregateCurve> {
    let mut curves = Vec::with_capacity(result.runs.len());
    for run in &result.runs {
        let trials = run.rms.len();
        if trials < 2 {
            return Err(ExperimentError::Aggregate(format!(
                "confidence intervals need at least 2 trials, `{}` has {trials}",
                run.label
            )));
        }
        let z = critical_value(confidence, interval, trials)?;
        let episodes = run.rms[0].len();
        let mut mean = Vec::with_capacity(episodes);
        let mut half_width = Vec::with_capacity(episodes);
        for e in 0..episodes {
            let column = run.rms.iter().map(|trial| trial[e]);
            let m = column.clone().sum::<f64>() / trials as f64;
            let ss: f64 = column.map(|x| (x - m) * (x - m)).sum();
            let sd = (ss / (trials - 1) as f64).sqrt();
            mean.push(m);
            half_width.push(z * sd / (trials as f64).sqrt());
        }
        curves.push(StrategyCurve { label: run.label.clone(), mean, half_width });
    }
    Ok(AggregateCurve { confidence, curves })
}
