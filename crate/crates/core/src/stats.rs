use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.575_829_303_548_901;

/// A point estimate with a 95% normal-approximation half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub value: f64,
    pub half_width: f64,
    pub samples: usize,
}

impl EstimateWithCI {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            half_width: 0.0,
            samples: 1,
        }
    }

    /// Sample mean and 95% half-width of the observations.
    pub fn from_observations(obs: &[f64]) -> Self {
        let acc = obs.iter().fold(MeanAcc::default(), |mut a, &v| {
            a.push(v);
            a
        });
        acc.estimate()
    }

    /// Root-sum-square of the two half-widths.
    pub fn combined_half_width(&self, other: &Self) -> f64 {
        self.half_width.hypot(other.half_width)
    }

    /// True when `|a - b| <= k * combined half-width`, with `slack` absolute tolerance.
    pub fn agrees_with(&self, other: &Self, k: f64, slack: f64) -> bool {
        (self.value - other.value).abs() <= k * self.combined_half_width(other) + slack
    }

    /// True when the two 95% intervals intersect.
    pub fn overlaps(&self, other: &Self) -> bool {
        (self.value - other.value).abs() <= self.half_width + other.half_width
    }

    /// Half-width rescaled from 95% to 99% coverage.
    pub fn half_width_99(&self) -> f64 {
        self.half_width * Z99 / Z95
    }
}

/// Running sum and sum of squares.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct MeanAcc {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl MeanAcc {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn merge(&mut self, other: &MeanAcc) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn estimate(&self) -> EstimateWithCI {
        if self.count == 0 {
            return EstimateWithCI {
                value: f64::NAN,
                half_width: f64::INFINITY,
                samples: 0,
            };
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let half_width = if self.count > 1 {
            let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            Z95 * (var / n).sqrt()
        } else {
            0.0
        };
        EstimateWithCI {
            value: mean,
            half_width,
            samples: self.count,
        }
    }
}

/// Distribution summary of a scalar statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(name: &str, values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len().max(1) as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let var = if sorted.len() > 1 {
            sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            name: name.to_string(),
            mean,
            std: var.sqrt(),
            min: sorted.first().copied().unwrap_or(f64::NAN),
            q50: quantile_sorted(&sorted, 0.5),
            q90: quantile_sorted(&sorted, 0.9),
            q99: quantile_sorted(&sorted, 0.99),
            max: sorted.last().copied().unwrap_or(f64::NAN),
        }
    }
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let pos = q.clamp(0.0, 1.0) * (len - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] + (sorted[hi] - sorted[lo]) * frac
        }
    }
}

/// Median of an unsorted slice.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.0);
        assert_eq!(quantile_sorted(&v, 0.125), 0.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn constant_observations_have_zero_width() {
        let e = EstimateWithCI::from_observations(&[2.0; 10]);
        assert_eq!(e.value, 2.0);
        assert_eq!(e.half_width, 0.0);
        assert_eq!(e.samples, 10);
    }

    #[test]
    fn agreement_uses_root_sum_square() {
        let a = EstimateWithCI { value: 0.0, half_width: 3.0, samples: 10 };
        let b = EstimateWithCI { value: 14.0, half_width: 4.0, samples: 10 };
        assert!(a.agrees_with(&b, 3.0, 0.0));
        assert!(!a.agrees_with(&b, 2.0, 0.0));
        assert!(!a.overlaps(&b));
    }
}
