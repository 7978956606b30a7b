//! Scalar trait profiles used for birth/death rates and initial exponents.

use serde::{Deserialize, Serialize};

/// A real function of the trait, declared analytically or as a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `intercept + slope * x`
    Affine {
        intercept: f64,
        slope: f64,
    },
    /// `peak - slope * |x|`
    Tent {
        peak: f64,
        slope: f64,
    },
    /// `peak - slope * (sqrt(x^2 + width^2) - width)`: a tent with a rounded top.
    SmoothTent {
        peak: f64,
        slope: f64,
        width: f64,
    },
    /// `base + slope * |x|`
    Vee {
        base: f64,
        slope: f64,
    },
    /// `base + slope * (sqrt(x^2 + width^2) - width)`
    SmoothVee {
        base: f64,
        slope: f64,
        width: f64,
    },
    /// `peak - curvature * x^2 / 2`
    Quadratic {
        peak: f64,
        curvature: f64,
    },
    /// `base + amplitude * exp(-(x - center)^2 / (2 width^2))`
    GaussianBump {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `base + amplitude * sin(frequency * x + phase)`
    Sinusoid {
        base: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Piecewise-linear interpolation through `(xs, ys)`, constant outside.
    Table {
        xs: Vec<f64>,
        ys: Vec<f64>,
    },
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Affine { intercept, slope } => intercept + slope * x,
            Profile::Tent { peak, slope } => peak - slope * x.abs(),
            Profile::SmoothTent { peak, slope, width } => {
                peak - slope * ((x * x + width * width).sqrt() - width)
            }
            Profile::Vee { base, slope } => base + slope * x.abs(),
            Profile::SmoothVee { base, slope, width } => {
                base + slope * ((x * x + width * width).sqrt() - width)
            }
            Profile::Quadratic { peak, curvature } => peak - 0.5 * curvature * x * x,
            Profile::GaussianBump {
                base,
                amplitude,
                center,
                width,
            } => {
                let z = (x - center) / width;
                base + amplitude * (-0.5 * z * z).exp()
            }
            Profile::Sinusoid {
                base,
                amplitude,
                frequency,
                phase,
            } => base + amplitude * (frequency * x + phase).sin(),
            Profile::Table { ref xs, ref ys } => table_eval(xs, ys, x),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Profile::SmoothTent { width, .. } | Profile::SmoothVee { width, .. }
                if *width < 0.0 =>
            {
                Err("width must be nonnegative".into())
            }
            Profile::GaussianBump { width, .. } if *width <= 0.0 => {
                Err("bump width must be positive".into())
            }
            Profile::Table { xs, ys } => {
                if xs.is_empty() || xs.len() != ys.len() {
                    return Err("table needs matching, non-empty xs and ys".into());
                }
                if xs.windows(2).any(|w| w[1] <= w[0]) {
                    return Err("table xs must be strictly increasing".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn table_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let s = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] * (1.0 - s) + ys[k + 1] * s
}
