//! Outdoor-temperature series: CSV ingestion, linear interpolation and a
//! synthetic generator for desk-scale cold-snap studies.
//!
//! The canonical CSV format is UTF-8 text with the header `time_h,T_ext_C`,
//! one `time,temperature` pair per line, decimal points, newline delimited.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered outdoor-temperature series, times in hours.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    samples: Vec<(f64, f64)>,
}

pub const CSV_HEADER: &str = "time_h,T_ext_C";

impl WeatherSeries {
    /// Build from `(time_h, t_ext_c)` pairs. Times must be strictly
    /// increasing, temperatures finite, and at least two samples present.
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::WeatherCsv {
                row: samples.len() + 1,
                message: format!("need at least 2 samples, got {}", samples.len()),
            });
        }
        for (i, (t, v)) in samples.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(Error::WeatherCsv {
                    row: i + 2,
                    message: format!("non-finite sample ({t}, {v})"),
                });
            }
            if i > 0 && *t <= samples[i - 1].0 {
                return Err(Error::WeatherCsv {
                    row: i + 2,
                    message: format!("time {t} h does not increase past {} h", samples[i - 1].0),
                });
            }
        }
        Ok(WeatherSeries { samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn first_time_h(&self) -> f64 {
        self.samples[0].0
    }

    pub fn last_time_h(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    pub fn covers(&self, t0_h: f64, t_end_h: f64) -> bool {
        self.first_time_h() <= t0_h && t_end_h <= self.last_time_h()
    }

    /// Piecewise-linear interpolation; out-of-range queries are an error.
    pub fn sample(&self, t_h: f64) -> Result<f64> {
        if !(t_h >= self.first_time_h() && t_h <= self.last_time_h()) {
            return Err(Error::WeatherRange {
                t_h,
                first_h: self.first_time_h(),
                last_h: self.last_time_h(),
            });
        }
        Ok(self.interpolate(t_h))
    }

    /// Interpolation with the end values held outside the covered span.
    pub fn sample_held(&self, t_h: f64) -> f64 {
        if t_h <= self.first_time_h() {
            self.samples[0].1
        } else if t_h >= self.last_time_h() {
            self.samples[self.samples.len() - 1].1
        } else {
            self.interpolate(t_h)
        }
    }

    fn interpolate(&self, t_h: f64) -> f64 {
        // Index of the first sample with time > t_h; the segment before it
        // contains t_h.
        let hi = self.samples.partition_point(|(t, _)| *t <= t_h);
        if hi == self.samples.len() {
            return self.samples[hi - 1].1;
        }
        if hi == 0 {
            return self.samples[0].1;
        }
        let (t0, v0) = self.samples[hi - 1];
        let (t1, v1) = self.samples[hi];
        if t_h == t0 {
            return v0;
        }
        v0 + (v1 - v0) * (t_h - t0) / (t1 - t0)
    }

    /// Parse the canonical CSV format, reporting 1-based line numbers on
    /// malformed input.
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header = match lines.next() {
            Some(h) => h?,
            None => {
                return Err(Error::WeatherCsv {
                    row: 1,
                    message: "empty input".to_string(),
                })
            }
        };
        if header.trim() != CSV_HEADER {
            return Err(Error::WeatherCsv {
                row: 1,
                message: format!("expected header `{CSV_HEADER}`, got `{}`", header.trim()),
            });
        }
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = i + 2;
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let (t, v) = match (fields.next(), fields.next(), fields.next()) {
                (Some(t), Some(v), None) => (t.trim(), v.trim()),
                _ => {
                    return Err(Error::WeatherCsv {
                        row,
                        message: format!("expected two comma-separated fields, got `{line}`"),
                    })
                }
            };
            let t: f64 = t.parse().map_err(|_| Error::WeatherCsv {
                row,
                message: format!("cannot parse time `{t}`"),
            })?;
            let v: f64 = v.parse().map_err(|_| Error::WeatherCsv {
                row,
                message: format!("cannot parse temperature `{v}`"),
            })?;
            if !t.is_finite() || !v.is_finite() {
                return Err(Error::WeatherCsv {
                    row,
                    message: format!("non-finite sample ({t}, {v})"),
                });
            }
            if let Some(&(prev, _)) = samples.last() {
                if t <= prev {
                    return Err(Error::WeatherCsv {
                        row,
                        message: format!("time {t} h does not increase past {prev} h"),
                    });
                }
            }
            samples.push((t, v));
        }
        if samples.len() < 2 {
            return Err(Error::WeatherCsv {
                row: samples.len() + 1,
                message: format!("need at least 2 samples, got {}", samples.len()),
            });
        }
        Ok(WeatherSeries { samples })
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::from_reader(text.as_bytes())
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::MissingInput {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_reader(file)
    }

    /// Emit the canonical CSV format. Floats use the shortest round-tripping
    /// representation, so emit followed by parse reproduces the series
    /// bit-identically.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (t, v) in &self.samples {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }
}

/// Parameters of the synthetic weather generator: a sinusoidal daily profile
/// with a cold snap of `snap_depth_c` degrees over `[snap_start_h,
/// snap_end_h]`, ramped smoothly over two hours at each edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthWeather {
    /// Mean outdoor temperature (degC).
    pub base_c: f64,
    /// Amplitude of the daily sinusoid (degC).
    pub amplitude_c: f64,
    /// Period of the sinusoid (hours).
    pub period_h: f64,
    /// Cold-snap depth (degC, subtracted inside the window).
    pub snap_depth_c: f64,
    /// Snap window start (hours).
    pub snap_start_h: f64,
    /// Snap window end (hours).
    pub snap_end_h: f64,
    /// Number of hourly samples; the series spans `[0, duration_h - 1]`.
    pub duration_h: u32,
}

/// Width of the smooth transition at each snap edge (hours).
const SNAP_RAMP_H: f64 = 2.0;

impl SynthWeather {
    pub fn validate(&self) -> Result<()> {
        let err = |message: String| Error::Scenario { message };
        if self.duration_h < 2 {
            return Err(err(format!(
                "weather duration must be at least 2 hourly samples, got {}",
                self.duration_h
            )));
        }
        for (name, v) in [
            ("base_c", self.base_c),
            ("amplitude_c", self.amplitude_c),
            ("period_h", self.period_h),
            ("snap_depth_c", self.snap_depth_c),
            ("snap_start_h", self.snap_start_h),
            ("snap_end_h", self.snap_end_h),
        ] {
            if !v.is_finite() {
                return Err(err(format!(
                    "synthetic weather field {name} must be finite"
                )));
            }
        }
        if self.amplitude_c != 0.0 && self.period_h <= 0.0 {
            return Err(err("sinusoid period must be > 0".to_string()));
        }
        if self.snap_depth_c != 0.0 && self.snap_start_h >= self.snap_end_h {
            return Err(err(format!(
                "snap window [{}, {}] h is empty",
                self.snap_start_h, self.snap_end_h
            )));
        }
        Ok(())
    }

    /// The generator formula at an arbitrary time.
    pub fn value_at(&self, t_h: f64) -> f64 {
        let seasonal = if self.amplitude_c != 0.0 {
            self.amplitude_c * (2.0 * std::f64::consts::PI * t_h / self.period_h).sin()
        } else {
            0.0
        };
        self.base_c + seasonal - self.snap_depth_c * self.snap_ramp(t_h)
    }

    /// 0 outside the window, 1 on its plateau, smoothstep over the edges.
    fn snap_ramp(&self, t_h: f64) -> f64 {
        if self.snap_depth_c == 0.0 {
            return 0.0;
        }
        let ramp = SNAP_RAMP_H.min(0.5 * (self.snap_end_h - self.snap_start_h));
        let up = smoothstep((t_h - self.snap_start_h) / ramp);
        let down = smoothstep((self.snap_end_h - t_h) / ramp);
        up.min(down)
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Generate the synthetic hourly series described by `spec`.
pub fn synth_weather(spec: &SynthWeather) -> Result<WeatherSeries> {
    spec.validate()?;
    let samples = (0..spec.duration_h)
        .map(|h| {
            let t = h as f64;
            (t, spec.value_at(t))
        })
        .collect();
    WeatherSeries::new(samples)
}
