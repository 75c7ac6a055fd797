//! Discomfort and consumption metrics, and the cross-strategy comparison
//! report.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::SimulationResult;
use crate::error::{Error, Result};

/// Summary metrics of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Per-unit discomfort, integral of |T_c - T_in| (degC h).
    pub discomfort_ch: Vec<f64>,
    pub total_discomfort_ch: f64,
    /// Per-unit delivered energy (MWh).
    pub consumption_mwh: Vec<f64>,
    pub total_consumption_mwh: f64,
    /// Per-unit maximum |T_c - T_in| over the run (degC).
    pub max_deviation_c: Vec<f64>,
    /// Rounds in which the unit's own controller clamped its request at zero.
    pub control_clamps: Vec<u64>,
    /// Rounds in which the central allocation clamped the unit at zero.
    pub allocation_clamps: Vec<u64>,
}

/// Integral of `|t_c - T_in(t)|` over `[t0_h, t_end_h]` in degC h.
///
/// The recorded series is treated as piecewise linear. Each segment is
/// integrated exactly, splitting at the comfort crossing when the deviation
/// changes sign inside it, so the result is additive across any interval
/// split and exact for piecewise-linear input regardless of where the kinks
/// fall.
pub fn discomfort(t_h: &[f64], t_in_c: &[f64], t_c: f64, t0_h: f64, t_end_h: f64) -> Result<f64> {
    check_series(t_h, t_in_c)?;
    if !(t0_h.is_finite() && t_end_h.is_finite() && t0_h < t_end_h) {
        return Err(Error::Scenario {
            message: format!("empty metric window [{t0_h}, {t_end_h}] h"),
        });
    }
    let eps = 1e-9;
    if t_h[0] > t0_h + eps || t_h[t_h.len() - 1] < t_end_h - eps {
        return Err(Error::Scenario {
            message: format!(
                "series [{}, {}] h does not cover [{t0_h}, {t_end_h}] h",
                t_h[0],
                t_h[t_h.len() - 1]
            ),
        });
    }

    let dev_at = |a: usize, t: f64| -> f64 {
        // Linear interpolation of the deviation inside segment [a, a+1].
        let (ta, tb) = (t_h[a], t_h[a + 1]);
        let (da, db) = (t_c - t_in_c[a], t_c - t_in_c[a + 1]);
        da + (db - da) * (t - ta) / (tb - ta)
    };

    let mut total = 0.0;
    for a in 0..t_h.len() - 1 {
        let lo = t_h[a].max(t0_h);
        let hi = t_h[a + 1].min(t_end_h);
        if hi <= lo {
            continue;
        }
        let d0 = dev_at(a, lo);
        let d1 = dev_at(a, hi);
        total += abs_linear_integral(d0, d1, hi - lo);
    }
    Ok(total)
}

/// Exact integral of `|d(t)|` over a width-`h` interval where `d` is linear
/// with endpoint values `d0`, `d1`.
fn abs_linear_integral(d0: f64, d1: f64, h: f64) -> f64 {
    if d0 == 0.0 && d1 == 0.0 {
        0.0
    } else if d0 * d1 >= 0.0 {
        0.5 * (d0.abs() + d1.abs()) * h
    } else {
        // Sign change inside: two triangles around the crossing.
        let tau = h * d0 / (d0 - d1);
        0.5 * (d0.abs() * tau + d1.abs() * (h - tau))
    }
}

/// Trapezoidal integral of a power series (kW over hours), in MWh.
pub fn consumption(t_h: &[f64], p_kw: &[f64]) -> Result<f64> {
    check_series(t_h, p_kw)?;
    let mut kwh = 0.0;
    for i in 0..t_h.len() - 1 {
        kwh += 0.5 * (p_kw[i] + p_kw[i + 1]) * (t_h[i + 1] - t_h[i]);
    }
    Ok(kwh / 1000.0)
}

fn check_series(t_h: &[f64], values: &[f64]) -> Result<()> {
    if t_h.len() != values.len() {
        return Err(Error::Scenario {
            message: format!(
                "series length mismatch: {} times, {} values",
                t_h.len(),
                values.len()
            ),
        });
    }
    if t_h.len() < 2 {
        return Err(Error::Scenario {
            message: format!("need at least 2 samples, got {}", t_h.len()),
        });
    }
    if t_h.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Scenario {
            message: "series times must be strictly increasing".to_string(),
        });
    }
    Ok(())
}

/// One strategy's row of the comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub strategy: String,
    pub discomfort_ch: Vec<f64>,
    pub total_discomfort_ch: f64,
    /// Fraction of the total discomfort borne by each unit (zeros when the
    /// total vanishes).
    pub discomfort_share: Vec<f64>,
    /// Largest per-unit discomfort over the smallest; `None` when some unit
    /// has exactly zero.
    pub max_min_discomfort_ratio: Option<f64>,
    pub consumption_mwh: Vec<f64>,
    pub total_consumption_mwh: f64,
}

/// Cross-strategy comparison over a shared scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub unit_ids: Vec<String>,
    pub rows: Vec<StrategyRow>,
}

/// Build the comparison report from named results. All results must share the
/// unit set and the output horizon.
pub fn compare(results: &[(String, &SimulationResult)]) -> Result<ComparisonReport> {
    let (_, first) = results.first().ok_or_else(|| Error::Scenario {
        message: "comparison needs at least one result".to_string(),
    })?;
    for (name, r) in results {
        if r.unit_ids != first.unit_ids {
            return Err(Error::Scenario {
                message: format!("result `{name}` has a different unit set"),
            });
        }
        let same_horizon = r.grid_h.len() == first.grid_h.len()
            && (r.grid_h[0] - first.grid_h[0]).abs() < 1e-9
            && (r.grid_h[r.grid_h.len() - 1] - first.grid_h[first.grid_h.len() - 1]).abs() < 1e-9;
        if !same_horizon {
            return Err(Error::Scenario {
                message: format!("result `{name}` covers a different horizon"),
            });
        }
    }

    let rows = results
        .iter()
        .map(|(name, r)| {
            let m = &r.metrics;
            let total = m.total_discomfort_ch;
            let shares = m
                .discomfort_ch
                .iter()
                .map(|j| if total > 0.0 { j / total } else { 0.0 })
                .collect();
            let max = m
                .discomfort_ch
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let min = m
                .discomfort_ch
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            let ratio = if min > 0.0 { Some(max / min) } else { None };
            StrategyRow {
                strategy: name.clone(),
                discomfort_ch: m.discomfort_ch.clone(),
                total_discomfort_ch: total,
                discomfort_share: shares,
                max_min_discomfort_ratio: ratio,
                consumption_mwh: m.consumption_mwh.clone(),
                total_consumption_mwh: m.total_consumption_mwh,
            }
        })
        .collect();

    Ok(ComparisonReport {
        unit_ids: first.unit_ids.clone(),
        rows,
    })
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "discomfort (degC h)")?;
        write!(f, "{:<10}", "strategy")?;
        for id in &self.unit_ids {
            write!(f, " {id:>12}")?;
        }
        writeln!(f, " {:>12} {:>9}", "total", "max/min")?;
        for row in &self.rows {
            write!(f, "{:<10}", row.strategy)?;
            for j in &row.discomfort_ch {
                write!(f, " {j:>12.4}")?;
            }
            write!(f, " {:>12.4}", row.total_discomfort_ch)?;
            match row.max_min_discomfort_ratio {
                Some(r) => writeln!(f, " {r:>9.3}")?,
                None => writeln!(f, " {:>9}", "-")?,
            }
        }
        writeln!(f)?;
        writeln!(f, "heat consumption (MWh)")?;
        write!(f, "{:<10}", "strategy")?;
        for id in &self.unit_ids {
            write!(f, " {id:>12}")?;
        }
        writeln!(f, " {:>12}", "total")?;
        for row in &self.rows {
            write!(f, "{:<10}", row.strategy)?;
            for c in &row.consumption_mwh {
                write!(f, " {c:>12.4}")?;
            }
            writeln!(f, " {:>12.4}", row.total_consumption_mwh)?;
        }
        Ok(())
    }
}
