//! Local unit controller: heating-curve feedforward and proportional
//! feedback, plus the tuning rules that make a unit reject the outdoor
//! temperature in stationarity.

use crate::error::{Error, Result};
use crate::thermal::UnitParams;

/// Output of the local controller for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Heating-system setpoint from the heating curve (degC).
    pub t_hs_ref_c: f64,
    /// Desired heat load (kW), clamped at zero.
    pub p_tilde_kw: f64,
    /// True when the raw proportional output was negative before clamping.
    pub clamped: bool,
}

/// Heating-curve setpoint `a0 + a1 * T_ext`.
pub fn feedforward(t_ext_c: f64, p: &UnitParams) -> f64 {
    p.a0 + p.a1 * t_ext_c
}

/// Proportional desired load `max(0, k_p (T_hs_ref - T_hs))`.
///
/// The valve cannot extract negative heat, so a negative raw value is clamped
/// at zero and flagged; the clamped value is what gets reported upstream.
pub fn desired_load(t_hs_c: f64, t_hs_ref_c: f64, p: &UnitParams) -> ControlOutput {
    let raw = p.k_p * (t_hs_ref_c - t_hs_c);
    if raw < 0.0 {
        ControlOutput {
            t_hs_ref_c,
            p_tilde_kw: 0.0,
            clamped: true,
        }
    } else {
        ControlOutput {
            t_hs_ref_c,
            p_tilde_kw: raw,
            clamped: false,
        }
    }
}

/// `1 + k_p eta R_hs + k_p eta a1 R_ext`, zero iff the stationary indoor
/// temperature is independent of the outdoor temperature.
pub fn well_tuned_residual(p: &UnitParams) -> f64 {
    1.0 + p.k_p * p.eta * p.r_hs + p.k_p * p.eta * p.a1 * p.r_ext
}

/// The unique feedforward slope with zero [`well_tuned_residual`]:
/// `a1* = -(1 + k_p eta R_hs) / (k_p eta R_ext)`.
///
/// The closed form is polished so that the residual as evaluated in f64 is
/// as close to zero as the floating-point grid allows; for stiff parameter
/// sets the raw quotient can leave a residual of a few thousand ulps.
pub fn tune_a1(p: &UnitParams) -> f64 {
    let khe = p.k_p * p.eta;
    let slope = khe * p.r_ext;
    let mut best = -(1.0 + khe * p.r_hs) / slope;
    let residual_at = |a1: f64| {
        let mut q = p.clone();
        q.a1 = a1;
        well_tuned_residual(&q)
    };
    // One Newton correction (the residual is exactly linear in a1) ...
    best -= residual_at(best) / slope;
    // ... then scan the neighbouring representables for an exact zero.
    let mut best_res = residual_at(best).abs();
    let ulp = best.abs() * f64::EPSILON;
    for k in 1..=8i32 {
        for cand in [best + k as f64 * ulp, best - k as f64 * ulp] {
            let r = residual_at(cand).abs();
            if r < best_res {
                best_res = r;
                best = cand;
                if r == 0.0 {
                    return best;
                }
            }
        }
    }
    best
}

/// The feedforward intercept that places the stationary indoor temperature at
/// `t_c` for a well-tuned unit:
/// `a0* = T_c (1 + k_p eta R_hs + k_p eta R_ext) / (R_ext k_p eta)`.
///
/// Requires `a1` to satisfy the well-tuned constraint; otherwise the
/// stationary temperature depends on the outdoor temperature and no single
/// intercept can hold `t_c`.
pub fn tune_a0(p: &UnitParams, t_c: f64) -> Result<f64> {
    let khe = p.k_p * p.eta;
    let denom = 1.0 + khe * p.r_hs + khe * p.r_ext;
    let residual = well_tuned_residual(p);
    if residual.abs() > 1e-9 * denom {
        return Err(Error::NotWellTuned { residual });
    }
    Ok(t_c * denom / (p.r_ext * khe))
}

/// Convenience: return a copy of `p` with `a1` and `a0` replaced by the tuned
/// values for comfort temperature `t_c`.
pub fn tune_unit(p: &UnitParams, t_c: f64) -> Result<UnitParams> {
    p.validate()?;
    let mut tuned = p.clone();
    tuned.a1 = tune_a1(p);
    tuned.a0 = tune_a0(&tuned, t_c)?;
    Ok(tuned)
}
