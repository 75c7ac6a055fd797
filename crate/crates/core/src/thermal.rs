//! Two-state RC thermal model of one district-heating unit.
//!
//! A unit is a building with an interior node (temperature `T_in`, capacitance
//! `C_in`) and a heating-system node (temperature `T_hs`, capacitance `C_hs`).
//! Heat flows from the heating system to the interior through `R_hs` and from
//! the interior to the exterior through `R_ext`. The heating system is fed by
//! the heat load `P` extracted from the network through a heat exchanger with
//! efficiency `eta`:
//!
//! ```text
//!   C_in  dT_in/dt = q_hs - q_ext          q_ext = (T_in - T_ext)/R_ext
//!   C_hs  dT_hs/dt = -q_hs + eta * P       q_hs  = (T_hs - T_in)/R_hs
//! ```
//!
//! With the local proportional controller closed around the feedforward
//! setpoint (see [`crate::control`]) and the coordination deficit share held
//! constant, the system is affine in the state, so the step operation can use
//! the exact zero-order-hold discretization at any step size. This matters:
//! with realistic parameters the heating-system mode is of the order of
//! `C_hs/(eta*k_p)` seconds while the building mode is tens of hours, a time
//! scale ratio that makes explicit integrators useless except for validation.
//!
//! Resistances are in degC/kW and capacitances in kJ/degC, so every `1/(R*C)`
//! carries 1/s; all step sizes in this module are seconds.

use serde::{Deserialize, Serialize};

use crate::control;
use crate::error::{Error, Result};

/// Physical and controller constants of one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitParams {
    /// Opaque identifier used in results and error messages.
    pub unit_id: String,
    /// Thermal resistance interior <-> exterior (degC/kW).
    pub r_ext: f64,
    /// Thermal resistance heating system <-> interior (degC/kW).
    pub r_hs: f64,
    /// Interior thermal capacitance (kJ/degC).
    pub c_in: f64,
    /// Heating-system thermal capacitance (kJ/degC).
    pub c_hs: f64,
    /// Heat-exchanger efficiency factor, 0 < eta <= 1.
    pub eta: f64,
    /// Proportional controller gain (kW/degC).
    pub k_p: f64,
    /// Feedforward intercept (degC).
    pub a0: f64,
    /// Feedforward slope (dimensionless).
    pub a1: f64,
}

impl UnitParams {
    pub fn validate(&self) -> Result<()> {
        let err = |message: String| Error::InvalidParams {
            unit_id: self.unit_id.clone(),
            message,
        };
        let positive = [
            ("r_ext", self.r_ext),
            ("r_hs", self.r_hs),
            ("c_in", self.c_in),
            ("c_hs", self.c_hs),
            ("k_p", self.k_p),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(err(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.eta.is_finite() && self.eta > 0.0 && self.eta <= 1.0) {
            return Err(err(format!(
                "eta must satisfy 0 < eta <= 1, got {}",
                self.eta
            )));
        }
        if !self.a0.is_finite() || !self.a1.is_finite() {
            return Err(err("a0 and a1 must be finite".to_string()));
        }
        Ok(())
    }
}

/// The two thermal states of one unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitState {
    /// Indoor temperature (degC).
    pub t_in_c: f64,
    /// Heating-system water temperature (degC).
    pub t_hs_c: f64,
}

impl UnitState {
    pub fn is_finite(&self) -> bool {
        self.t_in_c.is_finite() && self.t_hs_c.is_finite()
    }
}

/// Exogenous inputs held constant over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitInputs {
    /// Outdoor temperature (degC).
    pub t_ext_c: f64,
    /// Deficit share subtracted from the desired load (kW, >= 0).
    pub deficit_share_kw: f64,
}

/// Stationary operating point of the closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// Stationary indoor temperature (degC).
    pub t_in_c: f64,
    /// Stationary heating-system temperature (degC).
    pub t_hs_c: f64,
    /// Stationary extracted load (kW).
    pub p_kw: f64,
}

/// Heat flow from the interior to the exterior (kW).
pub fn heat_flow_ext(state: &UnitState, t_ext_c: f64, p: &UnitParams) -> f64 {
    (state.t_in_c - t_ext_c) / p.r_ext
}

/// Heat flow from the heating system to the interior (kW).
pub fn heat_flow_hs(state: &UnitState, p: &UnitParams) -> f64 {
    (state.t_hs_c - state.t_in_c) / p.r_hs
}

/// Time derivatives `(dT_in/dt, dT_hs/dt)` in degC/s under the embedded local
/// feedback `P = max(0, k_p (a0 + a1 T_ext - T_hs)) - deficit_share`.
pub fn derivatives(state: &UnitState, inputs: &UnitInputs, p: &UnitParams) -> (f64, f64) {
    let q_ext = heat_flow_ext(state, inputs.t_ext_c, p);
    let q_hs = heat_flow_hs(state, p);
    let ctrl = control::desired_load(state.t_hs_c, control::feedforward(inputs.t_ext_c, p), p);
    let load = ctrl.p_tilde_kw - inputs.deficit_share_kw;
    let d_t_in = (q_hs - q_ext) / p.c_in;
    let d_t_hs = (-q_hs + p.eta * load) / p.c_hs;
    (d_t_in, d_t_hs)
}

// ---------------------------------------------------------------------------
// Closed-loop affine form and exact discretization
// ---------------------------------------------------------------------------

/// The closed loop written as `dx/dt = A x + B u + affine` with state
/// `x = (T_in, T_hs)` and input `u = (T_ext, deficit_share)`.
///
/// Valid in the regime where the desired load is not clamped at zero; there
/// it reproduces [`derivatives`] exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopSystem {
    pub a: [[f64; 2]; 2],
    pub b: [[f64; 2]; 2],
    pub affine: [f64; 2],
}

impl ClosedLoopSystem {
    pub fn new(p: &UnitParams) -> Self {
        let a = [
            [
                -(1.0 / p.r_hs + 1.0 / p.r_ext) / p.c_in,
                1.0 / (p.r_hs * p.c_in),
            ],
            [
                1.0 / (p.r_hs * p.c_hs),
                -(1.0 / p.r_hs + p.eta * p.k_p) / p.c_hs,
            ],
        ];
        let b = [
            [1.0 / (p.r_ext * p.c_in), 0.0],
            [p.eta * p.k_p * p.a1 / p.c_hs, -p.eta / p.c_hs],
        ];
        let affine = [0.0, p.eta * p.k_p * p.a0 / p.c_hs];
        ClosedLoopSystem { a, b, affine }
    }

    /// `A x + B u + affine`.
    pub fn derivatives(&self, x: [f64; 2], u: [f64; 2]) -> [f64; 2] {
        [
            self.a[0][0] * x[0]
                + self.a[0][1] * x[1]
                + self.b[0][0] * u[0]
                + self.b[0][1] * u[1]
                + self.affine[0],
            self.a[1][0] * x[0]
                + self.a[1][1] * x[1]
                + self.b[1][0] * u[0]
                + self.b[1][1] * u[1]
                + self.affine[1],
        ]
    }

    /// Eigenvalues of `A`, ordered slow to fast (both strictly negative for
    /// valid parameters: trace < 0 and det > 0 by construction).
    pub fn eigenvalues(&self) -> (f64, f64) {
        let (s, q) = spectral_split(&self.a);
        (s + q, s - q)
    }

    /// Fixed point of the loop under constant input, `-A^{-1} (B u + affine)`.
    pub fn equilibrium(&self, u: [f64; 2]) -> [f64; 2] {
        let f = [
            self.b[0][0] * u[0] + self.b[0][1] * u[1] + self.affine[0],
            self.b[1][0] * u[0] + self.b[1][1] * u[1] + self.affine[1],
        ];
        let det = self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0];
        [
            -(self.a[1][1] * f[0] - self.a[0][1] * f[1]) / det,
            -(-self.a[1][0] * f[0] + self.a[0][0] * f[1]) / det,
        ]
    }
}

/// `s` and `q` such that the eigenvalues of the 2x2 matrix are `s +- q`.
/// The off-diagonal product is positive for every system built here, so the
/// discriminant is positive and the eigenvalues are real and distinct.
fn spectral_split(a: &[[f64; 2]; 2]) -> (f64, f64) {
    let s = 0.5 * (a[0][0] + a[1][1]);
    let d = 0.5 * (a[0][0] - a[1][1]);
    (s, (d * d + a[0][1] * a[1][0]).sqrt())
}

/// sinh(x)/x with the removable singularity filled in.
fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// `(exp(lambda*dt) - 1) / lambda`, accurate for small `lambda*dt`.
fn phi1(lambda: f64, dt: f64) -> f64 {
    debug_assert!(lambda != 0.0);
    (lambda * dt).exp_m1() / lambda
}

/// An affine system `dx/dt = A x + f` with the forcing already folded in.
#[derive(Debug, Clone, Copy)]
struct AffineSystem {
    a: [[f64; 2]; 2],
    f: [f64; 2],
}

impl AffineSystem {
    /// Closed loop in the unclamped regime under held `(T_ext, deficit_share)`.
    fn closed_loop(p: &UnitParams, t_ext_c: f64, deficit_share_kw: f64) -> Self {
        let sys = ClosedLoopSystem::new(p);
        let u = [t_ext_c, deficit_share_kw];
        let f = [
            sys.b[0][0] * u[0] + sys.b[0][1] * u[1] + sys.affine[0],
            sys.b[1][0] * u[0] + sys.b[1][1] * u[1] + sys.affine[1],
        ];
        AffineSystem { a: sys.a, f }
    }

    /// Open loop (feedback inactive) under a held extracted load `P`.
    fn held_load(p: &UnitParams, t_ext_c: f64, load_kw: f64) -> Self {
        let a = [
            [
                -(1.0 / p.r_hs + 1.0 / p.r_ext) / p.c_in,
                1.0 / (p.r_hs * p.c_in),
            ],
            [1.0 / (p.r_hs * p.c_hs), -1.0 / (p.r_hs * p.c_hs)],
        ];
        let f = [t_ext_c / (p.r_ext * p.c_in), p.eta * load_kw / p.c_hs];
        AffineSystem { a, f }
    }

    /// Exact solution at time `dt`:
    /// `x(dt) = exp(A dt) x + (int_0^dt exp(A tau) dtau) f`.
    ///
    /// Both matrix functions share the decomposition `c I + phi N` with
    /// `N = A - s I`, where the scalar coefficients come from applying the
    /// function to the eigenvalues. The `phi` coefficients are divided
    /// differences across the spectrum; they are evaluated in three regimes so
    /// that neither the huge spread (stiff units, `q dt` in the hundreds) nor
    /// near-confluent eigenvalues lose precision.
    fn step(&self, x: [f64; 2], dt: f64) -> [f64; 2] {
        let (s, q) = spectral_split(&self.a);
        let l1 = s + q; // slow
        let l2 = s - q; // fast
        debug_assert!(l1 < 0.0 && l2 < 0.0, "system must be stable");

        let e1 = (l1 * dt).exp();
        let e2 = (l2 * dt).exp();
        let g1 = phi1(l1, dt);
        let g2 = phi1(l2, dt);

        let ce = 0.5 * (e1 + e2);
        let cg = 0.5 * (g1 + g2);

        let (phe, phg) = if q * dt > 0.5 {
            // Well-separated exponentials: the direct differences are safe.
            ((e1 - e2) / (2.0 * q), (g1 - g2) / (2.0 * q))
        } else if (s * dt).abs() <= 0.5 {
            // Everything small: symmetric form for E, power series for G.
            let phe = (s * dt).exp() * dt * sinhc(q * dt);
            let mut phg = 0.0;
            let det = s * s - q * q;
            let mut h_prev = 0.0; // h_0
            let mut h = 1.0; // h_1
            let mut dt_pow = dt * dt; // dt^{k+1} at k = 1
            let mut fact = 2.0; // (k+1)! at k = 1
            for k in 1..40 {
                let term = dt_pow / fact * h;
                phg += term;
                if term.abs() <= 1e-18 * phg.abs() {
                    break;
                }
                let h_next = 2.0 * s * h - det * h_prev;
                h_prev = h;
                h = h_next;
                dt_pow *= dt;
                fact *= (k + 2) as f64;
            }
            (phe, phg)
        } else {
            // Confluent but fast-decaying: closed forms anchored on exp(s dt).
            let est = (s * dt).exp();
            let phe = est * dt * sinhc(q * dt);
            let det = s * s - q * q;
            let phg = (est * (s * (q * dt).sinh() - q * (q * dt).cosh()) + q) / (q * det);
            (phe, phg)
        };

        let n = [
            [0.5 * (self.a[0][0] - self.a[1][1]), self.a[0][1]],
            [self.a[1][0], -0.5 * (self.a[0][0] - self.a[1][1])],
        ];
        let exp_at = [
            [ce + phe * n[0][0], phe * n[0][1]],
            [phe * n[1][0], ce + phe * n[1][1]],
        ];
        let int_exp = [
            [cg + phg * n[0][0], phg * n[0][1]],
            [phg * n[1][0], cg + phg * n[1][1]],
        ];
        [
            exp_at[0][0] * x[0]
                + exp_at[0][1] * x[1]
                + int_exp[0][0] * self.f[0]
                + int_exp[0][1] * self.f[1],
            exp_at[1][0] * x[0]
                + exp_at[1][1] * x[1]
                + int_exp[1][0] * self.f[0]
                + int_exp[1][1] * self.f[1],
        ]
    }
}

/// Time-integration method for [`step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepMethod {
    /// Analytic solution of the held-input affine system. Unconditionally
    /// stable at any step size; this is the integrator the engine uses.
    ExactZoh,
    /// One classical Runge-Kutta step, provided for cross-validation only.
    /// Stability requires `dt` well below the fast mode `C_hs/(eta*k_p)`,
    /// which is around 0.2 s for stiff parameter sets.
    Rk4,
}

/// Advance one unit by `dt_s` seconds under held inputs.
///
/// Whether the desired load is clamped at zero is decided from the state at
/// the start of the step and held fixed across it, keeping the dynamics
/// affine; with coordination intervals of a minute the induced error is
/// negligible in deficit scenarios where the desired load stays positive.
pub fn step(
    state: &UnitState,
    inputs: &UnitInputs,
    dt_s: f64,
    p: &UnitParams,
    method: StepMethod,
) -> Result<UnitState> {
    if !(dt_s.is_finite() && dt_s > 0.0) {
        return Err(Error::InvalidParams {
            unit_id: p.unit_id.clone(),
            message: format!("step size must be finite and > 0, got {dt_s}"),
        });
    }
    match method {
        StepMethod::ExactZoh => {
            let raw = p.k_p * (control::feedforward(inputs.t_ext_c, p) - state.t_hs_c);
            let sys = if raw >= 0.0 {
                AffineSystem::closed_loop(p, inputs.t_ext_c, inputs.deficit_share_kw)
            } else {
                AffineSystem::held_load(p, inputs.t_ext_c, -inputs.deficit_share_kw)
            };
            let x = sys.step([state.t_in_c, state.t_hs_c], dt_s);
            Ok(UnitState {
                t_in_c: x[0],
                t_hs_c: x[1],
            })
        }
        StepMethod::Rk4 => {
            let f = |x: [f64; 2]| {
                let st = UnitState {
                    t_in_c: x[0],
                    t_hs_c: x[1],
                };
                let (d0, d1) = derivatives(&st, inputs, p);
                [d0, d1]
            };
            let x0 = [state.t_in_c, state.t_hs_c];
            let k1 = f(x0);
            let k2 = f([x0[0] + 0.5 * dt_s * k1[0], x0[1] + 0.5 * dt_s * k1[1]]);
            let k3 = f([x0[0] + 0.5 * dt_s * k2[0], x0[1] + 0.5 * dt_s * k2[1]]);
            let k4 = f([x0[0] + dt_s * k3[0], x0[1] + dt_s * k3[1]]);
            Ok(UnitState {
                t_in_c: x0[0] + dt_s / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                t_hs_c: x0[1] + dt_s / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            })
        }
    }
}

/// Advance one unit by `dt_s` seconds with the extracted load held constant
/// (feedback inactive). Used by the sampled-feedback engine mode.
pub fn step_with_held_load(
    state: &UnitState,
    t_ext_c: f64,
    load_kw: f64,
    dt_s: f64,
    p: &UnitParams,
) -> Result<UnitState> {
    if !(dt_s.is_finite() && dt_s > 0.0) {
        return Err(Error::InvalidParams {
            unit_id: p.unit_id.clone(),
            message: format!("step size must be finite and > 0, got {dt_s}"),
        });
    }
    let sys = AffineSystem::held_load(p, t_ext_c, load_kw);
    let x = sys.step([state.t_in_c, state.t_hs_c], dt_s);
    Ok(UnitState {
        t_in_c: x[0],
        t_hs_c: x[1],
    })
}

/// Stationary solution of the closed loop at outdoor temperature `t_ext0_c`
/// under the held deficit share `w * p_sat0_kw`.
///
/// The indoor temperature comes from the closed-form stationary solve
///
/// ```text
/// T_in0 = [(1 + kheR_hs + khea1R_ext) T_ext0 + R_ext khe a0 - R_ext eta w P_sat0]
///         / (1 + kheR_hs + kheR_ext),          khe = k_p * eta
/// ```
///
/// and `T_hs0`, `P0` are back-solved from the flow balances. Errors with
/// [`Error::RegimeViolation`] if the stationary load would be negative, i.e.
/// the solution lies outside the regime where the controller is not clamped.
pub fn steady_state(p: &UnitParams, t_ext0_c: f64, w: f64, p_sat0_kw: f64) -> Result<SteadyState> {
    p.validate()?;
    let khe = p.k_p * p.eta;
    let denom = 1.0 + khe * p.r_hs + khe * p.r_ext;
    let t_in0 = ((1.0 + khe * p.r_hs + khe * p.a1 * p.r_ext) * t_ext0_c + p.r_ext * khe * p.a0
        - p.r_ext * p.eta * w * p_sat0_kw)
        / denom;
    let t_hs0 = t_in0 + p.r_hs * (t_in0 - t_ext0_c) / p.r_ext;
    let p0 = (t_in0 - t_ext0_c) / (p.eta * p.r_ext);
    // Tolerate rounding at the P0 = 0 boundary.
    if p0 < -1e-12 {
        return Err(Error::RegimeViolation { p0_kw: p0 });
    }
    Ok(SteadyState {
        t_in_c: t_in0,
        t_hs_c: t_hs0,
        p_kw: p0,
    })
}
