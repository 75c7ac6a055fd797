//! The deterministic time-stepping loop coupling units, local controllers and
//! the central coordination round.
//!
//! Time marches in coordination intervals. At each round start the engine
//! samples the weather, lets every unit compute its desired load from its
//! current heating-system temperature, runs the central round, then advances
//! every unit to the next round with the exact zero-order-hold integrator
//! while its deficit share is held constant. The loop is sequential and free
//! of any randomness: identical scenarios produce bit-identical results.
//!
//! Output series live on their own grid, decoupled from the round spacing.
//! Grid points are evaluated analytically inside the covering interval (an
//! exact partial step from the interval start), aligned so that a point
//! falling on a round boundary reports the settled state at the end of the
//! preceding interval rather than the request transient at the start of the
//! next; the per-round request spikes remain visible in the round records.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{desired_load, feedforward};
use crate::coordination::{compute_weights, coordination_round};
use crate::error::{Error, Result};
use crate::metrics::{consumption, discomfort, Metrics};
use crate::scenario::{FeedbackMode, InitialState, Scenario};
use crate::thermal::{
    steady_state, step, step_with_held_load, StepMethod, UnitInputs, UnitParams, UnitState,
};

/// Time tolerance for aligning the output grid with round boundaries (s).
const TIME_EPS_S: f64 = 1e-6;

/// One coordination round as seen by the central unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t_h: f64,
    pub p_sat_kw: f64,
    pub sum_p_tilde_kw: f64,
    pub sum_p_kw: f64,
    /// Units whose allocation was clamped at zero this round.
    pub clamped_units: Vec<usize>,
}

/// Recorded time series of one unit on the output grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSeries {
    pub t_in_c: Vec<f64>,
    pub t_hs_c: Vec<f64>,
    pub p_tilde_kw: Vec<f64>,
    pub p_kw: Vec<f64>,
}

/// Everything a simulation run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub scenario_name: Option<String>,
    pub strategy: String,
    pub unit_ids: Vec<String>,
    pub weights: Vec<f64>,
    pub t_c: f64,
    /// Shared output time grid (hours).
    pub grid_h: Vec<f64>,
    /// Per-unit series, one entry per unit, each on `grid_h`.
    pub units: Vec<UnitSeries>,
    /// One record per coordination round.
    pub rounds: Vec<RoundRecord>,
    pub metrics: Metrics,
}

/// Per-interval stepping context of one unit.
#[derive(Debug, Clone, Copy)]
enum Regime {
    /// Local feedback active; the deficit share is held.
    Closed { share_kw: f64 },
    /// The controller was clamped at the interval start; the desired load is
    /// held at zero over the interval.
    ControlClamped { share_kw: f64 },
    /// Sampled mode: the allocated load is held over the interval.
    HeldLoad { alloc_kw: f64, p_tilde_kw: f64 },
}

/// Run a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<SimulationResult> {
    scenario.validate()?;
    let units = scenario.effective_units();
    let n = units.len();
    let weights = compute_weights(&scenario.strategy, &units)?;
    let weather = scenario.weather.resolve()?;
    if !weather.covers(scenario.t0_h, scenario.t_end_h) {
        let t_h = if weather.first_time_h() > scenario.t0_h {
            scenario.t0_h
        } else {
            scenario.t_end_h
        };
        return Err(Error::WeatherRange {
            t_h,
            first_h: weather.first_time_h(),
            last_h: weather.last_time_h(),
        });
    }

    let t0_s = scenario.t0_h * 3600.0;
    let t_end_s = scenario.t_end_h * 3600.0;
    let dt_s = scenario.coordination_interval_s;
    let n_rounds = (((t_end_s - t0_s) / dt_s) - 1e-9).floor() as u64 + 1;

    let out_h = scenario.output_interval_h;
    let n_grid = (((scenario.t_end_h - scenario.t0_h) / out_h) + 1e-9).floor() as usize + 1;
    let grid_h: Vec<f64> = (0..n_grid)
        .map(|j| scenario.t0_h + j as f64 * out_h)
        .collect();
    let grid_s: Vec<f64> = grid_h.iter().map(|h| h * 3600.0).collect();

    let mut states: Vec<UnitState> = match &scenario.initial_state {
        InitialState::Auto => {
            let t_ext0 = weather.sample(scenario.t0_h)?;
            units
                .iter()
                .map(|p| initial_state_auto(p, t_ext0))
                .collect::<Result<_>>()?
        }
        InitialState::Explicit(v) => v.clone(),
    };

    let mut series: Vec<UnitSeries> = (0..n)
        .map(|_| UnitSeries {
            t_in_c: Vec::with_capacity(n_grid),
            t_hs_c: Vec::with_capacity(n_grid),
            p_tilde_kw: Vec::with_capacity(n_grid),
            p_kw: Vec::with_capacity(n_grid),
        })
        .collect();
    let mut rounds: Vec<RoundRecord> = Vec::with_capacity(n_rounds as usize);
    let mut control_clamps = vec![0u64; n];
    let mut allocation_clamps = vec![0u64; n];
    // Last deficit each unit actually received, for dropout modelling.
    let mut p_sat_seen = vec![0.0f64; n];
    let mut next_grid = 0usize;

    for k in 0..n_rounds {
        let tk_s = t0_s + k as f64 * dt_s;
        let tn_s = (t0_s + (k + 1) as f64 * dt_s).min(t_end_s);
        let tk_h = tk_s / 3600.0;
        let t_ext = weather.sample(tk_h.min(scenario.t_end_h))?;

        // Unit side: desired loads from the current heating-system state.
        let t_refs: Vec<f64> = units.iter().map(|p| feedforward(t_ext, p)).collect();
        let ctrls: Vec<_> = units
            .iter()
            .zip(&states)
            .zip(&t_refs)
            .map(|((p, st), t_ref)| desired_load(st.t_hs_c, *t_ref, p))
            .collect();
        let p_tilde: Vec<f64> = ctrls.iter().map(|c| c.p_tilde_kw).collect();
        for (i, c) in ctrls.iter().enumerate() {
            if c.clamped {
                control_clamps[i] += 1;
            }
        }

        // Central side: one sum, one broadcast.
        let p_max = scenario.p_max.at(tk_h);
        let round = coordination_round(&p_tilde, p_max, &weights, scenario.allocation_mode)?;
        for &i in &round.clamped_units {
            allocation_clamps[i] += 1;
        }

        // What each unit applies. A unit missing the broadcast recomputes its
        // allocation locally from the stale deficit.
        let mut applied_alloc = vec![0.0f64; n];
        let mut applied_share = vec![0.0f64; n];
        for i in 0..n {
            let dropped = scenario
                .broadcast_dropout
                .as_ref()
                .is_some_and(|d| d.unit == i && k >= d.first_round && k < d.first_round + d.rounds);
            if dropped {
                let local = (p_tilde[i] - weights[i] * p_sat_seen[i]).max(0.0);
                applied_alloc[i] = local;
                applied_share[i] = p_tilde[i] - local;
            } else {
                p_sat_seen[i] = round.p_sat_kw;
                applied_alloc[i] = round.p_kw[i];
                applied_share[i] = round.deficit_share(i);
            }
        }

        rounds.push(RoundRecord {
            t_h: tk_h,
            p_sat_kw: round.p_sat_kw,
            sum_p_tilde_kw: round.sum_p_tilde(),
            sum_p_kw: round.sum_p(),
            clamped_units: round.clamped_units.clone(),
        });

        // Interval context per unit: regime fixed at the interval start.
        let regimes: Vec<Regime> = (0..n)
            .map(|i| match scenario.feedback_mode {
                FeedbackMode::Continuous => {
                    let raw = units[i].k_p * (t_refs[i] - states[i].t_hs_c);
                    if raw >= 0.0 {
                        Regime::Closed {
                            share_kw: applied_share[i],
                        }
                    } else {
                        Regime::ControlClamped {
                            share_kw: applied_share[i],
                        }
                    }
                }
                FeedbackMode::Sampled => Regime::HeldLoad {
                    alloc_kw: applied_alloc[i],
                    p_tilde_kw: p_tilde[i],
                },
            })
            .collect();

        // Emit every grid point covered by this interval. Points sit at
        // offsets in (0, dt]; only the very first grid point is taken at the
        // interval start itself.
        while next_grid < n_grid {
            let tg = grid_s[next_grid];
            let first_point = next_grid == 0 && k == 0;
            if !first_point && tg > tn_s + TIME_EPS_S {
                break;
            }
            let off = if first_point {
                0.0
            } else {
                (tg - tk_s).min(tn_s - tk_s)
            };
            for i in 0..n {
                let st = eval_in_interval(&states[i], &units[i], &regimes[i], t_ext, off)?;
                let (pt, pw) = match regimes[i] {
                    Regime::Closed { share_kw } => {
                        let raw = units[i].k_p * (t_refs[i] - st.t_hs_c);
                        (raw.max(0.0), raw - share_kw)
                    }
                    Regime::ControlClamped { share_kw } => (0.0, -share_kw),
                    Regime::HeldLoad {
                        alloc_kw,
                        p_tilde_kw,
                    } => (p_tilde_kw, alloc_kw),
                };
                series[i].t_in_c.push(st.t_in_c);
                series[i].t_hs_c.push(st.t_hs_c);
                series[i].p_tilde_kw.push(pt);
                series[i].p_kw.push(pw);
            }
            next_grid += 1;
        }

        // Advance the master states to the interval end.
        for i in 0..n {
            states[i] = eval_in_interval(&states[i], &units[i], &regimes[i], t_ext, tn_s - tk_s)?;
            if !states[i].is_finite() {
                return Err(Error::NonFinite {
                    unit_id: units[i].unit_id.clone(),
                    t_h: tn_s / 3600.0,
                });
            }
        }
    }
    debug_assert_eq!(next_grid, n_grid, "output grid not fully emitted");

    let metrics = compute_metrics(
        &grid_h,
        &series,
        scenario.t_c,
        control_clamps,
        allocation_clamps,
    )?;

    Ok(SimulationResult {
        scenario_name: scenario.name.clone(),
        strategy: scenario.strategy.name().to_string(),
        unit_ids: units.iter().map(|u| u.unit_id.clone()).collect(),
        weights,
        t_c: scenario.t_c,
        grid_h,
        units: series,
        rounds,
        metrics,
    })
}

/// Exact state `off_s` seconds into an interval, from the interval-start
/// state under the interval's frozen regime.
fn eval_in_interval(
    start: &UnitState,
    p: &UnitParams,
    regime: &Regime,
    t_ext_c: f64,
    off_s: f64,
) -> Result<UnitState> {
    if off_s <= 0.0 {
        return Ok(*start);
    }
    match *regime {
        Regime::Closed { share_kw } | Regime::ControlClamped { share_kw } => {
            let inputs = UnitInputs {
                t_ext_c,
                deficit_share_kw: share_kw,
            };
            step(start, &inputs, off_s, p, StepMethod::ExactZoh)
        }
        Regime::HeldLoad { alloc_kw, .. } => {
            step_with_held_load(start, t_ext_c, alloc_kw, off_s, p)
        }
    }
}

/// Stationary point at the first weather sample with zero deficit; if the
/// controller would be clamped there (warm weather), rest at the isothermal
/// equilibrium instead.
fn initial_state_auto(p: &UnitParams, t_ext0_c: f64) -> Result<UnitState> {
    match steady_state(p, t_ext0_c, 0.0, 0.0) {
        Ok(ss) => Ok(UnitState {
            t_in_c: ss.t_in_c,
            t_hs_c: ss.t_hs_c,
        }),
        Err(Error::RegimeViolation { .. }) => Ok(UnitState {
            t_in_c: t_ext0_c,
            t_hs_c: t_ext0_c,
        }),
        Err(e) => Err(e),
    }
}

fn compute_metrics(
    grid_h: &[f64],
    series: &[UnitSeries],
    t_c: f64,
    control_clamps: Vec<u64>,
    allocation_clamps: Vec<u64>,
) -> Result<Metrics> {
    let t0 = grid_h[0];
    let t_end = grid_h[grid_h.len() - 1];
    let mut discomfort_ch = Vec::with_capacity(series.len());
    let mut consumption_mwh = Vec::with_capacity(series.len());
    let mut max_deviation_c = Vec::with_capacity(series.len());
    for s in series {
        discomfort_ch.push(discomfort(grid_h, &s.t_in_c, t_c, t0, t_end)?);
        consumption_mwh.push(consumption(grid_h, &s.p_kw)?);
        max_deviation_c.push(
            s.t_in_c
                .iter()
                .map(|t| (t_c - t).abs())
                .fold(0.0f64, f64::max),
        );
    }
    Ok(Metrics {
        total_discomfort_ch: discomfort_ch.iter().sum(),
        total_consumption_mwh: consumption_mwh.iter().sum(),
        discomfort_ch,
        consumption_mwh,
        max_deviation_c,
        control_clamps,
        allocation_clamps,
    })
}

// ---------------------------------------------------------------------------
// Result emission
// ---------------------------------------------------------------------------

/// Header of the per-unit series CSV.
pub const SERIES_CSV_HEADER: &str = "t_h,T_in_C,T_hs_C,P_tilde_kW,P_kW";
/// Header of the round CSV.
pub const ROUNDS_CSV_HEADER: &str = "t_h,P_sat_kW,sum_P_tilde_kW,sum_P_kW";

/// Write one unit's series in the canonical CSV format.
pub fn write_unit_series_csv(
    result: &SimulationResult,
    unit: usize,
    out: &mut impl Write,
) -> Result<()> {
    let s = &result.units[unit];
    writeln!(out, "{SERIES_CSV_HEADER}")?;
    for (j, t) in result.grid_h.iter().enumerate() {
        writeln!(
            out,
            "{t},{},{},{},{}",
            s.t_in_c[j], s.t_hs_c[j], s.p_tilde_kw[j], s.p_kw[j]
        )?;
    }
    Ok(())
}

/// Write the per-round records in the canonical CSV format.
pub fn write_rounds_csv(result: &SimulationResult, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{ROUNDS_CSV_HEADER}")?;
    for r in &result.rounds {
        writeln!(
            out,
            "{},{},{},{}",
            r.t_h, r.p_sat_kw, r.sum_p_tilde_kw, r.sum_p_kw
        )?;
    }
    Ok(())
}

/// Run summary serialized as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario_name: Option<String>,
    pub strategy: String,
    pub unit_ids: Vec<String>,
    pub weights: Vec<f64>,
    pub t_c: f64,
    pub t0_h: f64,
    pub t_end_h: f64,
    pub rounds: usize,
    pub metrics: Metrics,
}

impl Summary {
    pub fn of(result: &SimulationResult) -> Self {
        Summary {
            scenario_name: result.scenario_name.clone(),
            strategy: result.strategy.clone(),
            unit_ids: result.unit_ids.clone(),
            weights: result.weights.clone(),
            t_c: result.t_c,
            t0_h: result.grid_h[0],
            t_end_h: result.grid_h[result.grid_h.len() - 1],
            rounds: result.rounds.len(),
            metrics: result.metrics.clone(),
        }
    }
}

fn filename_safe(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Write the full result set into `dir`: one `series_<unit>.csv` per unit,
/// `rounds.csv` and `summary.json`.
pub fn write_result_dir(result: &SimulationResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for (i, id) in result.unit_ids.iter().enumerate() {
        let path = dir.join(format!("series_{}.csv", filename_safe(id)));
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_unit_series_csv(result, i, &mut file)?;
        file.flush()?;
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(dir.join("rounds.csv"))?);
    write_rounds_csv(result, &mut file)?;
    file.flush()?;
    let summary = serde_json::to_string_pretty(&Summary::of(result))?;
    std::fs::write(dir.join("summary.json"), summary.as_bytes())?;
    Ok(())
}
