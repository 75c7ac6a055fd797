//! Central coordination round and deficit-weighting strategies.
//!
//! The round is a two-message exchange: every unit uploads its desired load,
//! the central unit sums them, compares against the available power and
//! broadcasts the deficit. Each unit then subtracts its weighted share of the
//! deficit from its own request. The central computation is a single sum, so
//! the scheme scales to any number of units; the whole policy choice lives in
//! the weights.

use serde::{Deserialize, Serialize};

use crate::control;
use crate::error::{Error, Result};
use crate::thermal::UnitParams;

/// Deficit-weighting policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Strategy {
    /// The last unit absorbs the full deficit; models an uncoordinated
    /// network where peripheral units starve first.
    Skewed,
    /// Equal shares, no knowledge of the units required.
    Flat,
    /// Shares proportional to `k_p (1 - a1)`, which equalizes the stationary
    /// temperature deviation across well-tuned units.
    #[serde(rename = "gain")]
    GainProportional,
    /// Gain-proportional shares divided by a per-unit price factor; a unit
    /// paying twice as much deviates half as much.
    #[serde(rename = "price")]
    PriceProportional { lambda: Vec<f64> },
    /// Fixed weights supplied directly.
    Explicit { weights: Vec<f64> },
}

impl Strategy {
    /// Short stable name, matching the CLI strategy vocabulary.
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Skewed => "skewed",
            Strategy::Flat => "flat",
            Strategy::GainProportional => "gain",
            Strategy::PriceProportional { .. } => "price",
            Strategy::Explicit { .. } => "explicit",
        }
    }
}

/// How negative raw allocations are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationMode {
    /// Clamp negative allocations at zero and log the event. Keeps the
    /// central computation trivial; the delivered total can exceed the limit
    /// in rounds where clamping fires.
    Clamp,
    /// Fix negative allocations at zero and re-spread their residual deficit
    /// over the remaining units with renormalized weights. Never delivers
    /// more than the available power.
    Redistribute,
}

/// Record of one coordination round.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationRound {
    /// Desired loads as uploaded (kW).
    pub p_tilde_kw: Vec<f64>,
    /// Available heat power this round (kW). When constructed through
    /// [`allocate`] the limit is inferred from the deficit (infinite if the
    /// deficit is zero); [`coordination_round`] stores the true value.
    pub p_max_kw: f64,
    /// Broadcast deficit (kW, >= 0).
    pub p_sat_kw: f64,
    /// Weights in effect.
    pub weights: Vec<f64>,
    /// Allocated loads (kW).
    pub p_kw: Vec<f64>,
    /// Indices of units whose allocation was clamped at zero.
    pub clamped_units: Vec<usize>,
}

impl AllocationRound {
    /// The share of the deficit actually borne by unit `i`, i.e. the amount
    /// withheld from its request. Equals `w_i * P_sat` whenever the raw
    /// allocation was non-negative.
    pub fn deficit_share(&self, i: usize) -> f64 {
        self.p_tilde_kw[i] - self.p_kw[i]
    }

    pub fn sum_p_tilde(&self) -> f64 {
        self.p_tilde_kw.iter().sum()
    }

    pub fn sum_p(&self) -> f64 {
        self.p_kw.iter().sum()
    }
}

/// `k_p (1 - a1)` for one unit: the stationary sensitivity of the request to
/// an indoor-temperature deviation. Gain and price weights are built from it.
pub fn gain_term(p: &UnitParams) -> f64 {
    p.k_p * (1.0 - p.a1)
}

/// Compute the weight vector of `strategy` over `units`.
///
/// Weights always sum to one and lie in `[0, 1]`. Gain- and price-based
/// strategies require every `k_p (1 - a1)` term to be nonzero and of one
/// common sign, otherwise some weight would leave `[0, 1]`; violations are
/// reported naming the offending units.
pub fn compute_weights(strategy: &Strategy, units: &[UnitParams]) -> Result<Vec<f64>> {
    let n = units.len();
    if n == 0 {
        return Err(Error::StrategyInapplicable {
            message: "at least one unit is required".to_string(),
        });
    }
    match strategy {
        Strategy::Skewed => {
            let mut w = vec![0.0; n];
            w[n - 1] = 1.0;
            Ok(w)
        }
        Strategy::Flat => Ok(vec![1.0 / n as f64; n]),
        Strategy::GainProportional => {
            let terms: Vec<f64> = units.iter().map(gain_term).collect();
            weights_from_terms(units, &terms)
        }
        Strategy::PriceProportional { lambda } => {
            if lambda.len() != n {
                return Err(Error::StrategyInapplicable {
                    message: format!(
                        "price strategy needs one lambda per unit ({} given, {n} units)",
                        lambda.len()
                    ),
                });
            }
            if let Some((i, bad)) = lambda
                .iter()
                .enumerate()
                .find(|(_, l)| !(l.is_finite() && **l > 0.0))
            {
                return Err(Error::StrategyInapplicable {
                    message: format!(
                        "lambda for unit {} must be finite and > 0, got {bad}",
                        units[i].unit_id
                    ),
                });
            }
            let terms: Vec<f64> = units
                .iter()
                .zip(lambda)
                .map(|(p, l)| gain_term(p) / l)
                .collect();
            weights_from_terms(units, &terms)
        }
        Strategy::Explicit { weights } => {
            if weights.len() != n {
                return Err(Error::InvalidWeights {
                    message: format!("{} weights for {n} units", weights.len()),
                });
            }
            validate_weights(weights)?;
            Ok(weights.clone())
        }
    }
}

fn weights_from_terms(units: &[UnitParams], terms: &[f64]) -> Result<Vec<f64>> {
    let offenders: Vec<&str> = units
        .iter()
        .zip(terms)
        .filter(|(_, t)| **t == 0.0 || !t.is_finite())
        .map(|(u, _)| u.unit_id.as_str())
        .collect();
    if !offenders.is_empty() {
        return Err(Error::StrategyInapplicable {
            message: format!(
                "k_p (1 - a1) vanishes for unit(s) {}; gain/price weights are undefined",
                offenders.join(", ")
            ),
        });
    }
    let positive = terms[0] > 0.0;
    let mixed: Vec<&str> = units
        .iter()
        .zip(terms)
        .filter(|(_, t)| (**t > 0.0) != positive)
        .map(|(u, _)| u.unit_id.as_str())
        .collect();
    if !mixed.is_empty() {
        return Err(Error::StrategyInapplicable {
            message: format!(
                "k_p (1 - a1) changes sign at unit(s) {}; weights would leave [0, 1]",
                mixed.join(", ")
            ),
        });
    }
    let total: f64 = terms.iter().sum();
    Ok(terms.iter().map(|t| t / total).collect())
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidWeights {
            message: format!("weight {w} is negative or non-finite"),
        });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidWeights {
            message: format!("weights sum to {sum}, expected 1"),
        });
    }
    Ok(())
}

/// The heat deficit `max(sum P_tilde - P_max, 0)`.
pub fn compute_deficit(p_tilde_kw: &[f64], p_max_kw: f64) -> f64 {
    debug_assert!(p_max_kw >= 0.0);
    let total: f64 = p_tilde_kw.iter().sum();
    (total - p_max_kw).max(0.0)
}

/// Distribute the deficit `p_sat_kw` over the requests according to
/// `weights`. The raw rule is `P_i = P_tilde_i - w_i * P_sat`; `mode` decides
/// what happens to units this would drive negative.
pub fn allocate(
    p_tilde_kw: &[f64],
    weights: &[f64],
    p_sat_kw: f64,
    mode: AllocationMode,
) -> Result<AllocationRound> {
    if weights.len() != p_tilde_kw.len() {
        return Err(Error::InvalidWeights {
            message: format!(
                "{} weights for {} requests",
                weights.len(),
                p_tilde_kw.len()
            ),
        });
    }
    validate_weights(weights)?;
    debug_assert!(p_sat_kw >= 0.0);

    let n = p_tilde_kw.len();
    let mut p = vec![0.0; n];
    let mut clamped_units = Vec::new();

    match mode {
        AllocationMode::Clamp => {
            for i in 0..n {
                let raw = p_tilde_kw[i] - weights[i] * p_sat_kw;
                if raw < 0.0 {
                    p[i] = 0.0;
                    clamped_units.push(i);
                } else {
                    p[i] = raw;
                }
            }
        }
        AllocationMode::Redistribute => {
            // Proportional water-fill: units that cannot carry their share
            // shed everything they have; the rest of their share is re-spread
            // over the remaining units with renormalized weights. Each pass
            // removes at least one unit, so this ends in <= n passes.
            let total: f64 = p_tilde_kw.iter().sum();
            let mut remaining = p_sat_kw.min(total);
            let mut active = vec![true; n];
            loop {
                let w_sum: f64 = (0..n).filter(|&i| active[i]).map(|i| weights[i]).sum();
                if w_sum <= 0.0 {
                    // Only zero-weight units left; they keep their requests.
                    for i in (0..n).filter(|&i| active[i]) {
                        p[i] = p_tilde_kw[i];
                    }
                    break;
                }
                let mut removed = false;
                for i in 0..n {
                    if !active[i] {
                        continue;
                    }
                    let share = weights[i] / w_sum * remaining;
                    if p_tilde_kw[i] < share {
                        p[i] = 0.0;
                        active[i] = false;
                        remaining -= p_tilde_kw[i];
                        clamped_units.push(i);
                        removed = true;
                    }
                }
                if !removed {
                    for i in 0..n {
                        if active[i] {
                            p[i] = p_tilde_kw[i] - weights[i] / w_sum * remaining;
                        }
                    }
                    break;
                }
                if active.iter().all(|a| !a) {
                    break;
                }
            }
            clamped_units.sort_unstable();
        }
    }

    // Without the true limit at hand, reconstruct it from the deficit
    // definition; a zero deficit only bounds it from below.
    let p_max_kw = if p_sat_kw > 0.0 {
        p_tilde_kw.iter().sum::<f64>() - p_sat_kw
    } else {
        f64::INFINITY
    };

    Ok(AllocationRound {
        p_tilde_kw: p_tilde_kw.to_vec(),
        p_max_kw,
        p_sat_kw,
        weights: weights.to_vec(),
        p_kw: p,
        clamped_units,
    })
}

/// The full central computation of one round: deficit, then allocation.
///
/// ```
/// use heatfair::coordination::{coordination_round, AllocationMode};
///
/// let round = coordination_round(
///     &[900.0, 800.0, 800.0],
///     2200.0,
///     &[1.0 / 3.0; 3],
///     AllocationMode::Clamp,
/// )
/// .unwrap();
/// assert_eq!(round.p_sat_kw, 300.0);
/// for (p, expected) in round.p_kw.iter().zip([800.0, 700.0, 700.0]) {
///     assert!((p - expected).abs() < 1e-9);
/// }
/// ```
pub fn coordination_round(
    p_tilde_kw: &[f64],
    p_max_kw: f64,
    weights: &[f64],
    mode: AllocationMode,
) -> Result<AllocationRound> {
    let p_sat = compute_deficit(p_tilde_kw, p_max_kw);
    let mut round = allocate(p_tilde_kw, weights, p_sat, mode)?;
    round.p_max_kw = p_max_kw;
    Ok(round)
}

/// Stationary temperature deviation for one unit carrying the share `w` of a
/// stationary deficit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedDeviation {
    /// `-w * P_sat0 / (k_p (1 - a1))` (degC).
    pub delta_t_in_c: f64,
    /// The well-tuned residual of the parameters the formula assumed zero.
    pub residual: f64,
    /// True when the residual is negligible; if false the formula is still
    /// evaluated but the outdoor temperature also shifts the stationary
    /// temperature, so treat the value as approximate.
    pub well_tuned: bool,
}

/// Predict the stationary indoor-temperature deviation caused by holding the
/// deficit share `w * p_sat0_kw`. Exact for well-tuned units; for gain weights
/// the result is the same for every unit, and for price weights it is
/// inverse-proportional to the price factor.
pub fn predicted_deviation(p: &UnitParams, w: f64, p_sat0_kw: f64) -> Result<PredictedDeviation> {
    let term = gain_term(p);
    if term == 0.0 || !term.is_finite() {
        return Err(Error::StrategyInapplicable {
            message: format!("k_p (1 - a1) vanishes for unit {}", p.unit_id),
        });
    }
    let residual = control::well_tuned_residual(p);
    let scale = 1.0 + p.k_p * p.eta * p.r_hs + p.k_p * p.eta * p.r_ext;
    Ok(PredictedDeviation {
        delta_t_in_c: -w * p_sat0_kw / term,
        residual,
        well_tuned: residual.abs() <= 1e-6 * scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::tune_unit;
    use crate::thermal::steady_state;

    fn table_units() -> Vec<UnitParams> {
        crate::scenario::table1_units()
    }

    fn unit(id: &str, k_p: f64, a1: f64) -> UnitParams {
        UnitParams {
            unit_id: id.into(),
            r_ext: 20.0,
            r_hs: 5.0,
            c_in: 3600.0,
            c_hs: 360.0,
            eta: 0.9,
            k_p,
            a0: 26.0,
            a1,
        }
    }

    #[test]
    fn flat_weights() {
        let w = compute_weights(&Strategy::Flat, &table_units()).unwrap();
        assert_eq!(w, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn skewed_weights() {
        let w = compute_weights(&Strategy::Skewed, &table_units()).unwrap();
        assert_eq!(w, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn gain_weights_for_table_units() {
        let w = compute_weights(&Strategy::GainProportional, &table_units()).unwrap();
        let expected = [54.0 / 303.0, 73.0 / 303.0, 176.0 / 303.0];
        for (wi, ei) in w.iter().zip(expected) {
            assert!((wi - ei).abs() < 1e-12, "{wi} vs {ei}");
        }
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn price_weights_for_table_units() {
        let strategy = Strategy::PriceProportional {
            lambda: vec![2.0, 2.0, 1.0],
        };
        let w = compute_weights(&strategy, &table_units()).unwrap();
        let expected = [27.0 / 239.5, 36.5 / 239.5, 176.0 / 239.5];
        for (wi, ei) in w.iter().zip(expected) {
            assert!((wi - ei).abs() < 1e-12, "{wi} vs {ei}");
        }
    }

    #[test]
    fn price_reduces_to_gain_for_equal_lambda() {
        let units = table_units();
        let gain = compute_weights(&Strategy::GainProportional, &units).unwrap();
        let price = compute_weights(
            &Strategy::PriceProportional {
                lambda: vec![3.7; 3],
            },
            &units,
        )
        .unwrap();
        for (g, p) in gain.iter().zip(&price) {
            assert!((g - p).abs() < 1e-15);
        }
    }

    #[test]
    fn price_weights_scale_invariant() {
        let units = table_units();
        let a = compute_weights(
            &Strategy::PriceProportional {
                lambda: vec![2.0, 2.0, 1.0],
            },
            &units,
        )
        .unwrap();
        let b = compute_weights(
            &Strategy::PriceProportional {
                lambda: vec![1000.0, 1000.0, 500.0],
            },
            &units,
        )
        .unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gain_reduces_to_flat_for_identical_units() {
        let units = vec![
            unit("a", 0.8, -0.3),
            unit("b", 0.8, -0.3),
            unit("c", 0.8, -0.3),
        ];
        let w = compute_weights(&Strategy::GainProportional, &units).unwrap();
        for wi in &w {
            assert!((wi - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gain_rejects_mixed_signs_naming_units() {
        let units = vec![unit("a", 0.8, -0.3), unit("bad", 0.8, 1.5)];
        let err = compute_weights(&Strategy::GainProportional, &units).unwrap_err();
        assert!(err.to_string().contains("bad"), "{err}");

        let units = vec![unit("a", 0.8, -0.3), unit("degenerate", 0.8, 1.0)];
        let err = compute_weights(&Strategy::GainProportional, &units).unwrap_err();
        assert!(err.to_string().contains("degenerate"), "{err}");
    }

    #[test]
    fn price_rejects_bad_lambda() {
        let units = table_units();
        for lambda in [vec![2.0, 2.0], vec![2.0, -1.0, 1.0], vec![2.0, 0.0, 1.0]] {
            assert!(compute_weights(&Strategy::PriceProportional { lambda }, &units).is_err());
        }
    }

    #[test]
    fn explicit_weights_validated() {
        let units = table_units();
        let ok = Strategy::Explicit {
            weights: vec![0.25, 0.25, 0.5],
        };
        assert!(compute_weights(&ok, &units).is_ok());
        let bad_sum = Strategy::Explicit {
            weights: vec![0.3, 0.3, 0.3],
        };
        assert!(compute_weights(&bad_sum, &units).is_err());
        let negative = Strategy::Explicit {
            weights: vec![-0.5, 0.5, 1.0],
        };
        assert!(compute_weights(&negative, &units).is_err());
    }

    #[test]
    fn deficit_examples() {
        assert_eq!(compute_deficit(&[800.0, 700.0, 600.0], 2200.0), 0.0);
        assert!((compute_deficit(&[900.0, 800.0, 800.0], 2200.0) - 300.0).abs() < 1e-12);
        assert_eq!(compute_deficit(&[0.0, 0.0, 0.0], 0.0), 0.0);
    }

    #[test]
    fn allocate_example() {
        let w = [1.0 / 3.0; 3];
        let round = allocate(&[900.0, 800.0, 800.0], &w, 300.0, AllocationMode::Clamp).unwrap();
        let expected = [800.0, 700.0, 700.0];
        for (p, e) in round.p_kw.iter().zip(expected) {
            assert!((p - e).abs() < 1e-9);
        }
        assert!((round.sum_p() - 2200.0).abs() < 1e-9);
        assert!(round.clamped_units.is_empty());
    }

    #[test]
    fn zero_deficit_is_identity() {
        let p_tilde = [123.456, 0.0, 78.9];
        let w = [0.2, 0.3, 0.5];
        for mode in [AllocationMode::Clamp, AllocationMode::Redistribute] {
            let round = allocate(&p_tilde, &w, 0.0, mode).unwrap();
            assert_eq!(round.p_kw, p_tilde.to_vec());
        }
    }

    /// Independent oracle for the redistribution rule: solve for the water
    /// level `theta` with shed_i = min(p_tilde_i, w_i * theta) summing to the
    /// deficit, by bisection.
    fn waterfill_oracle(p_tilde: &[f64], weights: &[f64], p_sat: f64) -> Vec<f64> {
        let total: f64 = p_tilde.iter().sum();
        let target = p_sat.min(total);
        let shed_at = |theta: f64| -> f64 {
            p_tilde
                .iter()
                .zip(weights)
                .map(|(pt, w)| pt.min(w * theta))
                .sum()
        };
        let mut lo = 0.0;
        let mut hi = 1.0;
        while shed_at(hi) < target && hi < 1e30 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if shed_at(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        p_tilde
            .iter()
            .zip(weights)
            .map(|(pt, w)| pt - pt.min(w * theta))
            .collect()
    }

    #[test]
    fn redistribute_example_matches_waterfill_oracle() {
        let p_tilde = [10.0, 800.0, 800.0];
        let w = [1.0 / 3.0; 3];
        let round = allocate(&p_tilde, &w, 300.0, AllocationMode::Redistribute).unwrap();
        // Unit 1 sheds its whole 10 kW request; the 90 kW it cannot carry is
        // re-spread equally over the other two, 145 kW each in total.
        let expected = [0.0, 655.0, 655.0];
        for (p, e) in round.p_kw.iter().zip(expected) {
            assert!((p - e).abs() < 1e-9, "{:?}", round.p_kw);
        }
        assert_eq!(round.clamped_units, vec![0]);
        let oracle = waterfill_oracle(&p_tilde, &w, 300.0);
        for (p, o) in round.p_kw.iter().zip(&oracle) {
            assert!((p - o).abs() < 1e-7);
        }
        // Total delivery respects the implied limit 1610 - 300.
        assert!(round.sum_p() <= 1310.0 + 1e-9);
    }

    #[test]
    fn redistribute_matches_oracle_randomized() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..500 {
            let n = rng.gen_range(1..=6);
            let p_tilde: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..100.0)).collect();
            let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let sum: f64 = w.iter().sum();
            if sum == 0.0 {
                continue;
            }
            w.iter_mut().for_each(|x| *x /= sum);
            // Force the sum onto 1 within 1e-12 for the validator.
            let correction: f64 = 1.0 - w.iter().sum::<f64>();
            w[0] += correction;
            let total: f64 = p_tilde.iter().sum();
            let p_sat = rng.gen_range(0.0..1.2 * total.max(1.0));
            let round = allocate(&p_tilde, &w, p_sat, AllocationMode::Redistribute).unwrap();
            let oracle = waterfill_oracle(&p_tilde, &w, p_sat);
            for (p, o) in round.p_kw.iter().zip(&oracle) {
                assert!((p - o).abs() < 1e-6, "{:?} vs {:?}", round.p_kw, oracle);
            }
        }
    }

    #[test]
    fn round_composition() {
        // Below saturation the round is transparent.
        let w = [1.0 / 3.0; 3];
        let round =
            coordination_round(&[800.0, 700.0, 600.0], 2200.0, &w, AllocationMode::Clamp).unwrap();
        assert_eq!(round.p_sat_kw, 0.0);
        assert_eq!(round.p_kw, round.p_tilde_kw);
        assert_eq!(round.p_max_kw, 2200.0);

        // Saturated, clamp-free: the delivered total hits the limit exactly.
        let round =
            coordination_round(&[900.0, 800.0, 800.0], 2200.0, &w, AllocationMode::Clamp).unwrap();
        assert!((round.sum_p() - 2200.0).abs() < 1e-9);

        // Single unit takes min(request, limit).
        let round = coordination_round(&[500.0], 300.0, &[1.0], AllocationMode::Clamp).unwrap();
        assert!((round.p_kw[0] - 300.0).abs() < 1e-12);
        let round = coordination_round(&[200.0], 300.0, &[1.0], AllocationMode::Clamp).unwrap();
        assert!((round.p_kw[0] - 200.0).abs() < 1e-12);
    }

    #[test]
    fn weight_sum_violation_rejected() {
        let err = allocate(&[1.0, 2.0], &[0.6, 0.5], 1.0, AllocationMode::Clamp).unwrap_err();
        assert!(matches!(err, Error::InvalidWeights { .. }));
    }

    #[test]
    fn predicted_deviation_examples() {
        let p = unit("u", 100.0, -1.0); // k_p (1 - a1) = 200
        let d = predicted_deviation(&p, 0.0, 500.0).unwrap();
        assert_eq!(d.delta_t_in_c, 0.0);
        let d = predicted_deviation(&p, 0.5, 400.0).unwrap();
        assert!((d.delta_t_in_c - (-1.0)).abs() < 1e-12);
        assert!(!d.well_tuned);

        let degenerate = unit("u", 100.0, 1.0);
        assert!(predicted_deviation(&degenerate, 0.5, 400.0).is_err());
    }

    #[test]
    fn predicted_deviation_matches_steady_state_for_gain_weights() {
        // Three well-tuned units, gain weights: all deviations identical and
        // equal to the steady-state shift.
        let units: Vec<UnitParams> = [
            unit("a", 0.8, 0.0),
            unit("b", 1.2, 0.0),
            unit("c", 0.5, 0.0),
        ]
        .iter()
        .map(|p| tune_unit(p, 20.0).unwrap())
        .collect();
        let w = compute_weights(&Strategy::GainProportional, &units).unwrap();
        let p_sat = 2.0;
        let t_ext = -10.0;
        let mut first = None;
        for (p, wi) in units.iter().zip(&w) {
            let pred = predicted_deviation(p, *wi, p_sat).unwrap();
            assert!(pred.well_tuned);
            let with = steady_state(p, t_ext, *wi, p_sat).unwrap().t_in_c;
            let without = steady_state(p, t_ext, 0.0, 0.0).unwrap().t_in_c;
            assert!(
                (pred.delta_t_in_c - (with - without)).abs() < 1e-6,
                "{} vs {}",
                pred.delta_t_in_c,
                with - without
            );
            if let Some(f) = first {
                let diff: f64 = pred.delta_t_in_c - f;
                assert!(diff.abs() < 1e-9);
            } else {
                first = Some(pred.delta_t_in_c);
            }
        }
    }
}
