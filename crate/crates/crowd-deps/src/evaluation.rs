//! Distribution comparison: the closed-form KL divergence between beta
//! distributions, an independent quadrature oracle used to validate it, and
//! budget-efficiency curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BetaParams;
use crate::special::{digamma, ln_beta};

/// A computed divergence, tagged with its direction so the reference and
/// the candidate cannot be swapped silently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlResult {
    pub nats: f64,
    pub reference: BetaParams,
    pub candidate: BetaParams,
}

/// KL divergence from reference `x` to candidate `y`, both beta, in nats:
///
/// `ln(B(a', b') / B(a, b)) + (a - a') psi(a) + (b - b') psi(b)
///  + (a' - a + b' - b) psi(a + b)`
///
/// with `x = (a, b)` and `y = (a', b')`. Identical parameters give exactly
/// zero by algebraic cancellation.
pub fn kl_beta_beta(x: BetaParams, y: BetaParams) -> KlResult {
    let (a, b) = (x.alpha(), x.beta());
    let (ap, bp) = (y.alpha(), y.beta());
    let nats = ln_beta(ap, bp) - ln_beta(a, b)
        + (a - ap) * digamma(a)
        + (b - bp) * digamma(b)
        + (ap - a + bp - b) * digamma(a + b);
    KlResult { nats, reference: x, candidate: y }
}

/// Quadrature estimate of the same divergence, used only as a test oracle.
///
/// Integrates `f_x ln(f_x / f_y)` over (0,1) with a tanh-sinh (double
/// exponential) substitution `x = sigmoid(pi sinh t)`, which clusters nodes
/// at the endpoints and tames the beta density singularities there.
/// `grid_size` is the number of quadrature intervals. Returns +infinity if
/// the sum overflows (the integral is finite for all valid parameters).
pub fn kl_numeric_oracle(x: BetaParams, y: BetaParams, grid_size: usize) -> Result<f64> {
    if grid_size < 1000 {
        return Err(Error::InvalidParameter(format!(
            "oracle quadrature needs at least 1000 intervals, got {grid_size}"
        )));
    }
    let (a, b) = (x.alpha(), x.beta());
    let (ap, bp) = (y.alpha(), y.beta());
    let ln_b_x = ln_beta(a, b);
    let ln_b_y = ln_beta(ap, bp);

    const T_MAX: f64 = 5.0;
    let h = 2.0 * T_MAX / grid_size as f64;
    let mut sum = 0.0;
    for k in 0..=grid_size {
        let t = -T_MAX + h * k as f64;
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        // x = sigmoid(2u); stable logs of x and 1-x
        let ln_x = if u >= 0.0 {
            -(-2.0 * u).exp().ln_1p()
        } else {
            2.0 * u - (2.0 * u).exp().ln_1p()
        };
        let ln_1mx = if u <= 0.0 {
            -(2.0 * u).exp().ln_1p()
        } else {
            -2.0 * u - (-2.0 * u).exp().ln_1p()
        };
        let sech_u = 1.0 / u.cosh();
        let dxdt = std::f64::consts::FRAC_PI_4 * t.cosh() * sech_u * sech_u;
        let ln_fx = (a - 1.0) * ln_x + (b - 1.0) * ln_1mx - ln_b_x;
        let ln_ratio = (a - ap) * ln_x + (b - bp) * ln_1mx - ln_b_x + ln_b_y;
        let weight = if k == 0 || k == grid_size { 0.5 * h } else { h };
        sum += weight * ln_fx.exp() * ln_ratio * dxdt;
    }
    if sum.is_nan() {
        return Ok(f64::INFINITY);
    }
    Ok(sum)
}

/// Inference method identifiers used in curve and grid emissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Deps,
    WaldSmoothed,
    WaldTransformed,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] =
        [MethodKind::Deps, MethodKind::WaldSmoothed, MethodKind::WaldTransformed];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Deps => "deps",
            MethodKind::WaldSmoothed => "wald-smoothed",
            MethodKind::WaldTransformed => "wald-transformed",
        }
    }
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub budget_used: u64,
    pub nats: f64,
}

/// Divergence against the reference as a function of spent budget, for one
/// method. Budgets strictly increase along the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyCurve {
    pub method: MethodKind,
    pub points: Vec<CurvePoint>,
}

impl EfficiencyCurve {
    pub fn new(method: MethodKind, points: Vec<CurvePoint>) -> Result<EfficiencyCurve> {
        if points.windows(2).any(|w| w[0].budget_used >= w[1].budget_used) {
            return Err(Error::InvalidParameter(
                "efficiency-curve budgets must strictly increase".into(),
            ));
        }
        Ok(EfficiencyCurve { method, points })
    }
}

/// Smallest spent budget at which the curve reaches `threshold` nats or
/// less; `None` if it never does.
pub fn responses_to_threshold(curve: &EfficiencyCurve, threshold: f64) -> Option<u64> {
    curve.points.iter().find(|p| p.nats <= threshold).map(|p| p.budget_used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bp(a: f64, b: f64) -> BetaParams {
        BetaParams::new(a, b).unwrap()
    }

    #[test]
    fn identical_distributions_diverge_by_exactly_zero() {
        for &(a, b) in &[(3.7, 1.2), (1.0, 1.0), (0.5, 17.0)] {
            assert_eq!(kl_beta_beta(bp(a, b), bp(a, b)).nats, 0.0);
        }
    }

    #[test]
    fn uniform_versus_symmetric_matches_the_closed_form() {
        // KL(Beta(1,1), Beta(2,2)) = 2 - ln 6
        let expected = 2.0 - 6.0_f64.ln();
        assert_relative_eq!(
            kl_beta_beta(bp(1.0, 1.0), bp(2.0, 2.0)).nats,
            expected,
            max_relative = 1e-12
        );
        assert_relative_eq!(expected, 0.208_240_530_771_945_04, max_relative = 1e-12);
    }

    #[test]
    fn divergence_is_asymmetric() {
        let fwd = kl_beta_beta(bp(1.0, 1.0), bp(2.0, 2.0)).nats;
        let rev = kl_beta_beta(bp(2.0, 2.0), bp(1.0, 1.0)).nats;
        assert_ne!(fwd, rev);
    }

    #[test]
    fn result_carries_its_direction() {
        let r = kl_beta_beta(bp(1.0, 2.0), bp(3.0, 4.0));
        assert_eq!(r.reference, bp(1.0, 2.0));
        assert_eq!(r.candidate, bp(3.0, 4.0));
    }

    #[test]
    fn oracle_agrees_with_the_closed_form_at_spot_checks() {
        for &(a, b, ap, bpp) in &[
            (1.0, 1.0, 2.0, 2.0),
            (0.5, 0.5, 5.0, 1.0),
            (2.0, 5.0, 1.0, 1.0),
            (5.0, 5.0, 0.5, 2.0),
        ] {
            let closed = kl_beta_beta(bp(a, b), bp(ap, bpp)).nats;
            let numeric = kl_numeric_oracle(bp(a, b), bp(ap, bpp), 2000).unwrap();
            assert!(
                (closed - numeric).abs() <= 1e-6,
                "closed {closed} vs oracle {numeric} for ({a},{b}) vs ({ap},{bpp})"
            );
        }
    }

    #[test]
    fn oracle_is_near_zero_on_identical_distributions() {
        let v = kl_numeric_oracle(bp(2.5, 0.8), bp(2.5, 0.8), 2000).unwrap();
        assert!(v.abs() <= 1e-10, "oracle on identical params gave {v}");
    }

    #[test]
    fn oracle_rejects_coarse_grids() {
        assert!(matches!(
            kl_numeric_oracle(bp(1.0, 1.0), bp(2.0, 2.0), 999),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn curves_require_strictly_increasing_budgets() {
        let ok = EfficiencyCurve::new(
            MethodKind::Deps,
            vec![
                CurvePoint { budget_used: 100, nats: 0.5 },
                CurvePoint { budget_used: 200, nats: 0.25 },
            ],
        );
        assert!(ok.is_ok());
        let bad = EfficiencyCurve::new(
            MethodKind::Deps,
            vec![
                CurvePoint { budget_used: 100, nats: 0.5 },
                CurvePoint { budget_used: 100, nats: 0.25 },
            ],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn threshold_crossing_returns_the_first_qualifying_budget() {
        let curve = EfficiencyCurve::new(
            MethodKind::Deps,
            vec![
                CurvePoint { budget_used: 100, nats: 0.5 },
                CurvePoint { budget_used: 200, nats: 0.25 },
            ],
        )
        .unwrap();
        assert_eq!(responses_to_threshold(&curve, 0.3), Some(200));
        assert_eq!(responses_to_threshold(&curve, 0.1), None);
        assert_eq!(responses_to_threshold(&curve, 10.0), Some(100));
    }

    #[test]
    fn threshold_crossing_is_monotone_in_the_threshold() {
        let curve = EfficiencyCurve::new(
            MethodKind::WaldSmoothed,
            vec![
                CurvePoint { budget_used: 50, nats: 1.2 },
                CurvePoint { budget_used: 100, nats: 0.7 },
                CurvePoint { budget_used: 150, nats: 0.45 },
                CurvePoint { budget_used: 200, nats: 0.2 },
            ],
        )
        .unwrap();
        let mut last = Some(0);
        for threshold in [2.0, 1.0, 0.5, 0.3, 0.1] {
            let hit = responses_to_threshold(&curve, threshold);
            if let (Some(prev), Some(cur)) = (last, hit) {
                assert!(cur >= prev, "threshold {threshold} gave {cur} < {prev}");
            }
            last = hit;
        }
    }

    #[test]
    fn method_names_match_the_emission_format() {
        assert_eq!(MethodKind::Deps.name(), "deps");
        assert_eq!(MethodKind::WaldSmoothed.name(), "wald-smoothed");
        assert_eq!(MethodKind::WaldTransformed.name(), "wald-transformed");
    }
}
