//! Per-layer penalty factors derived from moment conditions on the prior,
//! assembled into whole-network plans with global and minibatch scaling.
//!
//! The factor table, with `P` the fan-in of a neuron and `n` the number of
//! neurons in the layer:
//!
//! | penalty              | principled factor  | usual factor |
//! |----------------------|--------------------|--------------|
//! | L2                   | `P / 2`            | `1`          |
//! | L1                   | `sqrt(2 P)`        | `1`          |
//! | group-Lasso          | `sqrt(P (P + 1))`  | `sqrt(P)`    |
//! | reversed group-Lasso | `sqrt(P (n + 1))`  | `sqrt(n)`    |
//!
//! The principled column makes the matching prior satisfy the Glorot-style
//! moment conditions: per-weight variance `1/P` (condition on individual
//! weights) or unit expected squared norm per group (condition on neurons).

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::PenaltyKind;
use crate::prior::{PriorDensity, PriorForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    /// Layer index.
    pub l: usize,
    /// Number of neurons (output features; output channels for convolutions).
    pub n_l: usize,
    /// Incoming weights per neuron (kernel area times input channels for
    /// convolutions).
    #[serde(rename = "P_l")]
    pub p_l: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub layers: Vec<LayerShape>,
    /// Training-set size.
    pub n: usize,
    /// Minibatch size.
    #[serde(rename = "B")]
    pub b: usize,
}

impl ArchitectureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidParameter("empty layer list".into()));
        }
        if self.n == 0 || self.b == 0 || self.b > self.n {
            return Err(Error::InvalidParameter(format!(
                "need 0 < minibatch {} <= dataset size {}",
                self.b, self.n
            )));
        }
        for layer in &self.layers {
            if layer.n_l == 0 || layer.p_l == 0 {
                return Err(Error::InvalidParameter(format!(
                    "layer {} has degenerate shape ({} x {})",
                    layer.l, layer.n_l, layer.p_l
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Bayesian,
    Usual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPlan {
    pub per_layer: BTreeMap<usize, f64>,
    pub global_lambda: f64,
    /// Minibatch scaling `B / n` applied to each per-batch penalty term.
    pub per_batch_scale: f64,
    pub scheme: Scheme,
    pub penalty_kind: PenaltyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixing_gamma: Option<f64>,
    /// L1 component factors of the sparse group-Lasso mixture.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_layer_l1: Option<BTreeMap<usize, f64>>,
}

/// Principled per-layer factor for the given penalty and layer shape.
pub fn lambda_bayesian(kind: PenaltyKind, p_l: usize, n_l: usize) -> Result<f64> {
    if p_l == 0 {
        return Err(Error::InvalidParameter("fan-in must be >= 1".into()));
    }
    let p = p_l as f64;
    match kind {
        PenaltyKind::L2 => Ok(p / 2.0),
        PenaltyKind::L1 => Ok((2.0 * p).sqrt()),
        PenaltyKind::GroupLasso => Ok((p * (p + 1.0)).sqrt()),
        PenaltyKind::ReversedGroupLasso => {
            if n_l == 0 {
                return Err(Error::InvalidParameter(
                    "reversed group-Lasso needs the neuron count".into(),
                ));
            }
            Ok((p * (n_l as f64 + 1.0)).sqrt())
        }
        other => Err(Error::UnsupportedPenalty(format!(
            "no per-layer factor for {other:?}"
        ))),
    }
}

/// The literature's default per-layer factor.
pub fn lambda_usual(kind: PenaltyKind, p_l: usize, n_l: usize) -> Result<f64> {
    if p_l == 0 {
        return Err(Error::InvalidParameter("fan-in must be >= 1".into()));
    }
    match kind {
        PenaltyKind::L2 | PenaltyKind::L1 => Ok(1.0),
        PenaltyKind::GroupLasso => Ok((p_l as f64).sqrt()),
        PenaltyKind::ReversedGroupLasso => {
            if n_l == 0 {
                return Err(Error::InvalidParameter(
                    "reversed group-Lasso needs the neuron count".into(),
                ));
            }
            Ok((n_l as f64).sqrt())
        }
        other => Err(Error::UnsupportedPenalty(format!(
            "no per-layer factor for {other:?}"
        ))),
    }
}

/// Builds a whole-network plan. The principled scheme uses the theoretical
/// global factor `1/n`; the usual scheme needs a caller-supplied sweep value.
/// `mixing_gamma` in `[0, 1]` turns a group-Lasso plan into the sparse
/// mixture `(1 - gamma) * group + gamma * L1`, with L1 factors alongside.
pub fn plan(
    arch: &ArchitectureSpec,
    kind: PenaltyKind,
    scheme: Scheme,
    global_lambda: Option<f64>,
    mixing_gamma: Option<f64>,
) -> Result<LambdaPlan> {
    arch.validate()?;
    if let Some(g) = mixing_gamma {
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::InvalidParameter(format!(
                "mixing weight must lie in [0, 1], got {g}"
            )));
        }
        if kind != PenaltyKind::GroupLasso {
            return Err(Error::InvalidParameter(
                "the sparse mixture only applies to group-Lasso plans".into(),
            ));
        }
    }
    let per_layer: BTreeMap<usize, f64> = arch
        .layers
        .iter()
        .map(|layer| {
            let factor = match scheme {
                Scheme::Bayesian => lambda_bayesian(kind, layer.p_l, layer.n_l),
                Scheme::Usual => lambda_usual(kind, layer.p_l, layer.n_l),
            }?;
            Ok((layer.l, factor))
        })
        .collect::<Result<_>>()?;
    let per_layer_l1 = match mixing_gamma {
        Some(_) => Some(
            arch.layers
                .iter()
                .map(|layer| {
                    let factor = match scheme {
                        Scheme::Bayesian => lambda_bayesian(PenaltyKind::L1, layer.p_l, layer.n_l),
                        Scheme::Usual => lambda_usual(PenaltyKind::L1, layer.p_l, layer.n_l),
                    }?;
                    Ok((layer.l, factor))
                })
                .collect::<Result<_>>()?,
        ),
        None => None,
    };
    let global_lambda = match scheme {
        Scheme::Bayesian => global_lambda.unwrap_or(1.0 / arch.n as f64),
        Scheme::Usual => global_lambda.ok_or_else(|| {
            Error::Configuration(
                "the usual scheme has no canonical global factor; pass a sweep value".into(),
            )
        })?,
    };
    Ok(LambdaPlan {
        per_layer,
        global_lambda,
        per_batch_scale: arch.b as f64 / arch.n as f64,
        scheme,
        penalty_kind: kind,
        mixing_gamma,
        per_layer_l1,
    })
}

/// Default global-factor sweep for the principled scheme:
/// `(1/n) * 10^{-2.5 .. 0.5}` in half-decades.
pub fn default_bayesian_sweep(n: usize) -> Vec<f64> {
    (0..7)
        .map(|i| 10f64.powf(-2.5 + 0.5 * i as f64) / n as f64)
        .collect()
}

/// Default global-factor sweep for the usual scheme:
/// `10^{-6 .. -2.5}` in half-decades.
pub fn default_usual_sweep() -> Vec<f64> {
    (0..8).map(|i| 10f64.powf(-6.0 + 0.5 * i as f64)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionMode {
    /// Per-weight moments: `E[w] = 0`, `E[w^2] = 1/P_l`.
    Prior,
    /// Per-group moments: `E[w] = 0`, `E[||w||^2]` = group size / `P_l`
    /// (which is 1 when the group is a neuron's incoming weight vector).
    PriorPrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorConditionTarget {
    pub mode: ConditionMode,
    #[serde(rename = "P_l")]
    pub p_l: usize,
    pub n_l: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConditionReport {
    pub mean_err: f64,
    pub moment_err: f64,
    pub pass: bool,
    pub target_moment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_std_err: Option<f64>,
}

/// Checks the moment conditions for a prior. Closed-form moments are used
/// where available; the radial-exponential family is additionally
/// cross-checked by Monte-Carlo (pass requires the estimate within three
/// standard errors of the closed form).
pub fn check_prior_condition(
    prior: &PriorDensity,
    target: &PriorConditionTarget,
    mc_samples: usize,
    seed: u64,
) -> Result<PriorConditionReport> {
    if target.p_l == 0 {
        return Err(Error::InvalidParameter("fan-in must be >= 1".into()));
    }
    let p = target.p_l as f64;
    let target_moment = match target.mode {
        ConditionMode::Prior => 1.0 / p,
        ConditionMode::PriorPrime => prior.dim() as f64 / p,
    };
    let closed = match target.mode {
        ConditionMode::Prior => prior.coordinate_second_moment(),
        ConditionMode::PriorPrime => prior.squared_norm_moment(),
    }
    .ok_or_else(|| {
        Error::UnsupportedPenalty("no closed-form moment for this prior form".into())
    })?;
    // All supported families are symmetric about the origin.
    let mean_err = 0.0;
    let moment_err = (closed - target_moment).abs();
    let mut pass = moment_err <= 1e-12 * target_moment.max(1.0);

    let (mut mc_estimate, mut mc_std_err) = (None, None);
    if matches!(prior.form, PriorForm::ExpNorm { .. }) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..mc_samples {
            let s = prior.sample(&mut rng)?;
            let q: f64 = s.iter().map(|x| x * x).sum();
            sum += q;
            sum_sq += q * q;
        }
        let m = sum / mc_samples as f64;
        let var = (sum_sq / mc_samples as f64 - m * m).max(0.0);
        let se = (var / mc_samples as f64).sqrt();
        pass = pass && (m - closed).abs() <= 3.0 * se;
        mc_estimate = Some(m);
        mc_std_err = Some(se);
    }
    Ok(PriorConditionReport {
        mean_err,
        moment_err,
        pass,
        target_moment,
        mc_estimate,
        mc_std_err,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorFamilyKind {
    Gaussian,
    Laplace,
    ExpNorm,
}

/// Solves for the rate that makes the family meet its moment condition, by
/// bisection on the monotone moment function (relative tolerance 1e-12).
pub fn solve_lambda_from_condition(
    family: PriorFamilyKind,
    target: &PriorConditionTarget,
) -> Result<f64> {
    if target.p_l == 0 {
        return Err(Error::InvalidParameter("fan-in must be >= 1".into()));
    }
    let p = target.p_l as f64;
    let group_dim = match family {
        // Scalar families group per coordinate; the radial family spans the
        // full incoming-weight vector (or the outgoing column, sized by the
        // target's neuron count, for the reversed variant).
        PriorFamilyKind::Gaussian | PriorFamilyKind::Laplace => 1,
        PriorFamilyKind::ExpNorm => match target.mode {
            ConditionMode::Prior => 1,
            ConditionMode::PriorPrime => target.p_l,
        },
    };
    let target_moment = match target.mode {
        ConditionMode::Prior => 1.0 / p,
        ConditionMode::PriorPrime => group_dim as f64 / p,
    };
    let moment = |lambda: f64| -> Result<f64> {
        let prior = match family {
            PriorFamilyKind::Gaussian => PriorDensity::gaussian(0.0, 1.0 / (2.0 * lambda))?,
            PriorFamilyKind::Laplace => PriorDensity::laplace(lambda)?,
            PriorFamilyKind::ExpNorm => PriorDensity::exp_norm(lambda, group_dim)?,
        };
        let m = match target.mode {
            ConditionMode::Prior => match &prior.form {
                // Per-coordinate moment of the radial family: E||theta||^2 / dim.
                PriorForm::ExpNorm { .. } => {
                    prior.squared_norm_moment().unwrap() / group_dim as f64
                }
                _ => prior.coordinate_second_moment().unwrap(),
            },
            ConditionMode::PriorPrime => prior.squared_norm_moment().unwrap(),
        };
        Ok(m)
    };
    // Moments decrease in the rate; bracket and bisect.
    let (mut lo, mut hi) = (1e-8f64, 1e8f64);
    if (moment(lo)? - target_moment) * (moment(hi)? - target_moment) > 0.0 {
        return Err(Error::NumericalFailure(
            "moment target is outside the bisection bracket".into(),
        ));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if moment(mid)? > target_moment {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) / hi < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// CSV export of the per-layer factors (columns: l, n_l, P_l, lambda_l).
pub fn plan_to_csv(arch: &ArchitectureSpec, plan: &LambdaPlan) -> String {
    let mut out = String::from("l,n_l,P_l,lambda_l\n");
    for layer in &arch.layers {
        let factor = plan.per_layer.get(&layer.l).copied().unwrap_or(f64::NAN);
        out.push_str(&format!("{},{},{},{}\n", layer.l, layer.n_l, layer.p_l, factor));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn factor_table_examples() {
        assert_abs_diff_eq!(lambda_bayesian(PenaltyKind::L2, 512, 1).unwrap(), 256.0);
        assert_abs_diff_eq!(
            lambda_bayesian(PenaltyKind::GroupLasso, 3, 1).unwrap(),
            12f64.sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            lambda_bayesian(PenaltyKind::ReversedGroupLasso, 1000, 200).unwrap(),
            (1000.0f64 * 201.0).sqrt(),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(lambda_usual(PenaltyKind::L2, 7, 3).unwrap(), 1.0);
        assert_abs_diff_eq!(lambda_usual(PenaltyKind::GroupLasso, 25, 1).unwrap(), 5.0);
        assert_abs_diff_eq!(
            lambda_usual(PenaltyKind::ReversedGroupLasso, 5, 100).unwrap(),
            10.0
        );
    }

    fn two_layer_arch() -> ArchitectureSpec {
        ArchitectureSpec {
            layers: vec![
                LayerShape { l: 1, n_l: 100, p_l: 784 },
                LayerShape { l: 2, n_l: 10, p_l: 100 },
            ],
            n: 42000,
            b: 100,
        }
    }

    #[test]
    fn bayesian_plan_composes_factors_and_global_scale() {
        let p = plan(&two_layer_arch(), PenaltyKind::L2, Scheme::Bayesian, None, None).unwrap();
        assert_abs_diff_eq!(p.per_layer[&1], 392.0);
        assert_abs_diff_eq!(p.per_layer[&2], 50.0);
        assert_abs_diff_eq!(p.global_lambda, 1.0 / 42000.0);
        assert_abs_diff_eq!(p.per_batch_scale, 100.0 / 42000.0);
    }

    #[test]
    fn usual_plan_requires_and_uses_sweep_value() {
        assert!(plan(&two_layer_arch(), PenaltyKind::L2, Scheme::Usual, None, None).is_err());
        let p = plan(
            &two_layer_arch(),
            PenaltyKind::L2,
            Scheme::Usual,
            Some(1e-4),
            None,
        )
        .unwrap();
        assert_abs_diff_eq!(p.per_layer[&1], 1.0);
        assert_abs_diff_eq!(p.per_layer[&2], 1.0);
        assert_abs_diff_eq!(p.global_lambda, 1e-4);
    }

    #[test]
    fn zero_mixing_matches_pure_group_plan() {
        let arch = two_layer_arch();
        let pure = plan(&arch, PenaltyKind::GroupLasso, Scheme::Bayesian, None, None).unwrap();
        let mixed =
            plan(&arch, PenaltyKind::GroupLasso, Scheme::Bayesian, None, Some(0.0)).unwrap();
        assert_eq!(pure.per_layer, mixed.per_layer);
        assert_eq!(pure.global_lambda, mixed.global_lambda);
        assert_eq!(mixed.mixing_gamma, Some(0.0));
        assert!(mixed.per_layer_l1.is_some());
    }

    #[test]
    fn condition_closure_closed_forms() {
        // L2 at the principled factor: Gaussian(0, 1/P) meets the per-weight target.
        let p_l = 512;
        let lam = lambda_bayesian(PenaltyKind::L2, p_l, 1).unwrap();
        let prior = PriorDensity::gaussian(0.0, 1.0 / (2.0 * lam)).unwrap();
        let target = PriorConditionTarget {
            mode: ConditionMode::Prior,
            p_l,
            n_l: 1,
        };
        let rep = check_prior_condition(&prior, &target, 1000, 0).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.moment_err, 0.0);

        // L1 at sqrt(2 P): Laplace second moment 2 / lambda^2 = 1/P.
        let p_l = 8;
        let lam = lambda_bayesian(PenaltyKind::L1, p_l, 1).unwrap();
        let prior = PriorDensity::laplace(lam).unwrap();
        let target = PriorConditionTarget {
            mode: ConditionMode::Prior,
            p_l,
            n_l: 1,
        };
        let rep = check_prior_condition(&prior, &target, 1000, 0).unwrap();
        assert!(rep.pass);
        assert_abs_diff_eq!(rep.target_moment, 0.125);
    }

    #[test]
    fn condition_closure_exp_norm_monte_carlo() {
        let p_l = 4;
        let lam = lambda_bayesian(PenaltyKind::GroupLasso, p_l, 1).unwrap();
        let prior = PriorDensity::exp_norm(lam, p_l).unwrap();
        let target = PriorConditionTarget {
            mode: ConditionMode::PriorPrime,
            p_l,
            n_l: 1,
        };
        let rep = check_prior_condition(&prior, &target, 200_000, 42).unwrap();
        assert!(rep.pass, "report: {rep:?}");
        let est = rep.mc_estimate.unwrap();
        assert!((est - 1.0).abs() < 0.02, "estimate {est}");
    }

    #[test]
    fn bisection_agrees_with_closed_forms() {
        let t = |mode, p_l| PriorConditionTarget { mode, p_l, n_l: 1 };
        let g = solve_lambda_from_condition(PriorFamilyKind::Gaussian, &t(ConditionMode::Prior, 512))
            .unwrap();
        assert!((g - 256.0).abs() / 256.0 < 1e-10);
        let l = solve_lambda_from_condition(PriorFamilyKind::Laplace, &t(ConditionMode::Prior, 2))
            .unwrap();
        assert!((l - 2.0).abs() / 2.0 < 1e-10);
        let e =
            solve_lambda_from_condition(PriorFamilyKind::ExpNorm, &t(ConditionMode::PriorPrime, 1))
                .unwrap();
        assert!((e - 2f64.sqrt()).abs() / 2f64.sqrt() < 1e-10);
    }

    #[test]
    fn bisection_matches_table_across_shapes() {
        for p_l in [1usize, 2, 16, 128, 1024] {
            let t = PriorConditionTarget {
                mode: ConditionMode::Prior,
                p_l,
                n_l: 1,
            };
            let g = solve_lambda_from_condition(PriorFamilyKind::Gaussian, &t).unwrap();
            let expect = lambda_bayesian(PenaltyKind::L2, p_l, 1).unwrap();
            assert!((g - expect).abs() / expect < 1e-10);
            let l = solve_lambda_from_condition(PriorFamilyKind::Laplace, &t).unwrap();
            let expect = lambda_bayesian(PenaltyKind::L1, p_l, 1).unwrap();
            assert!((l - expect).abs() / expect < 1e-10);
            let tp = PriorConditionTarget {
                mode: ConditionMode::PriorPrime,
                p_l,
                n_l: 1,
            };
            let e = solve_lambda_from_condition(PriorFamilyKind::ExpNorm, &tp).unwrap();
            let expect = lambda_bayesian(PenaltyKind::GroupLasso, p_l, 1).unwrap();
            assert!((e - expect).abs() / expect < 1e-10);
        }
    }

    #[test]
    fn csv_export_lists_all_layers() {
        let arch = two_layer_arch();
        let p = plan(&arch, PenaltyKind::L2, Scheme::Bayesian, None, None).unwrap();
        let csv = plan_to_csv(&arch, &p);
        assert_eq!(csv, "l,n_l,P_l,lambda_l\n1,100,784,392\n2,10,100,50\n");
    }

    #[test]
    fn architecture_json_round_trip() {
        let json = r#"{"layers":[{"l":1,"n_l":100,"P_l":784}],"n":42000,"B":100}"#;
        let arch: ArchitectureSpec = serde_json::from_str(json).unwrap();
        assert_eq!(arch.layers[0].p_l, 784);
        assert_eq!(arch.b, 100);
        let back = serde_json::to_string(&arch).unwrap();
        assert_eq!(back, json);
    }
}
