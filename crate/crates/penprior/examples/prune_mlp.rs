//! Trains a small MLP with a group-Lasso plan and prunes it in two phases,
//! then compares against the unpenalized baseline.

use penprior::{
    default_bayesian_sweep, make_synthetic_dataset, plan, train_two_phase, Activation,
    ArchitectureSpec, LayerShape, MLPModel, PenaltyKind, Scheme, TrainConfig,
};

fn main() -> penprior::Result<()> {
    let arch = ArchitectureSpec {
        layers: vec![
            LayerShape { l: 1, n_l: 32, p_l: 20 },
            LayerShape { l: 2, n_l: 16, p_l: 32 },
            LayerShape { l: 3, n_l: 3, p_l: 16 },
        ],
        n: 400,
        b: 32,
    };
    let data = make_synthetic_dataset(arch.n, 20, 3, 1.5, 42)?;
    let cfg = TrainConfig {
        learning_rates: vec![0.1],
        max_epochs: 2000,
        seed: 42,
        ..TrainConfig::default()
    };

    // Strongest value of the documented sweep around the theoretical 1/n.
    let global = *default_bayesian_sweep(arch.n).last().unwrap();
    let plan_gl = plan(&arch, PenaltyKind::GroupLasso, Scheme::Bayesian, Some(global), None)?;

    let mut model = MLPModel::new(&[20, 32, 16, 3], Activation::ReLU, 42)?;
    let total = model.total_hidden_neurons();
    let report = train_two_phase(&mut model, &data, &plan_gl, &cfg)?;
    println!(
        "group-Lasso: pruned {} of {total} hidden neurons (alive per layer {:?})",
        total - model.alive_hidden_neurons(),
        model.per_layer_alive()
    );
    println!(
        "  test accuracy {:.4}, {} parameters left, {} logged epochs",
        report.final_test_acc,
        report.final_param_count,
        report.phase_log.len()
    );

    let plan_zero = plan(&arch, PenaltyKind::GroupLasso, Scheme::Bayesian, Some(0.0), None)?;
    let mut baseline = MLPModel::new(&[20, 32, 16, 3], Activation::ReLU, 42)?;
    let base_report = train_two_phase(&mut baseline, &data, &plan_zero, &cfg)?;
    println!(
        "baseline (no penalty): test accuracy {:.4}, {} parameters",
        base_report.final_test_acc, base_report.final_param_count
    );
    Ok(())
}
