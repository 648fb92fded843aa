//! Builds the explicit convergence-rate witness for the Gaussian toy model
//! and checks its three hypotheses and the resulting risk bound numerically.

use penprior::{corollary_rate, rate_bound, verify_witness, EpsSequence, ToyModel};

fn main() -> penprior::Result<()> {
    let model = ToyModel::standard();
    let witness = corollary_rate(&model, 0.5)?;
    println!(
        "constructed witness: C1 = {}, C2 = {}, C3 = {:.4}",
        witness.c1, witness.c2, witness.c3
    );

    let report = verify_witness(&model, &witness, &[100, 1_000, 10_000], 1_000, 0)?;
    println!("{:>8} {:>12} {:>12} {:>6}", "n", "bound", "risk", "hold");
    for check in &report.per_n {
        println!(
            "{:>8} {:>12.6} {:>12.6} {:>6}",
            check.n, check.bound_value, check.r_n_estimate, check.conditions_hold
        );
    }

    // The raw bound is monotone in n and rejects too-fast sequences.
    let eps = EpsSequence::PowerLaw { gamma: 0.5 };
    for n in [16u64, 256, 4096] {
        println!("bound at n = {n}: {:.6}", rate_bound(1.0, 0.0, 0.0, &eps, n)?);
    }
    let err = rate_bound(1.0, 0.0, 0.0, &EpsSequence::PowerLaw { gamma: 2.0 }, 2);
    println!("eps_n = 1/n at n = 2 -> {err:?}");
    Ok(())
}
