//! Fit a psychometric function to staircase data from a simulated observer
//! and turn the 75% threshold into a fake/real labelling rule.
//!
//! cargo run --release --example psychometric_threshold

use hierdetect::psychometrics::{
    degree_to_label, fit_psychometric, staircase_session, SimulatedObserver, Z75,
};

fn main() -> hierdetect::Result<()> {
    let (mu, sigma) = (0.2, 0.05);
    let truth = mu + Z75 * sigma;
    println!("true threshold_75 = {truth:.6}");

    for seed in 0..5 {
        let observer = SimulatedObserver::new(mu, sigma, 0.0, seed)?;
        let trials = staircase_session(&observer, 0.4, 0.02, 100, 300)?;
        let fit = fit_psychometric(&trials)?;
        println!(
            "seed {seed}: {} trials, mu {:.4}, sigma {:.4}, threshold {:.4} (error {:+.4})",
            fit.trial_count,
            fit.mu,
            fit.sigma,
            fit.threshold_75,
            fit.threshold_75 - truth
        );
    }

    // A lapsing observer presses at random 6% of the time.
    let observer = SimulatedObserver::new(mu, sigma, 0.06, 99)?;
    let fit = fit_psychometric(&staircase_session(&observer, 0.4, 0.02, 100, 300)?)?;
    println!("\nwith 6% lapses:\n{fit}");
    for degree in [0.1, 0.2, fit.threshold_75, 0.3] {
        println!("degree {degree:.4} -> {:?}", degree_to_label(&fit, degree));
    }
    Ok(())
}
