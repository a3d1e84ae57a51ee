//! Sampled dissipation inequalities for both closed-form laws, and a mutant
//! that the sampler must catch.

use dads::system::{wingrock, SampleBox};
use dads::verifier::{sigma_dissipation, sigma_samples, wingrock_dissipation, wingrock_samples};
use dads::{SigmaModController, WingRockDadsController};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = wingrock();
    let sample_box = SampleBox::default();
    let pts = wingrock_samples(1000, 7, &sample_box);
    let law = WingRockDadsController::default();
    println!(
        "{}",
        wingrock_dissipation(&sys, &law, &pts, 1e-6)?.summary_line()
    );
    println!(
        "{}",
        wingrock_dissipation(&sys, &law.with_flipped_xi_term(), &pts, 1e-6)?.summary_line()
    );
    let pts = sigma_samples(1000, 7, &sample_box);
    for sigma in [0.4, 0.0] {
        let ctrl = SigmaModController {
            sigma,
            ..Default::default()
        };
        println!(
            "{}",
            sigma_dissipation(&sys, &ctrl, &pts, 1e-6)?.summary_line()
        );
    }
    Ok(())
}
