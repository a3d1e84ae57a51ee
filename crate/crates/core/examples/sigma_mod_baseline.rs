//! The σ-modification baseline under the persistent disturbance: with σ = 0
//! the estimate drifts, with σ = 0.4 it stays bounded.

use dads::system::{wingrock, DisturbanceProfile};
use dads::{simulate, Controller, SigmaModController, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = wingrock();
    for sigma in [0.0, 0.4] {
        let ctrl = Controller::SigmaMod(SigmaModController {
            sigma,
            ..Default::default()
        });
        let cfg = SimConfig::wingrock(&ctrl, DisturbanceProfile::persistent());
        let log = simulate(&sys, &ctrl, &cfg)?;
        let half = log.gain[log.index_at(5.0)];
        let end = *log.gain.last().unwrap();
        println!(
            "sigma = {sigma}: |th(5)| = {half:.3}, |th(10)| = {end:.3}, ratio {:.3}",
            end / half
        );
    }
    Ok(())
}
