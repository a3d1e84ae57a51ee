//! With a decaying disturbance and θ = 0 the DADS loop converges to the origin.

use dads::system::{norm, wingrock, DisturbanceProfile, ParameterSignal};
use dads::{simulate, Controller, SimConfig, WingRockDadsController};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = wingrock();
    let ctrl = Controller::WingRockDads(WingRockDadsController::default());
    let d = DisturbanceProfile::Vanishing {
        amplitude: vec![20.0, 0.0],
        frequency: vec![10.0, 0.0],
        rate: 1.0,
    };
    let cfg = SimConfig {
        parameter: ParameterSignal::Constant {
            value: vec![0.0; 4],
        },
        ..SimConfig::wingrock(&ctrl, d)
    };
    let log = simulate(&sys, &ctrl, &cfg)?;
    for t in [0.0, 1.0, 2.0, 5.0, 10.0] {
        let i = log.index_at(t);
        println!("t = {t:>4}: |x| = {:.4e}", norm(&log.plant_states[i]));
    }
    Ok(())
}
