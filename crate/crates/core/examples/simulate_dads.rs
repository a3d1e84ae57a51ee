//! The wing-rock DADS loop without disturbance: trajectory statistics and
//! the CSV log.

use dads::simulator::trajectory_stats;
use dads::system::{wingrock, DisturbanceProfile};
use dads::{simulate, Controller, SimConfig, WingRockDadsController};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = wingrock();
    let ctrl = Controller::WingRockDads(WingRockDadsController::default());
    let cfg = SimConfig::wingrock(&ctrl, DisturbanceProfile::Zero { dim: 2 });
    let log = simulate(&sys, &ctrl, &cfg)?;
    let st = trajectory_stats(&log, 0.2)?;
    let last = log.len() - 1;
    println!("logged {} samples up to t = {}", log.len(), log.times[last]);
    println!("x(t_end) = {:?}", log.plant_states[last]);
    println!(
        "z: {:.4} -> {:.4}",
        log.ctrl_states[0][0], log.ctrl_states[last][0]
    );
    println!("sup |Y| over the last 2 s: {:.3e}", st.sup_output_tail);
    println!(
        "control energy: {:.4e} (tail {:.4e})",
        st.control_energy, st.control_energy_tail
    );

    let path = std::env::temp_dir().join("dads_fig1.csv");
    log.write_csv(std::fs::File::create(&path)?)?;
    println!("csv -> {}", path.display());
    Ok(())
}
