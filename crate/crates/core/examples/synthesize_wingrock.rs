//! Recursive DADS design on the wing-rock plant, then sampled certificates of
//! every stage.

use dads::synthesis::{synthesize, wingrock_majorants, DadsGains, SynthesisOptions, WINGROCK_R3};
use dads::system::{wingrock, SampleBox};
use dads::verifier::{summary, synthesized_dissipation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = wingrock();
    let gains = DadsGains::wingrock();
    let pack = wingrock_majorants(&gains, WINGROCK_R3);
    let syn = synthesize(&sys, &gains, &pack, &SynthesisOptions::default())?;
    print!("{}", syn.report());
    let reports = synthesized_dissipation(&sys, &syn, 200, 500, 1, &SampleBox::default(), 1e-7)?;
    print!("{}", summary(&reports));

    // u and ż of the synthesized law at one state.
    let ctrl = dads::SynthesizedDadsController::from_synthesis(&syn);
    let out = dads::controllers::synthesized_control(&[0.1, -0.2, 0.3], 0.0, &ctrl)?;
    println!("u = {:.4e}, dz/dt = {:.4e}", out.u, out.z_rate);
    Ok(())
}
