//! Base step for an (x, y) cascade: pole placement, Lyapunov solve and the
//! comparison constant, on ẋ = y, ẏ = θx + u + d.

use dads::jets::{scalar_map, vector_map};
use dads::synthesis::{
    base_linear_algebra, certify_stage, synthesize, DadsGains, LevelMajorants, MajorantPack,
    SynthesisOptions,
};
use dads::system::{Row, SampleBox, StrictFeedbackSystem, ThetaSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (n, m) in [(1, 1), (2, 1), (3, 2)] {
        let b = base_linear_algebra(n, m, 0.5)?;
        println!(
            "n={n} m={m}: omega = {:?}, M_raw = {:.4}, decay form max eig {:.3e}",
            b.omega.as_slice(),
            b.m_raw,
            b.lyapunov_residual
        );
    }

    let mut row = Row::integrator(2, 1, 1);
    row.phi = vector_map("phi", 2, 1, |v| vec![v[0].clone()]);
    row.alpha = vector_map("alpha", 2, 1, |v| vec![v[0].like(1.0)]);
    let sys = StrictFeedbackSystem::cascade("toy", 1, vec![row], 1, 1, ThetaSet::Whole)?;
    let pack = MajorantPack {
        levels: vec![LevelMajorants {
            r: scalar_map("one", 2, |u| u[0].like(1.0)),
            big_r: None,
            rho: None,
        }],
    };
    let gains = DadsGains::new(1.0, 5.0, 0.05, 0.5, 1.0);
    let syn = synthesize(&sys, &gains, &pack, &SynthesisOptions::default())?;
    print!("{}", syn.report());
    let samples = SampleBox::default().draw_many(1, 500, 2, &sys.theta_set, 1, 1);
    let c = certify_stage(&sys, &syn.stages[0], &syn.gains, &samples)?;
    println!(
        "certificate worst margin {:.4e} over {} samples",
        c.worst_margin, c.n_samples
    );
    Ok(())
}
