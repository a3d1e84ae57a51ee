use dads::jets::{constant_map, scalar_map, vector_map};
use dads::synthesis::{
    certify_stage, comparison_margin, synthesize, wingrock_majorants, DadsGains, LevelMajorants,
    MajorantPack, Synthesis, SynthesisError, SynthesisOptions, WINGROCK_R3,
};
use dads::system::{sine_gain_chain, wingrock, Row, SampleBox, StrictFeedbackSystem, ThetaSet};
use proptest::prelude::*;

fn wingrock_synthesis() -> (StrictFeedbackSystem, Synthesis) {
    let sys = wingrock();
    let g = DadsGains::new(1.0, 20.0, 0.01, 0.5, 2.0);
    let syn = synthesize(
        &sys,
        &g,
        &wingrock_majorants(&g, WINGROCK_R3),
        &SynthesisOptions::default(),
    )
    .unwrap();
    (sys, syn)
}

fn unit_pack(levels: usize) -> MajorantPack {
    MajorantPack {
        levels: (0..levels)
            .map(|_| LevelMajorants {
                r: constant_map("one", 1, 1.0),
                big_r: None,
                rho: None,
            })
            .collect(),
    }
}

#[test]
fn wingrock_stage_bookkeeping() {
    let (_, syn) = wingrock_synthesis();
    let rates: Vec<f64> = syn.stages.iter().map(|s| s.rate_c).collect();
    let gains: Vec<f64> = syn.stages.iter().map(|s| s.gain_a).collect();
    assert_eq!(rates, [2.0, 1.0, 0.5]);
    assert_eq!(gains, [0.5, 1.0, 2.0]);
    assert_eq!(*gains.last().unwrap(), syn.gains.a);
    assert_eq!(
        syn.stages.iter().map(|s| s.dim).collect::<Vec<_>>(),
        [1, 2, 3]
    );
}

#[test]
fn final_lyapunov_vanishes_at_the_origin_only() {
    let (sys, syn) = wingrock_synthesis();
    for z in [-5.0, 0.0, 5.0] {
        assert_eq!(syn.v_final.eval(&[0.0, 0.0, 0.0, z]).unwrap()[0], 0.0);
    }
    let samples = SampleBox::default().draw_many(5, 300, 3, &sys.theta_set, 4, 2);
    for s in &samples {
        let mut p = s.x.clone();
        p.push(s.z);
        assert!(syn.v_final.eval(&p).unwrap()[0] > 0.0);
    }
    for st in &syn.stages {
        assert!(
            comparison_margin(st, &samples).unwrap() >= -1e-9,
            "stage {}",
            st.level
        );
    }
}

#[test]
fn stage_certificates_hold_on_a_fresh_seed() {
    let (sys, syn) = wingrock_synthesis();
    for st in &syn.stages {
        let samples =
            SampleBox::default().draw_many(9000 + st.level as u64, 150, 3, &sys.theta_set, 4, 2);
        let c = certify_stage(&sys, st, &syn.gains, &samples).unwrap();
        assert!(
            c.worst_margin >= -1e-7,
            "stage {} margin {}",
            st.level,
            c.worst_margin
        );
        assert_eq!(c.n_samples, 150);
    }
}

#[test]
fn undersized_majorant_is_rejected_with_a_witness() {
    let sys = wingrock();
    let g = DadsGains::wingrock();
    let mut pack = wingrock_majorants(&g, WINGROCK_R3);
    pack.levels[2].r = constant_map("tiny", 2, 0.001);
    match synthesize(&sys, &g, &pack, &SynthesisOptions::default()) {
        Err(SynthesisError::MajorantViolation {
            level,
            witness,
            margin,
            ..
        }) => {
            assert_eq!(level, 3);
            assert_eq!(witness.len(), 2);
            assert!(margin < 0.0);
        }
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("bad majorant accepted"),
    }
}

#[test]
fn missing_level_is_reported() {
    let sys = wingrock();
    let g = DadsGains::wingrock();
    let mut pack = wingrock_majorants(&g, WINGROCK_R3);
    pack.levels.truncate(2);
    assert!(matches!(
        synthesize(&sys, &g, &pack, &SynthesisOptions::default()),
        Err(SynthesisError::MissingMajorants { level: 3 })
    ));
}

#[test]
fn scalar_chain_with_state_dependent_gain() {
    let sys = sine_gain_chain(1.0);
    let g = DadsGains::new(1.0, 5.0, 0.05, 1.0, 1.0);
    let syn = synthesize(&sys, &g, &unit_pack(1), &SynthesisOptions::default()).unwrap();
    assert_eq!(syn.stages.len(), 1);
    let st = &syn.stages[0];
    assert_eq!((st.rate_c, st.gain_a), (1.0, 1.0));
    let samples = SampleBox::default().draw_many(3, 400, 1, &sys.theta_set, 1, 1);
    let c = certify_stage(&sys, st, &syn.gains, &samples).unwrap();
    assert!(c.worst_margin >= -1e-7, "{}", c.worst_margin);
}

/// `ẋ = y₁`, `ẏ₁ = θ·x + u + d`.
fn toy_cascade() -> StrictFeedbackSystem {
    let mut row = Row::integrator(2, 1, 1);
    row.phi = vector_map("phi", 2, 1, |v| vec![v[0].clone()]);
    row.alpha = vector_map("alpha", 2, 1, |v| vec![v[0].like(1.0)]);
    StrictFeedbackSystem::cascade("toy", 1, vec![row], 1, 1, ThetaSet::Whole).unwrap()
}

#[test]
fn cascade_base_step() {
    let sys = toy_cascade();
    let g = DadsGains::new(1.0, 5.0, 0.05, 0.5, 1.0);
    let pack = MajorantPack {
        levels: vec![LevelMajorants {
            r: scalar_map("one", 2, |u| u[0].like(1.0)),
            big_r: None,
            rho: None,
        }],
    };
    let syn = synthesize(&sys, &g, &pack, &SynthesisOptions::default()).unwrap();
    let base = syn.base.as_ref().unwrap();
    assert!((base.p[(0, 0)] - 1.0).abs() < 1e-12);
    assert!((base.omega[0] + 1.0).abs() < 1e-12);
    assert!((base.m_raw - (2.0 + 2f64.sqrt())).abs() < 1e-9);
    assert_eq!(syn.m_const, base.m_const);
    let samples = SampleBox::default().draw_many(4, 300, 2, &sys.theta_set, 1, 1);
    let c = certify_stage(&sys, &syn.stages[0], &syn.gains, &samples).unwrap();
    assert!(c.worst_margin >= -1e-7, "{}", c.worst_margin);
    assert!(syn.report().contains("M_const"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scalar_chain_lyapunov_is_positive_definite(x in -5.0f64..5.0, z in -5.0f64..5.0) {
        let sys = sine_gain_chain(1.0);
        let g = DadsGains::new(1.0, 5.0, 0.05, 1.0, 1.0);
        let syn = synthesize(&sys, &g, &unit_pack(1), &SynthesisOptions { samples: 50, ..Default::default() }).unwrap();
        let v = syn.v_final.eval(&[x, z]).unwrap()[0];
        prop_assert!(v >= 0.0);
        prop_assert!((v > 0.0) == (x != 0.0));
    }
}
