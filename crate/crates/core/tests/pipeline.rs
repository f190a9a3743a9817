use lipstab::certificate::verify_certificate;
use lipstab::io::{certificate_to_text, parse_certificate, parse_train_log_csv, parse_weights, train_log_csv, weights_to_text};
use lipstab::model::{LinearPlant, ParamBox, SafePolytope, VanDerPol};
use lipstab::policy::{init_networks, lipschitz_upper_bound, train, train_from, TrainConfig, TrainSetup};
use lipstab::sector::{compute_sector, DEFAULT_SECTOR_TOL};
use lipstab::synthesis::{synthesize, SynthesisConfig};
use nalgebra::DMatrix;

fn square(h: f64) -> SafePolytope {
    SafePolytope::from_vertices_2d(&[[h, h], [-h, h], [-h, -h], [h, -h]]).unwrap()
}

fn uncertain_oscillator() -> (LinearPlant, ParamBox) {
    let plant = LinearPlant::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.2]),
        DMatrix::identity(2, 2),
        vec![DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])],
        vec![DMatrix::zeros(2, 2)],
    )
    .unwrap();
    (plant, ParamBox::new(vec![-0.1], vec![0.1]).unwrap())
}

#[test]
fn linear_plant_certificate_survives_text_round_trip() {
    let (plant, params) = uncertain_oscillator();
    let safe = square(1.0);
    let cfg = SynthesisConfig { n_steps: 5, ..SynthesisConfig::default() };
    let result = synthesize(&plant, &params, &safe, &cfg).unwrap();
    assert_eq!(result.successful_steps, 5);
    let cert = result.certificate().unwrap();

    let parsed = parse_certificate(&certificate_to_text(&cert)).unwrap();
    assert_eq!(parsed, cert);

    let sector = compute_sector(&plant, &parsed.gain, parsed.lipschitz, &safe.scaled(parsed.scale).unwrap(), &params, DEFAULT_SECTOR_TOL)
        .unwrap();
    assert!(verify_certificate(&plant, &parsed, &sector, &safe).unwrap().is_valid());
}

#[test]
fn tampered_certificate_is_rejected() {
    let (plant, params) = uncertain_oscillator();
    let safe = square(1.0);
    let cfg = SynthesisConfig { n_steps: 3, ..SynthesisConfig::default() };
    let mut cert = synthesize(&plant, &params, &safe, &cfg).unwrap().certificate().unwrap();
    let sector = compute_sector(&plant, &cert.gain, cert.lipschitz, &safe.scaled(cert.scale).unwrap(), &params, DEFAULT_SECTOR_TOL)
        .unwrap();
    cert.level *= 100.0;
    assert!(!verify_certificate(&plant, &cert, &sector, &safe).unwrap().is_valid());
}

fn short_config(cap: f64, seed: u64) -> TrainConfig {
    TrainConfig { n_traj: 30, seed, ..TrainConfig::example(cap) }
}

#[test]
fn training_is_deterministic_and_respects_the_budget() {
    let safe = VanDerPol::safe_polytope();
    let params = VanDerPol::param_box();
    let result = synthesize(&VanDerPol, &params, &safe, &SynthesisConfig::default()).unwrap();
    let cert = result.certificate().unwrap();
    let sector = result.sector.clone().unwrap();
    let setup = TrainSetup { model: &VanDerPol, certificate: &cert, sector: &sector, safe: &safe, params: &params, reward: &VanDerPol::reward };

    let a = train(&setup, &short_config(cert.lipschitz, 3)).unwrap();
    let b = train(&setup, &short_config(cert.lipschitz, 3)).unwrap();
    assert_eq!(train_log_csv(&a.log), train_log_csv(&b.log));
    assert_eq!(weights_to_text(&a.actor), weights_to_text(&b.actor));
    assert!(a.log.iter().all(|r| r.lipschitz <= cert.lipschitz));

    let c = train(&setup, &short_config(cert.lipschitz, 4)).unwrap();
    assert_ne!(weights_to_text(&a.actor), weights_to_text(&c.actor));

    assert_eq!(parse_train_log_csv(&train_log_csv(&a.log)).unwrap(), a.log);
    assert_eq!(parse_weights(&weights_to_text(&a.actor)).unwrap(), a.actor);

    // zero trajectories: the (projected) initial networks come back unchanged
    let cfg = TrainConfig { n_traj: 0, ..short_config(cert.lipschitz, 5) };
    let (actor, critic) = init_networks(&cfg, 2, 2).unwrap();
    let out = train_from(&setup, &cfg, actor.clone(), critic.clone()).unwrap();
    assert!(out.log.is_empty());
    assert!(lipschitz_upper_bound(&out.actor) <= cert.lipschitz);
    assert_eq!(out.critic, critic);
}
