use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sts_core::fmcw::{
    angular_resolution, cfar_detect, process_cube, range_doppler, range_resolution, synthesize_if_cube,
    velocity_resolution, CfarConfig, RadarConfig, Scatterer,
};

#[test]
fn noise_only_false_alarms_match_the_design_rate() {
    let cfg = RadarConfig {
        samples_per_chirp: 128,
        adc_rate_hz: 1.28e6,
        chirps_per_frame: 32,
        rx_count: 4,
        cfar: CfarConfig {
            false_alarm_rate: 1e-4,
            ..CfarConfig::default()
        },
        ..RadarConfig::default()
    };
    let cubes = 400u64;
    let (hits, tested) = (0..cubes)
        .into_par_iter()
        .map(|seed| {
            let cube = synthesize_if_cube(&cfg, &[], 1.0, seed).unwrap();
            let rd = range_doppler(&cfg, &cube).unwrap();
            let c = cfar_detect(&cfg, &rd);
            (c.hits.len(), c.tested)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let p = cfg.cfar.false_alarm_rate;
    let expected = p * tested as f64;
    let band = 3.0 * (tested as f64 * p * (1.0 - p)).sqrt();
    eprintln!("false alarms {hits}, expected {expected:.1} ± {band:.1}");
    assert!((hits as f64 - expected).abs() <= band);
}

#[test]
fn random_targets_are_located_within_half_resolution() {
    let cfg = RadarConfig {
        clutter_removal: false,
        ..RadarConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let scenes: Vec<Scatterer> = (0..20)
        .map(|_| {
            Scatterer::new(
                rng.random_range(1.0..6.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-45f64..45.0).to_radians(),
                1.0,
            )
            .unwrap()
        })
        .collect();
    for (i, s) in scenes.iter().enumerate() {
        let cube = synthesize_if_cube(&cfg, &[*s], 0.1, i as u64).unwrap();
        let dets = process_cube(&cfg, &cube).unwrap();
        let d = dets.first().expect("target detected");
        assert!((d.range_m - s.range_m).abs() <= range_resolution(&cfg) / 2.0, "{s:?} {d:?}");
        assert!((d.velocity_mps - s.velocity_mps).abs() <= velocity_resolution(&cfg) / 2.0, "{s:?} {d:?}");
        let half = angular_resolution(&cfg, s.azimuth_rad).unwrap() / 2.0;
        assert!((d.azimuth_rad - s.azimuth_rad).abs() <= half, "{s:?} {d:?}");
    }
}

#[test]
fn two_separated_targets_give_two_detections() {
    let cfg = RadarConfig::default();
    let scene = [
        Scatterer::new(2.0, 0.6, 0.3, 1.0).unwrap(),
        Scatterer::new(4.5, -0.8, -0.4, 0.5).unwrap(),
    ];
    let cube = synthesize_if_cube(&cfg, &scene, 0.1, 5).unwrap();
    let dets = process_cube(&cfg, &cube).unwrap();
    assert_eq!(dets.len(), 2, "{dets:?}");
    assert!((dets[0].range_m - 2.0).abs() < 0.02);
    assert!((dets[1].range_m - 4.5).abs() < 0.02);
    assert!(dets[0].power_db > dets[1].power_db);
}
