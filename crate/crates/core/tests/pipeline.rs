use std::f64::consts::PI;

use surrokit::burgers::{cfl_limit, init_field, read_trajectory, run, write_trajectory, TrajectorySidecar};
use surrokit::closures::{fit_smagorinsky_constant, NeuralClosure, SmagorinskyClosure};
use surrokit::coarse::build_pairs;
use surrokit::data::{build_dataset, extract_samples, read_dataset, write_dataset, GridInfo, PrepareOptions, Split};
use surrokit::eventgen::{
    build_buffer, bvae_generate_with, mc_generate, physics_report, read_events, write_events, BufferSampling,
    DecayConfig, EventManifest, EventNorm, EVENT_DIM,
};
use surrokit::neural::{load_mlp, load_vae, save_mlp, save_vae, train_regressor, train_vae, AdamConfig, MlpConfig, TrainConfig, VaeConfig};
use surrokit::validation::{aposteriori_validate, apriori_validate, AposterioriConfig, NamedClosure};
use surrokit::{Mlp64, Trajectory64, Vae64};

const N_FINE: usize = 128;
const R: usize = 4;

fn realization(seed: u64) -> Trajectory64 {
    let f = init_field(N_FINE, 2.0 * PI, 0.02, 4, 1.0, seed).unwrap();
    run(&f, 1.0, 0.9 * cfl_limit(&f), None, 10).unwrap()
}

fn train_cfg(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 64,
        seed,
        adam: AdamConfig::default(),
    }
}

#[test]
fn closure_workflow_round_trips_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let trajs: Vec<Trajectory64> = (0..4).map(|i| realization(100 + i)).collect();

    let sidecar = TrajectorySidecar {
        start_time: 0.0,
        seed: 100,
        config: serde_json::json!({ "n_fine": N_FINE }),
    };
    let tpath = tmp.path().join("real_000.sktraj");
    write_trajectory(&trajs[0], &tpath, &sidecar).unwrap();
    let (back, side) = read_trajectory::<f64>(&tpath).unwrap();
    assert_eq!(back.snapshots, trajs[0].snapshots);
    assert_eq!((back.dt, back.nu, back.length), (trajs[0].dt, trajs[0].nu, trajs[0].length));
    for (a, b) in back.snapshot_times.iter().zip(&trajs[0].snapshot_times) {
        assert!((a - b).abs() <= 1e-12);
    }
    assert_eq!(side, sidecar);

    let mut samples = Vec::new();
    for (i, t) in trajs.iter().enumerate() {
        samples.extend(extract_samples(&build_pairs(t, R, 1, i as u32).unwrap()).unwrap());
    }
    let grid = GridInfo {
        coarse_dx: 2.0 * PI / (N_FINE / R) as f64,
        n_coarse: (N_FINE / R) as u32,
        filter_ratio: R as u32,
    };
    let opts = PrepareOptions {
        augment: true,
        balance_bins: Some(8),
        epsilon_std: 1e-8,
    };
    let ds = build_dataset(&samples, [0.5, 0.25, 0.25], 3, grid, opts).unwrap();
    for a in Split::ALL {
        for b in Split::ALL {
            if a != b {
                assert!(ds.realizations(a).is_disjoint(&ds.realizations(b)));
            }
        }
    }
    let dir = tmp.path().join("dataset");
    write_dataset(&ds, &dir).unwrap();
    assert_eq!(read_dataset(&dir).unwrap(), ds);

    let mlp_cfg = MlpConfig {
        hidden: vec![12, 12],
        slope: 0.1,
    };
    let (mlp, history) = train_regressor::<f64>(&ds, &mlp_cfg, &train_cfg(3, 9)).unwrap();
    assert_eq!(history.epochs(), 3);
    assert!(history.val_loss.iter().all(|v| v.is_finite()));
    let (again, _) = train_regressor::<f64>(&ds, &mlp_cfg, &train_cfg(3, 9)).unwrap();
    assert_eq!(mlp, again);

    let wpath = tmp.path().join("closure.sknn");
    save_mlp(&mlp, &wpath).unwrap();
    let loaded: Mlp64 = load_mlp(&wpath).unwrap();
    assert_eq!(loaded, mlp);

    let c = fit_smagorinsky_constant(&ds).unwrap();
    assert!(c > 0.0);
    let apriori = apriori_validate(&mlp, &ds.norm_stats, c, grid.coarse_dx, &ds.test).unwrap();
    assert_eq!(apriori.neural.n_samples, ds.test.len());
    assert!(apriori.smagorinsky.pearson_r > 0.0);

    let closures: Vec<NamedClosure> = vec![
        ("none".into(), None),
        ("smagorinsky".into(), Some(Box::new(SmagorinskyClosure { c }))),
        (
            "neural".into(),
            Some(Box::new(NeuralClosure::new(loaded, ds.norm_stats, N_FINE / R).unwrap())),
        ),
    ];
    let report = aposteriori_validate(&trajs[3], R, 1, closures, AposterioriConfig::default()).unwrap();
    assert_eq!(report.truth_self_error, 0.0);
    assert_eq!(report.closures.len(), 3);
    for run in &report.closures {
        assert!(run.energy_error.is_finite() || run.aborted);
        assert!(run.coarse_steps > 0);
    }
}

#[test]
fn event_workflow_round_trips_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let decay = DecayConfig::default();
    let train = mc_generate(800, &decay, 1).unwrap();
    let val = mc_generate(200, &decay, 2).unwrap();
    let truth = mc_generate(800, &decay, 3).unwrap();

    let epath = tmp.path().join("train.skev");
    let manifest = EventManifest {
        count: train.len(),
        parent_mass: decay.parent_mass,
        m1: decay.m1,
        m2: decay.m2,
        seed: 1,
        source: "mc".into(),
    };
    write_events(&train, &manifest, &epath).unwrap();
    let (back, m) = read_events(&epath).unwrap();
    assert_eq!(back, train);
    assert_eq!(m, manifest);

    let norm = EventNorm::fit(&train, 1e-8).unwrap();
    let vae_cfg = VaeConfig {
        hidden: vec![16],
        latent_dim: 2,
        beta_kl: 1e-3,
        slope: 0.1,
    };
    let (vae, _) = train_vae::<f64>(&norm.rows(&train), &norm.rows(&val), EVENT_DIM, &vae_cfg, &train_cfg(2, 4)).unwrap();
    let vpath = tmp.path().join("vae.skvae");
    save_vae(&vae, &vpath).unwrap();
    let vae: Vae64 = load_vae(&vpath).unwrap();

    let buffer = build_buffer(&vae, &train, &norm).unwrap();
    assert_eq!(build_buffer(&vae, &train, &norm).unwrap(), buffer);
    let a = bvae_generate_with(&vae, &buffer, &norm, 300, 0.5, 8, BufferSampling::Uniform).unwrap();
    let b = bvae_generate_with(&vae, &buffer, &norm, 300, 0.5, 8, BufferSampling::Uniform).unwrap();
    assert_eq!(a, b);

    let same = physics_report(&truth, &truth, &vae, &norm, 16, 5).unwrap();
    for d in &same.dimensions {
        assert!(d.wasserstein1.is_none_or(|w| w == 0.0), "{}", d.name);
    }
    let gen = physics_report(&truth, &a, &vae, &norm, 16, 5).unwrap();
    assert_eq!(gen.n_generated, 300);
    assert!(gen.noise_reconstruction_ratio.is_finite());
    assert!(gen.momentum_residual.mean >= 0.0 && gen.momentum_residual.p95 >= 0.0);
}
