//! End-to-end acceptance suite. Every criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::Value;
use sha2::{Digest, Sha256};

use surrokit::burgers::{read_trajectory, FlowField, Solver};
use surrokit::closures::{neural_tau_into, neural_tau_naive, reflection_asymmetry, InferWorkspace};
use surrokit::coarse::{box_filter, build_pairs};
use surrokit::eventgen::{
    energy_residual, isotropy_test, mc_generate, momentum_residual, sample_two_body, DecayConfig,
};
use surrokit::neural::{grad_check, load_mlp, max_relative_error, numeric_gradient, vae_elbo, Activation, Mlp, Vae};
use surrokit::rng;
use surrokit::validation::detect_instability;
use surrokit_cli::pipeline::{ClosureMeta, Envelope, GenDataReport};

const BIN: &str = env!("CARGO_BIN_EXE_surrokit");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Suite {
    results: Vec<(String, bool)>,
}

impl Suite {
    fn record(&mut self, id: &str, title: &str, limit: Option<Duration>, elapsed: Duration, o: Outcome) {
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = o.pass && in_time;
        let budget = limit.map(|l| format!(" / limit {:.0} s", l.as_secs_f64())).unwrap_or_default();
        let line = format!(
            "[{}] {id} {title}: {} [{:.1} s{budget}]\n",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
        );
        // Written past the test harness capture so the summary is always visible.
        let mut out = std::io::stdout().lock();
        out.write_all(line.as_bytes()).unwrap();
        out.flush().unwrap();
        self.results.push((id.to_string(), pass));
    }
}

fn cli(out: &Path, args: &[&str]) -> (Duration, Value) {
    let start = Instant::now();
    let o = Command::new(BIN)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("spawn surrokit");
    assert!(
        o.status.success(),
        "surrokit {args:?} failed ({:?}): {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    (start.elapsed(), serde_json::from_slice(&o.stdout).unwrap_or(Value::Null))
}

fn report(path: PathBuf) -> Value {
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    v["report"].clone()
}

fn files_with_hashes(root: &Path) -> BTreeMap<PathBuf, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let digest = Sha256::digest(std::fs::read(&p).unwrap());
                let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), hex);
            }
        }
    }
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ac1_decomposition(out: &Path, gen_time: Duration) -> (Duration, Outcome) {
    let start = Instant::now();
    let mut cells = 0usize;
    let mut violations = 0usize;
    let mut negative = 0usize;
    for i in 0..3 {
        let (traj, _) = read_trajectory::<f64>(&out.join(format!("data/trajectories/real_{i:03}.sktraj"))).unwrap();
        let pairs = build_pairs(&traj, 8, 0, i as u32).unwrap();
        for p in &pairs {
            for c in 0..p.n_coarse() {
                cells += 1;
                if p.tau_tot[c] != p.tau_res[c] + p.tau_unres[c] {
                    violations += 1;
                }
                if p.tau_unres[c] < 0.0 {
                    negative += 1;
                }
            }
        }
    }
    let gd: Envelope<GenDataReport> =
        serde_json::from_slice(&std::fs::read(out.join("data/gen_data.json")).unwrap()).unwrap();
    let all = &gd.report.decomposition;
    let pass = cells > 0
        && violations == 0
        && negative == 0
        && all.identity_violations == 0
        && all.negative_unres == 0;
    (
        gen_time + start.elapsed(),
        outcome(
            pass,
            format!(
                "3 realizations: {cells} cells, {violations} identity violations, {negative} negative unresolved; \
                 all {} realizations: {} violations, {} negative",
                gd.report.realizations.len(),
                all.identity_violations,
                all.negative_unres
            ),
        ),
    )
}

fn ac2_solver() -> Outcome {
    let length = 2.0 * PI;
    let (n, nu, k) = (64, 0.05, 3usize);
    let mut f = FlowField::sine_mode(n, length, nu, k, 1.0).unwrap();
    let dx = f.dx();
    let dt = 0.25 * dx * dx / nu;
    let kd2 = 4.0 / (dx * dx) * (PI * k as f64 / n as f64).sin().powi(2);
    let z = -nu * kd2 * dt;
    let gain = 1.0 + z + z * z / 2.0 + z * z * z / 6.0;
    let diffusion = Solver { advection: false };
    for _ in 0..100 {
        f = diffusion.step(&f, dt, None).unwrap();
    }
    let amp = (4.0 * f.energy()).sqrt();
    let expected = gain.powi(100);
    let decay_err = (amp - expected).abs() / expected;

    let mut g = surrokit::burgers::init_field(128, length, 0.0, 4, 1.0, 11).unwrap();
    for v in g.values.iter_mut() {
        *v += 0.5;
    }
    let dt_inv = 0.5 * surrokit::burgers::cfl_limit(&g);
    let mut momentum_err: f64 = 0.0;
    for _ in 0..100 {
        let before = g.integral();
        g = Solver::default().step(&g, dt_inv, None).unwrap();
        momentum_err = momentum_err.max((g.integral() - before).abs() / before.abs());
    }

    let mut h = surrokit::burgers::init_field(256, length, 0.02, 8, 1.0, 12).unwrap();
    let dt_v = 0.9 * surrokit::burgers::cfl_limit(&h);
    let mut monotone = true;
    for _ in 0..500 {
        let e0 = h.energy();
        h = Solver::default().step(&h, dt_v, None).unwrap();
        monotone &= h.energy() <= e0;
    }
    outcome(
        decay_err < 1e-3 && momentum_err <= 1e-12 && monotone,
        format!(
            "decay rel err {decay_err:.2e} (< 1e-3), max momentum drift {momentum_err:.2e}/step (<= 1e-12), \
             energy non-increasing over 500 steps: {monotone}"
        ),
    )
}

fn ac3_gradients() -> Outcome {
    let mut r = rng::stream(2024, "acceptance-gradcheck");
    let mut worst_mlp: f64 = 0.0;
    for t in 0..10 {
        let depth = r.random_range(1..=3);
        let mut sizes = vec![r.random_range(1..=6)];
        for _ in 0..depth {
            sizes.push(r.random_range(2..=12));
        }
        sizes.push(r.random_range(1..=3));
        let mlp = Mlp::<f64>::init(&sizes, Activation::LeakyRelu, 0.1, &mut rng::stream(t, "net")).unwrap();
        let batch = r.random_range(1..=6);
        let x: Vec<f64> = (0..batch * sizes[0]).map(|_| r.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..batch * sizes.last().unwrap()).map(|_| r.random_range(-2.0..2.0)).collect();
        worst_mlp = worst_mlp.max(grad_check(&mlp, &x, &y, 1e-5).unwrap());
    }
    let mut worst_vae: f64 = 0.0;
    for t in 0..10 {
        let dim = r.random_range(2..=10);
        let d = r.random_range(1..=4);
        let hidden = r.random_range(3..=12);
        let mut nr = rng::stream(100 + t, "vae");
        let enc = Mlp::<f64>::init(&[dim, hidden, 2 * d], Activation::LeakyRelu, 0.1, &mut nr).unwrap();
        let dec = Mlp::<f64>::init(&[d, hidden, dim], Activation::LeakyRelu, 0.1, &mut nr).unwrap();
        let vae = Vae::new(enc, dec, r.random_range(0.0..1.0)).unwrap();
        let batch = r.random_range(1..=5);
        let x: Vec<f64> = (0..batch * dim).map(|_| r.random_range(-1.5..1.5)).collect();
        let eps: Vec<f64> = (0..batch * d).map(|_| r.sample(StandardNormal)).collect();
        let (_, g) = vae_elbo(&vae, &x, &eps).unwrap();
        let n_enc = vae.encoder.n_params();
        let mut params = vae.encoder.params().to_vec();
        params.extend_from_slice(vae.decoder.params());
        let mut probe = vae.clone();
        let numeric = numeric_gradient(
            &params,
            |p| {
                probe.encoder.params_mut().copy_from_slice(&p[..n_enc]);
                probe.decoder.params_mut().copy_from_slice(&p[n_enc..]);
                vae_elbo(&probe, &x, &eps).unwrap().0.total
            },
            1e-5,
        );
        let mut analytic = g.encoder;
        analytic.extend_from_slice(&g.decoder);
        worst_vae = worst_vae.max(max_relative_error(&analytic, &numeric));
    }
    outcome(
        worst_mlp < 1e-5 && worst_vae < 1e-5,
        format!("max rel err regressor {worst_mlp:.2e}, VAE ELBO {worst_vae:.2e} (< 1e-5, 10 nets each)"),
    )
}

fn ac4_apriori(out: &Path) -> Outcome {
    let a = report(out.join("validate/apriori.json"));
    let rn = a["neural"]["pearson_r"].as_f64().unwrap();
    let rs = a["smagorinsky"]["pearson_r"].as_f64().unwrap();
    let gd: Envelope<GenDataReport> =
        serde_json::from_slice(&std::fs::read(out.join("data/gen_data.json")).unwrap()).unwrap();
    let n_train = gd.report.split_realizations["train"].len();
    outcome(
        rn >= 0.7 && rn >= rs && n_train >= 10,
        format!("r(neural) = {rn:.4} (>= 0.7), r(smagorinsky) = {rs:.4}, train realizations {n_train} (>= 10)"),
    )
}

fn ac5_aposteriori(out: &Path) -> Outcome {
    let r = report(out.join("validate/aposteriori.json"));
    let res = &r["result"];
    let self_err = res["truth_self_error"].as_f64().unwrap();
    let closures = res["closures"].as_array().unwrap();
    let names: Vec<&str> = closures.iter().map(|c| c["closure"].as_str().unwrap()).collect();
    let populated = closures
        .iter()
        .all(|c| c["stable"].is_boolean() && c["growth_rate"].is_number());
    let flags: Vec<String> = closures
        .iter()
        .map(|c| {
            format!(
                "{}: stable={} rate={:.3e}",
                c["closure"].as_str().unwrap(),
                c["stable"],
                c["growth_rate"].as_f64().unwrap_or(f64::NAN)
            )
        })
        .collect();
    let det = detect_instability(&[1.0, 2.0, 4.0, 8.0, 16.0], 5, 0.05, 100.0).unwrap();
    let det_err = (det.growth_rate - LN_2).abs();
    outcome(
        names == ["none", "smagorinsky", "neural"] && self_err == 0.0 && populated && det_err <= 1e-9 && !det.stable,
        format!(
            "truth self-error {self_err}, {}; detector rate err {det_err:.1e} (<= 1e-9)",
            flags.join(", ")
        ),
    )
}

fn ac6_fast_path(out: &Path, bench_time: Duration) -> (Duration, Outcome) {
    let start = Instant::now();
    let mlp = load_mlp::<f64>(&out.join("closure/closure.sknn")).unwrap();
    let meta: Envelope<ClosureMeta> =
        serde_json::from_slice(&std::fs::read(out.join("closure/closure.json")).unwrap()).unwrap();
    let stats = meta.report.norm_stats;
    let n = meta.report.n_coarse;
    let mut ws = InferWorkspace::new(&mlp, n).unwrap();
    let mut r = rng::stream(7, "acceptance-fuzz");
    let mut tau = vec![0.0; n];
    let mut mismatched = 0;
    for _ in 0..1000 {
        let amp: f64 = r.random_range(0.01..3.0);
        let u: Vec<f64> = (0..n).map(|_| amp * r.random_range(-1.0..1.0)).collect();
        neural_tau_into(&mlp, &stats, &u, &mut ws, &mut tau).unwrap();
        let naive = neural_tau_naive(&mlp, &stats, &u).unwrap();
        if tau.iter().zip(&naive).any(|(a, b)| a.to_bits() != b.to_bits()) {
            mismatched += 1;
        }
    }
    let b = report(out.join("bench/infer.json"));
    let res = &b["result"];
    let speedup = res["speedup"].as_f64().unwrap();
    let shape: Vec<u64> = res["net_shape"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    let pass = mismatched == 0
        && speedup >= 2.0
        && shape == [5, 64, 64, 1]
        && res["n_coarse"] == 128
        && res["outputs_checksum_equal"] == true;
    (
        bench_time + start.elapsed(),
        outcome(
            pass,
            format!(
                "{mismatched}/1000 fuzzed fields differ bitwise; median speedup {speedup:.2}x (>= 2) on {shape:?} at n_coarse {}",
                res["n_coarse"]
            ),
        ),
    )
}

fn ac7_events() -> Outcome {
    let decay = DecayConfig::default();
    let events = mc_generate(100_000, &decay, 99).unwrap();
    let (_, _, p) = decay.kinematics();
    let m = decay.parent_mass;
    let shell = events.iter().flat_map(|e| e.on_shell_residuals()).fold(0.0, f64::max);
    let mom = events.iter().map(momentum_residual).fold(0.0, f64::max) / p;
    let en = events.iter().map(|e| energy_residual(e, m)).fold(0.0, f64::max) / m;
    let iso = isotropy_test(&events, 20).unwrap();
    let cos_ok = iso.cos_theta_mean.abs() <= 4.0 / (events.len() as f64).sqrt();

    let small = DecayConfig {
        parent_mass: 10.0,
        m1: 1.0,
        m2: 2.0,
    };
    let e = sample_two_body(&small, &mut rng::stream(1, "closed-form")).unwrap();
    let (e1, e2) = e.energies();
    let pm = {
        let q = e.p1();
        (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt()
    };
    let closed = (e1 - 4.85).abs().max((e2 - 5.15).abs()).max((pm - (4.85f64 * 4.85 - 1.0).sqrt()).abs());
    outcome(
        shell <= 1e-9 && mom <= 1e-9 && en <= 1e-9 && iso.cos_theta_p > 1e-3 && iso.phi_p > 1e-3 && cos_ok && closed <= 1e-12,
        format!(
            "1e5 events: on-shell {shell:.1e}, momentum {mom:.1e}, energy {en:.1e} (<= 1e-9); \
             isotropy p(cos) {:.3} p(phi) {:.3} (> 0.001); closed form err {closed:.1e} (<= 1e-12)",
            iso.cos_theta_p, iso.phi_p
        ),
    )
}

fn ac8_generative(out: &Path) -> Outcome {
    let r = report(out.join("events/physics_report.json"));
    let c = &r["checks"];
    let nd = c["non_degenerate_dimensions"].as_u64().unwrap();
    let ok = c["bvae_not_worse_dimensions"].as_u64().unwrap();
    let mass = c["mass_peak_relative_error"].as_f64().unwrap();
    let ratio = c["noise_reconstruction_ratio"].as_f64().unwrap();
    let populated = ["dimensions", "invariant_mass", "momentum_residual", "energy_residual"]
        .iter()
        .all(|k| !r["bvae"][k].is_null());
    outcome(
        nd > 0 && ok == nd && mass <= 0.02 && ratio >= 5.0 && populated,
        format!(
            "B-VAE W1 <= prior W1 on {ok}/{nd} non-degenerate dimensions; mass peak rel err {mass:.2e} (<= 0.02); \
             noise-reconstruction ratio {ratio:.1} (>= 5)"
        ),
    )
}

fn ac10_augmentation(aug: &Path, plain: &Path) -> Outcome {
    let gd: Envelope<GenDataReport> =
        serde_json::from_slice(&std::fs::read(aug.join("data/gen_data.json")).unwrap()).unwrap();
    let mut fields = Vec::new();
    for &real in &gd.report.split_realizations["test"] {
        let (traj, _) =
            read_trajectory::<f64>(&aug.join(format!("data/trajectories/real_{real:03}.sktraj"))).unwrap();
        for s in &traj.snapshots {
            fields.push(box_filter(s, gd.report.filter_ratio).unwrap());
        }
    }
    let asym = |dir: &Path| {
        let mlp = load_mlp::<f64>(&dir.join("closure/closure.sknn")).unwrap();
        let meta: Envelope<ClosureMeta> =
            serde_json::from_slice(&std::fs::read(dir.join("closure/closure.json")).unwrap()).unwrap();
        let mut ws = InferWorkspace::new(&mlp, meta.report.n_coarse).unwrap();
        let all: Vec<f64> = fields
            .iter()
            .flat_map(|u| reflection_asymmetry(&mlp, &meta.report.norm_stats, u, &mut ws).unwrap())
            .collect();
        (median(all), meta.report.epochs, meta.seeds["train"])
    };
    let (a, ea, sa) = asym(aug);
    let (p, ep, sp) = asym(plain);
    outcome(
        a < p && ea == ep && sa == sp,
        format!(
            "median reflection asymmetry augmented {a:.3e} < un-augmented {p:.3e} over {} held-out fields \
             (same seed, {ea} epochs each)",
            fields.len()
        ),
    )
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let main = tmp.path().join("default");
    let plain = tmp.path().join("no-augment");
    let mut suite = Suite { results: Vec::new() };
    let min = |m: u64| Some(Duration::from_secs(60 * m));

    let (gen_time, _) = cli(&main, &["gen-data"]);
    let (t, o) = ac1_decomposition(&main, gen_time);
    suite.record("AC1", "decomposition identity", min(1), t, o);

    let s = Instant::now();
    let o = ac2_solver();
    suite.record("AC2", "solver oracle", min(1), s.elapsed(), o);

    let s = Instant::now();
    let o = ac3_gradients();
    suite.record("AC3", "gradient correctness", min(1), s.elapsed(), o);

    let (train_time, _) = cli(&main, &["train-closure"]);
    let (apriori_time, _) = cli(&main, &["validate", "apriori"]);
    let o = ac4_apriori(&main);
    suite.record("AC4", "a priori closure quality", min(10), gen_time + train_time + apriori_time, o);

    let (t, _) = cli(&main, &["validate", "aposteriori"]);
    let s = Instant::now();
    let o = ac5_aposteriori(&main);
    suite.record("AC5", "a posteriori harness", min(5), t + s.elapsed(), o);

    let (bench_time, _) = cli(&main, &["bench", "infer"]);
    let (t, o) = ac6_fast_path(&main, bench_time);
    suite.record("AC6", "inference fast path", min(2), t, o);

    let s = Instant::now();
    let o = ac7_events();
    suite.record("AC7", "MC event exactness", min(1), s.elapsed(), o);

    let mut ev_time = Duration::ZERO;
    for cmd in [&["events", "sample"][..], &["train-vae"], &["events", "generate"], &["events", "validate"]] {
        ev_time += cli(&main, cmd).0;
    }
    let o = ac8_generative(&main);
    suite.record("AC8", "generative physics", min(15), ev_time, o);

    let runs: [&[&str]; 4] = [
        &["run", "dns"],
        &["run", "les", "--closure", "none"],
        &["run", "les", "--closure", "smag"],
        &["run", "les", "--closure", "nn"],
    ];
    for cmd in runs {
        cli(&main, cmd);
    }
    let before = files_with_hashes(&main);
    let commands: [&[&str]; 9] = [
        &["gen-data"],
        &["train-closure"],
        &["validate", "apriori"],
        &["validate", "aposteriori"],
        &["bench", "infer"],
        &["events", "sample"],
        &["train-vae"],
        &["events", "generate"],
        &["events", "validate"],
    ];
    let s = Instant::now();
    for cmd in commands.iter().chain(runs.iter()) {
        let mut args = vec!["--threads", "1"];
        args.extend_from_slice(cmd);
        cli(&main, &args);
    }
    let after = files_with_hashes(&main);
    let bench_rel = PathBuf::from("bench/infer.json");
    let differing: Vec<String> = before
        .iter()
        .filter(|(p, h)| **p != bench_rel && after.get(*p) != Some(*h))
        .map(|(p, _)| p.display().to_string())
        .collect();
    let strip = |v: Value| {
        let mut r = v["result"].clone();
        for k in ["naive_median_s", "fast_median_s", "naive_p10_s", "naive_p90_s", "fast_p10_s", "fast_p90_s", "speedup"] {
            r.as_object_mut().unwrap().remove(k);
        }
        r
    };
    let bench_now = strip(report(main.join(&bench_rel)));
    let compared = before.len();
    let o = outcome(
        differing.is_empty() && before.keys().all(|k| after.contains_key(k)) && !bench_now.is_null(),
        if differing.is_empty() {
            format!("{compared} artifacts byte-identical after re-running all commands with --threads 1 (bench timings excluded)")
        } else {
            format!("artifacts differ: {}", differing.join(", "))
        },
    );
    suite.record("AC9", "reproducibility", None, s.elapsed(), o);

    let s = Instant::now();
    let cfg = tmp.path().join("no-augment.toml");
    std::fs::write(&cfg, "[data]\naugment = false\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    cli(&plain, &["--config", cfg, "gen-data"]);
    cli(&plain, &["--config", cfg, "train-closure"]);
    let o = ac10_augmentation(&main, &plain);
    suite.record("AC10", "augmentation effect", min(15), train_time + s.elapsed(), o);

    let failed: Vec<&str> = suite.results.iter().filter(|r| !r.1).map(|r| r.0.as_str()).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
