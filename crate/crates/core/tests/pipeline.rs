use rand::Rng;

use sawlab::checkpoint::ChainCheckpoint;
use sawlab::io::{self, SampleRecord};
use sawlab::pipeline::{
    compare_files, predict, simulate, validate_rw, write_simulation, CompareRequest, PredictConfig, SimulationConfig,
    ValidateConfig,
};
use sawlab::pivot::chain_rng;
use sawlab::{Chain, ChainConfig, Constraint, Ensemble, Error};

fn small(ensemble: Ensemble, seed: u64) -> SimulationConfig {
    let mut c = SimulationConfig::new(ensemble);
    c.n_steps = 100;
    c.samples = 1000;
    c.chains = 4;
    c.seed = seed;
    c
}

/// Two-sample Kolmogorov-Smirnov distance.
fn ks_distance(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn random_walk_chain_matches_direct_sampling() {
    let n = 50;
    let m = 4000;
    let mut chain = Chain::new(ChainConfig::new(n, false, Constraint::None, 3, 0)).unwrap();
    chain.burn_in();
    let mut from_chain = Vec::with_capacity(m);
    for _ in 0..m {
        chain.advance(20);
        from_chain.push(chain.walk().endpoint().norm2() as f64);
    }
    let mut rng = chain_rng(99, 0);
    let direct: Vec<f64> = (0..m)
        .map(|_| {
            let mut p = [0i64; 3];
            for _ in 0..n {
                p[rng.gen_range(0..3)] += if rng.gen::<bool>() { 1 } else { -1 };
            }
            (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) as f64
        })
        .collect();
    // 0.1% critical value of the two-sample statistic.
    let critical = 1.95 * (2.0 / m as f64).sqrt();
    let d = ks_distance(from_chain, direct);
    assert!(d < critical, "KS distance {d} exceeds {critical}");
}

#[test]
fn simulation_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for ensemble in Ensemble::ALL {
        let mut cfg = small(ensemble, 7);
        let a = dir.path().join(format!("{ensemble}-a.csv"));
        let b = dir.path().join(format!("{ensemble}-b.csv"));
        write_simulation(&a, &simulate(&cfg).unwrap()).unwrap();
        cfg.workers = 3;
        write_simulation(&b, &simulate(&cfg).unwrap()).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

        let records = io::read_samples(&a).unwrap();
        assert_eq!(records.len(), 1000);
        let keys: Vec<(u64, u64)> = records.iter().map(|r| (r.chain_id, r.attempt)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(records.iter().all(|r| r.ensemble == ensemble));
    }
}

#[test]
fn metadata_records_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let cfg = small(Ensemble::Sphere, 3);
    write_simulation(&out, &simulate(&cfg).unwrap()).unwrap();
    let meta = sawlab::pipeline::read_sample_metadata(&out).unwrap();
    assert_eq!(meta.schema_version, io::SCHEMA_VERSION);
    assert_eq!(meta.config, cfg);
    assert_eq!(meta.config.sphere_a, 0.75);
    let exps = cfg.exponents;
    assert!((meta.weight_exponent - exps.gamma1() / exps.nu()).abs() < 1e-15);
    assert_eq!(meta.chains.len(), 4);
    assert!(meta.chains.iter().all(|c| c.acceptance_fraction > 0.0 && c.acceptance_fraction < 1.0));
    assert!(meta.rerun.contains("--ensemble sphere") && meta.rerun.contains("--seed 3"));
}

#[test]
fn prediction_against_itself_passes() {
    let dir = tempfile::tempdir().unwrap();
    let pred_path = dir.path().join("p.csv");
    let samples_path = dir.path().join("s.csv");
    let pred = predict(&PredictConfig::new(Ensemble::Half)).unwrap();
    io::write_prediction(&pred_path, Ensemble::Half, &pred).unwrap();

    // One sample per grid point carrying that bin's predicted mass.
    let records: Vec<SampleRecord> = pred
        .grid
        .iter()
        .zip(pred.bin_masses())
        .enumerate()
        .filter(|(_, (_, m))| *m > 0.0)
        .map(|(k, (&theta_deg, weight))| SampleRecord {
            ensemble: Ensemble::Half,
            theta_deg,
            weight,
            within_cutoff: true,
            chain_id: 0,
            attempt: k as u64,
        })
        .collect();
    io::write_samples(&samples_path, records).unwrap();
    let sim = simulate(&small(Ensemble::Half, 1)).unwrap();
    let meta_src = dir.path().join("meta.csv");
    write_simulation(&meta_src, &sim).unwrap();
    std::fs::copy(io::sidecar_path(&meta_src), io::sidecar_path(&samples_path)).unwrap();

    let req = CompareRequest { samples: samples_path, prediction: pred_path, tolerance: 0.01, rw_reference: None };
    let (report, summary) = compare_files(&req).unwrap();
    assert!(summary.pass);
    assert!(report.max_abs_delta < 1e-14, "{}", report.max_abs_delta);
}

#[test]
fn mismatched_cutoff_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.csv");
    let p = dir.path().join("p.csv");
    write_simulation(&s, &simulate(&small(Ensemble::Full, 2)).unwrap()).unwrap();
    let mut pc = PredictConfig::new(Ensemble::Full);
    pc.cutoff_deg = 80.0;
    io::write_prediction(&p, Ensemble::Full, &predict(&pc).unwrap()).unwrap();
    let req = CompareRequest { samples: s.clone(), prediction: p.clone(), tolerance: 0.01, rw_reference: None };
    assert!(matches!(compare_files(&req), Err(Error::GridMismatch(_))));

    io::write_prediction(&p, Ensemble::Half, &predict(&PredictConfig::new(Ensemble::Half)).unwrap()).unwrap();
    let req = CompareRequest { samples: s, prediction: p, tolerance: 0.01, rw_reference: None };
    assert!(matches!(compare_files(&req), Err(Error::InvalidConfig(_))));
}

#[test]
fn checkpoints_capture_final_chain_state() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Ensemble::Half, 5);
    cfg.chains = 2;
    cfg.checkpoint_dir = Some(dir.path().join("cp"));
    cfg.checkpoint_every = Some(100);
    let sim = simulate(&cfg).unwrap();
    for c in &sim.chains {
        let cp = ChainCheckpoint::load(&dir.path().join(format!("cp/chain-{:04}.json", c.summary.chain_id))).unwrap();
        assert_eq!(cp.attempted, c.summary.attempted);
        let chain = cp.restore().unwrap();
        assert_eq!(chain.accepted(), c.summary.accepted);
        assert!(chain.walk().sites().iter().skip(1).all(|p| p.z >= 1));
    }
}

#[test]
fn validation_is_deterministic_and_detects_wrong_b() {
    let cfg =
        ValidateConfig { n_steps: 200, samples: 20_000, chains: 4, seed: 11, tolerance: 0.03, ..Default::default() };
    let a = validate_rw(&cfg).unwrap();
    let b = validate_rw(&cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.entries.len(), 3);
    let half = a.entries.iter().find(|e| e.ensemble == Ensemble::Half).unwrap();
    assert!(half.summary.pass, "{:?}", half.summary);
    assert!(a.entries.iter().find(|e| e.ensemble == Ensemble::Sphere).unwrap().uncorrected.is_some());

    let wrong = validate_rw(&ValidateConfig { b_override: Some(1.2), ..cfg }).unwrap();
    assert!(!wrong.pass);
    let half = wrong.entries.iter().find(|e| e.ensemble == Ensemble::Half).unwrap();
    assert!(!half.summary.pass);
}
