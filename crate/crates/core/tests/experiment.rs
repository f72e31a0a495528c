use std::fs::{self, File};

use reusealloc::experiment::{
    evaluate, generate_synthetic, mean_and_variance, metrics_from_trajectory_csv, run_on_instance,
    ExperimentConfig, InstanceSource, MetricSeries, Summary, SyntheticParams,
};
use reusealloc::model::InstanceFile;
use reusealloc::policy::PolicySpec;
use reusealloc::Error;

fn small_params() -> SyntheticParams {
    SyntheticParams {
        n_products: 5,
        n_customers: 8,
        max_assortment: 2,
        xi: 0.2,
        ..SyntheticParams::default()
    }
}

fn config(dir: &std::path::Path, policy: PolicySpec, trajectories: bool) -> ExperimentConfig {
    ExperimentConfig {
        horizon: 300,
        seeds: vec![0, 1, 2],
        output_dir: dir.to_path_buf(),
        xi: None,
        write_trajectories: trajectories,
        instance: InstanceSource::Synthetic(small_params()),
        policy,
    }
}

#[test]
fn metric_examples() {
    let m = MetricSeries::from_cumulative(&[vec![0.8]], vec![vec![0.0]], 1.0).unwrap();
    assert!((m.reward_gap[0][0] - 0.2).abs() < 1e-15);
    assert_eq!(m.normalized_reward[0], 0.8);

    let m = MetricSeries::from_cumulative(&[vec![0.5], vec![1.0]], vec![vec![0.0]; 2], 0.5).unwrap();
    assert_eq!(m.reward_gap[1][0], 0.0);

    let m = MetricSeries::from_cumulative(&[vec![0.5, 2.0]], vec![vec![0.0]], 1.0).unwrap();
    assert_eq!(m.reward_gap[0], vec![0.5, -1.0]);
    assert_eq!(m.normalized_reward[0], 0.5);

    assert!(matches!(
        MetricSeries::from_cumulative(&[vec![1.0]], vec![vec![0.0]], 0.0),
        Err(Error::ZeroBenchmark(_))
    ));
}

#[test]
fn default_generator_has_3473_assortments() {
    let params = SyntheticParams {
        n_customers: 2,
        ..SyntheticParams::default()
    };
    let built = generate_synthetic(&params, 10_000).unwrap().build().unwrap();
    assert_eq!(built.instance.n_actions(), 3473);
    assert_eq!(built.instance.n_resources(), 14);
    assert!(built.instance.capacities().iter().all(|&c| c == 20.0));
    assert!(built.instance.bounds().d_max <= 2000);
}

#[test]
fn generation_is_deterministic_and_serializes_stably() {
    let a = InstanceFile::Mnl(generate_synthetic(&small_params(), 300).unwrap());
    let b = InstanceFile::Mnl(generate_synthetic(&small_params(), 300).unwrap());
    let ja = a.to_json().unwrap();
    assert_eq!(ja, b.to_json().unwrap());
    assert_eq!(InstanceFile::from_json(&ja).unwrap().to_json().unwrap(), ja);
    let other = SyntheticParams {
        seed: 2,
        ..small_params()
    };
    assert_ne!(InstanceFile::Mnl(generate_synthetic(&other, 300).unwrap()).to_json().unwrap(), ja);
}

#[test]
fn more_customers_extend_fewer() {
    let few = generate_synthetic(&SyntheticParams { n_customers: 100, ..SyntheticParams::default() }, 1000).unwrap();
    let many = generate_synthetic(&SyntheticParams { n_customers: 1000, ..SyntheticParams::default() }, 1000).unwrap();
    assert_eq!(few.product_features, many.product_features);
    assert_eq!(few.prices, many.prices);
    assert_eq!(few.customer_features[..], many.customer_features[..100]);
    assert_eq!(few.durations[..], many.durations[..100]);
}

#[test]
fn null_policy_earns_nothing() {
    let inst = generate_synthetic(&small_params(), 200).unwrap().build().unwrap().instance;
    let s = evaluate(&inst, &PolicySpec::Null, 200, &[0, 1]).unwrap();
    assert!(s.complete);
    assert!(s.normalized_reward_mean.iter().all(|&x| x == 0.0));
    assert!(s.reward_gap_mean.iter().flatten().all(|&g| g == 1.0));
}

#[test]
fn trajectories_reproduce_metric_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), PolicySpec::Greedy, true);
    let inst = cfg.build_instance().unwrap();
    let out = run_on_instance(&cfg, &inst).unwrap();
    assert!(out.summary.complete);
    assert_eq!(out.metric_paths.len(), 3);
    for seed in &cfg.seeds {
        let traj = File::open(dir.path().join(format!("greedy_seed{seed}_trajectory.csv"))).unwrap();
        let m = metrics_from_trajectory_csv(traj, out.summary.lambda_star).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let written = fs::read(dir.path().join(format!("greedy_seed{seed}_metrics.csv"))).unwrap();
        assert_eq!(buf, written, "seed {seed}");
    }
}

#[test]
fn summary_statistics_recompute_from_metric_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), PolicySpec::Osa { eta_bar: None }, false);
    let inst = cfg.build_instance().unwrap();
    let out = run_on_instance(&cfg, &inst).unwrap();
    let summary = Summary::load(&out.summary_path).unwrap();
    assert_eq!(summary, out.summary);

    let mut columns: Vec<Vec<Vec<f64>>> = Vec::new();
    for path in &out.metric_paths {
        let mut rdr = csv::Reader::from_path(path).unwrap();
        let rows: Vec<Vec<f64>> = rdr
            .records()
            .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
            .collect();
        columns.push(rows);
    }
    let nr = summary.reward_gap_mean[0].len();
    for t in 0..cfg.horizon {
        let nrm: Vec<f64> = columns.iter().map(|rows| rows[t][1 + nr]).collect();
        let (m, v) = mean_and_variance(&nrm);
        assert!((m - summary.normalized_reward_mean[t]).abs() <= 1e-12);
        assert!((v - summary.normalized_reward_variance[t]).abs() <= 1e-12);
        for i in 0..nr {
            let g: Vec<f64> = columns.iter().map(|rows| rows[t][1 + i]).collect();
            let (m, v) = mean_and_variance(&g);
            assert!((m - summary.reward_gap_mean[t][i]).abs() <= 1e-12);
            assert!((v - summary.reward_gap_variance[t][i]).abs() <= 1e-12);
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let spec = PolicySpec::Imwu { delta: 0.1 };
    let c1 = config(d1.path(), spec.clone(), false);
    let c2 = config(d2.path(), spec, false);
    let o1 = run_on_instance(&c1, &c1.build_instance().unwrap()).unwrap();
    let o2 = run_on_instance(&c2, &c2.build_instance().unwrap()).unwrap();
    assert_eq!(o1.summary, o2.summary);
    assert_eq!(fs::read(&o1.metric_paths[1]).unwrap(), fs::read(&o2.metric_paths[1]).unwrap());
    assert_eq!(o1.summary.violations, 0);
}

#[test]
fn config_errors() {
    let base = "[instance]\nsource = \"synthetic\"\n[policy]\nname = \"imwu\"\n";
    assert!(matches!(ExperimentConfig::from_toml(&format!("horizon = 0\n{base}")), Err(Error::Config(_))));
    assert!(matches!(
        ExperimentConfig::from_toml(&format!("horizon = 5\nseeds = []\n{base}")),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        ExperimentConfig::from_toml("horizon = 5\n[instance]\nsource = \"synthetic\"\n[policy]\nname = \"imwu\"\ndelta = 1.5\n"),
        Err(Error::InvalidDelta(_))
    ));
    assert!(ExperimentConfig::from_toml("horizon = 5\n[instance]\nsource = \"nowhere\"\n[policy]\nname = \"null\"\n").is_err());
    let cfg = ExperimentConfig::from_toml(&format!("horizon = 5\nxi = 0.5\n{base}")).unwrap();
    assert_eq!(cfg.policy, PolicySpec::Imwu { delta: 0.1 });
    assert!(cfg.build_instance().unwrap().capacities().iter().all(|&c| c == 2.0));
}
