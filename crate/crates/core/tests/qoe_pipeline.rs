use noma_qoe::qoe::{
    cmf_fit, cmf_predict, derive_profile, entropy, information_gain, rank_top_k, read_model, read_sessions,
    synth_dataset, write_model, write_sessions, CmfParams, Column, FactorTable, SynthParams,
};
use noma_qoe::rng::{keyed_rng, Stream};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fitted(seed: u64) -> (noma_qoe::qoe::SyntheticDataset, noma_qoe::qoe::CmfModel) {
    let mut rng = keyed_rng(seed, Stream::Dataset, 0, 0);
    let data = synth_dataset(&mut rng, &SynthParams::default()).unwrap();
    let model = cmf_fit(
        &data.qoe,
        &data.user_features.values,
        &data.service_features.values,
        &CmfParams::default(),
    )
    .unwrap();
    (data, model)
}

#[test]
fn synthetic_dataset_shape() {
    let mut rng = keyed_rng(3, Stream::Dataset, 0, 0);
    let data = synth_dataset(&mut rng, &SynthParams::default()).unwrap();
    assert_eq!(data.qoe.n_users(), 200);
    assert_eq!(data.qoe.n_services(), 50);
    let frac = data.qoe.n_observed() as f64 / 10_000.0;
    assert!((frac - 0.4).abs() < 0.03, "observed fraction {frac}");
    assert_eq!(data.sessions.rows.len(), data.qoe.n_observed());
    for p in &data.truth {
        assert!((p.w_quality + p.w_stall - 1.0).abs() < 1e-12);
    }
}

#[test]
fn cmf_objective_never_increases() {
    let (_, model) = fitted(1);
    assert!(model.trace.len() > 2);
    for w in model.trace.windows(2) {
        assert!(w[1] <= w[0], "objective rose from {} to {}", w[0], w[1]);
    }
}

#[test]
fn profiles_are_recovered() {
    for seed in [1, 2] {
        let (data, model) = fitted(seed);
        let mae: f64 = data
            .truth
            .iter()
            .map(|t| {
                let p = derive_profile(&model, t.user_id, &data.service_features).unwrap();
                (p.w_quality - t.w_quality).abs()
            })
            .sum::<f64>()
            / data.truth.len() as f64;
        assert!(mae <= 0.15, "seed {seed}: mae {mae}");
    }
}

#[test]
fn held_out_scores_are_predicted() {
    let (data, model) = fitted(4);
    let mut err = 0.0;
    let mut n = 0;
    for u in 0..data.qoe.n_users() {
        for s in 0..data.qoe.n_services() {
            if !data.qoe.observed[(u, s)] {
                err += (cmf_predict(&model, u, s).unwrap() - data.qoe.scores[(u, s)]).powi(2);
                n += 1;
            }
        }
    }
    let rmse = (err / n as f64).sqrt();
    assert!(rmse < 0.12, "held-out rmse {rmse}");
}

#[test]
fn model_dump_round_trip_keeps_predictions() {
    let (data, model) = fitted(5);
    let profiles: Vec<_> = (0..5)
        .map(|u| derive_profile(&model, u, &data.service_features).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.txt");
    write_model(&model, &profiles, &path).unwrap();
    let (back, back_profiles) = read_model(&path).unwrap();
    assert_eq!(back_profiles, profiles);
    for (u, s) in [(0, 0), (17, 33), (199, 49)] {
        assert_eq!(cmf_predict(&back, u, s).unwrap(), cmf_predict(&model, u, s).unwrap());
    }
}

#[test]
fn sessions_round_trip_and_refit() {
    let mut rng = keyed_rng(6, Stream::Dataset, 0, 0);
    let data = synth_dataset(&mut rng, &SynthParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sessions.csv");
    write_sessions(&data.sessions, &path).unwrap();
    let back = read_sessions(&path).unwrap();
    assert_eq!(back, data.sessions);
    let (y, _, xs) = back.to_matrices();
    assert_eq!(y.observed, data.qoe.observed);
    assert_eq!(xs.values, data.service_features.values);
}

fn label_and_noise(n: usize, seed: u64) -> (Vec<i64>, Vec<f64>, Vec<i64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label: Vec<i64> = (0..n).map(|_| rng.random_range(0..3)).collect();
    let numeric: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let categorical: Vec<i64> = (0..n).map(|_| rng.random_range(0..4)).collect();
    (label, numeric, categorical)
}

#[test]
fn information_gain_bounds_on_large_tables() {
    let (label, numeric, categorical) = label_and_noise(10_000, 8);
    let y = Column::Categorical(label.clone());
    let h = entropy(&label.iter().map(|&v| v as usize).collect::<Vec<_>>());
    assert!(information_gain(&Column::Numeric(numeric), &y).unwrap() < 0.01);
    assert!(information_gain(&Column::Categorical(categorical), &y).unwrap() < 0.01);
    let copy = information_gain(&Column::Categorical(label.clone()), &y).unwrap();
    assert!((copy - h).abs() <= 0.01 * h);

    // A numeric label against its own numeric copy: the median split
    // lines up with an equal-frequency bin edge.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
    let ig = information_gain(&Column::Numeric(v.clone()), &Column::Numeric(v)).unwrap();
    assert!((ig - 1.0).abs() <= 0.01);
}

#[test]
fn ranking_puts_informative_factors_first() {
    let (label, numeric, categorical) = label_and_noise(5_000, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // Mostly-copied label: informative but not perfect.
    let noisy: Vec<i64> = label
        .iter()
        .map(|&l| if rng.random_bool(0.8) { l } else { rng.random_range(0..3) })
        .collect();
    let table = FactorTable {
        names: vec!["noise_num".into(), "noise_cat".into(), "noisy_copy".into(), "copy".into()],
        factors: vec![
            Column::Numeric(numeric),
            Column::Categorical(categorical),
            Column::Categorical(noisy),
            Column::Categorical(label.clone()),
        ],
        label: Column::Categorical(label),
    };
    let top = rank_top_k(&table, 2).unwrap();
    assert_eq!(top[0].0, "copy");
    assert_eq!(top[1].0, "noisy_copy");
}
