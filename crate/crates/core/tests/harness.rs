mod common;

use common::small_gen;
use tmkl::baselines::FeatureMode;
use tmkl::data::Stance;
use tmkl::harness::{
    macro_f1, robustness_experiment, rolling_nowcast, rolling_nowcast_many, stratified_folds, HarnessConfig,
    ModelKind, ModelSpec, RobustnessConfig,
};
use tmkl::synth::{generate, GenConfig};

fn quick() -> HarnessConfig {
    HarnessConfig {
        grid: tmkl::harness::Grid {
            c: vec![0.1, 1.0, 10.0],
            gamma: vec![0.1, 1.0],
            lambda: vec![0.1, 1.0],
        },
        ..HarnessConfig::default()
    }
}

#[test]
fn macro_f1_edge_cases() {
    use Stance::{No, Yes};
    let truth = [Yes, No, No, Yes, No];
    assert_eq!(macro_f1(&truth, &truth).unwrap().macro_f1, 1.0);
    let pred = [Yes, Yes, No, No, No];
    assert_eq!(macro_f1(&pred, &truth).unwrap().macro_f1, macro_f1(&truth, &pred).unwrap().macro_f1);
    let mut truth = vec![No; 77];
    truth.extend(vec![Yes; 23]);
    let f1_no = 2.0 * 0.77 / (1.0 + 0.77);
    assert!((macro_f1(&[No; 100], &truth).unwrap().macro_f1 - f1_no / 2.0).abs() < 1e-12);
}

#[test]
fn folds_are_seeded() {
    let y: Vec<Stance> = (0..50).map(|i| if i % 4 == 0 { Stance::Yes } else { Stance::No }).collect();
    let a = stratified_folds(&y, 5, 3).unwrap();
    assert_eq!(a, stratified_folds(&y, 5, 3).unwrap());
    assert_ne!(a, stratified_folds(&y, 5, 4).unwrap());
}

#[test]
fn horizon_one_gives_one_row() {
    let ds = generate(&small_gen(7)).unwrap();
    let cfg = HarnessConfig { horizon: Some(1), ..quick() };
    let r = rolling_nowcast(&ds, ModelSpec::new(ModelKind::SvmW, None).unwrap(), &cfg).unwrap();
    assert_eq!(r.days.len(), 1);
    assert_eq!(r.days[0].n_train, 60);
}

#[test]
fn reruns_are_identical() {
    let ds = generate(&small_gen(8)).unwrap();
    let cfg = quick();
    let specs = [
        ModelSpec::new(ModelKind::SvmNt, None).unwrap(),
        ModelSpec::new(ModelKind::Mckl, None).unwrap(),
        ModelSpec::new(ModelKind::BaselineLr, Some(FeatureMode::Both)).unwrap(),
    ];
    let a = rolling_nowcast_many(&ds, &specs, &cfg).unwrap();
    let b = rolling_nowcast_many(&ds, &specs, &cfg).unwrap();
    for (x, y) in a.reports.iter().zip(&b.reports) {
        assert_eq!(x.to_json().unwrap(), y.to_json().unwrap());
    }
    let mckl = &a.reports[1];
    for d in &mckl.days {
        let w = d.kernel_weights.as_ref().unwrap();
        assert!((w.values().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn robustness_without_noise_changes_nothing() {
    let ds = generate(&small_gen(9)).unwrap();
    let cfg = HarnessConfig { horizon: Some(2), ..quick() };
    let none = robustness_experiment(&ds, &cfg, &RobustnessConfig { k: 0, runs: 2, ..Default::default() }).unwrap();
    assert!(none.deltas.iter().all(|d| d.delta_f1 == 0.0));

    let raw = HarnessConfig { normalize: false, ..cfg };
    let zero = RobustnessConfig { k: 5, runs: 2, zero_noise: true, ..Default::default() };
    let rep = robustness_experiment(&ds, &raw, &zero).unwrap();
    let mckl = rep.summary_for("mckl").unwrap();
    assert!(mckl.mean_delta_f1.abs() < 1e-9 && mckl.std_delta_f1 < 1e-9);
    assert!(rep.to_csv().starts_with("run,model,delta_f1\n"));
}

#[test]
fn null_generator_stays_near_chance() {
    // balanced classes, so that chance sits at 0.5 whatever a model predicts
    let gen = GenConfig {
        delta_max: 0.0,
        p_in_max: 0.5,
        n_train_yes: 200,
        n_train_no: 200,
        n_test_yes: 100,
        n_test_no: 100,
        ..GenConfig::default()
    };
    let ds = generate(&gen).unwrap();
    let specs = [
        ModelSpec::new(ModelKind::SvmN, None).unwrap(),
        ModelSpec::new(ModelKind::BaselineLr, Some(FeatureMode::Text)).unwrap(),
        ModelSpec::new(ModelKind::BaselineLr, Some(FeatureMode::Network)).unwrap(),
    ];
    let out = rolling_nowcast_many(&ds, &specs, &quick()).unwrap();
    for r in &out.reports {
        let f1 = r.days.last().unwrap().macro_f1;
        assert!((f1 - 0.5).abs() <= 0.1, "{}: {f1}", r.model);
    }
}

#[test]
fn network_baseline_beats_text_baseline_late() {
    let ds = generate(&GenConfig::default()).unwrap();
    let specs = [
        ModelSpec::new(ModelKind::BaselineLr, Some(FeatureMode::Text)).unwrap(),
        ModelSpec::new(ModelKind::BaselineLr, Some(FeatureMode::Network)).unwrap(),
    ];
    let out = rolling_nowcast_many(&ds, &specs, &HarnessConfig::default()).unwrap();
    let last = |i: usize| out.reports[i].days.last().unwrap().macro_f1;
    assert!(last(1) > last(0), "network {} vs text {}", last(1), last(0));
}
