use bagprop::dataset::{Coverage, Dataset, Instance};
use bagprop::inference::{auc, group_score, score_instances, truth_labels};
use bagprop::objective::{gradient, group_term, objective, Batch, Theta};
use bagprop::synth::{generate, random_problem, GroupSize, SynthConfig};
use bagprop::trainer::{train, Hyperparams, Model, TrainSummary};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn small_sgd_steps_never_increase_the_batch_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let p = random_problem(&mut rng, 8, 12, 4).unwrap();
        let batch = p.batch().unwrap();
        let before = objective(&p.theta, &batch);
        let mut theta = p.theta.clone();
        theta.descend(&gradient(&p.theta, &batch), 1e-6);
        let after = objective(&theta, &batch);
        assert!(after - before <= 1e-12, "{before} -> {after}");
    }
}

#[test]
fn training_lowers_the_full_objective() {
    let data: Dataset<f64> = generate(&SynthConfig {
        seed: 4,
        ..Default::default()
    })
    .unwrap();
    let model = train(&data, &Hyperparams::default()).unwrap();
    let all: Vec<usize> = (0..data.groups().len()).collect();
    let lambda = bagprop::objective::lambda_from_alpha(0.04, data.instances().len(), all.len());
    let full = Batch::dense(&data, &all, 1.0, lambda).unwrap();
    let start = objective(&Theta::zeros(2, false), &full);
    let end = objective(&model.theta, &full);
    assert!(end < start, "{end} !< {start}");

    let scores = score_instances(&model, data.instances()).unwrap();
    assert!(auc(&scores, &truth_labels(data.instances()).unwrap()).unwrap() > 0.5);
}

#[test]
fn training_ignores_ground_truth_labels() {
    let data: Dataset<f64> = generate(&SynthConfig {
        n_groups: 30,
        seed: 8,
        ..Default::default()
    })
    .unwrap();
    let flipped: Vec<Instance<f64>> = data
        .instances()
        .iter()
        .map(|i| {
            Instance::new(i.id(), i.features().to_vec()).with_label(!i.evaluation_label().unwrap())
        })
        .collect();
    let stripped: Vec<Instance<f64>> = data
        .instances()
        .iter()
        .map(|i| Instance::new(i.id(), i.features().to_vec()))
        .collect();
    let hp = Hyperparams {
        batch_groups: 7,
        seed: 3,
        ..Default::default()
    };
    let base = train(&data, &hp).unwrap();
    for instances in [flipped, stripped] {
        let other = Dataset::validate(instances, data.groups().to_vec(), Coverage::Strict)
            .unwrap()
            .dataset;
        assert_eq!(train(&other, &hp).unwrap().theta, base.theta);
    }
}

#[test]
fn single_precision_path_agrees_with_double() {
    let cfg = SynthConfig {
        n_groups: 40,
        seed: 6,
        ..Default::default()
    };
    let d64: Dataset<f64> = generate(&cfg).unwrap();
    let d32: Dataset<f32> = generate(&cfg).unwrap();
    let m64 = train(&d64, &Hyperparams::default()).unwrap();
    let m32 = train(&d32, &Hyperparams::default()).unwrap();
    for (a, b) in m64.theta.weights.iter().zip(&m32.theta.weights) {
        assert!(
            (a - f64::from(*b)).abs() < 1e-3 * a.abs().max(1.0),
            "{a} vs {b}"
        );
    }
    let s32 = score_instances(&m32, d32.instances()).unwrap();
    assert!(s32.iter().all(|&s| s > 0.0 && s < 1.0));
}

fn model_of(theta: Theta<f64>) -> Model<f64> {
    Model {
        dim: theta.dim(),
        theta,
        hyperparams: Hyperparams::default(),
        summary: TrainSummary {
            final_objective: 0.0,
            iterations: 0,
            uncovered_instances: 0,
            wall_time_secs: 0.0,
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_score_matches_group_term_mean(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng, 6, 12, 4).unwrap();
        let model = model_of(p.theta.clone());
        for (g, group) in p.dataset.groups().iter().enumerate() {
            let batch = Batch::dense(&p.dataset, &[g], 1.0, 1.0).unwrap();
            let mean = group_score(&model, group, &p.dataset).unwrap();
            let r = mean - group.score;
            prop_assert_eq!(group_term(&p.theta, &batch), r * r);
        }
    }

    #[test]
    fn datasets_round_trip_through_files(seed in 0u64..1000, size in 1usize..6) {
        let d: Dataset<f64> = generate(&SynthConfig { n_groups: 5, group_size: GroupSize::Range(1, size), seed, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.save_dir(dir.path()).unwrap();
        let back = Dataset::<f64>::load(dir.path().join("instances.jsonl"), dir.path().join("groups.jsonl"), None, Coverage::Strict).unwrap().dataset;
        prop_assert_eq!(&back, &d);
        let labels: Vec<_> = back.instances().iter().map(Instance::evaluation_label).collect();
        let orig: Vec<_> = d.instances().iter().map(Instance::evaluation_label).collect();
        prop_assert_eq!(labels, orig);
    }
}
