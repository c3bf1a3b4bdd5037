use modkit_core::dataset::{generate_dataset, Dataset, DatasetConfig, Split};
use modkit_surrogate::eval::{evaluate_mae, split_mae, MaeTable};
use modkit_surrogate::train::Stage;
use modkit_surrogate::{train, Checkpoint, SurrogatePair, TrainConfig};

fn dataset(count: usize, splits: [f64; 3]) -> Dataset {
    generate_dataset(&DatasetConfig {
        count,
        splits,
        seed: 11,
        ..DatasetConfig::default()
    })
    .unwrap()
}

fn small_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        hidden_dim: 6,
        layers: 1,
        learning_rate: 5e-3,
        validate_every: 5,
        seed: 4,
        ..TrainConfig::default()
    }
}

fn mean_abs(d: &Dataset, split: Split, f: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for q in d.split(split) {
        let p = f(&q.i_l);
        s += p.iter().zip(&q.i_l).map(|(a, b)| (a - b).abs()).sum::<f64>();
        n += q.i_l.len();
    }
    s / n as f64
}

#[test]
fn training_lowers_the_loss_and_is_deterministic() {
    let d = dataset(10, [0.4, 0.2, 0.4]);
    let cfg = small_config(15);
    let init = SurrogatePair::for_dataset(&d, &cfg).unwrap();
    let (a, ha) = train(&init, &d, &cfg).unwrap();
    let (b, hb) = train(&init, &d, &cfg).unwrap();
    assert_eq!(a.modnet.params, b.modnet.params);
    assert_eq!(a.cirnet.params, b.cirnet.params);
    assert_eq!(ha, hb);
    for stage in [Stage::Modnet, Stage::Cirnet] {
        let r: Vec<_> = ha.stage(stage).collect();
        assert_eq!(r.len(), 15);
        assert!(r.last().unwrap().total < r[0].total, "{stage:?}: {} -> {}", r[0].total, r.last().unwrap().total);
        assert!(r.iter().all(|e| e.total.is_finite()));
    }
}

#[test]
fn ten_training_sequences_give_finite_errors() {
    let d = dataset(40, [0.25, 0.25, 0.5]);
    assert_eq!(d.splits.train.len(), 10);
    let cfg = small_config(5);
    let (pair, _) = train(&SurrogatePair::for_dataset(&d, &cfg).unwrap(), &d, &cfg).unwrap();
    let t = MaeTable::compute(&pair, &d).unwrap();
    assert!(t.train.is_finite() && t.val.is_finite() && t.test.is_finite(), "{t:?}");
}

#[test]
fn mae_of_reference_predictors() {
    let d = dataset(10, [0.4, 0.0, 0.6]);
    assert_eq!(split_mae(&d, Split::Train, |s| Ok(s.i_l.clone())).unwrap(), 0.0);
    let zero = split_mae(&d, Split::Train, |s| Ok(vec![0.0; s.i_l.len()])).unwrap();
    assert!((zero - mean_abs(&d, Split::Train, |i| vec![0.0; i.len()])).abs() < 1e-12);
    assert!(split_mae(&d, Split::Val, |s| Ok(s.i_l.clone())).is_err());
}

#[test]
fn zero_network_holds_the_initial_current() {
    let d = dataset(10, [0.4, 0.0, 0.6]);
    let cfg = TrainConfig {
        zero_init: true,
        ..small_config(0)
    };
    let (pair, h) = train(&SurrogatePair::for_dataset(&d, &cfg).unwrap(), &d, &cfg).unwrap();
    assert!(h.records.is_empty());
    let got = evaluate_mae(&pair, &d, Split::Test).unwrap();
    let want = mean_abs(&d, Split::Test, |i| vec![i[0]; i.len()]);
    assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let d = dataset(10, [0.4, 0.0, 0.6]);
    let cfg = small_config(3);
    let (pair, _) = train(&SurrogatePair::for_dataset(&d, &cfg).unwrap(), &d, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    Checkpoint::new(&pair, &cfg).save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.config, cfg);
    let back = loaded.into_pair().unwrap();
    assert_eq!(back.modnet.params, pair.modnet.params);
    assert_eq!(back.cirnet.params, pair.cirnet.params);
    assert_eq!(
        evaluate_mae(&back, &d, Split::Test).unwrap(),
        evaluate_mae(&pair, &d, Split::Test).unwrap()
    );
    let text = std::fs::read_to_string(&path).unwrap().replace("\"version\": 1", "\"version\": 99");
    assert!(Checkpoint::from_json(&text).is_err());
}
