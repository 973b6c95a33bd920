use ifno::darcy::{make_dataset_setting1, Sample};
use ifno::train::{evaluate, lr_at, shallow_to_deep, train, TrainConfig};
use ifno::{HyperParams, OperatorModel, Variant};

fn small_data(n: usize) -> Vec<Sample> {
    make_dataset_setting1(n, 3, 33, 4).unwrap().samples
}

fn small_hyper(variant: Variant, layers: usize) -> HyperParams {
    HyperParams { d: 6, d_f: 3, d_u: 1, d_q: 16, k1: 4, k2: 4, layers, variant }
}

fn config(epochs: usize, lr0: f64) -> TrainConfig {
    TrainConfig { epochs, lr0, decay_every: 50, batch_size: 4, seed: 9, ..TrainConfig::default() }
}

#[test]
fn overfits_a_single_sample() {
    let data = small_data(1);
    for variant in [Variant::Fno, Variant::Ifno] {
        let mut model = OperatorModel::init(small_hyper(variant, 2), 1).unwrap();
        model.fit_normalization(&data).unwrap();
        let before = evaluate(&model, &data).unwrap().0;
        let (model, history) = train(model, &data, &data, &config(200, 1e-2)).unwrap();
        let after = evaluate(&model, &data).unwrap().0;
        assert!(after < 0.1 * before, "{variant}: {before} -> {after}");
        assert!(history.train_loss().last().unwrap() < &history.train_loss()[0]);
    }
}

#[test]
fn training_is_bitwise_reproducible() {
    let data = small_data(6);
    let (tr, te) = data.split_at(4);
    let run = || {
        let mut model = OperatorModel::init(small_hyper(Variant::Ifno, 3), 5).unwrap();
        model.fit_normalization(tr).unwrap();
        train(model, tr, te, &config(4, 1e-3)).unwrap()
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(a.to_checkpoint_bytes().unwrap(), b.to_checkpoint_bytes().unwrap());
    assert_eq!(ha.to_csv(false), hb.to_csv(false));
}

#[test]
fn history_follows_the_step_schedule() {
    let data = small_data(3);
    let cfg = TrainConfig { epochs: 7, lr0: 4e-3, decay_every: 3, decay_ratio: 0.5, ..config(7, 4e-3) };
    let mut model = OperatorModel::init(small_hyper(Variant::Fno, 1), 2).unwrap();
    model.fit_normalization(&data).unwrap();
    let (_, history) = train(model, &data[..2], &data[2..], &cfg).unwrap();
    let want = [4e-3, 4e-3, 4e-3, 2e-3, 2e-3, 2e-3, 1e-3];
    assert_eq!(history.lr(), want.to_vec());
    for (e, lr) in want.iter().enumerate() {
        assert_eq!(lr_at(&cfg, e), *lr);
    }
}

#[test]
fn grown_network_halves_the_step_and_keeps_the_block() {
    let data = small_data(4);
    let mut model = OperatorModel::init(small_hyper(Variant::Ifno, 2), 4).unwrap();
    model.fit_normalization(&data).unwrap();
    let (trained, _) = train(model, &data[..3], &data[3..], &config(3, 1e-3)).unwrap();
    let deep = shallow_to_deep(&trained, 4).unwrap();
    assert_eq!(deep.hyper().layers, 4);
    assert_eq!(deep.params(), trained.params());
    assert_eq!(deep.hyper().dt(), 0.5 * trained.hyper().dt());
    assert!(shallow_to_deep(&trained, 1).is_err());
}
