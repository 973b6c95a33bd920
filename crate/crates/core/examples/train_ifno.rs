//! Generate a small setting-I dataset and train an IFNO on it.
//!
//! cargo run --release --example train_ifno -- [layers] [epochs] [n_train]

use std::time::Instant;

use ifno::darcy::make_dataset_setting1;
use ifno::train::{evaluate, train, TrainConfig};
use ifno::{HyperParams, OperatorModel, Variant};

fn main() -> ifno::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let layers = args.first().copied().unwrap_or(4);
    let epochs = args.get(1).copied().unwrap_or(20);
    let n_train = args.get(2).copied().unwrap_or(100);
    let n_test = 50;

    let started = Instant::now();
    let data = make_dataset_setting1(n_train + n_test, 0, 241, 8)?;
    println!(
        "generated {} samples on {}x{} in {:.1}s",
        data.len(),
        data.samples[0].input.nx(),
        data.samples[0].input.ny(),
        started.elapsed().as_secs_f64()
    );
    let (train_split, test_split) = data.split(n_train)?;

    let hyper = HyperParams { d: 16, d_f: 3, d_u: 1, d_q: 128, k1: 8, k2: 8, layers, variant: Variant::Ifno };
    let mut model = OperatorModel::init(hyper, 0)?;
    model.fit_normalization(train_split)?;
    let config = TrainConfig { epochs, decay_every: (epochs / 5).max(1), ..TrainConfig::default() };

    let started = Instant::now();
    let (model, history) = train(model, train_split, test_split, &config)?;
    for r in &history.records {
        println!(
            "epoch {:3}  lr {:.2e}  train {:.4e}  test {:.4e}  {:.2}s",
            r.epoch, r.lr, r.train_loss, r.test_metric, r.seconds
        );
    }
    let (mean, se) = evaluate(&model, test_split)?;
    println!("L={layers}: test {mean:.4e} +- {se:.1e} after {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
