//! Train a shallow IFNO, reuse its block in a network twice as deep, and
//! compare the first epoch against a random start.
//!
//! cargo run --release --example shallow_to_deep -- [layers] [epochs]

use ifno::darcy::make_dataset_setting1;
use ifno::train::{shallow_to_deep, train, TrainConfig};
use ifno::{HyperParams, OperatorModel, Variant};

fn main() -> ifno::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let layers = args.first().copied().unwrap_or(2);
    let epochs = args.get(1).copied().unwrap_or(20);

    let data = make_dataset_setting1(60, 0, 121, 4)?;
    let (train_split, test_split) = data.split(40)?;
    let hyper = HyperParams { d: 16, d_f: 3, d_u: 1, d_q: 64, k1: 8, k2: 8, layers, variant: Variant::Ifno };
    let config = TrainConfig { epochs, lr0: 3e-3, decay_every: (epochs / 4).max(1), ..TrainConfig::default() };

    let mut shallow = OperatorModel::init(hyper, 0)?;
    shallow.fit_normalization(train_split)?;
    let (shallow, h) = train(shallow, train_split, test_split, &config)?;
    println!("L={layers}: final train loss {:.4e}", h.records.last().expect("epochs >= 1").train_loss);

    let one = TrainConfig { epochs: 1, ..config };
    let grown = shallow_to_deep(&shallow, 2 * layers)?;
    let (_, from_shallow) = train(grown, train_split, test_split, &one)?;
    let mut fresh = OperatorModel::init(hyper.with_depth(2 * layers), 0)?;
    fresh.fit_normalization(train_split)?;
    let (_, from_random) = train(fresh, train_split, test_split, &one)?;
    println!(
        "L={}: first-epoch loss {:.4e} from L={layers}, {:.4e} from random",
        2 * layers,
        from_shallow.records[0].train_loss,
        from_random.records[0].train_loss
    );
    Ok(())
}
