//! Evaluate untrained FNO and IFNO models on one setting-I sample, at the
//! training resolution and on a finer grid.
//!
//! cargo run --release --example forward_pass -- [layers]

use ifno::darcy::make_dataset_setting1;
use ifno::operator::count_params;
use ifno::train::relative_l2;
use ifno::{HyperParams, OperatorModel, Variant};

fn main() -> ifno::Result<()> {
    let layers = std::env::args().nth(1).map(|s| s.parse().expect("integer depth")).unwrap_or(4);
    let coarse = make_dataset_setting1(1, 0, 241, 8)?;
    let fine = make_dataset_setting1(1, 0, 241, 4)?;

    for variant in [Variant::Fno, Variant::Ifno] {
        let hyper = HyperParams::darcy_setting1(variant, layers);
        let mut model = OperatorModel::init(hyper, 0)?;
        model.fit_normalization(&coarse.samples)?;
        for data in [&coarse, &fine] {
            let s = &data.samples[0];
            let pred = model.forward(&s.input)?;
            println!(
                "{variant} L={layers} ({} parameters) on {}x{}: relative error {:.3}",
                count_params(&hyper),
                pred.nx(),
                pred.ny(),
                relative_l2(&pred, &s.output)?
            );
        }
    }
    Ok(())
}
