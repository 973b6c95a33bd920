//! Reverse-mode gradients of a small random model against central differences.
//!
//! Biases start at zero, so a ReLU whose input is an exactly-zero state sits on
//! its kink, where the subgradient is 0 but a central difference sees 1/2.
//! Jittering every parameter moves the check off the kinks.

use ifno::darcy::make_dataset_setting1;
use ifno::randfield::RngStream;
use ifno::train::{batch_loss, gradients};
use ifno::{HyperParams, OperatorModel, Variant};

fn main() -> ifno::Result<()> {
    let data = make_dataset_setting1(2, 0, 33, 4)?;
    let step = 1e-6;
    for variant in [Variant::Fno, Variant::Ifno] {
        let hyper = HyperParams { d: 4, d_f: 3, d_u: 1, d_q: 8, k1: 3, k2: 3, layers: 2, variant };
        let mut model = OperatorModel::init(hyper, 1)?;
        model.fit_normalization(&data.samples)?;
        let mut jitter = RngStream::new(2, 0).draws();
        model.params_mut().iter_mut().for_each(|v| *v += 0.1 * jitter.normal());
        let g = gradients(&model, &data.samples)?;
        let mut worst: f64 = 0.0;
        for i in 0..model.num_params() {
            let mut plus = model.clone();
            plus.params_mut()[i] += step;
            let mut minus = model.clone();
            minus.params_mut()[i] -= step;
            let fd = (batch_loss(&plus, &data.samples)? - batch_loss(&minus, &data.samples)?) / (2.0 * step);
            worst = worst.max((g.values[i] - fd).abs() / g.values[i].abs().max(fd.abs()).max(1e-4));
        }
        println!("{variant}: {} parameters, worst relative error {worst:.2e}", model.num_params());
    }
    Ok(())
}
