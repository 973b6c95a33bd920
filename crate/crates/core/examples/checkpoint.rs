//! Save a model to the binary checkpoint format and read it back.

use ifno::{HyperParams, OperatorModel, Variant};

fn main() -> ifno::Result<()> {
    let model = OperatorModel::init(HyperParams::darcy_setting1(Variant::Ifno, 8), 3)?;
    let path = std::env::temp_dir().join("ifno-example.ckpt");
    model.save(&path)?;
    let back = OperatorModel::load(&path)?;
    let bytes = std::fs::metadata(&path)?.len();
    println!("{}: {} parameters, {bytes} bytes, identical: {}", path.display(), back.num_params(), back == model);
    std::fs::remove_file(&path)?;
    Ok(())
}
