// Work-group presets and tuning against a synthetic cost surface.

use inferplan::dispatch::{
    preset_work_group, select_work_group, select_work_group_with, AdrenoModel, ConvConfig, ConvKind, SearchMode,
    SyntheticBowl,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for gpu in AdrenoModel::ALL {
        let conv = preset_work_group(&gpu.to_string(), ConvKind::Conv2d)?;
        let dw = preset_work_group(&gpu.to_string(), ConvKind::DepthwiseConv)?;
        println!("{gpu}: conv_2d {:?}, depthwise_conv {:?}", conv.as_tuple(), dw.as_tuple());
    }

    let cfg = ConvConfig::pointwise(32, 32, 32, 32);
    let mut bowl = SyntheticBowl::noiseless();
    let descent = select_work_group(bowl.measure(), &cfg, 1).map_err(|e| format!("{e:?}"))?;
    let full = select_work_group_with(bowl.measure(), &cfg, 1, SearchMode::Exhaustive).map_err(|e| format!("{e:?}"))?;
    println!(
        "noiseless: descent {:?} after {} points, exhaustive {:?}",
        descent.config.as_tuple(),
        descent.points_measured,
        full.config.as_tuple()
    );

    let mut noisy = SyntheticBowl::new(3, 0.1);
    let pick = select_work_group(noisy.measure(), &cfg, 8).map_err(|e| format!("{e:?}"))?;
    println!(
        "10% noise, 8 trials: {:?}, estimate {:.2}, true cost {:.2}",
        pick.config.as_tuple(),
        pick.estimate,
        noisy.true_cost(pick.config)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
