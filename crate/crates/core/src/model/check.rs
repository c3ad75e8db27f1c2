use super::{Mode, Model, ModelConfig, ModelError};
use crate::nn::cross_entropy_masked;
use crate::nn::gradcheck::{gradcheck_floored, GradcheckReport, DEFAULT_STEP};
use crate::rng::SplitMix64;
use crate::Tensor;

/// Relative-error denominator floor for the end-to-end check. The loss is
/// O(1), so central differences at the default step resolve gradients to
/// about 1e-11; entries below 1e-6 are compared in absolute terms.
pub const E2E_GRAD_FLOOR: f64 = 1e-6;

/// Shape of the end-to-end check: an 8×8 patch with 4 composites of 3
/// bands, 20 days of 2 weather channels and 3 classes.
pub fn gradcheck_config(mode: Mode) -> ModelConfig {
    ModelConfig {
        sat_channels: 3,
        weather_channels: 2,
        classes: 3,
        conv_widths: vec![4, 5],
        lstm_hidden: 3,
        weather_hidden: 2,
        mode,
        sat_step_days: 15,
        patch_px: 8,
    }
}

/// Finite-difference check of the masked cross-entropy loss with respect to
/// every parameter of a randomly weighted model on random inputs.
/// Returns the worst coordinate over all parameters.
pub fn end_to_end_gradcheck(seed: u64, mode: Mode) -> Result<(String, GradcheckReport), ModelError> {
    let cfg = gradcheck_config(mode);
    let mut model = Model::new(cfg.clone(), seed)?;
    let mut rng = SplitMix64::derive(seed, 0x4752_4144);
    // Default init leaves attention at zero and many gradients near the
    // finite-difference noise floor; draw all weights from N(0, 0.4²) instead.
    for p in model.params_mut().params_mut() {
        p.value.data_mut().iter_mut().for_each(|v| *v = 0.4 * rng.normal());
    }

    let randn = |shape: &[usize], rng: &mut SplitMix64| {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.normal()).collect()).expect("shape")
    };
    let p = cfg.patch_px;
    let sat = randn(&[4, cfg.sat_channels, p, p], &mut rng);
    let weather = randn(&[20, cfg.weather_channels], &mut rng);
    let targets: Vec<u16> = (0..p * p).map(|_| rng.below(cfg.classes) as u16).collect();
    let mask: Vec<bool> = (0..p * p).map(|_| rng.bernoulli(0.8)).collect();

    let (_, grads) = model.loss_and_grads(&sat, Some(&weather), &targets, &mask)?;
    let mut worst: Option<(String, GradcheckReport)> = None;
    for (pi, param) in model.params().params().iter().enumerate() {
        let mut probe = model.clone();
        let all: Vec<usize> = (0..param.value.len()).collect();
        let rep = gradcheck_floored(
            |v| {
                probe.params_mut().params_mut()[pi].value.data_mut().copy_from_slice(v);
                probe
                    .forward(&sat, Some(&weather))
                    .ok()
                    .and_then(|f| cross_entropy_masked(&f.probs, &targets, &mask).ok())
                    .map_or(f64::NAN, |r| r.0)
            },
            param.value.data(),
            grads[pi].data(),
            DEFAULT_STEP,
            &all,
            E2E_GRAD_FLOOR,
        )?;
        if worst.as_ref().is_none_or(|(_, w)| rep.max_rel_err > w.max_rel_err) {
            worst = Some((param.name.clone(), rep));
        }
    }
    Ok(worst.expect("model has parameters"))
}
