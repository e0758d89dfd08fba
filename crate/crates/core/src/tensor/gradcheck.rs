//! Central finite-difference checks against the reverse-mode gradients.
//!
//! The numeric side only ever evaluates the forward closure, so it stays
//! independent of every backward rule it is used to verify.

use super::{no_grad, Tensor};
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct Probe {
    pub param: usize,
    pub index: usize,
    pub analytic: f32,
    pub numeric: f32,
    /// `|forward slope - backward slope|` of the difference quotients. Near
    /// zero for smooth points; large when the step straddles a kink such as
    /// a ReLU switching, where the central difference is meaningless.
    pub asymmetry: f32,
}

impl Probe {
    /// `|a - n| / max(|a|, |n|, floor)`; the floor keeps near-zero gradients
    /// from turning f32 rounding noise into huge relative errors.
    pub fn relative_error(&self, floor: f32) -> f32 {
        let scale = self.analytic.abs().max(self.numeric.abs()).max(floor);
        (self.analytic - self.numeric).abs() / scale
    }
}

/// Fixed pseudo-random readout weights in [-1, 1); a single-element output
/// gets weight 1 so scalar losses are checked as-is.
fn readout_weights(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    (0..len)
        .map(|_| {
            // splitmix64
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

fn weighted_sum(t: &Tensor, w: &[f64]) -> f64 {
    t.data().iter().zip(w).map(|(&v, &w)| v as f64 * w).sum()
}

/// Central difference of the weighted readout of `f` with respect to one
/// entry of `param`, and the asymmetry of the two one-sided quotients. The
/// readout is reduced in f64 so that only the op's own f32 rounding enters
/// the difference quotient.
pub fn numeric_derivative(f: &dyn Fn() -> Result<Tensor>, weights: &[f64], param: &Tensor, index: usize, h: f32) -> Result<(f32, f32)> {
    let _guard = no_grad();
    let original = param.data()[index];
    // The f32 steps actually taken, not the nominal h.
    let (hi, lo) = (original + h, original - h);
    let centre = f().map(|t| weighted_sum(&t, weights));
    param.update_data(|d| d[index] = hi);
    let plus = f().map(|t| weighted_sum(&t, weights));
    param.update_data(|d| d[index] = lo);
    let minus = f().map(|t| weighted_sum(&t, weights));
    param.update_data(|d| d[index] = original);
    let (plus, minus, centre) = (plus?, minus?, centre?);
    let (up, down) = (hi as f64 - original as f64, original as f64 - lo as f64);
    let central = (plus - minus) / (up + down);
    let asymmetry = ((plus - centre) / up - (centre - minus) / down).abs();
    Ok((central as f32, asymmetry as f32))
}

/// Runs `f` once with recording, backpropagates a fixed random readout of
/// its output, and compares the analytic gradient against central
/// differences at each `(param, index)` location.
pub fn check(f: &dyn Fn() -> Result<Tensor>, params: &[Tensor], locations: &[(usize, usize)], h: f32) -> Result<Vec<Probe>> {
    params.iter().for_each(Tensor::zero_grad);
    let out = f()?;
    let weights = readout_weights(out.numel());
    let w = Tensor::new(weights.iter().map(|&v| v as f32).collect(), out.shape())?;
    out.mul(&w)?.sum().backward()?;
    let grads: Vec<Vec<f32>> = params
        .iter()
        .map(|p| p.grad().unwrap_or_else(|| vec![0.0; p.numel()]))
        .collect();
    params.iter().for_each(Tensor::zero_grad);

    locations
        .iter()
        .map(|&(param, index)| {
            let (numeric, asymmetry) = numeric_derivative(f, &weights, &params[param], index, h)?;
            Ok(Probe {
                param,
                index,
                analytic: grads[param][index],
                numeric,
                asymmetry,
            })
        })
        .collect()
}

/// Every entry of every parameter.
pub fn check_all(f: &dyn Fn() -> Result<Tensor>, params: &[Tensor], h: f32) -> Result<Vec<Probe>> {
    let locations: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(p, t)| (0..t.numel()).map(move |i| (p, i)))
        .collect();
    check(f, params, &locations, h)
}

pub fn max_relative_error(probes: &[Probe], floor: f32) -> f32 {
    probes.iter().map(|p| p.relative_error(floor)).fold(0.0, f32::max)
}

/// Splits off probes whose step straddles a kink: one-sided slopes differing
/// by more than `max_asymmetry`. Only the numeric side decides, so a wrong
/// analytic gradient cannot hide here.
pub fn split_kinks(probes: &[Probe], max_asymmetry: f32) -> (Vec<Probe>, Vec<Probe>) {
    probes.iter().partition(|p| p.asymmetry <= max_asymmetry)
}
