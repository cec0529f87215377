use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Network, ParamId, ParamKind};
use crate::optim::Optimizer;

/// Resets hidden unit `unit` of hidden layer `layer`: incoming weights are
/// redrawn from their init distribution, the bias and every outgoing weight
/// are set to zero, and the optimizer state of all touched entries is
/// cleared.
pub fn reset_unit<R: Rng + ?Sized>(
    net: &mut Network,
    layer: usize,
    unit: usize,
    optimizer: &mut Optimizer,
    rng: &mut R,
) -> Result<()> {
    if layer >= net.num_hidden() {
        return Err(Error::Input(format!("layer {layer} is not a hidden layer")));
    }
    let width = net.dense(layer).fan_out();
    if unit >= width {
        return Err(Error::Input(format!("unit {unit} out of range for width {width}")));
    }
    let fan_in = net.dense(layer).fan_in();

    let dense = net.dense_mut(layer);
    let init = dense.weight_init;
    init.fill(dense.weights.row_mut(unit), rng);
    dense.bias[unit] = 0.0;

    let next = net.dense_mut(layer + 1);
    let next_in = next.fan_in();
    let next_out = next.fan_out();
    for o in 0..next_out {
        next.weights.set(o, unit, 0.0);
    }

    let index = |id: ParamId| net.param_index(id).expect("parameter exists");
    let w_in = index(ParamId { layer, kind: ParamKind::Weight });
    let b_in = index(ParamId { layer, kind: ParamKind::Bias });
    let w_out = index(ParamId { layer: layer + 1, kind: ParamKind::Weight });
    let incoming: Vec<usize> = (unit * fan_in..(unit + 1) * fan_in).collect();
    let outgoing: Vec<usize> = (0..next_out).map(|o| o * next_in + unit).collect();
    optimizer.reset_at(w_in, &incoming)?;
    optimizer.reset_at(b_in, &[unit])?;
    optimizer.reset_at(w_out, &outgoing)?;
    Ok(())
}

/// Mean over the batch of `|x[:, j]|` for each column `j`.
pub(crate) fn mean_abs_columns(x: &crate::Matrix) -> Vec<f64> {
    let mut out = vec![0.0; x.cols()];
    for r in 0..x.rows() {
        for (o, v) in out.iter_mut().zip(x.row(r)) {
            *o += v.abs();
        }
    }
    let m = x.rows().max(1) as f64;
    out.iter_mut().for_each(|v| *v /= m);
    out
}
