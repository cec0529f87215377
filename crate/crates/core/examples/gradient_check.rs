//! Compares backprop gradients with central finite differences on a small
//! network, with and without layer norm.

use plasticity::nn::one_hot;
use plasticity::{Architecture, LayerNormMode, Matrix, Network};

fn main() -> plasticity::Result<()> {
    let x = Matrix::from_vec(4, 6, (0..24).map(|i| ((i * 7) % 11) as f64 / 11.0 - 0.4).collect())?;
    let targets = one_hot(&[0, 2, 1, 2], 3)?;
    let h = 1e-5;
    for mode in [LayerNormMode::None, LayerNormMode::Standard, LayerNormMode::Reparameterized] {
        let net = Network::new(&Architecture::new(vec![6, 5, 4, 3], mode), 1)?;
        let analytic = net.loss_and_grad(&x, &targets)?.grads;
        let mut probe = net.clone();
        let mut worst: f64 = 0.0;
        for (t, g) in analytic.tensors.iter().enumerate() {
            for (j, &a) in g.iter().enumerate() {
                let orig = probe.params()[t].values[j];
                probe.params_mut()[t].values[j] = orig + h;
                let up = probe.loss(&x, &targets)?;
                probe.params_mut()[t].values[j] = orig - h;
                let down = probe.loss(&x, &targets)?;
                probe.params_mut()[t].values[j] = orig;
                let n = (up - down) / (2.0 * h);
                worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
            }
        }
        println!("{mode:?}: {} parameters, max relative error {worst:.2e}", net.param_count());
    }
    Ok(())
}
