//! Stable rank, dead units and weight magnitude of a network before and
//! after its hidden units are pushed into the dead zone.

use plasticity::metrics::{avg_weight_magnitude, dead_unit_fraction, stable_rank};
use plasticity::{Architecture, Matrix, Network};

fn main() -> plasticity::Result<()> {
    let probe = Matrix::from_vec(50, 784, (0..50 * 784).map(|i| ((i * 31) % 255) as f64 / 255.0).collect())?;
    let mut net = Network::new(&Architecture::large_mnist(), 0)?;
    report("fresh", &net, &probe)?;
    for b in net.dense_mut(2).bias.iter_mut().take(60) {
        *b = -50.0;
    }
    report("60 of the last layer's units dead", &net, &probe)?;

    let rank_one = Matrix::from_vec(3, 3, vec![1.0, 2.0, 3.0, 2.0, 4.0, 6.0, -1.0, -2.0, -3.0])?;
    println!("rank-one matrix stable rank {:.6}", stable_rank(&rank_one).value);
    println!("zero matrix {:?}", stable_rank(&Matrix::zeros(2, 2)));
    Ok(())
}

fn report(label: &str, net: &Network, probe: &Matrix) -> plasticity::Result<()> {
    let cache = net.forward(probe)?.1;
    println!(
        "{label}: dead {:.3}, stable rank {:.2}, |w| {:.4}",
        dead_unit_fraction(net, probe)?,
        stable_rank(cache.last_hidden()).value,
        avg_weight_magnitude(net)
    );
    Ok(())
}
