//! Continual backpropagation and ReDo on a small network: which units they
//! pick and what a reset does to the weights.

use plasticity::optim::{OptimConfig, Optimizer};
use plasticity::reinit::{cbp::contribution_utility, cbp_step, redo::dormancy_scores, redo_step, CbpConfig, CbpState, RedoConfig};
use plasticity::{Architecture, LayerNormMode, Matrix, Network};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> plasticity::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut net = Network::new(&Architecture::new(vec![4, 6, 3], LayerNormMode::None), 1)?;
    net.dense_mut(0).bias[1] = -10.0; // never active
    let x = Matrix::from_vec(5, 4, (0..20).map(|i| (i % 4) as f64 * 0.5).collect())?;
    let cache = net.forward(&x)?.1;

    println!("dormancy scores     {:.3?}", dormancy_scores(&cache, 0));
    println!("contribution        {:.3?}", contribution_utility(&net, &cache, 0));

    let mut opt = Optimizer::new(OptimConfig::sgd(0.05), &net)?;
    let mut redo_net = net.clone();
    let n = redo_step(&mut redo_net, &cache, &RedoConfig { frequency: 1, threshold: 0.1 }, &mut opt, 0, &mut rng)?;
    println!("ReDo reset {n} unit(s); outgoing weights of unit 1 now {:?}",
        (0..3).map(|o| redo_net.dense(1).weights.get(o, 1)).collect::<Vec<_>>());

    let mut state = CbpState::new(&net);
    let cfg = CbpConfig { replacement_rate: 0.2, maturity_threshold: 2 };
    for step in 0..5 {
        let replaced = cbp_step(&mut net, &cache, &cfg, &mut state, &mut opt, &mut rng)?;
        println!("CBP update {step}: replaced {replaced}, ages {:?}, accumulator {:.2}", state.ages[0], state.accumulators[0]);
    }
    Ok(())
}
