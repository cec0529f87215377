//! Selective weight reinitialization on one layer: utilities, both pruning
//! rules, and both ways of drawing replacement values.

use plasticity::init::InitSpec;
use plasticity::reinit::{compute_utility, prune_indices, reinit_values, PruningKind, ReinitMethod, UtilityKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> plasticity::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let weights = [0.30, -0.02, 0.11, -0.45, 0.001, 0.07, -0.20, 0.09];
    let grads = [0.01, 0.50, -0.02, 0.001, 0.3, 0.0, -0.04, 0.02];

    for kind in [UtilityKind::Gradient, UtilityKind::Magnitude] {
        let u = compute_utility(&weights, &grads, kind)?;
        let thr = prune_indices(&u, 0.5, PruningKind::Threshold, &mut rng)?;
        let prop = prune_indices(&u, 0.3, PruningKind::Proportional, &mut rng)?;
        println!("{kind:?}");
        println!("  utilities      {u:.4?}");
        println!("  threshold k=.5 {thr:?}");
        println!("  proportional   {prop:?}  (k·d = 2.4, so 2 or 3 entries)");
    }

    let spec = InitSpec::kaiming_uniform(weights.len());
    println!("resample: {:.4?}", reinit_values(3, &spec, ReinitMethod::Resample, &mut rng));
    println!("mean:     {:?}", reinit_values(3, &spec, ReinitMethod::Mean, &mut rng));
    Ok(())
}
