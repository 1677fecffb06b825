use nnctl_core::ampc::pretrain::{excitation_signal, plant_response, pretrain_elman};
use nnctl_core::ampc::ArmijoParams;
use nnctl_core::ann::ElmanModel;
use nnctl_harness::config::builtin_scenario;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "desk".into());
    let seed: u64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(1);
    let passes: usize = std::env::args().nth(3).map(|s| s.parse().unwrap()).unwrap_or(5000);
    let config = builtin_scenario(&name).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x616d7063);
    let mut model = ElmanModel::random(config.ampc.elman_hidden, config.ampc.model_input_delay, &mut rng);
    let spec = &config.ampc.pretrain;
    let inputs = excitation_signal(spec, config.ts);
    let params = config.plant.to_schedule().params_at(0.0);
    let targets = plant_response(&params, config.plant.injection, config.delay_steps, &inputs).unwrap();
    let t0 = std::time::Instant::now();
    let outcome = pretrain_elman(&mut model, &inputs, &targets, &ArmijoParams::default(), 1e-15, passes);
    println!("seed {seed}: {} passes in {:.1}s, final mse {:.3e}, violations {}",
        outcome.passes, t0.elapsed().as_secs_f64(), outcome.final_mse, outcome.armijo_violations);
    for (i, mse) in outcome.mse_history.iter().enumerate() {
        if i % 500 == 0 || i == outcome.mse_history.len() - 1 {
            println!("  pass {i:5}: mse {mse:.6e}");
        }
    }
}
