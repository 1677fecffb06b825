use nnctl_harness::config::builtin_scenario;
use nnctl_core::hdlnnc::HdlnncController;
use nnctl_core::plant::{self, DelayLine, PlantState};
use nnctl_core::reference::ReferenceGenerator;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "desk".into());
    let every: u64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(1000);
    let until: u64 = std::env::args().nth(3).map(|s| s.parse().unwrap()).unwrap_or(u64::MAX);
    let config = builtin_scenario(&name).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x68646c);
    let core_cfg = config.hdlnnc.to_core(config.steps());
    let mut ctrl = HdlnncController::new(&core_cfg, &mut rng).unwrap();
    let mut generator = ReferenceGenerator::new(config.reference.clone(), config.ts).unwrap();
    let schedule = config.plant.to_schedule();
    let mut state = PlantState::default();
    let mut line = DelayLine::new(config.delay_steps);
    let mut y_meas = 0.0;
    let mut abs_e_sum = 0.0;
    for k in 0..=config.steps().min(until) {
        let t = k as f64 * config.ts;
        let r = generator.reference_at(t).unwrap();
        let u = ctrl.control_step(r, y_meas).unwrap();
        abs_e_sum += (r - y_meas).abs();
        if k % every == 0 {
            let w_norm: f64 = ctrl.layer3.weights.iter().flatten().map(|w| w*w).sum::<f64>().sqrt();
            println!("k={k:6} t={t:8.3} r={r:+.4} y={y_meas:+.4} u={u:+.6} jac={:+.5} pred={:+.4} w3={w_norm:.4} mean|e|={:.5}",
                ctrl.model.jacobian, ctrl.model.prediction, abs_e_sum / (k+1) as f64);
        }
        if k < config.steps().min(until) {
            let params = schedule.params_at(t);
            let (next, y) = plant::step(&state, &params, u, config.plant.injection).unwrap();
            state = next;
            y_meas = line.push(y);
        }
    }
}
