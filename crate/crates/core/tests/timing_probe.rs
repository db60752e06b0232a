// Temporary: wall-clock probe for one paper-shaped training run.

use motionseg::synth::{generate, paper_shaped};
use motionseg::trainer::{train_single, TrainOptions};
use motionseg::types::{Hyperparams, Mode};

#[test]
#[ignore]
fn time_one_run() {
    let cfg = motionseg::synth::GeneratorConfig { fluctuation: 0.2, ..paper_shaped() };
    let t0 = std::time::Instant::now();
    let out = generate(&cfg, 1).unwrap();
    println!("generate: {:?}", t0.elapsed());
    let total: usize = out.corpus.iter().map(|s| s.len()).sum();
    println!("corpus samples: {total}, avg len {}", total / out.corpus.len());

    let h = Hyperparams {
        element_classes: 12,
        unit_classes: 8,
        max_element_len: 36,
        max_unit_len: 10,
        element_duration_mean: 16.0,
        unit_duration_mean: 5.0,
        iterations: 3,
        restarts: 1,
        gp_cap: 100,
        seed: 1,
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    let model = train_single(&out.corpus, &h, Mode::ElementUnigram, 0, 42, &TrainOptions::default()).unwrap();
    let dt = t0.elapsed();
    println!(
        "3 iterations: {:?}  (per iteration {:?}); trace {:?}",
        dt,
        dt / 3,
        model.loglik_trace
    );
    println!("projected 30-iteration run: {:?}", dt * 10);
}
