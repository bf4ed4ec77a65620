// Scratch harness for tuning the synthetic presets. Not part of the build.

use pmiv::config::{Mode, VectorizeConfig};
use pmiv::forest::{confusion_metrics, predict, train, ForestConfig, Label};
use pmiv::synth;
use pmiv::vectorize::Vectorizer;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;

fn run(mode: Mode, corpus: &[(pmiv::ast::FileDocument, Label)], seed: u64) -> f64 {
    let vectorizer = Vectorizer::<f64>::new(VectorizeConfig::with_mode(mode)).unwrap();
    let vectors: Vec<_> = corpus
        .par_iter()
        .map(|(doc, _)| vectorizer.vectorize(doc).unwrap())
        .collect();
    let labels: Vec<Label> = corpus.iter().map(|(_, l)| *l).collect();

    let mut order: Vec<usize> = (0..vectors.len()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n = order.len();
    let train_end = (n as f64 * 0.7) as usize;
    let val_end = (n as f64 * 0.8) as usize;
    let train_idx = &order[..train_end];
    let test_idx = &order[val_end..];

    let train_vs: Vec<_> = train_idx.iter().map(|&i| vectors[i].clone()).collect();
    let train_ls: Vec<_> = train_idx.iter().map(|&i| labels[i]).collect();
    let cfg = ForestConfig {
        seed,
        ..ForestConfig::default()
    };
    let model = train(&train_vs, &train_ls, &cfg).unwrap();

    let test_truth: Vec<Label> = test_idx.iter().map(|&i| labels[i]).collect();
    let test_pred: Vec<Label> = test_idx
        .iter()
        .map(|&i| predict(&model, &vectors[i]).unwrap().0)
        .collect();
    confusion_metrics(&test_truth, &test_pred).accuracy
}

fn main() {
    let files = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(300usize);
    let t0 = std::time::Instant::now();
    for seed in [1u64, 2, 3] {
        let corpus = synth::generate_topology_only(&synth::topology_spec(files, seed)).unwrap();
        let pmiv_acc = run(Mode::Pmiv, &corpus, seed);
        let umiv_acc = run(Mode::Umiv, &corpus, seed);
        println!(
            "topology seed {seed}: pmiv {:.3} umiv {:.3} gap {:+.3}",
            pmiv_acc,
            umiv_acc,
            pmiv_acc - umiv_acc
        );
    }
    for seed in [1u64] {
        let corpus = synth::generate(&synth::texture_spec(files, seed)).unwrap();
        let pmiv_acc = run(Mode::Pmiv, &corpus, seed);
        println!("texture seed {seed}: pmiv {:.3}", pmiv_acc);
    }
    println!("elapsed: {:.1}s", t0.elapsed().as_secs_f64());
}
