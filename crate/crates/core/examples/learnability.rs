use std::time::Instant;

use phml_core::forest::{self, TrainConfig};
use phml_core::geometry::{generate_structure, synthetic_target, ParamVector, SyntheticSpec};
use phml_core::pipeline::{featurize, PipelineConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map_or(1000, |s| s.parse().unwrap());
    let trees: usize = args.get(2).map_or(500, |s| s.parse().unwrap());
    let probe: f64 = args.get(3).map_or(1.9, |s| s.parse().unwrap());
    let spec = SyntheticSpec { probe_radius: probe, ..SyntheticSpec::default() };
    let mut vocab = ParamVector::vocabulary();
    vocab.shuffle(&mut ChaCha8Rng::seed_from_u64(7));
    vocab.truncate(n);
    let config = PipelineConfig::default();
    let t = Instant::now();
    let rows: Vec<(Vec<f64>, f64)> = vocab
        .par_iter()
        .map(|p| {
            let c = generate_structure(p, &spec).unwrap();
            let y = synthetic_target(&c, &spec.grid, spec.probe_radius).unwrap();
            (featurize(&c, &config).unwrap().features.0, y)
        })
        .collect();
    println!("featurize {:?}", t.elapsed());
    let (x, y): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let split = n * 4 / 5;
    let t = Instant::now();
    let f = forest::train(&x[..split], &y[..split], &TrainConfig { n_trees: trees, seed: 1, ..TrainConfig::default() }).unwrap();
    println!("train {:?}", t.elapsed());
    let pred = forest::predict_all(&f, &x[split..]).unwrap();
    println!("holdout r2 {}", forest::r2(&pred, &y[split..]).unwrap());
    let (lo, hi) = y.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    println!("y range {lo} {hi}");
}
