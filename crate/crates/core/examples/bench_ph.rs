use phml_core::geometry::*;
use phml_core::persistence::*;
use std::time::Instant;
fn main() {
    let spec = SyntheticSpec::default();
    let vocab = ParamVector::vocabulary();
    let r: f64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(35.8);
    let mut worst = 0.0f64;
    let t0 = Instant::now();
    let mut n = 0;
    for p in vocab.iter().step_by(37) {
        let c = generate_structure(p, &spec).unwrap();
        let t = Instant::now();
        let f = build_rips(&pairwise_distances(&c), 3, r).unwrap();
        let pairs = reduce(&f);
        let el = t.elapsed().as_secs_f64();
        if el > worst { worst = el; println!("{p} pts={} simplices={:?} pairs={} {:.3}s", c.len(), f.count_by_dim(), pairs.len(), el); }
        n += 1;
    }
    println!("{} clouds in {:.2}s", n, t0.elapsed().as_secs_f64());
}
