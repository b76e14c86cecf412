//! False-positive probability of sampling against the largest withholding
//! that still blocks reconstruction.

use pandas_das::availability::{false_positive_bound, min_samples_for, SamplingParams};

fn main() {
    for s in [1, 10, 30, 50, 73, 100] {
        let p = false_positive_bound(&SamplingParams { s, n: 512, k: 256 }).expect("bound");
        println!("s = {s:>3}: {p:.3e}");
    }
    for target in [1e-3, 1e-6, 1e-9, 1e-12] {
        println!(
            "target {target:e}: n=512 needs {}, n=128 needs {}",
            min_samples_for(target, 512, 256).unwrap(),
            min_samples_for(target, 128, 64).unwrap()
        );
    }
}
