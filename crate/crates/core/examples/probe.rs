// scratch probe, deleted before finishing
use rand_distr::{Distribution, StandardNormal};
use xtreat::gev::{fit_mle, FitOptions};
use xtreat::sampler::block_maxima;
use xtreat::util::rng_from;

fn main() {
    for seed in 0..24u64 {
        let mut rng = rng_from(seed);
        let gauss: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let maxima = block_maxima(&gauss, 100).unwrap();
        let fit = fit_mle(&maxima, FitOptions::default()).unwrap();
        println!("seed {seed}: xi = {:+.4}", fit.params.xi);
    }
}
