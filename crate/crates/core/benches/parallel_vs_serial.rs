//! Compares the data-parallel Monte-Carlo kernels against single-threaded
//! execution.
//!
//! With the default `parallel` feature the same code runs under the global
//! rayon pool ("parallel") and under a one-thread pool ("single-thread"),
//! which measures the rayon overhead as well as the speedup. Built with
//! `--no-default-features` the crate contains only the sequential loops
//! and a single "sequential" variant is measured.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use untrack_core::bitwise::{self, BitwiseParams};
use untrack_core::mech::{exact_untrackable_gamma, OracleBudget};
use untrack_core::prob::Probability;
use untrack_core::rappor::{self, RapporParams};
use untrack_core::rng::SeededRng;
use untrack_core::rnip::{self, RnipParams};

struct Workloads {
    rappor: RapporParams,
    bitwise: BitwiseParams,
    rnip: RnipParams,
    rng: SeededRng,
}

impl Workloads {
    fn new() -> Self {
        Workloads {
            rappor: RapporParams::chrome_deployment(7),
            bitwise: BitwiseParams::new(1.0, 1.0).unwrap(),
            rnip: RnipParams::new(16, 100, 1.0, Probability::clamped(1e-4)).unwrap(),
            rng: SeededRng::new(42),
        }
    }

    fn rappor_samples(&self) -> Vec<f64> {
        rappor::sample_trackability(&self.rappor, 8, 2_000, &self.rng).unwrap()
    }

    fn bitwise_round(&self) -> f64 {
        bitwise::simulate_frequency_round(&self.bitwise, 30_000, 70_000, &self.rng)
            .unwrap()
            .p0
    }

    fn rnip_collisions(&self) -> f64 {
        rnip::empirical_collision_rate(&self.rnip, 3, 5_000, &self.rng)
            .unwrap()
            .one_user
    }

    fn oracle(&self) -> f64 {
        let mech = bitwise::as_permanent_mechanism(&self.bitwise);
        exact_untrackable_gamma(&mech, 6, OracleBudget::default()).unwrap()
    }
}

type Kernel<'a> = Box<dyn Fn() -> f64 + Sync + 'a>;

fn bench_kernels(c: &mut Criterion) {
    let w = Workloads::new();
    let kernels: [(&str, Kernel); 4] = [
        (
            "rappor_trackability_samples",
            Box::new(|| w.rappor_samples()[0]),
        ),
        ("bitwise_round_100k", Box::new(|| w.bitwise_round())),
        ("rnip_collisions_5k", Box::new(|| w.rnip_collisions())),
        ("exact_oracle_k6", Box::new(|| w.oracle())),
    ];

    for (name, kernel) in &kernels {
        let mut group = c.benchmark_group(*name);
        group.sample_size(10);

        #[cfg(feature = "parallel")]
        {
            group.bench_function("parallel", |b| b.iter(|| black_box(kernel())));
            let single = rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .expect("single-thread pool");
            group.bench_function("single-thread", |b| {
                b.iter(|| single.install(|| black_box(kernel())))
            });
        }
        #[cfg(not(feature = "parallel"))]
        group.bench_function("sequential", |b| b.iter(|| black_box(kernel())));

        group.finish();
    }
}

criterion_group!(benches, bench_kernels);
criterion_main!(benches);
