use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use sbm_core::kernels::{Horizon, KernelDescriptor, SpacePoint};
use sbm_core::particles::{simulate, KernelRegistry, SimConfig};

fn replicate(c: &mut Criterion) {
    let mut g = c.benchmark_group("replicate");
    g.sample_size(20);
    let cfg = SimConfig::new(3, 100, 1e-3, Horizon::Finite(0.1));
    let empty = KernelRegistry::new();
    let mut phi = KernelRegistry::new();
    for r in [0.1, 0.2, 0.3, 0.5] {
        phi.register(KernelDescriptor::Phi {
            center: SpacePoint::on_axis(3, r),
        });
    }
    // about N·t/dt particle-steps per replicate
    g.throughput(Throughput::Elements(10_000));
    g.bench_function("no_kernels", |b| b.iter(|| simulate(&cfg, &empty, black_box(1)).unwrap()));
    g.bench_function("four_phi_kernels", |b| b.iter(|| simulate(&cfg, &phi, black_box(1)).unwrap()));
    g.finish();
}

criterion_group!(benches, replicate);
criterion_main!(benches);
