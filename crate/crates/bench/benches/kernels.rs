use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use sbm_core::cumulants::{v_recursion, CumulantGrid};
use sbm_core::kernels::{expect_about, heat_radial, potential_radial, KernelDescriptor, SpacePoint};
use sbm_core::pde::{solve_radial, SolverSpec};
use sbm_core::quadrature::QuadratureSpec;

fn pointwise(c: &mut Criterion) {
    c.bench_function("heat_radial_d3", |b| b.iter(|| heat_radial(3, black_box(0.7), black_box(0.3))));
    c.bench_function("potential_radial_d3", |b| b.iter(|| potential_radial(3, black_box(0.7), black_box(0.3))));
    let phi = KernelDescriptor::Phi {
        center: SpacePoint::on_axis(3, 0.3),
    };
    let y = SpacePoint::new(&[0.1, -0.2, 0.05]).unwrap();
    c.bench_function("phi_eval", |b| b.iter(|| black_box(&phi).eval(black_box(&y))));
}

fn quadrature(c: &mut Criterion) {
    let spec = QuadratureSpec::default();
    c.bench_function("expect_about_log_plus", |b| {
        b.iter(|| {
            let k = KernelDescriptor::LogPlus {
                center: SpacePoint::on_axis(3, 0.3),
            };
            expect_about(3, 1.0, black_box(0.3), &|r| k.radial(3, r), &[1.0], &spec).unwrap()
        })
    });
}

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("solvers");
    g.sample_size(10);
    g.bench_function("cumulant_table_const_n4", |b| {
        b.iter(|| v_recursion(&KernelDescriptor::Const { a: 1.0 }, 3, 1.0, 4, &CumulantGrid::default()).unwrap())
    });
    g.bench_function("radial_pde_lambda1", |b| {
        b.iter(|| solve_radial(1.0, black_box(1e-6), &SolverSpec::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, pointwise, quadrature, solvers);
criterion_main!(benches);
