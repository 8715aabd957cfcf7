use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ddr_core::mesh::{build_structured_mesh, MeshFamily};
use ddr_core::operators::Discretization;
use ddr_core::par::Execution;

fn local_operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("local_operators");
    group.sample_size(10);
    for (family, n, k) in [(MeshFamily::Cartesian, 16, 1), (MeshFamily::Hexagonal, 12, 2)] {
        let mesh = build_structured_mesh(family, n).expect("mesh");
        for exec in [Execution::Sequential, Execution::Parallel] {
            let id = BenchmarkId::new(format!("{exec:?}"), format!("{family}-{n}-k{k}"));
            group.bench_with_input(id, &mesh, |b, m| {
                b.iter(|| Discretization::new(m.clone(), k, exec).expect("discretization"))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, local_operators);
criterion_main!(benches);
