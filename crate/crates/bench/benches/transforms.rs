use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gridwave::{analyze, dual_design, frame_bounds, synthesize_real};
use gridwave_bench::{design, noise};

fn transforms(c: &mut Criterion) {
    let mut g = c.benchmark_group("transform");
    g.sample_size(10);
    for frames in [16, 64] {
        let des = design(300.0, 253, 5, 254, frames);
        let x = noise(des.params.len, 1);
        let dual = dual_design(&des).unwrap();
        let coefs = analyze(&des, &x).unwrap();
        g.bench_with_input(BenchmarkId::new("analyze", frames), &x, |b, x| b.iter(|| analyze(&des, x).unwrap()));
        g.bench_with_input(BenchmarkId::new("synthesize", frames), &coefs, |b, c| {
            b.iter(|| synthesize_real(&dual, c).unwrap())
        });
    }
    g.finish();
}

fn frame(c: &mut Criterion) {
    let mut g = c.benchmark_group("frame");
    g.sample_size(10);
    for (m, m_c, d) in [(128, 2, 64), (253, 5, 254)] {
        let des = design(300.0, m, m_c, d, 16);
        let label = format!("M{m}_d{d}");
        g.bench_function(BenchmarkId::new("bounds", &label), |b| b.iter(|| frame_bounds(&des)));
        g.bench_function(BenchmarkId::new("dual", &label), |b| b.iter(|| dual_design(&des).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, transforms, frame);
criterion_main!(benches);
