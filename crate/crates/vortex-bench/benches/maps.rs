use criterion::{black_box, criterion_group, criterion_main, Criterion};
use vortex_bench::standard_perturbation;
use vortex_core::generating::Generating;
use vortex_core::mather::{periodic_orbit, OrbitOpts};
use vortex_core::poincare::{angle_grid, boundary_frequencies, working_strip, StripOpts};
use vortex_core::{Flow, Tolerances};

fn bench_field(c: &mut Criterion) {
    let pert = standard_perturbation();
    c.bench_function("regularized field with Jacobian", |b| {
        b.iter(|| {
            pert.field_jacobian(black_box(0.3), black_box(10.0), black_box(1.7))
                .unwrap()
        })
    });
}

fn bench_poincare(c: &mut Criterion) {
    let pert = standard_perturbation();
    let flow = Flow::new(&pert);
    c.bench_function("poincare map at r0 = 10", |b| {
        b.iter(|| flow.poincare(black_box(10.0), black_box(0.4)).unwrap())
    });
    c.bench_function("poincare map at r0 = 1000", |b| {
        b.iter(|| flow.poincare(black_box(1000.0), black_box(0.4)).unwrap())
    });
}

fn bench_generating(c: &mut Criterion) {
    let pert = standard_perturbation();
    let tol = Tolerances::default();
    let strip = working_strip(&pert, tol, &StripOpts::default()).unwrap();
    let flow = Flow::new(&pert)
        .with_tolerances(tol)
        .with_entry_floor(strip.a_star);
    let window = boundary_frequencies(&flow, strip.r_bar, &angle_grid(16)).unwrap();
    let gen = Generating::new(&flow, strip, window);
    let mut x = 0.0f64;
    c.bench_function("generating function evaluation (cold cache)", |b| {
        b.iter(|| {
            // Distinct arguments each call so the memo cache never hits.
            x += 1e-7;
            gen.eval(black_box(x), black_box(x + 9.0)).unwrap()
        })
    });
}

fn bench_orbit(c: &mut Criterion) {
    let pert = standard_perturbation();
    let tol = Tolerances::default();
    let strip = working_strip(&pert, tol, &StripOpts::default()).unwrap();
    let flow = Flow::new(&pert)
        .with_tolerances(tol)
        .with_entry_floor(strip.a_star);
    let window = boundary_frequencies(&flow, strip.r_bar, &angle_grid(16)).unwrap();
    let opts = OrbitOpts::default();
    c.bench_function("periodic orbit (3, 2)", |b| {
        b.iter(|| {
            // Fresh evaluator per solve so the cache does not carry over.
            let gen = Generating::new(&flow, strip, window.clone());
            periodic_orbit(&gen, black_box(3), black_box(2), None, &opts).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_field,
    bench_poincare,
    bench_generating,
    bench_orbit
);
criterion_main!(benches);
