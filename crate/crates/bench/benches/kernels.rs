use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use cpesim_core::io::{presets, Preset};
use cpesim_core::{free_boundary, hydrostatics, stepper};
use cpesim_core::{Context, Field2, Grid, Regime, SimParams, VecField3};

fn ctx(regime: Regime, n: usize, nz: usize) -> Context {
    Context::new(Grid::new(n, n, nz).unwrap(), SimParams::new(regime)).unwrap()
}

fn spectral(c: &mut Criterion) {
    let ctx = ctx(Regime::GravityGamma2, 64, 9);
    let f = Field2::from_fn(&ctx.grid, |x, y| (2.0 * PI * x).sin() * (4.0 * PI * y).cos());
    c.bench_function("grad2 64x64", |b| b.iter(|| ctx.plan.grad2(black_box(&f))));
    let v = VecField3::from_fn(&ctx.grid, |x, y, z| ((2.0 * PI * y).sin() * z, (2.0 * PI * x).cos()));
    c.bench_function("div3 64x64x9", |b| b.iter(|| ctx.plan.div3(black_box(&v))));
    let xi = f.map(|s| 1.0 + 0.1 * s);
    c.bench_function("mass flux 64x64x9", |b| {
        b.iter(|| hydrostatics::mass_flux_gravity(&ctx, black_box(&xi), black_box(&v)))
    });
}

fn solvers(c: &mut Criterion) {
    let ctx = ctx(Regime::GravityGamma2, 32, 9);
    let s = presets::prim_initial(&ctx, Preset::ShearWave, 0.1, 0, 0.0).unwrap();
    let rho = hydrostatics::density_field(&ctx, &s.surface_var);
    let forcing = stepper::assemble_forcing(&ctx, &s).unwrap();
    c.bench_function("momentum solve 32x32x9", |b| {
        b.iter(|| stepper::momentum_solve(&ctx, &rho, black_box(&forcing), &s.v, 1e-3).unwrap())
    });
    c.bench_function("picard step gravity 32x32x9", |b| {
        b.iter(|| stepper::picard_advance(&ctx, black_box(&s)).unwrap())
    });

    let vctx = self::ctx(Regime::VacuumNoGravity, 32, 9);
    let vs = presets::prim_initial(&vctx, Preset::VacuumCosine, 0.1, 0, 0.0).unwrap();
    c.bench_function("picard step vacuum 32x32x9", |b| {
        b.iter(|| stepper::picard_advance(&vctx, black_box(&vs)).unwrap())
    });

    let fctx = self::ctx(Regime::FreeBoundary, 32, 17);
    let fs = presets::fb_initial(&fctx, Preset::FbBump, 0.1, 0, 0.0).unwrap();
    c.bench_function("fb step 32x32x17", |b| {
        b.iter(|| free_boundary::fb_advance(&fctx, black_box(&fs), 1e-3).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = spectral, solvers
}
criterion_main!(benches);
