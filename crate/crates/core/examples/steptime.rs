use std::time::Instant;
use vpflow::field::{self, Grid, ScalarField};
use vpflow::initial::{build_phi0, default_clamp_width, Ball, Shape};
use vpflow::model::{ModelKind, ModelParams};
use vpflow::stepper::{self, Scheme, SimState, StepControl};

fn main() {
    let g = Grid::new(2, 256).unwrap();
    let eps = 0.02;
    let shape = Shape::Ball(Ball { center: vec![0.5, 0.5], radius: 0.44 });
    let pd = build_phi0(&shape, g, eps, default_clamp_width(eps)).unwrap();
    let p = ModelParams::new(eps, 0.95, ModelKind::Takasao, pd.m0).unwrap();
    let ctrl = StepControl::new(g, eps, 0.2, Scheme::ExplicitEuler).unwrap();
    let mut state = SimState::new(&pd, p);
    for _ in 0..100 { stepper::step(&mut state, &ctrl).unwrap(); }
    let n = 2000;

    let t0 = Instant::now();
    for _ in 0..n { stepper::step(&mut state, &ctrl).unwrap(); }
    println!("full step:        {:.3} ms", t0.elapsed().as_secs_f64() * 1e3 / n as f64);

    let mut out = ScalarField::zeros(g);
    let mass = vpflow::model::mass(&state.phi);
    let t0 = Instant::now();
    for _ in 0..n {
        let m = vpflow::model::rhs_into_bench(&state.phi, &p, mass, &mut out);
        std::hint::black_box(m);
    }
    println!("stencil rhs pass: {:.3} ms", t0.elapsed().as_secs_f64() * 1e3 / n as f64);

    let t0 = Instant::now();
    for _ in 0..n {
        let m = field::integrate_map(&state.phi, vpflow::model::k_antideriv);
        std::hint::black_box(m);
    }
    println!("mass integrate:   {:.3} ms", t0.elapsed().as_secs_f64() * 1e3 / n as f64);

    let t0 = Instant::now();
    for _ in 0..n {
        let e = vpflow::diagnostics::compatible_surface_energy(&state.phi, eps);
        std::hint::black_box(e);
    }
    println!("compat energy:    {:.3} ms", t0.elapsed().as_secs_f64() * 1e3 / n as f64);

    let mut vals = state.phi.values().to_vec();
    let rv = out.values().to_vec();
    let t0 = Instant::now();
    for _ in 0..n {
        let r = bench_update(&mut vals, &rv, 1e-12);
        std::hint::black_box(r);
    }
    println!("plain update:     {:.3} ms", t0.elapsed().as_secs_f64() * 1e3 / n as f64);
}

// isolated update-style loop to find the floor
#[allow(dead_code)]
fn bench_update(vals: &mut [f64], rv: &[f64], dt: f64) -> (f64, f64, f64) {
    let mut mass = [0.0f64; 4];
    let mut rsq = [0.0f64; 4];
    let mut sup = [0.0f64; 4];
    for (vb, rb) in vals.chunks_exact_mut(4).zip(rv.chunks_exact(4)) {
        let vb: &mut [f64; 4] = vb.try_into().unwrap();
        let rb: &[f64; 4] = rb.try_into().unwrap();
        for l in 0..4 {
            let f = rb[l];
            rsq[l] += f * f;
            let nv = vb[l] + dt * f;
            vb[l] = nv;
            mass[l] += nv - nv * nv * nv / 3.0;
            sup[l] = sup[l].max(nv.abs());
        }
    }
    (mass.iter().sum(), rsq.iter().sum(), sup.iter().fold(0.0f64, |a, &b| a.max(b)))
}
