use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{DMatrix, DVector};
use probcon::dirichlet::{prob_leq_edgeworth, prob_leq_exact, EdgeworthOrder};
use probcon::gaussian::{prob_leq, soc_margin};
use probcon::{DirichletHyper, GaussianHyper, LinearConstraint, ProbabilisticConstraint, QuadratureConfig};

fn dirichlet(c: &mut Criterion) {
    let hyper = DirichletHyper::new(vec![1.5, 3.0, 0.8, 6.0, 2.2]).unwrap();
    let con = LinearConstraint::new(vec![0.7, -0.4, 0.9, -0.1, 0.3], 0.05).unwrap();
    let cfg = QuadratureConfig::default();
    c.bench_function("dirichlet_edgeworth1", |b| {
        b.iter(|| prob_leq_edgeworth(black_box(&hyper), black_box(&con), EdgeworthOrder::One).unwrap())
    });
    c.bench_function("dirichlet_edgeworth2", |b| {
        b.iter(|| prob_leq_edgeworth(black_box(&hyper), black_box(&con), EdgeworthOrder::Two).unwrap())
    });
    c.bench_function("dirichlet_exact", |b| {
        b.iter(|| prob_leq_exact(black_box(&hyper), black_box(&con), &cfg).unwrap())
    });
}

fn gaussian(c: &mut Criterion) {
    let n = 10;
    let l = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4);
    let sigma = &l * l.transpose() + DMatrix::identity(n, n);
    let mu = DVector::from_fn(n, |i, _| i as f64 * 0.1);
    let hyper = GaussianHyper::new(mu, sigma).unwrap();
    let con = LinearConstraint::new((0..n).map(|i| (-1.0f64).powi(i as i32)).collect(), 1.0).unwrap();
    let pc = ProbabilisticConstraint::new(con.clone(), 0.95).unwrap();
    c.bench_function("gaussian_prob_leq_10", |b| b.iter(|| prob_leq(black_box(&hyper), black_box(&con)).unwrap()));
    c.bench_function("gaussian_soc_margin_10", |b| b.iter(|| soc_margin(black_box(&hyper), black_box(&pc)).unwrap()));
}

criterion_group!(benches, dirichlet, gaussian);
criterion_main!(benches);
