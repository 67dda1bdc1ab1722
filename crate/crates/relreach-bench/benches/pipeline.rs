//! Benchmarks for the main checking stages: exact and approximate end-to-end
//! runs, end-component decomposition on an unfolded model, and property
//! parsing.

use criterion::{criterion_group, criterion_main, Criterion};
use relreach_core::gen::figures::weighted_split;
use relreach_core::gen::vn::gen_von_neumann;
use relreach_core::mec::mec_decompose;
use relreach_core::pipeline::{combinations, unfold};
use relreach_core::property::parse_query;
use relreach_core::rational::rat;
use relreach_core::{run_check, CheckConfig, NormalizedQuery};

fn extractor(n: usize) -> (relreach_core::Mdp, NormalizedQuery) {
    let inst = gen_von_neumann(n, rat(59, 100), rat(61, 100), rat(0, 1)).unwrap();
    let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
    (inst.mdp, q)
}

fn bench_exact(c: &mut Criterion) {
    let (mdp, q) = extractor(2);
    c.bench_function("check_exact_extractor_2", |b| {
        b.iter(|| run_check(&mdp, &q, &CheckConfig::exact()).unwrap().verdict)
    });
}

fn bench_approx(c: &mut Criterion) {
    let (mdp, q) = extractor(3);
    let config = CheckConfig::approx(rat(1, 1_000_000));
    c.bench_function("check_approx_extractor_3", |b| {
        b.iter(|| run_check(&mdp, &q, &config).unwrap().verdict)
    });
}

fn bench_mec(c: &mut Criterion) {
    let (mdp, q) = extractor(6);
    let comb = combinations(&q).into_iter().next().unwrap();
    let unf = unfold(&mdp, &comb).unwrap();
    c.bench_function("mec_decompose_extractor_6_unfolding", |b| {
        b.iter(|| mec_decompose(&unf.mdp).len())
    });
}

fn bench_parse(c: &mut Criterion) {
    let inst = weighted_split();
    c.bench_function("parse_property", |b| {
        b.iter(|| parse_query(&inst.property, &inst.mdp).unwrap())
    });
}

criterion_group!(benches, bench_exact, bench_approx, bench_mec, bench_parse);
criterion_main!(benches);
