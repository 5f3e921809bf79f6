use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use voltvar_core::admm::{self, InitScheme, Penalty, Variant};
use voltvar_core::cases::{generate_case, CaseId};
use voltvar_core::dual_ascent;
use voltvar_core::exec::ExecMode;
use voltvar_core::local_policy::local_control;
use voltvar_core::simulator::{AdmmNetwork, DualAscentNetwork};
use voltvar_core::units::{to_kvar, Line};

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn admm_rounds(c: &mut Criterion) {
    let mut group = c.benchmark_group("admm_round");
    for id in [1u32, 3] {
        let f = generate_case(CaseId::new(id).unwrap(), 0);
        let line = Line::new(&f);
        let q_local: Vec<f64> = local_control(&f).q_g.into_iter().map(to_kvar).collect();
        let states = admm::init_states(&line, &q_local, InitScheme::LocalPolicy, Penalty::default_for(&line));
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, format!("case{id}")), &states, |b, states| {
                let mut net = AdmmNetwork::new(states.clone(), Variant::Full, mode);
                b.iter(|| net.round().unwrap())
            });
        }
    }
    group.finish();
}

fn dual_ascent_iterations(c: &mut Criterion) {
    let mut group = c.benchmark_group("dual_ascent_iteration");
    for id in [1u32, 3] {
        let f = generate_case(CaseId::new(id).unwrap(), 0);
        let line = Line::new(&f);
        let alpha = dual_ascent::default_alpha(&line);
        for (name, mode) in MODES {
            group.bench_function(BenchmarkId::new(name, format!("case{id}")), |b| {
                let mut net = DualAscentNetwork::new(&line, alpha, mode);
                let mut k = 0;
                b.iter(|| {
                    k += 1;
                    net.round(k).unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, admm_rounds, dual_ascent_iterations);
criterion_main!(benches);
