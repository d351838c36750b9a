use std::path::Path;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nearfocus::harness::{design, parse_scenario, place_users, power_maps_for};
use nearfocus::{build_channel, solve_dma, solve_fully_digital, solve_hybrid, Architecture, Scenario};

fn scenario(length: f64, users: usize) -> Scenario {
    let text = format!(
        "carrier_frequency_hz = 28e9\nantenna_length_m = {length}\np_max_dbm = -13\nnoise_power_dbm = -114\n\
         seed = 3\noutputs = [\"sum_rate_table\"]\n"
    );
    let s = parse_scenario(&text, Path::new("bench.toml")).unwrap();
    s.with_users(place_users(&s, users, s.seed).unwrap())
}

fn solvers(c: &mut Criterion) {
    let s = scenario(0.05, 4);
    let mut group = c.benchmark_group("solve_l5cm_m4");
    group.sample_size(10);

    let g = s.geometry(Architecture::FullyDigital).unwrap();
    let ch = build_channel(&s.users, &g, s.wavelength(), s.boresight_b, s.noise_power).unwrap();
    group.bench_function("fully_digital", |b| b.iter(|| solve_fully_digital(&ch, s.p_max, &s.fully_digital).unwrap()));

    let g = s.geometry(Architecture::Hybrid).unwrap();
    let ch = build_channel(&s.users, &g, s.wavelength(), s.boresight_b, s.noise_power).unwrap();
    group.bench_function("hybrid", |b| b.iter(|| solve_hybrid(&ch, &g, s.p_max, &s.hybrid).unwrap()));

    let g = s.geometry(Architecture::Dma).unwrap();
    let params = s.dma_params(&g).unwrap();
    let ch = build_channel(&s.users, &g, s.wavelength(), s.boresight_b, s.noise_power).unwrap();
    group.bench_function("dma", |b| b.iter(|| solve_dma(&ch, &g, &params, s.p_max, &s.dma).unwrap()));
    group.finish();
}

fn power_map(c: &mut Criterion) {
    let mut s = scenario(0.10, 2);
    s.power_map.nx = 41;
    s.power_map.nz = 41;
    let d = design(&s, Architecture::FullyDigital, false).unwrap();
    c.bench_function("power_map_41x41_l10cm", |b| {
        b.iter_batched(|| (), |_| power_maps_for(&d, &s).unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, solvers, power_map);
criterion_main!(benches);
