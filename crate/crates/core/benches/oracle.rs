use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dpaudit_core::executor::load_dataset;
use dpaudit_core::plan::parse_plan;
use dpaudit_core::sensitivity::oracle::{empirical_sensitivity, OracleConfig};
use dpaudit_core::Strategy;

fn fixtures() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"))
}

fn bench_oracle(c: &mut Criterion) {
    let cases = [
        ("telemetry-average-repaired", "telemetry-six-users.csv", "events_a"),
        ("telemetry-zscore-repaired", "telemetry-six-users.csv", "errors_c"),
        ("per-day-split", "restaurant.csv", "long_mon_visits"),
    ];
    let mut group = c.benchmark_group("empirical_sensitivity");
    group.sample_size(20);
    for (plan_name, data, node) in cases {
        let text = std::fs::read_to_string(fixtures().join("plans").join(format!("{plan_name}.json"))).unwrap();
        let plan = parse_plan(&text).unwrap();
        let ds = load_dataset(fixtures().join("data").join(data), &plan.schema, &plan.privacy.unit_column).unwrap();
        // The restaurant data has 60 visitors; keep a handful.
        let keep: Vec<usize> = ds.unit_index().values().take(8).flatten().copied().collect();
        let ds = ds.select(&keep);
        for strategy in [Strategy::Sequential, Strategy::Parallel] {
            let cfg = OracleConfig { strategy, max_units: 64, ..OracleConfig::default() };
            group.bench_with_input(BenchmarkId::new(format!("{strategy:?}"), format!("{plan_name}/{node}")), &cfg, |b, cfg| {
                b.iter(|| empirical_sensitivity(&plan, node, &ds, cfg).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_oracle);
criterion_main!(benches);
