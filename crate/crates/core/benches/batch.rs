use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use homeview_core::analytics::DateWindow;
use homeview_core::batch::{audit_store, audit_store_seq, batch_analytics, batch_analytics_seq};
use homeview_core::dashboard::OnboardingConfig;
use homeview_core::fixtures;
use homeview_core::gateway::Gateway;
use homeview_core::summary::SummaryEngine;
use homeview_core::RecordStore;
use std::sync::Arc;

const AS_OF: &str = "2026-01-01";

fn populated(n: usize) -> Arc<RecordStore> {
    let store = Arc::new(RecordStore::in_memory());
    for i in 0..n {
        let mut record = fixtures::elias();
        record.record_id = format!("client-{i:04}");
        store.create(record).unwrap();
    }
    let engine = SummaryEngine::new(store.clone(), Arc::new(Gateway::mock())).with_as_of(AS_OF.parse().unwrap());
    for id in store.record_ids() {
        engine.generate_summary(&id, &OnboardingConfig::default()).unwrap();
    }
    store
}

fn bench(c: &mut Criterion) {
    let window = DateWindow::ending(AS_OF.parse().unwrap(), 90);
    let mut group = c.benchmark_group("batch");
    for n in [16, 128] {
        let store = populated(n);
        group.bench_with_input(BenchmarkId::new("analytics_par", n), &store, |b, s| b.iter(|| batch_analytics(s, window)));
        group.bench_with_input(BenchmarkId::new("analytics_seq", n), &store, |b, s| b.iter(|| batch_analytics_seq(s, window)));
        group.bench_with_input(BenchmarkId::new("audit_par", n), &store, |b, s| b.iter(|| audit_store(s).unwrap()));
        group.bench_with_input(BenchmarkId::new("audit_seq", n), &store, |b, s| b.iter(|| audit_store_seq(s).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
