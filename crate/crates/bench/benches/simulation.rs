use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use marketsim::engine::{EngineOptions, World};
use marketsim::orderbook::{clear, LimitOrder, Side};
use marketsim::{RollingPercentileWindow, SimConfig};

fn small_run(c: &mut Criterion) {
    let cfg = SimConfig { agent_count: 100, step_count: 400, ..SimConfig::default() };
    c.bench_function("run 100 agents x 400 days", |b| {
        b.iter(|| {
            let mut world = World::new(cfg.clone(), 1, EngineOptions::default());
            world.run_to_end().unwrap();
            black_box(world.into_result())
        })
    });
}

fn order_book(c: &mut Criterion) {
    let order = |k: usize, side: Side| LimitOrder {
        agent: k,
        stock: 0,
        side,
        price: 90.0 + ((k * 37) % 200) as f64 * 0.1,
        quantity: 1 + (k % 50) as u64,
    };
    let bids: Vec<LimitOrder> = (0..250).map(|k| order(k, Side::Bid)).collect();
    let asks: Vec<LimitOrder> = (250..500).map(|k| order(k, Side::Ask)).collect();
    c.bench_function("clear 250x250 book", |b| b.iter(|| clear(black_box(&bids), black_box(&asks), 100.0).unwrap()));
}

fn percentile_window(c: &mut Criterion) {
    let xs: Vec<f64> = (0..4096).map(|k| ((k * 7919) % 1000) as f64).collect();
    c.bench_function("window insert_and_rank, capacity 2500", |b| {
        b.iter_batched(
            || {
                let mut w = RollingPercentileWindow::new(2500);
                xs.iter().take(2500).for_each(|&x| w.insert(x));
                w
            },
            |mut w| {
                for &x in &xs {
                    black_box(w.insert_and_rank(x));
                }
                w
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, small_run, order_book, percentile_window);
criterion_main!(benches);
