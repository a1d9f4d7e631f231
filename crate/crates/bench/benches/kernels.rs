use commprof::kernels::{self, Grid3D, KernelParams};
use commprof::model::{labels, Benchmark, EventKind, MessageEvent, Peer};
use commprof::{summarize, RankId, RegionTracker, SimConfig};
use commprof_bench::kripke_params;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn tracker_events(c: &mut Criterion) {
    let event = |seq| MessageEvent {
        seq,
        kind: EventKind::Send,
        src: RankId(0),
        dst: Peer::Rank(RankId((seq % 6) as u32 + 1)),
        bytes: 8192,
        region: Default::default(),
        op: "isend".into(),
    };
    let events: Vec<_> = (0..1000).map(event).collect();
    c.bench_function("tracker_1000_events", |b| {
        b.iter(|| {
            let mut t = RegionTracker::new(RankId(0));
            t.begin("halo_exchange", labels([("level", "0")]), 0).unwrap();
            for e in &events {
                t.on_event(e);
            }
            t.end("halo_exchange", 1).unwrap();
            t.finish().unwrap()
        })
    });
}

fn kernel_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    let cases: [(Benchmark, [u64; 3], KernelParams); 4] = [
        (Benchmark::Halo3d, [8, 8, 8], kripke_params()),
        (Benchmark::Sweep, [4, 4, 4], KernelParams::new([8, 8, 8])),
        (Benchmark::AmgVcycle, [4, 4, 4], KernelParams::new([32, 32, 16])),
        (Benchmark::LagStep, [4, 4, 4], KernelParams::strong([64, 64, 64], [4, 4, 4]).unwrap()),
    ];
    for (bench, dims, params) in cases {
        let grid = Grid3D::new(dims).unwrap();
        let cfg = SimConfig::new(grid.nranks());
        group.bench_with_input(BenchmarkId::new(bench.as_str(), grid.nranks()), &params, |b, p| {
            b.iter(|| kernels::run(bench, grid, p, &cfg).unwrap())
        });
    }
    group.finish();
}

fn summarize_records(c: &mut Criterion) {
    let grid = Grid3D::new([8, 8, 8]).unwrap();
    let out = kernels::run(Benchmark::AmgVcycle, grid, &KernelParams::new([16, 16, 16]), &SimConfig::new(512)).unwrap();
    c.bench_function("summarize_512_ranks", |b| b.iter(|| summarize(&out.stats)));
}

criterion_group!(benches, tracker_events, kernel_runs, summarize_records);
criterion_main!(benches);
