//! Acceptance checks, one line per criterion. Run with
//! `cargo test -p commprof-core --test acceptance`.

mod support;

use commprof::analysis::{self, LoadedProfile, MetricTable, ProfileSet, Rollup, SrcAveraging};
use commprof::kernels::{self, Grid3D, KernelParams};
use commprof::model::{Benchmark, ExperimentSpec, KernelParamSpec, Scaling};
use commprof::runner::{self, Executed, RunOptions};
use commprof::sim::RunOutcome;
use commprof::SimConfig;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)*));
        }
    };
}

const TABLE_II_GRIDS: [[u64; 3]; 7] = [
    [2, 2, 2],
    [4, 2, 2],
    [4, 4, 2],
    [4, 4, 4],
    [8, 4, 4],
    [8, 8, 4],
    [8, 8, 8],
];

fn simulate(bench: Benchmark, dims: [u64; 3], params: &KernelParams, trace: bool) -> Result<RunOutcome, String> {
    let grid = Grid3D::new(dims).map_err(|e| e.to_string())?;
    let cfg = SimConfig::new(grid.nranks()).with_trace(trace);
    kernels::run(bench, grid, params, &cfg).map_err(|e| e.to_string())
}

fn experiment(benchmark: &str, scaling: Scaling, grids: &[[u64; 3]], base: [u64; 3]) -> ExperimentSpec {
    ExperimentSpec {
        benchmark: benchmark.into(),
        scaling,
        grids: grids.to_vec(),
        base_problem: base,
        iterations: 1,
        kernel_params: KernelParamSpec::default(),
        seed: 0,
        output_dir: "profiles".into(),
    }
}

fn execute_all(spec: ExperimentSpec, per_rank: bool) -> Result<Vec<Executed>, String> {
    let spec = runner::prepare(spec).map_err(|e| e.to_string())?;
    let opts = RunOptions {
        per_rank,
        ..RunOptions::default()
    };
    runner::plan(&spec)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|p| runner::execute(p, &opts).map_err(|e| e.to_string()))
        .collect()
}

fn set_of(runs: Vec<Executed>) -> Result<ProfileSet, String> {
    let loaded = runs
        .into_iter()
        .enumerate()
        .map(|(i, r)| LoadedProfile {
            path: PathBuf::from(format!("run{i}")),
            profile: r.profile,
        })
        .collect();
    ProfileSet::new(loaded, false).map_err(|e| e.to_string())
}

fn region_records<'a>(out: &'a RunOutcome, name: &'a str) -> impl Iterator<Item = &'a commprof::RegionCommStats> {
    out.stats.iter().filter(move |s| s.region.innermost() == Some(name))
}

fn neighbor_counts() -> Check {
    for (bench, region, cells) in [
        (Benchmark::Halo3d, "halo_exchange", 8),
        (Benchmark::Sweep, "sweep_comm", 4),
    ] {
        let p = KernelParams::new([cells; 3]);
        let out = simulate(bench, [2, 2, 2], &p, false)?;
        let recs: Vec<_> = region_records(&out, region).collect();
        ensure!(recs.len() == 8, "{bench}: {} records", recs.len());
        for r in recs {
            ensure!(
                r.dest_ranks_min == 3 && r.dest_ranks_max == 3,
                "{bench} rank {}: dest {}..{}",
                r.rank,
                r.dest_ranks_min,
                r.dest_ranks_max
            );
        }
        let out = simulate(bench, [4, 4, 4], &p, false)?;
        let s = out.summaries();
        let s = s.iter().find(|s| s.name == region).ok_or("missing summary")?;
        ensure!(
            (s.dest_ranks_floor(), s.dest_ranks_ceiling()) == (3, 6),
            "{bench} 4x4x4: {}..{}",
            s.dest_ranks_floor(),
            s.dest_ranks_ceiling()
        );
    }
    Ok("2x2x2 dest 3/3 on every rank, 4x4x4 summary dest 3..6".into())
}

fn sweep_message_count() -> Check {
    let out = simulate(Benchmark::Sweep, [2, 2, 2], &KernelParams::new([4, 4, 4]), false)?;
    for r in region_records(&out, "sweep_comm") {
        ensure!(r.sends == 432, "rank {} sends {}", r.rank, r.sends);
    }
    let s = out.summaries();
    let s = s.iter().find(|s| s.name == "sweep_comm").ok_or("missing summary")?;
    ensure!(s.sends_sum == 3456, "sends_sum {}", s.sends_sum);
    Ok("432 sends per rank, sends_sum 3456".into())
}

const KRIPKE_GRIDS: [[u64; 3]; 4] = [[4, 4, 4], [8, 4, 4], [8, 8, 4], [8, 8, 8]];

fn kripke_series() -> Result<Vec<Executed>, String> {
    execute_all(
        experiment("halo3d", Scaling::Weak, &KRIPKE_GRIDS, [16, 32, 32]),
        false,
    )
}

fn weak_constancy() -> Check {
    let runs = kripke_series()?;
    let largest: Vec<u64> = runs
        .iter()
        .map(|r| r.profile.summary("halo_exchange").map_or(0, |s| s.largest_send()))
        .collect();
    ensure!(largest.len() == 4, "{} runs", largest.len());
    ensure!(largest.iter().all(|&m| m == largest[0] && m > 0), "msg_sent_max {largest:?}");
    Ok(format!("msg_sent_max {} at 64/128/256/512 ranks", largest[0]))
}

fn strong_monotonicity() -> Check {
    let grids = [[2, 2, 2], [4, 2, 2], [4, 4, 2], [4, 4, 4]];
    let runs = execute_all(experiment("lag_step", Scaling::Strong, &grids, [64, 48, 32]), false)?;
    let pairs: Vec<(u64, u64)> = runs
        .iter()
        .map(|r| {
            let s = r.profile.summary("halo_exchange").expect("halo summary");
            (s.largest_send(), s.sends_sum)
        })
        .collect();
    for w in pairs.windows(2) {
        ensure!(w[1].0 < w[0].0, "msg_sent_max not decreasing: {pairs:?}");
        ensure!(w[1].1 > w[0].1, "sends_sum not increasing: {pairs:?}");
    }
    Ok(format!("(msg_sent_max, sends_sum) {pairs:?}"))
}

fn per_level_structure() -> Check {
    let runs = execute_all(
        experiment("amg_vcycle", Scaling::Weak, &[[4, 4, 4]], [32, 32, 16]),
        true,
    )?;
    let levels = runs[0].profile.meta.kernel_params.get("levels").copied().unwrap_or(0);
    let set = set_of(runs)?;
    let bytes = analysis::bytes_per_level(&set, None).map_err(|e| e.to_string())?;
    let src = analysis::src_ranks_per_level(&set, None, SrcAveraging::Receiving).map_err(|e| e.to_string())?;
    let profile = &set.profiles()[0].profile;
    let redistributed = levels - 1;
    let fine: Vec<u64> = (0..redistributed).collect();
    ensure!(fine.len() >= 2, "only {levels} levels");
    let b = |l: u64| bytes.value(0, &format!("level={l}")).unwrap_or(f64::NAN);
    for w in fine.windows(2) {
        ensure!(b(w[1]) < b(w[0]), "bytes level {} = {} vs level {} = {}", w[0], b(w[0]), w[1], b(w[1]));
    }
    ensure!(
        profile
            .summaries
            .iter()
            .any(|s| s.labels.get("level") == Some(&redistributed.to_string()) && s.ranks == 64),
        "level {redistributed} is not the redistributed level"
    );
    let v = |l: u64| src.value(0, &format!("level={l}")).unwrap_or(f64::NAN);
    ensure!(v(redistributed) >= 7.0, "redistributed src avg {}", v(redistributed));
    for &l in &fine {
        ensure!(v(l) <= 6.0, "level {l} src avg {}", v(l));
    }
    let fine_bytes: Vec<String> = fine.iter().map(|&l| b(l).to_string()).collect();
    Ok(format!(
        "bytes per fine level [{}], src avg {} at redistributed level {redistributed}",
        fine_bytes.join(", "),
        v(redistributed)
    ))
}

fn params_for(bench: Benchmark, grid: [u64; 3]) -> Result<KernelParams, String> {
    match bench {
        Benchmark::Halo3d => Ok(KernelParams::new([16, 32, 32])),
        Benchmark::Sweep => Ok(KernelParams::new([8, 8, 8])),
        Benchmark::AmgVcycle => Ok(KernelParams::new([32, 32, 16])),
        Benchmark::LagStep => {
            let mut p = KernelParams::strong([64, 64, 64], grid).map_err(|e| e.to_string())?;
            p.timesteps = 2;
            Ok(p)
        }
    }
}

fn conservation_and_oracle() -> Check {
    let mut runs = 0;
    let mut events = 0usize;
    for bench in [Benchmark::Halo3d, Benchmark::Sweep, Benchmark::AmgVcycle, Benchmark::LagStep] {
        for grid in TABLE_II_GRIDS {
            let out = simulate(bench, grid, &params_for(bench, grid)?, true)?;
            let trace = out.trace.as_ref().ok_or("no trace")?;
            let summaries = out.summaries();
            let bytes_sent: u64 = summaries.iter().map(|s| s.bytes_sent_sum).sum();
            let bytes_recv: u64 = summaries.iter().map(|s| s.bytes_recv_sum).sum();
            let sends: u64 = summaries.iter().map(|s| s.sends_sum).sum();
            let recvs: u64 = summaries.iter().map(|s| s.recvs_sum).sum();
            ensure!(bytes_sent == bytes_recv, "{bench} {grid:?}: bytes {bytes_sent} vs {bytes_recv}");
            ensure!(sends == recvs, "{bench} {grid:?}: msgs {sends} vs {recvs}");
            let t = support::totals(trace);
            ensure!(t.sends == sends && t.bytes_sent == bytes_sent, "{bench} {grid:?}: events outside regions");
            let replayed = support::replay(trace);
            ensure!(replayed == out.stats, "{bench} {grid:?}: per-rank records differ from replay");
            ensure!(
                support::reduce(&replayed) == summaries,
                "{bench} {grid:?}: summaries differ from replay"
            );
            runs += 1;
            events += trace.len();
        }
    }
    Ok(format!("{runs} runs, {events} trace records replayed"))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut specs = [
        experiment("halo3d", Scaling::Weak, &KRIPKE_GRIDS, [16, 32, 32]),
        experiment("sweep", Scaling::Weak, &[[2, 2, 2], [4, 4, 2]], [8, 8, 8]),
        experiment("amg_vcycle", Scaling::Weak, &[[4, 4, 4]], [32, 32, 16]),
        experiment("lag_step", Scaling::Strong, &[[2, 2, 2], [4, 4, 4]], [64, 64, 64]),
    ];
    specs[2].iterations = 2;
    let mut files = 0;
    for (i, spec) in specs.iter().enumerate() {
        let mut outputs = Vec::new();
        for pass in ["first", "second"] {
            let opts = RunOptions {
                out_dir: Some(dir.path().join(format!("{i}-{pass}"))),
                per_rank: true,
                ..RunOptions::default()
            };
            let report = runner::run_experiment(spec, &opts).map_err(|e| e.to_string())?;
            ensure!(report.all_ok(), "{}: {report}", spec.benchmark);
            let mut bytes = Vec::new();
            for p in report.profile_paths() {
                bytes.push((p.file_name().map(|n| n.to_owned()), std::fs::read(p).map_err(|e| e.to_string())?));
            }
            outputs.push(bytes);
        }
        ensure!(outputs[0] == outputs[1], "{}: profiles differ between runs", spec.benchmark);
        files += outputs[0].len();
    }
    Ok(format!("{files} profile files byte-identical across two runs"))
}

fn collective_accounting() -> Check {
    for (t, dims) in [(5u64, [2, 2, 2]), (3, [4, 2, 1]), (4, [1, 1, 1])] {
        let mut p = KernelParams::strong([16, 16, 16], dims).map_err(|e| e.to_string())?;
        p.timesteps = t;
        let out = simulate(Benchmark::LagStep, dims, &p, true)?;
        let nranks: u64 = dims.iter().product();
        let recs: Vec<_> = region_records(&out, "timestep").collect();
        ensure!(recs.len() as u64 == nranks, "{} timestep records", recs.len());
        for r in recs {
            ensure!(r.colls == 2 * t, "T={t} rank {}: colls {}", r.rank, r.colls);
            ensure!(
                r.sends == 0 && r.recvs == 0 && r.bytes_sent_total == 0 && r.bytes_recv_total == 0,
                "T={t} rank {}: collectives leaked into p2p tallies",
                r.rank
            );
        }
        let trace = out.trace.as_ref().ok_or("no trace")?;
        let totals = support::totals(trace);
        let record_bytes: u64 = out.stats.iter().map(|s| s.bytes_sent_total).sum();
        ensure!(totals.bytes_sent == record_bytes, "send bytes include collective payloads");
        ensure!(totals.colls == 2 * t * nranks, "collective events {}", totals.colls);
    }
    Ok("colls = 2T on every rank, zero p2p bytes from collectives".into())
}

fn check_inverse(table: &MetricTable, set: &ProfileSet, rollup: Rollup) -> Result<usize, String> {
    let mut cells = 0;
    for (row, lp) in table.rows.iter().zip(set.profiles()) {
        let meta = &lp.profile.meta;
        for (col, cell) in table.columns.iter().zip(&row.cells) {
            let Some(cell) = cell else { continue };
            let raw = match table.metric {
                analysis::Metric::BytesPerSec | analysis::Metric::MsgsPerSec => {
                    let bytes = table.metric == analysis::Metric::BytesPerSec;
                    let counter: u64 = match rollup {
                        Rollup::Exclusive => lp
                            .profile
                            .summaries_named(col)
                            .map(|s| if bytes { s.bytes_sent_sum } else { s.sends_sum })
                            .sum(),
                        Rollup::Inclusive => lp
                            .profile
                            .per_rank
                            .iter()
                            .flatten()
                            .filter(|r| r.region.names.contains(col))
                            .map(|r| if bytes { r.bytes_sent_total } else { r.sends })
                            .sum(),
                    };
                    let back = cell.value * meta.nranks as f64 * meta.elapsed_sec;
                    ensure!(
                        (back - counter as f64).abs() <= counter as f64 * 1e-9,
                        "{} {col} at {}: {back} vs {counter}",
                        table.metric,
                        meta.nranks
                    );
                    counter as f64
                }
                _ => cell.raw,
            };
            let back = cell.value * cell.divisor;
            ensure!(
                (back - raw).abs() <= raw.abs() * 1e-9,
                "{} {col} at {}: {back} vs {raw}",
                table.metric,
                meta.nranks
            );
            cells += 1;
        }
    }
    Ok(cells)
}

fn analysis_inverses() -> Check {
    let kripke = set_of(kripke_series()?)?;
    let started = Instant::now();
    let mut tables = vec![
        analysis::bytes_per_sec(&kripke, &[], Rollup::Exclusive),
        analysis::msgs_per_sec(&kripke, &[], Rollup::Exclusive),
        analysis::time_per_rank(&kripke, &[]),
    ]
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .map_err(|e| e.to_string())?;
    for t in &tables {
        let csv = analysis::to_csv(t);
        let _ = analysis::to_svg(t);
        ensure!(csv.lines().count() == 5, "{}: csv rows", t.metric);
    }
    let report_time = started.elapsed();
    ensure!(report_time < Duration::from_secs(5), "report took {report_time:?}");
    let mut cells = 0;
    for t in &tables {
        cells += check_inverse(t, &kripke, Rollup::Exclusive)?;
    }

    let amg = set_of(execute_all(
        experiment("amg_vcycle", Scaling::Weak, &[[2, 2, 2], [4, 4, 4]], [32, 32, 16]),
        true,
    )?)?;
    let inclusive = analysis::bytes_per_sec(&amg, &[], Rollup::Inclusive).map_err(|e| e.to_string())?;
    cells += check_inverse(&inclusive, &amg, Rollup::Inclusive)?;
    tables = vec![
        analysis::msgs_per_sec(&amg, &[], Rollup::Exclusive),
        analysis::bytes_per_level(&amg, None),
        analysis::src_ranks_per_level(&amg, None, SrcAveraging::Receiving),
    ]
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .map_err(|e| e.to_string())?;
    for t in &tables {
        cells += check_inverse(t, &amg, Rollup::Exclusive)?;
    }
    Ok(format!("{cells} cells invert within 1e-9, report over criterion-3 profiles in {report_time:?}"))
}

type Criterion = (u32, &'static str, Duration, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "neighbor-count reproduction", Duration::from_secs(1), neighbor_counts),
        (2, "sweep message count", Duration::from_secs(1), sweep_message_count),
        (3, "weak-scaling constancy", Duration::from_secs(30), weak_constancy),
        (4, "strong-scaling monotonicity", Duration::from_secs(10), strong_monotonicity),
        (5, "per-level structure", Duration::from_secs(10), per_level_structure),
        (6, "conservation and oracle equivalence", Duration::from_secs(120), conservation_and_oracle),
        (7, "determinism", Duration::from_secs(60), determinism),
        (8, "collective accounting", Duration::from_secs(1), collective_accounting),
        (9, "analysis inverses", Duration::from_secs(30), analysis_inverses),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, limit, check) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let started = Instant::now();
        let result = check();
        let took = started.elapsed();
        let verdict = match result {
            Ok(detail) if took <= limit => Ok(detail),
            Ok(detail) => Err(format!("{detail}; exceeded {limit:?}")),
            Err(e) => Err(e),
        };
        match verdict {
            Ok(detail) => println!("PASS criterion {n} ({name}) in {took:.2?}: {detail}"),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}) in {took:.2?}: {e}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
