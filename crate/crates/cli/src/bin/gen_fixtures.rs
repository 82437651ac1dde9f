//! Regenerates the committed test fixtures and golden outputs under
//! `tests/fixtures/`. Every input is deterministic, so reruns are
//! bit-identical; goldens are frozen CLI outputs that the test suite
//! cross-checks against independent oracles.

use std::path::Path;

use tickalloc::commands::{self, Overrides};
use tickalloc::formats::{self, RunConfig};
use tickalloc::scenario;
use tickalloc_core::backtest::StrategyKind;
use tickalloc_core::{MarketConditions, TickSpec};

fn small_conditions() -> MarketConditions {
    let edges = [2500.0, 2600.0, 2700.0, 2800.0, 2900.0, 3000.0, 3100.0];
    let ticks: Vec<TickSpec> = edges
        .windows(2)
        .enumerate()
        .map(|(k, w)| TickSpec::new(format!("eth-{k}"), "eth-30bp", w[0], w[1], 0.0030).unwrap())
        .collect();
    MarketConditions {
        ticks,
        a: vec![1200.0, 2600.0, 4100.0, 3900.0, 2300.0, 900.0],
        b: vec![310_000.0, 450_000.0, 730_000.0, 640_000.0, 390_000.0, 180_000.0],
        c: vec![0.9952, 0.9967, 0.9981, 0.9995, 1.0004, 1.0009],
        d: 250_000.0,
        current_price: 2780.0,
    }
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let golden = root.join("golden");
    std::fs::create_dir_all(&golden).expect("create fixture directories");

    formats::write_conditions(&root.join("conditions_small.json"), &small_conditions())
        .expect("write small conditions");
    formats::write_conditions(
        &root.join("scenario_conditions.json"),
        &scenario::sweep_scenario(1.0),
    )
    .expect("write scenario conditions");

    let (snapshot, events) = scenario::synthetic_history(25.0, 0);
    formats::write_snapshot(&root.join("snapshot.csv"), &snapshot).expect("write snapshot");
    formats::write_swaps(&root.join("swaps.csv"), &events).expect("write swaps");

    let config = RunConfig {
        d: 1_000_000.0,
        ..RunConfig::default()
    };
    formats::write_run_config(&root.join("config.json"), &config).expect("write config");

    let overrides = Overrides::default();
    commands::cmd_waterfill(
        &root.join("conditions_small.json"),
        &golden.join("waterfill"),
        &config,
        &overrides,
    )
    .expect("waterfill golden");
    commands::cmd_optimize(
        &root.join("snapshot.csv"),
        &root.join("swaps.csv"),
        &golden.join("optimize"),
        &config,
    )
    .expect("optimize golden");
    commands::cmd_estimate(
        &root.join("snapshot.csv"),
        &root.join("swaps.csv"),
        &golden.join("estimate"),
        &config,
    )
    .expect("estimate golden");
    let d_list = [0.2, 0.5, 1.0, 2.0, 5.0, 10.0];
    commands::cmd_sweep(
        &root.join("scenario_conditions.json"),
        &d_list,
        &golden.join("sweep"),
        &config,
        &overrides,
    )
    .expect("sweep golden");
    commands::cmd_backtest(
        &root.join("snapshot.csv"),
        &root.join("swaps.csv"),
        &golden.join("backtest"),
        &config,
        &StrategyKind::ALL,
    )
    .expect("backtest golden");

    println!("fixtures regenerated under {}", root.display());
}
