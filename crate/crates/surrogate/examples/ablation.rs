//! Paired training runs: physics-informed vs data-only CirNet, and
//! hierarchical vs CirNet-only.
//!
//! Usage: ablation <physics|hierarchy> [epochs] [seeds]

use std::time::Instant;

use modkit_core::dataset::{generate_dataset, DatasetConfig, Split};
use modkit_surrogate::eval::evaluate_mae;
use modkit_surrogate::train::{fit_normalization, train_cirnet, train_modnet, TrainConfig};
use modkit_surrogate::SurrogatePair;

fn main() {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("physics");
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200);
    let seeds: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(5);
    let batch_size: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0);
    let splits = if mode == "physics" { [0.05, 0.10, 0.85] } else { [0.5, 0.1, 0.4] };
    let t0 = Instant::now();
    let ds = generate_dataset(&DatasetConfig {
        splits,
        ..DatasetConfig::default()
    })
    .unwrap();
    println!("dataset {:.1}s", t0.elapsed().as_secs_f64());
    let norm = fit_normalization(&ds).unwrap();
    let mut wins = 0;
    for seed in 0..seeds {
        let cfg = TrainConfig {
            epochs,
            seed,
            batch_size,
            ..TrainConfig::default()
        };
        let pair = SurrogatePair::for_dataset(&ds, &cfg).unwrap();
        let t = Instant::now();
        let (modnet, _) = train_modnet(&pair.modnet, &ds, &norm, &cfg).unwrap();
        let tm = t.elapsed().as_secs_f64();
        let (a, b) = if mode == "physics" {
            let t = Instant::now();
            let (c1, _) = train_cirnet(&pair.cirnet, Some(&modnet), &ds, &norm, &cfg).unwrap();
            let t1 = t.elapsed().as_secs_f64();
            let cfg0 = TrainConfig { lambda_p: 0.0, ..cfg.clone() };
            let t = Instant::now();
            let (c0, _) = train_cirnet(&pair.cirnet, Some(&modnet), &ds, &norm, &cfg0).unwrap();
            println!("times modnet {tm:.1}s phys {t1:.1}s data {:.1}s", t.elapsed().as_secs_f64());
            let p1 = SurrogatePair::new(modnet.clone(), c1, norm, true, 200).unwrap();
            let p0 = SurrogatePair::new(modnet.clone(), c0, norm, true, 200).unwrap();
            (evaluate_mae(&p1, &ds, Split::Test).unwrap(), evaluate_mae(&p0, &ds, Split::Test).unwrap())
        } else {
            let t = Instant::now();
            let (c1, _) = train_cirnet(&pair.cirnet, Some(&modnet), &ds, &norm, &cfg).unwrap();
            let t1 = t.elapsed().as_secs_f64();
            let (c0, _) = train_cirnet(&pair.cirnet, None, &ds, &norm, &cfg).unwrap();
            println!("times modnet {tm:.1}s hier {t1:.1}s only {:.1}s", t.elapsed().as_secs_f64() - t1);
            let p1 = SurrogatePair::new(modnet.clone(), c1, norm, true, 200).unwrap();
            let p0 = SurrogatePair::new(modnet.clone(), c0, norm, false, 200).unwrap();
            (evaluate_mae(&p1, &ds, Split::Test).unwrap(), evaluate_mae(&p0, &ds, Split::Test).unwrap())
        };
        if a <= b {
            wins += 1;
        }
        println!("seed {seed}: variant {a:.4} ablation {b:.4}  ({:.1}s)", t.elapsed().as_secs_f64());
    }
    println!("wins {wins}/{seeds} total {:.1}s", t0.elapsed().as_secs_f64());
}
