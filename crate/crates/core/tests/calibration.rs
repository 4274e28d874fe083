//! Ignored by default: prints the mean pdr/loss matrix over the protocol x
//! mobility grid so parameter changes can be eyeballed quickly.
//!
//! ```bash
//! CAL_SPEED=10 CAL_RANGE=150 cargo test --release -p mwsim-core \
//!     --test calibration -- --ignored --nocapture
//! ```

use mwsim_core::experiment::ScenarioConfig;
use mwsim_core::mobility::MobilityModel;
use mwsim_core::protocols::ProtocolKind;
use mwsim_core::sim::{run_scenario, TraceOptions};
use rayon::prelude::*;

fn env_f64(key: &str, default: f64) -> f64 {
    std::env::var(key).ok().and_then(|s| s.parse().ok()).unwrap_or(default)
}

#[test]
#[ignore]
fn calibration_matrix() {
    let seeds: Vec<u64> = (1..=env_f64("CAL_SEEDS", 8.0) as u64).collect();
    let base = ScenarioConfig {
        speed: env_f64("CAL_SPEED", 10.0),
        range: env_f64("CAL_RANGE", 150.0),
        turn_sigma: env_f64("CAL_TURN", 0.25),
        round_length: env_f64("CAL_ROUND", 10.0),
        ..ScenarioConfig::default()
    };
    println!(
        "speed={} range={} turn_sigma={} round={} seeds={}",
        base.speed, base.range, base.turn_sigma, base.round_length, seeds.len()
    );
    println!("{:8} {:>13} {:>13} {:>13}   (mean pdr_unique | mean loss%)", "proto", "rwp", "mass", "linear");
    for protocol in ProtocolKind::ALL {
        let mut row = format!("{:8}", protocol.name());
        for mobility in MobilityModel::ALL {
            let results: Vec<(f64, f64)> = seeds
                .par_iter()
                .map(|&seed| {
                    let cfg = ScenarioConfig { protocol, mobility, seed, ..base.clone() };
                    let m = run_scenario(&cfg, TraceOptions::default()).unwrap().metrics;
                    (m.pdr_unique.unwrap(), m.loss_pct.unwrap())
                })
                .collect();
            let n = results.len() as f64;
            let pdr: f64 = results.iter().map(|r| r.0).sum::<f64>() / n;
            let loss: f64 = results.iter().map(|r| r.1).sum::<f64>() / n;
            row.push_str(&format!("  {:6.3}|{:4.1}", pdr, loss));
        }
        println!("{row}");
    }
}
