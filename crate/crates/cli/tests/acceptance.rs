//! Acceptance suite. Each criterion runs as its own test and prints one
//! PASS line with the measured numbers (visible with `--nocapture`); a
//! failure panics with the same numbers. Criteria 2, 3, 4, and 7 share one
//! 360-run matrix (6 protocols x 3 mobility models x 20 seeds at 10 m/s).

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;

use mwsim_core::experiment::{csv_row, run_one, run_sweep, ScenarioConfig, SweepSpec};
use mwsim_core::geom::Vec2;
use mwsim_core::kernel::{EventHandler, Kernel, RandomStream, SimEvent, SimTime};
use mwsim_core::metrics::{self, RunCounters};
use mwsim_core::mobility::{
    self, FieldGeometry, MobilityModel, MobilityParams, MobilityState,
};
use mwsim_core::protocols::ProtocolKind;
use mwsim_core::sim::{run_scenario, RunOutput, TraceOptions};

const SEEDS: std::ops::RangeInclusive<u64> = 1..=20;
const MATRIX_SPEED: f64 = 10.0;

type MatrixKey = (usize, usize, u64); // (protocol index, model index, seed)

fn proto_idx(p: ProtocolKind) -> usize {
    ProtocolKind::ALL.iter().position(|q| *q == p).unwrap()
}

fn model_idx(m: MobilityModel) -> usize {
    MobilityModel::ALL.iter().position(|q| *q == m).unwrap()
}

/// The shared evaluation matrix at defaults, speed 10 m/s, 20 seeds.
fn matrix() -> &'static BTreeMap<MatrixKey, RunOutput> {
    static MATRIX: OnceLock<BTreeMap<MatrixKey, RunOutput>> = OnceLock::new();
    MATRIX.get_or_init(|| {
        let mut cells = Vec::new();
        for protocol in ProtocolKind::ALL {
            for mobility in MobilityModel::ALL {
                for seed in SEEDS {
                    cells.push((protocol, mobility, seed));
                }
            }
        }
        cells
            .into_par_iter()
            .map(|(protocol, mobility, seed)| {
                let cfg = ScenarioConfig {
                    protocol,
                    mobility,
                    speed: MATRIX_SPEED,
                    seed,
                    ..ScenarioConfig::default()
                };
                let out = run_scenario(&cfg, TraceOptions::default())
                    .expect("matrix run must complete");
                ((proto_idx(protocol), model_idx(mobility), seed), out)
            })
            .collect()
    })
}

fn mean_pdr(protocol: ProtocolKind, mobility: MobilityModel) -> f64 {
    let m = matrix();
    let vals: Vec<f64> = SEEDS
        .map(|seed| {
            m[&(proto_idx(protocol), model_idx(mobility), seed)]
                .metrics
                .pdr_unique
                .expect("traffic present")
        })
        .collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

fn mean_loss(protocol: ProtocolKind, mobility: MobilityModel) -> f64 {
    let m = matrix();
    let vals: Vec<f64> = SEEDS
        .map(|seed| {
            m[&(proto_idx(protocol), model_idx(mobility), seed)]
                .metrics
                .loss_pct
                .expect("traffic present")
        })
        .collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

#[test]
fn criterion_1_static_sanity() {
    // speed 0, 100 nodes, connected topology (range 300 m), all six
    // protocols, 3 seeds: pdr_unique = 1.000000 and loss_pct = 0.000000
    // exactly, under 5 s per run.
    for protocol in ProtocolKind::ALL {
        for seed in 1..=3 {
            let cfg = ScenarioConfig {
                protocol,
                mobility: MobilityModel::RandomWaypoint,
                speed: 0.0,
                range: 300.0,
                seed,
                ..ScenarioConfig::default()
            };
            let start = Instant::now();
            let out = run_scenario(&cfg, TraceOptions::default()).unwrap();
            let elapsed = start.elapsed();
            let m = out.metrics;
            assert!(m.counters.sent > 0, "{protocol} seed {seed}: no traffic");
            assert_eq!(
                m.pdr_unique,
                Some(1.0),
                "criterion 1 FAIL: {protocol} seed {seed}: {:?}",
                m.counters
            );
            assert_eq!(
                m.loss_pct,
                Some(0.0),
                "criterion 1 FAIL: {protocol} seed {seed}"
            );
            assert!(
                elapsed.as_secs_f64() < 5.0,
                "criterion 1 FAIL: {protocol} seed {seed} took {elapsed:?}"
            );
        }
    }
    println!(
        "[PASS] criterion 1: static sanity — pdr_unique=1.000000, loss_pct=0.000000 for all 6 \
         protocols x 3 seeds, each run < 5 s"
    );
}

#[test]
fn criterion_2_recovery_benefit() {
    // Per mobility model at 10 m/s over 20 seeds:
    // mean pdr(GRC-R) - mean pdr(GRC) >= +0.02, same for DEMC-R vs DEMC.
    let mut report = Vec::new();
    for mobility in MobilityModel::ALL {
        let grc_gain = mean_pdr(ProtocolKind::GrcR, mobility) - mean_pdr(ProtocolKind::Grc, mobility);
        let demc_gain =
            mean_pdr(ProtocolKind::DemcR, mobility) - mean_pdr(ProtocolKind::Demc, mobility);
        assert!(
            grc_gain >= 0.02,
            "criterion 2 FAIL: GRC-R - GRC = {grc_gain:+.4} on {mobility} (need >= +0.02)"
        );
        assert!(
            demc_gain >= 0.02,
            "criterion 2 FAIL: DEMC-R - DEMC = {demc_gain:+.4} on {mobility} (need >= +0.02)"
        );
        report.push(format!(
            "{mobility}: GRC {grc_gain:+.3}, DEMC {demc_gain:+.3}"
        ));
    }
    println!(
        "[PASS] criterion 2: recovery benefit >= +0.02 pdr on every model ({})",
        report.join("; ")
    );
}

#[test]
fn criterion_3_mobility_loss_ordering() {
    // mean loss(mass) > mean loss(rwp) > mean loss(linear) for at least 5 of
    // the 6 protocols at 10 m/s over 20 seeds.
    let mut holds = 0;
    let mut detail = Vec::new();
    for protocol in ProtocolKind::ALL {
        let mass = mean_loss(protocol, MobilityModel::Mass);
        let rwp = mean_loss(protocol, MobilityModel::RandomWaypoint);
        let linear = mean_loss(protocol, MobilityModel::Linear);
        let ok = mass > rwp && rwp > linear;
        if ok {
            holds += 1;
        }
        detail.push(format!(
            "{protocol}: mass {mass:.1} {} rwp {rwp:.1} {} linear {linear:.1}",
            if mass > rwp { ">" } else { "!>" },
            if rwp > linear { ">" } else { "!>" }
        ));
    }
    assert!(
        holds >= 5,
        "criterion 3 FAIL: ordering holds for only {holds}/6 protocols: {detail:?}"
    );
    println!(
        "[PASS] criterion 3: loss ordering mass > rwp > linear holds for {holds}/6 protocols \
         (need 5)"
    );
}

#[test]
fn criterion_4_category_ordering() {
    // Position-based protocols beat non-position-based on mean pdr_unique
    // for every mobility model at 10 m/s over 20 seeds.
    let position = [ProtocolKind::Mar, ProtocolKind::Grc, ProtocolKind::GrcR];
    let non_position = [ProtocolKind::Deca, ProtocolKind::Demc, ProtocolKind::DemcR];
    let mut report = Vec::new();
    for mobility in MobilityModel::ALL {
        let pos: f64 =
            position.iter().map(|p| mean_pdr(*p, mobility)).sum::<f64>() / position.len() as f64;
        let non: f64 = non_position.iter().map(|p| mean_pdr(*p, mobility)).sum::<f64>()
            / non_position.len() as f64;
        assert!(
            pos > non,
            "criterion 4 FAIL: position {pos:.4} <= non-position {non:.4} on {mobility}"
        );
        report.push(format!("{mobility}: {pos:.3} > {non:.3}"));
    }
    println!(
        "[PASS] criterion 4: position-based beats non-position-based on every model ({})",
        report.join("; ")
    );
}

#[test]
fn criterion_5_metric_identities() {
    // 10^4 fuzzed counter sets: the loss percentage matches a direct
    // recomputation of ((n - m) / n) * 100; the complement identity holds
    // without duplicates/stragglers; and the conservation partition holds
    // on every finalized matrix run.
    let mut stream = RandomStream::new(0xACCE97, "metric-fuzz");
    for _ in 0..10_000 {
        let sent = 1 + stream.next_u64() % 100_000;
        let delivered = stream.next_u64() % (sent + 1);
        let loss = metrics::packet_loss_pct(sent, delivered).unwrap();
        let recomputed = (sent - delivered) as f64 / sent as f64 * 100.0;
        assert_eq!(loss, recomputed, "loss formula mismatch for ({sent}, {delivered})");

        let record = metrics::finalize(RunCounters {
            sent,
            delivered_unique: delivered,
            duplicates: 0,
            dropped: sent - delivered,
            in_flight_at_end: 0,
        })
        .unwrap();
        let complement = record.loss_pct.unwrap() + 100.0 * record.pdr_unique.unwrap();
        assert!(
            (complement - 100.0).abs() < 1e-9,
            "complement identity violated: {complement}"
        );
    }
    for (key, out) in matrix() {
        let c = out.metrics.counters;
        assert_eq!(
            c.sent,
            c.delivered_unique + c.dropped + c.in_flight_at_end,
            "conservation violated for {key:?}: {c:?}"
        );
    }
    println!(
        "[PASS] criterion 5: loss-formula recomputation, complement identity (10^4 fuzz), and \
         conservation partition on all {} matrix runs",
        matrix().len()
    );
}

#[test]
fn criterion_6_determinism() {
    // A scenario run twice is bit-identical, and a sweep emits byte-identical
    // CSV at --jobs 1 and --jobs 8.
    let cfg = ScenarioConfig {
        protocol: ProtocolKind::DemcR,
        mobility: MobilityModel::Mass,
        speed: 15.0,
        seed: 1234,
        duration: 300.0,
        ..ScenarioConfig::default()
    };
    let a = run_one(&cfg).unwrap();
    let b = run_one(&cfg).unwrap();
    assert_eq!(a.echo, b.echo);
    assert_eq!(
        csv_row(&cfg, &a.output.metrics),
        csv_row(&cfg, &b.output.metrics),
        "criterion 6 FAIL: repeated run differs"
    );

    let spec = SweepSpec {
        protocols: vec![ProtocolKind::GrcR, ProtocolKind::Demc],
        mobilities: vec![MobilityModel::Mass],
        speeds: vec![5.0, 10.0],
        seeds: vec![1, 2, 3],
        base: ScenarioConfig {
            duration: 300.0,
            ..ScenarioConfig::default()
        },
    };
    let csv_serial = run_sweep(&spec, 1).unwrap();
    let csv_parallel = run_sweep(&spec, 8).unwrap();
    assert_eq!(
        csv_serial, csv_parallel,
        "criterion 6 FAIL: sweep output depends on job count"
    );
    println!(
        "[PASS] criterion 6: repeated runs bit-identical; sweep CSV byte-identical at --jobs 1 \
         vs --jobs 8 ({} bytes)",
        csv_serial.len()
    );
}

#[test]
fn criterion_7_message_count_audit() {
    // DECA: at most one clustering transmission per node per round.
    // DEMC: per-round clustering transmissions <= heads + member relays,
    // zero hello events, and cheaper mean control traffic than DECA.
    let m = matrix();
    let mut deca_total = 0u64;
    let mut demc_total = 0u64;
    let mut deca_runs = 0u64;
    let mut demc_runs = 0u64;
    for mobility in MobilityModel::ALL {
        for seed in SEEDS {
            let deca = &m[&(proto_idx(ProtocolKind::Deca), model_idx(mobility), seed)];
            assert!(
                deca.audit.max_clustering_tx_per_node_round <= 1,
                "criterion 7 FAIL: DECA node sent {} clustering messages in one round \
                 ({mobility}, seed {seed})",
                deca.audit.max_clustering_tx_per_node_round
            );
            assert_eq!(deca.audit.hello_events, 0);
            assert_eq!(deca.audit.control_tx_outside_window, 0);
            deca_total += deca.audit.clustering_tx_total;
            deca_runs += 1;

            let demc = &m[&(proto_idx(ProtocolKind::Demc), model_idx(mobility), seed)];
            for round in &demc.audit.rounds {
                assert!(
                    round.clustering_tx <= round.heads as u64 + round.relays,
                    "criterion 7 FAIL: DEMC round {} sent {} clustering messages with {} heads \
                     and {} relays ({mobility}, seed {seed})",
                    round.round,
                    round.clustering_tx,
                    round.heads,
                    round.relays
                );
            }
            assert_eq!(demc.audit.hello_events, 0, "DEMC sent hello traffic");
            assert_eq!(demc.audit.control_tx_outside_window, 0);
            demc_total += demc.audit.clustering_tx_total;
            demc_runs += 1;
        }
    }
    let deca_mean = deca_total as f64 / deca_runs as f64;
    let demc_mean = demc_total as f64 / demc_runs as f64;
    assert!(
        demc_mean < deca_mean,
        "criterion 7 FAIL: DEMC control traffic {demc_mean:.1} not below DECA {deca_mean:.1}"
    );
    println!(
        "[PASS] criterion 7: DECA <= 1 clustering tx/node/round; DEMC bounded by heads+relays \
         with zero hellos; mean control messages DEMC {demc_mean:.1} < DECA {deca_mean:.1}"
    );
}

// --- criterion 8: independent mobility reference implementations ----------

struct RefState {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    tx: f64,
    ty: f64,
    has_target: bool,
}

fn ref_reflect(state: &mut RefState, w: f64, h: f64) {
    if state.x < 0.0 {
        state.x = -state.x;
        state.vx = -state.vx;
    } else if state.x > w {
        state.x = 2.0 * w - state.x;
        state.vx = -state.vx;
    }
    if state.y < 0.0 {
        state.y = -state.y;
        state.vy = -state.vy;
    } else if state.y > h {
        state.y = 2.0 * h - state.y;
        state.vy = -state.vy;
    }
}

fn ref_linear_step(state: &mut RefState, dt: f64, w: f64, h: f64) {
    state.x += state.vx * dt;
    state.y += state.vy * dt;
    ref_reflect(state, w, h);
}

fn ref_mass_step(
    state: &mut RefState,
    p: &MobilityParams,
    dt: f64,
    w: f64,
    h: f64,
    stream: &mut RandomStream,
) {
    let speed = (state.vx * state.vx + state.vy * state.vy).sqrt();
    let heading = if state.vx == 0.0 && state.vy == 0.0 {
        0.0
    } else {
        state.vy.atan2(state.vx)
    };
    let ds = stream.gaussian(0.0, p.speed_sigma).unwrap();
    let dh = stream.gaussian(0.0, p.turn_sigma).unwrap();
    let new_speed = (speed + ds).clamp(p.v_min, p.v_max);
    let new_heading = heading + dh;
    state.vx = new_heading.cos() * new_speed;
    state.vy = new_heading.sin() * new_speed;
    state.x += state.vx * dt;
    state.y += state.vy * dt;
    ref_reflect(state, w, h);
}

fn ref_rwp_step(
    state: &mut RefState,
    p: &MobilityParams,
    dt: f64,
    w: f64,
    h: f64,
    stream: &mut RandomStream,
) {
    if !state.has_target {
        state.tx = stream.uniform(0.0, w).unwrap();
        state.ty = stream.uniform(0.0, h).unwrap();
        let speed = if p.v_max > p.v_min {
            stream.uniform(p.v_min, p.v_max).unwrap()
        } else {
            p.v_min
        };
        let dx = state.tx - state.x;
        let dy = state.ty - state.y;
        let dist = (dx * dx + dy * dy).sqrt();
        if dist > 0.0 {
            state.vx = dx / dist * speed;
            state.vy = dy / dist * speed;
        } else {
            state.vx = 0.0;
            state.vy = 0.0;
        }
        state.has_target = true;
    }
    let speed = (state.vx * state.vx + state.vy * state.vy).sqrt();
    let dx = state.tx - state.x;
    let dy = state.ty - state.y;
    let remaining = (dx * dx + dy * dy).sqrt();
    if remaining <= speed * dt {
        state.x = state.tx;
        state.y = state.ty;
        // pause = 0 at defaults: retarget immediately.
        state.tx = stream.uniform(0.0, w).unwrap();
        state.ty = stream.uniform(0.0, h).unwrap();
        let new_speed = if p.v_max > p.v_min {
            stream.uniform(p.v_min, p.v_max).unwrap()
        } else {
            p.v_min
        };
        let ndx = state.tx - state.x;
        let ndy = state.ty - state.y;
        let ndist = (ndx * ndx + ndy * ndy).sqrt();
        if ndist > 0.0 {
            state.vx = ndx / ndist * new_speed;
            state.vy = ndy / ndist * new_speed;
        } else {
            state.vx = 0.0;
            state.vy = 0.0;
        }
    } else {
        state.x += state.vx * dt;
        state.y += state.vy * dt;
    }
}

#[test]
fn criterion_8_mobility_oracle_equivalence() {
    // For each model: 1000 steps on 10 nodes with a fixed seed agree with the
    // independent reference within 1e-9 per coordinate; linear speed is
    // conserved to 1e-12 relative error; positions stay in-field across a
    // 10^5-case fuzz.
    let field = FieldGeometry::default();
    let (w, h) = (field.width, field.height);

    for model in MobilityModel::ALL {
        let params = MobilityParams {
            model,
            v_min: 2.0,
            v_max: 18.0,
            pause: 0.0,
            speed_sigma: 0.5,
            turn_sigma: 0.25,
            sample_interval: 1.0,
        };
        for node in 0..10u64 {
            let seed = 9000 + node;
            let mut stream = RandomStream::new(seed, "oracle");
            let mut ref_stream = RandomStream::new(seed, "oracle");

            let mut init = RandomStream::new(seed, "oracle-init");
            let x0 = init.uniform(0.0, w).unwrap();
            let y0 = init.uniform(0.0, h).unwrap();
            let heading = init.uniform(0.0, std::f64::consts::TAU).unwrap();
            let speed = init.uniform(params.v_min, params.v_max).unwrap();

            let mut state = MobilityState::at(Vec2::new(x0, y0));
            let mut reference = RefState {
                x: x0,
                y: y0,
                vx: 0.0,
                vy: 0.0,
                tx: 0.0,
                ty: 0.0,
                has_target: false,
            };
            if model != MobilityModel::RandomWaypoint {
                state.velocity = Vec2::from_heading(heading) * speed;
                reference.vx = heading.cos() * speed;
                reference.vy = heading.sin() * speed;
            }

            for step_no in 0..1000 {
                state = mobility::step(&state, &params, 1.0, &field, &mut stream).unwrap();
                match model {
                    MobilityModel::Linear => ref_linear_step(&mut reference, 1.0, w, h),
                    MobilityModel::Mass => {
                        ref_mass_step(&mut reference, &params, 1.0, w, h, &mut ref_stream)
                    }
                    MobilityModel::RandomWaypoint => {
                        ref_rwp_step(&mut reference, &params, 1.0, w, h, &mut ref_stream)
                    }
                }
                assert!(
                    (state.position.x - reference.x).abs() < 1e-9
                        && (state.position.y - reference.y).abs() < 1e-9,
                    "criterion 8 FAIL: {model} node {node} step {step_no}: {:?} vs ({}, {})",
                    state.position,
                    reference.x,
                    reference.y
                );
                if model == MobilityModel::Linear {
                    let rel = (state.velocity.norm() - speed).abs() / speed;
                    assert!(
                        rel < 1e-12,
                        "criterion 8 FAIL: linear speed drift {rel} at step {step_no}"
                    );
                }
            }
        }
    }

    // In-field fuzz: > 10^5 step cases spread over the three models.
    let mut fuzz = RandomStream::new(77_007, "oracle-fuzz");
    let mut cases = 0u64;
    for model in MobilityModel::ALL {
        let params = MobilityParams {
            model,
            v_min: 0.0,
            v_max: 25.0,
            pause: 1.0,
            speed_sigma: 1.0,
            turn_sigma: 0.7,
            sample_interval: 1.0,
        };
        for _ in 0..34 {
            let mut state = MobilityState::at(Vec2::new(
                fuzz.uniform(0.0, w).unwrap(),
                fuzz.uniform(0.0, h).unwrap(),
            ));
            let heading = fuzz.uniform(0.0, std::f64::consts::TAU).unwrap();
            state.velocity = mobility::init_velocity(&params, heading, &mut fuzz);
            for _ in 0..1000 {
                state = mobility::step(&state, &params, 1.0, &field, &mut fuzz).unwrap();
                assert!(
                    field.contains(state.position),
                    "criterion 8 FAIL: {model} escaped the field at {}",
                    state.position
                );
                cases += 1;
            }
        }
    }
    assert!(cases >= 100_000);
    println!(
        "[PASS] criterion 8: all 3 models match the independent reference to 1e-9/coordinate \
         over 1000 steps x 10 nodes; linear speed conserved to 1e-12; {cases} fuzz steps in-field"
    );
}

// --- criterion 9: kernel ordering fuzz ------------------------------------

struct DispatchLog {
    log: Vec<(f64, u64, u32)>,
}

impl EventHandler<u32> for DispatchLog {
    fn handle(&mut self, _: &mut Kernel<u32>, ev: SimEvent<u32>) -> Result<(), String> {
        self.log.push((ev.fire_at.secs(), ev.seq, ev.kind));
        Ok(())
    }
}

#[test]
fn criterion_9_kernel_ordering_fuzz() {
    // 10^5 randomly timed events dispatch in non-decreasing (fire_at, seq)
    // order and cancelled events never dispatch.
    let mut stream = RandomStream::new(0x0EDE9, "kernel-acceptance");
    let mut kernel = Kernel::new();
    let mut handler = DispatchLog { log: Vec::new() };
    let mut cancelled = std::collections::HashSet::new();
    let mut handles = Vec::new();
    for i in 0..100_000u32 {
        let t = stream.uniform(0.0, 5000.0).unwrap();
        handles.push((kernel.schedule(SimTime(t), i).unwrap(), i));
    }
    for (handle, payload) in &handles {
        if payload % 4 == 0 {
            assert!(kernel.cancel(*handle));
            cancelled.insert(*payload);
        }
    }
    kernel.run(SimTime(5000.0), &mut handler).unwrap();
    assert_eq!(handler.log.len(), 100_000 - cancelled.len());
    for pair in handler.log.windows(2) {
        let ordered = pair[0].0 < pair[1].0 || (pair[0].0 == pair[1].0 && pair[0].1 < pair[1].1);
        assert!(
            ordered,
            "criterion 9 FAIL: dispatch out of (fire_at, seq) order: {pair:?}"
        );
    }
    assert!(
        handler.log.iter().all(|e| !cancelled.contains(&e.2)),
        "criterion 9 FAIL: a cancelled event dispatched"
    );
    println!(
        "[PASS] criterion 9: 10^5-event fuzz dispatched in (fire_at, seq) order; {} cancelled \
         events never fired",
        cancelled.len()
    );
}
