//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use d2dsim::geometry::{path_gain_db, ChannelParams, ScenarioKind};
use d2dsim::modeselect::MsPolicy;
use d2dsim::powerctl::{um_solve, zander_inner_loop, PcScheme, PowerAllocation, PowerBounds, SinrTargets, UmConfig};
use d2dsim::routing::validate;
use d2dsim::sim::{emit_outputs, prepare_drop, simulate, sweep, EntityKind, RunReport, SimConfig};
use d2dsim::units::{db_to_linear, linear_to_db};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const ZANDER_INSTANCES: usize = 50;
const ZANDER_MAX_RHO: f64 = 0.9;
const ZANDER_ITERS: usize = 500;
const ZANDER_REL_TOL: f64 = 1e-6;
const ZANDER_BUDGET: Duration = Duration::from_secs(5);

const UM_INSTANCES: usize = 100;
const UM_OMEGAS: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
const UM_TOL_DB: f64 = 0.5;
const UM_BUDGET: Duration = Duration::from_secs(30);

const DROPS: usize = 100;
const MAX_FAILURE_RATE: f64 = 0.01;
const PROXIMITY_MIN_GAP_DB: f64 = 10.0;
const PROXIMITY_MIN_CELLULAR_GAIN_DB: f64 = 1.0;
const PROXIMITY_BUDGET: Duration = Duration::from_secs(300);
const RANGE_MIN_OUTAGE_DROP: f64 = 0.05;
const RANGE_MIN_P10_GAIN_DB: f64 = 2.0;
const SWEEP_OMEGAS: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
const PROXIMITY_MIN_UM_OVER_FIX: f64 = 1.15;
const RANGE_MIN_UM_OVER_FIX: f64 = 1.10;

const CONSTRAINT_DROPS: usize = 10_000;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn zander_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5A4E);
    let bounds = PowerBounds::from_dbm(-23.0, 23.0);
    let mut worst: f64 = 0.0;
    for _ in 0..ZANDER_INSTANCES {
        let n = rng.random_range(3..=6);
        let inst = common::random_zander_instance(&mut rng, n, ZANDER_MAX_RHO, bounds);
        let want = common::zander_fixed_point(&inst.gains, &inst.targets, common::noise_w());
        let sr = common::SingleResource::new(&inst.gains);
        let net = sr.network(bounds);
        let p0 = PowerAllocation::uniform(&net, d2dsim::units::dbm_to_watts(10.0));
        let p = zander_inner_loop(&net, &SinrTargets(inst.targets.clone()), p0, ZANDER_ITERS);
        for (got, want) in p.powers.iter().zip(&want) {
            worst = worst.max((got - want).abs() / want);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= ZANDER_REL_TOL && elapsed < ZANDER_BUDGET,
        format!("{ZANDER_INSTANCES} instances, worst relative error {worst:.2e}, {elapsed:.2?}"),
    )
}

fn um_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A11);
    let bounds = PowerBounds::from_dbm(-23.0, 23.0);
    let channel = ChannelParams::default();
    let shadow = Normal::new(0.0, channel.shadowing_sigma_db).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..UM_INSTANCES {
        let d = rng.random_range(10.0..700.0);
        let g = db_to_linear(path_gain_db(d, shadow.sample(&mut rng), &channel));
        let inst = common::SingleResource::new(&DMatrix::from_element(1, 1, g));
        let net = inst.network(bounds);
        for omega in UM_OMEGAS {
            let out = um_solve(&UmConfig::with_omega(omega), &net).expect("solver runs");
            let got = linear_to_db(out.state.targets.0[0]);
            let want = common::isolated_grid_optimum_db(g, omega, bounds);
            worst = worst.max((got - want).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= UM_TOL_DB && elapsed < UM_BUDGET,
        format!("{} solves, worst deviation {worst:.3} dB, {elapsed:.2?}", UM_INSTANCES * UM_OMEGAS.len()),
    )
}

fn run(scenario: ScenarioKind, policy: MsPolicy) -> RunReport {
    let config = SimConfig { mode_selection: policy, drops: DROPS, ..SimConfig::for_scenario(scenario) };
    simulate(&config, None).expect("simulation runs")
}

fn failures_ok(reports: &[&RunReport]) -> bool {
    reports.iter().all(|r| r.stats.failure_rate() < MAX_FAILURE_RATE)
}

fn median(r: &RunReport, k: EntityKind) -> f64 {
    r.stats.class(k).median_db().unwrap_or(f64::NAN)
}

fn proximity_ordering() -> Outcome {
    let start = Instant::now();
    let [cmode, dms, hms] = [MsPolicy::Cmode, MsPolicy::Dms, MsPolicy::Hms].map(|p| run(ScenarioKind::Proximity, p));
    let elapsed = start.elapsed();
    let d2d = |r| median(r, EntityKind::D2dCandidate);
    let cell = |r| median(r, EntityKind::CellularUe);
    let gap = d2d(&hms) - d2d(&cmode);
    let cell_gain = cell(&hms) - cell(&cmode);
    let pass = d2d(&hms) >= d2d(&dms)
        && d2d(&dms) >= d2d(&cmode)
        && gap >= PROXIMITY_MIN_GAP_DB
        && cell_gain >= PROXIMITY_MIN_CELLULAR_GAIN_DB
        && failures_ok(&[&cmode, &dms, &hms])
        && elapsed < PROXIMITY_BUDGET;
    outcome(
        pass,
        format!(
            "median D2D SINR HMS {:.2} / DMS {:.2} / Cmode {:.2} dB, gap {gap:.2} dB, cellular gain {cell_gain:.2} dB, {elapsed:.2?}",
            d2d(&hms),
            d2d(&dms),
            d2d(&cmode)
        ),
    )
}

fn range_extension_outage() -> Outcome {
    let cmode = run(ScenarioKind::RangeExtension, MsPolicy::Cmode);
    let hms = run(ScenarioKind::RangeExtension, MsPolicy::Hms);
    let outage = |r: &RunReport| r.stats.p_sinr_below_0db().unwrap_or(f64::NAN);
    let p10 = |r: &RunReport| r.stats.class(EntityKind::D2dCandidate).p10_db().unwrap_or(f64::NAN);
    let drop = outage(&cmode) - outage(&hms);
    let gain = p10(&hms) - p10(&cmode);
    outcome(
        drop >= RANGE_MIN_OUTAGE_DROP && gain >= RANGE_MIN_P10_GAIN_DB && failures_ok(&[&cmode, &hms]),
        format!(
            "P(SINR<0 dB) Cmode {:.3} -> HMS {:.3}, 10th percentile {:.2} -> {:.2} dB",
            outage(&cmode),
            outage(&hms),
            p10(&cmode),
            p10(&hms)
        ),
    )
}

fn omega_sweep() -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    for (scenario, min_ratio) in
        [(ScenarioKind::Proximity, PROXIMITY_MIN_UM_OVER_FIX), (ScenarioKind::RangeExtension, RANGE_MIN_UM_OVER_FIX)]
    {
        let base = SimConfig { drops: DROPS, ..SimConfig::for_scenario(scenario) };
        let reports = sweep(&base, &SWEEP_OMEGAS, None).expect("sweep runs");
        let um = &reports[..SWEEP_OMEGAS.len()];
        let fix = reports.iter().find(|r| r.config.power_control == PcScheme::Fix).unwrap();
        let thr = |r: &RunReport| (r.stats.mean_throughput_bps.unwrap(), r.stats.throughput_se_bps.unwrap());
        let pow = |r: &RunReport| (r.stats.mean_total_power_w.unwrap(), r.stats.total_power_se_w.unwrap());
        let non_increasing = |f: &dyn Fn(&RunReport) -> (f64, f64)| {
            um.windows(2).all(|w| {
                let ((a, sa), (b, sb)) = (f(&w[0]), f(&w[1]));
                b <= a + (sa * sa + sb * sb).sqrt()
            })
        };
        let ratio = thr(&um[0]).0 / thr(fix).0;
        let ok = non_increasing(&thr)
            && non_increasing(&pow)
            && ratio >= min_ratio
            && failures_ok(&reports.iter().collect::<Vec<_>>());
        pass &= ok;
        let thr_list: Vec<String> = um.iter().map(|r| format!("{:.3}", thr(r).0 / 1e6)).collect();
        let pow_list: Vec<String> = um.iter().map(|r| format!("{:.2}", pow(r).0)).collect();
        details.push(format!(
            "{}: throughput [{}] Mbit/s, power [{}] W, UM(0.1)/Fix {ratio:.2}",
            scenario.as_str(),
            thr_list.join(", "),
            pow_list.join(", ")
        ));
    }
    outcome(pass, details.join("; "))
}

fn constraint_suite() -> Outcome {
    let configs: Vec<SimConfig> = [ScenarioKind::Proximity, ScenarioKind::RangeExtension]
        .into_iter()
        .flat_map(|s| {
            [MsPolicy::Cmode, MsPolicy::Dms, MsPolicy::Hms].map(move |p| SimConfig {
                mode_selection: p,
                seed: 0xC0,
                ..SimConfig::for_scenario(s)
            })
        })
        .collect();
    let mut violations = 0;
    let mut failures = 0;
    for i in 0..CONSTRAINT_DROPS {
        let config = &configs[i % configs.len()];
        match prepare_drop(config, i) {
            Ok(d) => violations += validate(&d.routing, &d.plan.links, &d.kinds).len(),
            Err(_) => failures += 1,
        }
    }
    let mut missed = Vec::new();
    let mut mutations = 0;
    for seed in 0..5 {
        for (name, flagged) in common::mutation_results(&common::valid_drop(seed)) {
            mutations += 1;
            if !flagged {
                missed.push(name);
            }
        }
    }
    outcome(
        violations == 0 && failures == 0 && missed.is_empty(),
        format!(
            "{CONSTRAINT_DROPS} drops, {violations} violations, {failures} failed drops; {} of {mutations} mutations flagged",
            mutations - missed.len()
        ),
    )
}

fn files_equal(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = std::fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in &names {
        if std::fs::read(a.join(name)).unwrap() != std::fs::read(b.join(name)).map_err(|e| e.to_string())? {
            return Err(format!("{} differs", name.to_string_lossy()));
        }
    }
    Ok(names.len())
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut result = Ok(0);
    for scenario in [ScenarioKind::Proximity, ScenarioKind::RangeExtension] {
        let config = SimConfig { drops: DROPS, seed: 77, ..SimConfig::for_scenario(scenario) };
        let dirs = [(1, "one"), (4, "four"), (4, "four_again")].map(|(workers, name)| {
            let dir = tmp.path().join(scenario.as_str()).join(name);
            let report = simulate(&config, Some(workers)).unwrap();
            emit_outputs(&report, &dir).unwrap();
            dir
        });
        result = result.and_then(|n| {
            let a = files_equal(&dirs[0], &dirs[1])?;
            files_equal(&dirs[0], &dirs[2])?;
            Ok(n + a)
        });
    }
    match result {
        Ok(n) => outcome(n == 8, format!("{n} files byte-identical across 1 and 4 workers and reruns")),
        Err(e) => outcome(false, e),
    }
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("zander oracle", zander_oracle),
        ("utility-max 1-D oracle", um_oracle),
        ("proximity mode selection", proximity_ordering),
        ("range extension outage", range_extension_outage),
        ("omega sweep", omega_sweep),
        ("constraint suite", constraint_suite),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!("criterion {} ({name}): {} - {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
