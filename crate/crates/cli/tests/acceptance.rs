//! Acceptance suite, run without the test harness so the report is always
//! printed: one PASS/FAIL line per criterion, non-zero exit if any failed.
//!
//! ```text
//! cargo test -p fbs-cli --test acceptance
//! ```

use std::path::PathBuf;

use fbs::congestion::{nash_enumerate, verify_potential_identity};
use fbs::design::{self, Constraint, DesignOutcome};
use fbs::dynamics::{self, EquivalenceMode, Schedule};
use fbs::{CostMatrix, FbsModel, PayoffTable, PerfTable};
use fbs_cli::{export, SystemDocument};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn doc(name: &str) -> SystemDocument {
    SystemDocument::parse(&std::fs::read_to_string(data(name)).unwrap()).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

const DESIGNED: [f64; 15] = [11., 2., 4., 0., 5., 6., 0., 3., 7., 2., 6., 3., 1., 3., 4.];
const CLOSEST_XI: [f64; 15] = [
    0.4704, 0.1516, 0.0004, 1.5766, 4.6840, 1.1375, 5.7214, 0.1263, 9.5267, 11.2585, 5.0109,
    2.5485, 0., 0., 0.,
];
const CLOSEST_P: [f64; 18] = [
    29., 25., 23.9887, 28.8315, 12.5786, 17.4214, 24.3156, 23.7109, 19.1532, 26.8641, 28.7218,
    24.1641, 32.1142, 18.6828, 26.6329, 25.1359, 23.5674, 22.1170,
];
const PAYOFFS_GIVEN: [[f64; 18]; 3] = [
    [
        6., 7., 5.5, 11.5, 6., 12., 2., 10.5, 2.5, 3.5, 10.5, 6., 15.5, 11.5, 21., 4., 10., 5.5,
    ],
    [
        10.5, 13., 16., 10., 1., 10.5, 5., 11.5, 11.5, 4.5, 10.5, 7., 10.5, 0.5, 10., 3.5, 5., 5.,
    ],
    [
        6., 2., 0.5, 21., 5.5, 10.5, 5.5, 5.5, 1., 3.5, 5.5, 1., 15.5, 1.5, 10., 4., 1.5, 0.5,
    ],
];
const PAYOFFS_CLOSEST: [[f64; 18]; 3] = [
    [
        4.81, 7.01, 4.96, 11.25, 5.28, 11.57, 1.85, 10.88, 2.17, 2.67, 10.73, 5.14, 14.54, 11.38,
        20.79, 2.67, 10.73, 5.14,
    ],
    [
        9.70, 12.55, 16.09, 9.53, 0.13, 9.53, 5.01, 11.26, 11.26, 4.28, 10.17, 7.06, 9.53, 0.13,
        9.53, 2.55, 5.01, 5.01,
    ],
    [
        5.14, 1.14, 0.13, 20.94, 4.68, 9.53, 5.29, 4.68, 0.13, 2.83, 4.68, 0.13, 15.01, 1.58, 9.53,
        3.15, 1.58, 0.13,
    ],
];
const BEST_RESPONSES: [[usize; 18]; 3] = [
    [2, 1, 1, 1, 1, 1, 1, 2, 1, 2, 1, 1, 1, 1, 1, 1, 2, 1],
    [3, 2, 2, 3, 2, 2, 3, 2, 2, 3, 2, 3, 3, 2, 3, 3, 2, 3],
    [3, 3, 3, 2, 2, 2, 3, 3, 3, 3, 3, 3, 2, 2, 2, 3, 3, 3],
];
const TRANSITIONS: [[usize; 18]; 3] = [
    [10, 2, 3, 4, 5, 6, 7, 17, 9, 10, 2, 3, 4, 5, 6, 7, 17, 9],
    [
        7, 5, 6, 7, 5, 6, 7, 5, 6, 16, 14, 18, 16, 14, 18, 16, 14, 18,
    ],
    [
        3, 3, 3, 5, 5, 5, 9, 9, 9, 12, 12, 12, 14, 14, 14, 18, 18, 18,
    ],
];

fn closest(doc: &SystemDocument) -> design::ClosestGame {
    design::least_squares_design(&doc.model, doc.perf.as_ref().unwrap(), 1e-9).unwrap()
}

fn b_matrix() -> Check {
    let d = doc("improper.txt");
    let sys = design::build_design_system(&d.model, d.perf.as_ref().unwrap())
        .map_err(|e| e.to_string())?;
    let got = export::b_matrix_csv(&d.model, &sys);
    let want = std::fs::read_to_string(data("b_matrix.csv")).unwrap();
    ensure(got == want, || {
        "exported B differs from the reference matrix".into()
    })?;
    Ok("18x15 export byte-identical".into())
}

fn exact_design() -> Check {
    let d = doc("designable.txt");
    let perf = d.perf.as_ref().unwrap();
    let sys = design::build_design_system(&d.model, perf).unwrap();
    let DesignOutcome::Exact(e) = design::solve_exact(&sys, 1e-9) else {
        return Err("solve_exact did not return Exact".into());
    };
    let xi = CostMatrix::from_flat(5, 3, DESIGNED.to_vec()).unwrap();
    let r = verify_potential_identity(&d.model, &xi, perf, 1e-9).unwrap();
    ensure(r.passed && r.level_gap == 0.0, || {
        format!("literal costs: {r:?}")
    })?;
    Ok(format!(
        "Exact (rank {}, freedom {}); literal costs residual {} and deviation identity passes",
        e.rank, e.freedom, r.level_gap
    ))
}

fn inconsistency() -> Check {
    let d = doc("improper.txt");
    let sys = design::build_design_system(&d.model, d.perf.as_ref().unwrap()).unwrap();
    match design::solve_exact(&sys, 1e-9) {
        DesignOutcome::Inconsistent { rank, residual } => Ok(format!(
            "Inconsistent (rank {rank}, residual {residual:.4})"
        )),
        other => Err(format!("expected Inconsistent, got {:?}", other.kind())),
    }
}

fn closest_game() -> Check {
    let g = closest(&doc("improper.txt"));
    for (k, (a, b)) in g.xi.flat().iter().zip(CLOSEST_XI).enumerate() {
        ensure((a - b).abs() <= 1e-3, || {
            format!("xi0[{}] = {a}, expected {b}", k + 1)
        })?;
    }
    for (k, (a, b)) in g.p0.values().iter().zip(CLOSEST_P).enumerate() {
        ensure((a - b).abs() <= 1e-3, || {
            format!("p0[{}] = {a}, expected {b}", k + 1)
        })?;
    }
    ensure(g.kept == (0..12).collect::<Vec<_>>(), || {
        format!("kept {:?}", g.kept)
    })?;
    ensure((g.epsilon_hat - 0.8315).abs() <= 1e-3, || {
        format!("epsilon_hat {}", g.epsilon_hat)
    })?;
    Ok(format!(
        "xi0, p0 within 1e-3; kept 1..12; epsilon_hat {:.7}",
        g.epsilon_hat
    ))
}

/// Reads the cost columns back out of an exported payoff CSV.
fn exported_payoffs(model: &FbsModel, payoffs: &PayoffTable) -> Vec<Vec<f64>> {
    export::payoffs_csv(model, payoffs)
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(2).map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn payoff_tables() -> Check {
    let d = doc("improper.txt");
    let given = PayoffTable::from_costs(&d.model, d.xi.as_ref().unwrap()).unwrap();
    let near = PayoffTable::from_costs(&d.model, &closest(&d).xi).unwrap();
    for (name, table, want) in [
        ("given", &given, &PAYOFFS_GIVEN),
        ("closest", &near, &PAYOFFS_CLOSEST),
    ] {
        let rows = exported_payoffs(&d.model, table);
        for (k, row) in rows.iter().enumerate() {
            for (i, &c) in row.iter().enumerate() {
                let rounded = (c * 100.0).round() / 100.0;
                ensure((rounded - want[i][k]).abs() <= 0.01 + 1e-9, || {
                    format!(
                        "{name}: c{} at profile {} is {rounded}, expected {}",
                        i + 1,
                        k + 1,
                        want[i][k]
                    )
                })?;
            }
        }
    }
    Ok("both 3x18 tables within 0.01".into())
}

fn dynamics_tables() -> Check {
    let d = doc("improper.txt");
    let near_xi = closest(&d).xi;
    for (name, xi) in [("given", d.xi.as_ref().unwrap()), ("closest", &near_xi)] {
        let payoffs = PayoffTable::from_costs(&d.model, xi).unwrap();
        let maps = dynamics::best_response_maps(&d.model, &payoffs).unwrap();
        for (i, map) in maps.iter().enumerate() {
            let got: Vec<usize> = map.choice.iter().map(|c| c + 1).collect();
            ensure(got == BEST_RESPONSES[i], || {
                format!("{name}: player {} choices {got:?}", i + 1)
            })?;
        }
        for (i, l) in dynamics::transition_maps(&maps, &d.model)
            .iter()
            .enumerate()
        {
            let got = l.delta_indices();
            ensure(got == TRANSITIONS[i], || {
                format!("{name}: L{} = {got:?}", i + 1)
            })?;
        }
    }
    Ok("choice maps and L1, L2, L3 exact for both cost sets".into())
}

fn equivalence_and_convergence() -> Check {
    let d = doc("improper.txt");
    let g = closest(&d);
    let given = PayoffTable::from_costs(&d.model, d.xi.as_ref().unwrap()).unwrap();
    let near = PayoffTable::from_costs(&d.model, &g.xi).unwrap();
    let a = dynamics::best_response_maps(&d.model, &given).unwrap();
    let b = dynamics::best_response_maps(&d.model, &near).unwrap();
    for mode in [EquivalenceMode::Strict, EquivalenceMode::Selected] {
        let r = dynamics::dynamic_equivalence(&a, &b, mode).unwrap();
        ensure(r.equivalent, || format!("{mode:?}: {:?}", r.witnesses))?;
    }
    let l = dynamics::transition_maps(&a, &d.model);
    let seeds = 25u64;
    for seed in 0..seeds {
        for start in 0..18 {
            let t = dynamics::simulate(&l, &Schedule::UniformRandom { seed }, start, 100, None)
                .unwrap();
            ensure(t.absorbing == Some(4), || {
                format!(
                    "seed {seed} start {}: {:?}",
                    start + 1,
                    t.absorbing.map(|k| k + 1)
                )
            })?;
        }
    }
    let r = dynamics::near_optimality_check(d.perf.as_ref().unwrap(), &g.p0, 4, 0.9).unwrap();
    ensure(r.holds && r.gap == 0.0, || format!("{r:?}"))?;
    Ok(format!(
        "equivalent in both modes; {} runs absorb at 5 = (1,2,2); gap {} < {}",
        seeds * 18,
        r.gap,
        r.bound
    ))
}

fn random_model(rng: &mut ChaCha8Rng) -> FbsModel {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=6);
    let actions = (0..n)
        .map(|_| {
            (0..rng.random_range(1..=4))
                .map(|_| (0..m).filter(|_| rng.random_bool(0.5)).collect())
                .collect()
        })
        .collect();
    FbsModel::new(m, actions).unwrap()
}

fn random_costs(rng: &mut ChaCha8Rng, model: &FbsModel, int_valued: bool) -> CostMatrix {
    let flat = (0..model.cost_len())
        .map(|_| {
            if int_valued {
                f64::from(rng.random_range(-20i32..=20))
            } else {
                rng.random_range(-10.0..10.0)
            }
        })
        .collect();
    CostMatrix::from_flat(model.facilities(), model.players(), flat).unwrap()
}

fn l2(a: &PerfTable, b: &PerfTable) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn one_instance(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let model = random_model(rng);
    let ell = model.profile_count();

    // (a) integer costs keep every sum exact
    let xi = random_costs(rng, &model, true);
    let pot = PerfTable::from_potential(&model, &xi).unwrap();
    let r = verify_potential_identity(&model, &xi, &pot, 0.0).unwrap();
    ensure(r.passed, || format!("(a) {r:?}"))?;

    // (b)
    let payoffs = PayoffTable::from_costs(&model, &xi).unwrap();
    let maps = dynamics::best_response_maps(&model, &payoffs).unwrap();
    let rests = dynamics::fixed_points(&model, &maps);
    let nash = nash_enumerate(&model, &payoffs).unwrap();
    ensure(rests == nash, || {
        format!("(b) fixed points {rests:?} vs nash {nash:?}")
    })?;

    // (c) integer costs produce ties, which exercises the incumbent rule
    let l = dynamics::transition_maps(&maps, &model);
    let seed = rng.random();
    for schedule in [Schedule::RoundRobin, Schedule::UniformRandom { seed }] {
        let start = rng.random_range(0..ell);
        let t = dynamics::simulate(&l, &schedule, start, 100 * ell, Some(&pot)).unwrap();
        ensure(t.converged, || {
            format!("(c) no convergence from {start} under {schedule:?}")
        })?;
        let series = t.potential_series.as_ref().unwrap();
        for w in 0..t.steps() {
            let moved = t.profiles[w] != t.profiles[w + 1];
            let ok = if moved {
                series[w + 1] < series[w]
            } else {
                series[w + 1] == series[w]
            };
            ensure(ok, || {
                format!(
                    "(c) potential {} -> {} at step {}",
                    series[w],
                    series[w + 1],
                    w + 1
                )
            })?;
        }
    }

    // (d)
    let v = random_costs(rng, &model, false);
    let perf = PerfTable::from_potential(&model, &v).unwrap();
    let sys = design::build_design_system(&model, &perf).unwrap();
    let e = match design::solve_exact(&sys, 1e-9) {
        DesignOutcome::Exact(e) => e,
        other => {
            return Err(format!(
                "(d) consistent criterion reported {:?} (rank {}, residual {:e}, |P| {})",
                other.kind(),
                other.rank(),
                other.residual(),
                perf.sup_norm()
            ))
        }
    };
    let got = PerfTable::from_potential(&model, &e.xi).unwrap();
    let dist = got.sup_distance(&perf);
    ensure(dist <= 1e-8, || {
        format!("(d) recovered potential off by {dist}")
    })?;

    // (e)
    let target = PerfTable::new((0..ell).map(|_| rng.random_range(-30.0..30.0)).collect()).unwrap();
    let g = design::least_squares_design(&model, &target, 1e-9).unwrap();
    let fit = |flat: Vec<f64>| {
        let xi = CostMatrix::from_flat(model.facilities(), model.players(), flat).unwrap();
        l2(&target, &PerfTable::from_potential(&model, &xi).unwrap())
    };
    let base = fit(g.xi.flat().to_vec());
    for &c in &g.kept {
        for h in [1e-3, -1e-3, 0.5, -0.5] {
            let mut moved = g.xi.flat().to_vec();
            moved[c] += h;
            let d = fit(moved);
            ensure(d >= base - 1e-9 * (1.0 + base), || {
                format!("(e) column {c} step {h}: {d} < {base}")
            })?;
        }
    }
    Ok(())
}

fn property_suite() -> Check {
    let instances = 250;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for k in 0..instances {
        one_instance(&mut rng).map_err(|e| format!("instance {k}: {e}"))?;
    }
    Ok(format!("{instances} random instances, (a) to (e) hold"))
}

fn restricted_design() -> Check {
    let d = doc("designable.txt");
    let perf = d.perf.as_ref().unwrap();
    let constraints = vec![Constraint::new(vec![1., 0., 0., 0., 0.], 3.0).unwrap()];
    ensure(d.constraints == constraints, || {
        "document constraint differs".into()
    })?;
    let r = design::solve_restricted(&d.model, perf, &constraints, 1e-9).unwrap();
    ensure(r.partition.desirable.len() == 17, || {
        format!("{} desirable", r.partition.desirable.len())
    })?;
    let xi = r.outcome.xi().ok_or("restricted system not solvable")?;
    let pot = PerfTable::from_potential(&d.model, xi).unwrap();
    for &k in &r.partition.desirable {
        let gap = (pot.get(k) - perf.get(k)).abs();
        ensure(gap <= 1e-9 * (1.0 + perf.sup_norm()), || {
            format!("profile {}: gap {gap}", k + 1)
        })?;
    }
    let penalized = r.penalized.perf.argmin();
    let best = r
        .partition
        .desirable
        .iter()
        .copied()
        .min_by(|&a, &b| perf.get(a).total_cmp(&perf.get(b)))
        .unwrap();
    ensure(penalized == [best], || {
        format!("penalized argmin {penalized:?} vs {best}")
    })?;
    Ok(format!(
        "17 desirable profiles reproduced; penalized argmin = constrained argmin = {}",
        best + 1
    ))
}

fn main() -> std::process::ExitCode {
    let criteria: [Criterion; 9] = [
        ("B-matrix reproduction", b_matrix),
        ("exact design", exact_design),
        ("inconsistency detection", inconsistency),
        ("closest game", closest_game),
        ("payoff tables", payoff_tables),
        ("dynamics tables", dynamics_tables),
        ("equivalence and convergence", equivalence_and_convergence),
        ("property suite", property_suite),
        ("restricted design", restricted_design),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", k + 1);
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all {} criteria passed", criteria.len());
        std::process::ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {} criteria failed", criteria.len());
        std::process::ExitCode::FAILURE
    }
}
