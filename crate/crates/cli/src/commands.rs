//! Subcommand implementations. Each returns the text for stdout and an exit
//! status; files are written under the requested output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fbs::congestion::{nash_enumerate, verify_potential_identity, PotentialReport};
use fbs::design::{self, DesignOutcome};
use fbs::dynamics::{self, EquivalenceMode, Schedule, Trace};
use fbs::{CostMatrix, FbsModel, PayoffTable, PerfTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::document::{self, join, SystemDocument};
use crate::export;
use crate::svg;
use crate::trace::{model_digest, TraceFile};

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Usage = 1,
    Inconsistent = 2,
    Failed = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub struct CommandOutput {
    pub status: Status,
    pub stdout: String,
}

/// Facility-cost design and best-response dynamics for facility-based systems.
///
/// All payoffs are costs: players and the system criterion minimize them.
#[derive(Debug, Parser)]
#[command(name = "fbs", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleKind {
    /// Players take turns in order.
    Rr,
    /// A uniformly random player each step.
    Rand,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design facility costs whose potential is the criterion.
    Design {
        input: PathBuf,
        /// Keep some facility costs fixed: read them from PATH, or from the
        /// document's `fixed:` block when PATH is omitted.
        #[arg(long, num_args = 0..=1, value_name = "PATH")]
        partial: Option<Option<PathBuf>>,
        /// Only require the criterion on profiles satisfying the `constraints:` block.
        #[arg(long, conflicts_with = "partial")]
        restricted: bool,
        #[arg(long, default_value_t = fbs::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Least-squares closest congestion game.
    Closest {
        input: PathBuf,
        #[arg(long, default_value_t = fbs::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run myopic best-response dynamics.
    Simulate {
        input: PathBuf,
        /// Costs from a CSV written by `design` instead of the `xi:` block.
        #[arg(long, value_name = "CSV")]
        xi: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "rand")]
        schedule: ScheduleKind,
        /// Start profile, e.g. "1 2 2".
        #[arg(long, conflicts_with_all = ["all_starts", "random_starts"])]
        start: Option<String>,
        #[arg(long, conflicts_with = "random_starts")]
        all_starts: bool,
        /// Number of start profiles drawn from the seed.
        #[arg(long, value_name = "K")]
        random_starts: Option<usize>,
        /// Defaults to 100 times the number of profiles.
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Re-run a recorded trace and check it reproduces.
        #[arg(long, value_name = "TRACE", conflicts_with_all = ["start", "all_starts", "random_starts"])]
        replay: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check that the criterion is the potential of the given costs.
    Verify {
        input: PathBuf,
        #[arg(long, default_value_t = fbs::DEFAULT_TOL)]
        tol: f64,
    },
    /// List all pure Nash equilibria of the given costs.
    Nash { input: PathBuf },
    /// Compare the best-response dynamics of two documents.
    Equiv {
        a: PathBuf,
        b: PathBuf,
        /// Compare argmin sets (default).
        #[arg(long, conflicts_with = "selected")]
        strict: bool,
        /// Compare selected best responses.
        #[arg(long)]
        selected: bool,
    },
    /// Write B, B0, load vectors and payoff tables as CSV.
    Export {
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<CommandOutput> {
    match cli.command {
        Command::Design {
            input,
            partial,
            restricted,
            tol,
            out,
        } => {
            let doc = load(&input)?;
            let mode = match partial {
                Some(Some(path)) => {
                    let text = read(&path)?;
                    DesignMode::Partial(
                        document::parse_fixed(&text)
                            .with_context(|| format!("{}", path.display()))?,
                    )
                }
                Some(None) => DesignMode::Partial(doc.fixed.clone()),
                None if restricted => DesignMode::Restricted,
                None => DesignMode::Full,
            };
            design_cmd(&doc, mode, tol, &out)
        }
        Command::Closest { input, tol, out } => closest_cmd(&load(&input)?, tol, &out),
        Command::Simulate {
            input,
            xi,
            seed,
            schedule,
            start,
            all_starts,
            random_starts,
            max_steps,
            svg,
            replay,
            out,
        } => {
            let doc = load(&input)?;
            let costs = match xi {
                Some(path) => export::parse_xi_csv(&read(&path)?)
                    .map_err(|e| anyhow!("{}: {e}", path.display()))?,
                None => doc
                    .xi
                    .clone()
                    .ok_or_else(|| anyhow!("no costs: add an `xi:` block or pass --xi"))?,
            };
            let opts = SimulateOptions {
                seed,
                schedule,
                starts: if all_starts {
                    Starts::All
                } else if let Some(k) = random_starts {
                    Starts::Random(k)
                } else if let Some(t) = start {
                    Starts::One(parse_tuple(&doc.model, &t)?)
                } else {
                    Starts::One(0)
                },
                max_steps,
                svg,
                out,
            };
            match replay {
                Some(path) => replay_cmd(&doc.model, &costs, &path),
                None => simulate_cmd(&doc.model, &costs, &opts),
            }
        }
        Command::Verify { input, tol } => verify_cmd(&load(&input)?, tol),
        Command::Nash { input } => nash_cmd(&load(&input)?),
        Command::Equiv {
            a,
            b,
            strict: _,
            selected,
        } => {
            let mode = if selected {
                EquivalenceMode::Selected
            } else {
                EquivalenceMode::Strict
            };
            equiv_cmd(&load(&a)?, &load(&b)?, mode)
        }
        Command::Export { input, out } => export_cmd(&load(&input)?, &out),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load(path: &Path) -> Result<SystemDocument> {
    SystemDocument::parse(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn need_perf(doc: &SystemDocument) -> Result<&PerfTable> {
    doc.perf
        .as_ref()
        .ok_or_else(|| anyhow!("the document has no `perf:` block"))
}

fn need_xi(doc: &SystemDocument) -> Result<&CostMatrix> {
    doc.xi
        .as_ref()
        .ok_or_else(|| anyhow!("the document has no `xi:` block"))
}

/// Accepts `1 2 2`, `1,2,2` or `122` (the last only when every action number is one digit).
pub fn parse_tuple(model: &FbsModel, text: &str) -> Result<usize> {
    let parts: Vec<&str> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect();
    let digits: Vec<String>;
    let parts: Vec<&str> = if parts.len() == 1 && model.players() > 1 {
        digits = parts[0].chars().map(String::from).collect();
        digits.iter().map(String::as_str).collect()
    } else {
        parts
    };
    let choices = parts
        .iter()
        .map(|p| {
            p.parse::<usize>()
                .ok()
                .and_then(|c| c.checked_sub(1))
                .ok_or_else(|| anyhow!("bad action number `{p}` in `{text}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    if choices.len() != model.players() {
        bail!(
            "`{text}` names {} actions for {} players",
            choices.len(),
            model.players()
        );
    }
    for (p, &c) in choices.iter().enumerate() {
        if c >= model.action_count(p) {
            bail!(
                "player {} has {} actions, got {}",
                p + 1,
                model.action_count(p),
                c + 1
            );
        }
    }
    Ok(model.rank(&choices)?)
}

/// Plain decimal for moderate magnitudes, scientific otherwise.
pub fn num(x: f64) -> String {
    if x == 0.0 || (1e-4..1e9).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn label(model: &FbsModel, k: usize) -> String {
    model.profile(k).expect("valid profile").label()
}

fn warnings(model: &FbsModel) -> String {
    model
        .warnings()
        .iter()
        .map(|w| format!("warning: {w}\n"))
        .collect()
}

fn describe_identity(model: &FbsModel, r: &PotentialReport) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "verification: {} (tolerance {})",
        if r.passed { "pass" } else { "fail" },
        num(r.tol)
    )
    .unwrap();
    match r.level_witness {
        Some(k) => writeln!(
            s,
            "max |potential - perf|: {} at profile {} ({})",
            num(r.level_gap),
            label(model, k),
            k + 1
        ),
        None => writeln!(s, "max |potential - perf|: 0"),
    }
    .unwrap();
    match r.deviation_witness {
        Some(d) => writeln!(
            s,
            "max deviation mismatch: {} at profile {} ({}), player {} switching to action {}",
            num(r.deviation_gap),
            label(model, d.profile),
            d.profile + 1,
            d.player + 1,
            d.action + 1
        ),
        None => writeln!(s, "max deviation mismatch: 0"),
    }
    .unwrap();
    s
}

pub enum DesignMode {
    Full,
    Partial(std::collections::BTreeMap<usize, Vec<f64>>),
    Restricted,
}

pub fn design_cmd(
    doc: &SystemDocument,
    mode: DesignMode,
    tol: f64,
    out: &Path,
) -> Result<CommandOutput> {
    let model = &doc.model;
    let perf = need_perf(doc)?;
    let mut report = warnings(model);

    let outcome = match &mode {
        DesignMode::Full => {
            report.push_str("mode: full\n");
            design::solve_exact(&design::build_design_system(model, perf)?, tol)
        }
        DesignMode::Partial(fixed) => {
            writeln!(
                report,
                "mode: partial (fixed facilities: {})",
                join(fixed.keys().map(|f| f + 1))
            )
            .unwrap();
            design::solve_partial(model, perf, fixed, tol)?
        }
        DesignMode::Restricted => {
            let r = design::solve_restricted(model, perf, &doc.constraints, tol)?;
            writeln!(
                report,
                "mode: restricted ({} constraint(s))\ndesirable profiles: {} of {}",
                doc.constraints.len(),
                r.partition.desirable.len(),
                model.profile_count()
            )
            .unwrap();
            if !r.partition.undesirable.is_empty() {
                writeln!(
                    report,
                    "undesirable profiles: {}",
                    r.partition
                        .undesirable
                        .iter()
                        .map(|&k| format!("({})", label(model, k)))
                        .collect::<Vec<_>>()
                        .join(" ")
                )
                .unwrap();
            }
            writeln!(
                report,
                "penalty P*: {} (rule: 10 * (1 + max |P| over desirable profiles))",
                num(r.penalized.p_star)
            )
            .unwrap();
            write(
                out,
                "penalized_perf.csv",
                &export::perf_csv(model, &r.penalized.perf),
            )?;
            if let (Some(payoffs), Some(c_star)) = (&r.penalized.payoffs, r.penalized.c_star) {
                writeln!(
                    report,
                    "penalty c*: {} (rule: 10 * (1 + max |c_i| over desirable profiles))",
                    num(c_star)
                )
                .unwrap();
                write(
                    out,
                    "penalized_payoffs.csv",
                    &export::payoffs_csv(model, payoffs),
                )?;
            }
            if let Some(xi) = r.outcome.xi() {
                let potentials = PerfTable::from_potential(model, xi)?;
                let gap = r.partition.desirable.iter().fold(0.0_f64, |m, &k| {
                    m.max((potentials.get(k) - perf.get(k)).abs())
                });
                let bound = tol * (1.0 + perf.sup_norm());
                writeln!(
                    report,
                    "verification on desirable profiles: {} (max |potential - perf| = {})",
                    if gap <= bound { "pass" } else { "fail" },
                    num(gap)
                )
                .unwrap();
            }
            r.outcome
        }
    };

    writeln!(report, "tolerance: {}", num(tol)).unwrap();
    let status = match &outcome {
        DesignOutcome::Exact(e) => {
            writeln!(
                report,
                "outcome: exact\nrank: {}\nfreedom: {}\nresidual: {}",
                e.rank,
                e.freedom,
                num(e.residual)
            )
            .unwrap();
            if !matches!(mode, DesignMode::Restricted) {
                let check =
                    verify_potential_identity(model, &e.xi, perf, tol * (1.0 + perf.sup_norm()))?;
                report.push_str(&describe_identity(model, &check));
            }
            write(out, "xi.csv", &export::xi_csv(&e.xi))?;
            Status::Success
        }
        DesignOutcome::Inconsistent { rank, residual } => {
            writeln!(
                report,
                "outcome: inconsistent\nrank: {rank}\nresidual: {}\n\
                 no facility costs realize this criterion; `fbs closest` computes the least-squares closest game",
                num(*residual)
            )
            .unwrap();
            Status::Inconsistent
        }
        DesignOutcome::LeastSquares(_) => {
            unreachable!("design solvers return exact or inconsistent")
        }
    };
    write(out, "report.txt", &report)?;
    Ok(CommandOutput {
        status,
        stdout: report,
    })
}

pub fn closest_cmd(doc: &SystemDocument, tol: f64, out: &Path) -> Result<CommandOutput> {
    let model = &doc.model;
    let perf = need_perf(doc)?;
    let g = design::least_squares_design(model, perf, tol)?;
    let n = model.players();
    let dropped: Vec<usize> = (0..model.cost_len())
        .filter(|c| !g.kept.contains(c))
        .collect();
    let mut report = warnings(model);
    writeln!(
        report,
        "kept columns: {}",
        join(g.kept.iter().map(|c| c + 1))
    )
    .unwrap();
    writeln!(
        report,
        "dropped columns: {}",
        dropped
            .iter()
            .map(|&c| format!("{} (facility {}, load {})", c + 1, c / n + 1, c % n + 1))
            .collect::<Vec<_>>()
            .join(", ")
    )
    .unwrap();
    writeln!(
        report,
        "rank: {}\nepsilon_hat: {}\nnormal-equation residual: {}",
        g.rank,
        num(g.epsilon_hat),
        num(g.normal_residual)
    )
    .unwrap();
    write(out, "xi0.csv", &export::xi_csv(&g.xi))?;
    write(out, "p0.csv", &export::perf_pair_csv(model, perf, &g.p0))?;
    write(out, "report.txt", &report)?;
    Ok(CommandOutput {
        status: Status::Success,
        stdout: report,
    })
}

pub enum Starts {
    One(usize),
    All,
    Random(usize),
}

pub struct SimulateOptions {
    pub seed: u64,
    pub schedule: ScheduleKind,
    pub starts: Starts,
    pub max_steps: Option<usize>,
    pub svg: Option<PathBuf>,
    pub out: PathBuf,
}

fn transitions(model: &FbsModel, xi: &CostMatrix) -> Result<Vec<dynamics::TransitionMap>> {
    let payoffs = PayoffTable::from_costs(model, xi)?;
    let maps = dynamics::best_response_maps(model, &payoffs)?;
    Ok(dynamics::transition_maps(&maps, model))
}

pub fn simulate_cmd(
    model: &FbsModel,
    xi: &CostMatrix,
    opts: &SimulateOptions,
) -> Result<CommandOutput> {
    let ell = model.profile_count();
    let l = transitions(model, xi)?;
    let potentials = PerfTable::from_potential(model, xi)?;
    let starts: Vec<usize> = match opts.starts {
        Starts::One(k) => vec![k],
        Starts::All => (0..ell).collect(),
        Starts::Random(k) => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            (0..k).map(|_| rng.random_range(0..ell)).collect()
        }
    };
    let max_steps = opts.max_steps.unwrap_or(100 * ell);
    let name = match opts.schedule {
        ScheduleKind::Rr => "rr",
        ScheduleKind::Rand => "rand",
    };

    let traces: Vec<Result<Trace>> = std::thread::scope(|scope| {
        let handles: Vec<_> = starts
            .iter()
            .enumerate()
            .map(|(run, &start)| {
                let (l, potentials) = (&l, &potentials);
                scope.spawn(move || -> Result<Trace> {
                    let schedule = match opts.schedule {
                        ScheduleKind::Rr => Schedule::RoundRobin,
                        ScheduleKind::Rand => Schedule::UniformRandom {
                            seed: opts.seed.wrapping_add(run as u64),
                        },
                    };
                    let trace =
                        dynamics::simulate(l, &schedule, start, max_steps, Some(potentials))?;
                    let file = TraceFile::from_trace(model, name, &trace);
                    write(
                        &opts.out,
                        &format!("trace_{}.csv", run + 1),
                        &file.to_csv(model),
                    )?;
                    Ok(trace)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    let traces = traces.into_iter().collect::<Result<Vec<_>>>()?;

    let mut s = String::new();
    let mut absorbed: std::collections::BTreeMap<usize, usize> = Default::default();
    for (run, t) in traces.iter().enumerate() {
        let start = t.profiles[0];
        match t.absorbing {
            Some(a) => {
                *absorbed.entry(a).or_default() += 1;
                writeln!(
                    s,
                    "run {}: start ({}) = {} -> absorbed at ({}) = {} after {} step(s)",
                    run + 1,
                    label(model, start),
                    start + 1,
                    label(model, a),
                    a + 1,
                    t.steps()
                )
            }
            None => writeln!(
                s,
                "run {}: start ({}) = {} -> not converged within {} step(s)",
                run + 1,
                label(model, start),
                start + 1,
                max_steps
            ),
        }
        .unwrap();
    }
    let summary = absorbed
        .iter()
        .map(|(a, c)| format!("({}) = {} in {c}/{}", label(model, *a), a + 1, traces.len()))
        .collect::<Vec<_>>()
        .join(", ");
    writeln!(
        s,
        "absorbing profiles: {}",
        if summary.is_empty() {
            "none".into()
        } else {
            summary
        }
    )
    .unwrap();

    if let Some(path) = &opts.svg {
        let runs: Vec<Vec<usize>> = traces
            .iter()
            .map(|t| t.profiles.iter().map(|k| k + 1).collect())
            .collect();
        let plot = svg::profile_plot(&runs, ell);
        fs::write(path, plot).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(CommandOutput {
        status: Status::Success,
        stdout: s,
    })
}

pub fn replay_cmd(model: &FbsModel, xi: &CostMatrix, path: &Path) -> Result<CommandOutput> {
    let file = TraceFile::parse(&read(path)?).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    if file.header.model != model_digest(model) {
        bail!("{} was recorded on a different system", path.display());
    }
    let l = transitions(model, xi)?;
    let recorded = file.profiles();
    let schedule = file.schedule();
    let steps = schedule.len().max(1);
    let again = dynamics::simulate(&l, &Schedule::Replay(schedule), recorded[0], steps, None)?;
    let same = again.profiles == recorded;
    let stdout = if same {
        format!("replay reproduces {} step(s)\n", recorded.len() - 1)
    } else {
        let at = again
            .profiles
            .iter()
            .zip(&recorded)
            .position(|(a, b)| a != b)
            .unwrap_or(again.profiles.len().min(recorded.len()));
        format!("replay diverges at step {at}\n")
    };
    Ok(CommandOutput {
        status: if same {
            Status::Success
        } else {
            Status::Failed
        },
        stdout,
    })
}

pub fn verify_cmd(doc: &SystemDocument, tol: f64) -> Result<CommandOutput> {
    let r = verify_potential_identity(&doc.model, need_xi(doc)?, need_perf(doc)?, tol)?;
    Ok(CommandOutput {
        status: if r.passed {
            Status::Success
        } else {
            Status::Failed
        },
        stdout: describe_identity(&doc.model, &r),
    })
}

pub fn nash_cmd(doc: &SystemDocument) -> Result<CommandOutput> {
    let payoffs = PayoffTable::from_costs(&doc.model, need_xi(doc)?)?;
    let eq = nash_enumerate(&doc.model, &payoffs)?;
    let mut s = format!("{} pure Nash equilibrium(s)\n", eq.len());
    for k in eq {
        writeln!(s, "{}: ({})", k + 1, label(&doc.model, k)).unwrap();
    }
    Ok(CommandOutput {
        status: Status::Success,
        stdout: s,
    })
}

pub fn equiv_cmd(
    a: &SystemDocument,
    b: &SystemDocument,
    mode: EquivalenceMode,
) -> Result<CommandOutput> {
    if model_digest(&a.model) != model_digest(&b.model) {
        bail!("the two documents describe different systems");
    }
    let maps = |doc: &SystemDocument| -> Result<_> {
        let payoffs = PayoffTable::from_costs(&doc.model, need_xi(doc)?)?;
        Ok(dynamics::best_response_maps(&doc.model, &payoffs)?)
    };
    let r = dynamics::dynamic_equivalence(&maps(a)?, &maps(b)?, mode)?;
    let mut s = format!(
        "{} ({} mode)\n",
        if r.equivalent {
            "equivalent"
        } else {
            "not equivalent"
        },
        match mode {
            EquivalenceMode::Strict => "strict",
            EquivalenceMode::Selected => "selected",
        }
    );
    for w in &r.witnesses {
        writeln!(
            s,
            "player {} differs at profile ({}) = {}",
            w.player + 1,
            label(&a.model, w.profile),
            w.profile + 1
        )
        .unwrap();
    }
    Ok(CommandOutput {
        status: if r.equivalent {
            Status::Success
        } else {
            Status::Failed
        },
        stdout: s,
    })
}

pub fn export_cmd(doc: &SystemDocument, out: &Path) -> Result<CommandOutput> {
    let model = &doc.model;
    let zeros;
    let perf = match &doc.perf {
        Some(p) => p,
        None => {
            zeros = PerfTable::new(vec![0.0; model.profile_count()])?;
            &zeros
        }
    };
    let sys = design::build_design_system(model, perf)?;
    let basis = design::basis_columns(&sys, fbs::DEFAULT_TOL);
    write(out, "B.csv", &export::b_matrix_csv(model, &sys))?;
    write(
        out,
        "B0.csv",
        &export::b0_matrix_csv(model, &sys, &basis.kept),
    )?;
    write(out, "loads.csv", &export::loads_csv(model))?;
    let mut s = warnings(model);
    writeln!(
        s,
        "wrote B.csv ({}x{}), B0.csv ({} columns), loads.csv",
        model.profile_count(),
        model.cost_len(),
        basis.kept.len()
    )
    .unwrap();
    if let Some(xi) = &doc.xi {
        let payoffs = PayoffTable::from_costs(model, xi)?;
        write(out, "payoffs.csv", &export::payoffs_csv(model, &payoffs))?;
        s.push_str("wrote payoffs.csv\n");
        s.push_str(&export::payoff_report(model, &payoffs));
    }
    Ok(CommandOutput {
        status: Status::Success,
        stdout: s,
    })
}
