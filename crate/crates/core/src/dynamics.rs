//! Myopic best-response dynamics.
//!
//! Each player's best-response map is a function from profiles to actions.
//! Replacing the player's coordinate with that action gives a transition
//! map on profile indices, written `δ_ℓ[i₁,…,i_ℓ]` in logical-matrix
//! notation. With one player activated per step the profile evolves as a
//! switched system over these maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::congestion::{tie_tolerance, PayoffTable, PerfTable};
use crate::error::{Error, Result};
use crate::model::FbsModel;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BestResponseMap {
    pub player: usize,
    /// Selected best response at each profile.
    pub choice: Vec<usize>,
    /// All actions attaining the minimal cost (within tolerance) at each profile.
    pub argmin_sets: Vec<Vec<usize>>,
}

/// Best responses of `player` at every profile. Costs within the tie
/// tolerance of the minimum are tied; `tie_tol = None` uses
/// [`tie_tolerance`] over the compared costs. Among tied actions the
/// incumbent is kept, otherwise the smallest index wins.
pub fn best_response_map(
    model: &FbsModel,
    payoffs: &PayoffTable,
    player: usize,
    tie_tol: Option<f64>,
) -> Result<BestResponseMap> {
    if !payoffs.matches(model) {
        return Err(Error::ModelMismatch);
    }
    if player >= model.players() {
        return Err(Error::PlayerOutOfRange {
            player,
            players: model.players(),
        });
    }
    let ell = model.profile_count();
    let mut choice = Vec::with_capacity(ell);
    let mut argmin_sets = Vec::with_capacity(ell);
    for k in 0..ell {
        let costs: Vec<f64> = (0..model.action_count(player))
            .map(|a| payoffs.get(model.deviate(k, player, a), player))
            .collect();
        let tol = tie_tol.unwrap_or_else(|| tie_tolerance(costs.iter().copied()));
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let set: Vec<usize> = (0..costs.len())
            .filter(|&a| costs[a] <= min + tol)
            .collect();
        let incumbent = model.choice_at(k, player);
        choice.push(if set.contains(&incumbent) {
            incumbent
        } else {
            set[0]
        });
        argmin_sets.push(set);
    }
    Ok(BestResponseMap {
        player,
        choice,
        argmin_sets,
    })
}

/// Best-response maps of all players with the default tie tolerance.
pub fn best_response_maps(model: &FbsModel, payoffs: &PayoffTable) -> Result<Vec<BestResponseMap>> {
    (0..model.players())
        .map(|i| best_response_map(model, payoffs, i, None))
        .collect()
}

/// Profile-index form of a best-response map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMap {
    pub player: usize,
    pub next: Vec<usize>,
}

impl TransitionMap {
    /// 1-based column indices, as in `δ_ℓ[…]`.
    pub fn delta_indices(&self) -> Vec<usize> {
        self.next.iter().map(|k| k + 1).collect()
    }
}

pub fn transition_map(map: &BestResponseMap, model: &FbsModel) -> TransitionMap {
    TransitionMap {
        player: map.player,
        next: map
            .choice
            .iter()
            .enumerate()
            .map(|(k, &a)| model.deviate(k, map.player, a))
            .collect(),
    }
}

pub fn transition_maps(maps: &[BestResponseMap], model: &FbsModel) -> Vec<TransitionMap> {
    maps.iter().map(|m| transition_map(m, model)).collect()
}

/// Profiles where every player's current action is a best response.
pub fn fixed_points(model: &FbsModel, maps: &[BestResponseMap]) -> Vec<usize> {
    (0..model.profile_count())
        .filter(|&k| {
            maps.iter()
                .all(|m| m.argmin_sets[k].contains(&model.choice_at(k, m.player)))
        })
        .collect()
}

/// How the player to update is chosen at each step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schedule {
    /// Players `0, 1, …, n−1, 0, …`.
    RoundRobin,
    /// Uniform choice from a ChaCha8 stream seeded with `seed`.
    UniformRandom { seed: u64 },
    /// A recorded activation sequence.
    Replay(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub seed: Option<u64>,
    /// Player activated at each step.
    pub schedule: Vec<usize>,
    /// Profile before the first step, then after each step.
    pub profiles: Vec<usize>,
    pub converged: bool,
    pub absorbing: Option<usize>,
    /// Criterion value at each entry of `profiles`, when a table was supplied.
    pub potential_series: Option<Vec<f64>>,
}

impl Trace {
    pub fn steps(&self) -> usize {
        self.schedule.len()
    }

    pub fn last(&self) -> usize {
        *self.profiles.last().expect("trace holds the start profile")
    }
}

fn check_family(maps: &[TransitionMap]) -> Result<usize> {
    let ell = maps.first().map_or(0, |m| m.next.len());
    let consistent = maps
        .iter()
        .enumerate()
        .all(|(i, m)| m.player == i && m.next.len() == ell && m.next.iter().all(|&k| k < ell));
    if maps.is_empty() || !consistent {
        return Err(Error::ModelMismatch);
    }
    Ok(ell)
}

fn is_rest_point(maps: &[TransitionMap], k: usize) -> bool {
    maps.iter().all(|m| m.next[k] == k)
}

/// Runs the switched system from `start` until it reaches a profile fixed
/// by every map or `max_steps` activations have been made. Running out of
/// steps is reported through `converged = false`.
pub fn simulate(
    maps: &[TransitionMap],
    schedule: &Schedule,
    start: usize,
    max_steps: usize,
    perf: Option<&PerfTable>,
) -> Result<Trace> {
    let ell = check_family(maps)?;
    if max_steps == 0 {
        return Err(Error::ZeroMaxSteps);
    }
    if start >= ell {
        return Err(Error::ProfileOutOfRange {
            index: start,
            profiles: ell,
        });
    }
    if let Some(p) = perf {
        if p.len() != ell {
            return Err(Error::LengthMismatch {
                what: "performance table",
                expected: ell,
                actual: p.len(),
            });
        }
    }
    let n = maps.len();
    let (mut rng, limit, seed) = match schedule {
        Schedule::UniformRandom { seed } => (
            Some(ChaCha8Rng::seed_from_u64(*seed)),
            max_steps,
            Some(*seed),
        ),
        Schedule::Replay(recorded) => {
            if let Some(&player) = recorded.iter().find(|&&p| p >= n) {
                return Err(Error::PlayerOutOfRange { player, players: n });
            }
            (None, max_steps.min(recorded.len()), None)
        }
        Schedule::RoundRobin => (None, max_steps, None),
    };

    let mut current = start;
    let mut profiles = vec![start];
    let mut activated = Vec::new();
    for step in 0..limit {
        if is_rest_point(maps, current) {
            break;
        }
        let player = match schedule {
            Schedule::RoundRobin => step % n,
            Schedule::UniformRandom { .. } => {
                rng.as_mut().expect("seeded above").random_range(0..n)
            }
            Schedule::Replay(recorded) => recorded[step],
        };
        current = maps[player].next[current];
        activated.push(player);
        profiles.push(current);
    }

    let converged = is_rest_point(maps, current);
    Ok(Trace {
        seed,
        potential_series: perf.map(|p| profiles.iter().map(|&k| p.get(k)).collect()),
        schedule: activated,
        profiles,
        converged,
        absorbing: converged.then_some(current),
    })
}

/// Re-runs a recorded trace from its activation sequence.
pub fn replay(maps: &[TransitionMap], trace: &Trace, perf: Option<&PerfTable>) -> Result<Trace> {
    let schedule = Schedule::Replay(trace.schedule.clone());
    let mut out = simulate(
        maps,
        &schedule,
        trace.profiles[0],
        trace.schedule.len().max(1),
        perf,
    )?;
    out.seed = trace.seed;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivalenceMode {
    /// Argmin sets agree everywhere.
    Strict,
    /// Selected best responses agree everywhere.
    Selected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disagreement {
    pub player: usize,
    pub profile: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub mode: EquivalenceMode,
    pub equivalent: bool,
    pub witnesses: Vec<Disagreement>,
}

/// Compares two families of best-response maps over the same system.
pub fn dynamic_equivalence(
    a: &[BestResponseMap],
    b: &[BestResponseMap],
    mode: EquivalenceMode,
) -> Result<EquivalenceReport> {
    let same_shape = a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.player == y.player
                && x.choice.len() == y.choice.len()
                && x.argmin_sets.len() == y.argmin_sets.len()
        });
    if !same_shape {
        return Err(Error::ModelMismatch);
    }
    let mut witnesses = Vec::new();
    for (x, y) in a.iter().zip(b) {
        for k in 0..x.choice.len() {
            let differs = match mode {
                EquivalenceMode::Strict => x.argmin_sets[k] != y.argmin_sets[k],
                EquivalenceMode::Selected => x.choice[k] != y.choice[k],
            };
            if differs {
                witnesses.push(Disagreement {
                    player: x.player,
                    profile: k,
                });
            }
        }
    }
    Ok(EquivalenceReport {
        mode,
        equivalent: witnesses.is_empty(),
        witnesses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearOptimality {
    /// `|P(absorbing) − min P|`.
    pub gap: f64,
    pub bound: f64,
    pub distance: f64,
    pub holds: bool,
}

/// Compares the criterion at an absorbing profile with its global minimum
/// against the `2ε` bound. Requires `ε > ‖P − P0‖∞`.
pub fn near_optimality_check(
    perf: &PerfTable,
    p0: &PerfTable,
    absorbing: usize,
    epsilon: f64,
) -> Result<NearOptimality> {
    if perf.len() != p0.len() {
        return Err(Error::LengthMismatch {
            what: "closest-game potential",
            expected: perf.len(),
            actual: p0.len(),
        });
    }
    if absorbing >= perf.len() {
        return Err(Error::ProfileOutOfRange {
            index: absorbing,
            profiles: perf.len(),
        });
    }
    let distance = perf.sup_distance(p0);
    // also rejects a NaN epsilon
    if epsilon.partial_cmp(&distance) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::EpsilonTooSmall { epsilon, distance });
    }
    let min = perf.values().iter().copied().fold(f64::INFINITY, f64::min);
    let gap = (perf.get(absorbing) - min).abs();
    let bound = 2.0 * epsilon;
    Ok(NearOptimality {
        gap,
        bound,
        distance,
        holds: gap < bound,
    })
}
