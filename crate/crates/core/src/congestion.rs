//! Payoffs and potentials of a congestion game.
//!
//! Payoffs are costs: lower is better for every player.

use crate::error::{Error, Result};
use crate::model::{FbsModel, Profile};

/// Facility cost table: `cost(j, k)` is the cost of facility `j` when `k`
/// players use it, `k ∈ 1..=n`. Stored flattened facility-major, which is
/// also the column order of the design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    facilities: usize,
    players: usize,
    flat: Vec<f64>,
}

impl CostMatrix {
    pub fn zeros(facilities: usize, players: usize) -> Self {
        CostMatrix {
            facilities,
            players,
            flat: vec![0.0; facilities * players],
        }
    }

    pub fn zeros_for(model: &FbsModel) -> Self {
        Self::zeros(model.facilities(), model.players())
    }

    pub fn from_flat(facilities: usize, players: usize, flat: Vec<f64>) -> Result<Self> {
        if flat.len() != facilities * players {
            return Err(Error::LengthMismatch {
                what: "cost vector",
                expected: facilities * players,
                actual: flat.len(),
            });
        }
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "cost vector",
            });
        }
        Ok(CostMatrix {
            facilities,
            players,
            flat,
        })
    }

    /// One row per facility, `n` entries each.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let players = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != players) {
            return Err(Error::LengthMismatch {
                what: "cost row",
                expected: players,
                actual: bad.len(),
            });
        }
        Self::from_flat(rows.len(), players, rows.concat())
    }

    /// Recovers marginal costs from separable per-facility totals:
    /// `cost(j, k) = total[j][k] − total[j][k−1]` with `total[j][0] = 0`.
    /// `totals[j]` holds `total[j][1..=n]`.
    pub fn from_cumulative(totals: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = totals
            .iter()
            .map(|t| {
                let mut prev = 0.0;
                t.iter()
                    .map(|&x| {
                        let d = x - prev;
                        prev = x;
                        d
                    })
                    .collect()
            })
            .collect();
        Self::from_rows(&rows)
    }

    pub fn facilities(&self) -> usize {
        self.facilities
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    /// Costs of facility `j` for loads `1..=n`.
    pub fn row(&self, facility: usize) -> &[f64] {
        &self.flat[facility * self.players..(facility + 1) * self.players]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.flat.chunks(self.players.max(1))
    }

    /// Cost of `facility` at load `users` (1-based load count).
    pub fn cost(&self, facility: usize, users: usize) -> f64 {
        self.flat[facility * self.players + users - 1]
    }

    /// Per-facility totals `Σ_{ℓ≤k} cost(j, ℓ)` for `k = 0..=n`.
    pub fn cumulative(&self) -> Vec<Vec<f64>> {
        self.rows()
            .map(|row| {
                let mut acc = 0.0;
                std::iter::once(0.0)
                    .chain(row.iter().map(|&x| {
                        acc += x;
                        acc
                    }))
                    .collect()
            })
            .collect()
    }

    pub fn check_against(&self, model: &FbsModel) -> Result<()> {
        if self.facilities != model.facilities() || self.players != model.players() {
            return Err(Error::LengthMismatch {
                what: "cost matrix",
                expected: model.cost_len(),
                actual: self.flat.len(),
            });
        }
        Ok(())
    }
}

/// Criterion values, one per profile in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfTable(Vec<f64>);

impl PerfTable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "performance table",
            });
        }
        Ok(PerfTable(values))
    }

    pub fn for_model(model: &FbsModel, values: Vec<f64>) -> Result<Self> {
        let t = Self::new(values)?;
        t.check_against(model)?;
        Ok(t)
    }

    /// The potential of `xi` evaluated at every profile.
    pub fn from_potential(model: &FbsModel, xi: &CostMatrix) -> Result<Self> {
        xi.check_against(model)?;
        Ok(PerfTable(
            (0..model.profile_count())
                .map(|k| potential_at(model, xi, k))
                .collect(),
        ))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `max_k |self[k] − other[k]|`.
    pub fn sup_distance(&self, other: &PerfTable) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Indices attaining the minimum value exactly.
    pub fn argmin(&self) -> Vec<usize> {
        let min = self.0.iter().copied().fold(f64::INFINITY, f64::min);
        (0..self.0.len()).filter(|&k| self.0[k] == min).collect()
    }

    pub fn check_against(&self, model: &FbsModel) -> Result<()> {
        if self.0.len() != model.profile_count() {
            return Err(Error::LengthMismatch {
                what: "performance table",
                expected: model.profile_count(),
                actual: self.0.len(),
            });
        }
        Ok(())
    }
}

/// Dense table of every player's cost at every profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTable {
    players: usize,
    profiles: usize,
    data: Vec<f64>,
}

impl PayoffTable {
    /// `rows[i][k]` is the cost of player `i` at profile `k`.
    pub fn from_rows(model: &FbsModel, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != model.players() {
            return Err(Error::LengthMismatch {
                what: "payoff table players",
                expected: model.players(),
                actual: rows.len(),
            });
        }
        for row in &rows {
            if row.len() != model.profile_count() {
                return Err(Error::LengthMismatch {
                    what: "payoff table row",
                    expected: model.profile_count(),
                    actual: row.len(),
                });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    what: "payoff table",
                });
            }
        }
        Ok(PayoffTable {
            players: model.players(),
            profiles: model.profile_count(),
            data: rows.concat(),
        })
    }

    /// Congestion-game payoffs induced by `xi`.
    pub fn from_costs(model: &FbsModel, xi: &CostMatrix) -> Result<Self> {
        xi.check_against(model)?;
        let ell = model.profile_count();
        let mut data = vec![0.0; model.players() * ell];
        for k in 0..ell {
            let loads = model.loads_at(k);
            for player in 0..model.players() {
                data[player * ell + k] = payoff_with_loads(model, xi, k, player, &loads);
            }
        }
        Ok(PayoffTable {
            players: model.players(),
            profiles: ell,
            data,
        })
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn profiles(&self) -> usize {
        self.profiles
    }

    pub fn get(&self, profile: usize, player: usize) -> f64 {
        self.data[player * self.profiles + profile]
    }

    pub fn player_row(&self, player: usize) -> &[f64] {
        &self.data[player * self.profiles..(player + 1) * self.profiles]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub(crate) fn matches(&self, model: &FbsModel) -> bool {
        self.players == model.players() && self.profiles == model.profile_count()
    }
}

/// Tolerance for treating two costs as tied: `1e-9 · (1 + scale)` where
/// `scale` is the largest magnitude among the compared costs.
pub fn tie_tolerance(values: impl IntoIterator<Item = f64>) -> f64 {
    let scale = values.into_iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    1e-9 * (1.0 + scale)
}

fn payoff_with_loads(
    model: &FbsModel,
    xi: &CostMatrix,
    index: usize,
    player: usize,
    loads: &[usize],
) -> f64 {
    model.actions(player)[model.choice_at(index, player)]
        .iter()
        .map(|&f| xi.cost(f, loads[f]))
        .sum()
}

/// Facility-major, load-minor summation of the potential.
pub(crate) fn potential_at(model: &FbsModel, xi: &CostMatrix, index: usize) -> f64 {
    let loads = model.loads_at(index);
    let mut total = 0.0;
    for (j, &r) in loads.iter().enumerate() {
        for &c in &xi.row(j)[..r] {
            total += c;
        }
    }
    total
}

/// Cost of `player` at `profile`: the sum of its facilities' costs at their current loads.
pub fn payoff(model: &FbsModel, xi: &CostMatrix, profile: &Profile, player: usize) -> Result<f64> {
    xi.check_against(model)?;
    if player >= model.players() {
        return Err(Error::PlayerOutOfRange {
            player,
            players: model.players(),
        });
    }
    let loads = model.loads_at(profile.index());
    Ok(payoff_with_loads(
        model,
        xi,
        profile.index(),
        player,
        &loads,
    ))
}

/// Rosenthal potential `Σ_j Σ_{ℓ≤r_j} cost(j, ℓ)`.
pub fn potential(model: &FbsModel, xi: &CostMatrix, profile: &Profile) -> Result<f64> {
    xi.check_against(model)?;
    Ok(potential_at(model, xi, profile.index()))
}

/// The same potential written as the inner product of the flattened costs
/// with the profile's B-row.
pub fn potential_inner_product(
    model: &FbsModel,
    xi: &CostMatrix,
    profile: &Profile,
) -> Result<f64> {
    xi.check_against(model)?;
    let row = model.b_row(profile);
    Ok(xi
        .flat()
        .iter()
        .zip(row.bits())
        .filter(|(_, &b)| b == 1)
        .map(|(x, _)| *x)
        .sum())
}

/// A single-player deviation `profile → deviation` by `player` to `action`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Deviation {
    pub profile: usize,
    pub player: usize,
    pub action: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialReport {
    pub passed: bool,
    pub tol: f64,
    /// `max_k |potential(k) − perf(k)|` and the profile attaining it.
    pub level_gap: f64,
    pub level_witness: Option<usize>,
    /// Worst mismatch between a deviator's cost change and the criterion change.
    pub deviation_gap: f64,
    pub deviation_witness: Option<Deviation>,
}

impl PotentialReport {
    /// The larger of the two violations.
    pub fn worst(&self) -> f64 {
        self.level_gap.max(self.deviation_gap)
    }
}

/// Checks that `perf` is the potential of the congestion game defined by `xi`,
/// both pointwise and through every unilateral deviation.
pub fn verify_potential_identity(
    model: &FbsModel,
    xi: &CostMatrix,
    perf: &PerfTable,
    tol: f64,
) -> Result<PotentialReport> {
    perf.check_against(model)?;
    let payoffs = PayoffTable::from_costs(model, xi)?;

    let mut level_gap = 0.0;
    let mut level_witness = None;
    for k in 0..model.profile_count() {
        let gap = (potential_at(model, xi, k) - perf.get(k)).abs();
        if gap > level_gap {
            level_gap = gap;
            level_witness = Some(k);
        }
    }

    let mut deviation_gap = 0.0;
    let mut deviation_witness = None;
    for k in 0..model.profile_count() {
        for player in 0..model.players() {
            let current = model.choice_at(k, player);
            for action in 0..model.action_count(player) {
                if action == current {
                    continue;
                }
                let other = model.deviate(k, player, action);
                let dc = payoffs.get(other, player) - payoffs.get(k, player);
                let dp = perf.get(other) - perf.get(k);
                let gap = (dc - dp).abs();
                if gap > deviation_gap {
                    deviation_gap = gap;
                    deviation_witness = Some(Deviation {
                        profile: k,
                        player,
                        action,
                    });
                }
            }
        }
    }

    Ok(PotentialReport {
        passed: level_gap <= tol && deviation_gap <= tol,
        tol,
        level_gap,
        level_witness,
        deviation_gap,
        deviation_witness,
    })
}

/// Every pure Nash equilibrium: profiles where no player can lower its cost
/// by more than the tie tolerance through a unilateral switch.
pub fn nash_enumerate(model: &FbsModel, payoffs: &PayoffTable) -> Result<Vec<usize>> {
    if !payoffs.matches(model) {
        return Err(Error::ModelMismatch);
    }
    Ok((0..model.profile_count())
        .filter(|&k| {
            (0..model.players()).all(|player| {
                let here = payoffs.get(k, player);
                let alternatives: Vec<f64> = (0..model.action_count(player))
                    .map(|a| payoffs.get(model.deviate(k, player, a), player))
                    .collect();
                let tol = tie_tolerance(alternatives.iter().copied());
                alternatives.iter().all(|&c| c >= here - tol)
            })
        })
        .collect())
}
