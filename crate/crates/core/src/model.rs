//! The facility-based system: players, facilities and subset-valued actions.
//!
//! Profiles are ranked in mixed radix with player 0 as the most significant
//! digit, so `(0,0,…,0)` is index 0 and the last player's action varies
//! fastest. Every table in the crate (criterion, payoffs, design rows) uses
//! this order.

use std::fmt;

use crate::error::{Error, Result};

/// A facility-based system without its criterion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FbsModel {
    facilities: usize,
    actions: Vec<Vec<Vec<usize>>>,
    strides: Vec<usize>,
    profile_count: usize,
}

/// Non-fatal modelling issues found while building a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelWarning {
    /// Two actions of one player select the same facility set.
    DuplicateAction {
        player: usize,
        first: usize,
        duplicate: usize,
    },
}

impl fmt::Display for ModelWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelWarning::DuplicateAction {
                player,
                first,
                duplicate,
            } => write!(
                f,
                "player {} action {} duplicates action {}",
                player + 1,
                duplicate + 1,
                first + 1
            ),
        }
    }
}

/// One action per player, together with its canonical rank.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Profile {
    choices: Vec<usize>,
    index: usize,
}

impl Profile {
    pub fn choices(&self) -> &[usize] {
        &self.choices
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Choice tuple rendered with 1-based action numbers, e.g. `1 2 2`.
    pub fn label(&self) -> String {
        self.choices
            .iter()
            .map(|c| (c + 1).to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Number of users of each facility at one profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadVector(pub Vec<usize>);

impl LoadVector {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Unary encoding of a load vector: block `j` has length `n` and holds
/// `r_j` ones followed by zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BRow {
    bits: Vec<u8>,
    block: usize,
}

impl BRow {
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn blocks(&self) -> std::slice::Chunks<'_, u8> {
        self.bits.chunks(self.block)
    }
}

impl FbsModel {
    /// Builds a model from per-player action lists. Each action is a list of
    /// 0-based facility ids; order inside an action is irrelevant.
    pub fn new(facilities: usize, actions: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::NoPlayers);
        }
        if facilities == 0 {
            return Err(Error::NoFacilities);
        }
        let mut canonical = Vec::with_capacity(actions.len());
        for (player, set) in actions.into_iter().enumerate() {
            if set.is_empty() {
                return Err(Error::EmptyActionSet { player });
            }
            let mut normalized = Vec::with_capacity(set.len());
            for (action, mut facs) in set.into_iter().enumerate() {
                facs.sort_unstable();
                for w in facs.windows(2) {
                    if w[0] == w[1] {
                        return Err(Error::RepeatedFacility {
                            player,
                            action,
                            facility: w[0],
                        });
                    }
                }
                if let Some(&facility) = facs.iter().find(|&&f| f >= facilities) {
                    return Err(Error::FacilityOutOfRange {
                        player,
                        action,
                        facility,
                        facilities,
                    });
                }
                normalized.push(facs);
            }
            canonical.push(normalized);
        }

        let mut strides = vec![1usize; canonical.len()];
        let mut acc = 1usize;
        for i in (0..canonical.len()).rev() {
            strides[i] = acc;
            acc = acc
                .checked_mul(canonical[i].len())
                .ok_or(Error::ProfileCountOverflow)?;
        }

        Ok(FbsModel {
            facilities,
            actions: canonical,
            strides,
            profile_count: acc,
        })
    }

    pub fn players(&self) -> usize {
        self.actions.len()
    }

    pub fn facilities(&self) -> usize {
        self.facilities
    }

    /// Action list of a player; each action is a sorted facility list.
    pub fn actions(&self, player: usize) -> &[Vec<usize>] {
        &self.actions[player]
    }

    pub fn action_count(&self, player: usize) -> usize {
        self.actions[player].len()
    }

    /// ℓ, the number of profiles.
    pub fn profile_count(&self) -> usize {
        self.profile_count
    }

    /// Length of a flattened cost vector, `m·n`.
    pub fn cost_len(&self) -> usize {
        self.facilities * self.players()
    }

    pub fn warnings(&self) -> Vec<ModelWarning> {
        let mut out = Vec::new();
        for (player, set) in self.actions.iter().enumerate() {
            for duplicate in 0..set.len() {
                if let Some(first) = (0..duplicate).find(|&k| set[k] == set[duplicate]) {
                    out.push(ModelWarning::DuplicateAction {
                        player,
                        first,
                        duplicate,
                    });
                }
            }
        }
        out
    }

    fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.players() {
            return Err(Error::PlayerOutOfRange {
                player,
                players: self.players(),
            });
        }
        Ok(())
    }

    fn check_action(&self, player: usize, action: usize) -> Result<()> {
        self.check_player(player)?;
        if action >= self.action_count(player) {
            return Err(Error::ActionOutOfRange {
                player,
                action,
                available: self.action_count(player),
            });
        }
        Ok(())
    }

    /// Canonical rank of a choice tuple.
    pub fn rank(&self, choices: &[usize]) -> Result<usize> {
        if choices.len() != self.players() {
            return Err(Error::LengthMismatch {
                what: "choice tuple",
                expected: self.players(),
                actual: choices.len(),
            });
        }
        let mut index = 0;
        for (player, &c) in choices.iter().enumerate() {
            self.check_action(player, c)?;
            index += c * self.strides[player];
        }
        Ok(index)
    }

    pub fn profile_from_choices(&self, choices: &[usize]) -> Result<Profile> {
        let index = self.rank(choices)?;
        Ok(Profile {
            choices: choices.to_vec(),
            index,
        })
    }

    /// Unranks a canonical index.
    pub fn profile(&self, index: usize) -> Result<Profile> {
        if index >= self.profile_count {
            return Err(Error::ProfileOutOfRange {
                index,
                profiles: self.profile_count,
            });
        }
        Ok(self.unrank(index))
    }

    fn unrank(&self, index: usize) -> Profile {
        let choices = self
            .strides
            .iter()
            .zip(&self.actions)
            .map(|(&s, set)| (index / s) % set.len())
            .collect();
        Profile { choices, index }
    }

    /// Action of `player` at profile `index`.
    pub fn choice_at(&self, index: usize, player: usize) -> usize {
        (index / self.strides[player]) % self.actions[player].len()
    }

    /// Index of the profile obtained from `index` by switching `player` to `action`.
    pub fn deviate(&self, index: usize, player: usize, action: usize) -> usize {
        let current = self.choice_at(index, player);
        index - current * self.strides[player] + action * self.strides[player]
    }

    /// All profiles in canonical order; position `k` holds index `k`.
    pub fn profiles(&self) -> impl Iterator<Item = Profile> + '_ {
        (0..self.profile_count).map(move |k| self.unrank(k))
    }

    /// 0/1 indicator of the facilities an action uses.
    pub fn incidence_vector(&self, player: usize, action: usize) -> Result<Vec<u8>> {
        self.check_action(player, action)?;
        let mut v = vec![0u8; self.facilities];
        for &f in &self.actions[player][action] {
            v[f] = 1;
        }
        Ok(v)
    }

    pub fn load_vector(&self, profile: &Profile) -> LoadVector {
        LoadVector(self.loads_at(profile.index))
    }

    /// Load vector of the profile at `index` without materializing the profile.
    pub fn loads_at(&self, index: usize) -> Vec<usize> {
        let mut r = vec![0usize; self.facilities];
        for player in 0..self.players() {
            for &f in &self.actions[player][self.choice_at(index, player)] {
                r[f] += 1;
            }
        }
        r
    }

    pub fn b_row(&self, profile: &Profile) -> BRow {
        let n = self.players();
        let r = self.loads_at(profile.index);
        let mut bits = vec![0u8; self.cost_len()];
        for (j, &rj) in r.iter().enumerate() {
            bits[j * n..j * n + rj].fill(1);
        }
        BRow { bits, block: n }
    }
}
