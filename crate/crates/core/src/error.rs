use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("the system needs at least one player")]
    NoPlayers,
    #[error("the system needs at least one facility")]
    NoFacilities,
    #[error("player {player} has an empty action set")]
    EmptyActionSet { player: usize },
    #[error(
        "player {player}, action {action}: facility {facility} is out of range (m = {facilities})"
    )]
    FacilityOutOfRange {
        player: usize,
        action: usize,
        facility: usize,
        facilities: usize,
    },
    #[error("player {player}, action {action}: facility {facility} listed more than once")]
    RepeatedFacility {
        player: usize,
        action: usize,
        facility: usize,
    },
    #[error("the number of profiles overflows usize")]
    ProfileCountOverflow,
    #[error("player index {player} out of range (n = {players})")]
    PlayerOutOfRange { player: usize, players: usize },
    #[error("action index {action} out of range for player {player} ({available} actions)")]
    ActionOutOfRange {
        player: usize,
        action: usize,
        available: usize,
    },
    #[error("profile index {index} out of range (ℓ = {profiles})")]
    ProfileOutOfRange { index: usize, profiles: usize },
    #[error("{what}: expected length {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{what} contains a non-finite value")]
    NonFinite { what: &'static str },
    #[error("fixed facility {facility} is out of range (m = {facilities})")]
    FixedFacilityOutOfRange { facility: usize, facilities: usize },
    #[error("no profile satisfies the constraints")]
    NoDesirableProfiles,
    #[error("epsilon {epsilon} does not exceed ‖P − P0‖∞ = {distance}")]
    EpsilonTooSmall { epsilon: f64, distance: f64 },
    #[error("max_steps must be at least 1")]
    ZeroMaxSteps,
    #[error("maps do not describe the same system")]
    ModelMismatch,
}

pub type Result<T> = std::result::Result<T, Error>;
