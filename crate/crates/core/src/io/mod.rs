//! File formats: friendship edge lists, device rosters and result tables.

pub mod graph;
pub mod output;
pub mod roster;

pub use graph::{load_friendship_edges, parse_friendship_edges, FriendshipGraph};
pub use roster::{load_roster, parse_roster, RosterEntry};
