//! Social-trust admission control for Internet of Things communities.
//!
//! Devices form communities from the overlap of their friendship and
//! interest sets. Community managers grant or deny access to outside
//! requesters from a weighted mix of their own experience, the requester's
//! social similarity to the community and recommendations from peers. The
//! [`sim`] module drives the whole pipeline against Sybil attackers and
//! [`metrics`] scores the outcome.

pub mod adversary;
pub mod authn;
pub mod community;
pub mod error;
pub mod io;
pub mod metrics;
pub mod sim;
pub mod social;
pub mod trust;

pub use error::{Error, Result};
