//! Multi-agent gatekeeper for leader-follower formation flight of
//! fixed-wing aircraft.
//!
//! Followers track formation slots relative to a leader flying a
//! precomputed path. Every follower keeps a committed trajectory that ends
//! on the leader path, and only replaces it with a new candidate when that
//! candidate is verified safe against obstacles and every other commitment.

pub mod dubins;
pub mod gatekeeper;
pub mod geometry;
pub mod leader;
pub mod sim;
pub mod trajectory;
pub mod vehicle;
