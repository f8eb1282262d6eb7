//! System-level simulator for relay-assisted device-to-device (D2D)
//! communication underlaying a cellular network.
//!
//! A drop places base stations, cellular UEs and D2D triplets (transmitter,
//! candidate relay, receiver) on a hexagonal layout ([`geometry`]), picks a
//! communication mode for every triplet ([`modeselect`]), maps routes onto
//! resource blocks ([`routing`], [`resalloc`]) and sets transmit powers
//! ([`powerctl`]). [`sim`] repeats this over many drops and writes the
//! resulting statistics.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod modeselect;
pub mod powerctl;
pub mod resalloc;
pub mod routing;
pub mod sim;
pub mod units;

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));
