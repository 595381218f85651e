//! Simulator for a single NV center's charge state and nitrogen nuclear spin:
//! NMR line positions in the bright and dark manifolds, Bloch dynamics of rf
//! pulses, laser-driven charge conversion, Monte Carlo QND readout, a small
//! pulse-sequence language and Levenberg–Marquardt fitting.
//!
//! Runnable entry points live in `examples/`:
//!
//! | example | shows |
//! |---|---|
//! | `nmr_lines` | transition frequencies of both isotopes and dark-line visibility |
//! | `rabi_contrast` | Monte Carlo Rabi trace against the contrast algebra |
//! | `charge_kinetics` | red and green population dynamics |
//! | `power_dependence` | saturable rate law and its log-log slopes |
//! | `dark_state_map` | spectrum after red pre-pulses, populations recovered |
//! | `pulse_program` | parsing, serializing and running a `.seq` program |
//! | `fit_roundtrip` | every fit model recovering parameters from noisy data |
//! | `t1_decay` | nuclear relaxation in both charge states |
//!
//! The `nvsim` binary wraps [`recipes`] for command-line use.

pub mod bloch;
pub mod config;
pub mod dsl;
pub mod fit;
pub mod io;
pub mod kinetics;
pub mod qnd;
pub mod readout;
pub mod recipes;
pub mod spin;
