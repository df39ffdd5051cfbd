//! Real-time state-of-health estimation for Li-ion batteries from partially
//! discharged cycling data.
//!
//! A battery's discharge cycles shrink as it ages, so the raw per-cycle time
//! series (voltage, temperature) have variable lengths and cannot be fed to a
//! fixed-structure regressor directly, and the capacity label is only observed
//! at the *end* of a full discharge. This crate implements the full pipeline
//! that works around both problems:
//!
//! 1. [`warp`] — energy-discrepancy-aware time warping (an alternation of
//!    dynamic time warping with a canonical-correlation eigen-step) aligns
//!    every cycle to a reference cycle, producing fixed-length synchronized
//!    trajectories while preserving per-sample signal energy.
//! 2. [`importance`] — a per-sampling-time importance profile over the
//!    synchronized cycles, a knee-point threshold on the averaged discharge
//!    voltage, selection of the important time interval, and one-hot grid
//!    encoding of the retained samples.
//! 3. [`regressor`] — a from-scratch two-layer LSTM regressor (forward,
//!    backpropagation through time, Adam, gradient verification, binary
//!    persistence) mapping an encoded cycle to end-of-cycle capacity.
//! 4. [`realtime`] — the online engine: for a growing partial cycle it matches
//!    the most similar training cycle, reconstructs the unknown future,
//!    re-synchronizes, encodes, and emits a capacity estimate at every
//!    sampling instant.
//!
//! [`dataset`] handles CSV ingestion, deterministic synthetic degradation data
//! for testing, and train/test splits. [`cli`] ties everything together behind
//! the `sohtwin` binary (`ingest`, `synth`, `sync`, `importance`, `train`,
//! `evaluate`, `stream`).
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example synthesize        # generate a synthetic battery
//! cargo run --release --example synchronize       # EDTW cycle synchronization
//! cargo run --release --example importance_profile
//! cargo run --release --example train_and_evaluate
//! cargo run --release --example gradient_check
//! cargo run --release --example stream_realtime   # per-sample online estimates
//! ```

pub mod cli;
pub mod dataset;
pub mod importance;
pub mod realtime;
pub mod regressor;
pub mod warp;
