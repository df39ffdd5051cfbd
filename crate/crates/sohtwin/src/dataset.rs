//! Cycling-data ingestion, synthetic degradation data, and train/test splits.
//!
//! A battery's history is a [`BatteryRecord`]: one [`CycleTrajectory`] per
//! discharge cycle (variable length across cycles) plus one measured capacity
//! label per cycle. Two measured variables are carried per sampling instant,
//! in a fixed, documented order: row 0 voltage (V), row 1 temperature (°C).
//! Discharge current is constant under the test protocol and is not an input.
//!
//! File formats (shared with the CLI):
//! - cycles CSV: header `cycle,t,voltage,temperature`, rows grouped by cycle
//!   and time-ascending within a cycle;
//! - labels CSV: header `cycle,capacity_ah`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Row index of the discharge voltage variable.
pub const VOLTAGE_ROW: usize = 0;
/// Row index of the surface temperature variable.
pub const TEMPERATURE_ROW: usize = 1;
/// Number of measured variables per sampling instant.
pub const NUM_VARIABLES: usize = 2;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("missing capacity for cycle {cycle}")]
    MissingLabel { cycle: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("invalid record: {0}")]
    Invariant(String),
}

/// One discharge cycle's multivariate time series.
///
/// Samples are stored as a `J x K` matrix: one row per variable, one column
/// per sampling instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleTrajectory {
    cycle_index: usize,
    samples: DMatrix<f64>,
    sample_period: f64,
}

impl CycleTrajectory {
    pub fn new(
        cycle_index: usize,
        samples: DMatrix<f64>,
        sample_period: f64,
    ) -> Result<Self, DatasetError> {
        if cycle_index == 0 {
            return Err(DatasetError::Invariant("cycle_index must be >= 1".into()));
        }
        if samples.ncols() < 2 {
            return Err(DatasetError::Invariant(format!(
                "cycle {cycle_index} has {} samples, need at least 2",
                samples.ncols()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(DatasetError::Invariant(format!(
                "cycle {cycle_index} contains a non-finite sample"
            )));
        }
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(DatasetError::Invariant(format!(
                "cycle {cycle_index} has non-positive sample period"
            )));
        }
        Ok(Self {
            cycle_index,
            samples,
            sample_period,
        })
    }

    pub fn cycle_index(&self) -> usize {
        self.cycle_index
    }

    /// `J x K` sample matrix.
    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    /// Number of sampling instants `K`.
    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false // K >= 2 by construction
    }

    pub fn num_variables(&self) -> usize {
        self.samples.nrows()
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }
}

/// A battery's full cycling history with capacity labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryRecord {
    battery_id: String,
    cycles: Vec<CycleTrajectory>,
    capacities: Vec<f64>,
    nominal_capacity: f64,
}

impl BatteryRecord {
    pub fn new(
        battery_id: impl Into<String>,
        cycles: Vec<CycleTrajectory>,
        capacities: Vec<f64>,
        nominal_capacity: f64,
    ) -> Result<Self, DatasetError> {
        if cycles.is_empty() {
            return Err(DatasetError::Invariant("record has no cycles".into()));
        }
        if cycles.len() != capacities.len() {
            return Err(DatasetError::Invariant(format!(
                "{} cycles but {} capacity labels",
                cycles.len(),
                capacities.len()
            )));
        }
        if !(nominal_capacity.is_finite() && nominal_capacity > 0.0) {
            return Err(DatasetError::Invariant(
                "nominal capacity must be positive".into(),
            ));
        }
        for pair in cycles.windows(2) {
            if pair[1].cycle_index() <= pair[0].cycle_index() {
                return Err(DatasetError::Invariant(format!(
                    "cycle indices not strictly increasing at cycle {}",
                    pair[1].cycle_index()
                )));
            }
        }
        for (cycle, &cap) in cycles.iter().zip(&capacities) {
            if !(cap.is_finite() && cap > 0.0 && cap < 2.0 * nominal_capacity) {
                return Err(DatasetError::Invariant(format!(
                    "capacity {cap} of cycle {} outside (0, 2 x nominal)",
                    cycle.cycle_index()
                )));
            }
        }
        Ok(Self {
            battery_id: battery_id.into(),
            cycles,
            capacities,
            nominal_capacity,
        })
    }

    pub fn battery_id(&self) -> &str {
        &self.battery_id
    }

    pub fn cycles(&self) -> &[CycleTrajectory] {
        &self.cycles
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn nominal_capacity(&self) -> f64 {
        self.nominal_capacity
    }

    /// Number of cycles `C`.
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    /// Position of the cycle with the given index, if present.
    pub fn position_of(&self, cycle_index: usize) -> Option<usize> {
        self.cycles
            .binary_search_by_key(&cycle_index, |c| c.cycle_index())
            .ok()
    }
}

/// Train/test split policy: drop the healthy head of the record, then split
/// the remainder by cycle order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    /// First cycle index considered degraded; earlier cycles are excluded.
    pub degradation_start_cycle: usize,
    /// Fraction of the remaining cycles (by index order) used for training.
    pub train_fraction: f64,
}

/// Splits a record into train and test views.
///
/// Cycles with index below `degradation_start_cycle` are excluded entirely;
/// of the remainder, the first `floor(train_fraction * n)` cycles form the
/// train set and the rest the test set.
pub fn split(
    record: &BatteryRecord,
    spec: &SplitSpec,
) -> Result<(BatteryRecord, BatteryRecord), DatasetError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(DatasetError::Split(format!(
            "train_fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let keep: Vec<usize> = (0..record.len())
        .filter(|&i| record.cycles[i].cycle_index() >= spec.degradation_start_cycle)
        .collect();
    let n = keep.len();
    let n_train = (spec.train_fraction * n as f64).floor() as usize;
    if n_train == 0 {
        return Err(DatasetError::Split("empty train set".into()));
    }
    if n_train == n {
        return Err(DatasetError::Split("empty test set".into()));
    }
    let subset = |positions: &[usize]| -> Result<BatteryRecord, DatasetError> {
        BatteryRecord::new(
            record.battery_id.clone(),
            positions.iter().map(|&i| record.cycles[i].clone()).collect(),
            positions.iter().map(|&i| record.capacities[i]).collect(),
            record.nominal_capacity,
        )
    };
    Ok((subset(&keep[..n_train])?, subset(&keep[n_train..])?))
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Reads a battery from a cycles CSV and a labels CSV.
///
/// The battery id is the cycles-file stem. The nominal capacity is defined as
/// the maximum capacity label (the fresh-cell capacity); the CSV interfaces
/// carry no separate nominal-capacity field.
pub fn parse_battery(
    csv_cycles: &Path,
    csv_labels: &Path,
) -> Result<BatteryRecord, DatasetError> {
    let labels = parse_labels(csv_labels)?;
    let path_str = csv_cycles.display().to_string();
    let text = fs::read_to_string(csv_cycles).map_err(|source| DatasetError::Io {
        path: path_str.clone(),
        source,
    })?;

    let parse_err = |line: usize, reason: String| DatasetError::Parse {
        path: path_str.clone(),
        line,
        reason,
    };

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "cycle,t,voltage,temperature" => {}
        Some((_, header)) => {
            return Err(parse_err(1, format!("unexpected header `{}`", header.trim())))
        }
        None => return Err(parse_err(1, "empty file".into())),
    }

    struct Pending {
        cycle: usize,
        times: Vec<f64>,
        values: Vec<[f64; NUM_VARIABLES]>,
        first_line: usize,
    }

    let mut cycles: Vec<CycleTrajectory> = Vec::new();
    let mut capacities: Vec<f64> = Vec::new();
    let mut pending: Option<Pending> = None;

    let close = |p: Pending,
                     cycles: &mut Vec<CycleTrajectory>,
                     capacities: &mut Vec<f64>|
     -> Result<(), DatasetError> {
        let cap = *labels
            .get(&p.cycle)
            .ok_or(DatasetError::MissingLabel { cycle: p.cycle })?;
        let k = p.values.len();
        let samples = DMatrix::from_fn(NUM_VARIABLES, k, |j, t| p.values[t][j]);
        let period = if k >= 2 { p.times[1] - p.times[0] } else { 1.0 };
        let cycle = CycleTrajectory::new(p.cycle, samples, period).map_err(|e| {
            DatasetError::Parse {
                path: path_str.clone(),
                line: p.first_line,
                reason: e.to_string(),
            }
        })?;
        cycles.push(cycle);
        capacities.push(cap);
        Ok(())
    };

    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next_field = |name: &str| {
            fields
                .next()
                .ok_or_else(|| parse_err(line_no, format!("missing field `{name}`")))
        };
        let cycle: usize = next_field("cycle")?
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, "bad cycle id".into()))?;
        let t: f64 = next_field("t")?
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, "bad time value".into()))?;
        let voltage: f64 = next_field("voltage")?
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, "bad voltage value".into()))?;
        let temperature: f64 = next_field("temperature")?
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, "bad temperature value".into()))?;
        if !(t.is_finite() && voltage.is_finite() && temperature.is_finite()) {
            return Err(parse_err(line_no, "non-finite value".into()));
        }

        match pending.as_mut() {
            Some(p) if p.cycle == cycle => {
                if t <= *p.times.last().expect("pending cycle has rows") {
                    return Err(parse_err(
                        line_no,
                        format!("time not increasing within cycle {cycle}"),
                    ));
                }
                p.times.push(t);
                p.values.push([voltage, temperature]);
            }
            Some(p) => {
                if cycle <= p.cycle {
                    return Err(parse_err(
                        line_no,
                        format!("cycle {cycle} out of order (rows must be grouped, ids increasing)"),
                    ));
                }
                let finished = pending.take().expect("checked above");
                close(finished, &mut cycles, &mut capacities)?;
                pending = Some(Pending {
                    cycle,
                    times: vec![t],
                    values: vec![[voltage, temperature]],
                    first_line: line_no,
                });
            }
            None => {
                pending = Some(Pending {
                    cycle,
                    times: vec![t],
                    values: vec![[voltage, temperature]],
                    first_line: line_no,
                });
            }
        }
    }
    if let Some(p) = pending.take() {
        close(p, &mut cycles, &mut capacities)?;
    }
    if cycles.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }

    let nominal = capacities.iter().cloned().fold(f64::MIN, f64::max);
    let battery_id = csv_cycles
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "battery".into());
    BatteryRecord::new(battery_id, cycles, capacities, nominal)
}

fn parse_labels(path: &Path) -> Result<BTreeMap<usize, f64>, DatasetError> {
    let path_str = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path_str.clone(),
        source,
    })?;
    let parse_err = |line: usize, reason: String| DatasetError::Parse {
        path: path_str.clone(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "cycle,capacity_ah" => {}
        Some((_, header)) => {
            return Err(parse_err(1, format!("unexpected header `{}`", header.trim())))
        }
        None => return Err(parse_err(1, "empty file".into())),
    }
    let mut labels = BTreeMap::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (cycle_s, cap_s) = line
            .split_once(',')
            .ok_or_else(|| parse_err(line_no, "expected `cycle,capacity_ah`".into()))?;
        let cycle: usize = cycle_s
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, "bad cycle id".into()))?;
        let cap: f64 = cap_s
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, "bad capacity value".into()))?;
        if !cap.is_finite() {
            return Err(parse_err(line_no, "non-finite capacity".into()));
        }
        labels.insert(cycle, cap);
    }
    Ok(labels)
}

/// Writes a record as the cycles/labels CSV pair read back by
/// [`parse_battery`]. Float formatting uses Rust's shortest round-trip
/// representation, so a write/parse round trip reproduces samples bitwise.
pub fn write_battery(
    record: &BatteryRecord,
    csv_cycles: &Path,
    csv_labels: &Path,
) -> Result<(), DatasetError> {
    let mut cycles_out = String::from("cycle,t,voltage,temperature\n");
    for cycle in record.cycles() {
        let period = cycle.sample_period();
        for k in 0..cycle.len() {
            let t = k as f64 * period;
            writeln!(
                cycles_out,
                "{},{},{},{}",
                cycle.cycle_index(),
                t,
                cycle.samples()[(VOLTAGE_ROW, k)],
                cycle.samples()[(TEMPERATURE_ROW, k)]
            )
            .expect("writing to String cannot fail");
        }
    }
    let mut labels_out = String::from("cycle,capacity_ah\n");
    for (cycle, cap) in record.cycles().iter().zip(record.capacities()) {
        writeln!(labels_out, "{},{}", cycle.cycle_index(), cap)
            .expect("writing to String cannot fail");
    }
    let write = |path: &Path, data: &str| -> Result<(), DatasetError> {
        crate::cli::write_atomic(path, data.as_bytes()).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    write(csv_cycles, &cycles_out)?;
    write(csv_labels, &labels_out)
}

// ---------------------------------------------------------------------------
// Synthetic degradation data
// ---------------------------------------------------------------------------

/// Configuration for the deterministic synthetic battery generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    /// Total number of cycles `C`.
    pub cycles: usize,
    /// Length of the first (longest) cycle.
    pub base_length: usize,
    /// Fresh-cell capacity in ampere-hours.
    pub nominal_capacity_ah: f64,
    /// Total capacity fade fraction at end of test: the last cycle holds
    /// `nominal * (1 - fade_alpha)`.
    pub fade_alpha: f64,
    /// Curvature of the fade law `1 - alpha * (c/C)^beta`.
    pub fade_beta: f64,
    /// Bounded uniform measurement-noise amplitude, in volts; temperature
    /// noise uses ten times this value (the two variables span ~1.6 V vs
    /// ~10 °C).
    pub noise_level: f64,
    /// Seconds per sampling step.
    pub sample_period: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            cycles: 200,
            base_length: 300,
            nominal_capacity_ah: 1.1,
            fade_alpha: 0.35,
            fade_beta: 2.0,
            noise_level: 0.003,
            sample_period: 1.0,
        }
    }
}

const SYNTH_VOLTAGE_START: f64 = 3.6;
const SYNTH_VOLTAGE_CUTOFF: f64 = 2.0;
const SYNTH_LINEAR_DROP: f64 = 0.3;
const SYNTH_SAG_COEFF: f64 = 0.4;
const SYNTH_TAIL_POWER: i32 = 7;
const SYNTH_AMBIENT_C: f64 = 30.0;
const SYNTH_TEMP_BUMP_C: f64 = 6.0;

impl SyntheticConfig {
    fn validate(&self) -> Result<(), DatasetError> {
        if self.cycles < 10 {
            return Err(DatasetError::Config("cycles must be >= 10".into()));
        }
        if self.base_length < 50 {
            return Err(DatasetError::Config("base_length must be >= 50".into()));
        }
        if !(self.fade_alpha > 0.0 && self.fade_alpha <= 0.9) {
            return Err(DatasetError::Config("fade_alpha must be in (0, 0.9]".into()));
        }
        if !(self.fade_beta > 0.0) {
            return Err(DatasetError::Config("fade_beta must be positive".into()));
        }
        if !(self.noise_level >= 0.0) {
            return Err(DatasetError::Config("noise_level must be >= 0".into()));
        }
        if !(self.nominal_capacity_ah > 0.0) {
            return Err(DatasetError::Config("nominal capacity must be positive".into()));
        }
        if !(self.sample_period > 0.0) {
            return Err(DatasetError::Config("sample_period must be positive".into()));
        }
        Ok(())
    }
}

/// Generates a deterministic degrading battery.
///
/// Capacity follows `nominal * (1 - alpha * (c/C)^beta)` (strictly
/// decreasing); cycle length shrinks proportionally to capacity
/// (non-increasing). Each cycle's voltage falls from 3.6 V to the 2.0 V
/// cutoff with an age-dependent mid-curve sag — the value-level signal the
/// regressor learns — and temperature is a fixed smooth bump over the cycle.
/// Uniform bounded noise of amplitude `noise_level` is added to both
/// variables (scaled for temperature); shapes depend only on the config, so
/// two seeds yield identical shapes with different noise.
pub fn generate_synthetic(
    config: &SyntheticConfig,
    seed: u64,
) -> Result<BatteryRecord, DatasetError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c_total = config.cycles;
    let nominal = config.nominal_capacity_ah;

    let capacity_of = |c: usize| -> f64 {
        let frac = c as f64 / c_total as f64;
        nominal * (1.0 - config.fade_alpha * frac.powf(config.fade_beta))
    };
    let first_capacity = capacity_of(1);

    let mut cycles = Vec::with_capacity(c_total);
    let mut capacities = Vec::with_capacity(c_total);
    for c in 1..=c_total {
        let capacity = capacity_of(c);
        let fade_factor = capacity / first_capacity; // 1.0 for the first cycle
        let k_c = ((config.base_length as f64 * fade_factor).round() as usize).max(2);

        // Endpoints are pinned at (3.6 V, cutoff); ageing deepens the
        // mid-curve sag, which is where the cross-cycle signal lives.
        let sag = SYNTH_SAG_COEFF * (1.0 - fade_factor);
        let tail_drop = SYNTH_VOLTAGE_START - SYNTH_VOLTAGE_CUTOFF - SYNTH_LINEAR_DROP - sag;

        let mut samples = DMatrix::zeros(NUM_VARIABLES, k_c);
        for k in 0..k_c {
            let u = k as f64 / (k_c - 1) as f64;
            let voltage = SYNTH_VOLTAGE_START
                - (SYNTH_LINEAR_DROP + sag) * u
                - tail_drop * u.powi(SYNTH_TAIL_POWER);
            let temperature = SYNTH_AMBIENT_C + SYNTH_TEMP_BUMP_C * (std::f64::consts::PI * u).sin();
            let v_noise = rng.random_range(-1.0..=1.0) * config.noise_level;
            let t_noise = rng.random_range(-1.0..=1.0) * config.noise_level * 10.0;
            samples[(VOLTAGE_ROW, k)] = voltage + v_noise;
            samples[(TEMPERATURE_ROW, k)] = temperature + t_noise;
        }
        cycles.push(CycleTrajectory::new(c, samples, config.sample_period)?);
        capacities.push(capacity);
    }
    BatteryRecord::new("synthetic", cycles, capacities, nominal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn toy_record() -> BatteryRecord {
        let c1 = CycleTrajectory::new(
            1,
            DMatrix::from_row_slice(2, 5, &[3.6, 3.5, 3.0, 2.5, 2.0, 30.0, 31.0, 33.0, 31.5, 30.0]),
            1.0,
        )
        .unwrap();
        let c2 = CycleTrajectory::new(
            2,
            DMatrix::from_row_slice(2, 4, &[3.6, 3.4, 2.8, 2.0, 30.0, 32.0, 31.0, 30.0]),
            1.0,
        )
        .unwrap();
        BatteryRecord::new("toy", vec![c1, c2], vec![1.08, 1.07], 1.1).unwrap()
    }

    #[test]
    fn parse_two_cycles_with_variable_lengths() {
        let dir = tempdir().unwrap();
        let cycles = dir.path().join("toy_cycles.csv");
        let labels = dir.path().join("toy_labels.csv");
        write_battery(&toy_record(), &cycles, &labels).unwrap();

        let record = parse_battery(&cycles, &labels).unwrap();
        assert_eq!(record.len(), 2);
        assert_eq!(record.cycles()[0].len(), 5);
        assert_eq!(record.cycles()[1].len(), 4);
        assert_eq!(record.battery_id(), "toy_cycles");
    }

    #[test]
    fn missing_label_names_the_cycle() {
        let dir = tempdir().unwrap();
        let cycles = dir.path().join("c.csv");
        let labels = dir.path().join("l.csv");
        fs::write(
            &cycles,
            "cycle,t,voltage,temperature\n3,0,3.6,30\n3,1,3.5,30\n",
        )
        .unwrap();
        fs::write(&labels, "cycle,capacity_ah\n1,1.0\n").unwrap();
        let err = parse_battery(&cycles, &labels).unwrap_err();
        assert_eq!(err.to_string(), "missing capacity for cycle 3");
    }

    #[test]
    fn non_monotone_time_reports_row() {
        let dir = tempdir().unwrap();
        let cycles = dir.path().join("c.csv");
        let labels = dir.path().join("l.csv");
        fs::write(
            &cycles,
            "cycle,t,voltage,temperature\n1,0,3.6,30\n1,2,3.5,30\n1,1,3.4,30\n",
        )
        .unwrap();
        fs::write(&labels, "cycle,capacity_ah\n1,1.0\n").unwrap();
        let err = parse_battery(&cycles, &labels).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":4:"), "expected row number in `{msg}`");
        assert!(msg.contains("time not increasing"));
    }

    #[test]
    fn non_finite_value_rejected() {
        let dir = tempdir().unwrap();
        let cycles = dir.path().join("c.csv");
        let labels = dir.path().join("l.csv");
        fs::write(
            &cycles,
            "cycle,t,voltage,temperature\n1,0,3.6,30\n1,1,NaN,30\n",
        )
        .unwrap();
        fs::write(&labels, "cycle,capacity_ah\n1,1.0\n").unwrap();
        let err = parse_battery(&cycles, &labels).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
    }

    #[test]
    fn write_parse_round_trip_is_bitwise() {
        let record = generate_synthetic(
            &SyntheticConfig {
                cycles: 12,
                base_length: 60,
                ..SyntheticConfig::default()
            },
            42,
        )
        .unwrap();
        let dir = tempdir().unwrap();
        let cycles = dir.path().join("synthetic_cycles.csv");
        let labels = dir.path().join("synthetic_labels.csv");
        write_battery(&record, &cycles, &labels).unwrap();
        let back = parse_battery(&cycles, &labels).unwrap();
        assert_eq!(back.len(), record.len());
        for (a, b) in record.cycles().iter().zip(back.cycles()) {
            assert_eq!(a.samples(), b.samples(), "samples must round-trip bitwise");
        }
        assert_eq!(record.capacities(), back.capacities());
    }

    #[test]
    fn synthetic_final_capacity_matches_fade_target() {
        let record = generate_synthetic(&SyntheticConfig::default(), 7).unwrap();
        let last = *record.capacities().last().unwrap();
        let nominal = record.nominal_capacity();
        assert!(last >= 0.6 * nominal && last <= 0.7 * nominal, "last = {last}");
    }

    #[test]
    fn noiseless_voltage_strictly_non_increasing() {
        let record = generate_synthetic(
            &SyntheticConfig {
                noise_level: 0.0,
                cycles: 30,
                base_length: 80,
                ..SyntheticConfig::default()
            },
            3,
        )
        .unwrap();
        for cycle in record.cycles() {
            let v = cycle.samples().row(VOLTAGE_ROW);
            for k in 1..cycle.len() {
                assert!(v[k] < v[k - 1], "cycle {} at k={k}", cycle.cycle_index());
            }
        }
    }

    #[test]
    fn seeds_differ_in_noise_not_shape() {
        let config = SyntheticConfig {
            cycles: 15,
            base_length: 60,
            ..SyntheticConfig::default()
        };
        let a = generate_synthetic(&config, 7).unwrap();
        let b = generate_synthetic(&config, 8).unwrap();
        assert_eq!(a.len(), b.len());
        let mut any_diff = false;
        for (ca, cb) in a.cycles().iter().zip(b.cycles()) {
            assert_eq!(ca.len(), cb.len());
            any_diff |= ca.samples() != cb.samples();
        }
        assert!(any_diff, "different seeds must change the samples");
    }

    #[test]
    fn synthetic_monotone_shape_property_over_random_configs() {
        // Seeded sweep over valid configs: capacity strictly decreasing and
        // lengths non-increasing must hold regardless of noise.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..40 {
            let config = SyntheticConfig {
                cycles: rng.random_range(10..120),
                base_length: rng.random_range(50..250),
                fade_alpha: rng.random_range(0.05..0.9),
                fade_beta: rng.random_range(0.3..4.0),
                noise_level: rng.random_range(0.0..0.02),
                ..SyntheticConfig::default()
            };
            let record = generate_synthetic(&config, trial).unwrap();
            for pair in record.capacities().windows(2) {
                assert!(pair[1] < pair[0]);
            }
            for pair in record.cycles().windows(2) {
                assert!(pair[1].len() <= pair[0].len());
            }
        }
    }

    #[test]
    fn invalid_synthetic_config_rejected() {
        let bad = SyntheticConfig {
            cycles: 5,
            ..SyntheticConfig::default()
        };
        assert!(matches!(
            generate_synthetic(&bad, 0),
            Err(DatasetError::Config(_))
        ));
    }

    #[test]
    fn split_small_examples() {
        let record = generate_synthetic(
            &SyntheticConfig {
                cycles: 10,
                base_length: 50,
                ..SyntheticConfig::default()
            },
            1,
        )
        .unwrap();
        let (train, test) = split(
            &record,
            &SplitSpec {
                degradation_start_cycle: 1,
                train_fraction: 0.5,
            },
        )
        .unwrap();
        let idx = |r: &BatteryRecord| -> Vec<usize> {
            r.cycles().iter().map(|c| c.cycle_index()).collect()
        };
        assert_eq!(idx(&train), vec![1, 2, 3, 4, 5]);
        assert_eq!(idx(&test), vec![6, 7, 8, 9, 10]);

        assert!(split(
            &record,
            &SplitSpec {
                degradation_start_cycle: 10,
                train_fraction: 0.7,
            },
        )
        .is_err());
    }

    #[test]
    fn split_counts_partition_the_record() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let record = generate_synthetic(
            &SyntheticConfig {
                cycles: 57,
                base_length: 60,
                ..SyntheticConfig::default()
            },
            2,
        )
        .unwrap();
        for _ in 0..30 {
            let spec = SplitSpec {
                degradation_start_cycle: rng.random_range(1..55),
                train_fraction: rng.random_range(0.05..0.95),
            };
            match split(&record, &spec) {
                Ok((train, test)) => {
                    let excluded = record
                        .cycles()
                        .iter()
                        .filter(|c| c.cycle_index() < spec.degradation_start_cycle)
                        .count();
                    assert_eq!(train.len() + test.len() + excluded, record.len());
                    let last_train = train.cycles().last().unwrap().cycle_index();
                    let first_test = test.cycles().first().unwrap().cycle_index();
                    assert!(last_train < first_test);
                }
                Err(DatasetError::Split(_)) => {}
                Err(other) => panic!("unexpected error {other}"),
            }
        }
    }
}
