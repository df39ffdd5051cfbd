//! Variable-length cycle synchronization: DTW and energy-discrepancy-aware
//! time warping against a reference cycle.

mod dtw;
mod edtw;

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::BatteryRecord;

pub use dtw::dtw_align;
pub use edtw::edtw_solve;
pub(crate) use edtw::per_sample_energy;

#[derive(Debug, Error)]
pub enum WarpError {
    #[error("input sequence is empty")]
    EmptyInput,
    #[error("input sequence contains non-finite values")]
    NonFiniteInput,
    #[error("variable-count mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid warp configuration: {0}")]
    BadConfig(String),
    #[error("warped Gram matrix is singular after regularization")]
    SingularGram,
    #[error("synchronizing cycle {cycle} against the reference: {source}")]
    CycleSolve {
        cycle: usize,
        #[source]
        source: Box<WarpError>,
    },
    #[error("invalid warp path: {0}")]
    InvalidPath(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad synced artifact at {path}:{line}: {reason}")]
    Format {
        path: String,
        line: usize,
        reason: String,
    },
}

/// A monotone, continuous alignment between a reference and a target
/// sequence: ordered `(ref_index, target_index)` pairs (0-based) from
/// `(0, 0)` to `(K_ref - 1, K_target - 1)`, each step advancing at least one
/// index by exactly one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpPath {
    pairs: Vec<(usize, usize)>,
}

impl WarpPath {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self, WarpError> {
        if pairs.is_empty() {
            return Err(WarpError::InvalidPath("path is empty".into()));
        }
        if pairs[0] != (0, 0) {
            return Err(WarpError::InvalidPath(format!(
                "path starts at {:?}, not (0, 0)",
                pairs[0]
            )));
        }
        for (step, window) in pairs.windows(2).enumerate() {
            let (i0, j0) = window[0];
            let (i1, j1) = window[1];
            let valid = matches!(
                (i1.wrapping_sub(i0), j1.wrapping_sub(j0)),
                (0, 1) | (1, 0) | (1, 1)
            );
            if !valid {
                return Err(WarpError::InvalidPath(format!(
                    "illegal step {:?} -> {:?} at position {step}",
                    window[0], window[1]
                )));
            }
        }
        Ok(Self { pairs })
    }

    /// Used by the DP backtrack, which produces valid paths by construction.
    pub(crate) fn from_backtrack(pairs: Vec<(usize, usize)>) -> Self {
        debug_assert!(Self::new(pairs.clone()).is_ok());
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Number of alignment steps `m`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    /// Reference length spanned by the path.
    pub fn ref_len(&self) -> usize {
        self.pairs.last().expect("path is non-empty").0 + 1
    }

    /// Target length spanned by the path.
    pub fn target_len(&self) -> usize {
        self.pairs.last().expect("path is non-empty").1 + 1
    }

    /// True when every pair lies on the diagonal.
    pub fn is_diagonal(&self) -> bool {
        self.pairs.iter().all(|&(i, j)| i == j)
    }
}

/// Solver settings for [`edtw_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdtwConfig {
    /// Number of spatial components `M` (at most the variable count).
    pub components: usize,
    /// Convergence threshold on the objective change between iterations.
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the energy-discrepancy penalty.
    pub energy_weight: f64,
}

impl Default for EdtwConfig {
    fn default() -> Self {
        Self {
            components: 2,
            tol: 0.01,
            max_iter: 50,
            energy_weight: 1.0,
        }
    }
}

/// Result of one reference/target EDTW run.
///
/// `objective_trace` holds the accepted objective value per iteration and is
/// non-increasing after the first entry: an iteration whose proposal would
/// raise the objective is rejected and the solver stops at the previous
/// iterate (the alternation is deterministic, so the objective would never
/// change again — `converged` is true in that case too). `converged` is false
/// only when `max_iter` ran out while the objective was still moving by at
/// least `tol`. The projection columns are orthonormal under the centered,
/// ridge-regularized warped Gram of their own sequence.
#[derive(Debug, Clone)]
pub struct EdtwSolution {
    pub path: WarpPath,
    /// Spatial projection of the reference, `J x M`.
    pub v_ref: DMatrix<f64>,
    /// Spatial projection of the target, `J x M`.
    pub v_target: DMatrix<f64>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
}

/// Projects a target back onto the reference timeline: for each reference
/// index, the mean of all target columns paired with it on the warp path.
/// Output stays in original physical units.
pub fn synchronize_cycle(
    solution: &EdtwSolution,
    target_seq: &DMatrix<f64>,
    k_ref: usize,
) -> Result<DMatrix<f64>, WarpError> {
    let path = &solution.path;
    if path.ref_len() != k_ref {
        return Err(WarpError::InvalidPath(format!(
            "path spans {} reference indices, expected {k_ref}",
            path.ref_len()
        )));
    }
    if path.target_len() != target_seq.ncols() {
        return Err(WarpError::InvalidPath(format!(
            "path spans {} target indices, sequence has {}",
            path.target_len(),
            target_seq.ncols()
        )));
    }
    let mut out = DMatrix::zeros(target_seq.nrows(), k_ref);
    let mut counts = vec![0usize; k_ref];
    for &(r, t) in path.pairs() {
        let mut col = out.column_mut(r);
        col += target_seq.column(t);
        counts[r] += 1;
    }
    for (r, &count) in counts.iter().enumerate() {
        // Continuity guarantees every reference index is visited.
        debug_assert!(count > 0);
        out.column_mut(r).scale_mut(1.0 / count as f64);
    }
    Ok(out)
}

/// All cycles of a battery synchronized to a common reference length.
#[derive(Debug, Clone)]
pub struct SyncedBattery {
    reference_length: usize,
    source: String,
    cycle_indices: Vec<usize>,
    synced: Vec<DMatrix<f64>>,
    per_cycle_energy_error: Vec<f64>,
    per_cycle_converged: Vec<bool>,
}

impl SyncedBattery {
    pub fn reference_length(&self) -> usize {
        self.reference_length
    }

    /// Battery id the cycles came from.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn cycle_indices(&self) -> &[usize] {
        &self.cycle_indices
    }

    /// Synchronized trajectories, one `J x K_ref` matrix per cycle, in cycle
    /// order.
    pub fn cycles(&self) -> &[DMatrix<f64>] {
        &self.synced
    }

    pub fn len(&self) -> usize {
        self.synced.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synced.is_empty()
    }

    /// Relative per-sample energy discrepancy `|e_sync - e_orig| / e_orig`
    /// per cycle, where `e` is the Frobenius norm of the column-averaged
    /// variables-Gram matrix.
    pub fn energy_errors(&self) -> &[f64] {
        &self.per_cycle_energy_error
    }

    pub fn converged_flags(&self) -> &[bool] {
        &self.per_cycle_converged
    }

    pub fn num_variables(&self) -> usize {
        self.synced.first().map_or(0, |m| m.nrows())
    }
}

/// Synchronizes every cycle of `record` (the reference included, which maps
/// to itself) against the cycle at `ref_position`.
pub fn synchronize_battery(
    record: &BatteryRecord,
    ref_position: usize,
    config: &EdtwConfig,
) -> Result<SyncedBattery, WarpError> {
    let reference = record
        .cycles()
        .get(ref_position)
        .ok_or_else(|| {
            WarpError::BadConfig(format!(
                "reference position {ref_position} out of range (C = {})",
                record.len()
            ))
        })?
        .samples();
    let k_ref = reference.ncols();

    let results: Vec<(DMatrix<f64>, f64, bool)> = record
        .cycles()
        .par_iter()
        .map(|cycle| {
            let tag = |source: WarpError| WarpError::CycleSolve {
                cycle: cycle.cycle_index(),
                source: Box::new(source),
            };
            let solution = edtw_solve(reference, cycle.samples(), config).map_err(tag)?;
            let synced = synchronize_cycle(&solution, cycle.samples(), k_ref).map_err(tag)?;
            let original = per_sample_energy(cycle.samples());
            let error = (per_sample_energy(&synced) - original).abs() / original.max(1e-12);
            Ok((synced, error, solution.converged))
        })
        .collect::<Result<_, WarpError>>()?;

    let mut synced = Vec::with_capacity(results.len());
    let mut energy = Vec::with_capacity(results.len());
    let mut converged = Vec::with_capacity(results.len());
    for (matrix, err, conv) in results {
        synced.push(matrix);
        energy.push(err);
        converged.push(conv);
    }
    Ok(SyncedBattery {
        reference_length: k_ref,
        source: record.battery_id().to_string(),
        cycle_indices: record.cycles().iter().map(|c| c.cycle_index()).collect(),
        synced,
        per_cycle_energy_error: energy,
        per_cycle_converged: converged,
    })
}

// ---------------------------------------------------------------------------
// Persistence: synced.csv + sync_meta.json
// ---------------------------------------------------------------------------

/// Sidecar metadata persisted next to `synced.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyncMeta {
    pub source: String,
    pub k_ref: usize,
    /// Cycle index (not position) of the reference cycle.
    pub ref_cycle: usize,
    pub components: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub energy_weight: f64,
    pub cycle_indices: Vec<usize>,
    pub per_cycle_energy_error: Vec<f64>,
    pub per_cycle_converged: Vec<bool>,
}

impl SyncMeta {
    pub fn new(synced: &SyncedBattery, config: &EdtwConfig, ref_cycle: usize) -> Self {
        Self {
            source: synced.source.clone(),
            k_ref: synced.reference_length,
            ref_cycle,
            components: config.components,
            tol: config.tol,
            max_iter: config.max_iter,
            energy_weight: config.energy_weight,
            cycle_indices: synced.cycle_indices.clone(),
            per_cycle_energy_error: synced.per_cycle_energy_error.clone(),
            per_cycle_converged: synced.per_cycle_converged.clone(),
        }
    }
}

impl SyncedBattery {
    /// Writes `synced.csv` (`cycle,k,voltage,temperature`, k 1-based) and
    /// `sync_meta.json` into `dir`.
    pub fn save(
        &self,
        dir: &Path,
        config: &EdtwConfig,
        ref_cycle: usize,
    ) -> Result<(), WarpError> {
        use std::fmt::Write as _;
        let io_err = |path: &Path| {
            let path = path.display().to_string();
            move |source: std::io::Error| WarpError::Io { path, source }
        };
        let mut csv = String::from("cycle,k,voltage,temperature\n");
        for (cycle_index, matrix) in self.cycle_indices.iter().zip(&self.synced) {
            for k in 0..matrix.ncols() {
                writeln!(
                    csv,
                    "{},{},{},{}",
                    cycle_index,
                    k + 1,
                    matrix[(crate::dataset::VOLTAGE_ROW, k)],
                    matrix[(crate::dataset::TEMPERATURE_ROW, k)]
                )
                .expect("writing to String cannot fail");
            }
        }
        let csv_path = dir.join("synced.csv");
        crate::cli::write_atomic(&csv_path, csv.as_bytes()).map_err(io_err(&csv_path))?;

        let meta = SyncMeta::new(self, config, ref_cycle);
        let meta_path = dir.join("sync_meta.json");
        let body = serde_json::to_string_pretty(&meta).expect("meta serializes");
        crate::cli::write_atomic(&meta_path, body.as_bytes()).map_err(io_err(&meta_path))
    }

    /// Reads the artifact pair written by [`SyncedBattery::save`].
    pub fn load(dir: &Path) -> Result<(Self, SyncMeta), WarpError> {
        let meta_path = dir.join("sync_meta.json");
        let meta_str = fs::read_to_string(&meta_path).map_err(|source| WarpError::Io {
            path: meta_path.display().to_string(),
            source,
        })?;
        let meta: SyncMeta = serde_json::from_str(&meta_str).map_err(|e| WarpError::Format {
            path: meta_path.display().to_string(),
            line: 0,
            reason: e.to_string(),
        })?;

        let csv_path = dir.join("synced.csv");
        let path_str = csv_path.display().to_string();
        let text = fs::read_to_string(&csv_path).map_err(|source| WarpError::Io {
            path: path_str.clone(),
            source,
        })?;
        let format_err = |line: usize, reason: String| WarpError::Format {
            path: path_str.clone(),
            line,
            reason,
        };

        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "cycle,k,voltage,temperature" => {}
            _ => return Err(format_err(1, "bad header".into())),
        }
        let mut synced = Vec::with_capacity(meta.cycle_indices.len());
        let mut current: Option<(usize, Vec<[f64; 2]>)> = None;
        let mut flush = |current: &mut Option<(usize, Vec<[f64; 2]>)>,
                         synced: &mut Vec<DMatrix<f64>>|
         -> Result<(), WarpError> {
            if let Some((cycle, rows)) = current.take() {
                if rows.len() != meta.k_ref {
                    return Err(WarpError::Format {
                        path: path_str.clone(),
                        line: 0,
                        reason: format!(
                            "cycle {cycle} has {} synchronized samples, expected {}",
                            rows.len(),
                            meta.k_ref
                        ),
                    });
                }
                synced.push(DMatrix::from_fn(2, rows.len(), |j, k| rows[k][j]));
            }
            Ok(())
        };
        for (idx, raw) in lines {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let mut field = || {
                parts
                    .next()
                    .ok_or_else(|| format_err(line_no, "missing field".into()))
            };
            let cycle: usize = field()?
                .parse()
                .map_err(|_| format_err(line_no, "bad cycle".into()))?;
            let _k: usize = field()?
                .parse()
                .map_err(|_| format_err(line_no, "bad k".into()))?;
            let voltage: f64 = field()?
                .parse()
                .map_err(|_| format_err(line_no, "bad voltage".into()))?;
            let temperature: f64 = field()?
                .parse()
                .map_err(|_| format_err(line_no, "bad temperature".into()))?;
            match current.as_mut() {
                Some((c, rows)) if *c == cycle => rows.push([voltage, temperature]),
                _ => {
                    flush(&mut current, &mut synced)?;
                    current = Some((cycle, vec![[voltage, temperature]]));
                }
            }
        }
        flush(&mut current, &mut synced)?;
        if synced.len() != meta.cycle_indices.len() {
            return Err(format_err(
                0,
                format!(
                    "{} cycles in csv, {} in meta",
                    synced.len(),
                    meta.cycle_indices.len()
                ),
            ));
        }
        Ok((
            Self {
                reference_length: meta.k_ref,
                source: meta.source.clone(),
                cycle_indices: meta.cycle_indices.clone(),
                synced,
                per_cycle_energy_error: meta.per_cycle_energy_error.clone(),
                per_cycle_converged: meta.per_cycle_converged.clone(),
            },
            meta,
        ))
    }
}
