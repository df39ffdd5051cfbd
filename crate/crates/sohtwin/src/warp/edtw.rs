//! Energy-discrepancy-aware time warping: DTW alternated with a
//! canonical-correlation eigen-step.
//!
//! Each iteration (a) runs DTW on the spatially projected sequences and
//! (b) recomputes the spatial projections from the warped cross/auto Gram
//! matrices (centered, regularized, whitened, top singular triplets). The
//! tracked objective adds the alignment term to a squared *relative*
//! per-sample energy discrepancy per sequence, so warps that repeat or drop
//! columns in an energy-distorting way are penalized independently of the
//! sequence lengths.

use nalgebra::{DMatrix, SymmetricEigen};

use super::dtw::dtw_squared;
use super::{EdtwConfig, EdtwSolution, WarpError, WarpPath};

/// Ridge added to the warped Gram matrices, as a fraction of their trace.
const GRAM_RIDGE: f64 = 1e-6;
/// Objective increases beyond this are treated as genuine ascent of the
/// alternation (a cycling fixed point), not roundoff.
const ASCENT_SLACK: f64 = 1e-12;

pub fn edtw_solve(
    ref_seq: &DMatrix<f64>,
    target_seq: &DMatrix<f64>,
    config: &EdtwConfig,
) -> Result<EdtwSolution, WarpError> {
    let num_vars = ref_seq.nrows();
    if ref_seq.ncols() == 0 || target_seq.ncols() == 0 || num_vars == 0 {
        return Err(WarpError::EmptyInput);
    }
    if target_seq.nrows() != num_vars {
        return Err(WarpError::DimensionMismatch {
            expected: num_vars,
            actual: target_seq.nrows(),
        });
    }
    if ref_seq.iter().chain(target_seq.iter()).any(|v| !v.is_finite()) {
        return Err(WarpError::NonFiniteInput);
    }
    if config.components == 0 || config.components > num_vars {
        return Err(WarpError::BadConfig(format!(
            "components must be in 1..={num_vars}"
        )));
    }
    if !(config.tol > 0.0) {
        return Err(WarpError::BadConfig("tol must be positive".into()));
    }
    if config.max_iter == 0 {
        return Err(WarpError::BadConfig("max_iter must be >= 1".into()));
    }

    let energy_ref = per_sample_energy(ref_seq);
    let energy_target = per_sample_energy(target_seq);

    let mut v_ref = DMatrix::<f64>::identity(num_vars, config.components);
    let mut v_target = DMatrix::<f64>::identity(num_vars, config.components);

    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations_used = 0;
    let mut accepted: Option<(f64, WarpPath, DMatrix<f64>, DMatrix<f64>)> = None;

    for iter in 1..=config.max_iter {
        iterations_used = iter;

        let proj_ref = v_ref.transpose() * ref_seq;
        let proj_target = v_target.transpose() * target_seq;
        let (path, _) = dtw_squared(&proj_ref, &proj_target);

        let warped_ref = gather_columns(ref_seq, path.pairs().iter().map(|p| p.0));
        let warped_target = gather_columns(target_seq, path.pairs().iter().map(|p| p.1));
        let (new_v_ref, new_v_target) =
            cca_pair(&warped_ref, &warped_target, config.components)?;

        let align = {
            let diff = new_v_ref.transpose() * center_rows(&warped_ref)
                - new_v_target.transpose() * center_rows(&warped_target);
            diff.norm_squared()
        };
        let rel = |warped: &DMatrix<f64>, orig: f64| {
            (per_sample_energy(warped) - orig) / orig.max(1e-12)
        };
        let energy_penalty = rel(&warped_ref, energy_ref).powi(2)
            + rel(&warped_target, energy_target).powi(2);
        let objective = align + config.energy_weight * energy_penalty;

        match &accepted {
            Some((prev, _, _, _)) if objective > prev + ASCENT_SLACK => {
                // The alternation proposed an ascent. It is deterministic, so
                // re-running from the kept state would propose the same move
                // forever: the accepted objective can no longer change, which
                // is convergence of the accepted sequence.
                converged = true;
                break;
            }
            Some((prev, _, _, _)) => {
                let delta = (objective - prev).abs();
                trace.push(objective);
                accepted = Some((objective, path, new_v_ref.clone(), new_v_target.clone()));
                v_ref = new_v_ref;
                v_target = new_v_target;
                if delta < config.tol || objective <= f64::EPSILON {
                    converged = true;
                    break;
                }
            }
            None => {
                trace.push(objective);
                accepted = Some((objective, path, new_v_ref.clone(), new_v_target.clone()));
                v_ref = new_v_ref;
                v_target = new_v_target;
                if objective <= f64::EPSILON {
                    // Exact optimum (identical sequences); nothing to refine.
                    converged = true;
                    break;
                }
            }
        }
    }

    let (_, path, v_ref, v_target) = accepted.expect("max_iter >= 1 accepts an iterate");
    Ok(EdtwSolution {
        path,
        v_ref,
        v_target,
        objective_trace: trace,
        converged,
        iterations_used,
    })
}

/// Frobenius norm of the column-averaged variables-Gram `X Xᵀ / K`; the
/// per-sample energy that synchronization is expected to preserve.
pub(crate) fn per_sample_energy(seq: &DMatrix<f64>) -> f64 {
    (seq * seq.transpose() / seq.ncols() as f64).norm()
}

pub(crate) fn gather_columns(
    seq: &DMatrix<f64>,
    indices: impl Iterator<Item = usize> + ExactSizeIterator,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(seq.nrows(), indices.len());
    for (dst, src) in indices.enumerate() {
        out.set_column(dst, &seq.column(src));
    }
    out
}

fn center_rows(seq: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = seq.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    out
}

/// One canonical-correlation step: centers both warped sequences, whitens
/// their Gram matrices, and back-transforms the top singular triplets of the
/// whitened coupling matrix into projection matrices.
fn cca_pair(
    warped_ref: &DMatrix<f64>,
    warped_target: &DMatrix<f64>,
    components: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>), WarpError> {
    let centered_ref = center_rows(warped_ref);
    let centered_target = center_rows(warped_target);

    let gram_ref = regularize(&centered_ref * centered_ref.transpose())?;
    let gram_target = regularize(&centered_target * centered_target.transpose())?;
    let cross = &centered_ref * centered_target.transpose();

    let whiten_ref = inv_sqrt_sym(&gram_ref)?;
    let whiten_target = inv_sqrt_sym(&gram_target)?;

    let coupling = &whiten_ref * cross * &whiten_target;
    let svd = coupling.clone().svd(true, true);
    let u = svd.u.ok_or(WarpError::SingularGram)?;
    let v_t = svd.v_t.ok_or(WarpError::SingularGram)?;

    // Deterministic output: order triplets by singular value (descending,
    // index tie-break) and fix each left vector's dominant entry positive.
    let dim = coupling.nrows();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .expect("singular values are finite")
            .then(a.cmp(&b))
    });

    let mut basis_ref = DMatrix::zeros(dim, components);
    let mut basis_target = DMatrix::zeros(dim, components);
    for (out_col, &src) in order.iter().take(components).enumerate() {
        let mut left = u.column(src).clone_owned();
        let mut right = v_t.row(src).transpose();
        let dominant = left
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| {
                a.abs()
                    .partial_cmp(&b.abs())
                    .expect("finite entries")
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        if left[dominant] < 0.0 {
            left.neg_mut();
            right.neg_mut();
        }
        basis_ref.set_column(out_col, &left);
        basis_target.set_column(out_col, &right);
    }

    Ok((whiten_ref * basis_ref, whiten_target * basis_target))
}

fn regularize(gram: DMatrix<f64>) -> Result<DMatrix<f64>, WarpError> {
    let trace = gram.trace();
    if !(trace > 0.0) {
        return Err(WarpError::SingularGram);
    }
    let dim = gram.nrows();
    Ok(gram + DMatrix::identity(dim, dim) * (GRAM_RIDGE * trace))
}

fn inv_sqrt_sym(gram: &DMatrix<f64>) -> Result<DMatrix<f64>, WarpError> {
    let eig = SymmetricEigen::new(gram.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(WarpError::SingularGram);
    }
    let scaled = DMatrix::from_fn(gram.nrows(), gram.ncols(), |r, c| {
        eig.eigenvectors[(r, c)] / eig.eigenvalues[c].sqrt()
    });
    Ok(scaled * eig.eigenvectors.transpose())
}
