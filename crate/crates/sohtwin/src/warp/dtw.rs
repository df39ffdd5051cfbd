//! Dynamic time warping with full path backtracking.

use nalgebra::DMatrix;

use super::{WarpError, WarpPath};

const MOVE_START: u8 = 0;
const MOVE_DIAG: u8 = 1;
const MOVE_REF: u8 = 2;
const MOVE_TARGET: u8 = 3;

/// Aligns two `J x K` sequences, minimizing the summed per-pair Euclidean
/// distance over all monotone continuous warp paths.
///
/// Ties between predecessors are broken deterministically: diagonal first,
/// then ref-advance, then target-advance.
pub fn dtw_align(
    ref_seq: &DMatrix<f64>,
    target_seq: &DMatrix<f64>,
) -> Result<(WarpPath, f64), WarpError> {
    check_input(ref_seq)?;
    check_input(target_seq)?;
    if ref_seq.nrows() != target_seq.nrows() {
        return Err(WarpError::DimensionMismatch {
            expected: ref_seq.nrows(),
            actual: target_seq.nrows(),
        });
    }
    Ok(dtw_core(ref_seq.ncols(), target_seq.ncols(), |i, j| {
        (ref_seq.column(i) - target_seq.column(j)).norm()
    }))
}

/// DTW with squared Euclidean per-pair costs; the additive form of the EDTW
/// alignment term.
pub(crate) fn dtw_squared(
    ref_seq: &DMatrix<f64>,
    target_seq: &DMatrix<f64>,
) -> (WarpPath, f64) {
    dtw_core(ref_seq.ncols(), target_seq.ncols(), |i, j| {
        (ref_seq.column(i) - target_seq.column(j)).norm_squared()
    })
}

fn check_input(seq: &DMatrix<f64>) -> Result<(), WarpError> {
    if seq.ncols() == 0 || seq.nrows() == 0 {
        return Err(WarpError::EmptyInput);
    }
    if seq.iter().any(|v| !v.is_finite()) {
        return Err(WarpError::NonFiniteInput);
    }
    Ok(())
}

fn dtw_core<F: Fn(usize, usize) -> f64>(k_ref: usize, k_target: usize, cost: F) -> (WarpPath, f64) {
    let idx = |i: usize, j: usize| i * k_target + j;
    let mut acc = vec![0.0f64; k_ref * k_target];
    let mut moves = vec![MOVE_START; k_ref * k_target];

    for i in 0..k_ref {
        for j in 0..k_target {
            let c = cost(i, j);
            let (prev, mv) = if i == 0 && j == 0 {
                (0.0, MOVE_START)
            } else if i == 0 {
                (acc[idx(0, j - 1)], MOVE_TARGET)
            } else if j == 0 {
                (acc[idx(i - 1, 0)], MOVE_REF)
            } else {
                let mut best = acc[idx(i - 1, j - 1)];
                let mut mv = MOVE_DIAG;
                let ref_adv = acc[idx(i - 1, j)];
                if ref_adv < best {
                    best = ref_adv;
                    mv = MOVE_REF;
                }
                let target_adv = acc[idx(i, j - 1)];
                if target_adv < best {
                    best = target_adv;
                    mv = MOVE_TARGET;
                }
                (best, mv)
            };
            acc[idx(i, j)] = prev + c;
            moves[idx(i, j)] = mv;
        }
    }

    let mut pairs = Vec::with_capacity(k_ref + k_target);
    let (mut i, mut j) = (k_ref - 1, k_target - 1);
    loop {
        pairs.push((i, j));
        match moves[idx(i, j)] {
            MOVE_DIAG => {
                i -= 1;
                j -= 1;
            }
            MOVE_REF => i -= 1,
            MOVE_TARGET => j -= 1,
            _ => break,
        }
    }
    pairs.reverse();
    (
        WarpPath::from_backtrack(pairs),
        acc[idx(k_ref - 1, k_target - 1)],
    )
}
