use nalgebra::{DMatrix, SymmetricEigen};
use sohtwin::dataset::{generate_synthetic, SyntheticConfig};
use sohtwin::warp::dtw_align;

fn center_rows(seq: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = seq.clone();
    for mut row in out.row_iter_mut() { let m = row.mean(); row.add_scalar_mut(-m); }
    out
}
fn inv_sqrt(c: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(c.clone());
    let s = DMatrix::from_fn(c.nrows(), c.ncols(), |r, k| e.eigenvectors[(r, k)] / e.eigenvalues[k].sqrt());
    s * e.eigenvectors.transpose()
}
fn reg(c: DMatrix<f64>) -> DMatrix<f64> { let t = c.trace(); let n = c.nrows(); c + DMatrix::identity(n, n) * (1e-6 * t) }

// One CCA step returning (v_r, v_t, sigmas)
fn cca(yr: &DMatrix<f64>, yt: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let cyr = center_rows(yr); let cyt = center_rows(yt);
    let wr = inv_sqrt(&reg(&cyr * cyr.transpose()));
    let wt = inv_sqrt(&reg(&cyt * cyt.transpose()));
    let t = &wr * (&cyr * cyt.transpose()) * &wt;
    let svd = t.clone().svd(true, true);
    let u = svd.u.unwrap(); let vt = svd.v_t.unwrap();
    (wr * u, wt * vt.transpose(), svd.singular_values.iter().cloned().collect())
}

fn align_of(x_r: &DMatrix<f64>, x_t: &DMatrix<f64>, path: &[(usize, usize)], vr: &DMatrix<f64>, vt: &DMatrix<f64>) -> f64 {
    let g = |x: &DMatrix<f64>, pick: usize| {
        let mut out = DMatrix::zeros(x.nrows(), path.len());
        for (d, p) in path.iter().enumerate() { out.set_column(d, &x.column(if pick == 0 { p.0 } else { p.1 })); }
        out
    };
    (vr.transpose() * center_rows(&g(x_r, 0)) - vt.transpose() * center_rows(&g(x_t, 1))).norm_squared()
}

fn main() {
    let record = generate_synthetic(
        &SyntheticConfig { cycles: 40, base_length: 120, ..SyntheticConfig::default() }, 17,
    ).unwrap();
    for (a, b) in [(39usize, 3usize), (33, 11), (1, 34), (37, 23)] {
        let x_r = record.cycles()[a].samples();
        let x_t = record.cycles()[b].samples();
        let (p1, _) = dtw_align(x_r, x_t).unwrap();
        let (v1r, v1t, s1) = {
            let g = |x: &DMatrix<f64>, pick: usize| {
                let mut out = DMatrix::zeros(x.nrows(), p1.pairs().len());
                for (d, p) in p1.pairs().iter().enumerate() { out.set_column(d, &x.column(if pick == 0 { p.0 } else { p.1 })); }
                out
            };
            cca(&g(x_r, 0), &g(x_t, 1))
        };
        let a1 = align_of(x_r, x_t, p1.pairs(), &v1r, &v1t);

        // plain whitened projections for the next DTW
        let (p2, _) = dtw_align(&(v1r.transpose() * x_r), &(v1t.transpose() * x_t)).unwrap();
        // sigma-weighted projections
        let sw = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(s1.clone()));
        let (p2w, _) = dtw_align(&(&sw * v1r.transpose() * x_r), &(&sw * v1t.transpose() * x_t)).unwrap();

        let cca_align = |path: &[(usize, usize)]| {
            let g = |x: &DMatrix<f64>, pick: usize| {
                let mut out = DMatrix::zeros(x.nrows(), path.len());
                for (d, p) in path.iter().enumerate() { out.set_column(d, &x.column(if pick == 0 { p.0 } else { p.1 })); }
                out
            };
            let (vr, vt, _) = cca(&g(x_r, 0), &g(x_t, 1));
            align_of(x_r, x_t, path, &vr, &vt)
        };
        println!("pair ({a},{b}): sigma={s1:?}");
        println!("  align1={a1:.6}  align2_plain={:.6} (path eq p1: {})  align2_weighted={:.6} (path eq p1: {})",
            cca_align(p2.pairs()), p2.pairs() == p1.pairs(), cca_align(p2w.pairs()), p2w.pairs() == p1.pairs());
    }
}
