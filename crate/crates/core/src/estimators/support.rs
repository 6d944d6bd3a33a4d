//! Stage 1 support recovery.

use crate::dictionary::DictionarySet;
use crate::error::{Error, Result};
use crate::estimators::SupportEstimate;
use crate::tensor::{self, CMatrix};

fn check_shapes(x3t: &CMatrix, ds: &DictionarySet) -> Result<()> {
    let want = ds.a1_eff.nrows() * ds.a2_eff.nrows();
    if x3t.nrows() != ds.a3_eff.nrows() || x3t.ncols() != want {
        return Err(Error::invalid(format!(
            "measurements are {}x{}, expected {}x{}",
            x3t.nrows(),
            x3t.ncols(),
            ds.a3_eff.nrows(),
            want
        )));
    }
    Ok(())
}

fn fit(x3t: &CMatrix, ds: &DictionarySet, support: Vec<usize>, spectrum: Option<Vec<f64>>) -> Result<SupportEstimate> {
    let a_s = tensor::select_cols(&ds.a3_eff, &support);
    let theta = tensor::ls_solve(&a_s, x3t)?;
    Ok(SupportEstimate {
        support,
        theta,
        spectrum,
    })
}

/// Greedy OMP over the candidate columns of `Ā₃`.
///
/// The residual correlation is updated as `Ā₃ᴴR = Ā₃ᴴX − (Ā₃ᴴĀ₃,𝒮)θ`, so the
/// dictionary is only swept once. Scores are normalized by the column energy
/// and exact ties go to the lowest column index.
pub fn storm_support(x3t: &CMatrix, ds: &DictionarySet, s: usize) -> Result<SupportEstimate> {
    check_shapes(x3t, ds)?;
    let k_ris = x3t.nrows();
    if s > k_ris {
        return Err(Error::invalid(format!(
            "sparsity {s} exceeds the {k_ris} available frames"
        )));
    }
    let cand = ds.candidates();
    if s > cand.len() {
        return Err(Error::invalid(format!(
            "sparsity {s} exceeds the {} dictionary columns",
            cand.len()
        )));
    }
    let a_c = tensor::select_cols(&ds.a3_eff, cand);
    let norms: Vec<f64> = cand.iter().map(|&k| ds.a3_norm(k)).collect();
    let c0 = a_c.adjoint() * x3t;
    let mut gram = CMatrix::zeros(cand.len(), 0);
    let mut picked: Vec<usize> = Vec::with_capacity(s);
    let mut chosen = vec![false; cand.len()];
    let mut theta = CMatrix::zeros(0, x3t.ncols());

    for _ in 0..s {
        let corr = if picked.is_empty() {
            c0.clone()
        } else {
            &c0 - &gram * &theta
        };
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for i in 0..cand.len() {
            if chosen[i] {
                continue;
            }
            let score = if norms[i] > 0.0 {
                let mut e = 0.0;
                for j in 0..corr.ncols() {
                    e += corr[(i, j)].norm_sqr();
                }
                e / (norms[i] * norms[i])
            } else {
                0.0
            };
            if score > best.0 {
                best = (score, i);
            }
        }
        let i = best.1;
        chosen[i] = true;
        picked.push(i);
        let new_col = a_c.adjoint() * a_c.as_ref().subcols(i, 1);
        let mut grown = CMatrix::zeros(cand.len(), picked.len());
        grown.as_mut().subcols_mut(0, picked.len() - 1).copy_from(&gram);
        grown.as_mut().subcols_mut(picked.len() - 1, 1).copy_from(&new_col);
        gram = grown;
        let support: Vec<usize> = picked.iter().map(|&i| cand[i]).collect();
        theta = tensor::ls_solve(&tensor::select_cols(&ds.a3_eff, &support), x3t)?;
    }
    Ok(SupportEstimate {
        support: picked.iter().map(|&i| cand[i]).collect(),
        theta,
        spectrum: None,
    })
}

/// MUSIC-like support search: the `s` candidate columns of `Ā₃` with the
/// smallest normalized energy outside the dominant `s`-dimensional left
/// singular subspace of `X₍₃₎ᵀ`.
pub fn star_support(x3t: &CMatrix, ds: &DictionarySet, s: usize) -> Result<SupportEstimate> {
    check_shapes(x3t, ds)?;
    let k_ris = x3t.nrows();
    if s >= k_ris {
        return Err(Error::invalid(format!(
            "sparsity {s} leaves no noise subspace among {k_ris} frames"
        )));
    }
    let cand = ds.candidates();
    if s > cand.len() {
        return Err(Error::invalid(format!(
            "sparsity {s} exceeds the {} dictionary columns",
            cand.len()
        )));
    }
    let dec = tensor::svd(x3t)?;
    let r = s.min(dec.u.ncols());
    let proj = dec.u.as_ref().subcols(0, r).adjoint() * &ds.a3_eff;
    // ‖P_null a‖² = ‖a‖² − ‖U_sᴴa‖², normalized by ‖a‖².
    let spectrum: Vec<f64> = (0..ds.a3_eff.ncols())
        .map(|k| {
            let total = ds.a3_norm(k).powi(2);
            if total == 0.0 {
                return f64::INFINITY;
            }
            let signal: f64 = (0..r).map(|i| proj[(i, k)].norm_sqr()).sum();
            ((total - signal) / total).max(0.0)
        })
        .collect();
    let mut order: Vec<usize> = cand.to_vec();
    order.sort_by(|&a, &b| spectrum[a].total_cmp(&spectrum[b]));
    order.truncate(s);
    fit(x3t, ds, order, Some(spectrum))
}
