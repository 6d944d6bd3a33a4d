//! Reference estimators: oracle-support least squares and single-stage OMP on
//! the vectorized measurements.

use std::time::Instant;

use crate::dictionary::DictionarySet;
use crate::error::{Error, Result};
use crate::estimators::{finish, EstimateResult, Method, PathComponent};
use crate::scenario::{true_composite_channel, ChannelInstance, MeasurementSet, ScenarioConfig};
use crate::tensor::{self, CMatrix};

/// `vec(a₃ (a₂ ⊗ a₁)ᵀ)`: entry `ℓ + K_ris·(n + m·N_tx)` is `a₃[ℓ]·a₁[n]·a₂[m]`.
fn write_atom(dst: &mut [num_complex::Complex64], a3: &[num_complex::Complex64], a1: &[num_complex::Complex64], a2: &[num_complex::Complex64]) {
    let k_ris = a3.len();
    let n_tx = a1.len();
    for (m, &v2) in a2.iter().enumerate() {
        for (n, &v1) in a1.iter().enumerate() {
            let w = v1 * v2;
            let off = k_ris * (n + m * n_tx);
            for (d, &v3) in dst[off..off + k_ris].iter_mut().zip(a3) {
                *d = v3 * w;
            }
        }
    }
}

/// Least squares for the `P²` gains with every true bin known.
pub fn oracle_ls(
    ms: &MeasurementSet,
    ch: &ChannelInstance,
    ds: &DictionarySet,
    cfg: &ScenarioConfig,
) -> Result<EstimateResult> {
    let paths = &ch.paths;
    if !paths.is_on_grid() {
        return Err(Error::invalid("oracle LS needs on-grid paths"));
    }
    let t0 = Instant::now();
    let p = paths.n_paths();
    let x = &ms.unfolded;
    let len = x.nrows() * x.ncols();
    let mut design = CMatrix::zeros(len, p * p);
    let mut comps = Vec::with_capacity(p * p);
    for pg in 0..p {
        for ph in 0..p {
            let c = comps.len();
            let k = ds.col_index(paths.ris_g_idx[pg], paths.ris_h_idx[ph])?;
            let (i, j) = (paths.tx_idx[pg], paths.rx_idx[ph]);
            write_atom(
                design.col_as_slice_mut(c),
                ds.a3_eff.col_as_slice(k),
                ds.a1_eff.col_as_slice(i),
                ds.a2_eff.col_as_slice(j),
            );
            comps.push(PathComponent {
                support_idx: k,
                p_tx_hat: i,
                p_rx_hat: j,
                gain: tensor::ZERO,
                residual_ratio: 0.0,
            });
        }
    }
    let dec = tensor::svd(&design)?;
    if dec.rank() < p * p {
        return Err(Error::NumericFailure(format!(
            "oracle design has rank {} < {}",
            dec.rank(),
            p * p
        )));
    }
    let y = tensor::vec(x);
    let gains = tensor::ls_solve(&design, &y)?;
    for (c, comp) in comps.iter_mut().enumerate() {
        comp.gain = gains[(c, 0)];
    }
    let stage1_time = t0.elapsed().as_secs_f64();
    let c_true = true_composite_channel(ch, cfg.k_bar);
    finish(Method::OracleLs, comps, ds, &c_true, stage1_time, Instant::now())
}

/// OMP on `vec(X₍₃₎ᵀ)` over the explicit dictionary of every
/// `(RIS pair, tx bin, rx bin)` atom, generated block by block each iteration.
///
/// Atom `(k, i, j)` has index `(k·N_grid + j)·N_grid + i`; ties go to the
/// lowest index.
pub fn vectorized_cs(
    ms: &MeasurementSet,
    ds: &DictionarySet,
    cfg: &ScenarioConfig,
    c_true: &CMatrix,
) -> Result<EstimateResult> {
    let ng = ds.n_grid();
    let atoms = (ng as u128).pow(4);
    if atoms > cfg.vcs_atom_budget as u128 {
        return Err(Error::ResourceLimit(format!(
            "vectorized CS needs {atoms} atoms, budget is {}",
            cfg.vcs_atom_budget
        )));
    }
    let s = cfg.sparsity();
    let x = &ms.unfolded;
    let len = x.nrows() * x.ncols();
    if s > len {
        return Err(Error::invalid(format!("sparsity {s} exceeds {len} measurements")));
    }
    let t0 = Instant::now();
    let y = tensor::vec(x);
    let mut resid = y.clone();
    let mut phi = CMatrix::zeros(len, 0);
    let mut picked: Vec<(usize, usize, usize)> = Vec::with_capacity(s);
    let mut gains = CMatrix::zeros(0, 1);
    let mut block = CMatrix::zeros(len, ng * ng);

    for _ in 0..s {
        let mut best = (f64::NEG_INFINITY, (0, 0, 0));
        for &k in ds.candidates() {
            let a3 = ds.a3_eff.col_as_slice(k);
            for j in 0..ng {
                for i in 0..ng {
                    write_atom(
                        block.col_as_slice_mut(j * ng + i),
                        a3,
                        ds.a1_eff.col_as_slice(i),
                        ds.a2_eff.col_as_slice(j),
                    );
                }
            }
            let corr = block.adjoint() * &resid;
            for c in 0..ng * ng {
                let energy = tensor::norm_sq(block.col_as_slice(c));
                if energy == 0.0 {
                    continue;
                }
                let atom = (k, c % ng, c / ng);
                let score = corr[(c, 0)].norm_sqr() / energy;
                if score > best.0 && !picked.contains(&atom) {
                    best = (score, atom);
                }
            }
        }
        let (k, i, j) = best.1;
        picked.push(best.1);
        let mut grown = CMatrix::zeros(len, picked.len());
        grown.as_mut().subcols_mut(0, picked.len() - 1).copy_from(&phi);
        write_atom(
            grown.col_as_slice_mut(picked.len() - 1),
            ds.a3_eff.col_as_slice(k),
            ds.a1_eff.col_as_slice(i),
            ds.a2_eff.col_as_slice(j),
        );
        phi = grown;
        gains = tensor::ls_solve(&phi, &y)?;
        resid = &y - &phi * &gains;
    }
    let stage1_time = t0.elapsed().as_secs_f64();
    let comps = picked
        .iter()
        .enumerate()
        .map(|(c, &(k, i, j))| PathComponent {
            support_idx: k,
            p_tx_hat: i,
            p_rx_hat: j,
            gain: gains[(c, 0)],
            residual_ratio: 0.0,
        })
        .collect();
    finish(Method::VectorizedCs, comps, ds, c_true, stage1_time, Instant::now())
}
