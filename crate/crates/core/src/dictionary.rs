//! Fourier dictionaries and their training-projected counterparts.
//!
//! `F₃` has one column per RIS angle pair `(i_G, i_H)`, at index
//! `i_G·N_grid + i_H`. Restricted to group `q`, that column is
//! `conj(v_{G,q}(i_G)) ⊗ conj(v_{H,q}(i_H))`, where `v_{·,q}` is the `q`-th
//! `K̄`-long slice of the RIS steering vector. The effective dictionaries are
//! `Ā₁ = W_txᵀF₁`, `Ā₂ = W_rxᵀF₂` and `Ā₃ = W_risᵀF₃`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scenario::{steering_vector_at, ScenarioConfig, TrainingDesign};
use crate::tensor::{self, CMatrix};

/// Stacked per-group `conj(v_g,q) ⊗ conj(v_h,q)` for two RIS steering vectors.
pub fn ris_pair_column(v_g: &[Complex64], v_h: &[Complex64], k_bar: usize) -> Vec<Complex64> {
    assert_eq!(v_g.len(), v_h.len());
    assert!(k_bar > 0 && v_g.len().is_multiple_of(k_bar));
    let mut out = Vec::with_capacity(v_g.len() * k_bar);
    for (g_blk, h_blk) in v_g.chunks_exact(k_bar).zip(v_h.chunks_exact(k_bar)) {
        for g in g_blk {
            let g = g.conj();
            out.extend(h_blk.iter().map(|h| g * h.conj()));
        }
    }
    out
}

fn steering_grid(n_elems: usize, n_grid: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n_elems, n_grid);
    for i in 0..n_grid {
        m.col_as_slice_mut(i)
            .copy_from_slice(&steering_vector_at(n_elems, i as f64, n_grid));
    }
    m
}

/// Configuration-only Fourier dictionaries, shareable across trials.
#[derive(Debug, Clone)]
pub struct FourierDictionaries {
    /// `N × N_grid`.
    pub f1: CMatrix,
    /// `M × N_grid`.
    pub f2: CMatrix,
    /// `Q·K̄² × N_grid²`.
    pub f3: CMatrix,
    pub n_grid: usize,
    pub k_bar: usize,
}

impl FourierDictionaries {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        if cfg.k_bar == 0 || cfg.k_bar * cfg.q_groups != cfg.k_ris_elems {
            return Err(Error::invalid("RIS size must equal k_bar * q_groups"));
        }
        let ng = cfg.n_grid;
        let ris = steering_grid(cfg.k_ris_elems, ng);
        let mut f3 = CMatrix::zeros(cfg.ris_rows(), ng * ng);
        for ig in 0..ng {
            for ih in 0..ng {
                let col = ris_pair_column(ris.col_as_slice(ig), ris.col_as_slice(ih), cfg.k_bar);
                f3.col_as_slice_mut(ig * ng + ih).copy_from_slice(&col);
            }
        }
        Ok(Self {
            f1: steering_grid(cfg.n_bs, ng),
            f2: steering_grid(cfg.m_ue, ng),
            f3,
            n_grid: ng,
            k_bar: cfg.k_bar,
        })
    }
}

/// Fourier dictionaries plus their effective versions for one training design.
#[derive(Debug, Clone)]
pub struct DictionarySet {
    base: Arc<FourierDictionaries>,
    /// `N_tx × N_grid`.
    pub a1_eff: CMatrix,
    /// `M_rx × N_grid`.
    pub a2_eff: CMatrix,
    /// `K_ris × N_grid²`.
    pub a3_eff: CMatrix,
    a1_norms: Vec<f64>,
    a2_norms: Vec<f64>,
    a3_norms: Vec<f64>,
    reciprocal: bool,
    candidates: Vec<usize>,
}

fn col_norms(m: &CMatrix) -> Vec<f64> {
    (0..m.ncols())
        .map(|j| tensor::norm_sq(m.col_as_slice(j)).sqrt())
        .collect()
}

impl DictionarySet {
    pub fn f1(&self) -> &CMatrix {
        &self.base.f1
    }

    pub fn f2(&self) -> &CMatrix {
        &self.base.f2
    }

    pub fn f3(&self) -> &CMatrix {
        &self.base.f3
    }

    pub fn base(&self) -> &Arc<FourierDictionaries> {
        &self.base
    }

    pub fn n_grid(&self) -> usize {
        self.base.n_grid
    }

    pub fn n_pairs(&self) -> usize {
        self.base.n_grid * self.base.n_grid
    }

    /// `F₃` column index → `(i_G, i_H)`.
    pub fn col_map(&self, k: usize) -> (usize, usize) {
        (k / self.base.n_grid, k % self.base.n_grid)
    }

    /// `(i_G, i_H)` → `F₃` column index.
    pub fn col_index(&self, i_g: usize, i_h: usize) -> Result<usize> {
        let ng = self.base.n_grid;
        if i_g >= ng || i_h >= ng {
            return Err(Error::invalid(format!(
                "angle pair ({i_g}, {i_h}) outside grid of {ng}"
            )));
        }
        Ok(i_g * ng + i_h)
    }

    /// Whether the training was reciprocal, making `(i_G, i_H)` and
    /// `(i_H, i_G)` project onto the same `Ā₃` column.
    pub fn is_reciprocal(&self) -> bool {
        self.reciprocal
    }

    /// `F₃` columns searched by support recovery: all of them, or only
    /// `i_G ≤ i_H` under reciprocal training.
    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    /// Representative of `k` among [`Self::candidates`].
    pub fn canonical(&self, k: usize) -> usize {
        let (ig, ih) = self.col_map(k);
        if self.reciprocal && ig > ih {
            ih * self.base.n_grid + ig
        } else {
            k
        }
    }

    pub fn a1_norm(&self, i: usize) -> f64 {
        self.a1_norms[i]
    }

    pub fn a2_norm(&self, j: usize) -> f64 {
        self.a2_norms[j]
    }

    pub fn a3_norm(&self, k: usize) -> f64 {
        self.a3_norms[k]
    }

    pub fn a3_norms(&self) -> &[f64] {
        &self.a3_norms
    }

    /// Largest normalized inner product between distinct candidate `Ā₃` columns.
    pub fn a3_coherence(&self) -> f64 {
        let a = tensor::select_cols(&self.a3_eff, &self.candidates);
        let norms: Vec<f64> = self.candidates.iter().map(|&k| self.a3_norms[k]).collect();
        let gram = a.adjoint() * &a;
        let mut worst: f64 = 0.0;
        for j in 0..gram.ncols() {
            for i in 0..j {
                let den = norms[i] * norms[j];
                if den > 0.0 {
                    worst = worst.max(gram[(i, j)].norm() / den);
                }
            }
        }
        worst
    }
}

pub fn build_dictionaries(cfg: &ScenarioConfig, tr: &TrainingDesign) -> Result<DictionarySet> {
    build_dictionaries_with(Arc::new(FourierDictionaries::new(cfg)?), tr)
}

/// Projects shared Fourier dictionaries through a training design.
pub fn build_dictionaries_with(
    base: Arc<FourierDictionaries>,
    tr: &TrainingDesign,
) -> Result<DictionarySet> {
    let shape_err = |what: &str, a: usize, b: usize| {
        Err(Error::invalid(format!(
            "{what}: training has {a} rows but dictionary has {b}"
        )))
    };
    if tr.w_tx.nrows() != base.f1.nrows() {
        return shape_err("W_tx", tr.w_tx.nrows(), base.f1.nrows());
    }
    if tr.w_rx.nrows() != base.f2.nrows() {
        return shape_err("W_rx", tr.w_rx.nrows(), base.f2.nrows());
    }
    if tr.w_ris.nrows() != base.f3.nrows() {
        return shape_err("W_ris", tr.w_ris.nrows(), base.f3.nrows());
    }
    let a1_eff = tr.w_tx.transpose() * &base.f1;
    let a2_eff = tr.w_rx.transpose() * &base.f2;
    let a3_eff = tr.w_ris.transpose() * &base.f3;
    let reciprocal = tr.is_reciprocal();
    let ng = base.n_grid;
    let candidates = (0..ng * ng)
        .filter(|k| !reciprocal || k / ng <= k % ng)
        .collect();
    Ok(DictionarySet {
        reciprocal,
        candidates,
        a1_norms: col_norms(&a1_eff),
        a2_norms: col_norms(&a2_eff),
        a3_norms: col_norms(&a3_eff),
        a1_eff,
        a2_eff,
        a3_eff,
        base,
    })
}

/// Column of `F₃` for the RIS angle pair `(i_g, i_h)`.
pub fn column_for_pair(ds: &DictionarySet, i_g: usize, i_h: usize) -> Result<&[Complex64]> {
    let k = ds.col_index(i_g, i_h)?;
    Ok(ds.f3().col_as_slice(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_channels, gen_paths, gen_training, tucker_factors, FrameCount};
    use crate::tensor::testutil::{rel_err, rng};

    fn small_cfg() -> ScenarioConfig {
        ScenarioConfig {
            n_bs: 6,
            m_ue: 5,
            k_ris_elems: 8,
            k_bar: 2,
            q_groups: 4,
            n_tx: 4,
            m_rx: 3,
            frames: FrameCount::Frames(10),
            p_paths: 2,
            n_grid: 8,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn identity_beams_leave_f1_unchanged() {
        let cfg = ScenarioConfig {
            n_tx: 6,
            ..small_cfg()
        };
        let mut tr = gen_training(&cfg, &mut rng(1)).unwrap();
        tr.w_tx = CMatrix::identity(6, 6);
        let ds = build_dictionaries(&cfg, &tr).unwrap();
        assert_eq!(ds.a1_eff, *ds.f1());
        assert_eq!((ds.a2_eff.nrows(), ds.a2_eff.ncols()), (3, 8));
        assert_eq!((ds.a3_eff.nrows(), ds.a3_eff.ncols()), (10, 64));
    }

    #[test]
    fn degenerate_group_reduces_to_conjugate_products() {
        let cfg = ScenarioConfig {
            k_ris_elems: 1,
            k_bar: 1,
            q_groups: 1,
            n_grid: 5,
            frames: FrameCount::Frames(1),
            p_paths: 1,
            ..small_cfg()
        };
        let fd = FourierDictionaries::new(&cfg).unwrap();
        assert_eq!((fd.f3.nrows(), fd.f3.ncols()), (1, 25));
        // A one-element RIS steers to exp(0) = 1 for every bin.
        for k in 0..25 {
            assert!((fd.f3[(0, k)] - tensor::ONE).norm() < 1e-15);
        }
        let cfg = ScenarioConfig {
            k_ris_elems: 2,
            q_groups: 2,
            ..cfg
        };
        let fd = FourierDictionaries::new(&cfg).unwrap();
        let v = |i: usize| steering_vector_at(2, i as f64, 5);
        for ig in 0..5 {
            for ih in 0..5 {
                for q in 0..2 {
                    let want = v(ig)[q].conj() * v(ih)[q].conj();
                    assert!((fd.f3[(q, ig * 5 + ih)] - want).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn col_map_round_trip() {
        let cfg = small_cfg();
        let tr = gen_training(&cfg, &mut rng(2)).unwrap();
        let ds = build_dictionaries(&cfg, &tr).unwrap();
        for k in 0..ds.n_pairs() {
            let (ig, ih) = ds.col_map(k);
            assert_eq!(ds.col_index(ig, ih).unwrap(), k);
        }
        assert!(column_for_pair(&ds, 8, 0).is_err());
        assert!(column_for_pair(&ds, 0, 8).is_err());
        let zero = column_for_pair(&ds, 0, 0).unwrap();
        assert!(zero.iter().all(|z| (*z - tensor::ONE).norm() < 1e-15));
    }

    #[test]
    fn column_for_pair_matches_direct_construction() {
        let cfg = small_cfg();
        let tr = gen_training(&cfg, &mut rng(3)).unwrap();
        let ds = build_dictionaries(&cfg, &tr).unwrap();
        let (ig, ih) = (5, 2);
        let col = column_for_pair(&ds, ig, ih).unwrap();
        let (kb, ng) = (cfg.k_bar, cfg.n_grid as f64);
        // Oracle: explicit per-group loop over (q, b, a).
        for q in 0..cfg.q_groups {
            for b in 0..kb {
                for a in 0..kb {
                    let eg = (q * kb + b) as f64;
                    let eh = (q * kb + a) as f64;
                    let phase = -2.0 * std::f64::consts::PI * (eg * ig as f64 + eh * ih as f64) / ng;
                    let want = Complex64::from_polar(1.0, phase);
                    assert!((col[q * kb * kb + b * kb + a] - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn true_ris_factor_is_contained_in_dictionary() {
        for seed in 0..5 {
            let cfg = small_cfg();
            let mut r = rng(100 + seed);
            let paths = gen_paths(&cfg, &mut r).unwrap();
            let ch = build_channels(&paths, &cfg).unwrap();
            let tr = gen_training(&cfg, &mut r).unwrap();
            let ds = build_dictionaries(&cfg, &tr).unwrap();
            let tf = tucker_factors(&ch, &tr, cfg.k_bar);
            let p = cfg.p_paths;
            for ph in 0..p {
                for pg in 0..p {
                    let k = ds
                        .col_index(paths.ris_g_idx[pg], paths.ris_h_idx[ph])
                        .unwrap();
                    let got = tensor::select_cols(&ds.a3_eff, &[k]);
                    let want = tensor::select_cols(&tf.a3, &[ph * p + pg]);
                    assert!(rel_err(&got, &want) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn rejects_mismatched_training() {
        let cfg = small_cfg();
        let tr = gen_training(&cfg, &mut rng(4)).unwrap();
        let other = ScenarioConfig {
            n_bs: 7,
            ..small_cfg()
        };
        assert!(matches!(
            build_dictionaries(&other, &tr),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn coherence_below_one_under_random_training() {
        let cfg = small_cfg();
        let tr = gen_training(&cfg, &mut rng(5)).unwrap();
        let ds = build_dictionaries(&cfg, &tr).unwrap();
        let mu = ds.a3_coherence();
        assert!(mu < 1.0, "coherence {mu}");
    }

    #[test]
    fn reciprocal_training_merges_swapped_pairs() {
        let cfg = small_cfg();
        let tr = gen_training(&cfg, &mut rng(6)).unwrap();
        let ds = build_dictionaries(&cfg, &tr).unwrap();
        assert!(ds.is_reciprocal());
        assert_eq!(ds.candidates().len(), 8 * 9 / 2);
        for ig in 0..8 {
            for ih in 0..8 {
                let k = ds.col_index(ig, ih).unwrap();
                let t = ds.col_index(ih, ig).unwrap();
                let a = tensor::select_cols(&ds.a3_eff, &[k]);
                let b = tensor::select_cols(&ds.a3_eff, &[t]);
                assert!(rel_err(&a, &b) < 1e-12);
                assert_eq!(ds.canonical(k), ds.canonical(t));
                assert!(ds.candidates().contains(&ds.canonical(k)));
            }
        }

        let free = ScenarioConfig {
            ris_constraint: crate::scenario::RisConstraint::Unconstrained,
            ..cfg
        };
        let tr = gen_training(&free, &mut rng(6)).unwrap();
        let ds = build_dictionaries(&free, &tr).unwrap();
        assert!(!ds.is_reciprocal());
        assert_eq!(ds.candidates().len(), 64);
        assert_eq!(ds.canonical(ds.col_index(5, 1).unwrap()), 41);
        assert!(ds.a3_coherence() < 1.0);
    }
}
