//! Two-stage sparse Tucker estimators and the reference baselines.
//!
//! Stage 1 ([`storm_support`], [`star_support`]) picks `S` columns of `Ā₃`
//! and fits `θ = Ā₃,𝒮† X₍₃₎ᵀ`. Stage 2 ([`stage2_factorize`]) reshapes each row
//! of `θ` into an `N_tx × M_rx` matrix, reads the tx/rx bins off its rank-one
//! structure, and [`reconstruct`] assembles the composite channel estimate.

mod baselines;
mod support;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dictionary::DictionarySet;
use crate::error::{Error, Result};
use crate::scenario::{reciprocal_part, MeasurementSet, ScenarioConfig};
use crate::tensor::{self, CMatrix, ZERO};

pub use baselines::{oracle_ls, vectorized_cs};
pub use support::{star_support, storm_support};

/// Estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Storm,
    Star,
    OracleLs,
    VectorizedCs,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Storm,
        Method::Star,
        Method::OracleLs,
        Method::VectorizedCs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Storm => "storm",
            Method::Star => "star",
            Method::OracleLs => "oracle_ls",
            Method::VectorizedCs => "vectorized_cs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "storm" => Ok(Method::Storm),
            "star" => Ok(Method::Star),
            "oracle_ls" | "oracle" | "lso" => Ok(Method::OracleLs),
            "vectorized_cs" | "vcs" => Ok(Method::VectorizedCs),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// Stage 1 output: selected `F₃` columns and their LS coefficients.
#[derive(Debug, Clone)]
pub struct SupportEstimate {
    pub support: Vec<usize>,
    /// `S × N_tx·M_rx`.
    pub theta: CMatrix,
    /// Normalized MUSIC spectrum over all `F₃` columns (STAR only).
    pub spectrum: Option<Vec<f64>>,
}

/// One recovered Kronecker rank-one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub support_idx: usize,
    pub p_tx_hat: usize,
    pub p_rx_hat: usize,
    pub gain: Complex64,
    /// `σ₂/σ₁` of the reshaped coefficient matrix; 0 when not applicable.
    pub residual_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub method: Method,
    pub components: Vec<PathComponent>,
    /// `Q·K̄² × N·M`.
    pub c_hat: CMatrix,
    /// Error on the identifiable part of the composite channel.
    pub nmse: f64,
    /// Error on the full composite channel; equals `nmse` unless the training
    /// is reciprocal.
    pub nmse_full: f64,
    pub stage1_time: f64,
    pub stage2_time: f64,
}

impl EstimateResult {
    pub fn support(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.support_idx).collect()
    }
}

/// `‖ĉ − c‖²_F / ‖c‖²_F`.
pub fn nmse(c_hat: &CMatrix, c_true: &CMatrix) -> Result<f64> {
    if c_hat.nrows() != c_true.nrows() || c_hat.ncols() != c_true.ncols() {
        return Err(Error::invalid("nmse: dimension mismatch"));
    }
    let den = tensor::frobenius_sq(c_true);
    if den == 0.0 {
        return Err(Error::invalid("nmse: true channel is zero"));
    }
    Ok(tensor::frobenius_sq(&(c_hat - c_true)) / den)
}

/// NMSE on the part of the composite channel the training can observe: the
/// symmetric group blocks under reciprocal training, everything otherwise.
pub fn identifiable_nmse(c_hat: &CMatrix, c_true: &CMatrix, ds: &DictionarySet) -> Result<f64> {
    if ds.is_reciprocal() {
        let k = ds.base().k_bar;
        nmse(&reciprocal_part(c_hat, k), &reciprocal_part(c_true, k))
    } else {
        nmse(c_hat, c_true)
    }
}

/// Whether an estimated support equals the true angle pairs, up to the
/// swap ambiguity of reciprocal training.
pub fn support_matches(ds: &DictionarySet, support: &[usize], truth: &[(usize, usize)]) -> bool {
    let canon = |ks: &mut dyn Iterator<Item = usize>| {
        let mut v: Vec<usize> = ks.map(|k| ds.canonical(k)).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let Ok(true_cols) = truth
        .iter()
        .map(|&(ig, ih)| ds.col_index(ig, ih))
        .collect::<Result<Vec<_>>>()
    else {
        return false;
    };
    canon(&mut support.iter().copied()) == canon(&mut true_cols.into_iter())
}

/// Reshapes row `s` of `θ` into `M_s[n, m] = θ[s, n + m·N_tx]`.
pub fn reshape_theta_row(theta: &CMatrix, s: usize, n_tx: usize, m_rx: usize) -> CMatrix {
    CMatrix::from_fn(n_tx, m_rx, |n, m| theta[(s, n + m * n_tx)])
}

fn null_argmin(dict: &CMatrix, norms: &[f64], null: &CMatrix) -> usize {
    let proj = dict.adjoint() * null;
    let mut best = (f64::INFINITY, 0);
    for i in 0..dict.ncols() {
        if norms[i] == 0.0 {
            continue;
        }
        let mut e = 0.0;
        for j in 0..proj.ncols() {
            e += proj[(i, j)].norm_sqr();
        }
        let score = e / (norms[i] * norms[i]);
        if score < best.0 {
            best = (score, i);
        }
    }
    best.1
}

/// Rank-one factorization of one reshaped coefficient matrix.
pub fn factorize_component(m_s: &CMatrix, ds: &DictionarySet) -> Result<(usize, usize, Complex64, f64)> {
    let (n_tx, m_rx) = (m_s.nrows(), m_s.ncols());
    if n_tx < 2 || m_rx < 2 {
        return Err(Error::invalid(format!(
            "stage 2 needs at least two tx and rx beams, got {n_tx}x{m_rx}"
        )));
    }
    if ds.a1_eff.nrows() != n_tx || ds.a2_eff.nrows() != m_rx {
        return Err(Error::invalid("coefficient matrix does not match the dictionaries"));
    }
    let dec = tensor::svd_full(m_s)?;
    let tx_null = dec.u.as_ref().subcols(1, n_tx - 1).to_owned();
    // M_s ≈ d·ā₁ā₂ᵀ = σ u vᴴ puts ā₂ along conj(v); its complement is spanned by
    // the conjugated trailing right singular vectors.
    let rx_null = CMatrix::from_fn(m_rx, m_rx - 1, |i, j| dec.v[(i, j + 1)].conj());
    let a1_norms: Vec<f64> = (0..ds.a1_eff.ncols()).map(|i| ds.a1_norm(i)).collect();
    let a2_norms: Vec<f64> = (0..ds.a2_eff.ncols()).map(|j| ds.a2_norm(j)).collect();
    let p_tx = null_argmin(&ds.a1_eff, &a1_norms, &tx_null);
    let p_rx = null_argmin(&ds.a2_eff, &a2_norms, &rx_null);

    let a1 = ds.a1_eff.col_as_slice(p_tx);
    let a2 = ds.a2_eff.col_as_slice(p_rx);
    let mut acc = ZERO;
    for m in 0..m_rx {
        let a2c = a2[m].conj();
        for n in 0..n_tx {
            acc += a1[n].conj() * m_s[(n, m)] * a2c;
        }
    }
    let den = a1_norms[p_tx].powi(2) * a2_norms[p_rx].powi(2);
    let gain = if den > 0.0 { acc / den } else { ZERO };
    let ratio = match dec.s.as_slice() {
        [s0, s1, ..] if *s0 > 0.0 => s1 / s0,
        _ => 0.0,
    };
    Ok((p_tx, p_rx, gain, ratio))
}

/// Stage 2: factorizes every support row of `θ`.
pub fn stage2_factorize(
    se: &SupportEstimate,
    ds: &DictionarySet,
    cfg: &ScenarioConfig,
) -> Result<Vec<PathComponent>> {
    let (n_tx, m_rx) = (cfg.n_tx, cfg.m_rx);
    if se.theta.nrows() != se.support.len() || se.theta.ncols() != n_tx * m_rx {
        return Err(Error::invalid(format!(
            "theta is {}x{}, expected {}x{}",
            se.theta.nrows(),
            se.theta.ncols(),
            se.support.len(),
            n_tx * m_rx
        )));
    }
    se.support
        .iter()
        .enumerate()
        .map(|(s, &k)| {
            let m_s = reshape_theta_row(&se.theta, s, n_tx, m_rx);
            let (p_tx_hat, p_rx_hat, gain, residual_ratio) = factorize_component(&m_s, ds)?;
            Ok(PathComponent {
                support_idx: k,
                p_tx_hat,
                p_rx_hat,
                gain,
                residual_ratio,
            })
        })
        .collect()
}

/// `Ĉ = F₃,𝒮 diag(d̂) (F₂,𝒮 ⊙ F₁,𝒮)ᵀ`, with the column index `n + m·N`
/// used by the true composite channel.
pub fn reconstruct(components: &[PathComponent], ds: &DictionarySet) -> CMatrix {
    let (f1, f2, f3) = (ds.f1(), ds.f2(), ds.f3());
    let (n, m) = (f1.nrows(), f2.nrows());
    let s = components.len();
    if s == 0 {
        return CMatrix::zeros(f3.nrows(), n * m);
    }
    let mut left = CMatrix::zeros(f3.nrows(), s);
    let mut right = CMatrix::zeros(n * m, s);
    for (c, comp) in components.iter().enumerate() {
        for (dst, v) in left
            .col_as_slice_mut(c)
            .iter_mut()
            .zip(f3.col_as_slice(comp.support_idx))
        {
            *dst = v * comp.gain;
        }
        let (u1, u2) = (f1.col_as_slice(comp.p_tx_hat), f2.col_as_slice(comp.p_rx_hat));
        let col = right.col_as_slice_mut(c);
        for mi in 0..m {
            for ni in 0..n {
                col[ni + mi * n] = u1[ni] * u2[mi];
            }
        }
    }
    &left * right.transpose()
}

fn finish(
    method: Method,
    components: Vec<PathComponent>,
    ds: &DictionarySet,
    c_true: &CMatrix,
    stage1_time: f64,
    stage2_start: Instant,
) -> Result<EstimateResult> {
    let c_hat = reconstruct(&components, ds);
    let stage2_time = stage2_start.elapsed().as_secs_f64();
    Ok(EstimateResult {
        method,
        nmse: identifiable_nmse(&c_hat, c_true, ds)?,
        nmse_full: nmse(&c_hat, c_true)?,
        components,
        c_hat,
        stage1_time,
        stage2_time,
    })
}

fn two_stage(
    method: Method,
    ms: &MeasurementSet,
    ds: &DictionarySet,
    cfg: &ScenarioConfig,
    c_true: &CMatrix,
    stage1: fn(&CMatrix, &DictionarySet, usize) -> Result<SupportEstimate>,
) -> Result<EstimateResult> {
    let t0 = Instant::now();
    let se = stage1(&ms.unfolded, ds, cfg.sparsity())?;
    let stage1_time = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let components = stage2_factorize(&se, ds, cfg)?;
    finish(method, components, ds, c_true, stage1_time, t1)
}

/// Full STORM pipeline: OMP support, Stage 2, reconstruction.
pub fn storm(
    ms: &MeasurementSet,
    ds: &DictionarySet,
    cfg: &ScenarioConfig,
    c_true: &CMatrix,
) -> Result<EstimateResult> {
    two_stage(Method::Storm, ms, ds, cfg, c_true, storm_support)
}

/// Full STAR pipeline: subspace support, Stage 2, reconstruction.
pub fn star(
    ms: &MeasurementSet,
    ds: &DictionarySet,
    cfg: &ScenarioConfig,
    c_true: &CMatrix,
) -> Result<EstimateResult> {
    two_stage(Method::Star, ms, ds, cfg, c_true, star_support)
}
