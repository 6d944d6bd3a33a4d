//! Ground-truth channels, training design and the noisy measurement tensor.
//!
//! Frame `l` of the received signal is `Y_l = Σ_q H̄_q W_{q,l} Ḡ_qᵀ` with
//! `H̄_q = W_rxᵀ H_q` and `Ḡ_q = W_txᵀ G_q`. The measurement tensor has
//! dims `(N_tx, M_rx, K_ris)` and frontal slice `l` equal to `Y_lᵀ`, so the
//! mode-3 unfolding row `l` is indexed by `n + m·N_tx` (tx beam fastest).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dictionary::ris_pair_column;
use crate::error::{Error, Result};
use crate::tensor::{self, mode3_unfold, CMatrix, CTensor3};

/// Default cap on the number of vectorized-CS atoms (`N_grid⁴`).
pub const DEFAULT_VCS_ATOM_BUDGET: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RisConstraint {
    /// Each group block is symmetric and unitary (lossless reciprocal network).
    UnitarySymmetric,
    /// i.i.d. complex Gaussian blocks.
    Unconstrained,
}

impl std::str::FromStr for RisConstraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "unitary-symmetric" | "unitary_symmetric" => Ok(Self::UnitarySymmetric),
            "unconstrained" => Ok(Self::Unconstrained),
            other => Err(Error::config(format!("unknown ris constraint `{other}`"))),
        }
    }
}

/// Number of RIS training frames, either absolute or as a fraction of `Q·K̄²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameCount {
    Frames(usize),
    Fraction(f64),
}

/// All dimensional and statistical parameters of one experiment point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// BS antennas `N`.
    pub n_bs: usize,
    /// UE antennas `M`.
    pub m_ue: usize,
    /// RIS elements `K = K̄·Q`.
    pub k_ris_elems: usize,
    /// Elements per group `K̄`.
    pub k_bar: usize,
    /// Group count `Q`.
    pub q_groups: usize,
    /// Transmit training beams `N_tx`.
    pub n_tx: usize,
    /// Receive training beams `M_rx`.
    pub m_rx: usize,
    pub frames: FrameCount,
    /// Paths per channel `P`.
    pub p_paths: usize,
    /// Angular grid size of every dictionary.
    pub n_grid: usize,
    pub snr_db: f64,
    /// Skip noise injection entirely.
    pub noiseless: bool,
    /// Support cardinality `S`; `None` means `P²`.
    pub sparsity: Option<usize>,
    pub seed: u64,
    pub ris_constraint: RisConstraint,
    /// Draw path angles off the dictionary grid (uniform offset within half a bin).
    pub off_grid: bool,
    pub vcs_atom_budget: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::with_group_size(8)
    }
}

impl ScenarioConfig {
    /// The reference setup: `N = M = 32`, `K = 64`, `N_tx = M_rx = 16`,
    /// 50 % measurements, `P = 2`, `N_grid = 64`, 20 dB.
    pub fn with_group_size(k_bar: usize) -> Self {
        let k = 64;
        Self {
            n_bs: 32,
            m_ue: 32,
            k_ris_elems: k,
            k_bar,
            q_groups: k / k_bar.max(1),
            n_tx: 16,
            m_rx: 16,
            frames: FrameCount::Fraction(0.5),
            p_paths: 2,
            n_grid: 64,
            snr_db: 20.0,
            noiseless: false,
            sparsity: None,
            seed: 0,
            ris_constraint: RisConstraint::UnitarySymmetric,
            off_grid: false,
            vcs_atom_budget: DEFAULT_VCS_ATOM_BUDGET,
        }
    }

    /// Rows of the vectorized RIS configuration matrix, `Q·K̄²`.
    pub fn ris_rows(&self) -> usize {
        self.q_groups * self.k_bar * self.k_bar
    }

    pub fn n_frames(&self) -> usize {
        match self.frames {
            FrameCount::Frames(n) => n,
            FrameCount::Fraction(f) => (f * self.ris_rows() as f64).round() as usize,
        }
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity.unwrap_or(self.p_paths * self.p_paths)
    }

    /// Checks every structural invariant; warns when the frame count enters
    /// the conventional (non-compressive) regime.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_bs", self.n_bs),
            ("m_ue", self.m_ue),
            ("k_ris_elems", self.k_ris_elems),
            ("k_bar", self.k_bar),
            ("q_groups", self.q_groups),
            ("n_tx", self.n_tx),
            ("m_rx", self.m_rx),
            ("p_paths", self.p_paths),
            ("n_grid", self.n_grid),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.k_bar * self.q_groups != self.k_ris_elems {
            return Err(Error::config(format!(
                "k_ris_elems ({}) must equal k_bar ({}) * q_groups ({})",
                self.k_ris_elems, self.k_bar, self.q_groups
            )));
        }
        if self.p_paths > self.n_grid {
            return Err(Error::config(format!(
                "p_paths ({}) exceeds n_grid ({})",
                self.p_paths, self.n_grid
            )));
        }
        if let FrameCount::Fraction(f) = self.frames {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::config(format!("meas_fraction must be positive, got {f}")));
            }
        }
        let s = self.sparsity();
        if s == 0 || s > self.n_grid * self.n_grid {
            return Err(Error::config(format!("sparsity {s} out of range")));
        }
        let frames = self.n_frames();
        if frames < s {
            return Err(Error::config(format!(
                "n_frames ({frames}) must be at least the sparsity ({s})"
            )));
        }
        if frames > self.ris_rows() {
            log::warn!(
                "n_frames ({frames}) exceeds Q*K_bar^2 ({}): conventional LS regime, not compressive",
                self.ris_rows()
            );
        }
        if !self.noiseless && !self.snr_db.is_finite() {
            return Err(Error::config("snr_db must be finite (use noiseless)"));
        }
        Ok(())
    }
}

/// Steering vector of a uniform linear array at (possibly fractional) grid
/// position `pos`: entry `k` is `exp(j·2π·k·pos/n_grid)`.
pub fn steering_vector_at(n_elems: usize, pos: f64, n_grid: usize) -> Vec<Complex64> {
    let step = 2.0 * PI * pos / n_grid as f64;
    (0..n_elems)
        .map(|k| Complex64::from_polar(1.0, step * k as f64))
        .collect()
}

pub fn steering_vector(n_elems: usize, grid_idx: usize, n_grid: usize) -> Result<Vec<Complex64>> {
    if grid_idx >= n_grid {
        return Err(Error::invalid(format!(
            "grid index {grid_idx} out of range for grid of {n_grid}"
        )));
    }
    Ok(steering_vector_at(n_elems, grid_idx as f64, n_grid))
}

/// Fractional offsets (in bins) added to the grid indices of an off-grid path set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOffsets {
    pub tx: Vec<f64>,
    pub rx: Vec<f64>,
    pub ris_g: Vec<f64>,
    pub ris_h: Vec<f64>,
}

/// Grid bins and complex gains of the `P` paths of `G` (BS side) and `H` (UE side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    /// BS angles of the paths of `G` (columns of `U_G`).
    pub tx_idx: Vec<usize>,
    /// UE angles of the paths of `H` (columns of `U_H`).
    pub rx_idx: Vec<usize>,
    /// RIS angles of `G` (columns of `V_G`).
    pub ris_g_idx: Vec<usize>,
    /// RIS angles of `H` (columns of `V_H`).
    pub ris_h_idx: Vec<usize>,
    pub gains_g: Vec<Complex64>,
    pub gains_h: Vec<Complex64>,
    pub offsets: Option<PathOffsets>,
}

impl PathSet {
    pub fn n_paths(&self) -> usize {
        self.gains_g.len()
    }

    pub fn is_on_grid(&self) -> bool {
        self.offsets.is_none()
    }

    fn position(idx: &[usize], off: Option<&Vec<f64>>, p: usize) -> f64 {
        idx[p] as f64 + off.map_or(0.0, |o| o[p])
    }

    pub fn tx_pos(&self, p: usize) -> f64 {
        Self::position(&self.tx_idx, self.offsets.as_ref().map(|o| &o.tx), p)
    }

    pub fn rx_pos(&self, p: usize) -> f64 {
        Self::position(&self.rx_idx, self.offsets.as_ref().map(|o| &o.rx), p)
    }

    pub fn ris_g_pos(&self, p: usize) -> f64 {
        Self::position(&self.ris_g_idx, self.offsets.as_ref().map(|o| &o.ris_g), p)
    }

    pub fn ris_h_pos(&self, p: usize) -> f64 {
        Self::position(&self.ris_h_idx, self.offsets.as_ref().map(|o| &o.ris_h), p)
    }
}

pub(crate) fn complex_gaussian(rng: &mut impl Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draws `P` distinct bins per angle dimension and i.i.d. `CN(0,1)` gains.
pub fn gen_paths(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Result<PathSet> {
    let (p, n) = (cfg.p_paths, cfg.n_grid);
    if p > n {
        return Err(Error::invalid(format!("p_paths ({p}) exceeds n_grid ({n})")));
    }
    let mut bins = || rand::seq::index::sample(rng, n, p).into_vec();
    let tx_idx = bins();
    let rx_idx = bins();
    let ris_g_idx = bins();
    let ris_h_idx = bins();
    let gains_g = (0..p).map(|_| complex_gaussian(rng, 1.0)).collect();
    let gains_h = (0..p).map(|_| complex_gaussian(rng, 1.0)).collect();
    let offsets = cfg.off_grid.then(|| {
        let mut offs = || (0..p).map(|_| rng.random::<f64>() - 0.5).collect::<Vec<_>>();
        PathOffsets {
            tx: offs(),
            rx: offs(),
            ris_g: offs(),
            ris_h: offs(),
        }
    });
    Ok(PathSet {
        tx_idx,
        rx_idx,
        ris_g_idx,
        ris_h_idx,
        gains_g,
        gains_h,
        offsets,
    })
}

/// Ground-truth channels `H = U_H Λ_H V_Hᴴ` (`M × K`) and `G = U_G Λ_G V_Gᴴ` (`N × K`).
#[derive(Debug, Clone)]
pub struct ChannelInstance {
    pub h: CMatrix,
    pub g: CMatrix,
    pub u_h: CMatrix,
    pub v_h: CMatrix,
    pub u_g: CMatrix,
    pub v_g: CMatrix,
    pub paths: PathSet,
}

fn steering_matrix(n_elems: usize, n_grid: usize, positions: impl Iterator<Item = f64>) -> CMatrix {
    let cols: Vec<Vec<Complex64>> = positions
        .map(|pos| steering_vector_at(n_elems, pos, n_grid))
        .collect();
    CMatrix::from_fn(n_elems, cols.len(), |i, j| cols[j][i])
}

pub fn build_channels(paths: &PathSet, cfg: &ScenarioConfig) -> Result<ChannelInstance> {
    let p = paths.n_paths();
    let lists = [
        paths.tx_idx.len(),
        paths.rx_idx.len(),
        paths.ris_g_idx.len(),
        paths.ris_h_idx.len(),
        paths.gains_h.len(),
    ];
    if lists.iter().any(|&l| l != p) {
        return Err(Error::invalid("path set lists have inconsistent lengths"));
    }
    let all_idx = paths
        .tx_idx
        .iter()
        .chain(&paths.rx_idx)
        .chain(&paths.ris_g_idx)
        .chain(&paths.ris_h_idx);
    if all_idx.into_iter().any(|&i| i >= cfg.n_grid) {
        return Err(Error::invalid("path bin outside the grid"));
    }
    let ng = cfg.n_grid;
    let u_g = steering_matrix(cfg.n_bs, ng, (0..p).map(|i| paths.tx_pos(i)));
    let u_h = steering_matrix(cfg.m_ue, ng, (0..p).map(|i| paths.rx_pos(i)));
    let v_g = steering_matrix(cfg.k_ris_elems, ng, (0..p).map(|i| paths.ris_g_pos(i)));
    let v_h = steering_matrix(cfg.k_ris_elems, ng, (0..p).map(|i| paths.ris_h_pos(i)));
    let g = &u_g * tensor::diag(&paths.gains_g) * v_g.adjoint();
    let h = &u_h * tensor::diag(&paths.gains_h) * v_h.adjoint();
    Ok(ChannelInstance {
        h,
        g,
        u_h,
        v_h,
        u_g,
        v_g,
        paths: paths.clone(),
    })
}

/// Training beams and BD-RIS configurations.
#[derive(Debug, Clone)]
pub struct TrainingDesign {
    /// `N × N_tx`.
    pub w_tx: CMatrix,
    /// `M × M_rx`.
    pub w_rx: CMatrix,
    /// `Q·K̄² × K_ris`; column `l` stacks `vec(W_{q,l})` over the groups.
    pub w_ris: CMatrix,
    /// `blocks[l][q]` is the `K̄ × K̄` scattering block of group `q` in frame `l`.
    pub blocks: Vec<Vec<CMatrix>>,
}

impl TrainingDesign {
    pub fn n_frames(&self) -> usize {
        self.w_ris.ncols()
    }

    /// True when every scattering block is symmetric. Such training cannot
    /// tell the RIS angle pair `(i_G, i_H)` from `(i_H, i_G)`.
    pub fn is_reciprocal(&self) -> bool {
        self.blocks.iter().flatten().all(|w| {
            let scale = tensor::frobenius_sq(w).sqrt().max(f64::MIN_POSITIVE);
            let asym = tensor::frobenius_sq(&(w - w.transpose())).sqrt();
            asym <= 1e-10 * scale
        })
    }

    /// Assembles the stacked configuration matrix from per-frame blocks.
    pub fn from_blocks(w_tx: CMatrix, w_rx: CMatrix, blocks: Vec<Vec<CMatrix>>) -> Result<Self> {
        let q = blocks.first().map_or(0, |b| b.len());
        let kb = blocks
            .first()
            .and_then(|b| b.first())
            .map_or(0, |m| m.nrows());
        let kb2 = kb * kb;
        let mut w_ris = CMatrix::zeros(q * kb2, blocks.len());
        for (l, frame) in blocks.iter().enumerate() {
            if frame.len() != q || frame.iter().any(|b| b.nrows() != kb || b.ncols() != kb) {
                return Err(Error::invalid(format!("frame {l} has inconsistent RIS blocks")));
            }
            let col = w_ris.col_as_slice_mut(l);
            for (qi, blk) in frame.iter().enumerate() {
                for b in 0..kb {
                    col[qi * kb2 + b * kb..qi * kb2 + (b + 1) * kb]
                        .copy_from_slice(blk.col_as_slice(b));
                }
            }
        }
        Ok(Self {
            w_tx,
            w_rx,
            w_ris,
            blocks,
        })
    }
}

fn random_phase_beams(rng: &mut impl Rng, antennas: usize, beams: usize) -> CMatrix {
    let scale = 1.0 / (antennas as f64).sqrt();
    CMatrix::from_fn(antennas, beams, |_, _| {
        Complex64::from_polar(scale, 2.0 * PI * rng.random::<f64>())
    })
}

/// Haar-distributed unitary via QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal absorbed into `Q`.
fn haar_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    let z = CMatrix::from_fn(n, n, |_, _| complex_gaussian(rng, 1.0));
    let qr = z.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    let mut u = q;
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { tensor::ONE };
        for i in 0..n {
            u[(i, j)] *= ph;
        }
    }
    u
}

/// Symmetric unitary block `U Uᵀ` (Takagi form with unit singular values).
pub(crate) fn random_symmetric_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    let u = haar_unitary(rng, n);
    &u * u.transpose()
}

pub fn gen_training(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Result<TrainingDesign> {
    let w_tx = random_phase_beams(rng, cfg.n_bs, cfg.n_tx);
    let w_rx = random_phase_beams(rng, cfg.m_ue, cfg.m_rx);
    let kb = cfg.k_bar;
    let blocks: Vec<Vec<CMatrix>> = (0..cfg.n_frames())
        .map(|_| {
            (0..cfg.q_groups)
                .map(|_| match cfg.ris_constraint {
                    RisConstraint::UnitarySymmetric => random_symmetric_unitary(rng, kb),
                    RisConstraint::Unconstrained => {
                        CMatrix::from_fn(kb, kb, |_, _| complex_gaussian(rng, 1.0 / kb as f64))
                    }
                })
                .collect()
        })
        .collect();
    TrainingDesign::from_blocks(w_tx, w_rx, blocks)
}

/// Beam-processed channels `H̄ = W_rxᵀ H` and `Ḡ = W_txᵀ G`.
fn processed_channels(ch: &ChannelInstance, tr: &TrainingDesign) -> (CMatrix, CMatrix) {
    (tr.w_rx.transpose() * &ch.h, tr.w_tx.transpose() * &ch.g)
}

fn frame_from_processed(
    hbar: &CMatrix,
    gbar: &CMatrix,
    blocks: &[CMatrix],
    k_bar: usize,
) -> CMatrix {
    let mut y = CMatrix::zeros(hbar.nrows(), gbar.nrows());
    for (q, w) in blocks.iter().enumerate() {
        let hq = hbar.as_ref().subcols(q * k_bar, k_bar);
        let gq = gbar.as_ref().subcols(q * k_bar, k_bar);
        y += hq * w * gq.transpose();
    }
    y
}

/// Noise-free frame `Y_l = Σ_q H̄_q W_{q,l} Ḡ_qᵀ` (`M_rx × N_tx`), by the literal group sum.
pub fn synthesize_frame(ch: &ChannelInstance, tr: &TrainingDesign, frame: usize) -> Result<CMatrix> {
    if frame >= tr.n_frames() {
        return Err(Error::invalid(format!(
            "frame {frame} out of range ({} frames)",
            tr.n_frames()
        )));
    }
    let blocks = &tr.blocks[frame];
    let k_bar = blocks.first().map_or(0, |b| b.nrows());
    if k_bar * blocks.len() != ch.h.ncols() {
        return Err(Error::invalid("RIS blocks do not cover the channel columns"));
    }
    let (hbar, gbar) = processed_channels(ch, tr);
    Ok(frame_from_processed(&hbar, &gbar, blocks, k_bar))
}

/// Noisy measurement tensor `Y = X + N` and its mode-3 unfolding.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    /// `N_tx × M_rx × K_ris`.
    pub y: CTensor3,
    pub x_clean: CTensor3,
    pub noise_var: f64,
    /// `K_ris × N_tx·M_rx`, equal to `mode3_unfold(y)`.
    pub unfolded: CMatrix,
}

pub fn clean_tensor(ch: &ChannelInstance, tr: &TrainingDesign) -> Result<CTensor3> {
    let k_bar = tr.blocks.first().and_then(|b| b.first()).map_or(0, |b| b.nrows());
    if k_bar * tr.blocks.first().map_or(0, |b| b.len()) != ch.h.ncols() {
        return Err(Error::invalid("RIS blocks do not cover the channel columns"));
    }
    let (hbar, gbar) = processed_channels(ch, tr);
    let mut x = CTensor3::zeros(gbar.nrows(), hbar.nrows(), tr.n_frames());
    for (l, blocks) in tr.blocks.iter().enumerate() {
        let y = frame_from_processed(&hbar, &gbar, blocks, k_bar);
        x.set_slice3(l, &y.transpose().to_owned());
    }
    Ok(x)
}

/// Stacks all frames and adds white circular Gaussian noise at the configured
/// per-entry SNR: `σ² = ‖X‖²/(N_tx·M_rx·K_ris·10^{snr/10})`.
pub fn synthesize_measurements(
    ch: &ChannelInstance,
    tr: &TrainingDesign,
    cfg: &ScenarioConfig,
    rng: &mut impl Rng,
) -> Result<MeasurementSet> {
    let x_clean = clean_tensor(ch, tr)?;
    let (d1, d2, d3) = x_clean.dims();
    let mut y = x_clean.clone();
    let noise_var = if cfg.noiseless {
        0.0
    } else {
        let entries = (d1 * d2 * d3) as f64;
        x_clean.frobenius_sq() / (entries * 10f64.powf(cfg.snr_db / 10.0))
    };
    if noise_var > 0.0 {
        for z in y.as_mut_slice() {
            *z += complex_gaussian(rng, noise_var);
        }
    }
    let unfolded = mode3_unfold(&y);
    Ok(MeasurementSet {
        y,
        x_clean,
        noise_var,
        unfolded,
    })
}

/// Factors of the Tucker-3 model `X₍₃₎ = A₃ D₍₃₎ (A₂ ⊗ A₁)ᵀ`.
///
/// Path pairs are ordered `c = p_H·P + p_G`, matching the column order of
/// `A₂ ⊗ A₁`, so the core unfolding is the diagonal `Λ_H ⊗ Λ_G`.
#[derive(Debug, Clone)]
pub struct TuckerFactors {
    /// `W_txᵀ U_G`, `N_tx × P`.
    pub a1: CMatrix,
    /// `W_rxᵀ U_H`, `M_rx × P`.
    pub a2: CMatrix,
    /// `W_risᵀ V̄ᵀ`, `K_ris × P²`.
    pub a3: CMatrix,
    /// `P² × P²` diagonal core unfolding.
    pub core: CMatrix,
}

/// RIS-side column `V̄ᵀ(:, (p_G, p_H))` of the true channel, `Q·K̄²` long.
pub fn true_ris_column(ch: &ChannelInstance, k_bar: usize, p_g: usize, p_h: usize) -> Vec<Complex64> {
    ris_pair_column(ch.v_g.col_as_slice(p_g), ch.v_h.col_as_slice(p_h), k_bar)
}

pub fn tucker_factors(ch: &ChannelInstance, tr: &TrainingDesign, k_bar: usize) -> TuckerFactors {
    let p = ch.paths.n_paths();
    let a1 = tr.w_tx.transpose() * &ch.u_g;
    let a2 = tr.w_rx.transpose() * &ch.u_h;
    let mut vbar_t = CMatrix::zeros(tr.w_ris.nrows(), p * p);
    for ph in 0..p {
        for pg in 0..p {
            let col = true_ris_column(ch, k_bar, pg, ph);
            vbar_t.col_as_slice_mut(ph * p + pg).copy_from_slice(&col);
        }
    }
    let a3 = tr.w_ris.transpose() * &vbar_t;
    TuckerFactors {
        a1,
        a2,
        a3,
        core: true_core_unfolding(ch),
    }
}

/// Diagonal core unfolding `Λ_H ⊗ Λ_G`: entry `p_H·P + p_G` is `gains_g[p_G]·gains_h[p_H]`.
pub fn true_core_unfolding(ch: &ChannelInstance) -> CMatrix {
    tensor::kron(
        &tensor::diag(&ch.paths.gains_h),
        &tensor::diag(&ch.paths.gains_g),
    )
}

/// Ground-truth composite channel (`Q·K̄² × N·M`).
///
/// Row `q·K̄² + a + b·K̄` and column `n + m·N` hold `H[m, qK̄+a]·G[n, qK̄+b]`,
/// i.e. `C = Σ d_{p_G,p_H} f₃(p_G,p_H) (u_H(p_H) ⊗ u_G(p_G))ᵀ`, so that the
/// noise-free unfolding is `W_risᵀ C (W_rx ⊗ W_tx)`.
pub fn true_composite_channel(ch: &ChannelInstance, k_bar: usize) -> CMatrix {
    let p = ch.paths.n_paths();
    let rows = ch.h.ncols() * k_bar;
    let (n, m) = (ch.u_g.nrows(), ch.u_h.nrows());
    let mut f3 = CMatrix::zeros(rows, p * p);
    let mut beams = CMatrix::zeros(n * m, p * p);
    for ph in 0..p {
        for pg in 0..p {
            let c = ph * p + pg;
            let d = ch.paths.gains_g[pg] * ch.paths.gains_h[ph];
            let col = true_ris_column(ch, k_bar, pg, ph);
            for (dst, v) in f3.col_as_slice_mut(c).iter_mut().zip(col) {
                *dst = v * d;
            }
            let (ug, uh) = (ch.u_g.col_as_slice(pg), ch.u_h.col_as_slice(ph));
            let bcol = beams.col_as_slice_mut(c);
            for mi in 0..m {
                for ni in 0..n {
                    bcol[ni + mi * n] = uh[mi] * ug[ni];
                }
            }
        }
    }
    if p == 0 {
        return CMatrix::zeros(rows, n * m);
    }
    f3 * beams.transpose()
}

/// Set of true dictionary support pairs `(i_G, i_H)` (RIS bins), `None` when off-grid.
/// Projects each group block of a composite channel onto its symmetric part,
/// the only component a reciprocal RIS configuration can excite.
pub fn reciprocal_part(c: &CMatrix, k_bar: usize) -> CMatrix {
    let kb2 = k_bar * k_bar;
    CMatrix::from_fn(c.nrows(), c.ncols(), |row, col| {
        let (base, r) = (row - row % kb2, row % kb2);
        let twin = base + (r / k_bar) + (r % k_bar) * k_bar;
        (c[(row, col)] + c[(twin, col)]) * 0.5
    })
}

pub fn true_support_pairs(paths: &PathSet) -> Option<Vec<(usize, usize)>> {
    if !paths.is_on_grid() {
        return None;
    }
    let p = paths.n_paths();
    let mut pairs = Vec::with_capacity(p * p);
    for pg in 0..p {
        for ph in 0..p {
            pairs.push((paths.ris_g_idx[pg], paths.ris_h_idx[ph]));
        }
    }
    Some(pairs)
}
