//! Nearest-neighbour spacing statistics of cumulative Floquet unitaries,
//! restricted to the reflection-even sector of the chain.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::algebra::{reverse_bits, DenseOperator, MAX_SITES, ZERO};
use crate::evolution::{ChainParams, EvolutionError, UnitarySweep};
use crate::schedules::QuenchProtocol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("N must be even (got {0})")]
    OddChain(usize),
    #[error("chain of {0} sites is outside the supported range")]
    ChainSize(usize),
    #[error("projector is for {expected} sites, operator has {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("operator does not commute with the reflection: ‖[U, R]‖_max = {0:.3e}")]
    SymmetryViolation(f64),
    #[error("operator is not unitary: eigenvalue modulus off by {0:.3e}")]
    NotUnitary(f64),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("need at least two eigenphases (got {0})")]
    TooFewPhases(usize),
    #[error("kicks are numbered from 1")]
    KickIndexZero,
    #[error("kick list must be strictly ascending")]
    UnsortedKicks,
    #[error("histogram needs a positive bin count and cutoff")]
    BadHistogram,
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// Largest `‖[U, R]‖_max` accepted by [`project_unitary`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;
/// Largest `||λ| - 1|` accepted by [`eigenphase_spacings`].
pub const UNITARITY_TOLERANCE: f64 = 1e-8;
/// Ensembles smaller than this are always scored Inconclusive.
pub const MIN_SPACINGS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// One basis vector of a reflection sector: `|b⟩` alone (a palindrome, even
/// sector only) or `(|b⟩ ± |rev b⟩)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct SectorVector {
    primary: usize,
    partner: Option<usize>,
}

/// Isometry onto the even (or odd) eigenspace of the site-reversal `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct PalindromeProjector {
    n_sites: usize,
    parity: Parity,
    columns: Vec<SectorVector>,
}

/// Even-sector projector.
pub fn palindrome_projector(n_sites: usize) -> Result<PalindromeProjector> {
    PalindromeProjector::new(n_sites, Parity::Even)
}

impl PalindromeProjector {
    pub fn new(n_sites: usize, parity: Parity) -> Result<Self> {
        if n_sites % 2 != 0 {
            return Err(SpectralError::OddChain(n_sites));
        }
        if n_sites == 0 || n_sites > MAX_SITES {
            return Err(SpectralError::ChainSize(n_sites));
        }
        let mut columns = Vec::new();
        for b in 0..1usize << n_sites {
            let r = reverse_bits(b, n_sites);
            if r == b {
                if parity == Parity::Even {
                    columns.push(SectorVector { primary: b, partner: None });
                }
            } else if b < r {
                columns.push(SectorVector { primary: b, partner: Some(r) });
            }
        }
        Ok(Self { n_sites, parity, columns })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Sector dimension, `(2^N ± 2^{N/2})/2`.
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    fn partner_sign(&self) -> f64 {
        match self.parity {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    /// Nonzero entries `(basis index, amplitude)` of column `k`.
    pub fn column(&self, k: usize) -> Vec<(usize, f64)> {
        let c = self.columns[k];
        match c.partner {
            None => vec![(c.primary, 1.0)],
            Some(r) => vec![(c.primary, std::f64::consts::FRAC_1_SQRT_2), (r, self.partner_sign() * std::f64::consts::FRAC_1_SQRT_2)],
        }
    }

    /// Column-major dense isometry, `2^N × dim`.
    pub fn isometry(&self) -> Vec<Vec<f64>> {
        let full = 1usize << self.n_sites;
        (0..self.dim())
            .map(|k| {
                let mut col = vec![0.0; full];
                for (i, a) in self.column(k) {
                    col[i] = a;
                }
                col
            })
            .collect()
    }
}

/// Square complex matrix on a symmetry sector, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl SectorMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), dim * dim, "row-major data must hold dim² entries");
        Self { dim, data }
    }

    /// Max-norm of `M M† - I`.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim;
        let m = faer::MatRef::from_row_major_slice(&self.data, d, d);
        let prod = m * m.adjoint();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        let d = self.dim;
        faer::MatRef::from_row_major_slice(&self.data, d, d)
            .eigenvalues()
            .map_err(|e| SpectralError::Eigen(format!("{e:?}")))
    }
}

/// `U_s = P† U P`, after checking `[U, R] = 0`.
pub fn project_unitary(u: &DenseOperator, p: &PalindromeProjector) -> Result<SectorMatrix> {
    if u.n_sites() != p.n_sites {
        return Err(SpectralError::SizeMismatch { expected: p.n_sites, got: u.n_sites() });
    }
    let defect = u.reflection_commutator_norm();
    if !(defect <= SYMMETRY_TOLERANCE) {
        return Err(SpectralError::SymmetryViolation(defect));
    }
    Ok(project_entries(p, |i, j| u.get(i, j)))
}

/// Same as [`project_unitary`] from `Uᵀ`, the layout kept by [`UnitarySweep`].
pub fn project_transposed(ut: &DenseOperator, p: &PalindromeProjector) -> Result<SectorMatrix> {
    if ut.n_sites() != p.n_sites {
        return Err(SpectralError::SizeMismatch { expected: p.n_sites, got: ut.n_sites() });
    }
    // [U, R] = 0 iff [Uᵀ, R] = 0 since R is a real symmetric permutation
    let defect = ut.reflection_commutator_norm();
    if !(defect <= SYMMETRY_TOLERANCE) {
        return Err(SpectralError::SymmetryViolation(defect));
    }
    Ok(project_entries(p, |i, j| ut.get(j, i)))
}

fn project_entries(p: &PalindromeProjector, entry: impl Fn(usize, usize) -> C64) -> SectorMatrix {
    let d = p.dim();
    let cols: Vec<Vec<(usize, f64)>> = (0..d).map(|k| p.column(k)).collect();
    let mut data = vec![ZERO; d * d];
    for (a, row) in data.chunks_exact_mut(d).enumerate() {
        for (b, out) in row.iter_mut().enumerate() {
            let mut acc = ZERO;
            for &(i, pa) in &cols[a] {
                for &(j, pb) in &cols[b] {
                    acc += entry(i, j) * (pa * pb);
                }
            }
            *out = acc;
        }
    }
    SectorMatrix { dim: d, data }
}

/// Mean-normalized circular spacings of one unitary's eigenphases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingEnsemble {
    pub kick: usize,
    /// Sorted eigenphases in `[0, 2π)`.
    pub phases: Vec<f64>,
    /// One spacing per phase, the last being the wrap-around gap.
    pub spacings: Vec<f64>,
}

impl SpacingEnsemble {
    /// Builds the ensemble from raw phases (any real values, taken mod 2π).
    pub fn from_phases(kick: usize, phases: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut phases: Vec<f64> = phases.into_iter().map(|t| t.rem_euclid(2.0 * PI)).collect();
        if phases.len() < 2 {
            return Err(SpectralError::TooFewPhases(phases.len()));
        }
        phases.sort_by(|a, b| a.total_cmp(b));
        let m = phases.len();
        let mut spacings: Vec<f64> = phases.windows(2).map(|w| w[1] - w[0]).collect();
        spacings.push(2.0 * PI - phases[m - 1] + phases[0]);
        let mean = spacings.iter().sum::<f64>() / m as f64;
        if mean > 0.0 {
            spacings.iter_mut().for_each(|s| *s /= mean);
        }
        Ok(Self { kick, phases, spacings })
    }

    /// Builds the ensemble from already normalized spacings (synthetic samples).
    pub fn from_spacings(kick: usize, spacings: Vec<f64>) -> Self {
        Self { kick, phases: Vec::new(), spacings }
    }

    pub fn len(&self) -> usize {
        self.spacings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spacings.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.spacings.iter().sum::<f64>() / self.len().max(1) as f64
    }
}

/// Eigenphases of `U_s` and their circular spacings.
pub fn eigenphase_spacings(u: &SectorMatrix, kick: usize) -> Result<SpacingEnsemble> {
    let eig = u.eigenvalues()?;
    let worst = eig.iter().map(|l| (l.norm() - 1.0).abs()).fold(0.0, f64::max);
    if !(worst <= UNITARITY_TOLERANCE) {
        return Err(SpectralError::NotUnitary(worst));
    }
    SpacingEnsemble::from_phases(kick, eig.iter().map(|l| l.arg()))
}

/// Wigner-Dyson (orthogonal) surmise `(πs/2) exp(-πs²/4)`.
pub fn wigner_dyson_density(s: f64) -> f64 {
    if s < 0.0 {
        return 0.0;
    }
    0.5 * PI * s * (-0.25 * PI * s * s).exp()
}

/// Poisson spacing density `exp(-s)`.
pub fn poisson_density(s: f64) -> f64 {
    if s < 0.0 {
        return 0.0;
    }
    (-s).exp()
}

pub fn wigner_dyson_cdf(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    1.0 - (-0.25 * PI * s * s).exp()
}

pub fn poisson_cdf(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    1.0 - (-s).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    PoissonLike,
    WignerDysonLike,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::PoissonLike => "poisson",
            Verdict::WignerDysonLike => "wigner-dyson",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramOptions {
    pub bins: usize,
    pub s_cut: f64,
    /// Relative margin by which one distance must beat the other.
    pub margin: f64,
}

impl Default for HistogramOptions {
    fn default() -> Self {
        Self { bins: 25, s_cut: 4.0, margin: 0.1 }
    }
}

/// Spacing histogram and its total-variation distances to both models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnsdScore {
    pub edges: Vec<f64>,
    /// Density per bin; integrates to 1 over `[0, s_cut]`.
    pub density: Vec<f64>,
    pub distance_wd: f64,
    pub distance_poisson: f64,
    pub verdict: Verdict,
}

impl NnsdScore {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Bins the spacings on `[0, s_cut]` (spacings beyond the cutoff are
/// dropped) and compares the binned mass with each model, both conditioned
/// on the same interval.
pub fn score_nnsd(ensemble: &SpacingEnsemble, options: HistogramOptions) -> Result<NnsdScore> {
    let HistogramOptions { bins, s_cut, margin } = options;
    if bins == 0 || !(s_cut > 0.0) || !s_cut.is_finite() {
        return Err(SpectralError::BadHistogram);
    }
    let width = s_cut / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| k as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &s in &ensemble.spacings {
        if (0.0..=s_cut).contains(&s) {
            counts[((s / width) as usize).min(bins - 1)] += 1;
        }
    }
    let inside: usize = counts.iter().sum();
    let density: Vec<f64> = if inside == 0 {
        vec![0.0; bins]
    } else {
        counts.iter().map(|&c| c as f64 / (inside as f64 * width)).collect()
    };
    let distance = |cdf: fn(f64) -> f64| {
        let total = cdf(s_cut);
        0.5 * edges
            .windows(2)
            .zip(&density)
            .map(|(e, h)| ((cdf(e[1]) - cdf(e[0])) / total - h * width).abs())
            .sum::<f64>()
    };
    let distance_wd = distance(wigner_dyson_cdf);
    let distance_poisson = distance(poisson_cdf);
    let verdict = if ensemble.len() < MIN_SPACINGS || inside == 0 {
        Verdict::Inconclusive
    } else if distance_poisson < (1.0 - margin) * distance_wd {
        Verdict::PoissonLike
    } else if distance_wd < (1.0 - margin) * distance_poisson {
        Verdict::WignerDysonLike
    } else {
        Verdict::Inconclusive
    };
    Ok(NnsdScore { edges, density, distance_wd, distance_poisson, verdict })
}

/// One requested kick of an NNSD sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnsdRecord {
    pub kick: usize,
    pub ensemble: SpacingEnsemble,
    pub score: NnsdScore,
}

/// Runs one sequential sweep of cumulative unitaries and scores the even
/// sector at each requested kick.
pub fn nnsd_at_kicks(
    params: &ChainParams,
    protocol: &QuenchProtocol,
    kicks: &[usize],
    options: HistogramOptions,
) -> Result<Vec<NnsdRecord>> {
    if kicks.first() == Some(&0) {
        return Err(SpectralError::KickIndexZero);
    }
    if kicks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpectralError::UnsortedKicks);
    }
    let projector = palindrome_projector(params.n_sites)?;
    let mut sweep = UnitarySweep::new(*params, *protocol)?;
    let mut out = Vec::with_capacity(kicks.len());
    for &kick in kicks {
        while sweep.kick() < kick {
            sweep.advance()?;
        }
        let sector = project_transposed(sweep.transposed(), &projector)?;
        let ensemble = eigenphase_spacings(&sector, kick)?;
        let score = score_nnsd(&ensemble, options)?;
        out.push(NnsdRecord { kick, ensemble, score });
    }
    Ok(out)
}
