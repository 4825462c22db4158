//! Pauli operators on an open spin chain, the site-reversal symmetry and
//! gate-layer application on dense operators.
//!
//! Basis convention: computational z-basis, site 1 is the most significant
//! bit of a basis index, bit value 0 is spin up (`σ^z = +1`).

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::kernel::{self, RowOp, RowProgram};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const IM: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("site {site} outside 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("bond {bond} outside 1..={max}")]
    BondOutOfRange { bond: usize, max: usize },
    #[error("N must be even (got {0})")]
    OddChain(usize),
    #[error("chain needs at least {min} sites (got {got})")]
    ChainTooShort { min: usize, got: usize },
    #[error("chain of {0} sites exceeds the supported maximum")]
    ChainTooLong(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, AlgebraError>;

/// Largest chain handled by the dense engine (`4^16` entries is already 64 GiB).
pub const MAX_SITES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub fn matrix(self) -> [[C64; 2]; 2] {
        match self {
            PauliAxis::X => [[ZERO, ONE], [ONE, ZERO]],
            PauliAxis::Y => [[ZERO, -IM], [IM, ZERO]],
            PauliAxis::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }
}

/// Bit of the basis index that encodes `site` (1-based).
#[inline]
pub fn site_mask(n_sites: usize, site: usize) -> usize {
    1usize << (n_sites - site)
}

/// `σ^z` eigenvalue of `site` in basis state `index`.
#[inline]
pub fn z_sign(index: usize, n_sites: usize, site: usize) -> f64 {
    if index & site_mask(n_sites, site) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Reverses the `n_sites`-bit string of a basis index.
#[inline]
pub fn reverse_bits(index: usize, n_sites: usize) -> usize {
    index.reverse_bits() >> (usize::BITS as usize - n_sites)
}

fn check_chain(n_sites: usize) -> Result<()> {
    if n_sites == 0 {
        return Err(AlgebraError::ChainTooShort { min: 1, got: 0 });
    }
    if n_sites > MAX_SITES {
        return Err(AlgebraError::ChainTooLong(n_sites));
    }
    Ok(())
}

fn check_site(n_sites: usize, site: usize) -> Result<()> {
    if site == 0 || site > n_sites {
        return Err(AlgebraError::SiteOutOfRange { site, n_sites });
    }
    Ok(())
}

/// Square complex matrix acting on `n_sites` spins, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    n_sites: usize,
    dim: usize,
    data: Vec<C64>,
}

impl DenseOperator {
    pub fn zeros(n_sites: usize) -> Result<Self> {
        check_chain(n_sites)?;
        let dim = 1usize << n_sites;
        Ok(Self { n_sites, dim, data: vec![ZERO; dim * dim] })
    }

    pub fn identity(n_sites: usize) -> Result<Self> {
        let mut op = Self::zeros(n_sites)?;
        for i in 0..op.dim {
            op.data[i * op.dim + i] = ONE;
        }
        Ok(op)
    }

    pub fn from_fn(n_sites: usize, mut f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        let mut op = Self::zeros(n_sites)?;
        let dim = op.dim;
        for i in 0..dim {
            for j in 0..dim {
                op.data[i * dim + j] = f(i, j);
            }
        }
        Ok(op)
    }

    pub fn from_diagonal(n_sites: usize, diag: &[C64]) -> Result<Self> {
        let mut op = Self::zeros(n_sites)?;
        if diag.len() != op.dim {
            return Err(AlgebraError::DimensionMismatch { expected: op.dim, got: diag.len() });
        }
        for (i, d) in diag.iter().enumerate() {
            op.data[i * op.dim + i] = *d;
        }
        Ok(op)
    }

    pub fn from_row_major(n_sites: usize, data: Vec<C64>) -> Result<Self> {
        check_chain(n_sites)?;
        let dim = 1usize << n_sites;
        if data.len() != dim * dim {
            return Err(AlgebraError::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        Ok(Self { n_sites, dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(AlgebraError::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        Ok(())
    }

    /// Matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        self.ensure_same_shape(rhs)?;
        let dim = self.dim;
        let mut out = vec![ZERO; dim * dim];
        {
            let a = faer::MatRef::from_row_major_slice(&self.data, dim, dim);
            let b = faer::MatRef::from_row_major_slice(&rhs.data, dim, dim);
            let c = faer::MatMut::from_row_major_slice_mut(&mut out, dim, dim);
            faer::linalg::matmul::matmul(c, faer::Accum::Replace, a, b, ONE, faer::Par::Seq);
        }
        Ok(Self { n_sites: self.n_sites, dim, data: out })
    }

    pub fn adjoint(&self) -> Self {
        let mut out = self.transpose();
        out.data.iter_mut().for_each(|z| *z = z.conj());
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = self.clone();
        out.transpose_in_place();
        out
    }

    pub fn transpose_in_place(&mut self) {
        kernel::transpose_in_place(&mut self.data, self.dim);
    }

    pub fn adjoint_in_place(&mut self) {
        kernel::adjoint_in_place(&mut self.data, self.dim);
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= s);
        out
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.ensure_same_shape(rhs)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.ensure_same_shape(rhs)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    /// `[self, rhs]`.
    pub fn commutator(&self, rhs: &Self) -> Result<Self> {
        self.matmul(rhs)?.sub(&rhs.matmul(self)?)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        self.ensure_same_shape(rhs)?;
        Ok(self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Max-norm of `self - self†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let dim = self.dim;
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in i..dim {
                let d = (self.data[i * dim + j] - self.data[j * dim + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Max-norm of `self·self† - I`.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.matmul(&self.adjoint()).expect("same shape");
        let dim = self.dim;
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((prod.data[i * dim + j] - target).norm());
            }
        }
        worst
    }

    /// Max-norm of `[self, R]` for the site-reversal permutation `R`, computed
    /// without forming `R`: `(UR)_{ij} = U_{i,rev j}` and `(RU)_{ij} = U_{rev i,j}`.
    pub fn reflection_commutator_norm(&self) -> f64 {
        let (dim, n) = (self.dim, self.n_sites);
        let mut worst = 0.0f64;
        for i in 0..dim {
            let ri = reverse_bits(i, n);
            for j in 0..dim {
                let d = self.data[i * dim + reverse_bits(j, n)] - self.data[ri * dim + j];
                worst = worst.max(d.norm());
            }
        }
        worst
    }
}

/// `σ^axis` on `site` of an `n_sites` chain; accepts any chain length.
pub fn site_operator(axis: PauliAxis, site: usize, n_sites: usize) -> Result<DenseOperator> {
    check_chain(n_sites)?;
    check_site(n_sites, site)?;
    let m = axis.matrix();
    let mask = site_mask(n_sites, site);
    let mut op = DenseOperator::zeros(n_sites)?;
    let dim = op.dim;
    for i in 0..dim {
        let bi = usize::from(i & mask != 0);
        for bj in 0..2 {
            let j = if bj == bi { i } else { i ^ mask };
            let v = m[bi][bj];
            if v != ZERO {
                op.data[i * dim + j] = v;
            }
        }
    }
    Ok(op)
}

/// `I⊗…⊗σ^axis⊗…⊗I` with the Pauli matrix at `site` (1-based) of an even chain.
pub fn pauli_on_site(axis: PauliAxis, site: usize, n_sites: usize) -> Result<DenseOperator> {
    if n_sites < 2 {
        return Err(AlgebraError::ChainTooShort { min: 2, got: n_sites });
    }
    if n_sites % 2 != 0 {
        return Err(AlgebraError::OddChain(n_sites));
    }
    site_operator(axis, site, n_sites)
}

/// `Σ_l σ_l^axis` over all sites.
pub fn field_sum(axis: PauliAxis, n_sites: usize) -> Result<DenseOperator> {
    let mut acc = DenseOperator::zeros(n_sites)?;
    for site in 1..=n_sites {
        acc = acc.add(&site_operator(axis, site, n_sites)?)?;
    }
    Ok(acc)
}

/// Open-chain Ising coupling `Σ_{l<N} σ_l^x σ_{l+1}^x`.
pub fn ising_xx(n_sites: usize) -> Result<DenseOperator> {
    let mut acc = DenseOperator::zeros(n_sites)?;
    for l in 1..n_sites {
        let pair = site_operator(PauliAxis::X, l, n_sites)?
            .matmul(&site_operator(PauliAxis::X, l + 1, n_sites)?)?;
        acc = acc.add(&pair)?;
    }
    Ok(acc)
}

/// Site-reversal permutation `R|b_1…b_N⟩ = |b_N…b_1⟩`.
pub fn reflection_operator(n_sites: usize) -> Result<DenseOperator> {
    if n_sites % 2 != 0 {
        return Err(AlgebraError::OddChain(n_sites));
    }
    let mut op = DenseOperator::zeros(n_sites)?;
    let dim = op.dim;
    for b in 0..dim {
        op.data[reverse_bits(b, n_sites) * dim + b] = ONE;
    }
    Ok(op)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    /// `exp(-iθ σ_l^z)`
    DiagonalZ,
    /// `exp(-iθ σ_b^x σ_{b+1}^x)`
    XBond,
    /// `exp(-iθ σ_l^x)`
    XField,
}

/// A single exponential `exp(-i·angle·P)` with `P` a one- or two-site Pauli string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateLayer {
    pub kind: GateKind,
    /// Site (or left site of the bond), 1-based.
    pub index: usize,
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `G · op`
    Left,
    /// `op · G†`
    RightConjugate,
}

impl GateLayer {
    pub fn diagonal_z(site: usize, angle: f64) -> Self {
        Self { kind: GateKind::DiagonalZ, index: site, angle }
    }

    pub fn x_bond(bond: usize, angle: f64) -> Self {
        Self { kind: GateKind::XBond, index: bond, angle }
    }

    pub fn x_field(site: usize, angle: f64) -> Self {
        Self { kind: GateKind::XField, index: site, angle }
    }

    pub fn validate(&self, n_sites: usize) -> Result<()> {
        check_chain(n_sites)?;
        match self.kind {
            GateKind::DiagonalZ | GateKind::XField => check_site(n_sites, self.index),
            GateKind::XBond => {
                if self.index == 0 || self.index >= n_sites {
                    Err(AlgebraError::BondOutOfRange { bond: self.index, max: n_sites.saturating_sub(1) })
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Bit-flip mask of the generator, `None` for diagonal layers.
    pub fn flip_mask(&self, n_sites: usize) -> Option<usize> {
        match self.kind {
            GateKind::DiagonalZ => None,
            GateKind::XField => Some(site_mask(n_sites, self.index)),
            GateKind::XBond => {
                Some(site_mask(n_sites, self.index) | site_mask(n_sites, self.index + 1))
            }
        }
    }

    /// Diagonal of the gate, `exp(-iθ z_l(j))` (diagonal layers only).
    pub fn phases(&self, n_sites: usize) -> Option<Vec<C64>> {
        (self.kind == GateKind::DiagonalZ).then(|| {
            let plus = C64::from_polar(1.0, -self.angle);
            let minus = plus.conj();
            let mask = site_mask(n_sites, self.index);
            (0..1usize << n_sites)
                .map(|j| if j & mask == 0 { plus } else { minus })
                .collect()
        })
    }

    /// Right-multiplication step for `G` (`adjoint = false`) or `G†`.
    pub fn row_op(&self, n_sites: usize, adjoint: bool) -> RowOp {
        let angle = if adjoint { -self.angle } else { self.angle };
        let layer = GateLayer { angle, ..*self };
        match self.flip_mask(n_sites) {
            // G symmetric: (r G)_j = cos θ r_j - i sin θ r_{j^m}
            Some(mask) => RowOp::Rotate { mask, cos: angle.cos(), sin: -angle.sin() },
            None => RowOp::Phase(layer.phases(n_sites).expect("diagonal layer")),
        }
    }

    /// Dense form `cos θ·I - i sin θ·P` (uses `P² = I`).
    pub fn dense(&self, n_sites: usize) -> Result<DenseOperator> {
        self.validate(n_sites)?;
        let mut op = DenseOperator::identity(n_sites)?;
        apply_gate_layer_in_place(&mut op, self, Side::Left)?;
        Ok(op)
    }
}

/// Multiplies a single gate into `op` on the requested side.
pub fn apply_gate_layer(op: &DenseOperator, layer: &GateLayer, side: Side) -> Result<DenseOperator> {
    let mut out = op.clone();
    apply_gate_layer_in_place(&mut out, layer, side)?;
    Ok(out)
}

pub fn apply_gate_layer_in_place(op: &mut DenseOperator, layer: &GateLayer, side: Side) -> Result<()> {
    layer.validate(op.n_sites)?;
    let (n, dim) = (op.n_sites, op.dim);
    match side {
        Side::RightConjugate => {
            let mut prog = RowProgram::new();
            prog.push(layer.row_op(n, true));
            prog.apply_to_rows(&mut op.data, dim);
        }
        Side::Left => match layer.flip_mask(n) {
            Some(mask) => {
                kernel::rotate_rows(&mut op.data, dim, mask, layer.angle.cos(), -layer.angle.sin())
            }
            None => {
                let ph = layer.phases(n).expect("diagonal layer");
                for (row, p) in op.data.chunks_exact_mut(dim).zip(&ph) {
                    row.iter_mut().for_each(|z| *z *= p);
                }
            }
        },
    }
    Ok(())
}
