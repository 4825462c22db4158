//! Per-kick Floquet maps, cumulative time-ordered products and Heisenberg
//! evolution of observables.
//!
//! One map is `U(n) = [∏_l exp(-iθ_J σ_l^x σ_{l+1}^x - iθ_x σ_l^x)] · [∏_l exp(-iθ_z σ_l^z)]`,
//! the z-kick being the right factor (it acts first). Conjugation never forms
//! `U` densely: both sides are done as row programs with a transpose between
//! them, `U A = (Aᵀ Uᵀ)ᵀ`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

use crate::algebra::{self, AlgebraError, DenseOperator, GateKind, GateLayer, Side};
use crate::kernel::{RowOp, RowProgram};
use crate::schedules::{fields_at_kick, KickFields, QuenchProtocol, ScheduleError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("kicks are numbered from 1")]
    KickIndexZero,
    #[error("Frobenius norm drifted by {relative:.3e} (relative) after {kick} kicks")]
    NormDrift { kick: usize, relative: f64 },
    #[error("chain needs at least 2 sites (got {0})")]
    ChainTooShort(usize),
}

pub type Result<T> = std::result::Result<T, EvolutionError>;

/// Relative Frobenius drift tolerated on the evolved observable.
pub const NORM_DRIFT_TOLERANCE: f64 = 1e-8;
/// Kicks between two norm-drift checks.
pub const NORM_CHECK_INTERVAL: usize = 50;

/// Static chain parameters shared by every kick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub n_sites: usize,
    /// Ising coupling `J`.
    pub coupling: f64,
    /// Kick period `τ`.
    pub period: f64,
}

impl ChainParams {
    pub fn new(n_sites: usize, coupling: f64, period: f64) -> Self {
        Self { n_sites, coupling, period }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(EvolutionError::ChainTooShort(self.n_sites));
        }
        if self.n_sites > algebra::MAX_SITES {
            return Err(AlgebraError::ChainTooLong(self.n_sites).into());
        }
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(ScheduleError::NonPositivePeriod(self.period).into());
        }
        if !self.coupling.is_finite() {
            return Err(ScheduleError::NonFinite { name: "J" }.into());
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_sites
    }
}

/// Which side the cumulative unitary multiplies the observable from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum HeisenbergConvention {
    /// `W(n) = U(n) W U(n)†`, `U(n) = U_x(n)⋯U_x(1)`.
    #[default]
    #[serde(rename = "U_W_Udag")]
    UWUdag,
    /// `W(n) = (U_x(1)⋯U_x(n))† W (U_x(1)⋯U_x(n))`.
    #[serde(rename = "Udag_W_U")]
    UdagWU,
}

impl HeisenbergConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            HeisenbergConvention::UWUdag => "U_W_Udag",
            HeisenbergConvention::UdagWU => "Udag_W_U",
        }
    }
}

impl std::str::FromStr for HeisenbergConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "U_W_Udag" => Ok(Self::UWUdag),
            "Udag_W_U" => Ok(Self::UdagWU),
            other => Err(format!("unknown convention '{other}' (expected U_W_Udag or Udag_W_U)")),
        }
    }
}

/// Row-program form of the x-type (bond and longitudinal) layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XStrategy {
    /// One paired-index rotation pass per layer.
    PairedRotations,
    /// All x-type layers at once as a Walsh-Hadamard transform, a phase and a
    /// second transform.
    #[default]
    Hadamard,
}

/// One kick's unitary as an ordered list of commuting-within-kind layers.
///
/// The list is in application order: the first layer acts first on states,
/// so `U = L_k ⋯ L_1`.
#[derive(Debug)]
pub struct FloquetStep {
    kick: usize,
    n_sites: usize,
    fields: KickFields,
    layers: Vec<GateLayer>,
    strategy: XStrategy,
    dense: OnceLock<DenseOperator>,
}

impl Clone for FloquetStep {
    fn clone(&self) -> Self {
        Self {
            kick: self.kick,
            n_sites: self.n_sites,
            fields: self.fields,
            layers: self.layers.clone(),
            strategy: self.strategy,
            dense: OnceLock::new(),
        }
    }
}

#[derive(Clone, Copy)]
enum Order {
    Forward,
    Reverse,
}

impl FloquetStep {
    pub fn from_fields(n_sites: usize, kick: usize, fields: KickFields) -> Self {
        let mut layers = Vec::with_capacity(3 * n_sites);
        layers.extend((1..=n_sites).map(|l| GateLayer::diagonal_z(l, fields.theta_z)));
        layers.extend((1..n_sites).map(|b| GateLayer::x_bond(b, fields.theta_j)));
        layers.extend((1..=n_sites).map(|l| GateLayer::x_field(l, fields.theta_x)));
        Self { kick, n_sites, fields, layers, strategy: XStrategy::default(), dense: OnceLock::new() }
    }

    pub fn kick(&self) -> usize {
        self.kick
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn fields(&self) -> KickFields {
        self.fields
    }

    pub fn layers(&self) -> &[GateLayer] {
        &self.layers
    }

    /// Dense unitary, built once by applying the layers to the identity.
    pub fn dense(&self) -> &DenseOperator {
        self.dense.get_or_init(|| {
            let mut u = DenseOperator::identity(self.n_sites).expect("validated chain");
            for layer in &self.layers {
                algebra::apply_gate_layer_in_place(&mut u, layer, Side::Left).expect("validated layer");
            }
            u
        })
    }

    /// Selects how x-type layers are compiled into row programs.
    pub fn with_strategy(mut self, strategy: XStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn strategy(&self) -> XStrategy {
        self.strategy
    }

    fn program(&self, order: Order, adjoint: bool) -> RowProgram {
        let n = self.n_sites;
        let sign = if adjoint { -1.0 } else { 1.0 };
        let active = |want_x: bool| {
            self.layers.iter().filter(move |l| (l.kind != GateKind::DiagonalZ) == want_x && l.angle != 0.0)
        };
        let mut z_part = RowProgram::new();
        active(false).for_each(|l| z_part.push(l.row_op(n, adjoint)));
        let mut x_part = RowProgram::new();
        match self.strategy {
            XStrategy::PairedRotations => {
                // commuting layers sorted by mask so low-bit ones batch per cache chunk
                let mut ops: Vec<_> = active(true).map(|l| (l.flip_mask(n).unwrap_or(0), l.row_op(n, adjoint))).collect();
                ops.sort_by_key(|(m, _)| *m);
                ops.into_iter().for_each(|(_, op)| x_part.push(op));
            }
            XStrategy::Hadamard => {
                // H P_m H = D·diag((-1)^{|k∧m|}), so the whole x-block is H·Λ·H / D
                let dim = 1usize << n;
                let mut angle = vec![0.0f64; dim];
                let mut any = false;
                for l in active(true) {
                    any = true;
                    let m = l.flip_mask(n).expect("x-type layer");
                    for (k, a) in angle.iter_mut().enumerate() {
                        *a += if (k & m).count_ones() % 2 == 0 { l.angle } else { -l.angle };
                    }
                }
                if any {
                    let scale = 1.0 / dim as f64;
                    x_part.push(RowOp::Hadamard);
                    x_part.push(RowOp::Phase(angle.iter().map(|a| C64::from_polar(scale, -sign * a)).collect()));
                    x_part.push(RowOp::Hadamard);
                }
            }
        }
        let (first, second) = match order {
            Order::Forward => (z_part, x_part),
            Order::Reverse => (x_part, z_part),
        };
        let mut prog = first;
        second.ops().iter().cloned().for_each(|op| prog.push(op));
        prog
    }

    /// Row program for `r ← r·U`.
    pub fn right_program(&self) -> RowProgram {
        self.program(Order::Reverse, false)
    }

    /// Row program for `r ← r·U†`.
    pub fn right_adjoint_program(&self) -> RowProgram {
        self.program(Order::Forward, true)
    }

    /// Row program for `r ← r·Uᵀ` (every layer is a symmetric matrix).
    pub fn right_transpose_program(&self) -> RowProgram {
        self.program(Order::Forward, false)
    }

    /// Row program for `r ← r·conj(U)`.
    pub fn right_conjugate_program(&self) -> RowProgram {
        self.program(Order::Reverse, true)
    }

    /// Heisenberg step on `w` in place.
    pub fn conjugate(&self, w: &mut DenseOperator, convention: HeisenbergConvention) -> Result<()> {
        self.check_shape(w)?;
        let (first, second) = match convention {
            // A = W U†, (U A)ᵀ = Aᵀ Uᵀ
            HeisenbergConvention::UWUdag => (self.right_adjoint_program(), self.right_transpose_program()),
            // A = W U, (U† A)ᵀ = Aᵀ conj(U)
            HeisenbergConvention::UdagWU => (self.right_program(), self.right_conjugate_program()),
        };
        let dim = w.dim();
        first.apply_to_rows(w.as_mut_slice(), dim);
        w.transpose_in_place();
        second.apply_to_rows(w.as_mut_slice(), dim);
        w.transpose_in_place();
        Ok(())
    }

    /// Heisenberg step for Hermitian `w`, using one transpose instead of two:
    /// with `A = W U†`, `U W U† = (U A)† = A† U†`.
    pub fn conjugate_hermitian(&self, w: &mut DenseOperator, convention: HeisenbergConvention) -> Result<()> {
        self.check_shape(w)?;
        let prog = match convention {
            HeisenbergConvention::UWUdag => self.right_adjoint_program(),
            HeisenbergConvention::UdagWU => self.right_program(),
        };
        let dim = w.dim();
        prog.apply_to_rows(w.as_mut_slice(), dim);
        w.adjoint_in_place();
        prog.apply_to_rows(w.as_mut_slice(), dim);
        Ok(())
    }

    /// `u ← U·u`.
    pub fn left_multiply(&self, u: &mut DenseOperator) -> Result<()> {
        self.check_shape(u)?;
        let dim = u.dim();
        u.transpose_in_place();
        self.right_transpose_program().apply_to_rows(u.as_mut_slice(), dim);
        u.transpose_in_place();
        Ok(())
    }

    fn check_shape(&self, op: &DenseOperator) -> Result<()> {
        if op.n_sites() != self.n_sites {
            return Err(AlgebraError::DimensionMismatch { expected: 1 << self.n_sites, got: op.dim() }.into());
        }
        Ok(())
    }
}

/// Builds the `n`-th map (`n ≥ 1`).
pub fn build_kick(params: &ChainParams, protocol: &QuenchProtocol, n: usize) -> Result<FloquetStep> {
    params.validate()?;
    if n == 0 {
        return Err(EvolutionError::KickIndexZero);
    }
    let fields = fields_at_kick(protocol, params.coupling, params.period, n)?;
    Ok(FloquetStep::from_fields(params.n_sites, n, fields))
}

/// Running product `U(n) = U_x(n)⋯U_x(1)`, kept transposed so that each new
/// factor is a pure row program: `U(n)ᵀ = U(n-1)ᵀ U_x(n)ᵀ`.
#[derive(Debug, Clone)]
pub struct UnitarySweep {
    params: ChainParams,
    protocol: QuenchProtocol,
    kick: usize,
    transposed: DenseOperator,
}

impl UnitarySweep {
    pub fn new(params: ChainParams, protocol: QuenchProtocol) -> Result<Self> {
        params.validate()?;
        protocol.validate()?;
        let transposed = DenseOperator::identity(params.n_sites)?;
        Ok(Self { params, protocol, kick: 0, transposed })
    }

    pub fn kick(&self) -> usize {
        self.kick
    }

    pub fn advance(&mut self) -> Result<()> {
        let step = build_kick(&self.params, &self.protocol, self.kick + 1)?;
        let dim = self.transposed.dim();
        step.right_transpose_program().apply_to_rows(self.transposed.as_mut_slice(), dim);
        self.kick += 1;
        Ok(())
    }

    /// `U(n)ᵀ`; entry `(j, i)` is `U(n)_{ij}`.
    pub fn transposed(&self) -> &DenseOperator {
        &self.transposed
    }

    pub fn unitary(&self) -> DenseOperator {
        self.transposed.transpose()
    }
}

/// Time-ordered product of the first `n` maps, kick 1 rightmost.
pub fn cumulative_unitary(params: &ChainParams, protocol: &QuenchProtocol, n: usize) -> Result<DenseOperator> {
    if n == 0 {
        return Err(EvolutionError::KickIndexZero);
    }
    let mut sweep = UnitarySweep::new(*params, *protocol)?;
    for _ in 0..n {
        sweep.advance()?;
    }
    Ok(sweep.unitary())
}

/// Heisenberg-evolved observable plus, optionally, the cumulative unitary.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    params: ChainParams,
    protocol: QuenchProtocol,
    convention: HeisenbergConvention,
    kick: usize,
    observable: DenseOperator,
    initial_norm: f64,
    hermitian: bool,
    unitary: Option<UnitarySweep>,
}

impl EvolutionState {
    pub fn new(
        params: ChainParams,
        protocol: QuenchProtocol,
        w0: DenseOperator,
        convention: HeisenbergConvention,
        track_unitary: bool,
    ) -> Result<Self> {
        params.validate()?;
        protocol.validate()?;
        if w0.n_sites() != params.n_sites {
            return Err(AlgebraError::DimensionMismatch { expected: params.dim(), got: w0.dim() }.into());
        }
        let unitary = track_unitary.then(|| UnitarySweep::new(params, protocol)).transpose()?;
        let initial_norm = w0.frobenius_norm();
        let hermitian = w0.hermiticity_defect() == 0.0;
        Ok(Self { params, protocol, convention, kick: 0, observable: w0, initial_norm, hermitian, unitary })
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn protocol(&self) -> &QuenchProtocol {
        &self.protocol
    }

    pub fn kick(&self) -> usize {
        self.kick
    }

    /// `W(n)` at the current kick.
    pub fn observable(&self) -> &DenseOperator {
        &self.observable
    }

    pub fn unitary_sweep(&self) -> Option<&UnitarySweep> {
        self.unitary.as_ref()
    }

    /// Applies map `n + 1`.
    pub fn advance(&mut self) -> Result<()> {
        let step = build_kick(&self.params, &self.protocol, self.kick + 1)?;
        if self.hermitian {
            step.conjugate_hermitian(&mut self.observable, self.convention)?;
        } else {
            step.conjugate(&mut self.observable, self.convention)?;
        }
        if let Some(sweep) = self.unitary.as_mut() {
            sweep.advance()?;
        }
        self.kick += 1;
        if self.kick % NORM_CHECK_INTERVAL == 0 {
            self.check_norm()?;
        }
        Ok(())
    }

    pub fn check_norm(&self) -> Result<()> {
        if self.initial_norm == 0.0 {
            return Ok(());
        }
        let relative = (self.observable.frobenius_norm() - self.initial_norm).abs() / self.initial_norm;
        if relative > NORM_DRIFT_TOLERANCE {
            return Err(EvolutionError::NormDrift { kick: self.kick, relative });
        }
        Ok(())
    }
}
