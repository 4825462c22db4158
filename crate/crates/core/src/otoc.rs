//! Observable families and the out-of-time-order correlator
//! `C(n) = -Tr([W(n), V]²) / (2 d_A d_B) = C2(n) - C4(n)`.
//!
//! `V` is always a weighted sum of single-site Paulis along one axis, so
//! `X = W(n)·V` costs `O(|sites|·D²)`; then `C2 = ‖X‖_F² / D` and
//! `C4 = Re Tr(X²) / D`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use rayon::prelude::*;
use thiserror::Error;

use crate::kernel;
use crate::algebra::{self, site_mask, AlgebraError, DenseOperator, PauliAxis};
use crate::evolution::{ChainParams, EvolutionError, EvolutionState, HeisenbergConvention};
use crate::schedules::QuenchProtocol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtocError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error("observable sites ({0}, {1}) must be distinct")]
    SameSite(usize, usize),
    #[error("trace has imaginary part {0:.3e}; W(n) has lost Hermiticity")]
    ImaginaryTrace(f64),
    #[error("n_max must be at least 1")]
    EmptySeries,
}

pub type Result<T> = std::result::Result<T, OtocError>;

/// Imaginary residue of a normalized trace that is treated as broken Hermiticity.
pub const IMAGINARY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum ObservableFamily {
    #[serde(rename = "block-x")]
    BlockX,
    #[serde(rename = "block-z")]
    BlockZ,
    #[serde(rename = "local-x")]
    LocalPauliX,
    #[serde(rename = "local-z")]
    LocalPauliZ,
}

impl ObservableFamily {
    pub const ALL: [ObservableFamily; 4] = [
        ObservableFamily::BlockX,
        ObservableFamily::BlockZ,
        ObservableFamily::LocalPauliX,
        ObservableFamily::LocalPauliZ,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObservableFamily::BlockX => "block-x",
            ObservableFamily::BlockZ => "block-z",
            ObservableFamily::LocalPauliX => "local-x",
            ObservableFamily::LocalPauliZ => "local-z",
        }
    }

    pub fn axis(self) -> PauliAxis {
        match self {
            ObservableFamily::BlockX | ObservableFamily::LocalPauliX => PauliAxis::X,
            ObservableFamily::BlockZ | ObservableFamily::LocalPauliZ => PauliAxis::Z,
        }
    }

    pub fn is_block(self) -> bool {
        matches!(self, ObservableFamily::BlockX | ObservableFamily::BlockZ)
    }
}

impl std::str::FromStr for ObservableFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ObservableFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s.trim())
            .ok_or_else(|| format!("unknown observable '{s}' (expected block-x, block-z, local-x or local-z)"))
    }
}

/// Which pair `(W, V)` to correlate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub family: ObservableFamily,
    /// Sites of `W` and `V` for the local families; `None` means `(1, N/2)`.
    pub sites: Option<(usize, usize)>,
}

impl ObservableSpec {
    pub fn new(family: ObservableFamily) -> Self {
        Self { family, sites: None }
    }

    pub fn local(family: ObservableFamily, w_site: usize, v_site: usize) -> Self {
        Self { family, sites: Some((w_site, v_site)) }
    }

    fn check(&self, n_sites: usize) -> Result<()> {
        if n_sites < 2 {
            return Err(AlgebraError::ChainTooShort { min: 2, got: n_sites }.into());
        }
        if n_sites % 2 != 0 {
            return Err(AlgebraError::OddChain(n_sites).into());
        }
        if !self.family.is_block() {
            let (a, b) = self.local_sites(n_sites);
            for s in [a, b] {
                if s == 0 || s > n_sites {
                    return Err(AlgebraError::SiteOutOfRange { site: s, n_sites }.into());
                }
            }
            if a == b {
                return Err(OtocError::SameSite(a, b));
            }
        }
        Ok(())
    }

    fn local_sites(&self, n_sites: usize) -> (usize, usize) {
        self.sites.unwrap_or((1, n_sites / 2))
    }

    /// `W` and `V` as Pauli sums.
    pub fn terms(&self, n_sites: usize) -> Result<(PauliSum, PauliSum)> {
        self.check(n_sites)?;
        let axis = self.family.axis();
        let half = n_sites / 2;
        Ok(if self.family.is_block() {
            let c = 2.0 / n_sites as f64;
            (
                PauliSum { axis, coefficient: c, sites: (1..=half).collect() },
                PauliSum { axis, coefficient: c, sites: (half + 1..=n_sites).collect() },
            )
        } else {
            let (a, b) = self.local_sites(n_sites);
            (
                PauliSum { axis, coefficient: 1.0, sites: vec![a] },
                PauliSum { axis, coefficient: 1.0, sites: vec![b] },
            )
        })
    }

    /// Saturation value used to normalize `C(n)`: `4/N²` for blocks, 1 for single sites.
    pub fn c_inf(&self, n_sites: usize) -> f64 {
        if self.family.is_block() {
            4.0 / (n_sites * n_sites) as f64
        } else {
            1.0
        }
    }
}

/// `coefficient · Σ_{s ∈ sites} σ_s^axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    pub axis: PauliAxis,
    pub coefficient: f64,
    pub sites: Vec<usize>,
}

impl PauliSum {
    pub fn to_dense(&self, n_sites: usize) -> Result<DenseOperator> {
        let mut acc = DenseOperator::zeros(n_sites)?;
        for &s in &self.sites {
            acc = acc.add(&algebra::site_operator(self.axis, s, n_sites)?)?;
        }
        Ok(acc.scaled(C64::new(self.coefficient, 0.0)))
    }

    /// Row `i` contributions to `‖X‖²` and `⟨Y, X⟩` with `X = W·self`, `Y = self·W`.
    #[inline(always)]
    fn row_traces(&self, w: &DenseOperator, i: usize, diag: &[f64], x: &mut [C64], y: &mut [C64]) -> (f64, C64) {
        let n = w.n_sites();
        let c = self.coefficient;
        let (mut c2, mut c4) = (0.0, algebra::ZERO);
        match self.axis {
            PauliAxis::X => {
                let masks: Vec<usize> = self.sites.iter().map(|&s| site_mask(n, s)).collect();
                let wi = w.row(i);
                let shifted: Vec<&[C64]> = masks.iter().map(|&m| w.row(i ^ m)).collect();
                for j in 0..wi.len() {
                    let mut a = algebra::ZERO;
                    let mut b = algebra::ZERO;
                    for (&m, r) in masks.iter().zip(&shifted) {
                        // SAFETY: m < dim = wi.len() = r.len() and j < dim, so j ^ m < dim
                        unsafe {
                            a += *wi.get_unchecked(j ^ m);
                            b += *r.get_unchecked(j);
                        }
                    }
                    accumulate(&mut c2, &mut c4, a * c, b * c);
                }
            }
            PauliAxis::Z => {
                let vi = diag[i];
                for (&wij, &vj) in w.row(i).iter().zip(diag) {
                    accumulate(&mut c2, &mut c4, wij * vj, wij * vi);
                }
            }
            PauliAxis::Y => {
                self.right_multiply_row(w.row(i), n, x);
                self.left_multiply_row(w, i, y);
                for (&a, &b) in x.iter().zip(y.iter()) {
                    accumulate(&mut c2, &mut c4, a, b);
                }
            }
        }
        (c2, c4)
    }

    /// Writes row `i` of `self·W` into `out`.
    fn left_multiply_row(&self, w: &DenseOperator, i: usize, out: &mut [C64]) {
        let n_sites = w.n_sites();
        let c = self.coefficient;
        match self.axis {
            PauliAxis::Z => {
                let v: f64 = self.sites.iter().map(|&s| algebra::z_sign(i, n_sites, s)).sum();
                for (o, a) in out.iter_mut().zip(w.row(i)) {
                    *o = a * (c * v);
                }
            }
            PauliAxis::X | PauliAxis::Y => {
                out.iter_mut().for_each(|z| *z = algebra::ZERO);
                for &s in &self.sites {
                    let m = site_mask(n_sites, s);
                    let f = match self.axis {
                        PauliAxis::X => algebra::ONE,
                        _ if i & m == 0 => -algebra::IM,
                        _ => algebra::IM,
                    };
                    for (o, a) in out.iter_mut().zip(w.row(i ^ m)) {
                        *o += a * f;
                    }
                }
                out.iter_mut().for_each(|z| *z *= c);
            }
        }
    }

    /// Writes row `i` of `W·self` into `out`.
    fn right_multiply_row(&self, w_row: &[C64], n_sites: usize, out: &mut [C64]) {
        let c = self.coefficient;
        match self.axis {
            PauliAxis::X => {
                out.iter_mut().for_each(|z| *z = algebra::ZERO);
                for &s in &self.sites {
                    let m = site_mask(n_sites, s);
                    for (j, o) in out.iter_mut().enumerate() {
                        *o += w_row[j ^ m];
                    }
                }
                out.iter_mut().for_each(|z| *z *= c);
            }
            PauliAxis::Z => {
                for (j, o) in out.iter_mut().enumerate() {
                    let v: f64 = self.sites.iter().map(|&s| algebra::z_sign(j, n_sites, s)).sum();
                    *o = w_row[j] * (c * v);
                }
            }
            PauliAxis::Y => {
                out.iter_mut().for_each(|z| *z = algebra::ZERO);
                for &s in &self.sites {
                    let m = site_mask(n_sites, s);
                    // (σ^y)_{kj} = -i for k=0,j=1 and +i for k=1,j=0 on the site bit
                    for (j, o) in out.iter_mut().enumerate() {
                        let sign = if j & m == 0 { algebra::IM } else { -algebra::IM };
                        *o += w_row[j ^ m] * sign;
                    }
                }
                out.iter_mut().for_each(|z| *z *= c);
            }
        }
    }
}

/// Builds `(W0, V0)` for a family on an even chain.
pub fn make_observables(spec: &ObservableSpec, n_sites: usize) -> Result<(DenseOperator, DenseOperator)> {
    let (w, v) = spec.terms(n_sites)?;
    Ok((w.to_dense(n_sites)?, v.to_dense(n_sites)?))
}

/// Two- and four-point pieces of one OTOC sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtocPoint {
    pub c2: f64,
    pub c4: f64,
    pub c: f64,
}

/// `C2`, `C4` and `C` for a Hermitian `W(n)` against `V0`.
///
/// With `X = W V` and Hermitian `W`, `V`: `X_ji = conj((V W)_ij)`, so
/// `Tr(X²) = ⟨V W, W V⟩_F` and every sum runs row by row without storing `X`.
pub fn otoc_point(w_n: &DenseOperator, v0: &PauliSum) -> Result<OtocPoint> {
    let (n, dim) = (w_n.n_sites(), w_n.dim());
    let diag: Vec<f64> = match v0.axis {
        PauliAxis::Z => (0..dim)
            .map(|k| v0.coefficient * v0.sites.iter().map(|&s| algebra::z_sign(k, n, s)).sum::<f64>())
            .collect(),
        _ => Vec::new(),
    };
    let rows: Vec<(f64, C64)> = (0..dim)
        .into_par_iter()
        .map_init(
            || (vec![algebra::ZERO; dim], vec![algebra::ZERO; dim]),
            |(x, y), i| kernel::dispatch(|| v0.row_traces(w_n, i, &diag, x, y)),
        )
        .collect();
    let (mut c2, mut c4) = (0.0, algebra::ZERO);
    for (p, q) in rows {
        c2 += p;
        c4 += q;
    }
    let d = dim as f64;
    let (c2, c4) = (c2 / d, c4 / d);
    if c4.im.abs() > IMAGINARY_TOLERANCE {
        return Err(OtocError::ImaginaryTrace(c4.im));
    }
    Ok(OtocPoint { c2, c4: c4.re, c: c2 - c4.re })
}

// Identical arithmetic on both sums, so x == y gives c2 == c4 exactly.
#[inline(always)]
fn accumulate(c2: &mut f64, c4: &mut C64, a: C64, b: C64) {
    *c2 += a.re * a.re + a.im * a.im;
    *c4 += C64::new(a.re * b.re + a.im * b.im, a.im * b.re - a.re * b.im);
}

/// `-Tr([W, V]²) / (2D)` by dense products; `O(D³)`, for cross-checks.
pub fn otoc_from_commutator(w: &DenseOperator, v: &DenseOperator) -> Result<f64> {
    let comm = w.commutator(v)?;
    let tr = comm.matmul(&comm)?.trace();
    Ok(-tr.re / (2.0 * w.dim() as f64))
}

/// OTOC samples for kicks `0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtocSeries {
    pub spec: ObservableSpec,
    pub n_sites: usize,
    pub c2: Vec<f64>,
    pub c4: Vec<f64>,
    pub c: Vec<f64>,
    pub c_inf: f64,
}

impl OtocSeries {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// Largest kick index in the series.
    pub fn n_max(&self) -> usize {
        self.c.len().saturating_sub(1)
    }

    /// Subsystem dimensions `d_A = d_B = 2^{N/2}`.
    pub fn subsystem_dims(&self) -> (usize, usize) {
        let d = 1usize << (self.n_sites / 2);
        (d, d)
    }

    /// `C(n) / C(∞)`.
    pub fn normalized(&self) -> Vec<f64> {
        self.c.iter().map(|c| c / self.c_inf).collect()
    }

    fn push(&mut self, p: OtocPoint) {
        self.c2.push(p.c2);
        self.c4.push(p.c4);
        self.c.push(p.c);
    }
}

/// Options for [`run_otoc_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub convention: HeisenbergConvention,
    /// Stop once `C(n)/C(∞)` exceeds this value (the sample that crossed is kept).
    pub stop_above: Option<f64>,
}

/// OTOC series with the default (main-text) Heisenberg convention.
pub fn run_otoc(
    params: &ChainParams,
    protocol: &QuenchProtocol,
    spec: &ObservableSpec,
    n_max: usize,
) -> Result<OtocSeries> {
    run_otoc_with(params, protocol, spec, n_max, RunOptions::default())
}

pub fn run_otoc_with(
    params: &ChainParams,
    protocol: &QuenchProtocol,
    spec: &ObservableSpec,
    n_max: usize,
    opts: RunOptions,
) -> Result<OtocSeries> {
    if n_max == 0 {
        return Err(OtocError::EmptySeries);
    }
    let n = params.n_sites;
    let (w_terms, v_terms) = spec.terms(n)?;
    let w0 = w_terms.to_dense(n)?;
    let mut state = EvolutionState::new(*params, *protocol, w0, opts.convention, false)?;
    let mut series = OtocSeries {
        spec: *spec,
        n_sites: n,
        c2: Vec::with_capacity(n_max + 1),
        c4: Vec::with_capacity(n_max + 1),
        c: Vec::with_capacity(n_max + 1),
        c_inf: spec.c_inf(n),
    };
    series.push(otoc_point(state.observable(), &v_terms)?);
    for _ in 0..n_max {
        state.advance()?;
        let p = otoc_point(state.observable(), &v_terms)?;
        series.push(p);
        if let Some(limit) = opts.stop_above {
            if p.c / series.c_inf > limit {
                break;
            }
        }
    }
    state.check_norm()?;
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::PauliAxis;

    #[test]
    fn block_x_two_sites_is_bare_pauli() {
        let (w, v) = make_observables(&ObservableSpec::new(ObservableFamily::BlockX), 2).unwrap();
        assert_eq!(w, algebra::pauli_on_site(PauliAxis::X, 1, 2).unwrap());
        assert_eq!(v, algebra::pauli_on_site(PauliAxis::X, 2, 2).unwrap());
    }

    #[test]
    fn block_x_four_sites_trace_of_square() {
        let (w, _) = make_observables(&ObservableSpec::new(ObservableFamily::BlockX), 4).unwrap();
        // (4/N²)·(N/2)·D
        let tr = w.matmul(&w).unwrap().trace();
        assert!((tr.re - 8.0).abs() < 1e-12 && tr.im.abs() < 1e-12);
    }

    #[test]
    fn initial_observables_commute() {
        for fam in ObservableFamily::ALL {
            let (w, v) = make_observables(&ObservableSpec::new(fam), 6).unwrap();
            assert_eq!(w.commutator(&v).unwrap().max_norm(), 0.0, "{fam:?}");
        }
    }

    #[test]
    fn observable_validation() {
        let bad = ObservableSpec::local(ObservableFamily::LocalPauliX, 2, 2);
        assert_eq!(make_observables(&bad, 4).unwrap_err(), OtocError::SameSite(2, 2));
        let out = ObservableSpec::local(ObservableFamily::LocalPauliZ, 1, 9);
        assert!(make_observables(&out, 4).is_err());
        assert!(make_observables(&ObservableSpec::new(ObservableFamily::BlockZ), 5).is_err());
    }

    #[test]
    fn product_rows_match_dense_product() {
        let n = 4;
        let w = algebra::ising_xx(n).unwrap().add(&algebra::field_sum(PauliAxis::Z, n).unwrap()).unwrap();
        for axis in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z] {
            let v = PauliSum { axis, coefficient: 0.5, sites: vec![3, 4] };
            let vd = v.to_dense(n).unwrap();
            let right = w.matmul(&vd).unwrap();
            let left = vd.matmul(&w).unwrap();
            let mut row = vec![algebra::ZERO; 16];
            for i in 0..16 {
                v.right_multiply_row(w.row(i), n, &mut row);
                for j in 0..16 {
                    assert!((row[j] - right.get(i, j)).norm() < 1e-14, "{axis:?}");
                }
                v.left_multiply_row(&w, i, &mut row);
                for j in 0..16 {
                    assert!((row[j] - left.get(i, j)).norm() < 1e-14, "{axis:?}");
                }
            }
        }
    }

    #[test]
    fn point_matches_commutator_form() {
        use crate::evolution::EvolutionState;
        let params = ChainParams::new(6, 1.0, std::f64::consts::PI / 4.0);
        let proto = QuenchProtocol::linear(1.0, 1.0, 0.1);
        for fam in ObservableFamily::ALL {
            let spec = ObservableSpec::new(fam);
            let (w, v) = spec.terms(6).unwrap();
            let vd = v.to_dense(6).unwrap();
            let mut st =
                EvolutionState::new(params, proto, w.to_dense(6).unwrap(), HeisenbergConvention::UWUdag, false)
                    .unwrap();
            for _ in 0..3 {
                st.advance().unwrap();
                let p = otoc_point(st.observable(), &v).unwrap();
                let direct = otoc_from_commutator(st.observable(), &vd).unwrap();
                assert!((p.c - direct).abs() < 1e-12, "{fam:?}: {} vs {direct}", p.c);
            }
        }
    }

    #[test]
    fn series_starts_at_zero() {
        let params = ChainParams::new(4, 1.0, 0.3);
        let proto = QuenchProtocol::linear(0.5, 1.0, 0.1);
        for fam in ObservableFamily::ALL {
            let s = run_otoc(&params, &proto, &ObservableSpec::new(fam), 5).unwrap();
            assert_eq!(s.len(), 6);
            assert_eq!(s.c[0], 0.0, "{fam:?}");
        }
        let err = run_otoc(&params, &proto, &ObservableSpec::new(ObservableFamily::BlockX), 0);
        assert_eq!(err.unwrap_err(), OtocError::EmptySeries);
    }

    #[test]
    fn c_inf_per_family() {
        assert_eq!(ObservableSpec::new(ObservableFamily::BlockX).c_inf(12), 4.0 / 144.0);
        assert_eq!(ObservableSpec::new(ObservableFamily::BlockZ).c_inf(12), 4.0 / 144.0);
        assert_eq!(ObservableSpec::new(ObservableFamily::LocalPauliZ).c_inf(12), 1.0);
    }

    #[test]
    fn family_names_round_trip() {
        for f in ObservableFamily::ALL {
            assert_eq!(f.as_str().parse::<ObservableFamily>().unwrap(), f);
        }
    }
}
