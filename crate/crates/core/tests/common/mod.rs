//! Independent dense reference: Kronecker-built Paulis, per-kick
//! exponentials by Hermitian eigendecomposition, explicit traces.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use std::f64::consts::PI;

pub type M = DMatrix<C>;

pub fn pauli(axis: char) -> M {
    let (z, o, i) = (C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 1.0));
    match axis {
        'x' => M::from_row_slice(2, 2, &[z, o, o, z]),
        'y' => M::from_row_slice(2, 2, &[z, -i, i, z]),
        'z' => M::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => M::identity(2, 2),
    }
}

/// `σ^axis` at 1-based `site`, site 1 being the leftmost tensor factor.
pub fn on_site(axis: char, site: usize, n: usize) -> M {
    (1..=n).fold(M::identity(1, 1), |acc, l| acc.kronecker(&pauli(if l == site { axis } else { 'i' })))
}

pub fn expm_minus_i(h: &M) -> M {
    let eig = h.clone().symmetric_eigen();
    let phases = M::from_diagonal(&eig.eigenvalues.map(|l| C::new(0.0, -l).exp()));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

#[derive(Debug, Clone, Copy)]
pub enum Schedule {
    Linear { hx0: f64, hz0: f64, gamma: f64 },
    Periodic { hx0: f64, hz0: f64, t_max: f64 },
}

/// `(θ_z, θ_x)` of kick `n` from the field envelopes.
pub fn angles(s: Schedule, tau: f64, n: usize) -> (f64, f64) {
    let t = n as f64 * tau;
    match s {
        Schedule::Linear { hx0, hz0, gamma } => (tau * (hz0 + gamma * t), tau * hx0),
        Schedule::Periodic { hx0, hz0, t_max } => {
            let a = PI / (2.0 * t_max);
            // ∫ h_x0 sin(a t') dt' over [t, t + τ]
            (tau * hz0 * (a * t).cos(), hx0 / a * ((a * t).cos() - (a * (t + tau)).cos()))
        }
    }
}

pub fn kick(n_sites: usize, j: f64, tau: f64, s: Schedule, n: usize) -> M {
    let (tz, tx) = angles(s, tau, n);
    let d = 1 << n_sites;
    let mut hz = M::zeros(d, d);
    let mut hx = M::zeros(d, d);
    for l in 1..=n_sites {
        hz += on_site('z', l, n_sites) * C::from(tz);
        hx += on_site('x', l, n_sites) * C::from(tx);
        if l < n_sites {
            hx += on_site('x', l, n_sites) * on_site('x', l + 1, n_sites) * C::from(tau * j);
        }
    }
    expm_minus_i(&hx) * expm_minus_i(&hz)
}

/// `U(n) = U_x(n)⋯U_x(1)` for `n = 0..=kicks`.
pub fn unitaries(n_sites: usize, j: f64, tau: f64, s: Schedule, kicks: usize) -> Vec<M> {
    let mut out = vec![M::identity(1 << n_sites, 1 << n_sites)];
    for n in 1..=kicks {
        let next = kick(n_sites, j, tau, s, n) * out.last().unwrap();
        out.push(next);
    }
    out
}

/// `U_x(1)⋯U_x(n)` for `n = 0..=kicks`.
pub fn reversed_products(n_sites: usize, j: f64, tau: f64, s: Schedule, kicks: usize) -> Vec<M> {
    let mut out = vec![M::identity(1 << n_sites, 1 << n_sites)];
    for n in 1..=kicks {
        let next = out.last().unwrap() * kick(n_sites, j, tau, s, n);
        out.push(next);
    }
    out
}

/// `(2/N)Σ σ` over the left or right half, or a single site.
pub fn observable(axis: char, sites: &[usize], n_sites: usize, block: bool) -> M {
    let c = if block { 2.0 / n_sites as f64 } else { 1.0 };
    let d = 1 << n_sites;
    sites.iter().fold(M::zeros(d, d), |acc, &s| acc + on_site(axis, s, n_sites) * C::from(c))
}

/// `(C2, C4, C)` with `C = -Tr([W, V]²)/(2D)`.
pub fn otoc(w: &M, v: &M) -> (f64, f64, f64) {
    let d = w.nrows() as f64;
    let c2 = (w * w * v * v).trace().re / d;
    let c4 = (w * v * w * v).trace().re / d;
    let comm = w * v - v * w;
    (c2, c4, -(&comm * &comm).trace().re / (2.0 * d))
}

/// `U W U†` for every `U`, or `U† W U` with `dagger_first`.
pub fn heisenberg(us: &[M], w: &M, dagger_first: bool) -> Vec<M> {
    us.iter().map(|u| if dagger_first { u.adjoint() * w * u } else { u * w * u.adjoint() }).collect()
}

pub mod engine {
    //! Glue between the library and the dense reference.
    use super::*;
    use otoc_quench::algebra::{site_operator, DenseOperator, PauliAxis};
    use otoc_quench::evolution::{cumulative_unitary, ChainParams, EvolutionState, HeisenbergConvention};
    use otoc_quench::otoc::{run_otoc_with, ObservableFamily, ObservableSpec, RunOptions};
    use otoc_quench::schedules::QuenchProtocol;

    pub fn protocol(s: Schedule) -> QuenchProtocol {
        match s {
            Schedule::Linear { hx0, hz0, gamma } => QuenchProtocol::linear(hx0, hz0, gamma),
            Schedule::Periodic { hx0, hz0, t_max } => QuenchProtocol::periodic(hx0, hz0, t_max),
        }
    }

    pub fn to_matrix(op: &DenseOperator) -> M {
        M::from_fn(op.dim(), op.dim(), |i, j| op.get(i, j))
    }

    pub fn max_diff(a: &M, b: &M) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn axis_char(f: ObservableFamily) -> char {
        match f.axis() {
            PauliAxis::X => 'x',
            PauliAxis::Y => 'y',
            PauliAxis::Z => 'z',
        }
    }

    /// Largest deviation of `C2`, `C4` and `C` over kicks `0..=kicks`.
    pub fn otoc_error(
        n_sites: usize,
        s: Schedule,
        spec: ObservableSpec,
        convention: HeisenbergConvention,
        kicks: usize,
    ) -> f64 {
        let (j, tau) = (1.0, PI / 4.0);
        let params = ChainParams::new(n_sites, j, tau);
        let opts = RunOptions { convention, stop_above: None };
        let series = run_otoc_with(&params, &protocol(s), &spec, kicks, opts).expect("engine run");
        let axis = axis_char(spec.family);
        let half = n_sites / 2;
        let (w, v) = if spec.family.is_block() {
            let left: Vec<usize> = (1..=half).collect();
            let right: Vec<usize> = (half + 1..=n_sites).collect();
            (observable(axis, &left, n_sites, true), observable(axis, &right, n_sites, true))
        } else {
            let (a, b) = spec.sites.unwrap_or((1, half));
            (observable(axis, &[a], n_sites, false), observable(axis, &[b], n_sites, false))
        };
        let us = match convention {
            HeisenbergConvention::UWUdag => unitaries(n_sites, j, tau, s, kicks),
            HeisenbergConvention::UdagWU => reversed_products(n_sites, j, tau, s, kicks),
        };
        let ws = heisenberg(&us, &w, convention == HeisenbergConvention::UdagWU);
        let mut worst = 0.0f64;
        for (n, wn) in ws.iter().enumerate() {
            let (c2, c4, c) = otoc(wn, &v);
            worst = worst.max((c2 - series.c2[n]).abs()).max((c4 - series.c4[n]).abs()).max((c - series.c[n]).abs());
        }
        worst
    }

    /// Odd chains carry no OTOC; compare the cumulative unitary and the
    /// evolved single-site operators instead.
    pub fn odd_chain_error(n_sites: usize, s: Schedule, kicks: usize) -> f64 {
        let (j, tau) = (1.0, PI / 4.0);
        let params = ChainParams::new(n_sites, j, tau);
        let proto = protocol(s);
        let us = unitaries(n_sites, j, tau, s, kicks);
        let mut worst = max_diff(&to_matrix(&cumulative_unitary(&params, &proto, kicks).unwrap()), &us[kicks]);
        for (axis, c) in [(PauliAxis::X, 'x'), (PauliAxis::Z, 'z')] {
            let w0 = site_operator(axis, 1, n_sites).unwrap();
            let mut state = EvolutionState::new(params, proto, w0, HeisenbergConvention::UWUdag, false).unwrap();
            let w = on_site(c, 1, n_sites);
            for u in us.iter().skip(1) {
                state.advance().unwrap();
                worst = worst.max(max_diff(&to_matrix(state.observable()), &(u * &w * u.adjoint())));
            }
        }
        worst
    }

    pub fn linear() -> Schedule {
        Schedule::Linear { hx0: 1.0, hz0: 1.0, gamma: 0.1 }
    }

    pub fn periodic() -> Schedule {
        Schedule::Periodic { hx0: 1.0, hz0: 4.0, t_max: 8.0 * PI }
    }

    /// Every engine path at `N ∈ {2, 3, 4}` over 20 kicks; returns the worst error.
    pub fn small_chain_sweep() -> f64 {
        let mut worst = 0.0f64;
        for s in [linear(), periodic()] {
            for n in [2, 4] {
                for family in ObservableFamily::ALL {
                    let spec = if family.is_block() { ObservableSpec::new(family) } else { ObservableSpec::local(family, 1, n) };
                    for conv in [HeisenbergConvention::UWUdag, HeisenbergConvention::UdagWU] {
                        worst = worst.max(otoc_error(n, s, spec, conv, 20));
                    }
                }
            }
            worst = worst.max(odd_chain_error(3, s, 20));
        }
        worst
    }
}

pub mod sampling {
    //! Inverse-transform samplers for the two spacing laws.
    use otoc_quench::spectral::{score_nnsd, HistogramOptions, SpacingEnsemble, Verdict};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// `P(s) = e^{-s}`.
    pub fn poisson(rng: &mut impl Rng) -> f64 {
        -(1.0 - rng.gen::<f64>()).ln()
    }

    /// `P(s) = (πs/2) e^{-πs²/4}`, CDF `1 - e^{-πs²/4}`.
    pub fn wigner(rng: &mut impl Rng) -> f64 {
        (-4.0 * (1.0 - rng.gen::<f64>()).ln() / PI).sqrt()
    }

    fn ensemble(draw: fn(&mut ChaCha8Rng) -> f64, rng: &mut ChaCha8Rng, size: usize) -> SpacingEnsemble {
        let raw: Vec<f64> = (0..size).map(|_| draw(rng)).collect();
        let mean = raw.iter().sum::<f64>() / size as f64;
        SpacingEnsemble::from_spacings(0, raw.into_iter().map(|s| s / mean).collect())
    }

    /// Correct verdicts out of `trials` for each law: `(poisson, wigner)`.
    pub fn calibration(trials: usize, size: usize, seed: u64) -> (usize, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = HistogramOptions::default();
        let mut hits = (0, 0);
        for _ in 0..trials {
            let p = score_nnsd(&ensemble(poisson, &mut rng, size), opts).unwrap();
            hits.0 += usize::from(p.verdict == Verdict::PoissonLike);
            let w = score_nnsd(&ensemble(wigner, &mut rng, size), opts).unwrap();
            hits.1 += usize::from(w.verdict == Verdict::WignerDysonLike);
        }
        hits
    }
}
