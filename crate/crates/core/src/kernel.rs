//! Row-oriented kernels for multiplying dense operators by products of
//! commuting local gates.
//!
//! Every gate in a kick is either diagonal in the computational basis or of
//! the form `cos θ - i sin θ P` with `P` a bit-flip permutation, so a
//! right-multiplication `r ← r·G` only ever mixes entries `j` and `j ^ mask`
//! inside one row. Rows are independent, which makes the row the unit of both
//! cache blocking and parallelism.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

/// One right-multiplication step on a row vector.
#[derive(Debug, Clone, PartialEq)]
pub enum RowOp {
    /// `r_j ← r_j · phase_j`.
    Phase(Vec<C64>),
    /// `r_j ← cos·r_j + i·sin·r_{j ^ mask}`.
    Rotate { mask: usize, cos: f64, sin: f64 },
    /// Unnormalized Walsh-Hadamard transform `r ← r·H^{⊗N}`.
    Hadamard,
}

/// Ordered list of [`RowOp`]s applied to every row of a square matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RowProgram {
    ops: Vec<RowOp>,
}

impl RowProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, op: RowOp) {
        // consecutive diagonal factors collapse into one pass
        if let RowOp::Phase(next) = &op {
            if let Some(RowOp::Phase(prev)) = self.ops.last_mut() {
                for (p, q) in prev.iter_mut().zip(next) {
                    *p *= q;
                }
                return;
            }
        }
        self.ops.push(op);
    }

    pub fn ops(&self) -> &[RowOp] {
        &self.ops
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn apply_to_row(&self, row: &mut [C64]) {
        dispatch(|| self.apply_to_row_blocked(row));
    }

    /// Runs of rotations whose masks fit inside an L1-sized chunk are applied
    /// chunk by chunk; everything else sweeps the whole row.
    #[inline(always)]
    fn apply_to_row_blocked(&self, row: &mut [C64]) {
        let chunk = CHUNK.min(row.len());
        let mut i = 0;
        while i < self.ops.len() {
            let mut j = i;
            while j < self.ops.len() && matches!(self.ops[j], RowOp::Rotate { mask, .. } if mask < chunk) {
                j += 1;
            }
            if j - i > 1 {
                for part in row.chunks_exact_mut(chunk) {
                    for op in &self.ops[i..j] {
                        if let RowOp::Rotate { mask, cos, sin } = *op {
                            rotate_pairs(part, mask, cos, sin);
                        }
                    }
                }
                i = j;
                continue;
            }
            match &self.ops[i] {
                RowOp::Phase(ph) => {
                    for (a, p) in row.iter_mut().zip(ph) {
                        *a *= p;
                    }
                }
                RowOp::Rotate { mask, cos, sin } => rotate_pairs(row, *mask, *cos, *sin),
                RowOp::Hadamard => walsh_hadamard(row),
            }
            i += 1;
        }
    }

    /// Applies the program to each `dim`-long row of a row-major buffer.
    pub fn apply_to_rows(&self, data: &mut [C64], dim: usize) {
        if self.ops.is_empty() {
            return;
        }
        data.par_chunks_mut(dim)
            .for_each(|row| dispatch(|| self.apply_to_row_blocked(row)));
    }
}

/// Row elements processed together for low-mask rotations (16 KiB).
const CHUNK: usize = 1024;

/// Runs `f` compiled for AVX2/FMA when the CPU has it.
#[inline(always)]
pub(crate) fn dispatch<R>(f: impl FnOnce() -> R) -> R {
    #[cfg(target_arch = "x86_64")]
    {
        #[target_feature(enable = "avx2,fma")]
        unsafe fn wide<R>(f: impl FnOnce() -> R) -> R {
            f()
        }
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: the required features were detected at runtime
            return unsafe { wide(f) };
        }
    }
    f()
}

#[inline(always)]
fn mix(a: C64, b: C64, c: f64, s: f64) -> C64 {
    // c·a + i·s·b
    C64::new(c * a.re - s * b.im, c * a.im + s * b.re)
}

/// `v_j ← c·v_j + i·s·v_{j ^ mask}` for every `j`.
#[inline(always)]
pub fn rotate_pairs(v: &mut [C64], mask: usize, c: f64, s: f64) {
    debug_assert!(mask != 0 && mask < v.len());
    if mask.is_power_of_two() {
        let half = mask;
        for block in v.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = mix(x, y, c, s);
                *b = mix(y, x, c, s);
            }
        }
    } else if mask.count_ones() == 2 && (mask >> mask.trailing_zeros()) == 0b11 {
        // adjacent bit pair: quarters 00,01,10,11 of each block pair as 00<->11, 01<->10
        let q = 1usize << mask.trailing_zeros();
        for block in v.chunks_exact_mut(4 * q) {
            let (q01, q23) = block.split_at_mut(2 * q);
            let (q0, q1) = q01.split_at_mut(q);
            let (q2, q3) = q23.split_at_mut(q);
            for (a, b) in q0.iter_mut().zip(q3.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = mix(x, y, c, s);
                *b = mix(y, x, c, s);
            }
            for (a, b) in q1.iter_mut().zip(q2.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = mix(x, y, c, s);
                *b = mix(y, x, c, s);
            }
        }
    } else {
        let top = 1usize << (usize::BITS - 1 - mask.leading_zeros());
        for j in 0..v.len() {
            if j & top == 0 {
                let k = j ^ mask;
                let (x, y) = (v[j], v[k]);
                v[j] = mix(x, y, c, s);
                v[k] = mix(y, x, c, s);
            }
        }
    }
}

/// In-place unnormalized Walsh-Hadamard transform (radix-4 passes).
#[inline(always)]
pub fn walsh_hadamard(v: &mut [C64]) {
    let n = v.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h * 4 <= n {
        for block in v.chunks_exact_mut(4 * h) {
            let (q01, q23) = block.split_at_mut(2 * h);
            let (q0, q1) = q01.split_at_mut(h);
            let (q2, q3) = q23.split_at_mut(h);
            for i in 0..h {
                let (a, b, c, d) = (q0[i], q1[i], q2[i], q3[i]);
                let (s0, d0, s1, d1) = (a + b, a - b, c + d, c - d);
                q0[i] = s0 + s1;
                q1[i] = d0 + d1;
                q2[i] = s0 - s1;
                q3[i] = d0 - d1;
            }
        }
        h *= 4;
    }
    if h < n {
        let (lo, hi) = v.split_at_mut(h);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x, y) = (*a, *b);
            *a = x + y;
            *b = x - y;
        }
    }
}

/// Row-pair variant of [`rotate_pairs`]: `row_i ← c·row_i + i·s·row_{i ^ mask}`.
/// This is a left-multiplication by `c·I + i·s·P`.
pub fn rotate_rows(data: &mut [C64], dim: usize, mask: usize, c: f64, s: f64) {
    let top = 1usize << (usize::BITS - 1 - mask.leading_zeros());
    for i in 0..dim {
        if i & top != 0 {
            continue;
        }
        let k = i ^ mask;
        let (head, tail) = data.split_at_mut(k * dim);
        let a = &mut head[i * dim..(i + 1) * dim];
        let b = &mut tail[..dim];
        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
            let (p, q) = (*x, *y);
            *x = mix(p, q, c, s);
            *y = mix(q, p, c, s);
        }
    }
}

/// In-place transpose of a square row-major matrix.
pub fn transpose_in_place(data: &mut [C64], dim: usize) {
    const BLOCK: usize = 32;
    for bi in (0..dim).step_by(BLOCK) {
        for bj in (bi..dim).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(dim) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + BLOCK).min(dim) {
                    data.swap(i * dim + j, j * dim + i);
                }
            }
        }
    }
}

/// In-place conjugate transpose of a square row-major matrix.
pub fn adjoint_in_place(data: &mut [C64], dim: usize) {
    const BLOCK: usize = 32;
    for bi in (0..dim).step_by(BLOCK) {
        for bj in (bi..dim).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(dim) {
                let start = if bi == bj { i } else { bj };
                for j in start..(bj + BLOCK).min(dim) {
                    let (a, b) = (data[i * dim + j], data[j * dim + i]);
                    data[i * dim + j] = b.conj();
                    data[j * dim + i] = a.conj();
                }
            }
        }
    }
}
