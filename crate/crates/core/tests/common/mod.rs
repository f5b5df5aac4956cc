//! Independent oracles shared by the integration and acceptance tests. None of
//! them touch the eigensolver or the spectral code under test.

#![allow(dead_code)]

use num_complex::Complex64;
use qst_core::{build_hamiltonian, ModelParams};

pub const SEED: u64 = 20261018;

pub fn params(n: usize, l: usize, g: f64, omega: f64) -> ModelParams {
    ModelParams::new(n, l, g, omega).unwrap()
}

pub fn dense(p: &ModelParams) -> Vec<Vec<Complex64>> {
    let h = build_hamiltonian(p);
    let dim = h.dimension();
    (0..dim).map(|i| (0..dim).map(|j| h.entry(i, j)).collect()).collect()
}

/// Diagonal and off-diagonal moduli of a unitarily similar real tridiagonal
/// matrix, by Householder reflections.
pub fn tridiagonalize(m: &[Vec<Complex64>]) -> (Vec<f64>, Vec<f64>) {
    let n = m.len();
    let mut a: Vec<Vec<Complex64>> = m.to_vec();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<Complex64> = (k + 1..n).map(|i| a[i][k]).collect();
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let unit = if x[0].norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x[0] / x[0].norm() };
        let mut v = x.clone();
        v[0] += unit * norm;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut v {
            *z /= vnorm;
        }
        // A ← P A P with P = I − 2vvᴴ on rows and columns k+1..n
        let offset = k + 1;
        for row in a.iter_mut() {
            let dot: Complex64 = v.iter().enumerate().map(|(i, vi)| row[offset + i] * vi).sum();
            for (i, vi) in v.iter().enumerate() {
                row[offset + i] -= 2.0 * dot * vi.conj();
            }
        }
        for j in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * a[offset + i][j]).sum();
            for (i, vi) in v.iter().enumerate() {
                a[offset + i][j] -= 2.0 * vi * dot;
            }
        }
    }
    let diag = (0..n).map(|i| a[i][i].re).collect();
    let off = (1..n).map(|i| a[i][i - 1].norm()).collect();
    (diag, off)
}

/// Number of eigenvalues below `x` from the Sturm sequence of the
/// tridiagonal form.
pub fn count_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut negatives = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let coupling = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { coupling / q };
        if q == 0.0 {
            q = -f64::EPSILON * (1.0 + x.abs());
        }
        if q < 0.0 {
            negatives += 1;
        }
    }
    negatives
}

/// All eigenvalues of a Hermitian matrix, ascending, by inertia bisection.
pub fn oracle_eigenvalues(m: &[Vec<Complex64>]) -> Vec<f64> {
    let n = m.len();
    let (diag, off) = tridiagonalize(m);
    let radius = m
        .iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    (0..n)
        .map(|k| {
            // smallest x with count_below(x) > k
            let (mut lo, mut hi) = (-radius, radius);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if count_below(&diag, &off, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

fn mat_vec(m: &[Vec<Complex64>], v: &[Complex64]) -> Vec<Complex64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// `exp(−iHt)ψ` by a Taylor series on sub-steps with `‖H‖·dt ≤ 1/2`.
pub fn taylor_propagate(m: &[Vec<Complex64>], psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let norm = m
        .iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let steps = ((norm * t.abs()) / 0.5).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut state = psi.to_vec();
    for _ in 0..steps {
        let mut term = state.clone();
        let mut acc = state.clone();
        for order in 1..=40 {
            let hv = mat_vec(m, &term);
            let scale = Complex64::new(0.0, -dt / order as f64);
            term = hv.into_iter().map(|z| z * scale).collect();
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            if term.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-300 {
                break;
            }
        }
        state = acc;
    }
    state
}

/// `(g²/N) Σ_n e^{i k_n d} / (ω − ε_n)` with its own mode arithmetic.
pub fn mode_sum(n: usize, d: i64, g: f64, omega: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let k = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let eps = -k.cos();
        acc += Complex64::from_polar(1.0, k * d as f64) / (omega - eps);
    }
    acc * (g * g / n as f64)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
