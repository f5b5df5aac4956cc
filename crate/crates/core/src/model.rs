//! Model parameters, the channel mode grid and the single-excitation
//! Hamiltonian.
//!
//! Units are fixed throughout the crate: half-bandwidth `w = 1`, lattice
//! constant `a = 1` and `ħ = 1`, so energies are in units of `w` and times in
//! units of `1/w`.
//!
//! The single-excitation sector is spanned by `[A, B, k_0, …, k_{N-1}]` in that
//! order. Every other module indexes states with [`IDX_A`], [`IDX_B`] and
//! [`channel_index`].

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QstError, Result};

pub const IDX_A: usize = 0;
pub const IDX_B: usize = 1;
pub const CHANNEL_OFFSET: usize = 2;

#[inline]
pub fn channel_index(n: usize) -> usize {
    CHANNEL_OFFSET + n
}

/// Parameters `(N, L, g, Ω)` of the two-impurity channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    n_modes: usize,
    distance: usize,
    coupling: f64,
    impurity_energy: f64,
}

impl ModelParams {
    pub fn new(n_modes: usize, distance: usize, coupling: f64, impurity_energy: f64) -> Result<Self> {
        if n_modes < 2 {
            return Err(QstError::InvalidParams(format!("N must be at least 2, got {n_modes}")));
        }
        if distance > n_modes {
            return Err(QstError::InvalidParams(format!(
                "L must satisfy 0 <= L <= N, got L={distance} with N={n_modes}"
            )));
        }
        if !coupling.is_finite() || coupling < 0.0 {
            return Err(QstError::InvalidParams(format!("g must be finite and >= 0, got {coupling}")));
        }
        if !impurity_energy.is_finite() {
            return Err(QstError::InvalidParams(format!("Ω must be finite, got {impurity_energy}")));
        }
        Ok(Self {
            n_modes,
            distance,
            coupling,
            impurity_energy,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn distance(&self) -> usize {
        self.distance
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn impurity_energy(&self) -> f64 {
        self.impurity_energy
    }

    /// Dimension of the single-excitation sector, `N + 2`.
    pub fn dimension(&self) -> usize {
        self.n_modes + 2
    }

    pub fn with_coupling(&self, coupling: f64) -> Result<Self> {
        Self::new(self.n_modes, self.distance, coupling, self.impurity_energy)
    }

    pub fn with_impurity_energy(&self, impurity_energy: f64) -> Result<Self> {
        Self::new(self.n_modes, self.distance, self.coupling, impurity_energy)
    }

    pub fn with_distance(&self, distance: usize) -> Result<Self> {
        Self::new(self.n_modes, distance, self.coupling, self.impurity_energy)
    }

    /// `g / √N`, the magnitude of every impurity-mode matrix element.
    pub fn mode_coupling(&self) -> f64 {
        self.coupling / (self.n_modes as f64).sqrt()
    }
}

/// `cos(2π m / N)` with exact values on the quarter points and exact
/// `m ↔ N-m` symmetry.
pub(crate) fn cos_2pi_frac(m: i64, n: usize) -> f64 {
    let n_i = n as i64;
    let m = m.rem_euclid(n_i);
    let m = m.min(n_i - m);
    if m == 0 {
        1.0
    } else if 2 * m == n_i {
        -1.0
    } else if 4 * m == n_i {
        0.0
    } else {
        (2.0 * PI * m as f64 / n as f64).cos()
    }
}

/// `exp(2πi m / N)`, exact on the quarter points, with
/// `phase(N-m) == conj(phase(m))` bit for bit.
pub(crate) fn unit_phase(m: i64, n: usize) -> Complex64 {
    let n_i = n as i64;
    let m = m.rem_euclid(n_i);
    if 2 * m > n_i {
        return unit_phase(n_i - m, n).conj();
    }
    if m == 0 {
        Complex64::new(1.0, 0.0)
    } else if 2 * m == n_i {
        Complex64::new(-1.0, 0.0)
    } else if 4 * m == n_i {
        Complex64::new(0.0, 1.0)
    } else {
        let (s, c) = (2.0 * PI * m as f64 / n as f64).sin_cos();
        Complex64::new(c, s)
    }
}

/// Wavenumbers `k_n = 2πn/N` and band energies `ε_n = -cos k_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid {
    pub wavenumbers: Vec<f64>,
    pub energies: Vec<f64>,
}

impl ModeGrid {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

pub fn mode_grid(params: &ModelParams) -> ModeGrid {
    let n = params.n_modes();
    let wavenumbers = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
    let energies = (0..n).map(|i| -cos_2pi_frac(i as i64, n)).collect();
    ModeGrid { wavenumbers, energies }
}

/// Hermitian `(N+2)×(N+2)` matrix in the basis `[A, B, k_0, …, k_{N-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    matrix: DMatrix<Complex64>,
}

impl HamiltonianMatrix {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    /// Largest absolute row sum; an upper bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `⟨ψ|H|ψ⟩` for a (not necessarily normalized) vector.
    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        let dim = self.dimension();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..dim {
                row += self.matrix[(i, j)] * psi[j];
            }
            acc += psi[i].conj() * row;
        }
        acc.re
    }
}

pub fn build_hamiltonian(params: &ModelParams) -> HamiltonianMatrix {
    let n = params.n_modes();
    let dim = params.dimension();
    let grid = mode_grid(params);
    let omega = params.impurity_energy();
    let v = params.mode_coupling();
    let l = params.distance() as i64;

    let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);
    matrix[(IDX_A, IDX_A)] = Complex64::new(omega, 0.0);
    matrix[(IDX_B, IDX_B)] = Complex64::new(omega, 0.0);
    for (i, &eps) in grid.energies.iter().enumerate() {
        let row = channel_index(i);
        matrix[(row, row)] = Complex64::new(eps, 0.0);

        let to_a = Complex64::new(-v, 0.0);
        matrix[(row, IDX_A)] = to_a;
        matrix[(IDX_A, row)] = to_a.conj();

        let to_b = -v * unit_phase(i as i64 * l, n);
        matrix[(row, IDX_B)] = to_b;
        matrix[(IDX_B, row)] = to_b.conj();
    }
    HamiltonianMatrix { matrix }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, l: usize, g: f64, omega: f64) -> ModelParams {
        ModelParams::new(n, l, g, omega).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(matches!(ModelParams::new(1, 0, 0.1, 0.0), Err(QstError::InvalidParams(_))));
        assert!(matches!(ModelParams::new(4, 5, 0.1, 0.0), Err(QstError::InvalidParams(_))));
        assert!(matches!(ModelParams::new(4, 1, -0.1, 0.0), Err(QstError::InvalidParams(_))));
        assert!(matches!(ModelParams::new(4, 1, f64::NAN, 0.0), Err(QstError::InvalidParams(_))));
        assert!(ModelParams::new(4, 0, 0.0, 0.0).is_ok());
        assert!(ModelParams::new(4, 4, 0.0, 0.0).is_ok());
    }

    #[test]
    fn two_mode_grid_is_band_edges() {
        let grid = mode_grid(&params(2, 0, 0.1, 0.0));
        assert_eq!(grid.wavenumbers, vec![0.0, PI]);
        assert_eq!(grid.energies, vec![-1.0, 1.0]);
    }

    #[test]
    fn sixteen_modes_have_an_exact_zero_energy() {
        let grid = mode_grid(&params(16, 8, 0.01, 0.0));
        assert_eq!(grid.wavenumbers[4], PI / 2.0);
        assert_eq!(grid.energies[4], 0.0);
        assert_eq!(grid.energies[12], 0.0);
    }

    #[test]
    fn band_energies_sum_to_zero() {
        let grid = mode_grid(&params(30, 6, 0.05, 1.5));
        let sum: f64 = grid.energies.iter().sum();
        assert!(sum.abs() < 1e-14, "sum = {sum}");
        for n in 1..30 {
            assert_eq!(grid.energies[n], grid.energies[30 - n]);
            assert!(grid.energies[n].abs() <= 1.0);
        }
    }

    #[test]
    fn figure_two_coupling_entries() {
        let h = build_hamiltonian(&params(16, 8, 0.01, 0.0));
        assert_eq!(h.dimension(), 18);
        for n in 0..16 {
            assert_eq!(h.entry(channel_index(n), IDX_A), Complex64::new(-0.0025, 0.0));
        }
    }

    #[test]
    fn decoupled_impurities_give_block_diagonal_matrix() {
        let h = build_hamiltonian(&params(6, 3, 0.0, 0.4));
        for n in 0..6 {
            assert_eq!(h.entry(channel_index(n), IDX_A).norm(), 0.0);
            assert_eq!(h.entry(channel_index(n), IDX_B).norm(), 0.0);
        }
        assert_eq!(h.entry(IDX_A, IDX_A).re, 0.4);
        assert_eq!(h.entry(IDX_A, IDX_B).norm(), 0.0);
    }

    #[test]
    fn phase_helper_is_exact_on_quarters() {
        assert_eq!(unit_phase(4, 16), Complex64::new(0.0, 1.0));
        assert_eq!(unit_phase(12, 16), Complex64::new(0.0, -1.0));
        assert_eq!(unit_phase(-3, 7), unit_phase(4, 7));
        assert_eq!(unit_phase(5, 7), unit_phase(2, 7).conj());
    }
}
