//! Exact time evolution in the single-excitation sector.
//!
//! States are propagated through the eigendecomposition of the Hamiltonian,
//! `ψ(t) = Σ_j e^{-iE_j t} ⟨v_j|ψ₀⟩ v_j`, so the cost of a sample does not
//! depend on how large `t` is.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{QstError, Result};
use crate::model::{build_hamiltonian, HamiltonianMatrix, ModelParams, IDX_A, IDX_B};

const NORM_TOLERANCE: f64 = 1e-12;
const SPECTRUM_TOLERANCE: f64 = 1e-10;
/// Grids shorter than this are evaluated on the calling thread.
const PARALLEL_THRESHOLD: usize = 4096;

/// Unit-norm amplitudes on `[A, B, k_0, …, k_{N-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleExcitationState {
    amplitudes: Vec<Complex64>,
}

impl SingleExcitationState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 4 {
            return Err(QstError::InvalidState(format!(
                "need at least 4 amplitudes (A, B and two modes), got {}",
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QstError::InvalidState("amplitudes must be finite".into()));
        }
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > NORM_TOLERANCE {
            return Err(QstError::InvalidState(format!("norm² = {norm_sq}, expected 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(QstError::InvalidState(format!("cannot normalize vector of norm {norm}")));
        }
        Self::new(amplitudes.into_iter().map(|z| z / norm).collect())
    }

    pub fn basis(dimension: usize, index: usize) -> Result<Self> {
        if index >= dimension {
            return Err(QstError::InvalidState(format!(
                "basis index {index} out of range for dimension {dimension}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dimension];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self::new(amplitudes)
    }

    /// The excitation localized on impurity A.
    pub fn on_a(params: &ModelParams) -> Self {
        Self::basis(params.dimension(), IDX_A).expect("A is always a valid index")
    }

    pub fn on_b(params: &ModelParams) -> Self {
        Self::basis(params.dimension(), IDX_B).expect("B is always a valid index")
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }
}

/// `(P_A, P_B, P_chan)` for a state.
pub fn occupation_probabilities(state: &SingleExcitationState) -> (f64, f64, f64) {
    probabilities_of(state.amplitudes())
}

fn probabilities_of(amplitudes: &[Complex64]) -> (f64, f64, f64) {
    let p_a = amplitudes[IDX_A].norm_sqr();
    let p_b = amplitudes[IDX_B].norm_sqr();
    let p_chan = amplitudes[IDX_B + 1..].iter().map(|z| z.norm_sqr()).sum();
    (p_a, p_b, p_chan)
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// (column `j` belongs to eigenvalue `j`).
///
/// Each eigenvector is rotated so that its largest-magnitude component is
/// real and positive (first such component on ties).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<Complex64>,
}

impl Spectrum {
    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `|⟨A|v_j⟩|² + |⟨B|v_j⟩|²` for every eigenvector.
    pub fn impurity_weights(&self) -> Vec<f64> {
        (0..self.dimension())
            .map(|j| self.eigenvectors[(IDX_A, j)].norm_sqr() + self.eigenvectors[(IDX_B, j)].norm_sqr())
            .collect()
    }
}

pub fn eigendecompose(h: &HamiltonianMatrix) -> Result<Spectrum> {
    let dim = h.dimension();
    let context = || format!("{dim}x{dim} Hamiltonian");
    let decomposition = SymmetricEigen::try_new(h.matrix().clone(), f64::EPSILON, 1000 * dim.max(1))
        .ok_or_else(|| QstError::Numerical {
            context: context(),
            reason: "eigensolver did not converge".into(),
        })?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| decomposition.eigenvalues[i].total_cmp(&decomposition.eigenvalues[j]));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| decomposition.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::<Complex64>::zeros(dim, dim);
    for (col, &src) in order.iter().enumerate() {
        let column = decomposition.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..dim {
            if column[i].norm() > column[pivot].norm() {
                pivot = i;
            }
        }
        let rotation = column[pivot].conj() / column[pivot].norm();
        for i in 0..dim {
            eigenvectors[(i, col)] = column[i] * rotation;
        }
        // exactly real at the pivot
        eigenvectors[(pivot, col)] = Complex64::new(eigenvectors[(pivot, col)].norm(), 0.0);
    }

    let spectrum = Spectrum {
        eigenvalues,
        eigenvectors,
    };
    validate_spectrum(h, &spectrum).map_err(|reason| QstError::Numerical {
        context: context(),
        reason,
    })?;
    Ok(spectrum)
}

fn validate_spectrum(h: &HamiltonianMatrix, spectrum: &Spectrum) -> std::result::Result<(), String> {
    let scale = h.norm_bound().max(1.0);
    let vectors = &spectrum.eigenvectors;
    let hv = h.matrix() * vectors;
    for (j, &e) in spectrum.eigenvalues.iter().enumerate() {
        if !e.is_finite() {
            return Err(format!("non-finite eigenvalue at index {j}"));
        }
        let residual = (hv.column(j) - vectors.column(j) * Complex64::new(e, 0.0)).norm();
        if residual > SPECTRUM_TOLERANCE * scale {
            return Err(format!("residual {residual:e} for eigenvalue {e}"));
        }
    }
    let gram = vectors.adjoint() * vectors;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            if (gram[(i, j)] - target).norm() > SPECTRUM_TOLERANCE {
                return Err(format!("eigenvectors {i} and {j} not orthonormal"));
            }
        }
    }
    Ok(())
}

/// Occupation probabilities sampled on a time grid, with optional full
/// amplitude snapshots.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub p_a: Vec<f64>,
    pub p_b: Vec<f64>,
    pub p_chan: Vec<f64>,
    pub amplitudes: Option<Vec<Vec<Complex64>>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `n_samples` evenly spaced times from `t_start` to `t_end` inclusive.
pub fn time_grid(t_start: f64, t_end: f64, n_samples: usize) -> Result<Vec<f64>> {
    if n_samples < 2 {
        return Err(QstError::InvalidTimeGrid(format!("need at least 2 samples, got {n_samples}")));
    }
    if !(t_start.is_finite() && t_end.is_finite()) || t_end <= t_start {
        return Err(QstError::InvalidTimeGrid(format!(
            "need finite t_end > t_start, got [{t_start}, {t_end}]"
        )));
    }
    let span = t_end - t_start;
    let last = (n_samples - 1) as f64;
    let mut grid: Vec<f64> = (0..n_samples).map(|i| t_start + span * (i as f64 / last)).collect();
    grid[n_samples - 1] = t_end;
    Ok(grid)
}

pub(crate) fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(QstError::InvalidTimeGrid("empty time grid".into()));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(QstError::InvalidTimeGrid(format!("non-finite time {t}")));
    }
    if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
        return Err(QstError::InvalidTimeGrid(format!(
            "times must be strictly ascending ({} followed by {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

#[inline]
fn phase(energy: f64, t: f64) -> Complex64 {
    Complex64::from_polar(1.0, -energy * t)
}

/// Time-evolution operator built once from a [`Spectrum`] and shared across
/// evaluations.
#[derive(Debug, Clone)]
pub struct Propagator {
    spectrum: Spectrum,
}

impl Propagator {
    pub fn new(spectrum: Spectrum) -> Self {
        Self { spectrum }
    }

    pub fn from_params(params: &ModelParams) -> Result<Self> {
        let h = build_hamiltonian(params);
        let spectrum = eigendecompose(&h).map_err(|err| match err {
            QstError::Numerical { context, reason } => QstError::Numerical {
                context: format!("{context} (N={}, L={}, g={}, Ω={})",
                    params.n_modes(), params.distance(), params.coupling(), params.impurity_energy()),
                reason,
            },
            other => other,
        })?;
        Ok(Self::new(spectrum))
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// Expansion coefficients `⟨v_j|ψ₀⟩`.
    pub fn coefficients(&self, initial: &SingleExcitationState) -> Result<Vec<Complex64>> {
        let dim = self.spectrum.dimension();
        if initial.dimension() != dim {
            return Err(QstError::InvalidState(format!(
                "state has dimension {}, Hamiltonian has {dim}",
                initial.dimension()
            )));
        }
        let v = &self.spectrum.eigenvectors;
        Ok((0..dim)
            .map(|j| (0..dim).map(|i| v[(i, j)].conj() * initial.amplitudes()[i]).sum())
            .collect())
    }

    fn state_from_coefficients(&self, coefficients: &[Complex64], t: f64) -> Vec<Complex64> {
        let dim = self.spectrum.dimension();
        let v = &self.spectrum.eigenvectors;
        let weighted: Vec<Complex64> = coefficients
            .iter()
            .zip(&self.spectrum.eigenvalues)
            .map(|(c, &e)| c * phase(e, t))
            .collect();
        (0..dim)
            .map(|i| (0..dim).map(|j| v[(i, j)] * weighted[j]).sum())
            .collect()
    }

    pub fn state_at(&self, initial: &SingleExcitationState, t: f64) -> Result<Vec<Complex64>> {
        let coefficients = self.coefficients(initial)?;
        Ok(self.state_from_coefficients(&coefficients, t))
    }

    /// Full evolution on `times`: every sample computes the whole state vector.
    pub fn trajectory(
        &self,
        initial: &SingleExcitationState,
        times: &[f64],
        keep_amplitudes: bool,
    ) -> Result<Trajectory> {
        validate_times(times)?;
        let coefficients = self.coefficients(initial)?;
        let evaluate = |&t: &f64| self.state_from_coefficients(&coefficients, t);
        let states: Vec<Vec<Complex64>> = if times.len() >= PARALLEL_THRESHOLD {
            times.par_iter().map(evaluate).collect()
        } else {
            times.iter().map(evaluate).collect()
        };

        let mut traj = Trajectory {
            times: times.to_vec(),
            p_a: Vec::with_capacity(times.len()),
            p_b: Vec::with_capacity(times.len()),
            p_chan: Vec::with_capacity(times.len()),
            amplitudes: None,
        };
        for state in &states {
            let (p_a, p_b, p_chan) = probabilities_of(state);
            traj.p_a.push(p_a);
            traj.p_b.push(p_b);
            traj.p_chan.push(p_chan);
        }
        if keep_amplitudes {
            traj.amplitudes = Some(states);
        }
        Ok(traj)
    }

    /// Impurity amplitudes `(⟨A|ψ(t)⟩, ⟨B|ψ(t)⟩)` on `times`, at `O(N)` per
    /// sample.
    pub fn impurity_amplitudes(
        &self,
        initial: &SingleExcitationState,
        times: &[f64],
    ) -> Result<Vec<(Complex64, Complex64)>> {
        validate_times(times)?;
        let coefficients = self.coefficients(initial)?;
        let v = &self.spectrum.eigenvectors;
        let row_a: Vec<Complex64> = coefficients.iter().enumerate().map(|(j, c)| v[(IDX_A, j)] * c).collect();
        let row_b: Vec<Complex64> = coefficients.iter().enumerate().map(|(j, c)| v[(IDX_B, j)] * c).collect();
        let energies = &self.spectrum.eigenvalues;
        let evaluate = |&t: &f64| {
            let mut a = Complex64::new(0.0, 0.0);
            let mut b = Complex64::new(0.0, 0.0);
            for (j, &e) in energies.iter().enumerate() {
                let p = phase(e, t);
                a += row_a[j] * p;
                b += row_b[j] * p;
            }
            (a, b)
        };
        Ok(if times.len() >= PARALLEL_THRESHOLD {
            times.par_iter().map(evaluate).collect()
        } else {
            times.iter().map(evaluate).collect()
        })
    }

    /// Like [`Propagator::trajectory`] but only the impurity rows are
    /// propagated; `p_chan` is the conserved norm `Σ_j |⟨v_j|ψ₀⟩|²` minus
    /// `P_A + P_B`. Meant for very long, dense grids.
    pub fn impurity_trajectory(&self, initial: &SingleExcitationState, times: &[f64]) -> Result<Trajectory> {
        let amplitudes = self.impurity_amplitudes(initial, times)?;
        let norm: f64 = self.coefficients(initial)?.iter().map(|c| c.norm_sqr()).sum();
        let mut traj = Trajectory {
            times: times.to_vec(),
            ..Default::default()
        };
        for (a, b) in amplitudes {
            let (p_a, p_b) = (a.norm_sqr(), b.norm_sqr());
            traj.p_a.push(p_a);
            traj.p_b.push(p_b);
            traj.p_chan.push((norm - p_a - p_b).max(0.0));
        }
        Ok(traj)
    }
}

/// Evolves `initial` under the Hamiltonian of `params`, recording occupation
/// probabilities at each time.
pub fn evolve(params: &ModelParams, initial: &SingleExcitationState, times: &[f64]) -> Result<Trajectory> {
    validate_times(times)?;
    Propagator::from_params(params)?.trajectory(initial, times, false)
}

/// Same as [`evolve`], keeping every state vector.
pub fn evolve_with_amplitudes(
    params: &ModelParams,
    initial: &SingleExcitationState,
    times: &[f64],
) -> Result<Trajectory> {
    validate_times(times)?;
    Propagator::from_params(params)?.trajectory(initial, times, true)
}
