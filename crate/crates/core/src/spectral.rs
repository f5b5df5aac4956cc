//! Lattice self-energies, the factorized spectral function `D±(ω)` and its
//! real poles, and amplitude reconstruction from the pole expansion.
//!
//! The self-energy at offset `d` is the coupling-weighted lattice Green
//! function
//!
//! ```text
//! Λ_d(ω) = (g²/N) Σ_n exp(i k_n d) / (ω − ε_n)
//! ```
//!
//! evaluated by direct summation in [`lambda_sum`]. Every closed form in this
//! module ([`lambda_closed`], [`d_pm_gamma`]) is checked against that sum.
//!
//! The pole-defining denominator factorizes into the symmetric and
//! antisymmetric impurity sectors, `D±(ω) = ω − Ω − Λ_0(ω) ∓ Λ_L(ω)`.
//! Grouping the `±k` modes gives the secular form
//! `D±(ω) = ω − Ω − Σ_j w±_j / (ω − ε_j)` with non-negative weights
//! `w±_j = (g²/N)·mult_j·(1 ± cos k_j L)`, which is what the pole search uses:
//! `D±` increases monotonically between consecutive active poles, so every
//! such interval holds exactly one root.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::validate_times;
use crate::error::{QstError, Result};
use crate::model::{cos_2pi_frac, mode_grid, unit_phase, ModelParams};

/// Minimum distance between a real frequency and a channel energy.
pub const COLLISION_DISTANCE: f64 = 1e-12;
const COMPLETENESS_TOLERANCE: f64 = 1e-6;
const MAX_BRACKET_EXPANSIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    /// `D₊`, symmetric combination `(A + B)/√2`.
    Plus,
    /// `D₋`, antisymmetric combination `(A − B)/√2`.
    Minus,
}

impl Parity {
    pub const BOTH: [Parity; 2] = [Parity::Plus, Parity::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Parity::Plus => 1.0,
            Parity::Minus => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Parity::Plus => "plus",
            Parity::Minus => "minus",
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Plus => "+",
            Parity::Minus => "-",
        })
    }
}

/// A recorded evaluation of `Λ_d(ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfEnergyEval {
    pub d: i64,
    pub omega: Complex64,
    pub value: Complex64,
}

fn check_real_collision(omega: f64, energies: &[f64]) -> Result<()> {
    if !omega.is_finite() {
        return Err(QstError::InvalidParams(format!("frequency must be finite, got {omega}")));
    }
    match energies.iter().find(|&&e| (omega - e).abs() < COLLISION_DISTANCE) {
        Some(&energy) => Err(QstError::PoleCollision { omega, energy }),
        None => Ok(()),
    }
}

/// `Λ_d(ω)` by direct summation over the `N` modes, for complex `ω`.
pub fn lambda_sum(d: i64, omega: Complex64, params: &ModelParams) -> Result<Complex64> {
    if !(omega.re.is_finite() && omega.im.is_finite()) {
        return Err(QstError::InvalidParams(format!("frequency must be finite, got {omega}")));
    }
    let n = params.n_modes();
    let grid = mode_grid(params);
    if let Some(&energy) = grid.energies.iter().find(|&&e| (omega - e).norm() < COLLISION_DISTANCE) {
        return Err(QstError::PoleCollision {
            omega: omega.re,
            energy,
        });
    }
    let g2 = params.coupling() * params.coupling();
    let sum: Complex64 = grid
        .energies
        .iter()
        .enumerate()
        .map(|(i, &e)| unit_phase(i as i64 * d, n) / (omega - e))
        .sum();
    Ok(sum * (g2 / n as f64))
}

/// Tagged variant of [`lambda_sum`].
pub fn self_energy(d: i64, omega: Complex64, params: &ModelParams) -> Result<SelfEnergyEval> {
    Ok(SelfEnergyEval {
        d,
        omega,
        value: lambda_sum(d, omega, params)?,
    })
}

/// `Λ_d(ω)` for real `ω` off the channel energies. The imaginary parts of the
/// `±k` terms cancel, so the sum runs over `cos(k_n d)` directly.
pub fn lambda_real(d: i64, omega: f64, params: &ModelParams) -> Result<f64> {
    let grid = mode_grid(params);
    check_real_collision(omega, &grid.energies)?;
    let n = params.n_modes();
    let g2 = params.coupling() * params.coupling();
    let sum: f64 = grid
        .energies
        .iter()
        .enumerate()
        .map(|(i, &e)| cos_2pi_frac(i as i64 * d, n) / (omega - e))
        .sum();
    Ok(sum * g2 / n as f64)
}

/// `Λ_d′(ω) = −(g²/N) Σ_n exp(i k_n d) / (ω − ε_n)²` for real `ω`.
pub fn lambda_derivative(d: i64, omega: f64, params: &ModelParams) -> Result<f64> {
    let grid = mode_grid(params);
    check_real_collision(omega, &grid.energies)?;
    let n = params.n_modes();
    let g2 = params.coupling() * params.coupling();
    let sum: f64 = grid
        .energies
        .iter()
        .enumerate()
        .map(|(i, &e)| cos_2pi_frac(i as i64 * d, n) / ((omega - e) * (omega - e)))
        .sum();
    Ok(-sum * g2 / n as f64)
}

/// Root of `z² + 2ωz + 1 = 0` inside the unit disk, for real `|ω| > 1`.
pub fn k_root(omega: f64) -> f64 {
    let s = (omega * omega - 1.0).sqrt();
    // the outer root has no cancellation; the roots multiply to 1
    let outer = -omega - omega.signum() * s;
    1.0 / outer
}

fn check_outside_band(omega: f64) -> Result<()> {
    if !omega.is_finite() || omega.abs() <= 1.0 {
        return Err(QstError::InvalidParams(format!(
            "closed form needs |ω| > 1 (outside the band), got {omega}"
        )));
    }
    Ok(())
}

/// Closed-form `Λ_d(ω)` for real `|ω| > 1` and `|d| ≤ N`:
///
/// ```text
/// Λ_d(ω) = 2g² / (K − 1/K) · (K^|d| + K^(N−|d|)) / (1 − K^N)
/// ```
///
/// with `K` from [`k_root`]. The prefactor equals `sign(ω)·g²/√(ω²−1)`.
pub fn lambda_closed(d: i64, omega: f64, params: &ModelParams) -> Result<f64> {
    check_outside_band(omega)?;
    let n = params.n_modes() as i64;
    let d = d.abs();
    if d > n {
        return Err(QstError::InvalidParams(format!("closed form needs |d| <= N, got d={d}, N={n}")));
    }
    let k = k_root(omega);
    let g2 = params.coupling() * params.coupling();
    let prefactor = 2.0 * g2 / (k - 1.0 / k);
    Ok(prefactor * (k.powi(d as i32) + k.powi((n - d) as i32)) / (1.0 - k.powi(n as i32)))
}

/// `N → ∞` limit of [`lambda_closed`]: `2g²/(K − 1/K) · K^|d|`.
pub fn lambda_continuum(d: i64, omega: f64, coupling: f64) -> Result<f64> {
    check_outside_band(omega)?;
    let k = k_root(omega);
    Ok(2.0 * coupling * coupling / (k - 1.0 / k) * k.powi(d.unsigned_abs() as i32))
}

/// `(D₊(ω), D₋(ω))` from the direct self-energy sums.
pub fn d_pm(omega: f64, params: &ModelParams) -> Result<(f64, f64)> {
    let l0 = lambda_real(0, omega, params)?;
    let ll = lambda_real(params.distance() as i64, omega, params)?;
    let base = omega - params.impurity_energy() - l0;
    Ok((base - ll, base + ll))
}

/// `D±` in the auxiliary variable `γ` with `ω = −cos γ`, `Ω = −cos Γ`:
///
/// ```text
/// D±(γ) = cos γ − cos Γ + g² [cos(γN/2) ± cos(γ(N/2 − L))] / (sin γ · sin(γN/2))
/// ```
///
/// For real in-band `γ` this is exactly `−D±(−cos γ)`.
pub fn d_pm_gamma(gamma: Complex64, params: &ModelParams) -> Result<(Complex64, Complex64)> {
    if !(gamma.re.is_finite() && gamma.im.is_finite()) || gamma.re < 0.0 || gamma.re > std::f64::consts::PI {
        return Err(QstError::InvalidParams(format!("need 0 <= Re γ <= π, got {gamma}")));
    }
    let half_n = params.n_modes() as f64 / 2.0;
    let l = params.distance() as f64;
    let sin_g = gamma.sin();
    let sin_half = (gamma * half_n).sin();
    if sin_g.norm() < COLLISION_DISTANCE || sin_half.norm() < COLLISION_DISTANCE {
        let omega = -gamma.cos();
        return Err(QstError::PoleCollision {
            omega: omega.re,
            energy: omega.re,
        });
    }
    let g2 = params.coupling() * params.coupling();
    let base = gamma.cos() + params.impurity_energy();
    let denom = sin_g * sin_half;
    let same = (gamma * half_n).cos();
    let shifted = (gamma * (half_n - l)).cos();
    Ok((base + (same + shifted) * g2 / denom, base + (same - shifted) * g2 / denom))
}

/// Grouped form of one parity sector: `D(ω) = ω − Ω − Σ w_j / (ω − ε_j)`.
#[derive(Debug, Clone)]
struct SecularFunction {
    impurity_energy: f64,
    /// `(ε_j, w_j)` with `w_j > 0`, ascending in `ε_j`.
    poles: Vec<(f64, f64)>,
}

impl SecularFunction {
    fn new(params: &ModelParams, parity: Parity) -> Self {
        let n = params.n_modes();
        let l = params.distance() as i64;
        let scale = params.coupling() * params.coupling() / n as f64;
        let poles = (0..=n / 2)
            .filter_map(|m| {
                let multiplicity = if m == 0 || 2 * m == n { 1.0 } else { 2.0 };
                let energy = -cos_2pi_frac(m as i64, n);
                let weight = scale * multiplicity * (1.0 + parity.sign() * cos_2pi_frac(m as i64 * l, n));
                (weight > 0.0).then_some((energy, weight))
            })
            .collect();
        Self {
            impurity_energy: params.impurity_energy(),
            poles,
        }
    }

    fn value(&self, omega: f64) -> f64 {
        omega - self.impurity_energy - self.poles.iter().map(|&(e, w)| w / (omega - e)).sum::<f64>()
    }

    fn derivative(&self, omega: f64) -> f64 {
        1.0 + self
            .poles
            .iter()
            .map(|&(e, w)| w / ((omega - e) * (omega - e)))
            .sum::<f64>()
    }
}

/// One endpoint of a search interval.
#[derive(Debug, Clone, Copy)]
enum Edge {
    /// A pole of the secular function; never evaluated.
    Pole(f64),
    Finite(f64),
}

impl Edge {
    fn position(self) -> f64 {
        match self {
            Edge::Pole(x) | Edge::Finite(x) => x,
        }
    }
}

fn bisect(f: &SecularFunction, parity: Parity, lo_edge: Edge, hi_edge: Edge) -> Result<f64> {
    let failure = || QstError::BracketFailure {
        parity,
        lo: lo_edge.position(),
        hi: hi_edge.position(),
    };
    let mut lo = lo_edge.position();
    let mut hi = hi_edge.position();
    let mut f_lo = None;
    let mut f_hi = None;
    if let Edge::Finite(x) = lo_edge {
        let v = f.value(x);
        if !(v < 0.0) {
            return Err(failure());
        }
        f_lo = Some(v);
    }
    if let Edge::Finite(x) = hi_edge {
        let v = f.value(x);
        if !(v > 0.0) {
            return Err(failure());
        }
        f_hi = Some(v);
    }
    loop {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f.value(mid);
        if v.is_nan() {
            return Err(failure());
        }
        if v < 0.0 {
            lo = mid;
            f_lo = Some(v);
        } else if v > 0.0 {
            hi = mid;
            f_hi = Some(v);
        } else {
            return Ok(mid);
        }
    }
    match (f_lo, f_hi) {
        (Some(a), Some(b)) => Ok(if a.abs() <= b.abs() { lo } else { hi }),
        // the root is within one ulp of a pole
        _ => Err(failure()),
    }
}

fn find_sector_roots(params: &ModelParams, parity: Parity) -> Result<Vec<(f64, f64)>> {
    let secular = SecularFunction::new(params, parity);
    let g = params.coupling();
    let reach = 1.0 + params.impurity_energy().abs() + 2.0 * g + 2.0 * g * g;

    let mut lower = -reach;
    let mut upper = reach;
    let first = secular.poles.first().map(|p| p.0);
    let last = secular.poles.last().map(|p| p.0);
    let mut expansions = 0;
    while !(secular.value(lower) < 0.0 && first.is_none_or(|p| lower < p)) {
        lower *= 2.0;
        expansions += 1;
        if expansions > MAX_BRACKET_EXPANSIONS || !lower.is_finite() {
            return Err(QstError::BracketFailure {
                parity,
                lo: lower,
                hi: first.unwrap_or(upper),
            });
        }
    }
    expansions = 0;
    while !(secular.value(upper) > 0.0 && last.is_none_or(|p| upper > p)) {
        upper *= 2.0;
        expansions += 1;
        if expansions > MAX_BRACKET_EXPANSIONS || !upper.is_finite() {
            return Err(QstError::BracketFailure {
                parity,
                lo: last.unwrap_or(lower),
                hi: upper,
            });
        }
    }

    let mut edges = Vec::with_capacity(secular.poles.len() + 2);
    edges.push(Edge::Finite(lower));
    edges.extend(secular.poles.iter().map(|&(e, _)| Edge::Pole(e)));
    edges.push(Edge::Finite(upper));

    edges
        .par_windows(2)
        .map(|w| {
            let root = bisect(&secular, parity, w[0], w[1])?;
            Ok((root, 1.0 / secular.derivative(root)))
        })
        .collect()
}

/// A real zero of `D₊` or `D₋` with its residue weight `1/D′(ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub omega: f64,
    pub parity: Parity,
    pub residue_weight: f64,
}

/// All real poles of the impurity propagator for one parameter set, sorted by
/// `(ω, parity)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    pub params: ModelParams,
    pub poles: Vec<Pole>,
}

impl PoleSet {
    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pole> {
        self.poles.iter()
    }

    pub fn with_parity(&self, parity: Parity) -> impl Iterator<Item = &Pole> {
        self.poles.iter().filter(move |p| p.parity == parity)
    }

    /// `Σ residue_weight / 2` over both sectors; 1 for a complete set.
    pub fn completeness(&self) -> f64 {
        self.poles.iter().map(|p| p.residue_weight).sum::<f64>() / 2.0
    }
}

/// Finds every real root of `D₊` and `D₋`.
pub fn find_poles(params: &ModelParams) -> Result<PoleSet> {
    if params.coupling() <= 0.0 {
        return Err(QstError::InvalidParams("pole search needs g > 0".into()));
    }
    let mut poles = Vec::new();
    for parity in Parity::BOTH {
        for (omega, residue_weight) in find_sector_roots(params, parity)? {
            poles.push(Pole {
                omega,
                parity,
                residue_weight,
            });
        }
    }
    poles.sort_by(|a, b| match a.omega.total_cmp(&b.omega) {
        Ordering::Equal => a.parity.cmp(&b.parity),
        other => other,
    });
    Ok(PoleSet {
        params: *params,
        poles,
    })
}

/// `⟨A|ψ(t)⟩` and `⟨B|ψ(t)⟩` for `ψ(0) = |A⟩` from the pole expansion
///
/// ```text
/// a_A(t) = ½ Σ₊ r_j e^{−iω_j t} + ½ Σ₋ r_j e^{−iω_j t}
/// a_B(t) = ½ Σ₊ r_j e^{−iω_j t} − ½ Σ₋ r_j e^{−iω_j t}
/// ```
pub fn reconstruct_amplitudes(poles: &PoleSet, times: &[f64]) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let sum = poles.completeness();
    if !((sum - 1.0).abs() <= COMPLETENESS_TOLERANCE) {
        return Err(QstError::Completeness { sum });
    }
    validate_times(times)?;
    let mut a = Vec::with_capacity(times.len());
    let mut b = Vec::with_capacity(times.len());
    for &t in times {
        let mut plus = Complex64::new(0.0, 0.0);
        let mut minus = Complex64::new(0.0, 0.0);
        for pole in poles.iter() {
            let term = Complex64::from_polar(pole.residue_weight, -pole.omega * t);
            match pole.parity {
                Parity::Plus => plus += term,
                Parity::Minus => minus += term,
            }
        }
        a.push((plus + minus) * 0.5);
        b.push((plus - minus) * 0.5);
    }
    Ok((a, b))
}
