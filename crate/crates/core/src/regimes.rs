//! Closed-form predictions for the three coherent regimes, the
//! discrete/continuum classifier and transfer metrics on trajectories.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::dynamics::Trajectory;
use crate::error::{QstError, Result};
use crate::model::{cos_2pi_frac, mode_grid, unit_phase, ModelParams};
use crate::spectral::{lambda_closed, lambda_continuum};

pub const DEFAULT_RESONANCE_TOLERANCE: f64 = 1e-9;
/// `max|δ|·N` above which the resonant expansion is treated as diffusive.
pub const DISCRETE_DELTA_N: f64 = 1.0;
const TIE_TOLERANCE: f64 = 1e-9;

/// Weak coupling, impurity level outside the band: two-level Rabi exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiPrediction {
    /// `2[Ω + Λ_0(Ω)]`, finite `N`. Both finite-`N` frequencies use the
    /// geometric closed form, which keeps full relative precision where the
    /// mode sum is swamped by round-off.
    pub omega_plus: f64,
    /// `2Λ_L(Ω)`, finite `N`.
    pub omega_minus: f64,
    pub omega_plus_continuum: f64,
    pub omega_minus_continuum: f64,
}

impl RabiPrediction {
    pub fn p_a(&self, t: f64) -> f64 {
        (0.5 * self.omega_minus * t).cos().powi(2)
    }

    pub fn p_b(&self, t: f64) -> f64 {
        (0.5 * self.omega_minus * t).sin().powi(2)
    }

    /// Time for a full `A → B → A` cycle, `2π/|ω₋|`.
    pub fn rabi_period(&self) -> f64 {
        2.0 * PI / self.omega_minus.abs()
    }

    pub fn transfer_time(&self) -> f64 {
        PI / self.omega_minus.abs()
    }
}

pub fn predict_weak_offres(params: &ModelParams) -> Result<RabiPrediction> {
    let omega = params.impurity_energy();
    if omega.abs() <= 1.0 {
        return Err(QstError::Regime(format!(
            "off-resonance prediction needs |Ω| > 1, got Ω = {omega}"
        )));
    }
    let l = params.distance() as i64;
    let g = params.coupling();
    Ok(RabiPrediction {
        omega_plus: 2.0 * (omega + lambda_closed(0, omega, params)?),
        omega_minus: 2.0 * lambda_closed(l, omega, params)?,
        omega_plus_continuum: 2.0 * (omega + lambda_continuum(0, omega, g)?),
        omega_minus_continuum: 2.0 * lambda_continuum(l, omega, g)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonantFlag {
    Discrete,
    Diffusive,
}

impl ResonantFlag {
    pub fn name(self) -> &'static str {
        match self {
            ResonantFlag::Discrete => "discrete",
            ResonantFlag::Diffusive => "diffusive",
        }
    }
}

/// Offsets `γ − Γ` of the four resonant roots. `δ₁` belongs to `D₋`, `δ₂` to
/// `D₊`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaRoots {
    pub d1_plus: f64,
    pub d1_minus: f64,
    pub d2_plus: f64,
    pub d2_minus: f64,
}

impl DeltaRoots {
    pub fn as_array(&self) -> [f64; 4] {
        [self.d1_plus, self.d1_minus, self.d2_plus, self.d2_minus]
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// Closed-form occupation profiles at `Ω = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResonantProfile {
    /// `P_A = cos⁴(gt/√N)`, `P_B = sin⁴(gt/√N)`.
    EvenDistance { rate: f64, t_star: f64 },
    /// `P_A = cos²(gt√(2/N))`, `P_B ≡ 0`.
    OddDistance { rate: f64 },
}

impl ResonantProfile {
    pub fn p_a(&self, t: f64) -> f64 {
        match *self {
            ResonantProfile::EvenDistance { rate, .. } => (rate * t).cos().powi(4),
            ResonantProfile::OddDistance { rate } => (rate * t).cos().powi(2),
        }
    }

    pub fn p_b(&self, t: f64) -> f64 {
        match *self {
            ResonantProfile::EvenDistance { rate, .. } => (rate * t).sin().powi(4),
            ResonantProfile::OddDistance { .. } => 0.0,
        }
    }

    pub fn t_star(&self) -> Option<f64> {
        match *self {
            ResonantProfile::EvenDistance { t_star, .. } => Some(t_star),
            ResonantProfile::OddDistance { .. } => None,
        }
    }
}

/// Weak coupling with `Ω` resonant with a channel mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonantPrediction {
    /// `Γ ∈ (0, π)` with `Ω = −cos Γ`.
    pub gamma_big: f64,
    pub resonant_energy: f64,
    pub delta_closed: DeltaRoots,
    pub delta_polished: DeltaRoots,
    pub regime_flag: ResonantFlag,
    pub profile: Option<ResonantProfile>,
}

impl ResonantPrediction {
    pub fn t_star(&self) -> Option<f64> {
        self.profile.and_then(|p| p.t_star())
    }

    /// Energy offsets `ω − Ω ≈ sin Γ·δ` of the polished roots.
    pub fn energy_offsets(&self) -> DeltaRoots {
        let s = self.gamma_big.sin();
        let d = self.delta_polished;
        DeltaRoots {
            d1_plus: s * d.d1_plus,
            d1_minus: s * d.d1_minus,
            d2_plus: s * d.d2_plus,
            d2_minus: s * d.d2_minus,
        }
    }
}

/// Nearest channel energy to `Ω`: `(mode index m ≤ N/2, ε_m, |Ω − ε_m|)`.
fn nearest_mode(params: &ModelParams) -> (usize, f64, f64) {
    let grid = mode_grid(params);
    let omega = params.impurity_energy();
    (0..=params.n_modes() / 2)
        .map(|m| (m, grid.energies[m], (omega - grid.energies[m]).abs()))
        .fold((0, grid.energies[0], f64::INFINITY), |best, cur| if cur.2 < best.2 { cur } else { best })
}

/// Solves `δ = c·[a·cot(δN/2) + s]` on the first cotangent branch of the
/// requested sign. `a ≥ 0`.
fn polish_delta(c: f64, a: f64, s: f64, n: f64, positive: bool) -> f64 {
    let f = |d: f64| d - c * (a / (0.5 * d * n).tan() + s);
    if a == 0.0 {
        return c * s;
    }
    let branch = 2.0 * PI / n;
    let (mut lo, mut hi) = if positive { (0.0, branch) } else { (-branch, 0.0) };
    for _ in 0..200 {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v < 0.0 {
            lo = mid;
        } else if v > 0.0 {
            hi = mid;
        } else {
            return mid;
        }
    }
    lo + 0.5 * (hi - lo)
}

pub fn predict_weak_resonant(params: &ModelParams, resonance_tolerance: f64) -> Result<ResonantPrediction> {
    let omega = params.impurity_energy();
    if omega.abs() >= 1.0 {
        return Err(QstError::Regime(format!(
            "resonant expansion needs |Ω| < 1, got Ω = {omega}"
        )));
    }
    let (mode, resonant_energy, offset) = nearest_mode(params);
    if offset > resonance_tolerance {
        return Err(QstError::Regime(format!(
            "no channel mode within {resonance_tolerance:e} of Ω = {omega} (nearest ε = {resonant_energy}, \
             offset {offset:e}); the resonant expansion does not apply"
        )));
    }

    let n = params.n_modes();
    let nf = n as f64;
    let g = params.coupling();
    let gamma_big = (-omega).acos();
    let sin_gamma = gamma_big.sin();
    // Γ is the resonant wavenumber, so ΓL is evaluated on the exact grid phase
    let phase_index = (mode * params.distance()) as i64;
    let cos_gl = cos_2pi_frac(phase_index, n);
    let sin_gl = unit_phase(phase_index, n).im;

    let scale = g / sin_gamma * (2.0 / nf).sqrt();
    let d1 = scale * (1.0 - cos_gl).max(0.0).sqrt();
    let d2 = scale * (1.0 + cos_gl).max(0.0).sqrt();
    let delta_closed = DeltaRoots {
        d1_plus: d1,
        d1_minus: -d1,
        d2_plus: d2,
        d2_minus: -d2,
    };

    let diverged = delta_closed.max_abs() * nf / 2.0 >= PI;
    let regime_flag = if diverged || delta_closed.max_abs() * nf > DISCRETE_DELTA_N {
        ResonantFlag::Diffusive
    } else {
        ResonantFlag::Discrete
    };
    let delta_polished = if diverged {
        delta_closed
    } else {
        let c = g * g / (sin_gamma * sin_gamma);
        DeltaRoots {
            d1_plus: polish_delta(c, 1.0 - cos_gl, -sin_gl, nf, true),
            d1_minus: polish_delta(c, 1.0 - cos_gl, -sin_gl, nf, false),
            d2_plus: polish_delta(c, 1.0 + cos_gl, sin_gl, nf, true),
            d2_minus: polish_delta(c, 1.0 + cos_gl, sin_gl, nf, false),
        }
    };

    let profile = (omega.abs() <= resonance_tolerance && g > 0.0).then(|| {
        let sqrt_n = nf.sqrt();
        if params.distance().is_multiple_of(2) {
            ResonantProfile::EvenDistance {
                rate: g / sqrt_n,
                t_star: FRAC_PI_2 * sqrt_n / g,
            }
        } else {
            ResonantProfile::OddDistance {
                rate: g * (2.0 / nf).sqrt(),
            }
        }
    });

    Ok(ResonantPrediction {
        gamma_big,
        resonant_energy,
        delta_closed,
        delta_polished,
        regime_flag,
        profile,
    })
}

/// Strong coupling: fast impurity–channel oscillation at `g` modulating a
/// slow `A ↔ B` exchange at `g / (2(2g)^L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongPrediction {
    pub fast_freq: f64,
    pub slow_freq: f64,
}

impl StrongPrediction {
    pub fn p_a(&self, t: f64) -> f64 {
        (self.fast_freq * t).cos().powi(2) * (self.slow_freq * t).cos().powi(2)
    }

    pub fn p_b(&self, t: f64) -> f64 {
        (self.fast_freq * t).cos().powi(2) * (self.slow_freq * t).sin().powi(2)
    }

    pub fn channel_weight(&self, t: f64) -> f64 {
        (self.fast_freq * t).sin().powi(2)
    }

    /// Upper envelope of `P_B`, `sin²(slow_freq·t)`.
    pub fn p_b_envelope(&self, t: f64) -> f64 {
        (self.slow_freq * t).sin().powi(2)
    }

    /// Period of the slow envelope, `π / slow_freq`.
    pub fn slow_period(&self) -> f64 {
        PI / self.slow_freq
    }

    pub fn fast_period(&self) -> f64 {
        PI / self.fast_freq
    }
}

/// `Ω` is irrelevant at leading order in `1/g`.
pub fn predict_strong(params: &ModelParams) -> StrongPrediction {
    let g = params.coupling();
    let slow_freq = if g == 0.0 {
        0.0
    } else {
        g / (2.0 * (2.0 * g).powi(params.distance() as i32))
    };
    StrongPrediction { fast_freq: g, slow_freq }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    WeakOffResonance,
    WeakResonantDiscrete,
    WeakResonantDiffusive,
    StrongCoupling,
    Crossover,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::WeakOffResonance => "WeakOffResonance",
            Regime::WeakResonantDiscrete => "WeakResonantDiscrete",
            Regime::WeakResonantDiffusive => "WeakResonantDiffusive",
            Regime::StrongCoupling => "StrongCoupling",
            Regime::Crossover => "Crossover",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Classifier thresholds on `g√N` (discrete, diffusive) and `g` (strong).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub discrete: f64,
    pub diffusive: f64,
    pub strong: f64,
    pub resonance_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            discrete: 0.3,
            diffusive: 3.0,
            strong: 3.0,
            resonance_tolerance: DEFAULT_RESONANCE_TOLERANCE,
        }
    }
}

impl Thresholds {
    pub fn new(discrete: f64, diffusive: f64, strong: f64) -> Result<Self> {
        let t = Self {
            discrete,
            diffusive,
            strong,
            ..Self::default()
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.discrete, self.diffusive, self.strong, self.resonance_tolerance];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(QstError::InvalidParams(format!("thresholds must be finite and >= 0: {self:?}")));
        }
        if self.discrete > self.diffusive {
            return Err(QstError::InvalidParams(format!(
                "discrete threshold {} exceeds diffusive threshold {}",
                self.discrete, self.diffusive
            )));
        }
        Ok(())
    }
}

impl FromStr for Thresholds {
    type Err = QstError;

    /// Parses `discrete,diffusive,strong`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(QstError::InvalidParams(format!(
                "expected `discrete,diffusive,strong`, got {s:?}"
            )));
        }
        let mut values = [0.0; 3];
        for (slot, part) in values.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|_| QstError::InvalidParams(format!("bad threshold {part:?} in {s:?}")))?;
        }
        Self::new(values[0], values[1], values[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub g_sqrt_n: f64,
    pub abs_omega: f64,
    pub band_edge: f64,
    pub outside_band: bool,
    /// `min_n |Ω − ε_n|`.
    pub resonance_offset: f64,
    pub nearest_energy: f64,
    pub resonant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    pub diagnostics: Diagnostics,
}

pub fn classify_regime(params: &ModelParams, thresholds: &Thresholds) -> RegimeReport {
    let g = params.coupling();
    let omega = params.impurity_energy();
    let (_, nearest_energy, resonance_offset) = nearest_mode(params);
    let diagnostics = Diagnostics {
        g_sqrt_n: g * (params.n_modes() as f64).sqrt(),
        abs_omega: omega.abs(),
        band_edge: 1.0,
        outside_band: omega.abs() > 1.0,
        resonance_offset,
        nearest_energy,
        resonant: omega.abs() < 1.0 && resonance_offset <= thresholds.resonance_tolerance,
    };
    let regime = if g >= thresholds.strong {
        Regime::StrongCoupling
    } else if diagnostics.outside_band {
        Regime::WeakOffResonance
    } else if diagnostics.resonant {
        if diagnostics.g_sqrt_n <= thresholds.discrete {
            Regime::WeakResonantDiscrete
        } else if diagnostics.g_sqrt_n >= thresholds.diffusive {
            Regime::WeakResonantDiffusive
        } else {
            Regime::Crossover
        }
    } else {
        Regime::Crossover
    };
    RegimeReport { regime, diagnostics }
}

/// Peak transfer found on a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct TransferMetrics<'a> {
    pub max_p_b: f64,
    pub t_at_max: f64,
    trajectory: &'a Trajectory,
}

impl TransferMetrics<'_> {
    /// `P_B` linearly interpolated at `t`; `None` outside the sampled range.
    pub fn p_b_at(&self, t: f64) -> Option<f64> {
        let times = &self.trajectory.times;
        let p_b = &self.trajectory.p_b;
        if !(t >= times[0] && t <= times[times.len() - 1]) {
            return None;
        }
        let hi = times.partition_point(|&x| x < t);
        if times[hi] == t {
            return Some(p_b[hi]);
        }
        let lo = hi - 1;
        let w = (t - times[lo]) / (times[hi] - times[lo]);
        Some(p_b[lo] + w * (p_b[hi] - p_b[lo]))
    }
}

/// Maximum of `P_B` over the grid, refined by a parabola through the
/// neighbours of the earliest grid maximum.
pub fn transfer_metrics(traj: &Trajectory) -> Result<TransferMetrics<'_>> {
    if traj.times.is_empty() || traj.p_b.len() != traj.times.len() {
        return Err(QstError::EmptyTrajectory);
    }
    let grid_max = traj.p_b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let i = traj
        .p_b
        .iter()
        .position(|&p| p >= grid_max - TIE_TOLERANCE)
        .expect("a maximum exists");
    let (mut max_p_b, mut t_at_max) = (traj.p_b[i], traj.times[i]);

    if i > 0 && i + 1 < traj.len() {
        let (y0, y1, y2) = (traj.p_b[i - 1], traj.p_b[i], traj.p_b[i + 1]);
        let x0 = traj.times[i - 1] - traj.times[i];
        let x2 = traj.times[i + 1] - traj.times[i];
        let curvature = ((y2 - y1) / x2 - (y0 - y1) / x0) / (x2 - x0);
        let slope = (y2 - y1) / x2 - curvature * x2;
        if curvature < 0.0 {
            let x = (-slope / (2.0 * curvature)).clamp(x0, x2);
            let peak = y1 + slope * x + curvature * x * x;
            if peak > max_p_b {
                max_p_b = peak.min(1.0);
                t_at_max = traj.times[i] + x;
            }
        }
    }
    Ok(TransferMetrics {
        max_p_b,
        t_at_max,
        trajectory: traj,
    })
}
