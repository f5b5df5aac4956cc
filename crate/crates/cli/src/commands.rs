use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use qst_core::{
    classify_regime, find_poles, predict_strong, predict_weak_offres, predict_weak_resonant, transfer_metrics,
    ModelParams, Propagator, RabiPrediction, Regime, RegimeReport, ResonantPrediction, ResonantProfile,
    SingleExcitationState, StrongPrediction, Thresholds, Trajectory,
};
use rayon::prelude::*;

use crate::config::{CliError, CliResult, RunConfig};
use crate::csv::{ensure_dir, format_num, CsvSink, Field};

/// Occupations starting from the excitation on impurity A.
fn simulate_from_a(params: &ModelParams, times: &[f64]) -> CliResult<Trajectory> {
    let propagator = Propagator::from_params(params)?;
    Ok(propagator.impurity_trajectory(&SingleExcitationState::on_a(params), times)?)
}

/// Closed-form time profile applicable to one parameter set.
#[derive(Debug, Clone, Copy)]
enum Theory {
    Rabi(RabiPrediction),
    Resonant(ResonantProfile),
    Strong(StrongPrediction),
}

impl Theory {
    fn p_a(&self, t: f64) -> f64 {
        match self {
            Theory::Rabi(r) => r.p_a(t),
            Theory::Resonant(r) => r.p_a(t),
            Theory::Strong(s) => s.p_a(t),
        }
    }

    fn p_b(&self, t: f64) -> f64 {
        match self {
            Theory::Rabi(r) => r.p_b(t),
            Theory::Resonant(r) => r.p_b(t),
            Theory::Strong(s) => s.p_b(t),
        }
    }

    /// One full cycle of the predicted exchange.
    fn window(&self) -> f64 {
        match *self {
            Theory::Rabi(r) => r.rabi_period(),
            Theory::Resonant(ResonantProfile::EvenDistance { t_star, .. }) => 2.0 * t_star,
            Theory::Resonant(ResonantProfile::OddDistance { rate }) => PI / rate,
            Theory::Strong(s) => s.slow_period(),
        }
    }

    fn for_params(params: &ModelParams, report: &RegimeReport, thresholds: &Thresholds) -> CliResult<Self> {
        match report.regime {
            Regime::WeakOffResonance => Ok(Theory::Rabi(predict_weak_offres(params)?)),
            Regime::WeakResonantDiscrete => predict_weak_resonant(params, thresholds.resonance_tolerance)?
                .profile
                .map(Theory::Resonant)
                .ok_or_else(|| {
                    CliError::Usage("closed-form resonant profile exists only for omega = 0 with g > 0".into())
                }),
            Regime::StrongCoupling => Ok(Theory::Strong(predict_strong(params))),
            other => Err(CliError::Usage(format!("no closed-form time profile for regime {other}"))),
        }
    }
}

/// Default end time for a parameter point: one predicted cycle where a
/// closed form exists, otherwise twice the weak resonant transfer time.
fn natural_end(params: &ModelParams, report: &RegimeReport, thresholds: &Thresholds) -> Option<f64> {
    if let Ok(theory) = Theory::for_params(params, report, thresholds) {
        return Some(theory.window());
    }
    let g = params.coupling();
    (g > 0.0).then(|| 2.0 * FRAC_PI_2 * (params.n_modes() as f64).sqrt() / g)
}

pub fn simulate(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.params()?;
    let report = classify_regime(&params, &cfg.thresholds);
    let times = cfg.times(natural_end(&params, &report, &cfg.thresholds))?;
    let traj = simulate_from_a(&params, &times)?;
    let mut out = CsvSink::create(cfg.out.as_deref(), &["t", "p_a", "p_b", "p_chan"])?;
    for i in 0..traj.len() {
        out.row(&[
            Field::Num(traj.times[i]),
            Field::Num(traj.p_a[i]),
            Field::Num(traj.p_b[i]),
            Field::Num(traj.p_chan[i]),
        ])?;
    }
    out.finish()
}

pub fn poles(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.params()?;
    let poles = find_poles(&params)?;
    let mut out = CsvSink::create(cfg.out.as_deref(), &["omega", "parity", "residue_weight"])?;
    for pole in poles.iter() {
        out.row(&[Field::Num(pole.omega), Field::Text(pole.parity.name()), Field::Num(pole.residue_weight)])?;
    }
    out.finish()
}

const PREDICT_HEADER: &[&str] = &[
    "n",
    "l",
    "g",
    "omega",
    "regime",
    "g_sqrt_n",
    "resonance_offset",
    "nearest_energy",
    "omega_plus",
    "omega_minus",
    "omega_plus_continuum",
    "omega_minus_continuum",
    "rabi_period",
    "gamma_big",
    "resonant_flag",
    "delta1_plus",
    "delta1_minus",
    "delta2_plus",
    "delta2_minus",
    "delta1_plus_closed",
    "delta1_minus_closed",
    "delta2_plus_closed",
    "delta2_minus_closed",
    "t_star",
    "fast_freq",
    "slow_freq",
];

fn opt(x: Option<f64>) -> Field<'static> {
    x.map_or(Field::Empty, Field::Num)
}

pub fn predict(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.params()?;
    let report = classify_regime(&params, &cfg.thresholds);
    let d = report.diagnostics;

    let rabi = match report.regime {
        Regime::WeakOffResonance => Some(predict_weak_offres(&params)?),
        _ => None,
    };
    // Resonant columns are reported whenever Ω sits on a mode, including the
    // crossover band between the discrete and diffusive thresholds.
    let resonant: Option<ResonantPrediction> = match report.regime {
        Regime::WeakResonantDiscrete | Regime::WeakResonantDiffusive => {
            Some(predict_weak_resonant(&params, cfg.thresholds.resonance_tolerance)?)
        }
        Regime::Crossover if d.resonant => predict_weak_resonant(&params, cfg.thresholds.resonance_tolerance).ok(),
        _ => None,
    };
    let strong = match report.regime {
        Regime::StrongCoupling => Some(predict_strong(&params)),
        _ => None,
    };

    let mut row = vec![
        Field::Int(params.n_modes()),
        Field::Int(params.distance()),
        Field::Num(params.coupling()),
        Field::Num(params.impurity_energy()),
        Field::Text(report.regime.name()),
        Field::Num(d.g_sqrt_n),
        Field::Num(d.resonance_offset),
        Field::Num(d.nearest_energy),
    ];
    row.extend([
        opt(rabi.map(|r| r.omega_plus)),
        opt(rabi.map(|r| r.omega_minus)),
        opt(rabi.map(|r| r.omega_plus_continuum)),
        opt(rabi.map(|r| r.omega_minus_continuum)),
        opt(rabi.map(|r| r.rabi_period())),
    ]);
    row.push(opt(resonant.map(|r| r.gamma_big)));
    row.push(resonant.map_or(Field::Empty, |r| Field::Text(r.regime_flag.name())));
    for roots in [resonant.map(|r| r.delta_polished), resonant.map(|r| r.delta_closed)] {
        match roots {
            Some(roots) => row.extend(roots.as_array().map(Field::Num)),
            None => row.extend((0..4).map(|_| Field::Empty)),
        }
    }
    row.push(opt(resonant.and_then(|r| r.t_star())));
    row.push(opt(strong.map(|s| s.fast_freq)));
    row.push(opt(strong.map(|s| s.slow_freq)));

    let mut out = CsvSink::create(cfg.out.as_deref(), PREDICT_HEADER)?;
    out.row(&row)?;
    out.finish()
}

pub fn compare(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.params()?;
    let tolerance = cfg
        .tolerance
        .ok_or_else(|| CliError::Usage("compare requires --tolerance".into()))?;
    let report = classify_regime(&params, &cfg.thresholds);
    let theory = Theory::for_params(&params, &report, &cfg.thresholds)?;
    let times = cfg.times(Some(theory.window()))?;
    let traj = simulate_from_a(&params, &times)?;

    let mut out = CsvSink::create(
        cfg.out.as_deref(),
        &["t", "p_a_num", "p_b_num", "p_a_th", "p_b_th", "deviation"],
    )?;
    let mut worst = 0.0f64;
    for i in 0..traj.len() {
        let t = traj.times[i];
        let (p_a_th, p_b_th) = (theory.p_a(t), theory.p_b(t));
        let deviation = (traj.p_a[i] - p_a_th).abs().max((traj.p_b[i] - p_b_th).abs());
        worst = worst.max(deviation);
        out.row(&[
            Field::Num(t),
            Field::Num(traj.p_a[i]),
            Field::Num(traj.p_b[i]),
            Field::Num(p_a_th),
            Field::Num(p_b_th),
            Field::Num(deviation),
        ])?;
    }
    out.finish()?;

    let summary = format!("max_abs_deviation={}", format_num(worst));
    if cfg.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    if worst < tolerance {
        Ok(())
    } else {
        Err(CliError::Tolerance(format!("{} is not below {}", format_num(worst), format_num(tolerance))))
    }
}

struct SweepPoint {
    params: ModelParams,
    end: f64,
    regime: Regime,
}

struct SweepRow {
    regime: Regime,
    max_p_b: f64,
    t_at_max: f64,
}

fn axis<T: Copy>(swept: &Option<Vec<T>>, base: Option<T>, name: &str) -> CliResult<Vec<T>> {
    match (swept, base) {
        (Some(values), _) => Ok(values.clone()),
        (None, Some(value)) => Ok(vec![value]),
        (None, None) => Err(CliError::Usage(format!("missing --{name} or --sweep-{name}"))),
    }
}

pub fn sweep(cfg: &RunConfig) -> CliResult<()> {
    let gs = axis(&cfg.sweep.g, cfg.g, "g")?;
    let omegas = axis(&cfg.sweep.omega, cfg.omega, "omega")?;
    let ns = axis(&cfg.sweep.n, cfg.n, "n")?;
    let ls = if cfg.sweep.l_half {
        if cfg.l.is_some() {
            return Err(CliError::Usage("--l-half and --l are mutually exclusive".into()));
        }
        Vec::new()
    } else {
        axis(&cfg.sweep.l, cfg.l, "l")?
    };

    // Validate the whole grid before computing anything.
    let mut points = Vec::new();
    for &g in &gs {
        for &omega in &omegas {
            for &n in &ns {
                let point_ls = if cfg.sweep.l_half { vec![n / 2] } else { ls.clone() };
                for l in point_ls {
                    let params = ModelParams::new(n, l, g, omega)?;
                    let report = classify_regime(&params, &cfg.thresholds);
                    let end = match cfg.t_end {
                        Some(end) => end,
                        None => natural_end(&params, &report, &cfg.thresholds).ok_or_else(|| {
                            CliError::Usage(format!(
                                "cannot infer a time window at g={g}, omega={omega}, n={n}, l={l}; pass --t-end"
                            ))
                        })?,
                    };
                    if !(end.is_finite() && end > cfg.t_start) {
                        return Err(CliError::Usage(format!(
                            "empty time window at g={g}, omega={omega}, n={n}, l={l}; pass --t-end"
                        )));
                    }
                    points.push(SweepPoint {
                        params,
                        end,
                        regime: report.regime,
                    });
                }
            }
        }
    }

    // Results are collected in grid order whatever the scheduling.
    let rows: Vec<CliResult<SweepRow>> = points
        .par_iter()
        .map(|point| {
            let times = qst_core::time_grid(cfg.t_start, point.end, cfg.samples)?;
            let traj = simulate_from_a(&point.params, &times)?;
            let metrics = transfer_metrics(&traj)?;
            Ok(SweepRow {
                regime: point.regime,
                max_p_b: metrics.max_p_b,
                t_at_max: metrics.t_at_max,
            })
        })
        .collect();

    let mut out = CsvSink::create(cfg.out.as_deref(), &["g", "omega", "n", "l", "regime", "max_p_b", "t_at_max"])?;
    for (point, row) in points.iter().zip(rows) {
        let row = row?;
        let p = &point.params;
        out.row(&[
            Field::Num(p.coupling()),
            Field::Num(p.impurity_energy()),
            Field::Int(p.n_modes()),
            Field::Int(p.distance()),
            Field::Text(row.regime.name()),
            Field::Num(row.max_p_b),
            Field::Num(row.t_at_max),
        ])?;
    }
    out.finish()
}

const FIGURE_HEADER: &[&str] = &["t", "p_a_num", "p_b_num", "p_a_th", "p_b_th"];

/// Samples per fast period on the dense strong-coupling grid.
const DENSE_SAMPLES_PER_FAST_PERIOD: f64 = 20.0;

/// Writes one figure file; `unit` rescales the time column.
fn write_figure(path: &Path, params: &ModelParams, theory: &Theory, times: &[f64], unit: f64) -> CliResult<()> {
    let traj = simulate_from_a(params, times)?;
    let mut out = CsvSink::create(Some(path), FIGURE_HEADER)?;
    for i in 0..traj.len() {
        let t = traj.times[i];
        out.row(&[
            Field::Num(t * unit),
            Field::Num(traj.p_a[i]),
            Field::Num(traj.p_b[i]),
            Field::Num(theory.p_a(t)),
            Field::Num(theory.p_b(t)),
        ])?;
    }
    out.finish()
}

pub fn figures(cfg: &RunConfig) -> CliResult<()> {
    if cfg.has_model_flags() || cfg.t_end.is_some() || cfg.t_start != 0.0 {
        return Err(CliError::Usage(
            "figures uses fixed parameters and windows; only --samples, --out and --dense apply".into(),
        ));
    }
    let dir = cfg.out.clone().unwrap_or_else(|| ".".into());
    ensure_dir(&dir)?;
    let samples = cfg.samples;

    // Weak coupling off resonance, raw time over one Rabi period.
    let p1 = ModelParams::new(30, 6, 0.05, 1.5)?;
    let rabi = Theory::Rabi(predict_weak_offres(&p1)?);
    let times = qst_core::time_grid(0.0, rabi.window(), samples)?;
    write_figure(&dir.join("fig1.csv"), &p1, &rabi, &times, 1.0)?;

    // Resonant transfer, time in units of 1/(√2·g/√N) over [0, 2t*].
    let p2 = ModelParams::new(16, 8, 0.01, 0.0)?;
    let profile = predict_weak_resonant(&p2, cfg.thresholds.resonance_tolerance)?
        .profile
        .ok_or_else(|| CliError::Numerical("missing resonant profile".into()))?;
    let resonant = Theory::Resonant(profile);
    let times = qst_core::time_grid(0.0, resonant.window(), samples)?;
    let unit = 2.0f64.sqrt() * p2.coupling() / (p2.n_modes() as f64).sqrt();
    write_figure(&dir.join("fig2.csv"), &p2, &resonant, &times, unit)?;

    // Strong coupling, time in units of 1/slow_freq. The envelope grid spans
    // one slow period; the fast grid spans four fast periods around the
    // envelope maximum of P_B.
    let p3 = ModelParams::new(50, 4, 10.0, 0.0)?;
    let strong = predict_strong(&p3);
    let theory = Theory::Strong(strong);
    let unit = strong.slow_freq;
    let envelope_samples = if cfg.dense {
        let per_slow = strong.slow_period() / strong.fast_period();
        samples.max((per_slow * DENSE_SAMPLES_PER_FAST_PERIOD).ceil() as usize + 1)
    } else {
        samples
    };
    let times = qst_core::time_grid(0.0, strong.slow_period(), envelope_samples)?;
    write_figure(&dir.join("fig3.csv"), &p3, &theory, &times, unit)?;
    let centre = 0.5 * strong.slow_period();
    let half = 2.0 * strong.fast_period();
    let times = qst_core::time_grid(centre - half, centre + half, samples)?;
    write_figure(&dir.join("fig3_fast.csv"), &p3, &theory, &times, unit)
}
