use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qst-channel"))
        .args(args)
        .env_remove("QST_CHANNEL_THRESHOLDS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Parses a CSV body into a header and numeric-or-text rows.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    assert!(text.ends_with('\n') && !text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

const FIG1: &[&str] = &["--n", "30", "--l", "6", "--g", "0.05", "--omega", "1.5"];
const FIG2: &[&str] = &["--n", "16", "--l", "8", "--g", "0.01", "--omega", "0"];
const FIG3: &[&str] = &["--n", "50", "--l", "4", "--g", "10", "--omega", "0"];

fn with<'a>(cmd: &'a str, base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![cmd];
    args.extend_from_slice(base);
    args.extend_from_slice(extra);
    args
}

#[test]
fn simulate_is_byte_deterministic() {
    let args = with("simulate", FIG2, &["--samples", "500"]);
    let (a, b) = (qst(&args), qst(&args));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let (header, rows) = table(&stdout(&a));
    assert_eq!(header, ["t", "p_a", "p_b", "p_chan"]);
    assert_eq!(rows.len(), 500);
}

#[test]
fn uncoupled_impurity_stays_put() {
    let out = qst(&["simulate", "--n", "8", "--l", "2", "--g", "0", "--omega", "0.3", "--t-end", "50", "--samples", "11"]);
    assert_eq!(code(&out), 0);
    let (header, rows) = table(&stdout(&out));
    // |e^{−iΩt}|² is 1 up to rounding of the phase factor
    assert!(column(&header, &rows, "p_a").iter().all(|&p| (p - 1.0).abs() <= 4.0 * f64::EPSILON));
}

#[test]
fn resonant_transfer_completes_at_t_star() {
    let out = qst(&with("simulate", FIG2, &["--t-end", "1256.6370614359173", "--samples", "2001"]));
    let (header, rows) = table(&stdout(&out));
    let t = column(&header, &rows, "t");
    let p_b = column(&header, &rows, "p_b");
    let t_star = 628.3185307179587;
    let i = (0..t.len()).min_by(|&a, &b| (t[a] - t_star).abs().total_cmp(&(t[b] - t_star).abs())).unwrap();
    assert!(p_b[i] >= 0.999, "P_B {} at t={}", p_b[i], t[i]);
}

#[test]
fn simulate_writes_file_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("run.csv");
    let out = qst(&with("simulate", FIG1, &["--samples", "20", "--out", dest.to_str().unwrap()]));
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    assert_eq!(fs::read_to_string(&dest).unwrap().lines().count(), 21);
}

#[test]
fn invalid_configuration_exits_two_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("run.csv");
    let dest = dest.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate", "--n", "4", "--l", "9", "--g", "1", "--omega", "0", "--out", dest],
        with("simulate", FIG1, &["--samples", "1", "--out", dest]),
        with("simulate", FIG1, &["--t-start", "5", "--t-end", "5", "--out", dest]),
        with("simulate", FIG1, &["--t-start", "-1", "--out", dest]),
        vec!["simulate", "--n", "4", "--out", dest],
        vec!["simulate", "--bogus"],
        vec!["teleport"],
        with("compare", FIG1, &["--out", dest]),
        vec!["poles", "--n", "4", "--l", "2", "--g", "0", "--omega", "1.5", "--out", dest],
    ];
    for args in cases {
        let out = qst(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
        assert!(!Path::new(dest).exists(), "{args:?} left a file");
    }
}

#[test]
fn poles_match_eigenvalues_and_complete() {
    let out = qst(&["poles", "--n", "4", "--l", "2", "--g", "0.1", "--omega", "1.5"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let (header, rows) = table(&text);
    assert_eq!(header, ["omega", "parity", "residue_weight"]);
    let omega = column(&header, &rows, "omega");
    let weight = column(&header, &rows, "residue_weight");
    assert!((weight.iter().sum::<f64>() / 2.0 - 1.0).abs() <= 1e-8);
    assert!(omega.windows(2).all(|w| w[0] <= w[1]));
    assert!(rows.iter().all(|r| r[1] == "plus" || r[1] == "minus"));

    let params = qst_core::ModelParams::new(4, 2, 0.1, 1.5).unwrap();
    let spectrum = qst_core::eigendecompose(&qst_core::build_hamiltonian(&params)).unwrap();
    for w in &omega {
        let nearest = spectrum.eigenvalues.iter().map(|e| (e - w).abs()).fold(f64::INFINITY, f64::min);
        assert!(nearest <= 1e-8, "pole {w} off spectrum by {nearest}");
    }
}

#[test]
fn weak_coupling_poles_sit_near_bare_levels() {
    let out = qst(&["poles", "--n", "4", "--l", "1", "--g", "1e-6", "--omega", "0.5"]);
    let (header, rows) = table(&stdout(&out));
    let bare = [-1.0, 0.0, 0.5, 1.0];
    for w in column(&header, &rows, "omega") {
        assert!(bare.iter().any(|b| (b - w).abs() <= 1e-6), "pole {w}");
    }
}

fn predict_row(base: &[&str]) -> (Vec<String>, Vec<String>) {
    let out = qst(&with("predict", base, &[]));
    assert_eq!(code(&out), 0);
    let (header, mut rows) = table(&stdout(&out));
    assert_eq!(rows.len(), 1);
    (header, rows.remove(0))
}

fn cell<'a>(header: &[String], row: &'a [String], name: &str) -> &'a str {
    &row[header.iter().position(|h| h == name).unwrap()]
}

#[test]
fn predict_reports_each_regime() {
    let (h, r) = predict_row(FIG1);
    assert_eq!(cell(&h, &r, "regime"), "WeakOffResonance");
    assert!(cell(&h, &r, "omega_minus").parse::<f64>().unwrap() > 0.0);
    assert!(!cell(&h, &r, "omega_minus_continuum").is_empty());

    let (h, r) = predict_row(FIG2);
    assert_eq!(cell(&h, &r, "regime"), "WeakResonantDiscrete");
    let t_star: f64 = cell(&h, &r, "t_star").parse().unwrap();
    assert!((t_star - 628.3185307179587).abs() <= 1e-9);
    let d2: f64 = cell(&h, &r, "delta2_plus_closed").parse().unwrap();
    assert!((d2 - 0.005).abs() <= 1e-12);

    let (h, r) = predict_row(FIG3);
    assert_eq!(cell(&h, &r, "regime"), "StrongCoupling");
    let slow: f64 = cell(&h, &r, "slow_freq").parse().unwrap();
    assert!((slow - 3.125e-5).abs() <= 1e-18);

    let (h, r) = predict_row(&["--n", "30", "--l", "6", "--g", "0.05", "--omega", "0.3"]);
    assert_eq!(cell(&h, &r, "regime"), "Crossover");
    let first = h.iter().position(|c| c == "omega_plus").unwrap();
    assert!(r[first..].iter().all(String::is_empty), "{r:?}");
}

#[test]
fn compare_exit_codes_follow_tolerance() {
    for (base, tol) in [(FIG2, "0.02"), (FIG1, "0.05")] {
        let out = qst(&with("compare", base, &["--tolerance", tol]));
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).contains("max_abs_deviation="));
    }
    let out = qst(&with("compare", FIG2, &["--tolerance", "0"]));
    assert_eq!(code(&out), 4);
}

#[test]
fn compare_summary_goes_to_stdout_with_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("cmp.csv");
    let out = qst(&with("compare", FIG2, &["--tolerance", "0.02", "--out", dest.to_str().unwrap()]));
    assert_eq!(code(&out), 0);
    let summary = stdout(&out);
    let value: f64 = summary.trim().strip_prefix("max_abs_deviation=").unwrap().parse().unwrap();
    let (header, rows) = table(&fs::read_to_string(&dest).unwrap());
    let worst = column(&header, &rows, "deviation").into_iter().fold(0.0, f64::max);
    assert_eq!(value, worst);
    assert!(worst < 0.02);
}

#[test]
fn compare_without_closed_form_is_a_usage_error() {
    let out = qst(&["compare", "--n", "30", "--l", "6", "--g", "0.05", "--omega", "0.3", "--tolerance", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_over_distance_slows_transfer() {
    let out = qst(&["sweep", "--n", "30", "--g", "0.05", "--omega", "1.5", "--sweep-l", "2:8:2"]);
    assert_eq!(code(&out), 0);
    let (header, rows) = table(&stdout(&out));
    assert_eq!(header, ["g", "omega", "n", "l", "regime", "max_p_b", "t_at_max"]);
    let l = column(&header, &rows, "l");
    assert_eq!(l, [2.0, 4.0, 6.0, 8.0]);
    let t = column(&header, &rows, "t_at_max");
    assert!(t.windows(2).all(|w| w[1] > w[0]), "{t:?}");
}

#[test]
fn sweep_resonant_time_scales_with_root_n() {
    let out = qst(&["sweep", "--g", "0.01", "--omega", "0", "--sweep-n", "16:64:16", "--l-half"]);
    assert_eq!(code(&out), 0);
    let (header, rows) = table(&stdout(&out));
    let n = column(&header, &rows, "n");
    let t = column(&header, &rows, "t_at_max");
    for i in 1..n.len() {
        let expected = (n[i] / n[0]).sqrt();
        let got = t[i] / t[0];
        assert!((got - expected).abs() <= 0.05 * expected, "N={} ratio {got} vs {expected}", n[i]);
    }
}

#[test]
fn sweep_order_and_bytes_ignore_thread_count() {
    let base = ["sweep", "--n", "12", "--omega", "1.5", "--sweep-g", "0.02:0.1:0.02", "--sweep-l", "0:6:2"];
    let one = qst(&[&base[..], &["--jobs", "1"]].concat());
    let four = qst(&[&base[..], &["--jobs", "4"]].concat());
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, four.stdout);
    let (header, rows) = table(&stdout(&one));
    assert_eq!(rows.len(), 20);
    let keys: Vec<(f64, f64)> =
        column(&header, &rows, "g").into_iter().zip(column(&header, &rows, "l")).collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn single_point_sweep_matches_simulate() {
    let extra = ["--t-end", "2000", "--samples", "801"];
    let sweep = qst(&with("sweep", FIG2, &extra));
    let sim = qst(&with("simulate", FIG2, &extra));
    let (sh, srows) = table(&stdout(&sweep));
    let (h, rows) = table(&stdout(&sim));
    let p_b = column(&h, &rows, "p_b");
    let grid_max = p_b.iter().cloned().fold(0.0, f64::max);
    let max_p_b = column(&sh, &srows, "max_p_b")[0];
    assert!(max_p_b >= grid_max && max_p_b <= 1.0);
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# figure two\nn = 16\nl = 8\ng = 0.01\nomega = 0\nt_end = 100\nsamples = 5\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = qst(&["simulate", "--config", cfg]);
    let from_flags = qst(&with("simulate", FIG2, &["--t-end", "100", "--samples", "5"]));
    assert_eq!(code(&from_file), 0);
    assert_eq!(from_file.stdout, from_flags.stdout);

    let overridden = qst(&["simulate", "--config", cfg, "--samples", "7"]);
    assert_eq!(table(&stdout(&overridden)).1.len(), 7);

    fs::write(dir.path().join("bad.conf"), "colour = blue\n").unwrap();
    let bad = qst(&["simulate", "--config", dir.path().join("bad.conf").to_str().unwrap()]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn threshold_variable_changes_classification() {
    let run = |env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_qst-channel"));
        cmd.args(with("predict", FIG2, &[]));
        match env {
            Some(v) => cmd.env("QST_CHANNEL_THRESHOLDS", v),
            None => cmd.env_remove("QST_CHANNEL_THRESHOLDS"),
        };
        cmd.output().unwrap()
    };
    let default = run(None);
    let (h, r) = table(&stdout(&default));
    assert_eq!(cell(&h, &r[0], "regime"), "WeakResonantDiscrete");
    // g√N = 0.04 now sits above the diffusive threshold
    let shifted = run(Some("0.01,0.02,3"));
    let (h, r) = table(&stdout(&shifted));
    assert_eq!(cell(&h, &r[0], "regime"), "WeakResonantDiffusive");
    assert_eq!(code(&run(Some("nonsense"))), 2);
}

#[test]
fn figures_carry_numeric_and_theory_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = qst(&["figures", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["fig1.csv", "fig2.csv", "fig3.csv", "fig3_fast.csv"] {
        let (header, rows) = table(&fs::read_to_string(dir.path().join(name)).unwrap());
        assert_eq!(header, ["t", "p_a_num", "p_b_num", "p_a_th", "p_b_th"], "{name}");
        assert!(rows.len() >= 2000, "{name}");
    }

    let (h, rows) = table(&fs::read_to_string(dir.path().join("fig2.csv")).unwrap());
    for (num, th) in [("p_a_num", "p_a_th"), ("p_b_num", "p_b_th")] {
        let dev = column(&h, &rows, num)
            .iter()
            .zip(column(&h, &rows, th))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev <= 0.02, "{num} deviation {dev}");
    }
    // Normalized time: t* maps to π/√2 and the window ends at 2t*
    let t = column(&h, &rows, "t");
    assert!((t.last().unwrap() - std::f64::consts::PI * 2.0f64.sqrt()).abs() <= 1e-9);

    let (h, rows) = table(&fs::read_to_string(dir.path().join("fig3.csv")).unwrap());
    assert!((column(&h, &rows, "t").last().unwrap() - std::f64::consts::PI).abs() <= 1e-9);
    let (h, rows) = table(&fs::read_to_string(dir.path().join("fig3_fast.csv")).unwrap());
    // Around the envelope maximum P_A vanishes and P_B carries cos²(gt)
    let p_b = column(&h, &rows, "p_b_num");
    let crossings = p_b.windows(2).filter(|w| (w[0] - 0.5) * (w[1] - 0.5) < 0.0).count();
    assert!(crossings >= 4, "fast oscillation not resolved: {crossings} crossings");

    let again = tempfile::tempdir().unwrap();
    qst(&["figures", "--out", again.path().to_str().unwrap()]);
    for name in ["fig1.csv", "fig2.csv", "fig3.csv", "fig3_fast.csv"] {
        assert_eq!(fs::read(dir.path().join(name)).unwrap(), fs::read(again.path().join(name)).unwrap());
    }
}

#[test]
fn figures_reject_model_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = qst(&["figures", "--g", "0.2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}
