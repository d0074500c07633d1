use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use omkalman::consistency::{normalize_innovations, InnovationReport, ReportOptions, Thresholds};
use omkalman::filter::{
    run_filter, steady_state_covariance, uncertainty_ellipse, FilterInit, FilterOptions, FilterRun,
    KalmanFilter,
};
use omkalman::linalg::eigenvalues;
use omkalman::optomech::{resolution_criterion, DerivedParams, OptomechConfig, PhysicalParams};
use omkalman::sim::{simulate_stream, InitialState, Trajectory};
use omkalman::statespace::{discretize, output_noise_spectrum_grid, StateSpaceModel};
use omkalman::units::{hz_to_rad, rad_to_hz};

use crate::{BenchArgs, CheckArgs, Cli, Command, FilterArgs, SimulateArgs, SpectrumArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration or input files.
    Usage(String),
    /// A consistency threshold failed.
    Threshold,
}

impl From<omkalman::Error> for CliError {
    fn from(e: omkalman::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn run(cli: &Cli) -> Result<()> {
    fs::create_dir_all(&cli.out)
        .map_err(|e| usage(format!("cannot create {}: {e}", cli.out.display())))?;
    match &cli.command {
        Command::Build => build(cli),
        Command::Simulate(a) => simulate(cli, a),
        Command::Filter(a) => filter(cli, a),
        Command::Check(a) => check(cli, a),
        Command::Spectrum(a) => spectrum(cli, a),
        Command::Bench(a) => bench(cli, a),
    }
}

struct Loaded {
    config: OptomechConfig,
    params: PhysicalParams,
    derived: DerivedParams,
    model: StateSpaceModel,
}

fn load(cli: &Cli) -> Result<Loaded> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| usage("this command needs --config"))?;
    if !path.exists() {
        return Err(usage(format!("config file {} not found", path.display())));
    }
    let config = OptomechConfig::load(path)?;
    let (params, derived, model) = config.build()?;
    Ok(Loaded {
        config,
        params,
        derived,
        model,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(cli: &Cli, text: &str) {
    if !cli.quiet {
        print!("{text}");
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn build(cli: &Cli) -> Result<()> {
    let l = load(cli)?;
    l.model.save(cli.out.join("model.json"))?;

    let eig = eigenvalues(l.model.a());
    let max_re = eig.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    let min_re = eig.iter().map(|e| e.re).fold(f64::INFINITY, f64::min);
    let max_im = eig.iter().map(|e| e.im.abs()).fold(0.0, f64::max);
    let d = &l.derived;
    let mut s = String::new();
    let _ = writeln!(s, "n = {}", l.model.n());
    let _ = writeln!(s, "p = {}", l.model.p());
    let _ = writeln!(s, "m = {}", l.model.m_out());
    let _ = writeln!(s, "q = {}", l.model.q());
    let _ = writeln!(s, "mechanical_modes = {}", l.params.modes());
    let _ = writeln!(s, "hurwitz = {}", l.model.is_hurwitz());
    let _ = writeln!(s, "eig.max_real = {max_re:.6e}");
    let _ = writeln!(s, "eig.min_real = {min_re:.6e}");
    let _ = writeln!(s, "eig.max_imag_hz = {:.6e}", rad_to_hz(max_im));
    let _ = writeln!(s, "kappa_hz = {:.6e}", rad_to_hz(d.kappa));
    let _ = writeln!(s, "g_d_hz = {:.6e}", rad_to_hz(d.g_d));
    let _ = writeln!(s, "g_r_hz = {:.6e}", rad_to_hz(d.g_r));
    let _ = writeln!(s, "theta_d = {:.6}", d.theta_d);
    let _ = writeln!(s, "theta_r = {:.6}", d.theta_r);
    let _ = writeln!(s, "nbar = {:.6e}", d.nbar);
    let _ = writeln!(s, "dt = {:.6e}", l.config.dt());
    let _ = writeln!(s, "fingerprint = {}", hex(&l.model.fingerprint()));
    write_text(&cli.out.join("build_summary.txt"), &s)?;
    emit(cli, &s);
    Ok(())
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    if a.steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    let l = load(cli)?;
    let dsys = discretize(&l.model, l.config.dt())?;
    let init = if a.zero_init {
        InitialState::Zero
    } else {
        InitialState::Stationary
    };
    let traj = simulate_stream(&dsys, a.steps, cli.seed, a.stream, &init, 0.0)?;
    traj.save(cli.out.join("trajectory.bin"))?;
    let mut w = BufWriter::new(File::create(cli.out.join("trajectory.csv"))?);
    traj.write_csv(&mut w, Some(a.preview))?;
    w.flush()?;

    let mut s = String::new();
    let _ = writeln!(s, "steps = {}", traj.len());
    let _ = writeln!(s, "dt = {:.6e}", traj.dt);
    let _ = writeln!(s, "duration_s = {:.6e}", traj.dt * traj.len() as f64);
    let _ = writeln!(s, "seed = {}", traj.seed);
    let _ = writeln!(s, "stream = {}", traj.stream);
    let _ = writeln!(s, "n = {}", traj.n());
    let _ = writeln!(s, "m = {}", traj.m());
    emit(cli, &s);
    Ok(())
}

fn mechanical_summary(s: &mut String, label: &str, p: &nalgebra::DMatrix<f64>) -> Result<()> {
    let e = uncertainty_ellipse(p, 0, 1, 0.95)?;
    let _ = writeln!(s, "{label}.P_qq = {:.6e}", p[(0, 0)]);
    let _ = writeln!(s, "{label}.P_pp = {:.6e}", p[(1, 1)]);
    let _ = writeln!(s, "{label}.P_qp = {:.6e}", p[(0, 1)]);
    let _ = writeln!(s, "{label}.ellipse95.semi_major = {:.6e}", e.semi_major);
    let _ = writeln!(s, "{label}.ellipse95.semi_minor = {:.6e}", e.semi_minor);
    let _ = writeln!(s, "{label}.ellipse95.angle = {:.6}", e.angle);
    Ok(())
}

fn filter(cli: &Cli, a: &FilterArgs) -> Result<()> {
    let l = load(cli)?;
    let path = a
        .trajectory
        .clone()
        .unwrap_or_else(|| cli.out.join("trajectory.bin"));
    let traj = Trajectory::load(&path)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let dt = l.config.dt();
    if (traj.dt - dt).abs() > 1e-12 * dt {
        return Err(usage(format!(
            "trajectory {} has dt = {:e}, config has dt = {dt:e}",
            path.display(),
            traj.dt
        )));
    }
    if traj.m() != l.model.m_out() {
        return Err(usage(format!(
            "trajectory {} has {} measurement channels, model from {} has {}",
            path.display(),
            traj.m(),
            cli.config.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            l.model.m_out()
        )));
    }
    let dsys = discretize(&l.model, dt)?;
    let opts = FilterOptions {
        t0: traj.t0,
        store_covariances: a.store_covariances,
        ..Default::default()
    };
    let run = run_filter(&dsys, &traj.z, &FilterInit::thermal_prior(&dsys)?, &opts)?;
    run.save(cli.out.join("filter.bin"))?;
    let mut w = BufWriter::new(File::create(cli.out.join("filter.csv"))?);
    run.write_csv(&mut w, Some(a.preview))?;
    w.flush()?;

    let sigma = l.model.stationary_covariance()?;
    let p_cont = steady_state_covariance(&l.model)?;
    let trace = |p: &nalgebra::DMatrix<f64>| p[(0, 0)] + p[(1, 1)];
    let mut s = String::new();
    let _ = writeln!(s, "steps = {}", run.len());
    let _ = writeln!(s, "model_matches_trajectory = {}", run.fingerprint == traj.fingerprint);
    match run.frozen_at {
        Some(k) => {
            let _ = writeln!(s, "gain_frozen_at = {k}");
        }
        None => {
            let _ = writeln!(s, "gain_frozen_at = none");
        }
    }
    let _ = writeln!(s, "units = zero-point");
    mechanical_summary(&mut s, "conditional", &run.p_final)?;
    mechanical_summary(&mut s, "continuous", &p_cont)?;
    mechanical_summary(&mut s, "unconditional", &sigma)?;
    let _ = writeln!(s, "trace_ratio = {:.6e}", trace(&sigma) / trace(&run.p_final));
    write_text(&cli.out.join("filter_summary.txt"), &s)?;
    emit(cli, &s);
    Ok(())
}

fn check(cli: &Cli, a: &CheckArgs) -> Result<()> {
    let path = a.run.clone().unwrap_or_else(|| cli.out.join("filter.bin"));
    let run = FilterRun::load(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if run.is_empty() {
        return Err(usage(format!("{} holds no innovations", path.display())));
    }
    let nubar = normalize_innovations(&run.innovations, &run.s_seq)?;
    let options = ReportOptions {
        segments: a.segments,
        confidence: a.confidence,
        dt: Some(run.dt),
    };
    let report = InnovationReport::new(&nubar, options)?;
    let thresholds = Thresholds {
        mean_sigmas: a.mean_sigmas,
        fraction_min: a.fraction_min,
        fraction_max: a.fraction_max,
        welch_min: a.welch_min,
        max_flagged_run: (a.max_flagged_run > 0).then_some(a.max_flagged_run),
    };
    let mut s = report.to_key_value();
    let results = report.evaluate(&thresholds);
    for (name, ok) in &results {
        let _ = writeln!(s, "check.{name} = {}", if *ok { "pass" } else { "fail" });
    }
    let pass = results.iter().all(|(_, ok)| *ok);
    let _ = writeln!(s, "result = {}", if pass { "pass" } else { "fail" });
    write_text(&cli.out.join("report.txt"), &s)?;
    let mut w = BufWriter::new(File::create(cli.out.join("welch.csv"))?);
    report.write_welch_csv(&mut w)?;
    w.flush()?;
    emit(cli, &s);
    if pass {
        Ok(())
    } else {
        Err(CliError::Threshold)
    }
}

fn spectrum(cli: &Cli, a: &SpectrumArgs) -> Result<()> {
    if a.points < 2 || !(a.f_max_hz > a.f_min_hz) || a.f_min_hz < 0.0 {
        return Err(usage("spectrum needs --points >= 2 and 0 <= --f-min-hz < --f-max-hz"));
    }
    let l = load(cli)?;
    let freqs: Vec<f64> = (0..a.points)
        .map(|k| a.f_min_hz + (a.f_max_hz - a.f_min_hz) * k as f64 / (a.points - 1) as f64)
        .collect();
    let omegas: Vec<f64> = freqs.iter().map(|&f| hz_to_rad(f)).collect();
    let spectra = output_noise_spectrum_grid(&l.model, &omegas)?;
    let m = l.model.m_out();
    let path: PathBuf = cli.out.join("spectrum.csv");
    let mut w = BufWriter::new(File::create(&path)?);
    let mut header = vec!["frequency_hz".to_string()];
    for i in 0..m {
        for j in i..m {
            header.push(format!("S{i}{j}"));
        }
    }
    writeln!(w, "{}", header.join(","))?;
    for (f, sm) in freqs.iter().zip(&spectra) {
        let mut line = format!("{f:e}");
        for i in 0..m {
            for j in i..m {
                let _ = write!(line, ",{:e}", sm[(i, j)]);
            }
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    emit(
        cli,
        &format!(
            "points = {}\nunit = two-sided per rad/s\nfile = {}\n",
            a.points,
            path.display()
        ),
    );
    Ok(())
}

fn bench(cli: &Cli, a: &BenchArgs) -> Result<()> {
    if a.steps == 0 || a.trials == 0 {
        return Err(usage("--steps and --trials must be at least 1"));
    }
    let l = load(cli)?;
    let dt = l.config.dt();
    let dsys = discretize(&l.model, dt)?;
    let traj = simulate_stream(&dsys, a.steps, cli.seed, 0, &InitialState::Stationary, 0.0)?;
    let init = FilterInit::thermal_prior(&dsys)?;
    let mut times = Vec::with_capacity(a.trials);
    for _ in 0..a.trials {
        let mut kf = KalmanFilter::new(&dsys, &init, FilterOptions::default())?;
        let start = Instant::now();
        for k in 0..a.steps {
            kf.step(traj.z.row(k), None)?;
        }
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let median = times[times.len() / 2];
    let omega_m = l.params.omega_m[0];
    let res = resolution_criterion(omega_m, dt, l.derived.nbar);
    let res_2ns = resolution_criterion(omega_m, 2e-9, l.derived.nbar);
    let mut s = String::new();
    let _ = writeln!(s, "n = {}", dsys.n());
    let _ = writeln!(s, "m = {}", dsys.m_out());
    let _ = writeln!(s, "steps = {}", a.steps);
    let _ = writeln!(s, "trials = {}", a.trials);
    let _ = writeln!(s, "median_seconds = {median:.6e}");
    let _ = writeln!(s, "steps_per_second = {:.6e}", a.steps as f64 / median);
    let _ = writeln!(s, "ns_per_step = {:.3}", 1e9 * median / a.steps as f64);
    let _ = writeln!(s, "resolution.configured_dt = {res:.6e}");
    let _ = writeln!(s, "resolution.dt_2ns = {res_2ns:.6e}");
    let _ = writeln!(s, "resolution.f64_epsilon = {:.6e}", f64::EPSILON);
    let _ = writeln!(s, "resolution.f32_epsilon = {:.6e}", f32::EPSILON as f64);
    let _ = writeln!(s, "resolution.margin_f64 = {:.6e}", res / f64::EPSILON);
    let _ = writeln!(s, "resolution.quoted_estimate_2ns = 4e-7");
    let _ = writeln!(s, "resolution.ratio_to_quoted = {:.3}", res_2ns / 4e-7);
    write_text(&cli.out.join("bench.txt"), &s)?;
    emit(cli, &s);
    Ok(())
}
