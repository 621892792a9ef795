//! Orchestration behind the command-line interface: simulation runs, the
//! certification registry, and operator dumps.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::certify::{run_suite, CertifyOptions, SuiteOutcome};
use crate::config::{
    Formulation, RunConfig, SystemChoice, DEFAULT_DT, DEFAULT_H, DEFAULT_N_POINTS,
};
use crate::conservation::ConservationReport;
use crate::discrete_ops::{compute_c_cached, dtilde0_from, DEFAULT_P, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::lagrangian::{integrate_second_order, inverse_legendre, legendre};
use crate::lattice::{
    Boundary, LatticeField, Mesh, DEFAULT_BUFFER_FRACTION, DEFAULT_DECAY_THRESHOLD,
};
use crate::systems::{integrate, step_count, CanonicalState, Integrator, TrajectoryWriter};

/// Version of the JSON summaries written by `simulate` and `certify`.
pub const SCHEMA_VERSION: u32 = 1;

/// Process exit status for an error: 2 for configuration problems, 3 for
/// numerical or I/O failures.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Parse(_) | Error::InvalidArgument(_) => 2,
        _ => 3,
    }
}

#[derive(Debug, Serialize)]
struct Defaults {
    p: usize,
    tol: f64,
    dt: f64,
    n_points: usize,
    h: f64,
}

const DEFAULTS: Defaults = Defaults {
    p: DEFAULT_P,
    tol: DEFAULT_TOL,
    dt: DEFAULT_DT,
    n_points: DEFAULT_N_POINTS,
    h: DEFAULT_H,
};

/// Contents of `summary.json` for a simulation.
#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub schema_version: u32,
    pub config: RunConfig,
    defaults: Defaults,
    pub n_steps: usize,
    pub final_time: f64,
    pub reports: Vec<ConservationReport>,
    /// Largest edge-buffer magnitude (compact-support meshes).
    pub max_decay_margin: Option<f64>,
    pub decay_threshold: f64,
    pub warnings: Vec<String>,
}

fn csv_row(t: f64, values: &[f64]) -> String {
    let mut line = format!("{t:e}");
    for v in values {
        line.push_str(&format!(",{v:e}"));
    }
    line
}

/// Runs a configured simulation, writing `trajectory.csv`, `functionals.csv`
/// and `summary.json` into `out_dir`.
pub fn run_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<SimulateSummary> {
    let sys = cfg.system_spec();
    let functionals = cfg.build_functionals()?;
    let s0 = cfg.initial_state()?;
    let mesh = cfg.mesh;
    let n_steps = step_count(cfg.dt, cfg.t_end)?;
    let stride = cfg.output.stride;
    fs::create_dir_all(out_dir)?;

    let mut traj = TrajectoryWriter::new(
        BufWriter::new(File::create(out_dir.join("trajectory.csv"))?),
        mesh.n_points(),
    )?;
    let mut fcsv = BufWriter::new(File::create(out_dir.join("functionals.csv"))?);
    let names: Vec<&str> = functionals.iter().map(|f| f.name()).collect();
    writeln!(fcsv, "t,{}", names.join(","))?;

    let mut samples: Vec<Vec<(f64, f64)>> = vec![Vec::new(); functionals.len()];
    let mut margin: Option<f64> = None;
    let mut observe = |_: usize, s: &CanonicalState| -> Result<()> {
        traj.write(s)?;
        let values: Vec<f64> = functionals.iter().map(|f| f.value(s)).collect();
        writeln!(fcsv, "{}", csv_row(s.t(), &values))?;
        for (out, v) in samples.iter_mut().zip(values) {
            out.push((s.t(), v));
        }
        if mesh.boundary() == Boundary::CompactSupport {
            let m = s
                .v()
                .decay_margin(DEFAULT_BUFFER_FRACTION)?
                .max(s.w().decay_margin(DEFAULT_BUFFER_FRACTION)?);
            margin = Some(margin.map_or(m, |old: f64| old.max(m)));
        }
        Ok(())
    };

    let final_state = match cfg.formulation {
        Formulation::Canonical => integrate(
            &sys,
            &s0,
            cfg.dt,
            n_steps,
            cfg.integrator,
            stride,
            &mut observe,
        )?,
        Formulation::Lagrangian => {
            let SystemChoice::Wave(pot) = cfg.system else {
                return Err(Error::Config(vec![
                    "the lagrangian formulation applies to the wave system only".into(),
                ]));
            };
            if cfg.integrator != Integrator::Rk4 {
                return Err(Error::Config(vec![
                    "the lagrangian formulation integrates with method = \"rk4\"".into(),
                ]));
            }
            let t0 = s0.t();
            let mut state = inverse_legendre(&s0);
            observe(0, &legendre(&state))?;
            for k in 1..=n_steps {
                let next = integrate_second_order(pot, &state, cfg.dt, 1)?
                    .pop()
                    .expect("one step taken");
                state = crate::lagrangian::SecondOrderState::new(
                    t0 + k as f64 * cfg.dt,
                    next.v().clone(),
                    next.vdot().clone(),
                )?;
                if k % stride == 0 || k == n_steps {
                    observe(k, &legendre(&state))?;
                }
            }
            legendre(&state)
        }
    };
    traj.into_inner().flush()?;
    fcsv.flush()?;

    let reports = functionals
        .iter()
        .zip(samples)
        .map(|(f, s)| {
            ConservationReport::from_samples(f.name(), s, !f.is_time_dependent(), cfg.tolerance())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    if let Some(m) = margin.filter(|&m| m > DEFAULT_DECAY_THRESHOLD) {
        let msg = format!(
            "fields reached the edge buffers (magnitude {m:.2e} > {DEFAULT_DECAY_THRESHOLD:e}); \
             compact-support results are unreliable"
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let summary = SimulateSummary {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        defaults: DEFAULTS,
        n_steps,
        final_time: final_state.t(),
        reports,
        max_decay_margin: margin,
        decay_threshold: DEFAULT_DECAY_THRESHOLD,
        warnings,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Runs one suite and, if `out_dir` is given, writes `<suite>.json` there.
pub fn run_certify(
    name: &str,
    opts: &CertifyOptions,
    out_dir: Option<&Path>,
) -> Result<SuiteOutcome> {
    let outcome = run_suite(name, opts)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_json(&dir.join(format!("{}.json", outcome.suite)), &outcome)?;
    }
    Ok(outcome)
}

/// Human-readable lines for a suite outcome.
pub fn format_outcome(outcome: &SuiteOutcome) -> String {
    let mut out = format!("{}: {}\n", outcome.suite, outcome.claim);
    for c in &outcome.checks {
        out.push_str(&format!(
            "  [{}] {}: expected {}, observed {} ({})\n",
            if c.agrees { "ok" } else { "CONTRADICTION" },
            c.name,
            c.expected,
            c.observed,
            c.detail
        ));
    }
    out.push_str(&format!(
        "{}: {}\n",
        outcome.suite,
        if outcome.passed() {
            "PASS".to_string()
        } else {
            format!("FAIL ({} contradictions)", outcome.contradictions)
        }
    ));
    out
}

/// `p,c_p,tail_estimate` rows for `p = 0..=p_max`.
pub fn dump_coefficients(p_max: usize, tol: f64, mut out: impl Write) -> Result<()> {
    let coeffs = compute_c_cached(p_max, tol)?;
    writeln!(out, "p,c_p,tail_estimate")?;
    for (p, (c, tail)) in coeffs.c.iter().zip(&coeffs.tails).enumerate() {
        writeln!(out, "{p},{c:e},{tail:e}")?;
    }
    Ok(())
}

/// One line of `operators verify`.
#[derive(Debug, Clone, Serialize)]
pub struct OperatorCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Structural checks on the computed `D̃₀`: coefficient signs, the `alpha`
/// values, skew-adjointness on random fields, and symbol accuracy.
pub fn verify_operator(p_max: usize, tol: f64) -> Result<Vec<OperatorCheck>> {
    let coeffs = compute_c_cached(p_max, tol)?;
    let op = dtilde0_from(&coeffs);
    let mut checks = Vec::new();
    let mut push = |name: &str, value: f64, bound: f64| {
        checks.push(OperatorCheck {
            name: name.into(),
            value,
            bound,
            passed: value <= bound,
        });
    };
    let sign_errors = coeffs
        .c
        .iter()
        .enumerate()
        .filter(|(p, c)| c.signum() != if p % 2 == 0 { 1.0 } else { -1.0 })
        .count();
    push(
        "coefficients with sign other than (-1)^p",
        sign_errors as f64,
        0.0,
    );
    let a = &coeffs.alpha;
    let alpha_err = (a[0] - 1.0)
        .abs()
        .max((a[1] + 1.0 / 6.0).abs())
        .max((a[2] - 3.0 / 40.0).abs());
    push("alpha_1, alpha_3, alpha_5 error", alpha_err, 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [64usize, 256] {
        let mesh = Mesh::centered(0.1, n, Boundary::Periodic)?;
        let folded = op.for_mesh(&mesh);
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let mut field =
                || LatticeField::new(mesh, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let (u, v) = (field()?, field()?);
            let lhs = v.inner_product(&folded.apply(&u)?)? + u.inner_product(&folded.apply(&v)?)?;
            worst = worst.max(lhs.abs() / (u.norm() * v.norm()));
        }
        push(
            &format!("skew-adjointness defect, periodic n={n}"),
            worst,
            1e-13,
        );
    }
    let h = 0.1;
    let theta = 0.5;
    let kappa = theta / h;
    push(
        "relative symbol error at kappa h = 0.5",
        (op.symbol(theta, h).1 - kappa).abs() / kappa,
        1e-2,
    );
    Ok(checks)
}

/// Default directory for `certify` outputs.
pub fn default_certify_dir() -> PathBuf {
    PathBuf::from("certify-output")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const SMALL: &str = "[system]\nkind = \"wave\"\npotential = \"quartic\"\n\
        [mesh]\nn_points = 64\n[initial]\nfamily = \"moving_gaussian\"\nwidth = 1.0\n\
        [integrator]\ndt = 1e-2\nt_end = 0.5\n[operator]\np = 4\ntol = 1e-6\n\
        [functionals]\nnames = [\"energy\", \"momentum\"]\n[output]\nstride = 5\n";

    #[test]
    fn simulate_writes_documented_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(SMALL).unwrap();
        let summary = run_simulate(&cfg, dir.path()).unwrap();
        assert_eq!(summary.n_steps, 50);
        let traj = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        let header = traj.lines().next().unwrap();
        assert!(header.starts_with("t,v_0,v_1"));
        assert!(header.ends_with(",w_63"));
        assert_eq!(traj.lines().count(), 1 + 11);
        let f = fs::read_to_string(dir.path().join("functionals.csv")).unwrap();
        assert_eq!(f.lines().next().unwrap(), "t,energy,momentum");
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(json["schema_version"], 1);
        assert_eq!(json["defaults"]["p"], 64);
        assert_eq!(json["config"]["operator"]["p"], 4);
    }

    #[test]
    fn lagrangian_formulation_matches_canonical_rk4() {
        let text = SMALL.replace("dt = 1e-2", "dt = 1e-2\nmethod = \"rk4\"");
        let canon = parse_config(&text).unwrap();
        let mut lag = canon.clone();
        lag.formulation = Formulation::Lagrangian;
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_simulate(&canon, a.path()).unwrap();
        run_simulate(&lag, b.path()).unwrap();
        let read = |d: &Path| fs::read_to_string(d.join("trajectory.csv")).unwrap();
        assert_eq!(read(a.path()), read(b.path()));
    }

    #[test]
    fn dump_has_header_and_rows() {
        let mut buf = Vec::new();
        dump_coefficients(3, 1e-6, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "p,c_p,tail_estimate");
        assert_eq!(lines.len(), 5);
        let c0: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert!((c0 - 4.0 / std::f64::consts::PI).abs() < 1e-3);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config(vec![])), 2);
        assert_eq!(
            exit_code(&Error::SolverDivergence {
                residual: 1.0,
                iterations: 3
            }),
            3
        );
    }
}
