//! Run configuration: TOML sections of flat `key = value` pairs, validated
//! with every problem collected before reporting.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use toml::{Table, Value};

use crate::conservation::{
    hierarchy_rk, mass, momentum, negative_galilean, negative_p_star, superposition_t,
    DriftTolerance, TAlpha,
};
use crate::discrete_ops::{build_dtilde0, DEFAULT_P, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::initial::InitialCondition;
use crate::lattice::{Boundary, Mesh};
use crate::systems::{
    nls_system, wave_system, CanonicalState, Integrator, NlsPotential, SystemSpec, WavePotential,
};
use crate::variational::Functional;

pub const DEFAULT_H: f64 = 0.1;
pub const DEFAULT_N_POINTS: usize = 256;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 1.0;
pub const DEFAULT_STRIDE: usize = 10;
pub const DEFAULT_DRIFT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Canonical,
    Lagrangian,
}

/// A monitored functional named in `[functionals] names`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalName {
    Energy,
    Momentum,
    Mass,
    /// `R<k>`.
    Hierarchy(usize),
    /// `T[<alpha>]`.
    Superposition(TAlpha),
    PStar,
    Galilean,
}

impl FunctionalName {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "energy" => Some(Self::Energy),
            "momentum" => Some(Self::Momentum),
            "mass" => Some(Self::Mass),
            "pstar" => Some(Self::PStar),
            "galilean" => Some(Self::Galilean),
            _ => {
                if let Some(k) = s.strip_prefix('R') {
                    k.parse().ok().map(Self::Hierarchy)
                } else {
                    let label = s.strip_prefix("T[")?.strip_suffix(']')?;
                    TAlpha::parse(label).map(Self::Superposition)
                }
            }
        }
    }
}

impl fmt::Display for FunctionalName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Energy => f.write_str("energy"),
            Self::Momentum => f.write_str("momentum"),
            Self::Mass => f.write_str("mass"),
            Self::Hierarchy(k) => write!(f, "R{k}"),
            Self::Superposition(a) => write!(f, "T[{}]", a.label()),
            Self::PStar => f.write_str("pstar"),
            Self::Galilean => f.write_str("galilean"),
        }
    }
}

impl Serialize for FunctionalName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemChoice {
    Wave(WavePotential),
    Nls(NlsPotential),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorConfig {
    pub p: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalsConfig {
    pub names: Vec<FunctionalName>,
    /// Relative drift tolerance for the verdicts.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: String,
    pub stride: usize,
}

/// Validated run configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub system: SystemChoice,
    pub mesh: Mesh,
    pub initial: InitialCondition,
    pub integrator: Integrator,
    pub dt: f64,
    pub t_end: f64,
    pub operator: OperatorConfig,
    pub functionals: FunctionalsConfig,
    pub output: OutputConfig,
    pub formulation: Formulation,
}

impl RunConfig {
    pub fn system_spec(&self) -> SystemSpec {
        match self.system {
            SystemChoice::Wave(p) => wave_system(p),
            SystemChoice::Nls(p) => nls_system(p),
        }
    }

    pub fn initial_state(&self) -> Result<CanonicalState> {
        self.initial.build(self.system_spec().kind(), self.mesh)
    }

    pub fn tolerance(&self) -> DriftTolerance {
        DriftTolerance::Relative(self.functionals.tolerance)
    }

    /// Builds the monitored functionals; `D̃₀` is computed only if needed.
    pub fn build_functionals(&self) -> Result<Vec<Arc<dyn Functional>>> {
        let needs_op = self.functionals.names.iter().any(|n| {
            matches!(
                n,
                FunctionalName::Momentum | FunctionalName::PStar | FunctionalName::Galilean
            )
        });
        let op = if needs_op {
            Some(build_dtilde0(self.operator.p, self.operator.tol)?.for_mesh(&self.mesh))
        } else {
            None
        };
        let op = || op.clone().expect("operator built when needed");
        let sys = self.system_spec();
        let mut out: Vec<Arc<dyn Functional>> = Vec::new();
        for name in &self.functionals.names {
            let f: Arc<dyn Functional> = match *name {
                FunctionalName::Energy => sys.hamiltonian(),
                FunctionalName::Momentum => Arc::new(momentum(op())?),
                FunctionalName::Mass => Arc::new(mass()),
                FunctionalName::Hierarchy(k) => Arc::new(hierarchy_rk(k)),
                FunctionalName::Superposition(a) => Arc::new(superposition_t(a)),
                FunctionalName::PStar => match self.system {
                    SystemChoice::Wave(p) => Arc::new(negative_p_star(op(), p)?),
                    SystemChoice::Nls(_) => unreachable!("rejected by validation"),
                },
                FunctionalName::Galilean => Arc::new(negative_galilean(op())?),
            };
            f.validate(&self.mesh)?;
            out.push(f);
        }
        Ok(out)
    }
}

/// Reads one section, recording problems instead of failing fast.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    seen: Vec<&'static str>,
    errors: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'static str, errors: &'a mut Vec<String>) -> Self {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                errors.push(format!("[{name}] must be a section"));
                None
            }
        };
        Self {
            name,
            table,
            seen: Vec::new(),
            errors,
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.table.and_then(|t| t.get(key))
    }

    fn error(&mut self, key: &str, msg: impl fmt::Display) {
        self.errors.push(format!("{}.{key}: {msg}", self.name));
    }

    fn float(
        &mut self,
        key: &'static str,
        default: f64,
        valid: impl Fn(f64) -> bool,
        range: &str,
    ) -> f64 {
        let value = match self.raw(key) {
            None => return default,
            Some(Value::Float(x)) => *x,
            Some(Value::Integer(i)) => *i as f64,
            Some(other) => {
                self.error(key, format!("expected a number, got {}", other.type_str()));
                return default;
            }
        };
        if !(value.is_finite() && valid(value)) {
            self.error(key, format!("{value} out of range ({range})"));
        }
        value
    }

    fn opt_float(&mut self, key: &'static str) -> Option<f64> {
        match self.raw(key) {
            None => None,
            Some(Value::Float(x)) if x.is_finite() => Some(*x),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(other) => {
                self.error(key, format!("expected a finite number, got {other}"));
                None
            }
        }
    }

    fn int(&mut self, key: &'static str, default: usize, min: usize) -> usize {
        match self.raw(key) {
            None => default,
            Some(Value::Integer(i)) if *i >= min as i64 => *i as usize,
            Some(Value::Integer(i)) => {
                self.error(key, format!("{i} out of range (>= {min})"));
                default
            }
            Some(other) => {
                self.error(
                    key,
                    format!("expected an integer, got {}", other.type_str()),
                );
                default
            }
        }
    }

    fn string(&mut self, key: &'static str, default: &'a str) -> &'a str {
        match self.raw(key) {
            None => default,
            Some(Value::String(s)) => s,
            Some(other) => {
                self.error(key, format!("expected a string, got {}", other.type_str()));
                default
            }
        }
    }

    fn choice<T: Copy>(
        &mut self,
        key: &'static str,
        default: &'a str,
        options: &[(&str, T)],
    ) -> Option<T> {
        let s = self.string(key, default);
        let found = options.iter().find(|(k, _)| *k == s).map(|(_, v)| *v);
        if found.is_none() {
            let names: Vec<&str> = options.iter().map(|(k, _)| *k).collect();
            self.error(
                key,
                format!(
                    "unknown value \"{s}\" (expected one of {})",
                    names.join(", ")
                ),
            );
        }
        found
    }

    fn string_list(&mut self, key: &'static str) -> Option<Vec<&'a str>> {
        match self.raw(key) {
            None => None,
            Some(Value::Array(items)) => {
                let mut out = Vec::new();
                for item in items {
                    match item {
                        Value::String(s) => out.push(s.as_str()),
                        other => {
                            self.error(key, format!("expected strings, got {}", other.type_str()))
                        }
                    }
                }
                Some(out)
            }
            Some(other) => {
                self.error(
                    key,
                    format!("expected a list of strings, got {}", other.type_str()),
                );
                None
            }
        }
    }

    /// Reports keys that were never asked for.
    fn finish(self) {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !self.seen.contains(&key.as_str()) {
                    self.errors
                        .push(format!("{}.{key}: unknown key", self.name));
                }
            }
        }
    }
}

const SECTIONS: [&str; 7] = [
    "system",
    "mesh",
    "initial",
    "integrator",
    "operator",
    "functionals",
    "output",
];

/// Parses and validates a configuration. On failure every problem is listed
/// in [`Error::Config`].
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
    let mut errors = Vec::new();
    for key in root.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            errors.push(format!("unknown section or key \"{key}\""));
        }
    }

    let mut s = Section::new(&root, "system", &mut errors);
    let kind = s.choice("kind", "", &[("wave", true), ("nls", false)]);
    let potential = s.string("potential", "zero");
    let coupling = s.float("coupling", 1.0, |_| true, "finite");
    let is_wave = kind.unwrap_or(true);
    let system = match (kind, potential) {
        (Some(true), "zero") => Some(SystemChoice::Wave(WavePotential::Zero)),
        (Some(true), "quadratic") => {
            Some(SystemChoice::Wave(WavePotential::Quadratic { c: coupling }))
        }
        (Some(true), "quartic") => Some(SystemChoice::Wave(WavePotential::Quartic {
            lambda: coupling,
        })),
        (Some(false), "zero") => Some(SystemChoice::Nls(NlsPotential::Zero)),
        (Some(false), "cubic") => Some(SystemChoice::Nls(NlsPotential::Cubic { c: coupling })),
        (Some(_), other) => {
            let allowed = if is_wave {
                "zero, quadratic, quartic"
            } else {
                "zero, cubic"
            };
            s.error(
                "potential",
                format!(
                    "\"{other}\" is not a {} potential (expected one of {allowed})",
                    if is_wave { "wave" } else { "nls" }
                ),
            );
            None
        }
        (None, _) => None,
    };
    s.finish();

    let mut s = Section::new(&root, "mesh", &mut errors);
    let h = s.float("h", DEFAULT_H, |x| x > 0.0, "> 0");
    let n_points = s.int("n_points", DEFAULT_N_POINTS, 4);
    let x0 = s.opt_float("x0");
    let boundary = s.choice(
        "boundary",
        "periodic",
        &[
            ("periodic", Boundary::Periodic),
            ("compact", Boundary::CompactSupport),
            ("compact_support", Boundary::CompactSupport),
        ],
    );
    s.finish();
    let boundary = boundary.unwrap_or(Boundary::Periodic);
    let x0 = x0.unwrap_or(-0.5 * n_points as f64 * h);
    let mesh = Mesh::new(h.max(f64::MIN_POSITIVE), n_points, x0, boundary);

    let mut s = Section::new(&root, "initial", &mut errors);
    let family = s.choice(
        "family",
        "gaussian",
        &[
            ("gaussian", 0),
            ("moving_gaussian", 1),
            ("plane_wave", 2),
            ("packet", 3),
            ("soliton", 4),
        ],
    );
    let positive = |x: f64| x > 0.0;
    let initial = match family {
        Some(0) | Some(1) | Some(3) => {
            let center = s.float("center", 0.0, |_| true, "finite");
            let width = s.float("width", 1.0, positive, "> 0");
            let amplitude = s.float("amplitude", 0.5, |_| true, "finite");
            match family {
                Some(0) => Some(InitialCondition::Gaussian {
                    center,
                    width,
                    amplitude,
                }),
                Some(1) => Some(InitialCondition::MovingGaussian {
                    center,
                    width,
                    amplitude,
                }),
                _ => {
                    let wavenumber = s.float("wavenumber", 0.5, |_| true, "finite");
                    Some(InitialCondition::Packet {
                        center,
                        width,
                        amplitude,
                        wavenumber,
                    })
                }
            }
        }
        Some(2) => {
            let wavenumber = s.float("wavenumber", 1.0, |_| true, "finite");
            let amplitude = s.float("amplitude", 0.5, |_| true, "finite");
            Some(InitialCondition::PlaneWave {
                wavenumber,
                amplitude,
            })
        }
        Some(_) => {
            let center = s.float("center", 0.0, |_| true, "finite");
            let amplitude = s.float("amplitude", 0.5, |x| x != 0.0, "non-zero");
            let wavenumber = s.float("wavenumber", 0.5, |_| true, "finite");
            Some(InitialCondition::Soliton {
                center,
                amplitude,
                wavenumber,
            })
        }
        None => None,
    };
    s.finish();

    let mut s = Section::new(&root, "integrator", &mut errors);
    let method = s.choice("method", "midpoint", &[("midpoint", true), ("rk4", false)]);
    let dt = s.float("dt", DEFAULT_DT, positive, "> 0");
    let t_end = s.float("t_end", DEFAULT_T_END, positive, "> 0");
    let newton_tol = s.float(
        "newton_tol",
        Integrator::DEFAULT_NEWTON_TOL,
        positive,
        "> 0",
    );
    let max_iter = s.int("max_iter", Integrator::DEFAULT_MAX_ITER, 1);
    let formulation = s.choice(
        "formulation",
        "canonical",
        &[
            ("canonical", Formulation::Canonical),
            ("lagrangian", Formulation::Lagrangian),
        ],
    );
    s.finish();
    if dt > 0.0 && t_end > 0.0 && dt > t_end {
        errors.push(format!("integrator.dt: {dt} exceeds t_end = {t_end}"));
    }
    let integrator = match method {
        Some(false) => Integrator::Rk4,
        _ => Integrator::Midpoint {
            newton_tol,
            max_iter,
        },
    };

    let mut s = Section::new(&root, "operator", &mut errors);
    let p = s.int("p", DEFAULT_P, 0);
    let tol = s.float("tol", DEFAULT_TOL, |x| x > 0.0 && x < 1.0, "0 < tol < 1");
    s.finish();

    let mut s = Section::new(&root, "functionals", &mut errors);
    let raw_names = s.string_list("names").unwrap_or_else(|| vec!["energy"]);
    let tolerance = s.float("tolerance", DEFAULT_DRIFT_TOLERANCE, positive, "> 0");
    let mut names = Vec::new();
    for raw in raw_names {
        match FunctionalName::parse(raw) {
            Some(n) => names.push(n),
            None => s.error(
                "names",
                format!("unknown functional \"{raw}\" (expected energy, momentum, mass, R<k>, T[1|t|x|tx|t2+x2], pstar, galilean)"),
            ),
        }
    }
    s.finish();

    let mut s = Section::new(&root, "output", &mut errors);
    let dir = s.string("dir", "output").to_string();
    let stride = s.int("stride", DEFAULT_STRIDE, 1);
    s.finish();

    // cross-field compatibility
    if let Some(system) = system {
        let compact = boundary == Boundary::CompactSupport;
        for n in &names {
            let problem = match (n, system) {
                (
                    FunctionalName::Hierarchy(_),
                    SystemChoice::Wave(WavePotential::Quadratic { .. } | WavePotential::Zero),
                ) if !compact => None,
                (
                    FunctionalName::Hierarchy(_),
                    SystemChoice::Wave(WavePotential::Quadratic { .. } | WavePotential::Zero),
                ) => Some("needs a periodic mesh".to_string()),
                (FunctionalName::Hierarchy(_), _) => {
                    Some("requires the wave system with a quadratic potential".to_string())
                }
                (FunctionalName::Superposition(_), SystemChoice::Nls(_)) => {
                    Some("is defined for the wave system only".to_string())
                }
                (FunctionalName::Superposition(a), _) if a.depends_on_x() && !compact => {
                    Some("has an x-dependent weight and needs a compact-support mesh".to_string())
                }
                (FunctionalName::PStar, SystemChoice::Nls(_)) => {
                    Some("is defined for the wave system only".to_string())
                }
                (FunctionalName::Galilean, SystemChoice::Wave(_)) => {
                    Some("is defined for the nls system only".to_string())
                }
                (FunctionalName::Mass, SystemChoice::Wave(_)) => {
                    Some("is defined for the nls system only".to_string())
                }
                (FunctionalName::PStar | FunctionalName::Galilean, _) if !compact => {
                    Some("needs a compact-support mesh".to_string())
                }
                _ => None,
            };
            if let Some(problem) = problem {
                errors.push(format!("functionals.names: {n} {problem}"));
            }
            if let FunctionalName::Hierarchy(k) = n {
                if !compact && 2 * k + 3 >= n_points {
                    errors.push(format!("functionals.names: {n} has stencil width {} which does not fit {n_points} periodic points", 2 * k + 3));
                }
            }
        }
        if formulation == Some(Formulation::Lagrangian) {
            if !matches!(system, SystemChoice::Wave(_)) {
                errors.push(
                    "integrator.formulation: lagrangian applies to the wave system only".into(),
                );
            }
            if method == Some(true) {
                errors.push(
                    "integrator.formulation: lagrangian runs integrate with method = \"rk4\""
                        .into(),
                );
            }
        }
        if let (Some(InitialCondition::Soliton { .. }), SystemChoice::Nls(p)) = (initial, system) {
            if !matches!(p, NlsPotential::Cubic { c } if c > 0.0) {
                errors.push(
                    "initial.family: soliton data need potential = \"cubic\" with coupling > 0"
                        .into(),
                );
            }
        }
    }
    if let (Some(InitialCondition::PlaneWave { .. }), Boundary::CompactSupport) =
        (initial, boundary)
    {
        errors.push("initial.family: plane_wave data do not decay and need a periodic mesh".into());
    }
    let mesh = match mesh {
        Ok(m) => Some(m),
        Err(e) => {
            errors.push(format!("mesh: {e}"));
            None
        }
    };

    match (errors.is_empty(), system, mesh, initial, formulation) {
        (true, Some(system), Some(mesh), Some(initial), Some(formulation)) => Ok(RunConfig {
            system,
            mesh,
            initial,
            integrator,
            dt,
            t_end,
            operator: OperatorConfig { p, tol },
            functionals: FunctionalsConfig { names, tolerance },
            output: OutputConfig { dir, stride },
            formulation,
        }),
        _ => Err(Error::Config(errors)),
    }
}
