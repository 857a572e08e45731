//! Run configuration files: a flat key-value text format with sections
//! (TOML restricted to scalars, arrays of numbers, and repeated `[[mode]]`
//! tables). Parsing validates exhaustively and reports every problem at
//! once; unknown sections and keys are errors, so a typo can never silently
//! fall back to a default.
//!
//! # Grammar
//!
//! All lengths and times are quoted in units of the mass M (key suffix
//! `_per_M`); `mass` itself sets the unit. Every key is optional and
//! defaults as shown; an empty file is a valid configuration.
//!
//! ```text
//! [spacetime]
//! mass = 1.0                  # black hole mass M > 0
//!
//! [grid]
//! n_r = 400                   # radial nodes (>= 17)
//! r_max_per_M = 100.0         # outer boundary
//! n_theta = 1                 # 1 (spherical) or >= 8 angular nodes
//! stretching = "horizon-clustered"
//!     # one of "uniform-in-r", "uniform-in-rstar-outside-r0",
//!     #        "horizon-clustered"
//! cluster_width = 1e-3        # near-horizon density parameter b0
//! split_radius_per_M = 4.0    # R0, strictly outside the photon sphere 2M
//!
//! [evolution]
//! cfl = 0.4                   # in (0, 0.5]
//! dissipation = 0.1           # Kreiss-Oliger sigma, in [0, 0.5]
//! amplitude = 1e-2            # data amplitude epsilon >= 0
//! t_end_per_M = 100.0
//! output_interval_per_M = 1.0
//!
//! [coupling]
//! kind = "tanh-bounded"       # "constant" | "tanh-bounded" | "table"
//! value = 1.0                 # constant only: A(psi) = value
//! bound = 1.0                 # tanh-bounded only: A(psi) = bound*tanh(psi)
//! psi = [-1.0, 0.0, 1.0]      # table only: sample points (increasing)
//! values = [0.3, 0.0, 0.3]    # table only: A at the sample points
//!
//! [[mode]]                    # repeatable; one bump per entry.
//! field = "psi"               # "psi" or "pi" (which field it seeds)
//! l = 0                       # spherical-harmonic degree
//! center_per_M = 2.5
//! width_per_M = 2.0
//! amplitude = 1.0
//!
//! [fault]                     # optional fault injection for monitor tests
//! spike_t_per_M = 50.0        # multiply Pi by spike_factor at this time
//! spike_factor = 1e6
//! nan_t_per_M = 50.0          # write a NaN into psi at this time
//! ```
//!
//! With no `[[mode]]` entries the data defaults to a single spherical bump
//! in psi (center 2.5M, width 2M, amplitude 1) scaled by `amplitude`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;
use toml::Value;

use crate::dynamics::{Coupling, EvolutionConfig, FaultSpec, InitialData, ModeProfile};
use crate::fields::{AngularBasis, Grid, GridSpec, Stretching};
use crate::geometry::{FoliationSpec, SpacetimeParams};

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SpacetimeParams,
    pub split_radius: f64,
    pub grid: GridSpec,
    pub evolution: EvolutionConfig,
    pub initial: InitialData,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("invalid configuration ({} problem{}):\n  {}", errors.len(),
            if errors.len() == 1 { "" } else { "s" }, errors.join("\n  "))]
    Invalid { errors: Vec<String> },
}

/// Reads and validates a configuration file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_text(&text)
}

/// Tracks which keys of one section were consumed so leftovers can be
/// reported as unknown.
struct Section<'a> {
    name: &'a str,
    table: Option<&'a toml::value::Table>,
    used: BTreeSet<&'a str>,
}

impl<'a> Section<'a> {
    fn new(name: &'a str, table: Option<&'a toml::value::Table>) -> Self {
        Self { name, table, used: BTreeSet::new() }
    }

    fn raw(&mut self, key: &'a str) -> Option<&'a Value> {
        self.used.insert(key);
        self.table.and_then(|t| t.get(key))
    }

    fn f64(&mut self, key: &'a str, default: f64, errors: &mut Vec<String>) -> f64 {
        match self.raw(key) {
            None => default,
            Some(Value::Float(x)) => *x,
            Some(Value::Integer(i)) => *i as f64,
            Some(_) => {
                errors.push(format!("[{}] {key}: expected a number", self.name));
                default
            }
        }
    }

    fn opt_f64(&mut self, key: &'a str, errors: &mut Vec<String>) -> Option<f64> {
        self.raw(key).is_some().then(|| self.f64(key, 0.0, errors))
    }

    fn usize(&mut self, key: &'a str, default: usize, errors: &mut Vec<String>) -> usize {
        match self.raw(key) {
            None => default,
            Some(Value::Integer(i)) if *i >= 0 => *i as usize,
            Some(_) => {
                errors.push(format!("[{}] {key}: expected a nonnegative integer", self.name));
                default
            }
        }
    }

    fn str(&mut self, key: &'a str, default: &str, errors: &mut Vec<String>) -> String {
        match self.raw(key) {
            None => default.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                errors.push(format!("[{}] {key}: expected a string", self.name));
                default.to_string()
            }
        }
    }

    fn f64_array(&mut self, key: &'a str, errors: &mut Vec<String>) -> Option<Vec<f64>> {
        match self.raw(key) {
            None => None,
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for v in items {
                    match v {
                        Value::Float(x) => out.push(*x),
                        Value::Integer(i) => out.push(*i as f64),
                        _ => {
                            errors.push(format!(
                                "[{}] {key}: expected an array of numbers",
                                self.name
                            ));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Some(_) => {
                errors.push(format!("[{}] {key}: expected an array of numbers", self.name));
                None
            }
        }
    }

    fn finish(self, errors: &mut Vec<String>) {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !self.used.contains(k.as_str()) {
                    errors.push(format!("unknown key '{k}' in [{}]", self.name));
                }
            }
        }
    }
}

fn subtable<'a>(
    root: &'a toml::value::Table,
    name: &str,
    errors: &mut Vec<String>,
) -> Option<&'a toml::value::Table> {
    match root.get(name) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(_) => {
            errors.push(format!("[{name}] must be a section"));
            None
        }
    }
}

/// Parses configuration text, collecting every validation problem.
pub fn parse_config_text(text: &str) -> Result<RunConfig, ConfigError> {
    let root: toml::value::Table =
        text.parse::<toml::Table>().map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut errors = Vec::new();

    const SECTIONS: [&str; 6] = ["spacetime", "grid", "evolution", "coupling", "mode", "fault"];
    for key in root.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            errors.push(format!("unknown section [{key}]"));
        }
    }

    let mut s = Section::new("spacetime", subtable(&root, "spacetime", &mut errors));
    let mass = s.f64("mass", 1.0, &mut errors);
    s.finish(&mut errors);

    // A bad mass is reported but parsing continues against M = 1 so every
    // other problem still surfaces in the same pass.
    let params = match SpacetimeParams::new(mass) {
        Ok(p) => p,
        Err(e) => {
            errors.push(e.to_string());
            SpacetimeParams { mass: 1.0 }
        }
    };
    let m = params.mass;

    let mut s = Section::new("grid", subtable(&root, "grid", &mut errors));
    let n_r = s.usize("n_r", 400, &mut errors);
    let r_max = s.f64("r_max_per_M", 100.0, &mut errors) * m;
    let n_theta = s.usize("n_theta", 1, &mut errors);
    let stretching_name = s.str("stretching", "horizon-clustered", &mut errors);
    let cluster_width = s.f64("cluster_width", 1e-3, &mut errors);
    let split_radius = s.f64("split_radius_per_M", 4.0, &mut errors) * m;
    s.finish(&mut errors);

    let stretching = match stretching_name.as_str() {
        "uniform-in-r" => Stretching::UniformInR,
        "uniform-in-rstar-outside-r0" => Stretching::UniformInRstarOutsideR0,
        "horizon-clustered" => Stretching::HorizonClustered,
        other => {
            errors.push(format!(
                "[grid] stretching = \"{other}\" is not one of \"uniform-in-r\", \
                 \"uniform-in-rstar-outside-r0\", \"horizon-clustered\""
            ));
            Stretching::UniformInR
        }
    };
    let grid_spec = GridSpec { n_r, r_max, n_theta, stretching, cluster_width };

    let mut s = Section::new("evolution", subtable(&root, "evolution", &mut errors));
    let cfl = s.f64("cfl", 0.4, &mut errors);
    let dissipation = s.f64("dissipation", 0.1, &mut errors);
    let amplitude = s.f64("amplitude", 1e-2, &mut errors);
    let t_star_end = s.f64("t_end_per_M", 100.0, &mut errors) * m;
    let output_interval = s.f64("output_interval_per_M", 1.0, &mut errors) * m;
    s.finish(&mut errors);

    let mut s = Section::new("coupling", subtable(&root, "coupling", &mut errors));
    let kind = s.str("kind", "tanh-bounded", &mut errors);
    let coupling = match kind.as_str() {
        "constant" => Coupling::Constant { value: s.f64("value", 1.0, &mut errors) },
        "tanh-bounded" => Coupling::TanhBounded { bound: s.f64("bound", 1.0, &mut errors) },
        "table" => {
            let psi = s.f64_array("psi", &mut errors).unwrap_or_default();
            let values = s.f64_array("values", &mut errors).unwrap_or_default();
            Coupling::Table { psi, values }
        }
        other => {
            errors.push(format!(
                "[coupling] kind = \"{other}\" is not one of \"constant\", \
                 \"tanh-bounded\", \"table\""
            ));
            Coupling::Constant { value: 0.0 }
        }
    };
    s.finish(&mut errors);

    let fault = match subtable(&root, "fault", &mut errors) {
        None => None,
        Some(t) => {
            let mut s = Section::new("fault", Some(t));
            let spike_time = s.opt_f64("spike_t_per_M", &mut errors).map(|x| x * m);
            let spike_factor = s.f64("spike_factor", 1e6, &mut errors);
            let nan_time = s.opt_f64("nan_t_per_M", &mut errors).map(|x| x * m);
            s.finish(&mut errors);
            Some(FaultSpec { spike_time, spike_factor, nan_time })
        }
    };

    let evolution = EvolutionConfig {
        cfl,
        dissipation,
        amplitude,
        coupling,
        t_star_end,
        output_interval,
        fault,
    };

    let mut initial = InitialData::default();
    match root.get("mode") {
        None => {
            initial.psi_modes.push(ModeProfile {
                l: 0,
                center: 2.5 * m,
                width: 2.0 * m,
                amplitude: 1.0,
            });
        }
        Some(Value::Array(entries)) => {
            for (k, entry) in entries.iter().enumerate() {
                let Value::Table(t) = entry else {
                    errors.push(format!("[[mode]] entry {k} must be a table"));
                    continue;
                };
                let mut s = Section::new("mode", Some(t));
                let field = s.str("field", "psi", &mut errors);
                let profile = ModeProfile {
                    l: s.usize("l", 0, &mut errors),
                    center: s.f64("center_per_M", 2.5, &mut errors) * m,
                    width: s.f64("width_per_M", 2.0, &mut errors) * m,
                    amplitude: s.f64("amplitude", 1.0, &mut errors),
                };
                s.finish(&mut errors);
                match field.as_str() {
                    "psi" => initial.psi_modes.push(profile),
                    "pi" => initial.pi_modes.push(profile),
                    other => errors.push(format!(
                        "[[mode]] entry {k}: field = \"{other}\" must be \"psi\" or \"pi\""
                    )),
                }
            }
        }
        Some(_) => errors.push("[[mode]] must be an array of tables".to_string()),
    }

    // Semantic validation through the same constructors the run will use.
    match FoliationSpec::new(split_radius, r_max, params) {
        Err(e) => errors.push(format!("photon-sphere constraint violated: {e}")),
        Ok(foliation) => match Grid::build(grid_spec, params, foliation) {
            Err(e) => errors.push(format!("[grid] {e}")),
            Ok(grid) => errors.extend(initial.validate(&grid)),
        },
    }
    errors.extend(evolution.validate());

    if errors.is_empty() {
        Ok(RunConfig {
            params,
            split_radius,
            grid: grid_spec,
            evolution,
            initial,
        })
    } else {
        Err(ConfigError::Invalid { errors })
    }
}

fn fmt_f64(x: f64) -> String {
    // {:?} is the shortest representation that parses back to the same bits,
    // which keeps serialize -> parse -> serialize a fixed point.
    let s = format!("{x:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

/// Canonical text form: every key explicit, fixed order. Feeding the result
/// back through `parse_config_text` reproduces the same configuration, and
/// its bytes are the input of [`config_hash`].
pub fn serialize_config(cfg: &RunConfig) -> String {
    let m = cfg.params.mass;
    let mut out = String::new();
    let _ = writeln!(out, "[spacetime]\nmass = {}\n", fmt_f64(m));
    let stretching = match cfg.grid.stretching {
        Stretching::UniformInR => "uniform-in-r",
        Stretching::UniformInRstarOutsideR0 => "uniform-in-rstar-outside-r0",
        Stretching::HorizonClustered => "horizon-clustered",
    };
    let _ = writeln!(
        out,
        "[grid]\nn_r = {}\nr_max_per_M = {}\nn_theta = {}\nstretching = \"{}\"\n\
         cluster_width = {}\nsplit_radius_per_M = {}\n",
        cfg.grid.n_r,
        fmt_f64(cfg.grid.r_max / m),
        cfg.grid.n_theta,
        stretching,
        fmt_f64(cfg.grid.cluster_width),
        fmt_f64(cfg.split_radius / m),
    );
    let ev = &cfg.evolution;
    let _ = writeln!(
        out,
        "[evolution]\ncfl = {}\ndissipation = {}\namplitude = {}\nt_end_per_M = {}\n\
         output_interval_per_M = {}\n",
        fmt_f64(ev.cfl),
        fmt_f64(ev.dissipation),
        fmt_f64(ev.amplitude),
        fmt_f64(ev.t_star_end / m),
        fmt_f64(ev.output_interval / m),
    );
    match &ev.coupling {
        Coupling::Constant { value } => {
            let _ = writeln!(out, "[coupling]\nkind = \"constant\"\nvalue = {}\n", fmt_f64(*value));
        }
        Coupling::TanhBounded { bound } => {
            let _ = writeln!(
                out,
                "[coupling]\nkind = \"tanh-bounded\"\nbound = {}\n",
                fmt_f64(*bound)
            );
        }
        Coupling::Table { psi, values } => {
            let join = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ");
            let _ = writeln!(
                out,
                "[coupling]\nkind = \"table\"\npsi = [{}]\nvalues = [{}]\n",
                join(psi),
                join(values)
            );
        }
    }
    for (field, modes) in [("psi", &cfg.initial.psi_modes), ("pi", &cfg.initial.pi_modes)] {
        for p in modes {
            let _ = writeln!(
                out,
                "[[mode]]\nfield = \"{}\"\nl = {}\ncenter_per_M = {}\nwidth_per_M = {}\n\
                 amplitude = {}\n",
                field,
                p.l,
                fmt_f64(p.center / m),
                fmt_f64(p.width / m),
                fmt_f64(p.amplitude),
            );
        }
    }
    if let Some(f) = &ev.fault {
        let _ = writeln!(out, "[fault]");
        if let Some(t) = f.spike_time {
            let _ = writeln!(out, "spike_t_per_M = {}", fmt_f64(t / m));
            let _ = writeln!(out, "spike_factor = {}", fmt_f64(f.spike_factor));
        }
        if let Some(t) = f.nan_time {
            let _ = writeln!(out, "nan_t_per_M = {}", fmt_f64(t / m));
        }
    }
    out
}

/// Hex SHA-256 of the canonical serialization; names the run identity.
pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(serialize_config(cfg).as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

impl RunConfig {
    /// Builds the grid and angular basis this configuration describes.
    pub fn realize_grid(&self) -> Result<(Grid, AngularBasis), ConfigError> {
        let foliation = FoliationSpec::new(self.split_radius, self.grid.r_max, self.params)
            .map_err(|e| ConfigError::Invalid { errors: vec![e.to_string()] })?;
        let grid = Grid::build(self.grid, self.params, foliation)
            .map_err(|e| ConfigError::Invalid { errors: vec![e.to_string()] })?;
        let basis = AngularBasis::new(self.grid.n_theta);
        Ok((grid, basis))
    }
}
