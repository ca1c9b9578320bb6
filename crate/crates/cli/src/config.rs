//! JSON instance configuration and its translation into solver inputs.

use std::fmt;
use std::path::Path;

use eqvi::control::{ControlProblem, ControlSpace, ControlTriple, CostSpec, Search};
use eqvi::gamma::GammaMode;
use eqvi::instance::{ConstantOverrides, QviInstance};
use eqvi::operators::constraint::ConstraintMapSpec;
use eqvi::operators::friction::FrictionLaw;
use eqvi::operators::plaplace::PLaplacianParams;
use eqvi::operators::psi::PsiSpec;
use eqvi::outer::{OuterOptions, ProbeOptions, Selection};
use eqvi::{BoundaryMode, Field, Grid, NormParams};
use serde::Deserialize;

/// Load or validation failure anchored at a position of the JSON text.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn default_t() -> f64 {
    1.0
}

fn default_b() -> f64 {
    1.0
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub nt: usize,
    #[serde(rename = "T", default = "default_t")]
    pub t_final: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    pub boundary: BoundaryMode,
}

/// Space-time density on the grid nodes.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    /// One row per time step, one value per node.
    Inline {
        values: Vec<Vec<f64>>,
    },
    Constant {
        value: f64,
    },
    /// `offset + amplitude sin(kx x + kt t + phase)`.
    Wave {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        #[serde(default)]
        kx: f64,
        #[serde(default)]
        kt: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Combination of the control section's source basis.
    Basis {
        coeffs: Vec<f64>,
    },
}

impl SourceSpec {
    pub fn field(&self, grid: &Grid, basis: &[Field]) -> Result<Field, String> {
        let (nt, nodes) = (grid.nt, grid.nodes());
        match self {
            SourceSpec::Inline { values } => {
                let f = Field::from_rows(values).map_err(|e| e.to_string())?;
                if f.shape() != (nt, nodes) {
                    return Err(format!(
                        "inline values have shape {:?}, grid needs {:?}",
                        f.shape(),
                        (nt, nodes)
                    ));
                }
                Ok(f)
            }
            SourceSpec::Constant { value } => Ok(Field::constant(nt, nodes, *value)),
            SourceSpec::Wave {
                offset,
                amplitude,
                kx,
                kt,
                phase,
            } => Ok(Field::from_fn(nt, nodes, |n, i| {
                offset + amplitude * (kx * grid.x(i) + kt * grid.t(n) + phase).sin()
            })),
            SourceSpec::Basis { coeffs } => {
                if coeffs.len() != basis.len() {
                    return Err(format!(
                        "{} basis coefficients for {} basis fields",
                        coeffs.len(),
                        basis.len()
                    ));
                }
                Ok(coeffs
                    .iter()
                    .zip(basis)
                    .fold(Field::zeros(nt, nodes), |acc, (c, b)| acc.axpy(*c, b)))
            }
        }
    }
}

/// Multi-start settings; the outer options come from `solver.outer`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub n_starts: usize,
    pub seed: u64,
    pub strategies: Vec<Selection>,
    pub cluster_tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        let d = ProbeOptions::default();
        ProbeConfig {
            n_starts: d.n_starts,
            seed: d.seed,
            strategies: d.strategies,
            cluster_tol: d.cluster_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub outer: OuterOptions,
    pub probe: ProbeConfig,
}

/// Target of the misfit term.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Observation {
    /// Forward-solve a truth sampled inside the boxes.
    Planted {
        seed: u64,
        #[serde(default)]
        noise_level: f64,
    },
    /// Observed state, one row per time step.
    Inline { values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub e_box: [f64; 2],
    pub l_box: Vec<[f64; 2]>,
    #[serde(default)]
    pub basis: Vec<SourceSpec>,
    #[serde(default)]
    pub coeff_box: Vec<[f64; 2]>,
    pub observation: Observation,
    #[serde(default = "one")]
    pub misfit_weight: f64,
    pub reg_weight: f64,
    #[serde(default)]
    pub search: Option<Search>,
    /// Nested grid resolutions for a refinement study.
    #[serde(default)]
    pub resolutions: Vec<usize>,
    #[serde(default = "yes")]
    pub prune: bool,
    /// Probe used per evaluation; defaults to `solver.probe`.
    #[serde(default)]
    pub probe: Option<ProbeConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    pub grid: GridConfig,
    pub norm: NormParams,
    #[serde(rename = "operator_F")]
    pub operator_f: PLaplacianParams,
    pub friction_law: FrictionLaw,
    #[serde(default)]
    pub psi: Option<PsiSpec>,
    pub constraint_map: ConstraintMapSpec,
    #[serde(rename = "source_E")]
    pub source_e: SourceSpec,
    pub gamma: GammaMode,
    #[serde(default)]
    pub constants: ConstantOverrides,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub control: Option<ControlConfig>,
}

/// Control section resolved against the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSetup {
    pub space: ControlSpace,
    pub observation: Observation,
    pub misfit_weight: f64,
    pub reg_weight: f64,
    pub search: Search,
    pub resolutions: Vec<usize>,
    pub prune: bool,
    pub probe: ProbeOptions,
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub name: String,
    pub instance: QviInstance,
    pub outer: OuterOptions,
    pub probe: ProbeOptions,
    pub control: Option<ControlSetup>,
}

/// Command-line overrides applied after loading.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub force: bool,
    pub starts: Option<usize>,
    pub grid_res: Option<usize>,
    pub tol: Option<f64>,
}

impl Loaded {
    pub fn apply(&mut self, ov: &Overrides) {
        let touch = |p: &mut ProbeOptions, outer: &OuterOptions| {
            p.outer = outer.clone();
            if let Some(s) = ov.seed {
                p.seed = s;
            }
            if let Some(n) = ov.starts {
                p.n_starts = n;
            }
        };
        self.outer.force |= ov.force;
        if let Some(t) = ov.tol {
            self.outer.tol_fp = t;
        }
        let outer = self.outer.clone();
        touch(&mut self.probe, &outer);
        if let Some(c) = &mut self.control {
            touch(&mut c.probe, &outer);
            if let Some(r) = ov.grid_res {
                c.search = Search::Grid { resolution: r };
            }
            if let Some(s) = ov.seed {
                match &mut c.search {
                    Search::Grid { .. } => {}
                    Search::NelderMead { seed, .. } | Search::Random { seed, .. } => *seed = s,
                }
            }
        }
    }
}

impl ControlSetup {
    /// Control problem and, for planted observations, the planted truth.
    pub fn problem(
        &self,
        base: &QviInstance,
    ) -> eqvi::Result<(ControlProblem, Option<ControlTriple>)> {
        let placeholder = CostSpec {
            x_obs: base.zero_state(),
            misfit_weight: self.misfit_weight,
            reg_weight: self.reg_weight,
        };
        let mut prob = ControlProblem {
            base: base.clone(),
            space: self.space.clone(),
            cost: placeholder,
            probe: self.probe.clone(),
            prune: self.prune,
        };
        let truth = match &self.observation {
            Observation::Planted { seed, noise_level } => {
                let (cost, truth) = eqvi::control::plant_instance(&prob, *seed, *noise_level)?;
                prob.cost = cost;
                Some(truth)
            }
            Observation::Inline { values } => {
                prob.cost.x_obs = Field::from_rows(values)?;
                None
            }
        };
        prob.validate()?;
        Ok((prob, truth))
    }
}

/// Line and column of the first `"key":` in `raw`.
pub fn key_position(raw: &str, key: &str) -> Option<(usize, usize)> {
    let needle = format!("\"{key}\"");
    let mut from = 0;
    while let Some(off) = raw[from..].find(&needle) {
        let start = from + off;
        let rest = raw[start + needle.len()..].trim_start();
        if rest.starts_with(':') {
            let line = raw[..start].matches('\n').count() + 1;
            let col = start - raw[..start].rfind('\n').map_or(0, |p| p + 1) + 1;
            return Some((line, col));
        }
        from = start + needle.len();
    }
    None
}

fn anchored(raw: &str, key: &str, message: impl fmt::Display) -> ConfigError {
    let pos = key_position(raw, key);
    ConfigError {
        message: format!("{key}: {message}"),
        line: pos.map(|p| p.0),
        column: pos.map(|p| p.1),
    }
}

/// Parses and validates a configuration text.
pub fn parse_config(raw: &str) -> Result<Loaded, ConfigError> {
    let cfg: InstanceConfig = serde_json::from_str(raw).map_err(|e| ConfigError {
        message: e
            .to_string()
            .split(" at line ")
            .next()
            .unwrap_or_default()
            .to_string(),
        line: Some(e.line()),
        column: Some(e.column()),
    })?;
    build(cfg, raw)
}

pub fn load_config(path: &Path) -> Result<Loaded, ConfigError> {
    let raw = std::fs::read_to_string(path).map_err(|e| ConfigError {
        message: format!("cannot read {}: {e}", path.display()),
        line: None,
        column: None,
    })?;
    let mut loaded = parse_config(&raw)?;
    if loaded.name.is_empty() {
        loaded.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(loaded)
}

fn build(cfg: InstanceConfig, raw: &str) -> Result<Loaded, ConfigError> {
    let g = &cfg.grid;
    let grid = Grid::new(g.nx, g.nt, g.t_final, g.a, g.b, g.boundary)
        .map_err(|e| anchored(raw, "grid", e))?;
    let basis = match &cfg.control {
        Some(c) => c
            .basis
            .iter()
            .map(|s| match s {
                SourceSpec::Basis { .. } => {
                    Err("a basis entry cannot refer to the basis".to_string())
                }
                s => s.field(&grid, &[]),
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| anchored(raw, "basis", e))?,
        None => Vec::new(),
    };
    let source = cfg
        .source_e
        .field(&grid, &basis)
        .map_err(|e| anchored(raw, "source_E", e))?;
    let instance = QviInstance {
        grid,
        np: cfg.norm,
        f: cfg.operator_f,
        law: cfg.friction_law,
        psi: cfg.psi,
        constraint: cfg.constraint_map,
        source,
        gamma: cfg.gamma,
        overrides: cfg.constants,
    };
    instance
        .f
        .validate()
        .map_err(|e| anchored(raw, "operator_F", e))?;
    instance
        .law
        .validate()
        .map_err(|e| anchored(raw, "friction_law", e))?;
    instance
        .constraint
        .validate()
        .map_err(|e| anchored(raw, "constraint_map", e))?;
    instance
        .gamma
        .validate(&instance.grid)
        .map_err(|e| anchored(raw, "gamma", e))?;
    if let Some(psi) = &instance.psi {
        psi.validate(&instance.grid, instance.np.p())
            .map_err(|e| anchored(raw, "psi", e))?;
    }
    instance
        .validate()
        .map_err(|e| anchored(raw, "source_E", e))?;
    let outer = cfg.solver.outer;
    outer.validate().map_err(|e| anchored(raw, "solver", e))?;
    let to_probe = |p: &ProbeConfig| ProbeOptions {
        n_starts: p.n_starts,
        seed: p.seed,
        strategies: p.strategies.clone(),
        cluster_tol: p.cluster_tol,
        outer: outer.clone(),
    };
    let probe = to_probe(&cfg.solver.probe);
    let control = match cfg.control {
        Some(c) => {
            let space = ControlSpace {
                e_box: c.e_box,
                l_box: c.l_box,
                e_basis: basis,
                coeff_box: c.coeff_box,
            };
            space
                .validate(&instance)
                .map_err(|e| anchored(raw, "control", e))?;
            if let Observation::Inline { values } = &c.observation {
                let f = Field::from_rows(values).map_err(|e| anchored(raw, "observation", e))?;
                if f.shape() != (instance.grid.nt, instance.grid.nodes()) {
                    return Err(anchored(
                        raw,
                        "observation",
                        "shape does not match the grid",
                    ));
                }
            }
            if !(c.reg_weight > 0.0 && c.reg_weight.is_finite()) {
                return Err(anchored(raw, "reg_weight", "must be positive and finite"));
            }
            Some(ControlSetup {
                space,
                observation: c.observation,
                misfit_weight: c.misfit_weight,
                reg_weight: c.reg_weight,
                search: c.search.unwrap_or(Search::Grid { resolution: 9 }),
                resolutions: c.resolutions,
                prune: c.prune,
                probe: c.probe.as_ref().map_or_else(|| probe.clone(), to_probe),
            })
        }
        None => None,
    };
    Ok(Loaded {
        name: cfg.name.unwrap_or_default(),
        instance,
        outer,
        probe,
        control,
    })
}
