//! Job configuration: a single JSON document that selects a mode and
//! carries every parameter an engine run needs, including the random
//! seed, so a config file is a complete, reproducible experiment record.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ideal::{SearchBox, DEFAULT_SPAIR_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analyze,
    Spectrum,
    Weierstrass,
    Concentration,
    Glaeser,
    Amano,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Analyze => "analyze",
            Mode::Spectrum => "spectrum",
            Mode::Weierstrass => "weierstrass",
            Mode::Concentration => "concentration",
            Mode::Glaeser => "glaeser",
            Mode::Amano => "amano",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SearchBoxConfig {
    pub radius: f64,
    pub grid_per_axis: usize,
    pub tol_witness: f64,
}

impl Default for SearchBoxConfig {
    fn default() -> Self {
        let bx = SearchBox::default();
        SearchBoxConfig {
            radius: bx.radius,
            grid_per_axis: bx.grid_per_axis,
            tol_witness: bx.tol_witness,
        }
    }
}

impl SearchBoxConfig {
    pub fn to_search_box(&self) -> SearchBox {
        SearchBox {
            radius: self.radius,
            grid_per_axis: self.grid_per_axis,
            tol_witness: self.tol_witness,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GridConfig {
    /// nodes per axis, power of two
    pub n_points: usize,
    /// eigenpairs requested by spectrum/concentration runs
    pub m_eigs: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_points: 64,
            m_eigs: 8,
        }
    }
}

fn default_step() -> usize {
    1
}

fn default_budget() -> usize {
    DEFAULT_SPAIR_BUDGET
}

fn default_probes() -> usize {
    24
}

/// A complete job description. Unknown keys are rejected so typos fail
/// loudly instead of silently falling back to defaults.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub mode: Mode,
    pub dimension: usize,
    pub variables: Vec<String>,
    /// polynomial component strings (analyze/amano) or smooth-expression
    /// component strings (numeric modes); one entry per field, components
    /// comma-separated
    #[serde(default)]
    pub fields: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_step")]
    pub step_s: usize,
    #[serde(default)]
    pub search_box: SearchBoxConfig,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub grid: GridConfig,
    /// positive density expression; default 1
    #[serde(default)]
    pub density: Option<String>,
    /// spectrum mode may sweep several resolutions; defaults to [grid.n_points]
    #[serde(default)]
    pub resolutions: Vec<usize>,
    /// marked zero-set expressions for localization fractions
    #[serde(default)]
    pub marked_exprs: Vec<String>,
    /// localization distance δ; default 4 grid spacings
    #[serde(default)]
    pub delta_loc: Option<f64>,
    /// weierstrass: scaled (pinned) axes of the slice
    #[serde(default)]
    pub slice_axes: Vec<usize>,
    #[serde(default)]
    pub t_values: Vec<f64>,
    /// concentration: zero-set expressions whose union is the marked set A
    #[serde(default)]
    pub a_exprs: Vec<String>,
    /// concentration: indicator expression for V (node in V iff expr > 0);
    /// default: the whole torus
    #[serde(default)]
    pub v_expr: Option<String>,
    #[serde(default)]
    pub eps_values: Vec<f64>,
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// glaeser: CSV file with the initial cloud, or ...
    #[serde(default)]
    pub cloud_csv: Option<String>,
    /// ... zero-set expressions sampled on the grid to build it
    #[serde(default)]
    pub cloud_exprs: Vec<String>,
    #[serde(default)]
    pub max_k: Option<usize>,
    /// amano: the function Phi as a polynomial string
    #[serde(default)]
    pub phi: Option<String>,
    /// amano: indices (into `fields`) of Y_1, ..., Y_N
    #[serde(default)]
    pub ys: Vec<usize>,
}

impl JobConfig {
    pub fn from_json(text: &str) -> Result<JobConfig> {
        let cfg: JobConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolutions(&self) -> Vec<usize> {
        if self.resolutions.is_empty() {
            vec![self.grid.n_points]
        } else {
            self.resolutions.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |path: &str, msg: String| Err(Error::Config(format!("{path}: {msg}")));
        if self.dimension == 0 {
            return fail("dimension", "must be positive".into());
        }
        if self.variables.len() != self.dimension {
            return fail(
                "variables",
                format!(
                    "expected {} names, got {}",
                    self.dimension,
                    self.variables.len()
                ),
            );
        }
        if self.fields.is_empty() && self.cloud_csv.is_none() {
            return fail("fields", "at least one field is required".into());
        }
        if self.step_s == 0 {
            return fail("step_s", "must be at least 1".into());
        }
        if self.budget == 0 {
            return fail("budget", "must be positive".into());
        }
        if self.search_box.radius <= 0.0 {
            return fail("search_box.radius", "must be positive".into());
        }
        if self.search_box.grid_per_axis < 2 {
            return fail("search_box.grid_per_axis", "must be at least 2".into());
        }
        if self.search_box.tol_witness <= 0.0 {
            return fail("search_box.tol_witness", "must be positive".into());
        }
        let needs_grid = matches!(
            self.mode,
            Mode::Spectrum | Mode::Weierstrass | Mode::Concentration | Mode::Glaeser
        );
        if needs_grid {
            if !(1..=3).contains(&self.dimension) {
                return fail("dimension", "numeric modes support dimensions 1-3".into());
            }
            for &n in std::iter::once(&self.grid.n_points).chain(self.resolutions.iter()) {
                if n < 4 || !n.is_power_of_two() {
                    return fail(
                        "grid.n_points",
                        format!("must be a power of two >= 4, got {n}"),
                    );
                }
            }
            if self.grid.m_eigs == 0 || self.grid.m_eigs > 50 {
                return fail("grid.m_eigs", "must be between 1 and 50".into());
            }
        }
        match self.mode {
            Mode::Weierstrass => {
                if self.slice_axes.is_empty() {
                    return fail("slice_axes", "weierstrass mode needs a slice".into());
                }
                if self.t_values.is_empty() {
                    return fail("t_values", "weierstrass mode needs t values".into());
                }
                if self.t_values.iter().any(|&t| t <= 0.0) {
                    return fail("t_values", "must all be positive".into());
                }
            }
            Mode::Concentration => {
                if self.a_exprs.is_empty() {
                    return fail("a_exprs", "concentration mode needs a marked set".into());
                }
                if self.eps_values.is_empty() {
                    return fail("eps_values", "concentration mode needs eps values".into());
                }
                if self.eps_values.iter().any(|&e| e <= 0.0) {
                    return fail("eps_values", "must all be positive".into());
                }
                if self.probes < 20 {
                    return fail("probes", "need at least 20".into());
                }
            }
            Mode::Glaeser => {
                if self.cloud_csv.is_none() && self.cloud_exprs.is_empty() {
                    return fail(
                        "cloud_exprs",
                        "glaeser mode needs cloud_csv or cloud_exprs".into(),
                    );
                }
            }
            Mode::Amano => {
                if self.phi.is_none() {
                    return fail("phi", "amano mode needs Phi".into());
                }
                if self.ys.is_empty() {
                    return fail("ys", "amano mode needs at least one Y index".into());
                }
                if let Some(&bad) = self.ys.iter().find(|&&i| i >= self.fields.len()) {
                    return fail("ys", format!("field index {bad} out of range"));
                }
            }
            Mode::Analyze | Mode::Spectrum => {}
        }
        Ok(())
    }
}
