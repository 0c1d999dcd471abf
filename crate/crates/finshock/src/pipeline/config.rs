//! Run configuration: JSON file, overridable by CLI flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bvar::{GibbsConfig, NwPrior, VarSpec};
use crate::dates::Quarter;
use crate::identification::{IdentifyConfig, PointEstimate};
use crate::lp::{HacRule, LpSpec};
use crate::panel::InterpMethod;

use super::PipelineError;

/// Input and output locations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Quarterly macro panel, `country,date,variable,value`.
    pub macro_csv: Option<PathBuf>,
    /// Survey microdata for the measures stage.
    pub micro_csv: Option<PathBuf>,
    /// Everything the run writes lands here.
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            macro_csv: None,
            micro_csv: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Sample restrictions applied before estimation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Subsample {
    /// Drop quarters after this one.
    pub end: Option<Quarter>,
    pub exclude_countries: Vec<String>,
}

/// Interpolation choice for annual measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum InterpChoice {
    Linear,
    Flat,
    /// Emit one quarterly file per method.
    Both,
}

impl InterpChoice {
    /// Method downstream stages read by default; `Both` keeps linear as the
    /// primary series and flat as the robustness variant.
    pub fn primary(&self) -> &'static str {
        match self {
            InterpChoice::Flat => "flat",
            InterpChoice::Linear | InterpChoice::Both => "linear",
        }
    }

    pub fn methods(&self) -> Vec<(InterpMethod, &'static str)> {
        match self {
            InterpChoice::Linear => vec![(InterpMethod::Linear, "linear")],
            InterpChoice::Flat => vec![(InterpMethod::Flat, "flat")],
            InterpChoice::Both => vec![
                (InterpMethod::Linear, "linear"),
                (InterpMethod::Flat, "flat"),
            ],
        }
    }
}

/// Measures-stage settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasuresConfig {
    pub interp: InterpChoice,
    /// Quarter within each year annual values anchor to.
    pub anchor_quarter: u8,
}

impl Default for MeasuresConfig {
    fn default() -> Self {
        MeasuresConfig {
            interp: InterpChoice::Linear,
            anchor_quarter: 4,
        }
    }
}

/// Projection-stage settings; `horizons` through `fixed_window` mirror
/// [`LpSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LpConfig {
    pub horizons: usize,
    pub lags: usize,
    pub hac_rule: HacRule,
    pub include_uncertainty: bool,
    pub fixed_window: bool,
    /// Also run the sign-split variant.
    pub signed: bool,
    /// Measure names to project; each gets its own IRF file.
    pub outcomes: Vec<String>,
    /// Macro variables entering at lags 1..=p alongside the outcome and
    /// shock. `None` means the VAR variables plus `fin_deepening` when the
    /// data has it.
    pub controls: Option<Vec<String>>,
    /// Macro variables entering at lags 0..=p. `None` means `wui` and
    /// `clifs` when the data has them.
    pub uncertainty: Option<Vec<String>>,
}

impl Default for LpConfig {
    fn default() -> Self {
        let spec = LpSpec::default();
        LpConfig {
            horizons: spec.horizons,
            lags: spec.lags,
            hac_rule: spec.hac_rule,
            include_uncertainty: spec.include_uncertainty,
            fixed_window: spec.fixed_window,
            signed: false,
            outcomes: vec![
                "gini_total".into(),
                "gini_financial".into(),
                "gini_labor".into(),
                "gini_q1".into(),
                "gini_q2".into(),
                "gini_q3".into(),
                "gini_q4".into(),
                "gini_q5".into(),
                "p90".into(),
                "p95".into(),
                "skill_premium".into(),
            ],
            controls: None,
            uncertainty: None,
        }
    }
}

impl LpConfig {
    pub fn spec(&self) -> LpSpec {
        LpSpec {
            horizons: self.horizons,
            lags: self.lags,
            hac_rule: self.hac_rule,
            include_uncertainty: self.include_uncertainty,
            fixed_window: self.fixed_window,
        }
    }
}

/// Synthetic-data settings for the `simulate` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub countries: usize,
    pub quarters: usize,
    pub lags: usize,
    /// Companion spectral radius of the generated system.
    pub radius: f64,
    /// Loadings of the synthetic outcome on censored shock halves.
    pub theta_pos: Vec<f64>,
    pub theta_neg: Vec<f64>,
    pub outcome_noise: f64,
    pub micro_households: usize,
    pub micro_sigma: f64,
    pub micro_years: Vec<i32>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            countries: 16,
            quarters: 72,
            lags: 4,
            radius: 0.7,
            theta_pos: vec![0.8, 0.6, 0.4, 0.2],
            theta_neg: vec![0.3, 0.2, 0.1, 0.0],
            outcome_noise: 0.2,
            micro_households: 500,
            micro_sigma: 0.7,
            micro_years: vec![2006, 2010, 2014, 2018, 2022],
        }
    }
}

fn default_var() -> VarSpec {
    VarSpec {
        variables: vec![
            "gdp".into(),
            "prices".into(),
            "interest_rate".into(),
            "inv_output".into(),
            "stock_prices".into(),
        ],
        lags: 4,
    }
}

/// `VarSpec` has no library-level default, so a partial `var` object fills
/// missing keys from the pipeline's baseline system here.
fn var_with_defaults<'de, D>(deserializer: D) -> Result<VarSpec, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Partial {
        variables: Option<Vec<String>>,
        lags: Option<usize>,
    }

    let partial = Partial::deserialize(deserializer)?;
    let base = default_var();
    Ok(VarSpec {
        variables: partial.variables.unwrap_or(base.variables),
        lags: partial.lags.unwrap_or(base.lags),
    })
}

/// Everything a run needs, assembled from the config file and flag
/// overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub paths: Paths,
    #[serde(deserialize_with = "var_with_defaults")]
    pub var: VarSpec,
    pub prior: NwPrior,
    pub gibbs: GibbsConfig,
    /// Built-in scheme name, or a path to a scheme JSON file.
    pub scheme: String,
    pub identify: IdentifyConfig,
    /// Shocks to extract and write; `None` uses the scheme's own focus,
    /// which custom scheme files do not have.
    pub focus_shocks: Option<Vec<String>>,
    pub shock_point: PointEstimate,
    pub lp: LpConfig,
    pub measures: MeasuresConfig,
    pub subsample: Subsample,
    pub simulate: SimulateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths::default(),
            var: default_var(),
            prior: NwPrior::default(),
            gibbs: GibbsConfig::default(),
            scheme: "baseline".into(),
            identify: IdentifyConfig::default(),
            focus_shocks: None,
            shock_point: PointEstimate::Median,
            lp: LpConfig::default(),
            measures: MeasuresConfig::default(),
            subsample: Subsample::default(),
            simulate: SimulateConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            PipelineError::Config(format!("cannot parse config {}: {e}", path.display()))
        })
    }

    /// Canonical serialization used for the manifest's config hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Applies one seed to every stage that consumes randomness.
    pub fn set_seed(&mut self, seed: u64) {
        self.gibbs.seed = seed;
        self.identify.seed = seed;
    }

    pub fn require_macro_csv(&self) -> Result<&Path, PipelineError> {
        let path = self.paths.macro_csv.as_deref().ok_or_else(|| {
            PipelineError::Config("paths.macro_csv is not set".to_string())
        })?;
        if !path.exists() {
            return Err(PipelineError::Config(format!(
                "macro panel {} does not exist",
                path.display()
            )));
        }
        Ok(path)
    }

    pub fn require_micro_csv(&self) -> Result<&Path, PipelineError> {
        let path = self.paths.micro_csv.as_deref().ok_or_else(|| {
            PipelineError::Config("paths.micro_csv is not set".to_string())
        })?;
        if !path.exists() {
            return Err(PipelineError::Config(format!(
                "microdata {} does not exist",
                path.display()
            )));
        }
        Ok(path)
    }
}
