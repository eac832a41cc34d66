//! Experiment configuration: a JSON document with strict key checking.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sirlab_core::fluct::BracketVariant;
use sirlab_core::measure::{basis_build, SeedFamily, TestDictionary};
use sirlab_core::model::*;
use sirlab_core::particle::{Scheme, SimConfig};
use sirlab_core::pde::{step_count, FokkerPlanck, Grid, PicardConfig};

use crate::error::{validation, HarnessError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub sim: SimSection,
    pub pde: PdeSection,
    pub dict: DictSection,
    #[serde(default)]
    pub study: StudySection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub t_end: f64,
    /// Population sizes; strictly increasing.
    #[serde(default = "default_sizes")]
    pub n: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Snapshot stride for `simulate`; 0 keeps counts only.
    #[serde(default)]
    pub record_stride: usize,
}

fn default_sizes() -> Vec<usize> {
    vec![1000]
}

fn default_replicates() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: f64,
    pub dt: f64,
    /// Keep every `output_stride`-th step of the solution.
    #[serde(default = "one")]
    pub output_stride: usize,
    #[serde(default)]
    pub picard: PicardSection,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol_l1: f64,
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
}

fn default_iters() -> usize {
    60
}

fn default_tol() -> f64 {
    1e-7
}

fn default_relaxation() -> f64 {
    1.0
}

impl Default for PicardSection {
    fn default() -> Self {
        PicardSection { max_iters: default_iters(), tol_l1: default_tol(), relaxation: default_relaxation() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictSection {
    pub size: usize,
    /// Sobolev order of the inner product.
    #[serde(default = "default_order")]
    pub order: u32,
    /// Polynomial weight exponent.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub family: SeedFamily,
}

fn default_order() -> u32 {
    2
}

fn default_sigma() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    /// Observation times; empty means the horizon only.
    #[serde(default)]
    pub sample_times: Vec<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub clt: CltSection,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection { sample_times: Vec::new(), output: None, clt: CltSection::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltSection {
    /// Coordinate `(compartment, member)` used for the verdicts.
    #[serde(default = "default_compartment")]
    pub compartment: Compartment,
    #[serde(default)]
    pub member: usize,
    /// Drift nodes of the Galerkin system every `ou_stride` stored PDE steps.
    #[serde(default = "one")]
    pub ou_stride: usize,
    /// Variant whose Galerkin variance gates the verdict.
    #[serde(default = "default_variant")]
    pub gate_variant: BracketVariant,
    #[serde(default = "default_tolerance")]
    pub ou_tolerance: f64,
}

fn default_compartment() -> Compartment {
    Compartment::I
}

fn default_variant() -> BracketVariant {
    BracketVariant::Representation
}

fn default_tolerance() -> f64 {
    0.2
}

impl Default for CltSection {
    fn default() -> Self {
        CltSection {
            compartment: default_compartment(),
            member: 0,
            ou_stride: 1,
            gate_variant: default_variant(),
            ou_tolerance: default_tolerance(),
        }
    }
}

fn integral_multiple(t: f64, step: f64) -> bool {
    let k = (t / step).round();
    (k * step - t).abs() <= 1e-9 * t.abs().max(1.0)
}

impl ExperimentConfig {
    /// One-dimensional reference configuration: Gaussian population, infected
    /// seed in a central window, short-range flat-top contacts.
    pub fn standard() -> Self {
        let model = ModelSpec {
            dim: 1,
            coefficients: CompartmentCoefficients {
                s: CoefficientField::constant(vec![0.0], 0.3),
                i: CoefficientField::constant(vec![0.0], 0.2),
                r: CoefficientField::constant(vec![0.0], 0.3),
            },
            kernel: ContactKernel::new(
                BetaField::Constant { value: 6.0 },
                KernelShape::FlatTop { inner: 0.15, radius: 0.3, order: 4 },
            ),
            alpha: 0.5,
            initial: InitialLaw {
                density: DensityFamily::Gaussian { mean: vec![0.0], std: 1.0 },
                region: Region::Box { lo: vec![-0.5], hi: vec![0.5] },
                p_infect: 0.3,
                sigma: 1.0,
            },
            gamma: 1.0,
        };
        ExperimentConfig {
            model,
            sim: SimSection {
                dt: 0.01,
                t_end: 2.0,
                n: vec![250, 1000, 4000, 16000],
                replicates: 100,
                seed: 20240917,
                scheme: Scheme::FrozenRatePairwise,
                record_stride: 0,
            },
            pde: PdeSection {
                lo: vec![-10.0],
                hi: vec![10.0],
                h: 0.02,
                dt: 0.002,
                output_stride: 5,
                picard: PicardSection::default(),
            },
            dict: DictSection {
                size: 16,
                order: 2,
                sigma: 1.0,
                family: SeedFamily { center: vec![0.0], half_width: 4.0, bump_power: 4 },
            },
            study: StudySection { sample_times: vec![0.5, 1.0, 1.5, 2.0], output: None, clt: CltSection::default() },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn sample_times(&self) -> Vec<f64> {
        if self.study.sample_times.is_empty() {
            vec![self.sim.t_end]
        } else {
            self.study.sample_times.clone()
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            dt: self.sim.dt,
            t_end: self.sim.t_end,
            seed: self.sim.seed,
            scheme: self.sim.scheme,
            record_stride: self.sim.record_stride,
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(self.pde.lo.clone(), self.pde.hi.clone(), self.pde.h)?)
    }

    pub fn dictionary(&self) -> Result<TestDictionary> {
        Ok(basis_build(&self.dict.family, self.dict.size, self.dict.order, self.dict.sigma)?)
    }

    pub fn picard(&self) -> PicardConfig {
        PicardConfig {
            max_iters: self.pde.picard.max_iters,
            tol_l1: self.pde.picard.tol_l1,
            dt: self.pde.dt,
            relaxation: self.pde.picard.relaxation,
        }
    }

    /// Output directory: the override, else the configured one, else `out`.
    pub fn output_dir(&self, over: Option<&Path>) -> PathBuf {
        over.map(Path::to_path_buf)
            .or_else(|| self.study.output.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Structural checks, the model assumptions and the discretization bounds.
    pub fn validate(&self) -> Result<()> {
        self.model.check()?;
        let mut report = validate_model(&self.model);
        if crate::study::is_frozen(self) {
            // Nothing moves, so the ellipticity of the motion plays no role.
            report.checks.retain(|c| !c.name.starts_with("ellipticity"));
        }
        report.into_result().map_err(|e| validation(e.to_string()))?;
        self.sim_config().validate(&self.model)?;
        if self.sim.n.is_empty() || self.sim.n.contains(&0) {
            return Err(validation("sim.n must list positive population sizes"));
        }
        if self.sim.n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(validation("sim.n must be strictly increasing"));
        }
        if self.sim.replicates == 0 {
            return Err(validation("sim.replicates must be positive"));
        }
        step_count(self.sim.dt, self.sim.t_end).map_err(|e| validation(format!("sim: {e}")))?;

        let grid = self.grid()?;
        if grid.dim() != self.model.dim {
            return Err(validation(format!("pde grid has dimension {}, model has {}", grid.dim(), self.model.dim)));
        }
        if self.pde.output_stride == 0 {
            return Err(validation("pde.output_stride must be positive"));
        }
        grid.check_covers(&self.model, self.sim.t_end)?;
        for c in Compartment::ALL {
            FokkerPlanck::new(self.model.coeff(c), &grid).check_step(self.pde.dt)?;
        }
        self.picard().check()?;
        let stored = self.pde.dt * self.pde.output_stride as f64;
        if !integral_multiple(self.sim.t_end, stored) {
            return Err(validation(format!("sim.t_end = {} is not a multiple of the stored PDE step {stored}", self.sim.t_end)));
        }
        let times = self.sample_times();
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(validation("study.sample_times must be strictly increasing"));
        }
        for &t in &times {
            if !(0.0..=self.sim.t_end + 1e-12).contains(&t) {
                return Err(validation(format!("sample time {t} lies outside [0, {}]", self.sim.t_end)));
            }
            if !integral_multiple(t, self.sim.dt) || !integral_multiple(t, stored) {
                return Err(validation(format!("sample time {t} is not on both the particle and the stored PDE time grids")));
            }
        }

        if self.dict.family.dim() != self.model.dim {
            return Err(validation("dictionary dimension differs from the model dimension"));
        }
        if self.dict.size == 0 {
            return Err(validation("dict.size must be positive"));
        }
        self.dictionary()?;
        if self.study.clt.member >= self.dict.size {
            return Err(validation(format!(
                "study.clt.member = {} exceeds the dictionary size {}",
                self.study.clt.member, self.dict.size
            )));
        }
        if self.study.clt.ou_stride == 0 {
            return Err(validation("study.clt.ou_stride must be positive"));
        }
        Ok(())
    }
}

/// Parses a configuration from text; `origin` labels error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
        let full = e.to_string();
        let message = match full.rfind(" at line ") {
            Some(k) => full[..k].to_string(),
            None => full,
        };
        HarnessError::Parse { path: origin.to_string(), line: e.line(), column: e.column(), message }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::File { path: path.to_path_buf(), source })?;
    parse_config(&text, &path.display().to_string())
}
