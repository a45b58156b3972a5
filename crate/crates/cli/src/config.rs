use std::path::{Path, PathBuf};

use bedrecon::baselines::BaselineConfig;
use bedrecon::data::{ObsConfig, SynthParams};
use bedrecon::eval::SplitSpec;
use bedrecon::physics::{LossConfig, Schedule};
use bedrecon::pipeline::{PickScope, ReconOptions, SolveMode};
use bedrecon::solve::{SolveSettings, SolverConfig, TileConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Environment variable naming the output directory when the config leaves
/// it unset.
pub const OUT_ENV: &str = "BEDRECON_OUT";
const DEFAULT_OUT: &str = "bedrecon-out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenePaths {
    pub surface: Option<PathBuf>,
    pub velocity_x: Option<PathBuf>,
    pub velocity_y: Option<PathBuf>,
    pub smb: Option<PathBuf>,
    pub dhdt: Option<PathBuf>,
    pub prior_bed: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory holding the scene rasters under their standard names. Any
    /// raster listed in `scene` overrides the file found here.
    pub scene_dir: Option<PathBuf>,
    pub scene: ScenePaths,
    pub picks: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub synth: SynthParams,
    pub split: SplitSpec,
    pub observations: ObsConfig,
    pub pick_scope: PickScope,
    pub loss: LossConfig,
    pub schedule: Schedule,
    pub solver: SolverConfig,
    pub tiles: TileConfig,
    pub mode: SolveMode,
    pub tta: bool,
    pub baseline: BaselineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: SolverConfig::default().seed,
            paths: Paths::default(),
            synth: SynthParams::default(),
            split: SplitSpec::default(),
            observations: ObsConfig::default(),
            pick_scope: PickScope::default(),
            loss: LossConfig::default(),
            schedule: Schedule::default(),
            solver: SolverConfig::default(),
            tiles: TileConfig::default(),
            mode: SolveMode::default(),
            tta: false,
            baseline: BaselineConfig::default(),
        }
    }
}

pub const SCENE_FILES: [(&str, &str); 6] = [
    ("surface", "surface.asc"),
    ("velocity_x", "velocity_x.asc"),
    ("velocity_y", "velocity_y.asc"),
    ("smb", "smb.asc"),
    ("dhdt", "dhdt.asc"),
    ("prior_bed", "prior_bed.asc"),
];

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies `key=value` overrides
    /// and resolves relative paths against the config file's directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                serde_json::from_str::<Value>(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let mut cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.solver.seed = cfg.seed;
        if let Some(base) = path.and_then(Path::parent) {
            cfg.paths.rebase(base);
        }
        Ok(cfg)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths
            .output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn recon_options(&self) -> ReconOptions {
        ReconOptions {
            split: self.split,
            observations: self.observations,
            picks: self.pick_scope,
            settings: SolveSettings { loss: self.loss.clone(), schedule: self.schedule, solver: self.solver.clone() },
            tiles: self.tiles,
            mode: self.mode,
            tta: self.tta,
        }
    }

    /// Checks numeric invariants of every section.
    pub fn validate_numbers(&self) -> Result<(), CliError> {
        self.loss.validate()?;
        self.solver.validate()?;
        self.tiles.validate()?;
        self.baseline.validate()?;
        Ok(())
    }

    /// Scene raster paths by standard name; every one must exist.
    pub fn scene_paths(&self) -> Result<Vec<(&'static str, PathBuf)>, CliError> {
        let s = &self.paths.scene;
        let explicit = [&s.surface, &s.velocity_x, &s.velocity_y, &s.smb, &s.dhdt, &s.prior_bed];
        let mut out = Vec::new();
        for ((name, file), given) in SCENE_FILES.iter().zip(explicit) {
            let p = match (given, &self.paths.scene_dir) {
                (Some(p), _) => p.clone(),
                (None, Some(dir)) => dir.join(file),
                (None, None) => return Err(CliError::Config(format!("no path for scene raster `{name}`"))),
            };
            require_exists(&p)?;
            out.push((*name, p));
        }
        Ok(out)
    }

    pub fn picks_path(&self) -> Result<PathBuf, CliError> {
        let p = self
            .paths
            .picks
            .clone()
            .or_else(|| self.paths.scene_dir.as_ref().map(|d| d.join("picks.csv")))
            .ok_or_else(|| CliError::Config("no path for radar picks".into()))?;
        require_exists(&p)?;
        Ok(p)
    }
}

impl Paths {
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut self.scene_dir);
        fix(&mut self.picks);
        fix(&mut self.output_dir);
        let s = &mut self.scene;
        for p in [&mut s.surface, &mut s.velocity_x, &mut s.velocity_y, &mut s.smb, &mut s.dhdt, &mut s.prior_bed] {
            fix(p);
        }
    }
}

fn require_exists(p: &Path) -> Result<(), CliError> {
    if p.exists() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{} does not exist", p.display())))
    }
}

/// Sets a dotted key in a JSON tree. The value is parsed as JSON when it can
/// be and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{key}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(m) => m,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().expect("just set")
            }
            _ => return Err(CliError::Config(format!("`{}` is not a section", parts[..i].join(".")))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("key has at least one part")
}
