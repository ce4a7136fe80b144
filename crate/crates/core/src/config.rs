//! Run configuration shared by the command-line driver and the fixture
//! writer. Stored as JSON; relative paths resolve against the file's
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{PipelineConfig, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub levels: usize,
    pub t_max: f64,
    pub t_min: f64,
    pub beta: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            levels: 30,
            t_max: 0.40,
            t_min: 0.10,
            beta: 0.1,
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<Schedule> {
        Schedule::linear(self.levels, self.t_max, self.t_min, self.beta)
    }
}

/// Leave partition used when a frame has no leaves file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverSegmentation {
    /// Quantization levels per color channel.
    pub levels: u32,
    /// Grid block side in pixels.
    pub block: usize,
}

impl Default for OverSegmentation {
    fn default() -> Self {
        Self { levels: 4, block: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Frame images in order.
    pub frames: Vec<PathBuf>,
    /// Leave partitions, one per frame, or empty.
    pub leaves: Vec<PathBuf>,
    /// Hierarchy JSON files, one per frame, or empty.
    pub hierarchies: Vec<PathBuf>,
    /// Object label maps (0 = background), one per frame, for `eval`.
    pub ground_truth: Vec<PathBuf>,
    /// Solution bundle read by `eval` and `render`.
    pub bundle: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub schedule: ScheduleConfig,
    pub pipeline: PipelineConfig,
    pub over_segmentation: OverSegmentation,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format("config", e.to_string()))
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        if let Some(base) = path.parent() {
            config.resolve(base);
        }
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.frames.iter_mut().for_each(fix);
        self.leaves.iter_mut().for_each(fix);
        self.hierarchies.iter_mut().for_each(fix);
        self.ground_truth.iter_mut().for_each(fix);
        self.bundle.iter_mut().for_each(fix);
        self.output.iter_mut().for_each(fix);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.schedule;
        if !(s.t_min > 0.0 && s.t_max >= s.t_min && s.t_max <= 1.0) {
            return Err(Error::invalid(format!(
                "schedule needs 0 < t_min <= t_max <= 1, got [{}, {}]",
                s.t_min, s.t_max
            )));
        }
        if !(s.beta >= 0.0 && s.beta <= s.t_max) {
            return Err(Error::invalid(format!("beta {} outside [0, t_max]", s.beta)));
        }
        s.build()?;
        self.pipeline.validate()?;
        let n = self.frames.len();
        for (name, list) in [
            ("leaves", &self.leaves),
            ("hierarchies", &self.hierarchies),
            ("ground_truth", &self.ground_truth),
        ] {
            if !list.is_empty() && list.len() != n {
                return Err(Error::invalid(format!(
                    "{} {name} entries for {n} frames",
                    list.len()
                )));
            }
        }
        if !self.hierarchies.is_empty() && self.leaves.is_empty() {
            return Err(Error::invalid("hierarchies need explicit leaves"));
        }
        if self.over_segmentation.levels == 0 || self.over_segmentation.block == 0 {
            return Err(Error::invalid("over-segmentation levels and block must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
        c.validate().unwrap();
        assert_eq!(c.schedule.build().unwrap().len(), 30);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = RunConfig::from_json(r#"{"schedule": {"levels": 5}, "pipeline": {"descriptors": {"mu": 0.1}}}"#).unwrap();
        assert_eq!(c.schedule.levels, 5);
        assert_eq!(c.schedule.t_max, 0.40);
        assert_eq!(c.pipeline.descriptors.mu, 0.1);
        assert_eq!(c.pipeline.descriptors.window, PipelineConfig::default().descriptors.window);
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(RunConfig::from_json(r#"{"frame": []}"#).is_err());
    }

    #[test]
    fn invalid_schedule() {
        let mut c = RunConfig::default();
        c.schedule.t_min = 0.5;
        assert!(c.validate().is_err());
        c.schedule = ScheduleConfig { beta: 0.6, ..ScheduleConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn relative_paths_resolve() {
        let mut c = RunConfig::from_json(r#"{"frames": ["a.png", "/abs/b.png"]}"#).unwrap();
        c.resolve(Path::new("/data"));
        assert_eq!(c.frames, vec![PathBuf::from("/data/a.png"), PathBuf::from("/abs/b.png")]);
    }
}
