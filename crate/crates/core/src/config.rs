//! Pipeline configuration: a flat key=value text file holding the geometric
//! hyperparameters. Defaults follow the KITTI-scale setup; flags on the CLI
//! override file values.

use crate::error::{Error, Result};
use crate::types::{BinSpec, DownsampleMode, GridSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub bin_spec: BinSpec,
    pub grid_spec: GridSpec,
    /// Extension radius `l` in bins; no default exists, so commands that
    /// need a mask fail when it is unset.
    pub extension_radius: Option<usize>,
    pub focal_alpha: f64,
    pub focal_gamma: f64,
    pub shrink_scale: f64,
    pub feature_stride: usize,
    pub downsample: DownsampleMode,
    pub threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bin_spec: BinSpec {
                d_min: 2.0,
                d_max: 46.8,
                num_bins: 80,
            },
            grid_spec: GridSpec {
                x_range: [2.0, 46.8],
                y_range: [-30.08, 30.08],
                z_range: [-3.0, 1.0],
                voxel_size: 0.16,
            },
            extension_radius: None,
            focal_alpha: 0.25,
            focal_gamma: 2.0,
            shrink_scale: 0.8,
            feature_stride: 4,
            downsample: DownsampleMode::Nearest,
            threshold: 0.5,
        }
    }
}

impl PipelineConfig {
    /// Parse `key=value` lines ('#' starts a comment). Unknown keys reject.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::invalid(format!(
                    "config line {}: expected key=value, got `{raw}`",
                    line_no + 1
                )));
            };
            cfg.apply(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply one key=value override.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let ctx = format!("config key `{key}`");
        let num = || -> Result<f64> {
            value.parse::<f64>().map_err(|_| Error::MalformedNumber {
                token: value.to_string(),
                context: ctx.clone(),
            })
        };
        let int = || -> Result<usize> {
            value.parse::<usize>().map_err(|_| Error::MalformedNumber {
                token: value.to_string(),
                context: ctx.clone(),
            })
        };
        match key {
            "d_min" => self.bin_spec.d_min = num()?,
            "d_max" => self.bin_spec.d_max = num()?,
            "num_bins" => self.bin_spec.num_bins = int()?,
            "x_min" => self.grid_spec.x_range[0] = num()?,
            "x_max" => self.grid_spec.x_range[1] = num()?,
            "y_min" => self.grid_spec.y_range[0] = num()?,
            "y_max" => self.grid_spec.y_range[1] = num()?,
            "z_min" => self.grid_spec.z_range[0] = num()?,
            "z_max" => self.grid_spec.z_range[1] = num()?,
            "voxel_size" => self.grid_spec.voxel_size = num()?,
            "extension_radius" => self.extension_radius = Some(int()?),
            "focal_alpha" => self.focal_alpha = num()?,
            "focal_gamma" => self.focal_gamma = num()?,
            "shrink_scale" => self.shrink_scale = num()?,
            "feature_stride" => self.feature_stride = int()?,
            "downsample" => {
                self.downsample = match value {
                    "nearest" => DownsampleMode::Nearest,
                    "min" => DownsampleMode::MinPool,
                    other => {
                        return Err(Error::invalid(format!(
                            "downsample mode `{other}`, expected nearest|min"
                        )))
                    }
                }
            }
            "threshold" => self.threshold = num()?,
            other => {
                return Err(Error::invalid(format!("unknown config key `{other}`")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        BinSpec::new(self.bin_spec.d_min, self.bin_spec.d_max, self.bin_spec.num_bins)?;
        GridSpec::new(
            self.grid_spec.x_range,
            self.grid_spec.y_range,
            self.grid_spec.z_range,
            self.grid_spec.voxel_size,
        )?;
        if !(self.focal_alpha > 0.0 && self.focal_alpha < 1.0) {
            return Err(Error::invalid(format!(
                "focal_alpha {} outside (0, 1)",
                self.focal_alpha
            )));
        }
        if self.focal_gamma.is_nan() || self.focal_gamma < 0.0 {
            return Err(Error::invalid(format!(
                "focal_gamma {} must be >= 0",
                self.focal_gamma
            )));
        }
        if !(self.shrink_scale > 0.0 && self.shrink_scale <= 1.0) {
            return Err(Error::BadScale {
                scale: self.shrink_scale,
            });
        }
        if self.feature_stride == 0 {
            return Err(Error::invalid("feature_stride must be >= 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid(format!(
                "threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Serialize as key=value lines (parse round-trips).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("d_min={}\n", self.bin_spec.d_min));
        out.push_str(&format!("d_max={}\n", self.bin_spec.d_max));
        out.push_str(&format!("num_bins={}\n", self.bin_spec.num_bins));
        out.push_str(&format!("x_min={}\n", self.grid_spec.x_range[0]));
        out.push_str(&format!("x_max={}\n", self.grid_spec.x_range[1]));
        out.push_str(&format!("y_min={}\n", self.grid_spec.y_range[0]));
        out.push_str(&format!("y_max={}\n", self.grid_spec.y_range[1]));
        out.push_str(&format!("z_min={}\n", self.grid_spec.z_range[0]));
        out.push_str(&format!("z_max={}\n", self.grid_spec.z_range[1]));
        out.push_str(&format!("voxel_size={}\n", self.grid_spec.voxel_size));
        if let Some(l) = self.extension_radius {
            out.push_str(&format!("extension_radius={l}\n"));
        }
        out.push_str(&format!("focal_alpha={}\n", self.focal_alpha));
        out.push_str(&format!("focal_gamma={}\n", self.focal_gamma));
        out.push_str(&format!("shrink_scale={}\n", self.shrink_scale));
        out.push_str(&format!("feature_stride={}\n", self.feature_stride));
        out.push_str(&format!(
            "downsample={}\n",
            match self.downsample {
                DownsampleMode::Nearest => "nearest",
                DownsampleMode::MinPool => "min",
            }
        ));
        out.push_str(&format!("threshold={}\n", self.threshold));
        out
    }
}
