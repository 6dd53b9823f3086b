//! Command-line surface for the depth-thickness-field pipeline: depth
//! encodings, occupancy label grids, frustum/voxel/BEV blobs, loss reports,
//! and grayscale slice renderings.

use clap::{Parser, Subcommand, ValueEnum};
use dtf_core::config::PipelineConfig;
use dtf_core::kitti;
use dtf_core::lifting::{
    collapse_to_bev, lift_features, occupancy_gate, sample_to_voxels, InterpMode, OccupancyField,
    SamplingOptions,
};
use dtf_core::occupancy::{box_labels, point_cloud_labels, union_labels};
use dtf_core::repr::{
    encode_one_hot, extension_mask, soft_extended_target, thickness_focal_loss, FocalParams,
    ThicknessField,
};
use dtf_core::viz::{render_slice, SliceAxis};
use dtf_core::{DepthMap, Error, FeaturePlane, Result, Tensor};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "dtf", version, about = "Depth thickness field toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EncodeMode {
    Onehot,
    Target,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a depth map as a one-hot volume or a soft-extended target.
    Encode {
        /// Depth input: 16-bit KITTI PNG, or a rank-2 (W, H) tensor blob.
        #[arg(long)]
        depth: PathBuf,
        #[arg(long, value_enum)]
        mode: EncodeMode,
        #[arg(long)]
        out: PathBuf,
        /// Also write the extension mask (target mode).
        #[arg(long)]
        mask_out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config key, e.g. --set num_bins=40 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Tri-state occupancy labels from a velodyne scan plus refined boxes.
    OccLabels {
        #[arg(long)]
        velodyne: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        calib: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep only these categories (repeatable); default: all but DontCare.
        #[arg(long)]
        category: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Full lift -> sample -> (gate) -> collapse pipeline.
    Pipeline {
        #[arg(long)]
        depth: PathBuf,
        /// Image features as a rank-3 (W_F, H_F, C) tensor blob.
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        calib: PathBuf,
        #[arg(long)]
        voxel_out: PathBuf,
        #[arg(long)]
        bev_out: PathBuf,
        /// Optional (X, Y, Z) occupancy blob gating the voxel features.
        #[arg(long)]
        occupancy: Option<PathBuf>,
        /// Worker threads for grid sampling; output is identical for any value.
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Nearest-neighbor sampling instead of trilinear.
        #[arg(long)]
        nearest: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Masked focal thickness loss of a predicted field against a depth map.
    Loss {
        /// Predicted thickness field, rank-3 (W_F, H_F, D) blob in [0, 1].
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        /// Write the analytic gradient to this blob.
        #[arg(long)]
        grad_out: Option<PathBuf>,
        /// Verify the gradient against central finite differences.
        #[arg(long)]
        check: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Render a grid slice as a binary PGM image.
    Viz {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        axis: String,
        #[arg(long)]
        slice: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>, sets: &[String]) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::parse(&std::fs::read_to_string(p)?)?,
        None => PipelineConfig::default(),
    };
    for s in sets {
        let Some((key, value)) = s.split_once('=') else {
            return Err(Error::InvalidArgument {
                context: format!("--set expects KEY=VALUE, got `{s}`"),
            });
        };
        cfg.apply(key.trim(), value.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Load a depth input: PNG by extension, tensor blob otherwise, already
/// reduced to feature resolution per the config.
fn load_depth(path: &Path, cfg: &PipelineConfig) -> Result<DepthMap> {
    let full = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        kitti::read_depth_png(path)?
    } else {
        DepthMap::from_tensor(&Tensor::read_file(path)?)?
    };
    full.downsample(cfg.feature_stride, cfg.downsample)
}

fn require_radius(cfg: &PipelineConfig) -> Result<usize> {
    cfg.extension_radius.ok_or_else(|| Error::InvalidArgument {
        context: "extension_radius is required (set it in the config file or via --set)".into(),
    })
}

/// Tracks files written so a failing command can remove partial outputs.
struct Outputs {
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new() -> Self {
        Self {
            written: Vec::new(),
        }
    }

    fn write_blob(&mut self, tensor: &Tensor, path: &Path) -> Result<()> {
        tensor.write_file(path)?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    fn write_bytes(&mut self, bytes: &[u8], path: &Path) -> Result<()> {
        std::fs::write(path, bytes)?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    fn discard_all(&self) {
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
    }
}

fn run(cli: Cli, outputs: &mut Outputs) -> Result<()> {
    match cli.command {
        Command::Encode {
            depth,
            mode,
            out,
            mask_out,
            config,
            sets,
        } => {
            let cfg = load_config(&config, &sets)?;
            let map = load_depth(&depth, &cfg)?;
            let one_hot = encode_one_hot(&map, &cfg.bin_spec)?;
            match mode {
                EncodeMode::Onehot => {
                    outputs.write_blob(&one_hot.to_tensor(), &out)?;
                }
                EncodeMode::Target => {
                    let radius = require_radius(&cfg)?;
                    let mask = extension_mask(&one_hot, radius);
                    let target = soft_extended_target(one_hot.volume(), &mask)?;
                    outputs.write_blob(&target.to_tensor(), &out)?;
                    if let Some(mask_path) = mask_out {
                        outputs.write_blob(&mask.to_tensor(), &mask_path)?;
                    }
                }
            }
        }
        Command::OccLabels {
            velodyne,
            labels,
            calib,
            out,
            category,
            config,
            sets,
        } => {
            let cfg = load_config(&config, &sets)?;
            let calib = kitti::parse_calib(&std::fs::read_to_string(calib)?)?;
            let cloud = kitti::read_velodyne(&std::fs::read(velodyne)?)?;
            let records = kitti::parse_labels(&std::fs::read_to_string(labels)?)?;
            let boxes = records
                .iter()
                .filter(|r| !r.is_dont_care())
                .filter(|r| category.is_empty() || category.contains(&r.category))
                .map(|r| kitti::label_to_world_box(r, &calib))
                .collect::<Result<Vec<_>>>()?;
            let origin = calib.camera_center_world()?;
            let from_points =
                point_cloud_labels(&cloud, [origin.x, origin.y, origin.z], &cfg.grid_spec)?;
            let from_boxes = box_labels(&boxes, cfg.shrink_scale, &cfg.grid_spec)?;
            let merged = union_labels(&from_points, &from_boxes)?;
            outputs.write_blob(&merged.to_tensor(), &out)?;
        }
        Command::Pipeline {
            depth,
            features,
            calib,
            voxel_out,
            bev_out,
            occupancy,
            threads,
            nearest,
            config,
            sets,
        } => {
            let cfg = load_config(&config, &sets)?;
            let calib = kitti::parse_calib(&std::fs::read_to_string(calib)?)?;
            let map = load_depth(&depth, &cfg)?;
            let plane = FeaturePlane::from_tensor(&Tensor::read_file(&features)?)
                .map_err(|e| stage_error("features", e))?;
            if plane.width() != map.width() || plane.height() != map.height() {
                return Err(Error::DimMismatch {
                    context: format!(
                        "pipeline stage encode: depth at feature resolution is {}x{} but features are {}x{}",
                        map.width(),
                        map.height(),
                        plane.width(),
                        plane.height()
                    ),
                });
            }
            let one_hot = encode_one_hot(&map, &cfg.bin_spec)?;
            let frustum = lift_features(one_hot.volume(), &plane)
                .map_err(|e| stage_error("lift", e))?;
            let opts = SamplingOptions {
                interp: if nearest {
                    InterpMode::Nearest
                } else {
                    InterpMode::Trilinear
                },
                threads,
            };
            let mut voxels = sample_to_voxels(
                &frustum,
                &calib,
                &cfg.grid_spec,
                &cfg.bin_spec,
                cfg.feature_stride,
                &opts,
            )
            .map_err(|e| stage_error("sample", e))?;
            if let Some(occ_path) = occupancy {
                let occ = OccupancyField::from_tensor(&Tensor::read_file(&occ_path)?)
                    .map_err(|e| stage_error("gate", e))?;
                voxels = occupancy_gate(&voxels, &occ).map_err(|e| stage_error("gate", e))?;
            }
            let bev = collapse_to_bev(&voxels);
            outputs.write_blob(&voxels.to_tensor(), &voxel_out)?;
            outputs.write_blob(&bev.to_tensor(), &bev_out)?;
        }
        Command::Loss {
            pred,
            depth,
            grad_out,
            check,
            config,
            sets,
        } => {
            let cfg = load_config(&config, &sets)?;
            let map = load_depth(&depth, &cfg)?;
            let pred_volume = dtf_core::repr::DepthVolume::from_tensor(&Tensor::read_file(&pred)?)?;
            let pred_field = ThicknessField::from_volume(pred_volume)?;
            let one_hot = encode_one_hot(&map, &cfg.bin_spec)?;
            let radius = require_radius(&cfg)?;
            let mask = extension_mask(&one_hot, radius);
            let target = soft_extended_target(one_hot.volume(), &mask)?;
            let params = FocalParams {
                alpha: cfg.focal_alpha,
                gamma: cfg.focal_gamma,
            };
            let out = thickness_focal_loss(&pred_field, &target, &mask, &params)?;
            println!("loss {:.9}", out.loss);
            if let Some(grad_path) = grad_out {
                outputs.write_blob(&out.grad.to_tensor(), &grad_path)?;
                println!("grad {}", grad_path.display());
            }
            if check {
                let max_rel = finite_difference_check(&pred_field, &target, &mask, &params)?;
                println!("fd_max_rel_err {max_rel:.3e}");
            }
        }
        Command::Viz {
            input,
            axis,
            slice,
            out,
        } => {
            let tensor = Tensor::read_file(&input)?;
            let image = render_slice(&tensor, SliceAxis::parse(&axis)?, slice)?;
            outputs.write_bytes(&image.to_pgm(), &out)?;
        }
    }
    Ok(())
}

fn stage_error(stage: &str, e: Error) -> Error {
    match e {
        Error::DimMismatch { context } => Error::DimMismatch {
            context: format!("pipeline stage {stage}: {context}"),
        },
        other => other,
    }
}

/// Central finite differences (h = 1e-4) on every prediction entry; returns
/// the max relative error against the analytic gradient.
fn finite_difference_check(
    pred: &ThicknessField,
    target: &dtf_core::repr::DepthVolume,
    mask: &dtf_core::repr::ExtensionMask,
    params: &FocalParams,
) -> Result<f64> {
    let h = 1e-4;
    let analytic = thickness_focal_loss(pred, target, mask, params)?;
    let mut max_rel = 0.0f64;
    let base = pred.volume().clone();
    for i in 0..base.data().len() {
        let mut plus = base.clone();
        plus.data_mut()[i] = (base.data()[i] as f64 + h).min(1.0) as f32;
        let mut minus = base.clone();
        minus.data_mut()[i] = (base.data()[i] as f64 - h).max(0.0) as f32;
        let step = plus.data()[i] as f64 - minus.data()[i] as f64;
        if step == 0.0 {
            continue;
        }
        let lp = thickness_focal_loss(&ThicknessField::from_volume(plus)?, target, mask, params)?
            .loss;
        let lm = thickness_focal_loss(&ThicknessField::from_volume(minus)?, target, mask, params)?
            .loss;
        let fd = (lp - lm) / step;
        let an = analytic.grad.data()[i] as f64;
        let scale = an.abs().max(fd.abs());
        if scale > 1e-12 {
            max_rel = max_rel.max((fd - an).abs() / scale);
        }
    }
    Ok(max_rel)
}

fn main() {
    let cli = Cli::parse();
    let mut outputs = Outputs::new();
    if let Err(e) = run(cli, &mut outputs) {
        outputs.discard_all();
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
