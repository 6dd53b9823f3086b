//! KITTI-format ingestion: calibration text, object label text, velodyne
//! packed binary, and 16-bit depth PNGs, plus the camera/world frame
//! conversions. All parsers are strict: malformed input raises a specific
//! error, never a silent default.

use crate::error::{Error, Result};
use crate::occupancy::{normalize_yaw, OrientedBox3D, PointCloud};
use crate::types::{CameraCalibration, DepthMap, DEPTH_SENTINEL};
use nalgebra::{Matrix3, Matrix3x4, Point3, Vector3};
use std::io::BufWriter;
use std::path::Path;

/// One line of a KITTI object label file (15 whitespace-separated fields).
/// The location is the bottom-face center in the rectified camera frame
/// (x right, y down, z forward).
#[derive(Debug, Clone, PartialEq)]
pub struct KittiLabelRecord {
    pub category: String,
    pub truncation: f64,
    pub occlusion: i32,
    pub alpha: f64,
    /// 2D box (left, top, right, bottom) in pixels.
    pub bbox: [f64; 4],
    /// Height, width, length in meters.
    pub dims: [f64; 3],
    /// Bottom-center location in the rectified camera frame, meters.
    pub location: [f64; 3],
    /// Rotation around the camera Y axis, radians.
    pub rotation_y: f64,
}

impl KittiLabelRecord {
    pub fn is_dont_care(&self) -> bool {
        self.category == "DontCare"
    }
}

fn parse_number(token: &str, context: &str) -> Result<f64> {
    token.parse::<f64>().map_err(|_| Error::MalformedNumber {
        token: token.to_string(),
        context: context.to_string(),
    })
}

/// Parse a KITTI calibration file. Requires the `P2`, `R0_rect`, and
/// `Tr_velo_to_cam` keys; other keys are ignored.
pub fn parse_calib(text: &str) -> Result<CameraCalibration> {
    let mut p2: Option<Vec<f64>> = None;
    let mut r0: Option<Vec<f64>> = None;
    let mut tr: Option<Vec<f64>> = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        let key = key.trim();
        let (slot, expected) = match key {
            "P2" => (&mut p2, 12),
            "R0_rect" => (&mut r0, 9),
            "Tr_velo_to_cam" => (&mut tr, 12),
            _ => continue,
        };
        let values = rest
            .split_whitespace()
            .map(|tok| parse_number(tok, key))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != expected {
            return Err(Error::WrongArity {
                key: key.to_string(),
                expected,
                found: values.len(),
            });
        }
        *slot = Some(values);
    }
    let p2 = p2.ok_or_else(|| Error::MissingKey {
        key: "P2".to_string(),
    })?;
    let r0 = r0.ok_or_else(|| Error::MissingKey {
        key: "R0_rect".to_string(),
    })?;
    let tr = tr.ok_or_else(|| Error::MissingKey {
        key: "Tr_velo_to_cam".to_string(),
    })?;
    Ok(CameraCalibration {
        intrinsics: Matrix3x4::from_row_slice(&p2),
        rectification: Matrix3::from_row_slice(&r0),
        lidar_to_camera: Matrix3x4::from_row_slice(&tr),
    })
}

/// Serialize a calibration in KITTI text form (P2, R0_rect, Tr_velo_to_cam).
pub fn format_calib(calib: &CameraCalibration) -> String {
    let row = |values: &[f64]| {
        values
            .iter()
            .map(|v| format!("{v:.12e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let p2: Vec<f64> = calib.intrinsics.transpose().as_slice().to_vec();
    let r0: Vec<f64> = calib.rectification.transpose().as_slice().to_vec();
    let tr: Vec<f64> = calib.lidar_to_camera.transpose().as_slice().to_vec();
    format!(
        "P2: {}\nR0_rect: {}\nTr_velo_to_cam: {}\n",
        row(&p2),
        row(&r0),
        row(&tr)
    )
}

/// Parse a KITTI object label file: one 15-field record per non-empty line.
/// `DontCare` records are retained (flag them with
/// [`KittiLabelRecord::is_dont_care`]).
pub fn parse_labels(text: &str) -> Result<Vec<KittiLabelRecord>> {
    let mut records = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 15 {
            return Err(Error::WrongFieldCount {
                line: line_no + 1,
                expected: 15,
                found: fields.len(),
            });
        }
        let ctx = format!("label line {}", line_no + 1);
        let num = |i: usize| parse_number(fields[i], &ctx);
        records.push(KittiLabelRecord {
            category: fields[0].to_string(),
            truncation: num(1)?,
            occlusion: num(2)? as i32,
            alpha: num(3)?,
            bbox: [num(4)?, num(5)?, num(6)?, num(7)?],
            dims: [num(8)?, num(9)?, num(10)?],
            location: [num(11)?, num(12)?, num(13)?],
            rotation_y: num(14)?,
        });
    }
    Ok(records)
}

/// Serialize label records in KITTI text form.
pub fn format_labels(records: &[KittiLabelRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!(
            "{} {:.2} {} {:.6} {:.2} {:.2} {:.2} {:.2} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}\n",
            r.category,
            r.truncation,
            r.occlusion,
            r.alpha,
            r.bbox[0],
            r.bbox[1],
            r.bbox[2],
            r.bbox[3],
            r.dims[0],
            r.dims[1],
            r.dims[2],
            r.location[0],
            r.location[1],
            r.location[2],
            r.rotation_y
        ));
    }
    out
}

/// Parse a velodyne scan: packed records of four little-endian f32
/// (x, y, z, reflectance); reflectance is discarded.
pub fn read_velodyne(bytes: &[u8]) -> Result<PointCloud> {
    if !bytes.len().is_multiple_of(16) {
        return Err(Error::TruncatedRecord {
            length: bytes.len(),
        });
    }
    let points = bytes
        .chunks_exact(16)
        .map(|rec| {
            let f = |o: usize| f32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]);
            [f(0) as f64, f(4) as f64, f(8) as f64]
        })
        .collect();
    Ok(PointCloud::new(points))
}

/// Serialize a point cloud as a velodyne scan with zero reflectance.
pub fn write_velodyne(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * 16);
    for p in cloud.points() {
        for v in [p[0] as f32, p[1] as f32, p[2] as f32, 0.0f32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Read a KITTI depth PNG: 16-bit single-channel grayscale, meters = raw/256,
/// raw 0 = no measurement.
pub fn read_depth_png(path: impl AsRef<Path>) -> Result<DepthMap> {
    let file = std::fs::File::open(path)?;
    let decoder = png::Decoder::new(file);
    let mut reader = decoder.read_info().map_err(|e| Error::Png(e.to_string()))?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Sixteen {
        return Err(Error::WrongBitDepth {
            found: format!("{:?}", info.bit_depth),
        });
    }
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::WrongChannelCount {
            found: format!("{:?}", info.color_type),
        });
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Png(e.to_string()))?;
    let bytes = &buf[..frame.buffer_size()];
    // PNG samples are big-endian; depth map storage is u-major.
    let mut data = vec![DEPTH_SENTINEL; width * height];
    for v in 0..height {
        for u in 0..width {
            let o = (v * width + u) * 2;
            let raw = u16::from_be_bytes([bytes[o], bytes[o + 1]]);
            data[u * height + v] = raw as f32 / 256.0;
        }
    }
    DepthMap::new(width, height, data)
}

/// Write a depth map as a KITTI 16-bit grayscale PNG (raw = round(m * 256)).
pub fn write_depth_png(map: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let w = BufWriter::new(file);
    let mut encoder = png::Encoder::new(w, map.width() as u32, map.height() as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Png(e.to_string()))?;
    let mut bytes = Vec::with_capacity(map.width() * map.height() * 2);
    for v in 0..map.height() {
        for u in 0..map.width() {
            let raw = (map.at(u, v) as f64 * 256.0).round().clamp(0.0, 65535.0) as u16;
            bytes.extend_from_slice(&raw.to_be_bytes());
        }
    }
    writer
        .write_image_data(&bytes)
        .map_err(|e| Error::Png(e.to_string()))?;
    Ok(())
}

/// Heading direction of a camera-frame rotation_y: KITTI boxes head along
/// their local x axis, which `roty(ry)` maps to (cos ry, 0, -sin ry).
fn heading_cam(rotation_y: f64) -> Vector3<f64> {
    Vector3::new(rotation_y.cos(), 0.0, -rotation_y.sin())
}

/// Convert a label record into a world-frame oriented box: the camera-frame
/// bottom-center is lifted to the geometric center (half height along
/// camera -y, which points up), transformed through the inverse
/// rectification and inverse LiDAR-to-camera transforms, and the heading
/// mapped to a yaw about the world vertical axis.
pub fn label_to_world_box(
    rec: &KittiLabelRecord,
    calib: &CameraCalibration,
) -> Result<OrientedBox3D> {
    let [h, w, l] = rec.dims;
    let bottom = Point3::new(rec.location[0], rec.location[1], rec.location[2]);
    let center_cam = Point3::new(bottom.x, bottom.y - h / 2.0, bottom.z);
    let center = calib.world_from_cam(center_cam)?;

    let rect_inv = calib
        .rectification
        .try_inverse()
        .ok_or(Error::SingularCalibration)?;
    let tr_inv = calib.lidar_from_camera()?;
    let rot_inv = tr_inv.fixed_view::<3, 3>(0, 0);
    let heading_world = rot_inv * (rect_inv * heading_cam(rec.rotation_y));
    let yaw = heading_world.y.atan2(heading_world.x);

    OrientedBox3D::new([center.x, center.y, center.z], h, w, l, yaw)
}

/// Inverse of [`label_to_world_box`]: world box back to a camera-frame label
/// record, with the 2D bbox computed from the projected 3D corners.
pub fn world_box_to_label(
    b: &OrientedBox3D,
    calib: &CameraCalibration,
    category: &str,
) -> Result<KittiLabelRecord> {
    let center_cam = calib.cam_from_world(Point3::from(b.center));
    let bottom = [
        center_cam.x,
        center_cam.y + b.height / 2.0,
        center_cam.z,
    ];

    // Exact inverse of the forward yaw map: find ry whose camera-frame
    // heading (cos ry, 0, -sin ry), carried into the world frame, has the
    // box's yaw. With R = rect * rot and columns a = R^-1 e_x, b = R^-1 e_z,
    // the forward heading is cos(ry) a - sin(ry) b, and requiring its world
    // xy-bearing to equal yaw gives
    //   tan ry = (a_y cos yaw - a_x sin yaw) / (b_y cos yaw - b_x sin yaw)
    // up to the branch fixed by pointing the heading forward.
    let rot = calib.lidar_to_camera.fixed_view::<3, 3>(0, 0).into_owned();
    let r = calib.rectification * rot;
    let r_inv = r.try_inverse().ok_or(Error::SingularCalibration)?;
    let a = r_inv * Vector3::x();
    let bb = r_inv * Vector3::z();
    let (sy, cy) = b.yaw.sin_cos();
    let mut rotation_y = (a.y * cy - a.x * sy).atan2(bb.y * cy - bb.x * sy);
    let h_world = r_inv * heading_cam(rotation_y);
    if h_world.x * cy + h_world.y * sy < 0.0 {
        rotation_y += std::f64::consts::PI;
    }
    let rotation_y = normalize_yaw(rotation_y);

    let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for corner in b.corners() {
        let Some(p) = calib.project(Point3::from(corner)) else {
            return Err(Error::SingularCalibration);
        };
        bbox[0] = bbox[0].min(p.u);
        bbox[1] = bbox[1].min(p.v);
        bbox[2] = bbox[2].max(p.u);
        bbox[3] = bbox[3].max(p.v);
    }

    let alpha = normalize_yaw(rotation_y - bottom[0].atan2(bottom[2]));
    Ok(KittiLabelRecord {
        category: category.to_string(),
        truncation: 0.0,
        occlusion: 0,
        alpha,
        bbox,
        dims: [b.height, b.width, b.length],
        location: bottom,
        rotation_y,
    })
}
