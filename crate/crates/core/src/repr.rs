//! Per-pixel depth representations over D bins, the soft-extended supervision
//! target, and the masked focal thickness loss with its analytic gradient.
//!
//! Three representations share the (W_F, H_F, D) layout but differ in their
//! per-pixel constraint:
//!
//! * one-hot: exactly one bin set to 1 (all-zero for sentinel pixels);
//! * distribution: entries in [0, 1] summing to 1;
//! * thickness field: entries independently in [0, 1], no sum constraint, so
//!   a contiguous run of saturated bins can encode object extent along the
//!   camera ray.
//!
//! Loss reductions run in a fixed index order; identical inputs give
//! bit-identical outputs regardless of caller threading.

use crate::binning::{lid_edges, lid_index};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::types::{BinSpec, DepthMap};

/// Clamp floor for logarithms inside the focal loss.
pub const LOSS_EPSILON: f64 = 1e-6;

/// Generic (W_F, H_F, D) volume, stored u-major to match blob dims (W, H, D).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthVolume {
    width: usize,
    height: usize,
    depth_bins: usize,
    data: Vec<f32>,
}

impl DepthVolume {
    pub fn new(width: usize, height: usize, depth_bins: usize, data: Vec<f32>) -> Result<Self> {
        let n = width * height * depth_bins;
        if n == 0 {
            return Err(Error::invalid("volume dims must be positive"));
        }
        if data.len() != n {
            return Err(Error::dim_mismatch(format!(
                "volume ({width}, {height}, {depth_bins}) requires {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            depth_bins,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, depth_bins: usize) -> Result<Self> {
        Self::new(width, height, depth_bins, vec![0.0; width * height * depth_bins])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depth_bins(&self) -> usize {
        self.depth_bins
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.depth_bins)
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize, d: usize) -> usize {
        (u * self.height + v) * self.depth_bins + d
    }

    pub fn at(&self, u: usize, v: usize, d: usize) -> f32 {
        self.data[self.index(u, v, d)]
    }

    pub fn set(&mut self, u: usize, v: usize, d: usize, value: f32) {
        let i = self.index(u, v, d);
        self.data[i] = value;
    }

    /// The D-vector of one pixel.
    pub fn ray(&self, u: usize, v: usize) -> &[f32] {
        let start = self.index(u, v, 0);
        &self.data[start..start + self.depth_bins]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![
                self.width as u32,
                self.height as u32,
                self.depth_bins as u32,
            ],
            self.data.clone(),
        )
        .expect("volume dims are consistent")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match t.dims() {
            [w, h, d] => Self::new(*w as usize, *h as usize, *d as usize, t.data().to_vec()),
            other => Err(Error::dim_mismatch(format!(
                "volume tensor must be rank 3 (W, H, D), got dims {other:?}"
            ))),
        }
    }
}

fn check_same_dims(a: &DepthVolume, b: &DepthVolume, what: &str) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::dim_mismatch(format!(
            "{what}: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Per-pixel depth one-hot encoding. Valid pixels carry exactly one 1;
/// sentinel-depth pixels are all-zero and flagged invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotVolume {
    volume: DepthVolume,
    valid: Vec<bool>,
}

impl OneHotVolume {
    pub fn volume(&self) -> &DepthVolume {
        &self.volume
    }

    pub fn valid(&self, u: usize, v: usize) -> bool {
        self.valid[u * self.volume.height + v]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Bin index of a valid pixel, `None` for invalid ones.
    pub fn bin_of(&self, u: usize, v: usize) -> Option<usize> {
        if !self.valid(u, v) {
            return None;
        }
        self.volume.ray(u, v).iter().position(|&x| x == 1.0)
    }

    pub fn to_tensor(&self) -> Tensor {
        self.volume.to_tensor()
    }

    /// Rebuild from a raw volume; a pixel is valid iff its D-vector is a
    /// strict one-hot, all-zero rows are invalid, anything else rejects.
    pub fn from_volume(volume: DepthVolume) -> Result<Self> {
        let mut valid = Vec::with_capacity(volume.width * volume.height);
        for u in 0..volume.width {
            for v in 0..volume.height {
                let ray = volume.ray(u, v);
                let ones = ray.iter().filter(|&&x| x == 1.0).count();
                let zeros = ray.iter().filter(|&&x| x == 0.0).count();
                if ones + zeros != ray.len() || ones > 1 {
                    return Err(Error::invalid(format!(
                        "pixel ({u}, {v}) is not one-hot"
                    )));
                }
                valid.push(ones == 1);
            }
        }
        Ok(Self { volume, valid })
    }
}

/// Per-pixel probability distribution over depth bins: entries in [0, 1]
/// summing to 1 within 1e-5.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionVolume {
    volume: DepthVolume,
}

impl DistributionVolume {
    pub fn from_volume(volume: DepthVolume) -> Result<Self> {
        for u in 0..volume.width {
            for v in 0..volume.height {
                let ray = volume.ray(u, v);
                let mut sum = 0.0f64;
                for &p in ray {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::RangeError {
                            context: format!(
                                "distribution entry {p} at pixel ({u}, {v}) outside [0, 1]"
                            ),
                        });
                    }
                    sum += p as f64;
                }
                if (sum - 1.0).abs() >= 1e-5 {
                    return Err(Error::RangeError {
                        context: format!(
                            "distribution at pixel ({u}, {v}) sums to {sum}, expected 1"
                        ),
                    });
                }
            }
        }
        Ok(Self { volume })
    }

    pub fn volume(&self) -> &DepthVolume {
        &self.volume
    }

    pub fn to_tensor(&self) -> Tensor {
        self.volume.to_tensor()
    }
}

/// Depth thickness field: independent per-bin activations in [0, 1] with no
/// sum constraint. This is the representational difference from
/// [`DistributionVolume`]: several bins along a ray may saturate at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ThicknessField {
    volume: DepthVolume,
}

impl ThicknessField {
    pub fn from_volume(volume: DepthVolume) -> Result<Self> {
        for (i, &f) in volume.data.iter().enumerate() {
            if !f.is_finite() {
                return Err(Error::non_finite(format!(
                    "thickness entry {f} at flat index {i}"
                )));
            }
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::RangeError {
                    context: format!("thickness entry {f} at flat index {i} outside [0, 1]"),
                });
            }
        }
        Ok(Self { volume })
    }

    pub fn volume(&self) -> &DepthVolume {
        &self.volume
    }

    pub fn to_tensor(&self) -> Tensor {
        self.volume.to_tensor()
    }
}

/// Supervision-exemption mask: 0 on the band of up to `l` bins on each side
/// of a valid pixel's true bin, 1 elsewhere. Sentinel pixels get all-zero
/// rows so they contribute nothing to the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionMask {
    volume: DepthVolume,
    radius: usize,
}

impl ExtensionMask {
    pub fn volume(&self) -> &DepthVolume {
        &self.volume
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn at(&self, u: usize, v: usize, d: usize) -> bool {
        self.volume.at(u, v, d) != 0.0
    }

    pub fn to_tensor(&self) -> Tensor {
        self.volume.to_tensor()
    }

    /// Rebuild from a raw 0/1 volume (radius recorded as given).
    pub fn from_volume(volume: DepthVolume, radius: usize) -> Result<Self> {
        if volume.data.iter().any(|&m| m != 0.0 && m != 1.0) {
            return Err(Error::invalid("mask entries must be 0 or 1"));
        }
        Ok(Self { volume, radius })
    }
}

/// Depth one-hot encoding of a feature-resolution depth map. Out-of-range
/// depths clamp to the nearest bin; sentinel pixels come out all-zero.
pub fn encode_one_hot(depth: &DepthMap, spec: &BinSpec) -> Result<OneHotVolume> {
    let (w, h, d) = (depth.width(), depth.height(), spec.num_bins);
    let mut volume = DepthVolume::zeros(w, h, d)?;
    let mut valid = vec![false; w * h];
    for u in 0..w {
        for v in 0..h {
            if !depth.is_valid(u, v) {
                continue;
            }
            let bin = lid_index(depth.at(u, v) as f64, spec).value;
            volume.set(u, v, bin, 1.0);
            valid[u * h + v] = true;
        }
    }
    Ok(OneHotVolume { volume, valid })
}

/// Exponentiate-and-normalize per pixel (max-subtracted for overflow
/// safety). Preserves the order of entries within each ray.
pub fn normalize_distribution(logits: &DepthVolume) -> Result<DistributionVolume> {
    if logits.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::non_finite("distribution logits"));
    }
    let mut volume = logits.clone();
    let (w, h, d) = volume.dims();
    for u in 0..w {
        for v in 0..h {
            let start = volume.index(u, v, 0);
            let ray = &mut volume.data[start..start + d];
            let max = ray.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
            let mut sum = 0.0f64;
            let mut exps = vec![0.0f64; d];
            for (i, &x) in ray.iter().enumerate() {
                let e = ((x as f64) - max).exp();
                exps[i] = e;
                sum += e;
            }
            for (slot, e) in ray.iter_mut().zip(exps) {
                *slot = (e / sum) as f32;
            }
        }
    }
    DistributionVolume::from_volume(volume)
}

/// Response-extension mask around each valid pixel's bin:
/// `m_d = 1` iff `|d - z'| > l` or `d = z'`, truncated at the bin range.
pub fn extension_mask(one_hot: &OneHotVolume, radius: usize) -> ExtensionMask {
    let (w, h, d) = one_hot.volume.dims();
    let mut volume = DepthVolume::zeros(w, h, d).expect("dims already validated");
    for u in 0..w {
        for v in 0..h {
            let Some(bin) = one_hot.bin_of(u, v) else {
                continue; // sentinel pixel: mask row stays all-zero
            };
            for i in 0..d {
                let dist = bin.abs_diff(i);
                let m = dist > radius || i == bin;
                volume.set(u, v, i, if m { 1.0 } else { 0.0 });
            }
        }
    }
    ExtensionMask { volume, radius }
}

/// Element-wise product of an encoding and the mask. For a strict one-hot
/// this is the identity (the mask keeps the true bin); the mask's effect on
/// supervision happens in [`thickness_focal_loss`], which skips mask-0 bins.
pub fn soft_extended_target(psi: &DepthVolume, mask: &ExtensionMask) -> Result<DepthVolume> {
    check_same_dims(psi, &mask.volume, "soft-extended target")?;
    let mut out = psi.clone();
    for (t, m) in out.data.iter_mut().zip(mask.volume.data.iter()) {
        *t *= m;
    }
    Ok(out)
}

/// Focal loss hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            gamma: 2.0,
        }
    }
}

/// Loss value together with its exact gradient with respect to the
/// prediction.
#[derive(Debug, Clone)]
pub struct FocalLoss {
    pub loss: f64,
    pub grad: DepthVolume,
}

/// Masked binary focal loss over (pixel, bin) pairs, averaged over
/// `W_F * H_F` pixels. Bins with mask 0 contribute zero loss and zero
/// gradient; sentinel pixels are excluded through their all-zero mask rows
/// while the denominator stays `W_F * H_F`.
///
/// Per mask-1 bin with prediction `p` and target `t`:
///
/// ```text
/// term = -alpha t (1-p)^gamma ln(max(p, eps))
///        -(1-alpha)(1-t) p^gamma ln(max(1-p, eps))
/// ```
///
/// The logs are floored at `eps = 1e-6`; the returned gradient is the exact
/// derivative of this clamped expression, so a perfect binary prediction
/// yields loss exactly 0 with zero gradient.
pub fn thickness_focal_loss(
    pred: &ThicknessField,
    target: &DepthVolume,
    mask: &ExtensionMask,
    params: &FocalParams,
) -> Result<FocalLoss> {
    check_same_dims(&pred.volume, target, "focal loss pred/target")?;
    check_same_dims(&pred.volume, &mask.volume, "focal loss pred/mask")?;
    if !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(Error::invalid(format!(
            "focal alpha {} outside (0, 1)",
            params.alpha
        )));
    }
    if params.gamma.is_nan() || params.gamma < 0.0 {
        return Err(Error::invalid(format!(
            "focal gamma {} must be >= 0",
            params.gamma
        )));
    }
    if target.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::non_finite("focal loss target"));
    }

    let (w, h, _) = pred.volume.dims();
    let norm = 1.0 / (w as f64 * h as f64);
    let alpha = params.alpha;
    let gamma = params.gamma;

    let mut grad = DepthVolume::zeros(w, h, pred.volume.depth_bins)?;
    let mut loss = 0.0f64;
    for i in 0..pred.volume.data.len() {
        if mask.volume.data[i] == 0.0 {
            continue;
        }
        let p = pred.volume.data[i] as f64;
        let t = target.data[i] as f64;
        let ln_p = p.max(LOSS_EPSILON).ln();
        let ln_q = (1.0 - p).max(LOSS_EPSILON).ln();
        let pow_q = (1.0 - p).powf(gamma); // (1-p)^gamma
        let pow_p = p.powf(gamma);

        loss += -alpha * t * pow_q * ln_p - (1.0 - alpha) * (1.0 - t) * pow_p * ln_q;

        // d/dp of the clamped expression. The modulator-derivative terms are
        // written to avoid 0 * inf at the saturated endpoints (gamma < 1) and
        // the log derivatives vanish where the clamp is active.
        let d_ln_p = if p >= LOSS_EPSILON { 1.0 / p } else { 0.0 };
        let d_ln_q = if 1.0 - p >= LOSS_EPSILON {
            -1.0 / (1.0 - p)
        } else {
            0.0
        };
        let pos_mod = if gamma == 0.0 || ln_p == 0.0 {
            0.0
        } else {
            alpha * t * gamma * (1.0 - p).powf(gamma - 1.0) * ln_p
        };
        let pos_log = -alpha * t * pow_q * d_ln_p;
        let neg_mod = if gamma == 0.0 || ln_q == 0.0 {
            0.0
        } else {
            -(1.0 - alpha) * (1.0 - t) * gamma * p.powf(gamma - 1.0) * ln_q
        };
        let neg_log = -(1.0 - alpha) * (1.0 - t) * pow_p * d_ln_q;
        grad.data[i] = ((pos_mod + pos_log + neg_mod + neg_log) * norm) as f32;
    }

    Ok(FocalLoss {
        loss: loss * norm,
        grad,
    })
}

/// A maximal contiguous run of bins with thickness at or above a threshold,
/// with its metric extent from the LID edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThicknessRun {
    pub start_bin: usize,
    pub bin_count: usize,
    pub start_depth: f64,
    pub end_depth: f64,
}

/// Threshold profile of one camera ray of a thickness field.
pub fn thickness_profile(ray: &[f32], tau: f64, spec: &BinSpec) -> Result<Vec<ThicknessRun>> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("threshold {tau} outside (0, 1)")));
    }
    if ray.len() != spec.num_bins {
        return Err(Error::dim_mismatch(format!(
            "ray has {} bins, spec has {}",
            ray.len(),
            spec.num_bins
        )));
    }
    let edges = lid_edges(spec);
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for d in 0..=ray.len() {
        let on = d < ray.len() && ray[d] as f64 >= tau;
        match (start, on) {
            (None, true) => start = Some(d),
            (Some(s), false) => {
                runs.push(ThicknessRun {
                    start_bin: s,
                    bin_count: d - s,
                    start_depth: edges.edges()[s],
                    end_depth: edges.edges()[d],
                });
                start = None;
            }
            _ => {}
        }
    }
    Ok(runs)
}

/// Unweighted sum of the three loss terms.
pub fn compose_total_loss(l_org: f64, l_occ: f64, l_thickness: f64) -> Result<f64> {
    for (name, v) in [("l_org", l_org), ("l_occ", l_occ), ("l_thickness", l_thickness)] {
        if !v.is_finite() {
            return Err(Error::non_finite(format!("{name} = {v}")));
        }
    }
    Ok(l_org + l_occ + l_thickness)
}
