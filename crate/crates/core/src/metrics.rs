// SPDX-License-Identifier: Apache-2.0

//! Approximate addition, image reconstruction quality, and design
//! comparison.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::netlist::{estimate_transistors, GateCostTable, Netlist, PartitionSpec};
use crate::sim::{run_pipeline, CompiledNetlist, DelayModel, Operands, RunOptions, RunStatus};

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{} samples for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(ImageBuffer { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        ImageBuffer {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(u8) -> u8) -> Self {
        ImageBuffer {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Binary PGM (`P5`, maxval 255).
    pub fn read_pgm<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::InvalidInput("truncated PGM header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if fields[0] != "P5" {
            return Err(Error::InvalidInput(format!("expected P5 PGM, found {:?}", fields[0])));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("bad PGM header field {s:?}")))
        };
        let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval != 255 {
            return Err(Error::InvalidInput(format!("PGM maxval {maxval} unsupported, need 255")));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let end = pos + width * height;
        if end > bytes.len() {
            return Err(Error::InvalidInput("truncated PGM raster".into()));
        }
        ImageBuffer::new(width, height, bytes[pos..end].to_vec())
    }

    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_pgm(std::fs::File::open(path)?)
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(self.data.len() + 20);
        self.write_pgm(&mut v).expect("writing to a Vec cannot fail");
        v
    }
}

fn same_dims(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::InvalidInput(format!(
            "image dimensions differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// `a + b` computed as a partitioned adder: the low `L` bits exactly, then the
/// high `N - L` bits from the carry between them, inverted when
/// `corrupt_carry`. Returns all `N + 1` bits.
pub fn approximate_add(a: u64, b: u64, partition: PartitionSpec, corrupt_carry: bool) -> u64 {
    let (n, l) = (partition.n, partition.l);
    let mask = |w: usize| if w >= 64 { u64::MAX } else { (1u64 << w) - 1 };
    let (a, b) = (a & mask(n), b & mask(n));
    let low = (a & mask(l)) + (b & mask(l));
    let q = (low >> l) & 1;
    let carry = q ^ corrupt_carry as u64;
    let high = (a >> l) + (b >> l) + carry;
    (high << l) | (low & mask(l))
}

/// [`approximate_add`] on a 32-bit partition, wrapping modulo 2^32.
pub fn approximate_add32(a: u32, b: u32, partition: PartitionSpec, corrupt_carry: bool) -> Result<u32> {
    if partition.n != 32 {
        return Err(Error::InvalidParameter(format!(
            "approximate_add32 needs a 32-bit partition, got {}",
            partition
        )));
    }
    Ok(approximate_add(a as u64, b as u64, partition, corrupt_carry) as u32)
}

/// When the LSU carry is inverted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Corruption {
    Never,
    Always,
    /// Each addition independently, with probability `p`.
    Random { p: f64, seed: u64 },
}

/// Two-exposure fixed-point averaging: promote both samples by
/// `promote_shift`, add, shift right by `average_shift`, clamp to 8 bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub promote_shift: u32,
    pub average_shift: u32,
    pub corruption: Corruption,
}

impl Default for Reconstruction {
    /// A flipped carry at bit `L` moves a pixel by `2^(L - 8)` gray levels,
    /// so `L` from 8 to 14 spans 1 to 64 levels.
    fn default() -> Self {
        Reconstruction {
            promote_shift: 7,
            average_shift: 8,
            corruption: Corruption::Always,
        }
    }
}

impl Reconstruction {
    pub fn validate(&self) -> Result<()> {
        if self.promote_shift > 23 || self.average_shift > 31 {
            return Err(Error::InvalidParameter(format!(
                "shifts {}/{} overflow 32-bit samples",
                self.promote_shift, self.average_shift
            )));
        }
        if let Corruption::Random { p, .. } = self.corruption {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("flip probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Blends two exposures with the default reconstruction.
pub fn process_image(
    img_a: &ImageBuffer,
    img_b: &ImageBuffer,
    partition: PartitionSpec,
    corrupt: bool,
) -> Result<ImageBuffer> {
    let recon = Reconstruction {
        corruption: if corrupt { Corruption::Always } else { Corruption::Never },
        ..Reconstruction::default()
    };
    process_image_with(img_a, img_b, partition, &recon)
}

pub fn process_image_with(
    img_a: &ImageBuffer,
    img_b: &ImageBuffer,
    partition: PartitionSpec,
    recon: &Reconstruction,
) -> Result<ImageBuffer> {
    same_dims(img_a, img_b)?;
    recon.validate()?;
    if partition.n != 32 {
        return Err(Error::InvalidParameter(format!(
            "reconstruction uses a 32-bit adder, got partition {partition}"
        )));
    }
    let mut rng = match recon.corruption {
        Corruption::Random { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let data = img_a
        .data
        .iter()
        .zip(&img_b.data)
        .map(|(&x, &y)| {
            let flip = match (recon.corruption, rng.as_mut()) {
                (Corruption::Always, _) => true,
                (Corruption::Random { p, .. }, Some(r)) => r.gen_bool(p),
                _ => false,
            };
            let s = approximate_add(
                (x as u64) << recon.promote_shift,
                (y as u64) << recon.promote_shift,
                partition,
                flip,
            ) as u32;
            (s >> recon.average_shift).min(255) as u8
        })
        .collect();
    ImageBuffer::new(img_a.width, img_a.height, data)
}

/// Peak signal-to-noise ratio in dB; infinite for identical images.
pub fn psnr(reference: &ImageBuffer, test: &ImageBuffer) -> Result<f64> {
    same_dims(reference, test)?;
    if reference.data.is_empty() {
        return Err(Error::InvalidInput("empty image".into()));
    }
    let sse: u64 = reference
        .data
        .iter()
        .zip(&test.data)
        .map(|(&a, &b)| {
            let d = a as i64 - b as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse as f64 / reference.data.len() as f64;
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

pub const SSIM_WINDOW: usize = 8;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Mean SSIM over every 8x8 window (stride 1, uniform weights, population
/// moments).
pub fn ssim(reference: &ImageBuffer, test: &ImageBuffer) -> Result<f64> {
    same_dims(reference, test)?;
    let (w, h) = (reference.width, reference.height);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidInput(format!(
            "{w}x{h} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    // summed-area tables of x, y, x^2, y^2, xy; exact in integers
    let stride = w + 1;
    let mut tables = vec![[0i64; 5]; stride * (h + 1)];
    for yy in 0..h {
        let mut row = [0i64; 5];
        for xx in 0..w {
            let a = reference.get(xx, yy) as i64;
            let b = test.get(xx, yy) as i64;
            for (acc, v) in row.iter_mut().zip([a, b, a * a, b * b, a * b]) {
                *acc += v;
            }
            let above = tables[yy * stride + xx + 1];
            let cell = &mut tables[(yy + 1) * stride + xx + 1];
            for k in 0..5 {
                cell[k] = above[k] + row[k];
            }
        }
    }
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let rows: Vec<f64> = (0..=h - SSIM_WINDOW)
        .into_par_iter()
        .map(|y0| {
            let mut acc = 0.0;
            for x0 in 0..=w - SSIM_WINDOW {
                let (y1, x1) = (y0 + SSIM_WINDOW, x0 + SSIM_WINDOW);
                let mut s = [0f64; 5];
                for (k, v) in s.iter_mut().enumerate() {
                    *v = (tables[y1 * stride + x1][k] - tables[y0 * stride + x1][k] - tables[y1 * stride + x0][k]
                        + tables[y0 * stride + x0][k]) as f64;
                }
                let (mx, my) = (s[0] / n, s[1] / n);
                let vx = s[2] / n - mx * mx;
                let vy = s[3] / n - my * my;
                let cxy = s[4] / n - mx * my;
                acc += ((2.0 * mx * my + C1) * (2.0 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2));
            }
            acc
        })
        .collect();
    let windows = ((w - SSIM_WINDOW + 1) * (h - SSIM_WINDOW + 1)) as f64;
    Ok(rows.iter().sum::<f64>() / windows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityBand {
    High,
    Acceptable,
    Low,
    Poor,
}

impl fmt::Display for QualityBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QualityBand::High => "high",
            QualityBand::Acceptable => "acceptable",
            QualityBand::Low => "low",
            QualityBand::Poor => "poor",
        })
    }
}

/// `> 0.85` high, `(0.70, 0.85]` acceptable, `(0.30, 0.70]` low, else poor.
pub fn classify_quality(ssim: f64) -> QualityBand {
    if ssim > 0.85 {
        QualityBand::High
    } else if ssim > 0.70 {
        QualityBand::Acceptable
    } else if ssim > 0.30 {
        QualityBand::Low
    } else {
        QualityBand::Poor
    }
}

fn psnr_json<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityReport {
    /// Infinite for identical images; serialized as `"inf"`.
    #[serde(serialize_with = "psnr_json")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub band: QualityBand,
}

impl QualityReport {
    pub fn compute(reference: &ImageBuffer, test: &ImageBuffer) -> Result<Self> {
        let s = ssim(reference, test)?;
        Ok(QualityReport {
            psnr_db: psnr(reference, test)?,
            ssim: s,
            band: classify_quality(s),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub gates: usize,
    pub transistors: u64,
    /// Mean time between output tokens.
    pub t_dd_units: f64,
    /// Net transitions per DATA/NULL cycle.
    pub transitions_per_op: f64,
}

/// Sizes and simulates each labelled design on the same operands.
pub fn compare_designs(
    designs: &[(String, Netlist)],
    operands: &[Operands],
    delay: &DelayModel,
    costs: &GateCostTable,
) -> Result<Vec<ComparisonRow>> {
    let Some((_, first)) = designs.first() else {
        return Ok(Vec::new());
    };
    if let Some((label, _)) = designs.iter().find(|(_, n)| n.width != first.width) {
        return Err(Error::InvalidInput(format!(
            "design {label} width differs from {}",
            first.width
        )));
    }
    if operands.len() < 2 {
        return Err(Error::InvalidInput("comparison needs at least two operands".into()));
    }
    designs
        .iter()
        .map(|(label, netlist)| {
            let transistors = estimate_transistors(netlist, costs)?;
            let compiled = CompiledNetlist::new(netlist.clone())?;
            let run = run_pipeline(&compiled, operands, delay, &RunOptions::default())?;
            if run.status != RunStatus::Completed {
                return Err(Error::InvalidInput(format!("design {label} did not complete: {:?}", run.status)));
            }
            if let Some((op, t)) = operands.iter().zip(&run.tokens).find(|(o, t)| t.value != Some(o.sum())) {
                return Err(Error::InvalidInput(format!(
                    "design {label} computed {:?} for {op:?}",
                    t.value
                )));
            }
            Ok(ComparisonRow {
                label: label.clone(),
                gates: netlist.gates.len(),
                transistors,
                t_dd_units: run.t_dd.unwrap_or(0.0),
                transitions_per_op: run.transitions as f64 / operands.len() as f64,
            })
        })
        .collect()
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: usize, l: usize) -> PartitionSpec {
        PartitionSpec::new(n, l).unwrap()
    }

    #[test]
    fn approximate_add_examples() {
        assert_eq!(approximate_add32(0, 0, p(32, 8), true).unwrap(), 256);
        for l in 1..32 {
            assert_eq!(approximate_add32(5, 10, p(32, l), false).unwrap(), 15);
        }
        assert_eq!(approximate_add32(u32::MAX, 1, p(32, 4), false).unwrap(), 0);
        assert!(approximate_add32(1, 1, p(16, 4), false).is_err());
    }

    #[test]
    fn corrupted_carry_moves_by_two_to_the_l() {
        // 7 + 1 carries out of 3 low bits; dropping that carry loses 8
        assert_eq!(approximate_add(7, 1, p(8, 3), true), 0);
        assert_eq!(approximate_add(7, 1, p(8, 3), false), 8);
        assert_eq!(approximate_add(255, 255, p(8, 3), false), 510);
    }

    #[test]
    fn psnr_examples() {
        let a = ImageBuffer::filled(2, 2, 0);
        assert!(psnr(&a, &a).unwrap().is_infinite());
        assert!(psnr(&a, &ImageBuffer::filled(2, 2, 255)).unwrap().abs() < 1e-12);
        let b = ImageBuffer::new(2, 2, vec![255, 0, 0, 0]).unwrap();
        // MSE = 255^2 / 4
        let expect = 10.0 * 4f64.log10();
        assert!((psnr(&a, &b).unwrap() - expect).abs() < 1e-9);
        assert!(psnr(&a, &ImageBuffer::filled(3, 2, 0)).is_err());
    }

    #[test]
    fn quality_json_uses_inf_sentinel() {
        let a = ImageBuffer::filled(8, 8, 9);
        let r = QualityReport::compute(&a, &a).unwrap();
        let v = serde_json::to_value(r).unwrap();
        assert_eq!(v["psnr_db"], "inf");
        assert_eq!(v["ssim"], 1.0);
        assert_eq!(v["band"], "high");
    }

    #[test]
    fn bands() {
        assert_eq!(classify_quality(0.9), QualityBand::High);
        assert_eq!(classify_quality(0.85), QualityBand::Acceptable);
        assert_eq!(classify_quality(0.75), QualityBand::Acceptable);
        assert_eq!(classify_quality(0.70), QualityBand::Low);
        assert_eq!(classify_quality(0.5), QualityBand::Low);
        assert_eq!(classify_quality(0.30), QualityBand::Poor);
        assert_eq!(classify_quality(0.2), QualityBand::Poor);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = ImageBuffer::filled(7, 8, 0);
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn pgm_round_trip_with_comment() {
        let img = ImageBuffer::new(3, 2, vec![0, 1, 2, 253, 254, 255]).unwrap();
        let bytes = img.to_pgm_bytes();
        assert_eq!(ImageBuffer::read_pgm(&bytes[..]).unwrap(), img);
        let mut commented = b"P5\n# test\n3 2\n255\n".to_vec();
        commented.extend_from_slice(img.data());
        assert_eq!(ImageBuffer::read_pgm(&commented[..]).unwrap(), img);
        assert!(ImageBuffer::read_pgm(&b"P2\n1 1\n255\n0"[..]).is_err());
        assert!(ImageBuffer::read_pgm(&b"P5\n4 4\n255\n\x00"[..]).is_err());
    }

    #[test]
    fn exact_reconstruction_is_the_average() {
        let a = ImageBuffer::new(2, 2, vec![0, 10, 255, 100]).unwrap();
        let b = ImageBuffer::new(2, 2, vec![0, 13, 255, 50]).unwrap();
        let r = process_image(&a, &b, p(32, 12), false).unwrap();
        assert_eq!(r.data(), &[0, 11, 255, 75]);
    }
}
