//! Procedural stand-in for bore-surface strips: three texture classes of
//! increasing corrosion severity, each overlaid with an illumination gradient
//! and a few blurred spots.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{gaussian_blur, slice_patches, GrayImage};

use super::config::PipelineConfig;
use super::manifest::{Label, Manifest, ManifestRecord};
use super::seed::{derived_rng, stream};

/// Texture parameters of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassTexture {
    /// Lattice spacing of the value-noise grain, in pixels.
    pub grain_scale: f64,
    pub grain_amplitude: f64,
    /// Expected pits per 1000 pixels.
    pub pit_density: f64,
    pub pit_radius: [f64; 2],
    pub pit_depth: f64,
    /// Inclusive range of blotches per image.
    pub blotch_count: [usize; 2],
    pub blotch_radius: [f64; 2],
    pub blotch_amplitude: f64,
}

impl Default for ClassTexture {
    fn default() -> Self {
        Self {
            grain_scale: 10.0,
            grain_amplitude: 0.05,
            pit_density: 0.0,
            pit_radius: [1.5, 3.0],
            pit_depth: 0.0,
            blotch_count: [0, 0],
            blotch_radius: [10.0, 24.0],
            blotch_amplitude: 0.0,
        }
    }
}

impl ClassTexture {
    /// Smooth, low-amplitude grain.
    pub fn non_defective() -> Self {
        Self::default()
    }

    /// Medium grain with sparse small pits.
    pub fn medium_corrosion() -> Self {
        Self {
            grain_scale: 5.0,
            grain_amplitude: 0.08,
            pit_density: 1.5,
            pit_radius: [1.5, 3.0],
            pit_depth: 0.3,
            ..Self::default()
        }
    }

    /// Dense pitting with large dark blotches.
    pub fn aggravated_corrosion() -> Self {
        Self {
            grain_scale: 4.0,
            grain_amplitude: 0.1,
            pit_density: 5.0,
            pit_radius: [2.0, 4.5],
            pit_depth: 0.35,
            blotch_count: [4, 7],
            blotch_radius: [10.0, 24.0],
            blotch_amplitude: 0.25,
        }
    }

    fn key(&self) -> [u64; 3] {
        [
            self.grain_scale.to_bits(),
            self.pit_density.to_bits(),
            self.blotch_amplitude.to_bits(),
        ]
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = self.grain_scale > 0.0
            && self.grain_amplitude >= 0.0
            && self.pit_density >= 0.0
            && self.pit_depth >= 0.0
            && self.blotch_amplitude >= 0.0
            && 0.0 < self.pit_radius[0]
            && self.pit_radius[0] <= self.pit_radius[1]
            && 0.0 < self.blotch_radius[0]
            && self.blotch_radius[0] <= self.blotch_radius[1]
            && self.blotch_count[0] <= self.blotch_count[1];
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid texture parameters for class {name}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub nd: ClassTexture,
    pub mc: ClassTexture,
    pub ac: ClassTexture,
    pub base_level: f64,
    /// Sensor noise standard deviation.
    pub noise: f64,
    /// Peak-to-peak amplitude of the linear illumination gradient.
    pub illumination_amplitude: f64,
    pub max_blur_spots: usize,
    pub blur_sigma: [f64; 2],
    pub blur_spot_radius: [f64; 2],
    pub images_per_class: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            nd: ClassTexture::non_defective(),
            mc: ClassTexture::medium_corrosion(),
            ac: ClassTexture::aggravated_corrosion(),
            base_level: 0.55,
            noise: 0.015,
            illumination_amplitude: 0.3,
            max_blur_spots: 3,
            blur_sigma: [1.5, 3.0],
            blur_spot_radius: [15.0, 40.0],
            images_per_class: 50,
            width: 768,
            height: 94,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn texture(&self, label: Label) -> &ClassTexture {
        match label {
            Label::ND => &self.nd,
            Label::MC => &self.mc,
            Label::AC => &self.ac,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for l in Label::ALL {
            self.texture(l).validate(l.as_str())?;
        }
        let keys = [self.nd.key(), self.mc.key(), self.ac.key()];
        if keys[0] == keys[1] || keys[0] == keys[2] || keys[1] == keys[2] {
            return Err(Error::Config(
                "class texture parameters (grain scale, pit density, blotch amplitude) must differ between classes"
                    .into(),
            ));
        }
        if self.images_per_class == 0 || self.width == 0 || self.height == 0 {
            return Err(Error::Config("synthetic corpus would be empty".into()));
        }
        if !(0.0 < self.blur_sigma[0] && self.blur_sigma[0] <= self.blur_sigma[1])
            || !(0.0 < self.blur_spot_radius[0] && self.blur_spot_radius[0] <= self.blur_spot_radius[1])
        {
            return Err(Error::Config("invalid blur-spot ranges".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

/// Value noise: random lattice values joined by smoothstep interpolation.
struct ValueNoise {
    scale: f64,
    cols: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, width: usize, height: usize, scale: f64) -> Self {
        let cols = (width as f64 / scale).ceil() as usize + 2;
        let rows = (height as f64 / scale).ceil() as usize + 2;
        let lattice = (0..cols * rows).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self { scale, cols, lattice }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = (x / self.scale, y / self.scale);
        let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (smooth(gx - ix as f64), smooth(gy - iy as f64));
        let v = |c: usize, r: usize| self.lattice[r * self.cols + c];
        let top = v(ix, iy) * (1.0 - tx) + v(ix + 1, iy) * tx;
        let bottom = v(ix, iy + 1) * (1.0 - tx) + v(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

/// Darkens a disc-shaped neighbourhood with a smooth radial profile.
fn stamp(field: &mut [f64], width: usize, height: usize, cx: f64, cy: f64, radius: f64, depth: f64, sharp: bool) {
    let x0 = (cx - radius).floor().max(0.0) as usize;
    let y0 = (cy - radius).floor().max(0.0) as usize;
    let x1 = ((cx + radius).ceil() as usize).min(width - 1);
    let y1 = ((cy + radius).ceil() as usize).min(height - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d2 = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)) / (radius * radius);
            if d2 < 1.0 {
                let w = if sharp { (1.0 - d2).sqrt() } else { (1.0 - d2).powi(2) };
                field[y * width + x] -= depth * w;
            }
        }
    }
}

/// One synthetic strip of the given class.
pub fn synth_image(cfg: &SynthConfig, label: Label, index: usize) -> GrayImage {
    let (w, h) = (cfg.width, cfg.height);
    let tex = cfg.texture(label);
    let mut rng = derived_rng(cfg.seed, &[stream::SYNTH, label.index() as u64, index as u64]);

    let coarse = ValueNoise::new(&mut rng, w, h, tex.grain_scale);
    let fine = ValueNoise::new(&mut rng, w, h, (tex.grain_scale / 2.0).max(1.0));
    let mut field: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            cfg.base_level
                + tex.grain_amplitude * (coarse.at(x, y) + 0.5 * fine.at(x, y))
                + cfg.noise * rng.random_range(-1.7320508..1.7320508)
        })
        .collect();

    let blotches = rng.random_range(tex.blotch_count[0]..=tex.blotch_count[1]);
    if blotches > 0 {
        let mottle = ValueNoise::new(&mut rng, w, h, 6.0);
        for _ in 0..blotches {
            let (cx, cy) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
            let r = uniform(&mut rng, tex.blotch_radius);
            let amp = tex.blotch_amplitude * rng.random_range(0.7..1.0);
            let mut mask = vec![0.0; w * h];
            stamp(&mut mask, w, h, cx, cy, r, -1.0, false);
            for (i, m) in mask.iter().enumerate() {
                if *m > 0.0 {
                    let (x, y) = ((i % w) as f64, (i / w) as f64);
                    field[i] -= amp * m * (0.75 + 0.25 * mottle.at(x, y));
                }
            }
        }
    }

    let expected_pits = tex.pit_density * (w * h) as f64 / 1000.0;
    let pits = (expected_pits * rng.random_range(0.8..1.2)).round() as usize;
    for _ in 0..pits {
        let (cx, cy) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
        let r = uniform(&mut rng, tex.pit_radius);
        let depth = tex.pit_depth * rng.random_range(0.6..1.0);
        stamp(&mut field, w, h, cx, cy, r, depth, true);
    }

    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let amp = cfg.illumination_amplitude * rng.random_range(0.5..1.0);
    let (c, s) = (phi.cos(), phi.sin());
    for (i, v) in field.iter_mut().enumerate() {
        let (u, t) = ((i % w) as f64 / w as f64 - 0.5, (i / w) as f64 / h as f64 - 0.5);
        *v += amp * (u * c + t * s);
    }

    let mut img = GrayImage::from_fn(w, h, |x, y| field[y * w + x].clamp(0.0, 1.0) as f32);
    let spots = rng.random_range(0..=cfg.max_blur_spots);
    for _ in 0..spots {
        let (cx, cy) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
        let r = uniform(&mut rng, cfg.blur_spot_radius);
        let blurred = gaussian_blur(&img, uniform(&mut rng, cfg.blur_sigma));
        let mut weight = vec![0.0; w * h];
        stamp(&mut weight, w, h, cx, cy, r, -1.0, false);
        for (i, wt) in weight.iter().enumerate() {
            if *wt > 0.0 {
                let v = &mut img.data_mut()[i];
                *v = (f64::from(*v) * (1.0 - wt) + f64::from(blurred.data()[i]) * wt) as f32;
            }
        }
    }
    img
}

pub fn source_id(label: Label, index: usize) -> String {
    format!("{}_{index:03}", label.as_str().to_ascii_lowercase())
}

pub fn patch_file_name(source_id: &str, patch_index: usize) -> String {
    format!("{source_id}_p{patch_index:02}.png")
}

/// Writes `images/<source-id>.png`, `patches/<source-id>_p<idx>.png` and
/// `manifest.jsonl` under `out_dir`, returning the manifest.
pub fn synth_dataset(cfg: &SynthConfig, pipeline: &PipelineConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let images_dir = out_dir.join("images");
    let patches_dir = out_dir.join("patches");
    for d in [&images_dir, &patches_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let jobs: Vec<(Label, usize)> = Label::ALL
        .iter()
        .flat_map(|&l| (0..cfg.images_per_class).map(move |i| (l, i)))
        .collect();
    let per_image: Vec<Vec<ManifestRecord>> = jobs
        .par_iter()
        .map(|&(label, i)| {
            let id = source_id(label, i);
            let img = synth_image(cfg, label, i);
            img.save(images_dir.join(format!("{id}.png")))?;
            let patches = slice_patches(&img, pipeline.window, pipeline.overlap)?;
            patches
                .patches
                .iter()
                .enumerate()
                .map(|(p, patch)| {
                    let name = patch_file_name(&id, p);
                    patch.save(patches_dir.join(&name))?;
                    Ok(ManifestRecord {
                        path: format!("patches/{name}"),
                        label,
                        source_id: id.clone(),
                        patch_index: p,
                        split: None,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let manifest = Manifest::new(out_dir, per_image.concat())?;
    manifest.save(out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}
