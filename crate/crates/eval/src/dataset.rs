//! Synthetic two-domain image generator.
//!
//! Domain 0 renders filled circles, domain 1 filled squares. Content factors
//! (position, size) are shared across domains; style factors (hue, texture
//! phase) are sampled independently of content. A flat background keeps the
//! autoencoding task about the shape, not the canvas.

use std::fmt::Write as _;
use std::path::Path;

use autodiff::{NArray, SeedStream};
use serde::{Deserialize, Serialize};
use train::trainer::TrainSet;

use crate::imageio;
use crate::{EvalError, Result};

pub const BACKGROUND: f32 = 0.15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub image_size: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            image_size: 64,
            train_count: 512,
            test_count: 64,
            seed: 7,
        }
    }
}

/// Generation parameters of one sample; enough to verify the image
/// analytically and to regenerate it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleParams {
    pub domain: usize,
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub hue: f64,
    pub texture_phase: f64,
}

pub struct LabeledSet {
    pub images: Vec<NArray<f32>>,
    pub labels: Vec<usize>,
    pub params: Vec<SampleParams>,
    pub image_size: usize,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn to_train_set(&self) -> TrainSet {
        TrainSet {
            images: self.images.clone(),
            labels: self.labels.clone(),
        }
    }
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = (h.rem_euclid(2.0 * std::f64::consts::PI)) / (std::f64::consts::PI / 3.0);
    let i = h.floor() as i32 % 6;
    let f = h - h.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Distance field of the sample's shape: Euclidean for circles,
/// Chebyshev for squares, so both share the same fill machinery.
fn shape_distance(p: &SampleParams, x: f64, y: f64) -> f64 {
    let (dx, dy) = (x - p.center_x, y - p.center_y);
    match p.domain {
        0 => (dx * dx + dy * dy).sqrt(),
        _ => dx.abs().max(dy.abs()),
    }
}

pub fn render(p: &SampleParams, size: usize) -> NArray<f32> {
    let fill = hsv_to_rgb(p.hue, 0.75, 0.85);
    let mut img = NArray::zeros(&[3, size, size]);
    let freq = 3.0;
    for y in 0..size {
        for x in 0..size {
            let dist = shape_distance(p, x as f64 + 0.5, y as f64 + 0.5);
            // 1.5 px soft edge keeps gradients finite and bits cheap.
            let mask = ((p.radius - dist) / 1.5 + 0.5).clamp(0.0, 1.0);
            let u = (x + y) as f64 / size as f64;
            let stripes =
                1.0 - 0.25 * (0.5 + 0.5 * (2.0 * std::f64::consts::PI * freq * u + p.texture_phase).sin());
            for c in 0..3 {
                let fg = fill[c] * stripes;
                let v = BACKGROUND as f64 * (1.0 - mask) + fg * mask;
                img.data_mut()[c * size * size + y * size + x] = v as f32;
            }
        }
    }
    img
}

fn sample_params(rng: &mut SeedStream, size: usize) -> SampleParams {
    let s = size as f64;
    SampleParams {
        domain: rng.uniform_usize(2),
        center_x: rng.uniform_f64(0.3 * s, 0.7 * s),
        center_y: rng.uniform_f64(0.3 * s, 0.7 * s),
        radius: rng.uniform_f64(0.12 * s, 0.25 * s),
        hue: rng.uniform_f64(0.0, 2.0 * std::f64::consts::PI),
        texture_phase: rng.uniform_f64(0.0, 2.0 * std::f64::consts::PI),
    }
}

fn generate_split(rng: &mut SeedStream, size: usize, count: usize) -> LabeledSet {
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let p = sample_params(rng, size);
        images.push(render(&p, size));
        labels.push(p.domain);
        params.push(p);
    }
    LabeledSet {
        images,
        labels,
        params,
        image_size: size,
    }
}

/// Deterministic dataset generation: identical spec and seed give
/// bit-identical train and test splits, which are disjoint draws from one
/// stream.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<(LabeledSet, LabeledSet)> {
    if spec.train_count == 0 || spec.test_count == 0 {
        return Err(EvalError::Config("dataset splits must be non-empty".into()));
    }
    let mut rng = SeedStream::new(spec.seed);
    let train = generate_split(&mut rng, spec.image_size, spec.train_count);
    let test = generate_split(&mut rng, spec.image_size, spec.test_count);
    Ok((train, test))
}

/// Persist a split as lossless PNGs plus a manifest with labels and
/// generation parameters.
pub fn save_to_dir(set: &LabeledSet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::from("index,file,domain,center_x,center_y,radius,hue,texture_phase\n");
    for (i, (img, p)) in set.images.iter().zip(set.params.iter()).enumerate() {
        let name = format!("{i:05}.png");
        imageio::save_png(&dir.join(&name), img)?;
        writeln!(
            manifest,
            "{i},{name},{},{},{},{},{},{}",
            p.domain, p.center_x, p.center_y, p.radius, p.hue, p.texture_phase
        )
        .expect("write to string");
    }
    std::fs::write(dir.join("manifest.csv"), manifest)?;
    Ok(())
}

/// Load a split saved by [`save_to_dir`].
pub fn load_from_dir(dir: &Path) -> Result<LabeledSet> {
    let text = std::fs::read_to_string(dir.join("manifest.csv"))?;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut params = Vec::new();
    let mut size = 0;
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(EvalError::Config(format!("manifest line {ln} malformed")));
        }
        let img = imageio::load_png(&dir.join(f[1]))?;
        size = img.shape()[1];
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| EvalError::Config(format!("manifest number '{s}': {e}")))
        };
        params.push(SampleParams {
            domain: f[2]
                .parse()
                .map_err(|e| EvalError::Config(format!("manifest domain: {e}")))?,
            center_x: parse(f[3])?,
            center_y: parse(f[4])?,
            radius: parse(f[5])?,
            hue: parse(f[6])?,
            texture_phase: parse(f[7])?,
        });
        labels.push(params.last().unwrap().domain);
        images.push(img);
    }
    Ok(LabeledSet {
        images,
        labels,
        params,
        image_size: size,
    })
}

/// Loader stub for external image folders laid out as `<root>/<domain>/*.png`.
/// Works for any folder of same-sized PNGs; not validated against any
/// specific public dataset.
pub fn load_labeled_dirs(root: &Path) -> Result<(Vec<NArray<f32>>, Vec<usize>)> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut domains: Vec<_> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.path())
        .collect();
    domains.sort();
    for (label, dir) in domains.iter().enumerate() {
        let mut files: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().map(|e| e == "png").unwrap_or(false))
            .collect();
        files.sort();
        for f in files {
            images.push(imageio::load_png(&f)?);
            labels.push(label);
        }
    }
    if images.is_empty() {
        return Err(EvalError::Config(format!(
            "no domain subdirectories with PNGs under {}",
            root.display()
        )));
    }
    Ok((images, labels))
}
