//! Procedural "sprite face" dataset with exact landmark ground truth.
//!
//! Normalized coordinates map to pixel centers as
//! `px = (x + 1) / 2 * (size - 1)`, with y growing downwards. Eyes and nose
//! are filled discs, the mouth is a capsule (thick segment) whose axis ends
//! are the two mouth-corner landmarks.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const FORMAT_VERSION: u32 = 1;
pub const LANDMARKS: usize = 5;
pub const LANDMARK_NAMES: [&str; 2 * LANDMARKS] = [
    "left_eye_x",
    "left_eye_y",
    "right_eye_x",
    "right_eye_y",
    "nose_x",
    "nose_y",
    "mouth_left_x",
    "mouth_left_y",
    "mouth_right_x",
    "mouth_right_y",
];
const MAX_RETRIES: usize = 1000;
/// Minimum clear gap between distinct features, in pixels.
const FEATURE_GAP: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn to_pixel(self, size: usize) -> (f64, f64) {
        (to_pixel(self.x, size), to_pixel(self.y, size))
    }
}

pub fn to_pixel(v: f64, size: usize) -> f64 {
    (v + 1.0) / 2.0 * (size - 1) as f64
}

pub fn from_pixel(p: f64, size: usize) -> f64 {
    p / (size - 1) as f64 * 2.0 - 1.0
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Uniform sampling ranges; coordinates are normalized, radii in pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceRanges {
    /// One range per target coordinate, in `LANDMARK_NAMES` order.
    pub coords: [Range; 2 * LANDMARKS],
    pub eye_radius: Range,
    pub nose_radius: Range,
    pub mouth_thickness: Range,
    pub background: Range,
    pub foreground: Range,
    /// Per-face noise amplitude is drawn from `[0, noise]`.
    pub noise: f64,
}

impl Default for FaceRanges {
    fn default() -> Self {
        Self {
            coords: [
                Range::new(-0.6, -0.25),
                Range::new(-0.6, -0.3),
                Range::new(0.25, 0.6),
                Range::new(-0.6, -0.3),
                Range::new(-0.2, 0.2),
                Range::new(-0.05, 0.2),
                Range::new(-0.5, -0.15),
                Range::new(0.4, 0.7),
                Range::new(0.15, 0.5),
                Range::new(0.4, 0.7),
            ],
            eye_radius: Range::new(1.5, 3.0),
            nose_radius: Range::new(1.0, 2.0),
            mouth_thickness: Range::new(1.5, 3.0),
            background: Range::new(0.0, 0.3),
            foreground: Range::new(0.7, 1.0),
            noise: 0.05,
        }
    }
}

impl FaceRanges {
    pub fn noise_free() -> Self {
        Self {
            noise: 0.0,
            ..Self::default()
        }
    }

    fn named(&self) -> Vec<(String, Range)> {
        let mut out: Vec<(String, Range)> = LANDMARK_NAMES
            .iter()
            .zip(self.coords)
            .map(|(n, r)| (n.to_string(), r))
            .collect();
        out.push(("eye_radius".into(), self.eye_radius));
        out.push(("nose_radius".into(), self.nose_radius));
        out.push(("mouth_thickness".into(), self.mouth_thickness));
        out.push(("background".into(), self.background));
        out.push(("foreground".into(), self.foreground));
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaceParams {
    pub left_eye: Point,
    pub right_eye: Point,
    pub nose: Point,
    pub mouth_left: Point,
    pub mouth_right: Point,
    pub eye_radius: f64,
    pub nose_radius: f64,
    pub mouth_thickness: f64,
    pub foreground: f64,
    pub background: f64,
    pub noise: f64,
    pub noise_seed: u64,
}

impl FaceParams {
    pub fn landmarks(&self) -> [Point; LANDMARKS] {
        [self.left_eye, self.right_eye, self.nose, self.mouth_left, self.mouth_right]
    }

    /// Flat target vector in `LANDMARK_NAMES` order.
    pub fn target(&self) -> Vec<f64> {
        self.landmarks().iter().flat_map(|p| [p.x, p.y]).collect()
    }

    /// Checks every documented invariant for a canvas of `size` pixels.
    pub fn validate(&self, size: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("face params: {msg}")));
        if self.landmarks().iter().any(|p| !(p.x.abs() <= 1.0 && p.y.abs() <= 1.0)) {
            return bad("landmark outside [-1, 1]".into());
        }
        if self.left_eye.x >= self.right_eye.x {
            return bad("left eye is not left of right eye".into());
        }
        if self.mouth_left.x >= self.mouth_right.x {
            return bad("mouth corners out of order".into());
        }
        let eye_row = self.left_eye.y.max(self.right_eye.y);
        let mouth_row = self.mouth_left.y.min(self.mouth_right.y);
        if !(self.nose.y > eye_row && self.nose.y < mouth_row) {
            return bad("nose not between eye row and mouth row".into());
        }
        if self.eye_radius < 1.0 || self.nose_radius < 1.0 || self.mouth_thickness < 1.0 {
            return bad("feature smaller than one pixel".into());
        }
        let limit = (size - 1) as f64;
        let half_mouth = self.mouth_thickness / 2.0;
        let extents = [
            (self.left_eye, self.eye_radius),
            (self.right_eye, self.eye_radius),
            (self.nose, self.nose_radius),
            (self.mouth_left, half_mouth),
            (self.mouth_right, half_mouth),
        ];
        for (p, r) in extents {
            let (px, py) = p.to_pixel(size);
            if px - r < 0.0 || py - r < 0.0 || px + r > limit || py + r > limit {
                return bad(format!("feature at ({px:.2}, {py:.2}) radius {r} leaves the canvas"));
            }
        }
        let (le, re, no) = (
            self.left_eye.to_pixel(size),
            self.right_eye.to_pixel(size),
            self.nose.to_pixel(size),
        );
        let (ml, mr) = (self.mouth_left.to_pixel(size), self.mouth_right.to_pixel(size));
        let gaps = [
            dist(le, re) - 2.0 * self.eye_radius,
            dist(le, no) - self.eye_radius - self.nose_radius,
            dist(re, no) - self.eye_radius - self.nose_radius,
            segment_distance(no, ml, mr) - self.nose_radius - half_mouth,
            segment_distance(le, ml, mr) - self.eye_radius - half_mouth,
            segment_distance(re, ml, mr) - self.eye_radius - half_mouth,
        ];
        if gaps.iter().any(|&g| g < FEATURE_GAP) {
            return bad("features overlap".into());
        }
        if !(0.0..=1.0).contains(&self.background) || !(0.0..=1.0).contains(&self.foreground) {
            return bad("intensity outside [0, 1]".into());
        }
        if !(self.noise >= 0.0) {
            return bad("negative noise amplitude".into());
        }
        Ok(())
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    dist(p, (a.0 + t * dx, a.1 + t * dy))
}

/// Rounds to the 6 decimals stored in `targets.csv`.
fn quantize(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Draws parameters from `ranges`, rejecting draws that violate any invariant.
pub fn sample_face_params<R: Rng + ?Sized>(rng: &mut R, ranges: &FaceRanges, size: usize) -> Result<FaceParams> {
    for _ in 0..MAX_RETRIES {
        let c: Vec<f64> = ranges.coords.iter().map(|r| quantize(r.sample(rng))).collect();
        let params = FaceParams {
            left_eye: Point::new(c[0], c[1]),
            right_eye: Point::new(c[2], c[3]),
            nose: Point::new(c[4], c[5]),
            mouth_left: Point::new(c[6], c[7]),
            mouth_right: Point::new(c[8], c[9]),
            eye_radius: ranges.eye_radius.sample(rng),
            nose_radius: ranges.nose_radius.sample(rng),
            mouth_thickness: ranges.mouth_thickness.sample(rng),
            background: ranges.background.sample(rng),
            foreground: ranges.foreground.sample(rng),
            noise: if ranges.noise > 0.0 {
                rng.random_range(0.0..=ranges.noise)
            } else {
                0.0
            },
            noise_seed: rng.random(),
        };
        if params.validate(size).is_ok() {
            return Ok(params);
        }
    }
    Err(Error::InvalidConfig(format!(
        "no valid face after {MAX_RETRIES} draws; ranges do not fit a {size}px canvas"
    )))
}

/// Rasterizes `params` into a `size * size` row-major image in `[0, 1]`.
pub fn render_face(params: &FaceParams, size: usize) -> Vec<f64> {
    let (le, re, no) = (
        params.left_eye.to_pixel(size),
        params.right_eye.to_pixel(size),
        params.nose.to_pixel(size),
    );
    let (ml, mr) = (params.mouth_left.to_pixel(size), params.mouth_right.to_pixel(size));
    let half_mouth = params.mouth_thickness / 2.0;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(params.noise_seed);
    let mut img = Vec::with_capacity(size * size);
    for row in 0..size {
        for col in 0..size {
            let p = (col as f64, row as f64);
            let inside = dist(p, le) <= params.eye_radius
                || dist(p, re) <= params.eye_radius
                || dist(p, no) <= params.nose_radius
                || segment_distance(p, ml, mr) <= half_mouth;
            let base = if inside { params.foreground } else { params.background };
            // Always draw so the noise field does not depend on the shapes.
            let u: f64 = noise_rng.random_range(-1.0..=1.0);
            img.push((base + params.noise * u).clamp(0.0, 1.0));
        }
    }
    img
}

/// Renders a face with the given landmarks and freshly sampled radii,
/// intensities and noise; pixels are quantized as in the dataset.
pub fn render_with_landmarks<R: Rng + ?Sized>(
    target: &[f64],
    rng: &mut R,
    ranges: &FaceRanges,
    size: usize,
) -> Result<Vec<f64>> {
    if target.len() != 2 * LANDMARKS {
        return Err(Error::shape("landmark target", &[2 * LANDMARKS], &[target.len()]));
    }
    let pt = |i: usize| Point::new(target[2 * i], target[2 * i + 1]);
    for _ in 0..MAX_RETRIES {
        let params = FaceParams {
            left_eye: pt(0),
            right_eye: pt(1),
            nose: pt(2),
            mouth_left: pt(3),
            mouth_right: pt(4),
            eye_radius: ranges.eye_radius.sample(rng),
            nose_radius: ranges.nose_radius.sample(rng),
            mouth_thickness: ranges.mouth_thickness.sample(rng),
            background: ranges.background.sample(rng),
            foreground: ranges.foreground.sample(rng),
            noise: if ranges.noise > 0.0 {
                rng.random_range(0.0..=ranges.noise)
            } else {
                0.0
            },
            noise_seed: rng.random(),
        };
        if params.validate(size).is_ok() {
            return Ok(render_face(&params, size)
                .into_iter()
                .map(|v| to_u8(v) as f64 / 255.0)
                .collect());
        }
    }
    Err(Error::InvalidConfig("no valid face for the requested landmarks".into()))
}

pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Uniform draws in `[-1, 1]`, shape `[batch, latent_dim]`.
pub fn sample_latent<R: Rng + ?Sized>(rng: &mut R, latent_dim: usize, batch: usize) -> Result<Tensor> {
    let data = (0..latent_dim * batch).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Tensor::new(vec![batch, latent_dim], data)
}

/// Per-row concatenation `[z ; y]`.
pub fn make_condition_input(z: &Tensor, y: &Tensor) -> Result<Tensor> {
    if z.shape().len() != 2 || y.shape().len() != 2 || z.batch() != y.batch() {
        return Err(Error::shape("condition input", z.shape(), y.shape()));
    }
    let (zd, yd) = (z.shape()[1], y.shape()[1]);
    let mut out = Vec::with_capacity(z.batch() * (zd + yd));
    for b in 0..z.batch() {
        out.extend_from_slice(z.sample(b));
        out.extend_from_slice(y.sample(b));
    }
    Tensor::new(vec![z.batch(), zd + yd], out)
}

/// In-memory dataset mirroring the on-disk format.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub image_size: usize,
    pub landmarks: usize,
    pub seed: u64,
    pub ranges: FaceRanges,
    images: Vec<u8>,
    targets: Vec<f64>,
}

impl Dataset {
    /// Renders `n` faces; record `i` uses ChaCha stream `i` of `seed`.
    pub fn generate(n: usize, image_size: usize, landmarks: usize, seed: u64, ranges: &FaceRanges) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("dataset needs at least one record".into()));
        }
        if landmarks != LANDMARKS {
            return Err(Error::InvalidConfig(format!(
                "only {LANDMARKS} landmarks are supported, got {landmarks}"
            )));
        }
        let mut images = Vec::with_capacity(n * image_size * image_size);
        let mut targets = Vec::with_capacity(n * 2 * landmarks);
        for i in 0..n {
            let params = record_params(seed, i as u64, ranges, image_size)?;
            images.extend(render_face(&params, image_size).into_iter().map(to_u8));
            targets.extend(params.target());
        }
        Ok(Self {
            image_size,
            landmarks,
            seed,
            ranges: ranges.clone(),
            images,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len() / self.target_dim()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn target_dim(&self) -> usize {
        2 * self.landmarks
    }

    pub fn pixels(&self) -> usize {
        self.image_size * self.image_size
    }

    pub fn image_u8(&self, i: usize) -> &[u8] {
        &self.images[i * self.pixels()..(i + 1) * self.pixels()]
    }

    pub fn image(&self, i: usize) -> Vec<f64> {
        self.image_u8(i).iter().map(|&v| v as f64 / 255.0).collect()
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.target_dim()..(i + 1) * self.target_dim()]
    }

    /// Images `[b, 1, s, s]` and targets `[b, 2L]` for the given indices.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Tensor)> {
        let mut x = Vec::with_capacity(indices.len() * self.pixels());
        let mut y = Vec::with_capacity(indices.len() * self.target_dim());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Dataset {
                    path: Default::default(),
                    reason: format!("record {i} out of range (n = {})", self.len()),
                });
            }
            x.extend(self.image(i));
            y.extend_from_slice(self.target(i));
        }
        Ok((
            Tensor::new(vec![indices.len(), 1, self.image_size, self.image_size], x)?,
            Tensor::new(vec![indices.len(), self.target_dim()], y)?,
        ))
    }

    /// Records `[start, end)` as a new dataset.
    pub fn subset(&self, start: usize, end: usize) -> Self {
        Self {
            images: self.images[start * self.pixels()..end * self.pixels()].to_vec(),
            targets: self.targets[start * self.target_dim()..end * self.target_dim()].to_vec(),
            ..self.clone()
        }
    }

    /// Same images with targets rotated by `shift` records.
    pub fn with_rotated_targets(&self, shift: usize) -> Self {
        let mut targets = self.targets.clone();
        targets.rotate_left((shift % self.len()) * self.target_dim());
        Self { targets, ..self.clone() }
    }

    fn manifest(&self) -> String {
        let mut m = String::new();
        let _ = writeln!(m, "version={FORMAT_VERSION}");
        let _ = writeln!(m, "image_size={}", self.image_size);
        let _ = writeln!(m, "landmarks={}", self.landmarks);
        let _ = writeln!(m, "n={}", self.len());
        let _ = writeln!(m, "seed={}", self.seed);
        let _ = writeln!(m, "noise={:?}", self.ranges.noise);
        for (name, r) in self.ranges.named() {
            let _ = writeln!(m, "range.{name}={:?},{:?}", r.lo, r.hi);
        }
        m
    }

    fn targets_csv(&self) -> String {
        let mut s = LANDMARK_NAMES.join(",");
        s.push('\n');
        for i in 0..self.len() {
            let row: Vec<String> = self.target(i).iter().map(|v| format!("{v:.6}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    /// Hex SHA-256 over the three serialized parts.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for part in [self.manifest().as_bytes(), &self.images, self.targets_csv().as_bytes()] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
        hex::encode(h.finalize())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, bytes: &[u8]| {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(|e| Error::io(p, e))
        };
        put("manifest", self.manifest().as_bytes())?;
        put("images.bin", &self.images)?;
        put("targets.csv", self.targets_csv().as_bytes())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let fail = |reason: String| Error::Dataset {
            path: dir.to_path_buf(),
            reason,
        };
        let get = |name: &str| {
            let p = dir.join(name);
            fs::read(&p).map_err(|e| Error::io(p, e))
        };
        let manifest_bytes = get("manifest")?;
        let manifest = String::from_utf8(manifest_bytes).map_err(|_| fail("manifest is not UTF-8".into()))?;
        let kv = parse_key_values(&manifest).map_err(fail)?;
        let field = |k: &str| kv.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
        let num = |k: &str| -> Result<u64> {
            field(k)
                .ok_or_else(|| fail(format!("manifest lacks `{k}`")))?
                .parse()
                .map_err(|_| fail(format!("manifest `{k}` is not an integer")))
        };
        if num("version")? != FORMAT_VERSION as u64 {
            return Err(fail(format!("unsupported format version {}", num("version")?)));
        }
        let (image_size, landmarks, n, seed) = (
            num("image_size")? as usize,
            num("landmarks")? as usize,
            num("n")? as usize,
            num("seed")?,
        );
        if landmarks != LANDMARKS {
            return Err(fail(format!("unsupported landmark count {landmarks}")));
        }
        let mut ranges = FaceRanges {
            noise: field("noise")
                .ok_or_else(|| fail("manifest lacks `noise`".into()))?
                .parse()
                .map_err(|_| fail("bad noise".into()))?,
            ..FaceRanges::default()
        };
        let range = |name: &str| -> Result<Range> {
            let v = field(&format!("range.{name}")).ok_or_else(|| fail(format!("manifest lacks range `{name}`")))?;
            let (lo, hi) = v.split_once(',').ok_or_else(|| fail(format!("bad range `{v}`")))?;
            let p = |s: &str| s.trim().parse::<f64>().map_err(|_| fail(format!("bad range `{v}`")));
            Ok(Range::new(p(lo)?, p(hi)?))
        };
        for (i, name) in LANDMARK_NAMES.iter().enumerate() {
            ranges.coords[i] = range(name)?;
        }
        ranges.eye_radius = range("eye_radius")?;
        ranges.nose_radius = range("nose_radius")?;
        ranges.mouth_thickness = range("mouth_thickness")?;
        ranges.background = range("background")?;
        ranges.foreground = range("foreground")?;

        let images = get("images.bin")?;
        if images.len() != n * image_size * image_size {
            return Err(fail(format!(
                "images.bin holds {} bytes, expected {}",
                images.len(),
                n * image_size * image_size
            )));
        }
        let csv_bytes = get("targets.csv")?;
        let csv = String::from_utf8(csv_bytes).map_err(|_| fail("targets.csv is not UTF-8".into()))?;
        let mut lines = csv.lines();
        if lines.next() != Some(LANDMARK_NAMES.join(",").as_str()) {
            return Err(fail("targets.csv header does not match landmark names".into()));
        }
        let targets = parse_target_rows(lines, 2 * landmarks).map_err(fail)?;
        if targets.len() != n * 2 * landmarks {
            return Err(fail(format!("targets.csv has {} rows, expected {n}", targets.len() / (2 * landmarks))));
        }
        let ds = Self {
            image_size,
            landmarks,
            seed,
            ranges,
            images,
            targets,
        };
        if ds.manifest() != manifest || ds.targets_csv() != csv {
            return Err(fail("files are not in canonical form".into()));
        }
        Ok(ds)
    }
}

fn record_params(seed: u64, index: u64, ranges: &FaceRanges, size: usize) -> Result<FaceParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    sample_face_params(&mut rng, ranges, size)
}

/// Parameters behind record `index` of a dataset generated with `seed`.
pub fn regenerate_params(ds: &Dataset, index: usize) -> Result<FaceParams> {
    record_params(ds.seed, index as u64, &ds.ranges, ds.image_size)
}

/// Parses `key=value` lines, ignoring blanks and `#` comments.
pub fn parse_key_values(text: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_target_rows<'a>(
    lines: impl Iterator<Item = &'a str>,
    dim: usize,
) -> std::result::Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format!("row {}: not a number", i + 1))?;
        if row.len() != dim {
            return Err(format!("row {}: {} values, expected {dim}", i + 1, row.len()));
        }
        if row.iter().any(|v| !(v.abs() <= 1.0)) {
            return Err(format!("row {}: coordinate outside [-1, 1]", i + 1));
        }
        out.extend(row);
    }
    Ok(out)
}

/// Reads a targets file (same schema as `targets.csv`) into `[n, 2L]`.
pub fn read_targets_csv(path: &Path) -> Result<Tensor> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fail = |reason: String| Error::Dataset {
        path: path.to_path_buf(),
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some(LANDMARK_NAMES.join(",").as_str()) {
        return Err(fail("header does not match landmark names".into()));
    }
    let dim = 2 * LANDMARKS;
    let data = parse_target_rows(lines, dim).map_err(fail)?;
    if data.is_empty() {
        return Err(fail("no target rows".into()));
    }
    Tensor::new(vec![data.len() / dim, dim], data)
}

/// Binary PGM (P5) with maxval 255.
pub fn pgm_bytes(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn export_pgm(ds: &Dataset, index: usize, path: &Path) -> Result<()> {
    fs::write(path, pgm_bytes(ds.image_size, ds.image_size, ds.image_u8(index))).map_err(|e| Error::io(path, e))
}
