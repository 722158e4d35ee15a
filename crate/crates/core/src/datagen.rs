//! Synthetic labeled shapes inside the unit cube.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

// f64 math comes from libm when std is absent
#[allow(unused_imports)]
use num_traits::Float;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{arg_err, config_err, Result};
use crate::geometry::{Point, PointCloud};
use crate::real::math;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    /// Radius 0.5 around the cube center.
    Sphere,
    /// Surface of the cube `[0.1, 0.9]^3`.
    Cube,
    /// Ring radius 0.3, tube radius 0.1, lying in the plane `z = 0.5`.
    Torus,
    /// The square `[0.1, 0.9]^2` at `z = 0.5`.
    Plane,
    /// Flat disk of radius 0.4, randomly lifted and spun about the vertical axis.
    Disk,
    /// Disk bent along one axis.
    Sheet,
    /// Disk bent up along one axis and down along the other.
    Saddle,
    /// Disk bent up along both axes.
    Dome,
}

impl ShapeKind {
    pub const SHAPES: [ShapeKind; 4] = [ShapeKind::Sphere, ShapeKind::Cube, ShapeKind::Torus, ShapeKind::Plane];
    /// Classes that share position statistics and differ only in local surface orientation.
    pub const SURFACES: [ShapeKind; 4] = [ShapeKind::Disk, ShapeKind::Sheet, ShapeKind::Saddle, ShapeKind::Dome];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Cube => "cube",
            ShapeKind::Torus => "torus",
            ShapeKind::Plane => "plane",
            ShapeKind::Disk => "disk",
            ShapeKind::Sheet => "sheet",
            ShapeKind::Saddle => "saddle",
            ShapeKind::Dome => "dome",
        }
    }
}

/// One cloud to generate. `label` is attached to the result unchanged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub points: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub label: usize,
}

impl ShapeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points < 8 {
            return Err(config_err!("a shape needs at least 8 points, got {}", self.points));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(config_err!("noise sigma must be >= 0, got {}", self.noise_sigma));
        }
        Ok(())
    }
}

const CENTER: f64 = 0.5;
const DISK_RADIUS: f64 = 0.4;
const BEND: f64 = 0.8;
const LIFT: f64 = 0.1;

fn unit_normal<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn surface_point<R: Rng>(kind: ShapeKind, rng: &mut R, lift: f64, spin: f64) -> [f64; 3] {
    match kind {
        ShapeKind::Sphere => {
            let u = unit_normal(rng);
            [CENTER + 0.5 * u[0], CENTER + 0.5 * u[1], CENTER + 0.5 * u[2]]
        }
        ShapeKind::Cube => {
            let face = rng.random_range(0..6usize);
            let (a, b) = (rng.random_range(0.1..=0.9), rng.random_range(0.1..=0.9));
            let side = if face % 2 == 0 { 0.1 } else { 0.9 };
            match face / 2 {
                0 => [side, a, b],
                1 => [a, side, b],
                _ => [a, b, side],
            }
        }
        ShapeKind::Torus => {
            let (big, small) = (0.3, 0.1);
            loop {
                let u = rng.random_range(0.0..TAU);
                let v = rng.random_range(0.0..TAU);
                let w = big + small * math::cos(v);
                // accept with probability proportional to the local area element
                if rng.random_range(0.0..big + small) <= w {
                    return [CENTER + w * math::cos(u), CENTER + w * math::sin(u), CENTER + small * math::sin(v)];
                }
            }
        }
        ShapeKind::Plane => [rng.random_range(0.1..=0.9), rng.random_range(0.1..=0.9), CENTER],
        ShapeKind::Disk | ShapeKind::Sheet | ShapeKind::Saddle | ShapeKind::Dome => {
            let rho = DISK_RADIUS * rng.random_range(0.0f64..=1.0).sqrt();
            let phi = rng.random_range(0.0..TAU);
            let (u, v) = (rho * math::cos(phi), rho * math::sin(phi));
            // each profile has zero mean over the disk, so every class shares the same centroid
            let m = DISK_RADIUS * DISK_RADIUS / 4.0;
            let h = match kind {
                ShapeKind::Disk => 0.0,
                ShapeKind::Sheet => BEND * (u * u - m),
                ShapeKind::Saddle => BEND * (u * u - v * v),
                _ => BEND * (u * u + v * v - 2.0 * m),
            };
            let (s, c) = spin.sin_cos();
            [CENTER + c * u - s * v, CENTER + s * u + c * v, CENTER + lift + h]
        }
    }
}

/// Points drawn uniformly over the shape (over the disk footprint for the bent
/// surfaces), then jittered with Gaussian noise. Features are the coordinates.
pub fn generate<T: Real>(spec: &ShapeSpec) -> Result<PointCloud<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lift = rng.random_range(-LIFT..=LIFT);
    let spin = rng.random_range(0.0..PI);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| config_err!("{e}"))?;
    let positions: Vec<Point<T>> = (0..spec.points)
        .map(|_| {
            let p = surface_point(spec.kind, &mut rng, lift, spin);
            let mut q = [T::zero(); 3];
            for (o, v) in q.iter_mut().zip(p) {
                let jitter = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                *o = T::of(v + jitter);
            }
            q
        })
        .collect();
    PointCloud::from_positions(positions, Some(spec.label))
}

/// Which class list a dataset draws from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    /// Sphere, cube, torus, plane.
    Shapes,
    /// Flat, sheet, saddle and dome surfaces with a shared centroid.
    Anisotropic,
}

impl DatasetKind {
    pub fn classes(self) -> [ShapeKind; 4] {
        match self {
            DatasetKind::Shapes => ShapeKind::SHAPES,
            DatasetKind::Anisotropic => ShapeKind::SURFACES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub per_class: usize,
    /// Fraction of each class that goes to the training split.
    pub split: f64,
    pub points: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(kind: DatasetKind, per_class: usize, split: f64, seed: u64) -> Self {
        Self { kind, per_class, split, points: 512, noise_sigma: 0.005, seed }
    }
}

pub type Split<T> = (Vec<PointCloud<T>>, Vec<PointCloud<T>>);

/// Balanced `(train, test)` split. Labels are class indices into `kind.classes()`.
pub fn make_dataset<T: Real>(spec: &DatasetSpec) -> Result<Split<T>> {
    if !(spec.split > 0.0 && spec.split < 1.0) {
        return Err(config_err!("split must be in (0, 1), got {}", spec.split));
    }
    if spec.per_class == 0 {
        return Err(config_err!("per_class must be >= 1"));
    }
    let n_train = ((spec.per_class as f64 * spec.split).round() as usize).min(spec.per_class);
    let mut seeds = ChaCha8Rng::seed_from_u64(spec.seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for i in 0..spec.per_class {
        for (label, &kind) in spec.kind.classes().iter().enumerate() {
            let shape = ShapeSpec {
                kind,
                points: spec.points,
                noise_sigma: spec.noise_sigma,
                seed: seeds.next_u64(),
                label,
            };
            let cloud = generate(&shape)?;
            if i < n_train {
                train.push(cloud);
            } else {
                test.push(cloud);
            }
        }
    }
    Ok((train, test))
}

/// Nearest-centroid classifier on the mean coordinate of every cloud: fits
/// one mean per class on `train` and returns the accuracy on `test`.
pub fn nearest_centroid_accuracy<T: Real>(train: &[PointCloud<T>], test: &[PointCloud<T>]) -> Result<f64> {
    let centroid = |c: &PointCloud<T>| {
        let mut m = [0.0; 3];
        for p in c.positions() {
            for (a, v) in m.iter_mut().zip(p) {
                *a += v.as_f64();
            }
        }
        m.map(|v| v / c.len().max(1) as f64)
    };
    let label = |c: &PointCloud<T>| c.label.ok_or_else(|| arg_err!("unlabeled cloud"));
    let classes = train.iter().map(label).collect::<Result<Vec<_>>>()?.into_iter().max().map_or(0, |m| m + 1);
    let mut sums = alloc::vec![([0.0; 3], 0usize); classes];
    for c in train {
        let (s, n) = &mut sums[label(c)?];
        for (a, v) in s.iter_mut().zip(centroid(c)) {
            *a += v;
        }
        *n += 1;
    }
    let means: Vec<Option<[f64; 3]>> =
        sums.iter().map(|(s, n)| (*n > 0).then(|| s.map(|v| v / *n as f64))).collect();
    if test.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0;
    for c in test {
        let x = centroid(c);
        let mut best = (f64::INFINITY, usize::MAX);
        for (k, m) in means.iter().enumerate() {
            if let Some(m) = m {
                let d: f64 = (0..3).map(|a| (x[a] - m[a]) * (x[a] - m[a])).sum();
                if d < best.0 {
                    best = (d, k);
                }
            }
        }
        if best.1 == label(c)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / test.len() as f64)
}
