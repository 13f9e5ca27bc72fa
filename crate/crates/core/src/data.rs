//! Seeded synthetic video: shapes moving on an integer grid.

use std::fmt;
use std::str::FromStr;

use hpnet_tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HpnetError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Square,
    Cross,
    Disk,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Square, ShapeKind::Cross, ShapeKind::Disk];

    /// Whether pixel `(y, x)` of an `s`×`s` box belongs to the shape.
    fn covers(self, s: usize, y: usize, x: usize) -> bool {
        match self {
            ShapeKind::Square => true,
            ShapeKind::Cross => {
                let bar = (s / 3).max(1);
                let lo = (s - bar) / 2;
                (lo..lo + bar).contains(&y) || (lo..lo + bar).contains(&x)
            }
            ShapeKind::Disk => {
                let (dy, dx) = (2 * y as i64 + 1 - s as i64, 2 * x as i64 + 1 - s as i64);
                dy * dy + dx * dx <= (s * s) as i64
            }
        }
    }
}

/// Global motion pattern shared by every object of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MovementClass {
    HorizontalBounce,
    VerticalBounce,
    Diagonal,
    Circular,
    Expanding,
    StaticJitter,
}

impl MovementClass {
    pub const ALL: [MovementClass; 6] = [
        MovementClass::HorizontalBounce,
        MovementClass::VerticalBounce,
        MovementClass::Diagonal,
        MovementClass::Circular,
        MovementClass::Expanding,
        MovementClass::StaticJitter,
    ];

    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn from_label(label: u8) -> Option<Self> {
        Self::ALL.get(label as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MovementClass::HorizontalBounce => "horizontal-bounce",
            MovementClass::VerticalBounce => "vertical-bounce",
            MovementClass::Diagonal => "diagonal",
            MovementClass::Circular => "circular",
            MovementClass::Expanding => "expanding",
            MovementClass::StaticJitter => "static-jitter",
        }
    }
}

impl fmt::Display for MovementClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MovementClass {
    type Err = HpnetError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| HpnetError::config("motion", format!("unknown movement class `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub height: usize,
    pub width: usize,
    pub n_frames: usize,
    pub n_objects: usize,
    /// Inclusive range of object extents in pixels.
    pub size_range: (usize, usize),
    /// Largest velocity component magnitude, pixels per frame.
    pub max_speed: usize,
    pub motion: MovementClass,
    pub seed: u64,
}

impl Default for SequenceSpec {
    fn default() -> Self {
        SequenceSpec {
            height: 32,
            width: 32,
            n_frames: 40,
            n_objects: 2,
            size_range: (7, 11),
            max_speed: 1,
            motion: MovementClass::Diagonal,
            seed: 0,
        }
    }
}

/// A labelled clip of grayscale frames with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub label: MovementClass,
    pub height: usize,
    pub width: usize,
    pub frames: Vec<Vec<f64>>,
}

impl Sequence {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn blocks(&self, depth: usize, stride: usize) -> Result<Vec<Tensor>> {
        extract_blocks(&self.frames, self.height, self.width, depth, stride)
    }
}

/// Offsets of a radius-8 circle at 16 equally spaced angles, `(dy, dx)`.
const CIRCLE: [(i64, i64); 16] = [
    (0, 8),
    (3, 7),
    (6, 6),
    (7, 3),
    (8, 0),
    (7, -3),
    (6, -6),
    (3, -7),
    (0, -8),
    (-3, -7),
    (-6, -6),
    (-7, -3),
    (-8, 0),
    (-7, 3),
    (-6, 6),
    (-3, 7),
];

/// Position and velocity along one axis, reflecting off `[0, max]`.
#[derive(Debug, Clone, Copy)]
struct Axis {
    pos: i64,
    vel: i64,
    max: i64,
}

impl Axis {
    fn advance(&mut self) {
        if self.max == 0 {
            return;
        }
        self.pos += self.vel;
        // velocities never exceed the range, so one reflection suffices
        if self.pos < 0 {
            self.pos = -self.pos;
            self.vel = -self.vel;
        } else if self.pos > self.max {
            self.pos = 2 * self.max - self.pos;
            self.vel = -self.vel;
        }
    }
}

struct Object {
    kind: ShapeKind,
    size: usize,
    y: Axis,
    x: Axis,
    /// Circle phase, expansion phase or jitter anchor depending on the class.
    phase: usize,
}

fn velocity(rng: &mut ChaCha8Rng, max_speed: usize, range: i64) -> i64 {
    let speed = rng.random_range(1..=max_speed as i64).min(range.max(1));
    if rng.random_bool(0.5) {
        speed
    } else {
        -speed
    }
}

/// Renders `spec` deterministically from its seed.
pub fn generate_sequence(spec: &SequenceSpec) -> Result<Sequence> {
    let (lo, hi) = spec.size_range;
    if lo == 0 || lo > hi {
        return Err(HpnetError::contract(format!("invalid object size range {lo}..={hi}")));
    }
    if hi > spec.height || hi > spec.width {
        return Err(HpnetError::contract(format!(
            "objects up to {hi} px do not fit a {}x{} frame",
            spec.height, spec.width
        )));
    }
    if spec.max_speed == 0 {
        return Err(HpnetError::contract("max_speed must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (h, w) = (spec.height as i64, spec.width as i64);
    let mut objects = Vec::with_capacity(spec.n_objects);
    for _ in 0..spec.n_objects {
        let kind = ShapeKind::ALL[rng.random_range(0..3)];
        let size = rng.random_range(lo..=hi);
        let (ymax, xmax) = (h - size as i64, w - size as i64);
        let y = Axis {
            pos: rng.random_range(0..=ymax),
            vel: velocity(&mut rng, spec.max_speed, ymax),
            max: ymax,
        };
        let x = Axis {
            pos: rng.random_range(0..=xmax),
            vel: velocity(&mut rng, spec.max_speed, xmax),
            max: xmax,
        };
        let phase = rng.random_range(0..16);
        objects.push(Object {
            kind,
            size,
            y,
            x,
            phase,
        });
    }
    let mut frames = Vec::with_capacity(spec.n_frames);
    for t in 0..spec.n_frames {
        let mut frame = vec![0.0; spec.height * spec.width];
        for obj in &mut objects {
            let (top, left, size) = placement(spec, obj, t, &mut rng);
            draw(&mut frame, spec.width, obj.kind, size, top, left);
            match spec.motion {
                MovementClass::HorizontalBounce => obj.x.advance(),
                MovementClass::VerticalBounce => obj.y.advance(),
                MovementClass::Diagonal => {
                    obj.y.advance();
                    obj.x.advance();
                }
                _ => {}
            }
        }
        frames.push(frame);
    }
    Ok(Sequence {
        label: spec.motion,
        height: spec.height,
        width: spec.width,
        frames,
    })
}

/// Top-left corner and extent of `obj` in frame `t`.
fn placement(spec: &SequenceSpec, obj: &Object, t: usize, rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    let clamp = |v: i64, max: i64| v.clamp(0, max.max(0)) as usize;
    match spec.motion {
        MovementClass::HorizontalBounce | MovementClass::VerticalBounce | MovementClass::Diagonal => {
            (obj.y.pos as usize, obj.x.pos as usize, obj.size)
        }
        MovementClass::Circular => {
            // radius scaled to the room the object has around the frame centre
            let room = obj.y.max.min(obj.x.max) / 2;
            let (dy, dx) = CIRCLE[(obj.phase + t) % 16];
            let (cy, cx) = (obj.y.max / 2, obj.x.max / 2);
            (
                clamp(cy + dy * room / 8, obj.y.max),
                clamp(cx + dx * room / 8, obj.x.max),
                obj.size,
            )
        }
        MovementClass::Expanding => {
            // triangle wave between the smallest and the object's own extent
            let lo = spec.size_range.0.min(obj.size);
            let span = obj.size - lo;
            let size = if span == 0 {
                lo
            } else {
                let k = (obj.phase + t) % (2 * span);
                lo + if k <= span { k } else { 2 * span - k }
            };
            let centre_y = obj.y.pos + obj.size as i64 / 2;
            let centre_x = obj.x.pos + obj.size as i64 / 2;
            let h = spec.height as i64 - size as i64;
            let w = spec.width as i64 - size as i64;
            (
                clamp(centre_y - size as i64 / 2, h),
                clamp(centre_x - size as i64 / 2, w),
                size,
            )
        }
        MovementClass::StaticJitter => {
            let dy = rng.random_range(-1..=1);
            let dx = rng.random_range(-1..=1);
            (
                clamp(obj.y.pos + dy, obj.y.max),
                clamp(obj.x.pos + dx, obj.x.max),
                obj.size,
            )
        }
    }
}

fn draw(frame: &mut [f64], width: usize, kind: ShapeKind, size: usize, top: usize, left: usize) {
    for y in 0..size {
        for x in 0..size {
            if kind.covers(size, y, x) {
                let px = &mut frame[(top + y) * width + left + x];
                *px = (*px + 1.0).min(1.0);
            }
        }
    }
}

/// Seed of sequence `index` derived from a master seed.
pub fn sequence_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `n` sequences from `template`, each with its own derived seed. With
/// `mixed_classes` the movement class cycles through all six.
pub fn generate_dataset(
    template: &SequenceSpec,
    n: usize,
    master_seed: u64,
    mixed_classes: bool,
) -> Result<Vec<Sequence>> {
    (0..n)
        .map(|i| {
            let mut spec = template.clone();
            spec.seed = sequence_seed(master_seed, i as u64);
            if mixed_classes {
                spec.motion = MovementClass::ALL[i % MovementClass::ALL.len()];
            }
            generate_sequence(&spec)
        })
        .collect()
}

/// Cuts frames into `[1, depth, h, w]` blocks starting every `stride`
/// frames; trailing frames that cannot fill a block are dropped.
pub fn extract_blocks(
    frames: &[Vec<f64>],
    height: usize,
    width: usize,
    depth: usize,
    stride: usize,
) -> Result<Vec<Tensor>> {
    if depth == 0 || stride == 0 || stride > depth {
        return Err(HpnetError::contract(format!(
            "need 1 <= stride <= depth, got stride {stride} depth {depth}"
        )));
    }
    if depth > frames.len() {
        return Err(HpnetError::contract(format!(
            "block depth {depth} exceeds sequence length {}",
            frames.len()
        )));
    }
    let plane = height * width;
    if let Some(bad) = frames.iter().position(|f| f.len() != plane) {
        return Err(HpnetError::contract(format!("frame {bad} is not {height}x{width}")));
    }
    let count = (frames.len() - depth) / stride + 1;
    (0..count)
        .map(|i| {
            let data = frames[i * stride..i * stride + depth].concat();
            Ok(Tensor::new(&[1, depth, height, width], data)?)
        })
        .collect()
}
