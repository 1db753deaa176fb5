//! Explanatory reasoning: recover the intra-class order and parameters of the
//! geometric and photometric blocks from an extracted bundle.
//!
//! The inner optimizer is normalized gradient descent on the mean absolute
//! error between the re-rendered reference and the observed watermark:
//! central finite differences, a per-parameter step `η·g/(|g|+1e-8)` scaled
//! by the half-width of the parameter's box, cosine decay of `η`, projection
//! onto the boxes after every step, and best-so-far tracking.
//!
//! Descent runs coarse-to-fine. Early iterations work on 2× and 4×
//! downsampled, blurred copies of reference and target, where the loss
//! surface of the high-frequency gratings has one wide basin; the final
//! iterations run at full resolution without blur.
//!
//! Two search strategies sit on top:
//!
//! * [`Search::Exhaustive`] optimizes every parameter for each of the 24
//!   orders and keeps the lowest loss.
//! * [`Search::Sparse`] (default) grows the set of active operations one at a
//!   time, trying every insertion position, and stops when an extra operation
//!   no longer pays for itself. Orders that differ only in where identity
//!   operations sit render identically, so every one of the 24 orders is
//!   still covered. The sparse search settles ambiguities such as a rotation
//!   being reproducible by shear plus scale in favour of fewer operations.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::channel::WatermarkBundle;
use crate::error::{Error, Result};
use crate::filter::{downsample2, gaussian_blur};
use crate::image::Image;
use crate::transforms::{
    adjust, apply_geometric, apply_photometric, step_matrix, warp_bilinear, ClassMember, GeoBlock, GeoOp, GeoOrder,
    GeoParams, ParamRanges, Permutation, PhoOp, PhoOrder, PhoParams, Range,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Search {
    Sparse,
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReasonConfig {
    /// Iterations per descent.
    pub max_iter: usize,
    pub step: f64,
    pub fd_step: f64,
    /// Starts per order in exhaustive search. The first always begins at
    /// identity; later ones are drawn uniformly from the boxes.
    pub restarts: usize,
    pub ranges: ParamRanges,
    pub search: Search,
    /// Resolution levels, full resolution included. Levels stop halving once
    /// the shorter side would drop below 16 pixels.
    pub levels: usize,
    /// Gaussian sigma, in pixels of the level, applied on coarse levels.
    pub coarse_blur: f64,
    /// An extra operation must lower the loss by more than
    /// `max(min_gain, rel_gain·loss)` to be kept.
    pub min_gain: f64,
    pub rel_gain: f64,
    pub seed: u64,
}

impl Default for ReasonConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            step: 0.1,
            fd_step: 1e-3,
            restarts: 1,
            ranges: ParamRanges::default(),
            search: Search::Sparse,
            levels: 3,
            coarse_blur: 1.0,
            min_gain: 1e-3,
            rel_gain: 0.05,
            seed: 0x7E11_7A1E,
        }
    }
}

impl ReasonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Param("max_iter must be at least 1".into()));
        }
        for (name, v) in [("step", self.step), ("fd_step", self.fd_step)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Param(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.restarts == 0 || self.levels == 0 {
            return Err(Error::Param("restarts and levels must be at least 1".into()));
        }
        for (name, v) in [
            ("coarse_blur", self.coarse_blur),
            ("min_gain", self.min_gain),
            ("rel_gain", self.rel_gain),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Param(format!("{name} must be >= 0, got {v}")));
            }
        }
        self.ranges.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassResult<O: ClassMember, P> {
    pub order: Permutation<O>,
    pub params: P,
    /// Full-resolution mean absolute error of the re-rendered watermark.
    pub loss: f64,
    /// Best full-resolution loss so far: the start, then each full-resolution
    /// iteration of the winning descent.
    pub trace: Vec<f64>,
}

pub type GeoResult = ClassResult<GeoOp, GeoParams>;
pub type PhoResult = ClassResult<PhoOp, PhoParams>;

impl GeoResult {
    pub fn block(&self) -> GeoBlock {
        GeoBlock {
            order: self.order,
            params: self.params,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainHypothesis {
    pub geometric: GeoResult,
    pub photometric: PhoResult,
    pub semantic_mask: Image,
    pub binarized_mask: Image,
}

/// Something to minimise, with an optional fast path for one-coordinate moves
/// away from the point last passed to [`Objective::eval`].
pub trait Objective {
    fn eval(&mut self, x: &[f64]) -> f64;

    fn eval_moved(&mut self, x: &[f64], i: usize, value: f64) -> f64 {
        let mut y = x.to_vec();
        y[i] = value;
        self.eval(&y)
    }
}

/// Adapts a plain function.
pub struct FnObjective<F>(pub F);

impl<F: FnMut(&[f64]) -> f64> Objective for FnObjective<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

/// Central differences, one step per coordinate; `2·len` evaluations.
pub fn fd_gradient(obj: &mut impl Objective, x: &[f64], steps: &[f64]) -> Vec<f64> {
    let all: Vec<usize> = (0..x.len()).collect();
    fd_partial(obj, x, &all, steps)
}

fn fd_partial(obj: &mut impl Objective, x: &[f64], coords: &[usize], steps: &[f64]) -> Vec<f64> {
    coords
        .iter()
        .zip(steps)
        .map(|(&i, &h)| {
            let up = obj.eval_moved(x, i, x[i] + h);
            let down = obj.eval_moved(x, i, x[i] - h);
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn mean_abs_diff(a: &[f32], b: &[f32]) -> f64 {
    let s: f64 = a
        .chunks(4096)
        .zip(b.chunks(4096))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f32>() as f64)
        .sum();
    s / a.len() as f64
}

/// One transformation class as seen by the search: its operations, parameter
/// layout and forward renderer.
pub(crate) trait ClassKind: Sync {
    type Op: ClassMember;
    type Params: Copy;

    fn identity(&self) -> Vec<f64>;
    fn boxes(&self, ranges: &ParamRanges) -> Vec<Range>;
    fn indices(&self, op: Self::Op) -> &'static [usize];
    fn is_identity(&self, op: Self::Op, x: &[f64]) -> bool;
    fn step(&self, img: &Image, op: Self::Op, x: &[f64]) -> Result<Image>;
    /// Applied after the class's own operations.
    fn finish(&self, img: Image) -> Result<Image>;
    fn params(&self, x: &[f64]) -> Self::Params;
    fn to_vec(&self, p: &Self::Params) -> Vec<f64>;

    fn op_of(&self, i: usize) -> Self::Op {
        Self::Op::ALL
            .into_iter()
            .find(|&op| self.indices(op).contains(&i))
            .expect("parameter index in range")
    }
}

pub(crate) struct GeoKind;

impl ClassKind for GeoKind {
    type Op = GeoOp;
    type Params = GeoParams;

    fn identity(&self) -> Vec<f64> {
        GeoParams::identity().to_array().to_vec()
    }

    fn boxes(&self, ranges: &ParamRanges) -> Vec<Range> {
        ranges.geo_boxes().to_vec()
    }

    fn indices(&self, op: GeoOp) -> &'static [usize] {
        GeoParams::indices(op)
    }

    fn is_identity(&self, op: GeoOp, x: &[f64]) -> bool {
        GeoParams::from_slice(x).is_identity_for(op)
    }

    fn step(&self, img: &Image, op: GeoOp, x: &[f64]) -> Result<Image> {
        let m = step_matrix(op, &GeoParams::from_slice(x), img.width(), img.height())?;
        Ok(warp_bilinear(img, &m))
    }

    fn finish(&self, img: Image) -> Result<Image> {
        Ok(img)
    }

    fn params(&self, x: &[f64]) -> GeoParams {
        GeoParams::from_slice(x)
    }

    fn to_vec(&self, p: &GeoParams) -> Vec<f64> {
        p.to_array().to_vec()
    }
}

pub(crate) struct PhoKind {
    geo: GeoBlock,
}

impl ClassKind for PhoKind {
    type Op = PhoOp;
    type Params = PhoParams;

    fn identity(&self) -> Vec<f64> {
        PhoParams::identity().to_array().to_vec()
    }

    fn boxes(&self, ranges: &ParamRanges) -> Vec<Range> {
        ranges.pho_boxes().to_vec()
    }

    fn indices(&self, op: PhoOp) -> &'static [usize] {
        const IDX: [[usize; 1]; 4] = [[0], [1], [2], [3]];
        &IDX[PhoParams::index(op)]
    }

    fn is_identity(&self, op: PhoOp, x: &[f64]) -> bool {
        x[PhoParams::index(op)] == PhoParams::identity().value(op)
    }

    fn step(&self, img: &Image, op: PhoOp, x: &[f64]) -> Result<Image> {
        adjust(img, op, x[PhoParams::index(op)])
    }

    fn finish(&self, img: Image) -> Result<Image> {
        self.geo.apply(&img)
    }

    fn params(&self, x: &[f64]) -> PhoParams {
        PhoParams::from_slice(x)
    }

    fn to_vec(&self, p: &PhoParams) -> Vec<f64> {
        p.to_array().to_vec()
    }
}

/// Reference and target at one resolution.
pub(crate) struct Level {
    reference: Image,
    target: Image,
    blur: f64,
}

fn blur_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil() as usize
}

/// Coarsest first, full resolution last.
pub(crate) fn build_levels(reference: &Image, target: &Image, cfg: &ReasonConfig) -> Result<Vec<Level>> {
    reference.ensure_same_shape(target, "observed watermark")?;
    let mut levels = vec![Level {
        reference: reference.clone(),
        target: target.clone(),
        blur: 0.0,
    }];
    while levels.len() < cfg.levels {
        let last = levels.last().expect("non-empty");
        if last.reference.height().min(last.reference.width()) / 2 < 16 {
            break;
        }
        let (r, t) = (downsample2(&last.reference), downsample2(&last.target));
        levels.push(Level {
            target: gaussian_blur(&t, cfg.coarse_blur, blur_radius(cfg.coarse_blur)),
            reference: r,
            blur: cfg.coarse_blur,
        });
    }
    levels.reverse();
    Ok(levels)
}

/// Loss of one order at one level, caching the input of every step of the
/// last full evaluation so single-coordinate moves only redo the tail.
struct LevelObjective<'a, K: ClassKind> {
    kind: &'a K,
    level: &'a Level,
    order: Permutation<K::Op>,
    stages: Vec<Image>,
    base: Vec<f64>,
    loss: f64,
}

impl<'a, K: ClassKind> LevelObjective<'a, K> {
    fn new(kind: &'a K, level: &'a Level, order: Permutation<K::Op>) -> Self {
        Self {
            kind,
            level,
            order,
            stages: Vec::new(),
            base: Vec::new(),
            loss: f64::NAN,
        }
    }

    fn run(&self, start: usize, input: &Image, x: &[f64], keep: Option<&mut Vec<Image>>) -> Result<Image> {
        let mut keep = keep;
        let mut img = input.clone();
        for &op in &self.order.order()[start..] {
            if let Some(k) = keep.as_deref_mut() {
                k.push(img.clone());
            }
            if !self.kind.is_identity(op, x) {
                img = self.kind.step(&img, op, x)?;
            }
        }
        Ok(img)
    }

    fn score(&self, img: Image) -> f64 {
        let out = match self.kind.finish(img) {
            Ok(out) => out,
            Err(_) => return f64::INFINITY,
        };
        let out = if self.level.blur > 0.0 {
            gaussian_blur(&out, self.level.blur, blur_radius(self.level.blur))
        } else {
            out
        };
        mean_abs_diff(out.data(), self.level.target.data())
    }
}

impl<K: ClassKind> Objective for LevelObjective<'_, K> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        if !self.stages.is_empty() && self.base == x {
            return self.loss;
        }
        let mut stages = Vec::with_capacity(4);
        self.loss = match self.run(0, &self.level.reference, x, Some(&mut stages)) {
            Ok(img) => self.score(img),
            Err(_) => f64::INFINITY,
        };
        self.stages = stages;
        self.base = x.to_vec();
        self.loss
    }

    fn eval_moved(&mut self, x: &[f64], i: usize, value: f64) -> f64 {
        self.eval(x);
        let mut y = x.to_vec();
        y[i] = value;
        let start = self.order.position(self.kind.op_of(i));
        match self.run(start, &self.stages[start], &y, None) {
            Ok(img) => self.score(img),
            Err(_) => f64::INFINITY,
        }
    }
}

struct Descent {
    x: Vec<f64>,
    loss: f64,
    trace: Vec<f64>,
}

/// Which level each iteration runs on: the coarse levels share the first 80%
/// of the budget equally, full resolution gets the rest.
fn level_at(t: usize, iters: usize, levels: usize) -> usize {
    if levels == 1 {
        return 0;
    }
    let coarse = (iters * 4) / 5;
    if t >= coarse {
        levels - 1
    } else {
        t * (levels - 1) / coarse.max(1)
    }
}

fn descend<K: ClassKind>(
    kind: &K,
    levels: &[Level],
    order: Permutation<K::Op>,
    free: &[usize],
    x0: &[f64],
    cfg: &ReasonConfig,
) -> Descent {
    let boxes = kind.boxes(&cfg.ranges);
    let project = |x: &mut [f64]| {
        for (v, r) in x.iter_mut().zip(&boxes) {
            *v = r.clamp(*v);
        }
    };
    let scales: Vec<f64> = free.iter().map(|&i| boxes[i].width() / 2.0).collect();
    let steps = vec![cfg.fd_step; free.len()];
    let mut objs: Vec<LevelObjective<K>> = levels.iter().map(|l| LevelObjective::new(kind, l, order)).collect();
    let fine = levels.len() - 1;

    let mut x = x0.to_vec();
    project(&mut x);
    let start_loss = objs[fine].eval(&x);
    let mut best = Descent {
        x: x.clone(),
        loss: start_loss,
        trace: vec![start_loss],
    };
    let abort = |mut d: Descent| {
        d.loss = f64::INFINITY;
        d.trace.push(f64::INFINITY);
        d
    };
    if !start_loss.is_finite() {
        return abort(best);
    }
    if start_loss == 0.0 || free.is_empty() {
        return best;
    }

    // best-so-far on the current level, used to hand over between levels
    let mut level = level_at(0, cfg.max_iter, levels.len());
    let mut level_best = (x.clone(), objs[level].eval(&x));
    let n = cfg.max_iter as f64;
    for t in 0..cfg.max_iter {
        let next = level_at(t, cfg.max_iter, levels.len());
        if next != level {
            level = next;
            x = level_best.0.clone();
            level_best.1 = objs[level].eval(&x);
            if level == fine && level_best.1 < best.loss {
                best.loss = level_best.1;
                best.x.clone_from(&x);
                *best.trace.last_mut().expect("non-empty") = best.loss;
            }
        }
        if best.loss == 0.0 {
            break;
        }
        let loss = objs[level].eval(&x);
        if !loss.is_finite() {
            return abort(best);
        }
        let g = fd_partial(&mut objs[level], &x, free, &steps);
        if g.iter().any(|v| !v.is_finite()) {
            return abort(best);
        }
        let eta = cfg.step * 0.5 * (1.0 + (std::f64::consts::PI * t as f64 / n).cos());
        for ((&i, gi), s) in free.iter().zip(&g).zip(&scales) {
            x[i] -= eta * s * gi / (gi.abs() + 1e-8);
        }
        project(&mut x);
        let loss = objs[level].eval(&x);
        if !loss.is_finite() {
            return abort(best);
        }
        if loss < level_best.1 {
            level_best = (x.clone(), loss);
        }
        if level == fine {
            if loss < best.loss {
                best.loss = loss;
                best.x.clone_from(&x);
            }
            best.trace.push(best.loss);
        }
    }
    best
}

fn result<K: ClassKind>(kind: &K, order: Permutation<K::Op>, d: Descent) -> ClassResult<K::Op, K::Params> {
    ClassResult {
        order,
        params: kind.params(&d.x),
        loss: d.loss,
        trace: d.trace,
    }
}

/// The lexicographically smallest full order that runs `active` in the given
/// relative order.
fn embed_order<O: ClassMember>(active: &[O]) -> Permutation<O> {
    Permutation::<O>::all()
        .into_iter()
        .find(|p| p.iter().filter(|op| active.contains(op)).eq(active.iter().copied()))
        .expect("some order contains any sequence of distinct members")
}

fn free_indices<K: ClassKind>(kind: &K, active: &[K::Op]) -> Vec<usize> {
    let mut v: Vec<usize> = active.iter().flat_map(|&op| kind.indices(op).iter().copied()).collect();
    v.sort_unstable();
    v
}

/// Lowest loss wins; equal losses keep the earlier entry.
fn argmin_by_loss<T>(items: impl IntoIterator<Item = (f64, T)>) -> Option<(f64, T)> {
    items.into_iter().reduce(|a, b| if b.0 < a.0 { b } else { a })
}

fn exhaustive<K: ClassKind>(kind: &K, levels: &[Level], cfg: &ReasonConfig) -> ClassResult<K::Op, K::Params> {
    use rand::SeedableRng;
    let boxes = kind.boxes(&cfg.ranges);
    let all: Vec<usize> = (0..boxes.len()).collect();
    let fits = Permutation::<K::Op>::all().into_iter().enumerate().map(|(k, order)| {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64);
        let best = (0..cfg.restarts)
            .map(|r| {
                let x0 = if r == 0 {
                    kind.identity()
                } else {
                    boxes.iter().map(|b| b.sample(&mut rng)).collect()
                };
                let d = descend(kind, levels, order, &all, &x0, cfg);
                (d.loss, d)
            })
            .reduce(|a, b| if b.0 < a.0 { b } else { a })
            .expect("restarts >= 1");
        (best.0, result(kind, order, best.1))
    });
    argmin_by_loss(fits).expect("24 orders").1
}

fn sparse<K: ClassKind>(kind: &K, levels: &[Level], cfg: &ReasonConfig) -> ClassResult<K::Op, K::Params> {
    let identity = kind.identity();
    let canonical = Permutation::<K::Op>::canonical();
    let null = descend(kind, levels, canonical, &[], &identity, cfg);
    let mut best = (Vec::<K::Op>::new(), result(kind, canonical, null));
    let pays = |old: f64, new: f64| old - new > cfg.min_gain.max(cfg.rel_gain * old);

    // no extra operation can gain more than the loss that is left
    while best.0.len() < 4 && best.1.loss > cfg.min_gain {
        let x0 = kind.to_vec(&best.1.params);
        let active = &best.0;
        let candidates: Vec<Vec<K::Op>> = K::Op::ALL
            .into_iter()
            .filter(|op| !active.contains(op))
            .flat_map(|op| (0..=active.len()).map(move |pos| op_inserted(active, op, pos)))
            .collect();
        let fits = candidates.into_iter().map(|active| {
            let order = embed_order(&active);
            let d = descend(kind, levels, order, &free_indices(kind, &active), &x0, cfg);
            (d.loss, (active, result(kind, order, d)))
        });
        let Some((loss, cand)) = argmin_by_loss(fits) else {
            break;
        };
        if !pays(best.1.loss, loss) {
            break;
        }
        best = cand;
    }

    // every relative order of three or more active operations, warm-started
    if best.0.len() >= 3 && best.1.loss > 0.0 {
        let x0 = kind.to_vec(&best.1.params);
        let free = free_indices(kind, &best.0);
        let fits = best
            .0
            .iter()
            .copied()
            .permutations(best.0.len())
            .filter(|p| *p != best.0)
            .map(|active| {
                let order = embed_order(&active);
                let d = descend(kind, levels, order, &free, &x0, cfg);
                (d.loss, (active, result(kind, order, d)))
            });
        if let Some((loss, cand)) = argmin_by_loss(fits) {
            if loss < best.1.loss {
                best = cand;
            }
        }
    }
    best.1
}

fn op_inserted<O: Copy>(active: &[O], op: O, pos: usize) -> Vec<O> {
    let mut v = active.to_vec();
    v.insert(pos, op);
    v
}

fn search<K: ClassKind>(
    kind: &K,
    reference: &Image,
    target: &Image,
    cfg: &ReasonConfig,
) -> Result<ClassResult<K::Op, K::Params>> {
    cfg.validate()?;
    let levels = build_levels(reference, target, cfg)?;
    Ok(match cfg.search {
        Search::Sparse => sparse(kind, &levels, cfg),
        Search::Exhaustive => exhaustive(kind, &levels, cfg),
    })
}

/// Geometric descent over every parameter for one fixed order, from identity.
pub fn optimize_geo(reference: &Image, target: &Image, order: GeoOrder, cfg: &ReasonConfig) -> Result<GeoResult> {
    cfg.validate()?;
    let levels = build_levels(reference, target, cfg)?;
    let all: Vec<usize> = (0..GeoParams::LEN).collect();
    let d = descend(&GeoKind, &levels, order, &all, &GeoKind.identity(), cfg);
    Ok(result(&GeoKind, order, d))
}

/// Photometric descent over every parameter for one fixed order, rendered
/// through `geo`.
pub fn optimize_pho(
    reference: &Image,
    target: &Image,
    order: PhoOrder,
    geo: &GeoBlock,
    cfg: &ReasonConfig,
) -> Result<PhoResult> {
    cfg.validate()?;
    let kind = PhoKind { geo: *geo };
    let levels = build_levels(reference, target, cfg)?;
    let all: Vec<usize> = (0..PhoParams::LEN).collect();
    let d = descend(&kind, &levels, order, &all, &kind.identity(), cfg);
    Ok(result(&kind, order, d))
}

pub fn render_geo(reference: &Image, order: &GeoOrder, params: &GeoParams) -> Result<Image> {
    apply_geometric(reference, order, params)
}

pub fn render_pho(reference: &Image, order: &PhoOrder, params: &PhoParams, geo: &GeoResult) -> Result<Image> {
    geo.block().apply(&apply_photometric(reference, order, params)?)
}

pub fn reason_geometric(bundle: &WatermarkBundle, refs: &WatermarkBundle, cfg: &ReasonConfig) -> Result<GeoResult> {
    search(&GeoKind, &refs.geo, &bundle.geo, cfg)
}

pub fn reason_photometric(
    bundle: &WatermarkBundle,
    refs: &WatermarkBundle,
    geo: &GeoResult,
    cfg: &ReasonConfig,
) -> Result<PhoResult> {
    search(&PhoKind { geo: geo.block() }, &refs.pho, &bundle.pho, cfg)
}

/// The extracted semantic watermark is the mask estimate.
pub fn reason_semantic(bundle: &WatermarkBundle, threshold: f32) -> (Image, Image) {
    (bundle.sem.clone(), bundle.sem.binarized(threshold))
}

pub fn reason_chain(bundle: &WatermarkBundle, refs: &WatermarkBundle, cfg: &ReasonConfig) -> Result<ChainHypothesis> {
    if !bundle.sem.same_size(&refs.sem) {
        return Err(Error::Shape(format!(
            "bundle is {}x{}, references are {}x{}",
            bundle.height(),
            bundle.width(),
            refs.height(),
            refs.width()
        )));
    }
    let geometric = reason_geometric(bundle, refs, cfg)?;
    let photometric = reason_photometric(bundle, refs, &geometric, cfg)?;
    let (semantic_mask, binarized_mask) = reason_semantic(bundle, 0.5);
    Ok(ChainHypothesis {
        geometric,
        photometric,
        semantic_mask,
        binarized_mask,
    })
}
