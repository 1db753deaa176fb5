//! Parameter boxes used for sampling chains and for projecting estimates.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::geometric::GeoParams;
use crate::transforms::photometric::PhoParams;

/// Closed interval, serialised as `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Range {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Range { lo, hi }
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.lo, r.hi]
    }
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }
}

/// Per-parameter boxes. Translation and shear boxes apply to both axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamRanges {
    pub ro: Range,
    pub tr: Range,
    pub sc: Range,
    pub sh: Range,
    pub b: Range,
    pub c: Range,
    pub h: Range,
    pub s: Range,
}

impl Default for ParamRanges {
    /// ±30° rotation, ±0.2 translation, 0.8–1.2 scale, ±15° shear;
    /// 0.75–1.25 brightness, contrast and saturation, ±0.35 hue.
    fn default() -> Self {
        Self {
            ro: Range::new(-PI / 6.0, PI / 6.0),
            tr: Range::new(-0.2, 0.2),
            sc: Range::new(0.8, 1.2),
            sh: Range::new(-PI / 12.0, PI / 12.0),
            b: Range::new(0.75, 1.25),
            c: Range::new(0.75, 1.25),
            h: Range::new(-0.35, 0.35),
            s: Range::new(0.75, 1.25),
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("ro", self.ro),
            ("tr", self.tr),
            ("sc", self.sc),
            ("sh", self.sh),
            ("b", self.b),
            ("c", self.c),
            ("h", self.h),
            ("s", self.s),
        ];
        for (name, r) in all {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi) {
                return Err(Error::Param(format!("range {name} = {r:?} is empty or not finite")));
            }
        }
        if self.sc.lo <= 1e-3 {
            return Err(Error::Param("scale range must stay above 1e-3".into()));
        }
        if self.sh.lo <= -FRAC_PI_2 || self.sh.hi >= FRAC_PI_2 {
            return Err(Error::Param("shear range must stay inside (-π/2, π/2)".into()));
        }
        if self.b.lo < 0.0 || self.c.lo < 0.0 || self.s.lo < 0.0 {
            return Err(Error::Param("photometric factor ranges must be non-negative".into()));
        }
        Ok(())
    }

    pub fn geo_boxes(&self) -> [Range; 6] {
        [self.ro, self.tr, self.tr, self.sc, self.sh, self.sh]
    }

    pub fn pho_boxes(&self) -> [Range; 4] {
        [self.b, self.c, self.h, self.s]
    }

    pub fn project_geo(&self, p: &GeoParams) -> GeoParams {
        let mut v = p.to_array();
        for (x, r) in v.iter_mut().zip(self.geo_boxes()) {
            *x = r.clamp(*x);
        }
        GeoParams::from_slice(&v)
    }

    pub fn project_pho(&self, p: &PhoParams) -> PhoParams {
        let mut v = p.to_array();
        for (x, r) in v.iter_mut().zip(self.pho_boxes()) {
            *x = r.clamp(*x);
        }
        PhoParams::from_slice(&v)
    }

    pub fn sample_geo<R: Rng>(&self, rng: &mut R) -> GeoParams {
        let v: Vec<f64> = self.geo_boxes().iter().map(|r| r.sample(rng)).collect();
        GeoParams::from_slice(&v)
    }

    pub fn sample_pho<R: Rng>(&self, rng: &mut R) -> PhoParams {
        let v: Vec<f64> = self.pho_boxes().iter().map(|r| r.sample(rng)).collect();
        PhoParams::from_slice(&v)
    }
}
