//! Fixed-order chains (semantic, then photometric, then geometric) and the
//! JSON form they are read from.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{Provenance, WatermarkBundle};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::read_image;
use crate::transforms::geometric::{apply_geometric, GeoOrder, GeoParams};
use crate::transforms::photometric::{apply_photometric, PhoOrder, PhoParams};
use crate::transforms::semantic::{apply_semantic, random_mask, shaped_mask, Fill, MaskShape, SemanticEdit};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhoBlock {
    pub order: PhoOrder,
    pub params: PhoParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoBlock {
    pub order: GeoOrder,
    pub params: GeoParams,
}

impl PhoBlock {
    pub fn apply(&self, img: &Image) -> Result<Image> {
        apply_photometric(img, &self.order, &self.params)
    }
}

impl GeoBlock {
    pub fn apply(&self, img: &Image) -> Result<Image> {
        apply_geometric(img, &self.order, &self.params)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainSpec {
    pub semantic: Option<SemanticEdit>,
    pub photometric: Option<PhoBlock>,
    pub geometric: Option<GeoBlock>,
}

impl ChainSpec {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn with_semantic(mut self, edit: SemanticEdit) -> Self {
        self.semantic = Some(edit);
        self
    }

    pub fn with_photometric(mut self, order: PhoOrder, params: PhoParams) -> Self {
        self.photometric = Some(PhoBlock { order, params });
        self
    }

    pub fn with_geometric(mut self, order: GeoOrder, params: GeoParams) -> Self {
        self.geometric = Some(GeoBlock { order, params });
        self
    }
}

pub fn apply_chain(img: &Image, chain: &ChainSpec) -> Result<Image> {
    let mut out = match &chain.semantic {
        Some(edit) => apply_semantic(img, edit)?,
        None => img.clone(),
    };
    if let Some(block) = &chain.photometric {
        out = block.apply(&out)?;
    }
    if let Some(block) = &chain.geometric {
        out = block.apply(&out)?;
    }
    Ok(out)
}

/// What the reference watermarks become under `chain`.
///
/// The blank semantic canvas composited with any fill under mask `m` is `m`
/// itself, so the semantic result is the geometrically warped mask.
pub fn ground_truth_watermarks(refs: &WatermarkBundle, chain: &ChainSpec) -> Result<WatermarkBundle> {
    let geo = |img: Image| match &chain.geometric {
        Some(block) => block.apply(&img),
        None => Ok(img),
    };
    let sem = match &chain.semantic {
        Some(edit) => {
            if !edit.mask().same_size(&refs.sem) {
                return Err(Error::Shape("mask and watermark sizes differ".into()));
            }
            edit.mask().clone()
        }
        None => refs.sem.clone(),
    };
    let pho = match &chain.photometric {
        Some(block) => block.apply(&refs.pho)?,
        None => refs.pho.clone(),
    };
    WatermarkBundle::new(geo(sem)?, geo(pho)?, geo(refs.geo.clone())?, Provenance::GroundTruth)
}

/// Where a mask comes from in a chain file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskSource {
    Path(String),
    Random {
        #[serde(default)]
        shape: Option<MaskShape>,
        seed: u64,
        #[serde(default)]
        frac: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticSection {
    pub mask: MaskSource,
    /// An image path, or `"surrogate"`.
    #[serde(default = "surrogate")]
    pub fill: String,
}

fn surrogate() -> String {
    "surrogate".into()
}

/// On-disk chain description. Angles are radians unless converted with
/// [`ChainFile::degrees_to_radians`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic: Option<SemanticSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photometric: Option<PhoBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometric: Option<GeoBlock>,
}

impl ChainFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn degrees_to_radians(&mut self) {
        if let Some(g) = &mut self.geometric {
            g.params.ro = g.params.ro.to_radians();
            g.params.sh_x = g.params.sh_x.to_radians();
            g.params.sh_y = g.params.sh_y.to_radians();
        }
    }

    /// Materialises masks and fills for a `height`×`width` carrier. Relative
    /// paths resolve against `base_dir`; `seed` drives surrogate fills.
    pub fn resolve(&self, height: usize, width: usize, base_dir: &Path, seed: u64) -> Result<ChainSpec> {
        let semantic = match &self.semantic {
            None => None,
            Some(sec) => {
                let mask = match &sec.mask {
                    MaskSource::Path(p) => {
                        let img = read_image(base_dir.join(p))?;
                        if img.channels() == 3 {
                            img.channel(0)
                        } else {
                            img
                        }
                    }
                    MaskSource::Random {
                        shape: None,
                        seed,
                        frac: None,
                    } => random_mask(height, width, *seed)?,
                    MaskSource::Random { shape, seed, frac } => shaped_mask(
                        height,
                        width,
                        shape.unwrap_or(MaskShape::Rect),
                        frac.unwrap_or(0.15),
                        *seed,
                    )?,
                };
                if mask.height() != height || mask.width() != width {
                    return Err(Error::Shape(format!(
                        "mask is {}x{}, carrier is {height}x{width}",
                        mask.height(),
                        mask.width()
                    )));
                }
                let fill = if sec.fill == "surrogate" {
                    Fill::Surrogate { seed }
                } else {
                    Fill::Image(read_image(base_dir.join(&sec.fill))?)
                };
                Some(SemanticEdit::new(mask, fill)?)
            }
        };
        if let Some(p) = &self.photometric {
            p.params.validate()?;
        }
        if let Some(g) = &self.geometric {
            g.params.validate()?;
        }
        Ok(ChainSpec {
            semantic,
            photometric: self.photometric,
            geometric: self.geometric,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::{make_references, PatternConfig};
    use crate::transforms::{GeoOp, PhoOp};

    fn refs() -> WatermarkBundle {
        make_references(&PatternConfig::with_size(33, 33)).unwrap()
    }

    fn mask() -> Image {
        Image::from_fn(33, 33, 1, |x, y, px| {
            px[0] = (x > 10 && x < 20 && y > 5 && y < 25) as u8 as f32
        })
        .unwrap()
    }

    #[test]
    fn empty_chain_is_identity() {
        let r = refs();
        assert_eq!(apply_chain(&r.pho, &ChainSpec::identity()).unwrap(), r.pho);
        let gt = ground_truth_watermarks(&r, &ChainSpec::identity()).unwrap();
        assert_eq!((gt.sem, gt.pho, gt.geo), (r.sem.clone(), r.pho.clone(), r.geo.clone()));
        assert_eq!(gt.provenance, Provenance::GroundTruth);
    }

    #[test]
    fn full_chain_equals_manual_composition() {
        let r = refs();
        let edit = SemanticEdit::new(mask(), Fill::Surrogate { seed: 3 }).unwrap();
        let pho = PhoBlock {
            order: PhoOrder::new([PhoOp::H, PhoOp::B, PhoOp::S, PhoOp::C]).unwrap(),
            params: PhoParams {
                b: 0.9,
                c: 1.1,
                h: 0.2,
                s: 0.8,
            },
        };
        let geo = GeoBlock {
            order: GeoOrder::new([GeoOp::Sh, GeoOp::Ro, GeoOp::Tr, GeoOp::Sc]).unwrap(),
            params: GeoParams {
                ro: 0.2,
                tr_x: 0.1,
                tr_y: -0.05,
                sc: 1.1,
                sh_x: 0.1,
                sh_y: 0.0,
            },
        };
        let chain = ChainSpec::identity()
            .with_semantic(edit.clone())
            .with_photometric(pho.order, pho.params)
            .with_geometric(geo.order, geo.params);
        let manual = geo
            .apply(&pho.apply(&apply_semantic(&r.pho, &edit).unwrap()).unwrap())
            .unwrap();
        assert_eq!(apply_chain(&r.pho, &chain).unwrap(), manual);

        let sem_only = ChainSpec::identity().with_semantic(edit.clone());
        assert_eq!(
            apply_chain(&r.pho, &sem_only).unwrap(),
            apply_semantic(&r.pho, &edit).unwrap()
        );
    }

    #[test]
    fn ground_truth_semantics() {
        let r = refs();
        let geo = GeoParams {
            ro: 0.3,
            ..GeoParams::identity()
        };
        let geo_only = ChainSpec::identity().with_geometric(GeoOrder::canonical(), geo);
        let gt = ground_truth_watermarks(&r, &geo_only).unwrap();
        assert!(gt.sem.data().iter().all(|&v| v == 0.0));
        assert_eq!(gt.geo, apply_geometric(&r.geo, &GeoOrder::canonical(), &geo).unwrap());
        assert_eq!(gt.pho, apply_geometric(&r.pho, &GeoOrder::canonical(), &geo).unwrap());

        let sem_pho = ChainSpec::identity()
            .with_semantic(SemanticEdit::new(mask(), Fill::Surrogate { seed: 1 }).unwrap())
            .with_photometric(
                PhoOrder::canonical(),
                PhoParams {
                    h: 0.2,
                    ..PhoParams::identity()
                },
            );
        let gt = ground_truth_watermarks(&r, &sem_pho).unwrap();
        assert_eq!(gt.sem, mask());
        assert_eq!(gt.geo, r.geo);
    }

    #[test]
    fn chain_file_parses_the_documented_schema() {
        let text = r#"{
            "semantic": {"mask": {"shape": "ellipse", "seed": 4, "frac": 0.2}, "fill": "surrogate"},
            "photometric": {"order": ["b","c","h","s"], "params": {"b":1.0,"c":1.0,"h":0.0,"s":1.0}},
            "geometric": {"order": ["ro","tr","sc","sh"], "params": {"ro":30.0,"tr_x":0.0,"tr_y":0.0,"sc":1.0,"sh_x":0.0,"sh_y":0.0}}
        }"#;
        let mut file: ChainFile = serde_json::from_str(text).unwrap();
        file.degrees_to_radians();
        assert!((file.geometric.unwrap().params.ro - std::f64::consts::PI / 6.0).abs() < 1e-15);
        let spec = file.resolve(40, 50, Path::new("."), 7).unwrap();
        let m = spec.semantic.unwrap();
        assert_eq!((m.mask().height(), m.mask().width()), (40, 50));
        assert_eq!(m.fill(), &Fill::Surrogate { seed: 7 });

        let bad = r#"{"geometric": {"order": ["ro","tr","sc","sc"], "params": {}}}"#;
        assert!(serde_json::from_str::<ChainFile>(bad).is_err());
        let bad = r#"{"geometric": {"order": ["ro","tr","sc","sh"], "params": {"sc": 0.0}}}"#;
        let file: ChainFile = serde_json::from_str(bad).unwrap();
        assert!(file.resolve(8, 8, Path::new("."), 0).is_err());
    }
}
