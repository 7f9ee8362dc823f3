//! Synthetic corpora of clean/degraded pairs.
//!
//! A corpus of `n` images holds `round(0.2 n)` single-, `round(0.3 n)`
//! double- and the remaining triple-degradation images. On disk:
//!
//! ```text
//! manifest.toml
//! clean/0000.png      16-bit grayscale
//! degraded/0000.png   16-bit grayscale
//! recipes/0000.toml
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::scenes::{generate, scene_kind_for, SceneKind};
use crate::degrade::{synthesize, DegradationKind, DegradationRecipe, DegradationStep};
use crate::error::{Error, Result};
use crate::image::{BitDepth, Image};
use crate::rng::{derive_seed, rng_from_seed};

const SCENE_TAG: u64 = 1;
const RECIPE_TAG: u64 = 2;
const CHOICE_TAG: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegradationClass {
    Single,
    Double,
    Triple,
}

impl DegradationClass {
    pub const ALL: [DegradationClass; 3] = [DegradationClass::Single, DegradationClass::Double, DegradationClass::Triple];

    pub fn kind_count(self) -> usize {
        match self {
            DegradationClass::Single => 1,
            DegradationClass::Double => 2,
            DegradationClass::Triple => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DegradationClass::Single => "single",
            DegradationClass::Double => "double",
            DegradationClass::Triple => "triple",
        }
    }
}

impl fmt::Display for DegradationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DegradationClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DegradationClass::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown degradation class {s:?}")))
    }
}

/// Images per class for a corpus of `n`: 20% single, 30% double, rest triple.
pub fn class_counts(n: usize) -> [usize; 3] {
    let single = (0.2 * n as f64).round() as usize;
    let double = ((0.3 * n as f64).round() as usize).min(n - single);
    [single, double, n - single - double]
}

/// One corpus image held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub index: usize,
    pub class: DegradationClass,
    pub scene: SceneKind,
    pub recipe: DegradationRecipe,
    pub clean: Image,
    pub degraded: Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub class: DegradationClass,
    pub scene: SceneKind,
    pub kinds: String,
    pub clean: String,
    pub degraded: String,
    pub recipe: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub image_size: usize,
    #[serde(rename = "entry")]
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest always serialises")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("manifest: {e}")))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join("manifest.toml");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_toml(&text)
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut out = [0; 3];
        for e in &self.entries {
            out[e.class.kind_count() - 1] += 1;
        }
        out
    }
}

fn draw_recipe(class: DegradationClass, seed: u64, cfg: &RunConfig) -> DegradationRecipe {
    let mut rng = rng_from_seed(derive_seed(seed, CHOICE_TAG));
    let mut kinds = DegradationKind::ALL.to_vec();
    kinds.shuffle(&mut rng);
    kinds.truncate(class.kind_count());
    let steps = kinds
        .into_iter()
        .map(|kind| DegradationStep {
            kind,
            severity: if cfg.severity_min < cfg.severity_max {
                rng.random_range(cfg.severity_min..=cfg.severity_max)
            } else {
                cfg.severity_max
            },
        })
        .collect();
    DegradationRecipe {
        seed: derive_seed(seed, RECIPE_TAG),
        order_randomized: false,
        steps,
    }
}

/// Classes of every corpus index: singles first, then doubles, then triples.
/// With a class filter every image gets that class.
fn class_plan(cfg: &RunConfig) -> Result<Vec<DegradationClass>> {
    if let Some(only) = cfg.class_filter()? {
        return Ok(vec![only; cfg.corpus_size]);
    }
    let counts = class_counts(cfg.corpus_size);
    Ok(DegradationClass::ALL
        .into_iter()
        .zip(counts)
        .flat_map(|(c, k)| std::iter::repeat_n(c, k))
        .collect())
}

/// Builds the corpus in memory. Images are quantised to 16 bits so the
/// on-disk copies load back bit-identically.
pub fn generate_corpus(cfg: &RunConfig) -> Result<Vec<CorpusItem>> {
    cfg.validate()?;
    let classes = class_plan(cfg)?;
    classes
        .into_iter()
        .enumerate()
        .map(|(index, class)| {
            let item_seed = derive_seed(cfg.seed, index as u64);
            let scene = scene_kind_for(index);
            let clean = generate(scene, cfg.image_size, derive_seed(item_seed, SCENE_TAG)).quantized(BitDepth::Sixteen);
            let recipe = draw_recipe(class, item_seed, cfg);
            let degraded = synthesize(&clean, &recipe)?.image.quantized(BitDepth::Sixteen);
            Ok(CorpusItem { index, class, scene, recipe, clean, degraded })
        })
        .collect()
}

fn file_names(index: usize) -> (String, String, String) {
    (
        format!("clean/{index:04}.png"),
        format!("degraded/{index:04}.png"),
        format!("recipes/{index:04}.toml"),
    )
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes the corpus under `dir` and returns its manifest.
pub fn make_corpus(cfg: &RunConfig, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    let items = generate_corpus(cfg)?;
    for sub in ["clean", "degraded", "recipes"] {
        create_dir(&dir.join(sub))?;
    }
    let mut entries = Vec::with_capacity(items.len());
    for item in &items {
        let (clean, degraded, recipe) = file_names(item.index);
        item.clean.save(dir.join(&clean), BitDepth::Sixteen)?;
        item.degraded.save(dir.join(&degraded), BitDepth::Sixteen)?;
        let recipe_path = dir.join(&recipe);
        std::fs::write(&recipe_path, item.recipe.to_toml()).map_err(|e| Error::io(&recipe_path, e))?;
        entries.push(ManifestEntry {
            index: item.index,
            class: item.class,
            scene: item.scene,
            kinds: item.recipe.steps.iter().map(|s| s.kind.letter()).collect(),
            clean,
            degraded,
            recipe,
        });
    }
    let manifest = Manifest {
        seed: cfg.seed,
        image_size: cfg.image_size,
        entries,
    };
    let path = dir.join("manifest.toml");
    std::fs::write(&path, manifest.to_toml()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Loads every manifest entry back into memory.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Vec<CorpusItem>> {
    let dir = dir.as_ref();
    let manifest = Manifest::load(dir)?;
    manifest
        .entries
        .iter()
        .map(|e| {
            let path = |rel: &str| -> PathBuf { dir.join(rel) };
            Ok(CorpusItem {
                index: e.index,
                class: e.class,
                scene: e.scene,
                recipe: DegradationRecipe::load(path(&e.recipe))?,
                clean: Image::load(path(&e.clean))?,
                degraded: Image::load(path(&e.degraded))?,
            })
        })
        .collect()
}

/// Re-synthesises the degraded image from the clean image and recipe.
pub fn replay(item: &CorpusItem) -> Result<Image> {
    Ok(synthesize(&item.clean, &item.recipe)?.image.quantized(BitDepth::Sixteen))
}
