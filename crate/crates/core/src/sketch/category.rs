//! The 22-category stroke taxonomy and its derivation from the 19-label
//! face-parsing scheme.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::SketchError;

pub const NUM_CATEGORIES: usize = 22;
pub const NUM_SOURCE_LABELS: usize = 19;

/// Stroke category id in `0..22`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryId(u8);

impl CategoryId {
    pub const SKIN: CategoryId = CategoryId(0);
    pub const NOSE: CategoryId = CategoryId(1);
    pub const EYE_G: CategoryId = CategoryId(2);
    pub const L_EYE: CategoryId = CategoryId(3);
    pub const R_EYE: CategoryId = CategoryId(4);
    pub const L_BROW: CategoryId = CategoryId(5);
    pub const R_BROW: CategoryId = CategoryId(6);
    pub const L_EAR: CategoryId = CategoryId(7);
    pub const R_EAR: CategoryId = CategoryId(8);
    pub const MOUTH: CategoryId = CategoryId(9);
    pub const HAIR: CategoryId = CategoryId(10);
    pub const HAT: CategoryId = CategoryId(11);
    pub const EAR_R: CategoryId = CategoryId(12);
    pub const NECK_L: CategoryId = CategoryId(13);
    pub const NECK: CategoryId = CategoryId(14);
    pub const CLOTH: CategoryId = CategoryId(15);
    pub const SKIN_HAIR: CategoryId = CategoryId(16);
    pub const SKIN_NECK: CategoryId = CategoryId(17);
    pub const SKIN_CLOTHES: CategoryId = CategoryId(18);
    pub const SKIN_HAT: CategoryId = CategoryId(19);
    pub const SKIN_EARRING: CategoryId = CategoryId(20);
    pub const HAT_HAIR: CategoryId = CategoryId(21);

    pub fn new(id: u8) -> Result<Self, SketchError> {
        if (id as usize) < NUM_CATEGORIES {
            Ok(Self(id))
        } else {
            Err(SketchError::UnknownCategory(id as i64))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn raw(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = CategoryId> {
        (0..NUM_CATEGORIES as u8).map(CategoryId)
    }

    pub fn name(self) -> &'static str {
        CATEGORY_TABLE[self.index()].0
    }

    pub fn color(self) -> &'static str {
        CATEGORY_TABLE[self.index()].1
    }

    pub fn is_pair(self) -> bool {
        self.0 >= Self::SKIN_HAIR.0
    }
}

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const CATEGORY_TABLE: [(&str, &str); NUM_CATEGORIES] = [
    ("skin", "#e0ac69"),
    ("nose", "#ff7f0e"),
    ("eye_g", "#7f7f7f"),
    ("l_eye", "#1f77b4"),
    ("r_eye", "#17becf"),
    ("l_brow", "#8c564b"),
    ("r_brow", "#bc8a5f"),
    ("l_ear", "#2ca02c"),
    ("r_ear", "#98df8a"),
    ("mouth", "#d62728"),
    ("hair", "#3b2314"),
    ("hat", "#9467bd"),
    ("ear_r", "#ffd700"),
    ("neck_l", "#e377c2"),
    ("neck", "#c49c94"),
    ("cloth", "#393b79"),
    ("skin-hair", "#ff9896"),
    ("skin-neck", "#f7b6d2"),
    ("skin-clothes", "#6b6ecf"),
    ("skin-hat", "#c5b0d5"),
    ("skin-earring", "#dbdb8d"),
    ("hat-hair", "#637939"),
];

/// The 19 source labels of the face-parsing segmentation maps, in the
/// CelebAMask-HQ id order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum SourceLabel {
    Background = 0,
    Skin,
    Nose,
    EyeG,
    LEye,
    REye,
    LBrow,
    RBrow,
    LEar,
    REar,
    Mouth,
    ULip,
    LLip,
    Hair,
    Hat,
    EarR,
    NeckL,
    Neck,
    Cloth,
}

impl SourceLabel {
    pub const ALL: [SourceLabel; NUM_SOURCE_LABELS] = [
        SourceLabel::Background,
        SourceLabel::Skin,
        SourceLabel::Nose,
        SourceLabel::EyeG,
        SourceLabel::LEye,
        SourceLabel::REye,
        SourceLabel::LBrow,
        SourceLabel::RBrow,
        SourceLabel::LEar,
        SourceLabel::REar,
        SourceLabel::Mouth,
        SourceLabel::ULip,
        SourceLabel::LLip,
        SourceLabel::Hair,
        SourceLabel::Hat,
        SourceLabel::EarR,
        SourceLabel::NeckL,
        SourceLabel::Neck,
        SourceLabel::Cloth,
    ];

    pub fn from_id(id: u8) -> Result<Self, SketchError> {
        Self::ALL
            .get(id as usize)
            .copied()
            .ok_or(SketchError::UnknownSourceLabel(id))
    }

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        [
            "background", "skin", "nose", "eye_g", "l_eye", "r_eye", "l_brow", "r_brow", "l_ear", "r_ear", "mouth",
            "u_lip", "l_lip", "hair", "hat", "ear_r", "neck_l", "neck", "cloth",
        ][self as usize]
    }

    /// Stroke category of a region, or `None` for the dropped background.
    /// Both lips merge into mouth.
    pub fn remap(self) -> Option<CategoryId> {
        use SourceLabel::*;
        Some(match self {
            Background => return None,
            Skin => CategoryId::SKIN,
            Nose => CategoryId::NOSE,
            EyeG => CategoryId::EYE_G,
            LEye => CategoryId::L_EYE,
            REye => CategoryId::R_EYE,
            LBrow => CategoryId::L_BROW,
            RBrow => CategoryId::R_BROW,
            LEar => CategoryId::L_EAR,
            REar => CategoryId::R_EAR,
            Mouth | ULip | LLip => CategoryId::MOUTH,
            Hair => CategoryId::HAIR,
            Hat => CategoryId::HAT,
            EarR => CategoryId::EAR_R,
            NeckL => CategoryId::NECK_L,
            Neck => CategoryId::NECK,
            Cloth => CategoryId::CLOTH,
        })
    }
}

/// Result of mapping a source label onto the stroke taxonomy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Remapped {
    Category(CategoryId),
    Drop,
}

/// Maps a raw source label id onto the 22-category scheme.
pub fn remap_label(source_id: u8) -> Result<Remapped, SketchError> {
    let label = SourceLabel::from_id(source_id)?;
    Ok(label.remap().map_or(Remapped::Drop, Remapped::Category))
}

/// Boundary category for two adjacent regions, if they form one of the six
/// pair-categories.
pub fn pair_category(a: CategoryId, b: CategoryId) -> Option<CategoryId> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    match (lo, hi) {
        (CategoryId::SKIN, CategoryId::HAIR) => Some(CategoryId::SKIN_HAIR),
        (CategoryId::SKIN, CategoryId::NECK) => Some(CategoryId::SKIN_NECK),
        (CategoryId::SKIN, CategoryId::CLOTH) => Some(CategoryId::SKIN_CLOTHES),
        (CategoryId::SKIN, CategoryId::HAT) => Some(CategoryId::SKIN_HAT),
        (CategoryId::SKIN, CategoryId::EAR_R) => Some(CategoryId::SKIN_EARRING),
        (CategoryId::HAIR, CategoryId::HAT) => Some(CategoryId::HAT_HAIR),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub id: u8,
    pub name: String,
    pub color: String,
}

/// Ordered category table with its provenance from the source labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CategoryScheme {
    pub categories: Vec<CategoryRow>,
    /// `(source label, category)` for every kept source label.
    pub provenance: Vec<(SourceLabel, CategoryId)>,
}

impl CategoryScheme {
    pub fn standard() -> Self {
        let categories = CategoryId::all()
            .map(|c| CategoryRow {
                id: c.raw(),
                name: c.name().to_string(),
                color: c.color().to_string(),
            })
            .collect();
        let provenance = SourceLabel::ALL
            .iter()
            .filter_map(|&s| s.remap().map(|c| (s, c)))
            .collect();
        Self {
            categories,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// Pretty-printed `categories.json` contents.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.categories).expect("category rows serialize") + "\n"
    }
}
