//! Standard component stock. Values beyond the base and resection-component
//! dimensions are defaults of this toolkit, overridable by a catalog file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CATALOG_SCHEMA_VERSION: u32 = 1;

/// A hole or pin axis in component coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleSpec {
    pub id: String,
    pub position: [f64; 3],
    pub direction: [f64; 3],
}

/// A local frame: quaternion `[w, x, y, z]` plus translation (mm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub id: String,
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub width: f64,
    pub height: f64,
    pub frame: FrameSpec,
}

/// Base block: `x ∈ ±size/2`, `y ∈ ±size/2`, `z ∈ [0, size.z]`; the
/// bottom face contacts the bone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSpec {
    pub id: String,
    pub size: [f64; 3],
    pub kwire_holes: Vec<HoleSpec>,
    pub pin_holes: Vec<HoleSpec>,
    /// Connector frames; +X points out of the face.
    pub mating_slots: Vec<FrameSpec>,
    pub pattern: PatternSpec,
}

/// A family of resection components sharing outer dimensions. Stock items
/// are every combination of tilt, yaw and standoff.
///
/// In connector coordinates the slot center sits at `(standoff, 0, 0)`; its
/// normal is `Rz(yaw)·Ry(tilt)·X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResectionSeries {
    pub width: f64,
    pub height: f64,
    pub depth: f64,
    pub slot_thickness: f64,
    pub tilt_deg: Vec<f64>,
    pub yaw_deg: Vec<f64>,
    pub standoff: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionSpec {
    pub id: String,
    /// Outlet frame is the inlet frame moved `length` along +X.
    pub length: f64,
}

/// Final component riding on the two K-wires. In base coordinates the slot
/// center sits at `anchor + standoff·Y`, normal `Rz(yaw)·Rx(tilt)·Y`; the
/// whole piece slides along the K-wire axis within `slide_range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSeries {
    pub anchor: [f64; 3],
    pub width: f64,
    pub height: f64,
    pub depth: f64,
    pub slot_thickness: f64,
    pub tilt_deg: Vec<f64>,
    pub yaw_deg: Vec<f64>,
    pub standoff: Vec<f64>,
    pub slide_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinSpec {
    pub diameter: f64,
    pub lengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub schema_version: u32,
    pub base: BaseSpec,
    pub resection: ResectionSeries,
    pub extensions: Vec<ExtensionSpec>,
    #[serde(rename = "final")]
    pub final_series: FinalSeries,
    pub pins: PinSpec,
}

fn stock(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

fn frame(id: &str, rotation: [f64; 4], translation: [f64; 3]) -> FrameSpec {
    FrameSpec {
        id: id.into(),
        rotation,
        translation,
    }
}

fn hole(id: &str, position: [f64; 3]) -> HoleSpec {
    HoleSpec {
        id: id.into(),
        position,
        direction: [0.0, 0.0, -1.0],
    }
}

impl Default for Catalog {
    fn default() -> Self {
        let (sx, sy, sz) = (35.0, 24.0, 20.0);
        Catalog {
            schema_version: CATALOG_SCHEMA_VERSION,
            base: BaseSpec {
                id: "base-type-ii".into(),
                size: [sx, sy, sz],
                kwire_holes: vec![hole("k1", [-8.0, 0.0, sz]), hole("k2", [8.0, 0.0, sz])],
                pin_holes: vec![
                    hole("p1", [-14.0, -8.0, 0.0]),
                    hole("p2", [14.0, -8.0, 0.0]),
                    hole("p3", [-14.0, 8.0, 0.0]),
                    hole("p4", [14.0, 8.0, 0.0]),
                ],
                mating_slots: vec![
                    frame("m0", [1.0, 0.0, 0.0, 0.0], [sx / 2.0, 0.0, sz / 2.0]),
                    // Half turn about Z: connector +X points along base −X.
                    frame("m1", [0.0, 0.0, 0.0, 1.0], [-sx / 2.0, 0.0, sz / 2.0]),
                ],
                pattern: PatternSpec {
                    width: 20.0,
                    height: 12.0,
                    frame: frame("pattern", [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, sz]),
                },
            },
            resection: ResectionSeries {
                width: 10.0,
                height: 20.0,
                depth: 24.0,
                slot_thickness: 1.8,
                tilt_deg: stock(-60.0, 60.0, 5.0),
                yaw_deg: stock(-60.0, 60.0, 5.0),
                standoff: stock(5.0, 60.0, 1.0),
            },
            extensions: [16.0, 24.0, 32.0, 40.0]
                .iter()
                .map(|&length| ExtensionSpec {
                    id: format!("ext-{length}"),
                    length,
                })
                .collect(),
            final_series: FinalSeries {
                anchor: [0.0, sy / 2.0, sz / 2.0],
                width: 10.0,
                height: 20.0,
                depth: 24.0,
                slot_thickness: 1.8,
                tilt_deg: stock(-60.0, 60.0, 5.0),
                yaw_deg: stock(-60.0, 60.0, 5.0),
                standoff: stock(5.0, 60.0, 1.0),
                slide_range: [-40.0, 40.0],
            },
            pins: PinSpec {
                diameter: 3.0,
                lengths: stock(4.0, 16.0, 2.0),
            },
        }
    }
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Catalog = serde_json::from_str(text).map_err(|e| Error::Schema(format!("catalog: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CATALOG_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "catalog schema_version {} (expected {CATALOG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let b = &self.base;
        let bad = |m: &str| Err(Error::Schema(format!("catalog: {m}")));
        if b.size.iter().any(|&s| !(s > 0.0)) {
            return bad("base dimensions must be positive");
        }
        if b.kwire_holes.len() != 2 {
            return bad("base needs exactly 2 K-wire holes");
        }
        if b.pin_holes.is_empty() {
            return bad("base needs at least one pin hole");
        }
        if b.mating_slots.len() != 2 {
            return bad("base needs exactly 2 mating slots");
        }
        if !(b.pattern.width > 0.0 && b.pattern.height > 0.0) {
            return bad("pattern dimensions must be positive");
        }
        let r = &self.resection;
        if [r.width, r.height, r.depth, r.slot_thickness]
            .iter()
            .any(|&s| !(s > 0.0))
        {
            return bad("resection dimensions must be positive");
        }
        if r.tilt_deg.is_empty() || r.yaw_deg.is_empty() || r.standoff.is_empty() {
            return bad("resection series is empty");
        }
        let f = &self.final_series;
        if f.tilt_deg.is_empty() || f.yaw_deg.is_empty() || f.standoff.is_empty() || f.slide_range[0] > f.slide_range[1]
        {
            return bad("final series is empty or has a reversed slide range");
        }
        if self.extensions.iter().any(|e| !(e.length > 0.0)) {
            return bad("extension lengths must be positive");
        }
        if !(self.pins.diameter > 0.0) || self.pins.lengths.iter().any(|&l| !(l > 0.0)) || self.pins.lengths.is_empty()
        {
            return bad("pin dimensions must be positive");
        }
        Ok(())
    }

    pub fn extension(&self, id: &str) -> Result<&ExtensionSpec> {
        self.extensions
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| Error::MissingComponent(id.into()))
    }
}

/// Stock membership with a tolerance for values read back from JSON.
pub(crate) fn in_stock(list: &[f64], v: f64) -> bool {
    list.iter().any(|&s| (s - v).abs() <= 1e-9)
}
