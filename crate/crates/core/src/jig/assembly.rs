//! Jig configurations and their geometry in base-local coordinates.

use std::collections::{BTreeMap, HashSet};

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::catalog::{in_stock, Catalog, FrameSpec, HoleSpec};
use crate::error::{Error, Result};
use crate::geometry::{unit, Plane, Point3, RigidTransform, UnitVec3, Vec3};
use crate::planning::CutLabel;
use crate::scalar::{lit, rad, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResectionChoice {
    pub tilt_deg: f64,
    pub yaw_deg: f64,
    pub standoff: f64,
}

impl ResectionChoice {
    pub fn id(&self) -> String {
        format!("res[t{},y{},s{}]", self.tilt_deg, self.yaw_deg, self.standoff)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalChoice {
    pub tilt_deg: f64,
    pub yaw_deg: f64,
    pub standoff: f64,
    /// Position along the K-wire axis (mm).
    pub slide: f64,
    /// Mounted turned half a revolution about the K-wires.
    #[serde(default)]
    pub reversed: bool,
}

impl FinalChoice {
    pub fn id(&self) -> String {
        let r = if self.reversed { ",r" } else { "" };
        format!("final[t{},y{},s{}{r}]", self.tilt_deg, self.yaw_deg, self.standoff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mount {
    /// Resection component on a base mating slot.
    Direct {
        slot: usize,
        component: ResectionChoice,
        label: CutLabel,
    },
    /// Resection component attached through an extension.
    Extended {
        slot: usize,
        extension: String,
        component: ResectionChoice,
        label: CutLabel,
    },
    /// Final component on the K-wires, base removed.
    Final { component: FinalChoice, label: CutLabel },
}

impl Mount {
    pub fn label(&self) -> CutLabel {
        match self {
            Mount::Direct { label, .. } | Mount::Extended { label, .. } | Mount::Final { label, .. } => *label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JigConfig {
    pub base: bool,
    pub mounts: Vec<Mount>,
    /// Pin hole id → pin length (mm).
    #[serde(default)]
    pub pins: BTreeMap<String, f64>,
}

impl JigConfig {
    /// Base with the first resection component and, through an extension,
    /// the second.
    pub fn step1(res1: ResectionChoice, extension: &str, res2: ResectionChoice, labels: [CutLabel; 2]) -> Self {
        Self {
            base: true,
            mounts: vec![
                Mount::Direct {
                    slot: 0,
                    component: res1,
                    label: labels[0],
                },
                Mount::Extended {
                    slot: 1,
                    extension: extension.into(),
                    component: res2,
                    label: labels[1],
                },
            ],
            pins: BTreeMap::new(),
        }
    }

    /// The extension replaced by the third resection component.
    pub fn step3(res1: ResectionChoice, res3: ResectionChoice, labels: [CutLabel; 2]) -> Self {
        Self {
            base: true,
            mounts: vec![
                Mount::Direct {
                    slot: 0,
                    component: res1,
                    label: labels[0],
                },
                Mount::Direct {
                    slot: 1,
                    component: res3,
                    label: labels[1],
                },
            ],
            pins: BTreeMap::new(),
        }
    }

    /// The base replaced by the final component.
    pub fn step4(component: FinalChoice, label: CutLabel) -> Self {
        Self {
            base: false,
            mounts: vec![Mount::Final { component, label }],
            pins: BTreeMap::new(),
        }
    }

    pub fn with_pins(mut self, pins: BTreeMap<String, f64>) -> Self {
        self.pins = pins;
        self
    }
}

/// A mounted slot: the cutting plane through its center and the channel
/// footprint spanned by `depth_axis × height_axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotPlane<T: Scalar> {
    pub label: CutLabel,
    pub center: Point3<T>,
    pub normal: UnitVec3<T>,
    pub depth_axis: Vec3<T>,
    pub height_axis: Vec3<T>,
    pub depth: T,
    pub height: T,
    pub thickness: T,
}

impl<T: Scalar> SlotPlane<T> {
    pub fn plane(&self) -> Plane<T> {
        Plane::through(&self.center, self.normal).with_label(self.label.as_str())
    }

    pub fn transformed(&self, tf: &RigidTransform<T>) -> Self {
        Self {
            center: tf.apply(&self.center),
            normal: tf.apply_unit(&self.normal),
            depth_axis: tf.apply_vector(&self.depth_axis),
            height_axis: tf.apply_vector(&self.height_axis),
            ..self.clone()
        }
    }

    /// Corners of the channel footprint on the slot's mid-plane.
    pub fn footprint(&self) -> [Point3<T>; 4] {
        let (a, b) = (
            self.depth_axis * (self.depth * lit(0.5)),
            self.height_axis * (self.height * lit(0.5)),
        );
        let c = self.center;
        [c - a - b, c + a - b, c + a + b, c - a + b]
    }

    /// True when `plane`'s trace through the footprint stays inside the
    /// channel of half-width `thickness / 2`.
    pub fn channel_contains(&self, plane: &Plane<T>) -> bool {
        // The trace is inside iff it is inside at the footprint corners,
        // measured across the channel.
        let half = self.thickness * lit(0.5);
        let n = self.normal.into_inner();
        let denom = plane.normal.dot(&n);
        if denom.abs() <= T::default_epsilon() {
            return false;
        }
        self.footprint().iter().all(|p| {
            // Offset along the slot normal where the plane crosses p's normal line.
            let s = -plane.signed_distance(p) / denom;
            s.abs() <= half
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis<T: Scalar> {
    pub id: String,
    pub origin: Point3<T>,
    pub direction: UnitVec3<T>,
}

impl<T: Scalar> Axis<T> {
    pub fn transformed(&self, tf: &RigidTransform<T>) -> Self {
        Self {
            id: self.id.clone(),
            origin: tf.apply(&self.origin),
            direction: tf.apply_unit(&self.direction),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PinHole<T: Scalar> {
    pub axis: Axis<T>,
    /// Preoperatively assigned pin length, if any.
    pub length: Option<T>,
}

impl<T: Scalar> PinHole<T> {
    pub fn tip(&self) -> Option<Point3<T>> {
        self.length
            .map(|l| self.axis.origin + self.axis.direction.into_inner() * l)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JigAssembly<T: Scalar> {
    pub slots: Vec<SlotPlane<T>>,
    pub kwires: Vec<Axis<T>>,
    pub pin_holes: Vec<PinHole<T>>,
    pub pin_lengths: Vec<T>,
    pub pattern_frame: RigidTransform<T>,
    pub pattern_size: [T; 2],
    pub has_base: bool,
}

impl<T: Scalar> JigAssembly<T> {
    pub fn slot(&self, label: CutLabel) -> Option<&SlotPlane<T>> {
        self.slots.iter().find(|s| s.label == label)
    }
}

pub(crate) fn frame<T: Scalar>(f: &FrameSpec) -> RigidTransform<T> {
    let [w, x, y, z] = f.rotation.map(lit::<T>);
    let q = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z));
    RigidTransform::from_parts(
        q,
        Vec3::new(lit(f.translation[0]), lit(f.translation[1]), lit(f.translation[2])),
    )
}

fn axis<T: Scalar>(h: &HoleSpec) -> Result<Axis<T>> {
    Ok(Axis {
        id: h.id.clone(),
        origin: Point3::new(lit(h.position[0]), lit(h.position[1]), lit(h.position[2])),
        direction: unit(Vec3::new(lit(h.direction[0]), lit(h.direction[1]), lit(h.direction[2])))
            .map_err(|_| Error::Schema(format!("catalog: hole {} has zero direction", h.id)))?,
    })
}

fn rot_z<T: Scalar>(deg: f64) -> UnitQuaternion<T> {
    UnitQuaternion::from_axis_angle(&Vec3::z_axis(), rad(lit::<T>(deg)))
}

/// Resection slot in connector coordinates.
pub(crate) fn resection_slot<T: Scalar>(catalog: &Catalog, c: &ResectionChoice, label: CutLabel) -> SlotPlane<T> {
    let r = rot_z::<T>(c.yaw_deg) * UnitQuaternion::from_axis_angle(&Vec3::y_axis(), rad(lit::<T>(c.tilt_deg)));
    let s = &catalog.resection;
    SlotPlane {
        label,
        center: Point3::new(lit(c.standoff), T::zero(), T::zero()),
        normal: UnitVec3::new_unchecked(r * Vec3::x()),
        depth_axis: r * Vec3::y(),
        height_axis: r * Vec3::z(),
        depth: lit(s.depth),
        height: lit(s.height),
        thickness: lit(s.slot_thickness),
    }
}

/// Final-component slot in base coordinates at the given slide.
pub(crate) fn final_slot<T: Scalar>(
    catalog: &Catalog,
    kwire_dir: &UnitVec3<T>,
    c: &FinalChoice,
    label: CutLabel,
) -> SlotPlane<T> {
    let f = &catalog.final_series;
    let r = rot_z::<T>(c.yaw_deg) * UnitQuaternion::from_axis_angle(&Vec3::x_axis(), rad(lit::<T>(c.tilt_deg)));
    let anchor = Point3::new(lit(f.anchor[0]), lit(f.anchor[1]), lit(f.anchor[2]));
    let slot = SlotPlane {
        label,
        center: anchor + Vec3::y() * lit::<T>(c.standoff) + kwire_dir.into_inner() * lit::<T>(c.slide),
        normal: UnitVec3::new_unchecked(r * Vec3::y()),
        depth_axis: r * Vec3::x(),
        height_axis: r * Vec3::z(),
        depth: lit(f.depth),
        height: lit(f.height),
        thickness: lit(f.slot_thickness),
    };
    if c.reversed {
        // The K-wire holes are symmetric under a half turn about z.
        slot.transformed(&RigidTransform::from_parts(rot_z(180.0), Vec3::zeros()))
    } else {
        slot
    }
}

fn check_choice(catalog: &Catalog, c: &ResectionChoice) -> Result<()> {
    let s = &catalog.resection;
    if in_stock(&s.tilt_deg, c.tilt_deg) && in_stock(&s.yaw_deg, c.yaw_deg) && in_stock(&s.standoff, c.standoff) {
        Ok(())
    } else {
        Err(Error::MissingComponent(c.id()))
    }
}

pub fn assemble<T: Scalar>(config: &JigConfig, catalog: &Catalog) -> Result<JigAssembly<T>> {
    let base = &catalog.base;
    let kwires = base.kwire_holes.iter().map(axis).collect::<Result<Vec<Axis<T>>>>()?;
    let kdir = kwires[0].direction;
    let mut slots = Vec::new();
    let mut used_slots = HashSet::new();
    let mut labels = HashSet::new();
    for m in &config.mounts {
        if !labels.insert(m.label()) {
            return Err(Error::DuplicateLabel(m.label().to_string()));
        }
        match m {
            Mount::Direct { slot, .. } | Mount::Extended { slot, .. } => {
                if !config.base {
                    return Err(Error::IncompatibleJig("resection components mount on the base".into()));
                }
                if *slot >= base.mating_slots.len() {
                    return Err(Error::IncompatibleJig(format!("base has no mating slot {slot}")));
                }
                if !used_slots.insert(*slot) {
                    return Err(Error::IncompatibleJig(format!("mating slot {slot} used twice")));
                }
            }
            Mount::Final { .. } => {
                if config.base {
                    return Err(Error::IncompatibleJig("the final component replaces the base".into()));
                }
            }
        }
        let sp = match m {
            Mount::Direct { slot, component, label } => {
                check_choice(catalog, component)?;
                resection_slot(catalog, component, *label).transformed(&frame(&base.mating_slots[*slot]))
            }
            Mount::Extended {
                slot,
                extension,
                component,
                label,
            } => {
                check_choice(catalog, component)?;
                let ext = catalog.extension(extension)?;
                let outlet = frame::<T>(&base.mating_slots[*slot])
                    .compose(&RigidTransform::from_translation(Vec3::x() * lit::<T>(ext.length)));
                resection_slot(catalog, component, *label).transformed(&outlet)
            }
            Mount::Final { component, label } => {
                let f = &catalog.final_series;
                let ok = in_stock(&f.tilt_deg, component.tilt_deg)
                    && in_stock(&f.yaw_deg, component.yaw_deg)
                    && in_stock(&f.standoff, component.standoff)
                    && (f.slide_range[0]..=f.slide_range[1]).contains(&component.slide);
                if !ok {
                    return Err(Error::MissingComponent(component.id()));
                }
                final_slot(catalog, &kdir, component, *label)
            }
        };
        slots.push(sp);
    }

    let mut pin_holes: Vec<PinHole<T>> = Vec::new();
    if config.base {
        for h in &base.pin_holes {
            pin_holes.push(PinHole {
                axis: axis(h)?,
                length: None,
            });
        }
    }
    for (id, &len) in &config.pins {
        let hole = pin_holes
            .iter_mut()
            .find(|h| &h.axis.id == id)
            .ok_or_else(|| Error::IncompatibleJig(format!("no pin hole {id}")))?;
        if !in_stock(&catalog.pins.lengths, len) {
            return Err(Error::MissingComponent(format!("pin length {len}")));
        }
        hole.length = Some(lit(len));
    }

    Ok(JigAssembly {
        slots,
        kwires,
        pin_holes,
        pin_lengths: catalog.pins.lengths.iter().map(|&l| lit(l)).collect(),
        pattern_frame: frame(&base.pattern.frame),
        pattern_size: [lit(base.pattern.width), lit(base.pattern.height)],
        has_base: config.base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const NOMINAL: ResectionChoice = ResectionChoice {
        tilt_deg: 0.0,
        yaw_deg: 0.0,
        standoff: 5.0,
    };

    fn labels2(a: CutLabel, b: CutLabel) -> [CutLabel; 2] {
        [a, b]
    }

    #[test]
    fn step1_has_two_slots_at_expected_places() {
        let cat = Catalog::default();
        let cfg = JigConfig::step1(
            NOMINAL,
            "ext-24",
            NOMINAL,
            labels2(CutLabel::SupraAcetabular, CutLabel::InfraAcetabular),
        );
        let a: JigAssembly<f64> = assemble(&cfg, &cat).unwrap();
        assert_eq!(a.slots.len(), 2);
        // First slot: 5 mm beyond the +X face, normal +X.
        assert_relative_eq!(a.slots[0].center, Point3::new(22.5, 0.0, 10.0), epsilon = 1e-12);
        assert_relative_eq!(a.slots[0].normal.into_inner(), Vec3::x(), epsilon = 1e-12);
        // Second: through the 24 mm extension off the −X face.
        assert_relative_eq!(
            a.slots[1].center,
            Point3::new(-17.5 - 24.0 - 5.0, 0.0, 10.0),
            epsilon = 1e-12
        );
        assert_relative_eq!(a.slots[1].normal.into_inner(), -Vec3::x(), epsilon = 1e-12);
        assert!(a.has_base);
        assert_eq!(a.kwires.len(), 2);
    }

    #[test]
    fn step3_replaces_extension() {
        let cat = Catalog::default();
        let res3 = ResectionChoice {
            tilt_deg: 15.0,
            yaw_deg: -30.0,
            standoff: 8.0,
        };
        let l = labels2(CutLabel::SupraAcetabular, CutLabel::SuperiorPubicRamus);
        let s1: JigAssembly<f64> = assemble(
            &JigConfig::step1(
                NOMINAL,
                "ext-24",
                NOMINAL,
                labels2(CutLabel::SupraAcetabular, CutLabel::InfraAcetabular),
            ),
            &cat,
        )
        .unwrap();
        let s3: JigAssembly<f64> = assemble(&JigConfig::step3(NOMINAL, res3, l), &cat).unwrap();
        assert_eq!(s3.slots.len(), 2);
        assert_eq!(s3.slots[0], s1.slots[0]);
        assert_eq!(s3.slots[1].label, CutLabel::SuperiorPubicRamus);
        assert!((s3.slots[1].normal.into_inner() - s1.slots[1].normal.into_inner()).norm() > 0.1);
    }

    #[test]
    fn configuration_errors() {
        let cat = Catalog::default();
        let l = labels2(CutLabel::SupraAcetabular, CutLabel::InfraAcetabular);
        let mut pins = BTreeMap::new();
        pins.insert("p9".to_string(), 8.0);
        let cfg = JigConfig::step1(NOMINAL, "ext-24", NOMINAL, l).with_pins(pins);
        assert!(matches!(assemble::<f64>(&cfg, &cat), Err(Error::IncompatibleJig(_))));
        let mut pins = BTreeMap::new();
        pins.insert("p1".to_string(), 7.0);
        let cfg = JigConfig::step1(NOMINAL, "ext-24", NOMINAL, l).with_pins(pins);
        assert!(matches!(assemble::<f64>(&cfg, &cat), Err(Error::MissingComponent(_))));
        let cfg = JigConfig::step1(NOMINAL, "ext-99", NOMINAL, l);
        assert!(matches!(assemble::<f64>(&cfg, &cat), Err(Error::MissingComponent(_))));
        let odd = ResectionChoice {
            tilt_deg: 7.0,
            ..NOMINAL
        };
        assert!(matches!(
            assemble::<f64>(&JigConfig::step3(NOMINAL, odd, l), &cat),
            Err(Error::MissingComponent(_))
        ));
        let mut both = JigConfig::step3(NOMINAL, NOMINAL, l);
        both.mounts[1] = Mount::Direct {
            slot: 0,
            component: NOMINAL,
            label: l[1],
        };
        assert!(matches!(assemble::<f64>(&both, &cat), Err(Error::IncompatibleJig(_))));
        let mut fin = JigConfig::step4(
            FinalChoice {
                tilt_deg: 0.0,
                yaw_deg: 0.0,
                standoff: 5.0,
                slide: 0.0,
                reversed: false,
            },
            CutLabel::Auxiliary,
        );
        fin.base = true;
        assert!(matches!(assemble::<f64>(&fin, &cat), Err(Error::IncompatibleJig(_))));
        let mut pins = BTreeMap::new();
        pins.insert("p1".to_string(), 8.0);
        let ok: JigAssembly<f64> =
            assemble(&JigConfig::step1(NOMINAL, "ext-24", NOMINAL, l).with_pins(pins), &cat).unwrap();
        assert_eq!(ok.pin_holes[0].length, Some(8.0));
        assert_relative_eq!(
            ok.pin_holes[0].tip().unwrap(),
            Point3::new(-14.0, -8.0, -8.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn channel_contains_coincident_plane() {
        let cat = Catalog::default();
        let slot = resection_slot::<f64>(
            &cat,
            &ResectionChoice {
                tilt_deg: 20.0,
                yaw_deg: 10.0,
                standoff: 9.0,
            },
            CutLabel::Auxiliary,
        );
        assert!(slot.channel_contains(&slot.plane()));
        assert!(slot.channel_contains(&slot.plane().translated(0.85)));
        assert!(!slot.channel_contains(&slot.plane().translated(0.95)));
        // A ~6° tilt across the 24 × 20 mm footprint leaves the half-channel.
        let tilted = Plane::through(
            &slot.center,
            unit(slot.normal.into_inner() + slot.depth_axis * 0.1).unwrap(),
        );
        assert!(!slot.channel_contains(&tilted));
    }
}
