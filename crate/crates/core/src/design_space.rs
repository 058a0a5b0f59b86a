//! Bounded design vector for a three-finger tendon-driven soft hand.
//!
//! All lengths are in millimetres and angles in radians. A design flattens
//! to a vector with a fixed slot order: thumb, index, middle; within each
//! finger `l_seg, l_fle, h[0..S), h_ten[0..S), psi, phi`.
//!
//! Mounting geometry (top view): the thumb half-circle is centred at
//! `(-R, 0)` and the index/middle half-circle at `(+R, 0)`. Both arcs bulge
//! towards the origin, so at `phi = 0` a finger sits on the prismatic axis
//! facing the opposite jaw.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math::{self, FRAC_PI_2, FRAC_PI_4};
use crate::{Error, Result};

pub const LENGTH_BOUNDS: (f64, f64) = (6.0, 18.0);
pub const THICKNESS_BOUNDS: (f64, f64) = (4.0, 18.0);
pub const TENDON_BOUNDS: (f64, f64) = (4.0, 18.0);
/// `psi` lives in the open interval `(-PSI_LIMIT, PSI_LIMIT)`.
pub const PSI_LIMIT: f64 = FRAC_PI_4;
pub const PHI_BOUNDS: (f64, f64) = (-FRAC_PI_2, FRAC_PI_2);

/// Clamping keeps `psi` this far inside its open interval.
const PSI_MARGIN: f64 = 1e-9;

pub const DEFAULT_SEGMENTS: usize = 4;
pub const DEFAULT_RADIUS_MM: f64 = 40.0;

/// Minimum base footprint diameter used by the penetration check (mm).
const MIN_FOOTPRINT_MM: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Finger {
    Thumb,
    Index,
    Middle,
}

impl Finger {
    pub const ALL: [Finger; 3] = [Finger::Thumb, Finger::Index, Finger::Middle];

    pub fn name(self) -> &'static str {
        match self {
            Finger::Thumb => "thumb",
            Finger::Index => "index",
            Finger::Middle => "middle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerDesign {
    pub l_seg: f64,
    pub l_fle: f64,
    pub h: Vec<f64>,
    pub h_ten: Vec<f64>,
    pub psi: f64,
    pub phi: f64,
}

impl FingerDesign {
    fn uniform(segments: usize, phi: f64) -> Self {
        FingerDesign {
            l_seg: 12.0,
            l_fle: 12.0,
            h: alloc::vec![11.0; segments],
            h_ten: alloc::vec![5.5; segments],
            psi: 0.0,
            phi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignVector {
    /// Segment blocks per finger.
    pub segments: usize,
    /// Mounting half-circle radius (mm).
    pub radius: f64,
    pub thumb: FingerDesign,
    pub index: FingerDesign,
    pub middle: FingerDesign,
}

/// What a flat slot holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    SegmentLength,
    FlexureLength,
    Thickness(usize),
    TendonHeight(usize),
    Orientation,
    MountAngle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub finger: Finger,
    pub kind: SlotKind,
}

impl Slot {
    /// Closed bound interval of the slot. For `Orientation` the true domain
    /// is open; see [`PSI_LIMIT`].
    pub fn bounds(&self) -> (f64, f64) {
        match self.kind {
            SlotKind::SegmentLength | SlotKind::FlexureLength => LENGTH_BOUNDS,
            SlotKind::Thickness(_) => THICKNESS_BOUNDS,
            SlotKind::TendonHeight(_) => TENDON_BOUNDS,
            SlotKind::Orientation => (-PSI_LIMIT, PSI_LIMIT),
            SlotKind::MountAngle => PHI_BOUNDS,
        }
    }

    /// Half the width of the bound interval: one normalized action unit.
    pub fn half_width(&self) -> f64 {
        let (lo, hi) = self.bounds();
        0.5 * (hi - lo)
    }
}

pub fn dimension_for(segments: usize) -> usize {
    3 * (2 + 2 * segments + 2)
}

/// Slot layout for `segments` blocks per finger, in flattening order.
pub fn slots(segments: usize) -> Vec<Slot> {
    let mut out = Vec::with_capacity(dimension_for(segments));
    for finger in Finger::ALL {
        out.push(Slot { finger, kind: SlotKind::SegmentLength });
        out.push(Slot { finger, kind: SlotKind::FlexureLength });
        for i in 0..segments {
            out.push(Slot { finger, kind: SlotKind::Thickness(i) });
        }
        for i in 0..segments {
            out.push(Slot { finger, kind: SlotKind::TendonHeight(i) });
        }
        out.push(Slot { finger, kind: SlotKind::Orientation });
        out.push(Slot { finger, kind: SlotKind::MountAngle });
    }
    out
}

/// Mounting position on a half-circle in its local frame: `R (cos phi, sin phi)`.
pub fn mount_position(phi: f64, radius: f64) -> [f64; 2] {
    [radius * math::cos(phi), radius * math::sin(phi)]
}

/// The uniform design used to collect the demonstrations.
pub fn uniform_baseline(segments: usize, radius: f64) -> Result<DesignVector> {
    if segments < 2 {
        return Err(Error::invalid("a finger needs at least 2 segment blocks"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("mounting radius must be positive"));
    }
    Ok(DesignVector {
        segments,
        radius,
        thumb: FingerDesign::uniform(segments, 0.0),
        index: FingerDesign::uniform(segments, -FRAC_PI_4),
        middle: FingerDesign::uniform(segments, FRAC_PI_4),
    })
}

impl DesignVector {
    pub fn dimension(&self) -> usize {
        dimension_for(self.segments)
    }

    pub fn finger(&self, finger: Finger) -> &FingerDesign {
        match finger {
            Finger::Thumb => &self.thumb,
            Finger::Index => &self.index,
            Finger::Middle => &self.middle,
        }
    }

    fn finger_mut(&mut self, finger: Finger) -> &mut FingerDesign {
        match finger {
            Finger::Thumb => &mut self.thumb,
            Finger::Index => &mut self.index,
            Finger::Middle => &mut self.middle,
        }
    }

    fn check_shape(&self) -> Result<()> {
        for f in Finger::ALL {
            let fd = self.finger(f);
            if fd.h.len() != self.segments || fd.h_ten.len() != self.segments {
                return Err(Error::invalid("per-block arrays must have `segments` entries"));
            }
        }
        Ok(())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dimension());
        for f in Finger::ALL {
            let fd = self.finger(f);
            out.push(fd.l_seg);
            out.push(fd.l_fle);
            out.extend_from_slice(&fd.h);
            out.extend_from_slice(&fd.h_ten);
            out.push(fd.psi);
            out.push(fd.phi);
        }
        out
    }

    pub fn from_flat(flat: &[f64], segments: usize, radius: f64) -> Result<Self> {
        Error::check_dim(dimension_for(segments), flat.len())?;
        let mut design = uniform_baseline(segments.max(2), radius)?;
        design.segments = segments;
        for (slot, &value) in slots(segments).iter().zip(flat) {
            design.set(*slot, value);
        }
        Ok(design)
    }

    pub fn get(&self, slot: Slot) -> f64 {
        let fd = self.finger(slot.finger);
        match slot.kind {
            SlotKind::SegmentLength => fd.l_seg,
            SlotKind::FlexureLength => fd.l_fle,
            SlotKind::Thickness(i) => fd.h[i],
            SlotKind::TendonHeight(i) => fd.h_ten[i],
            SlotKind::Orientation => fd.psi,
            SlotKind::MountAngle => fd.phi,
        }
    }

    fn set(&mut self, slot: Slot, value: f64) {
        let segments = self.segments;
        let fd = self.finger_mut(slot.finger);
        fd.h.resize(segments, 0.0);
        fd.h_ten.resize(segments, 0.0);
        match slot.kind {
            SlotKind::SegmentLength => fd.l_seg = value,
            SlotKind::FlexureLength => fd.l_fle = value,
            SlotKind::Thickness(i) => fd.h[i] = value,
            SlotKind::TendonHeight(i) => fd.h_ten[i] = value,
            SlotKind::Orientation => fd.psi = value,
            SlotKind::MountAngle => fd.phi = value,
        }
    }

    /// Finger base position in the global top-view frame (mm).
    pub fn mount_global(&self, finger: Finger) -> [f64; 2] {
        let r = self.radius;
        let [lx, ly] = mount_position(self.finger(finger).phi, r);
        match finger {
            Finger::Thumb => [-r + lx, ly],
            // the index/middle half-circle is the thumb's rotated by pi
            Finger::Index | Finger::Middle => [r - lx, -ly],
        }
    }
}

/// Component-wise `base + offset` (physical units), then clamp every slot to
/// its bounds. `h_ten[i]` is clamped after `h[i]` so that `h_ten[i] <= h[i]`.
pub fn apply_action(base: &DesignVector, offset: &[f64]) -> Result<DesignVector> {
    base.check_shape()?;
    Error::check_dim(base.dimension(), offset.len())?;
    let layout = slots(base.segments);
    let mut out = base.clone();
    for (slot, delta) in layout.iter().zip(offset) {
        let v = base.get(*slot) + delta;
        out.set(*slot, v);
    }
    clamp_in_place(&mut out, &layout);
    Ok(out)
}

fn clamp_in_place(design: &mut DesignVector, layout: &[Slot]) {
    for slot in layout {
        let v = design.get(*slot);
        let clamped = match slot.kind {
            SlotKind::Orientation => {
                let lim = PSI_LIMIT - PSI_MARGIN;
                nan_to(v, 0.0).clamp(-lim, lim)
            }
            SlotKind::TendonHeight(i) => {
                let h = design.finger(slot.finger).h[i];
                let hi = TENDON_BOUNDS.1.min(h);
                nan_to(v, TENDON_BOUNDS.0).clamp(TENDON_BOUNDS.0, hi)
            }
            _ => {
                let (lo, hi) = slot.bounds();
                nan_to(v, lo).clamp(lo, hi)
            }
        };
        design.set(*slot, clamped);
    }
}

fn nan_to(v: f64, fallback: f64) -> f64 {
    if v.is_nan() {
        fallback
    } else {
        v
    }
}

/// Converts a normalized action (one unit = half a bound interval) into a
/// physical offset.
pub fn denormalize_action(segments: usize, action: &[f64]) -> Result<Vec<f64>> {
    let layout = slots(segments);
    Error::check_dim(layout.len(), action.len())?;
    Ok(layout.iter().zip(action).map(|(s, a)| a * s.half_width()).collect())
}

/// `s = s0 + a` for a normalized action `a`.
pub fn decode_action(base: &DesignVector, action: &[f64]) -> Result<DesignVector> {
    let offset = denormalize_action(base.segments, action)?;
    apply_action(base, &offset)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InvalidReason {
    Shape,
    BoundViolation { finger: Finger, slot: usize, value: f64 },
    TendonAboveBlock { finger: Finger, block: usize },
    FingerPenetration { first: Finger, second: Finger, distance: f64, min_distance: f64 },
}

impl InvalidReason {
    pub fn label(&self) -> &'static str {
        match self {
            InvalidReason::Shape => "shape",
            InvalidReason::BoundViolation { .. } => "bound violation",
            InvalidReason::TendonAboveBlock { .. } => "tendon above block",
            InvalidReason::FingerPenetration { .. } => "finger penetration",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub valid: bool,
    pub reasons: Vec<InvalidReason>,
}

impl Validity {
    pub fn has(&self, label: &str) -> bool {
        self.reasons.iter().any(|r| r.label() == label)
    }
}

/// Radius of a finger's base footprint disc (mm).
pub fn footprint_radius(fd: &FingerDesign) -> f64 {
    0.5 * fd.h.first().copied().unwrap_or(0.0).max(MIN_FOOTPRINT_MM)
}

pub fn validate(design: &DesignVector) -> Validity {
    let mut reasons = Vec::new();
    if design.segments < 2 || !(design.radius > 0.0) || design.check_shape().is_err() {
        reasons.push(InvalidReason::Shape);
        return Validity { valid: false, reasons };
    }

    for (idx, slot) in slots(design.segments).iter().enumerate() {
        let v = design.get(*slot);
        let (lo, hi) = slot.bounds();
        let ok = match slot.kind {
            SlotKind::Orientation => v > lo && v < hi,
            _ => v >= lo && v <= hi,
        };
        if !ok {
            reasons.push(InvalidReason::BoundViolation { finger: slot.finger, slot: idx, value: v });
        }
    }
    for f in Finger::ALL {
        let fd = design.finger(f);
        for (i, (h, t)) in fd.h.iter().zip(&fd.h_ten).enumerate() {
            if t > h {
                reasons.push(InvalidReason::TendonAboveBlock { finger: f, block: i });
            }
        }
    }

    let pairs = [
        (Finger::Thumb, Finger::Index),
        (Finger::Thumb, Finger::Middle),
        (Finger::Index, Finger::Middle),
    ];
    for (a, b) in pairs {
        let pa = design.mount_global(a);
        let pb = design.mount_global(b);
        let distance = math::hypot(pa[0] - pb[0], pa[1] - pb[1]);
        let min_distance = footprint_radius(design.finger(a)) + footprint_radius(design.finger(b));
        if !(distance > min_distance) {
            reasons.push(InvalidReason::FingerPenetration { first: a, second: b, distance, min_distance });
        }
    }

    Validity { valid: reasons.is_empty(), reasons }
}
