//! Coordinate frames, room and microphone-array geometry, propagation delays.
//!
//! All positions handed out by this module live in the *room frame*: origin
//! at a floor-level room corner, axes along the walls, meters. The IDIAP
//! arrays are laid out in their own *array frame* (origin midway between
//! the two ring centers, z = table plane) and placed in the room through a
//! [`RigidTransform`].

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::ops::{Add, Mul, Sub};

use crate::{Error, Result};

/// Default speed of sound in air at 20 °C, m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;
/// Default pipeline sampling rate, Hz.
pub const SAMPLE_RATE: f64 = 16_000.0;

/// A point in 3-D space, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const ORIGIN: Position = Position::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Position::new(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_squared())
    }

    pub fn norm_squared(self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn dot(self, o: Position) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Componentwise `self <= o`.
    pub fn le(self, o: Position) -> bool {
        self.x <= o.x && self.y <= o.y && self.z <= o.z
    }

    pub fn midpoint(self, o: Position) -> Position {
        (self + o) * 0.5
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Add for Position {
    type Output = Position;
    fn add(self, o: Position) -> Position {
        Position::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Position {
    type Output = Position;
    fn sub(self, o: Position) -> Position {
        Position::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Position {
    type Output = Position;
    fn mul(self, s: f64) -> Position {
        Position::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Straight-line distance between two points.
pub fn euclidean_distance(a: Position, b: Position) -> f64 {
    (a - b).norm()
}

/// Rotation about the vertical axis followed by a translation.
///
/// Maps array-frame coordinates into the room frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    /// Counterclockwise rotation about +z, radians.
    pub yaw: f64,
    pub translation: Position,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        yaw: 0.0,
        translation: Position::ORIGIN,
    };

    pub fn apply(&self, p: Position) -> Position {
        let (s, c) = (libm::sin(self.yaw), libm::cos(self.yaw));
        Position::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z) + self.translation
    }

    pub fn invert(&self, p: Position) -> Position {
        let q = p - self.translation;
        let (s, c) = (libm::sin(self.yaw), libm::cos(self.yaw));
        Position::new(c * q.x + s * q.y, -s * q.x + c * q.y, q.z)
    }
}

/// Microphone positions plus the physical constants of the room.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    mics: Vec<Position>,
    labels: Vec<u16>,
    room_min: Position,
    room_max: Position,
    speed_of_sound: f64,
    sample_rate: f64,
}

impl ArrayGeometry {
    /// Builds a geometry; microphones are labelled 1..=M in the given order.
    pub fn new(
        mics: Vec<Position>,
        room_min: Position,
        room_max: Position,
        speed_of_sound: f64,
        sample_rate: f64,
    ) -> Result<Self> {
        let labels = (1..=mics.len() as u16).collect();
        Self::with_labels(mics, labels, room_min, room_max, speed_of_sound, sample_rate)
    }

    /// Builds a geometry whose microphones keep externally meaningful labels.
    pub fn with_labels(
        mics: Vec<Position>,
        labels: Vec<u16>,
        room_min: Position,
        room_max: Position,
        speed_of_sound: f64,
        sample_rate: f64,
    ) -> Result<Self> {
        let bad = |m: alloc::string::String| Err(Error::InvalidGeometry(m));
        if mics.len() < 2 {
            return bad(format!("need at least 2 microphones, got {}", mics.len()));
        }
        if labels.len() != mics.len() {
            return bad(format!("{} labels for {} microphones", labels.len(), mics.len()));
        }
        if !(room_min.is_finite() && room_max.is_finite()) {
            return bad("non-finite room bounds".into());
        }
        if !(room_min.x < room_max.x && room_min.y < room_max.y && room_min.z < room_max.z) {
            return bad(format!("room_min {room_min} is not below room_max {room_max}"));
        }
        if !(speed_of_sound.is_finite() && speed_of_sound > 0.0) {
            return bad(format!("speed of sound must be positive, got {speed_of_sound}"));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return bad(format!("sample rate must be positive, got {sample_rate}"));
        }
        for (m, label) in mics.iter().zip(&labels) {
            if !m.is_finite() || !(room_min.le(*m) && m.le(room_max)) {
                return bad(format!("microphone {label} at {m} lies outside the room"));
            }
        }
        Ok(ArrayGeometry {
            mics,
            labels,
            room_min,
            room_max,
            speed_of_sound,
            sample_rate,
        })
    }

    pub fn mic_count(&self) -> usize {
        self.mics.len()
    }

    pub fn mics(&self) -> &[Position] {
        &self.mics
    }

    pub fn mic(&self, index: usize) -> Result<Position> {
        self.mics.get(index).copied().ok_or(Error::MicIndexOutOfRange {
            index,
            count: self.mics.len(),
        })
    }

    /// Original microphone numbers, parallel to [`Self::mics`].
    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    /// Position in [`Self::mics`] of the microphone carrying `label`.
    pub fn index_of_label(&self, label: u16) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn room_min(&self) -> Position {
        self.room_min
    }

    pub fn room_max(&self) -> Position {
        self.room_max
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn contains(&self, p: Position) -> bool {
        self.room_min.le(p) && p.le(self.room_max)
    }

    /// Propagation delay from `source` to every microphone, in samples.
    pub fn delays(&self, source: Position) -> Vec<f64> {
        self.mics
            .iter()
            .map(|&m| distance_to_samples(euclidean_distance(source, m), self))
            .collect()
    }

    /// Largest possible inter-microphone delay difference, in samples.
    pub fn max_pair_delay(&self, i: usize, j: usize) -> Result<f64> {
        let d = euclidean_distance(self.mic(i)?, self.mic(j)?);
        Ok(distance_to_samples(d, self))
    }
}

fn distance_to_samples(d: f64, geom: &ArrayGeometry) -> f64 {
    geom.sample_rate * d / geom.speed_of_sound
}

/// Propagation delay from `source` to microphone `mic_index`, in (fractional) samples.
pub fn sample_delay(source: Position, mic_index: usize, geom: &ArrayGeometry) -> Result<f64> {
    let m = geom.mic(mic_index)?;
    Ok(distance_to_samples(euclidean_distance(source, m), geom))
}

/// Axis-aligned region from which source positions are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceBox {
    lo: Position,
    hi: Position,
}

impl SourceBox {
    pub fn new(lo: Position, hi: Position) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidBox("non-finite bounds".into()));
        }
        if !lo.le(hi) {
            return Err(Error::InvalidBox(format!("lower corner {lo} exceeds upper corner {hi}")));
        }
        Ok(SourceBox { lo, hi })
    }

    /// Plausible mouth positions in the IDIAP meeting room.
    pub fn idiap() -> Self {
        SourceBox {
            lo: Position::new(0.0, 0.0, 0.92),
            hi: Position::new(3.6, 8.2, 1.53),
        }
    }

    pub fn lo(&self) -> Position {
        self.lo
    }

    pub fn hi(&self) -> Position {
        self.hi
    }

    pub fn center(&self) -> Position {
        self.lo.midpoint(self.hi)
    }

    pub fn contains(&self, p: Position) -> bool {
        self.lo.le(p) && p.le(self.hi)
    }

    /// Checks that the box fits inside the room of `geom`.
    pub fn check_within(&self, geom: &ArrayGeometry) -> Result<()> {
        if geom.contains(self.lo) && geom.contains(self.hi) {
            Ok(())
        } else {
            Err(Error::InvalidBox(format!(
                "box [{}, {}] is not contained in the room [{}, {}]",
                self.lo,
                self.hi,
                geom.room_min(),
                geom.room_max()
            )))
        }
    }
}

/// Radius of each IDIAP circular array, m.
pub const IDIAP_RING_RADIUS: f64 = 0.1;
/// Distance between the two IDIAP ring centers, m.
pub const IDIAP_RING_SEPARATION: f64 = 0.8;
/// Microphones per IDIAP ring.
pub const IDIAP_MICS_PER_RING: usize = 8;
/// IDIAP meeting room extents, m.
pub const IDIAP_ROOM: Position = Position::new(3.6, 8.2, 2.4);
/// Reduced four-microphone layout (two pairs).
pub const IDIAP_SUBSET: [u16; 4] = [1, 5, 11, 15];

/// Layout options for [`build_idiap_geometry`].
#[derive(Debug, Clone, PartialEq)]
pub struct IdiapConfig {
    /// Array frame to room frame.
    pub transform: RigidTransform,
    /// Microphone numbers (1..=16) to keep, in channel order; `None` keeps all 16.
    pub subset: Option<Vec<u16>>,
    pub speed_of_sound: f64,
    pub sample_rate: f64,
    pub room: Position,
}

impl Default for IdiapConfig {
    /// Rings along the room's long axis, array centered on the table at 0.7 m.
    fn default() -> Self {
        IdiapConfig {
            transform: RigidTransform {
                yaw: PI / 2.0,
                translation: Position::new(IDIAP_ROOM.x / 2.0, IDIAP_ROOM.y / 2.0, 0.7),
            },
            subset: None,
            speed_of_sound: SPEED_OF_SOUND,
            sample_rate: SAMPLE_RATE,
            room: IDIAP_ROOM,
        }
    }
}

impl IdiapConfig {
    pub fn four_mic() -> Self {
        IdiapConfig {
            subset: Some(IDIAP_SUBSET.to_vec()),
            ..Self::default()
        }
    }
}

/// Ring center of IDIAP ring `ring` (0 or 1) in the array frame.
pub fn idiap_ring_center(ring: usize) -> Position {
    let half = IDIAP_RING_SEPARATION / 2.0;
    if ring == 0 {
        Position::new(-half, 0.0, 0.0)
    } else {
        Position::new(half, 0.0, 0.0)
    }
}

/// Array-frame position of IDIAP microphone `label` (1..=16).
///
/// Microphones 1-8 sit on the first ring and 9-16 on the second, at
/// angles k·45° counterclockwise from +x.
pub fn idiap_mic_array_frame(label: u16) -> Result<Position> {
    let total = 2 * IDIAP_MICS_PER_RING;
    if label == 0 || label as usize > total {
        return Err(Error::MicIndexOutOfRange {
            index: label as usize,
            count: total,
        });
    }
    let idx = label as usize - 1;
    let ring = idx / IDIAP_MICS_PER_RING;
    let k = idx % IDIAP_MICS_PER_RING;
    let angle = 2.0 * PI * k as f64 / IDIAP_MICS_PER_RING as f64;
    let c = idiap_ring_center(ring);
    Ok(Position::new(
        c.x + IDIAP_RING_RADIUS * libm::cos(angle),
        c.y + IDIAP_RING_RADIUS * libm::sin(angle),
        c.z,
    ))
}

/// Builds the IDIAP meeting-room array (all 16 microphones or a subset).
pub fn build_idiap_geometry(config: &IdiapConfig) -> Result<ArrayGeometry> {
    let labels: Vec<u16> = match &config.subset {
        Some(s) => s.clone(),
        None => (1..=(2 * IDIAP_MICS_PER_RING) as u16).collect(),
    };
    for (i, a) in labels.iter().enumerate() {
        if labels[..i].contains(a) {
            return Err(Error::InvalidGeometry(format!("microphone {a} selected twice")));
        }
    }
    let mics = labels
        .iter()
        .map(|&l| idiap_mic_array_frame(l).map(|p| config.transform.apply(p)))
        .collect::<Result<Vec<_>>>()?;
    ArrayGeometry::with_labels(
        mics,
        labels,
        Position::ORIGIN,
        config.room,
        config.speed_of_sound,
        config.sample_rate,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn two_mic_geom() -> ArrayGeometry {
        ArrayGeometry::new(
            alloc::vec![Position::new(1.0, 1.0, 1.0), Position::new(1.2, 1.1, 1.0)],
            Position::ORIGIN,
            Position::new(4.0, 4.0, 3.0),
            SPEED_OF_SOUND,
            SAMPLE_RATE,
        )
        .unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(euclidean_distance(Position::ORIGIN, Position::ORIGIN), 0.0);
        assert_eq!(euclidean_distance(Position::ORIGIN, Position::new(3.0, 4.0, 0.0)), 5.0);
        assert!(close(
            euclidean_distance(Position::new(0.1, 0.0, 0.0), Position::new(-0.1, 0.0, 0.0)),
            0.2,
            1e-15
        ));
    }

    fn geom_with_mic_at_origin() -> ArrayGeometry {
        ArrayGeometry::new(
            alloc::vec![Position::ORIGIN, Position::new(1.0, 0.0, 0.0)],
            Position::new(-2.0, -2.0, -2.0),
            Position::new(2.0, 2.0, 2.0),
            343.0,
            16_000.0,
        )
        .unwrap()
    }

    #[test]
    fn sample_delay_examples() {
        let g = geom_with_mic_at_origin();
        assert!(close(sample_delay(Position::new(0.343, 0.0, 0.0), 0, &g).unwrap(), 16.0, 1e-12));
        assert_eq!(sample_delay(Position::ORIGIN, 0, &g).unwrap(), 0.0);
        // 16000 / 343
        let d = sample_delay(Position::new(0.0, 1.0, 0.0), 0, &g).unwrap();
        assert!(close(d, 46.647_230_320_699_71, 1e-9), "{d}");
        assert!(matches!(
            sample_delay(Position::ORIGIN, 2, &g),
            Err(Error::MicIndexOutOfRange { index: 2, count: 2 })
        ));
    }

    #[test]
    fn geometry_validation() {
        let lo = Position::ORIGIN;
        let hi = Position::new(1.0, 1.0, 1.0);
        let inside = Position::new(0.5, 0.5, 0.5);
        assert!(ArrayGeometry::new(alloc::vec![inside], lo, hi, 343.0, 16e3).is_err());
        assert!(ArrayGeometry::new(alloc::vec![inside, Position::new(2.0, 0.0, 0.0)], lo, hi, 343.0, 16e3).is_err());
        assert!(ArrayGeometry::new(alloc::vec![inside, inside], hi, lo, 343.0, 16e3).is_err());
        assert!(ArrayGeometry::new(alloc::vec![inside, inside], lo, hi, 0.0, 16e3).is_err());
        assert!(ArrayGeometry::new(alloc::vec![inside, inside], lo, hi, 343.0, -1.0).is_err());
        assert!(ArrayGeometry::new(alloc::vec![inside, inside], lo, hi, 343.0, 16e3).is_ok());
    }

    #[test]
    fn idiap_full_layout() {
        let cfg = IdiapConfig::default();
        let g = build_idiap_geometry(&cfg).unwrap();
        assert_eq!(g.mic_count(), 16);
        let c0 = cfg.transform.apply(idiap_ring_center(0));
        let c1 = cfg.transform.apply(idiap_ring_center(1));
        assert!(close(euclidean_distance(c0, c1), 0.8, 1e-12));
        for (i, m) in g.mics().iter().enumerate() {
            let c = if i < 8 { c0 } else { c1 };
            assert!(close(euclidean_distance(*m, c), 0.1, 1e-12), "mic {}", i + 1);
        }
        // the array-frame origin is the midpoint of the ring centers
        let mid = cfg.transform.invert(c0.midpoint(c1));
        assert!(mid.norm() < 1e-12);
        assert_eq!(g.labels(), &(1..=16).collect::<Vec<u16>>()[..]);
    }

    #[test]
    fn idiap_subset_keeps_labels_and_pairs() {
        let g = build_idiap_geometry(&IdiapConfig::four_mic()).unwrap();
        assert_eq!(g.mic_count(), 4);
        assert_eq!(g.labels(), &[1, 5, 11, 15]);
        let full = build_idiap_geometry(&IdiapConfig::default()).unwrap();
        for (i, &l) in g.labels().iter().enumerate() {
            assert_eq!(g.mics()[i], full.mics()[l as usize - 1]);
        }
        // each pair is a ring diameter; the two pairs are orthogonal
        let d01 = euclidean_distance(g.mics()[0], g.mics()[1]);
        let d23 = euclidean_distance(g.mics()[2], g.mics()[3]);
        assert!(close(d01, 0.2, 1e-12) && close(d23, 0.2, 1e-12));
        let a = g.mics()[1] - g.mics()[0];
        let b = g.mics()[3] - g.mics()[2];
        assert!(a.dot(b).abs() < 1e-12);
    }

    #[test]
    fn idiap_subset_rejects_bad_indices() {
        let cfg = IdiapConfig {
            subset: Some(alloc::vec![1, 99]),
            ..IdiapConfig::default()
        };
        assert!(matches!(
            build_idiap_geometry(&cfg),
            Err(Error::MicIndexOutOfRange { index: 99, .. })
        ));
        let dup = IdiapConfig {
            subset: Some(alloc::vec![1, 1]),
            ..IdiapConfig::default()
        };
        assert!(build_idiap_geometry(&dup).is_err());
    }

    #[test]
    fn source_box_validation() {
        assert!(SourceBox::new(Position::new(1.0, 0.0, 0.0), Position::ORIGIN).is_err());
        let g = build_idiap_geometry(&IdiapConfig::default()).unwrap();
        SourceBox::idiap().check_within(&g).unwrap();
        let too_big = SourceBox::new(Position::ORIGIN, Position::new(4.0, 1.0, 1.0)).unwrap();
        assert!(too_big.check_within(&g).is_err());
    }

    fn pos() -> impl Strategy<Value = Position> {
        (0.0..4.0f64, 0.0..4.0f64, 0.0..3.0f64).prop_map(|(x, y, z)| Position::new(x, y, z))
    }

    proptest! {
        #[test]
        fn distance_is_symmetric_and_nonnegative(a in pos(), b in pos()) {
            let d = euclidean_distance(a, b);
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d, euclidean_distance(b, a));
        }

        #[test]
        fn delay_is_monotone_in_distance(a in pos(), b in pos()) {
            let g = two_mic_geom();
            let m = g.mics()[0];
            let (da, db) = (euclidean_distance(a, m), euclidean_distance(b, m));
            let (sa, sb) = (sample_delay(a, 0, &g).unwrap(), sample_delay(b, 0, &g).unwrap());
            if da < db { prop_assert!(sa <= sb); }
            if da > db { prop_assert!(sa >= sb); }
        }

        #[test]
        fn bisector_plane_has_zero_delay_difference(u in -2.0..2.0f64, v in -2.0..2.0f64) {
            let g = two_mic_geom();
            let (a, b) = (g.mics()[0], g.mics()[1]);
            let n = b - a;
            // two directions spanning the bisector plane
            let e1 = Position::new(-n.y, n.x, 0.0);
            let e2 = Position::new(0.0, 0.0, 1.0);
            let p = a.midpoint(b) + e1 * u + e2 * v;
            let d0 = sample_delay(p, 0, &g).unwrap();
            let d1 = sample_delay(p, 1, &g).unwrap();
            prop_assert!((d0 - d1).abs() <= 1e-12 * d0.max(1.0));
        }

        #[test]
        fn transform_round_trips(yaw in -3.0..3.0f64, p in pos(), t in pos()) {
            let tr = RigidTransform { yaw, translation: t };
            let back = tr.invert(tr.apply(p));
            prop_assert!((back - p).norm() < 1e-12);
        }
    }
}
