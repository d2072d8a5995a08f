use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Position, Room, SceneConfig, TimedPosition};
use crate::SPEED_OF_LIGHT;

/// Channel frequency response (antennas × subcarriers) at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSnapshot {
    pub t: f64,
    pub h: DMatrix<Complex64>,
}

impl ChannelSnapshot {
    pub fn antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn subcarriers(&self) -> usize {
        self.h.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn power(&self) -> f64 {
        self.h.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.h.len().max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    XMin,
    XMax,
    YMin,
    YMax,
    Floor,
    Ceiling,
}

impl Surface {
    pub const ALL: [Surface; 6] = [
        Surface::XMin,
        Surface::XMax,
        Surface::YMin,
        Surface::YMax,
        Surface::Floor,
        Surface::Ceiling,
    ];

    fn axis_and_plane(self, room: &Room) -> (usize, f64) {
        match self {
            Surface::XMin => (0, room.min.x),
            Surface::XMax => (0, room.max.x),
            Surface::YMin => (1, room.min.y),
            Surface::YMax => (1, room.max.y),
            Surface::Floor => (2, room.min.z),
            Surface::Ceiling => (2, room.max.z),
        }
    }

    /// Mirror image of `p` across this surface.
    pub fn mirror(self, room: &Room, p: &Position) -> Position {
        let (axis, plane) = self.axis_and_plane(room);
        let mut m = *p;
        m[axis] = 2.0 * plane - p[axis];
        m
    }

    /// Specular reflection point on the surface for the path `a → surface → b`.
    pub fn reflection_point(self, room: &Room, a: &Position, b: &Position) -> Position {
        let (axis, plane) = self.axis_and_plane(room);
        let img = self.mirror(room, a);
        let denom = b[axis] - img[axis];
        let s = if denom.abs() < 1e-15 { 0.5 } else { (plane - img[axis]) / denom };
        img + s * (b - img)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathKind {
    LineOfSight,
    /// Specular bounce off one room surface; the bounce point is resolved
    /// per antenna.
    Wall { room: Room, surface: Surface },
    /// Fixed point scatterers visited in order.
    Scatterers(Vec<Position>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath {
    pub kind: PathKind,
    /// Complex coefficient applied on top of free-space spreading.
    pub gain: Complex64,
}

impl PropagationPath {
    /// Total geometric length from `source` to `antenna` along this path.
    pub fn length(&self, source: &Position, antenna: &Position) -> f64 {
        match &self.kind {
            PathKind::LineOfSight => (antenna - source).norm(),
            PathKind::Wall { room, surface } => (antenna - surface.mirror(room, source)).norm(),
            PathKind::Scatterers(points) => {
                let mut len = 0.0;
                let mut prev = *source;
                for p in points {
                    len += (p - prev).norm();
                    prev = *p;
                }
                len + (antenna - prev).norm()
            }
        }
    }

    /// Reflection points between `source` and `antenna`.
    pub fn points(&self, source: &Position, antenna: &Position) -> Vec<Position> {
        match &self.kind {
            PathKind::LineOfSight => vec![],
            PathKind::Wall { room, surface } => {
                vec![surface.reflection_point(room, source, antenna)]
            }
            PathKind::Scatterers(points) => points.clone(),
        }
    }
}

/// Propagation paths from one transmitter position. The first path is
/// conventionally the line of sight.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub paths: Vec<PropagationPath>,
}

impl PathSet {
    pub fn scaled(&self, factor: Complex64) -> PathSet {
        PathSet {
            paths: self
                .paths
                .iter()
                .map(|p| PropagationPath {
                    kind: p.kind.clone(),
                    gain: p.gain * factor,
                })
                .collect(),
        }
    }
}

/// Knobs of the sparse geometric multipath model.
///
/// The carrier platform (robot body) is modeled as a point scatterer held
/// `body_distance` from the transmitter in direction `body_bearing`
/// (radians from +x in the floor plane) that also attenuates the direct path
/// by `los_gain`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultipathRegime {
    pub wall_reflection: f64,
    pub floor_ceiling: bool,
    pub los_gain: f64,
    pub body_bearing: Option<f64>,
    pub body_distance: f64,
    pub body_reflection: f64,
}

impl MultipathRegime {
    /// Platform sits between transmitter and array: direct path partly
    /// shadowed, body echo toward the array.
    pub fn facing_array() -> Self {
        Self {
            wall_reflection: 0.4,
            floor_ceiling: true,
            los_gain: 0.6,
            body_bearing: Some(-std::f64::consts::FRAC_PI_2),
            body_distance: 0.25,
            body_reflection: 0.8,
        }
    }

    /// Platform turned sideways: clear direct path, body echo off to the side.
    pub fn sideways() -> Self {
        Self {
            los_gain: 1.0,
            body_bearing: Some(0.0),
            ..Self::facing_array()
        }
    }

    pub fn free_space() -> Self {
        Self {
            wall_reflection: 0.0,
            floor_ceiling: false,
            los_gain: 1.0,
            body_bearing: None,
            body_distance: 0.0,
            body_reflection: 0.0,
        }
    }
}

/// Builds line-of-sight, first-order wall and body paths for a transmitter
/// at `source`, with the regime's reflection coefficients as gains.
pub fn build_paths(source: &Position, scene: &SceneConfig, regime: &MultipathRegime) -> PathSet {
    let mut paths = vec![];
    let mut push = |kind: PathKind, coeff: f64| {
        paths.push(PropagationPath {
            kind,
            gain: Complex64::new(coeff, 0.0),
        })
    };
    push(PathKind::LineOfSight, regime.los_gain);
    let room = scene.room();
    if regime.wall_reflection != 0.0 {
        for surface in Surface::ALL {
            let vertical = matches!(surface, Surface::Floor | Surface::Ceiling);
            if vertical && !regime.floor_ceiling {
                continue;
            }
            push(PathKind::Wall { room, surface }, -regime.wall_reflection);
        }
    }
    if let Some(bearing) = regime.body_bearing {
        let body = source
            + regime.body_distance * Position::new(bearing.cos(), bearing.sin(), 0.0);
        push(PathKind::Scatterers(vec![body]), regime.body_reflection);
    }
    PathSet { paths }
}

/// Channel response `H[a, k] = Σ_p g_p A(L_{p,a}) exp(-j 2π f_k τ_{p,a})`
/// for a transmitter at `position`, where `A(L) = λ / (4π L)` is the
/// free-space amplitude over the path length to each antenna. The array
/// spans about as much as the source distance, so spreading is evaluated
/// per antenna rather than once for the array.
pub fn synth_channel(
    position: &TimedPosition,
    scene: &SceneConfig,
    paths: &PathSet,
) -> Result<ChannelSnapshot> {
    if paths.paths.is_empty() {
        return Err(Error::Model("path set is empty".into()));
    }
    if let Some(p) = paths.paths.iter().find(|p| !(p.gain.re.is_finite() && p.gain.im.is_finite())) {
        return Err(Error::Model(format!("non-finite path gain {}", p.gain)));
    }
    let ants = scene.antenna_positions();
    let freqs = scene.subcarrier_frequencies();
    let lambda = scene.wavelength();
    // (delay, amplitude-weighted gain) per antenna and path
    let terms: Vec<Vec<(f64, Complex64)>> = ants
        .iter()
        .map(|a| {
            paths
                .paths
                .iter()
                .map(|p| {
                    let len = p.length(&position.position, a);
                    let spread = lambda / (4.0 * std::f64::consts::PI * len.max(1e-3));
                    (len / SPEED_OF_LIGHT, p.gain * spread)
                })
                .collect()
        })
        .collect();
    let h = DMatrix::from_fn(ants.len(), freqs.len(), |a, k| {
        terms[a]
            .iter()
            .map(|(tau, g)| {
                // reduce the phase in cycles before scaling by 2π
                let cycles = (freqs[k] * tau).fract();
                g * Complex64::from_polar(1.0, -std::f64::consts::TAU * cycles)
            })
            .sum()
    });
    Ok(ChannelSnapshot { t: position.t, h })
}
