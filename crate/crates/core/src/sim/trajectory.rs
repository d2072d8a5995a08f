use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{SceneConfig, TimedPosition, Trajectory};

/// Planar motion patterns. Coordinates are in the measurement-area frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "kebab-case")]
pub enum Pattern {
    /// Back-and-forth sweeps along x, one line every `line_spacing` meters
    /// starting at `y = offset`, keeping `margin` from the area edges in x.
    Grid {
        margin: f64,
        line_spacing: f64,
        offset: f64,
    },
    Circle {
        center: [f64; 2],
        radius: f64,
        #[serde(default = "one")]
        turns: f64,
    },
    Rectangle {
        min: [f64; 2],
        max: [f64; 2],
        #[serde(default = "one")]
        laps: f64,
    },
    ManualWaypoints { points: Vec<[f64; 2]> },
}

fn one() -> f64 {
    1.0
}

/// Generates a constant-height trajectory following `pattern` at `speed`
/// m/s, sampled at `rate` Hz starting from `t = 0`.
///
/// Successive samples are exactly `speed / rate` apart in straight-line
/// distance, including across polyline corners. A zero-radius circle
/// yields one second of samples parked at the center.
pub fn gen_trajectory(
    pattern: &Pattern,
    scene: &SceneConfig,
    speed: f64,
    rate: f64,
) -> Result<Trajectory> {
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(Error::Config(format!("speed must be > 0, got {speed}")));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Config(format!("rate must be > 0, got {rate}")));
    }
    let step = speed / rate;
    let points = match pattern {
        Pattern::Grid {
            margin,
            line_spacing,
            offset,
        } => {
            let waypoints = grid_waypoints(scene, *margin, *line_spacing, *offset)?;
            walk_polyline(&waypoints, step)
        }
        Pattern::Circle {
            center,
            radius,
            turns,
        } => {
            let c = Vector2::from(*center);
            check_inside(scene, &[c - Vector2::new(*radius, *radius), c + Vector2::new(*radius, *radius)])?;
            if *radius < 0.0 || *turns <= 0.0 {
                return Err(Error::Geometry("circle needs radius >= 0 and turns > 0".into()));
            }
            walk_circle(c, *radius, *turns, step, rate)?
        }
        Pattern::Rectangle { min, max, laps } => {
            let (lo, hi) = (Vector2::from(*min), Vector2::from(*max));
            if lo.x >= hi.x || lo.y >= hi.y || *laps <= 0.0 {
                return Err(Error::Geometry("rectangle needs min < max and laps > 0".into()));
            }
            let corners = [lo, Vector2::new(hi.x, lo.y), hi, Vector2::new(lo.x, hi.y)];
            let total = (laps * 4.0).ceil() as usize;
            let mut waypoints = vec![lo];
            waypoints.extend((1..=total).map(|i| corners[i % 4]));
            walk_polyline(&waypoints, step)
        }
        Pattern::ManualWaypoints { points } => {
            if points.len() < 2 {
                return Err(Error::Geometry("need at least 2 waypoints".into()));
            }
            let waypoints: Vec<Vector2<f64>> = points.iter().map(|p| Vector2::from(*p)).collect();
            walk_polyline(&waypoints, step)
        }
    };
    check_inside(scene, &points)?;
    let samples = points
        .iter()
        .enumerate()
        .map(|(k, p)| TimedPosition::new(k as f64 / rate, p.x, p.y, scene.source_height))
        .collect();
    Ok(Trajectory::new(samples)?.with_rate_hint(rate))
}

fn grid_waypoints(
    scene: &SceneConfig,
    margin: f64,
    spacing: f64,
    offset: f64,
) -> Result<Vec<Vector2<f64>>> {
    if spacing <= 0.0 || margin < 0.0 || 2.0 * margin >= scene.area_x {
        return Err(Error::Geometry(format!(
            "grid margin {margin} / spacing {spacing} do not fit a {} m wide area",
            scene.area_x
        )));
    }
    if offset < 0.0 || offset > scene.area_y {
        return Err(Error::Geometry(format!(
            "grid offset {offset} outside [0, {}]",
            scene.area_y
        )));
    }
    let (x0, x1) = (margin, scene.area_x - margin);
    let mut waypoints = vec![];
    let mut y = offset;
    let mut forward = true;
    while y <= scene.area_y + 1e-12 {
        let (a, b) = if forward { (x0, x1) } else { (x1, x0) };
        waypoints.push(Vector2::new(a, y));
        waypoints.push(Vector2::new(b, y));
        forward = !forward;
        y += spacing;
    }
    Ok(waypoints)
}

fn check_inside(scene: &SceneConfig, points: &[Vector2<f64>]) -> Result<()> {
    const EPS: f64 = 1e-9;
    for p in points {
        if p.x < -EPS || p.y < -EPS || p.x > scene.area_x + EPS || p.y > scene.area_y + EPS {
            return Err(Error::Geometry(format!(
                "point ({:.3}, {:.3}) outside the {} x {} m area",
                p.x, p.y, scene.area_x, scene.area_y
            )));
        }
    }
    Ok(())
}

fn walk_circle(
    center: Vector2<f64>,
    radius: f64,
    turns: f64,
    step: f64,
    rate: f64,
) -> Result<Vec<Vector2<f64>>> {
    if radius == 0.0 {
        return Ok(vec![center; (rate.round() as usize).max(1)]);
    }
    if step > 2.0 * radius {
        return Err(Error::Geometry(format!(
            "step {step} m exceeds the circle diameter"
        )));
    }
    // chord of exactly `step` between successive samples
    let dtheta = 2.0 * (step / (2.0 * radius)).asin();
    let n = (turns * std::f64::consts::TAU / dtheta + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|k| {
            let a = k as f64 * dtheta;
            center + radius * Vector2::new(a.cos(), a.sin())
        })
        .collect())
}

/// Walks a polyline placing samples exactly `step` apart (Euclidean). The
/// walk stops once the remaining path is shorter than one step.
fn walk_polyline(waypoints: &[Vector2<f64>], step: f64) -> Vec<Vector2<f64>> {
    let mut out = vec![waypoints[0]];
    let mut cur = waypoints[0];
    let mut seg = 0;
    'walk: loop {
        for j in seg..waypoints.len() - 1 {
            let a = if j == seg { cur } else { waypoints[j] };
            let d = waypoints[j + 1] - a;
            let dd = d.norm_squared();
            if dd == 0.0 {
                continue;
            }
            // |a + s d - cur|^2 = step^2, larger root; f(0) <= 0 holds here
            let ac = a - cur;
            let b = 2.0 * ac.dot(&d);
            let c = ac.norm_squared() - step * step;
            let disc = (b * b - 4.0 * dd * c).max(0.0);
            let s = (-b + disc.sqrt()) / (2.0 * dd);
            if (0.0..=1.0).contains(&s) {
                cur = a + s * d;
                seg = j;
                out.push(cur);
                continue 'walk;
            }
        }
        break;
    }
    out
}
