//! Minimax transfer point on a boundary segment.
//!
//! For two robots at `x_i` and `x_j` and a segment `p1 p2`, the transfer
//! point minimizes `max(|z - x_i|, |z - x_j|)` over the segment. Along the
//! segment both distances are convex in the segment parameter and the sign
//! of their difference changes at most once (where the segment crosses the
//! perpendicular bisector), so the minimizer is one of: the bisector
//! crossing, the clamped foot of either site, or an endpoint.

use serde::{Deserialize, Serialize};

use super::{GeometryError, Point, SharedEdge, GEOMETRY_TOLERANCE, PARALLEL_TOLERANCE};

/// Which candidate produced the transfer point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayCase {
    /// The segment lies on the bisector; the point is the sites' midpoint
    /// projected onto the segment.
    Bisector,
    /// The segment crosses the bisector transversally at the optimum.
    Crossing,
    /// Interior point where only the farther site's distance matters.
    Foot,
    /// One of the segment endpoints.
    Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayPoint {
    pub point: Point,
    /// Achieved value of `max(|z - x_i|, |z - x_j|)`.
    pub max_distance: f64,
    pub case: RelayCase,
}

/// Orthogonal projection of `point` onto the segment `p1 p2`, clamped to its endpoints.
pub fn project_clamp(point: Point, p1: Point, p2: Point) -> Result<Point, GeometryError> {
    let e = p2 - p1;
    let len2 = e.norm_squared();
    // also rejects NaN
    if len2.partial_cmp(&(GEOMETRY_TOLERANCE * GEOMETRY_TOLERANCE))
        != Some(std::cmp::Ordering::Greater)
    {
        return Err(GeometryError::DegenerateEdge);
    }
    let t = ((point - p1).dot(e) / len2).clamp(0.0, 1.0);
    Ok(p1.lerp(p2, t))
}

/// Transfer point on `edge` for a handoff between robots at `x_i` and `x_j`.
pub fn relay_point(x_i: Point, x_j: Point, edge: &SharedEdge) -> Result<RelayPoint, GeometryError> {
    minimax_on_segment(x_i, x_j, edge.p1, edge.p2)
}

pub(crate) fn minimax_on_segment(
    x_i: Point,
    x_j: Point,
    p1: Point,
    p2: Point,
) -> Result<RelayPoint, GeometryError> {
    if ![x_i, x_j, p1, p2].iter().all(|p| p.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    if x_i.distance(x_j) <= GEOMETRY_TOLERANCE {
        return Err(GeometryError::DegenerateSites);
    }
    let e = p2 - p1;
    if e.norm() <= GEOMETRY_TOLERANCE {
        return Err(GeometryError::DegenerateEdge);
    }
    let cost = |z: Point| x_i.distance(z).max(x_j.distance(z));

    let d = x_j - x_i;
    let b = d.perp();
    let m = x_i.midpoint(x_j);
    let denom = e.cross(b);

    let mut crossing = None;
    if denom.abs() < PARALLEL_TOLERANCE * e.norm() * b.norm() {
        let offset = (p1 - m).dot(d).abs() / d.norm();
        if offset <= GEOMETRY_TOLERANCE {
            let point = project_clamp(m, p1, p2)?;
            return Ok(RelayPoint {
                point,
                max_distance: cost(point),
                case: RelayCase::Bisector,
            });
        }
    } else {
        // p1 + t e = m + s b
        let t = (m - p1).cross(b) / denom;
        if (0.0..=1.0).contains(&t) {
            crossing = Some(t);
        }
    }

    let foot = |x: Point| ((x - p1).dot(e) / e.norm_squared()).clamp(0.0, 1.0);
    let candidates = crossing
        .map(|t| (t, RelayCase::Crossing))
        .into_iter()
        .chain([
            (foot(x_i), RelayCase::Foot),
            (foot(x_j), RelayCase::Foot),
            (0.0, RelayCase::Endpoint),
            (1.0, RelayCase::Endpoint),
        ]);

    let mut best: Option<RelayPoint> = None;
    for (t, case) in candidates {
        let point = match t {
            0.0 => p1,
            1.0 => p2,
            t => p1.lerp(p2, t),
        };
        let case = if point == p1 || point == p2 {
            RelayCase::Endpoint
        } else {
            case
        };
        let value = cost(point);
        // earlier candidates win near-ties
        if best.map_or(true, |b| value < b.max_distance - 1e-12) {
            best = Some(RelayPoint {
                point,
                max_distance: value,
                case,
            });
        }
    }
    Ok(best.expect("candidate list is never empty"))
}
