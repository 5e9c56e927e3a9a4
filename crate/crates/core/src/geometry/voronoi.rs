use serde::{Deserialize, Serialize};

use super::{GeometryError, Point, RobotId, Workspace, GEOMETRY_TOLERANCE, SITE_SEPARATION};

/// The region of the workspace owned by one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiCell {
    pub site_id: RobotId,
    pub site: Point,
    /// Counter-clockwise convex polygon.
    pub vertices: Vec<Point>,
}

impl VoronoiCell {
    /// Closed containment with [`GEOMETRY_TOLERANCE`] slack.
    pub fn contains(&self, p: Point) -> bool {
        let n = self.vertices.len();
        (0..n).all(|k| {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            let edge = b - a;
            let len = edge.norm();
            len == 0.0 || edge.cross(p - a) / len >= -GEOMETRY_TOLERANCE
        })
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|k| self.vertices[k].cross(self.vertices[(k + 1) % n]))
            .sum::<f64>()
    }
}

/// One convex cell per robot, clipped to the workspace rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiDiagram {
    pub workspace: Workspace,
    /// Sorted by `site_id`.
    pub cells: Vec<VoronoiCell>,
}

impl VoronoiDiagram {
    pub fn cell(&self, id: RobotId) -> Option<&VoronoiCell> {
        self.cells
            .binary_search_by_key(&id, |c| c.site_id)
            .ok()
            .map(|i| &self.cells[i])
    }

    pub fn site(&self, id: RobotId) -> Option<Point> {
        self.cell(id).map(|c| c.site)
    }

    pub fn sites(&self) -> impl Iterator<Item = (RobotId, Point)> + '_ {
        self.cells.iter().map(|c| (c.site_id, c.site))
    }

    /// Every positive-length shared edge, ordered by `(site_a, site_b)` with `site_a < site_b`.
    pub fn edges(&self) -> Vec<SharedEdge> {
        let mut out = Vec::new();
        for (i, a) in self.cells.iter().enumerate() {
            for b in &self.cells[i + 1..] {
                if let Some(edge) = edge_between(a, b) {
                    out.push(edge);
                }
            }
        }
        out
    }
}

/// Positive-length boundary segment common to two adjacent cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharedEdge {
    pub site_a: RobotId,
    pub site_b: RobotId,
    pub p1: Point,
    pub p2: Point,
}

impl SharedEdge {
    pub fn length(&self) -> f64 {
        self.p1.distance(self.p2)
    }

    pub fn midpoint(&self) -> Point {
        self.p1.midpoint(self.p2)
    }
}

/// Builds the bounded Voronoi diagram of `sites` by clipping the workspace
/// rectangle against every bisector half-plane of each site.
pub fn compute_voronoi(
    sites: &[(RobotId, Point)],
    workspace: &Workspace,
) -> Result<VoronoiDiagram, GeometryError> {
    if sites.is_empty() {
        return Err(GeometryError::EmptySites);
    }
    let mut sorted = sites.to_vec();
    sorted.sort_by_key(|&(id, _)| id);
    for &(id, p) in &sorted {
        if !p.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if !workspace.contains_strictly(p) {
            return Err(GeometryError::SiteOutsideWorkspace(id));
        }
    }
    for w in sorted.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(GeometryError::DuplicateRobotId(w[0].0));
        }
    }
    for (i, &(a, pa)) in sorted.iter().enumerate() {
        for &(b, pb) in &sorted[i + 1..] {
            if pa.distance(pb) < SITE_SEPARATION {
                return Err(GeometryError::SitesTooClose(a, b));
            }
        }
    }

    let cells = sorted
        .iter()
        .map(|&(id, site)| {
            let mut poly = workspace.corners().to_vec();
            let mut scratch = Vec::with_capacity(poly.len() + 2);
            for &(other_id, other) in &sorted {
                if other_id == id {
                    continue;
                }
                clip_to_closer_half(&poly, site, other, &mut scratch);
                std::mem::swap(&mut poly, &mut scratch);
            }
            VoronoiCell {
                site_id: id,
                site,
                vertices: simplify(poly),
            }
        })
        .collect();

    Ok(VoronoiDiagram {
        workspace: *workspace,
        cells,
    })
}

/// Keeps the part of the convex polygon `poly` that is at least as close to
/// `site` as to `other` (Sutherland-Hodgman against one half-plane).
fn clip_to_closer_half(poly: &[Point], site: Point, other: Point, out: &mut Vec<Point>) {
    out.clear();
    let normal = other - site;
    let inv_len = 1.0 / normal.norm();
    let mid = site.midpoint(other);
    let signed = |p: Point| (p - mid).dot(normal) * inv_len;

    let Some(&last) = poly.last() else { return };
    let mut prev = last;
    let mut prev_s = signed(prev);
    for &cur in poly {
        let cur_s = signed(cur);
        let prev_in = prev_s <= 0.0;
        let cur_in = cur_s <= 0.0;
        if prev_in != cur_in {
            let t = prev_s / (prev_s - cur_s);
            out.push(prev.lerp(cur, t));
        }
        if cur_in {
            out.push(cur);
        }
        prev = cur;
        prev_s = cur_s;
    }
}

/// Drops repeated vertices and interior vertices of straight runs.
fn simplify(mut poly: Vec<Point>) -> Vec<Point> {
    const EPS: f64 = 1e-12;
    poly.dedup_by(|a, b| a.distance(*b) <= EPS);
    while poly.len() > 1 && poly[0].distance(poly[poly.len() - 1]) <= EPS {
        poly.pop();
    }
    let mut changed = true;
    while changed && poly.len() > 3 {
        changed = false;
        let n = poly.len();
        for k in 0..n {
            let a = poly[(k + n - 1) % n];
            let b = poly[k];
            let c = poly[(k + 1) % n];
            let ac = c - a;
            let len = ac.norm();
            if len > 0.0 && (ac.cross(b - a) / len).abs() <= EPS {
                poly.remove(k);
                changed = true;
                break;
            }
        }
    }
    poly
}

/// Returns the robot owning `point`: the nearest site among the cells that
/// contain it, with exact ties going to the lowest robot id.
pub fn locate(point: Point, diagram: &VoronoiDiagram) -> Result<RobotId, GeometryError> {
    if !diagram.workspace.contains(point) {
        return Err(GeometryError::PointOutsideWorkspace(point));
    }
    let nearest = |cells: &mut dyn Iterator<Item = &VoronoiCell>| {
        let mut best: Option<(f64, RobotId)> = None;
        for cell in cells {
            let d = cell.site.distance_squared(point);
            // cells are id-sorted, so a strict comparison keeps the lowest id on ties
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, cell.site_id));
            }
        }
        best.map(|(_, id)| id)
    };
    let found = nearest(&mut diagram.cells.iter().filter(|c| c.contains(point)));
    match found {
        Some(id) => Ok(id),
        None => {
            log::warn!("no cell contains {point}; falling back to a full scan");
            nearest(&mut diagram.cells.iter()).ok_or(GeometryError::EmptySites)
        }
    }
}

/// Common boundary of cells `i` and `j`, or `None` when they only touch at a
/// point or not at all. The result is identical (up to which id is `site_a`)
/// for `(i, j)` and `(j, i)`.
pub fn shared_edge(
    diagram: &VoronoiDiagram,
    i: RobotId,
    j: RobotId,
) -> Result<Option<SharedEdge>, GeometryError> {
    let a = diagram.cell(i).ok_or(GeometryError::UnknownRobotId(i))?;
    let b = diagram.cell(j).ok_or(GeometryError::UnknownRobotId(j))?;
    if i == j {
        return Ok(None);
    }
    Ok(edge_between(a, b).map(|e| SharedEdge {
        site_a: i,
        site_b: j,
        ..e
    }))
}

fn edge_between(a: &VoronoiCell, b: &VoronoiCell) -> Option<SharedEdge> {
    let (lo, hi) = if a.site_id < b.site_id {
        (a, b)
    } else {
        (b, a)
    };
    let normal = hi.site - lo.site;
    let n_hat = normal * (1.0 / normal.norm());
    let dir = n_hat.perp();
    let mid = lo.site.midpoint(hi.site);

    let extent = |cell: &VoronoiCell| {
        let mut range: Option<(f64, f64)> = None;
        for &v in &cell.vertices {
            if (v - mid).dot(n_hat).abs() <= GEOMETRY_TOLERANCE {
                let t = (v - mid).dot(dir);
                range = Some(range.map_or((t, t), |(lo, hi)| (lo.min(t), hi.max(t))));
            }
        }
        range
    };
    let (lo_min, lo_max) = extent(lo)?;
    let (hi_min, hi_max) = extent(hi)?;
    let t0 = lo_min.max(hi_min);
    let t1 = lo_max.min(hi_max);
    if t1 - t0 <= GEOMETRY_TOLERANCE {
        return None;
    }
    Some(SharedEdge {
        site_a: lo.site_id,
        site_b: hi.site_id,
        p1: mid + dir * t0,
        p2: mid + dir * t1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square20() -> Workspace {
        Workspace::unit_grid(20, 20).unwrap()
    }

    fn ids(points: &[(f64, f64)]) -> Vec<(RobotId, Point)> {
        points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| (RobotId(i as u32), Point::new(x, y)))
            .collect()
    }

    #[test]
    fn single_site_owns_the_whole_rectangle() {
        let d = compute_voronoi(&ids(&[(5.0, 5.0)]), &square20()).unwrap();
        assert_eq!(d.cells.len(), 1);
        assert_eq!(d.cells[0].vertices, square20().corners().to_vec());
        assert!(d.edges().is_empty());
    }

    #[test]
    fn two_sites_split_at_x_equals_ten() {
        let d = compute_voronoi(&ids(&[(5.0, 10.0), (15.0, 10.0)]), &square20()).unwrap();
        for cell in &d.cells {
            assert!((cell.area() - 200.0).abs() < 1e-9);
            assert!(cell
                .vertices
                .iter()
                .all(|v| v.x <= 10.0 || cell.site_id == RobotId(1)));
        }
        let e = shared_edge(&d, RobotId(0), RobotId(1)).unwrap().unwrap();
        let mut ends = [e.p1, e.p2];
        ends.sort_by(|a, b| a.y.partial_cmp(&b.y).unwrap());
        assert!(ends[0].distance(Point::new(10.0, 0.0)) < 1e-12);
        assert!(ends[1].distance(Point::new(10.0, 20.0)) < 1e-12);
    }

    #[test]
    fn collinear_outer_sites_do_not_touch() {
        let d = compute_voronoi(
            &ids(&[(2.0, 10.0), (10.0, 10.0), (18.0, 10.0)]),
            &square20(),
        )
        .unwrap();
        assert_eq!(shared_edge(&d, RobotId(0), RobotId(2)).unwrap(), None);
        assert!(shared_edge(&d, RobotId(0), RobotId(1)).unwrap().is_some());
    }

    #[test]
    fn point_contact_is_not_an_edge() {
        // four sites in a square meet at the center in a single point
        let d = compute_voronoi(
            &ids(&[(5.0, 5.0), (15.0, 5.0), (15.0, 15.0), (5.0, 15.0)]),
            &square20(),
        )
        .unwrap();
        assert_eq!(shared_edge(&d, RobotId(0), RobotId(2)).unwrap(), None);
        assert_eq!(shared_edge(&d, RobotId(1), RobotId(3)).unwrap(), None);
        assert_eq!(d.edges().len(), 4);
    }

    #[test]
    fn locate_examples() {
        let ws = Workspace::unit_grid(10, 10).unwrap();
        let d = compute_voronoi(&ids(&[(0.5, 0.5), (9.5, 9.5)]), &ws).unwrap();
        assert_eq!(locate(Point::new(1.0, 1.0), &d).unwrap(), RobotId(0));
        assert_eq!(locate(Point::new(5.0, 5.0), &d).unwrap(), RobotId(0));
        assert_eq!(locate(Point::new(5.0, 5.0001), &d).unwrap(), RobotId(1));
        assert_eq!(
            locate(Point::new(-1.0, 5.0), &d),
            Err(GeometryError::PointOutsideWorkspace(Point::new(-1.0, 5.0)))
        );
    }

    #[test]
    fn tie_break_follows_id_not_input_order() {
        let ws = Workspace::unit_grid(10, 10).unwrap();
        let sites = vec![
            (RobotId(7), Point::new(9.5, 9.5)),
            (RobotId(3), Point::new(0.5, 0.5)),
        ];
        let d = compute_voronoi(&sites, &ws).unwrap();
        assert_eq!(locate(Point::new(5.0, 5.0), &d).unwrap(), RobotId(3));
    }

    #[test]
    fn rejects_bad_sites() {
        let ws = square20();
        assert_eq!(compute_voronoi(&[], &ws), Err(GeometryError::EmptySites));
        assert_eq!(
            compute_voronoi(&ids(&[(20.0, 5.0)]), &ws),
            Err(GeometryError::SiteOutsideWorkspace(RobotId(0)))
        );
        assert_eq!(
            compute_voronoi(&ids(&[(5.0, 5.0), (5.0, 5.0 + 1e-7)]), &ws),
            Err(GeometryError::SitesTooClose(RobotId(0), RobotId(1)))
        );
        let dup = vec![
            (RobotId(1), Point::new(1.0, 1.0)),
            (RobotId(1), Point::new(2.0, 2.0)),
        ];
        assert_eq!(
            compute_voronoi(&dup, &ws),
            Err(GeometryError::DuplicateRobotId(RobotId(1)))
        );
    }

    #[test]
    fn shared_edge_unknown_id() {
        let d = compute_voronoi(&ids(&[(5.0, 5.0)]), &square20()).unwrap();
        assert_eq!(
            shared_edge(&d, RobotId(0), RobotId(9)),
            Err(GeometryError::UnknownRobotId(RobotId(9)))
        );
    }
}
