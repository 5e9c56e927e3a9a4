//! Static SVG renderings of diagrams and plans. World y points up; the
//! image is flipped so that it reads like a floor plan.

use std::fmt::Write as _;

use deliver::geometry::{Point, VoronoiDiagram};
use deliver::planning::RelayPlan;
use deliver::world::{center_of, OccupancyGrid, SemanticMap};

const SCALE: f64 = 30.0;
const MARGIN: f64 = 20.0;
const PALETTE: [&str; 10] = [
    "#e8f0fe", "#fdecea", "#e6f4ea", "#fef7e0", "#f3e8fd", "#e0f7fa", "#fce4ec", "#f1f8e9",
    "#ede7f6", "#fff3e0",
];

pub struct Canvas {
    min: Point,
    height: f64,
    body: String,
}

impl Canvas {
    pub fn new(diagram: &VoronoiDiagram) -> Self {
        let ws = &diagram.workspace;
        let (w, h) = (
            ws.width() * SCALE + 2.0 * MARGIN,
            ws.height() * SCALE + 2.0 * MARGIN,
        );
        let mut body = String::new();
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(body, r#"<rect width="100%" height="100%" fill="white"/>"#);
        Canvas {
            min: ws.min_corner(),
            height: ws.height(),
            body,
        }
    }

    fn xy(&self, p: Point) -> (f64, f64) {
        (
            MARGIN + (p.x - self.min.x) * SCALE,
            MARGIN + (self.height - (p.y - self.min.y)) * SCALE,
        )
    }

    fn points(&self, pts: &[Point]) -> String {
        pts.iter()
            .map(|&p| {
                let (x, y) = self.xy(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn grid(&mut self, grid: &OccupancyGrid) {
        let ws = grid.workspace();
        let (lo, hi) = (ws.min_corner(), ws.max_corner());
        let mut lines = String::new();
        for c in 0..=grid.cols() {
            let x = lo.x + c as f64 * ws.cell_width();
            let _ = write!(
                lines,
                "{} ",
                self.line(Point::new(x, lo.y), Point::new(x, hi.y))
            );
        }
        for r in 0..=grid.rows() {
            let y = lo.y + r as f64 * ws.cell_height();
            let _ = write!(
                lines,
                "{} ",
                self.line(Point::new(lo.x, y), Point::new(hi.x, y))
            );
        }
        let _ = writeln!(
            self.body,
            r##"<path d="{}" stroke="#dddddd" stroke-width="0.5" fill="none"/>"##,
            lines.trim_end()
        );
        for &cell in grid.blocked() {
            let p = center_of(cell, grid).expect("blocked cells are in bounds");
            let (x, y) = self.xy(Point::new(
                p.x - ws.cell_width() / 2.0,
                p.y + ws.cell_height() / 2.0,
            ));
            let _ = writeln!(
                self.body,
                r##"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#555555"/>"##,
                ws.cell_width() * SCALE,
                ws.cell_height() * SCALE
            );
        }
    }

    fn line(&self, a: Point, b: Point) -> String {
        let ((x1, y1), (x2, y2)) = (self.xy(a), self.xy(b));
        format!("M{x1:.2} {y1:.2} L{x2:.2} {y2:.2}")
    }

    pub fn cells(&mut self, diagram: &VoronoiDiagram) {
        for (k, cell) in diagram.cells.iter().enumerate() {
            let _ = writeln!(
                self.body,
                r##"<polygon class="cell" points="{}" fill="{}" fill-opacity="0.8" stroke="#9e9e9e" stroke-width="1"/>"##,
                self.points(&cell.vertices),
                PALETTE[k % PALETTE.len()]
            );
        }
        for edge in diagram.edges() {
            let _ = writeln!(
                self.body,
                r##"<path class="edge" d="{}" stroke="#37474f" stroke-width="2"/>"##,
                self.line(edge.p1, edge.p2)
            );
        }
    }

    pub fn sites(&mut self, diagram: &VoronoiDiagram, active: &[deliver::geometry::RobotId]) {
        for cell in &diagram.cells {
            let (x, y) = self.xy(cell.site);
            let fill = if active.contains(&cell.site_id) {
                "#1565c0"
            } else {
                "#9e9e9e"
            };
            let _ = writeln!(
                self.body,
                r##"<circle class="site" cx="{x:.2}" cy="{y:.2}" r="6" fill="{fill}" stroke="white"/><text x="{:.2}" y="{:.2}">{}</text>"##,
                x + 8.0,
                y - 8.0,
                cell.site_id
            );
        }
    }

    pub fn zones(&mut self, map: &SemanticMap) {
        for zone in map.zones() {
            let (x, y) = self.xy(zone.anchor);
            let _ = writeln!(
                self.body,
                r##"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="none" stroke="#6d4c41"/><text x="{:.2}" y="{:.2}" fill="#6d4c41">{}</text>"##,
                x - 4.0,
                y - 4.0,
                x + 7.0,
                y + 14.0,
                escape(&zone.name)
            );
        }
    }

    pub fn plan(&mut self, plan: &RelayPlan, grid: &OccupancyGrid) {
        let centers: Vec<Point> = plan
            .path
            .cells
            .iter()
            .map(|&c| center_of(c, grid).expect("path cells are in bounds"))
            .collect();
        let _ = writeln!(
            self.body,
            r##"<polyline class="path" points="{}" fill="none" stroke="#ef6c00" stroke-width="2.5" stroke-dasharray="6 3"/>"##,
            self.points(&centers)
        );
        for seg in &plan.segments {
            let _ = writeln!(
                self.body,
                r##"<polyline class="segment" points="{}" fill="none" stroke="#1565c0" stroke-width="1.5" stroke-opacity="0.6"/>"##,
                self.points(&seg.waypoints)
            );
        }
        for &z in &plan.transfers {
            let (x, y) = self.xy(z);
            let _ = writeln!(
                self.body,
                r##"<polygon class="transfer" points="{:.2},{y:.2} {x:.2},{:.2} {:.2},{y:.2} {x:.2},{:.2}" fill="#c62828"/>"##,
                x - 7.0,
                y - 7.0,
                x + 7.0,
                y + 7.0
            );
        }
        for (p, label) in [(plan.task.pickup, "pickup"), (plan.task.drop, "drop")] {
            let (x, y) = self.xy(p);
            let _ = writeln!(
                self.body,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="8" fill="none" stroke="#2e7d32" stroke-width="2.5"/><text x="{:.2}" y="{:.2}" fill="#2e7d32">{label}</text>"##,
                x + 10.0,
                y + 4.0
            );
        }
    }

    pub fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn render_diagram(
    diagram: &VoronoiDiagram,
    grid: &OccupancyGrid,
    map: Option<&SemanticMap>,
) -> String {
    let mut canvas = Canvas::new(diagram);
    canvas.cells(diagram);
    canvas.grid(grid);
    if let Some(map) = map {
        canvas.zones(map);
    }
    canvas.sites(diagram, &[]);
    canvas.finish()
}

pub fn render_plan(
    diagram: &VoronoiDiagram,
    grid: &OccupancyGrid,
    map: Option<&SemanticMap>,
    plan: &RelayPlan,
) -> String {
    let mut canvas = Canvas::new(diagram);
    canvas.cells(diagram);
    canvas.grid(grid);
    if let Some(map) = map {
        canvas.zones(map);
    }
    canvas.plan(plan, grid);
    canvas.sites(diagram, &plan.active);
    canvas.finish()
}
