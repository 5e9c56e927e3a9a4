//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use deliver::geometry::{Point, RobotId};
use deliver::world::{GridCell, OccupancyGrid};
use rand::Rng;

/// Nearest site by exhaustive search, lowest id on exact ties.
pub fn nearest_site(p: Point, sites: &[(RobotId, Point)]) -> RobotId {
    let mut best = sites[0];
    for &s in &sites[1..] {
        let (d, bd) = (s.1.distance_squared(p), best.1.distance_squared(p));
        if d < bd || (d == bd && s.0 < best.0) {
            best = s;
        }
    }
    best.0
}

/// Minimum over the segment of `max(|z - a|, |z - b|)` by ternary search on
/// the (convex) segment parameter.
pub fn ternary_minimax(a: Point, b: Point, p1: Point, p2: Point) -> f64 {
    let f = |t: f64| {
        let z = Point::new(p1.x + (p2.x - p1.x) * t, p1.y + (p2.y - p1.y) * t);
        a.distance(z).max(b.distance(z))
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(0.5 * (lo + hi)).min(f(0.0)).min(f(1.0))
}

/// Closest point of the segment to `p` by dense sampling.
pub fn sampled_closest(p: Point, p1: Point, p2: Point, samples: usize) -> Point {
    (0..=samples)
        .map(|k| {
            let t = k as f64 / samples as f64;
            Point::new(p1.x + (p2.x - p1.x) * t, p1.y + (p2.y - p1.y) * t)
        })
        .min_by(|u, v| u.distance(p).total_cmp(&v.distance(p)))
        .unwrap()
}

/// Breadth-first shortest 4-connected path length, if any.
pub fn bfs_len(grid: &OccupancyGrid, start: GridCell, goal: GridCell) -> Option<u32> {
    if grid.is_blocked(start) || grid.is_blocked(goal) {
        return None;
    }
    let (cols, rows) = (grid.cols() as i64, grid.rows() as i64);
    let mut dist = vec![u32::MAX; (cols * rows) as usize];
    let idx = |c: GridCell| (c.row as i64 * cols + c.col as i64) as usize;
    dist[idx(start)] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        if c == goal {
            return Some(dist[idx(c)]);
        }
        for (dc, dr) in [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)] {
            let (nc, nr) = (c.col as i64 + dc, c.row as i64 + dr);
            if nc < 0 || nr < 0 || nc >= cols || nr >= rows {
                continue;
            }
            let n = GridCell::new(nc as u32, nr as u32);
            if grid.is_blocked(n) || dist[idx(n)] != u32::MAX {
                continue;
            }
            dist[idx(n)] = dist[idx(c)] + 1;
            queue.push_back(n);
        }
    }
    None
}

/// `n` random sites in `[0, w] x [0, h]`, pairwise farther apart than `sep`.
pub fn random_sites(
    rng: &mut impl Rng,
    n: usize,
    w: f64,
    h: f64,
    sep: f64,
) -> Vec<(RobotId, Point)> {
    let mut sites: Vec<(RobotId, Point)> = Vec::with_capacity(n);
    while sites.len() < n {
        let p = Point::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        if sites.iter().all(|s| s.1.distance(p) > sep) {
            sites.push((RobotId(sites.len() as u32), p));
        }
    }
    sites
}

pub enum Reply {
    Json(String),
    Status(u16),
    Stall(Duration),
}

/// Minimal HTTP server answering `replies.len()` requests in order. Returns
/// the base URL and a handle yielding the request bodies it received.
pub fn mock_server(replies: Vec<Reply>) -> (String, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/interpret", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut bodies = Vec::new();
        for reply in replies {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            bodies.push(String::from_utf8(body).unwrap());
            let response = match reply {
                Reply::Json(json) => format!(
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{json}",
                    json.len()
                ),
                Reply::Status(code) => {
                    format!("HTTP/1.1 {code} Oops\r\nContent-Length: 0\r\nConnection: close\r\n\r\n")
                }
                Reply::Stall(d) => {
                    thread::sleep(d);
                    continue;
                }
            };
            let _ = stream.write_all(response.as_bytes());
        }
        bodies
    });
    (url, handle)
}
