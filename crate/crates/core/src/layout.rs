//! Deterministic force-directed 3D layout.
//!
//! Positions start on a seeded sphere, then a fixed number of integration
//! steps apply inverse-square repulsion between every pair, springs along
//! edges and a weak pull to the origin. The result is centered, scaled into
//! `[-1, 1]^3` and spread so that no two nodes are closer than
//! [`MIN_SEPARATION`].
//!
//! Only `+ - * /`, `sqrt` and the `libm` trigonometric functions are used,
//! and every loop runs in a fixed order, so the same input produces the same
//! bits on every platform.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::views::View;

pub const DEFAULT_ITERATIONS: u32 = 300;
pub const DEFAULT_SEED: u64 = 7;
/// Minimum distance between any two laid out nodes.
pub const MIN_SEPARATION: f64 = 0.01;

const REPULSION: f64 = 1.0;
const SPRING: f64 = 0.4;
const REST_LENGTH: f64 = 1.2;
const GRAVITY: f64 = 0.05;
const MIN_DIST_SQ: f64 = 1e-4;
const SEPARATION_TARGET: f64 = MIN_SEPARATION * 1.05;
const SEPARATION_ROUNDS: usize = 64;

type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutResult {
    pub positions: BTreeMap<String, Vec3>,
    pub seed: u64,
    pub iterations: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("cannot lay out an empty view")]
    EmptyView,
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(v: Vec3) -> f64 {
    libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
}

fn scale(v: Vec3, s: f64) -> Vec3 {
    [v[0] * s, v[1] * s, v[2] * s]
}

fn add_assign(a: &mut Vec3, b: Vec3) {
    a[0] += b[0];
    a[1] += b[1];
    a[2] += b[2];
}

fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Direction from `b` to `a`, with a fixed fallback for coincident points.
fn direction(a: Vec3, b: Vec3, i: usize, j: usize) -> (Vec3, f64) {
    let d = sub(a, b);
    let dist = norm(d);
    if dist > 1e-12 {
        (scale(d, 1.0 / dist), dist)
    } else {
        let axis = (i + j) % 3;
        let mut v = [0.0; 3];
        v[axis] = if i < j { 1.0 } else { -1.0 };
        (v, 0.0)
    }
}

/// Lays out `view` with the given seed and iteration count.
pub fn layout_3d(view: &View, seed: u64, iterations: u32) -> Result<LayoutResult, LayoutError> {
    if view.nodes.is_empty() {
        return Err(LayoutError::EmptyView);
    }
    let mut ids: Vec<&str> = view.nodes.iter().map(|n| n.node.id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let n = ids.len();

    let springs: Vec<(usize, usize, f64)> = view
        .edges
        .iter()
        .filter_map(|e| {
            let a = *index.get(e.a.as_str())?;
            let b = *index.get(e.b.as_str())?;
            Some((a, b, REST_LENGTH / f64::from(e.dependency_count.max(1))))
        })
        .collect();

    let radius = libm::cbrt(n as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<Vec3> = (0..n)
        .map(|_| {
            let z = 2.0 * unit_f64(&mut rng) - 1.0;
            let phi = 2.0 * core::f64::consts::PI * unit_f64(&mut rng);
            let r = libm::sqrt((1.0 - z * z).max(0.0));
            [
                radius * r * libm::cos(phi),
                radius * r * libm::sin(phi),
                radius * z,
            ]
        })
        .collect();

    let mut disp: Vec<Vec3> = alloc::vec![[0.0; 3]; n];
    let max_step = 0.5 * radius.max(1.0);
    for it in 0..iterations {
        for d in disp.iter_mut() {
            *d = [0.0; 3];
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (dir, dist) = direction(pos[i], pos[j], i, j);
                let force = REPULSION / (dist * dist).max(MIN_DIST_SQ);
                add_assign(&mut disp[i], scale(dir, force));
                add_assign(&mut disp[j], scale(dir, -force));
            }
        }
        for &(a, b, rest) in &springs {
            let (dir, dist) = direction(pos[b], pos[a], b, a);
            let force = SPRING * (dist - rest);
            add_assign(&mut disp[a], scale(dir, force));
            add_assign(&mut disp[b], scale(dir, -force));
        }
        let temperature = max_step * (1.0 - f64::from(it) / f64::from(iterations)) + 1e-3;
        for (p, d) in pos.iter_mut().zip(disp.iter()) {
            let d = sub(*d, scale(*p, GRAVITY));
            let len = norm(d);
            let step = if len > temperature {
                temperature / len
            } else {
                1.0
            };
            add_assign(p, scale(d, step));
        }
    }

    normalize(&mut pos);
    if !separate(&mut pos) {
        pos = grid(n);
    }

    Ok(LayoutResult {
        positions: ids
            .iter()
            .zip(pos)
            .map(|(id, p)| (String::from(*id), p))
            .collect(),
        seed,
        iterations,
    })
}

/// Centers on the centroid and scales the largest coordinate to 1.
fn normalize(pos: &mut [Vec3]) {
    let n = pos.len() as f64;
    let mut centroid = [0.0; 3];
    for p in pos.iter() {
        add_assign(&mut centroid, *p);
    }
    let centroid = scale(centroid, 1.0 / n);
    let mut extent: f64 = 0.0;
    for p in pos.iter_mut() {
        *p = sub(*p, centroid);
        extent = extent.max(p[0].abs()).max(p[1].abs()).max(p[2].abs());
    }
    if extent > 0.0 && extent.is_finite() {
        for p in pos.iter_mut() {
            *p = scale(*p, 1.0 / extent);
        }
    }
}

fn clamp_unit(p: &mut Vec3) {
    for c in p.iter_mut() {
        *c = c.clamp(-1.0, 1.0);
    }
}

/// Pushes close pairs apart. Returns false if the layout is still invalid
/// after the round budget.
fn separate(pos: &mut [Vec3]) -> bool {
    let n = pos.len();
    for _ in 0..SEPARATION_ROUNDS {
        let mut moved = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (dir, dist) = direction(pos[i], pos[j], i, j);
                if dist < SEPARATION_TARGET {
                    let push = (SEPARATION_TARGET - dist) / 2.0;
                    add_assign(&mut pos[i], scale(dir, push));
                    add_assign(&mut pos[j], scale(dir, -push));
                    clamp_unit(&mut pos[i]);
                    clamp_unit(&mut pos[j]);
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    is_valid(pos)
}

fn is_valid(pos: &[Vec3]) -> bool {
    let in_box = pos
        .iter()
        .all(|p| p.iter().all(|c| c.is_finite() && (-1.0..=1.0).contains(c)));
    in_box
        && (0..pos.len())
            .all(|i| ((i + 1)..pos.len()).all(|j| norm(sub(pos[i], pos[j])) >= MIN_SEPARATION))
}

/// Regular lattice filling the unit box. Used only if separation fails.
fn grid(n: usize) -> Vec<Vec3> {
    let mut side = 1usize;
    while side * side * side < n {
        side += 1;
    }
    let spacing = 2.0 / side as f64;
    let coord = |k: usize| -1.0 + spacing * (k as f64 + 0.5);
    let mut out: Vec<Vec3> = (0..n)
        .map(|i| {
            [
                coord(i % side),
                coord((i / side) % side),
                coord(i / (side * side)),
            ]
        })
        .collect();
    if n == 1 {
        out[0] = [0.0; 3];
    }
    out
}

impl LayoutResult {
    /// Smallest pairwise Euclidean distance, `None` for fewer than two nodes.
    pub fn min_distance(&self) -> Option<f64> {
        let pts: Vec<&Vec3> = self.positions.values().collect();
        let mut best: Option<f64> = None;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let d = norm(sub(*pts[i], *pts[j]));
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, Level};
    use crate::manifest::{CallDecl, EndpointDecl, ServiceDecl, ServiceManifest};
    use crate::views::service_view;
    use alloc::format;
    use alloc::vec;

    fn ring(n: usize) -> View {
        let services = (0..n)
            .map(|i| ServiceDecl {
                name: format!("s{i:02}"),
                base_route: format!("/{}", i % 3),
                controller: None,
                endpoints: vec![EndpointDecl {
                    method: "GET".into(),
                    path: "/".into(),
                    calls: vec![CallDecl {
                        service: format!("s{:02}", (i + 1) % n),
                        endpoint: "GET /".into(),
                    }],
                    flow: vec![],
                }],
                functions: vec![],
            })
            .collect();
        let m = ServiceManifest {
            system_name: "ring".into(),
            services,
        };
        service_view(&build_graph(&m, Level::Service).unwrap())
    }

    #[test]
    fn singleton_sits_at_origin() {
        let mut v = ring(1);
        v.edges.clear();
        let l = layout_3d(&v, 3, DEFAULT_ITERATIONS).unwrap();
        assert_eq!(l.positions["s00"], [0.0, 0.0, 0.0]);
        assert_eq!(l.min_distance(), None);
    }

    #[test]
    fn empty_view_is_an_error() {
        let mut v = ring(2);
        v.nodes.clear();
        v.edges.clear();
        assert_eq!(layout_3d(&v, 1, 10), Err(LayoutError::EmptyView));
    }

    #[test]
    fn same_seed_same_bits() {
        let v = ring(12);
        let a = layout_3d(&v, 42, DEFAULT_ITERATIONS).unwrap();
        let b = layout_3d(&v, 42, DEFAULT_ITERATIONS).unwrap();
        for (pa, pb) in a.positions.values().zip(b.positions.values()) {
            for k in 0..3 {
                assert_eq!(pa[k].to_bits(), pb[k].to_bits());
            }
        }
        let c = layout_3d(&v, 43, DEFAULT_ITERATIONS).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn stays_in_box_with_separation() {
        for n in [2, 5, 30] {
            let l = layout_3d(&ring(n), 7, DEFAULT_ITERATIONS).unwrap();
            assert_eq!(l.positions.len(), n);
            for p in l.positions.values() {
                assert!(p.iter().all(|c| (-1.0..=1.0).contains(c)), "{p:?}");
            }
            assert!(l.min_distance().unwrap() >= MIN_SEPARATION);
        }
    }

    #[test]
    fn zero_iterations_still_valid() {
        let l = layout_3d(&ring(8), 1, 0).unwrap();
        assert!(l.min_distance().unwrap() >= MIN_SEPARATION);
    }

    #[test]
    fn separation_repairs_coincident_points() {
        let mut pts = vec![[0.5, 0.5, 0.5]; 4];
        assert!(separate(&mut pts));
        let mut corner = vec![[1.0, 1.0, 1.0]; 3];
        assert!(separate(&mut corner));
    }

    #[test]
    fn grid_is_valid() {
        for n in [1, 2, 8, 9, 100] {
            assert!(is_valid(&grid(n)), "n = {n}");
        }
    }
}
