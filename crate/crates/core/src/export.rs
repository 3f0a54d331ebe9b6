//! Static geometry export: element capsules colored by extrusion order.
//!
//! Printed elements run from purple (first) to red (last); elements not in
//! the sequence are black.

use std::io::{self, Write};

use serde::Serialize;

use crate::frame::{ElementId, FrameProblem, Vec3};

pub const PURPLE: [u8; 3] = [128, 0, 255];
pub const RED: [u8; 3] = [255, 0, 0];
pub const BLACK: [u8; 3] = [0, 0, 0];

/// Vertices around each capsule ring.
pub const RING_SEGMENTS: usize = 12;

/// Vertices emitted per capsule: two rings plus the two cap centres.
pub fn vertices_per_capsule() -> usize {
    2 * RING_SEGMENTS + 2
}

pub fn faces_per_capsule() -> usize {
    4 * RING_SEGMENTS
}

fn ramp(t: f64) -> [u8; 3] {
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
    [mix(PURPLE[0], RED[0]), mix(PURPLE[1], RED[1]), mix(PURPLE[2], RED[2])]
}

/// Per-element colors and sequence positions for a (possibly partial) order.
pub fn element_colors(problem: &FrameProblem, sequence: &[ElementId]) -> Vec<([u8; 3], Option<usize>)> {
    let mut out = vec![(BLACK, None); problem.num_elements()];
    let denom = sequence.len().saturating_sub(1).max(1) as f64;
    for (k, e) in sequence.iter().enumerate() {
        if let Some(slot) = out.get_mut(e.0) {
            *slot = (ramp(k as f64 / denom), Some(k));
        }
    }
    out
}

struct Mesh {
    vertices: Vec<([f32; 3], [u8; 3])>,
    faces: Vec<[u32; 3]>,
}

fn capsule_mesh(mesh: &mut Mesh, a: Vec3, b: Vec3, radius: f64, color: [u8; 3]) {
    let axis = (b - a).normalize();
    let helper = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = axis.cross(&helper).normalize();
    let v = axis.cross(&u);
    let base = mesh.vertices.len() as u32;
    let s = RING_SEGMENTS as u32;
    let push = |mesh: &mut Mesh, p: Vec3| mesh.vertices.push(([p.x as f32, p.y as f32, p.z as f32], color));
    for end in [a, b] {
        for k in 0..RING_SEGMENTS {
            let t = std::f64::consts::TAU * k as f64 / RING_SEGMENTS as f64;
            push(mesh, end + (u * t.cos() + v * t.sin()) * radius);
        }
    }
    push(mesh, a - axis * radius);
    push(mesh, b + axis * radius);
    let (ca, cb) = (base + 2 * s, base + 2 * s + 1);
    for k in 0..s {
        let k1 = (k + 1) % s;
        let (a0, a1, b0, b1) = (base + k, base + k1, base + s + k, base + s + k1);
        mesh.faces.push([a0, a1, b1]);
        mesh.faces.push([a0, b1, b0]);
        mesh.faces.push([ca, a1, a0]);
        mesh.faces.push([cb, b0, b1]);
    }
}

fn build_mesh(problem: &FrameProblem, colors: &[([u8; 3], Option<usize>)]) -> Mesh {
    let mut mesh = Mesh { vertices: Vec::new(), faces: Vec::new() };
    for e in problem.element_ids() {
        let (a, b) = problem.endpoints(e);
        capsule_mesh(&mut mesh, a, b, problem.element_radius(e), colors[e.0].0);
    }
    mesh
}

/// Binary little-endian PLY with per-vertex colors.
pub fn write_ply<W: Write>(problem: &FrameProblem, sequence: &[ElementId], mut out: W) -> io::Result<()> {
    let mesh = build_mesh(problem, &element_colors(problem, sequence));
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\ncomment extrusion order: purple first, red last, black unprinted\n\
         element vertex {}\nproperty float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\n\
         element face {}\nproperty list uchar uint vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.faces.len()
    )?;
    let mut buf = Vec::with_capacity(mesh.vertices.len() * 15 + mesh.faces.len() * 13);
    for (p, c) in &mesh.vertices {
        for x in p {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        buf.extend_from_slice(c);
    }
    for f in &mesh.faces {
        buf.push(3);
        for i in f {
            buf.extend_from_slice(&i.to_le_bytes());
        }
    }
    out.write_all(&buf)
}

#[derive(Serialize)]
struct SceneCapsule {
    element: usize,
    a: [f64; 3],
    b: [f64; 3],
    radius: f64,
    color: [u8; 3],
    order: Option<usize>,
}

#[derive(Serialize)]
struct Scene {
    capsules: Vec<SceneCapsule>,
}

/// JSON scene: one capsule record per element.
pub fn scene_json(problem: &FrameProblem, sequence: &[ElementId]) -> String {
    let colors = element_colors(problem, sequence);
    let capsules = problem
        .element_ids()
        .map(|e| {
            let (a, b) = problem.endpoints(e);
            SceneCapsule {
                element: e.0,
                a: a.into(),
                b: b.into(),
                radius: problem.element_radius(e),
                color: colors[e.0].0,
                order: colors[e.0].1,
            }
        })
        .collect();
    serde_json::to_string_pretty(&Scene { capsules }).expect("scene serializes")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Ply,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ply" => Ok(ExportFormat::Ply),
            "json" => Ok(ExportFormat::Json),
            _ => Err(format!("unknown export format '{s}' (ply|json)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::tests::chain_json;

    #[test]
    fn ramp_endpoints_and_unprinted() {
        let p = FrameProblem::from_json(&chain_json()).unwrap();
        let c = element_colors(&p, &[ElementId(0), ElementId(1)]);
        assert_eq!(c[0].0, PURPLE);
        assert_eq!(c[1].0, RED);
        let partial = element_colors(&p, &[ElementId(0)]);
        assert_eq!(partial[1], (BLACK, None));
    }

    #[test]
    fn ply_sizes() {
        let p = FrameProblem::from_json(&chain_json()).unwrap();
        let mut buf = Vec::new();
        write_ply(&p, &[ElementId(0)], &mut buf).unwrap();
        let header_end = buf.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
        let nv = 2 * vertices_per_capsule();
        let nf = 2 * faces_per_capsule();
        assert_eq!(buf.len() - header_end, nv * 15 + nf * 13);
    }
}
