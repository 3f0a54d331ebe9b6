//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use extruplan::frame::{Material, Tolerances, Vec3};
use extruplan::kinematics::Configuration;
use extruplan::FrameProblem;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;

pub fn chain_problem() -> FrameProblem {
    FrameProblem::from_json(
        r#"{
          "nodes": [[0,0,0],[0,0,1],[0,0,2]],
          "elements": [[0,1],[1,2]],
          "ground": [0],
          "material": {"E":1e9,"G":4e8,"density":1000,"area":1e-4,"Iy":1e-8,"Iz":1e-8,"J":2e-8,"g":9.81},
          "radius": 0.01,
          "q0": {"position":[0,0,3],"orientation":[0,1,0,0]},
          "tolerances": {"trans":0.01,"eps":1e-6,"retraction":0.05}
        }"#,
    )
    .expect("chain fixture parses")
}

pub fn loose_tolerances() -> Tolerances {
    Tolerances { trans: 1.0, rot: None, eps: 1e-6, retraction: 0.01 }
}

/// Random frame with every element connected to the ground through a
/// random spanning tree, plus extra chords. At most `max_elements` elements.
pub fn random_frame(rng: &mut impl Rng, max_elements: usize) -> FrameProblem {
    loop {
        let n = rng.random_range(3..=max_elements.min(20) + 1);
        let grounds = rng.random_range(1..=2.min(n - 1));
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let z = if i < grounds { 0.0 } else { rng.random_range(0.05..1.0) };
            nodes.push(Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), z));
        }
        let mut elements: Vec<[usize; 2]> = Vec::new();
        for i in grounds..n {
            let j = rng.random_range(0..i);
            elements.push([j, i]);
        }
        let extra = rng.random_range(0..=max_elements.saturating_sub(elements.len()));
        for _ in 0..extra {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a == b || (a < grounds && b < grounds) {
                continue;
            }
            if elements.iter().any(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a)) {
                continue;
            }
            elements.push([a, b]);
        }
        if elements.len() > max_elements {
            continue;
        }
        let r = rng.random_range(0.002..0.01);
        let material = Material::circular(rng.random_range(1e9..5e9), rng.random_range(4e8..2e9), 1240.0, r);
        let q0 = Configuration::pointing_down(Vec3::new(0.0, 0.0, 1.5));
        if let Ok(p) = FrameProblem::new(nodes, elements, (0..grounds).collect(), material, r, q0, loose_tolerances(), None) {
            return p;
        }
    }
}

/// Dense 6-DOF beam model written from the textbook element matrices,
/// solved by LU. Returns per-node `[ux, uy, uz, θx, θy, θz]`.
pub fn dense_displacements(problem: &FrameProblem, elements: &[usize]) -> Vec<[f64; 6]> {
    let n = problem.num_nodes();
    let dim = 6 * n;
    let mut k = DMatrix::<f64>::zeros(dim, dim);
    let mut f = DVector::<f64>::zeros(dim);
    let mut active = vec![false; n];
    for &e in elements {
        let el = &problem.elements[e];
        let (i, j) = (el.nodes[0].0, el.nodes[1].0);
        active[i] = true;
        active[j] = true;
        let a = problem.nodes[i];
        let b = problem.nodes[j];
        let m = el.material.unwrap_or(problem.material);
        let d = b - a;
        let l = d.norm();
        let x = d / l;
        let helper = if x.z.abs() > 0.9 { Vector3::x() } else { Vector3::z() };
        let y = helper.cross(&x).normalize();
        let z = x.cross(&y);
        let rot = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let kl = local_matrix(l, &m);
        let mut t = DMatrix::<f64>::zeros(12, 12);
        for blk in 0..4 {
            for r in 0..3 {
                for c in 0..3 {
                    t[(3 * blk + r, 3 * blk + c)] = rot[(r, c)];
                }
            }
        }
        let kg = t.transpose() * kl * t;
        let dofs: Vec<usize> = [i, j].iter().flat_map(|&nd| (0..6).map(move |q| 6 * nd + q)).collect();
        for r in 0..12 {
            for c in 0..12 {
                k[(dofs[r], dofs[c])] += kg[(r, c)];
            }
        }
        // uniform gravity, consistent nodal loads
        let w = m.density * m.area * m.g;
        let q = Vector3::new(0.0, 0.0, -w);
        let moment = x.cross(&q) * (l * l / 12.0);
        for (end, nd, sign) in [(0, i, 1.0), (1, j, -1.0)] {
            let _ = end;
            for c in 0..3 {
                f[6 * nd + c] += q[c] * l / 2.0;
                f[6 * nd + 3 + c] += sign * moment[c];
            }
        }
    }
    let free: Vec<usize> = (0..n)
        .filter(|&i| active[i] && !problem.ground.iter().any(|g| g.0 == i))
        .flat_map(|i| (0..6).map(move |q| 6 * i + q))
        .collect();
    let mut out = vec![[0.0; 6]; n];
    if free.is_empty() {
        return out;
    }
    let kff = DMatrix::from_fn(free.len(), free.len(), |r, c| k[(free[r], free[c])]);
    let ff = DVector::from_fn(free.len(), |r, _| f[free[r]]);
    let u = kff.lu().solve(&ff).expect("oracle system is nonsingular");
    for (r, &dof) in free.iter().enumerate() {
        out[dof / 6][dof % 6] = u[r];
    }
    out
}

fn local_matrix(l: f64, m: &Material) -> DMatrix<f64> {
    let (e, g, a, iy, iz, j) = (m.youngs_modulus, m.shear_modulus, m.area, m.iy, m.iz, m.torsion);
    let mut k = DMatrix::<f64>::zeros(12, 12);
    let mut set = |r: usize, c: usize, v: f64| {
        k[(r, c)] = v;
        k[(c, r)] = v;
    };
    let ax = e * a / l;
    set(0, 0, ax);
    set(6, 6, ax);
    set(0, 6, -ax);
    let tq = g * j / l;
    set(3, 3, tq);
    set(9, 9, tq);
    set(3, 9, -tq);
    // bending in the local x-y plane (v, θz)
    let (c1, c2, c3, c4) = (12.0 * e * iz / l.powi(3), 6.0 * e * iz / l.powi(2), 4.0 * e * iz / l, 2.0 * e * iz / l);
    set(1, 1, c1);
    set(7, 7, c1);
    set(1, 7, -c1);
    set(1, 5, c2);
    set(1, 11, c2);
    set(5, 7, -c2);
    set(7, 11, -c2);
    set(5, 5, c3);
    set(11, 11, c3);
    set(5, 11, c4);
    // bending in the local x-z plane (w, θy)
    let (d1, d2, d3, d4) = (12.0 * e * iy / l.powi(3), 6.0 * e * iy / l.powi(2), 4.0 * e * iy / l, 2.0 * e * iy / l);
    set(2, 2, d1);
    set(8, 8, d1);
    set(2, 8, -d1);
    set(2, 4, -d2);
    set(2, 10, -d2);
    set(4, 8, d2);
    set(8, 10, d2);
    set(4, 4, d3);
    set(10, 10, d3);
    set(4, 10, d4);
    k
}

pub fn max_translation(u: &[[f64; 6]]) -> f64 {
    u.iter().map(|d| (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()).fold(0.0, f64::max)
}

/// Shortest paths between all nodes by Floyd–Warshall.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(a, b, w) in edges {
        d[a][b] = d[a][b].min(w);
        d[b][a] = d[b][a].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}
