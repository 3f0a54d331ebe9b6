//! Linear 3D frame analysis under self-weight and the stiffness predicate.
//!
//! Every node carries six DOFs `(u_x, u_y, u_z, θ_x, θ_y, θ_z)` in the
//! global frame. Element matrices are standard Euler–Bernoulli frame
//! elements rotated into global coordinates; the self-weight of each element
//! is lumped as half its weight at each end plus the fixed-end moments of a
//! uniformly loaded fixed-fixed beam. Ground nodes clamp all six DOFs.

use std::collections::HashMap;

use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::frame::{ElementId, ElementSet, FrameProblem, NodeId, PartialStructure, Tolerances};
use crate::sparse::{EnvelopeLdl, FactorError, SymmetricCsr};

pub type Matrix12 = SMatrix<f64, 12, 12>;

/// Relative residual `‖K_ff u_f − F_f‖ / ‖F_f‖` a solve must reach.
pub const RESIDUAL_LIMIT: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StiffnessError {
    #[error("element {0} has zero length")]
    Degenerate(ElementId),
    #[error("element {0} is not connected to ground")]
    NotGrounded(ElementId),
    #[error("free stiffness block is singular: {0}")]
    Singular(String),
    #[error("solve residual {0:e} exceeds {RESIDUAL_LIMIT:e}")]
    Inaccurate(f64),
}

/// 12×12 global-frame stiffness matrix of one element; rows and columns are
/// the six DOFs of the first endpoint followed by those of the second.
#[derive(Clone, Debug)]
pub struct ElementStiffness {
    pub element: ElementId,
    pub nodes: [NodeId; 2],
    pub matrix: Matrix12,
}

/// Rows are the element's local x, y, z axes in global coordinates.
pub fn local_frame(direction: &Vector3<f64>) -> Matrix3<f64> {
    let x = direction.normalize();
    let reference = if x.z.abs() > 1.0 - 1e-8 { Vector3::y() } else { Vector3::z() };
    let y = reference.cross(&x).normalize();
    let z = x.cross(&y);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

/// Local-frame frame element matrix.
pub fn local_stiffness(length: f64, m: &crate::frame::Material) -> Matrix12 {
    let l = length;
    let (e, g) = (m.youngs_modulus, m.shear_modulus);
    let mut k = Matrix12::zeros();
    let ea = e * m.area / l;
    let gj = g * m.torsion / l;
    k[(0, 0)] = ea;
    k[(0, 6)] = -ea;
    k[(6, 6)] = ea;
    k[(3, 3)] = gj;
    k[(3, 9)] = -gj;
    k[(9, 9)] = gj;
    // bending in the local xy plane (about z)
    let (a, b, c, d) = (12.0 * e * m.iz / l.powi(3), 6.0 * e * m.iz / l.powi(2), 4.0 * e * m.iz / l, 2.0 * e * m.iz / l);
    k[(1, 1)] = a;
    k[(1, 5)] = b;
    k[(1, 7)] = -a;
    k[(1, 11)] = b;
    k[(5, 5)] = c;
    k[(5, 7)] = -b;
    k[(5, 11)] = d;
    k[(7, 7)] = a;
    k[(7, 11)] = -b;
    k[(11, 11)] = c;
    // bending in the local xz plane (about y)
    let (a, b, c, d) = (12.0 * e * m.iy / l.powi(3), 6.0 * e * m.iy / l.powi(2), 4.0 * e * m.iy / l, 2.0 * e * m.iy / l);
    k[(2, 2)] = a;
    k[(2, 4)] = -b;
    k[(2, 8)] = -a;
    k[(2, 10)] = -b;
    k[(4, 4)] = c;
    k[(4, 8)] = b;
    k[(4, 10)] = d;
    k[(8, 8)] = a;
    k[(8, 10)] = b;
    k[(10, 10)] = c;
    for i in 0..12 {
        for j in 0..i {
            k[(i, j)] = k[(j, i)];
        }
    }
    k
}

pub fn element_stiffness(problem: &FrameProblem, e: ElementId) -> Result<ElementStiffness, StiffnessError> {
    let el = problem.element(e);
    let (a, b) = problem.endpoints(e);
    let d = b - a;
    let length = d.norm();
    if !(length > 0.0) {
        return Err(StiffnessError::Degenerate(e));
    }
    let r = local_frame(&d);
    let mut t = Matrix12::zeros();
    for blk in 0..4 {
        t.fixed_view_mut::<3, 3>(3 * blk, 3 * blk).copy_from(&r);
    }
    let k = local_stiffness(length, problem.element_material(e));
    let matrix = t.transpose() * k * t;
    Ok(ElementStiffness { element: e, nodes: el.nodes, matrix })
}

/// Global-frame self-weight load on the two endpoints of `e`:
/// `[F_x, F_y, F_z, M_x, M_y, M_z]` for each end.
pub fn self_weight_load(problem: &FrameProblem, e: ElementId) -> [[f64; 6]; 2] {
    let (a, b) = problem.endpoints(e);
    let d = b - a;
    let l = d.norm();
    let m = problem.element_material(e);
    let w = m.density * m.area * m.g;
    let r = local_frame(&d);
    let q = r * Vector3::new(0.0, 0.0, -w);
    let c = l * l / 12.0;
    let m1 = r.transpose() * Vector3::new(0.0, -q.z * c, q.y * c);
    let m2 = -m1;
    let half = -w * l / 2.0;
    [[0.0, 0.0, half, m1.x, m1.y, m1.z], [0.0, 0.0, half, m2.x, m2.y, m2.z]]
}

/// Assembled and partitioned system for one partial structure.
#[derive(Clone, Debug)]
pub struct GlobalSystem {
    /// Full system dimension `6|N|`.
    pub dim: usize,
    /// Full stiffness matrix over all `6|N|` DOFs (rows of inactive nodes are empty).
    pub k: SymmetricCsr,
    /// Full load vector.
    pub load: Vec<f64>,
    /// Clamped DOFs (all six DOFs of every ground node).
    pub fixed: Vec<usize>,
    /// Free DOFs of non-ground nodes touched by the structure.
    pub free: Vec<usize>,
    pub k_ff: SymmetricCsr,
    /// Coupling block `K_fs` as `(free index, fixed index, value)` triplets.
    pub k_fs: Vec<(usize, usize, f64)>,
    pub f_f: Vec<f64>,
    pub tolerances: Tolerances,
}

pub fn assemble(problem: &FrameProblem, partial: &PartialStructure) -> Result<GlobalSystem, StiffnessError> {
    if let Some(e) = problem.first_ungrounded(partial.printed()) {
        return Err(StiffnessError::NotGrounded(e));
    }
    let n = problem.num_nodes();
    let dim = 6 * n;
    let mut triplets = Vec::with_capacity(partial.len() * 144);
    let mut load = vec![0.0; dim];
    let mut active = vec![false; n];
    for e in partial.elements() {
        let ke = element_stiffness(problem, e)?;
        let dofs: Vec<usize> =
            ke.nodes.iter().flat_map(|nd| (0..6).map(move |k| 6 * nd.0 + k)).collect();
        for i in 0..12 {
            for j in 0..12 {
                let v = ke.matrix[(i, j)];
                if v != 0.0 {
                    triplets.push((dofs[i], dofs[j], v));
                }
            }
        }
        let f = self_weight_load(problem, e);
        for (end, nd) in ke.nodes.iter().enumerate() {
            active[nd.0] = true;
            for k in 0..6 {
                load[6 * nd.0 + k] += f[end][k];
            }
        }
    }
    let k = SymmetricCsr::from_triplets(dim, triplets);
    let fixed: Vec<usize> = problem.ground.iter().flat_map(|g| (0..6).map(move |k| 6 * g.0 + k)).collect();
    let free: Vec<usize> = (0..n)
        .filter(|&i| active[i] && !problem.is_ground(NodeId(i)))
        .flat_map(|i| (0..6).map(move |k| 6 * i + k))
        .collect();
    let mut free_index = vec![usize::MAX; dim];
    for (fi, &d) in free.iter().enumerate() {
        free_index[d] = fi;
    }
    let mut fixed_index = vec![usize::MAX; dim];
    for (si, &d) in fixed.iter().enumerate() {
        fixed_index[d] = si;
    }
    let mut ff = Vec::new();
    let mut k_fs = Vec::new();
    for (fi, &d) in free.iter().enumerate() {
        for (j, v) in k.row(d) {
            if free_index[j] != usize::MAX {
                ff.push((fi, free_index[j], v));
            } else if fixed_index[j] != usize::MAX {
                k_fs.push((fi, fixed_index[j], v));
            }
        }
    }
    let k_ff = SymmetricCsr::from_triplets(free.len(), ff);
    let f_f = free.iter().map(|&d| load[d]).collect();
    Ok(GlobalSystem { dim, k, load, fixed, free, k_ff, k_fs, f_f, tolerances: problem.tolerances })
}

/// Nodal displacements of a solved structure and their tolerance check.
#[derive(Clone, Debug, Serialize)]
pub struct DeformationReport {
    pub pass: bool,
    pub max_trans: f64,
    pub max_rot: f64,
    /// Node with the largest translational displacement.
    pub worst_node: usize,
    pub worst_rot_node: usize,
    pub residual: f64,
    pub displacements: Vec<[f64; 6]>,
}

pub fn solve(system: &GlobalSystem) -> Result<DeformationReport, StiffnessError> {
    let n = system.dim / 6;
    let mut displacements = vec![[0.0; 6]; n];
    let mut residual = 0.0;
    if !system.free.is_empty() {
        let factor = EnvelopeLdl::factor(&system.k_ff).map_err(|e| match e {
            FactorError::NotPositiveDefinite { row, pivot } => StiffnessError::Singular(format!(
                "pivot {pivot:e} at free DOF {} (node {})",
                system.free[row],
                system.free[row] / 6
            )),
            FactorError::NonFinite(row) => StiffnessError::Singular(format!("non-finite pivot at free DOF {row}")),
        })?;
        let u = factor.solve(&system.f_f);
        let ku = system.k_ff.mul_vec(&u);
        let f_norm = norm(&system.f_f);
        let r_norm = norm(&ku.iter().zip(&system.f_f).map(|(a, b)| a - b).collect::<Vec<_>>());
        residual = if f_norm > 0.0 { r_norm / f_norm } else { r_norm };
        if !(residual <= RESIDUAL_LIMIT) {
            return Err(StiffnessError::Inaccurate(residual));
        }
        for (fi, &d) in system.free.iter().enumerate() {
            displacements[d / 6][d % 6] = u[fi];
        }
    }
    let mut report = DeformationReport {
        pass: true,
        max_trans: 0.0,
        max_rot: 0.0,
        worst_node: 0,
        worst_rot_node: 0,
        residual,
        displacements,
    };
    for (i, d) in report.displacements.iter().enumerate() {
        let t = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let r = (d[3] * d[3] + d[4] * d[4] + d[5] * d[5]).sqrt();
        if t > report.max_trans {
            report.max_trans = t;
            report.worst_node = i;
        }
        if r > report.max_rot {
            report.max_rot = r;
            report.worst_rot_node = i;
        }
    }
    report.pass =
        report.max_trans <= system.tolerances.trans && report.max_rot <= system.tolerances.rot_limit();
    Ok(report)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Analyze `partial` from scratch.
pub fn analyze(problem: &FrameProblem, partial: &PartialStructure) -> Result<DeformationReport, StiffnessError> {
    solve(&assemble(problem, partial)?)
}

/// Outcome of the stiffness predicate with its diagnosis.
#[derive(Clone, Debug, PartialEq)]
pub enum StiffnessVerdict {
    Empty,
    Stiff,
    NotGrounded(ElementId),
    Singular(String),
    Inaccurate(f64),
    Exceeds { max_trans: f64, max_rot: f64 },
}

impl StiffnessVerdict {
    pub fn is_stiff(&self) -> bool {
        matches!(self, StiffnessVerdict::Empty | StiffnessVerdict::Stiff)
    }
}

pub fn verdict(problem: &FrameProblem, partial: &PartialStructure) -> StiffnessVerdict {
    if partial.is_empty() {
        return StiffnessVerdict::Empty;
    }
    match analyze(problem, partial) {
        Ok(r) if r.pass => StiffnessVerdict::Stiff,
        Ok(r) => StiffnessVerdict::Exceeds { max_trans: r.max_trans, max_rot: r.max_rot },
        Err(StiffnessError::NotGrounded(e)) => StiffnessVerdict::NotGrounded(e),
        Err(StiffnessError::Inaccurate(r)) => StiffnessVerdict::Inaccurate(r),
        Err(e) => StiffnessVerdict::Singular(e.to_string()),
    }
}

/// The stiffness predicate: true for the empty structure, otherwise the
/// structure must be ground-connected, solvable and within both limits.
pub fn stiff(problem: &FrameProblem, partial: &PartialStructure) -> bool {
    verdict(problem, partial).is_stiff()
}

/// Memoized stiffness predicate keyed by the printed element set.
pub struct StiffnessChecker<'a> {
    problem: &'a FrameProblem,
    cache: HashMap<ElementSet, StiffnessVerdict>,
    pub checks: u64,
    pub hits: u64,
}

impl<'a> StiffnessChecker<'a> {
    pub fn new(problem: &'a FrameProblem) -> Self {
        StiffnessChecker { problem, cache: HashMap::new(), checks: 0, hits: 0 }
    }

    pub fn verdict(&mut self, partial: &PartialStructure) -> StiffnessVerdict {
        self.checks += 1;
        // ungrounded sets are cheap to reject and never worth caching
        if let Some(e) = self.problem.first_ungrounded(partial.printed()) {
            return StiffnessVerdict::NotGrounded(e);
        }
        if let Some(v) = self.cache.get(partial.printed()) {
            self.hits += 1;
            return v.clone();
        }
        let v = verdict(self.problem, partial);
        self.cache.insert(partial.printed().clone(), v.clone());
        v
    }

    pub fn is_stiff(&mut self, partial: &PartialStructure) -> bool {
        self.verdict(partial).is_stiff()
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{Material, Vec3};
    use crate::kinematics::Configuration;
    use nalgebra::SymmetricEigen;

    fn unit_material() -> Material {
        Material { youngs_modulus: 1.0, shear_modulus: 1.0, density: 1.0, area: 1.0, iy: 1.0, iz: 1.0, torsion: 1.0, g: 1.0 }
    }

    fn problem(nodes: Vec<Vec3>, elements: Vec<[usize; 2]>, ground: Vec<usize>, m: Material, trans: f64) -> FrameProblem {
        let top = nodes.iter().map(|p| p.z).fold(0.0, f64::max);
        FrameProblem::new(
            nodes,
            elements,
            ground,
            m,
            0.01,
            Configuration::pointing_down(Vec3::new(0.0, 0.0, top + 1.0)),
            Tolerances { trans, rot: None, eps: 1e-6, retraction: 0.0 },
            None,
        )
        .unwrap()
    }

    #[test]
    fn axial_term_of_x_aligned_unit_element() {
        let p = problem(vec![Vec3::zeros(), Vec3::x()], vec![[0, 1]], vec![0], unit_material(), 1.0);
        let k = element_stiffness(&p, ElementId(0)).unwrap().matrix;
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(0, 6)], -1.0);
        assert_eq!(k, local_stiffness(1.0, &unit_material()));
    }

    #[test]
    fn y_aligned_element_is_rotated_x_element() {
        let m = Material { iy: 0.3, iz: 0.7, ..unit_material() };
        let px = problem(vec![Vec3::zeros(), Vec3::x()], vec![[0, 1]], vec![0], m, 1.0);
        let py = problem(vec![Vec3::zeros(), Vec3::y()], vec![[0, 1]], vec![0], m, 1.0);
        let kx = element_stiffness(&px, ElementId(0)).unwrap().matrix;
        let ky = element_stiffness(&py, ElementId(0)).unwrap().matrix;
        // 90° about z maps x to y
        let rz = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let mut t = Matrix12::zeros();
        for b in 0..4 {
            t.fixed_view_mut::<3, 3>(3 * b, 3 * b).copy_from(&rz);
        }
        let expect = t * kx * t.transpose();
        assert!((expect - ky).abs().max() < 1e-12);
    }

    #[test]
    fn random_orientation_has_six_rigid_modes() {
        let m = Material { youngs_modulus: 2.0, shear_modulus: 0.8, density: 1.0, area: 0.5, iy: 0.2, iz: 0.3, torsion: 0.4, g: 1.0 };
        for dir in [Vec3::new(0.3, -0.7, 0.64), Vec3::new(-1.2, 0.1, 0.05), Vec3::new(0.0, 0.0, 2.0)] {
            let p = problem(vec![Vec3::zeros(), dir], vec![[0, 1]], vec![0], m, 1.0);
            let k = element_stiffness(&p, ElementId(0)).unwrap().matrix;
            assert!((k - k.transpose()).abs().max() <= 1e-12 * k.abs().max());
            let eig = SymmetricEigen::new(k).eigenvalues;
            let scale = eig.abs().max();
            let zero = eig.iter().filter(|v| v.abs() < 1e-9 * scale).count();
            let positive = eig.iter().filter(|v| **v > 1e-9 * scale).count();
            assert_eq!((zero, positive), (6, 6), "{eig}");
        }
    }

    #[test]
    fn vertical_column_tip_displacement() {
        let p = problem(vec![Vec3::zeros(), Vec3::z()], vec![[0, 1]], vec![0], unit_material(), 10.0);
        let r = analyze(&p, &PartialStructure::full(&p)).unwrap();
        assert!((r.max_trans - 0.5).abs() < 1e-12, "{}", r.max_trans);
        assert_eq!(r.displacements[0], [0.0; 6]);
    }

    #[test]
    fn horizontal_cantilever_matches_beam_formula() {
        let m = Material { youngs_modulus: 210e9, shear_modulus: 80e9, density: 7800.0, ..Material::circular(1.0, 1.0, 1.0, 0.01) };
        let l = 1.3;
        let p = problem(vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(l, 0.0, 1.0)], vec![[0, 1]], vec![0], m, 1.0);
        let r = analyze(&p, &PartialStructure::full(&p)).unwrap();
        let w = m.density * m.area * m.g;
        let tip = w * l.powi(4) / (8.0 * m.youngs_modulus * m.iy);
        let d = r.displacements[1];
        assert!((d[2] + tip).abs() < 1e-9 * tip, "{} vs {}", d[2], -tip);
        let slope = w * l.powi(3) / (6.0 * m.youngs_modulus * m.iy);
        assert!((d[4] - slope).abs() < 1e-9 * slope);
    }

    #[test]
    fn empty_structure_is_stiff_and_has_no_dofs() {
        let p = problem(vec![Vec3::zeros(), Vec3::z()], vec![[0, 1]], vec![0], unit_material(), 1e-9);
        let sys = assemble(&p, &PartialStructure::empty(&p)).unwrap();
        assert!(sys.free.is_empty());
        let r = solve(&sys).unwrap();
        assert_eq!(r.max_trans, 0.0);
        assert!(stiff(&p, &PartialStructure::empty(&p)));
        assert!(!stiff(&p, &PartialStructure::full(&p)));
    }

    #[test]
    fn shared_node_block_is_sum_of_contributions() {
        let nodes = vec![Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0)];
        let p = problem(nodes, vec![[0, 1], [1, 2]], vec![0], unit_material(), 1.0);
        let sys = assemble(&p, &PartialStructure::full(&p)).unwrap();
        let k0 = element_stiffness(&p, ElementId(0)).unwrap().matrix;
        let k1 = element_stiffness(&p, ElementId(1)).unwrap().matrix;
        for i in 0..6 {
            for j in 0..6 {
                let expect = k0[(6 + i, 6 + j)] + k1[(i, j)];
                assert!((sys.k.get(6 + i, 6 + j) - expect).abs() < 1e-12);
            }
        }
        // single grounded element: K_ff is the free end's block
        let single = PartialStructure::from_elements(&p, [ElementId(0)]);
        let sys = assemble(&p, &single).unwrap();
        assert_eq!(sys.free, (6..12).collect::<Vec<_>>());
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(sys.k_ff.get(i, j), k0[(6 + i, 6 + j)]);
            }
        }
    }

    #[test]
    fn ungrounded_structure_is_not_stiff() {
        let nodes = vec![Vec3::zeros(), Vec3::z(), Vec3::new(0.0, 0.0, 2.0)];
        let p = problem(nodes, vec![[0, 1], [1, 2]], vec![0], unit_material(), 1.0);
        let floating = PartialStructure::from_elements(&p, [ElementId(1)]);
        assert!(matches!(assemble(&p, &floating), Err(StiffnessError::NotGrounded(ElementId(1)))));
        assert_eq!(verdict(&p, &floating), StiffnessVerdict::NotGrounded(ElementId(1)));
    }

    #[test]
    fn checker_memoizes() {
        let p = problem(vec![Vec3::zeros(), Vec3::z()], vec![[0, 1]], vec![0], unit_material(), 1.0);
        let mut c = StiffnessChecker::new(&p);
        let full = PartialStructure::full(&p);
        assert!(c.is_stiff(&full));
        assert!(c.is_stiff(&full));
        assert_eq!((c.checks, c.hits, c.cached()), (2, 1, 1));
    }
}
