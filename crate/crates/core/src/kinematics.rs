//! Configuration space of the extruder and the free-flying default model.

use nalgebra::{Quaternion, UnitQuaternion};
use rand::{Rng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::frame::Vec3;
use crate::geometry::{sample_any_orientation, tool_axis, Aabb, Orientation};

/// Tip position plus world-from-tool orientation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Configuration {
    pub position: Vec3,
    pub orientation: Orientation,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigurationRecord {
    position: [f64; 3],
    /// `[qw, qx, qy, qz]`
    orientation: [f64; 4],
}

impl Serialize for Configuration {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ConfigurationRecord { position: self.position.into(), orientation: orientation_to_array(&self.orientation) }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = ConfigurationRecord::deserialize(d)?;
        if !r.position.iter().all(|c| c.is_finite()) {
            return Err(serde::de::Error::custom("configuration position must be finite"));
        }
        let orientation = orientation_from_array(r.orientation).map_err(serde::de::Error::custom)?;
        Ok(Configuration { position: r.position.into(), orientation })
    }
}

pub fn orientation_to_array(q: &Orientation) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

/// Accepts quaternions whose norm is within 1e-6 of one and normalizes them.
pub fn orientation_from_array(a: [f64; 4]) -> Result<Orientation, String> {
    if !a.iter().all(|c| c.is_finite()) {
        return Err("orientation must be finite".into());
    }
    let q = Quaternion::new(a[0], a[1], a[2], a[3]);
    let n = q.norm();
    if (n - 1.0).abs() > 1e-6 {
        return Err(format!("orientation quaternion has norm {n}, expected 1"));
    }
    Ok(UnitQuaternion::from_quaternion(q))
}

impl Configuration {
    pub fn new(position: Vec3, orientation: Orientation) -> Self {
        Configuration { position, orientation }
    }

    /// Tool axis pointing straight down (180° about x).
    pub fn pointing_down(position: Vec3) -> Self {
        Configuration {
            position,
            orientation: UnitQuaternion::from_quaternion(Quaternion::new(0.0, 1.0, 0.0, 0.0)),
        }
    }

    pub fn tool_axis(&self) -> Vec3 {
        tool_axis(&self.orientation)
    }
}

/// Kinematic model of the extruding robot.
pub trait KinematicModel: Sync {
    fn forward_position(&self, q: &Configuration) -> Vec3;
    fn forward_orientation(&self, q: &Configuration) -> Orientation;
    /// A configuration reaching the tool pose `(p, x_o)`, if one was found.
    fn sample_ik(&self, p: &Vec3, x_o: &Orientation, rng: &mut dyn RngCore) -> Option<Configuration>;
    fn distance(&self, a: &Configuration, b: &Configuration) -> f64;
    fn interpolate(&self, a: &Configuration, b: &Configuration, t: f64) -> Configuration;
    /// Uniform sample of the configuration space.
    fn sample_configuration(&self, rng: &mut dyn RngCore) -> Configuration;
    /// Within the bounded configuration space.
    fn is_valid(&self, q: &Configuration) -> bool;
}

/// A nozzle that can take any pose whose tip lies in the workspace box.
#[derive(Clone, Debug)]
pub struct FreeFlyingExtruder {
    pub workspace: Aabb,
    /// Metres per radian in the configuration distance.
    pub rot_weight: f64,
}

impl FreeFlyingExtruder {
    pub fn new(workspace: Aabb, rot_weight: f64) -> Self {
        FreeFlyingExtruder { workspace, rot_weight }
    }

    pub fn for_problem(problem: &crate::frame::FrameProblem) -> Self {
        Self::new(problem.workspace, problem.rot_weight)
    }
}

/// Shortest-arc spherical interpolation.
pub fn slerp(a: &Orientation, b: &Orientation, t: f64) -> Orientation {
    let (qa, mut qb) = (a.quaternion(), *b.quaternion());
    let mut dot = qa.coords.dot(&qb.coords);
    if dot < 0.0 {
        qb = -qb;
        dot = -dot;
    }
    if dot > 1.0 - 1e-12 {
        return UnitQuaternion::from_quaternion(qa.lerp(&qb, t));
    }
    let theta = dot.min(1.0).acos();
    let s = theta.sin();
    let wa = ((1.0 - t) * theta).sin() / s;
    let wb = (t * theta).sin() / s;
    UnitQuaternion::from_quaternion(qa * wa + qb * wb)
}

impl KinematicModel for FreeFlyingExtruder {
    fn forward_position(&self, q: &Configuration) -> Vec3 {
        q.position
    }

    fn forward_orientation(&self, q: &Configuration) -> Orientation {
        q.orientation
    }

    fn sample_ik(&self, p: &Vec3, x_o: &Orientation, _rng: &mut dyn RngCore) -> Option<Configuration> {
        self.workspace.contains(p).then(|| Configuration::new(*p, *x_o))
    }

    fn distance(&self, a: &Configuration, b: &Configuration) -> f64 {
        (a.position - b.position).norm() + self.rot_weight * a.orientation.angle_to(&b.orientation)
    }

    fn interpolate(&self, a: &Configuration, b: &Configuration, t: f64) -> Configuration {
        if t <= 0.0 {
            return *a;
        }
        if t >= 1.0 {
            return *b;
        }
        Configuration::new(a.position.lerp(&b.position, t), slerp(&a.orientation, &b.orientation, t))
    }

    fn sample_configuration(&self, mut rng: &mut dyn RngCore) -> Configuration {
        let p = self.workspace.sample(&mut rng);
        let o = sample_any_orientation(&mut rng);
        Configuration::new(p, o)
    }

    fn is_valid(&self, q: &Configuration) -> bool {
        self.workspace.contains(&q.position)
    }
}

/// Uniform draw in `[0, n)` through a trait object.
pub fn pick(rng: &mut dyn RngCore, n: usize) -> usize {
    rng.random_range(0..n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> FreeFlyingExtruder {
        FreeFlyingExtruder::new(Aabb::new(Vec3::repeat(-1.0), Vec3::repeat(1.0)), 0.1)
    }

    #[test]
    fn ik_is_identity_inside_workspace() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = Vec3::new(0.1, -0.2, 0.3);
        let o = UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3);
        let q = m.sample_ik(&p, &o, &mut rng).unwrap();
        assert_eq!(m.forward_position(&q), p);
        assert_eq!(m.forward_orientation(&q), o);
        assert!(m.sample_ik(&Vec3::new(2.0, 0.0, 0.0), &o, &mut rng).is_none());
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let m = model();
        let o = UnitQuaternion::identity();
        let a = Configuration::new(Vec3::zeros(), o);
        let b = Configuration::new(Vec3::new(2.0, 0.0, 0.0), o);
        assert_eq!(m.interpolate(&a, &b, 0.0), a);
        assert_eq!(m.interpolate(&a, &b, 1.0), b);
        assert!((m.interpolate(&a, &b, 0.5).position - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn slerp_halves_small_rotation() {
        let axis = Vector3::y_axis();
        let a = UnitQuaternion::from_axis_angle(&axis, 0.3);
        let b = a * UnitQuaternion::from_axis_angle(&axis, 10f64.to_radians());
        let mid = slerp(&a, &b, 0.5);
        let expect = a * UnitQuaternion::from_axis_angle(&axis, 5f64.to_radians());
        assert!(mid.angle_to(&expect) < 1e-9);
        // sign-flipped representation takes the same short arc
        let b_neg = UnitQuaternion::new_unchecked(-b.into_inner());
        assert!(slerp(&a, &b_neg, 0.5).angle_to(&expect) < 1e-9);
    }

    #[test]
    fn configuration_json_round_trip() {
        let q = Configuration::pointing_down(Vec3::new(0.5, 0.25, 1.0));
        let text = serde_json::to_string(&q).unwrap();
        assert_eq!(text, r#"{"position":[0.5,0.25,1.0],"orientation":[0.0,1.0,0.0,0.0]}"#);
        let back: Configuration = serde_json::from_str(&text).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<Configuration>(r#"{"position":[0,0,0],"orientation":[0,0,0,0]}"#).is_err());
    }
}
