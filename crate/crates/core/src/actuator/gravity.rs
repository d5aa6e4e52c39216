//! Gravity load on sagittal pitch joints from a planar point-mass chain.

use crate::robot_model::{JointId, JointVector, Link, RobotConstants, Side, GRAVITY};

pub fn is_sagittal_pitch(j: JointId) -> bool {
    matches!(
        j.name().trim_start_matches("left_").trim_start_matches("right_"),
        "hip_pitch" | "knee_pitch" | "ankle_pitch" | "shoulder_pitch" | "elbow_pitch"
    )
}

/// One link of a hanging chain: the link, the joint driving it, and the
/// derivative of the link's absolute angle with respect to that joint.
struct ChainLink {
    link: Link,
    joint: JointId,
    sign: f64,
}

fn chain(j: JointId, c: &RobotConstants) -> Vec<ChainLink> {
    let left = j.side() == Side::Left;
    let pick = |l: JointId, r: JointId| if left { l } else { r };
    if j.index() < 12 {
        vec![
            ChainLink { link: c.thigh, joint: pick(JointId::LEFT_HIP_PITCH, JointId::RIGHT_HIP_PITCH), sign: 1.0 },
            ChainLink { link: c.shank, joint: pick(JointId::LEFT_KNEE_PITCH, JointId::RIGHT_KNEE_PITCH), sign: 1.0 },
            ChainLink { link: c.foot, joint: pick(JointId::LEFT_ANKLE_PITCH, JointId::RIGHT_ANKLE_PITCH), sign: 1.0 },
        ]
    } else {
        vec![
            ChainLink {
                link: c.upper_arm,
                joint: pick(JointId::LEFT_SHOULDER_PITCH, JointId::RIGHT_SHOULDER_PITCH),
                sign: 1.0,
            },
            ChainLink { link: c.lower_arm, joint: pick(JointId::LEFT_ELBOW_PITCH, JointId::RIGHT_ELBOW_PITCH), sign: 1.0 },
        ]
    }
}

/// Static torque (N·m) that gravity exerts against positive motion of `joint`,
/// treating the limb distal to it as a hanging planar chain.
///
/// `τ = Σ mᵢ·g·xᵢ` over distal links, with `xᵢ` the horizontal offset of the
/// link's center of mass from the joint axis, measured in the direction in
/// which positive joint motion lifts it. Non-pitch joints carry no load.
pub fn gravity_torque(joints: &JointVector, joint: JointId, constants: &RobotConstants) -> f64 {
    if !is_sagittal_pitch(joint) {
        return 0.0;
    }
    let links = chain(joint, constants);
    let start = links.iter().position(|l| l.joint == joint).expect("joint belongs to its own chain");

    let mut angle = 0.0;
    let mut x = 0.0;
    let mut joint_x = 0.0;
    let mut moment = 0.0;
    for (k, cl) in links.iter().enumerate() {
        angle += cl.sign * joints[cl.joint];
        if k == start {
            joint_x = x;
        }
        if k >= start {
            moment += cl.link.mass_kg * (x + cl.link.com_m * angle.sin() - joint_x);
        }
        x += cl.link.length_m * angle.sin();
    }
    links[start].sign * GRAVITY * moment
}

pub fn gravity_torques(joints: &JointVector, constants: &RobotConstants) -> JointVector {
    joints.map(|j, _| gravity_torque(joints, j, constants))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn vertical_chain_has_no_moment() {
        let c = RobotConstants::default();
        for j in JointId::all() {
            assert_eq!(gravity_torque(&JointVector::ZERO, j, &c), 0.0);
        }
    }

    #[test]
    fn bent_knee_point_mass() {
        let c = RobotConstants::default();
        let mut q = JointVector::ZERO;
        q[JointId::LEFT_KNEE_PITCH] = FRAC_PI_2;
        // shank + foot = 1.0 kg with its CoM 0.15 m behind the knee
        let tau = gravity_torque(&q, JointId::LEFT_KNEE_PITCH, &c);
        assert!((tau - 1.0 * 9.81 * 0.15).abs() < 1e-12, "{tau}");
    }

    #[test]
    fn non_sagittal_joints_are_excluded() {
        let c = RobotConstants::default();
        let q = JointVector::splat(0.7);
        for j in [JointId::LEFT_ANKLE_ROLL, JointId::RIGHT_HIP_YAW, JointId::NECK_PITCH, JointId::LEFT_SHOULDER_ROLL] {
            assert_eq!(gravity_torque(&q, j, &c), 0.0);
        }
    }

    #[test]
    fn matches_potential_energy_gradient() {
        // finite-difference oracle on the chain's potential energy
        let c = RobotConstants::default();
        let potential = |q: &JointVector| -> f64 {
            let mut v = 0.0;
            for (hip, knee, ankle) in [
                (JointId::LEFT_HIP_PITCH, JointId::LEFT_KNEE_PITCH, JointId::LEFT_ANKLE_PITCH),
                (JointId::RIGHT_HIP_PITCH, JointId::RIGHT_KNEE_PITCH, JointId::RIGHT_ANKLE_PITCH),
            ] {
                let a1 = q[hip];
                let a2 = a1 + q[knee];
                let a3 = a2 + q[ankle];
                let z_knee = -c.thigh.length_m * a1.cos();
                let z_ankle = z_knee - c.shank.length_m * a2.cos();
                v += c.thigh.mass_kg * -c.thigh.com_m * a1.cos();
                v += c.shank.mass_kg * (z_knee - c.shank.com_m * a2.cos());
                v += c.foot.mass_kg * (z_ankle - c.foot.com_m * a3.cos());
            }
            for (sh, el) in [
                (JointId::LEFT_SHOULDER_PITCH, JointId::LEFT_ELBOW_PITCH),
                (JointId::RIGHT_SHOULDER_PITCH, JointId::RIGHT_ELBOW_PITCH),
            ] {
                let a1 = q[sh];
                let a2 = a1 + q[el];
                let z_elbow = -c.upper_arm.length_m * a1.cos();
                v += c.upper_arm.mass_kg * -c.upper_arm.com_m * a1.cos();
                v += c.lower_arm.mass_kg * (z_elbow - c.lower_arm.com_m * a2.cos());
            }
            v * GRAVITY
        };
        let mut q = JointVector::ZERO;
        let vals = [0.3, 0.9, -0.4, 0.0, 0.0, 0.0, -0.2, 1.3, 0.5];
        for (k, j) in [2, 3, 4, 8, 9, 10, 12, 14, 15].iter().enumerate() {
            q[JointId::new(*j).unwrap()] = vals[k];
        }
        for j in JointId::all().filter(|j| is_sagittal_pitch(*j)) {
            let h = 1e-6;
            let mut hi = q;
            let mut lo = q;
            hi[j] += h;
            lo[j] -= h;
            let fd = (potential(&hi) - potential(&lo)) / (2.0 * h);
            let tau = gravity_torque(&q, j, &c);
            assert!((fd - tau).abs() < 1e-6, "{j}: fd {fd} vs {tau}");
        }
    }

    #[test]
    fn symmetric_pose_loads_both_sides_equally() {
        let c = RobotConstants::default();
        let mut q = JointVector::ZERO;
        q[JointId::LEFT_HIP_PITCH] = 0.4;
        q[JointId::LEFT_KNEE_PITCH] = 0.8;
        q[JointId::LEFT_ANKLE_PITCH] = -0.3;
        q[JointId::LEFT_SHOULDER_PITCH] = 0.2;
        q[JointId::LEFT_HIP_ROLL] = 0.1;
        let mut sym = q;
        for j in JointId::all().filter(|j| j.side() == Side::Left) {
            sym[j.mirrored()] = q.mirror()[j.mirrored()];
        }
        assert_eq!(sym.mirror(), sym);
        for j in JointId::all().filter(|j| j.side() == Side::Left) {
            let l = gravity_torque(&sym, j, &c);
            let r = gravity_torque(&sym, j.mirrored(), &c);
            assert!((l - r).abs() < 1e-12);
        }
    }
}
