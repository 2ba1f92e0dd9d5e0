//! Quasi-static planar crawling.
//!
//! Every control step the CPGs set new joint angles, forward kinematics gives
//! the new body shape in the body frame, and the world pose is chosen as the
//! rigid transform that moves the modules as little as possible from where
//! they stood on the ground (a weighted least-squares rigid fit).
//!
//! With equal weights that fit keeps the module centroid fixed forever, so
//! nothing could ever travel. Ground load is therefore shared unevenly: the
//! body splits at every hinge into rigid links, and a link with two or more
//! joints attached is pushed off the ground when those joints bend against
//! each other. The weights depend on the shape alone. A body with one joint
//! keeps uniform weights and cannot move its center of mass; two or more
//! joints cycling out of phase crawl.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{ControllerError, CpgNetwork};
use crate::morphology::BodyPlan;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Seconds of simulated time per evaluation.
    pub eval_time: f64,
    /// Integration and control step in seconds.
    pub dt: f64,
    /// Module edge length in meters.
    pub module_edge: f64,
    /// Joint angle at full controller output, radians.
    pub joint_amplitude: f64,
    /// Fraction of ground load a link loses when two of its joints are bent
    /// half a turn apart.
    pub contact_lift: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            eval_time: 30.0,
            dt: 1.0 / 240.0,
            module_edge: 0.05,
            joint_amplitude: std::f64::consts::FRAC_PI_3,
            contact_lift: 0.9,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("invalid simulation config: {0}")]
    Config(&'static str),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.eval_time > 0.0) {
            return Err(SimError::Config("eval_time must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(SimError::Config("dt must be positive"));
        }
        let n = self.eval_time / self.dt;
        if (n - n.round()).abs() > 1e-6 {
            return Err(SimError::Config(
                "eval_time must be a whole number of steps",
            ));
        }
        if !(0.0..1.0).contains(&self.contact_lift) {
            return Err(SimError::Config("contact_lift must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.eval_time / self.dt).round() as usize
    }
}

/// Rigid planar transform `p -> R(rotation) p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Se2 {
    pub rotation: f64,
    pub translation: Point,
}

impl Se2 {
    pub const IDENTITY: Se2 = Se2 {
        rotation: 0.0,
        translation: [0.0, 0.0],
    };

    pub fn new(rotation: f64, translation: Point) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        self.apply_all(std::slice::from_ref(&p), &mut [[0.0; 2]])[0]
    }

    /// Applies the transform to every point of `src`, writing into `dst`.
    pub fn apply_all<'a>(&self, src: &[Point], dst: &'a mut [Point]) -> &'a [Point] {
        let (s, c) = self.rotation.sin_cos();
        for (d, p) in dst.iter_mut().zip(src) {
            *d = [
                c * p[0] - s * p[1] + self.translation[0],
                s * p[0] + c * p[1] + self.translation[1],
            ];
        }
        dst
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Se2) -> Se2 {
        Se2::new(
            self.rotation + other.rotation,
            self.apply(other.translation),
        )
    }
}

/// Weighted sum of squared distances between `t(q_k)` and `p_k`.
pub fn fit_residual(t: &Se2, prev: &[Point], new: &[Point], weights: Option<&[f64]>) -> f64 {
    prev.iter()
        .zip(new)
        .enumerate()
        .map(|(k, (p, q))| {
            let r = t.apply(*q);
            let w = weights.map_or(1.0, |w| w[k]);
            w * ((r[0] - p[0]).powi(2) + (r[1] - p[1]).powi(2))
        })
        .sum()
}

/// All points coincide, so no rotation is determined. Carries the fallback
/// transform: no rotation, centroid onto centroid.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("degenerate rigid fit: all points coincide")]
pub struct DegenerateFit {
    pub fallback: Se2,
}

/// Least-squares rigid transform taking the body-frame shape `new` onto the
/// previous world positions `prev`.
pub fn crawl_step(prev: &[Point], new: &[Point]) -> Result<Se2, DegenerateFit> {
    weighted_fit(prev, new, None)
}

/// [`crawl_step`] with per-point weights (all must be positive).
pub fn crawl_step_weighted(
    prev: &[Point],
    new: &[Point],
    weights: &[f64],
) -> Result<Se2, DegenerateFit> {
    assert_eq!(weights.len(), prev.len());
    weighted_fit(prev, new, Some(weights))
}

const COINCIDENT: f64 = 1e-12;

fn weighted_fit(
    prev: &[Point],
    new: &[Point],
    weights: Option<&[f64]>,
) -> Result<Se2, DegenerateFit> {
    assert_eq!(prev.len(), new.len());
    assert!(!prev.is_empty(), "rigid fit needs at least one point");
    let w = |k: usize| weights.map_or(1.0, |w| w[k]);
    let mut total = 0.0;
    let (mut pc, mut qc) = ([0.0; 2], [0.0; 2]);
    for k in 0..prev.len() {
        let wk = w(k);
        total += wk;
        pc[0] += wk * prev[k][0];
        pc[1] += wk * prev[k][1];
        qc[0] += wk * new[k][0];
        qc[1] += wk * new[k][1];
    }
    pc = [pc[0] / total, pc[1] / total];
    qc = [qc[0] / total, qc[1] / total];

    let (mut dot, mut cross) = (0.0, 0.0);
    let (mut spread_p, mut spread_q) = (0.0f64, 0.0f64);
    for k in 0..prev.len() {
        let wk = w(k);
        let p = [prev[k][0] - pc[0], prev[k][1] - pc[1]];
        let q = [new[k][0] - qc[0], new[k][1] - qc[1]];
        dot += wk * (q[0] * p[0] + q[1] * p[1]);
        cross += wk * (q[0] * p[1] - q[1] * p[0]);
        spread_p = spread_p.max(p[0].abs().max(p[1].abs()));
        spread_q = spread_q.max(q[0].abs().max(q[1].abs()));
    }
    if spread_p <= COINCIDENT || spread_q <= COINCIDENT {
        return Err(DegenerateFit {
            fallback: Se2::new(0.0, [pc[0] - qc[0], pc[1] - qc[1]]),
        });
    }
    let rotation = cross.atan2(dot);
    let (s, c) = rotation.sin_cos();
    let translation = [
        pc[0] - (c * qc[0] - s * qc[1]),
        pc[1] - (s * qc[0] + c * qc[1]),
    ];
    Ok(Se2::new(rotation, translation))
}

/// Precomputed tree layout for repeated forward kinematics.
#[derive(Debug, Clone)]
pub struct Kinematics {
    rest: Vec<Point>,
    parent: Vec<Option<usize>>,
    joint: Vec<Option<usize>>,
    /// Rigid link of each module.
    link: Vec<usize>,
    /// Joints attached to each link.
    link_joints: Vec<Vec<usize>>,
    rot: Vec<(f64, f64, f64)>,
}

impl Kinematics {
    pub fn new(body: &BodyPlan, module_edge: f64) -> Self {
        let modules = body.modules();
        let rest = modules
            .iter()
            .map(|m| {
                [
                    m.grid_pos.x as f64 * module_edge,
                    m.grid_pos.y as f64 * module_edge,
                ]
            })
            .collect();
        let parent: Vec<_> = modules.iter().map(|m| m.parent).collect();
        let joint: Vec<_> = modules.iter().map(|m| m.joint_index).collect();
        // a hinge's children start a new link; everything else rides with its parent
        let mut link = Vec::with_capacity(modules.len());
        let mut link_joints: Vec<Vec<usize>> = Vec::new();
        for (i, m) in modules.iter().enumerate() {
            let l = match m.parent {
                Some(p) if joint[p].is_some() => {
                    link_joints.push(vec![joint[p].unwrap()]);
                    link_joints.len() - 1
                }
                Some(p) => link[p],
                None => {
                    link_joints.push(Vec::new());
                    0
                }
            };
            link.push(l);
            if let Some(j) = joint[i] {
                link_joints[l].push(j);
            }
        }
        Self {
            rest,
            parent,
            joint,
            link,
            link_joints,
            rot: vec![(0.0, 0.0, 1.0); modules.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.rest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rest.is_empty()
    }

    /// Module centers in the body frame. A hinge turns everything distal to
    /// it about its own center; rotations compose from the core outward.
    pub fn positions_into(&mut self, angles: &[f64], out: &mut [Point]) {
        // rot[i] = (angle, sin, cos) of the rotation applied to i's children
        for i in 0..self.rest.len() {
            let base = match self.parent[i] {
                None => {
                    out[i] = self.rest[i];
                    0.0
                }
                Some(p) => {
                    let (_, s, c) = self.rot[p];
                    let d = [
                        self.rest[i][0] - self.rest[p][0],
                        self.rest[i][1] - self.rest[p][1],
                    ];
                    out[i] = [
                        out[p][0] + c * d[0] - s * d[1],
                        out[p][1] + s * d[0] + c * d[1],
                    ];
                    self.rot[p].0
                }
            };
            let a = base + self.joint[i].map_or(0.0, |j| angles[j]);
            let (s, c) = a.sin_cos();
            self.rot[i] = (a, s, c);
        }
    }

    /// Ground-load weight of every module for the given joint angles.
    ///
    /// A link with joints `a` and `b` attached loses `lift * sin²((θa − θb) / 2)`
    /// of its load, averaged over all joint pairs on the link.
    pub fn contact_into(&self, angles: &[f64], lift: f64, out: &mut [f64]) {
        for (i, w) in out.iter_mut().enumerate() {
            *w = 1.0 - lift * link_bend(&self.link_joints[self.link[i]], angles);
        }
    }

    pub fn n_links(&self) -> usize {
        self.link_joints.len()
    }
}

fn link_bend(joints: &[usize], angles: &[f64]) -> f64 {
    if joints.len() < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (k, &a) in joints.iter().enumerate() {
        for &b in &joints[k + 1..] {
            sum += (0.5 * (angles[a] - angles[b])).sin().powi(2);
            pairs += 1;
        }
    }
    sum / pairs as f64
}

pub fn forward_kinematics(body: &BodyPlan, angles: &[f64], module_edge: f64) -> Vec<Point> {
    assert_eq!(angles.len(), body.n_joints());
    let mut k = Kinematics::new(body, module_edge);
    let mut out = vec![[0.0; 2]; k.len()];
    k.positions_into(angles, &mut out);
    out
}

/// Body-frame pose in the world, sampled every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub com: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub poses: Vec<Pose>,
    pub com_start: Point,
    pub com_end: Point,
}

impl Trajectory {
    /// Rows `t com_x com_y theta`, one per step.
    pub fn to_rows(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("t,com_x,com_y,theta\n");
        for p in &self.poses {
            let _ = writeln!(s, "{},{},{},{}", p.t, p.com[0], p.com[1], p.theta);
        }
        s
    }
}

fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
    [sx / n, sy / n]
}

/// Centroids relative to the start translation.
struct Run {
    com_start: Point,
    com_end: Point,
}

fn run(
    body: &BodyPlan,
    weights: &[f64],
    cfg: &SimConfig,
    start: Se2,
    mut record: Option<&mut Vec<Pose>>,
) -> Result<Run, SimError> {
    cfg.validate()?;
    let mut net = CpgNetwork::for_body(body, weights)?;
    let n = body.n_joints();
    let mut kin = Kinematics::new(body, cfg.module_edge);
    let m = kin.len();

    let mut outputs = vec![0.0; n];
    let mut angles = vec![0.0; n];
    let mut shape = vec![[0.0; 2]; m];
    let mut prev_shape = vec![[0.0; 2]; m];
    let mut world = vec![[0.0; 2]; m];
    let mut contact = vec![1.0; m];

    net.outputs_into(&mut outputs);
    for (a, o) in angles.iter_mut().zip(&outputs) {
        *a = cfg.joint_amplitude * o;
    }
    kin.positions_into(&angles, &mut shape);
    // positions are kept relative to the start translation so that a far-away
    // start does not cost precision in the per-step fits
    let origin = start.translation;
    let shifted = |p: Point| [p[0] + origin[0], p[1] + origin[1]];
    let mut pose = Se2::new(start.rotation, [0.0, 0.0]);
    pose.apply_all(&shape, &mut world);
    let com_start = centroid(&world);
    if let Some(rec) = record.as_deref_mut() {
        rec.push(Pose {
            t: 0.0,
            x: origin[0],
            y: origin[1],
            theta: pose.rotation,
            com: shifted(com_start),
        });
    }

    for step in 1..=cfg.steps() {
        std::mem::swap(&mut shape, &mut prev_shape);
        net.step_into(cfg.dt, &mut outputs);
        for (a, o) in angles.iter_mut().zip(&outputs) {
            *a = cfg.joint_amplitude * o;
        }
        kin.positions_into(&angles, &mut shape);
        // an unchanged shape leaves the pose where it is
        if shape != prev_shape {
            kin.contact_into(&angles, cfg.contact_lift, &mut contact);
            pose = crawl_step_weighted(&world, &shape, &contact).unwrap_or_else(|d| d.fallback);
            pose.apply_all(&shape, &mut world);
        }
        if let Some(rec) = record.as_deref_mut() {
            let [x, y] = shifted(pose.translation);
            rec.push(Pose {
                t: step as f64 * cfg.dt,
                x,
                y,
                theta: pose.rotation,
                com: shifted(centroid(&world)),
            });
        }
    }
    Ok(Run {
        com_start,
        com_end: centroid(&world),
    })
}

/// Full trajectory starting from the given world pose.
pub fn simulate(
    body: &BodyPlan,
    weights: &[f64],
    cfg: &SimConfig,
    start: Se2,
) -> Result<Trajectory, SimError> {
    let mut poses = Vec::with_capacity(cfg.steps() + 1);
    let r = run(body, weights, cfg, start, Some(&mut poses))?;
    Ok(Trajectory {
        poses,
        com_start: [
            r.com_start[0] + start.translation[0],
            r.com_start[1] + start.translation[1],
        ],
        com_end: [
            r.com_end[0] + start.translation[0],
            r.com_end[1] + start.translation[1],
        ],
    })
}

/// Speed of the center of mass in cm/s over the evaluation period.
pub fn evaluate(body: &BodyPlan, weights: &[f64], cfg: &SimConfig) -> Result<f64, SimError> {
    evaluate_from(body, weights, cfg, Se2::IDENTITY)
}

pub fn evaluate_from(
    body: &BodyPlan,
    weights: &[f64],
    cfg: &SimConfig,
    start: Se2,
) -> Result<f64, SimError> {
    if body.n_joints() == 0 {
        CpgNetwork::for_body(body, weights)?;
        return Ok(0.0);
    }
    let r = run(body, weights, cfg, start, None)?;
    let d =
        ((r.com_end[0] - r.com_start[0]).powi(2) + (r.com_end[1] - r.com_start[1]).powi(2)).sqrt();
    Ok(100.0 * d / cfg.eval_time)
}

/// Longest bounding-box side in meters.
pub fn body_length(body: &BodyPlan, module_edge: f64) -> f64 {
    let (w, l) = body.bounding_box();
    w.max(l) as f64 * module_edge
}
