//! Mobility models: random waypoint, mass (inertial), and linear, sampled at
//! a fixed interval with specular boundary reflection.
//!
//! All step functions are pure state transitions; the caller owns the state
//! and the random stream. Draw order is part of the contract so that
//! independent reimplementations can replay trajectories:
//!
//! - random waypoint, on (re)targeting: target.x, target.y, then speed
//!   (speed is drawn only when `v_min < v_max`);
//! - mass, per step: speed perturbation, then heading perturbation
//!   (a zero sigma consumes no generator state).

use thiserror::Error;

use crate::geom::Vec2;
use crate::kernel::RandomStream;

/// Rectangular field with origin (0, 0). Positions are inside inclusive of
/// the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldGeometry {
    pub width: f64,
    pub height: f64,
}

impl Default for FieldGeometry {
    fn default() -> Self {
        FieldGeometry {
            width: 1000.0,
            height: 1000.0,
        }
    }
}

impl FieldGeometry {
    pub fn new(width: f64, height: f64) -> Result<Self, MobilityError> {
        if !(width > 0.0) || !(height > 0.0) {
            return Err(MobilityError::BadParams(format!(
                "field dimensions must be positive, got {width} x {height}"
            )));
        }
        Ok(FieldGeometry { width, height })
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.width / 2.0, self.height / 2.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MobilityModel {
    RandomWaypoint,
    Mass,
    Linear,
}

impl MobilityModel {
    pub const ALL: [MobilityModel; 3] = [
        MobilityModel::RandomWaypoint,
        MobilityModel::Mass,
        MobilityModel::Linear,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MobilityModel::RandomWaypoint => "rwp",
            MobilityModel::Mass => "mass",
            MobilityModel::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<MobilityModel> {
        match s.to_ascii_lowercase().as_str() {
            "rwp" | "random-waypoint" | "randomwaypoint" => Some(MobilityModel::RandomWaypoint),
            "mass" => Some(MobilityModel::Mass),
            "linear" => Some(MobilityModel::Linear),
            _ => None,
        }
    }
}

impl std::fmt::Display for MobilityModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MobilityParams {
    pub model: MobilityModel,
    pub v_min: f64,
    pub v_max: f64,
    /// Pause at each waypoint (random waypoint only), seconds.
    pub pause: f64,
    /// Per-step speed perturbation scale (mass only), m/s.
    pub speed_sigma: f64,
    /// Per-step heading perturbation scale (mass only), radians.
    pub turn_sigma: f64,
    /// Sampling interval, seconds.
    pub sample_interval: f64,
}

impl MobilityParams {
    pub fn validate(&self) -> Result<(), MobilityError> {
        if !(0.0 <= self.v_min && self.v_min <= self.v_max) {
            return Err(MobilityError::BadParams(format!(
                "speeds must satisfy 0 <= v_min <= v_max, got [{}, {}]",
                self.v_min, self.v_max
            )));
        }
        if !(self.sample_interval > 0.0) {
            return Err(MobilityError::BadParams(format!(
                "sample_interval must be positive, got {}",
                self.sample_interval
            )));
        }
        if self.speed_sigma < 0.0 || self.turn_sigma < 0.0 {
            return Err(MobilityError::BadParams(
                "perturbation sigmas must be >= 0".into(),
            ));
        }
        if self.pause < 0.0 {
            return Err(MobilityError::BadParams("pause must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-node kinematic state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobilityState {
    pub position: Vec2,
    pub velocity: Vec2,
    /// Current waypoint (random waypoint only).
    pub target: Option<Vec2>,
    /// Remaining pause at a reached waypoint (random waypoint only), seconds.
    pub pause_remaining: f64,
}

impl MobilityState {
    pub fn at(position: Vec2) -> Self {
        MobilityState {
            position,
            velocity: Vec2::ZERO,
            target: None,
            pause_remaining: 0.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum MobilityError {
    #[error("node count must be >= 1")]
    ZeroNodes,
    #[error("invalid mobility parameters: {0}")]
    BadParams(String),
    #[error(
        "boundary overshoot beyond one fold at ({x}, {y}): sampling interval too coarse for the \
         configured speed"
    )]
    Overshoot { x: f64, y: f64 },
}

/// Draw `n` independent positions, each coordinate uniform over the field.
/// Draw order: x then y per node.
pub fn init_positions(
    n: usize,
    field: &FieldGeometry,
    stream: &mut RandomStream,
) -> Result<Vec<Vec2>, MobilityError> {
    if n == 0 {
        return Err(MobilityError::ZeroNodes);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let x = draw_coord(stream, field.width);
        let y = draw_coord(stream, field.height);
        out.push(Vec2::new(x, y));
    }
    Ok(out)
}

fn draw_coord(stream: &mut RandomStream, extent: f64) -> f64 {
    stream.uniform(0.0, extent).expect("positive field extent")
}

fn draw_speed(stream: &mut RandomStream, p: &MobilityParams) -> f64 {
    if p.v_max > p.v_min {
        stream.uniform(p.v_min, p.v_max).expect("v_min < v_max")
    } else {
        p.v_min
    }
}

/// Initial velocity for a node. Linear nodes take the run-wide `heading` at
/// full `v_max`; mass nodes get a per-node uniform heading and a uniform
/// speed in `[v_min, v_max]`; random-waypoint nodes start idle and pick
/// their first waypoint on the first step.
pub fn init_velocity(
    p: &MobilityParams,
    heading: f64,
    stream: &mut RandomStream,
) -> Vec2 {
    match p.model {
        MobilityModel::RandomWaypoint => Vec2::ZERO,
        MobilityModel::Linear => Vec2::from_heading(heading) * p.v_max,
        MobilityModel::Mass => {
            let h = stream.uniform(0.0, std::f64::consts::TAU).expect("tau > 0");
            let s = draw_speed(stream, p);
            Vec2::from_heading(h) * s
        }
    }
}

/// One random-waypoint step: advance toward the target, snapping to it when
/// the remaining distance fits in this step; on arrival pause, then draw a
/// fresh uniform target and speed. Turns are instantaneous.
pub fn rwp_step(
    s: &MobilityState,
    p: &MobilityParams,
    dt: f64,
    field: &FieldGeometry,
    stream: &mut RandomStream,
) -> MobilityState {
    let mut next = *s;
    if next.pause_remaining > 0.0 {
        next.pause_remaining = (next.pause_remaining - dt).max(0.0);
        if next.pause_remaining == 0.0 {
            retarget(&mut next, p, field, stream);
        }
        return next;
    }
    if next.target.is_none() {
        retarget(&mut next, p, field, stream);
    }
    let target = next.target.expect("retarget sets a waypoint");
    let speed = next.velocity.norm();
    let remaining = next.position.distance(target);
    if remaining <= speed * dt {
        next.position = target;
        next.target = None;
        next.velocity = Vec2::ZERO;
        if p.pause > 0.0 {
            next.pause_remaining = p.pause;
        } else {
            retarget(&mut next, p, field, stream);
        }
    } else {
        next.position += next.velocity * dt;
    }
    next
}

fn retarget(s: &mut MobilityState, p: &MobilityParams, field: &FieldGeometry, stream: &mut RandomStream) {
    let target = Vec2::new(
        draw_coord(stream, field.width),
        draw_coord(stream, field.height),
    );
    let speed = draw_speed(stream, p);
    let to_target = target - s.position;
    let dist = to_target.norm();
    s.target = Some(target);
    s.velocity = if dist > 0.0 {
        to_target * (speed / dist)
    } else {
        Vec2::ZERO
    };
}

/// One mass-model step: speed and heading receive Gaussian increments (speed
/// clamped to `[v_min, v_max]`), then the node advances with the new velocity
/// and reflects off walls. With zero sigmas this is exactly the linear
/// advance rule.
pub fn mass_step(
    s: &MobilityState,
    p: &MobilityParams,
    dt: f64,
    field: &FieldGeometry,
    stream: &mut RandomStream,
) -> Result<MobilityState, MobilityError> {
    let speed = s.velocity.norm();
    let heading = s.velocity.heading();
    let d_speed = stream
        .gaussian(0.0, p.speed_sigma)
        .expect("validated sigma");
    let d_heading = stream.gaussian(0.0, p.turn_sigma).expect("validated sigma");
    let new_speed = (speed + d_speed).clamp(p.v_min, p.v_max);
    let velocity = Vec2::from_heading(heading + d_heading) * new_speed;
    let raw = s.position + velocity * dt;
    let (position, velocity) = reflect(raw, velocity, field)?;
    Ok(MobilityState {
        position,
        velocity,
        target: None,
        pause_remaining: 0.0,
    })
}

/// One linear step: straight-line advance at constant velocity; wall contact
/// applies specular reflection. Speed magnitude is conserved forever.
pub fn linear_step(
    s: &MobilityState,
    dt: f64,
    field: &FieldGeometry,
) -> Result<MobilityState, MobilityError> {
    let raw = s.position + s.velocity * dt;
    let (position, velocity) = reflect(raw, s.velocity, field)?;
    Ok(MobilityState {
        position,
        velocity,
        target: None,
        pause_remaining: 0.0,
    })
}

/// Dispatch one step for the configured model.
pub fn step(
    s: &MobilityState,
    p: &MobilityParams,
    dt: f64,
    field: &FieldGeometry,
    stream: &mut RandomStream,
) -> Result<MobilityState, MobilityError> {
    match p.model {
        MobilityModel::RandomWaypoint => Ok(rwp_step(s, p, dt, field, stream)),
        MobilityModel::Mass => mass_step(s, p, dt, field, stream),
        MobilityModel::Linear => linear_step(s, dt, field),
    }
}

/// Fold a possibly-out-of-field position back by mirror reflection about the
/// violated wall(s), negating the corresponding velocity component(s).
/// In-field inputs are returned unchanged. Overshoot beyond one fold is a
/// configuration error (sampling interval too coarse).
pub fn reflect(
    position: Vec2,
    velocity: Vec2,
    field: &FieldGeometry,
) -> Result<(Vec2, Vec2), MobilityError> {
    let (x, vx) = reflect_axis(position.x, velocity.x, field.width);
    let (y, vy) = reflect_axis(position.y, velocity.y, field.height);
    let pos = Vec2::new(x, y);
    if !field.contains(pos) {
        return Err(MobilityError::Overshoot {
            x: position.x,
            y: position.y,
        });
    }
    Ok((pos, Vec2::new(vx, vy)))
}

fn reflect_axis(coord: f64, vel: f64, extent: f64) -> (f64, f64) {
    if coord < 0.0 {
        (-coord, -vel)
    } else if coord > extent {
        (2.0 * extent - coord, -vel)
    } else {
        (coord, vel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(model: MobilityModel) -> MobilityParams {
        MobilityParams {
            model,
            v_min: 1.0,
            v_max: 5.0,
            pause: 0.0,
            speed_sigma: 0.5,
            turn_sigma: 0.2,
            sample_interval: 1.0,
        }
    }

    #[test]
    fn init_positions_inside_field() {
        let field = FieldGeometry::default();
        let mut stream = RandomStream::new(1, "mobility");
        let ps = init_positions(100, &field, &mut stream).unwrap();
        assert_eq!(ps.len(), 100);
        assert!(ps.iter().all(|p| field.contains(*p)));
    }

    #[test]
    fn init_positions_degenerate_field() {
        let field = FieldGeometry::new(1.0, 1.0).unwrap();
        let mut stream = RandomStream::new(2, "mobility");
        let ps = init_positions(1, &field, &mut stream).unwrap();
        assert!((0.0..=1.0).contains(&ps[0].x) && (0.0..=1.0).contains(&ps[0].y));
    }

    #[test]
    fn init_positions_rejects_zero_nodes() {
        let field = FieldGeometry::default();
        let mut stream = RandomStream::new(3, "mobility");
        assert!(matches!(
            init_positions(0, &field, &mut stream),
            Err(MobilityError::ZeroNodes)
        ));
    }

    #[test]
    fn init_positions_quadrant_counts() {
        // Binomial oracle: each quadrant holds Binomial(n, 1/4); the count
        // must land within 3 sigma of n/4.
        let field = FieldGeometry::default();
        let mut stream = RandomStream::new(4, "mobility");
        let n = 10_000usize;
        let ps = init_positions(n, &field, &mut stream).unwrap();
        let mut counts = [0usize; 4];
        for p in &ps {
            let qx = usize::from(p.x >= 500.0);
            let qy = usize::from(p.y >= 500.0);
            counts[2 * qy + qx] += 1;
        }
        let expected = n as f64 / 4.0;
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for (q, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expected).abs() <= 3.0 * sigma,
                "quadrant {q}: {c} outside 3 sigma of {expected}"
            );
        }
    }

    #[test]
    fn rwp_advances_along_unit_vector() {
        let field = FieldGeometry::default();
        let mut stream = RandomStream::new(5, "mobility");
        let p = params(MobilityModel::RandomWaypoint);
        let s = MobilityState {
            position: Vec2::ZERO,
            velocity: Vec2::new(3.0, 4.0), // speed 5 toward (30, 40)
            target: Some(Vec2::new(30.0, 40.0)),
            pause_remaining: 0.0,
        };
        let next = rwp_step(&s, &p, 1.0, &field, &mut stream);
        assert!((next.position.x - 3.0).abs() < 1e-12);
        assert!((next.position.y - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rwp_snaps_on_arrival_and_redraws() {
        let field = FieldGeometry::default();
        let mut stream = RandomStream::new(6, "mobility");
        let p = params(MobilityModel::RandomWaypoint);
        let target = Vec2::new(30.0, 40.0);
        let pos = Vec2::new(29.9, 39.9);
        let dir = target - pos;
        let s = MobilityState {
            position: pos,
            velocity: dir * (5.0 / dir.norm()),
            target: Some(target),
            pause_remaining: 0.0,
        };
        let next = rwp_step(&s, &p, 1.0, &field, &mut stream);
        // Arrival: the node passed through the waypoint and a fresh target
        // was drawn, so velocity now points at the new waypoint.
        let new_target = next.target.expect("new waypoint drawn");
        assert_ne!(new_target, target);
        assert!(next.velocity.norm() >= p.v_min && next.velocity.norm() <= p.v_max + 1e-12);
        // Within this step the node rests at the old waypoint.
        assert_eq!(next.position, target);
    }

    #[test]
    fn rwp_pause_holds_position() {
        let field = FieldGeometry::default();
        let mut stream = RandomStream::new(7, "mobility");
        let mut p = params(MobilityModel::RandomWaypoint);
        p.pause = 2.0;
        let target = Vec2::new(10.0, 0.0);
        let s = MobilityState {
            position: Vec2::new(9.5, 0.0),
            velocity: Vec2::new(5.0, 0.0),
            target: Some(target),
            pause_remaining: 0.0,
        };
        let s1 = rwp_step(&s, &p, 1.0, &field, &mut stream);
        assert_eq!(s1.position, target);
        assert_eq!(s1.pause_remaining, 2.0);
        let s2 = rwp_step(&s1, &p, 1.0, &field, &mut stream);
        assert_eq!(s2.position, target);
        assert_eq!(s2.pause_remaining, 1.0);
        let s3 = rwp_step(&s2, &p, 1.0, &field, &mut stream);
        assert_eq!(s3.position, target);
        assert!(s3.target.is_some(), "retargeted after pause drained");
    }

    #[test]
    fn rwp_matches_reference_oracle() {
        // Independently coded straight-line advance, replaying the same draw
        // sequence: positions agree within 1e-9 per coordinate for 1000 steps.
        let field = FieldGeometry::default();
        let p = params(MobilityModel::RandomWaypoint);
        let mut stream = RandomStream::new(8, "mobility");
        let mut oracle_stream = RandomStream::new(8, "mobility");

        let mut s = MobilityState::at(Vec2::new(500.0, 500.0));
        let (mut ox, mut oy) = (500.0f64, 500.0f64);
        let (mut tx, mut ty, mut os): (f64, f64, f64) = (0.0, 0.0, 0.0);
        let mut have_target = false;

        for _ in 0..1000 {
            s = rwp_step(&s, &p, 1.0, &field, &mut stream);

            // Reference implementation: scalar arithmetic only.
            if !have_target {
                tx = oracle_stream.uniform(0.0, field.width).unwrap();
                ty = oracle_stream.uniform(0.0, field.height).unwrap();
                os = oracle_stream.uniform(p.v_min, p.v_max).unwrap();
                have_target = true;
            }
            let dx = tx - ox;
            let dy = ty - oy;
            let dist = (dx * dx + dy * dy).sqrt();
            if dist <= os {
                ox = tx;
                oy = ty;
                tx = oracle_stream.uniform(0.0, field.width).unwrap();
                ty = oracle_stream.uniform(0.0, field.height).unwrap();
                os = oracle_stream.uniform(p.v_min, p.v_max).unwrap();
            } else {
                ox += dx / dist * os;
                oy += dy / dist * os;
            }

            assert!(
                (s.position.x - ox).abs() < 1e-9 && (s.position.y - oy).abs() < 1e-9,
                "trajectory diverged: {:?} vs ({ox}, {oy})",
                s.position
            );
        }
    }

    #[test]
    fn mass_zero_noise_is_pure_inertia() {
        let field = FieldGeometry::default();
        let mut stream = RandomStream::new(9, "mobility");
        let mut p = params(MobilityModel::Mass);
        p.speed_sigma = 0.0;
        p.turn_sigma = 0.0;
        p.v_min = 0.0;
        p.v_max = 10.0;
        let s = MobilityState {
            position: Vec2::new(100.0, 100.0),
            velocity: Vec2::new(2.0, 0.0),
            target: None,
            pause_remaining: 0.0,
        };
        let next = mass_step(&s, &p, 1.0, &field, &mut stream).unwrap();
        assert!((next.position.x - 102.0).abs() < 1e-12);
        assert!((next.position.y - 100.0).abs() < 1e-12);
        assert!((next.velocity.x - 2.0).abs() < 1e-12);
        assert_eq!(next.velocity.y, 0.0);
    }

    #[test]
    fn mass_speed_clamped_at_v_max() {
        let field = FieldGeometry::default();
        let mut stream = RandomStream::new(10, "mobility");
        let mut p = params(MobilityModel::Mass);
        p.turn_sigma = 0.0;
        p.speed_sigma = 100.0; // huge perturbations, always clamped
        for _ in 0..50 {
            let s = MobilityState {
                position: Vec2::new(500.0, 500.0),
                velocity: Vec2::new(p.v_max, 0.0),
                target: None,
                pause_remaining: 0.0,
            };
            let next = mass_step(&s, &p, 1.0, &field, &mut stream).unwrap();
            let speed = next.velocity.norm();
            assert!(speed >= p.v_min - 1e-12 && speed <= p.v_max + 1e-12);
        }
    }

    #[test]
    fn mass_heading_change_bounded_by_gaussian_tail() {
        // With turn_sigma = 0.1 the per-step heading change stays within
        // 6 sigma over 1000 steps (tail probability ~2e-9 per step).
        let field = FieldGeometry::new(1e7, 1e7).unwrap(); // avoid reflections
        let mut stream = RandomStream::new(11, "mobility");
        let mut p = params(MobilityModel::Mass);
        p.speed_sigma = 0.0;
        p.turn_sigma = 0.1;
        let mut s = MobilityState {
            position: Vec2::new(5e6, 5e6),
            velocity: Vec2::new(3.0, 0.0),
            target: None,
            pause_remaining: 0.0,
        };
        let mut heading = s.velocity.heading();
        for _ in 0..1000 {
            let next = mass_step(&s, &p, 1.0, &field, &mut stream).unwrap();
            let new_heading = next.velocity.heading();
            let mut delta = (new_heading - heading).rem_euclid(std::f64::consts::TAU);
            if delta > std::f64::consts::PI {
                delta -= std::f64::consts::TAU;
            }
            assert!(delta.abs() <= 0.6, "heading jump {delta} exceeds 6 sigma");
            heading = new_heading;
            s = next;
        }
    }

    #[test]
    fn linear_reflects_specularly_off_right_wall() {
        let field = FieldGeometry::default();
        let s = MobilityState {
            position: Vec2::new(995.0, 500.0),
            velocity: Vec2::new(10.0, 0.0),
            target: None,
            pause_remaining: 0.0,
        };
        let next = linear_step(&s, 1.0, &field).unwrap();
        assert!((next.position.x - 995.0).abs() < 1e-12);
        assert!((next.position.y - 500.0).abs() < 1e-12);
        assert_eq!(next.velocity.x, -10.0);
    }

    #[test]
    fn reflection_preserves_speed() {
        let field = FieldGeometry::default();
        let s = MobilityState {
            position: Vec2::new(500.0, 999.0),
            velocity: Vec2::new(3.0, 4.0),
            target: None,
            pause_remaining: 0.0,
        };
        let next = linear_step(&s, 1.0, &field).unwrap();
        assert_eq!(next.velocity.x, 3.0);
        assert_eq!(next.velocity.y, -4.0);
        assert!((next.velocity.norm() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn linear_long_run_conserves_speed_and_stays_in_field() {
        let field = FieldGeometry::default();
        let mut s = MobilityState {
            position: Vec2::new(123.0, 456.0),
            velocity: Vec2::from_heading(0.77) * 17.0,
            target: None,
            pause_remaining: 0.0,
        };
        for _ in 0..10_000 {
            s = linear_step(&s, 1.0, &field).unwrap();
            assert!(field.contains(s.position));
            let rel = (s.velocity.norm() - 17.0).abs() / 17.0;
            assert!(rel < 1e-12, "speed drift {rel}");
        }
    }

    #[test]
    fn reflect_identity_for_in_field_input() {
        let field = FieldGeometry::default();
        let pos = Vec2::new(10.0, 990.0);
        let vel = Vec2::new(-1.0, 2.0);
        let (p, v) = reflect(pos, vel, &field).unwrap();
        assert_eq!(p, pos);
        assert_eq!(v, vel);
    }

    #[test]
    fn reflect_mirror_fold() {
        let field = FieldGeometry::default();
        let (p, v) = reflect(Vec2::new(1003.0, 500.0), Vec2::new(6.0, 1.0), &field).unwrap();
        assert_eq!(p.x, 997.0);
        assert_eq!(v.x, -6.0);
        assert_eq!(v.y, 1.0);
    }

    #[test]
    fn reflect_corner_overshoot_folds_both_axes() {
        let field = FieldGeometry::default();
        let (p, v) = reflect(Vec2::new(1002.0, -3.0), Vec2::new(5.0, -5.0), &field).unwrap();
        assert_eq!(p, Vec2::new(998.0, 3.0));
        assert_eq!(v, Vec2::new(-5.0, 5.0));
    }

    #[test]
    fn reflect_rejects_overshoot_beyond_one_fold() {
        let field = FieldGeometry::default();
        let res = reflect(Vec2::new(2500.0, 500.0), Vec2::new(1.0, 0.0), &field);
        assert!(matches!(res, Err(MobilityError::Overshoot { .. })));
    }

    #[test]
    fn mass_with_zero_sigmas_equals_linear_advance() {
        let field = FieldGeometry::default();
        let mut stream = RandomStream::new(12, "mobility");
        let mut p = params(MobilityModel::Mass);
        p.speed_sigma = 0.0;
        p.turn_sigma = 0.0;
        p.v_min = 0.0;
        p.v_max = 50.0;
        let mut a = MobilityState {
            position: Vec2::new(990.0, 40.0),
            velocity: Vec2::from_heading(0.3) * 20.0,
            target: None,
            pause_remaining: 0.0,
        };
        let mut b = a;
        for _ in 0..500 {
            a = mass_step(&a, &p, 1.0, &field, &mut stream).unwrap();
            b = linear_step(&b, 1.0, &field).unwrap();
            assert!((a.position.x - b.position.x).abs() < 1e-9);
            assert!((a.position.y - b.position.y).abs() < 1e-9);
        }
    }

    #[test]
    fn fuzz_all_models_stay_in_field() {
        let field = FieldGeometry::default();
        let mut stream = RandomStream::new(13, "mobility-fuzz");
        for model in MobilityModel::ALL {
            let mut p = params(model);
            p.v_max = 25.0;
            let mut init_stream = RandomStream::new(14, "init");
            let positions = init_positions(50, &field, &mut init_stream).unwrap();
            for pos in positions {
                let heading = init_stream.uniform(0.0, std::f64::consts::TAU).unwrap();
                let mut s = MobilityState::at(pos);
                s.velocity = init_velocity(&p, heading, &mut init_stream);
                for _ in 0..200 {
                    let prev = s.position;
                    s = step(&s, &p, 1.0, &field, &mut stream).unwrap();
                    assert!(field.contains(s.position), "{model}: escaped at {}", s.position);
                    if model == MobilityModel::RandomWaypoint {
                        let speed = s.velocity.norm();
                        assert!(speed >= p.v_min - 1e-12 && speed <= p.v_max + 1e-12);
                        assert!(prev.distance(s.position) <= p.v_max * 1.0 + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn trajectories_deterministic_per_seed() {
        let field = FieldGeometry::default();
        let p = params(MobilityModel::Mass);
        let run = |seed: u64| {
            let mut stream = RandomStream::new(seed, "mobility");
            let mut s = MobilityState {
                position: Vec2::new(100.0, 200.0),
                velocity: Vec2::new(1.5, -0.5),
                target: None,
                pause_remaining: 0.0,
            };
            let mut trace = Vec::new();
            for _ in 0..200 {
                s = mass_step(&s, &p, 1.0, &field, &mut stream).unwrap();
                trace.push((s.position.x.to_bits(), s.position.y.to_bits()));
            }
            trace
        };
        assert_eq!(run(77), run(77));
        assert_ne!(run(77), run(78));
    }
}
