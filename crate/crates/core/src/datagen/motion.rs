use crate::error::{Result, TctnError};

/// Top-left sprite position and per-frame velocity, in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl MotionState {
    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

/// Moves one coordinate by `vel` inside `[0, max]`, mirroring any overshoot
/// off the wall and flipping the velocity.
fn bounce_axis(pos: f64, vel: f64, max: f64) -> (f64, f64) {
    if max == 0.0 {
        return (0.0, vel);
    }
    let (mut p, mut v) = (pos + vel, vel);
    loop {
        if p > max {
            p = 2.0 * max - p;
        } else if p < 0.0 {
            p = -p;
        } else {
            return (p, v);
        }
        v = -v;
    }
}

/// Advances `state` for `steps` frames inside a `canvas` (height, width) for a
/// sprite of extents `sprite`. The trajectory starts with `state` itself, so
/// it holds `steps + 1` entries.
pub fn simulate_bounce(
    state: MotionState,
    canvas: (usize, usize),
    sprite: (usize, usize),
    steps: usize,
) -> Result<Vec<MotionState>> {
    if sprite.0 > canvas.0 || sprite.1 > canvas.1 {
        return Err(TctnError::config(format!(
            "sprite {sprite:?} larger than canvas {canvas:?}"
        )));
    }
    let max_y = (canvas.0 - sprite.0) as f64;
    let max_x = (canvas.1 - sprite.1) as f64;
    if !(0.0..=max_x).contains(&state.x) || !(0.0..=max_y).contains(&state.y) {
        return Err(TctnError::argument(format!(
            "initial position ({}, {}) outside [0, {max_x}] x [0, {max_y}]",
            state.x, state.y
        )));
    }
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = state;
    out.push(s);
    for _ in 0..steps {
        let (x, vx) = bounce_axis(s.x, s.vx, max_x);
        let (y, vy) = bounce_axis(s.y, s.vy, max_y);
        s = MotionState { x, y, vx, vy };
        out.push(s);
    }
    Ok(out)
}
