//! Ray maze: procedurally carved wall mazes with lidar observations.
//!
//! The maze is a cell lattice: walls live on the grid lines between cells,
//! carved by randomized depth-first search and then opened further by
//! removing each surviving interior wall with a fixed probability, which
//! introduces loops. Three goal cells each hold +1 (treasure) with
//! probability `p_treasure` or -1 (trap); within an episode only the first
//! goal entered pays out.
//!
//! The agent is a point with a discrete heading (multiples of the turn step,
//! tracked as an integer so opposite turns cancel exactly). It observes
//! `rays` lidar returns spread evenly across the field of view; each return
//! is (distance to wall, wall orientation flag, goal-seen flag), flattened
//! ray-major. Orientation flag 0 means the struck wall runs east-west,
//! 1 means north-south.

use crate::env::{Domain, Env, EnvSpec};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Clearance kept between the agent and any wall it moves up against.
const WALL_STANDOFF: f64 = 1e-3;

/// Axis of a struck wall face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallOrientation {
    /// Wall runs east-west (a horizontal grid line was hit).
    EastWest,
    /// Wall runs north-south (a vertical grid line was hit).
    NorthSouth,
}

/// One lidar return.
#[derive(Debug, Clone, Copy)]
pub struct RayHit {
    /// Distance in cell widths; strictly positive for valid poses.
    pub distance: f64,
    pub orientation: WallOrientation,
    /// True iff the ray passed through a goal cell before the wall.
    pub goal_flag: bool,
}

#[derive(Debug, Clone)]
pub struct RaymazeDomain {
    spec: EnvSpec,
    pub lattice: usize,
    pub p_treasure: f64,
    pub wall_removal_p: f64,
    pub fov: f64,
    pub rays: usize,
    pub turn_step: f64,
    pub move_step: f64,
}

impl RaymazeDomain {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lattice: usize,
        p_treasure: f64,
        fov_deg: f64,
        rays: usize,
        turn_deg: f64,
        move_step: f64,
        steps: usize,
        episodes: usize,
    ) -> Self {
        assert!(lattice >= 2);
        assert!((0.0..=1.0).contains(&p_treasure));
        assert!(rays >= 2);
        Self {
            spec: EnvSpec::new(
                format!("{lattice}x{lattice} wall maze, 3 goal cells"),
                3,
                rays * 3,
                steps,
                episodes,
                1.0,
                true,
            ),
            lattice,
            p_treasure,
            wall_removal_p: 0.15,
            fov: fov_deg.to_radians(),
            rays,
            turn_step: turn_deg.to_radians(),
            move_step,
        }
    }

    /// Reference shape: 8x8 lattice, 90 degree view with 15 rays, 30 degree
    /// turns, half-cell moves, 32 steps per episode, 4 episodes.
    pub fn standard(p_treasure: f64) -> Self {
        Self::new(8, p_treasure, 90.0, 15, 30.0, 0.5, 32, 4)
    }

    fn start_cell(&self) -> (usize, usize) {
        (self.lattice / 2 - 1, self.lattice / 2 - 1)
    }
}

impl Domain for RaymazeDomain {
    type Instance = RaymazeEnv;

    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> RaymazeEnv {
        let n = self.lattice;
        // All walls up, then depth-first carving guarantees connectivity.
        let mut v_walls = vec![true; (n + 1) * n]; // index x * n + y
        let mut h_walls = vec![true; (n + 1) * n]; // index y * n + x
        let mut visited = vec![false; n * n];
        let start = (rng.gen_range(0..n), rng.gen_range(0..n));
        visited[start.0 * n + start.1] = true;
        let mut stack = vec![start];
        while let Some(&(x, y)) = stack.last() {
            let mut neighbors: Vec<(usize, usize)> = Vec::with_capacity(4);
            if x > 0 && !visited[(x - 1) * n + y] {
                neighbors.push((x - 1, y));
            }
            if x + 1 < n && !visited[(x + 1) * n + y] {
                neighbors.push((x + 1, y));
            }
            if y > 0 && !visited[x * n + y - 1] {
                neighbors.push((x, y - 1));
            }
            if y + 1 < n && !visited[x * n + y + 1] {
                neighbors.push((x, y + 1));
            }
            match neighbors.choose(rng) {
                None => {
                    stack.pop();
                }
                Some(&(nx, ny)) => {
                    if nx != x {
                        v_walls[x.max(nx) * n + y] = false;
                    } else {
                        h_walls[y.max(ny) * n + x] = false;
                    }
                    visited[nx * n + ny] = true;
                    stack.push((nx, ny));
                }
            }
        }
        // Open extra passages so the maze has loops.
        for x in 1..n {
            for y in 0..n {
                if v_walls[x * n + y] && rng.gen_bool(self.wall_removal_p) {
                    v_walls[x * n + y] = false;
                }
            }
        }
        for y in 1..n {
            for x in 0..n {
                if h_walls[y * n + x] && rng.gen_bool(self.wall_removal_p) {
                    h_walls[y * n + x] = false;
                }
            }
        }

        let start_cell = self.start_cell();
        let mut goal_cells: Vec<(usize, usize)> = Vec::with_capacity(3);
        while goal_cells.len() < 3 {
            let c = (rng.gen_range(0..n), rng.gen_range(0..n));
            if c != start_cell && !goal_cells.contains(&c) {
                goal_cells.push(c);
            }
        }
        let goal_values: Vec<f64> =
            (0..3).map(|_| if rng.gen_bool(self.p_treasure) { 1.0 } else { -1.0 }).collect();

        let start_pose = Pose {
            x: start_cell.0 as f64 + 0.5,
            y: start_cell.1 as f64 + 0.5,
            heading_steps: 0,
        };
        RaymazeEnv {
            lattice: n,
            v_walls,
            h_walls,
            goal_cells,
            goal_values,
            start_pose,
            pose: start_pose,
            triggered: false,
            fov: self.fov,
            rays: self.rays,
            turn_step: self.turn_step,
            move_step: self.move_step,
        }
    }
}

/// Agent pose. Heading is `heading_steps * turn_step` radians,
/// counterclockwise from east; keeping the integer makes opposite turns
/// exact inverses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading_steps: i64,
}

#[derive(Debug, Clone)]
pub struct RaymazeEnv {
    lattice: usize,
    /// Wall on vertical line x between y and y+1: index x * lattice + y.
    v_walls: Vec<bool>,
    /// Wall on horizontal line y between x and x+1: index y * lattice + x.
    h_walls: Vec<bool>,
    pub goal_cells: Vec<(usize, usize)>,
    pub goal_values: Vec<f64>,
    start_pose: Pose,
    pose: Pose,
    triggered: bool,
    fov: f64,
    rays: usize,
    turn_step: f64,
    move_step: f64,
}

/// Result of walking the grid from a point along a direction: the cells
/// passed through (starting cell first) and the first wall struck.
struct Trace {
    /// (cell, distance at which it was entered); first entry is the starting
    /// cell at distance 0.
    entered: Vec<((usize, usize), f64)>,
    hit_distance: f64,
    hit_orientation: WallOrientation,
}

impl RaymazeEnv {
    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn heading(&self) -> f64 {
        self.pose.heading_steps as f64 * self.turn_step
    }

    pub fn lattice(&self) -> usize {
        self.lattice
    }

    pub fn is_goal(&self, cell: (usize, usize)) -> Option<f64> {
        self.goal_cells.iter().position(|&c| c == cell).map(|i| self.goal_values[i])
    }

    /// Wall on the vertical grid line `x` between rows `y` and `y+1`.
    pub fn v_wall(&self, x: usize, y: usize) -> bool {
        self.v_walls[x * self.lattice + y]
    }

    /// Wall on the horizontal grid line `y` between columns `x` and `x+1`.
    pub fn h_wall(&self, y: usize, x: usize) -> bool {
        self.h_walls[y * self.lattice + x]
    }

    /// Exact traversal: walks cell-boundary crossings in order of distance,
    /// stopping at the first crossing that carries a wall. The maze is fully
    /// enclosed, so a wall is always found.
    fn trace(&self, x: f64, y: f64, angle: f64) -> Trace {
        let (dx, dy) = (angle.cos(), angle.sin());
        let mut cx = (x.floor() as isize).clamp(0, self.lattice as isize - 1);
        let mut cy = (y.floor() as isize).clamp(0, self.lattice as isize - 1);
        let mut entered = vec![((cx as usize, cy as usize), 0.0)];

        let step_x: isize = if dx > 0.0 { 1 } else { -1 };
        let step_y: isize = if dy > 0.0 { 1 } else { -1 };
        let inv_dx = if dx == 0.0 { f64::INFINITY } else { 1.0 / dx.abs() };
        let inv_dy = if dy == 0.0 { f64::INFINITY } else { 1.0 / dy.abs() };
        let mut tx = if dx > 0.0 {
            ((cx + 1) as f64 - x) * inv_dx
        } else {
            (x - cx as f64) * inv_dx
        };
        let mut ty = if dy > 0.0 {
            ((cy + 1) as f64 - y) * inv_dy
        } else {
            (y - cy as f64) * inv_dy
        };

        loop {
            if tx <= ty {
                // Crossing the vertical line at x = cx or cx+1.
                let line = if step_x > 0 { cx + 1 } else { cx } as usize;
                if self.v_wall(line, cy as usize) {
                    return Trace {
                        entered,
                        hit_distance: tx,
                        hit_orientation: WallOrientation::NorthSouth,
                    };
                }
                cx += step_x;
                entered.push(((cx as usize, cy as usize), tx));
                tx += inv_dx;
            } else {
                let line = if step_y > 0 { cy + 1 } else { cy } as usize;
                if self.h_wall(line, cx as usize) {
                    return Trace {
                        entered,
                        hit_distance: ty,
                        hit_orientation: WallOrientation::EastWest,
                    };
                }
                cy += step_y;
                entered.push(((cx as usize, cy as usize), ty));
                ty += inv_dy;
            }
        }
    }

    /// Casts one ray from (x, y) at an absolute angle.
    pub fn raycast(&self, x: f64, y: f64, angle: f64) -> RayHit {
        let trace = self.trace(x, y, angle);
        let goal_flag = trace
            .entered
            .iter()
            .any(|&(cell, t)| t < trace.hit_distance && self.is_goal(cell).is_some());
        debug_assert!(trace.hit_distance > 0.0);
        RayHit {
            distance: trace.hit_distance,
            orientation: trace.hit_orientation,
            goal_flag,
        }
    }

    /// The 15-ray (by default) lidar sweep at the current pose, flattened
    /// ray-major as (distance, orientation flag, goal flag) triples.
    pub fn observe(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(self.rays * 3);
        let heading = self.heading();
        for i in 0..self.rays {
            let offset = -self.fov / 2.0 + self.fov * i as f64 / (self.rays - 1) as f64;
            let hit = self.raycast(self.pose.x, self.pose.y, heading + offset);
            obs.push(hit.distance);
            obs.push(match hit.orientation {
                WallOrientation::EastWest => 0.0,
                WallOrientation::NorthSouth => 1.0,
            });
            obs.push(if hit.goal_flag { 1.0 } else { 0.0 });
        }
        obs
    }

    /// Moves forward up to `move_step`, stopping short of walls, and settles
    /// goal triggering for every cell newly entered along the way.
    ///
    /// The stop point also keeps the standoff from open cell boundaries, so
    /// the agent never rests exactly on a grid line; every pose stays
    /// strictly inside a cell, which keeps ray distances strictly positive.
    fn forward(&mut self) -> f64 {
        let angle = self.heading();
        let trace = self.trace(self.pose.x, self.pose.y, angle);
        let mut travel = (trace.hit_distance - WALL_STANDOFF).clamp(0.0, self.move_step);
        for &(_, t) in trace.entered.iter().skip(1).rev() {
            if travel > t - WALL_STANDOFF && travel < t + WALL_STANDOFF {
                travel = (t - WALL_STANDOFF).max(0.0);
            }
        }
        self.pose.x += angle.cos() * travel;
        self.pose.y += angle.sin() * travel;
        let mut reward = 0.0;
        for &(cell, t) in trace.entered.iter().skip(1) {
            if t > travel {
                break;
            }
            if !self.triggered {
                if let Some(value) = self.is_goal(cell) {
                    self.triggered = true;
                    reward = value;
                }
            }
        }
        reward
    }
}

impl Env for RaymazeEnv {
    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.pose = self.start_pose;
        self.triggered = false;
        self.observe()
    }

    fn step(&mut self, action: usize, _rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
        let reward = match action {
            0 => {
                self.pose.heading_steps += 1;
                0.0
            }
            1 => self.forward(),
            2 => {
                self.pose.heading_steps -= 1;
                0.0
            }
            _ => panic!("action {action} out of range"),
        };
        (self.observe(), reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::mean_std_indexed;
    use crate::rng::stream_rng;

    fn sampled(seed: u64, idx: u64) -> RaymazeEnv {
        let domain = RaymazeDomain::standard(0.3);
        let mut rng = stream_rng(seed, "test.maze", idx);
        domain.sample(&mut rng)
    }

    /// Single fully walled cell with the agent at its center.
    fn one_cell_room() -> RaymazeEnv {
        RaymazeEnv {
            lattice: 1,
            v_walls: vec![true, true],
            h_walls: vec![true, true],
            goal_cells: vec![],
            goal_values: vec![],
            start_pose: Pose { x: 0.5, y: 0.5, heading_steps: 0 },
            pose: Pose { x: 0.5, y: 0.5, heading_steps: 0 },
            triggered: false,
            fov: 90f64.to_radians(),
            rays: 15,
            turn_step: 30f64.to_radians(),
            move_step: 0.5,
        }
    }

    #[test]
    fn centered_ray_hits_each_face_at_half() {
        let env = one_cell_room();
        for (angle, orientation) in [
            (0.0, WallOrientation::NorthSouth),
            (std::f64::consts::FRAC_PI_2, WallOrientation::EastWest),
            (std::f64::consts::PI, WallOrientation::NorthSouth),
            (-std::f64::consts::FRAC_PI_2, WallOrientation::EastWest),
        ] {
            let hit = env.raycast(0.5, 0.5, angle);
            assert!((hit.distance - 0.5).abs() < 1e-9, "angle {angle}: {}", hit.distance);
            assert_eq!(hit.orientation, orientation);
            assert!(!hit.goal_flag);
        }
    }

    #[test]
    fn parallel_ray_between_walls_reaches_far_boundary() {
        // 2x1 corridor along x: side walls everywhere, interior wall open.
        let env = RaymazeEnv {
            lattice: 2,
            // v line x=0: both walls; x=1: open at y=0; x=2: walls.
            v_walls: vec![true, true, false, true, true, true],
            h_walls: vec![true, true, true, true, true, true],
            goal_cells: vec![],
            goal_values: vec![],
            start_pose: Pose { x: 0.5, y: 0.5, heading_steps: 0 },
            pose: Pose { x: 0.5, y: 0.5, heading_steps: 0 },
            triggered: false,
            fov: 90f64.to_radians(),
            rays: 15,
            turn_step: 30f64.to_radians(),
            move_step: 0.5,
        };
        // The ray runs parallel to (and between) the two horizontal walls of
        // the corridor and must hit the far east boundary.
        let hit = env.raycast(0.5, 0.5, 0.0);
        assert!((hit.distance - 1.5).abs() < 1e-9);
        assert_eq!(hit.orientation, WallOrientation::NorthSouth);
    }

    #[test]
    fn sampled_mazes_are_fully_connected() {
        for i in 0..500 {
            let env = sampled(1, i);
            let n = env.lattice;
            let mut seen = vec![false; n * n];
            let mut queue = vec![(n / 2 - 1, n / 2 - 1)];
            seen[(n / 2 - 1) * n + (n / 2 - 1)] = true;
            while let Some((x, y)) = queue.pop() {
                let mut push = |nx: usize, ny: usize| {
                    if !seen[nx * n + ny] {
                        seen[nx * n + ny] = true;
                        queue.push((nx, ny));
                    }
                };
                if x > 0 && !env.v_wall(x, y) {
                    push(x - 1, y);
                }
                if x + 1 < n && !env.v_wall(x + 1, y) {
                    push(x + 1, y);
                }
                if y > 0 && !env.h_wall(y, x) {
                    push(x, y - 1);
                }
                if y + 1 < n && !env.h_wall(y + 1, x) {
                    push(x, y + 1);
                }
            }
            assert!(seen.iter().all(|&s| s), "maze {i} has unreachable cells");
        }
    }

    #[test]
    fn goal_statistics_match_declared_probabilities() {
        let (frac, _) = mean_std_indexed(200_000, |i| {
            let env = sampled(2, i as u64);
            env.goal_values.iter().filter(|&&v| v > 0.0).count() as f64 / 3.0
        });
        assert!((frac - 0.3).abs() < 0.002, "treasure fraction {frac}");
        let (any, _) = mean_std_indexed(200_000, |i| {
            let env = sampled(3, i as u64);
            if env.goal_values.iter().any(|&v| v > 0.0) { 1.0 } else { 0.0 }
        });
        assert!((any - 0.657).abs() < 0.003, "P(any treasure) {any}");
    }

    #[test]
    fn goals_are_distinct_and_off_start() {
        for i in 0..500 {
            let env = sampled(4, i);
            assert_eq!(env.goal_cells.len(), 3);
            assert!(!env.goal_cells.contains(&(3, 3)));
            assert_ne!(env.goal_cells[0], env.goal_cells[1]);
            assert_ne!(env.goal_cells[0], env.goal_cells[2]);
            assert_ne!(env.goal_cells[1], env.goal_cells[2]);
        }
    }

    #[test]
    fn observation_shape_and_positive_distances() {
        let mut env = sampled(5, 0);
        let mut rng = stream_rng(5, "test.maze.obs", 0);
        let obs = env.reset(&mut rng);
        assert_eq!(obs.len(), 45);
        for i in 0..15 {
            assert!(obs[3 * i] > 0.0, "ray {i} distance {}", obs[3 * i]);
            assert!(obs[3 * i + 1] == 0.0 || obs[3 * i + 1] == 1.0);
            assert!(obs[3 * i + 2] == 0.0 || obs[3 * i + 2] == 1.0);
        }
    }

    #[test]
    fn spinning_never_scores_and_turns_cancel_exactly() {
        let mut env = sampled(6, 0);
        let mut rng = stream_rng(6, "test.maze.spin", 0);
        env.reset(&mut rng);
        let start = env.pose();
        let mut total = 0.0;
        for _ in 0..16 {
            total += env.step(0, &mut rng).1;
            total += env.step(2, &mut rng).1;
        }
        assert_eq!(total, 0.0);
        assert_eq!(env.pose(), start);
    }

    #[test]
    fn first_trigger_locks_the_episode() {
        // Corridor of 3 cells: treasure at (1,0), trap at (2,0); walking east
        // through both must pay exactly +1, and the next episode re-arms.
        let mut env = RaymazeEnv {
            lattice: 3,
            v_walls: vec![
                true, true, true, // x=0
                false, true, true, // x=1 (open at y=0)
                false, true, true, // x=2 (open at y=0)
                true, true, true, // x=3
            ],
            h_walls: vec![true; 12],
            goal_cells: vec![(1, 0), (2, 0)],
            goal_values: vec![1.0, -1.0],
            start_pose: Pose { x: 0.5, y: 0.5, heading_steps: 0 },
            pose: Pose { x: 0.5, y: 0.5, heading_steps: 0 },
            triggered: false,
            fov: 90f64.to_radians(),
            rays: 15,
            turn_step: 30f64.to_radians(),
            move_step: 0.5,
        };
        let mut rng = stream_rng(7, "test.maze.trigger", 0);
        env.reset(&mut rng);
        let mut episode_total = 0.0;
        for _ in 0..8 {
            episode_total += env.step(1, &mut rng).1;
        }
        assert_eq!(episode_total, 1.0);
        // Fresh episode: trigger re-arms, same first treasure pays again.
        env.reset(&mut rng);
        assert_eq!((0..8).map(|_| env.step(1, &mut rng).1).sum::<f64>(), 1.0);
    }

    #[test]
    fn forward_and_turn_do_not_commute() {
        let mut rng = stream_rng(8, "test.maze.comm", 0);
        let mut a = sampled(8, 0);
        a.reset(&mut rng);
        a.step(1, &mut rng);
        a.step(0, &mut rng);
        let mut b = sampled(8, 0);
        b.reset(&mut rng);
        b.step(0, &mut rng);
        b.step(1, &mut rng);
        assert_ne!(a.pose(), b.pose());
    }

    #[test]
    fn walls_block_and_standoff_holds() {
        let mut env = one_cell_room();
        let mut rng = stream_rng(9, "test.maze.block", 0);
        env.reset(&mut rng);
        env.step(1, &mut rng);
        let pose = env.pose();
        assert!((pose.x - (1.0 - WALL_STANDOFF)).abs() < 1e-12);
        // Pressing into the wall again must not tunnel through it.
        env.step(1, &mut rng);
        assert!(env.pose().x <= 1.0 - WALL_STANDOFF + 1e-12);
        assert_eq!(env.pose().y, pose.y);
    }

    #[test]
    fn raycast_agrees_with_fine_marching() {
        // Smoke-scale version of the acceptance run: 500 random poses.
        let mut mismatches = 0;
        for i in 0..500 {
            let env = sampled(10, i);
            let mut rng = stream_rng(10, "test.maze.march", i);
            let (x, y, angle) = random_open_pose(&env, &mut rng);
            let exact = env.raycast(x, y, angle);
            let (march_d, march_goal) = march(&env, x, y, angle);
            if (exact.distance - march_d).abs() > 2e-3 || exact.goal_flag != march_goal {
                mismatches += 1;
            }
        }
        assert_eq!(mismatches, 0);
    }

    /// Uniform pose in open space, kept away from grid lines so the marching
    /// oracle's cell attribution is unambiguous.
    pub(super) fn random_open_pose(env: &RaymazeEnv, rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
        let n = env.lattice as f64;
        loop {
            let x = rng.gen_range(0.0..n);
            let y = rng.gen_range(0.0..n);
            let margin = 4e-3;
            if (x - x.round()).abs() > margin && (y - y.round()).abs() > margin {
                return (x, y, rng.gen_range(0.0..std::f64::consts::TAU));
            }
        }
    }

    /// Brute-force oracle: march in 1e-3 steps and report the step at which
    /// a wall-bearing grid line was crossed. When one step crosses both an
    /// x and a y line, the crossings are checked in the order the continuous
    /// ray meets them, with the transverse coordinate evaluated at each
    /// crossing point.
    pub(super) fn march(env: &RaymazeEnv, x: f64, y: f64, angle: f64) -> (f64, bool) {
        let (dx, dy) = (angle.cos(), angle.sin());
        let step = 1e-3;
        let mut cell = (x.floor() as isize, y.floor() as isize);
        let mut goal = env.is_goal((cell.0 as usize, cell.1 as usize)).is_some();
        let mut t = 0.0;
        loop {
            t += step;
            assert!(t < 30.0, "marching oracle ran off the maze");
            let (px, py) = (x + dx * t, y + dy * t);
            let next = (px.floor() as isize, py.floor() as isize);
            if next == cell {
                continue;
            }
            let mut crossings: Vec<(f64, bool)> = Vec::with_capacity(2); // (exact t, is_x_line)
            if next.0 != cell.0 {
                let line = cell.0.max(next.0) as f64;
                crossings.push(((line - x) / dx, true));
            }
            if next.1 != cell.1 {
                let line = cell.1.max(next.1) as f64;
                crossings.push(((line - y) / dy, false));
            }
            crossings.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for (tc, is_x_line) in crossings {
                if is_x_line {
                    let line = cell.0.max(next.0) as usize;
                    let row = (y + dy * tc).floor() as usize;
                    if env.v_wall(line, row) {
                        return (t, goal);
                    }
                    cell.0 = next.0;
                } else {
                    let line = cell.1.max(next.1) as usize;
                    let col = (x + dx * tc).floor() as usize;
                    if env.h_wall(line, col) {
                        return (t, goal);
                    }
                    cell.1 = next.1;
                }
                goal = goal || env.is_goal((cell.0 as usize, cell.1 as usize)).is_some();
            }
        }
    }

    #[test]
    fn random_rollouts_land_in_the_reported_band() {
        let domain = RaymazeDomain::standard(0.3);
        let spec = domain.spec().clone();
        let (mean, _) = mean_std_indexed(2000, |i| {
            let mut rng = stream_rng(11, "test.maze.random", i as u64);
            let mut env = domain.sample(&mut rng);
            let mut total = 0.0;
            for _ in 0..spec.episodes_per_rollout {
                env.reset(&mut rng);
                for _ in 0..spec.episode_len {
                    let a = rng.gen_range(0..3);
                    total += env.step(a, &mut rng).1;
                }
            }
            total
        });
        assert!((-0.8..0.0).contains(&mean), "random cumulative {mean}");
    }
}
