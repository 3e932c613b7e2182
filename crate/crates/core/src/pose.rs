//! Analytic stand-in for sampling stable poses and probing transition times.
//!
//! The environment is a continuous piecewise-linear potential on `[0, 1]`.
//! Dropping a state at a random position and letting it slide downhill lands
//! it in a local minimum; those minima are the stable states. Moving from one
//! stable state to another takes `distance / speed` plus a penalty for the
//! uphill barrier on the way, and is impossible when the barrier exceeds a
//! budget, the move overruns the time cap, or the target does not hold still.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::access::{access_from_time, AccessibilityMatrix, StateVector, TimeCost, DEFAULT_FLOOR};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SettlingEnvironment {
    /// Breakpoint positions, strictly increasing from 0 to 1.
    xs: Vec<f64>,
    /// Potential at each breakpoint.
    us: Vec<f64>,
    pub speed: f64,
    pub barrier_budget: f64,
    pub barrier_penalty: f64,
}

impl SettlingEnvironment {
    /// Builds an environment from explicit breakpoints with default dynamics.
    pub fn from_breakpoints(xs: Vec<f64>, us: Vec<f64>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("environment: {m}")));
        if xs.len() < 2 || xs.len() != us.len() {
            return bad("need at least two breakpoints with one potential value each");
        }
        if xs[0] != 0.0 || *xs.last().unwrap() != 1.0 {
            return bad("breakpoints must span [0, 1]");
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return bad("breakpoints must be strictly increasing");
        }
        if us.iter().any(|u| !u.is_finite()) {
            return bad("potential values must be finite");
        }
        Ok(Self {
            xs,
            us,
            speed: 1.0,
            barrier_budget: 0.6,
            barrier_penalty: 2.0,
        })
    }

    /// Random landscape with `interior` breakpoints inside `(0, 1)` and
    /// potentials uniform in `[0, 1)`. Redraws until there are at least two
    /// local minima.
    pub fn random(interior: usize, seed: u64) -> Result<Self> {
        if interior < 1 {
            return Err(Error::InvalidArgument(
                "a random environment needs at least one interior breakpoint".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let mut xs: Vec<f64> = (0..interior).map(|_| rng.gen::<f64>()).collect();
            xs.push(0.0);
            xs.push(1.0);
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            if xs[0] != 0.0 || xs.len() < interior + 2 {
                continue;
            }
            let us = (0..xs.len()).map(|_| rng.gen::<f64>()).collect();
            let env = Self::from_breakpoints(xs, us)?;
            if env.local_minima().len() >= 2 {
                return Ok(env);
            }
        }
    }

    pub fn breakpoints(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.us)
    }

    /// Segment containing `x`: the largest `s` with `xs[s] <= x`, capped so
    /// that `s + 1` is valid.
    fn segment(&self, x: f64) -> usize {
        let p = self.xs.partition_point(|&b| b <= x);
        p.saturating_sub(1).min(self.xs.len() - 2)
    }

    pub fn potential(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let s = self.segment(x);
        let (x0, x1) = (self.xs[s], self.xs[s + 1]);
        let (u0, u1) = (self.us[s], self.us[s + 1]);
        let w = (x - x0) / (x1 - x0);
        u0 * (1.0 - w) + u1 * w
    }

    /// Breakpoint indices that are local minima.
    pub fn local_minima(&self) -> Vec<usize> {
        let m = self.xs.len();
        (0..m)
            .filter(|&p| {
                let left_ok = p == 0 || self.us[p - 1] >= self.us[p];
                let right_ok = p + 1 == m || self.us[p + 1] >= self.us[p];
                left_ok && right_ok && self.settle_index(p) == p
            })
            .collect()
    }

    /// Slides from breakpoint `p` to the breakpoint where descent stops.
    fn settle_index(&self, mut p: usize) -> usize {
        let m = self.xs.len();
        let left = (p > 0 && self.us[p - 1] < self.us[p]).then(|| self.us[p - 1]);
        let right = (p + 1 < m && self.us[p + 1] < self.us[p]).then(|| self.us[p + 1]);
        let step: isize = match (left, right) {
            (None, None) => return p,
            (Some(_), None) => -1,
            (None, Some(_)) => 1,
            (Some(l), Some(r)) => {
                if r < l {
                    1
                } else {
                    -1
                }
            }
        };
        loop {
            let next = p as isize + step;
            if next < 0 || next as usize >= m || self.us[next as usize] >= self.us[p] {
                return p;
            }
            p = next as usize;
        }
    }

    /// Position of the local minimum reached by sliding downhill from `x`.
    pub fn descend(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let s = self.segment(x);
        let start = if x == self.xs[s + 1] || (x != self.xs[s] && self.us[s + 1] < self.us[s]) {
            s + 1
        } else {
            s
        };
        self.xs[self.settle_index(start)]
    }

    /// Largest potential on the closed segment between `a` and `b`.
    pub fn max_potential_between(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let start = self.xs.partition_point(|&x| x <= lo);
        let end = self.xs.partition_point(|&x| x < hi);
        self.us[start..end]
            .iter()
            .fold(self.potential(lo).max(self.potential(hi)), |m, &u| m.max(u))
    }

    fn state_at(&self, id: usize, x: f64) -> StateVector {
        StateVector {
            id,
            values: vec![x, self.potential(x)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeProtocol {
    pub time_cap: f64,
    pub floor: f64,
    /// Largest distance between the settled and the commanded state that
    /// still counts as arriving.
    pub closeness_tol: f64,
}

impl Default for ProbeProtocol {
    fn default() -> Self {
        Self {
            time_cap: 3.0,
            floor: DEFAULT_FLOOR,
            closeness_tol: 1e-3,
        }
    }
}

impl ProbeProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_cap > 0.0) {
            return Err(Error::InvalidArgument("time cap must be positive".into()));
        }
        if !(self.floor > 0.0 && self.floor < 1.0) {
            return Err(Error::InvalidArgument("floor must lie in (0, 1)".into()));
        }
        if !(self.closeness_tol >= 0.0) {
            return Err(Error::InvalidArgument("closeness tolerance must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// Drops `count` states at uniform positions, lets each settle, and keeps the
/// distinct minima (within `closeness_tol`) in order of first discovery.
pub fn sample_static_states(
    env: &SettlingEnvironment,
    count: usize,
    seed: u64,
    closeness_tol: f64,
) -> Result<Vec<StateVector>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<f64> = Vec::new();
    for _ in 0..count {
        let x = env.descend(rng.gen::<f64>());
        if !found.iter().any(|&f| (f - x).abs() <= closeness_tol) {
            found.push(x);
        }
    }
    Ok(found
        .into_iter()
        .enumerate()
        .map(|(id, x)| env.state_at(id, x))
        .collect())
}

/// Commands a direct move from `from` to `to` and reports how long it takes.
pub fn probe_transition(
    env: &SettlingEnvironment,
    from: &StateVector,
    to: &StateVector,
    protocol: &ProbeProtocol,
) -> TimeCost {
    let (xf, xt) = (from.values[0], to.values[0]);
    if xf == xt {
        return TimeCost::Seconds(0.0);
    }
    let barrier = (env.max_potential_between(xf, xt) - env.potential(xf)).max(0.0);
    if barrier > env.barrier_budget {
        return TimeCost::Unreachable;
    }
    if (env.descend(xt) - xt).abs() > protocol.closeness_tol {
        return TimeCost::Unreachable;
    }
    let t = (xt - xf).abs() / env.speed + env.barrier_penalty * barrier;
    if t > protocol.time_cap {
        return TimeCost::Unreachable;
    }
    TimeCost::Seconds(t)
}

/// All-pairs probe times, row-major. Rows are probed in parallel.
pub fn probe_times(
    env: &SettlingEnvironment,
    states: &[StateVector],
    protocol: &ProbeProtocol,
) -> Result<Vec<TimeCost>> {
    protocol.validate()?;
    check_distinct(states)?;
    let n = states.len();
    let rows: Vec<Vec<TimeCost>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        TimeCost::Seconds(0.0)
                    } else {
                        probe_transition(env, &states[i], &states[j], protocol)
                    }
                })
                .collect()
        })
        .collect();
    Ok(rows.concat())
}

pub fn estimate_matrix(
    env: &SettlingEnvironment,
    states: &[StateVector],
    protocol: &ProbeProtocol,
) -> Result<AccessibilityMatrix> {
    let times = probe_times(env, states, protocol)?;
    matrix_from_times(states.len(), &times, protocol.floor)
}

pub fn matrix_from_times(n: usize, times: &[TimeCost], floor: f64) -> Result<AccessibilityMatrix> {
    AccessibilityMatrix::from_fn(n, floor, |i, j| access_from_time(times[i * n + j], floor))
}

fn check_distinct(states: &[StateVector]) -> Result<()> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("no states to probe".into()));
    }
    let mut xs: Vec<(f64, usize)> = states.iter().map(|s| (s.values[0], s.id)).collect();
    xs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = xs.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidArgument(format!(
            "states {} and {} coincide",
            w[0].1, w[1].1
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minima at x = 0.2 (u = 0.1) and x = 0.8 (u = 0.3); peak 0.7 at x = 0.5.
    fn two_wells() -> SettlingEnvironment {
        SettlingEnvironment::from_breakpoints(
            vec![0.0, 0.2, 0.5, 0.8, 1.0],
            vec![0.5, 0.1, 0.7, 0.3, 0.9],
        )
        .unwrap()
    }

    fn state(env: &SettlingEnvironment, id: usize, x: f64) -> StateVector {
        env.state_at(id, x)
    }

    #[test]
    fn potential_interpolates() {
        let env = two_wells();
        assert!((env.potential(0.35) - 0.4).abs() < 1e-12);
        assert_eq!(env.potential(1.0), 0.9);
        assert_eq!(env.potential(0.0), 0.5);
    }

    #[test]
    fn descent_reaches_the_basin_minimum() {
        let env = two_wells();
        assert_eq!(env.descend(0.05), 0.2);
        assert_eq!(env.descend(0.45), 0.2);
        assert_eq!(env.descend(0.55), 0.8);
        assert_eq!(env.descend(0.99), 0.8);
        assert_eq!(env.local_minima(), vec![1, 3]);
    }

    #[test]
    fn single_minimum_collapses_to_one_state() {
        let env = SettlingEnvironment::from_breakpoints(vec![0.0, 0.4, 1.0], vec![1.0, 0.0, 0.6]).unwrap();
        let states = sample_static_states(&env, 50, 3, 1e-3).unwrap();
        assert_eq!(states.len(), 1);
        assert_eq!(states[0].values, vec![0.4, 0.0]);
    }

    #[test]
    fn samples_are_minima_and_deterministic() {
        let env = SettlingEnvironment::from_breakpoints(
            vec![0.0, 0.15, 0.3, 0.5, 0.7, 0.85, 1.0],
            vec![0.4, 0.1, 0.6, 0.2, 0.8, 0.05, 0.5],
        )
        .unwrap();
        assert_eq!(env.local_minima().len(), 3);
        let states = sample_static_states(&env, 100, 9, 1e-3).unwrap();
        assert!(states.len() <= 3);
        for s in &states {
            assert_eq!(env.descend(s.values[0]), s.values[0]);
        }
        assert_eq!(states, sample_static_states(&env, 100, 9, 1e-3).unwrap());
    }

    #[test]
    fn random_environment_has_two_minima() {
        for seed in 0..20 {
            let env = SettlingEnvironment::random(5, seed).unwrap();
            assert!(env.local_minima().len() >= 2);
        }
        assert!(SettlingEnvironment::random(0, 0).is_err());
    }

    #[test]
    fn invalid_breakpoints_are_rejected() {
        assert!(SettlingEnvironment::from_breakpoints(vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(SettlingEnvironment::from_breakpoints(vec![0.1, 1.0], vec![0.0, 1.0]).is_err());
        assert!(SettlingEnvironment::from_breakpoints(vec![0.0, 0.5, 0.5, 1.0], vec![0.0; 4]).is_err());
    }

    #[test]
    fn self_probe_is_free() {
        let env = two_wells();
        let s = state(&env, 0, 0.2);
        assert_eq!(probe_transition(&env, &s, &s, &ProbeProtocol::default()), TimeCost::Seconds(0.0));
    }

    #[test]
    fn downhill_probe_costs_distance_over_speed() {
        // Monotone descent from 1.0 (u = 0.5) to 0.5 (u = 0.0).
        let env = SettlingEnvironment::from_breakpoints(vec![0.0, 0.5, 1.0], vec![0.8, 0.0, 0.5]).unwrap();
        let from = StateVector { id: 0, values: vec![1.0, 0.5] };
        let to = state(&env, 1, 0.5);
        let t = probe_transition(&env, &from, &to, &ProbeProtocol::default());
        assert_eq!(t, TimeCost::Seconds(0.5));
    }

    #[test]
    fn high_barrier_is_unreachable() {
        // From the well at 0.2 (u = 0.1) over the 0.9 peak: barrier 0.8 > 0.6.
        let env = SettlingEnvironment::from_breakpoints(
            vec![0.0, 0.2, 0.5, 0.8, 1.0],
            vec![0.5, 0.1, 0.9, 0.3, 0.9],
        )
        .unwrap();
        let (a, b) = (state(&env, 0, 0.2), state(&env, 1, 0.8));
        assert_eq!(probe_transition(&env, &a, &b, &ProbeProtocol::default()), TimeCost::Unreachable);
    }

    #[test]
    fn asymmetric_pair_matches_hand_computation() {
        let env = two_wells();
        let (a, b) = (state(&env, 0, 0.2), state(&env, 1, 0.8));
        let p = ProbeProtocol::default();
        // a -> b: barrier 0.7 - 0.1 = 0.6 (within budget), 0.6 + 2 * 0.6 = 1.8 s.
        // b -> a: barrier 0.7 - 0.3 = 0.4, 0.6 + 2 * 0.4 = 1.4 s.
        let ab = probe_transition(&env, &a, &b, &p).as_seconds().unwrap();
        let ba = probe_transition(&env, &b, &a, &p).as_seconds().unwrap();
        assert!((ab - 1.8).abs() < 1e-12, "{ab}");
        assert!((ba - 1.4).abs() < 1e-12, "{ba}");
        let m = estimate_matrix(&env, &[a, b], &p).unwrap();
        assert!((m.get(0, 1) - (-ab).exp()).abs() < 1e-15);
        assert!((m.get(1, 0) - (-ba).exp()).abs() < 1e-15);
        assert!(m.get(0, 1) < m.get(1, 0));
    }

    #[test]
    fn time_cap_and_arrival_checks() {
        let env = two_wells();
        let (a, b) = (state(&env, 0, 0.2), state(&env, 1, 0.8));
        let tight = ProbeProtocol { time_cap: 1.0, ..Default::default() };
        assert_eq!(probe_transition(&env, &a, &b, &tight), TimeCost::Unreachable);
        // A target on a slope slides away and never holds.
        let slope = StateVector { id: 2, values: vec![0.35, env.potential(0.35)] };
        assert_eq!(probe_transition(&env, &a, &slope, &ProbeProtocol::default()), TimeCost::Unreachable);
    }

    #[test]
    fn single_state_matrix() {
        let env = two_wells();
        let m = estimate_matrix(&env, &[state(&env, 0, 0.2)], &ProbeProtocol::default()).unwrap();
        assert_eq!(m.n(), 1);
        assert_eq!(m.get(0, 0), 1.0);
    }

    #[test]
    fn duplicate_states_are_rejected() {
        let env = two_wells();
        let s = state(&env, 0, 0.2);
        let t = state(&env, 1, 0.2);
        assert!(estimate_matrix(&env, &[s, t], &ProbeProtocol::default()).is_err());
    }

    #[test]
    fn directedness_shows_up_in_random_landscapes() {
        let env = SettlingEnvironment::random(60, 4).unwrap();
        let states = sample_static_states(&env, 200, 1, 1e-3).unwrap();
        let m = estimate_matrix(&env, &states, &ProbeProtocol::default()).unwrap();
        assert!(m.validate().is_ok());
        let n = m.n();
        let strongly_directed = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .any(|(i, j)| m.get(i, j) > 10.0 * m.get(j, i));
        assert!(strongly_directed);
    }
}
