//! Intrinsic reward terms used to train basic skills.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Coverage record over a square of `side x side` grids, each `cell_size`
/// world cells wide, centred on `origin`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisitGrid {
    pub origin: (i32, i32),
    pub cell_size: i32,
    pub side: i32,
    visited: Vec<bool>,
}

impl VisitGrid {
    pub fn new(origin: (i32, i32)) -> Self {
        Self::with_shape(origin, 10, 11)
    }

    pub fn with_shape(origin: (i32, i32), cell_size: i32, side: i32) -> Self {
        assert!(cell_size > 0 && side > 0);
        VisitGrid {
            origin,
            cell_size,
            side,
            visited: vec![false; (side * side) as usize],
        }
    }

    /// Grid index of a world cell, if covered.
    pub fn index(&self, pos: (i32, i32)) -> Option<usize> {
        let half = self.side * self.cell_size / 2;
        let gx = (pos.0 - self.origin.0 + half).div_euclid(self.cell_size);
        let gz = (pos.1 - self.origin.1 + half).div_euclid(self.cell_size);
        if (0..self.side).contains(&gx) && (0..self.side).contains(&gz) {
            Some((gz * self.side + gx) as usize)
        } else {
            None
        }
    }

    pub fn is_visited(&self, pos: (i32, i32)) -> bool {
        self.index(pos).is_some_and(|i| self.visited[i])
    }

    pub fn visited_count(&self) -> usize {
        self.visited.iter().filter(|&&v| v).count()
    }

    pub fn capacity(&self) -> usize {
        self.visited.len()
    }
}

/// +1 the first time a grid is entered, 0 afterwards or outside the square.
pub fn state_count_reward(grid: &mut VisitGrid, pos: (i32, i32)) -> f64 {
    match grid.index(pos) {
        Some(i) if !grid.visited[i] => {
            grid.visited[i] = true;
            1.0
        }
        _ => 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseSample {
    /// Distance to the target; `None` when the target is not detected.
    pub distance_to_goal: Option<f64>,
    pub prev_min_distance: Option<f64>,
    /// Cosine between the heading and the direction to the target.
    pub heading_alignment: f64,
    pub pitch_term: f64,
    pub y_depth: i32,
    /// Running minimum (digging down) or maximum (climbing up) of past depths.
    pub prev_extreme_depth: i32,
}

impl Default for PoseSample {
    fn default() -> Self {
        PoseSample {
            distance_to_goal: None,
            prev_min_distance: None,
            heading_alignment: 0.0,
            pitch_term: 1.0,
            y_depth: 0,
            prev_extreme_depth: 0,
        }
    }
}

/// Navigation shaping: alignment plus pitch plus ten times the approach.
pub fn goal_nav_reward(s: &PoseSample, prev_distance: f64) -> f64 {
    let d = s.distance_to_goal.unwrap_or(prev_distance);
    s.heading_alignment + s.pitch_term + 10.0 * (prev_distance - d)
}

/// Reward for getting closer than ever before.
pub fn combat_distance_reward(s: &PoseSample) -> f64 {
    match (s.prev_min_distance, s.distance_to_goal) {
        (Some(m), Some(d)) => (m - d).max(0.0),
        _ => 0.0,
    }
}

pub fn mining_distance_reward(d_prev: Option<f64>, d_now: Option<f64>) -> f64 {
    match (d_prev, d_now) {
        (_, None) => -2.0,
        (_, Some(d)) if d < 1.5 => 2.0,
        (None, Some(_)) => 0.0,
        (Some(p), Some(d)) => p - d,
    }
}

pub fn attack_reward(valid_attack: bool, target_centered: bool) -> f64 {
    match (valid_attack, target_centered) {
        (true, true) => 90.0,
        (true, false) => 1.0,
        _ => 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DepthMode {
    Down,
    Up,
}

pub fn depth_reward(mode: DepthMode, s: &PoseSample) -> f64 {
    let r = match mode {
        DepthMode::Down => s.prev_extreme_depth - s.y_depth,
        DepthMode::Up => s.y_depth - s.prev_extreme_depth,
    };
    f64::from(r.max(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub intrinsic: f64,
    pub extrinsic: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            intrinsic: 1.0,
            extrinsic: 10.0,
        }
    }
}

pub fn combined_reward(intrinsic: f64, extrinsic_success: bool, weights: RewardWeights) -> f64 {
    weights.intrinsic * intrinsic + weights.extrinsic * if extrinsic_success { 1.0 } else { 0.0 }
}

/// Source of an observation/text similarity bonus. No vision-language model
/// ships here; [`ZeroSimilarity`] is the default and [`ScriptedSimilarity`]
/// replays fixed values.
pub trait SimilarityRewardProvider {
    fn similarity_reward(&mut self, step: u64, prompt: &str) -> f64;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroSimilarity;

impl SimilarityRewardProvider for ZeroSimilarity {
    fn similarity_reward(&mut self, _step: u64, _prompt: &str) -> f64 {
        0.0
    }
}

#[derive(Clone, Debug, Default)]
pub struct ScriptedSimilarity {
    pub values: Vec<f64>,
}

impl SimilarityRewardProvider for ScriptedSimilarity {
    fn similarity_reward(&mut self, step: u64, _prompt: &str) -> f64 {
        self.values.get(step as usize).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(d: f64, align: f64) -> PoseSample {
        PoseSample {
            distance_to_goal: Some(d),
            heading_alignment: align,
            ..Default::default()
        }
    }

    #[test]
    fn visit_grid_counts_once() {
        let mut g = VisitGrid::new((0, 0));
        assert_eq!(state_count_reward(&mut g, (0, 0)), 1.0);
        assert_eq!(state_count_reward(&mut g, (0, 0)), 0.0);
        assert_eq!(state_count_reward(&mut g, (4, 4)), 0.0);
        assert_eq!(state_count_reward(&mut g, (10, 0)), 1.0);
        assert_eq!(state_count_reward(&mut g, (60, 0)), 0.0);
        assert_eq!(g.visited_count(), 2);
        assert_eq!(g.capacity(), 121);
    }

    #[test]
    fn visit_grid_bounds() {
        let g = VisitGrid::new((0, 0));
        assert!(g.index((-55, -55)).is_some());
        assert!(g.index((54, 54)).is_some());
        assert!(g.index((55, 0)).is_none());
        assert!(g.index((-56, 0)).is_none());
    }

    #[test]
    fn goal_nav_values() {
        assert_eq!(goal_nav_reward(&at(5.0, 1.0), 5.0), 2.0);
        assert_eq!(goal_nav_reward(&at(4.0, 1.0), 5.0), 12.0);
        assert_eq!(goal_nav_reward(&at(6.0, -1.0), 5.0), -10.0);
    }

    #[test]
    fn combat_values() {
        let s = |m: f64, d: f64| PoseSample {
            prev_min_distance: Some(m),
            distance_to_goal: Some(d),
            ..Default::default()
        };
        assert_eq!(combat_distance_reward(&s(8.0, 6.0)), 2.0);
        assert_eq!(combat_distance_reward(&s(8.0, 9.0)), 0.0);
    }

    #[test]
    fn mining_values() {
        assert_eq!(mining_distance_reward(Some(3.0), Some(1.0)), 2.0);
        assert_eq!(mining_distance_reward(Some(3.0), None), -2.0);
        assert_eq!(mining_distance_reward(Some(4.0), Some(3.0)), 1.0);
        assert_eq!(mining_distance_reward(None, Some(3.0)), 0.0);
    }

    #[test]
    fn attack_values() {
        assert_eq!(attack_reward(true, true), 90.0);
        assert_eq!(attack_reward(true, false), 1.0);
        assert_eq!(attack_reward(false, true), 0.0);
        assert_eq!(attack_reward(false, false), 0.0);
    }

    #[test]
    fn depth_values() {
        let s = |prev: i32, y: i32| PoseSample {
            y_depth: y,
            prev_extreme_depth: prev,
            ..Default::default()
        };
        assert_eq!(depth_reward(DepthMode::Down, &s(-3, -5)), 2.0);
        assert_eq!(depth_reward(DepthMode::Down, &s(-5, -4)), 0.0);
        assert_eq!(depth_reward(DepthMode::Up, &s(-2, 0)), 2.0);
    }

    #[test]
    fn combined_values() {
        let w = |i, e| RewardWeights { intrinsic: i, extrinsic: e };
        assert_eq!(combined_reward(3.5, false, w(1.0, 0.0)), 3.5);
        assert_eq!(combined_reward(3.5, true, w(0.0, 1.0)), 1.0);
        assert_eq!(combined_reward(2.0, true, w(0.5, 10.0)), 11.0);
        assert_eq!(RewardWeights::default(), w(1.0, 10.0));
    }

    #[test]
    fn similarity_providers() {
        assert_eq!(ZeroSimilarity.similarity_reward(3, "x"), 0.0);
        let mut s = ScriptedSimilarity { values: vec![0.5, 0.25] };
        assert_eq!(s.similarity_reward(1, "x"), 0.25);
        assert_eq!(s.similarity_reward(7, "x"), 0.0);
    }
}
