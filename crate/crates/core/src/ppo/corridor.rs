//! Five-cell corridor with a known optimum, for sanity-checking the trainer.
//!
//! The agent starts in cell 0 and moves left (action 0, clamped) or right
//! (action 1). Reaching cell 4 pays +1 and ends the episode; every other
//! step costs 0.1; episodes are cut after 20 steps. Observations are one-hot
//! cell indicators. The optimal return is `1 - 3 * 0.1 = 0.7`.

use alloc::vec;
use alloc::vec::Vec;

use super::{Environment, Step};
use crate::error::{Error, Result};

pub const CELLS: usize = 5;
pub const MAX_STEPS: usize = 20;
pub const STEP_COST: f64 = 0.1;
pub const GOAL_REWARD: f64 = 1.0;
pub const OPTIMAL_RETURN: f64 = GOAL_REWARD - (CELLS as f64 - 2.0) * STEP_COST;

#[derive(Debug, Clone, Default)]
pub struct Corridor {
    cell: usize,
    steps: usize,
}

impl Corridor {
    pub fn new() -> Self {
        Corridor::default()
    }

    fn obs(&self) -> Vec<f64> {
        let mut o = vec![0.0; CELLS];
        o[self.cell] = 1.0;
        o
    }
}

impl Environment for Corridor {
    fn observation_len(&self) -> usize {
        CELLS
    }

    fn action_components(&self) -> Vec<usize> {
        vec![2]
    }

    fn reset(&mut self, _seed: u64) -> Result<Vec<f64>> {
        self.cell = 0;
        self.steps = 0;
        Ok(self.obs())
    }

    fn step(&mut self, action: &[usize]) -> Result<Step> {
        match action {
            [0] => self.cell = self.cell.saturating_sub(1),
            [1] => self.cell += 1,
            _ => return Err(Error::Action("corridor takes a single 0/1 action".into())),
        }
        self.steps += 1;
        let (reward, done) = if self.cell == CELLS - 1 {
            (GOAL_REWARD, true)
        } else {
            (-STEP_COST, self.steps >= MAX_STEPS)
        };
        Ok(Step {
            observation: self.obs(),
            reward,
            done,
        })
    }
}
