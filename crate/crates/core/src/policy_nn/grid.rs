use std::io::Write;

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{LinearModel, StateVector};

/// Evenly spaced closed interval `[min, max]` split into `divisions` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub divisions: usize,
}

impl Axis {
    pub const fn symmetric(half_width: f64, divisions: usize) -> Self {
        Self {
            min: -half_width,
            max: half_width,
            divisions,
        }
    }

    pub fn points(&self) -> usize {
        self.divisions + 1
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / self.divisions as f64
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.max - self.min)
    }

    /// Grid point `i`, computed as `center + half * (2i - n) / n` so that a grid
    /// symmetric about zero is exactly odd: `value(n - i) == -value(i)`.
    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        let n = self.divisions as f64;
        self.center() + self.half_width() * (2.0 * i as f64 - n) / n
    }

    fn validate(&self, field: &'static str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::invalid(field, "need finite min < max"));
        }
        if self.divisions == 0 {
            return Err(Error::invalid(field, "need at least one division"));
        }
        Ok(())
    }
}

/// Discretization of the state box and the action interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// One axis per state component, in `(theta, theta_dot, x, x_dot)` order.
    pub states: [Axis; 4],
    pub action: Axis,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            states: [
                Axis::symmetric(0.175, 20),
                Axis::symmetric(0.35, 20),
                Axis::symmetric(0.1, 20),
                Axis::symmetric(0.2, 20),
            ],
            action: Axis::symmetric(5.0, 20),
        }
    }
}

impl GridSpec {
    /// The default box with `points` grid points on every axis (state and action).
    pub fn with_points(points: usize) -> Self {
        let d = GridSpec::default();
        let n = points.saturating_sub(1);
        Self {
            states: d.states.map(|a| Axis { divisions: n, ..a }),
            action: Axis {
                divisions: n,
                ..d.action
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for a in &self.states {
            a.validate("grid state axis")?;
        }
        self.action.validate("grid action axis")
    }

    pub fn state_count(&self) -> usize {
        self.states.iter().map(Axis::points).product()
    }

    pub fn action_count(&self) -> usize {
        self.action.points()
    }

    /// Per-axis indices of state column `s`; the last component varies fastest.
    pub fn state_indices(&self, mut s: usize) -> [usize; 4] {
        let mut idx = [0; 4];
        for k in (0..4).rev() {
            let n = self.states[k].points();
            idx[k] = s % n;
            s /= n;
        }
        idx
    }

    pub fn state_index(&self, idx: [usize; 4]) -> usize {
        idx.iter()
            .zip(&self.states)
            .fold(0, |acc, (&i, a)| acc * a.points() + i)
    }

    pub fn state_at(&self, s: usize) -> StateVector {
        let idx = self.state_indices(s);
        StateVector::new(
            self.states[0].value(idx[0]),
            self.states[1].value(idx[1]),
            self.states[2].value(idx[2]),
            self.states[3].value(idx[3]),
        )
    }

    pub fn action_at(&self, a: usize) -> f64 {
        self.action.value(a)
    }

    pub fn state_lower(&self) -> [f64; 4] {
        self.states.map(|a| a.min)
    }

    pub fn state_upper(&self) -> [f64; 4] {
        self.states.map(|a| a.max)
    }
}

/// One-step cost `F = X+' Q X+ + R u^2` with `X+ = X + dt (A X + B u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneStepCost {
    pub model: LinearModel,
    /// Prediction step in s.
    pub dt: f64,
    pub q: Matrix4<f64>,
    pub r: f64,
}

impl Default for OneStepCost {
    fn default() -> Self {
        Self {
            model: LinearModel::printed(),
            dt: 0.01,
            q: Matrix4::from_diagonal(&[1.0, 1.0, 50.0, 25.0].into()),
            r: 0.016,
        }
    }
}

impl OneStepCost {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt_nn", "must be > 0"));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::invalid("r_nn", "must be > 0"));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, state: &StateVector, u: f64) -> f64 {
        one_step_cost(state, u, &self.model, self.dt, &self.q, self.r)
    }
}

/// Forward-Euler one-step prediction followed by the quadratic cost.
///
/// Sums run in ascending index order with no fused operations.
#[inline]
pub fn one_step_cost(
    state: &StateVector,
    u: f64,
    model: &LinearModel,
    dt: f64,
    q: &Matrix4<f64>,
    r: f64,
) -> f64 {
    let x = state.to_array();
    let mut next = [0.0; 4];
    for i in 0..4 {
        let mut rate = 0.0;
        for (j, xj) in x.iter().enumerate() {
            rate += model.a[(i, j)] * xj;
        }
        rate += model.b[i] * u;
        next[i] = x[i] + dt * rate;
    }
    let mut cost = 0.0;
    for i in 0..4 {
        let mut row = 0.0;
        for (j, nj) in next.iter().enumerate() {
            row += q[(i, j)] * nj;
        }
        cost += next[i] * row;
    }
    cost + r * u * u
}

/// Default memory budget of a Q-table, 1 GiB.
pub const DEFAULT_QTABLE_BUDGET: usize = 1 << 30;

/// Tabulated one-step cost, actions by states.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub grid: GridSpec,
    /// Row-major `(n_actions, n_states)`.
    costs: Vec<f64>,
}

impl QTable {
    pub fn shape(&self) -> (usize, usize) {
        (self.grid.action_count(), self.grid.state_count())
    }

    #[inline]
    pub fn entry(&self, action: usize, state: usize) -> f64 {
        self.costs[action * self.grid.state_count() + state]
    }

    pub fn row(&self, action: usize) -> &[f64] {
        let n = self.grid.state_count();
        &self.costs[action * n..(action + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.costs
    }

    /// Tables larger than this are refused by [`QTable::write_csv`].
    pub const CSV_MAX_ENTRIES: usize = 100_000;

    /// Long-format CSV: one line per (action, state) cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let (na, ns) = self.shape();
        if na * ns > Self::CSV_MAX_ENTRIES {
            return Err(Error::invalid(
                "qtable",
                format!("{} entries is too large for CSV export", na * ns),
            ));
        }
        writeln!(w, "action,u,state,theta,theta_dot,x,x_dot,cost")?;
        for a in 0..na {
            let u = self.grid.action_at(a);
            for s in 0..ns {
                let x = self.grid.state_at(s);
                writeln!(
                    w,
                    "{a},{u:.16e},{s},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    x.theta,
                    x.theta_dot,
                    x.x,
                    x.x_dot,
                    self.entry(a, s)
                )?;
            }
        }
        Ok(())
    }
}

/// Evaluates the one-step cost on every (action, state) cell of the grid.
pub fn build_qtable(grid: &GridSpec, cost: &OneStepCost, budget_bytes: usize) -> Result<QTable> {
    grid.validate()?;
    cost.validate()?;
    let (na, ns) = (grid.action_count(), grid.state_count());
    let required_bytes = na
        .checked_mul(ns)
        .and_then(|n| n.checked_mul(std::mem::size_of::<f64>()))
        .unwrap_or(usize::MAX);
    if required_bytes > budget_bytes {
        return Err(Error::Capacity {
            required_bytes,
            budget_bytes,
        });
    }

    let mut costs = vec![0.0; na * ns];
    costs
        .par_chunks_mut(ns)
        .enumerate()
        .for_each(|(a, row)| {
            let u = grid.action_at(a);
            for (s, c) in row.iter_mut().enumerate() {
                *c = cost.eval(&grid.state_at(s), u);
            }
        });
    Ok(QTable { grid: *grid, costs })
}

/// Supervised samples: grid states and their cost-minimizing actions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<StateVector>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Index of the cheapest action of one state column. Ties go to the smaller `|u|`, then
/// to the lower index.
pub fn best_action(qtable: &QTable, state: usize) -> usize {
    let grid = &qtable.grid;
    let mut best = 0;
    for a in 1..grid.action_count() {
        let (c, cb) = (qtable.entry(a, state), qtable.entry(best, state));
        if c < cb || (c == cb && grid.action_at(a).abs() < grid.action_at(best).abs()) {
            best = a;
        }
    }
    best
}

/// The per-state argmin policy as a labelled dataset, one sample per grid state.
pub fn extract_policy(qtable: &QTable) -> Dataset {
    let grid = &qtable.grid;
    let ns = grid.state_count();
    let labels: Vec<f64> = (0..ns)
        .into_par_iter()
        .map(|s| grid.action_at(best_action(qtable, s)))
        .collect();
    Dataset {
        inputs: (0..ns).map(|s| grid.state_at(s)).collect(),
        labels,
    }
}
