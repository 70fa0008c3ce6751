use crate::error::{Error, Result};

use super::ROW_SUM_TOL;

/// A real-valued state-action table.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self::constant(num_states, num_actions, 0.0)
    }

    pub fn constant(num_states: usize, num_actions: usize, value: f64) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![value; num_states * num_actions],
        }
    }

    pub fn from_vec(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {num_states}x{num_actions} table",
                values.len()
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_actions) {
            return Err(Error::DimensionMismatch("ragged Q rows".into()));
        }
        Self::from_vec(rows.len(), num_actions, rows.concat())
    }

    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(num_states * num_actions);
        for x in 0..num_states {
            for a in 0..num_actions {
                values.push(f(x, a));
            }
        }
        Self {
            num_states,
            num_actions,
            values,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    #[inline]
    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.num_actions + action] = value;
    }

    #[inline]
    pub fn add(&mut self, state: usize, action: usize, delta: f64) {
        self.values[state * self.num_actions + action] += delta;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        let start = state * self.num_actions;
        &self.values[start..start + self.num_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_shape(&self, other: &QTable) -> bool {
        self.num_states == other.num_states && self.num_actions == other.num_actions
    }

    /// Entrywise combination of two same-shaped tables.
    pub fn zip_with(&self, other: &QTable, f: impl Fn(f64, f64) -> f64) -> QTable {
        assert!(
            self.same_shape(other),
            "zip_with on tables of different shape"
        );
        QTable {
            num_states: self.num_states,
            num_actions: self.num_actions,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> QTable {
        QTable {
            num_states: self.num_states,
            num_actions: self.num_actions,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `‖self − other‖∞`.
    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        assert!(
            self.same_shape(other),
            "max_abs_diff on tables of different shape"
        );
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `min over entries of (self − other)`; the slack of `other ≤ self`.
    pub fn min_diff(&self, other: &QTable) -> f64 {
        assert!(
            self.same_shape(other),
            "min_diff on tables of different shape"
        );
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A real-valued state table.
#[derive(Debug, Clone, PartialEq)]
pub struct VTable {
    values: Vec<f64>,
}

impl VTable {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(num_states: usize) -> Self {
        Self::new(vec![0.0; num_states])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, state: usize) -> f64 {
        self.values[state]
    }

    pub fn set(&mut self, state: usize, value: f64) {
        self.values[state] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `min over states of (self − other)`.
    pub fn min_diff(&self, other: &VTable) -> f64 {
        assert_eq!(
            self.len(),
            other.len(),
            "min_diff on tables of different length"
        );
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &VTable) -> f64 {
        assert_eq!(
            self.len(),
            other.len(),
            "max_abs_diff on tables of different length"
        );
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A state-conditional action distribution `π(a|x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    /// Builds a policy from a flattened `[state][action]` table, validating rows.
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || probs.len() != num_states * num_actions {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for a {num_states}x{num_actions} policy",
                probs.len()
            )));
        }
        for (x, row) in probs.chunks(num_actions).enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidPolicy(format!(
                    "row {x} has a negative entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidPolicy(format!("row {x} sums to {sum}")));
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_actions) {
            return Err(Error::DimensionMismatch("ragged policy rows".into()));
        }
        Self::new(rows.len(), num_actions, rows.concat())
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    /// Point-mass policy selecting `actions[x]` in state `x`.
    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self> {
        if let Some(&bad) = actions.iter().find(|&&a| a >= num_actions) {
            return Err(Error::InvalidPolicy(format!(
                "action {bad} out of range for {num_actions} actions"
            )));
        }
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (x, &a) in actions.iter().enumerate() {
            probs[x * num_actions + a] = 1.0;
        }
        Self::new(actions.len(), num_actions, probs)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.num_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        let start = state * self.num_actions;
        &self.probs[start..start + self.num_actions]
    }

    pub fn is_deterministic_row(&self, state: usize) -> bool {
        self.row(state).iter().filter(|&&p| p != 0.0).count() == 1
    }

    pub fn is_deterministic(&self) -> bool {
        (0..self.num_states).all(|x| self.is_deterministic_row(x))
    }

    /// The selected action of every point-mass row, or `None`.
    pub fn actions(&self) -> Option<Vec<usize>> {
        (0..self.num_states)
            .map(|x| {
                let row = self.row(x);
                if self.is_deterministic_row(x) {
                    row.iter().position(|&p| p != 0.0)
                } else {
                    None
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_rows_are_validated() {
        assert!(Policy::new(1, 2, vec![0.5, 0.6]).is_err());
        assert!(Policy::new(1, 2, vec![1.5, -0.5]).is_err());
        assert!(Policy::new(1, 2, vec![0.25, 0.75]).is_ok());
        assert!(Policy::deterministic(&[2], 2).is_err());
    }

    #[test]
    fn deterministic_policy_round_trips_actions() {
        let p = Policy::deterministic(&[1, 0, 2], 3).unwrap();
        assert!(p.is_deterministic());
        assert_eq!(p.actions(), Some(vec![1, 0, 2]));
        assert_eq!(Policy::uniform(2, 2).actions(), None);
    }

    #[test]
    fn table_diffs() {
        let a = QTable::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = QTable::from_rows(&[vec![1.5, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(a.max_abs_diff(&b), 1.0);
        assert_eq!(a.min_diff(&b), -0.5);
        assert_eq!(a.sup_norm(), 4.0);
        assert!(QTable::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
