//! Proportional prioritized replay over a FIFO buffer.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seeding::Rng;

/// Binary tree of partial sums over a fixed number of leaves.
///
/// Parent nodes are recomputed from their children on each update, so the
/// stored sums never drift from the leaves.
#[derive(Debug, Clone)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        Self {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, index: usize) -> f64 {
        self.nodes[self.leaves + index]
    }

    pub fn set(&mut self, index: usize, value: f64) {
        let mut node = self.leaves + index;
        self.nodes[node] = value;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf whose cumulative interval contains `mass`, for `0 <= mass < total`.
    /// Never returns a zero-valued leaf.
    pub fn find(&self, mut mass: f64) -> usize {
        let mut node = 1;
        while node < self.leaves {
            let left = 2 * node;
            if mass < self.nodes[left] || self.nodes[left + 1] <= 0.0 {
                node = left;
            } else {
                mass -= self.nodes[left];
                node = left + 1;
            }
        }
        node - self.leaves
    }
}

/// Prioritized replay: item `i` with priority `s_i` is drawn with
/// probability `p_i = s_i^α / Σ_j s_j^α` and carries the importance weight
/// `(N p_i)^{-β}`.
#[derive(Debug, Clone)]
pub struct PrioritizedReplay<T> {
    capacity: usize,
    alpha: f64,
    beta: f64,
    items: Vec<T>,
    next: usize,
    tree: SumTree,
}

/// One draw from the buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub index: usize,
    pub probability: f64,
    pub weight: f64,
}

impl<T> PrioritizedReplay<T> {
    pub fn new(capacity: usize, alpha: f64, beta: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig(
                "replay capacity must be positive".into(),
            ));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) || !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig(
                "priority exponents must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            capacity,
            alpha,
            beta,
            items: Vec::with_capacity(capacity),
            next: 0,
            tree: SumTree::new(capacity),
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, index: usize) -> &T {
        &self.items[index]
    }

    fn scaled(&self, priority: f64) -> f64 {
        debug_assert!(priority > 0.0, "replay priorities must be positive");
        priority.powf(self.alpha)
    }

    /// Stores `item`, evicting the oldest entry once full. Returns its slot.
    pub fn push(&mut self, item: T, priority: f64) -> usize {
        let slot = self.next;
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[slot] = item;
        }
        self.tree.set(slot, self.scaled(priority));
        self.next = (slot + 1) % self.capacity;
        slot
    }

    pub fn update_priority(&mut self, index: usize, priority: f64) {
        let scaled = self.scaled(priority);
        self.tree.set(index, scaled);
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.tree.get(index) / self.tree.total()
    }

    pub fn weight(&self, probability: f64) -> f64 {
        (self.items.len() as f64 * probability).powf(-self.beta)
    }

    /// Draws `batch` indices independently, with replacement.
    pub fn sample(&self, batch: usize, rng: &mut Rng) -> Result<Vec<Sample>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let total = self.tree.total();
        Ok((0..batch)
            .map(|_| {
                let index = self.tree.find(rng.random::<f64>() * total);
                let probability = self.probability(index);
                Sample {
                    index,
                    probability,
                    weight: self.weight(probability),
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from_seed;

    #[test]
    fn sum_tree_sums_and_finds() {
        let mut t = SumTree::new(5);
        for (i, v) in [1.0, 2.0, 3.0, 4.0, 0.0].iter().enumerate() {
            t.set(i, *v);
        }
        assert_eq!(t.total(), 10.0);
        assert_eq!(t.find(0.0), 0);
        assert_eq!(t.find(0.999), 0);
        assert_eq!(t.find(1.0), 1);
        assert_eq!(t.find(5.5), 2);
        assert_eq!(t.find(6.0), 3);
        assert_eq!(t.find(9.999_999), 3);
        t.set(3, 0.5);
        assert_eq!(t.total(), 6.5);
    }

    #[test]
    fn fifo_eviction() {
        let mut r = PrioritizedReplay::new(3, 0.6, 0.1).unwrap();
        for i in 0..5 {
            r.push(i, 1.0);
        }
        assert_eq!(r.len(), 3);
        let mut stored: Vec<i32> = (0..3).map(|i| *r.get(i)).collect();
        stored.sort();
        assert_eq!(stored, vec![2, 3, 4]);
    }

    #[test]
    fn uniform_priorities_give_unit_weights() {
        let mut r = PrioritizedReplay::new(8, 0.6, 0.4).unwrap();
        for i in 0..6 {
            r.push(i, 1.0);
        }
        let mut rng = rng_from_seed(3);
        for s in r.sample(100, &mut rng).unwrap() {
            assert_eq!(s.weight, 1.0);
        }
    }

    #[test]
    fn zero_alpha_is_uniform() {
        let mut r = PrioritizedReplay::new(4, 0.0, 0.7).unwrap();
        for (i, p) in [0.1, 5.0, 2.0, 1e-6].iter().enumerate() {
            r.push(i, *p);
        }
        for i in 0..4 {
            assert_eq!(r.probability(i), 0.25);
        }
    }

    #[test]
    fn empty_buffer_and_bad_config() {
        let r: PrioritizedReplay<u8> = PrioritizedReplay::new(2, 0.6, 0.1).unwrap();
        assert!(matches!(
            r.sample(1, &mut rng_from_seed(0)),
            Err(Error::EmptyBuffer)
        ));
        assert!(PrioritizedReplay::<u8>::new(0, 0.6, 0.1).is_err());
        assert!(PrioritizedReplay::<u8>::new(2, -1.0, 0.1).is_err());
    }
}
