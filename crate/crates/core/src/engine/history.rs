use std::cell::Cell;
use std::collections::VecDeque;

/// The most recent iterates, addressed by version.
#[derive(Debug, Clone)]
pub struct History {
    items: VecDeque<Vec<f64>>,
    oldest: usize,
    capacity: usize,
    overflows: Cell<u64>,
}

impl History {
    pub fn new(x0: Vec<f64>, capacity: usize) -> Self {
        let capacity = capacity.max(1);
        let mut items = VecDeque::with_capacity(capacity.min(1 << 16));
        items.push_back(x0);
        Self {
            items,
            oldest: 0,
            capacity,
            overflows: Cell::new(0),
        }
    }

    /// Version of the newest iterate.
    pub fn version(&self) -> usize {
        self.oldest + self.items.len() - 1
    }

    pub fn latest(&self) -> &[f64] {
        self.items.back().expect("history is never empty")
    }

    pub fn push(&mut self, x: Vec<f64>) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
            self.oldest += 1;
        }
        self.items.push_back(x);
    }

    /// Iterate at `version`, clipped to the oldest retained one (counted as an
    /// overflow) when it has been evicted.
    pub fn get(&self, version: usize) -> &[f64] {
        let v = if version < self.oldest {
            self.overflows.set(self.overflows.get() + 1);
            self.oldest
        } else {
            version.min(self.version())
        };
        &self.items[v - self.oldest]
    }

    pub fn overflows(&self) -> u64 {
        self.overflows.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eviction_clips_and_counts() {
        let mut h = History::new(vec![0.0], 3);
        for v in 1..=5 {
            h.push(vec![v as f64]);
        }
        assert_eq!(h.version(), 5);
        assert_eq!(h.get(4), &[4.0]);
        assert_eq!(h.overflows(), 0);
        assert_eq!(h.get(1), &[3.0]);
        assert_eq!(h.overflows(), 1);
    }
}
