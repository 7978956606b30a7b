/// Binary indexed tree over nonnegative weights with prefix-sum sampling.
///
/// Incremental updates accumulate rounding error, so the tree is rebuilt from the
/// stored leaf values every `REBUILD_EVERY` updates.
#[derive(Debug, Clone)]
pub struct Fenwick {
    tree: Vec<f64>,
    leaves: Vec<f64>,
    top_bit: usize,
    updates: usize,
}

const REBUILD_EVERY: usize = 1 << 16;

impl Fenwick {
    pub fn new(values: &[f64]) -> Self {
        let n = values.len();
        let top_bit = if n == 0 {
            0
        } else {
            1 << (usize::BITS - 1 - n.leading_zeros())
        };
        let mut f = Fenwick {
            tree: vec![0.0; n + 1],
            leaves: values.to_vec(),
            top_bit,
            updates: 0,
        };
        f.rebuild();
        f
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    fn rebuild(&mut self) {
        let n = self.leaves.len();
        self.tree[1..].copy_from_slice(&self.leaves);
        self.tree[0] = 0.0;
        for i in 1..=n {
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                let v = self.tree[i];
                self.tree[parent] += v;
            }
        }
        self.updates = 0;
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.leaves[idx]
    }

    pub fn set(&mut self, idx: usize, value: f64) {
        debug_assert!(value >= 0.0);
        let delta = value - self.leaves[idx];
        self.leaves[idx] = value;
        self.updates += 1;
        if self.updates >= REBUILD_EVERY {
            self.rebuild();
            return;
        }
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    pub fn total(&self) -> f64 {
        let mut s = 0.0;
        let mut i = self.leaves.len();
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }

    /// Index of the leaf whose cumulative interval contains `u`, for `0 <= u < total`.
    ///
    /// Rounding can land on a zero-weight leaf near an interval edge; the result is
    /// then moved to the nearest positive leaf.
    pub fn find(&self, mut u: f64) -> usize {
        let n = self.leaves.len();
        let mut pos = 0;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                u -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        let idx = pos.min(n - 1);
        if self.leaves[idx] > 0.0 {
            return idx;
        }
        let below = (0..idx).rev().find(|&j| self.leaves[j] > 0.0);
        let above = (idx + 1..n).find(|&j| self.leaves[j] > 0.0);
        below.or(above).unwrap_or(idx)
    }
}
