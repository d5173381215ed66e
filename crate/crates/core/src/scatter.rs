//! Deterministic scatter via two-pass binning.
//!
//! Pass one assigns every item to a target bin (in parallel). Pass two lays the
//! items out bin by bin, each bin holding its items in ascending item order, so
//! any per-bin reduction that walks a bin front to back produces the same bits
//! regardless of how many worker threads ran pass one or the reduction.

use rayon::prelude::*;

/// Items grouped by target, CSR style.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bins {
    offsets: Vec<usize>,
    items: Vec<u32>,
}

impl Bins {
    /// Bins `n_items` items into `n_targets` bins. `target_of(i)` returns the
    /// bin for item `i`, or `None` to discard it.
    pub fn build<F>(n_targets: usize, n_items: usize, target_of: F) -> Bins
    where
        F: Fn(usize) -> Option<usize> + Sync,
    {
        assert!(n_items <= u32::MAX as usize, "too many scatter items");
        let targets: Vec<Option<usize>> = (0..n_items).into_par_iter().map(&target_of).collect();

        let mut offsets = vec![0usize; n_targets + 1];
        for t in targets.iter().flatten() {
            offsets[t + 1] += 1;
        }
        for i in 0..n_targets {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut items = vec![0u32; offsets[n_targets]];
        for (i, t) in targets.iter().enumerate() {
            if let Some(t) = *t {
                items[cursor[t]] = i as u32;
                cursor[t] += 1;
            }
        }
        Bins { offsets, items }
    }

    pub fn n_targets(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Items of bin `target`, in ascending item order.
    pub fn members(&self, target: usize) -> &[u32] {
        &self.items[self.offsets[target]..self.offsets[target + 1]]
    }

    pub fn total_items(&self) -> usize {
        self.items.len()
    }

    /// Reduces every bin with `reduce(target, members)` in parallel.
    pub fn reduce<R, F>(&self, reduce: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize, &[u32]) -> R + Sync,
    {
        (0..self.n_targets())
            .into_par_iter()
            .map(|t| reduce(t, self.members(t)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_keep_item_order() {
        let bins = Bins::build(3, 7, |i| if i == 3 { None } else { Some(i % 3) });
        assert_eq!(bins.members(0), &[0, 6]);
        assert_eq!(bins.members(1), &[1, 4]);
        assert_eq!(bins.members(2), &[2, 5]);
        assert_eq!(bins.total_items(), 6);
    }

    #[test]
    fn reduction_is_thread_count_independent() {
        let vals: Vec<f64> = (0..5000)
            .map(|i| ((i * 7919) % 1000) as f64 * 1e-3 + 1e-9 * i as f64)
            .collect();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let bins = Bins::build(17, vals.len(), |i| Some((i * 31) % 17));
                bins.reduce(|_, m| m.iter().map(|&i| vals[i as usize]).sum::<f64>())
            })
        };
        let a = run(1);
        let b = run(8);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
