//! Exhaustive ground truth for small landscapes (n <= 20).
//!
//! States are indexed by bit pattern: bit `k` set means spin `k` is +1.
//! Nothing here calls into the Monte Carlo kernels; the descent and the
//! energies are recomputed from the model's parameters directly so that
//! the two routes can be checked against each other.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::ising::{IsingModel, SpinConfiguration};
use crate::{Error, Result};

pub const MAX_ORACLE_SPINS: usize = 20;

#[derive(Debug, Clone)]
pub struct ExactLandscape {
    model: IsingModel,
    energies: Vec<f64>,
    /// State indices of all local minima, ascending.
    minima: Vec<u64>,
    /// Position in `minima` of each state's steepest-descent endpoint.
    basin_of: Vec<u32>,
    basin_sizes: Vec<u64>,
    /// Lowest escape barrier above each minimum; `None` when no other basin exists.
    barriers: Vec<Option<f64>>,
}

fn state_energy(model: &IsingModel, index: u64) -> f64 {
    let spin = |k: usize| if (index >> k) & 1 == 1 { 1.0 } else { -1.0 };
    let mut e = 0.0;
    for (&(i, j), &value) in model.couplings() {
        e -= value * spin(i) * spin(j);
    }
    for (j, &h) in model.biases().iter().enumerate() {
        e -= h * spin(j);
    }
    e
}

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[x as usize] != root {
            let next = self.parent[x as usize];
            self.parent[x as usize] = root;
            x = next;
        }
        root
    }

    /// Returns `(new_root, absorbed_root)`.
    fn union(&mut self, a: u32, b: u32) -> Option<(u32, u32)> {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return None;
        }
        if self.rank[a as usize] < self.rank[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        if self.rank[a as usize] == self.rank[b as usize] {
            self.rank[a as usize] += 1;
        }
        Some((a, b))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Label {
    Pure(u32),
    Mixed,
}

impl ExactLandscape {
    pub fn enumerate(model: &IsingModel) -> Result<Self> {
        let n = model.n();
        if n > MAX_ORACLE_SPINS {
            return Err(Error::TooLarge {
                n,
                limit: MAX_ORACLE_SPINS,
            });
        }
        let size = 1usize << n;
        let energies: Vec<f64> = (0..size as u64)
            .into_par_iter()
            .map(|i| state_energy(model, i))
            .collect();

        // steepest strictly-downhill neighbor, lowest bit on ties
        let next: Vec<u64> = (0..size as u64)
            .into_par_iter()
            .map(|i| {
                let mut best = i;
                let mut best_delta = 0.0;
                for k in 0..n {
                    let j = i ^ (1 << k);
                    let d = energies[j as usize] - energies[i as usize];
                    if d < best_delta {
                        best_delta = d;
                        best = j;
                    }
                }
                best
            })
            .collect();
        let minima: Vec<u64> = (0..size as u64).filter(|&i| next[i as usize] == i).collect();
        let mut minimum_slot = vec![u32::MAX; size];
        for (slot, &m) in minima.iter().enumerate() {
            minimum_slot[m as usize] = slot as u32;
        }
        let mut basin_of = vec![u32::MAX; size];
        let mut path = Vec::new();
        for start in 0..size {
            if basin_of[start] != u32::MAX {
                continue;
            }
            let mut cur = start;
            while basin_of[cur] == u32::MAX && next[cur] as usize != cur {
                path.push(cur);
                cur = next[cur] as usize;
            }
            let label = if basin_of[cur] != u32::MAX {
                basin_of[cur]
            } else {
                minimum_slot[cur]
            };
            basin_of[cur] = label;
            for p in path.drain(..) {
                basin_of[p] = label;
            }
        }
        let mut basin_sizes = vec![0u64; minima.len()];
        for &b in &basin_of {
            basin_sizes[b as usize] += 1;
        }
        let barriers = Self::barriers(n, &energies, &basin_of, &minima);
        Ok(Self {
            model: model.clone(),
            energies,
            minima,
            basin_of,
            basin_sizes,
            barriers,
        })
    }

    /// Grows single-flip connectivity over states in ascending (energy,
    /// index) order. A minimum's barrier is the energy, relative to the
    /// minimum, at which its component first touches another basin.
    fn barriers(n: usize, energies: &[f64], basin_of: &[u32], minima: &[u64]) -> Vec<Option<f64>> {
        let size = energies.len();
        let mut order: Vec<u32> = (0..size as u32).collect();
        order.sort_by(|&a, &b| {
            energies[a as usize]
                .total_cmp(&energies[b as usize])
                .then(a.cmp(&b))
        });
        let mut uf = UnionFind::new(size);
        let mut added = vec![false; size];
        let mut label = vec![Label::Mixed; size];
        // the not-yet-escaped minimum of each pure component
        let mut pending: Vec<Option<u32>> = vec![None; size];
        let mut barriers = vec![None; minima.len()];

        for &v in &order {
            let level = energies[v as usize];
            let basin = basin_of[v as usize];
            added[v as usize] = true;
            label[v as usize] = Label::Pure(basin);
            pending[v as usize] = (minima[basin as usize] == v as u64).then_some(basin);
            for k in 0..n {
                let u = v ^ (1 << k);
                if !added[u as usize] {
                    continue;
                }
                let ru = uf.find(u);
                let rv = uf.find(v);
                if ru == rv {
                    continue;
                }
                let merged = match (label[ru as usize], label[rv as usize]) {
                    (Label::Pure(a), Label::Pure(b)) if a == b => Label::Pure(a),
                    _ => Label::Mixed,
                };
                let pend_u = pending[ru as usize].take();
                let pend_v = pending[rv as usize].take();
                let (root, _) = uf.union(ru, rv).expect("distinct roots");
                label[root as usize] = merged;
                match merged {
                    Label::Mixed => {
                        for m in [pend_u, pend_v].into_iter().flatten() {
                            let e_m = energies[minima[m as usize] as usize];
                            barriers[m as usize] = Some(level - e_m);
                        }
                    }
                    Label::Pure(_) => pending[root as usize] = pend_u.or(pend_v),
                }
            }
        }
        barriers
    }

    pub fn model(&self) -> &IsingModel {
        &self.model
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn energy_of(&self, index: u64) -> f64 {
        self.energies[index as usize]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn minima(&self) -> impl ExactSizeIterator<Item = SpinConfiguration> + '_ {
        self.minima
            .iter()
            .map(|&m| SpinConfiguration::from_index(self.n(), m))
    }

    pub fn minima_indices(&self) -> &[u64] {
        &self.minima
    }

    pub fn minima_set(&self) -> BTreeSet<SpinConfiguration> {
        self.minima().collect()
    }

    /// Steepest-descent minimum of `s`.
    pub fn basin_of(&self, s: &SpinConfiguration) -> SpinConfiguration {
        let slot = self.basin_of[s.to_index() as usize];
        SpinConfiguration::from_index(self.n(), self.minima[slot as usize])
    }

    pub fn basin_of_index(&self, index: u64) -> u64 {
        self.minima[self.basin_of[index as usize] as usize]
    }

    fn slot(&self, lm: &SpinConfiguration) -> Result<usize> {
        self.model.check_dim(lm)?;
        self.minima
            .binary_search(&lm.to_index())
            .map_err(|_| Error::NotAMinimum(lm.to_string()))
    }

    pub fn is_minimum(&self, s: &SpinConfiguration) -> bool {
        self.slot(s).is_ok()
    }

    pub fn basin_size(&self, lm: &SpinConfiguration) -> Result<u64> {
        Ok(self.basin_sizes[self.slot(lm)?])
    }

    pub fn basin_fraction(&self, lm: &SpinConfiguration) -> Result<f64> {
        Ok(self.basin_size(lm)? as f64 / self.energies.len() as f64)
    }

    /// Lowest escape barrier above `lm`; `None` means no other basin is
    /// reachable (single-basin landscape).
    pub fn exact_barrier(&self, lm: &SpinConfiguration) -> Result<Option<f64>> {
        Ok(self.barriers[self.slot(lm)?])
    }

    /// Basin states with energy in `[e_lm, e_lm + window]`, per unit energy.
    pub fn exact_bottom_dos(&self, lm: &SpinConfiguration, window: f64) -> Result<f64> {
        Ok(self.bottom_count(lm, window)? as f64 / window)
    }

    pub fn bottom_count(&self, lm: &SpinConfiguration, window: f64) -> Result<u64> {
        if !(window > 0.0) {
            return Err(Error::InvalidArgument(format!("DOS window {window} must be > 0")));
        }
        let slot = self.slot(lm)?;
        let e_lm = self.energies[self.minima[slot] as usize];
        Ok(self
            .basin_of
            .iter()
            .zip(&self.energies)
            .filter(|(&b, &e)| b as usize == slot && e >= e_lm && e <= e_lm + window)
            .count() as u64)
    }

    /// States reachable from `lm` by single flips through states with
    /// energy `<= e_lm + threshold` (breadth-first; independent of the
    /// union-find sweep).
    pub fn threshold_component(&self, lm: &SpinConfiguration, threshold: f64) -> Result<BTreeSet<u64>> {
        let slot = self.slot(lm)?;
        let start = self.minima[slot];
        let cap = self.energies[start as usize] + threshold;
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for k in 0..self.n() {
                let u = v ^ (1 << k);
                if self.energies[u as usize] <= cap && seen.insert(u) {
                    queue.push_back(u);
                }
            }
        }
        Ok(seen)
    }

    /// CSV dump: state index, energy, basin minimum index.
    pub fn dump_csv(&self) -> String {
        let mut out = String::from("state,energy,basin_minimum\n");
        for (i, e) in self.energies.iter().enumerate() {
            let _ = writeln!(out, "{i},{e:?},{}", self.minima[self.basin_of[i] as usize]);
        }
        out
    }

    pub fn write_dump(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.dump_csv()).map_err(|e| Error::io(path, e))
    }
}

pub fn enumerate_landscape(model: &IsingModel) -> Result<ExactLandscape> {
    ExactLandscape::enumerate(model)
}
