//! Restricted Boltzmann machines: contrastive-divergence training and the
//! exact mapping onto an Ising model.
//!
//! Energy convention over 0/1 units:
//! `E(v, h) = -sum a_i v_i - sum b_j h_j - sum v_i W_ij h_j`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::ising::{parse_header, IsingModel, SpinConfiguration};
use crate::{Error, RandomSource, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Rbm {
    n_visible: usize,
    n_hidden: usize,
    /// Row-major `n_visible x n_hidden`.
    weights: Vec<f64>,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Rbm {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            n_visible,
            n_hidden,
            weights: vec![0.0; n_visible * n_hidden],
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
        }
    }

    pub fn from_parts(
        n_visible: usize,
        n_hidden: usize,
        weights: Vec<f64>,
        visible_bias: Vec<f64>,
        hidden_bias: Vec<f64>,
    ) -> Result<Self> {
        for (len, want) in [
            (weights.len(), n_visible * n_hidden),
            (visible_bias.len(), n_visible),
            (hidden_bias.len(), n_hidden),
        ] {
            if len != want {
                return Err(Error::SizeMismatch {
                    expected: want,
                    actual: len,
                });
            }
        }
        let rbm = Self {
            n_visible,
            n_hidden,
            weights,
            visible_bias,
            hidden_bias,
        };
        if let Some(what) = rbm.first_non_finite() {
            return Err(Error::InvalidModel(format!("non-finite {what}")));
        }
        Ok(rbm)
    }

    /// Weights uniform in `[-scale, scale]`, biases zero.
    pub fn random<R: Rng + ?Sized>(n_visible: usize, n_hidden: usize, scale: f64, rng: &mut R) -> Self {
        let mut rbm = Self::zeros(n_visible, n_hidden);
        for w in &mut rbm.weights {
            *w = rng.gen_range(-scale..=scale);
        }
        rbm
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_hidden + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.visible_bias
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    pub fn set_visible_bias(&mut self, i: usize, value: f64) {
        self.visible_bias[i] = value;
    }

    pub fn set_hidden_bias(&mut self, j: usize, value: f64) {
        self.hidden_bias[j] = value;
    }

    pub fn set_weight(&mut self, i: usize, j: usize, value: f64) {
        self.weights[i * self.n_hidden + j] = value;
    }

    fn first_non_finite(&self) -> Option<String> {
        if let Some(k) = self.weights.iter().position(|w| !w.is_finite()) {
            return Some(format!("weight ({}, {})", k / self.n_hidden.max(1), k % self.n_hidden.max(1)));
        }
        if let Some(i) = self.visible_bias.iter().position(|a| !a.is_finite()) {
            return Some(format!("visible bias {i}"));
        }
        self.hidden_bias
            .iter()
            .position(|b| !b.is_finite())
            .map(|j| format!("hidden bias {j}"))
    }

    pub fn energy(&self, visible: &[u8], hidden: &[u8]) -> Result<f64> {
        self.check_visible(visible)?;
        if hidden.len() != self.n_hidden {
            return Err(Error::SizeMismatch {
                expected: self.n_hidden,
                actual: hidden.len(),
            });
        }
        let mut e = 0.0;
        for (i, &v) in visible.iter().enumerate() {
            e -= self.visible_bias[i] * v as f64;
        }
        for (j, &h) in hidden.iter().enumerate() {
            e -= self.hidden_bias[j] * h as f64;
        }
        for (i, &v) in visible.iter().enumerate() {
            for (j, &h) in hidden.iter().enumerate() {
                e -= v as f64 * self.weight(i, j) * h as f64;
            }
        }
        Ok(e)
    }

    fn check_visible(&self, visible: &[u8]) -> Result<()> {
        if visible.len() != self.n_visible {
            return Err(Error::SizeMismatch {
                expected: self.n_visible,
                actual: visible.len(),
            });
        }
        Ok(())
    }

    fn hidden_input(&self, visible: &[f64], j: usize) -> f64 {
        self.hidden_bias[j]
            + visible
                .iter()
                .enumerate()
                .map(|(i, &v)| v * self.weight(i, j))
                .sum::<f64>()
    }

    fn visible_input(&self, hidden: &[f64], i: usize) -> f64 {
        let row = &self.weights[i * self.n_hidden..(i + 1) * self.n_hidden];
        self.visible_bias[i] + row.iter().zip(hidden).map(|(w, h)| w * h).sum::<f64>()
    }

    pub fn hidden_probabilities(&self, visible: &[f64]) -> Vec<f64> {
        (0..self.n_hidden).map(|j| sigmoid(self.hidden_input(visible, j))).collect()
    }

    pub fn visible_probabilities(&self, hidden: &[f64]) -> Vec<f64> {
        (0..self.n_visible).map(|i| sigmoid(self.visible_input(hidden, i))).collect()
    }

    /// `# rbm nv=<V> nh=<H>`, then `V` weight rows, then `a ...` and `b ...`.
    pub fn to_text(&self) -> String {
        let mut out = format!("# rbm nv={} nh={}\n", self.n_visible, self.n_hidden);
        let join = |xs: &[f64]| xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        for i in 0..self.n_visible {
            let _ = writeln!(out, "{}", join(&self.weights[i * self.n_hidden..(i + 1) * self.n_hidden]));
        }
        let _ = writeln!(out, "a {}", join(&self.visible_bias));
        let _ = writeln!(out, "b {}", join(&self.hidden_bias));
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(origin, 0, "empty rbm file"))?;
        let fields = parse_header(header, "rbm").ok_or_else(|| Error::parse(origin, 1, "expected `# rbm nv=<V> nh=<H>`"))?;
        let dim = |key: &str| -> Result<usize> {
            fields
                .get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(origin, 1, format!("missing or bad `{key}`")))
        };
        let (nv, nh) = (dim("nv")?, dim("nh")?);
        let numbers = |line_no: usize, tokens: &[&str], want: usize| -> Result<Vec<f64>> {
            if tokens.len() != want {
                return Err(Error::parse(origin, line_no, format!("expected {want} values, found {}", tokens.len())));
            }
            tokens
                .iter()
                .map(|t| t.parse::<f64>().map_err(|_| Error::parse(origin, line_no, format!("bad number `{t}`"))))
                .collect()
        };
        let mut weights = Vec::with_capacity(nv * nh);
        for row in 0..nv {
            let (line_no, line) = lines
                .next()
                .ok_or_else(|| Error::parse(origin, 0, format!("missing weight row {row}")))?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            weights.extend(numbers(line_no, &tokens, nh)?);
        }
        let mut bias = |tag: &str, want: usize| -> Result<Vec<f64>> {
            let (line_no, line) = lines
                .next()
                .ok_or_else(|| Error::parse(origin, 0, format!("missing `{tag}` line")))?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.first() != Some(&tag) {
                return Err(Error::parse(origin, line_no, format!("expected `{tag}` line")));
            }
            numbers(line_no, &tokens[1..], want)
        };
        let a = bias("a", nv)?;
        let b = bias("b", nh)?;
        if let Some((line_no, _)) = lines.next() {
            return Err(Error::parse(origin, line_no, "trailing content"));
        }
        Self::from_parts(nv, nh, weights, a, b).map_err(|e| Error::parse(origin, 0, e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Ising model whose energy plus `constant` equals the RBM energy, with
/// spins `s = 2u - 1`. Visible units take indices `0..V`, hidden units
/// `V..V+H`.
pub fn rbm_to_ising(rbm: &Rbm) -> (IsingModel, f64) {
    let (nv, nh) = (rbm.n_visible, rbm.n_hidden);
    let mut biases = vec![0.0; nv + nh];
    let mut couplings = Vec::new();
    let mut constant = 0.0;
    for i in 0..nv {
        biases[i] += rbm.visible_bias[i] / 2.0;
        constant -= rbm.visible_bias[i] / 2.0;
    }
    for j in 0..nh {
        biases[nv + j] += rbm.hidden_bias[j] / 2.0;
        constant -= rbm.hidden_bias[j] / 2.0;
    }
    for i in 0..nv {
        for j in 0..nh {
            let q = rbm.weight(i, j) / 4.0;
            if q != 0.0 {
                couplings.push((i, nv + j, q));
            }
            biases[i] += q;
            biases[nv + j] += q;
            constant -= q;
        }
    }
    let model = IsingModel::new(nv + nh, couplings, biases).expect("finite bipartite model");
    (model, constant)
}

/// Joint configuration with every hidden unit at its most likely value
/// given `visible` (on iff its net input is positive).
pub fn joint_state(rbm: &Rbm, visible: &[u8]) -> Result<SpinConfiguration> {
    rbm.check_visible(visible)?;
    if visible.iter().any(|&v| v > 1) {
        return Err(Error::InvalidArgument("visible units must be 0 or 1".into()));
    }
    let v: Vec<f64> = visible.iter().map(|&u| u as f64).collect();
    let spins = visible
        .iter()
        .map(|&u| 2 * u as i8 - 1)
        .chain((0..rbm.n_hidden).map(|j| if rbm.hidden_input(&v, j) > 0.0 { 1 } else { -1 }))
        .collect();
    SpinConfiguration::new(spins)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    patterns: Vec<Vec<u8>>,
}

impl Dataset {
    pub fn new(patterns: Vec<Vec<u8>>) -> Result<Self> {
        let first = patterns
            .first()
            .ok_or_else(|| Error::InvalidArgument("dataset is empty".into()))?
            .len();
        for p in &patterns {
            if p.len() != first {
                return Err(Error::SizeMismatch {
                    expected: first,
                    actual: p.len(),
                });
            }
            if p.iter().any(|&u| u > 1) {
                return Err(Error::InvalidArgument("patterns must be 0/1".into()));
            }
        }
        Ok(Self { patterns })
    }

    pub fn patterns(&self) -> &[Vec<u8>] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn pattern_len(&self) -> usize {
        self.patterns[0].len()
    }

    /// Noisy copies of random prototypes: each pattern picks a prototype
    /// uniformly and flips each bit with probability `noise`.
    pub fn synthetic<R: Rng + ?Sized>(
        n_visible: usize,
        n_patterns: usize,
        n_prototypes: usize,
        noise: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if n_visible == 0 || n_prototypes == 0 || !(0.0..=1.0).contains(&noise) {
            return Err(Error::InvalidArgument(format!(
                "synthetic dataset needs n_visible, prototypes >= 1 and noise in [0, 1] (got {n_visible}, {n_prototypes}, {noise})"
            )));
        }
        let prototypes: Vec<Vec<u8>> = (0..n_prototypes)
            .map(|_| (0..n_visible).map(|_| rng.gen_range(0..=1u8)).collect())
            .collect();
        let patterns = (0..n_patterns)
            .map(|_| {
                let p = &prototypes[rng.gen_range(0..n_prototypes)];
                p.iter().map(|&u| if rng.gen_bool(noise) { 1 - u } else { u }).collect()
            })
            .collect();
        Self::new(patterns)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.patterns {
            out.extend(p.iter().map(|&u| if u == 1 { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut patterns = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let p: Vec<u8> = line
                .chars()
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    _ => Err(Error::parse(origin, idx + 1, format!("unexpected character `{c}`"))),
                })
                .collect::<Result<_>>()?;
            if let Some(first) = patterns.first().map(|q: &Vec<u8>| q.len()) {
                if p.len() != first {
                    return Err(Error::parse(origin, idx + 1, format!("pattern length {} != {first}", p.len())));
                }
            }
            patterns.push(p);
        }
        if patterns.is_empty() {
            return Err(Error::parse(origin, 0, "dataset has no patterns"));
        }
        Self::new(patterns)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub cd_k: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Epochs (1-based) after which a parameter snapshot is kept.
    pub snapshot_epochs: BTreeSet<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            cd_k: 1,
            learning_rate: 0.05,
            epochs: 1,
            batch_size: 10,
            seed: 0,
            snapshot_epochs: BTreeSet::new(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cd_k < 1 || !(self.learning_rate > 0.0) || self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::InvalidArgument(format!(
                "training needs cd_k, epochs, batch_size >= 1 and learning_rate > 0 (got {self:?})"
            )));
        }
        if let Some(&e) = self.snapshot_epochs.iter().find(|&&e| e == 0 || e > self.epochs) {
            return Err(Error::InvalidArgument(format!(
                "snapshot epoch {e} outside 1..={}",
                self.epochs
            )));
        }
        Ok(())
    }
}

/// Gradient ascent direction on the log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

impl Gradient {
    fn zeros(rbm: &Rbm) -> Self {
        Self {
            weights: vec![0.0; rbm.weights.len()],
            visible_bias: vec![0.0; rbm.n_visible],
            hidden_bias: vec![0.0; rbm.n_hidden],
        }
    }
}

fn sample_units<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Vec<f64> {
    probs
        .iter()
        .map(|&p| if rng.gen::<f64>() < p { 1.0 } else { 0.0 })
        .collect()
}

/// CD-k estimate averaged over `batch`. The negative phase runs `k`
/// alternating Gibbs steps from each pattern and uses hidden
/// probabilities given the final sampled visible layer.
pub fn cd_gradient<R: Rng + ?Sized>(rbm: &Rbm, batch: &[&[u8]], k: usize, rng: &mut R) -> Gradient {
    let mut g = Gradient::zeros(rbm);
    let (nv, nh) = (rbm.n_visible, rbm.n_hidden);
    for pattern in batch {
        let v0: Vec<f64> = pattern.iter().map(|&u| u as f64).collect();
        let ph0 = rbm.hidden_probabilities(&v0);
        let mut h = sample_units(&ph0, rng);
        let mut vk = v0.clone();
        let mut phk = ph0.clone();
        for step in 1..=k {
            vk = sample_units(&rbm.visible_probabilities(&h), rng);
            phk = rbm.hidden_probabilities(&vk);
            if step < k {
                h = sample_units(&phk, rng);
            }
        }
        for i in 0..nv {
            for j in 0..nh {
                g.weights[i * nh + j] += v0[i] * ph0[j] - vk[i] * phk[j];
            }
            g.visible_bias[i] += v0[i] - vk[i];
        }
        for j in 0..nh {
            g.hidden_bias[j] += ph0[j] - phk[j];
        }
    }
    let scale = 1.0 / batch.len().max(1) as f64;
    for x in g.weights.iter_mut().chain(&mut g.visible_bias).chain(&mut g.hidden_bias) {
        *x *= scale;
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub rbm: Rbm,
    /// `(epoch, parameters)` in increasing epoch order.
    pub snapshots: Vec<(usize, Rbm)>,
    pub presentations: u64,
    /// Mean squared one-step reconstruction error per epoch.
    pub reconstruction_error: Vec<f64>,
}

/// CD-k training. Each epoch visits every pattern once in a seeded random
/// order, in mini-batches of `batch_size`.
pub fn train_cd(rbm: &Rbm, data: &Dataset, cfg: &TrainingConfig) -> Result<TrainingRun> {
    cfg.validate()?;
    if data.pattern_len() != rbm.n_visible {
        return Err(Error::SizeMismatch {
            expected: rbm.n_visible,
            actual: data.pattern_len(),
        });
    }
    let mut rng = RandomSource::from_seed(cfg.seed).labeled("train").rng();
    let mut rbm = rbm.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut snapshots = Vec::new();
    let mut reconstruction_error = Vec::with_capacity(cfg.epochs);
    let mut presentations = 0u64;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&[u8]> = chunk.iter().map(|&p| data.patterns[p].as_slice()).collect();
            presentations += batch.len() as u64;
            let g = cd_gradient(&rbm, &batch, cfg.cd_k, &mut rng);
            let lr = cfg.learning_rate;
            for (w, d) in rbm.weights.iter_mut().zip(&g.weights) {
                *w += lr * d;
            }
            for (a, d) in rbm.visible_bias.iter_mut().zip(&g.visible_bias) {
                *a += lr * d;
            }
            for (b, d) in rbm.hidden_bias.iter_mut().zip(&g.hidden_bias) {
                *b += lr * d;
            }
            if let Some(what) = rbm.first_non_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: batch_no,
                    what,
                });
            }
        }
        reconstruction_error.push(reconstruction(&rbm, data));
        if cfg.snapshot_epochs.contains(&epoch) {
            snapshots.push((epoch, rbm.clone()));
        }
    }
    Ok(TrainingRun {
        rbm,
        snapshots,
        presentations,
        reconstruction_error,
    })
}

fn reconstruction(rbm: &Rbm, data: &Dataset) -> f64 {
    let mut total = 0.0;
    for p in data.patterns() {
        let v: Vec<f64> = p.iter().map(|&u| u as f64).collect();
        let pv = rbm.visible_probabilities(&rbm.hidden_probabilities(&v));
        total += v.iter().zip(&pv).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / v.len() as f64;
    }
    total / data.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;

    fn bits(index: u64, len: usize) -> Vec<u8> {
        (0..len).map(|k| ((index >> k) & 1) as u8).collect()
    }

    fn spins_of(v: &[u8], h: &[u8]) -> SpinConfiguration {
        SpinConfiguration::new(v.iter().chain(h).map(|&u| 2 * u as i8 - 1).collect()).unwrap()
    }

    fn assert_identity(rbm: &Rbm) {
        let (model, constant) = rbm_to_ising(rbm);
        let (nv, nh) = (rbm.n_visible(), rbm.n_hidden());
        for vi in 0..(1u64 << nv) {
            let v = bits(vi, nv);
            for hi in 0..(1u64 << nh) {
                let h = bits(hi, nh);
                let lhs = rbm.energy(&v, &h).unwrap();
                let rhs = model.energy(&spins_of(&v, &h)).unwrap() + constant;
                assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn zero_rbm_maps_to_zero_model() {
        let (model, constant) = rbm_to_ising(&Rbm::zeros(3, 2));
        assert!(model.couplings().is_empty());
        assert!(model.biases().iter().all(|&h| h == 0.0));
        assert_eq!(constant, 0.0);
    }

    #[test]
    fn one_by_one_conversion() {
        let w = 1.5;
        let rbm = Rbm::from_parts(1, 1, vec![w], vec![0.0], vec![0.0]).unwrap();
        let (model, constant) = rbm_to_ising(&rbm);
        assert_eq!(model.coupling(0, 1), w / 4.0);
        assert_eq!(model.biases(), [w / 4.0, w / 4.0]);
        assert_eq!(constant, -w / 4.0);
        assert_identity(&rbm);
    }

    #[test]
    fn conversion_is_bipartite_and_exact() {
        let mut rng = RandomSource::from_seed(4).rng();
        let mut rbm = Rbm::random(3, 2, 1.0, &mut rng);
        for i in 0..3 {
            rbm.set_visible_bias(i, rng.gen_range(-1.0..1.0));
        }
        for j in 0..2 {
            rbm.set_hidden_bias(j, rng.gen_range(-1.0..1.0));
        }
        let (model, _) = rbm_to_ising(&rbm);
        assert!(model.couplings().keys().all(|&(i, j)| i < 3 && j >= 3));
        assert_identity(&rbm);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn energy_equivalence(nv in 1usize..5, nh in 1usize..5, seed in any::<u64>()) {
            let mut rng = RandomSource::from_seed(seed).rng();
            let mut rbm = Rbm::random(nv, nh, 2.0, &mut rng);
            for i in 0..nv { rbm.set_visible_bias(i, rng.gen_range(-2.0..2.0)); }
            for j in 0..nh { rbm.set_hidden_bias(j, rng.gen_range(-2.0..2.0)); }
            assert_identity(&rbm);
        }
    }

    #[test]
    fn joint_state_rules() {
        let zero = Rbm::zeros(3, 2);
        assert_eq!(joint_state(&zero, &[1, 0, 1]).unwrap().to_string(), "+-+--");
        let one = Rbm::from_parts(1, 1, vec![0.7], vec![0.0], vec![0.0]).unwrap();
        assert_eq!(joint_state(&one, &[1]).unwrap().to_string(), "++");
        assert!(joint_state(&zero, &[1, 0]).is_err());
    }

    #[test]
    fn joint_state_minimizes_over_hidden_completions() {
        let mut rng = RandomSource::from_seed(8).rng();
        let mut rbm = Rbm::random(4, 3, 1.0, &mut rng);
        for j in 0..3 {
            rbm.set_hidden_bias(j, rng.gen_range(-1.0..1.0));
        }
        for vi in 0..16 {
            let v = bits(vi, 4);
            let s = joint_state(&rbm, &v).unwrap();
            let h: Vec<u8> = s.spins()[4..].iter().map(|&x| ((x + 1) / 2) as u8).collect();
            let best = (0..8)
                .map(|hi| rbm.energy(&v, &bits(hi, 3)).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!(rbm.energy(&v, &h).unwrap() <= best + 1e-12);
        }
    }

    #[test]
    fn presentations_follow_epoch_definition() {
        let mut rng = RandomSource::from_seed(1).rng();
        let data = Dataset::synthetic(6, 100, 3, 0.1, &mut rng).unwrap();
        let cfg = TrainingConfig {
            epochs: 5,
            snapshot_epochs: [1, 3, 5].into(),
            ..Default::default()
        };
        let run = train_cd(&Rbm::zeros(6, 4), &data, &cfg).unwrap();
        assert_eq!(run.presentations, 500);
        let epochs: Vec<usize> = run.snapshots.iter().map(|s| s.0).collect();
        assert_eq!(epochs, [1, 3, 5]);
        assert_eq!(run.snapshots.last().unwrap().1, run.rbm);
        assert_eq!(run.reconstruction_error.len(), 5);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = RandomSource::from_seed(2).rng();
        let data = Dataset::synthetic(5, 40, 2, 0.1, &mut rng).unwrap();
        let rbm = Rbm::random(5, 3, 0.1, &mut rng);
        let cfg = TrainingConfig {
            epochs: 3,
            seed: 17,
            ..Default::default()
        };
        assert_eq!(train_cd(&rbm, &data, &cfg).unwrap(), train_cd(&rbm, &data, &cfg).unwrap());
    }

    #[test]
    fn all_ones_raise_visible_biases() {
        let data = Dataset::new(vec![vec![1, 1, 1]; 4]).unwrap();
        let cfg = TrainingConfig {
            batch_size: 4,
            ..Default::default()
        };
        let run = train_cd(&Rbm::zeros(3, 2), &data, &cfg).unwrap();
        assert!(run.rbm.visible_bias().iter().all(|&a| a > 0.0));
    }

    #[test]
    fn divergence_is_reported() {
        let data = Dataset::new(vec![vec![1, 0]; 4]).unwrap();
        let cfg = TrainingConfig {
            learning_rate: f64::INFINITY,
            epochs: 3,
            ..Default::default()
        };
        let rbm = Rbm::from_parts(2, 1, vec![1.0, -1.0], vec![0.0; 2], vec![0.0]).unwrap();
        assert!(matches!(train_cd(&rbm, &data, &cfg), Err(Error::NonFinite { .. })));
    }

    /// Exact log-likelihood gradient for a tiny RBM by enumerating all
    /// joint states.
    fn exact_gradient(rbm: &Rbm, data: &[Vec<u8>]) -> (Gradient, Gradient) {
        let (nv, nh) = (rbm.n_visible(), rbm.n_hidden());
        let mut positive = Gradient::zeros(rbm);
        for v in data {
            let vf: Vec<f64> = v.iter().map(|&u| u as f64).collect();
            let ph = rbm.hidden_probabilities(&vf);
            for i in 0..nv {
                for j in 0..nh {
                    positive.weights[i * nh + j] += vf[i] * ph[j] / data.len() as f64;
                }
                positive.visible_bias[i] += vf[i] / data.len() as f64;
            }
            for j in 0..nh {
                positive.hidden_bias[j] += ph[j] / data.len() as f64;
            }
        }
        let mut negative = Gradient::zeros(rbm);
        let mut z = 0.0;
        for vi in 0..(1u64 << nv) {
            for hi in 0..(1u64 << nh) {
                let (v, h) = (bits(vi, nv), bits(hi, nh));
                let p = (-rbm.energy(&v, &h).unwrap()).exp();
                z += p;
                for i in 0..nv {
                    for j in 0..nh {
                        negative.weights[i * nh + j] += p * (v[i] * h[j]) as f64;
                    }
                    negative.visible_bias[i] += p * v[i] as f64;
                }
                for j in 0..nh {
                    negative.hidden_bias[j] += p * h[j] as f64;
                }
            }
        }
        for x in negative.weights.iter_mut().chain(&mut negative.visible_bias).chain(&mut negative.hidden_bias) {
            *x /= z;
        }
        (positive, negative)
    }

    #[test]
    fn cd_matches_enumerated_gradient() {
        let rbm = Rbm::from_parts(2, 2, vec![0.5, -0.3, 0.2, 0.4], vec![0.1, -0.2], vec![0.0, 0.3]).unwrap();
        let data = vec![vec![1, 0], vec![1, 1], vec![1, 0]];
        let (positive, negative) = exact_gradient(&rbm, &data);
        let exact: Vec<f64> = positive.weights.iter().zip(&negative.weights).map(|(p, n)| p - n).collect();

        let refs: Vec<&[u8]> = data.iter().map(|v| v.as_slice()).collect();
        let mut rng = RandomSource::from_seed(3).rng();
        let reps = 20_000;
        let mut cd1 = vec![0.0; 4];
        let mut long = vec![0.0; 4];
        for _ in 0..reps {
            for (acc, g) in cd1.iter_mut().zip(cd_gradient(&rbm, &refs, 1, &mut rng).weights) {
                *acc += g / reps as f64;
            }
            for (acc, g) in long.iter_mut().zip(cd_gradient(&rbm, &refs, 30, &mut rng).weights) {
                *acc += g / reps as f64;
            }
        }
        for k in 0..4 {
            // the data-dependent term pushes the same way in both
            assert!(positive.weights[k] > 0.0 || data.iter().all(|v| v[k / 2] == 0));
            assert_eq!(cd1[k].signum(), exact[k].signum(), "cd1 {cd1:?} exact {exact:?}");
            assert!((long[k] - exact[k]).abs() < 0.02, "long {long:?} exact {exact:?}");
        }
    }

    #[test]
    fn parameter_file_round_trip() {
        let mut rng = RandomSource::from_seed(5).rng();
        let rbm = Rbm::random(3, 4, 1.0, &mut rng);
        assert_eq!(Rbm::parse(&rbm.to_text(), "mem").unwrap(), rbm);
        assert!(Rbm::parse("# rbm nv=1 nh=1\n0.5 0.1\na 0\nb 0\n", "mem").is_err());
    }

    #[test]
    fn dataset_file_errors_carry_line_numbers() {
        let d = Dataset::parse("0101\n1100\n", "mem").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(Dataset::parse(&d.to_text(), "mem").unwrap(), d);
        match Dataset::parse("0101\n11x0\n", "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(Dataset::parse("01\n011\n", "mem").is_err());
        assert!(Dataset::parse("\n", "mem").is_err());
    }
}
