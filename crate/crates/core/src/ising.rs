//! Ising spin-glass model `E(s) = -sum_{i<j} J_ij s_i s_j - sum_j h_j s_j`
//! over spins `s_i` in {-1, +1}.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::{Error, Result};

/// One spin configuration. Equality is elementwise; ordering is the
/// lexicographic order of the `+`/`-` string form, so `+` sorts first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SpinConfiguration {
    spins: Vec<i8>,
}

impl SpinConfiguration {
    /// Validates that every entry is exactly -1 or +1.
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(format!(
                "spin value {bad} is not -1 or +1"
            )));
        }
        Ok(Self { spins })
    }

    pub fn all_up(n: usize) -> Self {
        Self { spins: vec![1; n] }
    }

    pub fn all_down(n: usize) -> Self {
        Self { spins: vec![-1; n] }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self {
            spins: (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect(),
        }
    }

    /// Bit `k` of `index` set means spin `k` is +1.
    pub fn from_index(n: usize, index: u64) -> Self {
        Self {
            spins: (0..n)
                .map(|k| if (index >> k) & 1 == 1 { 1 } else { -1 })
                .collect(),
        }
    }

    /// Inverse of [`SpinConfiguration::from_index`]; only meaningful for n <= 64.
    pub fn to_index(&self) -> u64 {
        self.spins
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 1)
            .fold(0u64, |acc, (k, _)| acc | (1u64 << k))
    }

    /// Maps 0/1 units to spins via `s = 2u - 1`.
    pub fn from_binary(units: &[u8]) -> Result<Self> {
        let spins = units
            .iter()
            .map(|&u| match u {
                0 => Ok(-1),
                1 => Ok(1),
                other => Err(Error::InvalidArgument(format!("unit value {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spins })
    }

    pub fn to_binary(&self) -> Vec<u8> {
        self.spins.iter().map(|&s| u8::from(s == 1)).collect()
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn get(&self, k: usize) -> i8 {
        self.spins[k]
    }

    pub fn flip(&mut self, k: usize) {
        self.spins[k] = -self.spins[k];
    }

    pub fn flipped(&self, k: usize) -> Self {
        let mut out = self.clone();
        out.flip(k);
        out
    }

    /// Global spin inversion.
    pub fn inverted(&self) -> Self {
        Self {
            spins: self.spins.iter().map(|&s| -s).collect(),
        }
    }

    /// The N single-flip neighbors in ascending flip-index order.
    pub fn neighbors(&self) -> impl Iterator<Item = SpinConfiguration> + '_ {
        (0..self.len()).map(move |k| self.flipped(k))
    }

    /// Number of positions where the two configurations differ.
    pub fn hamming(&self, other: &Self) -> usize {
        self.spins
            .iter()
            .zip(&other.spins)
            .filter(|(a, b)| a != b)
            .count()
    }
}

fn order_key(s: i8) -> u8 {
    // '+' (0x2b) sorts before '-' (0x2d)
    if s == 1 {
        0
    } else {
        1
    }
}

impl Ord for SpinConfiguration {
    fn cmp(&self, other: &Self) -> Ordering {
        self.spins
            .iter()
            .map(|&s| order_key(s))
            .cmp(other.spins.iter().map(|&s| order_key(s)))
    }
}

impl PartialOrd for SpinConfiguration {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.spins {
            f.write_str(if s == 1 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpinConfiguration({self})")
    }
}

impl FromStr for SpinConfiguration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spins = s
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::InvalidArgument(format!(
                    "unexpected character {other:?} in spin string"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spins })
    }
}

/// Sparse symmetric spin-glass model.
///
/// Energy accumulates pair terms in ascending `(i, j)` order and then bias
/// terms in ascending `j`; with integer or dyadic parameters every evaluation
/// route in the crate is bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    n: usize,
    couplings: BTreeMap<(usize, usize), f64>,
    biases: Vec<f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl IsingModel {
    /// Builds a model from `(i, j, J_ij)` triples. Pairs may be given in
    /// either orientation but each unordered pair at most once.
    pub fn new(
        n: usize,
        couplings: impl IntoIterator<Item = (usize, usize, f64)>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        if biases.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                actual: biases.len(),
            });
        }
        if let Some((j, h)) = biases.iter().enumerate().find(|(_, h)| !h.is_finite()) {
            return Err(Error::InvalidModel(format!("bias h_{j} = {h} is not finite")));
        }
        let mut map = BTreeMap::new();
        for (i, j, value) in couplings {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange {
                    index: i.max(j),
                    len: n,
                });
            }
            if i == j {
                return Err(Error::InvalidModel(format!("self-coupling on spin {i}")));
            }
            if !value.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "coupling J_{i},{j} = {value} is not finite"
                )));
            }
            let key = (i.min(j), i.max(j));
            if map.insert(key, value).is_some() {
                return Err(Error::InvalidModel(format!(
                    "duplicate coupling for pair ({}, {})",
                    key.0, key.1
                )));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (&(i, j), &value) in &map {
            adjacency[i].push((j, value));
            adjacency[j].push((i, value));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(j, _)| j);
        }
        Ok(Self {
            n,
            couplings: map,
            biases,
            adjacency,
        })
    }

    /// Random dense instance with couplings and biases drawn uniformly from
    /// multiples of `1/8` in `[-1, 1]` (bias scale `bias_scale` times that).
    /// Dyadic values keep every energy computation exact.
    pub fn random_dyadic<R: Rng + ?Sized>(n: usize, bias_scale: f64, rng: &mut R) -> Self {
        let mut couplings = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.gen_range(-8i32..=8) as f64 / 8.0;
                if v != 0.0 {
                    couplings.push((i, j, v));
                }
            }
        }
        let biases = (0..n)
            .map(|_| (rng.gen_range(-8i32..=8) as f64 * bias_scale).round() / 8.0)
            .collect();
        Self::new(n, couplings, biases).expect("generated model is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Couplings keyed by `(i, j)` with `i < j`.
    pub fn couplings(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.couplings
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0.0)
    }

    /// Neighbors of spin `k` with their couplings, ascending by index.
    pub fn adjacency(&self, k: usize) -> &[(usize, f64)] {
        &self.adjacency[k]
    }

    pub fn check_dim(&self, s: &SpinConfiguration) -> Result<()> {
        if s.len() != self.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                actual: s.len(),
            });
        }
        Ok(())
    }

    pub fn energy(&self, s: &SpinConfiguration) -> Result<f64> {
        self.check_dim(s)?;
        Ok(self.energy_unchecked(s))
    }

    pub(crate) fn energy_unchecked(&self, s: &SpinConfiguration) -> f64 {
        let spins = s.spins();
        let mut e = 0.0;
        for (&(i, j), &value) in &self.couplings {
            e -= value * f64::from(spins[i]) * f64::from(spins[j]);
        }
        for (j, &h) in self.biases.iter().enumerate() {
            e -= h * f64::from(spins[j]);
        }
        e
    }

    /// `h_k + sum_j J_kj s_j`, summed in ascending neighbor order.
    pub fn local_field(&self, s: &SpinConfiguration, k: usize) -> f64 {
        let spins = s.spins();
        let mut field = self.biases[k];
        for &(j, value) in &self.adjacency[k] {
            field += value * f64::from(spins[j]);
        }
        field
    }

    /// `E(s with spin k flipped) - E(s)` in O(degree of k).
    pub fn delta_energy(&self, s: &SpinConfiguration, k: usize) -> Result<f64> {
        self.check_dim(s)?;
        if k >= self.n {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.n,
            });
        }
        Ok(self.delta_unchecked(s, k))
    }

    #[inline]
    pub(crate) fn delta_unchecked(&self, s: &SpinConfiguration, k: usize) -> f64 {
        2.0 * f64::from(s.get(k)) * self.local_field(s, k)
    }

    /// Median `|dE|` over single flips of random states; the natural energy
    /// unit of the instance.
    pub fn energy_scale<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> f64 {
        if self.n == 0 {
            return 1.0;
        }
        let mut values: Vec<f64> = (0..samples.max(1))
            .map(|_| {
                let s = SpinConfiguration::random(self.n, rng);
                let k = rng.gen_range(0..self.n);
                self.delta_unchecked(&s, k).abs()
            })
            .collect();
        values.sort_by(f64::total_cmp);
        let median = values[values.len() / 2];
        if median > 0.0 {
            median
        } else {
            values.iter().copied().fold(0.0, f64::max).max(1.0)
        }
    }

    /// Text form: `# ising n=<N>`, then `h <j> <value>` and `J <i> <j> <value>`.
    pub fn to_text(&self) -> String {
        let mut out = format!("# ising n={}\n", self.n);
        for (j, h) in self.biases.iter().enumerate() {
            if *h != 0.0 {
                out.push_str(&format!("h {j} {h:?}\n"));
            }
        }
        for (&(i, j), value) in &self.couplings {
            out.push_str(&format!("J {i} {j} {value:?}\n"));
        }
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let n = loop {
            let Some((idx, line)) = lines.next() else {
                return Err(Error::parse(origin, 0, "missing `# ising n=<N>` header"));
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            break parse_header_n(line, "ising")
                .ok_or_else(|| Error::parse(origin, idx + 1, "expected `# ising n=<N>` header"))?;
        };
        let mut biases = vec![0.0; n];
        let mut seen_bias = vec![false; n];
        let mut couplings = Vec::new();
        for (idx, raw) in lines {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| Error::parse(origin, line_no, msg.to_string());
            match tokens[0] {
                "h" => {
                    let [_, j, v] = tokens[..] else {
                        return Err(bad("expected `h <j> <value>`"));
                    };
                    let j: usize = j.parse().map_err(|_| bad("bad spin index"))?;
                    let v: f64 = v.parse().map_err(|_| bad("bad bias value"))?;
                    if j >= n {
                        return Err(bad("spin index out of range"));
                    }
                    if seen_bias[j] {
                        return Err(bad("duplicate bias"));
                    }
                    seen_bias[j] = true;
                    biases[j] = v;
                }
                "J" => {
                    let [_, i, j, v] = tokens[..] else {
                        return Err(bad("expected `J <i> <j> <value>`"));
                    };
                    let i: usize = i.parse().map_err(|_| bad("bad spin index"))?;
                    let j: usize = j.parse().map_err(|_| bad("bad spin index"))?;
                    let v: f64 = v.parse().map_err(|_| bad("bad coupling value"))?;
                    couplings.push((i, j, v));
                }
                other => return Err(bad(&format!("unknown directive `{other}`"))),
            }
        }
        Self::new(n, couplings, biases).map_err(|e| Error::parse(origin, 0, e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Parses `# <kind> n=<N>` (extra `key=value` tokens ignored).
pub(crate) fn parse_header_n(line: &str, kind: &str) -> Option<usize> {
    let fields = parse_header(line, kind)?;
    fields.get("n")?.parse().ok()
}

/// Parses `# <kind> key=value ...` into a map.
pub(crate) fn parse_header(line: &str, kind: &str) -> Option<BTreeMap<String, String>> {
    let rest = line.strip_prefix('#')?.trim_start();
    let mut tokens = rest.split_whitespace();
    if tokens.next()? != kind {
        return None;
    }
    tokens
        .map(|t| {
            t.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RandomSource;
    use proptest::prelude::*;

    fn brute_energy(model: &IsingModel, s: &SpinConfiguration) -> f64 {
        // term-by-term over all ordered pairs i < j, independent of the
        // sparse map iteration
        let n = model.n();
        let mut e = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                e -= model.coupling(i, j) * s.get(i) as f64 * s.get(j) as f64;
            }
        }
        for j in 0..n {
            e -= model.biases()[j] * s.get(j) as f64;
        }
        e
    }

    #[test]
    fn bias_terms_cancel() {
        let m = IsingModel::new(2, [], vec![1.0, -1.0]).unwrap();
        assert_eq!(m.energy(&"++".parse().unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn single_ferromagnetic_bond() {
        let m = IsingModel::new(2, [(0, 1, 1.0)], vec![0.0, 0.0]).unwrap();
        assert_eq!(m.energy(&"++".parse().unwrap()).unwrap(), -1.0);
    }

    #[test]
    fn energy_matches_term_by_term_sum() {
        let mut rng = RandomSource::new(11, 0).rng();
        for _ in 0..20 {
            let m = IsingModel::random_dyadic(8, 0.5, &mut rng);
            let s = SpinConfiguration::random(8, &mut rng);
            assert_eq!(m.energy(&s).unwrap(), brute_energy(&m, &s));
        }
    }

    #[test]
    fn energy_rejects_wrong_size() {
        let m = IsingModel::new(3, [], vec![0.0; 3]).unwrap();
        assert!(matches!(
            m.energy(&SpinConfiguration::all_up(2)),
            Err(Error::SizeMismatch { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn delta_single_spin() {
        let m = IsingModel::new(1, [], vec![1.0]).unwrap();
        assert_eq!(m.delta_energy(&"+".parse().unwrap(), 0).unwrap(), 2.0);
        assert!(matches!(
            m.delta_energy(&"+".parse().unwrap(), 1),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn delta_matches_full_evaluation() {
        let mut rng = RandomSource::new(12, 0).rng();
        for _ in 0..10 {
            let m = IsingModel::random_dyadic(10, 0.5, &mut rng);
            let s = SpinConfiguration::random(10, &mut rng);
            let e = m.energy(&s).unwrap();
            for k in 0..10 {
                let full = m.energy(&s.flipped(k)).unwrap() - e;
                assert_eq!(m.delta_energy(&s, k).unwrap(), full);
            }
        }
    }

    #[test]
    fn neighbors_in_flip_order() {
        let s: SpinConfiguration = "+".parse().unwrap();
        assert_eq!(s.neighbors().map(|t| t.to_string()).collect::<Vec<_>>(), ["-"]);
        let s: SpinConfiguration = "+-".parse().unwrap();
        assert_eq!(
            s.neighbors().map(|t| t.to_string()).collect::<Vec<_>>(),
            ["--", "++"]
        );
    }

    #[test]
    fn neighbor_relation_symmetric_n12() {
        let n = 12;
        for idx in 0..(1u64 << n) {
            let s = SpinConfiguration::from_index(n, idx);
            let nb: Vec<_> = s.neighbors().collect();
            assert_eq!(nb.len(), n);
            for t in nb {
                assert_eq!(s.hamming(&t), 1);
                assert!(t.neighbors().any(|u| u == s));
            }
        }
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(IsingModel::new(2, [(0, 0, 1.0)], vec![0.0; 2]).is_err());
        assert!(IsingModel::new(2, [(0, 1, 1.0), (1, 0, 2.0)], vec![0.0; 2]).is_err());
        assert!(IsingModel::new(2, [(0, 1, f64::NAN)], vec![0.0; 2]).is_err());
        assert!(IsingModel::new(2, [], vec![0.0, f64::INFINITY]).is_err());
        assert!(IsingModel::new(2, [(0, 2, 1.0)], vec![0.0; 2]).is_err());
    }

    #[test]
    fn text_format_round_trip_and_errors() {
        let mut rng = RandomSource::new(5, 0).rng();
        let m = IsingModel::random_dyadic(6, 0.5, &mut rng);
        let back = IsingModel::parse(&m.to_text(), "mem").unwrap();
        assert_eq!(m, back);

        let err = IsingModel::parse("# ising n=2\nK 0 1 1.0\n", "mem").unwrap_err();
        assert!(err.to_string().contains("unknown directive"), "{err}");
        assert!(IsingModel::parse("J 0 1 1\n", "mem").is_err());
        assert!(IsingModel::parse("# ising n=2\nJ 0 5 1\n", "mem").is_err());
    }

    #[test]
    fn spin_string_order_matches_display() {
        let a: SpinConfiguration = "+-+".parse().unwrap();
        let b: SpinConfiguration = "-++".parse().unwrap();
        assert_eq!(a.cmp(&b), a.to_string().cmp(&b.to_string()));
    }

    proptest! {
        #[test]
        fn zero_field_flip_symmetry(seed in any::<u64>(), idx in 0u64..1024) {
            let mut rng = RandomSource::from_seed(seed).rng();
            let m = IsingModel::random_dyadic(10, 0.0, &mut rng);
            let s = SpinConfiguration::from_index(10, idx);
            prop_assert_eq!(m.energy(&s).unwrap(), m.energy(&s.inverted()).unwrap());
        }

        #[test]
        fn delta_is_an_involution(seed in any::<u64>(), idx in 0u64..256, k in 0usize..8) {
            let mut rng = RandomSource::from_seed(seed).rng();
            let m = IsingModel::random_dyadic(8, 1.0, &mut rng);
            let s = SpinConfiguration::from_index(8, idx);
            let forward = m.delta_energy(&s, k).unwrap();
            let back = m.delta_energy(&s.flipped(k), k).unwrap();
            prop_assert_eq!(forward + back, 0.0);
        }

        #[test]
        fn index_round_trip(idx in 0u64..(1 << 16)) {
            prop_assert_eq!(SpinConfiguration::from_index(16, idx).to_index(), idx);
        }
    }
}
