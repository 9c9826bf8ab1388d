//! Comparison of the valley sets found by two samplers: coincidence,
//! parameter histograms split by provenance, and the ratio of upper-state
//! counts between shared and unshared valleys.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::ising::SpinConfiguration;
use crate::valley::{Discovery, ValleyRecord, ValleyRegistry};
use crate::{Error, Result};

/// Split of valleys by discovery: A is the reference, B the comparator.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Partition {
    pub a: String,
    pub b: String,
    /// Only B tags stamped before this cycle count (untimed tags always do).
    pub b_cut: Option<u64>,
    pub a_only: Vec<SpinConfiguration>,
    pub b_only: Vec<SpinConfiguration>,
    pub both: Vec<SpinConfiguration>,
}

impl Partition {
    pub fn a_count(&self) -> usize {
        self.a_only.len() + self.both.len()
    }

    /// `|A-only| / |A|`, `None` when A found nothing.
    pub fn missed_fraction(&self) -> Option<f64> {
        let total = self.a_count();
        (total > 0).then(|| self.a_only.len() as f64 / total as f64)
    }
}

fn found(tags: &Discovery, name: &str, cut: Option<u64>) -> bool {
    match (tags.get(name), cut) {
        (None, _) => false,
        (Some(_), None) | (Some(None), _) => true,
        (Some(Some(cycle)), Some(cut)) => *cycle < cut,
    }
}

pub fn coincidence(registry: &ValleyRegistry, a: &str, b: &str, b_cut: Option<u64>) -> Result<Partition> {
    for name in [a, b] {
        if !registry.samplers().contains(name) {
            return Err(Error::UnknownSampler(name.to_string()));
        }
    }
    let mut p = Partition {
        a: a.to_string(),
        b: b.to_string(),
        b_cut,
        ..Default::default()
    };
    for (lm, entry) in registry.entries() {
        let in_a = found(&entry.discovered_by, a, None);
        let in_b = found(&entry.discovered_by, b, b_cut);
        match (in_a, in_b) {
            (true, true) => p.both.push(lm.clone()),
            (true, false) => p.a_only.push(lm.clone()),
            (false, true) => p.b_only.push(lm.clone()),
            (false, false) => {}
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    ELm,
    EAct,
    DosBottom,
    WidthW,
    NLv,
}

impl Parameter {
    pub const ALL: [Parameter; 5] = [
        Parameter::ELm,
        Parameter::EAct,
        Parameter::DosBottom,
        Parameter::WidthW,
        Parameter::NLv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::ELm => "e_lm",
            Parameter::EAct => "e_act",
            Parameter::DosBottom => "dos_bottom",
            Parameter::WidthW => "width_w",
            Parameter::NLv => "n_lv",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown valley parameter `{name}`")))
    }

    pub fn value(self, r: &ValleyRecord) -> Option<f64> {
        match self {
            Parameter::ELm => Some(r.e_lm),
            Parameter::EAct => r.e_act,
            Parameter::DosBottom => r.dos_bottom,
            Parameter::WidthW => r.width_w,
            Parameter::NLv => Some(r.n_lv as f64),
        }
    }
}

/// Equal-width histogram over the observed range of A's valleys, with an
/// all-of-A layer and its split into shared and A-only valleys.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayeredHistogram {
    pub parameter: Parameter,
    pub edges: Vec<f64>,
    pub all: Vec<u64>,
    pub both: Vec<u64>,
    pub a_only: Vec<u64>,
    /// A's valleys without a record or without this parameter.
    pub excluded: usize,
}

impl LayeredHistogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,all,both,a_only\n");
        for k in 0..self.all.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.edges[k],
                self.edges[k + 1],
                self.all[k],
                self.both[k],
                self.a_only[k]
            );
        }
        out
    }
}

/// Equal-width bin edges over `[min, max]`; a degenerate range is widened
/// to one unit around its value.
pub fn equal_width_edges(values: &[f64], bins: usize) -> Vec<f64> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / bins as f64;
    (0..=bins).map(|k| if k == bins { hi } else { lo + width * k as f64 }).collect()
}

/// Bin of `x` under `edges`; the last bin is closed on the right.
pub fn bin_index(edges: &[f64], x: f64) -> usize {
    let bins = edges.len() - 1;
    edges[1..bins].partition_point(|&e| e <= x)
}

pub fn parameter_histogram(
    registry: &ValleyRegistry,
    partition: &Partition,
    parameter: Parameter,
    bins: usize,
) -> Result<LayeredHistogram> {
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let value = |lm: &SpinConfiguration| {
        registry
            .get(lm)
            .and_then(|e| e.record.as_ref())
            .and_then(|r| parameter.value(r))
    };
    let both: Vec<f64> = partition.both.iter().filter_map(value).collect();
    let a_only: Vec<f64> = partition.a_only.iter().filter_map(value).collect();
    let excluded = partition.a_count() - both.len() - a_only.len();
    let all_values: Vec<f64> = both.iter().chain(&a_only).copied().collect();
    let edges = equal_width_edges(&all_values, bins);
    let nb = edges.len().saturating_sub(1);
    let mut h = LayeredHistogram {
        parameter,
        edges,
        all: vec![0; nb],
        both: vec![0; nb],
        a_only: vec![0; nb],
        excluded,
    };
    for &x in &both {
        let k = bin_index(&h.edges, x);
        h.both[k] += 1;
        h.all[k] += 1;
    }
    for &x in &a_only {
        let k = bin_index(&h.edges, x);
        h.a_only[k] += 1;
        h.all[k] += 1;
    }
    Ok(h)
}

pub fn parameter_histograms(
    registry: &ValleyRegistry,
    partition: &Partition,
    parameters: &[Parameter],
    bins: usize,
) -> Result<Vec<LayeredHistogram>> {
    parameters
        .iter()
        .map(|&p| parameter_histogram(registry, partition, p, bins))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketParameter {
    NLow,
    EAct,
    WidthW,
}

impl BucketParameter {
    pub fn name(self) -> &'static str {
        match self {
            BucketParameter::NLow => "n_low",
            BucketParameter::EAct => "e_act",
            BucketParameter::WidthW => "width_w",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        [BucketParameter::NLow, BucketParameter::EAct, BucketParameter::WidthW]
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown bucket parameter `{name}`")))
    }

    fn value(self, r: &ValleyRecord) -> Option<f64> {
        match self {
            BucketParameter::NLow => r.n_low.map(|v| v as f64),
            BucketParameter::EAct => r.e_act,
            BucketParameter::WidthW => r.width_w,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bucketing {
    pub parameter: BucketParameter,
    /// Bucket edges; quartiles over A's valleys when `None`.
    pub edges: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioResult {
    pub bucket: String,
    pub sum_up_coincident: u64,
    pub sum_up_unique: u64,
    pub coincident_valleys: usize,
    pub unique_valleys: usize,
    /// `sum_up_coincident / sum_up_unique`; `None` (undefined) when the
    /// unique side is empty or sums to zero.
    pub ratio: Option<f64>,
    /// Ratio of per-valley mean `n_up` values, for sensitivity.
    pub mean_ratio: Option<f64>,
}

impl RatioResult {
    pub fn defined(&self) -> bool {
        self.ratio.is_some()
    }

    fn from_groups(bucket: String, coincident: &[u64], unique: &[u64]) -> Self {
        let sc: u64 = coincident.iter().sum();
        let su: u64 = unique.iter().sum();
        let mean_ratio = (!coincident.is_empty() && su > 0)
            .then(|| (sc as f64 / coincident.len() as f64) / (su as f64 / unique.len() as f64));
        Self {
            bucket,
            sum_up_coincident: sc,
            sum_up_unique: su,
            coincident_valleys: coincident.len(),
            unique_valleys: unique.len(),
            ratio: (su > 0).then(|| sc as f64 / su as f64),
            mean_ratio,
        }
    }
}

/// Quartile edges (min, q1, median, q3, max) with duplicates removed.
pub fn quartile_edges(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    let mut edges: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0].into_iter().map(q).collect();
    edges.dedup();
    if edges.len() == 1 {
        edges.push(edges[0]);
    }
    edges
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioTable {
    pub results: Vec<RatioResult>,
    /// A's valleys left out because `n_up` (or the bucket value) is missing.
    pub excluded: usize,
}

impl RatioTable {
    pub fn overall(&self) -> &RatioResult {
        &self.results[0]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bucket,sum_coinc,sum_unique,ratio,defined\n");
        for r in &self.results {
            let ratio = r.ratio.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{}", r.bucket, r.sum_up_coincident, r.sum_up_unique, ratio, r.defined());
        }
        out
    }
}

/// Sums `n_up` over shared and A-only valleys, overall (first row) and
/// per bucket.
pub fn boa_ratio(registry: &ValleyRegistry, partition: &Partition, bucketing: Option<&Bucketing>) -> Result<RatioTable> {
    let record = |lm: &SpinConfiguration| registry.get(lm).and_then(|e| e.record.as_ref());
    let usable = |lms: &[SpinConfiguration]| -> Vec<(u64, Option<f64>)> {
        lms.iter()
            .filter_map(|lm| {
                let r = record(lm)?;
                let up = r.n_up? as u64;
                Some((up, bucketing.and_then(|b| b.parameter.value(r))))
            })
            .collect()
    };
    let both = usable(&partition.both);
    let unique = usable(&partition.a_only);
    let mut excluded = partition.a_count() - both.len() - unique.len();
    let ups = |xs: &[(u64, Option<f64>)]| xs.iter().map(|x| x.0).collect::<Vec<_>>();
    let mut results = vec![RatioResult::from_groups("all".into(), &ups(&both), &ups(&unique))];

    if let Some(b) = bucketing {
        let keyed: Vec<f64> = both.iter().chain(&unique).filter_map(|x| x.1).collect();
        excluded += both.len() + unique.len() - keyed.len();
        let edges = match &b.edges {
            Some(e) => {
                if e.len() < 2 || e.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidArgument("bucket edges must be >= 2 ascending values".into()));
                }
                e.clone()
            }
            None => quartile_edges(&keyed),
        };
        let nb = edges.len().saturating_sub(1);
        let mut groups: Vec<(Vec<u64>, Vec<u64>)> = vec![(Vec::new(), Vec::new()); nb];
        let place = |x: f64| -> Option<usize> {
            (nb > 0 && x >= edges[0] && x <= edges[nb]).then(|| bin_index(&edges, x))
        };
        for &(up, key) in &both {
            if let Some(k) = key.and_then(place) {
                groups[k].0.push(up);
            }
        }
        for &(up, key) in &unique {
            if let Some(k) = key.and_then(place) {
                groups[k].1.push(up);
            }
        }
        for (k, (c, u)) in groups.iter().enumerate() {
            let close = if k + 1 == nb { ']' } else { ')' };
            let label = format!("{}[{};{}{close}", b.parameter.name(), edges[k], edges[k + 1]);
            results.push(RatioResult::from_groups(label, c, u));
        }
    }
    Ok(RatioTable { results, excluded })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutSummary {
    pub b_cut: Option<u64>,
    pub a_only: usize,
    pub b_only: usize,
    pub both: usize,
    pub missed_fraction: Option<f64>,
}

impl CutSummary {
    fn of(p: &Partition) -> Self {
        Self {
            b_cut: p.b_cut,
            a_only: p.a_only.len(),
            b_only: p.b_only.len(),
            both: p.both.len(),
            missed_fraction: p.missed_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub a: String,
    pub b: String,
    /// Counts at each B cut point; the last entry uses every B tag.
    pub cuts: Vec<CutSummary>,
    pub histograms: Vec<LayeredHistogram>,
    pub ratios: RatioTable,
    /// Set when the shared or the A-only partition is empty, in which case
    /// the overall ratio may be undefined.
    pub empty_partition: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub b_cuts: Vec<u64>,
    pub bins: usize,
    pub parameters: Vec<Parameter>,
    pub bucketing: Option<Bucketing>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            b_cuts: Vec::new(),
            bins: 30,
            parameters: Parameter::ALL.to_vec(),
            bucketing: Some(Bucketing {
                parameter: BucketParameter::NLow,
                edges: None,
            }),
        }
    }
}

pub fn compare(registry: &ValleyRegistry, a: &str, b: &str, options: &CompareOptions) -> Result<ComparisonReport> {
    let full = coincidence(registry, a, b, None)?;
    let mut cuts = options
        .b_cuts
        .iter()
        .map(|&c| coincidence(registry, a, b, Some(c)).map(|p| CutSummary::of(&p)))
        .collect::<Result<Vec<_>>>()?;
    cuts.push(CutSummary::of(&full));
    let histograms = parameter_histograms(registry, &full, &options.parameters, options.bins)?;
    let ratios = boa_ratio(registry, &full, options.bucketing.as_ref())?;
    Ok(ComparisonReport {
        a: a.to_string(),
        b: b.to_string(),
        cuts,
        histograms,
        ratios,
        empty_partition: full.both.is_empty() || full.a_only.is_empty(),
    })
}

impl ComparisonReport {
    /// Output file name to contents, in name order.
    pub fn files(&self) -> BTreeMap<String, String> {
        let stem = format!("{}_vs_{}", self.a, self.b);
        let mut files = BTreeMap::new();
        for h in &self.histograms {
            files.insert(format!("hist_{stem}_{}.csv", h.parameter.name()), h.to_csv());
        }
        files.insert(format!("ratios_{stem}.csv"), self.ratios.to_csv());
        let summary = serde_json::json!({
            "a": self.a,
            "b": self.b,
            "cuts": self.cuts,
            "empty_partition": self.empty_partition,
            "ratio_exclusions": self.ratios.excluded,
            "ratios": self.ratios.results,
            "histogram_exclusions": self.histograms.iter().map(|h| (h.parameter.name(), h.excluded)).collect::<BTreeMap<_, _>>(),
        });
        files.insert(
            format!("summary_{stem}.json"),
            serde_json::to_string_pretty(&summary).expect("serializable summary") + "\n",
        );
        files
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::IsingModel;

    /// Every state of a field-free, coupling-free model is a minimum.
    fn flat(n: usize) -> IsingModel {
        IsingModel::new(n, [], vec![0.0; n]).unwrap()
    }

    fn state(i: u64) -> SpinConfiguration {
        SpinConfiguration::from_index(4, i)
    }

    fn record(lm: SpinConfiguration, n_up: usize, e_lm: f64) -> ValleyRecord {
        ValleyRecord {
            lm,
            e_lm,
            e_act: Some(1.0),
            arrhenius_intercept: None,
            fit_residual: None,
            e_max: 1.0,
            n_lv: n_up + 1,
            n_low: Some(1),
            n_up: Some(n_up),
            width_w: Some(1.0),
            width_intercept: None,
            dos_bottom: Some(1.0),
            dos_window: Some(0.1),
            arrhenius: vec![],
            rungs: vec![],
            sampled_energies: vec![],
            flat_neighbor: false,
        }
    }

    fn registry(a: &[u64], b: &[u64]) -> ValleyRegistry {
        let m = flat(4);
        let mut reg = ValleyRegistry::new(4);
        reg.register_sampler("A").unwrap();
        reg.register_sampler("B").unwrap();
        for &i in a {
            reg.tag_minimum(&m, &state(i), "A", None).unwrap();
        }
        for &i in b {
            reg.tag_minimum(&m, &state(i), "B", Some(i)).unwrap();
        }
        reg
    }

    #[test]
    fn set_arithmetic() {
        let reg = registry(&[1, 2, 3], &[2, 3, 4]);
        let p = coincidence(&reg, "A", "B", None).unwrap();
        assert_eq!(p.a_only, [state(1)]);
        assert_eq!(p.b_only, [state(4)]);
        let mut both = vec![state(2), state(3)];
        both.sort();
        assert_eq!(p.both, both);
        assert!((p.missed_fraction().unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(coincidence(&reg, "A", "C", None), Err(Error::UnknownSampler(_))));
    }

    #[test]
    fn identical_tags_miss_nothing() {
        let reg = registry(&[1, 2], &[1, 2]);
        let p = coincidence(&reg, "A", "B", None).unwrap();
        assert!(p.a_only.is_empty());
        assert_eq!(p.missed_fraction(), Some(0.0));
    }

    #[test]
    fn cut_points_limit_b() {
        // B found state i at cycle i
        let reg = registry(&[1, 2, 3], &[1, 2, 3]);
        let early = coincidence(&reg, "A", "B", Some(2)).unwrap();
        assert_eq!(early.both, [state(1)]);
        assert_eq!(early.a_only.len(), 2);
        let late = coincidence(&reg, "A", "B", Some(10)).unwrap();
        assert_eq!(late.both.len(), 3);
    }

    #[test]
    fn single_valley_histogram() {
        let mut reg = registry(&[1], &[]);
        reg.set_record(record(state(1), 3, -2.0)).unwrap();
        let p = coincidence(&reg, "A", "B", None).unwrap();
        let h = parameter_histogram(&reg, &p, Parameter::ELm, 30).unwrap();
        assert_eq!(h.all.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.all.iter().sum::<u64>(), 1);
        assert_eq!(h.a_only, h.all);
    }

    #[test]
    fn missing_records_are_excluded() {
        let mut reg = registry(&[1, 2], &[]);
        let mut r = record(state(1), 3, -2.0);
        r.e_act = None;
        reg.set_record(r).unwrap();
        let p = coincidence(&reg, "A", "B", None).unwrap();
        let h = parameter_histogram(&reg, &p, Parameter::EAct, 10).unwrap();
        assert_eq!(h.excluded, 2);
        assert!(h.all.is_empty());
        let h = parameter_histogram(&reg, &p, Parameter::ELm, 10).unwrap();
        assert_eq!(h.excluded, 1);
    }

    #[test]
    fn ratio_arithmetic() {
        let r = RatioResult::from_groups("all".into(), &[460], &[100]);
        assert_eq!(r.ratio, Some(4.6));
        let r = RatioResult::from_groups("all".into(), &[5], &[]);
        assert!(!r.defined());
    }

    #[test]
    fn constructed_ratio_is_three_in_every_bucket() {
        let mut reg = registry(&(0..12).collect::<Vec<_>>(), &(0..6).collect::<Vec<_>>());
        for i in 0..12u64 {
            let mut r = record(state(i), if i < 6 { 6 } else { 2 }, 0.0);
            r.n_low = Some((i % 3) as usize);
            reg.set_record(r).unwrap();
        }
        let p = coincidence(&reg, "A", "B", None).unwrap();
        let table = boa_ratio(
            &reg,
            &p,
            Some(&Bucketing {
                parameter: BucketParameter::NLow,
                edges: None,
            }),
        )
        .unwrap();
        assert!(table.results.len() > 1);
        for r in &table.results {
            if r.coincident_valleys > 0 && r.unique_valleys > 0 {
                assert_eq!(r.ratio, Some(3.0));
                assert!((r.mean_ratio.unwrap() - 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_a_only_is_flagged() {
        let mut reg = registry(&[1], &[1]);
        reg.set_record(record(state(1), 3, 0.0)).unwrap();
        let report = compare(&reg, "A", "B", &CompareOptions::default()).unwrap();
        assert!(report.empty_partition);
        assert!(!report.ratios.overall().defined());
        let files = report.files();
        assert!(files.contains_key("ratios_A_vs_B.csv"));
        assert!(files.contains_key("summary_A_vs_B.json"));
        assert!(files.contains_key("hist_A_vs_B_e_lm.csv"));
        assert!(files["ratios_A_vs_B.csv"].contains("all,3,0,,false"));
    }

    #[test]
    fn quartiles() {
        assert_eq!(quartile_edges(&[1.0, 2.0, 3.0, 4.0, 5.0]), [1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(quartile_edges(&[2.0, 2.0]), [2.0, 2.0]);
        assert!(quartile_edges(&[]).is_empty());
    }

    #[test]
    fn bins_cover_the_range() {
        let edges = equal_width_edges(&[0.0, 1.0], 4);
        assert_eq!(edges, [0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(bin_index(&edges, 0.0), 0);
        assert_eq!(bin_index(&edges, 0.25), 1);
        assert_eq!(bin_index(&edges, 1.0), 3);
    }
}
