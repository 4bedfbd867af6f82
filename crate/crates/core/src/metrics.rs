//! Verification and identification metrics over similarity scores.
//!
//! Operating points use the empirical step functions with decision rule
//! "match iff score >= t": `FMR(t) = #{impostor >= t} / n_i` and
//! `FNMR(t) = #{genuine < t} / n_g`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, Embedding};
use crate::error::{Error, Result};
use crate::format::extended;

pub const DEFAULT_FMR_TARGET: f64 = 0.01;
pub const DEFAULT_BOOTSTRAP: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;
pub const MIN_BOOTSTRAP: usize = 100;

fn validate(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyScoreList);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore);
    }
    Ok(())
}

fn sorted(scores: &[f64]) -> Vec<f64> {
    let mut v = scores.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Number of elements of ascending `v` strictly below `t`.
fn count_below(v: &[f64], t: f64) -> usize {
    v.partition_point(|&x| x < t)
}

/// Area under the ROC curve as the Mann-Whitney statistic, ties counted one half.
pub fn auc(genuine: &[f64], impostor: &[f64]) -> Result<f64> {
    validate(genuine)?;
    validate(impostor)?;
    let mut all: Vec<(f64, bool)> = genuine
        .iter()
        .map(|&s| (s, true))
        .chain(impostor.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Doubled midranks keep everything integral.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let midrank2 = (i + 1 + j + 1) as u128;
        let genuine_in_group = all[i..=j].iter().filter(|x| x.1).count() as u128;
        rank_sum2 += midrank2 * genuine_in_group;
        i = j + 1;
    }
    let ng = genuine.len() as u128;
    let ni = impostor.len() as u128;
    let u2 = rank_sum2 - ng * (ng + 1);
    let total2 = 2 * ng * ni;
    // Divide on the side at or above one half and subtract for the other: the
    // subtraction is exact there, so swapping the lists gives exactly 1 - auc.
    Ok(if 2 * u2 >= total2 {
        u2 as f64 / total2 as f64
    } else {
        1.0 - (total2 - u2) as f64 / total2 as f64
    })
}

/// Rate at a threshold, the threshold possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub rate: f64,
    #[serde(with = "extended")]
    pub threshold: f64,
}

/// FNMR at the smallest impostor-score threshold whose FMR stays within `fmr_target`.
pub fn fnmr_at_fmr(genuine: &[f64], impostor: &[f64], fmr_target: f64) -> Result<OperatingPoint> {
    validate(genuine)?;
    validate(impostor)?;
    if !(fmr_target > 0.0 && fmr_target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fmr target {fmr_target} outside (0, 1)"
        )));
    }
    let imp = sorted(impostor);
    let n = imp.len();
    let mut threshold = f64::INFINITY;
    let mut i = 0;
    while i < n {
        if (n - i) as f64 / n as f64 <= fmr_target {
            threshold = imp[i];
            break;
        }
        let v = imp[i];
        while i < n && imp[i] == v {
            i += 1;
        }
    }
    let gen = sorted(genuine);
    Ok(OperatingPoint {
        rate: count_below(&gen, threshold) as f64 / gen.len() as f64,
        threshold,
    })
}

/// Equal error rate over all distinct score thresholds plus +-inf.
///
/// Picks the threshold minimising |FMR - FNMR| (smaller threshold on ties)
/// and reports the mean of the two rates there.
pub fn eer(genuine: &[f64], impostor: &[f64]) -> Result<OperatingPoint> {
    validate(genuine)?;
    validate(impostor)?;
    let gen = sorted(genuine);
    let imp = sorted(impostor);
    let (ng, ni) = (gen.len(), imp.len());

    let mut candidates: Vec<f64> = Vec::with_capacity(ng + ni + 2);
    candidates.push(f64::NEG_INFINITY);
    candidates.extend(merge_distinct(&gen, &imp));
    candidates.push(f64::INFINITY);

    let mut best: Option<(u128, usize, usize, f64)> = None;
    let (mut gi, mut ii) = (0usize, 0usize);
    for &t in &candidates {
        while gi < ng && gen[gi] < t {
            gi += 1;
        }
        while ii < ni && imp[ii] < t {
            ii += 1;
        }
        let false_match = ni - ii;
        let false_non_match = gi;
        let gap = (false_match as u128 * ng as u128).abs_diff(false_non_match as u128 * ni as u128);
        if best.is_none_or(|b| gap < b.0) {
            best = Some((gap, false_match, false_non_match, t));
        }
    }
    let (_, fm, fnm, threshold) = best.expect("candidates non-empty");
    let fmr = fm as f64 / ni as f64;
    let fnmr = fnm as f64 / ng as f64;
    Ok(OperatingPoint {
        rate: (fmr + fnmr) / 2.0,
        threshold,
    })
}

fn merge_distinct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let v = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x <= y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}

fn mean_and_var(v: &[f64]) -> (f64, f64) {
    if v.iter().all(|&x| x == v[0]) {
        return (v[0], 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Separation `(mu_g - mu_i) / sqrt((s_g^2 + s_i^2) / 2)` with unbiased variances.
///
/// With both variances zero the result is 0 for equal means and +-inf otherwise.
pub fn dprime(genuine: &[f64], impostor: &[f64]) -> Result<f64> {
    for list in [genuine, impostor] {
        if list.len() < 2 {
            return Err(Error::TooFewScores {
                needed: 2,
                got: list.len(),
            });
        }
        validate(list)?;
    }
    let (mg, vg) = mean_and_var(genuine);
    let (mi, vi) = mean_and_var(impostor);
    let diff = mg - mi;
    let pooled = vg + vi;
    if pooled == 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY.copysign(diff) });
    }
    Ok(diff / (pooled / 2.0).sqrt())
}

/// Embedding with identity and subject labels for identification.
#[derive(Debug, Clone)]
pub struct Labeled {
    pub id: String,
    pub subject: String,
    pub embedding: Embedding,
}

/// Whether a same-subject gallery entry ranks within the top `k` of `scores`.
///
/// `scores[j]` pairs with `gallery[j] = (id, subject)`; ties rank the smaller
/// gallery id first.
pub fn hit_at_k(scores: &[f64], gallery: &[(&str, &str)], subject: &str, k: usize) -> bool {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| gallery[a].0.cmp(gallery[b].0))
    });
    order.iter().take(k).any(|&j| gallery[j].1 == subject)
}

/// Closed-set rank-`k` identification rate. A probe is never compared with a
/// gallery entry carrying its own image id.
pub fn rank_k(gallery: &[Labeled], probes: &[Labeled], k: usize) -> Result<f64> {
    if gallery.is_empty() {
        return Err(Error::EmptyGallery);
    }
    if probes.is_empty() {
        return Err(Error::InvalidParameter("no probes".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    fn others<'a>(gallery: &'a [Labeled], p: &'a Labeled) -> impl Iterator<Item = &'a Labeled> + 'a {
        gallery.iter().filter(move |g| g.id != p.id)
    }
    let candidates = |p| others(gallery, p);
    if let Some(p) = probes.iter().find(|p| !candidates(p).any(|g| g.subject == p.subject)) {
        return Err(Error::SubjectNotInGallery(p.subject.clone()));
    }
    let hits = probes
        .par_iter()
        .map(|p| {
            let labels: Vec<(&str, &str)> = candidates(p).map(|g| (g.id.as_str(), g.subject.as_str())).collect();
            let scores = candidates(p)
                .map(|g| cosine(&p.embedding, &g.embedding))
                .collect::<Result<Vec<_>>>()?;
            Ok(hit_at_k(&scores, &labels, &p.subject, k))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / probes.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Auc,
    FnmrAtFmr(f64),
    Eer,
    Dprime,
}

impl Metric {
    pub fn evaluate(self, genuine: &[f64], impostor: &[f64]) -> Result<f64> {
        match self {
            Metric::Auc => auc(genuine, impostor),
            Metric::FnmrAtFmr(t) => Ok(fnmr_at_fmr(genuine, impostor, t)?.rate),
            Metric::Eer => Ok(eer(genuine, impostor)?.rate),
            Metric::Dprime => dprime(genuine, impostor),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: DEFAULT_BOOTSTRAP,
            level: DEFAULT_LEVEL,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "extended")]
    pub lo: f64,
    #[serde(with = "extended")]
    pub hi: f64,
    pub level: f64,
    #[serde(rename = "B")]
    pub replicates: usize,
    pub seed: u64,
}

/// Linear-interpolation empirical quantile of ascending `v`.
fn quantile(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    let (a, b) = (v[lo], v[hi]);
    if a == b {
        a
    } else {
        a + (h - lo as f64) * (b - a)
    }
}

fn resample(rng: &mut impl Rng, v: &[f64]) -> Vec<f64> {
    (0..v.len()).map(|_| v[rng.random_range(0..v.len())]).collect()
}

/// Percentile bootstrap interval. Genuine and impostor lists are resampled
/// independently; replicate `b` draws from a generator seeded with `seed + b`.
pub fn bootstrap_ci(metric: Metric, genuine: &[f64], impostor: &[f64], cfg: &BootstrapConfig) -> Result<Interval> {
    validate(genuine)?;
    validate(impostor)?;
    if cfg.replicates < MIN_BOOTSTRAP {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP} replicates, got {}",
            cfg.replicates
        )));
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::InvalidParameter(format!("level {} outside (0, 1)", cfg.level)));
    }
    let mut stats = (0..cfg.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(b as u64));
            let g = resample(&mut rng, genuine);
            let i = resample(&mut rng, impostor);
            metric.evaluate(&g, &i)
        })
        .collect::<Result<Vec<f64>>>()?;
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - cfg.level) / 2.0;
    Ok(Interval {
        lo: quantile(&stats, alpha),
        hi: quantile(&stats, 1.0 - alpha),
        level: cfg.level,
        replicates: cfg.replicates,
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceIntervals {
    pub auc: Interval,
    pub fnmr_at_fmr: Interval,
    pub eer: Interval,
    pub dprime: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub fnmr_at_fmr: f64,
    pub fmr_target: f64,
    #[serde(with = "extended")]
    pub threshold_used: f64,
    pub eer: f64,
    #[serde(with = "extended")]
    pub eer_threshold: f64,
    #[serde(with = "extended")]
    pub dprime: f64,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub ci: Option<ConfidenceIntervals>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub fmr_target: f64,
    pub bootstrap: Option<BootstrapConfig>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            fmr_target: DEFAULT_FMR_TARGET,
            bootstrap: None,
        }
    }
}

impl MetricReport {
    pub fn compute(genuine: &[f64], impostor: &[f64], cfg: &MetricConfig) -> Result<Self> {
        let op = fnmr_at_fmr(genuine, impostor, cfg.fmr_target)?;
        let eer_point = eer(genuine, impostor)?;
        let ci = match &cfg.bootstrap {
            Some(b) => Some(ConfidenceIntervals {
                auc: bootstrap_ci(Metric::Auc, genuine, impostor, b)?,
                fnmr_at_fmr: bootstrap_ci(Metric::FnmrAtFmr(cfg.fmr_target), genuine, impostor, b)?,
                eer: bootstrap_ci(Metric::Eer, genuine, impostor, b)?,
                dprime: bootstrap_ci(Metric::Dprime, genuine, impostor, b)?,
            }),
            None => None,
        };
        Ok(Self {
            auc: auc(genuine, impostor)?,
            fnmr_at_fmr: op.rate,
            fmr_target: cfg.fmr_target,
            threshold_used: op.threshold,
            eer: eer_point.rate,
            eer_threshold: eer_point.threshold,
            dprime: dprime(genuine, impostor)?,
            n_genuine: genuine.len(),
            n_impostor: impostor.len(),
            ci,
        })
    }
}
