//! One-way ANOVA, pooled-variance pairwise comparisons, paired tests and
//! rank correlation over collected rewards.

use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};

/// Sample size, mean and (n - 1) standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptive {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl Descriptive {
    pub fn of(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::domain("cannot describe an empty sample"));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("sample contains non-finite values"));
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self { n, mean, sd })
    }

    pub fn se(&self) -> f64 {
        self.sd / (self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anova {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
    /// Pooled within-group mean square.
    pub msw: f64,
}

/// One-way ANOVA computed from group summaries.
pub fn anova_from_summaries(groups: &[Descriptive]) -> Result<Anova> {
    if groups.len() < 2 {
        return Err(Error::domain("ANOVA needs at least two groups"));
    }
    if groups.iter().any(|g| g.n < 2) {
        return Err(Error::domain("every ANOVA group needs at least two samples"));
    }
    let total_n: usize = groups.iter().map(|g| g.n).sum();
    let grand = groups.iter().map(|g| g.n as f64 * g.mean).sum::<f64>() / total_n as f64;
    let ssb: f64 = groups.iter().map(|g| g.n as f64 * (g.mean - grand).powi(2)).sum();
    let ssw: f64 = groups.iter().map(|g| (g.n - 1) as f64 * g.sd.powi(2)).sum();
    let df_between = groups.len() - 1;
    let df_within = total_n - groups.len();
    if !(ssw > 0.0) {
        return Err(Error::domain("zero within-group variance; F is undefined"));
    }
    let msw = ssw / df_within as f64;
    let f = (ssb / df_between as f64) / msw;
    let dist = FisherSnedecor::new(df_between as f64, df_within as f64).map_err(|e| Error::domain(e.to_string()))?;
    let p = if f > 0.0 { dist.sf(f).clamp(0.0, 1.0) } else { 1.0 };
    Ok(Anova {
        f,
        df_between,
        df_within,
        p,
        msw,
    })
}

pub fn anova_oneway(groups: &[&[f64]]) -> Result<Anova> {
    let summaries = groups.iter().map(|g| Descriptive::of(g)).collect::<Result<Vec<_>>>()?;
    anova_from_summaries(&summaries)
}

/// One row of `stats.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    /// `"I-J"` label.
    pub comparison: String,
    pub mean_diff: f64,
    pub se: f64,
    pub p: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub const STATS_HEADER: [&str; 6] = ["comparison", "mean_diff", "se", "p", "ci_lo", "ci_hi"];

/// Multiplicity handling for pairwise rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjustment {
    /// Plain pooled-variance t (Fisher LSD).
    None,
    /// Bonferroni over all `k (k - 1) / 2` pairs of the `k` groups.
    Bonferroni,
}

fn students_t(df: usize) -> Result<StudentsT> {
    StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::domain(e.to_string()))
}

/// Compares `reference` against every other group using the ANOVA pooled
/// variance: `SE = sqrt(MSW (1/n_I + 1/n_J))`, two-sided t with `df_within`.
pub fn pairwise_from_summaries(
    names: &[&str],
    groups: &[Descriptive],
    reference: usize,
    adjustment: Adjustment,
) -> Result<Vec<ComparisonRow>> {
    if names.len() != groups.len() {
        return Err(Error::Shape(format!("{} names for {} groups", names.len(), groups.len())));
    }
    if reference >= groups.len() {
        return Err(Error::domain(format!("reference group {reference} out of range")));
    }
    let anova = anova_from_summaries(groups)?;
    let t = students_t(anova.df_within)?;
    let k = groups.len();
    let family = match adjustment {
        Adjustment::None => 1.0,
        Adjustment::Bonferroni => (k * (k - 1) / 2) as f64,
    };
    let crit = t.inverse_cdf(1.0 - 0.025 / family);
    let r = groups[reference];
    Ok(groups
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != reference)
        .map(|(j, g)| {
            let mean_diff = r.mean - g.mean;
            let se = (anova.msw * (1.0 / r.n as f64 + 1.0 / g.n as f64)).sqrt();
            let p = (2.0 * t.sf((mean_diff / se).abs()) * family).min(1.0);
            ComparisonRow {
                comparison: format!("{}-{}", names[reference], names[j]),
                mean_diff,
                se,
                p,
                ci_lo: mean_diff - crit * se,
                ci_hi: mean_diff + crit * se,
            }
        })
        .collect())
}

pub fn pairwise_comparisons(
    names: &[&str],
    samples: &[&[f64]],
    reference: usize,
    adjustment: Adjustment,
) -> Result<Vec<ComparisonRow>> {
    let summaries = samples.iter().map(|g| Descriptive::of(g)).collect::<Result<Vec<_>>>()?;
    pairwise_from_summaries(names, &summaries, reference, adjustment)
}

/// Paired t statistic of `a - b` and its one-sided p-value for the
/// alternative `a > b`. Constant differences give an infinite t, or `(0, 1)`
/// when they are all zero.
pub fn paired_one_sided(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::domain("paired test needs two equal samples of size >= 2"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s = Descriptive::of(&d)?;
    if s.sd == 0.0 {
        let p = if s.mean > 0.0 { 0.0 } else { 1.0 };
        let t = if s.mean > 0.0 { f64::INFINITY } else if s.mean < 0.0 { f64::NEG_INFINITY } else { 0.0 };
        return Ok((t, p));
    }
    let t_stat = s.mean / s.se();
    Ok((t_stat, students_t(s.n - 1)?.sf(t_stat)))
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // ties share the average rank
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::domain("correlation of a constant series is undefined"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::domain("spearman needs two equal series of length >= 2"));
    }
    pearson(&ranks(x), &ranks(y))
}
