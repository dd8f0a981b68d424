//! Aggregation of simulation records into distributional diagnostics:
//! liquidation probability, conditional moments of the closed fraction,
//! empirical CDF tables, an exponential-tail regression for the surviving
//! position, and moment-based normality checks for the noise term.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::sim::PathRecord;

/// Sample moments of one statistic.
#[derive(Debug, Clone, Serialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub skew: f64,
    pub excess_kurtosis: f64,
    /// Set when the sample has (numerically) zero variance.
    pub degenerate: bool,
}

pub fn moments(xs: &[f64]) -> Moments {
    let n = xs.len();
    if n == 0 {
        return Moments { count: 0, mean: f64::NAN, sd: f64::NAN, skew: f64::NAN, excess_kurtosis: f64::NAN, degenerate: true };
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in xs {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let scale = xs.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1e-300);
    let degenerate = m2 < 1e-24 * scale * scale || n < 2;
    let sd = (m2 * nf / (nf - 1.0).max(1.0)).sqrt();
    let (skew, kurt) = if degenerate {
        (f64::NAN, f64::NAN)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };
    Moments { count: n, mean, sd, skew, excess_kurtosis: kurt, degenerate }
}

/// A conditioning bucket for the terminal fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FqBucket {
    /// The fully closed event.
    Closed,
    /// `lo <= fq < hi`.
    Range { lo: f64, hi: f64 },
}

/// The conditioning grid: the closed bucket, then contiguous half-width-0.035
/// windows around centers `0.06 + 0.07 j`, extended at both ends so every
/// positive terminal fraction falls in exactly one bucket.
pub fn bucket_grid() -> Vec<(String, FqBucket)> {
    let mut out = vec![("closed".to_string(), FqBucket::Closed)];
    let half = 0.035;
    let first_lo = 0.06 + 0.07 - half; // left edge of the first centered window
    out.push(("(0,0.095)".to_string(), FqBucket::Range { lo: 0.0, hi: first_lo }));
    for j in 1..=8 {
        let center = 0.06 + 0.07 * j as f64;
        out.push((format!("{center:.2}"), FqBucket::Range { lo: center - half, hi: center + half }));
    }
    out.push((">=0.655".to_string(), FqBucket::Range { lo: 0.06 + 0.07 * 8.0 + half, hi: f64::INFINITY }));
    out
}

fn in_bucket(rec: &PathRecord, bucket: FqBucket) -> bool {
    match bucket {
        FqBucket::Closed => rec.liquidated,
        FqBucket::Range { lo, hi } => !rec.liquidated && rec.fq_t > 0.0 && rec.fq_t >= lo && rec.fq_t < hi,
    }
}

/// Per-bucket conditional statistics of the noise and cost terms.
#[derive(Debug, Clone, Serialize)]
pub struct BucketStats {
    pub label: String,
    pub count: usize,
    pub a2: Moments,
    pub a3: Moments,
}

/// Least-squares fit of `-log survival` against the fraction level.
#[derive(Debug, Clone, Serialize)]
pub struct TailFit {
    pub slope: f64,
    pub r2: f64,
    /// Rate an exponential with the sample mean would have (`1 / mean`).
    pub reference_rate: f64,
}

/// Aggregated view of one simulation batch.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub n_paths: usize,
    pub n_liquidated: usize,
    pub p_liquidated: f64,
    pub p_liquidated_stderr: f64,
    /// Mean of the terminal fraction over the surviving paths.
    pub mean_fq_pos: Option<f64>,
    pub sd_fq_pos: Option<f64>,
    /// Named empirical CDF tables (sorted x, cumulative probability).
    pub cdf_tables: BTreeMap<String, Vec<(f64, f64)>>,
    pub conditional: Vec<BucketStats>,
    pub exp_tail: Option<TailFit>,
}

/// Sorted empirical CDF of a sample.
pub fn cdf_table(xs: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = xs.iter().cloned().filter(|v| v.is_finite()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    sorted.iter().enumerate().map(|(i, &x)| (x, (i + 1) as f64 / n)).collect()
}

/// Sample-vs-normal quantile pairs for a q-q plot of a standardized sample.
pub fn qq_table(xs: &[f64]) -> Vec<(f64, f64)> {
    let m = moments(xs);
    if m.degenerate || m.count < 3 {
        return Vec::new();
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = sorted.len();
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let p = (i as f64 + 0.5) / n as f64;
            (normal.inverse_cdf(p), (x - m.mean) / m.sd)
        })
        .collect()
}

/// Reduce a batch of records. Records arriving in any order produce the same
/// summary: they are sorted by path index first.
pub fn summarize(records: &[PathRecord]) -> Result<RunSummary> {
    if records.len() < 100 {
        return Err(Error::InsufficientData(format!("{} records, need >= 100", records.len())));
    }
    let mut recs: Vec<&PathRecord> = records.iter().collect();
    recs.sort_by_key(|r| r.index);

    let n = recs.len();
    let n_liq = recs.iter().filter(|r| r.liquidated).count();
    let p = n_liq as f64 / n as f64;
    let stderr = (p * (1.0 - p) / n as f64).sqrt();

    let fq_pos: Vec<f64> = recs.iter().filter(|r| !r.liquidated).map(|r| r.fq_t).collect();
    let (mean_fq_pos, sd_fq_pos) = if fq_pos.is_empty() {
        (None, None)
    } else {
        let m = moments(&fq_pos);
        (Some(m.mean), Some(m.sd))
    };

    let mut cdf_tables = BTreeMap::new();
    if !fq_pos.is_empty() {
        cdf_tables.insert("fq_pos".to_string(), cdf_table(&fq_pos));
    }
    let valid = |r: &&&PathRecord| !r.no_trades;
    let a2_closed: Vec<f64> = recs.iter().filter(|r| r.liquidated).filter(valid).map(|r| r.a2).collect();
    let a2_pos: Vec<f64> = recs.iter().filter(|r| !r.liquidated).filter(valid).map(|r| r.a2).collect();
    let a3_closed: Vec<f64> = recs.iter().filter(|r| r.liquidated).filter(valid).map(|r| r.a3).collect();
    let a3_pos: Vec<f64> = recs.iter().filter(|r| !r.liquidated).filter(valid).map(|r| r.a3).collect();
    for (name, data) in [
        ("a2_closed", &a2_closed),
        ("a2_pos", &a2_pos),
        ("a3_closed", &a3_closed),
        ("a3_pos", &a3_pos),
    ] {
        if !data.is_empty() {
            cdf_tables.insert(name.to_string(), cdf_table(data));
        }
    }

    let conditional = bucket_grid()
        .into_iter()
        .map(|(label, bucket)| {
            let a2: Vec<f64> = recs.iter().filter(|r| in_bucket(r, bucket) && !r.no_trades).map(|r| r.a2).collect();
            let a3: Vec<f64> = recs.iter().filter(|r| in_bucket(r, bucket) && !r.no_trades).map(|r| r.a3).collect();
            BucketStats { label, count: a2.len(), a2: moments(&a2), a3: moments(&a3) }
        })
        .collect();

    let exp_tail = exponential_tail_from(&fq_pos).ok();

    Ok(RunSummary {
        n_paths: n,
        n_liquidated: n_liq,
        p_liquidated: p,
        p_liquidated_stderr: stderr,
        mean_fq_pos,
        sd_fq_pos,
        cdf_tables,
        conditional,
        exp_tail,
    })
}

/// Regress `-log(empirical survival)` of the surviving terminal fraction on
/// the fraction level over the central 90% of its support.
pub fn exponential_tail_check(records: &[PathRecord]) -> Result<TailFit> {
    let fq_pos: Vec<f64> = records.iter().filter(|r| !r.liquidated).map(|r| r.fq_t).collect();
    exponential_tail_from(&fq_pos)
}

fn exponential_tail_from(sample: &[f64]) -> Result<TailFit> {
    let m = sample.len();
    if m < 100 {
        return Err(Error::InsufficientData(format!("{m} surviving records, need >= 100")));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = sorted.iter().sum::<f64>() / m as f64;
    let lo = m / 20;
    let hi = m - m / 20 - 1; // stay strictly inside so survival > 0
    let mut xs = Vec::with_capacity(hi - lo);
    let mut ys = Vec::with_capacity(hi - lo);
    for i in lo..hi {
        let survival = (m - i - 1) as f64 / m as f64;
        if survival <= 0.0 {
            break;
        }
        xs.push(sorted[i]);
        ys.push(-survival.ln());
    }
    let (slope, r2) = ols(&xs, &ys);
    Ok(TailFit { slope, r2, reference_rate: 1.0 / mean })
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { f64::NAN };
    (slope, r2)
}

/// Moment-based normality check of the noise term within one fraction bucket.
pub fn normality_moments(records: &[PathRecord], bucket: FqBucket) -> Result<(f64, f64)> {
    let a2: Vec<f64> = records.iter().filter(|r| in_bucket(&r, bucket) && !r.no_trades).map(|r| r.a2).collect();
    if a2.len() < 200 {
        return Err(Error::InsufficientData(format!("{} records in bucket, need >= 200", a2.len())));
    }
    let m = moments(&a2);
    if m.degenerate {
        return Err(Error::InsufficientData("degenerate (constant) sample in bucket".into()));
    }
    Ok((m.skew, m.excess_kurtosis))
}

/// Side-by-side comparison against a reference batch (normally the
/// uniform-speed full-liquidation baseline).
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    /// Median of the cost term over fully closed paths, main batch.
    pub a3_closed_median: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub main: f64,
    pub baseline: f64,
}

pub fn compare_baseline(records: &[PathRecord], baseline: &[PathRecord]) -> ComparisonTable {
    let stat = |recs: &[PathRecord], pick: fn(&PathRecord) -> f64| -> (f64, f64) {
        let xs: Vec<f64> = recs.iter().filter(|r| !r.no_trades).map(pick).collect();
        let m = moments(&xs);
        (m.mean, m.sd * m.sd)
    };
    let mut rows = Vec::new();
    for (name, pick) in [
        ("a", (|r: &PathRecord| r.a) as fn(&PathRecord) -> f64),
        ("a2", |r: &PathRecord| r.a2),
        ("a3", |r: &PathRecord| r.a3),
    ] {
        let (m_main, v_main) = stat(records, pick);
        let (m_base, v_base) = stat(baseline, pick);
        rows.push(ComparisonRow { metric: format!("mean_{name}"), main: m_main, baseline: m_base });
        rows.push(ComparisonRow { metric: format!("var_{name}"), main: v_main, baseline: v_base });
    }
    let mut a3_closed: Vec<f64> =
        records.iter().filter(|r| r.liquidated && !r.no_trades).map(|r| r.a3).collect();
    a3_closed.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let a3_closed_median = if a3_closed.is_empty() { None } else { Some(a3_closed[a3_closed.len() / 2]) };
    ComparisonTable { rows, a3_closed_median }
}
