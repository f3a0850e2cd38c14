//! Plot-ready posterior summaries.
//!
//! Densities are Gaussian kernel estimates evaluated on a regular grid after
//! linear binning, with Silverman's rule-of-thumb bandwidth. For MCMC output
//! the rule's sample size is the effective sample size of the draws rather
//! than their raw count, which would undersmooth into Monte Carlo noise.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hmm::off_season_survival;
use crate::io::{comment_header, write_file};
use crate::mcmc::{Param, PosteriorSample};

/// Minimum grid resolution of a density table.
pub const GRID_POINTS: usize = 512;
/// The grid is refined until its spacing is at most this fraction of the
/// bandwidth, up to `MAX_GRID_POINTS`.
const SPACING_PER_BANDWIDTH: f64 = 0.25;
const MAX_GRID_POINTS: usize = 1 << 16;
/// Kernel support, in bandwidths.
const KERNEL_CUTOFF: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    pub bandwidth: f64,
    pub n: usize,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

/// `0.9 min(sd, IQR / 1.34) n^(-1/5)`; falls back to the standard
/// deviation when the IQR vanishes, and to `1e-3` of the magnitude for a
/// constant sample.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    silverman_bandwidth_n(values, values.len() as f64)
}

/// [`silverman_bandwidth`] with an explicit sample size `n`.
pub fn silverman_bandwidth_n(values: &[f64], n_eff: f64) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    if sorted[0] == sorted[sorted.len() - 1] {
        return 1e-3 * mean.abs().max(1.0);
    }
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        _ => return 1e-3 * mean.abs().max(1.0),
    };
    0.9 * spread * n_eff.max(1.0).powf(-0.2)
}

/// Effective sample size of one autocorrelated series by Geyer's initial
/// positive sequence estimator.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let acov = |lag: usize| c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let c0 = acov(0);
    if c0 <= 0.0 {
        return n as f64;
    }
    let mut sum = 0.0;
    let mut t = 0;
    while t + 1 < n {
        let pair = (acov(t) + acov(t + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        t += 2;
    }
    let tau = (2.0 * sum - 1.0).max(1.0);
    n as f64 / tau
}

/// Sum of per-chain effective sample sizes of `f` over the stream.
fn stream_ess(samples: &[PosteriorSample], f: impl Fn(&PosteriorSample) -> f64) -> f64 {
    let mut total = 0.0;
    let mut start = 0;
    for end in 1..=samples.len() {
        if end == samples.len() || samples[end].chain != samples[start].chain {
            let series: Vec<f64> = samples[start..end].iter().map(&f).collect();
            total += effective_sample_size(&series);
            start = end;
        }
    }
    total
}

/// Gaussian KDE on a grid spanning the data plus three bandwidths,
/// intersected with `bounds` when given.
pub fn gaussian_kde(values: &[f64], bounds: Option<(f64, f64)>) -> Result<Kde> {
    gaussian_kde_n(values, values.len() as f64, bounds)
}

/// [`gaussian_kde`] with the bandwidth rule evaluated at sample size `n_eff`.
pub fn gaussian_kde_n(values: &[f64], n_eff: f64, bounds: Option<(f64, f64)>) -> Result<Kde> {
    if values.is_empty() {
        return Err(Error::domain("density of an empty sample"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite value in density input"));
    }
    let h = silverman_bandwidth_n(values, n_eff);
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (mut lo, mut hi) = (min - 3.0 * h, max + 3.0 * h);
    if let Some((a, b)) = bounds {
        lo = lo.max(a);
        hi = hi.min(b);
    }
    let fine = ((hi - lo) / (SPACING_PER_BANDWIDTH * h)).ceil() as usize + 1;
    let g = fine.clamp(GRID_POINTS, MAX_GRID_POINTS);
    let delta = (hi - lo) / (g - 1) as f64;
    let x: Vec<f64> = (0..g).map(|j| lo + j as f64 * delta).collect();

    // Linear binning: each value splits its unit weight between the two
    // neighbouring grid points. Mass outside the grid lands on the ends.
    let mut w = vec![0.0; g];
    for &v in values {
        let pos = ((v - lo) / delta).clamp(0.0, (g - 1) as f64);
        let j = (pos.floor() as usize).min(g - 2);
        let f = pos - j as f64;
        w[j] += 1.0 - f;
        w[j + 1] += f;
    }
    let reach = ((KERNEL_CUTOFF * h / delta).ceil() as usize).min(g - 1);
    let kernel: Vec<f64> = (0..=reach)
        .map(|d| {
            let u = d as f64 * delta / h;
            (-0.5 * u * u).exp()
        })
        .collect();
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut density = vec![0.0; g];
    for (j, &wj) in w.iter().enumerate() {
        if wj == 0.0 {
            continue;
        }
        let a = j.saturating_sub(reach);
        let b = (j + reach).min(g - 1);
        for (i, d) in density.iter_mut().enumerate().take(b + 1).skip(a) {
            *d += wj * kernel[i.abs_diff(j)];
        }
    }
    for d in &mut density {
        *d *= norm;
    }
    Ok(Kde {
        bandwidth: h,
        n: values.len(),
        x,
        density,
    })
}

impl Kde {
    /// Interior grid maxima `(x, height)`, highest first. Flat tops count
    /// once.
    pub fn local_maxima(&self) -> Vec<(f64, f64)> {
        let d = &self.density;
        let mut out = Vec::new();
        let mut j = 0;
        while j < d.len() {
            let mut k = j;
            while k + 1 < d.len() && d[k + 1] == d[j] {
                k += 1;
            }
            let left_lower = j == 0 || d[j - 1] < d[j];
            let right_lower = k + 1 == d.len() || d[k + 1] < d[j];
            if left_lower && right_lower && d[j] > 0.0 {
                out.push((self.x[(j + k) / 2], d[j]));
            }
            j = k + 1;
        }
        out.sort_by(|a, b| b.1.total_cmp(&a.1));
        out
    }

    /// Height of the tallest secondary maximum relative to the principal
    /// one; zero when the density is unimodal.
    pub fn secondary_mode_ratio(&self) -> f64 {
        let m = self.local_maxima();
        match m.as_slice() {
            [first, second, ..] => second.1 / first.1,
            _ => 0.0,
        }
    }

    /// Whether a maximum inside `[lo, hi]` reaches `fraction` of the
    /// principal maximum.
    pub fn has_mode_in(&self, lo: f64, hi: f64, fraction: f64) -> bool {
        let m = self.local_maxima();
        let Some(top) = m.first().map(|p| p.1) else {
            return false;
        };
        m.iter().any(|&(x, h)| x >= lo && x <= hi && h >= fraction * top)
    }
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let pos = q * (sorted.len() - 1) as f64;
    let j = pos.floor() as usize;
    let f = pos - j as f64;
    if j + 1 < sorted.len() {
        sorted[j] + f * (sorted[j + 1] - sorted[j])
    } else {
        sorted[j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KFrequency {
    pub param: Param,
    pub k: usize,
    pub count: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub parameter: String,
    pub unit_id: String,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Every table produced from a sample stream.
#[derive(Debug, Clone)]
pub struct Summary {
    pub k_table: Vec<KFrequency>,
    pub log_alpha: Vec<(Param, Kde)>,
    pub pooled: Vec<(Param, Kde)>,
    pub individual: Vec<Interval>,
    pub population: Vec<Interval>,
}

fn non_empty(samples: &[PosteriorSample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::domain("no posterior samples to summarise"));
    }
    Ok(())
}

pub fn k_frequencies(samples: &[PosteriorSample]) -> Result<Vec<KFrequency>> {
    non_empty(samples)?;
    let mut out = Vec::new();
    for p in Param::ALL {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for s in samples {
            *counts.entry(s.dp(p).k).or_default() += 1;
        }
        for (k, count) in counts {
            out.push(KFrequency {
                param: p,
                k,
                count,
                frequency: count as f64 / samples.len() as f64,
            });
        }
    }
    Ok(out)
}

/// Most frequent cluster count; ties go to the smaller count.
pub fn k_mode(samples: &[PosteriorSample], p: Param) -> Result<usize> {
    let table = k_frequencies(samples)?;
    Ok(table
        .iter()
        .filter(|r| r.param == p)
        .max_by(|a, b| a.count.cmp(&b.count).then(b.k.cmp(&a.k)))
        .expect("non-empty")
        .k)
}

pub fn log_alpha_density(samples: &[PosteriorSample], p: Param) -> Result<Kde> {
    non_empty(samples)?;
    let v: Vec<f64> = samples.iter().map(|s| s.dp(p).alpha.ln()).collect();
    gaussian_kde_n(&v, stream_ess(samples, |s| s.dp(p).alpha.ln()), None)
}

/// Density of every individual's draws pooled together. The bandwidth uses
/// the effective sample size of the per-draw population mean.
pub fn pooled_density(samples: &[PosteriorSample], p: Param) -> Result<Kde> {
    non_empty(samples)?;
    let v: Vec<f64> = samples.iter().flat_map(|s| s.values(p).iter().copied()).collect();
    let mean = |s: &PosteriorSample| s.values(p).iter().sum::<f64>() / s.values(p).len() as f64;
    gaussian_kde_n(&v, stream_ess(samples, mean), Some((0.0, 1.0)))
}

fn interval(parameter: &str, unit_id: &str, mut v: Vec<f64>, level: f64) -> Interval {
    v.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Interval {
        parameter: parameter.to_string(),
        unit_id: unit_id.to_string(),
        median: quantile_sorted(&v, 0.5),
        lower: quantile_sorted(&v, tail),
        upper: quantile_sorted(&v, 1.0 - tail),
    }
}

/// Posterior median and central `level` interval per individual and
/// parameter.
pub fn individual_intervals(samples: &[PosteriorSample], ids: &[String], level: f64) -> Result<Vec<Interval>> {
    non_empty(samples)?;
    let mut out = Vec::new();
    for p in Param::ALL {
        for (i, id) in ids.iter().enumerate() {
            let v = samples.iter().map(|s| s.values(p)[i]).collect();
            out.push(interval(p.name(), id, v, level));
        }
    }
    Ok(out)
}

/// Intervals for the concentrations, base shapes and, when present, the
/// fixed effects and off-season survival.
pub fn population_intervals(samples: &[PosteriorSample], level: f64) -> Result<Vec<Interval>> {
    non_empty(samples)?;
    let mut out = Vec::new();
    for p in Param::ALL {
        let col = |f: fn(&crate::mcmc::DpSummary) -> f64| samples.iter().map(|s| f(s.dp(p))).collect();
        out.push(interval("alpha", p.name(), col(|d| d.alpha), level));
        out.push(interval("base_a", p.name(), col(|d| d.base_a), level));
        out.push(interval("base_b", p.name(), col(|d| d.base_b), level));
    }
    if let Some(f0) = &samples[0].fixed {
        let fixed: Vec<_> = samples
            .iter()
            .map(|s| s.fixed.as_ref().ok_or_else(|| Error::domain("fixed effects missing from some samples")))
            .collect::<Result<_>>()?;
        for y in 0..f0.beta_yr.len() {
            out.push(interval("beta_yr", &y.to_string(), fixed.iter().map(|f| f.beta_yr[y]).collect(), level));
        }
        out.push(interval("gamma_d", "population", fixed.iter().map(|f| f.gamma_d).collect(), level));
        out.push(interval("q", "population", fixed.iter().map(|f| f.q).collect(), level));
        out.push(interval(
            "p_surv",
            "population",
            fixed.iter().map(|f| off_season_survival(f.gamma_d)).collect(),
            level,
        ));
    }
    Ok(out)
}

pub fn summarize(samples: &[PosteriorSample], ids: &[String]) -> Result<Summary> {
    non_empty(samples)?;
    Ok(Summary {
        k_table: k_frequencies(samples)?,
        log_alpha: Param::ALL
            .iter()
            .map(|&p| Ok((p, log_alpha_density(samples, p)?)))
            .collect::<Result<_>>()?,
        pooled: Param::ALL
            .iter()
            .map(|&p| Ok((p, pooled_density(samples, p)?)))
            .collect::<Result<_>>()?,
        individual: individual_intervals(samples, ids, 0.95)?,
        population: population_intervals(samples, 0.95)?,
    })
}

fn density_csv(tables: &[(Param, Kde)], digest: Option<&str>) -> String {
    let meta: Vec<(String, String)> = std::iter::once(("kernel".to_string(), "gaussian".to_string()))
        .chain(std::iter::once((
            "bandwidth_rule".to_string(),
            "silverman at the effective sample size".to_string(),
        )))
        .chain(tables.iter().map(|(p, k)| (format!("bandwidth[{}]", p.name()), k.bandwidth.to_string())))
        .collect();
    let mut s = comment_header(digest, &meta);
    s.push_str("parameter,x,density\n");
    for (p, k) in tables {
        for (x, d) in k.x.iter().zip(&k.density) {
            let _ = writeln!(s, "{},{x},{d}", p.name());
        }
    }
    s
}

fn interval_csv(rows: &[Interval], digest: Option<&str>) -> String {
    let meta = [("interval".to_string(), "central 95%".to_string())];
    let mut s = comment_header(digest, &meta);
    s.push_str("parameter,unit_id,median,lower,upper\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.parameter, r.unit_id, r.median, r.lower, r.upper);
    }
    s
}

/// File names written by [`write_summary`].
pub const SUMMARY_FILES: [&str; 5] = [
    "k_distribution.csv",
    "log_alpha_density.csv",
    "posterior_density.csv",
    "individual_intervals.csv",
    "population_intervals.csv",
];

pub fn write_summary(dir: &Path, summary: &Summary, digest: Option<&str>) -> Result<()> {
    let mut k = comment_header(digest, &[]);
    k.push_str("parameter,k,count,frequency\n");
    for r in &summary.k_table {
        let _ = writeln!(k, "{},{},{},{}", r.param.name(), r.k, r.count, r.frequency);
    }
    let contents = [
        k,
        density_csv(&summary.log_alpha, digest),
        density_csv(&summary.pooled, digest),
        interval_csv(&summary.individual, digest),
        interval_csv(&summary.population, digest),
    ];
    for (name, c) in SUMMARY_FILES.iter().zip(contents) {
        write_file(&dir.join(name), c.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::DpSummary;
    use crate::sampling::stream_rng;
    use rand_distr::{Distribution, Normal};

    fn sample(pi: Vec<f64>, k: usize) -> PosteriorSample {
        let d = DpSummary {
            alpha: 1.5,
            k,
            base_a: 2.0,
            base_b: 3.0,
        };
        PosteriorSample {
            chain: 0,
            iteration: 1,
            gamma_hh: pi.clone(),
            gamma_aa: pi.clone(),
            pi,
            dp: [d; 3],
            fixed: None,
            log_likelihood: 0.0,
        }
    }

    #[test]
    fn empty_stream_is_rejected() {
        assert!(summarize(&[], &[]).is_err());
        assert!(k_mode(&[], Param::Pi).is_err());
    }

    #[test]
    fn identical_samples_give_zero_width() {
        let s: Vec<_> = (0..50).map(|_| sample(vec![0.3, 0.7], 2)).collect();
        let ids = vec!["a".to_string(), "b".to_string()];
        let sum = summarize(&s, &ids).unwrap();
        for r in sum.individual.iter().chain(&sum.population) {
            assert_eq!(r.lower, r.upper);
            assert_eq!(r.median, r.lower);
        }
        assert_eq!(k_mode(&s, Param::GammaAA).unwrap(), 2);
        let dir = tempfile::tempdir().unwrap();
        write_summary(dir.path(), &sum, Some("abc")).unwrap();
        let text = std::fs::read_to_string(dir.path().join("k_distribution.csv")).unwrap();
        assert!(text.starts_with("# run_digest=abc\n"));
        assert!(text.contains("pi,2,50,1\n"));
    }

    #[test]
    fn kde_integrates_to_one_and_finds_modes() {
        let mut rng = stream_rng(5, 0);
        let a = Normal::new(0.82, 0.01).unwrap();
        let b = Normal::new(0.96, 0.01).unwrap();
        let mut v: Vec<f64> = (0..20_000).map(|_| a.sample(&mut rng)).collect();
        v.extend((0..10_000).map(|_| b.sample(&mut rng)));
        let k = gaussian_kde(&v, None).unwrap();
        let dx = k.x[1] - k.x[0];
        let area: f64 = k.density.iter().sum::<f64>() * dx;
        assert!((area - 1.0).abs() < 1e-3, "{area}");
        let m = k.local_maxima();
        assert!((m[0].0 - 0.82).abs() < 0.005 && (m[1].0 - 0.96).abs() < 0.005, "{m:?}");
        assert!((k.secondary_mode_ratio() - 0.5).abs() < 0.1);
        assert!(k.has_mode_in(0.95, 0.97, 0.1));
        assert!(!k.has_mode_in(0.55, 0.65, 0.1));

        let u: Vec<f64> = (0..30_000).map(|_| a.sample(&mut rng)).collect();
        // Only sampling ripples in the far tails.
        assert!(gaussian_kde(&u, None).unwrap().secondary_mode_ratio() < 0.01);
    }

    #[test]
    fn bandwidth_rules() {
        // n = 5, sd = sqrt(2.5), IQR = 2 -> 0.9 * min(1.5811, 1.4925) * 5^-0.2
        let h = silverman_bandwidth(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!((h - 0.9 * (2.0 / 1.34) * 5f64.powf(-0.2)).abs() < 1e-12);
        assert_eq!(silverman_bandwidth(&[0.4; 10]), 1e-3);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
    }

    #[test]
    fn ess_of_ar1_matches_theory() {
        // AR(1) with phi = 0.9 has integrated autocorrelation time 19.
        let mut rng = stream_rng(8, 0);
        let z = Normal::new(0.0, 1.0).unwrap();
        let mut x = vec![0.0; 200_000];
        for t in 1..x.len() {
            x[t] = 0.9 * x[t - 1] + z.sample(&mut rng);
        }
        let tau = x.len() as f64 / effective_sample_size(&x);
        assert!((tau - 19.0).abs() < 2.0, "{tau}");
        let iid: Vec<f64> = (0..50_000).map(|_| z.sample(&mut rng)).collect();
        assert!(effective_sample_size(&iid) > 40_000.0);
    }
}
