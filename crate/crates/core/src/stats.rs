//! Distance distributions derived from neighbourhood functions, jackknife
//! estimates over run sets and rank correlation between statistic series.

use serde::{Deserialize, Serialize};

use crate::anf::{NeighbourhoodRun, RunSet};
use crate::error::{Error, Result};

/// Fraction of reachable pairs at each distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceDistribution {
    pub pmf: Vec<f64>,
    pub cdf: Vec<f64>,
    /// `N(T)`, possibly with the `n` self-pairs removed.
    pub reachable_pairs: f64,
    /// `n²`.
    pub total_pairs: f64,
}

impl DistanceDistribution {
    /// Builds the distribution from a nondecreasing neighbourhood function.
    pub fn from_curve(values: &[f64], n: usize, include_self_pairs: bool) -> Result<Self> {
        let last = *values
            .last()
            .ok_or_else(|| Error::Degenerate("empty neighbourhood function".into()))?;
        let shift = if include_self_pairs { 0.0 } else { n as f64 };
        let reachable = last - shift;
        if reachable <= 0.0 {
            return Err(Error::Degenerate(if include_self_pairs {
                format!("no reachable pairs (N(T) = {last})")
            } else {
                format!("no reachable pairs besides self-pairs (N(T) − n = {reachable})")
            }));
        }
        let mut pmf = Vec::with_capacity(values.len());
        let mut prev = 0.0;
        for &v in values {
            let cur = (v - shift).max(0.0).max(prev);
            pmf.push((cur - prev) / reachable);
            prev = cur;
        }
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        // the telescoping sum is exactly (N(T) − N(−1)) / N(T) up to rounding
        if let Some(c) = cdf.last_mut() {
            *c = 1.0;
        }
        Ok(Self {
            pmf,
            cdf,
            reachable_pairs: reachable,
            total_pairs: n as f64 * n as f64,
        })
    }

    pub fn from_run(run: &NeighbourhoodRun, include_self_pairs: bool) -> Result<Self> {
        Self::from_curve(&run.monotone_values, run.n, include_self_pairs)
    }

    /// Distance distribution from explicit per-distance pair counts.
    pub fn from_counts(counts: &[u64], n: usize) -> Result<Self> {
        let mut acc = 0u64;
        let curve: Vec<f64> = counts
            .iter()
            .map(|c| {
                acc += c;
                acc as f64
            })
            .collect();
        Self::from_curve(&curve, n, true)
    }

    pub fn average_distance(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(t, p)| t as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.average_distance();
        let second: f64 = self
            .pmf
            .iter()
            .enumerate()
            .map(|(t, p)| (t * t) as f64 * p)
            .sum();
        second - mu * mu
    }

    /// Index of dispersion `σ² / μ`.
    pub fn spid(&self) -> Result<f64> {
        let mu = self.average_distance();
        if mu == 0.0 {
            return Err(Error::Degenerate(
                "spid is undefined when the average distance is zero".into(),
            ));
        }
        Ok(self.variance() / mu)
    }

    /// Linearly interpolated `q`-quantile of the distance distribution.
    pub fn effective_diameter(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "quantile {q} outside (0, 1)"
            )));
        }
        let mut prev = 0.0;
        for (t, &c) in self.cdf.iter().enumerate() {
            if c >= q {
                return Ok(t as f64 - 1.0 + (q - prev) / (c - prev));
            }
            prev = c;
        }
        Ok((self.cdf.len() - 1) as f64)
    }

    /// Percentage of reachable pairs within `⌈μ⌉`, and `⌈μ⌉` itself.
    pub fn within_ceiling(&self) -> (f64, usize) {
        let ceil = self.average_distance().ceil() as usize;
        let c = self.cdf.get(ceil).copied().unwrap_or(1.0);
        (100.0 * c, ceil)
    }

    pub fn reachable_pct(&self) -> Result<f64> {
        if self.total_pairs <= 0.0 {
            return Err(Error::EmptyGraph);
        }
        Ok(100.0 * self.reachable_pairs / self.total_pairs)
    }

    /// Tab-separated `t  pmf  cdf` rows with a header line.
    pub fn to_tsv(&self, graph_id: &str) -> String {
        let mut out = String::from("graph_id\tt\tpmf\tcdf\n");
        for (t, (p, c)) in self.pmf.iter().zip(&self.cdf).enumerate() {
            out.push_str(&format!("{graph_id}\t{t}\t{p:.12}\t{c:.12}\n"));
        }
        out
    }
}

/// Statistics that can be jackknifed over a run set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mu,
    Variance,
    Spid,
    EffectiveDiameter,
    WithinCeilingPct,
}

impl Statistic {
    pub fn eval(self, d: &DistanceDistribution) -> Result<f64> {
        match self {
            Statistic::Mu => Ok(d.average_distance()),
            Statistic::Variance => Ok(d.variance()),
            Statistic::Spid => d.spid(),
            Statistic::EffectiveDiameter => d.effective_diameter(0.9),
            Statistic::WithinCeilingPct => Ok(d.within_ceiling().0),
        }
    }
}

/// A jackknife estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// Leave-one-run-out jackknife of `f` applied to per-`t` averaged curves.
pub fn jackknife_with(rs: &RunSet, f: impl Fn(&[f64]) -> Result<f64>) -> Result<Estimate> {
    let r = rs.len();
    if r < 2 {
        return Err(Error::InvalidArgument(format!(
            "the jackknife needs at least two runs, got {r}"
        )));
    }
    let full = f(&rs.mean_curve(|_| true))?;
    let replicas = (0..r)
        .map(|i| f(&rs.mean_curve(|j| j != i)))
        .collect::<Result<Vec<f64>>>()?;
    let rf = r as f64;
    // shifted by the first replica so identical replicas give exactly zero
    let first = replicas[0];
    let mean = first + replicas.iter().map(|v| v - first).sum::<f64>() / rf;
    let ss: f64 = replicas.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok(Estimate {
        value: full + (rf - 1.0) * (full - mean),
        se: ((rf - 1.0) / rf * ss).sqrt(),
    })
}

pub fn jackknife(rs: &RunSet, statistic: Statistic, include_self_pairs: bool) -> Result<Estimate> {
    let n = rs.num_nodes();
    jackknife_with(rs, |curve| {
        statistic.eval(&DistanceDistribution::from_curve(
            curve,
            n,
            include_self_pairs,
        )?)
    })
}

/// One row of the statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub graph_id: String,
    pub include_self_pairs: bool,
    pub mu: Estimate,
    pub variance: Estimate,
    pub spid: Estimate,
    pub effective_diameter_90: f64,
    pub reachable_pct: f64,
    pub within_ceiling_pct: f64,
    pub ceiling: usize,
    pub runs_used: usize,
}

impl DistanceStats {
    /// Point estimates from the averaged curve; with two or more runs the
    /// moments are jackknifed, otherwise their standard errors are zero.
    pub fn compute(rs: &RunSet, include_self_pairs: bool) -> Result<Self> {
        let n = rs.num_nodes();
        let d = DistanceDistribution::from_curve(&rs.mean_curve(|_| true), n, include_self_pairs)?;
        let point = |s: Statistic| -> Result<Estimate> {
            if rs.len() >= 2 {
                jackknife(rs, s, include_self_pairs)
            } else {
                Ok(Estimate {
                    value: s.eval(&d)?,
                    se: 0.0,
                })
            }
        };
        let (within, ceiling) = d.within_ceiling();
        Ok(Self {
            graph_id: rs.runs()[0].graph_id.clone(),
            include_self_pairs,
            mu: point(Statistic::Mu)?,
            variance: point(Statistic::Variance)?,
            spid: point(Statistic::Spid)?,
            effective_diameter_90: d.effective_diameter(0.9)?,
            reachable_pct: d.reachable_pct()?,
            within_ceiling_pct: within,
            ceiling,
            runs_used: rs.len(),
        })
    }

    pub const TSV_HEADER: &'static str = "graph_id\tself_pairs\tmu\tmu_se\tvariance\tvariance_se\tspid\tspid_se\teff_diam_90\treachable_pct\twithin_ceiling_pct\tceiling\truns";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.4}\t{:.4}\t{}\t{}",
            self.graph_id,
            self.include_self_pairs,
            self.mu.value,
            self.mu.se,
            self.variance.value,
            self.variance.se,
            self.spid.value,
            self.spid.se,
            self.effective_diameter_90,
            self.reachable_pct,
            self.within_ceiling_pct,
            self.ceiling,
            self.runs_used
        )
    }
}

/// Kendall's τ<sub>b</sub> with tie correction.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "kendall tau needs two sequences of equal length >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_a, mut ties_b) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let da = a[i].partial_cmp(&a[j]);
            let db = b[i].partial_cmp(&b[j]);
            let (Some(da), Some(db)) = (da, db) else {
                return Err(Error::InvalidArgument("NaN in kendall tau input".into()));
            };
            use std::cmp::Ordering::Equal;
            if da == Equal {
                ties_a += 1;
            }
            if db == Equal {
                ties_b += 1;
            }
            if da != Equal && db != Equal {
                if da == db {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - ties_a) * (n0 - ties_b)) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::Degenerate("a sequence is entirely tied".into()));
    }
    Ok((concordant - discordant) as f64 / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(curve: &[f64], n: usize, self_pairs: bool) -> DistanceDistribution {
        DistanceDistribution::from_curve(curve, n, self_pairs).unwrap()
    }

    fn run(values: Vec<f64>, n: usize, seed: u64) -> NeighbourhoodRun {
        NeighbourhoodRun {
            graph_id: "g".into(),
            n,
            m_registers: 64,
            seed,
            monotone_values: crate::anf::monotonize(&values),
            iterations: values.len() - 1,
            values,
            wall_time_s: None,
            exact: false,
            truncated: false,
        }
    }

    #[test]
    fn single_edge_both_conventions() {
        let d = dist(&[2.0, 4.0], 2, true);
        assert_eq!(d.pmf, vec![0.5, 0.5]);
        assert_eq!(d.average_distance(), 0.5);
        assert!((d.effective_diameter(0.9).unwrap() - 0.8).abs() < 1e-15);
        let d = dist(&[2.0, 4.0], 2, false);
        assert_eq!(d.pmf, vec![0.0, 1.0]);
        assert_eq!(d.average_distance(), 1.0);
    }

    #[test]
    fn star_three_leaves() {
        let d = dist(&[4.0, 10.0, 16.0], 4, true);
        assert_eq!(d.pmf, vec![0.25, 0.375, 0.375]);
        assert!((d.average_distance() - 1.125).abs() < 1e-15);
        assert!((d.variance() - 0.609375).abs() < 1e-15);
        assert!((d.spid().unwrap() - 0.541_666_666_666_666_6).abs() < 1e-12);
        assert_eq!(d.within_ceiling(), (100.0, 2));
        assert_eq!(d.reachable_pct().unwrap(), 100.0);
    }

    #[test]
    fn point_mass_and_uniform() {
        // point mass at t = 1
        let d = dist(&[0.0, 10.0], 10, true);
        assert_eq!((d.average_distance(), d.variance()), (1.0, 0.0));
        assert_eq!(d.spid().unwrap(), 0.0);
        assert_eq!(d.within_ceiling(), (100.0, 1));
        // point mass at t = 3
        let d = dist(&[0.0, 0.0, 0.0, 5.0], 5, true);
        assert!((d.effective_diameter(0.9).unwrap() - 2.9).abs() < 1e-12);
        assert!(d.effective_diameter(0.999_999).unwrap() <= 3.0);
        // uniform on {1, 2, 3}
        let d = dist(&[0.0, 1.0, 2.0, 3.0], 3, true);
        assert!((d.average_distance() - 2.0).abs() < 1e-15);
        assert!((d.variance() - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.spid().unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let (pct, c) = d.within_ceiling();
        assert_eq!(c, 2);
        assert!((pct - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(DistanceDistribution::from_curve(&[0.0], 1, true).is_err());
        assert!(DistanceDistribution::from_curve(&[2.0, 2.0], 2, false).is_err());
        assert!(DistanceDistribution::from_curve(&[], 2, true).is_err());
        // single node with its self-pair only
        let d = dist(&[1.0], 1, true);
        assert!(d.spid().is_err());
        assert!(d.effective_diameter(1.0).is_err());
        let z = DistanceDistribution {
            pmf: vec![1.0],
            cdf: vec![1.0],
            reachable_pairs: 0.0,
            total_pairs: 0.0,
        };
        assert!(z.reachable_pct().is_err());
    }

    #[test]
    fn two_isolated_nodes_reach_half() {
        let d = dist(&[2.0], 2, true);
        assert_eq!(d.reachable_pct().unwrap(), 50.0);
    }

    #[test]
    fn identical_runs_have_zero_error() {
        let rs = RunSet::new(
            (0..5)
                .map(|s| run(vec![10.0, 40.0, 70.0, 100.0], 10, s))
                .collect(),
        )
        .unwrap();
        let point = dist(&[10.0, 40.0, 70.0, 100.0], 10, true);
        for s in [
            Statistic::Mu,
            Statistic::Variance,
            Statistic::Spid,
            Statistic::EffectiveDiameter,
            Statistic::WithinCeilingPct,
        ] {
            let e = jackknife(&rs, s, true).unwrap();
            assert_eq!(e.se, 0.0);
            assert!((e.value - s.eval(&point).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_run_linear_statistic() {
        let rs = RunSet::new(vec![run(vec![4.0], 1, 0), run(vec![6.0], 1, 1)]).unwrap();
        let e = jackknife_with(&rs, |c| Ok(c[0])).unwrap();
        assert!((e.value - 5.0).abs() < 1e-15);
        assert!((e.se - 1.0).abs() < 1e-15);
        assert!(
            jackknife_with(&RunSet::new(vec![run(vec![4.0], 1, 0)]).unwrap(), |c| Ok(
                c[0]
            ))
            .is_err()
        );
    }

    #[test]
    fn linear_statistic_jackknife_is_the_mean() {
        let curves = [
            vec![3.0, 9.0],
            vec![5.0, 7.0],
            vec![4.0, 8.5],
            vec![6.0, 10.0],
        ];
        let rs = RunSet::new(
            curves
                .iter()
                .enumerate()
                .map(|(i, c)| run(c.clone(), 5, i as u64))
                .collect(),
        )
        .unwrap();
        let e = jackknife_with(&rs, |c| Ok(2.0 * c[0] + c[1])).unwrap();
        let mean: f64 = curves.iter().map(|c| 2.0 * c[0] + c[1]).sum::<f64>() / 4.0;
        assert!((e.value - mean).abs() < 1e-12);
    }

    #[test]
    fn kendall_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((kendall_tau(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((kendall_tau(&a, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((kendall_tau(&a, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        assert!(kendall_tau(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(kendall_tau(&[1.0], &[1.0]).is_err());
        // tau_b with ties: a has one tied pair
        let t = kendall_tau(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((t - 2.0 / (2.0f64 * 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn scale_invariance() {
        let base = [7.0, 20.0, 41.0, 49.0];
        let d1 = dist(&base, 7, true);
        let scaled: Vec<f64> = base.iter().map(|v| v * 3.7).collect();
        let d2 = dist(&scaled, 7, true);
        assert!((d1.average_distance() - d2.average_distance()).abs() < 1e-12);
        assert!((d1.variance() - d2.variance()).abs() < 1e-12);
        assert!(
            (d1.effective_diameter(0.9).unwrap() - d2.effective_diameter(0.9).unwrap()).abs()
                < 1e-12
        );
    }

    #[test]
    fn stats_table() {
        let rs = RunSet::new(vec![run(vec![4.0, 10.0, 16.0], 4, 0)]).unwrap();
        let s = DistanceStats::compute(&rs, true).unwrap();
        assert!((s.mu.value - 1.125).abs() < 1e-12);
        assert!((s.spid.value - 0.5417).abs() < 1e-4);
        assert_eq!(
            s.tsv_row().split('\t').count(),
            DistanceStats::TSV_HEADER.split('\t').count()
        );
    }
}
