//! Replicated Monte Carlo experiments on random geometric graphs.
//!
//! A run draws `R` independent point processes, records `L_k`, `M_k`,
//! their coincidence and optionally the k-isolated count `ξ`, then
//! centres the chosen statistic and compares it with its limit law.
//! Replication `i` uses its own generator seeded from `(seed, i)`, so the
//! records do not depend on how replications are scheduled.

pub mod rng;
pub mod stats;

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::{Density, DensitySpec};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::spatial::{fmt_sig17, PointSet};
use crate::theory::{solve_rn, Family, LimitSpec, SampleSize};
use crate::thresholds::{isolated_count, largest_knn_link, thresholds};

pub use rng::{poisson, replication_rng, replication_state};
pub use stats::{iqr, ks_statistic, median, median_centre, quantile, tv_poisson_estimate};

/// Largest `n` for which `M_k` with `k >= 2` is computed.
pub const MAX_N_FOR_M_K2: f64 = 5e4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// `N ~ Poisson(n)` points.
    Poisson,
    /// Exactly `n` points.
    Binomial,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statistic {
    #[default]
    #[serde(rename = "L")]
    L,
    #[serde(rename = "M")]
    M,
    #[serde(rename = "both")]
    Both,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centring {
    /// `n θ_d f0 V^d - a_n`.
    #[default]
    ExplicitUniform,
    /// `n (V^d - med^d)` with the sample median `med`.
    EmpiricalMedian,
}

fn uniform_spec() -> DensitySpec {
    DensitySpec::Uniform {}
}

fn yes() -> bool {
    true
}

/// Experiment configuration; the JSON form rejects unknown keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: Domain,
    #[serde(default = "uniform_spec")]
    pub density: DensitySpec,
    pub model: Model,
    /// Intensity (Poisson) or sample size (binomial).
    pub n: f64,
    pub k: usize,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub statistic: Statistic,
    #[serde(default)]
    pub centring: Centring,
    /// Record `ξ_{n, r_n(β)}` at this `β`.
    #[serde(default)]
    pub record_xi_at: Option<f64>,
    /// Compare the centred statistic with its limit law.
    #[serde(default = "yes")]
    pub compare_limit: bool,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

/// One replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub rep_id: u64,
    pub n_realised: u64,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub coincide: Option<bool>,
    pub xi: Option<u64>,
    pub transformed: Option<f64>,
}

/// Tightness diagnostics for the centred statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tightness {
    pub median: f64,
    pub iqr: f64,
    pub q05: f64,
    pub q95: f64,
}

/// Aggregates written to `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct Summary {
    pub ks_L: Option<f64>,
    pub ks_M: Option<f64>,
    pub tv_estimate: Option<f64>,
    pub coincidence_rate: Option<f64>,
    /// Sample median of the raw statistic `V`.
    pub median: Option<f64>,
    pub tightness: Option<Tightness>,
    pub limit: Option<LimitSpec>,
    pub xi_radius: Option<f64>,
    pub mean_n_realised: f64,
    pub replications: usize,
    pub config_echo: ExperimentConfig,
    pub seed: u64,
    pub notes: Vec<String>,
}

/// How replications are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

/// A validated configuration, ready to run.
#[derive(Clone, Debug)]
pub struct Experiment {
    config: ExperimentConfig,
    density: Density,
    limit: Option<LimitSpec>,
    xi_radius: Option<f64>,
}

impl Experiment {
    /// Validates `config`, binds the density and solves for the `ξ`
    /// radius if requested.
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        let c = config;
        if c.replications == 0 {
            return Err(Error::Infeasible("replications must be at least 1".into()));
        }
        if c.k == 0 {
            return Err(Error::Infeasible("k must be at least 1".into()));
        }
        if !(c.n.is_finite() && c.n > 0.0) {
            return Err(Error::Infeasible(format!(
                "n must be positive and finite, got {}",
                c.n
            )));
        }
        if c.model == Model::Binomial && c.n.fract() != 0.0 {
            return Err(Error::Infeasible(format!(
                "binomial n must be an integer, got {}",
                c.n
            )));
        }
        if c.n < (c.k + 2) as f64 {
            return Err(Error::Infeasible(format!(
                "n = {} is below k + 2 = {}",
                c.n,
                c.k + 2
            )));
        }
        if c.statistic != Statistic::L && c.k >= 2 && c.n > MAX_N_FOR_M_K2 {
            return Err(Error::Infeasible(format!(
                "M with k >= 2 is limited to n <= {MAX_N_FOR_M_K2}; use statistic L"
            )));
        }
        if c.centring == Centring::EmpiricalMedian && c.replications < 2 {
            return Err(Error::Infeasible(
                "median centring needs at least 2 replications".into(),
            ));
        }
        let density = Density::new(c.density, &c.domain)?;
        let limit = match c.centring {
            Centring::ExplicitUniform => {
                if !density.is_uniform() {
                    return Err(Error::Infeasible(
                        "explicit centring needs a uniform density; use empirical-median".into(),
                    ));
                }
                let spec = LimitSpec::uniform(&c.domain, c.k)?;
                if c.compare_limit && !(c.n > std::f64::consts::E) {
                    return Err(Error::Infeasible(
                        "the corrected limit law needs n > e".into(),
                    ));
                }
                Some(spec)
            }
            Centring::EmpiricalMedian => {
                let spec = LimitSpec::non_uniform(&density, c.k)?;
                if spec.family == Family::Critical && c.compare_limit {
                    // Propagates the "only tightness" error.
                    spec.nonuniform_limit_cdf(0.0)?;
                }
                Some(spec)
            }
        };
        let xi_radius = match c.record_xi_at {
            Some(beta) => Some(solve_rn(&density, c.n, c.k, beta)?),
            None => None,
        };
        Ok(Experiment {
            config: c.clone(),
            density,
            limit,
            xi_radius,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    /// Radius `r_n(β)` at which `ξ` is recorded.
    pub fn xi_radius(&self) -> Option<f64> {
        self.xi_radius
    }

    pub fn run(&self) -> Result<Vec<ExperimentRecord>> {
        self.run_with(Execution::default())
    }

    /// All replications, sorted by `rep_id`, with `transformed` filled in.
    pub fn run_with(&self, exec: Execution) -> Result<Vec<ExperimentRecord>> {
        let reps = self.config.replications as u64;
        let mut records: Vec<ExperimentRecord> = match exec {
            Execution::Sequential => (0..reps)
                .map(|i| self.replicate(i))
                .collect::<Result<_>>()?,
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..reps)
                    .into_par_iter()
                    .map(|i| self.replicate(i))
                    .collect::<Result<_>>()?
            }
        };
        records.sort_by_key(|r| r.rep_id);
        self.fill_transformed(&mut records)?;
        Ok(records)
    }

    /// One replication with its own generator.
    pub fn replicate(&self, rep_id: u64) -> Result<ExperimentRecord> {
        let c = &self.config;
        let mut rng = replication_rng(c.seed, rep_id);
        let points = sample_points(&self.density, c.model, c.n, &mut rng)?;
        let count = points.len() as u64;
        let ps = PointSet::with_volume(points, c.domain.dim(), c.domain.volume())?;
        let (l, m, coincide) = if c.statistic != Statistic::L && ps.len() >= c.k + 2 {
            let t = thresholds(&ps, c.k)?;
            (t.l, Some(t.m), Some(t.coincide))
        } else {
            (largest_knn_link(&ps, c.k), None, None)
        };
        let xi = self.xi_radius.map(|r| isolated_count(&ps, r, c.k) as u64);
        Ok(ExperimentRecord {
            rep_id,
            n_realised: count,
            l: Some(l),
            m,
            coincide,
            xi,
            transformed: None,
        })
    }

    fn statistic_of(&self, r: &ExperimentRecord) -> Option<f64> {
        match self.config.statistic {
            Statistic::L => r.l,
            Statistic::M | Statistic::Both => r.m,
        }
    }

    fn fill_transformed(&self, records: &mut [ExperimentRecord]) -> Result<()> {
        let values: Vec<f64> = records
            .iter()
            .filter_map(|r| self.statistic_of(r))
            .collect();
        let transform = self.transform_fn(&values)?;
        for r in records.iter_mut() {
            r.transformed = self.statistic_of(r).map(&transform);
        }
        Ok(())
    }

    /// Centring map for a sample of raw statistic values.
    fn transform_fn(&self, values: &[f64]) -> Result<impl Fn(f64) -> f64> {
        let (n, d) = (self.config.n, self.config.domain.dim());
        let spec = self.limit.expect("prepared experiments carry a spec");
        let med = match self.config.centring {
            Centring::ExplicitUniform => None,
            Centring::EmpiricalMedian if values.len() >= 2 => Some(median(values)?),
            Centring::EmpiricalMedian => Some(values.first().copied().unwrap_or(0.0)),
        };
        Ok(move |v: f64| match med {
            None => spec.transform(v, n),
            Some(m) => n * (v.powi(d as i32) - m.powi(d as i32)),
        })
    }

    /// KS distance of one statistic column against the limit law.
    fn ks_of(&self, values: &[f64]) -> Result<Option<f64>> {
        if values.is_empty() || !self.config.compare_limit {
            return Ok(None);
        }
        let spec = self.limit.expect("prepared experiments carry a spec");
        let transform = self.transform_fn(values)?;
        let centred: Vec<f64> = values.iter().map(|&v| transform(v)).collect();
        let n = self.config.n;
        let d = match self.config.centring {
            Centring::ExplicitUniform => {
                spec.limit_cdf(0.0, SampleSize::Finite(n))?;
                ks_statistic(&centred, |b| {
                    spec.limit_cdf(b, SampleSize::Finite(n)).unwrap_or(f64::NAN)
                })?
            }
            Centring::EmpiricalMedian => {
                let alpha = match spec.family {
                    Family::NonUniformGumbel { alpha } => alpha,
                    _ => return Ok(None),
                };
                ks_statistic(&centred, |z| crate::theory::nonuniform_limit_cdf(alpha, z))?
            }
        };
        Ok(Some(d))
    }

    pub fn summarise(&self, records: &[ExperimentRecord]) -> Result<Summary> {
        let c = &self.config;
        let ls: Vec<f64> = records.iter().filter_map(|r| r.l).collect();
        let ms: Vec<f64> = records.iter().filter_map(|r| r.m).collect();
        let raw: Vec<f64> = records
            .iter()
            .filter_map(|r| self.statistic_of(r))
            .collect();
        let transformed: Vec<f64> = records.iter().filter_map(|r| r.transformed).collect();
        let ks_l = if c.statistic != Statistic::M {
            self.ks_of(&ls)?
        } else {
            None
        };
        let ks_m = if c.statistic != Statistic::L {
            self.ks_of(&ms)?
        } else {
            None
        };
        let xis: Vec<u64> = records.iter().filter_map(|r| r.xi).collect();
        let tv = match c.record_xi_at {
            Some(beta) if !xis.is_empty() => Some(tv_poisson_estimate(&xis, (-beta).exp())?),
            _ => None,
        };
        let tightness = if transformed.is_empty() {
            None
        } else {
            Some(Tightness {
                median: median(&transformed)?,
                iqr: iqr(&transformed)?,
                q05: quantile(&transformed, 0.05)?,
                q95: quantile(&transformed, 0.95)?,
            })
        };
        let mut notes = Vec::new();
        if c.centring == Centring::EmpiricalMedian {
            notes.push(
                "the sample median of the statistic stands in for its distributional median".into(),
            );
        }
        if matches!(
            self.limit,
            Some(LimitSpec {
                family: Family::Critical,
                ..
            })
        ) {
            notes.push(
                "critical regime f1 = f0(2-2/d): no limit law is compared; only tightness is reported"
                    .into(),
            );
        }
        if c.statistic != Statistic::L && records.iter().any(|r| r.m.is_none()) {
            notes.push(format!(
                "M is missing where fewer than k + 2 = {} points were drawn",
                c.k + 2
            ));
        }
        Ok(Summary {
            ks_L: ks_l,
            ks_M: ks_m,
            tv_estimate: tv,
            coincidence_rate: coincidence_rate(records),
            median: if raw.is_empty() {
                None
            } else {
                Some(median(&raw)?)
            },
            tightness,
            limit: self.limit,
            xi_radius: self.xi_radius,
            mean_n_realised: records.iter().map(|r| r.n_realised as f64).sum::<f64>()
                / records.len().max(1) as f64,
            replications: records.len(),
            config_echo: c.clone(),
            seed: c.seed,
            notes,
        })
    }
}

/// One realisation: a `Poisson(n)` count (or exactly `n`) of independent
/// draws from `density`.
pub fn sample_points<R: Rng + ?Sized>(
    density: &Density,
    model: Model,
    n: f64,
    rng: &mut R,
) -> Result<Vec<Point>> {
    let count = match model {
        Model::Poisson => poisson(rng, n),
        Model::Binomial => n as u64,
    };
    (0..count).map(|_| density.sample(rng)).collect()
}

/// Runs a configuration end to end.
pub fn run(config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    Experiment::prepare(config)?.run()
}

/// Fraction of records with both thresholds present and `L = M`.
pub fn coincidence_rate(records: &[ExperimentRecord]) -> Option<f64> {
    let flags: Vec<bool> = records.iter().filter_map(|r| r.coincide).collect();
    if flags.is_empty() {
        return None;
    }
    Some(flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64)
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_sig17).unwrap_or_default()
}

/// `rep_id,n_realised,L,M,coincide,xi,transformed`; missing values are empty.
pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "rep_id",
        "n_realised",
        "L",
        "M",
        "coincide",
        "xi",
        "transformed",
    ])?;
    for r in records {
        w.write_record([
            r.rep_id.to_string(),
            r.n_realised.to_string(),
            opt_num(r.l),
            opt_num(r.m),
            r.coincide.map(|b| b.to_string()).unwrap_or_default(),
            r.xi.map(|x| x.to_string()).unwrap_or_default(),
            opt_num(r.transformed),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `records.csv` and `summary.json` into `dir`, creating it.
pub fn write_outputs(dir: &Path, records: &[ExperimentRecord], summary: &Summary) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_records_csv(records, fs::File::create(dir.join("records.csv"))?)?;
    let mut f = fs::File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, summary)?;
    writeln!(f)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            domain: Domain::unit_square(),
            density: DensitySpec::Uniform {},
            model: Model::Poisson,
            n: 500.0,
            k: 1,
            replications: 8,
            seed: 42,
            statistic: Statistic::Both,
            centring: Centring::ExplicitUniform,
            record_xi_at: Some(0.0),
            compare_limit: true,
        }
    }

    #[test]
    fn config_json_defaults_and_unknown_keys() {
        let json = r#"{"domain":{"kind":"disk","radius":1},"model":"binomial","n":100,"k":1,
                       "replications":2,"seed":7}"#;
        let c = ExperimentConfig::from_json(json).unwrap();
        assert_eq!(c.statistic, Statistic::L);
        assert_eq!(c.centring, Centring::ExplicitUniform);
        assert_eq!(c.density, DensitySpec::Uniform {});
        assert!(c.compare_limit);
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        let bad = json.replace("\"seed\":7", "\"seed\":7,\"extra\":1");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let exp = Experiment::prepare(&base()).unwrap();
        let a = exp.run_with(Execution::Sequential).unwrap();
        let b = exp.run().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        for (i, r) in a.iter().enumerate() {
            assert_eq!(r.rep_id, i as u64);
            let (l, m) = (r.l.unwrap(), r.m.unwrap());
            assert!(l <= m);
            assert_eq!(r.coincide.unwrap(), l == m);
            assert!(r.transformed.unwrap().is_finite());
        }
    }

    #[test]
    fn infeasible_configs() {
        let mut c = base();
        c.replications = 0;
        assert!(matches!(Experiment::prepare(&c), Err(Error::Infeasible(_))));
        let mut c = base();
        c.n = 2.0;
        assert!(matches!(Experiment::prepare(&c), Err(Error::Infeasible(_))));
        let mut c = base();
        c.k = 2;
        c.n = 1e5;
        assert!(matches!(Experiment::prepare(&c), Err(Error::Infeasible(_))));
        let mut c = base();
        c.domain = Domain::disk(1.0).unwrap();
        c.centring = Centring::EmpiricalMedian;
        let err = Experiment::prepare(&c).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
        c.compare_limit = false;
        c.record_xi_at = None;
        let exp = Experiment::prepare(&c).unwrap();
        let s = exp.summarise(&exp.run().unwrap()).unwrap();
        assert!(s.ks_L.is_none() && s.ks_M.is_none());
        assert!(s.tightness.is_some());
    }

    #[test]
    fn binomial_degenerate_smoke() {
        let c = ExperimentConfig {
            model: Model::Binomial,
            n: 4.0,
            replications: 1,
            record_xi_at: None,
            ..base()
        };
        let recs = run(&c).unwrap();
        assert_eq!(recs[0].n_realised, 4);
        assert!(recs[0].l.unwrap() <= recs[0].m.unwrap());
    }

    #[test]
    fn csv_layout() {
        let exp = Experiment::prepare(&ExperimentConfig {
            replications: 2,
            ..base()
        })
        .unwrap();
        let recs = exp.run().unwrap();
        let mut buf = Vec::new();
        write_records_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "rep_id,n_realised,L,M,coincide,xi,transformed");
        assert_eq!(lines.len(), 3);
        let l: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(l, recs[0].l.unwrap());
    }
}
