//! Plot-ready CSV artifacts.
//!
//! Every file opens with a single `#` comment line carrying the generation
//! timestamp; everything below it is a plain CSV table that is
//! byte-identical across reruns of the same fit. Writers target any
//! [`std::io::Write`] so output can go to files or memory; [`save`] wraps
//! the file plumbing.

use std::io::{self, Write};
use std::path::Path;

use crate::analysis::EdaReport;
use crate::benchmarks::BenchmarkRow;
use crate::data::Role;
use crate::error::{Error, Result};
use crate::mcmc::PosteriorSamples;
use crate::model::{GlobalParams, Hyperpriors};

fn stamp<W: Write>(w: &mut W) -> io::Result<()> {
    writeln!(w, "# generated {}", chrono::Utc::now().to_rfc3339())
}

fn row<W: Write>(w: &mut W, fields: &[&str]) -> io::Result<()> {
    // none of our fields contain commas, quotes, or newlines; plain joins
    // keep the output stable and greppable
    debug_assert!(fields.iter().all(|f| !f.contains([',', '"', '\n'])));
    writeln!(w, "{}", fields.join(","))
}

/// Run a writer against a freshly created file, with path context on
/// failure.
pub fn save<P, F>(path: P, write_fn: F) -> Result<()>
where
    P: AsRef<Path>,
    F: FnOnce(&mut io::BufWriter<std::fs::File>) -> io::Result<()>,
{
    let path = path.as_ref();
    let wrap = |source: io::Error| Error::Io { path: path.display().to_string(), source };
    let file = std::fs::File::create(path).map_err(wrap)?;
    let mut w = io::BufWriter::new(file);
    write_fn(&mut w).map_err(wrap)?;
    w.flush().map_err(wrap)
}

/// Long-format posterior sample dump: one row per (chain, iteration,
/// parameter). Corpus-level parameters come first within each iteration,
/// then per-tweet `alpha_x:<id>` / `tau_x:<id>`, then — when per-vertex
/// retention is on — `m:<id>:<slot>` rows keyed by the vertex's position
/// in the observed prefix.
pub fn write_samples<W: Write>(w: &mut W, samples: &PosteriorSamples) -> io::Result<()> {
    stamp(w)?;
    row(w, &["chain", "iteration", "parameter", "value"])?;
    let names = samples.global_names();
    let traces: Vec<Vec<Vec<f64>>> = names
        .iter()
        .map(|n| samples.global_traces(n).expect("names come from global_names"))
        .collect();
    for (ci, chain) in samples.chains.iter().enumerate() {
        let chain_label = chain.chain.to_string();
        for (ri, record) in chain.records.iter().enumerate() {
            let iter_label = record.iteration.to_string();
            for (ni, name) in names.iter().enumerate() {
                row(w, &[&chain_label, &iter_label, name, &traces[ni][ci][ri].to_string()])?;
            }
            for (ti, tp) in record.tweets.iter().enumerate() {
                let id = &samples.tweet_ids[ti];
                row(
                    w,
                    &[&chain_label, &iter_label, &format!("alpha_x:{id}"), &tp.alpha_x.to_string()],
                )?;
                row(
                    w,
                    &[&chain_label, &iter_label, &format!("tau_x:{id}"), &tp.tau_x.to_string()],
                )?;
            }
            if let Some(latent) = &record.latent_m {
                for (ti, counts) in latent.iter().enumerate() {
                    let id = &samples.tweet_ids[ti];
                    for (slot, m) in counts.iter().enumerate() {
                        row(
                            w,
                            &[
                                &chain_label,
                                &iter_label,
                                &format!("m:{id}:{slot}"),
                                &m.to_string(),
                            ],
                        )?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Metropolis acceptance rates per chain and pooled.
pub fn write_acceptance<W: Write>(w: &mut W, samples: &PosteriorSamples) -> io::Result<()> {
    stamp(w)?;
    row(w, &["chain", "family", "accepted", "proposed", "rate"])?;
    let mut emit = |label: &str, stats: crate::mcmc::AcceptanceStats| -> io::Result<()> {
        for (family, tally) in stats.families() {
            row(
                w,
                &[
                    label,
                    family,
                    &tally.accepted.to_string(),
                    &tally.proposed.to_string(),
                    &tally.rate().to_string(),
                ],
            )?;
        }
        Ok(())
    };
    for chain in &samples.chains {
        emit(&chain.chain.to_string(), chain.acceptance)?;
    }
    emit("all", samples.pooled_acceptance())
}

/// Potential scale reduction table; a `None` entry (the statistic does
/// not exist, e.g. for a single chain) reads `unavailable`.
pub fn write_rhat_table<W: Write>(w: &mut W, rows: &[(String, Option<f64>)]) -> io::Result<()> {
    stamp(w)?;
    row(w, &["parameter", "rhat"])?;
    for (name, rhat) in rows {
        let value = rhat.map(|v| v.to_string()).unwrap_or_else(|| "unavailable".into());
        row(w, &[name, &value])?;
    }
    Ok(())
}

/// Potential scale reduction factors of a fit's corpus-level parameters.
pub fn write_rhat<W: Write>(w: &mut W, samples: &PosteriorSamples) -> io::Result<()> {
    let table: Vec<(String, Option<f64>)> = if samples.chains.len() < 2 {
        samples.global_names().into_iter().map(|n| (n.to_string(), None)).collect()
    } else {
        samples
            .global_rhat()
            .map_err(io::Error::other)?
            .into_iter()
            .map(|(n, v)| (n.to_string(), Some(v)))
            .collect()
    };
    write_rhat_table(w, &table)
}

/// One forecast line of the prediction table.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRow {
    pub tweet_id: String,
    pub fraction: f64,
    /// Observation horizon in seconds.
    pub t_x_seconds: f64,
    pub median: f64,
    pub lo90: f64,
    pub hi90: f64,
    pub true_m: u64,
}

pub fn write_forecast<W: Write>(w: &mut W, rows: &[ForecastRow]) -> io::Result<()> {
    stamp(w)?;
    row(w, &["tweet_id", "fraction", "t_x_seconds", "median", "lo90", "hi90", "true_m"])?;
    for r in rows {
        row(
            w,
            &[
                &r.tweet_id,
                &r.fraction.to_string(),
                &r.t_x_seconds.to_string(),
                &r.median.to_string(),
                &r.lo90.to_string(),
                &r.hi90.to_string(),
                &r.true_m.to_string(),
            ],
        )?;
    }
    Ok(())
}

/// Per-cascade point forecasts of every scored model.
pub fn write_benchmark<W: Write>(w: &mut W, rows: &[BenchmarkRow]) -> io::Result<()> {
    stamp(w)?;
    row(w, &["model", "tweet_id", "fraction", "m_obs", "prediction", "true_m", "ape"])?;
    for r in rows {
        row(
            w,
            &[
                r.model,
                &r.tweet_id,
                &r.fraction.to_string(),
                &r.m_obs.to_string(),
                &r.prediction.to_string(),
                &r.true_m.to_string(),
                &r.ape.to_string(),
            ],
        )?;
    }
    Ok(())
}

/// Fit-quality comparison of the sampler-based models at one observation
/// fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub fraction: f64,
    pub avg_loglik: f64,
    pub dic: f64,
}

pub fn write_comparison<W: Write>(w: &mut W, rows: &[ComparisonRow]) -> io::Result<()> {
    stamp(w)?;
    row(w, &["model", "fraction", "avg_loglik", "dic"])?;
    for r in rows {
        row(
            w,
            &[
                &r.model,
                &r.fraction.to_string(),
                &r.avg_loglik.to_string(),
                &r.dic.to_string(),
            ],
        )?;
    }
    Ok(())
}

/// One cell of the error-versus-fraction table. `mape_remaining` is the
/// median percent error against the not-yet-observed count; it is absent
/// when every scored cascade was already complete at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct MapeRow {
    pub model: String,
    pub fraction: f64,
    pub mape_total: f64,
    pub mape_remaining: Option<f64>,
}

pub fn write_mape<W: Write>(w: &mut W, rows: &[MapeRow]) -> io::Result<()> {
    stamp(w)?;
    row(w, &["model", "fraction", "mape_total", "mape_remaining"])?;
    for r in rows {
        let remaining = r.mape_remaining.map(|v| v.to_string()).unwrap_or_default();
        row(w, &[&r.model, &r.fraction.to_string(), &r.mape_total.to_string(), &remaining])?;
    }
    Ok(())
}

fn role_label(role: Role) -> &'static str {
    match role {
        Role::Training => "training",
        Role::Prediction => "prediction",
    }
}

/// Per-cascade descriptive statistics table.
pub fn write_eda_tweets<W: Write>(w: &mut W, report: &EdaReport) -> io::Result<()> {
    stamp(w)?;
    row(
        w,
        &[
            "tweet_id",
            "role",
            "m_total",
            "alpha_ml",
            "tau_ml",
            "median_retweet_time",
            "delta",
            "depth_one",
            "deeper",
            "frac_deep",
        ],
    )?;
    for t in &report.tweets {
        let delta = t.delta.map(|d| d.to_string()).unwrap_or_default();
        row(
            w,
            &[
                &t.tweet_id,
                role_label(t.role),
                &t.m_total.to_string(),
                &t.alpha_ml.to_string(),
                &t.tau_ml.to_string(),
                &t.median_retweet_time.to_string(),
                &delta,
                &t.depth_one.to_string(),
                &t.deeper.to_string(),
                &t.frac_deep().to_string(),
            ],
        )?;
    }
    Ok(())
}

/// Corpus-level descriptive statistics as key,value pairs.
pub fn write_eda_corpus<W: Write>(w: &mut W, report: &EdaReport) -> io::Result<()> {
    stamp(w)?;
    row(w, &["key", "value"])?;
    let mut kv = |k: &str, v: String| row(w, &[k, &v]);
    kv("n_tweets", report.tweets.len().to_string())?;
    kv("mean_alpha_ml", report.mean_alpha_ml.to_string())?;
    kv("sd_alpha_ml", report.sd_alpha_ml.to_string())?;
    kv("mean_tau_ml", report.mean_tau_ml.to_string())?;
    kv("depth_one", report.depth.depth_one.to_string())?;
    kv("deeper", report.depth.deeper.to_string())?;
    for (d, count) in report.depth.histogram.iter().enumerate() {
        kv(&format!("depth_{}", d + 1), count.to_string())?;
    }
    if let Some(c) = report.correlations {
        kv("pearson_r", c.pearson_r.to_string())?;
        kv("pearson_p", c.pearson_p.to_string())?;
        kv("kendall_tau", c.kendall_tau.to_string())?;
        kv("kendall_p", c.kendall_p.to_string())?;
    }
    if let Some(r) = report.regression {
        kv("regression_beta0", r.beta[0].to_string())?;
        kv("regression_beta_f", r.beta[1].to_string())?;
        kv("regression_beta_d", r.beta[2].to_string())?;
        kv("regression_p_beta0", r.p_values[0].to_string())?;
        kv("regression_p_beta_f", r.p_values[1].to_string())?;
        kv("regression_p_beta_d", r.p_values[2].to_string())?;
        kv("regression_n_used", r.n_used.to_string())?;
        kv("regression_n_saturated", r.n_saturated.to_string())?;
    }
    Ok(())
}

/// Reaction-time CCDF points: the empirical survival at each sorted value
/// next to the fitted log-normal survival for overplotting.
pub fn write_ccdf<W: Write>(
    w: &mut W,
    empirical: &[(f64, f64)],
    alpha: f64,
    tau: f64,
) -> io::Result<()> {
    stamp(w)?;
    row(w, &["s", "empirical", "model"])?;
    for &(s, p) in empirical {
        let model = crate::analysis::lognormal_ccdf(s, alpha, tau);
        row(w, &[&s.to_string(), &p.to_string(), &model.to_string()])?;
    }
    Ok(())
}

/// The generating configuration of a simulated corpus, recorded next to
/// the cascade file so a run can be reproduced from its artifacts alone.
pub fn write_simulation_sidecar<W: Write>(
    w: &mut W,
    globals: &GlobalParams,
    hyperpriors: &Hyperpriors,
    seed: u64,
    n_cascades: usize,
) -> io::Result<()> {
    let doc = serde_json::json!({
        "seed": seed,
        "n_cascades": n_cascades,
        "globals": globals,
        "hyperpriors": hyperpriors,
    });
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)
}

// ---------------------------------------------------------------------------
// reading sample dumps back (post-hoc diagnostics)
// ---------------------------------------------------------------------------

/// One parsed line of a posterior sample dump.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub chain: u64,
    pub iteration: u64,
    pub parameter: String,
    pub value: f64,
}

/// Parse a sample dump written by [`write_samples`], skipping `#` comment
/// lines.
pub fn read_samples<R: io::Read>(r: R) -> Result<Vec<SampleRow>> {
    let bad = |line: usize, what: String| {
        Error::Dataset(format!("sample dump line {line}: {what}"))
    };
    let mut rows = Vec::new();
    let reader = io::BufReader::new(r);
    let mut saw_header = false;
    for (i, line) in io::BufRead::lines(reader).enumerate() {
        let line = line.map_err(|e| bad(i + 1, e.to_string()))?;
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != "chain,iteration,parameter,value" {
                return Err(bad(i + 1, format!("unexpected header '{line}'")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(i + 1, format!("expected 4 fields, got {}", fields.len())));
        }
        rows.push(SampleRow {
            chain: fields[0].parse().map_err(|e| bad(i + 1, format!("chain: {e}")))?,
            iteration: fields[1].parse().map_err(|e| bad(i + 1, format!("iteration: {e}")))?,
            parameter: fields[2].to_string(),
            value: fields[3].parse().map_err(|e| bad(i + 1, format!("value: {e}")))?,
        });
    }
    if !saw_header {
        return Err(Error::Dataset("sample dump has no header line".into()));
    }
    Ok(rows)
}

/// Corpus-level parameter names present in a dump (those without a tweet
/// qualifier), in first-appearance order.
pub fn global_parameter_names(rows: &[SampleRow]) -> Vec<String> {
    let mut names = Vec::new();
    for r in rows {
        if !r.parameter.contains(':') && !names.contains(&r.parameter) {
            names.push(r.parameter.clone());
        }
    }
    names
}

/// Per-chain traces of one parameter, chains ordered by id and draws in
/// file order.
pub fn traces_by_chain(rows: &[SampleRow], parameter: &str) -> Vec<Vec<f64>> {
    let mut chain_ids: Vec<u64> =
        rows.iter().filter(|r| r.parameter == parameter).map(|r| r.chain).collect();
    chain_ids.sort_unstable();
    chain_ids.dedup();
    chain_ids
        .into_iter()
        .map(|c| {
            rows.iter()
                .filter(|r| r.chain == c && r.parameter == parameter)
                .map(|r| r.value)
                .collect()
        })
        .collect()
}
