//! Benchmark harness: simulates the multi-series design (piecewise-constant
//! means plus a shared sine-with-peaks bias), runs the estimators over a
//! configuration grid, and reports the quality criteria.
//!
//! Everything here is concrete `f64`: the harness is an application of the
//! generic core, not part of it.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dictionary::{assemble, BasisKind, BasisSpec, DictionaryMatrix};
use crate::error::{Error, Result};
use crate::fit::{fit_fixed_k, trace_monotone, FitConfig, ModelFit};
use crate::selection::{select_k, FitMethod};
use crate::series::{segmentation_signal, Series, SeriesSet};

/// One simulation design cell.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Observations per series.
    pub n: usize,
    pub num_series: usize,
    /// Noise variance σ².
    pub sigma2: f64,
    /// Mean of the Poisson draw of per-series segment counts.
    pub mean_k: f64,
    pub jump_values: Vec<f64>,
    pub jump_probs: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 100,
            num_series: 10,
            sigma2: 0.1,
            mean_k: 3.0,
            jump_values: vec![-2.0, -1.0, 1.0, 2.0],
            jump_probs: vec![0.2, 0.3, 0.3, 0.2],
            replicates: 100,
            seed: 1729,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.num_series < 1 || self.replicates < 1 {
            return Err(Error::InvalidArgument(
                "n, num_series and replicates must be at least 1".into(),
            ));
        }
        if !(self.mean_k > 0.0) {
            return Err(Error::InvalidArgument("mean_k must be positive".into()));
        }
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma2 = {} invalid", self.sigma2)));
        }
        if self.jump_values.is_empty() || self.jump_values.len() != self.jump_probs.len() {
            return Err(Error::InvalidArgument(
                "jump_values and jump_probs must be non-empty and equally long".into(),
            ));
        }
        let total: f64 = self.jump_probs.iter().sum();
        if self.jump_probs.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("jump_probs must sum to 1".into()));
        }
        Ok(())
    }
}

/// What the generator actually drew.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Per-series segment ends, 1-based, last entry = n.
    pub breaks: Vec<Vec<usize>>,
    /// Per-series segment means, aligned with `breaks`.
    pub means: Vec<Vec<f64>>,
    /// f(t) for t = 1..n.
    pub bias: Vec<f64>,
    pub sigma2: f64,
}

impl GroundTruth {
    pub fn total_segments(&self) -> usize {
        self.breaks.iter().map(Vec::len).sum()
    }

    /// The flattened signal Tμ over all series.
    pub fn mu_signal(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (ends, means) in self.breaks.iter().zip(&self.means) {
            let mut prev = 0;
            for (&e, &mu) in ends.iter().zip(means) {
                out.extend(std::iter::repeat_n(mu, e - prev));
                prev = e;
            }
        }
        out
    }

    pub fn internal_breaks(&self) -> Vec<Vec<usize>> {
        self.breaks.iter().map(|e| e[..e.len() - 1].to_vec()).collect()
    }
}

/// The simulated bias: a sine of period 20 plus peaks of heights +0.5, −1
/// and +2 at t = n/10, n/2 and 6n/10.
pub fn true_bias(t: usize, n: usize) -> f64 {
    let mut f = 0.3 * (std::f64::consts::TAU * t as f64 / 20.0).sin();
    if 10 * t == n {
        f += 0.5;
    }
    if 2 * t == n {
        f -= 1.0;
    }
    if 10 * t == 6 * n {
        f += 2.0;
    }
    f
}

/// Draws one replicate with the given seed (ChaCha8). Per series, in order:
/// segment count max(1, Poisson(mean_k)) capped at n, distinct internal
/// breakpoints uniform on {1..n−1}, one jump per non-zero segment (means
/// alternate starting at 0), then the Gaussian noise.
pub fn simulate(config: &SimConfig, seed: u64) -> Result<(SeriesSet<f64>, GroundTruth)> {
    config.validate()?;
    let n = config.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = Poisson::new(config.mean_k)
        .map_err(|e| Error::InvalidArgument(format!("poisson(mean_k): {e}")))?;
    let jumps = WeightedIndex::new(&config.jump_probs)
        .map_err(|e| Error::InvalidArgument(format!("jump_probs: {e}")))?;
    let noise_sd = config.sigma2.sqrt();
    let times: Vec<f64> = (1..=n).map(|t| t as f64).collect();
    let bias: Vec<f64> = (1..=n).map(|t| true_bias(t, n)).collect();

    let mut all_series = Vec::with_capacity(config.num_series);
    let mut all_breaks = Vec::with_capacity(config.num_series);
    let mut all_means = Vec::with_capacity(config.num_series);
    for m in 0..config.num_series {
        let draw: f64 = poisson.sample(&mut rng);
        let k_m = (draw as usize).max(1).min(n);
        let mut ends: Vec<usize> = rand::seq::index::sample(&mut rng, n - 1, k_m - 1)
            .into_iter()
            .map(|i| i + 1)
            .collect();
        ends.sort_unstable();
        ends.push(n);
        let means: Vec<f64> = (0..k_m)
            .map(|k| {
                if k % 2 == 0 {
                    0.0
                } else {
                    config.jump_values[jumps.sample(&mut rng)]
                }
            })
            .collect();
        let mut values = Vec::with_capacity(n);
        let mut seg = 0;
        for t in 1..=n {
            if t > ends[seg] {
                seg += 1;
            }
            let noise: f64 = rng.sample::<f64, _>(StandardNormal) * noise_sd;
            values.push(means[seg] + bias[t - 1] + noise);
        }
        all_series.push(Series::new(format!("sim{:03}", m + 1), times.clone(), values, None)?);
        all_breaks.push(ends);
        all_means.push(means);
    }
    let set = SeriesSet::new(all_series)?;
    Ok((
        set,
        GroundTruth { breaks: all_breaks, means: all_means, bias, sigma2: config.sigma2 },
    ))
}

/// RMSE(μ) = [ Σ_m Σ_t (μ − μ̂)² / N ]^{1/2} over the flattened signals.
pub fn rmse_mu(truth: &GroundTruth, fitted_mu: &[f64]) -> Result<f64> {
    let mu = truth.mu_signal();
    if mu.len() != fitted_mu.len() {
        return Err(Error::Mismatch(format!(
            "true signal has {} points, fitted {}",
            mu.len(),
            fitted_mu.len()
        )));
    }
    let ss: f64 = mu.iter().zip(fitted_mu).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / mu.len() as f64).sqrt())
}

/// RMSE(f) = [ Σ_t (f − f̂)² / n ]^{1/2} on one series' grid.
pub fn rmse_f(true_bias: &[f64], fitted_bias: &[f64]) -> Result<f64> {
    if true_bias.len() != fitted_bias.len() || true_bias.is_empty() {
        return Err(Error::Mismatch(format!(
            "bias grids of length {} and {}",
            true_bias.len(),
            fitted_bias.len()
        )));
    }
    let ss: f64 = true_bias
        .iter()
        .zip(fitted_bias)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / true_bias.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakpointRates {
    pub fdr: f64,
    pub fnr: f64,
    pub detected: usize,
    pub matched: usize,
    pub true_count: usize,
}

/// Greedy nearest matching of detected internal breakpoints to true ones of
/// the same series; each true breakpoint is consumed at most once. A match
/// requires |detected − true| ≤ tolerance. FDR/FNR use the 0/0 → 0 rule.
pub fn breakpoint_rates(
    truth: &[Vec<usize>],
    detected: &[Vec<usize>],
    tolerance: usize,
) -> Result<BreakpointRates> {
    if truth.len() != detected.len() {
        return Err(Error::Mismatch(format!(
            "{} true series vs {} detected",
            truth.len(),
            detected.len()
        )));
    }
    let mut n_true = 0;
    let mut n_det = 0;
    let mut matched = 0;
    for (t_bp, d_bp) in truth.iter().zip(detected) {
        n_true += t_bp.len();
        n_det += d_bp.len();
        let mut used = vec![false; t_bp.len()];
        for &d in d_bp {
            let mut best: Option<(usize, usize)> = None; // (distance, index)
            for (i, &t) in t_bp.iter().enumerate() {
                if used[i] {
                    continue;
                }
                let dist = d.abs_diff(t);
                if dist <= tolerance && best.map_or(true, |(bd, _)| dist < bd) {
                    best = Some((dist, i));
                }
            }
            if let Some((_, i)) = best {
                used[i] = true;
                matched += 1;
            }
        }
    }
    let fdr = if n_det == 0 { 0.0 } else { (n_det - matched) as f64 / n_det as f64 };
    let fnr = if n_true == 0 { 0.0 } else { (n_true - matched) as f64 / n_true as f64 };
    Ok(BreakpointRates { fdr, fnr, detected: n_det, matched, true_count: n_true })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSelection {
    /// One flag per truth ID, in the given order.
    pub hits: Vec<bool>,
    pub fdr: f64,
    pub active_count: usize,
}

/// Hit flags per true dictionary ID plus the function FDR
/// |active \ truth| / |active| (0 when nothing is selected).
pub fn function_selection_metrics(truth_ids: &[usize], active: &[usize]) -> FunctionSelection {
    let hits: Vec<bool> = truth_ids.iter().map(|id| active.contains(id)).collect();
    let false_sel = active.iter().filter(|id| !truth_ids.contains(id)).count();
    let fdr = if active.is_empty() { 0.0 } else { false_sel as f64 / active.len() as f64 };
    FunctionSelection { hits, fdr, active_count: active.len() }
}

/// The 150-function benchmark dictionary: 128 Haar spikes at resolution 7,
/// 10 sin/cos Fourier pairs, and the monomials t, t².
pub fn benchmark_dictionary_specs(n: usize) -> Vec<BasisSpec<f64>> {
    vec![
        BasisSpec::on_time(BasisKind::Haar { resolution: 7, length: n as f64 }),
        BasisSpec::on_time(BasisKind::FourierFixed { j_max: 10, length: n as f64 }),
        BasisSpec::on_time(BasisKind::Monomials { degrees: vec![1, 2] }),
    ]
}

/// Dictionary IDs (1-based) of the functions generating the default bias on
/// an n = 100 grid: Haar spikes at t = 10, 50, 60 and sin with period 20.
pub const DEFAULT_TRUTH_IDS: [usize; 4] = [13, 64, 77, 137];

/// Which estimator a benchmark runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Dictionary Lasso with K chosen by mBIC.
    Lasso,
    /// Dictionary Lasso at the true total number of segments.
    LassoTrueK,
    /// Per-position fixed effect with K chosen by mBIC.
    Position,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Lasso => "lasso",
            Method::LassoTrueK => "lasso_true_k",
            Method::Position => "position",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(Method::Lasso),
            "lasso_true_k" | "lasso_truek" => Ok(Method::LassoTrueK),
            "position" => Ok(Method::Position),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// Harness-wide knobs shared by every cell of a grid run.
#[derive(Debug, Clone)]
pub struct GridOptions {
    /// Template for per-fit settings; `k_total` is overwritten per fit.
    pub fit: FitConfig<f64>,
    /// Sweep bounds for the mBIC selection, as multiples of M: the sweep is
    /// [max(M, ⌊lo·M⌋), ⌈hi·M⌉] clamped to feasibility.
    pub k_sweep_factors: (f64, f64),
    /// Index windows at which breakpoint rates are reported.
    pub tolerances: Vec<usize>,
    /// Dictionary IDs whose selection rate is tracked.
    pub truth_ids: Vec<usize>,
}

impl Default for GridOptions {
    fn default() -> Self {
        let mut fit = FitConfig::new(1);
        fit.k_max_per_series = Some(15);
        Self {
            fit,
            k_sweep_factors: (1.0, 6.0),
            tolerances: vec![0, 1],
            truth_ids: DEFAULT_TRUTH_IDS.to_vec(),
        }
    }
}

/// All metrics of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateMetrics {
    pub replicate: usize,
    pub seed: u64,
    pub k_true: usize,
    pub k_hat: usize,
    pub rmse_mu: f64,
    pub rmse_f: f64,
    /// One entry per requested tolerance, in order.
    pub breakpoints: Vec<BreakpointRates>,
    /// None for methods without a dictionary.
    pub functions: Option<FunctionSelection>,
    pub converged: bool,
    pub trace_ok: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub config: SimConfig,
    pub method: Method,
    pub replicates: Vec<ReplicateMetrics>,
    /// First failure that aborted the cell, if any.
    pub error: Option<String>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Data seed of one (cell, replicate) pair. Methods share it, so every
/// estimator sees the same datasets.
pub fn replicate_seed(cell_seed: u64, replicate: usize) -> u64 {
    splitmix64(splitmix64(cell_seed) ^ splitmix64(replicate as u64 ^ 0x5851_F42D_4C95_7F2D))
}

fn fit_one(
    set: &SeriesSet<f64>,
    dict: Option<&DictionaryMatrix<f64>>,
    truth: &GroundTruth,
    method: Method,
    opts: &GridOptions,
) -> Result<ModelFit<f64>> {
    let m = set.num_series();
    match method {
        Method::LassoTrueK => {
            let cfg = opts.fit.with_k(truth.total_segments());
            fit_fixed_k(set, dict.expect("dictionary required"), &cfg)
        }
        Method::Lasso | Method::Position => {
            let (lo, hi) = opts.k_sweep_factors;
            let k_min = ((lo * m as f64).floor() as usize).max(m);
            let k_max = ((hi * m as f64).ceil() as usize)
                .min(set.total_len())
                .max(k_min);
            let fm = if method == Method::Lasso { FitMethod::Lasso } else { FitMethod::Position };
            let res = select_k(set, dict, k_min, k_max, &opts.fit, fm)?;
            Ok(res.chosen().fit.clone())
        }
    }
}

fn measure(
    truth: &GroundTruth,
    fit: &ModelFit<f64>,
    n: usize,
    method: Method,
    opts: &GridOptions,
    replicate: usize,
    seed: u64,
) -> Result<ReplicateMetrics> {
    let fitted_mu = segmentation_signal(&fit.segmentation);
    let detected: Vec<Vec<usize>> = fit
        .segmentation
        .breakpoint_lists()
        .into_iter()
        .map(|e| e[..e.len() - 1].to_vec())
        .collect();
    let breakpoints = opts
        .tolerances
        .iter()
        .map(|&tol| breakpoint_rates(&truth.internal_breaks(), &detected, tol))
        .collect::<Result<Vec<_>>>()?;
    let functions = match method {
        Method::Position => None,
        _ => Some(function_selection_metrics(&opts.truth_ids, &fit.functional.active_set)),
    };
    Ok(ReplicateMetrics {
        replicate,
        seed,
        k_true: truth.total_segments(),
        k_hat: fit.segmentation.total_segments(),
        rmse_mu: rmse_mu(truth, &fitted_mu)?,
        rmse_f: rmse_f(&truth.bias, fit.bias_on_first_series(n))?,
        breakpoints,
        functions,
        converged: fit.converged,
        trace_ok: trace_monotone(&fit.trace),
        iterations: fit.trace.len(),
    })
}

/// Runs every (cell, method) combination. A failure aborts its cell (the
/// error is recorded) and the grid continues.
pub fn run_grid(
    cells: &[SimConfig],
    methods: &[Method],
    opts: &GridOptions,
) -> Result<Vec<CellResult>> {
    if cells.is_empty() || methods.is_empty() {
        return Err(Error::InvalidArgument("empty grid or method list".into()));
    }
    let mut out = Vec::new();
    for config in cells {
        config.validate()?;
        let dict_needed = methods.iter().any(|&m| m != Method::Position);
        // one probe draw fixes the time grid; the dictionary depends only on it
        let dict = if dict_needed {
            let (probe, _) = simulate(config, replicate_seed(config.seed, 0))?;
            Some(assemble(&benchmark_dictionary_specs(config.n), &probe)?)
        } else {
            None
        };
        for &method in methods {
            let mut replicates = Vec::with_capacity(config.replicates);
            let mut error = None;
            for rep in 0..config.replicates {
                let seed = replicate_seed(config.seed, rep);
                let run = simulate(config, seed).and_then(|(set, truth)| {
                    let fit = fit_one(&set, dict.as_ref(), &truth, method, opts)?;
                    measure(&truth, &fit, config.n, method, opts, rep, seed)
                });
                match run {
                    Ok(metrics) => replicates.push(metrics),
                    Err(e) => {
                        error = Some(format!("replicate {rep}: {e}"));
                        break;
                    }
                }
            }
            out.push(CellResult { config: config.clone(), method, replicates, error });
        }
    }
    Ok(out)
}

/// Mean and sample standard deviation, or None for an empty slice.
fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some((mean, std))
}

/// Averaged metrics of one cell, in a stable named order. Rate metrics whose
/// denominator was zero in every replicate are absent (reported as NA).
pub fn summarize(cell: &CellResult, opts: &GridOptions) -> BTreeMap<String, (f64, f64)> {
    let reps = &cell.replicates;
    let mut rows = BTreeMap::new();
    let mut put = |name: &str, values: Vec<f64>| {
        if let Some(ms) = mean_std(&values) {
            rows.insert(name.to_string(), ms);
        }
    };
    put("rmse_mu", reps.iter().map(|r| r.rmse_mu).collect());
    put("rmse_f", reps.iter().map(|r| r.rmse_f).collect());
    put(
        "k_hat_minus_k",
        reps.iter().map(|r| r.k_hat as f64 - r.k_true as f64).collect(),
    );
    for (i, &tol) in opts.tolerances.iter().enumerate() {
        let any_detection = reps.iter().any(|r| r.breakpoints[i].detected > 0);
        if any_detection {
            put(
                &format!("bp_fdr_tol{tol}"),
                reps.iter().map(|r| r.breakpoints[i].fdr).collect(),
            );
        }
        let any_truth = reps.iter().any(|r| r.breakpoints[i].true_count > 0);
        if any_truth {
            put(
                &format!("bp_fnr_tol{tol}"),
                reps.iter().map(|r| r.breakpoints[i].fnr).collect(),
            );
        }
    }
    if reps.iter().any(|r| r.functions.is_some()) {
        let sel: Vec<&FunctionSelection> =
            reps.iter().filter_map(|r| r.functions.as_ref()).collect();
        for (i, id) in opts.truth_ids.iter().enumerate() {
            put(
                &format!("fn_hit_{id}"),
                sel.iter().map(|f| if f.hits[i] { 1.0 } else { 0.0 }).collect(),
            );
        }
        if sel.iter().any(|f| f.active_count > 0) {
            put("fn_fdr", sel.iter().map(|f| f.fdr).collect());
        }
        put("fn_active_count", sel.iter().map(|f| f.active_count as f64).collect());
    }
    put(
        "converged",
        reps.iter().map(|r| if r.converged { 1.0 } else { 0.0 }).collect(),
    );
    put(
        "trace_ok",
        reps.iter().map(|r| if r.trace_ok { 1.0 } else { 0.0 }).collect(),
    );
    rows
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("part");
    let io = |e: std::io::Error| Error::InvalidArgument(format!("{}: {e}", path.display()));
    let mut file = std::fs::File::create(&tmp).map_err(io)?;
    file.write_all(bytes).map_err(io)?;
    file.sync_all().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)?;
    Ok(())
}

/// Writes `summary.csv`, `replicates.csv` and `config.json` into `out_dir`.
/// Output is a pure function of the results, so reruns with equal seeds
/// produce byte-identical files.
pub fn write_reports(results: &[CellResult], opts: &GridOptions, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", out_dir.display())))?;

    let mut summary = String::from("m,sigma2,method,metric,mean,std\n");
    for cell in results {
        let rows = summarize(cell, opts);
        for (metric, (mean, std)) in &rows {
            summary.push_str(&format!(
                "{},{},{},{metric},{mean},{std}\n",
                cell.config.num_series,
                cell.config.sigma2,
                cell.method.name(),
            ));
        }
        if let Some(err) = &cell.error {
            summary.push_str(&format!(
                "{},{},{},error,NA,NA # {}\n",
                cell.config.num_series,
                cell.config.sigma2,
                cell.method.name(),
                err.replace(['\n', ','], " "),
            ));
        }
    }
    atomic_write(&out_dir.join("summary.csv"), summary.as_bytes())?;

    let mut long = String::from("m,sigma2,method,replicate,seed,metric,value\n");
    for cell in results {
        let head = format!(
            "{},{},{}",
            cell.config.num_series,
            cell.config.sigma2,
            cell.method.name()
        );
        for r in &cell.replicates {
            let mut push = |metric: &str, value: String| {
                long.push_str(&format!("{head},{},{},{metric},{value}\n", r.replicate, r.seed));
            };
            push("k_true", r.k_true.to_string());
            push("k_hat", r.k_hat.to_string());
            push("rmse_mu", r.rmse_mu.to_string());
            push("rmse_f", r.rmse_f.to_string());
            for (b, &tol) in r.breakpoints.iter().zip(&opts.tolerances) {
                push(
                    &format!("bp_fdr_tol{tol}"),
                    if b.detected == 0 { "NA".into() } else { b.fdr.to_string() },
                );
                push(
                    &format!("bp_fnr_tol{tol}"),
                    if b.true_count == 0 { "NA".into() } else { b.fnr.to_string() },
                );
            }
            if let Some(f) = &r.functions {
                for (i, id) in opts.truth_ids.iter().enumerate() {
                    push(&format!("fn_hit_{id}"), (f.hits[i] as u8).to_string());
                }
                push(
                    "fn_fdr",
                    if f.active_count == 0 { "NA".into() } else { f.fdr.to_string() },
                );
                push("fn_active_count", f.active_count.to_string());
            }
            push("converged", (r.converged as u8).to_string());
            push("trace_ok", (r.trace_ok as u8).to_string());
            push("iterations", r.iterations.to_string());
        }
    }
    atomic_write(&out_dir.join("replicates.csv"), long.as_bytes())?;

    let sidecar = serde_json::json!({
        "rng": "ChaCha8",
        "cells": results
            .iter()
            .map(|c| serde_json::json!({
                "config": c.config,
                "method": c.method.name(),
                "completed_replicates": c.replicates.len(),
                "error": c.error,
            }))
            .collect::<Vec<_>>(),
        "options": {
            "gamma": opts.fit.gamma,
            "epsilon": opts.fit.epsilon,
            "max_iterations": opts.fit.max_iterations,
            "k_max_per_series": opts.fit.k_max_per_series,
            "lasso_tol": opts.fit.lasso_tol,
            "k_sweep_factors": [opts.k_sweep_factors.0, opts.k_sweep_factors.1],
            "tolerances": opts.tolerances,
            "truth_ids": opts.truth_ids,
        },
    });
    let mut json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::InvalidArgument(format!("sidecar: {e}")))?;
    json.push('\n');
    atomic_write(&out_dir.join("config.json"), json.as_bytes())?;
    Ok(())
}
