//! Verification statistics: exponent fits, ch.f. distances, two-sample tests,
//! renewal large deviations and regime classification.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::aggregation::{aggregate, source_count, AggregateOptions, BulkOptions, SourceModel};
use crate::error::{ensure, Result};
use crate::heavy_tail::{hill_default_k, hill_estimate, PositiveLaw, RegVaryingDist};
use crate::numeric::kolmogorov_sf;
use crate::regenerative::stationary_renewal_count;
use crate::regime::{LimitKind, RegimeSpec, TelecomLimit};
use crate::rng::{derive_seed, stream};

/// Default θ-grid for ch.f. comparisons.
pub const THETA_GRID: [f64; 10] = [-4.0, -2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0, 4.0];

/// Empirical ch.f. at `theta` with the standard errors of its real and imaginary parts.
pub fn empirical_chf(samples: &[f64], theta: f64) -> (Complex64, f64, f64) {
    let n = samples.len() as f64;
    let (mut c, mut s, mut c2, mut s2) = (0.0, 0.0, 0.0, 0.0);
    for &x in samples {
        let (si, co) = (theta * x).sin_cos();
        c += co;
        s += si;
        c2 += co * co;
        s2 += si * si;
    }
    let (mc, ms) = (c / n, s / n);
    let se_c = ((c2 / n - mc * mc).max(0.0) / n).sqrt();
    let se_s = ((s2 / n - ms * ms).max(0.0) / n).sqrt();
    (Complex64::new(mc, ms), se_c, se_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChfDistance {
    /// `sup_θ |φ̂(θ) − φ(θ)|`.
    pub distance: f64,
    /// Standard error of `|φ̂ − φ|` at each θ (root sum of the component SEs).
    pub se: Vec<f64>,
    pub max_se: f64,
    pub theta: Vec<f64>,
    pub per_theta: Vec<f64>,
}

/// Sup distance between the empirical ch.f. of `samples` and `exp(oracle_logchf)`.
pub fn chf_distance(
    samples: &[f64],
    oracle_logchf: impl Fn(f64) -> Result<Complex64>,
    theta_grid: &[f64],
) -> Result<ChfDistance> {
    ensure(!samples.is_empty(), "samples", "need at least one sample")?;
    ensure(!theta_grid.is_empty(), "theta_grid", "θ-grid must not be empty")?;
    ensure(theta_grid.iter().all(|&t| t != 0.0 && t.is_finite()), "theta_grid", "θ values must be finite and nonzero")?;
    let mut out = ChfDistance {
        distance: 0.0,
        se: vec![],
        max_se: 0.0,
        theta: theta_grid.to_vec(),
        per_theta: vec![],
    };
    for &t in theta_grid {
        let (e, sc, ss) = empirical_chf(samples, t);
        let d = (e - oracle_logchf(t)?.exp()).norm();
        let se = sc.hypot(ss);
        out.per_theta.push(d);
        out.se.push(se);
        out.distance = out.distance.max(d);
        out.max_se = out.max_se.max(se);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% interval.
    pub ci: f64,
    pub se: f64,
}

/// Weighted least squares of `log stat` on `log λ`.
///
/// `rel_se` are relative standard errors of the statistics (used as weights and
/// for the interval); pass `None` for an unweighted fit with the residual-based
/// interval.
pub fn fit_scaling_exponent(lambdas: &[f64], stats: &[f64], rel_se: Option<&[f64]>) -> Result<SlopeFit> {
    ensure(lambdas.len() == stats.len(), "stats", "one statistic per λ")?;
    ensure(lambdas.len() >= 4, "lambdas", "need at least 4 ladder points")?;
    ensure(lambdas.iter().chain(stats).all(|&v| v > 0.0 && v.is_finite()), "stats", "values must be positive and finite")?;
    let x: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = stats.iter().map(|s| s.ln()).collect();
    let w: Vec<f64> = match rel_se {
        Some(r) => {
            ensure(r.len() == x.len() && r.iter().all(|&v| v > 0.0), "rel_se", "positive, one per λ")?;
            r.iter().map(|v| 1.0 / (v * v)).collect()
        }
        None => vec![1.0; x.len()],
    };
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).zip(&w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let n = x.len() as f64;
    let se = if rel_se.is_some() {
        (1.0 / sxx).sqrt()
    } else {
        let rss: f64 = x.iter().zip(&y).map(|(a, c)| (c - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    };
    Ok(SlopeFit {
        slope,
        intercept,
        ci: 1.96 * se,
        se,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    ensure(!a.is_empty() && !b.is_empty(), "samples", "both samples must be non-empty")?;
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let s = ne.sqrt();
    Ok((d, kolmogorov_sf((s + 0.12 + 0.11 / s) * d)))
}

/// One-sample KS statistic against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    ensure(!samples.is_empty(), "samples", "must be non-empty")?;
    let mut x = samples.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs());
    }
    let s = n.sqrt();
    Ok((d, kolmogorov_sf((s + 0.12 + 0.11 / s) * d)))
}

/// Sample mean and its standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Unbiased variance and the standard error of that estimate.
pub fn variance_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (var, ((m4 - var * var).max(0.0) / n).sqrt())
}

/// Sample covariance of paired draws and its standard error.
pub fn covariance_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let c = prods.iter().sum::<f64>() / (n - 1.0);
    let v = prods.iter().map(|p| (p - c).powi(2)).sum::<f64>() / (n - 1.0);
    (c, (v / n).sqrt())
}

/// Interquartile range.
pub fn iqr(v: &[f64]) -> f64 {
    let mut x = v.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    quantile_sorted(&x, 0.75) - quantile_sorted(&x, 0.25)
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(x: &[f64], q: f64) -> f64 {
    let h = (x.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(x.len() - 1);
    x[lo] + (h - lo as f64) * (x[hi] - x[lo])
}

/// Window `(λ^κ, λ − λ^{2−α})` for the renewal deviation check.
pub fn ld_window(lambda: f64, alpha: f64, kappa: f64) -> (f64, f64) {
    (lambda.powf(kappa), lambda - lambda.powf(2.0 - alpha))
}

/// Default `κ = 0.75/α + 0.25`, inside `(1/α, 1)`.
pub fn default_ld_kappa(alpha: f64) -> f64 {
    0.75 / alpha + 0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdRow {
    pub u: f64,
    /// `P̂(N(λ) − λ/μ ≤ −u/μ)`.
    pub p_lower: f64,
    pub se_lower: f64,
    /// `(u^α/λ)·P̂` (α = 1 for light tails).
    pub scaled_lower: f64,
    /// `((λ − u)/λ)·c_Z/μ`.
    pub predicted_lower: Option<f64>,
    pub ratio: Option<f64>,
    /// `P̂(N(λ) − λ/μ > u/μ)`.
    pub p_upper: f64,
    /// `(u^α/(λ + u))·P̂`.
    pub scaled_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdReport {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: Option<f64>,
    pub c_z: Option<f64>,
    pub kappa: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub n_rep: usize,
    pub rows: Vec<LdRow>,
}

const LD_CHUNK: usize = 8192;

/// `N(λ) = #{n ≥ 0 : S_n ≤ λ}` of the zero-delayed renewal process (so `N ≥ 1`).
fn pure_renewal_count<R: rand::Rng + ?Sized>(z: &PositiveLaw, t: f64, rng: &mut R) -> u64 {
    let mut s = z.sample(rng);
    let mut n = 1;
    while s <= t {
        n += 1;
        s += z.sample(rng);
    }
    n
}

/// Monte Carlo of the renewal-count deviation probabilities against their heavy-tail predictions.
///
/// For a regularly varying `Z` every `u` must lie in `(λ^κ, λ − λ^{2−α})`; other laws
/// (e.g. exponential) are run without predictions.
pub fn renewal_ld_check(z: &PositiveLaw, lambda: f64, u_grid: &[f64], n_rep: usize, kappa: Option<f64>, seed: u64) -> Result<LdReport> {
    z.validate()?;
    ensure(lambda > 1.0 && lambda.is_finite(), "lambda", "must exceed 1")?;
    ensure(n_rep >= 1, "n_rep", "need at least one replicate")?;
    ensure(!u_grid.is_empty() && u_grid.iter().all(|&u| u > 0.0 && u < lambda), "u_grid", "need 0 < u < λ")?;
    let mu = z.mean();
    ensure(mu.is_finite() && mu > 0.0, "z", "need 0 < E Z < ∞")?;
    let (alpha, c_z, kappa, window) = match z {
        PositiveLaw::RegVarying { dist } => {
            let a = dist.alpha();
            ensure(a > 1.0 && a < 2.0, "alpha", format!("need 1 < alpha < 2, got {a}"))?;
            let k = kappa.unwrap_or_else(|| default_ld_kappa(a));
            ensure(k > 1.0 / a && k < 1.0, "kappa", format!("need 1/alpha < kappa < 1, got {k}"))?;
            let w = ld_window(lambda, a, k);
            for &u in u_grid {
                ensure(u > w.0 && u < w.1, "u_grid", format!("u = {u} outside ({:.3}, {:.3})", w.0, w.1))?;
            }
            (Some(a), Some(dist.tail_constant()), Some(k), Some(w))
        }
        _ => (None, None, None, None),
    };
    let base = derive_seed(seed, &[0x524c_4443]);
    let chunks = n_rep.div_ceil(LD_CHUNK);
    let counts: Vec<u64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream(base, c as u64);
            let len = LD_CHUNK.min(n_rep - c * LD_CHUNK);
            (0..len).map(move |_| pure_renewal_count(z, lambda, &mut rng)).collect::<Vec<_>>()
        })
        .collect();
    let n = n_rep as f64;
    let a = alpha.unwrap_or(1.0);
    let rows = u_grid
        .iter()
        .map(|&u| {
            let lo = counts.iter().filter(|&&k| (k as f64) - lambda / mu <= -u / mu).count() as f64 / n;
            let hi = counts.iter().filter(|&&k| (k as f64) - lambda / mu > u / mu).count() as f64 / n;
            let scaled_lower = u.powf(a) / lambda * lo;
            let predicted_lower = c_z.map(|c| (lambda - u) / lambda * c / mu);
            LdRow {
                u,
                p_lower: lo,
                se_lower: (lo * (1.0 - lo) / n).sqrt(),
                scaled_lower,
                predicted_lower,
                ratio: predicted_lower.map(|p| scaled_lower / p),
                p_upper: hi,
                scaled_upper: u.powf(a) / (lambda + u) * hi,
            }
        })
        .collect();
    Ok(LdReport {
        lambda,
        mu,
        alpha,
        c_z,
        kappa,
        window,
        n_rep,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelecomAggregateRow {
    pub lambda: f64,
    pub sources: u64,
    pub distance: ChfDistance,
}

/// Compares `λ⁻¹ Σ_{j ≤ ⌊λ^{α−1}⌋} (N_j(λx) − λx/μ)` with `−μ⁻¹J(x)` along a λ-ladder.
pub fn telecom_aggregate_check(
    z: &RegVaryingDist,
    lambdas: &[f64],
    x: f64,
    theta_grid: &[f64],
    n_rep: usize,
    seed: u64,
) -> Result<Vec<TelecomAggregateRow>> {
    z.validate()?;
    let a = z.alpha();
    ensure(a > 1.0 && a < 2.0, "alpha", format!("need 1 < alpha < 2, got {a}"))?;
    ensure(x > 0.0 && x.is_finite(), "x", "must be positive")?;
    ensure(n_rep >= 1, "n_rep", "need at least one replicate")?;
    ensure(!lambdas.is_empty() && lambdas.iter().all(|&l| l >= 1.0), "lambdas", "need λ >= 1")?;
    let mu = z.mean();
    let oracle = TelecomLimit {
        alpha: a,
        intensity: z.tail_constant() / mu,
        prefactor: -1.0 / mu,
        amplitude: None,
    };
    lambdas
        .iter()
        .enumerate()
        .map(|(il, &lambda)| {
            let m = source_count(1.0, lambda, a - 1.0);
            ensure(m >= 1, "lambdas", "λ^{α−1} < 1 gives no sources")?;
            let t = lambda * x;
            let base = derive_seed(seed, &[0x5443_4147, il as u64]);
            let samples = (0..n_rep as u64)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = stream(base, rep);
                    let mut s = 0.0;
                    for _ in 0..m {
                        s += stationary_renewal_count(z, t, &mut rng)? as f64;
                    }
                    Ok((s - m as f64 * t / mu) / lambda)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(TelecomAggregateRow {
                lambda,
                sources: m,
                distance: chf_distance(&samples, |th| oracle.log_chf(th, x, 1.0), theta_grid)?,
            })
        })
        .collect()
}

/// Outcome of a regime classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "FBS-consistent")]
    Fbs,
    #[serde(rename = "stable-consistent")]
    Stable,
    #[serde(rename = "Telecom-consistent")]
    Telecom,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl Verdict {
    pub fn of(kind: LimitKind) -> Self {
        match kind {
            LimitKind::Fbs => Verdict::Fbs,
            LimitKind::StableSheet => Verdict::Stable,
            LimitKind::Intermediate => Verdict::Telecom,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Fbs => "FBS-consistent",
            Verdict::Stable => "stable-consistent",
            Verdict::Telecom => "Telecom-consistent",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Ladder, sample size and thresholds of a classification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyBudget {
    pub lambdas: Vec<f64>,
    pub n_rep: usize,
    /// Evaluation points `(x, y)`; distances are the sup over points and θ. The first point
    /// also carries the variance, IQR and tail-index estimates.
    #[serde(default = "default_points")]
    pub points: Vec<(f64, f64)>,
    #[serde(default = "default_theta")]
    pub theta_grid: Vec<f64>,
    /// Distance at the largest λ below which an oracle is accepted.
    #[serde(default = "default_accept")]
    pub accept: f64,
    /// Distance at the largest λ above which a competing oracle counts as rejected.
    #[serde(default = "default_reject")]
    pub reject: f64,
    /// Allowed error of the variance-ladder slope against 2H.
    #[serde(default = "default_slope_tol")]
    pub slope_tol: f64,
    /// Allowed error of the tail index against α.
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default)]
    pub bulk: Option<BulkOptions>,
}

fn default_points() -> Vec<(f64, f64)> {
    vec![(1.0, 1.0)]
}
fn default_theta() -> Vec<f64> {
    THETA_GRID.to_vec()
}
fn default_accept() -> f64 {
    0.05
}
fn default_reject() -> f64 {
    0.15
}
fn default_slope_tol() -> f64 {
    0.05
}
fn default_tail_tol() -> f64 {
    0.15
}

impl ClassifyBudget {
    pub fn new(lambdas: Vec<f64>, n_rep: usize) -> Self {
        ClassifyBudget {
            lambdas,
            n_rep,
            points: default_points(),
            theta_grid: default_theta(),
            accept: default_accept(),
            reject: default_reject(),
            slope_tol: default_slope_tol(),
            tail_tol: default_tail_tol(),
            bulk: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.lambdas.len() >= 4, "lambdas", "need at least 4 ladder points")?;
        ensure(self.lambdas.windows(2).all(|w| w[1] > w[0]) && self.lambdas[0] >= 1.0, "lambdas", "must be increasing and >= 1")?;
        ensure(self.n_rep >= 10, "n_rep", "need at least 10 replicates")?;
        ensure(!self.points.is_empty(), "points", "need at least one evaluation point")?;
        ensure(
            self.points.iter().all(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()),
            "points",
            "evaluation points must be positive",
        )?;
        ensure(self.accept > 0.0 && self.reject > self.accept, "reject", "need 0 < accept < reject")?;
        ensure(self.slope_tol > 0.0 && self.tail_tol > 0.0, "slope_tol", "tolerances must be positive")
    }
}

/// Distances of one ladder point to each candidate limit (`None` where no oracle exists).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub lambda: f64,
    pub sources: u64,
    pub fbs: Option<f64>,
    pub stable: Option<f64>,
    pub telecom: Option<f64>,
    pub max_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub iqr: f64,
}

impl LadderPoint {
    pub fn distance(&self, kind: LimitKind) -> Option<f64> {
        match kind {
            LimitKind::Fbs => self.fbs,
            LimitKind::StableSheet => self.stable,
            LimitKind::Intermediate => self.telecom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub model: String,
    pub gamma: f64,
    pub gamma0: f64,
    pub predicted: Verdict,
    pub h_predicted: f64,
    /// H estimated from the variance ladder (FBS prediction) or the IQR ladder (otherwise).
    pub h_estimate: f64,
    pub h_ci: f64,
    pub variance_slope: SlopeFit,
    pub iqr_slope: SlopeFit,
    /// `(1 + γ)/Ĥ` with `Ĥ` the IQR-ladder slope.
    pub tail_index: f64,
    pub tail_index_ci: f64,
    /// Hill estimate on the heavier side at the largest λ. Prelimit aggregates have light
    /// tails beyond a λ-dependent cap, so this is reported but not used by the verdict.
    pub hill_index: f64,
    pub hill_k: usize,
    /// Normalizing exponent used for each candidate, in the order fbs, stable, telecom.
    pub candidate_h: [Option<f64>; 3],
    pub ladder: Vec<LadderPoint>,
    pub budget: ClassifyBudget,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

/// Normalizing exponent of each candidate limit at `γ`.
///
/// The Gaussian candidate uses `γ/2 + H₁`, the stable one `(1 + γ)/α`, the Telecom one the
/// value at `γ₀`.
pub fn candidate_exponents(spec: &RegimeSpec) -> [Option<f64>; 3] {
    let g = spec.gamma;
    let fbs = spec.fbs.map(|f| g / 2.0 + f.h1);
    let stable = spec.stable.map(|_| (1.0 + g) / spec.alpha);
    let h0 = match spec.fbs {
        Some(f) => spec.gamma0 / 2.0 + f.h1,
        None => (1.0 + spec.gamma0) / spec.alpha,
    };
    [fbs, stable, spec.telecom.as_ref().map(|_| h0)]
}

/// Runs the aggregate along the ladder and decides which limit the samples support.
pub fn classify_regime(src: &SourceModel, gamma: f64, budget: &ClassifyBudget, seed: u64) -> Result<ScalingReport> {
    budget.validate()?;
    let spec = src.regime_of(gamma)?;
    let cand = candidate_exponents(&spec);
    let grid = |sel: fn(&(f64, f64)) -> f64| {
        let mut v: Vec<f64> = budget.points.iter().map(sel).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (xs, ys) = (grid(|p| p.0), grid(|p| p.1));
    let index = |v: &[f64], t: f64| v.iter().position(|&g| g == t).expect("point is on its own grid");
    let cells: Vec<(usize, usize)> = budget.points.iter().map(|&(x, y)| (index(&xs, x), index(&ys, y))).collect();
    let mut ladder = Vec::with_capacity(budget.lambdas.len());
    let mut last: Vec<f64> = Vec::new();
    for (il, &lambda) in budget.lambdas.iter().enumerate() {
        let opts = AggregateOptions { bulk: budget.bulk };
        let s = aggregate(src, lambda, gamma, 0.0, &xs, &ys, budget.n_rep, derive_seed(seed, &[il as u64]), &opts)?;
        for (&(_, iy), &(_, y)) in cells.iter().zip(&budget.points) {
            ensure(s.sources[iy] >= 1, "lambdas", format!("λ = {lambda} gives no sources at y = {y}"))?;
        }
        let mut columns: Vec<Vec<f64>> = cells.iter().map(|&(ix, iy)| s.column(ix, iy)).collect();
        let mut d = [None; 3];
        let mut max_se: f64 = 0.0;
        for (k, kind) in LimitKind::ALL.into_iter().enumerate() {
            let Some(h) = cand[k] else { continue };
            let mut sup: f64 = 0.0;
            for (raw, &(x, y)) in columns.iter().zip(&budget.points) {
                let scaled: Vec<f64> = raw.iter().map(|v| v * lambda.powf(-h)).collect();
                let r = chf_distance(
                    &scaled,
                    |th| spec.oracle_logchf(kind, th, x, y).expect("candidate has an oracle"),
                    &budget.theta_grid,
                )?;
                max_se = max_se.max(r.max_se);
                sup = sup.max(r.distance);
            }
            d[k] = Some(sup);
        }
        let raw = &columns[0];
        let (var, var_se) = variance_se(raw);
        ladder.push(LadderPoint {
            lambda,
            sources: s.sources[cells[0].1],
            fbs: d[0],
            stable: d[1],
            telecom: d[2],
            max_se,
            variance: var,
            variance_se: var_se,
            iqr: iqr(raw),
        });
        if il + 1 == budget.lambdas.len() {
            last = columns.swap_remove(0);
        }
    }
    let lambdas = &budget.lambdas;
    let vars: Vec<f64> = ladder.iter().map(|p| p.variance).collect();
    let var_rel: Vec<f64> = ladder.iter().map(|p| (p.variance_se / p.variance).max(1e-12)).collect();
    let variance_slope = fit_scaling_exponent(lambdas, &vars, Some(&var_rel))?;
    let iqrs: Vec<f64> = ladder.iter().map(|p| p.iqr).collect();
    let iqr_slope = fit_scaling_exponent(lambdas, &iqrs, None)?;
    // Hill on the heavier side of the predicted stable law
    let sign = if spec.c_minus.unwrap_or(0.0) > spec.c_plus.unwrap_or(0.0) { -1.0 } else { 1.0 };
    let side: Vec<f64> = last.iter().map(|v| sign * v).filter(|&v| v > 0.0).collect();
    ensure(side.len() >= 3, "n_rep", "too few replicates on the heavy side for a tail estimate")?;
    let hill_k = hill_default_k(budget.n_rep).min(side.len() - 1);
    let hill_index = hill_estimate(&side, hill_k)?;
    let tail_index = (1.0 + gamma) / iqr_slope.slope;
    let tail_index_ci = tail_index / iqr_slope.slope * iqr_slope.ci;
    let (h_estimate, h_ci) = if spec.kind == LimitKind::Fbs {
        (variance_slope.slope / 2.0, variance_slope.ci / 2.0)
    } else {
        (iqr_slope.slope, iqr_slope.ci)
    };

    let top = ladder.last().expect("ladder is non-empty");
    let mut reasons = Vec::new();
    let accepted: Vec<LimitKind> = LimitKind::ALL
        .into_iter()
        .filter(|&k| top.distance(k).is_some_and(|d| d <= budget.accept))
        .collect();
    let verdict = match accepted.as_slice() {
        [k] => {
            let k = *k;
            let mut ok = true;
            for other in LimitKind::ALL.into_iter().filter(|&o| o != k) {
                if let Some(d) = top.distance(other) {
                    if d < budget.reject {
                        ok = false;
                        reasons.push(format!("competing {} distance {d:.3} below {}", other.name(), budget.reject));
                    }
                }
            }
            match k {
                LimitKind::Fbs => {
                    let target = 2.0 * cand[0].expect("accepted kind has an exponent");
                    if (variance_slope.slope - target).abs() > budget.slope_tol {
                        ok = false;
                        reasons.push(format!("variance slope {:.3} vs 2H = {target:.3}", variance_slope.slope));
                    }
                }
                LimitKind::StableSheet => {
                    if (tail_index - spec.alpha).abs() > budget.tail_tol {
                        ok = false;
                        reasons.push(format!("tail index {tail_index:.3} vs α = {:.3}", spec.alpha));
                    }
                }
                LimitKind::Intermediate => {}
            }
            if ok {
                Verdict::of(k)
            } else {
                Verdict::Inconclusive
            }
        }
        [] => {
            reasons.push(format!("no oracle within {} at λ = {}", budget.accept, top.lambda));
            Verdict::Inconclusive
        }
        _ => {
            reasons.push("several oracles accepted".into());
            Verdict::Inconclusive
        }
    };
    Ok(ScalingReport {
        model: format!("{}/{}", src.kind_name(), src.pulse().family()),
        gamma,
        gamma0: spec.gamma0,
        predicted: Verdict::of(spec.kind),
        h_predicted: spec.h,
        h_estimate,
        h_ci,
        variance_slope,
        iqr_slope,
        tail_index,
        tail_index_ci,
        hill_index,
        hill_k,
        candidate_h: cand,
        ladder,
        budget: budget.clone(),
        verdict,
        reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal, stream};

    #[test]
    fn exact_power_law_slope() {
        let l = [64.0, 128.0, 256.0, 512.0, 1024.0];
        let s: Vec<f64> = l.iter().map(|x: &f64| 3.0 * x.powf(2.5)).collect();
        let f = fit_scaling_exponent(&l, &s, None).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-12);
        let c = fit_scaling_exponent(&l, &[2.0; 5], None).unwrap();
        assert!(c.slope.abs() < 1e-12);
    }

    #[test]
    fn normal_vs_gaussian_oracle() {
        let mut r = stream(1, 0);
        let v: Vec<f64> = (0..100_000).map(|_| normal(&mut r)).collect();
        let d = chf_distance(&v, |t| Ok(Complex64::new(-t * t / 2.0, 0.0)), &[0.5, 1.0, 2.0]).unwrap();
        for (p, s) in d.per_theta.iter().zip(&d.se) {
            assert!(*p <= 3.0 * s + 1e-3, "{p} > 3·{s}");
        }
    }

    #[test]
    fn ks_identical_samples() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let (d, p) = ks_two_sample(&a, &a).unwrap();
        assert_eq!(d, 0.0);
        assert!(p > 0.99);
    }

    #[test]
    fn chf_distance_rejects_zero_theta() {
        assert!(chf_distance(&[1.0], |_| Ok(Complex64::new(0.0, 0.0)), &[0.0]).is_err());
    }

    #[test]
    fn ld_window_is_enforced() {
        let z = PositiveLaw::RegVarying {
            dist: RegVaryingDist::pareto(1.5, 1.0).unwrap(),
        };
        let (lo, hi) = ld_window(4096.0, 1.5, default_ld_kappa(1.5));
        assert!((lo - 4096f64.powf(0.75)).abs() < 1e-9 && (hi - (4096.0 - 64.0)).abs() < 1e-9);
        assert!(renewal_ld_check(&z, 4096.0, &[100.0], 10, None, 0).is_err());
        assert!(renewal_ld_check(&z, 4096.0, &[4050.0], 10, None, 0).is_err());
        assert!(renewal_ld_check(&z, 4096.0, &[2048.0], 10, Some(0.5), 0).is_err());
    }

    #[test]
    fn light_tail_sanity_run() {
        let z = PositiveLaw::Exponential { rate: 1.0 };
        let r = renewal_ld_check(&z, 400.0, &[40.0, 80.0], 20_000, None, 3).unwrap();
        assert!(r.alpha.is_none() && r.rows.iter().all(|row| row.predicted_lower.is_none()));
        // N(400) − 1 is Poisson(400), so P(N − 400 ≤ −40) = P(Poisson(400) ≤ 359)
        use statrs::distribution::{DiscreteCDF, Poisson};
        let exact = Poisson::new(400.0).unwrap().cdf(359);
        let row = &r.rows[0];
        assert!((row.p_lower - exact).abs() < 4.0 * row.se_lower, "{} vs {exact}", row.p_lower);
        assert!(r.rows[1].p_lower < 1e-3);
    }

    #[test]
    fn pure_count_includes_origin() {
        let z = PositiveLaw::Constant { value: 3.0 };
        let mut r = stream(0, 0);
        // S_0 = 0, S_1 = 3, S_2 = 6 ≤ 7 < 9
        assert_eq!(pure_renewal_count(&z, 7.0, &mut r), 3);
    }

    #[test]
    fn telecom_oracle_at_zero() {
        let o = TelecomLimit {
            alpha: 1.5,
            intensity: 1.0 / 3.0,
            prefactor: -1.0 / 3.0,
            amplitude: None,
        };
        assert!(o.log_chf(0.0, 1.0, 1.0).unwrap().norm() < 1e-12);
        assert_eq!(empirical_chf(&[1.0, -2.0], 0.0).0, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn telecom_sampler_against_aggregate_oracle() {
        // −μ⁻¹J with intensity c_Z/μ, drawn directly, must sit within noise of the oracle
        let mu = 3.0;
        let spec = crate::limit_fields::TelecomSpec::new(1.5, 1.0 / mu, 0.01).unwrap();
        let draws: Vec<f64> = crate::limit_fields::telecom_point_draws(&spec, 1.0, 1.0, 20_000, 5)
            .unwrap()
            .into_iter()
            .map(|v| -v / mu)
            .collect();
        let o = TelecomLimit {
            alpha: 1.5,
            intensity: 1.0 / mu,
            prefactor: -1.0 / mu,
            amplitude: None,
        };
        let d = chf_distance(&draws, |t| o.log_chf(t, 1.0, 1.0), &[-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]).unwrap();
        for (p, se) in d.per_theta.iter().zip(&d.se) {
            assert!(*p <= 3.0 * se + 2e-3, "{p} vs {se}");
        }
    }

    #[test]
    fn telecom_aggregate_small() {
        let z = RegVaryingDist::pareto(1.5, 1.0).unwrap();
        let rows = telecom_aggregate_check(&z, &[256.0], 1.0, &[-1.0, 0.5, 1.0], 3000, 8).unwrap();
        assert_eq!(rows[0].sources, 16);
        assert!(rows[0].distance.distance < 0.06, "{}", rows[0].distance.distance);
    }

    #[test]
    fn verdict_names_round_trip() {
        for v in [Verdict::Fbs, Verdict::Stable, Verdict::Telecom, Verdict::Inconclusive] {
            let j = serde_json::to_string(&v).unwrap();
            assert_eq!(j, format!("\"{}\"", v.name()));
            assert_eq!(serde_json::from_str::<Verdict>(&j).unwrap(), v);
        }
        assert_eq!(Verdict::of(LimitKind::StableSheet).name(), LimitKind::StableSheet.verdict_name());
    }

    #[test]
    fn candidate_exponents_meet_at_gamma0() {
        let src = SourceModel::ShotNoise(crate::shot_noise::mg_infinity(1.5, 1.0).unwrap());
        let at = candidate_exponents(&src.regime_of(0.5).unwrap());
        for h in at {
            assert!((h.unwrap() - 1.0).abs() < 1e-12);
        }
        let fast = candidate_exponents(&src.regime_of(1.0).unwrap());
        assert!((fast[0].unwrap() - 1.25).abs() < 1e-12);
        assert!((fast[1].unwrap() - 2.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn budget_validation() {
        let mut b = ClassifyBudget::new(vec![1.0, 2.0, 4.0], 100);
        assert!(b.validate().is_err());
        b.lambdas.push(8.0);
        assert!(b.validate().is_ok());
        b.points.clear();
        assert!(b.validate().is_err());
        let json = r#"{"lambdas":[16,32,64,128],"n_rep":50}"#;
        let d: ClassifyBudget = serde_json::from_str(json).unwrap();
        assert_eq!(d.points, vec![(1.0, 1.0)]);
        assert_eq!(d.theta_grid, THETA_GRID.to_vec());
        assert!(serde_json::from_str::<ClassifyBudget>(r#"{"lambdas":[1],"n_rep":5,"bogus":1}"#).is_err());
    }

    fn rect(a: f64) -> SourceModel {
        SourceModel::shot_noise(crate::pulses::PulseModel::RectIndep {
            amplitude: PositiveLaw::Constant { value: a },
            duration: RegVaryingDist::pareto(1.5, 1.0).unwrap(),
        })
        .unwrap()
    }

    #[test]
    fn classification_is_scale_equivariant() {
        // amplitude 2 with the θ-grid halved sees exactly the same ch.f. values
        let mut b = ClassifyBudget::new(vec![16.0, 32.0, 64.0, 128.0], 300);
        let r1 = classify_regime(&rect(1.0), 1.0, &b, 4).unwrap();
        b.theta_grid = THETA_GRID.iter().map(|t| t / 2.0).collect();
        let r2 = classify_regime(&rect(2.0), 1.0, &b, 4).unwrap();
        assert_eq!(r1.verdict, r2.verdict);
        for (p, q) in r1.ladder.iter().zip(&r2.ladder) {
            for k in LimitKind::ALL {
                assert!((p.distance(k).unwrap() - q.distance(k).unwrap()).abs() < 1e-9);
            }
        }
        assert!((r1.variance_slope.slope - r2.variance_slope.slope).abs() < 1e-9);
    }

    #[test]
    fn inconclusive_is_returned_not_coerced() {
        // far too small a ladder for any limit to be accepted at these thresholds
        let mut b = ClassifyBudget::new(vec![2.0, 4.0, 8.0, 16.0], 200);
        b.accept = 1e-6;
        b.reject = 2e-6;
        let r = classify_regime(&rect(1.0), 0.25, &b, 1).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(!r.reasons.is_empty());
        assert_eq!(r.predicted, Verdict::Stable);
    }
}
