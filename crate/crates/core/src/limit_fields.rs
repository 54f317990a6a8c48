//! Samplers and ch.f. oracles for the limit fields: fractional Brownian sheet,
//! α-stable Lévy sheet, Telecom RF and the κ-stable rectangular field.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{chf_distance, ChfDistance, THETA_GRID};
use crate::error::{ensure, invalid, Error, Result};
use crate::heavy_tail::{sample_stable, StableParams};
use crate::numeric::{gamma, integrate, integrate_complex_raw, psi, psi_integral, ComplexQuad};
use crate::rng::{derive_seed, normal, poisson, stream, uniform, uniform_pos};

/// Values of a field on `x × y`, stored row by row in `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub values: Vec<f64>,
}

impl Field {
    fn zeros(x: &[f64], y: &[f64]) -> Self {
        Field {
            x: x.to_vec(),
            y: y.to_vec(),
            values: vec![0.0; x.len() * y.len()],
        }
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.x.len() + ix]
    }

    #[inline]
    fn at(&mut self, ix: usize, iy: usize) -> &mut f64 {
        let nx = self.x.len();
        &mut self.values[iy * nx + ix]
    }

    /// Turns cell increments into the field by cumulative sums over `y`.
    fn cumulate_y(&mut self) {
        let nx = self.x.len();
        for iy in 1..self.y.len() {
            for ix in 0..nx {
                self.values[iy * nx + ix] += self.values[(iy - 1) * nx + ix];
            }
        }
    }
}

fn check_grid(g: &[f64], name: &'static str) -> Result<()> {
    ensure(!g.is_empty(), name, "grid must not be empty")?;
    ensure(g[0] > 0.0, name, "grid must be positive")?;
    ensure(g.windows(2).all(|w| w[1] > w[0]), name, "grid must be strictly increasing")?;
    ensure(g.iter().all(|v| v.is_finite()), name, "grid must be finite")
}

fn steps(g: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    g.iter()
        .map(|&v| {
            let d = v - prev;
            prev = v;
            d
        })
        .collect()
}

// ---------------------------------------------------------------- FBS

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbsSpec {
    pub h1: f64,
    /// `C_W`.
    pub scale: f64,
}

impl FbsSpec {
    pub fn validate(&self) -> Result<()> {
        ensure(self.h1 > 0.0 && self.h1 <= 1.0, "h1", format!("must lie in (0,1], got {}", self.h1))?;
        ensure(self.scale >= 0.0 && self.scale.is_finite(), "scale", "must be finite and >= 0")
    }

    /// `C_W²·½(x^{2H}+x′^{2H}−|x−x′|^{2H})·(y ∧ y′)`.
    pub fn covariance(&self, x: f64, y: f64, x2: f64, y2: f64) -> f64 {
        let h = 2.0 * self.h1;
        self.scale * self.scale * 0.5 * (x.powf(h) + x2.powf(h) - (x - x2).abs().powf(h)) * y.min(y2)
    }
}

/// FBS on a fixed `x`-grid with the factor of the fBm covariance computed once.
#[derive(Debug, Clone)]
pub struct FbsSampler {
    spec: FbsSpec,
    x: Vec<f64>,
    factor: DMatrix<f64>,
    /// Diagonal jitter that was needed for the factorization (0 if none).
    pub jitter: f64,
}

impl FbsSampler {
    pub fn new(spec: FbsSpec, x_grid: &[f64]) -> Result<Self> {
        spec.validate()?;
        check_grid(x_grid, "x_grid")?;
        let n = x_grid.len();
        let h = 2.0 * spec.h1;
        let cov = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (x_grid[i], x_grid[j]);
            0.5 * (a.powf(h) + b.powf(h) - (a - b).abs().powf(h))
        });
        let mut jitter = 0.0;
        let scale = cov.diagonal().max();
        loop {
            let m = &cov + DMatrix::identity(n, n) * jitter;
            if let Some(ch) = Cholesky::new(m) {
                return Ok(FbsSampler {
                    spec,
                    x: x_grid.to_vec(),
                    factor: ch.l(),
                    jitter,
                });
            }
            jitter = if jitter == 0.0 { 1e-14 * scale } else { jitter * 10.0 };
            if jitter > 1e-6 * scale {
                return Err(Error::Hypothesis("fBm covariance is numerically not PSD".into()));
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, y_grid: &[f64], rng: &mut R) -> Result<Field> {
        check_grid(y_grid, "y_grid")?;
        let mut f = Field::zeros(&self.x, y_grid);
        let n = self.x.len();
        for (iy, dy) in steps(y_grid).into_iter().enumerate() {
            let z = DVector::from_fn(n, |_, _| normal(rng));
            let inc = &self.factor * z;
            let s = self.spec.scale * dy.sqrt();
            for ix in 0..n {
                *f.at(ix, iy) = s * inc[ix];
            }
        }
        f.cumulate_y();
        Ok(f)
    }
}

pub fn sample_fbs_grid<R: Rng + ?Sized>(spec: FbsSpec, x_grid: &[f64], y_grid: &[f64], rng: &mut R) -> Result<Field> {
    FbsSampler::new(spec, x_grid)?.sample(y_grid, rng)
}

// ---------------------------------------------------------------- stable sheet

pub fn sample_stable_sheet<R: Rng + ?Sized>(
    params: &StableParams,
    x_grid: &[f64],
    y_grid: &[f64],
    rng: &mut R,
) -> Result<Field> {
    check_grid(x_grid, "x_grid")?;
    check_grid(y_grid, "y_grid")?;
    let (dx, dy) = (steps(x_grid), steps(y_grid));
    let mut f = Field::zeros(x_grid, y_grid);
    for (iy, &h) in dy.iter().enumerate() {
        let mut acc = 0.0;
        for (ix, &w) in dx.iter().enumerate() {
            acc += sample_stable(&params.scaled_area(w * h), rng);
            *f.at(ix, iy) = acc;
        }
    }
    f.cumulate_y();
    Ok(f)
}

// ---------------------------------------------------------------- Telecom RF

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelecomSpec {
    pub alpha: f64,
    /// `c` in `ν(dr) = α·c·r^{−α−1}dr`.
    pub intensity: f64,
    /// Durations below `epsilon` are not simulated as points.
    pub epsilon: f64,
    /// Replace the omitted short durations by their Gaussian (Brownian sheet) approximation.
    #[serde(default = "yes")]
    pub gaussian_correction: bool,
}

fn yes() -> bool {
    true
}

impl TelecomSpec {
    pub fn new(alpha: f64, intensity: f64, epsilon: f64) -> Result<Self> {
        let s = TelecomSpec {
            alpha,
            intensity,
            epsilon,
            gaussian_correction: true,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.alpha > 1.0 && self.alpha < 2.0, "alpha", format!("must lie in (1,2), got {}", self.alpha))?;
        ensure(self.intensity > 0.0 && self.intensity.is_finite(), "intensity", "must be positive")?;
        ensure(self.epsilon > 0.0 && self.epsilon.is_finite(), "epsilon", "must be positive")
    }

    pub fn h1(&self) -> f64 {
        (3.0 - self.alpha) / 2.0
    }

    /// `C_ν²` with `Var J(x,y) = C_ν² x^{3−α} y`.
    pub fn variance_constant(&self) -> f64 {
        telecom_variance(1.0, self.alpha, self.intensity)
    }

    /// Variance per unit area carried by durations below ε, to leading order.
    pub fn small_jump_rate(&self) -> f64 {
        let a = self.alpha;
        a * self.intensity * self.epsilon.powf(2.0 - a) / (2.0 - a)
    }

    /// Bound on the variance error at unit `y` left after the Gaussian correction.
    pub fn residual_bound(&self) -> f64 {
        let a = self.alpha;
        a * self.intensity * self.epsilon.powf(3.0 - a) / (3.0 * (3.0 - a))
    }

    /// Variance of the omitted part `Var J_{<ε}(x,1)`, exact.
    pub fn small_jump_variance(&self, x: f64) -> f64 {
        let (a, c, e) = (self.alpha, self.intensity, self.epsilon);
        if e <= x {
            a * c * (x * e.powf(2.0 - a) / (2.0 - a) - e.powf(3.0 - a) / (3.0 * (3.0 - a)))
        } else {
            telecom_variance(x, a, c) - large_duration_variance(x, e, a, c)
        }
    }

    /// Same field with all lengths multiplied by `k` (ε scales along).
    pub fn rescaled(&self, k: f64) -> Self {
        TelecomSpec {
            epsilon: self.epsilon * k,
            ..*self
        }
    }
}

/// Variance of the durations `r > e ≥ x` part at `(x, 1)`.
fn large_duration_variance(x: f64, e: f64, a: f64, c: f64) -> f64 {
    // ∫_e^∞ (2x³/3 + (r−x)x²) αc r^{−α−1} dr
    c * (2.0 * x.powi(3) / 3.0 * e.powf(-a) + x * x * (a * e.powf(1.0 - a) / (a - 1.0) - x * e.powf(-a)))
}

/// `Var J(x,1) = C_ν² x^{3−α}`, closed form.
pub fn telecom_variance(x: f64, alpha: f64, c: f64) -> f64 {
    let a = alpha;
    let inner = a * (1.0 / (2.0 - a) - 1.0 / (3.0 * (3.0 - a)));
    let outer = a / (a - 1.0) - 1.0 / 3.0;
    c * (inner + outer) * x.powf(3.0 - a)
}

/// Exact draw of the Telecom RF on `x_grid × y_grid`.
pub fn sample_telecom<R: Rng + ?Sized>(spec: &TelecomSpec, x_grid: &[f64], y_grid: &[f64], rng: &mut R) -> Result<Field> {
    spec.validate()?;
    check_grid(x_grid, "x_grid")?;
    check_grid(y_grid, "y_grid")?;
    let (a, c, e) = (spec.alpha, spec.intensity, spec.epsilon);
    let x_max = *x_grid.last().unwrap();
    let y_max = *y_grid.last().unwrap();
    // points (u, v, r) with r ≥ ε, u ∈ (−r, x_max): mass y·c·(x ε^{−α} + α ε^{1−α}/(α−1))
    let w_short = x_max * e.powf(-a);
    let w_long = a * e.powf(1.0 - a) / (a - 1.0);
    let mean = y_max * c * (w_short + w_long);
    if mean > 5e7 {
        return Err(Error::Capacity(format!(
            "Telecom sampler would need ~{mean:.3e} points; raise epsilon"
        )));
    }
    let n = poisson(rng, mean);
    let p_short = w_short / (w_short + w_long);
    let mut f = Field::zeros(x_grid, y_grid);
    for _ in 0..n {
        let tail = if uniform(rng) < p_short { a } else { a - 1.0 };
        let r = e * uniform_pos(rng).powf(-1.0 / tail);
        let u = -r + uniform(rng) * (x_max + r);
        let v = uniform_pos(rng) * y_max;
        let iy = y_grid.partition_point(|&y| y < v);
        for (ix, &x) in x_grid.iter().enumerate() {
            let ov = (u + r).min(x) - u.max(0.0);
            if ov > 0.0 {
                *f.at(ix, iy) += ov;
            }
        }
    }
    // compensator: E Σ ov = x·y·∫_ε^∞ r ν(dr)
    let comp = a * c * e.powf(1.0 - a) / (a - 1.0);
    let dy = steps(y_grid);
    let dx = steps(x_grid);
    let s = spec.small_jump_rate().sqrt();
    for (iy, &h) in dy.iter().enumerate() {
        let mut bm = 0.0;
        for (ix, &x) in x_grid.iter().enumerate() {
            *f.at(ix, iy) -= comp * x * h;
            if spec.gaussian_correction {
                bm += s * (dx[ix] * h).sqrt() * normal(rng);
                *f.at(ix, iy) += bm;
            }
        }
    }
    f.cumulate_y();
    Ok(f)
}

/// `log E e^{iθ J(x,1)}` for `ν(dr) = α·c·r^{−α−1}dr`.
pub fn telecom_field_logchf(theta: f64, x: f64, alpha: f64, c: f64) -> Result<Complex64> {
    ensure(alpha > 1.0 && alpha < 2.0, "alpha", format!("must lie in (1,2), got {alpha}"))?;
    if theta == 0.0 || x <= 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let a = alpha;
    // durations r ≥ x in closed form
    let tail = psi_integral(theta, x) * (2.0 * c * x.powf(-a)) + psi(theta * x) * (c * x.powf(1.0 - a) / (a - 1.0));
    let head = integrate_complex_raw(
        |r| (psi_integral(theta, r) * 2.0 + psi(theta * r) * (x - r)) * (a * c * r.powf(-a - 1.0)),
        0.0,
        x,
        4,
    );
    check_complex(head)?;
    Ok(head.value + tail)
}

fn check_complex(q: ComplexQuad) -> Result<Complex64> {
    if q.value.re.is_finite() && q.value.im.is_finite() && q.error <= 1e-6 * q.value.norm().max(1.0) {
        Ok(q.value)
    } else {
        Err(Error::Quadrature { bound: q.error })
    }
}

/// `log E e^{−iθμ⁻¹J(x)}` assembled from the past and present subregions, with its error bound.
pub fn telecom_logchf(theta: f64, x: f64, alpha: f64, c: f64, mu: f64) -> Result<ComplexQuad> {
    ensure(alpha > 1.0 && alpha < 2.0, "alpha", format!("must lie in (1,2), got {alpha}"))?;
    ensure(mu > 0.0, "mu", "must be positive")?;
    if theta == 0.0 || x <= 0.0 {
        return Ok(ComplexQuad {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
        });
    }
    let a = alpha;
    let k = -theta / mu;
    let past = integrate_complex_raw(|r| psi(k * r) * r.powf(-a), 0.0, x, 4);
    let present = integrate_complex_raw(
        |r| {
            let z = k * r;
            Complex64::new(z.cos() - 1.0, z.sin()) * ((x - r) * r.powf(-a))
        },
        0.0,
        x,
        4,
    );
    let i = Complex64::i();
    let value = (past.value + psi(k * x) * (x.powf(1.0 - a) / (a - 1.0))) * (c / mu)
        - i * (theta * c / (mu * mu)) * present.value;
    let q = ComplexQuad {
        value,
        error: c / mu * past.error + theta.abs() * c / (mu * mu) * present.error,
    };
    check_complex(q)?;
    Ok(q)
}

/// Constant `c′ = c_ϱϱΓ(2−ϱ)/(ϱ(ϱ−1))` of the large-scale stable limit.
pub fn large_scale_c_prime(rho: f64, c_rho: f64) -> f64 {
    c_rho * rho * gamma(2.0 - rho) / (rho * (rho - 1.0))
}

/// `log` of `exp{c′x|θ|^α(cos(πα/2) − i·sgnθ·sin(πα/2))}`.
pub fn large_scale_logchf(theta: f64, x: f64, alpha: f64, c: f64) -> Complex64 {
    if theta == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let m = large_scale_c_prime(alpha, c) * x * theta.abs().powf(alpha);
    let phase = PI * alpha / 2.0;
    Complex64::new(m * phase.cos(), -theta.signum() * m * phase.sin())
}

// ---------------------------------------------------------------- κ-stable field

/// `c̃_ν = c_νΓ(2−κ)/((κ−1)κ)`.
pub fn kappa_c_tilde(kappa: f64, c_nu: f64) -> f64 {
    c_nu * gamma(2.0 - kappa) / ((kappa - 1.0) * kappa)
}

/// Piecewise-linear `S(u) = Σ θ_j·ov(u, r; x_j)` integrated against `g(s) = |s|^κ e^{∓iπκ/2}`.
fn kappa_inner(r: f64, active: &[(f64, f64)], kappa: f64, x_max: f64) -> Complex64 {
    let s_at = |u: f64| -> f64 {
        active
            .iter()
            .map(|&(th, x)| th * ((u + r).min(x) - u.max(0.0)).max(0.0))
            .sum()
    };
    let mut bp: Vec<f64> = vec![-r, 0.0, x_max];
    for &(_, x) in active {
        bp.push(x);
        bp.push(x - r);
    }
    bp.retain(|&b| b >= -r && b <= x_max);
    bp.sort_by(|p, q| p.partial_cmp(q).unwrap());
    bp.dedup_by(|p, q| (*p - *q).abs() < 1e-15);
    let mut pos = 0.0;
    let mut neg = 0.0;
    let k1 = kappa + 1.0;
    let mut add = |s0: f64, s1: f64, len: f64| {
        // ∫ |s|^κ over a piece where s is linear and of one sign
        let (mid, d) = (0.5 * (s0 + s1).abs(), (s1.abs() - s0.abs()));
        let m = if d.abs() <= 1e-4 * mid {
            // midpoint expansion avoids cancellation on near-flat pieces
            len * mid.powf(kappa) * (1.0 + kappa * (kappa - 1.0) * d * d / (24.0 * mid * mid))
        } else {
            len * (s1.abs().powf(k1) - s0.abs().powf(k1)) / (k1 * (s1.abs() - s0.abs()))
        };
        if s0 + s1 >= 0.0 {
            pos += m;
        } else {
            neg += m;
        }
    };
    for w in bp.windows(2) {
        let (u0, u1) = (w[0], w[1]);
        let (s0, s1) = (s_at(u0), s_at(u1));
        if s0 * s1 < 0.0 {
            let t = s0 / (s0 - s1);
            let um = u0 + t * (u1 - u0);
            add(s0, 0.0, um - u0);
            add(0.0, s1, u1 - um);
        } else {
            add(s0, s1, u1 - u0);
        }
    }
    let ph = PI * kappa / 2.0;
    Complex64::new((pos + neg) * ph.cos(), (neg - pos) * ph.sin())
}

/// Joint log-ch.f. of the κ-stable field at `points` for weights `thetas`.
pub fn intermediate_kappa_field_chf(
    thetas: &[f64],
    points: &[(f64, f64)],
    kappa: f64,
    rho: f64,
    c_nu: f64,
) -> Result<Complex64> {
    ensure(1.0 < rho && rho < kappa && kappa < 2.0, "kappa", format!("need 1 < rho < kappa < 2, got rho={rho}, kappa={kappa}"))?;
    ensure(thetas.len() == points.len(), "thetas", "one weight per point")?;
    ensure(points.iter().all(|&(x, y)| x > 0.0 && y > 0.0), "points", "coordinates must be positive")?;
    if thetas.iter().all(|&t| t == 0.0) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.dedup();
    let mut total = Complex64::new(0.0, 0.0);
    let mut prev = 0.0;
    for &y in &ys {
        let active: Vec<(f64, f64)> = thetas
            .iter()
            .zip(points)
            .filter(|(_, p)| p.1 >= y)
            .map(|(&t, p)| (t, p.0))
            .collect();
        let x_max = active.iter().map(|a| a.1).fold(0.0, f64::max);
        let mut cuts: Vec<f64> = vec![0.0, x_max];
        for &(_, xa) in &active {
            cuts.push(xa);
            for &(_, xb) in &active {
                cuts.push((xa - xb).abs());
            }
        }
        cuts.retain(|&c| (0.0..=x_max).contains(&c));
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let mut part = Complex64::new(0.0, 0.0);
        // r = t^{1/q}, q = κ−ϱ, flattens the r^{κ−1−ϱ} behaviour at the origin
        let q = kappa - rho;
        let integrand = |t: f64| -> Complex64 {
            let r = t.powf(1.0 / q);
            kappa_inner(r, &active, kappa, x_max) * (r.powf(-kappa) / q)
        };
        for w in cuts.windows(2) {
            let (a, b) = (w[0].powf(q), w[1].powf(q));
            let re = integrate(|t| integrand(t).re, a, b)?;
            let im = integrate(|t| integrand(t).im, a, b)?;
            part += Complex64::new(re, im);
        }
        // r ≥ x_max: inner(r) = inner(x_max) + (r − x_max)·g(S_full)
        let at = kappa_inner(x_max, &active, kappa, x_max);
        let s_full: f64 = active.iter().map(|&(t, x)| t * x).sum();
        let ph = PI * kappa / 2.0;
        let g_full = Complex64::new(ph.cos(), -s_full.signum() * ph.sin()) * s_full.abs().powf(kappa);
        part += at * (x_max.powf(-rho) / rho) + g_full * (x_max.powf(1.0 - rho) / (rho * (rho - 1.0)));
        total += part * (y - prev);
        prev = y;
    }
    Ok(total * kappa_c_tilde(kappa, c_nu))
}

/// `(H₁, H₂) = ((1+κ−ϱ)/κ, 1/κ)`.
pub fn kappa_field_exponents(kappa: f64, rho: f64) -> (f64, f64) {
    ((1.0 + kappa - rho) / kappa, 1.0 / kappa)
}

// ---------------------------------------------------------------- asymptotic self-similarity

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Small,
    Large,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SsReport {
    pub direction: Direction,
    pub lambdas: Vec<f64>,
    /// Monte Carlo sup ch.f. distance to the oracle at each λ.
    pub distances: Vec<f64>,
    pub max_se: Vec<f64>,
    /// Exact sup distance between the normalized law and the oracle.
    pub exact_distances: Vec<f64>,
    /// Empirical variance of the normalized draws (meaningful for the small-scale case).
    pub variances: Vec<f64>,
    pub oracle_variance: Option<f64>,
    pub monotone: bool,
}

/// Compares `λ^{−H₁}J(λ)` (small) or `λ^{−1/α}J(λ)` (large) with the FBM or stable oracle.
pub fn asymptotic_ss_check(
    spec: &TelecomSpec,
    direction: Direction,
    lambdas: &[f64],
    n_rep: usize,
    seed: u64,
) -> Result<SsReport> {
    spec.validate()?;
    ensure(!lambdas.is_empty(), "lambdas", "need at least one λ")?;
    ensure(n_rep >= 2, "n_rep", "need at least two replicates")?;
    let (a, c) = (spec.alpha, spec.intensity);
    let h = match direction {
        Direction::Small => spec.h1(),
        Direction::Large => 1.0 / a,
    };
    let c2 = spec.variance_constant();
    let oracle = |t: f64| -> Complex64 {
        match direction {
            Direction::Small => Complex64::new(-0.5 * c2 * t * t, 0.0),
            Direction::Large => large_scale_logchf(t, 1.0, a, c),
        }
    };
    let mut rep = SsReport {
        direction,
        lambdas: lambdas.to_vec(),
        distances: vec![],
        max_se: vec![],
        exact_distances: vec![],
        variances: vec![],
        oracle_variance: (direction == Direction::Small).then_some(c2),
        monotone: true,
    };
    for (k, &lam) in lambdas.iter().enumerate() {
        ensure(lam > 0.0, "lambdas", "must be positive")?;
        let s = spec.rescaled(lam);
        let norm = lam.powf(h);
        let key = derive_seed(seed, &[0x55, k as u64]);
        let draws: Vec<f64> = (0..n_rep)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(key, i as u64);
                sample_telecom(&s, &[lam], &[1.0], &mut rng).map(|f| f.values[0] / norm)
            })
            .collect::<Result<_>>()?;
        let d: ChfDistance = chf_distance(&draws, |t| Ok(oracle(t)), &THETA_GRID)?;
        let mut exact: f64 = 0.0;
        for &t in THETA_GRID.iter() {
            let l = telecom_field_logchf(t / norm, lam, a, c)?;
            exact = exact.max((l.exp() - oracle(t).exp()).norm());
        }
        let m = draws.iter().sum::<f64>() / n_rep as f64;
        let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n_rep - 1) as f64;
        rep.distances.push(d.distance);
        rep.max_se.push(d.max_se);
        rep.exact_distances.push(exact);
        rep.variances.push(v);
    }
    rep.monotone = rep.distances.windows(2).all(|w| w[1] <= w[0]);
    Ok(rep)
}

/// Draws of `J(x, y)` at a single point.
pub fn telecom_point_draws(spec: &TelecomSpec, x: f64, y: f64, n_rep: usize, seed: u64) -> Result<Vec<f64>> {
    if x <= 0.0 || y <= 0.0 {
        return Err(invalid("point", "coordinates must be positive"));
    }
    (0..n_rep)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            sample_telecom(spec, &[x], &[y], &mut rng).map(|f| f.values[0])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heavy_tail::stable_params_from_tails;

    #[test]
    fn telecom_variance_ex3() {
        assert!((telecom_variance(1.0, 1.5, 1.0) - 16.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn field_logchf_second_order_matches_variance() {
        let t = 1e-3;
        let l = telecom_field_logchf(t, 2.0, 1.5, 1.0).unwrap();
        let v = -2.0 * l.re / (t * t);
        assert!((v / telecom_variance(2.0, 1.5, 1.0) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn session_form_agrees_with_field_form() {
        for &(th, x, mu) in &[(0.7, 1.0, 1.0), (-1.3, 2.0, 4.0), (2.5, 0.5, 3.0)] {
            let p = telecom_logchf(th, x, 1.5, 1.0, mu).unwrap().value;
            let f = telecom_field_logchf(-th / mu, x, 1.5, 1.0 / mu).unwrap();
            assert!((p - f).norm() < 1e-8, "{p} vs {f}");
        }
    }

    #[test]
    fn telecom_logchf_conjugate() {
        let a = telecom_logchf(1.1, 1.0, 1.4, 0.8, 2.0).unwrap().value;
        let b = telecom_logchf(-1.1, 1.0, 1.4, 0.8, 2.0).unwrap().value;
        assert!((a - b.conj()).norm() < 1e-12);
        assert_eq!(telecom_logchf(0.0, 1.0, 1.4, 0.8, 2.0).unwrap().value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn c_prime_matches_stable_map() {
        let cp = large_scale_c_prime(1.5, 1.0);
        let sp = stable_params_from_tails(1.5, 1.0, 0.0).unwrap();
        for &t in &[-2.0, 0.5, 1.0] {
            let a = large_scale_logchf(t, 1.0, 1.5, 1.0);
            assert!((a - sp.log_chf(t)).norm() < 1e-10);
        }
        assert!((cp - 1.0 * gamma(0.5) / 0.5).abs() < 1e-12);
    }

    #[test]
    fn fbs_h_half_is_brownian_sheet() {
        let spec = FbsSpec { h1: 0.5, scale: 1.0 };
        assert!((spec.covariance(1.0, 1.0, 2.0, 1.0) - 1.0).abs() < 1e-15);
        let s = FbsSampler::new(spec, &[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(s.jitter, 0.0);
    }

    #[test]
    fn stable_sheet_unit_cell_is_stable_draw() {
        let p = StableParams::new(1.5, 1.0, 0.3).unwrap();
        let mut r1 = stream(3, 0);
        let mut r2 = stream(3, 0);
        let f = sample_stable_sheet(&p, &[1.0], &[1.0], &mut r1).unwrap();
        assert_eq!(f.values[0], sample_stable(&p, &mut r2));
    }

    #[test]
    fn stable_sheet_additive_in_x() {
        let p = StableParams::new(1.5, 1.0, 0.0).unwrap();
        let mut r = stream(5, 1);
        let f = sample_stable_sheet(&p, &[1.0, 2.0], &[1.0, 3.0], &mut r).unwrap();
        assert!(f.get(1, 1).is_finite() && f.get(0, 0).is_finite());
    }

    #[test]
    fn telecom_mean_zero_and_variance() {
        let spec = TelecomSpec::new(1.5, 1.0, 0.01).unwrap();
        let d = telecom_point_draws(&spec, 1.0, 1.0, 20_000, 11).unwrap();
        let n = d.len() as f64;
        let m = d.iter().sum::<f64>() / n;
        let v = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        let v_se = (d.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n - v * v).sqrt() / n.sqrt();
        assert!(m.abs() < 4.0 * (v / n).sqrt(), "mean {m}");
        assert!((v - 16.0 / 3.0).abs() < 4.0 * v_se + spec.residual_bound(), "var {v} ± {v_se}");
    }

    #[test]
    fn kappa_field_stability_and_scaling() {
        let (k, r, c) = (1.6, 1.3, 1.0);
        let base = intermediate_kappa_field_chf(&[1.0], &[(1.0, 1.0)], k, r, c).unwrap();
        let dbl = intermediate_kappa_field_chf(&[2.0], &[(1.0, 1.0)], k, r, c).unwrap();
        assert!((dbl - base * 2f64.powf(k)).norm() < 1e-9 * base.norm());
        let (h1, h2) = kappa_field_exponents(k, r);
        let (l1, l2) = (2.0, 3.0);
        let pts = [(1.0, 1.0), (0.5, 2.0)];
        let th = [0.7, -0.4];
        let lhs = intermediate_kappa_field_chf(&th, &[(l1 * pts[0].0, l2 * pts[0].1), (l1 * pts[1].0, l2 * pts[1].1)], k, r, c).unwrap();
        let s = l1.powf(h1) * l2.powf(h2);
        let rhs = intermediate_kappa_field_chf(&[th[0] * s, th[1] * s], &pts, k, r, c).unwrap();
        assert!((lhs - rhs).norm() < 2e-5 * lhs.norm(), "{lhs} vs {rhs}");
        assert!(base.re < 0.0);
    }
}
