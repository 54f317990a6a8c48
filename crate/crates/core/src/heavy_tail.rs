//! Regularly varying and stable laws: samplers, closed-form moments, Hill.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Result};
use crate::numeric::{bisect, gamma};
use crate::rng::{exp1, uniform, uniform_pos};

/// One Pareto piece `shift + P`, `P(P > x) = (scale/x)^alpha` for `x ≥ scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoComponent {
    pub weight: f64,
    pub alpha: f64,
    pub scale: f64,
    #[serde(default)]
    pub shift: f64,
}

impl ParetoComponent {
    fn lower(&self) -> f64 {
        self.shift + self.scale
    }

    fn survival(&self, x: f64) -> f64 {
        let w = x - self.shift;
        if w <= self.scale {
            1.0
        } else {
            (self.scale / w).powf(self.alpha)
        }
    }

    fn quantile_survival(&self, p: f64) -> f64 {
        self.shift + self.scale * p.powf(-1.0 / self.alpha)
    }

    fn mean(&self) -> f64 {
        if self.alpha <= 1.0 {
            f64::INFINITY
        } else {
            self.shift + self.alpha * self.scale / (self.alpha - 1.0)
        }
    }

    /// E[P^j; a < P ≤ b] for the unshifted Pareto.
    fn raw_partial(&self, j: u32, a: f64, b: f64) -> f64 {
        let (al, m) = (self.alpha, self.scale);
        let lo = a.max(m);
        if b <= lo {
            return 0.0;
        }
        let e = j as f64 - al;
        let coef = al * m.powf(al);
        if b.is_infinite() {
            if e >= 0.0 {
                return f64::INFINITY;
            }
            return -coef * lo.powf(e) / e;
        }
        if e.abs() < 1e-14 {
            coef * (b / lo).ln()
        } else {
            coef * (b.powf(e) - lo.powf(e)) / e
        }
    }

    fn partial_moment(&self, k: u32, lo: f64, hi: f64) -> f64 {
        let s = self.shift;
        let mut acc = 0.0;
        for j in 0..=k {
            let binom = binomial(k, j);
            let sp = if k == j { 1.0 } else { s.powi((k - j) as i32) };
            if sp == 0.0 {
                continue;
            }
            acc += binom * sp * self.raw_partial(j, lo - s, hi - s);
        }
        acc
    }

    fn integrated_survival(&self, t: f64) -> f64 {
        let (al, m) = (self.alpha, self.scale);
        let w = t - self.shift;
        if w >= m {
            m.powf(al) * w.powf(1.0 - al) / (al - 1.0)
        } else {
            (m - w) + m / (al - 1.0)
        }
    }

    fn integrated_survival2(&self, t: f64) -> f64 {
        let (al, m) = (self.alpha, self.scale);
        let w = t - self.shift;
        if w >= m {
            m.powf(al) * w.powf(2.0 - al) / ((al - 1.0) * (al - 2.0))
        } else {
            (m - w).powi(2) / 2.0 + m * m / (al - 2.0) - w * m / (al - 1.0)
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile_survival(uniform_pos(rng))
    }

    /// Draw from the density ∝ z·f(z).
    fn sample_length_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let lb = ParetoComponent {
            weight: 1.0,
            alpha: self.alpha - 1.0,
            scale: self.scale,
            shift: 0.0,
        };
        let s = self.shift;
        if s >= 0.0 {
            let pm = self.alpha * self.scale / (self.alpha - 1.0);
            let p = if uniform(rng) * (s + pm) < s {
                self.sample(rng) - s
            } else {
                lb.sample(rng)
            };
            s + p
        } else {
            loop {
                let p = lb.sample(rng);
                if uniform(rng) * p <= s + p {
                    return s + p;
                }
            }
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Positive law with exact power tail beyond a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegVaryingDist {
    /// `P(Z > x) = (x_min/x)^alpha`, `x ≥ x_min`.
    ParetoExact { alpha: f64, x_min: f64 },
    /// `Z = x_min − 1 + P`, `P` standard Pareto; tail `~ x^{−alpha}` only asymptotically.
    ParetoShifted { alpha: f64, x_min: f64 },
    /// Finite mixture of shifted Pareto pieces.
    UserMixture { components: Vec<ParetoComponent> },
}

/// (age, residual, total) of the cycle covering a fixed time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthBiased {
    pub age: f64,
    pub residual: f64,
    pub total: f64,
}

impl RegVaryingDist {
    pub fn pareto(alpha: f64, x_min: f64) -> Result<Self> {
        let d = RegVaryingDist::ParetoExact { alpha, x_min };
        d.validate()?;
        Ok(d)
    }

    pub fn shifted(alpha: f64, x_min: f64) -> Result<Self> {
        let d = RegVaryingDist::ParetoShifted { alpha, x_min };
        d.validate()?;
        Ok(d)
    }

    pub fn mixture(components: Vec<ParetoComponent>) -> Result<Self> {
        let d = RegVaryingDist::UserMixture { components };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RegVaryingDist::ParetoExact { alpha, x_min } | RegVaryingDist::ParetoShifted { alpha, x_min } => {
                ensure(alpha.is_finite() && *alpha > 0.0, "alpha", format!("must be > 0, got {alpha}"))?;
                ensure(x_min.is_finite() && *x_min > 0.0, "x_min", format!("must be > 0, got {x_min}"))
            }
            RegVaryingDist::UserMixture { components } => {
                ensure(!components.is_empty(), "components", "mixture needs at least one component")?;
                let total: f64 = components.iter().map(|c| c.weight).sum();
                ensure((total - 1.0).abs() < 1e-9, "components", format!("weights sum to {total}, not 1"))?;
                for c in components {
                    ensure(c.weight > 0.0, "components.weight", "must be > 0")?;
                    ensure(c.alpha > 0.0 && c.scale > 0.0, "components", "alpha and scale must be > 0")?;
                    ensure(c.shift + c.scale > 0.0, "components.shift", "support must be positive")?;
                }
                Ok(())
            }
        }
    }

    fn components(&self) -> Vec<ParetoComponent> {
        match *self {
            RegVaryingDist::ParetoExact { alpha, x_min } => vec![ParetoComponent {
                weight: 1.0,
                alpha,
                scale: x_min,
                shift: 0.0,
            }],
            RegVaryingDist::ParetoShifted { alpha, x_min } => vec![ParetoComponent {
                weight: 1.0,
                alpha,
                scale: 1.0,
                shift: x_min - 1.0,
            }],
            RegVaryingDist::UserMixture { ref components } => components.clone(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            RegVaryingDist::ParetoExact { .. } => "pareto-exact",
            RegVaryingDist::ParetoShifted { .. } => "pareto-shifted",
            RegVaryingDist::UserMixture { .. } => "user-mixture",
        }
    }

    /// Tail exponent (smallest component exponent for mixtures).
    pub fn alpha(&self) -> f64 {
        self.components().iter().map(|c| c.alpha).fold(f64::INFINITY, f64::min)
    }

    /// Lower end of the support.
    pub fn x_min(&self) -> f64 {
        match *self {
            RegVaryingDist::ParetoExact { x_min, .. } | RegVaryingDist::ParetoShifted { x_min, .. } => x_min,
            RegVaryingDist::UserMixture { ref components } => {
                components.iter().map(|c| c.lower()).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// `c` in `P(Z > x) ~ c·x^{−α}`.
    pub fn tail_constant(&self) -> f64 {
        let a = self.alpha();
        self.components()
            .iter()
            .filter(|c| (c.alpha - a).abs() < 1e-12)
            .map(|c| c.weight * c.scale.powf(c.alpha))
            .sum()
    }

    pub fn survival(&self, x: f64) -> f64 {
        self.components().iter().map(|c| c.weight * c.survival(x)).sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }

    /// Density, zero below the support.
    pub fn density(&self, x: f64) -> f64 {
        self.components()
            .iter()
            .map(|c| {
                let w = x - c.shift;
                if w < c.scale {
                    0.0
                } else {
                    c.weight * c.alpha * c.scale.powf(c.alpha) * w.powf(-c.alpha - 1.0)
                }
            })
            .sum()
    }

    /// Smallest `x` with `P(Z > x) ≤ p`, for `p ∈ (0, 1]`.
    pub fn quantile_survival(&self, p: f64) -> f64 {
        let comps = self.components();
        if comps.len() == 1 {
            return comps[0].quantile_survival(p);
        }
        let lo = self.x_min();
        let mut hi = lo * 2.0 + 1.0;
        while self.survival(hi) > p {
            hi *= 2.0;
        }
        bisect(|x| self.survival(x) - p, lo, hi, 1e-15)
    }

    /// E Z (infinite when α ≤ 1).
    pub fn mean(&self) -> f64 {
        self.components().iter().map(|c| c.weight * c.mean()).sum()
    }

    /// E[Z^k; lo < Z ≤ hi].
    pub fn partial_moment(&self, k: u32, lo: f64, hi: f64) -> f64 {
        self.components()
            .iter()
            .map(|c| c.weight * c.partial_moment(k, lo, hi))
            .sum()
    }

    /// E Z² (infinite when α ≤ 2).
    pub fn second_moment(&self) -> f64 {
        self.partial_moment(2, 0.0, f64::INFINITY)
    }

    /// ∫_t^∞ P(Z > s) ds.
    pub fn integrated_survival(&self, t: f64) -> f64 {
        self.components()
            .iter()
            .map(|c| c.weight * c.integrated_survival(t))
            .sum()
    }

    /// ∫_t^∞ (s − t) P(Z > s) ds; finite only when α > 2.
    pub fn integrated_survival2(&self, t: f64) -> f64 {
        if self.alpha() <= 2.0 {
            return f64::INFINITY;
        }
        self.components()
            .iter()
            .map(|c| c.weight * c.integrated_survival2(t))
            .sum()
    }

    fn pick<R: Rng + ?Sized>(comps: &[ParetoComponent], weights: &[f64], rng: &mut R) -> usize {
        if comps.len() == 1 {
            return 0;
        }
        let total: f64 = weights.iter().sum();
        let mut u = uniform(rng) * total;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        comps.len() - 1
    }

    /// Exact draw; inverse survival for single-piece laws, composition for mixtures.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let comps = self.components();
        let w: Vec<f64> = comps.iter().map(|c| c.weight).collect();
        let i = Self::pick(&comps, &w, rng);
        comps[i].sample(rng)
    }

    /// Draw of `Z` conditioned on `Z > s`.
    pub fn sample_exceeding<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> f64 {
        let comps = self.components();
        let w: Vec<f64> = comps.iter().map(|c| c.weight * c.survival(s)).collect();
        let c = comps[Self::pick(&comps, &w, rng)];
        let p = c.survival(s) * uniform_pos(rng);
        c.quantile_survival(p).max(s)
    }

    /// Draw of `Z` conditioned on `Z ≤ s` (requires `P(Z ≤ s) > 0`).
    pub fn sample_below<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> f64 {
        let comps = self.components();
        let w: Vec<f64> = comps.iter().map(|c| c.weight * (1.0 - c.survival(s))).collect();
        let c = comps[Self::pick(&comps, &w, rng)];
        let lo = c.survival(s);
        c.quantile_survival(lo + (1.0 - lo) * uniform_pos(rng)).min(s)
    }

    /// Draw from the length-biased law z·f(z)/μ.
    pub fn sample_length_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        ensure(self.alpha() > 1.0, "alpha", "length-biased sampling needs a finite mean (alpha > 1)")?;
        let comps = self.components();
        let w: Vec<f64> = comps.iter().map(|c| c.weight * c.mean()).collect();
        let c = comps[Self::pick(&comps, &w, rng)];
        Ok(c.sample_length_biased(rng))
    }

    /// Stationary initial cycle: length-biased total and uniform age.
    pub fn sample_length_biased_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LengthBiased> {
        let total = self.sample_length_biased(rng)?;
        let age = uniform(rng) * total;
        Ok(LengthBiased {
            age,
            residual: total - age,
            total,
        })
    }

    /// Survival of the stationary residual T₀: μ⁻¹∫_t^∞ P(Z > s) ds.
    pub fn residual_survival(&self, t: f64) -> f64 {
        self.integrated_survival(t) / self.mean()
    }
}

/// Positive random variable used for amplitudes, idle periods and rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum PositiveLaw {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
    /// `A = U^{1/κ}` on (0,1], so `P(A ≤ a) = a^κ` exactly.
    PowerUnit { kappa: f64 },
    RegVarying { dist: RegVaryingDist },
}

impl PositiveLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            PositiveLaw::Constant { value } => ensure(*value >= 0.0 && value.is_finite(), "value", "must be finite and >= 0"),
            PositiveLaw::Uniform { lo, hi } => ensure(*lo >= 0.0 && hi > lo, "uniform", "need 0 <= lo < hi"),
            PositiveLaw::Exponential { rate } => ensure(*rate > 0.0, "rate", "must be > 0"),
            PositiveLaw::PowerUnit { kappa } => ensure(*kappa > 0.0, "kappa", "must be > 0"),
            PositiveLaw::RegVarying { dist } => dist.validate(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PositiveLaw::Constant { value } => value,
            PositiveLaw::Uniform { lo, hi } => lo + (hi - lo) * uniform(rng),
            PositiveLaw::Exponential { rate } => exp1(rng) / rate,
            PositiveLaw::PowerUnit { kappa } => uniform_pos(rng).powf(1.0 / kappa),
            PositiveLaw::RegVarying { ref dist } => dist.sample(rng),
        }
    }

    /// E A^s for real s ≥ 0 (infinite when it diverges).
    pub fn moment(&self, s: f64) -> f64 {
        match *self {
            PositiveLaw::Constant { value } => value.powf(s),
            PositiveLaw::Uniform { lo, hi } => (hi.powf(s + 1.0) - lo.powf(s + 1.0)) / ((s + 1.0) * (hi - lo)),
            PositiveLaw::Exponential { rate } => gamma(s + 1.0) / rate.powf(s),
            PositiveLaw::PowerUnit { kappa } => kappa / (kappa + s),
            PositiveLaw::RegVarying { ref dist } => {
                if s >= dist.alpha() {
                    f64::INFINITY
                } else if (s - s.round()).abs() < 1e-12 {
                    dist.partial_moment(s.round() as u32, 0.0, f64::INFINITY)
                } else {
                    crate::numeric::integrate_to_inf(|x| s * x.powf(s - 1.0) * dist.survival(x), 0.0)
                        .unwrap_or(f64::NAN)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1.0)
    }

    /// P(A > x).
    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            PositiveLaw::Constant { value } => f64::from(u8::from(x < value)),
            PositiveLaw::Uniform { lo, hi } => ((hi - x) / (hi - lo)).clamp(0.0, 1.0),
            PositiveLaw::Exponential { rate } => (-rate * x.max(0.0)).exp(),
            PositiveLaw::PowerUnit { kappa } => 1.0 - x.clamp(0.0, 1.0).powf(kappa),
            PositiveLaw::RegVarying { ref dist } => dist.survival(x),
        }
    }

    /// E[f(A); A ≤ upper] by quadrature, for `f` smooth on the support below `upper`.
    pub fn expect_below(&self, upper: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
        use crate::numeric::integrate;
        match *self {
            PositiveLaw::Constant { value } => Ok(if value <= upper { f(value) } else { 0.0 }),
            PositiveLaw::Uniform { lo, hi } => Ok(integrate(&f, lo, hi.min(upper).max(lo))? / (hi - lo)),
            PositiveLaw::Exponential { rate } => integrate(|x| f(x) * rate * (-rate * x).exp(), 0.0, upper.max(0.0)),
            PositiveLaw::PowerUnit { kappa } => integrate(|v: f64| f(v.powf(1.0 / kappa)), 0.0, upper.clamp(0.0, 1.0).powf(kappa)),
            PositiveLaw::RegVarying { ref dist } => {
                let lo = dist.x_min();
                if upper <= lo {
                    return Ok(0.0);
                }
                integrate(|x| f(x) * dist.density(x), lo, upper)
            }
        }
    }

    /// E e^{−tA}, t ≥ 0.
    pub fn laplace(&self, t: f64) -> f64 {
        match *self {
            PositiveLaw::Constant { value } => (-t * value).exp(),
            PositiveLaw::Uniform { lo, hi } => {
                if t * (hi - lo) < 1e-8 {
                    (-t * 0.5 * (lo + hi)).exp()
                } else {
                    ((-t * lo).exp() - (-t * hi).exp()) / (t * (hi - lo))
                }
            }
            PositiveLaw::Exponential { rate } => rate / (rate + t),
            PositiveLaw::PowerUnit { kappa } => {
                if t < 1e-12 {
                    1.0
                } else if !t.is_finite() {
                    0.0
                } else {
                    // P(κ, t) = 1 to machine precision well before t = κ + 200
                    let p = if t > kappa + 200.0 { 1.0 } else { statrs::function::gamma::gamma_lr(kappa, t) };
                    kappa * t.powf(-kappa) * gamma(kappa) * p
                }
            }
            PositiveLaw::RegVarying { ref dist } => {
                crate::numeric::integrate_split(|x| (-t * x).exp() * dist.density(x), &[dist.x_min()])
                    .unwrap_or(f64::NAN)
            }
        }
    }

    /// Draw from the size-biased law a·P(da)/E A.
    pub fn sample_length_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(match *self {
            PositiveLaw::Constant { value } => value,
            PositiveLaw::Uniform { lo, hi } => (lo * lo + uniform(rng) * (hi * hi - lo * lo)).sqrt(),
            PositiveLaw::Exponential { rate } => (exp1(rng) + exp1(rng)) / rate,
            PositiveLaw::PowerUnit { kappa } => uniform_pos(rng).powf(1.0 / (kappa + 1.0)),
            PositiveLaw::RegVarying { ref dist } => dist.sample_length_biased(rng)?,
        })
    }

    /// Density on the support (None for the point mass).
    pub fn density(&self, x: f64) -> Option<f64> {
        match *self {
            PositiveLaw::Constant { .. } => None,
            PositiveLaw::Uniform { lo, hi } => Some(if x >= lo && x <= hi { 1.0 / (hi - lo) } else { 0.0 }),
            PositiveLaw::Exponential { rate } => Some(if x >= 0.0 { rate * (-rate * x).exp() } else { 0.0 }),
            PositiveLaw::PowerUnit { kappa } => Some(if x > 0.0 && x <= 1.0 { kappa * x.powf(kappa - 1.0) } else { 0.0 }),
            PositiveLaw::RegVarying { ref dist } => Some(dist.density(x)),
        }
    }

    /// E f(A) by quadrature against the density.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        use crate::numeric::{integrate, integrate_split};
        match *self {
            PositiveLaw::Constant { value } => Ok(f(value)),
            PositiveLaw::Uniform { lo, hi } => Ok(integrate(&f, lo, hi)? / (hi - lo)),
            PositiveLaw::Exponential { rate } => integrate_split(|x| f(x) * rate * (-rate * x).exp(), &[0.0]),
            PositiveLaw::PowerUnit { kappa } => {
                // a = v^{1/κ} removes the density singularity at 0
                integrate(|v: f64| f(v.powf(1.0 / kappa)), 0.0, 1.0)
            }
            PositiveLaw::RegVarying { ref dist } => integrate_split(|x| f(x) * dist.density(x), &[dist.x_min()]),
        }
    }

    /// `(κ, c_κ)` with `P(A ≤ a) ~ c_κ a^κ` as `a → 0`, where known.
    pub fn small_ball(&self) -> Option<(f64, f64)> {
        match *self {
            PositiveLaw::PowerUnit { kappa } => Some((kappa, 1.0)),
            PositiveLaw::Uniform { lo, hi } if lo == 0.0 => Some((1.0, 1.0 / hi)),
            PositiveLaw::Exponential { rate } => Some((1.0, rate)),
            _ => None,
        }
    }

    /// Essential supremum (infinite if unbounded).
    pub fn sup(&self) -> f64 {
        match *self {
            PositiveLaw::Constant { value } => value,
            PositiveLaw::Uniform { hi, .. } => hi,
            PositiveLaw::PowerUnit { .. } => 1.0,
            _ => f64::INFINITY,
        }
    }
}

/// α-stable law with log-ch.f. −σ^α|θ|^α(1 − iβ sgn θ tan(πα/2)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub sigma: f64,
    pub beta: f64,
}

impl StableParams {
    pub fn new(alpha: f64, sigma: f64, beta: f64) -> Result<Self> {
        ensure(alpha > 1.0 && alpha < 2.0, "alpha", format!("must lie in (1,2), got {alpha}"))?;
        ensure(sigma >= 0.0 && sigma.is_finite(), "sigma", "must be finite and >= 0")?;
        ensure((-1.0..=1.0).contains(&beta), "beta", "must lie in [-1,1]")?;
        Ok(StableParams { alpha, sigma, beta })
    }

    pub fn log_chf(&self, theta: f64) -> Complex64 {
        if theta == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let a = self.alpha;
        let m = self.sigma.powf(a) * theta.abs().powf(a);
        let t = (PI * a / 2.0).tan();
        Complex64::new(-m, m * self.beta * theta.signum() * t)
    }

    pub fn chf(&self, theta: f64) -> Complex64 {
        self.log_chf(theta).exp()
    }

    /// Same law with scale multiplied by `factor^{1/α}` (a cell of area `factor`).
    pub fn scaled_area(&self, factor: f64) -> StableParams {
        StableParams {
            sigma: self.sigma * factor.powf(1.0 / self.alpha),
            ..*self
        }
    }
}

/// Chambers–Mallows–Stuck draw for α ≠ 1.
pub fn sample_stable<R: Rng + ?Sized>(p: &StableParams, rng: &mut R) -> f64 {
    if p.sigma == 0.0 {
        return 0.0;
    }
    let a = p.alpha;
    let t = p.beta * (PI * a / 2.0).tan();
    let b = t.atan() / a;
    let s = (1.0 + t * t).powf(1.0 / (2.0 * a));
    let v = PI * (uniform(rng) - 0.5);
    let w = exp1(rng);
    let x = s * (a * (v + b)).sin() / v.cos().powf(1.0 / a) * ((v - a * (v + b)).cos() / w).powf((1.0 - a) / a);
    p.sigma * x
}

/// Stable parameters from tail constants `c_±` of the Lévy measure `α c_± x^{−α−1}`.
pub fn stable_params_from_tails(alpha: f64, c_plus: f64, c_minus: f64) -> Result<StableParams> {
    ensure(alpha > 1.0 && alpha < 2.0, "alpha", format!("must lie in (1,2), got {alpha}"))?;
    ensure(c_plus >= 0.0 && c_minus >= 0.0, "c_pm", "tail constants must be >= 0")?;
    if c_plus + c_minus <= 0.0 {
        return Err(invalid("c_pm", "c_plus = c_minus = 0 gives no stable law"));
    }
    let s_alpha = gamma(2.0 - alpha) / (1.0 - alpha) * (PI * alpha / 2.0).cos() * (c_plus + c_minus);
    StableParams::new(alpha, s_alpha.powf(1.0 / alpha), (c_plus - c_minus) / (c_plus + c_minus))
}

/// Hill estimator from the `k` largest of `samples`.
pub fn hill_estimate(samples: &[f64], k: usize) -> Result<f64> {
    ensure(k >= 1 && k < samples.len(), "k", format!("need 1 <= k < n, got k={k}, n={}", samples.len()))?;
    ensure(samples.iter().all(|&x| x > 0.0), "samples", "Hill estimator needs positive samples")?;
    let mut v = samples.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).expect("no NaN"));
    let thr = v[k].ln();
    let s: f64 = v[..k].iter().map(|x| x.ln() - thr).sum();
    Ok(k as f64 / s)
}

/// Default Hill order statistic count ⌈n^0.6⌉.
pub fn hill_default_k(n: usize) -> usize {
    ((n as f64).powf(0.6).ceil() as usize).clamp(1, n.saturating_sub(1).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    #[test]
    fn pareto_inverse_cdf_points() {
        let d = RegVaryingDist::pareto(1.5, 1.0).unwrap();
        assert_eq!(d.quantile_survival(1.0), 1.0);
        let d2 = RegVaryingDist::pareto(2.0, 1.0).unwrap();
        assert_relative_eq!(d2.quantile_survival(0.25), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_accessors() {
        let d = RegVaryingDist::pareto(1.5, 2.0).unwrap();
        assert_relative_eq!(d.mean(), 1.5 * 2.0 / 0.5, max_relative = 1e-12);
        assert_relative_eq!(d.tail_constant(), 2f64.powf(1.5), max_relative = 1e-12);
        let s = RegVaryingDist::shifted(1.5, 0.5).unwrap();
        assert_relative_eq!(s.mean(), 0.5 - 1.0 + 3.0, max_relative = 1e-12);
        assert_relative_eq!(s.tail_constant(), 1.0);
        assert_eq!(s.survival(0.5), 1.0);
    }

    #[test]
    fn partial_moments_match_quadrature() {
        let d = RegVaryingDist::shifted(2.5, 0.7).unwrap();
        for k in 0..=2u32 {
            let q = crate::numeric::integrate(|x| x.powi(k as i32) * d.density(x), 0.7, 5.0).unwrap();
            assert_relative_eq!(d.partial_moment(k, 0.0, 5.0), q, max_relative = 1e-9);
        }
        let p = RegVaryingDist::pareto(1.5, 1.0).unwrap();
        assert_relative_eq!(p.partial_moment(1, 0.0, f64::INFINITY), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn integrated_survivals_match_quadrature() {
        let d = RegVaryingDist::shifted(2.5, 1.3).unwrap();
        for &t in &[0.0, 0.9, 1.3, 4.0] {
            let q1 = crate::numeric::integrate_split(|s| d.survival(s), &[t, t.max(1.3)]).unwrap();
            assert_relative_eq!(d.integrated_survival(t), q1, max_relative = 1e-8);
            let q2 = crate::numeric::integrate_split(|s| (s - t) * d.survival(s), &[t, t.max(1.3)]).unwrap();
            assert_relative_eq!(d.integrated_survival2(t), q2, max_relative = 1e-8);
        }
    }

    #[test]
    fn residual_survival_at_one_is_two_thirds() {
        // (1/3)∫₁^∞ s^{-1.5} ds
        let d = RegVaryingDist::pareto(1.5, 1.0).unwrap();
        assert_relative_eq!(d.residual_survival(1.0), 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(d.residual_survival(0.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn stable_from_tails_values() {
        let p = stable_params_from_tails(1.5, 1.0, 0.0).unwrap();
        assert_eq!(p.beta, 1.0);
        let expected = gamma(0.5) * (-2.0) * (3.0 * PI / 4.0).cos();
        assert_relative_eq!(p.sigma.powf(1.5), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 2.5066282746310002, max_relative = 1e-12);
        let q = stable_params_from_tails(1.5, 1.0, 1.0).unwrap();
        assert_eq!(q.beta, 0.0);
        assert_relative_eq!(q.sigma.powf(1.5), 2.0 * expected, max_relative = 1e-12);
        assert!(stable_params_from_tails(1.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn hill_hand_value_and_invariances() {
        let h = hill_estimate(&[1.0, 2.0, 4.0, 8.0], 3).unwrap();
        assert_relative_eq!(h, 1.0 / (2.0 * 2f64.ln()), epsilon = 1e-12);
        let scaled: Vec<f64> = [1.0, 2.0, 4.0, 8.0].iter().map(|x| 7.0 * x).collect();
        assert_relative_eq!(hill_estimate(&scaled, 3).unwrap(), h, epsilon = 1e-12);
        assert!(hill_estimate(&[1.0, -2.0, 3.0], 1).is_err());
        assert!(hill_estimate(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn stable_zero_scale_is_zero() {
        let p = StableParams::new(1.5, 0.0, 0.0).unwrap();
        assert_eq!(sample_stable(&p, &mut stream(1, 0)), 0.0);
    }

    #[test]
    fn empirical_survival_at_four() {
        let d = RegVaryingDist::pareto(1.5, 1.0).unwrap();
        let mut r = stream(11, 0);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| d.sample(&mut r) > 4.0).count() as f64 / n as f64;
        let se = (0.125 * 0.875 / n as f64).sqrt();
        assert!((hits - 0.125).abs() < 3.0 * se, "{hits}");
    }

    #[test]
    fn power_unit_laplace_matches_quadrature() {
        let a = PositiveLaw::PowerUnit { kappa: 0.3 };
        for &t in &[0.1, 1.0, 7.0] {
            let q = crate::numeric::integrate(|x| 0.3 * x.powf(-0.7) * (-t * x).exp(), 0.0, 1.0).unwrap();
            assert_relative_eq!(a.laplace(t), q, max_relative = 1e-8);
        }
        assert_relative_eq!(a.moment(1.5), 0.3 / 1.8, max_relative = 1e-14);
    }
}
