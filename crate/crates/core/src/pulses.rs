//! Pulse families `W(t)` with exact window integrals and total masses.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Result};
use crate::heavy_tail::{PositiveLaw, RegVaryingDist};
use crate::numeric::{integrate, integrate_split};
use crate::rng::{normal, uniform, RngStream};

/// Bounded reward law for renewal-reward cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum BoundedLaw {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    TwoPoint { low: f64, high: f64, p_high: f64 },
}

impl BoundedLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            BoundedLaw::Constant { value } => value,
            BoundedLaw::Uniform { lo, hi } => lo + (hi - lo) * uniform(rng),
            BoundedLaw::TwoPoint { low, high, p_high } => {
                if uniform(rng) < p_high {
                    high
                } else {
                    low
                }
            }
        }
    }

    pub fn moment(&self, k: i32) -> f64 {
        match *self {
            BoundedLaw::Constant { value } => value.powi(k),
            BoundedLaw::Uniform { lo, hi } => (hi.powi(k + 1) - lo.powi(k + 1)) / ((k + 1) as f64 * (hi - lo)),
            BoundedLaw::TwoPoint { low, high, p_high } => p_high * high.powi(k) + (1.0 - p_high) * low.powi(k),
        }
    }

    /// E[(W − m)₊^α] and E[(W − m)₋^α].
    pub fn centered_tail_moments(&self, m: f64, alpha: f64) -> (f64, f64) {
        let pos = |x: f64| x.max(0.0).powf(alpha);
        match *self {
            BoundedLaw::Constant { value } => (pos(value - m), pos(m - value)),
            BoundedLaw::Uniform { lo, hi } => {
                let a1 = alpha + 1.0;
                let plus = ((hi - m).max(0.0).powf(a1) - (lo - m).max(0.0).powf(a1)) / (a1 * (hi - lo));
                let minus = ((m - lo).max(0.0).powf(a1) - (m - hi).max(0.0).powf(a1)) / (a1 * (hi - lo));
                (plus, minus)
            }
            BoundedLaw::TwoPoint { low, high, p_high } => (
                p_high * pos(high - m) + (1.0 - p_high) * pos(low - m),
                p_high * pos(m - high) + (1.0 - p_high) * pos(m - low),
            ),
        }
    }

    pub fn bound(&self) -> f64 {
        match *self {
            BoundedLaw::Constant { value } => value.abs(),
            BoundedLaw::Uniform { lo, hi } => lo.abs().max(hi.abs()),
            BoundedLaw::TwoPoint { low, high, .. } => low.abs().max(high.abs()),
        }
    }
}

/// User-supplied reward coupling `g(z, u)`.
#[derive(Clone)]
pub struct CustomCoupling {
    pub g: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    /// Nonrandom bound `K ≥ |g|`.
    pub bound: f64,
    /// Deterministic limit `lim_{z→∞} g(z, u)`, if it exists.
    pub w_inf: Option<f64>,
}

impl fmt::Debug for CustomCoupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomCoupling")
            .field("bound", &self.bound)
            .field("w_inf", &self.w_inf)
            .finish()
    }
}

impl PartialEq for CustomCoupling {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.g, &other.g)
    }
}

/// Reward as a function of cycle length and an independent uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "g", rename_all = "kebab-case")]
pub enum Coupling {
    /// `(1+z)^{−δ}(2u−1)`.
    Vanishing { delta: f64 },
    /// `level + amp·(1+z)^{−δ}·u`.
    Decaying { level: f64, amp: f64, delta: f64 },
    #[serde(skip)]
    Custom(CustomCoupling),
}

impl Coupling {
    pub fn eval(&self, z: f64, u: f64) -> f64 {
        match self {
            Coupling::Vanishing { delta } => (1.0 + z).powf(-delta) * (2.0 * u - 1.0),
            Coupling::Decaying { level, amp, delta } => level + amp * (1.0 + z).powf(-delta) * u,
            Coupling::Custom(c) => (c.g)(z, u),
        }
    }

    /// E_U g(z, U)^k.
    pub fn cond_moment(&self, z: f64, k: i32) -> f64 {
        match *self {
            Coupling::Vanishing { delta } => {
                let s = (1.0 + z).powf(-delta);
                if k % 2 == 1 {
                    0.0
                } else {
                    s.powi(k) / (k + 1) as f64
                }
            }
            Coupling::Decaying { level, amp, delta } => {
                let b = amp * (1.0 + z).powf(-delta);
                if b.abs() < 1e-300 {
                    return level.powi(k);
                }
                ((level + b).powi(k + 1) - level.powi(k + 1)) / ((k + 1) as f64 * b)
            }
            Coupling::Custom(ref c) => integrate(|u| (c.g)(z, u).powi(k), 0.0, 1.0).unwrap_or(f64::NAN),
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            Coupling::Vanishing { .. } => 1.0,
            Coupling::Decaying { level, amp, .. } => level.abs().max((level + amp).abs()),
            Coupling::Custom(c) => c.bound,
        }
    }

    /// Deterministic `W^∞ = lim g(z, ·)`.
    pub fn w_inf(&self) -> Option<f64> {
        match self {
            Coupling::Vanishing { .. } => Some(0.0),
            Coupling::Decaying { level, .. } => Some(*level),
            Coupling::Custom(c) => c.w_inf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RewardLaw {
    Independent { law: BoundedLaw },
    Coupled { coupling: Coupling },
}

impl RewardLaw {
    pub fn bound(&self) -> f64 {
        match self {
            RewardLaw::Independent { law } => law.bound(),
            RewardLaw::Coupled { coupling } => coupling.bound(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, z: f64, rng: &mut R) -> f64 {
        match self {
            RewardLaw::Independent { law } => law.sample(rng),
            RewardLaw::Coupled { coupling } => coupling.eval(z, uniform(rng)),
        }
    }

    /// E[W^k | Z = z].
    pub fn cond_moment(&self, z: f64, k: i32) -> f64 {
        match self {
            RewardLaw::Independent { law } => law.moment(k),
            RewardLaw::Coupled { coupling } => coupling.cond_moment(z, k),
        }
    }
}

/// Pulse families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PulseModel {
    /// `A·1(0 < t ≤ R)`.
    RectIndep { amplitude: PositiveLaw, duration: RegVaryingDist },
    /// `R^{1−p}·1(0 < t ≤ R^p)`.
    RectCoupled { length: RegVaryingDist, p: f64 },
    /// `e^{−At}·1(0 < t ≤ R)`.
    ExpDamped { rate: PositiveLaw, duration: RegVaryingDist },
    /// `B(t)·1(0 < t ≤ R)`.
    Brownian { duration: RegVaryingDist },
    /// `1(t < Z_on)` on a cycle of length `Z_on + Z_off`.
    OnOff { on: RegVaryingDist, off: PositiveLaw },
    /// `(Z_on − t)₊` on a cycle of length `Z_on + Z_off`.
    Workload { on: RegVaryingDist, off: PositiveLaw },
    /// `W·1(t < Z)`.
    RenewalReward { cycle: RegVaryingDist, reward: RewardLaw },
}

#[derive(Debug, Clone, Copy)]
struct Knot {
    t: f64,
    b: f64,
    i: f64,
}

/// Lazily refined exact path of `(B(t), ∫₀ᵗ B)`.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    rng: RngStream,
    knots: Vec<Knot>,
}

impl BrownianPath {
    fn new(seed: u64) -> Self {
        BrownianPath {
            rng: RngStream::seed_from_u64(seed),
            knots: vec![Knot { t: 0.0, b: 0.0, i: 0.0 }],
        }
    }

    /// Draws a 2-d Gaussian with the given mean and covariance.
    fn gauss2(&mut self, mean: Vector2<f64>, cov: Matrix2<f64>) -> Vector2<f64> {
        let z = Vector2::new(normal(&mut self.rng), normal(&mut self.rng));
        // explicit 2×2 Cholesky; clamp round-off negatives
        let l11 = cov[(0, 0)].max(0.0).sqrt();
        let l21 = if l11 > 0.0 { cov[(1, 0)] / l11 } else { 0.0 };
        let l22 = (cov[(1, 1)] - l21 * l21).max(0.0).sqrt();
        mean + Vector2::new(l11 * z[0], l21 * z[0] + l22 * z[1])
    }

    fn knot_at(&mut self, t: f64) -> Knot {
        let pos = self.knots.partition_point(|k| k.t < t);
        if pos < self.knots.len() && self.knots[pos].t == t {
            return self.knots[pos];
        }
        let left = self.knots[pos - 1];
        let s = t - left.t;
        // fresh-BM pair Y(s) = (B(s), ∫₀^s B) relative to the left knot
        let cov_ss = Matrix2::new(s, s * s / 2.0, s * s / 2.0, s * s * s / 3.0);
        let y = if pos == self.knots.len() {
            self.gauss2(Vector2::zeros(), cov_ss)
        } else {
            let right = self.knots[pos];
            let h = right.t - left.t;
            let cov_hh = Matrix2::new(h, h * h / 2.0, h * h / 2.0, h * h * h / 3.0);
            let cov_sh = Matrix2::new(s, s * h - s * s / 2.0, s * s / 2.0, s * s * h / 2.0 - s * s * s / 6.0);
            let yh = Vector2::new(right.b - left.b, right.i - left.i - left.b * h);
            let inv = cov_hh.try_inverse().expect("positive definite for h > 0");
            let k = cov_sh * inv;
            let cond = cov_ss - k * cov_sh.transpose();
            self.gauss2(k * yh, cond)
        };
        let knot = Knot {
            t,
            b: left.b + y[0],
            i: left.i + left.b * s + y[1],
        };
        self.knots.insert(pos, knot);
        knot
    }

    /// ∫ₐᵇ B(t) dt.
    pub fn integral(&mut self, a: f64, b: f64) -> f64 {
        let ka = self.knot_at(a);
        let kb = self.knot_at(b);
        kb.i - ka.i
    }

    pub fn value(&mut self, t: f64) -> f64 {
        self.knot_at(t).b
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Rect { amp: f64, len: f64 },
    Exp { rate: f64, len: f64 },
    Brownian { len: f64, path: BrownianPath },
    Workload { z_on: f64 },
}

/// One realized pulse with support inside `[0, duration)`.
#[derive(Debug, Clone)]
pub struct RealizedPulse {
    shape: Shape,
    duration: f64,
}

impl RealizedPulse {
    pub fn rect(amp: f64, len: f64, duration: f64) -> Self {
        RealizedPulse {
            shape: Shape::Rect { amp, len },
            duration,
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Exact ∫ₐᵇ w(t) dt.
    pub fn integrate_window(&mut self, a: f64, b: f64) -> Result<f64> {
        ensure(a <= b, "window", format!("a={a} > b={b}"))?;
        Ok(self.window(a, b))
    }

    pub(crate) fn window(&mut self, a: f64, b: f64) -> f64 {
        let lo = a.max(0.0);
        match &mut self.shape {
            Shape::Rect { amp, len } => {
                let hi = b.min(*len);
                if hi > lo {
                    *amp * (hi - lo)
                } else {
                    0.0
                }
            }
            Shape::Exp { rate, len } => {
                let hi = b.min(*len);
                if hi <= lo {
                    return 0.0;
                }
                let r = *rate;
                if r == 0.0 {
                    hi - lo
                } else {
                    (-r * lo).exp() * -(-r * (hi - lo)).exp_m1() / r
                }
            }
            Shape::Brownian { len, path } => {
                let hi = b.min(*len);
                if hi <= lo {
                    0.0
                } else {
                    path.integral(lo, hi)
                }
            }
            Shape::Workload { z_on } => {
                let hi = b.min(*z_on);
                if hi <= lo {
                    0.0
                } else {
                    *z_on * (hi - lo) - (hi * hi - lo * lo) / 2.0
                }
            }
        }
    }

    /// 𝒲 = ∫₀^D w.
    pub fn total_mass(&mut self) -> f64 {
        match &mut self.shape {
            Shape::Rect { amp, len } => *amp * *len,
            Shape::Exp { rate, len } => {
                if *rate == 0.0 {
                    *len
                } else {
                    -(-*rate * *len).exp_m1() / *rate
                }
            }
            Shape::Brownian { len, path } => {
                let l = *len;
                if l <= 0.0 {
                    0.0
                } else {
                    path.integral(0.0, l)
                }
            }
            Shape::Workload { z_on } => *z_on * *z_on / 2.0,
        }
    }

    /// Pulse value `w(t)`.
    pub fn value(&mut self, t: f64) -> f64 {
        if t < 0.0 || t >= self.duration {
            return 0.0;
        }
        match &mut self.shape {
            Shape::Rect { amp, len } => {
                if t < *len {
                    *amp
                } else {
                    0.0
                }
            }
            Shape::Exp { rate, len } => {
                if t < *len {
                    (-*rate * t).exp()
                } else {
                    0.0
                }
            }
            Shape::Brownian { len, path } => {
                if t < *len {
                    path.value(t)
                } else {
                    0.0
                }
            }
            Shape::Workload { z_on } => (*z_on - t).max(0.0),
        }
    }
}

/// Moments of 𝒲 restricted to `D ≤ c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMassMoments {
    pub prob: f64,
    pub m1: f64,
    pub m2: f64,
}

impl PulseModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            PulseModel::RectIndep { amplitude, duration } => {
                amplitude.validate()?;
                duration.validate()
            }
            PulseModel::RectCoupled { length, p } => {
                length.validate()?;
                ensure(*p > 0.0 && *p <= 1.0, "p", format!("must lie in (0,1], got {p}"))?;
                ensure(
                    matches!(length, RegVaryingDist::ParetoExact { .. }) || *p == 1.0,
                    "length",
                    "rect-coupled with p < 1 requires a pareto-exact length law",
                )
            }
            PulseModel::ExpDamped { rate, duration } => {
                rate.validate()?;
                duration.validate()
            }
            PulseModel::Brownian { duration } => duration.validate(),
            PulseModel::OnOff { on, off } | PulseModel::Workload { on, off } => {
                on.validate()?;
                off.validate()
            }
            PulseModel::RenewalReward { cycle, reward } => {
                cycle.validate()?;
                ensure(reward.bound().is_finite(), "reward", "reward must be bounded by a nonrandom constant")
            }
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            PulseModel::RectIndep { .. } => "rect-indep",
            PulseModel::RectCoupled { .. } => "rect-coupled",
            PulseModel::ExpDamped { .. } => "exp-damped",
            PulseModel::Brownian { .. } => "brownian",
            PulseModel::OnOff { .. } => "on-off",
            PulseModel::Workload { .. } => "workload",
            PulseModel::RenewalReward { .. } => "renewal-reward",
        }
    }

    /// Law of the heavy-tailed driver (R, Z_on or Z).
    pub fn driver(&self) -> &RegVaryingDist {
        match self {
            PulseModel::RectIndep { duration, .. }
            | PulseModel::ExpDamped { duration, .. }
            | PulseModel::Brownian { duration } => duration,
            PulseModel::RectCoupled { length, .. } => length,
            PulseModel::OnOff { on, .. } | PulseModel::Workload { on, .. } => on,
            PulseModel::RenewalReward { cycle, .. } => cycle,
        }
    }

    fn assemble<R: Rng + ?Sized>(&self, driver: f64, extra: Option<f64>, rng: &mut R) -> RealizedPulse {
        match self {
            PulseModel::RectIndep { amplitude, .. } => {
                let a = extra.unwrap_or_else(|| amplitude.sample(rng));
                RealizedPulse::rect(a, driver, driver)
            }
            PulseModel::RectCoupled { p, .. } => {
                let d = driver.powf(*p);
                RealizedPulse::rect(driver.powf(1.0 - p), d, d)
            }
            PulseModel::ExpDamped { rate, .. } => RealizedPulse {
                shape: Shape::Exp {
                    rate: extra.unwrap_or_else(|| rate.sample(rng)),
                    len: driver,
                },
                duration: driver,
            },
            PulseModel::Brownian { .. } => RealizedPulse {
                shape: Shape::Brownian {
                    len: driver,
                    path: BrownianPath::new(rng.gen()),
                },
                duration: driver,
            },
            PulseModel::OnOff { off, .. } => {
                let z_off = extra.unwrap_or_else(|| off.sample(rng));
                RealizedPulse::rect(1.0, driver, driver + z_off)
            }
            PulseModel::Workload { off, .. } => {
                let z_off = extra.unwrap_or_else(|| off.sample(rng));
                RealizedPulse {
                    shape: Shape::Workload { z_on: driver },
                    duration: driver + z_off,
                }
            }
            PulseModel::RenewalReward { reward, .. } => {
                let w = extra.unwrap_or_else(|| reward.sample(driver, rng));
                RealizedPulse::rect(w, driver, driver)
            }
        }
    }

    /// Fresh pulse.
    pub fn draw_pulse<R: Rng + ?Sized>(&self, rng: &mut R) -> RealizedPulse {
        let r = self.driver().sample(rng);
        self.assemble(r, None, rng)
    }

    /// Driver value whose pulse has duration `d`, for families where D is a function of the driver alone.
    pub fn driver_at_duration(&self, d: f64) -> Option<f64> {
        match self {
            PulseModel::RectCoupled { p, .. } => Some(d.powf(1.0 / p)),
            PulseModel::OnOff { .. } | PulseModel::Workload { .. } => None,
            _ => Some(d),
        }
    }

    /// Fresh pulse with driver conditioned above (`above = true`) or at most `thr`.
    pub fn draw_pulse_conditioned<R: Rng + ?Sized>(&self, thr: f64, above: bool, rng: &mut R) -> RealizedPulse {
        let d = self.driver();
        let r = if above { d.sample_exceeding(thr, rng) } else { d.sample_below(thr, rng) };
        self.assemble(r, None, rng)
    }

    /// Pulse drawn from the law tilted by its duration D.
    pub fn draw_length_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<RealizedPulse> {
        match self {
            PulseModel::RectCoupled { length, p } => {
                // density ∝ r^p f(r): Pareto(α − p, x_min) for the exact law
                let RegVaryingDist::ParetoExact { alpha, x_min } = *length else {
                    return Err(invalid("length", "length-biased rect-coupled needs pareto-exact"));
                };
                let tilted = RegVaryingDist::pareto(alpha - p, x_min)?;
                let r = tilted.sample(rng);
                Ok(self.assemble(r, None, rng))
            }
            PulseModel::OnOff { on, off } | PulseModel::Workload { on, off } => {
                let (m_on, m_off) = (on.mean(), off.mean());
                ensure(m_on.is_finite(), "on", "ON law needs a finite mean")?;
                let (z_on, z_off) = if uniform(rng) * (m_on + m_off) < m_on {
                    (on.sample_length_biased(rng)?, off.sample(rng))
                } else {
                    (on.sample(rng), off.sample_length_biased(rng)?)
                };
                Ok(self.assemble(z_on, Some(z_off), rng))
            }
            _ => {
                let r = self.driver().sample_length_biased(rng)?;
                Ok(self.assemble(r, None, rng))
            }
        }
    }

    /// E D.
    pub fn mean_duration(&self) -> f64 {
        match self {
            PulseModel::RectCoupled { length, p } => match *length {
                RegVaryingDist::ParetoExact { alpha, x_min } => {
                    if alpha <= *p {
                        f64::INFINITY
                    } else {
                        alpha * x_min.powf(*p) / (alpha - p)
                    }
                }
                _ => length.mean(),
            },
            PulseModel::OnOff { on, off } | PulseModel::Workload { on, off } => on.mean() + off.mean(),
            _ => self.driver().mean(),
        }
    }

    /// E W(t).
    pub fn mean_w(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            PulseModel::RectIndep { amplitude, duration } => amplitude.mean() * duration.survival(t),
            PulseModel::RectCoupled { length, p } => {
                real_partial(length, 1.0 - p, t.powf(1.0 / p), f64::INFINITY)
            }
            PulseModel::ExpDamped { rate, duration } => duration.survival(t) * rate.laplace(t),
            PulseModel::Brownian { .. } => 0.0,
            PulseModel::OnOff { on, .. } => on.survival(t),
            PulseModel::Workload { on, .. } => on.integrated_survival(t),
            PulseModel::RenewalReward { cycle, reward } => match reward {
                RewardLaw::Independent { law } => law.moment(1) * cycle.survival(t),
                RewardLaw::Coupled { coupling } => integrate_split(
                    |z| coupling.cond_moment(z, 1) * cycle.density(z),
                    &[t.max(cycle.x_min())],
                )
                .unwrap_or(f64::NAN),
            },
        }
    }

    /// E[W(u)·W(u+t)].
    pub fn corr_kernel(&self, u: f64, t: f64) -> f64 {
        if u < 0.0 || t < 0.0 {
            return 0.0;
        }
        let v = u + t;
        match self {
            PulseModel::RectIndep { amplitude, duration } => amplitude.moment(2.0) * duration.survival(v),
            PulseModel::RectCoupled { length, p } => real_partial(length, 2.0 * (1.0 - p), v.powf(1.0 / p), f64::INFINITY),
            PulseModel::ExpDamped { rate, duration } => duration.survival(v) * rate.laplace(2.0 * u + t),
            PulseModel::Brownian { duration } => u * duration.survival(v),
            PulseModel::OnOff { on, .. } => on.survival(v),
            PulseModel::Workload { on, .. } => integrate_split(
                |z| (z - u) * (z - v) * on.density(z),
                &[v.max(on.x_min())],
            )
            .unwrap_or(f64::NAN),
            PulseModel::RenewalReward { cycle, reward } => match reward {
                RewardLaw::Independent { law } => law.moment(2) * cycle.survival(v),
                RewardLaw::Coupled { coupling } => integrate_split(
                    |z| coupling.cond_moment(z, 2) * cycle.density(z),
                    &[v.max(cycle.x_min())],
                )
                .unwrap_or(f64::NAN),
            },
        }
    }

    /// E 𝒲 = ∫₀^∞ E W(t) dt.
    pub fn mean_mass(&self) -> Result<f64> {
        Ok(match self {
            PulseModel::RectIndep { amplitude, duration } => amplitude.mean() * duration.mean(),
            PulseModel::RectCoupled { length, .. } => length.mean(),
            PulseModel::ExpDamped { rate, duration } => {
                let lo = duration.x_min();
                let head = rate.expect(|a| exp_mass(a, lo))?;
                head + integrate_split(|t| duration.survival(t) * rate.laplace(t), &[lo])?
            }
            PulseModel::Brownian { .. } => 0.0,
            PulseModel::OnOff { on, .. } => on.mean(),
            PulseModel::Workload { on, .. } => on.second_moment() / 2.0,
            PulseModel::RenewalReward { cycle, reward } => match reward {
                RewardLaw::Independent { law } => law.moment(1) * cycle.mean(),
                RewardLaw::Coupled { coupling } => {
                    integrate_split(|z| z * coupling.cond_moment(z, 1) * cycle.density(z), &[cycle.x_min()])?
                }
            },
        })
    }

    /// E[𝒲^k; D ≤ c] for k = 0, 1, 2, where available in closed form or by quadrature.
    pub fn truncated_mass_moments(&self, c: f64) -> Option<TruncatedMassMoments> {
        let tm = |prob: f64, m1: f64, m2: f64| Some(TruncatedMassMoments { prob, m1, m2 });
        match self {
            PulseModel::RectIndep { amplitude, duration } => tm(
                duration.cdf(c),
                amplitude.mean() * duration.partial_moment(1, 0.0, c),
                amplitude.moment(2.0) * duration.partial_moment(2, 0.0, c),
            ),
            PulseModel::RectCoupled { length, p } => {
                let rc = c.powf(1.0 / p);
                tm(length.cdf(rc), length.partial_moment(1, 0.0, rc), length.partial_moment(2, 0.0, rc))
            }
            PulseModel::Brownian { duration } => {
                tm(duration.cdf(c), 0.0, duration.partial_moment(3, 0.0, c) / 3.0)
            }
            PulseModel::ExpDamped { rate, duration } => {
                let lo = duration.x_min();
                if c <= lo {
                    return tm(0.0, 0.0, 0.0);
                }
                let inner = |k: i32| {
                    integrate(
                        |r| rate.expect(|a| exp_mass(a, r).powi(k)).unwrap_or(f64::NAN) * duration.density(r),
                        lo,
                        c,
                    )
                    .ok()
                };
                tm(duration.cdf(c), inner(1)?, inner(2)?)
            }
            _ => None,
        }
    }
}

/// (1 − e^{−ar})/a with the a → 0 limit.
pub fn exp_mass(a: f64, r: f64) -> f64 {
    if a * r < 1e-12 {
        r
    } else {
        -(-a * r).exp_m1() / a
    }
}

/// E[Z^e; lo < Z ≤ hi] for real e.
fn real_partial(d: &RegVaryingDist, e: f64, lo: f64, hi: f64) -> f64 {
    if (e - e.round()).abs() < 1e-12 && e >= 0.0 {
        return d.partial_moment(e.round() as u32, lo, hi);
    }
    let a = lo.max(d.x_min());
    if hi <= a {
        return 0.0;
    }
    if hi.is_infinite() {
        integrate_split(|z| z.powf(e) * d.density(z), &[a]).unwrap_or(f64::NAN)
    } else {
        integrate(|z| z.powf(e) * d.density(z), a, hi).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn pareto(a: f64) -> RegVaryingDist {
        RegVaryingDist::pareto(a, 1.0).unwrap()
    }

    #[test]
    fn rect_window_overlap() {
        let mut p = RealizedPulse::rect(2.0, 3.0, 3.0);
        assert_eq!(p.integrate_window(1.0, 5.0).unwrap(), 4.0);
        assert!(p.integrate_window(2.0, 1.0).is_err());
        let mut z = RealizedPulse::rect(2.0, 0.0, 0.0);
        assert_eq!(z.integrate_window(0.0, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn exp_window_antiderivative() {
        let mut p = RealizedPulse {
            shape: Shape::Exp { rate: 1.0, len: 2.0 },
            duration: 2.0,
        };
        assert_relative_eq!(p.integrate_window(0.0, 2.0).unwrap(), 1.0 - (-2f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(exp_mass(1e-14, 3.0), 3.0, epsilon = 1e-12);
        assert_relative_eq!(exp_mass(1.0, 1e6), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn coupled_mass_is_r() {
        let m = PulseModel::RectCoupled { length: pareto(1.5), p: 0.5 };
        let mut p = m.assemble(16.0, None, &mut stream(0, 0));
        assert_eq!(p.total_mass(), 16.0);
        assert_eq!(p.duration(), 4.0);
    }

    #[test]
    fn brownian_path_consistency() {
        let m = PulseModel::Brownian { duration: pareto(2.5) };
        let mut rng = stream(3, 0);
        for _ in 0..50 {
            let mut p = m.assemble(5.0, None, &mut rng);
            let mut q = p.clone();
            let a = p.integrate_window(0.0, 1.0).unwrap();
            let full = p.integrate_window(0.0, 2.0).unwrap();
            let b = p.integrate_window(1.0, 2.0).unwrap();
            assert!((a + b - full).abs() < 1e-12);
            let full_q = q.integrate_window(0.0, 2.0).unwrap();
            let tail_q = q.integrate_window(1.0, 2.0).unwrap();
            let head_q = q.integrate_window(0.0, 1.0).unwrap();
            assert!((head_q - (full_q - tail_q)).abs() < 1e-12);
        }
    }

    #[test]
    fn brownian_bridge_moments() {
        // Var ∫₀¹B = 1/3 whether the knot at 1 is drawn before or after the one at 2
        let m = PulseModel::Brownian { duration: pareto(2.5) };
        let mut rng = stream(5, 0);
        let n = 40_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let mut p = m.assemble(10.0, None, &mut rng);
            let _ = p.integrate_window(0.0, 2.0).unwrap();
            let v = p.integrate_window(0.0, 1.0).unwrap();
            s1 += v * v;
            let b1 = p.value(1.0);
            s2 += b1 * b1;
        }
        let (v1, v2) = (s1 / n as f64, s2 / n as f64);
        assert!((v1 - 1.0 / 3.0).abs() < 4.0 * (2.0 / n as f64).sqrt() / 3.0, "{v1}");
        assert!((v2 - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt(), "{v2}");
    }

    #[test]
    fn rect_cov_closed_form() {
        // ∫₀^∞ P(R > t+u) du = 2 t^{-1/2} for t ≥ 1
        let d = pareto(1.5);
        for &t in &[1.0, 2.0, 4.0, 9.0] {
            assert_relative_eq!(d.integrated_survival(t), 2.0 / t.sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn window_additivity_closed_forms() {
        let models = [
            PulseModel::RectIndep { amplitude: PositiveLaw::Uniform { lo: 0.5, hi: 2.0 }, duration: pareto(1.5) },
            PulseModel::ExpDamped { rate: PositiveLaw::PowerUnit { kappa: 0.3 }, duration: pareto(1.5) },
            PulseModel::Workload { on: pareto(2.5), off: PositiveLaw::Exponential { rate: 1.0 } },
        ];
        let mut rng = stream(2, 0);
        for m in &models {
            for _ in 0..100 {
                let mut p = m.draw_pulse(&mut rng);
                let (a, b, c) = (0.3, 1.7, 4.2);
                let lhs = p.window(a, c);
                let rhs = p.window(a, b) + p.window(b, c);
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
                let d = p.duration();
                let tm = p.total_mass();
                assert!((p.window(0.0, d) - tm).abs() <= 1e-12 * tm.abs().max(1.0));
            }
        }
    }

    #[test]
    fn onoff_full_cycle_mass() {
        let m = PulseModel::OnOff { on: pareto(1.5), off: PositiveLaw::Exponential { rate: 1.0 } };
        let mut p = m.assemble(2.5, Some(0.7), &mut stream(0, 0));
        assert_eq!(p.window(0.0, p.duration()), 2.5);
    }

    #[test]
    fn truncated_moments_rect() {
        let m = PulseModel::RectIndep { amplitude: PositiveLaw::Constant { value: 1.0 }, duration: pareto(1.5) };
        let t = m.truncated_mass_moments(16.0).unwrap();
        assert_relative_eq!(t.prob, 1.0 - 16f64.powf(-1.5), max_relative = 1e-12);
        // ∫₁^16 r·1.5 r^{-2.5} dr = 3(1 − 16^{-1/2})
        assert_relative_eq!(t.m1, 3.0 * (1.0 - 0.25), max_relative = 1e-12);
    }

    #[test]
    fn exp_damped_mean_mass_matches_monte_carlo() {
        let m = PulseModel::ExpDamped { rate: PositiveLaw::PowerUnit { kappa: 0.3 }, duration: pareto(1.5) };
        let exact = m.mean_mass().unwrap();
        let mut rng = stream(8, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| m.draw_pulse(&mut rng).total_mass()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - exact).abs() < 4.0 * (var / n as f64).sqrt(), "{mean} vs {exact}");
    }
}
