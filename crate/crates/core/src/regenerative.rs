//! Stationary regenerative input: i.i.d. cycles `(Z, {W(t)}_{t<Z})` glued at renewal epochs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Error, Result};
use crate::heavy_tail::{stable_params_from_tails, PositiveLaw, RegVaryingDist};
use crate::numeric::{integrate, integrate_split};
use crate::pulses::{BoundedLaw, PulseModel, RealizedPulse, RewardLaw};
use crate::regime::{h_table, kind_of, FbsLimit, LimitKind, RegimeSpec, TelecomLimit};
use crate::rng::{exp1, uniform};
use crate::shot_noise::ShotNoiseSource;

/// Regenerative process whose cycle is one pulse of `pulse`; the cycle length is the pulse duration.
#[derive(Debug, Clone, PartialEq)]
pub struct RegenModel {
    pub pulse: PulseModel,
    mu: f64,
    mu_w: f64,
}

/// Law of `W^∞`, the reward level seen along very long cycles.
#[derive(Debug, Clone, PartialEq)]
enum LimitReward {
    Fixed(f64),
    Bounded(BoundedLaw),
    Positive(PositiveLaw),
}

impl LimitReward {
    fn expect(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        match self {
            LimitReward::Fixed(w) => Ok(f(*w)),
            LimitReward::Bounded(BoundedLaw::Constant { value }) => Ok(f(*value)),
            LimitReward::Bounded(BoundedLaw::Uniform { lo, hi }) => Ok(integrate(&f, *lo, *hi)? / (hi - lo)),
            LimitReward::Bounded(BoundedLaw::TwoPoint { low, high, p_high }) => {
                Ok(p_high * f(*high) + (1.0 - p_high) * f(*low))
            }
            LimitReward::Positive(p) => p.expect(f),
        }
    }

    fn fixed(&self) -> Option<f64> {
        match self {
            LimitReward::Fixed(w) => Some(*w),
            LimitReward::Bounded(BoundedLaw::Constant { value }) => Some(*value),
            LimitReward::Positive(PositiveLaw::Constant { value }) => Some(*value),
            _ => None,
        }
    }
}

struct TailData {
    alpha: f64,
    c_z: f64,
    w_inf: LimitReward,
    notes: Vec<String>,
}

/// Grids of the decomposition `Cov(X(0), X(t)) = R(t) + h(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovDecomposition {
    pub dt: f64,
    pub t: Vec<f64>,
    /// Renewal function `U = Σ_{j≥0} F^{j⋆}` (Richardson-extrapolated).
    pub u: Vec<f64>,
    pub g0: Vec<f64>,
    pub g1: Vec<f64>,
    /// `z = G⁰ ⋆ G¹`.
    pub z: Vec<f64>,
    pub h: Vec<f64>,
    pub r: Vec<f64>,
    pub cov: Vec<f64>,
    /// `Var X(0) = E X² − (E X)²` from quadrature.
    pub variance: f64,
    /// `m = ∫z = μ_W²`.
    pub m: f64,
    /// `z(t) ~ c*_z t^{−α}`, when the tail data are available.
    pub c_star_z: Option<f64>,
    /// `t^{α−1} h(t) → h_constant`.
    pub h_constant: Option<f64>,
    /// `t^{α−1} Cov(t) → c_X`.
    pub c_x: Option<f64>,
    /// Largest change of `h` between the `dt` and `dt/2` grids.
    pub richardson_error: f64,
    /// Largest residual `|U − 1 − U⋆F|` of the extrapolated renewal function.
    pub renewal_residual: f64,
    /// `V(z) ≤ 2·V(G¹)·‖G⁰‖₁` on the grid.
    pub variation_bound_ok: bool,
    pub z_nonnegative: bool,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Renewal function on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalGrid {
    pub dt: f64,
    pub t: Vec<f64>,
    /// Richardson combination `2·U_{dt/2} − U_dt`.
    pub u: Vec<f64>,
    /// Plain right-endpoint solution on the `dt` grid.
    pub u_raw: Vec<f64>,
    pub richardson_error: f64,
    pub residual: f64,
}

/// One M/G/1 busy period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BusyPeriod {
    pub length: f64,
    pub served: u64,
}

pub const DEFAULT_EVENT_CAP: u64 = 100_000_000;

/// Grid points allowed in [`RegenModel::cov_decomposition`] (the fine grid is twice this).
const MAX_GRID: usize = 100_000;

impl RegenModel {
    pub fn new(pulse: PulseModel) -> Result<Self> {
        pulse.validate()?;
        match &pulse {
            PulseModel::Brownian { .. } => {
                return Err(invalid("family", "Brownian pulses are unbounded and cannot serve as cycle rewards"))
            }
            PulseModel::RectCoupled { .. } => {
                return Err(invalid(
                    "family",
                    "rect-coupled cycles carry R^(1-p), unbounded for p < 1 and constant for p = 1",
                ))
            }
            _ => {}
        }
        let mu = pulse.mean_duration();
        ensure(mu.is_finite(), "cycle", "E Z must be finite")?;
        let mu_w = pulse.mean_mass()?;
        ensure(mu_w.is_finite(), "cycle", "E 𝒲_Z must be finite")?;
        Ok(RegenModel { pulse, mu, mu_w })
    }

    /// `E Z`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `E 𝒲_Z`.
    pub fn mu_w(&self) -> f64 {
        self.mu_w
    }

    /// `E X(t) = μ_W/μ`.
    pub fn mean(&self) -> f64 {
        self.mu_w / self.mu
    }

    /// Nonrandom bound on `|W(t)|` (infinite for workload pulses).
    pub fn bound(&self) -> f64 {
        match &self.pulse {
            PulseModel::RectIndep { amplitude, .. } => amplitude.sup(),
            PulseModel::ExpDamped { .. } | PulseModel::OnOff { .. } => 1.0,
            PulseModel::RenewalReward { reward, .. } => reward.bound(),
            _ => f64::INFINITY,
        }
    }

    /// Cycle whose pulse has duration equal to the cycle length.
    pub fn draw_cycle<R: Rng + ?Sized>(&self, rng: &mut R) -> RealizedPulse {
        self.pulse.draw_pulse(rng)
    }

    /// Stationary start: length-biased cycle entered at a uniform age; returns the cycle and its start (≤ 0).
    fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(RealizedPulse, f64)> {
        let p = self.pulse.draw_length_biased(rng)?;
        let age = uniform(rng) * p.duration();
        Ok((p, -age))
    }

    /// Exact joint draw of `∫₀^{τ_k} X` for increasing `times`.
    pub fn integrated_path<R: Rng + ?Sized>(&self, times: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        ensure(!times.is_empty() && times[0] > 0.0, "times", "need positive times")?;
        ensure(times.windows(2).all(|w| w[1] > w[0]), "times", "must be strictly increasing")?;
        let t_max = times[times.len() - 1];
        let mut inc = vec![0.0; times.len()];
        let (mut p, mut start) = self.initial(rng)?;
        let mut k = 0usize;
        loop {
            let end = start + p.duration();
            let mut lo = if k == 0 { 0.0f64 } else { times[k - 1] }.max(start);
            while k < times.len() {
                let hi = times[k].min(end);
                if hi > lo {
                    inc[k] += p.window(lo - start, hi - start);
                }
                if times[k] >= end {
                    break;
                }
                lo = times[k];
                k += 1;
            }
            if end >= t_max {
                break;
            }
            start = end;
            p = self.draw_cycle(rng);
        }
        let mut acc = 0.0;
        for v in inc.iter_mut() {
            acc += *v;
            *v = acc;
        }
        Ok(inc)
    }

    /// `∫₀^T X(t) dt`, uncentered.
    pub fn integrated_sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<f64> {
        ensure(t > 0.0, "T", "window length must be positive")?;
        Ok(self.integrated_path(&[t], rng)?[0])
    }

    /// `X(τ)` at nonnegative times, jointly.
    pub fn point_values<R: Rng + ?Sized>(&self, times: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        ensure(times.iter().all(|&t| t >= 0.0 && t.is_finite()), "times", "must be finite and nonnegative")?;
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let mut out = vec![0.0; times.len()];
        let (mut p, mut start) = self.initial(rng)?;
        let mut i = 0;
        while i < order.len() {
            let end = start + p.duration();
            while i < order.len() && times[order[i]] < end {
                out[order[i]] = p.value(times[order[i]] - start);
                i += 1;
            }
            start = end;
            if i < order.len() {
                p = self.draw_cycle(rng);
            }
        }
        Ok(out)
    }

    /// `W̃_Z = 𝒲_Z − (μ_W/μ)·Z` for one fresh cycle.
    pub fn tilde_mass_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut p = self.draw_cycle(rng);
        p.total_mass() - self.mean() * p.duration()
    }

    /// `P(Z ≤ t)`.
    pub fn cycle_cdf(&self, t: f64) -> Result<f64> {
        match &self.pulse {
            PulseModel::OnOff { on, off } | PulseModel::Workload { on, off } => {
                off.expect_below(t - on.x_min(), |s| on.cdf(t - s))
            }
            other => Ok(other.driver().cdf(t)),
        }
    }

    /// Forward tour mean `G¹(t) = E[W(t)·1(t < Z)]`.
    pub fn g1(&self, t: f64) -> f64 {
        self.pulse.mean_w(t)
    }

    /// Backward tour mean `G⁰(t) = E[W(Z − t)·1(t < Z)]`.
    pub fn g0(&self, t: f64) -> Result<f64> {
        match &self.pulse {
            PulseModel::OnOff { off, .. } => Ok((1.0 - self.cycle_cdf(t)? - off.survival(t)).max(0.0)),
            PulseModel::Workload { on, off } => off.expect_below(t, |s| (t - s) * on.survival(t - s)),
            PulseModel::ExpDamped { rate, duration } => {
                integrate_split(|r| rate.laplace(r - t) * duration.density(r), &[t.max(duration.x_min())])
            }
            _ => Ok(self.g1(t)),
        }
    }

    /// `R(t) = μ⁻¹∫₀^∞ E[W(s)W(s+t)1(Z > s+t)] ds`.
    pub fn r_term(&self, t: f64) -> Result<f64> {
        let kernel = ShotNoiseSource::new(self.pulse.clone())?;
        Ok(kernel.covariance_oracle(t)? / self.mu)
    }

    fn tail_data(&self) -> Result<TailData> {
        let mut notes = Vec::new();
        let single = |d: &RegVaryingDist, w: LimitReward| TailData {
            alpha: d.alpha(),
            c_z: d.tail_constant(),
            w_inf: w,
            notes: Vec::new(),
        };
        let td = match &self.pulse {
            PulseModel::OnOff { on, off } => {
                let (a_on, c_on) = (on.alpha(), on.tail_constant());
                match off {
                    PositiveLaw::RegVarying { dist } if (dist.alpha() - a_on).abs() < 1e-12 => {
                        let c = c_on + dist.tail_constant();
                        notes.push("ON and OFF share the tail index; W^∞ is random".into());
                        TailData {
                            alpha: a_on,
                            c_z: c,
                            w_inf: LimitReward::Bounded(BoundedLaw::TwoPoint {
                                low: 0.0,
                                high: 1.0,
                                p_high: c_on / c,
                            }),
                            notes: Vec::new(),
                        }
                    }
                    PositiveLaw::RegVarying { dist } if dist.alpha() < a_on => single(dist, LimitReward::Fixed(0.0)),
                    _ => single(on, LimitReward::Fixed(1.0)),
                }
            }
            PulseModel::Workload { .. } => {
                return Err(Error::Hypothesis(
                    "workload pulses are not bounded by a nonrandom constant; no limit claims".into(),
                ))
            }
            PulseModel::RenewalReward { cycle, reward } => match reward {
                RewardLaw::Independent { law } => single(cycle, LimitReward::Bounded(law.clone())),
                RewardLaw::Coupled { coupling } => {
                    let w = coupling.w_inf().ok_or_else(|| {
                        Error::Hypothesis("custom coupling without a declared W^∞ = lim g(z, ·)".into())
                    })?;
                    if matches!(coupling, crate::pulses::Coupling::Custom(_)) {
                        notes.push("decay of E[|W − W^∞| | Z = y] not checked for a custom coupling".into());
                    }
                    single(cycle, LimitReward::Fixed(w))
                }
            },
            PulseModel::ExpDamped { rate, duration } => {
                ensure(rate.survival(0.0) == 1.0, "rate", "need A > 0 almost surely")?;
                single(duration, LimitReward::Fixed(0.0))
            }
            PulseModel::RectIndep { amplitude, duration } => {
                ensure(amplitude.sup().is_finite(), "amplitude", "cycle rewards must be bounded")?;
                single(duration, LimitReward::Positive(amplitude.clone()))
            }
            other => return Err(Error::Hypothesis(format!("no regenerative limit data for {}", other.family()))),
        };
        Ok(TailData { notes: [td.notes, notes].concat(), ..td })
    }

    /// Renewal-function, tour-mean and `R + h` grids on `[0, t_max]`.
    pub fn cov_decomposition(&self, t_max: f64, dt: f64) -> Result<CovDecomposition> {
        ensure(t_max > 0.0 && dt > 0.0 && dt < t_max, "dt", "need 0 < dt < t_max")?;
        let n = (t_max / dt).round() as usize;
        ensure(n <= MAX_GRID, "dt", format!("grid of {n} points exceeds {MAX_GRID}"))?;
        let fine_dt = dt / 2.0;
        let nf = 2 * n;
        let mut f = Vec::with_capacity(nf + 1);
        let mut g0 = Vec::with_capacity(nf + 1);
        let mut g1 = Vec::with_capacity(nf + 1);
        for k in 0..=nf {
            let t = k as f64 * fine_dt;
            f.push(self.cycle_cdf(t)?);
            g0.push(self.g0(t)?);
            g1.push(self.g1(t));
        }
        let every_other = |v: &[f64]| v.iter().step_by(2).copied().collect::<Vec<_>>();
        let (fc, g0c, g1c) = (every_other(&f), every_other(&g0), every_other(&g1));

        let level = |f: &[f64], g0: &[f64], g1: &[f64], h: f64| {
            let u = renewal_raw(f);
            let z = convolve_trapezoid(g0, g1, h);
            let v = stieltjes(&z, &u);
            (u, z, v)
        };
        let (uc, zc, vc) = level(&fc, &g0c, &g1c, dt);
        let (uf, zf, vf) = level(&f, &g0, &g1, fine_dt);
        let rich = |c: &[f64], f: &[f64]| (0..=n).map(|k| 2.0 * f[2 * k] - c[k]).collect::<Vec<_>>();
        let u = rich(&uc, &uf);
        let z = rich(&zc, &zf);
        let v = rich(&vc, &vf);

        let ex = self.mean();
        let t: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let h: Vec<f64> = v.iter().map(|x| x / self.mu - ex * ex).collect();
        let richardson_error = (0..=n)
            .map(|k| ((vf[2 * k] - vc[k]) / self.mu).abs())
            .fold(0.0, f64::max);
        let mut r = Vec::with_capacity(n + 1);
        for &tk in &t {
            r.push(self.r_term(tk)?);
        }
        let cov: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a + b).collect();
        let variance = r[0] - ex * ex;

        let renewal_residual = renewal_residual(&u, &fc);
        let var = |x: &[f64]| x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
        let l1 = g0c.iter().map(|x| x.abs()).sum::<f64>() * dt;
        let variation_bound_ok = var(&zc) <= 2.0 * var(&g1c) * l1 + 1e-12;
        let z_nonnegative = !(g0c.iter().all(|&x| x >= 0.0) && g1c.iter().all(|&x| x >= 0.0))
            || zc.iter().all(|&x| x >= -1e-12);

        let m = self.mu_w * self.mu_w;
        let mut notes = vec!["z is checked for nonnegativity and grid variation only; right continuity is assumed".to_string()];
        let (c_star_z, h_constant, c_x) = match self.tail_data() {
            Ok(td) => {
                let w1 = td.w_inf.expect(|w| w)?;
                let c_star = 2.0 * td.c_z * w1 * self.mu_w;
                let hc = (td.c_z * m / self.mu - c_star) / ((td.alpha - 1.0) * self.mu * self.mu);
                let dev2 = td.w_inf.expect(|w| (w - ex).powi(2))?;
                (Some(c_star), Some(hc), Some(td.c_z * dev2 / ((td.alpha - 1.0) * self.mu)))
            }
            Err(e) => {
                notes.push(format!("no asymptotic constants: {e}"));
                (None, None, None)
            }
        };
        Ok(CovDecomposition {
            dt,
            t,
            u,
            g0: g0c,
            g1: g1c,
            z,
            h,
            r,
            cov,
            variance,
            m,
            c_star_z,
            h_constant,
            c_x,
            richardson_error,
            renewal_residual,
            variation_bound_ok,
            z_nonnegative,
            notes,
        })
    }

    /// Predicted scaling regime of the aggregate at connection-rate exponent `gamma`.
    pub fn regime_of(&self, gamma: f64) -> Result<RegimeSpec> {
        ensure(gamma > 0.0 && gamma.is_finite(), "gamma", "must be positive")?;
        ensure(self.bound().is_finite(), "pulse", "|W| must be bounded by a nonrandom constant")?;
        let td = self.tail_data()?;
        let a = td.alpha;
        ensure(a > 1.0 && a < 2.0, "alpha", format!("need 1 < alpha < 2, got {a}"))?;
        let ex = self.mean();
        let dev2 = td.w_inf.expect(|w| (w - ex).powi(2))?;
        // relative test: μ_W/μ is computed by quadrature, so an exact zero is never seen
        let scale = td.w_inf.expect(|w| w * w)?.max(ex * ex);
        if dev2 <= 1e-20 * scale.max(1e-300) {
            return Err(Error::Hypothesis(
                "W^∞ equals μ_W/μ almost surely; the heavy-tailed terms vanish".into(),
            ));
        }
        let g0 = a - 1.0;
        let kind = kind_of(gamma, g0);
        let c_x = td.c_z * dev2 / ((a - 1.0) * self.mu);
        let c_plus = td.c_z * td.w_inf.expect(|w| (w - ex).max(0.0).powf(a))?;
        let c_minus = td.c_z * td.w_inf.expect(|w| (ex - w).max(0.0).powf(a))?;
        let mut notes = td.notes;
        let telecom = match td.w_inf.fixed() {
            Some(w) => Some(TelecomLimit {
                alpha: a,
                intensity: td.c_z / self.mu,
                prefactor: w - ex,
                amplitude: None,
            }),
            None => {
                if kind == LimitKind::Intermediate {
                    return Err(Error::Hypothesis(
                        "W^∞ is random (e.g. W independent of Z): 𝒲_Z shares the α-tail of Z and the \
                         Telecom limit is not established"
                            .into(),
                    ));
                }
                notes.push("random W^∞: no intermediate oracle".into());
                None
            }
        };
        let spec = RegimeSpec {
            gamma,
            gamma0: g0,
            alpha: a,
            h: h_table(gamma, g0, |g| (3.0 - a + g) / 2.0, 1.0, |g| (1.0 + g) / a),
            kind,
            fbs: Some(FbsLimit::new((3.0 - a) / 2.0, c_x)),
            c_plus: Some(c_plus),
            c_minus: Some(c_minus),
            // λ^{1+γ}/μ cycle masses enter the sum, so the sheet carries the cycle rate 1/μ
            stable: Some(stable_params_from_tails(a, c_plus / self.mu, c_minus / self.mu)?),
            telecom,
            notes,
        };
        spec.validate_h_range()?;
        Ok(spec)
    }
}

/// M/G/1/0 loss system: Pareto services, unit-rate exponential idle periods.
pub fn mg1_loss(alpha: f64, x_min: f64) -> Result<RegenModel> {
    RegenModel::new(PulseModel::OnOff {
        on: RegVaryingDist::pareto(alpha, x_min)?,
        off: PositiveLaw::Exponential { rate: 1.0 },
    })
}

/// Cycle `Z = R`, `W(t) = e^{−At}` with `P(A ≤ a) = a^κ` on (0, 1] and Pareto(ϱ, 1) cycles.
pub fn exp_damped_regen(rho: f64, kappa: f64) -> Result<RegenModel> {
    RegenModel::new(PulseModel::ExpDamped {
        rate: PositiveLaw::PowerUnit { kappa },
        duration: RegVaryingDist::pareto(rho, 1.0)?,
    })
}

/// Right-endpoint solution of `U = 1 + F⋆U` from CDF values on a uniform grid (`F(0) = 0`).
fn renewal_raw(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let df: Vec<f64> = (0..n).map(|j| if j == 0 { 0.0 } else { f[j] - f[j - 1] }).collect();
    let mut u = vec![0.0; n];
    u[0] = 1.0;
    for k in 1..n {
        let mut s = 0.0;
        for j in 1..=k {
            s += u[k - j] * df[j];
        }
        u[k] = 1.0 + s;
    }
    u
}

/// `max_k |U_k − 1 − Σ_j ½(U_{k−j} + U_{k−j+1})ΔF_j|`.
fn renewal_residual(u: &[f64], f: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 1..u.len() {
        let mut s = 0.0;
        for j in 1..=k {
            s += 0.5 * (u[k - j] + u[k - j + 1]) * (f[j] - f[j - 1]);
        }
        worst = worst.max((u[k] - 1.0 - s).abs());
    }
    worst
}

/// Trapezoidal `∫₀^{t_k} a(s) b(t_k − s) ds`.
fn convolve_trapezoid(a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for k in 1..n {
        let mut s = 0.5 * (a[0] * b[k] + a[k] * b[0]);
        for j in 1..k {
            s += a[j] * b[k - j];
        }
        out[k] = h * s;
    }
    out
}

/// `∫₀^{t_k} z(t_k − s) U(ds)` with the unit atom of `U` at 0 and right-endpoint increments.
fn stieltjes(z: &[f64], u: &[f64]) -> Vec<f64> {
    let n = z.len();
    let du: Vec<f64> = (0..n).map(|j| if j == 0 { u[0] } else { u[j] - u[j - 1] }).collect();
    (0..n)
        .map(|k| (0..=k).map(|j| z[k - j] * du[j]).sum())
        .collect()
}

/// Renewal function of the law with CDF `cdf` on `[0, t_max]`, with a Richardson step at `dt/2`.
pub fn renewal_function(cdf: impl Fn(f64) -> f64, t_max: f64, dt: f64) -> Result<RenewalGrid> {
    ensure(t_max > 0.0 && dt > 0.0 && dt < t_max, "dt", "need 0 < dt < t_max")?;
    let n = (t_max / dt).round() as usize;
    ensure(n <= MAX_GRID, "dt", format!("grid of {n} points exceeds {MAX_GRID}"))?;
    ensure(cdf(0.0) == 0.0, "cdf", "F(0) must be 0")?;
    let f: Vec<f64> = (0..=2 * n).map(|k| cdf(k as f64 * dt / 2.0)).collect();
    let fc: Vec<f64> = f.iter().step_by(2).copied().collect();
    let uf = renewal_raw(&f);
    let uc = renewal_raw(&fc);
    let u: Vec<f64> = (0..=n).map(|k| 2.0 * uf[2 * k] - uc[k]).collect();
    let richardson_error = (0..=n).map(|k| (uf[2 * k] - uc[k]).abs()).fold(0.0, f64::max);
    let residual = renewal_residual(&u, &fc);
    Ok(RenewalGrid {
        dt,
        t: (0..=n).map(|k| k as f64 * dt).collect(),
        u,
        u_raw: uc,
        richardson_error,
        residual,
    })
}

/// Busy period of an M/G/1 queue with unit-rate Poisson arrivals, started by one customer.
pub fn sample_busy_period<R: Rng + ?Sized>(service: &PositiveLaw, cap: u64, rng: &mut R) -> Result<BusyPeriod> {
    ensure(service.mean() < 1.0, "service", "need E σ < 1 for a stable queue")?;
    let mut work = service.sample(rng);
    let mut clock = exp1(rng);
    let mut served = 1u64;
    while clock < work {
        if served >= cap {
            return Err(Error::Capacity(format!("busy period exceeded {cap} customers")));
        }
        work += service.sample(rng);
        clock += exp1(rng);
        served += 1;
    }
    Ok(BusyPeriod { length: work, served })
}

/// `c_on = c_σ/(1 − E σ)^{1+α}` for the busy-period tail `P(Z_on > x) ~ c_on x^{−α}`.
pub fn busy_period_tail_constant(service: &RegVaryingDist) -> Result<f64> {
    let m = service.mean();
    ensure(m < 1.0, "service", "need E σ < 1")?;
    Ok(service.tail_constant() / (1.0 - m).powf(1.0 + service.alpha()))
}

/// Number of renewals in `(0, t]` of a zero-delayed renewal process.
pub fn renewal_count<R: Rng + ?Sized>(cycle: &RegVaryingDist, t: f64, rng: &mut R) -> u64 {
    let mut s = cycle.sample(rng);
    let mut n = 0;
    while s <= t {
        n += 1;
        s += cycle.sample(rng);
    }
    n
}

/// Number of renewals in `(0, t]` of the stationary (equilibrium-delayed) renewal process.
pub fn stationary_renewal_count<R: Rng + ?Sized>(cycle: &RegVaryingDist, t: f64, rng: &mut R) -> Result<u64> {
    let first = cycle.sample_length_biased_pair(rng)?.residual;
    if first > t {
        return Ok(0);
    }
    Ok(1 + renewal_count(cycle, t - first, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{covariance_se, fit_scaling_exponent, mean_se};
    use crate::pulses::Coupling;
    use crate::rng::stream;

    #[test]
    fn poisson_renewal_function() {
        let g = renewal_function(|t| 1.0 - (-t).exp(), 10.0, 0.01).unwrap();
        for (t, u) in g.t.iter().zip(&g.u) {
            assert!((u - (1.0 + t)).abs() <= 2.0 * g.dt, "U({t}) = {u}");
        }
        assert!(g.residual <= 2.0 * g.dt);
        // the raw scheme alone is only first order
        assert!(g.richardson_error > g.dt);
    }

    #[test]
    fn mg1_loss_mean() {
        let m = mg1_loss(1.5, 1.0).unwrap();
        assert!((m.mu() - 4.0).abs() < 1e-12 && (m.mean() - 0.75).abs() < 1e-12);
        let mut r = stream(11, 0);
        let v: Vec<f64> = (0..40_000).map(|_| m.integrated_sample(50.0, &mut r).unwrap()).collect();
        let (mean, se) = mean_se(&v);
        assert!((mean - 37.5).abs() < 4.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn one_full_cycle_is_on_time() {
        let m = mg1_loss(1.5, 1.0).unwrap();
        let mut r = stream(2, 0);
        let mut p = m.draw_cycle(&mut r);
        let d = p.duration();
        assert!((p.integrate_window(0.0, d).unwrap() - p.total_mass()).abs() < 1e-12);
        assert!(p.total_mass() <= d);
    }

    #[test]
    fn stationary_mean_over_time() {
        let m = mg1_loss(1.5, 1.0).unwrap();
        let mut r = stream(3, 0);
        let times = [0.0, 25.0, 50.0];
        let mut cols = vec![vec![]; 3];
        for _ in 0..20_000 {
            let x = m.point_values(&times, &mut r).unwrap();
            for (c, v) in cols.iter_mut().zip(x) {
                c.push(v);
            }
        }
        for c in &cols {
            let (mean, se) = mean_se(c);
            assert!((mean - 0.75).abs() < 4.0 * se, "{mean} ± {se}");
        }
    }

    #[test]
    fn mg1_loss_covariance_decomposition() {
        let m = mg1_loss(1.5, 1.0).unwrap();
        let d = m.cov_decomposition(200.0, 0.05).unwrap();
        assert!((d.variance - 0.1875).abs() < 1e-9);
        assert!((d.cov[0] - d.variance).abs() < 1e-9);
        assert!((d.u[0] - 1.0).abs() < 1e-12);
        assert!(d.u.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert!(d.variation_bound_ok && d.z_nonnegative);
        assert!((d.c_x.unwrap() - 1.0 / 32.0).abs() < 1e-12);
        // decomposition constants: c*_z = 2·c_Z·μ_W, m = μ_W²
        assert!((d.c_star_z.unwrap() - 6.0).abs() < 1e-9);
        assert!((d.h_constant.unwrap() + 0.46875).abs() < 1e-9);
        let k = d.t.len() - 1;
        let scaled = d.cov[k] * d.t[k].sqrt();
        assert!((scaled * 32.0 - 1.0).abs() < 0.02, "t^0.5 Cov(200) = {scaled}");
        let sel: Vec<usize> = (0..d.t.len()).filter(|&i| d.t[i] >= 10.0).step_by(20).collect();
        let ts: Vec<f64> = sel.iter().map(|&i| d.t[i]).collect();
        let cs: Vec<f64> = sel.iter().map(|&i| d.cov[i]).collect();
        let fit = fit_scaling_exponent(&ts, &cs, None).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.02, "slope {}", fit.slope);
        let hk = d.h[k] * d.t[k].sqrt();
        assert!((hk / d.h_constant.unwrap() - 1.0).abs() < 0.05, "t^0.5 h = {hk}");
    }

    #[test]
    fn mc_covariance_matches_decomposition() {
        let m = mg1_loss(1.5, 1.0).unwrap();
        let d = m.cov_decomposition(20.0, 0.02).unwrap();
        let mut r = stream(5, 0);
        let lags = [1.0, 5.0, 20.0];
        let mut x0 = vec![];
        let mut xs = vec![vec![]; lags.len()];
        for _ in 0..60_000 {
            let mut times = vec![0.0];
            times.extend_from_slice(&lags);
            let v = m.point_values(&times, &mut r).unwrap();
            x0.push(v[0]);
            for (c, x) in xs.iter_mut().zip(&v[1..]) {
                c.push(*x);
            }
        }
        for (lag, col) in lags.iter().zip(&xs) {
            let (c, se) = covariance_se(&x0, col);
            let k = (lag / d.dt).round() as usize;
            assert!((c - d.cov[k]).abs() < 4.0 * se + 1e-3, "lag {lag}: {c} ± {se} vs {}", d.cov[k]);
        }
    }

    #[test]
    fn tilde_mass_is_centered() {
        let m = mg1_loss(1.5, 1.0).unwrap();
        let mut r = stream(8, 0);
        let v: Vec<f64> = (0..200_000).map(|_| m.tilde_mass_sample(&mut r)).collect();
        let (mean, se) = mean_se(&v);
        assert!(mean.abs() < 4.0 * se);
    }

    #[test]
    fn deterministic_service_busy_period() {
        let s = PositiveLaw::Constant { value: 0.5 };
        let mut r = stream(9, 0);
        let v: Vec<f64> = (0..200_000)
            .map(|_| sample_busy_period(&s, DEFAULT_EVENT_CAP, &mut r).unwrap().length)
            .collect();
        let (mean, se) = mean_se(&v);
        assert!((mean - 1.0).abs() < 4.0 * se, "{mean} ± {se}");
        assert!(sample_busy_period(&PositiveLaw::Constant { value: 1.0 }, 10, &mut r).is_err());
    }

    #[test]
    fn busy_period_cap_is_signalled() {
        let s = PositiveLaw::Constant { value: 0.99 };
        let mut r = stream(10, 0);
        let hit = (0..2000).any(|_| matches!(sample_busy_period(&s, 3, &mut r), Err(Error::Capacity(_))));
        assert!(hit);
    }

    #[test]
    fn busy_tail_constant() {
        let s = RegVaryingDist::pareto(1.5, 1.0 / 6.0).unwrap();
        assert!((s.mean() - 0.5).abs() < 1e-12);
        let c = busy_period_tail_constant(&s).unwrap();
        assert!((c - (1.0f64 / 6.0).powf(1.5) / 0.5f64.powf(2.5)).abs() < 1e-12);
    }

    #[test]
    fn mg1_loss_regimes() {
        let m = mg1_loss(1.5, 1.0).unwrap();
        let fast = m.regime_of(1.0).unwrap();
        assert_eq!(fast.kind, LimitKind::Fbs);
        assert!((fast.h - 1.25).abs() < 1e-12);
        let f = fast.fbs.unwrap();
        assert!((f.c_x - 1.0 / 32.0).abs() < 1e-12);
        assert!((f.c_w2 - (1.0 / 32.0) / (0.5 * 0.75)).abs() < 1e-12);
        let slow = m.regime_of(0.25).unwrap();
        assert_eq!(slow.kind, LimitKind::StableSheet);
        // W̃ right tail: P(Z_on − μ_on Z_off/μ·… > x) ~ c_on·(μ_off/μ)^α x^{−α}
        assert!((slow.c_plus.unwrap() - 0.25f64.powf(1.5)).abs() < 1e-12);
        assert_eq!(slow.c_minus.unwrap(), 0.0);
        let mid = m.regime_of(0.5).unwrap();
        assert_eq!(mid.kind, LimitKind::Intermediate);
        let t = mid.telecom.unwrap();
        assert!((t.prefactor - 0.25).abs() < 1e-12 && (t.intensity - 0.25).abs() < 1e-12);
    }

    #[test]
    fn exp_damped_regen_diverges_from_shot_noise() {
        let m = exp_damped_regen(1.5, 0.3).unwrap();
        let s = m.regime_of(0.25).unwrap();
        assert!((s.gamma0 - 0.5).abs() < 1e-12);
        assert!((s.alpha - 1.5).abs() < 1e-12);
        assert_eq!(s.c_plus.unwrap(), 0.0);
        let ratio = m.mu_w() / m.mu();
        assert!((s.c_minus.unwrap() - ratio.powf(1.5)).abs() < 1e-12);
        let mid = m.regime_of(0.5).unwrap();
        assert!((mid.telecom.unwrap().prefactor + ratio).abs() < 1e-12);
        let sn = crate::shot_noise::ShotNoiseSource::new(m.pulse.clone()).unwrap().regime_of(0.25).unwrap();
        assert!((sn.gamma0 - 0.8).abs() < 1e-12 && (sn.alpha - 1.8).abs() < 1e-12);
    }

    #[test]
    fn exp_damped_regen_left_tail() {
        let m = exp_damped_regen(1.5, 0.3).unwrap();
        let mut r = stream(12, 0);
        let v: Vec<f64> = (0..2_000_000).map(|_| m.tilde_mass_sample(&mut r)).collect();
        let x = 200.0;
        let left = v.iter().filter(|&&w| w < -x).count() as f64 / v.len() as f64;
        let right = v.iter().filter(|&&w| w > x).count() as f64 / v.len() as f64;
        let c_minus = (m.mu_w() / m.mu()).powf(1.5);
        let ratio = left * x.powf(1.5) / c_minus;
        assert!(ratio > 0.5 && ratio < 1.5, "{ratio}");
        assert!(right < left / 3.0, "{right} vs {left}");
    }

    #[test]
    fn renewal_reward_rules() {
        let cycle = RegVaryingDist::pareto(1.5, 1.0).unwrap();
        let indep = RegenModel::new(PulseModel::RenewalReward {
            cycle: cycle.clone(),
            reward: RewardLaw::Independent {
                law: BoundedLaw::TwoPoint { low: -1.0, high: 2.0, p_high: 0.5 },
            },
        })
        .unwrap();
        assert!(matches!(indep.regime_of(0.5), Err(Error::Hypothesis(_))));
        let s = indep.regime_of(0.25).unwrap();
        // Breiman generalization: c_± = c_Z·E(W − μ_W/μ)_±^α with μ_W/μ = E W = 0.5
        assert!((s.c_plus.unwrap() - 0.5 * 1.5f64.powf(1.5)).abs() < 1e-12);
        assert!((s.c_minus.unwrap() - 0.5 * 1.5f64.powf(1.5)).abs() < 1e-12);
        let coupled = RegenModel::new(PulseModel::RenewalReward {
            cycle,
            reward: RewardLaw::Coupled {
                coupling: Coupling::Decaying { level: 1.0, amp: 1.0, delta: 0.5 },
            },
        })
        .unwrap();
        let mid = coupled.regime_of(0.5).unwrap();
        assert!(mid.telecom.is_some());
    }

    #[test]
    fn renewal_reward_c_x_matches_decomposition() {
        let cycle = RegVaryingDist::pareto(1.5, 1.0).unwrap();
        let m = RegenModel::new(PulseModel::RenewalReward {
            cycle,
            reward: RewardLaw::Independent {
                law: BoundedLaw::Uniform { lo: 0.0, hi: 2.0 },
            },
        })
        .unwrap();
        let d = m.cov_decomposition(200.0, 0.05).unwrap();
        let k = d.t.len() - 1;
        let scaled = d.cov[k] * d.t[k].sqrt();
        assert!((scaled / d.c_x.unwrap() - 1.0).abs() < 0.03, "{scaled} vs {}", d.c_x.unwrap());
    }

    #[test]
    fn workload_excluded_from_limits() {
        let m = RegenModel::new(PulseModel::Workload {
            on: RegVaryingDist::pareto(3.5, 1.0).unwrap(),
            off: PositiveLaw::Exponential { rate: 1.0 },
        })
        .unwrap();
        assert!(matches!(m.regime_of(1.0), Err(_)));
        let mut r = stream(13, 0);
        assert!(m.integrated_sample(10.0, &mut r).unwrap() >= 0.0);
    }

    #[test]
    fn renewal_counts() {
        let c = RegVaryingDist::pareto(1.5, 1.0).unwrap();
        let mut r = stream(14, 0);
        let v: Vec<f64> = (0..50_000)
            .map(|_| stationary_renewal_count(&c, 30.0, &mut r).unwrap() as f64)
            .collect();
        let (mean, se) = mean_se(&v);
        assert!((mean - 10.0).abs() < 4.0 * se, "{mean} ± {se}");
    }
}
