//! Stationary Poisson shot-noise input `X(t) = Σ_j W_j(t − T_j)`.

use rand::Rng;

use crate::error::{ensure, invalid, Error, Result};
use crate::heavy_tail::{stable_params_from_tails, PositiveLaw, RegVaryingDist};
use crate::numeric::{gamma, hyp2f1, integrate, integrate_split};
use crate::pulses::{PulseModel, RealizedPulse, TruncatedMassMoments};
use crate::regime::{h_table, kind_of, FbsLimit, LimitKind, RegimeSpec, TelecomLimit};
use crate::rng::{normal, poisson, uniform};

#[derive(Debug, Clone, PartialEq)]
pub struct ShotNoiseSource {
    pub pulse: PulseModel,
    /// Arrival intensity; 1 for a single source, `m` for a superposition of `m` sources.
    pub rate: f64,
    mean_duration: f64,
}

/// Short-pulse Gaussian replacement used by [`ShotNoiseSource::integrated_path`].
///
/// Pulses that provably end inside their grid segment are summed as a normal
/// variable with the exact mean and variance of their compound Poisson total:
/// in the segment body `[τ_{k−1}, τ_k − c)` those of duration at most `c`, and in
/// the dyadic strips `[τ_k − c/2^j, τ_k − c/2^{j+1})` those of duration at most
/// `c/2^{j+1}`. Everything else is simulated pulse by pulse, as is any piece whose
/// expected number of replaced pulses is below `min_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkPlan {
    pub cutoff: f64,
    pub min_count: f64,
    /// `(cut, driver threshold, moments)` for `c, c/2, c/4, …` down to the smallest duration.
    levels: Vec<(f64, f64, TruncatedMassMoments)>,
}

impl ShotNoiseSource {
    pub fn new(pulse: PulseModel) -> Result<Self> {
        pulse.validate()?;
        let mean_duration = pulse.mean_duration();
        ensure(
            mean_duration.is_finite(),
            "duration",
            "E[D] is infinite; the stationary shot-noise needs a finite mean duration",
        )?;
        let src = ShotNoiseSource {
            pulse,
            rate: 1.0,
            mean_duration,
        };
        src.check_moments()?;
        Ok(src)
    }

    /// Superposition of `m` independent copies (rate `m`).
    pub fn with_rate(&self, m: f64) -> Self {
        ShotNoiseSource { rate: m, ..self.clone() }
    }

    pub fn mean_duration(&self) -> f64 {
        self.mean_duration
    }

    /// `∫₀^∞ (E|W| + E W²) dt < ∞`, per family.
    fn check_moments(&self) -> Result<()> {
        let d = self.pulse.driver();
        let a = d.alpha();
        match &self.pulse {
            PulseModel::RectIndep { amplitude, .. } => ensure(
                amplitude.moment(2.0).is_finite(),
                "amplitude",
                "E A² must be finite",
            ),
            PulseModel::RectCoupled { p, .. } => ensure(
                a > 2.0 - p,
                "length",
                format!("∫E W² = E R^(2−p) needs rho > 2 − p = {}, got {a}", 2.0 - p),
            ),
            PulseModel::ExpDamped { .. } | PulseModel::OnOff { .. } | PulseModel::RenewalReward { .. } => Ok(()),
            PulseModel::Brownian { .. } => ensure(a > 2.0, "duration", format!("∫E B² = E R²/2 needs rho > 2, got {a}")),
            PulseModel::Workload { .. } => ensure(a > 3.0, "on", format!("∫E W² = E Z³/3 needs alpha > 3, got {a}")),
        }
    }

    /// `E X = rate·E 𝒲`.
    pub fn mean_rate(&self) -> Result<f64> {
        Ok(self.rate * self.pulse.mean_mass()?)
    }

    pub fn bulk_plan(&self, cutoff: f64, min_count: f64) -> Result<BulkPlan> {
        ensure(cutoff > 0.0 && cutoff.is_finite(), "cutoff", "must be positive")?;
        let floor = self.min_duration();
        let mut levels = Vec::new();
        let mut cut = cutoff;
        loop {
            let driver_cut = self
                .pulse
                .driver_at_duration(cut)
                .ok_or_else(|| invalid("pulse", "bulk mode needs a duration determined by the driver"))?;
            let moments = self
                .pulse
                .truncated_mass_moments(cut)
                .ok_or_else(|| invalid("pulse", "bulk mode not available for this family"))?;
            levels.push((cut, driver_cut, moments));
            if cut <= floor || levels.len() >= 60 {
                break;
            }
            cut /= 2.0;
        }
        Ok(BulkPlan {
            cutoff,
            min_count,
            levels,
        })
    }

    /// Pulses started uniformly in `[lo, lo + len)`: those with driver at most `driver_cut` enter a
    /// normal total added to segment `k`, the rest are simulated. Falls back to exact simulation
    /// when too few pulses would be replaced.
    #[allow(clippy::too_many_arguments)]
    fn bulk_piece<R: Rng + ?Sized>(
        &self,
        lo: f64,
        len: f64,
        level: Option<&(f64, f64, TruncatedMassMoments)>,
        min_count: f64,
        times: &[f64],
        k: usize,
        inc: &mut [f64],
        rng: &mut R,
    ) {
        let m = self.rate * len;
        match level.filter(|l| m * l.2.prob >= min_count) {
            Some(&(_, driver_cut, mo)) => {
                inc[k] += m * mo.m1 + (m * mo.m2).sqrt() * normal(rng);
                for _ in 0..poisson(rng, m * (1.0 - mo.prob)) {
                    let s = lo + uniform(rng) * len;
                    let mut p = self.pulse.draw_pulse_conditioned(driver_cut, true, rng);
                    Self::spread(&mut p, s, times, k, inc);
                }
            }
            None => {
                for _ in 0..poisson(rng, m) {
                    let s = lo + uniform(rng) * len;
                    let mut p = self.pulse.draw_pulse(rng);
                    Self::spread(&mut p, s, times, k, inc);
                }
            }
        }
    }

    /// Adds the window integrals of a pulse started at absolute time `start` to segment increments from `k0` on.
    fn spread(pulse: &mut RealizedPulse, start: f64, times: &[f64], k0: usize, inc: &mut [f64]) {
        let dur = pulse.duration();
        let mut lo = if k0 == 0 { 0.0f64 } else { times[k0 - 1] }.max(start);
        for k in k0..times.len() {
            let hi = times[k];
            if hi > lo {
                inc[k] += pulse.window(lo - start, hi - start);
            }
            lo = hi;
            if lo - start >= dur {
                break;
            }
        }
    }

    /// Exact joint draw of `∫₀^{τ_k} X` for increasing `times`.
    pub fn integrated_path<R: Rng + ?Sized>(&self, times: &[f64], plan: Option<&BulkPlan>, rng: &mut R) -> Result<Vec<f64>> {
        ensure(!times.is_empty() && times[0] > 0.0, "times", "need positive times")?;
        ensure(times.windows(2).all(|w| w[1] > w[0]), "times", "must be strictly increasing")?;
        let mut inc = vec![0.0; times.len()];
        // pulses already active at time 0
        for _ in 0..poisson(rng, self.rate * self.mean_duration) {
            let mut p = self.pulse.draw_length_biased(rng)?;
            let age = uniform(rng) * p.duration();
            Self::spread(&mut p, -age, times, 0, &mut inc);
        }
        let mut prev = 0.0;
        for k in 0..times.len() {
            let len = times[k] - prev;
            match plan.filter(|b| len > b.cutoff) {
                None => self.bulk_piece(prev, len, None, 0.0, times, k, &mut inc, rng),
                Some(b) => {
                    let body = len - b.cutoff;
                    self.bulk_piece(prev, body, b.levels.first(), b.min_count, times, k, &mut inc, rng);
                    // strip j covers distances (c/2^{j+1}, c/2^j] before τ_k
                    let mut hi = b.cutoff;
                    for level in b.levels.iter().skip(1) {
                        let width = hi - level.0;
                        self.bulk_piece(times[k] - hi, width, Some(level), b.min_count, times, k, &mut inc, rng);
                        hi = level.0;
                    }
                    self.bulk_piece(times[k] - hi, hi, None, 0.0, times, k, &mut inc, rng);
                }
            }
            prev = times[k];
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
        Ok(self.integrated_path(&[t], None, rng)?[0])
    }

    /// `∫_a^{a+T} X(t) dt` from a process started at 0; equal in law to [`Self::integrated_sample`].
    pub fn integrated_sample_shifted<R: Rng + ?Sized>(&self, t: f64, shift: f64, rng: &mut R) -> Result<f64> {
        ensure(t > 0.0 && shift >= 0.0, "T", "need T > 0 and shift >= 0")?;
        if shift == 0.0 {
            return self.integrated_sample(t, rng);
        }
        let path = self.integrated_path(&[shift, shift + t], None, rng)?;
        Ok(path[1] - path[0])
    }

    /// `X(τ)` at the given nonnegative times, jointly.
    pub fn point_values<R: Rng + ?Sized>(&self, times: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        ensure(times.iter().all(|&t| t >= 0.0), "times", "must be nonnegative")?;
        let t_max = times.iter().cloned().fold(0.0, f64::max);
        let mut out = vec![0.0; times.len()];
        for _ in 0..poisson(rng, self.rate * self.mean_duration) {
            let mut p = self.pulse.draw_length_biased(rng)?;
            let age = uniform(rng) * p.duration();
            for (o, &t) in out.iter_mut().zip(times) {
                *o += p.value(t + age);
            }
        }
        if t_max > 0.0 {
            for _ in 0..poisson(rng, self.rate * t_max) {
                let s = uniform(rng) * t_max;
                let mut p = self.pulse.draw_pulse(rng);
                for (o, &t) in out.iter_mut().zip(times) {
                    if t > s {
                        *o += p.value(t - s);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Smallest possible duration, where the kernel has a kink.
    fn min_duration(&self) -> f64 {
        let x = self.pulse.driver().x_min();
        match self.pulse {
            PulseModel::RectCoupled { p, .. } => x.powf(p),
            _ => x,
        }
    }

    /// `Cov(X(0), X(t)) = rate·∫₀^∞ E[W(u)W(u+t)] du`.
    pub fn covariance_oracle(&self, t: f64) -> Result<f64> {
        ensure(t >= 0.0, "t", "lag must be nonnegative")?;
        let d = self.pulse.driver();
        let v = match &self.pulse {
            PulseModel::RectIndep { amplitude, duration } => amplitude.moment(2.0) * duration.integrated_survival(t),
            PulseModel::OnOff { on, .. } => on.integrated_survival(t),
            PulseModel::Brownian { duration } => duration.integrated_survival2(t),
            _ => {
                let kink = (self.min_duration() - t).max(0.0);
                let mut pts = vec![0.0];
                if kink > 0.0 {
                    pts.push(kink);
                }
                if d.x_min() - t > kink {
                    pts.push(d.x_min() - t);
                }
                integrate_split(|u| self.pulse.corr_kernel(u, t), &pts)?
            }
        };
        Ok(self.rate * v)
    }

    /// `Var ∫₀^T X = 2∫₀^T (T − t) Cov(t) dt`.
    pub fn variance_oracle(&self, t: f64) -> Result<f64> {
        ensure(t > 0.0, "T", "must be positive")?;
        if let PulseModel::RectIndep { amplitude, duration } = &self.pulse {
            // E A²·E[T·m² − m³/3 + (R − T)₊·T²]-type closed form, m = R ∧ T
            let s = duration.survival(t);
            let below = t * duration.partial_moment(2, 0.0, t) - duration.partial_moment(3, 0.0, t) / 3.0;
            let above = t * t * (duration.mean() - duration.partial_moment(1, 0.0, t)) - t.powi(3) / 3.0 * s;
            return Ok(self.rate * amplitude.moment(2.0) * (below + above));
        }
        let mut cuts = vec![0.0];
        let m = self.min_duration();
        if m < t {
            cuts.push(m);
        }
        cuts.push(t);
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            acc += integrate(|s| (t - s) * self.covariance_oracle(s).unwrap_or(f64::NAN), w[0], w[1])?;
        }
        Ok(2.0 * acc)
    }

    /// Predicted scaling regime of the aggregate at connection-rate exponent `gamma`.
    pub fn regime_of(&self, gamma: f64) -> Result<RegimeSpec> {
        ensure(gamma > 0.0 && gamma.is_finite(), "gamma", "must be positive")?;
        let d = self.pulse.driver();
        let (rho, c_rho) = (d.alpha(), d.tail_constant());
        let mut notes = Vec::new();
        let spec = match &self.pulse {
            PulseModel::RectIndep { amplitude, .. } => {
                window(rho > 1.0 && rho < 2.0, "rho", "need 1 < rho < 2", rho)?;
                let g0 = rho - 1.0;
                let h1 = (3.0 - rho) / 2.0;
                let c_x = c_rho * amplitude.moment(2.0) / (rho - 1.0);
                let c_plus = c_rho * amplitude.moment(rho);
                RegimeSpec {
                    gamma,
                    gamma0: g0,
                    alpha: rho,
                    h: h_table(gamma, g0, |g| (3.0 + g - rho) / 2.0, 1.0, |g| (1.0 + g) / rho),
                    kind: kind_of(gamma, g0),
                    fbs: Some(FbsLimit::new(h1, c_x)),
                    c_plus: Some(c_plus),
                    c_minus: Some(0.0),
                    stable: Some(stable_params_from_tails(rho, c_plus, 0.0)?),
                    telecom: Some(TelecomLimit {
                        alpha: rho,
                        intensity: c_rho,
                        prefactor: 1.0,
                        amplitude: match amplitude {
                            PositiveLaw::Constant { value } if *value == 1.0 => None,
                            a => Some(a.clone()),
                        },
                    }),
                    notes,
                }
            }
            PulseModel::RectCoupled { p, .. } => {
                let p = *p;
                window(rho > 1.0 && rho < 2.0, "rho", "need 1 < rho < 2", rho)?;
                let g0 = rho / p - 1.0;
                let h1 = (2.0 + p - rho) / (2.0 * p);
                let fbs = if rho > 2.0 - p {
                    Some(FbsLimit::new(h1, rho * c_rho * p / ((rho + p - 2.0) * (rho + 2.0 * p - 2.0))))
                } else {
                    notes.push("Gaussian-branch constant outside 2 − p < rho; not provided".into());
                    None
                };
                let telecom = if p == 1.0 {
                    Some(TelecomLimit {
                        alpha: rho,
                        intensity: c_rho,
                        prefactor: 1.0,
                        amplitude: None,
                    })
                } else {
                    notes.push("intermediate limit for p < 1 is not a Telecom RF; no oracle".into());
                    None
                };
                RegimeSpec {
                    gamma,
                    gamma0: g0,
                    alpha: rho,
                    h: h_table(gamma, g0, |g| g / 2.0 + h1, 1.0 / p, |g| (1.0 + g) / rho),
                    kind: kind_of(gamma, g0),
                    fbs,
                    c_plus: Some(c_rho),
                    c_minus: Some(0.0),
                    stable: Some(stable_params_from_tails(rho, c_rho, 0.0)?),
                    telecom,
                    notes,
                }
            }
            PulseModel::ExpDamped { rate, .. } => {
                let (kappa, c_kappa) = rate
                    .small_ball()
                    .ok_or_else(|| invalid("rate", "need P(A <= a) ~ c_kappa a^kappa with known constants"))?;
                let a = rho + kappa;
                window(rho > 1.0 && a < 2.0, "rho+kappa", "need rho > 1 and 1 < rho + kappa < 2", a)?;
                let g0 = a - 1.0;
                let h1 = (3.0 - a) / 2.0;
                let c_x = gamma_fn(kappa + 1.0) * c_kappa * c_rho * hyp2f1(kappa, 1.0, kappa + rho, -1.0) / (a - 1.0);
                // κ∫₀¹(1−u)^{a−1}(ln 1/u)^{−ρ}du; with 1−u = w^{1/κ} the (1−u)^{κ−1}
                // endpoint singularity disappears
                let c_plus = c_rho
                    * c_kappa
                    * integrate(
                        |w| {
                            let v = w.powf(1.0 / kappa);
                            if v <= 0.0 {
                                1.0
                            } else {
                                (v / -(-v).ln_1p()).powf(rho)
                            }
                        },
                        0.0,
                        1.0,
                    )?;
                notes.push("intermediate limit is not a Telecom RF; no oracle".into());
                RegimeSpec {
                    gamma,
                    gamma0: g0,
                    alpha: a,
                    h: h_table(gamma, g0, |g| (g + 3.0 - a) / 2.0, 1.0, |g| (1.0 + g) / a),
                    kind: kind_of(gamma, g0),
                    fbs: Some(FbsLimit::new(h1, c_x)),
                    c_plus: Some(c_plus),
                    c_minus: Some(0.0),
                    stable: Some(stable_params_from_tails(a, c_plus, 0.0)?),
                    telecom: None,
                    notes,
                }
            }
            PulseModel::Brownian { .. } => {
                window(rho > 2.0 && rho < 3.0, "rho", "need 2 < rho < 3", rho)?;
                let a = 2.0 * rho / 3.0;
                let g0 = rho - 1.0;
                let h1 = 2.0 - rho / 2.0;
                let c_x = c_rho / ((rho - 1.0) * (rho - 2.0));
                let abs_moment = 2f64.powf(a / 2.0) * gamma_fn((a + 1.0) / 2.0) / std::f64::consts::PI.sqrt();
                let c_pm = 0.5 * c_rho * abs_moment * 3f64.powf(-rho / 3.0);
                notes.push("intermediate limit is not a Telecom RF; no oracle".into());
                RegimeSpec {
                    gamma,
                    gamma0: g0,
                    alpha: a,
                    h: h_table(gamma, g0, |g| g / 2.0 + h1, 1.5, |g| (1.0 + g) / a),
                    kind: kind_of(gamma, g0),
                    fbs: Some(FbsLimit::new(h1, c_x)),
                    c_plus: Some(c_pm),
                    c_minus: Some(c_pm),
                    stable: Some(stable_params_from_tails(a, c_pm, c_pm)?),
                    telecom: None,
                    notes,
                }
            }
            other => {
                return Err(Error::Hypothesis(format!(
                    "no shot-noise regime table for the {} family",
                    other.family()
                )))
            }
        };
        spec.validate_h_range()?;
        Ok(spec)
    }
}

fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

fn window(ok: bool, field: &'static str, what: &str, got: f64) -> Result<()> {
    ensure(ok, field, format!("{what}, got {got}"))
}

/// Convenience constructor for the M/G/∞ input of rectangular pulses with unit rate.
pub fn mg_infinity(alpha: f64, x_min: f64) -> Result<ShotNoiseSource> {
    ShotNoiseSource::new(PulseModel::RectIndep {
        amplitude: PositiveLaw::Constant { value: 1.0 },
        duration: RegVaryingDist::pareto(alpha, x_min)?,
    })
}

impl LimitKind {
    pub fn verdict_name(self) -> &'static str {
        match self {
            LimitKind::Fbs => "FBS-consistent",
            LimitKind::StableSheet => "stable-consistent",
            LimitKind::Intermediate => "Telecom-consistent",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{mean_se, variance_se};
    use crate::rng::stream;

    fn ex3() -> ShotNoiseSource {
        mg_infinity(1.5, 1.0).unwrap()
    }

    #[test]
    fn rect_covariance_closed_form() {
        let s = ex3();
        assert!((s.covariance_oracle(4.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((s.covariance_oracle(0.5).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rect_variance_matches_quadrature() {
        let s = ex3();
        let t: f64 = 64.0;
        let exact = 16.0 / 3.0 * t.powf(1.5) - 3.0 * t + 1.0 / 3.0;
        assert!((s.variance_oracle(t).unwrap() - exact).abs() < 1e-9 * exact);
        let q = 2.0 * integrate(|u| (t - u) * s.covariance_oracle(u).unwrap(), 0.0, 1.0).unwrap()
            + 2.0 * integrate(|u| (t - u) * s.covariance_oracle(u).unwrap(), 1.0, t).unwrap();
        assert!((q - exact).abs() < 1e-7 * exact);
    }

    #[test]
    fn mean_at_t10() {
        let s = ex3();
        let v: Vec<f64> = (0..100_000u64)
            .map(|i| s.integrated_sample(10.0, &mut stream(77, i)).unwrap())
            .collect();
        let (m, se) = mean_se(&v);
        assert!((m - 30.0).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn variance_at_t64() {
        let s = ex3();
        let v: Vec<f64> = (0..100_000u64)
            .map(|i| s.integrated_sample(64.0, &mut stream(78, i)).unwrap())
            .collect();
        let (var, se) = variance_se(&v);
        let exact = s.variance_oracle(64.0).unwrap();
        // the heavy tail makes the variance estimate skewed; allow a wider band
        assert!((var - exact).abs() < 4.0 * se, "{var} ± {se} vs {exact}");
    }

    #[test]
    fn bulk_mode_moments() {
        let s = ex3();
        let plan = s.bulk_plan(8.0, 50.0).unwrap();
        let t = 400.0;
        let v: Vec<f64> = (0..40_000u64)
            .map(|i| s.integrated_path(&[t], Some(&plan), &mut stream(79, i)).unwrap()[0])
            .collect();
        let (m, se) = mean_se(&v);
        assert!((m - 3.0 * t).abs() < 3.5 * se, "{m} ± {se}");
        let (var, vse) = variance_se(&v);
        let exact = s.variance_oracle(t).unwrap();
        assert!((var - exact).abs() < 4.0 * vse, "{var} ± {vse} vs {exact}");
    }

    #[test]
    fn regime_examples() {
        let s = ex3();
        let r = s.regime_of(1.0).unwrap();
        assert_eq!(r.kind, LimitKind::Fbs);
        assert!((r.gamma0 - 0.5).abs() < 1e-15 && (r.h - 1.25).abs() < 1e-15);
        assert!((r.fbs.unwrap().c_x - 2.0).abs() < 1e-12);
        assert!((r.fbs.unwrap().c_w2 - 16.0 / 3.0).abs() < 1e-12);

        let c = ShotNoiseSource::new(PulseModel::RectCoupled {
            length: RegVaryingDist::pareto(1.5, 1.0).unwrap(),
            p: 0.75,
        })
        .unwrap();
        let r = c.regime_of(0.5).unwrap();
        assert_eq!(r.kind, LimitKind::StableSheet);
        assert!((r.gamma0 - 1.0).abs() < 1e-15 && (r.h - 1.0).abs() < 1e-15);

        let e = ShotNoiseSource::new(PulseModel::ExpDamped {
            rate: PositiveLaw::PowerUnit { kappa: 0.5 },
            duration: RegVaryingDist::pareto(1.2, 1.0).unwrap(),
        })
        .unwrap();
        let r = e.regime_of(0.7).unwrap();
        assert_eq!(r.kind, LimitKind::Intermediate);
        assert!((r.h - 1.0).abs() < 1e-15);
    }

    #[test]
    fn regime_continuity_at_gamma0() {
        let srcs = [
            ex3(),
            ShotNoiseSource::new(PulseModel::RectCoupled {
                length: RegVaryingDist::pareto(1.5, 1.0).unwrap(),
                p: 0.75,
            })
            .unwrap(),
            ShotNoiseSource::new(PulseModel::ExpDamped {
                rate: PositiveLaw::PowerUnit { kappa: 0.5 },
                duration: RegVaryingDist::pareto(1.2, 1.0).unwrap(),
            })
            .unwrap(),
            ShotNoiseSource::new(PulseModel::Brownian {
                duration: RegVaryingDist::pareto(2.5, 1.0).unwrap(),
            })
            .unwrap(),
        ];
        for s in &srcs {
            let g0 = s.regime_of(1.0).unwrap().gamma0;
            let lo = s.regime_of(g0 - 1e-10).unwrap().h;
            let hi = s.regime_of(g0 + 1e-10).unwrap().h;
            let at = s.regime_of(g0).unwrap().h;
            assert!((lo - hi).abs() <= 1e-9 && (lo - at).abs() <= 1e-9, "{}", s.pulse.family());
        }
    }

    #[test]
    fn exp_damped_covariance_asymptote() {
        let (rho, kappa) = (1.2, 0.5);
        let e = ShotNoiseSource::new(PulseModel::ExpDamped {
            rate: PositiveLaw::PowerUnit { kappa },
            duration: RegVaryingDist::pareto(rho, 1.0).unwrap(),
        })
        .unwrap();
        let c_x = e.regime_of(1.0).unwrap().fbs.unwrap().c_x;
        let t: f64 = 1e5;
        let v = e.covariance_oracle(t).unwrap() * t.powf(rho + kappa - 1.0);
        assert!((v / c_x - 1.0).abs() < 0.01, "{v} vs {c_x}");
    }

    #[test]
    fn brownian_covariance_asymptote() {
        let b = ShotNoiseSource::new(PulseModel::Brownian {
            duration: RegVaryingDist::pareto(2.5, 1.0).unwrap(),
        })
        .unwrap();
        let c_x = b.regime_of(2.0).unwrap().fbs.unwrap().c_x;
        assert!((c_x - 1.0 / (1.5 * 0.5)).abs() < 1e-12);
        let t: f64 = 1e4;
        let v = b.covariance_oracle(t).unwrap() * t.powf(2.5 - 2.0);
        assert!((v / c_x - 1.0).abs() < 1e-3, "{v} vs {c_x}");
    }

    #[test]
    fn out_of_window_rejected() {
        let s = mg_infinity(2.5, 1.0).unwrap();
        let e = s.regime_of(1.0).unwrap_err().to_string();
        assert!(e.contains("rho"), "{e}");
    }
}
