//! The aggregate field `A_{λ,γ}(x, y) = Σ_{i ≤ ⌊yλ^γ⌋} ∫₀^{λx} X_i(t) dt`, centered and normalized.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Error, Result};
use crate::pulses::PulseModel;
use crate::regenerative::RegenModel;
use crate::regime::RegimeSpec;
use crate::rng::{derive_seed, stream, RngStream};
use crate::shot_noise::{BulkPlan, ShotNoiseSource};

/// Class (I) or class (II) input.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceModel {
    ShotNoise(ShotNoiseSource),
    Regenerative(RegenModel),
}

impl SourceModel {
    pub fn shot_noise(pulse: PulseModel) -> Result<Self> {
        Ok(SourceModel::ShotNoise(ShotNoiseSource::new(pulse)?))
    }

    pub fn regenerative(pulse: PulseModel) -> Result<Self> {
        Ok(SourceModel::Regenerative(RegenModel::new(pulse)?))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SourceModel::ShotNoise(_) => "shot-noise",
            SourceModel::Regenerative(_) => "regenerative",
        }
    }

    pub fn pulse(&self) -> &PulseModel {
        match self {
            SourceModel::ShotNoise(s) => &s.pulse,
            SourceModel::Regenerative(r) => &r.pulse,
        }
    }

    /// `E X(t)` of a single source.
    pub fn mean(&self) -> Result<f64> {
        match self {
            SourceModel::ShotNoise(s) => s.with_rate(1.0).mean_rate(),
            SourceModel::Regenerative(r) => Ok(r.mean()),
        }
    }

    pub fn regime_of(&self, gamma: f64) -> Result<RegimeSpec> {
        match self {
            SourceModel::ShotNoise(s) => s.regime_of(gamma),
            SourceModel::Regenerative(r) => r.regime_of(gamma),
        }
    }

    /// `X(τ)` of one stationary source at nonnegative times, jointly.
    pub fn point_values<R: Rng + ?Sized>(&self, times: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        match self {
            SourceModel::ShotNoise(s) => s.with_rate(1.0).point_values(times, rng),
            SourceModel::Regenerative(r) => r.point_values(times, rng),
        }
    }

    /// `∫₀^{τ_k} Σ_{i ≤ m} X_i` for `m` independent sources.
    fn block_path<R: Rng + ?Sized>(&self, m: u64, times: &[f64], plan: Option<&BulkPlan>, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            SourceModel::ShotNoise(s) => s.with_rate(m as f64).integrated_path(times, plan, rng),
            SourceModel::Regenerative(r) => {
                let mut acc = vec![0.0; times.len()];
                for _ in 0..m {
                    for (a, v) in acc.iter_mut().zip(r.integrated_path(times, rng)?) {
                        *a += v;
                    }
                }
                Ok(acc)
            }
        }
    }
}

/// Short-pulse Gaussian acceleration for shot-noise aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkOptions {
    /// Cutoff as a fraction of `λ`.
    pub cutoff_fraction: f64,
    pub min_count: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregateOptions {
    #[serde(default)]
    pub bulk: Option<BulkOptions>,
}

/// Replicates of `λ^{−H}(A_{λ,γ}(x, y) − E A_{λ,γ}(x, y))` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSample {
    pub lambda: f64,
    pub gamma: f64,
    pub h: f64,
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    /// `⌊yλ^γ⌋` for each y.
    pub sources: Vec<u64>,
    /// `values[r][iy·nx + ix]`.
    pub values: Vec<Vec<f64>>,
    pub bulk: Option<BulkOptions>,
}

/// Upper bound on stored values (replicates × grid points).
pub const MAX_VALUES: usize = 50_000_000;

/// Stream of replicate `rep` of an aggregate run keyed by `seed`.
pub fn replicate_stream(seed: u64, rep: u64) -> RngStream {
    stream(derive_seed(seed, &[0x4147_4752]), rep)
}

fn increasing_positive(v: &[f64], field: &'static str) -> Result<()> {
    ensure(!v.is_empty(), field, "grid must not be empty")?;
    ensure(v[0] > 0.0 && v.iter().all(|x| x.is_finite()), field, "grid values must be positive and finite")?;
    ensure(v.windows(2).all(|w| w[1] > w[0]), field, "grid must be strictly increasing")
}

/// Source count `⌊yλ^γ⌋`, with a relative guard against rounding just below an integer.
pub fn source_count(y: f64, lambda: f64, gamma: f64) -> u64 {
    let m = y * lambda.powf(gamma);
    (m * (1.0 + 1e-12)).floor() as u64
}

/// Simulate the normalized aggregate on `x_grid × y_grid`.
#[allow(clippy::too_many_arguments)]
pub fn aggregate(
    src: &SourceModel,
    lambda: f64,
    gamma: f64,
    h: f64,
    x_grid: &[f64],
    y_grid: &[f64],
    n_rep: usize,
    seed: u64,
    opts: &AggregateOptions,
) -> Result<AggregateSample> {
    ensure(lambda > 0.0 && lambda.is_finite(), "lambda", "must be positive")?;
    ensure(gamma > 0.0 && gamma.is_finite(), "gamma", "must be positive")?;
    ensure(h.is_finite(), "h", "must be finite")?;
    ensure(n_rep >= 1, "n_rep", "need at least one replicate")?;
    increasing_positive(x_grid, "x_grid")?;
    increasing_positive(y_grid, "y_grid")?;
    let (nx, ny) = (x_grid.len(), y_grid.len());
    let stored = n_rep.saturating_mul(nx).saturating_mul(ny);
    if stored > MAX_VALUES {
        return Err(Error::Capacity(format!("{stored} values exceed the limit of {MAX_VALUES}")));
    }
    let sources: Vec<u64> = y_grid.iter().map(|&y| source_count(y, lambda, gamma)).collect();
    let times: Vec<f64> = x_grid.iter().map(|x| lambda * x).collect();
    let ex = src.mean()?;
    let plan = match (opts.bulk, src) {
        (Some(b), SourceModel::ShotNoise(s)) => {
            ensure(b.cutoff_fraction > 0.0, "cutoff_fraction", "must be positive")?;
            Some(s.bulk_plan(b.cutoff_fraction * lambda, b.min_count)?)
        }
        (Some(_), SourceModel::Regenerative(_)) => {
            return Err(invalid("bulk", "the bulk accelerator applies to shot-noise sources only"))
        }
        (None, _) => None,
    };
    let norm = lambda.powf(-h);
    let values = (0..n_rep as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_stream(seed, rep);
            let mut out = vec![0.0; nx * ny];
            let mut acc = vec![0.0; nx];
            let mut m_prev = 0u64;
            for (iy, &m) in sources.iter().enumerate() {
                if m > m_prev {
                    let block = src.block_path(m - m_prev, &times, plan.as_ref(), &mut rng)?;
                    for (a, b) in acc.iter_mut().zip(block) {
                        *a += b;
                    }
                }
                m_prev = m;
                for ix in 0..nx {
                    out[iy * nx + ix] = (acc[ix] - times[ix] * m as f64 * ex) * norm;
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AggregateSample {
        lambda,
        gamma,
        h,
        x_grid: x_grid.to_vec(),
        y_grid: y_grid.to_vec(),
        sources,
        values,
        bulk: opts.bulk,
    })
}

impl AggregateSample {
    pub fn n_rep(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, rep: usize, ix: usize, iy: usize) -> f64 {
        self.values[rep][iy * self.x_grid.len() + ix]
    }

    /// Replicate vector at grid point `(x_grid[ix], y_grid[iy])`.
    pub fn column(&self, ix: usize, iy: usize) -> Vec<f64> {
        (0..self.n_rep()).map(|r| self.get(r, ix, iy)).collect()
    }

    /// Index of `v` in `grid`, with 0 standing for the field's zero boundary.
    fn locate(grid: &[f64], v: f64, field: &'static str) -> Result<Option<usize>> {
        if v == 0.0 {
            return Ok(None);
        }
        grid.iter()
            .position(|&g| (g - v).abs() <= 1e-12 * g.abs().max(1.0))
            .map(Some)
            .ok_or_else(|| invalid(field, format!("{v} is not a grid point")))
    }

    fn at(&self, rep: usize, ix: Option<usize>, iy: Option<usize>) -> f64 {
        match (ix, iy) {
            (Some(i), Some(j)) => self.get(rep, i, j),
            _ => 0.0,
        }
    }
}

/// Rectangular increment `V((x0, x1] × (y0, y1])` per replicate.
pub fn rect_increment(sample: &AggregateSample, x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Vec<f64>> {
    ensure(x0 <= x1 && y0 <= y1, "rectangle", "need x0 <= x1 and y0 <= y1")?;
    let i0 = AggregateSample::locate(&sample.x_grid, x0, "x0")?;
    let i1 = AggregateSample::locate(&sample.x_grid, x1, "x1")?;
    let j0 = AggregateSample::locate(&sample.y_grid, y0, "y0")?;
    let j1 = AggregateSample::locate(&sample.y_grid, y1, "y1")?;
    Ok((0..sample.n_rep())
        .map(|r| {
            sample.at(r, i1, j1) - sample.at(r, i0, j1) - sample.at(r, i1, j0) + sample.at(r, i0, j0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{covariance_se, ks_two_sample, mean_se, variance_se};
    use crate::heavy_tail::{PositiveLaw, RegVaryingDist};
    use crate::regenerative::mg1_loss;
    use crate::shot_noise::mg_infinity;

    fn ex3() -> SourceModel {
        SourceModel::ShotNoise(mg_infinity(1.5, 1.0).unwrap())
    }

    #[test]
    fn zero_pulse_gives_zero_field() {
        let src = SourceModel::shot_noise(PulseModel::RectIndep {
            amplitude: PositiveLaw::Constant { value: 0.0 },
            duration: RegVaryingDist::pareto(1.5, 1.0).unwrap(),
        })
        .unwrap();
        let s = aggregate(&src, 16.0, 1.0, 1.0, &[0.5, 1.0], &[0.5, 1.0], 3, 1, &AggregateOptions::default()).unwrap();
        assert!(s.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn single_source_matches_integrated_sample() {
        let seed = 42;
        for src in [ex3(), SourceModel::Regenerative(mg1_loss(1.5, 1.0).unwrap())] {
            let s = aggregate(&src, 10.0, 0.5, 1.0, &[1.0], &[0.4], 1, seed, &AggregateOptions::default()).unwrap();
            assert_eq!(s.sources, vec![1]);
            let mut r = replicate_stream(seed, 0);
            let direct = match &src {
                SourceModel::ShotNoise(sn) => sn.integrated_sample(10.0, &mut r).unwrap(),
                SourceModel::Regenerative(rg) => rg.integrated_sample(10.0, &mut r).unwrap(),
            };
            let centered = (direct - 10.0 * src.mean().unwrap()) / 10.0;
            assert_eq!(s.values[0][0], centered);
        }
    }

    #[test]
    fn prefix_structure_is_exact() {
        let src = ex3();
        let opts = AggregateOptions::default();
        let full = aggregate(&src, 32.0, 0.5, 1.0, &[0.5, 1.0], &[0.25, 0.5, 1.0], 4, 7, &opts).unwrap();
        let cut = aggregate(&src, 32.0, 0.5, 1.0, &[0.5, 1.0], &[0.25, 0.5], 4, 7, &opts).unwrap();
        for r in 0..4 {
            for iy in 0..2 {
                for ix in 0..2 {
                    assert_eq!(full.get(r, ix, iy), cut.get(r, ix, iy));
                }
            }
        }
    }

    #[test]
    fn centering_and_fast_variance() {
        // rectangle pulses, fast regime: Var λ^{−H} A(1,1) = λ^{γ−2H} Var ∫₀^λ X, exact oracle
        let src = ex3();
        let (lambda, gamma) = (64.0, 1.0);
        let h = (3.0 + gamma - 1.5) / 2.0;
        let s = aggregate(&src, lambda, gamma, h, &[1.0], &[1.0], 4000, 3, &AggregateOptions::default()).unwrap();
        let v = s.column(0, 0);
        let (m, se) = mean_se(&v);
        assert!(m.abs() < 4.0 * se, "{m} ± {se}");
        let SourceModel::ShotNoise(sn) = &src else { unreachable!() };
        let oracle = 64.0 * sn.variance_oracle(lambda).unwrap() * lambda.powf(-2.0 * h);
        let (var, vse) = variance_se(&v);
        assert!((var - oracle).abs() < 4.0 * vse, "{var} ± {vse} vs {oracle}");
    }

    #[test]
    fn bulk_mode_preserves_moments() {
        let src = ex3();
        let (lambda, gamma) = (256.0, 1.0);
        let h = 1.25;
        let opts = AggregateOptions {
            bulk: Some(BulkOptions {
                cutoff_fraction: 1.0 / 16.0,
                min_count: 50.0,
            }),
        };
        let s = aggregate(&src, lambda, gamma, h, &[0.5, 1.0], &[1.0], 2000, 5, &opts).unwrap();
        let v = s.column(1, 0);
        let SourceModel::ShotNoise(sn) = &src else { unreachable!() };
        let oracle = lambda.powf(gamma) * sn.variance_oracle(lambda).unwrap() * lambda.powf(-2.0 * h);
        let (var, vse) = variance_se(&v);
        assert!((var - oracle).abs() < 4.0 * vse, "{var} ± {vse} vs {oracle}");
        assert!(mean_se(&v).0.abs() < 4.0 * mean_se(&v).1);
    }

    #[test]
    fn increments() {
        let src = ex3();
        let s = aggregate(&src, 32.0, 1.0, 1.25, &[1.0, 2.0], &[0.5, 1.0], 3000, 9, &AggregateOptions::default()).unwrap();
        assert!(rect_increment(&s, 1.0, 1.0, 0.0, 1.0).unwrap().iter().all(|&v| v == 0.0));
        assert!(rect_increment(&s, 0.0, 1.5, 0.0, 1.0).is_err());
        let lower = rect_increment(&s, 0.0, 1.0, 0.0, 0.5).unwrap();
        let upper = rect_increment(&s, 1.0, 2.0, 0.5, 1.0).unwrap();
        let (c, se) = covariance_se(&lower, &upper);
        assert!(c.abs() < 4.0 * se, "{c} ± {se}");
        // stationarity of horizontal increments in law
        let a = rect_increment(&s, 0.0, 1.0, 0.5, 1.0).unwrap();
        let b = rect_increment(&s, 1.0, 2.0, 0.0, 0.5).unwrap();
        let (_, p) = ks_two_sample(&a, &b).unwrap();
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn memory_guard() {
        let e = aggregate(&ex3(), 4.0, 1.0, 1.0, &[1.0; 1], &[1.0], MAX_VALUES + 1, 0, &AggregateOptions::default());
        assert!(matches!(e, Err(Error::Capacity(_))));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let src = ex3();
        let opts = AggregateOptions::default();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| aggregate(&src, 16.0, 0.5, 1.0, &[1.0], &[1.0], 20, 11, &opts).unwrap())
        };
        assert_eq!(run(1), run(3));
    }
}
