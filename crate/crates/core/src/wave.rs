//! Stochastic trajectories of the classical wave model.
//!
//! Rotating-frame Langevin equations for the complex amplitudes,
//!
//!   dA_h = (-kappa_h/2 A_h - i g A_c) dt + sqrt(kappa_h) dxi_h,
//!   dA_c = (-kappa_c/2 A_c - i g A_h) dt + sqrt(kappa_c) dxi_c,
//!
//! with independent complex Gaussian increments of covariance
//! <dxi* dxi> = Phi_alpha dt (each quadrature Phi_alpha dt / 2), integrated
//! by Euler-Maruyama. The instantaneous current is
//! I(t) = -2 g Im(A_h* A_c) and power P = Delta * I.
//!
//! Noise estimation uses the long-time growth of the work variance:
//! Var[W(tau)] -> S tau + const, with W accumulated over non-overlapping
//! time origins (stationarity makes the origin irrelevant) and the slope
//! fitted over the final half of the lag window. A two-scale batch-means
//! estimator on the same windows serves as the internal cross-check. Errors
//! are leave-one-trajectory-out jackknives, so within-trajectory
//! correlations are accounted for.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mc::{jackknife, sub_seed, TrajectoryEstimate};
use crate::params::WaveEngine;

/// Amplitude-squared ceiling; crossing it aborts the integration.
const OVERFLOW_GUARD: f64 = 1e150;

/// Integration and estimator configuration. The scheme is fixed to
/// Euler-Maruyama (exact in distribution for this linear system as dt -> 0;
/// the step-halving check quantifies the residual bias).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub dt: f64,
    pub t_burn: f64,
    pub t_total: f64,
    pub n_traj: usize,
    pub seed: u64,
    /// Work-accumulation origins per trajectory.
    pub n_origins: usize,
    /// Recorded lag points per origin window.
    pub n_lags: usize,
}

impl TrajectoryConfig {
    /// Sensible defaults for the engine's time scales: dt at the stability
    /// cap, burn-in of 20 relaxation times, 50 work windows.
    pub fn for_engine(w: &WaveEngine, seed: u64, n_traj: usize, t_span: f64) -> Self {
        let e = &w.engine;
        let kmin = e.kappa_h().min(e.kappa_c());
        let t_burn = 20.0 / kmin;
        TrajectoryConfig {
            dt: Self::dt_cap(w),
            t_burn,
            t_total: t_burn + t_span,
            n_traj,
            seed,
            n_origins: 50,
            n_lags: 64,
        }
    }

    /// Largest step the integrator contract allows.
    pub fn dt_cap(w: &WaveEngine) -> f64 {
        let e = &w.engine;
        let mut fastest = e.kappa_h().max(e.kappa_c());
        if e.g() > 0.0 {
            fastest = fastest.max(e.g());
        }
        0.01 / fastest
    }

    pub fn validate(&self, w: &WaveEngine) -> Result<()> {
        let e = &w.engine;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParams("dt must be positive".into()));
        }
        let cap = Self::dt_cap(w);
        if self.dt > cap * (1.0 + 1e-12) {
            return Err(Error::InvalidParams(format!(
                "dt = {} exceeds 0.01 / max(kappa, g) = {cap}",
                self.dt
            )));
        }
        let kmin = e.kappa_h().min(e.kappa_c());
        if self.t_burn < 10.0 / kmin {
            return Err(Error::InvalidParams(format!(
                "t_burn = {} shorter than 10 / min(kappa) = {}",
                self.t_burn,
                10.0 / kmin
            )));
        }
        if !(self.t_total.is_finite()) || self.t_total <= self.t_burn {
            return Err(Error::InvalidParams("need t_total > t_burn".into()));
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidParams("n_traj must be >= 1".into()));
        }
        if self.n_origins == 0 || self.n_lags < 4 || self.n_lags % 2 != 0 {
            return Err(Error::InvalidParams(
                "need n_origins >= 1 and even n_lags >= 4".into(),
            ));
        }
        Ok(())
    }

    fn halved(&self) -> Self {
        let mut c = self.clone();
        c.dt *= 0.5;
        c
    }
}

/// One recorded trajectory (for dumps and unit tests).
#[derive(Debug, Clone)]
pub struct TrajectorySeries {
    pub t: Vec<f64>,
    pub a_h: Vec<Complex64>,
    pub a_c: Vec<Complex64>,
    pub current: Vec<f64>,
}

/// Integrate one trajectory, feeding every step (t, A_h, A_c, I) to `sink`.
/// Streams are bit-for-bit reproducible for a given (seed, index).
fn integrate<F: FnMut(f64, Complex64, Complex64, f64)>(
    w: &WaveEngine,
    cfg: &TrajectoryConfig,
    traj: usize,
    mut sink: F,
) -> Result<()> {
    let e = &w.engine;
    let mut rng = ChaCha12Rng::seed_from_u64(sub_seed(cfg.seed, traj as u64));
    let dt = cfg.dt;
    let (kh, kc, g) = (e.kappa_h(), e.kappa_c(), e.g());
    let sig_h = (kh * w.phi_h() * dt / 2.0).sqrt();
    let sig_c = (kc * w.phi_c() * dt / 2.0).sqrt();
    let ig = Complex64::new(0.0, g);

    let mut a_h = Complex64::new(0.0, 0.0);
    let mut a_c = Complex64::new(0.0, 0.0);
    let steps = (cfg.t_total / dt).round() as u64;

    for step in 0..steps {
        let n1: f64 = StandardNormal.sample(&mut rng);
        let n2: f64 = StandardNormal.sample(&mut rng);
        let n3: f64 = StandardNormal.sample(&mut rng);
        let n4: f64 = StandardNormal.sample(&mut rng);
        let drift_h = -(0.5 * kh) * a_h - ig * a_c;
        let drift_c = -(0.5 * kc) * a_c - ig * a_h;
        a_h += drift_h * dt + Complex64::new(sig_h * n1, sig_h * n2);
        a_c += drift_c * dt + Complex64::new(sig_c * n3, sig_c * n4);
        if a_h.norm_sqr() > OVERFLOW_GUARD || a_c.norm_sqr() > OVERFLOW_GUARD {
            return Err(Error::Simulation(format!(
                "amplitude overflow at t = {:.4} (|A_h|^2 = {:.3e}, |A_c|^2 = {:.3e})",
                (step + 1) as f64 * dt,
                a_h.norm_sqr(),
                a_c.norm_sqr()
            )));
        }
        let current = -2.0 * g * (a_h.conj() * a_c).im;
        sink((step + 1) as f64 * dt, a_h, a_c, current);
    }
    Ok(())
}

/// Full time series of one trajectory (includes the burn-in).
pub fn simulate_wave(w: &WaveEngine, cfg: &TrajectoryConfig, traj: usize) -> Result<TrajectorySeries> {
    cfg.validate(w)?;
    let n = (cfg.t_total / cfg.dt).round() as usize;
    let mut out = TrajectorySeries {
        t: Vec::with_capacity(n),
        a_h: Vec::with_capacity(n),
        a_c: Vec::with_capacity(n),
        current: Vec::with_capacity(n),
    };
    integrate(w, cfg, traj, |t, ah, ac, i| {
        out.t.push(t);
        out.a_h.push(ah);
        out.a_c.push(ac);
        out.current.push(i);
    })?;
    Ok(out)
}

/// Write trajectory 0 as CSV: `t,re_a_h,im_a_h,re_a_c,im_a_c,current`.
pub fn wave_dump<W: std::io::Write>(
    w: &WaveEngine,
    cfg: &TrajectoryConfig,
    stride: usize,
    out: &mut W,
) -> Result<()> {
    cfg.validate(w)?;
    let stride = stride.max(1);
    writeln!(out, "t,re_a_h,im_a_h,re_a_c,im_a_c,current")
        .map_err(|err| Error::Simulation(format!("dump write failed: {err}")))?;
    let mut k = 0usize;
    let mut io_err = None;
    integrate(w, cfg, 0, |t, ah, ac, i| {
        if k % stride == 0 && io_err.is_none() {
            if let Err(err) = writeln!(out, "{t},{},{},{},{},{i}", ah.re, ah.im, ac.re, ac.im) {
                io_err = Some(err);
            }
        }
        k += 1;
    })?;
    match io_err {
        Some(err) => Err(Error::Simulation(format!("dump write failed: {err}"))),
        None => Ok(()),
    }
}

/// Per-trajectory accumulators for the estimators.
struct TrajPartial {
    /// time-averaged current over the window-covered span
    mean_current: f64,
    /// sum and square-sum of W(tau_j) over origins, per lag
    w_sum: Vec<f64>,
    w_sq: Vec<f64>,
    n_origins: usize,
    /// sum of I^2 over kept steps (marginal variance diagnostic)
    curr_sq: f64,
    kept_steps: usize,
}

struct EstimatorLayout {
    burn_steps: u64,
    lag_stride: u64,
    steps_per_origin: u64,
    n_origins: usize,
    n_lags: usize,
}

fn layout(cfg: &TrajectoryConfig) -> Result<EstimatorLayout> {
    let burn_steps = (cfg.t_burn / cfg.dt).round() as u64;
    let total_steps = (cfg.t_total / cfg.dt).round() as u64;
    let span_steps = total_steps - burn_steps;
    let raw_per_origin = span_steps / cfg.n_origins as u64;
    let lag_stride = raw_per_origin / cfg.n_lags as u64;
    if lag_stride == 0 {
        return Err(Error::InvalidParams(format!(
            "window too short: {span_steps} steps over {} origins cannot carry {} lags",
            cfg.n_origins, cfg.n_lags
        )));
    }
    let steps_per_origin = lag_stride * cfg.n_lags as u64;
    let n_origins = (span_steps / steps_per_origin) as usize;
    Ok(EstimatorLayout {
        burn_steps,
        lag_stride,
        steps_per_origin,
        n_origins,
        n_lags: cfg.n_lags,
    })
}

fn run_partial(w: &WaveEngine, cfg: &TrajectoryConfig, lay: &EstimatorLayout, traj: usize) -> Result<TrajPartial> {
    let mut part = TrajPartial {
        mean_current: 0.0,
        w_sum: vec![0.0; lay.n_lags],
        w_sq: vec![0.0; lay.n_lags],
        n_origins: lay.n_origins,
        curr_sq: 0.0,
        kept_steps: 0,
    };
    let kept_total = lay.steps_per_origin * lay.n_origins as u64;
    let mut step: u64 = 0;
    let mut work = 0.0f64;
    let mut sum_i = 0.0f64;
    integrate(w, cfg, traj, |_t, _ah, _ac, current| {
        if step >= lay.burn_steps && step < lay.burn_steps + kept_total {
            let k = step - lay.burn_steps;
            let in_origin = k % lay.steps_per_origin;
            if in_origin == 0 {
                work = 0.0;
            }
            work += current * cfg.dt;
            sum_i += current;
            part.curr_sq += current * current;
            part.kept_steps += 1;
            if (in_origin + 1) % lay.lag_stride == 0 {
                let lag = ((in_origin + 1) / lay.lag_stride - 1) as usize;
                part.w_sum[lag] += work;
                part.w_sq[lag] += work * work;
            }
        }
        step += 1;
    })?;
    part.mean_current = sum_i / (kept_total as f64);
    Ok(part)
}

/// Monte Carlo power statistics of the wave model.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePowerEstimate {
    /// mean output power, Delta * <I>
    pub power: TrajectoryEstimate,
    /// zero-frequency power noise from the work-variance slope
    pub noise_work_variance: TrajectoryEstimate,
    /// the same noise from two-scale batch means (internal cross-check)
    pub noise_batch_means: TrajectoryEstimate,
}

/// Estimate mean power and zero-frequency noise from `cfg.n_traj`
/// independent trajectories. Refuses the noise estimate below 8
/// trajectories (the variance slope is not trustworthy there).
pub fn estimate_power_stats(w: &WaveEngine, cfg: &TrajectoryConfig) -> Result<WavePowerEstimate> {
    cfg.validate(w)?;
    if cfg.n_traj < 8 {
        return Err(Error::Estimate(format!(
            "noise estimation needs >= 8 trajectories, got {}",
            cfg.n_traj
        )));
    }
    let lay = layout(cfg)?;
    let parts: Vec<TrajPartial> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|k| run_partial(w, cfg, &lay, k))
        .collect::<Result<Vec<_>>>()?;

    let delta = w.engine.delta();
    let n = cfg.n_traj;
    let lags: Vec<f64> = (0..lay.n_lags)
        .map(|j| ((j as u64 + 1) * lay.lag_stride) as f64 * cfg.dt)
        .collect();

    // pooled Var[W(tau_j)] with optional leave-one-out
    let variance_at = |j: usize, skip: Option<usize>| {
        let (mut m, mut s, mut q) = (0.0f64, 0.0f64, 0.0f64);
        for (k, p) in parts.iter().enumerate() {
            if Some(k) == skip {
                continue;
            }
            m += p.n_origins as f64;
            s += p.w_sum[j];
            q += p.w_sq[j];
        }
        (q - s * s / m) / (m - 1.0)
    };
    // least-squares slope of Var[W] over the final half of the lag window
    let half = lay.n_lags / 2;
    let slope = |skip: Option<usize>| {
        let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for j in half..lay.n_lags {
            let x = lags[j];
            let y = variance_at(j, skip);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            cnt += 1.0;
        }
        (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx)
    };
    // two-scale batch means: 2 v(T) - v(T/2) cancels the O(1/T) bias
    let batch = |skip: Option<usize>| {
        let t_full = lags[lay.n_lags - 1];
        let t_half = lags[half - 1];
        2.0 * variance_at(lay.n_lags - 1, skip) / t_full - variance_at(half - 1, skip) / t_half
    };

    let (s_work, s_work_se) = jackknife(n, slope(None), |k| slope(Some(k)));
    let (s_batch, s_batch_se) = jackknife(n, batch(None), |k| batch(Some(k)));

    let mean_i = parts.iter().map(|p| p.mean_current).sum::<f64>() / n as f64;
    let var_mean = parts
        .iter()
        .map(|p| (p.mean_current - mean_i) * (p.mean_current - mean_i))
        .sum::<f64>()
        / (n as f64 - 1.0);
    let mean_se = (var_mean / n as f64).sqrt();

    // effective sample sizes: marginal variance over estimator variance for
    // the mean; pooled window count for the noise estimators
    let kept: usize = parts.iter().map(|p| p.kept_steps).sum();
    let marginal =
        parts.iter().map(|p| p.curr_sq).sum::<f64>() / kept as f64 - mean_i * mean_i;
    let ess_mean = if var_mean > 0.0 {
        marginal / (var_mean / n as f64)
    } else {
        kept as f64
    };
    let m_windows = (lay.n_origins * n) as f64;

    let d2 = delta * delta;
    Ok(WavePowerEstimate {
        power: TrajectoryEstimate {
            mean: delta * mean_i,
            std_error: delta * mean_se,
            n_samples: n,
            seed: cfg.seed,
            ess: ess_mean,
            step_halving_drift: None,
        },
        noise_work_variance: TrajectoryEstimate {
            mean: d2 * s_work,
            std_error: d2 * s_work_se,
            n_samples: n,
            seed: cfg.seed,
            ess: m_windows,
            step_halving_drift: None,
        },
        noise_batch_means: TrajectoryEstimate {
            mean: d2 * s_batch,
            std_error: d2 * s_batch_se,
            n_samples: n,
            seed: cfg.seed,
            ess: m_windows,
            step_halving_drift: None,
        },
    })
}

/// Run the estimator at dt and dt/2 and attach the drift z-scores to the
/// halved-step results.
pub fn step_halving_check(
    w: &WaveEngine,
    cfg: &TrajectoryConfig,
) -> Result<(WavePowerEstimate, WavePowerEstimate)> {
    let full = estimate_power_stats(w, cfg)?;
    let mut halved = estimate_power_stats(w, &cfg.halved())?;
    let drift = |a: &TrajectoryEstimate, b: &TrajectoryEstimate| {
        let scale = (a.std_error * a.std_error + b.std_error * b.std_error).sqrt();
        if scale > 0.0 {
            (a.mean - b.mean) / scale
        } else {
            0.0
        }
    };
    halved.power.step_halving_drift = Some(drift(&full.power, &halved.power));
    halved.noise_work_variance.step_halving_drift =
        Some(drift(&full.noise_work_variance, &halved.noise_work_variance));
    halved.noise_batch_means.step_halving_drift =
        Some(drift(&full.noise_batch_means, &halved.noise_batch_means));
    Ok((full, halved))
}
