//! Classical particle model: the occupation-number rate equation on a
//! truncated lattice, its full counting statistics, and exact-jump
//! simulation.
//!
//! Transition classes from each state (n_h, n_c):
//!   hot up      n_h -> n_h+1      rate kappa_h nbar_h (n_h + 1)
//!   hot down    n_h -> n_h-1      rate kappa_h (nbar_h + 1) n_h
//!   cold up     n_c -> n_c+1      rate kappa_c nbar_c (n_c + 1)
//!   cold down   n_c -> n_c-1      rate kappa_c (nbar_c + 1) n_c
//!   transfer -> (n_h-1, n_c+1)    rate Gamma_I n_h (n_c + 1)   (counted +1)
//!   transfer -> (n_h+1, n_c-1)    rate Gamma_I n_c (n_h + 1)   (counted -1)
//!
//! The truncation is reflecting: rates leaving the lattice are dropped from
//! both the off-diagonals and the escape rate, so columns sum to zero and the
//! steady state stays normalized; the error this introduces is monitored
//! through the boundary-shell mass, never modeled.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mc::{jackknife, sub_seed, TrajectoryEstimate};
use crate::params::{Engine, PowerStats};
use crate::sparse::NullspaceSolver;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Hard cap on the truncated dimension.
pub const MAX_STATES: usize = 4_000_000;

/// Steady-state mass allowed on the truncation boundary by the adaptive
/// builder.
pub const BOUNDARY_MASS_TOL: f64 = 1e-10;

/// Occupation lattice (n_h, n_c) with n_alpha <= n_max_alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncatedStateSpace {
    pub n_max_h: usize,
    pub n_max_c: usize,
}

impl TruncatedStateSpace {
    pub fn new(n_max_h: usize, n_max_c: usize) -> Result<Self> {
        if n_max_h < 1 || n_max_c < 1 {
            return Err(Error::InvalidParams(
                "truncation must allow at least one quantum per mode".into(),
            ));
        }
        let dim = (n_max_h + 1) * (n_max_c + 1);
        if dim > MAX_STATES {
            return Err(Error::DimensionOverflow {
                dim,
                limit: MAX_STATES,
            });
        }
        Ok(Self { n_max_h, n_max_c })
    }

    pub fn dim(&self) -> usize {
        (self.n_max_h + 1) * (self.n_max_c + 1)
    }

    pub fn index(&self, n_h: usize, n_c: usize) -> usize {
        debug_assert!(n_h <= self.n_max_h && n_c <= self.n_max_c);
        n_h * (self.n_max_c + 1) + n_c
    }

    pub fn state(&self, idx: usize) -> (usize, usize) {
        (idx / (self.n_max_c + 1), idx % (self.n_max_c + 1))
    }

    /// Total probability on the outermost shells n_h = n_max_h or
    /// n_c = n_max_c.
    pub fn boundary_mass(&self, p: &[f64]) -> f64 {
        let mut mass = 0.0;
        for nc in 0..=self.n_max_c {
            mass += p[self.index(self.n_max_h, nc)];
        }
        for nh in 0..self.n_max_h {
            mass += p[self.index(nh, self.n_max_c)];
        }
        mass
    }
}

/// A counted intra-system jump edge (column-stochastic convention:
/// entry (to, from)).
#[derive(Debug, Clone, Copy)]
struct JumpEdge {
    to: usize,
    from: usize,
    /// occupation factor, multiplied by Gamma_I for the physical rate
    coeff: f64,
}

/// Sparse generator with the counting-field jump blocks kept separate.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    pub space: TruncatedStateSpace,
    gamma_i: f64,
    triplets: Vec<(usize, usize, f64)>,
    /// hot -> cold transfers (+1 count)
    v_plus: Vec<JumpEdge>,
    /// cold -> hot transfers (-1 count)
    v_minus: Vec<JumpEdge>,
}

/// Assemble the generator over the truncated lattice.
pub fn build_generator(e: &Engine, space: TruncatedStateSpace) -> RateMatrix {
    let (kh, kc) = (e.kappa_h(), e.kappa_c());
    let (nh_bar, nc_bar) = (e.nbar_h(), e.nbar_c());
    let gi = e.gamma_i();
    let dim = space.dim();

    let mut triplets = Vec::with_capacity(7 * dim);
    let mut v_plus = Vec::new();
    let mut v_minus = Vec::new();

    for from in 0..dim {
        let (nh, nc) = space.state(from);
        let mut escape = 0.0;
        let mut push = |to: usize, rate: f64, escape: &mut f64| {
            triplets.push((to, from, rate));
            *escape += rate;
        };
        if nh < space.n_max_h {
            push(space.index(nh + 1, nc), kh * nh_bar * (nh as f64 + 1.0), &mut escape);
        }
        if nh > 0 {
            push(space.index(nh - 1, nc), kh * (nh_bar + 1.0) * nh as f64, &mut escape);
        }
        if nc < space.n_max_c {
            push(space.index(nh, nc + 1), kc * nc_bar * (nc as f64 + 1.0), &mut escape);
        }
        if nc > 0 {
            push(space.index(nh, nc - 1), kc * (nc_bar + 1.0) * nc as f64, &mut escape);
        }
        if nh > 0 && nc < space.n_max_c {
            let coeff = nh as f64 * (nc as f64 + 1.0);
            let to = space.index(nh - 1, nc + 1);
            push(to, gi * coeff, &mut escape);
            v_plus.push(JumpEdge { to, from, coeff });
        }
        if nc > 0 && nh < space.n_max_h {
            let coeff = nc as f64 * (nh as f64 + 1.0);
            let to = space.index(nh + 1, nc - 1);
            push(to, gi * coeff, &mut escape);
            v_minus.push(JumpEdge { to, from, coeff });
        }
        triplets.push((from, from, -escape));
    }

    RateMatrix {
        space,
        gamma_i: gi,
        triplets,
        v_plus,
        v_minus,
    }
}

impl RateMatrix {
    pub fn gamma_i(&self) -> f64 {
        self.gamma_i
    }

    /// Generator triplets (row, col, value), duplicates already merged per
    /// transition class.
    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    fn solver(&self) -> Result<NullspaceSolver> {
        NullspaceSolver::new(self.space.dim(), &self.triplets, 0)
    }

    /// W1 p = Gamma_I (V+ - V-) p.
    fn apply_w1(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        for e in &self.v_plus {
            out[e.to] += self.gamma_i * e.coeff * p[e.from];
        }
        for e in &self.v_minus {
            out[e.to] -= self.gamma_i * e.coeff * p[e.from];
        }
        out
    }

    /// <W2> = Gamma_I <(V+ + V-)> over the kept edges.
    fn w2_mean(&self, p: &[f64]) -> f64 {
        let plus: f64 = self.v_plus.iter().map(|e| e.coeff * p[e.from]).sum();
        let minus: f64 = self.v_minus.iter().map(|e| e.coeff * p[e.from]).sum();
        self.gamma_i * (plus + minus)
    }
}

fn normalize_steady(p: &mut [f64]) -> Result<()> {
    for v in p.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-14 {
                return Err(Error::Solver(format!(
                    "steady state entry {v:.3e} below -1e-14; generator defective"
                )));
            }
            *v = 0.0;
        }
    }
    let mass: f64 = p.iter().sum();
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::Solver("steady state mass not positive".into()));
    }
    for v in p.iter_mut() {
        *v /= mass;
    }
    Ok(())
}

/// Normalized steady state of the truncated generator.
pub fn steady_state(rm: &RateMatrix) -> Result<Vec<f64>> {
    let mut p = rm.solver()?.solve_pinned();
    normalize_steady(&mut p)?;
    Ok(p)
}

/// First and second current cumulants by the counting-field / Drazin route
/// (current units: quanta per unit time).
pub fn fcs_cumulants_drazin(rm: &RateMatrix, p: &[f64]) -> Result<(f64, f64)> {
    let solver = rm.solver()?;
    drazin_with_solver(rm, &solver, p)
}

fn drazin_with_solver(rm: &RateMatrix, solver: &NullspaceSolver, p: &[f64]) -> Result<(f64, f64)> {
    let w1p = rm.apply_w1(p);
    let mean: f64 = w1p.iter().sum();
    // project onto the complement of the stationary direction; the dropped-row
    // solve then realizes y = L^D (W1 p) up to a multiple of p, removed by
    // gauge-fixing the column sum back to zero
    let qx: Vec<f64> = w1p.iter().zip(p).map(|(x, pi)| x - pi * mean).collect();
    let mut y = solver.solve_dropped_row(&qx);
    let overlap: f64 = y.iter().sum();
    for (yi, pi) in y.iter_mut().zip(p) {
        *yi -= pi * overlap;
    }
    let w1y: f64 = rm.apply_w1(&y).iter().sum();
    let noise = rm.w2_mean(p) - 2.0 * w1y;
    if !mean.is_finite() || !noise.is_finite() {
        return Err(Error::Solver("non-finite FCS cumulants".into()));
    }
    Ok((mean, noise))
}

/// Truncation-free current cumulants from the closed moment hierarchy
/// (<N_h>, <N_c>, <N_h^2>, <N_c^2>, <N_h N_c>) and the 2x2 regression
/// system on sigma = (I, V).
pub fn fcs_cumulants_moments(e: &Engine) -> Result<(f64, f64)> {
    let (kh, kc) = (e.kappa_h(), e.kappa_c());
    let (nh, nc) = (e.nbar_h(), e.nbar_c());
    let gi = e.gamma_i();
    let kbar = 0.5 * (kh + kc);

    // first moments
    let det1 = (kh + gi) * (kc + gi) - gi * gi;
    if det1 == 0.0 {
        return Err(Error::Solver("degenerate first-moment system".into()));
    }
    let mh = ((kc + gi) * kh * nh + gi * kc * nc) / det1;
    let mc = (gi * kh * nh + (kh + gi) * kc * nc) / det1;

    // second moments: unknowns (Shh, Scc, Shc)
    let m = nalgebra::Matrix3::new(
        2.0 * (kh + gi), 0.0, -4.0 * gi,
        0.0, 2.0 * (kc + gi), -4.0 * gi,
        -gi, -gi, 4.0 * gi + kh + kc,
    );
    let b = nalgebra::Vector3::new(
        (4.0 * kh * nh + kh + gi) * mh + gi * mc + kh * nh,
        (4.0 * kc * nc + kc + gi) * mc + gi * mh + kc * nc,
        (nc * kc - gi) * mh + (nh * kh - gi) * mc,
    );
    let s = m
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Solver("degenerate second-moment system".into()))?;
    let (shh, scc, shc) = (s[0], s[1], s[2]);

    let w1 = gi * (mh - mc);
    let w2 = gi * (mh + mc + 2.0 * shc);
    let iw1 = gi * gi * (shh - 2.0 * shc + scc) - 2.0 * gi * gi * (mh + mc + 2.0 * shc);
    let vw1 = gi * gi * (shh - scc);
    let init = nalgebra::Vector2::new(iw1 - w1 * w1, vw1 - gi * (mh + mc) * w1);

    let gmat = nalgebra::Matrix2::new(
        -2.0 * gi - kbar, -0.5 * (kh - kc),
        -0.5 * (kh - kc), -kbar,
    );
    let z = gmat
        .lu()
        .solve(&init)
        .ok_or_else(|| Error::Solver("degenerate sigma system".into()))?;
    Ok((w1, w2 - 2.0 * z[0]))
}

/// Initial truncation guess for the adaptive builder.
fn initial_truncation(nbar: f64) -> usize {
    ((10.0 * (nbar + 1.0)).ceil() as usize).max(4)
}

/// Adaptive FCS result: cumulants with the truncation that produced them.
#[derive(Debug, Clone)]
pub struct AdaptiveFcs {
    pub space: TruncatedStateSpace,
    pub boundary_mass: f64,
    /// current cumulants (mean, zero-frequency variance rate)
    pub mean_current: f64,
    pub current_noise: f64,
}

/// Grow the lattice until the steady boundary mass drops below
/// [`BOUNDARY_MASS_TOL`], then evaluate the Drazin-route cumulants.
pub fn adaptive_fcs_drazin(e: &Engine) -> Result<AdaptiveFcs> {
    let mut nmh = initial_truncation(e.nbar_h());
    let mut nmc = initial_truncation(e.nbar_c());
    loop {
        let space = TruncatedStateSpace::new(nmh, nmc)?;
        let rm = build_generator(e, space);
        let solver = rm.solver()?;
        let mut p = solver.solve_pinned();
        normalize_steady(&mut p)?;

        let mut hot_shell = 0.0;
        for nc in 0..=space.n_max_c {
            hot_shell += p[space.index(space.n_max_h, nc)];
        }
        let mut cold_shell = 0.0;
        for nh in 0..=space.n_max_h {
            cold_shell += p[space.index(nh, space.n_max_c)];
        }
        if hot_shell + cold_shell < BOUNDARY_MASS_TOL {
            let (mean, noise) = drazin_with_solver(&rm, &solver, &p)?;
            return Ok(AdaptiveFcs {
                space,
                boundary_mass: hot_shell + cold_shell,
                mean_current: mean,
                current_noise: noise,
            });
        }
        if hot_shell >= BOUNDARY_MASS_TOL / 2.0 {
            nmh *= 2;
        }
        if cold_shell >= BOUNDARY_MASS_TOL / 2.0 {
            nmc *= 2;
        }
    }
}

/// Power statistics via the truncation-free moment route.
pub fn moment_power_stats(e: &Engine) -> Result<PowerStats> {
    let (mean, noise) = fcs_cumulants_moments(e)?;
    Ok(PowerStats::new(
        mean * e.delta(),
        noise * e.delta() * e.delta(),
        e.delta(),
    ))
}

/// Configuration for the exact-jump simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct GillespieConfig {
    pub seed: u64,
    pub t_total: f64,
    pub t_burn: f64,
    pub n_traj: usize,
    /// Safety abort when either occupation exceeds this.
    pub occupancy_cap: usize,
    /// Counting windows per trajectory for the variance-rate estimator.
    pub n_windows: usize,
}

impl GillespieConfig {
    pub fn new(e: &Engine, seed: u64, t_total: f64, t_burn: f64, n_traj: usize) -> Result<Self> {
        if !(t_total.is_finite() && t_burn.is_finite()) || t_burn < 0.0 || t_total <= t_burn {
            return Err(Error::InvalidParams(
                "need 0 <= t_burn < t_total, both finite".into(),
            ));
        }
        if n_traj == 0 {
            return Err(Error::InvalidParams("n_traj must be >= 1".into()));
        }
        let cap = (100.0 * (e.nbar_h().max(e.nbar_c()) + 1.0)).ceil() as usize + 900;
        Ok(Self {
            seed,
            t_total,
            t_burn,
            n_traj,
            occupancy_cap: cap,
            n_windows: 50,
        })
    }
}

/// Jump classes for the trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum JumpClass {
    HotUp,
    HotDown,
    ColdUp,
    ColdDown,
    TransferHc,
    TransferCh,
}

impl JumpClass {
    fn name(self) -> &'static str {
        match self {
            JumpClass::HotUp => "hot_up",
            JumpClass::HotDown => "hot_down",
            JumpClass::ColdUp => "cold_up",
            JumpClass::ColdDown => "cold_down",
            JumpClass::TransferHc => "transfer_hc",
            JumpClass::TransferCh => "transfer_ch",
        }
    }
}

struct TrajWindows {
    /// net counts per half-window, 2 * n_windows entries
    half_counts: Vec<f64>,
}

fn run_trajectory(
    e: &Engine,
    cfg: &GillespieConfig,
    traj: usize,
    mut record: Option<&mut dyn FnMut(f64, usize, usize, JumpClass, i64)>,
) -> Result<TrajWindows> {
    let mut rng = ChaCha12Rng::seed_from_u64(sub_seed(cfg.seed, traj as u64));
    let (kh, kc) = (e.kappa_h(), e.kappa_c());
    let (nh_bar, nc_bar) = (e.nbar_h(), e.nbar_c());
    let gi = e.gamma_i();

    let mut nh = e.nbar_h().round() as usize;
    let mut nc = e.nbar_c().round() as usize;
    let mut t = 0.0;
    let mut count: i64 = 0;

    let span = cfg.t_total - cfg.t_burn;
    let half = span / (2.0 * cfg.n_windows as f64);
    let mut half_counts = vec![0.0; 2 * cfg.n_windows];

    loop {
        let rates = [
            kh * nh_bar * (nh as f64 + 1.0),
            kh * (nh_bar + 1.0) * nh as f64,
            kc * nc_bar * (nc as f64 + 1.0),
            kc * (nc_bar + 1.0) * nc as f64,
            gi * nh as f64 * (nc as f64 + 1.0),
            gi * nc as f64 * (nh as f64 + 1.0),
        ];
        let total: f64 = rates.iter().sum();
        if total <= 0.0 {
            break; // absorbing (only possible for nbar = g = 0)
        }
        let u: f64 = rng.random::<f64>();
        t += -(1.0 - u).ln() / total;
        if t >= cfg.t_total {
            break;
        }
        let pick = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut class = JumpClass::TransferCh;
        for (k, &r) in rates.iter().enumerate() {
            acc += r;
            if pick < acc {
                class = match k {
                    0 => JumpClass::HotUp,
                    1 => JumpClass::HotDown,
                    2 => JumpClass::ColdUp,
                    3 => JumpClass::ColdDown,
                    4 => JumpClass::TransferHc,
                    _ => JumpClass::TransferCh,
                };
                break;
            }
        }
        let mut delta_count = 0i64;
        match class {
            JumpClass::HotUp => nh += 1,
            JumpClass::HotDown => nh -= 1,
            JumpClass::ColdUp => nc += 1,
            JumpClass::ColdDown => nc -= 1,
            JumpClass::TransferHc => {
                nh -= 1;
                nc += 1;
                delta_count = 1;
            }
            JumpClass::TransferCh => {
                nh += 1;
                nc -= 1;
                delta_count = -1;
            }
        }
        count += delta_count;
        if nh > cfg.occupancy_cap || nc > cfg.occupancy_cap {
            return Err(Error::Simulation(format!(
                "occupancy ({nh}, {nc}) exceeded cap {} at t = {t:.3}; runaway parameters",
                cfg.occupancy_cap
            )));
        }
        if let Some(rec) = record.as_mut() {
            rec(t, nh, nc, class, count);
        }
        if delta_count != 0 && t >= cfg.t_burn {
            let idx = ((t - cfg.t_burn) / half) as usize;
            if idx < half_counts.len() {
                half_counts[idx] += delta_count as f64;
            }
        }
    }
    Ok(TrajWindows { half_counts })
}

/// Intra-system count statistics: mean count rate and zero-frequency
/// count-variance rate, both in current units.
///
/// The variance rate is estimated over counting windows at two lengths,
/// 2 v(T) - v(T/2), which cancels the O(1/T) boundary bias of the plain
/// windowed estimator; errors are leave-one-trajectory-out jackknives.
pub fn gillespie_simulate(
    e: &Engine,
    cfg: &GillespieConfig,
) -> Result<(TrajectoryEstimate, TrajectoryEstimate)> {
    let trajs: Vec<TrajWindows> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|k| run_trajectory(e, cfg, k, None))
        .collect::<Result<Vec<_>>>()?;

    let span = cfg.t_total - cfg.t_burn;
    let t_win = span / cfg.n_windows as f64;
    let n = cfg.n_traj;

    // per-trajectory partial sums over full windows and half windows
    struct Parts {
        m_full: f64,
        sum_full: f64,
        sq_full: f64,
        m_half: f64,
        sum_half: f64,
        sq_half: f64,
    }
    let parts: Vec<Parts> = trajs
        .iter()
        .map(|t| {
            let mut p = Parts {
                m_full: 0.0,
                sum_full: 0.0,
                sq_full: 0.0,
                m_half: 0.0,
                sum_half: 0.0,
                sq_half: 0.0,
            };
            for w in 0..cfg.n_windows {
                let full = t.half_counts[2 * w] + t.half_counts[2 * w + 1];
                p.m_full += 1.0;
                p.sum_full += full;
                p.sq_full += full * full;
            }
            for h in &t.half_counts {
                p.m_half += 1.0;
                p.sum_half += h;
                p.sq_half += h * h;
            }
            p
        })
        .collect();

    let rate_from = |skip: Option<usize>| {
        let (mut m, mut s) = (0.0, 0.0);
        for (k, p) in parts.iter().enumerate() {
            if Some(k) == skip {
                continue;
            }
            m += p.m_full;
            s += p.sum_full;
        }
        s / (m * t_win)
    };
    let var_rate_from = |skip: Option<usize>| {
        let (mut mf, mut sf, mut qf) = (0.0, 0.0, 0.0);
        let (mut mh, mut sh, mut qh) = (0.0, 0.0, 0.0);
        for (k, p) in parts.iter().enumerate() {
            if Some(k) == skip {
                continue;
            }
            mf += p.m_full;
            sf += p.sum_full;
            qf += p.sq_full;
            mh += p.m_half;
            sh += p.sum_half;
            qh += p.sq_half;
        }
        let var_full = (qf - sf * sf / mf) / (mf - 1.0);
        let var_half = (qh - sh * sh / mh) / (mh - 1.0);
        2.0 * (var_full / t_win) - var_half / (0.5 * t_win)
    };

    let (rate, rate_se) = if n > 1 {
        jackknife(n, rate_from(None), |k| rate_from(Some(k)))
    } else {
        (rate_from(None), f64::NAN)
    };
    let (vrate, vrate_se) = if n > 1 {
        jackknife(n, var_rate_from(None), |k| var_rate_from(Some(k)))
    } else {
        (var_rate_from(None), f64::NAN)
    };

    let m_total = cfg.n_traj * cfg.n_windows;
    let mean_est = TrajectoryEstimate {
        mean: rate,
        std_error: rate_se,
        n_samples: m_total,
        seed: cfg.seed,
        ess: m_total as f64,
        step_halving_drift: None,
    };
    let var_est = TrajectoryEstimate {
        mean: vrate,
        std_error: vrate_se,
        n_samples: m_total,
        seed: cfg.seed,
        ess: m_total as f64,
        step_halving_drift: None,
    };
    Ok((mean_est, var_est))
}

/// Write the jump record of trajectory 0 as CSV:
/// `t,n_h,n_c,event,cumulative_count`.
pub fn gillespie_dump<W: std::io::Write>(
    e: &Engine,
    cfg: &GillespieConfig,
    out: &mut W,
) -> Result<()> {
    writeln!(out, "t,n_h,n_c,event,cumulative_count")
        .map_err(|err| Error::Simulation(format!("dump write failed: {err}")))?;
    let mut io_err = None;
    {
        let mut rec = |t: f64, nh: usize, nc: usize, class: JumpClass, count: i64| {
            if io_err.is_none() {
                if let Err(err) = writeln!(out, "{t},{nh},{nc},{},{count}", class.name()) {
                    io_err = Some(err);
                }
            }
        };
        run_trajectory(e, cfg, 0, Some(&mut rec))?;
    }
    match io_err {
        Some(err) => Err(Error::Simulation(format!("dump write failed: {err}"))),
        None => Ok(()),
    }
}
