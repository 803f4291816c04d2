//! Derived quantities and scientific checks: Fano factors and their gaps,
//! entropy production and uncertainty bounds, mismatch maximizers, and the
//! parameter sweeps behind the survey figures.

use rayon::prelude::*;

use crate::closed_form;
use crate::error::{Error, Result};
use crate::mc::sub_seed;
use crate::moment::{self, ModelKind};
use crate::params::{Engine, EngineParams, Fano, Model, PowerStats, WaveParams};
use crate::particle::{self, GillespieConfig};
use crate::wave::{self, TrajectoryConfig};

/// Fano factor F = noise / (mean power * Delta); equals the current-level
/// ratio <<I^2>> / <I>.
pub fn fano(stats: &PowerStats, e: &Engine) -> Fano {
    PowerStats::new(stats.mean_power, stats.zero_freq_noise, e.delta()).fano
}

/// Closed-form Fano gaps (dF_qw, dF_qp) = (F_q - F_w, F_q - F_p).
///
/// dF_qw = (nh + nc)/(nh - nc) independently of g; dF_qp =
/// (S_p - S)(nh - nc)/E. Undefined at equilibrium.
pub fn fano_gaps(e: &Engine) -> Result<(f64, f64)> {
    let dn = e.nbar_h() - e.nbar_c();
    if dn == 0.0 {
        return Err(Error::Estimate(
            "Fano gaps undefined at equilibrium (mean power vanishes)".into(),
        ));
    }
    let qw = (e.nbar_h() + e.nbar_c()) / dn;
    let qp = closed_form::shot_mismatch(e) * dn / closed_form::equilibrium_coefficient(e);
    Ok((qw, qp))
}

/// Entropy production rate sigma = <I> (omega_c/T_c - omega_h/T_h), with the
/// ratios taken from temperatures or ln(1 + 1/nbar) under the direct spec.
pub fn entropy_rate(e: &Engine, mean_current: f64) -> f64 {
    mean_current * (e.beta_omega_c() - e.beta_omega_h())
}

/// Standard TUR bound on the Fano factor, 2 (omega_c/T_c - omega_h/T_h)^-1.
/// Infinite at equilibrium.
pub fn tur_standard_bound(e: &Engine) -> f64 {
    2.0 / (e.beta_omega_c() - e.beta_omega_h())
}

/// Modified bound obeyed by the wave model, 2 (1/nbar_c - 1/nbar_h)^-1
/// (positive orientation). Infinite at equilibrium.
pub fn tur_wave_bound(e: &Engine) -> f64 {
    2.0 / (1.0 / e.nbar_c() - 1.0 / e.nbar_h())
}

/// Outcome of checking a model's Fano factor against its applicable
/// uncertainty bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurReport {
    pub fano: Fano,
    pub standard_bound: f64,
    /// Present for the wave model only.
    pub modified_bound: Option<f64>,
    pub satisfies_standard: Option<bool>,
    /// Against the model-appropriate bound (standard for quantum/particle,
    /// modified for wave).
    pub satisfied: bool,
}

/// Evaluate the model-appropriate thermodynamic uncertainty bound.
///
/// The test runs in the orientation-free form sigma * <<P^2>> >= 2 <P>^2
/// (with the wave model's affinity 1/nbar_c - 1/nbar_h in place of
/// omega_c/T_c - omega_h/T_h), which reduces to the Fano-factor bounds
/// reported here for forward bias and stays meaningful for reversed bias
/// and at equilibrium.
pub fn tur_check(e: &Engine, stats: &PowerStats, model: Model) -> TurReport {
    let f = fano(stats, e);
    let standard = tur_standard_bound(e);
    let modified = match model {
        Model::Wave => Some(tur_wave_bound(e)),
        _ => None,
    };
    let holds = |affinity: f64| {
        let sigma = stats.mean_power / e.delta() * affinity;
        sigma * stats.zero_freq_noise
            >= 2.0 * stats.mean_power * stats.mean_power * (1.0 - 1e-10)
    };
    let satisfies_standard = Some(holds(e.beta_omega_c() - e.beta_omega_h()));
    let satisfied = match model {
        Model::Wave => holds(1.0 / e.nbar_c() - 1.0 / e.nbar_h()),
        _ => satisfies_standard == Some(true),
    };
    TurReport {
        fano: f,
        standard_bound: standard,
        modified_bound: modified,
        satisfies_standard,
        satisfied,
    }
}

fn with_g(e: &Engine, g: f64) -> Engine {
    let mut p = e.to_params();
    p.g = g;
    p.validate().expect("g sweep keeps params valid")
}

/// Golden-section maximizer on log10(g/kappa) in [lo, hi].
fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Locate the g/kappa positions maximizing the particle-quantum noise
/// mismatch (S_p - S)(nh - nc)^2 and the Fano gap dF_qp. Requires equal
/// bath couplings; both positions are independent of the occupations.
///
/// Bracketing comes from a coarse 200-point log scan, refined by golden
/// section to 1e-6.
pub fn find_mismatch_maxima(e: &Engine) -> Result<(f64, f64)> {
    if (e.kappa_h() - e.kappa_c()).abs() > 1e-12 * e.kappa_h().max(e.kappa_c()) {
        return Err(Error::InvalidParams(
            "mismatch maximizers are defined for equal bath couplings".into(),
        ));
    }
    if e.nbar_h() == e.nbar_c() {
        return Err(Error::Estimate(
            "mismatch objectives vanish identically at equilibrium".into(),
        ));
    }
    let kappa = e.kappa_h();
    let dn2 = (e.nbar_h() - e.nbar_c()).powi(2);
    let argmax_of = |objective: &dyn Fn(&Engine) -> f64| {
        let eval = |log_x: f64| objective(&with_g(e, 10f64.powf(log_x) * kappa));
        // coarse scan over g/kappa in [1e-2, 1e2]
        let n = 200;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=n {
            let lx = -2.0 + 4.0 * i as f64 / n as f64;
            let v = eval(lx);
            if v > best.0 {
                best = (v, lx);
            }
        }
        let width = 4.0 / n as f64;
        // tol on g/kappa itself, mapped onto the log axis at the bracket
        let log_tol = 1e-6 / (10f64.powf(best.1) * std::f64::consts::LN_10) / 2.0;
        let lx = golden_max(eval, best.1 - width, best.1 + width, log_tol.max(1e-12));
        10f64.powf(lx)
    };
    let noise_argmax = argmax_of(&|en: &Engine| closed_form::shot_mismatch(en) * dn2);
    let gap_argmax = argmax_of(&|en: &Engine| fano_gaps(en).expect("off equilibrium").1);
    Ok((noise_argmax, gap_argmax))
}

/// Sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// x = g / kappa at equal bath couplings.
    GOverKappa,
    /// x = nbar_h with everything else fixed.
    NbarH,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::GOverKappa => "g_over_kappa",
            SweepAxis::NbarH => "nbar_h",
        }
    }
}

/// Computational route for a sweep column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    ClosedForm,
    Moment,
    /// Counting-field Drazin route (particle only).
    Fcs,
    /// Monte Carlo (wave trajectories / Gillespie).
    MonteCarlo,
}

impl Route {
    pub fn name(&self) -> &'static str {
        match self {
            Route::ClosedForm => "closed",
            Route::Moment => "moment",
            Route::Fcs => "fcs",
            Route::MonteCarlo => "monte_carlo",
        }
    }

    pub fn valid_for(&self, model: Model) -> bool {
        match (model, self) {
            (_, Route::ClosedForm | Route::Moment) => true,
            (Model::Particle, Route::Fcs) => true,
            (Model::Wave | Model::Particle, Route::MonteCarlo) => true,
            _ => false,
        }
    }
}

/// Monte Carlo budget for sweep points on stochastic routes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMcConfig {
    pub seed: u64,
    pub n_traj: usize,
    pub t_span: f64,
}

impl Default for SweepMcConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_traj: 64,
            t_span: 500.0,
        }
    }
}

/// A sweep over one axis, with a per-model route selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub base: EngineParams,
    /// Wave white-noise offset C.
    pub offset_c: f64,
    pub route_q: Route,
    pub route_w: Route,
    pub route_p: Route,
    pub mc: SweepMcConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParams(
                "sweep grid must be strictly increasing".into(),
            ));
        }
        for (model, route) in [
            (Model::Quantum, self.route_q),
            (Model::Wave, self.route_w),
            (Model::Particle, self.route_p),
        ] {
            if !route.valid_for(model) {
                return Err(Error::InvalidParams(format!(
                    "route {} not valid for the {model} model",
                    route.name()
                )));
            }
        }
        if matches!(self.axis, SweepAxis::GOverKappa) {
            let e = self.base.validate()?;
            if (e.kappa_h() - e.kappa_c()).abs() > 1e-12 * e.kappa_h() {
                return Err(Error::InvalidParams(
                    "g/kappa sweeps require equal bath couplings".into(),
                ));
            }
        }
        Ok(())
    }

    fn engine_at(&self, x: f64) -> Result<Engine> {
        let mut p = self.base.clone();
        match self.axis {
            SweepAxis::GOverKappa => {
                let kappa = self.base.kappa_h;
                p.g = x * kappa;
            }
            SweepAxis::NbarH => {
                if let crate::params::OccupationSpec::Direct { nbar_c, .. } = p.occupation {
                    p.occupation = crate::params::OccupationSpec::Direct { nbar_h: x, nbar_c };
                } else {
                    return Err(Error::InvalidParams(
                        "nbar_h sweeps need a direct occupation spec".into(),
                    ));
                }
            }
        }
        p.validate()
    }
}

/// One sweep row; route failures are recorded in place of the stats.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub x: f64,
    pub quantum: std::result::Result<PowerStats, String>,
    pub wave: std::result::Result<PowerStats, String>,
    pub particle: std::result::Result<PowerStats, String>,
    pub tur_bound: f64,
    pub tur_bound_wave: f64,
}

fn eval_model(
    e: &Engine,
    model: Model,
    route: Route,
    offset_c: f64,
    mc: &SweepMcConfig,
    point_seed: u64,
) -> Result<PowerStats> {
    match (model, route) {
        (Model::Quantum, Route::ClosedForm) => {
            let (_, noise) = closed_form::quantum_noise(e);
            Ok(PowerStats::new(closed_form::mean_power(e), noise, e.delta()))
        }
        (Model::Quantum, Route::Moment) => moment::power_stats(e, ModelKind::Quantum),
        (Model::Wave, Route::ClosedForm) => {
            let w = WaveParams::new(e.to_params(), offset_c).validate()?;
            let (_, noise) = closed_form::wave_noise(&w);
            Ok(PowerStats::new(closed_form::mean_power(e), noise, e.delta()))
        }
        (Model::Wave, Route::Moment) => moment::power_stats(e, ModelKind::Wave { offset_c }),
        (Model::Wave, Route::MonteCarlo) => {
            let w = WaveParams::new(e.to_params(), offset_c).validate()?;
            let cfg = TrajectoryConfig::for_engine(&w, point_seed, mc.n_traj, mc.t_span);
            let est = wave::estimate_power_stats(&w, &cfg)?;
            Ok(PowerStats::new(
                est.power.mean,
                est.noise_work_variance.mean,
                e.delta(),
            ))
        }
        (Model::Particle, Route::ClosedForm) => {
            let (_, noise) = closed_form::particle_noise(e);
            Ok(PowerStats::new(closed_form::mean_power(e), noise, e.delta()))
        }
        (Model::Particle, Route::Moment) => particle::moment_power_stats(e),
        (Model::Particle, Route::Fcs) => {
            let out = particle::adaptive_fcs_drazin(e)?;
            Ok(PowerStats::new(
                out.mean_current * e.delta(),
                out.current_noise * e.delta() * e.delta(),
                e.delta(),
            ))
        }
        (Model::Particle, Route::MonteCarlo) => {
            let t_burn = 20.0 / e.kappa_h().min(e.kappa_c());
            let cfg = GillespieConfig::new(e, point_seed, t_burn + mc.t_span, t_burn, mc.n_traj)?;
            let (mean, var) = particle::gillespie_simulate(e, &cfg)?;
            Ok(PowerStats::new(
                mean.mean * e.delta(),
                var.mean * e.delta() * e.delta(),
                e.delta(),
            ))
        }
        _ => Err(Error::InvalidParams(format!(
            "route {} not valid for the {model} model",
            route.name()
        ))),
    }
}

/// Evaluate the sweep; rows come back in grid order and per-point failures
/// do not abort the rest.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let rows: Vec<SweepRow> = spec
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let point_seed = sub_seed(spec.mc.seed, i as u64);
            match spec.engine_at(x) {
                Ok(e) => {
                    let run = |model, route| {
                        eval_model(&e, model, route, spec.offset_c, &spec.mc, point_seed)
                            .map_err(|err| err.to_string())
                    };
                    SweepRow {
                        x,
                        quantum: run(Model::Quantum, spec.route_q),
                        wave: run(Model::Wave, spec.route_w),
                        particle: run(Model::Particle, spec.route_p),
                        tur_bound: tur_standard_bound(&e),
                        tur_bound_wave: tur_wave_bound(&e),
                    }
                }
                Err(err) => SweepRow {
                    x,
                    quantum: Err(err.to_string()),
                    wave: Err(err.to_string()),
                    particle: Err(err.to_string()),
                    tur_bound: f64::NAN,
                    tur_bound_wave: f64::NAN,
                },
            }
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2() -> Engine {
        EngineParams::direct(1.0, 1.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap()
    }

    #[test]
    fn fano_at_reference_point() {
        let e = fig2();
        let (_, noise) = closed_form::quantum_noise(&e);
        let s = PowerStats::new(closed_form::mean_power(&e), noise, e.delta());
        let f = fano(&s, &e).value().unwrap();
        assert!((f - 2.6837894736842105).abs() < 1e-12);
    }

    #[test]
    fn fano_propagates_undefined() {
        let e = EngineParams::direct(1.0, 1.0, 1.0, 1.0, 0.1, 0.1).validate().unwrap();
        let (_, noise) = closed_form::quantum_noise(&e);
        let s = PowerStats::new(closed_form::mean_power(&e), noise, e.delta());
        assert_eq!(fano(&s, &e), Fano::Undefined);
    }

    #[test]
    fn wave_fano_small_g_limit() {
        // F_w -> 2 nh nc / (nh - nc) as g -> 0
        let e = EngineParams::direct(1e-4, 1.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap();
        let w = WaveParams::new(e.to_params(), 0.0).validate().unwrap();
        let (_, noise) = closed_form::wave_noise(&w);
        let f = noise / closed_form::mean_power(&e);
        let limit = 2.0 * 2.0 * 0.1 / 1.9;
        assert!((f - limit).abs() < 1e-6, "{f} vs {limit}");
        assert!(limit < 1.0, "anti-bunched at this bias");
    }

    #[test]
    fn particle_fano_poisson_limit() {
        let e = EngineParams::direct(1e-3, 1.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap();
        let (_, noise) = closed_form::particle_noise(&e);
        let f = noise / closed_form::mean_power(&e);
        let p = closed_form::poisson_limit(&e);
        let fp = p.zero_freq_noise / p.mean_power;
        assert!(((f - fp) / fp).abs() < 1e-4);
        assert!((fp - 2.5 / 1.9).abs() < 1e-12);
    }

    #[test]
    fn gap_qw_is_g_independent() {
        for g in [0.1, 1.0, 10.0] {
            let e = EngineParams::direct(g, 1.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap();
            let (qw, _) = fano_gaps(&e).unwrap();
            assert!((qw - 2.1 / 1.9).abs() < 1e-12);
            // matches the direct Fano difference
            let w = WaveParams::new(e.to_params(), 0.0).validate().unwrap();
            let fq = closed_form::quantum_noise(&e).1 / closed_form::mean_power(&e);
            let fw = closed_form::wave_noise(&w).1 / closed_form::mean_power(&e);
            assert!((qw - (fq - fw)).abs() < 1e-10, "g = {g}");
        }
    }

    #[test]
    fn gap_qp_vanishes_in_both_limits_and_is_nonnegative() {
        for g in [1e-4, 1e4] {
            let e = EngineParams::direct(g, 1.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap();
            let (_, qp) = fano_gaps(&e).unwrap();
            assert!(qp.abs() < 1e-6, "g = {g}: {qp}");
        }
        for i in 0..30 {
            let g = 10f64.powf(-2.0 + 4.0 * i as f64 / 29.0);
            let e = EngineParams::direct(g, 1.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap();
            let (_, qp) = fano_gaps(&e).unwrap();
            assert!(qp >= 0.0);
            // cross-check against the assembled Fano difference
            let fq = closed_form::quantum_noise(&e).1 / closed_form::mean_power(&e);
            let fp = closed_form::particle_noise(&e).1 / closed_form::mean_power(&e);
            assert!((qp - (fq - fp)).abs() < 1e-10);
        }
    }

    #[test]
    fn gaps_undefined_at_equilibrium() {
        let e = EngineParams::direct(1.0, 1.0, 1.0, 1.0, 0.4, 0.4).validate().unwrap();
        assert!(fano_gaps(&e).is_err());
    }

    #[test]
    fn entropy_rate_values() {
        let e = fig2();
        assert_eq!(entropy_rate(&e, 0.0), 0.0);
        let sigma = entropy_rate(&e, 0.76);
        assert!((sigma - 1.5142469251645567).abs() < 1e-12, "{sigma}");
        let bound = tur_standard_bound(&e);
        assert!((bound - 1.0037992976837765).abs() < 1e-12, "{bound}");
    }

    #[test]
    fn tur_reports() {
        let e = fig2();
        let (_, nq) = closed_form::quantum_noise(&e);
        let sq = PowerStats::new(closed_form::mean_power(&e), nq, e.delta());
        let r = tur_check(&e, &sq, Model::Quantum);
        assert!(r.satisfied);
        assert_eq!(r.satisfies_standard, Some(true));

        // small g: the wave model violates the standard bound but meets the
        // modified one
        let es = EngineParams::direct(0.05, 1.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap();
        let w = WaveParams::new(es.to_params(), 0.0).validate().unwrap();
        let (_, nw) = closed_form::wave_noise(&w);
        let sw = PowerStats::new(closed_form::mean_power(&es), nw, es.delta());
        let r = tur_check(&es, &sw, Model::Wave);
        assert_eq!(r.satisfies_standard, Some(false));
        assert!(r.satisfied);
        assert!((r.modified_bound.unwrap() - 2.0 / 9.5).abs() < 1e-12);
    }

    #[test]
    fn wave_meets_modified_bound_with_equality_at_small_g() {
        let e = EngineParams::direct(1e-5, 1.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap();
        let w = WaveParams::new(e.to_params(), 0.0).validate().unwrap();
        let f = closed_form::wave_noise(&w).1 / closed_form::mean_power(&e);
        let bound = tur_wave_bound(&e);
        assert!(f >= bound);
        assert!((f - bound) / bound < 1e-8);
    }

    #[test]
    fn maximizers_match_analytic_positions() {
        let e = fig2();
        let (noise_pos, gap_pos) = find_mismatch_maxima(&e).unwrap();
        let noise_exact = ((1.0 + 3f64.sqrt()) / 4.0).sqrt();
        let gap_exact = ((3.0 + 57f64.sqrt()) / 24.0).sqrt();
        assert!((noise_pos - noise_exact).abs() < 1e-6, "{noise_pos}");
        assert!((gap_pos - gap_exact).abs() < 1e-6, "{gap_pos}");
        // coarse grid confirmation
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=400 {
            let g = 10f64.powf(-2.0 + 4.0 * i as f64 / 400.0);
            let en = EngineParams::direct(g, 1.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap();
            let v = closed_form::shot_mismatch(&en) * 1.9 * 1.9;
            if v > best.0 {
                best = (v, g);
            }
        }
        assert!((best.1 - noise_exact).abs() < noise_exact * (10f64.powf(4.0 / 400.0) - 1.0) * 1.5);
    }

    #[test]
    fn maximizers_independent_of_occupations() {
        let mut found = Vec::new();
        for (nh, nc) in [(2.0, 0.1), (5.0, 1.0), (0.7, 0.05)] {
            let e = EngineParams::direct(1.0, 1.0, 1.0, 1.0, nh, nc).validate().unwrap();
            found.push(find_mismatch_maxima(&e).unwrap());
        }
        for pair in found.windows(2) {
            assert!((pair[0].0 - pair[1].0).abs() < 2e-6);
            assert!((pair[0].1 - pair[1].1).abs() < 2e-6);
        }
    }

    #[test]
    fn maximizers_require_equal_kappa() {
        let e = EngineParams::direct(1.0, 2.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap();
        assert!(find_mismatch_maxima(&e).is_err());
    }

    fn fig2a_spec(points: usize) -> SweepSpec {
        SweepSpec {
            axis: SweepAxis::GOverKappa,
            grid: (0..points)
                .map(|i| 10f64.powf(-1.0 + 3.0 * i as f64 / (points.max(2) - 1) as f64))
                .collect(),
            base: EngineParams::direct(1.0, 1.0, 1.0, 1.0, 2.0, 0.1),
            offset_c: 0.0,
            route_q: Route::ClosedForm,
            route_w: Route::ClosedForm,
            route_p: Route::ClosedForm,
            mc: SweepMcConfig::default(),
        }
    }

    #[test]
    fn single_point_sweep_equals_direct_evaluation() {
        let mut spec = fig2a_spec(2);
        spec.grid = vec![1.0];
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        let q = rows[0].quantum.as_ref().unwrap();
        assert!((q.mean_power - 0.76).abs() < 1e-14);
        assert!((q.zero_freq_noise - 2.03968).abs() < 1e-14);
    }

    #[test]
    fn sweep_rows_keep_model_ordering() {
        let rows = run_sweep(&fig2a_spec(25)).unwrap();
        for r in &rows {
            let nq = rows[0].quantum.is_ok();
            assert!(nq);
            let q = r.quantum.as_ref().unwrap().zero_freq_noise;
            let w = r.wave.as_ref().unwrap().zero_freq_noise;
            let p = r.particle.as_ref().unwrap().zero_freq_noise;
            assert!(q >= p && p >= w, "ordering broken at x = {}", r.x);
        }
    }

    #[test]
    fn sweep_wave_to_quantum_at_high_occupation() {
        for g_over_k in [2.0 / 3.0, 10.0] {
            let spec = SweepSpec {
                axis: SweepAxis::NbarH,
                grid: vec![0.5, 5.0, 50.0, 500.0],
                base: EngineParams::direct(g_over_k, 1.0, 1.0, 1.0, 2.0, 0.1),
                offset_c: 0.0,
                route_q: Route::ClosedForm,
                route_w: Route::ClosedForm,
                route_p: Route::ClosedForm,
                mc: SweepMcConfig::default(),
            };
            let rows = run_sweep(&spec).unwrap();
            let ratio = |r: &SweepRow| {
                let fq = r.quantum.as_ref().unwrap().fano.value().unwrap();
                let fw = r.wave.as_ref().unwrap().fano.value().unwrap();
                fq / fw
            };
            let first = ratio(&rows[0]);
            let last = ratio(rows.last().unwrap());
            assert!((last - 1.0).abs() < (first - 1.0).abs());
            assert!((last - 1.0).abs() < 0.02, "ratio {last} at g/k = {g_over_k}");
        }
    }

    #[test]
    fn sweep_records_per_point_failures() {
        let mut spec = fig2a_spec(3);
        spec.axis = SweepAxis::NbarH;
        spec.grid = vec![0.05, 0.1, 1.0]; // x = nbar_c) at 0.1 hits equilibrium
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 3);
        // equilibrium point computes but carries an undefined Fano
        let eq = rows[1].quantum.as_ref().unwrap();
        assert_eq!(eq.fano, Fano::Undefined);
        assert!(rows[2].quantum.is_ok());
    }

    #[test]
    fn sweep_rejects_bad_routes() {
        let mut spec = fig2a_spec(3);
        spec.route_q = Route::Fcs;
        assert!(spec.validate().is_err());
        let mut spec = fig2a_spec(3);
        spec.grid = vec![1.0, 0.5];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn wave_offset_leaves_power_invariant() {
        for c in [0.0, 0.25, 0.5, 1.0] {
            let e = fig2();
            let s = moment::power_stats(&e, ModelKind::Wave { offset_c: c }).unwrap();
            assert!(
                (s.mean_power - 0.76).abs() < 1e-12,
                "C = {c}: {}",
                s.mean_power
            );
        }
    }

    #[test]
    fn offset_half_captures_linear_terms() {
        // noise_q - noise_w(C) = E [(1 - 2C)(nh + nc) - 2 C^2]; at C = 1/2
        // the occupation-linear terms cancel, leaving -E/2.
        for (nh, nc) in [(2.0, 0.1), (0.6, 0.3), (8.0, 2.0)] {
            let e = EngineParams::direct(1.2, 0.9, 1.4, 1.0, nh, nc).validate().unwrap();
            let (dq, nq) = closed_form::quantum_noise(&e);
            for c in [0.0, 0.25, 0.5, 1.0] {
                let w = WaveParams::new(e.to_params(), c).validate().unwrap();
                let (_, nw) = closed_form::wave_noise(&w);
                let predicted = dq.equilibrium * ((1.0 - 2.0 * c) * (nh + nc) - 2.0 * c * c);
                assert!(
                    ((nq - nw) - predicted).abs() < 1e-12 * nq.abs().max(1.0),
                    "C = {c}"
                );
            }
            let w = WaveParams::new(e.to_params(), 0.5).validate().unwrap();
            let (_, nw) = closed_form::wave_noise(&w);
            assert!(((nq - nw) + dq.equilibrium / 2.0).abs() < 1e-12 * nq.abs().max(1.0));
        }
    }

    #[test]
    fn high_temperature_ratio_converges_but_gap_stays() {
        let scale = 3.0;
        let mut prev_ratio_err = f64::INFINITY;
        for nc in [10.0, 100.0, 1000.0] {
            let e = EngineParams::direct(0.8, 1.0, 1.0, 1.0, scale * nc, nc).validate().unwrap();
            let w = WaveParams::new(e.to_params(), 0.0).validate().unwrap();
            let fq = closed_form::quantum_noise(&e).1 / closed_form::mean_power(&e);
            let fw = closed_form::wave_noise(&w).1 / closed_form::mean_power(&e);
            let ratio_err = (fq / fw - 1.0).abs();
            assert!(ratio_err < prev_ratio_err);
            prev_ratio_err = ratio_err;
            let (qw, _) = fano_gaps(&e).unwrap();
            assert!((qw - (scale + 1.0) / (scale - 1.0)).abs() < 1e-9);
        }
        assert!(prev_ratio_err < 1e-3);
    }
}
