//! Direct evaluation of the model's printed formulas: average power, the three
//! zero-frequency noise decompositions (general bath couplings), and the two
//! limiting regimes.
//!
//! The general-kappa expressions are the source of truth; the equal-kappa
//! specializations are kept as cross-checks.

use crate::error::Result;
use crate::params::{Engine, Model, NoiseDecomposition, PowerStats, WaveEngine};

/// Average power, 4 g^2 kappa_h kappa_c Delta (nh - nc) chi.
pub fn mean_power(e: &Engine) -> f64 {
    4.0 * e.g().powi(2) * e.kappa_h() * e.kappa_c() * e.delta() * (e.nbar_h() - e.nbar_c()) * e.chi()
}

/// The same power written as three conductances in series:
/// Delta (nh - nc) / (kappa_h^-1 + kappa_c^-1 + Gamma_I^-1).
pub fn mean_power_series(e: &Engine) -> f64 {
    let resist = 1.0 / e.kappa_h() + 1.0 / e.kappa_c() + 1.0 / e.gamma_i();
    e.delta() * (e.nbar_h() - e.nbar_c()) / resist
}

/// Equilibrium noise coefficient (power units).
pub fn equilibrium_coefficient(e: &Engine) -> f64 {
    4.0 * e.g().powi(2) * e.kappa_h() * e.kappa_c() * e.delta().powi(2) * e.chi()
}

/// Shot coefficient of the quantum and wave models (power units).
pub fn shot_coefficient(e: &Engine) -> f64 {
    let (g2, kh, kc) = (e.g().powi(2), e.kappa_h(), e.kappa_c());
    let khkc = kh * kc;
    let bracket = 16.0 * g2 * g2 * (kh * kh + kc * kc) - 8.0 * g2 * khkc * khkc
        + khkc * khkc * (kh + kc) * (kh + kc);
    4.0 * g2 * khkc * bracket * e.delta().powi(2) * e.chi().powi(3)
}

/// Particle-model shot coefficient: the quantum one plus a strictly
/// non-negative coherence-mismatch term.
pub fn particle_shot_coefficient(e: &Engine) -> f64 {
    shot_coefficient(e) + shot_mismatch(e)
}

/// S_p - S, the coherent-vs-incoherent transfer mismatch (power units).
pub fn shot_mismatch(e: &Engine) -> f64 {
    let (g2, kh, kc) = (e.g().powi(2), e.kappa_h(), e.kappa_c());
    let khkc = kh * kc;
    let ksum2 = (kh + kc) * (kh + kc);
    let numer = 256.0 * g2.powi(3) * khkc.powi(3) * (12.0 * g2 + kh * kh + 4.0 * khkc + kc * kc);
    let denom = 48.0 * g2 * g2 + 4.0 * g2 * (kh * kh + 6.0 * khkc + kc * kc) + khkc * ksum2;
    numer / denom * e.delta().powi(2) * e.chi().powi(3)
}

/// Quantum power noise: decomposition plus the assembled value.
pub fn quantum_noise(e: &Engine) -> (NoiseDecomposition, f64) {
    let d = NoiseDecomposition {
        equilibrium: equilibrium_coefficient(e),
        shot: shot_coefficient(e),
        model: Model::Quantum,
    };
    let noise = d.assemble(e.nbar_h(), e.nbar_c());
    (d, noise)
}

/// Wave power noise for input strengths Phi_alpha = nbar_alpha + C.
pub fn wave_noise(w: &WaveEngine) -> (NoiseDecomposition, f64) {
    let e = &w.engine;
    let d = NoiseDecomposition {
        equilibrium: equilibrium_coefficient(e),
        shot: shot_coefficient(e),
        model: Model::Wave,
    };
    let noise = d.assemble(w.phi_h(), w.phi_c());
    (d, noise)
}

/// Particle power noise: decomposition plus the assembled value.
pub fn particle_noise(e: &Engine) -> (NoiseDecomposition, f64) {
    let d = NoiseDecomposition {
        equilibrium: equilibrium_coefficient(e),
        shot: particle_shot_coefficient(e),
        model: Model::Particle,
    };
    let noise = d.assemble(e.nbar_h(), e.nbar_c());
    (d, noise)
}

/// Weak-coupling limit: bi-directional Poissonian exchange at rates
/// Gamma_ab = Gamma_I nbar_a (nbar_b + 1).
pub fn poisson_limit(e: &Engine) -> PowerStats {
    let gi = e.gamma_i();
    let g_hc = gi * e.nbar_h() * (e.nbar_c() + 1.0);
    let g_ch = gi * e.nbar_c() * (e.nbar_h() + 1.0);
    PowerStats::new(
        e.delta() * (g_hc - g_ch),
        e.delta().powi(2) * (g_hc + g_ch),
        e.delta(),
    )
}

/// Strong-coupling limit: the hybridized modes behave as a single oscillator
/// damped by both baths.
pub fn hybridized_limit(e: &Engine) -> PowerStats {
    let (kh, kc) = (e.kappa_h(), e.kappa_c());
    let ksum = kh + kc;
    let (nh, nc) = (e.nbar_h(), e.nbar_c());
    let occ = nh * (nh + 1.0) + nc * (nc + 1.0);
    let bias = (nh - nc) * (nh - nc);
    let mean = kh * kc * e.delta() * (nh - nc) / ksum;
    let noise =
        kh * kc * e.delta().powi(2) / ksum.powi(3) * (ksum * ksum * occ - bias * (kh * kh + kc * kc));
    PowerStats::new(mean, noise, e.delta())
}

/// Equal-damping shot noise, main-text form; requires kappa_h == kappa_c.
pub fn shot_coefficient_equal_kappa(e: &Engine) -> Result<f64> {
    let k = equal_kappa(e)?;
    let g2 = e.g().powi(2);
    let den = (4.0 * g2 + k * k).powi(2);
    Ok(equilibrium_coefficient(e) * (1.0 - 2.0 * g2 * (4.0 * g2 + 5.0 * k * k) / den))
}

/// Equal-damping particle shot noise, main-text form.
pub fn particle_shot_equal_kappa(e: &Engine) -> Result<f64> {
    let k = equal_kappa(e)?;
    let g2 = e.g().powi(2);
    let corr = equilibrium_coefficient(e) * 24.0 * g2 * g2 * k * k
        / ((6.0 * g2 + k * k) * (4.0 * g2 + k * k).powi(2));
    Ok(shot_coefficient_equal_kappa(e)? + corr)
}

fn equal_kappa(e: &Engine) -> Result<f64> {
    if (e.kappa_h() - e.kappa_c()).abs() > 1e-12 * e.kappa_h().max(e.kappa_c()) {
        return Err(crate::error::Error::InvalidParams(
            "equal-damping form requires kappa_h == kappa_c".into(),
        ));
    }
    Ok(e.kappa_h())
}

/// Leading g->0 behavior of the shot mismatch S_p - S (power units).
pub fn shot_mismatch_small_g(e: &Engine) -> f64 {
    let (g, kh, kc) = (e.g(), e.kappa_h(), e.kappa_c());
    256.0 * g.powi(6) * (kh * kh + 4.0 * kh * kc + kc * kc) * e.delta().powi(2)
        / (kh * kc * (kh + kc).powi(5))
}

/// Leading g->inf behavior of the shot mismatch S_p - S (power units).
pub fn shot_mismatch_large_g(e: &Engine) -> f64 {
    let (g, kh, kc) = (e.g(), e.kappa_h(), e.kappa_c());
    (kh * kc).powi(3) * e.delta().powi(2) / (g * g * (kh + kc).powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{EngineParams, WaveParams};

    fn fig2() -> Engine {
        EngineParams::direct(1.0, 1.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap()
    }

    fn wave(c: f64) -> WaveEngine {
        WaveParams::new(EngineParams::direct(1.0, 1.0, 1.0, 1.0, 2.0, 0.1), c)
            .validate()
            .unwrap()
    }

    #[test]
    fn power_vanishes_without_coupling() {
        let e = EngineParams::direct(0.0, 1.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap();
        assert_eq!(mean_power(&e), 0.0);
    }

    #[test]
    fn power_vanishes_at_equilibrium() {
        let e = EngineParams::direct(1.0, 1.0, 1.0, 1.0, 0.7, 0.7).validate().unwrap();
        assert_eq!(mean_power(&e), 0.0);
    }

    #[test]
    fn power_at_reference_point() {
        assert!((mean_power(&fig2()) - 0.76).abs() < 1e-15);
    }

    #[test]
    fn power_equals_series_form_on_grid() {
        for i in 0..25 {
            for j in 0..9 {
                let g = 10f64.powf(-3.0 + 6.0 * i as f64 / 24.0);
                let ratio = 10f64.powf(-1.0 + 2.0 * j as f64 / 8.0);
                let e = EngineParams::direct(g, ratio, 1.0, 0.7, 3.0, 0.2).validate().unwrap();
                let a = mean_power(&e);
                let b = mean_power_series(&e);
                assert!(
                    ((a - b) / a).abs() < 1e-12,
                    "g={g} ratio={ratio}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn quantum_noise_vanishes_in_vacuum() {
        let e = EngineParams::direct(1.0, 1.0, 1.0, 1.0, 0.0, 0.0).validate().unwrap();
        let (_, n) = quantum_noise(&e);
        assert_eq!(n, 0.0);
    }

    #[test]
    fn quantum_noise_at_reference_point() {
        let (d, n) = quantum_noise(&fig2());
        assert!((d.equilibrium - 0.4).abs() < 1e-15);
        assert!((d.shot - 0.112).abs() < 1e-15);
        assert!((n - 2.03968).abs() < 1e-14, "noise = {n}");
    }

    #[test]
    fn general_kappa_reduces_to_equal_kappa_form() {
        // distinct kappas give a genuinely different value...
        let uneq = EngineParams::direct(1.0, 2.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap();
        let eq15 = EngineParams::direct(1.0, 1.5, 1.5, 1.0, 2.0, 0.1).validate().unwrap();
        assert!((shot_coefficient(&uneq) - shot_coefficient(&eq15)).abs() > 1e-4);
        // ...but at kappa_h == kappa_c the main-text forms are reproduced exactly.
        for g in [0.05, 0.5, 1.0, 3.0, 20.0] {
            let e = EngineParams::direct(g, 1.5, 1.5, 1.0, 2.0, 0.1).validate().unwrap();
            let s = shot_coefficient(&e);
            let s12 = shot_coefficient_equal_kappa(&e).unwrap();
            assert!(((s - s12) / s).abs() < 1e-12, "g={g}");
            let sp = particle_shot_coefficient(&e);
            let sp13 = particle_shot_equal_kappa(&e).unwrap();
            assert!(((sp - sp13) / sp).abs() < 1e-12, "g={g}");
        }
    }

    #[test]
    fn wave_noise_at_reference_point() {
        let (_, n) = wave_noise(&wave(0.0));
        assert!((n - 1.19968).abs() < 1e-14, "noise = {n}");
    }

    #[test]
    fn wave_noise_vanishes_without_input() {
        let w = WaveParams::new(EngineParams::direct(1.0, 1.0, 1.0, 1.0, 0.0, 0.0), 0.0)
            .validate()
            .unwrap();
        let (_, n) = wave_noise(&w);
        assert_eq!(n, 0.0);
    }

    #[test]
    fn wave_offset_predicts_vacuum_noise() {
        // nbar = (0,0), C = 1/2: noise = 2 E C^2 = E/2
        let w = WaveParams::new(EngineParams::direct(1.0, 1.0, 1.0, 1.0, 0.0, 0.0), 0.5)
            .validate()
            .unwrap();
        let (d, n) = wave_noise(&w);
        assert!((n - d.equilibrium / 2.0).abs() < 1e-15);
        assert!(n > 0.0);
    }

    #[test]
    fn particle_noise_at_reference_point() {
        let (d, n) = particle_noise(&fig2());
        let sp_expect = 0.112 + 0.4 * 24.0 / 175.0;
        assert!((d.shot - sp_expect).abs() < 1e-15, "S_p = {}", d.shot);
        assert!((n - 40286.0 / 21875.0).abs() < 1e-14, "noise = {n}");
    }

    #[test]
    fn shot_mismatch_asymptotics() {
        // weak coupling: S_p - S -> 256 g^6 (kh^2 + 4 kh kc + kc^2) / (kh kc (kh+kc)^5)
        let e = EngineParams::direct(1e-3, 1.3, 0.7, 1.0, 2.0, 0.1).validate().unwrap();
        let ratio = shot_mismatch(&e) / shot_mismatch_small_g(&e);
        assert!((ratio - 1.0).abs() < 1e-4, "ratio = {ratio}");
        // strong coupling: S_p - S -> kh^3 kc^3 / (g^2 (kh+kc)^3)
        let e = EngineParams::direct(1e3, 1.3, 0.7, 1.0, 2.0, 0.1).validate().unwrap();
        let ratio = shot_mismatch(&e) / shot_mismatch_large_g(&e);
        assert!((ratio - 1.0).abs() < 1e-4, "ratio = {ratio}");
    }

    #[test]
    fn quantum_exceeds_wave_by_linear_terms() {
        for (g, kh, kc, nh, nc) in [
            (0.3, 1.0, 1.0, 2.0, 0.1),
            (1.0, 2.5, 0.4, 5.0, 1.0),
            (4.0, 0.8, 1.2, 0.3, 0.2),
        ] {
            let e = EngineParams::direct(g, kh, kc, 1.0, nh, nc).validate().unwrap();
            let w = WaveParams::new(e.to_params(), 0.0).validate().unwrap();
            let (d, nq) = quantum_noise(&e);
            let (_, nw) = wave_noise(&w);
            let gap = d.equilibrium * (nh + nc);
            assert!(((nq - nw) - gap).abs() < 1e-13 * nq.abs().max(1.0));
            assert!(nq >= nw);
        }
    }

    #[test]
    fn particle_shot_bounded_below_by_quantum() {
        for i in 0..40 {
            let g = 10f64.powf(-2.0 + 4.0 * i as f64 / 39.0);
            let e = EngineParams::direct(g, 1.7, 0.6, 1.0, 3.0, 0.4).validate().unwrap();
            assert!(shot_mismatch(&e) >= 0.0, "g = {g}");
        }
    }

    #[test]
    fn poisson_limit_values() {
        let s = poisson_limit(&fig2());
        // Gamma_hc = 2 * 2 * 1.1, Gamma_ch = 2 * 0.1 * 3
        assert!((s.mean_power - (4.4 - 0.6)).abs() < 1e-14);
        assert!((s.zero_freq_noise - 5.0).abs() < 1e-14);
        assert!((s.fano.value().unwrap() - 2.5 / 1.9).abs() < 1e-14);
    }

    #[test]
    fn poisson_limit_equilibrium_exchange() {
        let e = EngineParams::direct(1.0, 1.0, 2.0, 1.0, 0.5, 0.5).validate().unwrap();
        let s = poisson_limit(&e);
        assert_eq!(s.mean_power, 0.0);
        let expect = 2.0 * e.gamma_i() * 0.5 * 1.5;
        assert!((s.zero_freq_noise - expect).abs() < 1e-14);
        assert!(s.zero_freq_noise > 0.0);
    }

    #[test]
    fn poisson_limit_matches_quantum_fano_at_weak_coupling() {
        let e = EngineParams::direct(1e-3, 1.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap();
        let f_q = quantum_noise(&e).1 / mean_power(&e);
        let p = poisson_limit(&e);
        let f_p = p.zero_freq_noise / p.mean_power;
        assert!(((f_q - f_p) / f_p).abs() < 1e-4, "{f_q} vs {f_p}");
    }

    #[test]
    fn hybridized_limit_values() {
        let s = hybridized_limit(&fig2());
        assert!((s.mean_power - 0.95).abs() < 1e-14);
        assert!((s.zero_freq_noise - 2.1525).abs() < 1e-14);
    }

    #[test]
    fn hybridized_limit_equilibrium_reduction() {
        let e = EngineParams::direct(1.0, 2.0, 0.5, 1.0, 0.8, 0.8).validate().unwrap();
        let s = hybridized_limit(&e);
        assert_eq!(s.mean_power, 0.0);
        let expect = 2.0 * 0.5 * 2.0 / 2.5 * 0.8 * 1.8;
        assert!((s.zero_freq_noise - expect).abs() < 1e-14);
    }

    #[test]
    fn hybridized_limit_matches_particle_at_strong_coupling() {
        let e = EngineParams::direct(100.0, 1.0, 1.0, 1.0, 2.0, 0.1).validate().unwrap();
        let (_, n) = particle_noise(&e);
        let h = hybridized_limit(&e);
        assert!(((n - h.zero_freq_noise) / h.zero_freq_noise).abs() < 0.01);
        assert!(((mean_power(&e) - h.mean_power) / h.mean_power).abs() < 0.01);
    }
}
