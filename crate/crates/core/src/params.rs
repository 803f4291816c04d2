//! Engine configuration types, occupation conversions and validation.
//!
//! Units: hbar = k_B = 1. All rates (g, kappa) share one unit chosen by the
//! caller; power carries units of Delta x rate, noise Delta^2 x rate.

use crate::error::{Error, Result};

/// Default floor on |mean power| below which a Fano factor is reported as
/// undefined rather than divided out (natural units).
pub const FANO_FLOOR: f64 = 1e-14;

/// Bose-Einstein occupation 1/(exp(omega/T) - 1).
pub fn bose_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !omega.is_finite() || !temperature.is_finite() || omega <= 0.0 || temperature <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "bose_occupation requires finite positive arguments, got omega={omega}, T={temperature}"
        )));
    }
    Ok(1.0 / ((omega / temperature).exp_m1()))
}

/// How the bath occupations are specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OccupationSpec {
    /// Occupations given directly; `delta` must then be supplied on the params.
    Direct { nbar_h: f64, nbar_c: f64 },
    /// Occupations derived from mode frequencies and bath temperatures.
    Thermal { t_h: f64, t_c: f64 },
}

/// Raw engine configuration prior to validation.
///
/// `omega_h`/`omega_c` are required for the thermal spec; with the direct
/// spec only their difference matters and may be given as `delta` alone.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineParams {
    pub g: f64,
    pub kappa_h: f64,
    pub kappa_c: f64,
    /// Mode frequencies; `None` allowed for the direct spec when `delta` is set.
    pub omega_h: Option<f64>,
    pub omega_c: Option<f64>,
    /// Frequency difference omega_h - omega_c; derived when frequencies are given.
    pub delta: Option<f64>,
    pub occupation: OccupationSpec,
}

impl EngineParams {
    /// Direct-occupation constructor used throughout tests and sweeps.
    pub fn direct(g: f64, kappa_h: f64, kappa_c: f64, delta: f64, nbar_h: f64, nbar_c: f64) -> Self {
        Self {
            g,
            kappa_h,
            kappa_c,
            omega_h: None,
            omega_c: None,
            delta: Some(delta),
            occupation: OccupationSpec::Direct { nbar_h, nbar_c },
        }
    }

    /// Thermal constructor: occupations follow from (omega, T) pairs.
    pub fn thermal(g: f64, kappa_h: f64, kappa_c: f64, omega_h: f64, omega_c: f64, t_h: f64, t_c: f64) -> Self {
        Self {
            g,
            kappa_h,
            kappa_c,
            omega_h: Some(omega_h),
            omega_c: Some(omega_c),
            delta: None,
            occupation: OccupationSpec::Thermal { t_h, t_c },
        }
    }

    /// Validate and normalize; see [`Engine`].
    pub fn validate(&self) -> Result<Engine> {
        Engine::new(self)
    }
}

/// Non-fatal conditions flagged by validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Warning {
    /// nbar_h < nbar_c: reversed thermal bias (legal; power flows backwards).
    ReversedBias,
}

/// Validated, normalized engine configuration.
///
/// Immutable after construction; cheap to copy and safe to share across
/// threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Engine {
    g: f64,
    kappa_h: f64,
    kappa_c: f64,
    delta: f64,
    nbar_h: f64,
    nbar_c: f64,
    /// omega_alpha / T_alpha per bath; ln(1 + 1/nbar) under the direct spec.
    beta_omega_h: f64,
    beta_omega_c: f64,
    warnings: Vec<Warning>,
}

impl Engine {
    fn new(p: &EngineParams) -> Result<Self> {
        for (name, v) in [("g", p.g), ("kappa_h", p.kappa_h), ("kappa_c", p.kappa_c)] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite, got {v}")));
            }
        }
        if p.g < 0.0 {
            return Err(Error::InvalidParams(format!("g must be >= 0, got {}", p.g)));
        }
        if p.kappa_h <= 0.0 || p.kappa_c <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "bath couplings must be > 0, got kappa_h={}, kappa_c={}",
                p.kappa_h, p.kappa_c
            )));
        }

        let delta = match (p.omega_h, p.omega_c, p.delta) {
            (Some(oh), Some(oc), d) => {
                if oh <= 0.0 || oc <= 0.0 || !oh.is_finite() || !oc.is_finite() {
                    return Err(Error::InvalidParams(format!(
                        "mode frequencies must be finite and > 0, got omega_h={oh}, omega_c={oc}"
                    )));
                }
                if let Some(d) = d {
                    if (d - (oh - oc)).abs() > 1e-12 * (oh + oc).max(1.0) {
                        return Err(Error::InvalidParams(format!(
                            "delta={d} inconsistent with omega_h - omega_c = {}",
                            oh - oc
                        )));
                    }
                }
                oh - oc
            }
            (None, None, Some(d)) => d,
            _ => {
                return Err(Error::InvalidParams(
                    "specify either both mode frequencies or delta".into(),
                ))
            }
        };
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "delta = omega_h - omega_c must be > 0, got {delta}"
            )));
        }

        let (nbar_h, nbar_c, beta_omega_h, beta_omega_c) = match p.occupation {
            OccupationSpec::Direct { nbar_h, nbar_c } => {
                for (name, v) in [("nbar_h", nbar_h), ("nbar_c", nbar_c)] {
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::InvalidParams(format!(
                            "{name} must be finite and >= 0, got {v}"
                        )));
                    }
                }
                // omega/T from nbar; +inf at nbar = 0 (empty bath).
                let bo = |n: f64| (1.0 + 1.0 / n).ln();
                (nbar_h, nbar_c, bo(nbar_h), bo(nbar_c))
            }
            OccupationSpec::Thermal { t_h, t_c } => {
                let (oh, oc) = match (p.omega_h, p.omega_c) {
                    (Some(oh), Some(oc)) => (oh, oc),
                    _ => {
                        return Err(Error::InvalidParams(
                            "thermal occupation spec requires both mode frequencies".into(),
                        ))
                    }
                };
                let nh = bose_occupation(oh, t_h)?;
                let nc = bose_occupation(oc, t_c)?;
                (nh, nc, oh / t_h, oc / t_c)
            }
        };

        let mut warnings = Vec::new();
        if nbar_h < nbar_c {
            warnings.push(Warning::ReversedBias);
        }

        Ok(Engine {
            g: p.g,
            kappa_h: p.kappa_h,
            kappa_c: p.kappa_c,
            delta,
            nbar_h,
            nbar_c,
            beta_omega_h,
            beta_omega_c,
            warnings,
        })
    }

    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn kappa_h(&self) -> f64 {
        self.kappa_h
    }
    pub fn kappa_c(&self) -> f64 {
        self.kappa_c
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn nbar_h(&self) -> f64 {
        self.nbar_h
    }
    pub fn nbar_c(&self) -> f64 {
        self.nbar_c
    }
    /// omega_h/T_h (from temperatures, or ln(1 + 1/nbar_h) under the direct spec).
    pub fn beta_omega_h(&self) -> f64 {
        self.beta_omega_h
    }
    /// omega_c/T_c counterpart of [`Self::beta_omega_h`].
    pub fn beta_omega_c(&self) -> f64 {
        self.beta_omega_c
    }
    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    /// Intra-system incoherent transfer rate Gamma_I = 4 g^2 / (kappa_h + kappa_c).
    pub fn gamma_i(&self) -> f64 {
        4.0 * self.g * self.g / (self.kappa_h + self.kappa_c)
    }

    /// chi = [(kappa_h + kappa_c)(4 g^2 + kappa_h kappa_c)]^-1.
    pub fn chi(&self) -> f64 {
        1.0 / ((self.kappa_h + self.kappa_c) * (4.0 * self.g * self.g + self.kappa_h * self.kappa_c))
    }

    /// Round-trip back to a direct-spec parameter set (validation is idempotent
    /// through this).
    pub fn to_params(&self) -> EngineParams {
        EngineParams::direct(self.g, self.kappa_h, self.kappa_c, self.delta, self.nbar_h, self.nbar_c)
    }
}

/// Wave-model configuration: the engine plus the white-noise offset C, so the
/// input-noise strengths are Phi_alpha = nbar_alpha + C.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveParams {
    pub base: EngineParams,
    pub offset_c: f64,
}

impl WaveParams {
    pub fn new(base: EngineParams, offset_c: f64) -> Self {
        Self { base, offset_c }
    }

    pub fn validate(&self) -> Result<WaveEngine> {
        if !self.offset_c.is_finite() || self.offset_c < 0.0 {
            return Err(Error::InvalidParams(format!(
                "wave offset C must be finite and >= 0, got {}",
                self.offset_c
            )));
        }
        Ok(WaveEngine {
            engine: self.base.validate()?,
            offset_c: self.offset_c,
        })
    }
}

/// Validated wave-model configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveEngine {
    pub engine: Engine,
    pub offset_c: f64,
}

impl WaveEngine {
    pub fn phi_h(&self) -> f64 {
        self.engine.nbar_h() + self.offset_c
    }
    pub fn phi_c(&self) -> f64 {
        self.engine.nbar_c() + self.offset_c
    }
}

/// Fano factor, tagged undefined at (numerical) equilibrium where the mean
/// power vanishes while equilibrium fluctuations persist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fano {
    Defined(f64),
    Undefined,
}

impl Fano {
    pub fn value(&self) -> Option<f64> {
        match self {
            Fano::Defined(v) => Some(*v),
            Fano::Undefined => None,
        }
    }
}

impl std::fmt::Display for Fano {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Fano::Defined(v) => write!(f, "{v}"),
            Fano::Undefined => write!(f, "undefined"),
        }
    }
}

/// Mean power, zero-frequency power noise and the derived Fano factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerStats {
    pub mean_power: f64,
    pub zero_freq_noise: f64,
    pub fano: Fano,
}

impl PowerStats {
    /// Assemble stats; the Fano factor F = noise / (mean * delta) is tagged
    /// undefined when |mean| < floor.
    pub fn with_floor(mean_power: f64, zero_freq_noise: f64, delta: f64, floor: f64) -> Self {
        let fano = if mean_power.abs() < floor {
            Fano::Undefined
        } else {
            Fano::Defined(zero_freq_noise / (mean_power * delta))
        };
        PowerStats {
            mean_power,
            zero_freq_noise,
            fano,
        }
    }

    pub fn new(mean_power: f64, zero_freq_noise: f64, delta: f64) -> Self {
        Self::with_floor(mean_power, zero_freq_noise, delta, FANO_FLOOR)
    }
}

/// Which physical model a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Quantum,
    Wave,
    Particle,
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Model::Quantum => write!(f, "quantum"),
            Model::Wave => write!(f, "wave"),
            Model::Particle => write!(f, "particle"),
        }
    }
}

/// Equilibrium/shot decomposition of a zero-frequency power noise.
///
/// Assembly rule: quantum/particle noise is
/// `equilibrium * [nh(nh+1) + nc(nc+1)] - shot * (nh - nc)^2`,
/// the wave noise `equilibrium * (Phi_h^2 + Phi_c^2) - shot * (Phi_h - Phi_c)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDecomposition {
    pub equilibrium: f64,
    pub shot: f64,
    pub model: Model,
}

impl NoiseDecomposition {
    /// Apply the model's assembly rule at the given occupations (wave callers
    /// pass Phi_alpha, the others nbar_alpha).
    pub fn assemble(&self, occ_h: f64, occ_c: f64) -> f64 {
        let bias = (occ_h - occ_c) * (occ_h - occ_c);
        match self.model {
            Model::Quantum | Model::Particle => {
                self.equilibrium * (occ_h * (occ_h + 1.0) + occ_c * (occ_c + 1.0)) - self.shot * bias
            }
            Model::Wave => self.equilibrium * (occ_h * occ_h + occ_c * occ_c) - self.shot * bias,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig2() -> EngineParams {
        EngineParams::direct(1.0, 1.0, 1.0, 1.0, 2.0, 0.1)
    }

    #[test]
    fn bose_empty_mode_limit() {
        assert!(bose_occupation(700.0, 1.0).unwrap() < 1e-300);
        assert!(bose_occupation(50.0, 1.0).unwrap() < 2e-22);
    }

    #[test]
    fn bose_ln2_gives_unity() {
        let n = bose_occupation(std::f64::consts::LN_2, 1.0).unwrap();
        assert!((n - 1.0).abs() < 1e-14, "n = {n}");
    }

    #[test]
    fn bose_inverted_at_two() {
        // omega = 1, T = 1/ln(3/2)  =>  nbar = 2
        let n = bose_occupation(1.0, 1.0 / 1.5_f64.ln()).unwrap();
        assert!((n - 2.0).abs() < 1e-12, "n = {n}");
    }

    #[test]
    fn bose_rejects_bad_input() {
        assert!(bose_occupation(0.0, 1.0).is_err());
        assert!(bose_occupation(1.0, -1.0).is_err());
        assert!(bose_occupation(f64::NAN, 1.0).is_err());
        assert!(bose_occupation(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn validate_accepts_reference_point() {
        let e = fig2().validate().unwrap();
        assert_eq!(e.nbar_h(), 2.0);
        assert_eq!(e.nbar_c(), 0.1);
        assert_eq!(e.delta(), 1.0);
        assert!(e.warnings().is_empty());
        assert!((e.gamma_i() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn validate_rejects_zero_delta() {
        let p = EngineParams::direct(1.0, 1.0, 1.0, 0.0, 2.0, 0.1);
        assert!(p.validate().is_err());
        let p = EngineParams::thermal(1.0, 1.0, 1.0, 2.0, 2.0, 1.0, 0.5);
        assert!(p.validate().is_err());
    }

    #[test]
    fn validate_rejects_zero_kappa() {
        let p = EngineParams::direct(1.0, 0.0, 1.0, 1.0, 2.0, 0.1);
        assert!(p.validate().is_err());
    }

    #[test]
    fn validate_rejects_negative_occupation() {
        let p = EngineParams::direct(1.0, 1.0, 1.0, 1.0, -0.5, 0.1);
        assert!(p.validate().is_err());
    }

    #[test]
    fn validate_flags_reversed_bias() {
        let e = EngineParams::direct(1.0, 1.0, 1.0, 1.0, 0.1, 2.0).validate().unwrap();
        assert_eq!(e.warnings(), &[Warning::ReversedBias]);
    }

    #[test]
    fn thermal_occupations_are_exact() {
        let p = EngineParams::thermal(1.0, 1.0, 1.0, 2.0, 1.0, 4.0, 0.25);
        let e = p.validate().unwrap();
        assert!((e.nbar_h() - 1.0 / (0.5f64.exp() - 1.0)).abs() < 1e-15);
        assert!((e.nbar_c() - 1.0 / (4.0f64.exp() - 1.0)).abs() < 1e-15);
        assert!((e.beta_omega_h() - 0.5).abs() < 1e-15);
        assert!((e.beta_omega_c() - 4.0).abs() < 1e-15);
        assert_eq!(e.delta(), 1.0);
    }

    #[test]
    fn direct_spec_beta_omega_from_nbar() {
        let e = fig2().validate().unwrap();
        assert!((e.beta_omega_h() - 1.5f64.ln()).abs() < 1e-15);
        assert!((e.beta_omega_c() - 11.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn fano_undefined_below_floor() {
        let s = PowerStats::new(1e-15, 0.3, 1.0);
        assert_eq!(s.fano, Fano::Undefined);
        let s = PowerStats::new(0.76, 2.03968, 1.0);
        assert!((s.fano.value().unwrap() - 2.6837894736842105).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn bose_round_trips(nbar in 1e-3f64..1e3) {
            let omega = 1.7;
            let t = omega / (1.0 + 1.0 / nbar).ln();
            let back = bose_occupation(omega, t).unwrap();
            prop_assert!(((back - nbar) / nbar).abs() < 1e-12);
        }

        #[test]
        fn bose_monotone(omega in 0.1f64..10.0, t in 0.1f64..10.0) {
            let n = bose_occupation(omega, t).unwrap();
            prop_assert!(bose_occupation(omega, t * 1.1).unwrap() > n);
            prop_assert!(bose_occupation(omega * 1.1, t).unwrap() < n);
        }

        #[test]
        fn validate_idempotent(
            g in 0.0f64..10.0,
            kh in 0.1f64..10.0,
            kc in 0.1f64..10.0,
            delta in 0.1f64..10.0,
            nh in 0.0f64..10.0,
            nc in 0.0f64..10.0,
        ) {
            let once = EngineParams::direct(g, kh, kc, delta, nh, nc).validate().unwrap();
            let twice = once.to_params().validate().unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
