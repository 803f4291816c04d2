//! Linear-algebra route to mean power and zero-frequency noise for the
//! quantum and wave models.
//!
//! Second moments close on the vector Theta = (<ah+ ah>, <ac+ ac>, <ah+ ac>,
//! <ac+ ah>) with d<Theta>/dt = X <Theta> + Y; recasting onto sigma =
//! (I, H, N_h, N_c), with I = i g (ah+ ac - ac+ ah) the current and H the
//! rotating-frame coupling, gives d<sigma>/dt = G <sigma> + F. The
//! regression theorem then yields the noise from initial two-time
//! correlators, which Wick (quantum) or Isserlis (wave) contractions reduce
//! to steady-state covariances. The two models share X and G; they differ in
//! the inhomogeneous vectors and in the commutator "+1" factors of the
//! contraction table.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{Engine, PowerStats};

/// Absolute bound on the imaginary residue of the noise (current units).
const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Model selector for the shared moment machinery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    Quantum,
    /// Classical wave model with white-noise offset C (Phi = nbar + C).
    Wave { offset_c: f64 },
}

impl ModelKind {
    fn occupations(&self, e: &Engine) -> (f64, f64) {
        match self {
            ModelKind::Quantum => (e.nbar_h(), e.nbar_c()),
            ModelKind::Wave { offset_c } => (e.nbar_h() + offset_c, e.nbar_c() + offset_c),
        }
    }

    /// The commutator terms present only in the quantum contraction table.
    fn one(&self) -> f64 {
        match self {
            ModelKind::Quantum => 1.0,
            ModelKind::Wave { .. } => 0.0,
        }
    }
}

/// Covariance system d<Theta>/dt = X <Theta> + Y.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSystem {
    pub x: Matrix4<Complex64>,
    pub y: Vector4<f64>,
}

/// Current-basis system d<sigma>/dt = G <sigma> + F.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSystem {
    pub g: Matrix4<f64>,
    pub f: Vector4<f64>,
}

/// Populate both linear systems; the model only affects Y and F.
pub fn build_systems(e: &Engine, model: ModelKind) -> (MomentSystem, SigmaSystem) {
    let (kh, kc) = (e.kappa_h(), e.kappa_c());
    let kbar = 0.5 * (kh + kc);
    let ig = Complex64::new(0.0, e.g());
    let r = |v: f64| Complex64::new(v, 0.0);

    let x = Matrix4::new(
        r(-kh), r(0.0), -ig, ig,
        r(0.0), r(-kc), ig, -ig,
        -ig, ig, r(-kbar), r(0.0),
        ig, -ig, r(0.0), r(-kbar),
    );
    let (ph, pc) = model.occupations(e);
    let y = Vector4::new(kh * ph, kc * pc, 0.0, 0.0);

    let g2 = 2.0 * e.g() * e.g();
    let gm = Matrix4::new(
        -kbar, 0.0, g2, -g2,
        0.0, -kbar, 0.0, 0.0,
        -1.0, 0.0, -kh, 0.0,
        1.0, 0.0, 0.0, -kc,
    );
    let f = Vector4::new(0.0, 0.0, kh * ph, kc * pc);

    (MomentSystem { x, y }, SigmaSystem { g: gm, f })
}

/// Steady-state covariance vector: solves X Theta = -Y.
pub fn steady_covariances(sys: &MomentSystem) -> Result<Vector4<Complex64>> {
    let rhs = -sys.y.map(|v| Complex64::new(v, 0.0));
    let theta = sys
        .x
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("singular covariance system".into()))?;
    if theta.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Solver("non-finite steady covariances".into()));
    }
    Ok(theta)
}

/// Regression initial conditions (<dI dI>, <dH dI>, <dN_h dI>, <dN_c dI>)
/// from Wick (quantum) or Isserlis (wave) contractions of the steady
/// covariances.
pub fn initial_conditions(
    e: &Engine,
    theta: &Vector4<Complex64>,
    model: ModelKind,
) -> Vector4<Complex64> {
    let one = Complex64::new(model.one(), 0.0);
    let g = Complex64::new(e.g(), 0.0);
    let i = Complex64::i();
    let (nh, nc, u, v) = (theta[0], theta[1], theta[2], theta[3]);

    let i2 = -g * g * (2.0 * u * u + 2.0 * v * v - 2.0 * u * v - nh * (nc + one) - nc * (nh + one));
    let hi = i * g * g * (2.0 * u * u - 2.0 * v * v + nc * (nh + one) - nh * (nc + one));
    let nhi = i * g * (u * (2.0 * nh + one) - 2.0 * nh * v);
    let nci = -i * g * (v * (2.0 * nc + one) - 2.0 * nc * u);

    let i_mean = i * g * (u - v);
    let h_mean = g * (u + v);

    Vector4::new(
        i2 - i_mean * i_mean,
        hi - h_mean * i_mean,
        nhi - nh * i_mean,
        nci - nc * i_mean,
    )
}

/// Zero-frequency power noise from the first entry of -2 G^-1 <dsigma dI>,
/// converted to power units with Delta^2.
///
/// Errors if the imaginary residue of that entry exceeds the internal
/// consistency bound.
pub fn regression_noise(
    sys: &SigmaSystem,
    init: &Vector4<Complex64>,
    delta: f64,
) -> Result<f64> {
    let gc = sys.g.map(|v| Complex64::new(v, 0.0));
    let z = gc
        .lu()
        .solve(init)
        .ok_or_else(|| Error::Solver("singular sigma system".into()))?;
    let first = -2.0 * z[0];
    if first.im.abs() > IMAG_RESIDUE_TOL {
        return Err(Error::Consistency(format!(
            "noise imaginary residue {:.3e} exceeds {:.0e}",
            first.im, IMAG_RESIDUE_TOL
        )));
    }
    Ok(first.re * delta * delta)
}

/// Mean power from the steady sigma vector, <P> = Delta [-G^-1 F]_1.
pub fn sigma_mean_power(sys: &SigmaSystem, delta: f64) -> Result<f64> {
    let s = sys
        .g
        .lu()
        .solve(&(-sys.f))
        .ok_or_else(|| Error::Solver("singular sigma system".into()))?;
    Ok(delta * s[0])
}

/// Full moment-engine route: mean power and noise for the given model.
pub fn power_stats(e: &Engine, model: ModelKind) -> Result<PowerStats> {
    let (msys, ssys) = build_systems(e, model);
    let theta = steady_covariances(&msys)?;
    let init = initial_conditions(e, &theta, model);
    let noise = regression_noise(&ssys, &init, e.delta())?;
    let mean = sigma_mean_power(&ssys, e.delta())?;
    Ok(PowerStats::new(mean, noise, e.delta()))
}
