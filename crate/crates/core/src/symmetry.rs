//! Symmetry-plane bookkeeping: Neumann/Dirichlet flags for the radiation
//! modes, the four-way (or two-way) decomposition of the incident phase,
//! synthesis of the decomposed body boundary condition, and the routing of
//! excitation forces to the block that matches each mode's parity.

use crate::waves::{cosh_ratio, sinh_ratio, solve_dispersion, Environment};
use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SymmetryError {
    #[error("parity error: {0}")]
    Parity(String),
    #[error("spectral input error: {0}")]
    SpectralInput(String),
    #[error("scheduling error: {0}")]
    Scheduling(String),
}

/// A symmetry plane of the fluid domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Plane {
    /// the y = 0 plane (tag symx)
    Y0,
    /// the x = 0 plane (tag symy)
    X0,
}

/// Parity of a field under reflection through a plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Parity of a mode shape about both coordinate planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeParity {
    /// parity under x -> -x (about the x = 0 plane)
    pub about_x0: Parity,
    /// parity under y -> -y (about the y = 0 plane)
    pub about_y0: Parity,
}

/// Parity of the rigid modes k = 1..6 of a doubly symmetric body.
pub fn rigid_mode_parity(k: usize) -> Result<ModeParity, SymmetryError> {
    use Parity::*;
    let p = match k {
        1 => ModeParity { about_x0: Odd, about_y0: Even },  // surge
        2 => ModeParity { about_x0: Even, about_y0: Odd },  // sway
        3 => ModeParity { about_x0: Even, about_y0: Even }, // heave
        4 => ModeParity { about_x0: Even, about_y0: Odd },  // roll
        5 => ModeParity { about_x0: Odd, about_y0: Even },  // pitch
        6 => ModeParity { about_x0: Odd, about_y0: Odd },   // yaw
        _ => {
            return Err(SymmetryError::Parity(format!(
                "mode {k} is generalized; its parity must be declared explicitly"
            )))
        }
    };
    Ok(p)
}

/// Table of radiation Neumann flags: true means homogeneous Neumann on the
/// plane, false means homogeneous Dirichlet.
pub fn radiation_flags(k: usize, plane: Plane) -> Result<bool, SymmetryError> {
    const Y0_FLAGS: [bool; 6] = [true, false, true, false, true, false];
    const X0_FLAGS: [bool; 6] = [false, true, true, true, false, false];
    if k == 0 || k > 6 {
        return Err(SymmetryError::Parity(format!(
            "mode {k} outside the rigid table; declare its parity instead"
        )));
    }
    Ok(match plane {
        Plane::Y0 => Y0_FLAGS[k - 1],
        Plane::X0 => X0_FLAGS[k - 1],
    })
}

/// Neumann flag of a declared parity on a plane.
pub fn parity_flag(parity: &ModeParity, plane: Plane) -> bool {
    match plane {
        Plane::Y0 => parity.about_y0 == Parity::Even,
        Plane::X0 => parity.about_x0 == Parity::Even,
    }
}

/// One factor of the decomposed incident phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseFactor {
    /// cos(k u): even part
    Cos,
    /// sin(k u): odd part (carries a -i or -1 coefficient)
    Sin,
    /// e^{-i k u}: undecomposed
    Exp,
}

impl PhaseFactor {
    fn value(&self, u: f64) -> Complex64 {
        match self {
            PhaseFactor::Cos => Complex64::new(u.cos(), 0.0),
            PhaseFactor::Sin => Complex64::new(u.sin(), 0.0),
            PhaseFactor::Exp => Complex64::from_polar(1.0, -u),
        }
    }

    /// derivative with respect to u
    fn deriv(&self, u: f64) -> Complex64 {
        match self {
            PhaseFactor::Cos => Complex64::new(-u.sin(), 0.0),
            PhaseFactor::Sin => Complex64::new(u.cos(), 0.0),
            PhaseFactor::Exp => Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, -u),
        }
    }

    fn is_decomposed(&self) -> bool {
        !matches!(self, PhaseFactor::Exp)
    }
}

/// One symmetry/anti-symmetry component of the incident wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymmetryBlock {
    /// phase factor in x (parity about the x = 0 plane)
    pub x_factor: PhaseFactor,
    /// phase factor in y (parity about the y = 0 plane)
    pub y_factor: PhaseFactor,
    pub label: &'static str,
}

impl SymmetryBlock {
    fn coefficient(&self) -> Complex64 {
        let sines = (self.x_factor == PhaseFactor::Sin) as usize
            + (self.y_factor == PhaseFactor::Sin) as usize;
        match sines {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            _ => Complex64::new(-1.0, 0.0),
        }
    }

    /// Neumann flag on the y = 0 plane, when this block is decomposed in y.
    pub fn theta_y0_plane(&self) -> Option<bool> {
        self.y_factor
            .is_decomposed()
            .then(|| self.y_factor == PhaseFactor::Cos)
    }

    /// Neumann flag on the x = 0 plane, when this block is decomposed in x.
    pub fn theta_x0_plane(&self) -> Option<bool> {
        self.x_factor
            .is_decomposed()
            .then(|| self.x_factor == PhaseFactor::Cos)
    }

    /// Spatial phase factor of this block at a point.
    pub fn phase(&self, k: f64, heading: f64, x: f64, y: f64) -> Complex64 {
        let c = heading.cos();
        let s = heading.sin();
        self.coefficient() * self.x_factor.value(k * x * c) * self.y_factor.value(k * y * s)
    }

    /// Whether the block matches a mode parity (per plane that is present).
    pub fn matches(&self, parity: &ModeParity) -> bool {
        let x_ok = match self.x_factor {
            PhaseFactor::Cos => parity.about_x0 == Parity::Even,
            PhaseFactor::Sin => parity.about_x0 == Parity::Odd,
            PhaseFactor::Exp => true,
        };
        let y_ok = match self.y_factor {
            PhaseFactor::Cos => parity.about_y0 == Parity::Even,
            PhaseFactor::Sin => parity.about_y0 == Parity::Odd,
            PhaseFactor::Exp => true,
        };
        x_ok && y_ok
    }
}

/// The decomposed blocks for a set of symmetry planes: four for two
/// planes, two for one, a single undecomposed block for none.
pub fn diffraction_blocks(planes: &[Plane]) -> Vec<SymmetryBlock> {
    use PhaseFactor::*;
    let has_y0 = planes.contains(&Plane::Y0);
    let has_x0 = planes.contains(&Plane::X0);
    match (has_x0, has_y0) {
        (true, true) => vec![
            SymmetryBlock { x_factor: Cos, y_factor: Cos, label: "SS" },
            SymmetryBlock { x_factor: Cos, y_factor: Sin, label: "SA" },
            SymmetryBlock { x_factor: Sin, y_factor: Cos, label: "AS" },
            SymmetryBlock { x_factor: Sin, y_factor: Sin, label: "AA" },
        ],
        (false, true) => vec![
            SymmetryBlock { x_factor: Exp, y_factor: Cos, label: "S" },
            SymmetryBlock { x_factor: Exp, y_factor: Sin, label: "A" },
        ],
        (true, false) => vec![
            SymmetryBlock { x_factor: Cos, y_factor: Exp, label: "S" },
            SymmetryBlock { x_factor: Sin, y_factor: Exp, label: "A" },
        ],
        (false, false) => vec![SymmetryBlock {
            x_factor: Exp,
            y_factor: Exp,
            label: "full",
        }],
    }
}

/// The block a force direction of a given parity must be read from.
pub fn required_block(
    blocks: &[SymmetryBlock],
    parity: &ModeParity,
) -> Result<SymmetryBlock, SymmetryError> {
    blocks
        .iter()
        .find(|b| b.matches(parity))
        .copied()
        .ok_or_else(|| {
            SymmetryError::Scheduling(format!(
                "no decomposed block matches parity {parity:?}; \
                 was the matching block scheduled?"
            ))
        })
}

/// Per-quadrant multiplier turning reduced-domain surface integrals into
/// full-domain ones for parity-matched integrands.
pub fn domain_multiplier(planes: &[Plane]) -> f64 {
    2f64.powi(planes.len() as i32)
}

/// The block's spatial incident gradient at one point, with the correct
/// omega -> 0 limit on the DC bin.
pub fn block_incident_gradient(
    block: &SymmetryBlock,
    env: &Environment,
    heading: f64,
    omega: f64,
    wavenumber: f64,
    point: [f64; 3],
) -> [Complex64; 3] {
    let g = env.gravity;
    let h = env.depth;
    let c = heading.cos();
    let s = heading.sin();
    let [x, y, z] = point;
    if omega == 0.0 {
        // long-wave limit: (i g k / omega) -> i sqrt(g/h), vertical -> 0
        let scale = Complex64::new(0.0, (g / h).sqrt()) * block.coefficient();
        let gx = scale * c * block.x_factor.deriv(0.0) * block.y_factor.value(0.0);
        let gy = scale * s * block.x_factor.value(0.0) * block.y_factor.deriv(0.0);
        return [gx, gy, Complex64::new(0.0, 0.0)];
    }
    let k = wavenumber;
    let ig_w = Complex64::new(0.0, g / omega);
    let cr = cosh_ratio(k, h, z);
    let sr = sinh_ratio(k, h, z);
    let coef = block.coefficient();
    let fx = block.x_factor.value(k * x * c);
    let fy = block.y_factor.value(k * y * s);
    let dfx = block.x_factor.deriv(k * x * c);
    let dfy = block.y_factor.deriv(k * y * s);
    [
        ig_w * cr * coef * (k * c) * dfx * fy,
        ig_w * cr * coef * (k * s) * fx * dfy,
        ig_w * k * sr * coef * fx * fy,
    ]
}

/// The block's incident dynamic pressure at one point and frequency.
pub fn block_incident_pressure(
    block: &SymmetryBlock,
    env: &Environment,
    heading: f64,
    omega: f64,
    wavenumber: f64,
    point: [f64; 3],
) -> Complex64 {
    let [x, y, z] = point;
    let cr = if omega == 0.0 {
        1.0
    } else {
        cosh_ratio(wavenumber, env.depth, z)
    };
    let k = if omega == 0.0 { 0.0 } else { wavenumber };
    Complex64::new(env.density * env.gravity * cr, 0.0) * block.phase(k, heading, x, y)
}

/// Pseudo-impulsive Neumann forcing series on the body surface:
/// `q(x, t) = -n . IFT[grad Psi_block(x, omega) * zeta_hat(omega)](t)`.
///
/// `zeta_spectrum` holds the elevation impulse spectrum on the FFT bins of
/// a uniform grid with spacing `dt` (bin m: omega = 2 pi m / (n dt),
/// upper half = negative frequencies) and must be conjugate-symmetric.
/// `shift` evaluates the series at t_n + shift (used for the half-step
/// stage times of the time integrator, exact for the band-limited series).
#[derive(Debug, Clone)]
pub struct ForcingSynthesis {
    /// one series per body quadrature point, length = spectrum length
    pub series: Vec<Vec<f64>>,
    /// largest imaginary residue relative to the series magnitude
    pub max_imag_residual: f64,
}

pub fn decomposed_body_bc(
    block: &SymmetryBlock,
    env: &Environment,
    heading: f64,
    points: &[[f64; 3]],
    normals: &[[f64; 3]],
    zeta_spectrum: &[Complex64],
    dt: f64,
    shift: f64,
) -> Result<ForcingSynthesis, SymmetryError> {
    let n = zeta_spectrum.len();
    if n < 2 {
        return Err(SymmetryError::SpectralInput(
            "spectrum needs at least two bins".into(),
        ));
    }
    // conjugate symmetry check
    let scale = zeta_spectrum.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for m in 1..n {
        let diff = (zeta_spectrum[m].conj() - zeta_spectrum[n - m]).norm();
        if diff > 1e-9 * scale {
            return Err(SymmetryError::SpectralInput(format!(
                "spectrum is not conjugate-symmetric at bin {m} (residual {diff:.3e})"
            )));
        }
    }

    let d_omega = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    // dispersion per positive bin
    let n_half = n / 2;
    let mut wavenumbers = vec![0.0; n_half + 1];
    for m in 1..=n_half {
        wavenumbers[m] = solve_dispersion(m as f64 * d_omega, env);
    }

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);
    let mut series = Vec::with_capacity(points.len());
    let mut max_imag = 0.0f64;

    for (pt, nrm) in points.iter().zip(normals) {
        let mut bins = vec![Complex64::new(0.0, 0.0); n];
        // the zero-frequency bin is excluded: a steady elevation carries no
        // flow, and the synthesized forcing must decay with the impulse
        for m in 1..=n_half {
            let omega = m as f64 * d_omega;
            let grad = block_incident_gradient(block, env, heading, omega, wavenumbers[m], *pt);
            let s = grad[0] * nrm[0] + grad[1] * nrm[1] + grad[2] * nrm[2];
            // stage shift as an exact spectral phase
            let val = s * zeta_spectrum[m] * Complex64::from_polar(1.0, omega * shift);
            bins[m] = val;
            if m > 0 && m < n - m {
                bins[n - m] = val.conj();
            }
        }
        if n % 2 == 0 && n_half > 0 {
            // Nyquist bin must be real for a real signal
            bins[n_half] = Complex64::new(bins[n_half].re, 0.0);
        }
        ifft.process(&mut bins);
        let norm = 1.0 / (n as f64 * dt);
        let mut out = Vec::with_capacity(n);
        let mut amp = 0.0f64;
        let mut imag = 0.0f64;
        for v in &bins {
            out.push(v.re * norm);
            amp = amp.max(v.re.abs() * norm);
            imag = imag.max(v.im.abs() * norm);
        }
        if amp > 0.0 {
            max_imag = max_imag.max(imag / amp);
        }
        series.push(out);
    }
    if max_imag > 1e-10 {
        return Err(SymmetryError::SpectralInput(format!(
            "synthesized forcing has imaginary residue {max_imag:.3e}"
        )));
    }
    Ok(ForcingSynthesis {
        series,
        max_imag_residual: max_imag,
    })
}
