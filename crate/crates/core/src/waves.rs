//! Closed-form linear wave kinematics: the dispersion relation, incident
//! wave fields, the Gaussian pseudo-impulse with its analytic Fourier
//! transform, and damping-zone profiles.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WavesError {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Constant-depth environment.
#[derive(Debug, Clone, Copy)]
pub struct Environment {
    /// gravitational acceleration [m/s^2]
    pub gravity: f64,
    /// water depth in meters
    pub depth: f64,
    /// water density [kg/m^3]
    pub density: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Environment {
            gravity: 9.81,
            depth: 5.0,
            density: 1000.0,
        }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<(), WavesError> {
        if self.gravity <= 0.0 || self.depth <= 0.0 || self.density <= 0.0 {
            return Err(WavesError::Parameter(
                "gravity, depth, and density must all be positive".into(),
            ));
        }
        Ok(())
    }

    /// Shallow-water speed limit sqrt(g h).
    pub fn u_max(&self) -> f64 {
        (self.gravity * self.depth).sqrt()
    }
}

/// Solve g k tanh(k h) = omega^2 for k > 0 by bracketed Newton iteration.
pub fn solve_dispersion(omega: f64, env: &Environment) -> f64 {
    assert!(omega > 0.0, "dispersion requires omega > 0");
    let g = env.gravity;
    let h = env.depth;
    let target = omega * omega;
    // initial guess: blend of the deep and shallow asymptotes
    let k_deep = target / g;
    let k_shallow = omega / (g * h).sqrt();
    let mut k = if k_deep * h > 3.0 { k_deep } else { k_shallow };
    let f = |k: f64| g * k * (k * h).tanh() - target;
    // bracket
    let mut lo = k;
    let mut hi = k;
    while f(lo) > 0.0 {
        lo /= 2.0;
    }
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let th = (k * h).tanh();
        let fk = g * k * th - target;
        if fk.abs() <= 1e-14 * target {
            break;
        }
        if fk > 0.0 {
            hi = k;
        } else {
            lo = k;
        }
        let dfk = g * th + g * k * h * (1.0 - th * th);
        let newton = k - fk / dfk;
        k = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) < f64::EPSILON * k {
            break;
        }
    }
    k
}

/// Gaussian pseudo-impulse of unit height,
/// `g(t) = exp(-2 pi^2 s^2 (t - t0)^2)`, with t0 fixed by the start-up
/// cutoff epsilon so g(0) = epsilon.
#[derive(Debug, Clone, Copy)]
pub struct PseudoImpulse {
    /// width parameter, 1/seconds
    pub s: f64,
    /// peak time in seconds
    pub t0: f64,
    /// start-up cutoff
    pub epsilon: f64,
}

impl PseudoImpulse {
    pub fn new(s: f64, epsilon: f64) -> Result<PseudoImpulse, WavesError> {
        if s <= 0.0 {
            return Err(WavesError::Parameter(format!(
                "impulse width s must be positive, got {s}"
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(WavesError::Parameter(format!(
                "cutoff epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        let t0 = (epsilon.ln() / (-2.0 * PI * PI * s * s)).sqrt();
        Ok(PseudoImpulse { s, t0, epsilon })
    }

    pub fn with_default_cutoff(s: f64) -> Result<PseudoImpulse, WavesError> {
        PseudoImpulse::new(s, 1e-8)
    }

    /// Displacement g(t).
    pub fn displacement(&self, t: f64) -> f64 {
        let dt = t - self.t0;
        (-2.0 * PI * PI * self.s * self.s * dt * dt).exp()
    }

    /// Time derivative of the displacement (closed form).
    pub fn velocity(&self, t: f64) -> f64 {
        let dt = t - self.t0;
        -4.0 * PI * PI * self.s * self.s * dt * self.displacement(t)
    }

    /// Analytic Fourier transform
    /// F{g}(omega) = 1/(s sqrt(2 pi)) exp(-omega^2/(8 pi^2 s^2)) exp(-i omega t0).
    pub fn spectrum(&self, omega: f64) -> Complex64 {
        let mag = (1.0 / (self.s * (2.0 * PI).sqrt()))
            * (-omega * omega / (8.0 * PI * PI * self.s * self.s)).exp();
        Complex64::from_polar(mag, -omega * self.t0)
    }

    /// Spectrum of the velocity signal, i omega F{g}.
    pub fn velocity_spectrum(&self, omega: f64) -> Complex64 {
        Complex64::new(0.0, omega) * self.spectrum(omega)
    }
}

/// Frequency band carrying at least 10% of the peak spectral magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaLimit {
    pub lo: f64,
    pub hi: f64,
}

impl OmegaLimit {
    pub fn contains(&self, omega: f64) -> bool {
        omega >= self.lo && omega <= self.hi
    }

    /// Uniform grid of n points across the band.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        assert!(n >= 2);
        (0..n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Kinds of pseudo-impulsive forcing, deciding which spectrum bounds the
/// trusted band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingKind {
    /// radiation: the velocity spectrum |omega g^(omega)| sets the band
    Velocity,
    /// diffraction: the elevation spectrum |g^(omega)| sets the band
    Elevation,
}

/// The 10%-of-peak frequency band of the impulse.
pub fn omega_limit(pi: &PseudoImpulse, kind: ForcingKind) -> OmegaLimit {
    let level = 0.10;
    match kind {
        ForcingKind::Velocity => {
            // |omega ghat| peaks at omega* = 2 pi s
            let peak_omega = 2.0 * PI * pi.s;
            let peak = peak_omega * pi.spectrum(peak_omega).norm();
            let f = |w: f64| w * pi.spectrum(w).norm() - level * peak;
            let lo = bisect(f, 0.0, peak_omega);
            let mut hi_hi = peak_omega;
            while f(hi_hi) > 0.0 {
                hi_hi *= 2.0;
            }
            let hi = bisect(f, peak_omega, hi_hi);
            OmegaLimit { lo, hi }
        }
        ForcingKind::Elevation => {
            // |ghat| peaks at omega = 0; band is (0, hi]
            let peak = pi.spectrum(0.0).norm();
            let f = |w: f64| pi.spectrum(w).norm() - level * peak;
            let mut hi_hi = 2.0 * PI * pi.s;
            while f(hi_hi) > 0.0 {
                hi_hi *= 2.0;
            }
            let hi = bisect(f, 0.0, hi_hi);
            // avoid omega = 0 in downstream divisions
            OmegaLimit { lo: 1e-6 * hi, hi }
        }
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    // f(lo) and f(hi) must bracket a sign change
    let flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    let rising = flo < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * (1.0 + hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Stable evaluation of cosh(k(h+z))/cosh(kh) for z in [-h, 0].
pub fn cosh_ratio(k: f64, h: f64, z: f64) -> f64 {
    let a = k * (h + z);
    let b = k * h;
    ((a - b).exp() + (-a - b).exp()) / (1.0 + (-2.0 * b).exp())
}

/// Stable evaluation of sinh(k(h+z))/cosh(kh) for z in [-h, 0].
pub fn sinh_ratio(k: f64, h: f64, z: f64) -> f64 {
    let a = k * (h + z);
    let b = k * h;
    ((a - b).exp() - (-a - b).exp()) / (1.0 + (-2.0 * b).exp())
}

/// A single-frequency incident wave of unit amplitude.
#[derive(Debug, Clone, Copy)]
pub struct IncidentWave {
    pub omega: f64,
    pub wavenumber: f64,
    /// heading angle in radians relative to the +x axis
    pub heading: f64,
}

/// Heading plus a dispersion-consistent frequency grid.
#[derive(Debug, Clone)]
pub struct IncidentWaveSpec {
    pub heading: f64,
    pub omegas: Vec<f64>,
    pub wavenumbers: Vec<f64>,
}

impl IncidentWaveSpec {
    pub fn new(heading: f64, omegas: Vec<f64>, env: &Environment) -> IncidentWaveSpec {
        let wavenumbers = omegas.iter().map(|&w| solve_dispersion(w, env)).collect();
        IncidentWaveSpec {
            heading,
            omegas,
            wavenumbers,
        }
    }

    pub fn wave(&self, m: usize) -> IncidentWave {
        IncidentWave {
            omega: self.omegas[m],
            wavenumber: self.wavenumbers[m],
            heading: self.heading,
        }
    }
}

/// Spatial incident-wave fields at one point.
#[derive(Debug, Clone, Copy)]
pub struct IncidentFields {
    /// spatial potential Psi
    pub psi: Complex64,
    /// spatial gradient of Psi
    pub grad_psi: [Complex64; 3],
    /// incident dynamic pressure p0
    pub p0: Complex64,
}

impl IncidentWave {
    /// Evaluate Psi = (i g / omega) cosh(k(h+z))/cosh(kh) e^{-i k alpha},
    /// its gradient, and p0 = rho g cosh(k(h+z))/cosh(kh) e^{-i k alpha}.
    pub fn fields(&self, env: &Environment, point: [f64; 3]) -> Result<IncidentFields, WavesError> {
        let [x, y, z] = point;
        let h = env.depth;
        if z < -h - 1e-9 * h || z > 1e-9 * h {
            return Err(WavesError::Domain(format!(
                "point z = {z} outside the water column [-{h}, 0]"
            )));
        }
        let k = self.wavenumber;
        let g = env.gravity;
        let c = self.heading.cos();
        let s = self.heading.sin();
        let alpha = x * c + y * s;
        let phase = Complex64::from_polar(1.0, -k * alpha);
        let ig_w = Complex64::new(0.0, g / self.omega);
        let cr = cosh_ratio(k, h, z);
        let sr = sinh_ratio(k, h, z);
        let psi = ig_w * cr * phase;
        let ddir = Complex64::new(0.0, -k) * psi; // d/d(alpha)
        let grad_psi = [ddir * c, ddir * s, ig_w * k * sr * phase];
        let p0 = Complex64::new(env.density * g * cr, 0.0) * phase;
        Ok(IncidentFields { psi, grad_psi, p0 })
    }
}

/// Geometry of a damping zone along an axis or radially.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZoneGeometry {
    /// active where |x| is in [start, end]
    X { start: f64, end: f64 },
    /// active where |y| is in [start, end]
    Y { start: f64, end: f64 },
    /// active where hypot(x, y) is in [start, end]
    Radial { start: f64, end: f64 },
}

/// A free-surface damping zone with the smooth bump profile peaking at
/// 2 pi in the middle of the zone.
#[derive(Debug, Clone, Copy)]
pub struct DampingZone {
    pub geometry: ZoneGeometry,
}

pub const DAMPING_PEAK: f64 = 2.0 * PI;

impl DampingZone {
    pub fn new(geometry: ZoneGeometry) -> Result<DampingZone, WavesError> {
        let (start, end) = match geometry {
            ZoneGeometry::X { start, end }
            | ZoneGeometry::Y { start, end }
            | ZoneGeometry::Radial { start, end } => (start, end),
        };
        if !(end > start && start >= 0.0) {
            return Err(WavesError::Parameter(format!(
                "damping zone needs 0 <= start < end, got [{start}, {end}]"
            )));
        }
        Ok(DampingZone { geometry })
    }

    fn zone_coordinate(&self, x: f64, y: f64) -> (f64, f64, f64) {
        match self.geometry {
            ZoneGeometry::X { start, end } => (x.abs(), start, end),
            ZoneGeometry::Y { start, end } => (y.abs(), start, end),
            ZoneGeometry::Radial { start, end } => (x.hypot(y), start, end),
        }
    }

    /// Smooth bump: zero outside the zone with all derivatives vanishing
    /// at the entry, maximum 2 pi at the midpoint.
    pub fn profile(&self, x: f64, y: f64) -> f64 {
        let (c, start, end) = self.zone_coordinate(x, y);
        let xi = (c - start) / (end - start);
        if xi <= 0.0 || xi >= 1.0 {
            return 0.0;
        }
        let u = 2.0 * xi - 1.0;
        DAMPING_PEAK * (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

/// Pointwise damping coefficients c_p and c_v; both use the same profile.
pub fn damping_profiles(zones: &[DampingZone], points: &[[f64; 2]]) -> (Vec<f64>, Vec<f64>) {
    let vals: Vec<f64> = points
        .iter()
        .map(|p| zones.iter().map(|z| z.profile(p[0], p[1])).sum())
        .collect();
    (vals.clone(), vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> Environment {
        Environment::default()
    }

    #[test]
    fn dispersion_shallow_asymptote() {
        let e = env();
        let omega = 0.01;
        let k = solve_dispersion(omega, &e);
        let k_shallow = omega / (e.gravity * e.depth).sqrt();
        assert!((k - k_shallow).abs() / k_shallow < 1e-3);
    }

    #[test]
    fn dispersion_deep_asymptote() {
        let e = env();
        // kh > 10
        let omega = 10.0;
        let k = solve_dispersion(omega, &e);
        assert!(k * e.depth > 10.0);
        let k_deep = omega * omega / e.gravity;
        assert!((k - k_deep).abs() / k_deep < 1e-3);
    }

    #[test]
    fn dispersion_matches_bisection_oracle() {
        let e = Environment {
            gravity: 9.81,
            depth: 5.0,
            density: 1000.0,
        };
        let omega = 2.0f64;
        // plain bisection oracle on the monotone residual
        let f = |k: f64| e.gravity * k * (k * e.depth).tanh() - omega * omega;
        let (mut lo, mut hi) = (1e-8, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k_oracle = 0.5 * (lo + hi);
        let k = solve_dispersion(omega, &e);
        assert!((k - k_oracle).abs() < 1e-12 * k_oracle, "{k} vs {k_oracle}");
    }

    #[test]
    fn dispersion_residual_over_log_grid() {
        let e = env();
        let n = 60;
        for i in 0..n {
            let omega = 0.05 * (50.0f64 / 0.05).powf(i as f64 / (n - 1) as f64);
            let k = solve_dispersion(omega, &e);
            let res = (e.gravity * k * (k * e.depth).tanh() - omega * omega).abs();
            assert!(res < 1e-12 * omega * omega, "omega={omega}: {res:.3e}");
            assert!(k > 0.0);
        }
    }

    #[test]
    fn impulse_peak_and_startup() {
        let pi_ = PseudoImpulse::new(0.4, 1e-8).unwrap();
        assert!((pi_.displacement(pi_.t0) - 1.0).abs() < 1e-14);
        assert!(pi_.velocity(pi_.t0).abs() < 1e-14);
        assert!(pi_.displacement(0.0) <= 1e-8 * (1.0 + 1e-12));
        // t0 closed form: sqrt(ln(1e8) / (2 pi^2 0.16)) = 2.41506...
        assert!((pi_.t0 - 2.4151).abs() < 5e-4, "{}", pi_.t0);
    }

    #[test]
    fn spectrum_matches_quadrature_oracle() {
        // numerically integrate g(t) e^{-i w t} dt with the trapezoid rule
        let pi_ = PseudoImpulse::new(0.4, 1e-8).unwrap();
        // integrate over [t0 - 4 t0, t0 + 4 t0]; the tails are ~epsilon^16
        let t_lo = -3.0 * pi_.t0;
        let t_hi = 5.0 * pi_.t0;
        let n = 20_000usize;
        let dt = (t_hi - t_lo) / n as f64;
        for &omega in &[0.0, 0.3, 1.0, 2.5, 5.0, -1.7] {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..=n {
                let t = t_lo + i as f64 * dt;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += w * pi_.displacement(t) * Complex64::from_polar(1.0, -omega * t) * dt;
            }
            let exact = pi_.spectrum(omega);
            assert!(
                (acc - exact).norm() < 1e-10,
                "omega={omega}: {acc} vs {exact}"
            );
        }
        // |ghat(0)| = 1/(0.4 sqrt(2 pi))
        let mag0 = pi_.spectrum(0.0).norm();
        assert!((mag0 - 0.99736).abs() < 1e-4, "{mag0}");
    }

    #[test]
    fn spectrum_symmetry_and_phase() {
        let pi_ = PseudoImpulse::new(0.7, 1e-8).unwrap();
        for &w in &[0.1, 0.9, 3.3] {
            assert!((pi_.spectrum(w).norm() - pi_.spectrum(-w).norm()).abs() < 1e-15);
            let arg = pi_.spectrum(w).arg();
            let expect = -w * pi_.t0;
            let wrapped = (arg - expect).rem_euclid(2.0 * PI);
            assert!(wrapped.min(2.0 * PI - wrapped) < 1e-12);
        }
    }

    #[test]
    fn omega_limit_velocity_band() {
        let s = 0.4;
        let pi_ = PseudoImpulse::new(s, 1e-8).unwrap();
        let band = omega_limit(&pi_, ForcingKind::Velocity);
        let peak_omega = 2.0 * PI * s;
        assert!((peak_omega - 2.5133).abs() < 1e-3);
        assert!(band.contains(peak_omega));
        // endpoints sit at the 10% level
        let peak = peak_omega * pi_.spectrum(peak_omega).norm();
        for w in [band.lo, band.hi] {
            let v = w * pi_.spectrum(w).norm();
            assert!((v - 0.1 * peak).abs() < 1e-6 * peak, "w={w}");
        }
        // smaller s widens the band
        let wide = omega_limit(&PseudoImpulse::new(s / 2.0, 1e-8).unwrap(), ForcingKind::Velocity);
        assert!(wide.hi - wide.lo < band.hi - band.lo);
        let narrow = omega_limit(&PseudoImpulse::new(2.0 * s, 1e-8).unwrap(), ForcingKind::Velocity);
        assert!(narrow.hi - narrow.lo > band.hi - band.lo);
    }

    #[test]
    fn incident_fields_reference_values() {
        let e = env();
        let spec = IncidentWaveSpec::new(0.0, vec![1.5], &e);
        let w = spec.wave(0);
        // |p0| at z=0 equals rho g
        let f = w.fields(&e, [0.3, -0.2, 0.0]).unwrap();
        assert!((f.p0.norm() - e.density * e.gravity).abs() < 1e-9);
        // vertical velocity vanishes at the seabed
        let fb = w.fields(&e, [1.0, 2.0, -e.depth]).unwrap();
        assert!(fb.grad_psi[2].norm() < 1e-12);
        // beta = 0: no y-component
        assert!(f.grad_psi[1].norm() < 1e-14);
        // outside the water column
        assert!(w.fields(&e, [0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn incident_gradient_matches_finite_differences() {
        let e = env();
        let spec = IncidentWaveSpec::new(0.7, vec![1.1], &e);
        let w = spec.wave(0);
        let h = 1e-6;
        let p = [0.4, -0.8, -2.0];
        let f = w.fields(&e, p).unwrap();
        for d in 0..3 {
            let mut pp = p;
            let mut pm = p;
            pp[d] += h;
            pm[d] -= h;
            let fd = (w.fields(&e, pp).unwrap().psi - w.fields(&e, pm).unwrap().psi) / (2.0 * h);
            assert!(
                (fd - f.grad_psi[d]).norm() < 1e-6 * f.grad_psi[d].norm().max(1.0),
                "component {d}"
            );
        }
    }

    #[test]
    fn incident_field_satisfies_laplace_discretely() {
        let e = env();
        let spec = IncidentWaveSpec::new(0.3, vec![2.0], &e);
        let w = spec.wave(0);
        let h = 1e-4;
        let p = [0.2, 0.5, -1.5];
        let c = w.fields(&e, p).unwrap().psi;
        let mut lap = Complex64::new(0.0, 0.0);
        for d in 0..3 {
            let mut pp = p;
            let mut pm = p;
            pp[d] += h;
            pm[d] -= h;
            lap += w.fields(&e, pp).unwrap().psi + w.fields(&e, pm).unwrap().psi
                - 2.0 * c;
        }
        lap /= h * h;
        assert!(lap.norm() < 1e-4 * c.norm(), "{}", lap.norm());
    }

    #[test]
    fn damping_profile_shape() {
        let z = DampingZone::new(ZoneGeometry::X {
            start: 5.0,
            end: 9.0,
        })
        .unwrap();
        // zero outside
        assert_eq!(z.profile(4.9, 0.0), 0.0);
        assert_eq!(z.profile(9.1, 0.0), 0.0);
        // peak 2 pi at the middle
        assert!((z.profile(7.0, 0.0) - DAMPING_PEAK).abs() < 1e-14);
        assert!((z.profile(-7.0, 3.0) - DAMPING_PEAK).abs() < 1e-14);
        // C1 at the entry: value and slope tiny
        let eps = 1e-3;
        let v = z.profile(5.0 + eps, 0.0);
        assert!(v < 1e-100, "{v}");
        let slope = (z.profile(5.0 + 2.0 * eps, 0.0) - v) / eps;
        assert!(slope.abs() < 1e-50);
        // monotone rise to the middle
        assert!(z.profile(6.0, 0.0) < z.profile(6.9, 0.0));
    }

    #[test]
    fn damping_zone_validation() {
        assert!(DampingZone::new(ZoneGeometry::X { start: 3.0, end: 2.0 }).is_err());
        assert!(DampingZone::new(ZoneGeometry::Radial { start: -1.0, end: 2.0 }).is_err());
    }

    #[test]
    fn cosh_ratio_stable_at_large_kh() {
        // kh = 500: naive cosh overflows, the ratio must stay finite
        let r = cosh_ratio(100.0, 5.0, -0.1);
        assert!(r.is_finite());
        assert!((r - (-100.0 * 0.1f64).exp()).abs() < 1e-12);
        let s = sinh_ratio(100.0, 5.0, 0.0);
        assert!((s - 1.0).abs() < 1e-12);
    }
}
