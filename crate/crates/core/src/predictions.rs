//! Conformal map, hitting densities and their θ-distribution functions.
//!
//! Angles are degrees at every public boundary and radians internally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Spherical coordinates on the unit sphere, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereAngle {
    pub theta: f64,
    pub phi: f64,
}

impl SphereAngle {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) || !(0.0..std::f64::consts::TAU).contains(&phi) {
            return Err(Error::InvalidParameter(format!("angle out of range: theta={theta}, phi={phi}")));
        }
        Ok(SphereAngle { theta, phi })
    }

    pub fn to_cartesian(&self) -> Point3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Point3::new(cp * st, sp * st, ct)
    }
}

/// `f(x,y,z) = 2(x, y, 1−z) / (x² + y² + (1−z)²)`.
///
/// Sends the unit sphere to the plane `z = 1`, the origin to `(0,0,2)` and
/// `(0,0,a)` to `(0,0,2/(1−a))`.
pub fn conformal_map(p: Point3) -> Result<Point3> {
    let w = 1.0 - p.z;
    let r2 = p.x * p.x + p.y * p.y + w * w;
    if r2 == 0.0 {
        return Err(Error::Singular);
    }
    let s = 2.0 / r2;
    Ok(Point3::new(s * p.x, s * p.y, s * w))
}

/// Inverse of [`conformal_map`]: `p = (0,0,1) + 2(u, v, −w) / (u² + v² + w²)`.
///
/// `f` itself is not an involution; `f(0,0,2) = (0,0,−2)`.
pub fn conformal_map_inverse(q: Point3) -> Result<Point3> {
    let r2 = q.x * q.x + q.y * q.y + q.z * q.z;
    if r2 == 0.0 {
        return Err(Error::Singular);
    }
    let s = 2.0 / r2;
    Ok(Point3::new(s * q.x, s * q.y, 1.0 - s * q.z))
}

/// Image `(u, v)` on the plane `z = 1` of a point on the unit sphere.
pub fn sphere_to_plane(angle: SphereAngle) -> Result<(f64, f64)> {
    let denom = 1.0 - angle.theta.cos();
    if denom == 0.0 {
        return Err(Error::Singular);
    }
    let st = angle.theta.sin();
    Ok((st * angle.phi.cos() / denom, st * angle.phi.sin() / denom))
}

/// Area magnification of the map from the sphere to the plane.
pub fn area_jacobian(angle: SphereAngle) -> Result<f64> {
    let denom = 1.0 - angle.theta.cos();
    if denom == 0.0 {
        return Err(Error::Singular);
    }
    Ok(1.0 / (denom * denom))
}

/// Same magnification in plane coordinates: `(u² + v² + 1)² / 4`.
pub fn area_jacobian_uv(u: f64, v: f64) -> f64 {
    let s = u * u + v * v + 1.0;
    s * s / 4.0
}

/// Unnormalised half-space hitting density `(u² + v² + a²)^{-b}`.
pub fn half_space_density(u: f64, v: f64, a: f64, b: f64) -> f64 {
    (u * u + v * v + a * a).powf(-b)
}

/// Unnormalised sphere hitting density `(1 + a² − 2a cos θ)^{-b}`, θ in radians.
pub fn sphere_hit_density(theta: f64, a: f64, b: f64) -> f64 {
    (1.0 + a * a - 2.0 * a * theta.cos()).powf(-b)
}

/// Normalised density `(u² + v² + 1)^{-2} / π` of the first bisecting-plane hit.
pub fn bisecting_plane_density(u: f64, v: f64) -> f64 {
    (u * u + v * v + 1.0).powi(-2) / std::f64::consts::PI
}

fn check_b_plane(b: f64) -> Result<()> {
    if !(b > 1.0) {
        return Err(Error::InvalidParameter(format!("plane hitting density is not normalisable for b = {b} <= 1")));
    }
    Ok(())
}

/// `P(θ ≤ θ₀) = 1 − cos(θ₀)^{2(b−1)}` for the half-space hitting point seen from unit height.
pub fn half_space_cdf(theta0_deg: f64, b: f64) -> Result<f64> {
    check_b_plane(b)?;
    if !(0.0..=90.0).contains(&theta0_deg) {
        return Err(Error::InvalidParameter(format!("half-space angle must lie in [0, 90], got {theta0_deg}")));
    }
    if theta0_deg == 90.0 {
        return Ok(1.0);
    }
    Ok(1.0 - theta0_deg.to_radians().cos().powf(2.0 * (b - 1.0)))
}

/// Distribution of the polar angle of the sphere hitting point.
pub fn sphere_hit_cdf(theta0_deg: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::InvalidParameter(format!("sphere offset a must lie in [0,1), got {a}")));
    }
    if !(0.0..=180.0).contains(&theta0_deg) {
        return Err(Error::InvalidParameter(format!("sphere angle must lie in [0, 180], got {theta0_deg}")));
    }
    let c = theta0_deg.to_radians().cos();
    if a == 0.0 {
        return Ok((1.0 - c) / 2.0);
    }
    let q = |s: f64| -> f64 {
        // Antiderivative in s = 1 + a² − 2a cos θ of s^{-b}, up to the constant 1/(2a).
        if (b - 1.0).abs() < 1e-12 {
            s.ln()
        } else {
            s.powf(1.0 - b) / (1.0 - b)
        }
    };
    let lo = q((1.0 - a) * (1.0 - a));
    let hi = q((1.0 + a) * (1.0 + a));
    let mid = q(1.0 + a * a - 2.0 * a * c);
    Ok(((mid - lo) / (hi - lo)).clamp(0.0, 1.0))
}

/// `P(θ ≤ θ₀) = sin² θ₀` for the first hit of the bisecting plane.
pub fn bisecting_plane_cdf(theta0_deg: f64) -> Result<f64> {
    if !(0.0..=90.0).contains(&theta0_deg) {
        return Err(Error::InvalidParameter(format!("bisecting-plane angle must lie in [0, 90], got {theta0_deg}")));
    }
    Ok(theta0_deg.to_radians().sin().powi(2))
}

/// Which closed-form prediction a [`PredictedCdf`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    HalfSpace { b: f64 },
    Sphere { a: f64, b: f64 },
    Bisecting,
}

impl Density {
    pub fn cdf(&self, theta_deg: f64) -> Result<f64> {
        match *self {
            Density::HalfSpace { b } => half_space_cdf(theta_deg, b),
            Density::Sphere { a, b } => sphere_hit_cdf(theta_deg, a, b),
            Density::Bisecting => bisecting_plane_cdf(theta_deg),
        }
    }

    /// Largest admissible angle, degrees.
    pub fn max_theta(&self) -> f64 {
        match self {
            Density::Sphere { .. } => 180.0,
            _ => 90.0,
        }
    }
}

/// A predicted CDF on a θ grid, optionally conditioned on `θ ≤ cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedCdf {
    pub density: Density,
    pub cutoff_deg: Option<f64>,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl PredictedCdf {
    /// Evaluate `density` on `grid`; with a cutoff the values are `F(θ)/F(cutoff)`.
    pub fn new(density: Density, grid: &[f64], cutoff_deg: Option<f64>) -> Result<Self> {
        let norm = match cutoff_deg {
            Some(c) => {
                let f = density.cdf(c)?;
                if f <= 0.0 {
                    return Err(Error::InvalidParameter(format!("no probability mass below cutoff {c}")));
                }
                f
            }
            None => 1.0,
        };
        let values = grid
            .iter()
            .map(|&t| {
                let t = cutoff_deg.map_or(t, |c| t.min(c));
                density.cdf(t).map(|f| (f / norm).min(1.0))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PredictedCdf { density, cutoff_deg, grid: grid.to_vec(), values })
    }

    pub fn at(&self, theta_deg: f64) -> Result<f64> {
        let t = self.cutoff_deg.map_or(theta_deg, |c| theta_deg.min(c));
        let f = self.density.cdf(t)?;
        Ok(match self.cutoff_deg {
            Some(c) => (f / self.density.cdf(c)?).min(1.0),
            None => f,
        })
    }

    /// Probability mass in `(grid[k-1], grid[k]]`, with `grid[-1] = -∞`.
    pub fn bin_masses(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.values
            .iter()
            .map(|&f| {
                let m = f - prev;
                prev = f;
                m
            })
            .collect()
    }
}

/// Which integral [`quadrature_oracle`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleDensity {
    /// `(u² + v² + a²)^{-b}` over the plane at height `a`.
    HalfSpace { a: f64, b: f64 },
    /// `(1 + a² − 2a cos θ)^{-b}` over the unit sphere.
    Sphere { a: f64, b: f64 },
    /// `(u² + v² + 1)^{-2} / π` over the plane (already normalised).
    Bisecting,
}

const ORACLE_TOL: f64 = 1e-13;

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    quadrature::integrate(f, a, b, ORACLE_TOL).integral
}

/// `∫₀^∞ g(r) dr` split at r = 1, the tail mapped through r = t^{-m}.
///
/// For g ~ r^{1−2b} the tail integrand behaves like t^{m(2b−2)−1}, which is
/// bounded once m ≥ 1/(2b−2).
fn integrate_half_line(g: impl Fn(f64) -> f64, upto: f64, m: f64) -> f64 {
    if upto <= 1.0 {
        return integrate(&g, 0.0, upto);
    }
    let head = integrate(&g, 0.0, 1.0);
    let t_lo = if upto.is_finite() { upto.powf(-1.0 / m) } else { 0.0 };
    let tail = integrate(|t: f64| if t == 0.0 { 0.0 } else { m * g(t.powf(-m)) * t.powf(-m - 1.0) }, t_lo, 1.0);
    head + tail
}

fn tail_power(b: f64) -> f64 {
    (1.0 / (2.0 * b - 2.0)).ceil().max(1.0)
}

/// Numerical distribution function at `θ₀` (degrees), normalised by the
/// integral over the whole boundary. Plane densities are integrated in polar
/// coordinates over the disk of radius `a·tan θ₀`; the sphere density over
/// the cap `θ ≤ θ₀` with area element `sin θ dθ dφ`.
pub fn quadrature_oracle(density: OracleDensity, theta0_deg: f64) -> Result<f64> {
    let two_pi = std::f64::consts::TAU;
    match density {
        OracleDensity::HalfSpace { a, b } => {
            check_b_plane(b)?;
            if !(a > 0.0) || !(0.0..=90.0).contains(&theta0_deg) {
                return Err(Error::InvalidParameter(format!("half-space oracle: a={a}, theta0={theta0_deg}")));
            }
            let g = |r: f64| two_pi * r * half_space_density(r, 0.0, a, b);
            let radius = if theta0_deg == 90.0 { f64::INFINITY } else { a * theta0_deg.to_radians().tan() };
            let m = tail_power(b);
            let total = integrate_half_line(g, f64::INFINITY, m);
            Ok(integrate_half_line(g, radius, m) / total)
        }
        OracleDensity::Sphere { a, b } => {
            if !(0.0..1.0).contains(&a) || !(0.0..=180.0).contains(&theta0_deg) {
                return Err(Error::InvalidParameter(format!("sphere oracle: a={a}, theta0={theta0_deg}")));
            }
            let g = |t: f64| two_pi * t.sin() * sphere_hit_density(t, a, b);
            let total = integrate(g, 0.0, std::f64::consts::PI);
            Ok(integrate(g, 0.0, theta0_deg.to_radians()) / total)
        }
        OracleDensity::Bisecting => {
            if !(0.0..=90.0).contains(&theta0_deg) {
                return Err(Error::InvalidParameter(format!("bisecting oracle: theta0={theta0_deg}")));
            }
            let g = |r: f64| two_pi * r * bisecting_plane_density(r, 0.0);
            let radius = if theta0_deg == 90.0 { f64::INFINITY } else { theta0_deg.to_radians().tan() };
            Ok(integrate_half_line(g, radius, tail_power(2.0)))
        }
    }
}

/// Total mass of the bisecting-plane density; should be one.
pub fn bisecting_plane_mass() -> f64 {
    let two_pi = std::f64::consts::TAU;
    integrate_half_line(|r| two_pi * r * bisecting_plane_density(r, 0.0), f64::INFINITY, tail_power(2.0))
}
