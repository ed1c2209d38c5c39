//! Weighted hitting-angle samples for the three geometric ensembles.
//!
//! Each fixed-N walk is mapped by a dilation (plus a rotation or translation)
//! onto a walk in the target geometry; the importance weight undoes the
//! fixed-N bias so that the weighted samples approximate the ensemble with a
//! free number of steps.
//!
//! * full space: walk from the origin to a fixed point, observable is the
//!   first crossing of the plane bisecting the two endpoints;
//! * half space: walk from an interior point to the boundary plane;
//! * sphere: walk from `(0,0,a)` inside the unit ball to its surface.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, Walk};
use crate::pivot::Constraint;
use crate::predictions::{Density, PredictedCdf};
use crate::stats::{correction_profile, CorrectionProfile, EmpiricalCdf};

/// Conditioning cutoff for the two plane ensembles, in degrees.
pub const DEFAULT_CUTOFF_DEG: f64 = 85.0;

/// Distance from the centre of the unit sphere to the interior endpoint.
pub const DEFAULT_SPHERE_A: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// First hit of the bisecting plane by a full-space walk.
    Full,
    /// Hitting point on the boundary of a half space.
    Half,
    /// Hitting point on a sphere, walk started off-centre.
    Sphere,
}

impl Ensemble {
    pub const ALL: [Ensemble; 3] = [Ensemble::Full, Ensemble::Half, Ensemble::Sphere];

    pub fn tag(&self) -> &'static str {
        match self {
            Ensemble::Full => "full",
            Ensemble::Half => "half",
            Ensemble::Sphere => "sphere",
        }
    }

    /// Constraint the underlying pivot chain must enforce.
    pub fn constraint(&self) -> Constraint {
        match self {
            Ensemble::Half => Constraint::HalfSpace,
            Ensemble::Full | Ensemble::Sphere => Constraint::None,
        }
    }

    /// Whether samples of this ensemble are conditioned on `theta <= cutoff`.
    pub fn is_conditioned(&self) -> bool {
        !matches!(self, Ensemble::Sphere)
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Ensemble {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "bisecting" => Ok(Ensemble::Full),
            "half" | "half_space" => Ok(Ensemble::Half),
            "sphere" => Ok(Ensemble::Sphere),
            other => Err(Error::InvalidConfig(format!("unknown ensemble '{other}' (expected full, half or sphere)"))),
        }
    }
}

/// `b = (2ρ − γ + dν) / (2ν)`.
pub fn derive_b(nu: f64, gamma: f64, rho: f64, d: f64) -> f64 {
    (2.0 * rho - gamma + d * nu) / (2.0 * nu)
}

/// Critical exponents; `rho` and `b` are always derived, never stored independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "ExponentRecord", try_from = "ExponentRecord")]
pub struct ExponentSet {
    nu: f64,
    gamma: f64,
    gamma1: f64,
    d: f64,
    rho: f64,
    b: f64,
}

impl ExponentSet {
    pub fn new(nu: f64, gamma: f64, gamma1: f64, d: f64) -> Result<Self> {
        if !(nu > 0.0 && gamma > 0.0 && gamma1 > 0.0 && d > 0.0)
            || ![nu, gamma, gamma1, d].iter().all(|v| v.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "exponents must be positive and finite (nu={nu}, gamma={gamma}, gamma1={gamma1}, d={d})"
            )));
        }
        let rho = gamma - gamma1;
        let b = derive_b(nu, gamma, rho, d);
        Ok(ExponentSet { nu, gamma, gamma1, d, rho, b })
    }

    /// Three-dimensional self-avoiding walk: ν = 0.587597, γ = 1.15698, γ₁ = 0.679.
    pub fn saw_3d() -> Self {
        ExponentSet::new(0.587597, 1.15698, 0.679, 3.0).expect("valid preset")
    }

    /// Ordinary random walk in three dimensions (b = 3/2).
    pub fn random_walk() -> Self {
        ExponentSet::new(0.5, 1.0, 0.5, 3.0).expect("valid preset")
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn b(&self) -> f64 {
        self.b
    }

    /// γ/ν: exponent of the walk-scale weight for walks with both ends free in space.
    pub fn weight_full(&self) -> f64 {
        self.gamma / self.nu
    }

    /// (γ − ρ)/ν: exponent for walks with one end on a boundary.
    pub fn weight_boundary(&self) -> f64 {
        (self.gamma - self.rho) / self.nu
    }
}

#[derive(Serialize, Deserialize)]
struct ExponentRecord {
    nu: f64,
    gamma: f64,
    gamma1: f64,
    d: f64,
    #[serde(default)]
    rho: Option<f64>,
    #[serde(default)]
    b: Option<f64>,
}

impl From<ExponentSet> for ExponentRecord {
    fn from(e: ExponentSet) -> Self {
        ExponentRecord { nu: e.nu, gamma: e.gamma, gamma1: e.gamma1, d: e.d, rho: Some(e.rho), b: Some(e.b) }
    }
}

impl TryFrom<ExponentRecord> for ExponentSet {
    type Error = Error;
    fn try_from(r: ExponentRecord) -> Result<Self> {
        ExponentSet::new(r.nu, r.gamma, r.gamma1, r.d)
    }
}

/// Ball of radius one about the origin, walks start at `(0,0,a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    a: f64,
}

impl SphereSpec {
    pub fn new(a: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) {
            return Err(Error::InvalidParameter(format!("sphere offset a must lie in [0,1), got {a}")));
        }
        Ok(SphereSpec { a })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
}

impl Default for SphereSpec {
    fn default() -> Self {
        SphereSpec { a: DEFAULT_SPHERE_A }
    }
}

/// What the half-space weight is a power of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfSpaceWeight {
    /// `ω(N)_z^{-(γ−ρ)/ν}`: the height of the endpoint, i.e. the dilation
    /// factor that puts the boundary plane at unit distance.
    #[default]
    Height,
    /// `‖ω(N)‖^{-(γ−ρ)/ν}`.
    EndpointNorm,
}

/// Importance weight for the sphere ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereWeight {
    /// `λ^{(γ−ρ)/ν} / (1 − a cos θ)`, with `1/λ` the dilation factor taking the
    /// walk into the unit ball. The denominator is the normal component of
    /// the chord from the start point to the hitting point.
    #[default]
    Flux,
    /// `‖ω(N)‖^{-(γ−ρ)/ν}`.
    BoundaryNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WeightScheme {
    #[serde(default)]
    pub half_space: HalfSpaceWeight,
    #[serde(default)]
    pub sphere: SphereWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub ensemble: Ensemble,
    pub theta_deg: f64,
    pub weight: f64,
    /// `false` when the plane ensembles' angle exceeds the conditioning cutoff.
    pub within_cutoff: bool,
}

impl WeightedSample {
    fn new(ensemble: Ensemble, theta_deg: f64, weight: f64, cutoff_deg: f64) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::Internal(format!("non-positive or non-finite weight {weight}")));
        }
        let within_cutoff = !ensemble.is_conditioned() || theta_deg <= cutoff_deg;
        Ok(WeightedSample { ensemble, theta_deg, weight, within_cutoff })
    }
}

fn angle_between_deg(p: [f64; 3], q: [f64; 3]) -> f64 {
    let cross = [p[1] * q[2] - p[2] * q[1], p[2] * q[0] - p[0] * q[2], p[0] * q[1] - p[1] * q[0]];
    let c = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let d = p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
    c.atan2(d).to_degrees()
}

fn as_f64(p: LatticePoint) -> [f64; 3] {
    [p.x as f64, p.y as f64, p.z as f64]
}

/// Index `j` and crossing point of the first edge `(ω(j−1), ω(j))` that
/// reaches the plane bisecting the origin and `ω(N)`.
pub fn bisecting_crossing(walk: &Walk) -> Result<(usize, [f64; 3])> {
    let e = walk.endpoint();
    let e2 = e.norm2();
    if e2 == 0 {
        return Err(Error::InvalidWalk("walk returns to the origin".into()));
    }
    // ⟨ω(j), ê⟩ ≥ ‖e‖/2  ⇔  2⟨ω(j), e⟩ ≥ ‖e‖², exact in integers.
    let sites = walk.sites();
    let mut prev = 0i128;
    for (j, &p) in sites.iter().enumerate().skip(1) {
        let d = p.dot(e);
        if 2 * d >= e2 {
            let t = (e2 as f64 / 2.0 - prev as f64) / (d - prev) as f64;
            let a = as_f64(sites[j - 1]);
            let b = as_f64(p);
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])];
            return Ok((j, x));
        }
        prev = d;
    }
    Err(Error::Internal("no crossing of the bisecting plane".into()))
}

/// Full-space ensemble: angle at the origin between the first bisecting-plane
/// crossing and the endpoint direction, weight `‖ω(N)‖^{-γ/ν}`.
pub fn full_space_sample(walk: &Walk, exps: &ExponentSet, cutoff_deg: f64) -> Result<WeightedSample> {
    let (_, p) = bisecting_crossing(walk)?;
    let e = walk.endpoint();
    let theta = angle_between_deg(p, as_f64(e));
    let weight = e.norm().powf(-exps.weight_full());
    WeightedSample::new(Ensemble::Full, theta, weight, cutoff_deg)
}

/// Half-space ensemble: polar angle of the endpoint.
pub fn half_space_sample(
    walk: &Walk,
    exps: &ExponentSet,
    scheme: HalfSpaceWeight,
    cutoff_deg: f64,
) -> Result<WeightedSample> {
    let e = walk.endpoint();
    if e.z <= 0 {
        return Err(Error::Internal(format!("half-space endpoint {e} is not above the boundary")));
    }
    let rho = ((e.x * e.x + e.y * e.y) as f64).sqrt();
    let theta = rho.atan2(e.z as f64).to_degrees();
    let scale = match scheme {
        HalfSpaceWeight::Height => e.z as f64,
        HalfSpaceWeight::EndpointNorm => e.norm(),
    };
    let weight = scale.powf(-exps.weight_boundary());
    WeightedSample::new(Ensemble::Half, theta, weight, cutoff_deg)
}

/// The dilation `λ > 0` with `‖λ·e + (0,0,a)‖ = 1`.
pub fn sphere_dilation(e: LatticePoint, a: f64) -> Option<f64> {
    let e2 = e.norm2() as f64;
    if e2 == 0.0 {
        return None;
    }
    let ez = e.z as f64;
    // λ = (−a e_z + sqrt(a² e_z² + (1 − a²) ‖e‖²)) / ‖e‖²; the second form
    // avoids cancellation when a·e_z > 0.
    let disc = (a * a * ez * ez + (1.0 - a * a) * e2).sqrt();
    let lambda = if a * ez <= 0.0 { (disc - a * ez) / e2 } else { (1.0 - a * a) / (disc + a * ez) };
    Some(lambda)
}

/// Sphere ensemble: `None` when the dilated walk leaves the ball.
pub fn sphere_sample(
    walk: &Walk,
    spec: &SphereSpec,
    exps: &ExponentSet,
    scheme: SphereWeight,
) -> Result<Option<WeightedSample>> {
    let a = spec.a();
    let e = walk.endpoint();
    let Some(lambda) = sphere_dilation(e, a) else {
        return Ok(None);
    };
    let sites = walk.sites();
    let n = sites.len() - 1;
    for &p in &sites[1..n] {
        let (x, y, z) = (lambda * p.x as f64, lambda * p.y as f64, lambda * p.z as f64 + a);
        if x * x + y * y + z * z >= 1.0 {
            return Ok(None);
        }
    }
    let end = [lambda * e.x as f64, lambda * e.y as f64, lambda * e.z as f64 + a];
    let cos_theta = end[2] / (end[0] * end[0] + end[1] * end[1] + end[2] * end[2]).sqrt();
    let theta = angle_between_deg(end, [0.0, 0.0, 1.0]);
    let weight = match scheme {
        SphereWeight::Flux => lambda.powf(exps.weight_boundary()) / (1.0 - a * cos_theta),
        SphereWeight::BoundaryNorm => e.norm().powf(-exps.weight_boundary()),
    };
    WeightedSample::new(Ensemble::Sphere, theta, weight, 180.0).map(Some)
}

/// Sample configuration shared by every chain of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub ensemble: Ensemble,
    pub exponents: ExponentSet,
    pub weights: WeightScheme,
    pub sphere: SphereSpec,
    pub cutoff_deg: f64,
}

impl Observable {
    /// `Ok(None)` for sphere walks that leave the ball and closed random walks.
    pub fn sample(&self, walk: &Walk) -> Result<Option<WeightedSample>> {
        match self.ensemble {
            // A closed random walk has no bisecting plane and carries no sample.
            Ensemble::Full if walk.endpoint().norm2() == 0 => Ok(None),
            Ensemble::Full => full_space_sample(walk, &self.exponents, self.cutoff_deg).map(Some),
            Ensemble::Half => {
                half_space_sample(walk, &self.exponents, self.weights.half_space, self.cutoff_deg).map(Some)
            }
            Ensemble::Sphere => sphere_sample(walk, &self.sphere, &self.exponents, self.weights.sphere),
        }
    }
}

/// Per-bin ratio of the random-walk sphere density to the exact `b = 3/2`
/// prediction; dividing it out of a self-avoiding-walk run removes the
/// distortion shared by both walks (lattice orientation of the surface,
/// finite N).
pub fn lattice_correction_profile(
    rw_chains: &[&[WeightedSample]],
    spec: &SphereSpec,
    grid: &[f64],
    n_batches: usize,
) -> Result<CorrectionProfile> {
    if rw_chains.iter().flat_map(|c| c.iter()).any(|s| s.ensemble != Ensemble::Sphere) {
        return Err(Error::InvalidParameter("correction profile needs sphere samples".into()));
    }
    let emp = EmpiricalCdf::from_chains(rw_chains, grid, None, n_batches)?;
    let pred = PredictedCdf::new(Density::Sphere { a: spec.a(), b: ExponentSet::random_walk().b() }, grid, None)?;
    correction_profile(&emp, &pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticePoint as P;

    fn walk_to(steps: &[P]) -> Walk {
        Walk::from_steps(steps, true).unwrap()
    }

    const E: P = P::new(1, 0, 0);
    const N: P = P::new(0, 1, 0);

    #[test]
    fn derive_b_examples() {
        assert_eq!(derive_b(0.75, 43.0 / 32.0, 25.0 / 64.0, 2.0), 0.625);
        assert_eq!(derive_b(0.5, 1.0, 0.5, 3.0), 1.5);
        let b = derive_b(0.587597, 1.15698, 1.15698 - 0.679, 3.0);
        // (2·0.47798 − 1.15698 + 3·0.587597) / (2·0.587597)
        let by_hand = (0.95596 - 1.15698 + 1.762791) / 1.175194;
        assert!((b - by_hand).abs() < 1e-12);
        assert!((b - 1.3289).abs() < 5e-4);
    }

    #[test]
    fn exponent_set_invariants() {
        for e in [ExponentSet::saw_3d(), ExponentSet::random_walk()] {
            assert!((e.rho() - (e.gamma() - e.gamma1())).abs() < 1e-12);
            let lhs = 2.0 * e.b() * e.nu();
            let rhs = 2.0 * e.rho() - e.gamma() + e.d() * e.nu();
            assert!((lhs - rhs).abs() < 1e-12);
            assert!(e.b() > 1.0);
        }
        assert_eq!(ExponentSet::random_walk().b(), 1.5);
        assert!((ExponentSet::saw_3d().weight_boundary() - 0.679 / 0.587597).abs() < 1e-12);
        assert!(ExponentSet::new(-1.0, 1.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn exponent_set_serde_rederives() {
        let json = r#"{"nu":0.5,"gamma":1.0,"gamma1":0.5,"d":3.0,"b":7.0}"#;
        let e: ExponentSet = serde_json::from_str(json).unwrap();
        assert_eq!(e.b(), 1.5);
    }

    #[test]
    fn full_space_rod() {
        let exps = ExponentSet::saw_3d();
        for n in [2usize, 3, 7, 10] {
            let rod = Walk::rod(n, true);
            let (j, _) = bisecting_crossing(&rod).unwrap();
            assert_eq!(j, n.div_ceil(2));
            let s = full_space_sample(&rod, &exps, 85.0).unwrap();
            assert_eq!(s.theta_deg, 0.0);
            assert!((s.weight - (n as f64).powf(-exps.weight_full())).abs() < 1e-15);
        }
    }

    #[test]
    fn full_space_l_shape() {
        let w = walk_to(&[E, E, N, N]);
        let (j, p) = bisecting_crossing(&w).unwrap();
        assert_eq!(j, 2);
        assert_eq!(p, [2.0, 0.0, 0.0]);
        let s = full_space_sample(&w, &ExponentSet::saw_3d(), 85.0).unwrap();
        assert!((s.theta_deg - 45.0).abs() < 1e-12);
        assert!(s.within_cutoff);
    }

    #[test]
    fn cutoff_flag() {
        // Endpoint (1,1,0) with the first step along x: crossing of x+y >= 1 at (1,0,0),
        // 45° from the endpoint direction.
        let w = walk_to(&[E, N]);
        let s = full_space_sample(&w, &ExponentSet::saw_3d(), 40.0).unwrap();
        assert!((s.theta_deg - 45.0).abs() < 1e-12);
        assert!(!s.within_cutoff);
    }

    #[test]
    fn half_space_examples() {
        let exps = ExponentSet::saw_3d();
        let rod = Walk::rod(5, true);
        let s = half_space_sample(&rod, &exps, HalfSpaceWeight::Height, 85.0).unwrap();
        assert_eq!(s.theta_deg, 0.0);
        assert!((s.weight - 5f64.powf(-exps.weight_boundary())).abs() < 1e-15);
        assert!((exps.weight_boundary() - 1.1555).abs() < 1e-4);

        let up = P::new(0, 0, 1);
        let mut steps = vec![up; 5];
        steps.extend([E, E, E, N, N, N, N]);
        let w = walk_to(&steps);
        assert_eq!(w.endpoint(), P::new(3, 4, 5));
        let s = half_space_sample(&w, &exps, HalfSpaceWeight::EndpointNorm, 85.0).unwrap();
        assert!((s.theta_deg - 45.0).abs() < 1e-12);
        assert!((s.weight - (50f64).sqrt().powf(-exps.weight_boundary())).abs() < 1e-15);
        let s = half_space_sample(&w, &exps, HalfSpaceWeight::Height, 85.0).unwrap();
        assert!((s.weight - 5f64.powf(-exps.weight_boundary())).abs() < 1e-15);
    }

    #[test]
    fn half_space_rejects_bad_endpoint() {
        let w = walk_to(&[E]);
        assert!(half_space_sample(&w, &ExponentSet::saw_3d(), HalfSpaceWeight::Height, 85.0).is_err());
    }

    #[test]
    fn sphere_rods() {
        let exps = ExponentSet::saw_3d();
        let spec = SphereSpec::new(0.75).unwrap();
        let n = 8;
        let down = Walk::from_steps(&vec![P::new(0, 0, -1); n], true).unwrap();
        let lambda = sphere_dilation(down.endpoint(), 0.75).unwrap();
        assert!((lambda - 1.75 / n as f64).abs() < 1e-15);
        let s = sphere_sample(&down, &spec, &exps, SphereWeight::Flux).unwrap().unwrap();
        assert!((s.theta_deg - 180.0).abs() < 1e-12);

        let up = Walk::rod(n, true);
        let lambda = sphere_dilation(up.endpoint(), 0.75).unwrap();
        assert!((lambda - 0.25 / n as f64).abs() < 1e-15);
        let s = sphere_sample(&up, &spec, &exps, SphereWeight::Flux).unwrap().unwrap();
        assert_eq!(s.theta_deg, 0.0);
        // λ^{γ/ν} / (1 − a)
        assert!((s.weight - lambda.powf(exps.weight_boundary()) / 0.25).abs() < 1e-15);
    }

    #[test]
    fn sphere_a_zero_is_radial_projection() {
        let w = walk_to(&[E, N, N]);
        let e = w.endpoint();
        let lambda = sphere_dilation(e, 0.0).unwrap();
        assert!((lambda - 1.0 / e.norm()).abs() < 1e-15);
    }

    #[test]
    fn sphere_rejects_walk_outside() {
        // E, N, W, W: endpoint (-1,1,0); site (1,1,0) lies farther out than the endpoint.
        let w = walk_to(&[E, N, P::new(-1, 0, 0), P::new(-1, 0, 0)]);
        let spec = SphereSpec::new(0.0).unwrap();
        assert!(sphere_sample(&w, &spec, &ExponentSet::saw_3d(), SphereWeight::Flux).unwrap().is_none());
    }

    #[test]
    fn sphere_spec_range() {
        assert!(SphereSpec::new(1.0).is_err());
        assert!(SphereSpec::new(-0.1).is_err());
        assert!(SphereSpec::new(0.0).is_ok());
    }

    #[test]
    fn ensemble_tags_round_trip() {
        for e in Ensemble::ALL {
            assert_eq!(e.tag().parse::<Ensemble>().unwrap(), e);
        }
        assert!("radial".parse::<Ensemble>().is_err());
    }
}
