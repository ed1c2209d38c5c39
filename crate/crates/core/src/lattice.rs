//! Walks on the simple cubic lattice and the octahedral point group.
//!
//! A [`Walk`] always starts at the origin and takes unit steps along the
//! coordinate axes. In self-avoiding mode it also carries an occupancy index
//! mapping every visited site to its position along the walk, which is what
//! the pivot chain uses to detect collisions.

use std::fmt;
use std::ops::{Add, Sub};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest step count accepted by [`enumerate_saws`].
pub const MAX_ENUMERATION_STEPS: usize = 6;

/// A site of ℤ³ in lattice units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct LatticePoint {
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint { x: 0, y: 0, z: 0 };

    pub const fn new(x: i64, y: i64, z: i64) -> Self {
        LatticePoint { x, y, z }
    }

    pub fn norm2(self) -> i128 {
        let (x, y, z) = (self.x as i128, self.y as i128, self.z as i128);
        x * x + y * y + z * z
    }

    pub fn norm(self) -> f64 {
        (self.norm2() as f64).sqrt()
    }

    pub fn dot(self, other: LatticePoint) -> i128 {
        self.x as i128 * other.x as i128 + self.y as i128 * other.y as i128 + self.z as i128 * other.z as i128
    }

    pub fn to_array(self) -> [i64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [i64; 3]) -> Self {
        LatticePoint::new(a[0], a[1], a[2])
    }

    /// True when `other` is one lattice step away.
    pub fn is_neighbor(self, other: LatticePoint) -> bool {
        let d = other - self;
        d.x.abs() + d.y.abs() + d.z.abs() == 1
    }
}

impl Add for LatticePoint {
    type Output = LatticePoint;
    fn add(self, o: LatticePoint) -> LatticePoint {
        LatticePoint::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for LatticePoint {
    type Output = LatticePoint;
    fn sub(self, o: LatticePoint) -> LatticePoint {
        LatticePoint::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

/// The six unit steps of the simple cubic lattice.
pub const UNIT_STEPS: [LatticePoint; 6] = [
    LatticePoint::new(1, 0, 0),
    LatticePoint::new(-1, 0, 0),
    LatticePoint::new(0, 1, 0),
    LatticePoint::new(0, -1, 0),
    LatticePoint::new(0, 0, 1),
    LatticePoint::new(0, 0, -1),
];

/// A signed permutation of the coordinate axes.
///
/// Component `k` of the image is `signs[k] * p[perm[k]]`, so as a matrix the
/// only non-zero entry of row `k` is `signs[k]` in column `perm[k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OctahedralSymmetry {
    perm: [u8; 3],
    signs: [i8; 3],
}

impl OctahedralSymmetry {
    pub const IDENTITY: OctahedralSymmetry = OctahedralSymmetry { perm: [0, 1, 2], signs: [1, 1, 1] };

    /// Point reflection through the origin, `p -> -p`.
    pub const INVERSION: OctahedralSymmetry = OctahedralSymmetry { perm: [0, 1, 2], signs: [-1, -1, -1] };

    /// Returns `None` unless `perm` is a permutation of `{0,1,2}` and every sign is ±1.
    pub fn new(perm: [u8; 3], signs: [i8; 3]) -> Option<Self> {
        let mut seen = [false; 3];
        for &p in &perm {
            if p > 2 || seen[p as usize] {
                return None;
            }
            seen[p as usize] = true;
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return None;
        }
        Some(OctahedralSymmetry { perm, signs })
    }

    pub fn perm(&self) -> [u8; 3] {
        self.perm
    }

    pub fn signs(&self) -> [i8; 3] {
        self.signs
    }

    #[inline]
    pub fn apply(&self, p: LatticePoint) -> LatticePoint {
        let c = p.to_array();
        LatticePoint::new(
            self.signs[0] as i64 * c[self.perm[0] as usize],
            self.signs[1] as i64 * c[self.perm[1] as usize],
            self.signs[2] as i64 * c[self.perm[2] as usize],
        )
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &OctahedralSymmetry) -> OctahedralSymmetry {
        let mut perm = [0u8; 3];
        let mut signs = [0i8; 3];
        for k in 0..3 {
            let j = self.perm[k] as usize;
            perm[k] = other.perm[j];
            signs[k] = self.signs[k] * other.signs[j];
        }
        OctahedralSymmetry { perm, signs }
    }

    pub fn inverse(&self) -> OctahedralSymmetry {
        let mut perm = [0u8; 3];
        let mut signs = [0i8; 3];
        for k in 0..3 {
            let j = self.perm[k] as usize;
            perm[j] = k as u8;
            signs[j] = self.signs[k];
        }
        OctahedralSymmetry { perm, signs }
    }

    pub fn matrix(&self) -> [[i8; 3]; 3] {
        let mut m = [[0i8; 3]; 3];
        for k in 0..3 {
            m[k][self.perm[k] as usize] = self.signs[k];
        }
        m
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

/// All 48 signed permutations, identity first.
pub fn enumerate_octahedral_group() -> Vec<OctahedralSymmetry> {
    const PERMS: [[u8; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(48);
    for perm in PERMS {
        for bits in 0..8u8 {
            let sign = |b: u8| if bits & (1 << b) == 0 { 1 } else { -1 };
            out.push(OctahedralSymmetry { perm, signs: [sign(0), sign(1), sign(2)] });
        }
    }
    debug_assert!(out[0].is_identity());
    out
}

pub fn apply_symmetry(g: &OctahedralSymmetry, p: LatticePoint) -> LatticePoint {
    g.apply(p)
}

/// True iff all sites are pairwise distinct.
pub fn is_self_avoiding(sites: &[LatticePoint]) -> bool {
    let mut seen = FxHashMap::default();
    seen.reserve(sites.len());
    sites.iter().all(|&p| seen.insert(p, ()).is_none())
}

fn check_path(sites: &[LatticePoint]) -> Result<()> {
    match sites.first() {
        None => return Err(Error::InvalidWalk("a walk needs at least one site".into())),
        Some(&p) if p != LatticePoint::ORIGIN => {
            return Err(Error::InvalidWalk(format!("walk starts at {p}, not at the origin")))
        }
        _ => {}
    }
    if let Some(j) = sites.windows(2).position(|w| !w[0].is_neighbor(w[1])) {
        return Err(Error::InvalidWalk(format!(
            "sites {} and {} ({} -> {}) are not lattice neighbours",
            j,
            j + 1,
            sites[j],
            sites[j + 1]
        )));
    }
    Ok(())
}

/// A nearest-neighbour walk starting at the origin.
///
/// With an occupancy index (self-avoiding mode) the walk guarantees that its
/// sites are pairwise distinct and that `occupancy[sites[j]] == j`.
#[derive(Debug, Clone)]
pub struct Walk {
    sites: Vec<LatticePoint>,
    occupancy: Option<FxHashMap<LatticePoint, u32>>,
}

impl PartialEq for Walk {
    fn eq(&self, other: &Self) -> bool {
        self.sites == other.sites && self.occupancy.is_some() == other.occupancy.is_some()
    }
}

impl Walk {
    /// Straight rod of `n` steps along +z.
    pub fn rod(n: usize, self_avoiding: bool) -> Walk {
        let sites = (0..=n as i64).map(|k| LatticePoint::new(0, 0, k)).collect();
        Walk::from_sites_unchecked(sites, self_avoiding)
    }

    /// Validates the path structure and, when `self_avoiding`, distinctness.
    pub fn from_sites(sites: Vec<LatticePoint>, self_avoiding: bool) -> Result<Walk> {
        check_path(&sites)?;
        if self_avoiding && !is_self_avoiding(&sites) {
            return Err(Error::InvalidWalk("walk intersects itself".into()));
        }
        Ok(Walk::from_sites_unchecked(sites, self_avoiding))
    }

    /// Build from unit steps (indices into [`UNIT_STEPS`] or explicit vectors).
    pub fn from_steps(steps: &[LatticePoint], self_avoiding: bool) -> Result<Walk> {
        let mut sites = Vec::with_capacity(steps.len() + 1);
        let mut p = LatticePoint::ORIGIN;
        sites.push(p);
        for &s in steps {
            p = p + s;
            sites.push(p);
        }
        Walk::from_sites(sites, self_avoiding)
    }

    pub(crate) fn from_sites_unchecked(sites: Vec<LatticePoint>, self_avoiding: bool) -> Walk {
        let occupancy = self_avoiding.then(|| build_occupancy(&sites));
        Walk { sites, occupancy }
    }

    pub fn steps(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn sites(&self) -> &[LatticePoint] {
        &self.sites
    }

    pub fn endpoint(&self) -> LatticePoint {
        *self.sites.last().expect("walk is never empty")
    }

    pub fn is_self_avoiding_mode(&self) -> bool {
        self.occupancy.is_some()
    }

    /// Index of `p` along the walk, when the walk carries an occupancy index.
    #[inline]
    pub fn index_of(&self, p: LatticePoint) -> Option<usize> {
        self.occupancy.as_ref().and_then(|occ| occ.get(&p).map(|&j| j as usize))
    }

    /// Replace sites `pivot+1..` by `arm`, keeping the occupancy index in step.
    pub(crate) fn replace_tail(&mut self, pivot: usize, arm: &[LatticePoint]) {
        debug_assert_eq!(pivot + 1 + arm.len(), self.sites.len());
        if let Some(occ) = self.occupancy.as_mut() {
            for p in &self.sites[pivot + 1..] {
                occ.remove(p);
            }
            for (k, &p) in arm.iter().enumerate() {
                occ.insert(p, (pivot + 1 + k) as u32);
            }
        }
        self.sites[pivot + 1..].copy_from_slice(arm);
    }

    /// Checks every structural invariant; used by tests and debug assertions.
    pub fn check_invariants(&self) -> Result<()> {
        check_path(&self.sites)?;
        if let Some(occ) = &self.occupancy {
            if occ.len() != self.sites.len() {
                return Err(Error::InvalidWalk(format!(
                    "occupancy holds {} sites for a walk of {} sites",
                    occ.len(),
                    self.sites.len()
                )));
            }
            for (j, p) in self.sites.iter().enumerate() {
                if occ.get(p) != Some(&(j as u32)) {
                    return Err(Error::InvalidWalk(format!("occupancy disagrees with site {j} at {p}")));
                }
            }
        }
        Ok(())
    }

    /// The walk with `g` applied to every site.
    pub fn transformed(&self, g: &OctahedralSymmetry) -> Walk {
        let sites = self.sites.iter().map(|&p| g.apply(p)).collect();
        Walk::from_sites_unchecked(sites, self.is_self_avoiding_mode())
    }
}

fn build_occupancy(sites: &[LatticePoint]) -> FxHashMap<LatticePoint, u32> {
    let mut occ = FxHashMap::default();
    occ.reserve(sites.len());
    for (j, &p) in sites.iter().enumerate() {
        occ.insert(p, j as u32);
    }
    occ
}

/// Every `n`-step self-avoiding walk from the origin, in depth-first order.
pub fn enumerate_saws(n: usize) -> Result<Vec<Walk>> {
    if n > MAX_ENUMERATION_STEPS {
        return Err(Error::EnumerationTooLarge(n));
    }
    let mut out = Vec::new();
    let mut path = vec![LatticePoint::ORIGIN];
    extend(&mut path, n, &mut out);
    Ok(out)
}

fn extend(path: &mut Vec<LatticePoint>, n: usize, out: &mut Vec<Walk>) {
    if path.len() == n + 1 {
        out.push(Walk::from_sites_unchecked(path.clone(), true));
        return;
    }
    let last = *path.last().unwrap();
    for step in UNIT_STEPS {
        let next = last + step;
        if !path.contains(&next) {
            path.push(next);
            extend(path, n, out);
            path.pop();
        }
    }
}
