use serde::{Deserialize, Serialize};

use super::SUBLATTICE_STEP;
use crate::error::{LabError, Result};

/// The box `Λ_L(j) = j + [-L/2, L/2)^d`, identified with the torus `ℤ^d / Lℤ^d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxSpec {
    dim: usize,
    side: usize,
    origin: Vec<i64>,
}

impl BoxSpec {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn origin(&self) -> &[i64] {
        &self.origin
    }

    /// |Λ| = L^d.
    pub fn volume(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    /// Probes built on the decoupling sublattice need `4 | L`.
    pub fn require_divisible_by_four(&self) -> Result<()> {
        if !self.side.is_multiple_of(4) {
            return Err(LabError::InvalidBox(format!(
                "L must be divisible by 4 (got L = {})",
                self.side
            )));
        }
        Ok(())
    }
}

/// Bijection between the sites of Λ and `0..|Λ|`, plus the periodic
/// nearest-neighbour map.
///
/// Linear indices follow lexicographic order of the coordinates, first axis
/// slowest.
#[derive(Debug, Clone)]
pub struct SiteIndex {
    dim: usize,
    side: usize,
    origin: Vec<i64>,
    // 2d entries per site: (axis 0, -1), (axis 0, +1), (axis 1, -1), ...
    neighbors: Vec<usize>,
}

impl SiteIndex {
    fn new(spec: &BoxSpec) -> Self {
        let volume = spec.volume();
        let d = spec.dim;
        let l = spec.side;
        let mut neighbors = Vec::with_capacity(volume * 2 * d);
        let mut local = vec![0usize; d];
        for n in 0..volume {
            decompose(n, l, &mut local);
            for (axis, &u) in local.iter().enumerate() {
                let stride = l.pow((d - 1 - axis) as u32);
                let down = if u == 0 { n + (l - 1) * stride } else { n - stride };
                let up = if u == l - 1 { n - (l - 1) * stride } else { n + stride };
                neighbors.push(down);
                neighbors.push(up);
            }
        }
        Self {
            dim: d,
            side: l,
            origin: spec.origin.clone(),
            neighbors,
        }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len() / (2 * self.dim)
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, site: usize) -> &[usize] {
        let k = 2 * self.dim;
        &self.neighbors[site * k..(site + 1) * k]
    }

    /// Coordinates in `ℤ^d` of a linear index.
    pub fn coords(&self, site: usize) -> Vec<i64> {
        let mut local = vec![0usize; self.dim];
        decompose(site, self.side, &mut local);
        let half = (self.side / 2) as i64;
        local
            .iter()
            .zip(&self.origin)
            .map(|(&u, &o)| o - half + u as i64)
            .collect()
    }

    /// Linear index of a coordinate inside the box; `None` outside.
    pub fn index_of(&self, coords: &[i64]) -> Option<usize> {
        if coords.len() != self.dim {
            return None;
        }
        let half = (self.side / 2) as i64;
        let mut n = 0usize;
        for (&x, &o) in coords.iter().zip(&self.origin) {
            let u = x - o + half;
            if u < 0 || u >= self.side as i64 {
                return None;
            }
            n = n * self.side + u as usize;
        }
        Some(n)
    }

    /// Linear index of the torus site `coords mod L`.
    pub fn index_of_wrapped(&self, coords: &[i64]) -> usize {
        assert_eq!(coords.len(), self.dim, "coordinate dimension");
        let l = self.side as i64;
        let half = l / 2;
        coords.iter().zip(&self.origin).fold(0usize, |n, (&x, &o)| {
            let u = (x - o + half).rem_euclid(l);
            n * self.side + u as usize
        })
    }

    /// Minimal-image displacement from site `a` to site `b` on the torus.
    pub fn displacement(&self, a: usize, b: usize) -> Vec<i64> {
        let l = self.side as i64;
        let half = l / 2;
        self.coords(a)
            .iter()
            .zip(self.coords(b))
            .map(|(&xa, xb)| (xb - xa + half).rem_euclid(l) - half)
            .collect()
    }

    /// Index of the site obtained by translating `site` by `shift` on the torus.
    pub fn translate(&self, site: usize, shift: &[i64]) -> usize {
        let c: Vec<i64> = self
            .coords(site)
            .iter()
            .zip(shift)
            .map(|(x, s)| x + s)
            .collect();
        self.index_of_wrapped(&c)
    }
}

fn decompose(mut n: usize, side: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = n % side;
        n /= side;
    }
}

/// A validated box together with its site index.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub spec: BoxSpec,
    pub index: SiteIndex,
    /// Largest volume that may be diagonalized densely.
    pub volume_cap: usize,
}

impl Lattice {
    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn side(&self) -> usize {
        self.spec.side
    }

    pub fn volume(&self) -> usize {
        self.index.len()
    }

    /// Linear index of the torus point `0`, the site singled out by the probes.
    pub fn zero_site(&self) -> usize {
        self.index.index_of_wrapped(&vec![0; self.dim()])
    }
}

/// Build `Λ_L(origin)` on the torus. `origin = None` means the zero vector.
pub fn build_box(dim: usize, side: usize, origin: Option<&[i64]>, volume_cap: usize) -> Result<Lattice> {
    if dim == 0 {
        return Err(LabError::InvalidBox("dimension must be at least 1".into()));
    }
    if !side.is_multiple_of(2) {
        return Err(LabError::InvalidBox(format!("L must be even (got L = {side})")));
    }
    if side < 4 {
        return Err(LabError::InvalidBox(format!("L must be at least 4 (got L = {side})")));
    }
    let volume = u32::try_from(dim)
        .ok()
        .and_then(|d| side.checked_pow(d))
        .ok_or(LabError::VolumeCap { volume: usize::MAX, cap: volume_cap })?;
    if volume > volume_cap {
        return Err(LabError::VolumeCap { volume, cap: volume_cap });
    }
    let origin = match origin {
        Some(o) if o.len() != dim => {
            return Err(LabError::InvalidBox(format!(
                "origin has {} components, expected {dim}",
                o.len()
            )))
        }
        Some(o) => o.to_vec(),
        None => vec![0; dim],
    };
    let spec = BoxSpec { dim, side, origin };
    let index = SiteIndex::new(&spec);
    Ok(Lattice { spec, index, volume_cap })
}

/// The sublattice `Γ = k₀ + (4ℤ)^d` together with the sites it must avoid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SublatticeSpec {
    pub offset: Vec<i64>,
    pub excluded: Vec<Vec<i64>>,
}

impl SublatticeSpec {
    pub fn step(&self) -> i64 {
        SUBLATTICE_STEP
    }

    pub fn contains(&self, coords: &[i64]) -> bool {
        coords
            .iter()
            .zip(&self.offset)
            .all(|(x, k)| (x - k).rem_euclid(SUBLATTICE_STEP) == 0)
    }

    /// Linear indices of `Γ ∩ Λ`, ascending.
    pub fn sites(&self, lattice: &Lattice) -> Vec<usize> {
        (0..lattice.volume())
            .filter(|&n| self.contains(&lattice.index.coords(n)))
            .collect()
    }

    pub fn contains_site(&self, lattice: &Lattice, site: usize) -> bool {
        self.contains(&lattice.index.coords(site))
    }
}

/// Lexicographically smallest `k₀ ∈ {0,1,2,3}^d` with `0, k ∉ k₀ + (4ℤ)^d`.
pub fn choose_decoupling_sublattice(lattice: &Lattice, k: &[i64]) -> Result<SublatticeSpec> {
    lattice.spec.require_divisible_by_four()?;
    let d = lattice.dim();
    if k.len() != d {
        return Err(LabError::Mismatch(format!("offset k has {} components, expected {d}", k.len())));
    }
    let zero = vec![0i64; d];
    let total = (SUBLATTICE_STEP as usize).pow(d as u32);
    for code in 0..total {
        let mut digits = vec![0usize; d];
        decompose(code, SUBLATTICE_STEP as usize, &mut digits);
        let candidate = SublatticeSpec {
            offset: digits.into_iter().map(|x| x as i64).collect(),
            excluded: vec![zero.clone(), k.to_vec()],
        };
        if !candidate.contains(&zero) && !candidate.contains(k) {
            return Ok(candidate);
        }
    }
    unreachable!("the first coordinate always admits a residue avoiding both 0 and k")
}
