//! Geometry of the discrete cube `Box_L = [-L,L]^d ∩ Z^d`, its outer boundary
//! layers, and real-valued fields attached to those site sets.
//!
//! Site orderings are lexicographic on coordinates so that every matrix built
//! on top of a geometry is reproducible. Three domains are used throughout:
//! the interior `Box`, `Cl1 = Box ∪ ∂Box` and `Cl2 = Box ∪ ∂²Box`, where
//! `∂Box` is the outer ℓ¹-boundary and `∂²Box` contains every outside site
//! within graph distance 2 of the cube.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Default cap on `(2L+1)^d`.
pub const DEFAULT_SITE_BUDGET: u128 = 1_000_000;

/// The three site sets a field can live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainTag {
    /// Interior sites of the cube.
    Box,
    /// Interior plus first outer boundary.
    Cl1,
    /// Interior plus everything outside within graph distance 2.
    Cl2,
}

/// Geometry of one cube: site enumerations, index maps, neighbor tables and
/// the distance-to-boundary function. Immutable after construction.
#[derive(Debug)]
pub struct BoxGeometry {
    d: usize,
    l: i64,
    n1d: usize,
    interior_count: usize,
    /// Boundary sites, lexicographic, flattened (stride `d`).
    boundary: Vec<i64>,
    /// All sites outside the cube within graph distance 2, lexicographic,
    /// flattened. Superset of the boundary sites.
    boundary2: Vec<i64>,
    b1_index: HashMap<Vec<i64>, u32>,
    b2_index: HashMap<Vec<i64>, u32>,
    /// Position of each boundary site inside the `boundary2` ordering.
    b1_in_b2: Vec<u32>,
    /// For each interior site and direction, the neighbor as a CL1 index.
    nbr_cl1_of_box: Vec<u32>,
    /// For each CL1 site and direction, the neighbor as a CL2 index.
    nbr_cl2_of_cl1: Vec<u32>,
    /// ℓ¹ graph distance from each interior site to the boundary.
    rho: Vec<u32>,
    /// For each boundary site, the interior index of its unique neighbor
    /// inside the cube.
    tilde: Vec<u32>,
    /// Number of boundary neighbors of each interior site.
    bdry_nbr_count: Vec<u8>,
}

impl BoxGeometry {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn l(&self) -> i64 {
        self.l
    }

    /// Points per axis, `2L+1`.
    pub fn n1d(&self) -> usize {
        self.n1d
    }

    pub fn interior_count(&self) -> usize {
        self.interior_count
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.len() / self.d
    }

    pub fn boundary2_count(&self) -> usize {
        self.boundary2.len() / self.d
    }

    pub fn site_count(&self, tag: DomainTag) -> usize {
        match tag {
            DomainTag::Box => self.interior_count,
            DomainTag::Cl1 => self.interior_count + self.boundary_count(),
            DomainTag::Cl2 => self.interior_count + self.boundary2_count(),
        }
    }

    /// Decode the lexicographic interior index into coordinates.
    pub fn interior_coords(&self, idx: usize) -> Vec<i64> {
        let mut out = vec![0i64; self.d];
        self.interior_coords_into(idx, &mut out);
        out
    }

    pub fn interior_coords_into(&self, idx: usize, out: &mut [i64]) {
        let mut rem = idx;
        for j in (0..self.d).rev() {
            out[j] = (rem % self.n1d) as i64 - self.l;
            rem /= self.n1d;
        }
    }

    /// Lexicographic interior index of a point, if inside the cube.
    pub fn interior_index(&self, coords: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for &c in coords {
            if c.abs() > self.l {
                return None;
            }
            idx = idx * self.n1d + (c + self.l) as usize;
        }
        Some(idx)
    }

    pub fn boundary_coords(&self, idx: usize) -> &[i64] {
        &self.boundary[idx * self.d..(idx + 1) * self.d]
    }

    pub fn boundary2_coords(&self, idx: usize) -> &[i64] {
        &self.boundary2[idx * self.d..(idx + 1) * self.d]
    }

    pub fn boundary_index(&self, coords: &[i64]) -> Option<usize> {
        self.b1_index.get(coords).map(|&i| i as usize)
    }

    pub fn boundary2_index(&self, coords: &[i64]) -> Option<usize> {
        self.b2_index.get(coords).map(|&i| i as usize)
    }

    pub fn b1_in_b2(&self, b1_idx: usize) -> usize {
        self.b1_in_b2[b1_idx] as usize
    }

    /// ℓ¹ graph distance from an interior site to the boundary; ≥ 1.
    pub fn rho(&self, interior_idx: usize) -> u32 {
        self.rho[interior_idx]
    }

    /// `max_i |x_i|` of an interior site.
    pub fn linf_norm(&self, interior_idx: usize) -> i64 {
        self.l + 1 - self.rho[interior_idx] as i64
    }

    /// Interior index of the unique in-cube neighbor of a boundary site.
    pub fn tilde(&self, b1_idx: usize) -> usize {
        self.tilde[b1_idx] as usize
    }

    /// Number of boundary sites adjacent to an interior site.
    pub fn boundary_neighbor_count(&self, interior_idx: usize) -> u8 {
        self.bdry_nbr_count[interior_idx]
    }

    /// Neighbor of an interior site as a CL1 index (`< interior_count` means
    /// interior, otherwise `interior_count + boundary index`).
    #[inline]
    pub fn neighbor_cl1(&self, interior_idx: usize, dir: usize) -> usize {
        self.nbr_cl1_of_box[interior_idx * 2 * self.d + dir] as usize
    }

    /// Neighbor of a CL1 site as a CL2 index.
    #[inline]
    pub fn neighbor_cl2(&self, cl1_idx: usize, dir: usize) -> usize {
        self.nbr_cl2_of_cl1[cl1_idx * 2 * self.d + dir] as usize
    }
}

/// Build the geometry with the default site budget.
pub fn build_geometry(d: usize, l: i64) -> Result<BoxGeometry> {
    build_geometry_with_budget(d, l, DEFAULT_SITE_BUDGET)
}

/// Build the geometry of `[-L,L]^d` with an explicit site budget.
pub fn build_geometry_with_budget(d: usize, l: i64, budget: u128) -> Result<BoxGeometry> {
    if d < 1 {
        return Err(Error::Parameter("dimension must be >= 1".into()));
    }
    if l < 1 {
        return Err(Error::Parameter("half-side L must be >= 1".into()));
    }
    let n1d = 2 * l as u128 + 1;
    let mut sites: u128 = 1;
    for _ in 0..d {
        sites = sites.saturating_mul(n1d);
        if sites > budget {
            return Err(Error::Capacity {
                d,
                l,
                sites,
                budget,
            });
        }
    }
    let n1d = n1d as usize;
    let interior_count = sites as usize;

    // Boundary: exactly one coordinate equal to ±(L+1), the rest inside.
    let mut bdry_sites: Vec<Vec<i64>> = Vec::new();
    let mut face = vec![0i64; d];
    for axis in 0..d {
        for sign in [-1i64, 1] {
            enumerate_box(d - 1, l, &mut |rest| {
                let mut k = 0;
                for j in 0..d {
                    if j == axis {
                        face[j] = sign * (l + 1);
                    } else {
                        face[j] = rest[k];
                        k += 1;
                    }
                }
                bdry_sites.push(face.clone());
            });
        }
    }
    bdry_sites.sort_unstable();
    let b1_count = bdry_sites.len();

    let mut b1_index: HashMap<Vec<i64>, u32> = HashMap::with_capacity(b1_count);
    for (i, s) in bdry_sites.iter().enumerate() {
        b1_index.insert(s.clone(), i as u32);
    }

    // Second layer: outside sites adjacent to a boundary site, excluding the
    // cube and the boundary itself.
    let mut b2_sites: Vec<Vec<i64>> = bdry_sites.clone();
    {
        let mut seen: HashMap<Vec<i64>, ()> = HashMap::new();
        for s in &bdry_sites {
            for axis in 0..d {
                for sign in [-1i64, 1] {
                    let mut nb = s.clone();
                    nb[axis] += sign;
                    if nb.iter().all(|c| c.abs() <= l) {
                        continue;
                    }
                    if b1_index.contains_key(&nb) || seen.contains_key(&nb) {
                        continue;
                    }
                    seen.insert(nb.clone(), ());
                    b2_sites.push(nb);
                }
            }
        }
    }
    b2_sites.sort_unstable();
    let b2_count = b2_sites.len();
    let mut b2_index: HashMap<Vec<i64>, u32> = HashMap::with_capacity(b2_count);
    for (i, s) in b2_sites.iter().enumerate() {
        b2_index.insert(s.clone(), i as u32);
    }
    let b1_in_b2: Vec<u32> = bdry_sites.iter().map(|s| b2_index[s]).collect();

    let mut geom = BoxGeometry {
        d,
        l,
        n1d,
        interior_count,
        boundary: bdry_sites.iter().flatten().copied().collect(),
        boundary2: b2_sites.iter().flatten().copied().collect(),
        b1_index,
        b2_index,
        b1_in_b2,
        nbr_cl1_of_box: Vec::new(),
        nbr_cl2_of_cl1: Vec::new(),
        rho: Vec::new(),
        tilde: vec![0; b1_count],
        bdry_nbr_count: vec![0; interior_count],
    };

    // Neighbor table for interior sites (targets indexed in CL1).
    let two_d = 2 * d;
    let mut nbr_box = vec![0u32; interior_count * two_d];
    let mut coords = vec![0i64; d];
    for i in 0..interior_count {
        geom.interior_coords_into(i, &mut coords);
        for axis in 0..d {
            for (s, sign) in [(0usize, -1i64), (1usize, 1i64)] {
                let dir = 2 * axis + s;
                coords[axis] += sign;
                let entry = if coords[axis].abs() <= l {
                    geom.interior_index(&coords).unwrap() as u32
                } else {
                    let bi = geom.b1_index[&coords];
                    geom.tilde[bi as usize] = i as u32;
                    geom.bdry_nbr_count[i] += 1;
                    (interior_count as u32) + bi
                };
                nbr_box[i * two_d + dir] = entry;
                coords[axis] -= sign;
            }
        }
    }
    geom.nbr_cl1_of_box = nbr_box;

    // Neighbor table for CL1 sites (targets indexed in CL2).
    let cl1_count = interior_count + b1_count;
    let mut nbr_cl1 = vec![0u32; cl1_count * two_d];
    for i in 0..interior_count {
        for dir in 0..two_d {
            let t = geom.nbr_cl1_of_box[i * two_d + dir] as usize;
            nbr_cl1[i * two_d + dir] = if t < interior_count {
                t as u32
            } else {
                interior_count as u32 + geom.b1_in_b2[t - interior_count]
            };
        }
    }
    for b in 0..b1_count {
        let site = geom.boundary_coords(b).to_vec();
        for axis in 0..d {
            for (s, sign) in [(0usize, -1i64), (1usize, 1i64)] {
                let dir = 2 * axis + s;
                let mut nb = site.clone();
                nb[axis] += sign;
                let entry = if let Some(ii) = geom.interior_index(&nb) {
                    ii as u32
                } else {
                    // Any outside neighbor of a boundary site is within
                    // graph distance 2 of the cube.
                    interior_count as u32 + geom.b2_index[&nb]
                };
                nbr_cl1[(interior_count + b) * two_d + dir] = entry;
            }
        }
    }
    geom.nbr_cl2_of_cl1 = nbr_cl1;

    // rho by multi-source BFS seeded with the interior neighbors of the
    // boundary.
    let mut rho = vec![u32::MAX; interior_count];
    let mut queue = std::collections::VecDeque::new();
    for b in 0..b1_count {
        let t = geom.tilde[b] as usize;
        if rho[t] != 1 {
            rho[t] = 1;
            queue.push_back(t);
        }
    }
    while let Some(x) = queue.pop_front() {
        let dx = rho[x];
        for dir in 0..two_d {
            let t = geom.nbr_cl1_of_box[x * two_d + dir] as usize;
            if t < interior_count && rho[t] > dx + 1 {
                rho[t] = dx + 1;
                queue.push_back(t);
            }
        }
    }
    geom.rho = rho;

    Ok(geom)
}

fn enumerate_box(d: usize, l: i64, f: &mut impl FnMut(&[i64])) {
    let mut coords = vec![-l; d];
    if d == 0 {
        f(&coords);
        return;
    }
    loop {
        f(&coords);
        let mut j = d;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            if coords[j] < l {
                coords[j] += 1;
                for c in coords[j + 1..].iter_mut() {
                    *c = -l;
                }
                break;
            }
        }
    }
}

/// Real values attached to one of the three site sets of a geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    tag: DomainTag,
    values: Vec<f64>,
}

impl LatticeField {
    pub fn zeros(geom: &BoxGeometry, tag: DomainTag) -> Self {
        LatticeField {
            tag,
            values: vec![0.0; geom.site_count(tag)],
        }
    }

    pub fn from_values(geom: &BoxGeometry, tag: DomainTag, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.site_count(tag) {
            return Err(Error::Domain(format!(
                "field length {} does not match {:?} site count {}",
                values.len(),
                tag,
                geom.site_count(tag)
            )));
        }
        Ok(LatticeField { tag, values })
    }

    /// Indicator of a single interior site, on the requested domain.
    pub fn indicator(geom: &BoxGeometry, tag: DomainTag, interior_idx: usize) -> Self {
        let mut f = Self::zeros(geom, tag);
        f.values[interior_idx] = 1.0;
        f
    }

    pub fn tag(&self) -> DomainTag {
        self.tag
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Values at interior sites (a prefix in every ordering).
    pub fn interior(&self, geom: &BoxGeometry) -> &[f64] {
        &self.values[..geom.interior_count()]
    }

    /// Total conversion between domains: restriction drops values outside the
    /// target set, extension pads with zeros.
    pub fn to_tag(&self, geom: &BoxGeometry, tag: DomainTag) -> LatticeField {
        if tag == self.tag {
            return self.clone();
        }
        let n = geom.interior_count();
        let mut out = LatticeField::zeros(geom, tag);
        out.values[..n].copy_from_slice(&self.values[..n]);
        match (self.tag, tag) {
            (DomainTag::Cl1, DomainTag::Cl2) => {
                for b in 0..geom.boundary_count() {
                    out.values[n + geom.b1_in_b2(b)] = self.values[n + b];
                }
            }
            (DomainTag::Cl2, DomainTag::Cl1) => {
                for b in 0..geom.boundary_count() {
                    out.values[n + b] = self.values[n + geom.b1_in_b2(b)];
                }
            }
            _ => {}
        }
        out
    }
}

/// Standard inner product `Σ u(x) v(x)` over the tagged domain, after total
/// extension/restriction of both fields.
pub fn l2_inner(
    geom: &BoxGeometry,
    u: &LatticeField,
    v: &LatticeField,
    tag: DomainTag,
) -> f64 {
    let ue = u.to_tag(geom, tag);
    let ve = v.to_tag(geom, tag);
    dot(ue.values(), ve.values())
}

/// Plain dot product of equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
