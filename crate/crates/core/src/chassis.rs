//! Chassis geometry: the library of rotor-vertex layouts used as optimization inputs.

use nalgebra::Vector3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Pairwise-distinctness gate, relative to the circumradius.
pub const MIN_VERTEX_SEPARATION: f64 = 1e-9;

/// Perturbation magnitude and seed used for the built-in quasi-regular variants
/// (`CQRPol6`..`CQRPol10`, `CQCub8`). The published instances are unspecified, so
/// these are fixed representatives of the same symmetry class.
pub const QUASI_MAGNITUDE: f64 = 0.15;
pub const QUASI_SEED_BASE: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChassisFamily {
    RegularPolygon,
    Platonic,
    Prism,
    Antiprism,
    Bipyramid,
    Cupola,
    Archimedean,
    QuasiRegular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlatonicSolid {
    Octahedron,
    Cube,
    Icosahedron,
    Dodecahedron,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuxiliarySolid {
    TriPrism6,
    PentBipyramid7,
    SqAntiprism8,
    TriCupola9,
    Cuboctahedron12,
    HexPrism12,
}

/// A named rigid set of rotor positions. Vertices are dimensionless; the
/// circumradius is the largest vertex norm and doubles as the default
/// characteristic length downstream.
#[derive(Clone, Debug, PartialEq)]
pub struct Chassis {
    id: String,
    family: ChassisFamily,
    vertices: Vec<Vector3<f64>>,
    circumradius: f64,
}

#[derive(Serialize, Deserialize)]
struct ChassisWire {
    id: String,
    family: ChassisFamily,
    vertices: Vec<[f64; 3]>,
}

impl Chassis {
    /// Constructor used by the generators. Accepts n >= 3 so sub-actuated layouts
    /// (e.g. a square) can exist in memory; the JSON loader and the optimizer
    /// enforce the fully-actuated n >= 6 regime.
    pub fn new(
        id: impl Into<String>,
        family: ChassisFamily,
        vertices: Vec<Vector3<f64>>,
    ) -> Result<Self> {
        let id = id.into();
        if vertices.len() < 3 {
            return Err(Error::invalid(format!(
                "chassis {id:?} needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        for (i, p) in vertices.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::invalid(format!(
                    "chassis {id:?} vertex {i} has non-finite coordinates"
                )));
            }
            if p.norm() == 0.0 {
                return Err(Error::invalid(format!(
                    "chassis {id:?} vertex {i} has zero norm"
                )));
            }
        }
        let circumradius = max_norm(&vertices);
        for i in 0..vertices.len() {
            for j in (i + 1)..vertices.len() {
                if (vertices[i] - vertices[j]).norm() <= MIN_VERTEX_SEPARATION * circumradius {
                    return Err(Error::invalid(format!(
                        "chassis {id:?} vertices {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(Chassis {
            id,
            family,
            vertices,
            circumradius,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn family(&self) -> ChassisFamily {
        self.family
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Vector3<f64> {
        self.vertices[i]
    }

    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    /// Rescale so the circumradius is exactly 1.
    fn into_unit_scale(mut self) -> Self {
        let r = self.circumradius;
        for p in &mut self.vertices {
            *p /= r;
        }
        // Recompute instead of pinning 1.0 so a serialization round trip,
        // which rederives the radius from vertices, reproduces this value.
        self.circumradius = max_norm(&self.vertices);
        self
    }

    pub fn to_json_string(&self) -> Result<String> {
        let wire = ChassisWire {
            id: self.id.clone(),
            family: self.family,
            vertices: self.vertices.iter().map(|p| [p.x, p.y, p.z]).collect(),
        };
        Ok(serde_json::to_string_pretty(&wire)?)
    }

    /// Loader entry: validates all type invariants, including the
    /// fully-actuated regime (N >= 6).
    pub fn from_json_str(s: &str) -> Result<Self> {
        let wire: ChassisWire = serde_json::from_str(s)?;
        let vertices = wire
            .vertices
            .into_iter()
            .map(|[x, y, z]| Vector3::new(x, y, z))
            .collect();
        let chassis = Chassis::new(wire.id, wire.family, vertices)?;
        if chassis.n() < 6 {
            return Err(Error::invalid(format!(
                "chassis {:?} has N={} but the pipeline requires N >= 6",
                chassis.id,
                chassis.n()
            )));
        }
        Ok(chassis)
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Hex digest of the canonical JSON serialization; recorded in solution
    /// provenance so result files pin the exact geometry they came from.
    pub fn content_hash(&self) -> String {
        let json = self.to_json_string().expect("chassis serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn max_norm(vertices: &[Vector3<f64>]) -> f64 {
    vertices.iter().map(|p| p.norm()).fold(0.0, f64::max)
}

/// Planar regular N-gon, unit circumradius, vertex v at azimuth 2π(v−1)/n.
pub fn make_regular_polygon(n: usize) -> Result<Chassis> {
    if n < 3 {
        return Err(Error::invalid(format!(
            "regular polygon needs n >= 3, got {n}"
        )));
    }
    let vertices = (0..n)
        .map(|v| {
            let a = 2.0 * std::f64::consts::PI * v as f64 / n as f64;
            Vector3::new(a.cos(), a.sin(), 0.0)
        })
        .collect();
    Chassis::new(
        format!("CRPol{n}"),
        ChassisFamily::RegularPolygon,
        vertices,
    )
}

pub fn make_platonic(which: PlatonicSolid) -> Chassis {
    let (id, vertices) = match which {
        // Ordering: top pole, equatorial ring counterclockwise from +x, bottom pole.
        PlatonicSolid::Octahedron => (
            "COct6",
            vec![
                Vector3::new(0.0, 0.0, 1.0),
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
                Vector3::new(-1.0, 0.0, 0.0),
                Vector3::new(0.0, -1.0, 0.0),
                Vector3::new(0.0, 0.0, -1.0),
            ],
        ),
        // Ordering: lexicographic on sign patterns, + before −, x then y then z.
        PlatonicSolid::Cube => {
            let s = 1.0 / 3.0f64.sqrt();
            let mut vertices = Vec::with_capacity(8);
            for &sx in &[1.0, -1.0] {
                for &sy in &[1.0, -1.0] {
                    for &sz in &[1.0, -1.0] {
                        vertices.push(Vector3::new(sx * s, sy * s, sz * s));
                    }
                }
            }
            ("CCub8", vertices)
        }
        // Cyclic families of (0, ±1, ±φ), each family in sign order (++, +−, −+, −−).
        PlatonicSolid::Icosahedron => {
            let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
            let r = (1.0 + phi * phi).sqrt();
            let mut vertices = Vec::with_capacity(12);
            for &(a, b) in &[(1.0, phi), (1.0, -phi), (-1.0, phi), (-1.0, -phi)] {
                vertices.push(Vector3::new(0.0, a, b) / r);
            }
            for &(a, b) in &[(1.0, phi), (1.0, -phi), (-1.0, phi), (-1.0, -phi)] {
                vertices.push(Vector3::new(b, 0.0, a) / r);
            }
            for &(a, b) in &[(1.0, phi), (1.0, -phi), (-1.0, phi), (-1.0, -phi)] {
                vertices.push(Vector3::new(a, b, 0.0) / r);
            }
            ("CIco12", vertices)
        }
        // Cube vertices first, then the three cyclic families of (0, ±1/φ, ±φ).
        PlatonicSolid::Dodecahedron => {
            let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
            let r = 3.0f64.sqrt();
            let mut vertices = Vec::with_capacity(20);
            for &sx in &[1.0, -1.0] {
                for &sy in &[1.0, -1.0] {
                    for &sz in &[1.0, -1.0] {
                        vertices.push(Vector3::new(sx, sy, sz) / r);
                    }
                }
            }
            let (a, b) = (1.0 / phi, phi);
            for &(p, q) in &[(a, b), (a, -b), (-a, b), (-a, -b)] {
                vertices.push(Vector3::new(0.0, p, q) / r);
            }
            for &(p, q) in &[(a, b), (a, -b), (-a, b), (-a, -b)] {
                vertices.push(Vector3::new(q, 0.0, p) / r);
            }
            for &(p, q) in &[(a, b), (a, -b), (-a, b), (-a, -b)] {
                vertices.push(Vector3::new(p, q, 0.0) / r);
            }
            ("CDod20", vertices)
        }
    };
    Chassis::new(id, ChassisFamily::Platonic, vertices)
        .expect("platonic construction is valid")
        .into_unit_scale()
}

pub fn make_auxiliary(kind: AuxiliarySolid) -> Chassis {
    use std::f64::consts::PI;
    let ring = |count: usize, radius: f64, z: f64, azimuth0: f64| -> Vec<Vector3<f64>> {
        (0..count)
            .map(|k| {
                let a = azimuth0 + 2.0 * PI * k as f64 / count as f64;
                Vector3::new(radius * a.cos(), radius * a.sin(), z)
            })
            .collect()
    };
    let (id, family, vertices) = match kind {
        // Uniform triangular prism (square sides): edge 1, triangle circumradius 1/√3,
        // half-height 1/2. Upper triangle first, aligned lower triangle second.
        AuxiliarySolid::TriPrism6 => {
            let r = 1.0 / 3.0f64.sqrt();
            let mut v = ring(3, r, 0.5, 0.0);
            v.extend(ring(3, r, -0.5, 0.0));
            ("CTriPr6", ChassisFamily::Prism, v)
        }
        // Johnson J13, unit edge: pentagon circumradius 1/(2 sin 36°), apex height
        // √(1 − r²). Top apex, ring, bottom apex.
        AuxiliarySolid::PentBipyramid7 => {
            let r = 0.5 / (PI / 5.0).sin();
            let h = (1.0 - r * r).sqrt();
            let mut v = vec![Vector3::new(0.0, 0.0, h)];
            v.extend(ring(5, r, 0.0, 0.0));
            v.push(Vector3::new(0.0, 0.0, -h));
            ("CPentBi7", ChassisFamily::Bipyramid, v)
        }
        // Uniform square antiprism: squares of circumradius 1 at z = ±h with the
        // lower square rotated 45°; h = 2^(−3/4) makes all edges equal.
        AuxiliarySolid::SqAntiprism8 => {
            let h = 2.0f64.powf(-0.75);
            let mut v = ring(4, 1.0, h, 0.0);
            v.extend(ring(4, 1.0, -h, PI / 4.0));
            ("CSqAnti8", ChassisFamily::Antiprism, v)
        }
        // Johnson J3, unit edge: triangle (circumradius 1/√3, height √(2/3)) over a
        // unit hexagon. Triangle ring first, hexagon second.
        AuxiliarySolid::TriCupola9 => {
            let mut v = ring(3, 1.0 / 3.0f64.sqrt(), (2.0f64 / 3.0).sqrt(), PI / 6.0);
            v.extend(ring(6, 1.0, 0.0, 0.0));
            ("CTriCup9", ChassisFamily::Cupola, v)
        }
        // All permutations of (±1, ±1, 0)/√2: xy family, xz family, yz family.
        AuxiliarySolid::Cuboctahedron12 => {
            let s = 1.0 / 2.0f64.sqrt();
            let mut v = Vec::with_capacity(12);
            for &(a, b) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                v.push(Vector3::new(a * s, b * s, 0.0));
            }
            for &(a, b) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                v.push(Vector3::new(a * s, 0.0, b * s));
            }
            for &(a, b) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                v.push(Vector3::new(0.0, a * s, b * s));
            }
            ("CCubOct12", ChassisFamily::Archimedean, v)
        }
        // Uniform hexagonal prism: hexagon edge = circumradius = 1, height 1.
        AuxiliarySolid::HexPrism12 => {
            let mut v = ring(6, 1.0, 0.5, 0.0);
            v.extend(ring(6, 1.0, -0.5, 0.0));
            ("CHexPr12", ChassisFamily::Prism, v)
        }
    };
    Chassis::new(id, family, vertices)
        .expect("auxiliary construction is valid")
        .into_unit_scale()
}

/// Seeded perturbation of a base chassis: each vertex is displaced by a vector
/// drawn uniformly from the ball of radius magnitude·circumradius, then the
/// whole set is rescaled back to circumradius 1. Deterministic in (base,
/// magnitude, seed).
pub fn make_quasi_regular(base: &Chassis, magnitude: f64, seed: u64) -> Result<Chassis> {
    if !(0.0..0.5).contains(&magnitude) {
        return Err(Error::invalid(format!(
            "quasi-regular magnitude must be in [0, 0.5), got {magnitude}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = magnitude * base.circumradius();
    let vertices = base
        .vertices()
        .iter()
        .map(|p| {
            let dir: [f64; 3] = rng.sample(rand_distr::UnitSphere);
            let radius = scale * rng.random::<f64>().cbrt();
            p + radius * Vector3::new(dir[0], dir[1], dir[2])
        })
        .collect();
    let id = format!("CQ{}", base.id().strip_prefix('C').unwrap_or(base.id()));
    let chassis = Chassis::new(id, ChassisFamily::QuasiRegular, vertices)?;
    Ok(if magnitude == 0.0 {
        chassis
    } else {
        chassis.into_unit_scale()
    })
}

/// Resolve a chassis-zoo id. `CRPol<n>` works for any n >= 3; the quasi-regular
/// entries use the fixed representative parameters above.
pub fn builtin(id: &str) -> Result<Chassis> {
    match id {
        "COct6" => return Ok(make_platonic(PlatonicSolid::Octahedron)),
        "CCub8" => return Ok(make_platonic(PlatonicSolid::Cube)),
        "CIco12" => return Ok(make_platonic(PlatonicSolid::Icosahedron)),
        "CDod20" => return Ok(make_platonic(PlatonicSolid::Dodecahedron)),
        "CTriPr6" => return Ok(make_auxiliary(AuxiliarySolid::TriPrism6)),
        "CPentBi7" => return Ok(make_auxiliary(AuxiliarySolid::PentBipyramid7)),
        "CSqAnti8" => return Ok(make_auxiliary(AuxiliarySolid::SqAntiprism8)),
        "CTriCup9" => return Ok(make_auxiliary(AuxiliarySolid::TriCupola9)),
        "CCubOct12" => return Ok(make_auxiliary(AuxiliarySolid::Cuboctahedron12)),
        "CHexPr12" => return Ok(make_auxiliary(AuxiliarySolid::HexPrism12)),
        "CQCub8" => {
            let base = make_platonic(PlatonicSolid::Cube);
            return make_quasi_regular(&base, QUASI_MAGNITUDE, QUASI_SEED_BASE + 8);
        }
        _ => {}
    }
    if let Some(n) = id.strip_prefix("CQRPol").and_then(|s| s.parse().ok()) {
        let base = make_regular_polygon(n)?;
        return make_quasi_regular(&base, QUASI_MAGNITUDE, QUASI_SEED_BASE + n as u64);
    }
    if let Some(n) = id.strip_prefix("CRPol").and_then(|s| s.parse().ok()) {
        return make_regular_polygon(n);
    }
    Err(Error::UnknownChassis(id.to_string()))
}

/// The chassis-zoo ids advertised by the CLI.
pub fn builtin_ids() -> Vec<String> {
    let mut ids: Vec<String> = (6..=20).map(|n| format!("CRPol{n}")).collect();
    ids.extend((6..=10).map(|n| format!("CQRPol{n}")));
    for fixed in [
        "COct6",
        "CCub8",
        "CIco12",
        "CDod20",
        "CQCub8",
        "CTriPr6",
        "CPentBi7",
        "CSqAnti8",
        "CTriCup9",
        "CCubOct12",
        "CHexPr12",
    ] {
        ids.push(fixed.to_string());
    }
    ids
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hexagon_vertices() {
        let hex = make_regular_polygon(6).unwrap();
        assert_eq!(hex.n(), 6);
        assert_relative_eq!(hex.vertex(0), Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(hex.vertex(3), Vector3::new(-1.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn square_allowed_too_small_rejected() {
        assert_eq!(make_regular_polygon(4).unwrap().n(), 4);
        assert!(make_regular_polygon(2).is_err());
    }

    #[test]
    fn polygon_consecutive_subtended_angle() {
        for n in [6usize, 7, 9, 13] {
            let poly = make_regular_polygon(n).unwrap();
            let expect = 2.0 * std::f64::consts::PI / n as f64;
            for v in 0..n {
                let a = poly.vertex(v);
                let b = poly.vertex((v + 1) % n);
                let angle = (a.dot(&b)).clamp(-1.0, 1.0).acos();
                assert_relative_eq!(angle, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn generated_chassis_unit_circumradius() {
        let mut all = vec![
            make_platonic(PlatonicSolid::Octahedron),
            make_platonic(PlatonicSolid::Cube),
            make_platonic(PlatonicSolid::Icosahedron),
            make_platonic(PlatonicSolid::Dodecahedron),
            make_auxiliary(AuxiliarySolid::TriPrism6),
            make_auxiliary(AuxiliarySolid::PentBipyramid7),
            make_auxiliary(AuxiliarySolid::SqAntiprism8),
            make_auxiliary(AuxiliarySolid::TriCupola9),
            make_auxiliary(AuxiliarySolid::Cuboctahedron12),
            make_auxiliary(AuxiliarySolid::HexPrism12),
        ];
        for n in 6..=12 {
            all.push(make_regular_polygon(n).unwrap());
        }
        for c in &all {
            let max_norm = c
                .vertices()
                .iter()
                .map(|p| p.norm())
                .fold(0.0f64, f64::max);
            assert_relative_eq!(max_norm, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn platonic_vertices_all_unit_norm() {
        for solid in [
            PlatonicSolid::Octahedron,
            PlatonicSolid::Cube,
            PlatonicSolid::Icosahedron,
            PlatonicSolid::Dodecahedron,
        ] {
            let c = make_platonic(solid);
            for p in c.vertices() {
                assert_relative_eq!(p.norm(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn expected_vertex_counts() {
        assert_eq!(make_platonic(PlatonicSolid::Octahedron).n(), 6);
        assert_eq!(make_platonic(PlatonicSolid::Cube).n(), 8);
        assert_eq!(make_platonic(PlatonicSolid::Icosahedron).n(), 12);
        assert_eq!(make_platonic(PlatonicSolid::Dodecahedron).n(), 20);
        assert_eq!(make_auxiliary(AuxiliarySolid::TriPrism6).n(), 6);
        assert_eq!(make_auxiliary(AuxiliarySolid::PentBipyramid7).n(), 7);
        assert_eq!(make_auxiliary(AuxiliarySolid::SqAntiprism8).n(), 8);
        assert_eq!(make_auxiliary(AuxiliarySolid::TriCupola9).n(), 9);
        assert_eq!(make_auxiliary(AuxiliarySolid::Cuboctahedron12).n(), 12);
        assert_eq!(make_auxiliary(AuxiliarySolid::HexPrism12).n(), 12);
    }

    #[test]
    fn quasi_regular_zero_magnitude_is_identity() {
        let base = make_regular_polygon(7).unwrap();
        let quasi = make_quasi_regular(&base, 0.0, 9).unwrap();
        assert_eq!(base.vertices(), quasi.vertices());
        assert_eq!(quasi.id(), "CQRPol7");
    }

    #[test]
    fn quasi_regular_deterministic_and_seed_sensitive() {
        let base = make_platonic(PlatonicSolid::Cube);
        let a = make_quasi_regular(&base, 0.1, 42).unwrap();
        let b = make_quasi_regular(&base, 0.1, 42).unwrap();
        let c = make_quasi_regular(&base, 0.1, 43).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert_ne!(a.vertices(), c.vertices());
        let max_norm = a.vertices().iter().map(|p| p.norm()).fold(0.0, f64::max);
        assert_relative_eq!(max_norm, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn quasi_regular_magnitude_bound() {
        let base = make_regular_polygon(6).unwrap();
        assert!(make_quasi_regular(&base, 0.5, 1).is_err());
        let quasi = make_quasi_regular(&base, 0.49, 1).unwrap();
        assert_eq!(quasi.family(), ChassisFamily::QuasiRegular);
    }

    #[test]
    fn json_round_trip() {
        let c = make_auxiliary(AuxiliarySolid::SqAntiprism8);
        let json = c.to_json_string().unwrap();
        let back = Chassis::from_json_str(&json).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.content_hash(), back.content_hash());
    }

    #[test]
    fn loader_rejects_small_or_degenerate() {
        let square = make_regular_polygon(4).unwrap();
        let json = square.to_json_string().unwrap();
        assert!(Chassis::from_json_str(&json).is_err());

        let bad = r#"{"id":"X","family":"prism","vertices":[[1,0,0],[1,0,0],[0,1,0],[0,0,1],[0,-1,0],[-1,0,0]]}"#;
        assert!(Chassis::from_json_str(bad).is_err());
    }

    #[test]
    fn builtin_registry_resolves_all_advertised_ids() {
        for id in builtin_ids() {
            let c = builtin(&id).unwrap();
            assert_eq!(c.id(), id);
            assert!(c.n() >= 6);
        }
        assert!(matches!(builtin("NOPE"), Err(Error::UnknownChassis(_))));
    }
}
