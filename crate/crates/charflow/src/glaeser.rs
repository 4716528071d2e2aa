//! Tangency machinery on finite point clouds: paratangent cones from
//! secants, the Λ operation (discrete closure followed by fiberwise
//! linearization) iterated 2n times, and a numeric iterated
//! characteristic chain for fields with smooth coefficients.
//!
//! Tolerances: secant directions are clustered at θ_tol = 3°, a field is
//! counted tangent to an estimated subspace within θ_char = 5°, and the
//! vanishing floor is 1e−6 times the largest field magnitude on the
//! *initial* cloud (computed once and held fixed across chain steps so
//! later steps cannot reclassify points by rescaling).
//!
//! Subspace rank uses a relative singular-value threshold of sin θ_tol
//! (directions within the clustering tolerance of the current span do not
//! raise the dimension), floored by the 1e3 gap ratio for well-separated
//! spectra.

use crate::error::{Error, Result};
use crate::smooth::SmoothVectorField;

/// Angular clustering tolerance for secant directions (radians).
pub const THETA_TOL: f64 = 3.0 * std::f64::consts::PI / 180.0;
/// Angular tolerance for the characteristic classifier (radians).
pub const THETA_CHAR: f64 = 5.0 * std::f64::consts::PI / 180.0;
/// Relative factor for the vanishing floor.
pub const V_FLOOR_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Torus,
}

/// A finite sampled set in ℝⁿ or on the flat torus (circumference 2π).
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub points: Vec<Vec<f64>>,
    /// sampling pitch δ_sample
    pub scale: f64,
    pub metric: Metric,
    pub dim: usize,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>, scale: f64, metric: Metric) -> Result<Self> {
        if scale <= 0.0 {
            return Err(Error::Config(format!("cloud scale must be positive, got {scale}")));
        }
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch(dim, p.len()));
            }
        }
        let cloud = PointCloud {
            points,
            scale,
            metric,
            dim,
        };
        for i in 0..cloud.points.len() {
            for j in (i + 1)..cloud.points.len() {
                if cloud.distance(i, j) < 1e-12 {
                    return Err(Error::Config(format!(
                        "cloud points {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Displacement a − b respecting the metric (shortest representative
    /// on the torus).
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        match self.metric {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| x - y).collect(),
            Metric::Torus => a
                .iter()
                .zip(b)
                .map(|(x, y)| crate::torus::TorusGrid::wrap(x - y))
                .collect(),
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        norm(&self.displacement(&self.points[i], &self.points[j]))
    }

    /// Indices within radius r of point i, excluding i, sorted nearest first.
    pub fn neighbors_within(&self, i: usize, r: f64) -> Vec<usize> {
        let mut out: Vec<(f64, usize)> = (0..self.len())
            .filter(|&j| j != i)
            .map(|j| (self.distance(i, j), j))
            .filter(|&(d, _)| d <= r)
            .collect();
        out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        out.into_iter().map(|(_, j)| j).collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-point direction data: raw unit directions, and after linearization
/// an orthonormal subspace basis.
#[derive(Debug, Clone, Default)]
pub struct ConeFiber {
    pub directions: Vec<Vec<f64>>,
    pub basis: Vec<Vec<f64>>,
}

impl ConeFiber {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Direction/subspace data attached to every cloud point.
#[derive(Debug, Clone)]
pub struct ConeField {
    pub fibers: Vec<ConeFiber>,
}

/// Paratangent cone fiber at `points[x]`: normalized secants from x to
/// the other cloud points within `r_outer` (nearest-first, capped at
/// `pairs_cap`), symmetrized and clustered at θ_tol. Returns the
/// symmetrized cluster representatives; fewer than two points in the
/// ball give the empty fiber.
pub fn paratangent_cone(
    cloud: &PointCloud,
    x: usize,
    r_outer: f64,
    pairs_cap: usize,
) -> Result<Vec<Vec<f64>>> {
    if x >= cloud.len() {
        return Err(Error::Config(format!("point index {x} out of range")));
    }
    if r_outer < 4.0 * cloud.scale {
        return Err(Error::Config(format!(
            "r_outer = {r_outer} below 4x sampling scale {}",
            cloud.scale
        )));
    }
    let neighbors = cloud.neighbors_within(x, r_outer);
    let mut secants: Vec<Vec<f64>> = Vec::new();
    for &j in neighbors.iter().take(pairs_cap) {
        let mut d = cloud.displacement(&cloud.points[j], &cloud.points[x]);
        let n = norm(&d);
        if n < 1e-14 {
            continue;
        }
        for c in d.iter_mut() {
            *c /= n;
        }
        secants.push(d);
    }
    // greedy angular clustering of the symmetrized directions
    let cos_tol = THETA_TOL.cos();
    let mut clusters: Vec<Vec<f64>> = Vec::new(); // running (unnormalized) means
    'next: for s in &secants {
        for c in clusters.iter_mut() {
            let cn = norm(c);
            let align = dot(s, c) / cn;
            if align.abs() >= cos_tol {
                let sign = align.signum();
                for (ci, si) in c.iter_mut().zip(s) {
                    *ci += sign * si;
                }
                continue 'next;
            }
        }
        clusters.push(s.clone());
    }
    let mut out = Vec::with_capacity(2 * clusters.len());
    for c in clusters {
        let n = norm(&c);
        let rep: Vec<f64> = c.iter().map(|v| v / n).collect();
        let neg: Vec<f64> = rep.iter().map(|v| -v).collect();
        out.push(rep);
        out.push(neg);
    }
    Ok(out)
}

/// Orthonormal basis for the span of a direction list, with rank decided
/// by the relative singular-value threshold max(sin θ_tol, 1e−3).
pub fn span_basis(directions: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    if directions.is_empty() || dim == 0 {
        return Vec::new();
    }
    let m = nalgebra::DMatrix::from_fn(directions.len(), dim, |i, j| directions[i][j]);
    let svd = nalgebra::SVD::new(m, false, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax <= 0.0 {
        return Vec::new();
    }
    let thresh = smax * THETA_TOL.sin().max(1e-3);
    let vt = svd.v_t.as_ref().unwrap();
    let mut basis = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > thresh {
            basis.push(vt.row(i).iter().copied().collect::<Vec<f64>>());
        }
    }
    basis
}

/// Λ: discrete closure (pull in directions from fibers within 2·scale)
/// followed by fiberwise linearization. Fiber dimension never decreases
/// because each fiber's own basis is part of the span input.
pub fn lambda_op(b: &ConeField, cloud: &PointCloud) -> ConeField {
    let r_close = 2.0 * cloud.scale;
    let mut fibers = Vec::with_capacity(cloud.len());
    for i in 0..cloud.len() {
        let mut dirs: Vec<Vec<f64>> = b.fibers[i].directions.clone();
        dirs.extend(b.fibers[i].basis.iter().cloned());
        for j in cloud.neighbors_within(i, r_close) {
            dirs.extend(b.fibers[j].directions.iter().cloned());
            dirs.extend(b.fibers[j].basis.iter().cloned());
        }
        let basis = span_basis(&dirs, cloud.dim);
        let basis = if basis.len() < b.fibers[i].dim() {
            b.fibers[i].basis.clone()
        } else {
            basis
        };
        fibers.push(ConeFiber {
            directions: basis.clone(),
            basis,
        });
    }
    ConeField { fibers }
}

/// Glaeser-style tangent estimate: paratangent cones, one linearization,
/// then Λ applied exactly 2n times.
pub fn zariski_tangent_estimate(cloud: &PointCloud) -> Result<ConeField> {
    let r_outer = 10.0 * cloud.scale;
    let pairs_cap = 512;
    let mut fibers = Vec::with_capacity(cloud.len());
    for i in 0..cloud.len() {
        let directions = paratangent_cone(cloud, i, r_outer, pairs_cap)?;
        let basis = span_basis(&directions, cloud.dim);
        fibers.push(ConeFiber { directions, basis });
    }
    let raw_directions: Vec<Vec<Vec<f64>>> =
        fibers.iter().map(|f| f.directions.clone()).collect();
    let mut field = ConeField { fibers };
    // the initial linearization already happened (basis of each raw fiber);
    // now iterate Λ exactly 2n times per the theorem
    for _ in 0..(2 * cloud.dim) {
        field = lambda_op(&field, cloud);
    }
    // keep the pre-linearization secant evidence alongside the final
    // subspaces: near corners/crossings the Λ closure is known to inflate
    // fibers, and downstream classification needs the raw directions to
    // fall back on when a fiber degenerates to the full space
    for (fiber, dirs) in field.fibers.iter_mut().zip(raw_directions) {
        fiber.directions = dirs;
    }
    Ok(field)
}

/// One step of the numeric characteristic chain.
#[derive(Debug, Clone)]
pub struct CharChainStep {
    /// indices into the previous step's cloud are not kept; each step
    /// stores its own point list
    pub points: Vec<Vec<f64>>,
    pub characteristic: Vec<bool>,
    pub tangent_dims: Vec<usize>,
}

/// Numeric iterated characteristic chain A₀ ⊇ A₁ ⊇ …
///
/// A point is characteristic when every field at it either has magnitude
/// below the vanishing floor or lies within θ_char of the estimated
/// tangent subspace. The floor is computed once on A₀.
pub fn numeric_char_chain(
    fields: &[SmoothVectorField],
    a0: &PointCloud,
    max_k: usize,
) -> Result<Vec<CharChainStep>> {
    let mut steps: Vec<CharChainStep> = Vec::new();
    if a0.is_empty() {
        steps.push(CharChainStep {
            points: Vec::new(),
            characteristic: Vec::new(),
            tangent_dims: Vec::new(),
        });
        return Ok(steps);
    }

    // vanishing floor, fixed from the initial cloud
    let mut vmax = 0.0f64;
    for p in &a0.points {
        for f in fields {
            vmax = vmax.max(norm(&f.eval(p)?));
        }
    }
    let v_floor = V_FLOOR_REL * vmax;

    let sin_char = THETA_CHAR.sin();
    let mut cloud = a0.clone();
    for _k in 0..=max_k {
        if cloud.is_empty() {
            steps.push(CharChainStep {
                points: Vec::new(),
                characteristic: Vec::new(),
                tangent_dims: Vec::new(),
            });
            break;
        }
        let tangent = zariski_tangent_estimate(&cloud)?;
        let mut characteristic = Vec::with_capacity(cloud.len());
        let mut tangent_dims = Vec::with_capacity(cloud.len());
        for (i, p) in cloud.points.iter().enumerate() {
            let basis = &tangent.fibers[i].basis;
            tangent_dims.push(basis.len());
            // a full-dimensional subspace estimate puts every vector within
            // tolerance and carries no information; it arises from Λ-closure
            // inflation near crossings. Fall back to limit secants there:
            // directions to the nearest ring of neighbors, which approximate
            // the true paratangent cone without the long-range crossing
            // contamination of the wide secant fan
            let full_dim = basis.len() == cloud.dim;
            let limit_secants: Vec<Vec<f64>> = if full_dim {
                cloud
                    .neighbors_within(i, 2.0 * cloud.scale)
                    .into_iter()
                    .map(|j| {
                        let mut d = cloud.displacement(&cloud.points[j], p);
                        let n = norm(&d);
                        for c in d.iter_mut() {
                            *c /= n;
                        }
                        d
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let mut is_char = true;
            for f in fields {
                let v = f.eval(p)?;
                let vn = norm(&v);
                if vn < v_floor {
                    continue;
                }
                let tangent_enough = if full_dim {
                    let cos_char = THETA_CHAR.cos();
                    limit_secants
                        .iter()
                        .any(|d| dot(&v, d).abs() / vn >= cos_char)
                } else {
                    // distance from the unit field direction to the subspace
                    let mut resid = v.clone();
                    for b in basis {
                        let c = dot(&resid, b);
                        for (ri, bi) in resid.iter_mut().zip(b) {
                            *ri -= c * bi;
                        }
                    }
                    norm(&resid) / vn <= sin_char
                };
                if !tangent_enough {
                    is_char = false;
                    break;
                }
            }
            characteristic.push(is_char);
        }
        let next_points: Vec<Vec<f64>> = cloud
            .points
            .iter()
            .zip(&characteristic)
            .filter(|&(_, &c)| c)
            .map(|(p, _)| p.clone())
            .collect();
        let stable = next_points.len() == cloud.len();
        steps.push(CharChainStep {
            points: cloud.points.clone(),
            characteristic,
            tangent_dims,
        });
        if stable {
            break;
        }
        if next_points.is_empty() {
            steps.push(CharChainStep {
                points: Vec::new(),
                characteristic: Vec::new(),
                tangent_dims: Vec::new(),
            });
            break;
        }
        cloud = PointCloud {
            points: next_points,
            scale: cloud.scale,
            metric: cloud.metric,
            dim: cloud.dim,
        };
    }
    Ok(steps)
}

/// Read a cloud from CSV: one point per row, coordinate columns only; an
/// optional non-numeric header row is skipped.
pub fn read_cloud_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            cells.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(p) => points.push(p),
            Err(_) if lineno == 0 => continue, // header
            Err(e) => {
                return Err(Error::Config(format!(
                    "bad CSV row {}: {e}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(points)
}

/// Serialize a classified chain step: coordinate columns, then
/// `characteristic` (0/1) and `tangent_dim`.
pub fn write_classified_csv(step: &CharChainStep, dim: usize) -> String {
    let mut out = String::new();
    for i in 0..dim {
        out.push_str(&format!("x{},", i + 1));
    }
    out.push_str("characteristic,tangent_dim\n");
    for (i, p) in step.points.iter().enumerate() {
        for c in p {
            out.push_str(&format!("{c:.12},"));
        }
        out.push_str(&format!(
            "{},{}\n",
            if step.characteristic[i] { 1 } else { 0 },
            step.tangent_dims[i]
        ));
    }
    out
}
