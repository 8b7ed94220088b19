//! Synthetic problem suite and empirical estimators of problem constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BoxBounds, VectorField};
use crate::linalg::Matrix;
use crate::point::Point;
use crate::resolvent::ResolventMap;

/// Pairs whose operator difference is below this norm are skipped by the
/// ratio estimators.
pub const DEGENERATE_PAIR_TOL: f64 = 1e-12;

/// An inclusion problem `0 ∈ Az + Fz`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub field: VectorField,
    pub resolvent: ResolventMap,
    /// Comonotonicity constant of `S = A + F`, when known in closed form.
    pub rho: Option<f64>,
    pub lipschitz: Option<f64>,
    pub known_zero: Option<Point>,
    /// Annotated range for `ρ` that is not derived in closed form.
    pub rho_range: Option<(f64, f64)>,
}

/// Constants echoed into trajectories and reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub name: String,
    pub dim: usize,
    pub lipschitz: Option<f64>,
    pub rho: Option<f64>,
    pub constrained: bool,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn is_constrained(&self) -> bool {
        !self.resolvent.is_identity()
    }

    /// Linear field and no constraint: the resolvent of `S` has a closed form.
    pub fn has_closed_form_resolvent(&self) -> bool {
        self.field.linear.is_some() && !self.is_constrained()
    }

    pub fn summary(&self) -> ProblemSummary {
        ProblemSummary {
            name: self.name.clone(),
            dim: self.dim(),
            lipschitz: self.lipschitz,
            rho: self.rho,
            constrained: self.is_constrained(),
        }
    }

    /// All known zeros of `S`.
    pub fn zeros(&self) -> &[Point] {
        &self.field.zeros
    }

    /// The known zero closest to `z`.
    pub fn nearest_zero(&self, z: &Point) -> Option<&Point> {
        self.field
            .zeros
            .iter()
            .min_by(|a, b| a.dist(z).total_cmp(&b.dist(z)))
    }

    /// Checks `0 ∈ A z + F z`: `F z ≈ 0` when unconstrained, otherwise `−F z`
    /// in the normal cone of the box coordinate-wise.
    pub fn is_solution(&self, z: &Point, tol: f64) -> bool {
        let f = self.field.eval(z);
        match &self.resolvent {
            ResolventMap::Identity => f.norm() <= tol,
            ResolventMap::Box(b) => {
                if !b.contains(z) {
                    return false;
                }
                (0..z.dim()).all(|i| {
                    let at_lower = (z[i] - b.lower[i]).abs() <= tol;
                    let at_upper = (z[i] - b.upper[i]).abs() <= tol;
                    // normal cone component of −F at a face
                    let v = -f[i];
                    match (at_lower, at_upper) {
                        (true, true) => true,
                        (true, false) => v <= tol,
                        (false, true) => v >= -tol,
                        (false, false) => v.abs() <= tol,
                    }
                })
            }
        }
    }

    /// Region used by estimators: the constraint box, else `[-2, 2]^d`.
    pub fn sampling_box(&self) -> BoxBounds {
        self.resolvent
            .bounds()
            .cloned()
            .or_else(|| self.field.domain_box.clone())
            .unwrap_or_else(|| BoxBounds::symmetric(self.dim(), 2.0))
    }

    fn from_field(name: &str, field: VectorField, resolvent: ResolventMap) -> Self {
        ProblemSpec {
            name: name.to_string(),
            rho: field.rho,
            lipschitz: field.lipschitz,
            known_zero: field.zeros.first().cloned(),
            field,
            resolvent,
            rho_range: None,
        }
    }
}

/// `φ(x, y) = axy + (b/2)x² − (b/2)y²`, i.e. `F(x, y) = (bx + ay, −ax + by)`.
pub fn quadratic_field(a: f64, b: f64) -> Result<ProblemSpec> {
    if !(a >= 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::param(format!("quadratic needs finite a >= 0 and b, got a={a}, b={b}")));
    }
    if a == 0.0 && b == 0.0 {
        return Err(Error::param("quadratic with a = b = 0 is the zero field"));
    }
    let m = Matrix::from_rows(&[vec![b, a], vec![-a, b]])?;
    let mut field = VectorField::linear(m);
    let norm_sq = a * a + b * b;
    field.lipschitz = Some(norm_sq.sqrt());
    field.rho = Some(b / norm_sq);
    Ok(ProblemSpec::from_field("quadratic", field, ResolventMap::Identity))
}

/// Quadratic game with prescribed Lipschitz constant `L` and comonotonicity `ρ`.
pub fn quadratic_from_constants(lipschitz: f64, rho: f64) -> Result<ProblemSpec> {
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(Error::param(format!("L must be > 0, got {lipschitz}")));
    }
    if !(rho.abs() <= 1.0 / lipschitz) {
        return Err(Error::param(format!("|rho| must be <= 1/L, got rho={rho}, L={lipschitz}")));
    }
    let l2 = lipschitz * lipschitz;
    let a = (l2 - l2 * l2 * rho * rho).max(0.0).sqrt();
    let b = l2 * rho;
    let mut spec = quadratic_field(a, b)?;
    // a and b are recomputed from (L, ρ); keep the requested constants exact.
    spec.lipschitz = Some(lipschitz);
    spec.rho = Some(rho);
    spec.field.lipschitz = Some(lipschitz);
    spec.field.rho = Some(rho);
    Ok(spec)
}

/// Generic linear field `F(z) = Mz` without constraints; `ρ` left unknown.
pub fn linear_field(name: &str, matrix: Matrix) -> ProblemSpec {
    ProblemSpec::from_field(name, VectorField::linear(matrix), ResolventMap::Identity)
}

pub const POLAR_DEFAULT_A: f64 = 1.0 / 3.0;
pub const POLAR_BOX_RADIUS: f64 = 1.1;

fn polar_psi(a: f64, x: f64, y: f64) -> f64 {
    a / 16.0 * x * (-1.0 + x * x + y * y) * (-9.0 + 16.0 * x * x + 16.0 * y * y)
}

/// Jacobian of the polar game field, row-major.
fn polar_jacobian(a: f64, x: f64, y: f64) -> [f64; 4] {
    let c = a / 16.0;
    let s = x * x + y * y;
    let g = (s - 1.0) * (16.0 * s - 9.0);
    let dg = 32.0 * s - 25.0;
    [
        c * (g + 2.0 * x * x * dg),
        c * 2.0 * x * y * dg - 1.0,
        c * 2.0 * x * y * dg + 1.0,
        c * (g + 2.0 * y * y * dg),
    ]
}

fn spectral_norm_2x2(j: [f64; 4]) -> f64 {
    Matrix::from_rows(&[vec![j[0], j[1]], vec![j[2], j[3]]])
        .map(|m| m.spectral_norm())
        .unwrap_or(f64::NAN)
}

/// Maximises the Jacobian norm of the polar field over `[-r, r]²` by a grid
/// search followed by pattern-search refinement.
fn polar_lipschitz(a: f64, r: f64) -> f64 {
    let n = 200;
    let mut best = (0.0, 0.0, 0.0);
    for i in 0..=n {
        for j in 0..=n {
            let x = -r + 2.0 * r * i as f64 / n as f64;
            let y = -r + 2.0 * r * j as f64 / n as f64;
            let v = spectral_norm_2x2(polar_jacobian(a, x, y));
            if v > best.0 {
                best = (v, x, y);
            }
        }
    }
    let (mut v, mut x, mut y) = best;
    let mut h = 2.0 * r / n as f64;
    while h > 1e-12 {
        let mut moved = false;
        for (dx, dy) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
            let (nx, ny) = ((x + dx).clamp(-r, r), (y + dy).clamp(-r, r));
            let nv = spectral_norm_2x2(polar_jacobian(a, nx, ny));
            if nv > v {
                (v, x, y) = (nv, nx, ny);
                moved = true;
            }
        }
        if !moved {
            h /= 2.0;
        }
    }
    v
}

/// Polar game `F(z) = (ψ(x, y) − y, ψ(y, x) + x)` on `‖z‖∞ ≤ 11/10`, with
/// `ψ(x, y) = (a/16) x (−1 + x² + y²)(−9 + 16x² + 16y²)`.
pub fn polar_game_field(a: f64) -> Result<ProblemSpec> {
    if !a.is_finite() {
        return Err(Error::param("polar game parameter must be finite"));
    }
    let r = POLAR_BOX_RADIUS;
    let mut field = VectorField::new(2, move |z, out| {
        let (x, y) = (z[0], z[1]);
        out[0] = polar_psi(a, x, y) - y;
        out[1] = polar_psi(a, y, x) + x;
    });
    let bounds = BoxBounds::symmetric(2, r);
    let lipschitz = polar_lipschitz(a, r);
    field.lipschitz = Some(lipschitz);
    field.zeros = vec![Point::zeros(2)];
    field.domain_box = Some(bounds.clone());
    let mut spec = ProblemSpec::from_field("polar", field, ResolventMap::Box(bounds));
    spec.rho_range = Some((-1.0 / (8.0 * lipschitz), -1.0 / (10.0 * lipschitz)));
    Ok(spec)
}

pub const FORSAKEN_A: f64 = 0.45;
pub const LNE_FORSAKEN_A: f64 = 0.34;
pub const FORSAKEN_BOX_RADIUS: f64 = 1.5;

fn forsaken_dpsi(t: f64) -> f64 {
    let t2 = t * t;
    t / 2.0 - 2.0 * t * t2 + t * t2 * t2
}

fn forsaken_ddpsi(t: f64) -> f64 {
    let t2 = t * t;
    0.5 - 6.0 * t2 + 5.0 * t2 * t2
}

/// Largest singular value of `[[p, 1], [-1, q]]`.
fn forsaken_jacobian_norm(p: f64, q: f64) -> f64 {
    let trace = p * p + q * q + 2.0;
    let det = (p * q + 1.0).powi(2);
    ((trace + (trace * trace - 4.0 * det).max(0.0).sqrt()) / 2.0).sqrt()
}

fn newton_zeros(field: &VectorField, bounds: &BoxBounds) -> Vec<Point> {
    let r = FORSAKEN_BOX_RADIUS;
    let mut found: Vec<Point> = Vec::new();
    let n = 8;
    for i in 0..=n {
        for j in 0..=n {
            let mut z = Point::from([
                -r + 2.0 * r * i as f64 / n as f64,
                -r + 2.0 * r * j as f64 / n as f64,
            ]);
            for _ in 0..100 {
                let f = field.eval(&z);
                if f.norm() < 1e-15 {
                    break;
                }
                let (p, q) = (forsaken_ddpsi(z[0]), forsaken_ddpsi(z[1]));
                // [[p, 1], [-1, q]] step = f
                let det = p * q + 1.0;
                if det.abs() < 1e-14 {
                    break;
                }
                let dx = (q * f[0] - f[1]) / det;
                let dy = (f[0] + p * f[1]) / det;
                z = Point::from([z[0] - dx, z[1] - dy]);
                if !z.is_finite() || z.norm() > 10.0 {
                    break;
                }
            }
            if z.is_finite()
                && bounds.contains(&z)
                && field.eval(&z).norm() <= 1e-12
                && found.iter().all(|w| w.dist(&z) > 1e-8)
            {
                found.push(z);
            }
        }
    }
    found.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    found
}

/// Forsaken-type game `φ(x, y) = x(y − a) + ψ(x) − ψ(y)` on `|x|, |y| ≤ 3/2`,
/// `ψ(t) = t²/4 − t⁴/2 + t⁶/6`.
pub fn forsaken_field(a: f64) -> Result<ProblemSpec> {
    if !a.is_finite() {
        return Err(Error::param("forsaken parameter must be finite"));
    }
    let mut field = VectorField::new(2, move |z, out| {
        let (x, y) = (z[0], z[1]);
        out[0] = y - a + forsaken_dpsi(x);
        out[1] = -x + forsaken_dpsi(y);
    });
    let r = FORSAKEN_BOX_RADIUS;
    let bounds = BoxBounds::symmetric(2, r);
    // ψ'' ranges over [ψ''(√0.6), ψ''(r)]; the norm is convex in (p, q), so
    // its maximum over the box sits at a vertex.
    let (pmin, pmax) = (forsaken_ddpsi(0.6f64.sqrt()), forsaken_ddpsi(r));
    let lipschitz = [(pmin, pmin), (pmin, pmax), (pmax, pmin), (pmax, pmax)]
        .into_iter()
        .map(|(p, q)| forsaken_jacobian_norm(p, q))
        .fold(0.0, f64::max);
    field.lipschitz = Some(lipschitz);
    field.domain_box = Some(bounds.clone());
    field.zeros = newton_zeros(&field, &bounds);
    Ok(ProblemSpec::from_field("forsaken", field, ResolventMap::Box(bounds)))
}

pub fn forsaken() -> ProblemSpec {
    forsaken_field(FORSAKEN_A).expect("finite preset")
}

pub fn lne_forsaken() -> ProblemSpec {
    let mut p = forsaken_field(LNE_FORSAKEN_A).expect("finite preset");
    p.name = "lne-forsaken".into();
    p
}

pub fn polar_game() -> ProblemSpec {
    polar_game_field(POLAR_DEFAULT_A).expect("finite preset")
}

fn uniform_in(rng: &mut ChaCha8Rng, b: &BoxBounds) -> Point {
    Point::new(
        b.lower
            .coords()
            .iter()
            .zip(b.upper.coords())
            .map(|(l, u)| if l == u { *l } else { rng.random_range(*l..=*u) })
            .collect(),
    )
}

/// `samples` uniform points of the sampling box from a seeded stream; a
/// longer request extends a shorter one.
pub fn sample_points(spec: &ProblemSpec, samples: usize, seed: u64) -> Vec<Point> {
    let b = spec.sampling_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(|_| uniform_in(&mut rng, &b)).collect()
}

/// `samples` pairs from a seeded stream (nested in `samples`). The first point
/// is uniform in the sampling box; the second is a perturbation of it in a
/// uniform direction with a log-uniform radius between `1e-6` and `1` times
/// the box diameter, clamped to the box. Small radii expose the local
/// Jacobian norm that widely separated pairs average away.
pub fn sample_pairs(spec: &ProblemSpec, samples: usize, seed: u64) -> Vec<(Point, Point)> {
    let b = spec.sampling_box();
    let diam = b.lower.dist(&b.upper);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let z = uniform_in(&mut rng, &b);
            let dir = Point::new(
                (0..z.dim())
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect::<Vec<f64>>(),
            );
            let radius = diam * 10f64.powf(-6.0 * rng.random::<f64>());
            let scale = radius / dir.norm().max(f64::MIN_POSITIVE);
            let w = b.clamp(&z.axpy(scale, &dir));
            (z, w)
        })
        .collect()
}

/// Largest observed `‖Fz − Fz′‖ / ‖z − z′‖`; a lower bound on `L`.
pub fn estimate_lipschitz(spec: &ProblemSpec, samples: usize, seed: u64) -> Result<f64> {
    if samples < 2 {
        return Err(Error::param("estimate_lipschitz needs at least 2 samples"));
    }
    Ok(lipschitz_over_pairs(&spec.field, &sample_pairs(spec, samples, seed)))
}

pub fn lipschitz_over_pairs(field: &VectorField, pairs: &[(Point, Point)]) -> f64 {
    pairs
        .iter()
        .filter_map(|(z, w)| {
            let dz = z.dist(w);
            (dz > 0.0).then(|| field.eval(z).dist(&field.eval(w)) / dz)
        })
        .fold(0.0, f64::max)
}

/// Smallest observed `⟨Fz − Fz′, z − z′⟩ / ‖Fz − Fz′‖²`; an upper bound on `ρ`.
pub fn estimate_comonotonicity(spec: &ProblemSpec, samples: usize, seed: u64) -> Result<f64> {
    if spec.is_constrained() {
        return Err(Error::Unsupported(
            "comonotonicity estimation needs an unconstrained problem".into(),
        ));
    }
    if samples < 2 {
        return Err(Error::param("estimate_comonotonicity needs at least 2 samples"));
    }
    comonotonicity_over_pairs(&spec.field, &sample_pairs(spec, samples, seed))
}

pub fn comonotonicity_over_pairs(field: &VectorField, pairs: &[(Point, Point)]) -> Result<f64> {
    pairs
        .iter()
        .filter_map(|(z, w)| {
            let dv = &field.eval(z) - &field.eval(w);
            let n2 = dv.norm_sq();
            (n2.sqrt() >= DEGENERATE_PAIR_TOL).then(|| dv.dot(&(z - w)) / n2)
        })
        .reduce(f64::min)
        .ok_or_else(|| Error::Estimation("every sampled pair was degenerate".into()))
}

/// Smallest observed `⟨Fz, z − z*⟩ / ‖Fz‖²` (weak Minty parameter).
pub fn estimate_star_rho(spec: &ProblemSpec, samples: usize, seed: u64) -> Result<f64> {
    let z_star = spec
        .known_zero
        .as_ref()
        .ok_or_else(|| Error::Estimation("star estimate needs a known zero".into()))?;
    if spec.is_constrained() {
        return Err(Error::Unsupported("star estimate needs an unconstrained problem".into()));
    }
    star_rho_over_points(&spec.field, &sample_points(spec, samples, seed), z_star)
}

pub fn star_rho_over_points(field: &VectorField, points: &[Point], z_star: &Point) -> Result<f64> {
    points
        .iter()
        .filter_map(|z| {
            let f = field.eval(z);
            let n2 = f.norm_sq();
            (n2.sqrt() >= DEGENERATE_PAIR_TOL).then(|| f.dot(&(z - z_star)) / n2)
        })
        .reduce(f64::min)
        .ok_or_else(|| Error::Estimation("every sampled point was degenerate".into()))
}
