//! Benchmark problems: Cross-Leg Table, DeVilliers-Glasser 02 and the
//! 13-particle Lennard-Jones cluster, each built as a [`LayerGraph`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::funcgraph::{GraphBuilder, Input, LayerGraph, LayerKind};

/// Best known LJ-13 energy (centered icosahedron), reduced units.
pub const LJ13_GLOBAL_MINIMUM: f64 = -44.326801;

/// Energy margin above the global minimum that a trap start must keep.
pub const LJ_TRAP_MARGIN: f64 = 0.5;

pub const LJ_PAIR_FLOOR: f64 = 0.3;

pub const LJ_PARTICLES: usize = 13;

/// Generating parameters of the DVG02 data, also its global minimizer.
pub const DVG02_OPTIMUM: [f64; 5] = [53.81, 1.27, 3.01, 2.13, 0.507];

pub const DVG02_TERMS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemName {
    Ctl,
    Dvg02,
    Lj13,
}

impl ProblemName {
    pub const ALL: [ProblemName; 3] = [ProblemName::Ctl, ProblemName::Dvg02, ProblemName::Lj13];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemName::Ctl => "ctl",
            ProblemName::Dvg02 => "dvg02",
            ProblemName::Lj13 => "lj13",
        }
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ctl" => Ok(ProblemName::Ctl),
            "dvg02" => Ok(ProblemName::Dvg02),
            "lj13" => Ok(ProblemName::Lj13),
            other => Err(Error::UnknownProblem(other.to_string())),
        }
    }
}

/// A named objective with its graph, known minimum and starting points.
#[derive(Debug, Clone)]
pub struct BenchmarkProblem {
    pub name: ProblemName,
    pub graph: LayerGraph,
    /// Per-dimension bounds; infinite for the LJ coordinates.
    pub domain_box: Vec<(f64, f64)>,
    /// Region used for random property checks (gradient oracle etc.).
    pub sample_box: Vec<(f64, f64)>,
    /// `None` when the minimizers form a degenerate set (LJ: any rigid motion).
    pub global_minimum_location: Option<Vec<f64>>,
    pub global_minimum_value: f64,
    pub canonical_initials: Vec<Vec<f64>>,
    /// `ρ_0` used to build the cost residual.
    pub target: f64,
    /// Iterates beyond this max-norm are reported as diverged.
    pub divergence_radius: f64,
    pub pair_floor: Option<f64>,
}

impl BenchmarkProblem {
    pub fn dim(&self) -> usize {
        self.graph.variable_dim()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.graph.eval_forward(x)
    }

    pub fn check_initial(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        for (k, (&v, &(lo, hi))) in x.iter().zip(&self.domain_box).enumerate() {
            if !(v >= lo && v <= hi) {
                return Err(Error::config(
                    "initial",
                    format!("component {k} = {v} lies outside [{lo}, {hi}]"),
                ));
            }
        }
        if let Some(floor) = self.pair_floor {
            let geom = ClusterGeometry::from_flat(x, floor)?;
            geom.check_floor()?;
        }
        Ok(())
    }
}

fn uniform_box(dim: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    vec![(lo, hi); dim]
}

/// Closed-form Cross-Leg Table, written as one expression.
pub fn ctl_closed_form(x1: f64, x2: f64) -> f64 {
    let inner = (100.0 - (x1 * x1 + x2 * x2).sqrt() / PI).abs().exp() * x1.sin() * x2.sin();
    -1.0 / (inner.abs() + 1.0).powf(0.1)
}

/// Cross-Leg Table as a layer hierarchy:
///
/// ```text
/// h1 = x1² + x2²    h2 = √h1         h3 = 100 − h2/π
/// h4 = exp(|h3|)    h5 = h4·sin x1·sin x2
/// h6 = |h5| + 1     h7 = h6^0.1      f = −1/h7
/// ```
///
/// `|·|` sits in its own layer in front of `exp` and of `+1`.
pub fn ctl_problem() -> BenchmarkProblem {
    let graph = (|| -> Result<LayerGraph> {
        let mut b = GraphBuilder::new(2);
        let (x1, x2) = (Input::Var(0), Input::Var(1));
        let q1 = b.add(LayerKind::Power, &[x1], &[1.0, 2.0], "x1^2")?;
        let q2 = b.add(LayerKind::Power, &[x2], &[1.0, 2.0], "x2^2")?;
        let h1 = b.sum(&[q1, q2], "h1")?;
        let h2 = b.unary(LayerKind::Sqrt, h1, "h2")?;
        let h3 = b.add(LayerKind::Affine, &[h2], &[-1.0 / PI, 100.0], "h3")?;
        let a3 = b.unary(LayerKind::Abs, h3, "|h3|")?;
        let h4 = b.unary(LayerKind::Exp, a3, "h4")?;
        let s1 = b.unary(LayerKind::Sin, x1, "sin x1")?;
        let s2 = b.unary(LayerKind::Sin, x2, "sin x2")?;
        let h5 = b.add(LayerKind::Product, &[h4, s1, s2], &[1.0], "h5")?;
        let a5 = b.unary(LayerKind::Abs, h5, "|h5|")?;
        let h6 = b.add(LayerKind::Affine, &[a5], &[1.0, 1.0], "h6")?;
        let h7 = b.add(LayerKind::Power, &[h6], &[1.0, 0.1], "h7")?;
        b.add(LayerKind::Power, &[h7], &[-1.0, -1.0], "f")?;
        b.build()
    })()
    .expect("static CTL graph is well formed");
    BenchmarkProblem {
        name: ProblemName::Ctl,
        graph,
        domain_box: uniform_box(2, -10.0, 10.0),
        sample_box: uniform_box(2, -10.0, 10.0),
        global_minimum_location: Some(vec![0.0, 0.0]),
        global_minimum_value: -1.0,
        canonical_initials: vec![vec![-7.0, -5.0], vec![7.0, 5.0], vec![7.0, -5.0]],
        target: -1.0,
        divergence_radius: 1e3 * 10.0,
        pair_floor: None,
    }
}

#[inline]
fn dvg_t(i: usize) -> f64 {
    0.1 * i as f64
}

/// `x1·x2^t·tanh(x3·t + sin(x4·t))·cos(t·e^{x5})`, with the same operation
/// order as the graph layers.
pub fn dvg02_model(x: &[f64], t: f64) -> f64 {
    let p = if t.fract() == 0.0 {
        x[1].powi(t as i32)
    } else {
        x[1].powf(t)
    };
    let z = t * x[2] + (t * x[3]).sin();
    1.0 * x[0] * p * z.tanh() * (t * x[4].exp()).cos()
}

/// `y_i` generated from [`DVG02_OPTIMUM`].
pub fn dvg02_data(i: usize) -> f64 {
    dvg02_model(&DVG02_OPTIMUM, dvg_t(i))
}

/// Closed-form DVG02 sum of squares.
pub fn dvg02_closed_form(x: &[f64]) -> f64 {
    (1..=DVG02_TERMS)
        .map(|i| {
            let r = dvg02_model(x, dvg_t(i)) - dvg02_data(i);
            r * r
        })
        .sum()
}

/// DeVilliers-Glasser 02. Per term `i` the model is a product layer with
/// factors `x1`, `x2^t`, `tanh(x3·t + sin(x4·t))` and `cos(t·e^{x5})`,
/// followed by the residual and its square; the objective sums the squares.
pub fn dvg02_problem() -> BenchmarkProblem {
    let graph = (|| -> Result<LayerGraph> {
        let mut b = GraphBuilder::new(5);
        let x = |k| Input::Var(k);
        let e5 = b.unary(LayerKind::Exp, x(4), "exp x5")?;
        let mut squares = Vec::with_capacity(DVG02_TERMS);
        for i in 1..=DVG02_TERMS {
            let t = dvg_t(i);
            let p = b.add(LayerKind::Power, &[x(1)], &[1.0, t], format!("x2^t[{i}]"))?;
            let s = b.add(
                LayerKind::Sin,
                &[x(3)],
                &[t, 0.0],
                format!("sin(x4 t)[{i}]"),
            )?;
            let z = b.add(
                LayerKind::Affine,
                &[x(2), s],
                &[t, 1.0, 0.0],
                format!("z[{i}]"),
            )?;
            let th = b.unary(LayerKind::Tanh, z, format!("tanh[{i}]"))?;
            let c = b.add(LayerKind::Cos, &[e5], &[t, 0.0], format!("cos[{i}]"))?;
            let m = b.add(
                LayerKind::Product,
                &[x(0), p, th, c],
                &[1.0],
                format!("model[{i}]"),
            )?;
            let r = b.add(
                LayerKind::Affine,
                &[m],
                &[1.0, -dvg02_data(i)],
                format!("residual[{i}]"),
            )?;
            squares.push(b.add(LayerKind::Power, &[r], &[1.0, 2.0], format!("sq[{i}]"))?);
        }
        b.sum(&squares, "f")?;
        b.build()
    })()
    .expect("static DVG02 graph is well formed");
    BenchmarkProblem {
        name: ProblemName::Dvg02,
        graph,
        domain_box: vec![
            (-500.0, 500.0),
            (0.1, 500.0),
            (-500.0, 500.0),
            (-500.0, 500.0),
            (-500.0, 500.0),
        ],
        sample_box: vec![
            (-60.0, 60.0),
            (0.5, 60.0),
            (-60.0, 60.0),
            (-60.0, 60.0),
            (-5.0, 5.0),
        ],
        global_minimum_location: Some(DVG02_OPTIMUM.to_vec()),
        global_minimum_value: 0.0,
        canonical_initials: vec![
            vec![50.0, 50.0, 50.0, 50.0, 1.0],
            vec![10.0; 5],
            vec![0.2; 5],
        ],
        target: 0.0,
        divergence_radius: 1e3 * 500.0,
        pair_floor: None,
    }
}

/// Positions of a Lennard-Jones cluster in reduced units (`ε = σ = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGeometry {
    pub coords: Vec<[f64; 3]>,
    pub pair_distance_floor: f64,
}

impl ClusterGeometry {
    pub fn new(coords: Vec<[f64; 3]>) -> Self {
        Self {
            coords,
            pair_distance_floor: LJ_PAIR_FLOOR,
        }
    }

    pub fn from_flat(flat: &[f64], floor: f64) -> Result<Self> {
        if !flat.len().is_multiple_of(3) {
            return Err(Error::Dimension {
                expected: 3 * (flat.len() / 3 + 1),
                got: flat.len(),
            });
        }
        Ok(Self {
            coords: flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            pair_distance_floor: floor,
        })
    }

    pub fn flat(&self) -> Vec<f64> {
        self.coords.iter().flatten().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn centroid(&self) -> [f64; 3] {
        let n = self.coords.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.coords {
            for k in 0..3 {
                c[k] += p[k] / n;
            }
        }
        c
    }

    /// Same geometry translated so the centroid sits at the origin.
    pub fn centered(&self) -> Self {
        let c = self.centroid();
        Self {
            coords: self
                .coords
                .iter()
                .map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]])
                .collect(),
            pair_distance_floor: self.pair_distance_floor,
        }
    }

    pub fn translated(&self, by: [f64; 3]) -> Self {
        Self {
            coords: self
                .coords
                .iter()
                .map(|p| [p[0] + by[0], p[1] + by[1], p[2] + by[2]])
                .collect(),
            pair_distance_floor: self.pair_distance_floor,
        }
    }

    /// Applies a row-major 3×3 matrix to every position.
    pub fn transformed(&self, m: &[[f64; 3]; 3]) -> Self {
        Self {
            coords: self
                .coords
                .iter()
                .map(|p| {
                    let mut q = [0.0; 3];
                    for (r, row) in m.iter().enumerate() {
                        q[r] = row[0] * p[0] + row[1] * p[1] + row[2] * p[2];
                    }
                    q
                })
                .collect(),
            pair_distance_floor: self.pair_distance_floor,
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coords[i], self.coords[j]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    pub fn min_pair_distance(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                m = m.min(self.distance(i, j));
            }
        }
        m
    }

    pub fn check_floor(&self) -> Result<()> {
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let d = self.distance(i, j);
                if !(d >= self.pair_distance_floor) {
                    return Err(Error::PairTooClose {
                        i,
                        j,
                        distance: d,
                        floor: self.pair_distance_floor,
                    });
                }
            }
        }
        Ok(())
    }

    /// Distances of the other particles from the particle nearest the centroid.
    pub fn shell_radii(&self) -> Vec<f64> {
        let c = self.centroid();
        let center = (0..self.len())
            .min_by(|&a, &b| {
                let da = dist3(self.coords[a], c);
                let db = dist3(self.coords[b], c);
                da.total_cmp(&db)
            })
            .unwrap_or(0);
        (0..self.len())
            .filter(|&k| k != center)
            .map(|k| self.distance(center, k))
            .collect()
    }

    /// Largest relative deviation of the shell radii from their mean.
    pub fn shell_spread(&self) -> f64 {
        let radii = self.shell_radii();
        let mean = radii.iter().sum::<f64>() / radii.len() as f64;
        radii
            .iter()
            .map(|r| (r - mean).abs() / mean)
            .fold(0.0, f64::max)
    }

    /// Centered 13-particle shape: all outer radii within `tol` of their mean.
    pub fn is_icosahedral(&self, tol: f64) -> bool {
        self.len() == LJ_PARTICLES && self.shell_spread() <= tol
    }
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[inline]
fn pair_energy(r2: f64) -> f64 {
    let s6 = 1.0 / (r2 * r2 * r2);
    4.0 * (s6 * s6 - s6)
}

/// `Σ_pairs 4[(1/r)^12 − (1/r)^6]`.
pub fn lj_energy(geom: &ClusterGeometry) -> Result<f64> {
    geom.check_floor()?;
    let mut e = 0.0;
    for i in 0..geom.len() {
        for j in i + 1..geom.len() {
            let d = geom.distance(i, j);
            e += pair_energy(d * d);
        }
    }
    Ok(e)
}

/// Energy and coordinate gradient (flat layout), computed pairwise.
pub fn lj_energy_gradient(flat: &[f64]) -> (f64, Vec<f64>) {
    let n = flat.len() / 3;
    let mut e = 0.0;
    let mut g = vec![0.0; flat.len()];
    for i in 0..n {
        for j in i + 1..n {
            let d = [
                flat[3 * i] - flat[3 * j],
                flat[3 * i + 1] - flat[3 * j + 1],
                flat[3 * i + 2] - flat[3 * j + 2],
            ];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let s6 = 1.0 / (r2 * r2 * r2);
            e += 4.0 * (s6 * s6 - s6);
            // (dV/dr)/r
            let f = (-48.0 * s6 * s6 + 24.0 * s6) / r2;
            for k in 0..3 {
                g[3 * i + k] += f * d[k];
                g[3 * j + k] -= f * d[k];
            }
        }
    }
    (e, g)
}

/// Outcome of a gradient-descent relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct Relaxed {
    pub geometry: ClusterGeometry,
    pub energy: f64,
    pub grad_norm: f64,
    pub steps: usize,
}

/// Gradient descent on the LJ energy until `‖∇E‖ < grad_tol`.
///
/// The step is halved whenever a trial step raises the energy and grown by
/// 5% after each accepted one. Once energy differences sink below roundoff a
/// step is accepted if it lowers the gradient norm instead.
pub fn relax_gd(geom: &ClusterGeometry, grad_tol: f64, max_steps: usize) -> Result<Relaxed> {
    let mut x = geom.flat();
    let (mut e, mut g) = lj_energy_gradient(&x);
    let mut step = 1e-3;
    let mut trial = vec![0.0; x.len()];
    for n in 0..max_steps {
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !gn.is_finite() {
            return Err(Error::NonFiniteValue {
                what: "LJ gradient",
            });
        }
        if gn < grad_tol {
            return Ok(Relaxed {
                geometry: ClusterGeometry::from_flat(&x, geom.pair_distance_floor)?,
                energy: e,
                grad_norm: gn,
                steps: n,
            });
        }
        loop {
            for ((t, v), d) in trial.iter_mut().zip(&x).zip(&g) {
                *t = v - step * d;
            }
            let (et, gt) = lj_energy_gradient(&trial);
            // below roundoff in the energy, fall back to the gradient norm
            let band = 16.0 * f64::EPSILON * e.abs();
            let accept = if (et - e).abs() <= band {
                gt.iter().map(|v| v * v).sum::<f64>().sqrt() < gn
            } else {
                et < e
            };
            if accept {
                x.copy_from_slice(&trial);
                e = et;
                g = gt;
                step = (step * 1.05).min(5e-2);
                break;
            }
            step *= 0.5;
            if step < 1e-16 {
                // at the floating-point floor of the energy
                let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                return Err(Error::RelaxationFailed {
                    steps: n,
                    grad_norm: gn,
                });
            }
        }
    }
    let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    Err(Error::RelaxationFailed {
        steps: max_steps,
        grad_norm: gn,
    })
}

/// Center particle plus the 12 vertices of a regular icosahedron at `radius_scale`.
pub fn icosahedron_coords(radius_scale: f64) -> ClusterGeometry {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let norm = (1.0 + phi * phi).sqrt();
    let s = radius_scale / norm;
    let mut coords = vec![[0.0; 3]];
    for a in [-1.0, 1.0] {
        for b in [-1.0, 1.0] {
            coords.push([0.0, a * s, b * phi * s]);
            coords.push([a * s, b * phi * s, 0.0]);
            coords.push([b * phi * s, 0.0, a * s]);
        }
    }
    ClusterGeometry::new(coords)
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while (hi - lo).abs() > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Shell radius minimizing the energy of the rigid icosahedron, found by a
/// coarse scan followed by golden-section refinement.
pub fn optimal_icosahedron_scale() -> (f64, f64) {
    let energy = |s: f64| lj_energy(&icosahedron_coords(s)).unwrap_or(f64::INFINITY);
    let grid: Vec<f64> = (0..=80).map(|k| 0.8 + 0.01 * k as f64).collect();
    let best = grid
        .iter()
        .copied()
        .min_by(|a, b| energy(*a).total_cmp(&energy(*b)))
        .unwrap();
    let s = golden_section(energy, best - 0.01, best + 0.01, 1e-12);
    (s, energy(s))
}

/// Fully relaxed icosahedron; its energy is the in-repo reference for the
/// LJ-13 global minimum.
pub fn relaxed_icosahedron() -> Result<Relaxed> {
    let (s, _) = optimal_icosahedron_scale();
    relax_gd(&icosahedron_coords(s), 1e-10, 200_000)
}

/// A seeded, non-icosahedral local minimum of LJ-13.
///
/// Thirteen particles are placed uniformly in a ball with a minimum
/// separation, relaxed by gradient descent to `‖∇E‖ < 1e-8`, centered, and
/// rejected if the energy falls within [`LJ_TRAP_MARGIN`] of the global
/// minimum.
pub fn lj_local_minimum_init(seed: u64) -> Result<ClusterGeometry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = 1.6;
    let min_sep = 0.9;
    let mut coords: Vec<[f64; 3]> = Vec::with_capacity(LJ_PARTICLES);
    while coords.len() < LJ_PARTICLES {
        let p = [
            rng.gen_range(-radius..radius),
            rng.gen_range(-radius..radius),
            rng.gen_range(-radius..radius),
        ];
        if dist3(p, [0.0; 3]) > radius {
            continue;
        }
        if coords.iter().all(|q| dist3(p, *q) >= min_sep) {
            coords.push(p);
        }
    }
    let relaxed = relax_gd(&ClusterGeometry::new(coords), 1e-8, 2_000_000)?;
    if relaxed.energy <= LJ13_GLOBAL_MINIMUM + LJ_TRAP_MARGIN {
        return Err(Error::GlobalBasin {
            seed,
            energy: relaxed.energy,
        });
    }
    Ok(relaxed.geometry.centered())
}

/// First seed at or after `start` that yields a trap start, with its geometry.
pub fn find_lj_local_minimum(start: u64, attempts: u64) -> Result<(u64, ClusterGeometry)> {
    let mut last = None;
    for seed in start..start + attempts {
        match lj_local_minimum_init(seed) {
            Ok(g) => return Ok((seed, g)),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or(Error::RelaxationFailed {
        steps: 0,
        grad_norm: f64::NAN,
    }))
}

/// LJ-13 energy as a layer hierarchy over the 39 coordinates.
///
/// Per pair: three coordinate differences, their squares, `r² = Σ`, `r = √r²`,
/// then the pair energy as the product of the factors `4(1/r)^6` and
/// `(1/r)^6 − 1`. The objective sums the 78 pair energies.
pub fn lj13_problem(init: &ClusterGeometry) -> Result<BenchmarkProblem> {
    if init.len() != LJ_PARTICLES {
        return Err(Error::Dimension {
            expected: LJ_PARTICLES,
            got: init.len(),
        });
    }
    let n = LJ_PARTICLES;
    let mut b = GraphBuilder::new(3 * n);
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let mut sq = [Input::Var(0); 3];
            for (k, slot) in sq.iter_mut().enumerate() {
                let d = b.add(
                    LayerKind::Affine,
                    &[Input::Var(3 * i + k), Input::Var(3 * j + k)],
                    &[1.0, -1.0, 0.0],
                    format!("d{k}({i},{j})"),
                )?;
                *slot = b.add(
                    LayerKind::Power,
                    &[d],
                    &[1.0, 2.0],
                    format!("d{k}^2({i},{j})"),
                )?;
            }
            let r2 = b.sum(&sq, format!("r^2({i},{j})"))?;
            let r = b.unary(LayerKind::Sqrt, r2, format!("r({i},{j})"))?;
            let att = b.add(
                LayerKind::Power,
                &[r],
                &[4.0, -6.0],
                format!("4r^-6({i},{j})"),
            )?;
            let s6 = b.add(
                LayerKind::Power,
                &[r],
                &[1.0, -6.0],
                format!("r^-6({i},{j})"),
            )?;
            let rep = b.add(
                LayerKind::Affine,
                &[s6],
                &[1.0, -1.0],
                format!("r^-6-1({i},{j})"),
            )?;
            pairs.push(b.add(
                LayerKind::Product,
                &[att, rep],
                &[1.0],
                format!("E({i},{j})"),
            )?);
        }
    }
    b.sum(&pairs, "E")?;
    let graph = b.build()?;
    let x0 = init.flat();
    Ok(BenchmarkProblem {
        name: ProblemName::Lj13,
        graph,
        domain_box: uniform_box(3 * n, f64::NEG_INFINITY, f64::INFINITY),
        sample_box: uniform_box(3 * n, -1.5, 1.5),
        global_minimum_location: None,
        global_minimum_value: LJ13_GLOBAL_MINIMUM,
        canonical_initials: vec![x0],
        target: LJ13_GLOBAL_MINIMUM,
        divergence_radius: 1e3 * 3.0,
        pair_floor: Some(init.pair_distance_floor),
    })
}

/// Problem by name; `lj_seed` picks the LJ trap start (first valid seed at or after it).
pub fn problem_by_name(name: ProblemName, lj_seed: u64) -> Result<BenchmarkProblem> {
    match name {
        ProblemName::Ctl => Ok(ctl_problem()),
        ProblemName::Dvg02 => Ok(dvg02_problem()),
        ProblemName::Lj13 => {
            let (_, geom) = find_lj_local_minimum(lj_seed, 64)?;
            lj13_problem(&geom)
        }
    }
}

/// Uniform random point in a box, rejecting points where `accept` fails.
pub fn sample_point<R: Rng>(
    rng: &mut R,
    bounds: &[(f64, f64)],
    accept: impl Fn(&[f64]) -> bool,
) -> Vec<f64> {
    loop {
        let p: Vec<f64> = bounds
            .iter()
            .map(|&(lo, hi)| rng.gen_range(lo..hi))
            .collect();
        if accept(&p) {
            return p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ctl_value_at_origin() {
        let p = ctl_problem();
        assert_eq!(p.eval(&[0.0, 0.0]).unwrap(), -1.0);
        let acts = p.graph.eval_with_activations(&[0.0, 0.0]).unwrap();
        let h5 = p
            .graph
            .layers()
            .iter()
            .position(|l| l.label == "h5")
            .unwrap();
        assert_eq!(acts.layer(h5), Some(0.0));
    }

    #[test]
    fn ctl_matches_closed_form_at_seven_five() {
        let p = ctl_problem();
        let g = p.eval(&[7.0, 5.0]).unwrap();
        let c = ctl_closed_form(7.0, 5.0);
        assert!(((g - c) / c).abs() < 1e-12);
    }

    #[test]
    fn dvg02_vanishes_at_optimum() {
        let p = dvg02_problem();
        assert!(p.eval(&DVG02_OPTIMUM).unwrap().abs() <= 1e-18);
        let acts = p.graph.eval_with_activations(&DVG02_OPTIMUM).unwrap();
        for (id, layer) in p.graph.layers().iter().enumerate() {
            if layer.label.starts_with("residual") {
                assert_eq!(acts.layer(id), Some(0.0), "{}", layer.label);
            }
        }
    }

    #[test]
    fn dvg02_first_data_point() {
        let y1 = 53.81
            * 1.27_f64.powf(0.1)
            * (0.301_f64 + 0.213_f64.sin()).tanh()
            * (0.1 * 0.507_f64.exp()).cos();
        assert!((dvg02_data(1) - y1).abs() < 1e-12 * y1.abs());
    }

    #[test]
    fn dvg02_power_layer_partial() {
        let p = dvg02_problem();
        let id = p
            .graph
            .layers()
            .iter()
            .position(|l| l.label == "x2^t[1]")
            .unwrap();
        let d = p.graph.partial_wrt_input(id, 0, &DVG02_OPTIMUM).unwrap();
        assert!((d - 0.1 * 1.27_f64.powf(-0.9)).abs() < 1e-15);
    }

    #[test]
    fn lj_pair_examples() {
        let two = |r: f64| ClusterGeometry::new(vec![[0.0; 3], [r, 0.0, 0.0]]);
        assert!((lj_energy(&two(2f64.powf(1.0 / 6.0))).unwrap() + 1.0).abs() < 1e-14);
        assert_eq!(lj_energy(&two(1.0)).unwrap(), 0.0);
        assert!(matches!(
            lj_energy(&two(0.1)),
            Err(Error::PairTooClose { i: 0, j: 1, .. })
        ));
    }

    #[test]
    fn icosahedron_shell_is_equidistant() {
        let g = icosahedron_coords(1.1);
        assert_eq!(g.len(), 13);
        for p in &g.coords[1..] {
            assert!((dist3(*p, [0.0; 3]) - 1.1).abs() < 1e-12);
        }
        assert!(g.is_icosahedral(1e-12));
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let m = golden_section(|x| (x - 0.3) * (x - 0.3), -1.0, 1.0, 1e-10);
        assert!((m - 0.3).abs() < 1e-8);
    }

    #[test]
    fn problem_names_round_trip() {
        for name in ProblemName::ALL {
            assert_eq!(name.as_str().parse::<ProblemName>().unwrap(), name);
        }
        assert!(matches!(
            "rosenbrock".parse::<ProblemName>(),
            Err(Error::UnknownProblem(_))
        ));
    }

    #[test]
    fn canonical_initials_lie_in_domain() {
        for p in [ctl_problem(), dvg02_problem()] {
            for x in &p.canonical_initials {
                p.check_initial(x).unwrap();
            }
        }
        assert!(ctl_problem().check_initial(&[11.0, 0.0]).is_err());
    }
}
