//! Synthetic checks of the Lipschitz bound on the optimal cross-modal map.
//!
//! Each instance fixes points `x_i` on the unit sphere, a map `g*` whose
//! images are known exactly, and observed text points `y_i` obtained by
//! rotating `g*(x_i)` by a bounded angle. Every quantity in the bound is then
//! computable: `GW_inf` by exhaustive search, `rho*` over the support of the
//! optimal permutation, and the empirical Lipschitz ratio over all pairs.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::gw::gw_infinity;
use crate::linear_ot::BRUTE_FORCE_LIMIT;
use crate::mmspace::{angular_distance, pairwise_distances_rows, DistanceMatrix};
use crate::report::num;
use crate::rng::SplitMix64;
use crate::synthetic::{gaussian_matrix, orthonormal_columns};

/// Absolute slack allowed for rounding along the triangle-inequality chain.
pub const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    pub x_points: Array2<f64>,
    pub y_points: Array2<f64>,
    pub gstar_images: Array2<f64>,
    pub noise: f64,
    pub seed: u64,
}

impl SynthInstance {
    pub fn n(&self) -> usize {
        self.x_points.nrows()
    }

    pub fn x_distances(&self) -> Result<DistanceMatrix> {
        pairwise_distances_rows(self.x_points.view(), "x")
    }

    pub fn y_distances(&self) -> Result<DistanceMatrix> {
        pairwise_distances_rows(self.y_points.view(), "y")
    }

    pub fn gstar_distances(&self) -> Result<DistanceMatrix> {
        pairwise_distances_rows(self.gstar_images.view(), "gstar")
    }

    /// `d_Y(g*(x_i), y_i)` for each `i`.
    pub fn point_errors(&self) -> Result<Vec<f64>> {
        (0..self.n())
            .map(|i| angular_distance(self.gstar_images.row(i), self.y_points.row(i)))
            .collect()
    }
}

fn normalize_rows(m: &mut Array2<f64>) -> Result<()> {
    for (i, mut row) in m.rows_mut().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::DegenerateVector(format!("row {i} has zero norm")));
        }
        row /= norm;
    }
    Ok(())
}

fn check_params(n: usize, d_x: usize, d_y: usize, noise: f64) -> Result<()> {
    if !(2..=BRUTE_FORCE_LIMIT).contains(&n) {
        return Err(Error::Guard {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if d_x == 0 || d_y < 2 {
        return Err(Error::Parameter(format!(
            "need d_x >= 1 and d_y >= 2, got {d_x} and {d_y}"
        )));
    }
    if !(noise >= 0.0 && noise <= std::f64::consts::PI) {
        return Err(Error::Parameter(format!("noise {noise} outside [0, pi]")));
    }
    Ok(())
}

/// Instance with `g*(x) = W x / |W x|` for a Gaussian `W`.
pub fn synth_instance(n: usize, d_x: usize, d_y: usize, noise: f64, seed: u64) -> Result<SynthInstance> {
    check_params(n, d_x, d_y, noise)?;
    let mut rng = SplitMix64::new(seed);
    let x = sphere_points(n, d_x, &mut rng)?;
    let w = gaussian_matrix(d_y, d_x, &mut rng);
    build(x, &w, noise, seed, &mut rng)
}

/// Instance whose `g*` is a linear isometry (orthonormal columns), so
/// `d_Y(g*(x), g*(x')) = d_X(x, x')` up to rounding. Requires `d_y >= d_x`.
pub fn synth_isometric_instance(
    n: usize,
    d_x: usize,
    d_y: usize,
    noise: f64,
    seed: u64,
) -> Result<SynthInstance> {
    check_params(n, d_x, d_y, noise)?;
    if d_y < d_x {
        return Err(Error::Parameter(format!(
            "an isometry needs d_y >= d_x, got {d_y} < {d_x}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let x = sphere_points(n, d_x, &mut rng)?;
    let w = orthonormal_columns(d_y, d_x, &mut rng);
    build(x, &w, noise, seed, &mut rng)
}

fn sphere_points(n: usize, d: usize, rng: &mut SplitMix64) -> Result<Array2<f64>> {
    let mut x = gaussian_matrix(n, d, rng);
    normalize_rows(&mut x)?;
    Ok(x)
}

/// Images under `w`, then each `y_i` is `g*(x_i)` moved along a random
/// tangent direction by `noise * u_i`, `u_i` uniform in `[0, 1)`. All random
/// draws happen whatever the noise level, so instances sharing a seed differ
/// only in the rotation angles.
fn build(
    x: Array2<f64>,
    w: &Array2<f64>,
    noise: f64,
    seed: u64,
    rng: &mut SplitMix64,
) -> Result<SynthInstance> {
    let mut gstar = x.dot(&w.t());
    normalize_rows(&mut gstar)?;
    let (n, d_y) = gstar.dim();
    let mut y = gstar.clone();
    for i in 0..n {
        let g = gstar.row(i);
        let raw: Array1<f64> = (0..d_y).map(|_| rng.sample(StandardNormal)).collect();
        let frac: f64 = rng.random();
        let mut t = &raw - &(&g * raw.dot(&g));
        let tn = t.dot(&t).sqrt();
        if !(tn > 0.0) {
            return Err(Error::DegenerateVector(format!("tangent direction {i} vanished")));
        }
        t /= tn;
        let theta = noise * frac;
        let rotated = &g * theta.cos() + &t * theta.sin();
        y.row_mut(i).assign(&rotated);
    }
    Ok(SynthInstance {
        x_points: x,
        y_points: y,
        gstar_images: gstar,
        noise,
        seed,
    })
}

/// Largest `d_Y(g*(x_i), y_j)` over `(i, j)` in `support`.
pub fn rho_star(inst: &SynthInstance, support: &[(usize, usize)]) -> Result<f64> {
    if support.is_empty() {
        return Err(Error::InvalidInput("empty coupling support".into()));
    }
    let n = inst.n();
    let mut worst = 0.0f64;
    for &(i, j) in support {
        if i >= n || j >= n {
            return Err(Error::InvalidInput(format!(
                "support pair ({i}, {j}) out of range for n = {n}"
            )));
        }
        worst = worst.max(angular_distance(
            inst.gstar_images.row(i),
            inst.y_points.row(j),
        )?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCheck {
    pub holds: bool,
    /// `min_{i,k} (GW_inf + 2 rho* - |d_Y(g*x_i, g*x_k) - d_X(x_i, x_k)|)`.
    pub slack: f64,
    pub gw_inf: f64,
    pub rho_star: f64,
}

/// Quantities shared by both checks: `GW_inf` between the x and y spaces and
/// `rho*` over the support of the optimal permutation.
fn bottleneck_parts(inst: &SynthInstance) -> Result<(DistanceMatrix, DistanceMatrix, f64, f64)> {
    let dx = inst.x_distances()?;
    let dy = inst.y_distances()?;
    let (gw_inf, perm) = gw_infinity(&dx, &dy)?;
    let support: Vec<(usize, usize)> = perm.as_slice().iter().copied().enumerate().collect();
    let rho = rho_star(inst, &support)?;
    Ok((dx, inst.gstar_distances()?, gw_inf, rho))
}

pub fn verify_lemma1(inst: &SynthInstance) -> Result<LemmaCheck> {
    let (dx, dg, gw_inf, rho) = bottleneck_parts(inst)?;
    Ok(lemma_from_parts(&dx, &dg, gw_inf, rho))
}

fn lemma_from_parts(dx: &DistanceMatrix, dg: &DistanceMatrix, gw_inf: f64, rho: f64) -> LemmaCheck {
    let n = dx.len();
    let budget = gw_inf + 2.0 * rho;
    let mut slack = f64::INFINITY;
    for i in 0..n {
        for k in 0..n {
            let distortion = (dg.get(i, k) - dx.get(i, k)).abs();
            slack = slack.min(budget - distortion);
        }
    }
    LemmaCheck {
        holds: slack >= -CHECK_TOL,
        slack,
        gw_inf,
        rho_star: rho,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremCheckResult {
    #[serde(serialize_with = "num")]
    pub gw_inf: f64,
    #[serde(serialize_with = "num")]
    pub rho_star: f64,
    #[serde(serialize_with = "num")]
    pub r_min: f64,
    #[serde(serialize_with = "num")]
    pub lipschitz_empirical: f64,
    #[serde(serialize_with = "num")]
    pub bound: f64,
    pub holds: bool,
}

pub fn verify_theorem1(inst: &SynthInstance) -> Result<TheoremCheckResult> {
    let (dx, dg, gw_inf, rho) = bottleneck_parts(inst)?;
    theorem_from_parts(&dx, &dg, gw_inf, rho)
}

fn theorem_from_parts(
    dx: &DistanceMatrix,
    dg: &DistanceMatrix,
    gw_inf: f64,
    rho: f64,
) -> Result<TheoremCheckResult> {
    let (r_min, lipschitz) = lipschitz_ratio(dx.values(), dg.values());
    if !(r_min > 0.0) {
        return Err(Error::Degenerate(
            "coincident x points: minimum separation is zero".into(),
        ));
    }
    let bound = 1.0 + (2.0 * rho + gw_inf) / r_min;
    Ok(TheoremCheckResult {
        gw_inf,
        rho_star: rho,
        r_min,
        lipschitz_empirical: lipschitz,
        bound,
        holds: lipschitz <= bound + CHECK_TOL,
    })
}

/// `(min_{i<k} a_ik, max_{i<k} b_ik / a_ik)`.
fn lipschitz_ratio(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> (f64, f64) {
    let n = a.nrows();
    let mut r_min = f64::INFINITY;
    let mut ratio = 0.0f64;
    for i in 0..n {
        for k in (i + 1)..n {
            r_min = r_min.min(a[[i, k]]);
            ratio = ratio.max(b[[i, k]] / a[[i, k]]);
        }
    }
    (r_min, ratio)
}

/// One row of a sweep report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub seed: u64,
    pub n: usize,
    #[serde(serialize_with = "num")]
    pub noise: f64,
    #[serde(serialize_with = "num")]
    pub gw_inf: f64,
    #[serde(serialize_with = "num")]
    pub rho_star: f64,
    #[serde(serialize_with = "num")]
    pub r_min: f64,
    #[serde(serialize_with = "num")]
    pub lipschitz: f64,
    #[serde(serialize_with = "num")]
    pub bound: f64,
    /// `bound - lipschitz`.
    #[serde(serialize_with = "num")]
    pub slack: f64,
    #[serde(serialize_with = "num")]
    pub lemma_slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub seed: u64,
    pub instances: usize,
    pub violations: usize,
    /// Index of the record with the smallest theorem slack.
    pub tightest: usize,
    /// Index of the record with the smallest lemma slack.
    pub tightest_lemma: usize,
    pub records: Vec<SweepRecord>,
}

pub const SWEEP_N: std::ops::RangeInclusive<usize> = 4..=8;
pub const SWEEP_MAX_NOISE: f64 = 0.3;
pub const SWEEP_DX: usize = 6;
pub const SWEEP_DY: usize = 5;

/// `(n, noise, instance seed)` of the `index`-th sweep instance.
pub fn sweep_params(seed: u64, index: usize) -> (usize, f64, u64) {
    let mut rng = SplitMix64::derive(seed, index as u64);
    let span = (SWEEP_N.end() - SWEEP_N.start() + 1) as u64;
    let n = SWEEP_N.start() + rng.below(span) as usize;
    let noise = SWEEP_MAX_NOISE * rng.random::<f64>();
    (n, noise, rng.next())
}

pub fn check_instance(inst: &SynthInstance) -> Result<SweepRecord> {
    let (dx, dg, gw_inf, rho) = bottleneck_parts(inst)?;
    let lemma = lemma_from_parts(&dx, &dg, gw_inf, rho);
    let theorem = theorem_from_parts(&dx, &dg, gw_inf, rho)?;
    Ok(SweepRecord {
        seed: inst.seed,
        n: inst.n(),
        noise: inst.noise,
        gw_inf,
        rho_star: rho,
        r_min: theorem.r_min,
        lipschitz: theorem.lipschitz_empirical,
        bound: theorem.bound,
        slack: theorem.bound - theorem.lipschitz_empirical,
        lemma_slack: lemma.slack,
        holds: theorem.holds && lemma.holds,
    })
}

/// Runs both checks on `instances` seeded random instances.
pub fn theory_sweep(instances: usize, seed: u64) -> Result<SweepReport> {
    if instances == 0 {
        return Err(Error::Parameter("sweep needs at least one instance".into()));
    }
    let records = exec::map_indexed(instances, |idx| {
        let (n, noise, inst_seed) = sweep_params(seed, idx);
        check_instance(&synth_instance(n, SWEEP_DX, SWEEP_DY, noise, inst_seed)?)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let argmin = |key: fn(&SweepRecord) -> f64| {
        (0..records.len())
            .min_by(|&a, &b| key(&records[a]).total_cmp(&key(&records[b])))
            .unwrap_or(0)
    };
    Ok(SweepReport {
        seed,
        instances,
        violations: records.iter().filter(|r| !r.holds).count(),
        tightest: argmin(|r| r.slack),
        tightest_lemma: argmin(|r| r.lemma_slack),
        records,
    })
}

/// Largest angular row error between two point sets of equal shape.
pub fn max_row_angle(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for (ra, rb) in a.rows().into_iter().zip(b.rows()) {
        worst = worst.max(angular_distance(ra, rb)?);
    }
    Ok(worst)
}
