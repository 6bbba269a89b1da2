//! GMoM-HC: hard clustering with continuously updated GMoM estimates of
//! (μ, κ, α) and assignment by the per-cluster quadratic distance.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::edm::{kernels, FamilyClass, FamilySpec};
use crate::error::{Error, Result};
use crate::numopt::{minimize_box, Box, BoxOptions};
use crate::soft::{MixtureParams, Mode, MU_FLOOR};

pub const KAPPA_MIN: f64 = 1e-9;
pub const KAPPA_MAX: f64 = 1e9;
/// Relative ridge added to each residual matrix before inversion.
pub const RIDGE: f64 = 1e-8;

/// Second moment condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentForm {
    /// (x − μ)² − κυ(μ), zero in expectation.
    #[default]
    Centered,
    /// x² − κυ(μ) as literally written.
    Raw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GmomConfig {
    pub max_iter: usize,
    pub seed: u64,
    /// Means fixed at the cluster averages, diagonal weights.
    pub light: bool,
    pub form: MomentForm,
    /// `Map` adds `prior_weight` pseudo-samples at each k-means++ seed.
    pub mode: Mode,
    pub prior_weight: f64,
    /// Projected-gradient tolerance for the λ fit.
    pub gtol: f64,
    /// Run the k-means++ seeding on z-scored columns.
    pub standardize_seeding: bool,
}

impl Default for GmomConfig {
    fn default() -> Self {
        GmomConfig {
            max_iter: 1000,
            seed: 0,
            light: false,
            form: MomentForm::Centered,
            mode: Mode::Map,
            prior_weight: 1.0,
            gtol: 1e-9,
            standardize_seeding: true,
        }
    }
}

/// Averaged moment residuals and weight matrix of one (cluster, attribute).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBlock {
    pub mbar: [f64; 2],
    pub w: [[f64; 2]; 2],
}

impl MomentBlock {
    pub fn quadratic(&self, m: [f64; 2]) -> f64 {
        m[0] * (self.w[0][0] * m[0] + self.w[0][1] * m[1]) + m[1] * (self.w[1][0] * m[0] + self.w[1][1] * m[1])
    }

    pub fn objective(&self) -> f64 {
        self.quadratic(self.mbar)
    }
}

#[derive(Debug, Clone)]
pub struct GmomResult {
    pub assign: Vec<usize>,
    pub params: MixtureParams,
    /// CUGMoM objective after each λ fit.
    pub trace: Vec<f64>,
    pub objective: f64,
    /// Within-cluster sum of squared Euclidean distances.
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[inline]
fn upsilon_dmu(class: FamilyClass, mu: f64, alpha: f64) -> f64 {
    match class {
        FamilyClass::MorrisCount => 1.0 + 2.0 * alpha * mu,
        FamilyClass::MorrisReal => 2.0 * alpha * mu,
        FamilyClass::Tweedie => {
            if (alpha - 2.0).abs() < kernels::BRANCH_TOL {
                0.0
            } else {
                (2.0 - alpha) * mu.powf(1.0 - alpha)
            }
        }
    }
}

/// m(x) for one attribute.
pub fn moment_vector(x: f64, mu: f64, kappa: f64, alpha: f64, family: &FamilySpec, form: MomentForm) -> Result<[f64; 2]> {
    if !family.in_mean_domain(mu) || !family.contains_alpha(alpha) || !(kappa > 0.0) {
        return Err(Error::domain(format!("moment parameters mu {mu}, kappa {kappa}, alpha {alpha}")));
    }
    let c = kappa * kernels::variance(family.class, mu, alpha);
    let e = x - mu;
    Ok(match form {
        MomentForm::Centered => [e, e * e - c],
        MomentForm::Raw => [e, x * x - c],
    })
}

/// Weighted power sums of one (cluster, attribute) about a shift point.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: f64,
    shift: f64,
    /// Averages of (x − shift)^k, k = 1..4.
    p: [f64; 4],
}

impl Sums {
    fn from_points(points: impl Iterator<Item = (f64, f64)> + Clone) -> Sums {
        let (mut n, mut sx) = (0.0, 0.0);
        for (x, w) in points.clone() {
            n += w;
            sx += w * x;
        }
        if n <= 0.0 {
            return Sums::default();
        }
        let shift = sx / n;
        let mut p = [0.0; 4];
        for (x, w) in points {
            let d = x - shift;
            let d2 = d * d;
            p[0] += w * d;
            p[1] += w * d2;
            p[2] += w * d2 * d;
            p[3] += w * d2 * d2;
        }
        p.iter_mut().for_each(|v| *v /= n);
        Sums { n, shift, p }
    }

    fn mean(&self) -> f64 {
        self.shift + self.p[0]
    }

    /// Central moments E(x − μ)^k for k = 1..4.
    fn about(&self, mu: f64) -> [f64; 4] {
        let d = mu - self.shift;
        let [p1, p2, p3, p4] = self.p;
        let d2 = d * d;
        [
            p1 - d,
            p2 - 2.0 * d * p1 + d2,
            p3 - 3.0 * d * p2 + 3.0 * d2 * p1 - d2 * d,
            p4 - 4.0 * d * p3 + 6.0 * d2 * p2 - 4.0 * d2 * d * p1 + d2 * d2,
        ]
    }
}

/// Residual means and residual second-moment matrix for a block.
struct Residuals {
    mbar: [f64; 2],
    s: [f64; 3],
    /// ∂/∂μ at fixed c, then ∂/∂c at fixed μ, of (mbar, s).
    dmu: Option<([f64; 2], [f64; 3])>,
    dc: Option<([f64; 2], [f64; 3])>,
}

fn residuals(sums: &Sums, mu: f64, c: f64, form: MomentForm, grad: bool) -> Residuals {
    let [m1, m2, m3, m4] = sums.about(mu);
    match form {
        MomentForm::Centered => {
            let mbar = [m1, m2 - c];
            let s = [m2, m3 - c * m1, m4 - 2.0 * c * m2 + c * c];
            let (dmu, dc) = if grad {
                (
                    Some(([-1.0, -2.0 * m1], [-2.0 * m1, -3.0 * m2 + c, -4.0 * m3 + 4.0 * c * m1]))
                    ,
                    Some(([0.0, -1.0], [0.0, -m1, -2.0 * m2 + 2.0 * c])),
                )
            } else {
                (None, None)
            };
            Residuals { mbar, s, dmu, dc }
        }
        MomentForm::Raw => {
            // g = x² − c = e² + 2μe + r with r = μ² − c
            let r = mu * mu - c;
            let mbar = [m1, m2 + 2.0 * mu * m1 + r];
            let s = [
                m2,
                m3 + 2.0 * mu * m2 + r * m1,
                m4 + 4.0 * mu * m3 + (4.0 * mu * mu + 2.0 * r) * m2 + 4.0 * mu * r * m1 + r * r,
            ];
            Residuals {
                mbar,
                s,
                dmu: None,
                dc: None,
            }
        }
    }
}

/// q = m̄ᵀ(S + ridge·I)⁻¹m̄ (or with the diagonal of S only) and its
/// derivative along the perturbation (dm̄, dS).
fn quad_form(mbar: [f64; 2], s: [f64; 3], diag: bool) -> Option<(f64, [[f64; 2]; 2])> {
    let trace = s[0] + s[2];
    if !(trace > 0.0) || !trace.is_finite() {
        return None;
    }
    let ridge = RIDGE * trace / 2.0;
    let (a11, a12, a22) = (s[0] + ridge, s[1], s[2] + ridge);
    let w = if diag {
        [[1.0 / a11, 0.0], [0.0, 1.0 / a22]]
    } else {
        let det = a11 * a22 - a12 * a12;
        if !(det > 0.0) {
            return None;
        }
        [[a22 / det, -a12 / det], [-a12 / det, a11 / det]]
    };
    let q = MomentBlock { mbar, w }.objective();
    Some((q, w))
}

fn quad_grad(mbar: [f64; 2], w: [[f64; 2]; 2], dm: [f64; 2], ds: [f64; 3], diag: bool) -> f64 {
    let v = [
        w[0][0] * mbar[0] + w[0][1] * mbar[1],
        w[1][0] * mbar[0] + w[1][1] * mbar[1],
    ];
    let dr = RIDGE * (ds[0] + ds[2]) / 2.0;
    let da11 = ds[0] + dr;
    let da22 = ds[2] + dr;
    let da12 = if diag { 0.0 } else { ds[1] };
    2.0 * (v[0] * dm[0] + v[1] * dm[1]) - (v[0] * v[0] * da11 + 2.0 * v[0] * v[1] * da12 + v[1] * v[1] * da22)
}

/// Block objective and, optionally, (∂/∂μ, ∂/∂c).
fn block_eval(sums: &Sums, mu: f64, c: f64, form: MomentForm, diag: bool, grad: bool) -> Option<(f64, f64, f64)> {
    let res = residuals(sums, mu, c, form, grad);
    let (q, w) = quad_form(res.mbar, res.s, diag)?;
    if !grad {
        return Some((q, 0.0, 0.0));
    }
    let (dm_mu, ds_mu) = res.dmu.unwrap();
    let (dm_c, ds_c) = res.dc.unwrap();
    Some((
        q,
        quad_grad(res.mbar, w, dm_mu, ds_mu, diag),
        quad_grad(res.mbar, w, dm_c, ds_c, diag),
    ))
}

/// W for the points of one (cluster, attribute).
pub fn weight_matrix(
    points: &[f64],
    mu: f64,
    kappa: f64,
    alpha: f64,
    family: &FamilySpec,
    form: MomentForm,
) -> Result<[[f64; 2]; 2]> {
    if points.is_empty() {
        return Err(Error::EmptyCluster { cluster: 0 });
    }
    moment_vector(points[0], mu, kappa, alpha, family, form)?;
    let sums = Sums::from_points(points.iter().map(|x| (*x, 1.0)));
    let c = kappa * kernels::variance(family.class, mu, alpha);
    let res = residuals(&sums, mu, c, form, false);
    quad_form(res.mbar, res.s, false)
        .map(|(_, w)| w)
        .ok_or(Error::SingularBlock { cluster: 0, attribute: 0 })
}

/// Pseudo-samples added to each cluster: `(location, weight)` per (h, j).
#[derive(Debug, Clone)]
pub struct PseudoSamples {
    pub location: Array2<f64>,
    pub weight: f64,
}

struct Partitioned {
    /// sums[j][h]
    sums: Vec<Vec<Sums>>,
}

fn partition_sums(data: ArrayView2<f64>, assign: &[usize], k: usize, pseudo: Option<&PseudoSamples>) -> Partitioned {
    let j = data.ncols();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &h) in assign.iter().enumerate() {
        members[h].push(i);
    }
    let sums = (0..j)
        .map(|jj| {
            let col = data.column(jj);
            (0..k)
                .map(|h| {
                    let extra = pseudo.map(|p| (p.location[[h, jj]], p.weight)).filter(|(_, w)| *w > 0.0);
                    Sums::from_points(members[h].iter().map(|&i| (col[i], 1.0)).chain(extra))
                })
                .collect()
        })
        .collect();
    Partitioned { sums }
}

/// Per-attribute slice of the objective with the variable layout
/// [μ_1..μ_K (unless light), ln κ, α (unless fixed)].
struct AttrProblem<'a> {
    sums: &'a [Sums],
    family: FamilySpec,
    form: MomentForm,
    light: bool,
    /// Means used when `light`.
    fixed_mu: Vec<f64>,
}

impl AttrProblem<'_> {
    fn k(&self) -> usize {
        self.sums.len()
    }

    fn free_alpha(&self) -> bool {
        !self.family.is_alpha_fixed()
    }

    fn unpack<'v>(&'v self, v: &'v [f64]) -> (&'v [f64], f64, f64) {
        let k = self.k();
        let (mu, rest) = if self.light { (&self.fixed_mu[..], v) } else { v.split_at(k) };
        let alpha = if self.free_alpha() { rest[1] } else { self.family.alpha_lo };
        (mu, rest[0].exp(), alpha)
    }

    fn pack(&self, mu: &[f64], kappa: f64, alpha: f64) -> Vec<f64> {
        let mut v = if self.light { Vec::new() } else { mu.to_vec() };
        v.push(kappa.clamp(KAPPA_MIN, KAPPA_MAX).ln());
        if self.free_alpha() {
            v.push(alpha.clamp(self.family.alpha_lo, self.family.alpha_hi));
        }
        v
    }

    fn bounds(&self) -> Box {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        if !self.light {
            let floor = if self.family.positive_mean() { MU_FLOOR } else { f64::NEG_INFINITY };
            lo.extend(std::iter::repeat_n(floor, self.k()));
            hi.extend(std::iter::repeat_n(f64::INFINITY, self.k()));
        }
        lo.push(KAPPA_MIN.ln());
        hi.push(KAPPA_MAX.ln());
        if self.free_alpha() {
            lo.push(self.family.alpha_lo);
            hi.push(self.family.alpha_hi);
        }
        Box::new(lo, hi).expect("non-empty parameter box")
    }

    fn value(&self, v: &[f64]) -> f64 {
        self.eval(v, false).0
    }

    /// Objective and gradient; infinite when a block is singular.
    fn eval(&self, v: &[f64], grad: bool) -> (f64, Vec<f64>) {
        let k = self.k();
        let (mu, kappa, alpha) = self.unpack(v);
        let class = self.family.class;
        let mut g = vec![0.0; v.len()];
        let mut total = 0.0;
        let diag = self.light;
        let offset = if self.light { 0 } else { k };
        for h in 0..k {
            if self.sums[h].n <= 0.0 {
                continue;
            }
            let ups = kernels::variance(class, mu[h], alpha);
            let c = kappa * ups;
            let Some((q, dq_mu, dq_c)) = block_eval(&self.sums[h], mu[h], c, self.form, diag, grad) else {
                return (f64::INFINITY, g);
            };
            total += q;
            if grad {
                if !self.light {
                    g[h] += dq_mu + dq_c * kappa * upsilon_dmu(class, mu[h], alpha);
                }
                g[offset] += dq_c * c;
                if self.free_alpha() {
                    g[offset + 1] += dq_c * kappa * kernels::variance_dalpha(class, mu[h], alpha);
                }
            }
        }
        (total, g)
    }
}

/// Attribute-level CUGMoM objectives for a partition.
fn objective_from(parts: &Partitioned, params: &MixtureParams, form: MomentForm, light: bool) -> Result<f64> {
    let k = params.n_clusters();
    let mut total = 0.0;
    for (jj, fam) in params.families.iter().enumerate() {
        for h in 0..k {
            let s = &parts.sums[jj][h];
            if s.n <= 0.0 {
                continue;
            }
            let mu = params.mu[[h, jj]];
            let c = params.kappa[jj] * kernels::variance(fam.class, mu, params.alpha[jj]);
            let (q, _, _) =
                block_eval(s, mu, c, form, light, false).ok_or(Error::SingularBlock { cluster: h, attribute: jj })?;
            total += q;
        }
    }
    Ok(total)
}

/// Σ_h Σ_j m̄ᵀ W m̄ for the partition `assign` at `params`.
pub fn cugmom_objective(data: ArrayView2<f64>, assign: &[usize], params: &MixtureParams, form: MomentForm) -> Result<f64> {
    params.validate()?;
    check_partition(assign, data.nrows(), params.n_clusters())?;
    let parts = partition_sums(data, assign, params.n_clusters(), None);
    if let Some(h) = (0..params.n_clusters()).find(|&h| parts.sums[0][h].n <= 0.0) {
        return Err(Error::EmptyCluster { cluster: h });
    }
    objective_from(&parts, params, form, false)
}

/// All K·J blocks (m̄, W) for a partition.
pub fn moment_blocks(
    data: ArrayView2<f64>,
    assign: &[usize],
    params: &MixtureParams,
    form: MomentForm,
) -> Result<Array2<MomentBlock>> {
    check_partition(assign, data.nrows(), params.n_clusters())?;
    let parts = partition_sums(data, assign, params.n_clusters(), None);
    blocks_from(&parts, params, form, false)
}

fn blocks_from(parts: &Partitioned, params: &MixtureParams, form: MomentForm, light: bool) -> Result<Array2<MomentBlock>> {
    let (k, j) = (params.n_clusters(), params.n_attributes());
    let mut out = Vec::with_capacity(k * j);
    for h in 0..k {
        for (jj, fam) in params.families.iter().enumerate() {
            let s = &parts.sums[jj][h];
            if s.n <= 0.0 {
                return Err(Error::EmptyCluster { cluster: h });
            }
            let mu = params.mu[[h, jj]];
            let c = params.kappa[jj] * kernels::variance(fam.class, mu, params.alpha[jj]);
            let res = residuals(s, mu, c, form, false);
            let (_, w) = quad_form(res.mbar, res.s, light).ok_or(Error::SingularBlock { cluster: h, attribute: jj })?;
            out.push(MomentBlock { mbar: res.mbar, w });
        }
    }
    Ok(Array2::from_shape_vec((k, j), out).expect("K×J blocks"))
}

fn check_partition(assign: &[usize], n: usize, k: usize) -> Result<()> {
    if assign.len() != n {
        return Err(Error::LengthMismatch {
            left: assign.len(),
            right: n,
        });
    }
    if let Some(&h) = assign.iter().find(|&&h| h >= k) {
        return Err(Error::InvalidConfig(format!("cluster index {h} out of range for K = {k}")));
    }
    Ok(())
}

/// Minimizes the CUGMoM objective over λ for a fixed partition, starting
/// from `lambda0`. Never returns a λ with a higher objective than `lambda0`.
pub fn optimize_lambda(
    data: ArrayView2<f64>,
    assign: &[usize],
    lambda0: &MixtureParams,
    config: &GmomConfig,
    pseudo: Option<&PseudoSamples>,
) -> Result<(MixtureParams, f64)> {
    lambda0.validate()?;
    let k = lambda0.n_clusters();
    check_partition(assign, data.nrows(), k)?;
    let parts = partition_sums(data, assign, k, pseudo);
    optimize_parts(&parts, lambda0, config)
}

fn optimize_parts(parts: &Partitioned, lambda0: &MixtureParams, config: &GmomConfig) -> Result<(MixtureParams, f64)> {
    let k = lambda0.n_clusters();
    let mut out = lambda0.clone();
    let opts = BoxOptions {
        gtol: config.gtol,
        max_iter: 500,
        memory: 10,
    };
    let mut total = 0.0;
    for (jj, fam) in lambda0.families.iter().enumerate() {
        let sums = &parts.sums[jj];
        let fixed_mu: Vec<f64> = if config.light {
            (0..k)
                .map(|h| {
                    if sums[h].n > 0.0 {
                        let m = sums[h].mean();
                        if fam.positive_mean() { m.max(MU_FLOOR) } else { m }
                    } else {
                        lambda0.mu[[h, jj]]
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        let problem = AttrProblem {
            sums,
            family: *fam,
            form: config.form,
            light: config.light,
            fixed_mu,
        };
        let mu0: Vec<f64> = lambda0.mu.column(jj).to_vec();
        let x0 = problem.pack(&mu0, lambda0.kappa[jj], lambda0.alpha[jj]);
        let f0 = problem.value(&x0);
        if !f0.is_finite() {
            let h = (0..k).find(|&h| sums[h].n > 0.0 && sums[h].p[1] == 0.0).unwrap_or(0);
            return Err(Error::SingularBlock { cluster: h, attribute: jj });
        }
        let bounds = problem.bounds();
        let res = match config.form {
            MomentForm::Centered => {
                let mut grad = |v: &[f64]| problem.eval(v, true).1;
                minimize_box(|v| problem.value(v), Some(&mut grad), &bounds, &x0, opts)?
            }
            MomentForm::Raw => minimize_box(|v| problem.value(v), None, &bounds, &x0, opts)?,
        };
        let best = if res.f <= f0 { res.x } else { x0 };
        let (mu, kappa, alpha) = problem.unpack(&best);
        for h in 0..k {
            out.mu[[h, jj]] = mu[h];
        }
        out.kappa[jj] = kappa;
        out.alpha[jj] = alpha;
        total += res.f.min(f0);
    }
    Ok((out, total))
}

/// Quadratic distance of one point to every cluster.
fn distances(x: ndarray::ArrayView1<f64>, params: &MixtureParams, blocks: &Array2<MomentBlock>, form: MomentForm, out: &mut [f64]) {
    for (h, o) in out.iter_mut().enumerate() {
        let mut d = 0.0;
        for (jj, fam) in params.families.iter().enumerate() {
            let mu = params.mu[[h, jj]];
            let c = params.kappa[jj] * kernels::variance(fam.class, mu, params.alpha[jj]);
            let e = x[jj] - mu;
            let m = match form {
                MomentForm::Centered => [e, e * e - c],
                MomentForm::Raw => [e, x[jj] * x[jj] - c],
            };
            d += blocks[[h, jj]].quadratic(m);
        }
        *o = d;
    }
}

/// Assigns every point to the cluster with the smallest quadratic distance,
/// lowest index on ties.
pub fn assign_step(data: ArrayView2<f64>, params: &MixtureParams, blocks: &Array2<MomentBlock>, form: MomentForm) -> Vec<usize> {
    assign_with_distance(data, params, blocks, form).0
}

fn assign_with_distance(
    data: ArrayView2<f64>,
    params: &MixtureParams,
    blocks: &Array2<MomentBlock>,
    form: MomentForm,
) -> (Vec<usize>, Vec<f64>) {
    let k = params.n_clusters();
    let mut d = vec![0.0; k];
    let mut assign = Vec::with_capacity(data.nrows());
    let mut dist = Vec::with_capacity(data.nrows());
    for x in data.outer_iter() {
        distances(x, params, blocks, form, &mut d);
        let mut best = 0;
        for h in 1..k {
            if d[h] < d[best] {
                best = h;
            }
        }
        assign.push(best);
        dist.push(d[best]);
    }
    (assign, dist)
}

/// Moves the farthest points (by quadratic distance) into clusters with fewer
/// than two members, taking only from clusters that can spare one.
fn reseed_small(assign: &mut [usize], dist: &mut [f64], k: usize) -> Result<bool> {
    let mut counts = vec![0usize; k];
    for &h in assign.iter() {
        counts[h] += 1;
    }
    let mut moved = false;
    for h in 0..k {
        while counts[h] < 2 {
            let pick = (0..assign.len())
                .filter(|&i| assign[i] != h && counts[assign[i]] > 2)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                });
            let Some(i) = pick else {
                return Err(Error::EmptyCluster { cluster: h });
            };
            counts[assign[i]] -= 1;
            assign[i] = h;
            dist[i] = f64::NEG_INFINITY;
            counts[h] += 1;
            moved = true;
        }
    }
    Ok(moved)
}

/// Starting λ: cluster means, pooled method-of-moments κ at the family's
/// named α.
pub fn initial_lambda(
    data: ArrayView2<f64>,
    assign: &[usize],
    families: &[FamilySpec],
    k: usize,
    pseudo: Option<&PseudoSamples>,
) -> MixtureParams {
    let parts = partition_sums(data, assign, k, pseudo);
    let j = families.len();
    let mut mu = Array2::zeros((k, j));
    let mut kappa = vec![1.0; j];
    let alpha: Vec<f64> = families.iter().map(|f| f.initial_alpha()).collect();
    for (jj, fam) in families.iter().enumerate() {
        let (mut var, mut ups) = (0.0, 0.0);
        for h in 0..k {
            let s = &parts.sums[jj][h];
            let m = if s.n > 0.0 { s.mean() } else { data[[0, jj]] };
            let m = if fam.positive_mean() { m.max(MU_FLOOR) } else { m };
            mu[[h, jj]] = m;
            if s.n > 0.0 {
                let m1 = s.p[0];
                var += s.n * (s.p[1] - m1 * m1);
                ups += s.n * kernels::variance(fam.class, m, alpha[jj]);
            }
        }
        let est = var / ups;
        kappa[jj] = if est.is_finite() && est > 0.0 { est.clamp(KAPPA_MIN, KAPPA_MAX) } else { 1.0 };
    }
    let counts = assign.iter().fold(vec![0.0; k], |mut c, &h| {
        c[h] += 1.0;
        c
    });
    let n = assign.len() as f64;
    MixtureParams {
        pi: counts.iter().map(|c| c / n).collect(),
        mu,
        kappa,
        alpha,
        families: families.to_vec(),
    }
}

pub(crate) fn inertia(data: ArrayView2<f64>, assign: &[usize], k: usize) -> f64 {
    let j = data.ncols();
    let mut sums = Array2::<f64>::zeros((k, j));
    let mut counts = vec![0.0; k];
    for (x, &h) in data.outer_iter().zip(assign) {
        counts[h] += 1.0;
        let mut row = sums.row_mut(h);
        row += &x;
    }
    let mut total = 0.0;
    for (x, &h) in data.outer_iter().zip(assign) {
        for jj in 0..j {
            let d = x[jj] - sums[[h, jj]] / counts[h];
            total += d * d;
        }
    }
    total
}

/// Columns shifted to mean 0 and scaled to unit variance; constant columns
/// are only centred.
pub fn standardized(data: ArrayView2<f64>) -> Array2<f64> {
    let mut z = data.to_owned();
    for mut col in z.columns_mut() {
        let n = col.len() as f64;
        let mean = col.sum() / n;
        let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        col.mapv_inplace(|v| (v - mean) / scale);
    }
    z
}

/// GMoM-HC from a k-means++ partition.
pub fn fit_gmom(data: ArrayView2<f64>, families: &[FamilySpec], k: usize, config: &GmomConfig) -> Result<GmomResult> {
    let n = data.nrows();
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if n < 2 * k {
        return Err(Error::InvalidConfig(format!("{n} rows cannot support {k} clusters of two points")));
    }
    let alpha0: Vec<f64> = families.iter().map(|f| f.initial_alpha()).collect();
    crate::soft::check_data(data, families, &alpha0)?;
    let mut rng = crate::rng::from_seed(config.seed);
    let space = if config.standardize_seeding { standardized(data) } else { data.to_owned() };
    let seeds = super::kmeans_pp_init(space.view(), k, &mut rng)?;
    let seed_points = space.select(Axis(0), &seeds);
    let mut assign: Vec<usize> = space.outer_iter().map(|x| super::nearest(x, seed_points.view()).0).collect();
    let centroids = data.select(Axis(0), &seeds);
    let pseudo = match config.mode {
        Mode::Map if config.prior_weight > 0.0 => Some(PseudoSamples {
            location: centroids.clone(),
            weight: config.prior_weight,
        }),
        _ => None,
    };
    let mut dist = vec![0.0; n];
    reseed_small(&mut assign, &mut dist, k)?;
    fit_gmom_from(data, families, assign, config, pseudo.as_ref())
}

/// GMoM-HC iterations from an explicit partition.
pub fn fit_gmom_from(
    data: ArrayView2<f64>,
    families: &[FamilySpec],
    mut assign: Vec<usize>,
    config: &GmomConfig,
    pseudo: Option<&PseudoSamples>,
) -> Result<GmomResult> {
    let k = assign.iter().max().map_or(0, |m| m + 1);
    let k = pseudo.map_or(k, |p| p.location.nrows().max(k));
    check_partition(&assign, data.nrows(), k)?;
    let mut lambda = initial_lambda(data, &assign, families, k, pseudo);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let parts = partition_sums(data, &assign, k, pseudo);
        let (next, obj) = optimize_parts(&parts, &lambda, config)?;
        lambda = next;
        trace.push(obj);
        if iterations >= config.max_iter {
            break;
        }
        iterations += 1;
        let blocks = blocks_from(&parts, &lambda, config.form, config.light)?;
        let (mut new_assign, mut dist) = assign_with_distance(data, &lambda, &blocks, config.form);
        reseed_small(&mut new_assign, &mut dist, k)?;
        if new_assign == assign {
            converged = true;
            break;
        }
        assign = new_assign;
    }
    let counts = assign.iter().fold(vec![0.0; k], |mut c, &h| {
        c[h] += 1.0;
        c
    });
    lambda.pi = counts.iter().map(|c| c / assign.len() as f64).collect();
    Ok(GmomResult {
        inertia: inertia(data, &assign, k),
        objective: *trace.last().unwrap(),
        assign,
        params: lambda,
        trace,
        iterations,
        converged,
    })
}
