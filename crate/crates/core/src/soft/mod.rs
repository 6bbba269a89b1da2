//! EM for heterogeneous mixtures of steep EDMs (AdaCluster), with Bregman
//! soft clustering (`homogeneous`) and the diagonal shared-covariance GMM
//! (`gaussian_only`) as restricted modes.

mod engine;
#[cfg(test)]
mod tests;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::edm::{FamilyClass, FamilySpec};
use crate::error::{Error, Result};
use crate::numopt::{minimize_scalar_fdf, ScalarOptions};

use engine::Column;

/// Floor applied to positive mean parameters.
pub const MU_FLOOR: f64 = 1e-9;
/// Floor applied to dispersions.
pub const KAPPA_FLOOR: f64 = 1e-12;
/// Proportion below which a component is considered collapsed.
pub const PI_MIN: f64 = 1e-300;
/// Cluster mass below which a component without prior mass is empty.
pub const EMPTY_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub pi: Vec<f64>,
    /// K×J mean parameters.
    pub mu: Array2<f64>,
    pub kappa: Vec<f64>,
    pub alpha: Vec<f64>,
    pub families: Vec<FamilySpec>,
}

impl MixtureParams {
    pub fn n_clusters(&self) -> usize {
        self.pi.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.families.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (k, j) = (self.n_clusters(), self.n_attributes());
        if self.mu.dim() != (k, j) {
            return Err(Error::InvalidConfig(format!(
                "mean matrix is {:?}, expected ({k}, {j})",
                self.mu.dim()
            )));
        }
        if self.kappa.len() != j || self.alpha.len() != j {
            return Err(Error::LengthMismatch {
                left: self.kappa.len().min(self.alpha.len()),
                right: j,
            });
        }
        let total: f64 = self.pi.iter().sum();
        if self.pi.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("proportions {:?} are not on the simplex", self.pi)));
        }
        for (jj, fam) in self.families.iter().enumerate() {
            if !(self.kappa[jj] > 0.0 && self.kappa[jj].is_finite()) {
                return Err(Error::domain(format!("dispersion {} of attribute {jj}", self.kappa[jj])));
            }
            if !fam.contains_alpha(self.alpha[jj]) {
                return Err(Error::domain(format!("alpha {} of attribute {jj}", self.alpha[jj])));
            }
            for h in 0..k {
                if !fam.in_mean_domain(self.mu[[h, jj]]) {
                    return Err(Error::domain(format!(
                        "mean {} of cluster {h}, attribute {jj}",
                        self.mu[[h, jj]]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Conjugate prior hyper-parameters. All zeros gives maximum likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub a_mu: Array2<f64>,
    pub b_mu: Array2<f64>,
    pub a_kappa: Vec<f64>,
    pub b_kappa: Vec<f64>,
}

impl Priors {
    pub fn none(k: usize, j: usize) -> Priors {
        Priors {
            a_mu: Array2::zeros((k, j)),
            b_mu: Array2::zeros((k, j)),
            a_kappa: vec![0.0; j],
            b_kappa: vec![0.0; j],
        }
    }

    /// Prior centred on `centres` with the given strengths.
    pub fn centred(centres: Array2<f64>, strength: &PriorStrength) -> Priors {
        let (k, j) = centres.dim();
        Priors {
            b_mu: Array2::from_elem((k, j), strength.b_mu),
            a_mu: centres,
            a_kappa: vec![strength.a_kappa; j],
            b_kappa: vec![strength.b_kappa; j],
        }
    }

    fn validate(&self, k: usize, j: usize) -> Result<()> {
        if self.a_mu.dim() != (k, j) || self.b_mu.dim() != (k, j) {
            return Err(Error::InvalidConfig("prior matrices must be K×J".into()));
        }
        if self.a_kappa.len() != j || self.b_kappa.len() != j {
            return Err(Error::LengthMismatch {
                left: self.a_kappa.len().min(self.b_kappa.len()),
                right: j,
            });
        }
        let ok = self.b_mu.iter().all(|v| *v >= 0.0)
            && self.a_kappa.iter().chain(&self.b_kappa).all(|v| *v >= 0.0);
        if !ok {
            return Err(Error::InvalidConfig("prior hyper-parameters must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorStrength {
    pub b_mu: f64,
    pub a_kappa: f64,
    pub b_kappa: f64,
}

impl Default for PriorStrength {
    fn default() -> Self {
        PriorStrength {
            b_mu: 1.0,
            a_kappa: 1.0,
            b_kappa: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ml,
    Map,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftConfig {
    pub mode: Mode,
    pub homogeneous: bool,
    pub gaussian_only: bool,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub prior: PriorStrength,
    /// Stop once hard assignments are unchanged for two consecutive iterations.
    /// Ignored for a single cluster, whose assignments never change.
    pub stop_on_stable_assignments: bool,
}

impl Default for SoftConfig {
    fn default() -> Self {
        SoftConfig {
            mode: Mode::Map,
            homogeneous: false,
            gaussian_only: false,
            max_iter: 1000,
            tol: 1e-8,
            seed: 0,
            prior: PriorStrength::default(),
            stop_on_stable_assignments: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    StableAssignments,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: MixtureParams,
    pub priors: Priors,
    /// N×K responsibilities under `params`.
    pub responsibilities: Array2<f64>,
    /// Objective after every E-step: L̂ plus the log prior in MAP mode.
    pub trace: Vec<f64>,
    /// Final quasi-log-likelihood L̂ (without prior terms).
    pub quasi_loglik: f64,
    pub iterations: usize,
    pub stop: StopReason,
    /// Iterations at which an empty component was re-seeded.
    pub reseeds: Vec<usize>,
}

impl FitResult {
    pub fn assignments(&self) -> Vec<usize> {
        hard_assignments(self.responsibilities.view())
    }
}

/// Υ(x, μ_h, κ, α): the per-component log-density summed over attributes.
pub fn upsilon_aux(x: ArrayView1<f64>, mu_h: ArrayView1<f64>, params: &MixtureParams) -> Result<f64> {
    if x.len() != params.n_attributes() || mu_h.len() != params.n_attributes() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: params.n_attributes(),
        });
    }
    let mut total = 0.0;
    for (j, fam) in params.families.iter().enumerate() {
        total += fam.log_density(x[j], mu_h[j], params.kappa[j], params.alpha[j])?;
    }
    Ok(total)
}

pub(crate) fn check_data(data: ArrayView2<f64>, families: &[FamilySpec], alpha: &[f64]) -> Result<()> {
    if data.ncols() != families.len() {
        return Err(Error::LengthMismatch {
            left: data.ncols(),
            right: families.len(),
        });
    }
    for (j, fam) in families.iter().enumerate() {
        if let Some((i, x)) = data
            .column(j)
            .iter()
            .enumerate()
            .find(|(_, x)| !fam.in_support(**x, alpha[j]))
        {
            return Err(Error::domain(format!(
                "value {x} at row {i}, attribute {j} is outside the support of {:?}",
                fam.class
            )));
        }
    }
    Ok(())
}

/// Responsibilities and L̂ for a given Υ matrix; rows are normalized in place.
fn normalize(mut ups: Array2<f64>, pi: &[f64]) -> Result<(Array2<f64>, f64)> {
    if let Some((h, p)) = pi.iter().enumerate().find(|(_, p)| !(**p >= PI_MIN)) {
        return Err(Error::DegenerateComponent { component: h, pi: *p });
    }
    let log_pi: Vec<f64> = pi.iter().map(|p| p.ln()).collect();
    let mut total = 0.0;
    for (i, mut row) in ups.outer_iter_mut().enumerate() {
        let mut m = f64::NEG_INFINITY;
        for (h, v) in row.iter_mut().enumerate() {
            *v += log_pi[h];
            if v.is_nan() {
                return Err(Error::NonFinite(format!("log-density of row {i}, component {h}")));
            }
            m = m.max(*v);
        }
        if !m.is_finite() {
            return Err(Error::NonFinite(format!("row {i} has zero density under every component")));
        }
        let s: f64 = row.iter().map(|v| (v - m).exp()).sum();
        let lse = m + s.ln();
        row.mapv_inplace(|v| (v - lse).exp());
        total += lse;
    }
    Ok((ups, total))
}

/// E-step: responsibilities and the quasi-log-likelihood L̂.
pub fn e_step(data: ArrayView2<f64>, params: &MixtureParams) -> Result<(Array2<f64>, f64)> {
    params.validate()?;
    check_data(data, &params.families, &params.alpha)?;
    let cols = engine::columns(data);
    e_step_cols(&cols, params)
}

fn e_step_cols(cols: &[Column], params: &MixtureParams) -> Result<(Array2<f64>, f64)> {
    let ups = engine::upsilon_matrix(cols, &params.families, params.mu.view(), &params.kappa, &params.alpha);
    normalize(ups, &params.pi)
}

pub fn m_step_pi(r: ArrayView2<f64>) -> Vec<f64> {
    let n = r.nrows() as f64;
    let mut pi: Vec<f64> = r.sum_axis(Axis(0)).iter().map(|s| s / n).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    pi
}

fn mu_update(sx: f64, mass: f64, a: f64, b: f64, kappa: f64, family: &FamilySpec) -> f64 {
    let mu = if b > 0.0 {
        (a * b * kappa + sx) / (b * kappa + mass)
    } else {
        sx / mass
    };
    if family.positive_mean() {
        mu.max(MU_FLOOR)
    } else {
        mu
    }
}

pub fn m_step_mu(
    data: ArrayView2<f64>,
    r: ArrayView2<f64>,
    params: &MixtureParams,
    priors: &Priors,
) -> Result<Array2<f64>> {
    let (k, j) = (params.n_clusters(), params.n_attributes());
    priors.validate(k, j)?;
    let mass = r.sum_axis(Axis(0));
    let sx = r.t().dot(&data);
    let mut mu = Array2::zeros((k, j));
    for h in 0..k {
        for jj in 0..j {
            let b = priors.b_mu[[h, jj]];
            if mass[h] < EMPTY_MASS && !(b > 0.0) {
                return Err(Error::EmptyCluster { cluster: h });
            }
            mu[[h, jj]] = mu_update(
                sx[[h, jj]],
                mass[h],
                priors.a_mu[[h, jj]],
                b,
                params.kappa[jj],
                &params.families[jj],
            );
        }
    }
    Ok(mu)
}

/// Dispersion update shared by both modes. Morris count attributes keep κ = 1
/// since their discrete-form density depends on κ and α only through α·κ.
fn kappa_update(family: &FamilySpec, wdiv: f64, mass: f64, a: f64, b: f64) -> f64 {
    if pinned_kappa(family) {
        return 1.0;
    }
    ((b + wdiv) / (a + 0.5 * mass)).max(KAPPA_FLOOR)
}

fn pinned_kappa(family: &FamilySpec) -> bool {
    family.class == FamilyClass::MorrisCount && family.discrete
}

pub fn m_step_kappa(
    data: ArrayView2<f64>,
    r: ArrayView2<f64>,
    mu: ArrayView2<f64>,
    params: &MixtureParams,
    priors: &Priors,
) -> Vec<f64> {
    let total = r.sum();
    (0..params.n_attributes())
        .map(|j| {
            let fam = &params.families[j];
            let mut wdiv = 0.0;
            for (i, row) in r.outer_iter().enumerate() {
                for (h, w) in row.iter().enumerate() {
                    wdiv += w * fam.divergence(data[[i, j]], mu[[h, j]], params.alpha[j]).unwrap_or(f64::NAN);
                }
            }
            kappa_update(fam, wdiv, total, priors.a_kappa[j], priors.b_kappa[j])
        })
        .collect()
}

/// Per-attribute α update holding r, μ, κ fixed.
pub fn m_step_alpha(
    data: ArrayView2<f64>,
    r: ArrayView2<f64>,
    mu: ArrayView2<f64>,
    kappa: &[f64],
    params: &MixtureParams,
) -> Result<Vec<f64>> {
    let (k, j) = (params.n_clusters(), params.n_attributes());
    let priors = Priors::none(k, j);
    let cols = engine::columns(data);
    let mut alpha = params.alpha.clone();
    for jj in 0..j {
        let group = Group { attrs: vec![jj] };
        let w = vec![engine::aggregate(&cols[jj], r)];
        let ctx = GroupCtx {
            cols: &cols,
            w: &w,
            families: &params.families,
            priors: &priors,
            group: &group,
        };
        let mu_cols = vec![mu.column(jj).to_vec()];
        alpha[jj] = ctx.optimize_alpha(&mu_cols, kappa[jj], params.alpha[jj], None)?.0;
    }
    Ok(alpha)
}

/// Attributes sharing κ and α.
#[derive(Debug, Clone)]
struct Group {
    attrs: Vec<usize>,
}

fn groups(j: usize, homogeneous: bool) -> Vec<Group> {
    if homogeneous {
        vec![Group {
            attrs: (0..j).collect(),
        }]
    } else {
        (0..j).map(|jj| Group { attrs: vec![jj] }).collect()
    }
}

struct GroupCtx<'a> {
    cols: &'a [Column],
    /// Aggregated responsibilities for each attribute of the group.
    w: &'a [Vec<f64>],
    families: &'a [FamilySpec],
    priors: &'a Priors,
    group: &'a Group,
}

impl GroupCtx<'_> {
    fn family(&self) -> &FamilySpec {
        &self.families[self.group.attrs[0]]
    }

    /// Negative expected complete-data objective of the group, prior included.
    fn cost(&self, mu: &[Vec<f64>], kappa: f64, alpha: f64) -> f64 {
        let fam = self.family();
        let mut total = 0.0;
        for (g, &j) in self.group.attrs.iter().enumerate() {
            total += engine::expected_cost(&self.cols[j], &self.w[g], fam, &mu[g], kappa, alpha);
        }
        total + self.prior_cost(mu, kappa, alpha)
    }

    fn cost_dalpha(&self, mu: &[Vec<f64>], kappa: f64, alpha: f64) -> (f64, f64) {
        let fam = self.family();
        let (mut f, mut g) = (0.0, 0.0);
        for (gi, &j) in self.group.attrs.iter().enumerate() {
            let (a, b) = engine::expected_cost_dalpha(&self.cols[j], &self.w[gi], fam, &mu[gi], kappa, alpha);
            f += a;
            g += b;
        }
        let (pf, pg) = self.prior_cost_dalpha(mu, alpha);
        (f + pf + self.kappa_prior_cost(kappa), g + pg)
    }

    fn kappa_prior_cost(&self, kappa: f64) -> f64 {
        if pinned_kappa(self.family()) {
            return 0.0;
        }
        let mut total = 0.0;
        for &j in &self.group.attrs {
            let (a, b) = (self.priors.a_kappa[j], self.priors.b_kappa[j]);
            if a != 0.0 {
                total += a * kappa.ln();
            }
            if b != 0.0 {
                total += b / kappa;
            }
        }
        total
    }

    fn prior_cost(&self, mu: &[Vec<f64>], kappa: f64, alpha: f64) -> f64 {
        self.prior_cost_dalpha(mu, alpha).0 + self.kappa_prior_cost(kappa)
    }

    /// Σ_h b_hj·d(a_hj, μ_hj | α) and its α-derivative.
    fn prior_cost_dalpha(&self, mu: &[Vec<f64>], alpha: f64) -> (f64, f64) {
        let fam = self.family();
        let (mut f, mut g) = (0.0, 0.0);
        for (gi, &j) in self.group.attrs.iter().enumerate() {
            for (h, &m) in mu[gi].iter().enumerate() {
                let b = self.priors.b_mu[[h, j]];
                if b != 0.0 {
                    let a = self.priors.a_mu[[h, j]];
                    f += b * crate::edm::kernels::divergence(fam.class, a, m, alpha);
                    g += b * crate::edm::kernels::divergence_dalpha(fam.class, a, m, alpha);
                }
            }
        }
        (f, g)
    }

    /// Minimizes the group cost over α from `alpha0`; never returns a point
    /// worse than `alpha0`. `f0` is the cost at `alpha0` when already known.
    fn optimize_alpha(&self, mu: &[Vec<f64>], kappa: f64, alpha0: f64, f0: Option<f64>) -> Result<(f64, f64)> {
        let fam = *self.family();
        if fam.is_alpha_fixed() {
            let f = f0.unwrap_or_else(|| self.cost(mu, kappa, alpha0));
            return Ok((alpha0, f));
        }
        let mass: f64 = self
            .group
            .attrs
            .iter()
            .map(|&j| self.cols[j].counts.iter().sum::<f64>())
            .sum();
        let opts = ScalarOptions {
            gtol: 1e-7 * mass.max(1.0),
            xtol: 1e-9,
            max_evals: 80,
        };
        let res = minimize_scalar_fdf(
            |a| self.cost_dalpha(mu, kappa, a),
            fam.alpha_lo,
            fam.alpha_hi,
            alpha0,
            opts,
        )?;
        Ok((res.x, res.f))
    }
}

/// Argmax of each row, lowest index on ties.
pub fn hard_assignments(r: ArrayView2<f64>) -> Vec<usize> {
    r.outer_iter()
        .map(|row| {
            let mut best = 0;
            for (h, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = h;
                }
            }
            best
        })
        .collect()
}

/// Mutable state of one EM run.
pub struct EmState<'a> {
    data: ArrayView2<'a, f64>,
    cols: Vec<Column>,
    groups: Vec<Group>,
    pub params: MixtureParams,
    pub priors: Priors,
}

/// Outcome of one M-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MStep {
    Updated,
    /// Component `0` had no mass and was moved onto a poorly explained point.
    Reseeded(usize),
}

impl<'a> EmState<'a> {
    pub fn new(
        data: ArrayView2<'a, f64>,
        params: MixtureParams,
        priors: Priors,
        homogeneous: bool,
    ) -> Result<EmState<'a>> {
        params.validate()?;
        priors.validate(params.n_clusters(), params.n_attributes())?;
        check_data(data, &params.families, &params.alpha)?;
        if data.nrows() < params.n_clusters() {
            return Err(Error::InvalidConfig(format!(
                "{} rows cannot support {} clusters",
                data.nrows(),
                params.n_clusters()
            )));
        }
        if homogeneous {
            let first = params.families[0];
            let same = params
                .families
                .iter()
                .all(|f| f.class == first.class && f.support == first.support && f.alpha_lo == first.alpha_lo && f.alpha_hi == first.alpha_hi);
            if !same {
                return Err(Error::InvalidConfig(
                    "homogeneous mode requires one family shared by every attribute".into(),
                ));
            }
            let (k0, a0) = (params.kappa[0], params.alpha[0]);
            if params.kappa.iter().any(|v| *v != k0) || params.alpha.iter().any(|v| *v != a0) {
                return Err(Error::InvalidConfig(
                    "homogeneous mode requires tied dispersion and hyper-parameter".into(),
                ));
            }
        }
        Ok(EmState {
            cols: engine::columns(data),
            groups: groups(params.n_attributes(), homogeneous),
            data,
            params,
            priors,
        })
    }

    pub fn e_step(&self) -> Result<(Array2<f64>, f64)> {
        e_step_cols(&self.cols, &self.params)
    }

    /// Log prior density of the current parameters, up to a constant.
    pub fn log_prior(&self) -> f64 {
        let mut total = 0.0;
        for group in &self.groups {
            let w: Vec<Vec<f64>> = Vec::new();
            let ctx = GroupCtx {
                cols: &self.cols,
                w: &w,
                families: &self.params.families,
                priors: &self.priors,
                group,
            };
            let j0 = group.attrs[0];
            let mu = self.group_mu(group);
            total -= ctx.prior_cost(&mu, self.params.kappa[j0], self.params.alpha[j0]);
        }
        total
    }

    fn group_mu(&self, group: &Group) -> Vec<Vec<f64>> {
        group.attrs.iter().map(|&j| self.params.mu.column(j).to_vec()).collect()
    }

    /// Generalized M-step: π, then for each attribute group μ, κ and α, each
    /// group reverted if its expected objective would get worse.
    pub fn m_step(&mut self, r: ArrayView2<f64>, ups_lse: Option<&[f64]>) -> Result<MStep> {
        let k = self.params.n_clusters();
        let mass = r.sum_axis(Axis(0));
        for h in 0..k {
            let has_prior = self.priors.b_mu.row(h).iter().all(|b| *b > 0.0);
            if mass[h] < EMPTY_MASS && !has_prior {
                self.reseed(h, ups_lse)?;
                return Ok(MStep::Reseeded(h));
            }
        }
        self.params.pi = m_step_pi(r);

        let groups = self.groups.clone();
        for group in &groups {
            let w: Vec<Vec<f64>> = group.attrs.iter().map(|&j| engine::aggregate(&self.cols[j], r)).collect();
            let ctx = GroupCtx {
                cols: &self.cols,
                w: &w,
                families: &self.params.families,
                priors: &self.priors,
                group,
            };
            let fam = *ctx.family();
            let j0 = group.attrs[0];
            let (kappa_old, alpha_old) = (self.params.kappa[j0], self.params.alpha[j0]);
            let mu_old: Vec<Vec<f64>> = group.attrs.iter().map(|&j| self.params.mu.column(j).to_vec()).collect();
            let f_old = ctx.cost(&mu_old, kappa_old, alpha_old);

            let mut mu_new = mu_old.clone();
            let (mut wdiv, mut wmass, mut a_k, mut b_k) = (0.0, 0.0, 0.0, 0.0);
            for (gi, &j) in group.attrs.iter().enumerate() {
                let (sx, m) = engine::cluster_moments(&self.cols[j], &w[gi], k);
                for h in 0..k {
                    mu_new[gi][h] = mu_update(
                        sx[h],
                        m[h],
                        self.priors.a_mu[[h, j]],
                        self.priors.b_mu[[h, j]],
                        kappa_old,
                        &fam,
                    );
                }
                wdiv += engine::weighted_divergence(&self.cols[j], &w[gi], &fam, &mu_new[gi], alpha_old);
                wmass += m.iter().sum::<f64>();
                a_k += self.priors.a_kappa[j];
                b_k += self.priors.b_kappa[j];
            }
            let kappa_new = kappa_update(&fam, wdiv, wmass, a_k, b_k);

            let mut f_mid = if fam.is_alpha_fixed() {
                Some(ctx.cost(&mu_new, kappa_new, alpha_old))
            } else {
                let (f, _) = ctx.cost_dalpha(&mu_new, kappa_new, alpha_old);
                Some(f)
            };
            // The closed forms are exact maximizers, so a rise within rounding
            // of f_old is noise and must not freeze μ and κ.
            let slack = 1e-12 * f_old.abs().max(1.0);
            let (mu_use, kappa_use) = if f_mid.is_some_and(|f| f <= f_old + slack) {
                (mu_new, kappa_new)
            } else {
                f_mid = Some(f_old);
                (mu_old, kappa_old)
            };
            let alpha_new = match ctx.optimize_alpha(&mu_use, kappa_use, alpha_old, f_mid) {
                Ok((a, f)) if f <= f_mid.unwrap() => a,
                _ => alpha_old,
            };

            for (gi, &j) in group.attrs.iter().enumerate() {
                for h in 0..k {
                    self.params.mu[[h, j]] = mu_use[gi][h];
                }
                self.params.kappa[j] = kappa_use;
                self.params.alpha[j] = alpha_new;
            }
        }
        Ok(MStep::Updated)
    }

    /// Moves component `h` onto the point with the lowest mixture density.
    fn reseed(&mut self, h: usize, ups_lse: Option<&[f64]>) -> Result<()> {
        let n = self.data.nrows();
        let lse: Vec<f64> = match ups_lse {
            Some(v) => v.to_vec(),
            None => {
                let ups = engine::upsilon_matrix(
                    &self.cols,
                    &self.params.families,
                    self.params.mu.view(),
                    &self.params.kappa,
                    &self.params.alpha,
                );
                ups.outer_iter()
                    .map(|row| {
                        let m = row.iter().zip(&self.params.pi).map(|(u, p)| u + p.ln()).fold(f64::NEG_INFINITY, f64::max);
                        m + row.iter().zip(&self.params.pi).map(|(u, p)| (u + p.ln() - m).exp()).sum::<f64>().ln()
                    })
                    .collect()
            }
        };
        let mut worst = 0;
        for i in 1..n {
            if lse[i] < lse[worst] {
                worst = i;
            }
        }
        for (j, fam) in self.params.families.iter().enumerate() {
            let x = self.data[[worst, j]];
            self.params.mu[[h, j]] = if fam.positive_mean() { x.max(MU_FLOOR) } else { x };
        }
        let floor = 1.0 / n as f64;
        self.params.pi[h] = self.params.pi[h].max(floor);
        let total: f64 = self.params.pi.iter().sum();
        self.params.pi.iter_mut().for_each(|p| *p /= total);
        Ok(())
    }
}

/// Starting point from k-means++ seeds: μ at the seeds, π uniform, α at the
/// class's named member and κ from the nearest-seed partition.
pub fn initial_params(
    data: ArrayView2<f64>,
    families: &[FamilySpec],
    seeds: &[usize],
    homogeneous: bool,
) -> MixtureParams {
    let k = seeds.len();
    let j = families.len();
    let mut mu = data.select(Axis(0), seeds);
    for (jj, fam) in families.iter().enumerate() {
        if fam.positive_mean() {
            mu.column_mut(jj).mapv_inplace(|v| v.max(MU_FLOOR));
        }
    }
    let alpha: Vec<f64> = families.iter().map(|f| f.initial_alpha()).collect();
    let centroids = data.select(Axis(0), seeds);
    let assign: Vec<usize> = data
        .outer_iter()
        .map(|x| crate::hard::nearest(x, centroids.view()).0)
        .collect();
    let n = data.nrows() as f64;
    let mut wdiv = vec![0.0; j];
    for (i, &h) in assign.iter().enumerate() {
        for (jj, fam) in families.iter().enumerate() {
            wdiv[jj] += crate::edm::kernels::divergence(fam.class, data[[i, jj]], mu[[h, jj]], alpha[jj]);
        }
    }
    let mut kappa: Vec<f64> = (0..j).map(|jj| kappa_update(&families[jj], wdiv[jj], n, 0.0, 0.0)).collect();
    if homogeneous {
        let pooled = kappa_update(&families[0], wdiv.iter().sum(), n * j as f64, 0.0, 0.0);
        kappa = vec![pooled; j];
    }
    MixtureParams {
        pi: vec![1.0 / k as f64; k],
        mu,
        kappa,
        alpha,
        families: families.to_vec(),
    }
}

/// Fits a K-component mixture with k-means++ initialization.
pub fn fit(data: ArrayView2<f64>, families: &[FamilySpec], k: usize, config: &SoftConfig) -> Result<FitResult> {
    let families: Vec<FamilySpec> = if config.gaussian_only {
        vec![FamilySpec::gaussian(); data.ncols()]
    } else {
        families.to_vec()
    };
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if data.nrows() < k {
        return Err(Error::InvalidConfig(format!("{} rows cannot support {k} clusters", data.nrows())));
    }
    check_data(data, &families, &families.iter().map(|f| f.initial_alpha()).collect::<Vec<_>>())?;
    let mut rng = crate::rng::from_seed(config.seed);
    let seeds = crate::hard::kmeans_pp_init(data, k, &mut rng)?;
    let init = initial_params(data, &families, &seeds, config.homogeneous);
    let priors = match config.mode {
        Mode::Ml => Priors::none(k, data.ncols()),
        Mode::Map => Priors::centred(init.mu.clone(), &config.prior),
    };
    fit_from(data, init, priors, config)
}

/// Runs EM from explicit starting parameters and priors.
pub fn fit_from(data: ArrayView2<f64>, init: MixtureParams, priors: Priors, config: &SoftConfig) -> Result<FitResult> {
    let mut state = EmState::new(data, init, priors, config.homogeneous)?;
    let mut trace = Vec::new();
    let mut reseeds = Vec::new();
    let mut prev_assign: Option<Vec<usize>> = None;
    let mut stable = 0;
    let mut iterations = 0;
    let stop;
    loop {
        let (r, lhat) = state.e_step()?;
        let objective = lhat + state.log_prior();
        let assign = hard_assignments(r.view());
        let converged_tol = trace
            .last()
            .is_some_and(|prev: &f64| (objective - prev).abs() <= config.tol * prev.abs());
        if prev_assign.as_ref() == Some(&assign) {
            stable += 1;
        } else {
            stable = 0;
        }
        trace.push(objective);
        let reason = if converged_tol {
            Some(StopReason::Tolerance)
        } else if config.stop_on_stable_assignments && stable >= 2 && state.params.n_clusters() > 1 {
            Some(StopReason::StableAssignments)
        } else if iterations >= config.max_iter {
            Some(StopReason::MaxIter)
        } else {
            None
        };
        if let Some(reason) = reason {
            stop = reason;
            let params = state.params.clone();
            return Ok(FitResult {
                params,
                priors: state.priors.clone(),
                responsibilities: r,
                trace,
                quasi_loglik: lhat,
                iterations,
                stop,
                reseeds,
            });
        }
        prev_assign = Some(assign);
        if let MStep::Reseeded(_) = state.m_step(r.view(), None)? {
            reseeds.push(iterations);
            prev_assign = None;
            stable = 0;
        }
        iterations += 1;
    }
}
