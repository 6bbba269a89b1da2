//! Column-compressed evaluation of the per-attribute EM terms.
//!
//! Every attribute is stored as its sorted distinct values plus an index from
//! rows to those values, so discrete attributes cost O(distinct values)
//! rather than O(N) per kernel sweep.

use ndarray::{Array2, ArrayView2};

use crate::edm::{kernels, FamilyClass, FamilySpec};

pub(crate) struct Column {
    pub uniq: Vec<f64>,
    /// ln of each distinct value, NaN where the value is not positive.
    pub ln_uniq: Vec<f64>,
    pub index: Vec<u32>,
    pub counts: Vec<f64>,
}

impl Column {
    pub fn new(values: impl Iterator<Item = f64>) -> Column {
        let values: Vec<f64> = values.collect();
        let mut order: Vec<u32> = (0..values.len() as u32).collect();
        order.sort_by(|&a, &b| values[a as usize].total_cmp(&values[b as usize]));
        let mut uniq = Vec::new();
        let mut counts = Vec::new();
        let mut index = vec![0u32; values.len()];
        for &i in &order {
            let v = values[i as usize];
            if uniq.last() != Some(&v) {
                uniq.push(v);
                counts.push(0.0);
            }
            index[i as usize] = (uniq.len() - 1) as u32;
            *counts.last_mut().unwrap() += 1.0;
        }
        let ln_uniq = uniq.iter().map(|v| if *v > 0.0 { v.ln() } else { f64::NAN }).collect();
        Column {
            uniq,
            ln_uniq,
            index,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.uniq.len()
    }
}

pub(crate) fn columns(data: ArrayView2<f64>) -> Vec<Column> {
    data.columns().into_iter().map(|c| Column::new(c.iter().copied())).collect()
}

/// Responsibility mass per (distinct value, cluster), row-major U×K.
pub(crate) fn aggregate(col: &Column, r: ArrayView2<f64>) -> Vec<f64> {
    let k = r.ncols();
    let mut w = vec![0.0; col.len() * k];
    for (i, row) in r.outer_iter().enumerate() {
        let base = col.index[i] as usize * k;
        for (h, v) in row.iter().enumerate() {
            w[base + h] += v;
        }
    }
    w
}

/// Log-normalizer and scaled divergences of one attribute at every distinct
/// value: `ln[u]` and `sd[u*K + h]`.
pub(crate) fn attribute_terms(
    col: &Column,
    family: &FamilySpec,
    mu: &[f64],
    kappa: f64,
    alpha: f64,
) -> (Vec<f64>, Vec<f64>) {
    let k = mu.len();
    let kernel = PairKernel::new(family, mu, kappa, alpha);
    let mut ln = Vec::with_capacity(col.len());
    let mut sd = vec![0.0; col.len() * k];
    for (u, &x) in col.uniq.iter().enumerate() {
        ln.push(family.log_normalizer_unchecked(x, kappa, alpha));
        kernel.divergences(x, col.ln_uniq[u], &mut sd[u * k..(u + 1) * k]);
    }
    (ln, sd)
}

/// Σ_u [c_u·(−ln_u) + Σ_h w_uh·sd_uh], the negative expected complete-data
/// quasi-log-likelihood contribution of one attribute.
pub(crate) fn expected_cost(
    col: &Column,
    w: &[f64],
    family: &FamilySpec,
    mu: &[f64],
    kappa: f64,
    alpha: f64,
) -> f64 {
    cost_terms(col, w, family, mu, kappa, alpha, false).0
}

/// [`expected_cost`] together with its α-derivative.
pub(crate) fn expected_cost_dalpha(
    col: &Column,
    w: &[f64],
    family: &FamilySpec,
    mu: &[f64],
    kappa: f64,
    alpha: f64,
) -> (f64, f64) {
    cost_terms(col, w, family, mu, kappa, alpha, true)
}

fn cost_terms(
    col: &Column,
    w: &[f64],
    family: &FamilySpec,
    mu: &[f64],
    kappa: f64,
    alpha: f64,
    grad: bool,
) -> (f64, f64) {
    let k = mu.len();
    let kernel = PairKernel::new(family, mu, kappa, alpha);
    let (mut f, mut g) = (0.0, 0.0);
    for (u, &x) in col.uniq.iter().enumerate() {
        let c = col.counts[u];
        f -= c * family.log_normalizer_unchecked(x, kappa, alpha);
        if grad {
            g -= c * family.log_normalizer_dalpha_unchecked(x, kappa, alpha);
        }
        let row = &w[u * k..(u + 1) * k];
        kernel.accumulate(x, col.ln_uniq[u], row, grad, &mut f, &mut g);
    }
    (f, g)
}

/// Scaled divergences d(x, μ_h)/κ for one attribute, with the μ-side work
/// done once per call instead of once per (value, cluster) pair.
struct PairKernel<'a> {
    family: &'a FamilySpec,
    mu: &'a [f64],
    kappa: f64,
    alpha: f64,
    path: Path,
}

enum Path {
    /// Morris split terms at μ and at κμ: (A, B, ∂A, ∂B) per cluster.
    Split {
        plain: Vec<(f64, f64, f64, f64)>,
        scaled: Vec<(f64, f64, f64, f64)>,
    },
    /// Tweedie: ln μ_h and μ_h^α.
    Tweedie { ln_mu: Vec<f64>, mu_a: Vec<f64> },
    Generic,
}

impl<'a> PairKernel<'a> {
    fn new(family: &'a FamilySpec, mu: &'a [f64], kappa: f64, alpha: f64) -> Self {
        let path = match family.class {
            FamilyClass::MorrisCount | FamilyClass::MorrisReal => {
                let terms = |s: f64| -> Vec<_> {
                    mu.iter().map(|&m| kernels::morris_mean_terms(family.class, s * m, alpha)).collect()
                };
                let plain = terms(1.0);
                let scaled = if kappa == 1.0 { plain.clone() } else { terms(kappa) };
                Path::Split { plain, scaled }
            }
            FamilyClass::Tweedie if kernels::tweedie_fast_alpha(alpha) && mu.iter().all(|m| *m > 0.0) => {
                let (ln_mu, mu_a) = mu.iter().map(|m| (m.ln(), (alpha * m.ln()).exp())).unzip();
                Path::Tweedie { ln_mu, mu_a }
            }
            FamilyClass::Tweedie => Path::Generic,
        };
        PairKernel {
            family,
            mu,
            kappa,
            alpha,
            path,
        }
    }

    /// Adds Σ_h w_h·d(x, μ_h)/κ to `f` and, when `grad`, its α-derivative to `g`.
    #[inline]
    fn accumulate(&self, x: f64, ln_x: f64, w: &[f64], grad: bool, f: &mut f64, g: &mut f64) {
        let discrete = self.family.uses_discrete_form(x);
        let inv_k = 1.0 / self.kappa;
        match &self.path {
            Path::Split { plain, scaled } => {
                let (terms, xs) = if discrete { (scaled, self.kappa * x) } else { (plain, x) };
                let (c, dc) = kernels::morris_value_terms(self.family.class, xs, self.alpha);
                for (h, &wt) in w.iter().enumerate() {
                    if wt > 0.0 {
                        let (a, b, da, db) = terms[h];
                        *f += wt * (a + xs * b + c) * inv_k;
                        if grad {
                            *g += wt * (da + xs * db + dc) * inv_k;
                        }
                    }
                }
            }
            Path::Tweedie { ln_mu, mu_a } if x > 0.0 && !discrete => {
                for (h, &wt) in w.iter().enumerate() {
                    if wt > 0.0 {
                        let m = self.mu[h];
                        let (d, dd) = kernels::tweedie_fdf(x / m, ln_x - ln_mu[h], mu_a[h], ln_mu[h], self.alpha);
                        *f += wt * d * inv_k;
                        *g += wt * dd * inv_k;
                    }
                }
            }
            _ => {
                for (h, &wt) in w.iter().enumerate() {
                    if wt > 0.0 {
                        let m = self.mu[h];
                        *f += wt * self.family.scaled_divergence_unchecked(x, m, self.kappa, self.alpha);
                        if grad {
                            *g += wt * self.family.scaled_divergence_dalpha_unchecked(x, m, self.kappa, self.alpha);
                        }
                    }
                }
            }
        }
    }

    /// d(x, μ_h)/κ for every cluster into `out`.
    #[inline]
    fn divergences(&self, x: f64, ln_x: f64, out: &mut [f64]) {
        let discrete = self.family.uses_discrete_form(x);
        let inv_k = 1.0 / self.kappa;
        match &self.path {
            Path::Split { plain, scaled } => {
                let (terms, xs) = if discrete { (scaled, self.kappa * x) } else { (plain, x) };
                let (c, _) = kernels::morris_value_terms(self.family.class, xs, self.alpha);
                for (h, o) in out.iter_mut().enumerate() {
                    let (a, b, _, _) = terms[h];
                    *o = (a + xs * b + c) * inv_k;
                }
            }
            Path::Tweedie { ln_mu, mu_a } if x > 0.0 && !discrete => {
                for (h, o) in out.iter_mut().enumerate() {
                    let m = self.mu[h];
                    *o = kernels::tweedie_fdf(x / m, ln_x - ln_mu[h], mu_a[h], ln_mu[h], self.alpha).0 * inv_k;
                }
            }
            _ => {
                for (h, o) in out.iter_mut().enumerate() {
                    *o = self.family.scaled_divergence_unchecked(x, self.mu[h], self.kappa, self.alpha);
                }
            }
        }
    }
}

/// Σ_u Σ_h w_uh·d(x_u, μ_h | α) with the plain unit divergence.
pub(crate) fn weighted_divergence(col: &Column, w: &[f64], family: &FamilySpec, mu: &[f64], alpha: f64) -> f64 {
    let k = mu.len();
    // with κ = 1 the scaled divergence is the unit divergence
    let kernel = PairKernel::new(family, mu, 1.0, alpha);
    let (mut f, mut g) = (0.0, 0.0);
    for (u, &x) in col.uniq.iter().enumerate() {
        kernel.accumulate(x, col.ln_uniq[u], &w[u * k..(u + 1) * k], false, &mut f, &mut g);
    }
    f
}

/// Weighted sums Σ_u w_uh·x_u and masses Σ_u w_uh per cluster.
pub(crate) fn cluster_moments(col: &Column, w: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut sx = vec![0.0; k];
    let mut mass = vec![0.0; k];
    for (u, &x) in col.uniq.iter().enumerate() {
        for h in 0..k {
            let wt = w[u * k + h];
            sx[h] += wt * x;
            mass[h] += wt;
        }
    }
    (sx, mass)
}

/// Υ_ih assembled from per-attribute terms; returns an N×K matrix.
pub(crate) fn upsilon_matrix(
    cols: &[Column],
    families: &[FamilySpec],
    mu: ArrayView2<f64>,
    kappa: &[f64],
    alpha: &[f64],
) -> Array2<f64> {
    let k = mu.nrows();
    let n = cols.first().map_or(0, |c| c.index.len());
    let mut ups = Array2::<f64>::zeros((n, k));
    let mut mu_col = vec![0.0; k];
    for (j, col) in cols.iter().enumerate() {
        for h in 0..k {
            mu_col[h] = mu[[h, j]];
        }
        let (ln, sd) = attribute_terms(col, &families[j], &mu_col, kappa[j], alpha[j]);
        for (i, mut row) in ups.outer_iter_mut().enumerate() {
            let u = col.index[i] as usize;
            for h in 0..k {
                row[h] += ln[u] - sd[u * k + h];
            }
        }
    }
    ups
}
