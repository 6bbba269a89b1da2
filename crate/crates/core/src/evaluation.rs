//! Clustering metrics.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::soft::MixtureParams;

/// Counts of (true label, predicted label) pairs. Rows and columns follow the
/// sorted distinct labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    pub counts: Array2<u64>,
    pub true_labels: Vec<usize>,
    pub pred_labels: Vec<usize>,
}

impl ContingencyTable {
    pub fn new(truth: &[usize], pred: &[usize]) -> Result<ContingencyTable> {
        if truth.len() != pred.len() {
            return Err(Error::LengthMismatch {
                left: truth.len(),
                right: pred.len(),
            });
        }
        let index = |xs: &[usize]| -> BTreeMap<usize, usize> {
            let mut m: BTreeMap<usize, usize> = xs.iter().map(|&x| (x, 0)).collect();
            for (i, v) in m.values_mut().enumerate() {
                *v = i;
            }
            m
        };
        let (rows, cols) = (index(truth), index(pred));
        let mut counts = Array2::zeros((rows.len(), cols.len()));
        for (t, p) in truth.iter().zip(pred) {
            counts[[rows[t], cols[p]]] += 1;
        }
        Ok(ContingencyTable {
            counts,
            true_labels: rows.into_keys().collect(),
            pred_labels: cols.into_keys().collect(),
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.sum()
    }
}

fn entropy(counts: impl Iterator<Item = u64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information I(U; V) / √(H(U)·H(V)), natural logs.
///
/// Two single-cluster labelings score 1; otherwise a zero entropy on either
/// side scores 0.
pub fn nmi(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(truth, pred)?;
    if truth.is_empty() {
        return Err(Error::InvalidConfig("NMI of empty labelings".into()));
    }
    let n = table.total() as f64;
    let hu = entropy(table.counts.rows().into_iter().map(|r| r.sum()), n);
    let hv = entropy(table.counts.columns().into_iter().map(|c| c.sum()), n);
    if table.true_labels.len() == 1 && table.pred_labels.len() == 1 {
        return Ok(1.0);
    }
    if hu == 0.0 || hv == 0.0 {
        return Ok(0.0);
    }
    let huv = entropy(table.counts.iter().copied(), n);
    let mi = (hu + hv - huv).max(0.0);
    Ok((mi / (hu * hv).sqrt()).clamp(0.0, 1.0))
}

/// Σ_i ‖x_i − c_{assign_i}‖².
pub fn inertia(data: ArrayView2<f64>, assign: &[usize], centroids: ArrayView2<f64>) -> Result<f64> {
    if assign.len() != data.nrows() {
        return Err(Error::LengthMismatch {
            left: assign.len(),
            right: data.nrows(),
        });
    }
    if centroids.ncols() != data.ncols() {
        return Err(Error::LengthMismatch {
            left: centroids.ncols(),
            right: data.ncols(),
        });
    }
    let mut total = 0.0;
    for (x, &h) in data.outer_iter().zip(assign) {
        if h >= centroids.nrows() {
            return Err(Error::InvalidConfig(format!("cluster index {h} has no centroid")));
        }
        total += crate::hard::kmeans::sq_dist(x, centroids.row(h));
    }
    Ok(total)
}

/// Inertia around the cluster means of the partition.
pub fn partition_inertia(data: ArrayView2<f64>, assign: &[usize]) -> Result<f64> {
    if assign.len() != data.nrows() {
        return Err(Error::LengthMismatch {
            left: assign.len(),
            right: data.nrows(),
        });
    }
    let k = assign.iter().max().map_or(0, |m| m + 1);
    Ok(crate::hard::gmom::inertia(data, assign, k))
}

/// L̂/N for the mixture at `params`.
pub fn per_sample_quasi_loglik(data: ArrayView2<f64>, params: &MixtureParams) -> Result<f64> {
    let (_, lhat) = crate::soft::e_step(data, params)?;
    Ok(lhat / data.nrows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edm::FamilySpec;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn identical_labelings() {
        assert_eq!(nmi(&[0, 0, 1, 2, 2], &[0, 0, 1, 2, 2]).unwrap(), 1.0);
        assert_eq!(nmi(&[3, 3, 3], &[0, 0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn single_predicted_cluster() {
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 0, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn reference_values() {
        // oracle: scikit-learn normalized_mutual_info_score, geometric average
        let cases: [(&[usize], &[usize], f64); 3] = [
            (&[0, 0, 1, 1], &[0, 1, 1, 1], 0.3455920299442113),
            (&[0, 0, 0, 1, 1, 1, 2, 2, 2, 2], &[1, 1, 0, 0, 2, 2, 2, 2, 0, 1], 0.26733692039994567),
            (&[0, 1, 2, 0, 1, 2, 0, 1], &[0, 0, 0, 0, 1, 1, 1, 1], 0.04904167862237576),
        ];
        for (t, p, want) in cases {
            assert!((nmi(t, p).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_entropies() {
        let t = ContingencyTable::new(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap();
        assert_eq!(t.counts, array![[1, 1], [0, 2]]);
        let n = 4.0;
        let hu = entropy(t.counts.rows().into_iter().map(|r| r.sum()), n);
        let hv = entropy(t.counts.columns().into_iter().map(|r| r.sum()), n);
        let huv = entropy(t.counts.iter().copied(), n);
        assert!((hu - 2f64.ln()).abs() < 1e-15);
        assert!((hv - 0.5623351446188083).abs() < 1e-12);
        assert!((huv - 1.0397207708399179).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(nmi(&[0, 1], &[0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn inertia_examples() {
        let x = array![[0.0], [2.0]];
        assert_eq!(inertia(x.view(), &[0, 0], array![[1.0]].view()).unwrap(), 2.0);
        assert_eq!(inertia(x.view(), &[0, 1], x.view()).unwrap(), 0.0);
        assert_eq!(partition_inertia(x.view(), &[0, 0]).unwrap(), 2.0);
    }

    #[test]
    fn per_sample_gaussian() {
        let x = array![[-1.0], [1.0]];
        let params = MixtureParams {
            pi: vec![1.0],
            mu: array![[0.0]],
            kappa: vec![1.0],
            alpha: vec![0.0],
            families: vec![FamilySpec::gaussian()],
        };
        let v = per_sample_quasi_loglik(x.view(), &params).unwrap();
        let want = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5;
        assert!((v - want).abs() < 1e-12);
        assert!((v + 1.4189385332046727).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn nmi_symmetric_and_permutation_invariant(
            pairs in prop::collection::vec((0usize..4, 0usize..5), 1..60),
            shift in 1usize..7,
        ) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let a = nmi(&t, &p).unwrap();
            let b = nmi(&p, &t).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
            let relabelled: Vec<usize> = p.iter().map(|v| (v + shift) * 3 % 17).collect();
            prop_assert!((nmi(&t, &relabelled).unwrap() - a).abs() < 1e-12);
            let distinct = t.iter().collect::<std::collections::BTreeSet<_>>().len();
            if distinct >= 2 {
                prop_assert!((nmi(&t, &t).unwrap() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn inertia_zero_iff_on_centroids(xs in prop::collection::vec(-10.0f64..10.0, 1..20)) {
            let data = Array2::from_shape_vec((xs.len(), 1), xs.clone()).unwrap();
            let assign: Vec<usize> = (0..xs.len()).collect();
            prop_assert_eq!(inertia(data.view(), &assign, data.view()).unwrap(), 0.0);
            let zero = Array2::zeros((xs.len(), 1));
            let v = inertia(data.view(), &assign, zero.view()).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert_eq!(v == 0.0, xs.iter().all(|x| *x == 0.0));
        }
    }
}
