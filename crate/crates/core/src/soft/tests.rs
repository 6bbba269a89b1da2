use approx::assert_abs_diff_eq;
use ndarray::{array, Array2};
use rand::Rng as _;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

use super::*;
use crate::edm::AttributeKind;
use crate::rng;

fn gaussian_params(mu: Array2<f64>, kappa: Vec<f64>, pi: Vec<f64>) -> MixtureParams {
    let j = mu.ncols();
    MixtureParams {
        pi,
        mu,
        alpha: vec![0.0; j],
        kappa,
        families: vec![FamilySpec::gaussian(); j],
    }
}

fn random_matrix(n: usize, j: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::from_seed(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    Array2::from_shape_fn((n, j), |(i, jj)| normal.sample(&mut r) * (1.0 + jj as f64) + if i % 2 == 0 { 3.0 } else { -2.0 })
}

#[test]
fn upsilon_examples() {
    let p = gaussian_params(array![[0.5]], vec![1.0], vec![1.0]);
    let v = upsilon_aux(array![0.5].view(), array![0.5].view(), &p).unwrap();
    assert_abs_diff_eq!(v, -0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-14);

    let p = gaussian_params(array![[1.0, -2.0]], vec![1.0, 1.0], vec![1.0]);
    let v = upsilon_aux(array![1.0, -2.0].view(), array![1.0, -2.0].view(), &p).unwrap();
    assert_abs_diff_eq!(v, -(2.0 * std::f64::consts::PI).ln(), epsilon = 1e-14);

    let p = MixtureParams {
        pi: vec![1.0],
        mu: array![[1.0]],
        kappa: vec![1.0],
        alpha: vec![-1.0],
        families: vec![FamilySpec::for_kind(AttributeKind::PositiveContinuous).unwrap()],
    };
    let v = upsilon_aux(array![1.0].view(), array![1.0].view(), &p).unwrap();
    assert_abs_diff_eq!(v, -0.918939, epsilon = 1e-6);
}

#[test]
fn e_step_symmetry_and_single_component() {
    let x = random_matrix(20, 2, 1);
    let p = gaussian_params(array![[0.0, 1.0], [0.0, 1.0]], vec![1.0, 2.0], vec![0.5, 0.5]);
    let (r, _) = e_step(x.view(), &p).unwrap();
    assert!(r.iter().all(|v| (*v - 0.5).abs() < 1e-15));

    let p = gaussian_params(array![[0.3, 1.0]], vec![1.5, 2.0], vec![1.0]);
    let (r, lhat) = e_step(x.view(), &p).unwrap();
    assert!(r.iter().all(|v| *v == 1.0));
    let direct: f64 = x.outer_iter().map(|row| upsilon_aux(row, p.mu.row(0), &p).unwrap()).sum();
    assert_abs_diff_eq!(lhat, direct, epsilon = 1e-9);
}

#[test]
fn e_step_rejects_collapsed_component() {
    let x = random_matrix(5, 1, 2);
    let p = gaussian_params(array![[0.0], [1.0]], vec![1.0], vec![1.0, 0.0]);
    assert!(matches!(e_step(x.view(), &p), Err(Error::DegenerateComponent { component: 1, .. })));
}

/// Diagonal shared-covariance GMM written out directly.
struct Gmm {
    pi: Vec<f64>,
    mu: Array2<f64>,
    var: Vec<f64>,
}

impl Gmm {
    fn e_step(&self, x: &Array2<f64>) -> Array2<f64> {
        let (n, j) = x.dim();
        let k = self.pi.len();
        let mut r = Array2::zeros((n, k));
        for i in 0..n {
            let logs: Vec<f64> = (0..k)
                .map(|h| {
                    let mut s = self.pi[h].ln();
                    for jj in 0..j {
                        let d = x[[i, jj]] - self.mu[[h, jj]];
                        s += -0.5 * d * d / self.var[jj] - 0.5 * (2.0 * std::f64::consts::PI * self.var[jj]).ln();
                    }
                    s
                })
                .collect();
            let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logs.iter().map(|l| (l - m).exp()).sum();
            for h in 0..k {
                r[[i, h]] = (logs[h] - m).exp() / z;
            }
        }
        r
    }

    fn m_step(&mut self, x: &Array2<f64>, r: &Array2<f64>) {
        let (n, j) = x.dim();
        let k = self.pi.len();
        for h in 0..k {
            let nh: f64 = r.column(h).sum();
            self.pi[h] = nh / n as f64;
            for jj in 0..j {
                self.mu[[h, jj]] = (0..n).map(|i| r[[i, h]] * x[[i, jj]]).sum::<f64>() / nh;
            }
        }
        for jj in 0..j {
            let mut s = 0.0;
            for i in 0..n {
                for h in 0..k {
                    let d = x[[i, jj]] - self.mu[[h, jj]];
                    s += r[[i, h]] * d * d;
                }
            }
            self.var[jj] = s / n as f64;
        }
    }
}

#[test]
fn gaussian_mode_matches_gmm_oracle() {
    let x = random_matrix(50, 3, 3);
    let mu0 = array![[2.5, 0.0, 1.0], [-1.0, 0.5, -2.0]];
    let p = gaussian_params(mu0.clone(), vec![1.0, 2.0, 0.5], vec![0.4, 0.6]);
    let oracle = Gmm {
        pi: p.pi.clone(),
        mu: mu0,
        var: p.kappa.clone(),
    };
    let (r, _) = e_step(x.view(), &p).unwrap();
    let ro = oracle.e_step(&x);
    for (a, b) in r.iter().zip(ro.iter()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
    }
}

#[test]
fn gaussian_mode_iterates_like_gmm() {
    let x = random_matrix(60, 3, 4);
    let mu0 = array![[2.0, 1.0, 1.0], [-1.0, -0.5, -2.0], [0.5, 0.0, 4.0]];
    let p = gaussian_params(mu0.clone(), vec![1.0, 2.0, 0.5], vec![0.3, 0.3, 0.4]);
    let mut oracle = Gmm {
        pi: p.pi.clone(),
        mu: mu0,
        var: p.kappa.clone(),
    };
    let mut state = EmState::new(x.view(), p, Priors::none(3, 3), false).unwrap();
    for _ in 0..15 {
        let (r, _) = state.e_step().unwrap();
        let ro = oracle.e_step(&x);
        for (a, b) in r.iter().zip(ro.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
        state.m_step(r.view(), None).unwrap();
        oracle.m_step(&x, &ro);
        for (a, b) in state.params.mu.iter().zip(oracle.mu.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
        for (a, b) in state.params.kappa.iter().zip(&oracle.var) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
        for (a, b) in state.params.pi.iter().zip(&oracle.pi) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }
}

#[test]
fn pi_update_examples() {
    assert_eq!(m_step_pi(array![[1.0, 0.0], [1.0, 0.0]].view()), vec![1.0, 0.0]);
    assert_eq!(m_step_pi(array![[0.5, 0.5], [0.5, 0.5]].view()), vec![0.5, 0.5]);
    let pi = m_step_pi(array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]].view());
    assert_abs_diff_eq!(pi[0], 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(pi[1], 0.5, epsilon = 1e-15);
}

#[test]
fn mu_update_examples() {
    let x = array![[1.0], [3.0]];
    let r = array![[1.0], [1.0]];
    let p = gaussian_params(array![[0.0]], vec![1.0], vec![1.0]);
    let ml = m_step_mu(x.view(), r.view(), &p, &Priors::none(1, 1)).unwrap();
    assert_eq!(ml[[0, 0]], 2.0);

    let mut zero = Priors::none(1, 1);
    zero.a_mu[[0, 0]] = 5.0;
    assert_eq!(m_step_mu(x.view(), r.view(), &p, &zero).unwrap(), ml);

    let priors = Priors::centred(array![[2.0]], &PriorStrength { b_mu: 1.0, a_kappa: 0.0, b_kappa: 0.0 });
    let map = m_step_mu(array![[4.0]].view(), array![[1.0]].view(), &p, &priors).unwrap();
    assert_eq!(map[[0, 0]], 3.0);

    let empty = m_step_mu(x.view(), array![[1.0, 0.0], [1.0, 0.0]].view(), &gaussian_params(array![[0.0], [0.0]], vec![1.0], vec![0.5, 0.5]), &Priors::none(2, 1));
    assert!(matches!(empty, Err(Error::EmptyCluster { cluster: 1 })));
}

#[test]
fn kappa_update_examples() {
    let x = array![[0.0], [2.0]];
    let r = array![[1.0], [1.0]];
    let p = gaussian_params(array![[1.0]], vec![3.0], vec![1.0]);
    let ml = m_step_kappa(x.view(), r.view(), p.mu.view(), &p, &Priors::none(1, 1));
    assert_abs_diff_eq!(ml[0], 1.0, epsilon = 1e-15);

    let x = array![[1.0], [1.0], [1.0], [1.0]];
    let r = array![[1.0], [1.0], [1.0], [1.0]];
    let priors = Priors::centred(array![[1.0]], &PriorStrength { b_mu: 0.0, a_kappa: 1.0, b_kappa: 1e-9 });
    let k = m_step_kappa(x.view(), r.view(), p.mu.view(), &p, &priors);
    assert_abs_diff_eq!(k[0], 1e-9 / 3.0, epsilon = 1e-20);
}

fn grid_alpha(values: &[f64], fam: &FamilySpec, mu: f64, kappa: f64, lo: f64, hi: f64) -> f64 {
    let mut best = (lo, f64::NEG_INFINITY);
    let steps = ((hi - lo) / 0.01).round() as usize;
    for s in 0..=steps {
        let a = lo + 0.01 * s as f64;
        let ll: f64 = values.iter().map(|x| fam.log_density(*x, mu, kappa, a).unwrap()).sum();
        if ll > best.1 {
            best = (a, ll);
        }
    }
    best.0
}

fn single_cluster_alpha(values: Vec<f64>, kind: AttributeKind) -> (f64, f64, f64) {
    let n = values.len();
    let fam = FamilySpec::for_kind(kind).unwrap();
    let x = Array2::from_shape_vec((n, 1), values.clone()).unwrap();
    let r = Array2::from_elem((n, 1), 1.0);
    let mean = values.iter().sum::<f64>() / n as f64;
    let mu = array![[mean]];
    let alpha0 = fam.initial_alpha();
    let p = MixtureParams {
        pi: vec![1.0],
        mu: mu.clone(),
        kappa: vec![1.0],
        alpha: vec![alpha0],
        families: vec![fam],
    };
    let kappa = m_step_kappa(x.view(), r.view(), mu.view(), &p, &Priors::none(1, 1));
    let alpha = m_step_alpha(x.view(), r.view(), mu.view(), &kappa, &p).unwrap();
    (alpha[0], mean, kappa[0])
}

#[test]
fn alpha_update_gaussian_data() {
    let mut r = rng::from_seed(11);
    let normal = Normal::new(5.0, 2.0).unwrap();
    let values: Vec<f64> = (0..1000).map(|_| normal.sample(&mut r)).collect();
    let (alpha, mean, kappa) = single_cluster_alpha(values.clone(), AttributeKind::RealContinuous);
    assert!((0.0..=0.1).contains(&alpha), "alpha {alpha}");
    let fam = FamilySpec::for_kind(AttributeKind::RealContinuous).unwrap();
    let oracle = grid_alpha(&values, &fam, mean, kappa, 0.0, 1.0);
    assert!((alpha - oracle).abs() <= 0.011, "alpha {alpha} vs grid {oracle}");
}

#[test]
fn alpha_update_poisson_data() {
    let mut r = rng::from_seed(12);
    let pois = Poisson::new(6.0).unwrap();
    let values: Vec<f64> = (0..1000).map(|_| pois.sample(&mut r)).collect();
    let (alpha, mean, kappa) = single_cluster_alpha(values.clone(), AttributeKind::NonNegativeDiscrete);
    assert!((0.0..=0.15).contains(&alpha), "alpha {alpha}");
    let fam = FamilySpec::for_kind(AttributeKind::NonNegativeDiscrete).unwrap();
    let oracle = grid_alpha(&values, &fam, mean, kappa, 0.0, 1.0);
    assert!((alpha - oracle).abs() <= 0.011, "alpha {alpha} vs grid {oracle}");
}

#[test]
fn alpha_update_negative_binomial_data() {
    let mut r = rng::from_seed(13);
    let gamma = Gamma::<f64>::new(1.0, 8.0).unwrap();
    let values: Vec<f64> = (0..2000)
        .map(|_| Poisson::new(gamma.sample(&mut r).max(1e-12)).unwrap().sample(&mut r))
        .collect();
    let (alpha, mean, kappa) = single_cluster_alpha(values.clone(), AttributeKind::NonNegativeDiscrete);
    assert!((alpha - 1.0).abs() <= 0.4, "alpha {alpha}");
    let fam = FamilySpec::for_kind(AttributeKind::NonNegativeDiscrete).unwrap();
    let oracle = grid_alpha(&values, &fam, mean, kappa, 0.0, 3.0);
    assert!((alpha - oracle).abs() <= 0.011, "alpha {alpha} vs grid {oracle}");
}

fn mixed_data(n: usize, seed: u64) -> (Array2<f64>, Vec<FamilySpec>) {
    let mut r = rng::from_seed(seed);
    let kinds = [
        AttributeKind::RealContinuous,
        AttributeKind::PositiveContinuous,
        AttributeKind::NonNegativeDiscrete,
    ];
    let x = Array2::from_shape_fn((n, 3), |(i, j)| {
        let c = (i % 3) as f64;
        match j {
            0 => Normal::new(4.0 * c, 1.0).unwrap().sample(&mut r),
            1 => Gamma::new(3.0, 1.0 + 3.0 * c).unwrap().sample(&mut r),
            _ => Poisson::new(1.0 + 5.0 * c).unwrap().sample(&mut r),
        }
    });
    (x, kinds.iter().map(|k| FamilySpec::for_kind(*k).unwrap()).collect())
}

#[test]
fn em_is_monotone_in_both_modes() {
    let (x, fams) = mixed_data(150, 5);
    for mode in [Mode::Ml, Mode::Map] {
        for seed in 0..4 {
            let cfg = SoftConfig {
                mode,
                seed,
                max_iter: 60,
                stop_on_stable_assignments: false,
                ..SoftConfig::default()
            };
            let fit = fit(x.view(), &fams, 3, &cfg).unwrap();
            for (t, w) in fit.trace.windows(2).enumerate() {
                if fit.reseeds.contains(&t) {
                    continue;
                }
                assert!(w[1] >= w[0] - 1e-8, "{mode:?} seed {seed} step {t}: {} -> {}", w[0], w[1]);
            }
            let rows_ok = fit.responsibilities.outer_iter().all(|r| (r.sum() - 1.0).abs() < 1e-10);
            assert!(rows_ok);
            fit.params.validate().unwrap();
        }
    }
}

#[test]
fn single_component_runs_to_tolerance() {
    // one cluster never changes assignments, so only the tolerance can stop it
    let (x, fams) = mixed_data(90, 6);
    let fit = fit(x.view(), &fams, 1, &SoftConfig::default()).unwrap();
    assert_eq!(fit.stop, StopReason::Tolerance);
    assert_eq!(fit.params.pi, vec![1.0]);
}

#[test]
fn zero_priors_reproduce_ml_exactly() {
    let (x, fams) = mixed_data(120, 7);
    let cfg = SoftConfig {
        mode: Mode::Ml,
        seed: 3,
        ..SoftConfig::default()
    };
    let ml = fit(x.view(), &fams, 3, &cfg).unwrap();
    let seeds = crate::hard::kmeans_pp_init(x.view(), 3, &mut rng::from_seed(3)).unwrap();
    let init = initial_params(x.view(), &fams, &seeds, false);
    let mut zero = Priors::none(3, 3);
    zero.a_mu = init.mu.clone();
    let map = fit_from(x.view(), init, zero, &SoftConfig { mode: Mode::Map, ..cfg }).unwrap();
    assert_eq!(ml.trace, map.trace);
    assert_eq!(ml.params, map.params);
}

#[test]
fn homogeneous_weights_omit_base_measure() {
    let mut r = rng::from_seed(8);
    let gamma = Gamma::new(2.0, 1.5).unwrap();
    let x = Array2::from_shape_fn((40, 3), |_| gamma.sample(&mut r));
    let fam = FamilySpec::for_kind(AttributeKind::PositiveContinuous).unwrap();
    let p = MixtureParams {
        pi: vec![0.3, 0.7],
        mu: array![[1.0, 2.0, 3.0], [4.0, 2.5, 1.5]],
        kappa: vec![0.4; 3],
        alpha: vec![0.7; 3],
        families: vec![fam; 3],
    };
    let state = EmState::new(x.view(), p.clone(), Priors::none(2, 3), true).unwrap();
    let (resp, _) = state.e_step().unwrap();
    for i in 0..40 {
        let logs: Vec<f64> = (0..2)
            .map(|h| {
                let d: f64 = (0..3).map(|j| fam.divergence(x[[i, j]], p.mu[[h, j]], 0.7).unwrap()).sum();
                p.pi[h].ln() - d / 0.4
            })
            .collect();
        let z = logs[0].exp() + logs[1].exp();
        for h in 0..2 {
            assert_abs_diff_eq!(resp[[i, h]], logs[h].exp() / z, epsilon = 1e-12);
        }
    }
    // homogeneous fits keep κ and α tied
    let fit = fit_from(x.view(), p, Priors::none(2, 3), &SoftConfig { mode: Mode::Ml, homogeneous: true, ..SoftConfig::default() }).unwrap();
    assert!(fit.params.kappa.windows(2).all(|w| w[0] == w[1]));
    assert!(fit.params.alpha.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn homogeneous_requires_shared_family() {
    let (x, fams) = mixed_data(30, 9);
    let cfg = SoftConfig { homogeneous: true, ..SoftConfig::default() };
    assert!(matches!(fit(x.view(), &fams, 2, &cfg), Err(Error::InvalidConfig(_))));
}

#[test]
fn relabeling_init_permutes_output() {
    let (x, fams) = mixed_data(120, 10);
    let seeds = crate::hard::kmeans_pp_init(x.view(), 3, &mut rng::from_seed(4)).unwrap();
    let perm = [2usize, 0, 1];
    let permuted: Vec<usize> = perm.iter().map(|&p| seeds[p]).collect();
    let cfg = SoftConfig { mode: Mode::Ml, ..SoftConfig::default() };
    let a = fit_from(x.view(), initial_params(x.view(), &fams, &seeds, false), Priors::none(3, 3), &cfg).unwrap();
    let b = fit_from(x.view(), initial_params(x.view(), &fams, &permuted, false), Priors::none(3, 3), &cfg).unwrap();
    let (la, lb) = (a.assignments(), b.assignments());
    for i in 0..la.len() {
        assert_eq!(perm[lb[i]], la[i]);
    }
}

#[test]
fn data_outside_support_is_rejected() {
    let x = array![[1.0], [-1.0], [2.0]];
    let fam = FamilySpec::for_kind(AttributeKind::PositiveContinuous).unwrap();
    assert!(matches!(fit(x.view(), &[fam], 1, &SoftConfig::default()), Err(Error::Domain(_))));
}

#[test]
fn random_restarts_are_reproducible() {
    let (x, fams) = mixed_data(90, 11);
    let seed = rng::from_seed(0).random::<u64>();
    let cfg = SoftConfig { seed, ..SoftConfig::default() };
    let a = fit(x.view(), &fams, 3, &cfg).unwrap();
    let b = fit(x.view(), &fams, 3, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.trace, b.trace);
}
