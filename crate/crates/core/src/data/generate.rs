use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::edm::{AttributeKind, FamilyClass, FamilySpec};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::soft::MixtureParams;

/// Named members the generator samples from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Member {
    Gaussian,
    Gamma,
    InverseGaussian,
    Poisson,
    NegativeBinomial,
}

impl Member {
    pub const ALL: [Member; 5] = [
        Member::Gaussian,
        Member::Gamma,
        Member::InverseGaussian,
        Member::Poisson,
        Member::NegativeBinomial,
    ];

    pub fn declared_kind(self) -> AttributeKind {
        match self {
            Member::Gaussian => AttributeKind::RealContinuous,
            Member::Gamma | Member::InverseGaussian => AttributeKind::PositiveContinuous,
            Member::Poisson | Member::NegativeBinomial => AttributeKind::NonNegativeDiscrete,
        }
    }

    pub fn family(self) -> FamilySpec {
        FamilySpec::for_kind(self.declared_kind()).expect("declared kinds are modelled directly")
    }

    pub fn alpha(self) -> f64 {
        match self {
            Member::Gaussian | Member::Gamma | Member::Poisson => 0.0,
            Member::InverseGaussian => -1.0,
            Member::NegativeBinomial => 1.0,
        }
    }

    pub fn is_discrete(self) -> bool {
        matches!(self, Member::Poisson | Member::NegativeBinomial)
    }

    /// Named member matching a fitted (family, α), if any.
    pub fn identify(family: &FamilySpec, alpha: f64) -> Option<Member> {
        let close = |v: f64| (alpha - v).abs() < 1e-9;
        match family.class {
            FamilyClass::MorrisReal if close(0.0) => Some(Member::Gaussian),
            FamilyClass::Tweedie if close(0.0) => Some(Member::Gamma),
            FamilyClass::Tweedie if close(-1.0) => Some(Member::InverseGaussian),
            FamilyClass::MorrisCount if close(0.0) => Some(Member::Poisson),
            FamilyClass::MorrisCount if close(1.0) => Some(Member::NegativeBinomial),
            _ => None,
        }
    }
}

// Michael, Schucany & Haas transform, rearranged so the small root does not
// cancel when the shape is small relative to the mean.
fn inverse_gaussian(mean: f64, shape: f64, rng: &mut Rng) -> f64 {
    loop {
        let v: f64 = rng.sample(StandardNormal);
        let y = mean * v * v;
        let s = (4.0 * shape * y + y * y).sqrt();
        let x = if y > 0.0 {
            mean * (4.0 * shape * y / (s + y)) / (s + y)
        } else {
            mean
        };
        let u: f64 = rng.random();
        let out = if u <= mean / (mean + x) { x } else { mean * mean / x };
        if out > 0.0 && out.is_finite() {
            return out;
        }
    }
}

fn draw_one(member: Member, mu: f64, kappa: f64, rng: &mut Rng) -> f64 {
    match member {
        Member::Gaussian => mu + kappa.sqrt() * rng.sample::<f64, _>(StandardNormal),
        Member::Gamma => {
            let g = Gamma::new(1.0 / kappa, mu * kappa).expect("validated gamma parameters");
            loop {
                let v = g.sample(rng);
                if v > 0.0 {
                    return v;
                }
            }
        }
        Member::InverseGaussian => inverse_gaussian(mu, 1.0 / kappa, rng),
        Member::Poisson => Poisson::new(mu).expect("validated mean").sample(rng),
        Member::NegativeBinomial => {
            let rate = Gamma::new(1.0, mu).expect("validated mean").sample(rng);
            if rate > 0.0 {
                Poisson::new(rate).expect("positive rate").sample(rng)
            } else {
                0.0
            }
        }
    }
}

/// `n` i.i.d. draws with mean μ and variance κ·υ(μ | α) for the member.
pub fn sample_member(member: Member, mu: f64, kappa: f64, n: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    let fam = member.family();
    if !fam.in_mean_domain(mu) {
        return Err(Error::domain(format!("mean {mu} invalid for {member:?}")));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::domain(format!("dispersion {kappa} must be positive")));
    }
    if member.is_discrete() && kappa != 1.0 {
        return Err(Error::domain(format!("{member:?} is sampled with unit dispersion, got {kappa}")));
    }
    Ok((0..n).map(|_| draw_one(member, mu, kappa, rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub n: usize,
    pub j: usize,
    pub k: usize,
    /// Member per attribute; drawn uniformly when absent.
    pub members: Option<Vec<Member>>,
    pub kappa_shape: f64,
    pub kappa_scale: f64,
    pub separation: f64,
    pub dirichlet: f64,
    pub max_proposals: usize,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            n: 1000,
            j: 10,
            k: 4,
            members: None,
            kappa_shape: 1.01,
            kappa_scale: 1.0,
            separation: 0.01,
            dirichlet: 1.0,
            max_proposals: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub dataset: Dataset,
    pub params: MixtureParams,
    pub labels: Vec<usize>,
    pub members: Vec<Member>,
}

fn propose_mean(member: Member, rng: &mut Rng) -> f64 {
    if member == Member::Gaussian {
        rng.random_range(-50.0..50.0)
    } else {
        rng.random_range(0.1f64.ln()..100.0f64.ln()).exp()
    }
}

fn separated(fam: &FamilySpec, alpha: f64, kappa: f64, accepted: &[f64], candidate: f64, threshold: f64) -> bool {
    accepted.iter().all(|&m| {
        let a = fam.log_density(m, candidate, kappa, alpha);
        let b = fam.log_density(candidate, m, kappa, alpha);
        matches!((a, b), (Ok(a), Ok(b)) if a < threshold && b < threshold)
    })
}

fn generate_with(spec: &GeneratorSpec, rng: &mut Rng) -> Result<Generated> {
    if spec.n == 0 || spec.j == 0 || spec.k == 0 {
        return Err(Error::InvalidConfig("generator needs N, J and K of at least 1".into()));
    }
    if let Some(m) = &spec.members {
        if m.len() != spec.j {
            return Err(Error::LengthMismatch { left: m.len(), right: spec.j });
        }
    }
    let conc = Gamma::new(spec.dirichlet, 1.0)
        .map_err(|e| Error::InvalidConfig(format!("dirichlet concentration: {e}")))?;
    let mut pi: Vec<f64> = (0..spec.k).map(|_| conc.sample(rng)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);

    let kappa_draw = Gamma::new(spec.kappa_shape, 1.0 / spec.kappa_scale)
        .map_err(|e| Error::InvalidConfig(format!("dispersion prior: {e}")))?;
    let threshold = spec.separation.ln();
    let mut members = Vec::with_capacity(spec.j);
    let mut kappa = Vec::with_capacity(spec.j);
    let mut mu = Array2::zeros((spec.k, spec.j));
    for j in 0..spec.j {
        let member = match &spec.members {
            Some(m) => m[j],
            None => Member::ALL[rng.random_range(0..Member::ALL.len())],
        };
        let fam = member.family();
        let k_j = if member.is_discrete() {
            1.0
        } else {
            1.0 / kappa_draw.sample(rng)
        };
        // Centroids are accepted one at a time; a partial set that cannot be
        // extended after RESTART_AFTER straight rejections is discarded.
        const RESTART_AFTER: usize = 2000;
        let mut accepted: Vec<f64> = Vec::with_capacity(spec.k);
        let mut proposals = 0;
        let mut misses = 0;
        while accepted.len() < spec.k {
            if proposals >= spec.max_proposals {
                return Err(Error::GeneratorTimeout { attribute: j, proposals });
            }
            proposals += 1;
            let c = propose_mean(member, rng);
            if separated(&fam, member.alpha(), k_j, &accepted, c, threshold) {
                accepted.push(c);
                misses = 0;
            } else {
                misses += 1;
                if misses >= RESTART_AFTER {
                    accepted.clear();
                    misses = 0;
                }
            }
        }
        for (h, m) in accepted.into_iter().enumerate() {
            mu[[h, j]] = m;
        }
        members.push(member);
        kappa.push(k_j);
    }

    let cumulative: Vec<f64> = pi
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let labels: Vec<usize> = (0..spec.n)
        .map(|_| {
            let u: f64 = rng.random();
            cumulative.iter().position(|c| u < *c).unwrap_or(spec.k - 1)
        })
        .collect();
    let mut values = Array2::zeros((spec.n, spec.j));
    for (i, &h) in labels.iter().enumerate() {
        for j in 0..spec.j {
            values[[i, j]] = draw_one(members[j], mu[[h, j]], kappa[j], rng);
        }
    }

    let params = MixtureParams {
        pi,
        mu,
        kappa,
        alpha: members.iter().map(|m| m.alpha()).collect(),
        families: members.iter().map(|m| m.family()).collect(),
    };
    let dataset = Dataset {
        values,
        kinds: members.iter().map(|m| m.declared_kind()).collect(),
        labels: Some(labels.clone()),
        names: Some((0..spec.j).map(|j| format!("x{j}")).collect()),
    };
    Ok(Generated {
        dataset,
        params,
        labels,
        members,
    })
}

/// Heterogeneous mixture with well-separated centroids.
pub fn generate_heterogeneous(spec: &GeneratorSpec) -> Result<Generated> {
    let mut rng = crate::rng::from_seed(spec.seed);
    generate_with(spec, &mut rng)
}

/// One-dimensional mixture of a single named member.
pub fn generate_homogeneous_1d(member: Member, k: usize, n: usize, rng: &mut Rng) -> Result<Generated> {
    let spec = GeneratorSpec {
        n,
        j: 1,
        k,
        members: Some(vec![member]),
        ..GeneratorSpec::default()
    };
    generate_with(&spec, rng)
}

/// Draws `n` rows from a fitted mixture whose attributes are all named members.
pub fn sample_from_params(params: &MixtureParams, n: usize, rng: &mut Rng) -> Result<(Array2<f64>, Vec<usize>)> {
    params.validate()?;
    let members: Vec<Member> = params
        .families
        .iter()
        .zip(&params.alpha)
        .enumerate()
        .map(|(j, (f, a))| {
            Member::identify(f, *a)
                .ok_or_else(|| Error::domain(format!("attribute {j} (alpha {a}) is not a named member")))
        })
        .collect::<Result<_>>()?;
    let mut values = Array2::zeros((n, params.n_attributes()));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut h = params.n_clusters() - 1;
        for (c, p) in params.pi.iter().enumerate() {
            acc += p;
            if u < acc {
                h = c;
                break;
            }
        }
        labels.push(h);
        for (j, m) in members.iter().enumerate() {
            values[[i, j]] = draw_one(*m, params.mu[[h, j]], params.kappa[j], rng);
        }
    }
    Ok((values, labels))
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `q` matched quantile pairs at probabilities 0, 1/(q−1), …, 1.
pub fn qq_quantiles(a: &[f64], b: &[f64], q: usize) -> Result<Vec<(f64, f64)>> {
    if q < 2 {
        return Err(Error::InvalidConfig("at least two quantiles are needed".into()));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidConfig("quantiles of an empty sample".into()));
    }
    let sort = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s
    };
    let (sa, sb) = (sort(a), sort(b));
    Ok((0..q)
        .map(|i| {
            let p = i as f64 / (q - 1) as f64;
            (quantile(&sa, p), quantile(&sb, p))
        })
        .collect())
}
