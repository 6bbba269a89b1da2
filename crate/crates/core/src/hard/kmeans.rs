use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct KMeansConfig {
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            max_iter: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub assign: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
    /// Inertia after every Lloyd iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

pub(crate) fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// D² seeding. Returns K row indices of pairwise distinct points.
pub fn kmeans_pp_init(data: ArrayView2<f64>, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let n = data.nrows();
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if n < k {
        return Err(Error::Init(format!("{n} points cannot seed {k} clusters")));
    }
    let mut seeds = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(data.row(i), data.row(seeds[0])))
        .collect();
    while seeds.len() < k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Init(format!(
                "only {} distinct points available for {k} clusters",
                seeds.len()
            )));
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w > 0.0 {
                pick = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
        }
        let next = pick.expect("positive total implies a candidate");
        seeds.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.row(i), data.row(next)));
        }
    }
    Ok(seeds)
}

/// Index of the nearest centroid, lowest index on ties.
pub fn nearest(x: ArrayView1<f64>, centroids: ArrayView2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (h, c) in centroids.outer_iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (h, d);
        }
    }
    best
}

pub fn fit_kmeans(data: ArrayView2<f64>, k: usize, config: &KMeansConfig) -> Result<KMeansResult> {
    let mut rng = crate::rng::from_seed(config.seed);
    let seeds = kmeans_pp_init(data, k, &mut rng)?;
    let mut centroids = data.select(ndarray::Axis(0), &seeds);
    lloyd(data, &mut centroids, config.max_iter)
}

/// Lloyd iterations from the given centroids. A cluster that loses all its
/// points keeps its previous centroid.
pub fn lloyd(data: ArrayView2<f64>, centroids: &mut Array2<f64>, max_iter: usize) -> Result<KMeansResult> {
    let (n, j) = data.dim();
    let k = centroids.nrows();
    let mut assign = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut inertia = 0.0;
        for i in 0..n {
            let (h, d) = nearest(data.row(i), centroids.view());
            inertia += d;
            if assign[i] != h {
                assign[i] = h;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed || iterations >= max_iter {
            break;
        }
        iterations += 1;
        let mut sums = Array2::<f64>::zeros((k, j));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            let mut row = sums.row_mut(assign[i]);
            row += &data.row(i);
        }
        for h in 0..k {
            if counts[h] > 0 {
                let mean = &sums.row(h) / counts[h] as f64;
                centroids.row_mut(h).assign(&mean);
            }
        }
    }
    if trace.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means inertia".into()));
    }
    Ok(KMeansResult {
        inertia: *trace.last().unwrap(),
        assign,
        centroids: centroids.clone(),
        trace,
        iterations,
    })
}
