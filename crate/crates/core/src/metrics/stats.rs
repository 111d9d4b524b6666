use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// Correlations at or above this magnitude count as significant.
pub const SIGNIFICANCE: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spearman {
    pub r: f64,
    /// two-sided p-value
    pub p: f64,
    pub n: usize,
    pub significant: bool,
}

/// 1-based ranks, ties sharing their average rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|a, b| xs[*a].total_cmp(&xs[*b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = avg;
        }
        i = j + 1;
    }
    out
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    (mean, sd)
}

/// Fraction of all orderings of `ry` whose correlation with `rx` is at least
/// as extreme as `r`.
fn exact_p(rx: &[f64], ry: &[f64], r: f64) -> f64 {
    let n = rx.len();
    let ((mx, sx), (my, sy)) = (moments(rx), moments(ry));
    let corr = |dot: f64| (dot / n as f64 - mx * my) / (sx * sy);
    let mut perm = ry.to_vec();
    let mut dot: f64 = rx.iter().zip(&perm).map(|(a, b)| a * b).sum();
    let (mut hits, mut total) = (0u64, 0u64);
    let mut count = |dot: f64| {
        total += 1;
        if corr(dot).abs() >= r.abs() - 1e-12 {
            hits += 1;
        }
    };
    count(dot);
    // Heap's algorithm, updating the dot product on each swap
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            let j = if i % 2 == 0 { 0 } else { c[i] };
            dot += (rx[j] - rx[i]) * (perm[i] - perm[j]);
            perm.swap(i, j);
            count(dot);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

/// Rank correlation of two paired series. The p-value is exact for up to
/// ten pairs and from the t approximation beyond.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Spearman> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::Stats(format!("series lengths differ: {n} vs {}", ys.len())));
    }
    if n < 3 {
        return Err(Error::Stats(format!("need at least 3 pairs, got {n}")));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Stats("series contain non-finite values".into()));
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    // ranks are multiples of 1/2, so doubled ranks give exact integer sums
    let (dx, dy): (Vec<i128>, Vec<i128>) = rx.iter().zip(&ry).map(|(a, b)| ((a * 2.0) as i128, (b * 2.0) as i128)).unzip();
    let nn = n as i128;
    let sum = |v: &[i128]| v.iter().sum::<i128>();
    let cov = nn * dx.iter().zip(&dy).map(|(a, b)| a * b).sum::<i128>() - sum(&dx) * sum(&dy);
    let vx = nn * dx.iter().map(|a| a * a).sum::<i128>() - sum(&dx).pow(2);
    let vy = nn * dy.iter().map(|b| b * b).sum::<i128>() - sum(&dy).pow(2);
    if vx == 0 || vy == 0 {
        return Err(Error::Stats("correlation undefined for a constant series".into()));
    }
    let exact = cov.checked_mul(cov).zip(vx.checked_mul(vy)).is_some_and(|(a, b)| a == b);
    let r = if exact {
        cov.signum() as f64
    } else {
        (cov as f64 / ((vx as f64).sqrt() * (vy as f64).sqrt())).clamp(-1.0, 1.0)
    };
    let p = if n <= 10 {
        exact_p(&rx, &ry, r)
    } else if r.abs() >= 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Stats(e.to_string()))?;
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(Spearman {
        r,
        p,
        n,
        significant: r.abs() >= SIGNIFICANCE,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    /// cluster index (0 or 1) per point
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// within-cluster sum of squares after each assignment step
    pub objective: Vec<f64>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut sse = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (d0, d1) = (dist2(p, &centers[0]), dist2(p, &centers[1]));
            sse += d0.min(d1);
            usize::from(d1 < d0)
        })
        .collect();
    (labels, sse)
}

/// Two-means clustering by Lloyd iteration from a seeded farthest-point start.
pub fn kmeans2(points: &[Vec<f64>], seed: u64) -> Result<KMeans> {
    let dim = points.first().map_or(0, Vec::len);
    if points.len() < 2 || dim == 0 {
        return Err(Error::Stats("two-means needs at least two non-empty points".into()));
    }
    if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::Stats("points must share one dimension and be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..points.len());
    let mut far = (0.0, first);
    for (i, p) in points.iter().enumerate() {
        let d = dist2(p, &points[first]);
        if d > far.0 {
            far = (d, i);
        }
    }
    if far.0 == 0.0 {
        return Err(Error::Stats("all points are identical".into()));
    }
    let mut centers = vec![points[first].clone(), points[far.1].clone()];
    let (mut labels, sse) = assign(points, &centers);
    let mut objective = vec![sse];
    for _ in 0..10_000 {
        for (k, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, l)| **l == k).map(|(p, _)| p).collect();
            if !members.is_empty() {
                *center = (0..dim).map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64).collect();
            }
        }
        let (next, sse) = assign(points, &centers);
        objective.push(sse);
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok(KMeans { labels, centers, objective })
}
