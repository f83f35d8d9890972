//! Independent reference implementations used to cross-check the library's
//! metric, ranking, and geometry code. Every function here is deliberately
//! written with a different structure (and, for distance, a different
//! formula) than the code under test, so agreement is meaningful.

/// 1.0 iff any of the first `k` entries is relevant.
pub fn hit_rate(rels: &[bool], k: usize) -> f64 {
    let mut i = 0;
    while i < rels.len() && i < k {
        if rels[i] {
            return 1.0;
        }
        i += 1;
    }
    0.0
}

/// Reciprocal of the first relevant 1-based rank within `k`, else 0.
pub fn reciprocal_rank(rels: &[bool], k: usize) -> f64 {
    for (idx, &r) in rels.iter().enumerate() {
        if idx >= k {
            break;
        }
        if r {
            return 1.0 / (idx + 1) as f64;
        }
    }
    0.0
}

/// Fraction of the first `k` slots that are relevant (missing slots count
/// as irrelevant).
pub fn precision(rels: &[bool], k: usize) -> f64 {
    let mut hits = 0u64;
    for (idx, &r) in rels.iter().enumerate() {
        if idx >= k {
            break;
        }
        if r {
            hits += 1;
        }
    }
    hits as f64 / k as f64
}

fn dcg(gains: &[f64], k: usize) -> f64 {
    let mut total = 0.0;
    for (idx, &g) in gains.iter().enumerate() {
        if idx >= k {
            break;
        }
        total += g / ((idx + 2) as f64).log2();
    }
    total
}

/// Binary-gain nDCG@k. The ideal ordering is obtained by literally sorting
/// the gain vector descending and re-running the same DCG sum; a list with
/// no relevant item anywhere scores 0.
pub fn ndcg(rels: &[bool], k: usize) -> f64 {
    let gains: Vec<f64> = rels.iter().map(|&r| if r { 1.0 } else { 0.0 }).collect();
    let mut ideal_gains = gains.clone();
    ideal_gains.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let ideal = dcg(&ideal_gains, k);
    if ideal == 0.0 {
        return 0.0;
    }
    dcg(&gains, k) / ideal
}

/// Classical AP@k: the mean, over relevant positions r <= k, of the
/// precision at cut-off r, normalized by min(total relevant, k).
pub fn average_precision(rels: &[bool], k: usize) -> f64 {
    let total_relevant = rels.iter().map(|&r| r as usize).sum::<usize>();
    if total_relevant == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for cut in 1..=k.min(rels.len()) {
        if rels[cut - 1] {
            // Precision at this cut-off, recomputed from scratch.
            acc += rels[..cut].iter().filter(|&&r| r).count() as f64 / cut as f64;
        }
    }
    acc / total_relevant.min(k) as f64
}

/// Mean of precision@k over all lists.
pub fn mean_precision(lists: &[Vec<bool>], k: usize) -> f64 {
    if lists.is_empty() {
        return 0.0;
    }
    lists.iter().fold(0.0, |acc, l| acc + precision(l, k)) / lists.len() as f64
}

/// Late-interaction score: build the full query-token x doc-token dot
/// product matrix, then sum the row maxima. Unlike the library this
/// materializes the matrix first.
pub fn maxsim(query: &[Vec<f64>], doc: &[Vec<f64>]) -> f64 {
    let mut matrix = vec![vec![0.0f64; doc.len()]; query.len()];
    for (qi, q) in query.iter().enumerate() {
        for (di, d) in doc.iter().enumerate() {
            let mut s = 0.0;
            for k in 0..q.len() {
                s += q[k] * d[k];
            }
            matrix[qi][di] = s;
        }
    }
    matrix
        .iter()
        .map(|row| row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)))
        .sum()
}

/// Great-circle distance via the atan2 form of the spherical law of
/// cosines (Vincenty's special case for a sphere) — a different formula
/// than the haversine used by the library, numerically stable at all
/// separations.
pub fn great_circle_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    const RADIUS_KM: f64 = 6371.0088;
    let (phi1, lam1) = (a.0.to_radians(), a.1.to_radians());
    let (phi2, lam2) = (b.0.to_radians(), b.1.to_radians());
    let dlam = lam2 - lam1;
    let y = ((phi2.cos() * dlam.sin()).powi(2)
        + (phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlam.cos()).powi(2))
    .sqrt();
    let x = phi1.sin() * phi2.sin() + phi1.cos() * phi2.cos() * dlam.cos();
    RADIUS_KM * y.atan2(x)
}
