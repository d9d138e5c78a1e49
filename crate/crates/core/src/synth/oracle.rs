//! Brute-force reference implementations.
//!
//! Each function restates one production operation in the most direct form
//! and depends on nothing outside this file except plain input data.

/// Raw dot products by triple loop, over `n` patches of `dim` channels.
pub fn naive_affinity(data: &[f32], n: usize, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0f64;
            for c in 0..dim {
                acc += data[i * dim + c] as f64 * data[j * dim + c] as f64;
            }
            out[i * n + j] = acc;
        }
    }
    out
}

/// Per-row min-max normalization with the constant-row rule.
pub fn naive_normalize(raw: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let row = &raw[i * n..(i + 1) * n];
        let mut lo = row[0];
        let mut hi = row[0];
        for &v in row {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        for j in 0..n {
            out[i * n + j] = if hi == lo {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            } else {
                (row[j] - lo) / (hi - lo)
            };
        }
    }
    out
}

/// `(tpr, fpr)` by counting every patch; `None` when either area is empty.
pub fn naive_tpr_fpr(active: &[bool], labels: &[u16], obj: u16) -> Option<(f64, f64)> {
    let mut in_obj = 0;
    let mut out_obj = 0;
    let mut tp = 0;
    let mut fp = 0;
    for k in 0..labels.len() {
        if labels[k] == obj {
            in_obj += 1;
            if active[k] {
                tp += 1;
            }
        } else {
            out_obj += 1;
            if active[k] {
                fp += 1;
            }
        }
    }
    if in_obj == 0 || out_obj == 0 {
        return None;
    }
    Some((tp as f64 / in_obj as f64, fp as f64 / out_obj as f64))
}

fn adjacent(a: usize, b: usize, w: usize, eight: bool) -> bool {
    let (ar, ac) = ((a / w) as i64, (a % w) as i64);
    let (br, bc) = ((b / w) as i64, (b % w) as i64);
    let (dr, dc) = ((ar - br).abs(), (ac - bc).abs());
    if eight {
        dr <= 1 && dc <= 1 && (dr, dc) != (0, 0)
    } else {
        dr + dc == 1
    }
}

/// Connected component of `seed` among `allowed` cells by repeated sweeps
/// until nothing changes.
pub fn flood_fill_component(allowed: &[bool], seed: usize, w: usize, eight: bool) -> Vec<bool> {
    let n = allowed.len();
    let mut inside = vec![false; n];
    if !allowed[seed] {
        return inside;
    }
    inside[seed] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for p in 0..n {
            if inside[p] || !allowed[p] {
                continue;
            }
            if (0..n).any(|q| inside[q] && adjacent(p, q, w, eight)) {
                inside[p] = true;
                changed = true;
            }
        }
    }
    inside
}

/// One spread step: for each candidate outside the segment, recompute the
/// mean affinity over the segment and test adjacency against every member.
pub fn naive_spread_step(
    values: &[f64],
    n: usize,
    w: usize,
    segment: &[usize],
    threshold: f64,
    eight: bool,
) -> Vec<usize> {
    let mut added = Vec::new();
    for p in 0..n {
        if segment.contains(&p) {
            continue;
        }
        let mut total = 0.0;
        for &s in segment {
            total += values[s * n + p];
        }
        let mean = total / segment.len() as f64;
        let touches = segment.iter().any(|&s| adjacent(p, s, w, eight));
        if mean >= threshold && touches {
            added.push(p);
        }
    }
    added
}

fn naive_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Spearman by counting ranks and a textbook Pearson formula.
pub fn naive_spearman(x: &[f64], y: &[f64]) -> f64 {
    let rx = naive_ranks(x);
    let ry = naive_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for k in 0..rx.len() {
        num += (rx[k] - mx) * (ry[k] - my);
        dx += (rx[k] - mx).powi(2);
        dy += (ry[k] - my).powi(2);
    }
    num / (dx * dy).sqrt()
}
