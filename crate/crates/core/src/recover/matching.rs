//! Optimal permutation matching of recovered components against ground truth.

use serde::{Deserialize, Serialize};

use crate::measures::Component;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMatch {
    /// `found[permutation[i]]` is paired with `truth[i]`.
    pub permutation: Vec<usize>,
    /// Largest `|Δξ| / max(1, |ξ|)` over pairs.
    pub max_location_error: f64,
    /// Largest `|Δc| / c`.
    pub max_weight_error: f64,
    pub max_sigma_error: f64,
}

fn location_distance(a: &Component, b: &Component) -> f64 {
    a.xi.iter().zip(&b.xi).map(|(x, y)| (x - y).abs()).sum()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Minimal-cost assignment by `(Σ |Δξ|, Σ |Δc|)` over all permutations; `None` if the counts differ or exceed 8.
pub fn match_components(truth: &[Component], found: &[Component]) -> Option<ComponentMatch> {
    if truth.len() != found.len() || truth.len() > 8 {
        return None;
    }
    let mut best: Option<((f64, f64), Vec<usize>)> = None;
    for perm in permutations(truth.len()) {
        let cost = truth.iter().zip(&perm).fold((0.0, 0.0), |acc, (t, &j)| {
            (
                acc.0 + location_distance(t, &found[j]),
                acc.1 + (t.c - found[j].c).abs(),
            )
        });
        let better = match &best {
            None => true,
            Some((b, _)) => cost.0 < b.0 || (cost.0 == b.0 && cost.1 < b.1),
        };
        if better {
            best = Some((cost, perm));
        }
    }
    let (_, permutation) = best?;
    let mut out = ComponentMatch {
        permutation,
        max_location_error: 0.0,
        max_weight_error: 0.0,
        max_sigma_error: 0.0,
    };
    for (t, &j) in truth.iter().zip(&out.permutation) {
        let f = &found[j];
        for (x, y) in t.xi.iter().zip(&f.xi) {
            out.max_location_error = out.max_location_error.max((x - y).abs() / x.abs().max(1.0));
        }
        out.max_weight_error = out.max_weight_error.max((t.c - f.c).abs() / t.c);
        out.max_sigma_error = out.max_sigma_error.max((t.sigma - f.sigma).abs() / t.sigma);
    }
    Some(out)
}
