/// Costs of the three edit operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevenshteinWeights {
    pub insert: f64,
    pub delete: f64,
    pub substitute: f64,
}

impl Default for LevenshteinWeights {
    fn default() -> Self {
        LevenshteinWeights {
            insert: 1.0,
            delete: 1.0,
            substitute: 1.0,
        }
    }
}

impl LevenshteinWeights {
    pub fn new(insert: f64, delete: f64, substitute: f64) -> Option<Self> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        (ok(insert) && ok(delete) && ok(substitute)).then_some(LevenshteinWeights {
            insert,
            delete,
            substitute,
        })
    }
}

/// Weighted Levenshtein distance over Unicode scalar values.
///
/// `D[i][j] = min(D[i-1][j] + w_insert, D[i-1][j-1] + w_substitute·[a_i ≠ b_j],
/// D[i][j-1] + w_delete)` with `D[0][0] = 0`.
pub fn levenshtein(a: &str, b: &str, w: LevenshteinWeights) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    // single rolling row over j
    let mut prev: Vec<f64> = (0..=b.len()).map(|j| j as f64 * w.delete).collect();
    let mut cur = vec![0.0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i as f64 * w.insert;
        for j in 1..=b.len() {
            let sub = if a[i - 1] == b[j - 1] { 0.0 } else { w.substitute };
            cur[j] = (prev[j] + w.insert)
                .min(prev[j - 1] + sub)
                .min(cur[j - 1] + w.delete);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
