//! Substring-matching string kernels.

/// Length of the common extension starting at every `(i, j)` pair.
fn common_extensions(a: &[char], b: &[char]) -> Vec<usize> {
    let m = b.len();
    let mut ext = vec![0usize; (a.len() + 1) * (m + 1)];
    for i in (0..a.len()).rev() {
        for j in (0..m).rev() {
            if a[i] == b[j] {
                ext[i * (m + 1) + j] = 1 + ext[(i + 1) * (m + 1) + j + 1];
            }
        }
    }
    ext
}

/// Constant-weight substring kernel: every common contiguous substring
/// contributes one per pair of occurrences, and the empty substring adds one.
///
/// Longer ordered matches contribute more because each of their substrings
/// matches as well.
pub fn substring_kernel(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let total: usize = common_extensions(&a, &b).iter().sum();
    (total + 1) as f64
}

/// Spectrum kernel: shared contiguous `n`-grams, counted over occurrence
/// multiplicities.
pub fn spectrum_kernel(a: &str, b: &str, n: usize) -> f64 {
    assert!(n >= 1, "spectrum length must be positive");
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    common_extensions(&a, &b).iter().filter(|&&e| e >= n).count() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn ngram_counts(s: &str, n: usize) -> HashMap<Vec<char>, usize> {
        let c: Vec<char> = s.chars().collect();
        let mut out = HashMap::new();
        if c.len() >= n {
            for w in c.windows(n) {
                *out.entry(w.to_vec()).or_insert(0) += 1;
            }
        }
        out
    }

    fn brute_spectrum(a: &str, b: &str, n: usize) -> f64 {
        let ca = ngram_counts(a, n);
        let cb = ngram_counts(b, n);
        ca.iter()
            .map(|(k, v)| v * cb.get(k).copied().unwrap_or(0))
            .sum::<usize>() as f64
    }

    fn brute_substrings(a: &str, b: &str) -> f64 {
        let len = a.chars().count().max(b.chars().count());
        1.0 + (1..=len).map(|n| brute_spectrum(a, b, n)).sum::<f64>()
    }

    #[test]
    fn spectrum_examples() {
        assert_eq!(spectrum_kernel("ab", "ab", 2), 1.0);
        assert_eq!(spectrum_kernel("abc", "xbz", 2), 0.0);
        assert_eq!(spectrum_kernel("aaa", "aa", 2), 2.0);
    }

    #[test]
    fn substring_kernel_term_pairs() {
        assert_eq!(substring_kernel("inner coat", "in the mother cell"), 22.0);
        assert_eq!(substring_kernel("inner coat", "initiation of sporulation"), 27.0);
    }

    #[test]
    fn substring_kernel_prefers_ordered_matches() {
        assert!(substring_kernel("abcd", "abcd") > substring_kernel("abcd", "dcba"));
        assert!(substring_kernel("abcd", "dcba") > substring_kernel("abcd", "wxyz"));
    }

    proptest! {
        #[test]
        fn spectrum_matches_enumeration(a in "[abc]{10}", b in "[abc]{10}", n in 1usize..5) {
            prop_assert_eq!(spectrum_kernel(&a, &b, n), brute_spectrum(&a, &b, n));
        }

        #[test]
        fn substring_matches_enumeration(a in "[ab ]{0,12}", b in "[ab ]{0,12}") {
            prop_assert_eq!(substring_kernel(&a, &b), brute_substrings(&a, &b));
            prop_assert_eq!(substring_kernel(&a, &b), substring_kernel(&b, &a));
        }
    }
}
