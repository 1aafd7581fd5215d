//! Seeded synthetic data: Gaussian blobs with known membership and a tagged
//! term corpus with overlapping class vocabularies.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{DataMatrix, LanguageModel, TermDataset};
use crate::error::Result;

/// `per_blob` isotropic normal draws around each center. Rows are named
/// `"<blob> <index>"`, so the blob (from 1) is the class tag.
pub fn gaussian_blobs(seed: u64, centers: &[[f64; 2]], per_blob: usize, spread: f64) -> Result<DataMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, spread).map_err(|e| crate::Error::InvalidParameter(e.to_string()))?;
    let mut rows = Vec::with_capacity(centers.len() * per_blob);
    let mut names = Vec::with_capacity(centers.len() * per_blob);
    for (b, c) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            rows.push(vec![c[0] + normal.sample(&mut rng), c[1] + normal.sample(&mut rng)]);
            names.push(format!("{} {}", b + 1, names.len() + 1));
        }
    }
    DataMatrix::from_rows(rows, Some(names))
}

/// Two blobs of `per_blob` points with spread 0.1 whose centers are 2 apart
/// in a seeded direction, so the gap between them is several blob radii.
pub fn two_blobs(seed: u64, per_blob: usize) -> Result<DataMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let origin = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let other = [origin[0] + 2.0 * angle.cos(), origin[1] + 2.0 * angle.sin()];
    gaussian_blobs(seed, &[origin, other], per_blob, 0.1)
}

/// Vocabulary of the synthetic corpus; every entry is also a radical.
pub const SYNTH_RADICALS: [&str; 38] = [
    "septum", "polar", "asymmetr", "division", "chromosom", "segregat", "sigmaf", "prespor",
    "compartment", "mother", "engulf", "membran", "forespor", "migrat", "fusion", "sigmag",
    "cortex", "peptidogly", "germ", "wall", "coat", "morphogen", "assembl", "crust", "matur",
    "lysis", "releas", "dormant", "resist", "dipicolin", "calcium", "spor", "transcript",
    "promoter", "kinase", "phosphorel", "regulon", "operon",
];

const SUFFIXES: [&str; 7] = ["", "al", "ation", "ing", "s", "e", "ed"];
const FILLERS: [&str; 6] = ["of the", "in the", "during", "at", "from the", "and"];

/// Class sizes of the reference term corpus, six stages.
pub const SYNTH_CLASS_SIZES: [usize; 6] = [227, 360, 379, 379, 303, 245];

/// Tagged terms whose words are built on radicals. Class `c` draws 90% of
/// its words from the 6 radicals starting at `6·c`; the rest come from
/// anywhere, and some radicals contain others ("spor" in "prespor"), so the
/// classes overlap.
pub fn synthetic_terms(seed: u64, class_sizes: &[usize]) -> Result<TermDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nr = SYNTH_RADICALS.len();
    let mut seen = BTreeSet::new();
    let mut terms = Vec::new();
    for (c, &size) in class_sizes.iter().enumerate() {
        let mut made = 0;
        while made < size {
            let words = *[1usize, 2, 2, 3, 3, 4].choose(&mut rng).expect("non-empty");
            let mut parts: Vec<String> = Vec::new();
            for w in 0..words {
                if w > 0 && rng.gen_bool(0.4) {
                    parts.push(FILLERS.choose(&mut rng).expect("non-empty").to_string());
                }
                let r = if rng.gen_bool(0.9) {
                    (6 * c + rng.gen_range(0..6)) % nr
                } else {
                    rng.gen_range(0..nr)
                };
                let suffix = SUFFIXES.choose(&mut rng).expect("non-empty");
                parts.push(format!("{}{}", SYNTH_RADICALS[r], suffix));
            }
            let term = parts.join(" ");
            if seen.insert(term.clone()) {
                terms.push((Some(c as u32 + 1), term));
                made += 1;
            }
        }
    }
    terms.shuffle(&mut rng);
    let features = SYNTH_RADICALS.iter().map(|s| s.to_string()).collect();
    TermDataset::new(terms, features, LanguageModel::TermRadical)
}
