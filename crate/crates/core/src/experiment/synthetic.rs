//! Seeded synthetic review corpora with class-skewed descriptor words.

use std::io::Write;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Descriptors favoured by outstanding (class 1) reviews, most frequent first.
pub const POSITIVE_TERMS: &[&str] = &[
    "velvety", "juicy", "syrupy", "satiny", "crisply", "brisk", "round", "gentle", "vibrant", "lush", "luminous",
    "layered",
];

/// Descriptors favoured by average (class 0) reviews, most frequent first.
pub const NEGATIVE_TERMS: &[&str] = &[
    "flat", "drying", "dull", "thin", "muted", "papery", "woody", "harsh", "astringent", "bitter", "stale",
    "hollow",
];

/// Class-neutral words, some inflected so the lemmatizer has work to do.
pub const FILLER_TERMS: &[&str] = &[
    "notes", "aroma", "cup", "finish", "acidity", "mouthfeel", "chocolate", "cedar", "citrus", "cherries", "caramel",
    "floral", "roasted", "brewed", "hints", "berries", "flavors", "structure", "sweetness", "body", "tones",
    "cocoa", "almond", "molasses", "lemon", "jasmine", "tangerine", "nib", "spice", "resonant", "leading",
    "shows", "suggests", "carries", "lingering",
];

const STOPWORDS: &[&str] = &["the", "and", "with", "a", "is", "in", "of", "an", "it", "this", "very", "into", "but"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticReview {
    pub id: usize,
    pub review: String,
    pub rating: f64,
    pub label: u8,
}

/// Knobs of the generator; the defaults give a mostly separable corpus
/// with about 62% positives.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDesign {
    pub positive_rate: f64,
    pub min_words: usize,
    pub max_words: usize,
    /// Range of own-class descriptors per review.
    pub own_terms: (usize, usize),
    /// Probability of each of up to two opposite-class descriptors.
    pub cross_rate: f64,
    pub stopword_rate: f64,
}

impl Default for SyntheticDesign {
    fn default() -> Self {
        Self {
            positive_rate: 0.62,
            min_words: 12,
            max_words: 20,
            own_terms: (3, 6),
            cross_rate: 0.25,
            stopword_rate: 0.3,
        }
    }
}

fn zipf_weights(n: usize) -> Vec<f64> {
    (1..=n).map(|r| 1.0 / r as f64).collect()
}

fn render(words: &[&str], rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    let mut sentence_len = 0;
    let target = |rng: &mut ChaCha8Rng| rng.gen_range(4..=7);
    let mut limit = target(rng);
    for (i, w) in words.iter().enumerate() {
        if sentence_len == 0 {
            if !out.is_empty() {
                out.push(' ');
            }
            let mut c = w.chars();
            if let Some(first) = c.next() {
                out.extend(first.to_uppercase());
                out.push_str(c.as_str());
            }
        } else {
            out.push_str(if rng.gen_bool(0.15) { ", " } else { " " });
            out.push_str(w);
        }
        sentence_len += 1;
        if sentence_len >= limit || i + 1 == words.len() {
            out.push(if rng.gen_bool(0.1) { '!' } else { '.' });
            sentence_len = 0;
            limit = target(rng);
        }
    }
    out
}

/// `n_docs` reviews. Ratings fall in `[threshold, threshold + 4]` for class 1
/// and `[threshold - 9, threshold - 1]` for class 0.
pub fn generate(seed: u64, n_docs: usize, threshold: f64, design: &SyntheticDesign) -> Vec<SyntheticReview> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos_dist = WeightedIndex::new(zipf_weights(POSITIVE_TERMS.len())).unwrap();
    let neg_dist = WeightedIndex::new(zipf_weights(NEGATIVE_TERMS.len())).unwrap();
    (1..=n_docs)
        .map(|id| {
            let label = u8::from(rng.gen_bool(design.positive_rate));
            let (own, own_dist, other, other_dist) = if label == 1 {
                (POSITIVE_TERMS, &pos_dist, NEGATIVE_TERMS, &neg_dist)
            } else {
                (NEGATIVE_TERMS, &neg_dist, POSITIVE_TERMS, &pos_dist)
            };
            let len = rng.gen_range(design.min_words..=design.max_words);
            let mut words: Vec<&str> = Vec::with_capacity(len);
            for _ in 0..rng.gen_range(design.own_terms.0..=design.own_terms.1) {
                words.push(own[own_dist.sample(&mut rng)]);
            }
            for _ in 0..2 {
                if rng.gen_bool(design.cross_rate) {
                    words.push(other[other_dist.sample(&mut rng)]);
                }
            }
            while words.len() < len {
                words.push(if rng.gen_bool(design.stopword_rate) {
                    STOPWORDS.choose(&mut rng).unwrap()
                } else {
                    FILLER_TERMS.choose(&mut rng).unwrap()
                });
            }
            words.shuffle(&mut rng);
            let review = render(&words, &mut rng);
            let rating = if label == 1 {
                threshold + f64::from(rng.gen_range(0..=4))
            } else {
                threshold - f64::from(rng.gen_range(1..=9))
            };
            SyntheticReview {
                id,
                review,
                rating,
                label,
            }
        })
        .collect()
}

/// CSV with header `id,review,rating`.
pub fn write_csv<W: Write>(reviews: &[SyntheticReview], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "review", "rating"])?;
    for r in reviews {
        w.write_record([r.id.to_string(), r.review.clone(), r.rating.to_string()])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_bytes() {
        let d = SyntheticDesign::default();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&generate(3, 50, 93.0, &d), &mut a).unwrap();
        write_csv(&generate(3, 50, 93.0, &d), &mut b).unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        write_csv(&generate(4, 50, 93.0, &d), &mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ratings_reproduce_labels() {
        for r in generate(1, 300, 93.0, &SyntheticDesign::default()) {
            assert_eq!(u8::from(r.rating >= 93.0), r.label);
        }
    }

    #[test]
    fn row_count() {
        let mut buf = Vec::new();
        write_csv(&generate(0, 200, 90.0, &SyntheticDesign::default()), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 201);
    }
}
