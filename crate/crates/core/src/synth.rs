//! Synthetic two-domain review fixture.
//!
//! Domains `A` and `B` draw sentiment words from one shared polarity lexicon,
//! each with its own Zipf ranking of that lexicon, and pad reviews with words
//! from disjoint domain-specific noise vocabularies. Source domain `A` gets a
//! large star-rated corpus and a small gold-labeled one; target domain `B`
//! only a gold-labeled one.
//!
//! The star ratings are wrong on a fixed fraction of reviews, and the errors
//! are tied to a handful of frequent domain-A sentiment words: every
//! mislabeled review contains one of them, no correctly labeled review does.
//! A model fit on ratings alone therefore learns those words backwards, while
//! the breadth of the rated corpus still covers lexicon words that the small
//! gold set never shows.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{GoldLabel, Polarity, RawReview};
use crate::featurize::Encoder;
use crate::trainer::{Convergence, StageConfig, TwoStagePlan};
use crate::Result;

pub const SOURCE_DOMAIN: &str = "A";
pub const TARGET_DOMAIN: &str = "B";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Words per polarity in the shared lexicon.
    pub lexicon_size: usize,
    /// Noise words per domain.
    pub noise_vocab_size: usize,
    pub zipf_exponent: f64,
    /// Rated source reviews left after dropping 3-star ones.
    pub wld_size: usize,
    /// Fraction of rated reviews whose rating contradicts the text.
    pub wld_noise: f64,
    /// Domain-A Zipf ranks (per polarity) of the words that carry the
    /// rating errors.
    pub ambiguous_ranks: Vec<usize>,
    /// Non-neutral gold-labeled source reviews.
    pub source_fld_size: usize,
    /// Non-neutral gold-labeled target reviews. 3333 leaves exactly 500 for
    /// test after an 85/15 split.
    pub target_fld_size: usize,
    /// Extra 3-star / neutral reviews, as a fraction of each corpus.
    pub dropped_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            lexicon_size: 300,
            noise_vocab_size: 400,
            zipf_exponent: 1.0,
            wld_size: 5000,
            wld_noise: 0.2,
            ambiguous_ranks: vec![1, 3, 5, 7],
            source_fld_size: 300,
            target_fld_size: 3333,
            dropped_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFixture {
    /// Star-rated source reviews (including 3-star ones).
    pub source_wld: Vec<RawReview>,
    /// Gold-labeled source reviews (including neutral ones).
    pub source_fld: Vec<RawReview>,
    /// Gold-labeled target reviews (including neutral ones).
    pub target_fld: Vec<RawReview>,
}

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "su", "ta", "ri", "vo", "pe", "zu", "ba", "do", "fi", "gu", "ho", "je",
];

/// Distinct pronounceable pseudo-word for every id.
fn pseudo_word(id: usize) -> String {
    let mut n = id + 4096;
    let mut parts = Vec::new();
    while n > 0 {
        parts.push(SYLLABLES[n % 16]);
        n /= 16;
    }
    parts.reverse();
    parts.concat()
}

struct Domain {
    /// Lexicon word indices by Zipf rank, per polarity (0 = negative).
    ranked: [Vec<usize>; 2],
    noise: Vec<String>,
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    lexicon: [Vec<String>; 2],
    zipf: WeightedIndex<f64>,
    rng: ChaCha8Rng,
    next_id: u64,
}

impl Generator<'_> {
    fn domain(&mut self, noise_offset: usize) -> Domain {
        let mut ranked = [
            (0..self.cfg.lexicon_size).collect::<Vec<_>>(),
            (0..self.cfg.lexicon_size).collect::<Vec<_>>(),
        ];
        ranked.iter_mut().for_each(|r| r.shuffle(&mut self.rng));
        Domain {
            ranked,
            noise: (0..self.cfg.noise_vocab_size)
                .map(|i| pseudo_word(noise_offset + i))
                .collect(),
        }
    }

    /// Zipf draw of a sentiment word, never one of the `excluded` ranks.
    fn sentiment_word(&mut self, domain: &Domain, polarity: usize, excluded: &[usize]) -> String {
        loop {
            let rank = self.zipf.sample(&mut self.rng);
            if !excluded.contains(&rank) {
                return self.lexicon[polarity][domain.ranked[polarity][rank]].clone();
            }
        }
    }

    fn text(
        &mut self,
        domain: &Domain,
        label: Polarity,
        excluded: &[usize],
        forced: Option<String>,
    ) -> String {
        let pol = label.index();
        let mut words: Vec<String> = forced.into_iter().collect();
        let k = self.rng.gen_range(1..=3);
        while words.len() < k {
            words.push(self.sentiment_word(domain, pol, excluded));
        }
        if self.rng.gen_bool(0.2) {
            words.push(self.sentiment_word(domain, 1 - pol, excluded));
        }
        let m = self.rng.gen_range(4..=8);
        for _ in 0..m {
            words.push(domain.noise.choose(&mut self.rng).unwrap().clone());
        }
        words.shuffle(&mut self.rng);
        finish_sentence(words, self.rng.gen_bool(0.5))
    }

    fn neutral_text(&mut self, domain: &Domain) -> String {
        let mut words = vec![
            self.sentiment_word(domain, 0, &[]),
            self.sentiment_word(domain, 1, &[]),
        ];
        for _ in 0..self.rng.gen_range(4..=8) {
            words.push(domain.noise.choose(&mut self.rng).unwrap().clone());
        }
        words.shuffle(&mut self.rng);
        finish_sentence(words, false)
    }

    fn id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn random_label(&mut self) -> Polarity {
        if self.rng.gen_bool(0.5) {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    }

    fn rated(&mut self, domain: &Domain, tag: &str) -> Vec<RawReview> {
        let n = self.cfg.wld_size;
        let noisy_count = (self.cfg.wld_noise * n as f64).round() as usize;
        let mut noisy = vec![false; n];
        noisy[..noisy_count].iter_mut().for_each(|b| *b = true);
        noisy.shuffle(&mut self.rng);
        let amb = self.cfg.ambiguous_ranks.clone();

        let mut out = Vec::with_capacity(n);
        for is_noisy in noisy {
            let truth = self.random_label();
            let (text, label) = if is_noisy {
                let pol = truth.index();
                let rank = *amb.choose(&mut self.rng).expect("ambiguous ranks");
                let word = self.lexicon[pol][domain.ranked[pol][rank]].clone();
                (self.text(domain, truth, &amb, Some(word)), truth.flipped())
            } else {
                (self.text(domain, truth, &amb, None), truth)
            };
            let rating = match label {
                Polarity::Positive => self.rng.gen_range(4..=5),
                Polarity::Negative => self.rng.gen_range(1..=2),
            };
            let id = self.id();
            out.push(RawReview {
                id,
                text,
                rating: Some(rating),
                gold_polarity: None,
                domain: tag.to_string(),
            });
        }
        let dropped = (self.cfg.dropped_fraction * n as f64).round() as usize;
        for _ in 0..dropped {
            let review = RawReview {
                id: self.id(),
                text: self.neutral_text(domain),
                rating: Some(3),
                gold_polarity: None,
                domain: tag.to_string(),
            };
            let at = self.rng.gen_range(0..=out.len());
            out.insert(at, review);
        }
        out
    }

    fn gold(&mut self, domain: &Domain, tag: &str, n: usize) -> Vec<RawReview> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let label = self.random_label();
            let text = self.text(domain, label, &[], None);
            out.push(RawReview {
                id: self.id(),
                text,
                rating: None,
                gold_polarity: Some(label.into()),
                domain: tag.to_string(),
            });
        }
        let dropped = (self.cfg.dropped_fraction * n as f64).round() as usize;
        for _ in 0..dropped {
            let review = RawReview {
                id: self.id(),
                text: self.neutral_text(domain),
                rating: None,
                gold_polarity: Some(GoldLabel::Neutral),
                domain: tag.to_string(),
            };
            let at = self.rng.gen_range(0..=out.len());
            out.insert(at, review);
        }
        out
    }
}

fn finish_sentence(words: Vec<String>, exclaim: bool) -> String {
    let mut text = words.join(" ");
    if let Some(first) = text.get(0..1) {
        let upper = first.to_ascii_uppercase();
        text.replace_range(0..1, &upper);
    }
    text.push(if exclaim { '!' } else { '.' });
    text
}

/// Deterministic fixture for `seed`.
pub fn generate(cfg: &SynthConfig, seed: u64) -> SynthFixture {
    let l = cfg.lexicon_size;
    let weights: Vec<f64> = (0..l)
        .map(|r| 1.0 / ((r + 1) as f64).powf(cfg.zipf_exponent))
        .collect();
    let mut g = Generator {
        cfg,
        lexicon: [
            (0..l).map(|i| pseudo_word(l + i)).collect(),
            (0..l).map(pseudo_word).collect(),
        ],
        zipf: WeightedIndex::new(weights).expect("positive weights"),
        rng: ChaCha8Rng::seed_from_u64(seed),
        next_id: 0,
    };
    let a = g.domain(2 * l);
    let b = g.domain(2 * l + cfg.noise_vocab_size);
    SynthFixture {
        source_wld: g.rated(&a, SOURCE_DOMAIN),
        source_fld: g.gold(&a, SOURCE_DOMAIN, cfg.source_fld_size),
        target_fld: g.gold(&b, TARGET_DOMAIN, cfg.target_fld_size),
    }
}

/// Hashed encoder used for synthetic experiments.
pub fn experiment_encoder() -> Result<Encoder> {
    Encoder::hashed(1 << 16, 2)
}

/// Learning rates used with the synthetic fixture: `(pretrain, train)`.
pub const EXPERIMENT_LEARNING_RATES: (f64, f64) = (0.01, 0.03);

/// Two-stage plan used with the synthetic fixture.
pub fn experiment_plan(seed: u64) -> TwoStagePlan {
    let (pre, train) = EXPERIMENT_LEARNING_RATES;
    TwoStagePlan::new(
        Some(StageConfig::new(pre, 1).with_seed(seed)),
        StageConfig::new(train, 200).with_seed(seed),
        Convergence::default(),
    )
    .expect("valid plan")
}
