//! Synthetic corpora with planted structure.
//!
//! Each generator is deterministic in its seed and returns plain token
//! lists, so the corpora can be fed to any trainer or written to disk.
//!
//! * [`keyword_corpus`]: labeled documents whose classes differ only in a
//!   small class-specific lexicon mixed into a shared Zipfian background,
//!   plus an unlabeled corpus drawn from the same process.
//! * [`disjoint_topic_corpus`]: unlabeled documents with the same
//!   background but unrelated lexicons.
//! * [`synonym_corpus`]: pairs of tokens used in identical contexts.
//! * [`capital_corpus`]: country and city tokens whose relation is constant
//!   across pairs.
//! * [`morphology_corpus`]: inflected words sharing stems and contexts.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::corpus::LabeledDoc;

/// Parameters of [`keyword_corpus`].
#[derive(Clone, Debug, PartialEq)]
pub struct KeywordCorpusConfig {
    pub classes: usize,
    pub docs_per_class: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Size of the shared background vocabulary.
    pub background: usize,
    /// Zipf exponent of the background distribution.
    pub zipf_exponent: f64,
    /// Size of each class lexicon.
    pub lexicon: usize,
    /// Probability that a token is drawn from the class lexicon.
    pub keyword_rate: f64,
    /// Number of unlabeled documents.
    pub unlabeled: usize,
}

impl Default for KeywordCorpusConfig {
    fn default() -> Self {
        KeywordCorpusConfig {
            classes: 3,
            docs_per_class: 200,
            min_len: 30,
            max_len: 80,
            background: 1000,
            zipf_exponent: 1.0,
            lexicon: 30,
            keyword_rate: 0.15,
            unlabeled: 50_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeywordCorpus {
    pub labeled: Vec<LabeledDoc>,
    pub unlabeled: Vec<Vec<String>>,
}

/// Class names; three classes are named after translational research
/// stages.
pub fn class_names(classes: usize) -> Vec<String> {
    if classes == 3 {
        return vec!["T0".into(), "T1T2".into(), "T3T4".into()];
    }
    (0..classes).map(|c| format!("C{c}")).collect()
}

pub fn background_token(i: usize) -> String {
    format!("bg{i:04}")
}

/// Keyword `j` of class `c`.
pub fn keyword_token(c: usize, j: usize) -> String {
    format!("k{c}w{j:02}")
}

struct DocSampler {
    background: Zipf<f64>,
    cfg: KeywordCorpusConfig,
}

impl DocSampler {
    fn new(cfg: &KeywordCorpusConfig) -> Self {
        DocSampler {
            background: Zipf::new(cfg.background as f64, cfg.zipf_exponent).expect("valid Zipf parameters"),
            cfg: cfg.clone(),
        }
    }

    fn doc(&self, rng: &mut ChaCha8Rng, keyword: impl Fn(usize) -> String) -> Vec<String> {
        let len = rng.random_range(self.cfg.min_len..=self.cfg.max_len);
        (0..len)
            .map(|_| {
                if rng.random_bool(self.cfg.keyword_rate) {
                    keyword(rng.random_range(0..self.cfg.lexicon))
                } else {
                    background_token(self.background.sample(rng) as usize - 1)
                }
            })
            .collect()
    }
}

/// Labeled documents in class-major order followed by an unlabeled corpus.
///
/// Every token is a class keyword (uniform over the class lexicon) with
/// probability `keyword_rate`, otherwise a Zipf-distributed background
/// token. Unlabeled documents pick their class uniformly at random.
pub fn keyword_corpus(cfg: &KeywordCorpusConfig, seed: u64) -> KeywordCorpus {
    let sampler = DocSampler::new(cfg);
    let names = class_names(cfg.classes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labeled = Vec::with_capacity(cfg.classes * cfg.docs_per_class);
    for (c, name) in names.iter().enumerate() {
        for _ in 0..cfg.docs_per_class {
            labeled.push(LabeledDoc {
                label: name.clone(),
                tokens: sampler.doc(&mut rng, |j| keyword_token(c, j)),
            });
        }
    }
    let unlabeled = (0..cfg.unlabeled)
        .map(|_| {
            let c = rng.random_range(0..cfg.classes);
            sampler.doc(&mut rng, |j| keyword_token(c, j))
        })
        .collect();
    KeywordCorpus { labeled, unlabeled }
}

/// Unlabeled documents from the same background as [`keyword_corpus`]
/// whose topical lexicons share no token with the class lexicons.
pub fn disjoint_topic_corpus(cfg: &KeywordCorpusConfig, seed: u64) -> Vec<Vec<String>> {
    let sampler = DocSampler::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cfg.unlabeled)
        .map(|_| {
            let c = rng.random_range(0..cfg.classes);
            sampler.doc(&mut rng, |j| format!("x{c}w{j:02}"))
        })
        .collect()
}

/// Corpus in which both tokens of each pair occur in the same contexts.
#[derive(Clone, Debug, PartialEq)]
pub struct SynonymCorpus {
    pub docs: Vec<Vec<String>>,
    pub pairs: Vec<(String, String)>,
}

/// Every sentence holds one member of a random pair (either with equal
/// probability) and eight context tokens drawn from that pair's own
/// distribution over a shared pool of 200 tokens.
pub fn synonym_corpus(pairs: usize, sentences: usize, seed: u64) -> SynonymCorpus {
    const POOL: usize = 200;
    const PROFILE: usize = 50;
    const CONTEXT: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<String> = (0..POOL).map(|i| format!("p{i:03}")).collect();
    let profiles: Vec<Vec<&String>> = (0..pairs)
        .map(|_| pool.choose_multiple(&mut rng, PROFILE).collect())
        .collect();
    let names: Vec<(String, String)> = (0..pairs).map(|i| (format!("s{i}a"), format!("s{i}b"))).collect();

    let docs = (0..sentences)
        .map(|_| {
            let i = rng.random_range(0..pairs);
            let mut s: Vec<String> = (0..CONTEXT)
                .map(|_| (*profiles[i].choose(&mut rng).expect("non-empty profile")).clone())
                .collect();
            let word = if rng.random_bool(0.5) { &names[i].0 } else { &names[i].1 };
            s.insert(rng.random_range(0..=CONTEXT), word.clone());
            s
        })
        .collect();
    SynonymCorpus { docs, pairs: names }
}

/// Corpus of `(country, capital)` token pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct CapitalCorpus {
    pub docs: Vec<Vec<String>>,
    pub pairs: Vec<(String, String)>,
}

/// Each pair owns four region tokens. Country sentences combine the
/// country with region tokens and generic country vocabulary, city
/// sentences do the same with city vocabulary, and a template sentence
/// `capital of <country> is <city>` links the two.
pub fn capital_corpus(pairs: usize, sentences_per_pair: usize, seed: u64) -> CapitalCorpus {
    const REGION: usize = 4;
    const ROLE: usize = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<(String, String)> = (0..pairs)
        .map(|i| (format!("country{i}"), format!("city{i}")))
        .collect();
    let region: Vec<Vec<String>> = (0..pairs)
        .map(|i| (0..REGION).map(|j| format!("r{i}x{j}")).collect())
        .collect();
    let country_role: Vec<String> = (0..ROLE).map(|j| format!("nation{j}")).collect();
    let city_role: Vec<String> = (0..ROLE).map(|j| format!("town{j}")).collect();

    let mut docs = Vec::with_capacity(pairs * sentences_per_pair);
    for _ in 0..sentences_per_pair {
        for (i, (country, city)) in names.iter().enumerate() {
            let kind = rng.random_range(0..5);
            let mut s = Vec::with_capacity(7);
            let (head, role) = match kind {
                0 | 1 => (country, &country_role),
                2 | 3 => (city, &city_role),
                _ => {
                    docs.push(vec![
                        "capital".into(),
                        "of".into(),
                        country.clone(),
                        "is".into(),
                        city.clone(),
                    ]);
                    continue;
                }
            };
            s.push(head.clone());
            for _ in 0..3 {
                s.push(region[i].choose(&mut rng).expect("non-empty region").clone());
            }
            for _ in 0..3 {
                s.push(role.choose(&mut rng).expect("non-empty role").clone());
            }
            let k = rng.random_range(0..s.len());
            s.swap(0, k);
            docs.push(s);
        }
    }
    CapitalCorpus { docs, pairs: names }
}

/// Corpus of inflected words.
#[derive(Clone, Debug, PartialEq)]
pub struct MorphologyCorpus {
    pub docs: Vec<Vec<String>>,
    /// Every inflected form that occurs in `docs`.
    pub words: Vec<String>,
}

const SUFFIXES: [&str; 5] = ["", "s", "ed", "ing", "er"];

/// Random three-syllable stems, each inflected with five suffixes and tied
/// to one of twelve topics. A sentence picks a topic and mixes inflected
/// forms of that topic's stems with topic context tokens and fillers.
pub fn morphology_corpus(stems: usize, sentences: usize, seed: u64) -> MorphologyCorpus {
    const TOPICS: usize = 12;
    const LEN: usize = 12;
    const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
    const VOWELS: &[u8] = b"aeiou";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut stem_list: Vec<String> = Vec::with_capacity(stems);
    while stem_list.len() < stems {
        let stem: String = (0..3)
            .flat_map(|_| {
                [
                    *CONSONANTS.choose(&mut rng).expect("consonants") as char,
                    *VOWELS.choose(&mut rng).expect("vowels") as char,
                ]
            })
            .collect();
        if !stem_list.contains(&stem) {
            stem_list.push(stem);
        }
    }
    let topic_context: Vec<Vec<String>> = (0..TOPICS)
        .map(|t| (0..10).map(|j| format!("q{t}c{j}")).collect())
        .collect();
    let fillers: Vec<String> = (0..50).map(|j| format!("f{j:02}")).collect();
    let inflect = |stem: &str, suffix: &str| format!("{stem}{suffix}");

    let docs = (0..sentences)
        .map(|_| {
            let t = rng.random_range(0..TOPICS);
            (0..LEN)
                .map(|_| {
                    let u: f64 = rng.random();
                    if u < 0.35 {
                        let s = rng.random_range(0..stems.div_ceil(TOPICS).max(1)) * TOPICS + t;
                        let stem = &stem_list[s % stems];
                        inflect(stem, SUFFIXES.choose(&mut rng).expect("suffixes"))
                    } else if u < 0.8 {
                        topic_context[t].choose(&mut rng).expect("context").clone()
                    } else {
                        fillers.choose(&mut rng).expect("fillers").clone()
                    }
                })
                .collect()
        })
        .collect::<Vec<Vec<String>>>();

    let mut words: Vec<String> = stem_list
        .iter()
        .flat_map(|s| SUFFIXES.iter().map(move |x| inflect(s, x)))
        .filter(|w| docs.iter().any(|d| d.contains(w)))
        .collect();
    words.sort();
    words.dedup();
    MorphologyCorpus { docs, words }
}
