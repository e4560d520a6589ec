//! Templated user intents, a closed-vocabulary tokenizer, and the
//! canonical preference vector of each preference class.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::LinkError;
use crate::reward::PreferenceVector;

/// Token sequence length after padding/truncation.
pub const MAX_TOKENS: usize = 32;
pub const VOCAB_SIZE: usize = 256;
pub const PAD_ID: u16 = 0;
pub const UNK_ID: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PreferenceClass {
    LowBer,
    HighRate,
    Conventional,
}

impl PreferenceClass {
    pub const ALL: [PreferenceClass; 3] = [
        PreferenceClass::LowBer,
        PreferenceClass::HighRate,
        PreferenceClass::Conventional,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            PreferenceClass::LowBer => "LowBER",
            PreferenceClass::HighRate => "HighRate",
            PreferenceClass::Conventional => "Conventional",
        }
    }

    /// Canonical preference vector of the class.
    pub fn preference(self) -> PreferenceVector {
        match self {
            PreferenceClass::LowBer => PreferenceVector::new([0.8, 0.1, 0.1]).unwrap(),
            PreferenceClass::HighRate => PreferenceVector::new([0.1, 0.8, 0.1]).unwrap(),
            PreferenceClass::Conventional => PreferenceVector::uniform(),
        }
    }
}

pub fn class_to_p(class: PreferenceClass) -> PreferenceVector {
    class.preference()
}

impl fmt::Display for PreferenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PreferenceClass {
    type Err = LinkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| LinkError::Parse(format!("unknown preference class `{s}`")))
    }
}

const LOW_BER_TEMPLATES: &[&str] = &[
    "i need maximum reliability in {scene}, errors are unacceptable",
    "please keep the bit error rate as low as possible in {scene}",
    "we send control commands from {scene} and every bit must arrive correct",
    "reliability matters most to me while operating in {scene}",
    "transmit medical records from {scene} without any errors",
    "make the link robust in {scene} even if it gets slower",
    "data integrity is critical for our sensors in {scene}",
    "i can accept a slow link in {scene} but not corrupted packets",
    "safety messages in {scene} need a very robust and reliable connection",
    "minimize errors for the telemetry in {scene}",
    "accurate delivery is essential for payments from {scene}",
];

const HIGH_RATE_TEMPLATES: &[&str] = &[
    "i want the highest possible throughput in {scene}",
    "maximize the data rate for video streaming in {scene}",
    "we need fast downloads while moving through {scene}",
    "push as many bits per second as you can in {scene}",
    "speed is everything for our uploads from {scene}",
    "give me maximum bandwidth for large files in {scene}",
    "high rate transfer matters most in {scene}, some loss is fine",
    "stream high definition video from {scene} as quickly as possible",
    "throughput is the priority for the backhaul in {scene}",
    "send bulk data fast in {scene}",
    "i want quick downloads of big games in {scene}",
];

const CONVENTIONAL_TEMPLATES: &[&str] = &[
    "use a standard configuration in {scene}",
    "just give me a balanced link in {scene}",
    "no special requirements for this session in {scene}",
    "a typical everyday connection in {scene} is fine",
    "default settings are okay for {scene}",
    "set up a normal link for general use in {scene}",
    "nothing particular, an ordinary connection in {scene} will do",
    "keep things balanced between speed and reliability in {scene}",
    "a conventional system setup for {scene} please",
    "configure the usual link for {scene}",
    "regular service in {scene} is all i expect",
];

const URBAN_SCENES: &[&str] = &[
    "a busy downtown area",
    "dense city streets",
    "the urban center",
    "a crowded city block",
];
const RURAL_SCENES: &[&str] = &[
    "the open countryside",
    "a quiet rural village",
    "remote farmland",
    "the rural area",
];
const HIGHWAY_SCENES: &[&str] = &[
    "the highway",
    "a car on the motorway",
    "the highway corridor",
    "a moving vehicle on the expressway",
];
const GENERIC_SCENES: &[&str] = &["this environment"];

/// Interaction words that do not appear in templates but are common in
/// free-form queries.
const EXTRA_WORDS: &[&str] = &[
    "urban", "rural", "flat", "maximal", "minimal", "lowest", "highest", "reliable", "reliably",
    "error", "throughput", "rate", "fast", "faster", "latency", "complexity", "simple", "cheap",
    "power", "battery", "want", "need", "my", "our", "it", "be", "should",
];

pub fn templates(class: PreferenceClass) -> &'static [&'static str] {
    match class {
        PreferenceClass::LowBer => LOW_BER_TEMPLATES,
        PreferenceClass::HighRate => HIGH_RATE_TEMPLATES,
        PreferenceClass::Conventional => CONVENTIONAL_TEMPLATES,
    }
}

/// Keywords that mark each class.
pub fn class_lexicon(class: PreferenceClass) -> &'static [&'static str] {
    match class {
        PreferenceClass::LowBer => &[
            "reliability", "reliable", "error", "errors", "robust", "integrity", "correct",
            "corrupted", "accurate",
        ],
        PreferenceClass::HighRate => &[
            "throughput", "rate", "fast", "speed", "bandwidth", "quickly", "quick", "streaming",
            "stream", "bits",
        ],
        PreferenceClass::Conventional => &[
            "standard", "balanced", "typical", "default", "normal", "ordinary", "conventional",
            "usual", "regular", "requirements",
        ],
    }
}

/// Scenario descriptors interpolated into templates.
pub fn scene_descriptors(scenario: &str) -> &'static [&'static str] {
    match scenario.to_ascii_lowercase().as_str() {
        "urban" => URBAN_SCENES,
        "rural" => RURAL_SCENES,
        "highway" => HIGHWAY_SCENES,
        _ => GENERIC_SCENES,
    }
}

fn split_words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_ascii_lowercase())
}

/// Fixed vocabulary; index `i` holds the word with token id `i + 2`.
pub fn vocabulary() -> &'static [String] {
    static VOCAB: OnceLock<Vec<String>> = OnceLock::new();
    VOCAB.get_or_init(|| {
        let mut words = BTreeSet::new();
        let sources = PreferenceClass::ALL
            .iter()
            .flat_map(|c| templates(*c).iter().chain(class_lexicon(*c)))
            .chain(URBAN_SCENES)
            .chain(RURAL_SCENES)
            .chain(HIGHWAY_SCENES)
            .chain(GENERIC_SCENES)
            .chain(EXTRA_WORDS);
        for text in sources {
            for w in split_words(&text.replace("{scene}", " ")) {
                words.insert(w);
            }
        }
        let words: Vec<String> = words.into_iter().collect();
        assert!(words.len() + 2 <= VOCAB_SIZE, "vocabulary overflow: {}", words.len());
        words
    })
}

pub fn word_id(word: &str) -> u16 {
    vocabulary()
        .binary_search_by(|w| w.as_str().cmp(word))
        .map(|i| i as u16 + 2)
        .unwrap_or(UNK_ID)
}

/// Lowercases, splits on anything that is not an ASCII letter or digit, maps
/// words through the vocabulary, and pads/truncates to [`MAX_TOKENS`].
pub fn tokenize(text: &str) -> Vec<u16> {
    let mut ids: Vec<u16> = split_words(text).map(|w| word_id(&w)).take(MAX_TOKENS).collect();
    ids.resize(MAX_TOKENS, PAD_ID);
    ids
}

/// Space-joined words of a token sequence (padding dropped).
pub fn detokenize(ids: &[u16]) -> String {
    ids.iter()
        .filter(|&&id| id != PAD_ID)
        .map(|&id| match id {
            UNK_ID => "<unk>",
            _ => vocabulary()
                .get(id as usize - 2)
                .map(String::as_str)
                .unwrap_or("<unk>"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntentSample {
    pub text: String,
    pub class: PreferenceClass,
    pub scenario: String,
    pub tokens: Vec<u16>,
}

/// Draws one templated intent. Deterministic in its arguments.
pub fn generate_intent(class: PreferenceClass, scenario: &str, seed: u64) -> IntentSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = templates(class);
    let template = pool[rng.random_range(0..pool.len())];
    let scenes = scene_descriptors(scenario);
    let scene = scenes[rng.random_range(0..scenes.len())];
    let text = template.replace("{scene}", scene);
    let tokens = tokenize(&text);
    IntentSample {
        text,
        class,
        scenario: scenario.to_string(),
        tokens,
    }
}

/// Class-balanced corpus cycling through the classes and the given scenarios.
pub fn generate_corpus(n: usize, scenarios: &[&str], seed: u64) -> Vec<IntentSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let class = PreferenceClass::ALL[i % 3];
            let scenario = scenarios[(i / 3) % scenarios.len()];
            generate_intent(class, scenario, rng.random())
        })
        .collect()
}

/// `class<TAB>scenario<TAB>text` lines.
pub fn export_corpus(samples: &[IntentSample]) -> String {
    samples
        .iter()
        .map(|s| format!("{}\t{}\t{}\n", s.class, s.scenario, s.text))
        .collect()
}
