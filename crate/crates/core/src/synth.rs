//! Synthetic English corpora with gold constituency trees and a matching
//! compositional dictionary, for desk-scale runs against the mock
//! translator.
//!
//! Every vocabulary word maps to its own CJK character, so the dictionary is
//! injective and a clean mock translation preserves token multisets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gateway::Dictionary;
use crate::pipeline::CorpusEntry;

const DETERMINERS: &[&str] = &["the", "a", "this", "that"];
const PREPOSITIONS: &[&str] = &["of", "in", "on", "with", "from", "about", "for"];
const ADJECTIVES: &[&str] = &[
    "chummy",
    "bilateral",
    "interesting",
    "old",
    "new",
    "large",
    "small",
    "red",
    "quiet",
    "rapid",
    "foreign",
    "local",
    "public",
    "private",
    "annual",
    "global",
    "bitter",
    "strong",
    "fresh",
    "brief",
    "final",
    "major",
    "rural",
    "urban",
];
const NOUNS: &[&str] = &[
    "talks", "movie", "books", "report", "market", "policy", "leader", "company", "city", "election", "court",
    "budget", "trade", "deal", "factory", "bank", "river", "school", "team", "plan", "price", "crisis", "summit",
    "vote", "law", "army", "farm", "union", "museum", "garden", "bridge", "station", "letter", "festival", "contract",
    "harbor", "village", "program", "survey", "agency",
];
const PROPER: &[&str] = &[
    "Holmes", "Mars", "Paris", "Kim", "Ruth", "Boston", "Tokyo", "Lagos", "Oslo", "Lima",
];
const VERBS: &[&str] = &[
    "held",
    "watched",
    "signed",
    "praised",
    "rejected",
    "built",
    "visited",
    "approved",
    "opened",
    "closed",
    "funded",
    "described",
    "announced",
    "criticized",
    "joined",
    "reviewed",
    "won",
    "lost",
    "sold",
    "bought",
];
const CONJUNCTION: &str = "and";

fn vocabulary() -> impl Iterator<Item = &'static str> {
    DETERMINERS
        .iter()
        .chain(PREPOSITIONS)
        .chain(ADJECTIVES)
        .chain(NOUNS)
        .chain(PROPER)
        .chain(VERBS)
        .chain(std::iter::once(&CONJUNCTION))
        .copied()
}

/// Word to a distinct CJK character, lower-cased keys.
pub fn dictionary() -> Dictionary {
    vocabulary()
        .enumerate()
        .map(|(i, w)| {
            let c = char::from_u32(0x4E00 + 3 * i as u32).expect("CJK block");
            (w.to_lowercase(), c.to_string())
        })
        .collect()
}

struct Generator {
    rng: ChaCha8Rng,
}

impl Generator {
    fn pick(&mut self, words: &[&'static str]) -> &'static str {
        words.choose(&mut self.rng).expect("non-empty word list")
    }

    fn base_np(&mut self) -> String {
        if self.rng.gen_bool(0.15) {
            let n = self.rng.gen_range(1..=2);
            let names: Vec<String> = (0..n).map(|_| format!("(NNP {})", self.pick(PROPER))).collect();
            return format!("(NP {})", names.join(" "));
        }
        let mut parts = Vec::new();
        if self.rng.gen_bool(0.7) {
            parts.push(format!("(DT {})", self.pick(DETERMINERS)));
        }
        for _ in 0..self.rng.gen_range(0..=3) {
            parts.push(format!("(JJ {})", self.pick(ADJECTIVES)));
        }
        parts.push(format!("(NN {})", self.pick(NOUNS)));
        format!("(NP {})", parts.join(" "))
    }

    fn np(&mut self, depth: usize) -> String {
        if depth == 0 {
            return self.base_np();
        }
        let roll: f64 = self.rng.gen();
        if roll < 0.45 {
            let head = self.np(depth - 1);
            let obj = self.np(depth - 1);
            format!("(NP {head} (PP (IN {}) {obj}))", self.pick(PREPOSITIONS))
        } else if roll < 0.55 {
            let left = self.base_np();
            let right = self.base_np();
            format!("(NP {left} (CC {CONJUNCTION}) {right})")
        } else {
            self.base_np()
        }
    }

    fn sentence(&mut self) -> String {
        let subject = self.np(1);
        let object = self.np(2);
        let mut vp = format!("(VBD {}) {object}", self.pick(VERBS));
        if self.rng.gen_bool(0.3) {
            vp.push_str(&format!(" (PP (IN {}) {})", self.pick(PREPOSITIONS), self.np(1)));
        }
        format!("(S {subject} (VP {vp}))")
    }
}

/// `n` sentences `syn-0000`, `syn-0001`, ... Deterministic in `seed`.
pub fn generate_corpus(n: usize, seed: u64) -> Vec<CorpusEntry> {
    let mut generator = Generator {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    (0..n)
        .map(|i| {
            let tree = generator.sentence();
            let parsed = crate::treebank::parse_bracketed(&tree).expect("generated trees are well-formed");
            CorpusEntry {
                id: format!("syn-{i:04}"),
                text: parsed.sentence(),
                tree,
            }
        })
        .collect()
}

/// One random tree with nested NPs (no sentence wrapper constraints), for
/// property tests over extraction.
pub fn random_tree(rng: &mut ChaCha8Rng, depth: usize) -> String {
    let mut generator = Generator {
        rng: ChaCha8Rng::seed_from_u64(rng.gen()),
    };
    if rng.gen_bool(0.5) {
        generator.sentence()
    } else {
        generator.np(depth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn dictionary_is_injective_and_complete() {
        let d = dictionary();
        let targets: BTreeSet<&String> = d.values().collect();
        assert_eq!(targets.len(), d.len());
        for entry in generate_corpus(50, 1) {
            for tok in entry.text.split_whitespace() {
                assert!(d.contains_key(&tok.to_lowercase()), "{tok}");
            }
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate_corpus(20, 9), generate_corpus(20, 9));
        assert_ne!(generate_corpus(20, 9), generate_corpus(20, 10));
    }
}
