use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rti_core::detector::{
    bag_of_words, bow_distance, detect, detect_all, BagOfWords, PunctuationPolicy, Segmentation, TokenizationMode,
};
use rti_core::extract::{ContainerKind, Rti, RtiPair};
use rti_core::gateway::{Origin, Translation, TranslationRequest};
use rti_core::treebank::Span;

const WS: TokenizationMode = TokenizationMode::new(Segmentation::Whitespace, PunctuationPolicy::Keep);
const ZH: TokenizationMode = TokenizationMode::new(Segmentation::PerCharacter, PunctuationPolicy::Strip);

/// Element-by-element multiset difference: every RTI occurrence consumes
/// one equal, unconsumed container occurrence if one exists; the rest are
/// counted.
fn brute_force_difference(rti: &[String], container: &[String]) -> usize {
    let mut used = vec![false; container.len()];
    let mut missing = 0;
    for word in rti {
        match (0..container.len()).find(|&j| !used[j] && &container[j] == word) {
            Some(j) => used[j] = true,
            None => missing += 1,
        }
    }
    missing
}

fn words(rng: &mut ChaCha8Rng, vocab: usize, max_len: usize) -> Vec<String> {
    let n = rng.gen_range(0..=max_len);
    (0..n).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect()
}

#[test]
fn distance_matches_brute_force_on_random_multisets() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..2000 {
        let vocab = rng.gen_range(1..12);
        let r = words(&mut rng, vocab, 15);
        let c = words(&mut rng, vocab, 25);
        let got = bow_distance(
            &BagOfWords::from_tokens(r.clone(), WS),
            &BagOfWords::from_tokens(c.clone(), WS),
        )
        .unwrap();
        assert_eq!(got, brute_force_difference(&r, &c), "{r:?} vs {c:?}");
    }
}

fn bag(tokens: &[String]) -> BagOfWords {
    BagOfWords::from_tokens(tokens.to_vec(), WS)
}

fn word_list() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec("[a-e]", 0..20)
}

proptest! {
    #[test]
    fn identity(a in word_list()) {
        prop_assert_eq!(bow_distance(&bag(&a), &bag(&a)).unwrap(), 0);
    }

    #[test]
    fn empty_container_costs_everything(a in word_list()) {
        prop_assert_eq!(bow_distance(&bag(&a), &bag(&[])).unwrap(), a.len());
    }

    #[test]
    fn container_additions_never_increase(a in word_list(), b in word_list(), extra in word_list()) {
        let before = bow_distance(&bag(&a), &bag(&b)).unwrap();
        let mut grown = b.clone();
        grown.extend(extra);
        prop_assert!(bow_distance(&bag(&a), &bag(&grown)).unwrap() <= before);
    }

    #[test]
    fn rti_additions_never_decrease(a in word_list(), b in word_list(), extra in word_list()) {
        let before = bow_distance(&bag(&a), &bag(&b)).unwrap();
        let mut grown = a.clone();
        grown.extend(extra);
        prop_assert!(bow_distance(&bag(&grown), &bag(&b)).unwrap() >= before);
    }

    #[test]
    fn decomposition(a in word_list(), b in word_list()) {
        let (ba, bb) = (bag(&a), bag(&b));
        let by_word: usize = ba.counts().iter().map(|(w, &n)| n.saturating_sub(bb.count(w))).sum();
        prop_assert_eq!(bow_distance(&ba, &bb).unwrap(), by_word);
        prop_assert_eq!(by_word, brute_force_difference(&a, &b));
    }

    #[test]
    fn bag_size_is_token_count(text in "[a-z ]{1,40}") {
        prop_assert_eq!(bag_of_words(&text, WS).len(), text.split_whitespace().count());
    }
}

fn translation(text: &str, target: &str) -> Translation {
    Translation {
        request: TranslationRequest::new(text, "en", "zh", "worked-example").unwrap(),
        target_text: target.into(),
        origin: Origin::Cache,
    }
}

fn talks_pair() -> RtiPair {
    RtiPair {
        pair_id: 0,
        rti: Rti {
            sentence_id: "talks".into(),
            span: Span::new(3, 6),
            text: "chummy bilateral talks".into(),
            node_path: vec![1, 1],
        },
        container_text: "The leaders held chummy bilateral talks in Paris".into(),
        container_span: Span::new(0, 8),
        container_kind: ContainerKind::FullSentence,
    }
}

#[test]
fn missing_characters_flagged_only_below_distance() {
    let pair = talks_pair();
    let r = translation(&pair.rti.text, "亲切双边会谈");
    let c = translation(&pair.container_text, "领导人在巴黎举行了双边会谈。");
    let issue = detect(&pair, &r, &c, 0, ZH).unwrap().expect("reported at d=0");
    assert_eq!(issue.distance, 2);
    assert_eq!(issue.threshold_used, 0);
    assert!(detect(&pair, &r, &c, 1, ZH).unwrap().is_some());
    assert!(detect(&pair, &r, &c, 2, ZH).unwrap().is_none());
}

#[test]
fn threshold_sets_are_nested() {
    use rti_core::detector::TranslatedPair;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pairs: Vec<TranslatedPair> = (0..200)
        .map(|i| {
            let r = words(&mut rng, 6, 8).join(" ");
            let c = words(&mut rng, 6, 20).join(" ");
            let mut pair = talks_pair();
            pair.pair_id = i;
            TranslatedPair {
                sentence_index: i,
                pair,
                rti_translation: translation(&format!("r{i}"), &format!("{r} x")),
                container_translation: translation(&format!("c{i}"), &format!("{c} y")),
            }
        })
        .collect();
    let mut previous: Option<Vec<usize>> = None;
    for d in 0..=6 {
        let ids: Vec<usize> = detect_all(&pairs, d, WS)
            .unwrap()
            .iter()
            .map(|i| i.sentence_index)
            .collect();
        if let Some(prev) = &previous {
            assert!(ids.iter().all(|i| prev.contains(i)));
            assert!(ids.len() <= prev.len());
        }
        previous = Some(ids);
    }
}
