use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use union_core::metrics::{
    bleu, ea_score, evaluate_all, fit_ea, fit_ngram_lm, perplexity, EaClassifier, EaConfig, UniformLm,
};

fn sentences(n: usize, seed: u64) -> Vec<String> {
    let subjects = ["a cat", "the dog", "my car", "water", "a stone", "the sun", "bread", "a river"];
    let verbs = ["eats", "needs", "warms", "moves", "breaks", "holds", "finds", "sees"];
    let objects = ["food", "light", "roads", "fish", "rocks", "heat", "grain", "boats"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            format!(
                "{} {} {} .",
                subjects.choose(&mut rng).unwrap(),
                verbs.choose(&mut rng).unwrap(),
                objects.choose(&mut rng).unwrap()
            )
        })
        .collect()
}

#[test]
fn training_text_is_less_perplexing_than_a_scrambled_copy() {
    let train = sentences(200, 1);
    let lm = fit_ngram_lm(&train, 3, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let scrambled: Vec<String> = train
        .iter()
        .map(|s| {
            let mut w: Vec<&str> = s.split(' ').collect();
            w.shuffle(&mut rng);
            w.join(" ")
        })
        .collect();
    let seen = perplexity(&lm, &train).unwrap();
    let shuffled = perplexity(&lm, &scrambled).unwrap();
    assert!(seen < shuffled, "{seen} vs {shuffled}");
}

#[test]
fn bleu_is_invariant_to_reordering_pairs() {
    let cands = sentences(20, 3);
    let refs: Vec<Vec<String>> = (0..20).map(|i| sentences(3, 100 + i)).collect();
    let base = bleu(&cands, &refs).unwrap();
    let mut order: Vec<usize> = (0..20).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(4));
    let c2: Vec<&String> = order.iter().map(|&i| &cands[i]).collect();
    let r2: Vec<Vec<String>> = order.iter().map(|&i| refs[i].clone()).collect();
    assert!((bleu(&c2, &r2).unwrap() - base).abs() < 1e-12);
}

fn labelled(seed: u64) -> (Vec<(String, String)>, Vec<(String, String)>) {
    // Positives refute the statement; negatives restate it.
    let stmts = sentences(120, seed);
    let pos = stmts.iter().map(|s| (s.clone(), format!("it is not true that {s}"))).collect();
    let neg = stmts.iter().map(|s| (s.clone(), s.clone())).collect();
    (pos, neg)
}

fn accuracy(clf: &EaClassifier, pos: &[(String, String)], neg: &[(String, String)]) -> f64 {
    let p = ea_score(clf, pos).unwrap();
    let n = ea_score(clf, neg).unwrap();
    (p * pos.len() as f64 + (1.0 - n) * neg.len() as f64) / (pos.len() + neg.len()) as f64
}

#[test]
fn duplicating_the_training_set_keeps_held_out_accuracy() {
    let (pos, neg) = labelled(5);
    let (hp, hn) = labelled(6);
    let cfg = EaConfig { seed: 9, ..Default::default() };
    let once = fit_ea(&pos, &neg, &cfg).unwrap();
    let twice = fit_ea(&[pos.clone(), pos].concat(), &[neg.clone(), neg].concat(), &cfg).unwrap();
    let (a, b) = (accuracy(&once, &hp, &hn), accuracy(&twice, &hp, &hn));
    assert!((a - b).abs() <= 0.01, "{a} vs {b}");
    assert!(a > 0.9);
}

#[test]
fn report_row_summarises_uni_with_sample_deviation() {
    let sources = ["cats can fly", "fish can walk"];
    // One new word, then three.
    let gens = ["cats can swim", "fish can walk on dry land"];
    let refs = vec![vec!["cats have no wings"], vec!["fish have fins"]];
    let lm = UniformLm { size: 10 };
    let (pos, neg) = labelled(7);
    let clf = fit_ea(&pos, &neg, &EaConfig::default()).unwrap();
    let row = evaluate_all(&gens, &sources, &refs, &lm, &lm, &clf).unwrap();
    assert_eq!(row.uni_mean, 2.0);
    assert!((row.uni_std - std::f64::consts::SQRT_2).abs() < 1e-12);
    assert!((row.ppl_trg - 10.0).abs() < 1e-9);
    assert_eq!(row.len_mean, 4.5);
    assert!(evaluate_all(&gens[..1], &sources, &refs, &lm, &lm, &clf).is_err());
}
