//! Corpus BLEU against a brute-force reimplementation.

#[path = "oracles/bleu.rs"]
mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use oracle::brute_bleu;
use union_core::metrics::{bleu, bleu_tokens};

fn sentence(rng: &mut ChaCha8Rng, alphabet: usize) -> Vec<String> {
    let len = rng.random_range(1..12);
    (0..len).map(|_| format!("w{}", rng.random_range(0..alphabet))).collect()
}

#[test]
fn matches_brute_force_on_random_corpora() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut nonzero = 0;
    for _ in 0..100 {
        let alphabet = rng.random_range(2..8);
        let size = rng.random_range(1..10);
        let cands: Vec<Vec<String>> = (0..size).map(|_| sentence(&mut rng, alphabet)).collect();
        let refs: Vec<Vec<Vec<String>>> = (0..size)
            .map(|_| {
                let k = rng.random_range(1..4);
                (0..k).map(|_| sentence(&mut rng, alphabet)).collect()
            })
            .collect();
        let got = bleu_tokens(&cands, &refs).unwrap();
        let want = brute_bleu(&cands, &refs);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        nonzero += usize::from(want > 0.0);
    }
    assert!(nonzero > 20, "too few corpora exercise the non-zero branch: {nonzero}");
}

#[test]
fn fixtures() {
    let exact = bleu(&["the cat sat on the mat"], &[vec!["the cat sat on the mat"]]).unwrap();
    assert!((exact - 1.0).abs() < 1e-12);
    let short = bleu(&["a b c d"], &[vec!["a b c d e"]]).unwrap();
    assert!((short - (-0.25f64).exp()).abs() < 1e-9);
}
