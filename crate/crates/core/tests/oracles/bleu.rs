//! Corpus BLEU recomputed with linear scans instead of n-gram maps.

fn occurrences(seq: &[String], gram: &[String]) -> usize {
    if gram.len() > seq.len() {
        return 0;
    }
    (0..=seq.len() - gram.len()).filter(|&i| seq[i..i + gram.len()] == *gram).count()
}

pub fn brute_bleu(cands: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> f64 {
    let mut log_p = 0.0;
    for n in 1..=4 {
        let (mut hit, mut total) = (0usize, 0usize);
        for (c, rs) in cands.iter().zip(refs) {
            if c.len() < n {
                continue;
            }
            total += c.len() + 1 - n;
            let mut seen: Vec<&[String]> = Vec::new();
            for i in 0..=c.len() - n {
                let g = &c[i..i + n];
                if seen.contains(&g) {
                    continue;
                }
                seen.push(g);
                let best_ref = rs.iter().map(|r| occurrences(r, g)).max().unwrap();
                hit += occurrences(c, g).min(best_ref);
            }
        }
        if hit == 0 {
            return 0.0;
        }
        log_p += 0.25 * (hit as f64 / total as f64).ln();
    }
    let c: usize = cands.iter().map(Vec::len).sum();
    let mut r = 0usize;
    for (cand, rs) in cands.iter().zip(refs) {
        let mut best = rs[0].len();
        for x in rs {
            let (dx, db) = (x.len().abs_diff(cand.len()), best.abs_diff(cand.len()));
            if dx < db || (dx == db && x.len() < best) {
                best = x.len();
            }
        }
        r += best;
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * log_p.exp()
}
