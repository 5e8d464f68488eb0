use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;

use crate::scalar::Scalar;

const MAX_N: usize = 4;

/// Words (with an optional decimal part) and single punctuation marks.
pub fn bleu_tokens(text: &str) -> Vec<&str> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re =
        RE.get_or_init(|| Regex::new(r"[\p{L}\p{N}_]+(?:\.[\p{N}]+)*|[^\s\p{L}\p{N}_]").unwrap());
    re.find_iter(text).map(|m| m.as_str()).collect()
}

fn ngrams<'a, 'b>(toks: &'b [&'a str], n: usize) -> HashMap<&'b [&'a str], usize> {
    let mut out: HashMap<&[&str], usize> = HashMap::new();
    if toks.len() >= n {
        for w in toks.windows(n) {
            *out.entry(w).or_default() += 1;
        }
    }
    out
}

/// Corpus BLEU over `(candidate, reference)` pairs: clipped n-gram
/// precisions up to 4-grams with uniform weights and a brevity penalty.
/// Orders two and up are add-one smoothed; a zero unigram match count
/// scores 0.
pub fn corpus_bleu<T: Scalar>(pairs: &[(&str, &str)]) -> T {
    let mut matched = [0usize; MAX_N];
    let mut total = [0usize; MAX_N];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (cand, reference) in pairs {
        let c = bleu_tokens(cand);
        let r = bleu_tokens(reference);
        c_len += c.len();
        r_len += r.len();
        for n in 1..=MAX_N {
            let rc = ngrams(&r, n);
            for (g, k) in ngrams(&c, n) {
                matched[n - 1] += k.min(rc.get(g).copied().unwrap_or(0));
                total[n - 1] += k;
            }
        }
    }
    if c_len == 0 {
        return if r_len == 0 { T::one() } else { T::zero() };
    }
    if matched[0] == 0 {
        return T::zero();
    }
    let f = T::from_usize_lossy;
    let mut log_p = (f(matched[0]) / f(total[0])).ln();
    for n in 1..MAX_N {
        log_p = log_p + ((f(matched[n]) + T::one()) / (f(total[n]) + T::one())).ln();
    }
    let bp = if c_len < r_len {
        T::one() - f(r_len) / f(c_len)
    } else {
        T::zero()
    };
    (bp + log_p / f(MAX_N)).exp().min(T::one())
}

pub fn bleu<T: Scalar>(pred: &str, gold: &str) -> T {
    corpus_bleu(&[(pred, gold)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_split_punctuation() {
        assert_eq!(
            bleu_tokens(r#"{"d": 12.5,}"#),
            vec!["{", "\"", "d", "\"", ":", "12.5", ",", "}"]
        );
    }

    #[test]
    fn identical_and_disjoint() {
        let t = "mill the plate on the vertical mill";
        assert_eq!(bleu::<f64>(t, t), 1.0);
        assert_eq!(bleu::<f64>("a b c", "x y z"), 0.0);
    }

    #[test]
    fn hand_computed_two_sentences() {
        // cand 1: "the cat sat on the mat" vs "the cat is on the mat"
        //   1g 5/6, 2g 3/5, 3g 1/4, 4g 0/3
        // cand 2: "a dog" vs "a dog barks"
        //   1g 2/2, 2g 1/1, 3g 0/0, 4g 0/0
        // totals 7/8, 4/6, 1/4, 0/3; c = 8, r = 9
        let got: f64 = corpus_bleu(&[
            ("the cat sat on the mat", "the cat is on the mat"),
            ("a dog", "a dog barks"),
        ]);
        let p =
            (7.0f64 / 8.0).ln() + (5.0f64 / 7.0).ln() + (2.0f64 / 5.0).ln() + (1.0f64 / 4.0).ln();
        let want = ((1.0 - 9.0 / 8.0) + p / 4.0).exp();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}
