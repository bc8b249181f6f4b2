//! Synthetic line-per-sentence corpora drawn from a second-order source.
//!
//! Sentences alternate content words and "operator" words. The class of the
//! content word that follows an operator is the operator's private
//! permutation of the previous content word's class, so predicting it needs
//! the pair (previous content word, operator). Operators are drawn
//! uniformly. They and the sentence end are the most frequent symbols;
//! content words follow a Zipf profile inside each class.

use crate::linalg::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub operators: usize,
    pub classes: usize,
    pub words_per_class: usize,
    /// Exponent of the Zipf profile inside each class.
    pub zipf_exponent: f64,
    /// Probability of ending the sentence after a content word.
    pub p_end: f64,
    /// Probability that a class transition follows the operator's rule
    /// rather than a uniform draw.
    pub p_rule: f64,
}

impl SourceSpec {
    /// 18 operators, 16 classes of 30 words: with eos and unk, V = 500.
    pub fn v500() -> Self {
        SourceSpec {
            operators: 18,
            classes: 16,
            words_per_class: 30,
            zipf_exponent: 1.5,
            p_end: 0.1,
            p_rule: 0.9,
        }
    }

    /// 4 operators, 4 classes of 11 words: with eos and unk, V = 50.
    pub fn v50() -> Self {
        SourceSpec {
            operators: 4,
            classes: 4,
            words_per_class: 11,
            zipf_exponent: 1.0,
            p_end: 0.1,
            p_rule: 0.9,
        }
    }

    /// Vocabulary size once eos and unk are added, assuming every word occurs.
    pub fn vocab_size(&self) -> usize {
        self.operators + self.classes * self.words_per_class + 2
    }
}

pub struct Source {
    spec: SourceSpec,
    perms: Vec<Vec<usize>>,
    zipf_cdf: Vec<f64>,
    rng: Rng,
}

impl Source {
    pub fn new(spec: SourceSpec, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let perms = (0..spec.operators)
            .map(|_| shuffled(spec.classes, &mut rng))
            .collect();
        let weights: Vec<f64> = (0..spec.words_per_class)
            .map(|j| ((j + 1) as f64).powf(-spec.zipf_exponent))
            .collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let zipf_cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Source {
            spec,
            perms,
            zipf_cdf,
            rng,
        }
    }

    fn content_word(&mut self, class: usize) -> String {
        let u = self.rng.uniform();
        let j = self
            .zipf_cdf
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.spec.words_per_class - 1);
        format!("c{class:02}w{j:02}")
    }

    /// One sentence (without the end symbol).
    pub fn sentence(&mut self) -> Vec<String> {
        let s = self.spec;
        let mut out = Vec::new();
        let mut class = self.rng.below(s.classes);
        out.push(self.content_word(class));
        loop {
            if self.rng.uniform() < s.p_end {
                return out;
            }
            let op = self.rng.below(s.operators);
            out.push(format!("op{op:02}"));
            class = if self.rng.uniform() < s.p_rule {
                self.perms[op][class]
            } else {
                self.rng.below(s.classes)
            };
            out.push(self.content_word(class));
        }
    }

    /// Whole sentences, one per line, until at least `tokens` tokens
    /// (counting one end symbol per line) have been produced.
    pub fn text(&mut self, tokens: usize) -> String {
        let mut out = String::new();
        let mut n = 0;
        while n < tokens {
            let s = self.sentence();
            n += s.len() + 1;
            out.push_str(&s.join(" "));
            out.push('\n');
        }
        out
    }
}

fn shuffled(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below(i + 1);
        v.swap(i, j);
    }
    v
}

/// Train/valid/test texts of roughly the requested token counts.
pub fn corpus_texts(
    spec: SourceSpec,
    seed: u64,
    train: usize,
    valid: usize,
    test: usize,
) -> [String; 3] {
    let mut src = Source::new(spec, seed);
    [src.text(train), src.text(valid), src.text(test)]
}
