//! Automatic evaluation: BLEU, n-gram and model perplexity, UNI, Length,
//! the estimated-approval discriminator, and report rows.

mod bleu;
mod ea;
mod informativeness;
mod ngram;
mod perplexity;
mod report;

pub use bleu::{bleu, bleu_tokens};
pub use ea::{ea_score, fit_ea, EaClassifier, EaConfig};
pub use informativeness::{gen_length, uni};
pub use ngram::{fit_ngram_lm, NGramLM, BOS, EOS, UNK};
pub use perplexity::{perplexity, LanguageModel, ModelScorer, UniformLm};
pub use report::{evaluate_all, mean_std, MetricsReport, MetricsRow, SystemRow, REPORT_COLUMNS};
