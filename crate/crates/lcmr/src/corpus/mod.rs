//! Data ingestion: interactions, item text, vocabulary, leave-one-out
//! splits, and negative sampling.

pub mod interactions;
pub mod negative;
pub mod split;
pub mod stopwords;
pub mod text;
pub mod vocab;

pub use interactions::{parse_interactions, InteractionFormat, InteractionSet, ParsedInteractions};
pub use negative::sample_train_negatives;
pub use split::{attach_candidates, loo_split, read_split, sample_eval_candidates, write_candidates, write_split, LooSplit};
pub use text::{parse_item_text, ItemCorpus, TextFormat};
pub use vocab::{build_vocab, Vocabulary};
