//! Tweet preprocessing, corpora, vocabulary and the BiLSTM text encoder.

mod corpus;
mod lstm;
mod preprocess;
mod vocab;

pub use corpus::{load_corpus, load_timelines, LabeledCorpus, LabeledExample, Split, Task};
pub use lstm::{bilstm_encode, LstmDirection, LstmParams, DEFAULT_HIDDEN};
pub use preprocess::{preprocess, HASHTAG, MENTION, URL};
pub use vocab::{Vocab, WordEmbeddings, MAX_LEN, PAD, PAD_ID, PLACEHOLDER_IDS, UNK, UNK_ID};
