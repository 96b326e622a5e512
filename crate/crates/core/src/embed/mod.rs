//! Author and word embeddings: tables, biased walks, skip-gram training.

mod sgns;
mod table;
mod walk;

pub use sgns::{node2vec, train_pv_dbow, train_skipgram, SkipgramConfig, SkipgramRun};
pub use table::{cosine, load_word_vectors, random_author_embeddings, EmbeddingTable, DEFAULT_DIM};
pub use walk::{generate_walks, next_step_distribution, WalkConfig};
