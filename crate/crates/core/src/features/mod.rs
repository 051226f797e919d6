//! Feature extraction: character n-gram TF-IDF and imported dense
//! embeddings.

mod embeddings;
mod sparse;
mod tfidf;

pub use embeddings::{load_embeddings, read_embeddings, write_embeddings, DenseMatrix, EMB1_FORMAT};
pub use sparse::{FeatureRows, SparseVector};
pub use tfidf::{char_ngrams, fit_tfidf, TfidfConfig, VectorizerModel};
