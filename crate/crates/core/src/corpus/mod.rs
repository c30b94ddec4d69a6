//! Show data: frame matrices, label sequences, manifests, delta features and
//! the synthetic corpus generator.

mod deltas;
mod features;
mod labels;
mod manifest;
pub mod synth;

pub(crate) use features::create_parent;
pub use deltas::{compute_deltas, DEFAULT_DELTA_WINDOW};
pub use features::{
    format_feature_file, parse_feature_file, read_feature_file, write_feature_file, FrameMatrix,
};
pub use labels::{format_label_file, parse_label_file, read_label_file, write_label_file, LabelSequence};
pub use manifest::{default_genres, CorpusManifest, ShowRecord, Split, DEFAULT_GENRES};
pub use synth::{dynamics_only_config, synthesize_corpus, synthesize_show, SynthConfig};
