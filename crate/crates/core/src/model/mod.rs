//! Separability structures and the neural decomposition model.

mod checkpoint;
mod network;
mod structure;

pub use checkpoint::{format_checkpoint, load_checkpoint, parse_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use network::{
    mixture_backward, mixture_forward, Decomposition, DecompositionModel, DecompositionTerm, MixtureCache,
    MixtureLayout, Workspace, DEFAULT_WIDTH, NORM_FLOOR,
};
pub use structure::{all_set_partitions, reorder_to_canonical, Partition, SeparabilityStructure, StructureKind};
