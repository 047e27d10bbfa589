//! Small dense autodiff engine and the graph models trained on exported
//! scenegraphs.

pub mod gradcheck;
pub mod graph;
pub mod models;
pub mod optim;
pub mod params;
pub mod tape;
pub mod train;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: {shapes:?}")]
    Shape {
        op: &'static str,
        shapes: Vec<(usize, usize)>,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("{what} became non-finite at epoch {epoch}")]
    Diverged { what: String, epoch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
