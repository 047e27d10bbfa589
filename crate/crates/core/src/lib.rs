pub mod datasets;
pub mod ga;
pub mod graph_export;
pub mod scene;
pub mod scene_io;
pub mod xform;
