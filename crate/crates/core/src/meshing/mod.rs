//! Fracture triangulations, trace meshes, stabilization bands and segment overlays.

mod band;
mod overlay;
mod segmesh;
mod trimesh;

pub use band::{build_aux_band, AuxBandMesh};
pub use overlay::{overlay_partial, overlay_segment, OverlayMesh, OverlayPiece, OverlaySegment};
pub use segmesh::{mesh_trace, EndpointMarker, SegMesh};
pub use trimesh::{
    barycentric, hat_gradients, is_neumann_edge, triangulate_fracture, Edge, MeshOptions, NodeMarker, TriMesh,
    QUASI_UNIFORMITY, SHAPE_FLOOR,
};
