//! Discrete flags: a top mesh embedded in the ambient space with nested marked
//! submeshes, orientations, quadrature and tangent vectors.

pub mod builders;
mod flag;
mod mesh;
mod quadrature;
mod refine;
mod samples;
mod tangent;
mod validate;

pub use flag::{act_map, realize_level, Chart, EmbeddedLevel, FlagEmbedding, Inclusion, Realization};
pub use mesh::{circle_polygon, torus_grid, Mesh};
pub use quadrature::{segment_rule, triangle_rule, Geometry, QuadratureConfig};
pub use refine::refine;
pub use samples::{integrate_by_component, integrate_over_level, sample_level, LevelSamples};
pub use tangent::{
    check_compatibility, compatibility_defects, infinitesimal_action, join_riemannian, local_edge_lengths, normal_representative,
    push_tangent, sample_with_tangents, split_riemannian, tangent_bases, FlagTangent, SplitTangent, DEFAULT_COMPATIBILITY_TOL,
};
pub use validate::{validate_flag, Thresholds, ValidationReport, Violation, ViolationKind};
