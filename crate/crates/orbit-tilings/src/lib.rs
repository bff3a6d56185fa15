//! Exact-arithmetic constructions on finite orbit windows: lacunary
//! cross-sections, Voronoi and rectangular tilings, measure transfer
//! between phase space and cross-section, Rokhlin tower hierarchies,
//! regular {1, α} tilings with α = √2, and a measure-preserving
//! back-and-forth that realizes Lebesgue orbit equivalence between
//! tiled fragments.
//!
//! All geometry lives in coordinates from ℚ[√2] ([`exactnum::QuadNum`]),
//! so partitions, measures and coverage fractions are verified as exact
//! equalities rather than within floating-point tolerances. Windows are
//! boxes or flat tori standing in for a fragment of one orbit.
//!
//! Start with the runnable programs in `examples/`: each one exercises a
//! major capability end to end (`cross_section`, `voronoi_cells`,
//! `measure_round_trip`, `diophantine_approx`, `rokhlin_towers`,
//! `regular_tiling`, `back_and_forth`, `pipeline`).

pub mod crosssection;
pub mod diophantine;
pub mod exactnum;
pub mod geometry;
pub mod loe;
pub mod measures;
pub mod svg;
pub mod tiling;
pub mod towers;

pub use exactnum::QuadNum;
pub use geometry::{CrossSection, Point, Rect, Window};

/// Version tag written into every JSON artifact.
pub const JSON_SCHEMA_VERSION: u32 = 1;
