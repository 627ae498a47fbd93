//! Minimal Kaehler hypersurfaces built from holomorphic seed data, together
//! with numerical checks of their infinitesimal bendings and of their Gauss
//! parametrizations.

pub mod bending;
pub mod chart;
pub mod error;
pub mod gausspar;
pub mod geometry;
pub mod holo;
pub mod par;
pub mod report;
pub mod suites;
pub mod surfaces;
pub mod weierstrass;

pub use chart::{Chart, ChartRef, CoordBox, Jet2};
pub use error::{Error, Result};
pub use bending::{BendingField, TrivialData};
pub use holo::{SeriesVector, TruncatedSeries};
pub use report::ResidualReport;
pub use weierstrass::{WeierstrassSeed, WeierstrassSurface};
