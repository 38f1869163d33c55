//! A symbolic computation engine for a birational model of a Grassmannian
//! chart: it generates the chart's primary Plücker relations, builds the
//! binomial model living over the chart, runs the sequential blowup
//! pipeline as an explicit coordinate-chart atlas, transports coordinate
//! subschemes (closures of matroid Schubert cells) through the pipeline,
//! and certifies smoothness of the final transform by Jacobian rank
//! checks over small prime fields.

pub mod indexing;
pub mod polyengine;
pub mod model;
pub mod relations;
pub mod blowup;
pub mod gamma;
pub mod certify;
