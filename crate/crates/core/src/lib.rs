//! Active learning of binary labels on graphs.
//!
//! * [`s2`]: the S² boundary-search sampler, hop-midpoint and length-midpoint variants.
//! * [`cut_analysis`]: cut clustering and the query budget bound.
//! * [`spectral`]: greedy cutoff-maximization sampling and POCS label completion.
//! * [`hybrid`]: cutoff sampling that hands over to weighted S².
//! * [`data`] and [`bench`]: datasets, k-NN graphs and the experiment harness.

pub mod bench;
pub mod cut_analysis;
pub mod data;
pub mod error;
pub mod graph;
pub mod hybrid;
pub mod io;
pub mod s2;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{Edge, Label, LabelSignal, Metric, NodeId, WeightedGraph};
