//! Configuration, run loop, ensemble statistics and self checks.

pub mod config;
pub mod ensemble;
pub mod record;
pub mod run;
pub mod selfcheck;

pub use config::{FieldSpec, FoliationSpec, LabelSpec, RunConfig, TermSpec};
pub use ensemble::{ensemble, ks_distance, EnsembleReport, KsEntry, MarginalCdf, MIN_SAMPLES};
pub use record::{exit_code, ErrorRecord, LeafRecord, LeafSnapshot, OutputRecord, ProjectionLog, RunHeader, TermSnapshot};
pub use run::{run, RunOptions, Simulation};
pub use selfcheck::{selfcheck, Check, SelfCheckOptions, SelfCheckReport};
