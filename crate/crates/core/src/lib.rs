//! Measurement and prediction toolkit for cellular V2X links.
//!
//! The crate covers the full path from raw measurements to a trained
//! delay-class predictor:
//!
//! - [`probe`] / [`relay`] — sequenced UDP probing through an echo/forward
//!   relay, producing per-packet end-to-end delay records.
//! - [`ingest`] — KPI/GNSS trace parsing, cell-identity resolution and
//!   clock-aligned fusion into per-packet records.
//! - [`recorder`] — double-buffered lossless block capture pipeline.
//! - [`simulate`] — seeded synthetic drive-trace generator used as the
//!   ground-truth oracle for the rest of the pipeline.
//! - [`analyze`] — delay compliance, per-cell statistics, coverage and
//!   interval-effect reports.
//! - [`mlkit`] — mutual-information feature selection, dataset balancing,
//!   stratified cross-validation and a small feed-forward classifier.

pub mod analyze;
pub mod ingest;
pub mod mlkit;
pub mod probe;
pub mod recorder;
pub mod relay;
pub mod simulate;
pub mod util;

pub use analyze::{ComplianceReport, EnbDelayStats};
pub use ingest::{CellChannel, CellMapping, FusedRecord, GnssFix, KpiSample, KpiSource};
pub use mlkit::{ClassReport, ClassScheme, Dataset, TrainedModel};
pub use probe::{DelayRecord, ProbeConfig, ProbePacket, ProbeRun};
pub use relay::{RelayConfig, RelayHandle, RelayMode};
pub use simulate::{EnbProfile, ScenarioConfig, TraceBundle};
