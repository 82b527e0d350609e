//! Trip ingestion, zone/day aggregation, chronological splitting and
//! sliding windows.

mod scaler;
mod series;
mod trips;
mod windows;
mod zones;

pub use scaler::Standardizer;
pub use series::{aggregate_demand, chronological_split, Aggregation, DemandSeries, DemandUnit};
pub use trips::{ingest_reader, ingest_trips, parse_timestamp, write_trips_csv, IngestReport, TripRecord, TripSchema};
pub use windows::{make_windows, windows_from_days, Window, WindowSet};
pub use zones::{Zone, ZoneMap};
