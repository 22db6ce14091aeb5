//! Traffic series, supervised windowing, scaling, and client partitioning.

mod calendar;
mod norm;
mod partition;
mod series;
mod synthetic;
mod window;

pub use calendar::{day_of_week, HolidayCalendar, HOURS_PER_DAY};
pub use norm::{MinMaxScaler, NormState};
pub use partition::{build_federated, partition_clients, FederatedData, PartitionScheme};
pub use series::{RepairReport, TrafficSeries};
pub use synthetic::{generate_synthetic, generate_synthetic_with_surges, SyntheticProfile};
pub use window::{make_windows, WindowConfig, WindowedDataset, META_DIM};
