//! File formats, annotation post-processing and QA, and dataset statistics.

mod cube;
mod obbmot;
mod quality;
mod stats;

pub use cube::{read_cube, read_pgm, rgb_proxy, write_cube, write_pgm, SpectralCube, CUBE_MAGIC, RGB_PROXY_BANDS};
pub(crate) use cube::Reader;
pub use obbmot::{format_record, group_records, parse_obbmot, parse_records, write_obbmot, ObbMotRecord};
pub use quality::{
    discard_reason, postprocess, validate, DiscardReason, Discarded, Finding, FindingKind, PostprocessResult, Severity,
    MAX_OVERFLOW_PX, MIN_IOF,
};
pub use stats::{dataset_stats, stats_csv, StatsReport, NEIGHBOR_RADIUS, RIOU_BINS};
