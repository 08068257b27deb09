pub mod classify;
pub mod estimate;
pub mod mc;
pub mod rdplot;
pub mod simulate;
pub mod validate;

use std::path::PathBuf;

use mrd_core::estimation::BandwidthSpec;

pub struct Context {
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

pub(crate) fn bandwidth_override(h: Option<f64>, current: BandwidthSpec) -> BandwidthSpec {
    h.map_or(current, |h| BandwidthSpec::Fixed { h })
}
