//! Shared fixtures for the benchmarks.

use irs_robust::channel::{generate_channels, ChannelSet, Topology};
use irs_robust::params::SystemParams;

/// Default scenario with `elements` reflecting elements, drawn from `seed`.
pub fn scenario(elements: usize, seed: u64) -> (SystemParams, ChannelSet) {
    let params = SystemParams { elements, ..Default::default() };
    let ch = generate_channels(&params, &Topology::default(), seed).expect("default scenario is valid");
    (params, ch)
}
