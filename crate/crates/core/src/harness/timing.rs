//! Simulated clock: every device byte is charged against a bandwidth budget.

use crate::device::DeviceConfig;

/// Foreground writes and GC copies share one write budget; reads share one
/// read budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingModel {
    /// Bytes per simulated second.
    pub write_bandwidth: f64,
    pub read_bandwidth: f64,
}

impl TimingModel {
    pub fn from_device(d: &DeviceConfig) -> Self {
        TimingModel { write_bandwidth: d.write_bandwidth as f64, read_bandwidth: d.read_bandwidth as f64 }
    }

    pub fn seconds(&self, written: u64, read: u64) -> f64 {
        written as f64 / self.write_bandwidth + read as f64 / self.read_bandwidth
    }
}
