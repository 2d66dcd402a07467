//! Back-of-the-envelope transfer time for a masked payload.

use crate::error::{Error, Result};

/// `datasize / bandwidth + latency · (1 + packetloss)`, in seconds.
pub fn estimate_comm_time(datasize_bytes: f64, bandwidth_bytes_per_s: f64, latency_s: f64, packetloss_fraction: f64) -> Result<f64> {
    if !(bandwidth_bytes_per_s.is_finite() && bandwidth_bytes_per_s > 0.0) {
        return Err(Error::Config(format!("bandwidth must be positive, got {bandwidth_bytes_per_s}")));
    }
    if datasize_bytes < 0.0 || latency_s < 0.0 || !(0.0..=1.0).contains(&packetloss_fraction) {
        return Err(Error::Config("datasize and latency must be >= 0, packet loss within [0, 1]".into()));
    }
    Ok(datasize_bytes / bandwidth_bytes_per_s + latency_s * (1.0 + packetloss_fraction))
}

/// Bytes of an uncompressed `rows × cols` f64 payload.
pub fn payload_bytes(rows: usize, cols: usize) -> f64 {
    (rows * cols * std::mem::size_of::<f64>()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    const MB: f64 = 1e6;

    #[test]
    fn formula() {
        assert!((estimate_comm_time(1.31 * MB, 1.25 * MB, 0.0, 0.0).unwrap() - 1.048).abs() < 1e-12);
        assert!((estimate_comm_time(1.31 * MB, 1.25 * MB, 0.1, 0.02).unwrap() - 1.150).abs() < 1e-12);
        assert_eq!(estimate_comm_time(0.0, 10.0, 0.5, 0.1).unwrap(), 0.55);
    }

    #[test]
    fn rejects_bad_bandwidth() {
        assert!(estimate_comm_time(1.0, 0.0, 0.0, 0.0).is_err());
        assert!(estimate_comm_time(1.0, -3.0, 0.0, 0.0).is_err());
        assert!(estimate_comm_time(1.0, 1.0, 0.0, 1.5).is_err());
    }

    #[test]
    fn payload_size() {
        assert_eq!(payload_bytes(8000, 40), 2_560_000.0);
    }
}
