//! Unit conversions and shared numeric defaults. Everything internal is SI.

/// Exact statute-mile-per-hour to metre-per-second factor.
pub const MPH_TO_MPS: f64 = 0.44704;

/// Nominal GPS sample interval (10 Hz).
pub const DT_NOMINAL: f64 = 0.1;

/// Mean Earth radius in metres, used by the haversine distance.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

pub fn mph_to_mps(mph: f64) -> f64 {
    mph * MPH_TO_MPS
}

pub fn mps_to_mph(mps: f64) -> f64 {
    mps / MPH_TO_MPS
}
