//! Static actuator effects: fingertip lift and contact-area reduction as
//! functions of tube pressure.

use crate::error::{check_range, Result};
use crate::scalar::{lerp, Scalar};
use crate::types::MAX_PNEUMO_PRESSURE;

/// Measured lift calibration points `(kPa, mm)`.
pub const LIFT_POINTS: [(f64, f64); 4] = [(0.0, 0.0), (6.0, 2.24), (8.0, 3.36), (10.0, 4.07)];

/// Forces (N) of the contact-area measurement grid.
pub const AREA_FORCES_N: [f64; 3] = [0.75, 1.0, 1.5];
/// Pressures (kPa) of the contact-area grid, with the uninflated column.
pub const AREA_PRESSURES_KPA: [f64; 4] = [0.0, 6.0, 8.0, 10.0];
/// Reduced contact area in percent, rows by force, columns by pressure.
pub const AREA_REDUCTION_PCT: [[f64; 4]; 3] = [
    [0.0, 12.8, 25.5, 39.6],
    [0.0, 8.6, 15.2, 28.8],
    [0.0, 8.1, 11.9, 20.8],
];

/// Lowest and highest normal force accepted, N.
pub const FORCE_RANGE_N: (f64, f64) = (0.3, 1.5);

/// Piecewise-linear interpolation over sorted `xs`, extrapolating past the
/// last knot with the last segment's slope.
fn interp_extrapolate<T: Scalar>(xs: &[f64], ys: &[f64], x: T) -> T {
    let n = xs.len();
    let seg = xs
        .windows(2)
        .position(|w| x <= T::lit(w[1]))
        .unwrap_or(n - 2);
    let (x0, x1) = (T::lit(xs[seg]), T::lit(xs[seg + 1]));
    let (y0, y1) = (T::lit(ys[seg]), T::lit(ys[seg + 1]));
    lerp(y0, y1, (x - x0) / (x1 - x0))
}

/// Fingertip lift (mm) at tube pressure `pressure` (kPa, within [0, 12]).
pub fn pressure_to_lift<T: Scalar>(pressure: T) -> Result<T> {
    check_range("pressure_kpa", pressure.as_f64(), 0.0, MAX_PNEUMO_PRESSURE)?;
    let xs = LIFT_POINTS.map(|p| p.0);
    let ys = LIFT_POINTS.map(|p| p.1);
    Ok(interp_extrapolate(&xs, &ys, pressure))
}

/// Fraction of fingerpad contact area removed at `pressure` (kPa) under
/// `normal_force` (N).
///
/// Bilinear on the measured grid; forces outside the grid are clamped to
/// its edges, pressures above 10 kPa extrapolate the last segment.
pub fn contact_area_reduction<T: Scalar>(pressure: T, normal_force: T) -> Result<T> {
    check_range("pressure_kpa", pressure.as_f64(), 0.0, MAX_PNEUMO_PRESSURE)?;
    check_range(
        "normal_force_n",
        normal_force.as_f64(),
        FORCE_RANGE_N.0,
        FORCE_RANGE_N.1,
    )?;
    let f = normal_force.clamp_to(T::lit(AREA_FORCES_N[0]), T::lit(AREA_FORCES_N[2]));
    let row = |r: usize| interp_extrapolate(&AREA_PRESSURES_KPA, &AREA_REDUCTION_PCT[r], pressure);
    let seg = if f <= T::lit(AREA_FORCES_N[1]) { 0 } else { 1 };
    let (f0, f1) = (T::lit(AREA_FORCES_N[seg]), T::lit(AREA_FORCES_N[seg + 1]));
    let pct = lerp(row(seg), row(seg + 1), (f - f0) / (f1 - f0));
    Ok((pct / T::lit(100.0)).clamp_to(T::zero(), T::one()))
}
