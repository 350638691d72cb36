//! Ground-truth displacement from GNSS fixes and the odometry error label.
//!
//! Distances use Vincenty's inverse solution on the WGS-84 ellipsoid.

use geographiclib_rs::{DirectGeodesic, Geodesic};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// WGS-84 semi-major axis, meters.
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// WGS-84 semi-minor axis, meters.
pub const WGS84_B: f64 = WGS84_A * (1.0 - WGS84_F);

/// Convergence threshold on the longitude-on-auxiliary-sphere iteration, radians.
pub const VINCENTY_TOLERANCE: f64 = 1e-12;
pub const VINCENTY_MAX_ITERATIONS: usize = 200;

/// Nominal horizontal accuracy of the GNSS reference, meters. Metadata only.
pub const GNSS_ACCURACY_M: f64 = 3.0;

/// Geodetic latitude and longitude, degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnssFix {
    pub lat: f64,
    pub lon: f64,
}

impl GnssFix {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let fix = GnssFix { lat, lon };
        fix.validate()?;
        Ok(fix)
    }

    pub fn validate(&self) -> Result<()> {
        if (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("fix out of range: lat {}, lon {}", self.lat, self.lon)))
        }
    }

    /// Move `distance` meters along the geodesic leaving at `azimuth_deg`
    /// (clockwise from north). Uses Karney's direct solution; only the
    /// trajectory simulator needs this.
    pub fn project(&self, azimuth_deg: f64, distance: f64) -> GnssFix {
        let (lat, lon): (f64, f64) = Geodesic::wgs84().direct(self.lat, self.lon, azimuth_deg, distance);
        GnssFix { lat, lon }
    }
}

/// Signed difference between odometry and GNSS displacement, meters.
/// Positive means the odometry overestimates.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ErrorLabel(pub f64);

impl ErrorLabel {
    pub fn epsilon(self) -> f64 {
        self.0
    }
}

/// Geodesic distance between two fixes on the WGS-84 ellipsoid, meters.
///
/// Arguments are put in a canonical order first so that the result is
/// bitwise symmetric.
pub fn vincenty_inverse(a: &GnssFix, b: &GnssFix) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let (p, q) = if (a.lat, a.lon) <= (b.lat, b.lon) { (a, b) } else { (b, a) };
    if p == q {
        return Ok(0.0);
    }

    let f = WGS84_F;
    let l = (q.lon - p.lon).to_radians();
    let u1 = ((1.0 - f) * p.lat.to_radians().tan()).atan();
    let u2 = ((1.0 - f) * q.lat.to_radians().tan()).atan();
    let (sin_u1, cos_u1) = u1.sin_cos();
    let (sin_u2, cos_u2) = u2.sin_cos();

    // Auxiliary-sphere quantities for a given longitude difference lambda:
    // (sin sigma, cos sigma, sigma, sin alpha, cos^2 alpha, cos 2 sigma_m).
    let terms = |lambda: f64| {
        let (sin_lambda, cos_lambda) = lambda.sin_cos();
        let sin_sigma = ((cos_u2 * sin_lambda).powi(2)
            + (cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lambda).powi(2))
        .sqrt();
        let cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_lambda;
        let sigma = sin_sigma.atan2(cos_sigma);
        let sin_alpha = if sin_sigma == 0.0 { 0.0 } else { cos_u1 * cos_u2 * sin_lambda / sin_sigma };
        let cos_sq_alpha = 1.0 - sin_alpha * sin_alpha;
        // Equatorial lines have cos^2(alpha) = 0.
        let cos_2sigma_m = if cos_sq_alpha != 0.0 { cos_sigma - 2.0 * sin_u1 * sin_u2 / cos_sq_alpha } else { 0.0 };
        (sin_sigma, cos_sigma, sigma, sin_alpha, cos_sq_alpha, cos_2sigma_m)
    };

    let mut lambda = l;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let (sin_sigma, cos_sigma, sigma, sin_alpha, cos_sq_alpha, cos_2sigma_m) = terms(lambda);
        if sin_sigma == 0.0 {
            return Ok(0.0);
        }
        let c = f / 16.0 * cos_sq_alpha * (4.0 + f * (4.0 - 3.0 * cos_sq_alpha));
        let previous = lambda;
        lambda = l
            + (1.0 - c)
                * f
                * sin_alpha
                * (sigma + c * sin_sigma * (cos_2sigma_m + c * cos_sigma * (-1.0 + 2.0 * cos_2sigma_m * cos_2sigma_m)));
        if (lambda - previous).abs() <= VINCENTY_TOLERANCE {
            break;
        }
        if iterations >= VINCENTY_MAX_ITERATIONS {
            return Err(Error::Convergence { iterations });
        }
    }
    // The distance is very sensitive to lambda (about one Earth radius per
    // radian), so evaluate it at the converged value rather than the previous one.
    let (sin_sigma, cos_sigma, sigma, _, cos_sq_alpha, cos_2sigma_m) = terms(lambda);

    let u_sq = cos_sq_alpha * (WGS84_A * WGS84_A - WGS84_B * WGS84_B) / (WGS84_B * WGS84_B);
    let big_a = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
    let big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));
    let c2 = cos_2sigma_m * cos_2sigma_m;
    let delta_sigma = big_b
        * sin_sigma
        * (cos_2sigma_m
            + big_b / 4.0
                * (cos_sigma * (-1.0 + 2.0 * c2)
                    - big_b / 6.0 * cos_2sigma_m * (-3.0 + 4.0 * sin_sigma * sin_sigma) * (-3.0 + 4.0 * c2)));
    Ok(WGS84_B * big_a * (sigma - delta_sigma))
}

/// True displacement over one second from consecutive fixes. Direction is discarded.
pub fn gnss_displacement(prev: &GnssFix, curr: &GnssFix) -> Result<f64> {
    vincenty_inverse(prev, curr)
}

pub fn label_error(x_whr: f64, x_gnss: f64) -> ErrorLabel {
    ErrorLabel(x_whr - x_gnss)
}
