//! Walker-Delta constellation snapshots, user drops over a spherical cap,
//! serving-satellite selection and per-link angles of departure.
//!
//! Everything here is a frozen t = 0 snapshot in an Earth-centred frame (km);
//! no orbit propagation is performed.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Minimum elevation (deg) at which a satellite counts as visible from the
/// region centre.
pub const MIN_ELEVATION_DEG: f64 = 10.0;

/// Walker-Delta phasing factor used for inter-plane anomaly offsets.
pub const WALKER_PHASING: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub earth_radius_km: f64,
    pub altitude_km: f64,
    pub planes: usize,
    pub sats_per_plane: usize,
    pub inclination_deg: f64,
    pub region_center_lat_deg: f64,
    pub region_center_lon_deg: f64,
    pub region_radius_km: f64,
    pub serving_count: usize,
    pub ut_count: usize,
    pub seed: u64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            earth_radius_km: 6371.0,
            altitude_km: 550.0,
            planes: 28,
            sats_per_plane: 60,
            inclination_deg: 53.0,
            region_center_lat_deg: 20.0,
            region_center_lon_deg: 40.0,
            region_radius_km: 800.0,
            serving_count: 5,
            ut_count: 32,
            seed: 0,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.earth_radius_km > 0.0) {
            return Err(Error::config("earth_radius_km", "must be positive"));
        }
        if !(self.altitude_km > 0.0) {
            return Err(Error::config("altitude_km", "must be positive"));
        }
        if self.planes < 1 {
            return Err(Error::config("planes", "must be at least 1"));
        }
        if self.sats_per_plane < 1 {
            return Err(Error::config("sats_per_plane", "must be at least 1"));
        }
        if !(self.region_radius_km >= 0.0 && self.region_radius_km < PI * self.earth_radius_km) {
            return Err(Error::config(
                "region_radius_km",
                "must lie in [0, pi * earth_radius_km)",
            ));
        }
        if self.serving_count > self.planes * self.sats_per_plane {
            return Err(Error::config("serving_count", "exceeds the constellation size"));
        }
        if self.ut_count < 1 {
            return Err(Error::config("ut_count", "must be at least 1"));
        }
        Ok(())
    }

    pub fn orbit_radius_km(&self) -> f64 {
        self.earth_radius_km + self.altitude_km
    }

    pub fn region(&self) -> CapRegion {
        CapRegion {
            center_lat_rad: self.region_center_lat_deg.to_radians(),
            center_lon_rad: self.region_center_lon_deg.to_radians(),
            radius_km: self.region_radius_km,
            earth_radius_km: self.earth_radius_km,
        }
    }
}

/// Spherical cap on the Earth's surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapRegion {
    pub center_lat_rad: f64,
    pub center_lon_rad: f64,
    pub radius_km: f64,
    pub earth_radius_km: f64,
}

impl CapRegion {
    pub fn center_unit(&self) -> Vector3<f64> {
        unit_from_lat_lon(self.center_lat_rad, self.center_lon_rad)
    }

    pub fn angular_radius(&self) -> f64 {
        self.radius_km / self.earth_radius_km
    }

    /// Mean geodesic distance (km) from the centre of a uniform point on the cap.
    pub fn mean_geodesic_distance_km(&self) -> f64 {
        let psi = self.angular_radius();
        if psi < 1e-9 {
            return 0.0;
        }
        let num = psi.sin() - psi * psi.cos();
        let den = 1.0 - psi.cos();
        self.earth_radius_km * num / den
    }
}

pub fn unit_from_lat_lon(lat: f64, lon: f64) -> Vector3<f64> {
    Vector3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
}

/// Positions and along-track directions of every satellite of a constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub positions: Vec<Vector3<f64>>,
    pub velocity_dirs: Vec<Vector3<f64>>,
}

impl Constellation {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Builds the full Walker-Delta `i:T/P/F` snapshot.
pub fn build_walker_delta(cfg: &GeometryConfig) -> Result<Constellation> {
    cfg.validate()?;
    let radius = cfg.orbit_radius_km();
    let inc = cfg.inclination_deg.to_radians();
    let total = cfg.planes * cfg.sats_per_plane;
    let mut positions = Vec::with_capacity(total);
    let mut velocity_dirs = Vec::with_capacity(total);
    for p in 0..cfg.planes {
        let raan = 2.0 * PI * p as f64 / cfg.planes as f64;
        let phase = 2.0 * PI * (WALKER_PHASING * p) as f64 / total as f64;
        for k in 0..cfg.sats_per_plane {
            let arg = 2.0 * PI * k as f64 / cfg.sats_per_plane as f64 + phase;
            let (so, co) = raan.sin_cos();
            let (su, cu) = arg.sin_cos();
            let (si, ci) = inc.sin_cos();
            let r = Vector3::new(co * cu - so * su * ci, so * cu + co * su * ci, su * si);
            let v = Vector3::new(-co * su - so * cu * ci, -so * su + co * cu * ci, cu * si);
            positions.push(r * radius);
            velocity_dirs.push(v.normalize());
        }
    }
    Ok(Constellation {
        positions,
        velocity_dirs,
    })
}

/// Draws `cfg.ut_count` terminals uniformly (by area) over the region cap.
pub fn drop_uts<R: Rng + ?Sized>(cfg: &GeometryConfig, rng: &mut R) -> Result<Vec<Vector3<f64>>> {
    cfg.validate()?;
    Ok(sample_cap(&cfg.region(), cfg.ut_count, rng))
}

pub(crate) fn sample_cap<R: Rng + ?Sized>(cap: &CapRegion, n: usize, rng: &mut R) -> Vec<Vector3<f64>> {
    let c = cap.center_unit();
    let (east, north) = tangent_basis(&c);
    let cos_max = cap.angular_radius().cos();
    (0..n)
        .map(|_| {
            let cos_psi = 1.0 - rng.random::<f64>() * (1.0 - cos_max);
            let sin_psi = (1.0 - cos_psi * cos_psi).max(0.0).sqrt();
            let phi = 2.0 * PI * rng.random::<f64>();
            let dir = c * cos_psi + (east * phi.cos() + north * phi.sin()) * sin_psi;
            dir.normalize() * cap.earth_radius_km
        })
        .collect()
}

fn tangent_basis(c: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let z = Vector3::z();
    let east = if c.cross(&z).norm() < 1e-12 {
        Vector3::x()
    } else {
        z.cross(c).normalize()
    };
    let north = c.cross(&east);
    (east, north)
}

/// Elevation angle (rad) of `target` seen from a ground point.
pub fn elevation_from_ground(ground: &Vector3<f64>, target: &Vector3<f64>) -> f64 {
    let up = ground.normalize();
    let los = (target - ground).normalize();
    up.dot(&los).clamp(-1.0, 1.0).asin()
}

/// Serving satellites, user terminals and per-satellite array frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGeometry {
    /// Indices into the originating constellation.
    pub sat_indices: Vec<usize>,
    pub sat_positions: Vec<Vector3<f64>>,
    pub sat_velocity_dirs: Vec<Vector3<f64>>,
    pub ut_positions: Vec<Vector3<f64>>,
    /// Rows are the local x (along-track), y, z (boresight) axes.
    pub local_frames: Vec<Matrix3<f64>>,
}

impl SceneGeometry {
    pub fn n_sats(&self) -> usize {
        self.sat_positions.len()
    }

    pub fn n_uts(&self) -> usize {
        self.ut_positions.len()
    }

    pub fn distance_km(&self, s: usize, u: usize) -> f64 {
        (self.ut_positions[u] - self.sat_positions[s]).norm()
    }
}

/// Frame whose z axis points at the Earth centre and x axis along track.
pub fn local_frame(position: &Vector3<f64>, velocity_dir: &Vector3<f64>) -> Matrix3<f64> {
    let z = -position.normalize();
    let x = (velocity_dir - z * velocity_dir.dot(&z)).normalize();
    let y = z.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

/// Picks the `count` satellites whose sub-satellite points are closest to the
/// cap centre (ties by ascending index) and attaches their array frames.
pub fn select_serving_sats(
    constellation: &Constellation,
    cap: &CapRegion,
    count: usize,
    ut_positions: Vec<Vector3<f64>>,
) -> Result<SceneGeometry> {
    if count > constellation.len() {
        return Err(Error::InfeasibleScene(format!(
            "{count} serving satellites requested from a constellation of {}",
            constellation.len()
        )));
    }
    let c = cap.center_unit();
    let mut order: Vec<(f64, usize)> = constellation
        .positions
        .iter()
        .enumerate()
        .map(|(i, p)| (p.normalize().dot(&c).clamp(-1.0, 1.0).acos(), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let chosen: Vec<usize> = order.iter().take(count).map(|&(_, i)| i).collect();

    let ground = c * cap.earth_radius_km;
    let min_el = MIN_ELEVATION_DEG.to_radians();
    for &i in &chosen {
        let el = elevation_from_ground(&ground, &constellation.positions[i]);
        if el < min_el {
            return Err(Error::InfeasibleScene(format!(
                "satellite {i} is at {:.2} deg elevation; fewer than {count} satellites above {MIN_ELEVATION_DEG} deg",
                el.to_degrees()
            )));
        }
    }

    let sat_positions: Vec<_> = chosen.iter().map(|&i| constellation.positions[i]).collect();
    let sat_velocity_dirs: Vec<_> = chosen.iter().map(|&i| constellation.velocity_dirs[i]).collect();
    let local_frames = sat_positions
        .iter()
        .zip(&sat_velocity_dirs)
        .map(|(p, v)| local_frame(p, v))
        .collect();
    Ok(SceneGeometry {
        sat_indices: chosen,
        sat_positions,
        sat_velocity_dirs,
        ut_positions,
        local_frames,
    })
}

/// Constellation, drop and serving set in one call.
pub fn build_scene<R: Rng + ?Sized>(cfg: &GeometryConfig, rng: &mut R) -> Result<SceneGeometry> {
    let constellation = build_walker_delta(cfg)?;
    let uts = drop_uts(cfg, rng)?;
    select_serving_sats(&constellation, &cfg.region(), cfg.serving_count, uts)
}

/// Angles of departure per (satellite, terminal) link in the array frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AodSet {
    pub az: DMatrix<f64>,
    /// Measured from the array plane: boresight is `pi/2`.
    pub el: DMatrix<f64>,
    pub off_boresight: DMatrix<f64>,
}

/// Unit direction in an array frame for the given azimuth and elevation.
pub fn direction_from_angles(az: f64, el: f64) -> Vector3<f64> {
    Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
}

/// Azimuth and elevation of a unit direction expressed in an array frame.
pub fn angles_from_direction(d: &Vector3<f64>) -> (f64, f64) {
    let el = d.z.clamp(-1.0, 1.0).asin();
    let az = d.y.atan2(d.x);
    (az, el)
}

pub fn compute_aods(scene: &SceneGeometry) -> Result<AodSet> {
    let (ns, nu) = (scene.n_sats(), scene.n_uts());
    let mut az = DMatrix::zeros(ns, nu);
    let mut el = DMatrix::zeros(ns, nu);
    let mut off = DMatrix::zeros(ns, nu);
    for s in 0..ns {
        let frame = &scene.local_frames[s];
        for u in 0..nu {
            let delta = scene.ut_positions[u] - scene.sat_positions[s];
            let dist = delta.norm();
            if dist <= 1e-9 * scene.sat_positions[s].norm() {
                return Err(Error::DegenerateGeometry { sat: s, ut: u });
            }
            let local = frame * (delta / dist);
            let (a, e) = angles_from_direction(&local);
            az[(s, u)] = a;
            el[(s, u)] = e;
            off[(s, u)] = FRAC_PI_2 - e;
        }
    }
    Ok(AodSet {
        az,
        el,
        off_boresight: off,
    })
}
