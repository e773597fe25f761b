//! Random instances on a wrapped-around hexagonal relay layout with
//! distance-based pathloss and Rayleigh fading.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::model::ProblemInstance;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// 7 or 19.
    pub num_relays: usize,
    pub num_users: usize,
    /// Meters.
    pub inter_site_distance: f64,
    /// Meters.
    pub relay_height: f64,
    /// Pathloss `a + b log10(d_km)` in dB.
    pub pathloss_a: f64,
    pub pathloss_b: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub seed: u64,
    /// Common SINR target of the generated instance.
    pub gamma_db: f64,
    /// Common fronthaul capacity, bits per channel use.
    pub cbar: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            num_relays: 7,
            num_users: 8,
            inter_site_distance: 150.0,
            relay_height: 30.0,
            pathloss_a: 140.7,
            pathloss_b: 36.7,
            noise_psd_dbm_hz: -169.0,
            bandwidth_hz: 2e7,
            seed: 0,
            gamma_db: 4.0,
            cbar: 3.0,
        }
    }
}

impl Scenario {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_relays != 7 && self.num_relays != 19 {
            return Err(Error::UnsupportedRelayCount(self.num_relays));
        }
        if self.num_users == 0 {
            return Err(Error::InvalidParameter("num_users must be positive".into()));
        }
        if !(self.inter_site_distance > 0.0) {
            return Err(Error::InvalidParameter("inter_site_distance must be positive".into()));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::InvalidParameter("bandwidth_hz must be positive".into()));
        }
        if !(self.relay_height >= 0.0) {
            return Err(Error::InvalidParameter("relay_height must be nonnegative".into()));
        }
        if !(self.cbar > 0.0) || !self.gamma_db.is_finite() {
            return Err(Error::InvalidParameter("gamma_db must be finite and cbar positive".into()));
        }
        Ok(())
    }

    /// Total noise power in dBm.
    pub fn noise_dbm(&self) -> f64 {
        self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10()
    }

    pub fn pathloss_db(&self, d_km: f64) -> f64 {
        self.pathloss_a + self.pathloss_b * d_km.log10()
    }

    /// Pathloss gain over noise power, both linear.
    pub fn normalized_gain(&self, d_m: f64) -> f64 {
        10f64.powf(-(self.pathloss_db(d_m / 1000.0) + self.noise_dbm()) / 10.0)
    }

    fn basis(&self) -> (Point, Point) {
        let d = self.inter_site_distance;
        ([d, 0.0], [0.5 * d, 0.5 * 3f64.sqrt() * d])
    }

    /// Translations of the wrap-around: the origin plus six rotated copies of
    /// the cluster period.
    pub fn wrap_translations(&self) -> Result<Vec<Point>> {
        let (i, j) = match self.num_relays {
            7 => (2.0, 1.0),
            19 => (3.0, 2.0),
            n => return Err(Error::UnsupportedRelayCount(n)),
        };
        let (a1, a2) = self.basis();
        let t = [i * a1[0] + j * a2[0], i * a1[1] + j * a2[1]];
        let mut out = vec![[0.0, 0.0]];
        for r in 0..6 {
            out.push(rotate(t, r as f64 * std::f64::consts::FRAC_PI_3));
        }
        Ok(out)
    }
}

fn rotate(p: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Relay sites: origin first, then ring 1, then ring 2 (19 sites only).
pub fn relay_positions(sc: &Scenario) -> Result<Vec<Point>> {
    let rings: i32 = match sc.num_relays {
        7 => 1,
        19 => 2,
        n => return Err(Error::UnsupportedRelayCount(n)),
    };
    let (a1, a2) = sc.basis();
    let mut sites: Vec<(i32, f64, Point)> = Vec::new();
    for i in -rings..=rings {
        for j in -rings..=rings {
            // hex distance in axial coordinates
            let hex = (i.abs() + j.abs() + (i + j).abs()) / 2;
            if hex > rings {
                continue;
            }
            let p = [
                i as f64 * a1[0] + j as f64 * a2[0],
                i as f64 * a1[1] + j as f64 * a2[1],
            ];
            let angle = p[1].atan2(p[0]).rem_euclid(std::f64::consts::TAU);
            sites.push((hex, angle, p));
        }
    }
    sites.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(sites.into_iter().map(|s| s.2).collect())
}

/// Ground distance from `user` to `relay` without wrap-around.
pub fn plain_distance(user: Point, relay: Point) -> f64 {
    dist(user, relay)
}

/// Minimum ground distance from `user` over the images of `relay`.
pub fn wrapped_distance(translations: &[Point], user: Point, relay: Point) -> f64 {
    translations
        .iter()
        .map(|t| dist(user, [relay[0] + t[0], relay[1] + t[1]]))
        .fold(f64::INFINITY, f64::min)
}

/// Whether `p` (relative to a site) lies in that site's hexagonal cell.
fn in_cell(p: Point, d: f64) -> bool {
    (0..3).all(|r| {
        let (s, c) = (r as f64 * std::f64::consts::FRAC_PI_3).sin_cos();
        (p[0] * c + p[1] * s).abs() <= 0.5 * d
    })
}

/// Uniform point in the union of the hexagonal cells.
pub fn sample_user<R: Rng>(sc: &Scenario, sites: &[Point], rng: &mut R) -> Point {
    let d = sc.inter_site_distance;
    let r = d / 3f64.sqrt();
    let site = sites[rng.random_range(0..sites.len())];
    loop {
        let p = [rng.random_range(-0.5 * d..=0.5 * d), rng.random_range(-r..=r)];
        if in_cell(p, d) {
            return [site[0] + p[0], site[1] + p[1]];
        }
    }
}

/// Places users, then draws `h_{k,m} = √g_{k,m} z` with `z ~ CN(0, 1)`.
/// Noise is normalized out, so every `σ_k² = 1`.
pub fn generate_instance(sc: &Scenario) -> Result<ProblemInstance> {
    Ok(generate_with_positions(sc)?.0)
}

/// Like [`generate_instance`], also returning the user positions.
pub fn generate_with_positions(sc: &Scenario) -> Result<(ProblemInstance, Vec<Point>)> {
    sc.validate()?;
    let sites = relay_positions(sc)?;
    let shifts = sc.wrap_translations()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut users = Vec::with_capacity(sc.num_users);
    let mut channels = Vec::with_capacity(sc.num_users);
    for _ in 0..sc.num_users {
        let u = sample_user(sc, &sites, &mut rng);
        let h = CVec::from_iterator(
            sites.len(),
            sites.iter().map(|&s| {
                let ground = wrapped_distance(&shifts, u, s);
                let g = sc.normalized_gain(ground.hypot(sc.relay_height));
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * (0.5 * g).sqrt()
            }),
        );
        users.push(u);
        channels.push(h);
    }
    let k = sc.num_users;
    let inst = ProblemInstance::new(
        channels,
        vec![1.0; k],
        vec![sc.gamma_db; k],
        vec![sc.cbar; sites.len()],
    )?;
    Ok((inst, users))
}
