//! Deterministic channel statistics: BS/user geometry, path loss, truncated
//! Laplacian port power profiles and the per-user port correlation matrices.

use std::f64::consts::PI;
use std::io::Write;
use std::ops::Range;

use log::warn;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{CMat, HermitianEigen, ZERO};

/// Placement attempts per user before giving up.
pub const PLACEMENT_RETRIES: usize = 100;

/// Below this relative level a negative eigenvalue counts as round-off.
pub const EIGEN_FLOOR: f64 = 1e-10;
/// Beyond this relative level an indefinite correlation matrix is an error
/// (or a warning under [`IndefinitePolicy::Clip`]).
pub const INDEFINITE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn polar(r: f64, theta: f64) -> Self {
        Self { x: r * theta.cos(), y: r * theta.sin() }
    }

    pub fn dist(&self, o: &Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

/// BS and user positions plus all link distances.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub bs: Vec<Point>,
    pub users: Vec<Point>,
    /// Circle centres the users were dropped around.
    pub centers: Vec<Point>,
    /// `distances[b * U + u]`.
    pub distances: Vec<f64>,
}

impl Geometry {
    pub fn distance(&self, b: usize, u: usize) -> f64 {
        self.distances[b * self.users.len() + u]
    }
}

/// BS `b` sits at the centre of its hexagonal cell, `d_BS/√3` from the
/// common corner, on the ray shared with its intra-cell user centre.
pub fn bs_positions(config: &SystemConfig) -> Vec<Point> {
    let radius = config.d_bs / 3f64.sqrt();
    (0..config.n_bs)
        .map(|b| Point::polar(radius, -PI / 6.0 + 2.0 * PI * b as f64 / config.n_bs as f64))
        .collect()
}

/// Drop centres: the first `⌈U/2⌉` users are intra-cell users at
/// `(d_BS/2, −π/6 + 2πi/n)`, the rest cell-edge users at `(d_BS/8, π/6 + 2πi/n)`.
/// For B = 3, U = 6 this is exactly the hexagonal three-cell layout.
pub fn user_centers(config: &SystemConfig) -> Vec<Point> {
    let n_intra = config.n_users.div_ceil(2);
    let n_edge = config.n_users - n_intra;
    let mut centers = Vec::with_capacity(config.n_users);
    for i in 0..n_intra {
        centers.push(Point::polar(config.d_bs / 2.0, -PI / 6.0 + 2.0 * PI * i as f64 / n_intra as f64));
    }
    for i in 0..n_edge {
        centers.push(Point::polar(config.d_bs / 8.0, PI / 6.0 + 2.0 * PI * i as f64 / n_edge as f64));
    }
    centers
}

/// Drop each user uniformly in a disc of radius `r0` around its centre.
/// Draws closer than `min_distance` to any BS are redrawn.
pub fn place_users<R: Rng + ?Sized>(config: &SystemConfig, min_distance: f64, rng: &mut R) -> Result<Geometry> {
    config.validate()?;
    let bs = bs_positions(config);
    let centers = user_centers(config);
    let mut users = Vec::with_capacity(centers.len());
    for (u, c) in centers.iter().enumerate() {
        let mut placed = None;
        let mut last_bs = 0;
        for _ in 0..PLACEMENT_RETRIES {
            let r = config.r0 * rng.random::<f64>().sqrt();
            let phi = 2.0 * PI * rng.random::<f64>();
            let p = Point { x: c.x + r * phi.cos(), y: c.y + r * phi.sin() };
            match bs.iter().position(|s| s.dist(&p) < min_distance.max(f64::MIN_POSITIVE)) {
                Some(b) => last_bs = b,
                None => {
                    placed = Some(p);
                    break;
                }
            }
        }
        users.push(placed.ok_or(Error::Placement { user: u, bs: last_bs, retries: PLACEMENT_RETRIES })?);
    }
    let mut distances = Vec::with_capacity(bs.len() * users.len());
    for s in &bs {
        for p in &users {
            distances.push(s.dist(p));
        }
    }
    Ok(Geometry { bs, users, centers, distances })
}

/// Large-scale gain in dB: `−28 − 20 log10(f0) − 22 log10(d)`.
pub fn path_loss_db(f0_ghz: f64, d: f64) -> Result<f64> {
    if !(f0_ghz > 0.0) || !(d > 0.0) {
        return Err(Error::Domain(format!("path loss needs f0 > 0 and d > 0, got f0 = {f0_ghz}, d = {d}")));
    }
    Ok(-28.0 - 20.0 * f0_ghz.log10() - 22.0 * d.log10())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Direction of the DFT beam of (0-based) port `m`: `asin(2m/M − 1)`.
pub fn port_angle(m: usize, n_antennas: usize) -> f64 {
    (2.0 * m as f64 / n_antennas as f64 - 1.0).clamp(-1.0, 1.0).asin()
}

/// Port whose beam is closest to the BS→user direction. The array broadside
/// points at the origin; the ULA cannot tell front from back, so only the
/// sine of the departure angle matters.
pub fn los_port(bs: &Point, user: &Point, n_antennas: usize) -> usize {
    let broadside = (-bs.y).atan2(-bs.x);
    let dir = (user.y - bs.y).atan2(user.x - bs.x);
    let s = (dir - broadside).sin();
    let idx = ((s + 1.0) * n_antennas as f64 / 2.0).round() as isize;
    idx.clamp(0, n_antennas as isize - 1) as usize
}

/// `L` contiguous ports around `los`: ⌈(L−1)/2⌉ below, ⌊(L−1)/2⌋ above,
/// shifted inward at the array edges.
pub fn effective_window(los: usize, eff_ports: usize, n_antennas: usize) -> Result<Range<usize>> {
    if eff_ports == 0 || eff_ports > n_antennas {
        return Err(Error::Config(format!("need 1 <= L <= M, got L = {eff_ports}, M = {n_antennas}")));
    }
    if los >= n_antennas {
        return Err(Error::Config(format!("LoS port {los} outside [0, {n_antennas})")));
    }
    let below = eff_ports / 2; // ⌈(L−1)/2⌉
    let start = (los as isize - below as isize).clamp(0, (n_antennas - eff_ports) as isize) as usize;
    Ok(start..start + eff_ports)
}

/// Truncated Laplacian power angular profile over the effective window,
/// normalized so the entries sum to `link_gain`.
pub fn port_power_profile(link_gain: f64, los: usize, eff_ports: usize, as_deg: f64, n_antennas: usize) -> Result<Vec<f64>> {
    let window = effective_window(los, eff_ports, n_antennas)?;
    let sigma = as_deg.to_radians();
    let center = port_angle(los, n_antennas);
    let mut p = vec![0.0; n_antennas];
    for m in window.clone() {
        p[m] = (-(2f64.sqrt()) * (port_angle(m, n_antennas) - center).abs() / sigma).exp();
    }
    let total: f64 = p.iter().sum();
    for v in p.iter_mut() {
        *v *= link_gain / total;
    }
    Ok(p)
}

/// What to do when a correlation matrix is indefinite beyond round-off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndefinitePolicy {
    #[default]
    Reject,
    /// Clip negative eigenvalues to zero and log a warning.
    Clip,
}

/// Per-user `BM × BM` correlation matrices.
///
/// `windows[b * U + u]` are the effective ports of link (b, u). Intra-BS
/// blocks follow the exponential model `ρ_s^{|l−l′|}`; the first `L0`
/// effective ports of a user at BS b are paired offset-wise with the first
/// `L0` at every other BS with coefficient `ρ_c`.
pub fn build_port_correlation(config: &SystemConfig, windows: &[Range<usize>], policy: IndefinitePolicy) -> Result<Vec<CMat>> {
    let (nb, nu, m) = (config.n_bs, config.n_users, config.n_antennas);
    if windows.len() != nb * nu {
        return Err(Error::Dimension { expected: nb * nu, got: windows.len() });
    }
    let mut out = Vec::with_capacity(nu);
    for u in 0..nu {
        let mut r = CMat::from_element(nb * m, nb * m, ZERO);
        for b in 0..nb {
            let w = &windows[b * nu + u];
            for l in w.clone() {
                for l2 in w.clone() {
                    let d = l.abs_diff(l2) as i32;
                    r[(b * m + l, b * m + l2)] = Complex64::new(config.rho_s.powi(d), 0.0);
                }
            }
            for b2 in (0..nb).filter(|&b2| b2 != b) {
                let w2 = &windows[b2 * nu + u];
                for i in 0..config.corr_ports {
                    r[(b * m + w.start + i, b2 * m + w2.start + i)] = Complex64::new(config.rho_c, 0.0);
                }
            }
        }
        out.push(check_psd(r, u, policy)?);
    }
    Ok(out)
}

fn check_psd(r: CMat, user: usize, policy: IndefinitePolicy) -> Result<CMat> {
    let eig = HermitianEigen::new(&r);
    let (lmax, lmin) = (eig.max(), eig.min());
    if lmin >= -EIGEN_FLOOR * lmax.max(1.0) {
        return Ok(r);
    }
    if lmin < -INDEFINITE_TOL * lmax {
        match policy {
            IndefinitePolicy::Reject => return Err(Error::Indefinite { user, most_negative: lmin }),
            IndefinitePolicy::Clip => warn!("user {user}: clipping indefinite correlation matrix (λ_min = {lmin:e})"),
        }
    }
    Ok(eig.apply(|v| v.max(0.0)))
}

/// Average port powers and correlation for every BS-user link.
#[derive(Debug, Clone)]
pub struct ScenarioStatistics {
    pub n_bs: usize,
    pub n_antennas: usize,
    pub n_users: usize,
    /// `beta_bar[(b * U + u) * M + m]`.
    pub beta_bar: Vec<f64>,
    /// `link_gain[b * U + u]` = β̄_{b,u}.
    pub link_gain: Vec<f64>,
    /// Per-user correlation matrices, `BM × BM`.
    pub r: Vec<CMat>,
    pub los_port: Vec<usize>,
    pub effective: Vec<Range<usize>>,
}

impl ScenarioStatistics {
    /// Assemble statistics from explicit parts (used by tests and the FFI).
    pub fn from_parts(n_bs: usize, n_antennas: usize, n_users: usize, beta_bar: Vec<f64>, r: Vec<CMat>) -> Result<Self> {
        if beta_bar.len() != n_bs * n_users * n_antennas {
            return Err(Error::Dimension { expected: n_bs * n_users * n_antennas, got: beta_bar.len() });
        }
        if r.len() != n_users || r.iter().any(|m| m.nrows() != n_bs * n_antennas || m.ncols() != n_bs * n_antennas) {
            return Err(Error::Dimension { expected: n_bs * n_antennas, got: r.first().map_or(0, |m| m.nrows()) });
        }
        if beta_bar.iter().any(|&b| !(b >= 0.0) || !b.is_finite()) {
            return Err(Error::Statistics("port powers must be finite and nonnegative".into()));
        }
        let mut link_gain = Vec::with_capacity(n_bs * n_users);
        let mut los_port = Vec::with_capacity(n_bs * n_users);
        let mut effective = Vec::with_capacity(n_bs * n_users);
        for chunk in beta_bar.chunks(n_antennas) {
            link_gain.push(chunk.iter().sum());
            let los = (0..n_antennas).max_by(|&i, &j| chunk[i].total_cmp(&chunk[j]).then(j.cmp(&i))).unwrap_or(0);
            los_port.push(los);
            let first = chunk.iter().position(|&v| v > 0.0).unwrap_or(0);
            let last = chunk.iter().rposition(|&v| v > 0.0).map_or(0, |i| i + 1);
            effective.push(first..last.max(first));
        }
        Ok(Self { n_bs, n_antennas, n_users, beta_bar, link_gain, r, los_port, effective })
    }

    pub fn beta(&self, b: usize, u: usize, m: usize) -> f64 {
        self.beta_bar[(b * self.n_users + u) * self.n_antennas + m]
    }

    pub fn beta_row(&self, b: usize, u: usize) -> &[f64] {
        let s = (b * self.n_users + u) * self.n_antennas;
        &self.beta_bar[s..s + self.n_antennas]
    }

    pub fn link_gain(&self, b: usize, u: usize) -> f64 {
        self.link_gain[b * self.n_users + u]
    }

    /// `ρ^{l,l′}_{u,b,b′}`.
    pub fn corr(&self, u: usize, b: usize, l: usize, b2: usize, l2: usize) -> Complex64 {
        self.r[u][(b * self.n_antennas + l, b2 * self.n_antennas + l2)]
    }

    /// β̄ of the weakest BS-user link (the SNR reference).
    pub fn min_link_gain(&self) -> f64 {
        self.link_gain.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Per-(b,u,m) rows for the scenario dump.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "b,u,m,beta_bar")?;
        for b in 0..self.n_bs {
            for u in 0..self.n_users {
                for m in 0..self.n_antennas {
                    writeln!(w, "{b},{u},{m},{:e}", self.beta(b, u, m))?;
                }
            }
        }
        Ok(())
    }

    /// Correlation matrices as dense row-major `[re, im]` pairs.
    pub fn write_correlation_json<W: Write>(&self, w: W) -> Result<()> {
        #[derive(Serialize)]
        struct UserR {
            user: usize,
            data: Vec<[f64; 2]>,
        }
        #[derive(Serialize)]
        struct Dump {
            format_version: u32,
            dim: usize,
            users: Vec<UserR>,
        }
        let dim = self.n_bs * self.n_antennas;
        let users = self
            .r
            .iter()
            .enumerate()
            .map(|(u, r)| UserR {
                user: u,
                data: (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| [r[(i, j)].re, r[(i, j)].im]).collect(),
            })
            .collect();
        serde_json::to_writer(w, &Dump { format_version: 1, dim, users })?;
        Ok(())
    }
}

/// Transmit power bookkeeping: `SNR = P_tx β̄_min / σ_n²`, `P_u = P_tx / U`.
#[derive(Debug, Clone, PartialEq)]
pub struct TxPower {
    pub p_tx: f64,
    pub per_user: Vec<f64>,
}

impl TxPower {
    pub fn from_snr(snr_db: f64, sigma_n2: f64, beta_min: f64, n_users: usize) -> Self {
        let p_tx = db_to_linear(snr_db) * sigma_n2 / beta_min;
        Self { p_tx, per_user: vec![p_tx / n_users as f64; n_users] }
    }
}

/// A generated deployment: geometry, statistics and power.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SystemConfig,
    pub geometry: Geometry,
    pub stats: ScenarioStatistics,
    pub power: TxPower,
}

impl Scenario {
    pub fn generate<R: Rng + ?Sized>(config: &SystemConfig, min_distance: f64, policy: IndefinitePolicy, rng: &mut R) -> Result<Self> {
        let geometry = place_users(config, min_distance, rng)?;
        Self::from_geometry(config, geometry, policy)
    }

    pub fn from_geometry(config: &SystemConfig, geometry: Geometry, policy: IndefinitePolicy) -> Result<Self> {
        let (nb, nu, m) = (config.n_bs, config.n_users, config.n_antennas);
        let mut beta_bar = Vec::with_capacity(nb * nu * m);
        let mut link_gain = Vec::with_capacity(nb * nu);
        let mut los = Vec::with_capacity(nb * nu);
        let mut windows = Vec::with_capacity(nb * nu);
        for b in 0..nb {
            for u in 0..nu {
                let gain = db_to_linear(path_loss_db(config.f0_ghz, geometry.distance(b, u))?);
                let p = los_port(&geometry.bs[b], &geometry.users[u], m);
                beta_bar.extend(port_power_profile(gain, p, config.eff_ports, config.as_deg, m)?);
                link_gain.push(gain);
                los.push(p);
                windows.push(effective_window(p, config.eff_ports, m)?);
            }
        }
        let r = build_port_correlation(config, &windows, policy)?;
        let stats = ScenarioStatistics { n_bs: nb, n_antennas: m, n_users: nu, beta_bar, link_gain, r, los_port: los, effective: windows };
        let power = TxPower::from_snr(config.snr_db, config.sigma_n2, stats.min_link_gain(), nu);
        Ok(Self { config: config.clone(), geometry, stats, power })
    }
}
