//! System configuration and the flat `section.key = value` file grammar.
//!
//! ```text
//! # comment
//! system.antennas = 16
//! system.rho_s = 0.3
//! sweep.ports = 4, 6, 8
//! ```
//!
//! One assignment per line; `#` starts a comment; lists are comma separated.
//! Unknown keys are rejected so that typos never silently fall back to a default.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Physical and statistical parameters of one cell-free deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Number of BSs (B).
    pub n_bs: usize,
    /// Antennas per BS (M).
    pub n_antennas: usize,
    /// Number of users (U).
    pub n_users: usize,
    /// Effective ports per BS-user link (L).
    pub eff_ports: usize,
    /// Ports with inter-BS correlation (L0).
    pub corr_ports: usize,
    /// Angular spread in degrees.
    pub as_deg: f64,
    /// Carrier frequency in GHz.
    pub f0_ghz: f64,
    /// Inter-site distance in metres.
    pub d_bs: f64,
    /// User drop radius in metres.
    pub r0: f64,
    pub rho_s: f64,
    pub rho_c: f64,
    /// Noise power (linear).
    pub sigma_n2: f64,
    pub snr_db: f64,
    pub eps_ce2: f64,
    pub eps_q2: f64,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_bs: 3,
            n_antennas: 64,
            n_users: 6,
            eff_ports: 20,
            corr_ports: 4,
            as_deg: 18.0,
            f0_ghz: 2.1,
            d_bs: 250.0,
            r0: 25.0,
            rho_s: 0.0,
            rho_c: 1.0,
            sigma_n2: 1.0,
            snr_db: 15.0,
            eps_ce2: 0.0,
            eps_q2: 0.0,
            seed: 1,
        }
    }
}

impl SystemConfig {
    /// Small configuration used for desk-scale checks.
    pub fn desk() -> Self {
        Self {
            n_bs: 2,
            n_antennas: 16,
            n_users: 2,
            eff_ports: 6,
            corr_ports: 1,
            ..Self::default()
        }
    }

    /// Overall error level ε² = ε_CE² + ε_Q².
    pub fn eps2(&self) -> f64 {
        self.eps_ce2 + self.eps_q2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_bs == 0 || self.n_users == 0 || self.n_antennas == 0 {
            return bad("B, U and M must be at least 1".into());
        }
        if self.eff_ports == 0 || self.eff_ports > self.n_antennas {
            return bad(format!("need 1 <= L <= M, got L = {}, M = {}", self.eff_ports, self.n_antennas));
        }
        if self.corr_ports > self.eff_ports {
            return bad(format!("need L0 <= L, got L0 = {}, L = {}", self.corr_ports, self.eff_ports));
        }
        if !(0.0..1.0).contains(&self.eps_ce2) || !(0.0..1.0).contains(&self.eps_q2) || self.eps2() >= 1.0 {
            return bad(format!("error variances must satisfy eps_ce2 + eps_q2 < 1, got {} + {}", self.eps_ce2, self.eps_q2));
        }
        if self.rho_s.abs() > 1.0 || !(0.0..=1.0).contains(&self.rho_c) {
            return bad(format!("need |rho_s| <= 1 and 0 <= rho_c <= 1, got {} / {}", self.rho_s, self.rho_c));
        }
        if !(self.f0_ghz > 0.0 && self.d_bs > 0.0 && self.r0 >= 0.0 && self.as_deg > 0.0 && self.sigma_n2 > 0.0) {
            return bad("f0, d_BS, AS and sigma_n2 must be positive and r0 nonnegative".into());
        }
        Ok(())
    }
}

/// Selection parameters: per-user budget and its per-BS split.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    /// Total ports per user (P = K_u).
    pub ports_per_user: usize,
    pub n_rand: usize,
    /// Swap sweeps per GS-JPS round; 1 is a single pass, larger values repeat until no swap is accepted.
    pub sweeps: usize,
    /// Explicit per-BS split of P; equal split when `None`.
    pub per_bs: Option<Vec<usize>>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { ports_per_user: 4, n_rand: 100, sweeps: 1, per_bs: None }
    }
}

impl SelectionConfig {
    /// `|Λ_{b,u}|` for every BS (identical for all users).
    pub fn counts(&self, n_bs: usize) -> Result<Vec<usize>> {
        match &self.per_bs {
            Some(v) => {
                if v.len() != n_bs {
                    return Err(Error::Config(format!("selection.per_bs has {} entries, expected {}", v.len(), n_bs)));
                }
                if v.iter().sum::<usize>() != self.ports_per_user {
                    return Err(Error::Config("selection.per_bs must sum to selection.ports_per_user".into()));
                }
                Ok(v.clone())
            }
            None => {
                if self.ports_per_user % n_bs != 0 {
                    return Err(Error::Config(format!(
                        "P = {} is not divisible by B = {}; set selection.per_bs",
                        self.ports_per_user, n_bs
                    )));
                }
                Ok(vec![self.ports_per_user / n_bs; n_bs])
            }
        }
    }
}

/// Analytic engine knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticConfig {
    /// Maximum number of series terms (L_μ).
    pub l_mu: usize,
    pub tail_tol: f64,
    /// Relative eigenvalue threshold for numerical rank.
    pub rank_tol: f64,
    /// Series is used when its predicted length stays within this budget;
    /// longer expansions are evaluated by quadrature instead.
    pub series_budget: usize,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        Self { l_mu: 5000, tail_tol: 1e-12, rank_tol: 1e-10, series_budget: 400 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_real: usize,
    pub n_scen: usize,
    /// Scenario draws behind each compression-ratio CCDF.
    pub ccdf_scen: usize,
    /// Users closer than this to a BS are redrawn.
    pub min_distance_m: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { n_real: 10_000, n_scen: 50, ccdf_scen: 500, min_distance_m: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackConfig {
    pub bits_amp: u32,
    pub bits_phase: u32,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self { bits_amp: 4, bits_phase: 3 }
    }
}

/// Sweep axes for the experiment runner. Empty axes fall back to the
/// corresponding scalar of the base configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepConfig {
    pub ports: Vec<usize>,
    pub eff_ports: Vec<usize>,
    pub corr_ports: Vec<usize>,
    pub rho_s: Vec<f64>,
    pub rho_c: Vec<f64>,
    pub eps2: Vec<f64>,
}

/// Everything a configuration file can set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub selection: SelectionConfig,
    pub analytic: AnalyticConfig,
    pub sim: SimConfig,
    pub feedback: FeedbackConfig,
    pub sweep: SweepConfig,
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse::<T>().map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(key, s)).collect()
}

fn fmt_list<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parse the flat key-value grammar on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `section.key = value`", lineno + 1)))?;
            let key = key.trim();
            if !key.contains('.') {
                return Err(Error::Config(format!("line {}: key `{key}` has no section", lineno + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        let mut cfg = RunConfig::default();
        for (key, v) in &entries {
            let k = key.as_str();
            let s = &mut cfg.system;
            match k {
                "system.bs" => s.n_bs = parse_num(k, v)?,
                "system.antennas" => s.n_antennas = parse_num(k, v)?,
                "system.users" => s.n_users = parse_num(k, v)?,
                "system.eff_ports" => s.eff_ports = parse_num(k, v)?,
                "system.corr_ports" => s.corr_ports = parse_num(k, v)?,
                "system.as_deg" => s.as_deg = parse_num(k, v)?,
                "system.f0_ghz" => s.f0_ghz = parse_num(k, v)?,
                "system.d_bs" => s.d_bs = parse_num(k, v)?,
                "system.r0" => s.r0 = parse_num(k, v)?,
                "system.rho_s" => s.rho_s = parse_num(k, v)?,
                "system.rho_c" => s.rho_c = parse_num(k, v)?,
                "system.sigma_n2" => s.sigma_n2 = parse_num(k, v)?,
                "system.snr_db" => s.snr_db = parse_num(k, v)?,
                "system.eps_ce2" => s.eps_ce2 = parse_num(k, v)?,
                "system.eps_q2" => s.eps_q2 = parse_num(k, v)?,
                "system.seed" => s.seed = parse_num(k, v)?,
                "selection.ports_per_user" => cfg.selection.ports_per_user = parse_num(k, v)?,
                "selection.n_rand" => cfg.selection.n_rand = parse_num(k, v)?,
                "selection.sweeps" => cfg.selection.sweeps = parse_num(k, v)?,
                "selection.per_bs" => cfg.selection.per_bs = Some(parse_list(k, v)?),
                "analytic.l_mu" => cfg.analytic.l_mu = parse_num(k, v)?,
                "analytic.tail_tol" => cfg.analytic.tail_tol = parse_num(k, v)?,
                "analytic.rank_tol" => cfg.analytic.rank_tol = parse_num(k, v)?,
                "analytic.series_budget" => cfg.analytic.series_budget = parse_num(k, v)?,
                "sim.n_real" => cfg.sim.n_real = parse_num(k, v)?,
                "sim.n_scen" => cfg.sim.n_scen = parse_num(k, v)?,
                "sim.ccdf_scen" => cfg.sim.ccdf_scen = parse_num(k, v)?,
                "sim.min_distance_m" => cfg.sim.min_distance_m = parse_num(k, v)?,
                "feedback.bits_amp" => cfg.feedback.bits_amp = parse_num(k, v)?,
                "feedback.bits_phase" => cfg.feedback.bits_phase = parse_num(k, v)?,
                "sweep.ports" => cfg.sweep.ports = parse_list(k, v)?,
                "sweep.eff_ports" => cfg.sweep.eff_ports = parse_list(k, v)?,
                "sweep.corr_ports" => cfg.sweep.corr_ports = parse_list(k, v)?,
                "sweep.rho_s" => cfg.sweep.rho_s = parse_list(k, v)?,
                "sweep.rho_c" => cfg.sweep.rho_c = parse_list(k, v)?,
                "sweep.eps2" => cfg.sweep.eps2 = parse_list(k, v)?,
                _ => return Err(Error::Config(format!("unknown key `{k}`"))),
            }
        }
        cfg.system.validate()?;
        if cfg.feedback.bits_amp == 0 || cfg.feedback.bits_phase == 0 {
            return Err(Error::Config("quantizer bit widths must be at least 1".into()));
        }
        Ok(cfg)
    }

    /// Serialize back into the file grammar; `parse(to_kv())` reproduces `self`.
    pub fn to_kv(&self) -> String {
        let s = &self.system;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("system.bs", s.n_bs.to_string());
        put("system.antennas", s.n_antennas.to_string());
        put("system.users", s.n_users.to_string());
        put("system.eff_ports", s.eff_ports.to_string());
        put("system.corr_ports", s.corr_ports.to_string());
        put("system.as_deg", s.as_deg.to_string());
        put("system.f0_ghz", s.f0_ghz.to_string());
        put("system.d_bs", s.d_bs.to_string());
        put("system.r0", s.r0.to_string());
        put("system.rho_s", s.rho_s.to_string());
        put("system.rho_c", s.rho_c.to_string());
        put("system.sigma_n2", s.sigma_n2.to_string());
        put("system.snr_db", s.snr_db.to_string());
        put("system.eps_ce2", s.eps_ce2.to_string());
        put("system.eps_q2", s.eps_q2.to_string());
        put("system.seed", s.seed.to_string());
        put("selection.ports_per_user", self.selection.ports_per_user.to_string());
        put("selection.n_rand", self.selection.n_rand.to_string());
        put("selection.sweeps", self.selection.sweeps.to_string());
        if let Some(p) = &self.selection.per_bs {
            put("selection.per_bs", fmt_list(p));
        }
        put("analytic.l_mu", self.analytic.l_mu.to_string());
        put("analytic.tail_tol", self.analytic.tail_tol.to_string());
        put("analytic.rank_tol", self.analytic.rank_tol.to_string());
        put("analytic.series_budget", self.analytic.series_budget.to_string());
        put("sim.n_real", self.sim.n_real.to_string());
        put("sim.n_scen", self.sim.n_scen.to_string());
        put("sim.ccdf_scen", self.sim.ccdf_scen.to_string());
        put("sim.min_distance_m", self.sim.min_distance_m.to_string());
        put("feedback.bits_amp", self.feedback.bits_amp.to_string());
        put("feedback.bits_phase", self.feedback.bits_phase.to_string());
        let sw = &self.sweep;
        for (k, v) in [
            ("sweep.ports", fmt_list(&sw.ports)),
            ("sweep.eff_ports", fmt_list(&sw.eff_ports)),
            ("sweep.corr_ports", fmt_list(&sw.corr_ports)),
            ("sweep.rho_s", fmt_list(&sw.rho_s)),
            ("sweep.rho_c", fmt_list(&sw.rho_c)),
            ("sweep.eps2", fmt_list(&sw.eps2)),
        ] {
            if !v.is_empty() {
                put(k, v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "# desk\nsystem.antennas = 16\nsystem.bs = 2\nsystem.users=2\nsystem.eff_ports = 6\n\
                    system.corr_ports = 1\nsystem.rho_s = 0.3 # trailing\nsweep.ports = 4, 6,8\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.system.n_antennas, 16);
        assert_eq!(cfg.system.rho_s, 0.3);
        assert_eq!(cfg.sweep.ports, vec![4, 6, 8]);
        let again = RunConfig::parse(&cfg.to_kv()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(RunConfig::parse("system.antenas = 4"), Err(Error::Config(_))));
        assert!(RunConfig::parse("antennas = 4").is_err());
        assert!(RunConfig::parse("system.eff_ports = 80").is_err());
        assert!(RunConfig::parse("system.eps_ce2 = 0.6\nsystem.eps_q2 = 0.5").is_err());
        assert!(RunConfig::parse("system.rho_c = 1.5").is_err());
        assert!(RunConfig::parse("system.bs = 1\nsystem.bs = 2").is_err());
    }

    #[test]
    fn per_bs_split() {
        let sel = SelectionConfig { ports_per_user: 15, n_rand: 1, sweeps: 1, per_bs: None };
        assert_eq!(sel.counts(3).unwrap(), vec![5, 5, 5]);
        assert!(sel.counts(2).is_err());
        let sel = SelectionConfig { ports_per_user: 5, n_rand: 1, sweeps: 1, per_bs: Some(vec![3, 2]) };
        assert_eq!(sel.counts(2).unwrap(), vec![3, 2]);
    }
}
