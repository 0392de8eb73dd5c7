//! Port selections `Λ_{b,u}` and their JSON interchange format.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SelectionError};

/// Selected port indices (0-based, strictly increasing) for every BS-user pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PortSelection {
    n_bs: usize,
    n_antennas: usize,
    n_users: usize,
    /// `sets[b * U + u]`.
    sets: Vec<Vec<usize>>,
}

impl PortSelection {
    pub fn empty(n_bs: usize, n_antennas: usize, n_users: usize) -> Self {
        Self { n_bs, n_antennas, n_users, sets: vec![Vec::new(); n_bs * n_users] }
    }

    /// Build from `sets[b][u]`, sorting each set and validating the result.
    pub fn from_sets(n_antennas: usize, sets: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let n_bs = sets.len();
        let n_users = sets.first().map_or(0, Vec::len);
        let mut sel = Self::empty(n_bs, n_antennas, n_users);
        for (b, row) in sets.into_iter().enumerate() {
            if row.len() != n_users {
                return Err(SelectionError::Shape { expected: (n_bs, n_users, n_antennas), got: (n_bs, row.len(), n_antennas) }.into());
            }
            for (u, mut s) in row.into_iter().enumerate() {
                s.sort_unstable();
                sel.sets[b * n_users + u] = s;
            }
        }
        sel.validate(None)?;
        Ok(sel)
    }

    pub fn n_bs(&self) -> usize {
        self.n_bs
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    /// `Λ_{b,u}`.
    pub fn get(&self, b: usize, u: usize) -> &[usize] {
        &self.sets[b * self.n_users + u]
    }

    /// Replace `Λ_{b,u}`; the set is sorted but not validated.
    pub fn set(&mut self, b: usize, u: usize, mut ports: Vec<usize>) {
        ports.sort_unstable();
        self.sets[b * self.n_users + u] = ports;
    }

    /// `K_u = Σ_b |Λ_{b,u}|`.
    pub fn k(&self, u: usize) -> usize {
        (0..self.n_bs).map(|b| self.get(b, u).len()).sum()
    }

    /// `(b, m)` pairs of user u, BS-major; the row order of `Λ_u`.
    pub fn user_ports(&self, u: usize) -> Vec<(usize, usize)> {
        (0..self.n_bs).flat_map(|b| self.get(b, u).iter().map(move |&m| (b, m))).collect()
    }

    /// Positions in the stacked `BM` vector of user u's selected ports.
    pub fn stacked_indices(&self, u: usize) -> Vec<usize> {
        self.user_ports(u).into_iter().map(|(b, m)| b * self.n_antennas + m).collect()
    }

    /// Per-BS owner map: `owner[b * M + m] = Some(u)` if user u holds port m at BS b.
    pub fn owners(&self) -> Vec<Option<usize>> {
        let mut owner = vec![None; self.n_bs * self.n_antennas];
        for b in 0..self.n_bs {
            for u in 0..self.n_users {
                for &m in self.get(b, u) {
                    owner[b * self.n_antennas + m] = Some(u);
                }
            }
        }
        owner
    }

    /// Check index ranges, ordering, per-BS disjointness and optional budgets `N_u`.
    pub fn validate(&self, budget: Option<&[usize]>) -> std::result::Result<(), SelectionError> {
        for b in 0..self.n_bs {
            let mut owner: Vec<Option<usize>> = vec![None; self.n_antennas];
            for u in 0..self.n_users {
                let s = self.get(b, u);
                for (i, &m) in s.iter().enumerate() {
                    if m >= self.n_antennas {
                        return Err(SelectionError::OutOfRange { bs: b, user: u, port: m, m: self.n_antennas });
                    }
                    if i > 0 && s[i - 1] >= m {
                        return Err(SelectionError::Duplicate { bs: b, user: u, port: m });
                    }
                    if let Some(other) = owner[m] {
                        return Err(SelectionError::Shared { bs: b, user: other, other: u, port: m });
                    }
                    owner[m] = Some(u);
                }
            }
        }
        if let Some(n) = budget {
            for u in 0..self.n_users {
                let k = self.k(u);
                if let Some(&cap) = n.get(u) {
                    if k > cap {
                        return Err(SelectionError::Budget { user: u, count: k, budget: cap });
                    }
                }
            }
        }
        Ok(())
    }

    /// Check the selection dimensions against a configuration.
    pub fn check_shape(&self, n_bs: usize, n_antennas: usize, n_users: usize) -> std::result::Result<(), SelectionError> {
        if (self.n_bs, self.n_users, self.n_antennas) != (n_bs, n_users, n_antennas) {
            return Err(SelectionError::Shape { expected: (n_bs, n_users, n_antennas), got: (self.n_bs, self.n_users, self.n_antennas) });
        }
        Ok(())
    }

    /// Label mask `p[u][b][m] ∈ {0,1}` flattened in that order.
    pub fn mask(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.n_users * self.n_bs * self.n_antennas];
        for u in 0..self.n_users {
            for b in 0..self.n_bs {
                for &m in self.get(b, u) {
                    out[(u * self.n_bs + b) * self.n_antennas + m] = 1;
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&SelectionFile::from(self))?)
    }

    /// Parse and validate a selection document.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: SelectionFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

/// Serialized selection: per user, a list of `[bs, port]` pairs (0-based).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SelectionFile {
    pub format_version: u32,
    pub n_bs: usize,
    pub n_antennas: usize,
    pub n_users: usize,
    pub users: Vec<UserPorts>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UserPorts {
    pub user: usize,
    pub ports: Vec<(usize, usize)>,
}

pub const SELECTION_FORMAT_VERSION: u32 = 1;

impl From<&PortSelection> for SelectionFile {
    fn from(s: &PortSelection) -> Self {
        Self {
            format_version: SELECTION_FORMAT_VERSION,
            n_bs: s.n_bs,
            n_antennas: s.n_antennas,
            n_users: s.n_users,
            users: (0..s.n_users).map(|u| UserPorts { user: u, ports: s.user_ports(u) }).collect(),
        }
    }
}

impl TryFrom<SelectionFile> for PortSelection {
    type Error = Error;

    fn try_from(f: SelectionFile) -> Result<Self> {
        if f.format_version != SELECTION_FORMAT_VERSION {
            return Err(Error::Config(format!("unsupported selection format_version {}", f.format_version)));
        }
        let mut sel = PortSelection::empty(f.n_bs, f.n_antennas, f.n_users);
        let mut seen = BTreeSet::new();
        for entry in f.users {
            if entry.user >= f.n_users || !seen.insert(entry.user) {
                return Err(Error::Config(format!("selection lists user {} twice or out of range", entry.user)));
            }
            let mut per_bs = vec![Vec::new(); f.n_bs];
            for (b, m) in entry.ports {
                if b >= f.n_bs {
                    return Err(SelectionError::OutOfRange { bs: b, user: entry.user, port: m, m: f.n_antennas }.into());
                }
                per_bs[b].push(m);
            }
            for (b, mut s) in per_bs.into_iter().enumerate() {
                s.sort_unstable();
                sel.sets[b * f.n_users + entry.user] = s;
            }
        }
        sel.validate(None)?;
        Ok(sel)
    }
}
