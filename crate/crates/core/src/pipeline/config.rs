//! Experiment configuration: a sectioned `key = value` text format with
//! a canonical serialization (so configs hash and round-trip stably),
//! plus upfront validation of every numerical precondition.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::cgo::SolveKernel;
use crate::geometry::Vec3;
use crate::{Error, Result};

/// Planar window selection for the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    WholeBox,
    Compact,
}

/// Full experiment configuration. Defaults reproduce the acceptance
/// setup (N = 128, L = 2.5, R_Ω = 1, β = 0.15, ε₀ = 0.1, s ∈ {6…24}).
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    // [domain]
    pub n: usize,
    pub l: f64,
    pub r_omega: f64,
    // [cgo]
    pub beta: f64,
    pub eps0: f64,
    pub s_list: Vec<f64>,
    pub tau_factor: f64,
    pub solver_tol: f64,
    pub solver_max_iters: usize,
    pub solver_kernel: SolveKernel,
    pub with_u2: bool,
    // [window]
    pub window_kind: WindowKind,
    pub r_cut_factor: f64,
    pub width_factor: f64,
    // [mesh]
    pub n_theta: usize,
    pub n_phi: usize,
    // [patch]
    pub patch_margin: f64,
    pub offpatch_tol: f64,
    // [phantom] (the difference potential q₂ − q₁ of E2/E3)
    pub phantom_width: f64,
    pub phantom_amp: f64,
    pub cut_inner: f64,
    pub cut_outer: f64,
    // [estimates]
    pub est_offsets: Vec<f64>,
    pub est_gauss_width: f64,
    pub est_offset_center: Vec3,
    // [identity]
    pub id_offsets: Vec<f64>,
    pub id_offsupport_offset: f64,
    pub id_offsupport_width: f64,
    pub id_run_same_potential: bool,
    // [reconstruct]
    pub rec_direct_dirs: usize,
    pub rec_direct_offsets: usize,
    pub rec_boundary_n: usize,
    pub rec_boundary_dirs: usize,
    pub rec_boundary_offsets: usize,
    pub rec_boundary_max_iters: usize,
    pub rec_phantom_width: f64,
    // [localize]
    pub loc_n: usize,
    pub loc_dirs: usize,
    pub loc_offsets: usize,
    pub loc_out_n: usize,
    pub loc_c_radius: f64,
    pub loc_phantom_width: f64,
    pub loc_cut_inner: f64,
    pub loc_cut_outer: f64,
    pub loc_thm3_r: f64,
    pub loc_vanish_tol_factor: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            n: 128,
            l: 2.5,
            r_omega: 1.0,
            beta: 0.15,
            eps0: 0.1,
            s_list: vec![6.0, 8.0, 12.0, 16.0, 24.0],
            tau_factor: 1e-3,
            solver_tol: 1e-6,
            solver_max_iters: 8,
            solver_kernel: SolveKernel::Truncated,
            with_u2: true,
            window_kind: WindowKind::WholeBox,
            r_cut_factor: 1.1,
            width_factor: 0.3,
            n_theta: 24,
            n_phi: 48,
            patch_margin: 0.9,
            offpatch_tol: 0.05,
            phantom_width: 0.8,
            phantom_amp: 1.0,
            cut_inner: 0.8,
            cut_outer: 0.95,
            est_offsets: vec![0.0],
            est_gauss_width: 0.5,
            est_offset_center: Vec3::new(0.3, 0.2, 0.1),
            id_offsets: vec![0.0, 0.3],
            id_offsupport_offset: 0.9,
            id_offsupport_width: 0.2,
            id_run_same_potential: true,
            rec_direct_dirs: 200,
            rec_direct_offsets: 41,
            rec_boundary_n: 72,
            rec_boundary_dirs: 64,
            rec_boundary_offsets: 21,
            rec_boundary_max_iters: 3,
            rec_phantom_width: 0.65,
            loc_n: 72,
            loc_dirs: 48,
            loc_offsets: 41,
            loc_out_n: 96,
            loc_c_radius: 0.4,
            loc_phantom_width: 0.19,
            loc_cut_inner: 0.24,
            loc_cut_outer: 0.3,
            loc_thm3_r: 0.6,
            loc_vanish_tol_factor: 0.1,
        }
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_list(vs: &[f64]) -> String {
    vs.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

impl Config {
    /// Canonical text form: fixed section and key order, shortest
    /// round-trip float formatting. `parse(serialize(c)) == c` and the
    /// serialization is idempotent byte-for-byte.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let kernel = match self.solver_kernel {
            SolveKernel::Truncated => "truncated",
            SolveKernel::Regularized => "regularized",
        };
        let window = match self.window_kind {
            WindowKind::WholeBox => "wholebox",
            WindowKind::Compact => "compact",
        };
        let _ = write!(
            s,
            "[domain]\n\
             n = {}\n\
             l = {}\n\
             r_omega = {}\n\
             \n[cgo]\n\
             beta = {}\n\
             eps0 = {}\n\
             s_list = {}\n\
             tau_factor = {}\n\
             solver_tol = {}\n\
             solver_max_iters = {}\n\
             solver_kernel = {}\n\
             with_u2 = {}\n\
             \n[window]\n\
             kind = {}\n\
             r_cut_factor = {}\n\
             width_factor = {}\n\
             \n[mesh]\n\
             n_theta = {}\n\
             n_phi = {}\n\
             \n[patch]\n\
             margin = {}\n\
             offpatch_tol = {}\n\
             \n[phantom]\n\
             width = {}\n\
             amp = {}\n\
             cut_inner = {}\n\
             cut_outer = {}\n\
             \n[estimates]\n\
             offsets = {}\n\
             gauss_width = {}\n\
             offset_center = {},{},{}\n\
             \n[identity]\n\
             offsets = {}\n\
             offsupport_offset = {}\n\
             offsupport_width = {}\n\
             run_same_potential = {}\n\
             \n[reconstruct]\n\
             direct_dirs = {}\n\
             direct_offsets = {}\n\
             boundary_n = {}\n\
             boundary_dirs = {}\n\
             boundary_offsets = {}\n\
             boundary_max_iters = {}\n\
             phantom_width = {}\n\
             \n[localize]\n\
             n = {}\n\
             dirs = {}\n\
             offsets = {}\n\
             out_n = {}\n\
             c_radius = {}\n\
             phantom_width = {}\n\
             cut_inner = {}\n\
             cut_outer = {}\n\
             thm3_r = {}\n\
             vanish_tol_factor = {}\n",
            self.n,
            fmt_f64(self.l),
            fmt_f64(self.r_omega),
            fmt_f64(self.beta),
            fmt_f64(self.eps0),
            fmt_list(&self.s_list),
            fmt_f64(self.tau_factor),
            fmt_f64(self.solver_tol),
            self.solver_max_iters,
            kernel,
            self.with_u2,
            window,
            fmt_f64(self.r_cut_factor),
            fmt_f64(self.width_factor),
            self.n_theta,
            self.n_phi,
            fmt_f64(self.patch_margin),
            fmt_f64(self.offpatch_tol),
            fmt_f64(self.phantom_width),
            fmt_f64(self.phantom_amp),
            fmt_f64(self.cut_inner),
            fmt_f64(self.cut_outer),
            fmt_list(&self.est_offsets),
            fmt_f64(self.est_gauss_width),
            fmt_f64(self.est_offset_center.x),
            fmt_f64(self.est_offset_center.y),
            fmt_f64(self.est_offset_center.z),
            fmt_list(&self.id_offsets),
            fmt_f64(self.id_offsupport_offset),
            fmt_f64(self.id_offsupport_width),
            self.id_run_same_potential,
            self.rec_direct_dirs,
            self.rec_direct_offsets,
            self.rec_boundary_n,
            self.rec_boundary_dirs,
            self.rec_boundary_offsets,
            self.rec_boundary_max_iters,
            fmt_f64(self.rec_phantom_width),
            self.loc_n,
            self.loc_dirs,
            self.loc_offsets,
            self.loc_out_n,
            fmt_f64(self.loc_c_radius),
            fmt_f64(self.loc_phantom_width),
            fmt_f64(self.loc_cut_inner),
            fmt_f64(self.loc_cut_outer),
            fmt_f64(self.loc_thm3_r),
            fmt_f64(self.loc_vanish_tol_factor),
        );
        s
    }

    /// SHA-256 hex digest of the canonical serialization.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.serialize().as_bytes());
        hex_string(&hasher.finalize())
    }

    /// Parses the sectioned `key = value` format; unknown sections or
    /// keys are rejected with their location.
    pub fn parse(text: &str) -> Result<Config> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1))
            })?;
            let full = format!("{section}.{}", key.trim());
            if map.insert(full.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key {full}")));
            }
        }
        let mut cfg = Config::default();
        let mut seen: Vec<String> = Vec::new();
        {
            let mut take = |k: &str| -> Option<String> {
                seen.push(k.to_string());
                map.get(k).cloned()
            };
            macro_rules! set {
                ($field:expr, $key:expr, $conv:expr) => {
                    if let Some(v) = take($key) {
                        $field = $conv(&v).map_err(|e: String| {
                            Error::Config(format!("key {}: {e}", $key))
                        })?;
                    }
                };
            }
            let p_usize = |v: &str| v.parse::<usize>().map_err(|e| e.to_string());
            let p_f64 = |v: &str| v.parse::<f64>().map_err(|e| e.to_string());
            let p_bool = |v: &str| v.parse::<bool>().map_err(|e| e.to_string());
            let p_list = |v: &str| -> std::result::Result<Vec<f64>, String> {
                v.split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string()))
                    .collect()
            };
            let p_vec3 = |v: &str| -> std::result::Result<Vec3, String> {
                let parts = p_list(v)?;
                if parts.len() != 3 {
                    return Err(format!("expected three components, got {}", parts.len()));
                }
                Ok(Vec3::new(parts[0], parts[1], parts[2]))
            };
            let p_kernel = |v: &str| match v {
                "truncated" => Ok(SolveKernel::Truncated),
                "regularized" => Ok(SolveKernel::Regularized),
                other => Err(format!("unknown kernel `{other}`")),
            };
            let p_window = |v: &str| match v {
                "wholebox" => Ok(WindowKind::WholeBox),
                "compact" => Ok(WindowKind::Compact),
                other => Err(format!("unknown window `{other}`")),
            };
            set!(cfg.n, "domain.n", p_usize);
            set!(cfg.l, "domain.l", p_f64);
            set!(cfg.r_omega, "domain.r_omega", p_f64);
            set!(cfg.beta, "cgo.beta", p_f64);
            set!(cfg.eps0, "cgo.eps0", p_f64);
            set!(cfg.s_list, "cgo.s_list", p_list);
            set!(cfg.tau_factor, "cgo.tau_factor", p_f64);
            set!(cfg.solver_tol, "cgo.solver_tol", p_f64);
            set!(cfg.solver_max_iters, "cgo.solver_max_iters", p_usize);
            set!(cfg.solver_kernel, "cgo.solver_kernel", p_kernel);
            set!(cfg.with_u2, "cgo.with_u2", p_bool);
            set!(cfg.window_kind, "window.kind", p_window);
            set!(cfg.r_cut_factor, "window.r_cut_factor", p_f64);
            set!(cfg.width_factor, "window.width_factor", p_f64);
            set!(cfg.n_theta, "mesh.n_theta", p_usize);
            set!(cfg.n_phi, "mesh.n_phi", p_usize);
            set!(cfg.patch_margin, "patch.margin", p_f64);
            set!(cfg.offpatch_tol, "patch.offpatch_tol", p_f64);
            set!(cfg.phantom_width, "phantom.width", p_f64);
            set!(cfg.phantom_amp, "phantom.amp", p_f64);
            set!(cfg.cut_inner, "phantom.cut_inner", p_f64);
            set!(cfg.cut_outer, "phantom.cut_outer", p_f64);
            set!(cfg.est_offsets, "estimates.offsets", p_list);
            set!(cfg.est_gauss_width, "estimates.gauss_width", p_f64);
            set!(cfg.est_offset_center, "estimates.offset_center", p_vec3);
            set!(cfg.id_offsets, "identity.offsets", p_list);
            set!(cfg.id_offsupport_offset, "identity.offsupport_offset", p_f64);
            set!(cfg.id_offsupport_width, "identity.offsupport_width", p_f64);
            set!(cfg.id_run_same_potential, "identity.run_same_potential", p_bool);
            set!(cfg.rec_direct_dirs, "reconstruct.direct_dirs", p_usize);
            set!(cfg.rec_direct_offsets, "reconstruct.direct_offsets", p_usize);
            set!(cfg.rec_boundary_n, "reconstruct.boundary_n", p_usize);
            set!(cfg.rec_boundary_dirs, "reconstruct.boundary_dirs", p_usize);
            set!(cfg.rec_boundary_offsets, "reconstruct.boundary_offsets", p_usize);
            set!(cfg.rec_boundary_max_iters, "reconstruct.boundary_max_iters", p_usize);
            set!(cfg.rec_phantom_width, "reconstruct.phantom_width", p_f64);
            set!(cfg.loc_n, "localize.n", p_usize);
            set!(cfg.loc_dirs, "localize.dirs", p_usize);
            set!(cfg.loc_offsets, "localize.offsets", p_usize);
            set!(cfg.loc_out_n, "localize.out_n", p_usize);
            set!(cfg.loc_c_radius, "localize.c_radius", p_f64);
            set!(cfg.loc_phantom_width, "localize.phantom_width", p_f64);
            set!(cfg.loc_cut_inner, "localize.cut_inner", p_f64);
            set!(cfg.loc_cut_outer, "localize.cut_outer", p_f64);
            set!(cfg.loc_thm3_r, "localize.thm3_r", p_f64);
            set!(cfg.loc_vanish_tol_factor, "localize.vanish_tol_factor", p_f64);
        }
        for key in map.keys() {
            if !seen.contains(key) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Validates every precondition the modules rely on, with actionable
    /// messages; `s` values that violate the resolution guards are
    /// reported (the experiments restrict the sweep with a warning).
    pub fn validate(&self) -> Result<()> {
        crate::geometry::BallDomain::new(Vec3::ZERO, self.r_omega, self.l, self.n)?;
        if !(self.beta > 0.0 && self.beta < 0.25) {
            return Err(Error::Config(format!("cgo.beta must lie in (0, 1/4), got {}", self.beta)));
        }
        let cap = 2.0 * (0.25 - self.beta);
        if !(self.eps0 > 0.0 && self.eps0 < cap) {
            return Err(Error::Config(format!(
                "cgo.eps0 must lie in (0, 2(1/4-beta)) = (0, {cap}), got {}",
                self.eps0
            )));
        }
        if self.s_list.is_empty() || self.s_list.iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("cgo.s_list must list positive magnitudes".into()));
        }
        if self.feasible_sweep(self.n).is_empty() {
            return Err(Error::Config(format!(
                "no s in {:?} satisfies the resolution guards at n = {}",
                self.s_list, self.n
            )));
        }
        if self.solver_tol <= 0.0 {
            return Err(Error::Config("cgo.solver_tol must be positive".into()));
        }
        if self.window_kind == WindowKind::Compact {
            crate::cutoffs::make_chi0(
                self.r_cut_factor * self.r_omega,
                self.width_factor * self.r_omega,
                self.r_omega,
                self.l,
            )?;
        }
        if self.n_theta < 2 || self.n_phi < 4 {
            return Err(Error::Config("mesh must have n_theta >= 2 and n_phi >= 4".into()));
        }
        if !(self.patch_margin > 0.0) {
            return Err(Error::Config("patch.margin must be positive".into()));
        }
        if !(self.cut_inner < self.cut_outer && self.cut_outer <= self.r_omega) {
            return Err(Error::Config(
                "phantom support cut must satisfy cut_inner < cut_outer <= r_omega".into(),
            ));
        }
        if self.rec_direct_offsets % 2 == 0 || self.rec_boundary_offsets % 2 == 0
            || self.loc_offsets % 2 == 0
        {
            return Err(Error::Config("offset counts must be odd (offset 0 included)".into()));
        }
        for (name, n) in [("reconstruct.boundary_n", self.rec_boundary_n), ("localize.n", self.loc_n)] {
            if n < 32 || n % 2 != 0 {
                return Err(Error::Config(format!("{name} must be even and >= 32, got {n}")));
            }
        }
        Ok(())
    }

    /// The sweep values that satisfy the resolution guards
    /// `δ(s) ≥ 8h` and `2π/s ≥ 3h` at resolution `n` (ascending order).
    pub fn feasible_sweep(&self, n: usize) -> Vec<f64> {
        let h = 2.0 * self.l / n as f64;
        let mut out: Vec<f64> = self
            .s_list
            .iter()
            .copied()
            .filter(|&s| s.powf(-self.beta) >= 8.0 * h && 2.0 * std::f64::consts::PI / s >= 3.0 * h)
            .collect();
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact_and_idempotent() {
        let cfg = Config::default();
        let text = cfg.serialize();
        let parsed = Config::parse(&text).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.serialize(), text);
        assert_eq!(parsed.hash(), cfg.hash());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Config::parse("[domain]\nbogus = 3\n").is_err());
        assert!(Config::parse("[cgo]\nbeta = 0.3\n").is_err());
        assert!(Config::parse("[cgo]\neps0 = 0.25\n").is_err());
        assert!(Config::parse("[domain]\nn = 20\n").is_err());
        assert!(Config::parse("[reconstruct]\ndirect_offsets = 40\n").is_err());
        assert!(Config::parse("no equals sign").is_err());
    }

    #[test]
    fn feasible_sweep_restricts_by_resolution() {
        let cfg = Config::default();
        // at n = 64, δ(24) = 0.621 < 8h = 0.625: s = 24 is dropped
        let sweep64 = cfg.feasible_sweep(64);
        assert!(!sweep64.contains(&24.0));
        assert!(sweep64.contains(&16.0));
        // at n = 128 the full sweep survives
        assert_eq!(cfg.feasible_sweep(128).len(), 5);
    }

    #[test]
    fn hash_changes_with_values() {
        let a = Config::default();
        let mut b = a.clone();
        b.phantom_width = 0.81;
        assert_ne!(a.hash(), b.hash());
    }
}
