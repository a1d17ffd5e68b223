//! Flat JSON run configuration. Units are in the key names where they
//! matter (`T_lagrangian` is Lagrangian time).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::continuation::{ManufacturedCase, RunSpec, SweepPlan};
use crate::error::{Error, Result};
use crate::linearized::time_grid;
use crate::profiles::{
    check_gamma, make_profile, mollifier_radius, read_profile_csv, validate_vacuum, ProfileSpec,
    VelocityProfile,
};

fn default_gamma() -> f64 {
    2.0
}
fn default_one() -> f64 {
    1.0
}
fn default_u0() -> String {
    "zero".into()
}
fn default_max_iters() -> usize {
    20
}
fn default_stride() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    /// `temporal` or `spatial`.
    pub case: String,
    /// `(n_modes, dt)` rungs, coarse to fine.
    pub steps: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `parabolic`, `vacuum_parabolic`, `polynomial` or `tabulated`.
    pub profile: String,
    /// Monomial coefficients for `polynomial`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_coeffs: Option<Vec<f64>>,
    /// CSV with header `x,rho0`, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_csv: Option<PathBuf>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub kappa: f64,
    #[serde(rename = "T_lagrangian")]
    pub t_lagrangian: f64,
    pub dt: f64,
    pub n_modes: usize,
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// `zero`, `constant`, `compressive` (`A (1/2 - x)`) or `sine` (`A sin(pi x)`).
    #[serde(default = "default_u0")]
    pub u0: String,
    #[serde(default)]
    pub u0_amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollify: Option<bool>,
    #[serde(rename = "C_poisson", default = "default_one")]
    pub c_poisson: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Ladder>,
}

/// A parsed config with the directory relative paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(LoadedConfig {
        config: parse_config(&text)?,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

impl RunConfig {
    /// Hex SHA-256 of the canonical serialization, first 16 digits.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn velocity(&self) -> Result<VelocityProfile> {
        let a = self.u0_amplitude;
        match self.u0.as_str() {
            "zero" => Ok(VelocityProfile::zero()),
            "constant" => Ok(VelocityProfile::constant(a)),
            "compressive" => Ok(VelocityProfile::affine(0.5 * a, -a)),
            "sine" => Ok(VelocityProfile::sine(a, 1.0)),
            other => Err(Error::Config(format!("unknown u0 `{other}`"))),
        }
    }

    pub fn profile_spec(&self, base_dir: &Path) -> Result<ProfileSpec> {
        match self.profile.as_str() {
            "polynomial" => self
                .profile_coeffs
                .clone()
                .map(ProfileSpec::Polynomial)
                .ok_or_else(|| Error::Config("`polynomial` needs profile_coeffs".into())),
            "tabulated" => {
                let rel = self
                    .profile_csv
                    .as_ref()
                    .ok_or_else(|| Error::Config("`tabulated` needs profile_csv".into()))?;
                Ok(ProfileSpec::Tabulated(read_profile_csv(&base_dir.join(rel))?))
            }
            name => ProfileSpec::from_name(name),
        }
    }

    pub fn run_spec(&self, base_dir: &Path) -> Result<RunSpec> {
        Ok(RunSpec {
            profile: self.profile_spec(base_dir)?,
            gamma: self.gamma,
            u0: self.velocity()?,
            kappa: self.kappa,
            t_end: self.t_lagrangian,
            dt: self.dt,
            n_modes: self.n_modes,
            tol: self.tol,
            max_iters: self.max_iters,
            mollify: self.mollify,
            c_poisson: self.c_poisson,
        })
    }

    pub fn sweep_plan(&self, base_dir: &Path, workers: usize) -> Result<Option<SweepPlan>> {
        let Some(kappas) = self.kappa_list.clone() else {
            return Ok(None);
        };
        Ok(Some(SweepPlan {
            kappas,
            template: self.run_spec(base_dir)?,
            workers,
        }))
    }

    pub fn manufactured_case(&self) -> Result<Option<(ManufacturedCase, Vec<(usize, f64)>)>> {
        let Some(l) = &self.ladder else {
            return Ok(None);
        };
        let case = match l.case.as_str() {
            "temporal" => ManufacturedCase::temporal(self.kappa, self.t_lagrangian),
            "spatial" => ManufacturedCase::spatial(self.kappa, self.t_lagrangian),
            other => return Err(Error::Config(format!("unknown ladder case `{other}`"))),
        };
        Ok(Some((case, l.steps.clone())))
    }

    /// Semantic problems with a well-formed config. Malformed input (bad
    /// names, unreadable CSV) is an `Err`.
    pub fn findings(&self, base_dir: &Path) -> Result<Vec<String>> {
        let mut out = Vec::new();
        if check_gamma(self.gamma).is_err() {
            out.push(format!("gamma out of (1,3): {}", self.gamma));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            out.push(format!("kappa out of (0,1): {}", self.kappa));
        }
        if let Err(e) = time_grid(self.t_lagrangian, self.dt) {
            out.push(e.to_string());
        }
        if self.n_modes == 0 {
            out.push("n_modes must be at least 1".into());
        }
        if !(self.tol > 0.0) {
            out.push(format!("tol must be positive: {}", self.tol));
        }
        if self.max_iters == 0 {
            out.push("max_iters must be at least 1".into());
        }
        if !(self.c_poisson >= 0.0) {
            out.push(format!("C_poisson must be nonnegative: {}", self.c_poisson));
        }
        if self.mollify == Some(true) || self.profile == "tabulated" {
            if let Err(e) = mollifier_radius(self.kappa) {
                out.push(e.to_string());
            }
        }
        if let Some(ks) = &self.kappa_list {
            if ks.is_empty() || ks.windows(2).any(|w| w[1] >= w[0]) {
                out.push("kappa_list must be nonempty and strictly decreasing".into());
            }
        }
        self.velocity()?;
        let spec = self.profile_spec(base_dir)?;
        if check_gamma(self.gamma).is_ok() {
            match make_profile(&spec, self.gamma) {
                Ok(p) => {
                    if let Err(e) = p.validate() {
                        out.push(e.to_string());
                    } else {
                        out.extend(validate_vacuum(&p).findings);
                    }
                }
                Err(e) => out.push(e.to_string()),
            }
        }
        Ok(out)
    }
}
