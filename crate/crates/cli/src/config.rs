//! `key = value` configuration files grouped in `[sections]`.
//!
//! ```text
//! [grid]
//! nx = 64
//! [physics]
//! delta = 0.1   # comments start with # or ;
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nsv_core::engine::SimConfig;
use nsv_core::error::{Error, Result};
use nsv_core::grid::Grid2D;
use nsv_core::initial::{DensityProfile, InitialDataSpec, MomentumProfile, ParticleProfile, Preset, PRESET_NAMES};
use nsv_core::io::{read_phase, read_scalar_csv};
use nsv_core::kinetic::VelocityGrid;

/// Every accepted `section.key`.
pub const KEYS: &[&str] = &[
    "grid.nx",
    "grid.ny",
    "grid.lx",
    "grid.ly",
    "grid.nvx",
    "grid.nvy",
    "physics.epsilon",
    "physics.delta",
    "physics.mu",
    "physics.vmax",
    "time.dt",
    "time.cfl",
    "time.t_end",
    "initial.preset",
    "initial.particles",
    "initial.density",
    "initial.outside_density",
    "initial.density_amplitude",
    "initial.omega",
    "initial.rotation_radius",
    "initial.vortex_amplitude",
    "initial.particle_density",
    "initial.temperature",
    "initial.drift_x",
    "initial.drift_y",
    "initial.cloud_radius",
    "initial.rho_file",
    "initial.f_file",
    "solver.sub_iterations",
    "solver.picard_tol",
    "solver.abs_tol",
    "solver.rel_tol",
    "solver.max_iter",
    "solver.seed",
    "output.snapshot_every",
    "output.defect_coef",
    "output.dt_ref",
    "output.h_ref",
    "verify.weak_tol",
    "verify.test_functions",
];

const PARTICLE_KINDS: &[&str] = &["none", "maxwellian", "cloud"];

/// Levenshtein distance.
fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != *cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Closest candidate within a distance of a third of the word (at least 2).
pub fn suggest<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    let limit = (word.len() / 3).max(2);
    candidates
        .into_iter()
        .map(|c| (edit_distance(word, c), c))
        .filter(|(d, _)| *d <= limit)
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c)
}

fn unknown(kind: &str, word: &str, candidates: &[&str]) -> String {
    match suggest(word, candidates.iter().copied()) {
        Some(s) => format!("unknown {kind}; did you mean `{s}`?"),
        None => format!("unknown {kind}"),
    }
}

/// Parsed file: values keyed by `section.key`, in file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigDoc {
    pub path: PathBuf,
    entries: Vec<(String, String)>,
}

impl ConfigDoc {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let sections: Vec<&str> = {
            let mut s: Vec<&str> = KEYS.iter().map(|k| k.split('.').next().unwrap_or_default()).collect();
            s.dedup();
            s
        };
        let syntax = |line: usize, msg: String| Error::Format {
            path: path.to_path_buf(),
            msg: format!("line {line}: {msg}"),
        };
        let mut doc = ConfigDoc {
            path: path.to_path_buf(),
            entries: Vec::new(),
        };
        let mut section: Option<String> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| syntax(n + 1, format!("unterminated section header `{line}`")))?
                    .trim();
                if !sections.contains(&name) {
                    return Err(Error::config(name, unknown("section", name, &sections)));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax(n + 1, format!("expected `key = value`, found `{line}`")))?;
            let sec = section
                .as_deref()
                .ok_or_else(|| syntax(n + 1, "key outside of any [section]".into()))?;
            let full = format!("{sec}.{}", key.trim());
            if !KEYS.contains(&full.as_str()) {
                return Err(Error::config(full.clone(), unknown("key", &full, KEYS)));
            }
            if doc.get(&full).is_some() {
                return Err(Error::config(full, format!("set twice (line {})", n + 1)));
            }
            doc.entries.push((full, value.trim().to_string()));
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    /// Render back to the file format, grouped by section.
    pub fn to_text(&self) -> String {
        let mut by_section: BTreeMap<&str, Vec<(&str, &str)>> = BTreeMap::new();
        for (k, v) in &self.entries {
            let (s, key) = k.split_once('.').unwrap_or(("", k));
            by_section.entry(s).or_default().push((key, v));
        }
        let mut out = String::new();
        for (s, kv) in by_section {
            out.push_str(&format!("[{s}]\n"));
            for (k, v) in kv {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Path value resolved against the directory of the config file.
    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| {
            let p = PathBuf::from(v);
            match self.path.parent() {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p,
            }
        })
    }
}

/// Simulation parameters with their defaults applied.
pub fn sim_config(doc: &ConfigDoc) -> Result<SimConfig> {
    let nx = doc.usize_or("grid.nx", 64)?;
    let ny = doc.usize_or("grid.ny", nx)?;
    let grid = Grid2D::new(nx, ny, doc.f64_or("grid.lx", 1.0)?, doc.f64_or("grid.ly", 1.0)?)
        .map_err(|e| Error::config("grid.nx", e.to_string()))?;
    let nvx = doc.usize_or("grid.nvx", 32)?;
    let nvy = doc.usize_or("grid.nvy", nvx)?;
    let vmax = doc.f64_or("physics.vmax", 4.0)?;
    if !(vmax > 0.0 && vmax.is_finite()) {
        return Err(Error::config("physics.vmax", format!("must be positive and finite, got {vmax}")));
    }
    let vgrid = VelocityGrid::new(nvx, nvy, vmax).map_err(|e| Error::config("grid.nvx", e.to_string()))?;
    let mut cfg = SimConfig::new(nx.max(1), nvx.max(1))?;
    let h = grid.hx().min(grid.hy());
    cfg.grid = grid;
    cfg.vgrid = vgrid;
    cfg.epsilon = doc.f64_or("physics.epsilon", cfg.epsilon)?;
    cfg.delta = doc.f64_or("physics.delta", cfg.delta)?;
    cfg.mu = doc.f64_or("physics.mu", cfg.mu)?;
    cfg.dt = doc.parsed("time.dt")?;
    cfg.cfl = doc.f64_or("time.cfl", cfg.cfl)?;
    cfg.t_end = doc.f64_or("time.t_end", cfg.t_end)?;
    cfg.sub_iterations = doc.usize_or("solver.sub_iterations", cfg.sub_iterations)?;
    cfg.picard_tol = doc.f64_or("solver.picard_tol", cfg.picard_tol)?;
    cfg.tol.abs_tol = doc.f64_or("solver.abs_tol", cfg.tol.abs_tol)?;
    cfg.tol.rel_tol = doc.f64_or("solver.rel_tol", cfg.tol.rel_tol)?;
    cfg.tol.max_iter = doc.usize_or("solver.max_iter", cfg.tol.max_iter)?;
    cfg.seed = doc.parsed("solver.seed")?.unwrap_or(0);
    cfg.snapshot_every = doc.usize_or("output.snapshot_every", 10)?;
    cfg.defect_coef = doc.f64_or("output.defect_coef", cfg.defect_coef)?;
    cfg.dt_ref = doc.f64_or("output.dt_ref", h / (std::f64::consts::SQRT_2 * vmax))?;
    cfg.h_ref = doc.f64_or("output.h_ref", grid.hx().max(grid.hy()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Settings of `nsv verify`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifySettings {
    /// Allowed weak residual relative to the integrated absolute integrand.
    pub weak_tol: f64,
    pub test_functions: usize,
}

pub fn verify_settings(doc: &ConfigDoc) -> Result<VerifySettings> {
    let s = VerifySettings {
        weak_tol: doc.f64_or("verify.weak_tol", 0.05)?,
        test_functions: doc.usize_or("verify.test_functions", 5)?,
    };
    if !(s.weak_tol > 0.0) {
        return Err(Error::config("verify.weak_tol", "must be positive"));
    }
    if s.test_functions == 0 {
        return Err(Error::config("verify.test_functions", "must be at least 1"));
    }
    Ok(s)
}

fn not_used(key: &str, what: &str) -> Error {
    Error::config(key, format!("not used by {what}"))
}

/// Preset chosen by `[initial]` with its parameter overrides applied.
pub fn preset(doc: &ConfigDoc) -> Result<Preset> {
    let name = doc.get("initial.preset").unwrap_or("decaying-flow");
    let mut p = Preset::named(name).ok_or_else(|| Error::config("initial.preset", unknown("preset", name, PRESET_NAMES)))?;
    if let Some(kind) = doc.get("initial.particles") {
        p.particles = match kind {
            "none" => ParticleProfile::None,
            "maxwellian" => ParticleProfile::Maxwellian {
                density: 1.0,
                temperature: 0.25,
                drift: [0.0, 0.0],
            },
            "cloud" => ParticleProfile::Cloud {
                density: 0.5,
                temperature: 0.1,
                drift: [0.0, 0.0],
                radius: 0.3,
            },
            other => return Err(Error::config("initial.particles", unknown("particle profile", other, PARTICLE_KINDS))),
        };
    }
    let val = |k: &str| doc.parsed::<f64>(k);
    if let Some(v) = val("initial.density")? {
        match &mut p.density {
            DensityProfile::Uniform { value } => *value = v,
            DensityProfile::Patch { inside, .. } => *inside = v,
            DensityProfile::Smooth { mean, .. } => *mean = v,
        }
    }
    if let Some(v) = val("initial.outside_density")? {
        match &mut p.density {
            DensityProfile::Patch { outside, .. } => *outside = v,
            _ => return Err(not_used("initial.outside_density", "this density profile")),
        }
    }
    if let Some(v) = val("initial.density_amplitude")? {
        match &mut p.density {
            DensityProfile::Smooth { amplitude, .. } => *amplitude = v,
            _ => return Err(not_used("initial.density_amplitude", "this density profile")),
        }
    }
    for key in ["initial.omega", "initial.rotation_radius"] {
        if let Some(v) = val(key)? {
            match &mut p.momentum {
                MomentumProfile::SolidRotation { omega, radius } => {
                    *(if key.ends_with("omega") { omega } else { radius }) = v;
                }
                _ => return Err(not_used(key, "this momentum profile")),
            }
        }
    }
    if let Some(v) = val("initial.vortex_amplitude")? {
        match &mut p.momentum {
            MomentumProfile::Vortex { amplitude } => *amplitude = v,
            _ => return Err(not_used("initial.vortex_amplitude", "this momentum profile")),
        }
    }
    for key in [
        "initial.particle_density",
        "initial.temperature",
        "initial.drift_x",
        "initial.drift_y",
        "initial.cloud_radius",
    ] {
        let Some(v) = val(key)? else { continue };
        let field = key.trim_start_matches("initial.");
        let slot = match (&mut p.particles, field) {
            (ParticleProfile::Maxwellian { density, .. } | ParticleProfile::Cloud { density, .. }, "particle_density") => density,
            (ParticleProfile::Maxwellian { temperature, .. } | ParticleProfile::Cloud { temperature, .. }, "temperature") => {
                temperature
            }
            (ParticleProfile::Maxwellian { drift, .. } | ParticleProfile::Cloud { drift, .. }, "drift_x") => &mut drift[0],
            (ParticleProfile::Maxwellian { drift, .. } | ParticleProfile::Cloud { drift, .. }, "drift_y") => &mut drift[1],
            (ParticleProfile::Cloud { radius, .. }, "cloud_radius") => radius,
            _ => return Err(not_used(key, "this particle profile")),
        };
        *slot = v;
    }
    Ok(p)
}

/// Raw initial data: the preset, with density or distribution replaced by
/// the files named in `[initial]`.
pub fn initial_data(doc: &ConfigDoc, cfg: &SimConfig) -> Result<InitialDataSpec> {
    let p = preset(doc)?;
    let mut rho0 = p.density_field(cfg.grid);
    if let Some(path) = doc.path("initial.rho_file") {
        let (r, _, _) = read_scalar_csv(&path)?;
        if r.grid != cfg.grid {
            return Err(Error::config("initial.rho_file", format!("{} does not match the [grid] section", path.display())));
        }
        rho0 = r;
    }
    let m0 = p.velocity_field(cfg.grid).hadamard(&rho0.face_average());
    let f0 = match doc.path("initial.f_file") {
        Some(path) => {
            let (f, _) = read_phase(&path)?;
            if f.grid != cfg.grid || f.vgrid != cfg.vgrid {
                return Err(Error::config("initial.f_file", format!("{} does not match the [grid] section", path.display())));
            }
            f
        }
        None => p.distribution(cfg.grid, cfg.vgrid),
    };
    let spec = InitialDataSpec {
        rho0,
        m0,
        f0,
        epsilon: cfg.epsilon,
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Result<ConfigDoc> {
        ConfigDoc::parse(text, Path::new("test.ini"))
    }

    fn key_of(e: Error) -> String {
        match e {
            Error::Config { key, .. } => key,
            other => panic!("expected a configuration error, got {other}"),
        }
    }

    #[test]
    fn defaults_validate() {
        let d = doc("").unwrap();
        let c = sim_config(&d).unwrap();
        assert_eq!(c.grid.nx, 64);
        assert_eq!(c.vgrid.nvx, 32);
        initial_data(&d, &c).unwrap();
    }

    #[test]
    fn misspelt_key_gets_a_suggestion() {
        let e = doc("[physics]\ndleta = 0.1\n").unwrap_err();
        assert!(e.to_string().contains("did you mean `physics.delta`"), "{e}");
        let e = doc("[phsyics]\n").unwrap_err();
        assert!(e.to_string().contains("`physics`"), "{e}");
    }

    #[test]
    fn negative_delta_names_the_key() {
        let d = doc("[physics]\ndelta = -1\n").unwrap();
        assert_eq!(key_of(sim_config(&d).unwrap_err()), "physics.delta");
    }

    #[test]
    fn bad_number_and_duplicates_are_rejected() {
        let d = doc("[time]\nt_end = soon\n").unwrap();
        assert_eq!(key_of(sim_config(&d).unwrap_err()), "time.t_end");
        assert_eq!(key_of(doc("[time]\ncfl = 0.5\ncfl = 0.4\n").unwrap_err()), "time.cfl");
        assert!(matches!(doc("nx = 3\n"), Err(Error::Format { .. })));
    }

    #[test]
    fn preset_overrides_apply_or_are_rejected() {
        let d = doc("[initial]\npreset = uniform\ndensity = 2.5\nparticles = maxwellian\ntemperature = 0.5\n").unwrap();
        let p = preset(&d).unwrap();
        assert_eq!(p.density, DensityProfile::Uniform { value: 2.5 });
        assert!(matches!(p.particles, ParticleProfile::Maxwellian { temperature, .. } if temperature == 0.5));
        let d = doc("[initial]\npreset = uniform\ncloud_radius = 0.2\n").unwrap();
        assert_eq!(key_of(preset(&d).unwrap_err()), "initial.cloud_radius");
        let d = doc("[initial]\npreset = unifrom\n").unwrap();
        let e = preset(&d).unwrap_err();
        assert!(e.to_string().contains("`uniform`"), "{e}");
    }

    #[test]
    fn text_round_trip() {
        let d = doc("[time]\nt_end = 0.1\n[grid]\nnx = 8\n").unwrap();
        let mut again = doc(&d.to_text()).unwrap();
        assert_eq!(again.get("grid.nx"), Some("8"));
        again.set("solver.seed", "3");
        assert_eq!(doc(&again.to_text()).unwrap().get("solver.seed"), Some("3"));
    }

    #[test]
    fn edit_distance_basics() {
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(suggest("xyzzy", ["physics.delta"]), None);
    }
}
