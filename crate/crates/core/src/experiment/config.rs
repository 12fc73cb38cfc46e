//! Experiment configuration: defaults per experiment, flat key-value config
//! files, and mesh-ladder resolution.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::prior::KfMode;

/// The six experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Prior1d,
    Posterior1d,
    Prior2d,
    Posterior2d,
    MaxPrior1d,
    MaxPosterior1d,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Prior1d,
        ExperimentKind::Posterior1d,
        ExperimentKind::Prior2d,
        ExperimentKind::Posterior2d,
        ExperimentKind::MaxPrior1d,
        ExperimentKind::MaxPosterior1d,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Prior1d => "prior-1d",
            ExperimentKind::Posterior1d => "posterior-1d",
            ExperimentKind::Prior2d => "prior-2d",
            ExperimentKind::Posterior2d => "posterior-2d",
            ExperimentKind::MaxPrior1d => "max-prior-1d",
            ExperimentKind::MaxPosterior1d => "max-posterior-1d",
        }
    }

    pub fn parse(s: &str) -> Result<ExperimentKind> {
        Self::ALL
            .iter()
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| {
                Error::Config(format!(
                    "experiment: unknown name {s:?}; expected one of {}",
                    Self::ALL.map(|k| k.name()).join(", ")
                ))
            })
    }

    pub fn dim(&self) -> usize {
        match self {
            ExperimentKind::Prior2d | ExperimentKind::Posterior2d => 2,
            _ => 1,
        }
    }

    /// Experiments that condition on sensor data.
    pub fn uses_sensors(&self) -> bool {
        matches!(
            self,
            ExperimentKind::Posterior1d
                | ExperimentKind::Posterior2d
                | ExperimentKind::MaxPosterior1d
        )
    }

    /// Experiments that sample trajectories for the maximum functional.
    pub fn is_max(&self) -> bool {
        matches!(
            self,
            ExperimentKind::MaxPrior1d | ExperimentKind::MaxPosterior1d
        )
    }

    /// Experiments without an exact reference, estimated by dyadic
    /// self-convergence.
    pub fn is_self_convergence(&self) -> bool {
        self.dim() == 2
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Mesh ladder specification.
#[derive(Debug, Clone, PartialEq)]
pub enum HLadder {
    /// `count` distinct mesh sizes whose h spans [h_min, h_max],
    /// log-uniformly distributed so every level carries comparable leverage
    /// in the log-log slope fit.
    Range {
        h_min: f64,
        h_max: f64,
        count: usize,
    },
    /// Dyadic family down to n_max cells per side: every level n <= n_max/4
    /// has 2n and 4n present, so log-ratio triples are exact.
    Dyadic { n_max: usize },
    /// Explicit h values, strictly decreasing; each must correspond to a
    /// structured mesh (h = 1/n in 1D, sqrt(2)/n in 2D).
    List(Vec<f64>),
}

impl HLadder {
    pub fn parse(s: &str) -> Result<HLadder> {
        let err = |msg: &str| Error::Config(format!("h_ladder: {msg} (got {s:?})"));
        if let Some(rest) = s.strip_prefix("range:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(err("expected range:<h_min>:<h_max>:<count>"));
            }
            let h_min: f64 = parts[0].parse().map_err(|_| err("bad h_min"))?;
            let h_max: f64 = parts[1].parse().map_err(|_| err("bad h_max"))?;
            let count: usize = parts[2].parse().map_err(|_| err("bad count"))?;
            Ok(HLadder::Range {
                h_min,
                h_max,
                count,
            })
        } else if let Some(rest) = s.strip_prefix("dyadic:") {
            let n_max: usize = rest.parse().map_err(|_| err("expected dyadic:<n_max>"))?;
            Ok(HLadder::Dyadic { n_max })
        } else if let Some(rest) = s.strip_prefix("list:") {
            let hs: std::result::Result<Vec<f64>, _> =
                rest.split(',').map(|t| t.trim().parse::<f64>()).collect();
            Ok(HLadder::List(hs.map_err(|_| err("bad list entry"))?))
        } else {
            Err(err("expected range:..., dyadic:... or list:..."))
        }
    }

    pub fn spec_string(&self) -> String {
        match self {
            HLadder::Range {
                h_min,
                h_max,
                count,
            } => format!("range:{h_min}:{h_max}:{count}"),
            HLadder::Dyadic { n_max } => format!("dyadic:{n_max}"),
            HLadder::List(hs) => format!(
                "list:{}",
                hs.iter()
                    .map(|h| h.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
        }
    }

    /// Resolve to mesh sizes (cells in 1D, cells per side in 2D), ascending
    /// (so h is descending). `avoid_multiples_of` drops range levels whose
    /// node set would swallow the reference grid: 1D P1 solves are nodally
    /// exact, so when every grid point is a mesh node the statFEM moments
    /// collapse onto the reference ones and the level carries no
    /// discretisation signal.
    pub fn resolve_avoiding(
        &self,
        dim: usize,
        avoid_multiples_of: Option<usize>,
    ) -> Result<Vec<usize>> {
        let levels = self.resolve(dim)?;
        let Some(base) = avoid_multiples_of else {
            return Ok(levels);
        };
        match self {
            HLadder::Range {
                h_min,
                h_max,
                count,
            } => {
                let scale = if dim == 2 {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                };
                let n_min = (scale / h_max).round().max(2.0) as usize;
                let n_max = (scale / h_min).round() as usize;
                let candidates: Vec<usize> = (n_min..=n_max).filter(|n| n % base != 0).collect();
                if candidates.len() < *count {
                    return Err(Error::Config(format!(
                        "h_ladder: range [{h_min}, {h_max}] holds only {} grid-compatible meshes, \
                         fewer than count {count}",
                        candidates.len()
                    )));
                }
                Ok(log_uniform_subset(&candidates, *count))
            }
            // explicit lists and dyadic families are taken as given
            _ => Ok(levels),
        }
    }

    /// Resolve to mesh sizes (cells in 1D, cells per side in 2D), ascending
    /// (so h is descending).
    pub fn resolve(&self, dim: usize) -> Result<Vec<usize>> {
        let h_of = |n: usize| {
            if dim == 2 {
                std::f64::consts::SQRT_2 / n as f64
            } else {
                1.0 / n as f64
            }
        };
        match self {
            HLadder::Range {
                h_min,
                h_max,
                count,
            } => {
                if !(*h_min > 0.0 && h_min < h_max) {
                    return Err(Error::Config(format!(
                        "h_ladder: need 0 < h_min < h_max, got [{h_min}, {h_max}]"
                    )));
                }
                if *count < 2 {
                    return Err(Error::Config("h_ladder: count must be >= 2".into()));
                }
                let scale = if dim == 2 {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                };
                let n_min = (scale / h_max).round().max(2.0) as usize;
                let n_max = (scale / h_min).round() as usize;
                let available = n_max.saturating_sub(n_min) + 1;
                if available < *count {
                    return Err(Error::Config(format!(
                        "h_ladder: range [{h_min}, {h_max}] holds only {available} meshes, fewer than count {count}"
                    )));
                }
                let candidates: Vec<usize> = (n_min..=n_max).collect();
                Ok(log_uniform_subset(&candidates, *count))
            }
            HLadder::Dyadic { n_max } => {
                if *n_max < 8 || n_max % 4 != 0 {
                    return Err(Error::Config(format!(
                        "h_ladder: dyadic n_max must be a multiple of 4 and >= 8, got {n_max}"
                    )));
                }
                // every integer level up to n_max/4, then its doubles and
                // quadruples
                let base_top = n_max / 4;
                let mut levels: Vec<usize> = (2..=base_top).collect();
                levels.extend((2..=base_top).map(|n| 2 * n));
                levels.extend((2..=base_top).map(|n| 4 * n));
                levels.sort_unstable();
                levels.dedup();
                Ok(levels)
            }
            HLadder::List(hs) => {
                if hs.len() < 2 {
                    return Err(Error::Config("h_ladder: list needs >= 2 entries".into()));
                }
                if hs.windows(2).any(|w| w[0] <= w[1]) {
                    return Err(Error::Config(
                        "h_ladder: list must be strictly decreasing".into(),
                    ));
                }
                let mut ns = Vec::with_capacity(hs.len());
                for &h in hs {
                    if h <= 0.0 {
                        return Err(Error::Config(format!(
                            "h_ladder: h must be positive, got {h}"
                        )));
                    }
                    let scale = if dim == 2 {
                        std::f64::consts::SQRT_2
                    } else {
                        1.0
                    };
                    let n = (scale / h).round() as usize;
                    if n < 2 || (h_of(n.max(2)) - h).abs() > 1e-9 * h {
                        return Err(Error::Config(format!(
                            "h_ladder: h = {h} does not match a structured mesh width"
                        )));
                    }
                    ns.push(n);
                }
                Ok(ns)
            }
        }
    }

    /// Levels at which a dyadic log-ratio is computable: n with 2n and 4n
    /// both present.
    pub fn log_ratio_bases(levels: &[usize]) -> Vec<usize> {
        levels
            .iter()
            .copied()
            .filter(|n| levels.contains(&(2 * n)) && levels.contains(&(4 * n)))
            .collect()
    }
}

/// `count` entries of `candidates` (sorted ascending) whose logarithms are
/// as evenly spread as possible: for each log-uniform target the nearest
/// still-unused candidate is taken.
fn log_uniform_subset(candidates: &[usize], count: usize) -> Vec<usize> {
    debug_assert!(candidates.len() >= count && count >= 2);
    let lo = (candidates[0] as f64).ln();
    let hi = (candidates[candidates.len() - 1] as f64).ln();
    let mut picked: Vec<usize> = Vec::with_capacity(count);
    for j in 0..count {
        let target = (lo + (hi - lo) * j as f64 / (count as f64 - 1.0)).exp();
        let mut best: Option<usize> = None;
        for &c in candidates {
            if picked.contains(&c) {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => (c as f64 - target).abs() < (b as f64 - target).abs(),
            };
            if better {
                best = Some(c);
            }
        }
        picked.push(best.expect("count <= candidates.len()"));
    }
    picked.sort_unstable();
    picked
}

/// Full experiment configuration. Constructed from per-experiment defaults,
/// then overridden by config-file keys and CLI flags.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub sigma_f: f64,
    pub l_f: f64,
    pub h_ladder: HLadder,
    /// Reference grid resolution: point count in 1D, points per side in 2D.
    pub grid_n: usize,
    pub sensor_count: usize,
    pub sensor_lo: f64,
    pub sensor_hi: f64,
    pub epsilons: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub kf_mode: KfMode,
    /// Grid spacing (1/n per side) of the fine mesh that generates 2D
    /// posterior sensor data.
    pub fine_h: f64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn default_for(kind: ExperimentKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            experiment: kind,
            sigma_f: 0.1,
            l_f: 0.4,
            h_ladder: HLadder::Range {
                h_min: 0.02,
                h_max: 0.25,
                count: 30,
            },
            grid_n: 51,
            sensor_count: 10,
            sensor_lo: 0.01,
            sensor_hi: 0.99,
            epsilons: Vec::new(),
            n_samples: 1000,
            seed: 2024,
            kf_mode: KfMode::NodalMass,
            fine_h: 1.0 / 64.0,
            output_dir: PathBuf::from("statfem-out"),
        };
        match kind {
            ExperimentKind::Prior1d => {}
            ExperimentKind::Posterior1d => {
                cfg.grid_n = 41;
                cfg.h_ladder = HLadder::Range {
                    h_min: 0.025,
                    h_max: 0.25,
                    count: 28,
                };
                cfg.epsilons = vec![5e-5, 1e-4, 1e-2, 1e-1];
            }
            ExperimentKind::Prior2d => {
                cfg.grid_n = 41;
                cfg.h_ladder = HLadder::Dyadic { n_max: 64 };
            }
            ExperimentKind::Posterior2d => {
                cfg.grid_n = 41;
                cfg.h_ladder = HLadder::Dyadic { n_max: 64 };
                cfg.epsilons = vec![1e-3];
                cfg.sensor_count = 25;
            }
            ExperimentKind::MaxPrior1d => {
                cfg.l_f = 0.01;
                cfg.grid_n = 100;
            }
            ExperimentKind::MaxPosterior1d => {
                cfg.l_f = 0.01;
                cfg.grid_n = 41;
                cfg.epsilons = vec![1e-2, 1e-3, 5e-4, 1e-4];
            }
        }
        cfg
    }

    /// Parse a flat key-value config file body (` key = value ` lines, `#`
    /// comments).
    pub fn parse_file_text(text: &str) -> Result<BTreeMap<String, String>> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`, got {raw:?}",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if map.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {key}",
                    lineno + 1
                )));
            }
        }
        Ok(map)
    }

    /// Apply config-file overrides. Every key must be a known field.
    pub fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        fn num<T: std::str::FromStr>(field: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("{field}: cannot parse {v:?}")))
        }
        for (key, value) in map {
            match key.as_str() {
                "experiment" => self.experiment = ExperimentKind::parse(value)?,
                "sigma_f" => self.sigma_f = num("sigma_f", value)?,
                "l_f" => self.l_f = num("l_f", value)?,
                "h_ladder" => self.h_ladder = HLadder::parse(value)?,
                "grid_n" => self.grid_n = num("grid_n", value)?,
                "sensor_count" => self.sensor_count = num("sensor_count", value)?,
                "sensor_lo" => self.sensor_lo = num("sensor_lo", value)?,
                "sensor_hi" => self.sensor_hi = num("sensor_hi", value)?,
                "epsilons" => {
                    let parsed: std::result::Result<Vec<f64>, _> =
                        value.split(',').map(|t| t.trim().parse()).collect();
                    self.epsilons = parsed
                        .map_err(|_| Error::Config(format!("epsilons: cannot parse {value:?}")))?;
                }
                "n_samples" => self.n_samples = num("n_samples", value)?,
                "seed" => self.seed = num("seed", value)?,
                "kf_mode" => {
                    self.kf_mode = match value.as_str() {
                        "exact-quadrature" => KfMode::ExactQuadrature,
                        "nodal-mass" => KfMode::NodalMass,
                        other => {
                            return Err(Error::Config(format!(
                                "kf_mode: expected exact-quadrature or nodal-mass, got {other:?}"
                            )))
                        }
                    }
                }
                "fine_h" => self.fine_h = num("fine_h", value)?,
                "output_dir" => self.output_dir = PathBuf::from(value),
                other => {
                    return Err(Error::Config(format!("unknown config key {other:?}")));
                }
            }
        }
        Ok(())
    }

    /// Build a config from optional file text plus CLI-style overrides.
    pub fn from_sources(
        file_text: Option<&str>,
        experiment: Option<&str>,
        seed: Option<u64>,
        out: Option<&std::path::Path>,
    ) -> Result<ExperimentConfig> {
        let map = match file_text {
            Some(text) => Self::parse_file_text(text)?,
            None => BTreeMap::new(),
        };
        let kind = match experiment {
            Some(name) => ExperimentKind::parse(name)?,
            None => match map.get("experiment") {
                Some(name) => ExperimentKind::parse(name)?,
                None => {
                    return Err(Error::Config(
                        "experiment: missing (set it in the config file or pass --experiment)"
                            .into(),
                    ))
                }
            },
        };
        let mut cfg = ExperimentConfig::default_for(kind);
        cfg.apply(&map)?;
        // CLI flags win over file values
        cfg.experiment = kind;
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        if let Some(out) = out {
            cfg.output_dir = out.to_path_buf();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-by-field validation; failures name the offending fields.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if !(self.sigma_f > 0.0) {
            issues.push(format!("sigma_f: must be positive, got {}", self.sigma_f));
        }
        if !(self.l_f > 0.0) {
            issues.push(format!("l_f: must be positive, got {}", self.l_f));
        }
        if self.grid_n < 2 {
            issues.push(format!("grid_n: must be >= 2, got {}", self.grid_n));
        }
        match self.levels() {
            Err(e) => issues.push(e.to_string().replace("config error: ", "")),
            Ok(levels) => {
                if self.experiment.is_self_convergence()
                    && HLadder::log_ratio_bases(&levels).is_empty()
                {
                    issues.push(
                        "h_ladder: self-convergence experiments need levels closed under halving twice"
                            .into(),
                    );
                }
            }
        }
        if self.experiment.uses_sensors() {
            if self.sensor_count < 1 {
                issues.push("sensor_count: must be >= 1".into());
            }
            if self.experiment.dim() == 2 {
                let side = (self.sensor_count as f64).sqrt().round() as usize;
                if side * side != self.sensor_count || side < 2 {
                    issues.push(format!(
                        "sensor_count: 2D sensors form a tensor grid, need a square count >= 4, got {}",
                        self.sensor_count
                    ));
                }
            }
            if !(0.0 <= self.sensor_lo && self.sensor_lo < self.sensor_hi && self.sensor_hi <= 1.0)
            {
                issues.push(format!(
                    "sensor_lo/sensor_hi: need 0 <= lo < hi <= 1, got [{}, {}]",
                    self.sensor_lo, self.sensor_hi
                ));
            }
            if self.epsilons.is_empty() {
                issues.push("epsilons: posterior experiments need at least one value".into());
            }
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0)) {
            issues.push(format!(
                "epsilons: must all be positive, got {:?}",
                self.epsilons
            ));
        }
        if self.experiment.is_max() && self.n_samples < 2 {
            issues.push(format!("n_samples: must be >= 2, got {}", self.n_samples));
        }
        if self.experiment == ExperimentKind::Posterior2d {
            let n = 1.0 / self.fine_h;
            if !(n.round() >= 2.0 && (n - n.round()).abs() < 1e-9) {
                issues.push(format!(
                    "fine_h: must equal 1/n for an integer n >= 2, got {}",
                    self.fine_h
                ));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues.join("; ")))
        }
    }

    /// Mesh sizes of the ladder, ascending. 1D ranges skip meshes aligned
    /// with the reference grid (nodal exactness degenerates those levels).
    pub fn levels(&self) -> Result<Vec<usize>> {
        let avoid = if self.experiment.dim() == 1 && self.grid_n >= 2 {
            Some(self.grid_n - 1)
        } else {
            None
        };
        self.h_ladder.resolve_avoiding(self.experiment.dim(), avoid)
    }

    /// Mesh width of a ladder level.
    pub fn h_of_level(&self, n: usize) -> f64 {
        if self.experiment.dim() == 2 {
            std::f64::consts::SQRT_2 / n as f64
        } else {
            1.0 / n as f64
        }
    }

    /// Canonical one-line-per-field rendering, hashed into the run manifest.
    pub fn canonical_string(&self) -> String {
        format!(
            "experiment={}\nsigma_f={:e}\nl_f={:e}\nh_ladder={}\ngrid_n={}\nsensor_count={}\n\
             sensor_lo={:e}\nsensor_hi={:e}\nepsilons={}\nn_samples={}\nseed={}\nkf_mode={}\nfine_h={:e}\n",
            self.experiment,
            self.sigma_f,
            self.l_f,
            self.h_ladder.spec_string(),
            self.grid_n,
            self.sensor_count,
            self.sensor_lo,
            self.sensor_hi,
            self.epsilons
                .iter()
                .map(|e| format!("{e:e}"))
                .collect::<Vec<_>>()
                .join(","),
            self.n_samples,
            self.seed,
            self.kf_mode,
            self.fine_h,
        )
    }
}
