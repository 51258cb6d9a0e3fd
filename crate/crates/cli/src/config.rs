use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ini::Ini;
use rap::order::parse_orders;
use rap::packer::{default_orders, PackerConfig, DEFAULT_HIST_BINS_PER_DECADE, DEFAULT_SNAPSHOTS_PER_DECADE};
use rap::Order;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Resolved simulation configuration, as recorded in manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dim: usize,
    pub side: f64,
    pub n: u64,
    pub seed: u64,
    pub replicas: u64,
    pub snapshots_per_decade: u32,
    pub hist_bins_per_decade: u32,
    pub histograms: bool,
    pub orders: Vec<Order>,
    pub max_attempts: u64,
    pub leaf_capacity: usize,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 2,
            side: 1.0,
            n: 10_000,
            seed: 0,
            replicas: 1,
            snapshots_per_decade: DEFAULT_SNAPSHOTS_PER_DECADE,
            hist_bins_per_decade: DEFAULT_HIST_BINS_PER_DECADE,
            histograms: true,
            orders: default_orders(2),
            max_attempts: rap::packer::DEFAULT_MAX_ATTEMPTS,
            leaf_capacity: rap::spatial_index::DEFAULT_LEAF_CAPACITY,
            output: PathBuf::from("out"),
        }
    }
}

/// Integer counts may be written as `10000` or `1e4`.
pub fn parse_count(s: &str) -> Result<u64> {
    let s = s.trim().replace('_', "");
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().with_context(|| format!("`{s}` is not a count"))?;
    if !(v >= 0.0 && v.fract() == 0.0 && v < 1.8e19) {
        bail!("`{s}` is not a nonnegative integer");
    }
    Ok(v as u64)
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => bail!("`{other}` is not a boolean"),
    }
}

impl RunConfig {
    /// Read `key = value` pairs from the general section or `[run]`.
    pub fn from_ini(path: &Path) -> Result<Self> {
        let ini = Ini::load_from_file(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = RunConfig::default();
        let mut orders_set = false;
        for (section, props) in ini.iter() {
            if !matches!(section, None | Some("run")) {
                bail!("{}: unknown section [{}]", path.display(), section.unwrap_or_default());
            }
            for (key, value) in props.iter() {
                let ctx = || format!("{}: key `{key}`", path.display());
                match key {
                    "dim" | "d" => cfg.dim = value.trim().parse().with_context(ctx)?,
                    "side" | "L" => cfg.side = value.trim().parse().with_context(ctx)?,
                    "n" | "spheres" => cfg.n = parse_count(value).with_context(ctx)?,
                    "seed" => cfg.seed = parse_count(value).with_context(ctx)?,
                    "replicas" => cfg.replicas = parse_count(value).with_context(ctx)?,
                    "snapshots_per_decade" => cfg.snapshots_per_decade = value.trim().parse().with_context(ctx)?,
                    "hist_bins_per_decade" => cfg.hist_bins_per_decade = value.trim().parse().with_context(ctx)?,
                    "histograms" => cfg.histograms = parse_bool(value).with_context(ctx)?,
                    "alphas" | "orders" => {
                        cfg.orders = parse_orders(value).with_context(ctx)?;
                        orders_set = true;
                    }
                    "max_attempts" => cfg.max_attempts = parse_count(value).with_context(ctx)?,
                    "leaf_capacity" => cfg.leaf_capacity = parse_count(value).with_context(ctx)? as usize,
                    "output" | "out" => cfg.output = PathBuf::from(value.trim()),
                    other => bail!("{}: unknown key `{other}`", path.display()),
                }
            }
        }
        if !orders_set {
            cfg.orders = default_orders(cfg.dim);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            bail!("replica count must be at least 1");
        }
        self.packer(0).validate()?;
        Ok(())
    }

    /// Seed of replica `k`.
    pub fn replica_seed(&self, k: u64) -> u64 {
        self.seed.wrapping_add(k)
    }

    pub fn packer(&self, replica: u64) -> PackerConfig {
        PackerConfig {
            dim: self.dim,
            side: self.side,
            n: self.n,
            seed: self.replica_seed(replica),
            orders: self.orders.clone(),
            snapshots_per_decade: self.snapshots_per_decade,
            hist_bins_per_decade: self.hist_bins_per_decade,
            histograms: self.histograms,
            leaf_capacity: self.leaf_capacity,
            max_attempts: self.max_attempts,
        }
    }

    /// SHA-256 of the canonical JSON of everything but the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
