use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rap::analysis::{
    cdf_slope, compare_probe_to_model, exponent_fit, gamma_likelihood, radius_cdf, series_kind_for, EnsembleSeries,
    ExponentFit, GammaLikelihood, ModelCdf, SeriesKind, SlopeEstimate,
};
use rap::io::{
    fit_json, likelihood_json, order_json, probe_sidecar, read_packing_csv, read_snapshots_jsonl, write_packing_csv,
    write_probe_csv, write_snapshots_jsonl,
};
use rap::meanfield::{reference_gammas, solve_exponents, MeanFieldSolution, SurfaceModelKind};
use rap::packer::{probe_insertions, run, SnapshotSeries};
use rap::Order;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest<C> {
    pub command: String,
    pub version: String,
    pub config: C,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub outputs: Vec<String>,
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_manifest<C: DeserializeOwned>(path: &Path, command: &str) -> Result<Manifest<C>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let m: Manifest<C> = serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
    if m.command != command {
        bail!("{} is a `{}` manifest, not `{command}`", path.display(), m.command);
    }
    Ok(m)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn packing_file(seed: u64) -> String {
    format!("packing_seed{seed}.csv")
}

pub fn snapshot_file(seed: u64) -> String {
    format!("snapshots_seed{seed}.jsonl")
}

#[derive(Debug, Default)]
pub struct SimulateOverrides {
    pub dim: Option<usize>,
    pub side: Option<f64>,
    pub n: Option<u64>,
    pub seed: Option<u64>,
    pub replicas: Option<u64>,
    pub out: Option<PathBuf>,
}

pub fn simulate(config: Option<&Path>, manifest: Option<&Path>, over: SimulateOverrides) -> Result<()> {
    let mut cfg = match (config, manifest) {
        (Some(_), Some(_)) => bail!("give either --config or --manifest, not both"),
        (_, Some(m)) => {
            let m: Manifest<RunConfig> = read_manifest(m, "simulate")?;
            if m.config.hash() != m.config_hash {
                bail!("manifest config does not match its hash");
            }
            m.config
        }
        (Some(c), None) => RunConfig::from_ini(c)?,
        (None, None) => RunConfig::default(),
    };
    if manifest.is_some() && (over.dim.is_some() || over.side.is_some() || over.n.is_some() || over.seed.is_some() || over.replicas.is_some()) {
        bail!("a manifest rerun only accepts --out");
    }
    if let Some(d) = over.dim {
        if config.is_none() || cfg.orders == rap::packer::default_orders(cfg.dim) {
            cfg.orders = rap::packer::default_orders(d);
        }
        cfg.dim = d;
    }
    if let Some(v) = over.side {
        cfg.side = v;
    }
    if let Some(v) = over.n {
        cfg.n = v;
    }
    if let Some(v) = over.seed {
        cfg.seed = v;
    }
    if let Some(v) = over.replicas {
        cfg.replicas = v;
    }
    if let Some(v) = over.out {
        cfg.output = v;
    }
    cfg.validate()?;
    create_dir(&cfg.output)?;

    let seeds: Vec<u64> = (0..cfg.replicas).map(|k| cfg.replica_seed(k)).collect();
    let outputs: Vec<Vec<String>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|k| -> Result<Vec<String>> {
            let pc = cfg.packer(k);
            let (packing, series) = run(&pc).with_context(|| format!("replica seed {}", pc.seed))?;
            let csv = packing_file(pc.seed);
            let jsonl = snapshot_file(pc.seed);
            let mut w = BufWriter::new(File::create(cfg.output.join(&csv))?);
            write_packing_csv(&packing, &mut w)?;
            w.flush()?;
            let mut w = BufWriter::new(File::create(cfg.output.join(&jsonl))?);
            write_snapshots_jsonl(&series, &mut w)?;
            w.flush()?;
            eprintln!(
                "seed {}: {} spheres, {} attempts, pore fraction {:.6e}",
                pc.seed,
                packing.len(),
                packing.attempts(),
                packing.pore() / packing.domain().volume()
            );
            Ok(vec![csv, jsonl])
        })
        .collect::<Result<_>>()?;

    let manifest = Manifest {
        command: "simulate".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        seeds,
        threads: rayon::current_num_threads(),
        outputs: outputs.into_iter().flatten().collect(),
    };
    write_json(&cfg.output.join(MANIFEST), &manifest)?;
    println!("wrote {} replicas to {}", cfg.replicas, cfg.output.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub packing: PathBuf,
    pub packing_sha256: String,
    pub count: u64,
    pub models: Vec<SurfaceModelKind>,
    pub seed: u64,
    pub output: PathBuf,
}

impl ProbeConfig {
    fn hash(&self) -> String {
        let canonical = json!({
            "packing_sha256": self.packing_sha256,
            "count": self.count,
            "models": self.models,
            "seed": self.seed,
        });
        hex_digest(canonical.to_string().as_bytes())
    }
}

pub fn parse_models(list: &str) -> Result<Vec<SurfaceModelKind>> {
    let mut models = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m: SurfaceModelKind = item.parse()?;
        if !models.contains(&m) {
            models.push(m);
        }
    }
    if models.is_empty() {
        bail!("no models given");
    }
    Ok(models)
}

pub struct ProbeArgs {
    pub packing: Option<PathBuf>,
    pub count: u64,
    pub models: Vec<SurfaceModelKind>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

pub fn probe(args: ProbeArgs) -> Result<()> {
    let mut cfg = match (&args.manifest, &args.packing) {
        (Some(m), _) => {
            let m: Manifest<ProbeConfig> = read_manifest(m, "probe")?;
            if m.config.hash() != m.config_hash {
                bail!("manifest config does not match its hash");
            }
            m.config
        }
        (None, Some(p)) => ProbeConfig {
            packing: p.clone(),
            packing_sha256: String::new(),
            count: args.count,
            models: args.models.clone(),
            seed: args.seed,
            output: PathBuf::from("probe"),
        },
        (None, None) => bail!("give --packing or --manifest"),
    };
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    let bytes = fs::read(&cfg.packing).with_context(|| format!("reading {}", cfg.packing.display()))?;
    let digest = hex_digest(&bytes);
    if args.manifest.is_some() && digest != cfg.packing_sha256 {
        bail!("{} changed since the manifest was written", cfg.packing.display());
    }
    cfg.packing_sha256 = digest;
    let packing = read_packing_csv(bytes.as_slice()).with_context(|| format!("parsing {}", cfg.packing.display()))?;
    create_dir(&cfg.output)?;

    let result = probe_insertions(&packing, cfg.count, cfg.seed);
    let mut w = BufWriter::new(File::create(cfg.output.join("probe.csv"))?);
    write_probe_csv(&result, &mut w)?;
    w.flush()?;
    write_json(&cfg.output.join("probe.json"), &probe_sidecar(&result))?;

    let d = packing.domain().dimension() as u32;
    let moments: BTreeMap<Order, f64> = packing.accumulator().values().into_iter().collect();
    let mut ks = serde_json::Map::new();
    let mut columns = Vec::new();
    for &model in &cfg.models {
        let cdf = ModelCdf::new(model, d, &moments, packing.len() as u64, packing.pore())?;
        let cmp = compare_probe_to_model(&result, |r| cdf.survival(r))?;
        println!("{:>6}: KS distance {:.6}", model.label(), cmp.ks_distance);
        ks.insert(model.label().to_string(), json!(cmp.ks_distance));
        columns.push((model, cmp.table));
    }
    let mut w = BufWriter::new(File::create(cfg.output.join("comparison.csv"))?);
    let labels: Vec<&str> = cfg.models.iter().map(|m| m.label()).collect();
    writeln!(w, "ln_r_bin_center,empirical,{}", labels.join(","))?;
    if let Some((_, first)) = columns.first() {
        for (i, row) in first.iter().enumerate() {
            write!(w, "{},{}", row.ln_r, row.empirical)?;
            for (_, table) in &columns {
                write!(w, ",{}", table[i].model)?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    write_json(
        &cfg.output.join("comparison.json"),
        &json!({
            "spheres": packing.len(),
            "accepted": result.accepted(),
            "ks": ks,
        }),
    )?;

    let manifest = Manifest {
        command: "probe".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        seeds: vec![cfg.seed],
        threads: rayon::current_num_threads(),
        outputs: ["probe.csv", "probe.json", "comparison.csv", "comparison.json"]
            .map(String::from)
            .to_vec(),
    };
    write_json(&cfg.output.join(MANIFEST), &manifest)?;
    Ok(())
}

/// Both mean-field columns of the exponent table with the reference formulas.
pub fn table(dims: &[u32]) -> Result<Value> {
    let mut solutions = Vec::new();
    for &model in &[SurfaceModelKind::UniformDistribution, SurfaceModelKind::IdenticalTwins] {
        for &d in dims {
            solutions.push(solve_exponents(model, d).with_context(|| format!("solving {model} in d={d}"))?);
        }
    }
    let reference: Vec<Value> = dims
        .iter()
        .map(|&d| {
            let (abk, ref22) = reference_gammas(d);
            json!({"d": d, "gamma_abk": abk, "gamma_ref22": ref22})
        })
        .collect();
    Ok(json!({"solutions": solutions, "reference": reference}))
}

fn print_table(solutions: &[MeanFieldSolution]) {
    println!("{:>6} {:>2} {:>10} {:>10} {:>10} {:>10} {:>10}", "model", "d", "lambda_1", "lambda_2", "lambda_3", "lambda_4", "gamma");
    for s in solutions {
        let l = |k: u32| s.lambdas.get(&Order::int(k)).map_or_else(|| "-".into(), |v| format!("{v:.4}"));
        println!(
            "{:>6} {:>2} {:>10} {:>10} {:>10} {:>10} {:>10.4}",
            s.model.label(),
            s.d,
            l(1),
            l(2),
            if s.d >= 3 { l(3) } else { "-".into() },
            if s.d >= 4 { l(4) } else { "-".into() },
            s.gamma
        );
    }
}

pub fn solve(model: Option<SurfaceModelKind>, dim: Option<u32>, all: bool, out: Option<&Path>) -> Result<()> {
    let value = if all {
        let t = table(&[2, 3, 4])?;
        let sols: Vec<MeanFieldSolution> = serde_json::from_value(t["solutions"].clone())?;
        print_table(&sols);
        for r in t["reference"].as_array().into_iter().flatten() {
            println!("d={} gamma_ABK={:.4} gamma_ref22={:.4}", r["d"], r["gamma_abk"].as_f64().unwrap_or(f64::NAN), r["gamma_ref22"].as_f64().unwrap_or(f64::NAN));
        }
        t
    } else {
        let (Some(model), Some(dim)) = (model, dim) else {
            bail!("give --model and --dim, or --all");
        };
        if model == SurfaceModelKind::AffineRef22 {
            bail!("the affine model has no exponent system; `solve` takes UD or IT");
        }
        let sol = solve_exponents(model, dim)?;
        println!("{}", serde_json::to_string(&sol)?);
        serde_json::to_value(&sol)?
    };
    if let Some(path) = out {
        write_json(path, &value)?;
    }
    Ok(())
}

/// Replicas in `dir`, ordered by seed.
pub fn load_ensemble(dir: &Path) -> Result<EnsembleSeries> {
    let mut files: Vec<(u64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(seed) = name.strip_prefix("snapshots_seed").and_then(|s| s.strip_suffix(".jsonl")) {
            files.push((seed.parse().with_context(|| format!("bad snapshot name {name}"))?, path));
        }
    }
    if files.is_empty() {
        bail!("no snapshots_seed*.jsonl files in {}", dir.display());
    }
    files.sort();
    let replicas = files
        .iter()
        .map(|(_, p)| -> Result<SnapshotSeries> {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            read_snapshots_jsonl(BufReader::new(f)).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleSeries::from_replicas(replicas)?)
}

fn dimension_of(dir: &Path, dim: Option<usize>) -> Result<usize> {
    if let Some(d) = dim {
        return Ok(d);
    }
    let path = dir.join(MANIFEST);
    if path.exists() {
        let m: Manifest<RunConfig> = read_manifest(&path, "simulate")?;
        return Ok(m.config.dim);
    }
    bail!("no {MANIFEST} in {}; pass --dim", dir.display())
}

pub struct FitArgs {
    pub snapshots: PathBuf,
    pub alphas: Option<Vec<Order>>,
    pub dim: Option<usize>,
    pub window: (f64, f64),
    pub out: Option<PathBuf>,
}

pub struct Fitted {
    pub dim: usize,
    pub ensemble: EnsembleSeries,
    pub fits: Vec<(ExponentFit, Option<GammaLikelihood>)>,
}

pub fn fit_all(args: &FitArgs) -> Result<Fitted> {
    let dim = dimension_of(&args.snapshots, args.dim)?;
    let ensemble = load_ensemble(&args.snapshots)?;
    let alphas = args.alphas.clone().unwrap_or_else(|| vec![Order::ONE, Order::int(dim as u32)]);
    let available = ensemble.orders();
    for &alpha in &alphas {
        if series_kind_for(alpha, dim as u32) == SeriesKind::Moment && !available.contains(&alpha) {
            let list: Vec<String> = available.iter().map(|o| o.to_string()).collect();
            bail!("M_{alpha} was not recorded; available orders: {}", list.join(", "));
        }
    }
    let fits = alphas
        .par_iter()
        .map(|&alpha| -> Result<(ExponentFit, Option<GammaLikelihood>)> {
            let kind = series_kind_for(alpha, dim as u32);
            let f = exponent_fit(&ensemble, kind, alpha, args.window).with_context(|| format!("fitting alpha = {alpha}"))?;
            let l = match gamma_likelihood(&f.fit, alpha) {
                Ok(l) => Some(l),
                Err(e) => {
                    eprintln!("warning: no gamma likelihood for alpha = {alpha}: {e}");
                    None
                }
            };
            Ok((f, l))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Fitted { dim, ensemble, fits })
}

fn alpha_tag(alpha: Order) -> String {
    alpha.to_string().replace('/', "_")
}

pub fn fit(args: FitArgs) -> Result<()> {
    let fitted = fit_all(&args)?;
    let out = args.out.clone().unwrap_or_else(|| args.snapshots.join("fit"));
    create_dir(&out)?;
    for (f, l) in &fitted.fits {
        let tag = alpha_tag(f.alpha);
        write_json(&out.join(format!("fit_alpha{tag}.json")), &fit_json(f))?;
        if let Some(l) = l {
            write_json(&out.join(format!("likelihood_alpha{tag}.json")), &likelihood_json(l))?;
        }
        let mut w = BufWriter::new(File::create(out.join(format!("logderiv_alpha{tag}.csv")))?);
        writeln!(w, "n,dlny_dlnn,se")?;
        for (n, y, s) in &f.points {
            writeln!(w, "{n},{y},{s}")?;
        }
        w.flush()?;
        let gamma = match l {
            Some(l) => format!(
                "gamma mode {:.4} in [{:.4}, {:.4}]{}",
                l.mode,
                l.interval.0,
                l.interval.1,
                if l.truncated { " (truncated)" } else { "" }
            ),
            None => "no gamma likelihood".into(),
        };
        println!(
            "alpha={:<4} {:>5}: lambda = {:.5} +/- {:.5}  (b={:.4}, c={:.4}, chi2/dof={:.3})  {gamma}",
            f.alpha.to_string(),
            match f.kind {
                SeriesKind::Moment => "M",
                SeriesKind::Pore => "pore",
            },
            f.fit.lambda,
            f.fit.sigma_lambda,
            f.fit.b,
            f.fit.c,
            f.fit.reduced_chi2(),
        );
    }
    Ok(())
}

pub struct ReportArgs {
    pub fit: FitArgs,
    pub slope_window: (f64, f64),
    pub bootstrap: usize,
    pub seed: u64,
}

pub fn report(args: ReportArgs) -> Result<()> {
    let fitted = fit_all(&args.fit)?;
    let d = fitted.dim as u32;
    let solved: Vec<MeanFieldSolution> = [SurfaceModelKind::UniformDistribution, SurfaceModelKind::IdenticalTwins]
        .iter()
        .map(|&m| solve_exponents(m, d))
        .collect::<rap::Result<_>>()?;
    let (abk, ref22) = reference_gammas(d);
    let side = side_of(&args.fit.snapshots)?;
    let n = *fitted.ensemble.grid.last().ok_or_else(|| anyhow!("empty ensemble"))?;
    let slope: Option<SlopeEstimate> = match side {
        Some(side) if fitted.ensemble.cdf_at(n).is_some() => Some(cdf_slope(
            &fitted.ensemble,
            n,
            (args.slope_window.0 * side, args.slope_window.1 * side),
            args.bootstrap,
            args.seed,
        )?),
        _ => None,
    };

    let out = args.fit.out.clone().unwrap_or_else(|| args.fit.snapshots.join("report"));
    create_dir(&out)?;
    let mut md = String::new();
    md.push_str(&format!(
        "# Exponents, d = {d}\n\n{} replicas, n = {n}, fit window n >= {}\n\n",
        fitted.ensemble.replica_count, args.fit.window.0
    ));
    md.push_str("| alpha | UD | IT | simulation |\n|---|---|---|---|\n");
    for (f, _) in &fitted.fits {
        let pred = |s: &MeanFieldSolution| rap::meanfield::lambda_alpha(f.alpha, s.lambda1);
        md.push_str(&format!(
            "| {} | {:.4} | {:.4} | {:.4} +/- {:.4} |\n",
            f.alpha,
            pred(&solved[0]),
            pred(&solved[1]),
            f.fit.lambda,
            f.fit.sigma_lambda
        ));
    }
    md.push_str(&format!(
        "\n| gamma | value |\n|---|---|\n| UD | {:.4} |\n| IT | {:.4} |\n| ABK | {abk:.4} |\n| Ref. 22 | {ref22:.4} |\n",
        solved[0].gamma, solved[1].gamma
    ));
    for (f, l) in fitted.fits.iter().filter_map(|(f, l)| l.as_ref().map(|l| (f, l))) {
        md.push_str(&format!(
            "| likelihood alpha={} | mode {:.4}, [{:.4}, {:.4}] |\n",
            f.alpha, l.mode, l.interval.0, l.interval.1
        ));
    }
    if let Some(s) = &slope {
        md.push_str(&format!(
            "| radius CDF slope at n={} | {:.4} +/- {:.4} |\n",
            s.n, s.gamma, s.sigma_gamma
        ));
    }
    fs::write(out.join("report.md"), &md)?;
    let radius = radius_cdf(&fitted.ensemble, n).ok();
    write_json(
        &out.join("report.json"),
        &json!({
            "d": d,
            "n": n,
            "replicas": fitted.ensemble.replica_count,
            "solved": solved,
            "reference": {"gamma_abk": abk, "gamma_ref22": ref22},
            "fits": fitted.fits.iter().map(|(f, _)| fit_json(f)).collect::<Vec<_>>(),
            "likelihoods": fitted.fits.iter().map(|(_, l)| l.as_ref().map(likelihood_json)).collect::<Vec<_>>(),
            "cdf_slope": slope,
            "radius_cdf": radius,
            "alphas": fitted.fits.iter().map(|(f, _)| order_json(f.alpha)).collect::<Vec<_>>(),
        }),
    )?;
    print!("{md}");
    Ok(())
}

fn side_of(dir: &Path) -> Result<Option<f64>> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    let m: Manifest<RunConfig> = read_manifest(&path, "simulate")?;
    Ok(Some(m.config.side))
}
