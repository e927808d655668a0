//! Command-line surface for the qpspec library: build and recover
//! homogeneous trees, verify Hadamard/orthobasis/functional-equation
//! verdicts, construct truncation measures, classify zero spheres, run the
//! recovery pipeline, estimate dimensions, and scan tiling/spectrality.
//!
//! Exit codes: 0 = verdict true / success, 1 = verdict false,
//! 2 = usage or validation error.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::{json, Value};

use qpspec_core::measures::{BallMeasure, DiscreteSetQp};
use qpspec_core::padic::{parse_padic, PAdicScaled};
use qpspec_core::trees::HomoTree;
use qpspec_core::{dimensions, fuglede, measures, spectra, trees};

const INLINE_LIMIT: usize = 4096;
const DEFAULT_SCALE_GUARD: u64 = 81;

#[derive(Parser)]
#[command(name = "qpspec", version, about = "Exact p-adic spectral measure toolkit")]
struct Cli {
    /// Number of worker threads (reserved; output is identical for any value)
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Homogeneous trees: build, recover from a residue set, emit DOT
    #[command(subcommand)]
    Tree(TreeCmd),
    /// Spectra of residue sets in Z/p^gamma Z
    #[command(subcommand)]
    Spectrum(SpectrumCmd),
    /// Pair verdicts: Hadamard, orthobasis, functional equation
    #[command(subcommand)]
    Pair(PairCmd),
    /// Truncated singular measures nu_gamma
    #[command(subcommand)]
    Nu(NuCmd),
    /// Zero-sphere classification of Fourier transforms
    #[command(subcommand)]
    Zeros(ZerosCmd),
    /// Structure recovery from a spectral pair
    #[command(subcommand)]
    Recover(RecoverCmd),
    /// Dimension and density estimators
    #[command(subcommand)]
    Dims(DimsCmd),
    /// Tiling / spectrality laboratory for Z/p^gamma Z
    #[command(subcommand)]
    Fuglede(FugledeCmd),
}

#[derive(Args)]
struct GroupArgs {
    /// Prime p
    #[arg(long)]
    p: u64,
    /// Depth gamma (cells of Z/p^gamma Z)
    #[arg(long)]
    gamma: u32,
}

#[derive(Subcommand)]
enum TreeCmd {
    /// Build a tree from branching levels and an optional choice map
    Build {
        #[command(flatten)]
        group: GroupArgs,
        /// Comma-separated branching levels (the set I), e.g. 0,2
        #[arg(long)]
        branching: String,
        /// JSON map from digit-prefix strings to chosen digits, e.g. {"":1,"01":2};
        /// file path or inline. Defaults to the all-zero choice.
        #[arg(long)]
        choice: Option<String>,
        /// Emit the DOT diagram of the leaf set instead of JSON
        #[arg(long)]
        dot: bool,
    },
    /// Recover the homogeneous structure of a residue set, if any
    Recover {
        #[command(flatten)]
        group: GroupArgs,
        /// Comma-separated residues mod p^gamma
        #[arg(long)]
        set: String,
    },
    /// DOT digraph of the prefix tree of a residue set
    Dot {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long)]
        set: String,
    },
}

#[derive(Subcommand)]
enum SpectrumCmd {
    /// Spectrum of a homogeneous set via its dual tree
    ForHomogeneous {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long)]
        set: String,
    },
    /// Backtracking search for any spectrum of the set
    Search {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long)]
        set: String,
        /// Cap on the group order p^gamma
        #[arg(long, default_value_t = DEFAULT_SCALE_GUARD)]
        scale_guard: u64,
    },
}

#[derive(Subcommand)]
enum PairCmd {
    /// Is (C, D) a Hadamard pair under e^{2 pi i cd / p^gamma}?
    Hadamard {
        #[command(flatten)]
        group: GroupArgs,
        /// Comma-separated residues for the first set
        #[arg(long)]
        c: String,
        /// Comma-separated residues for the second set
        #[arg(long)]
        d: String,
    },
    /// Do the characters of Lambda form an orthogonal family in L^2(mu)?
    Orthobasis {
        /// Measure JSON (file path or inline)
        #[arg(long)]
        measure: String,
        /// Spectrum JSON (file path or inline)
        #[arg(long)]
        spectrum: String,
    },
    /// Does sum_lambda |mu-hat(xi - lambda)|^2 = 1 hold on the xi grid?
    FunctionalEq {
        #[arg(long)]
        measure: String,
        #[arg(long)]
        spectrum: String,
        /// Comma-separated xi values like 1/3^2; default is the full grid
        /// m/p^{gamma+1}, 0 <= m < p^{gamma+1}
        #[arg(long)]
        xi: Option<String>,
    },
}

#[derive(Subcommand)]
enum NuCmd {
    /// Construct nu_gamma from branching levels and an optional choice map
    Construct {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long)]
        branching: String,
        #[arg(long)]
        choice: Option<String>,
    },
    /// The canonical spectrum of nu_gamma
    Spectrum {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long)]
        branching: String,
    },
    /// Autocorrelation measure of a measure
    Autocorr {
        #[arg(long)]
        measure: String,
    },
}

#[derive(Subcommand)]
enum ZerosCmd {
    /// Spheres on which the Fourier transform of delta_E vanishes
    Discrete {
        /// Discrete set JSON (file path or inline)
        #[arg(long)]
        set: String,
        /// Window lo,hi of sphere indices (default derived from the set)
        #[arg(long)]
        window: Option<String>,
    },
    /// Spheres on which the Fourier transform of the autocorrelation vanishes
    Autocorr {
        #[arg(long)]
        measure: String,
        #[arg(long)]
        window: Option<String>,
    },
}

#[derive(Subcommand)]
enum RecoverCmd {
    /// Full recovery pipeline on a spectral pair (measure, spectrum)
    Pipeline {
        #[arg(long)]
        measure: String,
        #[arg(long)]
        spectrum: String,
        #[arg(long)]
        window: Option<String>,
    },
}

#[derive(Subcommand)]
enum DimsCmd {
    /// Entropy-dimension sections #(I in [0,k)) / k
    Entropy {
        /// Comma-separated branching levels (the set I)
        #[arg(long)]
        branching: String,
        /// Comma-separated depths k
        #[arg(long)]
        ks: String,
        #[arg(long, action = clap::ArgAction::SetTrue)]
        tsv: bool,
    },
    /// Local dimension of a measure at a point
    Local {
        #[arg(long)]
        measure: String,
        /// Point, e.g. 5/3^2
        #[arg(long)]
        x: String,
        #[arg(long)]
        k: u32,
    },
    /// Beurling counting estimates of a discrete set
    Beurling {
        #[arg(long)]
        set: String,
        /// Exponent r as a rational num/den
        #[arg(long)]
        r: String,
        #[arg(long)]
        ks: String,
        #[arg(long, action = clap::ArgAction::SetTrue)]
        tsv: bool,
    },
    /// Counting density #(E in B(center, p^k)) / p^k
    Density {
        #[arg(long)]
        set: String,
        /// Ball center, default 0
        #[arg(long)]
        center: Option<String>,
        #[arg(long)]
        ks: String,
        #[arg(long, action = clap::ArgAction::SetTrue)]
        tsv: bool,
    },
}

#[derive(Subcommand)]
enum FugledeCmd {
    /// Does the set tile Z/p^gamma Z by translations?
    Tile {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long)]
        set: String,
    },
    /// Is the set spectral in Z/p^gamma Z?
    Spectral {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long)]
        set: String,
        #[arg(long, default_value_t = DEFAULT_SCALE_GUARD)]
        scale_guard: u64,
    },
    /// Scan a family of subsets for tile/spectral/homogeneous agreement
    Scan {
        #[command(flatten)]
        group: GroupArgs,
        /// All nonempty subsets (p^gamma <= 16)
        #[arg(long, conflicts_with_all = ["p_power_sizes", "random"])]
        exhaustive: bool,
        /// All subsets of p-power size (p^gamma <= 27)
        #[arg(long, conflicts_with = "random")]
        p_power_sizes: bool,
        /// Number of random subsets to sample
        #[arg(long)]
        random: Option<u64>,
        /// RNG seed for --random
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, action = clap::ArgAction::SetTrue)]
        tsv: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// File path if one exists at `s`, otherwise `s` itself as inline input.
fn load_input(s: &str) -> Result<String> {
    if std::path::Path::new(s).exists() {
        std::fs::read_to_string(s).with_context(|| format!("reading {s}"))
    } else {
        if s.len() > INLINE_LIMIT {
            bail!("inline input exceeds {INLINE_LIMIT} characters; pass a file path");
        }
        Ok(s.to_string())
    }
}

fn load_measure(s: &str) -> Result<BallMeasure> {
    let text = load_input(s)?;
    serde_json::from_str(&text).with_context(|| format!("parsing measure from {s}"))
}

fn load_set_qp(s: &str) -> Result<DiscreteSetQp> {
    let text = load_input(s)?;
    serde_json::from_str(&text).with_context(|| format!("parsing discrete set from {s}"))
}

fn parse_residues(s: &str) -> Result<BTreeSet<u64>> {
    s.split(',')
        .map(|t| t.trim().parse::<u64>().with_context(|| format!("bad residue {t:?}")))
        .collect()
}

fn parse_levels(s: &str) -> Result<BTreeSet<u32>> {
    if s.trim().is_empty() {
        return Ok(BTreeSet::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<u32>().with_context(|| format!("bad level {t:?}")))
        .collect()
}

fn parse_i64_list(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|t| t.trim().parse::<i64>().with_context(|| format!("bad integer {t:?}")))
        .collect()
}

fn parse_window(s: &str) -> Result<(i64, i64)> {
    let parts = parse_i64_list(s)?;
    match parts[..] {
        [lo, hi] => Ok((lo, hi)),
        _ => bail!("window must be lo,hi"),
    }
}

fn parse_choice(s: &str) -> Result<BTreeMap<Vec<u8>, u8>> {
    let text = load_input(s)?;
    let raw: BTreeMap<String, u8> =
        serde_json::from_str(&text).context("choice map must be a JSON object of digit strings")?;
    raw.into_iter()
        .map(|(k, v)| {
            let key = k
                .chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as u8)
                        .ok_or_else(|| anyhow!("bad digit {c:?} in choice key {k:?}"))
                })
                .collect::<Result<Vec<u8>>>()?;
            Ok((key, v))
        })
        .collect()
}

fn parse_ratio(s: &str) -> Result<BigRational> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n: BigInt = num.parse().with_context(|| format!("bad numerator {num:?}"))?;
    let d: BigInt = den.parse().with_context(|| format!("bad denominator {den:?}"))?;
    if d == BigInt::from(0) {
        bail!("zero denominator");
    }
    Ok(BigRational::new(n, d))
}

fn ratio_string(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn emit(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn verdict(v: bool, payload: Value) -> u8 {
    emit(&payload);
    if v {
        0
    } else {
        1
    }
}

fn tree_json(t: &HomoTree) -> Value {
    json!({
        "p": t.prime(),
        "gamma": t.depth(),
        "I": t.branching_levels(),
        "J": t.single_levels(),
        "leaves": t.leaves(),
    })
}

fn build_tree(group: &GroupArgs, branching: &str, choice: Option<&str>) -> Result<HomoTree> {
    let levels = parse_levels(branching)?;
    Ok(match choice {
        Some(c) => HomoTree::new(group.p, group.gamma, levels, parse_choice(c)?)?,
        None => HomoTree::with_zero_choice(group.p, group.gamma, levels)?,
    })
}

fn full_xi_grid(p: u64, gamma: u32) -> Result<Vec<PAdicScaled>> {
    let m = (p as u64).pow(gamma + 1);
    (0..m)
        .map(|k| Ok(PAdicScaled::new(p, BigInt::from(k), gamma + 1)?))
        .collect()
}

fn sphere_json(cls: &measures::SphereClassification) -> Value {
    json!({
        "window": { "lo": cls.window.0, "hi": cls.window.1 },
        "tags": cls.tags.iter().map(|(n, t)| (n.to_string(), t)).collect::<BTreeMap<_, _>>(),
        "tagged": cls.tagged(),
    })
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Tree(c) => run_tree(c),
        Command::Spectrum(c) => run_spectrum(c),
        Command::Pair(c) => run_pair(c),
        Command::Nu(c) => run_nu(c),
        Command::Zeros(c) => run_zeros(c),
        Command::Recover(c) => run_recover(c),
        Command::Dims(c) => run_dims(c),
        Command::Fuglede(c) => run_fuglede(c),
    }
}

fn run_tree(cmd: TreeCmd) -> Result<u8> {
    match cmd {
        TreeCmd::Build { group, branching, choice, dot } => {
            let t = build_tree(&group, &branching, choice.as_deref())?;
            if dot {
                print!("{}", trees::to_dot(&t.leaves(), group.p, group.gamma)?);
            } else {
                emit(&tree_json(&t));
            }
            Ok(0)
        }
        TreeCmd::Recover { group, set } => {
            let set = parse_residues(&set)?;
            match trees::recover_structure(&set, group.p, group.gamma)? {
                Some(t) => Ok(verdict(true, json!({ "homogeneous": true, "tree": tree_json(&t) }))),
                None => Ok(verdict(false, json!({ "homogeneous": false }))),
            }
        }
        TreeCmd::Dot { group, set } => {
            let set = parse_residues(&set)?;
            print!("{}", trees::to_dot(&set, group.p, group.gamma)?);
            Ok(0)
        }
    }
}

fn run_spectrum(cmd: SpectrumCmd) -> Result<u8> {
    match cmd {
        SpectrumCmd::ForHomogeneous { group, set } => {
            let set = parse_residues(&set)?;
            let d = spectra::spectrum_for_homogeneous(&set, group.p, group.gamma)?;
            emit(&json!({ "spectrum": d }));
            Ok(0)
        }
        SpectrumCmd::Search { group, set, scale_guard } => {
            let set = parse_residues(&set)?;
            match spectra::spectrum_search(&set, group.p, group.gamma, scale_guard)
                .map_err(guard_hint("--scale-guard"))?
            {
                Some(d) => Ok(verdict(true, json!({ "spectral": true, "spectrum": d }))),
                None => Ok(verdict(false, json!({ "spectral": false }))),
            }
        }
    }
}

/// Attaches the override flag name to scale-guard refusals.
fn guard_hint(flag: &'static str) -> impl Fn(qpspec_core::Error) -> anyhow::Error {
    move |e| match &e {
        qpspec_core::Error::ScaleGuard { size, guard } => anyhow!(
            "group order {size} exceeds the scale guard {guard}; raise it with {flag}"
        ),
        _ => e.into(),
    }
}

fn run_pair(cmd: PairCmd) -> Result<u8> {
    match cmd {
        PairCmd::Hadamard { group, c, d } => {
            let c = parse_residues(&c)?;
            let d = parse_residues(&d)?;
            let ok = spectra::is_hadamard(&c, &d, group.p, group.gamma)?;
            Ok(verdict(ok, json!({ "hadamard": ok })))
        }
        PairCmd::Orthobasis { measure, spectrum } => {
            let mu = load_measure(&measure)?;
            let lam = load_set_qp(&spectrum)?;
            let ok = measures::check_orthobasis(&mu, &lam)?;
            Ok(verdict(ok, json!({ "orthobasis": ok })))
        }
        PairCmd::FunctionalEq { measure, spectrum, xi } => {
            let mu = load_measure(&measure)?;
            let lam = load_set_qp(&spectrum)?;
            let grid = match xi {
                Some(s) => s
                    .split(',')
                    .map(|t| Ok(parse_padic(mu.prime(), t.trim())?))
                    .collect::<Result<Vec<_>>>()?,
                None => full_xi_grid(mu.prime(), mu.depth())?,
            };
            let witness = measures::functional_equation_witness(&mu, &lam, &grid)?;
            let ok = witness.is_none();
            Ok(verdict(
                ok,
                json!({
                    "functional_equation": ok,
                    "grid_size": grid.len(),
                    "first_violation": witness.map(|i| grid[i].to_string()),
                }),
            ))
        }
    }
}

fn run_nu(cmd: NuCmd) -> Result<u8> {
    match cmd {
        NuCmd::Construct { group, branching, choice } => {
            let t = build_tree(&group, &branching, choice.as_deref())?;
            let nu = measures::nu_from_tree(&t)?;
            emit(&serde_json::to_value(&nu)?);
            Ok(0)
        }
        NuCmd::Spectrum { group, branching } => {
            let levels = parse_levels(&branching)?;
            let spec = measures::spectrum_truncation(group.p, &levels, group.gamma)?;
            emit(&serde_json::to_value(&spec)?);
            Ok(0)
        }
        NuCmd::Autocorr { measure } => {
            let mu = load_measure(&measure)?;
            let ac = measures::autocorrelation(&mu)?;
            emit(&serde_json::to_value(&ac)?);
            Ok(0)
        }
    }
}

fn run_zeros(cmd: ZerosCmd) -> Result<u8> {
    match cmd {
        ZerosCmd::Discrete { set, window } => {
            let e = load_set_qp(&set)?;
            let w = window.as_deref().map(parse_window).transpose()?;
            let cls = measures::zero_spheres_discrete(&e, w)?;
            emit(&sphere_json(&cls));
            Ok(0)
        }
        ZerosCmd::Autocorr { measure, window } => {
            let mu = load_measure(&measure)?;
            let w = window.as_deref().map(parse_window).transpose()?;
            let cls = measures::zero_spheres_autocorr(&mu, w)?;
            emit(&sphere_json(&cls));
            Ok(0)
        }
    }
}

fn run_recover(cmd: RecoverCmd) -> Result<u8> {
    match cmd {
        RecoverCmd::Pipeline { measure, spectrum, window } => {
            let mu = load_measure(&measure)?;
            let lam = load_set_qp(&spectrum)?;
            let w = window.as_deref().map(parse_window).transpose()?;
            let report = measures::recover_structure_pipeline(&mu, &lam, w)?;
            let ok = report.all_pass();
            let mut payload = serde_json::to_value(&report)?;
            payload["all_pass"] = json!(ok);
            Ok(verdict(ok, payload))
        }
    }
}

fn tsv_rows(header: &str, rows: impl IntoIterator<Item = String>) {
    println!("{header}");
    for r in rows {
        println!("{r}");
    }
}

fn run_dims(cmd: DimsCmd) -> Result<u8> {
    match cmd {
        DimsCmd::Entropy { branching, ks, tsv } => {
            let levels = parse_levels(&branching)?;
            let ks: Vec<u32> = parse_i64_list(&ks)?
                .into_iter()
                .map(|k| u32::try_from(k).map_err(|_| anyhow!("depth {k} out of range")))
                .collect::<Result<_>>()?;
            let est = dimensions::entropy_dimension_estimates(&levels, &ks)?;
            if tsv {
                tsv_rows(
                    "k\tvalue",
                    est.values.iter().map(|(k, v)| format!("{k}\t{}", ratio_string(v))),
                );
            } else {
                emit(&serde_json::to_value(&est)?);
            }
            Ok(0)
        }
        DimsCmd::Local { measure, x, k } => {
            let mu = load_measure(&measure)?;
            let x = parse_padic(mu.prime(), &x)?;
            let d = dimensions::local_dimension_estimate(&mu, &x, k)?;
            let payload = match d.exact() {
                Some(r) => json!({ "k": k, "exact": ratio_string(r), "value": d.to_f64() }),
                None => json!({ "k": k, "exact": Value::Null, "value": d.to_f64() }),
            };
            emit(&payload);
            Ok(0)
        }
        DimsCmd::Beurling { set, r, ks, tsv } => {
            let lam = load_set_qp(&set)?;
            let r = parse_ratio(&r)?;
            let ks = parse_i64_list(&ks)?;
            let est = dimensions::beurling_estimates(&lam, &r, &ks)?;
            if tsv {
                tsv_rows(
                    "k\tsup_count\tinf_count\tsup_ratio",
                    est.entries.iter().map(|e| {
                        format!(
                            "{}\t{}\t{}\t{}",
                            e.k,
                            e.sup_count,
                            e.inf_count,
                            e.sup_ratio.as_ref().map_or("-".into(), ratio_string)
                        )
                    }),
                );
            } else {
                emit(&serde_json::to_value(&est)?);
            }
            Ok(0)
        }
        DimsCmd::Density { set, center, ks, tsv } => {
            let e = load_set_qp(&set)?;
            let center = match center {
                Some(c) => parse_padic(e.prime(), &c)?,
                None => PAdicScaled::zero(e.prime()),
            };
            let ks = parse_i64_list(&ks)?;
            let vals = dimensions::density_estimates(&e, &center, &ks)?;
            if tsv {
                tsv_rows(
                    "k\tdensity",
                    vals.iter().map(|(k, v)| format!("{k}\t{}", ratio_string(v))),
                );
            } else {
                let obj: BTreeMap<String, String> = vals
                    .iter()
                    .map(|(k, v)| (k.to_string(), ratio_string(v)))
                    .collect();
                emit(&json!({ "density": obj }));
            }
            Ok(0)
        }
    }
}

fn run_fuglede(cmd: FugledeCmd) -> Result<u8> {
    match cmd {
        FugledeCmd::Tile { group, set } => {
            let set = parse_residues(&set)?;
            match fuglede::is_tile(&set, group.p, group.gamma)? {
                Some(t) => Ok(verdict(true, json!({ "tile": true, "complement": t }))),
                None => Ok(verdict(false, json!({ "tile": false }))),
            }
        }
        FugledeCmd::Spectral { group, set, scale_guard } => {
            let set = parse_residues(&set)?;
            match fuglede::is_spectral_set(&set, group.p, group.gamma, scale_guard)
                .map_err(guard_hint("--scale-guard"))?
            {
                Some(d) => Ok(verdict(true, json!({ "spectral": true, "spectrum": d }))),
                None => Ok(verdict(false, json!({ "spectral": false }))),
            }
        }
        FugledeCmd::Scan { group, exhaustive, p_power_sizes, random, seed, tsv } => {
            let source = if let Some(count) = random {
                fuglede::SubsetSource::Random { count, seed }
            } else if p_power_sizes {
                fuglede::SubsetSource::PPowerSizes
            } else if exhaustive {
                fuglede::SubsetSource::Exhaustive
            } else {
                bail!("choose one of --exhaustive, --p-power-sizes, --random N");
            };
            let report = fuglede::equivalence_scan(group.p, group.gamma, source)
                .map_err(guard_hint("a smaller gamma"))?;
            if tsv {
                println!("total\ttiles\tspectral\thomogeneous\tall_agree");
                println!(
                    "{}\t{}\t{}\t{}\t{}",
                    report.total, report.tiles, report.spectral, report.homogeneous, report.all_agree
                );
            } else {
                emit(&serde_json::to_value(&report)?);
            }
            Ok(if report.all_agree { 0 } else { 1 })
        }
    }
}
