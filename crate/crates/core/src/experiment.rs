//! JSON experiment configs and the runner behind the command-line tool.
//!
//! A config names a driving path, an optional BV path, a level range and any of
//! the `qv`, `integrate`, `ito_check` and `assoc_check` sections. Each section
//! writes one CSV. Numbers are printed with `{:.16e}`, rows are produced in a
//! fixed order and every sum has a fixed evaluation order, so repeated runs and
//! different thread counts give byte-identical files.

use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    AComponent, Compose, Constant, Coordinate, Cylinder, DynFunctional, Product, TimeIntegral,
};
use crate::ito::{
    associativity_check, corollary_decomposition, ito_formula_report, ito_integral, AdmissibleIntegrand,
    ItoOptions, SumMode,
};
use crate::pathgen::{generate, GeneratorSpec};
use crate::paths::{format_number, read_csv};
use crate::paths::{BVPath, Domain, Interpolation, PartitionSequence, Path, SampledPath};
use crate::qv::qv_converged_levels;

/// A path read from CSV or generated from a spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSource {
    File(PathBuf),
    Generator(GeneratorSpec),
}

impl PathSource {
    /// Loads the path; relative files are resolved against `base`.
    pub fn load(&self, base: &FsPath) -> Result<SampledPath> {
        match self {
            PathSource::File(p) => read_csv(base.join(p), Interpolation::Linear),
            PathSource::Generator(spec) => generate(spec),
        }
    }
}

/// A functional built from JSON. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalSpec {
    Coordinate {
        #[serde(default)]
        index: usize,
    },
    Constant {
        value: f64,
    },
    TimeIntegral {
        #[serde(default)]
        index: usize,
    },
    AComponent {
        #[serde(default)]
        index: usize,
    },
    Square {
        #[serde(default)]
        index: usize,
    },
    Exp {
        #[serde(default)]
        index: usize,
    },
    Log {
        #[serde(default)]
        index: usize,
    },
    /// `f(t, x, a)` written with `t`, `x1..xd`, `a1..am`; missing derivatives use finite differences.
    Cylinder {
        f: String,
        #[serde(default)]
        dx: Option<Vec<String>>,
        /// Row-major `d x d`.
        #[serde(default)]
        dxx: Option<Vec<String>>,
        #[serde(default)]
        dt: Option<String>,
        #[serde(default)]
        da: Option<Vec<String>>,
        /// Restrict the current value to the positive orthant.
        #[serde(default)]
        positive: bool,
    },
    Product {
        left: Box<FunctionalSpec>,
        right: Box<FunctionalSpec>,
    },
    /// `G(t, F(·, X, A), B)`; the last `outer_bv_dim` BV components are `B`.
    Compose {
        outer: Box<FunctionalSpec>,
        inner: Vec<FunctionalSpec>,
        #[serde(default)]
        outer_bv_dim: usize,
    },
}

fn check_index(index: usize, dim: usize, what: &str) -> Result<()> {
    if index >= dim {
        return Err(Error::Config(format!("{what} index {index} out of range for dimension {dim}")));
    }
    Ok(())
}

impl FunctionalSpec {
    /// Builds the functional for driving dimension `d` and BV dimension `m`.
    pub fn build(&self, d: usize, m: usize) -> Result<DynFunctional> {
        Ok(match self {
            FunctionalSpec::Coordinate { index } => {
                check_index(*index, d, "coordinate")?;
                Arc::new(Coordinate::new(d, m, *index))
            }
            FunctionalSpec::Constant { value } => Arc::new(Constant::new(d, m, *value)),
            FunctionalSpec::TimeIntegral { index } => {
                check_index(*index, d, "time_integral")?;
                Arc::new(TimeIntegral::new(d, m, *index))
            }
            FunctionalSpec::AComponent { index } => {
                check_index(*index, m, "a_component")?;
                Arc::new(AComponent::new(d, m, *index))
            }
            FunctionalSpec::Square { index } => {
                check_index(*index, d, "square")?;
                Arc::new(Cylinder::square(d, m, *index))
            }
            FunctionalSpec::Exp { index } => {
                check_index(*index, d, "exp")?;
                Arc::new(Cylinder::exp(d, m, *index))
            }
            FunctionalSpec::Log { index } => {
                check_index(*index, d, "log")?;
                Arc::new(Cylinder::log(d, m, *index))
            }
            FunctionalSpec::Cylinder { f, dx, dxx, dt, da, positive } => {
                let c = Cylinder::from_exprs(d, m, f, dx.as_deref(), dxx.as_deref(), dt.as_deref(), da.as_deref())?;
                Arc::new(if *positive { c.with_domain(Domain::positive_orthant(d)) } else { c })
            }
            FunctionalSpec::Product { left, right } => {
                Arc::new(Product::new(left.build(d, m)?, right.build(d, m)?)?)
            }
            FunctionalSpec::Compose { outer, inner, outer_bv_dim } => {
                let m_inner = m
                    .checked_sub(*outer_bv_dim)
                    .ok_or_else(|| Error::Config(format!("outer_bv_dim {outer_bv_dim} exceeds BV dimension {m}")))?;
                let fs = inner.iter().map(|f| f.build(d, m_inner)).collect::<Result<Vec<_>>>()?;
                Arc::new(Compose::new(outer.build(fs.len(), *outer_bv_dim)?, fs)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRange {
    #[serde(default)]
    pub min: usize,
    pub max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QvSection {
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSection {
    /// `F`; the integrand is `∇_X F`.
    pub functional: FunctionalSpec,
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssocMode {
    /// `Y = ∫ ∇F dX`; compares `∫ η dY` with `∫ η ∇F dX` through the augmented system.
    #[default]
    Theorem,
    /// `Y = F(·, X, A)`; decomposes `∫ η dY` into integral, horizontal and covariation terms.
    Corollary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssocSection {
    /// `G` with `∇G = η`, a functional of the `ν`-dimensional `Y` and of `B`.
    pub outer: FunctionalSpec,
    /// `F_1..F_ν`.
    pub inner: Vec<FunctionalSpec>,
    /// BV argument `B` of the outer functional; empty when absent.
    #[serde(default)]
    pub b: Option<PathSource>,
    #[serde(default)]
    pub mode: AssocMode,
    pub output: PathBuf,
}

fn default_tolerance() -> f64 {
    ItoOptions::default().tolerance
}

fn default_qv_tolerance() -> f64 {
    ItoOptions::default().qv_tolerance
}

fn default_gate_tolerance() -> f64 {
    ItoOptions::default().gate_tolerance
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub path: PathSource,
    #[serde(default)]
    pub bv: Option<PathSource>,
    #[serde(default)]
    pub levels: Option<LevelRange>,
    /// Relative Cauchy tolerance for integrals.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Absolute tolerance on the last QV level difference.
    #[serde(default = "default_qv_tolerance")]
    pub qv_tolerance: f64,
    #[serde(default = "default_gate_tolerance")]
    pub gate_tolerance: f64,
    /// Worker threads for integrand evaluation; `None` uses rayon's default.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub mode: SumMode,
    #[serde(default)]
    pub qv: Option<QvSection>,
    #[serde(default)]
    pub integrate: Option<FunctionalSection>,
    #[serde(default)]
    pub ito_check: Option<FunctionalSection>,
    #[serde(default)]
    pub assoc_check: Option<AssocSection>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        if cfg.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<FsPath>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    fn options(&self, seq: &PartitionSequence) -> ItoOptions {
        let (min, max) = match self.levels {
            Some(r) => (r.min, r.max.unwrap_or(seq.max_level())),
            None => (0, seq.max_level()),
        };
        ItoOptions {
            min_level: min,
            max_level: Some(max),
            tolerance: self.tolerance,
            qv_tolerance: self.qv_tolerance,
            gate_tolerance: self.gate_tolerance,
            mode: self.mode,
            parallel: true,
        }
    }
}

/// Which sections of a config to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Qv,
    Integrate,
    ItoCheck,
    AssocCheck,
}

impl Section {
    pub const ALL: [Section; 4] = [Section::Qv, Section::Integrate, Section::ItoCheck, Section::AssocCheck];
}

/// Files written and checks that did not pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    /// Convergence checks that failed; the corresponding CSVs are still written.
    pub failures: Vec<String>,
}

/// Where relative paths of a run are resolved.
#[derive(Debug, Clone)]
pub struct RunDirs {
    /// Base for input files named in the config.
    pub input: PathBuf,
    /// Base for output files named in the config.
    pub output: PathBuf,
}

fn create(path: &FsPath) -> Result<std::io::BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}

fn write_rows(
    writer: impl std::io::Write,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_table(path: &FsPath, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    write_rows(create(path)?, header, rows)
}

/// Writes `t,qv_11,...,qv_dd,level_diff` for the finest requested level and
/// returns whether the last level difference is within `tol`.
pub fn write_qv_to(x: &SampledPath, min: usize, max: usize, tol: f64, writer: impl std::io::Write) -> Result<bool> {
    let conv = qv_converged_levels(x, min, max, tol)?;
    let d = x.dim();
    let mut header: Vec<String> = vec!["t".into()];
    for i in 1..=d {
        for j in 1..=d {
            header.push(format!("qv_{i}{j}"));
        }
    }
    header.push("level_diff".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = x.times().iter().enumerate().map(|(idx, &t)| {
        let mut row = vec![format_number(t)];
        for i in 0..d {
            for j in 0..d {
                row.push(format_number(conv.matrix.get(idx, i, j)));
            }
        }
        row.push(format_number(conv.last_diff_path[idx]));
        row
    });
    write_rows(writer, &header_refs, rows)?;
    Ok(conv.converged)
}

/// [`write_qv_to`] into a file, creating parent directories.
pub fn write_qv_csv(x: &SampledPath, min: usize, max: usize, tol: f64, out: &FsPath) -> Result<bool> {
    write_qv_to(x, min, max, tol, create(out)?)
}

struct Loaded {
    x: SampledPath,
    a: BVPath,
    opts: ItoOptions,
}

fn load(cfg: &ExperimentConfig, dirs: &RunDirs) -> Result<Loaded> {
    let x = cfg.path.load(&dirs.input)?;
    let a = match &cfg.bv {
        Some(src) => BVPath::from_path(&src.load(&dirs.input)?)?,
        None => BVPath::empty(x.shared_times().clone())?,
    };
    if a.times() != x.times() {
        return Err(Error::GridMismatch);
    }
    let seq = PartitionSequence::dyadic(x.shared_times().clone());
    let opts = cfg.options(&seq);
    Ok(Loaded { x, a, opts })
}

fn run_sections(cfg: &ExperimentConfig, dirs: &RunDirs, sections: &[Section]) -> Result<RunSummary> {
    let Loaded { x, a, opts } = load(cfg, dirs)?;
    let (d, m) = (x.dim(), a.dim());
    let max = opts.max_level.expect("resolved by options");
    let mut summary = RunSummary::default();

    for section in sections {
        match section {
            Section::Qv => {
                let Some(s) = &cfg.qv else { continue };
                let out = dirs.output.join(&s.output);
                if !write_qv_csv(&x, opts.min_level, max, cfg.qv_tolerance, &out)? {
                    summary.failures.push("quadratic variation did not converge".into());
                }
                summary.outputs.push(out);
            }
            Section::Integrate => {
                let Some(s) = &cfg.integrate else { continue };
                let xi = AdmissibleIntegrand::new(s.functional.build(d, m)?, a.clone())?;
                let r = ito_integral(&xi, &x, &opts)?;
                let out = dirs.output.join(&s.output);
                let times = x.times();
                let rows = r.levels.iter().flat_map(|l| {
                    l.partition.iter().map(move |&i| {
                        vec![l.level.to_string(), format_number(times[i]), format_number(l.values[i])]
                    })
                });
                write_table(&out, &["level", "t", "I"], rows)?;
                if !r.converged {
                    summary.failures.push(format!(
                        "integral did not converge: last Cauchy difference {:.3e}",
                        r.cauchy.last().copied().unwrap_or(f64::NAN)
                    ));
                }
                summary.outputs.push(out);
            }
            Section::ItoCheck => {
                let Some(s) = &cfg.ito_check else { continue };
                let f = s.functional.build(d, m)?;
                let r = ito_formula_report(&f, &x, &a, &opts)?;
                let out = dirs.output.join(&s.output);
                let rows = r.levels.iter().map(|l| {
                    vec![
                        l.level.to_string(),
                        format_number(l.lhs),
                        format_number(l.ito),
                        format_number(l.horizontal),
                        format_number(l.qv),
                        format_number(l.residual),
                    ]
                });
                write_table(&out, &["level", "term_lhs", "term_ito", "term_horiz", "term_qv", "residual"], rows)?;
                if r.qv.as_ref().is_some_and(|q| !q.converged) {
                    summary.failures.push("quadratic variation did not converge".into());
                }
                summary.outputs.push(out);
            }
            Section::AssocCheck => {
                let Some(s) = &cfg.assoc_check else { continue };
                let b = match &s.b {
                    Some(src) => BVPath::from_path(&src.load(&dirs.input)?)?,
                    None => BVPath::empty(x.shared_times().clone())?,
                };
                let fs = s.inner.iter().map(|f| f.build(d, m)).collect::<Result<Vec<_>>>()?;
                let g = s.outer.build(fs.len(), b.dim())?;
                let rows: Vec<Vec<String>> = match s.mode {
                    AssocMode::Theorem => associativity_check(&g, &b, &fs, &x, &a, &opts)?
                        .levels
                        .iter()
                        .map(|l| {
                            vec![
                                l.level.to_string(),
                                format_number(l.lhs),
                                format_number(l.rhs),
                                format_number(l.abs_residual),
                                format_number(l.ratio),
                            ]
                        })
                        .collect(),
                    AssocMode::Corollary => corollary_decomposition(&g, &b, &fs, &x, &a, &opts)?
                        .levels
                        .iter()
                        .map(|l| {
                            let rhs = l.ito + l.horizontal + l.qv;
                            vec![
                                l.level.to_string(),
                                format_number(l.lhs),
                                format_number(rhs),
                                format_number(l.residual.abs()),
                                format_number(l.ratio),
                            ]
                        })
                        .collect(),
                };
                let out = dirs.output.join(&s.output);
                write_table(&out, &["level", "lhs", "rhs", "abs_residual", "ratio"], rows)?;
                summary.outputs.push(out);
            }
        }
    }
    Ok(summary)
}

/// Runs the requested sections, inside a dedicated thread pool when `threads` is set.
pub fn run(cfg: &ExperimentConfig, dirs: &RunDirs, sections: &[Section]) -> Result<RunSummary> {
    match cfg.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(|| run_sections(cfg, dirs, sections))
        }
        None => run_sections(cfg, dirs, sections),
    }
}

/// Writes a path as CSV with header `t,x1,...,xd`, creating parent directories.
pub fn write_path(path: &SampledPath, out: &FsPath) -> Result<()> {
    crate::paths::write_csv_to(path, "x", create(out)?)
}
