use std::f64::consts::E;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use dyuch::batch::{self, BatchSpec};
use dyuch::bellman::{self, CertifySpec, MinorOrder, ScanRegion, ScanSpec};
use dyuch::carleson::{check_embedding_e, uchiyama_weighted_check, MeasureFile};
use dyuch::extremal::{self, PhiSample, SearchSpec};
use dyuch::kernel;
use dyuch::martingale::{cr_residual_exact, AnalyticFile};
use dyuch::{Base, DyadicAnalytic, DyadicInterval, SlicedMartingale, Tolerance, TreeFile};

use crate::{max_depth_from_env, read_json, write_csv, write_json, CliError, CliResult, Outcome, Report, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "dyuch", version, about = "Numerical checks for the dyadic Uchiyama embedding")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults depend on the command.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Principal minors of the sliced Bellman Hessian over random and boundary parameters.
    VerifyBellman(VerifyBellman),
    /// Scan for negative third minors of the unsliced Hessian.
    ScanUnsliced(ScanUnsliced),
    /// Embedding bound with constant e.
    Embed(Pair),
    /// Weighted embedding with the nonpositive submartingale.
    UchiyamaCheck(Pair),
    /// Conjugate a sliced martingale, or check conjugation identities on a batch.
    Conjugate(Conjugate),
    /// Truncated reproducing kernel of an interval.
    Kernel(KernelCmd),
    /// Embedding with constant 3e under the testing condition.
    #[command(name = "check-3e")]
    Check3e(Pair),
    /// Search feasible configurations for a large embedding ratio.
    SearchExtremal(SearchExtremal),
    /// Lower-bound certificate for the embedding constant.
    CertifyLowerBound(CertifyLowerBound),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Order {
    TopLeft,
    BottomRight,
}

#[derive(Debug, Args)]
struct VerifyBellman {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Boundary grid resolution; the grid has 2 (n + 1)² points.
    #[arg(long, default_value_t = 200)]
    grid: usize,
    #[arg(long, value_enum, default_value = "top-left")]
    minor_order: Order,
    /// Violations CSV: m,d1,d2,minor1,minor2,minor3,minor4,det_closed,det_rel_err.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Region {
    /// d ∈ (0, d_max], d1 = 0, d2 = ½ - d.
    Slice,
    /// The sliced plane d = 0.
    Sliced,
    /// Every admissible grid point.
    Sweep,
}

#[derive(Debug, Args)]
struct ScanUnsliced {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    #[arg(long, value_enum, default_value = "slice")]
    region: Region,
    #[arg(long, default_value_t = 0.1)]
    d_max: f64,
    /// Witness CSV: d,d1,d2,G.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Either both inputs, or neither for a seeded random batch.
#[derive(Debug, Args)]
struct Pair {
    #[command(flatten)]
    common: Common,
    /// Measure JSON.
    #[arg(long)]
    measure: Option<PathBuf>,
    /// Analytic function JSON `{"u": tree, "v": tree}`.
    #[arg(long)]
    f: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    /// Largest depth of the random batch.
    #[arg(long, default_value_t = 4)]
    depth: u32,
}

#[derive(Debug, Args)]
struct Conjugate {
    #[command(flatten)]
    common: Common,
    /// Tree JSON of a sliced martingale.
    #[arg(long)]
    u: Option<PathBuf>,
    /// Output `{"u", "v"}` JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 6)]
    depth: u32,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaseArg {
    Unit,
    RealLine,
}

#[derive(Debug, Args)]
struct KernelCmd {
    #[command(flatten)]
    common: Common,
    /// Interval id `L<level>N<index>`; the level must be even.
    #[arg(long)]
    interval: String,
    /// Number of odd ancestors kept (real line only).
    #[arg(long, default_value_t = 4)]
    height: u32,
    #[arg(long, value_enum, default_value = "real-line")]
    base: BaseArg,
    /// Coefficient JSON.
    #[arg(long)]
    emit: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SearchExtremal {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 4)]
    depth: u32,
    /// Coordinate moves per restart and depth stage.
    #[arg(long, default_value_t = 200)]
    budget: usize,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Best configuration JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CertifyLowerBound {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4,1e-5,1e-6,1e-7,1e-8")]
    eps_list: Vec<f64>,
    /// Grid size for the profile check of e^{1-M}.
    #[arg(long, default_value_t = 1000)]
    phi_grid: usize,
    /// CSV: eps,bound.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cli {
    fn common(&self) -> &Common {
        match &self.command {
            Command::VerifyBellman(c) => &c.common,
            Command::ScanUnsliced(c) => &c.common,
            Command::Embed(c) | Command::UchiyamaCheck(c) | Command::Check3e(c) => &c.common,
            Command::Conjugate(c) => &c.common,
            Command::Kernel(c) => &c.common,
            Command::SearchExtremal(c) => &c.common,
            Command::CertifyLowerBound(c) => &c.common,
        }
    }

    pub fn report_path(&self) -> Option<PathBuf> {
        self.common().report.clone()
    }

    /// Resolved settings with per-command defaults.
    pub fn config(&self) -> RunConfig {
        let c = self.common();
        let (name, tol) = match &self.command {
            Command::VerifyBellman(_) => ("verify-bellman", -bellman::MINOR_TOL),
            Command::ScanUnsliced(_) => ("scan-unsliced", 1e-8),
            Command::Embed(_) => ("embed", 1e-12),
            Command::UchiyamaCheck(_) => ("uchiyama-check", 1e-12),
            Command::Conjugate(_) => ("conjugate", 1e-12),
            Command::Kernel(_) => ("kernel", 1e-12),
            Command::Check3e(_) => ("check-3e", 1e-12),
            Command::SearchExtremal(_) => ("search-extremal", 1e-12),
            Command::CertifyLowerBound(_) => ("certify-lower-bound", 1e-12),
        };
        let mut cfg = RunConfig::new(name, c.seed, c.tolerance.unwrap_or(tol));
        match &self.command {
            Command::VerifyBellman(v) => {
                cfg.samples = v.samples;
                cfg.out = v.out.clone();
            }
            Command::ScanUnsliced(s) => {
                cfg.step = s.step;
                cfg.out = s.out.clone();
            }
            Command::Embed(p) | Command::UchiyamaCheck(p) | Command::Check3e(p) => {
                let default = if matches!(self.command, Command::Check3e(_)) { 1000 } else { 10_000 };
                cfg.samples = p.samples.unwrap_or(default);
                cfg.depth = p.depth;
            }
            Command::Conjugate(c) => {
                cfg.samples = c.samples;
                cfg.depth = c.depth;
                cfg.out = c.out.clone();
            }
            Command::Kernel(k) => cfg.out = k.emit.clone(),
            Command::SearchExtremal(s) => {
                cfg.depth = s.depth;
                cfg.samples = s.restarts;
                cfg.out = s.out.clone();
            }
            Command::CertifyLowerBound(c) => {
                cfg.samples = c.eps_list.len();
                cfg.out = c.out.clone();
            }
        }
        cfg
    }

    pub fn execute(&self) -> CliResult<Outcome> {
        let cfg = self.config();
        let cap = max_depth_from_env()?;
        cfg.validate(cap)?;
        let mut o = match &self.command {
            Command::VerifyBellman(v) => verify_bellman(&cfg, v),
            Command::ScanUnsliced(s) => scan_unsliced(&cfg, s),
            Command::Embed(p) => pair(&cfg, p, Check::Embed),
            Command::UchiyamaCheck(p) => pair(&cfg, p, Check::Uchiyama),
            Command::Check3e(p) => pair(&cfg, p, Check::ThreeE),
            Command::Conjugate(c) => conjugate(&cfg, c),
            Command::Kernel(k) => kernel_cmd(&cfg, k),
            Command::SearchExtremal(s) => search_extremal(&cfg, s, cap),
            Command::CertifyLowerBound(c) => certify_lower_bound(&cfg, c),
        }?;
        o.report_path = self.report_path();
        Ok(o)
    }
}

fn verdict(r: &Report) -> &'static str {
    if r.pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn outcome(report: Report, details: String) -> Outcome {
    let lines = vec![format!("{}: {} {details}", report.command, verdict(&report))];
    Outcome { report, lines, report_path: None }
}

#[derive(Serialize)]
struct MinorRow {
    m: f64,
    d1: f64,
    d2: f64,
    minor1: f64,
    minor2: f64,
    minor3: f64,
    minor4: f64,
    det_closed: f64,
    det_rel_err: f64,
}

fn verify_bellman(cfg: &RunConfig, v: &VerifyBellman) -> CliResult<Outcome> {
    let order = match v.minor_order {
        Order::TopLeft => MinorOrder::TopLeft,
        Order::BottomRight => MinorOrder::BottomRight,
    };
    let spec = CertifySpec {
        samples: cfg.samples,
        seed: cfg.seed,
        grid_n: v.grid,
        order,
        minor_tol: cfg.tolerance,
    };
    let s = bellman::certify_sliced(&spec);
    if let Some(p) = &cfg.out {
        let rows: Vec<MinorRow> = s
            .violations
            .iter()
            .map(|c| MinorRow {
                m: c.params.m,
                d1: c.params.d1,
                d2: c.params.d2,
                minor1: c.minors[0],
                minor2: c.minors[1],
                minor3: c.minors[2],
                minor4: c.minors[3],
                det_closed: c.det_closed,
                det_rel_err: c.det_rel_err,
            })
            .collect();
        let header = ["m", "d1", "d2", "minor1", "minor2", "minor3", "minor4", "det_closed", "det_rel_err"];
        write_csv(p, &rows, &header)?;
    }
    let summary = json!({
        "samples": s.samples,
        "grid_points": s.grid_points,
        "minor_order": order,
        "min_minors": s.min_minors,
        "max_det_rel_err": s.max_det_rel_err,
        "max_third_rel_err": s.max_third_rel_err,
        "det_rel_tol": bellman::DET_REL_TOL,
    });
    let report = Report::new(cfg, &s.violations, summary)?;
    let m = s.min_minors;
    Ok(outcome(
        report,
        format!(
            "{} samples + {} grid points; min minors [{:.3e}, {:.3e}, {:.3e}, {:.3e}]; max det rel err {:.3e}",
            s.samples, s.grid_points, m[0], m[1], m[2], m[3], s.max_det_rel_err
        ),
    ))
}

fn scan_unsliced(cfg: &RunConfig, s: &ScanUnsliced) -> CliResult<Outcome> {
    let region = match s.region {
        Region::Slice => ScanRegion::Slice { d_max: s.d_max },
        Region::Sliced => ScanRegion::Sliced,
        Region::Sweep => ScanRegion::Sweep,
    };
    let spec = ScanSpec { region, step: cfg.step, threshold: cfg.tolerance };
    let w = bellman::scan_unsliced(&spec)?;
    if let Some(p) = &cfg.out {
        write_csv(p, &w, &["d", "d1", "d2", "G"])?;
    }
    // witnesses on the sliced plane would contradict the sliced certificate
    let bad: Vec<_> = w.iter().filter(|x| x.d == 0.0).collect();
    let summary = json!({
        "region": region,
        "step": cfg.step,
        "threshold": cfg.tolerance,
        "witnesses": w.len(),
        "min": w.first(),
    });
    let report = Report::new(cfg, &bad, summary)?;
    let details = match w.first() {
        Some(x) => format!("{} witnesses; min G {:.6e} at d={} d1={} d2={}", w.len(), x.g, x.d, x.d1, x.d2),
        None => "no witnesses".to_string(),
    };
    Ok(outcome(report, details))
}

#[derive(Clone, Copy)]
enum Check {
    Embed,
    Uchiyama,
    ThreeE,
}

fn load_pair(measure: &std::path::Path, f: &std::path::Path, tol: f64) -> CliResult<(dyuch::DiscreteMeasure, DyadicAnalytic)> {
    let mu = read_json::<MeasureFile>(measure)?.into_measure()?;
    let f = read_json::<AnalyticFile>(f)?.into_analytic(Tolerance::Absolute(tol))?;
    Ok((mu, f))
}

fn pair(cfg: &RunConfig, p: &Pair, check: Check) -> CliResult<Outcome> {
    let tol = cfg.tolerance;
    match (&p.measure, &p.f) {
        (Some(m), Some(f)) => {
            let (mu, f) = load_pair(m, f, tol)?;
            let (report, details) = match check {
                Check::Embed => {
                    let c = check_embedding_e(&mu, &f)?;
                    let bad: Vec<_> = (!c.holds(tol)).then_some(c).into_iter().collect();
                    let d = format!("embedding {:.6e} vs e·C(μ)·‖f‖² {:.6e}", c.embedding, E * c.packing * c.norm2);
                    (Report::new(cfg, &bad, c)?, d)
                }
                Check::Uchiyama => {
                    let u = uchiyama_weighted_check(&mu, &f)?;
                    let t = bellman::telescoped_uchiyama(&mu, &f)?;
                    let scale = u.norm2.max(1.0);
                    let bad: Vec<_> = (u.slack < -tol * scale).then_some(u).into_iter().collect();
                    let summary = json!({ "check": u, "telescoped": t, "telescoped_slack": t.slack() });
                    let d = format!("weighted {:.6e} vs ‖f‖² {:.6e}", u.weighted, u.norm2);
                    (Report::new(cfg, &bad, summary)?, d)
                }
                Check::ThreeE => {
                    let c = kernel::check_3e(&mu, &f)?;
                    let bad: Vec<_> = (c.slack < -tol * c.norm2.max(1.0)).then_some(c).into_iter().collect();
                    let d = format!("testing {:.6e}; embedding {:.6e} vs 3e·I(μ)·‖f‖² {:.6e}", c.testing, c.embedding, 3.0 * E * c.testing * c.norm2);
                    (Report::new(cfg, &bad, c)?, d)
                }
            };
            Ok(outcome(report, details))
        }
        (None, None) => {
            let spec = BatchSpec::new(cfg.samples, cfg.seed, cfg.depth)?;
            let (report, details) = match check {
                Check::Embed => {
                    let b = batch::embedding_batch(&spec, tol)?;
                    let d = format!("{} configurations; max ratio {:.6}; max packing {:.6}", b.checked, b.max_ratio, b.max_packing);
                    (Report::new(cfg, &b.violations, summary_without_violations(&b)?)?, d)
                }
                Check::Uchiyama => {
                    let b = batch::uchiyama_batch(&spec, tol, TELESCOPING_TOL)?;
                    let d = format!(
                        "{} configurations; min slack {:.6e}; max telescoping err {:.3e}",
                        b.checked, b.min_slack, b.max_telescoping_err
                    );
                    (Report::new(cfg, &b.violations, summary_without_violations(&b)?)?, d)
                }
                Check::ThreeE => {
                    let b = batch::testing_batch(&spec, tol)?;
                    let d = format!("{} measures ({} zero); max packing {:.6}; min slack {:.6e}", b.checked, b.skipped, b.max_packing, b.min_slack);
                    (Report::new(cfg, &b.violations, summary_without_violations(&b)?)?, d)
                }
            };
            Ok(outcome(report, details))
        }
        (Some(_), None) => Err(CliError::Usage("--measure needs --f".into())),
        (None, Some(_)) => Err(CliError::Usage("--f needs --measure".into())),
    }
}

/// Telescoped and direct Uchiyama slacks agree to this, relative to `max(‖f‖², 1)`.
const TELESCOPING_TOL: f64 = 1e-10;

fn summary_without_violations(v: &impl Serialize) -> CliResult<serde_json::Value> {
    let mut s = serde_json::to_value(v).map_err(|e| CliError::Core(e.into()))?;
    if let serde_json::Value::Object(m) = &mut s {
        m.remove("violations");
    }
    Ok(s)
}

fn conjugate(cfg: &RunConfig, c: &Conjugate) -> CliResult<Outcome> {
    let tol = cfg.tolerance;
    match &c.u {
        Some(path) => {
            let tree = read_json::<TreeFile>(path)?.into_tree()?;
            let u = SlicedMartingale::from_tree(tree, Tolerance::Absolute(tol))?;
            let f = DyadicAnalytic::conjugate(&u);
            let exact = cr_residual_exact(f.u(), f.v())?;
            let residual = exact.to_f64();
            if let Some(o) = &cfg.out {
                write_json(o, &f.to_file())?;
            }
            let bad: Vec<_> = (residual > tol).then_some(residual).into_iter().collect();
            let summary = json!({
                "depth": f.depth(),
                "root": f.root(),
                "cr_residual": residual,
                "cr_exact": exact.is_zero(),
                "norm2_u_centered": u.centered().l2_norm2(),
                "norm2_v": f.v().l2_norm2(),
            });
            let d = format!("depth {}; CR residual {:e}", f.depth(), residual);
            Ok(outcome(Report::new(cfg, &bad, summary)?, d))
        }
        None => {
            if cfg.out.is_some() {
                return Err(CliError::Usage("--out needs --u".into()));
            }
            let spec = BatchSpec::new(cfg.samples, cfg.seed, cfg.depth)?;
            let b = batch::conjugation_batch(&spec, tol)?;
            let d = format!(
                "{} martingales; inexact CR {}; max errors isometry {:.3e}, S0² {:.3e}, projection {:.3e}",
                b.checked, b.inexact, b.max_isometry_err, b.max_square_err, b.max_projection_err
            );
            Ok(outcome(Report::new(cfg, &b.violations, summary_without_violations(&b)?)?, d))
        }
    }
}

fn kernel_cmd(cfg: &RunConfig, k: &KernelCmd) -> CliResult<Outcome> {
    let base = match k.base {
        BaseArg::Unit => Base::Unit,
        BaseArg::RealLine => Base::RealLine,
    };
    let i = DyadicInterval::parse_id(&k.interval, base)?;
    let rep = match base {
        Base::Unit => kernel::unit_kernel(i)?,
        Base::RealLine => kernel::kernel(i, k.height)?,
    };
    let norm = rep.norm2();
    // the kernel evaluated at its own interval is its squared norm
    let at_i = rep.evaluate(&i)?.partial;
    let self_err = (at_i.re - norm.partial).abs().max(at_i.im.abs());
    let closed = match base {
        Base::RealLine => Some(kernel::norm2_closed_form(&i, k.height)),
        Base::Unit => None,
    };
    let closed_err = closed.map_or(0.0, |c| (norm.partial - c).abs());
    let scale = norm.limit.max(1.0);
    let mut bad = Vec::new();
    if self_err > cfg.tolerance * scale {
        bad.push(json!({ "quantity": "self evaluation", "value": self_err }));
    }
    if closed_err > cfg.tolerance * scale {
        bad.push(json!({ "quantity": "closed form", "value": closed_err }));
    }
    if let Some(p) = &cfg.out {
        write_json(p, &rep.to_file())?;
    }
    let summary = json!({
        "interval": i,
        "base": base,
        "height": rep.height,
        "window": rep.window(),
        "norm2_partial": norm.partial,
        "norm2_limit": norm.limit,
        "closed_form": closed,
        "terms": rep.real_coeffs.len() + rep.imag_coeffs.len(),
    });
    let d = format!("{} height {}: ‖k‖² {:.15} (limit {:.15})", i, rep.height, norm.partial, norm.limit);
    Ok(outcome(Report::new(cfg, &bad, summary)?, d))
}

fn search_extremal(cfg: &RunConfig, s: &SearchExtremal, cap: u32) -> CliResult<Outcome> {
    let spec = SearchSpec {
        depth: cfg.depth,
        budget: s.budget,
        restarts: s.restarts,
        seed: cfg.seed,
        max_depth: cap,
    };
    let r = extremal::search(&spec)?;
    if let Some(p) = &cfg.out {
        write_json(p, &r.best.to_file())?;
    }
    let best = &r.best;
    let bad: Vec<_> = (best.ratio > E * (1.0 + cfg.tolerance)).then_some(best.ratio).into_iter().collect();
    let summary = json!({
        "spec": spec,
        "ratio": best.ratio,
        "gap_to_e": E - best.ratio,
        "embedding": best.embedding,
        "norm2": best.norm2,
        "packing": best.mu.packing_intensity(),
        "stages": r.stages,
    });
    let d = format!("depth {}: best ratio {:.9} (e - ratio = {:.3e})", cfg.depth, best.ratio, E - best.ratio);
    Ok(outcome(Report::new(cfg, &bad, summary)?, d))
}

#[derive(Serialize)]
struct BoundRow {
    eps: f64,
    bound: f64,
}

fn certify_lower_bound(cfg: &RunConfig, c: &CertifyLowerBound) -> CliResult<Outcome> {
    let rows = c
        .eps_list
        .iter()
        .map(|&eps| Ok(BoundRow { eps, bound: extremal::lower_bound_certificate(eps)? }))
        .collect::<CliResult<Vec<_>>>()?;
    if let Some(p) = &cfg.out {
        write_csv(p, &rows, &["eps", "bound"])?;
    }
    let mut bad = Vec::new();
    let mut sorted: Vec<&BoundRow> = rows.iter().collect();
    sorted.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    for w in sorted.windows(2) {
        if w[1].eps < w[0].eps && !(w[1].bound > w[0].bound) {
            bad.push(json!({ "quantity": "monotonicity", "eps": w[1].eps, "bound": w[1].bound }));
        }
    }
    for r in &rows {
        if !(r.bound < E) {
            bad.push(json!({ "quantity": "bound below e", "eps": r.eps, "bound": r.bound }));
        }
    }
    let phi = PhiSample::from_fn(|m| (1.0 - m).exp(), E, 0.0, 1.0, c.phi_grid);
    let residuals = extremal::phi_admissible(&phi)?;
    if !residuals.admissible(cfg.tolerance) {
        bad.push(json!({ "quantity": "profile residual", "residuals": residuals }));
    }
    let best = sorted.last().map(|r| r.bound);
    let summary = json!({
        "bounds": rows,
        "best": best,
        "gap_to_e": best.map(|b| E - b),
        "phi_grid": c.phi_grid,
        "phi_residuals": residuals,
    });
    let d = match best {
        Some(b) => format!("{} values; best {:.12} (e - bound = {:.4e}); profile residual {:.1e}", rows.len(), b, E - b, residuals.max()),
        None => "no eps values".into(),
    };
    Ok(outcome(Report::new(cfg, &bad, summary)?, d))
}
