//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Reference values are recomputed here from their closed
//! forms rather than taken from the library.

use std::f64::consts::E;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dyuch::batch::{self, BatchSpec};
use dyuch::bellman::{self, CertifySpec, ScanRegion, ScanSpec};
use dyuch::carleson::uchiyama_weighted_check;
use dyuch::ddouble::{DoubleDouble, Real};
use dyuch::extremal::{self, PhiSample};
use dyuch::kernel;
use dyuch::{sampling, DyadicInterval};

struct Verdict {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { ok, detail: detail.into() }
}

/// Collects sub-checks; failed ones lead the detail line.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn need(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if !ok {
            self.failed.push(what.clone());
        }
        self.notes.push(what);
    }

    fn within(&mut self, elapsed: Duration, limit: Duration) {
        self.need(elapsed < limit, format!("{:.2}s < {}s", elapsed.as_secs_f64(), limit.as_secs()));
    }

    fn verdict(self) -> Verdict {
        if self.failed.is_empty() {
            check(true, self.notes.join("; "))
        } else {
            let passed: Vec<_> = self.notes.iter().filter(|n| !self.failed.contains(n)).cloned().collect();
            check(false, format!("failed: {}; passed: {}", self.failed.join("; "), passed.join("; ")))
        }
    }
}

fn kernel_norm_identity() -> Verdict {
    let t0 = Instant::now();
    let mut c = Checks::default();
    let i = DyadicInterval::real(0, 0).unwrap();
    let mut worst: f64 = 0.0;
    let mut last = 0.0;
    for t in 1..=30u32 {
        let n = kernel::kernel_norm2(i, t).unwrap();
        let reference = (1.0 - 0.25f64.powi(t as i32)) / 3.0;
        worst = worst.max((n.partial - reference).abs());
        last = n.partial;
    }
    c.need(worst <= 1e-14, format!("max |norm² - (1 - 4^-T)/3| = {worst:.1e} over T = 1..30"));
    let gap = (last - 1.0 / 3.0).abs();
    c.need(gap < 1e-12, format!("|norm² - 1/3| = {gap:.1e} at T = 30"));
    c.within(t0.elapsed(), Duration::from_secs(1));
    c.verdict()
}

fn det_reference(m: f64, d1: f64, d2: f64) -> f64 {
    let c = (-m).exp() / 4.0;
    let s = |d: f64| (2.0 * (d / 2.0).sinh()).powi(4);
    4.0 * c.powi(4) * s(d1) * s(d2)
}

fn bellman_psd() -> Verdict {
    let t0 = Instant::now();
    let mut c = Checks::default();
    let s = bellman::certify_sliced(&CertifySpec::new(100_000, 1));
    c.need(
        s.min_minors.iter().all(|&m| m >= -1e-9) && s.violations.is_empty(),
        format!("{} samples + {} grid points, min minors {:.1e}", s.samples, s.grid_points, s.min_minors.iter().fold(f64::INFINITY, |a, &b| a.min(b))),
    );
    c.need(s.max_det_rel_err <= 1e-9, format!("max det rel err {:.1e}", s.max_det_rel_err));
    // independent spot check of the determinant against the sinh product
    let mut rng = sampling::rng(99);
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let hp = bellman::random_sliced_params(&mut rng);
        let a = bellman::sliced_matrix::<DoubleDouble>(&hp).unwrap();
        let det = bellman::det_leading(&a, 4).to_f64();
        let r = det_reference(hp.m, hp.d1, hp.d2);
        if r > 1e-30 {
            worst = worst.max((det - r).abs() / r);
        }
    }
    c.need(worst <= 1e-9, format!("sinh-product oracle rel err {worst:.1e}"));
    c.within(t0.elapsed(), Duration::from_secs(10));
    c.verdict()
}

fn unsliced_counterexample() -> Verdict {
    let t0 = Instant::now();
    let mut c = Checks::default();
    let spec = ScanSpec { region: ScanRegion::Slice { d_max: 0.1 }, step: 1e-3, threshold: 1e-8 };
    let w = bellman::scan_unsliced(&spec).unwrap();
    let genuine = w.iter().filter(|x| x.g < -1e-8 && x.d > 0.0 && x.d1 == 0.0 && (x.d2 - (0.5 - x.d)).abs() < 1e-12).count();
    c.need(genuine > 0, format!("{genuine} witnesses with G < -1e-8, min {:.4e}", w.first().map_or(0.0, |x| x.g)));
    let at_zero = bellman::unsliced_third_minor(0.0, 0.0, 0.5).unwrap();
    c.need(at_zero >= -1e-8, format!("G(d = 0) = {at_zero:.1e}"));
    let plane = bellman::scan_unsliced(&ScanSpec { region: ScanRegion::Sliced, step: 0.01, threshold: 1e-8 }).unwrap();
    c.need(plane.is_empty(), format!("{} witnesses on the sliced plane", plane.len()));
    c.within(t0.elapsed(), Duration::from_secs(1));
    c.verdict()
}

fn configurations() -> BatchSpec {
    BatchSpec::new(10_000, 2024, 4).unwrap()
}

fn embedding_upper_bound() -> Verdict {
    let t0 = Instant::now();
    let mut c = Checks::default();
    let spec = configurations();
    let b = batch::embedding_batch(&spec, 1e-12).unwrap();
    c.need(b.violations.is_empty(), format!("{} configurations, {} violations, max ratio {:.4}", b.checked, b.violations.len(), b.max_ratio));
    c.need(b.max_packing <= 1.0 + 1e-15, format!("max intensity {}", b.max_packing));
    let bad_cr = (0..spec.samples)
        .step_by(97)
        .filter(|&k| {
            let (mu, f) = batch::configuration(&spec, k);
            !(f.cr_residual() <= 1e-12 && mu.is_balanced(0.0))
        })
        .count();
    c.need(bad_cr == 0, "sampled configurations are balanced and CR-valid");
    c.within(t0.elapsed(), Duration::from_secs(30));
    c.verdict()
}

fn dyadic_uchiyama() -> Verdict {
    let t0 = Instant::now();
    let mut c = Checks::default();
    let spec = configurations();
    let (mut over, mut worst_tel, mut min_slack) = (0, 0.0f64, f64::INFINITY);
    for k in 0..spec.samples {
        let (mu, f) = batch::configuration(&spec, k);
        let u = uchiyama_weighted_check(&mu, &f).unwrap();
        if u.weighted > u.norm2 + 1e-12 {
            over += 1;
        }
        min_slack = min_slack.min(u.slack);
        let t = bellman::telescoped_uchiyama(&mu, &f).unwrap();
        worst_tel = worst_tel.max((t.slack() - u.slack).abs());
    }
    c.need(over == 0, format!("{} configurations, {over} above ‖f‖² + 1e-12, min slack {min_slack:.2e}", spec.samples));
    c.need(worst_tel <= 1e-10, format!("telescoping err {worst_tel:.1e}"));
    c.within(t0.elapsed(), Duration::from_secs(30));
    c.verdict()
}

fn sharpness_certificate() -> Verdict {
    let mut c = Checks::default();
    let reference = |eps: f64| (1.0 + 2.0 * eps * ((eps / 2.0).ln() - 1.0)).exp();
    let eps: Vec<f64> = (2..=8).map(|k| 10f64.powi(-k)).collect();
    let vals: Vec<f64> = eps.iter().map(|&x| extremal::lower_bound_certificate(x).unwrap()).collect();
    let worst = eps.iter().zip(&vals).map(|(&x, &v)| (v - reference(x)).abs()).fold(0.0, f64::max);
    c.need(worst <= 1e-12, format!("closed form err {worst:.1e}"));
    c.need(vals.windows(2).all(|w| w[1] > w[0]), "strictly increasing over 1e-2..1e-8");
    c.need((vals[0] - 2.3966).abs() <= 5e-4, format!("bound(0.01) = {:.5}", vals[0]));
    let last = *vals.last().unwrap();
    c.need(last > E - 1e-6, format!("bound(1e-8) = e - {:.4e} against e - 1e-6", E - last));
    let phi = PhiSample::from_fn(|m| (1.0 - m).exp(), E, 0.0, 1.0, 1000);
    let r = extremal::phi_admissible(&phi).unwrap();
    c.need(r.admissible(1e-12), format!("profile residual {:.1e}", r.max()));
    c.verdict()
}

fn conjugation_identities() -> Verdict {
    let mut c = Checks::default();
    let b = batch::conjugation_batch(&BatchSpec::new(1000, 7, 6).unwrap(), 1e-12).unwrap();
    c.need(b.inexact == 0, format!("{} rational martingales, {} with nonzero exact CR residual", b.checked, b.inexact));
    c.need(b.max_isometry_err <= 1e-12, format!("isometry err {:.1e}", b.max_isometry_err));
    c.need(b.max_square_err <= 1e-12, format!("S0² err {:.1e}", b.max_square_err));
    c.need(b.max_projection_err <= 1e-12, format!("projection err {:.1e}", b.max_projection_err));
    c.verdict()
}

fn testing_pipeline() -> Verdict {
    let mut c = Checks::default();
    let spec = BatchSpec { samples: usize::MAX, ..BatchSpec::new(1, 8, 4).unwrap() };
    let (mut used, mut k) = (0, 0);
    let (mut max_packing, mut min_slack, mut worst_unit) = (0.0f64, f64::INFINITY, 0.0f64);
    // zero measures have no normalization and are skipped
    while used < 1000 {
        let (mu, f) = batch::configuration(&spec, k);
        k += 1;
        let t = kernel::testing_constant(&mu).unwrap().value;
        if t <= 0.0 {
            continue;
        }
        let mu = mu.scaled(1.0 / t).unwrap();
        let r = kernel::check_3e(&mu, &f).unwrap();
        worst_unit = worst_unit.max((r.testing - 1.0).abs());
        max_packing = max_packing.max(r.packing);
        min_slack = min_slack.min(r.slack);
        used += 1;
    }
    c.need(worst_unit <= 1e-12, format!("{used} measures at testing constant 1 (±{worst_unit:.0e})"));
    c.need(max_packing <= 3.0 + 1e-12, format!("max packing {max_packing:.15}"));
    c.need(min_slack >= -1e-12, format!("min 3e slack {min_slack:.2e}"));
    c.verdict()
}

fn run_twice(dir: &Path, tag: &str, args: &[&str], outputs: &[&str]) -> Result<(), String> {
    let mut runs = Vec::new();
    for pass in 0..2 {
        let sub = dir.join(format!("{tag}-{pass}"));
        std::fs::create_dir_all(&sub).unwrap();
        let mut full: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        full.extend(["--report".into(), sub.join("report.json").to_str().unwrap().into()]);
        for (flag, name) in outputs.iter().map(|o| o.split_once('=').unwrap()) {
            full.extend([flag.to_string(), sub.join(name).to_str().unwrap().into()]);
        }
        let o = Command::new(env!("CARGO_BIN_EXE_dyuch"))
            .args(&full)
            .env_remove("DYUCH_MAX_DEPTH")
            .output()
            .unwrap();
        if o.status.code() != Some(0) {
            return Err(format!("{tag} exited {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr).trim()));
        }
        let mut files = vec![std::fs::read(sub.join("report.json")).unwrap(), o.stdout];
        for (_, name) in outputs.iter().map(|o| o.split_once('=').unwrap()) {
            files.push(std::fs::read(sub.join(name)).unwrap());
        }
        runs.push(files);
    }
    if runs[0] == runs[1] {
        Ok(())
    } else {
        Err(format!("{tag} differs between runs"))
    }
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let fixture = dir.path().join("inputs");
    std::fs::create_dir_all(&fixture).unwrap();
    let mut rng = sampling::rng(5);
    let root = DyadicInterval::unit_root();
    let mu = sampling::random_balanced_measure(&mut rng, root, 4, 1.0);
    let f = sampling::random_analytic(&mut rng, root, 4, 1.0);
    let u = sampling::random_sliced(&mut rng, root, 4, 1.0);
    let put = |name: &str, v: String| {
        let p = fixture.join(name);
        std::fs::write(&p, v).unwrap();
        p.to_str().unwrap().to_string()
    };
    let m = put("m.json", serde_json::to_string(&mu.to_file()).unwrap());
    let g = put("f.json", serde_json::to_string(&f.to_file()).unwrap());
    let t = put("u.json", serde_json::to_string(&dyuch::TreeFile::from_tree(u.tree())).unwrap());
    let cases: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        ("bellman", vec!["verify-bellman", "--samples", "5000", "--grid", "40", "--seed", "3"], vec!["--out=v.csv"]),
        ("scan", vec!["scan-unsliced", "--step", "0.001"], vec!["--out=w.csv"]),
        ("embed", vec!["embed", "--samples", "500", "--seed", "4"], vec![]),
        ("embed-file", vec!["embed", "--measure", &m, "--f", &g], vec![]),
        ("uchiyama", vec!["uchiyama-check", "--samples", "500", "--seed", "4"], vec![]),
        ("uchiyama-file", vec!["uchiyama-check", "--measure", &m, "--f", &g], vec![]),
        ("conjugate", vec!["conjugate", "--samples", "200", "--seed", "4"], vec![]),
        ("conjugate-file", vec!["conjugate", "--u", &t], vec!["--out=f.json"]),
        ("kernel", vec!["kernel", "--interval", "L2N3", "--height", "5"], vec!["--emit=k.json"]),
        ("3e", vec!["check-3e", "--samples", "200", "--seed", "4"], vec![]),
        ("3e-file", vec!["check-3e", "--measure", &m, "--f", &g], vec![]),
        ("search", vec!["search-extremal", "--depth", "4", "--budget", "50", "--seed", "9"], vec!["--out=c.json"]),
        ("certify", vec!["certify-lower-bound", "--seed", "1"], vec!["--out=b.csv"]),
    ];
    let n = cases.len();
    let errors: Vec<String> = cases
        .into_iter()
        .filter_map(|(tag, args, outs)| run_twice(dir.path(), tag, &args, &outs).err())
        .collect();
    if errors.is_empty() {
        check(true, format!("{n} command configurations byte-identical across two runs"))
    } else {
        check(false, errors.join("; "))
    }
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("kernel norm identity", kernel_norm_identity),
        ("Bellman PSD certification", bellman_psd),
        ("unsliced counterexample", unsliced_counterexample),
        ("embedding upper bound", embedding_upper_bound),
        ("dyadic Uchiyama", dyadic_uchiyama),
        ("sharpness certificate", sharpness_certificate),
        ("conjugation identities", conjugation_identities),
        ("testing pipeline", testing_pipeline),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        if !v.ok {
            failed += 1;
        }
        println!("{} criterion {} ({name}): {}", if v.ok { "PASS" } else { "FAIL" }, k + 1, v.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
