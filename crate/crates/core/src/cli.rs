//! Command workflows behind the `evoscope` binary: each command runs library
//! operations for a configuration and writes CSV and key-value reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::Analysis;
use crate::catalog::{self, FactOutcome};
use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::exponents::{classify, is_admissible, is_strict, Admissibility, ClassifyOptions};
use crate::generator::{certify_stability, estimate_resolvent_norm, Battery, Verdict};
use crate::grid::{fmt_f64, GridFunction};
use crate::norm::{membership_c, phi_profile, quasi_negativity_test, sandwich_check, weight_profile, Equivalence};
use crate::semigroup::{apply, growth_bound_check, semigroup_law_residual, strong_continuity_probe, SemigroupAction};
use crate::witness::random_bumps;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const CONTINUITY_SHIFTS: [f64; 6] = [0.32, 0.16, 0.08, 0.04, 0.02, 0.01];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Exponents,
    Admissible,
    Phi,
    Weight,
    Semigroup,
    Resolvent,
    Certify,
    Quasineg,
    ReproducePaper,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Exponents,
        Command::Admissible,
        Command::Phi,
        Command::Weight,
        Command::Semigroup,
        Command::Resolvent,
        Command::Certify,
        Command::Quasineg,
        Command::ReproducePaper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Exponents => "exponents",
            Command::Admissible => "admissible",
            Command::Phi => "phi",
            Command::Weight => "weight",
            Command::Semigroup => "semigroup",
            Command::Resolvent => "resolvent",
            Command::Certify => "certify",
            Command::Quasineg => "quasineg",
            Command::ReproducePaper => "reproduce-paper",
        }
    }

    pub fn parse(name: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// Files written by a command, its exit code and any failed checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandReport {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
    pub summary: String,
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::UnknownFamily(_) | Error::Domain(_) | Error::GridMismatch(_) => EXIT_USAGE,
        Error::Propagation { .. }
        | Error::QuadratureOverflow { .. }
        | Error::Degenerate(_)
        | Error::Construction(_)
        | Error::Io(_) => EXIT_NUMERICAL,
    }
}

/// Collects report files in the output directory.
struct Out {
    dir: PathBuf,
    files: Vec<PathBuf>,
    failures: Vec<String>,
    summary: String,
}

impl Out {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Out { dir: dir.to_path_buf(), files: Vec::new(), failures: Vec::new(), summary: String::new() })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        self.files.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &str, rows: &[Vec<f64>]) -> Result<()> {
        let mut s = String::from(header);
        s.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        self.write(name, &s)
    }

    fn function(&mut self, name: &str, u: &GridFunction) -> Result<()> {
        let path = self.dir.join(name);
        u.write_csv(&path)?;
        self.files.push(path);
        Ok(())
    }

    fn fail(&mut self, msg: String) {
        self.failures.push(msg);
    }

    fn finish(self) -> CommandReport {
        let exit_code = if self.failures.is_empty() { EXIT_OK } else { EXIT_CHECK_FAILED };
        CommandReport { exit_code, files: self.files, failures: self.failures, summary: self.summary }
    }
}

/// `key = value` line.
fn kv(s: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(s, "{key} = {value}");
}

fn alphas(cfg: &AnalysisConfig) -> Vec<f64> {
    if cfg.alphas.is_empty() {
        vec![0.0]
    } else {
        cfg.alphas.clone()
    }
}

fn header(cfg: &AnalysisConfig, an: &Analysis) -> String {
    let mut s = String::new();
    kv(&mut s, "family", an.family().describe());
    kv(&mut s, "t_max", fmt_f64(cfg.t_max));
    kv(&mut s, "h", fmt_f64(cfg.h));
    kv(&mut s, "t_sup", fmt_f64(an.t_sup()));
    kv(&mut s, "seed", format!("{:#x}", cfg.seed));
    s
}

fn test_bump(an: &Analysis, seed: u64) -> GridFunction {
    random_bumps(an, 1, seed).remove(0)
}

/// Runs a command on the configured family, writing reports into
/// `cfg.out_dir`.
pub fn run_command(cmd: Command, cfg: &AnalysisConfig) -> Result<CommandReport> {
    if cmd == Command::ReproducePaper {
        return reproduce_paper(&catalog::CATALOG_NAMES, cfg);
    }
    let an = cfg.analysis()?;
    let th = &cfg.thresholds;
    let mut out = Out::new(&cfg.out_dir)?;
    let mut rep = header(cfg, &an);
    match cmd {
        Command::Exponents => {
            let opts = ClassifyOptions {
                bisect_tol: cfg.bisect_tol,
                t_gap: cfg.t_gap,
                alphas: cfg.alphas.clone(),
                bracket: cfg.bracket,
            };
            let r = classify(&an, th, &opts)?;
            kv(&mut rep, "k_l", fmt_f64(r.k_l));
            kv(&mut rep, "k_b", fmt_f64(r.k_b.value));
            kv(&mut rep, "k_b_raw", fmt_f64(r.k_b.raw));
            kv(&mut rep, "k_b_diverging", r.k_b.diverging);
            kv(&mut rep, "inf_a", fmt_f64(r.inf_a));
            kv(&mut rep, "inf_a_bracket", format!("{}, {}", fmt_f64(r.inf_a_bracket.0), fmt_f64(r.inf_a_bracket.1)));
            let c = r.classification;
            kv(&mut rep, "uniform_exp_bounded", c.uniform_exp_bounded);
            kv(&mut rep, "uniform_exp_stable", c.uniform_exp_stable);
            kv(&mut rep, "nonuniform_exp_bounded", c.nonuniform_exp_bounded);
            kv(&mut rep, "nonuniform_exp_stable", c.nonuniform_exp_stable);
            let rows: Vec<Vec<f64>> = r
                .alpha_tested
                .iter()
                .map(|a| vec![a.alpha, f64::from(u8::from(a.admissible)), f64::from(u8::from(a.strict))])
                .collect();
            out.csv("exponents.csv", "alpha,admissible,strict", &rows)?;
            out.write("exponents.txt", &rep)?;
        }
        Command::Admissible => {
            let mut rows = Vec::new();
            for a in alphas(cfg) {
                let (adm, growth) = match is_admissible(&an, a, th) {
                    Admissibility::Admissible(_) => (true, an.growth_scan(a).growth),
                    Admissibility::Inadmissible { evidence, .. } => (false, evidence.growth),
                };
                let strict = adm && is_strict(&an, a, th)?;
                rows.push(vec![a, f64::from(u8::from(adm)), f64::from(u8::from(strict)), growth]);
                kv(&mut rep, &format!("alpha {}", fmt_f64(a)), format!("admissible={adm} strict={strict}"));
            }
            out.csv("admissible.csv", "alpha,admissible,strict,growth", &rows)?;
            out.write("admissible.txt", &rep)?;
        }
        Command::Phi => {
            let u = test_bump(&an, cfg.seed);
            out.function("phi_input.csv", &u)?;
            for (k, a) in alphas(cfg).into_iter().enumerate() {
                let prof = phi_profile(&an, a, &u)?;
                let rows: Vec<Vec<f64>> = an.grid().points().iter().zip(&prof.phi_values).map(|(t, p)| vec![*t, *p]).collect();
                out.csv(&format!("phi_{k}.csv"), "t,phi", &rows)?;
                let sandwich = sandwich_check(&an, a, &u)?;
                let member = membership_c(&an, a, &u, th)?.is_member();
                kv(&mut rep, &format!("alpha_{k}"), fmt_f64(a));
                kv(&mut rep, &format!("norm_{k}"), fmt_f64(prof.norm));
                kv(&mut rep, &format!("argmax_t_{k}"), fmt_f64(prof.argmax_t));
                kv(&mut rep, &format!("member_{k}"), member);
                kv(&mut rep, &format!("sandwich_violation_{k}"), fmt_f64(sandwich));
                if sandwich > 1e-12 {
                    out.fail(format!("sandwich estimate violated by {sandwich:e} at alpha = {a}"));
                }
            }
            out.write("phi.txt", &rep)?;
        }
        Command::Weight => {
            for (k, a) in alphas(cfg).into_iter().enumerate() {
                let w = weight_profile(&an, a);
                let rows: Vec<Vec<f64>> =
                    an.grid().points().iter().zip(&w.log_w).map(|(t, l)| vec![*t, l.exp(), *l]).collect();
                out.csv(&format!("weight_{k}.csv"), "t,w,log_w", &rows)?;
                kv(&mut rep, &format!("alpha_{k}"), fmt_f64(a));
                kv(&mut rep, &format!("max_log_w_{k}"), fmt_f64(w.max_log()));
            }
            out.write("weight.txt", &rep)?;
        }
        Command::Semigroup => {
            let u = test_bump(&an, cfg.seed);
            let h = an.grid().max_step();
            let shift = (1.0 / h).round().max(1.0) * h;
            for (k, a) in alphas(cfg).into_iter().enumerate() {
                let action = SemigroupAction::new(&an, a, shift)?;
                out.function(&format!("semigroup_{k}.csv"), &apply(&an, &action, &u)?)?;
                let shifts: Vec<f64> = CONTINUITY_SHIFTS
                    .iter()
                    .filter(|t| an.grid().aligned_steps(**t).is_ok())
                    .copied()
                    .collect();
                let table = strong_continuity_probe(&an, a, &u, &shifts)?;
                let rows: Vec<Vec<f64>> = table.iter().map(|(t, r)| vec![*t, *r]).collect();
                out.csv(&format!("continuity_{k}.csv"), "t,residual", &rows)?;
                let half = (shift / (2.0 * h)).round() * h;
                let law = semigroup_law_residual(&an, a, half, shift - half, &u)?;
                kv(&mut rep, &format!("alpha_{k}"), fmt_f64(a));
                kv(&mut rep, &format!("shift_{k}"), fmt_f64(action.shift));
                kv(&mut rep, &format!("law_residual_{k}"), fmt_f64(law));
                match growth_bound_check(&an, a, shift, &u, th) {
                    Ok(m) => {
                        kv(&mut rep, &format!("growth_margin_{k}"), fmt_f64(m));
                        let norm = crate::norm::admissible_norm(&an, a, &u)?;
                        if m < -1e-9 * norm {
                            out.fail(format!("growth bound violated at alpha = {a}: margin {m:e}"));
                        }
                    }
                    Err(Error::Domain(msg)) => kv(&mut rep, &format!("growth_margin_{k}"), format!("skipped ({msg})")),
                    Err(e) => return Err(e),
                }
            }
            out.write("semigroup.txt", &rep)?;
        }
        Command::Resolvent => {
            for (k, a) in alphas(cfg).into_iter().enumerate() {
                let battery = Battery::standard(&an, a, cfg.n_bumps, cfg.seed);
                let est = estimate_resolvent_norm(&an, a, &battery)?;
                kv(&mut rep, &format!("alpha_{k}"), fmt_f64(a));
                kv(&mut rep, &format!("c_{k}"), fmt_f64(est.c));
                kv(&mut rep, &format!("battery_size_{k}"), est.n_tests);
                kv(&mut rep, &format!("unbounded_{k}"), est.unbounded);
                kv(&mut rep, &format!("witness_{k}"), &est.witness_f);
                for (n, r) in &est.per_n {
                    kv(&mut rep, &format!("ratio_n{n}_{k}"), fmt_f64(*r));
                }
                let mut s = String::from("label,ratio\n");
                for (l, r) in est.labels.iter().zip(&est.ratio_history) {
                    let _ = writeln!(s, "{l},{}", fmt_f64(*r));
                }
                out.write(&format!("resolvent_{k}.csv"), &s)?;
            }
            out.write("resolvent.txt", &rep)?;
        }
        Command::Certify => {
            let a = alphas(cfg)[0];
            let battery = Battery::standard(&an, a, cfg.n_bumps, cfg.seed);
            let est = estimate_resolvent_norm(&an, a, &battery)?;
            let v = certify_stability(&an, a, &est, cfg.delta, th)?;
            kv(&mut rep, "alpha", fmt_f64(a));
            kv(&mut rep, "c", fmt_f64(v.c));
            kv(&mut rep, "c_upper", fmt_f64(v.c_upper));
            kv(&mut rep, "delta", fmt_f64(v.delta));
            kv(&mut rep, "rate", fmt_f64(v.rate));
            kv(&mut rep, "prefactor", fmt_f64(v.prefactor));
            kv(&mut rep, "measured_margin", fmt_f64(v.measured_margin));
            kv(&mut rep, "step1_margin", fmt_f64(v.step1_margin));
            for (k, m) in &v.step2_margins {
                kv(&mut rep, &format!("step2_margin_k{k}"), fmt_f64(*m));
            }
            for e in &v.sweep {
                kv(
                    &mut rep,
                    &format!("sweep_delta_{}", e.delta),
                    format!("rate={} prefactor={} margin={} certified={}", fmt_f64(e.rate), fmt_f64(e.prefactor), fmt_f64(e.margin), e.certified),
                );
            }
            match &v.verdict {
                Verdict::CertifiedStable => kv(&mut rep, "verdict", "certified_stable"),
                Verdict::NotCertified(why) => {
                    kv(&mut rep, "verdict", format!("not_certified ({why})"));
                    out.fail(format!("not certified: {why}"));
                }
            }
            let rows: Vec<Vec<f64>> = v.samples.iter().map(|s| vec![s.t, s.s, s.measured, s.predicted]).collect();
            out.csv("certify_samples.csv", "t,s,measured,predicted", &rows)?;
            out.write("certify.txt", &rep)?;
        }
        Command::Quasineg => {
            let a = alphas(cfg)[0];
            let r = quasi_negativity_test(&an, a, cfg.nu, cfg.n_dirs, cfg.seed, th)?;
            kv(&mut rep, "alpha", fmt_f64(a));
            kv(&mut rep, "nu", fmt_f64(cfg.nu));
            kv(&mut rep, "k_measured", fmt_f64(r.k_measured));
            kv(&mut rep, "log_k", fmt_f64(r.log_k));
            match r.verdict {
                Equivalence::Equivalent { .. } => kv(&mut rep, "verdict", "equivalent"),
                Equivalence::Diverging { first_half_log, second_half_log } => {
                    kv(&mut rep, "verdict", "diverging");
                    kv(&mut rep, "first_half_log", fmt_f64(first_half_log));
                    kv(&mut rep, "second_half_log", fmt_f64(second_half_log));
                }
            }
            kv(&mut rep, "probes", &r.probes);
            out.write("quasineg.txt", &rep)?;
        }
        Command::ReproducePaper => unreachable!(),
    }
    out.summary = rep;
    Ok(out.finish())
}

fn outcome_line(o: &FactOutcome) -> String {
    format!(
        "{} {} measured={} expected={} tol={} ({:?}) | {}",
        if o.passed { "PASS" } else { "FAIL" },
        o.fact.id,
        fmt_f64(o.measured),
        fmt_f64(o.fact.expected),
        fmt_f64(o.fact.tolerance),
        o.fact.comparison,
        o.fact.anchor
    )
}

/// Checks every known fact of the named catalog entries on their
/// recommended grids.
pub fn reproduce_paper(names: &[&str], cfg: &AnalysisConfig) -> Result<CommandReport> {
    let mut out = Out::new(&cfg.out_dir)?;
    let mut rep = String::new();
    let mut csv = String::from("id,measured,expected,tolerance,passed\n");
    for name in names {
        let entry = catalog::entry(name)?;
        let _ = writeln!(rep, "# {}", entry.name);
        for o in entry.check_all(&cfg.thresholds, cfg.seed)? {
            let line = outcome_line(&o);
            let _ = writeln!(rep, "{line}");
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                o.fact.id,
                fmt_f64(o.measured),
                fmt_f64(o.fact.expected),
                fmt_f64(o.fact.tolerance),
                o.passed
            );
            if !o.passed {
                out.fail(line);
            }
        }
    }
    out.write("reproduce.txt", &rep)?;
    out.write("reproduce.csv", &csv)?;
    out.summary = rep;
    Ok(out.finish())
}
