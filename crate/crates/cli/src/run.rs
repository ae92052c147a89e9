//! Runs a subcommand's criteria and writes the manifest.

use crate::checks::{run_criterion, Context, CriterionReport};
use crate::config::{RunConfig, Subcommand};
use fracbdsde_core::Execution;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub subcommand: Subcommand,
    pub reports: Vec<CriterionReport>,
    pub seconds: f64,
    pub manifest: PathBuf,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(CriterionReport::passed)
    }
}

/// Execution mode from the `FRACBDSDE_WORKERS` variable: one worker runs sequentially.
pub fn execution_from_env() -> Execution {
    match std::env::var("FRACBDSDE_WORKERS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(1) => Execution::Sequential,
        #[cfg(feature = "parallel")]
        Some(n) if n > 1 => {
            // A second initialisation in the same process keeps the first pool.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Execution::Parallel
        }
        _ => Execution::default(),
    }
}

/// Runs every criterion of `sub`, writing tables and the manifest under `config.out`.
pub fn run(sub: Subcommand, config: &RunConfig, exec: Execution) -> std::io::Result<RunOutcome> {
    run_with(sub, config, exec, |_| {})
}

/// As [`run`], calling `progress` after each criterion.
pub fn run_with(
    sub: Subcommand,
    config: &RunConfig,
    exec: Execution,
    mut progress: impl FnMut(&CriterionReport),
) -> std::io::Result<RunOutcome> {
    let start = Instant::now();
    std::fs::create_dir_all(&config.out)?;
    let ctx = Context::new(config.clone(), exec, Some(config.out.clone()));
    let mut reports = Vec::new();
    for &id in sub.criteria() {
        let r = run_criterion(id, &ctx);
        progress(&r);
        reports.push(r);
    }
    let seconds = start.elapsed().as_secs_f64();
    let manifest = config.out.join(MANIFEST);
    std::fs::write(&manifest, manifest_text(sub, config, exec, &reports, seconds))?;
    Ok(RunOutcome { subcommand: sub, reports, seconds, manifest })
}

pub fn manifest_text(
    sub: Subcommand,
    config: &RunConfig,
    exec: Execution,
    reports: &[CriterionReport],
    seconds: f64,
) -> String {
    let mut s = String::new();
    s.push_str(&format!("program=fracbdsde {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("subcommand={sub}\n"));
    s.push_str(&format!("execution={exec:?}\n"));
    let workers = if exec == Execution::Sequential { 1 } else { fracbdsde_core::exec::worker_count() };
    s.push_str(&format!("workers={workers}\n"));
    s.push_str("\n[config]\n");
    s.push_str(&config.echo());
    s.push_str("\n\n[results]\n");
    for r in reports {
        s.push_str(&r.status_line());
        s.push('\n');
        s.push_str(&r.detail());
        s.push('\n');
    }
    let passed = reports.iter().all(CriterionReport::passed);
    s.push_str(&format!("\nwall_clock_seconds={seconds:.3}\nstatus={}\n", if passed { "PASS" } else { "FAIL" }));
    s
}

/// Reads a configuration file, naming the file on failure.
pub fn read_config(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}
