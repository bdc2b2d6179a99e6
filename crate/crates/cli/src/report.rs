use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::PipelineConfig;

#[derive(Debug, Clone, Serialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub seconds: f64,
}

/// Wall-clock time per named phase, logged to stderr as each one ends.
#[derive(Debug, Default)]
pub struct Timer {
    phases: Vec<PhaseTiming>,
}

impl Timer {
    pub fn phase<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let seconds = start.elapsed().as_secs_f64();
        eprintln!("[{name}] {seconds:.3} s");
        self.phases.push(PhaseTiming {
            phase: name.into(),
            seconds,
        });
        out
    }
}

/// Common envelope of every JSON report, plus the matching CSV preamble.
pub struct Reporter {
    pub dir: PathBuf,
    pub command: &'static str,
    pub config: PipelineConfig,
    pub hash: String,
}

impl Reporter {
    pub fn new(dir: PathBuf, command: &'static str, config: PipelineConfig) -> Result<Self> {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let hash = config.hash();
        Ok(Self {
            dir,
            command,
            config,
            hash,
        })
    }

    fn preamble(&self, seeds: &Value) -> String {
        format!(
            "# command={} config_hash={} seeds={seeds}\n",
            self.command, self.hash
        )
    }

    /// Writes `<dir>/<name>.csv` with a commented provenance line first.
    pub fn csv(&self, name: &str, seeds: &Value, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(format!("{name}.csv"));
        write(&path, format!("{}{body}", self.preamble(seeds)))?;
        Ok(path)
    }

    /// Writes `<dir>/<command>.json`.
    pub fn json(
        &self,
        seeds: Value,
        inputs: Value,
        timer: &Timer,
        result: Value,
    ) -> Result<PathBuf> {
        let doc = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.hash,
            "config": self.config,
            "seeds": seeds,
            "inputs": inputs,
            "timings": timer.phases,
            "result": result,
        });
        let path = self.dir.join(format!("{}.json", self.command));
        write(&path, serde_json::to_string_pretty(&doc)?)?;
        Ok(path)
    }
}

fn write(path: &Path, contents: String) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Seeds that determine a pipeline run.
pub fn pipeline_seeds(config: &PipelineConfig) -> Value {
    let e = &config.ensemble;
    json!({
        "subset_seed": e.subset_seed,
        "member_seeds": (0..e.n_members as u64).map(|k| e.train.seed.wrapping_add(k)).collect::<Vec<_>>(),
    })
}
