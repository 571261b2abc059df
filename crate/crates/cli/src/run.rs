use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::Context;
use serde::Serialize;

/// Output directory of one invocation. Files are written once each and listed
/// in `manifest.json`, which is written last.
pub struct RunDir {
    root: PathBuf,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(root: PathBuf) -> anyhow::Result<Self> {
        std::fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root, outputs: Vec::new() })
    }

    pub fn file(&mut self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let p = self.root.join(name);
        let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        self.outputs.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let w = self.file(name)?;
        serde_json::to_writer_pretty(w, value).with_context(|| format!("writing {name}"))
    }

    pub fn finish<S: Serialize>(mut self, command: &str, settings: &S, partial: bool) -> anyhow::Result<PathBuf> {
        let manifest = Manifest {
            command,
            argv: std::env::args().collect(),
            settings,
            versions: Versions { fogdrip_cli: env!("CARGO_PKG_VERSION"), fogdrip: fogdrip_version() },
            threads: rayon::current_num_threads(),
            outputs: std::mem::take(&mut self.outputs),
            partial,
        };
        let w = self.file("manifest.json")?;
        serde_json::to_writer_pretty(w, &manifest).context("writing manifest.json")?;
        Ok(self.root)
    }
}

#[derive(Serialize)]
struct Versions {
    fogdrip_cli: &'static str,
    fogdrip: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a, S: Serialize> {
    command: &'a str,
    argv: Vec<String>,
    settings: &'a S,
    versions: Versions,
    threads: usize,
    outputs: Vec<String>,
    /// Some estimate stopped on its budget or failed its convergence check.
    partial: bool,
}

fn fogdrip_version() -> &'static str {
    // The library shares the workspace version.
    env!("CARGO_PKG_VERSION")
}
