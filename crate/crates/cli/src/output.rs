use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::CliError;

/// Summary text for stdout plus the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CmdOutput {
    pub stdout: String,
    pub exit_code: u8,
    pub files: Vec<PathBuf>,
}

pub struct OutDir {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        fs::write(&p, contents)?;
        self.files.push(p.clone());
        Ok(p)
    }

    /// Records a file written by someone else (e.g. the SVG backend).
    pub fn track(&mut self, p: PathBuf) {
        self.files.push(p);
    }

    /// `run.json`: command, its arguments, the resolved config and its digest.
    pub fn manifest<A: Serialize>(&mut self, command: &str, args: &A, cfg: &RunConfig) -> Result<(), CliError> {
        let doc = json!({
            "command": command,
            "args": args,
            "config_digest": cfg.digest(),
            "config": cfg,
        });
        self.write("run.json", &(serde_json::to_string_pretty(&doc).expect("manifest serializes") + "\n"))?;
        Ok(())
    }

    pub fn finish(self, stdout: String, exit_code: u8) -> CmdOutput {
        CmdOutput { stdout, exit_code, files: self.files }
    }
}

pub fn csv_string(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Left-aligned text table with two-space gutters.
pub fn text_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

pub fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

