use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// A CSV table built in memory and written in one go.
pub struct Csv {
    name: &'static str,
    body: String,
}

impl Csv {
    pub fn new(name: &'static str, header: &[&str]) -> Self {
        let mut body = header.join(",");
        body.push('\n');
        Self { name, body }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.body.push(',');
            }
            match c {
                Cell::Num(v) => write!(self.body, "{v}").unwrap(),
                Cell::Int(v) => write!(self.body, "{v}").unwrap(),
                Cell::Text(s) => self.body.push_str(s),
            }
        }
        self.body.push('\n');
    }

    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join(self.name);
        fs::write(&path, &self.body)?;
        Ok(path)
    }
}

pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Provenance record of one run, written after every artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub label: String,
    pub config_digest: String,
    pub seed: u64,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<String>,
    pub status: String,
    pub exit_code: i32,
    pub errors: Vec<String>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &str| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("run.command", &self.command);
        kv("run.label", &self.label);
        kv("run.status", &self.status);
        kv("run.exit_code", &self.exit_code.to_string());
        kv("run.config_digest", &self.config_digest);
        kv("run.seed", &self.seed.to_string());
        kv("run.version", &self.version);
        kv("run.wall_clock_seconds", &format!("{:.3}", self.wall_clock_seconds));
        kv("run.artifacts", &self.artifacts.join(", "));
        if let Some(c) = self.converged {
            kv("picard.converged", &c.to_string());
        }
        if let Some(n) = self.iterations {
            kv("picard.iterations", &n.to_string());
        }
        for (i, e) in self.errors.iter().enumerate() {
            kv(&format!("error.{i}"), &e.replace('\n', " "));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join("manifest.txt");
        fs::write(&path, self.render())?;
        Ok(path)
    }
}
