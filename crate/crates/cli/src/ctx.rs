use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use spinlab::io::{load_config, svg_plot, write_table, PlotSeries, ProjectConfig, RunManifest, Table};
use spinlab::nalgebra::Vector3;
use spinlab::spin::axes;
use spinlab::Error;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Core(Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl CliError {
    /// 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Core(e) if e.is_usage() => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub struct Ctx {
    pub config: Option<ProjectConfig>,
    out_dir: PathBuf,
    prefix: String,
    pub manifest: RunManifest,
    started: Instant,
}

impl Ctx {
    pub fn new(
        argv: Vec<String>,
        config_path: Option<&Path>,
        out_dir: Option<PathBuf>,
        prefix: Option<String>,
        command: &str,
    ) -> CliResult<Self> {
        let started = Instant::now();
        let mut manifest = RunManifest::new(argv);
        let config = match config_path {
            Some(p) => {
                let cfg = load_config(p).map_err(|e| match e {
                    Error::Io(io) => CliError::Usage(format!("cannot read config {}: {io}", p.display())),
                    other => CliError::Core(other),
                })?;
                manifest = manifest.with_config(p)?;
                Some(cfg)
            }
            None => None,
        };
        let out_dir = out_dir
            .or_else(|| config.as_ref().and_then(|c| c.output_dir.as_ref()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out_dir)?;
        let prefix = prefix.unwrap_or_else(|| command.to_string());
        Ok(Ctx { config, out_dir, prefix, manifest, started })
    }

    pub fn require_config(&self) -> CliResult<&ProjectConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| CliError::Usage("this command needs --config (or SPINLAB_CONFIG)".into()))
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{}_{suffix}", self.prefix))
    }

    fn record(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    pub fn write_table(&mut self, suffix: &str, table: &Table) -> CliResult {
        let path = self.path(suffix);
        write_table(std::fs::File::create(&path)?, table)?;
        self.record(&path);
        Ok(())
    }

    pub fn write_text(&mut self, suffix: &str, text: &str) -> CliResult {
        let path = self.path(suffix);
        std::fs::write(&path, text)?;
        self.record(&path);
        Ok(())
    }

    pub fn write_plot(&mut self, title: &str, xlabel: &str, ylabel: &str, series: &[PlotSeries]) -> CliResult {
        self.write_text("plot.svg", &svg_plot(title, xlabel, ylabel, series))
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning: {msg}");
        self.manifest.warnings.push(msg);
    }

    pub fn finish(mut self) -> CliResult {
        self.manifest.wall_time_s = self.started.elapsed().as_secs_f64();
        let path = self.path("manifest.json");
        self.manifest.write(&path)?;
        Ok(())
    }
}

/// `b`, `d1`, `d2`, or `x,y,z` in the crystal frame (normalised).
pub fn parse_direction(s: &str) -> Result<Vector3<f64>, String> {
    match s.to_ascii_lowercase().as_str() {
        "b" => return Ok(axes::b()),
        "d1" => return Ok(axes::d1()),
        "d2" => return Ok(axes::d2()),
        _ => {}
    }
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("`{s}` is not b, d1, d2 or x,y,z"))?;
    if parts.len() != 3 {
        return Err(format!("`{s}` needs three components"));
    }
    let v = Vector3::new(parts[0], parts[1], parts[2]);
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err("direction must be non-zero".into());
    }
    Ok(v / n)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

pub fn fmt_sigma(v: f64, s: f64) -> String {
    format!("{v:.6e} ± {s:.2e}")
}
