//! Flag resolution: command line > config file > built-in defaults, with the
//! fully-resolved configuration echoed so any run can be reproduced from its
//! own output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use duet_core::params::{EngineParams, WaveParams};

/// Environment variable naming the default directory for relative output
/// paths.
pub const OUTPUT_DIR_ENV: &str = "DUET_OUTPUT_DIR";

/// Engine parameters as accepted on the command line; every field mirrors a
/// `key = value` line of the config file. Occupations may be given directly
/// (nh, nc, delta) or through frequencies and temperatures (omega-h, omega-c,
/// t-h, t-c); the direct form is canonical in echoes and output.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Config file with `key = value` lines mirroring the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Inter-mode coupling g.
    #[arg(long)]
    pub g: Option<f64>,
    /// Shorthand setting both bath couplings.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub kappa_h: Option<f64>,
    #[arg(long)]
    pub kappa_c: Option<f64>,
    /// Hot occupation nbar_h (direct spec).
    #[arg(long)]
    pub nh: Option<f64>,
    /// Cold occupation nbar_c (direct spec).
    #[arg(long)]
    pub nc: Option<f64>,
    /// Frequency difference Delta = omega_h - omega_c.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub omega_h: Option<f64>,
    #[arg(long)]
    pub omega_c: Option<f64>,
    #[arg(long)]
    pub t_h: Option<f64>,
    #[arg(long)]
    pub t_c: Option<f64>,
    /// Wave-model white-noise offset C (Phi = nbar + C).
    #[arg(long)]
    pub offset_c: Option<f64>,
}

/// A parsed config file: lowercased keys with '-' canonicalized to '_'.
#[derive(Debug, Clone, Default)]
pub struct FileConfig(BTreeMap<String, String>);

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "config line {} is not `key = value`: {raw:?}",
                    lineno + 1
                );
            };
            map.insert(canon(key.trim()), value.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(&canon(key)) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key `{key}`: cannot parse {raw:?}: {e}")),
        }
    }
}

fn canon(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

/// Fully-resolved physical configuration (direct-occupation canonical form).
#[derive(Debug, Clone)]
pub struct ResolvedParams {
    pub wave: WaveParams,
}

impl ResolvedParams {
    /// Merge flags over the config file over the reference-point defaults.
    pub fn resolve(args: &ParamArgs, file: &FileConfig) -> anyhow::Result<Self> {
        macro_rules! pick {
            ($field:ident, $key:literal) => {
                match args.$field {
                    Some(v) => Some(v),
                    None => file.get::<f64>($key)?,
                }
            };
        }
        let g = pick!(g, "g").unwrap_or(1.0);
        let kappa = pick!(kappa, "kappa");
        let kappa_h = pick!(kappa_h, "kappa_h").or(kappa).unwrap_or(1.0);
        let kappa_c = pick!(kappa_c, "kappa_c").or(kappa).unwrap_or(1.0);
        let offset_c = pick!(offset_c, "offset_c").unwrap_or(0.0);

        let omega_h = pick!(omega_h, "omega_h");
        let omega_c = pick!(omega_c, "omega_c");
        let t_h = pick!(t_h, "t_h");
        let t_c = pick!(t_c, "t_c");
        let thermal = [omega_h, omega_c, t_h, t_c].iter().filter(|v| v.is_some()).count();

        let base = if thermal > 0 {
            if thermal != 4 {
                bail!("thermal spec needs all of --omega-h, --omega-c, --t-h, --t-c");
            }
            for key in ["nh", "nc", "delta"] {
                let flag_set = match key {
                    "nh" => args.nh.is_some(),
                    "nc" => args.nc.is_some(),
                    _ => args.delta.is_some(),
                };
                if flag_set || file.get::<f64>(key)?.is_some() {
                    bail!("--{key} conflicts with the thermal (omega, T) spec");
                }
            }
            EngineParams::thermal(
                g,
                kappa_h,
                kappa_c,
                omega_h.unwrap(),
                omega_c.unwrap(),
                t_h.unwrap(),
                t_c.unwrap(),
            )
        } else {
            let nh = pick!(nh, "nh").unwrap_or(2.0);
            let nc = pick!(nc, "nc").unwrap_or(0.1);
            let delta = pick!(delta, "delta").unwrap_or(1.0);
            EngineParams::direct(g, kappa_h, kappa_c, delta, nh, nc)
        };
        Ok(Self {
            wave: WaveParams::new(base, offset_c),
        })
    }

    /// Echo lines in canonical direct form; feeding these back through
    /// `--config` reproduces the run.
    pub fn echo_lines(&self) -> Vec<(String, String)> {
        let e = self.wave.base.clone().validate();
        let mut lines = Vec::new();
        match e {
            Ok(engine) => {
                for (k, v) in [
                    ("g", engine.g()),
                    ("kappa_h", engine.kappa_h()),
                    ("kappa_c", engine.kappa_c()),
                    ("delta", engine.delta()),
                    ("nh", engine.nbar_h()),
                    ("nc", engine.nbar_c()),
                    ("offset_c", self.wave.offset_c),
                ] {
                    lines.push((k.to_string(), format!("{v}")));
                }
            }
            Err(_) => {
                // echo the raw request so the failure is reproducible too
                lines.push(("g".into(), format!("{}", self.wave.base.g)));
            }
        }
        lines
    }
}

/// Prefix a relative output path with $DUET_OUTPUT_DIR when set.
pub fn resolve_output_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir).join(path);
            }
        }
    }
    path.to_path_buf()
}

/// Print the resolved configuration as reproducible `# key = value` lines.
pub fn echo_config(section: &str, lines: &[(String, String)]) {
    println!("# duet {section} configuration (reproducible via --config)");
    for (k, v) in lines {
        println!("# {k} = {v}");
    }
}
