use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use fvlab_core::config::KvConfig;
use fvlab_studysvc::{ServiceConfig, StudyError};

use crate::settings::usage;

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long)]
    bind: Option<String>,
    /// 0 picks a free port.
    #[arg(long)]
    port: Option<u16>,
    /// Record logs directory.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Root that stimulus asset refs resolve against [default: manifest dir].
    #[arg(long)]
    media_dir: Option<PathBuf>,
    /// Built study UI, served at `/`.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
}

fn absolute(p: &Path) -> Result<String> {
    Ok(std::path::absolute(p)?.display().to_string())
}

/// Loads the service config (file, then flags), echoes it into the data
/// directory and serves until interrupted.
pub fn run(
    config: Option<&Path>,
    manifest: &Option<String>,
    seed: Option<u64>,
    args: &ServeArgs,
) -> Result<()> {
    let (mut kv, base) = match config {
        Some(p) => (
            KvConfig::load(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (KvConfig::default(), std::env::current_dir()?),
    };
    let paths = [
        ("manifest", manifest.as_ref().map(PathBuf::from)),
        ("data_dir", args.data_dir.clone()),
        ("media_dir", args.media_dir.clone()),
        ("ui_dir", args.ui_dir.clone()),
    ];
    for (key, value) in paths {
        if let Some(v) = value {
            kv.set(key, absolute(&v)?);
        }
    }
    if let Some(b) = &args.bind {
        kv.set("bind", b.clone());
    }
    if let Some(p) = args.port {
        kv.set("port", p.to_string());
    }
    if let Some(s) = seed {
        kv.set("seed", s.to_string());
    }
    let service = ServiceConfig::from_kv(&kv, &base).map_err(|e| match e {
        StudyError::Core(c) => usage(c.to_string()),
        StudyError::BadRequest(m) => usage(m),
        other => other.into(),
    })?;

    std::fs::create_dir_all(&service.data_dir)?;
    let mut echo = KvConfig::default();
    echo.set("bind", service.bind.clone());
    echo.set("port", service.port.to_string());
    echo.set("manifest", service.manifest.display().to_string());
    echo.set("data_dir", service.data_dir.display().to_string());
    echo.set("media_dir", service.media_root().display().to_string());
    if let Some(ui) = &service.ui_dir {
        echo.set("ui_dir", ui.display().to_string());
    }
    echo.set("seed", service.seed.to_string());
    std::fs::write(service.data_dir.join("serve.cfg"), echo.render())?;

    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    runtime.block_on(fvlab_studysvc::http::serve(service))?;
    Ok(())
}
