use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;

use taforge_core::llm::MockScript;
use taforge_core::{Error, Result};

pub const DEFAULT_PORT: u16 = 7815;

/// Where timestamps come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    Wall,
    /// A counter starting at 1, so two services fed the same calls in the
    /// same order produce identical workspaces.
    Logical,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub bind: SocketAddr,
    pub token: Option<String>,
    pub ui_dir: Option<PathBuf>,
    pub mock_script: Option<MockScript>,
    pub workers: usize,
    pub clock: ClockMode,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            bind: SocketAddr::new(IpAddr::V4(Ipv4Addr::LOCALHOST), DEFAULT_PORT),
            token: None,
            ui_dir: None,
            mock_script: None,
            workers: 2,
            clock: ClockMode::Wall,
        }
    }

    /// `TAFORGE_DATA_DIR`, `TAFORGE_PORT`, `TAFORGE_BIND`, `TAFORGE_API_TOKEN`,
    /// `TAFORGE_UI_DIR`, `TAFORGE_MOCK_SCRIPT`, `TAFORGE_WORKERS`,
    /// `TAFORGE_CLOCK` (wall or logical).
    pub fn from_env() -> Result<Self> {
        Self::from_lookup(|k| std::env::var(k).ok().filter(|v| !v.trim().is_empty()))
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let bad = |k: &str, v: &str| Error::InvalidArgument(format!("{k}={v:?} is not valid"));
        let mut cfg = ServiceConfig::new(get("TAFORGE_DATA_DIR").unwrap_or_else(|| "taforge-data".into()));
        if let Some(p) = get("TAFORGE_PORT") {
            cfg.bind.set_port(p.parse().map_err(|_| bad("TAFORGE_PORT", &p))?);
        }
        if let Some(b) = get("TAFORGE_BIND") {
            cfg.bind.set_ip(b.parse().map_err(|_| bad("TAFORGE_BIND", &b))?);
        }
        cfg.token = get("TAFORGE_API_TOKEN");
        cfg.ui_dir = get("TAFORGE_UI_DIR").map(PathBuf::from);
        if let Some(p) = get("TAFORGE_MOCK_SCRIPT") {
            cfg.mock_script = Some(MockScript::load(p.as_ref())?);
        }
        if let Some(w) = get("TAFORGE_WORKERS") {
            cfg.workers = w.parse().ok().filter(|n| *n > 0).ok_or_else(|| bad("TAFORGE_WORKERS", &w))?;
        }
        if let Some(c) = get("TAFORGE_CLOCK") {
            cfg.clock = match c.as_str() {
                "wall" => ClockMode::Wall,
                "logical" => ClockMode::Logical,
                _ => return Err(bad("TAFORGE_CLOCK", &c)),
            };
        }
        Ok(cfg)
    }
}
