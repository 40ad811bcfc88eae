//! On-disk cache of solved profiles, keyed by space, degree and grid, with a
//! SHA-256 checksum stored next to each entry.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hypergreen::radial_ode::{GridSpec, RadialProfile};
use hypergreen::spaceform::ModelSpace;
use sha2::{Digest, Sha256};

pub const CACHE_ENV: &str = "HYPERGREEN_CACHE";

pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".hypergreen-cache"))
}

pub fn key(space: &ModelSpace, degree: usize, grid: &GridSpec) -> String {
    format!(
        "{}-l{}-tmax{}-tmin{:e}-h{:e}-q{:e}-rtol{:e}",
        space.tag(),
        degree,
        grid.t_max,
        grid.t_min,
        grid.h_max,
        grid.ratio,
        grid.rtol
    )
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Cached profile if the entry exists and its checksum matches.
fn lookup(dir: &Path, key: &str) -> Option<RadialProfile> {
    let body = fs::read(dir.join(format!("{key}.json"))).ok()?;
    let sum = fs::read_to_string(dir.join(format!("{key}.sha256"))).ok()?;
    if sum.trim() != digest(&body) {
        eprintln!("cache entry {key} failed its checksum; recomputing");
        return None;
    }
    RadialProfile::from_json(std::str::from_utf8(&body).ok()?).ok()
}

fn store(dir: &Path, key: &str, profile: &RadialProfile) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating cache directory {}", dir.display()))?;
    let body = profile.to_json();
    fs::write(dir.join(format!("{key}.json")), &body)?;
    fs::write(dir.join(format!("{key}.sha256")), digest(body.as_bytes()) + "\n")?;
    Ok(())
}

/// Returns the cached profile or computes and stores it.
pub fn get_or_solve(
    space: &ModelSpace,
    degree: usize,
    grid: &GridSpec,
    solve: impl FnOnce() -> hypergreen::Result<RadialProfile>,
) -> Result<RadialProfile> {
    let dir = cache_dir();
    let key = key(space, degree, grid);
    if let Some(p) = lookup(&dir, &key) {
        eprintln!("profile cache hit: {key}");
        return Ok(p);
    }
    let profile = solve()?;
    if let Err(e) = store(&dir, &key, &profile) {
        eprintln!("warning: could not write profile cache: {e:#}");
    }
    Ok(profile)
}
