//! On-disk environment format: a JSON manifest plus two raw little-endian
//! blobs (occupancy as `u8` 0/1, cost as `f32`), x fastest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Environment;
use crate::error::{Error, Result};
use crate::kinematics::Vec3;

pub const MAGIC: &str = "NVOX1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub magic: String,
    pub dims: [usize; 3],
    pub spacing: f64,
    pub origin: [f64; 3],
    pub needle_radius: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub occupancy_file: String,
    pub cost_file: String,
}

fn blob_names(manifest_path: &Path) -> (String, String) {
    let stem = manifest_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("env");
    (format!("{stem}.occupancy.u8"), format!("{stem}.cost.f32"))
}

/// Writes `path` (the manifest) and its two blobs next to it.
pub fn save_env(env: &Environment, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let (occ_name, cost_name) = blob_names(path);
    let manifest = Manifest {
        magic: MAGIC.to_string(),
        dims: env.dims,
        spacing: env.spacing,
        origin: [env.origin.x, env.origin.y, env.origin.z],
        needle_radius: env.needle_radius,
        c_min: env.c_min,
        c_max: env.c_max,
        occupancy_file: occ_name.clone(),
        cost_file: cost_name.clone(),
    };
    let occ: Vec<u8> = env.occupancy.iter().map(|&o| o as u8).collect();
    let cost: Vec<u8> = env.cost.iter().flat_map(|c| c.to_le_bytes()).collect();
    write(&dir.join(occ_name), &occ)?;
    write(&dir.join(cost_name), &cost)?;
    let text = serde_json::to_string_pretty(&manifest)?;
    write(path, text.as_bytes())
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_env(path: impl AsRef<Path>) -> Result<Environment> {
    let path = path.as_ref();
    let text = read(path)?;
    let manifest: Manifest =
        serde_json::from_slice(&text).map_err(|e| Error::Manifest(e.to_string()))?;
    if manifest.magic != MAGIC {
        return Err(Error::Manifest(format!("bad magic {:?}", manifest.magic)));
    }
    let n = manifest.dims.iter().product::<usize>();
    let dir = path.parent().unwrap_or_else(|| Path::new("."));

    let occ_path: PathBuf = dir.join(&manifest.occupancy_file);
    let occ = read(&occ_path)?;
    if occ.len() != n {
        return Err(Error::DimensionMismatch {
            file: occ_path,
            expected: n,
            found: occ.len(),
        });
    }
    let occupancy = occ
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Manifest(format!("occupancy byte {other} is not 0/1"))),
        })
        .collect::<Result<Vec<_>>>()?;

    let cost_path: PathBuf = dir.join(&manifest.cost_file);
    let raw = read(&cost_path)?;
    if raw.len() != 4 * n {
        return Err(Error::DimensionMismatch {
            file: cost_path,
            expected: 4 * n,
            found: raw.len(),
        });
    }
    let cost = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();

    let env = Environment::new(
        Vec3::from(manifest.origin),
        manifest.spacing,
        manifest.dims,
        occupancy,
        cost,
        manifest.needle_radius,
        manifest.c_min,
        manifest.c_max,
    )?;
    if env.clamped {
        log::warn!("{}: cost values clamped into [c_min, c_max]", path.display());
    }
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_env(seed: u64) -> Environment {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 16 * 16 * 16;
        let occ = (0..n).map(|_| rng.gen_bool(0.05)).collect();
        let cost = (0..n).map(|_| rng.gen_range(0.01f32..2.0)).collect();
        Environment::new(Vec3::new(-3.0, 1.5, 0.25), 0.75, [16, 16, 16], occ, cost, 1.0, 0.01, 2.0)
            .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let env = random_env(5);
        let path = dir.path().join("scene.json");
        save_env(&env, &path).unwrap();
        let back = load_env(&path).unwrap();
        assert_eq!(back, env);
        assert_eq!(back.digest(), env.digest());
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        save_env(&random_env(6), &path).unwrap();
        let cost = dir.path().join("scene.cost.f32");
        let bytes = fs::read(&cost).unwrap();
        fs::write(&cost, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(load_env(&path), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        save_env(&random_env(7), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap().replace("NVOX1", "NVOX9");
        fs::write(&path, text).unwrap();
        assert!(matches!(load_env(&path), Err(Error::Manifest(_))));
    }

    #[test]
    fn zero_cost_is_clamped_with_flag() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        let env = Environment::uniform(Vec3::zeros(), 1.0, [4, 4, 4], 1.0);
        save_env(&env, &path).unwrap();
        let cost = dir.path().join("scene.cost.f32");
        let mut bytes = fs::read(&cost).unwrap();
        bytes[..4].copy_from_slice(&0.0f32.to_le_bytes());
        fs::write(&cost, bytes).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut m: Manifest = serde_json::from_str(&text).unwrap();
        m.c_min = 0.01;
        fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        let back = load_env(&path).unwrap();
        assert!(back.cost_was_clamped());
        assert_eq!(back.costs()[0], 0.01f32);
    }
}
