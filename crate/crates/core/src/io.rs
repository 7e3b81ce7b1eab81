//! Trajectory CSV files and run manifests.
//!
//! CSV header: `t,x1..xn,xi1..xin,F,omega_xi`; values use 17 significant
//! digits so a write/read cycle reproduces every `f64` exactly.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::euler_lagrange::Gauge;
use crate::ode::{Termination, Tolerances};
use crate::trajectory::{Sample, Trajectory, TrajectoryMeta};

pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=n).map(|i| format!("xi{i}")));
    cols.push("F".into());
    cols.push("omega_xi".into());
    cols.join(",")
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", csv_header(traj.dim()))?;
    for p in &traj.samples {
        let mut row = vec![fmt17(p.t)];
        row.extend(p.x.iter().map(|v| fmt17(*v)));
        row.extend(p.xi.iter().map(|v| fmt17(*v)));
        row.push(fmt17(p.f));
        row.push(fmt17(p.omega_xi));
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory written by [`write_trajectory`]; `F` and `ω(ξ)` are
/// taken from the file.
pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().ok_or_else(|| Error::InvalidInput(format!("{}: empty file", path.display())))??;
    let cols = header.trim().split(',').count();
    if cols < 5 || (cols - 3) % 2 != 0 {
        return Err(Error::InvalidInput(format!("{}: unexpected header `{header}`", path.display())));
    }
    let n = (cols - 3) / 2;
    if header.trim() != csv_header(n) {
        return Err(Error::InvalidInput(format!("{}: expected header `{}`", path.display(), csv_header(n))));
    }
    let mut samples = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidInput(format!("{}: line {}: {e}", path.display(), k + 2)))?;
        if vals.len() != cols {
            return Err(Error::InvalidInput(format!("{}: line {} has {} fields, expected {cols}", path.display(), k + 2, vals.len())));
        }
        samples.push(Sample {
            t: vals[0],
            x: DVector::from_column_slice(&vals[1..1 + n]),
            xi: DVector::from_column_slice(&vals[1 + n..1 + 2 * n]),
            f: vals[1 + 2 * n],
            omega_xi: vals[2 + 2 * n],
        });
    }
    let label = path.file_stem().map_or_else(|| "file".into(), |s| s.to_string_lossy().into_owned());
    Trajectory::from_samples(samples, TrajectoryMeta::from_file(label))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedState {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub model: String,
    /// Canonical configuration text for file-based models.
    pub model_config: Option<String>,
    pub seeds: Vec<SeedState>,
    pub gauge: Option<Gauge>,
    pub tolerances: Option<Tolerances>,
    pub terminations: Vec<Termination>,
    pub outputs: Vec<OutputDigest>,
    pub warnings: Vec<String>,
    /// Command-specific results.
    pub report: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, argv: &[String], model: &str) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            argv: argv.to_vec(),
            model: model.to_string(),
            model_config: None,
            seeds: Vec::new(),
            gauge: None,
            tolerances: None,
            terminations: Vec::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
            report: serde_json::Value::Null,
        }
    }

    /// Records the digest of an output file that already exists.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(OutputDigest { path: path.display().to_string(), sha256: sha256_file(path)? });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }
}

/// `dir/name.csv` → `dir/name.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    output.with_file_name(format!("{stem}.manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cr::heisenberg_kropina;
    use crate::euler_lagrange::{integrate_geodesic, TraceOptions};

    #[test]
    fn csv_round_trip_is_bitwise() {
        let h = heisenberg_kropina(1);
        let traj = integrate_geodesic(&h, &DVector::zeros(3), &DVector::from_vec(vec![1.0, 0.0, 1.0]), &TraceOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        write_trajectory(&traj, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,x1,x2,x3,xi1,xi2,xi3,F,omega_xi\n"));
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 9);
        let back = read_trajectory(&path).unwrap();
        assert_eq!(back.len(), traj.len());
        for (a, b) in traj.samples.iter().zip(&back.samples) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert!(a.x.iter().zip(b.x.iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
            assert!(a.xi.iter().zip(b.xi.iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
            assert_eq!(a.f.to_bits(), b.f.to_bits());
            assert_eq!(a.omega_xi.to_bits(), b.omega_xi.to_bits());
        }
    }

    #[test]
    fn nan_values_survive() {
        let s = crate::geometry::euclidean(2, 0);
        let smp = Sample::new(&s, 0.0, DVector::zeros(2), DVector::from_vec(vec![0.0, 1.0]));
        assert!(smp.f.is_nan());
        let traj = Trajectory::from_samples(vec![smp], TrajectoryMeta::from_file("k")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        write_trajectory(&traj, &path).unwrap();
        assert!(read_trajectory(&path).unwrap().samples[0].f.is_nan());
    }

    #[test]
    fn malformed_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "t,a,b\n0,1,2\n").unwrap();
        assert!(read_trajectory(&path).is_err());
        fs::write(&path, "t,x1,xi1,F,omega_xi\n0,1,2\n").unwrap();
        assert!(read_trajectory(&path).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run.csv");
        fs::write(&out, "abc").unwrap();
        let mut m = RunManifest::new("trace", &["kropina".into(), "trace".into()], "heisenberg:1");
        m.add_output(&out).unwrap();
        assert_eq!(m.outputs[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let mp = manifest_path(&out);
        assert_eq!(mp.file_name().unwrap(), "run.manifest.json");
        m.write(&mp).unwrap();
        assert_eq!(RunManifest::read(&mp).unwrap(), m);
    }
}
