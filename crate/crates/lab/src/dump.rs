//! Binary dump and load of environments and lattices, for reproducibility
//! debugging.
//!
//! Both formats share one little-endian container: a 4-byte magic, a `u32`
//! version, `u64` fields `m`, `n`, `flags`, `seed`, two `f64` fields
//! `theta` and `mu`, then the payload arrays in declared order.
//!
//! * Magic `LGPE` (environments): the payload is the three weight arrays
//!   `log_u0` (length `m + 1`), `log_v0` (length `n + 1`), `log_y` (length
//!   `(m + 1) (n + 1)`, row-major, unused index-0 entries zero). Flag bit 0
//!   marks a boundary environment; bulk-only dumps store zeroed axis arrays
//!   and a NaN `theta`. `seed` records the master seed the weights were
//!   drawn from (the stream id is not part of the container).
//! * Magic `LGPZ` (lattices): the payload is the single `logz` array of the
//!   covered sub-rectangle; `flags` packs the start corner as
//!   `start_i << 32 | start_j`, and `theta`/`mu` are NaN.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use polymer_core::lattice::LogZLattice;
use polymer_core::{Environment, ModelParams};

use crate::LabError;

const VERSION: u32 = 1;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LabError> {
        if self.pos + n > self.buf.len() {
            return Err(LabError::Format(String::from("dump file truncated")));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, LabError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, LabError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, LabError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_array(&mut self, len: usize) -> Result<Vec<f64>, LabError> {
        let raw = self.take(len * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn write_header(
    out: &mut impl Write,
    magic: &[u8; 4],
    m: u64,
    n: u64,
    flags: u64,
    seed: u64,
    theta: f64,
    mu: f64,
) -> io::Result<()> {
    out.write_all(magic)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&m.to_le_bytes())?;
    out.write_all(&n.to_le_bytes())?;
    out.write_all(&flags.to_le_bytes())?;
    out.write_all(&seed.to_le_bytes())?;
    out.write_all(&theta.to_le_bytes())?;
    out.write_all(&mu.to_le_bytes())?;
    Ok(())
}

fn write_f64s(out: &mut impl Write, xs: &[f64]) -> io::Result<()> {
    for x in xs {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Writes an environment to `path` in the `LGPE` container.
pub fn write_environment(path: &Path, env: &Environment) -> Result<(), LabError> {
    let (m, n) = (env.m(), env.n());
    let boundary = env.has_boundary();
    let mut log_u0 = vec![0.0; m + 1];
    let mut log_v0 = vec![0.0; n + 1];
    if boundary {
        for (i, slot) in log_u0.iter_mut().enumerate().skip(1) {
            *slot = env.log_u0(i);
        }
        for (j, slot) in log_v0.iter_mut().enumerate().skip(1) {
            *slot = env.log_v0(j);
        }
    }
    let mut log_y = vec![0.0; (m + 1) * (n + 1)];
    for i in 1..=m {
        for j in 1..=n {
            log_y[i * (n + 1) + j] = env.log_y(i, j);
        }
    }
    let theta = match env.params() {
        Some(p) => p.theta(),
        None => f64::NAN,
    };
    let mut out = Vec::with_capacity(48 + 8 * (log_u0.len() + log_v0.len() + log_y.len()));
    write_header(
        &mut out,
        b"LGPE",
        m as u64,
        n as u64,
        u64::from(boundary),
        env.master_seed(),
        theta,
        env.mu(),
    )
    .expect("writing to a Vec cannot fail");
    write_f64s(&mut out, &log_u0).expect("writing to a Vec cannot fail");
    write_f64s(&mut out, &log_v0).expect("writing to a Vec cannot fail");
    write_f64s(&mut out, &log_y).expect("writing to a Vec cannot fail");
    fs::write(path, out)?;
    Ok(())
}

/// Reads an environment written by [`write_environment`].
pub fn read_environment(path: &Path) -> Result<Environment, LabError> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.take(4)? != b"LGPE" {
        return Err(LabError::Format(String::from("not an LGPE file")));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(LabError::Format(format!(
            "unsupported LGPE version {version}"
        )));
    }
    let m = cur.u64()? as usize;
    let n = cur.u64()? as usize;
    let flags = cur.u64()?;
    let _seed = cur.u64()?;
    let theta = cur.f64()?;
    let mu = cur.f64()?;
    let log_u0 = cur.f64_array(m + 1)?;
    let log_v0 = cur.f64_array(n + 1)?;
    let log_y = cur.f64_array((m + 1) * (n + 1))?;
    let env = if flags & 1 == 1 {
        let params = ModelParams::new(theta, mu)
            .map_err(|e| LabError::Format(format!("bad parameters in LGPE header: {e}")))?;
        Environment::from_boundary_parts(params, m, n, log_u0, log_v0, log_y)
            .map_err(|e| LabError::Format(format!("inconsistent LGPE payload: {e}")))?
    } else {
        Environment::from_bulk_parts(mu, m, n, log_y)
            .map_err(|e| LabError::Format(format!("inconsistent LGPE payload: {e}")))?
    };
    Ok(env)
}

/// Writes a lattice to `path` in the `LGPZ` container.
pub fn write_lattice(path: &Path, lat: &LogZLattice) -> Result<(), LabError> {
    let (si, sj) = lat.start();
    let (m, n) = (lat.m(), lat.n());
    let mut logz = Vec::with_capacity((m - si + 1) * (n - sj + 1));
    for i in si..=m {
        for j in sj..=n {
            logz.push(lat.at(i, j));
        }
    }
    let flags = ((si as u64) << 32) | sj as u64;
    let mut out = Vec::with_capacity(48 + 8 * logz.len());
    write_header(
        &mut out,
        b"LGPZ",
        m as u64,
        n as u64,
        flags,
        0,
        f64::NAN,
        f64::NAN,
    )
    .expect("writing to a Vec cannot fail");
    write_f64s(&mut out, &logz).expect("writing to a Vec cannot fail");
    fs::write(path, out)?;
    Ok(())
}

/// Reads a lattice written by [`write_lattice`], returning the start corner
/// and the `logz` values row-major over the covered sub-rectangle.
pub fn read_lattice(path: &Path) -> Result<LatticeDump, LabError> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.take(4)? != b"LGPZ" {
        return Err(LabError::Format(String::from("not an LGPZ file")));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(LabError::Format(format!(
            "unsupported LGPZ version {version}"
        )));
    }
    let m = cur.u64()? as usize;
    let n = cur.u64()? as usize;
    let flags = cur.u64()?;
    let _seed = cur.u64()?;
    let _theta = cur.f64()?;
    let _mu = cur.f64()?;
    let start_i = (flags >> 32) as usize;
    let start_j = (flags & 0xffff_ffff) as usize;
    if start_i > m || start_j > n {
        return Err(LabError::Format(String::from(
            "LGPZ start corner outside the rectangle",
        )));
    }
    let logz = cur.f64_array((m - start_i + 1) * (n - start_j + 1))?;
    Ok(LatticeDump {
        m,
        n,
        start_i,
        start_j,
        logz,
    })
}

/// Contents of an `LGPZ` file.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDump {
    /// Horizontal extent of the rectangle.
    pub m: usize,
    /// Vertical extent of the rectangle.
    pub n: usize,
    /// First covered row index.
    pub start_i: usize,
    /// First covered column index.
    pub start_j: usize,
    /// Log partition values, row-major over the covered sub-rectangle.
    pub logz: Vec<f64>,
}

impl LatticeDump {
    /// Value at `(i, j)` of the covered sub-rectangle.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        assert!(self.start_i <= i && i <= self.m && self.start_j <= j && j <= self.n);
        self.logz[(i - self.start_i) * (self.n - self.start_j + 1) + (j - self.start_j)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use polymer_core::lattice::{bulk_logz, forward_logz};
    use polymer_core::randenv::{build_bulk_env, build_env};
    use polymer_core::RngStream;

    fn params() -> ModelParams {
        ModelParams::new(0.8, 2.0).unwrap()
    }

    #[test]
    fn environment_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("env.lgpe");
        let mut rng = RngStream::new(31, 5);
        let env = build_env(7, 4, params(), &mut rng).unwrap();
        write_environment(&path, &env).unwrap();
        let back = read_environment(&path).unwrap();
        assert_eq!(back.m(), 7);
        assert_eq!(back.n(), 4);
        assert!(back.has_boundary());
        let p = back.params().unwrap();
        assert_eq!(p.theta(), 0.8);
        assert_eq!(p.mu(), 2.0);
        for i in 1..=7 {
            assert_eq!(back.log_u0(i).to_bits(), env.log_u0(i).to_bits());
        }
        for j in 1..=4 {
            assert_eq!(back.log_v0(j).to_bits(), env.log_v0(j).to_bits());
        }
        for i in 1..=7 {
            for j in 1..=4 {
                assert_eq!(back.log_y(i, j).to_bits(), env.log_y(i, j).to_bits());
            }
        }
        let a = forward_logz(&env).unwrap();
        let b = forward_logz(&back).unwrap();
        assert_eq!(a.corner().to_bits(), b.corner().to_bits());
    }

    #[test]
    fn bulk_environment_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bulk.lgpe");
        let mut rng = RngStream::new(32, 0);
        let env = build_bulk_env(5, 6, 1.5, &mut rng).unwrap();
        write_environment(&path, &env).unwrap();
        let back = read_environment(&path).unwrap();
        assert!(!back.has_boundary());
        assert_eq!(back.mu(), 1.5);
        for i in 1..=5 {
            for j in 1..=6 {
                assert_eq!(back.log_y(i, j).to_bits(), env.log_y(i, j).to_bits());
            }
        }
    }

    #[test]
    fn lattice_round_trip_preserves_start_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lat.lgpz");
        let mut rng = RngStream::new(33, 0);
        let env = build_env(6, 6, params(), &mut rng).unwrap();
        let lat = bulk_logz(&env, (2, 3)).unwrap();
        write_lattice(&path, &lat).unwrap();
        let dump = read_lattice(&path).unwrap();
        assert_eq!((dump.start_i, dump.start_j), (2, 3));
        assert_eq!((dump.m, dump.n), (6, 6));
        for i in 2..=6 {
            for j in 3..=6 {
                assert_eq!(dump.at(i, j).to_bits(), lat.at(i, j).to_bits());
            }
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let env_path = dir.path().join("env.lgpe");
        let lat_path = dir.path().join("lat.lgpz");
        let mut rng = RngStream::new(34, 0);
        let env = build_env(3, 3, params(), &mut rng).unwrap();
        write_environment(&env_path, &env).unwrap();
        assert!(read_lattice(&env_path).is_err());
        let lat = forward_logz(&env).unwrap();
        write_lattice(&lat_path, &lat).unwrap();
        assert!(read_environment(&lat_path).is_err());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("env.lgpe");
        let mut rng = RngStream::new(35, 0);
        let env = build_env(3, 3, params(), &mut rng).unwrap();
        write_environment(&path, &env).unwrap();
        let full = fs::read(&path).unwrap();
        fs::write(&path, &full[..full.len() - 9]).unwrap();
        assert!(read_environment(&path).is_err());
    }
}
