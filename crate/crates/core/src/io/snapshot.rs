//! Field persistence: the `TVF1` binary snapshot, CSV and 8-bit PGM input,
//! and trajectory directories with an index CSV.
//!
//! `TVF1` layout, little endian:
//!
//! ```text
//! b"TVF1" | u32 nx | u32 ny | f64 h | f64 t | nx·ny f64, row-major (i fastest)
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::{ScalarField, Staggering, VectorField};
use crate::grid::Grid2D;
use crate::solver::{identity_ladder, Source, StepLog, Trajectory};

pub const MAGIC: &[u8; 4] = b"TVF1";
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8;

pub const INDEX_FILE: &str = "index.csv";
pub const INDEX_HEADER: &str = "time,filename,gap,dual_x,dual_y";

/// A decoded `TVF1` file.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub t: f64,
    pub values: Vec<f64>,
}

pub fn encode_snapshot(nx: usize, ny: usize, h: f64, t: f64, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), nx * ny, "snapshot values must be nx·ny");
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(nx as u32).to_le_bytes());
    buf.extend_from_slice(&(ny as u32).to_le_bytes());
    buf.extend_from_slice(&h.to_le_bytes());
    buf.extend_from_slice(&t.to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_snapshot(bytes: &[u8], path: &Path) -> Result<Snapshot> {
    let parse = |msg: String| Error::Parse {
        path: path.display().to_string(),
        msg,
    };
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(parse("not a TVF1 snapshot".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let (nx, ny) = (u32_at(4) as usize, u32_at(8) as usize);
    let (h, t) = (f64_at(12), f64_at(20));
    let expected = HEADER_LEN + 8 * nx * ny;
    if bytes.len() != expected {
        return Err(parse(format!(
            "length {} does not match header ({expected} for {nx}x{ny})",
            bytes.len()
        )));
    }
    let values = (0..nx * ny).map(|k| f64_at(HEADER_LEN + 8 * k)).collect();
    Ok(Snapshot {
        nx,
        ny,
        h,
        t,
        values,
    })
}

/// Writes to a sibling temporary file and renames it into place.
/// Writes through a sibling `.tmp` file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_snapshot(path: &Path, u: &ScalarField<f64>, t: f64) -> Result<()> {
    let g = u.grid();
    write_atomic(path, &encode_snapshot(g.nx(), g.ny(), g.h(), t, u.values()))
}

pub fn load_snapshot(path: &Path) -> Result<Snapshot> {
    decode_snapshot(&fs::read(path)?, path)
}

fn mismatch(path: &Path, grid: &Grid2D<f64>, nx: usize, ny: usize) -> Error {
    Error::DimensionMismatch {
        path: path.display().to_string(),
        expected: format!("{}x{}", grid.nx(), grid.ny()),
        found: format!("{nx}x{ny}"),
    }
}

/// Parses `ny` lines of `nx` comma-separated reals; row `j` of the text is
/// row `j` of the field.
pub fn parse_csv_field(text: &str, grid: &Grid2D<f64>, path: &Path) -> Result<ScalarField<f64>> {
    let mut values = Vec::with_capacity(grid.len());
    let mut rows = 0;
    let mut width = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|w| {
                w.trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    msg: format!("line {}: cannot parse `{}`", n + 1, w.trim()),
                })
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    msg: format!("line {}: {} values, expected {w}", n + 1, row.len()),
                })
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let nx = width.unwrap_or(0);
    if nx != grid.nx() || rows != grid.ny() {
        return Err(mismatch(path, grid, nx, rows));
    }
    ScalarField::from_values(grid, values)
}

/// Binary (`P5`) or plain (`P2`) 8-bit PGM, gray levels mapped linearly to
/// `[0, 1]`.
pub fn parse_pgm_field(bytes: &[u8], grid: &Grid2D<f64>, path: &Path) -> Result<ScalarField<f64>> {
    let bad = |msg: &str| Error::Parse {
        path: path.display().to_string(),
        msg: msg.into(),
    };
    let mut pos = 0;
    let mut token = |bytes: &[u8]| -> Option<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token(bytes).ok_or_else(|| bad("empty PGM"))?;
    let mut header = [0usize; 3];
    for slot in &mut header {
        *slot = token(bytes)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("malformed PGM header"))?;
    }
    let [nx, ny, maxval] = header;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit PGM is supported"));
    }
    if nx != grid.nx() || ny != grid.ny() {
        return Err(mismatch(path, grid, nx, ny));
    }
    let scale = 1.0 / maxval as f64;
    let levels: Vec<u8> = match magic.as_str() {
        "P5" => {
            let data = &bytes[(pos + 1).min(bytes.len())..];
            if data.len() < nx * ny {
                return Err(bad("truncated PGM raster"));
            }
            data[..nx * ny].to_vec()
        }
        "P2" => (0..nx * ny)
            .map(|_| {
                token(bytes)
                    .and_then(|t| t.parse::<u8>().ok())
                    .ok_or_else(|| bad("malformed PGM raster"))
            })
            .collect::<Result<_>>()?,
        _ => return Err(bad("not a PGM file")),
    };
    let values = levels.iter().map(|&l| l as f64 * scale).collect();
    ScalarField::from_values(grid, values)
}

/// Loads a field for `grid` from a `TVF1`, PGM or CSV file, chosen by
/// content.
pub fn load_field(path: &Path, grid: &Grid2D<f64>) -> Result<ScalarField<f64>> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        let s = decode_snapshot(&bytes, path)?;
        if s.nx != grid.nx() || s.ny != grid.ny() {
            return Err(mismatch(path, grid, s.nx, s.ny));
        }
        return ScalarField::from_values(grid, s.values);
    }
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        return parse_pgm_field(&bytes, grid, path);
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::Parse {
        path: path.display().to_string(),
        msg: "not UTF-8 text".into(),
    })?;
    parse_csv_field(&text, grid, path)
}

fn snapshot_name(m: usize) -> String {
    format!("u_{m:05}.tvf")
}

/// One `TVF1` file per state and per dual component (extended layout, so
/// `(nx+1)×(ny+1)`), plus `index.csv`.
pub fn save_trajectory(dir: &Path, traj: &Trajectory<f64>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let g = traj.grid();
    let mut index = format!("{INDEX_HEADER}\n");
    let mut gaps = traj.step_log().iter().peekable();
    for (m, ((t, u), z)) in traj
        .times()
        .iter()
        .zip(traj.states())
        .zip(traj.duals())
        .enumerate()
    {
        let name = snapshot_name(m);
        save_snapshot(&dir.join(&name), u, *t)?;
        let (ex, ey) = z.dims();
        let zx_name = format!("zx_{m:05}.tvf");
        let zy_name = format!("zy_{m:05}.tvf");
        write_atomic(
            &dir.join(&zx_name),
            &encode_snapshot(ex, ey, g.h(), *t, z.xs()),
        )?;
        write_atomic(
            &dir.join(&zy_name),
            &encode_snapshot(ex, ey, g.h(), *t, z.ys()),
        )?;
        let mut gap = 0.0;
        while let Some(s) = gaps.peek() {
            if s.time > *t + 1e-12 * traj.tau() {
                break;
            }
            gap = s.gap;
            gaps.next();
        }
        index.push_str(&format!("{t},{name},{gap:e},{zx_name},{zy_name}\n"));
    }
    write_atomic(&dir.join(INDEX_FILE), index.as_bytes())
}

/// Reads a directory written by [`save_trajectory`]. The ladder is the
/// identity on the first stored state and `f`.
pub fn load_trajectory(dir: &Path, f: &Source<f64>) -> Result<Trajectory<f64>> {
    let index_path = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&index_path)?;
    let bad = |msg: String| Error::Parse {
        path: index_path.display().to_string(),
        msg,
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(INDEX_HEADER) {
        return Err(bad(format!("expected header `{INDEX_HEADER}`")));
    }
    let grid = f.grid().clone();
    let (mut times, mut states, mut duals, mut log) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(bad(format!("row {}: expected 5 columns", n + 2)));
        }
        let t: f64 = cols[0]
            .parse()
            .map_err(|_| bad(format!("row {}: bad time", n + 2)))?;
        let gap: f64 = cols[2]
            .parse()
            .map_err(|_| bad(format!("row {}: bad gap", n + 2)))?;
        let u = load_field(&dir.join(cols[1]), &grid)?;
        let zx = load_snapshot(&dir.join(cols[3]))?;
        let zy = load_snapshot(&dir.join(cols[4]))?;
        let (ex, ey) = Staggering::Extended.dims(grid.nx(), grid.ny());
        for (s, name) in [(&zx, cols[3]), (&zy, cols[4])] {
            if s.nx != ex || s.ny != ey {
                return Err(Error::DimensionMismatch {
                    path: dir.join(name).display().to_string(),
                    expected: format!("{ex}x{ey}"),
                    found: format!("{}x{}", s.nx, s.ny),
                });
            }
        }
        let z = VectorField::from_components(&grid, Staggering::Extended, zx.values, zy.values)?;
        if t > 0.0 {
            log.push(StepLog {
                step: log.len() + 1,
                time: t,
                iters: 0,
                gap,
            });
        }
        times.push(t);
        states.push(u);
        duals.push(z);
    }
    if states.is_empty() {
        return Err(bad("no snapshots".into()));
    }
    let tau = match times.as_slice() {
        [a, b, ..] => b - a,
        _ => 0.0,
    };
    let ladder = identity_ladder(f, &states[0]);
    Trajectory::new(tau, times, states, duals, ladder, log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_field, Shape};
    use crate::solver::{evolve, SolveConfig};
    use proptest::prelude::*;

    #[test]
    fn two_by_two_zero_field_is_sixty_bytes() {
        let g = Grid2D::new(2, 2, 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.tvf");
        save_snapshot(&p, &ScalarField::zeros(&g), 0.0).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 60);
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"TVF1");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &0.5f64.to_le_bytes());
    }

    #[test]
    fn csv_examples() {
        let g = Grid2D::new(2, 2, 0.5).unwrap();
        let p = Path::new("mem.csv");
        let u = parse_csv_field("0,1\n2,3\n", &g, p).unwrap();
        assert_eq!(u.values(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(u.get(1, 0), 1.0);
        assert!(matches!(
            parse_csv_field("0,1,2\n3,4,5\n", &g, p),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            parse_csv_field("0,x\n2,3\n", &g, p),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_csv_field("0,1\n2\n", &g, p),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn pgm_maps_to_unit_interval() {
        let g = Grid2D::new(2, 2, 0.5).unwrap();
        let p = Path::new("mem.pgm");
        let mut raw = b"P5\n# two by two\n2 2\n255\n".to_vec();
        raw.extend_from_slice(&[0, 51, 255, 102]);
        let u = parse_pgm_field(&raw, &g, p).unwrap();
        assert_eq!(u.values(), &[0.0, 0.2, 1.0, 0.4]);
        let plain = parse_pgm_field(b"P2 2 2 255\n0 51\n255 102\n", &g, p).unwrap();
        assert_eq!(plain, u);
        assert!(matches!(
            parse_pgm_field(b"P2 3 2 255\n0 0 0 0 0 0\n", &g, p),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(parse_pgm_field(b"P5 2 2 65535\n", &g, p).is_err());
    }

    #[test]
    fn load_dispatches_on_content() {
        let g = Grid2D::<f64>::new(3, 2, 0.25).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let u = make_field(&g, &Shape::random(5)).unwrap();
        let p = dir.path().join("u.bin");
        save_snapshot(&p, &u, 1.5).unwrap();
        assert_eq!(load_field(&p, &g).unwrap(), u);
        assert_eq!(load_snapshot(&p).unwrap().t, 1.5);
        let other = Grid2D::new(2, 3, 0.25).unwrap();
        assert!(matches!(
            load_field(&p, &other),
            Err(Error::DimensionMismatch { .. })
        ));
        let c = dir.path().join("u.csv");
        fs::write(&c, "1,2,3\n4,5,6\n").unwrap();
        assert_eq!(load_field(&c, &g).unwrap().get(2, 1), 6.0);
        assert!(matches!(
            load_field(&dir.path().join("missing"), &g),
            Err(Error::Io(_))
        ));
        let mut bad = fs::read(&p).unwrap();
        bad.pop();
        assert!(matches!(
            decode_snapshot(&bad, &p),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn trajectory_directory_round_trip() {
        let g = Grid2D::<f64>::unit_square(8).unwrap();
        let u0 = make_field(&g, &Shape::disk(0.5, 0.5, 0.3, 1.0)).unwrap();
        let traj = evolve(&SolveConfig::new(u0, 0.03, 0.01)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_trajectory(dir.path(), &traj).unwrap();
        let index = fs::read_to_string(dir.path().join(INDEX_FILE)).unwrap();
        assert_eq!(index.lines().count(), 1 + traj.len());
        let back = load_trajectory(dir.path(), traj.source()).unwrap();
        assert_eq!(back.states(), traj.states());
        assert_eq!(back.duals(), traj.duals());
        assert_eq!(back.times(), traj.times());
        for (a, b) in back.step_log().iter().zip(traj.step_log()) {
            assert_eq!(a.gap, b.gap);
        }
    }

    proptest! {
        #[test]
        fn snapshot_bytes_round_trip(
            nx in 1usize..6, ny in 1usize..6, h in 1e-3..1.0f64, t in 0.0..10.0f64,
            seed in any::<u64>()
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..nx * ny).map(|_| f64::from_bits(rng.gen::<u64>() >> 2)).collect();
            let bytes = encode_snapshot(nx, ny, h, t, &values);
            let s = decode_snapshot(&bytes, Path::new("mem")).unwrap();
            prop_assert_eq!(s.nx, nx);
            prop_assert_eq!(s.h.to_bits(), h.to_bits());
            prop_assert_eq!(s.t.to_bits(), t.to_bits());
            let same = s.values.iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }
    }
}
