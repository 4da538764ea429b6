//! Binary snapshots.
//!
//! Layout, all little-endian: 16-byte magic, regime tag (u8), nx, ny, nz
//! (u32 each), time (f64), then the fields as f64 in storage order. Viscous
//! states store the surface variable, v_x, v_y; free-boundary states store
//! v_x, v_y, then Z.

use std::fs;
use std::path::Path;

use crate::field::{Field2, Field3, VecField3};
use crate::free_boundary::FbState;
use crate::grid::Grid;
use crate::params::Regime;
use crate::state::PrimState;

use super::{IoError, IoResult};

pub const MAGIC: &[u8; 16] = b"CPESIM01LE\0\0\0\0\0\0";
const MAGIC_BE: &[u8; 16] = b"CPESIM01BE\0\0\0\0\0\0";
const HEADER_LEN: usize = 16 + 1 + 12 + 8;

#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Prim { regime: Regime, state: PrimState },
    Fb(FbState),
}

impl Snapshot {
    pub fn regime(&self) -> Regime {
        match self {
            Snapshot::Prim { regime, .. } => *regime,
            Snapshot::Fb(_) => Regime::FreeBoundary,
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            Snapshot::Prim { state, .. } => state.time,
            Snapshot::Fb(s) => s.time,
        }
    }

    fn dims(&self) -> (usize, usize, usize) {
        let v = match self {
            Snapshot::Prim { state, .. } => &state.v,
            Snapshot::Fb(s) => &s.v,
        };
        (v.x.nx, v.x.ny, v.x.nz)
    }
}

fn put(buf: &mut Vec<u8>, data: &[f64]) {
    for x in data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

/// Serializes a snapshot to bytes.
pub fn encode(snap: &Snapshot) -> Vec<u8> {
    let (nx, ny, nz) = snap.dims();
    let n3 = nx * ny * nz;
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * (2 * n3 + nx * ny));
    buf.extend_from_slice(MAGIC);
    buf.push(snap.regime().tag());
    for d in [nx, ny, nz] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    buf.extend_from_slice(&snap.time().to_le_bytes());
    match snap {
        Snapshot::Prim { state, .. } => {
            put(&mut buf, &state.surface_var.data);
            put(&mut buf, &state.v.x.data);
            put(&mut buf, &state.v.y.data);
        }
        Snapshot::Fb(s) => {
            put(&mut buf, &s.v.x.data);
            put(&mut buf, &s.v.y.data);
            put(&mut buf, &s.height.data);
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8], String> {
        if self.bytes.len() - self.pos < n {
            return Err(format!(
                "truncated at byte offset {} while reading {what} ({} bytes needed, {} available)",
                self.bytes.len(),
                n,
                self.bytes.len() - self.pos
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>, String> {
        let raw = self.take(8 * n, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Parses bytes produced by [`encode`].
pub fn decode(bytes: &[u8]) -> Result<Snapshot, String> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(16, "magic")?;
    if magic == MAGIC_BE {
        return Err("big-endian snapshot variant is not supported".into());
    }
    if magic != MAGIC {
        return Err("not a snapshot (magic mismatch)".into());
    }
    let tag = r.take(1, "regime tag")?[0];
    let regime = Regime::from_tag(tag).ok_or_else(|| format!("unknown regime tag {tag}"))?;
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        *d = u32::from_le_bytes(r.take(4, "grid dimensions")?.try_into().unwrap()) as usize;
    }
    let [nx, ny, nz] = dims;
    let grid = Grid::new(nx, ny, nz).map_err(|e| format!("bad dimensions: {e}"))?;
    let time = f64::from_le_bytes(r.take(8, "time")?.try_into().unwrap());
    let n2 = grid.plane_len();
    let n3 = grid.len3();
    let field3 = |data: Vec<f64>| Field3 { nx, ny, nz, data };
    let snap = match regime {
        Regime::FreeBoundary => {
            let vx = r.f64s(n3, "v_x")?;
            let vy = r.f64s(n3, "v_y")?;
            let h = r.f64s(n2, "Z")?;
            Snapshot::Fb(FbState {
                height: Field2 { nx, ny, data: h },
                v: VecField3 {
                    x: field3(vx),
                    y: field3(vy),
                },
                time,
            })
        }
        _ => {
            let s = r.f64s(n2, "surface variable")?;
            let vx = r.f64s(n3, "v_x")?;
            let vy = r.f64s(n3, "v_y")?;
            Snapshot::Prim {
                regime,
                state: PrimState {
                    surface_var: Field2 { nx, ny, data: s },
                    v: VecField3 {
                        x: field3(vx),
                        y: field3(vy),
                    },
                    time,
                },
            }
        }
    };
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes after offset {}", bytes.len() - r.pos, r.pos));
    }
    Ok(snap)
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> IoResult<()> {
    fs::write(path, encode(snap)).map_err(|e| IoError::file(path, e))
}

pub fn read_snapshot(path: &Path) -> IoResult<Snapshot> {
    let bytes = fs::read(path).map_err(|e| IoError::file(path, e))?;
    decode(&bytes).map_err(|m| IoError::format(path, m))
}

/// Reads a snapshot and checks it against the expected regime and grid.
pub fn read_snapshot_for(path: &Path, regime: Regime, grid: &Grid) -> IoResult<Snapshot> {
    let snap = read_snapshot(path)?;
    if snap.regime() != regime {
        return Err(IoError::format(
            path,
            format!("snapshot regime {} does not match {regime}", snap.regime()),
        ));
    }
    let (nx, ny, nz) = snap.dims();
    if (nx, ny, nz) != (grid.nx, grid.ny, grid.nz) {
        return Err(IoError::format(
            path,
            format!(
                "dimension mismatch: snapshot is {nx}x{ny}x{nz}, config is {}x{}x{}",
                grid.nx, grid.ny, grid.nz
            ),
        ));
    }
    Ok(snap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(seed: u64) -> Snapshot {
        let g = Grid::new(4, 6, 3).unwrap();
        let f = |k: f64| Field3::from_fn(&g, move |x, y, z| (k * x + 3.0 * y - z).sin() / 3.0);
        Snapshot::Prim {
            regime: Regime::VacuumNoGravity,
            state: PrimState {
                surface_var: Field2::from_fn(&g, |x, y| x * y + seed as f64),
                v: VecField3 { x: f(1.0), y: f(2.0) },
                time: 0.125 + seed as f64,
            },
        }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let s = sample(1);
        write_snapshot(&path, &s).unwrap();
        assert_eq!(read_snapshot(&path).unwrap(), s);
        let g = Grid::new(4, 4, 3).unwrap();
        let fb = Snapshot::Fb(FbState {
            height: Field2::constant(&g, 1.5),
            v: VecField3::from_fn(&g, |x, _, z| (x, z)),
            time: 3.0,
        });
        assert_eq!(decode(&encode(&fb)).unwrap(), fb);
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode(&sample(0));
        let cut = &bytes[..HEADER_LEN + 20];
        let err = decode(cut).unwrap_err();
        assert!(err.contains(&format!("byte offset {}", HEADER_LEN + 20)), "{err}");
        assert!(err.contains("surface variable"));
        let err = decode(&bytes[..10]).unwrap_err();
        assert!(err.contains("byte offset 10") && err.contains("magic"), "{err}");
    }

    #[test]
    fn rejects_foreign_magic_and_dims() {
        let mut bytes = encode(&sample(0));
        bytes[8..10].copy_from_slice(b"BE");
        assert!(decode(&bytes).unwrap_err().contains("big-endian"));
        bytes[0] = b'X';
        assert!(decode(&bytes).unwrap_err().contains("magic"));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        write_snapshot(&path, &sample(0)).unwrap();
        let g = Grid::new(4, 4, 3).unwrap();
        let err = read_snapshot_for(&path, Regime::VacuumNoGravity, &g).unwrap_err().to_string();
        assert!(err.contains("dimension mismatch"), "{err}");
        let g = Grid::new(4, 6, 3).unwrap();
        assert!(read_snapshot_for(&path, Regime::GravityGamma2, &g).is_err());
        assert!(read_snapshot_for(&path, Regime::VacuumNoGravity, &g).is_ok());
        let mut extra = encode(&sample(0));
        extra.push(0);
        assert!(decode(&extra).unwrap_err().contains("trailing"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn arbitrary_bits_survive(vals in proptest::collection::vec(any::<u64>(), 4 * 4 * 3 * 2 + 16), t in any::<u64>()) {
            let g = Grid::new(4, 4, 3).unwrap();
            let n3 = g.len3();
            let f = |o: usize, n: usize| vals[o..o + n].iter().map(|b| f64::from_bits(*b)).collect::<Vec<f64>>();
            let snap = Snapshot::Prim {
                regime: Regime::GravityGamma2,
                state: PrimState {
                    surface_var: Field2::from_vec(&g, f(0, 16)).unwrap(),
                    v: VecField3 {
                        x: Field3::from_vec(&g, f(16, n3)).unwrap(),
                        y: Field3::from_vec(&g, f(16 + n3, n3)).unwrap(),
                    },
                    time: f64::from_bits(t),
                },
            };
            let bytes = encode(&snap);
            let back = decode(&bytes).unwrap();
            prop_assert_eq!(encode(&back), bytes);
        }
    }
}
