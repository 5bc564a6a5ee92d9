//! Binary persistence for FTTs, SIRTs and DIRTs.
//!
//! Layout: magic `DIRT`, one version byte, a little-endian `u64` manifest
//! length, the JSON manifest, then little-endian `f64` payload. The
//! manifest records shapes and metadata; every number that affects
//! evaluation lives in the payload so loads are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{make_basis, Basis1D, Family};
use crate::dirt::{BridgingSchedule, Dirt};
use crate::error::{Error, Result};
use crate::ftt::Ftt;
use crate::reference::Reference;
use crate::sirt::Sirt;
use crate::targets::TargetSpec;
use crate::tensor::Tensor3;

const MAGIC: &[u8; 4] = b"DIRT";
pub const FORMAT_VERSION: u8 = 1;
/// Refuse manifests larger than this; protects against garbage lengths.
const MAX_MANIFEST: u64 = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Ftt,
    Sirt,
    Dirt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct BasisSpec {
    family: Family,
    n: usize,
    a: f64,
    b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LayerSpec {
    bases: Vec<BasisSpec>,
    ranks: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    kind: Kind,
    layers: Vec<LayerSpec>,
    #[serde(default)]
    reference: Option<Reference>,
    #[serde(default)]
    schedule: Option<BridgingSchedule>,
    #[serde(default)]
    target: Option<TargetSpec>,
}

fn layer_spec(f: &Ftt) -> LayerSpec {
    LayerSpec {
        bases: f
            .bases()
            .iter()
            .map(|b| {
                let (a, bb) = b.domain();
                BasisSpec {
                    family: b.family(),
                    n: b.cardinality(),
                    a,
                    b: bb,
                }
            })
            .collect(),
        ranks: f.ranks(),
    }
}

struct Payload(Vec<u8>);

impl Payload {
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }

    fn tensors(&mut self, ts: &[Tensor3]) {
        for t in ts {
            self.f64s(&t.to_row_major());
        }
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let end = self.pos + 8 * n;
        if end > self.buf.len() {
            return Err(Error::Format("truncated payload".into()));
        }
        let out = self.buf[self.pos..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        self.pos = end;
        Ok(out)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(self.f64s(1)?[0])
    }

    fn tensors(&mut self, spec: &LayerSpec) -> Result<Vec<Tensor3>> {
        let d = spec.bases.len();
        (0..d)
            .map(|k| {
                let (r0, n, r1) = (spec.ranks[k], spec.bases[k].n, spec.ranks[k + 1]);
                Ok(Tensor3::from_row_major(r0, n, r1, &self.f64s(r0 * n * r1)?))
            })
            .collect()
    }
}

fn ftt_payload(p: &mut Payload, f: &Ftt) {
    p.tensors(f.cores());
}

fn sirt_payload(p: &mut Payload, s: &Sirt) {
    ftt_payload(p, s.ftt());
    p.tensors(s.marginal_tensors());
    p.f64s(&[s.z_hat(), s.gamma()]);
}

fn read_ftt_payload(c: &mut Cursor, spec: &LayerSpec) -> Result<Ftt> {
    let d = spec.bases.len();
    if d == 0 || spec.ranks.len() != d + 1 || spec.ranks[0] != 1 || spec.ranks[d] != 1 {
        return Err(Error::Format("inconsistent ranks in manifest".into()));
    }
    let bases = spec
        .bases
        .iter()
        .map(|b| make_basis(b.family, b.n, b.a, b.b))
        .collect::<Result<Vec<Basis1D>>>()?;
    Ftt::new(bases, c.tensors(spec)?)
}

fn read_sirt_payload(c: &mut Cursor, spec: &LayerSpec) -> Result<Sirt> {
    let g = read_ftt_payload(c, spec)?;
    let marg = c.tensors(spec)?;
    let z_hat = c.f64()?;
    let gamma = c.f64()?;
    Sirt::from_parts(g, marg, z_hat, gamma)
}

fn write_file<W: Write>(mut w: W, m: &Manifest, p: &Payload) -> Result<()> {
    let json = serde_json::to_vec(m).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&[FORMAT_VERSION])?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    w.write_all(&p.0)?;
    w.flush()?;
    Ok(())
}

fn read_file<R: Read>(mut r: R, expect: Kind) -> Result<(Manifest, Vec<u8>)> {
    let mut head = [0u8; 13];
    r.read_exact(&mut head)
        .map_err(|_| Error::Format("file too short for header".into()))?;
    if &head[..4] != MAGIC {
        return Err(Error::Format("not a DIRT file (bad magic)".into()));
    }
    if head[4] != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {} (expected {FORMAT_VERSION})",
            head[4]
        )));
    }
    let len = u64::from_le_bytes(head[5..13].try_into().unwrap());
    if len > MAX_MANIFEST {
        return Err(Error::Format(format!("manifest length {len} is implausible")));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json)
        .map_err(|_| Error::Format("truncated manifest".into()))?;
    let m: Manifest = serde_json::from_slice(&json).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    if m.kind != expect {
        return Err(Error::Format(format!("expected a {expect:?} file, found {:?}", m.kind)));
    }
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    Ok((m, payload))
}

fn finish(c: &Cursor) -> Result<()> {
    if c.pos != c.buf.len() {
        return Err(Error::Format(format!("{} trailing bytes", c.buf.len() - c.pos)));
    }
    Ok(())
}

fn single_layer(m: &Manifest) -> Result<&LayerSpec> {
    match m.layers.as_slice() {
        [l] => Ok(l),
        _ => Err(Error::Format("expected exactly one layer".into())),
    }
}

pub fn write_ftt<W: Write>(w: W, f: &Ftt) -> Result<()> {
    let m = Manifest {
        kind: Kind::Ftt,
        layers: vec![layer_spec(f)],
        reference: None,
        schedule: None,
        target: None,
    };
    let mut p = Payload(Vec::new());
    ftt_payload(&mut p, f);
    write_file(w, &m, &p)
}

pub fn read_ftt<R: Read>(r: R) -> Result<Ftt> {
    let (m, buf) = read_file(r, Kind::Ftt)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    let f = read_ftt_payload(&mut c, single_layer(&m)?)?;
    finish(&c)?;
    Ok(f)
}

pub fn write_sirt<W: Write>(w: W, s: &Sirt) -> Result<()> {
    let m = Manifest {
        kind: Kind::Sirt,
        layers: vec![layer_spec(s.ftt())],
        reference: None,
        schedule: None,
        target: None,
    };
    let mut p = Payload(Vec::new());
    sirt_payload(&mut p, s);
    write_file(w, &m, &p)
}

pub fn read_sirt<R: Read>(r: R) -> Result<Sirt> {
    let (m, buf) = read_file(r, Kind::Sirt)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    let s = read_sirt_payload(&mut c, single_layer(&m)?)?;
    finish(&c)?;
    Ok(s)
}

/// Writes a DIRT, optionally with the target it was built for.
pub fn write_dirt<W: Write>(w: W, dirt: &Dirt, target: Option<&TargetSpec>) -> Result<()> {
    let m = Manifest {
        kind: Kind::Dirt,
        layers: dirt.layers().iter().map(|s| layer_spec(s.ftt())).collect(),
        reference: Some(*dirt.reference()),
        schedule: Some(dirt.schedule().clone()),
        target: target.cloned(),
    };
    let mut p = Payload(Vec::new());
    for s in dirt.layers() {
        sirt_payload(&mut p, s);
    }
    p.f64s(dirt.log_shifts());
    write_file(w, &m, &p)
}

pub fn read_dirt<R: Read>(r: R) -> Result<(Dirt, Option<TargetSpec>)> {
    let (m, buf) = read_file(r, Kind::Dirt)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    let layers = m
        .layers
        .iter()
        .map(|l| read_sirt_payload(&mut c, l))
        .collect::<Result<Vec<_>>>()?;
    let shifts = c.f64s(layers.len())?;
    finish(&c)?;
    let reference = m.reference.ok_or_else(|| Error::Format("missing reference".into()))?;
    let schedule = m.schedule.ok_or_else(|| Error::Format("missing schedule".into()))?;
    Ok((Dirt::from_parts(reference, layers, shifts, schedule)?, m.target))
}

pub fn save_dirt(path: &Path, dirt: &Dirt, target: Option<&TargetSpec>) -> Result<()> {
    write_dirt(BufWriter::new(File::create(path)?), dirt, target)
}

pub fn load_dirt(path: &Path) -> Result<(Dirt, Option<TargetSpec>)> {
    read_dirt(BufReader::new(File::open(path)?))
}
