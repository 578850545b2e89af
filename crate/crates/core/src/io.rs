//! Text and binary persistence: field CSV, snapshot directories and model
//! bundles.
//!
//! Every CSV starts with a header row naming the columns followed by one
//! `#` comment row carrying caller-supplied metadata. Floats are written in
//! shortest round-trip form, so text files reload bit-exactly too.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::eim::EimModel;
use crate::error::{Error, Result};
use crate::field::{Field, Grid, Product, SubdomainMask};
use crate::geim::GeimModel;
use crate::pde::{ParamPoint, SnapshotSet};
use crate::sensors::{Sensor, SensorKind};

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;
pub const BUNDLE_FORMAT_VERSION: u32 = 1;
const BUNDLE_MAGIC: &[u8; 8] = b"GEIMBNDL";
const MANIFEST: &str = "manifest.csv";

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// Data lines of a CSV: the header is returned separately, comment rows and
/// blank lines are dropped.
fn csv_lines(text: &str) -> Result<(&str, Vec<&str>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| fmt_err("empty CSV"))?;
    Ok((header, lines.filter(|l| !l.starts_with('#')).collect()))
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| fmt_err(format!("cannot parse {what} from `{s}`")))
}

/// Builds a CSV document from a header, a comment and rows.
pub fn csv_document(header: &[&str], comment: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    let _ = writeln!(out, "# {comment}");
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

const FIELD_HEADER: [&str; 7] = ["nx", "ny", "x_min", "x_max", "y_min", "y_max", "interface_x"];

/// Field as CSV: grid row, then one value per line in row-major order.
pub fn field_to_csv(f: &Field, comment: &str) -> String {
    let g = f.grid();
    let [a, b, c, d] = g.bounds();
    let mut out = csv_document(
        &FIELD_HEADER,
        comment,
        &[vec![
            g.nx().to_string(),
            g.ny().to_string(),
            a.to_string(),
            b.to_string(),
            c.to_string(),
            d.to_string(),
            g.interface_x().to_string(),
        ]],
    );
    for v in f.values() {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn field_from_csv(text: &str) -> Result<Field> {
    let (header, lines) = csv_lines(text)?;
    if header.split(',').map(str::trim).ne(FIELD_HEADER) {
        return Err(fmt_err(format!("unexpected field header `{header}`")));
    }
    let (first, values) = lines.split_first().ok_or_else(|| fmt_err("missing grid row"))?;
    let cols: Vec<&str> = first.split(',').collect();
    if cols.len() != 7 {
        return Err(fmt_err("grid row needs 7 columns"));
    }
    let bounds = [
        parse(cols[2], "x_min")?,
        parse(cols[3], "x_max")?,
        parse(cols[4], "y_min")?,
        parse(cols[5], "y_max")?,
    ];
    let grid = Grid::new(parse(cols[0], "nx")?, parse(cols[1], "ny")?, bounds, parse(cols[6], "interface_x")?)?;
    let vals = values
        .iter()
        .map(|l| parse::<f64>(l, "value"))
        .collect::<Result<Vec<_>>>()?;
    Field::new(grid, vals)
}

pub fn write_field(path: &Path, f: &Field, comment: &str) -> Result<()> {
    fs::write(path, field_to_csv(f, comment))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Field> {
    field_from_csv(&fs::read_to_string(path)?)
}

fn snapshot_file(i: usize) -> String {
    format!("snapshot_{i:05}.csv")
}

/// Writes `manifest.csv` plus one field file per snapshot into `dir`.
pub fn save_snapshots(dir: &Path, set: &SnapshotSet, comment: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let rows: Vec<Vec<String>> = set
        .params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            vec![
                i.to_string(),
                p.alpha.to_string(),
                p.beta.to_string(),
                p.gamma.to_string(),
                snapshot_file(i),
            ]
        })
        .collect();
    let meta = format!("format_version={SNAPSHOT_FORMAT_VERSION} {comment}");
    fs::write(
        dir.join(MANIFEST),
        csv_document(&["index", "alpha", "beta", "gamma", "file"], &meta, &rows),
    )?;
    for (i, f) in set.fields.iter().enumerate() {
        write_field(&dir.join(snapshot_file(i)), f, comment)?;
    }
    Ok(())
}

/// Reads a directory written by [`save_snapshots`]. Parameter ranges are
/// not stored and come back as `None`.
pub fn load_snapshots(dir: &Path) -> Result<SnapshotSet> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let version = text
        .lines()
        .find(|l| l.starts_with('#'))
        .and_then(|l| l.split_whitespace().find_map(|w| w.strip_prefix("format_version=")))
        .ok_or_else(|| fmt_err("manifest has no format_version"))?;
    if parse::<u32>(version, "format_version")? != SNAPSHOT_FORMAT_VERSION {
        return Err(fmt_err(format!("unsupported snapshot format version {version}")));
    }
    let (_, lines) = csv_lines(&text)?;
    let mut params = Vec::with_capacity(lines.len());
    let mut fields: Vec<Field> = Vec::with_capacity(lines.len());
    for (row, l) in lines.iter().enumerate() {
        let c: Vec<&str> = l.split(',').collect();
        if c.len() != 5 || parse::<usize>(c[0], "index")? != row {
            return Err(fmt_err(format!("bad manifest row `{l}`")));
        }
        params.push(ParamPoint::new(parse(c[1], "alpha")?, parse(c[2], "beta")?, parse(c[3], "gamma")?));
        let f = read_field(&dir.join(c[4].trim()))?;
        if let Some(first) = fields.first() {
            f.same_grid(first)?;
        }
        fields.push(f);
    }
    let grid = *fields.first().ok_or_else(|| fmt_err("empty snapshot set"))?.grid();
    Ok(SnapshotSet {
        grid,
        ranges: None,
        params,
        fields,
    })
}

struct Encoder(Vec<u8>);

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usizes(&mut self, v: &[usize]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.usize(x));
    }
    fn f64s(&mut self, v: &[f64]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
    fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn grid(&mut self, g: &Grid) {
        self.usize(g.nx());
        self.usize(g.ny());
        g.bounds().iter().for_each(|&b| self.f64(b));
        self.usize(g.interface_col());
    }
    fn matrix(&mut self, b: &DMatrix<f64>) {
        self.usize(b.nrows());
        self.usize(b.ncols());
        b.iter().for_each(|&v| self.f64(v));
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| fmt_err("truncated bundle"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| fmt_err("count overflows usize"))
    }
    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(fmt_err("length prefix exceeds bundle size"));
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.usize()).collect()
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String> {
        let n = self.len(1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| fmt_err("invalid UTF-8 in bundle"))
    }
    fn grid(&mut self) -> Result<Grid> {
        let nx = self.usize()?;
        let ny = self.usize()?;
        let bounds = [self.f64()?, self.f64()?, self.f64()?, self.f64()?];
        let col = self.usize()?;
        let hx = (bounds[1] - bounds[0]) / (nx.max(2) - 1) as f64;
        let g = Grid::new(nx, ny, bounds, bounds[0] + col as f64 * hx)?;
        if g.interface_col() != col {
            return Err(fmt_err("interface column does not round-trip"));
        }
        Ok(g)
    }
    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let r = self.usize()?;
        let c = self.usize()?;
        let n = r.checked_mul(c).ok_or_else(|| fmt_err("matrix too large"))?;
        if n.saturating_mul(8) > self.buf.len() - self.pos {
            return Err(fmt_err("matrix exceeds bundle size"));
        }
        let v = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_column_slice(r, c, &v))
    }
    fn fields(&mut self, grid: Grid) -> Result<Vec<Field>> {
        let n = self.usize()?;
        let mut out = Vec::new();
        for _ in 0..n {
            let v = self.f64s()?;
            out.push(Field::new(grid, v)?);
        }
        Ok(out)
    }
    fn finish(&self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(fmt_err("trailing bytes in bundle"))
        }
    }
}

const KIND_EIM: u8 = 0;
const KIND_GEIM: u8 = 1;

fn header(e: &mut Encoder, kind: u8, grid: &Grid, mask: &SubdomainMask) {
    e.0.extend_from_slice(BUNDLE_MAGIC);
    e.u32(BUNDLE_FORMAT_VERSION);
    e.u8(kind);
    e.grid(grid);
    e.usizes(mask.nodes());
}

fn read_header(d: &mut Decoder, kind: u8) -> Result<(Grid, SubdomainMask)> {
    if d.take(8)? != BUNDLE_MAGIC {
        return Err(fmt_err("not a model bundle"));
    }
    let v = d.u32()?;
    if v != BUNDLE_FORMAT_VERSION {
        return Err(fmt_err(format!("unsupported bundle version {v}")));
    }
    let k = d.u8()?;
    if k != kind {
        return Err(fmt_err(format!("bundle holds model kind {k}, expected {kind}")));
    }
    let grid = d.grid()?;
    let mask = SubdomainMask::new(grid, d.usizes()?)?;
    Ok((grid, mask))
}

fn basis_and_tail(e: &mut Encoder, basis: &[Field], b: &DMatrix<f64>, selected: &[usize], history: &[f64]) {
    e.usize(basis.len());
    basis.iter().for_each(|q| e.f64s(q.values()));
    e.matrix(b);
    e.usizes(selected);
    e.f64s(history);
}

pub fn encode_eim(model: &EimModel) -> Vec<u8> {
    let mut e = Encoder(Vec::new());
    header(&mut e, KIND_EIM, &model.grid, &model.mask);
    e.usizes(&model.points);
    basis_and_tail(&mut e, &model.basis, &model.b, &model.selected_snapshots, &model.history);
    e.0
}

pub fn decode_eim(bytes: &[u8]) -> Result<EimModel> {
    let mut d = Decoder { buf: bytes, pos: 0 };
    let (grid, mask) = read_header(&mut d, KIND_EIM)?;
    let points = d.usizes()?;
    let basis = d.fields(grid)?;
    let b = d.matrix()?;
    let selected_snapshots = d.usizes()?;
    let history = d.f64s()?;
    d.finish()?;
    let m = basis.len();
    if points.len() != m || b.shape() != (m, m) || selected_snapshots.len() != m {
        return Err(fmt_err("inconsistent EIM bundle sizes"));
    }
    Ok(EimModel {
        grid,
        mask,
        points,
        basis,
        b,
        selected_snapshots,
        history,
    })
}

/// GEIM bundle. `dictionary_ref` names the dictionary manifest the sensor
/// ids refer to; the selected sensors themselves are stored in full.
pub fn encode_geim(model: &GeimModel, dictionary_ref: &str) -> Vec<u8> {
    let mut e = Encoder(Vec::new());
    header(&mut e, KIND_GEIM, &model.grid, &model.mask);
    e.str(dictionary_ref);
    e.u8(match model.product {
        Product::L2 => 0,
        Product::H1 => 1,
    });
    e.usize(model.sensors.len());
    for s in &model.sensors {
        e.usize(s.id());
        e.u8(match s.kind() {
            SensorKind::Moment => 0,
            SensorKind::Dirac => 1,
        });
        e.usize(s.center());
        e.f64(s.radius());
        e.usize(s.taps().len());
        for &(k, c) in s.taps() {
            e.usize(k);
            e.f64(c);
        }
    }
    basis_and_tail(&mut e, &model.basis, &model.b, &model.selected_snapshots, &model.history);
    e.0
}

/// Decodes a GEIM bundle, returning the model and its dictionary reference.
pub fn decode_geim(bytes: &[u8]) -> Result<(GeimModel, String)> {
    let mut d = Decoder { buf: bytes, pos: 0 };
    let (grid, mask) = read_header(&mut d, KIND_GEIM)?;
    let dict_ref = d.str()?;
    let product = match d.u8()? {
        0 => Product::L2,
        1 => Product::H1,
        p => return Err(fmt_err(format!("unknown product tag {p}"))),
    };
    let n = d.len(8)?;
    let mut sensors = Vec::with_capacity(n);
    for _ in 0..n {
        let id = d.usize()?;
        let kind = match d.u8()? {
            0 => SensorKind::Moment,
            1 => SensorKind::Dirac,
            k => return Err(fmt_err(format!("unknown sensor kind tag {k}"))),
        };
        let center = d.usize()?;
        let radius = d.f64()?;
        let nt = d.len(16)?;
        let mut taps = Vec::with_capacity(nt);
        for _ in 0..nt {
            let k = d.usize()?;
            if k >= grid.len() {
                return Err(fmt_err("sensor tap outside the grid"));
            }
            taps.push((k, d.f64()?));
        }
        sensors.push(Sensor::from_parts(id, kind, center, radius, taps));
    }
    let basis = d.fields(grid)?;
    let b = d.matrix()?;
    let selected_snapshots = d.usizes()?;
    let history = d.f64s()?;
    d.finish()?;
    let m = basis.len();
    if sensors.len() != m || b.shape() != (m, m) || selected_snapshots.len() != m {
        return Err(fmt_err("inconsistent GEIM bundle sizes"));
    }
    Ok((
        GeimModel {
            grid,
            mask,
            product,
            sensors,
            basis,
            b,
            selected_snapshots,
            history,
        },
        dict_ref,
    ))
}

pub fn write_bundle(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

pub fn read_bundle(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eim::eim_build;
    use crate::geim::geim_build;
    use crate::pde::{generate_snapshots, ParamAxis, ParamRanges};
    use crate::sensors::{build_moment_dictionary, default_centers, KernelShape};
    use proptest::prelude::*;

    fn setup() -> (Grid, SnapshotSet) {
        let g = Grid::new(25, 13, [0.0, 2.0, 0.0, 1.0], 0.75).unwrap();
        let r = ParamRanges {
            alpha: ParamAxis::new(0.5, 2.0, 2),
            beta: ParamAxis::new(0.5, 2.0, 2),
            gamma: ParamAxis::new(0.5, 3.0, 3),
        };
        let set = generate_snapshots(r, g, &g.omega1_mask()).unwrap();
        (g, set)
    }

    #[test]
    fn field_csv_round_trip() {
        let g = Grid::new(7, 5, [-1.0, 3.0, 0.0, 0.5], 0.2).unwrap();
        let f = Field::from_fn(g, |x, y| (x * 7.3).sin() / (1.0 + y) + 1e-300);
        let text = field_to_csv(&f, "config_hash=abc");
        assert!(text.starts_with("nx,ny,"));
        assert_eq!(text.lines().nth(1), Some("# config_hash=abc"));
        let back = field_from_csv(&text).unwrap();
        assert_eq!(back, f);
        assert!(field_from_csv("a,b\n1,2\n").is_err());
        assert!(field_from_csv(&format!("{text}zero\n")).is_err());
        assert!(matches!(field_from_csv(&format!("{text}1.5\n")), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn snapshot_directory_round_trip() {
        let (_, set) = setup();
        let dir = tempfile::tempdir().unwrap();
        save_snapshots(dir.path(), &set, "config_hash=1").unwrap();
        let back = load_snapshots(dir.path()).unwrap();
        assert_eq!(back.params, set.params);
        assert_eq!(back.fields, set.fields);
        let manifest = fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        assert_eq!(manifest.lines().count(), 2 + set.len());

        let bad = manifest.replace("format_version=1", "format_version=9");
        fs::write(dir.path().join(MANIFEST), bad).unwrap();
        assert!(matches!(load_snapshots(dir.path()), Err(Error::Format(_))));
    }

    #[test]
    fn bundles_round_trip_bit_exact() {
        let (g, set) = setup();
        let mask = g.omega2_closure_mask();
        let eim = eim_build(&set.fields, &mask, 6, 1e-12).unwrap();
        let bytes = encode_eim(&eim);
        let back = decode_eim(&bytes).unwrap();
        assert_eq!(back, eim);
        assert_eq!(encode_eim(&back), bytes);

        let m2 = g.omega2_mask();
        let c = default_centers(&m2, Some(4), 0);
        let d = build_moment_dictionary(g, &m2, &c, 0.2, KernelShape::Box).unwrap();
        let model = geim_build(&set.fields, &d, &mask, Product::H1, 6, 1e-12).unwrap();
        let bytes = encode_geim(&model, "dictionary.csv");
        let (back, r) = decode_geim(&bytes).unwrap();
        assert_eq!(r, "dictionary.csv");
        assert_eq!(back, model);
        let u = Field::from_fn(g, |x, y| x.exp() * y);
        let a = model.interpolate(&u, model.len()).unwrap();
        let b = back.interpolate(&u, back.len()).unwrap();
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        write_bundle(&p, &bytes).unwrap();
        assert_eq!(read_bundle(&p).unwrap(), bytes);

        assert!(decode_eim(&bytes).is_err());
        assert!(decode_geim(&bytes[..bytes.len() - 3]).is_err());
        let mut wrong = bytes.clone();
        wrong[8] = 7;
        assert!(decode_geim(&wrong).is_err());
    }

    proptest! {
        #[test]
        fn decoder_rejects_garbage(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = decode_geim(&bytes);
            let _ = decode_eim(&bytes);
        }
    }
}
