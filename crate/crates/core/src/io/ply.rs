//! PLY point clouds, ASCII and binary little-endian.
//!
//! Only the `vertex` element is interpreted; other elements are parsed and
//! skipped. Positions, normals and scores are written as `double` so a binary
//! round trip is bit-identical.

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, UNIT_TOLERANCE};
use crate::mapping::{ClassCatalog, SegmentedCloud};
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlyEncoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// Decoded scalar vertex properties, one column per property.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexTable {
    pub encoding: PlyEncoding,
    pub len: usize,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl VertexTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.0 == name).map(|c| c.1.as_slice())
    }

    fn require(&self, name: &'static str) -> Result<&[f64]> {
        self.column(name).ok_or(Error::MissingProperty(name))
    }

    fn optional_triple(&self, names: [&'static str; 3]) -> Result<Option<[&[f64]; 3]>> {
        let found: Vec<_> = names.iter().map(|n| self.column(n)).collect();
        match found.iter().filter(|c| c.is_some()).count() {
            0 => Ok(None),
            3 => Ok(Some([found[0].unwrap(), found[1].unwrap(), found[2].unwrap()])),
            _ => {
                let missing = names.iter().zip(&found).find(|(_, c)| c.is_none()).unwrap().0;
                Err(Error::MissingProperty(missing))
            }
        }
    }

    /// Positions plus any normals and colors present.
    pub fn to_cloud(&self) -> Result<PointCloud> {
        let (x, y, z) = (self.require("x")?, self.require("y")?, self.require("z")?);
        let positions = (0..self.len).map(|i| Point3::new(x[i], y[i], z[i])).collect();
        let mut cloud = PointCloud::new(positions)?;
        if let Some([nx, ny, nz]) = self.optional_triple(["nx", "ny", "nz"])? {
            let mut normals = Vec::with_capacity(self.len);
            for i in 0..self.len {
                let n = Vector3::new(nx[i], ny[i], nz[i]);
                let len = n.norm();
                if !(len > 0.0 && len.is_finite()) {
                    return Err(Error::PlyBody(format!("vertex {i} has a zero or non-finite normal")));
                }
                normals.push(if (len - 1.0).abs() <= UNIT_TOLERANCE { n } else { n / len });
            }
            cloud = cloud.with_normals(normals)?;
        }
        if let Some([r, g, b]) = self.optional_triple(["red", "green", "blue"])? {
            let byte = |v: f64, i: usize| -> Result<u8> {
                if (0.0..=255.0).contains(&v) && v.fract() == 0.0 {
                    Ok(v as u8)
                } else {
                    Err(Error::PlyBody(format!("vertex {i} has color component {v}")))
                }
            };
            let colors = (0..self.len)
                .map(|i| Ok([byte(r[i], i)?, byte(g[i], i)?, byte(b[i], i)?]))
                .collect::<Result<Vec<_>>>()?;
            cloud = cloud.with_colors(colors)?;
        }
        Ok(cloud)
    }
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    parse_vertices(&read_bytes(path)?)?.to_cloud()
}

/// Read a cloud written by [`write_segmented_ply`]. Class names come from the
/// `score_<class>` properties in file order; when `catalog` is given they
/// must match it exactly.
pub fn read_segmented_ply(path: &Path, catalog: Option<&ClassCatalog>) -> Result<SegmentedCloud> {
    segmented_from_table(&parse_vertices(&read_bytes(path)?)?, catalog)
}

pub fn segmented_from_table(table: &VertexTable, catalog: Option<&ClassCatalog>) -> Result<SegmentedCloud> {
    let cloud = table.to_cloud()?;
    let names: Vec<String> = table
        .columns
        .iter()
        .filter_map(|(n, _)| n.strip_prefix("score_").map(str::to_string))
        .collect();
    let catalog = match catalog {
        Some(c) if c.names() != names.as_slice() => {
            return Err(Error::PlyBody(format!(
                "score properties {names:?} do not match classes {:?}",
                c.names()
            )))
        }
        Some(c) => c.clone(),
        None => {
            if names.is_empty() {
                return Err(Error::MissingProperty("score_<class>"));
            }
            let bg = names.iter().position(|n| n == "background").unwrap_or(0);
            ClassCatalog::new(names.clone(), bg)?
        }
    };
    let labels_raw = table.require("label")?;
    let counts_raw = table.require("view_count")?;
    let columns: Vec<&[f64]> = names.iter().map(|n| table.column(&format!("score_{n}")).unwrap()).collect();
    let mut scores = Vec::with_capacity(table.len * names.len());
    let mut labels = Vec::with_capacity(table.len);
    let mut counts = Vec::with_capacity(table.len);
    for i in 0..table.len {
        scores.extend(columns.iter().map(|c| c[i]));
        let l = labels_raw[i];
        if !(l >= 0.0 && l < names.len() as f64 && l.fract() == 0.0) {
            return Err(Error::PlyBody(format!("vertex {i} has label {l}")));
        }
        labels.push(l as usize);
        let c = counts_raw[i];
        if !(c >= 0.0 && c <= u32::MAX as f64 && c.fract() == 0.0) {
            return Err(Error::PlyBody(format!("vertex {i} has view count {c}")));
        }
        counts.push(c as u32);
    }
    SegmentedCloud::from_parts(cloud, catalog, scores, labels, counts)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parse a whole PLY file held in memory.
pub fn parse_vertices(bytes: &[u8]) -> Result<VertexTable> {
    let (encoding, elements, body_start) = parse_header(bytes)?;
    let vertex_pos = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::PlyHeader("no `vertex` element".into()))?;
    let body = &bytes[body_start..];
    match encoding {
        PlyEncoding::Ascii => parse_ascii(body, &elements, vertex_pos, encoding),
        PlyEncoding::BinaryLittleEndian => parse_binary(body, &elements, vertex_pos, encoding),
    }
}

fn parse_header(bytes: &[u8]) -> Result<(PlyEncoding, Vec<Element>, usize)> {
    let bad = |m: String| Error::PlyHeader(m);
    let mut pos = 0;
    let mut next_line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("header ends before `end_header`".into()))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end])
            .map(|s| s.trim_end_matches('\r'))
            .map_err(|_| bad("header is not valid text".into()))
    };
    if next_line()? != "ply" {
        return Err(bad("missing `ply` magic line".into()));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = next_line()?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["end_header"] => break,
            ["format", fmt, version] => {
                if *version != "1.0" {
                    return Err(bad(format!("unsupported version {version}")));
                }
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => return Err(bad(format!("unsupported format `{other}`"))),
                });
            }
            ["element", name, count] => {
                let count = count.parse().map_err(|_| bad(format!("bad element count `{count}`")))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new() });
            }
            ["property", "list", count, item, _name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before any element".into()))?;
                let count = Scalar::parse(count).ok_or_else(|| bad(format!("unknown type `{count}`")))?;
                let item = Scalar::parse(item).ok_or_else(|| bad(format!("unknown type `{item}`")))?;
                if !count.is_integer() {
                    return Err(bad("list count type must be an integer".into()));
                }
                el.properties.push(Property::List { count, item });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before any element".into()))?;
                let ty = Scalar::parse(ty).ok_or_else(|| bad(format!("unknown type `{ty}`")))?;
                if el.properties.iter().any(|p| matches!(p, Property::Scalar { name: n, .. } if n == name)) {
                    return Err(bad(format!("duplicate property `{name}`")));
                }
                el.properties.push(Property::Scalar { name: name.to_string(), ty });
            }
            _ => return Err(bad(format!("unrecognized line `{line}`"))),
        }
    }
    let encoding = encoding.ok_or_else(|| bad("missing `format` line".into()))?;
    Ok((encoding, elements, pos))
}

fn empty_columns(el: &Element) -> Vec<(String, Vec<f64>)> {
    el.properties
        .iter()
        .filter_map(|p| match p {
            Property::Scalar { name, .. } => Some((name.clone(), Vec::with_capacity(el.count))),
            Property::List { .. } => None,
        })
        .collect()
}

fn parse_ascii(body: &[u8], elements: &[Element], vertex_pos: usize, encoding: PlyEncoding) -> Result<VertexTable> {
    let text = std::str::from_utf8(body).map_err(|_| Error::PlyBody("ASCII body is not valid text".into()))?;
    let mut tokens = text.split_whitespace();
    let mut columns = Vec::new();
    for (e, el) in elements.iter().enumerate() {
        let mut cols = empty_columns(el);
        for row in 0..el.count {
            let truncated = || {
                if e == vertex_pos {
                    Error::TruncatedBody { expected: el.count, read: row }
                } else {
                    Error::PlyBody(format!("element `{}` ends after {row} of {} rows", el.name, el.count))
                }
            };
            let mut col = 0;
            for p in &el.properties {
                match p {
                    Property::Scalar { ty, .. } => {
                        let v = parse_token(tokens.next().ok_or_else(truncated)?, *ty, row)?;
                        cols[col].1.push(v);
                        col += 1;
                    }
                    Property::List { count, item } => {
                        let n = parse_token(tokens.next().ok_or_else(truncated)?, *count, row)?;
                        for _ in 0..n as usize {
                            parse_token(tokens.next().ok_or_else(truncated)?, *item, row)?;
                        }
                    }
                }
            }
        }
        if e == vertex_pos {
            columns = cols;
        }
    }
    if let Some(extra) = tokens.next() {
        return Err(Error::PlyBody(format!("unexpected trailing data `{extra}`")));
    }
    Ok(VertexTable { encoding, len: elements[vertex_pos].count, columns })
}

fn parse_token(token: &str, ty: Scalar, row: usize) -> Result<f64> {
    let bad = || Error::PlyBody(format!("bad {ty:?} value `{token}` in row {row}"));
    if ty.is_integer() {
        let v: i64 = token.parse().map_err(|_| bad())?;
        let (lo, hi) = match ty {
            Scalar::I8 => (i8::MIN as i64, i8::MAX as i64),
            Scalar::U8 => (0, u8::MAX as i64),
            Scalar::I16 => (i16::MIN as i64, i16::MAX as i64),
            Scalar::U16 => (0, u16::MAX as i64),
            Scalar::I32 => (i32::MIN as i64, i32::MAX as i64),
            _ => (0, u32::MAX as i64),
        };
        if !(lo..=hi).contains(&v) {
            return Err(bad());
        }
        Ok(v as f64)
    } else {
        let v: f64 = token.parse().map_err(|_| bad())?;
        Ok(if ty == Scalar::F32 { v as f32 as f64 } else { v })
    }
}

fn parse_binary(body: &[u8], elements: &[Element], vertex_pos: usize, encoding: PlyEncoding) -> Result<VertexTable> {
    let mut pos = 0;
    let mut columns = Vec::new();
    for (e, el) in elements.iter().enumerate() {
        let mut cols = empty_columns(el);
        for row in 0..el.count {
            let truncated = || {
                if e == vertex_pos {
                    Error::TruncatedBody { expected: el.count, read: row }
                } else {
                    Error::PlyBody(format!("element `{}` ends after {row} of {} rows", el.name, el.count))
                }
            };
            let mut take = |ty: Scalar| -> Result<f64> {
                let end = pos + ty.size();
                if end > body.len() {
                    return Err(truncated());
                }
                let v = ty.decode(&body[pos..end]);
                pos = end;
                Ok(v)
            };
            let mut col = 0;
            for p in &el.properties {
                match p {
                    Property::Scalar { ty, .. } => {
                        cols[col].1.push(take(*ty)?);
                        col += 1;
                    }
                    Property::List { count, item } => {
                        let n = take(*count)?;
                        if n < 0.0 {
                            return Err(Error::PlyBody(format!("negative list length in row {row}")));
                        }
                        for _ in 0..n as usize {
                            take(*item)?;
                        }
                    }
                }
            }
        }
        if e == vertex_pos {
            columns = cols;
        }
    }
    if pos != body.len() {
        return Err(Error::PlyBody(format!("{} unexpected trailing bytes", body.len() - pos)));
    }
    Ok(VertexTable { encoding, len: elements[vertex_pos].count, columns })
}

#[derive(Clone, Copy)]
enum Column<'a> {
    F64(&'a dyn Fn(usize) -> f64),
    U8(&'a dyn Fn(usize) -> u8),
    I32(&'a dyn Fn(usize) -> i32),
    U32(&'a dyn Fn(usize) -> u32),
}

impl Column<'_> {
    fn type_name(&self) -> &'static str {
        match self {
            Column::F64(_) => "double",
            Column::U8(_) => "uchar",
            Column::I32(_) => "int",
            Column::U32(_) => "uint",
        }
    }
}

fn encode(len: usize, columns: &[(String, Column<'_>)], encoding: PlyEncoding) -> Vec<u8> {
    let mut out = Vec::new();
    let fmt = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(out, "ply\nformat {fmt} 1.0\nelement vertex {len}").unwrap();
    for (name, col) in columns {
        writeln!(out, "property {} {name}", col.type_name()).unwrap();
    }
    writeln!(out, "end_header").unwrap();
    for i in 0..len {
        for (c, (_, col)) in columns.iter().enumerate() {
            match encoding {
                PlyEncoding::BinaryLittleEndian => match col {
                    Column::F64(f) => out.extend_from_slice(&f(i).to_le_bytes()),
                    Column::U8(f) => out.push(f(i)),
                    Column::I32(f) => out.extend_from_slice(&f(i).to_le_bytes()),
                    Column::U32(f) => out.extend_from_slice(&f(i).to_le_bytes()),
                },
                PlyEncoding::Ascii => {
                    if c > 0 {
                        out.push(b' ');
                    }
                    match col {
                        Column::F64(f) => write!(out, "{:?}", f(i)),
                        Column::U8(f) => write!(out, "{}", f(i)),
                        Column::I32(f) => write!(out, "{}", f(i)),
                        Column::U32(f) => write!(out, "{}", f(i)),
                    }
                    .unwrap();
                }
            }
        }
        if encoding == PlyEncoding::Ascii {
            out.push(b'\n');
        }
    }
    out
}

fn encode_with(cloud: &PointCloud, extra: &[(String, Column<'_>)], encoding: PlyEncoding) -> Vec<u8> {
    let p = cloud.positions();
    let px = |i: usize| p[i].x;
    let py = |i: usize| p[i].y;
    let pz = |i: usize| p[i].z;
    let mut columns = vec![
        ("x".to_string(), Column::F64(&px)),
        ("y".to_string(), Column::F64(&py)),
        ("z".to_string(), Column::F64(&pz)),
    ];
    let normals = cloud.normals().unwrap_or(&[]);
    let nx = |i: usize| normals[i].x;
    let ny = |i: usize| normals[i].y;
    let nz = |i: usize| normals[i].z;
    if cloud.normals().is_some() {
        columns.push(("nx".into(), Column::F64(&nx)));
        columns.push(("ny".into(), Column::F64(&ny)));
        columns.push(("nz".into(), Column::F64(&nz)));
    }
    let colors = cloud.colors().unwrap_or(&[]);
    let r = |i: usize| colors[i][0];
    let g = |i: usize| colors[i][1];
    let b = |i: usize| colors[i][2];
    if cloud.colors().is_some() {
        columns.push(("red".into(), Column::U8(&r)));
        columns.push(("green".into(), Column::U8(&g)));
        columns.push(("blue".into(), Column::U8(&b)));
    }
    columns.extend(extra.iter().cloned());
    encode(cloud.len(), &columns, encoding)
}

pub fn ply_bytes(cloud: &PointCloud, encoding: PlyEncoding) -> Vec<u8> {
    encode_with(cloud, &[], encoding)
}

/// Cloud attributes plus `label`, `view_count` and one `score_<class>`
/// property per class.
pub fn segmented_ply_bytes(seg: &SegmentedCloud, encoding: PlyEncoding) -> Vec<u8> {
    let label = |i: usize| seg.label(i) as i32;
    let views = |i: usize| seg.view_counts()[i];
    let score_fns: Vec<Box<dyn Fn(usize) -> f64 + '_>> =
        (0..seg.catalog().len()).map(|c| Box::new(move |i| seg.score(i, c)) as Box<dyn Fn(usize) -> f64>).collect();
    let mut extra = vec![("label".to_string(), Column::I32(&label)), ("view_count".to_string(), Column::U32(&views))];
    for (c, f) in score_fns.iter().enumerate() {
        extra.push((format!("score_{}", seg.catalog().name(c)), Column::F64(f.as_ref())));
    }
    encode_with(seg.cloud(), &extra, encoding)
}

pub fn write_ply(path: &Path, cloud: &PointCloud, encoding: PlyEncoding) -> Result<()> {
    std::fs::write(path, ply_bytes(cloud, encoding)).map_err(|e| Error::io(path, e))
}

pub fn write_segmented_ply(path: &Path, seg: &SegmentedCloud, encoding: PlyEncoding) -> Result<()> {
    std::fs::write(path, segmented_ply_bytes(seg, encoding)).map_err(|e| Error::io(path, e))
}
