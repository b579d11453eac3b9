//! OBJ and PLY mesh reading plus simple writers.
//!
//! Polygons are fan-triangulated. Normals, UVs and any extra PLY elements or
//! properties are ignored.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::{SceneError, TriangleMesh};
use crate::Point;

/// Loads an OBJ or PLY mesh, chosen by file extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh, SceneError> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("obj") => load_obj(path),
        Some("ply") => {
            let bytes = fs::read(path).map_err(|source| SceneError::Io {
                path: path.display().to_string(),
                source,
            })?;
            parse_ply(&bytes).map_err(|msg| parse_err(path, msg))
        }
        _ => Err(parse_err(path, "unsupported extension (want .obj or .ply)".into())),
    }
}

fn parse_err(path: &Path, msg: String) -> SceneError {
    SceneError::Parse {
        path: path.display().to_string(),
        msg,
    }
}

fn fan(poly: &[u32], out: &mut Vec<[u32; 3]>) {
    for w in 1..poly.len().saturating_sub(1) {
        out.push([poly[0], poly[w], poly[w + 1]]);
    }
}

fn load_obj(path: &Path) -> Result<TriangleMesh, SceneError> {
    let opts = tobj::LoadOptions {
        triangulate: false,
        single_index: false,
        ..Default::default()
    };
    let (models, _) = tobj::load_obj(path, &opts).map_err(|e| parse_err(path, e.to_string()))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for model in models {
        let m = model.mesh;
        let base = vertices.len() as u32;
        vertices.extend(
            m.positions
                .chunks_exact(3)
                .map(|c| Point::new(c[0] as f64, c[1] as f64, c[2] as f64)),
        );
        let idx: Vec<u32> = m.indices.iter().map(|i| i + base).collect();
        if m.face_arities.is_empty() {
            triangles.extend(idx.chunks_exact(3).map(|c| [c[0], c[1], c[2]]));
        } else {
            let mut at = 0;
            for &n in &m.face_arities {
                let n = n as usize;
                let poly = idx
                    .get(at..at + n)
                    .ok_or_else(|| parse_err(path, "face arity exceeds index list".into()))?;
                fan(poly, &mut triangles);
                at += n;
            }
        }
    }
    TriangleMesh::new(vertices, triangles)
}

#[derive(Clone, Copy, Debug, PartialEq)]
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
    fn parse(name: &str) -> Result<Scalar, String> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(format!("unknown PLY type {other}")),
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

    fn read_le(self, b: &[u8]) -> f64 {
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
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Pulls values for one element record, from text tokens or binary bytes.
trait Source {
    fn next(&mut self, ty: Scalar) -> Result<f64, String>;
}

struct Ascii<'a, I: Iterator<Item = &'a str>>(I);

impl<'a, I: Iterator<Item = &'a str>> Source for Ascii<'a, I> {
    fn next(&mut self, _: Scalar) -> Result<f64, String> {
        let tok = self.0.next().ok_or("unexpected end of PLY body")?;
        tok.parse::<f64>().map_err(|_| format!("bad number {tok:?}"))
    }
}

struct Binary<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Source for Binary<'_> {
    fn next(&mut self, ty: Scalar) -> Result<f64, String> {
        let end = self.at + ty.size();
        let b = self.bytes.get(self.at..end).ok_or("unexpected end of PLY body")?;
        self.at = end;
        Ok(ty.read_le(b))
    }
}

fn parse_ply(bytes: &[u8]) -> Result<TriangleMesh, String> {
    const END: &[u8] = b"end_header";
    let pos = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or("missing end_header")?;
    let mut body = pos + END.len();
    while body < bytes.len() && bytes[body] != b'\n' {
        body += 1;
    }
    body += 1;
    let header = std::str::from_utf8(&bytes[..pos]).map_err(|_| "non-UTF-8 header")?;

    let mut lines = header.lines().map(str::trim);
    if lines.next() != Some("ply") {
        return Err("missing ply magic".into());
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", f, ..] => return Err(format!("unsupported PLY format {f}")),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| format!("bad element count {count}"))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => elements
                .last_mut()
                .ok_or("property before element")?
                .props
                .push(Property::List(name.to_string(), Scalar::parse(ct)?, Scalar::parse(it)?)),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or("property before element")?
                .props
                .push(Property::Scalar(name.to_string(), Scalar::parse(ty)?)),
            _ => return Err(format!("unrecognised header line {line:?}")),
        }
    }
    let binary = binary.ok_or("missing format line")?;

    let rest = &bytes[body.min(bytes.len())..];
    if binary {
        read_elements(&elements, &mut Binary { bytes: rest, at: 0 })
    } else {
        let text = std::str::from_utf8(rest).map_err(|_| "non-UTF-8 ASCII body")?;
        read_elements(&elements, &mut Ascii(text.split_whitespace()))
    }
}

fn read_elements(elements: &[Element], src: &mut dyn Source) -> Result<TriangleMesh, String> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for el in elements {
        for _ in 0..el.count {
            let mut xyz = [None; 3];
            let mut poly: Option<Vec<u32>> = None;
            for p in &el.props {
                match p {
                    Property::Scalar(name, ty) => {
                        let v = src.next(*ty)?;
                        if let Some(a) = ["x", "y", "z"].iter().position(|n| n == name) {
                            xyz[a] = Some(v);
                        }
                    }
                    Property::List(name, ct, it) => {
                        let n = src.next(*ct)?;
                        if !(n >= 0.0) {
                            return Err(format!("bad list length {n}"));
                        }
                        let mut items = Vec::with_capacity(n as usize);
                        for _ in 0..n as usize {
                            let i = src.next(*it)?;
                            if !(i >= 0.0) || i.fract() != 0.0 {
                                return Err(format!("bad vertex index {i}"));
                            }
                            items.push(i as u32);
                        }
                        if name == "vertex_indices" || name == "vertex_index" {
                            poly = Some(items);
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => {
                    let [x, y, z] = xyz;
                    match (x, y, z) {
                        (Some(x), Some(y), Some(z)) => vertices.push(Point::new(x, y, z)),
                        _ => return Err("vertex element lacks x/y/z".into()),
                    }
                }
                "face" => fan(&poly.ok_or("face element lacks vertex_indices")?, &mut triangles),
                _ => {}
            }
        }
    }
    TriangleMesh::new(vertices, triangles).map_err(|e| e.to_string())
}

pub fn write_obj<W: Write>(mut out: W, mesh: &TriangleMesh) -> io::Result<()> {
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

fn ply_header(format: &str, mesh: &TriangleMesh) -> String {
    format!(
        "ply\nformat {format} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    )
}

pub fn write_ply_ascii<W: Write>(mut out: W, mesh: &TriangleMesh) -> io::Result<()> {
    out.write_all(ply_header("ascii", mesh).as_bytes())?;
    for v in &mesh.vertices {
        writeln!(out, "{} {} {}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

pub fn write_ply_binary<W: Write>(mut out: W, mesh: &TriangleMesh) -> io::Result<()> {
    let mut buf = ply_header("binary_little_endian", mesh).into_bytes();
    for v in &mesh.vertices {
        for a in 0..3 {
            buf.extend_from_slice(&v[a].to_le_bytes());
        }
    }
    for t in &mesh.triangles {
        buf.push(3);
        for i in t {
            buf.extend_from_slice(&(*i as i32).to_le_bytes());
        }
    }
    out.write_all(&buf)
}
