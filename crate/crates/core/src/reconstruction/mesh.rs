//! Triangle meshes and PLY input/output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::Data(format!("triangle {t:?} indexes past {n} vertices")));
        }
        Ok(())
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Area-weighted (unnormalized) normal of a triangle.
    pub fn face_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle(t);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self, t: usize) -> f64 {
        0.5 * self.face_normal(t).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// Vertices are written as doubles and faces as `uchar`-counted `int` lists.
pub fn export_ply(mesh: &TriangleMesh, path: &Path, format: PlyFormat) -> Result<()> {
    mesh.validate()?;
    if mesh.vertices.len() > i32::MAX as usize {
        return Err(Error::Data("too many vertices for PLY int indices".into()));
    }
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    write!(
        w,
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    )
    .map_err(io)?;
    match format {
        PlyFormat::Ascii => {
            for v in &mesh.vertices {
                writeln!(w, "{} {} {}", v.x, v.y, v.z).map_err(io)?;
            }
            for t in &mesh.triangles {
                writeln!(w, "3 {} {} {}", t[0], t[1], t[2]).map_err(io)?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for v in &mesh.vertices {
                for a in 0..3 {
                    w.write_all(&v[a].to_le_bytes()).map_err(io)?;
                }
            }
            for t in &mesh.triangles {
                w.write_all(&[3]).map_err(io)?;
                for &i in t {
                    w.write_all(&(i as i32).to_le_bytes()).map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(io)?;
    Ok(())
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
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return Err(Error::Format(format!("unsupported PLY type {name}"))),
        })
    }

    fn read_binary(self, r: &mut impl Read) -> std::io::Result<f64> {
        let mut b = [0u8; 8];
        let n = match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        };
        r.read_exact(&mut b[..n])?;
        Ok(match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b),
        })
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List(Scalar, Scalar),
}

struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Reads ASCII or binary little-endian PLY files with `vertex` x/y/z and
/// triangular `face` lists; other properties are skipped.
pub fn import_ply(path: &Path) -> Result<TriangleMesh> {
    let io = |e| Error::io(path, e);
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut line = String::new();
    let mut next_line = |r: &mut BufReader<File>| -> Result<String> {
        line.clear();
        if r.read_line(&mut line).map_err(io)? == 0 {
            return Err(Error::Format("PLY header ended early".into()));
        }
        Ok(line.trim().to_string())
    };
    if next_line(&mut r)? != "ply" {
        return Err(Error::Format("missing PLY magic".into()));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let l = next_line(&mut r)?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        match parts.as_slice() {
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLittleEndian),
            ["format", other, ..] => return Err(Error::Format(format!("unsupported PLY format {other}"))),
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| Error::Format(format!("bad element count {count}")))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, _name] => elements
                .last_mut()
                .ok_or_else(|| Error::Format("property before element".into()))?
                .props
                .push(Property::List(Scalar::parse(count)?, Scalar::parse(item)?)),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Format("property before element".into()))?
                .props
                .push(Property::Scalar(name.to_string(), Scalar::parse(ty)?)),
            ["end_header"] => break,
            _ => return Err(Error::Format(format!("unexpected PLY header line {l:?}"))),
        }
    }
    let format = format.ok_or_else(|| Error::Format("PLY format line missing".into()))?;
    let mut body: Box<dyn FnMut(Scalar) -> Result<f64>> = match format {
        PlyFormat::BinaryLittleEndian => Box::new(move |s: Scalar| s.read_binary(&mut r).map_err(io)),
        PlyFormat::Ascii => {
            let mut text = String::new();
            r.read_to_string(&mut text).map_err(io)?;
            let mut tokens = text.split_ascii_whitespace().map(str::to_string).collect::<Vec<_>>().into_iter();
            Box::new(move |_s: Scalar| {
                let t = tokens.next().ok_or_else(|| Error::Format("PLY body ended early".into()))?;
                t.parse::<f64>().map_err(|_| Error::Format(format!("bad PLY number {t}")))
            })
        }
    };
    let mut mesh = TriangleMesh::default();
    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            let mut face: Option<Vec<usize>> = None;
            for p in &el.props {
                match p {
                    Property::Scalar(name, s) => {
                        let v = body(*s)?;
                        match name.as_str() {
                            "x" => xyz[0] = v,
                            "y" => xyz[1] = v,
                            "z" => xyz[2] = v,
                            _ => {}
                        }
                    }
                    Property::List(cs, is) => {
                        let n = body(*cs)? as usize;
                        let idx = (0..n).map(|_| body(*is).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
                        face = Some(idx);
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => mesh.vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2])),
                "face" => {
                    let f = face.ok_or_else(|| Error::Format("face without index list".into()))?;
                    if f.len() != 3 {
                        return Err(Error::Format(format!("non-triangular face of {} vertices", f.len())));
                    }
                    mesh.triangles.push([f[0], f[1], f[2]]);
                }
                _ => {}
            }
        }
    }
    mesh.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(mesh)
}
