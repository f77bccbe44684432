//! Text file formats: OBJ meshes, XYZ and ASCII PLY point clouds, voxel grids,
//! deformation fields, fit traces and encoder parameters.

use std::fs;
use std::path::Path;

use ffd_core::ffd::{ControlLattice, DeformationField};
use ffd_core::fit::FitTrace;
use ffd_core::geometry::{PointCloud, TriangleMesh, VoxelGrid};
use ffd_core::retrieval::EncoderParams;
use ffd_core::Vec3;

use crate::error::{CliError, CliResult};
use crate::numfmt::{join9, push_fmt9};

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

fn parse_f64(path: &Path, line: usize, token: &str) -> CliResult<f64> {
    let v: f64 = token.parse().map_err(|_| CliError::parse(path, line, format!("invalid number `{token}`")))?;
    if !v.is_finite() {
        return Err(CliError::parse(path, line, format!("non-finite number `{token}`")));
    }
    Ok(v)
}

fn parse_usize(path: &Path, line: usize, token: &str) -> CliResult<usize> {
    token.parse().map_err(|_| CliError::parse(path, line, format!("invalid integer `{token}`")))
}

/// OBJ subset: `v x y z` and `f a b c ...` with 1-based indices; anything after
/// a slash in a face reference is ignored, polygons are fan-split, and every
/// other directive is skipped.
pub fn parse_obj(path: &Path, text: &str) -> CliResult<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut polygons = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() < 3 {
                    return Err(CliError::parse(path, line, "vertex needs three coordinates"));
                }
                vertices.push(Vec3::new(
                    parse_f64(path, line, coords[0])?,
                    parse_f64(path, line, coords[1])?,
                    parse_f64(path, line, coords[2])?,
                ));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in tokens {
                    let head = t.split('/').next().unwrap_or("");
                    let idx = parse_usize(path, line, head)?;
                    if idx == 0 || idx > vertices.len() {
                        return Err(CliError::parse(
                            path,
                            line,
                            format!("face index {idx} out of range 1..={}", vertices.len()),
                        ));
                    }
                    poly.push(idx - 1);
                }
                if poly.len() < 3 {
                    return Err(CliError::parse(path, line, "face needs at least three vertices"));
                }
                polygons.push(poly);
            }
            _ => {}
        }
    }
    Ok(TriangleMesh::from_polygons(vertices, &polygons)?)
}

pub fn read_mesh(path: &Path) -> CliResult<TriangleMesh> {
    if extension(path) != "obj" {
        return Err(CliError::UnsupportedFormat { path: path.to_path_buf(), expected: "an .obj mesh" });
    }
    parse_obj(path, &read_text(path)?)
}

/// One `x y z` triple per nonblank line; extra columns are ignored.
pub fn parse_xyz(path: &Path, text: &str) -> CliResult<PointCloud> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let t: Vec<&str> = content.split_whitespace().collect();
        if t.len() < 3 {
            return Err(CliError::parse(path, line, "expected `x y z`"));
        }
        points.push(Vec3::new(parse_f64(path, line, t[0])?, parse_f64(path, line, t[1])?, parse_f64(path, line, t[2])?));
    }
    if points.is_empty() {
        return Err(CliError::parse(path, 0, "no points"));
    }
    Ok(PointCloud::new(points)?)
}

/// ASCII PLY; reads the `vertex` element's `x`, `y` and `z` properties.
pub fn parse_ply(path: &Path, text: &str) -> CliResult<PointCloud> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(CliError::parse(path, 1, "missing `ply` magic")),
    }
    // Elements in header order: (name, count, property names).
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    let mut body_start = None;
    for (i, raw) in lines.by_ref() {
        let line = i + 1;
        let t: Vec<&str> = raw.split_whitespace().collect();
        match t.first().copied() {
            Some("format") => {
                if t.get(1) != Some(&"ascii") {
                    return Err(CliError::UnsupportedFormat { path: path.to_path_buf(), expected: "ASCII PLY" });
                }
            }
            Some("element") if t.len() == 3 => {
                elements.push((t[1].to_string(), parse_usize(path, line, t[2])?, Vec::new()));
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| CliError::parse(path, line, "property before element"))?;
                if t.get(1) == Some(&"list") {
                    el.2.push(String::from("<list>"));
                } else if t.len() == 3 {
                    el.2.push(t[2].to_string());
                } else {
                    return Err(CliError::parse(path, line, "malformed property"));
                }
            }
            Some("end_header") => {
                body_start = Some(line);
                break;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(CliError::parse(path, line, format!("unknown header keyword `{other}`"))),
        }
    }
    if body_start.is_none() {
        return Err(CliError::parse(path, 0, "missing end_header"));
    }
    let mut rows = lines.filter(|(_, l)| !l.trim().is_empty());
    let mut points = Vec::new();
    for (name, count, props) in &elements {
        if name != "vertex" {
            // Elements before the vertices must be skipped row by row.
            for _ in 0..*count {
                rows.next();
            }
            continue;
        }
        let find = |axis: &str| {
            props.iter().position(|p| p == axis).ok_or_else(|| CliError::parse(path, 0, format!("no `{axis}` property")))
        };
        let (ix, iy, iz) = (find("x")?, find("y")?, find("z")?);
        for _ in 0..*count {
            let (i, raw) = rows.next().ok_or_else(|| CliError::parse(path, 0, "fewer vertex rows than declared"))?;
            let t: Vec<&str> = raw.split_whitespace().collect();
            if t.len() < props.len() {
                return Err(CliError::parse(path, i + 1, "short vertex row"));
            }
            points.push(Vec3::new(
                parse_f64(path, i + 1, t[ix])?,
                parse_f64(path, i + 1, t[iy])?,
                parse_f64(path, i + 1, t[iz])?,
            ));
        }
        break;
    }
    if points.is_empty() {
        return Err(CliError::parse(path, 0, "no vertices"));
    }
    Ok(PointCloud::new(points)?)
}

pub fn is_cloud_path(path: &Path) -> bool {
    matches!(extension(path).as_str(), "xyz" | "txt" | "pts" | "ply")
}

pub fn read_cloud(path: &Path) -> CliResult<PointCloud> {
    match extension(path).as_str() {
        "xyz" | "txt" | "pts" => parse_xyz(path, &read_text(path)?),
        "ply" => parse_ply(path, &read_text(path)?),
        _ => Err(CliError::UnsupportedFormat { path: path.to_path_buf(), expected: ".xyz, .txt, .pts or .ply" }),
    }
}

pub fn format_xyz(pc: &PointCloud) -> String {
    let mut s = String::with_capacity(pc.len() * 40);
    for p in pc.points() {
        s.push_str(&join9(p.to_array()));
        s.push('\n');
    }
    s
}

pub fn format_ply(pc: &PointCloud) -> String {
    let mut s = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        pc.len()
    );
    s.push_str(&format_xyz(pc));
    s
}

pub fn write_cloud(path: &Path, pc: &PointCloud) -> CliResult<()> {
    let text = match extension(path).as_str() {
        "xyz" | "txt" | "pts" => format_xyz(pc),
        "ply" => format_ply(pc),
        _ => {
            return Err(CliError::UnsupportedFormat { path: path.to_path_buf(), expected: ".xyz, .txt, .pts or .ply" })
        }
    };
    write_text(path, &text)
}

/// Header `R ax ay az bx by bz`, then `R³` characters `0`/`1` in x-fastest order.
pub fn format_voxels(grid: &VoxelGrid) -> String {
    let e = grid.extent();
    let mut s = format!("{} {}\n", grid.resolution(), join9(e.min.to_array().into_iter().chain(e.max.to_array())));
    s.extend(grid.occupancy().iter().map(|&o| if o { '1' } else { '0' }));
    s.push('\n');
    s
}

/// Header `l m n`, then `i j k dx dy dz` per control point in lattice order.
pub fn format_field(field: &DeformationField) -> String {
    let [l, m, n] = field.degrees();
    let mut s = format!("{l} {m} {n}\n");
    let mut c = 0;
    for i in 0..=l {
        for j in 0..=m {
            for k in 0..=n {
                s.push_str(&format!("{i} {j} {k} {}\n", join9(field.offsets()[c].to_array())));
                c += 1;
            }
        }
    }
    s
}

pub fn parse_field(path: &Path, text: &str) -> CliResult<DeformationField> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| CliError::parse(path, 1, "empty field file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 {
        return Err(CliError::parse(path, 1, "expected header `l m n`"));
    }
    let degrees = [parse_usize(path, 1, h[0])?, parse_usize(path, 1, h[1])?, parse_usize(path, 1, h[2])?];
    let count = (degrees[0] + 1) * (degrees[1] + 1) * (degrees[2] + 1);
    let mut offsets = vec![None; count];
    for (i, raw) in lines {
        let line = i + 1;
        let t: Vec<&str> = raw.split_whitespace().collect();
        if t.len() != 6 {
            return Err(CliError::parse(path, line, "expected `i j k dx dy dz`"));
        }
        let ijk = [parse_usize(path, line, t[0])?, parse_usize(path, line, t[1])?, parse_usize(path, line, t[2])?];
        if ijk.iter().zip(&degrees).any(|(a, d)| a > d) {
            return Err(CliError::parse(path, line, "control index outside the lattice"));
        }
        let c = (ijk[0] * (degrees[1] + 1) + ijk[1]) * (degrees[2] + 1) + ijk[2];
        if offsets[c].is_some() {
            return Err(CliError::parse(path, line, "duplicate control point"));
        }
        offsets[c] = Some(Vec3::new(parse_f64(path, line, t[3])?, parse_f64(path, line, t[4])?, parse_f64(path, line, t[5])?));
    }
    let offsets: Option<Vec<Vec3>> = offsets.into_iter().collect();
    let offsets = offsets.ok_or_else(|| CliError::parse(path, 0, format!("expected {count} control points")))?;
    Ok(DeformationField::from_offsets(degrees, offsets)?)
}

pub fn read_field(path: &Path, lattice: &ControlLattice) -> CliResult<DeformationField> {
    let field = parse_field(path, &read_text(path)?)?;
    if field.degrees() != lattice.degrees() {
        return Err(CliError::SizeMismatch(format!(
            "field degrees {:?} do not match lattice degrees {:?}",
            field.degrees(),
            lattice.degrees()
        )));
    }
    Ok(field)
}

pub const TRACE_HEADER: &str = "iter,total,data,reg_l1,reg_smooth,grad_norm";

pub fn format_trace(trace: &FitTrace) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in trace.records() {
        s.push_str(&r.iteration.to_string());
        for v in [r.total, r.data, r.reg_l1, r.reg_smooth, r.grad_norm] {
            s.push(',');
            push_fmt9(&mut s, v);
        }
        s.push('\n');
    }
    s
}

/// Header `D D_in`, then the weight matrix one row per line, then the bias.
pub fn format_encoder(params: &EncoderParams) -> String {
    let mut s = format!("{} {}\n", params.output_dim(), params.input_dim());
    for row in params.weight().chunks_exact(params.input_dim()) {
        s.push_str(&join9(row.iter().copied()));
        s.push('\n');
    }
    s.push_str(&join9(params.bias().iter().copied()));
    s.push('\n');
    s
}

pub fn parse_encoder(path: &Path, text: &str) -> CliResult<EncoderParams> {
    let mut tokens = text.split_whitespace();
    let mut next_usize = || -> CliResult<usize> {
        let t = tokens.next().ok_or_else(|| CliError::parse(path, 1, "missing header `D D_in`"))?;
        parse_usize(path, 1, t)
    };
    let (d, d_in) = (next_usize()?, next_usize()?);
    let values = text
        .split_whitespace()
        .skip(2)
        .map(|t| parse_f64(path, 0, t))
        .collect::<CliResult<Vec<f64>>>()?;
    if values.len() != d * d_in + d {
        return Err(CliError::parse(path, 0, format!("expected {} values, found {}", d * d_in + d, values.len())));
    }
    let bias = values[d * d_in..].to_vec();
    let mut weight = values;
    weight.truncate(d * d_in);
    Ok(EncoderParams::new(d, d_in, weight, bias)?)
}

pub fn read_encoder(path: &Path) -> CliResult<EncoderParams> {
    parse_encoder(path, &read_text(path)?)
}

/// Whitespace-separated floats.
pub fn parse_vector(path: &Path, text: &str) -> CliResult<Vec<f64>> {
    text.split_whitespace().map(|t| parse_f64(path, 0, t)).collect()
}
