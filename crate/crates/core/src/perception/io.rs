//! ASCII XYZ and ASCII PLY point cloud files.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;

use super::PointCloud;
use crate::error::{DockError, Result};

/// Parses `x y z` lines; blank lines and `#` comments are skipped.
pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        points.push(parse_triple(line.split_whitespace(), lineno + 1)?);
    }
    let cloud = PointCloud::new(points);
    cloud.validate()?;
    Ok(cloud)
}

fn parse_triple<'a>(mut fields: impl Iterator<Item = &'a str>, lineno: usize) -> Result<Point3<f64>> {
    let mut xyz = [0.0; 3];
    for v in xyz.iter_mut() {
        let tok = fields
            .next()
            .ok_or_else(|| DockError::Parse(format!("line {lineno}: expected 3 coordinates")))?;
        *v = tok
            .parse()
            .map_err(|_| DockError::Parse(format!("line {lineno}: bad number `{tok}`")))?;
    }
    Ok(Point3::from(xyz))
}

pub fn format_xyz(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 32);
    for p in &cloud.points {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    out
}

/// Parses an ASCII PLY file, reading the x/y/z properties of the vertex element.
pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(DockError::Parse("missing `ply` magic".into())),
    }

    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    // rows of elements declared before `vertex` precede the vertex rows
    let mut rows_before = 0usize;
    loop {
        let Some((lineno, line)) = lines.next() else {
            return Err(DockError::Parse("header not terminated by end_header".into()));
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(DockError::Parse(format!(
                        "unsupported PLY format `{fmt}`; only ascii is read"
                    )));
                }
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                let count: usize = count
                    .parse()
                    .map_err(|_| DockError::Parse(format!("line {}: bad element count", lineno + 1)))?;
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertex_count = Some(count);
                } else if vertex_count.is_none() {
                    rows_before += count;
                }
            }
            ["property", "list", ..] => {
                if in_vertex {
                    return Err(DockError::Parse("list properties on vertex are not supported".into()));
                }
            }
            ["property", _ty, name] => {
                if in_vertex {
                    props.push((*name).to_string());
                }
            }
            ["end_header"] => break,
            [] => {}
            _ => return Err(DockError::Parse(format!("line {}: unexpected header line", lineno + 1))),
        }
    }
    let count = vertex_count.ok_or_else(|| DockError::Parse("no vertex element".into()))?;
    let index = |axis: &str| {
        props
            .iter()
            .position(|p| p == axis)
            .ok_or_else(|| DockError::Parse(format!("vertex has no `{axis}` property")))
    };
    let (ix, iy, iz) = (index("x")?, index("y")?, index("z")?);

    let mut points = Vec::with_capacity(count);
    let mut body = lines.filter(|(_, l)| !l.trim().is_empty()).skip(rows_before);
    for _ in 0..count {
        let (lineno, line) = body
            .next()
            .ok_or_else(|| DockError::Parse(format!("expected {count} vertices, found {}", points.len())))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < props.len() {
            return Err(DockError::Parse(format!("line {}: too few vertex fields", lineno + 1)));
        }
        let field = |i: usize| -> Result<f64> {
            toks[i]
                .parse()
                .map_err(|_| DockError::Parse(format!("line {}: bad number `{}`", lineno + 1, toks[i])))
        };
        points.push(Point3::new(field(ix)?, field(iy)?, field(iz)?));
    }
    let cloud = PointCloud::new(points);
    cloud.validate()?;
    Ok(cloud)
}

pub fn format_ply(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 32 + 128);
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    out.push_str(&format_xyz(cloud));
    out
}

/// Reads a cloud, choosing the format from the extension (`.ply`, otherwise XYZ).
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    if is_ply(path) {
        parse_ply(&text)
    } else {
        parse_xyz(&text)
    }
}

pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let text = if is_ply(path) {
        format_ply(cloud)
    } else {
        format_xyz(cloud)
    };
    std::fs::write(path, text)?;
    Ok(())
}

fn is_ply(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"))
}
