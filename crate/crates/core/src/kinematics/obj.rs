//! Wavefront OBJ output for folded surfaces.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::surface::{Point3, SurfaceMesh};
use crate::error::{Error, Result};

/// Write the mesh as ASCII OBJ (meters, 1-based face indices).
///
/// Vertices and faces are written in mesh order, so identical meshes give
/// identical bytes.
pub fn write_obj<W: Write>(mesh: &SurfaceMesh, mut out: W) -> io::Result<()> {
    writeln!(out, "# foldcap surface")?;
    writeln!(out, "# vertices {} faces {}", mesh.vertices.len(), mesh.faces.len())?;
    for v in &mesh.vertices {
        writeln!(out, "v {:.9} {:.9} {:.9}", v[0], v[1], v[2])?;
    }
    let mut panel = usize::MAX;
    for (f, &p) in mesh.faces.iter().zip(&mesh.face_panel) {
        if p != panel {
            writeln!(out, "g panel_{p}")?;
            panel = p;
        }
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

/// Write the mesh to `path` atomically (temp file, then rename).
pub fn export_obj(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_obj(mesh, &mut buf)?;
    crate::io_util::write_atomic(path.as_ref(), &buf)?;
    Ok(())
}

/// Minimal reader for the subset [`write_obj`] emits: `v` and triangular `f` lines.
pub fn parse_obj(text: &str) -> Result<(Vec<Point3>, Vec<[usize; 3]>)> {
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let err = |msg: &str| Error::Parse { path: "<obj>".into(), line: ln + 1, msg: msg.into() };
        match it.next() {
            Some("v") => {
                let mut p = [0.0; 3];
                for c in &mut p {
                    *c = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err("bad vertex"))?;
                }
                verts.push(p);
            }
            Some("f") => {
                let mut f = [0usize; 3];
                for c in &mut f {
                    let tok = it.next().ok_or_else(|| err("bad face"))?;
                    let idx: usize = tok
                        .split('/')
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err("bad face index"))?;
                    if idx == 0 {
                        return Err(err("face index 0"));
                    }
                    *c = idx - 1;
                }
                faces.push(f);
            }
            _ => {}
        }
    }
    Ok((verts, faces))
}

/// Write one OBJ per mesh as `frame_00000.obj`, `frame_00001.obj`, ...
pub fn export_obj_sequence<'a>(
    meshes: impl IntoIterator<Item = &'a SurfaceMesh>,
    dir: impl AsRef<Path>,
) -> Result<usize> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut count = 0;
    for (i, m) in meshes.into_iter().enumerate() {
        export_obj(m, dir.join(format!("frame_{i:05}.obj")))?;
        count += 1;
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{realize_surface, FoldPattern, FoldState, PatternKind};

    #[test]
    fn flat_two_bay_obj() {
        let mut p = FoldPattern::preset(PatternKind::AccordionR);
        p.num_creases = 2;
        p.deploy_range = (0.01, 0.03);
        let m = realize_surface(&p, &FoldState::flat(&p)).unwrap();
        let mut buf = Vec::new();
        write_obj(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 6);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 4);
    }

    #[test]
    fn export_reparse_roundtrip() {
        let p = FoldPattern::preset(PatternKind::Sunray);
        let s = FoldState::uniform(&p, 0.0123, 0.0071);
        let m = realize_surface(&p, &s).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.obj");
        export_obj(&m, &path).unwrap();
        let (v, f) = parse_obj(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(f, m.faces);
        for (a, b) in v.iter().zip(&m.vertices) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 5e-7);
            }
        }
        assert!(f.iter().flatten().all(|&i| i < v.len()));

        let mut again = Vec::new();
        write_obj(&m, &mut again).unwrap();
        assert_eq!(fs::read(&path).unwrap(), again);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_obj("v 1 2\n").is_err());
        assert!(parse_obj("f 0 1 2\n").is_err());
    }
}
