//! Minimal Wavefront OBJ: `v` and `f` records only.

use std::fmt::Write;

use acdc_core::geometry::OrientedBox;
use acdc_core::Vec3;

/// Triangles of an OBJ text; polygons are fan-triangulated, texture and
/// normal indices are ignored and negative indices count from the end.
pub fn parse_obj(text: &str) -> Result<Vec<[Vec3; 3]>, String> {
    let mut verts: Vec<Vec3> = Vec::new();
    let mut tris = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|e| format!("line {}: {e}", n + 1))?;
                if c.len() != 3 || c.iter().any(|x| !x.is_finite()) {
                    return Err(format!("line {}: vertex needs three finite coordinates", n + 1));
                }
                verts.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx = it
                    .map(|tok| {
                        let raw: i64 = tok
                            .split('/')
                            .next()
                            .unwrap_or("")
                            .parse()
                            .map_err(|e| format!("line {}: {e}", n + 1))?;
                        let i = if raw < 0 { verts.len() as i64 + raw } else { raw - 1 };
                        usize::try_from(i)
                            .ok()
                            .filter(|i| *i < verts.len())
                            .ok_or_else(|| format!("line {}: vertex index {raw} out of range", n + 1))
                    })
                    .collect::<Result<Vec<usize>, String>>()?;
                if idx.len() < 3 {
                    return Err(format!("line {}: face needs three vertices", n + 1));
                }
                for k in 1..idx.len() - 1 {
                    tris.push([verts[idx[0]], verts[idx[k]], verts[idx[k + 1]]]);
                }
            }
            _ => {}
        }
    }
    Ok(tris)
}

/// Appends an oriented box as a named object with 8 vertices and 6 quads.
pub fn push_box(out: &mut String, name: &str, b: &OrientedBox, vertex_base: usize) -> usize {
    // corner index bits: x = 1, y = 2, z = 4
    let c = b.corners();
    writeln!(out, "o {name}").unwrap();
    for p in c {
        writeln!(out, "v {} {} {}", p.x, p.y, p.z).unwrap();
    }
    const FACES: [[usize; 4]; 6] = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    for f in FACES {
        let i: Vec<String> = f.iter().map(|k| (vertex_base + k + 1).to_string()).collect();
        writeln!(out, "f {}", i.join(" ")).unwrap();
    }
    vertex_base + 8
}
