//! Plain-text mesh snapshots.
//!
//! ```text
//! # kvfrac snapshot v1
//! step <k>
//! time <t>
//! nodes <N>
//! <x> <y> <ux> <uy>              one line per node, copies after the base vertices
//! triangles <M>
//! <n0> <n1> <n2> <|e u|>         side-resolved node indices and strain magnitude
//! crack_segments <S>
//! <v0> <v1> <open>               base vertex indices, 1 when released
//! ```
//!
//! Floats are written with 17 significant digits.

use std::io::{self, Write};

use crate::domain::crack::{ConstraintSet, CrackedSpace};

pub fn snapshot_file_name(k: usize) -> String {
    format!("snap_{k}.txt")
}

pub fn write_snapshot<W: Write>(
    out: &mut W,
    space: &CrackedSpace,
    k: usize,
    t: f64,
    u: &[f64],
    constraints: &ConstraintSet,
) -> io::Result<()> {
    writeln!(out, "# kvfrac snapshot v1")?;
    writeln!(out, "step {k}")?;
    writeln!(out, "time {t:.16e}")?;
    writeln!(out, "nodes {}", space.num_nodes())?;
    for (n, p) in space.node_coords().iter().enumerate() {
        writeln!(
            out,
            "{:.16e} {:.16e} {:.16e} {:.16e}",
            p[0],
            p[1],
            u[2 * n],
            u[2 * n + 1]
        )?;
    }
    writeln!(out, "triangles {}", space.num_elements())?;
    for (e, nodes) in space.element_nodes().iter().enumerate() {
        let strain = space.strain_of_element(e, u).norm();
        writeln!(out, "{} {} {} {strain:.16e}", nodes[0], nodes[1], nodes[2])?;
    }
    let path = space.path();
    writeln!(out, "crack_segments {}", path.num_segments())?;
    for s in 0..path.num_segments() {
        let [a, b] = path.segment(s);
        writeln!(out, "{a} {b} {}", u8::from(!constraints.is_tied(s)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::crack::{insert_crack, CrackPath};
    use crate::domain::mesh::build_rect_mesh;

    #[test]
    fn snapshot_layout() {
        let mesh = build_rect_mesh(1.0, 1.0, 4, 4).unwrap();
        let path = CrackPath::from_polyline(&mesh, &[[0.25, 0.5], [0.75, 0.5]], vec![0.0, 0.5]).unwrap();
        let space = insert_crack(&mesh, path).unwrap();
        let u = space.interpolate(|p| [p[0], 0.0]);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &space, 3, 0.25, &u, &space.active_constraints(0.25)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "step 3");
        assert_eq!(lines[3], "nodes 26");
        let tri_header = 4 + 26;
        assert_eq!(lines[tri_header], "triangles 32");
        let crack_header = tri_header + 1 + 32;
        assert_eq!(lines[crack_header], "crack_segments 2");
        assert!(lines[crack_header + 1].ends_with(" 1"));
        assert!(lines[crack_header + 2].ends_with(" 0"));
        let strain: f64 = lines[tri_header + 1].split_whitespace().nth(3).unwrap().parse().unwrap();
        assert!((strain - 1.0).abs() < 1e-14);
        assert_eq!(snapshot_file_name(12), "snap_12.txt");
    }
}
