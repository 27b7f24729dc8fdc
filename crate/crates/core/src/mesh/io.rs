//! ASCII mesh format.
//!
//! ```text
//! cbcflow-mesh 1
//! nodes <N_v>
//! <x> <y>            (N_v lines)
//! triangles <N_t>
//! <i> <j> <k>        (N_t lines, counterclockwise, 0-based)
//! boundary <N_b>
//! <i> <j> <tag>      (N_b lines, tag in {H, N, OUT})
//! ```
//!
//! Tokens are whitespace separated and `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryTag, Mesh, MeshError};
use crate::output::write_atomic;

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    write_atomic(path.as_ref(), write_mesh(mesh).as_bytes())?;
    Ok(())
}

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("cbcflow-mesh 1\n");
    let _ = writeln!(s, "nodes {}", mesh.n_nodes());
    for p in mesh.nodes() {
        // `Display` for f64 prints the shortest representation that round-trips
        let _ = writeln!(s, "{} {}", p[0], p[1]);
    }
    let _ = writeln!(s, "triangles {}", mesh.n_triangles());
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "boundary {}", mesh.boundary_edges().len());
    for b in mesh.boundary_edges() {
        let _ = writeln!(s, "{} {} {}", b.nodes[0], b.nodes[1], b.tag.token());
    }
    s
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next non-empty line with comments stripped, split into tokens.
    fn next_tokens(&mut self) -> Result<(usize, Vec<&'a str>), MeshError> {
        for (i, line) in self.inner.by_ref() {
            let content = line.split('#').next().unwrap_or("");
            let toks: Vec<&str> = content.split_whitespace().collect();
            self.last = i + 1;
            if !toks.is_empty() {
                return Ok((i + 1, toks));
            }
        }
        Err(MeshError::Parse { line: self.last + 1, message: "unexpected end of file".into() })
    }

    fn header(&mut self, keyword: &str) -> Result<usize, MeshError> {
        let (line, toks) = self.next_tokens()?;
        if toks.len() != 2 || toks[0] != keyword {
            return Err(MeshError::Parse { line, message: format!("expected `{keyword} <count>`") });
        }
        toks[1]
            .parse()
            .map_err(|_| MeshError::Parse { line, message: format!("bad {keyword} count `{}`", toks[1]) })
    }
}

fn parse_index(tok: &str, line: usize, n_nodes: usize) -> Result<usize, MeshError> {
    let v: usize =
        tok.parse().map_err(|_| MeshError::Parse { line, message: format!("bad node index `{tok}`") })?;
    if v >= n_nodes {
        return Err(MeshError::Parse {
            line,
            message: format!("node index {v} out of range (mesh has {n_nodes} nodes)"),
        });
    }
    Ok(v)
}

pub fn parse_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };
    let (line, toks) = lines.next_tokens()?;
    if toks != ["cbcflow-mesh", "1"] {
        return Err(MeshError::Parse { line, message: "expected header `cbcflow-mesh 1`".into() });
    }

    let n_nodes = lines.header("nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (line, toks) = lines.next_tokens()?;
        if toks.len() != 2 {
            return Err(MeshError::Parse { line, message: "expected `x y`".into() });
        }
        let mut p = [0.0; 2];
        for k in 0..2 {
            p[k] = toks[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| MeshError::Parse { line, message: format!("bad coordinate `{}`", toks[k]) })?;
        }
        nodes.push(p);
    }

    let n_tri = lines.header("triangles")?;
    let mut triangles = Vec::with_capacity(n_tri);
    for _ in 0..n_tri {
        let (line, toks) = lines.next_tokens()?;
        if toks.len() != 3 {
            return Err(MeshError::Parse { line, message: "expected `i j k`".into() });
        }
        triangles.push([
            parse_index(toks[0], line, n_nodes)?,
            parse_index(toks[1], line, n_nodes)?,
            parse_index(toks[2], line, n_nodes)?,
        ]);
    }

    let n_b = lines.header("boundary")?;
    let mut boundary = Vec::with_capacity(n_b);
    for _ in 0..n_b {
        let (line, toks) = lines.next_tokens()?;
        if toks.len() != 3 {
            return Err(MeshError::Parse { line, message: "expected `i j tag`".into() });
        }
        let tag = BoundaryTag::from_token(toks[2])
            .ok_or_else(|| MeshError::Parse { line, message: format!("unknown tag `{}`", toks[2]) })?;
        boundary.push((parse_index(toks[0], line, n_nodes)?, parse_index(toks[1], line, n_nodes)?, tag));
    }
    if let Ok((line, _)) = lines.next_tokens() {
        return Err(MeshError::Parse { line, message: "trailing content after boundary section".into() });
    }
    Mesh::new(nodes, triangles, boundary)
}
