//! MSH 4.1 ASCII reader/writer and a versioned internal text format.
//!
//! Only the ASCII flavor of MSH 4.1 is accepted; binary files are rejected
//! up front. Element types: 4 (linear tet) and 6 (linear prism) form the
//! volume, 2 (triangle) and 3 (quad) carry boundary tags through their
//! entity's physical name. Physical names map onto [`BoundaryTag`] via the
//! fixed naming convention ("freesurface", "body", "bathymetry", "farfield",
//! "symx", "symy", "special1", ...).

use super::{BoundaryTag, HybridMesh, MeshError};
use std::collections::BTreeMap;
use std::fmt::Write as _;

struct Lines<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            lines: text.lines().collect(),
            pos: 0,
        }
    }

    fn line_no(&self) -> usize {
        self.pos
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        while self.pos < self.lines.len() {
            let l = self.lines[self.pos].trim();
            self.pos += 1;
            if !l.is_empty() {
                return Some((self.pos, l));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), MeshError> {
        self.next().ok_or_else(|| MeshError::Parse {
            line: self.line_no(),
            message: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

fn fields(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, MeshError> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from {tok:?}")))
}

/// Parse an MSH 4.1 ASCII file into a validated hybrid mesh.
pub fn parse_msh(text: &str) -> Result<HybridMesh, MeshError> {
    let mut lines = Lines::new(text);

    // physical (dim, tag) -> name
    let mut physical: BTreeMap<(i32, i64), String> = BTreeMap::new();
    // surface entity tag -> physical tags
    let mut surface_entities: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    // node tag -> coordinates
    let mut nodes: BTreeMap<i64, [f64; 3]> = BTreeMap::new();
    let mut tets: Vec<[i64; 4]> = Vec::new();
    let mut prisms: Vec<[i64; 6]> = Vec::new();
    // (face node tags, surface entity)
    let mut faces: Vec<(Vec<i64>, i64)> = Vec::new();

    let mut seen_format = false;

    while let Some((ln, line)) = lines.next() {
        match line {
            "$MeshFormat" => {
                let (ln, l) = lines.expect("version line")?;
                let f = fields(l);
                if f.len() < 3 {
                    return Err(parse_err(ln, "malformed $MeshFormat line"));
                }
                if f[0] != "4.1" {
                    return Err(parse_err(
                        ln,
                        format!("unsupported MSH version {}; only 4.1 is supported", f[0]),
                    ));
                }
                let file_type: i32 = parse_num(f[1], ln, "file type")?;
                if file_type != 0 {
                    return Err(parse_err(
                        ln,
                        "binary MSH files are not supported; re-export as ASCII",
                    ));
                }
                expect_end(&mut lines, "$EndMeshFormat")?;
                seen_format = true;
            }
            "$PhysicalNames" => {
                let (ln, l) = lines.expect("physical name count")?;
                let n: usize = parse_num(l, ln, "physical name count")?;
                for _ in 0..n {
                    let (ln, l) = lines.expect("physical name")?;
                    let f = fields(l);
                    if f.len() < 3 {
                        return Err(parse_err(ln, "malformed physical name line"));
                    }
                    let dim: i32 = parse_num(f[0], ln, "dimension")?;
                    let tag: i64 = parse_num(f[1], ln, "tag")?;
                    let name = l
                        .splitn(3, char::is_whitespace)
                        .nth(2)
                        .unwrap_or("")
                        .trim()
                        .trim_matches('"')
                        .to_string();
                    physical.insert((dim, tag), name);
                }
                expect_end(&mut lines, "$EndPhysicalNames")?;
            }
            "$Entities" => {
                let (ln, l) = lines.expect("entity counts")?;
                let f = fields(l);
                if f.len() < 4 {
                    return Err(parse_err(ln, "malformed $Entities header"));
                }
                let np: usize = parse_num(f[0], ln, "point count")?;
                let nc: usize = parse_num(f[1], ln, "curve count")?;
                let ns: usize = parse_num(f[2], ln, "surface count")?;
                let nv: usize = parse_num(f[3], ln, "volume count")?;
                for _ in 0..np {
                    lines.expect("point entity")?;
                }
                for _ in 0..nc {
                    lines.expect("curve entity")?;
                }
                for _ in 0..ns {
                    let (ln, l) = lines.expect("surface entity")?;
                    let f = fields(l);
                    if f.len() < 8 {
                        return Err(parse_err(ln, "malformed surface entity"));
                    }
                    let tag: i64 = parse_num(f[0], ln, "surface tag")?;
                    let nphys: usize = parse_num(f[7], ln, "physical tag count")?;
                    let mut phys = Vec::with_capacity(nphys);
                    for k in 0..nphys {
                        phys.push(parse_num(
                            f.get(8 + k).copied().ok_or_else(|| {
                                parse_err(ln, "surface entity physical tags truncated")
                            })?,
                            ln,
                            "physical tag",
                        )?);
                    }
                    surface_entities.insert(tag, phys);
                }
                for _ in 0..nv {
                    lines.expect("volume entity")?;
                }
                expect_end(&mut lines, "$EndEntities")?;
            }
            "$Nodes" => {
                let (ln, l) = lines.expect("nodes header")?;
                let f = fields(l);
                if f.len() < 4 {
                    return Err(parse_err(ln, "malformed $Nodes header"));
                }
                let nblocks: usize = parse_num(f[0], ln, "node block count")?;
                for _ in 0..nblocks {
                    let (ln, l) = lines.expect("node block header")?;
                    let f = fields(l);
                    if f.len() < 4 {
                        return Err(parse_err(ln, "malformed node block header"));
                    }
                    let count: usize = parse_num(f[3], ln, "node count")?;
                    let mut tags = Vec::with_capacity(count);
                    for _ in 0..count {
                        let (ln, l) = lines.expect("node tag")?;
                        tags.push(parse_num::<i64>(l, ln, "node tag")?);
                    }
                    for tag in tags {
                        let (ln, l) = lines.expect("node coordinates")?;
                        let f = fields(l);
                        if f.len() < 3 {
                            return Err(parse_err(ln, "expected x y z coordinates"));
                        }
                        let x: f64 = parse_num(f[0], ln, "x coordinate")?;
                        let y: f64 = parse_num(f[1], ln, "y coordinate")?;
                        let z: f64 = parse_num(f[2], ln, "z coordinate")?;
                        nodes.insert(tag, [x, y, z]);
                    }
                }
                expect_end(&mut lines, "$EndNodes")?;
            }
            "$Elements" => {
                let (ln, l) = lines.expect("elements header")?;
                let f = fields(l);
                if f.len() < 4 {
                    return Err(parse_err(ln, "malformed $Elements header"));
                }
                let nblocks: usize = parse_num(f[0], ln, "element block count")?;
                for _ in 0..nblocks {
                    let (ln, l) = lines.expect("element block header")?;
                    let f = fields(l);
                    if f.len() < 4 {
                        return Err(parse_err(ln, "malformed element block header"));
                    }
                    let dim: i32 = parse_num(f[0], ln, "entity dimension")?;
                    let entity: i64 = parse_num(f[1], ln, "entity tag")?;
                    let etype: i32 = parse_num(f[2], ln, "element type")?;
                    let count: usize = parse_num(f[3], ln, "element count")?;
                    let nodes_per = match etype {
                        1 => 2,  // line, skipped
                        2 => 3,  // triangle
                        3 => 4,  // quad
                        4 => 4,  // tet
                        6 => 6,  // prism
                        15 => 1, // point, skipped
                        other => {
                            return Err(parse_err(
                                ln,
                                format!(
                                    "element type {other} not supported; only linear tets (4), \
                                     prisms (6), triangles (2), and quads (3)"
                                ),
                            ))
                        }
                    };
                    for _ in 0..count {
                        let (ln, l) = lines.expect("element line")?;
                        let f = fields(l);
                        if f.len() < 1 + nodes_per {
                            return Err(parse_err(ln, "element line truncated"));
                        }
                        let conn: Vec<i64> = f[1..=nodes_per]
                            .iter()
                            .map(|t| parse_num::<i64>(t, ln, "node tag"))
                            .collect::<Result<_, _>>()?;
                        match etype {
                            4 => tets.push([conn[0], conn[1], conn[2], conn[3]]),
                            6 => prisms.push([
                                conn[0], conn[1], conn[2], conn[3], conn[4], conn[5],
                            ]),
                            2 | 3 => {
                                if dim != 2 {
                                    return Err(parse_err(
                                        ln,
                                        "surface element in a non-surface entity block",
                                    ));
                                }
                                faces.push((conn, entity));
                            }
                            _ => {} // lines and points carry no information here
                        }
                    }
                }
                expect_end(&mut lines, "$EndElements")?;
            }
            other if other.starts_with('$') && !other.starts_with("$End") => {
                // skip unknown section
                let end = format!("$End{}", &other[1..]);
                loop {
                    let (_, l) = lines.expect(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            other => {
                return Err(parse_err(ln, format!("unexpected content {other:?}")));
            }
        }
    }

    if !seen_format {
        return Err(parse_err(0, "missing $MeshFormat section"));
    }
    if nodes.is_empty() {
        return Err(parse_err(0, "mesh contains no nodes"));
    }

    // compact node numbering
    let mut remap: BTreeMap<i64, usize> = BTreeMap::new();
    let mut vertices = Vec::with_capacity(nodes.len());
    for (tag, xyz) in &nodes {
        remap.insert(*tag, vertices.len());
        vertices.push(*xyz);
    }
    let lookup = |tag: i64| -> Result<usize, MeshError> {
        remap
            .get(&tag)
            .copied()
            .ok_or_else(|| parse_err(0, format!("element references unknown node {tag}")))
    };

    let tets: Vec<[usize; 4]> = tets
        .iter()
        .map(|t| Ok([lookup(t[0])?, lookup(t[1])?, lookup(t[2])?, lookup(t[3])?]))
        .collect::<Result<_, MeshError>>()?;
    let prisms: Vec<[usize; 6]> = prisms
        .iter()
        .map(|p| {
            Ok([
                lookup(p[0])?,
                lookup(p[1])?,
                lookup(p[2])?,
                lookup(p[3])?,
                lookup(p[4])?,
                lookup(p[5])?,
            ])
        })
        .collect::<Result<_, MeshError>>()?;

    // resolve boundary tags through entity -> physical -> name
    let mut tagged: Vec<(Vec<usize>, BoundaryTag)> = Vec::with_capacity(faces.len());
    for (conn, entity) in faces {
        let phys = surface_entities.get(&entity).ok_or_else(|| {
            MeshError::Tagging(format!("surface entity {entity} not declared in $Entities"))
        })?;
        if phys.len() != 1 {
            return Err(MeshError::Tagging(format!(
                "surface entity {entity} must carry exactly one physical group, has {}",
                phys.len()
            )));
        }
        let name = physical.get(&(2, phys[0])).ok_or_else(|| {
            MeshError::Tagging(format!("physical surface {} has no name", phys[0]))
        })?;
        let tag = BoundaryTag::from_name(name)?;
        let conn: Vec<usize> = conn.iter().map(|&t| lookup(t)).collect::<Result<_, _>>()?;
        tagged.push((conn, tag));
    }

    HybridMesh::new(vertices, tets, prisms, tagged)
}

fn expect_end(lines: &mut Lines, end: &str) -> Result<(), MeshError> {
    let (ln, l) = lines.expect(end)?;
    if l != end {
        return Err(parse_err(ln, format!("expected {end}, found {l:?}")));
    }
    Ok(())
}

/// Serialize a mesh as MSH 4.1 ASCII; facets are grouped into one surface
/// entity per boundary tag.
pub fn write_msh(mesh: &HybridMesh) -> String {
    let mut out = String::new();
    out.push_str("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n");

    // distinct tags, entity/physical tag = position + 1
    let mut tags: Vec<BoundaryTag> = mesh.boundary_facets.iter().map(|f| f.tag).collect();
    tags.sort_unstable();
    tags.dedup();

    out.push_str("$PhysicalNames\n");
    let _ = writeln!(out, "{}", tags.len());
    for (k, tag) in tags.iter().enumerate() {
        let _ = writeln!(out, "2 {} \"{}\"", k + 1, tag.name());
    }
    out.push_str("$EndPhysicalNames\n");

    let (lo, hi) = mesh.bbox();
    out.push_str("$Entities\n");
    let _ = writeln!(out, "0 0 {} 1", tags.len());
    for (k, _) in tags.iter().enumerate() {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} 1 {} 0",
            k + 1,
            lo[0],
            lo[1],
            lo[2],
            hi[0],
            hi[1],
            hi[2],
            k + 1
        );
    }
    let _ = writeln!(
        out,
        "1 {} {} {} {} {} {} 0 0",
        lo[0], lo[1], lo[2], hi[0], hi[1], hi[2]
    );
    out.push_str("$EndEntities\n");

    out.push_str("$Nodes\n");
    let n = mesh.vertices.len();
    let _ = writeln!(out, "1 {n} 1 {n}");
    let _ = writeln!(out, "3 1 0 {n}");
    for i in 1..=n {
        let _ = writeln!(out, "{i}");
    }
    for v in &mesh.vertices {
        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2]);
    }
    out.push_str("$EndNodes\n");

    // element blocks: per tag tris, per tag quads, then tets, then prisms
    struct Block {
        dim: i32,
        entity: i64,
        etype: i32,
        rows: Vec<Vec<usize>>,
    }
    let mut blocks: Vec<Block> = Vec::new();
    for (k, tag) in tags.iter().enumerate() {
        let mut tris = Vec::new();
        let mut quads = Vec::new();
        for bf in &mesh.boundary_facets {
            if bf.tag != *tag {
                continue;
            }
            let verts = mesh.face_vertex_ids(bf.element, bf.local_face);
            if verts.len() == 3 {
                tris.push(verts);
            } else {
                quads.push(verts);
            }
        }
        if !tris.is_empty() {
            blocks.push(Block {
                dim: 2,
                entity: (k + 1) as i64,
                etype: 2,
                rows: tris,
            });
        }
        if !quads.is_empty() {
            blocks.push(Block {
                dim: 2,
                entity: (k + 1) as i64,
                etype: 3,
                rows: quads,
            });
        }
    }
    if !mesh.tets.is_empty() {
        blocks.push(Block {
            dim: 3,
            entity: 1,
            etype: 4,
            rows: mesh.tets.iter().map(|t| t.to_vec()).collect(),
        });
    }
    if !mesh.prisms.is_empty() {
        blocks.push(Block {
            dim: 3,
            entity: 1,
            etype: 6,
            rows: mesh.prisms.iter().map(|p| p.to_vec()).collect(),
        });
    }

    let total: usize = blocks.iter().map(|b| b.rows.len()).sum();
    out.push_str("$Elements\n");
    let _ = writeln!(out, "{} {} 1 {}", blocks.len(), total, total);
    let mut next_tag = 1usize;
    for b in &blocks {
        let _ = writeln!(out, "{} {} {} {}", b.dim, b.entity, b.etype, b.rows.len());
        for row in &b.rows {
            let _ = write!(out, "{next_tag}");
            for v in row {
                let _ = write!(out, " {}", v + 1);
            }
            out.push('\n');
            next_tag += 1;
        }
    }
    out.push_str("$EndElements\n");
    out
}

const INTERNAL_HEADER: &str = "hydrosem-mesh 1";

/// Versioned internal plain-text serialization for golden tests.
pub fn write_internal(mesh: &HybridMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{INTERNAL_HEADER}");
    let _ = writeln!(out, "vertices {}", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2]);
    }
    let _ = writeln!(out, "tets {}", mesh.tets.len());
    for t in &mesh.tets {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(out, "prisms {}", mesh.prisms.len());
    for p in &mesh.prisms {
        let _ = writeln!(out, "{} {} {} {} {} {}", p[0], p[1], p[2], p[3], p[4], p[5]);
    }
    let _ = writeln!(out, "facets {}", mesh.boundary_facets.len());
    for f in &mesh.boundary_facets {
        let _ = writeln!(out, "{} {} {}", f.element, f.local_face, f.tag.name());
    }
    out
}

/// Parse the internal format written by [`write_internal`].
pub fn parse_internal(text: &str) -> Result<HybridMesh, MeshError> {
    let mut lines = Lines::new(text);
    let (ln, l) = lines.expect("header")?;
    if l != INTERNAL_HEADER {
        return Err(parse_err(ln, format!("unknown header {l:?}")));
    }

    let section = |lines: &mut Lines, name: &str| -> Result<usize, MeshError> {
        let (ln, l) = lines.expect(name)?;
        let f = fields(l);
        if f.len() != 2 || f[0] != name {
            return Err(parse_err(ln, format!("expected \"{name} <count>\"")));
        }
        parse_num(f[1], ln, "count")
    };

    let nv = section(&mut lines, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.expect("vertex")?;
        let f = fields(l);
        if f.len() != 3 {
            return Err(parse_err(ln, "expected x y z"));
        }
        vertices.push([
            parse_num(f[0], ln, "x")?,
            parse_num(f[1], ln, "y")?,
            parse_num(f[2], ln, "z")?,
        ]);
    }
    let nt = section(&mut lines, "tets")?;
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = lines.expect("tet")?;
        let f = fields(l);
        if f.len() != 4 {
            return Err(parse_err(ln, "expected 4 vertex ids"));
        }
        tets.push([
            parse_num(f[0], ln, "id")?,
            parse_num(f[1], ln, "id")?,
            parse_num(f[2], ln, "id")?,
            parse_num(f[3], ln, "id")?,
        ]);
    }
    let np = section(&mut lines, "prisms")?;
    let mut prisms = Vec::with_capacity(np);
    for _ in 0..np {
        let (ln, l) = lines.expect("prism")?;
        let f = fields(l);
        if f.len() != 6 {
            return Err(parse_err(ln, "expected 6 vertex ids"));
        }
        prisms.push([
            parse_num(f[0], ln, "id")?,
            parse_num(f[1], ln, "id")?,
            parse_num(f[2], ln, "id")?,
            parse_num(f[3], ln, "id")?,
            parse_num(f[4], ln, "id")?,
            parse_num(f[5], ln, "id")?,
        ]);
    }
    let nf = section(&mut lines, "facets")?;
    let mut tagged = Vec::with_capacity(nf);
    let n_tets = tets.len();
    for _ in 0..nf {
        let (ln, l) = lines.expect("facet")?;
        let f = fields(l);
        if f.len() != 3 {
            return Err(parse_err(ln, "expected: element local_face tag"));
        }
        let element: usize = parse_num(f[0], ln, "element")?;
        let local_face: usize = parse_num(f[1], ln, "local face")?;
        let tag = BoundaryTag::from_name(f[2])?;
        if element >= n_tets + prisms.len() {
            return Err(parse_err(ln, "facet references a missing element"));
        }
        let shape = if element < n_tets {
            crate::refelem::Shape::Tet
        } else {
            crate::refelem::Shape::Prism
        };
        if local_face >= shape.face_count() {
            return Err(parse_err(ln, "facet references a missing local face"));
        }
        let conn: Vec<usize> = shape
            .face_corners(local_face)
            .iter()
            .map(|&c| {
                if element < n_tets {
                    tets[element][c]
                } else {
                    prisms[element - n_tets][c]
                }
            })
            .collect();
        tagged.push((conn, tag));
    }

    HybridMesh::new(vertices, tets, prisms, tagged)
}
