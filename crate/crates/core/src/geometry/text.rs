use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{NetworkTopology, NodeId, Position2D, Positions, RangingPair, Roles};
use crate::error::{Error, Result};

/// Non-empty, comment-stripped lines split on whitespace, with 1-based line
/// numbers.
pub(crate) fn tokenized_lines(src: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    src.lines().enumerate().filter_map(|(i, line)| {
        let content = line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        (!tokens.is_empty()).then_some((i + 1, tokens))
    })
}

pub(crate) fn parse_field<T: FromStr>(line: usize, token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{token}`")))
}

pub(crate) fn expect_arity(line: usize, tokens: &[&str], n: usize) -> Result<()> {
    if tokens.len() != n {
        return Err(Error::parse(
            line,
            format!("`{}` takes {} argument(s), got {}", tokens[0], n - 1, tokens.len() - 1),
        ));
    }
    Ok(())
}

/// Topology and optional ground-truth positions in the line-oriented text
/// format:
///
/// ```text
/// # comment
/// node 1 AT
/// pair 1 0
/// pos 1 2.0 0.0
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryFile {
    pub topology: NetworkTopology,
    pub positions: Positions,
}

impl GeometryFile {
    pub fn parse(src: &str) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut pairs = Vec::new();
        let mut positions = BTreeMap::new();

        for (line, tokens) in tokenized_lines(src) {
            match tokens[0] {
                "node" => {
                    expect_arity(line, &tokens, 3)?;
                    let id = NodeId(parse_field(line, tokens[1], "node id")?);
                    let roles: Roles = tokens[2].parse().map_err(|e| Error::parse(line, e))?;
                    nodes.push((id, roles));
                }
                "pair" => {
                    expect_arity(line, &tokens, 3)?;
                    pairs.push(RangingPair {
                        tag: NodeId(parse_field(line, tokens[1], "tag id")?),
                        anchor: NodeId(parse_field(line, tokens[2], "anchor id")?),
                    });
                }
                "pos" => {
                    expect_arity(line, &tokens, 4)?;
                    let id = NodeId(parse_field(line, tokens[1], "node id")?);
                    let x: f64 = parse_field(line, tokens[2], "x coordinate")?;
                    let y: f64 = parse_field(line, tokens[3], "y coordinate")?;
                    let p = Position2D::new(x, y);
                    if !p.is_finite() {
                        return Err(Error::parse(line, "coordinates must be finite"));
                    }
                    positions.insert(id, p);
                }
                other => return Err(Error::parse(line, format!("unknown directive `{other}`"))),
            }
        }

        Ok(GeometryFile {
            topology: NetworkTopology { nodes, pairs },
            positions,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, roles) in &self.topology.nodes {
            let _ = writeln!(out, "node {id} {roles}");
        }
        for pair in &self.topology.pairs {
            let _ = writeln!(out, "pair {} {}", pair.tag, pair.anchor);
        }
        for (id, p) in &self.positions {
            let _ = writeln!(out, "pos {id} {:?} {:?}", p.x, p.y);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{canonical_geometry, Shape};

    #[test]
    fn parses_canonical_network_with_comments() {
        let src = "\
# four-node network
node 0 A
node 1 AT   # dual role
node 2 T
node 3 T

pair 1 0
pair 2 0
pair 2 1
pair 3 0
pair 3 1
pos 2 2.0 2.0
";
        let file = GeometryFile::parse(src).unwrap();
        assert_eq!(file.topology, NetworkTopology::canonical());
        assert_eq!(file.positions[&NodeId(2)], Position2D::new(2.0, 2.0));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let file = GeometryFile {
            topology: NetworkTopology::canonical(),
            positions: canonical_geometry(Shape::Quadrilateral, 1.7).unwrap(),
        };
        assert_eq!(GeometryFile::parse(&file.to_text()).unwrap(), file);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = GeometryFile::parse("node 0 A\npair 1 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = GeometryFile::parse("node 0 Q\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(GeometryFile::parse("frob 1\n").is_err());
        assert!(GeometryFile::parse("pos 1 2.0\n").is_err());
    }
}
