//! `user<TAB>item` edge lists.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{id_order, BipartiteGraph, IdMap};

/// Writes every edge as `user<TAB>item`, sorted by external id (integer ids
/// numerically before other ids), so equal graphs give equal bytes.
pub fn write_edge_list<W: Write>(graph: &BipartiteGraph, ids: &IdMap, mut out: W) -> Result<()> {
    let mut rows: Vec<(&str, &str)> =
        graph.edges().map(|(u, i)| (ids.user_name(u), ids.item_name(i))).collect();
    rows.sort_by(|a, b| id_order(a.0, b.0).then_with(|| id_order(a.1, b.1)));
    for (u, i) in rows {
        writeln!(out, "{u}\t{i}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_edge_list(graph: &BipartiteGraph, ids: &IdMap, path: &Path) -> Result<()> {
    write_edge_list(graph, ids, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(u), Some(i), None) if !u.is_empty() && !i.is_empty() => {
                pairs.push((u.to_owned(), i.to_owned()))
            }
            _ => return Err(Error::Format(format!("edge list line {}: expected user<TAB>item", n + 1))),
        }
    }
    Ok(pairs)
}

pub fn load_edge_list(path: &Path) -> Result<Vec<(String, String)>> {
    read_edge_list(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    #[test]
    fn dump_is_sorted_and_round_trips() {
        let pairs = [("10", "b"), ("2", "a"), ("x", "a"), ("2", "b")];
        let (g, ids) = build_graph(&pairs).unwrap();
        let mut out = Vec::new();
        write_edge_list(&g, &ids, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "2\ta\n2\tb\n10\tb\nx\ta\n");
        let back = read_edge_list(text.as_bytes()).unwrap();
        let (g2, ids2) = build_graph(&back).unwrap();
        assert_eq!(g2, g);
        assert_eq!(ids2, ids);
    }

    #[test]
    fn bad_line_rejected() {
        assert!(read_edge_list("a\tb\tc\n".as_bytes()).is_err());
        assert!(read_edge_list("ab\n".as_bytes()).is_err());
    }
}
