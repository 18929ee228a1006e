use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::{Error, Result};

/// Parses `src<TAB>dst` lines (0-indexed). Blank lines and everything after a
/// `#` are ignored; any whitespace separates the two fields.
pub fn parse_edge_list(reader: impl BufRead, path: &Path) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { path: path.to_path_buf(), line: lineno + 1, msg };
        let mut fields = body.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(format!("expected `src<TAB>dst`, got {body:?}")));
        };
        let parse = |s: &str| s.parse::<usize>().map_err(|_| parse_err(format!("invalid node id {s:?}")));
        edges.push((parse(a)?, parse(b)?));
    }
    Ok(edges)
}

pub fn read_edge_list(path: &Path) -> Result<Vec<(usize, usize)>> {
    let file = File::open(path)?;
    parse_edge_list(BufReader::new(file), path)
}

pub fn write_edge_list(mut w: impl Write, edges: &[(usize, usize)]) -> Result<()> {
    for &(s, d) in edges {
        writeln!(w, "{s}\t{d}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let text = "# header\n0\t1\n\n2 3 # trailing\n";
        let edges = parse_edge_list(text.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(edges, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn reports_line_numbers() {
        let text = "0\t1\n1\tx\n";
        match parse_edge_list(text.as_bytes(), Path::new("e.tsv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_edge_list("0 1 2\n".as_bytes(), Path::new("e")).is_err());
    }

    #[test]
    fn write_then_parse() {
        let edges = vec![(0, 4), (3, 1)];
        let mut buf = Vec::new();
        write_edge_list(&mut buf, &edges).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0\t4\n3\t1\n");
        assert_eq!(parse_edge_list(&buf[..], Path::new("m")).unwrap(), edges);
    }
}
