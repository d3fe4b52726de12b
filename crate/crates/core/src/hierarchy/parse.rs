//! Taxonomy text formats.
//!
//! Indented form: one node per line, the number of leading tabs is the
//! depth, the root is the first line. Edge-list form: `parent<TAB>child` per
//! line, root inferred. Blank lines and lines starting with `#` are ignored.

use std::path::Path;

use super::{Result, Taxonomy, TaxonomyBuilder, TaxonomyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TaxonomyFormat {
    /// Edge list if the first content line has an interior tab.
    #[default]
    Auto,
    Indented,
    EdgeList,
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches(['\r', ' '])))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn detect(text: &str) -> TaxonomyFormat {
    match content_lines(text).next() {
        Some((_, l)) if l.trim_start_matches('\t').contains('\t') => TaxonomyFormat::EdgeList,
        _ => TaxonomyFormat::Indented,
    }
}

pub fn parse_taxonomy(text: &str, format: TaxonomyFormat) -> Result<Taxonomy> {
    let format = match format {
        TaxonomyFormat::Auto => detect(text),
        f => f,
    };
    match format {
        TaxonomyFormat::EdgeList => parse_edge_list(text),
        _ => parse_indented(text),
    }
}

pub fn parse_taxonomy_file(path: impl AsRef<Path>, format: TaxonomyFormat) -> Result<Taxonomy> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| TaxonomyError::Io(format!("{}: {e}", path.display())))?;
    parse_taxonomy(&text, format)
}

fn parse_indented(text: &str) -> Result<Taxonomy> {
    let mut b = TaxonomyBuilder::new();
    // stack[d] = label of the most recent node at depth d
    let mut stack: Vec<String> = Vec::new();
    for (line, raw) in content_lines(text) {
        let depth = raw.len() - raw.trim_start_matches('\t').len();
        let label = &raw[depth..];
        if label.starts_with(' ') {
            return Err(TaxonomyError::Malformed {
                line,
                reason: "indentation must use tabs".into(),
            });
        }
        if label.contains('\t') {
            return Err(TaxonomyError::Malformed {
                line,
                reason: "tab inside a label".into(),
            });
        }
        if stack.is_empty() {
            if depth != 0 {
                return Err(TaxonomyError::Malformed {
                    line,
                    reason: "the first node must be the unindented root".into(),
                });
            }
            b.node(label);
            stack.push(label.to_string());
            continue;
        }
        if depth == 0 {
            return Err(TaxonomyError::MultipleRoots(vec![
                stack[0].clone(),
                label.to_string(),
            ]));
        }
        if depth > stack.len() {
            return Err(TaxonomyError::Malformed {
                line,
                reason: format!("indentation jumps to depth {depth} below depth {}", stack.len() - 1),
            });
        }
        stack.truncate(depth);
        let parent = stack[depth - 1].clone();
        if b.contains(label) && b.parent_of(label).is_none() {
            // The root (or an earlier parentless mention) reappearing.
            return Err(TaxonomyError::DuplicateLabel {
                label: label.to_string(),
                line,
            });
        }
        b.edge(&parent, label, line)?;
        stack.push(label.to_string());
    }
    if stack.is_empty() {
        return Err(TaxonomyError::Empty);
    }
    b.build()
}

fn parse_edge_list(text: &str) -> Result<Taxonomy> {
    let mut b = TaxonomyBuilder::new();
    let mut any = false;
    for (line, raw) in content_lines(text) {
        let mut parts = raw.split('\t');
        let (parent, child) = match (parts.next(), parts.next(), parts.next()) {
            (Some(p), Some(c), None) if !p.is_empty() && !c.is_empty() => (p, c),
            _ => {
                return Err(TaxonomyError::Malformed {
                    line,
                    reason: "expected `parent<TAB>child`".into(),
                })
            }
        };
        b.edge(parent, child, line)?;
        any = true;
    }
    if !any {
        return Err(TaxonomyError::Empty);
    }
    b.build()
}
