//! Newick reading and writing.
//!
//! Grammar: `tree := subtree ";"`, `subtree := "(" subtree ("," subtree)+ ")"
//! [label] [":" length] | label [":" length]`. Labels run to the next
//! structural character; whitespace between tokens is skipped. A missing
//! branch length is read as 0 and flagged.

use std::collections::HashSet;

use super::{PhyloError, Tree};

/// Parse result: the tree plus a flag for silently-defaulted branch lengths.
#[derive(Debug, Clone)]
pub struct ParsedNewick {
    pub tree: Tree,
    pub missing_lengths: bool,
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    missing_lengths: bool,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> PhyloError {
        PhyloError::Syntax {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_whitespace())
        {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn label(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if matches!(b, b'(' | b')' | b',' | b':' | b';') || b.is_ascii_whitespace() {
                break;
            }
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            Some(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
        }
    }

    fn length(&mut self) -> Result<f64, PhyloError> {
        if self.peek() == Some(b':') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while let Some(&b) = self.bytes.get(self.pos) {
                if matches!(b, b'+' | b'-' | b'.' | b'e' | b'E') || b.is_ascii_digit() {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            let text = std::str::from_utf8(&self.bytes[start..self.pos])
                .map_err(|_| self.err("invalid utf-8 in branch length"))?;
            text.parse::<f64>()
                .map_err(|_| self.err(format!("invalid branch length {text:?}")))
        } else {
            self.missing_lengths = true;
            Ok(0.0)
        }
    }

    fn subtree(&mut self, tree: &mut Tree, parent: usize) -> Result<(), PhyloError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let node = tree.add_node(parent, None, 0.0);
                self.subtree(tree, node)?;
                let mut arity = 1;
                while self.peek() == Some(b',') {
                    self.pos += 1;
                    self.subtree(tree, node)?;
                    arity += 1;
                }
                if arity < 2 {
                    return Err(self.err("internal node needs at least two children"));
                }
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')' or ','"));
                }
                self.pos += 1;
                tree.nodes[node].label = self.label();
                tree.nodes[node].length = self.length()?;
                Ok(())
            }
            Some(b')') | Some(b',') | Some(b';') | None => Err(self.err("expected a subtree")),
            Some(_) => {
                let label = self
                    .label()
                    .ok_or_else(|| self.err("expected a leaf label"))?;
                let node = tree.add_node(parent, Some(label), 0.0);
                tree.nodes[node].length = self.length()?;
                Ok(())
            }
        }
    }
}

/// Parses one Newick tree. The rooted flag is set when the top-level node
/// has exactly two children (the usual rooted-binary convention); callers
/// that know better can override it.
pub fn parse_newick(text: &str) -> Result<ParsedNewick, PhyloError> {
    let mut p = Parser {
        bytes: text.as_bytes(),
        pos: 0,
        missing_lengths: false,
    };
    let mut tree = Tree::new();
    match p.peek() {
        Some(b'(') => {
            p.pos += 1;
            p.subtree(&mut tree, 0)?;
            while p.peek() == Some(b',') {
                p.pos += 1;
                p.subtree(&mut tree, 0)?;
            }
            if p.peek() != Some(b')') {
                return Err(p.err("expected ')' or ','"));
            }
            p.pos += 1;
            tree.nodes[0].label = p.label();
            if p.peek() == Some(b':') {
                return Err(p.err("the root cannot carry a branch length"));
            }
        }
        _ => return Err(p.err("tree must start with '('")),
    }
    if p.peek() != Some(b';') {
        return Err(p.err("expected ';'"));
    }
    p.pos += 1;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("trailing content after ';'"));
    }
    if tree.nodes[0].children.len() < 2 {
        return Err(PhyloError::Syntax {
            position: 0,
            message: "the root needs at least two children".into(),
        });
    }
    let mut seen = HashSet::new();
    for id in tree.leaves() {
        match &tree.nodes[id].label {
            Some(l) => {
                if !seen.insert(l.clone()) {
                    return Err(PhyloError::DuplicateLeaf(l.clone()));
                }
            }
            None => {
                return Err(PhyloError::Syntax {
                    position: 0,
                    message: "every leaf needs a label".into(),
                })
            }
        }
    }
    tree.rooted = tree.nodes[0].children.len() == 2;
    Ok(ParsedNewick {
        tree,
        missing_lengths: p.missing_lengths,
    })
}

/// Writes a tree as Newick with branch lengths on every non-root node.
pub fn write_newick(tree: &Tree) -> String {
    fn node(tree: &Tree, id: usize, out: &mut String) {
        if !tree.is_leaf(id) {
            out.push('(');
            for (k, &c) in tree.nodes[id].children.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                node(tree, c, out);
            }
            out.push(')');
        }
        if let Some(l) = &tree.nodes[id].label {
            out.push_str(l);
        }
        if tree.nodes[id].parent.is_some() {
            out.push_str(&format!(":{}", tree.nodes[id].length));
        }
    }
    let mut out = String::new();
    node(tree, tree.root, &mut out);
    out.push(';');
    out
}
