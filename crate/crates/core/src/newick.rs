//! Newick reading and writing for ultrametric trees.
//!
//! Branch lengths carry node-time differences. Decoding accepts polytomies
//! (resolved into simultaneous binary merges) and rejects unary nodes,
//! negative lengths and leaves at unequal depth.

use crate::error::{Error, Result};
use crate::tree::{Merge, NodeId, UltrametricTree};

pub fn encode(tree: &UltrametricTree) -> String {
    let mut out = String::new();
    write_node(tree, tree.root(), None, &mut out);
    out.push(';');
    out
}

fn write_node(tree: &UltrametricTree, node: usize, parent_time: Option<f64>, out: &mut String) {
    let n = tree.n_leaves();
    if node < n {
        write_label(&tree.leaves()[node], out);
    } else {
        let [a, b] = tree.merges()[node - n].children;
        let t = tree.node_time(node);
        out.push('(');
        write_node(tree, a, Some(t), out);
        out.push(',');
        write_node(tree, b, Some(t), out);
        out.push(')');
    }
    if let Some(pt) = parent_time {
        out.push(':');
        out.push_str(&format!("{}", pt - tree.node_time(node)));
    }
}

fn write_label(label: &str, out: &mut String) {
    let plain = !label.is_empty()
        && !label
            .chars()
            .any(|c| c.is_whitespace() || "()[]':;,".contains(c));
    if plain {
        out.push_str(label);
    } else {
        out.push('\'');
        out.push_str(&label.replace('\'', "''"));
        out.push('\'');
    }
}

struct RawNode {
    label: Option<String>,
    length: Option<f64>,
    children: Vec<usize>,
    pos: usize,
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    nodes: Vec<RawNode>,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::parse(self.pos, format!("expected '{}'", c as char)))
        }
    }

    fn subtree(&mut self) -> Result<usize> {
        let start = self.pos;
        let mut children = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                children.push(self.subtree()?);
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(Error::parse(self.pos, "expected ',' or ')'")),
                }
            }
            if children.len() == 1 {
                return Err(Error::parse(start, "unary node"));
            }
        }
        let label = self.label()?;
        if children.is_empty() && label.is_none() {
            return Err(Error::parse(self.pos, "leaf without a label"));
        }
        let length = if self.peek() == Some(b':') {
            self.pos += 1;
            Some(self.number()?)
        } else {
            None
        };
        self.nodes.push(RawNode {
            label,
            length,
            children,
            pos: start,
        });
        Ok(self.nodes.len() - 1)
    }

    fn label(&mut self) -> Result<Option<String>> {
        match self.peek() {
            Some(b'\'') => {
                let start = self.pos;
                self.pos += 1;
                let mut out = Vec::new();
                loop {
                    match self.s.get(self.pos) {
                        None => return Err(Error::parse(start, "unterminated quoted label")),
                        Some(b'\'') if self.s.get(self.pos + 1) == Some(&b'\'') => {
                            out.push(b'\'');
                            self.pos += 2;
                        }
                        Some(b'\'') => {
                            self.pos += 1;
                            break;
                        }
                        Some(&c) => {
                            out.push(c);
                            self.pos += 1;
                        }
                    }
                }
                String::from_utf8(out)
                    .map(Some)
                    .map_err(|_| Error::parse(start, "label is not UTF-8"))
            }
            _ => {
                let start = self.pos;
                while self.pos < self.s.len()
                    && !b"()[]':;, \t\r\n".contains(&self.s[self.pos])
                {
                    self.pos += 1;
                }
                if self.pos == start {
                    return Ok(None);
                }
                let text = std::str::from_utf8(&self.s[start..self.pos])
                    .map_err(|_| Error::parse(start, "label is not UTF-8"))?;
                Ok(Some(text.to_string()))
            }
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len()
            && (self.s[self.pos].is_ascii_digit() || b"+-.eE".contains(&self.s[self.pos]))
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
        let v: f64 = text
            .parse()
            .map_err(|_| Error::parse(start, format!("bad branch length `{text}`")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::parse(start, "branch lengths must be finite and non-negative"));
        }
        Ok(v)
    }
}

pub fn decode(text: &str) -> Result<UltrametricTree> {
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
        nodes: Vec::new(),
    };
    let root = p.subtree()?;
    p.expect(b';')?;
    if p.peek().is_some() {
        return Err(Error::parse(p.pos, "trailing input after ';'"));
    }
    let nodes = p.nodes;

    // depth of every node below the root (nodes are stored children-first)
    let mut depth = vec![0.0f64; nodes.len()];
    for i in (0..nodes.len()).rev() {
        for &c in &nodes[i].children {
            let len = nodes[c]
                .length
                .ok_or_else(|| Error::parse(nodes[c].pos, "missing branch length"))?;
            depth[c] = depth[i] + len;
        }
    }
    let leaves: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].children.is_empty()).collect();
    let height = leaves.iter().map(|&i| depth[i]).fold(0.0, f64::max);
    let tol = 1e-9 * height.max(1.0);
    for &i in &leaves {
        if (depth[i] - height).abs() > tol {
            return Err(Error::parse(
                nodes[i].pos,
                format!(
                    "leaves at unequal depth ({} vs {})",
                    depth[i], height
                ),
            ));
        }
    }

    let mut index = vec![usize::MAX; nodes.len()];
    let mut labels = Vec::with_capacity(leaves.len());
    for (k, &i) in leaves.iter().enumerate() {
        index[i] = k;
        labels.push(nodes[i].label.clone().unwrap());
    }
    let mut internal: Vec<usize> = (0..nodes.len()).filter(|&i| !nodes[i].children.is_empty()).collect();
    let time = |i: usize| (height - depth[i]).max(0.0);
    // children precede parents in storage order, which breaks time ties
    internal.sort_by(|&x, &y| time(x).total_cmp(&time(y)).then(x.cmp(&y)));
    let n = labels.len();
    let mut merges: Vec<Merge> = Vec::new();
    for &i in &internal {
        let t = time(i);
        let ch = &nodes[i].children;
        let mut acc = index[ch[0]];
        for &c in &ch[1..] {
            merges.push(Merge {
                time: t,
                children: [acc, index[c]],
                id: NodeId(merges.len() as u64),
            });
            acc = n + merges.len() - 1;
        }
        index[i] = acc;
    }
    let _ = root;
    UltrametricTree::from_merges(labels, merges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kingman::sample_kingman;
    use crate::rng::RandomSource;
    use crate::tree::default_labels;

    #[test]
    fn encodes_two_leaves() {
        let t = UltrametricTree::from_merges(
            vec!["a".into(), "b".into()],
            vec![Merge { time: 0.5, children: [0, 1], id: NodeId(0) }],
        )
        .unwrap();
        assert_eq!(encode(&t), "(a:0.5,b:0.5);");
    }

    #[test]
    fn decodes_two_leaves() {
        let t = decode("(a:0.5,b:0.5);").unwrap();
        assert_eq!(t.leaves(), &["a".to_string(), "b".to_string()]);
        assert_eq!(t.merges().len(), 1);
        assert_eq!(t.root_time(), 0.5);
    }

    #[test]
    fn rejects_unequal_depths() {
        match decode("(a:0.5,b:0.4);") {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("unequal depth")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in ["(a:0.5,b:0.5)", "(a:0.5;b:0.5);", "(a:-1,b:-1);", "((a:1):1,b:2);", "(a:x,b:1);", "(a:1,b:1);x"] {
            assert!(matches!(decode(bad), Err(Error::Parse { .. })), "{bad}");
        }
    }

    #[test]
    fn polytomy_becomes_simultaneous_merges() {
        let t = decode("(a:1,b:1,c:1);").unwrap();
        assert_eq!(t.merges().len(), 2);
        assert!(t.merges().iter().all(|m| m.time == 1.0));
        assert_eq!(t.pair_distance(0, 2), 2.0);
    }

    #[test]
    fn single_leaf_and_quoted_labels() {
        let t = decode("'x y';").unwrap();
        assert_eq!(t.leaves(), &["x y".to_string()]);
        let two = decode("('it''s':1,b:1);").unwrap();
        assert_eq!(two.leaves()[0], "it's");
        assert_eq!(decode(&encode(&two)).unwrap().leaves()[0], "it's");
    }

    #[test]
    fn kingman_round_trip_preserves_distances() {
        for i in 0..200 {
            let t = sample_kingman(8, &mut RandomSource::new(21, i)).unwrap();
            let back = decode(&encode(&t)).unwrap();
            let mut labels = back.leaves().to_vec();
            labels.sort_by_key(|l| l.parse::<usize>().unwrap());
            assert_eq!(labels, default_labels(8));
            for a in 0..8 {
                for b in 0..8 {
                    let la = &t.leaves()[a];
                    let lb = &t.leaves()[b];
                    let (ia, ib) = (back.leaf_index(la).unwrap(), back.leaf_index(lb).unwrap());
                    let d0 = t.pair_distance(a, b);
                    let d1 = back.pair_distance(ia, ib);
                    assert!((d0 - d1).abs() <= 1e-12 * d0.max(1.0));
                }
            }
        }
    }
}
