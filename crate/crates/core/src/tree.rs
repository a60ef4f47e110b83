use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::error::Error;
use crate::Result;

/// A finite binary string; the empty string is the tree root.
///
/// A string `s` doubles as the infinite path `s000...` (pad with zeros),
/// which is how stage constructions identify strings with points.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Node {
    bits: Vec<u8>,
}

impl Node {
    pub fn root() -> Self {
        Node { bits: Vec::new() }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Node { bits: bits.to_vec() }
    }

    /// Parse `"010"`; `"-"` and `""` denote the root.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "-" || s.is_empty() {
            return Ok(Node::root());
        }
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(0),
                '1' => bits.push(1),
                _ => {
                    return Err(Error::Domain(format!("invalid bit character {c:?} in {s:?}")));
                }
            }
        }
        Ok(Node { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_root(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn bit(&self, i: usize) -> u8 {
        self.bits[i]
    }

    /// Bit `i` of the padded infinite path `self 000...`.
    pub fn path_bit(&self, i: usize) -> u8 {
        if i < self.bits.len() {
            self.bits[i]
        } else {
            0
        }
    }

    pub fn child(&self, bit: u8) -> Self {
        let mut bits = self.bits.clone();
        bits.push(bit);
        Node { bits }
    }

    pub fn parent(&self) -> Option<Self> {
        if self.bits.is_empty() {
            None
        } else {
            Some(Node {
                bits: self.bits[..self.bits.len() - 1].to_vec(),
            })
        }
    }

    pub fn prefix(&self, len: usize) -> Self {
        Node {
            bits: self.bits[..len.min(self.bits.len())].to_vec(),
        }
    }

    pub fn is_prefix_of(&self, other: &Node) -> bool {
        other.bits.len() >= self.bits.len() && other.bits[..self.bits.len()] == self.bits[..]
    }

    pub fn extends(&self, other: &Node) -> bool {
        other.is_prefix_of(self)
    }

    /// Does the padded path `self 000...` pass through `other`?
    pub fn path_extends(&self, other: &Node) -> bool {
        (0..other.len()).all(|i| self.path_bit(i) == other.bit(i))
    }

    /// Length of the longest common prefix of the padded paths;
    /// `None` means the paths are equal.
    pub fn path_lcp(&self, other: &Node) -> Option<usize> {
        let scan = self.len().max(other.len());
        (0..scan).find(|&i| self.path_bit(i) != other.path_bit(i))
    }

    /// Same padded path (`0` and `00` denote the same point).
    pub fn same_path(&self, other: &Node) -> bool {
        self.path_lcp(other).is_none()
    }

    /// Kleene–Brouwer order: proper extensions come first; otherwise
    /// the string with the smaller bit at the first difference is less.
    pub fn kb_less(&self, other: &Node) -> bool {
        if self == other {
            return false;
        }
        let common = self.len().min(other.len());
        for i in 0..common {
            if self.bits[i] != other.bits[i] {
                return self.bits[i] < other.bits[i];
            }
        }
        // one is a prefix of the other; the longer (proper extension) is less
        self.len() > other.len()
    }

    /// All binary strings in (length, lexicographic) order: ε,0,1,00,...
    pub fn enumerate(count: usize) -> Vec<Node> {
        let mut out = Vec::with_capacity(count);
        let mut level = vec![Node::root()];
        while out.len() < count {
            for n in &level {
                if out.len() < count {
                    out.push(n.clone());
                }
            }
            level = level
                .iter()
                .flat_map(|n| [n.child(0), n.child(1)])
                .collect();
        }
        out
    }

    pub fn all_of_len(len: usize) -> Vec<Node> {
        let mut out = vec![Node::root()];
        for _ in 0..len {
            out = out.iter().flat_map(|n| [n.child(0), n.child(1)]).collect();
        }
        out
    }

    pub fn label(&self) -> String {
        if self.bits.is_empty() {
            "-".to_string()
        } else {
            self.bits.iter().map(|b| char::from(b'0' + b)).collect()
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// How a leaf continues below the explicit finite tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LeafTag {
    /// The single path `s000...`: an isolated point.
    Atom,
    /// The full binary cone below the leaf: an atomless piece.
    Cantor,
}

impl LeafTag {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "atom" => Ok(LeafTag::Atom),
            "cantor" => Ok(LeafTag::Cantor),
            _ => Err(Error::Domain(format!("unknown leaf tag {s:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LeafTag::Atom => "atom",
            LeafTag::Cantor => "cantor",
        }
    }
}

/// A finite prefix-closed binary tree with tagged leaves: the exact
/// ground-truth presentation of a Stone space.
///
/// Every non-leaf has one or two children and every leaf carries a tag,
/// so every node extends to an infinite path (the presented tree is
/// pruned by construction).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedShapeTree {
    nodes: BTreeSet<Node>,
    tags: BTreeMap<Node, LeafTag>,
}

impl TaggedShapeTree {
    pub fn new(nodes: BTreeSet<Node>, tags: BTreeMap<Node, LeafTag>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Domain("tree must contain the root".into()));
        }
        for n in &nodes {
            if let Some(p) = n.parent() {
                if !nodes.contains(&p) {
                    return Err(Error::Domain(format!("tree is not prefix-closed at {n}")));
                }
            }
        }
        for n in &nodes {
            let child_count =
                nodes.contains(&n.child(0)) as usize + nodes.contains(&n.child(1)) as usize;
            if child_count == 0 {
                if !tags.contains_key(n) {
                    return Err(Error::Domain(format!("leaf {n} has no tag")));
                }
            } else if tags.contains_key(n) {
                return Err(Error::Domain(format!("non-leaf {n} carries a leaf tag")));
            }
        }
        for tagged in tags.keys() {
            if !nodes.contains(tagged) {
                return Err(Error::Domain(format!("tagged node {tagged} not in tree")));
            }
        }
        Ok(TaggedShapeTree { nodes, tags })
    }

    /// The one-node space: a single point.
    pub fn point() -> Self {
        let mut tags = BTreeMap::new();
        tags.insert(Node::root(), LeafTag::Atom);
        TaggedShapeTree {
            nodes: [Node::root()].into_iter().collect(),
            tags,
        }
    }

    /// Full binary tree of the given depth, every leaf tagged `cantor`
    /// (the standard Cantor space presentation).
    pub fn cantor(depth: usize) -> Self {
        let mut nodes = BTreeSet::new();
        let mut tags = BTreeMap::new();
        for len in 0..=depth {
            for n in Node::all_of_len(len) {
                if len == depth {
                    tags.insert(n.clone(), LeafTag::Cantor);
                }
                nodes.insert(n);
            }
        }
        TaggedShapeTree { nodes, tags }
    }

    /// The spine tree: one isolated point `000...` next to a Cantor cone
    /// below `1`, explicit to the given depth (must be >= 1).
    pub fn spine(depth: usize) -> Self {
        let mut nodes = BTreeSet::new();
        let mut tags = BTreeMap::new();
        nodes.insert(Node::root());
        let mut spine = Node::root();
        for _ in 0..depth {
            spine = spine.child(0);
            nodes.insert(spine.clone());
        }
        tags.insert(spine, LeafTag::Atom);
        let one = Node::root().child(1);
        tags.insert(one.clone(), LeafTag::Cantor);
        nodes.insert(one);
        TaggedShapeTree { nodes, tags }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter()
    }

    pub fn contains(&self, n: &Node) -> bool {
        self.nodes.contains(n)
    }

    pub fn is_leaf(&self, n: &Node) -> bool {
        self.tags.contains_key(n)
    }

    pub fn tag(&self, leaf: &Node) -> Option<LeafTag> {
        self.tags.get(leaf).copied()
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&Node, LeafTag)> {
        self.tags.iter().map(|(n, t)| (n, *t))
    }

    pub fn children(&self, n: &Node) -> Vec<Node> {
        [n.child(0), n.child(1)]
            .into_iter()
            .filter(|c| self.nodes.contains(c))
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(Node::len).max().unwrap_or(0)
    }

    pub fn leaf_count(&self) -> usize {
        self.tags.len()
    }

    /// Membership of an arbitrary string in the presented infinite tree.
    pub fn member(&self, s: &Node) -> bool {
        if self.nodes.contains(s) {
            return true;
        }
        // below a leaf: atom leaves continue only along zeros
        for (leaf, tag) in &self.tags {
            if leaf.is_prefix_of(s) {
                return match tag {
                    LeafTag::Cantor => true,
                    LeafTag::Atom => s.bits()[leaf.len()..].iter().all(|&b| b == 0),
                };
            }
        }
        false
    }

    /// All members of the presented infinite tree at exactly `len`.
    pub fn members_at(&self, len: usize) -> Vec<Node> {
        let mut level = vec![Node::root()];
        for _ in 0..len {
            level = level
                .into_iter()
                .flat_map(|n| [n.child(0), n.child(1)])
                .filter(|n| self.member(n))
                .collect();
        }
        level
    }

    /// Does the padded path of `s` stay in the tree forever?
    /// Equivalent to `s 0^k` being a member for every `k`.
    pub fn path_member(&self, s: &Node) -> bool {
        if !self.member(s) {
            return false;
        }
        // the zero-extension stabilizes below a leaf or leaves the tree
        // within depth+1 steps
        let mut cur = s.clone();
        for _ in 0..=self.depth() + 1 {
            cur = cur.child(0);
            if !self.member(&cur) {
                return false;
            }
            if self.below_leaf(&cur).is_some() {
                return true;
            }
        }
        true
    }

    fn below_leaf(&self, s: &Node) -> Option<(&Node, LeafTag)> {
        self.tags
            .iter()
            .find(|(leaf, _)| leaf.is_prefix_of(s))
            .map(|(n, t)| (n, *t))
    }

    /// Number of distinct paths through a member node's cone
    /// (counts up to 2; enough to decide atomicity).
    pub fn cone_path_count_capped(&self, s: &Node) -> usize {
        if !self.member(s) {
            return 0;
        }
        if let Some((_, tag)) = self.below_leaf(s) {
            if self.is_leaf(s) && self.tag(s) == Some(LeafTag::Atom) {
                return 1;
            }
            return match tag {
                LeafTag::Atom => 1,
                LeafTag::Cantor => 2,
            };
        }
        let mut total = 0;
        for c in self.children(s) {
            total += self.cone_path_count_capped(&c);
            if total >= 2 {
                return 2;
            }
        }
        total
    }

    /// Minimal strings outside the presented infinite tree, up to the
    /// given window depth: the cone roots a removal schedule must delete.
    pub fn complement_cone_roots(&self, window: usize) -> Vec<Node> {
        let mut out = Vec::new();
        let mut level = vec![Node::root()];
        for _ in 0..window {
            let mut next = Vec::new();
            for n in level {
                for c in [n.child(0), n.child(1)] {
                    if self.member(&c) {
                        next.push(c);
                    } else {
                        out.push(c);
                    }
                }
            }
            level = next;
        }
        out
    }

    /// Order-independent fingerprint used to detect mixed-tree operands.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for n in &self.nodes {
            n.bits.hash(&mut h);
            0xffu8.hash(&mut h);
        }
        for (n, t) in &self.tags {
            n.bits.hash(&mut h);
            t.hash(&mut h);
        }
        h.finish()
    }

    /// Parse the tree text format: `node <bits>` / `leaf <bits> atom|cantor`,
    /// root bits written `-`, `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut nodes = BTreeSet::new();
        let mut tags = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            parse_tree_line(line, idx + 1, &mut nodes, &mut tags)?;
        }
        TaggedShapeTree::new(nodes, tags).map_err(|e| Error::Parse {
            line: 0,
            msg: e.to_string(),
        })
    }

    /// Render in the text format (one line per node, sorted).
    pub fn render(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            match self.tags.get(n) {
                Some(t) => out.push_str(&format!("leaf {} {}\n", n.label(), t.name())),
                None => out.push_str(&format!("node {}\n", n.label())),
            }
        }
        out
    }

    /// Apply a shape-preserving relabeling: at every node of the selector
    /// set, swap the two subtrees. Produces a homeomorphic space.
    pub fn shuffled(&self, swap_at: &BTreeSet<Node>) -> TaggedShapeTree {
        fn map_node(n: &Node, swap_at: &BTreeSet<Node>) -> Node {
            let mut cur = Node::root();
            let mut out = Vec::with_capacity(n.len());
            for i in 0..n.len() {
                let mut b = n.bit(i);
                if swap_at.contains(&cur) {
                    b ^= 1;
                }
                out.push(b);
                cur = cur.child(n.bit(i));
            }
            Node::from_bits(&out)
        }
        let nodes: BTreeSet<Node> = self.nodes.iter().map(|n| map_node(n, swap_at)).collect();
        let tags: BTreeMap<Node, LeafTag> = self
            .tags
            .iter()
            .map(|(n, t)| (map_node(n, swap_at), *t))
            .collect();
        TaggedShapeTree { nodes, tags }
    }
}

fn parse_tree_line(
    line: &str,
    line_no: usize,
    nodes: &mut BTreeSet<Node>,
    tags: &mut BTreeMap<Node, LeafTag>,
) -> Result<()> {
    let mut parts = line.split_whitespace();
    let kind = parts.next().unwrap_or("");
    let err = |msg: String| Error::Parse { line: line_no, msg };
    match kind {
        "node" => {
            let bits = parts
                .next()
                .ok_or_else(|| err("missing bits after 'node'".into()))?;
            if parts.next().is_some() {
                return Err(err("trailing tokens after node record".into()));
            }
            let n = Node::parse(bits).map_err(|e| err(e.to_string()))?;
            nodes.insert(n);
        }
        "leaf" => {
            let bits = parts
                .next()
                .ok_or_else(|| err("missing bits after 'leaf'".into()))?;
            let tag = parts
                .next()
                .ok_or_else(|| err("missing tag after leaf bits".into()))?;
            if parts.next().is_some() {
                return Err(err("trailing tokens after leaf record".into()));
            }
            let n = Node::parse(bits).map_err(|e| err(e.to_string()))?;
            let t = LeafTag::parse(tag).map_err(|e| err(e.to_string()))?;
            nodes.insert(n.clone());
            tags.insert(n, t);
        }
        _ => return Err(err(format!("unknown record {kind:?}"))),
    }
    Ok(())
}

/// Enumerate every tagged shape tree of depth at most `max_depth`.
///
/// Exhaustive oracle input for the desk-scale suites; the count grows as
/// 2, 8, 74, 5552 for depths 0..=3.
pub fn all_tagged_trees(max_depth: usize) -> Vec<TaggedShapeTree> {
    fn build(depth: usize) -> Vec<(BTreeSet<Node>, BTreeMap<Node, LeafTag>)> {
        let mut out = Vec::new();
        for tag in [LeafTag::Atom, LeafTag::Cantor] {
            let mut tags = BTreeMap::new();
            tags.insert(Node::root(), tag);
            out.push(([Node::root()].into_iter().collect(), tags));
        }
        if depth == 0 {
            return out;
        }
        let subs = build(depth - 1);
        let shift = |s: &(BTreeSet<Node>, BTreeMap<Node, LeafTag>), bit: u8| {
            let nodes: BTreeSet<Node> = s
                .0
                .iter()
                .map(|n| {
                    let mut bits = vec![bit];
                    bits.extend_from_slice(n.bits());
                    Node::from_bits(&bits)
                })
                .collect();
            let tags: BTreeMap<Node, LeafTag> = s
                .1
                .iter()
                .map(|(n, t)| {
                    let mut bits = vec![bit];
                    bits.extend_from_slice(n.bits());
                    (Node::from_bits(&bits), *t)
                })
                .collect();
            (nodes, tags)
        };
        // unary root (single 0-child)
        for s in &subs {
            let (mut nodes, tags) = shift(s, 0);
            nodes.insert(Node::root());
            out.push((nodes, tags));
        }
        // binary root
        for l in &subs {
            for r in &subs {
                let (mut nodes, mut tags) = shift(l, 0);
                let (rn, rt) = shift(r, 1);
                nodes.extend(rn);
                tags.extend(rt);
                nodes.insert(Node::root());
                out.push((nodes, tags));
            }
        }
        out
    }
    build(max_depth)
        .into_iter()
        .map(|(nodes, tags)| TaggedShapeTree::new(nodes, tags).expect("generated tree is valid"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kb_order_prefers_extensions_then_smaller_bits() {
        let a = Node::parse("000").unwrap();
        let b = Node::parse("00").unwrap();
        let c = Node::parse("010").unwrap();
        let root = Node::root();
        assert!(a.kb_less(&b));
        assert!(!b.kb_less(&a));
        assert!(a.kb_less(&c));
        assert!(b.kb_less(&root));
        assert!(c.kb_less(&root));
        assert!(!root.kb_less(&root));
    }

    #[test]
    fn path_identification() {
        let a = Node::parse("0").unwrap();
        let b = Node::parse("00").unwrap();
        let c = Node::parse("01").unwrap();
        assert!(a.same_path(&b));
        assert_eq!(a.path_lcp(&c), Some(1));
        assert!(c.path_extends(&a));
        assert!(!a.path_extends(&c));
    }

    #[test]
    fn enumeration_is_length_then_lex() {
        let names: Vec<String> = Node::enumerate(7).iter().map(Node::label).collect();
        assert_eq!(names, ["-", "0", "1", "00", "01", "10", "11"]);
    }

    #[test]
    fn tree_validation_rejects_untagged_leaf() {
        let nodes: BTreeSet<Node> = [Node::root(), Node::parse("0").unwrap()]
            .into_iter()
            .collect();
        assert!(TaggedShapeTree::new(nodes, BTreeMap::new()).is_err());
    }

    #[test]
    fn membership_below_atom_and_cantor_leaves() {
        let t = TaggedShapeTree::parse("node -\nleaf 0 atom\nleaf 1 cantor\n").unwrap();
        assert!(t.member(&Node::parse("000").unwrap()));
        assert!(!t.member(&Node::parse("001").unwrap()));
        assert!(t.member(&Node::parse("101").unwrap()));
        assert!(t.path_member(&Node::parse("0").unwrap()));
        assert!(t.path_member(&Node::parse("1").unwrap()));
        assert!(t.path_member(&Node::parse("10").unwrap()));
    }

    #[test]
    fn path_member_detects_dead_zero_lines() {
        // below "0" only the 01-side survives, so the padded path of "0" dies
        let t = TaggedShapeTree::parse("node -\nnode 0\nleaf 01 cantor\nleaf 1 cantor\n");
        // "0" must have children 00 or 01; only 01 present: valid unary? no — 0 has one child 01
        let t = t.unwrap();
        assert!(t.member(&Node::parse("0").unwrap()));
        assert!(!t.member(&Node::parse("00").unwrap()));
        assert!(!t.path_member(&Node::parse("0").unwrap()));
        assert!(t.path_member(&Node::parse("01").unwrap()));
    }

    #[test]
    fn complement_cone_roots_of_spine() {
        let t = TaggedShapeTree::spine(2);
        let roots: Vec<String> = t
            .complement_cone_roots(3)
            .iter()
            .map(Node::label)
            .collect();
        // spine 00 atom, cone at 1: removed cones are 01 and 001
        assert_eq!(roots, ["01", "001"]);
    }

    #[test]
    fn enumerate_all_trees_counts() {
        assert_eq!(all_tagged_trees(0).len(), 2);
        assert_eq!(all_tagged_trees(1).len(), 8);
        assert_eq!(all_tagged_trees(2).len(), 74);
    }

    #[test]
    fn parse_render_round_trip() {
        let t = TaggedShapeTree::spine(2);
        let t2 = TaggedShapeTree::parse(&t.render()).unwrap();
        assert_eq!(t, t2);
    }

    #[test]
    fn shuffle_preserves_shape_invariants() {
        let t = TaggedShapeTree::cantor(3);
        let swaps: BTreeSet<Node> = [Node::root(), Node::parse("01").unwrap()]
            .into_iter()
            .collect();
        let s = t.shuffled(&swaps);
        assert_eq!(s.leaf_count(), t.leaf_count());
        assert_eq!(s.depth(), t.depth());
    }
}
