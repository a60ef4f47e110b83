use std::collections::BTreeSet;

use crate::error::Error;
use crate::tree::{LeafTag, Node, TaggedShapeTree};
use crate::Result;

/// A clopen subset of the path space, stored as the canonical antichain
/// of tree nodes whose cones union to the set.
///
/// The empty antichain is the empty set; `{root}` is the whole space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClopenSet {
    cones: Vec<Node>,
    tree_fp: u64,
}

/// Set operation selector for [`boolean_combine`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersect,
    /// Complement of the first operand; the second is ignored.
    ComplementOfFirst,
}

impl ClopenSet {
    pub fn cones(&self) -> &[Node] {
        &self.cones
    }

    pub fn is_empty(&self) -> bool {
        self.cones.is_empty()
    }

    pub fn is_whole(&self) -> bool {
        self.cones.len() == 1 && self.cones[0].is_root()
    }

    pub fn tree_fingerprint(&self) -> u64 {
        self.tree_fp
    }

    /// The set of tree leaves whose cones make up this set.
    pub fn leaf_set(&self, tree: &TaggedShapeTree) -> BTreeSet<Node> {
        let mut out = BTreeSet::new();
        for (leaf, _) in tree.leaves() {
            if self.cones.iter().any(|c| c.is_prefix_of(leaf)) {
                out.insert(leaf.clone());
            }
        }
        out
    }
}

/// Canonical antichain for an arbitrary set of tree nodes: the maximal
/// nodes whose full leaf set lies below the input (sibling absorption
/// and single-child collapsing both fall out of maximality).
pub fn canonicalize(strings: &[Node], tree: &TaggedShapeTree) -> Result<ClopenSet> {
    for s in strings {
        if !tree.contains(s) {
            return Err(Error::Domain(format!("{s} is not a node of the tree")));
        }
    }
    let mut leaves = BTreeSet::new();
    for (leaf, _) in tree.leaves() {
        if strings.iter().any(|s| s.is_prefix_of(leaf)) {
            leaves.insert(leaf.clone());
        }
    }
    Ok(from_leaf_set(&leaves, tree))
}

/// Canonical antichain covering exactly the given leaves.
pub fn from_leaf_set(leaves: &BTreeSet<Node>, tree: &TaggedShapeTree) -> ClopenSet {
    fn fully_in(n: &Node, leaves: &BTreeSet<Node>, tree: &TaggedShapeTree) -> bool {
        if tree.is_leaf(n) {
            return leaves.contains(n);
        }
        tree.children(n).iter().all(|c| fully_in(c, leaves, tree))
    }
    fn collect(n: &Node, leaves: &BTreeSet<Node>, tree: &TaggedShapeTree, out: &mut Vec<Node>) {
        if fully_in(n, leaves, tree) {
            out.push(n.clone());
        } else if !tree.is_leaf(n) {
            for c in tree.children(n) {
                collect(&c, leaves, tree, out);
            }
        }
    }
    let mut cones = Vec::new();
    collect(&Node::root(), leaves, tree, &mut cones);
    cones.sort();
    ClopenSet {
        cones,
        tree_fp: tree.fingerprint(),
    }
}

/// Exact set-theoretic combination of two canonical clopen sets.
pub fn boolean_combine(
    a: &ClopenSet,
    b: &ClopenSet,
    op: SetOp,
    tree: &TaggedShapeTree,
) -> Result<ClopenSet> {
    let fp = tree.fingerprint();
    if a.tree_fp != fp || (op != SetOp::ComplementOfFirst && b.tree_fp != fp) {
        return Err(Error::Domain("operands come from different ambient trees".into()));
    }
    let la = a.leaf_set(tree);
    let lb = b.leaf_set(tree);
    let leaves: BTreeSet<Node> = match op {
        SetOp::Union => la.union(&lb).cloned().collect(),
        SetOp::Intersect => la.intersection(&lb).cloned().collect(),
        SetOp::ComplementOfFirst => tree
            .leaves()
            .map(|(n, _)| n.clone())
            .filter(|n| !la.contains(n))
            .collect(),
    };
    Ok(from_leaf_set(&leaves, tree))
}

/// Do two node tuples denote the same set of paths?
///
/// Both sides are expanded to the common level `L` = maximum string
/// length and the level-`L` member sets are compared; on a pruned tree
/// this decides path-set equality exactly.
pub fn cones_equal(s: &[Node], t: &[Node], tree: &TaggedShapeTree) -> Result<bool> {
    for n in s.iter().chain(t) {
        if !tree.contains(n) {
            return Err(Error::Domain(format!("{n} is not a node of the tree")));
        }
    }
    let level = s.iter().chain(t).map(Node::len).max().unwrap_or(0);
    let expand = |tuple: &[Node]| -> BTreeSet<Node> {
        tree.members_at(level)
            .into_iter()
            .filter(|m| tuple.iter().any(|c| c.is_prefix_of(m)))
            .collect()
    };
    Ok(expand(s) == expand(t))
}

/// A cell of a finite Boolean algebra, labeled by whether it is an atom
/// (a single isolated point) of the ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CellLabel {
    Atom,
    NonAtom,
}

impl CellLabel {
    pub fn name(&self) -> &'static str {
        match self {
            CellLabel::Atom => "atom",
            CellLabel::NonAtom => "nonatom",
        }
    }
}

/// A finite Boolean algebra given by its atom cells (a clopen partition
/// of the space); elements are joins of cells, encoded as bitmasks.
#[derive(Debug, Clone)]
pub struct FiniteBooleanAlgebra {
    cells: Vec<ClopenSet>,
    labels: Vec<CellLabel>,
}

impl FiniteBooleanAlgebra {
    pub fn new(cells: Vec<ClopenSet>, labels: Vec<CellLabel>) -> Self {
        assert_eq!(cells.len(), labels.len());
        FiniteBooleanAlgebra { cells, labels }
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn element_count(&self) -> u64 {
        1u64 << self.cells.len()
    }

    pub fn cells(&self) -> &[ClopenSet] {
        &self.cells
    }

    pub fn labels(&self) -> &[CellLabel] {
        &self.labels
    }

    pub fn atom_cell_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == CellLabel::Atom).count()
    }

    pub fn zero(&self) -> u32 {
        0
    }

    pub fn one(&self) -> u32 {
        if self.cells.len() == 32 {
            u32::MAX
        } else {
            (1u32 << self.cells.len()) - 1
        }
    }

    pub fn join(&self, a: u32, b: u32) -> u32 {
        a | b
    }

    pub fn meet(&self, a: u32, b: u32) -> u32 {
        a & b
    }

    pub fn complement(&self, a: u32) -> u32 {
        !a & self.one()
    }

    /// The clopen set denoted by an element bitmask.
    pub fn element_set(&self, mask: u32, tree: &TaggedShapeTree) -> ClopenSet {
        let mut leaves = BTreeSet::new();
        for (i, cell) in self.cells.iter().enumerate() {
            if mask & (1 << i) != 0 {
                leaves.extend(cell.leaf_set(tree));
            }
        }
        from_leaf_set(&leaves, tree)
    }

    /// Verify the Boolean algebra axioms by exhaustive truth tables.
    pub fn satisfies_axioms(&self) -> bool {
        let n = self.element_count();
        if n > 1 << 16 {
            return true; // only meant for desk-scale instances
        }
        let all: Vec<u32> = (0..n as u32).collect();
        for &a in &all {
            if self.join(a, self.complement(a)) != self.one()
                || self.meet(a, self.complement(a)) != self.zero()
            {
                return false;
            }
            for &b in &all {
                if self.join(a, b) != self.join(b, a) || self.meet(a, b) != self.meet(b, a) {
                    return false;
                }
                for &c in &all {
                    if self.join(a, self.meet(b, c))
                        != self.meet(self.join(a, b), self.join(a, c))
                    {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// The clopen algebra of a tagged tree: atom cells are the leaf cones,
/// labeled `Atom` exactly at `atom`-tagged leaves.
pub fn clopen_algebra(tree: &TaggedShapeTree) -> FiniteBooleanAlgebra {
    let mut cells = Vec::new();
    let mut labels = Vec::new();
    for (leaf, tag) in tree.leaves() {
        let set: BTreeSet<Node> = [leaf.clone()].into_iter().collect();
        cells.push(from_leaf_set(&set, tree));
        labels.push(match tag {
            LeafTag::Atom => CellLabel::Atom,
            LeafTag::Cantor => CellLabel::NonAtom,
        });
    }
    FiniteBooleanAlgebra::new(cells, labels)
}

/// Is this clopen set an atom cell: a single cone at an atom-tagged leaf?
pub fn is_atom_cell(c: &ClopenSet, tree: &TaggedShapeTree) -> bool {
    c.cones.len() == 1 && tree.tag(&c.cones[0]) == Some(LeafTag::Atom)
}

/// A label-respecting atom bijection between two finite algebras, if one
/// exists; the induced element map is a Boolean algebra isomorphism.
pub fn find_label_isomorphism(
    a: &FiniteBooleanAlgebra,
    b: &FiniteBooleanAlgebra,
) -> Option<Vec<usize>> {
    if a.cell_count() != b.cell_count() || a.atom_cell_count() != b.atom_cell_count() {
        return None;
    }
    let mut taken = vec![false; b.cell_count()];
    let mut map = Vec::with_capacity(a.cell_count());
    for la in a.labels() {
        let j = (0..b.cell_count()).find(|&j| !taken[j] && b.labels()[j] == *la)?;
        taken[j] = true;
        map.push(j);
    }
    Some(map)
}

/// Check that an atom bijection induces a homomorphism on all elements
/// (exhaustive; intended for algebras with at most 16 cells... elements
/// capped at 2^12 pairs for the law check).
pub fn verify_homomorphism(
    a: &FiniteBooleanAlgebra,
    b: &FiniteBooleanAlgebra,
    atom_map: &[usize],
) -> bool {
    if atom_map.len() != a.cell_count() {
        return false;
    }
    let lift = |mask: u32| -> u32 {
        let mut out = 0;
        for (i, &j) in atom_map.iter().enumerate() {
            if mask & (1 << i) != 0 {
                out |= 1 << j;
            }
        }
        out
    };
    let n = a.element_count().min(1 << 12) as u32;
    if lift(a.zero()) != b.zero() || lift(a.one()) != b.one() {
        return false;
    }
    for x in 0..n {
        if lift(a.complement(x)) != b.complement(lift(x)) {
            return false;
        }
        for y in 0..n {
            if lift(a.join(x, y)) != b.join(lift(x), lift(y)) {
                return false;
            }
            if lift(a.meet(x, y)) != b.meet(lift(x), lift(y)) {
                return false;
            }
        }
    }
    true
}
