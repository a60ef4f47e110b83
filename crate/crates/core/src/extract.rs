use std::collections::BTreeMap;

use crate::clopen::{from_leaf_set, CellLabel, FiniteBooleanAlgebra};
use crate::error::Error;
use crate::metric::{BasicBall, CoverRecord, FinitaryName, MetricState};
use crate::tree::{LeafTag, Node, TaggedShapeTree};
use crate::Result;

/// A certified proper clopen set: two formally disjoint finitary names
/// whose union is witnessed to cover the space by an accepted cover
/// formally included in their concatenation.
#[derive(Debug, Clone)]
pub struct ClopenPairCertificate {
    /// Cone roots of the certified set (level-`k` strings).
    pub cones: Vec<Node>,
    pub name: FinitaryName,
    pub complement_name: FinitaryName,
    pub cover_witness: CoverRecord,
    pub level: usize,
}

/// One literal of a formal term: certificate `index`, positive or
/// complemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Literal {
    pub cert: usize,
    pub positive: bool,
}

/// A formal intersection of certificate literals; the empty term is the
/// whole space.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct FormalTerm {
    pub literals: Vec<Literal>,
}

/// Emptiness verdict for a formal term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Empty,
    /// Witnessing special-point index.
    Nonempty(usize),
    Pending,
}

/// Memo table of emptiness verdicts driving the term congruence.
#[derive(Debug, Default)]
pub struct CongruenceTable {
    verdicts: BTreeMap<Vec<(usize, bool)>, Verdict>,
    pub budget: usize,
}

impl CongruenceTable {
    pub fn new(budget: usize) -> Self {
        CongruenceTable {
            verdicts: BTreeMap::new(),
            budget,
        }
    }

    pub fn verdict(
        &mut self,
        term: &FormalTerm,
        m: &MetricState,
        certs: &[ClopenPairCertificate],
        exact: bool,
    ) -> Result<Verdict> {
        let key: Vec<(usize, bool)> = term.literals.iter().map(|l| (l.cert, l.positive)).collect();
        if let Some(v) = self.verdicts.get(&key) {
            return Ok(v.clone());
        }
        let v = v_nonempty(term, m, certs, self.budget, exact)?;
        self.verdicts.insert(key, v.clone());
        Ok(v)
    }
}

/// The term `U_0^{s(0)} ∩ ... ∩ U_{|s|-1}^{s(|s|-1)}`; the root is the
/// whole-space term.
pub fn v_sigma(sigma: &Node, cert_count: usize) -> Result<FormalTerm> {
    if sigma.len() > cert_count {
        return Err(Error::Domain(format!(
            "string {sigma} longer than the certificate list ({cert_count})"
        )));
    }
    Ok(FormalTerm {
        literals: (0..sigma.len())
            .map(|i| Literal {
                cert: i,
                positive: sigma.bit(i) == 1,
            })
            .collect(),
    })
}

/// Strings `xi` with `V_sigma Δ V_tau = ∪ V_xi`, computed by expanding
/// both terms to the common literal depth in the formal tree basis.
pub fn symm_diff_decompose(sigma: &Node, tau: &Node) -> Vec<Node> {
    if sigma == tau {
        return Vec::new();
    }
    let level = sigma.len().max(tau.len());
    Node::all_of_len(level)
        .into_iter()
        .filter(|xi| sigma.is_prefix_of(xi) != tau.is_prefix_of(xi))
        .collect()
}

/// Membership of special point `i` in a certificate's set, at exact
/// limit distances.
fn point_in_cert(m: &MetricState, cert: &ClopenPairCertificate, i: usize) -> Result<bool> {
    for b in &cert.name.balls {
        if m.point_in_ball(i, b)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Emptiness of a formal term by special-point search.
///
/// In exact mode both polarities are decided from limit distances and a
/// completed scan yields `Empty`. Otherwise membership in a positive
/// literal is certified at the stage-`budget` upper bounds, complemented
/// literals stay open, and the verdict degrades to `Pending`.
pub fn v_nonempty(
    term: &FormalTerm,
    m: &MetricState,
    certs: &[ClopenPairCertificate],
    budget: usize,
    exact: bool,
) -> Result<Verdict> {
    let scan = m.point_count().min(budget.max(1));
    let mut any_pending = false;
    'points: for i in 0..scan {
        for lit in &term.literals {
            let cert = certs
                .get(lit.cert)
                .ok_or_else(|| Error::Domain(format!("unknown certificate {}", lit.cert)))?;
            if exact {
                if point_in_cert(m, cert, i)? != lit.positive {
                    continue 'points;
                }
            } else if lit.positive {
                let seen = cert
                    .name
                    .balls
                    .iter()
                    .map(|b| m.point_in_ball_at(i, b, budget))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .any(|v| v == Some(true));
                if !seen {
                    any_pending = true;
                    continue 'points;
                }
            } else {
                // no sound negative verdict at upper bounds
                any_pending = true;
                continue 'points;
            }
        }
        return Ok(Verdict::Nonempty(i));
    }
    if exact && !any_pending {
        Ok(Verdict::Empty)
    } else {
        Ok(Verdict::Pending)
    }
}

/// Build the canonical certificate for a union of alive level-`k` cones:
/// named by the balls of its level-`k+1` subcones, complement likewise,
/// covered by the level-`k+3` ball family.
fn certify_cones(
    m: &MetricState,
    level: usize,
    members: &[Node],
    complement: &[Node],
) -> Result<Option<ClopenPairCertificate>> {
    let sub_balls = |cones: &[Node], depth: usize| -> Result<Vec<BasicBall>> {
        let mut out = Vec::new();
        for ext in alive_level(m, depth) {
            if cones.iter().any(|c| c.is_prefix_of(&ext)) {
                out.push(m.cone_ball(&ext)?);
            }
        }
        Ok(out)
    };
    let u_balls = sub_balls(members, level + 1)?;
    let v_balls = sub_balls(complement, level + 1)?;
    if u_balls.is_empty() || v_balls.is_empty() {
        return Ok(None);
    }
    let u = FinitaryName::new(u_balls);
    let v = FinitaryName::new(v_balls);
    if !m.formally_disjoint(&u, &v)? {
        return Ok(None);
    }
    let mut cover_balls = Vec::new();
    for ext in alive_level(m, level + 3) {
        cover_balls.push(m.cone_ball(&ext)?);
    }
    if cover_balls.is_empty() {
        return Ok(None);
    }
    let cover = FinitaryName::new(cover_balls);
    let concat = FinitaryName::new(
        u.balls
            .iter()
            .chain(v.balls.iter())
            .cloned()
            .collect::<Vec<_>>(),
    );
    let stage = m.stabilization_stage().min(m.stage());
    if !m.formally_included(&cover, &concat)? || !m.cover_accepted(&cover, stage)? {
        return Ok(None);
    }
    Ok(Some(ClopenPairCertificate {
        cones: members.to_vec(),
        name: u,
        complement_name: v,
        cover_witness: CoverRecord {
            name: cover,
            accepted_at_stage: stage,
        },
        level,
    }))
}

/// Strings of exactly `len` never removed by the schedule.
fn alive_level(m: &MetricState, len: usize) -> Vec<Node> {
    let stab = m.stabilization_stage();
    Node::all_of_len(len)
        .into_iter()
        .filter(|n| !m.schedule().removed_by(n, stab))
        .collect()
}

/// Enumerate certified clopen pairs: levels ascending, then set size,
/// then lexicographic; every union of alive level-`<=level_budget` cones
/// with a nonempty complement is eventually emitted (capped at `max_certs`).
pub fn enumerate_clopen_pairs(
    m: &MetricState,
    level_budget: usize,
    max_certs: usize,
) -> Result<Vec<ClopenPairCertificate>> {
    let mut out = Vec::new();
    for level in 1..=level_budget {
        let cones = alive_level(m, level);
        if cones.len() < 2 {
            continue;
        }
        if cones.len() > 16 {
            return Err(Error::Domain("level too wide for pair enumeration".into()));
        }
        let subsets: u32 = 1 << cones.len();
        let mut masks: Vec<u32> = (1..subsets - 1).collect();
        masks.sort_by_key(|m| (m.count_ones(), *m));
        for mask in masks {
            if out.len() >= max_certs {
                return Ok(out);
            }
            let members: Vec<Node> = cones
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, c)| c.clone())
                .collect();
            let complement: Vec<Node> = cones
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) == 0)
                .map(|(_, c)| c.clone())
                .collect();
            if let Some(cert) = certify_cones(m, level, &members, &complement)? {
                out.push(cert);
            }
        }
    }
    Ok(out)
}

/// The algebra extracted from a presentation.
#[derive(Debug)]
pub struct ExtractedAlgebra {
    pub generators: Vec<ClopenPairCertificate>,
    pub quotient: FiniteBooleanAlgebra,
    /// The depth-normalized tree the quotient's cells live on.
    pub cell_tree: TaggedShapeTree,
    /// False when the atom structure had not stabilized at the budget.
    pub complete: bool,
}

/// Expand every leaf of a tagged tree to the given uniform depth: the
/// presented space is unchanged and the leaf cells become the level-`depth`
/// cells. The canonical finite stand-in for the dual algebra at that
/// resolution.
pub fn normalize_tree(tree: &TaggedShapeTree, depth: usize) -> TaggedShapeTree {
    let mut nodes = std::collections::BTreeSet::new();
    let mut tags = BTreeMap::new();
    let mut frontier = vec![Node::root()];
    nodes.insert(Node::root());
    for len in 0..depth {
        let mut next = Vec::new();
        for n in frontier {
            for c in [n.child(0), n.child(1)] {
                if tree.member(&c) {
                    nodes.insert(c.clone());
                    if len + 1 == depth {
                        let tag = if tree.cone_path_count_capped(&c) >= 2 {
                            LeafTag::Cantor
                        } else {
                            LeafTag::Atom
                        };
                        tags.insert(c.clone(), tag);
                    }
                    next.push(c);
                }
            }
        }
        frontier = next;
    }
    if depth == 0 {
        let tag = if tree.cone_path_count_capped(&Node::root()) >= 2 {
            LeafTag::Cantor
        } else {
            LeafTag::Atom
        };
        tags.insert(Node::root(), tag);
    }
    TaggedShapeTree::new(nodes, tags).expect("normalized tree is valid")
}

/// Run the extraction: certify the singleton cone splits up to
/// `level_budget`, quotient the generated term algebra by emptiness, and
/// read off the atom cells with their isolated-point labels.
///
/// With budget 0 the result is the two-element algebra. Exact mode:
/// verdicts and labels are evaluated at limit distances.
pub fn extract_algebra(m: &MetricState, level_budget: usize) -> Result<ExtractedAlgebra> {
    let mut generators = Vec::new();
    for level in 1..=level_budget {
        let cones = alive_level(m, level);
        if cones.len() < 2 {
            continue;
        }
        for cone in &cones {
            let complement: Vec<Node> = cones.iter().filter(|c| *c != cone).cloned().collect();
            if let Some(cert) = certify_cones(m, level, &[cone.clone()], &complement)? {
                generators.push(cert);
            }
        }
    }
    // atom cells of the generated subalgebra: alive level cells grouped
    // by their certificate membership vectors (singleton generators make
    // every alive level-budget cell its own class)
    let cell_tree = normalize_tree(m.schedule().baseline(), level_budget);
    let mut cells = Vec::new();
    let mut labels = Vec::new();
    for (leaf, tag) in cell_tree.leaves() {
        let set: std::collections::BTreeSet<Node> = [leaf.clone()].into_iter().collect();
        cells.push(from_leaf_set(&set, &cell_tree));
        labels.push(match tag {
            LeafTag::Atom => CellLabel::Atom,
            LeafTag::Cantor => CellLabel::NonAtom,
        });
    }
    // cross-check the labels against the presentation: a cell is an atom
    // iff all its special points coincide in the limit
    for (idx, leaf) in cell_tree.leaves().map(|(n, _)| n).enumerate() {
        let members: Vec<usize> = (0..m.point_count())
            .filter(|&i| {
                m.limit_rep(i)
                    .map(|r| r.path_extends(leaf))
                    .unwrap_or(false)
            })
            .collect();
        if let Some(&first) = members.first() {
            let single = members
                .iter()
                .all(|&j| m.limit_distance(first, j).map(|d| d.is_zero()).unwrap_or(false));
            let expected = if single {
                CellLabel::Atom
            } else {
                CellLabel::NonAtom
            };
            if labels[idx] != expected {
                return Err(Error::Construction(format!(
                    "label mismatch at cell {leaf}: tree says {:?}, points say {:?}",
                    labels[idx], expected
                )));
            }
        }
    }
    // completeness: the isolated-point count must agree one level deeper
    let complete = if level_budget == 0 {
        false
    } else {
        let deeper = normalize_tree(m.schedule().baseline(), level_budget + 1);
        let at_now = labels.iter().filter(|l| **l == CellLabel::Atom).count();
        let at_next = deeper
            .leaves()
            .filter(|(_, t)| *t == LeafTag::Atom)
            .count();
        at_now == at_next
    };
    Ok(ExtractedAlgebra {
        generators,
        quotient: FiniteBooleanAlgebra::new(cells, labels),
        cell_tree,
        complete,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clopen::{clopen_algebra, find_label_isomorphism, verify_homomorphism};
    use crate::schedule::RemovalSchedule;

    fn n(s: &str) -> Node {
        Node::parse(s).unwrap()
    }

    fn presentation(tree: &TaggedShapeTree, window: usize) -> MetricState {
        let points = (1usize << (window + 1)) - 1;
        let sched = RemovalSchedule::from_tree(tree, window).unwrap();
        MetricState::build(sched, points).unwrap()
    }

    #[test]
    fn v_sigma_cases() {
        assert!(v_sigma(&Node::root(), 0).unwrap().literals.is_empty());
        let t = v_sigma(&n("1"), 2).unwrap();
        assert_eq!(
            t.literals,
            vec![Literal {
                cert: 0,
                positive: true
            }]
        );
        let t = v_sigma(&n("10"), 2).unwrap();
        assert_eq!(t.literals[1], Literal { cert: 1, positive: false });
        assert!(v_sigma(&n("10"), 1).is_err());
    }

    #[test]
    fn symm_diff_examples() {
        assert!(symm_diff_decompose(&n("01"), &n("01")).is_empty());
        // complement pair covers the whole space at depth 1
        let d = symm_diff_decompose(&n("1"), &n("0"));
        assert_eq!(d, vec![n("0"), n("1")]);
        // 11 vs 10: cells differing in the second literal
        let d = symm_diff_decompose(&n("11"), &n("10"));
        assert_eq!(d, vec![n("10"), n("11")]);
    }

    #[test]
    fn pair_enumeration_on_full_cantor() {
        let tree = TaggedShapeTree::cantor(2);
        let m = presentation(&tree, 5);
        let certs = enumerate_clopen_pairs(&m, 1, 8).unwrap();
        assert!(!certs.is_empty());
        // the first certificate is the first-bit cone split
        assert_eq!(certs[0].cones, vec![n("0")]);
        assert!(m
            .formally_disjoint(&certs[0].name, &certs[0].complement_name)
            .unwrap());
    }

    #[test]
    fn nonempty_verdicts() {
        let tree = TaggedShapeTree::cantor(2);
        let m = presentation(&tree, 5);
        let certs = enumerate_clopen_pairs(&m, 1, 8).unwrap();
        let whole = FormalTerm::default();
        assert_eq!(
            v_nonempty(&whole, &m, &certs, 8, true).unwrap(),
            Verdict::Nonempty(0)
        );
        // U_0 ∩ complement(U_0) is empty in exact mode
        let contradiction = FormalTerm {
            literals: vec![
                Literal {
                    cert: 0,
                    positive: true,
                },
                Literal {
                    cert: 0,
                    positive: false,
                },
            ],
        };
        assert_eq!(
            v_nonempty(&contradiction, &m, &certs, 32, true).unwrap(),
            Verdict::Empty
        );
        // certificate 0 is the 0-cone: some zero-side witness appears
        let cone0 = FormalTerm {
            literals: vec![Literal {
                cert: 0,
                positive: true,
            }],
        };
        match v_nonempty(&cone0, &m, &certs, 32, true).unwrap() {
            Verdict::Nonempty(i) => {
                assert!(m.limit_rep(i).unwrap().path_extends(&n("0")) || i == 0)
            }
            v => panic!("expected nonempty, got {v:?}"),
        }
        // oracle-free mode cannot certify the complement literal
        assert_eq!(
            v_nonempty(&contradiction, &m, &certs, 32, false).unwrap(),
            Verdict::Pending
        );
    }

    #[test]
    fn congruence_respects_operations_depth_2() {
        let tree = TaggedShapeTree::cantor(2);
        let m = presentation(&tree, 5);
        let certs = enumerate_clopen_pairs(&m, 2, 64).unwrap();
        let mut table = CongruenceTable::new(64);
        // ground-truth set of a formal term as a depth-2 cell bitmask
        let cells = tree.members_at(2);
        let term_mask = |sigma: &Node| -> u32 {
            let mut mask = 0;
            for (ci, cell) in cells.iter().enumerate() {
                let inside = (0..sigma.len()).all(|i| {
                    let in_cert = certs[i].cones.iter().any(|c| c.is_prefix_of(cell));
                    in_cert == (sigma.bit(i) == 1)
                });
                if inside {
                    mask |= 1 << ci;
                }
            }
            mask
        };
        // E is a congruence: sigma ~ tau iff the symmetric difference
        // decomposition is all-empty iff the ground-truth sets agree
        let depth2: Vec<Node> = Node::all_of_len(2).into_iter().collect();
        for s in &depth2 {
            for t in &depth2 {
                let parts = symm_diff_decompose(s, t);
                let mut all_empty = true;
                for xi in &parts {
                    let term = v_sigma(xi, certs.len()).unwrap();
                    match table.verdict(&term, &m, &certs, true).unwrap() {
                        Verdict::Empty => {}
                        _ => all_empty = false,
                    }
                }
                assert_eq!(all_empty, term_mask(s) == term_mask(t), "{s} vs {t}");
            }
        }
    }

    #[test]
    fn extraction_round_trip_small() {
        for tree in [
            TaggedShapeTree::cantor(1),
            TaggedShapeTree::cantor(2),
            TaggedShapeTree::parse("node -\nleaf 0 atom\nleaf 1 cantor\n").unwrap(),
            TaggedShapeTree::spine(2),
        ] {
            let depth = tree.depth().max(1);
            let m = presentation(&tree, depth + 4);
            let ex = extract_algebra(&m, depth).unwrap();
            assert!(ex.complete, "incomplete at depth {depth}");
            let target = clopen_algebra(&normalize_tree(&tree, depth));
            let map = find_label_isomorphism(&ex.quotient, &target)
                .unwrap_or_else(|| panic!("no isomorphism for {}", tree.render()));
            assert!(verify_homomorphism(&ex.quotient, &target, &map));
        }
    }

    #[test]
    fn extraction_budget_zero_gives_two_elements() {
        let tree = TaggedShapeTree::cantor(2);
        let m = presentation(&tree, 5);
        let ex = extract_algebra(&m, 0).unwrap();
        assert_eq!(ex.quotient.element_count(), 2);
        assert!(!ex.complete);
    }

    #[test]
    fn extraction_detects_atom_cell() {
        let tree = TaggedShapeTree::parse("node -\nleaf 0 atom\nleaf 1 cantor\n").unwrap();
        let m = presentation(&tree, 5);
        let ex = extract_algebra(&m, 1).unwrap();
        assert_eq!(ex.quotient.atom_cell_count(), 1);
        assert_eq!(ex.quotient.cell_count(), 2);
    }

    #[test]
    fn normalize_preserves_space() {
        let tree = TaggedShapeTree::parse("node -\nleaf 0 cantor\nnode 1\nleaf 10 cantor\nleaf 11 atom\n")
            .unwrap();
        let norm = normalize_tree(&tree, 2);
        assert_eq!(norm.depth(), 2);
        for len in 0..=4 {
            for x in Node::all_of_len(len) {
                assert_eq!(tree.member(&x), norm.member(&x), "string {x}");
            }
        }
        // leaf cells are now the level-2 cells
        assert_eq!(norm.leaf_count(), tree.members_at(2).len());
    }
}
