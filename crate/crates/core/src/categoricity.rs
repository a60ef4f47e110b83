use std::collections::BTreeSet;

use crate::clopen::{cones_equal, FiniteBooleanAlgebra};
use crate::dyadic::{dyadic_lt_q, Q};
use crate::error::Error;
use crate::metric::{cone_radius, BasicBall, FinitaryName, MetricState};
use crate::tree::{Node, TaggedShapeTree};
use crate::Result;

/// One cell of a splitting tree: the cone below `base`, named by the
/// cone balls of its alive depth-`ball_depth` extensions.
#[derive(Debug, Clone)]
pub struct SplitNode {
    pub level: usize,
    pub base: Node,
    pub ball_depth: usize,
    pub name: FinitaryName,
    pub psi: Node,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// A finitely branching tree of nonempty clopen cells with shrinking
/// radii, pairwise formally disjoint siblings and formally nested
/// parent-child names; the combinatorial skeleton of an effective
/// homeomorphism onto a standard presentation.
#[derive(Debug, Clone)]
pub struct SplittingTree {
    pub nodes: Vec<SplitNode>,
    pub root_radius: Q,
}

impl SplittingTree {
    pub fn root(&self) -> &SplitNode {
        &self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    pub fn branching(&self, idx: usize) -> usize {
        self.nodes[idx].children.len()
    }
}

/// Operator variant: plain atomless space, or a space with one isolated
/// point mapped to the zero spine of the target tree.
#[derive(Debug, Clone)]
pub enum Variant {
    Atomless,
    Spine { iso_index: usize, iso_radius: Q },
}

/// An effective homeomorphism from a source presentation onto the
/// standard target (full Cantor tree, or the spine tree for the
/// isolated-point variant), given by cell-to-cylinder translation.
#[derive(Debug, Clone)]
pub struct HomeoOperator {
    pub tree: SplittingTree,
    pub variant: Variant,
}

/// A point name: basic balls of strictly decreasing radius, all
/// containing the named point.
#[derive(Debug, Clone)]
pub struct PointName {
    pub balls: Vec<BasicBall>,
}

impl PointName {
    pub fn new(balls: Vec<BasicBall>) -> Result<Self> {
        if balls.is_empty() {
            return Err(Error::Domain("point names are nonempty".into()));
        }
        for w in balls.windows(2) {
            if w[1].radius >= w[0].radius {
                return Err(Error::Domain("point name radii must strictly decrease".into()));
            }
        }
        Ok(PointName { balls })
    }
}

/// The canonical name of special point `i`: cone balls along its limit
/// path down to the given depth.
pub fn point_name(m: &MetricState, i: usize, depth: usize) -> Result<PointName> {
    let path = m.limit_rep(i)?.clone();
    let mut balls = Vec::new();
    for d in 0..=depth {
        let prefix = pad_to(&path, d);
        let center = m
            .index_of_path(&prefix)
            .ok_or_else(|| Error::Domain(format!("no index for {prefix}")))?;
        balls.push(BasicBall::new(center, cone_radius(d)));
    }
    PointName::new(balls)
}

fn pad_to(path: &Node, len: usize) -> Node {
    let mut bits: Vec<u8> = (0..len).map(|k| path.path_bit(k)).collect();
    let n = Node::from_bits(&bits);
    bits.clear();
    n
}

fn alive(m: &MetricState, n: &Node) -> bool {
    !m.schedule().removed_by(n, m.schedule().stabilization_stage())
}

/// Shallowest alive descendant of `from` with both children alive.
fn branching_descendant(m: &MetricState, from: &Node) -> Result<Node> {
    let window = m.schedule().window();
    let mut cur = from.clone();
    loop {
        if cur.len() + 1 > window {
            return Err(Error::BudgetExceeded(format!(
                "no splitting below {from} within the window (isolated path?)"
            )));
        }
        let c0 = cur.child(0);
        let c1 = cur.child(1);
        match (alive(m, &c0), alive(m, &c1)) {
            (true, true) => return Ok(cur),
            (true, false) => cur = c0,
            (false, true) => cur = c1,
            (false, false) => {
                return Err(Error::Construction(format!(
                    "alive node {cur} has no alive children (pruned promise violated)"
                )))
            }
        }
    }
}

/// Name the cone below `base` by the cone balls of its alive
/// depth-`ball_depth` extensions.
fn cone_name(m: &MetricState, base: &Node, ball_depth: usize) -> Result<FinitaryName> {
    if ball_depth > m.schedule().window() {
        return Err(Error::BudgetExceeded(format!(
            "ball depth {ball_depth} exceeds the window"
        )));
    }
    let mut balls = Vec::new();
    let mut level = vec![base.clone()];
    for _ in base.len()..ball_depth {
        level = level
            .into_iter()
            .flat_map(|n| [n.child(0), n.child(1)])
            .filter(|n| alive(m, n))
            .collect();
    }
    for ext in level {
        balls.push(m.cone_ball(&ext)?);
    }
    if balls.is_empty() {
        return Err(Error::Construction(format!("cone below {base} is empty")));
    }
    Ok(FinitaryName::new(balls))
}

/// Assign the tree encoding: the root gets the empty string; children
/// `t_0..t_k` of a node with value `p` get `p0, p10, p110, ..., p1^k`.
pub fn psi_encode(children_of: &[Vec<usize>]) -> Vec<Node> {
    let mut psi: Vec<Node> = vec![Node::root(); children_of.len()];
    let mut queue = vec![0usize];
    while let Some(idx) = queue.pop() {
        let kids = &children_of[idx];
        let k = kids.len();
        for (i, &c) in kids.iter().enumerate() {
            let mut bits: Vec<u8> = psi[idx].bits().to_vec();
            if i + 1 == k {
                bits.extend(std::iter::repeat(1).take(k.saturating_sub(1)));
            } else {
                bits.extend(std::iter::repeat(1).take(i));
                bits.push(0);
            }
            psi[c] = Node::from_bits(&bits);
            queue.push(c);
        }
    }
    psi
}

/// Build the splitting tree of an atomless presentation: binary splits
/// at the shallowest branching node of each cell, ball depths growing to
/// keep the radii under `2^-level` and the formal relations strict.
///
/// `radius` is the non-uniformly supplied rational with
/// `B(alpha_0, radius)` the whole space.
pub fn build_splitting_tree(m: &MetricState, radius: Q, depth: usize) -> Result<SplittingTree> {
    let root = SplitNode {
        level: 0,
        base: Node::root(),
        ball_depth: 0,
        name: FinitaryName::new(vec![BasicBall::new(0, radius)]),
        psi: Node::root(),
        parent: None,
        children: Vec::new(),
    };
    let mut tree = SplittingTree {
        nodes: vec![root],
        root_radius: radius,
    };
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::new();
        for idx in frontier {
            let (base, level, parent_depth) = {
                let n = &tree.nodes[idx];
                (n.base.clone(), n.level, n.ball_depth)
            };
            let split = branching_descendant(m, &base)?;
            for bit in [0u8, 1u8] {
                let child_base = split.child(bit);
                let mut ball_depth = child_base.len().max(level + 2).max(child_base.len() + 1);
                if level > 0 {
                    ball_depth = ball_depth.max(parent_depth + 2);
                }
                let name = cone_name(m, &child_base, ball_depth)?;
                let child = SplitNode {
                    level: level + 1,
                    base: child_base,
                    ball_depth,
                    name,
                    psi: Node::root(), // assigned below
                    parent: Some(idx),
                    children: Vec::new(),
                };
                let cid = tree.nodes.len();
                tree.nodes.push(child);
                tree.nodes[idx].children.push(cid);
                next.push(cid);
            }
        }
        frontier = next;
    }
    assign_psi(&mut tree);
    Ok(tree)
}

fn assign_psi(tree: &mut SplittingTree) {
    let children: Vec<Vec<usize>> = tree.nodes.iter().map(|n| n.children.clone()).collect();
    let psi = psi_encode(&children);
    for (n, p) in tree.nodes.iter_mut().zip(psi) {
        n.psi = p;
    }
}

/// Verify conditions (c.1)-(c.4) of a splitting tree against the
/// presentation; (c.4) is checked semantically at the window depth.
pub fn verify_splitting_tree(m: &MetricState, tree: &SplittingTree, spine_root: bool) -> Result<()> {
    let window = m.schedule().window();
    let alive_exts = |base: &Node| -> BTreeSet<Node> {
        let mut level = vec![base.clone()];
        for _ in base.len()..window {
            level = level
                .into_iter()
                .flat_map(|n| [n.child(0), n.child(1)])
                .filter(|n| alive(m, n))
                .collect();
        }
        level.into_iter().collect()
    };
    for (idx, node) in tree.nodes.iter().enumerate() {
        if idx > 0 {
            // (c.1): radii at level L stay under 2^-L
            let bound = Q::new(1, 1i64 << node.level);
            for b in &node.name.balls {
                if b.radius > bound {
                    return Err(Error::Construction(format!(
                        "(c.1) violated at level {}: radius {}",
                        node.level, b.radius
                    )));
                }
            }
        }
        // (c.2): siblings formally disjoint
        for (i, &a) in node.children.iter().enumerate() {
            for &b in node.children.iter().skip(i + 1) {
                if !m.formally_disjoint(&tree.nodes[a].name, &tree.nodes[b].name)? {
                    return Err(Error::Construction(format!(
                        "(c.2) violated between children of node {idx}"
                    )));
                }
            }
        }
        // (c.3): children formally included in the parent
        if idx > 0 || !spine_root {
            for &c in &node.children {
                if !m.formally_included(&tree.nodes[c].name, &node.name)? {
                    return Err(Error::Construction(format!(
                        "(c.3) violated at child {c} of node {idx}"
                    )));
                }
            }
        }
        // (c.4): the children partition the parent cell (exact mode);
        // for the spine variant the root children only cover the
        // complement of the isolated point
        if !node.children.is_empty() && (idx > 0 || !spine_root) {
            let parent_set = alive_exts(&node.base);
            let mut union = BTreeSet::new();
            for &c in &node.children {
                union.extend(alive_exts(&tree.nodes[c].base));
            }
            if parent_set != union {
                return Err(Error::Construction(format!(
                    "(c.4) violated at node {idx}"
                )));
            }
        }
    }
    Ok(())
}

/// The target-presentation string a splitting-tree node maps onto.
fn target_string(op: &HomeoOperator, idx: usize) -> Node {
    let psi = &op.tree.nodes[idx].psi;
    match op.variant {
        Variant::Atomless => psi.clone(),
        Variant::Spine { .. } => {
            let mut bits = vec![1u8];
            bits.extend_from_slice(psi.bits());
            Node::from_bits(&bits)
        }
    }
}

/// Does this ball (in the source presentation) contain only the
/// isolated point, at exact limit distances?
fn ball_isolates(m: &MetricState, ball: &BasicBall, iso_index: usize) -> Result<bool> {
    let iso_path = m.limit_rep(iso_index)?.clone();
    if !dyadic_lt_q(m.limit_distance(iso_index, ball.center)?, ball.radius) {
        return Ok(false);
    }
    for j in 0..m.point_count() {
        if m.point_in_ball(j, ball)? && !m.limit_rep(j)?.same_path(&iso_path) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Apply the operator to a point name of the source presentation,
/// emitting the target cylinders of every matched cell down to the
/// requested precision (the deepest emitted ball has set diameter at
/// most `2^-precision`).
pub fn homeo_apply(
    op: &HomeoOperator,
    source: &MetricState,
    target: &MetricState,
    x: &PointName,
    precision: usize,
) -> Result<PointName> {
    let whole = BasicBall::new(0, Q::new(2, 1));
    let mut balls = vec![whole];
    if let Variant::Spine { iso_index, .. } = op.variant {
        let isolates = x
            .balls
            .iter()
            .map(|b| ball_isolates(source, b, iso_index))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .any(|v| v);
        if isolates {
            // the isolated point maps to the zero spine
            for k in 0..=precision {
                let spine = Node::from_bits(&vec![0u8; k + 1]);
                let center = target
                    .index_of_path(&spine)
                    .ok_or_else(|| Error::Domain(format!("no target index for {spine}")))?;
                balls.push(BasicBall::new(center, Q::new(1, 1i64 << (k + 2))));
            }
            return PointName::new(balls);
        }
    }
    let mut best_len = 0usize;
    let mut matched: Vec<(usize, Node)> = Vec::new();
    for (idx, node) in op.tree.nodes.iter().enumerate().skip(1) {
        let hit = x.balls.iter().any(|b| {
            source
                .formally_included(&FinitaryName::new(vec![b.clone()]), &node.name)
                .unwrap_or(false)
        });
        if hit {
            let t = target_string(op, idx);
            best_len = best_len.max(t.len());
            matched.push((idx, t));
        }
    }
    if best_len < precision {
        return Err(Error::InsufficientName(format!(
            "name pins cells only to cylinder length {best_len}, precision {precision} requested"
        )));
    }
    matched.sort_by_key(|(_, t)| t.len());
    for (_, t) in matched {
        let center = target
            .index_of_path(&t)
            .ok_or_else(|| Error::Domain(format!("no target index for {t}")))?;
        let ball = BasicBall::new(center, cone_radius(t.len()));
        if balls.last().map(|b| ball.radius < b.radius).unwrap_or(true) {
            balls.push(ball);
        }
    }
    PointName::new(balls)
}

/// Apply the constructed inverse: match target balls into cell
/// cylinders by exact set containment and emit the source cone balls of
/// the matched cells.
pub fn inverse_apply(
    op: &HomeoOperator,
    source: &MetricState,
    target: &MetricState,
    y: &PointName,
    precision: usize,
) -> Result<PointName> {
    let whole = BasicBall::new(0, Q::new(2, 1));
    let mut balls = vec![whole];
    // ball set as (path prefix, depth): B(c, r) = cone(path(c) restricted
    // to the agreement depth)
    let ball_cone = |b: &BasicBall| -> Result<Node> {
        let path = target.limit_rep(b.center)?.clone();
        Ok(pad_to(&path, b.agreement_depth() as usize))
    };
    if let Variant::Spine { iso_index, iso_radius } = &op.variant {
        // a target ball strictly inside the zero spine names the image
        // of the isolated point
        let hits_spine = y.balls.iter().any(|b| {
            ball_cone(b)
                .map(|c| !c.is_root() && c.bits().iter().all(|&x| x == 0))
                .unwrap_or(false)
        });
        if hits_spine {
            let iso_path = source.limit_rep(*iso_index)?.clone();
            for d in 1..=precision.max(1) {
                let prefix = pad_to(&iso_path, d);
                let center = source
                    .index_of_path(&prefix)
                    .ok_or_else(|| Error::Domain(format!("no source index for {prefix}")))?;
                let r = cone_radius(d).min(*iso_radius);
                if balls.last().map(|b| r < b.radius).unwrap_or(true) {
                    balls.push(BasicBall::new(center, r));
                }
            }
            return PointName::new(balls);
        }
    }
    let mut matched: Vec<(usize, usize)> = Vec::new(); // (base depth, node)
    for (idx, node) in op.tree.nodes.iter().enumerate().skip(1) {
        let t = target_string(op, idx);
        let hit = y.balls.iter().any(|b| {
            ball_cone(b)
                .map(|c| c.len() >= t.len() && t.is_prefix_of(&c))
                .unwrap_or(false)
        });
        if hit {
            matched.push((node.base.len(), idx));
        }
    }
    let best = matched.iter().map(|(d, _)| *d).max().unwrap_or(0);
    if best < precision {
        return Err(Error::InsufficientName(format!(
            "target name pins cells only to cone depth {best}, precision {precision} requested"
        )));
    }
    matched.sort();
    for (_, idx) in matched {
        let base = &op.tree.nodes[idx].base;
        let center = source
            .index_of_path(base)
            .ok_or_else(|| Error::Domain(format!("no source index for {base}")))?;
        let ball = BasicBall::new(center, cone_radius(base.len()));
        if balls.last().map(|b| ball.radius < b.radius).unwrap_or(true) {
            balls.push(ball);
        }
    }
    PointName::new(balls)
}

/// Build the isolated-point variant: the splitting tree lives on the
/// complement of the isolated point (every cell formally disjoint from
/// `B(alpha_iso, radius)`), whose image is the spine tree target.
pub fn spine_variant(
    m: &MetricState,
    iso_index: usize,
    radius: Q,
    depth: usize,
) -> Result<HomeoOperator> {
    let iso_path = m.limit_rep(iso_index)?.clone();
    // precondition: the ball isolates exactly one limit class
    let iso_ball = BasicBall::new(iso_index, radius);
    if !ball_isolates(m, &iso_ball, iso_index)? {
        return Err(Error::Precondition(format!(
            "B(alpha_{iso_index}, {radius}) is not a single point"
        )));
    }
    // off-spine cones: the alive siblings along the isolated path
    let window = m.schedule().window();
    let mut off = Vec::new();
    for k in 0..window {
        let mut bits: Vec<u8> = (0..k).map(|i| iso_path.path_bit(i)).collect();
        bits.push(1 - iso_path.path_bit(k));
        let cone = Node::from_bits(&bits);
        if alive(m, &cone) {
            off.push(cone);
        }
    }
    if off.is_empty() {
        return Err(Error::Precondition(
            "the complement of the isolated point is empty".into(),
        ));
    }
    let root = SplitNode {
        level: 0,
        base: Node::root(),
        ball_depth: 0,
        name: FinitaryName::new(vec![BasicBall::new(0, Q::new(2, 1))]),
        psi: Node::root(),
        parent: None,
        children: Vec::new(),
    };
    let mut tree = SplittingTree {
        nodes: vec![root],
        root_radius: Q::new(2, 1),
    };
    // root children: the off-spine cones if there are at least two,
    // otherwise the binary split of the single cone
    let bases: Vec<Node> = if off.len() >= 2 {
        off
    } else {
        let split = branching_descendant(m, &off[0])?;
        vec![split.child(0), split.child(1)]
    };
    let mut frontier = Vec::new();
    for base in bases {
        let ball_depth = (base.len() + 1).max(2);
        let name = cone_name(m, &base, ball_depth)?;
        let cid = tree.nodes.len();
        tree.nodes.push(SplitNode {
            level: 1,
            base,
            ball_depth,
            name,
            psi: Node::root(),
            parent: Some(0),
            children: Vec::new(),
        });
        tree.nodes[0].children.push(cid);
        frontier.push(cid);
    }
    for _ in 1..depth.max(1) {
        let mut next = Vec::new();
        for idx in frontier {
            let (base, level, parent_depth) = {
                let n = &tree.nodes[idx];
                (n.base.clone(), n.level, n.ball_depth)
            };
            let split = branching_descendant(m, &base)?;
            for bit in [0u8, 1u8] {
                let child_base = split.child(bit);
                let ball_depth = (child_base.len() + 1)
                    .max(level + 2)
                    .max(parent_depth + 2);
                let name = cone_name(m, &child_base, ball_depth)?;
                let cid = tree.nodes.len();
                tree.nodes.push(SplitNode {
                    level: level + 1,
                    base: child_base,
                    ball_depth,
                    name,
                    psi: Node::root(),
                    parent: Some(idx),
                    children: Vec::new(),
                });
                tree.nodes[idx].children.push(cid);
                next.push(cid);
            }
        }
        frontier = next;
    }
    assign_psi(&mut tree);
    // every cell must be formally disjoint from the isolated ball
    let iso_name = FinitaryName::new(vec![iso_ball]);
    for node in tree.nodes.iter().skip(1) {
        if !m.formally_disjoint(&node.name, &iso_name)? {
            return Err(Error::Construction(format!(
                "cell at {} touches the isolated ball",
                node.base
            )));
        }
    }
    Ok(HomeoOperator {
        tree,
        variant: Variant::Spine {
            iso_index,
            iso_radius: radius,
        },
    })
}

/// Largest radius isolating special point `i`: the minimum limit
/// distance to any other point class.
pub fn isolation_radius(m: &MetricState, i: usize) -> Result<Q> {
    let mut best: Option<Q> = None;
    for j in 0..m.point_count() {
        let d = m.limit_distance(i, j)?;
        if !d.is_zero() {
            let q = d.to_ratio();
            best = Some(match best {
                None => q,
                Some(b) => b.min(q),
            });
        }
    }
    best.ok_or_else(|| Error::Precondition("space has a single point".into()))
}

/// A radius small enough for the spine construction: it isolates the
/// point and leaves room for every off-spine cell to be formally
/// disjoint from the isolated ball.
pub fn spine_radius(m: &MetricState, i: usize) -> Result<Q> {
    let iso = isolation_radius(m, i)?;
    let window = m.schedule().window();
    Ok(iso.min(Q::new(1, 1i64 << window.min(40))))
}

/// The induced Boolean algebra map: each source algebra element is
/// refined into splitting cells, carried through the two encodings, and
/// located in the target algebra by cone comparison. Returns the image
/// mask of every atom cell of `a`.
pub fn induced_algebra_iso(
    a: &FiniteBooleanAlgebra,
    a_tree: &TaggedShapeTree,
    a_m: &MetricState,
    a_op: &HomeoOperator,
    c: &FiniteBooleanAlgebra,
    c_tree: &TaggedShapeTree,
    c_m: &MetricState,
    c_op: &HomeoOperator,
) -> Result<Vec<u32>> {
    let window_a = a_m.schedule().window();
    let window_c = c_m.schedule().window();
    let a_exts = |base: &Node| -> BTreeSet<Node> {
        deep_exts(a_tree, base, window_a)
    };
    let mut images = Vec::with_capacity(a.cell_count());
    for cell in a.cells() {
        // refine the cell into source splitting cells
        let cell_set: BTreeSet<Node> = cell
            .cones()
            .iter()
            .flat_map(|c| a_exts(c))
            .collect();
        let mut targets: Vec<Node> = Vec::new();
        refine_into_cells(a_op, &a_exts, &cell_set, 0, &mut targets)?;
        // special cells: the isolated point of the spine variant
        let mut c_cones: Vec<Node> = Vec::new();
        if let Variant::Spine { iso_index, .. } = &a_op.variant {
            let iso_path = a_m.limit_rep(*iso_index)?.clone();
            let iso_ext = pad_to(&iso_path, window_a);
            if cell_set.contains(&iso_ext) {
                // the isolated point maps to the target isolated point
                match &c_op.variant {
                    Variant::Spine { iso_index: cj, .. } => {
                        let p = c_m.limit_rep(*cj)?.clone();
                        c_cones.push(pad_to(&p, separation_depth(c_tree, &p, window_c)));
                    }
                    Variant::Atomless => {
                        return Err(Error::Precondition(
                            "operators disagree on isolated points".into(),
                        ))
                    }
                }
            }
        }
        // pull the target cylinders back through the second operator
        let c_exts = |base: &Node| -> BTreeSet<Node> { deep_exts(c_tree, base, window_c) };
        for t in &targets {
            pull_back(c_op, &c_exts, t, 0, &mut c_cones)?;
        }
        // locate the element of c with that cone set
        let mask = locate_element(c, c_tree, &c_cones)?;
        images.push(mask);
    }
    Ok(images)
}

fn deep_exts(tree: &TaggedShapeTree, base: &Node, window: usize) -> BTreeSet<Node> {
    let mut level = vec![base.clone()];
    for _ in base.len()..window {
        level = level
            .into_iter()
            .flat_map(|n| [n.child(0), n.child(1)])
            .filter(|n| tree.member(n))
            .collect();
    }
    level.into_iter().collect()
}

/// Descend the splitting tree collecting the target cylinders of the
/// cells lying inside `set`.
fn refine_into_cells(
    op: &HomeoOperator,
    exts: &dyn Fn(&Node) -> BTreeSet<Node>,
    set: &BTreeSet<Node>,
    idx: usize,
    out: &mut Vec<Node>,
) -> Result<()> {
    let node = &op.tree.nodes[idx];
    if idx > 0 {
        let cell = exts(&node.base);
        if cell.iter().all(|x| set.contains(x)) {
            out.push(target_string(op, idx));
            return Ok(());
        }
        if cell.iter().all(|x| !set.contains(x)) {
            return Ok(());
        }
    }
    if node.children.is_empty() {
        return Err(Error::BudgetExceeded(format!(
            "splitting tree too shallow to refine below {}",
            node.base
        )));
    }
    for &c in &node.children.clone() {
        refine_into_cells(op, exts, set, c, out)?;
    }
    Ok(())
}

/// Descend the target-side splitting tree collecting source cones of
/// the cells whose cylinders lie inside the target cylinder `t`.
fn pull_back(
    op: &HomeoOperator,
    _exts: &dyn Fn(&Node) -> BTreeSet<Node>,
    t: &Node,
    idx: usize,
    out: &mut Vec<Node>,
) -> Result<()> {
    let node = &op.tree.nodes[idx];
    if idx > 0 {
        let cyl = target_string(op, idx);
        if t.is_prefix_of(&cyl) {
            out.push(node.base.clone());
            return Ok(());
        }
        if !cyl.is_prefix_of(t) {
            return Ok(());
        }
    }
    if node.children.is_empty() {
        return Err(Error::BudgetExceeded(format!(
            "target splitting tree too shallow below cylinder {t}"
        )));
    }
    for &c in &node.children.clone() {
        pull_back(op, _exts, t, c, out)?;
    }
    Ok(())
}

/// Depth at which the path separates from every other leaf of the tree.
fn separation_depth(tree: &TaggedShapeTree, path: &Node, window: usize) -> usize {
    for d in 1..=window {
        let prefix = pad_to(path, d);
        if tree.cone_path_count_capped(&prefix) == 1 {
            return d;
        }
    }
    window
}

/// Find the element of the algebra whose set equals the union of the
/// given cones, via level expansion.
fn locate_element(alg: &FiniteBooleanAlgebra, tree: &TaggedShapeTree, cones: &[Node]) -> Result<u32> {
    if cones.is_empty() {
        return Ok(alg.zero());
    }
    let mut mask = 0u32;
    for (i, cell) in alg.cells().iter().enumerate() {
        // does the cell lie inside the cone union?
        let window = tree.depth().max(cones.iter().map(Node::len).max().unwrap_or(0));
        let cell_set = cell
            .cones()
            .iter()
            .flat_map(|c| deep_exts(tree, c, window))
            .collect::<BTreeSet<Node>>();
        let cone_set = cones
            .iter()
            .flat_map(|c| deep_exts(tree, c, window))
            .collect::<BTreeSet<Node>>();
        if cell_set.iter().all(|x| cone_set.contains(x)) {
            mask |= 1 << i;
        }
    }
    // verify exactness with the cone comparison procedure
    let element_cones: Vec<Node> = alg
        .cells()
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .flat_map(|(_, cell)| cell.cones().iter().cloned())
        .collect();
    if !cones_equal(&element_cones, cones, tree)? {
        return Err(Error::Construction(
            "cone tuple does not denote an algebra element".into(),
        ));
    }
    Ok(mask)
}

/// Verify that an atom-image assignment induces a Boolean algebra
/// isomorphism (images partition the target and the lifted map is
/// bijective on elements).
pub fn verify_element_iso(a: &FiniteBooleanAlgebra, c: &FiniteBooleanAlgebra, images: &[u32]) -> bool {
    if images.len() != a.cell_count() {
        return false;
    }
    let mut seen = 0u32;
    for &img in images {
        if img == 0 || seen & img != 0 {
            return false; // empty or overlapping atom images
        }
        seen |= img;
    }
    if seen != c.one() {
        return false;
    }
    let lift = |mask: u32| -> u32 {
        images
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .fold(0, |m, (_, &img)| m | img)
    };
    let n = a.element_count().min(1 << 12) as u32;
    for x in 0..n {
        if lift(a.complement(x)) != c.complement(lift(x)) {
            return false;
        }
        for y in 0..n {
            if lift(a.join(x, y)) != c.join(lift(x), lift(y))
                || lift(a.meet(x, y)) != c.meet(lift(x), lift(y))
            {
                return false;
            }
        }
    }
    true
}

/// Ball-depth bound the splitting construction will need on this
/// baseline, used to size the schedule window.
pub fn required_window(tree: &TaggedShapeTree, depth: usize) -> usize {
    fn descend(tree: &TaggedShapeTree, from: &Node, limit: usize) -> Option<Node> {
        let mut cur = from.clone();
        loop {
            if cur.len() + 1 > limit {
                return None;
            }
            let c0 = cur.child(0);
            let c1 = cur.child(1);
            match (tree.member(&c0), tree.member(&c1)) {
                (true, true) => return Some(cur),
                (true, false) => cur = c0,
                (false, true) => cur = c1,
                (false, false) => return None,
            }
        }
    }
    let limit = tree.depth() + 2 * depth.max(1) + 4;
    let mut frontier = vec![(Node::root(), 0usize, 0usize)]; // (base, level, ball depth)
    let mut max_depth = 0usize;
    for _ in 0..depth {
        let mut next = Vec::new();
        for (base, level, parent_depth) in frontier {
            let Some(split) = descend(tree, &base, limit) else {
                continue;
            };
            for bit in [0u8, 1u8] {
                let child = split.child(bit);
                let mut d = child.len().max(level + 2).max(child.len() + 1);
                if level > 0 {
                    d = d.max(parent_depth + 2);
                }
                max_depth = max_depth.max(d);
                next.push((child, level + 1, d));
            }
        }
        frontier = next;
    }
    max_depth + 2
}
