use std::collections::BTreeSet;

use crate::dyadic::{dyadic_lt_q, Dyadic, Q};
use crate::error::Error;
use crate::schedule::{RemovalSchedule, StagewiseTree};
use crate::tree::Node;
use crate::Result;

/// The standard ultrametric on padded paths: 0 if the paths agree,
/// otherwise `2^-n` where `n` is the first index of disagreement.
pub fn ultrametric(x: &Node, y: &Node) -> Dyadic {
    match x.path_lcp(y) {
        None => Dyadic::ZERO,
        Some(n) => Dyadic::pow2_neg(n as u32),
    }
}

/// A basic open ball `B(alpha_i, q)` with strict inequality `d < q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBall {
    pub center: usize,
    pub radius: Q,
}

impl BasicBall {
    pub fn new(center: usize, radius: Q) -> Self {
        debug_assert!(radius > Q::from_integer(0));
        BasicBall { center, radius }
    }

    /// Number of leading path bits a point must share with the center
    /// to lie in the ball: the least `k` with `2^-k < q`.
    pub fn agreement_depth(&self) -> u32 {
        let mut k = 0u32;
        while !dyadic_lt_q(Dyadic::pow2_neg(k), self.radius) {
            k += 1;
        }
        k
    }
}

/// A finite tuple of basic balls naming an open set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinitaryName {
    pub balls: Vec<BasicBall>,
}

impl FinitaryName {
    pub fn new(balls: Vec<BasicBall>) -> Self {
        assert!(!balls.is_empty(), "finitary names are nonempty");
        FinitaryName { balls }
    }
}

/// A cover accepted by the stagewise enumeration.
#[derive(Debug, Clone)]
pub struct CoverRecord {
    pub name: FinitaryName,
    pub accepted_at_stage: usize,
}

/// The stagewise special-point table of the metric construction.
///
/// Indices name the first `n` binary strings in (length, lex) order; at
/// every stage each index points at a representative string, and a
/// removal event re-points every index whose padded path just died to
/// the surviving string with the longest common path prefix (ties broken
/// Kleene–Brouwer least). Distances between stage representatives are
/// nonincreasing, which makes the limit metric right-c.e.
#[derive(Debug, Clone)]
pub struct MetricState {
    tree: StagewiseTree,
    universe: Vec<Node>,
    stage: usize,
    // representatives are interned: ids index into `strings`
    strings: Vec<Node>,
    ids: std::collections::BTreeMap<Node, u32>,
    reps: Vec<u32>,
    history: Vec<Vec<u32>>,
}

impl MetricState {
    /// Stage-0 state over the first `points` strings.
    pub fn stage_zero(schedule: RemovalSchedule, points: usize) -> Result<Self> {
        let universe = Node::enumerate(points);
        if let Some(deep) = universe.iter().find(|u| u.len() > schedule.window()) {
            return Err(Error::Domain(format!(
                "point universe string {deep} exceeds the schedule window {}",
                schedule.window()
            )));
        }
        let mut m = MetricState {
            tree: StagewiseTree::new(schedule),
            universe: universe.clone(),
            stage: 0,
            strings: Vec::new(),
            ids: std::collections::BTreeMap::new(),
            reps: Vec::new(),
            history: Vec::new(),
        };
        m.reps = universe.iter().map(|u| m_intern(&mut m.strings, &mut m.ids, u)).collect();
        m.history.push(m.reps.clone());
        Ok(m)
    }

    /// Run the construction through the stabilization stage.
    pub fn build(schedule: RemovalSchedule, points: usize) -> Result<Self> {
        let mut m = Self::stage_zero(schedule, points)?;
        let stab = m.tree.schedule().stabilization_stage();
        while m.stage < stab {
            m.advance_in_place()?;
        }
        Ok(m)
    }

    pub fn stagewise_tree(&self) -> &StagewiseTree {
        &self.tree
    }

    pub fn schedule(&self) -> &RemovalSchedule {
        self.tree.schedule()
    }

    pub fn point_count(&self) -> usize {
        self.universe.len()
    }

    pub fn universe(&self) -> &[Node] {
        &self.universe
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn stabilization_stage(&self) -> usize {
        self.tree.schedule().stabilization_stage()
    }

    pub fn rep_at(&self, i: usize, s: usize) -> Result<&Node> {
        let hist = self
            .history
            .get(s)
            .ok_or_else(|| Error::Domain(format!("stage {s} not yet constructed")))?;
        hist.get(i)
            .map(|&id| &self.strings[id as usize])
            .ok_or_else(|| Error::Domain(format!("unknown point index {i}")))
    }

    /// Representative after all removal events (exact limit).
    pub fn limit_rep(&self, i: usize) -> Result<&Node> {
        if self.stage < self.tree.schedule().last_event_stage() {
            return Err(Error::Construction(
                "state not yet advanced to stabilization".into(),
            ));
        }
        self.reps
            .get(i)
            .map(|&id| &self.strings[id as usize])
            .ok_or_else(|| Error::Domain(format!("unknown point index {i}")))
    }

    /// Stage-`s` upper bound on the distance between points `i` and `j`.
    pub fn distance_upper(&self, i: usize, j: usize, s: usize) -> Result<Dyadic> {
        Ok(ultrametric(self.rep_at(i, s)?, self.rep_at(j, s)?))
    }

    /// Exact limit distance between points `i` and `j`.
    pub fn limit_distance(&self, i: usize, j: usize) -> Result<Dyadic> {
        Ok(ultrametric(self.limit_rep(i)?, self.limit_rep(j)?))
    }

    /// Advance one stage, applying the scheduled removal event if any.
    ///
    /// When a string `sigma` leaves, every index whose representative's
    /// padded path passes through `sigma` is re-pointed to the stage
    /// tree string with the longest common path prefix among strings
    /// whose own padded path is still alive; ties go to the
    /// Kleene–Brouwer least such string.
    pub fn advanced(&self) -> Result<Self> {
        let mut next = self.clone();
        next.advance_in_place()?;
        Ok(next)
    }

    fn advance_in_place(&mut self) -> Result<()> {
        let next = self.stage + 1;
        if let Some(event) = self.tree.schedule().event_at(next).cloned() {
            let affected: Vec<usize> = (0..self.reps.len())
                .filter(|&i| self.strings[self.reps[i] as usize].path_extends(&event))
                .collect();
            if !affected.is_empty() {
                let target =
                    self.merge_target(&self.strings[self.reps[affected[0]] as usize].clone(), next)?;
                let id = m_intern(&mut self.strings, &mut self.ids, &target);
                for i in affected {
                    self.reps[i] = id;
                }
            }
        }
        self.history.push(self.reps.clone());
        self.stage = next;
        Ok(())
    }

    /// The merge target for a dying representative at stage `s`.
    fn merge_target(&self, dying: &Node, s: usize) -> Result<Node> {
        let schedule = self.tree.schedule();
        let mut best: Option<(usize, Node)> = None;
        for cand in self.tree.tree_at_stage(s) {
            if !schedule.zero_live_at(&cand, s) {
                continue;
            }
            let score = match dying.path_lcp(&cand) {
                None => usize::MAX, // cannot happen: the dying path is dead
                Some(k) => k,
            };
            match &best {
                None => best = Some((score, cand)),
                Some((bs, bn)) => {
                    if score > *bs || (score == *bs && cand.kb_less(bn)) {
                        best = Some((score, cand));
                    }
                }
            }
        }
        best.map(|(_, n)| n).ok_or_else(|| {
            Error::Construction("stage tree has no surviving string (pruned promise violated)".into())
        })
    }

    /// Index of the first universe string with the given padded path,
    /// the canonical special point sitting at a tree string.
    pub fn index_of_path(&self, s: &Node) -> Option<usize> {
        self.universe.iter().position(|u| u.same_path(s))
    }

    // ---- covers ---------------------------------------------------

    /// Stage-`s` acceptance check for a candidate cover.
    ///
    /// The tuple is accepted once the stage is at least the agreement
    /// depth of its coarsest ball and every maximal-depth node of the
    /// stage tree lies in some ball under the current representatives;
    /// accepted tuples remain covers at every later stage.
    pub fn cover_accepted(&self, name: &FinitaryName, s: usize) -> Result<bool> {
        let depth_gate = name
            .balls
            .iter()
            .map(BasicBall::agreement_depth)
            .max()
            .unwrap_or(0) as usize;
        if s < depth_gate.min(self.tree.schedule().window()) {
            return Ok(false);
        }
        let level = self.tree.max_level(s);
        for node in self.tree.level_at_stage(level, s) {
            let covered = name.balls.iter().any(|b| {
                self.rep_at(b.center, s)
                    .map(|rep| dyadic_lt_q(ultrametric(rep, &node), b.radius))
                    .unwrap_or(false)
            });
            if !covered {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Enumerate minimal accepted covers at stage `s` over the canonical
    /// ball family with tuple length and radius denominators bounded by
    /// `size_bound` (a cover is minimal if no ball can be dropped).
    pub fn enumerate_covers(&self, s: usize, size_bound: usize) -> Result<Vec<CoverRecord>> {
        let balls = self.ball_family(size_bound);
        let mut masks: Vec<(usize, u64)> = Vec::new();
        let level = self.tree.max_level(s);
        let nodes = self.tree.level_at_stage(level, s);
        if nodes.len() > 64 {
            return Err(Error::Domain("stage level too wide for cover dump".into()));
        }
        for (bi, b) in balls.iter().enumerate() {
            let mut mask = 0u64;
            for (ni, node) in nodes.iter().enumerate() {
                let rep = self.rep_at(b.center, s)?;
                if dyadic_lt_q(ultrametric(rep, node), b.radius) {
                    mask |= 1 << ni;
                }
            }
            masks.push((bi, mask));
        }
        let full = if nodes.is_empty() {
            0
        } else {
            (1u64 << nodes.len()) - 1
        };
        let mut out = Vec::new();
        let mut tuple: Vec<usize> = Vec::new();
        self.search_covers(&balls, &masks, full, s, size_bound, 0, 0, &mut tuple, &mut out)?;
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn search_covers(
        &self,
        balls: &[BasicBall],
        masks: &[(usize, u64)],
        full: u64,
        s: usize,
        size_bound: usize,
        from: usize,
        acc: u64,
        tuple: &mut Vec<usize>,
        out: &mut Vec<CoverRecord>,
    ) -> Result<()> {
        if acc == full && !tuple.is_empty() {
            // minimality: every ball contributes a node no other covers
            let minimal = tuple.iter().all(|&bi| {
                let rest = tuple
                    .iter()
                    .filter(|&&o| o != bi)
                    .fold(0u64, |m, &o| m | masks[o].1);
                rest != full
            });
            let name = FinitaryName::new(tuple.iter().map(|&bi| balls[bi].clone()).collect());
            if minimal && self.cover_accepted(&name, s)? {
                out.push(CoverRecord {
                    name,
                    accepted_at_stage: s,
                });
            }
            return Ok(());
        }
        if tuple.len() >= size_bound {
            return Ok(());
        }
        for bi in from..balls.len() {
            if masks[bi].1 & !acc == 0 {
                continue; // contributes nothing new
            }
            tuple.push(bi);
            self.search_covers(
                balls,
                masks,
                full,
                s,
                size_bound,
                bi + 1,
                acc | masks[bi].1,
                tuple,
                out,
            )?;
            tuple.pop();
        }
        Ok(())
    }

    /// The canonical enumeration of basic balls: all centers, radii
    /// `p/q <= 2` with denominator `q <= bound`, largest radii first.
    pub fn ball_family(&self, bound: usize) -> Vec<BasicBall> {
        let mut radii: BTreeSet<Q> = BTreeSet::new();
        for q in 1..=bound.max(1) as i64 {
            for p in 1..=2 * q {
                radii.insert(Q::new(p, q));
            }
        }
        let mut out = Vec::new();
        for r in radii.into_iter().rev() {
            for c in 0..self.universe.len() {
                out.push(BasicBall::new(c, r));
            }
        }
        out
    }

    // ---- the witness-set intersection enumeration ------------------

    /// Enumerate witnesses `(k, t)` with `d(a.center, k) < a.radius - t`
    /// and `d(b.center, k) < b.radius - t` at the stage-`budget` upper
    /// bounds; the union of the emitted balls is the intersection of the
    /// two input balls in the limit.
    pub fn intersection_witnesses(
        &self,
        a: &BasicBall,
        b: &BasicBall,
        budget: usize,
    ) -> Result<Vec<(usize, Q)>> {
        let s = budget.min(self.stage);
        let mut out = Vec::new();
        for k in 0..self.universe.len().min(budget.max(1)) {
            let da = self.distance_upper(a.center, k, s)?.to_ratio();
            let db = self.distance_upper(b.center, k, s)?.to_ratio();
            for den in 1..=budget.max(1) as i64 {
                for num in 1..=2 * den {
                    let t = Q::new(num, den);
                    if da < a.radius - t && db < b.radius - t {
                        out.push((k, t));
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    // ---- formal ball relations (exact limit distances) -------------

    /// Formal disjointness: every cross pair of balls satisfies
    /// `d(centers) > r1 + r2` at exact limit distances.
    pub fn formally_disjoint(&self, u: &FinitaryName, v: &FinitaryName) -> Result<bool> {
        for a in &u.balls {
            for b in &v.balls {
                let d = self.limit_distance(a.center, b.center)?.to_ratio();
                if d <= a.radius + b.radius {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Formal inclusion: every ball of `u` has a witness ball of `v`
    /// with `d(centers) + r_u < r_v` at exact limit distances.
    pub fn formally_included(&self, u: &FinitaryName, v: &FinitaryName) -> Result<bool> {
        for a in &u.balls {
            let mut witnessed = false;
            for b in &v.balls {
                let d = self.limit_distance(a.center, b.center)?.to_ratio();
                if d + a.radius < b.radius {
                    witnessed = true;
                    break;
                }
            }
            if !witnessed {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Is the limit point of index `i` inside the ball, at exact limit
    /// distances?
    pub fn point_in_ball(&self, i: usize, ball: &BasicBall) -> Result<bool> {
        let d = self.limit_distance(i, ball.center)?;
        Ok(dyadic_lt_q(d, ball.radius))
    }

    /// Membership at the stage-`budget` upper bounds: `Some(true)` is a
    /// sound verdict, `None` means not yet witnessed.
    pub fn point_in_ball_at(&self, i: usize, ball: &BasicBall, budget: usize) -> Result<Option<bool>> {
        let s = budget.min(self.stage);
        let d = self.distance_upper(i, ball.center, s)?;
        if dyadic_lt_q(d, ball.radius) {
            Ok(Some(true))
        } else {
            Ok(None)
        }
    }

    /// The canonical single-ball name of the cone below an alive string:
    /// a ball of radius `3/2^(len+1)` at the string's special point.
    pub fn cone_ball(&self, s: &Node) -> Result<BasicBall> {
        let center = self
            .index_of_path(s)
            .ok_or_else(|| Error::Domain(format!("no point index for {s}")))?;
        Ok(BasicBall::new(center, cone_radius(s.len())))
    }
}

/// Radius naming the cone at the given depth: `3/2^(depth+1)`, the
/// midpoint radius with `B(c, r) = {x : x agrees with c on depth bits}`.
pub fn cone_radius(depth: usize) -> Q {
    Q::new(3, 1i64 << (depth + 1))
}

fn m_intern(strings: &mut Vec<Node>, ids: &mut std::collections::BTreeMap<Node, u32>, n: &Node) -> u32 {
    if let Some(&id) = ids.get(n) {
        return id;
    }
    let id = strings.len() as u32;
    strings.push(n.clone());
    ids.insert(n.clone(), id);
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::RemovalBatch;
    use crate::tree::TaggedShapeTree;

    fn n(s: &str) -> Node {
        Node::parse(s).unwrap()
    }

    fn q(num: i64, den: i64) -> Q {
        Q::new(num, den)
    }

    fn one_removal(points: usize) -> MetricState {
        let baseline = TaggedShapeTree::parse("node -\nleaf 0 cantor\n").unwrap();
        let sched = RemovalSchedule::refine(
            &[RemovalBatch {
                stage: 3,
                cones: vec![n("1")],
            }],
            baseline,
            4,
        )
        .unwrap();
        MetricState::build(sched, points).unwrap()
    }

    fn full_cantor(points: usize, window: usize) -> MetricState {
        let sched = RemovalSchedule::from_tree(&TaggedShapeTree::cantor(window), window).unwrap();
        MetricState::build(sched, points).unwrap()
    }

    #[test]
    fn ultrametric_examples() {
        assert_eq!(ultrametric(&n("0"), &n("00")), Dyadic::ZERO);
        assert_eq!(ultrametric(&Node::root(), &n("1")), Dyadic::ONE);
        assert_eq!(ultrametric(&n("010"), &n("011")), Dyadic::pow2_neg(2));
    }

    #[test]
    fn ultrametric_laws_exhaustive_depth_6() {
        let mut strings = Vec::new();
        for len in 0..=6 {
            strings.extend(Node::all_of_len(len));
        }
        // symmetry + identity of indiscernibles on a sample, strong
        // triangle on all triples of a depth-4 slice
        for x in &strings {
            for y in &strings {
                assert_eq!(ultrametric(x, y), ultrametric(y, x));
                assert_eq!(ultrametric(x, y) == Dyadic::ZERO, x.same_path(y));
            }
        }
        let mut short = Vec::new();
        for len in 0..=4 {
            short.extend(Node::all_of_len(len));
        }
        for x in &short {
            for y in &short {
                let dxy = ultrametric(x, y);
                for z in &short {
                    let dxz = ultrametric(x, z);
                    let dyz = ultrametric(y, z);
                    assert!(dxz <= dxy.max(dyz), "{x} {y} {z}");
                }
            }
        }
    }

    #[test]
    fn no_event_stage_keeps_reps() {
        let m = full_cantor(7, 3);
        // no removals at all: reps never change
        for s in 0..=m.stage() {
            for i in 0..7 {
                assert_eq!(m.rep_at(i, s).unwrap(), &m.universe()[i]);
            }
        }
    }

    #[test]
    fn merge_repoints_to_kb_least_zero_string() {
        let m = one_removal(7);
        let i_one = m.index_of_path(&n("1")).unwrap();
        // before the merge stage the rep is the string itself
        assert_eq!(m.rep_at(i_one, 2).unwrap(), &n("1"));
        // at stage 3 the cone below 1 dies; the rep jumps to the deepest
        // all-zero string of the stage tree
        assert_eq!(m.rep_at(i_one, 3).unwrap(), &n("000"));
        // indices sharing the dead path re-point identically
        let i_ten = m.index_of_path(&n("10")).unwrap();
        assert_eq!(m.rep_at(i_ten, 3).unwrap(), m.rep_at(i_one, 3).unwrap());
    }

    #[test]
    fn distance_upper_is_monotone_and_reaches_limit() {
        let m = one_removal(7);
        let i = m.index_of_path(&Node::root()).unwrap();
        let j = m.index_of_path(&n("1")).unwrap();
        assert_eq!(m.distance_upper(i, j, 0).unwrap(), Dyadic::ONE);
        assert_eq!(m.distance_upper(i, j, 2).unwrap(), Dyadic::ONE);
        assert_eq!(m.distance_upper(i, j, 3).unwrap(), Dyadic::ZERO);
        assert_eq!(m.limit_distance(i, j).unwrap(), Dyadic::ZERO);
        assert_eq!(m.distance_upper(i, i, 0).unwrap(), Dyadic::ZERO);
        for s in 0..m.stage() {
            for a in 0..m.point_count() {
                for b in 0..m.point_count() {
                    assert!(
                        m.distance_upper(a, b, s + 1).unwrap()
                            <= m.distance_upper(a, b, s).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn limit_reps_live_on_the_baseline() {
        let m = one_removal(15);
        for i in 0..m.point_count() {
            let rep = m.limit_rep(i).unwrap();
            assert!(m.schedule().baseline().path_member(rep), "rep {rep}");
        }
    }

    #[test]
    fn whole_space_ball_accepted_at_stage_zero() {
        let m = full_cantor(7, 3);
        let name = FinitaryName::new(vec![BasicBall::new(0, q(2, 1))]);
        assert!(m.cover_accepted(&name, 0).unwrap());
    }

    #[test]
    fn first_bit_cones_cover() {
        let m = full_cantor(7, 3);
        let i0 = m.index_of_path(&n("0")).unwrap();
        let i1 = m.index_of_path(&n("1")).unwrap();
        let name = FinitaryName::new(vec![
            BasicBall::new(i0, q(3, 4)),
            BasicBall::new(i1, q(3, 4)),
        ]);
        assert!(!m.cover_accepted(&name, 0).unwrap()); // depth gate
        assert!(m.cover_accepted(&name, 1).unwrap());
        assert!(m.cover_accepted(&name, 3).unwrap());
    }

    #[test]
    fn thin_balls_never_cover_full_tree() {
        let m = full_cantor(7, 4);
        let i0 = m.index_of_path(&n("0")).unwrap();
        let i1 = m.index_of_path(&n("1")).unwrap();
        let name = FinitaryName::new(vec![
            BasicBall::new(i0, q(1, 8)),
            BasicBall::new(i1, q(1, 8)),
        ]);
        for s in 0..=m.stage() {
            assert!(!m.cover_accepted(&name, s).unwrap(), "stage {s}");
        }
    }

    #[test]
    fn accepted_covers_persist() {
        let m = one_removal(7);
        let records = m.enumerate_covers(2, 2).unwrap();
        assert!(!records.is_empty());
        for r in &records {
            for s in r.accepted_at_stage..=m.stage() {
                assert!(m.cover_accepted(&r.name, s).unwrap());
            }
        }
    }

    #[test]
    fn witnesses_for_overlapping_balls() {
        let m = full_cantor(7, 3);
        let a = BasicBall::new(0, q(1, 1));
        let w = m.intersection_witnesses(&a, &a, 4).unwrap();
        assert!(w.contains(&(0, q(1, 2))));
    }

    #[test]
    fn witnesses_for_disjoint_balls_are_empty() {
        let m = full_cantor(7, 3);
        let i00 = m.index_of_path(&n("00")).unwrap();
        let i10 = m.index_of_path(&n("10")).unwrap();
        let a = BasicBall::new(i00, q(3, 8));
        let b = BasicBall::new(i10, q(3, 8));
        assert!(m
            .formally_disjoint(
                &FinitaryName::new(vec![a.clone()]),
                &FinitaryName::new(vec![b.clone()])
            )
            .unwrap());
        assert!(m.intersection_witnesses(&a, &b, 6).unwrap().is_empty());
    }

    #[test]
    fn witness_balls_fill_a_nested_ball() {
        // a inside b: every depth-4 cell of a is eventually witnessed
        let m = full_cantor(31, 4);
        let i0 = m.index_of_path(&n("0")).unwrap();
        let a = BasicBall::new(i0, q(3, 8)); // cone 00
        let b = BasicBall::new(i0, q(3, 4)); // cone 0
        let ws = m.intersection_witnesses(&a, &b, 16).unwrap();
        for cell in ["0000", "0001", "0010", "0011"] {
            let cell = n(cell);
            let covered = ws.iter().any(|(k, t)| {
                let rep = m.limit_rep(*k).unwrap();
                dyadic_lt_q(ultrametric(rep, &cell), *t)
            });
            assert!(covered, "cell {cell} not witnessed");
        }
    }

    #[test]
    fn formal_relations_examples() {
        let m = full_cantor(7, 3);
        let i0 = m.index_of_path(&n("0")).unwrap();
        let i1 = m.index_of_path(&n("1")).unwrap();
        // B(0^w, 1/8) vs B(1^w... d = 1 > 1/4
        let u = FinitaryName::new(vec![BasicBall::new(i0, q(1, 8))]);
        let v = FinitaryName::new(vec![BasicBall::new(i1, q(1, 8))]);
        assert!(m.formally_disjoint(&u, &v).unwrap());
        let w = FinitaryName::new(vec![BasicBall::new(i0, q(1, 2))]);
        assert!(!m.formally_disjoint(&w, &w).unwrap());
        // inclusion: B(x,1/8) into B(x,1/2)
        assert!(m.formally_included(&u, &w).unwrap());
        assert!(!m.formally_included(&w, &w).unwrap());
        // two-ball name with one ball unwitnessed
        let two = FinitaryName::new(vec![
            BasicBall::new(i0, q(1, 8)),
            BasicBall::new(i1, q(1, 8)),
        ]);
        assert!(!m.formally_included(&two, &w).unwrap());
    }

    #[test]
    fn formal_disjointness_implies_empty_intersection_depth_4() {
        let m = full_cantor(31, 4);
        let balls: Vec<BasicBall> = (0..8)
            .map(|c| BasicBall::new(c, q(3, 8)))
            .collect();
        for a in &balls {
            for b in &balls {
                let u = FinitaryName::new(vec![a.clone()]);
                let v = FinitaryName::new(vec![b.clone()]);
                if m.formally_disjoint(&u, &v).unwrap() {
                    // no depth-4 cell lies in both
                    for cell in Node::all_of_len(4) {
                        let in_a = dyadic_lt_q(
                            ultrametric(m.limit_rep(a.center).unwrap(), &cell),
                            a.radius,
                        );
                        let in_b = dyadic_lt_q(
                            ultrametric(m.limit_rep(b.center).unwrap(), &cell),
                            b.radius,
                        );
                        assert!(!(in_a && in_b));
                    }
                }
            }
        }
    }
}
