use std::collections::BTreeSet;

use crate::error::Error;
use crate::tree::{Node, TaggedShapeTree};
use crate::Result;

/// A batch of cone removals requested at a stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemovalBatch {
    pub stage: usize,
    pub cones: Vec<Node>,
}

/// A refined removal schedule: one removal event per stage, each event
/// deleting the full cone below its string from every later stage tree.
///
/// The schedule carries the limit tree (`baseline`) as a desk-scale
/// promise so harnesses can compute exact answers; queries may also run
/// oracle-free, modeling genuine co-c.e. behavior.
#[derive(Debug, Clone)]
pub struct RemovalSchedule {
    events: Vec<(usize, Node)>, // strictly increasing stages
    event_stage: std::collections::BTreeMap<Node, usize>,
    baseline: TaggedShapeTree,
    window: usize,
}

/// Three-valued membership verdict for the limit tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    In,
    Out,
    Pending,
}

impl RemovalSchedule {
    /// Refine coarse batches into single-string events.
    ///
    /// Each batched cone expands into all of its strings within the
    /// depth window, shorter strings first, then lexicographic; events
    /// from different batches interleave in batch order. A string is
    /// never scheduled before stage `len + 1` (it must have entered the
    /// stage tree before it can leave), and never twice.
    pub fn refine(
        batches: &[RemovalBatch],
        baseline: TaggedShapeTree,
        window: usize,
    ) -> Result<Self> {
        let mut requested: Vec<(usize, Node)> = Vec::new();
        for batch in batches {
            let mut strings: Vec<Node> = Vec::new();
            for cone in &batch.cones {
                if cone.is_root() {
                    return Err(Error::Schedule("cannot remove the root cone".into()));
                }
                if baseline.member(cone) {
                    return Err(Error::Schedule(format!(
                        "cone {cone} is promised by the baseline and cannot be removed"
                    )));
                }
                for len in cone.len()..=window {
                    for ext in extensions_at(cone, len) {
                        strings.push(ext);
                    }
                }
            }
            strings.sort_by(|a, b| (a.len(), a.bits()).cmp(&(b.len(), b.bits())));
            for s in strings {
                requested.push((batch.stage, s));
            }
        }
        let mut seen: BTreeSet<Node> = BTreeSet::new();
        let mut events = Vec::new();
        let mut event_stage = std::collections::BTreeMap::new();
        let mut next_stage = 0usize;
        for (want, s) in requested {
            if !seen.insert(s.clone()) {
                continue; // overlapping cones are handled once
            }
            let stage = want.max(next_stage).max(s.len() + 1);
            event_stage.insert(s.clone(), stage);
            events.push((stage, s));
            next_stage = stage + 1;
        }
        Ok(RemovalSchedule {
            events,
            event_stage,
            baseline,
            window,
        })
    }

    /// Derive the schedule that carves the baseline out of the full
    /// binary tree: one batch (at stage 0) per complement cone root.
    pub fn from_tree(baseline: &TaggedShapeTree, window: usize) -> Result<Self> {
        let cones = baseline.complement_cone_roots(window);
        let batches = if cones.is_empty() {
            Vec::new()
        } else {
            vec![RemovalBatch { stage: 0, cones }]
        };
        Self::refine(&batches, baseline.clone(), window)
    }

    pub fn baseline(&self) -> &TaggedShapeTree {
        &self.baseline
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn events(&self) -> &[(usize, Node)] {
        &self.events
    }

    /// The event applied when advancing to `stage`, if any.
    pub fn event_at(&self, stage: usize) -> Option<&Node> {
        self.events
            .iter()
            .find(|(s, _)| *s == stage)
            .map(|(_, n)| n)
    }

    pub fn last_event_stage(&self) -> usize {
        self.events.last().map(|(s, _)| *s).unwrap_or(0)
    }

    /// After this stage no removal happens and every level within the
    /// window is populated, so stage data no longer changes.
    pub fn stabilization_stage(&self) -> usize {
        self.last_event_stage().max(self.window) + 1
    }

    /// Has some event with stage <= `s` removed a prefix of `n`'s cone?
    pub fn removed_by(&self, n: &Node, s: usize) -> bool {
        (0..=n.len()).any(|k| {
            self.event_stage
                .get(&n.prefix(k))
                .is_some_and(|&t| t <= s)
        })
    }

    /// Is the padded path of `n` untouched by events up to stage `s`?
    pub fn zero_live_at(&self, n: &Node, s: usize) -> bool {
        if self.removed_by(n, s) {
            return false;
        }
        // zero-paddings of n within the window
        let mut pad = n.clone();
        while pad.len() < self.window {
            pad = pad.child(0);
            if self.event_stage.get(&pad).is_some_and(|&t| t <= s) {
                return false;
            }
        }
        true
    }
}

fn extensions_at(cone: &Node, len: usize) -> Vec<Node> {
    let mut out = vec![cone.clone()];
    for _ in cone.len()..len {
        out = out.into_iter().flat_map(|n| [n.child(0), n.child(1)]).collect();
    }
    out.retain(|n| n.len() == len);
    out
}

/// Stage-indexed finite approximations of the limit tree.
#[derive(Debug, Clone)]
pub struct StagewiseTree {
    schedule: RemovalSchedule,
}

impl StagewiseTree {
    pub fn new(schedule: RemovalSchedule) -> Self {
        StagewiseTree { schedule }
    }

    pub fn schedule(&self) -> &RemovalSchedule {
        &self.schedule
    }

    /// The finite tree at stage `s`: strings of length at most
    /// `min(s, window)` not yet removed. Prefix-closed, monotone in
    /// removed content, and every node has length at most `s`.
    pub fn tree_at_stage(&self, s: usize) -> Vec<Node> {
        let mut out = Vec::new();
        let mut level = vec![Node::root()];
        let max_len = s.min(self.schedule.window);
        for len in 0..=max_len {
            for n in &level {
                out.push(n.clone());
            }
            if len == max_len {
                break;
            }
            level = level
                .iter()
                .flat_map(|n| [n.child(0), n.child(1)])
                .filter(|n| !self.schedule.removed_by(n, s))
                .collect();
        }
        out
    }

    /// Alive strings of exactly length `len` at stage `s`.
    pub fn level_at_stage(&self, len: usize, s: usize) -> Vec<Node> {
        if len > s.min(self.schedule.window) {
            return Vec::new();
        }
        let mut level = vec![Node::root()];
        for _ in 0..len {
            level = level
                .into_iter()
                .flat_map(|n| [n.child(0), n.child(1)])
                .filter(|n| !self.schedule.removed_by(n, s))
                .collect();
        }
        level
    }

    /// Deepest populated level of the stage tree.
    pub fn max_level(&self, s: usize) -> usize {
        s.min(self.schedule.window)
    }

    /// Limit membership with an enumeration budget.
    ///
    /// `Out` as soon as the string's cone is removed within the budget;
    /// `In` only by consulting the baseline promise (exact mode);
    /// `Pending` otherwise.
    pub fn member_at_limit(&self, s: &Node, budget: usize, consult_baseline: bool) -> Membership {
        if self.schedule.removed_by(s, budget) {
            return Membership::Out;
        }
        if consult_baseline && self.schedule.baseline.member(s) {
            return Membership::In;
        }
        Membership::Pending
    }
}

/// Parse the schedule text format: `remove <bits> at <stage>` lines plus
/// an embedded baseline tree block in the tree format.
pub fn parse_schedule(text: &str, window: usize) -> Result<RemovalSchedule> {
    let mut tree_lines = String::new();
    let mut batches: Vec<RemovalBatch> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with("remove ") {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: &str| Error::Parse {
                line: idx + 1,
                msg: msg.into(),
            };
            if parts.len() != 4 || parts[2] != "at" {
                return Err(err("expected `remove <bits> at <stage>`"));
            }
            let cone = Node::parse(parts[1]).map_err(|e| Error::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
            let stage: usize = parts[3]
                .parse()
                .map_err(|_| err("stage must be a natural number"))?;
            batches.push(RemovalBatch {
                stage,
                cones: vec![cone],
            });
        } else {
            tree_lines.push_str(line);
            tree_lines.push('\n');
        }
    }
    let baseline = TaggedShapeTree::parse(&tree_lines)?;
    batches.sort_by_key(|b| b.stage);
    RemovalSchedule::refine(&batches, baseline, window)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Node {
        Node::parse(s).unwrap()
    }

    fn one_removal(window: usize) -> RemovalSchedule {
        // baseline: everything on the 0 side plus the root
        let baseline = TaggedShapeTree::parse("node -\nleaf 0 cantor\n").unwrap();
        RemovalSchedule::refine(
            &[RemovalBatch {
                stage: 3,
                cones: vec![n("1")],
            }],
            baseline,
            window,
        )
        .unwrap()
    }

    #[test]
    fn empty_batches_give_full_levels() {
        let s = RemovalSchedule::refine(&[], TaggedShapeTree::cantor(2), 4).unwrap();
        assert!(s.events().is_empty());
        let st = StagewiseTree::new(s);
        assert_eq!(st.tree_at_stage(0), vec![Node::root()]);
        assert_eq!(st.tree_at_stage(2).len(), 7);
    }

    #[test]
    fn refine_expands_cone_shortest_first() {
        let s = one_removal(3);
        let labels: Vec<(usize, String)> = s
            .events()
            .iter()
            .map(|(st, e)| (*st, e.label()))
            .collect();
        assert_eq!(
            labels,
            vec![
                (3, "1".into()),
                (4, "10".into()),
                (5, "11".into()),
                (6, "100".into()),
                (7, "101".into()),
                (8, "110".into()),
                (9, "111".into()),
            ]
        );
    }

    #[test]
    fn refine_interleaves_disjoint_cones_by_length_then_lex() {
        let baseline =
            TaggedShapeTree::parse("node -\nnode 0\nleaf 00 cantor\nnode 1\nleaf 11 cantor\n")
                .unwrap();
        let s = RemovalSchedule::refine(
            &[RemovalBatch {
                stage: 3,
                cones: vec![n("10"), n("01")],
            }],
            baseline,
            3,
        )
        .unwrap();
        let labels: Vec<String> = s.events().iter().map(|(_, e)| e.label()).collect();
        assert_eq!(labels, ["01", "10", "010", "011", "100", "101"]);
    }

    #[test]
    fn refine_rejects_readding_and_root() {
        let baseline = TaggedShapeTree::cantor(1);
        assert!(RemovalSchedule::refine(
            &[RemovalBatch {
                stage: 0,
                cones: vec![n("0")],
            }],
            baseline.clone(),
            3,
        )
        .is_err());
        assert!(RemovalSchedule::refine(
            &[RemovalBatch {
                stage: 0,
                cones: vec![Node::root()],
            }],
            baseline,
            3,
        )
        .is_err());
    }

    #[test]
    fn events_never_precede_entry() {
        let baseline = TaggedShapeTree::parse("node -\nleaf 1 cantor\n").unwrap();
        let s = RemovalSchedule::refine(
            &[RemovalBatch {
                stage: 0,
                cones: vec![n("0")],
            }],
            baseline,
            2,
        )
        .unwrap();
        for (stage, e) in s.events() {
            assert!(*stage >= e.len() + 1, "{e} scheduled at {stage}");
        }
    }

    #[test]
    fn tree_at_stage_applies_cones() {
        let st = StagewiseTree::new(one_removal(4));
        // by stage 4 the cone below 1 is gone; 0-side fills level 4
        let t4 = st.tree_at_stage(4);
        assert!(t4.iter().all(|x| x.is_root() || x.bit(0) == 0));
        assert_eq!(t4.len(), 1 + 1 + 2 + 4 + 8);
        // stage 2: removal not yet applied
        let t2 = st.tree_at_stage(2);
        assert!(t2.contains(&n("1")));
        assert_eq!(t2.len(), 7);
    }

    #[test]
    fn stage_trees_are_prefix_closed_and_monotone_in_removals() {
        let st = StagewiseTree::new(one_removal(4));
        let mut prev_removed: BTreeSet<Node> = BTreeSet::new();
        for s in 0..=st.schedule().stabilization_stage() {
            let tree: BTreeSet<Node> = st.tree_at_stage(s).into_iter().collect();
            for node in &tree {
                if let Some(p) = node.parent() {
                    assert!(tree.contains(&p), "stage {s} not prefix closed at {node}");
                }
            }
            let removed: BTreeSet<Node> = Node::all_of_len(4)
                .into_iter()
                .chain(Node::all_of_len(3))
                .chain(Node::all_of_len(2))
                .chain(Node::all_of_len(1))
                .filter(|x| st.schedule().removed_by(x, s))
                .collect();
            assert!(removed.is_superset(&prev_removed));
            prev_removed = removed;
        }
    }

    #[test]
    fn membership_verdicts() {
        let st = StagewiseTree::new(one_removal(4));
        assert_eq!(st.member_at_limit(&n("1"), 5, false), Membership::Out);
        assert_eq!(st.member_at_limit(&n("0"), 1, true), Membership::In);
        // a removal whose event lands after the budget stays pending
        let baseline = TaggedShapeTree::parse("node -\nnode 0\nleaf 00 cantor\n").unwrap();
        let late = RemovalSchedule::refine(
            &[
                RemovalBatch {
                    stage: 2,
                    cones: vec![n("1")],
                },
                RemovalBatch {
                    stage: 9,
                    cones: vec![n("01")],
                },
            ],
            baseline,
            3,
        )
        .unwrap();
        let st2 = StagewiseTree::new(late);
        assert_eq!(st2.member_at_limit(&n("01"), 5, false), Membership::Pending);
        assert_eq!(st2.member_at_limit(&n("01"), 9, false), Membership::Out);
        // exact mode, not removed within budget, outside the baseline
        assert_eq!(st2.member_at_limit(&n("01"), 5, true), Membership::Pending);
    }

    #[test]
    fn schedule_from_tree_round_trip() {
        let tree = TaggedShapeTree::spine(2);
        let s = RemovalSchedule::from_tree(&tree, 4).unwrap();
        let st = StagewiseTree::new(s);
        let stab = st.schedule().stabilization_stage();
        for len in 0..=4 {
            for x in Node::all_of_len(len) {
                let alive = !st.schedule().removed_by(&x, stab);
                assert_eq!(alive, tree.member(&x), "string {x}");
            }
        }
    }

    #[test]
    fn parse_schedule_text() {
        let text = "# one removal\nremove 1 at 3\nnode -\nleaf 0 cantor\n";
        let s = parse_schedule(text, 3).unwrap();
        assert_eq!(s.events().len(), 7);
        assert_eq!(s.baseline().leaf_count(), 1);
    }
}
