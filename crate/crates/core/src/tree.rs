//! Finite two-player zero-sum extensive-form games with chance nodes and
//! perfect recall, fully materialized in memory.
//!
//! Nodes live in a flat vector and refer to each other by index. Information
//! sets are numbered densely per player (`0..num_infosets(player)`) and carry a
//! human-readable label plus the labels of their legal actions.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::game::{MatrixGame, MixedStrategy, Player};
use crate::scalar::{from_usize, is_distribution, Scalar};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChanceOutcome<T> {
    pub prob: T,
    pub child: NodeId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node<T> {
    Decision {
        player: Player,
        infoset: usize,
        /// One child per legal action of the infoset, in action order.
        children: Vec<NodeId>,
    },
    Chance {
        outcomes: Vec<ChanceOutcome<T>>,
    },
    Terminal {
        /// Payoff to player one; player two receives the negation.
        payoff: T,
    },
}

/// An information set: the decision nodes a player cannot tell apart.
#[derive(Clone, Debug, PartialEq)]
pub struct Infoset {
    pub label: String,
    pub actions: Vec<String>,
    pub nodes: Vec<NodeId>,
    /// Number of the owner's own decisions before reaching this infoset.
    pub depth: usize,
    /// The owner's last (infoset, action) before this infoset, if any. Unique
    /// under perfect recall.
    pub parent: Option<(usize, usize)>,
}

impl Infoset {
    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "TreeDoc<T>", try_from = "TreeDoc<T>", bound = "T: Scalar")]
pub struct GameTree<T> {
    nodes: Vec<Node<T>>,
    root: NodeId,
    infosets: [Vec<Infoset>; 2],
    /// Root-first order: every node appears after its parent.
    preorder: Vec<NodeId>,
    /// For each player, infoset ids sorted by `depth` ascending.
    by_depth: [Vec<usize>; 2],
    /// For each player and infoset, the child infosets reached by each action.
    successors: [Vec<Vec<Vec<usize>>>; 2],
}

impl<T: Scalar> GameTree<T> {
    /// Validates and indexes a raw node list. `infosets[p]` lists, for player
    /// `p`, each infoset's `(label, action labels, member nodes)`.
    pub fn from_parts(
        nodes: Vec<Node<T>>,
        root: NodeId,
        infosets: [Vec<(String, Vec<String>, Vec<NodeId>)>; 2],
    ) -> Result<Self> {
        let n = nodes.len();
        if root >= n {
            return Err(Error::Tree(format!("root {root} out of range ({n} nodes)")));
        }

        let mut parent: Vec<Option<NodeId>> = vec![None; n];
        for (id, node) in nodes.iter().enumerate() {
            let children: Vec<NodeId> = match node {
                Node::Decision { children, .. } => children.clone(),
                Node::Chance { outcomes } => outcomes.iter().map(|o| o.child).collect(),
                Node::Terminal { payoff } => {
                    if !payoff.is_finite() {
                        return Err(Error::Tree(format!("node {id}: non-finite payoff")));
                    }
                    Vec::new()
                }
            };
            if !matches!(node, Node::Terminal { .. }) && children.is_empty() {
                return Err(Error::Tree(format!("node {id}: non-terminal without children")));
            }
            for c in children {
                if c >= n {
                    return Err(Error::Tree(format!("node {id}: child {c} out of range")));
                }
                if c == root || parent[c].is_some() {
                    return Err(Error::Tree(format!("node {c} has more than one parent")));
                }
                parent[c] = Some(id);
            }
            if let Node::Chance { outcomes } = node {
                let probs: Vec<T> = outcomes.iter().map(|o| o.prob).collect();
                if !is_distribution(&probs, T::slack(1e-9)) {
                    return Err(Error::Tree(format!("node {id}: chance probabilities {probs:?}")));
                }
            }
        }

        // Root-first traversal; reaching every node proves the graph is one tree.
        let mut preorder = Vec::with_capacity(n);
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            preorder.push(id);
            match &nodes[id] {
                Node::Decision { children, .. } => stack.extend(children.iter().rev()),
                Node::Chance { outcomes } => stack.extend(outcomes.iter().rev().map(|o| o.child)),
                Node::Terminal { .. } => {}
            }
        }
        if preorder.len() != n {
            return Err(Error::Tree(format!(
                "{} of {n} nodes are unreachable from the root",
                n - preorder.len()
            )));
        }

        let mut tables: [Vec<Infoset>; 2] = [Vec::new(), Vec::new()];
        for p in Player::BOTH {
            for (id, (label, actions, members)) in infosets[p.index()].iter().enumerate() {
                if actions.is_empty() {
                    return Err(Error::Tree(format!("infoset {label}: no actions")));
                }
                if members.is_empty() {
                    return Err(Error::Tree(format!("infoset {label}: no member nodes")));
                }
                for &m in members {
                    match nodes.get(m) {
                        Some(Node::Decision { player, infoset, children })
                            if *player == p && *infoset == id =>
                        {
                            if children.len() != actions.len() {
                                return Err(Error::Tree(format!(
                                    "node {m}: {} children but infoset {label} has {} actions",
                                    children.len(),
                                    actions.len()
                                )));
                            }
                        }
                        _ => {
                            return Err(Error::Tree(format!(
                                "infoset {label} lists node {m}, which is not its decision node"
                            )))
                        }
                    }
                }
                tables[p.index()].push(Infoset {
                    label: label.clone(),
                    actions: actions.clone(),
                    nodes: members.clone(),
                    depth: 0,
                    parent: None,
                });
            }
        }
        // Every decision node must be listed exactly once.
        let mut listed = vec![0usize; n];
        for table in &tables {
            for s in table {
                for &m in &s.nodes {
                    listed[m] += 1;
                }
            }
        }
        for (id, node) in nodes.iter().enumerate() {
            let expected = usize::from(matches!(node, Node::Decision { .. }));
            if listed[id] != expected {
                return Err(Error::Tree(format!("node {id} listed {} times in infoset tables", listed[id])));
            }
        }

        // Perfect recall: all members of an infoset share the owner's action history.
        let mut seq: Vec<[Vec<(usize, usize)>; 2]> = vec![[Vec::new(), Vec::new()]; n];
        let mut seen: [Vec<Option<Vec<(usize, usize)>>>; 2] =
            [vec![None; tables[0].len()], vec![None; tables[1].len()]];
        for &id in &preorder {
            let here = seq[id].clone();
            match &nodes[id] {
                Node::Decision { player, infoset, children } => {
                    let p = player.index();
                    match &seen[p][*infoset] {
                        None => seen[p][*infoset] = Some(here[p].clone()),
                        Some(prev) if *prev != here[p] => {
                            return Err(Error::Tree(format!(
                                "perfect recall violated at infoset {}",
                                tables[p][*infoset].label
                            )))
                        }
                        Some(_) => {}
                    }
                    for (a, &c) in children.iter().enumerate() {
                        let mut next = here.clone();
                        next[p].push((*infoset, a));
                        seq[c] = next;
                    }
                }
                Node::Chance { outcomes } => {
                    for o in outcomes {
                        seq[o.child] = here.clone();
                    }
                }
                Node::Terminal { .. } => {}
            }
        }
        let mut successors: [Vec<Vec<Vec<usize>>>; 2] = [Vec::new(), Vec::new()];
        let mut by_depth: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for p in 0..2 {
            successors[p] = tables[p].iter().map(|s| vec![Vec::new(); s.num_actions()]).collect();
            for id in 0..tables[p].len() {
                let history = seen[p][id].as_ref().expect("every infoset has a member");
                tables[p][id].depth = history.len();
                tables[p][id].parent = history.last().copied();
                if let Some((ps, pa)) = history.last() {
                    successors[p][*ps][*pa].push(id);
                }
            }
            let mut order: Vec<usize> = (0..tables[p].len()).collect();
            order.sort_by_key(|&s| (tables[p][s].depth, s));
            by_depth[p] = order;
        }

        Ok(Self { nodes, root, infosets: tables, preorder, by_depth, successors })
    }

    /// Wraps a matrix game as a two-move tree. The column player's single
    /// infoset hides the row choice.
    pub fn from_matrix(game: &MatrixGame<T>) -> Result<Self> {
        let mut b = TreeBuilder::new();
        let row_actions: Vec<String> = (0..game.rows()).map(|r| format!("r{r}")).collect();
        let col_actions: Vec<String> = (0..game.cols()).map(|c| format!("c{c}")).collect();
        let mut row_children = Vec::with_capacity(game.rows());
        for r in 0..game.rows() {
            let leaves: Vec<NodeId> = (0..game.cols()).map(|c| b.terminal(game.get(r, c))).collect();
            row_children.push(b.decision(Player::Two, "col", &col_actions, leaves)?);
        }
        let root = b.decision(Player::One, "row", &row_actions, row_children)?;
        b.build(root)
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node<T> {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn preorder(&self) -> &[NodeId] {
        &self.preorder
    }

    pub fn num_infosets(&self, player: Player) -> usize {
        self.infosets[player.index()].len()
    }

    pub fn infoset(&self, player: Player, id: usize) -> &Infoset {
        &self.infosets[player.index()][id]
    }

    pub fn infosets(&self, player: Player) -> &[Infoset] {
        &self.infosets[player.index()]
    }

    /// Infoset ids of `player` ordered so that every infoset comes after the
    /// infoset-action it follows.
    pub fn infosets_by_depth(&self, player: Player) -> &[usize] {
        &self.by_depth[player.index()]
    }

    /// Infosets of `player` whose previous own decision was `(infoset, action)`.
    pub fn successors(&self, player: Player, infoset: usize, action: usize) -> &[usize] {
        &self.successors[player.index()][infoset][action]
    }

    /// Infosets of `player` reached before any decision of theirs.
    pub fn initial_infosets(&self, player: Player) -> Vec<usize> {
        let table = &self.infosets[player.index()];
        (0..table.len()).filter(|&s| table[s].parent.is_none()).collect()
    }

    pub fn terminal_payoffs(&self) -> impl Iterator<Item = T> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Terminal { payoff } => Some(*payoff),
            _ => None,
        })
    }

    /// `(min, max)` payoff that `player` can receive at a terminal.
    pub fn payoff_bounds(&self, player: Player) -> (T, T) {
        let (lo, hi) = self
            .terminal_payoffs()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)));
        match player {
            Player::One => (lo, hi),
            Player::Two => (-hi, -lo),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Incremental constructor. Children are created before their parents;
/// infosets are interned by `(player, label)`.
pub struct TreeBuilder<T> {
    nodes: Vec<Node<T>>,
    infosets: [Vec<(String, Vec<String>, Vec<NodeId>)>; 2],
    index: [HashMap<String, usize>; 2],
}

impl<T: Scalar> Default for TreeBuilder<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> TreeBuilder<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), infosets: [Vec::new(), Vec::new()], index: [HashMap::new(), HashMap::new()] }
    }

    pub fn terminal(&mut self, payoff: T) -> NodeId {
        self.nodes.push(Node::Terminal { payoff });
        self.nodes.len() - 1
    }

    pub fn chance(&mut self, outcomes: Vec<(T, NodeId)>) -> NodeId {
        let outcomes = outcomes.into_iter().map(|(prob, child)| ChanceOutcome { prob, child }).collect();
        self.nodes.push(Node::Chance { outcomes });
        self.nodes.len() - 1
    }

    pub fn decision<S: AsRef<str>>(
        &mut self,
        player: Player,
        label: &str,
        actions: &[S],
        children: Vec<NodeId>,
    ) -> Result<NodeId> {
        let actions: Vec<String> = actions.iter().map(|a| a.as_ref().to_owned()).collect();
        let p = player.index();
        let id = match self.index[p].get(label) {
            Some(&id) => {
                if self.infosets[p][id].1 != actions {
                    return Err(Error::Tree(format!("infoset {label}: inconsistent action sets")));
                }
                id
            }
            None => {
                self.infosets[p].push((label.to_owned(), actions, Vec::new()));
                self.index[p].insert(label.to_owned(), self.infosets[p].len() - 1);
                self.infosets[p].len() - 1
            }
        };
        let node = self.nodes.len();
        self.infosets[p][id].2.push(node);
        self.nodes.push(Node::Decision { player, infoset: id, children });
        Ok(node)
    }

    pub fn build(self, root: NodeId) -> Result<GameTree<T>> {
        GameTree::from_parts(self.nodes, root, self.infosets)
    }
}

// ---------------------------------------------------------------------------
// JSON document

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InfosetDoc {
    id: usize,
    label: String,
    actions: Vec<String>,
    nodes: Vec<NodeId>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum NodeDoc<T> {
    Decision { id: NodeId, player: Player, infoset: usize, children: Vec<NodeId> },
    Chance { id: NodeId, outcomes: Vec<ChanceOutcome<T>> },
    Terminal { id: NodeId, payoff: T },
}

impl<T> NodeDoc<T> {
    fn new(id: NodeId, node: Node<T>) -> Self {
        match node {
            Node::Decision { player, infoset, children } => NodeDoc::Decision { id, player, infoset, children },
            Node::Chance { outcomes } => NodeDoc::Chance { id, outcomes },
            Node::Terminal { payoff } => NodeDoc::Terminal { id, payoff },
        }
    }

    fn split(self) -> (NodeId, Node<T>) {
        match self {
            NodeDoc::Decision { id, player, infoset, children } => (id, Node::Decision { player, infoset, children }),
            NodeDoc::Chance { id, outcomes } => (id, Node::Chance { outcomes }),
            NodeDoc::Terminal { id, payoff } => (id, Node::Terminal { payoff }),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InfosetTables {
    player1: Vec<InfosetDoc>,
    player2: Vec<InfosetDoc>,
}

pub const TREE_FORMAT: &str = "psro-game-tree/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc<T> {
    format: String,
    root: NodeId,
    nodes: Vec<NodeDoc<T>>,
    infosets: InfosetTables,
}

impl<T: Scalar> From<GameTree<T>> for TreeDoc<T> {
    fn from(tree: GameTree<T>) -> Self {
        let table = |p: Player| {
            tree.infosets(p)
                .iter()
                .enumerate()
                .map(|(id, s)| InfosetDoc {
                    id,
                    label: s.label.clone(),
                    actions: s.actions.clone(),
                    nodes: s.nodes.clone(),
                })
                .collect()
        };
        TreeDoc {
            format: TREE_FORMAT.to_owned(),
            root: tree.root,
            infosets: InfosetTables { player1: table(Player::One), player2: table(Player::Two) },
            nodes: tree.nodes.iter().cloned().enumerate().map(|(id, node)| NodeDoc::new(id, node)).collect(),
        }
    }
}

impl<T: Scalar> TryFrom<TreeDoc<T>> for GameTree<T> {
    type Error = Error;
    fn try_from(doc: TreeDoc<T>) -> Result<Self> {
        if doc.format != TREE_FORMAT {
            return Err(Error::Tree(format!("unsupported format {:?}", doc.format)));
        }
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for (i, nd) in doc.nodes.into_iter().enumerate() {
            let (id, node) = nd.split();
            if id != i {
                return Err(Error::Tree(format!("node at position {i} has id {id}")));
            }
            nodes.push(node);
        }
        let table = |docs: Vec<InfosetDoc>| -> Result<Vec<(String, Vec<String>, Vec<NodeId>)>> {
            docs.into_iter()
                .enumerate()
                .map(|(i, s)| {
                    if s.id != i {
                        return Err(Error::Tree(format!("infoset at position {i} has id {}", s.id)));
                    }
                    Ok((s.label, s.actions, s.nodes))
                })
                .collect()
        };
        let infosets = [table(doc.infosets.player1)?, table(doc.infosets.player2)?];
        GameTree::from_parts(nodes, doc.root, infosets)
    }
}

// ---------------------------------------------------------------------------
// Policies

/// Per-infoset action distributions for one player. An empty entry means the
/// policy does not define that infoset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorPolicy<T> {
    owner: Player,
    probs: Vec<Vec<T>>,
}

impl<T: Scalar> BehaviorPolicy<T> {
    /// Checks every non-empty entry against the owner's infosets in `game`.
    pub fn new(game: &GameTree<T>, owner: Player, probs: Vec<Vec<T>>) -> Result<Self> {
        if probs.len() != game.num_infosets(owner) {
            return Err(Error::Dimension { expected: game.num_infosets(owner), got: probs.len() });
        }
        for (s, p) in probs.iter().enumerate() {
            if p.is_empty() {
                continue;
            }
            let k = game.infoset(owner, s).num_actions();
            if p.len() != k {
                return Err(Error::Dimension { expected: k, got: p.len() });
            }
            if !is_distribution(p, T::slack(1e-12)) {
                return arg(format!("infoset {s}: not a probability vector {p:?}"));
            }
        }
        Ok(Self { owner, probs })
    }

    pub fn uniform(game: &GameTree<T>, owner: Player) -> Self {
        let probs = game
            .infosets(owner)
            .iter()
            .map(|s| vec![T::one() / from_usize::<T>(s.num_actions()); s.num_actions()])
            .collect();
        Self { owner, probs }
    }

    /// Pure policy choosing `actions[s]` at infoset `s`.
    pub fn deterministic(game: &GameTree<T>, owner: Player, actions: &[usize]) -> Result<Self> {
        if actions.len() != game.num_infosets(owner) {
            return Err(Error::Dimension { expected: game.num_infosets(owner), got: actions.len() });
        }
        let mut probs = Vec::with_capacity(actions.len());
        for (s, &a) in actions.iter().enumerate() {
            let k = game.infoset(owner, s).num_actions();
            if a >= k {
                return arg(format!("infoset {s}: action {a} out of range {k}"));
            }
            let mut p = vec![T::zero(); k];
            p[a] = T::one();
            probs.push(p);
        }
        Ok(Self { owner, probs })
    }

    pub fn owner(&self) -> Player {
        self.owner
    }

    pub fn num_infosets(&self) -> usize {
        self.probs.len()
    }

    pub fn action_probs(&self, infoset: usize) -> Option<&[T]> {
        self.probs.get(infoset).filter(|p| !p.is_empty()).map(Vec::as_slice)
    }

    fn probs_or_err(&self, game: &GameTree<T>, infoset: usize) -> Result<&[T]> {
        self.action_probs(infoset).ok_or_else(|| Error::PolicyDomain {
            infoset,
            label: game.infoset(self.owner, infoset).label.clone(),
        })
    }

    /// The chosen action at each infoset when the policy is pure everywhere.
    pub fn pure_actions(&self) -> Option<Vec<usize>> {
        self.probs
            .iter()
            .map(|p| {
                let a = p.iter().position(|x| *x == T::one())?;
                p.iter().enumerate().all(|(i, x)| i == a || *x == T::zero()).then_some(a)
            })
            .collect()
    }

    /// Product of the owner's own action probabilities on the way to each
    /// infoset (chance and opponent factors excluded). Errors if a prefix with
    /// positive reach has no entry.
    pub fn own_reach(&self, game: &GameTree<T>) -> Result<Vec<T>> {
        let mut reach = vec![T::zero(); self.probs.len()];
        for &s in game.infosets_by_depth(self.owner) {
            reach[s] = match game.infoset(self.owner, s).parent {
                None => T::one(),
                Some((ps, pa)) if reach[ps] > T::zero() => reach[ps] * self.probs_or_err(game, ps)?[pa],
                Some(_) => T::zero(),
            };
        }
        Ok(reach)
    }
}

fn check_owners<T: Scalar>(p1: &BehaviorPolicy<T>, p2: &BehaviorPolicy<T>) -> Result<()> {
    if p1.owner != Player::One || p2.owner != Player::Two {
        return arg("evaluate_tree expects (player-one policy, player-two policy)");
    }
    Ok(())
}

/// Exact expected payoff to player one. Branches reached with probability zero
/// are skipped, so policies only need entries where play can actually go.
pub fn evaluate_tree<T: Scalar>(
    game: &GameTree<T>,
    p1: &BehaviorPolicy<T>,
    p2: &BehaviorPolicy<T>,
) -> Result<T> {
    check_owners(p1, p2)?;
    let policies = [p1, p2];
    fn value<T: Scalar>(game: &GameTree<T>, pol: &[&BehaviorPolicy<T>; 2], id: NodeId) -> Result<T> {
        match game.node(id) {
            Node::Terminal { payoff } => Ok(*payoff),
            Node::Chance { outcomes } => {
                let mut v = T::zero();
                for o in outcomes {
                    if o.prob > T::zero() {
                        v += o.prob * value(game, pol, o.child)?;
                    }
                }
                Ok(v)
            }
            Node::Decision { player, infoset, children } => {
                let probs = pol[player.index()].probs_or_err(game, *infoset)?;
                let mut v = T::zero();
                for (p, &c) in probs.iter().zip(children) {
                    if *p > T::zero() {
                        v += *p * value(game, pol, c)?;
                    }
                }
                Ok(v)
            }
        }
    }
    value(game, &policies, game.root())
}

/// Samples one playout and returns player one's payoff.
pub fn sample_playout<T: Scalar, R: Rng + ?Sized>(
    game: &GameTree<T>,
    p1: &BehaviorPolicy<T>,
    p2: &BehaviorPolicy<T>,
    rng: &mut R,
) -> Result<T> {
    check_owners(p1, p2)?;
    let policies = [p1, p2];
    let mut id = game.root();
    loop {
        match game.node(id) {
            Node::Terminal { payoff } => return Ok(*payoff),
            Node::Chance { outcomes } => {
                let probs: Vec<T> = outcomes.iter().map(|o| o.prob).collect();
                id = outcomes[sample_index(&probs, rng)].child;
            }
            Node::Decision { player, infoset, children } => {
                let probs = policies[player.index()].probs_or_err(game, *infoset)?;
                id = children[sample_index(probs, rng)];
            }
        }
    }
}

/// Draws an index from a probability vector by inverse CDF on one uniform draw.
pub fn sample_index<T: Scalar, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> usize {
    let u = T::lit(rng.gen::<f64>());
    let mut acc = T::zero();
    for (i, p) in probs.iter().enumerate() {
        acc += *p;
        if u < acc {
            return i;
        }
    }
    // Round-off left u above the total: take the last positive entry.
    probs.iter().rposition(|p| *p > T::zero()).unwrap_or(probs.len() - 1)
}

/// Collapses a weighted population into one realization-equivalent behavior
/// policy: at each infoset the members' action distributions are averaged with
/// weight `w_k * own_reach_k(s)`. Infosets no member reaches get the uniform
/// distribution.
pub fn merge_population<T: Scalar>(
    game: &GameTree<T>,
    population: &[BehaviorPolicy<T>],
    weights: &MixedStrategy<T>,
) -> Result<BehaviorPolicy<T>> {
    let Some(first) = population.first() else {
        return arg("cannot merge an empty population");
    };
    if weights.len() != population.len() {
        return Err(Error::Dimension { expected: population.len(), got: weights.len() });
    }
    let owner = first.owner;
    if population.iter().any(|p| p.owner != owner) {
        return arg("population members belong to different players");
    }
    let n_sets = game.num_infosets(owner);
    let mut num: Vec<Vec<T>> =
        game.infosets(owner).iter().map(|s| vec![T::zero(); s.num_actions()]).collect();
    let mut den = vec![T::zero(); n_sets];
    for (policy, &w) in population.iter().zip(weights.weights()) {
        if w == T::zero() {
            continue;
        }
        let reach = policy.own_reach(game)?;
        for s in 0..n_sets {
            let r = w * reach[s];
            if r == T::zero() {
                continue;
            }
            den[s] += r;
            for (acc, p) in num[s].iter_mut().zip(policy.probs_or_err(game, s)?) {
                *acc += r * *p;
            }
        }
    }
    let probs = num
        .into_iter()
        .zip(den)
        .map(|(row, d)| {
            if d > T::zero() {
                row.into_iter().map(|x| x / d).collect()
            } else {
                vec![T::one() / from_usize::<T>(row.len()); row.len()]
            }
        })
        .collect();
    Ok(BehaviorPolicy { owner, probs })
}

/// Default cap on reduced pure-strategy enumeration.
pub const DEFAULT_STRATEGY_CAP: usize = 100_000;

/// Enumerates the reduced pure strategies of `player`: action choices only at
/// infosets that the player's own earlier choices leave reachable. Infosets cut
/// off by an earlier choice are filled with action 0 in the returned policies.
pub fn reduced_normal_form<T: Scalar>(
    game: &GameTree<T>,
    player: Player,
    cap: usize,
) -> Result<Vec<BehaviorPolicy<T>>> {
    fn count<T: Scalar>(game: &GameTree<T>, player: Player, sets: &[usize], cap: u128) -> u128 {
        let mut total: u128 = 1;
        for &s in sets {
            let options: u128 = (0..game.infoset(player, s).num_actions())
                .map(|a| count(game, player, game.successors(player, s, a), cap))
                .fold(0u128, |acc, x| acc.saturating_add(x).min(cap + 1));
            total = total.saturating_mul(options).min(cap + 1);
        }
        total
    }
    fn enumerate<T: Scalar>(game: &GameTree<T>, player: Player, sets: &[usize]) -> Vec<Vec<(usize, usize)>> {
        let mut partials: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
        for &s in sets {
            let mut options = Vec::new();
            for a in 0..game.infoset(player, s).num_actions() {
                for tail in enumerate(game, player, game.successors(player, s, a)) {
                    let mut choice = vec![(s, a)];
                    choice.extend(tail);
                    options.push(choice);
                }
            }
            partials = partials
                .iter()
                .flat_map(|prefix| {
                    options.iter().map(move |opt| {
                        let mut v = prefix.clone();
                        v.extend(opt.iter().copied());
                        v
                    })
                })
                .collect();
        }
        partials
    }

    let roots = game.initial_infosets(player);
    let n = count(game, player, &roots, cap as u128);
    if n > cap as u128 {
        return Err(Error::TooLarge { cap });
    }
    enumerate(game, player, &roots)
        .into_iter()
        .map(|assignment| {
            let mut actions = vec![0usize; game.num_infosets(player)];
            for (s, a) in assignment {
                actions[s] = a;
            }
            BehaviorPolicy::deterministic(game, player, &actions)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::evaluate_matrix;
    use crate::rng::{seeded, Purpose};
    use proptest::prelude::*;

    /// Player one picks L/R; after R, player two (who saw nothing) picks l/r;
    /// after L, chance flips a coin and player one picks again knowing the coin.
    fn small_tree() -> GameTree<f64> {
        let mut b = TreeBuilder::new();
        let t1 = b.terminal(1.0);
        let t2 = b.terminal(-1.0);
        let heads = b.decision(Player::One, "L/heads", &["x", "y"], vec![t1, t2]).unwrap();
        let t3 = b.terminal(2.0);
        let t4 = b.terminal(0.0);
        let tails = b.decision(Player::One, "L/tails", &["x", "y"], vec![t3, t4]).unwrap();
        let coin = b.chance(vec![(0.5, heads), (0.5, tails)]);
        let t5 = b.terminal(3.0);
        let t6 = b.terminal(-3.0);
        let p2 = b.decision(Player::Two, "R", &["l", "r"], vec![t5, t6]).unwrap();
        let root = b.decision(Player::One, "root", &["L", "R"], vec![coin, p2]).unwrap();
        b.build(root).unwrap()
    }

    #[test]
    fn builder_indexes_depth_and_parents() {
        let g = small_tree();
        assert_eq!(g.num_infosets(Player::One), 3);
        assert_eq!(g.num_infosets(Player::Two), 1);
        let heads = g.infosets(Player::One).iter().position(|s| s.label == "L/heads").unwrap();
        assert_eq!(g.infoset(Player::One, heads).depth, 1);
        assert_eq!(g.infoset(Player::One, heads).parent, Some((2, 0)));
        assert_eq!(g.payoff_bounds(Player::Two), (-3.0, 3.0));
    }

    #[test]
    fn deterministic_evaluation_follows_single_path_set() {
        let g = small_tree();
        let p1 = BehaviorPolicy::deterministic(&g, Player::One, &[0, 1, 0]).unwrap();
        let p2 = BehaviorPolicy::deterministic(&g, Player::Two, &[1]).unwrap();
        // L, then heads -> y (-1) and tails -> x (2), each with chance 1/2.
        assert_eq!(evaluate_tree(&g, &p1, &p2).unwrap(), 0.5);
    }

    #[test]
    fn missing_reachable_entry_is_a_domain_error() {
        let g = small_tree();
        let p1 = BehaviorPolicy::new(&g, Player::One, vec![vec![], vec![], vec![0.0, 1.0]]).unwrap();
        let p2 = BehaviorPolicy::uniform(&g, Player::Two);
        // Root says R; L/heads and L/tails are never reached.
        assert_eq!(evaluate_tree(&g, &p1, &p2).unwrap(), 0.0);
        let root_left = BehaviorPolicy::new(&g, Player::One, vec![vec![], vec![], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(evaluate_tree(&g, &root_left, &p2), Err(Error::PolicyDomain { .. })));
        assert!(evaluate_tree(&g, &p2, &p1).is_err());
    }

    #[test]
    fn rejects_malformed_trees() {
        // Shared child.
        let nodes = vec![
            Node::Terminal { payoff: 0.0 },
            Node::Chance { outcomes: vec![ChanceOutcome { prob: 0.5, child: 0 }, ChanceOutcome { prob: 0.5, child: 0 }] },
        ];
        assert!(GameTree::from_parts(nodes, 1, [vec![], vec![]]).is_err());
        // Probabilities not summing to one.
        let nodes = vec![
            Node::Terminal { payoff: 0.0 },
            Node::Chance { outcomes: vec![ChanceOutcome { prob: 0.7, child: 0 }] },
        ];
        assert!(GameTree::from_parts(nodes, 1, [vec![], vec![]]).is_err());
        // Unreachable node.
        let nodes = vec![Node::Terminal { payoff: 0.0 }, Node::Terminal { payoff: 1.0 }];
        assert!(GameTree::<f64>::from_parts(nodes, 0, [vec![], vec![]]).is_err());
        // Inconsistent action sets within one infoset.
        let mut b = TreeBuilder::<f64>::new();
        let t = b.terminal(0.0);
        b.decision(Player::One, "s", &["a"], vec![t]).unwrap();
        let t2 = b.terminal(0.0);
        let t3 = b.terminal(0.0);
        assert!(b.decision(Player::One, "s", &["a", "b"], vec![t2, t3]).is_err());
    }

    #[test]
    fn rejects_imperfect_recall() {
        // Player one forgets their own first move.
        let mut b = TreeBuilder::<f64>::new();
        let leaves: Vec<NodeId> = (0..4).map(|i| b.terminal(i as f64)).collect();
        let a = b.decision(Player::One, "forgot", &["x", "y"], vec![leaves[0], leaves[1]]).unwrap();
        let c = b.decision(Player::One, "forgot", &["x", "y"], vec![leaves[2], leaves[3]]).unwrap();
        let root = b.decision(Player::One, "root", &["L", "R"], vec![a, c]).unwrap();
        assert!(matches!(b.build(root), Err(Error::Tree(msg)) if msg.contains("perfect recall")));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let g = small_tree();
        let text = g.to_json().unwrap();
        assert_eq!(GameTree::<f64>::from_json(&text).unwrap(), g);
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["nodes"][0]["id"] = serde_json::json!(5);
        assert!(GameTree::<f64>::from_json(&doc.to_string()).is_err());
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["surprise"] = serde_json::json!(1);
        assert!(GameTree::<f64>::from_json(&doc.to_string()).is_err());
    }

    #[test]
    fn json_golden_for_matrix_wrapper() {
        let m = MatrixGame::new(vec![vec![1.0, -1.0]]).unwrap();
        let g = GameTree::from_matrix(&m).unwrap();
        let v: serde_json::Value = serde_json::from_str(&g.to_json().unwrap()).unwrap();
        let expected = serde_json::json!({
            "format": "psro-game-tree/1",
            "root": 3,
            "nodes": [
                {"id": 0, "kind": "terminal", "payoff": 1.0},
                {"id": 1, "kind": "terminal", "payoff": -1.0},
                {"id": 2, "kind": "decision", "player": 2, "infoset": 0, "children": [0, 1]},
                {"id": 3, "kind": "decision", "player": 1, "infoset": 0, "children": [2]}
            ],
            "infosets": {
                "player1": [{"id": 0, "label": "row", "actions": ["r0"], "nodes": [3]}],
                "player2": [{"id": 0, "label": "col", "actions": ["c0", "c1"], "nodes": [2]}]
            }
        });
        assert_eq!(v, expected);
    }

    #[test]
    fn merge_with_degenerate_weights_reproduces_member() {
        let g = small_tree();
        let a = BehaviorPolicy::deterministic(&g, Player::One, &[1, 0, 0]).unwrap();
        let b = BehaviorPolicy::deterministic(&g, Player::One, &[0, 1, 1]).unwrap();
        let merged = merge_population(&g, &[a.clone(), b], &MixedStrategy::pure(2, 0)).unwrap();
        let reach = a.own_reach(&g).unwrap();
        for s in 0..3 {
            if reach[s] > 0.0 {
                assert_eq!(merged.action_probs(s), a.action_probs(s));
            }
        }
    }

    #[test]
    fn merge_root_split() {
        let g = small_tree();
        let a = BehaviorPolicy::deterministic(&g, Player::One, &[0, 0, 0]).unwrap();
        let b = BehaviorPolicy::deterministic(&g, Player::One, &[0, 0, 1]).unwrap();
        let merged = merge_population(&g, &[a, b], &MixedStrategy::uniform(2)).unwrap();
        let root = g.infosets(Player::One).iter().position(|s| s.label == "root").unwrap();
        assert_eq!(merged.action_probs(root).unwrap(), &[0.5, 0.5]);
        // L/heads is reached only by `a`, so it keeps a's choice exactly.
        let heads = g.infosets(Player::One).iter().position(|s| s.label == "L/heads").unwrap();
        assert_eq!(merged.action_probs(heads).unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn merge_rejects_mixed_owners() {
        let g = small_tree();
        let a = BehaviorPolicy::uniform(&g, Player::One);
        let b = BehaviorPolicy::uniform(&g, Player::Two);
        assert!(merge_population(&g, &[a, b], &MixedStrategy::uniform(2)).is_err());
    }

    #[test]
    fn reduced_normal_form_counts() {
        let g = small_tree();
        // root: R (1) or L with 2x2 choices at heads/tails (4).
        assert_eq!(reduced_normal_form(&g, Player::One, 100).unwrap().len(), 5);
        assert_eq!(reduced_normal_form(&g, Player::Two, 100).unwrap().len(), 2);
        assert!(matches!(reduced_normal_form(&g, Player::One, 4), Err(Error::TooLarge { cap: 4 })));

        let m = MatrixGame::new(vec![vec![0.0, 1.0, 2.0]]).unwrap();
        let single = GameTree::from_matrix(&m).unwrap();
        assert_eq!(reduced_normal_form(&single, Player::Two, 10).unwrap().len(), 3);
    }

    #[test]
    fn sampling_matches_exact_value() {
        let g = small_tree();
        let p1 = BehaviorPolicy::uniform(&g, Player::One);
        let p2 = BehaviorPolicy::uniform(&g, Player::Two);
        let exact = evaluate_tree(&g, &p1, &p2).unwrap();
        let mut rng = seeded(3, Purpose::Testing);
        let n = 200_000;
        let samples: Vec<f64> = (0..n).map(|_| sample_playout(&g, &p1, &p2, &mut rng).unwrap()).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - exact).abs() < 3.0 * (var / n as f64).sqrt());
    }

    fn random_policy(g: &GameTree<f64>, owner: Player, raw: &[f64]) -> BehaviorPolicy<f64> {
        let mut it = raw.iter().cycle();
        let probs = g
            .infosets(owner)
            .iter()
            .map(|s| {
                let w: Vec<f64> = (0..s.num_actions()).map(|_| *it.next().unwrap()).collect();
                let t: f64 = w.iter().sum();
                w.into_iter().map(|x| x / t).collect()
            })
            .collect();
        BehaviorPolicy::new(g, owner, probs).unwrap()
    }

    proptest! {
        #[test]
        fn tree_wrapper_matches_matrix_evaluation(
            rows in proptest::collection::vec(proptest::collection::vec(-5.0..5.0f64, 3), 1..5),
            xr in proptest::collection::vec(0.01..1.0f64, 4),
            yr in proptest::collection::vec(0.01..1.0f64, 3),
        ) {
            let m = MatrixGame::new(rows.clone()).unwrap();
            let g = GameTree::from_matrix(&m).unwrap();
            let p1 = random_policy(&g, Player::One, &xr[..rows.len()]);
            let p2 = random_policy(&g, Player::Two, &yr);
            let x = MixedStrategy::new(p1.action_probs(0).unwrap().to_vec()).unwrap();
            let y = MixedStrategy::new(p2.action_probs(0).unwrap().to_vec()).unwrap();
            let a = evaluate_tree(&g, &p1, &p2).unwrap();
            let b = evaluate_matrix(&m, &x, &y).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn merge_is_linear_against_any_opponent(
            members in proptest::collection::vec(proptest::collection::vec(0usize..2, 3), 1..=5),
            raw_w in proptest::collection::vec(0.0..1.0f64, 5),
            opp in proptest::collection::vec(0.01..1.0f64, 2),
        ) {
            let g = small_tree();
            let pop: Vec<_> = members.iter()
                .map(|a| BehaviorPolicy::deterministic(&g, Player::One, a).unwrap()).collect();
            let mut w: Vec<f64> = raw_w[..pop.len()].to_vec();
            w[0] += 0.1;
            let t: f64 = w.iter().sum();
            let w = MixedStrategy::normalized(w.into_iter().map(|x| x / t).collect(), 1e-9).unwrap();
            let opponent = random_policy(&g, Player::Two, &opp);
            let merged = merge_population(&g, &pop, &w).unwrap();
            let lhs = evaluate_tree(&g, &merged, &opponent).unwrap();
            let rhs: f64 = pop.iter().zip(w.weights())
                .map(|(p, wk)| wk * evaluate_tree(&g, p, &opponent).unwrap()).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }
    }
}
