//! Plan derivations: trees of named nodes over schema instances.
//!
//! Nodes live in a flat arena in pre-order; index 0 is the root. Names
//! (`p12`) come from the engine's [`IdGen`] and are how other propositions
//! refer to a node.

use std::fmt;

use crate::error::{Error, Result};
use crate::schema::{is_primitive, unify_headers, SchemaLibrary, Step};
use crate::term::{rename_apart, unify, IdGen, Substitution, Sym, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Action,
    Constraint,
    Mental,
    Primitive,
    Null,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeRecord {
    pub name: Sym,
    pub kind: NodeKind,
    pub content: Term,
    pub children: Vec<usize>,
    /// Schema an expanded action node was instantiated from.
    pub schema: Option<Sym>,
    pub expanded: bool,
}

impl NodeRecord {
    pub fn leaf(name: Sym, kind: NodeKind, content: Term) -> Self {
        NodeRecord {
            name,
            kind,
            content,
            children: Vec::new(),
            schema: None,
            expanded: kind != NodeKind::Action,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanStatus {
    Partial,
    Complete,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanDerivation {
    pub id: Sym,
    pub nodes: Vec<NodeRecord>,
    pub bindings: Substitution,
    pub status: PlanStatus,
    /// The root schema's effect, sharing variables with the nodes.
    pub effect: Option<Term>,
    /// Primitives contributed by the last replan, in utterance order.
    pub added: Vec<Term>,
}

/// Equality up to renaming of lambda parameters.
pub fn equivalent(a: &Term, b: &Term) -> bool {
    a == b || unify(a, b, &Substitution::new()).is_some_and(|s| s.is_empty())
}

/// Order-insensitive comparison of two action sequences.
pub fn same_multiset(a: &[Term], b: &[Term]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter()
        .all(|x| match (0..b.len()).find(|&j| !used[j] && equivalent(x, &b[j])) {
            Some(j) => {
                used[j] = true;
                true
            }
            None => false,
        })
}

impl PlanDerivation {
    pub fn root(&self) -> &NodeRecord {
        &self.nodes[0]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| &*n.name == name)
            .ok_or_else(|| Error::UnknownNode {
                plan: self.id.to_string(),
                node: name.to_string(),
            })
    }

    pub fn node(&self, name: &str) -> Result<&NodeRecord> {
        Ok(&self.nodes[self.index_of(name)?])
    }

    pub fn parent_of(&self, idx: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.children.contains(&idx))
    }

    /// Primitive contents under `idx`, left to right, with bindings applied.
    pub fn yield_at(&self, idx: usize) -> Vec<Term> {
        let mut out = Vec::new();
        self.collect_yield(idx, &mut out);
        out
    }

    fn collect_yield(&self, idx: usize, out: &mut Vec<Term>) {
        let n = &self.nodes[idx];
        if n.kind == NodeKind::Primitive {
            out.push(self.bindings.apply(&n.content).reduce());
        }
        for &c in &n.children {
            self.collect_yield(c, out);
        }
    }

    pub fn yield_of(&self, name: &str) -> Result<Vec<Term>> {
        Ok(self.yield_at(self.index_of(name)?))
    }

    pub fn content_at(&self, idx: usize) -> Term {
        self.bindings.apply(&self.nodes[idx].content)
    }

    pub fn content_of(&self, name: &str) -> Result<Term> {
        Ok(self.content_at(self.index_of(name)?))
    }

    pub fn root_content(&self) -> Term {
        self.content_at(0)
    }

    /// `G` from an effect of the form `bel(Hearer, goal(Speaker, G))`.
    pub fn goal(&self) -> Option<Term> {
        let effect = self.bindings.apply(self.effect.as_ref()?);
        let inner = effect.arg(1)?;
        inner.is_functor("goal", 2).then(|| inner.args()[1].clone())
    }

    /// The object a referring plan picks out, when bound.
    pub fn referent(&self) -> Option<Term> {
        let root = self.root_content();
        if !root.is_functor("refer", 2) {
            return None;
        }
        Some(root.args()[1].clone()).filter(|t| !t.is_var())
    }

    /// Unexpanded action nodes in pre-order.
    pub fn unexpanded(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind == NodeKind::Action && !self.nodes[i].expanded)
            .collect()
    }

    /// The deepest action node whose yield equals `actions` as a multiset.
    pub fn find_node_covering(&self, actions: &[Term]) -> Result<Sym> {
        let unintelligible = || Error::UnintelligibleRejection {
            plan: self.id.to_string(),
            actions: crate::term::display_list(actions),
        };
        if actions.is_empty() {
            return Err(unintelligible());
        }
        let covering: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind == NodeKind::Action)
            .filter(|&i| same_multiset(&self.yield_at(i), actions))
            .collect();
        // Covering nodes with equal yields form one chain; pre-order puts
        // the deepest last.
        covering
            .last()
            .map(|&i| self.nodes[i].name.clone())
            .ok_or_else(unintelligible)
    }

    /// Node names of the subtree at `idx`, including itself.
    pub fn subtree(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![idx];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.nodes[out[i]].children.iter().copied());
            i += 1;
        }
        out
    }

    /// Replaces the subtree at `node` by an unexpanded action `header`.
    ///
    /// The derivation is rebuilt from fresh schema instances so every
    /// binding is undone except those fixed by retained primitive actions.
    /// The result is a new partial plan with a fresh id.
    pub fn substitute(&self, node: &str, header: &Term, lib: &SchemaLibrary, ids: &IdGen) -> Result<PlanDerivation> {
        let target = self.index_of(node)?;
        if !matches!(self.nodes[target].kind, NodeKind::Action | NodeKind::Null) {
            return Err(Error::NotSubstitutable(node.to_string()));
        }
        let mut rb = Rebuild {
            old: self,
            lib,
            ids,
            target,
            header,
            nodes: Vec::new(),
            s: Substitution::new(),
            effect: None,
        };
        rb.node(0, None)?;
        Ok(PlanDerivation {
            id: ids.fresh_name(),
            nodes: rb.nodes,
            bindings: rb.s,
            status: PlanStatus::Partial,
            effect: rb.effect,
            added: Vec::new(),
        })
    }

    /// Same schema at every node and equivalent primitive contents.
    pub fn isomorphic(&self, other: &PlanDerivation) -> bool {
        fn go(a: &PlanDerivation, i: usize, b: &PlanDerivation, j: usize) -> bool {
            let (x, y) = (&a.nodes[i], &b.nodes[j]);
            if x.kind != y.kind || x.schema != y.schema || x.children.len() != y.children.len() {
                return false;
            }
            if x.kind == NodeKind::Primitive && !equivalent(&a.content_at(i), &b.content_at(j)) {
                return false;
            }
            x.children.iter().zip(&y.children).all(|(&c, &d)| go(a, c, b, d))
        }
        go(self, 0, other, 0)
    }

    /// Indented tree of actions and primitives, optionally with
    /// constraints and mental actions.
    pub fn pretty(&self, with_constraints: bool) -> String {
        let mut out = String::new();
        self.pretty_at(0, 0, with_constraints, &mut out);
        out
    }

    fn pretty_at(&self, idx: usize, depth: usize, all: bool, out: &mut String) {
        let n = &self.nodes[idx];
        let pad = "  ".repeat(depth);
        let body = self.content_at(idx).reduce();
        let line = match n.kind {
            NodeKind::Action if n.expanded => format!("{pad}{}: {body}\n", n.name),
            NodeKind::Action => format!("{pad}{}: {body} ...\n", n.name),
            NodeKind::Primitive => format!("{pad}{}: {body}\n", n.name),
            NodeKind::Null => format!("{pad}{}: null\n", n.name),
            NodeKind::Constraint if all => format!("{pad}{}: ? {body}\n", n.name),
            NodeKind::Mental if all => format!("{pad}{}: ! {body}\n", n.name),
            _ => String::new(),
        };
        out.push_str(&line);
        for &c in &n.children {
            self.pretty_at(c, depth + 1, all, out);
        }
    }
}

impl fmt::Display for PlanDerivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "plan {}", self.id)?;
        f.write_str(&self.pretty(false))
    }
}

struct Rebuild<'a> {
    old: &'a PlanDerivation,
    lib: &'a SchemaLibrary,
    ids: &'a IdGen,
    target: usize,
    header: &'a Term,
    nodes: Vec<NodeRecord>,
    s: Substitution,
    effect: Option<Term>,
}

impl Rebuild<'_> {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Rebuild {
            plan: self.old.id.to_string(),
            reason: reason.into(),
        }
    }

    fn link(&mut self, parent_step: Option<&Term>, header: &Term) -> Result<()> {
        if let Some(p) = parent_step {
            self.s = unify_headers(p, header, &self.s)
                .ok_or_else(|| self.fail(format!("{header} does not fit step {p}")))?;
        }
        Ok(())
    }

    fn push(&mut self, rec: NodeRecord) -> usize {
        self.nodes.push(rec);
        self.nodes.len() - 1
    }

    fn node(&mut self, old_idx: usize, parent_step: Option<&Term>) -> Result<usize> {
        let old = &self.old.nodes[old_idx];
        if old_idx == self.target {
            let h = rename_apart(self.header, self.ids);
            self.link(parent_step, &h)?;
            return Ok(self.push(NodeRecord::leaf(self.ids.fresh_name(), NodeKind::Action, h)));
        }
        if old.kind != NodeKind::Action {
            return Err(self.fail(format!("node {} is not an action", old.name)));
        }
        if !old.expanded {
            let h = rename_apart(&self.old.content_at(old_idx), self.ids);
            self.link(parent_step, &h)?;
            return Ok(self.push(NodeRecord::leaf(old.name.clone(), NodeKind::Action, h)));
        }
        let schema_name = old
            .schema
            .clone()
            .ok_or_else(|| self.fail("expanded node lacks a schema"))?;
        let schema = self
            .lib
            .lookup(&schema_name)
            .ok_or_else(|| self.fail(format!("unknown schema {schema_name}")))?;
        let inst = schema.from_term(&rename_apart(&schema.as_term(), self.ids));
        self.link(parent_step, &inst.header)?;
        if old_idx == 0 {
            self.effect = inst.effect.clone();
        }
        let idx = self.push(NodeRecord {
            name: old.name.clone(),
            kind: NodeKind::Action,
            content: inst.header.clone(),
            children: Vec::new(),
            schema: Some(schema_name),
            expanded: true,
        });
        let slots: Vec<Option<Step>> = inst
            .constraints
            .iter()
            .map(|_| None)
            .chain(inst.decomposition.iter().cloned().map(Some))
            .collect();
        if slots.len() != old.children.len() {
            return Err(self.fail(format!("node {} does not match its schema", old.name)));
        }
        let mut children = Vec::new();
        for (k, (&child, slot)) in old.children.iter().zip(slots).enumerate() {
            let prev = &self.old.nodes[child];
            let new = match slot {
                None => self.push(NodeRecord::leaf(
                    prev.name.clone(),
                    NodeKind::Constraint,
                    inst.constraints[k].clone(),
                )),
                Some(Step::Action(t)) if child == self.target => self.node(child, Some(&t))?,
                Some(Step::Action(t)) if is_primitive(t.functor().unwrap_or_default()) => {
                    let frozen = self.old.content_at(child);
                    self.s = unify(&t, &frozen, &self.s)
                        .ok_or_else(|| self.fail(format!("primitive {frozen} does not fit {t}")))?;
                    self.push(NodeRecord::leaf(prev.name.clone(), NodeKind::Primitive, frozen))
                }
                Some(Step::Action(t)) => self.node(child, Some(&t))?,
                Some(_) if child == self.target => self.node(child, None)?,
                Some(Step::Mental(t)) => self.push(NodeRecord::leaf(prev.name.clone(), NodeKind::Mental, t)),
                Some(Step::Null) => self.push(NodeRecord::leaf(
                    prev.name.clone(),
                    NodeKind::Null,
                    Term::constant("null"),
                )),
            };
            children.push(new);
        }
        self.nodes[idx].children = children;
        Ok(idx)
    }
}
