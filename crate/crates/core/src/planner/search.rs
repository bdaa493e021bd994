//! Top-down expansion of derivations, shared by construction and parsing.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::belief::Perspective;
use crate::error::{Error, Result};
use crate::plan::{equivalent, NodeKind, NodeRecord, PlanDerivation, PlanStatus};
use crate::schema::{is_primitive, ActionSchema, SchemaLibrary, Step};
use crate::term::{rename_apart, sym, unify, Substitution, Term};

use super::{upsert, Constructed, EvaluationMode, EvaluationResult, Planner, Solved, Solving};

#[derive(Clone, Copy)]
enum Mode<'o> {
    Construct,
    Parse(&'o [Term]),
}

#[derive(Clone, Debug)]
struct Draft {
    plan: PlanDerivation,
    /// Unexpanded action nodes, leftmost first, with their `refer` depth.
    agenda: Vec<(usize, usize)>,
    prims: usize,
    /// (predicate, entity) pairs already used by a modifier.
    used: Vec<(Term, Term)>,
    /// Non-shrinking modifiers still allowed.
    slack: usize,
    /// Primitive node to observed index.
    matched: Vec<(usize, usize)>,
    created: Vec<PlanDerivation>,
}

const ENTITY_SLOTS: [(&str, &[usize]); 3] = [("s-refer", &[0]), ("s-attrib", &[0]), ("s-attrib-rel", &[0, 1])];

impl Draft {
    fn empty() -> Self {
        let root = NodeRecord::leaf(sym(""), NodeKind::Action, Term::constant("root"));
        Draft {
            plan: PlanDerivation {
                id: sym(""),
                nodes: vec![root],
                bindings: Substitution::new(),
                status: PlanStatus::Partial,
                effect: None,
                added: Vec::new(),
            },
            agenda: Vec::new(),
            prims: 0,
            used: Vec::new(),
            slack: 0,
            matched: Vec::new(),
            created: Vec::new(),
        }
    }

    /// Continues a partial plan from its unexpanded nodes.
    fn resume(plan: &PlanDerivation, slack: usize) -> Self {
        let agenda = plan
            .unexpanded()
            .into_iter()
            .map(|i| (i, refer_depth(plan, i)))
            .collect();
        Draft {
            prims: plan.nodes.iter().filter(|n| n.kind == NodeKind::Primitive).count(),
            plan: plan.clone(),
            agenda,
            used: Vec::new(),
            slack,
            matched: Vec::new(),
            created: Vec::new(),
        }
    }

    fn push(&mut self, rec: NodeRecord) -> usize {
        self.plan.nodes.push(rec);
        self.plan.nodes.len() - 1
    }
}

fn refer_depth(plan: &PlanDerivation, mut idx: usize) -> usize {
    let mut depth = 0;
    while let Some(p) = plan.parent_of(idx) {
        if plan.nodes[p].content.functor() == Some("refer") {
            depth += 1;
        }
        idx = p;
    }
    depth
}

impl Planner<'_> {
    fn instance(&self, schema: &ActionSchema) -> ActionSchema {
        schema.from_term(&rename_apart(&schema.as_term(), self.ids))
    }

    fn lower_bound(&self, d: &Draft) -> usize {
        d.agenda
            .iter()
            .map(|&(i, _)| {
                let c = d.plan.bindings.apply(&d.plan.nodes[i].content);
                self.lib.min_yield(c.functor().unwrap_or_default())
            })
            .fold(d.prims, |a, b| a.saturating_add(b))
    }

    /// Installs schema instance `inst` at node `idx` and, when constructing,
    /// solves its constraints and mental actions; when parsing, matches its
    /// primitives against the observations.
    #[allow(clippy::too_many_arguments)]
    fn expand_with(
        &self,
        d: &Draft,
        idx: usize,
        depth: usize,
        inst: ActionSchema,
        s: Substitution,
        mode: Mode,
        persp: Perspective,
    ) -> Result<Vec<Draft>> {
        let mut next = d.clone();
        next.plan.bindings = s;
        if idx == 0 {
            next.plan.effect = inst.effect.clone();
        }
        let mut children = Vec::new();
        let mut to_solve = Vec::new();
        let mut prims = Vec::new();
        let mut actions = Vec::new();
        for c in &inst.constraints {
            let i = next.push(NodeRecord::leaf(sym(""), NodeKind::Constraint, c.clone()));
            children.push(i);
            to_solve.push(i);
        }
        let mut mental = Vec::new();
        for step in &inst.decomposition {
            let i = match step {
                Step::Action(t) if is_primitive(t.functor().unwrap_or_default()) => {
                    let i = next.push(NodeRecord::leaf(sym(""), NodeKind::Primitive, t.clone()));
                    prims.push(i);
                    i
                }
                Step::Action(t) => {
                    let child_depth = depth + usize::from(t.functor() == Some("refer"));
                    if matches!(mode, Mode::Construct) && child_depth > self.max_depth {
                        return Ok(Vec::new());
                    }
                    let i = next.push(NodeRecord::leaf(sym(""), NodeKind::Action, t.clone()));
                    actions.push((i, child_depth));
                    i
                }
                Step::Mental(t) => {
                    let i = next.push(NodeRecord::leaf(sym(""), NodeKind::Mental, t.clone()));
                    mental.push(i);
                    i
                }
                Step::Null => next.push(NodeRecord::leaf(sym(""), NodeKind::Null, Term::constant("null"))),
            };
            children.push(i);
        }
        {
            let node = &mut next.plan.nodes[idx];
            node.content = inst.header.clone();
            node.schema = Some(inst.name.clone());
            node.expanded = true;
            node.children = children;
        }
        next.prims += prims.len();
        actions.append(&mut next.agenda);
        next.agenda = actions;

        match mode {
            Mode::Construct => {
                let how = Solving {
                    perspective: persp,
                    mode: EvaluationMode::STRICT,
                    construct: true,
                };
                let mut states = vec![next];
                let modifier = SchemaLibrary::generalization(&inst.name) == Some("modifier");
                for &node in to_solve.iter().chain(&mental) {
                    let mut out = Vec::new();
                    for st in states {
                        let goal = st.plan.nodes[node].content.clone();
                        match self.solve(&goal, &st.plan.bindings, &st.created, how)? {
                            Solved::Undetermined => out.push(st),
                            Solved::Sols(sols) => {
                                for sol in sols {
                                    let mut st2 = st.clone();
                                    st2.plan.bindings = sol.s;
                                    if let Some(p) = sol.created {
                                        upsert(&mut st2.created, p);
                                    }
                                    out.push(st2);
                                }
                            }
                        }
                    }
                    states = out;
                }
                if modifier {
                    states.retain_mut(|st| self.admissible_modifier(st, &inst));
                }
                Ok(states)
            }
            Mode::Parse(observed) => {
                let mut states = vec![next];
                for &p in &prims {
                    let mut out = Vec::new();
                    for st in states {
                        let pat = st.plan.nodes[p].content.clone();
                        let mut seen: Vec<&Term> = Vec::new();
                        for (j, ob) in observed.iter().enumerate() {
                            if st.matched.iter().any(|&(_, k)| k == j) || seen.contains(&ob) {
                                continue;
                            }
                            seen.push(ob);
                            if let Some(s1) = unify(&pat, ob, &st.plan.bindings) {
                                let mut st2 = st.clone();
                                st2.plan.bindings = s1;
                                st2.matched.push((p, j));
                                out.push(st2);
                            }
                        }
                    }
                    states = out;
                }
                Ok(states)
            }
        }
    }

    /// A construction guard: modifiers must narrow the candidates (one
    /// exception per replan when a single candidate is left) and may not
    /// repeat a predicate for the same entity.
    fn admissible_modifier(&self, st: &mut Draft, inst: &ActionSchema) -> bool {
        let s = &st.plan.bindings;
        let header = s.apply(&inst.header);
        let entity = header.args()[0].clone();
        let pred = match inst.decomposition.first() {
            Some(Step::Action(t)) => s.apply(t).args().last().cloned(),
            _ => None,
        };
        if let Some(pred) = pred {
            if st.used.iter().any(|(p, e)| *e == entity && equivalent(p, &pred)) {
                return false;
            }
            st.used.push((pred, entity));
        }
        let (Some(cand), Some(new)) = (header.args()[2].as_list(), header.args()[3].as_list()) else {
            return true;
        };
        if new.len() < cand.len() {
            return true;
        }
        if cand.len() == 1 && st.slack > 0 {
            st.slack -= 1;
            return true;
        }
        false
    }

    fn successors(&self, d: &Draft, mode: Mode, persp: Perspective) -> Result<Vec<Draft>> {
        let (idx, depth) = d.agenda[0];
        let mut rest = d.clone();
        rest.agenda.remove(0);
        let header = rest.plan.bindings.apply(&rest.plan.nodes[idx].content);
        let mut out = Vec::new();
        for spec in SchemaLibrary::specializations(&header) {
            let Some(schema) = spec.functor().and_then(|f| self.lib.lookup(f)) else {
                continue;
            };
            let inst = self.instance(schema);
            let Some(s) = unify(&spec, &inst.header, &rest.plan.bindings) else {
                continue;
            };
            out.extend(self.expand_with(&rest, idx, depth, inst, s, mode, persp)?);
        }
        Ok(out)
    }

    /// Best-first search for the cheapest complete draft that evaluates
    /// valid. Returns the draft with its final bindings.
    fn best_first(&self, starts: Vec<Draft>, persp: Perspective) -> Result<Option<(Draft, Vec<String>)>> {
        let mut heap = BinaryHeap::new();
        let mut store: HashMap<usize, Draft> = HashMap::new();
        let mut seq = 0usize;
        let mut push = |d: Draft, heap: &mut BinaryHeap<_>, store: &mut HashMap<usize, Draft>| {
            let key = (self.lower_bound(&d), d.plan.nodes.len(), seq);
            heap.push(Reverse(key));
            store.insert(seq, d);
            seq += 1;
        };
        for d in starts {
            push(d, &mut heap, &mut store);
        }
        let mut popped = 0;
        while let Some(Reverse((_, _, id))) = heap.pop() {
            popped += 1;
            if popped > self.search_limit {
                break;
            }
            let d = store.remove(&id).expect("queued draft");
            if d.agenda.is_empty() {
                let eval = self.evaluate_with(&d.plan, persp, EvaluationMode::STRICT, d.created.clone())?;
                if let EvaluationResult::Valid(s) = eval.result {
                    let mut done = d;
                    done.plan.bindings = s;
                    done.created = eval.created;
                    return Ok(Some((done, eval.trace)));
                }
                continue;
            }
            for next in self.successors(&d, Mode::Construct, persp)? {
                push(next, &mut heap, &mut store);
            }
        }
        Ok(None)
    }

    /// Builds a valid plan whose effect unifies with `effect`, using the
    /// fewest surface actions.
    pub fn construct(&self, effect: &Term, persp: Perspective) -> Result<Constructed> {
        let mut starts = Vec::new();
        for schema in self.lib.roots() {
            let inst = self.instance(schema);
            let Some(s) = inst
                .effect
                .as_ref()
                .and_then(|e| unify(e, effect, &Substitution::new()))
            else {
                continue;
            };
            starts.extend(self.expand_with(&Draft::empty(), 0, 0, inst, s, Mode::Construct, persp)?);
        }
        let Some((mut done, trace)) = self.best_first(starts, persp)? else {
            return Err(Error::NoPlan(effect.to_string()));
        };
        self.mint_entities(&mut done.plan);
        Ok(Constructed {
            plan: self.finalize(done.plan),
            created: done.created,
            trace,
        })
    }

    /// Completes a partial plan. The result keeps the plan's id and lists
    /// the primitives it added in `added`.
    pub fn replan(&self, partial: &PlanDerivation, persp: Perspective) -> Result<PlanDerivation> {
        if partial.unexpanded().is_empty() {
            let mut done = partial.clone();
            done.status = PlanStatus::Complete;
            done.added = Vec::new();
            return Ok(done);
        }
        let start = Draft::resume(partial, 1);
        let retained = partial.nodes.len();
        let Some((mut done, _)) = self.best_first(vec![start], persp)? else {
            return Err(Error::NoPlan(format!("completion of {}", partial.id)));
        };
        self.mint_entities(&mut done.plan);
        let added = new_primitives(&done.plan, retained);
        let mut plan = self.finalize(done.plan);
        plan.added = added;
        Ok(plan)
    }

    /// Every derivation whose yield is exactly `observed` as a multiset,
    /// with modifiers of one entity in observed order. Constraints are
    /// left unevaluated.
    pub fn parse_actions(&self, observed: &[Term]) -> Result<Vec<PlanDerivation>> {
        let mut starts = Vec::new();
        for schema in self.lib.roots() {
            let inst = self.instance(schema);
            starts.extend(self.expand_with(
                &Draft::empty(),
                0,
                0,
                inst,
                Substitution::new(),
                Mode::Parse(observed),
                Perspective::UserSpeaker,
            )?);
        }
        Ok(self
            .parse_all(starts, observed)?
            .into_iter()
            .map(|d| self.finalize(d.plan))
            .collect())
    }

    /// Derivations completing `partial` with exactly the primitives `acts`.
    pub fn parse_completion(&self, partial: &PlanDerivation, acts: &[Term]) -> Result<Vec<PlanDerivation>> {
        let start = Draft::resume(partial, 0);
        Ok(self
            .parse_all(vec![start], acts)?
            .into_iter()
            .map(|d| {
                let mut plan = self.finalize(d.plan);
                plan.added = acts.to_vec();
                plan
            })
            .collect())
    }

    fn parse_all(&self, starts: Vec<Draft>, observed: &[Term]) -> Result<Vec<Draft>> {
        let mut stack: Vec<Draft> = starts.into_iter().rev().collect();
        let mut out = Vec::new();
        while let Some(d) = stack.pop() {
            let remaining = observed.len() - d.matched.len();
            let needed = self.lower_bound(&d) - d.prims;
            if needed > remaining {
                continue;
            }
            if d.agenda.is_empty() {
                if remaining == 0 && canonical_order(&d) {
                    out.push(d);
                }
                continue;
            }
            let next = self.successors(&d, Mode::Parse(observed), Perspective::UserSpeaker)?;
            stack.extend(next.into_iter().rev());
        }
        Ok(out)
    }

    /// Binds unbound discourse-entity arguments of primitives to fresh
    /// entity constants, in utterance order.
    fn mint_entities(&self, plan: &mut PlanDerivation) {
        for i in preorder(plan) {
            let n = &plan.nodes[i];
            if n.kind != NodeKind::Primitive {
                continue;
            }
            let c = plan.bindings.apply(&n.content);
            let Some((_, slots)) = ENTITY_SLOTS.iter().find(|(f, _)| c.functor() == Some(f)) else {
                continue;
            };
            for &k in *slots {
                if let Some(Term::Var(v)) = c.arg(k) {
                    if plan.bindings.get(v).is_none() {
                        plan.bindings.bind(v.clone(), self.ids.fresh_entity());
                    }
                }
            }
        }
    }

    /// Renumbers nodes into pre-order and names any that are new.
    fn finalize(&self, plan: PlanDerivation) -> PlanDerivation {
        let id = if plan.id.is_empty() {
            self.ids.fresh_name()
        } else {
            plan.id.clone()
        };
        let order = preorder(&plan);
        let mut index = vec![0; plan.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            index[old] = new;
        }
        let nodes: Vec<NodeRecord> = order
            .iter()
            .map(|&old| {
                let mut rec = plan.nodes[old].clone();
                if rec.name.is_empty() {
                    rec.name = self.ids.fresh_name();
                }
                rec.children = rec.children.iter().map(|&c| index[c]).collect();
                rec
            })
            .collect();
        let complete = nodes.iter().all(|n| n.expanded);
        PlanDerivation {
            id,
            nodes,
            bindings: plan.bindings.normalized(),
            status: if complete {
                PlanStatus::Complete
            } else {
                PlanStatus::Partial
            },
            effect: plan.effect,
            added: plan.added,
        }
    }
}

fn preorder(plan: &PlanDerivation) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        out.push(i);
        stack.extend(plan.nodes[i].children.iter().rev());
    }
    out
}

fn new_primitives(plan: &PlanDerivation, retained: usize) -> Vec<Term> {
    preorder(plan)
        .into_iter()
        .filter(|&i| i >= retained && plan.nodes[i].kind == NodeKind::Primitive)
        .map(|i| plan.content_at(i).reduce())
        .collect()
}

/// Successive modifiers in one chain must start at increasing observed
/// positions, so that modifier permutations parse once.
fn canonical_order(d: &Draft) -> bool {
    let nodes = &d.plan.nodes;
    let first_obs = |m: usize| -> Option<usize> {
        let mut stack = vec![m];
        while let Some(i) = stack.pop() {
            if nodes[i].kind == NodeKind::Primitive {
                return d.matched.iter().find(|&&(p, _)| p == i).map(|&(_, j)| j);
            }
            stack.extend(nodes[i].children.iter().rev());
        }
        None
    };
    let is_recurse = |i: usize| nodes[i].schema.as_deref() == Some("modifiers-recurse");
    (0..nodes.len()).filter(|&i| is_recurse(i)).all(|i| {
        let [m, rest] = nodes[i].children[..] else { return true };
        if !is_recurse(rest) {
            return true;
        }
        match (first_obs(m), first_obs(nodes[rest].children[0])) {
            (Some(a), Some(b)) => a < b,
            _ => true,
        }
    })
}
