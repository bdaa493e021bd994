//! Constraint evaluation with postponement, and the built-in predicates.

use crate::belief::{Perspective, SYSTEM, USER};
use crate::error::Result;
use crate::plan::{same_multiset, NodeKind, PlanDerivation, PlanStatus};
use crate::schema::unify_headers;
use crate::term::{rename_apart, unify, Substitution, Sym, Term};

use super::{upsert, EvaluationMode, Planner, Sol, Solved, Solving};

#[derive(Clone, Debug, PartialEq)]
pub enum EvaluationResult {
    Valid(Substitution),
    /// The action node owning the constraint that failed.
    Invalid(Sym),
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub result: EvaluationResult,
    /// Full bindings when valid; whatever was committed before the failure
    /// otherwise.
    pub bindings: Substitution,
    /// The constraint or mental node that failed.
    pub failed: Option<Sym>,
    pub created: Vec<PlanDerivation>,
    pub trace: Vec<String>,
}

impl Evaluation {
    pub fn is_valid(&self) -> bool {
        matches!(self.result, EvaluationResult::Valid(_))
    }

    pub fn error_node(&self) -> Option<&Sym> {
        match &self.result {
            EvaluationResult::Invalid(n) => Some(n),
            EvaluationResult::Valid(_) => None,
        }
    }
}

struct Item {
    node: usize,
    owner: usize,
}

struct Run {
    s: Substitution,
    created: Vec<PlanDerivation>,
}

enum Outcome {
    Valid(Run),
    Failed { item: usize, run: Run },
}

impl Planner<'_> {
    pub fn evaluate(
        &self,
        plan: &PlanDerivation,
        perspective: Perspective,
        mode: EvaluationMode,
    ) -> Result<Evaluation> {
        self.evaluate_with(plan, perspective, mode, Vec::new())
    }

    /// Walks constraints and mental actions in order of mention. One
    /// solution commits, none fails the owning action, several postpone.
    /// Postponed goals are retried until nothing more commits; then the
    /// first one still open is branched on.
    pub(crate) fn evaluate_with(
        &self,
        plan: &PlanDerivation,
        perspective: Perspective,
        mode: EvaluationMode,
        seed: Vec<PlanDerivation>,
    ) -> Result<Evaluation> {
        let mut items = Vec::new();
        collect_items(plan, 0, &mut items);
        let how = Solving {
            perspective,
            mode,
            construct: false,
        };
        let mut trace = Vec::new();
        let pending: Vec<usize> = (0..items.len()).collect();
        let run = Run {
            s: plan.bindings.clone(),
            created: seed,
        };
        let outcome = self.fixpoint(plan, &items, pending, run, how, &mut trace)?;
        Ok(match outcome {
            Outcome::Valid(run) => Evaluation {
                result: EvaluationResult::Valid(run.s.clone()),
                bindings: run.s,
                failed: None,
                created: run.created,
                trace,
            },
            Outcome::Failed { item, run } => {
                let owner = plan.nodes[items[item].owner].name.clone();
                if self.trace {
                    trace.push(format!("invalid at {owner}"));
                }
                Evaluation {
                    result: EvaluationResult::Invalid(owner),
                    bindings: run.s,
                    failed: Some(plan.nodes[items[item].node].name.clone()),
                    created: run.created,
                    trace,
                }
            }
        })
    }

    fn fixpoint(
        &self,
        plan: &PlanDerivation,
        items: &[Item],
        mut pending: Vec<usize>,
        mut run: Run,
        how: Solving,
        trace: &mut Vec<String>,
    ) -> Result<Outcome> {
        let show = |i: usize, s: &Substitution| {
            let n = &plan.nodes[items[i].node];
            format!("{} {}", n.name, s.apply(&n.content).reduce())
        };
        loop {
            let mut progress = false;
            let mut open = Vec::new();
            for i in pending {
                let goal = &plan.nodes[items[i].node].content;
                match self.solve(goal, &run.s, &run.created, how)? {
                    Solved::Sols(mut sols) if sols.len() == 1 => {
                        if self.trace {
                            trace.push(format!("commit {}", show(i, &run.s)));
                        }
                        let sol = sols.pop().expect("one solution");
                        run.s = sol.s;
                        if let Some(p) = sol.created {
                            upsert(&mut run.created, p);
                        }
                        progress = true;
                    }
                    Solved::Sols(sols) if sols.is_empty() => {
                        if self.trace {
                            trace.push(format!("fail {}", show(i, &run.s)));
                        }
                        return Ok(Outcome::Failed { item: i, run });
                    }
                    Solved::Sols(sols) => {
                        if self.trace {
                            trace.push(format!("postpone {} ({} solutions)", show(i, &run.s), sols.len()));
                        }
                        open.push(i);
                    }
                    Solved::Undetermined => {
                        if self.trace {
                            trace.push(format!("postpone {} (undetermined)", show(i, &run.s)));
                        }
                        open.push(i);
                    }
                }
            }
            pending = open;
            if !progress || pending.is_empty() {
                break;
            }
        }
        if pending.is_empty() {
            return Ok(Outcome::Valid(run));
        }
        for &i in &pending {
            let goal = &plan.nodes[items[i].node].content;
            let Solved::Sols(sols) = self.solve(goal, &run.s, &run.created, how)? else {
                continue;
            };
            let rest: Vec<usize> = pending.iter().copied().filter(|&j| j != i).collect();
            let mut first_failure = None;
            let total = sols.len();
            for (n, sol) in sols.into_iter().enumerate() {
                if self.trace {
                    trace.push(format!("branch {} {}/{}", show(i, &sol.s), n + 1, total));
                }
                let mut created = run.created.clone();
                if let Some(p) = sol.created {
                    upsert(&mut created, p);
                }
                let branch = Run { s: sol.s, created };
                match self.fixpoint(plan, items, rest.clone(), branch, how, trace)? {
                    Outcome::Valid(r) => return Ok(Outcome::Valid(r)),
                    failed => {
                        first_failure.get_or_insert(failed);
                    }
                }
            }
            return Ok(first_failure.expect("branching over several solutions"));
        }
        // Only undetermined goals remain; nothing will ever bind them.
        let first = pending[0];
        if self.trace {
            trace.push(format!("fail {} (never determined)", show(first, &run.s)));
        }
        Ok(Outcome::Failed { item: first, run })
    }

    /// Solutions of one constraint or mental action.
    pub(crate) fn solve(
        &self,
        goal: &Term,
        s: &Substitution,
        created: &[PlanDerivation],
        how: Solving,
    ) -> Result<Solved> {
        let g = s.apply(goal).reduce();
        let args = g.args();
        match (g.functor(), args.len()) {
            (Some("="), 2) => Ok(Solved::from_substs(unify_headers(&args[0], &args[1], s))),
            (Some("not"), 1) => Ok(match self.solve(&args[0], s, created, how)? {
                Solved::Undetermined => Solved::Undetermined,
                Solved::Sols(v) if v.is_empty() => Solved::from_substs([s.clone()]),
                Solved::Sols(_) => Solved::Sols(Vec::new()),
            }),
            (Some("subset"), 3) => self.solve_subset(args, s, how.perspective),
            (Some("pick-one"), 2) => {
                let Some(set) = ground_list(&args[1]) else {
                    return Ok(Solved::Undetermined);
                };
                let choices = if how.construct {
                    self.base.pick_one(set).into_iter().collect()
                } else {
                    self.base.pick_ordering(set)
                };
                Ok(Solved::from_substs(
                    choices.iter().filter_map(|c| unify(&args[0], c, s)),
                ))
            }
            (Some("content"), 3) => self.solve_content(args, s, created),
            (Some("yield"), 3) => self.solve_yield(args, s, created),
            (Some("substitute"), 4) => self.solve_substitute(args, s, created),
            (Some("replan"), 2) => self.solve_replan(args, s, created, how),
            (Some("bel"), 2) if how.mode.assume_speaker_beliefs => self.solve_assumed(&g, s, how),
            _ => Ok(Solved::from_substs(self.base.query_with(
                &g,
                how.perspective,
                s,
                self.ids,
            )?)),
        }
    }

    fn solve_subset(&self, args: &[Term], s: &Substitution, persp: Perspective) -> Result<Solved> {
        let Some(set) = ground_list(&args[0]) else {
            return Ok(Solved::Undetermined);
        };
        let pred = &args[1];
        if !matches!(pred, Term::Lambda(..)) || !pred.free_vars().is_empty() {
            return Ok(Solved::Undetermined);
        }
        let kept = self.base.subset(set, pred, persp, self.ids)?;
        if kept.is_empty() {
            return Ok(Solved::Sols(Vec::new()));
        }
        Ok(Solved::from_substs(unify(&args[2], &Term::list(kept), s)))
    }

    fn solve_content(&self, args: &[Term], s: &Substitution, created: &[PlanDerivation]) -> Result<Solved> {
        if args[0].is_var() {
            return Ok(Solved::Undetermined);
        }
        let Some(plan) = self.lookup_plan(&args[0], created) else {
            return Ok(Solved::Sols(Vec::new()));
        };
        let nodes: Vec<usize> = match args[1].const_name() {
            Some(name) => plan.index_of(name).into_iter().collect(),
            None => (0..plan.nodes.len())
                .filter(|&i| plan.nodes[i].kind == NodeKind::Action)
                .collect(),
        };
        let mut out = Vec::new();
        for i in nodes {
            let content = rename_apart(&plan.content_at(i), self.ids);
            let node = Term::Const(plan.nodes[i].name.clone());
            if let Some(s1) = unify(&args[1], &node, s).and_then(|s1| unify(&args[2], &content, &s1)) {
                out.push(s1);
            }
        }
        Ok(Solved::from_substs(out))
    }

    fn solve_yield(&self, args: &[Term], s: &Substitution, created: &[PlanDerivation]) -> Result<Solved> {
        if args[0].is_var() {
            return Ok(Solved::Undetermined);
        }
        let Some(plan) = self.lookup_plan(&args[0], created) else {
            return Ok(Solved::Sols(Vec::new()));
        };
        if let Some(name) = args[1].const_name() {
            let Ok(y) = plan.yield_of(name) else {
                return Ok(Solved::Sols(Vec::new()));
            };
            if let Some(acts) = ground_list(&args[2]) {
                let same = same_multiset(acts, &y);
                return Ok(Solved::from_substs(same.then(|| s.clone())));
            }
            return Ok(Solved::from_substs(unify(&args[2], &Term::list(y), s)));
        }
        let Some(acts) = ground_list(&args[2]) else {
            return Ok(Solved::Undetermined);
        };
        Ok(match plan.find_node_covering(acts) {
            Ok(node) => Solved::from_substs(unify(&args[1], &Term::Const(node), s)),
            Err(_) => Solved::Sols(Vec::new()),
        })
    }

    fn solve_substitute(&self, args: &[Term], s: &Substitution, created: &[PlanDerivation]) -> Result<Solved> {
        let (Some(_), Some(node)) = (args[0].const_name(), args[1].const_name()) else {
            return Ok(Solved::Undetermined);
        };
        if !matches!(args[2], Term::Compound(..)) {
            return Ok(Solved::Undetermined);
        }
        if self.lookup_plan(&args[3], created).is_some() {
            return Ok(Solved::from_substs([s.clone()]));
        }
        let Some(plan) = self.lookup_plan(&args[0], created) else {
            return Ok(Solved::Sols(Vec::new()));
        };
        let Ok(new) = plan.substitute(node, &args[2], self.lib, self.ids) else {
            return Ok(Solved::Sols(Vec::new()));
        };
        let Some(s1) = unify(&args[3], &Term::Const(new.id.clone()), s) else {
            return Ok(Solved::Sols(Vec::new()));
        };
        Ok(Solved::Sols(vec![Sol {
            s: s1,
            created: Some(new),
        }]))
    }

    fn solve_replan(
        &self,
        args: &[Term],
        s: &Substitution,
        created: &[PlanDerivation],
        how: Solving,
    ) -> Result<Solved> {
        if args[0].is_var() {
            return Ok(Solved::Undetermined);
        }
        let Some(plan) = self.lookup_plan(&args[0], created) else {
            return Ok(Solved::Sols(Vec::new()));
        };
        if plan.status == PlanStatus::Complete {
            return Ok(Solved::from_substs(unify(&args[1], &Term::list(plan.added.clone()), s)));
        }
        if let Some(acts) = ground_list(&args[1]) {
            for done in self.parse_completion(plan, acts)? {
                let ok = how.mode.embedded_replan_derive_only
                    || self
                        .evaluate(&done, how.perspective, EvaluationMode::STRICT)?
                        .is_valid();
                if ok {
                    return Ok(Solved::Sols(vec![Sol {
                        s: s.clone(),
                        created: Some(done),
                    }]));
                }
            }
            return Ok(Solved::Sols(Vec::new()));
        }
        match self.replan(plan, how.perspective) {
            Ok(done) => {
                let acts = Term::list(done.added.clone());
                Ok(match unify(&args[1], &acts, s) {
                    Some(s1) => Solved::Sols(vec![Sol {
                        s: s1,
                        created: Some(done),
                    }]),
                    None => Solved::Sols(Vec::new()),
                })
            }
            Err(_) => Ok(Solved::Sols(Vec::new())),
        }
    }

    /// `bel(Agent, P)` for the other agent, read generously: what is
    /// mutually believed, then what the agent is on record as believing,
    /// and otherwise simply granted.
    fn solve_assumed(&self, g: &Term, s: &Substitution, how: Solving) -> Result<Solved> {
        let args = g.args();
        let agent = match args[0].const_name() {
            Some(a) if a != SYSTEM => a,
            _ => {
                return Ok(Solved::from_substs(self.base.query_with(
                    g,
                    how.perspective,
                    s,
                    self.ids,
                )?));
            }
        };
        let sys = Term::constant(SYSTEM);
        let usr = Term::constant(USER);
        let attempts = [
            Term::compound("bmb", vec![sys.clone(), usr.clone(), args[1].clone()]),
            Term::compound(
                "bmb",
                vec![
                    sys,
                    usr,
                    Term::compound("bel", vec![Term::constant(agent), args[1].clone()]),
                ],
            ),
            g.clone(),
        ];
        for q in &attempts {
            let found = self.base.query_with(q, how.perspective, s, self.ids)?;
            if !found.is_empty() {
                return Ok(Solved::from_substs(found));
            }
        }
        Ok(Solved::from_substs([s.clone()]))
    }
}

fn ground_list(t: &Term) -> Option<&[Term]> {
    t.as_list().filter(|_| t.is_ground())
}

fn collect_items(plan: &PlanDerivation, idx: usize, out: &mut Vec<Item>) {
    for &c in &plan.nodes[idx].children {
        match plan.nodes[c].kind {
            NodeKind::Constraint | NodeKind::Mental => out.push(Item { node: c, owner: idx }),
            NodeKind::Action => collect_items(plan, c, out),
            NodeKind::Primitive | NodeKind::Null => {}
        }
    }
}
