//! The collaborating agent: mental state, the collaboration rules, and the
//! hearer and speaker steps of a turn.

use std::collections::HashSet;
use std::fmt;

use crate::belief::{skolemize, unskolemize, BeliefBase, Bucket, Perspective, SYSTEM, USER};
use crate::error::{Error, Result};
use crate::plan::PlanDerivation;
use crate::planner::{
    EvaluationMode, EvaluationResult, InferenceContext, InferenceResult, PlanRegistry, Planner, DEFAULT_MAX_DEPTH,
};
use crate::schema::SchemaLibrary;
use crate::term::{display_list, parse_term_in, unify, IdGen, Scope, Substitution, Sym, Term};

/// The referring plan currently under collaboration and its goal.
#[derive(Clone, Debug, PartialEq)]
pub struct CState {
    pub plan: Sym,
    /// `knowref(...)`, with the referent left open until accepted.
    pub goal: Term,
}

#[derive(Clone, Debug, Default)]
pub struct MentalState {
    pub base: BeliefBase,
    pub cstate: Option<CState>,
    pub plans: PlanRegistry,
    /// Discourse goals still to be planned for, oldest first.
    pub agenda: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Judgment {
    Achieve,
    Error(Sym),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Turn { index: usize, speaker: &'static str },
    Observe(Vec<Term>),
    Inferred { plan: Sym, outcome: String },
    PlanRegistered { plan: Sym, root: Term },
    BeliefAdopted { bucket: Bucket, prop: Term },
    BeliefRetracted { bucket: Bucket, prop: Term },
    RuleFired { rule: u8, head: Term },
    GoalAdopted(Term),
    GoalDropped { goal: Term, reason: String },
    CState(CState),
    Constructed { plan: Sym, schema: Sym, goal: Term },
    Uttered(Vec<Term>),
    Trace(String),
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Turn { index, speaker } => write!(f, "turn {index} {speaker}"),
            Event::Observe(acts) => write!(f, "observe [{}]", display_list(acts)),
            Event::Inferred { plan, outcome } => write!(f, "infer {plan} {outcome}"),
            Event::PlanRegistered { plan, root } => write!(f, "plan {plan} {root}"),
            Event::BeliefAdopted { bucket, prop } => write!(f, "adopt {bucket} {prop}"),
            Event::BeliefRetracted { bucket, prop } => write!(f, "retract {bucket} {prop}"),
            Event::RuleFired { rule, head } => write!(f, "rule {rule} {head}"),
            Event::GoalAdopted(g) => write!(f, "goal {g}"),
            Event::GoalDropped { goal, reason } => write!(f, "drop {goal}: {reason}"),
            Event::CState(c) => write!(f, "cstate {} {}", c.plan, c.goal),
            Event::Constructed { plan, schema, goal } => write!(f, "construct {plan} {schema} for {goal}"),
            Event::Uttered(acts) => write!(f, "utter [{}]", display_list(acts)),
            Event::Trace(line) => write!(f, "  {line}"),
        }
    }
}

/// What a rule concludes.
#[derive(Clone, Debug)]
enum Head {
    Belief(Bucket, Term),
    CState(Sym, Term),
    Goal(Term),
    /// A `replace` adopted into common ground switches the cstate.
    Replace {
        agent: Term,
        new_plan: Sym,
        prop: Term,
    },
}

pub struct Agent {
    pub state: MentalState,
    pub lib: SchemaLibrary,
    pub ids: IdGen,
    pub events: Vec<Event>,
    pub max_depth: usize,
    pub trace: bool,
    /// Heads already concluded; a rule never refires on the same head.
    fired: HashSet<(u8, Term)>,
}

fn persp_of(agent: &Term) -> Perspective {
    if agent.const_name() == Some(SYSTEM) {
        Perspective::SystemSpeaker
    } else {
        Perspective::UserSpeaker
    }
}

fn distinct_agents(a: &Term, b: &Term) -> bool {
    matches!((a.const_name(), b.const_name()), (Some(x), Some(y)) if x != y)
}

fn plan_const(p: &Sym) -> Term {
    Term::Const(p.clone())
}

impl Agent {
    pub fn new(base: BeliefBase) -> Self {
        let ids = IdGen::new();
        let lib = SchemaLibrary::builtin(&ids);
        Agent::with_ids(base, lib, ids)
    }

    pub fn with_ids(base: BeliefBase, lib: SchemaLibrary, ids: IdGen) -> Self {
        Agent {
            state: MentalState {
                base,
                ..MentalState::default()
            },
            lib,
            ids,
            events: Vec::new(),
            max_depth: DEFAULT_MAX_DEPTH,
            trace: false,
            fired: HashSet::new(),
        }
    }

    fn planner(&self) -> Planner<'_> {
        Planner::new(&self.lib, &self.state.base, &self.ids, &self.state.plans)
            .with_max_depth(self.max_depth)
            .with_trace(self.trace)
    }

    fn pat(&self, src: &str, scope: &mut Scope) -> Term {
        parse_term_in(src, &self.ids, scope).expect("rule pattern")
    }

    fn query(&self, pattern: &Term, s: &Substitution) -> Result<Vec<Substitution>> {
        self.state
            .base
            .query_with(pattern, Perspective::SystemSpeaker, s, &self.ids)
    }

    fn emit_trace(&mut self, lines: Vec<String>) {
        if self.trace {
            self.events.extend(lines.into_iter().map(Event::Trace));
        }
    }

    pub fn register(&mut self, plan: PlanDerivation) {
        self.events.push(Event::PlanRegistered {
            plan: plan.id.clone(),
            root: plan.root_content(),
        });
        self.state.plans.insert(plan.id.clone(), plan);
    }

    fn adopt(&mut self, prop: Term, bucket: Bucket) -> Result<bool> {
        let new = self.state.base.assert_prop(prop.clone(), bucket)?;
        if new {
            self.events.push(Event::BeliefAdopted { bucket, prop });
        }
        Ok(new)
    }

    /// Puts a plan on record as mutually believed, with the speaker's
    /// judgment of it in the system's private beliefs.
    pub fn record_contribution(&mut self, speaker: &Term, plan: &Sym, goal: &Term, judgment: &Judgment) -> Result<()> {
        let goal = skolemize(goal);
        let p = plan_const(plan);
        self.adopt(
            Term::compound("plan", vec![speaker.clone(), p.clone(), goal.clone()]),
            Bucket::CommonGround,
        )?;
        let verdict = match judgment {
            Judgment::Achieve => Term::compound("achieve", vec![p, goal]),
            Judgment::Error(node) => Term::compound("error", vec![p, Term::Const(node.clone())]),
        };
        self.adopt(verdict, Bucket::Private)?;
        Ok(())
    }

    /// The cstate, or failing that the user's last referring plan.
    fn current(&self) -> Option<(Sym, Term)> {
        if let Some(c) = &self.state.cstate {
            return Some((c.plan.clone(), c.goal.clone()));
        }
        let mut scope = Scope::new();
        let pattern = self.pat("bmb(system, user, plan(user, P, knowref(A, B, E, O)))", &mut scope);
        let sols = self.query(&pattern, &Substitution::new()).ok()?;
        let s = sols.last()?;
        let plan = s.apply(&self.pat("P", &mut scope));
        let goal = s.apply(&self.pat("knowref(A, B, E, O)", &mut scope));
        Some((plan.const_name()?.into(), unskolemize(&goal, &self.ids)))
    }

    fn rule_heads(&self, rule: u8) -> Result<Vec<Head>> {
        let mut sc = Scope::new();
        let empty = Substitution::new();
        let mut heads = Vec::new();
        match rule {
            1 => {
                let q = self.pat("bmb(system, user, plan(A, P, G))", &mut sc);
                let h = self.pat("goal(A, G)", &mut sc);
                for s in self.query(&q, &empty)? {
                    heads.push(Head::Belief(Bucket::CommonGround, s.apply(&h)));
                }
            }
            2 => {
                let q = self.pat("bmb(system, user, goal(A1, bel(A2, bel(A1, Prop))))", &mut sc);
                let a1 = self.pat("A1", &mut sc);
                let a2 = self.pat("A2", &mut sc);
                let h = self.pat("bel(A1, Prop)", &mut sc);
                for s in self.query(&q, &empty)? {
                    if distinct_agents(&s.apply(&a1), &s.apply(&a2)) {
                        heads.push(Head::Belief(Bucket::CommonGround, s.apply(&h)));
                    }
                }
            }
            3 => {
                let q = self.pat("bmb(system, user, plan(user, P, knowref(A, B, E, O)))", &mut sc);
                let h = self.pat("achieve(P, knowref(A, B, E, O))", &mut sc);
                for s in self.query(&q, &empty)? {
                    heads.push(Head::Belief(Bucket::UserModel, s.apply(&h)));
                }
            }
            4 if self.state.cstate.is_none() => {
                let goal = self.pat("bmb(system, user, goal(A1, G))", &mut sc);
                let plan = self.pat("bmb(system, user, plan(A1, P, G))", &mut sc);
                let shape = self.pat("knowref(A2, A1, E, O)", &mut sc);
                let g = self.pat("G", &mut sc);
                let err = self.pat("bel(system, bel(A3, error(P, N)))", &mut sc);
                let (a1, a2, p) = (self.pat("A1", &mut sc), self.pat("A2", &mut sc), self.pat("P", &mut sc));
                for s1 in self.query(&goal, &empty)? {
                    for s2 in self.query(&plan, &s1)? {
                        let Some(s3) = unify(&g, &shape, &s2) else { continue };
                        if !distinct_agents(&s3.apply(&a1), &s3.apply(&a2)) {
                            continue;
                        }
                        for s4 in self.query(&err, &s3)? {
                            if let Some(name) = s4.apply(&p).const_name() {
                                heads.push(Head::CState(name.into(), s4.apply(&g)));
                            }
                        }
                    }
                }
            }
            5 => {
                if let Some(c) = &self.state.cstate {
                    let q = self.pat(&format!("bmb(system, user, bel(A1, error({}, N)))", c.plan), &mut sc);
                    let h = self.pat(&format!("error({}, N)", c.plan), &mut sc);
                    for s in self.query(&q, &empty)? {
                        heads.push(Head::Belief(Bucket::CommonGround, s.apply(&h)));
                    }
                }
            }
            6 => {
                if let Some(c) = &self.state.cstate {
                    let err = self.pat(&format!("bmb(system, user, error({}, N))", c.plan), &mut sc);
                    let rep = self.pat(&format!("bmb(system, user, bel(A1, replace({}, NP)))", c.plan), &mut sc);
                    let (a1, np) = (self.pat("A1", &mut sc), self.pat("NP", &mut sc));
                    let h = self.pat(&format!("replace({}, NP)", c.plan), &mut sc);
                    for s1 in self.query(&err, &empty)? {
                        for s2 in self.query(&rep, &s1)? {
                            let Some(new_plan) = s2.apply(&np).const_name().map(Sym::from) else {
                                continue;
                            };
                            heads.push(Head::Replace {
                                agent: s2.apply(&a1),
                                new_plan,
                                prop: s2.apply(&h),
                            });
                        }
                    }
                }
            }
            7 => {
                if let Some((plan, goal)) = self.current() {
                    let h = Term::compound("achieve", vec![plan_const(&plan), goal]);
                    let (a1, a2) = (self.pat("A1", &mut sc), self.pat("A2", &mut sc));
                    let theirs = Bucket::CommonGround.wrap(&Term::compound("bel", vec![a1.clone(), h.clone()]));
                    let mine = Bucket::Private.wrap(&Term::compound("bel", vec![a2.clone(), h.clone()]));
                    for s1 in self.query(&theirs, &empty)? {
                        for s2 in self.query(&mine, &s1)? {
                            if distinct_agents(&s2.apply(&a1), &s2.apply(&a2)) {
                                heads.push(Head::Belief(Bucket::CommonGround, s2.apply(&h)));
                            }
                        }
                    }
                }
            }
            8 => {
                if let Some(c) = &self.state.cstate {
                    let q = self.pat(&format!("bel(system, error({}, N))", c.plan), &mut sc);
                    let h = self.pat(&format!("bel(user, bel(system, error({}, N)))", c.plan), &mut sc);
                    for s in self.query(&q, &empty)? {
                        heads.push(Head::Goal(s.apply(&h)));
                    }
                }
            }
            9 => {
                if let Some(c) = &self.state.cstate {
                    let q = self.pat(&format!("bmb(system, user, error({}, N))", c.plan), &mut sc);
                    let h = self.pat(
                        &format!("bel(user, bel(system, replace({}, NewPlan)))", c.plan),
                        &mut sc,
                    );
                    if !self.query(&q, &empty)?.is_empty() {
                        heads.push(Head::Goal(h));
                    }
                }
            }
            10 => {
                if let Some((plan, goal)) = self.current() {
                    let a = Term::compound("achieve", vec![plan_const(&plan), goal]);
                    let mine = Bucket::Private.wrap(&a);
                    let theirs = Bucket::UserModel.wrap(&a);
                    let h = Term::compound(
                        "bel",
                        vec![
                            Term::constant(USER),
                            Term::compound("bel", vec![Term::constant(SYSTEM), a]),
                        ],
                    );
                    for s1 in self.query(&mine, &empty)? {
                        for s2 in self.query(&theirs, &s1)? {
                            heads.push(Head::Goal(s2.apply(&h)));
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(heads)
    }

    /// Applies one head if it is new. Returns whether it was.
    fn fire(&mut self, rule: u8, head: Head) -> Result<bool> {
        let key = match &head {
            Head::Belief(_, t) | Head::Goal(t) => skolemize(t),
            Head::CState(p, _) => Term::Const(p.clone()),
            Head::Replace { prop, .. } => prop.clone(),
        };
        if !self.fired.insert((rule, key)) {
            return Ok(false);
        }
        match head {
            Head::Belief(bucket, prop) => {
                if self.state.base.bucket(bucket).contains(&prop) {
                    return Ok(false);
                }
                self.events.push(Event::RuleFired {
                    rule,
                    head: bucket.wrap(&prop),
                });
                self.adopt(prop.clone(), bucket)?;
                if rule == 5 {
                    self.retract_achievements(&prop.args()[0].clone());
                }
                Ok(true)
            }
            Head::CState(plan, goal) => {
                if self.state.cstate.is_some() {
                    return Ok(false);
                }
                let c = CState {
                    plan,
                    goal: unskolemize(&goal, &self.ids),
                };
                self.events.push(Event::RuleFired {
                    rule,
                    head: Term::compound(
                        "cstate",
                        vec![Term::constant(SYSTEM), Term::constant(USER), plan_const(&c.plan), goal],
                    ),
                });
                self.events.push(Event::CState(c.clone()));
                self.state.cstate = Some(c);
                Ok(true)
            }
            Head::Goal(goal) => {
                let stored = skolemize(&goal);
                if self.state.base.goals.contains(&stored) {
                    return Ok(false);
                }
                self.events.push(Event::RuleFired {
                    rule,
                    head: Bucket::Goals.wrap(&stored),
                });
                self.state.base.assert_prop(stored.clone(), Bucket::Goals)?;
                self.events.push(Event::GoalAdopted(stored));
                self.state.agenda.push(goal);
                Ok(true)
            }
            Head::Replace { agent, new_plan, prop } => {
                if self.state.base.common_ground.contains(&prop) {
                    return Ok(false);
                }
                self.events.push(Event::RuleFired {
                    rule,
                    head: Bucket::CommonGround.wrap(&prop),
                });
                self.adopt(prop, Bucket::CommonGround)?;
                self.adopt_replacement(&agent, &new_plan)?;
                Ok(true)
            }
        }
    }

    fn retract_achievements(&mut self, plan: &Term) {
        let pattern = Term::compound("achieve", vec![plan.clone(), self.ids.fresh_var_term("G")]);
        for bucket in [Bucket::Private, Bucket::UserModel] {
            for prop in self.state.base.retract_matching(&pattern, bucket) {
                self.events.push(Event::BeliefRetracted { bucket, prop });
            }
        }
    }

    /// The replacement becomes the plan under collaboration, judged afresh.
    fn adopt_replacement(&mut self, agent: &Term, new_plan: &Sym) -> Result<()> {
        let Some(c) = self.state.cstate.clone() else {
            return Ok(());
        };
        let plan = self
            .state
            .plans
            .get(new_plan)
            .cloned()
            .ok_or_else(|| Error::UnknownPlan(new_plan.to_string()))?;
        let eval = self
            .planner()
            .evaluate(&plan, persp_of(agent), EvaluationMode::STRICT)?;
        self.emit_trace(eval.trace.clone());
        let mut goal = c.goal.clone();
        let judgment = match &eval.result {
            EvaluationResult::Valid(s) => {
                let mut bound = plan.clone();
                bound.bindings = s.normalized();
                if let Some(referent) = bound.referent() {
                    if let Some(u) = unify(&goal.args()[3], &referent, &Substitution::new()) {
                        goal = u.apply(&goal);
                    }
                }
                self.state.plans.insert(new_plan.clone(), bound);
                Judgment::Achieve
            }
            EvaluationResult::Invalid(node) => Judgment::Error(node.clone()),
        };
        let next = CState {
            plan: new_plan.clone(),
            goal: c.goal,
        };
        self.events.push(Event::CState(next.clone()));
        self.state.cstate = Some(next);
        self.record_contribution(agent, new_plan, &goal, &judgment)
    }

    fn run_rules(&mut self, rules: &[u8]) -> Result<bool> {
        let mut any = false;
        loop {
            let mut changed = false;
            for &r in rules {
                for head in self.rule_heads(r)? {
                    changed |= self.fire(r, head)?;
                }
            }
            if !changed {
                return Ok(any);
            }
            any = true;
        }
    }

    pub fn apply_belief_rules(&mut self) -> Result<bool> {
        self.run_rules(&[1, 2, 3, 4, 5, 6, 7])
    }

    /// Belief rules then goal rules, until neither adds anything.
    pub fn apply_rules(&mut self) -> Result<()> {
        loop {
            let a = self.apply_belief_rules()?;
            let b = self.run_rules(&[8, 9, 10])?;
            if !a && !b {
                return Ok(());
            }
        }
    }

    /// Understands the user's turn, one observed action set at a time.
    pub fn hearer_step(&mut self, sets: &[Vec<Term>]) -> Result<()> {
        for obs in sets {
            for a in obs {
                self.ids.observe_constants(a);
            }
            self.events.push(Event::Observe(obs.clone()));
            let ctx = InferenceContext {
                current_plan: self.state.cstate.as_ref().map(|c| c.plan.clone()),
            };
            let inf = self
                .planner()
                .infer(obs, Perspective::UserSpeaker, EvaluationMode::CLARIFICATION, &ctx)?;
            for (_, eval) in &inf.candidates {
                self.emit_trace(eval.trace.clone());
            }
            let user = Term::constant(USER);
            match inf.result {
                InferenceResult::Understood { plan, created } => {
                    self.events.push(Event::Inferred {
                        plan: plan.id.clone(),
                        outcome: "understood".into(),
                    });
                    for c in created {
                        self.register(c);
                    }
                    let goal = plan.goal().ok_or(Error::NotUnderstood(display_list(obs)))?;
                    let id = plan.id.clone();
                    self.register(plan);
                    self.record_contribution(&user, &id, &goal, &Judgment::Achieve)?;
                }
                InferenceResult::ErrorAt { plan, node } if plan.root_content().is_functor("refer", 2) => {
                    self.events.push(Event::Inferred {
                        plan: plan.id.clone(),
                        outcome: format!("error {node}"),
                    });
                    let goal = plan.goal().ok_or(Error::NotUnderstood(display_list(obs)))?;
                    let id = plan.id.clone();
                    self.register(plan);
                    self.record_contribution(&user, &id, &goal, &Judgment::Error(node))?;
                }
                _ => return Err(Error::NotUnderstood(display_list(obs))),
            }
            self.apply_belief_rules()?;
        }
        self.apply_rules()
    }

    /// Plans for each pending goal in turn; returns the surface actions.
    pub fn speaker_step(&mut self) -> Result<Vec<Term>> {
        let mut uttered = Vec::new();
        while !self.state.agenda.is_empty() {
            let goal = self.state.agenda.remove(0);
            let effect = Term::compound(
                "bel",
                vec![
                    Term::constant(USER),
                    Term::compound("goal", vec![Term::constant(SYSTEM), goal.clone()]),
                ],
            );
            let built = match self.planner().construct(&effect, Perspective::SystemSpeaker) {
                Ok(b) => b,
                Err(e @ Error::NoPlan(_)) => {
                    self.events.push(Event::GoalDropped {
                        goal: skolemize(&goal),
                        reason: e.to_string(),
                    });
                    continue;
                }
                Err(e) => return Err(e),
            };
            self.emit_trace(built.trace);
            for c in built.created {
                self.register(c);
            }
            let plan = built.plan;
            let id = plan.id.clone();
            let achieved = plan.goal().unwrap_or(goal);
            self.events.push(Event::Constructed {
                plan: id.clone(),
                schema: plan.root().schema.clone().unwrap_or_else(|| "?".into()),
                goal: skolemize(&achieved),
            });
            uttered.extend(plan.yield_at(0));
            self.register(plan);
            self.record_contribution(&Term::constant(SYSTEM), &id, &achieved, &Judgment::Achieve)?;
            self.apply_rules()?;
        }
        self.events.push(Event::Uttered(uttered.clone()));
        Ok(uttered)
    }
}
