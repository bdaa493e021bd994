//! Replays a scenario: the user's side is scripted, the system's side is
//! the agent.

use std::fmt::Write as _;

use crate::belief::{Bucket, SYSTEM, USER};
use crate::collab::{Agent, Event};
use crate::error::{Error, Result};
use crate::planner::DEFAULT_MAX_DEPTH;
use crate::scenario::{Scenario, Turn};
use crate::schema::SchemaLibrary;
use crate::term::{display_list, unify, IdGen, Substitution, Sym, Term};

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub trace: bool,
    pub max_depth: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            trace: false,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

#[derive(Debug, Default)]
pub struct Transcript {
    pub name: String,
    pub events: Vec<Event>,
    /// What the system said, one entry per system turn.
    pub system_turns: Vec<Vec<Term>>,
    pub mismatches: Vec<String>,
    pub final_cstate: Option<Sym>,
    /// `bmb(system, user, achieve(...))` when one was reached.
    pub final_achieve: Option<Term>,
    pub fault: Option<Error>,
    /// Every registered plan, pretty-printed; filled when tracing.
    pub plans: Vec<String>,
}

impl Transcript {
    pub fn ok(&self) -> bool {
        self.fault.is_none() && self.mismatches.is_empty()
    }

    /// Rule ids fired between consecutive observe/construct events.
    pub fn rule_groups(&self) -> Vec<Vec<u8>> {
        let mut groups: Vec<Vec<u8>> = Vec::new();
        for e in &self.events {
            match e {
                Event::Observe(_) | Event::Constructed { .. } => groups.push(Vec::new()),
                Event::RuleFired { rule, .. } => {
                    if let Some(g) = groups.last_mut() {
                        g.push(*rule);
                    }
                }
                _ => {}
            }
        }
        groups
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {}", self.name);
        for e in &self.events {
            let _ = writeln!(out, "{e}");
        }
        for m in &self.mismatches {
            let _ = writeln!(out, "mismatch {m}");
        }
        if let Some(f) = &self.fault {
            let _ = writeln!(out, "fault {f}");
        }
        match &self.final_cstate {
            Some(p) => {
                let _ = writeln!(out, "final cstate {p}");
            }
            None => out.push_str("final cstate none\n"),
        }
        match &self.final_achieve {
            Some(a) => {
                let _ = writeln!(out, "final {a}");
            }
            None => out.push_str("final achieve none\n"),
        }
        for p in &self.plans {
            out.push_str(p);
            if !p.ends_with('\n') {
                out.push('\n');
            }
        }
        out
    }
}

/// Elementwise unification of the expectation with what was said.
fn matches_expectation(expected: &[Term], said: &[Term]) -> bool {
    if expected.len() != said.len() {
        return false;
    }
    let mut s = Substitution::new();
    for (e, a) in expected.iter().zip(said) {
        match unify(e, a, &s) {
            Some(next) => s = next,
            None => return false,
        }
    }
    true
}

/// Swaps the placeholder `current` for the plan under collaboration.
fn resolve_current(t: &Term, plan: Option<&Sym>) -> Result<Term> {
    Ok(match t {
        Term::Const(c) if &**c == "current" => {
            let p = plan.ok_or_else(|| Error::Validation("`current` used with no plan under discussion".into()))?;
            Term::Const(p.clone())
        }
        Term::Compound(f, args) => Term::Compound(
            f.clone(),
            args.iter().map(|a| resolve_current(a, plan)).collect::<Result<_>>()?,
        ),
        Term::Lambda(p, body) => Term::Lambda(p.clone(), Box::new(resolve_current(body, plan)?)),
        other => other.clone(),
    })
}

fn step(agent: &mut Agent, turn: &Turn, t: &mut Transcript) -> Result<()> {
    match turn {
        Turn::User(sets) => {
            let plan = agent.state.cstate.as_ref().map(|c| c.plan.clone());
            let sets = sets
                .iter()
                .map(|set| set.iter().map(|a| resolve_current(a, plan.as_ref())).collect())
                .collect::<Result<Vec<Vec<Term>>>>()?;
            agent.hearer_step(&sets)
        }
        Turn::System(expect) => {
            let said = agent.speaker_step()?;
            if let Some(expected) = expect {
                if !matches_expectation(expected, &said) {
                    t.mismatches.push(format!(
                        "turn {}: expected [{}] got [{}]",
                        t.system_turns.len() + 1,
                        display_list(expected),
                        display_list(&said)
                    ));
                }
            }
            t.system_turns.push(said);
            Ok(())
        }
    }
}

pub fn run_dialogue(sc: &Scenario, ids: IdGen, opts: RunOptions) -> Transcript {
    let mut t = Transcript {
        name: sc.name.clone(),
        ..Transcript::default()
    };
    let base = match sc.belief_base() {
        Ok(b) => b,
        Err(e) => {
            t.fault = Some(e);
            return t;
        }
    };
    for o in &sc.objects {
        ids.observe_constants(o);
    }
    let lib = SchemaLibrary::builtin(&ids);
    let mut agent = Agent::with_ids(base, lib, ids);
    agent.trace = opts.trace;
    agent.max_depth = opts.max_depth;
    for (i, turn) in sc.turns.iter().enumerate() {
        agent.events.push(Event::Turn {
            index: i + 1,
            speaker: match turn {
                Turn::User(_) => USER,
                Turn::System(_) => SYSTEM,
            },
        });
        let r = step(&mut agent, turn, &mut t);
        t.events.append(&mut agent.events);
        if let Err(e) = r {
            t.fault = Some(e);
            break;
        }
    }
    t.final_cstate = agent.state.cstate.as_ref().map(|c| c.plan.clone());
    t.final_achieve = final_achievement(&agent);
    if opts.trace {
        t.plans = agent.state.plans.values().map(|p| p.pretty(true)).collect();
    }
    t
}

/// The mutually believed achievement of a referring goal, preferring the
/// plan under collaboration.
fn final_achievement(agent: &Agent) -> Option<Term> {
    let cg = agent.state.base.bucket(Bucket::CommonGround);
    let mut found = cg
        .iter()
        .filter(|p| p.is_functor("achieve", 2) && p.args()[1].is_functor("knowref", 4));
    let pick = match &agent.state.cstate {
        Some(c) => cg
            .iter()
            .find(|p| p.is_functor("achieve", 2) && p.args()[0].const_name() == Some(&c.plan))
            .or_else(|| found.next()),
        None => found.next_back(),
    };
    pick.map(|p| Bucket::CommonGround.wrap(p))
}
