//! Random small worlds, a brute-force description oracle, and the checks
//! shared by the property and acceptance suites.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;

use collab_ref::belief::{BeliefBase, Bucket, Perspective};
use collab_ref::plan::PlanDerivation;
use collab_ref::planner::{
    EvaluationMode, InferenceContext, InferenceResult, PlanRegistry, Planner, DEFAULT_MAX_DEPTH,
};
use collab_ref::scenario::load_scenario;
use collab_ref::schema::SchemaLibrary;
use collab_ref::sim::{run_dialogue, RunOptions, Transcript};
use collab_ref::term::{parse_term, parse_terms_in, IdGen, Scope, Term};
use collab_ref::Error;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.scenario"))
}

pub fn run_bundled(name: &str) -> Transcript {
    let ids = IdGen::new();
    let sc = load_scenario(&scenario_path(name), &ids).expect("bundled scenario loads");
    run_dialogue(&sc, ids, RunOptions::default())
}

const CATEGORIES: [&str; 3] = ["cup", "box", "ball"];
const ABSOLUTE: [(&str, [&str; 2]); 3] = [
    ("colour", ["red", "blue"]),
    ("size", ["big", "small"]),
    ("assessment", ["weird", "plain"]),
];
const RELATIONS: [&str; 2] = ["on", "near"];

/// Objects `a1..an`, one category each, some absolute properties and
/// relations, all mutually believed.
#[derive(Clone, Debug)]
pub struct World {
    pub objects: Vec<String>,
    /// (predicate, subject, value or other object)
    pub facts: Vec<(String, String, String)>,
    pub modifier_preds: Vec<String>,
    pub rel_preds: Vec<String>,
    pub pick_order: Vec<String>,
}

impl World {
    pub fn random(rng: &mut impl Rng) -> World {
        let n = rng.gen_range(1..=5);
        let objects: Vec<String> = (1..=n).map(|i| format!("a{i}")).collect();
        let mut facts = Vec::new();
        for o in &objects {
            let c = CATEGORIES[rng.gen_range(0..CATEGORIES.len())];
            facts.push(("category".to_string(), o.clone(), c.to_string()));
        }
        let k = rng.gen_range(0..=ABSOLUTE.len());
        let modifier_preds: Vec<String> = ABSOLUTE[..k].iter().map(|(p, _)| p.to_string()).collect();
        for (p, values) in &ABSOLUTE[..k] {
            for o in &objects {
                if rng.gen_bool(0.8) {
                    let v = values[rng.gen_range(0..2)];
                    facts.push((p.to_string(), o.clone(), v.to_string()));
                }
            }
        }
        let r = rng.gen_range(0..=RELATIONS.len());
        let rel_preds: Vec<String> = RELATIONS[..r].iter().map(|p| p.to_string()).collect();
        for p in &rel_preds {
            for a in &objects {
                for b in &objects {
                    if a != b && rng.gen_bool(0.3) {
                        facts.push((p.clone(), a.clone(), b.clone()));
                    }
                }
            }
        }
        let mut pick_order = objects.clone();
        pick_order.shuffle(rng);
        World {
            objects,
            facts,
            modifier_preds,
            rel_preds,
            pick_order,
        }
    }

    pub fn base(&self, ids: &IdGen) -> BeliefBase {
        let mut b = BeliefBase::new();
        for (p, a, v) in &self.facts {
            let t = parse_term(&format!("{p}({a}, {v})"), ids).unwrap();
            b.assert_prop(t, Bucket::CommonGround).unwrap();
        }
        b.world = self.objects.iter().map(|o| Term::constant(o)).collect();
        b.modifier_preds = self.modifier_preds.iter().map(|p| p.as_str().into()).collect();
        b.modifier_rel_preds = self.rel_preds.iter().map(|p| p.as_str().into()).collect();
        b.pick_order = self.pick_order.iter().map(|o| Term::constant(o)).collect();
        b
    }

    fn holds(&self, p: &str, a: &str, v: &str) -> bool {
        self.facts.iter().any(|(q, x, y)| q == p && x == a && y == v)
    }

    fn mask(&self, f: impl Fn(&str) -> bool) -> u32 {
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, o)| f(o))
            .fold(0, |m, (i, _)| m | (1 << i))
    }

    fn index(&self, o: &str) -> usize {
        self.objects.iter().position(|x| x == o).unwrap()
    }

    /// Fewest surface actions in any description of `target`, found by
    /// exhaustive uniform-cost search over candidate sets.
    pub fn min_actions(&self, target: &str, max_depth: usize) -> Option<usize> {
        self.min_from(target, 0, max_depth)
    }

    fn min_from(&self, target: &str, depth: usize, max_depth: usize) -> Option<usize> {
        let goal = 1u32 << self.index(target);
        // state: candidate mask and the relations already used
        let mut best: BTreeMap<(u32, u32), usize> = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        for (p, a, c) in &self.facts {
            if p == "category" && a == target {
                let m = self.mask(|x| self.holds("category", x, c));
                heap.push(Reverse((2usize, m, 0u32)));
            }
        }
        let nested: Vec<Option<usize>> = self
            .objects
            .iter()
            .map(|o| {
                if depth < max_depth {
                    self.min_from(o, depth + 1, max_depth)
                } else {
                    None
                }
            })
            .collect();
        while let Some(Reverse((cost, m, used))) = heap.pop() {
            if m == goal {
                return Some(cost);
            }
            if best.get(&(m, used)).is_some_and(|&c| c <= cost) {
                continue;
            }
            best.insert((m, used), cost);
            for p in &self.modifier_preds {
                for (q, a, v) in &self.facts {
                    if q == p && a == target {
                        let m2 = m & self.mask(|x| self.holds(p, x, v));
                        heap.push(Reverse((cost + 1, m2, used)));
                    }
                }
            }
            for (ri, r) in self.rel_preds.iter().enumerate() {
                if used & (1 << ri) != 0 {
                    continue;
                }
                for (q, a, other) in &self.facts {
                    if q != r || a != target {
                        continue;
                    }
                    let Some(sub) = nested[self.index(other)] else { continue };
                    let m2 = m & self.mask(|x| self.holds(r, x, other));
                    heap.push(Reverse((cost + 1 + sub, m2, used | (1 << ri))));
                }
            }
        }
        None
    }

    /// A user description of some entity: a category, a few absolute
    /// properties, and maybe a relation to another described entity.
    pub fn random_description(&self, rng: &mut impl Rng) -> String {
        let mut acts = vec!["s-refer(entity1)".to_string()];
        let c = if rng.gen_bool(0.1) {
            "unicorn"
        } else {
            CATEGORIES[rng.gen_range(0..CATEGORIES.len())]
        };
        acts.push(format!("s-attrib(entity1, lambda(X, category(X, {c})))"));
        for p in &self.modifier_preds {
            if rng.gen_bool(0.4) {
                let values = ABSOLUTE.iter().find(|(q, _)| q == p).unwrap().1;
                let v = values[rng.gen_range(0..2)];
                acts.push(format!("s-attrib(entity1, lambda(X, {p}(X, {v})))"));
            }
        }
        if !self.rel_preds.is_empty() && rng.gen_bool(0.3) {
            let r = &self.rel_preds[rng.gen_range(0..self.rel_preds.len())];
            let c2 = CATEGORIES[rng.gen_range(0..CATEGORIES.len())];
            acts.push(format!("s-attrib-rel(entity1, entity2, lambda(X, Y, {r}(X, Y)))"));
            acts.push("s-refer(entity2)".into());
            acts.push(format!("s-attrib(entity2, lambda(X, category(X, {c2})))"));
        }
        acts.join(", ")
    }
}

pub fn observed(src: &str, ids: &IdGen) -> Vec<Term> {
    let acts = parse_terms_in(src, ids, &mut Scope::new()).unwrap();
    for a in &acts {
        ids.observe_constants(a);
    }
    acts
}

fn list_len(t: &Term) -> Option<usize> {
    t.as_list().map(|l| l.len())
}

/// How an invalid user description failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Failure {
    Under,
    Over,
}

/// Infers a user description and, when it is invalid, checks that the
/// error is either underconstrained or overconstrained and that exactly
/// the matching clarification is constructible.
pub fn check_dichotomy(world: &World, description: &str) -> Result<Option<Failure>, String> {
    let ids = IdGen::new();
    let lib = SchemaLibrary::builtin(&ids);
    let mut base = world.base(&ids);
    let obs = observed(description, &ids);
    let mut plans = PlanRegistry::new();
    let (plan, node, failed) = {
        let planner = Planner::new(&lib, &base, &ids, &plans);
        let inf = planner
            .infer(
                &obs,
                Perspective::UserSpeaker,
                EvaluationMode::CLARIFICATION,
                &InferenceContext::default(),
            )
            .map_err(|e| e.to_string())?;
        match inf.result {
            InferenceResult::ErrorAt { plan, node } => {
                let failed = inf.candidates[0]
                    .1
                    .failed
                    .clone()
                    .ok_or("invalid without a failed node")?;
                (plan, node, failed)
            }
            _ => return Ok(None),
        }
    };
    let yield_empty = plan.yield_of(&node).map_err(|e| e.to_string())?.is_empty();
    let error_node = plan.node(&node).map_err(|e| e.to_string())?;
    let many_left = error_node.schema.as_deref() == Some("modifiers-terminate")
        && list_len(&plan.content_of(&node).unwrap().args()[2]).is_some_and(|n| n > 1);
    let failed_content = plan.content_of(&failed).map_err(|e| e.to_string())?;
    let zero_solutions = ["subset", "bmb"].iter().any(|f| failed_content.functor() == Some(*f));
    if yield_empty != many_left {
        return Err(format!(
            "{description}: empty yield {yield_empty} but more than one candidate {many_left}"
        ));
    }
    if !yield_empty != zero_solutions {
        return Err(format!(
            "{description}: nonempty yield {} but failed at {failed_content}",
            !yield_empty
        ));
    }
    let p = plan.id.clone();
    let error = Term::compound("error", vec![Term::Const(p.clone()), Term::Const(node.clone())]);
    base.assert_prop(error.clone(), Bucket::Private).unwrap();
    plans.insert(p, plan);
    let effect = parse_term(
        &format!("bel(user, goal(system, bel(user, bel(system, {error}))))"),
        &ids,
    )
    .unwrap();
    let constructible = |drop: &str| -> Result<bool, String> {
        let lib = lib.without(&[drop]);
        match Planner::new(&lib, &base, &ids, &plans).construct(&effect, Perspective::SystemSpeaker) {
            Ok(_) => Ok(true),
            Err(Error::NoPlan(_)) => Ok(false),
            Err(e) => Err(e.to_string()),
        }
    };
    let postpone = constructible("reject-plan")?;
    let reject = constructible("postpone-plan")?;
    if postpone != yield_empty || reject == yield_empty {
        return Err(format!(
            "{description}: postpone constructible {postpone}, reject constructible {reject}, empty yield {yield_empty}"
        ));
    }
    Ok(Some(if yield_empty { Failure::Under } else { Failure::Over }))
}

/// Every modifier narrows the candidates and the description ends on
/// exactly the referent.
fn candidates_narrow(plan: &PlanDerivation) -> Result<(), String> {
    for i in 0..plan.nodes.len() {
        let schema = plan.nodes[i].schema.as_deref().unwrap_or("");
        let c = plan.content_at(i);
        let args = c.args();
        match schema {
            "modifier-absolute" | "modifier-relative" => {
                let (Some(cand), Some(new)) = (args[2].as_list(), args[3].as_list()) else {
                    return Err(format!("unbound candidates in {c}"));
                };
                if new.iter().any(|x| !cand.contains(x)) {
                    return Err(format!("candidates grew in {c}"));
                }
            }
            "modifiers-terminate" if args[2].as_list().map(|l| l.to_vec()) != Some(vec![args[1].clone()]) => {
                return Err(format!("terminated on {c}"));
            }
            _ => {}
        }
    }
    Ok(())
}

/// Builds a description of `target` and checks it against evaluation,
/// inference and the oracle. Returns the number of surface actions.
pub fn check_construction(world: &World, target: &str) -> Result<Option<usize>, String> {
    let ids = IdGen::new();
    let lib = SchemaLibrary::builtin(&ids);
    let base = world.base(&ids);
    let plans = PlanRegistry::new();
    let planner = Planner::new(&lib, &base, &ids, &plans);
    let oracle = world.min_actions(target, DEFAULT_MAX_DEPTH);
    let goal = parse_term(
        &format!("bel(user, goal(system, knowref(user, system, E, {target})))"),
        &ids,
    )
    .unwrap();
    let built = match planner.construct(&goal, Perspective::SystemSpeaker) {
        Ok(b) => b,
        Err(Error::NoPlan(_)) => {
            return match oracle {
                None => Ok(None),
                Some(n) => Err(format!("no plan for {target} but the oracle found {n} actions")),
            }
        }
        Err(e) => return Err(e.to_string()),
    };
    let plan = built.plan;
    let eval = planner
        .evaluate(&plan, Perspective::SystemSpeaker, EvaluationMode::STRICT)
        .map_err(|e| e.to_string())?;
    if !eval.is_valid() {
        return Err(format!(
            "constructed plan for {target} is invalid at {:?}",
            eval.error_node()
        ));
    }
    let mut bound = plan.clone();
    bound.bindings = eval.bindings.normalized();
    if bound.referent() != Some(Term::constant(target)) {
        return Err(format!("plan refers to {:?}, not {target}", bound.referent()));
    }
    candidates_narrow(&bound)?;
    if let Some(n) = plan
        .nodes
        .iter()
        .find(|n| SchemaLibrary::is_abstract(n.content.functor().unwrap_or_default()))
    {
        return Err(format!("abstract node {} in a finished plan", n.content));
    }
    let said = plan.yield_at(0);
    let inf = planner
        .infer(
            &said,
            Perspective::SystemSpeaker,
            EvaluationMode::STRICT,
            &InferenceContext::default(),
        )
        .map_err(|e| e.to_string())?;
    match &inf.result {
        InferenceResult::Understood { plan: recognized, .. } if recognized.isomorphic(&plan) => {}
        other => {
            return Err(format!(
                "inferring {} gave {other:?}",
                collab_ref::term::display_list(&said)
            ))
        }
    }
    if oracle != Some(said.len()) {
        return Err(format!("{target}: {} actions, oracle {oracle:?}", said.len()));
    }
    Ok(Some(said.len()))
}

/// Distinct rule ids in first-firing order.
pub fn first_firings(rules: &[u8]) -> Vec<u8> {
    let mut seen = HashSet::new();
    rules.iter().copied().filter(|r| seen.insert(*r)).collect()
}
