//! One pass/fail line per acceptance criterion.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use collab_ref::belief::Perspective;
use collab_ref::collab::Agent;
use collab_ref::plan::same_multiset;
use collab_ref::planner::{EvaluationMode, InferenceContext, InferenceResult, Planner};
use collab_ref::scenario::{load_scenario, Scenario, Turn};
use collab_ref::schema::SchemaLibrary;
use collab_ref::term::{parse_terms_in, unify, IdGen, Scope, Substitution, Term};

use common::{check_construction, check_dichotomy, first_firings, run_bundled, scenario_path, Failure, World};

const GOLDEN: &str = include_str!("golden/weird-creature.log");
const SEEDS: u64 = 250;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn weird() -> (Scenario, IdGen) {
    let ids = IdGen::new();
    let sc = load_scenario(&scenario_path("weird-creature"), &ids).unwrap();
    (sc, ids)
}

fn user_sets(sc: &Scenario, turn: usize) -> Vec<Vec<Term>> {
    match &sc.turns[turn] {
        Turn::User(sets) => sets.clone(),
        Turn::System(_) => panic!("turn {turn} is the system's"),
    }
}

fn golden_trace() -> Outcome {
    let start = Instant::now();
    let t = run_bundled("weird-creature");
    let elapsed = start.elapsed();
    ensure(t.ok(), || t.render())?;
    ensure(t.system_turns.len() == 2, || {
        format!("{} system turns", t.system_turns.len())
    })?;
    let ids = IdGen::new();
    let said = &t.system_turns[0];
    ensure(said.len() == 2, || format!("turn 2 said {said:?}"))?;
    let postpone = parse_terms_in("s-postpone(P, [])", &ids, &mut Scope::new()).unwrap();
    ensure(unify(&postpone[0], &said[0], &Substitution::new()).is_some(), || {
        format!("turn 2 began {}", said[0])
    })?;
    ensure(said[1].is_functor("s-actions", 2), || {
        format!("turn 2 continued {}", said[1])
    })?;
    let bundle = said[1].args()[1].as_list().unwrap_or_default().to_vec();
    let refer = bundle
        .iter()
        .find(|a| a.is_functor("s-refer", 1))
        .ok_or("no embedded refer")?;
    let e2 = refer.args()[0].to_string();
    let wanted = parse_terms_in(
        &format!(
            "s-attrib-rel(entity1, {e2}, lambda(X, Y, in(X, Y))), s-refer({e2}), \
             s-attrib({e2}, lambda(X, category(X, corner)))"
        ),
        &ids,
        &mut Scope::new(),
    )
    .unwrap();
    ensure(same_multiset(&bundle, &wanted), || format!("bundle {}", said[1]))?;
    let last = &t.system_turns[1];
    ensure(last.len() == 1 && last[0].is_functor("s-accept", 1), || {
        format!("turn 4 said {last:?}")
    })?;
    let achieve = t.final_achieve.as_ref().map(|a| a.to_string()).unwrap_or_default();
    ensure(
        achieve.starts_with("bmb(system, user, achieve(")
            && achieve.ends_with(", knowref(system, user, entity1, antenna1)))"),
        || format!("final state {achieve:?}"),
    )?;
    ensure(t.render() == GOLDEN, || {
        "transcript differs from the checked-in log".into()
    })?;
    ensure(elapsed.as_secs_f64() < 1.0, || format!("took {elapsed:?}"))?;
    Ok(format!("postpone + in-the-corner, accept, antenna1; {elapsed:.2?}"))
}

fn first_presentation() -> Outcome {
    let (sc, ids) = weird();
    let base = sc.belief_base().unwrap();
    let lib = SchemaLibrary::builtin(&ids);
    let plans = Default::default();
    let obs = &user_sets(&sc, 0)[0];
    for a in obs {
        ids.observe_constants(a);
    }
    let inf = Planner::new(&lib, &base, &ids, &plans)
        .infer(
            obs,
            Perspective::UserSpeaker,
            EvaluationMode::CLARIFICATION,
            &InferenceContext::default(),
        )
        .map_err(|e| e.to_string())?;
    ensure(inf.parsed == 1, || format!("{} derivations", inf.parsed))?;
    let InferenceResult::ErrorAt { plan, node } = &inf.result else {
        return Err(format!("inferred {:?}", inf.result));
    };
    let schema = plan.node(node).unwrap().schema.clone().unwrap_or_default();
    ensure(&*schema == "modifiers-terminate", || format!("invalid at {schema}"))?;
    let head = plan
        .nodes
        .iter()
        .position(|n| n.schema.as_deref() == Some("headnoun"))
        .ok_or("no headnoun")?;
    let cand = plan.content_at(head).args()[2].clone();
    ensure(cand.to_string() == "[antenna1, fern1]", || format!("candidates {cand}"))?;
    Ok(format!("1 derivation, invalid at {schema}, candidates {cand}"))
}

fn disambiguation() -> Outcome {
    let (sc, ids) = weird();
    let base = sc.belief_base().unwrap();
    let lib = SchemaLibrary::builtin(&ids);
    let mut agent = Agent::with_ids(base, lib, ids);
    let err = |e: collab_ref::Error| e.to_string();
    agent.hearer_step(&user_sets(&sc, 0)).map_err(err)?;
    agent.speaker_step().map_err(err)?;
    let current = agent.state.cstate.clone().ok_or("no plan under discussion")?.plan;
    let resolve = |set: &Vec<Term>| -> Vec<Term> {
        set.iter()
            .map(|a| {
                let text = a.to_string().replace("(current,", &format!("({current},"));
                parse_terms_in(&text, &agent.ids, &mut Scope::new()).unwrap().remove(0)
            })
            .collect()
    };
    let sets = user_sets(&sc, 2);
    let reject = resolve(&sets[0]);
    let bundle = resolve(&sets[1]);
    agent.hearer_step(&[reject]).map_err(err)?;
    let ctx = InferenceContext {
        current_plan: Some(current.clone()),
    };
    let planner = Planner::new(&agent.lib, &agent.state.base, &agent.ids, &agent.state.plans);
    let inf = planner
        .infer(&bundle, Perspective::UserSpeaker, EvaluationMode::CLARIFICATION, &ctx)
        .map_err(err)?;
    ensure(inf.parsed == 2 && inf.candidates.len() == 2, || {
        format!("{} parses", inf.parsed)
    })?;
    let schema_of = |p: &collab_ref::plan::PlanDerivation| p.root().schema.clone().unwrap_or_default();
    let (expand, eval) = inf
        .candidates
        .iter()
        .find(|(p, _)| &*schema_of(p) == "expand-plan")
        .ok_or("no expand-plan parse")?;
    ensure(!eval.is_valid(), || "expand-plan evaluated valid".into())?;
    let failed = expand.content_of(eval.failed.as_deref().unwrap_or("")).map_err(err)?;
    ensure(
        failed.is_functor("=", 2) && failed.args()[1].is_functor("modifiers-terminate", 3),
        || format!("expand-plan failed at {failed}"),
    )?;
    let InferenceResult::Understood { plan, .. } = &inf.result else {
        return Err(format!("inferred {:?}", inf.result));
    };
    ensure(&*schema_of(plan) == "replace-plan", || {
        format!("understood {}", schema_of(plan))
    })?;
    Ok("2 parses; expand-plan fails its terminate constraint; replace-plan understood".into())
}

fn dichotomy() -> Outcome {
    let (mut under, mut over, mut valid) = (0, 0, 0);
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = World::random(&mut rng);
        let d = w.random_description(&mut rng);
        match check_dichotomy(&w, &d).map_err(|e| format!("seed {seed}: {e}"))? {
            Some(Failure::Under) => under += 1,
            Some(Failure::Over) => over += 1,
            None => valid += 1,
        }
    }
    ensure(under > 0 && over > 0, || {
        format!("one-sided sample: {under} under, {over} over")
    })?;
    Ok(format!(
        "{SEEDS} scenarios: {under} underconstrained, {over} overconstrained, {valid} other; 0 violations"
    ))
}

fn soundness() -> Outcome {
    let start = Instant::now();
    let (mut built, mut impossible) = (0, 0);
    for seed in 0..SEEDS {
        let w = World::random(&mut ChaCha8Rng::seed_from_u64(seed));
        for o in &w.objects {
            match check_construction(&w, o).map_err(|e| format!("seed {seed}: {e}"))? {
                Some(_) => built += 1,
                None => impossible += 1,
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed.as_secs_f64() < 60.0, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{built} plans valid, round-tripped and minimal; {impossible} targets indescribable per oracle; {elapsed:.1?}"
    ))
}

fn rule_trace() -> Outcome {
    let t = run_bundled("weird-creature");
    let groups: Vec<Vec<u8>> = t.rule_groups().iter().map(|g| first_firings(g)).collect();
    let expected: Vec<Vec<u8>> = vec![
        vec![1, 3, 4, 8],
        vec![1, 2, 5, 9],
        vec![1, 2, 6],
        vec![1, 2, 5],
        vec![1, 2, 6, 3, 10],
        vec![1, 2, 7],
    ];
    ensure(groups == expected, || format!("groups {groups:?}"))?;
    let rules = |text: &str| -> Vec<String> {
        text.lines()
            .filter(|l| l.starts_with("rule "))
            .map(String::from)
            .collect()
    };
    let fired = rules(&t.render());
    ensure(fired == rules(GOLDEN), || {
        "rule firings differ from the checked-in log".into()
    })?;
    Ok(format!("{groups:?}, {} firings match the log", fired.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        ("golden end-to-end trace", golden_trace),
        ("first presentation fails at termination", first_presentation),
        ("clarification disambiguation", disambiguation),
        ("error dichotomy", dichotomy),
        ("construct/evaluate soundness, round trip, minimality", soundness),
        ("rule-engine trace equivalence", rule_trace),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
