//! The system's belief base and query answering.
//!
//! Everything is answered by enumeration over the stored ground propositions
//! plus unification; there is no inference closure. Mutual belief is one
//! symmetric bucket seen from the system's side.

use std::collections::HashMap;
use std::fmt;

use indexmap::IndexSet;

use crate::error::{Error, Result};
use crate::term::{apply_lambda, sym, unify, IdGen, Substitution, Sym, Term, Var};

pub const SYSTEM: &str = "system";
pub const USER: &str = "user";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bucket {
    CommonGround,
    Private,
    UserModel,
    Goals,
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bucket::CommonGround => "common_ground",
            Bucket::Private => "private",
            Bucket::UserModel => "user_model",
            Bucket::Goals => "goals",
        })
    }
}

impl Bucket {
    /// The proposition as it reads from the system's vantage.
    pub fn wrap(self, prop: &Term) -> Term {
        let sys = Term::constant(SYSTEM);
        let usr = Term::constant(USER);
        match self {
            Bucket::CommonGround => Term::compound("bmb", vec![sys, usr, prop.clone()]),
            Bucket::Private => Term::compound("bel", vec![sys, prop.clone()]),
            Bucket::UserModel => Term::compound("bel", vec![sys, Term::compound("bel", vec![usr, prop.clone()])]),
            Bucket::Goals => Term::compound("goal", vec![sys, prop.clone()]),
        }
    }
}

/// Who is speaking in the plan being built or recognized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Perspective {
    SystemSpeaker,
    UserSpeaker,
}

impl Perspective {
    pub fn speaker(self) -> Term {
        match self {
            Perspective::SystemSpeaker => Term::constant(SYSTEM),
            Perspective::UserSpeaker => Term::constant(USER),
        }
    }

    pub fn hearer(self) -> Term {
        match self {
            Perspective::SystemSpeaker => Term::constant(USER),
            Perspective::UserSpeaker => Term::constant(SYSTEM),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BeliefBase {
    pub common_ground: IndexSet<Term>,
    pub private: IndexSet<Term>,
    pub user_model: IndexSet<Term>,
    pub goals: IndexSet<Term>,
    pub world: Vec<Term>,
    pub modifier_preds: Vec<Sym>,
    pub modifier_rel_preds: Vec<Sym>,
    /// Preference order for `pick-one`.
    pub pick_order: Vec<Term>,
}

pub fn is_skolem(name: &str) -> bool {
    name.starts_with('?')
}

/// Replaces free variables by `?Name` constants so the term can be stored.
pub fn skolemize(term: &Term) -> Term {
    let map: HashMap<Var, Term> = term
        .free_vars()
        .into_iter()
        .map(|v| {
            let c = Term::Const(sym(&format!("?{}", v.name)));
            (v, c)
        })
        .collect();
    term.replace_vars(&map)
}

/// Opens `?Name` constants back into fresh variables (one per name).
pub fn unskolemize(term: &Term, ids: &IdGen) -> Term {
    fn go(t: &Term, ids: &IdGen, seen: &mut HashMap<Sym, Var>) -> Term {
        match t {
            Term::Const(c) if is_skolem(c) => {
                let v = seen.entry(c.clone()).or_insert_with(|| ids.fresh_var(&c[1..])).clone();
                Term::Var(v)
            }
            Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| go(a, ids, seen)).collect()),
            Term::Lambda(p, b) => Term::Lambda(p.clone(), Box::new(go(b, ids, seen))),
            other => other.clone(),
        }
    }
    go(term, ids, &mut HashMap::new())
}

fn agents() -> [Term; 2] {
    [Term::constant(SYSTEM), Term::constant(USER)]
}

impl BeliefBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bucket(&self, bucket: Bucket) -> &IndexSet<Term> {
        match bucket {
            Bucket::CommonGround => &self.common_ground,
            Bucket::Private => &self.private,
            Bucket::UserModel => &self.user_model,
            Bucket::Goals => &self.goals,
        }
    }

    fn bucket_mut(&mut self, bucket: Bucket) -> &mut IndexSet<Term> {
        match bucket {
            Bucket::CommonGround => &mut self.common_ground,
            Bucket::Private => &mut self.private,
            Bucket::UserModel => &mut self.user_model,
            Bucket::Goals => &mut self.goals,
        }
    }

    /// Adds a ground proposition. Returns whether it was new.
    pub fn assert_prop(&mut self, prop: Term, bucket: Bucket) -> Result<bool> {
        if !prop.is_ground() {
            return Err(Error::NotGround(prop.to_string()));
        }
        Ok(self.bucket_mut(bucket).insert(prop))
    }

    /// Removes every entry unifying with `pattern`; returns what was removed.
    pub fn retract_matching(&mut self, pattern: &Term, bucket: Bucket) -> Vec<Term> {
        let store = self.bucket_mut(bucket);
        let removed: Vec<Term> = store
            .iter()
            .filter(|p| unify(pattern, p, &Substitution::new()).is_some())
            .cloned()
            .collect();
        store.retain(|p| !removed.contains(p));
        removed
    }

    fn scan<'a>(
        stores: impl IntoIterator<Item = &'a IndexSet<Term>>,
        pattern: &Term,
        s: &Substitution,
        out: &mut Vec<Substitution>,
    ) {
        for store in stores {
            for fact in store {
                if let Some(s2) = unify(pattern, fact, s) {
                    if !out.contains(&s2) {
                        out.push(s2);
                    }
                }
            }
        }
    }

    pub fn query(&self, goal: &Term, perspective: Perspective, ids: &IdGen) -> Result<Vec<Substitution>> {
        self.query_with(goal, perspective, &Substitution::new(), ids)
    }

    /// All extensions of `s` under which `goal` holds.
    pub fn query_with(
        &self,
        goal: &Term,
        perspective: Perspective,
        s: &Substitution,
        ids: &IdGen,
    ) -> Result<Vec<Substitution>> {
        let goal = s.apply(goal).reduce();
        let mut out = Vec::new();
        let (functor, args) = match &goal {
            Term::Compound(f, args) => (&**f, args.as_slice()),
            Term::Const(c) => (&**c, &[][..]),
            other => return Err(Error::UnsupportedQuery(other.to_string())),
        };
        match (functor, args.len()) {
            ("bmb", 3) => {
                for (a, b) in [(SYSTEM, USER), (USER, SYSTEM)] {
                    let Some(s1) = unify(&args[0], &Term::constant(a), s) else {
                        continue;
                    };
                    let Some(s2) = unify(&args[1], &Term::constant(b), &s1) else {
                        continue;
                    };
                    Self::scan([&self.common_ground], &args[2], &s2, &mut out);
                }
            }
            ("bel", 2) => {
                for agent in agents() {
                    let Some(s1) = unify(&args[0], &agent, s) else { continue };
                    if agent.const_name() == Some(USER) {
                        Self::scan([&self.user_model], &args[1], &s1, &mut out);
                        continue;
                    }
                    match &args[1] {
                        Term::Compound(f, inner) if &**f == "bel" && inner.len() == 2 => {
                            for nested in agents() {
                                let Some(s2) = unify(&inner[0], &nested, &s1) else {
                                    continue;
                                };
                                let store = if nested.const_name() == Some(USER) {
                                    &self.user_model
                                } else {
                                    &self.private
                                };
                                Self::scan([store], &inner[1], &s2, &mut out);
                            }
                        }
                        prop => Self::scan([&self.private], prop, &s1, &mut out),
                    }
                }
            }
            ("goal", 2) => {
                if let Some(s1) = unify(&args[0], &Term::constant(SYSTEM), s) {
                    Self::scan([&self.goals], &args[1], &s1, &mut out);
                }
            }
            ("world", 1) => {
                if let Some(s1) = unify(&args[0], &Term::list(self.world.clone()), s) {
                    out.push(s1);
                }
            }
            // Always holds for the agent doing the referring; unbound
            // entities are minted by the planner when a plan completes.
            ("knowref", 4) => out.push(s.clone()),
            ("speaker", 1) => {
                if let Some(s1) = unify(&args[0], &perspective.speaker(), s) {
                    out.push(s1);
                }
            }
            ("hearer", 1) => {
                if let Some(s1) = unify(&args[0], &perspective.hearer(), s) {
                    out.push(s1);
                }
            }
            ("modifier-pred", 1) => {
                let bound = s.apply(&args[0]);
                if let Term::Lambda(params, body) = &bound {
                    // A given predicate only needs a whitelisted functor.
                    let listed = body
                        .functor()
                        .is_some_and(|f| self.modifier_preds.iter().any(|p| **p == *f));
                    if params.len() == 1 && listed {
                        out.push(s.clone());
                    }
                    return Ok(out);
                }
                for cand in self.absolute_predicates(ids) {
                    if let Some(s1) = unify(&args[0], &cand, s) {
                        if !out.contains(&s1) {
                            out.push(s1);
                        }
                    }
                }
            }
            ("modifier-rel-pred", 1) => {
                for cand in self.relative_predicates(ids) {
                    if let Some(s1) = unify(&args[0], &cand, s) {
                        out.push(s1);
                    }
                }
            }
            _ => {
                if !self.knows_functor(functor) {
                    return Err(Error::UnsupportedQuery(functor.to_string()));
                }
                Self::scan([&self.common_ground, &self.private], &goal, s, &mut out);
            }
        }
        Ok(out)
    }

    fn knows_functor(&self, functor: &str) -> bool {
        functor == "category"
            || self.modifier_preds.iter().any(|p| &**p == functor)
            || self.modifier_rel_preds.iter().any(|p| &**p == functor)
            || self
                .common_ground
                .iter()
                .chain(&self.private)
                .any(|p| p.functor() == Some(functor))
    }

    /// Describable one-place predicates as lambdas, e.g. `lambda(X, assessment(X, weird))`.
    pub fn absolute_predicates(&self, ids: &IdGen) -> Vec<Term> {
        let mut out: Vec<Term> = Vec::new();
        let mut seen: Vec<(Sym, Vec<Term>)> = Vec::new();
        for pred in &self.modifier_preds {
            for fact in &self.common_ground {
                let Term::Compound(f, args) = fact else { continue };
                if f != pred || args.is_empty() {
                    continue;
                }
                let rest = args[1..].to_vec();
                if seen.iter().any(|(g, r)| g == f && *r == rest) {
                    continue;
                }
                seen.push((f.clone(), rest.clone()));
                let x = ids.fresh_var("X");
                let mut body_args = vec![Term::Var(x.clone())];
                body_args.extend(rest);
                out.push(Term::Lambda(vec![x], Box::new(Term::Compound(f.clone(), body_args))));
            }
        }
        out
    }

    /// Describable relations as two-place lambdas, e.g. `lambda(X, Y, in(X, Y))`.
    pub fn relative_predicates(&self, ids: &IdGen) -> Vec<Term> {
        self.modifier_rel_preds
            .iter()
            .map(|pred| {
                let x = ids.fresh_var("X");
                let y = ids.fresh_var("Y");
                Term::Lambda(
                    vec![x.clone(), y.clone()],
                    Box::new(Term::Compound(pred.clone(), vec![Term::Var(x), Term::Var(y)])),
                )
            })
            .collect()
    }

    /// Order-preserving filter of `set` by a one-place lambda.
    pub fn subset(&self, set: &[Term], pred: &Term, perspective: Perspective, ids: &IdGen) -> Result<Vec<Term>> {
        let mut out = Vec::new();
        for x in set {
            let goal = apply_lambda(pred, std::slice::from_ref(x))?.reduce();
            if !self.query(&goal, perspective, ids)?.is_empty() {
                out.push(x.clone());
            }
        }
        Ok(out)
    }

    /// First member of `pick_order` present in `set`, else the first of `set`.
    pub fn pick_one(&self, set: &[Term]) -> Option<Term> {
        self.pick_order
            .iter()
            .find(|o| set.contains(o))
            .or_else(|| set.first())
            .cloned()
    }

    /// `set` reordered by pick preference.
    pub fn pick_ordering(&self, set: &[Term]) -> Vec<Term> {
        let mut out: Vec<Term> = self.pick_order.iter().filter(|o| set.contains(o)).cloned().collect();
        out.extend(set.iter().filter(|o| !out.contains(o)).cloned().collect::<Vec<_>>());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{parse_term, parse_term_in, Scope};

    fn weird_base(ids: &IdGen) -> BeliefBase {
        let mut b = BeliefBase::new();
        for f in [
            "category(antenna1, creature)",
            "category(fern1, creature)",
            "assessment(antenna1, weird)",
            "assessment(fern1, weird)",
            "in(fern1, corner1)",
            "on(antenna1, tv1)",
            "category(tv1, television)",
            "category(corner1, corner)",
        ] {
            b.assert_prop(parse_term(f, ids).unwrap(), Bucket::CommonGround)
                .unwrap();
        }
        b.world = ["antenna1", "fern1", "tv1", "corner1"].map(Term::constant).to_vec();
        b.modifier_preds = vec![sym("assessment")];
        b.modifier_rel_preds = vec![sym("in"), sym("on")];
        b.pick_order = ["fern1", "antenna1"].map(Term::constant).to_vec();
        b
    }

    #[test]
    fn mutual_category_query_finds_both_creatures() {
        let ids = IdGen::new();
        let b = weird_base(&ids);
        let mut sc = Scope::new();
        let g = parse_term_in("bmb(system, user, category(X, creature))", &ids, &mut sc).unwrap();
        let x = parse_term_in("X", &ids, &mut sc).unwrap();
        let sols = b.query(&g, Perspective::UserSpeaker, &ids).unwrap();
        let got: Vec<String> = sols.iter().map(|s| s.apply(&x).to_string()).collect();
        assert_eq!(got, ["antenna1", "fern1"]);
        let w = parse_term("bmb(system, user, assessment(X, weird))", &ids).unwrap();
        assert_eq!(b.query(&w, Perspective::UserSpeaker, &ids).unwrap().len(), 2);
    }

    #[test]
    fn bmb_is_symmetric() {
        let ids = IdGen::new();
        let b = weird_base(&ids);
        let g = parse_term("bmb(user, system, in(fern1, corner1))", &ids).unwrap();
        assert_eq!(b.query(&g, Perspective::SystemSpeaker, &ids).unwrap().len(), 1);
    }

    #[test]
    fn speaker_follows_perspective() {
        let ids = IdGen::new();
        let b = weird_base(&ids);
        let mut sc = Scope::new();
        let g = parse_term_in("speaker(S)", &ids, &mut sc).unwrap();
        let s = parse_term_in("S", &ids, &mut sc).unwrap();
        let sols = b.query(&g, Perspective::UserSpeaker, &ids).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].apply(&s).to_string(), "user");
        let h = parse_term_in("hearer(H)", &ids, &mut sc).unwrap();
        let hv = parse_term_in("H", &ids, &mut sc).unwrap();
        let sols = b.query(&h, Perspective::UserSpeaker, &ids).unwrap();
        assert_eq!(sols[0].apply(&hv).to_string(), "system");
    }

    #[test]
    fn unsupported_form_names_functor() {
        let ids = IdGen::new();
        let b = weird_base(&ids);
        let g = parse_term("flies(X)", &ids).unwrap();
        assert_eq!(
            b.query(&g, Perspective::UserSpeaker, &ids),
            Err(Error::UnsupportedQuery("flies".into()))
        );
    }

    #[test]
    fn subset_examples() {
        let ids = IdGen::new();
        let b = weird_base(&ids);
        let p = parse_term("lambda(X, bmb(system, user, category(X, creature)))", &ids).unwrap();
        let got = b.subset(&b.world, &p, Perspective::UserSpeaker, &ids).unwrap();
        assert_eq!(got, ["antenna1", "fern1"].map(Term::constant).to_vec());
        assert!(b.subset(&[], &p, Perspective::UserSpeaker, &ids).unwrap().is_empty());
        let on = parse_term("lambda(X, bmb(system, user, on(X, tv1)))", &ids).unwrap();
        let two = ["antenna1", "fern1"].map(Term::constant);
        assert_eq!(
            b.subset(&two, &on, Perspective::UserSpeaker, &ids).unwrap(),
            vec![Term::constant("antenna1")]
        );
    }

    #[test]
    fn assert_is_idempotent_and_requires_ground() {
        let ids = IdGen::new();
        let mut b = BeliefBase::new();
        let e = parse_term("error(p1, p22)", &ids).unwrap();
        assert!(b.assert_prop(e.clone(), Bucket::Private).unwrap());
        assert!(!b.assert_prop(e.clone(), Bucket::Private).unwrap());
        assert_eq!(b.private.len(), 1);
        assert_eq!(Bucket::Private.wrap(&e).to_string(), "bel(system, error(p1, p22))");
        let q = parse_term("bel(system, error(p1, N))", &ids).unwrap();
        assert_eq!(b.query(&q, Perspective::SystemSpeaker, &ids).unwrap().len(), 1);
        let open = parse_term("error(p1, N)", &ids).unwrap();
        assert!(matches!(b.assert_prop(open, Bucket::Private), Err(Error::NotGround(_))));
    }

    #[test]
    fn achieve_in_common_ground_is_queryable_via_bmb() {
        let ids = IdGen::new();
        let mut b = BeliefBase::new();
        let a = parse_term("achieve(p104, knowref(system, user, entity1, antenna1))", &ids).unwrap();
        b.assert_prop(a, Bucket::CommonGround).unwrap();
        let q = parse_term("bmb(system, user, achieve(P, G))", &ids).unwrap();
        assert_eq!(b.query(&q, Perspective::SystemSpeaker, &ids).unwrap().len(), 1);
    }

    #[test]
    fn retract_matching_examples() {
        let ids = IdGen::new();
        let mut b = BeliefBase::new();
        let a = parse_term("achieve(p1, knowref(system, user, entity1, ?Object))", &ids).unwrap();
        b.assert_prop(a, Bucket::Private).unwrap();
        let pat = parse_term("achieve(p1, _)", &ids).unwrap();
        assert_eq!(b.retract_matching(&pat, Bucket::Private).len(), 1);
        assert!(b.private.is_empty());
        assert!(b.retract_matching(&pat, Bucket::Private).is_empty());
        let other = parse_term("achieve(p9, x)", &ids).unwrap();
        b.assert_prop(other, Bucket::Private).unwrap();
        assert!(b.retract_matching(&pat, Bucket::Private).is_empty());
        assert_eq!(b.private.len(), 1);
    }

    #[test]
    fn nested_belief_reads_user_model() {
        let ids = IdGen::new();
        let mut b = BeliefBase::new();
        b.assert_prop(parse_term("error(p1, p2)", &ids).unwrap(), Bucket::UserModel)
            .unwrap();
        b.assert_prop(parse_term("error(p1, p3)", &ids).unwrap(), Bucket::Private)
            .unwrap();
        let mut sc = Scope::new();
        let q = parse_term_in("bel(system, bel(A, error(p1, N)))", &ids, &mut sc).unwrap();
        let a = parse_term_in("A", &ids, &mut sc).unwrap();
        let sols = b.query(&q, Perspective::SystemSpeaker, &ids).unwrap();
        let who: Vec<String> = sols.iter().map(|s| s.apply(&a).to_string()).collect();
        assert_eq!(who, ["system", "user"]);
    }

    #[test]
    fn modifier_predicates_enumerate_from_whitelist() {
        let ids = IdGen::new();
        let b = weird_base(&ids);
        let preds: Vec<String> = b.absolute_predicates(&ids).iter().map(|p| p.to_string()).collect();
        assert_eq!(preds, ["lambda(X, assessment(X, weird))"]);
        let rels: Vec<String> = b.relative_predicates(&ids).iter().map(|p| p.to_string()).collect();
        assert_eq!(rels, ["lambda(X, Y, in(X, Y))", "lambda(X, Y, on(X, Y))"]);
    }

    #[test]
    fn skolem_round_trip() {
        let ids = IdGen::new();
        let t = parse_term("knowref(system, user, entity1, Object)", &ids).unwrap();
        let sk = skolemize(&t);
        assert!(sk.is_ground());
        assert_eq!(sk.to_string(), "knowref(system, user, entity1, ?Object)");
        let open = unskolemize(&sk, &ids);
        assert_eq!(open.free_vars().len(), 1);
    }
}
