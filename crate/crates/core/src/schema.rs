//! Action schemas for referring expressions and for clarifications.
//!
//! Schemas are written in the term syntax and parsed once at load. Surface
//! speech actions have no schema; they only occur as decomposition steps.

use std::collections::HashMap;

use crate::term::{parse_term_in, unify, IdGen, Scope, Substitution, Sym, Term, EQ};

pub const PRIMITIVES: [&str; 7] = [
    "s-refer",
    "s-attrib",
    "s-attrib-rel",
    "s-accept",
    "s-reject",
    "s-postpone",
    "s-actions",
];

const MENTAL: [&str; 4] = ["pick-one", EQ, "substitute", "replan"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemaKind {
    Referring,
    Clarification,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Action(Term),
    Mental(Term),
    Null,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionSchema {
    pub name: Sym,
    pub header: Term,
    pub constraints: Vec<Term>,
    pub decomposition: Vec<Step>,
    pub effect: Option<Term>,
    pub kind: SchemaKind,
}

impl ActionSchema {
    /// Header, constraints, steps and effect as one term, so that a single
    /// `rename_apart` yields a consistent fresh instance.
    pub fn as_term(&self) -> Term {
        let steps = self
            .decomposition
            .iter()
            .map(|s| match s {
                Step::Action(t) => Term::compound("action", vec![t.clone()]),
                Step::Mental(t) => Term::compound("mental", vec![t.clone()]),
                Step::Null => Term::constant("null"),
            })
            .collect();
        Term::compound(
            "schema",
            vec![
                self.header.clone(),
                Term::list(self.constraints.clone()),
                Term::list(steps),
                self.effect.clone().unwrap_or_else(|| Term::constant("none")),
            ],
        )
    }

    pub fn from_term(&self, t: &Term) -> ActionSchema {
        let a = t.args();
        let steps = a[2]
            .as_list()
            .unwrap_or_default()
            .iter()
            .map(|s| match s {
                Term::Compound(f, x) if &**f == "action" => Step::Action(x[0].clone()),
                Term::Compound(f, x) if &**f == "mental" => Step::Mental(x[0].clone()),
                _ => Step::Null,
            })
            .collect();
        ActionSchema {
            name: self.name.clone(),
            header: a[0].clone(),
            constraints: a[1].as_list().unwrap_or_default().to_vec(),
            decomposition: steps,
            effect: self.effect.as_ref().map(|_| a[3].clone()),
            kind: self.kind,
        }
    }
}

pub fn is_primitive(functor: &str) -> bool {
    PRIMITIVES.contains(&functor)
}

struct SchemaText<'a> {
    header: &'a str,
    constraints: &'a [&'a str],
    steps: &'a [&'a str],
    effect: Option<&'a str>,
    kind: SchemaKind,
}

const REFER_EFFECT: &str = "bel(Hearer, goal(Speaker, knowref(Hearer, Speaker, Entity, Object)))";
const ERROR_EFFECT: &str = "bel(Hearer, goal(Speaker, bel(Hearer, bel(Speaker, error(Plan, ErrorNode)))))";
const REPLACE_EFFECT: &str = "bel(Hearer, goal(Speaker, bel(Hearer, bel(Speaker, replace(Plan, NewPlan)))))";

const SCHEMA_TEXTS: [SchemaText<'static>; 12] = [
    SchemaText {
        header: "refer(Entity, Object)",
        constraints: &["knowref(Speaker, Speaker, Entity, Object)"],
        steps: &["s-refer(Entity)", "describe(Entity, Object)"],
        effect: Some(REFER_EFFECT),
        kind: SchemaKind::Referring,
    },
    SchemaText {
        header: "describe(Entity, Object)",
        constraints: &[],
        steps: &["headnoun(Entity, Object, Cand)", "modifiers(Entity, Object, Cand)"],
        effect: None,
        kind: SchemaKind::Referring,
    },
    SchemaText {
        header: "headnoun(Entity, Object, Cand)",
        constraints: &[
            "world(World)",
            "bmb(Speaker, Hearer, category(Object, Category))",
            "subset(World, lambda(X, bmb(Speaker, Hearer, category(X, Category))), Cand)",
        ],
        steps: &["s-attrib(Entity, lambda(X, category(X, Category)))"],
        effect: None,
        kind: SchemaKind::Referring,
    },
    SchemaText {
        header: "modifiers-terminate(Entity, Object, Cand)",
        constraints: &["Cand = [Object]"],
        steps: &["null"],
        effect: None,
        kind: SchemaKind::Referring,
    },
    SchemaText {
        header: "modifiers-recurse(Entity, Object, Cand)",
        constraints: &[],
        steps: &[
            "modifier(Entity, Object, Cand, NewCand)",
            "modifiers(Entity, Object, NewCand)",
        ],
        effect: None,
        kind: SchemaKind::Referring,
    },
    SchemaText {
        header: "modifier-absolute(Entity, Object, Cand, NewCand)",
        constraints: &[
            "modifier-pred(Pred)",
            "bmb(Speaker, Hearer, apply(Pred, Object))",
            "subset(Cand, lambda(X, bmb(Speaker, Hearer, apply(Pred, X))), NewCand)",
        ],
        steps: &["s-attrib(Entity, Pred)"],
        effect: None,
        kind: SchemaKind::Referring,
    },
    SchemaText {
        header: "modifier-relative(Entity, Object, Cand, NewCand)",
        constraints: &[
            "modifier-rel-pred(Pred)",
            "bmb(Speaker, Hearer, apply(Pred, Object, OtherObject))",
            "subset(Cand, lambda(X, bmb(Speaker, Hearer, apply(Pred, X, OtherObject))), NewCand)",
        ],
        steps: &[
            "s-attrib-rel(Entity, OtherEntity, Pred)",
            "refer(OtherEntity, OtherObject)",
        ],
        effect: None,
        kind: SchemaKind::Referring,
    },
    SchemaText {
        header: "accept-plan(Plan)",
        constraints: &["bel(Speaker, achieve(Plan, Goal))"],
        steps: &["s-accept(Plan)"],
        effect: Some("bel(Hearer, goal(Speaker, bel(Hearer, bel(Speaker, achieve(Plan, Goal)))))"),
        kind: SchemaKind::Clarification,
    },
    SchemaText {
        header: "reject-plan(Plan)",
        constraints: &[
            "bel(Speaker, error(Plan, ErrorNode))",
            "yield(Plan, ErrorNode, Acts)",
            "not(Acts = [])",
        ],
        steps: &["s-reject(Plan, Acts)"],
        effect: Some(ERROR_EFFECT),
        kind: SchemaKind::Clarification,
    },
    SchemaText {
        header: "postpone-plan(Plan)",
        constraints: &[
            "bel(Speaker, error(Plan, ErrorNode))",
            "yield(Plan, ErrorNode, Acts)",
            "Acts = []",
        ],
        steps: &["s-postpone(Plan, Acts)"],
        effect: Some(ERROR_EFFECT),
        kind: SchemaKind::Clarification,
    },
    SchemaText {
        header: "replace-plan(Plan)",
        constraints: &[
            "bel(Speaker, error(Plan, ErrorNode))",
            "content(Plan, ErrorNode, ErrorContent)",
            "ErrorContent = modifier(Entity, Object1, Cand, Cand1)",
        ],
        steps: &[
            "pick-one(Object, Cand)",
            "Replacement = modifier(Entity, Object, Cand, Cand2)",
            "substitute(Plan, ErrorNode, Replacement, NewPlan)",
            "replan(NewPlan, Acts)",
            "s-actions(Plan, Acts)",
        ],
        effect: Some(REPLACE_EFFECT),
        kind: SchemaKind::Clarification,
    },
    SchemaText {
        header: "expand-plan(Plan)",
        constraints: &[
            "bel(Speaker, error(Plan, ErrorNode))",
            "content(Plan, ErrorNode, ErrorContent)",
            "ErrorContent = modifiers-terminate(Entity, Object1, Cand)",
        ],
        steps: &[
            "pick-one(Object, Cand)",
            "Replacement = modifiers-recurse(Entity, Object, Cand)",
            "substitute(Plan, ErrorNode, Replacement, NewPlan)",
            "replan(NewPlan, Acts)",
            "s-actions(Plan, Acts)",
        ],
        effect: Some(REPLACE_EFFECT),
        kind: SchemaKind::Clarification,
    },
];

fn parse(src: &str, ids: &IdGen, scope: &mut Scope) -> Term {
    parse_term_in(src, ids, scope).unwrap_or_else(|e| panic!("builtin schema `{src}`: {e}"))
}

fn mentions(terms: &[&str], name: &str) -> bool {
    terms.iter().any(|t| {
        t.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '-'))
            .any(|w| w == name)
    })
}

/// The twelve built-in schemas. `speaker`/`hearer` constraints are
/// prepended wherever a schema mentions `Speaker` or `Hearer`.
pub fn builtin_schemas(ids: &IdGen) -> Vec<ActionSchema> {
    SCHEMA_TEXTS
        .iter()
        .map(|text| {
            let mut scope = Scope::new();
            let header = parse(text.header, ids, &mut scope);
            let mut all: Vec<&str> = text.constraints.to_vec();
            all.extend(text.steps);
            all.extend(text.effect);
            let mut constraints = Vec::new();
            if mentions(&all, "Speaker") {
                constraints.push(parse("speaker(Speaker)", ids, &mut scope));
            }
            if mentions(&all, "Hearer") {
                constraints.push(parse("hearer(Hearer)", ids, &mut scope));
            }
            constraints.extend(text.constraints.iter().map(|c| parse(c, ids, &mut scope)));
            let decomposition = text
                .steps
                .iter()
                .map(|s| {
                    if *s == "null" {
                        return Step::Null;
                    }
                    let t = parse(s, ids, &mut scope);
                    if t.functor().is_some_and(|f| MENTAL.contains(&f)) {
                        Step::Mental(t)
                    } else {
                        Step::Action(t)
                    }
                })
                .collect();
            let effect = text.effect.map(|e| parse(e, ids, &mut scope));
            ActionSchema {
                name: header.functor().expect("compound header").into(),
                header,
                constraints,
                decomposition,
                effect,
                kind: text.kind,
            }
        })
        .collect()
}

/// Unification that lets an abstract header match any of its
/// specializations, e.g. `modifier(E, O, C, N)` against `modifier-relative(...)`.
pub fn unify_headers(a: &Term, b: &Term, s: &Substitution) -> Option<Substitution> {
    let a1 = s.apply(a);
    let b1 = s.apply(b);
    if let (Term::Compound(f, xs), Term::Compound(g, ys)) = (&a1, &b1) {
        let related = SchemaLibrary::generalization(f) == Some(&**g) || SchemaLibrary::generalization(g) == Some(&**f);
        if related && xs.len() == ys.len() {
            return unify(&Term::list(xs.clone()), &Term::list(ys.clone()), s);
        }
    }
    unify(&a1, &b1, s)
}

#[derive(Clone, Debug)]
pub struct SchemaLibrary {
    schemas: Vec<ActionSchema>,
    min_yield: HashMap<String, usize>,
}

const ABSTRACT: [(&str, [&str; 2]); 2] = [
    ("modifiers", ["modifiers-terminate", "modifiers-recurse"]),
    ("modifier", ["modifier-absolute", "modifier-relative"]),
];

impl SchemaLibrary {
    pub fn builtin(ids: &IdGen) -> Self {
        let schemas = builtin_schemas(ids);
        let mut lib = SchemaLibrary {
            schemas,
            min_yield: HashMap::new(),
        };
        lib.compute_min_yield();
        lib
    }

    /// The library minus the named clarification schemas.
    pub fn without(&self, names: &[&str]) -> Self {
        SchemaLibrary {
            schemas: self
                .schemas
                .iter()
                .filter(|s| s.kind == SchemaKind::Referring || !names.contains(&&*s.name))
                .cloned()
                .collect(),
            min_yield: self.min_yield.clone(),
        }
    }

    pub fn schemas(&self) -> &[ActionSchema] {
        &self.schemas
    }

    pub fn lookup(&self, name: &str) -> Option<&ActionSchema> {
        self.schemas.iter().find(|s| &*s.name == name)
    }

    /// Schemas a plan may be rooted at.
    pub fn roots(&self) -> impl Iterator<Item = &ActionSchema> {
        self.schemas.iter().filter(|s| s.effect.is_some())
    }

    pub fn is_abstract(functor: &str) -> bool {
        ABSTRACT.iter().any(|(a, _)| *a == functor)
    }

    /// The abstract action a concrete schema specializes, if any.
    pub fn generalization(functor: &str) -> Option<&'static str> {
        ABSTRACT
            .iter()
            .find(|(_, specs)| specs.contains(&functor))
            .map(|(a, _)| *a)
    }

    /// Concrete headers for a header: the specializations of an abstract
    /// action, in preference order, or the header itself.
    pub fn specializations(header: &Term) -> Vec<Term> {
        if let Term::Compound(f, args) = header {
            if let Some((_, specs)) = ABSTRACT.iter().find(|(a, _)| **a == **f) {
                return specs.iter().map(|s| Term::compound(s, args.clone())).collect();
            }
        }
        vec![header.clone()]
    }

    /// Fewest primitives any expansion of `functor` can yield.
    pub fn min_yield(&self, functor: &str) -> usize {
        if is_primitive(functor) {
            return 1;
        }
        self.min_yield.get(functor).copied().unwrap_or(usize::MAX / 4)
    }

    fn compute_min_yield(&mut self) {
        const INF: usize = usize::MAX / 4;
        let mut table: HashMap<String, usize> = self.schemas.iter().map(|s| (s.name.to_string(), INF)).collect();
        for (a, _) in ABSTRACT {
            table.insert(a.to_string(), INF);
        }
        loop {
            let mut changed = false;
            for s in &self.schemas {
                let cost: usize = s
                    .decomposition
                    .iter()
                    .map(|step| match step {
                        Step::Action(t) => {
                            let f = t.functor().unwrap_or_default();
                            if is_primitive(f) {
                                1
                            } else {
                                table[f]
                            }
                        }
                        _ => 0,
                    })
                    .fold(0usize, |acc, c| acc.saturating_add(c).min(INF));
                if cost < table[&*s.name] {
                    table.insert(s.name.to_string(), cost);
                    changed = true;
                }
            }
            for (a, specs) in ABSTRACT {
                let m = specs.iter().map(|s| table[*s]).min().unwrap_or(INF);
                if m < table[a] {
                    table.insert(a.to_string(), m);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self.min_yield = table;
    }
}
