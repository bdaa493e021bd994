//! Scenario files: the shared world, each agent's beliefs, and a scripted
//! dialogue.
//!
//! ```text
//! objects: fern1, antenna1
//! common_ground:
//!   category(fern1, creature)
//! pick_order: fern1, antenna1
//! turns:
//!   user: s-refer(entity1), s-attrib(entity1, lambda(X, category(X, creature)))
//!   system: expect s-accept(P)
//! ```
//!
//! Consecutive `user:` lines make one turn, one observed action set per
//! line. `#` starts a comment.

use std::path::Path;

use crate::belief::{BeliefBase, Bucket};
use crate::error::{Error, Result};
use crate::term::{parse_terms_in, sym, IdGen, Scope, Sym, Term};

#[derive(Clone, Debug, PartialEq)]
pub enum Speaker {
    System,
    User,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Turn {
    /// Observed action sets, in order.
    User(Vec<Vec<Term>>),
    /// `None` runs freely; `Some` must unify with what the system says.
    System(Option<Vec<Term>>),
}

impl Turn {
    pub fn speaker(&self) -> Speaker {
        match self {
            Turn::User(_) => Speaker::User,
            Turn::System(_) => Speaker::System,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub objects: Vec<Term>,
    pub common_ground: Vec<Term>,
    pub private: Vec<Term>,
    pub user_model: Vec<Term>,
    pub modifier_preds: Vec<Sym>,
    pub modifier_rel_preds: Vec<Sym>,
    pub pick_order: Vec<Term>,
    pub turns: Vec<Turn>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Objects,
    CommonGround,
    Private,
    UserModel,
    ModifierPreds,
    ModifierRelPreds,
    PickOrder,
    Turns,
}

fn section(name: &str) -> Option<Section> {
    Some(match name {
        "objects" => Section::Objects,
        "common_ground" => Section::CommonGround,
        "private" => Section::Private,
        "user_model" => Section::UserModel,
        "modifier_preds" => Section::ModifierPreds,
        "modifier_rel_preds" => Section::ModifierRelPreds,
        "pick_order" => Section::PickOrder,
        "turns" => Section::Turns,
        _ => return None,
    })
}

fn scenario_err(line: usize, message: impl Into<String>) -> Error {
    Error::Scenario {
        line,
        message: message.into(),
    }
}

impl Scenario {
    pub fn parse(name: &str, src: &str, ids: &IdGen) -> Result<Scenario> {
        let mut sc = Scenario {
            name: name.to_string(),
            ..Scenario::default()
        };
        let mut current: Option<Section> = None;
        for (i, raw) in src.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut body = line;
            if let Some((head, rest)) = line.split_once(':') {
                if let Some(s) = section(head.trim()) {
                    current = Some(s);
                    body = rest.trim();
                    if body.is_empty() {
                        continue;
                    }
                }
            }
            let Some(sec) = current else {
                return Err(scenario_err(line_no, format!("content outside any section: {line}")));
            };
            let parse = |text: &str, scope: &mut Scope| {
                parse_terms_in(text, ids, scope).map_err(|e| scenario_err(line_no, e.to_string()))
            };
            match sec {
                Section::Objects => sc.objects.extend(parse(body, &mut Scope::new())?),
                Section::CommonGround => sc.common_ground.extend(parse(body, &mut Scope::new())?),
                Section::Private => sc.private.extend(parse(body, &mut Scope::new())?),
                Section::UserModel => sc.user_model.extend(parse(body, &mut Scope::new())?),
                Section::PickOrder => sc.pick_order.extend(parse(body, &mut Scope::new())?),
                Section::ModifierPreds | Section::ModifierRelPreds => {
                    let names = body.split(',').map(|n| n.trim()).filter(|n| !n.is_empty());
                    let target = if sec == Section::ModifierPreds {
                        &mut sc.modifier_preds
                    } else {
                        &mut sc.modifier_rel_preds
                    };
                    target.extend(names.map(sym));
                }
                Section::Turns => sc.push_turn_line(body, line_no, ids)?,
            }
        }
        sc.validate()?;
        Ok(sc)
    }

    fn push_turn_line(&mut self, body: &str, line_no: usize, ids: &IdGen) -> Result<()> {
        let (who, rest) = body
            .split_once(':')
            .ok_or_else(|| scenario_err(line_no, "expected `user:` or `system:`"))?;
        let rest = rest.trim();
        match who.trim() {
            "user" => {
                let acts =
                    parse_terms_in(rest, ids, &mut Scope::new()).map_err(|e| scenario_err(line_no, e.to_string()))?;
                if acts.is_empty() {
                    return Err(scenario_err(line_no, "user line without actions"));
                }
                match self.turns.last_mut() {
                    Some(Turn::User(sets)) => sets.push(acts),
                    _ => self.turns.push(Turn::User(vec![acts])),
                }
            }
            "system" => {
                if matches!(self.turns.last(), Some(Turn::System(_))) {
                    return Err(scenario_err(line_no, "two system turns in a row"));
                }
                let expect = if rest == "run" {
                    None
                } else if let Some(pattern) = rest.strip_prefix("expect") {
                    let pats = parse_terms_in(pattern.trim(), ids, &mut Scope::new())
                        .map_err(|e| scenario_err(line_no, e.to_string()))?;
                    Some(pats)
                } else {
                    return Err(scenario_err(line_no, "system turn must be `run` or `expect <actions>`"));
                };
                self.turns.push(Turn::System(expect));
            }
            other => return Err(scenario_err(line_no, format!("unknown speaker `{other}`"))),
        }
        Ok(())
    }

    /// Propositions must be about declared objects: the first argument,
    /// and both arguments of a relation.
    fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::Validation("no objects declared".into()));
        }
        let known = |t: &Term| self.objects.contains(t);
        for prop in self.common_ground.iter().chain(&self.private).chain(&self.user_model) {
            if !prop.is_ground() {
                return Err(Error::Validation(format!("proposition is not ground: {prop}")));
            }
            let args = prop.args();
            let Some(first) = args.first() else { continue };
            let relation = prop
                .functor()
                .is_some_and(|f| self.modifier_rel_preds.iter().any(|r| **r == *f));
            let checked = if relation {
                &args[..args.len().min(2)]
            } else {
                std::slice::from_ref(first)
            };
            for a in checked {
                if !known(a) {
                    return Err(Error::Validation(format!("unknown object `{a}` in {prop}")));
                }
            }
        }
        for p in &self.pick_order {
            if !known(p) {
                return Err(Error::Validation(format!("pick_order names unknown object `{p}`")));
            }
        }
        Ok(())
    }

    pub fn belief_base(&self) -> Result<BeliefBase> {
        let mut base = BeliefBase::new();
        for (props, bucket) in [
            (&self.common_ground, Bucket::CommonGround),
            (&self.private, Bucket::Private),
            (&self.user_model, Bucket::UserModel),
        ] {
            for p in props {
                base.assert_prop(p.clone(), bucket)?;
            }
        }
        base.world = self.objects.clone();
        base.modifier_preds = self.modifier_preds.clone();
        base.modifier_rel_preds = self.modifier_rel_preds.clone();
        base.pick_order = self.pick_order.clone();
        Ok(base)
    }
}

pub fn load_scenario(path: &Path, ids: &IdGen) -> Result<Scenario> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Scenario::parse(&name, &src, ids)
}
