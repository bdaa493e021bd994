//! Plan construction, plan inference and replanning.
//!
//! Construction and parsing share one top-down expander ([`search`]).
//! Construction evaluates constraints as nodes are created and searches
//! best-first on the number of surface actions; parsing consumes observed
//! primitives and leaves constraints for [`evaluate`].

mod evaluate;
mod infer;
mod search;

use indexmap::IndexMap;

use crate::belief::{BeliefBase, Perspective};
use crate::plan::PlanDerivation;
use crate::schema::SchemaLibrary;
use crate::term::{IdGen, Substitution, Sym, Term};

pub use evaluate::{Evaluation, EvaluationResult};
pub use infer::{Inference, InferenceContext, InferenceResult};

/// Every plan the agent has built or recognized, by p-name.
pub type PlanRegistry = IndexMap<Sym, PlanDerivation>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvaluationMode {
    /// The hearer of a clarification grants the speaker any belief the
    /// plan needs, preferring what is already on record.
    pub assume_speaker_beliefs: bool,
    /// An embedded replan only has to derive, not be valid.
    pub embedded_replan_derive_only: bool,
}

impl EvaluationMode {
    pub const STRICT: EvaluationMode = EvaluationMode {
        assume_speaker_beliefs: false,
        embedded_replan_derive_only: false,
    };

    pub const CLARIFICATION: EvaluationMode = EvaluationMode {
        assume_speaker_beliefs: true,
        embedded_replan_derive_only: true,
    };
}

pub const DEFAULT_MAX_DEPTH: usize = 2;
pub const DEFAULT_SEARCH_LIMIT: usize = 50_000;

/// A plan together with any plans its mental actions created.
#[derive(Clone, Debug)]
pub struct Constructed {
    pub plan: PlanDerivation,
    pub created: Vec<PlanDerivation>,
    pub trace: Vec<String>,
}

pub struct Planner<'a> {
    pub lib: &'a SchemaLibrary,
    pub base: &'a BeliefBase,
    pub ids: &'a IdGen,
    pub plans: &'a PlanRegistry,
    /// Deepest embedded `refer` construction may introduce.
    pub max_depth: usize,
    /// Search nodes popped before construction gives up.
    pub search_limit: usize,
    pub trace: bool,
}

impl<'a> Planner<'a> {
    pub fn new(lib: &'a SchemaLibrary, base: &'a BeliefBase, ids: &'a IdGen, plans: &'a PlanRegistry) -> Self {
        Planner {
            lib,
            base,
            ids,
            plans,
            max_depth: DEFAULT_MAX_DEPTH,
            search_limit: DEFAULT_SEARCH_LIMIT,
            trace: false,
        }
    }

    pub fn with_max_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn with_trace(mut self, trace: bool) -> Self {
        self.trace = trace;
        self
    }

    fn lookup_plan<'p>(&'p self, t: &Term, created: &'p [PlanDerivation]) -> Option<&'p PlanDerivation> {
        let name = t.const_name()?;
        created
            .iter()
            .rev()
            .find(|p| &*p.id == name)
            .or_else(|| self.plans.get(name))
    }
}

/// Replaces the plan with the same id, or appends.
pub(crate) fn upsert(list: &mut Vec<PlanDerivation>, plan: PlanDerivation) {
    match list.iter_mut().find(|p| p.id == plan.id) {
        Some(slot) => *slot = plan,
        None => list.push(plan),
    }
}

/// One way a constraint or mental action can hold.
#[derive(Clone, Debug)]
pub(crate) struct Sol {
    pub s: Substitution,
    pub created: Option<PlanDerivation>,
}

impl Sol {
    fn of(s: Substitution) -> Self {
        Sol { s, created: None }
    }
}

/// Outcome of solving one goal under the current bindings.
#[derive(Clone, Debug)]
pub(crate) enum Solved {
    Sols(Vec<Sol>),
    /// Not enough is bound yet to enumerate solutions.
    Undetermined,
}

impl Solved {
    fn from_substs(v: impl IntoIterator<Item = Substitution>) -> Self {
        Solved::Sols(v.into_iter().map(Sol::of).collect())
    }
}

/// How goals are solved: during construction `pick-one` commits to the
/// preferred candidate; during evaluation it enumerates them all.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Solving {
    pub perspective: Perspective,
    pub mode: EvaluationMode,
    pub construct: bool,
}
