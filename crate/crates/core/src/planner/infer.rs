//! Plan inference: parse the observed actions, evaluate each derivation,
//! classify the outcome.

use crate::belief::Perspective;
use crate::error::Result;
use crate::plan::PlanDerivation;
use crate::schema::SchemaKind;
use crate::term::{unify, Substitution, Sym, Term};

use super::{Evaluation, EvaluationMode, Planner};

/// What the hearer knows about the ongoing collaboration.
#[derive(Clone, Debug, Default)]
pub struct InferenceContext {
    /// The plan judgments and refashionings must be about.
    pub current_plan: Option<Sym>,
}

#[derive(Clone, Debug)]
pub enum InferenceResult {
    /// Exactly one valid derivation. `plan` carries its final bindings.
    Understood {
        plan: PlanDerivation,
        created: Vec<PlanDerivation>,
    },
    /// A single derivation, found invalid at `node`. `plan` carries the
    /// bindings committed before the failure.
    ErrorAt {
        plan: PlanDerivation,
        node: Sym,
    },
    NoDerivation,
    Ambiguous(usize),
}

#[derive(Clone, Debug)]
pub struct Inference {
    pub result: InferenceResult,
    /// Every surviving derivation and how it evaluated.
    pub candidates: Vec<(PlanDerivation, Evaluation)>,
    /// Derivations found before the context filter.
    pub parsed: usize,
}

impl Planner<'_> {
    pub fn infer(
        &self,
        observed: &[Term],
        perspective: Perspective,
        mode: EvaluationMode,
        ctx: &InferenceContext,
    ) -> Result<Inference> {
        let parsed = self.parse_actions(observed)?;
        let total = parsed.len();
        let mut candidates = Vec::new();
        for plan in parsed {
            let clarification = plan
                .root()
                .schema
                .as_deref()
                .and_then(|n| self.lib.lookup(n))
                .is_some_and(|s| s.kind == SchemaKind::Clarification);
            let mode = if clarification {
                let Some(current) = &ctx.current_plan else { continue };
                let root = plan.root_content();
                let target = &root.args()[0];
                if unify(target, &Term::Const(current.clone()), &Substitution::new()).is_none() {
                    continue;
                }
                mode
            } else {
                EvaluationMode::STRICT
            };
            let eval = self.evaluate(&plan, perspective, mode)?;
            candidates.push((plan, eval));
        }
        let valid: Vec<usize> = (0..candidates.len()).filter(|&i| candidates[i].1.is_valid()).collect();
        let result = match (valid.len(), candidates.len()) {
            (1, _) => {
                let (plan, eval) = &candidates[valid[0]];
                let mut plan = plan.clone();
                plan.bindings = eval.bindings.normalized();
                InferenceResult::Understood {
                    plan,
                    created: eval.created.clone(),
                }
            }
            (0, 0) => InferenceResult::NoDerivation,
            (0, 1) => {
                let (plan, eval) = &candidates[0];
                let mut plan = plan.clone();
                plan.bindings = eval.bindings.normalized();
                let node = eval.error_node().expect("invalid evaluation").clone();
                InferenceResult::ErrorAt { plan, node }
            }
            (0, n) | (n, _) => InferenceResult::Ambiguous(n),
        };
        Ok(Inference {
            result,
            candidates,
            parsed: total,
        })
    }
}
