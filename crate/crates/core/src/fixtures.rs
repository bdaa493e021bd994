//! Shared test fixtures.

use crate::belief::{BeliefBase, Bucket};
use crate::term::{parse_term, parse_terms_in, sym, IdGen, Scope, Term};

/// Two weird creatures: an antenna on the television and a fern in the
/// corner.
pub fn weird_base(ids: &IdGen) -> BeliefBase {
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

pub fn terms(src: &str, ids: &IdGen) -> Vec<Term> {
    parse_terms_in(src, ids, &mut Scope::new()).unwrap()
}

pub fn term(src: &str, ids: &IdGen) -> Term {
    parse_term(src, ids).unwrap()
}

pub fn weird_creature(ids: &IdGen) -> Vec<Term> {
    let t = terms(
        "s-refer(entity1), s-attrib(entity1, lambda(X, assessment(X, weird))), \
         s-attrib(entity1, lambda(X, category(X, creature)))",
        ids,
    );
    for x in &t {
        ids.observe_constants(x);
    }
    t
}
