//! Numerical checks of the individual steps in the Lifshitz-tail argument
//! for the density of states: the trace inequality, the smooth cutoff,
//! kernel decay, heat-kernel monotonicity under masking, and sublattice
//! decoupling.

mod cutoff;
mod decay;
mod decoupling;
mod heat;
mod lemma;

pub use cutoff::{audit_cutoff, make_cutoff, unit_step, CutoffAudit, Jet, SmoothCutoff, SmoothStep, MAX_DERIVATIVE};
pub use decay::{japanese_bracket, kernel_decay_profile, DecayProfile};
pub use decoupling::{
    evaluate_decoupling_bound, ChainTerms, DecouplingParams, DecouplingReport, SiteTerms, CHAIN_TOLERANCE,
};
pub use heat::{heat_cases, heat_comparison, HeatCasesReport, HeatComparison, HEAT_TOLERANCE};
pub use lemma::{
    check_trace_lemma, generate_case, run_lemma_corpus, FamilySummary, LemmaCase, LemmaCorpusReport, LemmaOutcome,
    PerturbationFamily, SpectralFunction, LEMMA_TOLERANCE, MAX_LEMMA_DIM,
};
