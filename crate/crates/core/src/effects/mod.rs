//! Total causal effects, interventional predictions and counterfactual validation.

mod counterfactual;
mod total;

pub use counterfactual::{
    counterfactual_validate, default_levels, write_counterfactual_csv, CounterfactualOptions,
    CounterfactualResult, CounterfactualSpec, Verdict,
};
pub use total::{
    predict_intervention, total_effects, total_effects_from_matrix, EffectMatrices, EffectsDocument,
    InterventionEffect,
};
