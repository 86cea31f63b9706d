//! Case-study models: the stationary three-component system, the synthetic
//! corroding deck, and condition-based maintenance policies.

pub mod condition;
pub mod deck;
pub mod three_component;

pub use condition::{
    condition_policy_state_values, enumerate_condition_policies, evaluate_condition_policy, rank_condition_policies,
    ConditionBasedPolicy,
};
pub use deck::{build_deck_model, synth_deck_spec, DeckModelSpec, DeckShape};
pub use three_component::{
    accuracy_matrix, build_factored, build_three_component, observe_all_action, three_component_system, ComponentSpec,
    ControlVariant, FactoredSystem, SystemPenaltyTable,
};
