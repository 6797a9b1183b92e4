"""Adapter-tuned task-oriented dialogue: synthetic data, TOD metrics, adapter training and inference."""

from ._toatod import (
    ConfigError,
    ContractError,
    Corpus,
    Model,
    OntologyError,
    ParseError,
    RoutingError,
    adapter_forward,
    combined_score,
    corpus_bleu,
    corpus_from_json,
    count_adapter_params,
    default_config,
    evaluate_gold,
    evaluate_predictions,
    generate_corpus,
    joint_goal_accuracy,
    load_corpus,
    parse_belief,
    reward_dst,
    reward_nlg_terms,
    sentence_bleu,
    serialize_belief,
    slot_accuracy,
    slot_f1,
)

__all__ = [name for name in dir() if not name.startswith("_")]
