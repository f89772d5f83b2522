"""Fact-chain retrieval over edited knowledge graphs for in-context editing.

The pipeline: build an edited KG (base triples plus a bank of tail edits),
retrieve the fact chain sharing the most information with a question via
beam search over probability ratios, prune redundant facts by next-token
uncertainty, and steer a frozen model with the surviving facts in context.
"""

from .editing import (
    EditOutcome,
    Exemplar,
    GenerationBackend,
    GenerationResult,
    MockGenerator,
    PromptTemplate,
    RemoteGenerator,
    answer_with_edit,
    build_edit_prompt,
    check_edited_answer,
    default_template,
    load_mock_generator,
)
from .errors import (
    ChainError,
    ConfigError,
    ConflictError,
    CredentialError,
    DatasetError,
    KGEditError,
    OracleError,
    ProtocolError,
    RetrievalError,
    ScorerError,
    TransportError,
    ValidationError,
)
from .evaluation import (
    Case,
    EditBank,
    EvalReport,
    build_edit_bank,
    load_dataset,
    metrics_aggregate,
    retrieval_metrics,
    run_eval,
)
from .infotheory import (
    DiscreteJoint,
    mutual_information,
    random_markov_joint,
    shannon_entropy,
    verify_dpi,
)
from .kgstore import (
    Edit,
    EditedKG,
    FactChain,
    KGBuilder,
    Triple,
    build_edited_kg,
    load_edits,
    load_kg,
    load_triples,
    save_kg,
    validate_chain,
)
from .pruning import PrefixSet, PruneReport, editing_entropy, prefix_sets, prune
from .retrieval import (
    PathCandidate,
    RetrievalConfig,
    ScoredSubgraph,
    beam_search_retrieve,
    conditional_context,
    exhaustive_retrieve,
    mi_score,
    relation_log_ratio,
    unconditional_context,
)
from .scoring import (
    CompletionsClient,
    MockScorer,
    MockTable,
    RemoteScorer,
    Scorer,
    TokenDist,
    load_mock_table,
    make_mock_scorer,
    make_remote_scorer,
    verbalize_fact,
)

__version__ = "0.1.0"
