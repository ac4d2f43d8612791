"""Question-aware schema filtering for Text2SQL.

Given a natural-language question and a relational schema, score every column,
rerank the scores with a relation-aware graph transformer over the
functional-dependency graph, and close the top-ranked set into a
connectivity-preserving sub-schema with a greedy Steiner procedure.
"""

from .schema import (
    ColumnDef,
    ColumnRef,
    DatabaseSchema,
    ForeignKey,
    LabeledExample,
    TableDef,
    apply_metadata,
    load_schema,
    save_schema,
)
from .sqlrefs import build_labeled_example, extract_gold_columns
from .fdgraph import (
    EdgeType,
    FdGraph,
    KeyPrediction,
    build_fd_graph,
    infer_keys_heuristic,
    load_graph,
    merge_keys,
    serialize_graph,
)
from .values import InvertedIndex, ValueHit, build_value_index, retrieve_values
from .contexts import ColumnContext, assemble_context, render_context, render_prompt
from .providers import HashProvider, RemoteProvider, hash_embed
from .reranker import (
    RerankerParams,
    ScoreTable,
    TrainingConfig,
    forward,
    grad,
    infonce_loss,
    load_params,
    margin_loss,
    save_params,
    score,
    train,
)
from .steiner import SteinerResult, TerminalSet, closure, edge_costs, greedy_steiner
from .pipeline import Engine, FilterRequest, FilterResponse
from .metrics import precision_at_high_recall, pr_auc, roc_auc, sweep_metrics

__version__ = "0.1.0"
