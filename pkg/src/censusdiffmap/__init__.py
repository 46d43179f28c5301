"""Diffusion-map embeddings of area-level census tables and their evaluation
against deprivation indices."""

from .aggregation import AreaHierarchy, aggregate_features, aggregate_vector
from .evaluation import (
    DeprivationTable,
    EvaluationReport,
    classify_deprived,
    combine_domains,
    confusion,
    correlation_matrix,
    fn_domain_diagnostics,
    fn_oa_drilldown,
    orient,
    pearson,
    threshold_for_count,
)
from .graph import (
    FeatureMatrix,
    SimilarityGraph,
    build_similarity_graph,
    pairwise_distances,
    standardize,
)
from .io import export_choropleth, load_deprivation, load_features, load_hierarchy
from .pipeline import PipelineConfig, load_config, run_pipeline
from .spectral import (
    LaplacianMatrix,
    SpectralEmbedding,
    build_laplacian,
    compute_embedding,
    count_components,
    select_eigenvector,
)
from .synthetic import generate_synthetic

__version__ = "0.1.0"
