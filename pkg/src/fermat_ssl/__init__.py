"""Semi-supervised classification with the sample Fermat distance."""
from .classifiers import (
    WknnConfig,
    default_k,
    naive_knn_predict,
    select_sigma_cv,
    weighted_knn_predict,
    wknn_transductive,
)
from .datagen import (
    LabeledDataset,
    TwoMoonModel,
    VmfClusterModel,
    estimate_intrinsic_dim,
    generate_two_moon,
    generate_vmf_clusters,
    load_csv_dataset,
    sample_labeled_indices,
)
from .embedding import (
    Embedding,
    LinearSvmModel,
    choose_target_dim,
    classical_mds,
    fd_svm_pipeline,
    svm_predict,
    train_linear_svm,
)
from .fermat_metric import (
    FermatMatrix,
    FermatParams,
    extend_out_of_sample,
    fermat_matrix,
    power_path_distances,
)
from .point_graph import (
    AdjacencyGraph,
    PointCloud,
    build_complete_graph,
    build_knn_graph,
    build_mst,
    union_graphs,
)

__version__ = "0.1.0"
