"""tidylearn: learn spatial arrangement preferences from example scenes.

A graph-attention variational autoencoder infers a low-dimensional user
preference vector from arranged scenes and predicts personalised
arrangements; classical baselines and a probabilistic pose-graph
optimiser provide comparison methods.
"""

from .autodiff import PlateauScheduler, SgdMomentum, Tensor
from .model import (
    PreferenceModel,
    TrainConfig,
    UserPosterior,
    arrange_new_scene,
    decode_positions,
    encode_user,
    infer_mean,
    load_model,
    no_prefs_arrangement,
    place_missing_object,
    reconstruct_scene,
    reparameterize,
    save_model,
    train,
    vae_loss,
)
from .posegraph import PoseGraphModel, fit_pose_graph, sample_and_score, select_tree, tidy
from .scenes import (
    Dataset,
    NormalizationStats,
    ObjectInstance,
    Scene,
    TemplateSpec,
    UserRecord,
    augment_noise,
    build_supergraph,
    fit_normalizer,
    load_dataset,
    mask_scene,
    mask_user,
    save_dataset,
)
from .semantics import EmbeddingTable, load_bundled_table, load_table
from .synth import SyntheticUserParams, generate_dataset, ground_truth_arrangement

__version__ = "0.1.0"
__all__ = [name for name in dir() if not name.startswith("_")]
