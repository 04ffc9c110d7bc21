"""Association rule mining on categorical tabular data.

Neurosymbolic pipeline (denoising autoencoder + threshold rule extraction),
algorithmic baselines (FP-Growth, ECLAT), embedding-driven fine-tuning, a
rule-quality metric suite, and a scalability benchmark harness.
"""

from .autoencoder import (
    AutoencoderModel,
    TrainConfig,
    add_noise,
    default_layer_dims,
    forward,
    init_xavier,
    load_model,
    recon_loss,
    save_model,
    train,
)
from .bench import BenchmarkRecord, bench_finetune, bench_scalability
from .errors import (
    CsvParseError,
    EmbeddingFormatError,
    EmptyDatasetError,
    TabarmError,
)
from .extraction import ExtractionConfig, Reconstructor, build_test_vector, extract_rules
from .finetune import (
    EmbeddingMatrix,
    ProjectionEncoder,
    cosine_alignment_loss,
    finetune_dl,
    finetune_wi,
    load_embeddings,
    make_synthetic_embeddings,
    save_embeddings,
    train_projection_encoder,
)
from .metrics import RuleMetricsReport, evaluate_rules, score_rules, zhang
from .miners import (
    Itemset,
    Rule,
    brute_force_frequent,
    eclat_frequent,
    fpgrowth_frequent,
    generate_rules,
)
from .synth import generate_synthetic
from .tabular import (
    Dataset,
    Item,
    OneHotMatrix,
    OneHotSchema,
    TransactionDB,
    load_csv,
    one_hot_encode,
    to_transactions,
    zscore_discretize,
)

__version__ = "0.1.0"
