"""One-step image-to-image translation toolkit."""

from .errors import NumericalError, ShapeError, TurboI2IError, ValidationError
from .generator import (LoRAParams, ModelConfig, OneStepTranslator,
                        forward_with_adapter_branch, merge_lora)
from .perceptual import (FeatureNet, FeatureStats, dino_struct_dist, fid_between,
                         fit_stats, frechet_distance, lpips_like)
from .adversarial import Discriminator, d_score, gan_loss_d, gan_loss_g
from .report import LossReport, LossWeights
from .objectives import (UnpairedBatch, cycle_loss, default_feature_net, diversity_loss,
                         identity_loss, paired_objective, rec_distance, unpaired_objective)
from .data import (EdgeConfig, SceneSpec, extract_edges, gen_two_domain_dataset, ingest,
                   render_scene, synth_sketch, write_dataset)
from .trainer import (TrainConfig, build_variant, dataset_size_sweep, evaluate_translation,
                      finetune_diversity, pretrain_backbone, run_ablation, train_paired,
                      train_unpaired)

__version__ = "0.1.0"
