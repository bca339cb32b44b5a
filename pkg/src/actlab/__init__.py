"""Desk-scale adversarial consistency training and a numerical metrics lab."""

from .config import RunConfig, parse_config, serialize_config
from .consistency import ConsistencyModel, coefficients
from .data import Dataset, DatasetSpec, make_dataset
from .discriminator import Discriminator
from .networks import BackboneSpec, TimeEmbedding
from .schedules import (ScheduleConfig, TimestepGrid, adversarial_weight,
                        build_grid, ema_decay, step_count)
from .metrics import (audit_bound, frechet_score, js_divergence,
                      mode_coverage, wasserstein_1d, wasserstein_nd)
from .sampler import inpaint, sample_multistep, sample_one_step
from .trainer import (TrainState, build_state, dataset_from_config,
                      load_checkpoint, run_training, save_checkpoint,
                      train_step)

__version__ = "0.1.0"
