"""Glue between datasets and the model: preprocessing, GAF imaging, training
and evaluation of whole runs."""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import dsp, gaf, metrics, model as model_mod, optim
from .data import Dataset
from .model import ModelConfig, ModelParams


@dataclass
class ModelInputs:
    segs: Optional[np.ndarray]  # (N, w)
    imgs: Optional[np.ndarray]  # (N, w, w), float32 to bound memory
    labels: np.ndarray  # (N,)


def prepare_inputs(ds: Dataset, pre_cfg: dsp.PreprocessConfig, need_images: bool = True) -> ModelInputs:
    """Preprocess each series and encode its windows as GAF images.

    Every window inherits its source series' label.
    """
    segs: List[np.ndarray] = []
    labels: List[int] = []
    for row, label in zip(ds.values, ds.labels):
        sig = dsp.Signal(samples=row, fs=ds.fs)
        for seg in dsp.preprocess(sig, pre_cfg):
            segs.append(seg.values)
            labels.append(int(label))
    seg_arr = np.stack(segs)
    imgs = None
    if need_images:
        imgs = np.stack([gaf.gaf_transform(s) for s in segs]).astype(np.float32)
    return ModelInputs(segs=seg_arr, imgs=imgs, labels=np.array(labels, dtype=np.int64))


def inputs_for_variant(inputs: ModelInputs, cfg: ModelConfig):
    segs = inputs.segs if cfg.uses_temporal else None
    imgs = inputs.imgs if cfg.uses_spatial else None
    return segs, imgs


def train_and_evaluate(
    cfg: ModelConfig,
    train_inputs: ModelInputs,
    test_inputs: ModelInputs,
    train_cfg: optim.TrainConfig,
):
    """Train on the train inputs, evaluate the checkpoint on the test inputs."""
    tr_segs, tr_imgs = inputs_for_variant(train_inputs, cfg)
    result = optim.train(cfg, tr_segs, tr_imgs, train_inputs.labels, train_cfg)
    te_segs, te_imgs = inputs_for_variant(test_inputs, cfg)
    probs = model_mod.predict_probs(result.params, cfg, te_segs, te_imgs)
    report = metrics.evaluate(probs, test_inputs.labels, cfg.num_classes)
    return result, report
