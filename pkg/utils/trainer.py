"""
Training loop over normal multi-class data.
"""

import json
import logging
import math
import os
import random

import numpy as np
import pandas as pd
import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.utils.data import DataLoader

from data.torch_dataset import AnomalyImageDataset, to_tensor, resize_image
from data.augment import augment_ood
from models.adapter import style_consistency_loss
from models.roads import RoadsModel
from utils.exceptions import ConfigError, DataError, NumericalError
from utils.losses import LossWeights, classification_loss, kd_loss, total_loss

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')

ADAPTER_TRUNK_MODES = ("finetune", "frozen")
DTYPES = ("float32", "float64")
LOG_FILE = "train_log.jsonl"


def seed_everything(seed):
    random.seed(seed)
    np.random.seed(seed % 2 ** 32)
    torch.manual_seed(seed)


def cosine_schedule(total_steps, min_lr_ratio):
    """LR multiplier decaying from 1 to `min_lr_ratio` over `total_steps`."""
    def factor(step):
        progress = min(step / max(total_steps, 1), 1.0)
        return min_lr_ratio + (1.0 - min_lr_ratio) * 0.5 * (1.0 + math.cos(math.pi * progress))
    return factor


class RoadsTrainer:
    """
    Owns the model and optimizer for one training run.

    Args:
        config (dict): Resolved configuration
        index (DatasetIndex): Dataset with a train split of normal images
        out_dir (str, optional): Where train_log.jsonl is written
    """

    def __init__(self, config, index, out_dir=None):
        self.logger = logging.getLogger(self.__class__.__name__)
        self.config = config
        self.index = index
        self.out_dir = out_dir
        self.seed = int(config["seed"])

        train_cfg = config["train"]
        model_cfg = config["model"]
        if train_cfg["dtype"] not in DTYPES:
            raise ConfigError(f"train.dtype must be one of {DTYPES}, got '{train_cfg['dtype']}'")
        if train_cfg["adapter_trunk"] not in ADAPTER_TRUNK_MODES:
            raise ConfigError(
                f"train.adapter_trunk must be one of {ADAPTER_TRUNK_MODES}, got '{train_cfg['adapter_trunk']}'"
            )
        self.dtype = getattr(torch, train_cfg["dtype"])
        self.kd_form = train_cfg["kd_form"]
        self.image_size = int(config["data"]["image_size"])

        train_samples = index.split("train")
        if not train_samples:
            raise DataError("Dataset has no training samples")
        if any(sample.label != 0 for sample in train_samples):
            raise DataError("Training split contains anomalous samples; only normal data may be used")

        seed_everything(self.seed)
        self.model = RoadsModel.from_config(model_cfg, index.n_classes, self.image_size, seed=self.seed)
        self.model.to(self.dtype)
        self.weights = LossWeights.from_config(
            train_cfg["loss_weights"], model_cfg["use_prompts"], model_cfg["use_adapter"]
        )

        self.train_set = AnomalyImageDataset(
            index,
            "train",
            self.image_size,
            with_ood=model_cfg["use_adapter"],
            seed=self.seed,
        )
        self.loader = DataLoader(
            self.train_set,
            batch_size=train_cfg["batch_size"],
            shuffle=True,
            num_workers=config["data"]["num_workers"],
            generator=torch.Generator().manual_seed(self.seed),
        )
        self.optimizer = None
        self.scheduler = None
        self.global_step = 0

    def pretrain_teacher(self, epochs=None):
        """
        Fit the toy teacher to class labels with a throwaway linear head, then
        freeze it and re-copy it into the style trunk. Skipped for pretrained
        backbones.

        Args:
            epochs (int, optional): Defaults to `model.encoder_pretrain_epochs`
        """
        model_cfg = self.config["model"]
        epochs = model_cfg["encoder_pretrain_epochs"] if epochs is None else epochs
        if epochs <= 0 or model_cfg["encoder_pretrained"]:
            self.logger.info("Skipping teacher pre-training")
            return None

        encoder = self.model.encoder
        for param in encoder.parameters():
            param.requires_grad_(True)
        head = nn.Linear(encoder.channels[-1], self.index.n_classes).to(self.dtype)
        optimizer = torch.optim.Adam(list(encoder.parameters()) + list(head.parameters()), lr=self.config["train"]["lr"])

        history = []
        encoder.train()
        for epoch in range(epochs):
            losses, correct, seen = [], 0, 0
            for batch in self.loader:
                images = batch["image"].to(self.dtype)
                target = batch["class_index"].long()
                logits = head(encoder(images)[-1].mean(dim=(-2, -1)))
                loss = F.cross_entropy(logits, target)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                losses.append(loss.item())
                correct += int((logits.argmax(dim=1) == target).sum())
                seen += len(target)
            history.append({"epoch": epoch + 1, "loss": float(np.mean(losses)), "accuracy": correct / seen})
            self.logger.info(
                f"Teacher pre-training epoch {epoch + 1}/{epochs}: loss {history[-1]['loss']:.4f}, "
                f"accuracy {history[-1]['accuracy']:.3f}"
            )

        encoder.freeze()
        self.model.sync_adapter_trunk()
        return pd.DataFrame(history)

    def build_optimizer(self, total_steps):
        """
        AdamW with three parameter groups: class tokens without weight decay,
        the adapter trunk at a reduced rate (or frozen), and everything else.
        """
        train_cfg = self.config["train"]
        lr = train_cfg["lr"]
        model = self.model

        prompt_params = [model.prompt_pool.tokens] if model.prompt_pool is not None else []
        trunk_params = []
        if model.adapter is not None:
            if train_cfg["adapter_trunk"] == "finetune":
                model.adapter.set_trunk_trainable(True)
                trunk_params = list(model.adapter.trunk.parameters())
            else:
                model.adapter.set_trunk_trainable(False)

        excluded = {id(p) for p in prompt_params + trunk_params}
        excluded |= {id(p) for p in model.encoder.parameters()}
        if model.adapter is not None:
            excluded |= {id(p) for p in model.adapter.trunk.parameters()}
        main_params = [p for p in model.parameters() if id(p) not in excluded and p.requires_grad]

        groups = [{"params": main_params, "lr": lr, "weight_decay": train_cfg["weight_decay"]}]
        if prompt_params:
            groups.append({"params": prompt_params, "lr": lr, "weight_decay": 0.0})
        if trunk_params:
            groups.append({"params": trunk_params, "lr": lr * train_cfg["adapter_lr_scale"],
                           "weight_decay": train_cfg["weight_decay"]})

        self.optimizer = torch.optim.AdamW(groups)
        self.scheduler = torch.optim.lr_scheduler.LambdaLR(
            self.optimizer, cosine_schedule(total_steps, train_cfg["min_lr_ratio"])
        )
        return self.optimizer

    def train_step(self, batch):
        """
        One optimization step on a batch of normal images.

        Args:
            batch (dict): image, label, class_index and (with the adapter) image_ood

        Returns:
            dict: l_kd, l_ce, l_cs, l_total, lr
        """
        labels = torch.as_tensor(batch["label"])
        if bool((labels != 0).any()):
            raise DataError("Anomalous sample in a training batch")
        if self.optimizer is None:
            self.build_optimizer(total_steps=len(self.loader) * self.config["train"]["epochs"])

        model = self.model
        model.train()
        images = batch["image"].to(self.dtype)
        target = torch.as_tensor(batch["class_index"]).long()

        output = model(images, class_index=target)
        l_kd = kd_loss(output.teacher, output.student, self.kd_form)
        zero = l_kd.new_zeros(())
        l_ce = zero
        if model.use_prompts:
            l_ce = classification_loss(output.router_logits, output.final_logits, target)
        l_cs = zero
        if model.use_adapter:
            code_ood = model.adapter.style_code(batch["image_ood"].to(self.dtype))
            l_cs = style_consistency_loss(output.style_code, code_ood)

        try:
            loss = total_loss(l_kd, l_ce, l_cs, self.weights)
        except NumericalError:
            self.logger.error(f"Aborting at step {self.global_step}: non-finite loss")
            raise

        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        lr = self.optimizer.param_groups[0]["lr"]
        self.scheduler.step()
        self.global_step += 1

        return {
            "step": self.global_step,
            "l_kd": l_kd.item(),
            "l_ce": l_ce.item(),
            "l_cs": l_cs.item(),
            "l_total": loss.item(),
            "lr": lr,
        }

    def fit(self, epochs=None):
        """
        Train for a number of epochs.

        Args:
            epochs (int, optional): Defaults to `train.epochs`

        Returns:
            DataFrame: Epoch means of every loss term
        """
        train_cfg = self.config["train"]
        epochs = train_cfg["epochs"] if epochs is None else epochs
        if self.optimizer is None:
            self.build_optimizer(total_steps=len(self.loader) * epochs)

        log_file = None
        if self.out_dir:
            os.makedirs(self.out_dir, exist_ok=True)
            log_file = open(os.path.join(self.out_dir, LOG_FILE), "a")

        history = []
        try:
            for epoch in range(1, epochs + 1):
                self.train_set.set_epoch(epoch)
                records = []
                for batch in self.loader:
                    record = self.train_step(batch)
                    record["epoch"] = epoch
                    records.append(record)
                    if log_file:
                        log_file.write(json.dumps(record) + "\n")
                    if self.global_step % train_cfg["log_every"] == 0:
                        self.logger.info(
                            f"step {record['step']}: kd {record['l_kd']:.4f} ce {record['l_ce']:.4f} "
                            f"cs {record['l_cs']:.4f} total {record['l_total']:.4f}"
                        )
                frame = pd.DataFrame(records)
                summary = {"epoch": epoch}
                for key in ("l_kd", "l_ce", "l_cs", "l_total"):
                    summary[key] = float(frame[key].mean())
                history.append(summary)
                self.logger.info(f"Epoch {epoch}/{epochs}: mean total loss {summary['l_total']:.4f}")
        finally:
            if log_file:
                log_file.close()

        return pd.DataFrame(history)

    def style_shift(self, samples=None, batch_size=64):
        """
        Mean L_CS over held-out (x, augment_ood(x)) pairs.

        Args:
            samples (list, optional): Records to use; defaults to the normal test images
            batch_size (int): Images per forward pass

        Returns:
            float: Mean style consistency loss, or None without the adapter or held-out images
        """
        if self.model.adapter is None:
            return None
        if samples is None:
            samples = [s for s in self.index.split("test") if s.label == 0]
        if not samples:
            self.logger.warning("No held-out normal samples, skipping the style-shift diagnostic")
            return None

        self.model.eval()
        losses = []
        with torch.no_grad():
            for start in range(0, len(samples), batch_size):
                chunk = samples[start:start + batch_size]
                images, views = [], []
                for offset, sample in enumerate(chunk):
                    image = resize_image(sample.load_image(), self.image_size)
                    images.append(to_tensor(image))
                    views.append(to_tensor(augment_ood(image, [self.seed, start + offset])))
                code_id = self.model.adapter.style_code(torch.stack(images).to(self.dtype))
                code_ood = self.model.adapter.style_code(torch.stack(views).to(self.dtype))
                losses.append(style_consistency_loss(code_id, code_ood).item() * len(chunk))
        return float(np.sum(losses) / len(samples))
