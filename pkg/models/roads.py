"""
Composite anomaly detector: frozen teacher, bottleneck, prompt-conditioned
student decoder and the per-image domain adapter.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import torch
import torch.nn as nn

from models.adapter import DomainAdapter
from models.backbone import Bottleneck, FeatureMapSet, compress
from models.decoder import Decoder
from models.factory import build_encoder
from models.prompts import AnomalyClassifier, PooledClassHead, PromptPool, classify, classify_final

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')


@dataclass
class ModelOutput:
    teacher: FeatureMapSet
    student: FeatureMapSet
    router_logits: Optional[torch.Tensor] = None
    final_logits: Optional[torch.Tensor] = None
    routed_class: Optional[torch.Tensor] = None
    style_code: Optional[torch.Tensor] = None
    posteriors: Optional[List[torch.Tensor]] = None


class RoadsModel(nn.Module):
    """
    Args:
        encoder (Encoder): Teacher backbone (frozen here)
        n_classes (int): Number of classes N
        embed_channels (int): Bottleneck width C_phi
        blocks_per_stage (int): AdaIN residual blocks per decoder stage
        prompt_length (int): Tokens per class l
        prompt_dim (int): Token width M_t
        num_heads (int): Cross-attention heads h
        ffn_ratio (int): FFN expansion
        style_dim (int): Style code width D_s
        classifier_hidden (int): Router width
        prompt_position (str): Where prompts enter each decoder stage
        use_prompts (bool): Class prompt pool, router and L_CE
        use_adapter (bool): Domain adapter, AdaIN modulation and L_CS
        seed (int): Prompt pool initialization seed
    """

    def __init__(self, encoder, n_classes, embed_channels=128, blocks_per_stage=2, prompt_length=4,
                 prompt_dim=64, num_heads=4, ffn_ratio=2, style_dim=64, classifier_hidden=128,
                 prompt_position="after_blocks", use_prompts=True, use_adapter=True, seed=0):
        super().__init__()
        self.logger = logging.getLogger(self.__class__.__name__)
        if n_classes < 1:
            raise ValueError(f"n_classes must be positive, got {n_classes}")
        self.n_classes = n_classes
        self.use_prompts = use_prompts
        self.use_adapter = use_adapter
        self.dims = {
            "embed_channels": embed_channels,
            "blocks_per_stage": blocks_per_stage,
            "prompt_length": prompt_length,
            "prompt_dim": prompt_dim,
            "num_heads": num_heads,
            "ffn_ratio": ffn_ratio,
            "style_dim": style_dim,
            "classifier_hidden": classifier_hidden,
            "prompt_position": prompt_position,
        }

        self.encoder = encoder.freeze()
        self.bottleneck = Bottleneck(encoder.channels, encoder.strides, embed_channels)
        self.decoder = Decoder(
            encoder.channels,
            encoder.strides,
            embed_channels,
            blocks_per_stage=blocks_per_stage,
            prompt_dim=prompt_dim,
            num_heads=num_heads,
            use_prompts=use_prompts,
            prompt_position=prompt_position,
            ffn_ratio=ffn_ratio,
        )
        self.decoder.check_mirror(encoder.level_shapes())

        self.prompt_pool = None
        self.router = None
        self.final_head = None
        if use_prompts:
            self.prompt_pool = PromptPool(n_classes, prompt_length, prompt_dim, seed=seed)
            self.router = AnomalyClassifier(encoder.channels[-1], n_classes, prompt_dim, classifier_hidden)
            self.final_head = PooledClassHead(prompt_dim, n_classes)

        self.adapter = None
        if use_adapter:
            self.adapter = DomainAdapter.from_encoder(encoder, style_dim, self.decoder.adain_channels)

        self.logger.info(
            f"Built model: {n_classes} classes, prompts={'on' if use_prompts else 'off'}, "
            f"adapter={'on' if use_adapter else 'off'}"
        )

    @classmethod
    def from_config(cls, model_config, n_classes, image_size, seed=0, pretrained=None):
        """
        Build from the `model` config section.

        Args:
            model_config (dict): Model section of the resolved config
            n_classes (int): Number of classes
            image_size (int): Square input size
            seed (int): Prompt pool seed
            pretrained (bool, optional): Override `encoder_pretrained` (checkpoint loading passes False)

        Returns:
            RoadsModel: New model
        """
        if pretrained is None:
            pretrained = model_config["encoder_pretrained"]
        encoder = build_encoder(
            model_config["encoder"],
            channels=model_config.get("encoder_channels"),
            input_size=image_size,
            pretrained=pretrained,
        )
        return cls(
            encoder,
            n_classes,
            embed_channels=model_config["embed_channels"],
            blocks_per_stage=model_config["blocks_per_stage"],
            prompt_length=model_config["prompt_length"],
            prompt_dim=model_config["prompt_dim"],
            num_heads=model_config["num_heads"],
            ffn_ratio=model_config["ffn_ratio"],
            style_dim=model_config["style_dim"],
            classifier_hidden=model_config["classifier_hidden"],
            prompt_position=model_config["prompt_position"],
            use_prompts=model_config["use_prompts"],
            use_adapter=model_config["use_adapter"],
            seed=seed,
        )

    def train(self, mode=True):
        super().train(mode)
        # teacher BatchNorm statistics never move
        self.encoder.eval()
        if self.adapter is not None and not self.adapter.trunk_trainable:
            self.adapter.trunk.eval()
        return self

    def sync_adapter_trunk(self):
        """Re-copy teacher weights into the style trunk (after teacher pre-training)."""
        if self.adapter is not None:
            self.adapter.trunk.load_state_dict(self.encoder.state_dict())

    def route(self, teacher):
        """
        Router logits and posterior vector from the deepest teacher level.

        Returns:
            tuple: (B, N) logits and (B, M_t) vector, or (None, None) without prompts
        """
        if self.router is None:
            return None, None
        return classify(self.router, teacher)

    def decode(self, embedding, class_index=None, style_code=None):
        """
        Reconstruct the teacher pyramid from an embedding.

        Args:
            embedding (Tensor): (B, C_phi, H_M, W_M)
            class_index (LongTensor, optional): (B,) prompt indices; required with prompts
            style_code (Tensor, optional): (B, D_s) style codes; identity AdaIN when None

        Returns:
            tuple: Student FeatureMapSet and list of posterior tokens
        """
        tokens = None
        if self.use_prompts:
            if class_index is None:
                raise ValueError("Prompt-conditioned decoding needs a class index per image")
            tokens = self.prompt_pool.select(class_index)
        adain_params = None
        if self.use_adapter and style_code is not None:
            adain_params = self.adapter.adain_params(style_code)
        return self.decoder(embedding, tokens, adain_params)

    def forward(self, images, class_index=None):
        """
        Full pass. With `class_index` the given classes select the prompts
        (training); without it the router's argmax does (inference).

        Args:
            images (Tensor): (B, 3, H, W)
            class_index (LongTensor, optional): (B,) ground-truth classes

        Returns:
            ModelOutput: Teacher and student pyramids plus routing and style outputs
        """
        with torch.no_grad():
            teacher = self.encoder.encode(images)
        embedding = compress(self.bottleneck, teacher)

        router_logits, posterior_vector = self.route(teacher)
        routed = None
        if self.use_prompts:
            routed = router_logits.argmax(dim=1)
            if class_index is None:
                class_index = routed

        style_code = self.adapter.style_code(images) if self.use_adapter else None
        student, posteriors = self.decode(embedding, class_index, style_code)
        if student.shapes() != teacher.shapes():
            raise ValueError(f"Student shapes {student.shapes()} do not match teacher {teacher.shapes()}")

        final_logits = None
        if self.use_prompts:
            final_logits = classify_final(self.final_head, posterior_vector, posteriors)

        return ModelOutput(
            teacher=teacher,
            student=student,
            router_logits=router_logits,
            final_logits=final_logits,
            routed_class=routed,
            style_code=style_code,
            posteriors=posteriors,
        )

    def manifest(self):
        return {
            "n_classes": self.n_classes,
            "use_prompts": self.use_prompts,
            "use_adapter": self.use_adapter,
            "encoder": self.encoder.manifest(),
            "decoder": self.decoder.manifest.to_dict(),
            **self.dims,
        }
