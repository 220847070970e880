import pytest
import torch

from models.adapter import AdaINHeads, style_consistency_loss
from models.decoder import Decoder
from models.roads import RoadsModel
from utils.losses import classification_loss, kd_loss
from tests.helpers import snapshot

CHANNELS, STRIDES = [8, 16, 32], [4, 8, 16]


def _decoder(**kwargs):
    torch.manual_seed(0)
    options = dict(blocks_per_stage=2, prompt_dim=8, num_heads=2)
    options.update(kwargs)
    return Decoder(CHANNELS, STRIDES, 16, **options)


def _model(encoder, **kwargs):
    torch.manual_seed(0)
    options = dict(embed_channels=16, blocks_per_stage=1, prompt_length=2, prompt_dim=8, num_heads=2,
                   style_dim=8, classifier_hidden=16)
    options.update(kwargs)
    return RoadsModel(encoder, 3, **options)


@pytest.mark.parametrize("position", ["after_blocks", "before_upsample"])
def test_decoder_mirrors_teacher_shapes(position):
    decoder = _decoder(prompt_position=position)
    student, posteriors = decoder(torch.randn(2, 16, 2, 2), torch.randn(2, 3, 8))
    assert student.source == "student"
    assert student.shapes() == [(8, 8, 8), (16, 4, 4), (32, 2, 2)]
    assert len(posteriors) == 3
    assert all(p.shape == (2, 3, 8) for p in posteriors)
    decoder.check_mirror([(8, 8, 8), (16, 4, 4), (32, 2, 2)])
    with pytest.raises(ValueError):
        decoder.check_mirror([(8, 8, 8), (16, 4, 4), (64, 2, 2)])


def test_decoder_manifest():
    decoder = _decoder()
    stages = decoder.manifest.stages
    assert [s.level for s in stages] == [2, 1, 0]
    assert [s.upsample for s in stages] == [1, 2, 2]
    assert decoder.manifest.level_channels() == CHANNELS
    assert decoder.adain_channels == [32, 32, 16, 16, 8, 8]
    assert _decoder(prompt_position="before_upsample").manifest.stages[0].prompt_channels == 16


def test_decoder_argument_checks():
    decoder = _decoder()
    embedding = torch.randn(1, 16, 2, 2)
    with pytest.raises(ValueError):
        decoder(embedding)
    with pytest.raises(ValueError):
        decoder(embedding, torch.randn(1, 3, 8), adain_params=[])
    with pytest.raises(ValueError):
        _decoder(prompt_position="middle")


def test_zeroed_prompt_output_reduces_to_plain_decoder():
    with_prompts = _decoder()
    for stage in with_prompts.prompt_stages:
        torch.nn.init.zeros_(stage.from_tokens.weight)
        torch.nn.init.zeros_(stage.from_tokens.bias)
    plain = _decoder(use_prompts=False)
    missing, unexpected = plain.load_state_dict(with_prompts.state_dict(), strict=False)
    assert not missing
    assert all(key.startswith("prompt_stages.") for key in unexpected)

    embedding = torch.randn(2, 16, 2, 2)
    a, _ = with_prompts(embedding, torch.randn(2, 3, 8))
    b, posteriors = plain(embedding)
    assert posteriors == []
    for x, y in zip(a, b):
        assert torch.equal(x, y)


def test_initial_adain_heads_equal_identity_modulation():
    decoder = _decoder()
    heads = AdaINHeads(8, decoder.adain_channels)
    embedding, tokens = torch.randn(2, 16, 2, 2), torch.randn(2, 3, 8)
    a, _ = decoder(embedding, tokens)
    b, _ = decoder(embedding, tokens, heads(torch.randn(2, 8)))
    for x, y in zip(a, b):
        assert torch.equal(x, y)


def test_model_forward_outputs(encoder):
    model = _model(encoder)
    out = model(torch.rand(4, 3, 32, 32), torch.tensor([0, 1, 2, 0]))
    assert out.student.shapes() == out.teacher.shapes()
    assert out.router_logits.shape == (4, 3)
    assert out.final_logits.shape == (4, 3)
    assert out.routed_class.shape == (4,)
    assert out.style_code.shape == (4, 8)
    assert len(out.posteriors) == 3

    with pytest.raises(ValueError):
        model(torch.rand(1, 3, 16, 16))


def test_ablated_model_has_no_optional_parts(encoder):
    model = _model(encoder, use_prompts=False, use_adapter=False)
    assert model.prompt_pool is None and model.router is None and model.adapter is None
    out = model(torch.rand(2, 3, 32, 32))
    assert out.router_logits is None and out.final_logits is None and out.style_code is None
    assert out.posteriors == []
    manifest = model.manifest()
    assert manifest["use_prompts"] is False and manifest["use_adapter"] is False


def test_gradients_reach_every_trainable_part(encoder):
    model = _model(encoder)
    model.train()
    images = torch.rand(4, 3, 32, 32)
    target = torch.tensor([0, 1, 2, 1])
    out = model(images, target)
    shifted = model.adapter.style_code(images.flip(-1))
    loss = (kd_loss(out.teacher, out.student)
            + classification_loss(out.router_logits, out.final_logits, target)
            + style_consistency_loss(out.style_code, shifted))
    loss.backward()

    parts = {
        "bottleneck": model.bottleneck,
        "decoder": model.decoder,
        "router": model.router,
        "final_head": model.final_head,
        "adapter.heads": model.adapter.heads,
        "adapter.project": model.adapter.project,
        "adapter.trunk": model.adapter.trunk,
    }
    for name, module in parts.items():
        grads = [p.grad for p in module.parameters() if p.grad is not None]
        assert grads and any(g.abs().sum() > 0 for g in grads), name
    assert model.prompt_pool.tokens.grad is not None
    assert all(p.grad is None for p in model.encoder.parameters())


def test_teacher_stays_in_eval_mode(encoder):
    model = _model(encoder)
    before = snapshot(model.encoder)
    model.train()
    assert not model.encoder.training
    assert model.decoder.training
    model(torch.rand(4, 3, 32, 32), torch.tensor([0, 1, 2, 0]))
    after = snapshot(model.encoder)
    assert all(torch.equal(before[k], after[k]) for k in before)


def test_inference_is_deterministic(encoder):
    model = _model(encoder).eval()
    images = torch.rand(3, 3, 32, 32)
    with torch.no_grad():
        a, b = model(images), model(images)
    for x, y in zip(a.student, b.student):
        assert torch.equal(x, y)
    assert torch.equal(a.routed_class, b.routed_class)
