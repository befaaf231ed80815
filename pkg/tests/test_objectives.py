import math

import numpy as np
import pytest
import torch

from domainssl.data import Batch, OrderedItem, TransformedItem
from domainssl.model import (
    BackboneSpec,
    ModelSpec,
    TaskHeadSpec,
    classify,
    forward_features,
    init_parameters,
    pretext_logits,
)
from domainssl.objectives import (
    ClassWeights,
    LossWeights,
    cross_entropy,
    da_objective,
    da_terms,
    dg_objective,
    dg_terms,
    entropy,
    estimate_class_weights,
    lambda_schedule,
    pda_objective,
    pda_terms,
)
from domainssl.permutations import generate_permutation_set
from domainssl.transforms import PretextTask, SelfSupSample, TaskKind

TINY = ModelSpec(
    backbone=BackboneSpec(kind="small_conv", input_size=16, conv_channels=(4, 6), fc_width=24, feature_dim=8),
    num_classes=3,
    tasks=(TaskHeadSpec(kind="jigsaw", cardinality=5, grid_n=3), TaskHeadSpec(kind="rotation", cardinality=4)),
)

TASKS = (
    PretextTask(kind=TaskKind.JIGSAW, grid_n=3, permutations=generate_permutation_set(9, 5, 0)),
    PretextTask(kind=TaskKind.ROTATION),
)


def onehot(label, num):
    v = np.zeros(num, dtype=np.float64)
    v[label] = 1.0
    return v


def tiny_bundle(seed=0):
    return init_parameters(TINY, seed=seed, dtype=torch.float64)


def micro_batch(rng, labels=(0, 1), pretext=((TaskKind.JIGSAW, 2), (TaskKind.ROTATION, 3)), labeled=True):
    ordered = [
        OrderedItem(
            image=rng.random((16, 16, 3)).astype(np.float32),
            class_onehot=onehot(lab, 3) if labeled else None,
            provenance="source" if labeled else "target",
        )
        for lab in labels
    ]
    transformed = [
        TransformedItem(
            sample=SelfSupSample(image=rng.random((16, 16, 3)).astype(np.float32), pretext_label=p, task=kind),
            provenance="source" if labeled else "target",
        )
        for kind, p in pretext
    ]
    return Batch(ordered=ordered, transformed=transformed, tasks=TASKS)


def np_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def np_ce(logits, labels):
    p = np_softmax(logits)
    return float(np.mean([-math.log(p[i, lab]) for i, lab in enumerate(labels)]))


# ---------------------------------------------------------------- elementary losses

def test_cross_entropy_uniform_is_log_c():
    for c in (2, 5, 13):
        loss = cross_entropy(
            torch.zeros(4, c, dtype=torch.float64),
            torch.full((4, c), 1.0 / c, dtype=torch.float64),
        )
        assert abs(loss.item() - math.log(c)) <= 1e-12


def test_cross_entropy_peaked_goes_to_zero():
    logits = torch.tensor([[40.0, 0.0, 0.0]])
    loss = cross_entropy(logits, torch.tensor([[1.0, 0.0, 0.0]]))
    assert loss.item() < 1e-12


def test_cross_entropy_matches_direct_evaluation():
    rng = np.random.default_rng(0)
    logits = rng.standard_normal((6, 3))
    labels = [int(v) for v in rng.integers(0, 3, 6)]
    oh = np.stack([onehot(l, 3) for l in labels])
    got = cross_entropy(torch.tensor(logits), torch.tensor(oh)).item()
    assert abs(got - np_ce(logits, labels)) <= 1e-9


def test_cross_entropy_rejects_bad_input():
    with pytest.raises(ValueError):
        cross_entropy(torch.zeros(0, 3), torch.zeros(0, 3))
    with pytest.raises(ValueError):
        cross_entropy(torch.zeros(2, 3), torch.zeros(2, 4))
    with pytest.raises(ValueError):
        cross_entropy(torch.zeros(1, 3), torch.tensor([[0.5, 0.2, 0.0]]))


def test_entropy_identities():
    assert entropy(torch.tensor([[1.0, 0.0, 0.0]], dtype=torch.float64)).item() == 0.0
    uniform7 = torch.full((3, 7), 1.0 / 7.0, dtype=torch.float64)
    assert abs(entropy(uniform7).item() - math.log(7)) <= 1e-9
    assert abs(entropy(torch.tensor([[0.5, 0.5, 0.0]], dtype=torch.float64)).item() - math.log(2)) <= 1e-12


def test_entropy_rejects_bad_rows():
    with pytest.raises(ValueError):
        entropy(torch.tensor([[0.5, 0.6]]))
    with pytest.raises(ValueError):
        entropy(torch.tensor([[-0.1, 1.1]]))
    with pytest.raises(ValueError):
        entropy(torch.zeros(0, 2))


def test_entropy_range_property():
    rng = np.random.default_rng(1)
    for _ in range(100):
        c = int(rng.integers(2, 9))
        p = rng.random((5, c))
        p = p / p.sum(axis=1, keepdims=True)
        h = entropy(torch.tensor(p)).item()
        assert -1e-12 <= h <= math.log(c) + 1e-12


# ---------------------------------------------------------------- class weights

def test_estimate_class_weights_direct_case():
    got = estimate_class_weights(np.array([[0.5, 0.5], [1.0, 0.0]]))
    assert np.allclose(got.gamma, [1.0, 1.0 / 3.0], atol=1e-15)
    assert got.gamma.max() == 1.0


def test_estimate_class_weights_degenerate_and_uniform():
    rows = np.tile(onehot(2, 4), (5, 1))
    got = estimate_class_weights(rows)
    assert np.array_equal(got.gamma, onehot(2, 4))
    uniform = estimate_class_weights(np.full((7, 3), 1.0 / 3.0))
    assert np.array_equal(uniform.gamma, np.ones(3))


def test_estimate_class_weights_duplication_invariant():
    rng = np.random.default_rng(2)
    p = rng.random((6, 4))
    p = p / p.sum(axis=1, keepdims=True)
    a = estimate_class_weights(p).gamma
    b = estimate_class_weights(np.vstack([p, p])).gamma
    assert np.allclose(a, b, atol=1e-12)


def test_class_weights_validation():
    with pytest.raises(ValueError):
        ClassWeights(np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        ClassWeights(np.array([1.0, -0.1]))
    with pytest.raises(ValueError):
        estimate_class_weights(np.zeros((0, 3)))


# ---------------------------------------------------------------- schedule

def test_lambda_schedule_endpoints_and_ceiling():
    assert lambda_schedule(0.0, 1.0) == 0.0
    expected = 2.0 / (1.0 + math.exp(-10.0)) - 1.0
    assert abs(lambda_schedule(1.0, 1.0) - expected) <= 1e-12
    assert lambda_schedule(1.0, 0.1) < 0.1
    values = [lambda_schedule(p, 0.1) for p in np.linspace(0, 1, 21)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_lambda_schedule_clamps_with_warning():
    with pytest.warns(UserWarning):
        assert lambda_schedule(1.5, 1.0) == lambda_schedule(1.0, 1.0)


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(alpha_s={"jigsaw": -0.1})
    with pytest.raises(ValueError):
        LossWeights(eta=-1.0)


# ---------------------------------------------------------------- generalization objective

def test_dg_zero_alpha_equals_plain_cross_entropy():
    rng = np.random.default_rng(3)
    bundle = tiny_bundle()
    batch = micro_batch(rng)
    weights = LossWeights(alpha_s={"jigsaw": 0.0, "rotation": 0.0})
    got = dg_objective(batch, bundle, weights).item()
    feats = forward_features(bundle, np.stack([it.image for it in batch.ordered]))
    plain = cross_entropy(classify(bundle, feats), torch.tensor(np.stack([it.class_onehot for it in batch.ordered])))
    assert abs(got - plain.item()) <= 1e-12


def test_dg_matches_direct_formula():
    rng = np.random.default_rng(4)
    bundle = tiny_bundle(seed=1)
    batch = micro_batch(rng)
    weights = LossWeights(alpha_s={"jigsaw": 0.7, "rotation": 0.4})

    images = np.stack([it.image for it in batch.ordered] + [tr.sample.image for tr in batch.transformed])
    feats = forward_features(bundle, images)
    obj_logits = classify(bundle, feats[:2]).detach().numpy()
    jig_logits = pretext_logits(bundle, feats[[0, 1, 2]], "jigsaw").detach().numpy()
    rot_logits = pretext_logits(bundle, feats[[0, 1, 3]], "rotation").detach().numpy()
    expected = (
        np_ce(obj_logits, [0, 1])
        + 0.7 * np_ce(jig_logits, [0, 0, 2])
        + 0.4 * np_ce(rot_logits, [0, 0, 3])
    )
    assert abs(dg_objective(batch, bundle, weights).item() - expected) <= 1e-9


def test_dg_requires_ordered_labeled_items():
    rng = np.random.default_rng(5)
    bundle = tiny_bundle()
    batch = micro_batch(rng)
    batch.ordered.clear()
    with pytest.raises(ValueError, match="ordered labeled"):
        dg_objective(batch, bundle, LossWeights())


def test_dg_perfect_model_loss_vanishes():
    rng = np.random.default_rng(6)
    bundle = tiny_bundle()
    batch = micro_batch(rng, labels=(1, 1), pretext=())
    with torch.no_grad():
        for p in bundle.parameters():
            p.zero_()
        bundle.object_head.bias[1] = 200.0
        bundle.pretext_heads["jigsaw"].bias[0] = 200.0
        bundle.pretext_heads["rotation"].bias[0] = 200.0
    loss = dg_objective(batch, bundle, LossWeights(alpha_s={"jigsaw": 1.0, "rotation": 1.0}))
    assert loss.item() < 1e-12


# ---------------------------------------------------------------- adaptation objective

def test_da_reduces_to_dg_when_weights_vanish():
    rng = np.random.default_rng(7)
    bundle = tiny_bundle(seed=2)
    source = micro_batch(rng)
    target = micro_batch(rng, labeled=False)
    weights = LossWeights(alpha_s={"jigsaw": 0.5, "rotation": 0.5}, alpha_t={"jigsaw": 0.0, "rotation": 0.0}, eta=0.0)
    assert da_objective(source, target, bundle, weights).item() == dg_objective(source, bundle, weights).item()


def test_da_matches_direct_formula():
    rng = np.random.default_rng(8)
    bundle = tiny_bundle(seed=3)
    source = micro_batch(rng)
    target = micro_batch(rng, labeled=False, pretext=((TaskKind.ROTATION, 1), (TaskKind.ROTATION, 2)))
    weights = LossWeights(
        alpha_s={"jigsaw": 0.7, "rotation": 0.4},
        alpha_t={"jigsaw": 0.3, "rotation": 0.9},
        eta=0.1,
    )
    got = da_objective(source, target, bundle, weights).item()

    expected = dg_objective(source, bundle, weights).item()
    t_images = np.stack([it.image for it in target.ordered] + [tr.sample.image for tr in target.transformed])
    t_feats = forward_features(bundle, t_images)
    t_obj = np_softmax(classify(bundle, t_feats[:2]).detach().numpy())
    ent = float(np.mean([-(row * np.log(row)).sum() for row in t_obj]))
    expected += 0.1 * ent
    jig_logits = pretext_logits(bundle, t_feats[[0, 1]], "jigsaw").detach().numpy()
    rot_logits = pretext_logits(bundle, t_feats[[0, 1, 2, 3]], "rotation").detach().numpy()
    expected += 0.3 * np_ce(jig_logits, [0, 0]) + 0.9 * np_ce(rot_logits, [0, 0, 1, 2])
    assert abs(got - expected) <= 1e-9


def test_da_rejects_labeled_target():
    rng = np.random.default_rng(9)
    bundle = tiny_bundle()
    with pytest.raises(ValueError, match="unlabeled"):
        da_objective(micro_batch(rng), micro_batch(rng), bundle, LossWeights())


# ---------------------------------------------------------------- partial adaptation

def pda_weights(eta=0.2, alpha_t=1.0):
    return LossWeights(
        alpha_s={"jigsaw": 0.0, "rotation": 0.0},
        alpha_t={"jigsaw": alpha_t, "rotation": alpha_t},
        eta=eta,
        lambda_max=0.1,
    )


def test_pda_rejects_nonzero_source_alpha():
    rng = np.random.default_rng(10)
    bundle = tiny_bundle()
    weights = LossWeights(alpha_s={"jigsaw": 0.5}, alpha_t={"jigsaw": 1.0})
    with pytest.raises(ValueError, match="source pretext"):
        pda_objective(micro_batch(rng), micro_batch(rng, labeled=False), bundle, weights, ClassWeights.uniform(3), 0.0)


def test_pda_lambda_zero_uniform_gamma_matches_da_gradients():
    rng = np.random.default_rng(11)
    bundle = tiny_bundle(seed=4)
    source = micro_batch(rng)
    target = micro_batch(rng, labeled=False)
    weights = pda_weights()

    terms, total = pda_terms(source, target, bundle, weights, ClassWeights.uniform(3), lam=0.0)
    bundle.zero_grad()
    total.backward()
    pda_grads = {
        n: p.grad.clone()
        for n, p in bundle.named_parameters()
        if not n.startswith("discriminator") and p.grad is not None
    }

    bundle.zero_grad()
    da_objective(source, target, bundle, weights).backward()
    for name, grad in pda_grads.items():
        other = dict(bundle.named_parameters())[name].grad
        assert torch.allclose(grad, other, atol=1e-12), name

    # the scalar differs from the adaptation objective exactly by the discriminator term
    da_val = da_objective(source, target, bundle, weights).item()
    assert abs((total - terms["domain_bce"]).item() - da_val) <= 1e-9


def test_pda_zero_gamma_class_contributes_nothing():
    rng = np.random.default_rng(12)
    bundle = tiny_bundle(seed=5)
    gamma = ClassWeights(np.array([1.0, 0.0, 1.0]))
    weights = pda_weights()
    target = micro_batch(rng, labeled=False)

    a = micro_batch(np.random.default_rng(100), labels=(0, 1))
    b = micro_batch(np.random.default_rng(100), labels=(0, 1))
    # replace only the class-1 ordered image; its weight is zero so nothing may change
    b.ordered[1] = OrderedItem(
        image=np.random.default_rng(999).random((16, 16, 3)).astype(np.float32),
        class_onehot=onehot(1, 3),
        provenance="source",
    )
    la = pda_objective(a, target, bundle, weights, gamma, lam=0.7).item()
    lb = pda_objective(b, target, bundle, weights, gamma, lam=0.7).item()
    assert la == lb


def test_pda_gradients_match_hand_applied_reversal():
    rng = np.random.default_rng(13)
    bundle = tiny_bundle(seed=6)
    source = micro_batch(rng)
    target = micro_batch(rng, labeled=False)
    gamma = ClassWeights(np.array([1.0, 0.5, 0.25]))
    weights = pda_weights()
    lam = 0.3

    bundle.zero_grad()
    pda_objective(source, target, bundle, weights, gamma, lam).backward()
    got = {n: p.grad.clone() for n, p in bundle.named_parameters()}

    # direct evaluation: main terms plus the discriminator cross-entropy with
    # the reversal sign applied by hand at the feature boundary
    params = dict(bundle.named_parameters())
    src_images = np.stack([it.image for it in source.ordered])
    tgt_images = np.stack(
        [it.image for it in target.ordered] + [tr.sample.image for tr in target.transformed]
    )
    f_src = forward_features(bundle, src_images)
    f_tgt = forward_features(bundle, tgt_images)
    w_rows = torch.tensor([1.0, 0.5], dtype=torch.float64)

    logits = classify(bundle, f_src)
    z = logits - logits.max(dim=1, keepdim=True).values
    logp = z - torch.log(torch.exp(z).sum(dim=1, keepdim=True))
    main = (w_rows * -(torch.tensor(np.stack([it.class_onehot for it in source.ordered])) * logp).sum(1)).mean()
    probs = torch.softmax(classify(bundle, f_tgt[:2]), dim=1)
    main = main + weights.eta * (-(probs * torch.log(probs.clamp_min(1e-12))).sum(1).mean())
    jig = pretext_logits(bundle, f_tgt[[0, 1, 2]], "jigsaw")
    zj = jig - jig.max(dim=1, keepdim=True).values
    lpj = zj - torch.log(torch.exp(zj).sum(dim=1, keepdim=True))
    main = main + 1.0 * (-lpj[torch.arange(3), torch.tensor([0, 0, 2])].mean())
    rot = pretext_logits(bundle, f_tgt[[0, 1, 3]], "rotation")
    zr = rot - rot.max(dim=1, keepdim=True).values
    lpr = zr - torch.log(torch.exp(zr).sum(dim=1, keepdim=True))
    main = main + 1.0 * (-lpr[torch.arange(3), torch.tensor([0, 0, 3])].mean())

    p_src = torch.sigmoid(bundle.discriminator(f_src)).squeeze(-1)
    p_tgt = torch.sigmoid(bundle.discriminator(f_tgt[:2])).squeeze(-1)
    adv = -((w_rows * torch.log(p_src.clamp_min(1e-12))).mean() + torch.log((1 - p_tgt).clamp_min(1e-12)).mean())

    names = list(params)
    g_main = torch.autograd.grad(main, list(params.values()), retain_graph=True, allow_unused=True)
    g_adv = torch.autograd.grad(adv, list(params.values()), allow_unused=True)
    for name, gm, ga in zip(names, g_main, g_adv):
        if name.startswith("discriminator"):
            expected = ga
        elif name.startswith(("object_head", "pretext_heads")):
            expected = gm
        else:  # backbone: adversarial gradient enters reversed and scaled
            expected = gm + (-lam) * ga if ga is not None else gm
        assert torch.allclose(got[name], expected, atol=1e-9), name


def test_pda_discriminator_and_backbone_disagree_on_sign():
    rng = np.random.default_rng(14)
    bundle = tiny_bundle(seed=7)
    source = micro_batch(rng)
    target = micro_batch(rng, labeled=False)
    weights = pda_weights(eta=0.0, alpha_t=0.0)
    gamma = ClassWeights.uniform(3)

    def backbone_adv_grad(lam):
        bundle.zero_grad()
        terms, _ = pda_terms(source, target, bundle, weights, gamma, lam)
        terms["domain_bce"].backward()
        return bundle.backbone.conv1.weight.grad.clone(), bundle.discriminator[0].weight.grad.clone()

    g_f_1, g_d_1 = backbone_adv_grad(1.0)
    g_f_0, g_d_0 = backbone_adv_grad(0.0)
    assert torch.count_nonzero(g_f_0) == 0  # lambda 0 cuts the reversed path
    assert torch.equal(g_d_1, g_d_0)  # discriminator update does not scale with lambda
    bundle.zero_grad()
    # doubling lambda doubles the reversed gradient
    g_f_2, _ = backbone_adv_grad(2.0)
    assert torch.allclose(g_f_2, 2.0 * g_f_1, atol=1e-12)
