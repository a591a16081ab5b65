import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowids import diffcore as dc
from flowids.diffcore import Tensor, backward, cross_entropy, grad_check
from flowids.errors import ConfigError, DimensionError
from flowids.models import (
    KINDS,
    BranchOutputs,
    GraphContext,
    ModelConfig,
    SequenceIndex,
    adaptive_adjacency,
    attention_coeffs,
    build_model,
    diffusion_gconv,
    fuse_branches,
    gated_tcn,
    load_checkpoint,
    mean_aggregate,
    read_checkpoint,
    sage_edge_embed,
    sage_update,
    save_checkpoint,
)
from flowids.models.layers import attention_heads
from flowids.sampler import SampleConfig

from _oracles import sage_full_graph

SIX_SRC = [("a", 1), ("a", 1), ("b", 1), ("b", 1), ("c", 1), ("a", 1)]
SIX_DST = [("x", 1), ("y", 1), ("y", 1), ("z", 1), ("z", 1), ("x", 1)]


def six_context(seed=0, f=3):
    feats = np.random.default_rng(seed).normal(size=(6, f))
    return GraphContext.build(feats, SIX_SRC, SIX_DST, np.arange(6.0), pad=False)


def tiny_config(kind, in_dim=3, n_classes=3, **kw):
    base = dict(hidden=4, head_dim=2, heads=2, layers=2, n_nodes=6, seq_len=3,
                dropout=0.0, sample_sizes=(None,))
    base.update(kw)
    return ModelConfig.for_profile(kind, in_dim, n_classes, **base)


def random_context(r, n_src=6, n_dst=6, m=20, f=3):
    src = [(f"s{i}", 0) for i in r.integers(0, n_src, m)]
    dst = [(f"d{i}", 0) for i in r.integers(0, n_dst, m)]
    return GraphContext.build(r.normal(size=(m, f)), src, dst, r.permutation(m).astype(float),
                              pad=False)


# -- mean_aggregate ---------------------------------------------------------

def test_mean_of_identical():
    v = np.array([[1.5, -2.0]])
    out = mean_aggregate(Tensor(np.repeat(v, 3, axis=0)), np.zeros(3, int), 1)
    assert np.allclose(out.data, v)


def test_mean_empty_is_zero():
    out = mean_aggregate(Tensor(np.zeros((0, 2))), np.zeros(0, int), 1)
    assert out.data.tolist() == [[0.0, 0.0]]


def test_mean_two_unit_vectors():
    out = mean_aggregate(Tensor(np.eye(2)), np.array([0, 0]), 1)
    assert np.allclose(out.data, [[0.5, 0.5]])


# -- sage_update / sage_edge_embed -------------------------------------------

def test_sage_update_zero_weight(rng):
    out = sage_update(Tensor(rng.normal(size=(3, 2))), Tensor(rng.normal(size=(3, 2))),
                      Tensor(np.zeros((4, 5))))
    assert np.all(out.data == 0)


def test_sage_update_selects_previous_state(rng):
    h = np.abs(rng.normal(size=(3, 2))) + 0.1
    W = np.vstack([np.eye(2), np.zeros((2, 2))])
    out = sage_update(Tensor(h), Tensor(rng.normal(size=(3, 2))), Tensor(W))
    assert np.allclose(out.data, h)


def test_sage_update_three_node_path():
    # path a - b - c, all states 1, feature-free: h_N(b) = 1, h_N(a) = h_N(c) = 1
    h = np.ones((3, 1))
    h_nbr = np.ones((3, 1))
    W = np.array([[0.5], [-0.25]])
    out = sage_update(Tensor(h), Tensor(h_nbr), Tensor(W))
    assert np.allclose(out.data, [[0.25]] * 3)
    W2 = np.array([[-1.0], [0.5]])
    assert np.all(sage_update(Tensor(h), Tensor(h_nbr), Tensor(W2)).data == 0)


def test_sage_update_width_mismatch():
    with pytest.raises(DimensionError):
        sage_update(Tensor(np.ones((1, 2))), Tensor(np.ones((1, 2))), Tensor(np.ones((3, 1))))


def test_edge_embed_widths(rng):
    d, f = 4, 3
    hu, hv, e = rng.normal(size=(2, d)), rng.normal(size=(2, d)), rng.normal(size=(2, f))
    assert sage_edge_embed(Tensor(hu), Tensor(hv), e, False).shape == (2, 2 * d)
    assert sage_edge_embed(Tensor(hu), Tensor(hv), e, True).shape == (2, 2 * d + f)
    with_zero = sage_edge_embed(Tensor(hu), Tensor(hv), np.zeros((2, f)), True).data
    without = sage_edge_embed(Tensor(hu), Tensor(hv), e, False).data
    assert np.array_equal(with_zero[:, :2 * d], without)
    assert np.all(with_zero[:, 2 * d:] == 0)


@pytest.mark.parametrize("residual", [False, True])
def test_edge_embed_gradient_probe(rng, residual):
    e = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
    z = sage_edge_embed(Tensor(rng.normal(size=(2, 2))), Tensor(rng.normal(size=(2, 2))),
                        e, residual)
    W = Tensor(rng.normal(size=(z.shape[1], 2)), requires_grad=True)
    backward(dc.sum(z @ W), inputs=[e])
    assert (np.abs(e.grad).sum() > 0) == residual


# -- E-GraphSAGE-M ------------------------------------------------------------

def test_sage_matches_full_graph_six_nodes():
    ctx = six_context()
    m = build_model(tiny_config("egraphsage_m"), seed=3)
    out = m.forward(np.arange(6), ctx).data
    assert np.max(np.abs(out - sage_full_graph(m, ctx))) < 1e-9


def test_sage_matches_full_graph_random():
    r = np.random.default_rng(11)
    for trial in range(20):
        ctx = random_context(r, 10, 10, int(r.integers(5, 30)))
        assert ctx.bip_adj.num_nodes <= 50
        m = build_model(tiny_config("egraphsage_m", layers=int(r.integers(1, 4))), seed=trial)
        batch = r.choice(ctx.num_flows, size=min(7, ctx.num_flows), replace=False)
        out = m.forward(batch, ctx).data
        assert np.max(np.abs(out - sage_full_graph(m, ctx)[batch])) < 1e-9


def test_sage_single_isolated_edge():
    feats = np.array([[0.5, -1.0, 2.0]])
    ctx = GraphContext.build(feats, [("s", 1)], [("d", 1)], pad=False)
    m = build_model(tiny_config("egraphsage_m", layers=1), seed=0)
    p = {k: v.data for k, v in m.params.items()}
    # each endpoint sees exactly the one flow, whose other end is all-ones
    h = np.maximum(np.concatenate([np.ones(3), np.ones(3), feats[0]]) @ p["sage.W1"], 0)
    expected = np.concatenate([h, h, feats[0]]) @ p["head.W"] + p["head.b"]
    assert np.allclose(m.forward([0], ctx).data[0], expected, atol=1e-12)


def test_sage_batch_permutation():
    ctx = six_context()
    m = build_model(tiny_config("egraphsage_m", sample_sizes=(2,)), seed=1)
    perm = np.array([4, 2, 0, 5, 1, 3])
    base = m.forward(np.arange(6), ctx).data
    assert np.array_equal(m.forward(perm, ctx).data, base[perm])


# -- gated TCN ------------------------------------------------------------------

def tcn_params(rng, w=2, d_in=2, d_out=3, zero=False):
    make = (lambda s: np.zeros(s)) if zero else (lambda s: rng.normal(size=s))
    return [Tensor(make((w, d_in, d_out))), Tensor(rng.normal(size=d_out)),
            Tensor(make((w, d_in, d_out))), Tensor(rng.normal(size=d_out))]


def test_tcn_zero_filters(rng):
    t1, b, t2, c = tcn_params(rng, zero=True)
    out = gated_tcn(rng.normal(size=(4, 5, 2)), t1, b, t2, c).data
    expect = np.tanh(b.data) / (1 + np.exp(-c.data))
    assert np.allclose(out, np.broadcast_to(expect, out.shape))


def test_tcn_gate_saturates(rng):
    t1, b, t2, _ = tcn_params(rng)
    x = rng.normal(size=(3, 4, 2)) * 0.1
    t2 = Tensor(t2.data * 0.01)
    out = gated_tcn(x, t1, b, t2, Tensor(np.full(3, 30.0))).data
    open_gate = np.tanh(dc.conv1d_causal(x, t1, b).data)
    assert np.max(np.abs(out - open_gate)) < 1e-9


def test_tcn_single_channel_hand():
    x = np.array([1.0, 2.0, -1.0]).reshape(1, 3, 1)
    # kernel[0] weights the previous step, kernel[1] the current one
    t1 = Tensor(np.array([0.5, 1.0]).reshape(2, 1, 1))
    t2 = Tensor(np.array([-1.0, 0.25]).reshape(2, 1, 1))
    b, c = Tensor(np.array([0.1])), Tensor(np.array([-0.2]))
    a = [1.0 + 0.1, 2.0 + 0.5 + 0.1, -1.0 + 1.0 + 0.1]
    g = [0.25 - 0.2, 0.5 - 1.0 - 0.2, -0.25 - 2.0 - 0.2]
    expect = [np.tanh(ai) / (1 + np.exp(-gi)) for ai, gi in zip(a, g)]
    out = gated_tcn(x, t1, b, t2, c).data.reshape(-1)
    assert np.allclose(out, expect, atol=1e-15)


def test_tcn_causal(rng):
    t1, b, t2, c = tcn_params(rng, w=2, d_in=2, d_out=2)
    x = rng.normal(size=(2, 6, 2))
    h1 = gated_tcn(x, t1, b, t2, c, 1)
    base = gated_tcn(h1, t1, b, t2, c, 2).data
    y = x.copy()
    y[:, 4:, :] += 5.0
    out = gated_tcn(gated_tcn(y, t1, b, t2, c, 1), t1, b, t2, c, 2).data
    assert np.array_equal(out[:, :4], base[:, :4])
    assert not np.allclose(out[:, 4:], base[:, 4:])


# -- adaptive adjacency -------------------------------------------------------

def test_adaptive_zero_is_uniform():
    a = adaptive_adjacency(Tensor(np.zeros((5, 2))), Tensor(np.zeros((5, 2)))).data
    assert np.allclose(a, 0.2)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.integers(1, 4), st.integers(0, 2**31))
def test_adaptive_rows_stochastic(n, r, seed):
    g = np.random.default_rng(seed)
    a = adaptive_adjacency(Tensor(g.normal(size=(n, r)) * 3),
                           Tensor(g.normal(size=(n, r)) * 3)).data
    assert np.all(a >= 0)
    assert np.max(np.abs(a.sum(axis=1) - 1)) < 1e-9


def test_adaptive_dominant_column():
    E1 = np.ones((4, 1))
    E2 = np.array([[0.1], [0.2], [3.0], [0.3]])
    a = adaptive_adjacency(Tensor(E1), Tensor(E2)).data
    for row in a:
        assert row[2] > np.delete(row, 2).max()


def test_adaptive_rank_mismatch():
    with pytest.raises(DimensionError):
        adaptive_adjacency(Tensor(np.ones((3, 2))), Tensor(np.ones((3, 1))))


# -- diffusion ----------------------------------------------------------------

def path_transition(n):
    A = np.zeros((n, n))
    for i in range(n - 1):
        A[i, i + 1] = A[i + 1, i] = 1
    return A / A.sum(axis=1, keepdims=True), (A.T / A.T.sum(axis=1, keepdims=True))


def test_diffusion_order_zero(rng):
    x = rng.normal(size=(4, 3))
    ws = [tuple(Tensor(rng.normal(size=(3, 2))) for _ in range(3))]
    pf, pb = path_transition(4)
    z = diffusion_gconv(Tensor(x), pf, pb, Tensor(np.full((4, 4), 0.25)), ws).data
    assert np.allclose(z, x @ (ws[0][0].data + ws[0][1].data + ws[0][2].data))


def test_diffusion_symmetric_graph(rng):
    pf, pb = path_transition(5)
    assert np.allclose(pf, pb.T.T) and np.allclose(pf, pb)
    x = rng.normal(size=(5, 2))
    W = Tensor(rng.normal(size=(2, 3)))
    zero = Tensor(np.zeros((2, 3)))
    both = diffusion_gconv(Tensor(x), pf, pb, None, [(W, W, zero)] * 3).data
    one = diffusion_gconv(Tensor(x), pf, pb, None, [(W, zero, zero)] * 3).data
    assert np.allclose(both, 2 * one)


def test_diffusion_dense_power_oracle(rng):
    pf, pb = path_transition(4)
    pb = pb.copy()
    pb[0] = [0.2, 0.3, 0.5, 0.0]    # asymmetric backward operator
    A = rng.dirichlet(np.ones(4), size=4)
    x = rng.normal(size=(4, 3))
    ws = [tuple(Tensor(rng.normal(size=(3, 2))) for _ in range(3)) for _ in range(3)]
    z = diffusion_gconv(Tensor(x), pf, pb, Tensor(A), ws).data
    mp = np.linalg.matrix_power
    expect = sum(mp(pf, k) @ x @ ws[k][0].data + mp(pb, k) @ x @ ws[k][1].data
                 + mp(A, k) @ x @ ws[k][2].data for k in range(3))
    assert np.allclose(z, expect, atol=1e-12)


# -- attention ------------------------------------------------------------------

def test_attention_identical_neighbours(rng):
    wh = Tensor(np.tile(rng.normal(size=(1, 3)), (4, 1)))
    target = Tensor(np.tile(rng.normal(size=(1, 3)), (4, 1)))
    alpha = attention_coeffs(wh, target, Tensor(rng.normal(size=(6, 1))), np.zeros(4, int), 1).data
    assert np.allclose(alpha, 0.25)


def test_attention_zero_vector(rng):
    alpha = attention_coeffs(Tensor(rng.normal(size=(3, 2))), Tensor(rng.normal(size=(3, 2))),
                             Tensor(np.zeros((4, 1))), np.zeros(3, int), 1).data
    assert np.allclose(alpha, 1 / 3)


def test_attention_two_neighbour_hand():
    wu = np.array([[1.0, 0.0], [0.0, 2.0]])
    wv = np.array([[1.0, 1.0], [1.0, 1.0]])
    a = np.array([[1.0], [-1.0], [0.5], [0.5]])
    # scores: 1 + 1 = 2 ; -2 + 1 = -1 -> leaky 0.2 * -1 = -0.2
    alpha = attention_coeffs(Tensor(wu), Tensor(wv), Tensor(a), np.array([0, 0]), 1).data
    e = np.exp([2.0, -0.2])
    assert np.allclose(alpha, e / e.sum(), atol=1e-15)


def test_attention_single_head_single_neighbour(rng):
    h = Tensor(rng.normal(size=(2, 3)))
    W, a = Tensor(rng.normal(size=(3, 2))), Tensor(rng.normal(size=(4, 1)))
    out = attention_heads(h, np.array([0]), np.array([0]), np.array([1]), [(W, a)]).data
    assert np.allclose(out, np.tanh(h.data[1] @ W.data))


def test_attention_lonely_node_gets_self_edge(rng):
    h = Tensor(rng.normal(size=(2, 3)))
    W, a = Tensor(rng.normal(size=(3, 2))), Tensor(rng.normal(size=(4, 1)))
    out = attention_heads(h, np.array([0, 1]), np.array([0]), np.array([1]), [(W, a)]).data
    assert np.allclose(out[1], np.tanh(h.data[1] @ W.data))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["gat", "gtcn_g"]))
def test_attention_normalised_over_random_states(seed, kind):
    r = np.random.default_rng(seed)
    ctx = random_context(r, 4, 4, int(r.integers(2, 16)))
    cfg = tiny_config(kind, n_nodes=ctx.num_flows, sample_sizes=(int(r.integers(1, 4)),),
                      sample_seed=seed)
    m = build_model(cfg, seed=seed)
    alphas = []
    m.forward(np.arange(ctx.num_flows), ctx, alphas=alphas)
    assert alphas
    for alpha, owner in alphas:
        sums = np.bincount(owner, weights=alpha)
        assert np.all(alpha >= 0) and np.max(np.abs(sums - 1)) < 1e-6


def test_attention_output_width():
    ctx = six_context()
    m = build_model(tiny_config("gtcn_g", heads=3, head_dim=2, hidden=5), seed=0)
    from flowids.models.attention import attention_stack
    from flowids.sampler import khop_sample
    blk = khop_sample(np.arange(6), ctx.line_adj, m.config.sampling(), mode="nodes")
    h = attention_stack(m.params, m.config, "att", blk, ctx.features, True)
    assert h.shape == (6, 3 * 2 + 5)


# -- fusion -------------------------------------------------------------------

def branch_set(rng, n=4, widths=(2, 3, 4, 2)):
    return BranchOutputs(*[Tensor(rng.normal(size=(n, w))) for w in widths])


def test_fuse_only_one_branch_matters(rng):
    b = branch_set(rng)
    W, bias = Tensor(rng.normal(size=(11, 5))), Tensor(rng.normal(size=5))
    keep = BranchOutputs(Tensor(np.zeros((4, 2))), b.spatial, Tensor(np.zeros((4, 4))),
                         Tensor(np.zeros((4, 2))))
    out = fuse_branches(keep, W, bias).data
    assert np.allclose(out, np.maximum(b.spatial.data @ W.data[2:5] + bias.data, 0))


def test_fuse_row_permutation(rng):
    b = branch_set(rng)
    W, bias = Tensor(rng.normal(size=(11, 5))), Tensor(rng.normal(size=5))
    perm = np.array([2, 0, 3, 1])
    pb = BranchOutputs(*[Tensor(t.data[perm]) for t in b.as_list()])
    assert np.array_equal(fuse_branches(pb, W, bias).data, fuse_branches(b, W, bias).data[perm])


def test_fuse_mismatch(rng):
    b = branch_set(rng)
    b.residual = Tensor(np.zeros((3, 2)))
    with pytest.raises(DimensionError):
        fuse_branches(b, Tensor(np.zeros((11, 5))), Tensor(np.zeros(5)))


def test_gtcn_is_composition_of_branches():
    ctx = six_context()
    m = build_model(tiny_config("gtcn_g"), seed=2)
    p = {k: v.data for k, v in m.params.items()}
    b = m.branches(np.arange(6), ctx)
    x = np.hstack([t.data for t in b.as_list()])
    fused = np.maximum(x @ p["fuse.W"] + p["fuse.b"], 0)
    expect = fused @ p["head.W"] + p["head.b"]
    assert np.allclose(m.forward(np.arange(6), ctx).data, expect, atol=1e-12)
    # residual branch is W' e_v and nothing else
    assert np.allclose(b.residual.data, ctx.features @ p["res.W"])


# -- whole models -------------------------------------------------------------

@pytest.mark.parametrize("kind", KINDS)
def test_grad_check_six_nodes(kind):
    ctx = six_context()
    m = build_model(tiny_config(kind), seed=1)
    y = np.array([0, 1, 2, 0, 1, 2])
    err = grad_check(lambda *ps: cross_entropy(m.forward(np.arange(6), ctx), y),
                     m.parameters(), eps=1e-5)
    assert err < 1e-4


@pytest.mark.parametrize("kind", KINDS)
def test_eval_forward_bit_identical(kind):
    ctx = six_context()
    m = build_model(tiny_config(kind, dropout=0.5, sample_sizes=(2,)), seed=4)
    a = m.forward(np.arange(6), ctx).data
    b = m.forward(np.arange(6), ctx).data
    assert a.tobytes() == b.tobytes()


def test_gtcn_single_node():
    feats = np.array([[0.3, -0.7]])
    ctx = GraphContext.build(feats, [("s", 1)], [("d", 1)], pad=False)
    m = build_model(tiny_config("gtcn_g", in_dim=2, n_nodes=1, seq_len=1), seed=0)
    out = m.forward([0], ctx).data
    assert np.all(np.isfinite(out))
    ctx2 = GraphContext.build(feats + 1.0, [("s", 1)], [("d", 1)], pad=False)
    assert not np.allclose(m.forward([0], ctx2).data, out)


def test_dropout_changes_train_pass_only():
    ctx = six_context()
    m = build_model(tiny_config("gat", dropout=0.5), seed=0)
    ev = m.forward(np.arange(6), ctx).data
    tr = m.forward(np.arange(6), ctx, train=True, rng=np.random.default_rng(0)).data
    assert not np.allclose(ev, tr)


@pytest.mark.parametrize("kind,sensitive", [("gtcn_g", True), ("gat", False)])
def test_residual_path_under_masking(kind, sensitive):
    ctx = six_context()
    m = build_model(tiny_config(kind), seed=5)
    x = Tensor(ctx.features.copy(), requires_grad=True)
    ctx.features = x.data
    logits = m.forward(np.arange(6), ctx, mask_neighbors=True)
    y = np.array([0, 1, 2, 0, 1, 2])
    loss = cross_entropy(logits, y)
    backward(loss)
    if sensitive:
        assert np.abs(m.params["res.W"].grad).sum() > 0
    # logits as a function of e_v: probe by shifting the features
    bumped = six_context()
    bumped.features = ctx.features + 0.5
    moved = m.forward(np.arange(6), bumped, mask_neighbors=True).data
    assert (not np.allclose(moved, logits.data)) == sensitive


def test_gtcn_permutation_equivariance():
    r = np.random.default_rng(3)
    m = 10
    src = [(f"s{i}", 0) for i in r.integers(0, 4, m)]
    dst = [(f"d{i}", 0) for i in r.integers(0, 4, m)]
    feats, ts = r.normal(size=(m, 3)), r.permutation(m).astype(float)
    ctx = GraphContext.build(feats, src, dst, ts, pad=False)
    model = build_model(tiny_config("gtcn_g", n_nodes=m), seed=0)
    base = model.forward(np.arange(m), ctx).data
    perm = r.permutation(m)
    ctx_p = GraphContext.build(feats[perm], [src[i] for i in perm], [dst[i] for i in perm],
                               ts[perm], pad=False)
    for name in ("adp.E1", "adp.E2"):
        model.params[name] = Tensor(model.params[name].data[perm], requires_grad=True)
    out = model.forward(np.arange(m), ctx_p).data
    assert np.allclose(out, base[perm], atol=1e-12)


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig.for_profile("mlp", 3, 2)
    with pytest.raises(ConfigError):
        ModelConfig.for_profile("gat", 3, 2, layers=7)
    assert ModelConfig.for_profile("egraphsage_m", 3, 2).layers == 2
    assert ModelConfig.for_profile("gtcn_g", 3, 2, profile="full").hidden == 128
    assert ModelConfig.for_profile("gat", 3, 2).sampling() == SampleConfig(3, (8, 8, 8))


# -- sequences ----------------------------------------------------------------

def test_sequences_left_padded_by_source():
    group = np.array([0, 1, 0, 0, 1])
    ts = np.array([5.0, 1.0, 2.0, 9.0, 3.0])
    feats = np.arange(5, dtype=float).reshape(5, 1) + 1
    seq = SequenceIndex.build(group, ts).gather(feats, np.arange(5), 3)[:, :, 0]
    # source 0 in time order: flows 2, 0, 3; source 1: flows 1, 4
    assert seq.tolist() == [[0, 3, 1], [0, 0, 2], [0, 0, 3], [3, 1, 4], [0, 2, 5]]


def test_context_uses_original_source_for_sequences():
    ctx = GraphContext.build(np.eye(4), [("a", 1)] * 4, [(f"d{i}", 1) for i in range(4)],
                             np.arange(4.0), seed=0, pad=True)
    assert ctx.bipartite.n_src == 4           # padded
    seq = ctx.sequences.gather(ctx.features, [3], 4)[0]
    assert np.array_equal(seq, np.eye(4))     # all four flows share the real source


# -- checkpoints ----------------------------------------------------------------

@pytest.mark.parametrize("kind", KINDS)
def test_checkpoint_roundtrip(tmp_path, kind):
    ctx = six_context()
    m = build_model(tiny_config(kind), seed=9)
    path = save_checkpoint(tmp_path / "m.ckpt", m, meta={"dataset": "fixture"})
    loaded, meta = load_checkpoint(path, expected_kind=kind)
    assert meta == {"dataset": "fixture"}
    assert loaded.config == m.config
    assert m.forward(np.arange(6), ctx).data.tobytes() == \
        loaded.forward(np.arange(6), ctx).data.tobytes()


def test_checkpoint_rejects_mismatches(tmp_path):
    m = build_model(tiny_config("gat"), seed=0)
    path = save_checkpoint(tmp_path / "m.ckpt", m)
    with pytest.raises(ConfigError, match="gat"):
        load_checkpoint(path, expected_kind="gtcn_g")
    raw = bytearray(path.read_bytes())
    raw[8] = 99
    (tmp_path / "v.ckpt").write_bytes(bytes(raw))
    with pytest.raises(ConfigError, match="version"):
        read_checkpoint(tmp_path / "v.ckpt")
    (tmp_path / "t.ckpt").write_bytes(path.read_bytes()[:-4])
    with pytest.raises(ConfigError, match="truncated"):
        read_checkpoint(tmp_path / "t.ckpt")
