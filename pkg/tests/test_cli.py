import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hs

from kstereo import cli, selfcheck
from kstereo.errors import ParseError
from kstereo.graph import binary_tree


@pytest.fixture
def tree_file(tmp_path):
    p = tmp_path / "tree.txt"
    g = binary_tree(3)
    p.write_text("".join(f"n{u} n{v}\n" for u, v in g.edges))
    return p


# ------------------------------------------------------------ manifold specs

@pytest.mark.parametrize("text, dims, kappas, frozen", [
    ("5x2", [5, 5], [0.0, 0.0], [False, False]),
    ("2x5@-1!", [2] * 5, [-1.0] * 5, [True] * 5),
    ("2x1,3x1@0.5", [2, 3], [0.0, 0.5], [False, False]),
    ("4x1@1e-3", [4], [1e-3], [False]),
])
def test_spec_examples(text, dims, kappas, frozen):
    m = cli.parse_manifold_spec(text).build()
    assert [f.dim for f in m.factors] == dims
    assert m.kappas == kappas
    assert [f.curvature.frozen for f in m.factors] == frozen


@pytest.mark.parametrize("text, pos", [
    ("3x0", 2), ("0x2", 0), ("5x2,", 4), ("5y2", 0), ("5x2@", 3), ("5x2 ", 3), ("", 0),
])
def test_spec_errors_carry_position(text, pos):
    with pytest.raises(ParseError) as exc:
        cli.parse_manifold_spec(text)
    assert exc.value.position == pos


factor_specs = hs.builds(
    cli.FactorSpec,
    dim=hs.integers(1, 64), count=hs.integers(1, 16),
    kappa=hs.floats(-100, 100, allow_nan=False, allow_infinity=False),
    frozen=hs.booleans())


@settings(max_examples=200, deadline=None)
@given(hs.lists(factor_specs, min_size=1, max_size=5))
def test_spec_round_trip(factors):
    text = ",".join(f.render() for f in factors)
    parsed = cli.parse_manifold_spec(text)
    assert parsed.render() == text
    assert cli.parse_manifold_spec(parsed.render()).factors == parsed.factors


# ------------------------------------------------------------ commands

def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_embed_then_eval(tmp_path, tree_file, capsys):
    emb, met = tmp_path / "e.tsv", tmp_path / "m.json"
    code, out, _ = run(capsys, "embed", "--graph", tree_file, "--manifold", "2x1@-1,2x1",
                       "--iters", 200, "--out", emb, "--metrics", met)
    assert code == 0 and out.startswith("D_avg")
    manifest = json.loads(met.read_text())
    assert list(manifest) == ["graph", "manifold", "strategy", "iters", "switch_iter", "lr",
                              "lr_kappa", "momentum", "batch_pairs", "eval_every", "lcc", "seed",
                              "nodes", "kappas", "d_avg", "rejected_steps", "iterations",
                              "wall_time_s"]
    assert manifest["manifold"] == "2x1@-1.0,2x1"
    assert manifest["nodes"] == 15
    code, out, _ = run(capsys, "eval", "--graph", tree_file, "--embeddings", emb)
    assert code == 0
    assert float(out) == pytest.approx(manifest["d_avg"], rel=1e-5)
    lines = emb.read_text().splitlines()
    assert lines[0].startswith("# factor 0 dim 2 kappa")
    # row order must not matter
    header = [l for l in lines if l.startswith("#")]
    rows = [l for l in lines if not l.startswith("#")]
    emb.write_text("\n".join(header + rows[::-1]) + "\n")
    code, out2, _ = run(capsys, "eval", "--graph", tree_file, "--embeddings", emb)
    assert code == 0 and out2 == out


def test_eval_full_precision(tmp_path, tree_file, capsys):
    emb = tmp_path / "e.tsv"
    run(capsys, "embed", "--graph", tree_file, "--iters", 50, "--out", emb)
    manifold, labels, coords = cli.read_embeddings(emb)
    assert coords.shape == (15, 2) and labels[0] == "n0"


def test_embed_is_deterministic(tmp_path, tree_file, capsys):
    outs = []
    for name in ("a", "b"):
        p = tmp_path / f"{name}.tsv"
        assert run(capsys, "embed", "--graph", tree_file, "--iters", 100, "--seed", 3,
                   "--out", p)[0] == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_apsp_command(tmp_path, capsys):
    g = tmp_path / "g.txt"
    g.write_text("a b\nb c\nx y\n")
    code, out, _ = run(capsys, "apsp", "--graph", g, "--lcc")
    assert code == 0
    assert out.splitlines() == ["\ta\tb\tc", "a\t0\t1\t2", "b\t1\t0\t1", "c\t2\t1\t0"]
    code, _, err = run(capsys, "apsp", "--graph", g)
    assert code == 2 and "disconnected" in err


def test_selfcheck_single_suite(capsys):
    code, out, _ = run(capsys, "selfcheck", "--suite", "reductions", "--samples", 50)
    assert code == 0 and out.split()[:2] == ["PASS", "reductions"]


@pytest.mark.parametrize("argv", [
    [], ["embed"], ["embed", "--graph", "g", "--bogus"], ["nope"],
    ["embed", "--graph", "g", "--iters", "-1"], ["selfcheck", "--suite", "nope"],
])
def test_usage_errors(argv, capsys):
    assert cli.main(argv) == 1


@pytest.mark.parametrize("cmd", [[], ["embed"], ["eval"], ["apsp"], ["selfcheck"]])
def test_help(cmd, capsys):
    assert cli.main(cmd + ["--help"]) == 0
    assert "usage" in capsys.readouterr().out


def test_data_errors(tmp_path, tree_file, capsys):
    assert cli.main(["embed", "--graph", str(tmp_path / "missing.txt")]) == 2
    assert cli.main(["embed", "--graph", str(tree_file), "--manifold", "3x0"]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("a b c\n")
    assert cli.main(["apsp", "--graph", str(bad)]) == 2
    emb = tmp_path / "e.tsv"
    emb.write_text("# factor 0 dim 2 kappa 0\nn0\t0\t0\n")
    assert cli.main(["eval", "--graph", str(tree_file), "--embeddings", str(emb)]) == 2


# ------------------------------------------------------------ mutation

def test_gyrogroup_suite_catches_sign_error():
    def broken(x, y, k):
        xy = np.sum(x * y, axis=-1, keepdims=True)
        x2 = np.sum(x * x, axis=-1, keepdims=True)
        y2 = np.sum(y * y, axis=-1, keepdims=True)
        # the coefficient of y should read (1 + k x2)
        num = (1 - 2 * k * xy - k * y2) * x + (1 - k * x2) * y
        return num / (1 - 2 * k * xy + k * k * x2 * y2)

    ops = selfcheck.mutated_ops(mobius_add=broken)
    assert not selfcheck.check_gyrogroup(samples=200, ops=ops).passed
    assert selfcheck.check_gyrogroup(samples=200).passed
