import pytest

from owleye.config import RunConfig, load_config, parse_k
from owleye.errors import InvalidArgumentError


def test_defaults():
    c = RunConfig()
    assert (c.tau, c.tau_a, c.n_sup, c.lambda_, c.beta) == (1.0, 0.001, 2000, 0.2, 0.01)
    assert (c.lr, c.epochs, c.layers, c.k) == (3e-5, 100, 3, 0.5)
    assert c.attention_config().drop_outer_sqrt


def test_load_resolves_relative_dirs(tmp_path):
    (tmp_path / "exp.toml").write_text('d = 16\nlambda = 0.5\nk = 4\ntrain_dirs = ["data/a", "/abs/b"]\n')
    c = load_config(tmp_path / "exp.toml")
    assert c.d == 16 and c.lambda_ == 0.5 and c.k == 4
    assert c.train_dirs == (str(tmp_path / "data/a"), "/abs/b")


@pytest.mark.parametrize("text", [
    "bogus = 1\n", "d = 1.5\n", "lr = \"fast\"\n", "adjacency = \"dense\"\n", "k = 1.5\n",
    "k = true\n", "[model]\nd = 4\n", "d = \n", "layers = 1\n", "signed_sqrt = 1\n",
])
def test_bad_files_rejected(tmp_path, text):
    (tmp_path / "c.toml").write_text(text)
    with pytest.raises(InvalidArgumentError):
        load_config(tmp_path / "c.toml")


def test_round_trip_through_dict():
    c = RunConfig(d=8, k=3, train_dirs=["x"], n_sup_sweep=[10, 100], triplet_anchor="anomaly")
    assert RunConfig.from_dict(c.to_dict()) == c


@pytest.mark.parametrize("text,value", [("10", 10), ("0.25", 0.25), ("0", 0)])
def test_parse_k(text, value):
    assert parse_k(text) == value and type(parse_k(text)) is type(value)
