"""Compiled/pure-Python kernel parity: results must match bit-for-bit.

The pure-Python module is the reference semantics; the Cython extension mirrors
its accumulation order exactly, so every output array is compared with
array_equal (no tolerances).
"""
import numpy as np
import pytest

from neckstrain import _kernels_py as kpy
from neckstrain._backend import available_backends

BACKENDS = available_backends()

pytestmark = pytest.mark.skipif(
    "compiled" not in BACKENDS, reason="compiled extension not built"
)


def compiled():
    return BACKENDS["compiled"]


class TestBiquadParity:
    def test_random_cascades(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            b = np.ascontiguousarray(rng.normal(size=(3, 3)))
            a = np.ascontiguousarray(rng.normal(size=(3, 2)) * 0.4)
            x = np.ascontiguousarray(rng.normal(size=2000))
            assert np.array_equal(
                kpy.biquad_cascade(b, a, x), compiled().biquad_cascade(b, a, x)
            )

    def test_empty_input(self):
        b = np.zeros((1, 3))
        a = np.zeros((1, 2))
        x = np.empty(0)
        assert np.array_equal(
            kpy.biquad_cascade(b, a, x), compiled().biquad_cascade(b, a, x)
        )


class TestTreeParity:
    @pytest.mark.parametrize("trial", range(12))
    def test_grow_and_predict(self, trial):
        rng = np.random.default_rng(trial)
        n = int(rng.integers(5, 2500))
        # rounding forces duplicate values, exercising tie handling
        X = np.ascontiguousarray(
            np.round(rng.normal(size=(n, 3)) * rng.choice([0.5, 3.0, 50.0]),
                     int(rng.integers(0, 3)))
        )
        y = np.ascontiguousarray(np.round(rng.normal(size=n), 2))
        sidx = np.ascontiguousarray(np.stack([
            np.argsort(X[:, f], kind="stable") for f in range(3)
        ]).astype(np.int64))
        got_py = kpy.grow_tree(X, y, sidx, 12, 5)
        got_c = compiled().grow_tree(X, y, sidx, 12, 5)
        for name, p, c in zip(
            ("feature", "threshold", "left", "right", "value", "n_node", "gain"),
            got_py, got_c,
        ):
            assert np.array_equal(p, c), name
        Xq = np.ascontiguousarray(rng.normal(size=(200, 3)) * 10)
        pred_py = kpy.predict_tree(got_py[0], got_py[1], got_py[2], got_py[3],
                                   got_py[4], Xq)
        pred_c = compiled().predict_tree(got_c[0], got_c[1], got_c[2], got_c[3],
                                         got_c[4], Xq)
        assert np.array_equal(pred_py, pred_c)


class TestModelLevelParity:
    def test_forest_serialization_identical(self, monkeypatch):
        """A forest fit through either backend serializes to identical text."""
        from neckstrain import models

        rng = np.random.default_rng(9)
        X = rng.uniform(-20, 60, size=(400, 3))
        y = np.tanh((X[:, 1] - 20.0) / 6.0) + 0.05 * rng.normal(size=400)
        ds = models.Dataset(X, y, 20.0 * np.arange(400.0))
        spec = models.ModelSpec("random_forest", 3, {"n_trees": 8})

        compiled_text = models.serialize_model(models.fit(spec, ds))
        monkeypatch.setattr(models, "grow_tree", kpy.grow_tree)
        monkeypatch.setattr(models, "predict_tree", kpy.predict_tree)
        python_text = models.serialize_model(models.fit(spec, ds))
        assert compiled_text == python_text

    def test_filtered_series_identical(self, monkeypatch):
        from neckstrain import dsp

        rng = np.random.default_rng(4)
        x = dsp.Series(500.0, 0.0, rng.normal(size=6000) * 0.2)
        cascade = dsp.design_butterworth("bandpass", (20.0, 200.0), 4, 500.0)
        with_compiled = dsp.filter_forward(cascade, x).values
        monkeypatch.setattr(dsp, "biquad_cascade", kpy.biquad_cascade)
        with_python = dsp.filter_forward(cascade, x).values
        assert np.array_equal(with_compiled, with_python)
