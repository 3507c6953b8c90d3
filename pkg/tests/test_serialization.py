"""Text formats round-trip exactly in float64."""

import numpy as np
import pytest

from gpprec import serialization as ser
from gpprec.cholesky import exact_block_factor
from gpprec.errors import InvalidInput
from gpprec.hierarchy import LevelPartition, assign_levels, maximin_order
from gpprec.matching import measure_cloud
from gpprec.truth import build_lattice_precision
from gpprec.verify import random_spd


class TestMatrixFormat:
    def test_round_trip_exact(self, rng):
        a = rng.standard_normal((5, 5)) * np.exp(rng.uniform(-20, 20, (5, 5)))
        text = ser.format_matrix(a)
        assert text.splitlines()[0] == "5"
        np.testing.assert_array_equal(ser.parse_matrix(text), a)

    def test_file_round_trip(self, rng, tmp_path):
        a = rng.standard_normal((4, 4))
        path = tmp_path / "m.txt"
        ser.save_matrix(path, a)
        np.testing.assert_array_equal(ser.load_matrix(path), a)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidInput):
            ser.parse_matrix("2\n1.0 2.0\n")


class TestSamplesFormat:
    def test_round_trip(self, rng):
        z = rng.standard_normal((7, 3))
        np.testing.assert_array_equal(ser.parse_samples(ser.format_samples(z)), z)

    def test_metadata_lines_ignored(self, rng):
        z = rng.standard_normal((2, 2))
        text = "# seed=5\n" + ser.format_samples(z)
        np.testing.assert_array_equal(ser.parse_samples(text), z)


class TestSitesFormat:
    def test_round_trip_recomputes_measurements(self):
        cloud = measure_cloud(np.array([0.2, 0.5, 0.8]), 1)
        back = ser.parse_sites(ser.format_sites(cloud))
        np.testing.assert_array_equal(back.sites, cloud.sites)
        assert back.h == cloud.h
        assert back.delta == cloud.delta


class TestOrderingFormat:
    def test_round_trip(self):
        cloud = measure_cloud(np.array([0.2, 0.45, 0.5, 0.8]), 1)
        ordering = maximin_order(cloud)
        levels = assign_levels(ordering)
        text = ser.format_ordering(ordering, levels)
        back_ord, back_lev = ser.parse_ordering(text)
        np.testing.assert_array_equal(back_ord.perm, ordering.perm)
        np.testing.assert_array_equal(back_ord.ell, ordering.ell)
        assert back_lev.q == levels.q
        np.testing.assert_array_equal(back_lev.level_of, levels.level_of)


class TestFactorFormat:
    def test_round_trip(self, rng):
        levels = LevelPartition.from_sizes([2, 3, 2])
        omega = random_spd(rng, 7, 40.0)
        factor = exact_block_factor(omega, levels, d=2)
        back = ser.parse_factor(ser.format_factor(factor))
        assert back.d == 2
        assert back.levels.q == 3
        np.testing.assert_array_equal(back.transpose_dense(), factor.transpose_dense())


class TestTruthFormat:
    def test_round_trip_with_metadata(self):
        truth = build_lattice_precision(5, 1, 2)
        text = ser.format_truth(truth)
        meta, sigma, omega = ser.parse_truth(text)
        assert meta["model_tag"] == "laplacian_power"
        assert meta["seed_policy"] == "philox64"
        assert float(meta["kappa"]) == truth.kappa
        np.testing.assert_array_equal(sigma, truth.sigma)
        np.testing.assert_array_equal(omega, truth.omega)
