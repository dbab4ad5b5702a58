"""Field-level reconstruction contracts shared by all methods."""

import numpy as np
import pytest

from epifield import NetworkConfig, SamplingPattern, apply_pattern
from epifield.network import build_network, zero_parameters_
from epifield.reconstruct import (
    network_reconstruct_lightfield,
    zero_fill_lightfield,
)

from util import random_lightfield

TINY = NetworkConfig(filters=(4, 8), kernels=(5, 3), blocks_per_section=1)


class TestNetworkReconstruct:
    def test_zero_residual_network_leaves_gaps_zero(self):
        """With an all-zero residual branch the network is the identity, so
        gap rows stay zero and input rows stay untouched."""
        rng = np.random.default_rng(0)
        lf = random_lightfield(rng, dims=(63, 1, 16, 4))
        pattern = SamplingPattern(gap=2)
        sparse, _ = apply_pattern(lf, pattern)
        net = zero_parameters_(build_network(TINY, seed=0))
        recon = network_reconstruct_lightfield(sparse, net, pattern)
        np.testing.assert_array_equal(recon.samples, sparse.field.samples)

    def test_input_rows_copied_verbatim_for_random_params(self):
        rng = np.random.default_rng(1)
        lf = random_lightfield(rng, dims=(63, 2, 16, 4))
        pattern = SamplingPattern(gap=2)
        sparse, _ = apply_pattern(lf, pattern)
        net = build_network(TINY, seed=1)
        recon = network_reconstruct_lightfield(sparse, net, pattern)
        np.testing.assert_array_equal(
            recon.samples[sparse.u_valid], sparse.field.samples[sparse.u_valid]
        )

    def test_gap_rows_filled_between_first_and_last_input(self):
        rng = np.random.default_rng(2)
        lf = random_lightfield(rng, dims=(63, 1, 16, 4))
        lf.samples[:] = np.maximum(lf.samples, 0.05)  # keep content nonzero
        pattern = SamplingPattern(gap=2)
        sparse, _ = apply_pattern(lf, pattern)
        net = build_network(TINY, seed=2)
        recon = network_reconstruct_lightfield(sparse, net, pattern)
        mask = pattern.reconstructed_view_mask(lf.nu)
        assert recon.samples[mask].any()

    def test_trailing_subfields_stay_zero(self):
        """With 7 sub-fields and gap 4, sub-fields 6 (trailing, no right
        input) keep zero samples."""
        rng = np.random.default_rng(3)
        lf = random_lightfield(rng, dims=(63, 1, 16, 4))
        pattern = SamplingPattern(gap=4)
        sparse, kept = apply_pattern(lf, pattern)
        assert kept == [0, 5]
        net = build_network(TINY, seed=3)
        recon = network_reconstruct_lightfield(sparse, net, pattern)
        assert not recon.samples[6 * 9 :].any()

    def test_mask_pattern_mismatch_rejected(self):
        rng = np.random.default_rng(4)
        lf = random_lightfield(rng, dims=(63, 1, 16, 4))
        sparse, _ = apply_pattern(lf, SamplingPattern(gap=2))
        net = build_network(TINY, seed=4)
        with pytest.raises(ValueError, match="pattern"):
            network_reconstruct_lightfield(sparse, net, SamplingPattern(gap=4))


class TestZeroFill:
    def test_zero_fill_matches_sparse_field(self):
        rng = np.random.default_rng(5)
        lf = random_lightfield(rng, dims=(63, 1, 8, 4))
        sparse, _ = apply_pattern(lf, SamplingPattern(gap=2))
        out = zero_fill_lightfield(sparse)
        np.testing.assert_array_equal(out.samples, sparse.field.samples)
        assert out.samples is not sparse.field.samples
