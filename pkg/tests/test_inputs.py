import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from olpsim.inputs import (BoundedWalkSpec, InputKind, InputSpec, RegenSpec,
                           gen_bounded_walk, gen_instance,
                           gen_regenerative_path, input_preset,
                           mean_cycle_length, regeneration_rate,
                           true_cycle_mean)


class TestBoundedWalk:
    def test_starts_at_start_and_stays_bounded(self):
        spec = BoundedWalkSpec()
        path = gen_bounded_walk(spec, 500, 3)
        assert path[0] == spec.start
        assert path.min() >= spec.lower and path.max() <= spec.upper

    def test_deterministic_in_seed(self):
        spec = BoundedWalkSpec()
        assert np.array_equal(gen_bounded_walk(spec, 100, 7),
                              gen_bounded_walk(spec, 100, 7))
        assert not np.array_equal(gen_bounded_walk(spec, 100, 7),
                                  gen_bounded_walk(spec, 100, 8))

    def test_rademacher_steps_are_unit_until_clamped(self):
        path = gen_bounded_walk(BoundedWalkSpec(), 200, 5)
        steps = np.diff(path)
        interior = (path[:-1] > 1.0) & (path[:-1] < 5.0)
        assert np.all(np.isin(np.abs(steps[interior]), [1.0]))

    def test_uniform_increments(self):
        spec = BoundedWalkSpec(start=5.0, increment="uniform",
                               increment_range=(-1.0, 0.5))
        path = gen_bounded_walk(spec, 300, 11)
        assert path.min() >= 1.0 and path.max() <= 5.0
        steps = np.diff(path)
        interior = (path[:-1] > 1.0) & (path[:-1] < 5.0) & (path[1:] > 1.0) & (path[1:] < 5.0)
        assert steps[interior].min() >= -1.0 and steps[interior].max() <= 0.5

    def test_bad_specs_rejected(self):
        with pytest.raises(ValueError):
            BoundedWalkSpec(lower=2.0, upper=1.0)
        with pytest.raises(ValueError):
            BoundedWalkSpec(start=0.0)
        with pytest.raises(ValueError):
            BoundedWalkSpec(increment="uniform")

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), steps=st.integers(1, 200),
           lower=st.floats(-2, 2), width=st.floats(0.5, 10))
    def test_always_inside_bounds(self, seed, steps, lower, width):
        spec = BoundedWalkSpec(lower=lower, upper=lower + width, start=lower)
        path = gen_bounded_walk(spec, steps, seed)
        assert path.shape == (steps,)
        assert path.min() >= lower - 1e-12
        assert path.max() <= lower + width + 1e-12


class TestPresets:
    def test_default_shapes(self):
        for kind, m in ((1, 5), (2, 5), (3, 5), (4, 2), (5, 2)):
            spec = input_preset(kind, 100)
            assert spec.m == m
            assert spec.capacity_fraction == 0.25

    def test_override(self):
        spec = input_preset(3, 100, m=7, capacity_fraction=0.5)
        assert spec.m == 7 and spec.capacity_fraction == 0.5

    def test_capacity_fraction_range(self):
        with pytest.raises(ValueError):
            input_preset(3, 100, capacity_fraction=0.0)
        with pytest.raises(ValueError):
            input_preset(3, 100, capacity_fraction=1.5)

    def test_walk_required_for_composite_kinds(self):
        with pytest.raises(ValueError):
            InputSpec(kind=InputKind.QUANTITY_DEPENDENT, horizon=10, m=2, walk=None)


class TestGeneration:
    def test_capacity_is_fraction_of_horizon(self):
        inst = gen_instance(input_preset(3, 400), seed=0)
        assert np.allclose(inst.b, 0.25 * 400)
        assert inst.n == 400 and inst.m == 5

    def test_deterministic(self):
        spec = input_preset(1, 200)
        a = gen_instance(spec, 9)
        b = gen_instance(spec, 9)
        assert np.array_equal(a.rewards, b.rewards)
        assert np.array_equal(a.consumption, b.consumption)

    def test_composite_reward_identity(self):
        # reward must equal the consumption row dotted with the hidden
        # per-resource walks, reconstructed from the same substreams
        from olpsim.seeding import DOMAIN_WALK, substream
        spec = input_preset(1, 150)
        inst = gen_instance(spec, 4)
        cols = [gen_bounded_walk(spec.walk, 150, substream(4, DOMAIN_WALK, j))
                for j in range(spec.m)]
        walks = np.column_stack(cols)
        assert np.allclose(inst.rewards, np.einsum("tj,tj->t", inst.consumption, walks))

    def test_single_walk_reward(self):
        spec = input_preset(2, 120)
        inst = gen_instance(spec, 5)
        assert inst.rewards.min() >= 1.0 and inst.rewards.max() <= 5.0

    def test_iid_price_band(self):
        inst = gen_instance(input_preset(3, 500), seed=1)
        assert inst.rewards.min() >= 1.0 and inst.rewards.max() <= 5.0

    def test_drift_walk_noise_free_path(self):
        spec = input_preset(4, 2, trend_noise=0.0)
        inst = gen_instance(spec, 0)
        assert np.allclose(inst.rewards, [1.2, 1.4])

    def test_linear_trend_noise_free_path(self):
        spec = input_preset(5, 3, trend_noise=0.0)
        inst = gen_instance(spec, 0)
        assert np.allclose(inst.rewards, [1.2, 1.4, 1.6])

    def test_trend_consumption_band(self):
        inst = gen_instance(input_preset(5, 300), seed=2)
        assert inst.consumption.min() >= 0.6 and inst.consumption.max() <= 1.4

    def test_consumption_columns_stable_in_m(self):
        small = gen_instance(input_preset(3, 100, m=2), seed=13)
        large = gen_instance(input_preset(3, 100, m=4), seed=13)
        assert np.array_equal(small.consumption, large.consumption[:, :2])
        assert np.array_equal(small.rewards, large.rewards)


class TestRegenerative:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            RegenSpec(length_probs=(0.5, 0.4), value_table=((1.0,), (0.0, 1.0)),
                      value_bound=1.0)
        with pytest.raises(ValueError):
            RegenSpec(length_probs=(1.0,), value_table=((1.0, 2.0),),
                      value_bound=2.0)
        with pytest.raises(ValueError):
            RegenSpec(length_probs=(1.0,), value_table=((3.0,),), value_bound=1.0)

    def test_cycle_mean_exact(self):
        spec = RegenSpec(length_probs=(0.5, 0.5), value_table=((4.0,), (0.0, 0.0)),
                         value_bound=4.0)
        assert true_cycle_mean(spec) == pytest.approx(4.0 / 3.0)
        assert mean_cycle_length(spec) == pytest.approx(1.5)
        assert regeneration_rate(spec) == pytest.approx(2.0 / 3.0)

    def test_path_structure(self):
        spec = RegenSpec(length_probs=(0.3, 0.7), value_table=((2.0,), (1.0, -1.0)),
                         value_bound=2.0)
        values, starts = gen_regenerative_path(spec, 500, seed=21)
        assert values.shape == (500,)
        assert starts[0] == 0
        lengths = np.diff(starts)
        assert set(np.unique(lengths)).issubset({1, 2})
        assert np.abs(values).max() <= 2.0

    def test_path_deterministic_and_stream_split(self):
        spec = RegenSpec(length_probs=(0.5, 0.5), value_table=((1.0,), (0.0, 1.0)),
                         value_bound=1.0)
        v1, _ = gen_regenerative_path(spec, 300, seed=8, stream=0)
        v2, _ = gen_regenerative_path(spec, 300, seed=8, stream=0)
        v3, _ = gen_regenerative_path(spec, 300, seed=8, stream=1)
        assert np.array_equal(v1, v2)
        assert not np.array_equal(v1, v3)

    def test_long_run_average_approaches_cycle_mean(self):
        spec = RegenSpec(length_probs=(0.4, 0.6), value_table=((1.0,), (0.5, -0.5)),
                         value_bound=1.0)
        values, _ = gen_regenerative_path(spec, 200000, seed=3)
        assert abs(values.mean() - true_cycle_mean(spec)) < 0.02

    def test_values_follow_cycle_table(self):
        spec = RegenSpec(length_probs=(0.5, 0.5), value_table=((4.0,), (0.0, 0.0)),
                         value_bound=4.0)
        values, starts = gen_regenerative_path(spec, 100, seed=5)
        lengths = np.diff(starts)
        for start, length in zip(starts[:-1], lengths):
            expected = spec.value_table[length - 1]
            assert np.array_equal(values[start:start + length], expected)
