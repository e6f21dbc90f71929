import numpy as np
import pytest
from scipy import stats

from mcforge import rng
from mcforge.errors import ErrorParameter, ErrorStreamExhausted


def test_same_key_same_draws():
    a = rng.SeededStream(42, 3).uniform(1000)
    b = rng.SeededStream(42, 3).uniform(1000)
    assert np.array_equal(a, b)


def test_stream_ids_are_independent_streams():
    a = rng.SeededStream(42, 0).uniform(100000)
    b = rng.SeededStream(42, 1).uniform(100000)
    assert not np.array_equal(a, b)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


def test_scalar_draws_are_floats(stream):
    assert isinstance(stream.uniform(), float)
    assert isinstance(stream.standard_normal(), float)
    assert isinstance(stream.exponential(2.0), float)


def test_uniform_ranges(stream):
    u = stream.uniform(100000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1.0 / 12.0 / u.size)
    v = stream.open_uniform(100000)
    assert v.min() > 0.0 and v.max() < 1.0


def test_uniform_is_53_bit_grid(stream):
    u = stream.uniform(1000)
    assert np.array_equal(u * 2.0**53, np.floor(u * 2.0**53))


def test_normal_law(stream):
    z = stream.normal(2.0, 3.0, size=20000)
    assert stats.kstest(z, stats.norm(2.0, 3.0).cdf).pvalue > 0.01


def test_standard_normal_moments(stream):
    z = stream.draw(rng.Normal(0.0, 1.0), size=10**6)
    assert abs(z.mean()) < 0.005
    assert abs(z.var() - 1.0) < 0.01


def test_normal_is_inverse_cdf_of_open_uniform():
    u = rng.SeededStream(5, 5).open_uniform(10)
    z = rng.SeededStream(5, 5).standard_normal(10)
    assert np.allclose(stats.norm.ppf(u), z, rtol=0, atol=1e-12)


def test_exponential_rate_parameterisation(stream):
    x = stream.exponential(4.0, size=50000)
    assert x.min() > 0
    assert abs(x.mean() - 0.25) < 4 * 0.25 / np.sqrt(x.size)


def test_exponential_mean_at_rate_one_tenth(stream):
    x = stream.draw(rng.Exponential(0.1), size=10**6)
    assert abs(x.mean() - 10.0) < 3 * 10.0 / np.sqrt(x.size)


def test_from_ppf_uses_open_uniforms():
    u = rng.SeededStream(9, 1).open_uniform((3, 2))
    x = rng.SeededStream(9, 1).from_ppf(stats.gamma(2.0).ppf, (3, 2))
    assert x.shape == (3, 2)
    assert np.allclose(x, stats.gamma(2.0).ppf(u))


def test_draw_dispatches_on_spec():
    a = rng.SeededStream(1, 1).draw(rng.Exponential(2.0), size=4)
    b = rng.SeededStream(1, 1).exponential(2.0, size=4)
    assert np.array_equal(a, b)
    assert 0 <= rng.SeededStream(1, 1).draw(rng.Uniform01()) < 1


@pytest.mark.parametrize("spec", [lambda: rng.Normal(0.0, 0.0), lambda: rng.Exponential(-1.0)])
def test_invalid_distribution_specs(spec):
    with pytest.raises(ErrorParameter):
        spec()


@pytest.mark.parametrize("seed,stream_id", [(-1, 0), (0, 2**64)])
def test_key_must_be_uint64(seed, stream_id):
    with pytest.raises(ErrorParameter):
        rng.SeededStream(seed, stream_id)


def test_spawn_is_deterministic_and_distinct(stream):
    first = stream.spawn(3)
    again = rng.SeededStream(stream.seed, stream.stream_id).spawn(3)
    other = stream.spawn(4)
    assert first.stream_id == again.stream_id
    assert first.stream_id != other.stream_id
    assert np.array_equal(first.uniform(5), again.uniform(5))


def test_spawn_does_not_advance_parent():
    parent = rng.SeededStream(11, 0)
    parent.spawn(0).uniform(100)
    assert parent.uniform() == rng.SeededStream(11, 0).uniform()


def test_replay_serves_in_order():
    replay = rng.ReplayStream(normals=[0.5, -1.0], uniforms=[0.25, 0.75])
    assert replay.normal(1.0, 2.0) == 2.0
    assert replay.uniform() == 0.25
    assert replay.remaining == (1, 1)
    assert np.array_equal(replay.standard_normal((1,)), np.array([-1.0]))
    assert replay.open_uniform() == 0.75


def test_replay_exhaustion():
    replay = rng.ReplayStream(uniforms=[0.1])
    replay.uniform()
    with pytest.raises(ErrorStreamExhausted):
        replay.uniform()
    with pytest.raises(ErrorStreamExhausted):
        replay.standard_normal()


def test_replicate_streams():
    streams = rng.replicate_streams(8, 3)
    assert [s.stream_id for s in streams] == [0, 1, 2]
    assert rng.new_stream(8).uniform() == streams[0].uniform()
