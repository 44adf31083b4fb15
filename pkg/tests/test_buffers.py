import numpy as np
import pytest

from hildrive.buffers import Batch, DualBuffer, ReplayBuffer, Transition
from hildrive.errors import ContractError, DimensionError, StateError


def make_tr(rng, obs_dim=3, intervened=False, **kw):
    fields = dict(
        obs=rng.uniform(-1, 1, obs_dim),
        a_n=rng.uniform(-1, 1, 2),
        a_h=rng.uniform(-1, 1, 2) if intervened else None,
        intervened=intervened,
        next_obs=rng.uniform(-1, 1, obs_dim),
        done=False,
        reward=float(rng.uniform()),
        cost=0.0,
    )
    fields.update(kw)
    return Transition(**fields)


class TestTransition:
    def test_intervened_requires_expert_action(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ContractError):
            make_tr(rng, intervened=True, a_h=None)

    def test_autonomous_forbids_expert_action(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ContractError):
            make_tr(rng, intervened=False, a_h=np.zeros(2))

    def test_action_bounds_enforced(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ContractError):
            make_tr(rng, a_n=np.array([1.5, 0.0]))
        with pytest.raises(ContractError):
            make_tr(rng, intervened=True, a_h=np.array([0.0, -1.5]))

    def test_obs_shape_mismatch(self):
        rng = np.random.default_rng(0)
        with pytest.raises(DimensionError):
            make_tr(rng, next_obs=np.zeros(5))

    def test_executed_follows_intervention_branch(self):
        rng = np.random.default_rng(1)
        t_free = make_tr(rng, intervened=False)
        np.testing.assert_array_equal(t_free.executed, t_free.a_n)
        t_int = make_tr(rng, intervened=True)
        np.testing.assert_array_equal(t_int.executed, t_int.a_h)

    def test_non_finite_obs_rejected(self):
        rng = np.random.default_rng(2)
        with pytest.raises(ContractError):
            make_tr(rng, obs=np.array([0.0, np.nan, 0.0]))


class TestReplayBuffer:
    def test_fifo_capacity_one_keeps_newer(self):
        rng = np.random.default_rng(3)
        buf = ReplayBuffer(1, 3)
        buf.append(make_tr(rng, reward=1.0))
        buf.append(make_tr(rng, reward=2.0))
        assert len(buf) == 1
        assert buf.inserted == 2
        stored = list(buf.transitions())
        assert len(stored) == 1
        assert stored[0].reward == 2.0

    def test_fifo_order_oldest_first(self):
        rng = np.random.default_rng(4)
        buf = ReplayBuffer(3, 3)
        for r in range(5):
            buf.append(make_tr(rng, reward=float(r)))
        assert [t.reward for t in buf.transitions()] == [2.0, 3.0, 4.0]

    def test_sample_empty_raises(self):
        buf = ReplayBuffer(4, 3)
        with pytest.raises(StateError):
            buf.sample(1, np.random.default_rng(0))

    def test_single_element_repeats(self):
        rng = np.random.default_rng(5)
        buf = ReplayBuffer(4, 3)
        t = make_tr(rng)
        buf.append(t)
        b = buf.sample(16, np.random.default_rng(0))
        assert len(b) == 16
        np.testing.assert_array_equal(b.obs, np.tile(t.obs, (16, 1)))

    def test_sampling_deterministic_by_seed(self):
        rng = np.random.default_rng(6)
        buf = ReplayBuffer(32, 3)
        for _ in range(20):
            buf.append(make_tr(rng))
        b1 = buf.sample(8, np.random.default_rng(42))
        b2 = buf.sample(8, np.random.default_rng(42))
        np.testing.assert_array_equal(b1.obs, b2.obs)
        np.testing.assert_array_equal(b1.executed, b2.executed)

    def test_uniformity_within_three_sigma(self):
        # 1e5 with-replacement draws from 10 elements: each count should sit
        # within 3 sigma of the multinomial mean.
        rng = np.random.default_rng(7)
        buf = ReplayBuffer(10, 3)
        for r in range(10):
            buf.append(make_tr(rng, reward=float(r)))
        draws = 100_000
        b = buf.sample(draws, np.random.default_rng(8))
        counts = np.bincount(b.reward.astype(int), minlength=10)
        mean = draws / 10
        sigma = np.sqrt(draws * 0.1 * 0.9)
        assert np.all(np.abs(counts - mean) <= 3 * sigma)

    def test_batch_executed_matches_branch(self):
        rng = np.random.default_rng(9)
        buf = ReplayBuffer(32, 3)
        for i in range(16):
            buf.append(make_tr(rng, intervened=bool(i % 2)))
        b = buf.gather(np.arange(16))
        expect = np.where(b.intervened[:, None], b.a_h, b.a_n)
        np.testing.assert_array_equal(b.executed, expect)

    def test_state_roundtrip(self):
        rng = np.random.default_rng(10)
        buf = ReplayBuffer(8, 3)
        for _ in range(13):  # force wraparound
            buf.append(make_tr(rng, intervened=True))
        clone = ReplayBuffer.from_state_arrays(
            {k: np.copy(v) for k, v in buf.state_arrays().items()})
        assert clone.inserted == buf.inserted and len(clone) == len(buf)
        b1 = buf.sample(6, np.random.default_rng(1))
        b2 = clone.sample(6, np.random.default_rng(1))
        np.testing.assert_array_equal(b1.obs, b2.obs)
        np.testing.assert_array_equal(b1.a_h, b2.a_h)


class TestDualBuffer:
    def test_routing_by_flag(self):
        rng = np.random.default_rng(11)
        dual = DualBuffer(3, capacity=16)
        dual.store(make_tr(rng, intervened=True))
        assert dual.sizes() == (1, 0)
        dual.store(make_tr(rng, intervened=False))
        assert dual.sizes() == (1, 1)

    def test_every_member_obeys_routing_invariant(self):
        rng = np.random.default_rng(12)
        dual = DualBuffer(3, capacity=64)
        for _ in range(60):
            dual.store(make_tr(rng, intervened=bool(rng.integers(2))))
        assert all(t.intervened and t.a_h is not None
                   for t in dual.intervened.transitions())
        assert all((not t.intervened) and t.a_h is None
                   for t in dual.autonomous.transitions())

    def test_not_ready_signal(self):
        rng = np.random.default_rng(13)
        dual = DualBuffer(3, capacity=16)
        for _ in range(5):
            dual.store(make_tr(rng, intervened=True))
        assert dual.sample_balanced(4, np.random.default_rng(0), warmup=2) is None
        dual.store(make_tr(rng, intervened=False))
        assert dual.sample_balanced(4, np.random.default_rng(0), warmup=2) is None
        dual.store(make_tr(rng, intervened=False))
        assert dual.sample_balanced(4, np.random.default_rng(0), warmup=2) is not None

    def test_balanced_halves(self):
        rng = np.random.default_rng(14)
        dual = DualBuffer(3, capacity=64)
        for _ in range(3):
            dual.store(make_tr(rng, intervened=True))
        for _ in range(40):
            dual.store(make_tr(rng, intervened=False))
        batch_h, batch_n = dual.sample_balanced(10, np.random.default_rng(1))
        assert len(batch_h) == 10 and len(batch_n) == 10
        assert batch_h.intervened.all()
        assert not batch_n.intervened.any()

    def test_balanced_sampling_deterministic(self):
        rng = np.random.default_rng(15)
        dual = DualBuffer(3, capacity=64)
        for _ in range(20):
            dual.store(make_tr(rng, intervened=bool(rng.integers(2))))
        h1, n1 = dual.sample_balanced(6, np.random.default_rng(9))
        h2, n2 = dual.sample_balanced(6, np.random.default_rng(9))
        np.testing.assert_array_equal(h1.obs, h2.obs)
        np.testing.assert_array_equal(n1.obs, n2.obs)

    def test_state_roundtrip(self):
        rng = np.random.default_rng(16)
        dual = DualBuffer(3, capacity=16)
        for _ in range(30):
            dual.store(make_tr(rng, intervened=bool(rng.integers(2))))
        clone = DualBuffer.from_state_arrays(
            {k: np.copy(v) for k, v in dual.state_arrays().items()})
        assert clone.sizes() == dual.sizes()
        assert clone.intervened.inserted == dual.intervened.inserted


class TestBatch:
    def test_concat_stacks_in_order(self):
        rng = np.random.default_rng(17)
        buf = ReplayBuffer(8, 3)
        for _ in range(8):
            buf.append(make_tr(rng))
        a = buf.gather(np.arange(3))
        b = buf.gather(np.arange(3, 8))
        u = a.concat(b)
        assert len(u) == 8
        np.testing.assert_array_equal(u.obs[:3], a.obs)
        np.testing.assert_array_equal(u.obs[3:], b.obs)

    def test_empty(self):
        e = Batch.empty(4)
        assert len(e) == 0
        assert e.obs.shape == (0, 4)
