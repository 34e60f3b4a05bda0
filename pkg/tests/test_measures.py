import numpy as np

from xymqc.linalg import partial_trace
from xymqc.measures import (
    binary_entropy,
    concurrence,
    ef_lower_bound,
    eof_from_concurrence,
    eof_two_qubit,
    evaluate,
    log_negativity,
    n3,
    negativity,
    t3,
    tau_lb,
    tau_ub,
)

DIMS3 = (2, 2, 2)


def bell():
    v = np.zeros(4, dtype=complex)
    v[0] = v[3] = 1.0 / np.sqrt(2.0)
    return np.outer(v, v.conj())


def ghz():
    v = np.zeros(8, dtype=complex)
    v[0] = v[7] = 1.0 / np.sqrt(2.0)
    return np.outer(v, v.conj())


def w_state():
    v = np.zeros(8, dtype=complex)
    for idx in (1, 2, 4):
        v[idx] = 1.0 / np.sqrt(3.0)
    return np.outer(v, v.conj())


def random_pure3(rng):
    v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def random_qubit(rng):
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_product3(rng):
    rho = np.kron(random_qubit(rng), np.kron(random_qubit(rng), random_qubit(rng)))
    return rho


class TestNegativity:
    def test_bell(self):
        assert abs(negativity(bell(), (2, 2), 0) - 1.0) < 1e-12

    def test_product_zero(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            rho = np.kron(random_qubit(rng), random_qubit(rng))
            assert negativity(rho, (2, 2), 0) < 1e-12

    def test_w_state_closed_form(self):
        # partial transpose eigenvalues give N(1|23) = 2*sqrt(2)/3
        assert abs(negativity(w_state(), DIMS3, 0) - 2.0 * np.sqrt(2.0) / 3.0) < 1e-12

    def test_log_negativity(self):
        assert abs(log_negativity(bell(), (2, 2), 0) - 1.0) < 1e-12
        rng = np.random.default_rng(2)
        rho = np.kron(random_qubit(rng), random_qubit(rng))
        assert log_negativity(rho, (2, 2), 1) < 1e-12
        expect = np.log2(1.0 + 2.0 * np.sqrt(2.0) / 3.0)
        assert abs(log_negativity(w_state(), DIMS3, 0) - expect) < 1e-12


class TestConcurrence:
    def test_bell(self):
        assert abs(concurrence(bell()) - 1.0) < 1e-12

    def test_maximally_mixed(self):
        assert concurrence(np.eye(4) / 4.0) == 0.0

    def test_werner_closed_form(self):
        psi_minus = np.zeros(4, dtype=complex)
        psi_minus[1] = 1.0 / np.sqrt(2.0)
        psi_minus[2] = -1.0 / np.sqrt(2.0)
        proj = np.outer(psi_minus, psi_minus.conj())
        for p in (0.5, 0.8, 1.0):
            rho = p * proj + (1.0 - p) * np.eye(4) / 4.0
            expect = max(0.0, (3.0 * p - 1.0) / 2.0)
            assert abs(concurrence(rho) - expect) < 1e-10

    def test_separable_werner(self):
        psi_minus = np.zeros(4, dtype=complex)
        psi_minus[1] = 1.0 / np.sqrt(2.0)
        psi_minus[2] = -1.0 / np.sqrt(2.0)
        rho = (1.0 / 3.0) * np.outer(psi_minus, psi_minus.conj()) + (2.0 / 3.0) * np.eye(4) / 4.0
        assert concurrence(rho) < 1e-10


class TestEof:
    def test_endpoints(self):
        assert eof_from_concurrence(1.0) == 1.0
        assert eof_from_concurrence(0.0) == 0.0

    def test_intermediate_value(self):
        c = 0.7
        expect = binary_entropy(0.5 * (1.0 + np.sqrt(1.0 - c * c)))
        assert abs(eof_from_concurrence(c) - expect) < 1e-12

    def test_werner_state_eof(self):
        psi_minus = np.zeros(4, dtype=complex)
        psi_minus[1] = 1.0 / np.sqrt(2.0)
        psi_minus[2] = -1.0 / np.sqrt(2.0)
        rho = 0.8 * np.outer(psi_minus, psi_minus.conj()) + 0.2 * np.eye(4) / 4.0
        assert abs(eof_two_qubit(rho) - eof_from_concurrence(0.7)) < 1e-10

    def test_monotone_in_concurrence(self):
        vals = [eof_from_concurrence(c) for c in np.linspace(0, 1, 21)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


class TestEfLowerBound:
    def test_product_zero(self):
        rng = np.random.default_rng(3)
        rho = random_product3(rng)
        assert ef_lower_bound(rho, DIMS3, 0) == 0.0

    def test_ghz_saturates(self):
        assert abs(ef_lower_bound(ghz(), DIMS3, 0) - 1.0) < 1e-12

    def test_bell_embedding_tight(self):
        rho = np.kron(bell(), np.diag([1.0, 0.0]).astype(complex))
        assert abs(ef_lower_bound(rho, DIMS3, 0) - 1.0) < 1e-12


class TestTripartite:
    def test_ghz_all_measures_one(self):
        rho = ghz()
        assert abs(n3(rho) - 1.0) < 1e-12
        assert abs(t3(rho) - 1.0) < 1e-12
        assert abs(tau_lb(rho) - 1.0) < 1e-12
        assert abs(tau_ub(rho, (1.0, 1.0, 1.0)) - 1.0) < 1e-12

    def test_biseparable_n3_vanishes(self):
        rng = np.random.default_rng(5)
        rho = np.kron(bell(), random_qubit(rng))
        assert n3(rho, DIMS3) == 0.0

    def test_product_states_vanish(self):
        rng = np.random.default_rng(6)
        for _ in range(40):
            rho = random_product3(rng)
            assert n3(rho) < 1e-9
            assert t3(rho) < 1e-9
            assert tau_lb(rho) < 1e-9

    def test_w_state_t3_regression(self):
        # frozen from the eigenvalue evaluation of the W-state marginals:
        # N(1|23) = 2 sqrt(2)/3, pairwise N = (sqrt(5) - 1)/3 each
        rho = w_state()
        n_cut = 2.0 * np.sqrt(2.0) / 3.0
        pair, pdims = partial_trace(rho, DIMS3, keep=[0, 1])
        n_pair = negativity(pair, pdims, 0)
        assert abs(n_pair - (np.sqrt(5.0) - 1.0) / 3.0) < 1e-12
        expect = n_cut**2 - 2.0 * n_pair**2
        assert abs(t3(rho) - expect) < 1e-12

    def test_monogamy_on_random_pure_states(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            rho = random_pure3(rng)
            for center in range(3):
                n_cut = negativity(rho, DIMS3, center)
                others = [i for i in range(3) if i != center]
                total = 0.0
                for other in others:
                    pair, pdims = partial_trace(rho, DIMS3, keep=[center, other])
                    total += negativity(pair, pdims, 0) ** 2
                assert n_cut**2 >= total - 1e-9

    def test_tau_ub_unclamped(self):
        # zero cost with entangled marginals drives the mean negative
        rng = np.random.default_rng(8)
        rho = np.kron(bell(), random_qubit(rng))
        val = tau_ub(rho, (0.0, 0.0, 1.0))
        assert val < 0.0


class TestEvaluate:
    def test_record_consistency(self):
        rng = np.random.default_rng(9)
        rho = random_pure3(rng)
        rec = evaluate(rho)
        assert rec.tau_ub is None
        negs = rec.bipartite_negativities
        expect_n3 = np.cbrt(np.prod([0.0 if v < 1e-9 else v for v in negs]))
        assert abs(rec.n3 - expect_n3) < 1e-12
        assert abs(rec.t3 - max(np.mean([c.t3 for c in rec.centers]), 0.0)) < 1e-12

    def test_solver_callback(self):
        calls = []

        def fake_solver(rho, dims, center):
            calls.append(center)
            return 0.5, "converged"

        rec = evaluate(ghz(), solve_ppt=fake_solver)
        assert calls == [0, 1, 2]
        assert rec.sdp_status == "ok"
        # tau_ub from the stubbed cost: mean of 0.25 - 0 - 0
        assert abs(rec.tau_ub - 0.25) < 1e-12

    def test_status_propagates(self):
        def flaky(rho, dims, center):
            return 0.5, "max-iterations" if center == 1 else "converged"

        rec = evaluate(ghz(), solve_ppt=flaky)
        assert "max-iterations" in rec.sdp_status


class TestBoundOrdering:
    def test_tau_lb_below_tau_ub_on_chain_states(self):
        from xymqc import sdp
        from xymqc.xychain import ModelParams, SpinGeometry, rdm3

        for (lam, gamma, geom) in (
            (0.9, 1.0, (1, 1)), (1.05, 0.5, (2, 1)),
            (1.3, 0.2, (2, 2)), (0.999, 0.8, (1, 1)),
        ):
            rho = rdm3(SpinGeometry(*geom), ModelParams(lam, gamma))
            rec = evaluate(rho.matrix, rho.dims, solve_ppt=sdp.e_ppt)
            assert rec.tau_lb <= rec.tau_ub + 1e-6
