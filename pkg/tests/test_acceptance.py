"""Acceptance criteria, one test per criterion (A1-A12).

Each test prints a single ``A# PASS`` line with its headline numbers on
success; tolerances are the stated ones.  Run with

    pytest tests/test_acceptance.py -v -s
"""

import json

import numpy as np
import pytest

from resamplab import bench
from resamplab.core import UniformStream, WeightedParticleSystem
from resamplab.diagnostics import (
    kolmogorov_weighted,
    gaussian_likelihood_family,
    na_counterexample_system,
    offspring_moments,
    pairwise_count_cov,
    random_system,
    replicate_counts,
    variance_rate_fit,
)
from resamplab.hilbert import HilbertCodec, hilbert_decode, hilbert_encode, hilbert_sort
from resamplab.resamplers import deterministic_alpha
from resamplab.smc import (
    FeynmanKacModel,
    LgssmParams,
    auxiliary_particle_filter,
    make_guided_fk,
    particle_filter,
    simulate_lgssm,
)

pytestmark = pytest.mark.acceptance

SEED = 20_240_817
JOBS = 2


def report(line):
    print(f"\n{line}")


class TestA1Unbiasedness:
    SCHEMES = ["multinomial", "stratified", "systematic", "residual-multinomial",
               "residual-stratified", "ssp", "ordered-stratified", "ordered-systematic"]

    def test_a1(self):
        worst = 0.0
        stream = UniformStream(SEED, (1,))
        for sys_idx in range(5):
            system = random_system(16, 1, stream.substream(sys_idx))
            for scheme in self.SCHEMES:
                rep = offspring_moments(
                    scheme, system, 100_000,
                    seed=bench.hash_to_seed(SEED, "a1", scheme, sys_idx),
                )
                z = rep.max_unbiasedness_z
                worst = max(worst, z)
                assert z <= 4.0, (scheme, sys_idx, z)
        report(f"A1 PASS: unbiasedness |mean - NW| <= 4 SE on 8 schemes x 5 systems "
               f"(worst z = {worst:.2f})")


class TestA2Support:
    def test_a2(self):
        stream = UniformStream(SEED, (2,))
        draws_per_system = 1000
        checked = 0
        for sys_idx in range(10):
            n = int(8 + 4 * sys_idx)
            system = random_system(n, 1, stream.substream(sys_idx))
            floor = np.floor(n * system.weights + 1e-9)
            for scheme in ("systematic", "ssp"):
                counts = replicate_counts(
                    scheme, system, draws_per_system, stream.substream(100 + sys_idx)
                )
                ok = (counts == floor) | (counts == floor + 1)
                assert ok.all(), scheme
                checked += counts.shape[0]
            counts = replicate_counts(
                "stratified", system, draws_per_system, stream.substream(200 + sys_idx)
            )
            dev = np.abs(counts - n * system.weights)
            assert dev.max() <= 2.0
            checked += counts.shape[0]
        report(f"A2 PASS: support property holds on {checked} draws "
               f"(systematic/ssp in {{floor, floor+1}}, stratified |dev| <= 2)")


class TestA3SystematicCounterexample:
    def test_a3(self):
        system = na_counterexample_system()
        counts = replicate_counts("systematic", system, 100_000, UniformStream(SEED, (3,)))
        p_joint = float(((counts[:, 0] == 1) & (counts[:, 2] == 1)).mean())
        p_marg = float((counts[:, 0] == 1).mean()) * float((counts[:, 2] == 1).mean())
        assert 0.49 <= p_joint <= 0.51
        assert abs(p_marg - 0.25) <= 0.01
        report(f"A3 PASS: P(#1=#3=1) = {p_joint:.4f} in [0.49, 0.51] "
               f"vs product of marginals {p_marg:.4f} ~= 0.25")


class TestA4NaCovariance:
    def test_a4(self):
        stream = UniformStream(SEED, (4,))
        worst_z = -np.inf
        worst_formula = 0.0
        for sys_idx in range(5):
            system = random_system(8, 1, stream.substream(sys_idx))
            for scheme in ("multinomial", "stratified", "ssp"):
                rep = pairwise_count_cov(
                    scheme, system, 100_000,
                    seed=bench.hash_to_seed(SEED, "a4", scheme, sys_idx),
                )
                z = rep.max_positive_offdiag_z()
                worst_z = max(worst_z, z)
                assert z <= 3.0, (scheme, sys_idx, z)
                if scheme == "multinomial":
                    w = system.weights
                    exact = -8.0 * np.outer(w, w)
                    for i in range(8):
                        for j in range(8):
                            if i != j:
                                err = abs(rep.cov[i, j] - exact[i, j])
                                worst_formula = max(worst_formula, err / rep.se[i, j])
                                assert err <= 4.0 * rep.se[i, j]
        report(f"A4 PASS: off-diagonal covariances <= 3 SE above 0 "
               f"(worst z = {worst_z:.2f}); multinomial matches -N w_i w_j "
               f"(worst formula z = {worst_formula:.2f})")


class TestA5KitagawaBound:
    def test_a5(self):
        stream = UniformStream(SEED, (5,))
        worst_margin = -np.inf
        for n in (10, 100, 1000):
            for sys_idx in range(20):
                system = random_system(n, 1, stream.substream(n, sys_idx))
                perm = hilbert_sort(system)
                sorted_sys = system.permuted(perm)
                res = deterministic_alpha(sorted_sys, 0.5)
                dist = kolmogorov_weighted(
                    sorted_sys.states[res.ancestors, 0], np.full(n, 1.0 / n),
                    system.states[:, 0], system.weights,
                )
                bound = 1.0 / (2 * n) + 1e-12
                worst_margin = max(worst_margin, dist - bound)
                assert dist <= bound, (n, sys_idx, dist)
        report(f"A5 PASS: Kolmogorov distance of the alpha=1/2 deterministic scheme "
               f"<= 1/(2N) on 60 sorted systems (worst slack {-worst_margin:.2e})")


class TestA6RateD1:
    def test_a6(self):
        family = gaussian_likelihood_family(1, bench.hash_to_seed(SEED, "a6-family"))
        grid = [2**k for k in range(7, 14)]
        ordered = variance_rate_fit(
            "ordered-stratified", family, "tanh", grid, 2000,
            seed=bench.hash_to_seed(SEED, "a6-ordered"),
        )
        plain = variance_rate_fit(
            "stratified", family, "tanh", grid, 2000,
            seed=bench.hash_to_seed(SEED, "a6-plain"),
        )
        assert ordered.slope <= -1.8, ordered.slope
        assert -1.2 <= plain.slope <= -0.8, plain.slope
        report(f"A6 PASS: d=1 ordered stratified slope {ordered.slope:.3f} <= -1.8; "
               f"unordered baseline slope {plain.slope:.3f} in [-1.2, -0.8]")


class TestA7RateD2:
    def test_a7(self):
        family = gaussian_likelihood_family(2, bench.hash_to_seed(SEED, "a7-family"))
        grid = [2**k for k in range(8, 14)]
        fit = variance_rate_fit(
            "ordered-stratified", family, "l1-half", grid, 2000,
            seed=bench.hash_to_seed(SEED, "a7"),
        )
        assert fit.slope <= -1.4, fit.slope
        report(f"A7 PASS: d=2 Hilbert-ordered stratified slope {fit.slope:.3f} <= -1.4")


class TestA8HilbertCodec:
    def test_a8(self):
        rng = np.random.default_rng(SEED)
        for d, m in [(1, 10), (2, 6), (3, 4)]:
            codec = HilbertCodec(d, m)
            keys = np.arange(codec.n_keys)
            pts = hilbert_decode(keys, codec)
            assert np.array_equal(hilbert_encode(pts, codec), keys)
            lattice = np.round(pts * 2**m).astype(np.int64)
            step = np.abs(np.diff(lattice, axis=0))
            assert np.all(step.sum(axis=1) == 1) and np.all(step.max(axis=1) == 1)
            j = rng.integers(0, codec.n_keys, 100_000)
            k = rng.integers(0, codec.n_keys, 100_000)
            lhs = np.linalg.norm(
                hilbert_decode(j, codec) - hilbert_decode(k, codec), axis=1
            )
            rhs = (2.0 * np.sqrt(d + 3)
                   * (np.abs(j - k) * 2.0 ** (-m * d)) ** (1.0 / d))
            assert np.all(lhs <= rhs + 1e-12)
        report("A8 PASS: codec bijection + adjacency exhaustive for "
               "(d,m) in {(1,10),(2,6),(3,4)}; Hoelder bound 2*sqrt(d+3) on 1e5 pairs")


class TestA9KalmanOracle:
    def test_a9(self):
        config = {
            "kind": "pf-oracle",
            "seed": SEED,
            "scheme": "multinomial",
            "model": {"d": 2, "horizon": 20, "alpha": 0.4},
            "n_grid": [2**8, 2**10, 2**12],
            "runs": 200,
        }
        rows = bench.run_pf_oracle(config, jobs=JOBS)
        ratio = {r.n: (r.value, r.se) for r in rows if r.metric == "mean_ratio"}
        rmse = {r.n: r.value for r in rows if r.metric == "rmse_log_L"}
        val, se = ratio[2**12]
        assert abs(val - 1.0) <= 4 * se, (val, se)
        assert rmse[2**12] < rmse[2**10] < rmse[2**8], rmse
        report(f"A9 PASS: mean L^N/L^Kalman = {val:.4f} +/- {se:.4f} (within 4 SE of 1); "
               f"RMSE decreasing {rmse[2**8]:.3f} > {rmse[2**10]:.3f} > {rmse[2**12]:.3f}")


A10_CONFIG = {
    "kind": "pf-variance",
    "seed": SEED,
    "schemes": ["ordered-stratified", "ssp", "stratified"],
    "model": {"d": 5, "horizon": 50, "alpha": 0.4},
    "proposal": "guided",
    "n_particles": 2**10,
    "runs": 500,
    "record_every": 10,
}


class TestA10ScaledVarianceOrdering:
    def test_a10(self, tmp_path):
        rows = bench.run_pf_variance(A10_CONFIG, jobs=JOBS)
        horizon = A10_CONFIG["model"]["horizon"]
        gap_rows = {
            r.scheme: (r.value, r.se)
            for r in rows
            if r.metric == "var_gap" and r.t == horizon
        }
        order = ["ordered-stratified", "ssp", "stratified"]
        gaps = []
        for lo, hi in zip(order, order[1:]):
            gap, se_gap = gap_rows[f"{hi}/{lo}"]
            if gap >= 2 * se_gap:
                gaps.append(f"{lo} < {hi} (gap {gap:.4f} >= 2 SE {se_gap:.4f})")
            else:
                gaps.append(f"{lo} ~ {hi} tie (gap {gap:.4f} < 2 SE {se_gap:.4f})")
                assert gap > -2 * se_gap, (lo, hi, gap, se_gap)
        ratio = next(
            r.value for r in rows
            if r.metric == "var_ratio" and r.t == horizon
            and r.scheme == "stratified/ordered-stratified"
        )
        assert ratio > 1.0, ratio
        ratio_ssp = next(
            r.value for r in rows
            if r.metric == "var_ratio" and r.t == horizon
            and r.scheme == "stratified/ssp"
        )
        report(f"A10 PASS: Var[log L_T] {'; '.join(gaps)}; "
               f"ratio strat/ordered-strat = {ratio:.2f} > 1, strat/ssp = {ratio_ssp:.2f}")


class TestA11ApfIdentity:
    def test_a11(self):
        params = LgssmParams(5, 50, 0.4)
        _, obs = simulate_lgssm(params, UniformStream(SEED, (11,)))
        fk = make_guided_fk(params, obs)
        fk_unit = FeynmanKacModel(
            d=fk.d, horizon=fk.horizon, init=fk.init, transition=fk.transition,
            log_g0=fk.log_g0, log_g=fk.log_g,
            log_aux=lambda t, x: np.zeros(x.shape[0]),
        )
        phis = {"x": lambda x: x[:, 0]}
        pf = particle_filter(fk, 256, "stratified", UniformStream(SEED, (11, 1)), phis)
        apf = auxiliary_particle_filter(
            fk_unit, 256, "stratified", UniformStream(SEED, (11, 1)), phis
        )
        assert np.array_equal(pf.log_increments, apf.log_increments)
        assert np.array_equal(pf.log_norm, apf.log_norm)
        assert np.array_equal(pf.ess, apf.ess)
        assert np.array_equal(pf.means["x"], apf.means["x"])
        report("A11 PASS: APF with constant auxiliary weights is bitwise identical "
               "to the standard filter on shared streams")


class TestA12CliDeterminism:
    CONFIGS = [
        {
            "kind": "diagnose", "seed": SEED, "schemes": ["systematic", "ssp"],
            "replicates": 5000, "systems": {"type": "na-counterexample"},
        },
        {
            "kind": "rate", "seed": SEED, "schemes": ["stratified"],
            "n_grid": [64, 128, 256, 512], "replicates": 300, "d": 1,
            "phis": ["tanh"],
        },
        {
            "kind": "pf-variance", "seed": SEED,
            "schemes": ["stratified", "ssp"],
            "model": {"d": 2, "horizon": 10, "alpha": 0.4},
            "proposal": "guided", "n_particles": 128, "runs": 20,
        },
        {
            "kind": "pf-oracle", "seed": SEED, "scheme": "multinomial",
            "model": {"d": 1, "horizon": 8, "alpha": 0.4},
            "n_grid": [64, 128], "runs": 30,
        },
    ]

    def test_a12(self, tmp_path):
        for config in self.CONFIGS:
            kind = config["kind"]
            cfg = tmp_path / f"{kind}.json"
            cfg.write_text(json.dumps(config))
            outputs = []
            for attempt, jobs in enumerate(("1", "2")):
                out = tmp_path / f"{kind}-{attempt}"
                code = bench.main([kind, "--config", str(cfg), "--out", str(out),
                                   "--jobs", jobs])
                assert code == 0
                outputs.append((out / "results.csv").read_bytes())
            assert outputs[0] == outputs[1], kind
        report("A12 PASS: byte-identical results.csv across reruns and --jobs "
               "for all four experiment kinds")
