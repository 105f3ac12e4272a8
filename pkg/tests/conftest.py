import itertools
import math

import numpy as np
import pytest
from scipy.stats import unitary_group

from envlab import build_state, SubsystemLayout, PureState

PSI1_LAYOUT = {"S": ["S0", "S1"], "P": ["P0", "P1"], "E": ["E0", "E1"]}


@pytest.fixture
def psi1():
    return build_state(PSI1_LAYOUT, [(("S0", "P0", "E0"), math.sqrt(3) / 2), (("S1", "P1", "E1"), 0.5)])


@pytest.fixture
def psi2():
    return build_state(
        PSI1_LAYOUT, [(("S0", "P0", "E0"), math.sqrt(2 / 3)), (("S1", "P1", "E1"), math.sqrt(1 / 3))]
    )


def two_branch(alpha, beta, env_labels=("Ea", "Eb"), same_env=False):
    """alpha|S0,E_a> + beta|S1,E_b> (or both on E_a when ``same_env``)."""
    layout = {"S": ["S0", "S1"], "E": list(env_labels)}
    eb = env_labels[0] if same_env else env_labels[1]
    return build_state(layout, [(("S0", env_labels[0]), alpha), (("S1", eb), beta)])


@pytest.fixture
def eq3():
    return two_branch(1 / math.sqrt(2), 1 / math.sqrt(2))


def random_state(rng, dims, density=1.0):
    layout = SubsystemLayout([(f"Q{k}", [f"q{k}_{i}" for i in range(d)]) for k, d in enumerate(dims)])
    vec = rng.normal(size=dims) + 1j * rng.normal(size=dims)
    if density < 1.0:
        mask = rng.random(dims) < density
        mask.flat[rng.integers(vec.size)] = True
        vec = vec * mask
    return PureState.from_array(layout, vec, normalize=True)


def random_unitary(rng, d):
    if d == 1:
        return np.array([[np.exp(1j * rng.uniform(0, 2 * np.pi))]])
    return unitary_group.rvs(d, random_state=rng)


def dense_operator(layout, targets, matrix):
    """Brute-force embedding of ``matrix`` on ``targets`` into the full space."""
    ids = layout.ids
    full = list(itertools.product(*(range(d) for d in layout.dims)))
    index = {t: i for i, t in enumerate(full)}
    tpos = [ids.index(t) for t in targets]
    tdims = [layout.dim(t) for t in targets]
    out = np.zeros((len(full), len(full)), dtype=complex)
    for col in full:
        cin = 0
        for p, d in zip(tpos, tdims):
            cin = cin * d + col[p]
        for rout in range(matrix.shape[0]):
            val = matrix[rout, cin]
            if val == 0:
                continue
            row = list(col)
            rem = rout
            for p, d in reversed(list(zip(tpos, tdims))):
                row[p] = rem % d
                rem //= d
            out[index[tuple(row)], index[col]] += val
    return out


def dense_partial_trace(state, keep):
    """``rho_keep`` via einsum on the dense tensor."""
    psi = state.to_array()
    n = psi.ndim
    ids = state.layout.ids
    kpos = [ids.index(k) for k in keep]
    letters = "abcdefghijklmnopqrstuvwxyz"
    ket = list(letters[:n])
    bra = list(ket)
    for i, p in enumerate(kpos):
        bra[p] = letters[n + i].upper()
    outs = "".join(ket[p] for p in kpos) + "".join(bra[p] for p in kpos)
    rho = np.einsum(f"{''.join(ket)},{''.join(bra)}->{outs}", psi, psi.conj())
    d = int(np.prod([psi.shape[p] for p in kpos]))
    return rho.reshape(d, d)


# acceptance summary -------------------------------------------------------

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def criterion(request):
    """Record pass/fail of an acceptance criterion under the given label."""
    label = request.node.get_closest_marker("criterion").args[0]
    ACCEPTANCE_RESULTS[label] = "FAIL"
    yield label
    rep = getattr(request.node, "rep_call", None)
    if rep is not None and rep.passed:
        ACCEPTANCE_RESULTS[label] = "PASS"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[0].rstrip("."))):
        terminalreporter.write_line(f"[{ACCEPTANCE_RESULTS[label]}] {label}")
