"""Shared fixtures: classified profiles, companion systems, shipped flows."""

import pathlib
import sys

import pytest
from mpmath import mp

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from salemlab import algebra, ekspansion as ek, lattice, spectral as sp, subst  # noqa: E402

DATA = pathlib.Path(__file__).resolve().parent.parent / "src" / "salemlab" / "data"

GOLDEN = (-1, -1, 1)              # x^2 - x - 1
SALEM4 = (1, -1, -1, -1, 1)       # x^4 - x^3 - x^2 - x + 1
PLASTIC = (-1, -1, 0, 1)          # x^3 - x - 1 (Pisot of degree 3)


@pytest.fixture(scope="session")
def golden_profile():
    return algebra.classify(GOLDEN)


@pytest.fixture(scope="session")
def salem_profile():
    return algebra.classify(SALEM4)


@pytest.fixture(scope="session")
def plastic_profile():
    return algebra.classify(PLASTIC)


@pytest.fixture(scope="session")
def salem_companion(salem_profile):
    A = algebra.companion_matrix(SALEM4)
    es = algebra.eigensystem(A, salem_profile, algebra.Precision(bits=512))
    return A, es


@pytest.fixture(scope="session")
def salem_selfsim_s(salem_companion):
    _, es = salem_companion
    with mp.workprec(512):
        raw = tuple(x.real for x in es.e[0])
        pairing = sum(raw[i] * es.estar[0][i].real for i in range(4))
        return tuple(x / pairing for x in raw)


@pytest.fixture(scope="session")
def salem_trace(salem_companion, salem_selfsim_s):
    A, es = salem_companion
    L = lattice.standard_lattice(A)
    return ek.ek_expand(1, salem_selfsim_s, L, es, 200)


@pytest.fixture(scope="session")
def fib_subst():
    return subst.parse_substitution((DATA / "fibonacci.sub").read_text())


@pytest.fixture(scope="session")
def salem_subst():
    return subst.parse_substitution((DATA / "salem4.sub").read_text())


@pytest.fixture(scope="session")
def salem_flow(salem_subst):
    return sp.make_suspension(salem_subst, mode=sp.MODE_SELF_SIMILAR, prec=320)


@pytest.fixture(scope="session")
def salem_flow_lattice(salem_subst, salem_flow):
    rws = subst.enumerate_return_words(salem_subst, 30)
    return lattice.build_lattice(rws, salem_flow.A)
