import pytest

from locomp import Alternating, GeneralizedCarlitz, PeriodicChain, build_spec

import oracles


def _families():
    return {
        "unrestricted": (build_spec("unrestricted"), oracles.unrestricted),
        "carlitz": (build_spec("carlitz"), oracles.carlitz),
        "diff_pm1": (build_spec("carlitz", GeneralizedCarlitz(frozenset({0, 1, -1}))), oracles.diff_pm1),
        "weak_alt": (build_spec("alternating", Alternating(strict=False)), oracles.weak_updown_odd),
        "strict_alt": (build_spec("alternating", Alternating(strict=True)), oracles.strict_updown_odd),
    }


FAMILIES = _families()


@pytest.fixture(params=sorted(FAMILIES))
def family(request):
    spec, oracle = FAMILIES[request.param]
    return request.param, spec, oracle


@pytest.fixture(scope="session")
def specs():
    out = {k: v[0] for k, v in FAMILIES.items()}
    out["strict_either"] = build_spec("alternating", Alternating(True, "either", "any"))
    out["chain"] = build_spec("periodic_chain", PeriodicChain(("<", "<=", ">")))
    return out
