import random

import pytest
from hypothesis import HealthCheck, settings

from kgalign.model import Alignment, Correspondence, EntityRef, entity_iri

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def ent(wiki: str, name: str) -> EntityRef:
    return EntityRef(wiki, entity_iri(wiki, name))


def link(w1: str, n1: str, w2: str, n2: str, conf=None, **kw) -> Correspondence:
    return Correspondence(ent(w1, n1), ent(w2, n2), conf, **kw)


def random_alignment(rng: random.Random, n_entities: int, n_edges: int, n_wikis: int,
                     confidences=(0.5, 1.0)) -> Alignment:
    """Random cross-wiki links over entities spread across ``n_wikis`` wikis."""
    wikis = [f"w{i}" for i in range(n_wikis)]
    ents = [ent(rng.choice(wikis), f"e{i}") for i in range(n_entities)]
    out = []
    for _ in range(n_edges * 3):
        if len(out) >= n_edges:
            break
        a, b = rng.sample(ents, 2)
        if a.wiki == b.wiki:
            continue
        if (a.wiki, a.iri) > (b.wiki, b.iri):
            a, b = b, a
        out.append(Correspondence(a, b, rng.choice(confidences)))
    return Alignment(out)


@pytest.fixture
def rng():
    return random.Random(1234)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Callable recording one PASS/FAIL line for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def log(name: str, ok: bool, detail: str = "") -> None:
        line = f"{name}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
        lines.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
