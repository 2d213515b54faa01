import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from isc.embedding import EmbeddingTable, TransEConfig, train_transe
from isc.experiments import toy_kb
from isc.kg import KnowledgeBase, parse_triples
from isc.synth import SynthConfig, generate

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def kb_from(text: str) -> KnowledgeBase:
    return parse_triples(line.strip() for line in text.strip().splitlines())


@pytest.fixture(scope="session")
def toy():
    return toy_kb()


@pytest.fixture(scope="session")
def toy_tab(toy):
    return train_transe(toy, TransEConfig(dim=8, epochs=50, seed=0))


@pytest.fixture(scope="session")
def small_kb():
    return generate(SynthConfig(entities=20, relations=3, density=2.0, seed=3))


@pytest.fixture(scope="session")
def small_tab(small_kb):
    return train_transe(small_kb, TransEConfig(dim=8, epochs=30, seed=1))


def random_table(kb: KnowledgeBase, dim: int, seed: int = 0) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    rel = rng.normal(size=(kb.n_relations, dim))
    rel[0] = 0.0
    return EmbeddingTable(rng.normal(size=(kb.n_entities, dim)), rel,
                          kb.entity_names, kb.relation_names)


# -- acceptance reporting ------------------------------------------------------

ACCEPTANCE: list[tuple[str, bool, str]] = []


def report(criterion: str, ok: bool, detail: str) -> None:
    """Record one acceptance line, then fail the calling test if ``ok`` is false."""
    ACCEPTANCE.append((criterion, bool(ok), detail))
    print(f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"{criterion}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(ACCEPTANCE, key=lambda x: x[0]):
        terminalreporter.write_line(f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}")
