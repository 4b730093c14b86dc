import pytest

from groundmem import samples
from groundmem.gateway import BackendConfig, ModelGateway
from groundmem.pipeline import PhaseOneBuilder


@pytest.fixture(scope="session")
def gateway() -> ModelGateway:
    return ModelGateway(BackendConfig(mode="mock", seed=0))


@pytest.fixture(scope="session")
def sample_builds(gateway):
    """Phase-1 builds of the three sample dialogues (read-only)."""
    builder = PhaseOneBuilder(gateway, "visual")
    return {d.dialogue_id: builder.build(d) for d in samples.SAMPLE_DIALOGUES}
