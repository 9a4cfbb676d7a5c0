import json
import pytest
from click.testing import CliRunner
from app.services.model_service import model_service


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def pt_weyl():
    return model_service.zoo("pt-weyl-2b")


@pytest.fixture
def constant_model_file(tmp_path):
    """Momentum-independent H = Υ³ as a model JSON file."""
    path = tmp_path / "sigma_z.json"
    path.write_text(json.dumps({
        "name": "sigma-z",
        "bands": 2,
        "terms": [{"mu": 3, "coeff": 1.0}],
    }))
    return path
