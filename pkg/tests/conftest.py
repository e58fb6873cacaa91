import pytest

from config import Config
from weylmoyal import create_app


@pytest.fixture
def app(tmp_path):
    class TestConfig(Config):
        TESTING = True
        OUTPUT_DIR = str(tmp_path / 'results')
        FIXTURES_DIR = str(tmp_path / 'fixtures')

    app = create_app(TestConfig)
    with app.app_context():
        yield app


@pytest.fixture
def runner(app):
    return app.test_cli_runner()
