import pytest
import yaml

from app.models.errors import ConfigError
from app.models.manifest import RunManifest
from app.models.settings import LabSettings, PRESETS, load_settings


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data), encoding='utf-8')
    return path


@pytest.mark.parametrize('preset', sorted(PRESETS))
def test_presets_validate(preset):
    LabSettings.for_preset(preset).validate()


def test_paper_preset_keeps_full_protocol():
    settings = LabSettings.for_preset('paper')
    assert settings.population.n_repetitions == 50
    assert settings.population.n_test == 200
    assert settings.mlp.hidden_sizes == tuple(range(10, 101, 10))


def test_unknown_preset():
    with pytest.raises(ConfigError) as excinfo:
        LabSettings.for_preset('huge')
    assert excinfo.value.field == 'preset'


def test_yaml_overrides_preset(tmp_path):
    path = write_yaml(tmp_path / 'lab.yaml', {'maml': {'alpha': 0.05}, 'population': {'n_test': 7}})
    settings = load_settings(path, preset='testing')
    assert settings.maml.alpha == 0.05
    assert settings.population.n_test == 7
    assert settings.cnp == LabSettings.for_preset('testing').cnp


def test_unknown_key_names_its_path(tmp_path):
    path = write_yaml(tmp_path / 'lab.yaml', {'maml': {'gamma': 1}})
    with pytest.raises(ConfigError) as excinfo:
        load_settings(path)
    assert excinfo.value.field == 'maml.gamma'


def test_wrong_type_names_its_path(tmp_path):
    path = write_yaml(tmp_path / 'lab.yaml', {'population': {'n_test': 'many'}})
    with pytest.raises(ConfigError) as excinfo:
        load_settings(path)
    assert excinfo.value.field == 'population.n_test'


def test_temperature_outside_law_range(tmp_path):
    path = write_yaml(tmp_path / 'lab.yaml', {'population': {'temperature_range': [10, 40]}})
    with pytest.raises(ConfigError) as excinfo:
        load_settings(path)
    assert excinfo.value.field == 'population.temperature_range'


def test_law_must_stay_positive(tmp_path):
    path = write_yaml(tmp_path / 'lab.yaml', {'dynamics': {'temperature_law': [-100.0, 0.0, 1000.0]}})
    with pytest.raises(ConfigError) as excinfo:
        load_settings(path)
    assert excinfo.value.field == 'dynamics.temperature_law'


@pytest.mark.parametrize('section,key,value', [
    ('maml', 'batch', 'two'),
    ('cnp', 'batch_tasks', [3]),
    ('population', 'test_seed', 'abc'),
    ('gp', 'fixed_noise', 'small'),
    ('maml', 'batch', 2.5),
])
def test_nullable_field_with_wrong_type_names_its_path(tmp_path, section, key, value):
    path = write_yaml(tmp_path / 'lab.yaml', {section: {key: value}})
    with pytest.raises(ConfigError) as excinfo:
        load_settings(path, preset='testing')
    assert excinfo.value.field == f'{section}.{key}'


def test_nullable_fields_accept_numbers_and_null(tmp_path):
    path = write_yaml(tmp_path / 'lab.yaml', {
        'maml': {'batch': 2.0},
        'population': {'test_seed': 7},
        'gp': {'fixed_noise': 1},
        'cnp': {'batch_tasks': None},
    })
    settings = load_settings(path, preset='testing')
    assert settings.maml.batch == 2 and isinstance(settings.maml.batch, int)
    assert settings.population.test_seed == 7
    assert settings.gp.fixed_noise == 1.0 and isinstance(settings.gp.fixed_noise, float)
    assert settings.cnp.batch_tasks is None


@pytest.mark.parametrize('section,key,value', [
    ('maml', 'batch', 0),
    ('cnp', 'batch_tasks', 0),
    ('gp', 'fixed_noise', 0.0),
])
def test_nullable_field_out_of_range(tmp_path, section, key, value):
    path = write_yaml(tmp_path / 'lab.yaml', {section: {key: value}})
    with pytest.raises(ConfigError) as excinfo:
        load_settings(path, preset='testing')
    assert excinfo.value.field == f'{section}.{key}'


@pytest.mark.parametrize('key', ['epochs', 'adapt_steps'])
def test_negative_step_counts_name_their_own_field(tmp_path, key):
    path = write_yaml(tmp_path / 'lab.yaml', {'maml': {key: -1}})
    with pytest.raises(ConfigError) as excinfo:
        load_settings(path, preset='testing')
    assert excinfo.value.field == f'maml.{key}'


def test_unknown_meta_optimizer(tmp_path):
    path = write_yaml(tmp_path / 'lab.yaml', {'maml': {'meta_optimizer': 'rmsprop'}})
    with pytest.raises(ConfigError) as excinfo:
        load_settings(path, preset='testing')
    assert excinfo.value.field == 'maml.meta_optimizer'


@pytest.mark.parametrize('reference', [10.0, 45.0])
def test_reference_temperature_outside_range(tmp_path, reference):
    path = write_yaml(tmp_path / 'lab.yaml', {'dynamics': {'reference_temperature': reference}})
    with pytest.raises(ConfigError) as excinfo:
        load_settings(path, preset='testing')
    assert excinfo.value.field == 'dynamics.reference_temperature'


def test_reference_temperature_inside_range_is_accepted(tmp_path):
    path = write_yaml(tmp_path / 'lab.yaml', {'dynamics': {'reference_temperature': 30.0}})
    settings = load_settings(path, preset='testing')
    law = settings.dynamics.temp_law()
    assert law.stiffness(10000.0, 30.0) == pytest.approx(10000.0)


def test_desk_preset_trains_to_convergence():
    desk = LabSettings.for_preset('desk')
    assert desk.cnp.epochs >= 2000
    assert desk.maml.meta_optimizer == 'adam'
    assert desk.maml.epochs % desk.maml.validate_every == 0


def test_yaml_syntax_error_reports_line(tmp_path):
    path = tmp_path / 'lab.yaml'
    path.write_text('maml:\n  alpha: [1, 2\n', encoding='utf-8')
    with pytest.raises(ConfigError) as excinfo:
        load_settings(path)
    assert excinfo.value.line is not None


def test_seed_flag_reaches_every_component():
    settings = load_settings(preset='testing', seed=42)
    seeds = {settings.population.seed, settings.maml.seed, settings.cnp.seed, settings.gp.seed}
    assert seeds == {42}


def test_fingerprint_tracks_content():
    base = LabSettings.for_preset('testing')
    assert base.fingerprint() == LabSettings.for_preset('testing').fingerprint()
    assert base.fingerprint() != base.with_seed(1).fingerprint()


def test_manifest_round_trip(tmp_path):
    settings = load_settings(preset='testing', seed=5)
    RunManifest.start('experiment', 'testing', '1.0.0', settings).finish(['b.csv', 'a.csv']).write(tmp_path)
    manifest = RunManifest.read(tmp_path)
    assert manifest.outputs == ['a.csv', 'b.csv']
    assert manifest.seeds['maml'] == 5
    assert manifest.lab_settings() == settings
    assert manifest.fingerprint == settings.fingerprint()


def test_missing_manifest_reads_as_none(tmp_path):
    assert RunManifest.read(tmp_path) is None
