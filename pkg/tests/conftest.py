import numpy as np
import pytest

from rfsyn import dataset as ds
from rfsyn import surrogate as su
from rfsyn.tech import default_tech


@pytest.fixture(scope="session")
def tech():
    return default_tech()


@pytest.fixture(scope="session")
def ind_dataset(tech):
    """Small labeled inductor dataset shared by the unit tests."""
    geoms = ds.sample_geometries("inductor", None, 600, seed=42, tech=tech)
    return ds.generate_dataset(geoms, tech, seed=42)


@pytest.fixture(scope="session")
def ind_model(ind_dataset):
    """Reduced-size forest: plenty for unit-level behavior checks."""
    model = su.EmForestModel(n_estimators=30, random_state=5)
    model.fit(ind_dataset.features(), ind_dataset.targets())
    return model


@pytest.fixture(scope="session")
def full_dataset(tech):
    """Full-scale 10k inductor dataset (acceptance-grade)."""
    geoms = ds.sample_geometries("inductor", None, 10000, seed=7, tech=tech)
    return ds.generate_dataset(geoms, tech, seed=7)


@pytest.fixture(scope="session")
def full_train(full_dataset):
    """Full 200-tree model plus its training report."""
    return su.train_forest(full_dataset, seed=3)


@pytest.fixture(scope="session")
def cpw_dataset(tech):
    geoms = ds.sample_geometries("cpw", None, 2000, seed=9, tech=tech)
    return ds.generate_dataset(geoms, tech, f0=25e9, seed=9)


@pytest.fixture(scope="session")
def tline_dataset(tech):
    geoms = ds.sample_geometries("tline", None, 800, seed=9, tech=tech)
    return ds.generate_dataset(geoms, tech, seed=9)


@pytest.fixture(scope="session")
def cpw40_dataset(tech):
    geoms = ds.sample_geometries("cpw", None, 2000, seed=9, tech=tech)
    return ds.generate_dataset(geoms, tech, f0=40e9, seed=9)


@pytest.fixture(scope="session")
def sizing_ind_dataset(tech):
    """Denser inductor dataset so inverse eps-bands stay populated."""
    geoms = ds.sample_geometries("inductor", None, 3000, seed=11, tech=tech)
    return ds.generate_dataset(geoms, tech, seed=11)


@pytest.fixture(scope="session")
def sizing_bundle(tech, sizing_ind_dataset, tline_dataset, cpw_dataset):
    from rfsyn import sizing as sz
    model = su.EmForestModel(n_estimators=40, random_state=5)
    model.fit(sizing_ind_dataset.features(), sizing_ind_dataset.targets())
    synth = su.InductorSynthesizer(sizing_ind_dataset, model)
    return sz.SurrogateBundle(synth, tline_dataset, cpw_dataset)


@pytest.fixture(scope="session")
def sizing_bundle_40g(sizing_bundle, cpw40_dataset):
    from rfsyn import sizing as sz
    return sz.SurrogateBundle(sizing_bundle.synthesizer,
                              sizing_bundle.tline_dataset, cpw40_dataset)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
