import pytest

from efab import flow
from efab.compiler import compile_tree
from efab.fabric import bundled_layout
from efab.ml import make_dataset, quantize, split_dataset, tracks_to_features, train_tree


@pytest.fixture(scope="session")
def cmos28():
    return bundled_layout("cmos28")


@pytest.fixture(scope="session")
def cmos130():
    return bundled_layout("cmos130")


@pytest.fixture(scope="session")
def counter_flow(cmos28):
    return flow.full_flow(flow.build_counter16(), cmos28, seed=1,
                          io_constraints=flow.COUNTER_IO_WEST)


@pytest.fixture(scope="session")
def loopback_flow(cmos28):
    return flow.full_flow(flow.build_loopback32(), cmos28, seed=2,
                          io_constraints=flow.LOOPBACK_IO)


@pytest.fixture(scope="session")
def synth_split():
    tracks = make_dataset(10_000, seed=42)
    train, test = split_dataset(tracks, 0.8, seed=7)
    return tracks_to_features(train), tracks_to_features(test)


@pytest.fixture(scope="session")
def hw_scale_model(synth_split):
    (Xtr, ytr), _ = synth_split
    return train_tree(Xtr, ytr, max_depth=5, learning_rate=1.0, max_nodes=9)


@pytest.fixture(scope="session")
def hw_scale_quant(hw_scale_model):
    return quantize(hw_scale_model, threshold=0.5)


@pytest.fixture(scope="session")
def hw_scale_compiled(hw_scale_quant):
    return compile_tree(hw_scale_quant)


@pytest.fixture(scope="session")
def tree_flow(hw_scale_compiled, cmos28):
    return flow.full_flow(hw_scale_compiled.netlist, cmos28, seed=3)
