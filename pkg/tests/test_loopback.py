import pytest

from efab.link.loopback import BerReport, parse_fault_schedule, run_loopback


@pytest.fixture()
def loopback_state(loopback_flow):
    return loopback_flow.load(), loopback_flow.io_map()


def test_clean_frames_no_errors(loopback_state):
    state, iomap = loopback_state
    report = run_loopback(state, iomap, n_frames=30, frame_len=256)
    assert report.clean
    assert report.frames_ok == 30
    assert report.payload_bit_errors == 0


def test_randomized_backpressure_does_not_corrupt(loopback_state):
    state, iomap = loopback_state
    report = run_loopback(state, iomap, n_frames=20, frame_len=128, stall=0.4)
    assert report.clean and report.frames_ok == 20


def test_ten_cycle_stall_mid_frame(loopback_state):
    state, iomap = loopback_state
    stall_cycles = frozenset(range(60, 70))
    report = run_loopback(state, iomap, n_frames=4, frame_len=256,
                          stall=stall_cycles)
    assert report.clean and report.frames_ok == 4


def test_single_fault_yields_exactly_one_crc_failed_frame(loopback_state):
    state, iomap = loopback_state
    report = run_loopback(state, iomap, n_frames=12, frame_len=256,
                          faults=[(7, 1000)])
    assert report.crc_failed_frames == 1
    assert report.frames_ok == 11
    assert report.payload_bit_errors == 0


def test_multiple_faults_accounted_per_frame(loopback_state):
    state, iomap = loopback_state
    report = run_loopback(state, iomap, n_frames=10, frame_len=64,
                          faults=[(2, 5), (5, 400), (9, 17)])
    assert report.crc_failed_frames == 3
    assert report.frames_ok == 7


def test_empty_payload_frames(loopback_state):
    state, iomap = loopback_state
    report = run_loopback(state, iomap, n_frames=5, frame_len=0)
    assert report.clean and report.frames_ok == 5


def test_odd_length_payloads(loopback_state):
    state, iomap = loopback_state
    for n in (1, 3, 5, 63):
        report = run_loopback(state, iomap, n_frames=2, frame_len=n)
        assert report.clean, n


def test_report_table_renders():
    rep = BerReport(frames_sent=3, frames_ok=3, frames_received=3)
    table = rep.table()
    assert "frames_sent\t3" in table


def test_fault_schedule_parser():
    sched = parse_fault_schedule("# demo\n7 100\n9 3\n\n")
    assert sched == [(7, 100), (9, 3)]
