import csv

import numpy as np
import pytest

from somids.ingest import NSL_KDD_FEATURES
from somids.som import SomMap


@pytest.fixture
def square_map():
    """2x2 map with unit weights at the corners of the unit square."""
    return SomMap(2, 2, np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))


def random_map(rng, rows, cols, dim):
    return SomMap(rows, cols, rng.random((rows * cols, dim)))


def nsl_row(rng, label, protocol="tcp", service="http", flag="SF"):
    values = []
    for name in NSL_KDD_FEATURES:
        if name == "protocol_type":
            values.append(protocol)
        elif name == "service":
            values.append(service)
        elif name == "flag":
            values.append(flag)
        else:
            values.append(str(int(rng.integers(0, 500))))
    return values + [label, str(int(rng.integers(0, 21)))]


@pytest.fixture
def nsl_file(tmp_path):
    """Small headerless file in the public KDDTrain+ layout."""
    rng = np.random.default_rng(3)
    path = tmp_path / "KDDTrain+.txt"
    rows = []
    for i in range(60):
        label = ["normal", "neptune", "smurf"][i % 3]
        rows.append(nsl_row(rng, label, protocol=["tcp", "udp", "icmp"][i % 3]))
    with path.open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    return path


@pytest.fixture
def cic_file(tmp_path):
    """CIC-IDS-2017 style file, including the public files' Infinity/NaN cells."""
    path = tmp_path / "Wednesday.csv"
    header = [" Destination Port", " Flow Duration", "Flow Bytes/s", " Flow Packets/s",
              " Fwd Header Length", " Fwd Header Length", " Label"]
    rows = [
        ["80", "100", "2000.5", "10", "20", "20", "BENIGN"],
        ["80", "0", "Infinity", "Infinity", "20", "20", "DoS Hulk"],
        ["443", "50", "NaN", "3", "40", "40", "BENIGN"],
        ["22", "75", "100", "4", "32", "32", "SSH-Patator"],
        ["80", "10", "", "8", "20", "20", "Web Attack � Brute Force"],
    ]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def write_generic_csv(path, n_samples=300, seed=0):
    """Mixed numeric/categorical flow table with a string label column."""
    from somids.synthetic import make_imbalanced

    data = make_imbalanced(n_samples=n_samples, dim=4, seed=seed)
    rng = np.random.default_rng(seed)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{i}" for i in range(4)] + ["proto", "label"])
        for x, y in zip(data.features, data.labels):
            proto = ("udp" if y else "tcp") if rng.random() < 0.8 else "icmp"
            w.writerow([f"{v * 1000:.3f}" for v in x] + [proto, "attack" if y else "benign"])
    return path


@pytest.fixture
def generic_csv(tmp_path):
    return write_generic_csv(tmp_path / "flows.csv")


# ---------------------------------------------------------------- acceptance summary

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid or "::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        crit = report.nodeid.split("::test_criterion_")[1].split("_")[0]
        ok = report.passed or report.skipped
        detail = "; ".join(str(v) for k, v in report.user_properties if k == "detail")
        if not ok and not detail:
            detail = str(report.longrepr).strip().splitlines()[-1][:160]
        prev = _ACCEPTANCE.get(crit, (True, []))
        _ACCEPTANCE[crit] = (prev[0] and ok, prev[1] + ([detail] if detail else []))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for crit in sorted(_ACCEPTANCE, key=int):
        ok, details = _ACCEPTANCE[crit]
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {' | '.join(details)}")
