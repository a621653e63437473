import math

import pytest

from dbar_spectra import fem, mesh


@pytest.fixture(scope="session")
def disk_mesh():
    return mesh.triangulate(mesh.DomainSpec.disk(1.0), 0.1)


@pytest.fixture(scope="session")
def disk_forms(disk_mesh):
    return fem.assemble(disk_mesh)


@pytest.fixture(scope="session")
def disk_forms_fine(disk_mesh):
    return fem.assemble(mesh.refine(disk_mesh))


@pytest.fixture(scope="session")
def enriched_disk_forms(disk_mesh):
    return fem.assemble(disk_mesh, holomorphic_degree=20)


@pytest.fixture(scope="session")
def ellipse_forms():
    return fem.assemble(mesh.triangulate(mesh.DomainSpec.ellipse(1.2, 1 / 1.2), 0.1))


@pytest.fixture(scope="session")
def annulus_forms():
    return fem.assemble(mesh.triangulate(mesh.DomainSpec.annulus(1.0, math.sqrt(10.0)), 0.15))


_ACCEPTANCE = []


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
