import numpy as np
import pytest

from y00lab.utils import create_summary_table, format_duration, parse_grid, render_csv, write_artifacts


class TestParseGrid:

    def test_stop_inclusive(self):
        np.testing.assert_array_equal(parse_grid("0:4:1"), [0, 1, 2, 3, 4])
        np.testing.assert_allclose(parse_grid("0:1:0.25"), [0, 0.25, 0.5, 0.75, 1.0])

    @pytest.mark.parametrize("spec", ["0:4", "a:b:c", "0:4:0", "4:0:1"])
    def test_invalid(self, spec):
        with pytest.raises(ValueError):
            parse_grid(spec)


class TestArtifacts:

    def test_provenance_header(self):
        text = render_csv(["a", "b"], [(1, 2)], digest="abcd", seed=3, metadata=["k=v"])
        lines = text.splitlines()
        assert lines[0].endswith("config=abcd seed=3")
        assert lines[1:] == ["# k=v", "a,b", "1,2"]

    def test_write(self, tmp_path):
        paths = write_artifacts(str(tmp_path / "nested"), [("x.csv", "1\n"), ("y.txt", "2\n")])
        assert [p.name for p in paths] == ["x.csv", "y.txt"]
        assert paths[1].read_text() == "2\n"


def test_format_duration():
    assert format_duration(5) == "5.0s"
    assert format_duration(90) == "1m 30s"
    assert format_duration(7260) == "2h 1m"


def test_summary_table():
    table = create_summary_table(["Curve", "Class"], [["scenario", "Ideal"]])
    assert "| scenario | Ideal |" in table


def test_summary_table_aligns_columns():
    table = create_summary_table(["Curve", "1/N_Breach"], [["1-2^-13", 0.99987], ["scenario", "inf"]])
    lines = table.splitlines()
    assert len({len(line) for line in lines}) == 1
    assert lines[0] == lines[2] == lines[-1]
    assert "| scenario | inf        |" in table
