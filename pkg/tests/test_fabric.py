import pytest

from efab.fabric import (MissingTermination, RaggedGrid, Tile, UnknownTileName,
                         UnpairedDspHalf, census, parse_layout, render_layout)


def test_cmos28_census_matches_published_totals(cmos28):
    cen = census(cmos28)
    assert cen.logic_cells == 448
    assert cen.dsp_slices == 4


def test_cmos130_census_matches_published_totals(cmos130):
    cen = census(cmos130)
    assert cen.logic_cells == 384
    assert cen.registers == 128
    assert cen.dsp_slices == 4


def test_cmos28_has_exactly_56_lut_tiles(cmos28):
    luts = sum(1 for _, _, t in cmos28.tiles() if t is Tile.LUT4AB)
    assert luts == 56  # 448 cells / 8 per tile


def test_all_null_grid_is_valid_and_empty():
    layout = parse_layout("NULL,NULL,NULL\nNULL,NULL,NULL\nNULL,NULL,NULL\n")
    cen = census(layout)
    assert (cen.logic_cells, cen.registers, cen.dsp_slices) == (0, 0, 0)
    assert (cen.io_input_bits, cen.io_output_bits) == (0, 0)


def test_unknown_tile_name():
    with pytest.raises(UnknownTileName):
        parse_layout("NULL,BOGUS\nNULL,NULL\n")


def test_ragged_grid():
    with pytest.raises(RaggedGrid):
        parse_layout("NULL,NULL\nNULL\n")


def test_dsp_top_without_bot():
    text = "NULL,N_term,NULL\nNULL,DSP_top,NULL\nNULL,S_term,NULL\n"
    with pytest.raises(UnpairedDspHalf):
        parse_layout(text)


def test_dsp_bot_without_top():
    text = "NULL,N_term,NULL\nNULL,DSP_bot,NULL\nNULL,S_term,NULL\n"
    with pytest.raises(UnpairedDspHalf):
        parse_layout(text)


def test_logic_column_needs_termination():
    with pytest.raises(MissingTermination):
        parse_layout("NULL,NULL\nNULL,LUT4AB\nNULL,NULL\n")


def test_terminator_must_sit_on_boundary_rows():
    with pytest.raises(MissingTermination):
        parse_layout("NULL,N_term\nNULL,N_term\nNULL,S_term\n")


def test_render_parse_round_trip(cmos28, cmos130):
    for layout in (cmos28, cmos130):
        again = parse_layout(render_layout(layout))
        assert again == layout


def test_round_trip_preserves_header_fields():
    text = "# name=tiny channels=4\nNULL,N_term,NULL\nWEST_IO,LUT4AB,EAST_IO\nNULL,S_term,NULL\n"
    layout = parse_layout(text)
    assert layout.name == "tiny"
    assert layout.channels == 4
    assert parse_layout(render_layout(layout)) == layout


def _column_block(kind: str, rows: int = 8) -> list[list[str]]:
    if kind == "lut":
        top, mid, bot = "N_term", ["LUT4AB"] * rows, "S_term"
    elif kind == "dsp":
        top, mid, bot = "N_term", ["DSP_top", "DSP_bot"] * (rows // 2), "S_term"
    elif kind == "io":
        top, mid, bot = "NULL", ["WEST_IO"] * rows, "NULL"
    else:
        top, mid, bot = "NULL", ["NULL"] * rows, "NULL"
    return [top] + mid + [bot]


@pytest.mark.parametrize("kinds_a,kinds_b", [
    (["lut"], ["dsp"]),
    (["io", "lut"], ["lut", "dsp"]),
    (["null"], ["lut", "lut", "io"]),
])
def test_census_is_additive_over_side_by_side_grids(kinds_a, kinds_b):
    def build(kinds):
        cols = [_column_block(k) for k in kinds]
        rows = ["\n".join(",".join(col[r] for col in cols) for r in range(10))]
        return parse_layout(rows[0])

    a, b = build(kinds_a), build(kinds_b)
    combined = build(kinds_a + kinds_b)
    assert census(combined) == census(a) + census(b)
