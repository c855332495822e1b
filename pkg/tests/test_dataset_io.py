import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from thermsynth.dataset_io import (
    Annotation, AnnotationSet, ImageMetadata, ThermalImage, drop_class, filter_missing_metadata,
    load_image, load_metadata, load_metadata_file, parse_label_file, read_label_file, save_image,
    serialize_annotations, write_label_file,
)
from thermsynth.errors import ImageFormatError, ParseError, SerializationError

from strategies import annotation_sets, polygon_annotation


# -- label parsing ----------------------------------------------------------

def test_parse_single_aabb():
    s = parse_label_file("0 0.5 0.5 0.2 0.1")
    assert len(s) == 1
    a = s.annotations[0]
    assert a.class_id == 0 and a.aabb == (0.5, 0.5, 0.2, 0.1)
    assert a.obb is None and a.polygon is None


def test_parse_empty_file():
    assert len(parse_label_file("")) == 0
    assert len(parse_label_file("\n  \n")) == 0


def test_parse_obb_line():
    a = parse_label_file("2 0.1 0.1 0.3 0.1 0.3 0.2 0.1 0.2").annotations[0]
    assert a.class_id == 2
    assert a.obb == ((0.1, 0.1), (0.3, 0.1), (0.3, 0.2), (0.1, 0.2))


def test_parse_polygon_line():
    a = parse_label_file("1 0.1 0.1 0.4 0.1 0.2 0.3").annotations[0]
    assert a.polygon == ((0.1, 0.1), (0.4, 0.1), (0.2, 0.3))


def test_mixed_dispatch_by_field_count():
    text = "0 0.5 0.5 0.2 0.1\n1 0.1 0.1 0.3 0.1 0.3 0.2 0.1 0.2\n2 0.1 0.1 0.4 0.1 0.2 0.3 0.1 0.2 0.05 0.15\n"
    s = parse_label_file(text)
    assert [a.has("aabb") for a in s] == [True, False, False]
    assert [a.has("obb") for a in s] == [False, True, False]
    assert len(s.annotations[2].polygon) == 5


def test_parse_with_confidence():
    a = parse_label_file("3 0.5 0.5 0.2 0.1 0.87", with_confidence=True).annotations[0]
    assert a.aabb == (0.5, 0.5, 0.2, 0.1) and a.confidence == 0.87


def test_explicit_kind_enforces_arity():
    with pytest.raises(ParseError, match="AABB line needs 5 fields"):
        parse_label_file("0 0.1 0.1 0.3 0.1 0.3 0.2 0.1 0.2", "aabb")
    with pytest.raises(ParseError, match="OBB line needs 9 fields"):
        parse_label_file("0 0.5 0.5 0.2 0.1", "obb")


@pytest.mark.parametrize(
    "line, fragment",
    [
        ("0 0.5 0.5 0.2", "odd field count"),
        ("0 0.5 0.5 0.2 0.1 0.3", "odd field count"),
        ("0 nan 0.5 0.2 0.1", "non-finite"),
        ("0 inf 0.5 0.2 0.1", "non-finite"),
        ("0 0.5 abc 0.2 0.1", "non-numeric"),
        ("x 0.5 0.5 0.2 0.1", "not an integer"),
        ("1.5 0.5 0.5 0.2 0.1", "not an integer"),
        ("-1 0.5 0.5 0.2 0.1", "negative class"),
        ("0 1.2 0.5 0.2 0.1", "outside [0, 1]"),
        ("0 0.5 -0.01 0.2 0.1", "outside [0, 1]"),
        ("0 0.95 0.5 0.2 0.1", "outside the image"),
        ("0 0.5 0.5 0 0.1", "positive"),
        ("0 0.1 0.1 0.3 0.2 0.3 0.1 0.1 0.2", "simple quadrilateral"),
    ],
)
def test_malformed_lines_name_line_number(line, fragment):
    text = "0 0.5 0.5 0.2 0.1\n\n" + line + "\n"
    with pytest.raises(ParseError) as ei:
        parse_label_file(text, source="x.txt")
    assert ei.value.line == 3
    assert fragment in str(ei.value)
    assert str(ei.value).startswith("x.txt:line 3: ")


def test_coordinate_tolerance():
    parse_label_file("0 0.5 0.5 1.0000005 0.1")
    with pytest.raises(ParseError):
        parse_label_file("0 0.5 0.5 1.00001 0.1")


def test_confidence_range_checked():
    with pytest.raises(ParseError, match="confidence"):
        parse_label_file("0 0.5 0.5 0.2 0.1 1.5", with_confidence=True)


# -- serialization ----------------------------------------------------------

def test_serialize_aabb():
    s = AnnotationSet("a", (Annotation(0, aabb=(0.5, 0.5, 0.2, 0.1)),))
    assert serialize_annotations(s) == "0 0.500000 0.500000 0.200000 0.100000\n"


def test_serialize_empty():
    assert serialize_annotations(AnnotationSet()) == ""


def test_serialize_missing_representation_names_index():
    s = AnnotationSet("a", (Annotation(0, aabb=(0.5, 0.5, 0.2, 0.1)), Annotation(1, polygon=((0, 0), (1, 0), (0, 1)))))
    with pytest.raises(SerializationError) as ei:
        serialize_annotations(s, "aabb")
    assert ei.value.index == 1


def test_serialize_negative_zero_and_confidence():
    s = [Annotation(0, aabb=(0.5, 0.5, 0.2, 0.1), confidence=0.25),
         Annotation(1, polygon=((-0.0000001, 0.0), (1.0, 0.0), (0.5, 1.0)))]
    text = serialize_annotations(s, "mixed")
    assert text == "0 0.500000 0.500000 0.200000 0.100000 0.250000\n1 0.000000 0.000000 1.000000 0.000000 0.500000 1.000000\n"


def test_file_roundtrip(tmp_path):
    s = AnnotationSet("img", (Annotation(4, obb=((0.1, 0.1), (0.3, 0.1), (0.3, 0.2), (0.1, 0.2))),))
    write_label_file(tmp_path / "sub" / "img.txt", s, "obb")
    back = read_label_file(tmp_path / "sub" / "img.txt")
    assert back == s
    assert (tmp_path / "sub" / "img.txt").read_bytes().endswith(b"\n")


def test_read_error_carries_path(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("0 0.5 0.5 0.2 0.1\n0 2 2\n")
    with pytest.raises(ParseError) as ei:
        read_label_file(p)
    assert ei.value.source == str(p) and ei.value.line == 2


@settings(max_examples=200, deadline=None)
@given(annotation_sets())
def test_parse_serialize_identity(s):
    text = serialize_annotations(s, "mixed")
    back = parse_label_file(text, "mixed")
    assert back == s
    assert serialize_annotations(back, "mixed") == text


@settings(max_examples=100, deadline=None)
@given(st.lists(polygon_annotation(sizes=st.integers(3, 10)), max_size=5))
def test_polygon_kind_roundtrip_includes_quads(anns):
    s = AnnotationSet("", tuple(anns))
    assert parse_label_file(serialize_annotations(s, "polygon"), "polygon") == s


# -- drop_class -------------------------------------------------------------

def _set(*cids):
    return AnnotationSet("x", tuple(Annotation(c, aabb=(0.5, 0.5, 0.1, 0.1)) for c in cids))


def test_drop_class_examples():
    assert [a.class_id for a in drop_class(_set(0, 4, 0), 4)] == [0, 0]
    assert drop_class(_set(0, 1), 7) == _set(0, 1)
    assert drop_class(_set(), 3) == _set()


@given(st.lists(st.integers(0, 5), max_size=20), st.integers(0, 5), st.integers(0, 5))
def test_drop_class_idempotent_and_commutes(cids, a, b):
    s = _set(*cids)
    assert drop_class(drop_class(s, a), a) == drop_class(s, a)
    assert drop_class(drop_class(s, a), b) == drop_class(drop_class(s, b), a)


# -- metadata ---------------------------------------------------------------

HEADER = "image_id,camera_pitch_deg,altitude_m,split\n"


def test_metadata_row():
    m = load_metadata(HEADER + "img_001, 30.0, 60.0, train\n")
    assert m["img_001"] == ImageMetadata("img_001", 30.0, 60.0, "train")


def test_metadata_missing_pitch():
    m = load_metadata(HEADER + "img_002,,60,val\n")
    assert m["img_002"].camera_pitch_deg is None and m["img_002"].altitude_m == 60.0


def test_metadata_duplicate():
    with pytest.raises(ParseError, match="duplicate") as ei:
        load_metadata(HEADER + "a,30,60,train\nb,40,60,train\na,50,60,train\n")
    assert ei.value.line == 4


def test_metadata_bad_number_row():
    with pytest.raises(ParseError, match="altitude_m") as ei:
        load_metadata(HEADER + "a,30,60,train\nb,40,high,train\n")
    assert ei.value.line == 3


def test_metadata_pitch_range_and_split():
    load_metadata(HEADER + "a,-90,60,train\nb,92,60,test\n")
    with pytest.raises(ParseError, match="outside"):
        load_metadata(HEADER + "a,95,60,train\n")
    with pytest.raises(ParseError, match="split"):
        load_metadata(HEADER + "a,30,60,holdout\n")


def test_metadata_requires_columns():
    with pytest.raises(ParseError, match="camera_pitch_deg"):
        load_metadata("image_id,altitude_m\na,3\n")


def test_metadata_file_error_has_source(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text(HEADER + "a,x,1,train\n")
    with pytest.raises(ParseError) as ei:
        load_metadata_file(p)
    assert ei.value.source == str(p) and ei.value.line == 2


def test_filter_missing_counts():
    recs = [ImageMetadata(f"i{k}", None if k < 20 else 45.0) for k in range(100)]
    kept, frac = filter_missing_metadata(recs)
    assert len(kept) == 80 and frac == pytest.approx(0.20)
    kept2, frac2 = filter_missing_metadata(kept)
    assert kept2 == kept and frac2 == 0.0
    assert filter_missing_metadata(recs[20:])[1] == 0.0


def test_filter_missing_fraction_large_split():
    # 2164 of 10000 records without pitch
    recs = [ImageMetadata(f"i{k}", None if k < 2164 else 10.0) for k in range(10000)]
    assert filter_missing_metadata(recs)[1] == pytest.approx(0.2164)


# -- images -----------------------------------------------------------------

def test_pgm_2x2(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 7]))
    img = load_image(p)
    assert img.width == 2 and img.height == 2
    assert img.data.tolist() == [[0, 128], [255, 7]]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 2**32 - 1), st.sampled_from([".png", ".pgm"]))
def test_image_roundtrip_bit_exact(tmp_path_factory, w, h, seed, suffix):
    arr = np.random.default_rng(seed).integers(0, 256, size=(h, w), dtype=np.uint8)
    p = tmp_path_factory.mktemp("img") / f"x{suffix}"
    save_image(ThermalImage.from_array(arr), p)
    assert load_image(p) == ThermalImage.from_array(arr)


def test_16bit_rejected(tmp_path):
    p = tmp_path / "deep.png"
    Image.fromarray(np.full((4, 4), 40000, dtype=np.uint16)).save(p)
    with pytest.raises(ImageFormatError, match="bit depth"):
        load_image(p)


def test_rgb_rejected(tmp_path):
    p = tmp_path / "rgb.png"
    Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(p)
    with pytest.raises(ImageFormatError, match="rgb_to_grayscale"):
        load_image(p)


def test_thermal_image_is_immutable():
    img = ThermalImage.from_array(np.zeros((2, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        img.data[0, 0] = 1
    with pytest.raises(ValueError):
        ThermalImage(3, 2, np.zeros((2, 3), dtype=np.int16))


def test_corrupt_image_is_format_error(tmp_path):
    p = tmp_path / "junk.png"
    p.write_bytes(b"not an image")
    with pytest.raises(ImageFormatError, match="not a readable"):
        load_image(p)
    good = tmp_path / "t.png"
    save_image(ThermalImage.from_array(np.zeros((64, 64), np.uint8) + 9), good)
    (tmp_path / "cut.png").write_bytes(good.read_bytes()[:60])
    with pytest.raises(ImageFormatError):
        load_image(tmp_path / "cut.png")
