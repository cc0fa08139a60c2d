import json

import jsonschema
import numpy as np
import pytest

from gazechunks import io
from gazechunks.analysis import AnalyzeConfig, SelectionMask, analyze
from gazechunks.core import FormatError
from gazechunks.regressor import TrainConfig, init_params, train
from gazechunks.shiftsim import init_pipeline

from conftest import MID_LAYOUT, SMALL_LAYOUT, make_dataset


class TestLatentFile:
    def test_round_trip_bit_exact(self, tmp_path, rng):
        codes = rng.normal(0, 1, (7, SMALL_LAYOUT.total_dims)).astype(np.float32).astype(np.float64)
        path = tmp_path / "x.lgz"
        io.write_latent_file(path, SMALL_LAYOUT, codes)
        layout, back = io.read_latent_file(path)
        assert layout == SMALL_LAYOUT
        assert np.array_equal(back, codes)
        path2 = tmp_path / "y.lgz"
        io.write_latent_file(path2, layout, back)
        assert path.read_bytes() == path2.read_bytes()

    def test_header_fields(self, tmp_path, rng):
        codes = rng.normal(0, 1, (3, SMALL_LAYOUT.total_dims))
        path = tmp_path / "x.lgz"
        io.write_latent_file(path, SMALL_LAYOUT, codes)
        raw = path.read_bytes()
        assert raw[:4] == b"LGZ1"
        assert len(raw) == 24 + 4 * 3 * SMALL_LAYOUT.total_dims

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.lgz"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(FormatError):
            io.read_latent_file(path)

    def test_size_mismatch_rejected(self, tmp_path, rng):
        codes = rng.normal(0, 1, (3, SMALL_LAYOUT.total_dims))
        path = tmp_path / "x.lgz"
        io.write_latent_file(path, SMALL_LAYOUT, codes)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(FormatError):
            io.read_latent_file(path)

    def test_invalid_layout_rejected(self, tmp_path):
        import struct

        header = struct.pack("<4sIIIII", b"LGZ1", 1, 0, 2, 30, 16)  # 30 % 16 != 0
        path = tmp_path / "x.lgz"
        path.write_bytes(header)
        with pytest.raises(FormatError):
            io.read_latent_file(path)


class TestLabelsCsv:
    def test_round_trip_exact(self, tmp_path, rng):
        ids = [f"s{i}" for i in range(5)]
        yaw = rng.uniform(-179, 179, 5)
        pitch = rng.uniform(-89, 89, 5)
        path = tmp_path / "labels.csv"
        io.write_labels_csv(path, ids, yaw, pitch)
        rids, ryaw, rpitch = io.read_labels_csv(path)
        assert rids == ids
        assert np.array_equal(ryaw, yaw)
        assert np.array_equal(rpitch, pitch)

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("id,yaw,pitch\na,1,2\n")
        with pytest.raises(FormatError):
            io.read_labels_csv(path)

    def test_non_numeric_rejected(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("sample_id,yaw_deg,pitch_deg\na,one,2\n")
        with pytest.raises(FormatError):
            io.read_labels_csv(path)

    def test_load_dataset_count_mismatch(self, tmp_path, rng):
        codes = rng.normal(0, 1, (3, SMALL_LAYOUT.total_dims))
        io.write_latent_file(tmp_path / "x.lgz", SMALL_LAYOUT, codes)
        io.write_labels_csv(tmp_path / "l.csv", ["a", "b"], [1.0, 2.0], [0.0, 0.0])
        with pytest.raises(FormatError):
            io.load_dataset(tmp_path / "x.lgz", tmp_path / "l.csv")


class TestReportDoc:
    @pytest.fixture
    def report_doc(self, rng):
        yaws = np.concatenate([rng.uniform(30, 90, 40), rng.uniform(-90, -30, 40)])
        ds = make_dataset(MID_LAYOUT, rng.normal(0, 1, (80, MID_LAYOUT.total_dims)), yaws)
        report = analyze(ds, AnalyzeConfig(top_n=3, alpha=None, seed=17))
        return io.report_to_doc(report, "0.1.0")

    def test_schema_valid(self, report_doc):
        jsonschema.validate(report_doc, io.load_report_schema())

    def test_round_trip_and_mask_recovery(self, tmp_path, report_doc):
        path = tmp_path / "report.json"
        io.write_report(path, report_doc)
        back = io.read_report(path)
        assert back == json.loads(json.dumps(report_doc))
        mask = io.mask_from_report_doc(back)
        assert len(mask) == 3

    def test_chunks_ordered_and_complete(self, report_doc):
        assert [c["index"] for c in report_doc["chunks"]] == list(range(MID_LAYOUT.n_chunks))
        assert report_doc["seed"] == 17

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "x.json"
        path.write_text("{not json")
        with pytest.raises(FormatError):
            io.read_report(path)


class TestModelFiles:
    def test_regressor_round_trip_bit_exact(self, tmp_path, rng):
        mask = SelectionMask(SMALL_LAYOUT, (0, 2))
        ds = make_dataset(
            SMALL_LAYOUT, rng.normal(0, 1, (16, 64)), rng.uniform(-60, 60, 16)
        )
        params = train(ds, mask, TrainConfig(learning_rate=0.02, epochs=10, batch_size=8, seed=2))
        path = tmp_path / "model.lgzm"
        io.write_regressor(path, params)
        back = io.read_regressor(path)
        assert back.mask.chunk_indices == params.mask.chunk_indices
        for name in ("attention_logits", "w1", "b1", "w2", "b2"):
            assert np.array_equal(getattr(back, name), getattr(params, name))

    def test_regressor_bad_magic(self, tmp_path, rng):
        path = tmp_path / "model.lgzm"
        io.write_regressor(path, init_params(SelectionMask(SMALL_LAYOUT, (1,)), 4, 0))
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            io.read_regressor(path)

    def test_pipeline_round_trip(self, tmp_path):
        params = init_pipeline(12, 5, seed=4)
        params.extractor_trained = True
        path = tmp_path / "pipe.lgzs"
        io.write_pipeline(path, params)
        back = io.read_pipeline(path)
        assert back.extractor_trained
        for name in ("w_enc", "b_enc", "w_gen", "b_gen", "w_ext", "b_ext"):
            assert np.array_equal(getattr(back, name), getattr(params, name))
        with pytest.raises(ValueError):
            back.w_gen[0, 0] = 9.0

    def test_pipeline_truncatedrejected(self, tmp_path):
        params = init_pipeline(6, 2, seed=0)
        path = tmp_path / "pipe.lgzs"
        io.write_pipeline(path, params)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError):
            io.read_pipeline(path)
