import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noclink.streams import StreamSpec, generate_stream
from noclink.traffic import (
    InjectionSpec,
    PayloadSource,
    TrafficError,
    inject_packets,
    load_traffic_spec,
    make_payload_source,
    msb_pixel_source,
    packed_pixel_source,
    pgm_source,
    raw_byte_source,
    source_from_spec,
    to_flow_specs,
)

NODES = {"A": (0, 0, 0), "B": (1, 0, 0)}


def simple_source(n=64, width=16):
    return PayloadSource(np.arange(n, dtype=np.uint64), width, "ramp")


class TestPayloadSource:
    def test_provider_preserves_order(self):
        take = simple_source().provider()
        chunks = [take(5) for _ in range(3)]
        assert np.array_equal(np.concatenate(chunks), np.arange(15))

    def test_recycles_from_start(self):
        src = PayloadSource(np.array([1, 2, 3], dtype=np.uint64), 4, "tiny")
        take = src.provider()
        assert list(take(7)) == [1, 2, 3, 1, 2, 3, 1]

    def test_width_overflow_rejected(self):
        with pytest.raises(TrafficError):
            PayloadSource(np.array([256], dtype=np.uint64), 8, "bad")

    def test_empty_rejected(self):
        with pytest.raises(TrafficError):
            PayloadSource(np.array([], dtype=np.uint64), 8, "empty")

    @given(st.integers(1, 50), st.lists(st.integers(0, 255), min_size=1, max_size=40))
    @settings(max_examples=50, deadline=None)
    def test_take_matches_modular_indexing(self, count, values):
        src = PayloadSource(np.array(values, dtype=np.uint64), 8, "p")
        take = src.provider()
        got = np.concatenate([take(count), take(count)])
        want = [values[i % len(values)] for i in range(2 * count)]
        assert list(got) == want


class TestBuilders:
    def test_packed_pixels_layout(self):
        src = packed_pixel_source(16, 100, sigma=40.0, rho=0.9, seed=3)
        hi = generate_stream(StreamSpec("gaussian", 8, 100, sigma=40.0, rho=0.9, seed=3))
        assert np.array_equal(src.words >> np.uint64(8), hi.words)

    def test_msb_pixels_layout(self):
        src = msb_pixel_source(16, 100, sigma=40.0, rho=0.9, seed=3)
        hi = generate_stream(StreamSpec("gaussian", 8, 100, sigma=40.0, rho=0.9, seed=3))
        assert np.array_equal(src.words >> np.uint64(8), hi.words)

    def test_odd_width_rejected(self):
        with pytest.raises(TrafficError):
            packed_pixel_source(15, 10, sigma=4.0, rho=0.5, seed=0)

    def test_raw_bytes_packed_msb_first(self, tmp_path):
        path = tmp_path / "img.raw"
        path.write_bytes(bytes([0xAB, 0xCD, 0x01, 0x02, 0xFF]))  # odd byte dropped
        src = raw_byte_source(path, 16)
        assert list(src.words) == [0xABCD, 0x0102]

    def test_pgm_roundtrip(self, tmp_path):
        pixels = np.arange(512 * 512, dtype=np.uint64) % 251
        path = tmp_path / "img.pgm"
        with open(path, "wb") as fh:
            fh.write(b"P5\n# synthetic\n512 512\n255\n")
            fh.write(bytes(int(p) for p in pixels))
        src = pgm_source(path, 16)
        assert len(src) == 512 * 512 // 2
        assert src.words[0] == (pixels[0] << 8) | pixels[1]

    def test_pgm_rejects_ascii_format(self, tmp_path):
        path = tmp_path / "img.pgm"
        path.write_bytes(b"P2\n2 2\n255\n0 1 2 3\n")
        with pytest.raises(TrafficError):
            pgm_source(path, 16)

    def test_make_payload_source_synthetic(self):
        src = make_payload_source(
            {"payload": "gaussian", "sigma": "256", "rho": "0.9", "length": "50"}, 16
        )
        assert len(src) == 50 and src.width == 16

    def test_make_payload_source_unknown(self):
        with pytest.raises(TrafficError):
            make_payload_source({"payload": "video"}, 16)


class TestInjectionSpec:
    def test_rate_out_of_range(self):
        with pytest.raises(TrafficError):
            InjectionSpec("A", "B", 0, 1.5, 32, simple_source())

    def test_load_assigns_types_per_source(self):
        flows = [
            {"src": "A", "dst": "B", "rate": "0.2", "payload": "uniform", "seed": "1"},
            {"src": "B", "dst": "A", "rate": "0.2", "payload": "uniform", "seed": "2"},
        ]
        specs = load_traffic_spec(flows, NODES, 16, 32)
        assert [s.type_id for s in specs] == [0, 1]

    def test_load_unknown_node(self):
        flows = [{"src": "Z", "dst": "B", "rate": "0.1", "payload": "uniform"}]
        with pytest.raises(TrafficError):
            load_traffic_spec(flows, NODES, 16, 32)

    def test_empty_traffic_permitted(self):
        assert load_traffic_spec([], NODES, 16, 32) == []

    def test_to_flow_specs_fresh_cursors(self):
        spec = InjectionSpec("A", "B", 0, 0.5, 4, simple_source())
        f1, = to_flow_specs([spec])
        f2, = to_flow_specs([spec])
        assert np.array_equal(f1.payload(5), f2.payload(5))


class TestInjectPackets:
    def test_binomial_bound(self):
        spec = InjectionSpec("A", "B", 0, 0.2, 32, simple_source(1024))
        rng = np.random.default_rng(7)
        packets = inject_packets(spec, 100_000, rng)
        assert 19_500 <= len(packets) <= 20_500

    def test_zero_rate(self):
        spec = InjectionSpec("A", "B", 0, 0.0, 32, simple_source())
        assert inject_packets(spec, 10_000, np.random.default_rng(0)) == []

    def test_payload_order_preserved(self):
        spec = InjectionSpec("A", "B", 0, 0.5, 4, simple_source(9, 16))
        packets = inject_packets(spec, 50, np.random.default_rng(1))
        words = np.concatenate([w for _, w in packets])
        expect = [i % 9 for i in range(len(words))]
        assert list(words) == expect

    def test_empirical_rate_converges(self):
        spec = InjectionSpec("A", "B", 0, 0.35, 8, simple_source())
        packets = inject_packets(spec, 100_000, np.random.default_rng(3))
        assert abs(len(packets) / 100_000 - 0.35) < 0.0035

    def test_image_sized_payload_consumed_sequentially(self):
        # a 512x512 8-bit image packed two pixels per flit yields 131072
        # payload words that whole packets consume in order
        pixels = (np.arange(512 * 512) % 256).astype(np.uint8)
        words = (pixels[0::2].astype(np.uint64) << np.uint64(8)) | pixels[1::2]
        src = PayloadSource(words, 16, "image")
        assert len(src) == 131_072
        take = src.provider()
        drained = np.concatenate([take(31) for _ in range(1000)])
        assert np.array_equal(drained, words[: 31 * 1000])
