import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfsep import datagen, dsp
from rfsep.errors import FormatError, InvalidConfigError, SignalError
from rfsep.rng import CounterRng

TINY = datagen.DatasetSpec(n_segments=2, examples_per_segment=4,
                           sinr_grid_db=(-6.0, 0.0, 6.0),
                           example_len=512, master_seed=42,
                           qpsk=dsp.QpskParams(oversampling=4, rrc_span=4))


def test_generate_counts_and_manifest(tmp_path):
    manifest = datagen.generate_dataset(TINY, tmp_path / "d.sigpack")
    assert manifest["count"] == 8
    examples, m2 = datagen.read_sigpack(tmp_path / "d.sigpack")
    assert len(examples) == 8
    assert len(m2["examples"]) == 8
    assert m2["payload_sha256"] == manifest["payload_sha256"]


def test_regeneration_byte_identical(tmp_path):
    datagen.generate_dataset(TINY, tmp_path / "a.sigpack")
    datagen.generate_dataset(TINY, tmp_path / "b.sigpack")
    assert (tmp_path / "a.sigpack").read_bytes() == (tmp_path / "b.sigpack").read_bytes()


def test_threaded_generation_matches_serial(tmp_path):
    datagen.generate_dataset(TINY, tmp_path / "s.sigpack", threads=1)
    datagen.generate_dataset(TINY, tmp_path / "t.sigpack", threads=4)
    assert (tmp_path / "s.sigpack").read_bytes() == (tmp_path / "t.sigpack").read_bytes()


def test_examples_hit_assigned_sinr_exactly(tmp_path):
    datagen.generate_dataset(TINY, tmp_path / "d.sigpack")
    examples, _ = datagen.read_sigpack(tmp_path / "d.sigpack")
    grid = TINY.sinr_grid_db
    for i, ex in enumerate(examples):
        assert ex.sinr_db == grid[(i % TINY.examples_per_segment) % len(grid)]
        measured = 10 * math.log10(
            dsp.mean_power(ex.soi) / dsp.mean_power(ex.mixture - ex.soi))
        assert abs(measured - ex.sinr_db) < 1e-9


def test_example_reconstructible_from_seed():
    ex = datagen.synth_example(TINY, 1, 2)
    again = datagen.synth_example(TINY, 1, 2)
    assert again.seed == ex.seed
    np.testing.assert_array_equal(again.mixture, ex.mixture)
    np.testing.assert_array_equal(again.soi, ex.soi)
    np.testing.assert_array_equal(again.bits, ex.bits)


def test_split_seed_streams_disjoint():
    seeds = {}
    for split in datagen.SPLITS:
        seeds[split] = {datagen.example_seed(7, split, s, i)
                        for s in range(8) for i in range(16)}
    assert seeds["train"].isdisjoint(seeds["val"])
    assert seeds["train"].isdisjoint(seeds["test"])
    assert seeds["val"].isdisjoint(seeds["test"])


def test_spec_validation():
    with pytest.raises(InvalidConfigError):
        datagen.DatasetSpec(soi_kind="psk8").validate()
    with pytest.raises(InvalidConfigError):
        datagen.DatasetSpec(sinr_grid_db=(3.0, 3.0)).validate()
    with pytest.raises(InvalidConfigError):
        datagen.DatasetSpec(example_len=1000).validate()  # breaks QPSK framing
    with pytest.raises(InvalidConfigError):
        datagen.DatasetSpec(soi_kind=datagen.SOI_OFDM, example_len=4096).validate()
    # OFDM lengths must be whole symbols; 4080 = 51 * 80 works
    datagen.DatasetSpec(soi_kind=datagen.SOI_OFDM, example_len=4080).validate()


class TestAugmentation:
    def test_noiseless_accepted_and_bits_stable(self):
        spec = datagen.DatasetSpec(**{**TINY.__dict__})
        ex = datagen.synth_example(spec, 0, 1)
        out = datagen.augment_resynthesize(ex)
        assert out is not None
        assert out.augmented and out.parent_seed == ex.seed and out.seed != ex.seed
        surrogate = dsp.comm_surrogate_spec(datagen.interference_seed(ex.seed),
                                            ex.mixture.size)
        redemod = dsp.demod_comm_surrogate(out.mixture - out.soi, surrogate)
        assert np.array_equal(redemod, surrogate.bits)

    def test_conserves_sinr_bits_and_length(self):
        ex = datagen.synth_example(TINY, 1, 3)
        out = datagen.augment_resynthesize(ex)
        assert out is not None
        assert out.sinr_db == ex.sinr_db
        assert out.mixture.size == ex.mixture.size
        np.testing.assert_array_equal(out.bits, ex.bits)
        measured = 10 * math.log10(
            dsp.mean_power(out.soi) / dsp.mean_power(out.mixture - out.soi))
        assert abs(measured - ex.sinr_db) < 1e-9

    def test_heavy_noise_rejected(self):
        # corrupt the embedded interference at 5 dB SNR before augmenting
        ex = datagen.synth_example(TINY, 0, 0)
        rng = CounterRng(999)
        embedded = ex.mixture - ex.soi
        noise = rng.normal_complex(embedded.size)
        noise *= math.sqrt(dsp.mean_power(embedded) / dsp.mean_power(noise)
                           / 10 ** 0.5)
        corrupted = datagen.MixtureExample(
            mixture=ex.soi + embedded + noise, soi=ex.soi, bits=ex.bits,
            interference_kind=ex.interference_kind, sinr_db=ex.sinr_db,
            seed=ex.seed)
        assert datagen.augment_resynthesize(corrupted) is None

    def test_non_demodulable_kind_is_an_error(self):
        spec = datagen.DatasetSpec(**{**TINY.__dict__, "interference_kind": "emi"})
        ex = datagen.synth_example(spec, 0, 0)
        with pytest.raises(SignalError):
            datagen.augment_resynthesize(ex)


class TestSigpack:
    def _example(self, seed, n=64, nb=12):
        rng = CounterRng(seed)
        return datagen.MixtureExample(
            mixture=rng.normal_complex(n), soi=rng.normal_complex(n),
            bits=rng.bits(nb), interference_kind="emi",
            sinr_db=float(rng.uniform(-20, 20, 1)[0]), seed=seed,
            augmented=bool(seed % 2), parent_seed=seed + 1 if seed % 2 else None)

    def test_roundtrip_bit_exact(self, tmp_path):
        examples = [self._example(s) for s in range(5)]
        datagen.write_sigpack(examples, tmp_path / "x.sigpack", spec_echo={"k": 1})
        back, manifest = datagen.read_sigpack(tmp_path / "x.sigpack")
        assert manifest["spec"] == {"k": 1}
        for a, b in zip(examples, back):
            assert a.mixture.tobytes() == b.mixture.tobytes()
            assert a.soi.tobytes() == b.soi.tobytes()
            np.testing.assert_array_equal(a.bits, b.bits)
            assert (a.interference_kind, a.sinr_db, a.seed, a.augmented,
                    a.parent_seed) == (b.interference_kind, b.sinr_db, b.seed,
                                       b.augmented, b.parent_seed)

    @settings(max_examples=25, deadline=None)
    @given(seeds=st.lists(st.integers(min_value=0, max_value=2**32), min_size=0,
                          max_size=4),
           nb=st.integers(min_value=1, max_value=40))
    def test_roundtrip_property(self, seeds, nb):
        import tempfile
        with tempfile.TemporaryDirectory() as d:
            path = f"{d}/x.sigpack"
            examples = [self._example(s, n=8 + s % 5, nb=nb) for s in seeds]
            datagen.write_sigpack(examples, path)
            back, manifest = datagen.read_sigpack(path)
        assert manifest["count"] == len(examples)
        for a, b in zip(examples, back):
            assert a.mixture.tobytes() == b.mixture.tobytes()
            np.testing.assert_array_equal(a.bits, b.bits)

    def test_empty_file_valid(self, tmp_path):
        datagen.write_sigpack([], tmp_path / "empty.sigpack")
        back, manifest = datagen.read_sigpack(tmp_path / "empty.sigpack")
        assert back == [] and manifest["count"] == 0

    def test_corrupted_magic(self, tmp_path):
        path = tmp_path / "x.sigpack"
        datagen.write_sigpack([self._example(1)], path)
        raw = bytearray(path.read_bytes())
        raw[0] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="magic"):
            datagen.read_sigpack(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "x.sigpack"
        datagen.write_sigpack([self._example(1)], path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-16])
        with pytest.raises(FormatError, match="truncated"):
            datagen.read_sigpack(path)
