"""Tests for the receive pipeline: sync, SNR, FO, LS estimate, decode."""

import numpy as np
import pytest

from smlink import channel, modem, rxchain, txchain
from smlink.errors import (
    ConfigurationError,
    DegenerateInputError,
    DimensionError,
)
from smlink.errors import SyncRejection


@pytest.fixture(scope="module")
def loopback():
    """Two-frame SM/BPSK transmission plus a fixed 2x2 channel."""
    layout = txchain.FrameLayout()
    tx_layout = txchain.TransmissionLayout(n_frames=2, snr_block_symbols=200)
    rng = np.random.default_rng(77)
    c = modem.build_constellation(2)
    per_frame = 2 * layout.data_symbols_per_frame
    bits = rng.integers(0, 2, 2 * per_frame).astype(np.uint8)
    frames = []
    for f in range(2):
        _, vectors = modem.sm_modulate(
            bits[f * per_frame : (f + 1) * per_frame], 2, c
        )
        frames.append(txchain.build_frame(vectors, layout, 2))
    tx = txchain.assemble_transmission(frames, tx_layout)
    h = np.array([[1.0 + 0.1j, 0.35 + 0.2j], [0.1 - 0.4j, 0.9 - 0.05j]])
    return layout, tx_layout, c, bits, tx, h


class TestDetectSync:
    def test_loopback_pulse_grid(self, loopback):
        layout, tx_layout, _, _, tx, _ = loopback
        u = layout.upsample_factor
        period = (1 + tx_layout.sync_gap_symbols) * u
        combined = np.sqrt(np.sum(np.abs(tx.samples) ** 2, axis=0))
        res = rxchain.detect_sync(combined, period)
        assert res.peak_indices.tolist() == list(range(0, 20 * period, period))
        assert res.tx_start_index == 0
        assert res.data_start_index == 0

    def test_scale_invariance(self, loopback):
        layout, tx_layout, _, _, tx, _ = loopback
        period = (1 + tx_layout.sync_gap_symbols) * layout.upsample_factor
        combined = np.sqrt(np.sum(np.abs(tx.samples) ** 2, axis=0))
        a = rxchain.detect_sync(combined, period)
        b = rxchain.detect_sync(0.3 * combined, period)
        assert np.array_equal(a.peak_indices, b.peak_indices)
        assert a.tx_start_index == b.tx_start_index

    def test_offset_capture(self, loopback):
        layout, tx_layout, _, _, tx, _ = loopback
        period = (1 + tx_layout.sync_gap_symbols) * layout.upsample_factor
        combined = np.sqrt(np.sum(np.abs(tx.samples) ** 2, axis=0))
        padded = np.concatenate([np.zeros(137), combined])
        res = rxchain.detect_sync(padded, period, data_offset_samples=10)
        assert res.tx_start_index == 137
        assert res.data_start_index == 147

    def test_missing_pulse_rejects(self, loopback):
        layout, tx_layout, _, _, tx, _ = loopback
        period = (1 + tx_layout.sync_gap_symbols) * layout.upsample_factor
        combined = np.sqrt(np.sum(np.abs(tx.samples) ** 2, axis=0)).copy()
        combined[19 * period] = 0.0  # kill the last pulse
        with pytest.raises(SyncRejection):
            rxchain.detect_sync(combined, period)

    def test_lone_spike_rejects(self):
        capture = np.zeros(50_000)
        capture[1234] = 1.0
        with pytest.raises(SyncRejection):
            rxchain.detect_sync(capture, 204)

    def test_all_zero_rejects(self):
        with pytest.raises(SyncRejection):
            rxchain.detect_sync(np.zeros(1000), 204)


class TestEstimateSnr:
    def build_section(self, h, snr_db, rng, nt=2, blocks=5, block_len=4000,
                      x_max=0.09):
        """On/off sounding section whose configured SNR is exact."""
        nr = h.shape[0]
        noise_var = x_max**2 * np.sum(np.abs(h) ** 2) / (
            nt * nr * 10.0 ** (snr_db / 10.0)
        )
        n = nt * 2 * blocks * block_len
        y = np.sqrt(noise_var / 2.0) * (
            rng.standard_normal((nr, n)) + 1j * rng.standard_normal((nr, n))
        )
        for t in range(nt):
            base = t * 2 * blocks * block_len
            for b in range(blocks):
                start = base + 2 * b * block_len
                y[:, start : start + block_len] += x_max * h[:, t : t + 1]
        return y, noise_var

    def test_tracks_ground_truth(self):
        rng = np.random.default_rng(3)
        h = np.array([[1.0 + 0.2j, 0.8 - 0.1j], [0.4 + 0.5j, 1.1 + 0.0j]])
        for snr_db in (0.0, 15.0, 30.0):
            y, _ = self.build_section(h, snr_db, rng)
            est = rxchain.estimate_snr(y, 2, 5, 4000)
            assert est.valid
            assert est.per_antenna_per_block.shape == (2, 5)
            assert abs(est.snr_db - snr_db) <= 0.5

    def test_noiseless_is_flagged_invalid(self):
        """Silent off-blocks saturate the probe: +inf sentinel, valid=False."""
        h = np.eye(2, dtype=complex)
        block = 4000
        y = np.zeros((2, 2 * 2 * 5 * block), dtype=complex)
        for t in range(2):
            base = t * 2 * 5 * block
            for b in range(5):
                start = base + 2 * b * block
                y[:, start : start + block] = 0.09 * h[:, t : t + 1]
        est = rxchain.estimate_snr(y, 2, 5, block)
        assert not est.valid
        assert est.snr_db == np.inf

    def test_all_zero_section_rejected(self):
        with pytest.raises(DegenerateInputError):
            rxchain.estimate_snr(np.zeros((2, 80_000), dtype=complex), 2, 5, 4000)

    def test_short_section_rejected(self):
        with pytest.raises(DimensionError):
            rxchain.estimate_snr(np.ones((2, 100), dtype=complex), 2, 5, 4000)


class TestMatchedFilter:
    def test_impulse_recovers_unit_symbol(self):
        taps = txchain.rrc_taps()
        shaped = txchain.pulse_shape(np.array([[1.0 + 0j]]), taps, 4)
        sym = rxchain.matched_filter_downsample(shaped, taps, 4, n_symbols=1)
        assert sym.shape == (1, 1)
        assert sym[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_bpsk_block_loopback(self):
        rng = np.random.default_rng(2)
        taps = txchain.rrc_taps()
        symbols = rng.choice([1.0, -1.0], size=(1, 80)).astype(complex)
        shaped = txchain.pulse_shape(symbols, taps, 4)
        out = rxchain.matched_filter_downsample(shaped, taps, 4, n_symbols=80)
        assert np.max(np.abs(out - symbols)) <= 0.02  # residual ISI only

    def test_zero_in_zero_out(self):
        taps = txchain.rrc_taps()
        out = rxchain.matched_filter_downsample(
            np.zeros((2, 200), dtype=complex), taps, 4
        )
        assert not out.any()

    def test_short_input_rejected(self):
        taps = txchain.rrc_taps()
        with pytest.raises(DimensionError):
            rxchain.matched_filter_downsample(np.ones((1, 10), dtype=complex), taps, 4)


class TestFoEstimation:
    def test_pure_ramp_is_exact(self):
        n = np.arange(1000)
        x = np.exp(2j * np.pi * 0.003 * n)
        assert rxchain.estimate_fo(x) == pytest.approx(0.003, abs=1e-12)

    def test_phase_wrap_handled(self):
        """Ramps whose phase crosses +-pi still come out exact."""
        n = np.arange(500)
        for delta in (-0.2, 0.35):
            x = 0.7 * np.exp(1j * (2.9 + 2 * np.pi * delta * n))
            assert rxchain.estimate_fo(x) == pytest.approx(delta, abs=1e-12)

    def test_constant_input_is_zero(self):
        assert rxchain.estimate_fo(np.full(100, 0.3 + 0.4j)) == 0.0

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateInputError):
            rxchain.estimate_fo(np.ones(1))
        x = np.exp(2j * np.pi * 0.01 * np.arange(50))
        x[20] = 0.0
        with pytest.raises(DegenerateInputError):
            rxchain.estimate_fo(x)

    def test_correct_fo_inverts_ramp(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((2, 300)) + 1j * rng.standard_normal((2, 300))
        delta = 0.0123
        ramp = np.exp(2j * np.pi * delta * np.arange(300))
        assert np.max(np.abs(rxchain.correct_fo(x * ramp, delta) - x)) < 1e-12
        assert np.array_equal(rxchain.correct_fo(x, 0.0), x)
        both = rxchain.correct_fo(rxchain.correct_fo(x, 0.01), -0.01)
        assert np.max(np.abs(both - x)) < 1e-12


class TestLsChannelEstimate:
    pilots = txchain.pilot_matrix(2, 10)

    def pilot_stream(self, n_seq=10):
        return np.tile(self.pilots.T, (1, n_seq))  # (nt, n_seq * 10)

    def test_noiseless_exact(self):
        rng = np.random.default_rng(4)
        h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        y = h @ self.pilot_stream()
        est = rxchain.ls_channel_estimate(y, self.pilots, which_half="second")
        assert np.max(np.abs(est.h_hat - h)) < 1e-10
        assert est.which_half == "second"

    def test_zero_block_gives_zero(self):
        est = rxchain.ls_channel_estimate(
            np.zeros((2, 100), dtype=complex), self.pilots
        )
        assert not est.h_hat.any()

    def test_gain_divides_per_antenna(self):
        rng = np.random.default_rng(9)
        h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        y = h @ self.pilot_stream()
        plain = rxchain.ls_channel_estimate(y, self.pilots).h_hat
        gained = rxchain.ls_channel_estimate(y, self.pilots,
                                             gain=np.array([2.0, 4.0])).h_hat
        assert np.allclose(gained, plain / np.array([2.0, 4.0])[None, :])

    def test_noise_averaging_gain(self):
        """Estimator noise variance is sigma^2 / (n_theta * n_interior)."""
        rng = np.random.default_rng(11)
        h = np.eye(2, dtype=complex)
        x = self.pilot_stream()
        noise_var = 0.01
        sq = 0.0
        trials = 3000
        for _ in range(trials):
            noise = np.sqrt(noise_var / 2) * (
                rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
            )
            est = rxchain.ls_channel_estimate(h @ x + noise, self.pilots)
            sq += np.mean(np.abs(est.h_hat - h) ** 2)
        expected = noise_var / (10 * 8)  # 10-long sequences, 8 interior ones
        assert sq / trials == pytest.approx(expected, rel=0.2)

    def test_non_orthogonal_pilots_rejected(self):
        with pytest.raises(ConfigurationError):
            rxchain.ls_channel_estimate(
                np.ones((2, 10), dtype=complex), np.ones((10, 2), dtype=complex)
            )

    def test_partial_sequence_rejected(self):
        with pytest.raises(DimensionError):
            rxchain.ls_channel_estimate(
                np.ones((2, 15), dtype=complex), self.pilots
            )


class TestDemodulateFrame:
    def test_sm_roundtrip_with_split_channels(self):
        rng = np.random.default_rng(13)
        c = modem.build_constellation(2)
        bits = rng.integers(0, 2, 2 * 200).astype(np.uint8)
        _, vectors = modem.sm_modulate(bits, 2, c)
        h1 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        h2 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        y = np.concatenate(
            [vectors[:100] @ h1.T, vectors[100:] @ h2.T], axis=0
        ).T
        out = rxchain.demodulate_frame(y, h1, h2, "sm", c)
        assert np.array_equal(out, bits)

    def test_smx_roundtrip(self):
        rng = np.random.default_rng(14)
        c = modem.build_constellation(4)
        bits = rng.integers(0, 2, 4 * 100).astype(np.uint8)
        vectors = modem.smx_modulate(bits, 2, c)
        h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        out = rxchain.demodulate_frame((vectors @ h.T).T, h, h, "smx", c)
        assert np.array_equal(out, bits)


class TestDecodeTransmission:
    def decode(self, loopback, fo=0.0):
        layout, tx_layout, c, bits, tx, h = loopback
        rx = channel.propagate_waveform(tx.samples.T, h, fo_cycles_per_sample=fo)
        result = rxchain.decode_transmission(
            rx.T, layout, tx_layout, 2, "sm", c, symbol_scale=tx.symbol_scale
        )
        return bits, h, result

    def test_clean_loopback(self, loopback):
        bits, h, result = self.decode(loopback)
        assert np.array_equal(result.bits, bits)
        assert np.max(np.abs(result.fo_cycles_per_sample)) <= 1e-9
        for pair in result.channel_estimates:
            for est in pair:
                assert np.max(np.abs(est.h_hat - h)) <= 1e-6
        assert not result.snr.valid  # noiseless capture saturates the probe
        assert result.snr.snr_db == np.inf

    def test_offset_loopback(self, loopback):
        fo = 0.005
        bits, h, result = self.decode(loopback, fo=fo)
        assert np.array_equal(result.bits, bits)
        assert np.max(np.abs(result.fo_cycles_per_sample - fo)) <= 1e-9
        for pair in result.channel_estimates:
            for est in pair:
                assert np.max(np.abs(est.h_hat - h)) <= 1e-6

    def test_unscaled_estimates_carry_symbol_scale(self, loopback):
        layout, tx_layout, c, bits, tx, h = loopback
        rx = channel.propagate_waveform(tx.samples.T, h)
        result = rxchain.decode_transmission(rx.T, layout, tx_layout, 2, "sm", c)
        est = result.channel_estimates[0][0].h_hat
        assert np.max(np.abs(est / tx.symbol_scale - h)) <= 1e-6
        assert result.symbol_scale == 1.0

    def test_noisy_decode_still_syncs(self, loopback):
        layout, tx_layout, c, bits, tx, h = loopback
        rng = np.random.default_rng(21)
        noise_var = (tx.symbol_scale * 10 ** (-30 / 20)) ** 2
        rx = channel.propagate_waveform(
            tx.samples.T, h, noise_var=noise_var, rng=rng
        )
        result = rxchain.decode_transmission(
            rx.T, layout, tx_layout, 2, "sm", c, symbol_scale=tx.symbol_scale
        )
        assert result.bits.size == bits.size
        assert result.snr.valid
        errors = int(np.count_nonzero(result.bits != bits))
        assert errors / bits.size < 0.01
