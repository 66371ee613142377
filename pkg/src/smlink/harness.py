"""Monte Carlo experiment driver, configuration and persistence.

Experiments sweep an SNR grid at one of two fidelities:

* ``symbol`` -- vectors go straight through y = Hx + n with the channel
  redrawn every ``block_symbols`` vectors (one frame's worth), detected
  with perfect or pilot-estimated CSI;
* ``waveform`` -- the full transmit chain is built, propagated at sample
  level with optional carrier frequency offset, and decoded by the full
  receive chain; sync rejections are counted separately from bit errors.

Each (SNR point, trial) pair owns an independent RNG seeded from
(master_seed, round(1000*snr_db), trial), so results are reproducible,
common random numbers are shared across schemes, and trials could be
distributed without changing any number. Trials run until the error
target is met or the trial cap is reached. Records export to a fixed,
versioned CSV schema with deterministic formatting.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import channel as channel_mod
from . import modem, rxchain, txchain
from .errors import ConfigurationError, SyncRejection

__all__ = [
    "SimConfig",
    "BerRecord",
    "CSV_SCHEMA_VERSION",
    "CSV_COLUMNS",
    "run_simulation",
    "run_symbol_sim",
    "run_waveform_sim",
    "export_csv",
    "read_csv",
    "save_config",
    "load_config",
]

CSV_SCHEMA_VERSION = "1"
CSV_COLUMNS = (
    "schema_version",
    "scheme",
    "fidelity",
    "nt",
    "nr",
    "m",
    "k_factor_db",
    "pi_profile",
    "snr_db_target",
    "snr_db_estimated",
    "bits",
    "bit_errors",
    "aber",
    "rejected_vectors",
    "seed",
)

_SCHEMES = ("sm", "smx")
_FIDELITIES = ("symbol", "waveform")
_CSI_MODES = ("perfect", "pilot")


@dataclass(frozen=True)
class SimConfig:
    """One simulation campaign: link setup, channel model and budgets."""

    scheme: str
    nt: int
    nr: int
    modulation_order: int
    snr_grid_db: tuple
    k_factor_db: float = float("-inf")
    pi_profile: str = "none"
    fidelity: str = "symbol"
    csi_mode: str = "perfect"
    bits_per_trial: int = 100_000
    trials_per_snr: int = 1000
    target_bit_errors: int | None = 100
    master_seed: int = 0
    fo_cycles_per_sample: float = 0.0
    block_symbols: int = 1000
    snr_block_symbols: int = 50_000

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ConfigurationError(f"scheme must be one of {_SCHEMES}")
        if self.fidelity not in _FIDELITIES:
            raise ConfigurationError(f"fidelity must be one of {_FIDELITIES}")
        if self.csi_mode not in _CSI_MODES:
            raise ConfigurationError(f"csi_mode must be one of {_CSI_MODES}")
        if not self.snr_grid_db:
            raise ConfigurationError("snr_grid_db must be nonempty")
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        m = self.bits_per_vector
        if self.bits_per_trial < m or self.bits_per_trial % m:
            raise ConfigurationError(
                f"bits_per_trial must be a positive multiple of m={m}"
            )
        if self.trials_per_snr < 1:
            raise ConfigurationError("trials_per_snr must be >= 1")
        if self.target_bit_errors is not None and self.target_bit_errors < 1:
            raise ConfigurationError("target_bit_errors must be >= 1 or null")
        if self.block_symbols < 1:
            raise ConfigurationError("block_symbols must be >= 1")
        if self.fidelity == "waveform":
            per_frame = m * self.block_symbols
            if self.bits_per_trial % per_frame:
                raise ConfigurationError(
                    "waveform fidelity needs bits_per_trial divisible by "
                    f"m*block_symbols = {per_frame}"
                )

    @property
    def bits_per_vector(self):
        return modem.bits_per_vector(self.scheme, self.nt, self.modulation_order)

    def fading(self):
        return channel_mod.FadingModel(self.k_factor_db)

    def imbalance(self):
        return channel_mod.imbalance_profile(self.pi_profile, self.nr, self.nt)


@dataclass
class BerRecord:
    """Aggregated result of one SNR point."""

    scheme: str
    fidelity: str
    nt: int
    nr: int
    m: int
    k_factor_db: float
    pi_profile: str
    snr_db_target: float
    snr_db_estimated: float | None
    bits: int
    bit_errors: int
    rejected_vectors: int
    seed: int
    trial_errors: list = field(default_factory=list)
    trial_bits: list = field(default_factory=list)

    @property
    def aber(self):
        return self.bit_errors / self.bits if self.bits else float("nan")

    def aber_standard_error(self):
        """Monte Carlo standard error from the per-trial spread."""
        rates = np.asarray(self.trial_errors, dtype=np.float64) / np.asarray(
            self.trial_bits, dtype=np.float64
        )
        if rates.size < 2:
            return float("inf")
        return float(np.std(rates, ddof=1) / np.sqrt(rates.size))


def _trial_rng(master_seed, snr_db, trial):
    key = (int(master_seed), int(round(1000.0 * float(snr_db))), int(trial))
    return np.random.default_rng(np.random.SeedSequence(key))


def _popcount_errors(sent_idx, detected_idx):
    return int(np.bitwise_count(np.bitwise_xor(sent_idx, detected_idx)).sum())


def run_simulation(config):
    """Dispatch on fidelity; returns one BerRecord per SNR point."""
    if config.fidelity == "symbol":
        return run_symbol_sim(config)
    return run_waveform_sim(config)


def _symbol_trial(config, constellation, candidates, h_draws, rng, noise_var):
    """One symbol-fidelity trial; returns (bit_errors,)."""
    m = config.bits_per_vector
    n_vec = config.bits_per_trial // m
    bits = rng.integers(0, 2, size=config.bits_per_trial, dtype=np.uint8)
    sent_idx = modem.bits_to_indices(bits, m)
    vectors = candidates[sent_idx]
    errors = 0
    n_theta = max(config.nt, 10)
    pilots = (
        np.tile(txchain.pilot_matrix(config.nt, n_theta), (10, 1))
        if config.csi_mode == "pilot"
        else None
    )
    for start in range(0, n_vec, config.block_symbols):
        stop = min(start + config.block_symbols, n_vec)
        h = channel_mod.draw_channel(
            config.nr, config.nt, h_draws["fading"], h_draws["imbalance"], rng
        )
        y = channel_mod.propagate_symbols(vectors[start:stop], h, noise_var, rng)
        if config.csi_mode == "perfect":
            h_halves = (h, h)
        else:
            ests = []
            for _ in range(2):
                y_p = channel_mod.propagate_symbols(pilots, h, noise_var, rng)
                ests.append((y_p.T @ pilots.conj()) / pilots.shape[0])
            h_halves = tuple(ests)
        half = (stop - start) // 2
        for sl, h_det in ((slice(None, half), h_halves[0]), (slice(half, None), h_halves[1])):
            block = y[sl]
            if block.shape[0] == 0:
                continue
            if config.scheme == "sm":
                det = modem.sm_ml_detect_batch(block, h_det, constellation)
            else:
                det = modem.ml_detect_batch(block, h_det, candidates)
            errors += _popcount_errors(sent_idx[start:stop][sl], det)
    return errors


def run_symbol_sim(config):
    """Symbol-fidelity Monte Carlo sweep."""
    if config.fidelity != "symbol":
        raise ConfigurationError("config.fidelity must be 'symbol'")
    constellation = modem.build_constellation(config.modulation_order)
    candidates = modem.candidate_vectors(config.scheme, config.nt, constellation)
    h_draws = {"fading": config.fading(), "imbalance": config.imbalance()}
    records = []
    for snr_db in config.snr_grid_db:
        noise_var = 10.0 ** (-snr_db / 10.0)
        record = _new_record(config, snr_db)
        for trial in range(config.trials_per_snr):
            rng = _trial_rng(config.master_seed, snr_db, trial)
            errs = _symbol_trial(config, constellation, candidates, h_draws, rng, noise_var)
            record.bit_errors += errs
            record.bits += config.bits_per_trial
            record.trial_errors.append(errs)
            record.trial_bits.append(config.bits_per_trial)
            if (
                config.target_bit_errors is not None
                and record.bit_errors >= config.target_bit_errors
            ):
                break
        records.append(record)
    return records


def _waveform_trial(config, constellation, rng, snr_db):
    """One waveform-fidelity trial.

    Returns (bit_errors, bits_counted, estimated_snr_linear or None,
    rejected_flag).
    """
    m = config.bits_per_vector
    frame_layout = txchain.FrameLayout(data_symbols_per_frame=config.block_symbols)
    n_frames = config.bits_per_trial // (m * config.block_symbols)
    tx_layout = txchain.TransmissionLayout(
        n_frames=n_frames, snr_block_symbols=config.snr_block_symbols
    )
    bits = rng.integers(0, 2, size=config.bits_per_trial, dtype=np.uint8)
    bits_per_frame = m * config.block_symbols
    frames = []
    for f in range(n_frames):
        chunk = bits[f * bits_per_frame : (f + 1) * bits_per_frame]
        if config.scheme == "sm":
            _, vectors = modem.sm_modulate(chunk, config.nt, constellation)
        else:
            vectors = modem.smx_modulate(chunk, config.nt, constellation)
        frames.append(txchain.build_frame(vectors, frame_layout, config.nt))
    tx = txchain.assemble_transmission(frames, tx_layout)

    h = channel_mod.draw_channel(
        config.nr, config.nt, config.fading(), config.imbalance(), rng
    )
    noise_var = tx.symbol_scale**2 * 10.0 ** (-snr_db / 10.0)
    rx = channel_mod.propagate_waveform(
        tx.samples.T, h, config.fo_cycles_per_sample, noise_var, rng
    ).T
    try:
        result = rxchain.decode_transmission(
            rx, frame_layout, tx_layout, config.nt, config.scheme,
            constellation, symbol_scale=tx.symbol_scale,
        )
    except SyncRejection:
        return 0, 0, None, True
    errors = int(np.count_nonzero(result.bits != bits))
    est_linear = None
    if result.snr.valid and np.isfinite(result.snr.snr_db):
        # The sounding section runs at the data peak; refer the estimate
        # back to the unit-energy symbol scale for comparability.
        est_linear = 10.0 ** (result.snr.snr_db / 10.0) / (tx.x_max / tx.symbol_scale) ** 2
    return errors, config.bits_per_trial, est_linear, False


def run_waveform_sim(config):
    """Waveform-fidelity Monte Carlo sweep (full Tx/Rx chain per trial)."""
    if config.fidelity != "waveform":
        raise ConfigurationError("config.fidelity must be 'waveform'")
    constellation = modem.build_constellation(config.modulation_order)
    records = []
    for snr_db in config.snr_grid_db:
        record = _new_record(config, snr_db)
        est_values = []
        for trial in range(config.trials_per_snr):
            rng = _trial_rng(config.master_seed, snr_db, trial)
            errs, bits, est, rejected = _waveform_trial(config, constellation, rng, snr_db)
            if rejected:
                record.rejected_vectors += 1
                continue
            record.bit_errors += errs
            record.bits += bits
            record.trial_errors.append(errs)
            record.trial_bits.append(bits)
            if est is not None:
                est_values.append(est)
            if (
                config.target_bit_errors is not None
                and record.bit_errors >= config.target_bit_errors
            ):
                break
        if est_values:
            record.snr_db_estimated = float(10.0 * np.log10(np.mean(est_values)))
        records.append(record)
    return records


def _new_record(config, snr_db):
    return BerRecord(
        scheme=config.scheme,
        fidelity=config.fidelity,
        nt=config.nt,
        nr=config.nr,
        m=config.bits_per_vector,
        k_factor_db=config.k_factor_db,
        pi_profile=config.pi_profile,
        snr_db_target=float(snr_db),
        snr_db_estimated=None,
        bits=0,
        bit_errors=0,
        rejected_vectors=0,
        seed=config.master_seed,
    )


def _format_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.10g}"
    return str(value)


def export_csv(records, path):
    """Write records to the fixed, versioned CSV schema."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            row = {
                "schema_version": CSV_SCHEMA_VERSION,
                "scheme": r.scheme,
                "fidelity": r.fidelity,
                "nt": r.nt,
                "nr": r.nr,
                "m": r.m,
                "k_factor_db": r.k_factor_db,
                "pi_profile": r.pi_profile,
                "snr_db_target": r.snr_db_target,
                "snr_db_estimated": r.snr_db_estimated,
                "bits": r.bits,
                "bit_errors": r.bit_errors,
                "aber": r.aber,
                "rejected_vectors": r.rejected_vectors,
                "seed": r.seed,
            }
            writer.writerow([_format_cell(row[c]) for c in CSV_COLUMNS])
    return path


def read_csv(path):
    """Read an exported CSV back into a list of per-row dicts."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(CSV_COLUMNS):
            raise ConfigurationError(
                f"unexpected CSV columns {reader.fieldnames}, want {list(CSV_COLUMNS)}"
            )
        rows = []
        for raw in reader:
            if raw["schema_version"] != CSV_SCHEMA_VERSION:
                raise ConfigurationError(
                    f"unsupported CSV schema version {raw['schema_version']!r}"
                )
            row = dict(raw)
            for key in ("nt", "nr", "m", "bits", "bit_errors", "rejected_vectors", "seed"):
                row[key] = int(row[key])
            for key in ("k_factor_db", "snr_db_target", "aber"):
                row[key] = float(row[key])
            row["snr_db_estimated"] = (
                float(raw["snr_db_estimated"]) if raw["snr_db_estimated"] else None
            )
            rows.append(row)
        return rows


def save_config(config, path):
    """Serialize a SimConfig to JSON (Rayleigh stored as null K factor)."""
    data = asdict(config)
    data["snr_grid_db"] = list(config.snr_grid_db)
    if math.isinf(data["k_factor_db"]) and data["k_factor_db"] < 0:
        data["k_factor_db"] = None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True))
    return path


def load_config(path):
    """Parse a SimConfig from JSON with named schema errors."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")
    required = {"scheme", "nt", "nr", "modulation_order", "snr_grid_db"}
    missing = sorted(required - data.keys())
    if missing:
        raise ConfigurationError(f"config missing required field(s): {', '.join(missing)}")
    valid = {f for f in SimConfig.__dataclass_fields__}
    unknown = sorted(data.keys() - valid)
    if unknown:
        raise ConfigurationError(f"config has unknown field(s): {', '.join(unknown)}")
    if data.get("k_factor_db") is None:
        data["k_factor_db"] = float("-inf")
    data["snr_grid_db"] = tuple(data["snr_grid_db"])
    return SimConfig(**data)
