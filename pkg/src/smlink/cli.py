"""Command-line interface.

Subcommands:

* ``simulate``    -- run a Monte Carlo sweep from a JSON config, write CSV.
* ``bound``       -- evaluate the analytical ABER union bound, write CSV.
* ``complexity``  -- compare ML receiver multiplication counts.
* ``fit-channel`` -- ML Rice fit of measured amplitude samples.
* ``encode``      -- build a transmission from a bit file, write I16 + sidecar.
* ``decode``      -- recover bits from captured I16 streams, write a report.
* ``plotdata``    -- emit ready-to-plot curve bundles for the four standard
                     figures (fig10..fig13).
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, harness, modem, rxchain, txchain
from .channel import FadingModel, imbalance_profile
from .errors import ConfigurationError, SmlinkError

BOUND_COLUMNS = ("snr_db", "aber_bound", "n_h", "scheme", "nt", "nr", "m")


def _fmt(value):
    return f"{value:.10g}" if isinstance(value, float) else str(value)


def _cmd_simulate(args):
    config = harness.load_config(args.config)
    records = harness.run_simulation(config)
    path = harness.export_csv(records, args.out)
    for r in records:
        print(f"snr={r.snr_db_target:g} dB  bits={r.bits}  errors={r.bit_errors}  "
              f"aber={r.aber:.3e}")
    print(f"wrote {path}")


def _load_bound_config(path):
    data = json.loads(Path(path).read_text())
    required = {"scheme", "nt", "nr", "modulation_order", "snr_grid_db"}
    missing = sorted(required - data.keys())
    if missing:
        raise ConfigurationError(f"bound config missing: {', '.join(missing)}")
    k_db = data.get("k_factor_db")
    fading = FadingModel(float("-inf") if k_db is None else float(k_db))
    imbalance = imbalance_profile(data.get("pi_profile", "none"), data["nr"], data["nt"])
    cfg = analysis.BoundConfig(
        scheme=data["scheme"],
        nt=data["nt"],
        nr=data["nr"],
        modulation_order=data["modulation_order"],
        fading=fading,
        imbalance=imbalance,
        snr_grid_db=tuple(data["snr_grid_db"]),
        n_channels=int(data.get("n_channels", 10_000)),
    )
    return cfg, int(data.get("seed", 0))


def _write_bound_csv(path, cfg, values):
    m = modem.bits_per_vector(cfg.scheme, cfg.nt, cfg.modulation_order)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BOUND_COLUMNS)
        for snr, val in zip(cfg.snr_grid_db, values):
            writer.writerow([_fmt(float(snr)), _fmt(float(val)), cfg.n_channels,
                             cfg.scheme, cfg.nt, cfg.nr, m])


def _cmd_bound(args):
    cfg, seed = _load_bound_config(args.config)
    values = analysis.union_bound_aber(cfg, rng=np.random.default_rng(seed))
    _write_bound_csv(args.out, cfg, values)
    for snr, val in zip(cfg.snr_grid_db, values):
        print(f"snr={snr:g} dB  bound={val:.4e}")
    print(f"wrote {args.out}")


def _cmd_complexity(args):
    rows = [modem.complexity_report(nt, args.nr, args.m) for nt in args.nt]
    print("nt  nr  m  sm_mults  smx_mults  reduction_percent")
    for rep in rows:
        pct = rep.relative_reduction_percent
        print(f"{rep.nt}  {rep.nr}  {rep.bits_per_symbol}  "
              f"{rep.sm_real_multiplications}  {rep.smx_real_multiplications}  "
              f"{float(pct):.4f} (= {pct})")
    if args.out:
        with Path(args.out).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["nt", "nr", "m", "sm_mults", "smx_mults",
                             "reduction_percent"])
            for rep in rows:
                writer.writerow([
                    rep.nt, rep.nr, rep.bits_per_symbol,
                    rep.sm_real_multiplications, rep.smx_real_multiplications,
                    _fmt(float(rep.relative_reduction_percent)),
                ])
        print(f"wrote {args.out}")


def _cmd_fit_channel(args):
    samples = np.loadtxt(args.samples).reshape(-1)
    fit = analysis.fit_rician(samples)
    payload = {
        "k_factor_db": fit.k_factor_db,
        "mean_amplitude": fit.mean_amplitude,
        "nu": fit.nu,
        "sigma": fit.sigma,
        "gof_p_value": fit.gof_p_value,
        "iterations": fit.iterations,
        "n_samples": int(samples.size),
    }
    Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True))
    print(f"K = {fit.k_factor_db:.2f} dB  (GOF p = {fit.gof_p_value:.3f})")
    print(f"wrote {args.out}")


def _load_chain_config(path):
    data = json.loads(Path(path).read_text())
    for key in ("scheme", "nt", "modulation_order"):
        if key not in data:
            raise ConfigurationError(f"chain config missing field {key!r}")
    frame_layout = txchain.FrameLayout(**data.get("frame_layout", {}))
    tx_layout = txchain.TransmissionLayout(**data.get("transmission_layout", {}))
    return data["scheme"], int(data["nt"]), int(data["modulation_order"]), \
        frame_layout, tx_layout


def _read_bit_file(path, n_bits):
    packed = np.fromfile(path, dtype=np.uint8)
    bits = np.unpackbits(packed)
    if bits.size < n_bits:
        raise ConfigurationError(
            f"bit file holds {bits.size} bits, transmission needs {n_bits}"
        )
    return bits[:n_bits]


def _cmd_encode(args):
    scheme, nt, order, frame_layout, tx_layout = _load_chain_config(args.config)
    constellation = modem.build_constellation(order)
    m = modem.bits_per_vector(scheme, nt, order)
    bits_per_frame = m * frame_layout.data_symbols_per_frame
    n_bits = bits_per_frame * tx_layout.n_frames
    bits = _read_bit_file(args.bits, n_bits)
    frames = []
    for f in range(tx_layout.n_frames):
        chunk = bits[f * bits_per_frame : (f + 1) * bits_per_frame]
        if scheme == "sm":
            _, vectors = modem.sm_modulate(chunk, nt, constellation)
        else:
            vectors = modem.smx_modulate(chunk, nt, constellation)
        frames.append(txchain.build_frame(vectors, frame_layout, nt))
    tx = txchain.assemble_transmission(frames, tx_layout)
    sidecar = txchain.write_waveform(
        args.out, tx,
        extra_meta={"scheme": scheme, "modulation_order": order, "n_bits": n_bits},
    )
    print(f"encoded {n_bits} bits into {tx.nt} stream(s); sidecar: {sidecar}")


def _cmd_decode(args):
    meta = json.loads(Path(args.meta).read_text())
    for key in ("scheme", "modulation_order"):
        if key not in meta:
            raise ConfigurationError(f"sidecar missing field {key!r}")
    frame_layout = txchain.FrameLayout(**meta["frame_layout"])
    tx_layout = txchain.TransmissionLayout(**meta["transmission_layout"])
    constellation = modem.build_constellation(meta["modulation_order"])
    streams = np.stack([
        txchain.dequantize_i16(np.fromfile(p, dtype="<i2")) for p in args.capture
    ])
    result = rxchain.decode_transmission(
        streams, frame_layout, tx_layout, meta["nt"], meta["scheme"],
        constellation, symbol_scale=meta.get("symbol_scale"),
    )
    np.packbits(result.bits).tofile(args.out)
    report = {
        "snr_db": result.snr.snr_db,
        "snr_valid": result.snr.valid,
        "fo_cycles_per_sample": result.fo_cycles_per_sample.tolist(),
        "n_bits": int(result.bits.size),
        "sync_tx_start": int(result.sync.tx_start_index),
        "channel_estimates": [
            {e.which_half: [[c.real, c.imag] for c in e.h_hat.reshape(-1)] for e in pair}
            for pair in result.channel_estimates
        ],
    }
    if args.reference_bits:
        ref = _read_bit_file(args.reference_bits, result.bits.size)
        errors = int(np.count_nonzero(ref != result.bits))
        report["bit_errors"] = errors
        report["ber"] = errors / result.bits.size if result.bits.size else None
    Path(args.report).write_text(json.dumps(report, indent=2))
    print(f"decoded {result.bits.size} bits -> {args.out}; report: {args.report}")


_FIGURES = {
    "fig13": {
        "description": "SM vs SMX, 2x2 BPSK, Rician K=33 dB, no imbalance",
        "curves": [
            ("sm", dict(scheme="sm", nt=2, nr=2, modulation_order=2,
                        k_factor_db=33.0, pi_profile="none")),
            ("smx", dict(scheme="smx", nt=2, nr=2, modulation_order=2,
                         k_factor_db=33.0, pi_profile="none")),
        ],
        "grid": tuple(range(34, 50, 2)),
        "bound": True,
    },
    "fig10": {
        "description": "SM 2x2 BPSK, Rician K=33 dB, first imbalance profile",
        "curves": [
            ("sm_pi1", dict(scheme="sm", nt=2, nr=2, modulation_order=2,
                            k_factor_db=33.0, pi_profile="rx_config_1")),
        ],
        "grid": tuple(range(16, 38, 2)),
        "bound": True,
    },
    "fig11": {
        "description": "SM 2x2 BPSK, Rician K=33 dB, both imbalance profiles vs none",
        "curves": [
            ("sm_pi1", dict(scheme="sm", nt=2, nr=2, modulation_order=2,
                            k_factor_db=33.0, pi_profile="rx_config_1")),
            ("sm_pi2", dict(scheme="sm", nt=2, nr=2, modulation_order=2,
                            k_factor_db=33.0, pi_profile="rx_config_2")),
            ("sm_nopi", dict(scheme="sm", nt=2, nr=2, modulation_order=2,
                             k_factor_db=33.0, pi_profile="none")),
        ],
        "grid": tuple(range(16, 38, 2)),
        "bound": True,
    },
    "fig12": {
        "description": "8 bit/s/Hz over Rayleigh, nr=4: SM(64,4) vs SMX(8,2) vs SMX(4,4)",
        "curves": [
            ("sm_nt64_m4", dict(scheme="sm", nt=64, nr=4, modulation_order=4)),
            ("smx_nt8_m2", dict(scheme="smx", nt=8, nr=4, modulation_order=2)),
            ("smx_nt4_m4", dict(scheme="smx", nt=4, nr=4, modulation_order=4)),
        ],
        "grid": tuple(range(6, 22, 2)),
        "bound": False,
    },
}


def _cmd_plotdata(args):
    recipe = _FIGURES[args.figure]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trials = 2 if args.quick else args.trials
    n_channels = 500 if args.quick else 5000
    rows = []
    for label, params in recipe["curves"]:
        config = harness.SimConfig(
            snr_grid_db=recipe["grid"], fidelity="symbol", csi_mode="perfect",
            bits_per_trial=100_000, trials_per_snr=trials,
            target_bit_errors=100, master_seed=args.seed, **params,
        )
        for record in harness.run_symbol_sim(config):
            rows.append([args.figure, label, "sim",
                         _fmt(record.snr_db_target), _fmt(record.aber),
                         record.bits, record.bit_errors])
        if recipe["bound"]:
            bound_cfg = analysis.BoundConfig(
                scheme=config.scheme, nt=config.nt, nr=config.nr,
                modulation_order=config.modulation_order,
                fading=config.fading(), imbalance=config.imbalance(),
                snr_grid_db=recipe["grid"], n_channels=n_channels,
            )
            values = analysis.union_bound_aber(
                bound_cfg, rng=np.random.default_rng(args.seed)
            )
            for snr, val in zip(recipe["grid"], values):
                # Reporting layer clips the bound at the 0.5 ceiling.
                rows.append([args.figure, label, "bound",
                             _fmt(float(snr)), _fmt(min(float(val), 0.5)), "", ""])
        print(f"{args.figure}: finished curve {label}", flush=True)
    out = out_dir / f"{args.figure}.csv"
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["figure", "curve", "kind", "snr_db", "aber",
                         "bits", "bit_errors"])
        writer.writerows(rows)
    print(f"wrote {out}  ({recipe['description']})")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="smlink",
        description="Link-level simulator and analysis toolkit for spatial "
                    "modulation and spatial multiplexing MIMO",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a Monte Carlo sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("bound", help="evaluate the analytical ABER union bound")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("complexity", help="ML receiver complexity comparison")
    p.add_argument("--nt", type=int, nargs="+", required=True)
    p.add_argument("--nr", type=int, default=2)
    p.add_argument("--m", type=int, default=4, help="bits per transmit vector")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_complexity)

    p = sub.add_parser("fit-channel", help="ML Rice fit of amplitude samples")
    p.add_argument("--samples", required=True,
                   help="text file, one amplitude per line")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit_channel)

    p = sub.add_parser("encode", help="build a transmission from a bit file")
    p.add_argument("--config", required=True)
    p.add_argument("--bits", required=True, help="packed bits (8 per byte)")
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="recover bits from captured I16 streams")
    p.add_argument("--capture", required=True, nargs="+",
                   help="captured I16 file(s), one per receive antenna")
    p.add_argument("--meta", required=True, help="transmission sidecar JSON")
    p.add_argument("--out", required=True, help="output packed-bit file")
    p.add_argument("--report", required=True, help="output report JSON")
    p.add_argument("--reference-bits", help="packed reference bits for BER")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("plotdata", help="emit curve bundles for the standard figures")
    p.add_argument("--figure", required=True, choices=sorted(_FIGURES))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--quick", action="store_true",
                   help="reduced bit and channel-draw budgets")
    p.add_argument("--trials", type=int, default=200,
                   help="trial cap per SNR point (default 200)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_plotdata)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except SmlinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
