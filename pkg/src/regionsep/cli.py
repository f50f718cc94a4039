"""Command-line pipeline: scene synthesis, separation, evaluation, datasets.

Every command is a pure function of its inputs, config, and seed; reruns
produce checksum-identical output trees. All randomness is split from one
top-level seed, and --jobs only parallelizes across independent scenes or
mixtures with results merged in seed order.

Exit codes: 0 success (including discards), 2 config error, 3 I/O error,
4 internal invariant breach.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .audio import AudioFormatError, BinauralSignal, read_wav, write_wav
from .dataset import build_training_tuples
from .hrir import load_hrir_bank
from .itd_model import EmSettings
from .manifest import ManifestEntry, write_manifest
from .metrics import evaluate_regions
from .scenes import (
    RegionMixtureSet,
    SceneSpec,
    default_layout_r3,
    make_spherical_bank,
    random_scene,
    synth_scene,
)
from .separation import Discarded, Passthrough, Separated, SeparationConfig, separate
from .signals import make_source_pool
from .stft import StftConfig

log = logging.getLogger("regionsep")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INTERNAL = 4

DEFAULT_DELTA_TAU_MAX = 8.9e-4  # seconds; 1/(2*562 Hz)


class ConfigError(ValueError):
    pass


_CONFIG_KEYS = (
    "seed",
    "f_aliasing",
    "sigma_th",
    "delta_tau_min",
    "delta_tau_max",
    "alpha",
    "fft_size",
    "hop",
    "sample_rate",
    "energy_floor_db",
    "clean_ratio",
    "duration",
)

_DEFAULTS = {
    "seed": 0,
    "f_aliasing": 562.0,
    "sigma_th": 7e-5,
    "delta_tau_min": 6e-4,
    "delta_tau_max": DEFAULT_DELTA_TAU_MAX,
    "alpha": 5.0,
    "fft_size": 1024,
    "hop": 512,
    "sample_rate": 16000,
    "energy_floor_db": 30.0,
    "clean_ratio": 0.5,
    "duration": 4.0,
}


def _load_params(args) -> dict:
    """File values under CLI flags under built-in defaults."""
    params = dict(_DEFAULTS)
    if getattr(args, "config", None):
        try:
            file_values = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        unknown = set(file_values) - set(_CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        params.update(file_values)
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            params[key] = flag
    return params


def _separation_config(params: dict) -> SeparationConfig:
    try:
        return SeparationConfig(
            stft=StftConfig(
                fft_size=int(params["fft_size"]),
                hop=int(params["hop"]),
                sample_rate=int(params["sample_rate"]),
            ),
            f_aliasing=float(params["f_aliasing"]),
            sigma_th=float(params["sigma_th"]),
            delta_tau_min=float(params["delta_tau_min"]),
            alpha=float(params["alpha"]),
            energy_floor_db=float(params["energy_floor_db"]),
            em=EmSettings(seed=int(params["seed"])),
            seed=int(params["seed"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load_pool(args, params: dict) -> dict:
    """WAV directory if given, else a seeded synthetic band-noise pool."""
    if getattr(args, "pool", None):
        pool = {}
        for wav in sorted(Path(args.pool).glob("*.wav")):
            signal = read_wav(wav)
            if isinstance(signal, BinauralSignal):
                raise ConfigError(f"pool sources must be mono: {wav}")
            pool[wav.stem] = signal
        if not pool:
            raise ConfigError(f"no WAV files in pool directory {args.pool}")
        return pool
    return make_source_pool(
        seed=int(params["seed"]) ^ 0x5EED,
        count=args.pool_size,
        duration=float(params["duration"]),
        sample_rate=int(params["sample_rate"]),
    )


def _load_bank(args, params: dict):
    if getattr(args, "hrir_bank", None):
        return load_hrir_bank(args.hrir_bank)
    azimuths = np.arange(0.0, 360.0, 5.0)
    return make_spherical_bank(
        azimuths,
        delta_tau_max=float(params["delta_tau_max"]),
        sample_rate=int(params["sample_rate"]),
    )


def _write_scene(out_dir: Path, spec: SceneSpec, mixture_set: RegionMixtureSet):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "scene.json").write_text(spec.to_json() + "\n")
    write_wav(mixture_set.mixture, out_dir / "mixture.wav")
    for i, sig in enumerate(mixture_set.region_signals, start=1):
        write_wav(sig, out_dir / f"region_{i}.wav")


def _synth_one(job):
    """Worker: render one random scene. Returns (index, spec, mixture set)."""
    index, seed_seq, k_range, duration, pool, bank = job
    layout = default_layout_r3()
    scene_seed = int(seed_seq.generate_state(1)[0])
    spec = random_scene(
        k_range, layout, bank, sorted(pool), seed=scene_seed, duration=duration
    )
    return index, spec, synth_scene(spec, bank, layout, pool)


def cmd_synth(args) -> int:
    params = _load_params(args)
    _separation_config(params)  # validate shared numeric invariants early
    pool = _load_pool(args, params)
    bank = _load_bank(args, params)
    out = Path(args.out)

    root = np.random.SeedSequence(int(params["seed"]))
    jobs = [
        (i, child, (args.k_min, args.k_max), float(params["duration"]), pool, bank)
        for i, child in enumerate(root.spawn(args.num_scenes))
    ]
    for index, spec, mixture_set in _run_jobs(_synth_one, jobs, args.jobs):
        _write_scene(out / f"scene_{index:04d}", spec, mixture_set)
    log.info("wrote %d scenes to %s", args.num_scenes, out)
    return EXIT_OK


def _run_jobs(fn, jobs, n_workers):
    if n_workers <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, jobs))


def cmd_separate(args) -> int:
    params = _load_params(args)
    cfg = _separation_config(params)
    signal = read_wav(args.input)
    if not isinstance(signal, BinauralSignal):
        raise ConfigError("separate requires a stereo input file")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    source_id = Path(args.input).stem

    outcome = separate(signal, cfg)
    dtm = float(params["delta_tau_max"])
    entries = []
    if isinstance(outcome, Passthrough):
        from .scenes import region_of_itd

        write_wav(outcome.signal, out / "passthrough.wav")
        entries.append(
            ManifestEntry(
                path="passthrough.wav",
                itd=outcome.itd,
                region=region_of_itd(outcome.itd, dtm),
                outcome="passthrough",
                source_id=source_id,
            )
        )
    elif isinstance(outcome, Separated):
        from .scenes import region_of_itd

        for name, sig, itd in (
            ("source1.wav", outcome.source1, outcome.itd1),
            ("source2.wav", outcome.source2, outcome.itd2),
        ):
            write_wav(sig, out / name)
            entries.append(
                ManifestEntry(
                    path=name,
                    itd=itd,
                    region=region_of_itd(itd, dtm),
                    outcome="separated",
                    source_id=source_id,
                )
            )
        if args.diagnostics:
            np.savetxt(out / "mask1.txt", outcome.masks[0].astype(np.int8), fmt="%d")
            np.savetxt(out / "mask2.txt", outcome.masks[1].astype(np.int8), fmt="%d")
            (out / "alpha.txt").write_text(f"{outcome.final_alpha!r}\n")
    else:
        assert isinstance(outcome, Discarded)
        entries.append(
            ManifestEntry(
                path="",
                itd=None,
                region=None,
                outcome=f"discarded:{outcome.reason}",
                source_id=source_id,
            )
        )
    write_manifest(entries, out / "manifest.jsonl")
    return EXIT_OK


def _read_binaural(path: Path) -> BinauralSignal:
    signal = read_wav(path)
    if not isinstance(signal, BinauralSignal):
        raise AudioFormatError(f"{path} is not stereo")
    return signal


def cmd_eval(args) -> int:
    refs_root = Path(args.references)
    est_root = Path(args.estimates)
    lines = []
    for scene_dir in sorted(p for p in refs_root.iterdir() if p.is_dir()):
        mixture = _read_binaural(scene_dir / "mixture.wav")
        region_paths = sorted(scene_dir.glob("region_*.wav"))
        refs = []
        estimates = []
        active = []
        for path in region_paths:
            sig = _read_binaural(path)
            refs.append(sig)
            active.append(bool(np.any(sig.left.samples) or np.any(sig.right.samples)))
            estimates.append(_read_binaural(est_root / scene_dir.name / path.name))
        mixture_set = RegionMixtureSet(
            region_signals=tuple(refs), mixture=mixture, active=tuple(active)
        )
        report = evaluate_regions(mixture_set, estimates)
        record = {"scene": scene_dir.name, **report.to_record()}
        lines.append(json.dumps(record, sort_keys=True))
    Path(args.out).write_text("".join(line + "\n" for line in lines))
    log.info("evaluated %d scenes", len(lines))
    return EXIT_OK


def _dataset_worker(job):
    from .dataset import _separate_one_mixture, draw_mixture_params

    index, seed_seq, pool, bank, cfg, dt_min, dt_max = job
    rng = np.random.default_rng(seed_seq)
    id1, az1, id2, az2 = draw_mixture_params(
        rng, sorted(pool), bank.azimuths, dt_min, dt_max
    )
    return index, _separate_one_mixture(
        f"mix{index:05d}", id1, az1, id2, az2, pool, bank, cfg, dt_max
    )


def cmd_dataset(args) -> int:
    params = _load_params(args)
    cfg = _separation_config(params)
    pool = _load_pool(args, params)
    bank = _load_bank(args, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dt_min = float(params["delta_tau_min"])
    dt_max = float(params["delta_tau_max"])

    root = np.random.SeedSequence(int(params["seed"]))
    jobs = [
        (i, child, pool, bank, cfg, dt_min, dt_max)
        for i, child in enumerate(root.spawn(args.num))
    ]
    results = _run_jobs(_dataset_worker, jobs, args.jobs)

    from .dataset import DirtyBuildStats

    records = []
    stats = DirtyBuildStats()
    entries = []
    for index, (new_records, discard_reason) in results:
        stats.n_mixtures += 1
        if discard_reason is not None:
            stats.n_discarded += 1
            stats.discard_reasons[discard_reason] = (
                stats.discard_reasons.get(discard_reason, 0) + 1
            )
            entries.append(
                ManifestEntry(
                    path="",
                    itd=None,
                    region=None,
                    outcome=f"discarded:{discard_reason}",
                    source_id=f"mix{index:05d}",
                )
            )
            continue
        if len(new_records) == 1:
            stats.n_passthrough += 1
        else:
            stats.n_separated += 1
        for j, rec in enumerate(new_records):
            name = f"mix{index:05d}_{j}.wav"
            write_wav(rec.signal, out / name)
            entries.append(
                ManifestEntry(
                    path=name,
                    itd=rec.itd,
                    region=rec.region,
                    outcome=(
                        "passthrough"
                        if rec.provenance == "stage1_single"
                        else "separated"
                    ),
                    source_id=rec.origin_scene,
                )
            )
            records.append(rec)
    write_manifest(entries, out / "manifest.jsonl")
    (out / "stats.json").write_text(
        json.dumps(stats.to_record(), indent=2, sort_keys=True) + "\n"
    )

    if args.tuples > 0 and records:
        tuples = build_training_tuples(
            records,
            default_layout_r3(),
            (args.k_min, args.k_max),
            float(params["clean_ratio"]),
            args.tuples,
            seed=int(params["seed"]) ^ 0x70B1E5,
        )
        for t, tup in enumerate(tuples):
            tdir = out / f"tuple_{t:04d}"
            tdir.mkdir(exist_ok=True)
            write_wav(tup.mixture, tdir / "mixture.wav")
            for r, ref in enumerate(tup.references, start=1):
                write_wav(ref, tdir / f"region_{r}.wav")
            (tdir / "meta.json").write_text(
                json.dumps(
                    {"active": list(tup.active), "provenances": list(tup.provenances)},
                    sort_keys=True,
                )
                + "\n"
            )
    return EXIT_OK


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--f-aliasing", dest="f_aliasing", type=float)
    parser.add_argument("--sigma-th", dest="sigma_th", type=float)
    parser.add_argument("--delta-tau-min", dest="delta_tau_min", type=float)
    parser.add_argument("--delta-tau-max", dest="delta_tau_max", type=float)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--fft-size", dest="fft_size", type=int)
    parser.add_argument("--hop", type=int)
    parser.add_argument("--sample-rate", dest="sample_rate", type=int)
    parser.add_argument("--energy-floor-db", dest="energy_floor_db", type=float)
    parser.add_argument("--duration", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regionsep", description="Region-based binaural voice separation"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="render random binaural scenes")
    _add_config_flags(p_synth)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--num-scenes", type=int, default=10)
    p_synth.add_argument("--k-min", type=int, default=2)
    p_synth.add_argument("--k-max", type=int, default=5)
    p_synth.add_argument("--pool", help="directory of mono WAV sources")
    p_synth.add_argument("--pool-size", type=int, default=8)
    p_synth.add_argument("--hrir-bank", help="HRIR bank file")
    p_synth.add_argument("--jobs", type=int, default=1)
    p_synth.set_defaults(func=cmd_synth)

    p_sep = sub.add_parser("separate", help="run selective spatial separation")
    _add_config_flags(p_sep)
    p_sep.add_argument("input", help="stereo WAV file")
    p_sep.add_argument("--out", required=True)
    p_sep.add_argument("--diagnostics", action="store_true")
    p_sep.set_defaults(func=cmd_separate)

    p_eval = sub.add_parser("eval", help="score estimates against references")
    _add_config_flags(p_eval)
    p_eval.add_argument("--estimates", required=True)
    p_eval.add_argument("--references", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_data = sub.add_parser("dataset", help="build dirty sources and tuples")
    _add_config_flags(p_data)
    p_data.add_argument("--out", required=True)
    p_data.add_argument("--num", type=int, default=20)
    p_data.add_argument("--tuples", type=int, default=0)
    p_data.add_argument("--clean-ratio", dest="clean_ratio", type=float)
    p_data.add_argument("--k-min", type=int, default=2)
    p_data.add_argument("--k-max", type=int, default=5)
    p_data.add_argument("--pool", help="directory of mono WAV sources")
    p_data.add_argument("--pool-size", type=int, default=8)
    p_data.add_argument("--hrir-bank", help="HRIR bank file")
    p_data.add_argument("--jobs", type=int, default=1)
    p_data.set_defaults(func=cmd_dataset)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("REGION_SEP_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, AudioFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001 - surface as invariant breach
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
