"""Command-line interface: ``n2nseismic <command> ...``.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical
divergence during training.
"""

from __future__ import annotations

import argparse
import logging
import sys
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from .clip import ClipSchedule, clip_denoise, default_schedule
from .config import RunConfig, load_config
from .errors import ConfigError, DivergenceError, N2NSeismicError
from .fileio import (load_checkpoint, load_image_corpus, load_seismic, render_png,
                     save_checkpoint, write_eval_csv, write_grid, write_phase_csv,
                     write_training_log)
from .fx import fx_decon
from .grid import normalize, stats
from .metrics import evaluate, phase_spectrum, time_sample_interval
from .nn.model import DenoiserModel
from .nn.train import denoise_image, train
from .synthgen import NoiseSpec, add_noise, make_wedge, procedural_textures

log = logging.getLogger("n2nseismic")

EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_bands(text: str) -> tuple[tuple[float, float], ...]:
    bands = []
    for part in text.split(","):
        try:
            lo, hi = part.split("-")
            bands.append((float(lo), float(hi)))
        except ValueError:
            raise UsageError(f"bands look like '0-10,10-20', got {text!r}") from None
    return tuple(bands)


def cmd_wedge_gen(args, cfg: RunConfig):
    section = make_wedge(cfg.wedge)
    write_grid(args.out, section)
    s = stats(section)
    print(f"wrote {args.out}: {section.n_samples} samples x {section.n_traces} traces")
    print(f"max_abs={s.max_abs:.6g} mean={s.mean:.6g} variance={s.variance:.6g}")


def cmd_corrupt(args, cfg: RunConfig):
    section = load_seismic(args.input)
    base = cfg.noise
    spec = NoiseSpec(
        mean=base.mean if args.mean is None else args.mean,
        sigma=base.sigma if args.sigma is None else args.sigma,
        seed=base.seed if args.seed is None else args.seed,
        region_start_row=base.region_start_row if args.from_row is None else args.from_row,
    )
    out = add_noise(section, spec)
    if args.normalize_after:
        data, scale = normalize(out.data)
        out = out.with_data(data, f"normalize(scale={scale!r})")
    write_grid(args.out, out)
    print(f"wrote {args.out}: {spec.describe()}")


def _training_corpus(args, cfg: RunConfig):
    if args.corpus_dir:
        return load_image_corpus(args.corpus_dir), f"corpus_dir={Path(args.corpus_dir).name}"
    t = cfg.training
    corpus = procedural_textures(t.corpus_size, t.image_size, seed=t.corpus_seed,
                                 saturated_fraction=t.saturated_fraction)
    return corpus, (f"procedural(count={t.corpus_size}, size={t.image_size}, seed={t.corpus_seed}, "
                    f"saturated_fraction={t.saturated_fraction!r})")


def cmd_train(args, cfg: RunConfig):
    corpus, corpus_desc = _training_corpus(args, cfg)
    if args.resume:
        model, header = load_checkpoint(args.resume)
        lineage = header.get("provenance", "")
        resumed = f", resumed_from={Path(args.resume).name}@epoch{model.epoch}"
    else:
        model, lineage, resumed = DenoiserModel.create(cfg.model), "", ""
    out = Path(args.out_checkpoint)
    log_path = Path(args.log_csv) if args.log_csv else out.with_name(out.name + ".log.csv")
    stage = f"train({corpus_desc}, seed={cfg.model.seed}{resumed})"
    provenance = f"{lineage}\n{stage}" if lineage else stage

    def on_epoch(rec):
        print(f"epoch {rec.epoch}: train_loss={rec.train_loss:.6g} val_mse={rec.val_mse:.6g}", flush=True)

    try:
        best, run_log = train(model, corpus, cfg.model, progress=on_epoch)
    except DivergenceError as exc:
        partial = out.with_name(out.name + ".diverged")
        if exc.model is not None:
            save_checkpoint(partial, exc.model, provenance + f"\ndiverged(step={exc.step})")
        raise
    # the newest state is what --resume continues from; the best snapshot is what inference uses
    save_checkpoint(out, best, provenance, extra={
        "termination_reason": run_log.termination_reason,
        "best_epoch": run_log.best_epoch,
        "identity_val_mse": run_log.identity_val_mse,
    })
    if model.epoch != best.epoch:
        save_checkpoint(out.with_name(out.name + ".last"), model, provenance)
    write_training_log(log_path, run_log, wall_time=args.wall_time)
    print(f"wrote {out} ({run_log.termination_reason}, best epoch {run_log.best_epoch}, "
          f"val_mse={run_log.best_val_mse:.6g}, identity val_mse={run_log.identity_val_mse:.6g})")


def cmd_denoise(args, cfg: RunConfig):
    section = load_seismic(args.input)
    if args.identity:
        model = DenoiserModel.zero_residual(cfg.model)
        model_desc = "identity"
    else:
        if not args.checkpoint:
            raise UsageError("denoise needs --checkpoint (or --identity)")
        model, header = load_checkpoint(args.checkpoint)
        crc = zlib.crc32(Path(args.checkpoint).read_bytes())
        upstream = header.get("provenance", "").replace("\n", " -> ")
        model_desc = f"{Path(args.checkpoint).name}[crc32={crc:08x}; {upstream}]"

    def denoiser(x):
        return denoise_image(model, x)

    if args.mode == "n2n-image":
        x, scale = normalize(section.data)
        out = section.with_data(denoiser(x) * scale,
                                f"denoise(mode=n2n-image, scale={scale!r}, model={model_desc})")
    else:
        if args.schedule:
            schedule = ClipSchedule(_parse_floats(args.schedule))
        elif args.t is not None:
            schedule = default_schedule(section, args.t)
        elif cfg.schedule.alphas is not None:
            schedule = ClipSchedule(cfg.schedule.alphas)
        else:
            schedule = default_schedule(section, cfg.schedule.t)
        result = clip_denoise(section, schedule, denoiser)
        last = result.provenance.rsplit("\n", 1)[-1]
        out = section.with_data(result.data, f"denoise(mode=n2n-seismic, model={model_desc}) {last}")
    write_grid(args.out, out)
    print(f"wrote {args.out}")


def cmd_fxdecon(args, cfg: RunConfig):
    section = load_seismic(args.input)
    out = fx_decon(section, cfg.fx)
    write_grid(args.out, out)
    print(f"wrote {args.out}")


def cmd_eval(args, cfg: RunConfig):
    clean = load_seismic(args.clean)
    bands = _parse_bands(args.bands) if args.bands else cfg.metrics.bands
    velocity = args.velocity if args.velocity is not None else cfg.metrics.velocity
    reports = []
    for path in args.test:
        test = load_seismic(path)
        rep = evaluate(clean, test, dt_s=args.dt, bands=bands, label=Path(path).name, velocity=velocity)
        reports.append(rep)
        snr_txt = "inf" if np.isinf(rep.snr_db) else f"{rep.snr_db:.4f}"
        print(f"{rep.label}: mse={rep.mse:.6g} snr_db={snr_txt} corrcoef={rep.corrcoef:.4f}")
    if args.out_csv:
        write_eval_csv(args.out_csv, reports)
        print(f"wrote {args.out_csv}")
    if args.phase_csv:
        dt = time_sample_interval(clean, args.dt, velocity)
        f_max = max(hi for _, hi in bands)
        freqs, curve = phase_spectrum(clean, dt, f_max)
        curves = {"clean": curve}
        for i, path in enumerate(args.test):
            label = Path(path).name
            if label in curves:
                label = f"{label}#{i + 1}"
            curves[label] = phase_spectrum(load_seismic(path), dt, f_max)[1]
        write_phase_csv(args.phase_csv, freqs, curves)
        print(f"wrote {args.phase_csv}")


def cmd_render(args, cfg: RunConfig):
    section = load_seismic(args.input)
    render_png(section, args.out_png, args.clip_percentile, args.cmap)
    print(f"wrote {args.out_png}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="n2nseismic", description="Seismic random-noise attenuation toolkit.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", help="TOML run configuration (default: $N2NSEISMIC_CONFIG)")
        sp.set_defaults(func=func)
        return sp

    sp = add("wedge-gen", cmd_wedge_gen, "write the clean synthetic wedge model")
    sp.add_argument("--out", required=True)

    sp = add("corrupt", cmd_corrupt, "add seeded Gaussian noise")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--mean", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--from-row", type=int, help="first sample row to corrupt")
    sp.add_argument("--normalize-after", action="store_true",
                    help="rescale to [-1, 1] after adding noise")

    sp = add("train", cmd_train, "train the denoiser on Noise2Noise pairs")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--corpus-dir")
    src.add_argument("--procedural", action="store_true", help="use built-in procedural textures")
    sp.add_argument("--out-checkpoint", required=True)
    sp.add_argument("--log-csv")
    sp.add_argument("--resume", help="checkpoint to continue training from")
    sp.add_argument("--wall-time", action="store_true",
                    help="add per-epoch wall time to the log CSV (makes it run-dependent)")

    sp = add("denoise", cmd_denoise, "denoise a section")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--checkpoint")
    sp.add_argument("--identity", action="store_true", help="debug: use an identity model")
    sp.add_argument("--t", type=int, help="number of evenly spaced clip thresholds")
    sp.add_argument("--schedule", help="explicit thresholds, e.g. '0.5,1.0'")
    sp.add_argument("--mode", choices=("n2n-seismic", "n2n-image"), default="n2n-seismic")

    sp = add("fxdecon", cmd_fxdecon, "f-x deconvolution baseline")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)

    sp = add("eval", cmd_eval, "compare sections against a clean reference")
    sp.add_argument("--clean", required=True)
    sp.add_argument("--test", required=True, nargs="+")
    sp.add_argument("--dt", type=float, help="time sample interval override (s)")
    sp.add_argument("--velocity", type=float, help="velocity (m/s) for depth sections")
    sp.add_argument("--bands", help="phase bands in Hz, e.g. '0-10,10-20'")
    sp.add_argument("--out-csv")
    sp.add_argument("--phase-csv", help="also write the trace-averaged phase curves")

    sp = add("render", cmd_render, "render a section to PNG")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out-png", required=True)
    sp.add_argument("--clip-percentile", type=float, default=99.0)
    sp.add_argument("--cmap", choices=("gray", "seismic"), default="gray")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        args.func(args, cfg)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (N2NSeismicError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
