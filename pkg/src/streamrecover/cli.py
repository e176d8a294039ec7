"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or malformed
input, inconsistent dimensions).
"""
import argparse
import json
import sys
from pathlib import Path

from . import _accel
from .core import DimensionError, HistoryBuffer
from .io import ParseError, read_ppm, read_trace, write_flo, write_ppm, write_report, write_table_csv
from .resample import BoundaryPolicy, degrade, upscale
from .simulator import RunConfig, SceneError, SceneSpec, run_simulation, sweep_gap, sweep_scale
from .synthesis import PipelineConfig, enhance_lossy, predict_lost

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _build_parser():
    p = _Parser(prog="streamrecover", description="Frame recovery for lossy video streaming.")
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, help="numba worker threads")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    d = sub.add_parser("degrade", help="antialiased bicubic downscale by an integer factor", parents=[common])
    d.add_argument("--in", dest="src", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--scale", type=int, required=True)
    d.add_argument("--policy", choices=[b.value for b in BoundaryPolicy], default="clamp")

    u = sub.add_parser("upscale", help="bicubic upscale to a target size", parents=[common])
    u.add_argument("--in", dest="src", required=True)
    u.add_argument("--out", required=True)
    u.add_argument("--w", type=int, required=True)
    u.add_argument("--h", type=int, required=True)
    u.add_argument("--policy", choices=[b.value for b in BoundaryPolicy], default="clamp")

    for name, text in (("predict", "predict a lost frame from 3 history frames"),
                       ("enhance", "recover a frame received at low resolution")):
        q = sub.add_parser(name, help=text, parents=[common])
        q.add_argument("--hist", nargs=3, required=True, metavar="FRAME", help="I_-2 I_-1 I_0")
        q.add_argument("--t", type=float, default=1.0)
        q.add_argument("--out", required=True)
        q.add_argument("--flow-out", help="also write the fused flow F_0->t as .flo")
        q.add_argument("--pipeline", help="JSON file with PipelineConfig fields")
        if name == "enhance":
            q.add_argument("--lr", required=True)
            q.add_argument("--scale", type=int, required=True)

    f = sub.add_parser("flow-eval", help="flow EPE versus LR scale on a synthetic scene", parents=[common])
    f.add_argument("--scene", required=True)
    f.add_argument("--sweep-scale", type=_int_list, default=[2, 4, 8, 12])
    f.add_argument("--gap", type=int, default=1)
    f.add_argument("--seed", type=int)
    f.add_argument("--pipeline")
    f.add_argument("--out", required=True)

    g = sub.add_parser("gap-eval", help="recovery PSNR versus frame gap on a synthetic scene", parents=[common])
    g.add_argument("--scene", required=True)
    g.add_argument("--sweep-gap", type=_int_list, default=[1, 2, 3])
    g.add_argument("--scale", type=int, default=4)
    g.add_argument("--seed", type=int)
    g.add_argument("--pipeline")
    g.add_argument("--out", required=True)

    s = sub.add_parser("simulate", help="replay a channel trace and write a recovery report", parents=[common])
    s.add_argument("--scene", required=True, help="scene JSON or a directory of PPM frames")
    s.add_argument("--trace", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--format", choices=["json", "csv"])
    s.add_argument("--history", choices=["recovered", "oracle"], default="recovered")
    s.add_argument("--gap", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.add_argument("--pipeline")
    return p


def _pipeline(path):
    if not path:
        return PipelineConfig()
    return PipelineConfig.from_dict(json.loads(Path(path).read_text()))


def _scene(path):
    p = Path(path)
    return str(p) if p.is_dir() else SceneSpec.from_json(p)


def _echo(args):
    return {k: v for k, v in sorted(vars(args).items()) if v is not None}


def _history(paths):
    return HistoryBuffer.from_frames([read_ppm(p) for p in paths])


def _run(args):
    params = _echo(args)
    comment = "streamrecover " + json.dumps(params, sort_keys=True)
    cmd = args.command
    if cmd == "degrade":
        if args.scale < 2:
            raise UsageError(f"--scale must be >= 2, got {args.scale}")
        write_ppm(args.out, degrade(read_ppm(args.src), args.scale, args.policy), comment)
    elif cmd == "upscale":
        if args.w < 1 or args.h < 1:
            raise UsageError("--w and --h must be positive")
        img = read_ppm(args.src)
        if args.h < img.shape[0] or args.w < img.shape[1]:
            raise UsageError(f"target {args.w}x{args.h} is smaller than the {img.shape[1]}x{img.shape[0]} input")
        write_ppm(args.out, upscale(img, args.h, args.w, args.policy), comment)
    elif cmd in ("predict", "enhance"):
        if not args.t > 0:
            raise UsageError(f"--t must be > 0, got {args.t}")
        cfg = _pipeline(args.pipeline)
        history = _history(args.hist)
        if cmd == "predict":
            out, diag = predict_lost(history, args.t, cfg)
        else:
            if args.scale < 2:
                raise UsageError(f"--scale must be >= 2, got {args.scale}")
            out, diag = enhance_lossy(history, read_ppm(args.lr), args.scale, args.t, cfg)
        write_ppm(args.out, out, comment)
        if args.flow_out:
            write_flo(args.flow_out, diag.fused)
    elif cmd in ("flow-eval", "gap-eval"):
        cfg = RunConfig(SceneSpec.from_json(args.scene), "H H H H", _pipeline(args.pipeline),
                        gap=getattr(args, "gap", 1), seed=args.seed)
        if cmd == "flow-eval":
            if args.gap < 1:
                raise UsageError(f"--gap must be >= 1, got {args.gap}")
            rows = sweep_scale(cfg, args.sweep_scale)
        else:
            rows = sweep_gap(cfg, args.sweep_gap, args.scale)
        header = json.dumps({"command": cmd, **cfg.to_dict(), "params": params}, sort_keys=True)
        write_table_csv(rows, args.out, header_comment=header)
    elif cmd == "simulate":
        if args.gap < 1:
            raise UsageError(f"--gap must be >= 1, got {args.gap}")
        cfg = RunConfig(_scene(args.scene), read_trace(args.trace), _pipeline(args.pipeline),
                        gap=args.gap, history_mode=args.history, seed=args.seed)
        write_report(run_simulation(cfg), args.report, args.format)
    if cmd not in ("flow-eval", "gap-eval", "simulate"):
        print(json.dumps(params, sort_keys=True))
    return EXIT_OK


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError("--threads must be >= 1")
            _accel.set_num_threads(args.threads)
        return _run(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, DimensionError, SceneError, OSError, ValueError, json.JSONDecodeError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
