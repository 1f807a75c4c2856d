"""Command-line front end: `latomo <subcommand> [flags]`.

Exit codes: 0 success, 1 invalid input (bad flags, out-of-range values,
malformed files), 2 runtime failure (I/O, quadrature, failed verification).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings

import numpy as np

from . import acceptance
from .analysis import ProbeGeometry, artifact_report, fit_window, predict_streaks
from .io import load_phantom, read_raster, write_raster
from .phantom import ImageGrid, default_disk, rasterize
from .probe import EdgeFrame, QuadratureError, symbol_ratio_scan, write_probe_csv
from .recon import ReconSpec, reconstruct
from .sinogram import AngularRange, Sinogram, radon_phantom

log = logging.getLogger("latomo")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_phantom(p):
    p.add_argument("--phantom", help="ellipse list (cx cy a b tilt_rad density per line); "
                                     "default: disk of radius 0.5 at (0.2, 0)")


def _add_phi(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--phi", type=float, help="wedge half-angle in radians, 0 < phi < pi/2")
    g.add_argument("--phi-deg", type=float, help="wedge half-angle in degrees")


def _add_operator(p):
    p.add_argument("--m", type=int, choices=(0, 1), required=True, help="0: |tau| filter, 1: tau^2 filter")
    p.add_argument("--k", type=int, default=0, help="apodization order (default 0)")
    p.add_argument("--cutoff", type=float, help="low-pass cutoff in cycles per unit "
                                                "(default half the image Nyquist frequency)")
    p.add_argument("--rolloff", type=float, default=0.25, help="taper fraction of the cutoff (default 0.25)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="latomo", description="Limited-angle tomography artifact toolkit.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="rasterize a phantom to a LATG1 image")
    _add_phantom(p)
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--supersample", type=int, default=1, help="sub-samples per pixel axis")
    p.add_argument("--out", required=True)

    p = sub.add_parser("sinogram", help="analytic sinogram to a LATS1 file")
    _add_phantom(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--phi", type=float)
    g.add_argument("--phi-deg", type=float)
    g.add_argument("--full", action="store_true", help="full angular range [0, pi)")
    p.add_argument("--angles", type=int, default=720)
    p.add_argument("--offsets", type=int, default=1024)
    p.add_argument("--out", required=True)

    p = sub.add_parser("recon", help="reconstruct T_m f to a LATG1 image")
    _add_phantom(p)
    p.add_argument("--sinogram", help="LATS1 input instead of simulating from the phantom")
    _add_phi(p)
    _add_operator(p)
    p.add_argument("--full", action="store_true", help="simulate full-range data (needs k = 0)")
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--angles", type=int, default=720)
    p.add_argument("--offsets", type=int, default=1024)
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict-streaks", help="list predicted streak lines as JSON")
    _add_phantom(p)
    _add_phi(p)
    p.add_argument("--report", help="write the JSON here instead of stdout")

    p = sub.add_parser("probe-symbol", help="compare the partial symbol with its leading term")
    _add_phi(p)
    _add_operator(p)
    p.add_argument("--t", type=float, nargs="+", default=[0.5, 1.0])
    p.add_argument("--tau-min", type=float, default=16.0)
    p.add_argument("--tau-max", type=float, default=64.0)
    p.add_argument("--n-tau", type=int, default=9)
    p.add_argument("--report", help="JSON summary; the per-tau table goes to a .csv beside it")

    p = sub.add_parser("measure", help="measure streak positions and decay slopes")
    _add_phantom(p)
    _add_phi(p)
    _add_operator(p)
    p.add_argument("--n", type=int, default=512, help="pixel grid fixing the default cutoff")
    p.add_argument("--image", help="LATG1 reconstruction in which to locate peaks "
                                   "(default: the spectral evaluation)")
    p.add_argument("--report", required=True, help="JSON report; profiles go to a .csv beside it")

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--quick", action="store_true", help="reduced grid sizes")
    p.add_argument("--only", type=int, nargs="+", metavar="N", help="run only these criteria")
    return ap


def _phantom(args):
    return load_phantom(args.phantom) if args.phantom else default_disk()


def _phi(args) -> float:
    if args.phi_deg is not None:
        phi = args.phi_deg * (np.pi / 180)
    else:
        phi = args.phi
    AngularRange(phi)
    return phi


def _spec(args, phi, extent=1.0) -> ReconSpec:
    cutoff = args.cutoff
    if cutoff is None:
        # half of the Nyquist frequency 1 / (2 dx) of the n-pixel grid
        cutoff = (args.n - 1) / (8.0 * extent)
    return ReconSpec.make(args.m, phi, args.k, cutoff, args.rolloff)


def _companion(path, ext=".csv") -> str:
    return path[:-5] + ext if path.endswith(".json") else path + ext


def cmd_phantom(args):
    img = rasterize(_phantom(args), args.n, supersample=args.supersample)
    write_raster(args.out, img)
    log.info("wrote %s (%d x %d)", args.out, img.n, img.n)


def cmd_sinogram(args):
    rng = None if args.full else AngularRange(_phi(args))
    sino = radon_phantom(_phantom(args), rng, args.angles, args.offsets)
    write_raster(args.out, sino)
    log.info("wrote %s (%d angles x %d offsets)", args.out, *sino.values.shape)


def cmd_recon(args):
    phi = _phi(args)
    spec = _spec(args, phi)
    if args.sinogram:
        sino = read_raster(args.sinogram)
        if not isinstance(sino, Sinogram):
            raise ValueError(f"{args.sinogram} holds an image, not a sinogram")
    else:
        sino = radon_phantom(_phantom(args), None if args.full else AngularRange(phi),
                             args.angles, args.offsets)
    img = reconstruct(sino, spec, args.n)
    write_raster(args.out, img)
    log.info("wrote %s", args.out)


def cmd_predict(args):
    preds = predict_streaks(_phantom(args), AngularRange(_phi(args)))
    doc = [{"j": p.j, "generator": list(p.generator), "normal": list(p.direction),
            "line_direction": list(p.line_direction), "source_ellipse": p.source_ellipse}
           for p in preds]
    text = json.dumps(doc, indent=2) + "\n"
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_probe(args):
    phi = _phi(args)
    if args.cutoff is not None:
        log.info("probe-symbol ignores --cutoff; the symbol is computed without a low-pass")
    spec = ReconSpec.make(args.m, phi, args.k, 0.0, args.rolloff)
    probes = []
    for j in (1, 2):
        probes += symbol_ratio_scan(EdgeFrame(j, phi), args.t, (args.tau_min, args.tau_max), spec, args.n_tau)
    rows = []
    for p in probes:
        st = p.ratio_stats
        rows.append({"j": p.frame.j, "t": p.t, "mean_ratio_error": st["mean"], "max_ratio_error": st["max"],
                     "tau_slope": p.slope, "expected_slope": args.m - args.k})
        print(f"j={p.frame.j} t={p.t:g}: mean |A/P-1| = {st['mean']:.4g}, "
              f"tau-slope = {p.slope:.4f} (expected {args.m - args.k})")
    if args.report:
        with open(args.report, "w") as fh:
            json.dump({"m": args.m, "k": args.k, "phi": phi, "tau_window": [args.tau_min, args.tau_max],
                       "probes": rows}, fh, indent=2)
            fh.write("\n")
        write_probe_csv(probes, _companion(args.report))


def cmd_measure(args):
    phantom = _phantom(args)
    phi = _phi(args)
    spec = _spec(args, phi)
    image = None
    if args.image:
        image = read_raster(args.image)
        if not isinstance(image, ImageGrid):
            raise ValueError(f"{args.image} holds a sinogram, not an image")
    geo = ProbeGeometry(pixel=2.0 / (args.n - 1))
    lo, hi = fit_window(phantom, geo, spec.cutoff)
    log.info("decay fits over [%.4g, %.4g] cycles per unit", lo, hi)
    rep = artifact_report(phantom, spec, predict_streaks(phantom, AngularRange(phi)), geo, image)
    rep.write_json(args.report)
    rep.write_csv(_companion(args.report))
    for r in rep.records:
        off = "none" if r.line_offset_error_px is None else f"{r.line_offset_error_px:.2f} px"
        print(f"j={r.j} y*=({r.y_star[0]:.4f}, {r.y_star[1]:.4f}): peak offset {off}, "
              f"artifact slope {r.artifact_slope:.3f}, edge slope {r.edge_slope:.3f}, "
              f"gap {r.gap:.3f} (predicted {r.predicted_gap:.1f})")


def cmd_verify(args):
    results = acceptance.run_checks(quick=args.quick, numbers=args.only)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 2 if failed else 0


COMMANDS = {"phantom": cmd_phantom, "sinogram": cmd_sinogram, "recon": cmd_recon,
            "predict-streaks": cmd_predict, "probe-symbol": cmd_probe, "measure": cmd_measure,
            "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.filterwarnings("ignore", message=".*TBB.*")
    try:
        return int(COMMANDS[args.command](args) or 0)
    except ValueError as exc:
        print(f"latomo: error: {exc}", file=sys.stderr)
        return 1
    except (QuadratureError, RuntimeError, OSError, MemoryError) as exc:
        print(f"latomo: runtime failure: {exc}", file=sys.stderr)
        return 2
